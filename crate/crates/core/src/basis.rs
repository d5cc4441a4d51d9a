//! Monomial bases over the outputs of the first summation layer.
//!
//! A basis is an ordered list of index multisets. Each multiset names the
//! hidden units multiplied together by one product node; the empty multiset
//! is the constant monomial. Indices are stored zero-based and rendered
//! one-based (`σ₁`, `{1,2,2}`) in every human-facing format.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest basis the enumerators will build unless a different cap is given.
pub const DEFAULT_TERM_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasisError {
    #[error("n_vars and order must both be at least 1 (got n_vars={n_vars}, order={order})")]
    ZeroDimension { n_vars: usize, order: usize },
    #[error("basis would contain {count} terms, above the cap of {cap}")]
    TooLarge { count: u64, cap: u64 },
    #[error("term count overflows for n_vars={n_vars}, order={order}")]
    Overflow { n_vars: usize, order: usize },
    #[error("invalid basis: {0}")]
    Invalid(String),
    #[error("basis line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A sorted multiset of zero-based variable indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Multiset {
    indices: Vec<usize>,
}

impl Multiset {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self { indices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a multiset from one-based indices, as written in `{1,2,2}`.
    ///
    /// Panics if any index is zero.
    pub fn from_one_based(indices: &[usize]) -> Self {
        Self::new(
            indices
                .iter()
                .map(|&i| {
                    assert!(i >= 1, "one-based index must be at least 1");
                    i - 1
                })
                .collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Total degree, counting multiplicity.
    pub fn degree(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn multiplicity(&self, var: usize) -> usize {
        self.indices.iter().filter(|&&i| i == var).count()
    }

    pub fn has_repeats(&self) -> bool {
        self.indices.windows(2).any(|w| w[0] == w[1])
    }

    /// Distinct variables with their multiplicities, in ascending variable order.
    pub fn factors(&self) -> Vec<(usize, u32)> {
        let mut out: Vec<(usize, u32)> = Vec::new();
        for &i in &self.indices {
            match out.last_mut() {
                Some((v, m)) if *v == i => *m += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    /// Renders the monomial in σ notation, e.g. `σ₂σ₃²`; the constant renders as `1`.
    pub fn sigma_notation(&self) -> String {
        if self.is_empty() {
            return "1".to_string();
        }
        let mut s = String::new();
        for (var, mult) in self.factors() {
            s.push('σ');
            s.push_str(&to_script(var + 1, SUBSCRIPTS));
            if mult > 1 {
                s.push_str(&to_script(mult as usize, SUPERSCRIPTS));
            }
        }
        s
    }
}

const SUBSCRIPTS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
const SUPERSCRIPTS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];

fn to_script(n: usize, table: [char; 10]) -> String {
    n.to_string()
        .bytes()
        .map(|b| table[(b - b'0') as usize])
        .collect()
}

/// One-based set notation: `{1,2,2}`, `∅` for the constant.
impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// The Π-layer structure: `terms[q]` is the index multiset of product node `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    order: usize,
    n_vars: usize,
    terms: Vec<Multiset>,
}

impl MonomialBasis {
    /// Builds a basis from explicit terms, checking index range, degree and distinctness.
    pub fn new(n_vars: usize, order: usize, terms: Vec<Multiset>) -> Result<Self, BasisError> {
        if n_vars == 0 || order == 0 {
            return Err(BasisError::ZeroDimension { n_vars, order });
        }
        for t in &terms {
            if let Some(&i) = t.indices.iter().find(|&&i| i >= n_vars) {
                return Err(BasisError::Invalid(format!(
                    "term {t} uses variable {} but the basis has {n_vars}",
                    i + 1
                )));
            }
            if t.degree() > order {
                return Err(BasisError::Invalid(format!(
                    "term {t} has degree {} above order {order}",
                    t.degree()
                )));
            }
        }
        let mut sorted: Vec<&Multiset> = terms.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(BasisError::Invalid(format!("duplicate term {}", w[0])));
        }
        Ok(Self {
            order,
            n_vars,
            terms,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> &[Multiset] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position_of_constant(&self) -> Option<usize> {
        self.terms.iter().position(Multiset::is_empty)
    }

    /// Sub-basis keeping the given positions, in the order given.
    pub fn select(&self, positions: &[usize]) -> MonomialBasis {
        MonomialBasis {
            order: self.order,
            n_vars: self.n_vars,
            terms: positions.iter().map(|&p| self.terms[p].clone()).collect(),
        }
    }

    /// Serializes in the `.basis` text format: a header comment, then one term per
    /// line with one-based indices separated by spaces; the constant is an empty line.
    pub fn to_basis_string(&self) -> String {
        let mut out = format!("# n_vars={} order={}\n", self.n_vars, self.order);
        for t in &self.terms {
            out.push_str(&term_line(t));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn term_line(t: &Multiset) -> String {
    t.indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_term_line(line: &str, line_no: usize) -> Result<Multiset, BasisError> {
    let mut idx = Vec::new();
    for tok in line.split_whitespace() {
        let v: usize = tok.parse().map_err(|_| BasisError::Parse {
            line: line_no,
            msg: format!("`{tok}` is not a variable index"),
        })?;
        if v == 0 {
            return Err(BasisError::Parse {
                line: line_no,
                msg: "variable indices are one-based".into(),
            });
        }
        idx.push(v - 1);
    }
    Ok(Multiset::new(idx))
}

impl FromStr for MonomialBasis {
    type Err = BasisError;

    /// Parses the `.basis` format. Missing header fields are inferred from the
    /// largest index and degree seen.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut n_vars = None;
        let mut order = None;
        let mut terms = Vec::new();
        for (k, line) in s.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some((key, val)) = field.split_once('=') {
                        let parsed = val.parse::<usize>().ok();
                        match key {
                            "n_vars" => n_vars = parsed,
                            "order" => order = parsed,
                            _ => {}
                        }
                    }
                }
                continue;
            }
            terms.push(parse_term_line(trimmed, k + 1)?);
        }
        let n_vars = n_vars.unwrap_or_else(|| {
            terms
                .iter()
                .flat_map(|t| t.indices().iter().copied())
                .max()
                .map_or(1, |m| m + 1)
        });
        let order =
            order.unwrap_or_else(|| terms.iter().map(Multiset::degree).max().unwrap_or(1).max(1));
        MonomialBasis::new(n_vars, order, terms)
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

fn check_dims(n_vars: usize, order: usize) -> Result<(), BasisError> {
    if n_vars == 0 || order == 0 {
        Err(BasisError::ZeroDimension { n_vars, order })
    } else {
        Ok(())
    }
}

/// Number of monomials of total degree ≤ `order` in `n_vars` variables: C(N+d, d).
pub fn count_complete(n_vars: usize, order: usize) -> Result<u64, BasisError> {
    check_dims(n_vars, order)?;
    binomial(n_vars as u64 + order as u64, order as u64)
        .ok_or(BasisError::Overflow { n_vars, order })
}

/// Number of multilinear monomials of degree ≤ `order`: Σ_{k≤d} C(N, k).
pub fn count_linear(n_vars: usize, order: usize) -> Result<u64, BasisError> {
    check_dims(n_vars, order)?;
    (0..=order.min(n_vars) as u64).try_fold(0u64, |acc, k| {
        binomial(n_vars as u64, k)
            .and_then(|c| acc.checked_add(c))
            .ok_or(BasisError::Overflow { n_vars, order })
    })
}

/// All monomials up to `order`, graded then lexicographic.
pub fn enumerate_complete(n_vars: usize, order: usize) -> Result<MonomialBasis, BasisError> {
    enumerate_complete_capped(n_vars, order, DEFAULT_TERM_CAP)
}

pub fn enumerate_complete_capped(
    n_vars: usize,
    order: usize,
    cap: u64,
) -> Result<MonomialBasis, BasisError> {
    let count = count_complete(n_vars, order)?;
    enumerate(n_vars, order, count, cap, false)
}

/// Multilinear monomials (no repeated variable) up to `order`, graded then lexicographic.
pub fn enumerate_linear(n_vars: usize, order: usize) -> Result<MonomialBasis, BasisError> {
    enumerate_linear_capped(n_vars, order, DEFAULT_TERM_CAP)
}

pub fn enumerate_linear_capped(
    n_vars: usize,
    order: usize,
    cap: u64,
) -> Result<MonomialBasis, BasisError> {
    let count = count_linear(n_vars, order)?;
    enumerate(n_vars, order, count, cap, true)
}

fn enumerate(
    n_vars: usize,
    order: usize,
    count: u64,
    cap: u64,
    strict: bool,
) -> Result<MonomialBasis, BasisError> {
    if count > cap {
        return Err(BasisError::TooLarge { count, cap });
    }
    let mut terms = Vec::with_capacity(count as usize);
    for degree in 0..=order {
        push_sequences(n_vars, degree, strict, &mut terms);
    }
    debug_assert_eq!(terms.len() as u64, count);
    Ok(MonomialBasis {
        order,
        n_vars,
        terms,
    })
}

/// Appends every non-decreasing (or strictly increasing) index sequence of the
/// given length, in lexicographic order.
fn push_sequences(n_vars: usize, len: usize, strict: bool, out: &mut Vec<Multiset>) {
    if len == 0 {
        out.push(Multiset::empty());
        return;
    }
    let step = usize::from(strict);
    // smallest sequence: 0,0,0 or 0,1,2
    let mut seq: Vec<usize> = (0..len).map(|k| k * step).collect();
    if seq[len - 1] >= n_vars {
        return;
    }
    loop {
        out.push(Multiset {
            indices: seq.clone(),
        });
        // rightmost position that can still grow
        let mut pos = len;
        while pos > 0 {
            let p = pos - 1;
            let max_here = n_vars - 1 - (len - 1 - p) * step;
            if seq[p] < max_here {
                break;
            }
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        let p = pos - 1;
        seq[p] += 1;
        for k in p + 1..len {
            seq[k] = seq[k - 1] + step;
        }
    }
}

/// Value of the monomial at `sigma`; the empty multiset evaluates to exactly 1.
pub fn eval_monomial(term: &Multiset, sigma: &[f64]) -> f64 {
    term.indices.iter().map(|&i| sigma[i]).product()
}

/// ∂τ/∂σ_var for τ = ∏ σ_i, using the full multiplicity rule
/// m·σ_var^(m−1)·∏_{i≠var} σ_i^(m_i). Zero when `var` does not occur.
pub fn monomial_partial(term: &Multiset, var: usize, sigma: &[f64]) -> f64 {
    let mut mult = 0i32;
    let mut rest = 1.0;
    for &i in &term.indices {
        if i == var {
            mult += 1;
        } else {
            rest *= sigma[i];
        }
    }
    if mult == 0 {
        return 0.0;
    }
    f64::from(mult) * sigma[var].powi(mult - 1) * rest
}
