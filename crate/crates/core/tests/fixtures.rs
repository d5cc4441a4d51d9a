use std::path::PathBuf;

use spsnn_core::basis::enumerate_linear;
use spsnn_core::data::{load_csv, DataError, LabelColumn, LabelMapping, MinMaxScaler};
use spsnn_core::MonomialBasis;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn sonar_layout_with_letter_labels() {
    let d = load_csv(
        fixture("sonar_tiny.csv"),
        LabelColumn::Last,
        &LabelMapping::sonar(),
    )
    .unwrap();
    assert_eq!(d.len(), 6);
    assert_eq!(d.n_features(), 60);
    assert_eq!(
        d.targets().collect::<Vec<_>>(),
        vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]
    );
    // bias input appended
    assert_eq!(d.samples()[0].x.len(), 61);
    assert_eq!(d.samples()[0].x[60], -1.0);
    assert!(d.is_binary());
}

#[test]
fn pima_layout_skips_header() {
    let d = load_csv(
        fixture("pima_tiny.csv"),
        LabelColumn::Last,
        &LabelMapping::Numeric,
    )
    .unwrap();
    assert_eq!(d.len(), 5);
    assert_eq!(d.n_features(), 8);
    assert_eq!(
        d.samples()[1].x[..8],
        [1.0, 85.0, 66.0, 29.0, 0.0, 26.6, 0.351, 31.0]
    );
    let scaled = MinMaxScaler::fit(&d).unwrap().transform(&d);
    for s in scaled.samples() {
        assert!(s.x[..8].iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn label_column_can_be_first() {
    let d = load_csv(
        fixture("pima_tiny.csv"),
        LabelColumn::Index(0),
        &LabelMapping::Numeric,
    )
    .unwrap();
    assert_eq!(
        d.targets().collect::<Vec<_>>(),
        vec![6.0, 1.0, 8.0, 1.0, 0.0]
    );
    assert_eq!(d.samples()[0].x[7], 1.0);
}

#[test]
fn ragged_rows_are_rejected_with_row_number() {
    let err = load_csv(
        fixture("ragged.csv"),
        LabelColumn::Last,
        &LabelMapping::Numeric,
    )
    .unwrap_err();
    match err {
        DataError::Parse { row, .. } => assert_eq!(row, 3),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn unknown_labels_are_rejected() {
    let err = load_csv(
        fixture("unknown_label.csv"),
        LabelColumn::Last,
        &LabelMapping::sonar(),
    )
    .unwrap_err();
    assert!(
        matches!(err, DataError::UnknownLabel { row: 2, .. }),
        "{err:?}"
    );
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_csv(
        fixture("absent.csv"),
        LabelColumn::Last,
        &LabelMapping::Numeric,
    )
    .unwrap_err();
    assert!(matches!(err, DataError::Io { .. }));
}

#[test]
fn basis_file_matches_enumeration() {
    let text = std::fs::read_to_string(fixture("n3_linear.basis")).unwrap();
    let parsed: MonomialBasis = text.parse().unwrap();
    let expected = enumerate_linear(3, 3).unwrap();
    assert_eq!(parsed.terms(), expected.terms());
    assert_eq!(parsed.to_basis_string(), text);
}
