//! Writes a run's artifacts:
//!
//! ```text
//! <out>/report.txt        comparison tables and the selected structure
//! <out>/report.csv        the same tables at full precision
//! <out>/config.toml       effective configuration, reusable with --config
//! <out>/selected.basis    structure chosen in the first trial
//! <out>/curves/<arm>-<seed>.csv
//! <out>/models/<name>.spsnn
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::BenchError;
use crate::report::{render_grid, selected_basis_summary};
use crate::runner::RunOutput;

fn write(path: PathBuf, contents: &str) -> Result<(), BenchError> {
    fs::write(&path, contents).map_err(|source| BenchError::Io { path, source })
}

fn mkdir(path: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The full text report: tables, first-trial structure, selection frequencies.
pub fn text_report(out: &RunOutput) -> Result<String, BenchError> {
    let mut text = out.report.to_text()?;
    text.push_str("\nStructure selected in the first trial\n");
    text.push_str(&selected_basis_summary(&out.selected));

    let counts = out.selection_counts();
    let _ = writeln!(
        text,
        "\nHow often each monomial survived pruning ({} structural runs)",
        out.selections.len()
    );
    let mut grid = vec![["term", "Λ_q", "complete-basis position", "kept"]
        .map(String::from)
        .to_vec()];
    for (i, term) in out.complete_basis.terms().iter().enumerate() {
        if counts[i] > 0 {
            grid.push(vec![
                term.sigma_notation(),
                term.to_string(),
                (i + 1).to_string(),
                counts[i].to_string(),
            ]);
        }
    }
    text.push_str(&render_grid(&grid));
    Ok(text)
}

pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), BenchError> {
    mkdir(dir)?;
    write(dir.join("report.txt"), &text_report(out)?)?;
    write(dir.join("report.csv"), &out.report.to_csv()?)?;
    write(dir.join("config.toml"), &out.config.to_toml())?;
    write(
        dir.join("selected.basis"),
        &out.selected.pruned_basis.to_basis_string(),
    )?;
    let curves = dir.join("curves");
    mkdir(&curves)?;
    for c in &out.curves {
        if let Some(log) = &c.log {
            write(curves.join(c.file_name()), &log.to_csv_string())?;
        }
    }
    let models = dir.join("models");
    mkdir(&models)?;
    for (name, m) in &out.models {
        write(models.join(format!("{name}.spsnn")), &m.to_model_string())?;
    }
    Ok(())
}
