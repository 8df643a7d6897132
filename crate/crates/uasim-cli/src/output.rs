//! Result rows, CSV emission, resume bookkeeping, and noise-draw sidecar
//! records.
//!
//! The CSV layout is fixed and versioned: a `#`-prefixed version line (which
//! plotting tools treat as a comment), a header, then one row per sweep
//! point.  Floats carry 9 significant digits so runs diff bit-for-bit; the
//! `wallclock` column is the one informational exception.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CSV_VERSION_LINE: &str = "# uasim csv v1";
pub const CSV_HEADER: &str = "sigma,N,n,k,fidelity,fidelity_stderr,prob_exact,prob_approx,prob_stderr,enhancement_vs_n1,samples,seed,wallclock";

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub sigma: f64,
    pub modes: usize,
    pub replicas: usize,
    pub noisy_params: usize,
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub prob_exact: f64,
    pub prob_approx: f64,
    pub prob_stderr: f64,
    pub enhancement_vs_n1: f64,
    pub samples: usize,
    pub seed: u64,
    /// Seconds spent computing this row; informational only.
    pub wallclock: f64,
}

/// 9 significant digits, locale-independent.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

impl ResultRow {
    pub fn validate(&self) -> Result<()> {
        let floats = [
            ("sigma", self.sigma),
            ("fidelity", self.fidelity),
            ("fidelity_stderr", self.fidelity_stderr),
            ("prob_exact", self.prob_exact),
            ("prob_approx", self.prob_approx),
            ("prob_stderr", self.prob_stderr),
            ("enhancement_vs_n1", self.enhancement_vs_n1),
        ];
        for (name, x) in floats {
            if !x.is_finite() {
                return Err(CliError::Numerical(format!(
                    "row at sigma={}, N={}, n={}: {name} is not finite ({x})",
                    self.sigma, self.modes, self.replicas
                )));
            }
        }
        if self.fidelity_stderr < 0.0 || self.prob_stderr < 0.0 {
            return Err(CliError::Numerical("negative standard error".into()));
        }
        for (name, x) in [
            ("fidelity", self.fidelity),
            ("prob_exact", self.prob_exact),
            ("prob_approx", self.prob_approx),
        ] {
            if !(0.0..=1.0 + 1e-12).contains(&x) {
                return Err(CliError::Numerical(format!(
                    "row at sigma={}, N={}, n={}: {name}={x} outside [0, 1]",
                    self.sigma, self.modes, self.replicas
                )));
            }
        }
        Ok(())
    }

    pub fn to_fields(&self) -> Vec<String> {
        vec![
            fmt_float(self.sigma),
            self.modes.to_string(),
            self.replicas.to_string(),
            self.noisy_params.to_string(),
            fmt_float(self.fidelity),
            fmt_float(self.fidelity_stderr),
            fmt_float(self.prob_exact),
            fmt_float(self.prob_approx),
            fmt_float(self.prob_stderr),
            fmt_float(self.enhancement_vs_n1),
            self.samples.to_string(),
            self.seed.to_string(),
            format!("{:.3}", self.wallclock),
        ]
    }

    /// Identity of a row for resume purposes (everything but the measured
    /// values and the wallclock).
    pub fn key(&self) -> RowKey {
        RowKey {
            sigma: fmt_float(self.sigma),
            modes: self.modes,
            replicas: self.replicas,
            noisy_params: self.noisy_params,
            samples: self.samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RowKey {
    pub sigma: String,
    pub modes: usize,
    pub replicas: usize,
    pub noisy_params: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Writes rows to `path`; with `append` the version line and header are only
/// emitted when the file does not exist yet.
pub fn write_rows(path: &Path, rows: &[ResultRow], append: bool) -> Result<()> {
    for row in rows {
        row.validate()?;
    }
    let fresh = !append || !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(append)
        .write(true)
        .truncate(!append)
        .open(path)
        .map_err(|e| CliError::Numerical(format!("cannot open {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| {
        CliError::Numerical(format!("cannot write {}: {e}", path.display()))
    };
    if fresh {
        writeln!(out, "{CSV_VERSION_LINE}").map_err(io_err)?;
        writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    }
    for row in rows {
        writeln!(out, "{}", row.to_fields().join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

/// Keys of rows already present in a CSV written by this tool.
pub fn existing_keys(path: &Path) -> Result<HashSet<RowKey>> {
    let mut keys = HashSet::new();
    if !path.exists() {
        return Ok(keys);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Numerical(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    for record in reader.records() {
        let r = record
            .map_err(|e| CliError::Numerical(format!("malformed row in {}: {e}", path.display())))?;
        if r.len() < 13 {
            return Err(CliError::Numerical(format!(
                "row in {} has {} fields, expected 13",
                path.display(),
                r.len()
            )));
        }
        let parse_usize = |i: usize| -> Result<usize> {
            r[i].parse()
                .map_err(|_| CliError::Numerical(format!("bad integer field {:?}", &r[i])))
        };
        keys.insert(RowKey {
            sigma: r[0].to_string(),
            modes: parse_usize(1)?,
            replicas: parse_usize(2)?,
            noisy_params: parse_usize(3)?,
            samples: parse_usize(10)?,
            seed: r[11]
                .parse()
                .map_err(|_| CliError::Numerical(format!("bad seed field {:?}", &r[11])))?,
        });
    }
    Ok(keys)
}

/// Ordered noise draws of one Monte-Carlo sample, stored next to the CSV so
/// the exact realization can be replayed elsewhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub sample: usize,
    pub sigma: f64,
    pub draws: Vec<f64>,
}

/// `results.csv` + sample 17 → `results.sample17.draws.json`.
pub fn sidecar_path(csv_path: &Path, sample: usize) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    csv_path.with_file_name(format!("{stem}.sample{sample}.draws.json"))
}

pub fn write_draw_record(path: &Path, record: &DrawRecord) -> Result<()> {
    let text = serde_json::to_string_pretty(record)
        .map_err(|e| CliError::Numerical(format!("cannot serialize draw record: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display())))
}

pub fn read_draw_record(path: &Path) -> Result<DrawRecord> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> ResultRow {
        ResultRow {
            sigma: 0.05,
            modes: 2,
            replicas: 2,
            noisy_params: 3,
            fidelity: 0.987654321,
            fidelity_stderr: 1.2e-4,
            prob_exact: 0.9951,
            prob_approx: 0.9949,
            prob_stderr: 3.0e-5,
            enhancement_vs_n1: 1.93,
            samples: 1000,
            seed: 42,
            wallclock: 0.25,
        }
    }

    #[test]
    fn float_format_has_nine_significant_digits() {
        assert_eq!(fmt_float(0.92873), "9.28730000e-1");
        assert_eq!(fmt_float(1.0), "1.00000000e0");
        assert_eq!(fmt_float(0.0), "0.00000000e0");
        assert_eq!(fmt_float(3.5e-17), "3.50000000e-17");
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let mut row = sample_row();
        assert!(row.validate().is_ok());
        row.fidelity = f64::NAN;
        assert!(row.validate().is_err());
        let mut row = sample_row();
        row.fidelity_stderr = -1.0;
        assert!(row.validate().is_err());
        let mut row = sample_row();
        row.prob_exact = 1.5;
        assert!(row.validate().is_err());
    }

    #[test]
    fn written_rows_are_recovered_as_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let row = sample_row();
        write_rows(&path, &[row.clone()], false).unwrap();
        let keys = existing_keys(&path).unwrap();
        assert_eq!(keys.len(), 1);
        assert!(keys.contains(&row.key()));

        // appending keeps the single header
        write_rows(&path, &[row.clone()], true).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches(CSV_HEADER).count(), 1);
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/x/results.csv"), 17),
            Path::new("/tmp/x/results.sample17.draws.json")
        );
    }

    #[test]
    fn draw_record_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.draws.json");
        let rec = DrawRecord {
            schema_version: 1,
            seed: 9,
            sample: 3,
            sigma: 0.05,
            draws: vec![0.1f64.sin(), -2.0f64.sqrt(), 3.5e-17],
        };
        write_draw_record(&path, &rec).unwrap();
        let back = read_draw_record(&path).unwrap();
        assert_eq!(back.seed, 9);
        for (a, b) in rec.draws.iter().zip(&back.draws) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
