//! Training traces: one row per recorded step, written as strict
//! `k,passes,seconds,objective,subopt` CSV files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One recorded point of a training run. `subopt` stays empty until a
/// reference solution is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub passes: f64,
    pub seconds: f64,
    pub objective: f64,
    pub subopt: Option<f64>,
}

/// Run provenance carried alongside the rows (stored in the experiment
/// manifest, not in the CSV).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    pub meta: TraceMeta,
}

/// Final iterate of an optimizer run together with its trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub w: Vec<f64>,
    pub trace: TrainingTrace,
}

impl TrainingTrace {
    pub fn new(seed: u64) -> Self {
        Self {
            rows: Vec::new(),
            meta: TraceMeta {
                config_hash: String::new(),
                seed,
                version: format!("sorel-{}", env!("CARGO_PKG_VERSION")),
            },
        }
    }

    pub fn push(&mut self, k: u64, passes: f64, seconds: f64, objective: f64) {
        self.rows.push(TraceRow {
            k,
            passes,
            seconds,
            objective,
            subopt: None,
        });
    }

    /// Fills the `subopt` column as `(objective - ref) / (w0 - ref)`.
    pub fn attach_suboptimality(&mut self, objective_at_w0: f64, objective_at_ref: f64) -> Result<()> {
        for row in &mut self.rows {
            row.subopt = Some(crate::harness::suboptimality(
                row.objective,
                objective_at_w0,
                objective_at_ref,
            )?);
        }
        Ok(())
    }

    /// Passes and wall time must be nondecreasing across rows.
    pub fn validate(&self) -> Result<()> {
        for pair in self.rows.windows(2) {
            if pair[1].passes < pair[0].passes {
                return Err(Error::Config(format!(
                    "trace passes decreased from {} to {}",
                    pair[0].passes, pair[1].passes
                )));
            }
            if pair[1].seconds < pair[0].seconds {
                return Err(Error::Config(format!(
                    "trace seconds decreased from {} to {}",
                    pair[0].seconds, pair[1].seconds
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,passes,seconds,objective,subopt\n");
        for r in &self.rows {
            let sub = r.subopt.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.k, r.passes, r.seconds, r.objective, sub
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err("missing header row".to_string()))?;
        if header.trim_end() != "k,passes,seconds,objective,subopt" {
            return Err(parse_err(format!(
                "bad header `{header}`; expected `k,passes,seconds,objective,subopt`"
            )));
        }
        let mut trace = TrainingTrace::new(0);
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(parse_err(format!(
                    "row {}: expected 5 columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |s: &str, col: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    parse_err(format!("row {}: non-numeric `{s}` in column {col}", lineno + 1))
                })
            };
            trace.rows.push(TraceRow {
                k: fields[0].parse::<u64>().map_err(|_| {
                    parse_err(format!("row {}: bad k `{}`", lineno + 1, fields[0]))
                })?,
                passes: num(fields[1], "passes")?,
                seconds: num(fields[2], "seconds")?,
                objective: num(fields[3], "objective")?,
                subopt: if fields[4].is_empty() {
                    None
                } else {
                    Some(num(fields[4], "subopt")?)
                },
            });
        }
        Ok(trace)
    }

    /// Last recorded suboptimality, if attached.
    pub fn final_subopt(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.subopt)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.objective)
    }
}
