//! Report emission: CSV (manifest as `#` comment lines, header row, data
//! rows, reals with 12 significant digits, LF endings) and JSON (a single
//! `{manifest, rows}` object). Bodies are deterministic given the config;
//! only the `wall_ms` manifest field varies between reruns.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use vaughan::moments::MomentReport;
use vaughan::verify::{DecayFit, ResidualRow};

use crate::config::OutputFormat;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: String,
    pub sieve_limit: u64,
    pub wall_ms: u64,
    pub thread_count: usize,
}

/// One constants row: name, value, truncation bound.
pub struct ConstantRow {
    pub name: String,
    pub value: f64,
    pub tail_bound: f64,
}

pub struct MassRow {
    pub x: u64,
    pub q: u64,
    pub r: u64,
    pub invertible_only: bool,
    pub total: f64,
    pub predicted: f64,
}

pub struct FrRow {
    pub n: u64,
    pub r: u64,
    /// Exact value as `numerator/denominator`, when the oracle ran.
    pub exact: Option<String>,
    pub float: f64,
}

pub enum ReportBody {
    Moments(Vec<MomentReport>),
    Residuals {
        rows: Vec<ResidualRow>,
        fit: Option<DecayFit>,
    },
    Constants(Vec<ConstantRow>),
    Fr(FrRow),
    Mass(Vec<MassRow>),
}

/// 12 significant digits, deterministic.
pub fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.11e}")
    }
}

pub fn emit_report(
    manifest: &RunManifest,
    body: &ReportBody,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv(manifest, body),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&to_json(manifest, body))?;
            s.push('\n');
            s
        }
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write report to '{}'", path.display()))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn to_csv(manifest: &RunManifest, body: &ReportBody) -> String {
    let mut out = String::new();
    out.push_str(&format!("# tool_version={}\n", manifest.tool_version));
    out.push_str(&format!("# config={}\n", manifest.config));
    out.push_str(&format!("# sieve_limit={}\n", manifest.sieve_limit));
    out.push_str(&format!("# threads={}\n", manifest.thread_count));
    out.push_str(&format!("# wall_ms={}\n", manifest.wall_ms));
    match body {
        ReportBody::Moments(rows) => {
            out.push_str("x,M,R,a,coprime,q_count,empirical,theory,residual\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.params.x,
                    fmt_real(r.params.m_or_n),
                    r.params.r,
                    r.params.a,
                    r.params.coprime,
                    r.q_count,
                    fmt_real(r.empirical),
                    fmt_real(r.theory),
                    fmt_real(r.residual),
                ));
            }
        }
        ReportBody::Residuals { rows, fit } => {
            out.push_str("param,exact,predicted,residual,normalized\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_real(r.param),
                    fmt_real(r.exact),
                    fmt_real(r.predicted),
                    fmt_real(r.residual),
                    fmt_real(r.normalized),
                ));
            }
            if let Some(fit) = fit {
                out.push_str(&format!(
                    "# fit exponent={} r_squared={} rows={}\n",
                    fmt_real(fit.exponent),
                    fmt_real(fit.r_squared),
                    fit.rows_used
                ));
            }
        }
        ReportBody::Constants(rows) => {
            out.push_str("name,value,tail_bound\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{}\n",
                    r.name,
                    fmt_real(r.value),
                    fmt_real(r.tail_bound)
                ));
            }
        }
        ReportBody::Fr(row) => {
            out.push_str("n,R,exact,float\n");
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.n,
                row.r,
                row.exact.as_deref().unwrap_or(""),
                fmt_real(row.float)
            ));
        }
        ReportBody::Mass(rows) => {
            out.push_str("x,q,R,invertible_only,total,predicted,residual\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.x,
                    r.q,
                    r.r,
                    r.invertible_only,
                    fmt_real(r.total),
                    fmt_real(r.predicted),
                    fmt_real(r.total - r.predicted),
                ));
            }
        }
    }
    out
}

fn to_json(manifest: &RunManifest, body: &ReportBody) -> serde_json::Value {
    let rows = match body {
        ReportBody::Moments(rows) => rows
            .iter()
            .map(|r| {
                json!({
                    "x": r.params.x,
                    "M": r.params.m_or_n,
                    "R": r.params.r,
                    "a": r.params.a,
                    "coprime": r.params.coprime,
                    "q_count": r.q_count,
                    "empirical": r.empirical,
                    "normalization": r.normalization,
                    "theory": r.theory,
                    "residual": r.residual,
                    "runtime_ms": r.runtime_ms,
                })
            })
            .collect::<Vec<_>>(),
        ReportBody::Residuals { rows, fit } => {
            let mut out: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "param": r.param,
                        "exact": r.exact,
                        "predicted": r.predicted,
                        "residual": r.residual,
                        "normalized": r.normalized,
                    })
                })
                .collect();
            if let Some(fit) = fit {
                out.push(json!({
                    "fit": {
                        "exponent": fit.exponent,
                        "r_squared": fit.r_squared,
                        "rows_used": fit.rows_used,
                    }
                }));
            }
            out
        }
        ReportBody::Constants(rows) => rows
            .iter()
            .map(|r| json!({ "name": r.name, "value": r.value, "tail_bound": r.tail_bound }))
            .collect(),
        ReportBody::Fr(row) => vec![json!({
            "n": row.n,
            "R": row.r,
            "exact": row.exact,
            "float": row.float,
        })],
        ReportBody::Mass(rows) => rows
            .iter()
            .map(|r| {
                json!({
                    "x": r.x,
                    "q": r.q,
                    "R": r.r,
                    "invertible_only": r.invertible_only,
                    "total": r.total,
                    "predicted": r.predicted,
                    "residual": r.total - r.predicted,
                })
            })
            .collect(),
    };
    json!({ "manifest": manifest, "rows": rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_has_twelve_digits() {
        assert_eq!(fmt_real(0.0), "0");
        let s = fmt_real(std::f64::consts::PI);
        assert_eq!(s, "3.14159265359e0");
        assert_eq!(fmt_real(-1.0 / 3.0), "-3.33333333333e-1");
    }

    #[test]
    fn csv_header_only_for_empty_rows() {
        let manifest = RunManifest {
            tool_version: "0.0.0".into(),
            config: "moment".into(),
            sieve_limit: 100,
            wall_ms: 5,
            thread_count: 2,
        };
        let body = ReportBody::Moments(vec![]);
        let csv = to_csv(&manifest, &body);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6); // 5 manifest comments + header
        assert_eq!(lines[5], "x,M,R,a,coprime,q_count,empirical,theory,residual");
        assert!(csv.ends_with('\n'));
    }
}
