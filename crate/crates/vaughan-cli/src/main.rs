//! Experiment runner: builds the sieve to the minimal limit a command
//! needs, dispatches to the library, and emits a CSV or JSON report with a
//! reproducible run manifest. Exit code 2 flags usage errors (including
//! violated theorem ranges), 1 any runtime failure.

mod config;
mod report;

use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use config::{parse_config, render, Baseline, Command, ExperimentConfig, Lemma, MomentKind};
use report::{emit_report, ConstantRow, FrRow, MassRow, ReportBody, RunManifest};
use vaughan::kernel::{fr_exact, fr_fast, fr_table, lambda_table, FrContext};
use vaughan::moments::{mass, MomentEngine};
use vaughan::sieve::{build_sieve, SieveTables};
use vaughan::theory::{const_c0, const_singular, TailKind, GAMMA};
use vaughan::verify::{
    fit_decay, scan_residuals, verify_lemma21, verify_lemma22, verify_lemma31, ResidualRow,
    TailScan,
};

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let config = match parse_config(&argv) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e:#}");
            std::process::exit(2);
        }
    };
    if let Err(e) = run(&config) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

const DEFAULT_TAIL_GRID: [u64; 4] = [100, 1000, 10_000, 100_000];
const SCAN_REF_CUT: u64 = 1_000_000;

/// Minimal sieve limit the command needs; 0 when no factor table is used.
fn required_sieve_limit(c: &ExperimentConfig) -> u64 {
    let grid_max = |default: u64| c.grid.as_ref().map_or(default, |g| *g.last().unwrap());
    match c.command {
        Command::Constants => 0,
        Command::Fr => c.fr_n.unwrap_or(2).max(c.r.unwrap_or(2)).max(2),
        Command::Moment | Command::Noncoprime | Command::Mass => c.x.unwrap_or(2).max(2),
        Command::Discrepancy => c.x.unwrap_or(2).max(2),
        Command::Verify => match c.lemma.unwrap() {
            Lemma::L21 => c.x.unwrap_or(10_000).max(grid_max(12)).max(2),
            Lemma::L22 => c.x.unwrap_or(10_000).max(c.r.unwrap_or(10)).max(2),
            Lemma::L31 => 0,
            Lemma::L32 | Lemma::L33 | Lemma::L34 => {
                grid_max(DEFAULT_TAIL_GRID[3]).max(SCAN_REF_CUT)
            }
            Lemma::L52 => 0,
            Lemma::L71 => c.x.unwrap_or(1_000_000).max(2),
        },
    }
}

fn run(c: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let sieve_limit = c.sieve_limit.unwrap_or_else(|| required_sieve_limit(c));
    let tables = if sieve_limit >= 2 {
        Some(build_sieve(sieve_limit).map_err(|e| anyhow!("{e}"))?)
    } else {
        None
    };

    let body = match c.command {
        Command::Constants => run_constants(c)?,
        Command::Fr => run_fr(c, required(&tables)?)?,
        Command::Moment => run_moment(c, required(&tables)?)?,
        Command::Discrepancy => run_discrepancy(c, required(&tables)?)?,
        Command::Noncoprime => run_noncoprime(c, required(&tables)?)?,
        Command::Mass => run_mass_cmd(c, required(&tables)?)?,
        Command::Verify => run_verify(c, tables.as_ref())?,
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: render(c).join(" "),
        sieve_limit,
        wall_ms: started.elapsed().as_millis() as u64,
        thread_count: c.threads,
    };
    emit_report(&manifest, &body, c.format, c.out.as_deref())
}

fn required(t: &Option<SieveTables>) -> Result<&SieveTables> {
    t.as_ref().ok_or_else(|| anyhow!("internal: sieve tables required but not built"))
}

fn run_constants(c: &ExperimentConfig) -> Result<ReportBody> {
    let tc = const_c0(c.prime_limit).map_err(|e| anyhow!("{e}"))?;
    let sc = const_singular(c.a, c.prime_limit).map_err(|e| anyhow!("{e}"))?;
    let a = c.a;
    Ok(ReportBody::Constants(vec![
        ConstantRow {
            name: "gamma".into(),
            value: GAMMA,
            tail_bound: 0.0,
        },
        ConstantRow {
            name: "C0".into(),
            value: tc.c0,
            tail_bound: tc.tail_bound,
        },
        ConstantRow {
            name: format!("C1({a})"),
            value: sc.c1,
            tail_bound: sc.tail_bound,
        },
        ConstantRow {
            name: format!("C2({a})"),
            value: sc.c2,
            tail_bound: sc.tail_bound,
        },
        ConstantRow {
            name: "zeta_ratio".into(),
            value: sc.zeta_ratio,
            tail_bound: 1.0 / c.prime_limit as f64,
        },
    ]))
}

fn run_fr(c: &ExperimentConfig, tables: &SieveTables) -> Result<ReportBody> {
    let n = c.fr_n.unwrap();
    let r = c.r.unwrap();
    let ctx = FrContext::new(r, tables).map_err(|e| anyhow!("{e}"))?;
    let float = fr_fast(n, &ctx, tables).map_err(|e| anyhow!("{e}"))?;
    let exact = if r <= vaughan::kernel::MAX_EXACT_R {
        let v = fr_exact(n, r, tables).map_err(|e| anyhow!("{e}"))?;
        Some(format!("{}/{}", v.numer(), v.denom()))
    } else {
        None
    };
    Ok(ReportBody::Fr(FrRow { n, r, exact, float }))
}

fn run_moment(c: &ExperimentConfig, tables: &SieveTables) -> Result<ReportBody> {
    let x = c.x.unwrap();
    let m = c.m.unwrap();
    let consts = const_c0(c.prime_limit).map_err(|e| anyhow!("{e}"))?;
    let lambda = lambda_table(x, tables).map_err(|e| anyhow!("{e}"))?;
    let engine = MomentEngine {
        tables,
        consts: &consts,
        x,
        threads: c.threads,
    };
    let report = match (c.kind.unwrap(), c.baseline) {
        (MomentKind::Dyadic, Baseline::Phi) => engine
            .avg_dyadic_phi_baseline(m, c.a, c.coprime, &lambda)
            .map_err(|e| anyhow!("{e}"))?,
        (MomentKind::Dyadic, Baseline::Rho) => {
            let ctx = FrContext::new(c.r.unwrap(), tables).map_err(|e| anyhow!("{e}"))?;
            let fr = fr_table(x, &ctx, tables, c.threads).map_err(|e| anyhow!("{e}"))?;
            engine
                .avg_dyadic(m, c.a, c.coprime, &lambda, &fr)
                .map_err(|e| anyhow!("{e}"))?
        }
        (MomentKind::Full, Baseline::Rho) => {
            let ctx = FrContext::new(c.r.unwrap(), tables).map_err(|e| anyhow!("{e}"))?;
            let fr = fr_table(x, &ctx, tables, c.threads).map_err(|e| anyhow!("{e}"))?;
            engine
                .avg_full(m, c.a, c.coprime, &lambda, &fr)
                .map_err(|e| anyhow!("{e}"))?
        }
        (MomentKind::Full, Baseline::Phi) => {
            bail!("baseline 'phi' is only defined for --kind dyadic")
        }
    };
    Ok(ReportBody::Moments(vec![report]))
}

fn run_discrepancy(c: &ExperimentConfig, tables: &SieveTables) -> Result<ReportBody> {
    let x = c.x.unwrap();
    let consts = const_c0(c.prime_limit).map_err(|e| anyhow!("{e}"))?;
    let ctx = FrContext::new(c.r.unwrap(), tables).map_err(|e| anyhow!("{e}"))?;
    let fr = fr_table(x, &ctx, tables, c.threads).map_err(|e| anyhow!("{e}"))?;
    let engine = MomentEngine {
        tables,
        consts: &consts,
        x,
        threads: c.threads,
    };
    let report = engine
        .avg_discrepancy(c.m.unwrap(), c.a, &fr)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(ReportBody::Moments(vec![report]))
}

fn run_noncoprime(c: &ExperimentConfig, tables: &SieveTables) -> Result<ReportBody> {
    let x = c.x.unwrap();
    let consts = const_c0(c.prime_limit).map_err(|e| anyhow!("{e}"))?;
    let ctx = FrContext::new(c.r.unwrap(), tables).map_err(|e| anyhow!("{e}"))?;
    let fr = fr_table(x, &ctx, tables, c.threads).map_err(|e| anyhow!("{e}"))?;
    let engine = MomentEngine {
        tables,
        consts: &consts,
        x,
        threads: c.threads,
    };
    let report = engine
        .sum_noncoprime(c.n_bound.unwrap(), c.a, &fr)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(ReportBody::Moments(vec![report]))
}

fn run_mass_cmd(c: &ExperimentConfig, tables: &SieveTables) -> Result<ReportBody> {
    let x = c.x.unwrap();
    let r = c.r.unwrap();
    let ctx = FrContext::new(r, tables).map_err(|e| anyhow!("{e}"))?;
    let (total, predicted) =
        mass(x, c.q.unwrap(), c.invertible_only, &ctx, tables).map_err(|e| anyhow!("{e}"))?;
    Ok(ReportBody::Mass(vec![MassRow {
        x,
        q: c.q.unwrap(),
        r,
        invertible_only: c.invertible_only,
        total,
        predicted,
    }]))
}

fn run_verify(c: &ExperimentConfig, tables: Option<&SieveTables>) -> Result<ReportBody> {
    let need = || tables.ok_or_else(|| anyhow!("internal: sieve tables required"));
    match c.lemma.unwrap() {
        Lemma::L21 => {
            let t = need()?;
            let x = c.x.unwrap_or(10_000);
            let y = c.y.unwrap_or(0);
            let pts: Vec<u64> = c.grid.clone().unwrap_or_else(|| (1..=12).collect());
            let mut rows = Vec::new();
            for &r in &pts {
                for &s in &pts {
                    rows.push(verify_lemma21(c.a, r, s, y, x, t).map_err(|e| anyhow!("{e}"))?);
                }
            }
            Ok(ReportBody::Residuals { rows, fit: None })
        }
        Lemma::L22 => {
            let t = need()?;
            let x = c.x.unwrap_or(10_000);
            let y = c.y.unwrap_or(0);
            let r = c.r.unwrap_or(10);
            let ctx = FrContext::new(r, t).map_err(|e| anyhow!("{e}"))?;
            let moduli: Vec<u64> = c.grid.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 6, 12, 30]);
            let mut rows = Vec::new();
            for &s in &moduli {
                rows.push(verify_lemma22(c.a, s, y, x, &ctx, t).map_err(|e| anyhow!("{e}"))?);
            }
            Ok(ReportBody::Residuals { rows, fit: None })
        }
        Lemma::L31 => {
            let grid = c.grid.clone().unwrap_or_else(|| vec![100, 1000, 10_000]);
            let mut rows = Vec::new();
            for &x in &grid {
                rows.push(
                    verify_lemma31(x as f64, c.ell, c.log_weighted, c.truncation)
                        .map_err(|e| anyhow!("{e}"))?,
                );
            }
            let fit = fit_decay(&rows).ok();
            Ok(ReportBody::Residuals { rows, fit })
        }
        lemma @ (Lemma::L32 | Lemma::L33 | Lemma::L34) => {
            let t = need()?;
            let grid = c.grid.clone().unwrap_or_else(|| DEFAULT_TAIL_GRID.to_vec());
            let sing = const_singular(c.a, c.prime_limit).map_err(|e| anyhow!("{e}"))?;
            let consts = const_c0(c.prime_limit).map_err(|e| anyhow!("{e}"))?;
            let kind = match (lemma, c.log_weighted, c.alt) {
                (Lemma::L32, false, _) => TailKind::L32Plain,
                (Lemma::L32, true, _) => TailKind::L32Log,
                (Lemma::L33, false, _) => TailKind::L33Plain,
                (Lemma::L33, true, _) => TailKind::L33Log,
                (Lemma::L34, false, _) => TailKind::L34Plain,
                (Lemma::L34, true, false) => TailKind::L34Log,
                (Lemma::L34, true, true) => TailKind::L34LogAlt,
                _ => unreachable!(),
            };
            let scan = TailScan {
                tables: t,
                sing: &sing,
                consts: &consts,
                ref_cut: SCAN_REF_CUT.min(t.limit()),
            };
            let rows = scan_residuals(kind, &grid, c.a, &scan).map_err(|e| anyhow!("{e}"))?;
            let fit = fit_decay(&rows).ok();
            Ok(ReportBody::Residuals { rows, fit })
        }
        Lemma::L52 => {
            let heights = c.grid.clone().unwrap_or_else(|| vec![100, 1000, 10_000]);
            let omega = vaughan::sieve::factor_u64(c.a.unsigned_abs()).pairs.len() as i32;
            let mut rows = Vec::new();
            for &y in &heights {
                for r in [1u64, 2, 3, 5] {
                    let (exact, predicted) = vaughan::theory::harmonic_coprime(y as f64, c.a, r)
                        .map_err(|e| anyhow!("{e}"))?;
                    let residual = exact - predicted;
                    rows.push(ResidualRow {
                        param: y as f64,
                        exact,
                        predicted,
                        residual,
                        normalized: residual * y as f64 / f64::powi(2.0, omega),
                    });
                }
            }
            Ok(ReportBody::Residuals { rows, fit: None })
        }
        Lemma::L71 => {
            let t = need()?;
            let x = c.x.unwrap_or(1_000_000);
            let moduli = c.q.map_or_else(|| vec![101, 997, 5040], |q| vec![q]);
            let cutoffs = c.r.map_or_else(|| vec![10, 50, 100], |r| vec![r]);
            let mut rows = Vec::new();
            for &r in &cutoffs {
                let ctx = FrContext::new(r, t).map_err(|e| anyhow!("{e}"))?;
                for &q in &moduli {
                    let (total, predicted) =
                        mass(x, q, c.invertible_only, &ctx, t).map_err(|e| anyhow!("{e}"))?;
                    rows.push(MassRow {
                        x,
                        q,
                        r,
                        invertible_only: c.invertible_only,
                        total,
                        predicted,
                    });
                }
            }
            Ok(ReportBody::Mass(rows))
        }
    }
}
