//! Lemma-by-lemma verification: each identity or asymptotic is recomputed
//! by brute force, compared against its main-term prediction, and the
//! residual is recorded together with a normalization by the claimed error
//! scale. A log–log least-squares fit quantifies how fast residuals decay
//! in the cutoff parameter.

use num::{BigInt, BigRational};

use crate::kernel::{fr_fast, FrContext};
use crate::numeric::CompensatedSum;
use crate::sieve::{gcd_abs, gcd_u64, squarefree_divisors, stream_primes, SieveTables};
use crate::theory::{tail_prediction, SingularConstants, TailKind, TheoryConstants};
use crate::{Error, Result};

/// One grid point of a verification scan.
#[derive(Debug, Clone)]
pub struct ResidualRow {
    /// The varied parameter (R, x, …).
    pub param: f64,
    pub exact: f64,
    pub predicted: f64,
    pub residual: f64,
    /// Residual divided by the claimed error scale of the estimate.
    pub normalized: f64,
}

impl ResidualRow {
    fn new(param: f64, exact: f64, predicted: f64, scale: f64) -> Self {
        let residual = exact - predicted;
        Self {
            param,
            exact,
            predicted,
            residual,
            normalized: residual / scale,
        }
    }
}

/// Least-squares decay exponent of `log |residual|` against `log param`.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub exponent: f64,
    pub r_squared: f64,
    pub rows_used: u32,
}

/// Character-sum identity check: the double sum
/// `Σ_{(b,r)=1} Σ_{y<n≤x, n≡a (s)} e(bn/r)` against
/// `δ_{r|s} ((x−y)/s) c_r(a)`. The exponential sum reduces arguments to
/// `b·n mod r` in integers before any trigonometry; its imaginary part
/// must vanish (conjugate symmetry) and is asserted against 1e-9 per term.
/// Residuals are normalized by `r log(r+2)`.
pub fn verify_lemma21(
    a: i64,
    r: u64,
    s: u64,
    y: u64,
    x: u64,
    tables: &SieveTables,
) -> Result<ResidualRow> {
    if r == 0 || s == 0 {
        return Err(Error::Domain("verify_lemma21: r, s must be ≥ 1".into()));
    }
    if y > x || x > tables.limit() || r > tables.limit() {
        return Err(Error::Domain(format!(
            "verify_lemma21: requires y ≤ x ≤ sieve limit (y={y}, x={x})"
        )));
    }
    // count progression members in each residue class mod r
    let mut counts = vec![0u64; r as usize];
    let mut n = first_in(a, s, y);
    let mut terms = 0u64;
    while n <= x {
        counts[(n % r) as usize] += 1;
        terms += 1;
        n += s;
    }
    // e(j/r) table on integer-reduced arguments
    let tau = 2.0 * std::f64::consts::PI;
    let unit: Vec<(f64, f64)> = (0..r)
        .map(|j| {
            let arg = tau * j as f64 / r as f64;
            (arg.cos(), arg.sin())
        })
        .collect();
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for b in 1..=r {
        if gcd_u64(b, r) != 1 {
            continue;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let j = ((b as u128 * c as u128) % r as u128) as usize;
            re.add(count as f64 * unit[j].0);
            im.add(count as f64 * unit[j].1);
        }
    }
    let total_terms = terms as f64 * tables.phi(r) as f64;
    assert!(
        im.value().abs() <= 1e-9 * total_terms.max(1.0),
        "nonreal character sum: imag = {} over {total_terms} terms",
        im.value()
    );
    let predicted = if s.is_multiple_of(r) {
        let c_r = crate::sieve::ramanujan_sum(r, a, tables)? as f64;
        (x - y) as f64 / s as f64 * c_r
    } else {
        0.0
    };
    let scale = r as f64 * ((r + 2) as f64).ln();
    Ok(ResidualRow::new(r as f64, re.value(), predicted, scale))
}

/// Progression sum of the kernel against its divisor-sum main term:
/// `Σ_{y<n≤x, n≡a (s)} F_R(n)` vs
/// `((x−y)/s)·Σ_{r≤R, r|s} μ²(r)μ((r,a))φ((r,a))/φ(r)`.
/// Residuals are normalized by `R`.
pub fn verify_lemma22(
    a: i64,
    s: u64,
    y: u64,
    x: u64,
    ctx: &FrContext,
    tables: &SieveTables,
) -> Result<ResidualRow> {
    if s == 0 {
        return Err(Error::Domain("verify_lemma22: s must be ≥ 1".into()));
    }
    if y > x || x > tables.limit() {
        return Err(Error::Domain(format!(
            "verify_lemma22: requires y ≤ x ≤ sieve limit (y={y}, x={x})"
        )));
    }
    let r = ctx.r();
    let mut acc = CompensatedSum::new();
    let mut n = first_in(a, s, y);
    while n <= x {
        acc.add(fr_fast(n, ctx, tables)?);
        n += s;
    }
    let predicted = (x - y) as f64 / s as f64 * divisor_kernel_sum(s, a, r, tables)?;
    Ok(ResidualRow::new(r as f64, acc.value(), predicted, r as f64))
}

/// `Σ_{r≤R, r|s} μ²(r)μ((r,a))φ((r,a))/φ(r)` over the squarefree divisors
/// of `s`.
pub fn divisor_kernel_sum(s: u64, a: i64, r: u64, tables: &SieveTables) -> Result<f64> {
    let f = tables.factorize(s)?;
    let mut sum = CompensatedSum::new();
    for (d, _) in squarefree_divisors(&f, r) {
        let g = gcd_abs(d, a);
        let mu_g = tables.mu(g);
        if mu_g == 0 {
            continue;
        }
        sum.add(mu_g as f64 * tables.phi(g) as f64 / tables.phi(d) as f64);
    }
    Ok(sum.value())
}

fn first_in(a: i64, s: u64, y: u64) -> u64 {
    // smallest n > y with n ≡ a (mod s); y ≥ 0 so n ≥ 1
    let lo = y as i128 + 1;
    let rem = (a as i128 - lo).rem_euclid(s as i128);
    (lo + rem) as u64
}

/// Squarefree tail `Σ_{n>x, (n,ℓ)=1} μ²(n)/n²` (log-weighted variant
/// multiplies each term by `log n`) against
/// `(1/(ζ(2)x))·∏_{p|ℓ}(1+1/p)^{−1}` (log variant: `(log x + 1)` times
/// that). The tail is truncated at `truncation`; the truncation deficit is
/// below `1/truncation`, so `x` must stay small against it. Residuals are
/// normalized by `x^{−3/2}`.
pub fn verify_lemma31(
    x_param: f64,
    ell: u64,
    log_weighted: bool,
    truncation: u64,
) -> Result<ResidualRow> {
    if x_param < 3.0 {
        return Err(Error::Domain(format!(
            "verify_lemma31: requires x ≥ 3, got {x_param}"
        )));
    }
    if ell == 0 {
        return Err(Error::Domain("verify_lemma31: ℓ must be ≥ 1".into()));
    }
    if x_param > truncation as f64 / 1e4 {
        return Err(Error::Config(format!(
            "verify_lemma31: x = {x_param} too large for tail truncation at {truncation}"
        )));
    }
    let ell_primes: Vec<u64> = crate::sieve::factor_u64(ell)
        .distinct_primes()
        .collect();
    let exact = squarefree_reciprocal_tail(x_param, &ell_primes, log_weighted, truncation);
    let zeta2 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    let local: f64 = ell_primes
        .iter()
        .map(|&p| 1.0 / (1.0 + 1.0 / p as f64))
        .product();
    let weight = if log_weighted { x_param.ln() + 1.0 } else { 1.0 };
    let predicted = weight * local / (zeta2 * x_param);
    let scale = x_param.powf(-1.5);
    Ok(ResidualRow::new(x_param, exact, predicted, scale))
}

/// Σ over squarefree n ∈ (x, truncation], (n, ℓ)=1 of μ²(n)/n² (optionally
/// log-weighted), by segmented squarefull marking.
fn squarefree_reciprocal_tail(
    x: f64,
    ell_primes: &[u64],
    log_weighted: bool,
    truncation: u64,
) -> f64 {
    let lo0 = x.floor() as u64 + 1;
    let root = (truncation as f64).sqrt() as u64 + 1;
    let mut base = Vec::new();
    stream_primes(root, |p| base.push(p));
    const SEGMENT: u64 = 1 << 20;
    let mut acc = CompensatedSum::new();
    let mut mark = vec![false; SEGMENT as usize];
    let mut lo = lo0;
    while lo <= truncation {
        let hi = (lo + SEGMENT - 1).min(truncation);
        let len = (hi - lo + 1) as usize;
        mark[..len].fill(false);
        for &p in &base {
            let p2 = p * p;
            if p2 > hi {
                break;
            }
            let mut m = lo.div_ceil(p2) * p2;
            while m <= hi {
                mark[(m - lo) as usize] = true;
                m += p2;
            }
        }
        for (i, &squarefull) in mark[..len].iter().enumerate() {
            if squarefull {
                continue;
            }
            let n = lo + i as u64;
            if ell_primes.iter().any(|&p| n.is_multiple_of(p)) {
                continue;
            }
            let nf = n as f64;
            let term = 1.0 / (nf * nf);
            acc.add(if log_weighted { term * nf.ln() } else { term });
        }
        lo = hi + 1;
    }
    acc.value()
}

/// Inputs for the truncated-multiplicative-sum scans: the reference cut for
/// the tail-route constants (`K = Σ_{r≤ref_cut} + tail estimate`) and the
/// theory constants for the head-route predictions.
pub struct TailScan<'a> {
    pub tables: &'a SieveTables,
    pub sing: &'a SingularConstants,
    pub consts: &'a TheoryConstants,
    pub ref_cut: u64,
}

impl TailScan<'_> {
    /// Reference constant for the tail kinds: direct sum to `ref_cut` plus
    /// the main-term tail estimate beyond it.
    fn reference(&self, log_weighted: bool) -> Result<f64> {
        if self.ref_cut > self.tables.limit() {
            return Err(Error::Config(format!(
                "scan_residuals: ref_cut {} exceeds sieve limit {}",
                self.ref_cut,
                self.tables.limit()
            )));
        }
        let mut acc = CompensatedSum::new();
        for r in 1..=self.ref_cut {
            if self.tables.mu(r) != 0 {
                let term = 1.0 / (r as f64 * self.tables.phi(r) as f64);
                acc.add(if log_weighted {
                    term * (r as f64).ln()
                } else {
                    term
                });
            }
        }
        let cut = self.ref_cut as f64;
        let tail_estimate = if log_weighted {
            (cut.ln() + 1.0) / cut
        } else {
            1.0 / cut
        };
        Ok(acc.value() + tail_estimate)
    }
}

/// Term of the scanned series at `r` for a given kind, or 0 when `r` does
/// not contribute.
fn scan_term(kind: TailKind, r: u64, a: i64, tables: &SieveTables) -> f64 {
    if tables.mu(r) == 0 {
        return 0.0;
    }
    let log_weighted = matches!(
        kind,
        TailKind::L32Log | TailKind::L33Log | TailKind::L34Log | TailKind::L34LogAlt
    );
    let base = 1.0 / (r as f64 * tables.phi(r) as f64);
    let weight = if log_weighted { (r as f64).ln() } else { 1.0 };
    match kind {
        TailKind::L32Plain | TailKind::L32Log => base * weight,
        TailKind::L33Plain | TailKind::L33Log => {
            if gcd_abs(r, a) == 1 {
                base * weight
            } else {
                0.0
            }
        }
        TailKind::L34Plain | TailKind::L34Log | TailKind::L34LogAlt => {
            let g = gcd_abs(r, a);
            let mu_g = tables.mu(g);
            mu_g as f64 * tables.phi(g) as f64 * base * weight
        }
    }
}

/// Exact-rational head sum for the same series, the oracle for the float
/// path (kept to `R ≤ 10^4`).
pub fn scan_head_exact(kind: TailKind, r_max: u64, a: i64, tables: &SieveTables) -> BigRational {
    let mut sum = BigRational::from_integer(BigInt::from(0));
    for r in 1..=r_max {
        if tables.mu(r) == 0 {
            continue;
        }
        let num: i64 = match kind {
            TailKind::L32Plain => 1,
            TailKind::L33Plain => {
                if gcd_abs(r, a) == 1 {
                    1
                } else {
                    0
                }
            }
            TailKind::L34Plain => {
                let g = gcd_abs(r, a);
                tables.mu(g) * tables.phi(g) as i64
            }
            _ => panic!("exact head sums are defined for the plain kinds only"),
        };
        if num == 0 {
            continue;
        }
        sum += BigRational::new(
            BigInt::from(num),
            BigInt::from(r as u128 * tables.phi(r) as u128),
        );
    }
    sum
}

/// Scans the truncated sum named by `kind` over the grid of cutoffs.
///
/// For the tail kinds the exact value is `K − head(R)` with `K` the
/// reference constant; for the head kinds it is `head(R)` directly.
/// Residuals are normalized by `R^{−3/2}` (the polynomial part of the
/// claimed error; the subpolynomial factor is indistinguishable at desk
/// scale and left unnormalized).
pub fn scan_residuals(
    kind: TailKind,
    grid: &[u64],
    a: i64,
    scan: &TailScan<'_>,
) -> Result<Vec<ResidualRow>> {
    if grid.is_empty() {
        return Err(Error::Config("scan_residuals: empty grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 3 {
        return Err(Error::Config(
            "scan_residuals: grid must be ascending with R ≥ 3".into(),
        ));
    }
    let max_r = *grid.last().unwrap();
    if max_r > scan.tables.limit() {
        return Err(Error::Config(format!(
            "scan_residuals: max R = {max_r} exceeds sieve limit {}",
            scan.tables.limit()
        )));
    }
    let is_tail = matches!(kind, TailKind::L32Plain | TailKind::L32Log);
    let reference = if is_tail {
        Some(scan.reference(kind == TailKind::L32Log)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(grid.len());
    let mut head = CompensatedSum::new();
    let mut next = 0usize;
    for r in 1..=max_r {
        head.add(scan_term(kind, r, a, scan.tables));
        while next < grid.len() && grid[next] == r {
            let exact = match reference {
                Some(k) => k - head.value(),
                None => head.value(),
            };
            let predicted = tail_prediction(kind, r, a, scan.sing, scan.consts)?;
            let scale = (r as f64).powf(-1.5);
            rows.push(ResidualRow::new(r as f64, exact, predicted, scale));
            next += 1;
        }
    }
    Ok(rows)
}

/// Least-squares decay fit of `log |residual|` against `log param`. Rows
/// with zero residual are excluded; at least three usable rows required.
pub fn fit_decay(rows: &[ResidualRow]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.residual != 0.0 && row.param > 0.0)
        .map(|row| (row.param.ln(), row.residual.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "fit_decay: {} usable rows, need ≥ 3",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let exponent = sxy / sxx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let fit = mean_y + exponent * (p.0 - mean_x);
            (p.1 - fit) * (p.1 - fit)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        exponent,
        r_squared,
        rows_used: pts.len() as u32,
    })
}
