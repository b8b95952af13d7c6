//! Theory-side constants and main terms: `C0`, the singular constants
//! `C1(a)`, `C2(a)`, the discrepancy profile `μ(a,M)`, the full-range and
//! discrepancy main terms, and the truncated-sum predictions the residual
//! scans compare against.
//!
//! Prime sums are truncated at a caller-chosen `prime_limit` with the
//! truncation error reported as a rigorous `tail_bound`. Primes are
//! streamed segmented, so a large `prime_limit` does not require a large
//! factor table. Every a-dependent factor uses the factorization of `|a|`.

use std::sync::OnceLock;

use crate::numeric::CompensatedSum;
use crate::sieve::{factor_u64, gcd_u64, stream_primes, Factorization, SieveTables};
use crate::{Error, Result};

/// Euler–Mascheroni constant (30-digit literal), validated on first use
/// against `Σ_{n≤10^6} 1/n − log 10^6`.
pub const GAMMA: f64 = 0.577215664901532860606512090082;

fn validate_gamma() {
    static CHECKED: OnceLock<()> = OnceLock::new();
    CHECKED.get_or_init(|| {
        let mut h = CompensatedSum::new();
        for n in 1..=1_000_000u64 {
            h.add(1.0 / n as f64);
        }
        let approx = h.value() - (1_000_000f64).ln();
        assert!(
            (approx - GAMMA).abs() < 1e-6,
            "gamma literal failed harmonic-sum validation: {approx}"
        );
    });
}

/// `C0 = ½(log 2π + γ + Σ_p log p/(p(p−1)) + 1)` with the prime sum
/// truncated at `prime_limit`.
#[derive(Debug, Clone)]
pub struct TheoryConstants {
    pub gamma: f64,
    pub c0: f64,
    pub prime_limit: u64,
    /// Bound on the truncation error of the prime sum: `(log P + 1)/P`.
    pub tail_bound: f64,
}

pub fn const_c0(prime_limit: u64) -> Result<TheoryConstants> {
    if prime_limit < 1000 {
        return Err(Error::Config(format!(
            "const_c0: prime_limit = {prime_limit} below 10^3"
        )));
    }
    validate_gamma();
    let mut s = CompensatedSum::new();
    stream_primes(prime_limit, |p| {
        let pf = p as f64;
        s.add(pf.ln() / (pf * (pf - 1.0)));
    });
    let p = prime_limit as f64;
    Ok(TheoryConstants {
        gamma: GAMMA,
        c0: 0.5 * ((2.0 * std::f64::consts::PI).ln() + GAMMA + s.value() + 1.0),
        prime_limit,
        tail_bound: (p.ln() + 1.0) / p,
    })
}

/// The singular constants for a residue `a`:
/// `C1(a) = ζ(2)ζ(3)/ζ(6) · φ(|a|)/|a| · ∏_{p|a}(1 − 1/(p²−p+1))` and
/// `C2(a) = C1(a)(γ − 1 − Σ_p log p/(p²−p+1) + Σ_{p|a} p² log p/((p−1)(p²−p+1)))`,
/// with `ζ(2)ζ(3)/ζ(6)` evaluated as the Euler product
/// `∏_{p≤P} (1 + 1/(p(p−1)))`.
#[derive(Debug, Clone)]
pub struct SingularConstants {
    pub a: i64,
    pub c1: f64,
    pub c2: f64,
    pub prime_limit: u64,
    /// Combined truncation bound: `1/P` for the Euler product plus
    /// `2 log P / P` for the log-weighted prime sum.
    pub tail_bound: f64,
    /// Truncated `ζ(2)ζ(3)/ζ(6)`.
    pub zeta_ratio: f64,
    /// Truncated `Σ_p log p/(p²−p+1)` over all primes.
    pub log_weight_sum: f64,
    factors: Factorization,
}

impl SingularConstants {
    pub fn phi_over_a(&self) -> f64 {
        phi_ratio(&self.factors)
    }

    /// `Σ_{p|a} log p/(p²−p+1)`.
    pub fn log_weight_sum_shared(&self) -> f64 {
        self.factors
            .distinct_primes()
            .map(|p| {
                let pf = p as f64;
                pf.ln() / (pf * pf - pf + 1.0)
            })
            .sum()
    }

}

fn phi_ratio(f: &Factorization) -> f64 {
    f.distinct_primes()
        .map(|p| 1.0 - 1.0 / p as f64)
        .product()
}

/// `Σ_{p|a} (p+1)/(p−1) · log p`, the prime sum in the coprime main terms.
pub fn coprime_prime_sum(a: i64) -> f64 {
    factor_u64(a.unsigned_abs())
        .distinct_primes()
        .map(|p| {
            let pf = p as f64;
            (pf + 1.0) / (pf - 1.0) * pf.ln()
        })
        .sum()
}

pub fn const_singular(a: i64, prime_limit: u64) -> Result<SingularConstants> {
    if a == 0 {
        return Err(Error::Domain("const_singular: a must be nonzero".into()));
    }
    if prime_limit < 1000 {
        return Err(Error::Config(format!(
            "const_singular: prime_limit = {prime_limit} below 10^3"
        )));
    }
    validate_gamma();
    let mut zeta_ratio = 1.0f64;
    let mut lw = CompensatedSum::new();
    stream_primes(prime_limit, |p| {
        let pf = p as f64;
        zeta_ratio *= 1.0 + 1.0 / (pf * (pf - 1.0));
        lw.add(pf.ln() / (pf * pf - pf + 1.0));
    });
    let factors = factor_u64(a.unsigned_abs());
    let local: f64 = factors
        .distinct_primes()
        .map(|p| {
            let pf = p as f64;
            1.0 - 1.0 / (pf * pf - pf + 1.0)
        })
        .product();
    let c1 = zeta_ratio * phi_ratio(&factors) * local;
    let shared_extra: f64 = factors
        .distinct_primes()
        .map(|p| {
            let pf = p as f64;
            pf * pf * pf.ln() / ((pf - 1.0) * (pf * pf - pf + 1.0))
        })
        .sum();
    let log_weight_sum = lw.value();
    let c2 = c1 * (GAMMA - 1.0 - log_weight_sum + shared_extra);
    let p = prime_limit as f64;
    Ok(SingularConstants {
        a,
        c1,
        c2,
        prime_limit,
        tail_bound: 1.0 / p + 2.0 * p.ln() / p,
        zeta_ratio,
        log_weight_sum,
        factors,
    })
}

/// The first-moment discrepancy profile:
/// `μ(a,M) = −½ log M − C0` for `a = ±1`, `−½ log p` for `a = ±p^e`,
/// `0` otherwise.
pub fn mu_discrepancy(a: i64, m: f64, c: &TheoryConstants) -> Result<f64> {
    if a == 0 {
        return Err(Error::Domain("mu_discrepancy: a must be nonzero".into()));
    }
    let f = factor_u64(a.unsigned_abs());
    Ok(match f.pairs.len() {
        0 => -0.5 * m.ln() - c.c0,
        1 => -0.5 * (f.pairs[0].0 as f64).ln(),
        _ => 0.0,
    })
}

/// Which display a main term instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaId {
    DyadicNull,
    FullRangeAll,
    FullRangeCoprime,
    Discrepancy,
    NonCoprimeSum,
}

/// A theory main term together with the inputs it was evaluated at.
#[derive(Debug, Clone)]
pub struct MainTerm {
    pub value: f64,
    pub formula_id: FormulaId,
    pub a: i64,
    pub x: u64,
    pub m: f64,
    pub r: u64,
}

/// Full-range first-moment main term. All-moduli variant:
/// `ε_{a=±1} (M/R)(log(x/R²) + 2γ − 3)`; coprime variant:
/// `(φ(|a|)/|a|)(M/R)(log(x/R²) + 2γ − 3 + Σ_{p|a} (p+1)/(p−1) log p)`.
pub fn main_term_full(
    a: i64,
    x: u64,
    m: f64,
    r: u64,
    coprime: bool,
    c: &TheoryConstants,
) -> Result<MainTerm> {
    if a == 0 {
        return Err(Error::Domain("main_term_full: a must be nonzero".into()));
    }
    if !(1.0 <= m && m <= r as f64 && (r as u128) * (r as u128) <= x as u128) {
        return Err(Error::Config(format!(
            "main_term_full: requires 1 ≤ M ≤ R ≤ √x (M={m}, R={r}, x={x})"
        )));
    }
    let base = (x as f64 / (r as f64 * r as f64)).ln() + 2.0 * c.gamma - 3.0;
    let value = if coprime {
        let ratio = phi_ratio(&factor_u64(a.unsigned_abs()));
        ratio * (m / r as f64) * (base + coprime_prime_sum(a))
    } else if a.unsigned_abs() == 1 {
        (m / r as f64) * base
    } else {
        0.0
    };
    Ok(MainTerm {
        value,
        formula_id: if coprime {
            FormulaId::FullRangeCoprime
        } else {
            FormulaId::FullRangeAll
        },
        a,
        x,
        m,
        r,
    })
}

/// Discrepancy main term: `μ(a,M)` minus the coprime full-range main term.
pub fn main_term_discrepancy(
    a: i64,
    x: u64,
    m: f64,
    r: u64,
    c: &TheoryConstants,
) -> Result<MainTerm> {
    if a == 0 {
        return Err(Error::Domain(
            "main_term_discrepancy: a must be nonzero".into(),
        ));
    }
    let am = a.unsigned_abs() as f64 * m;
    if !(1.0 <= am && am <= r as f64 && (r as u128) * (r as u128) <= x as u128) {
        return Err(Error::Config(format!(
            "main_term_discrepancy: requires 1 ≤ |a|M ≤ R ≤ √x (a={a}, M={m}, R={r}, x={x})"
        )));
    }
    let correction = main_term_full(a, x, m, r, true, c)?.value;
    Ok(MainTerm {
        value: mu_discrepancy(a, m, c)? - correction,
        formula_id: FormulaId::Discrepancy,
        a,
        x,
        m,
        r,
    })
}

/// Which truncated multiplicative sum a prediction refers to.
///
/// The `plain`/`log` pairs follow the two displays of each estimate; the
/// log-weighted gcd-form sum carries a second, transplanted normalization
/// (`L34LogAlt`) because the stated one does not match the truncated sums
/// numerically — the residual scan adjudicates between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// Tail `Σ_{r>R} μ²(r)/(rφ(r))` → `1/R`.
    L32Plain,
    /// Tail `Σ_{r>R} μ²(r) log r/(rφ(r))` → `(log R + 1)/R`.
    L32Log,
    /// Head `Σ_{r≤R, (r,a)=1} μ²(r)/(rφ(r))` → `(|a|/φ)C1(a) − (φ/|a|)/R`.
    L33Plain,
    /// Log-weighted coprime head.
    L33Log,
    /// Head `Σ_{r≤R} μ²(r)μ((r,a))φ((r,a))/(rφ(r))` → `C1(a) − ε_{a=±1}/R`.
    L34Plain,
    /// Log-weighted gcd-form head, as stated: `(γ−1)C1(a) − ε(log R+1)/R`.
    L34Log,
    /// Log-weighted gcd-form head with the convergent normalization
    /// `(γ−1)C1(a) − C2(a) − ε(log R+1)/R`, the Euler-product derivative
    /// at 1; for `a = ±1` this is `C1(1)·Σ_p log p/(p²−p+1)`, the shape of
    /// the coprime-restricted estimate.
    L34LogAlt,
}

impl TailKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "L32_plain" => Self::L32Plain,
            "L32_log" => Self::L32Log,
            "L33_plain" => Self::L33Plain,
            "L33_log" => Self::L33Log,
            "L34_plain" => Self::L34Plain,
            "L34_log" => Self::L34Log,
            "L34_log_alt" => Self::L34LogAlt,
            other => return Err(Error::Config(format!("unknown tail kind '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::L32Plain => "L32_plain",
            Self::L32Log => "L32_log",
            Self::L33Plain => "L33_plain",
            Self::L33Log => "L33_log",
            Self::L34Plain => "L34_plain",
            Self::L34Log => "L34_log",
            Self::L34LogAlt => "L34_log_alt",
        }
    }
}

/// Main-term prediction for the truncated sum named by `kind` at cutoff `R`.
pub fn tail_prediction(
    kind: TailKind,
    r: u64,
    a: i64,
    s: &SingularConstants,
    c: &TheoryConstants,
) -> Result<f64> {
    if r < 3 {
        return Err(Error::Config(format!("tail_prediction: R = {r} below 3")));
    }
    if a == 0 {
        return Err(Error::Domain("tail_prediction: a must be nonzero".into()));
    }
    let rf = r as f64;
    let eps = if a.unsigned_abs() == 1 { 1.0 } else { 0.0 };
    let phi_over_a = s.phi_over_a();
    Ok(match kind {
        TailKind::L32Plain => 1.0 / rf,
        TailKind::L32Log => (rf.ln() + 1.0) / rf,
        TailKind::L33Plain => s.c1 / phi_over_a - phi_over_a / rf,
        TailKind::L33Log => {
            let coprime_lw = s.log_weight_sum - s.log_weight_sum_shared();
            s.c1 / phi_over_a * coprime_lw - phi_over_a * (rf.ln() + 1.0) / rf
        }
        TailKind::L34Plain => s.c1 - eps / rf,
        TailKind::L34Log => (c.gamma - 1.0) * s.c1 - eps * (rf.ln() + 1.0) / rf,
        TailKind::L34LogAlt => (c.gamma - 1.0) * s.c1 - s.c2 - eps * (rf.ln() + 1.0) / rf,
    })
}

/// `Σ_{s≤M, (s,|a|)=1} (1/φ(s))(1 − s/M)`, the large-modulus weight sum.
pub fn phi_weighted_sum(m: f64, a: i64, tables: &SieveTables) -> Result<f64> {
    if m < 1.0 {
        return Err(Error::Config(format!("phi_weighted_sum: M = {m} below 1")));
    }
    let a_abs = a.unsigned_abs();
    let mut acc = CompensatedSum::new();
    let top = m.floor() as u64;
    if top > tables.limit() {
        return Err(Error::Domain(format!(
            "phi_weighted_sum: M = {m} exceeds sieve limit {}",
            tables.limit()
        )));
    }
    for s in 1..=top {
        if gcd_u64(s, a_abs) != 1 {
            continue;
        }
        acc.add((1.0 - s as f64 / m) / tables.phi(s) as f64);
    }
    Ok(acc.value())
}

/// Coprime harmonic sum along a progression: exact
/// `Σ_{n≤y, (n,a)=1, r|n} 1/n` paired with its main-term prediction
/// `δ_{(r,a)=1} (φ(|a|)/(|a| r))(log(y/r) + γ + Σ_{p|a} log p/(p−1))`.
pub fn harmonic_coprime(y: f64, a: i64, r: u64) -> Result<(f64, f64)> {
    if a == 0 {
        return Err(Error::Domain("harmonic_coprime: a must be nonzero".into()));
    }
    if r == 0 || y < 0.5 {
        return Err(Error::Config(format!(
            "harmonic_coprime: requires r ≥ 1 and y ≥ 1/2 (r={r}, y={y})"
        )));
    }
    let a_abs = a.unsigned_abs();
    if gcd_u64(r, a_abs) != 1 {
        return Ok((0.0, 0.0));
    }
    let mut acc = CompensatedSum::new();
    let mut n = r;
    while (n as f64) <= y {
        if gcd_u64(n, a_abs) == 1 {
            acc.add(1.0 / n as f64);
        }
        n += r;
    }
    let f = factor_u64(a_abs);
    let prime_sum: f64 = f
        .distinct_primes()
        .map(|p| (p as f64).ln() / (p as f64 - 1.0))
        .sum();
    let predicted =
        phi_ratio(&f) / r as f64 * ((y / r as f64).ln() + GAMMA + prime_sum);
    Ok((acc.value(), predicted))
}

/// Classical main term for `Σ_{q≤x/M, (q,a)=1} x/φ(q)`:
/// `x (C1(a) log(x/M) + C1(a) + C2(a))`.
pub fn phi_inverse_classical(x: u64, m: f64, s: &SingularConstants) -> Result<f64> {
    if m < 1.0 || (x as f64) < m {
        return Err(Error::Config(format!(
            "phi_inverse_classical: requires 1 ≤ M ≤ x (M={m}, x={x})"
        )));
    }
    let xf = x as f64;
    Ok(xf * (s.c1 * (xf / m).ln() + s.c1 + s.c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::build_sieve;

    // Frozen against an independent prime-sieve computation of the
    // truncated prime sums at the same limits.
    const C0_1E6: f64 = 2.085229171056;
    const ZR_1E6: f64 = 1.943596305092;
    const C2_1E6: f64 = -2.004168586817;

    #[test]
    fn c0_matches_frozen_oracle() {
        let c = const_c0(1_000_000).unwrap();
        assert!((c.c0 - C0_1E6).abs() < 1e-9, "C0 = {}", c.c0);
        assert!(c.tail_bound <= ((1e6f64).ln() + 1.0) / 1e6);
    }

    #[test]
    fn c0_consistent_across_prime_limits() {
        let small = const_c0(1000).unwrap();
        let big = const_c0(1_000_000).unwrap();
        assert!((small.c0 - big.c0).abs() < small.tail_bound);
        // the prime sum is monotone in the limit
        assert!(const_c0(10_000).unwrap().c0 < big.c0);
        assert!(const_c0(999).is_err());
    }

    #[test]
    fn singular_constants_match_frozen_oracle() {
        let s = const_singular(1, 1_000_000).unwrap();
        assert!((s.c1 - ZR_1E6).abs() < 1e-9, "C1(1) = {}", s.c1);
        assert!((s.c2 - C2_1E6).abs() < 1e-9, "C2(1) = {}", s.c2);
        // known value of zeta(2)zeta(3)/zeta(6) to compare against the
        // truncated product within its tail bound
        assert!((s.zeta_ratio - 1.9435964368).abs() < 1.0 / 1e6 + 1e-7);
    }

    #[test]
    fn singular_ratio_identities() {
        let s1 = const_singular(1, 100_000).unwrap();
        let s2 = const_singular(2, 100_000).unwrap();
        // C1(2) = C1(1)·(1/2)·(1 − 1/3) = C1(1)/3
        assert!((s2.c1 - s1.c1 / 3.0).abs() <= 1e-12 * s1.c1);
        let sm2 = const_singular(-2, 100_000).unwrap();
        assert_eq!(sm2.c1.to_bits(), s2.c1.to_bits());
        assert_eq!(sm2.c2.to_bits(), s2.c2.to_bits());

        // C1(a)·(|a|/φ(|a|))/C1(1) = ∏_{p|a}(1 − 1/(p²−p+1))
        for a in [2i64, 6, 30, -12] {
            let s = const_singular(a, 100_000).unwrap();
            let lhs = s.c1 / s.phi_over_a() / s1.c1;
            let rhs: f64 = factor_u64(a.unsigned_abs())
                .distinct_primes()
                .map(|p| {
                    let pf = p as f64;
                    1.0 - 1.0 / (pf * pf - pf + 1.0)
                })
                .product();
            assert!((lhs - rhs).abs() < 1e-14, "a={a}: {lhs} vs {rhs}");
        }
        assert!(const_singular(0, 100_000).is_err());
    }

    #[test]
    fn mu_discrepancy_cases() {
        let c = const_c0(1000).unwrap();
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert!((mu_discrepancy(1, e2, &c).unwrap() - (-1.0 - c.c0)).abs() < 1e-12);
        assert!((mu_discrepancy(4, 7.0, &c).unwrap() + 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(mu_discrepancy(6, 3.0, &c).unwrap(), 0.0);
        // even in a
        for a in [1i64, 4, 6, 9, 30] {
            assert_eq!(
                mu_discrepancy(a, 5.0, &c).unwrap().to_bits(),
                mu_discrepancy(-a, 5.0, &c).unwrap().to_bits()
            );
        }
        assert!(mu_discrepancy(0, 2.0, &c).is_err());
    }

    #[test]
    fn main_term_full_cases() {
        let c = const_c0(1000).unwrap();
        // ε vanishes for |a| ≠ 1
        assert_eq!(
            main_term_full(2, 1_000_000, 2.0, 100, false, &c).unwrap().value,
            0.0
        );
        // a = ±1: coprime and all-moduli variants agree
        let i = main_term_full(1, 1_000_000, 2.0, 100, false, &c).unwrap().value;
        let ii = main_term_full(1, 1_000_000, 2.0, 100, true, &c).unwrap().value;
        assert!((i - ii).abs() < 1e-15);
        // a = 6 coprime: direct formula arithmetic
        let got = main_term_full(6, 1_000_000, 2.0, 100, true, &c).unwrap().value;
        let base = (1_000_000f64 / 10_000.0).ln() + 2.0 * GAMMA - 3.0;
        let expect = (1.0 / 3.0) * (2.0 / 100.0)
            * (base + 3.0 * 2f64.ln() + 2.0 * 3f64.ln());
        assert!((got - expect).abs() < 1e-14);
        // parameter order violations
        assert!(main_term_full(1, 1_000_000, 200.0, 100, false, &c).is_err());
        assert!(main_term_full(1, 100, 2.0, 50, false, &c).is_err());
    }

    #[test]
    fn main_term_discrepancy_cases() {
        let c = const_c0(1000).unwrap();
        // boundary M = 1, R = √x
        let x = 1_000_000u64;
        let got = main_term_discrepancy(1, x, 1.0, 1000, &c).unwrap().value;
        let expect = -c.c0 - (1.0 / 1000.0) * ((2.0 * GAMMA - 3.0) + 0.0);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        // μ(6, M) = 0 branch: pure correction term
        let got6 = main_term_discrepancy(6, x, 1.0, 100, &c).unwrap().value;
        let corr = main_term_full(6, x, 1.0, 100, true, &c).unwrap().value;
        assert_eq!(got6, -corr);
        // correction vanishes as R grows at fixed M (value → μ(a,M))
        let wide = main_term_discrepancy(1, (1u64 << 30) * (1 << 30), 4.0, 1 << 29, &c);
        assert!(wide.is_ok());
        assert!(main_term_discrepancy(30, x, 4.0, 100, &c).is_err()); // |a|M > R
    }

    #[test]
    fn tail_predictions() {
        let c = const_c0(1000).unwrap();
        let s1 = const_singular(1, 100_000).unwrap();
        let s6 = const_singular(6, 100_000).unwrap();
        // exact reciprocal on the scan grid
        for r in [3u64, 10, 50, 100, 1000, 10_000, 100_000] {
            let v = tail_prediction(TailKind::L32Plain, r, 1, &s1, &c).unwrap();
            assert_eq!(v * r as f64, 1.0, "R={r}");
        }
        let v = tail_prediction(TailKind::L34Plain, 50, 1, &s1, &c).unwrap();
        assert!((v - (s1.c1 - 0.02)).abs() < 1e-15);
        let v6 = tail_prediction(TailKind::L34Plain, 50, 6, &s6, &c).unwrap();
        assert_eq!(v6, s6.c1); // no ε/R term for |a| ≠ 1
        assert!(tail_prediction(TailKind::L32Plain, 2, 1, &s1, &c).is_err());
        assert!(TailKind::parse("L35_plain").is_err());
        assert_eq!(TailKind::parse("L34_log_alt").unwrap(), TailKind::L34LogAlt);
    }

    #[test]
    fn phi_weighted_sum_cases() {
        let t = build_sieve(100).unwrap();
        assert_eq!(phi_weighted_sum(1.0, 1, &t).unwrap(), 0.0);
        assert!((phi_weighted_sum(2.0, 1, &t).unwrap() - 0.5).abs() < 1e-15);
        assert!((phi_weighted_sum(3.0, 2, &t).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(phi_weighted_sum(0.5, 1, &t).is_err());
    }

    #[test]
    fn harmonic_coprime_cases() {
        // (r,a) > 1: both sides zero
        assert_eq!(harmonic_coprime(100.0, 6, 3).unwrap(), (0.0, 0.0));
        // H_10
        let (exact, _) = harmonic_coprime(10.0, 1, 1).unwrap();
        assert!((exact - 2.9289682539682538).abs() < 1e-15);
        // n ∈ {3, 9} for y=10, a=2, r=3
        let (exact, _) = harmonic_coprime(10.0, 2, 3).unwrap();
        assert!((exact - 4.0 / 9.0).abs() < 1e-15);
    }

    /// Measured error constant for the harmonic main term:
    /// |exact − predicted| ≤ 5·2^ω(a)/y over the grid.
    #[test]
    fn harmonic_coprime_error_bound() {
        for y in [100.0f64, 1000.0, 10_000.0] {
            for a in [1i64, 2, 6, 30] {
                for r in [1u64, 2, 3, 5] {
                    let (exact, predicted) = harmonic_coprime(y, a, r).unwrap();
                    let omega = factor_u64(a.unsigned_abs()).pairs.len() as u32;
                    let bound = 5.0 * f64::powi(2.0, omega as i32) / y;
                    assert!(
                        (exact - predicted).abs() <= bound,
                        "y={y} a={a} r={r}: |{exact} - {predicted}| > {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_inverse_classical_matches_brute_force() {
        let t = build_sieve(100_000).unwrap();
        let s = const_singular(1, 1_000_000).unwrap();
        let x = 100_000u64;
        let mut acc = CompensatedSum::new();
        for q in 1..=x {
            acc.add(x as f64 / t.phi(q) as f64);
        }
        let direct = acc.value();
        let predicted = phi_inverse_classical(x, 1.0, &s).unwrap();
        let rel = (direct - predicted).abs() / direct;
        assert!(rel < 0.005, "relative error {rel}");
        // scaling identity: prediction at 2x differs by 2x·C1·log 2 + linear shift
        let p2 = phi_inverse_classical(2 * x, 1.0, &s).unwrap();
        let expect = 2.0 * (predicted + x as f64 * s.c1 * 2f64.ln());
        assert!((p2 - expect).abs() < 1e-6 * p2.abs());
    }
}
