//! First-moment experiments over modulus ranges: dyadic and full-range
//! averages of `ψ* − ρ*_R`, the discrepancy average of `ρ*_R − x/φ(q)`,
//! the non-coprime progression sum, and the total-mass identity.
//!
//! Range boundaries are exact: `M` and `N` are rationals and membership is
//! decided by integer comparisons (`q·num ≤ x·den`), never float
//! thresholds. Sums run over fixed 4096-modulus chunks with compensated
//! accumulation and are bitwise-identical for every thread count.

use std::time::Instant;

use num::rational::Ratio;

use crate::kernel::{progression_start, rho_star, FrContext, FrTable};
use crate::numeric::{reduce_range, CompensatedSum};
use crate::sieve::{factor_u64, gcd_u64, SieveTables};
use crate::theory::{
    coprime_prime_sum, main_term_discrepancy, main_term_full, FormulaId, TheoryConstants,
};
use crate::{Error, Result};

/// Exact rational bound (the `M` or `N` of a range).
pub type Bound = Ratio<u64>;

/// Kind of modulus interval; all intervals are half-open on the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeKind {
    /// `x/2M < q ≤ x/M`.
    Dyadic,
    /// `0 < q ≤ x/M`.
    Full,
    /// `x/N < q ≤ x`.
    Upper,
}

/// A modulus summation domain with optional gcd filters.
#[derive(Debug, Clone)]
pub struct ModulusRange {
    pub kind: RangeKind,
    pub x: u64,
    pub bound: Bound,
    /// When nonzero, restrict to `gcd(q, coprime_to) = 1`.
    pub coprime_to: u64,
    /// Restrict to `gcd(q, coprime_to) > 1` instead (mutually exclusive
    /// with the coprime filter).
    pub restrict_gcd_gt1: bool,
}

impl ModulusRange {
    pub fn new(kind: RangeKind, x: u64, bound: Bound) -> Self {
        Self {
            kind,
            x,
            bound,
            coprime_to: 0,
            restrict_gcd_gt1: false,
        }
    }

    pub fn coprime_to(mut self, a: i64) -> Self {
        self.coprime_to = a.unsigned_abs();
        self.restrict_gcd_gt1 = false;
        self
    }

    pub fn gcd_gt1_with(mut self, a: i64) -> Self {
        self.coprime_to = a.unsigned_abs();
        self.restrict_gcd_gt1 = true;
        self
    }

    /// Inclusive modulus interval `[lo, hi]`; empty when `lo > hi`.
    pub fn q_interval(&self) -> (u64, u64) {
        let num = *self.bound.numer() as u128;
        let den = *self.bound.denom() as u128;
        let xd = self.x as u128 * den;
        match self.kind {
            RangeKind::Full => (1, (xd / num) as u64),
            RangeKind::Dyadic => (((xd / (2 * num)) + 1) as u64, (xd / num) as u64),
            RangeKind::Upper => (((xd / num) + 1) as u64, self.x),
        }
    }

    #[inline]
    fn admits(&self, q: u64) -> bool {
        if self.coprime_to == 0 {
            return true;
        }
        let g = gcd_u64(q, self.coprime_to);
        if self.restrict_gcd_gt1 {
            g > 1
        } else {
            g == 1
        }
    }
}

/// One experiment outcome: the normalized empirical average (or raw sum),
/// the theory main term, and their difference.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub empirical: f64,
    pub normalization: f64,
    pub theory: f64,
    pub residual: f64,
    pub q_count: u64,
    pub runtime_ms: u64,
    pub params: MomentParams,
}

/// Echo of the inputs a report was computed from.
#[derive(Debug, Clone)]
pub struct MomentParams {
    pub x: u64,
    pub m_or_n: f64,
    pub r: u64,
    pub a: i64,
    pub coprime: bool,
    pub formula: FormulaId,
}

/// Sum of a per-modulus quantity over the range, walking each progression
/// through a value table. Returns `(sum, q_count)`.
fn range_sum<F>(range: &ModulusRange, threads: usize, per_q: F) -> (f64, u64)
where
    F: Fn(u64) -> f64 + Sync,
{
    let (lo, hi) = range.q_interval();
    if lo > hi {
        return (0.0, 0);
    }
    reduce_range(lo, hi, threads, |q| {
        if range.admits(q) {
            Some(per_q(q))
        } else {
            None
        }
    })
}

#[inline]
fn progression_table_sum(table: &[f64], x: u64, q: u64, a: i64) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut n = progression_start(a, q);
    while n <= x {
        acc.add(table[n as usize]);
        n += q;
    }
    acc.value()
}

#[inline]
fn progression_diff_sum(lhs: &[f64], rhs: &[f64], x: u64, q: u64, a: i64) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut n = progression_start(a, q);
    while n <= x {
        acc.add(lhs[n as usize] - rhs[n as usize]);
        n += q;
    }
    acc.value()
}

/// `Σ_{q ∈ range} ψ*(x;q,a)` over a Λ-table.
pub fn sum_psi_range(
    x: u64,
    range: &ModulusRange,
    a: i64,
    lambda: &[f64],
    threads: usize,
) -> Result<(f64, u64)> {
    check_table(x, lambda.len(), "lambda")?;
    Ok(range_sum(range, threads, |q| {
        progression_table_sum(lambda, x, q, a)
    }))
}

/// `Σ_{q ∈ range} ρ*_R(x;q,a)` over a kernel table.
pub fn sum_rho_range(
    x: u64,
    range: &ModulusRange,
    a: i64,
    fr: &FrTable,
    threads: usize,
) -> Result<(f64, u64)> {
    check_table(x, fr.values().len(), "fr")?;
    Ok(range_sum(range, threads, |q| {
        progression_table_sum(fr.values(), x, q, a)
    }))
}

fn check_table(x: u64, len: usize, name: &str) -> Result<()> {
    if (len as u64) < x + 1 {
        return Err(Error::Config(format!(
            "{name} table covers n < {len}, need n ≤ {x}"
        )));
    }
    Ok(())
}

fn phi_over_abs(a: i64) -> f64 {
    factor_u64(a.unsigned_abs())
        .distinct_primes()
        .map(|p| 1.0 - 1.0 / p as f64)
        .product()
}

fn bound_f64(b: Bound) -> f64 {
    *b.numer() as f64 / *b.denom() as f64
}

/// Shared inputs of the moment experiments. `lambda` and `fr` must cover
/// `n ≤ x`.
pub struct MomentEngine<'a> {
    pub tables: &'a SieveTables,
    pub consts: &'a TheoryConstants,
    pub x: u64,
    pub threads: usize,
}

impl MomentEngine<'_> {
    fn report(
        &self,
        raw: f64,
        normalization: f64,
        theory: f64,
        q_count: u64,
        started: Instant,
        params: MomentParams,
    ) -> MomentReport {
        let empirical = raw / normalization;
        MomentReport {
            empirical,
            normalization,
            theory,
            residual: empirical - theory,
            q_count,
            runtime_ms: started.elapsed().as_millis() as u64,
            params,
        }
    }

    /// Dyadic first moment of `ψ* − ρ*_R` over `x/2M < q ≤ x/M`,
    /// normalized by `x/2M` (times `φ(|a|)/|a|` in the coprime variant).
    /// The theory value is 0.
    pub fn avg_dyadic(
        &self,
        m: Bound,
        a: i64,
        coprime: bool,
        lambda: &[f64],
        fr: &FrTable,
    ) -> Result<MomentReport> {
        let started = Instant::now();
        self.check_dyadic_pre(m, a, coprime, fr.r())?;
        check_table(self.x, lambda.len(), "lambda")?;
        check_table(self.x, fr.values().len(), "fr")?;
        let mut range = ModulusRange::new(RangeKind::Dyadic, self.x, m);
        if coprime {
            range = range.coprime_to(a);
        }
        let (raw, q_count) = range_sum(&range, self.threads, |q| {
            progression_diff_sum(lambda, fr.values(), self.x, q, a)
        });
        let mut normalization = self.x as f64 / (2.0 * bound_f64(m));
        if coprime {
            normalization *= phi_over_abs(a);
        }
        Ok(self.report(
            raw,
            normalization,
            0.0,
            q_count,
            started,
            MomentParams {
                x: self.x,
                m_or_n: bound_f64(m),
                r: fr.r(),
                a,
                coprime,
                formula: FormulaId::DyadicNull,
            },
        ))
    }

    /// Dyadic baseline with `x/φ(q)` in place of `ρ*_R` (the classical
    /// approximation, for side-by-side comparison). Theory is 0.
    pub fn avg_dyadic_phi_baseline(
        &self,
        m: Bound,
        a: i64,
        coprime: bool,
        lambda: &[f64],
    ) -> Result<MomentReport> {
        let started = Instant::now();
        if m < Bound::from_integer(1) {
            return Err(Error::Config("avg_dyadic: requires M ≥ 1".into()));
        }
        check_table(self.x, lambda.len(), "lambda")?;
        let mut range = ModulusRange::new(RangeKind::Dyadic, self.x, m);
        if coprime {
            range = range.coprime_to(a);
        }
        let xf = self.x as f64;
        let (raw, q_count) = range_sum(&range, self.threads, |q| {
            progression_table_sum(lambda, self.x, q, a) - xf / self.tables.phi(q) as f64
        });
        let mut normalization = xf / (2.0 * bound_f64(m));
        if coprime {
            normalization *= phi_over_abs(a);
        }
        Ok(self.report(
            raw,
            normalization,
            0.0,
            q_count,
            started,
            MomentParams {
                x: self.x,
                m_or_n: bound_f64(m),
                r: 0,
                a,
                coprime,
                formula: FormulaId::DyadicNull,
            },
        ))
    }

    fn check_dyadic_pre(&self, m: Bound, a: i64, coprime: bool, r: u64) -> Result<()> {
        if m < Bound::from_integer(1) {
            return Err(Error::Config("avg_dyadic: requires M ≥ 1".into()));
        }
        let num = *m.numer() as u128;
        let den = *m.denom() as u128;
        if 2 * num > r as u128 * den {
            return Err(Error::Config(format!(
                "avg_dyadic: requires 2M ≤ R (M = {}, R = {r})",
                bound_f64(m)
            )));
        }
        if coprime && 2 * a.unsigned_abs() as u128 * num > r as u128 * den {
            return Err(Error::Config(format!(
                "avg_dyadic: requires 2|a|M ≤ R (a = {a}, M = {}, R = {r})",
                bound_f64(m)
            )));
        }
        Ok(())
    }

    /// Full-range first moment of `ψ* − ρ*_R` over `q ≤ x/M`, normalized by
    /// `x/M` (times `φ(|a|)/|a|` in the coprime variant); theory is the
    /// full-range main term.
    pub fn avg_full(
        &self,
        m: Bound,
        a: i64,
        coprime: bool,
        lambda: &[f64],
        fr: &FrTable,
    ) -> Result<MomentReport> {
        let started = Instant::now();
        let r = fr.r();
        let num = *m.numer() as u128;
        let den = *m.denom() as u128;
        if m < Bound::from_integer(1) || num > r as u128 * den {
            return Err(Error::Config(format!(
                "avg_full: requires 1 ≤ M ≤ R (M = {}, R = {r})",
                bound_f64(m)
            )));
        }
        if (r as u128) * (r as u128) > self.x as u128 {
            return Err(Error::Config(format!(
                "avg_full: requires R ≤ √x (R = {r}, x = {})",
                self.x
            )));
        }
        if coprime && a.unsigned_abs() as u128 * num > r as u128 * den {
            return Err(Error::Config(format!(
                "avg_full: requires |a|M ≤ R (a = {a}, M = {}, R = {r})",
                bound_f64(m)
            )));
        }
        check_table(self.x, lambda.len(), "lambda")?;
        check_table(self.x, fr.values().len(), "fr")?;
        let mut range = ModulusRange::new(RangeKind::Full, self.x, m);
        if coprime {
            range = range.coprime_to(a);
        }
        let (raw, q_count) = range_sum(&range, self.threads, |q| {
            progression_diff_sum(lambda, fr.values(), self.x, q, a)
        });
        let mut normalization = self.x as f64 / bound_f64(m);
        if coprime {
            normalization *= phi_over_abs(a);
        }
        let theory = main_term_full(a, self.x, bound_f64(m), r, coprime, self.consts)?;
        Ok(self.report(
            raw,
            normalization,
            theory.value,
            q_count,
            started,
            MomentParams {
                x: self.x,
                m_or_n: bound_f64(m),
                r,
                a,
                coprime,
                formula: theory.formula_id,
            },
        ))
    }

    /// First moment of `ρ*_R − x/φ(q)` over coprime `q ≤ x/M`, normalized
    /// by `(φ(|a|)/|a|)(x/M)`; theory is the discrepancy main term.
    pub fn avg_discrepancy(&self, m: Bound, a: i64, fr: &FrTable) -> Result<MomentReport> {
        let started = Instant::now();
        let r = fr.r();
        let num = *m.numer() as u128;
        let den = *m.denom() as u128;
        let am = a.unsigned_abs() as u128 * num;
        if m <= Bound::new(0, 1) || am < den || am > r as u128 * den {
            return Err(Error::Config(format!(
                "avg_discrepancy: requires 1 ≤ |a|M ≤ R (a = {a}, M = {}, R = {r})",
                bound_f64(m)
            )));
        }
        if (r as u128) * (r as u128) > self.x as u128 {
            return Err(Error::Config(format!(
                "avg_discrepancy: requires R ≤ √x (R = {r}, x = {})",
                self.x
            )));
        }
        check_table(self.x, fr.values().len(), "fr")?;
        let range = ModulusRange::new(RangeKind::Full, self.x, m).coprime_to(a);
        let xf = self.x as f64;
        let (raw, q_count) = range_sum(&range, self.threads, |q| {
            progression_table_sum(fr.values(), self.x, q, a) - xf / self.tables.phi(q) as f64
        });
        let normalization = phi_over_abs(a) * xf / bound_f64(m);
        let theory = main_term_discrepancy(a, self.x, bound_f64(m), r, self.consts)?;
        Ok(self.report(
            raw,
            normalization,
            theory.value,
            q_count,
            started,
            MomentParams {
                x: self.x,
                m_or_n: bound_f64(m),
                r,
                a,
                coprime: true,
                formula: theory.formula_id,
            },
        ))
    }

    /// Raw sum `Σ_{q ≤ x/N, (q,a)>1} ρ*_R(x;q,a)` against the evaluated
    /// main term `(φ(|a|)/|a|)² (x/R)(log(x/R²) + 2γ − 3 + Σ_{p|a} …)`,
    /// which is independent of `N`. For `a = ±1` the constraint is
    /// unsatisfiable and the report is all zeros with `q_count = 0`.
    pub fn sum_noncoprime(&self, n: Bound, a: i64, fr: &FrTable) -> Result<MomentReport> {
        let started = Instant::now();
        let r = fr.r();
        let params = MomentParams {
            x: self.x,
            m_or_n: bound_f64(n),
            r,
            a,
            coprime: false,
            formula: FormulaId::NonCoprimeSum,
        };
        if a.unsigned_abs() == 1 {
            return Ok(self.report(0.0, 1.0, 0.0, 0, started, params));
        }
        let num = *n.numer() as u128;
        let den = *n.denom() as u128;
        if n < Bound::from_integer(1) || a.unsigned_abs() as u128 * num > r as u128 * den {
            return Err(Error::Config(format!(
                "sum_noncoprime: requires 1 ≤ |a|N ≤ R (a = {a}, N = {}, R = {r})",
                bound_f64(n)
            )));
        }
        if (r as u128) * (r as u128) > self.x as u128 {
            return Err(Error::Config(format!(
                "sum_noncoprime: requires R ≤ √x (R = {r}, x = {})",
                self.x
            )));
        }
        check_table(self.x, fr.values().len(), "fr")?;
        let range = ModulusRange::new(RangeKind::Full, self.x, n).gcd_gt1_with(a);
        let (raw, q_count) = range_sum(&range, self.threads, |q| {
            progression_table_sum(fr.values(), self.x, q, a)
        });
        let ratio = phi_over_abs(a);
        let xf = self.x as f64;
        let theory = ratio * ratio * (xf / r as f64)
            * ((xf / (r as f64 * r as f64)).ln() + 2.0 * self.consts.gamma - 3.0
                + coprime_prime_sum(a));
        Ok(self.report(raw, 1.0, theory, q_count, started, params))
    }
}

/// Total mass of the kernel over residue classes mod `q`:
/// `Σ_a ρ*_R(x;q,a)` for `a = 1..q` (all classes) or only `(a,q) = 1`,
/// paired with the predicted mass `x − q`.
pub fn mass(
    x: u64,
    q: u64,
    invertible_only: bool,
    ctx: &FrContext,
    tables: &SieveTables,
) -> Result<(f64, f64)> {
    if q == 0 || q >= x {
        return Err(Error::Domain(format!("mass: requires 1 ≤ q < x (q = {q}, x = {x})")));
    }
    let mut acc = CompensatedSum::new();
    for a in 1..=q {
        if invertible_only && gcd_u64(a, q) != 1 {
            continue;
        }
        acc.add(rho_star(x, q, a as i64, ctx, tables)?);
    }
    Ok((acc.value(), (x - q) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{fr_table, lambda_table, psi_star};
    use crate::sieve::build_sieve;
    use crate::theory::const_c0;
    use num::BigUint;

    fn bound(n: u64) -> Bound {
        Bound::from_integer(n)
    }

    struct Fixture {
        tables: SieveTables,
        consts: TheoryConstants,
    }

    impl Fixture {
        fn new(limit: u64) -> Self {
            Self {
                tables: build_sieve(limit).unwrap(),
                consts: const_c0(1000).unwrap(),
            }
        }

        fn engine(&self, x: u64, threads: usize) -> MomentEngine<'_> {
            MomentEngine {
                tables: &self.tables,
                consts: &self.consts,
                x,
                threads,
            }
        }
    }

    #[test]
    fn interval_boundaries_are_exact() {
        let r = ModulusRange::new(RangeKind::Dyadic, 100, bound(4));
        assert_eq!(r.q_interval(), (13, 25)); // (12.5, 25]
        let r = ModulusRange::new(RangeKind::Full, 100, Bound::new(5, 2));
        assert_eq!(r.q_interval(), (1, 40)); // q ≤ 100/(5/2)
        let r = ModulusRange::new(RangeKind::Upper, 100, bound(3));
        assert_eq!(r.q_interval(), (34, 100)); // (33.3.., 100]
        // empty range: x/M < 1
        let r = ModulusRange::new(RangeKind::Full, 10, bound(20));
        let (lo, hi) = r.q_interval();
        assert!(lo > hi);
    }

    #[test]
    fn psi_range_single_modulus_degenerate() {
        let f = Fixture::new(3000);
        let x = 3000u64;
        let lambda = lambda_table(x, &f.tables).unwrap();
        // full range with M = x keeps only q = 1, where ψ*(x;1,1) = ψ(x)
        let range = ModulusRange::new(RangeKind::Full, x, bound(x)).coprime_to(6);
        let (sum, count) = sum_psi_range(x, &range, 1, &lambda, 2).unwrap();
        assert_eq!(count, 1);
        let psi_x: f64 = psi_star(x, 1, 1, &f.tables).unwrap();
        assert_eq!(sum.to_bits(), psi_x.to_bits());
    }

    /// The upper-range average of ψ* tracks its main term
    /// x·Σ_{s≤N,(s,a)=1} (1/φ(s))(1 − s/N).
    #[test]
    fn psi_upper_range_tracks_weighted_phi_sum() {
        let f = Fixture::new(1_000_000);
        let x = 1_000_000u64;
        let lambda = lambda_table(x, &f.tables).unwrap();
        for (n_bound_v, a) in [(4u64, 1i64), (3, 2), (8, -1)] {
            let range = ModulusRange::new(RangeKind::Upper, x, bound(n_bound_v));
            let (sum, _) = sum_psi_range(x, &range, a, &lambda, 2).unwrap();
            let main = x as f64
                * crate::theory::phi_weighted_sum(n_bound_v as f64, a, &f.tables).unwrap();
            assert!(
                (sum - main).abs() <= 0.05 * x as f64,
                "N={n_bound_v} a={a}: {sum} vs {main}"
            );
        }
    }

    /// Modulus-swap identity: the upper-range sum of ψ* equals the double
    /// sum over s < N − aN/x of Λ over n ≡ a (mod s), a + sx/N < n ≤ x.
    /// Both sides are compared exactly as products of prime-power bases.
    #[test]
    fn psi_upper_range_swap_identity() {
        let f = Fixture::new(10_000);
        let x = 10_000u64;
        for n_bound in [2u64, 3, 10] {
            for a in [1i64, -1, 5] {
                let range = ModulusRange::new(RangeKind::Upper, x, bound(n_bound));
                let (lo, hi) = range.q_interval();
                let mut lhs = BigUint::from(1u32);
                for q in lo..=hi {
                    let mut n = progression_start(a, q);
                    while n <= x {
                        if f.tables.mangoldt(n) > 0.0 {
                            lhs *= BigUint::from(f.tables.spf(n));
                        }
                        n += q;
                    }
                }
                // swapped side: n = a + qs with q > x/N ⟺ s < N − aN/x and
                // n > a + s·x/N
                let mut rhs = BigUint::from(1u32);
                let mut s = 1u64;
                // s < N − aN/x ⟺ s·x < N(x − a)
                while (s as i128) * (x as i128) < (n_bound as i128) * (x as i128 - a as i128) {
                    let mut n = progression_start(a, s);
                    while n <= x {
                        // n > a + s·x/N ⟺ (n − a)·N > s·x
                        if (n as i128 - a as i128) * n_bound as i128 > (s as i128) * (x as i128)
                            && f.tables.mangoldt(n) > 0.0
                        {
                            rhs *= BigUint::from(f.tables.spf(n));
                        }
                        n += s;
                    }
                    s += 1;
                }
                assert_eq!(lhs, rhs, "N={n_bound} a={a}");
            }
        }
    }

    #[test]
    fn rho_range_counting_degenerate() {
        // R = 1 makes F ≡ 1, so the range sum counts progression terms
        let f = Fixture::new(1000);
        let x = 1000u64;
        let ctx = FrContext::new(1, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 2).unwrap();
        let range = ModulusRange::new(RangeKind::Upper, x, bound(2));
        let (sum, _) = sum_rho_range(x, &range, 1, &fr, 2).unwrap();
        let mut count = 0u64;
        for q in 501..=1000u64 {
            count += (x - 1) / q; // terms 1 + kq ≤ x, k ≥ 1
        }
        assert_eq!(sum, count as f64);
    }

    #[test]
    fn rho_upper_range_hand_enumeration() {
        // x=10, q ∈ (5,10], a=1, R=2: progressions hold one term each,
        // n ∈ {7,8,9,10}, so the sum is F(7)+F(8)+F(9)+F(10) = 2+0+2+0
        let f = Fixture::new(100);
        let ctx = FrContext::new(2, &f.tables).unwrap();
        let fr = fr_table(10, &ctx, &f.tables, 1).unwrap();
        let range = ModulusRange::new(RangeKind::Upper, 10, bound(2));
        let (sum, count) = sum_rho_range(10, &range, 1, &fr, 1).unwrap();
        assert_eq!(sum, 4.0);
        assert_eq!(count, 5);
    }

    #[test]
    fn discrepancy_accepts_unit_m_boundary() {
        let f = Fixture::new(10_000);
        let x = 10_000u64;
        let ctx = FrContext::new(50, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 1).unwrap();
        let engine = f.engine(x, 1);
        let rep = engine.avg_discrepancy(bound(1), 1, &fr).unwrap();
        assert!(rep.theory.is_finite() && rep.q_count > 0);
        // |a|M below 1 is rejected
        assert!(engine.avg_discrepancy(Bound::new(1, 2), 1, &fr).is_err());
    }

    #[test]
    fn coprime_filter_keeps_odd_moduli() {
        let f = Fixture::new(500);
        let x = 500u64;
        let ctx = FrContext::new(2, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 1).unwrap();
        let range = ModulusRange::new(RangeKind::Full, x, bound(50)).coprime_to(2);
        let (_, count) = sum_rho_range(x, &range, 2, &fr, 1).unwrap();
        assert_eq!(count, 5); // odd q ≤ 10
    }

    #[test]
    fn dyadic_preconditions() {
        let f = Fixture::new(1000);
        let x = 1000u64;
        let lambda = lambda_table(x, &f.tables).unwrap();
        let ctx = FrContext::new(8, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 1).unwrap();
        let engine = f.engine(x, 1);
        // boundary 2M = R accepted
        assert!(engine.avg_dyadic(bound(4), 1, false, &lambda, &fr).is_ok());
        // 2M > R rejected
        let err = engine.avg_dyadic(bound(5), 1, false, &lambda, &fr);
        assert!(matches!(err, Err(Error::Config(ref m)) if m.contains("2M ≤ R")));
        // coprime variant with 2|a|M > R rejected
        let err = engine.avg_dyadic(bound(2), 6, true, &lambda, &fr);
        assert!(matches!(err, Err(Error::Config(ref m)) if m.contains("2|a|M")));
    }

    #[test]
    fn full_range_partition_consistency() {
        // sum over (0, x/M] = sum over (0, x/2M] + dyadic sum
        let f = Fixture::new(20_000);
        let x = 20_000u64;
        let lambda = lambda_table(x, &f.tables).unwrap();
        let ctx = FrContext::new(40, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 2).unwrap();
        let engine = f.engine(x, 2);
        let full_m = engine.avg_full(bound(10), 1, false, &lambda, &fr).unwrap();
        let full_2m = engine.avg_full(bound(20), 1, false, &lambda, &fr).unwrap();
        let dyadic = engine.avg_dyadic(bound(10), 1, false, &lambda, &fr).unwrap();
        let lhs = full_m.empirical * full_m.normalization;
        let rhs = full_2m.empirical * full_2m.normalization
            + dyadic.empirical * dyadic.normalization;
        assert!(
            (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0),
            "partition: {lhs} vs {rhs}"
        );
        assert_eq!(full_m.q_count, full_2m.q_count + dyadic.q_count);
    }

    #[test]
    fn full_range_identical_for_unit_a() {
        let f = Fixture::new(10_000);
        let x = 10_000u64;
        let lambda = lambda_table(x, &f.tables).unwrap();
        let ctx = FrContext::new(20, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 2).unwrap();
        let engine = f.engine(x, 2);
        let plain = engine.avg_full(bound(5), 1, false, &lambda, &fr).unwrap();
        let coprime = engine.avg_full(bound(5), 1, true, &lambda, &fr).unwrap();
        assert_eq!(plain.empirical.to_bits(), coprime.empirical.to_bits());
        assert_eq!(plain.q_count, coprime.q_count);
    }

    #[test]
    fn moment_reports_bitwise_deterministic_across_threads() {
        let f = Fixture::new(30_000);
        let x = 30_000u64;
        let lambda = lambda_table(x, &f.tables).unwrap();
        let ctx = FrContext::new(16, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 1).unwrap();
        let base = f
            .engine(x, 1)
            .avg_full(bound(4), 1, false, &lambda, &fr)
            .unwrap();
        for threads in [2usize, 8] {
            let other = f
                .engine(x, threads)
                .avg_full(bound(4), 1, false, &lambda, &fr)
                .unwrap();
            assert_eq!(base.empirical.to_bits(), other.empirical.to_bits());
            assert_eq!(base.q_count, other.q_count);
        }
    }

    #[test]
    fn noncoprime_unit_a_is_empty() {
        let f = Fixture::new(10_000);
        let x = 10_000u64;
        let ctx = FrContext::new(50, &f.tables).unwrap();
        let fr = fr_table(x, &ctx, &f.tables, 2).unwrap();
        let engine = f.engine(x, 2);
        let rep = engine.sum_noncoprime(bound(2), 1, &fr).unwrap();
        assert_eq!((rep.empirical, rep.q_count), (0.0, 0));
    }

    /// Σ_{q≤x, (q,a)>1} ψ* stays below the measured constant times
    /// √x log|a|.
    #[test]
    fn noncoprime_psi_mass_is_small() {
        let f = Fixture::new(1_000_000);
        for x in [10_000u64, 1_000_000] {
            let lambda = lambda_table(x, &f.tables).unwrap();
            for a in [6i64, 30] {
                let range = ModulusRange::new(RangeKind::Full, x, bound(1)).gcd_gt1_with(a);
                let (sum, _) = sum_psi_range(x, &range, a, &lambda, 2).unwrap();
                let bound_val = 4.0 * (x as f64).sqrt() * (a.unsigned_abs() as f64).ln();
                assert!(sum <= bound_val, "x={x} a={a}: {sum} > {bound_val}");
            }
        }
    }

    #[test]
    fn mass_hand_case_and_counting() {
        let f = Fixture::new(2000);
        let ctx = FrContext::new(2, &f.tables).unwrap();
        let (total, predicted) = mass(10, 3, false, &ctx, &f.tables).unwrap();
        assert_eq!(total, 6.0);
        assert_eq!(predicted, 7.0);

        // R = 1: the mass counts integers in (q, x] exactly
        let ctx1 = FrContext::new(1, &f.tables).unwrap();
        let (total, predicted) = mass(1500, 37, false, &ctx1, &f.tables).unwrap();
        assert_eq!(total, predicted);

        assert!(mass(10, 10, false, &ctx, &f.tables).is_err());
    }

    #[test]
    fn mass_invertible_plus_zero_class_is_total() {
        let f = Fixture::new(2000);
        let ctx = FrContext::new(5, &f.tables).unwrap();
        let x = 2000u64;
        let q = 101u64; // prime: invertible classes are all but a ≡ 0
        let (total, _) = mass(x, q, false, &ctx, &f.tables).unwrap();
        let (invertible, _) = mass(x, q, true, &ctx, &f.tables).unwrap();
        let class0 = rho_star(x, q, q as i64, &ctx, &f.tables).unwrap();
        assert!(
            ((invertible + class0) - total).abs() <= 1e-9 * total.abs(),
            "{invertible} + {class0} vs {total}"
        );
    }
}
