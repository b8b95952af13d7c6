//! The kernel `F_R(n)` and the progression sums built from it.
//!
//! `F_R(n) = Σ_{r≤R} μ(r)/φ(r) · c_r(n) = Σ_{r≤R} μ²(r)μ((r,n))φ((r,n))/φ(r)`.
//!
//! Three evaluation routes:
//! * [`fr_exact`] — the defining sum, term by term, in exact rationals
//!   (the oracle; intended for `R ≤ 1000`),
//! * [`fr_fast`] — float path via the gcd-grouped identity
//!   `F_R(n) = Σ_{d | rad(n), d ≤ R} μ(d)·H(R/d; n)` where
//!   `H(y; n) = Σ_{m≤y, (m,n)=1} μ²(m)/φ(m)`, writing each squarefree
//!   `r = d·m` with `d = (r,n)` and `(m,n) = 1`,
//! * [`fr_table`] — bulk tabulation of `fr_fast` over `n ≤ x` with
//!   deterministic chunked parallelism.
//!
//! `H(y; P)` (P the primes of `n` that are `≤ y`) is computed by the exact
//! recursion `H(y; P) = H(y; P∖{p}) − H(⌊y/p⌋; P)/(p−1)` with base case
//! `H(y; ∅) = G(⌊y⌋)` from the prefix table, memoized on
//! `(⌊y⌋, prefix of the prime list)`. Because only the primes of one `n`
//! appear, the recursion tree is tiny (`ω(n) ≤ 9` for `n ≤ 10^8`).
//!
//! `F_R(n)` depends only on the set of primes `p ≤ R` dividing `n`, so both
//! fast routes share one canonical evaluator keyed by that set; table
//! entries are bitwise-equal to `fr_fast` and independent of thread count.

use std::collections::HashMap;
use std::sync::Mutex;

use num::{BigInt, BigRational};

use crate::numeric::CompensatedSum;
use crate::sieve::{g_prefix, gcd_u64, GPrefix, SieveTables};
use crate::{Error, Result};

/// Oracle-scale ceiling for [`fr_exact`].
pub const MAX_EXACT_R: u64 = 1000;

/// Memory guard for [`fr_table`] (entries).
pub const MAX_TABLE_ENTRIES: u64 = 1 << 31;

/// Evaluation context for one value of `R`: the `G` prefix table plus an
/// insert-only memo keyed by the product of the primes `p ≤ R` dividing `n`
/// (that product determines `F_R(n)`). Memoized values are pure, so reads
/// and insertions from any number of threads leave results bitwise stable.
pub struct FrContext {
    r: u64,
    gp: GPrefix,
    memo: Mutex<HashMap<u64, f64>>,
}

impl FrContext {
    pub fn new(r: u64, tables: &SieveTables) -> Result<Self> {
        if r == 0 {
            return Err(Error::Config("FrContext: R must be ≥ 1".into()));
        }
        let gp = g_prefix(r, tables, false)?;
        Ok(Self {
            r,
            gp,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn g_prefix(&self) -> &GPrefix {
        &self.gp
    }

    fn eval_primes(&self, signature: u64, primes: &[u64], scratch: &mut EvalScratch) -> f64 {
        if let Some(&v) = self.memo.lock().unwrap().get(&signature) {
            return v;
        }
        let v = fr_eval(primes, self.r, &self.gp, scratch);
        self.memo.lock().unwrap().insert(signature, v);
        v
    }
}

/// Reusable scratch for one kernel evaluation: the `H` memo and the
/// squarefree-divisor enumeration buffer.
#[derive(Default)]
pub struct EvalScratch {
    h_memo: HashMap<u64, f64>,
    divisors: Vec<(u64, f64)>,
}

/// Canonical float evaluation of `F_R` from the ascending list of primes
/// `p ≤ R` dividing `n`. Both `fr_fast` and `fr_table` call this, so their
/// results are bitwise identical.
fn fr_eval(primes: &[u64], r: u64, gp: &GPrefix, scratch: &mut EvalScratch) -> f64 {
    debug_assert!(primes.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(primes.iter().all(|&p| p <= r));
    scratch.h_memo.clear();
    scratch.divisors.clear();
    // squarefree divisors d ≤ R of rad(n), ascending, with sign μ(d)
    scratch.divisors.push((1, 1.0));
    for &p in primes {
        for i in 0..scratch.divisors.len() {
            let (d, sign) = scratch.divisors[i];
            if let Some(dp) = d.checked_mul(p) {
                if dp <= r {
                    scratch.divisors.push((dp, -sign));
                }
            }
        }
    }
    scratch.divisors.sort_unstable_by_key(|&(d, _)| d);

    let mut acc = CompensatedSum::new();
    // split borrows: H recursion needs the memo, the loop owns the divisors
    let divisors = std::mem::take(&mut scratch.divisors);
    for &(d, sign) in &divisors {
        let h = h_coprime(r / d, primes.len(), primes, gp, &mut scratch.h_memo);
        acc.add(sign * h);
    }
    scratch.divisors = divisors;
    let value = acc.value();
    debug_assert!(
        value.abs() <= r as f64 + 1e-6,
        "|F_R(n)| = {value} exceeds the crude bound R = {r}"
    );
    value
}

/// `H(y; primes[..k]) = Σ_{m≤y, (m, primes[..k])=1} μ²(m)/φ(m)` by the
/// removal recursion on the largest prime.
fn h_coprime(y: u64, mut k: usize, primes: &[u64], gp: &GPrefix, memo: &mut HashMap<u64, f64>) -> f64 {
    while k > 0 && primes[k - 1] > y {
        k -= 1;
    }
    if k == 0 {
        return gp.value(y);
    }
    debug_assert!(y <= gp.r() && k < 64);
    let key = (y << 6) | k as u64;
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let p = primes[k - 1];
    let v = h_coprime(y, k - 1, primes, gp, memo)
        - h_coprime(y / p, k, primes, gp, memo) / (p - 1) as f64;
    memo.insert(key, v);
    v
}

/// Exact rational `F_R(n)` by the defining sum, term by term.
pub fn fr_exact(n: u64, r: u64, tables: &SieveTables) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::Domain("fr_exact: n must be ≥ 1".into()));
    }
    if r == 0 || r > MAX_EXACT_R {
        return Err(Error::Config(format!(
            "fr_exact: R = {r} outside the oracle range [1, {MAX_EXACT_R}]"
        )));
    }
    if r > tables.limit() {
        return Err(Error::Config(format!(
            "fr_exact: R = {r} exceeds sieve limit {}",
            tables.limit()
        )));
    }
    let mut sum = BigRational::from_integer(BigInt::from(0));
    for rr in 1..=r {
        if tables.mu(rr) == 0 {
            continue;
        }
        let g = gcd_u64(rr, n);
        let mu_g = tables.mu(g);
        if mu_g == 0 {
            continue;
        }
        let num = BigInt::from(mu_g * tables.phi(g) as i64);
        let den = BigInt::from(tables.phi(rr));
        sum += BigRational::new(num, den);
    }
    Ok(sum)
}

/// Ascending primes `p ≤ r` dividing `n`, plus their product (the kernel
/// signature). The smallest-prime-factor walk yields primes in ascending
/// order, so the first factor above `r` ends the scan.
fn primes_of_n_below(n: u64, r: u64, tables: &SieveTables) -> (u64, Vec<u64>) {
    let mut primes = Vec::new();
    let mut signature = 1u64;
    let mut m = n;
    while m > 1 {
        let p = tables.spf(m);
        if p > r {
            break;
        }
        primes.push(p);
        signature *= p;
        while m.is_multiple_of(p) {
            m /= p;
        }
    }
    (signature, primes)
}

/// Fast float `F_R(n)`: relative error ≤ 1e-10 against [`fr_exact`].
pub fn fr_fast(n: u64, ctx: &FrContext, tables: &SieveTables) -> Result<f64> {
    if n == 0 || n > tables.limit() {
        return Err(Error::Domain(format!(
            "fr_fast: n = {n} outside [1, {}]",
            tables.limit()
        )));
    }
    let (signature, primes) = primes_of_n_below(n, ctx.r(), tables);
    let mut scratch = EvalScratch::default();
    Ok(ctx.eval_primes(signature, &primes, &mut scratch))
}

/// Bulk table of `F_R(n)` for `n ∈ [0, x]` (index 0 unused, set to 0).
pub struct FrTable {
    r: u64,
    values: Vec<f64>,
}

impl FrTable {
    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn x(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    #[inline]
    pub fn value(&self, n: u64) -> f64 {
        self.values[n as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

const TABLE_CHUNK: usize = 1 << 16;

/// Tabulates `fr_fast` for all `n ≤ x` with deterministic chunked
/// parallelism: fixed-width chunks of `n`, each filled by marking the
/// primes `p ≤ R` over the chunk and evaluating one kernel value per
/// distinct prime signature. Entries are bitwise-equal to `fr_fast` for
/// every thread count.
pub fn fr_table(x: u64, ctx: &FrContext, tables: &SieveTables, threads: usize) -> Result<FrTable> {
    if x > tables.limit() {
        return Err(Error::Domain(format!(
            "fr_table: x = {x} exceeds sieve limit {}",
            tables.limit()
        )));
    }
    if x >= MAX_TABLE_ENTRIES {
        return Err(Error::Config(format!(
            "fr_table: x = {x} exceeds the {MAX_TABLE_ENTRIES}-entry memory guard"
        )));
    }
    let r = ctx.r();
    let small_primes: Vec<u64> = tables
        .primes()
        .iter()
        .copied()
        .take_while(|&p| p <= r)
        .collect();

    let mut values = vec![0.0f64; x as usize + 1];
    let threads = threads.max(1);

    let fill_chunk = |n_start: u64, slice: &mut [f64], worker: &mut WorkerState| {
        let len = slice.len();
        worker.signatures.clear();
        worker.signatures.resize(len, 1u64);
        for &p in &small_primes {
            // first multiple in the chunk, skipping n = 0 (divisible by
            // everything; the entry is unused)
            let mut m = n_start.div_ceil(p).max(1) * p;
            while m < n_start + len as u64 {
                worker.signatures[(m - n_start) as usize] *= p;
                m += p;
            }
        }
        for (i, out) in slice.iter_mut().enumerate() {
            let n = n_start + i as u64;
            if n == 0 {
                continue;
            }
            let sig = worker.signatures[i];
            let v = match worker.memo.get(&sig) {
                Some(&v) => v,
                None => {
                    worker.primes.clear();
                    let mut s = sig;
                    while s > 1 {
                        let p = tables.spf(s);
                        worker.primes.push(p);
                        s /= p;
                    }
                    let v = fr_eval(&worker.primes, r, ctx.g_prefix(), &mut worker.scratch);
                    worker.memo.insert(sig, v);
                    v
                }
            };
            *out = v;
        }
    };

    let chunk_list: Vec<(usize, &mut [f64])> = values.chunks_mut(TABLE_CHUNK).enumerate().collect();
    let mut per_worker: Vec<Vec<(usize, &mut [f64])>> = (0..threads).map(|_| Vec::new()).collect();
    for (ci, slice) in chunk_list {
        per_worker[ci % threads].push((ci, slice));
    }
    std::thread::scope(|scope| {
        for worker_chunks in per_worker {
            let fill_chunk = &fill_chunk;
            scope.spawn(move || {
                let mut state = WorkerState::default();
                for (ci, slice) in worker_chunks {
                    fill_chunk((ci * TABLE_CHUNK) as u64, slice, &mut state);
                }
            });
        }
    });
    Ok(FrTable { r, values })
}

#[derive(Default)]
struct WorkerState {
    signatures: Vec<u64>,
    primes: Vec<u64>,
    memo: HashMap<u64, f64>,
    scratch: EvalScratch,
}

/// First term of the progression `n ≡ a (mod q)` with `n > a` and `n ≥ 1`.
/// For `a < 0` the constraint `n > a` is vacuous and the walk starts at the
/// smallest positive member.
pub fn progression_start(a: i64, q: u64) -> u64 {
    let q_i = q as i128;
    let a_i = a as i128;
    let k = if a >= 1 {
        1
    } else {
        // ceil((1 - a)/q) ≥ 1
        (1 - a_i + q_i - 1).div_euclid(q_i)
    };
    (a_i + k * q_i) as u64
}

/// `ψ*(x;q,a) = Σ_{n≤x, n≡a (q), n>a} Λ(n)` with compensated summation.
pub fn psi_star(x: u64, q: u64, a: i64, tables: &SieveTables) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("psi_star: q must be ≥ 1".into()));
    }
    if a == 0 {
        return Err(Error::Domain("psi_star: a must be nonzero".into()));
    }
    if x > tables.limit() {
        return Err(Error::Domain(format!(
            "psi_star: x = {x} exceeds sieve limit {}",
            tables.limit()
        )));
    }
    let mut acc = CompensatedSum::new();
    let mut n = progression_start(a, q);
    while n <= x {
        acc.add(tables.mangoldt(n));
        n += q;
    }
    Ok(acc.value())
}

/// `ρ*_R(x;q,a) = Σ_{n≤x, n≡a (q), n>a} F_R(n)` via `fr_fast`.
pub fn rho_star(x: u64, q: u64, a: i64, ctx: &FrContext, tables: &SieveTables) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("rho_star: q must be ≥ 1".into()));
    }
    if a == 0 {
        return Err(Error::Domain("rho_star: a must be nonzero".into()));
    }
    if x > tables.limit() {
        return Err(Error::Domain(format!(
            "rho_star: x = {x} exceeds sieve limit {}",
            tables.limit()
        )));
    }
    let mut acc = CompensatedSum::new();
    let mut scratch = EvalScratch::default();
    let mut n = progression_start(a, q);
    while n <= x {
        let (signature, primes) = primes_of_n_below(n, ctx.r(), tables);
        acc.add(ctx.eval_primes(signature, &primes, &mut scratch));
        n += q;
    }
    Ok(acc.value())
}

/// Λ(n) for all `n ≤ x` as a flat table (index by `n`; entries 0 and 1 are 0).
pub fn lambda_table(x: u64, tables: &SieveTables) -> Result<Vec<f64>> {
    if x > tables.limit() {
        return Err(Error::Domain(format!(
            "lambda_table: x = {x} exceeds sieve limit {}",
            tables.limit()
        )));
    }
    let mut table = vec![0.0f64; x as usize + 1];
    for &p in tables.primes() {
        if p > x {
            break;
        }
        let lp = (p as f64).ln();
        let mut pk = p;
        loop {
            table[pk as usize] = lp;
            if pk > x / p {
                break;
            }
            pk *= p;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::build_sieve;
    use num::ToPrimitive;

    fn tables() -> SieveTables {
        build_sieve(20_000).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn fr_exact_hand_values() {
        let t = tables();
        assert_eq!(fr_exact(1, 3, &t).unwrap(), rat(5, 2));
        assert_eq!(fr_exact(6, 3, &t).unwrap(), rat(-1, 1));
        for n in [1u64, 2, 17, 360] {
            assert_eq!(fr_exact(n, 1, &t).unwrap(), rat(1, 1));
        }
        assert!(fr_exact(5, 0, &t).is_err());
        assert!(fr_exact(5, MAX_EXACT_R + 1, &t).is_err());
    }

    /// The two defining expressions agree term by term in exact rationals:
    /// Σ μ(r)/φ(r)·c_r(n) against the gcd form, as running sums over r.
    #[test]
    fn ramanujan_form_equals_gcd_form() {
        let t = tables();
        for n in 1..=120u64 {
            let mut lhs = BigRational::from_integer(0.into());
            for r in 1..=60u64 {
                let c = crate::sieve::ramanujan_sum(r, n as i64, &t).unwrap();
                let mu_r = t.mu(r);
                if mu_r != 0 {
                    lhs += rat(mu_r * c, t.phi(r) as i64);
                }
                assert_eq!(lhs, fr_exact(n, r, &t).unwrap(), "n={n} R={r}");
            }
        }
    }

    #[test]
    fn fr_fast_hand_values() {
        let t = tables();
        let ctx2 = FrContext::new(2, &t).unwrap();
        assert_eq!(fr_fast(7, &ctx2, &t).unwrap(), 2.0);
        assert_eq!(fr_fast(10, &ctx2, &t).unwrap(), 0.0);
        let ctx10 = FrContext::new(10, &t).unwrap();
        let g10 = ctx10.g_prefix().value(10);
        assert_eq!(fr_fast(1, &ctx10, &t).unwrap(), g10);
    }

    #[test]
    fn fr_fast_matches_exact_oracle() {
        let t = tables();
        for r in [1u64, 2, 3, 10, 50] {
            let ctx = FrContext::new(r, &t).unwrap();
            for n in 1..=300u64 {
                let exact = fr_exact(n, r, &t).unwrap().to_f64().unwrap();
                let fast = fr_fast(n, &ctx, &t).unwrap();
                let err = (fast - exact).abs();
                let tol = 1e-10 * exact.abs().max(1.0);
                assert!(err <= tol, "n={n} R={r}: fast={fast} exact={exact}");
            }
        }
    }

    #[test]
    fn fr_table_hand_row_and_pointwise_match() {
        let t = tables();
        let ctx = FrContext::new(2, &t).unwrap();
        let table = fr_table(10, &ctx, &t, 2).unwrap();
        let expect = [2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0];
        for n in 1..=10u64 {
            assert_eq!(table.value(n), expect[n as usize - 1], "n={n}");
        }

        let ctx = FrContext::new(50, &t).unwrap();
        let table = fr_table(5000, &ctx, &t, 3).unwrap();
        // deterministic pseudo-random sample
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let n = state % 5000 + 1;
            let fast = fr_fast(n, &ctx, &t).unwrap();
            assert_eq!(table.value(n).to_bits(), fast.to_bits(), "n={n}");
        }
    }

    #[test]
    fn fr_table_handles_large_r_near_zero_index() {
        // the primorial of 100 exceeds u64; only genuine divisors of each n
        // may enter its signature
        let t = tables();
        let ctx = FrContext::new(100, &t).unwrap();
        let table = fr_table(300, &ctx, &t, 2).unwrap();
        for n in 1..=300u64 {
            let fast = fr_fast(n, &ctx, &t).unwrap();
            assert_eq!(table.value(n).to_bits(), fast.to_bits(), "n={n}");
        }
    }

    #[test]
    fn fr_table_all_r1_is_one() {
        let t = tables();
        let ctx = FrContext::new(1, &t).unwrap();
        let table = fr_table(5, &ctx, &t, 1).unwrap();
        assert!(table.values()[1..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn fr_table_bitwise_deterministic_across_threads() {
        let t = tables();
        let ctx = FrContext::new(30, &t).unwrap();
        let base = fr_table(20_000, &ctx, &t, 1).unwrap();
        for threads in [2usize, 8] {
            let other = fr_table(20_000, &ctx, &t, threads).unwrap();
            for n in 1..=20_000u64 {
                assert_eq!(
                    base.value(n).to_bits(),
                    other.value(n).to_bits(),
                    "n={n} threads={threads}"
                );
            }
        }
    }

    /// F_R is periodic modulo the product of the primes up to R.
    #[test]
    fn fr_periodicity() {
        let t = tables();
        for (r, period) in [(2u64, 2u64), (3, 6), (5, 30), (7, 210)] {
            let ctx = FrContext::new(r, &t).unwrap();
            for n in 1..=500u64 {
                let a = fr_fast(n, &ctx, &t).unwrap();
                let b = fr_fast(n + period, &ctx, &t).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "R={r} n={n}");
            }
        }
    }

    #[test]
    fn psi_star_hand_values() {
        let t = tables();
        let got = psi_star(20, 3, 1, &t).unwrap();
        let expect = 2.0 * 2f64.ln() + 7f64.ln() + 13f64.ln() + 19f64.ln();
        assert!((got - expect).abs() < 1e-12);

        assert_eq!(psi_star(10, 100, 1, &t).unwrap(), 0.0);

        let got = psi_star(10, 2, -1, &t).unwrap();
        let expect = 3f64.ln() + 5f64.ln() + 7f64.ln() + 3f64.ln();
        assert!((got - expect).abs() < 1e-12);

        assert!(psi_star(10, 0, 1, &t).is_err());
    }

    #[test]
    fn rho_star_hand_values() {
        let t = tables();
        let ctx = FrContext::new(2, &t).unwrap();
        assert_eq!(rho_star(10, 3, 1, &ctx, &t).unwrap(), 2.0);
        let ctx5 = FrContext::new(5, &t).unwrap();
        assert_eq!(rho_star(5, 7, 1, &ctx5, &t).unwrap(), 0.0);
    }

    /// For q ≤ R and (q,a) = 1 the progression sum is within O(R) of x/φ(q).
    #[test]
    fn rho_star_tracks_phi_average_for_small_q() {
        let t = tables();
        let ctx = FrContext::new(10, &t).unwrap();
        let x = 20_000u64;
        for q in [1u64, 2, 3, 5, 6, 10] {
            let rho = rho_star(x, q, 1, &ctx, &t).unwrap();
            let classical = x as f64 / t.phi(q) as f64;
            assert!(
                (rho - classical).abs() <= 10.0 * ctx.r() as f64,
                "q={q}: rho={rho} classical={classical}"
            );
        }
    }

    #[test]
    fn lambda_table_matches_pointwise() {
        let t = tables();
        let table = lambda_table(5000, &t).unwrap();
        for n in 0..=5000u64 {
            assert_eq!(table[n as usize], t.mangoldt(n), "n={n}");
        }
    }

    #[test]
    fn progression_start_cases() {
        assert_eq!(progression_start(1, 3), 4);
        assert_eq!(progression_start(-1, 2), 1);
        assert_eq!(progression_start(-7, 3), 2);
        assert_eq!(progression_start(5, 7), 12);
    }
}
