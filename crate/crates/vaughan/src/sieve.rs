//! Smallest-prime-factor sieve and the exact arithmetic functions built
//! on top of it: μ, φ, ω, Λ, rad, Ramanujan sums, squarefree divisor
//! enumeration and the prefix sums `G(y) = Σ_{m≤y} μ²(m)/φ(m)`.
//!
//! All production arithmetic here is exact integer arithmetic; the only
//! floats are Λ (stored as `ln p`) and the `G` prefix table, which uses
//! compensated summation. For a negative argument `a`, every gcd is taken
//! with `|a|`, and `gcd(r, 0) = r`.

use num::{BigInt, BigRational};

use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Hard ceiling on the sieve size (memory guard).
pub const MAX_SIEVE_LIMIT: u64 = 1 << 33;

/// Largest `R` for which [`g_prefix`] will build the exact rational table.
pub const MAX_EXACT_PREFIX: u64 = 10_000;

/// Smallest-prime-factor table plus the ordered list of primes up to `limit`.
///
/// Immutable after construction and safe to share across threads.
pub struct SieveTables {
    limit: u64,
    /// `spf_raw[n]` is the smallest prime factor of composite `n`, or 0 when
    /// `n` is prime or `n < 2`. Composites `n ≤ 2^33` always have a factor
    /// below 2^17, so `u32` suffices.
    spf_raw: Vec<u32>,
    primes: Vec<u64>,
}

/// Exact prime factorization: `(prime, exponent)` pairs, primes ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub pairs: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn value(&self) -> u64 {
        self.pairs.iter().map(|&(p, e)| p.pow(e)).product()
    }

    /// Product of the distinct prime factors.
    pub fn radical(&self) -> u64 {
        self.pairs.iter().map(|&(p, _)| p).product()
    }

    pub fn distinct_primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.pairs.iter().map(|&(p, _)| p)
    }
}

/// The bundle of arithmetic-function values at a single integer.
#[derive(Debug, Clone, PartialEq)]
pub struct ArithInfo {
    /// Möbius μ(n) ∈ {−1, 0, 1}.
    pub mu: i64,
    /// Euler totient φ(n).
    pub phi: u64,
    /// Number of distinct prime factors ω(n).
    pub omega: u32,
    /// Von Mangoldt Λ(n) = ln p when n = p^ν, else 0.
    pub mangoldt: f64,
    /// Radical: product of the distinct prime factors (rad(1) = 1).
    pub rad: u64,
}

impl SieveTables {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.spf_raw[n as usize] == 0
    }

    /// Smallest prime factor of `n` (`n` itself when prime).
    pub fn spf(&self, n: u64) -> u64 {
        debug_assert!(n >= 2 && n <= self.limit);
        match self.spf_raw[n as usize] {
            0 => n,
            p => p as u64,
        }
    }

    pub fn factorize(&self, n: u64) -> Result<Factorization> {
        if n == 0 || n > self.limit {
            return Err(Error::Domain(format!(
                "factorize: n = {n} outside [1, {}]",
                self.limit
            )));
        }
        let mut pairs = Vec::new();
        let mut m = n;
        while m > 1 {
            let p = self.spf(m);
            let mut e = 0;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            pairs.push((p, e));
        }
        Ok(Factorization { pairs })
    }

    /// φ(n) by direct factorization (exact integer arithmetic).
    pub fn phi(&self, n: u64) -> u64 {
        debug_assert!(n >= 1 && n <= self.limit);
        let mut phi = n;
        let mut m = n;
        while m > 1 {
            let p = self.spf(m);
            phi -= phi / p;
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        phi
    }

    /// μ(n); 0 for squarefull n.
    pub fn mu(&self, n: u64) -> i64 {
        debug_assert!(n >= 1 && n <= self.limit);
        let mut m = n;
        let mut mu = 1i64;
        while m > 1 {
            let p = self.spf(m);
            m /= p;
            if m.is_multiple_of(p) {
                return 0;
            }
            mu = -mu;
        }
        mu
    }

    /// Λ(n) = ln p when n = p^ν (ν ≥ 1), else 0.
    pub fn mangoldt(&self, n: u64) -> f64 {
        if n < 2 {
            return 0.0;
        }
        debug_assert!(n <= self.limit);
        let p = self.spf(n);
        let mut m = n;
        while m.is_multiple_of(p) {
            m /= p;
        }
        if m == 1 {
            (p as f64).ln()
        } else {
            0.0
        }
    }
}

/// Builds the smallest-prime-factor tables with a linear sieve.
///
/// Deterministic and single-threaded; `O(limit)` time and 4 bytes per
/// integer for the factor table.
pub fn build_sieve(limit: u64) -> Result<SieveTables> {
    if !(2..=MAX_SIEVE_LIMIT).contains(&limit) {
        return Err(Error::Config(format!(
            "sieve limit {limit} outside [2, 2^33]"
        )));
    }
    let n = limit as usize;
    let mut spf_raw = vec![0u32; n + 1];
    let mut primes: Vec<u64> = Vec::new();
    for i in 2..=n {
        if spf_raw[i] == 0 {
            primes.push(i as u64);
        }
        let spf_i = if spf_raw[i] == 0 {
            i as u64
        } else {
            spf_raw[i] as u64
        };
        for &p in &primes {
            if p > spf_i || p * (i as u64) > limit {
                break;
            }
            spf_raw[p as usize * i] = p as u32;
        }
    }
    Ok(SieveTables {
        limit,
        spf_raw,
        primes,
    })
}

/// Streams the primes in `[2, limit]` in ascending order to `visit`,
/// using a segmented sieve with `O(√limit)` memory. This keeps prime-sum
/// constants (which may truncate at 10^8 or beyond) independent of the
/// main factor table size.
pub fn stream_primes(limit: u64, mut visit: impl FnMut(u64)) {
    if limit < 2 {
        return;
    }
    let root = (limit as f64).sqrt() as u64 + 1;
    let base = simple_primes(root);
    for &p in &base {
        if p <= limit {
            visit(p);
        }
    }
    const SEGMENT: u64 = 1 << 18;
    let mut lo = root + 1;
    let mut mark = vec![false; SEGMENT as usize];
    while lo <= limit {
        let hi = (lo + SEGMENT - 1).min(limit);
        let len = (hi - lo + 1) as usize;
        mark[..len].fill(false);
        for &p in &base {
            if p * p > hi {
                break;
            }
            let mut m = lo.div_ceil(p) * p;
            while m <= hi {
                mark[(m - lo) as usize] = true;
                m += p;
            }
        }
        for (i, &composite) in mark[..len].iter().enumerate() {
            if !composite {
                visit(lo + i as u64);
            }
        }
        lo = hi + 1;
    }
}

fn simple_primes(limit: u64) -> Vec<u64> {
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// gcd with the sign convention used throughout: `gcd(r, a) = gcd(r, |a|)`
/// and `gcd(r, 0) = r`.
pub fn gcd_abs(r: u64, a: i64) -> u64 {
    gcd_u64(r, a.unsigned_abs())
}

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// All arithmetic-function values at `n`, from the factor table.
pub fn arith_query(n: u64, tables: &SieveTables) -> Result<ArithInfo> {
    if n == 0 || n > tables.limit() {
        return Err(Error::Domain(format!(
            "arith_query: n = {n} outside [1, {}]",
            tables.limit()
        )));
    }
    let f = tables.factorize(n)?;
    let omega = f.pairs.len() as u32;
    let mut mu = if f.pairs.iter().any(|&(_, e)| e > 1) {
        0
    } else if omega.is_multiple_of(2) {
        1
    } else {
        -1
    };
    if n == 1 {
        mu = 1;
    }
    let mut phi = n;
    for &(p, _) in &f.pairs {
        phi -= phi / p;
    }
    let mangoldt = if omega == 1 {
        (f.pairs[0].0 as f64).ln()
    } else {
        0.0
    };
    Ok(ArithInfo {
        mu,
        phi,
        omega,
        mangoldt,
        rad: f.radical(),
    })
}

/// Ramanujan sum `c_r(n) = Σ_{1≤b≤r, (b,r)=1} e(bn/r)` by the closed form
/// `μ(r/g)·φ(r)/φ(r/g)` with `g = gcd(r, |n|)`; always an integer, and
/// `c_r(0) = φ(r)`.
pub fn ramanujan_sum(r: u64, n: i64, tables: &SieveTables) -> Result<i64> {
    if r == 0 || r > tables.limit() {
        return Err(Error::Domain(format!(
            "ramanujan_sum: r = {r} outside [1, {}]",
            tables.limit()
        )));
    }
    let g = gcd_abs(r, n);
    let m = r / g;
    let mu = tables.mu(m);
    if mu == 0 {
        return Ok(0);
    }
    // φ(m) | φ(r) for m | r, so the division is exact.
    Ok(mu * (tables.phi(r) / tables.phi(m)) as i64)
}

/// Squarefree divisors `d ≤ bound` of the factored integer, with μ(d),
/// sorted ascending. Always contains `(1, +1)`.
pub fn squarefree_divisors(f: &Factorization, bound: u64) -> Vec<(u64, i64)> {
    let mut out: Vec<(u64, i64)> = vec![(1, 1)];
    for &(p, _) in &f.pairs {
        let prev = out.clone();
        for &(d, mu) in &prev {
            if let Some(dp) = d.checked_mul(p) {
                if dp <= bound {
                    out.push((dp, -mu));
                }
            }
        }
    }
    out.sort_unstable_by_key(|&(d, _)| d);
    out
}

/// Prefix sums of μ²(m)/φ(m): `values[y] = Σ_{m≤y} μ²(m)/φ(m)`.
///
/// The float table uses compensated summation; the exact rational table is
/// optional and limited to `R ≤ 10^4` (it is the oracle for the float path).
pub struct GPrefix {
    r: u64,
    values: Vec<f64>,
    exact_values: Option<Vec<BigRational>>,
}

impl GPrefix {
    pub fn r(&self) -> u64 {
        self.r
    }

    /// `G(⌊y⌋)`, clamped to the table range.
    pub fn value(&self, y: u64) -> f64 {
        self.values[y.min(self.r) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact_values(&self) -> Option<&[BigRational]> {
        self.exact_values.as_deref()
    }
}

/// Builds the `G` prefix table up to `R`.
pub fn g_prefix(r: u64, tables: &SieveTables, exact: bool) -> Result<GPrefix> {
    if r == 0 || r > tables.limit() {
        return Err(Error::Config(format!(
            "g_prefix: R = {r} outside [1, {}]",
            tables.limit()
        )));
    }
    if exact && r > MAX_EXACT_PREFIX {
        return Err(Error::Config(format!(
            "g_prefix: exact table limited to R ≤ {MAX_EXACT_PREFIX}, got {r}"
        )));
    }
    let mut values = Vec::with_capacity(r as usize + 1);
    let mut acc = CompensatedSum::new();
    values.push(0.0);
    let mut exact_values = exact.then(|| vec![BigRational::from_integer(BigInt::from(0))]);
    let mut exact_acc = BigRational::from_integer(BigInt::from(0));
    for m in 1..=r {
        if tables.mu(m) != 0 {
            let phi = tables.phi(m);
            acc.add(1.0 / phi as f64);
            if let Some(ev) = exact_values.as_mut() {
                exact_acc += BigRational::new(BigInt::from(1), BigInt::from(phi));
                ev.push(exact_acc.clone());
                values.push(acc.value());
                continue;
            }
        } else if let Some(ev) = exact_values.as_mut() {
            ev.push(exact_acc.clone());
        }
        values.push(acc.value());
    }
    Ok(GPrefix {
        r,
        values,
        exact_values,
    })
}

/// Trial-division factorization, independent of any sieve. Used for small
/// arguments (the residue `a` of a progression) and as a test oracle.
pub fn factor_u64(n: u64) -> Factorization {
    let mut pairs = Vec::new();
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m.is_multiple_of(p) {
            let mut e = 0;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            pairs.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 {
        pairs.push((m, 1));
    }
    Factorization { pairs }
}
