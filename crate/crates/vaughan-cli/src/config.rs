//! Experiment configuration: argv parsing, optional flat config file,
//! merge semantics (flags override file keys), strict key validation, and
//! a canonical `render` back to argv form.
//!
//! Numeric values accept scientific notation (`1e7`) with exact integer
//! semantics: quantities that must be integers reject non-integral values,
//! and the range bounds `M`/`N` are kept as exact rationals so modulus
//! interval boundaries stay integer-exact.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use num::rational::Ratio;

pub type Bound = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Constants,
    Fr,
    Moment,
    Discrepancy,
    Noncoprime,
    Mass,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constants => "constants",
            Self::Fr => "fr",
            Self::Moment => "moment",
            Self::Discrepancy => "discrepancy",
            Self::Noncoprime => "noncoprime",
            Self::Mass => "mass",
            Self::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "constants" => Self::Constants,
            "fr" => Self::Fr,
            "moment" => Self::Moment,
            "discrepancy" => Self::Discrepancy,
            "noncoprime" => Self::Noncoprime,
            "mass" => Self::Mass,
            "verify" => Self::Verify,
            other => bail!("unknown command '{other}'"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    Dyadic,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Rho,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    L21,
    L22,
    L31,
    L32,
    L33,
    L34,
    L52,
    L71,
}

impl Lemma {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "2.1" => Self::L21,
            "2.2" => Self::L22,
            "3.1" => Self::L31,
            "3.2" => Self::L32,
            "3.3" => Self::L33,
            "3.4" => Self::L34,
            "5.2" => Self::L52,
            "7.1" => Self::L71,
            other => bail!("unknown lemma '{other}' (expected 2.1|2.2|3.1|3.2|3.3|3.4|5.2|7.1)"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::L21 => "2.1",
            Self::L22 => "2.2",
            Self::L31 => "3.1",
            Self::L32 => "3.2",
            Self::L33 => "3.3",
            Self::L34 => "3.4",
            Self::L52 => "5.2",
            Self::L71 => "7.1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub x: Option<u64>,
    pub m: Option<Bound>,
    pub n_bound: Option<Bound>,
    pub r: Option<u64>,
    pub a: i64,
    pub coprime: bool,
    pub kind: Option<MomentKind>,
    pub baseline: Baseline,
    pub lemma: Option<Lemma>,
    pub fr_n: Option<u64>,
    pub q: Option<u64>,
    pub invertible_only: bool,
    pub ell: u64,
    pub log_weighted: bool,
    pub alt: bool,
    pub grid: Option<Vec<u64>>,
    pub truncation: u64,
    pub y: Option<u64>,
    pub prime_limit: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub sieve_limit: Option<u64>,
}

const KNOWN_KEYS: &[&str] = &[
    "x",
    "M",
    "N",
    "R",
    "a",
    "coprime",
    "kind",
    "baseline",
    "lemma",
    "n",
    "q",
    "invertible-only",
    "ell",
    "log-weighted",
    "alt",
    "grid",
    "truncation",
    "y",
    "prime-limit",
    "threads",
    "out",
    "format",
    "sieve-limit",
    "config",
];

/// Environment variable consulted for the default worker count; the
/// `--threads` flag overrides it.
pub const THREADS_ENV: &str = "VAUGHAN_THREADS";

/// Parses `argv` (without the program name). The first token is the
/// subcommand; the rest are `--key value` pairs. A `--config FILE` flag
/// loads `key = value` lines (with `#` comments) as defaults that CLI
/// flags override. Unknown keys are rejected in both sources.
pub fn parse_config(argv: &[String]) -> Result<ExperimentConfig> {
    let (command, cli_map) = argv_to_map(argv)?;
    let mut merged = match cli_map.get("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file '{path}'"))?;
            file_to_map(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in &cli_map {
        if k != "config" {
            merged.insert(k.clone(), v.clone());
        }
    }
    build_config(command, &merged)
}

fn argv_to_map(argv: &[String]) -> Result<(Command, BTreeMap<String, String>)> {
    let Some(first) = argv.first() else {
        bail!("missing command (expected constants|fr|moment|discrepancy|noncoprime|mass|verify)")
    };
    let command = Command::parse(first)?;
    let mut map = BTreeMap::new();
    let mut i = 1;
    while i < argv.len() {
        let arg = &argv[i];
        let Some(key) = arg.strip_prefix("--") else {
            bail!("expected a --flag, got '{arg}'");
        };
        if !KNOWN_KEYS.contains(&key) {
            bail!("unknown flag '--{key}'");
        }
        // boolean switches may omit the value
        let boolean = matches!(key, "coprime" | "invertible-only" | "log-weighted" | "alt");
        let value = if i + 1 < argv.len() && !argv[i + 1].starts_with("--") {
            i += 1;
            argv[i].clone()
        } else if boolean {
            "true".to_string()
        } else {
            bail!("flag '--{key}' requires a value");
        };
        map.insert(key.to_string(), value);
        i += 1;
    }
    Ok((command, map))
}

fn file_to_map(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {} is not 'key = value': '{raw}'", lineno + 1);
        };
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) || key == "config" {
            bail!("unknown config key '{key}' on line {}", lineno + 1);
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Exact rational from a decimal/scientific literal (no sign).
pub fn parse_ratio(s: &str) -> Result<Bound> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..]
                .parse()
                .map_err(|_| anyhow!("bad exponent in '{s}'"))?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        bail!("empty numeric literal '{s}'");
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        bail!("unparsable numeric literal '{s}'");
    }
    let digits = format!("{int_part}{frac_part}");
    let mant: u128 = digits
        .parse()
        .map_err(|_| anyhow!("numeric literal '{s}' out of range"))?;
    let shift = exp - frac_part.len() as i32;
    let (mut num, mut den): (u128, u128) = (mant, 1);
    if shift >= 0 {
        num = num
            .checked_mul(10u128.checked_pow(shift as u32).ok_or_else(|| anyhow!("'{s}' out of range"))?)
            .ok_or_else(|| anyhow!("'{s}' out of range"))?;
    } else {
        den = 10u128
            .checked_pow((-shift) as u32)
            .ok_or_else(|| anyhow!("'{s}' out of range"))?;
    }
    let g = gcd_u128(num, den);
    num /= g;
    den /= g;
    if num > u64::MAX as u128 || den > u64::MAX as u128 {
        bail!("numeric literal '{s}' out of range");
    }
    Ok(Bound::new(num as u64, den as u64))
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Exact integer (rejects non-integral values such as `1.5e0`).
pub fn parse_u64_exact(s: &str) -> Result<u64> {
    let r = parse_ratio(s)?;
    if *r.denom() != 1 {
        bail!("'{s}' is not an integer");
    }
    Ok(*r.numer())
}

fn parse_i64_exact(s: &str) -> Result<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let v = parse_u64_exact(body)?;
    if v > i64::MAX as u64 {
        bail!("'{s}' out of range");
    }
    Ok(if neg { -(v as i64) } else { v as i64 })
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("flag '--{key}' expects true|false, got '{other}'"),
    }
}

fn parse_grid(s: &str) -> Result<Vec<u64>> {
    let grid: Result<Vec<u64>> = s.split(',').map(|tok| parse_u64_exact(tok.trim())).collect();
    let grid = grid?;
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("grid must be a nonempty ascending list, got '{s}'");
    }
    Ok(grid)
}

fn default_threads() -> usize {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn build_config(command: Command, map: &BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let get = |key: &str| map.get(key).map(String::as_str);
    let config = ExperimentConfig {
        command,
        x: get("x").map(parse_u64_exact).transpose()?,
        m: get("M").map(parse_ratio).transpose()?,
        n_bound: get("N").map(parse_ratio).transpose()?,
        r: get("R").map(parse_u64_exact).transpose()?,
        a: get("a").map(parse_i64_exact).transpose()?.unwrap_or(1),
        coprime: get("coprime").map(|v| parse_bool("coprime", v)).transpose()?.unwrap_or(false),
        kind: get("kind")
            .map(|v| match v {
                "dyadic" => Ok(MomentKind::Dyadic),
                "full" => Ok(MomentKind::Full),
                other => bail!("unknown moment kind '{other}' (expected dyadic|full)"),
            })
            .transpose()?,
        baseline: get("baseline")
            .map(|v| match v {
                "rho" => Ok(Baseline::Rho),
                "phi" => Ok(Baseline::Phi),
                other => bail!("unknown baseline '{other}' (expected rho|phi)"),
            })
            .transpose()?
            .unwrap_or(Baseline::Rho),
        lemma: get("lemma").map(Lemma::parse).transpose()?,
        fr_n: get("n").map(parse_u64_exact).transpose()?,
        q: get("q").map(parse_u64_exact).transpose()?,
        invertible_only: get("invertible-only")
            .map(|v| parse_bool("invertible-only", v))
            .transpose()?
            .unwrap_or(false),
        ell: get("ell").map(parse_u64_exact).transpose()?.unwrap_or(1),
        log_weighted: get("log-weighted")
            .map(|v| parse_bool("log-weighted", v))
            .transpose()?
            .unwrap_or(false),
        alt: get("alt").map(|v| parse_bool("alt", v)).transpose()?.unwrap_or(false),
        grid: get("grid").map(parse_grid).transpose()?,
        truncation: get("truncation")
            .map(parse_u64_exact)
            .transpose()?
            .unwrap_or(100_000_000),
        y: get("y").map(parse_u64_exact).transpose()?,
        prime_limit: get("prime-limit")
            .map(parse_u64_exact)
            .transpose()?
            .unwrap_or(10_000_000),
        threads: match get("threads") {
            Some(v) => {
                let n = parse_u64_exact(v)? as usize;
                if n == 0 {
                    bail!("threads must be ≥ 1");
                }
                n
            }
            None => default_threads(),
        },
        out: get("out").map(PathBuf::from),
        format: get("format")
            .map(|v| match v {
                "csv" => Ok(OutputFormat::Csv),
                "json" => Ok(OutputFormat::Json),
                other => bail!("unknown format '{other}' (expected csv|json)"),
            })
            .transpose()?
            .unwrap_or(OutputFormat::Csv),
        sieve_limit: get("sieve-limit").map(parse_u64_exact).transpose()?,
    };
    validate(&config)?;
    Ok(config)
}

fn require<T: Copy>(field: Option<T>, name: &str, command: &str) -> Result<T> {
    field.ok_or_else(|| anyhow!("'{command}' requires --{name}"))
}

/// Theorem-range validation, before any allocation. Messages name the
/// violated constraint.
fn validate(c: &ExperimentConfig) -> Result<()> {
    let cmd = c.command.name();
    match c.command {
        Command::Constants => {
            if c.a == 0 {
                bail!("constants: requires a ≠ 0");
            }
        }
        Command::Fr => {
            require(c.fr_n, "n", cmd)?;
            require(c.r, "R", cmd)?;
        }
        Command::Moment => {
            let kind = require(c.kind, "kind", cmd)?;
            let x = require(c.x, "x", cmd)?;
            let m = require(c.m, "M", cmd)?;
            if m < Bound::from_integer(1) {
                bail!("moment: requires M ≥ 1");
            }
            // the classical x/φ(q) baseline has no kernel cutoff
            if c.baseline == Baseline::Phi {
                if kind != MomentKind::Dyadic {
                    bail!("moment: baseline 'phi' is only defined for --kind dyadic");
                }
                return post_validate(c);
            }
            let r = require(c.r, "R", cmd)?;
            let (num, den) = (*m.numer() as u128, *m.denom() as u128);
            match kind {
                MomentKind::Full => {
                    if num > r as u128 * den {
                        bail!("moment --kind full: requires M ≤ R (M = {m}, R = {r})");
                    }
                    if (r as u128) * (r as u128) > x as u128 {
                        bail!("moment --kind full: requires R ≤ √x (R = {r}, x = {x})");
                    }
                    if c.coprime && c.a.unsigned_abs() as u128 * num > r as u128 * den {
                        bail!("moment --kind full: requires |a|M ≤ R (a = {}, M = {m}, R = {r})", c.a);
                    }
                }
                MomentKind::Dyadic => {
                    if c.baseline == Baseline::Rho {
                        if 2 * num > r as u128 * den {
                            bail!("moment --kind dyadic: requires 2M ≤ R (M = {m}, R = {r})");
                        }
                        if c.coprime && 2 * c.a.unsigned_abs() as u128 * num > r as u128 * den {
                            bail!(
                                "moment --kind dyadic: requires 2|a|M ≤ R (a = {}, M = {m}, R = {r})",
                                c.a
                            );
                        }
                    }
                }
            }
        }
        Command::Discrepancy => {
            let x = require(c.x, "x", cmd)?;
            let m = require(c.m, "M", cmd)?;
            let r = require(c.r, "R", cmd)?;
            let (num, den) = (*m.numer() as u128, *m.denom() as u128);
            let am = c.a.unsigned_abs() as u128 * num;
            if am < den || am > r as u128 * den {
                bail!("discrepancy: requires 1 ≤ |a|M ≤ R (a = {}, M = {m}, R = {r})", c.a);
            }
            if (r as u128) * (r as u128) > x as u128 {
                bail!("discrepancy: requires R ≤ √x (R = {r}, x = {x})");
            }
        }
        Command::Noncoprime => {
            let x = require(c.x, "x", cmd)?;
            let n = require(c.n_bound, "N", cmd)?;
            let r = require(c.r, "R", cmd)?;
            let (num, den) = (*n.numer() as u128, *n.denom() as u128);
            if n < Bound::from_integer(1) || c.a.unsigned_abs() as u128 * num > r as u128 * den {
                bail!("noncoprime: requires 1 ≤ |a|N ≤ R (a = {}, N = {n}, R = {r})", c.a);
            }
            if (r as u128) * (r as u128) > x as u128 {
                bail!("noncoprime: requires R ≤ √x (R = {r}, x = {x})");
            }
        }
        Command::Mass => {
            let x = require(c.x, "x", cmd)?;
            let q = require(c.q, "q", cmd)?;
            require(c.r, "R", cmd)?;
            if q == 0 || q >= x {
                bail!("mass: requires 1 ≤ q < x (q = {q}, x = {x})");
            }
        }
        Command::Verify => {
            let lemma = require(c.lemma, "lemma", cmd)?;
            if matches!(lemma, Lemma::L31) && c.ell == 0 {
                bail!("verify 3.1: requires ell ≥ 1");
            }
            if c.a == 0 {
                bail!("verify: requires a ≠ 0");
            }
        }
    }
    post_validate(c)
}

fn post_validate(c: &ExperimentConfig) -> Result<()> {
    if c.prime_limit < 1000 {
        bail!("prime-limit must be ≥ 1000");
    }
    Ok(())
}

/// Exact decimal form. Parsed bounds always have denominator `2^a·5^b`
/// (decimal literals), so scaling to a power of ten is exact.
fn format_ratio(b: Bound) -> String {
    if *b.denom() == 1 {
        return b.numer().to_string();
    }
    let mut den = *b.denom() as u128;
    let mut k = 0u32;
    let mut scale: u128 = 1;
    while den.is_multiple_of(2) {
        den /= 2;
        scale *= 5;
        k += 1;
    }
    while den.is_multiple_of(5) {
        den /= 5;
        scale *= 2;
        k += 1;
    }
    debug_assert_eq!(den, 1, "bound denominator must divide a power of ten");
    let scaled = (*b.numer() as u128 * scale).to_string();
    let digits = format!("{:0>width$}", scaled, width = k as usize + 1);
    let split = digits.len() - k as usize;
    format!("{}.{}", &digits[..split], &digits[split..])
}

/// Canonical argv form of a config; `parse_config(render(c)) == c`.
pub fn render(c: &ExperimentConfig) -> Vec<String> {
    let mut argv = vec![c.command.name().to_string()];
    let mut push = |key: &str, value: String| {
        argv.push(format!("--{key}"));
        argv.push(value);
    };
    if let Some(x) = c.x {
        push("x", x.to_string());
    }
    if let Some(m) = c.m {
        push("M", format_ratio(m));
    }
    if let Some(n) = c.n_bound {
        push("N", format_ratio(n));
    }
    if let Some(r) = c.r {
        push("R", r.to_string());
    }
    push("a", c.a.to_string());
    push("coprime", c.coprime.to_string());
    if let Some(kind) = c.kind {
        push(
            "kind",
            match kind {
                MomentKind::Dyadic => "dyadic",
                MomentKind::Full => "full",
            }
            .to_string(),
        );
    }
    if c.baseline == Baseline::Phi {
        push("baseline", "phi".to_string());
    }
    if let Some(lemma) = c.lemma {
        push("lemma", lemma.name().to_string());
    }
    if let Some(n) = c.fr_n {
        push("n", n.to_string());
    }
    if let Some(q) = c.q {
        push("q", q.to_string());
    }
    push("invertible-only", c.invertible_only.to_string());
    push("ell", c.ell.to_string());
    push("log-weighted", c.log_weighted.to_string());
    push("alt", c.alt.to_string());
    if let Some(grid) = &c.grid {
        push(
            "grid",
            grid.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
    }
    push("truncation", c.truncation.to_string());
    if let Some(y) = c.y {
        push("y", y.to_string());
    }
    push("prime-limit", c.prime_limit.to_string());
    push("threads", c.threads.to_string());
    if let Some(out) = &c.out {
        push("out", out.display().to_string());
    }
    push(
        "format",
        match c.format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
        .to_string(),
    );
    if let Some(limit) = c.sieve_limit {
        push("sieve-limit", limit.to_string());
    }
    argv
}
