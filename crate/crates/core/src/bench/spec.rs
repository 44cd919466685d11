use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::partition::GroupPartition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    ExclProx,
    ExclActive,
    ExclActiveStrings,
    Classic,
    Latent,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ExclProx,
        Algorithm::ExclActive,
        Algorithm::ExclActiveStrings,
        Algorithm::Classic,
        Algorithm::Latent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ExclProx => "excl-prox",
            Algorithm::ExclActive => "excl-active",
            Algorithm::ExclActiveStrings => "excl-active-strings",
            Algorithm::Classic => "classic",
            Algorithm::Latent => "latent",
        }
    }

    /// Whether the grid value is the weight of a squared penalty.
    pub fn squared_penalty(self) -> bool {
        matches!(self, Algorithm::ExclActive | Algorithm::ExclActiveStrings)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupScheme {
    Modulo(usize),
    Singleton,
    File(PathBuf),
}

impl GroupScheme {
    pub fn partition(&self, p: usize) -> Result<GroupPartition> {
        match self {
            GroupScheme::Modulo(k) => GroupPartition::modulo(p, *k),
            GroupScheme::Singleton => GroupPartition::singletons(p),
            GroupScheme::File(path) => {
                let part = GroupPartition::from_text(&std::fs::read_to_string(path)?)?;
                if part.p() != p {
                    return Err(Error::Spec(format!(
                        "partition file covers {} indices, spec has p = {p}",
                        part.p()
                    )));
                }
                Ok(part)
            }
        }
    }
}

impl fmt::Display for GroupScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupScheme::Modulo(k) => write!(f, "modulo({k})"),
            GroupScheme::Singleton => f.write_str("singleton"),
            GroupScheme::File(p) => write!(f, "file({})", p.display()),
        }
    }
}

impl FromStr for GroupScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "singleton" {
            return Ok(GroupScheme::Singleton);
        }
        if let Some(arg) = call_arg(s, "modulo") {
            let k = arg.trim().parse().map_err(|_| Error::Spec(format!("bad modulus in {s:?}")))?;
            return Ok(GroupScheme::Modulo(k));
        }
        if let Some(arg) = call_arg(s, "file") {
            return Ok(GroupScheme::File(PathBuf::from(arg.trim())));
        }
        Err(Error::Spec(format!("unknown group scheme {s:?}")))
    }
}

fn call_arg<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == count - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub p: usize,
    pub n: usize,
    pub sigma2: f64,
    /// 1-based start positions of the strings of ones.
    pub string_starts: Vec<usize>,
    pub string_len: usize,
    pub group_scheme: GroupScheme,
    /// Ascending regularization values; `μ` for squared-penalty algorithms.
    pub lambda_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Run limit for the strings variant of the active set.
    pub max_strings: usize,
    /// Window length of the latent groups.
    pub latent_width: usize,
    pub max_iter: usize,
    /// FISTA gap tolerance relative to `L(0)`.
    pub gap_rel_tol: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            p: 200,
            n: 180,
            sigma2: 0.01,
            string_starts: vec![4, 173],
            string_len: 10,
            group_scheme: GroupScheme::Modulo(10),
            lambda_grid: log_grid(5e-3, 2.5, 30),
            trials: 20,
            seed: 2024,
            algorithms: Algorithm::ALL.to_vec(),
            max_strings: 2,
            latent_width: 10,
            max_iter: 20_000,
            gap_rel_tol: 1e-8,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Spec(format!("bad value for {key}: {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(key, t))
        .collect()
}

impl ExperimentSpec {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    ///
    /// `lambda_grid` takes either a list or `logspace(lo, hi, count)`;
    /// `group_scheme` takes `modulo(k)`, `singleton` or `file(path)`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "p" => spec.p = parse_num(key, value)?,
                "n" => spec.n = parse_num(key, value)?,
                "sigma2" => spec.sigma2 = parse_num(key, value)?,
                "string_starts" => spec.string_starts = parse_list(key, value)?,
                "string_len" => spec.string_len = parse_num(key, value)?,
                "group_scheme" => spec.group_scheme = value.parse()?,
                "lambda_grid" => {
                    spec.lambda_grid = match call_arg(value, "logspace") {
                        Some(args) => {
                            let a: Vec<f64> = parse_list(key, args)?;
                            if a.len() != 3 || a[2].fract() != 0.0 || a[2] < 1.0 {
                                return Err(Error::Spec("logspace takes (lo, hi, count)".into()));
                            }
                            log_grid(a[0], a[1], a[2] as usize)
                        }
                        None => parse_list(key, value)?,
                    }
                }
                "trials" => spec.trials = parse_num(key, value)?,
                "seed" => spec.seed = parse_num(key, value)?,
                "algorithms" => {
                    spec.algorithms = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|t| !t.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "max_strings" => spec.max_strings = parse_num(key, value)?,
                "latent_width" => spec.latent_width = parse_num(key, value)?,
                "max_iter" => spec.max_iter = parse_num(key, value)?,
                "gap_rel_tol" => spec.gap_rel_tol = parse_num(key, value)?,
                _ => return Err(Error::Spec(format!("line {}: unknown key {key:?}", lineno + 1))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.p == 0 {
            return fail("p must be positive".into());
        }
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return fail("sigma2 must be a nonnegative number".into());
        }
        if self.string_len == 0 || self.string_len > self.p {
            return fail(format!("string_len must lie in 1..={}", self.p));
        }
        if let Some(&s) = self.string_starts.iter().find(|&&s| s == 0 || s > self.p) {
            return fail(format!("string start {s} outside 1..={}", self.p));
        }
        if self.lambda_grid.is_empty() {
            return fail("lambda_grid is empty".into());
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return fail("lambda_grid values must be positive".into());
        }
        if self.lambda_grid.windows(2).any(|w| w[0] > w[1]) {
            return fail("lambda_grid must be sorted ascending".into());
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms selected".into());
        }
        if self.max_strings == 0 || self.latent_width == 0 || self.max_iter == 0 {
            return fail("max_strings, latent_width and max_iter must be positive".into());
        }
        if !(self.gap_rel_tol > 0.0) {
            return fail("gap_rel_tol must be positive".into());
        }
        if let GroupScheme::Modulo(k) = self.group_scheme {
            if k == 0 || k > self.p {
                return fail(format!("modulus must lie in 1..={}", self.p));
            }
        }
        Ok(())
    }

    /// 0-based indices of the strings of ones, wrapping modulo `p`.
    pub fn true_support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .string_starts
            .iter()
            .flat_map(|&st| (0..self.string_len).map(move |k| (st - 1 + k) % self.p))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[String]| v.join(", ");
        format!(
            "p = {}\nn = {}\nsigma2 = {}\nstring_starts = {}\nstring_len = {}\ngroup_scheme = {}\n\
             lambda_grid = {}\ntrials = {}\nseed = {}\nalgorithms = {}\nmax_strings = {}\n\
             latent_width = {}\nmax_iter = {}\ngap_rel_tol = {}\n",
            self.p,
            self.n,
            self.sigma2,
            list(&self.string_starts.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            self.string_len,
            self.group_scheme,
            list(&self.lambda_grid.iter().map(|l| format!("{l:.16e}")).collect::<Vec<_>>()),
            self.trials,
            self.seed,
            list(&self.algorithms.iter().map(|a| a.to_string()).collect::<Vec<_>>()),
            self.max_strings,
            self.latent_width,
            self.max_iter,
            self.gap_rel_tol,
        )
    }
}
