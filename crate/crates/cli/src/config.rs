//! Experiment configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line   = blank | comment | entry
//! comment = "#" any*
//! entry  = key "=" value [comment]
//! box    = range ("," range)*          e.g.  0:1, 0:1, 0:1   or   0:1^3
//! range  = real ":" real ["^" count]
//! list   = real ("," real)*
//! ```
//!
//! Keys (defaults in brackets): `mode` (ttk | pttk | global-1 | global-2 | aca-baseline),
//! `kernel`, `length_scale` [free], `nu` [free], `source_box`, `target_box` [source box],
//! `theta_box` [empty], `n_sources` [2000], `n_targets` [n_sources], `nodes` [27], `eps`
//! (list), `theta_samples` [100], `subsample` [500, or `full`], `error_norm` [F, or 2],
//! `seed` [PTTK_SEED, then 2024], `max_sweeps` [1000], `aca_max_rank` [1000], `clip` [true for
//! positive definite families], `output` [none]. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pttk::cross::DEFAULT_MAX_SWEEPS;
use pttk::global::default_clip;
use pttk::{Interval, Kernel, KernelFamily, KernelSpec, Norm};
use serde::{Serialize, Serializer};

use crate::HarnessError;

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Ttk,
    Pttk,
    #[serde(rename = "global-1")]
    Global1,
    #[serde(rename = "global-2")]
    Global2,
    AcaBaseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Ttk => "ttk",
            Mode::Pttk => "pttk",
            Mode::Global1 => "global-1",
            Mode::Global2 => "global-2",
            Mode::AcaBaseline => "aca-baseline",
        }
    }

    pub fn is_global(self) -> bool {
        matches!(self, Mode::Global1 | Mode::Global2)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        [Mode::Ttk, Mode::Pttk, Mode::Global1, Mode::Global2, Mode::AcaBaseline]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown mode `{s}`")))
    }
}

/// A complete, validated experiment description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(serialize_with = "display")]
    pub kernel: KernelFamily,
    pub length_scale: Option<f64>,
    pub nu: Option<f64>,
    #[serde(serialize_with = "ranges")]
    pub source_box: Vec<Interval>,
    #[serde(serialize_with = "ranges")]
    pub target_box: Vec<Interval>,
    #[serde(serialize_with = "ranges")]
    pub theta_box: Vec<Interval>,
    pub n_sources: usize,
    pub n_targets: usize,
    pub nodes: usize,
    pub eps: Vec<f64>,
    pub theta_samples: usize,
    /// Rows and columns in the error subsample; `None` measures the full matrix.
    pub subsample: Option<usize>,
    #[serde(serialize_with = "display")]
    pub error_norm: Norm,
    pub seed: u64,
    pub max_sweeps: usize,
    pub aca_max_rank: usize,
    pub clip: bool,
    pub output: Option<PathBuf>,
}

fn display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ranges<S: Serializer>(v: &[Interval], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|iv| [iv.lo, iv.hi]))
}

const KEYS: [&str; 19] = [
    "mode",
    "kernel",
    "length_scale",
    "nu",
    "source_box",
    "target_box",
    "theta_box",
    "n_sources",
    "n_targets",
    "nodes",
    "eps",
    "theta_samples",
    "subsample",
    "error_norm",
    "seed",
    "max_sweeps",
    "aca_max_rank",
    "clip",
    "output",
];

impl ExperimentConfig {
    /// Parses and validates a configuration; `env_seed` is used when no `seed` key is given.
    pub fn parse(text: &str, env_seed: Option<u64>) -> Result<Self, HarnessError> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(HarnessError::Config(format!("line {}: unknown key `{key}`", no + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(HarnessError::Config(format!("line {}: key `{key}` given twice", no + 1)));
            }
        }
        Self::from_entries(entries, env_seed)
    }

    /// Applies `key=value` overrides on top of the file contents and re-validates.
    pub fn parse_with_overrides(text: &str, overrides: &[String], env_seed: Option<u64>) -> Result<Self, HarnessError> {
        let mut merged = String::from(text);
        let mut replaced: Vec<String> = Vec::new();
        for o in overrides {
            let (key, _) = o.split_once('=').ok_or_else(|| HarnessError::Config(format!("override `{o}` is not key=value")))?;
            replaced.push(key.trim().to_string());
        }
        merged = merged
            .lines()
            .filter(|l| {
                let body = l.split('#').next().unwrap_or("");
                body.split_once('=').map_or(true, |(k, _)| !replaced.iter().any(|r| r == k.trim()))
            })
            .collect::<Vec<_>>()
            .join("\n");
        for o in overrides {
            merged.push('\n');
            merged.push_str(o);
        }
        Self::parse(&merged, env_seed)
    }

    fn from_entries(mut e: BTreeMap<String, String>, env_seed: Option<u64>) -> Result<Self, HarnessError> {
        let mut take = |k: &str| e.remove(k);
        let mode: Mode = required(take("mode"), "mode")?.parse()?;
        let kernel: KernelFamily = required(take("kernel"), "kernel")?.parse().map_err(cfg)?;
        let length_scale = take("length_scale").map(|v| real(&v, "length_scale")).transpose()?;
        let nu = take("nu").map(|v| real(&v, "nu")).transpose()?;
        let source_box = parse_box(&required(take("source_box"), "source_box")?)?;
        let target_box = take("target_box").map(|v| parse_box(&v)).transpose()?.unwrap_or_else(|| source_box.clone());
        let theta_box = take("theta_box").map(|v| parse_box(&v)).transpose()?.unwrap_or_default();
        let n_sources = take("n_sources").map(|v| count(&v, "n_sources")).transpose()?.unwrap_or(2000);
        let n_targets = take("n_targets").map(|v| count(&v, "n_targets")).transpose()?.unwrap_or(n_sources);
        let nodes = take("nodes").map(|v| count(&v, "nodes")).transpose()?.unwrap_or(27);
        let eps = required(take("eps"), "eps")?.split(',').map(|v| real(v, "eps")).collect::<Result<Vec<_>, _>>()?;
        let theta_samples = take("theta_samples").map(|v| count(&v, "theta_samples")).transpose()?.unwrap_or(100);
        let subsample = match take("subsample").as_deref().map(str::trim) {
            None => Some(pttk::metrics::DEFAULT_SUBSAMPLE),
            Some("full") => None,
            Some(v) => Some(count(v, "subsample")?),
        };
        let error_norm = take("error_norm").map(|v| v.parse::<Norm>().map_err(cfg)).transpose()?.unwrap_or(Norm::Frobenius);
        let seed = match take("seed") {
            Some(v) => v.trim().parse().map_err(|_| HarnessError::Config(format!("seed `{v}` is not an unsigned integer")))?,
            None => env_seed.unwrap_or(DEFAULT_SEED),
        };
        let max_sweeps = take("max_sweeps").map(|v| count(&v, "max_sweeps")).transpose()?.unwrap_or(DEFAULT_MAX_SWEEPS);
        let aca_max_rank = take("aca_max_rank").map(|v| count(&v, "aca_max_rank")).transpose()?.unwrap_or(1000);
        let clip = match take("clip").as_deref().map(str::trim) {
            None => default_clip(kernel),
            Some("true") => true,
            Some("false") => false,
            Some(v) => return Err(HarnessError::Config(format!("clip `{v}` is not true or false"))),
        };
        let output = take("output").map(PathBuf::from);
        let cfg = Self {
            mode,
            kernel,
            length_scale,
            nu,
            source_box,
            target_box,
            theta_box,
            n_sources,
            n_targets,
            nodes,
            eps,
            theta_samples,
            subsample,
            error_norm,
            seed,
            max_sweeps,
            aca_max_rank,
            clip,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.source_box.len() != self.target_box.len() {
            return fail(format!("source box has {} dimensions, target box {}", self.source_box.len(), self.target_box.len()));
        }
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return fail("every eps must lie in (0, 1)".into());
        }
        if self.nodes < 2 {
            return fail("nodes must be at least 2".into());
        }
        if self.n_sources == 0 || self.n_targets == 0 {
            return fail("point counts must be positive".into());
        }
        let arity = self.kernel_spec().theta_arity();
        if arity != self.theta_box.len() {
            return fail(format!(
                "kernel {} has {arity} free parameters (length_scale, nu unset) but theta_box has {} ranges",
                self.kernel,
                self.theta_box.len()
            ));
        }
        match self.mode {
            Mode::Ttk if !self.theta_box.is_empty() => fail("mode ttk takes no parameters: fix length_scale and nu".into()),
            Mode::Pttk | Mode::Global1 | Mode::Global2 if self.theta_box.is_empty() => {
                fail(format!("mode {} needs a theta_box", self.mode))
            }
            m if m.is_global() && (self.source_box != self.target_box || self.n_sources != self.n_targets) => {
                fail(format!("mode {m} needs identical source and target boxes and point counts"))
            }
            _ => Ok(()),
        }
    }

    /// Kernel with the pinned parameters of this configuration.
    pub fn kernel_spec(&self) -> KernelSpec {
        let mut spec = KernelSpec::parametric(self.kernel);
        if self.kernel.has_length_scale() {
            spec.length_scale = self.length_scale;
        }
        if self.kernel == KernelFamily::Matern {
            spec.nu = self.nu;
        }
        spec
    }
}

fn cfg(e: pttk::Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn required(v: Option<String>, key: &str) -> Result<String, HarnessError> {
    v.ok_or_else(|| HarnessError::Config(format!("missing key `{key}`")))
}

fn real(v: &str, key: &str) -> Result<f64, HarnessError> {
    let x: f64 = v.trim().parse().map_err(|_| HarnessError::Config(format!("{key}: `{}` is not a number", v.trim())))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(HarnessError::Config(format!("{key}: `{}` is not finite", v.trim())))
    }
}

fn count(v: &str, key: &str) -> Result<usize, HarnessError> {
    let t = v.trim();
    // Accept integral reals such as 1e5.
    if let Ok(n) = t.parse::<usize>() {
        return Ok(n);
    }
    let x = real(t, key)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(HarnessError::Config(format!("{key}: `{t}` is not a count")))
    }
}

/// `lo:hi[^k], ...` into intervals.
pub fn parse_box(v: &str) -> Result<Vec<Interval>, HarnessError> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (range, times) = match part.split_once('^') {
            Some((r, k)) => (r, count(k, "box repeat")?),
            None => (part, 1),
        };
        let (lo, hi) = range
            .split_once(':')
            .ok_or_else(|| HarnessError::Config(format!("range `{part}` is not lo:hi")))?;
        let iv = Interval::new(real(lo, "box")?, real(hi, "box")?).map_err(cfg)?;
        out.extend(std::iter::repeat(iv).take(times));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "mode = pttk\nkernel = matern\nsource_box = 0:1^3\ntarget_box = 1:2, 1:2, 1:2\ntheta_box = 0.8:1.7, 0.5:3\neps = 1e-4, 1e-6 # two runs\n";

    #[test]
    fn parses_defaults_and_lists() {
        let c = ExperimentConfig::parse(BASE, None).unwrap();
        assert_eq!(c.mode, Mode::Pttk);
        assert_eq!(c.source_box.len(), 3);
        assert_eq!(c.target_box[2], Interval::new(1.0, 2.0).unwrap());
        assert_eq!(c.eps, vec![1e-4, 1e-6]);
        assert_eq!((c.n_sources, c.n_targets, c.nodes, c.theta_samples), (2000, 2000, 27, 100));
        assert_eq!(c.subsample, Some(500));
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(c.clip);
    }

    #[test]
    fn seed_falls_back_to_environment_value() {
        assert_eq!(ExperimentConfig::parse(BASE, Some(7)).unwrap().seed, 7);
        let text = format!("{BASE}seed = 3\n");
        assert_eq!(ExperimentConfig::parse(&text, Some(7)).unwrap().seed, 3);
    }

    #[test]
    fn overrides_replace_file_entries() {
        let c = ExperimentConfig::parse_with_overrides(BASE, &["n_sources=1e5".into(), "subsample = full".into()], None).unwrap();
        assert_eq!(c.n_sources, 100_000);
        assert_eq!(c.subsample, None);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            format!("{BASE}colour = red\n"),
            format!("{BASE}eps = 1e-3\n"),
            BASE.replace("mode = pttk", "mode = fast"),
            BASE.replace("theta_box = 0.8:1.7, 0.5:3", "theta_box = 0.8:1.7"),
            BASE.replace("mode = pttk", "mode = ttk"),
            BASE.replace("mode = pttk", "mode = global-1"),
            BASE.replace("0:1^3", "1:0^3"),
            format!("{BASE}nodes = 2.5\n"),
            "kernel = matern\n".to_string(),
        ] {
            assert!(matches!(ExperimentConfig::parse(&bad, None), Err(HarnessError::Config(_))), "{bad}");
        }
    }
}
