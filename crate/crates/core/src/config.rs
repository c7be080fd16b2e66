//! Experiment descriptions: strict JSON run configs and β lists.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::model::Configuration;
use crate::scheduler::SchedulerKind;

/// How the chain starts. A random start shuffles `red_count` red cells
/// using the run seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Random,
    /// Row-major `+`/`-` string.
    Explicit { colors: String },
}

impl InitialConfig {
    pub fn colors(&self) -> Option<&str> {
        match self {
            InitialConfig::Random => None,
            InitialConfig::Explicit { colors } => Some(colors),
        }
    }
}

/// A list of β values. Deserializes from an array or from the string
/// `"geometric(start, stop, count)"`; always serializes as the array.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaList(pub Vec<f64>);

impl BetaList {
    /// `count` values from `start` to `stop` with a constant ratio.
    pub fn geometric(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start > 0.0 && stop > 0.0 && start.is_finite() && stop.is_finite()) || count == 0 {
            return Err(Error::InvalidParams(format!(
                "geometric({start}, {stop}, {count}) needs positive finite bounds and count >= 1"
            )));
        }
        if count == 1 {
            return Ok(Self(vec![start]));
        }
        let ratio = (stop / start).ln() / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| start * (ratio * i as f64).exp()).collect();
        v[count - 1] = stop;
        Ok(Self(v))
    }

    /// Parses `"geometric(a, b, k)"` or a comma separated list such as `"1,2,4"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParams(format!("cannot parse beta list {s:?}"));
        if let Some(args) = s.strip_prefix("geometric(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            let [a, b, k] = parts[..] else { return Err(bad()) };
            return Self::geometric(
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
                k.parse().map_err(|_| bad())?,
            );
        }
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Serialize for BetaList {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BetaList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<f64>),
            Expr(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Self(v)),
            Raw::Expr(s) => Self::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for BetaList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

fn default_scheduler() -> SchedulerKind {
    SchedulerKind::Contagion { self_weight: None }
}

fn one() -> u64 {
    1
}

/// A reproducible experiment. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub red_count: usize,
    #[serde(default)]
    pub params: crate::model::ModelParams,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    /// Keep every k-th trace record; 0 keeps none.
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<BetaList>,
}

impl RunConfig {
    /// Defaults everywhere: `r = β = 1`, zero offsets, contagion scheduling
    /// with a uniform row, random start, seed 0, no steps.
    pub fn minimal(n: usize, red_count: usize) -> Self {
        Self {
            n,
            red_count,
            params: Default::default(),
            scheduler: default_scheduler(),
            initial: InitialConfig::Random,
            steps: 0,
            seed: 0,
            record_every: 1,
            betas: None,
        }
    }

    /// Every problem with the config, or `Ok` if there is none.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let grid = match TorusGrid::new(self.n) {
            Ok(g) => Some(g),
            Err(e) => {
                out.push(format!("n: {e}"));
                None
            }
        };
        let cells = self.n * self.n;
        if self.red_count > cells {
            out.push(format!("red_count: {} exceeds n² = {cells}", self.red_count));
        }
        if let Some(g) = &grid {
            if let Err(e) = self.params.validate(g) {
                out.push(format!("params: {e}"));
            }
        }
        match &self.scheduler {
            SchedulerKind::Contagion { self_weight: Some(w) } if !(*w > 0.0 && *w < 1.0) => {
                out.push(format!("scheduler.self_weight: must lie in (0, 1), got {w}"));
            }
            SchedulerKind::Custom { file } if !file.is_file() => {
                out.push(format!("scheduler.file: {} does not exist", file.display()));
            }
            _ => {}
        }
        if let Some(s) = self.initial.colors() {
            match Configuration::parse(s) {
                Ok(c) => {
                    if c.len() != cells {
                        out.push(format!("initial.colors: {} cells, expected {cells}", c.len()));
                    } else if c.red_count() != self.red_count {
                        out.push(format!(
                            "initial.colors: {} red cells but red_count is {}",
                            c.red_count(),
                            self.red_count
                        ));
                    }
                }
                Err(e) => out.push(format!("initial.colors: {e}")),
            }
        }
        if let Some(b) = &self.betas {
            if b.0.is_empty() {
                out.push("betas: empty list".into());
            }
            if let Some(x) = b.0.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                out.push(format!("betas: {x} is not positive and finite"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidRunConfig(v))
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.n)
    }

    /// The configured β list, or the single `params.beta`.
    pub fn beta_values(&self) -> Vec<f64> {
        match &self.betas {
            Some(b) => b.0.clone(),
            None => vec![self.params.beta],
        }
    }
}

/// Parses a run config from JSON text. Relative custom scheduler paths are
/// resolved against `base`.
pub fn parse_run_config(text: &str, origin: &Path, base: Option<&Path>) -> Result<RunConfig> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if let (SchedulerKind::Custom { file }, Some(base)) = (&mut cfg.scheduler, base) {
        if file.is_relative() {
            *file = base.join(&*file);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and fully validates a run config file.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_config(&text, path, path.parent())
}
