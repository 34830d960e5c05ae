//! Line-oriented `key = value` settings with `#` comments.
//!
//! Resolution order: built-in defaults, then the config file, then flags.
//! Only keys present in the defaults are accepted, so typos fail early.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;

use wide2nn::{ActivationKind, InitScheme, LossKind, Mode, StepRule, TrainConfig};

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

pub fn parse_lines(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return config_err(format!("line {}: expected `key = value`, got {line:?}", no + 1));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return config_err(format!("line {}: empty key", no + 1));
        }
        out.push((key, value.trim().to_owned()));
    }
    Ok(out)
}

impl Settings {
    pub fn with_defaults<K: AsRef<str>, V: ToString>(defaults: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            map: defaults
                .into_iter()
                .map(|(k, v)| (k.as_ref().to_owned(), v.to_string()))
                .collect(),
        }
    }

    pub fn apply(&mut self, pairs: Vec<(String, String)>) -> CliResult<()> {
        for (key, value) in pairs {
            match self.map.get_mut(&key) {
                Some(slot) => *slot = value,
                None => return config_err(format!("unknown key {key:?}")),
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply(parse_lines(&text)?)
    }

    /// Overrides from command-line flags; `None` leaves the value alone.
    pub fn apply_flags(&mut self, flags: Vec<(&str, Option<String>)>) -> CliResult<()> {
        let pairs = flags
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_owned(), v)))
            .collect();
        self.apply(pairs)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.map.get(key).map(String::as_str).unwrap_or_else(|| panic!("no default for {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.raw(key);
        raw.parse()
            .or_else(|_| config_err(format!("invalid value {raw:?} for {key}")))
    }

    /// Comma-separated list; an empty value gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>> {
        let raw = self.raw(key);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().or_else(|_| config_err(format!("invalid entry {s:?} in {key}"))))
            .collect()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_owned(), value.to_string());
    }

    /// The resolved settings in config-file syntax, sorted by key.
    pub fn render(&self) -> String {
        self.map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn parse_activation(s: &str) -> CliResult<ActivationKind> {
    match s {
        "relu" => Ok(ActivationKind::Relu),
        "squared-relu" | "srelu" => Ok(ActivationKind::SquaredRelu),
        _ => config_err(format!("unknown activation {s:?} (relu, squared-relu)")),
    }
}

pub fn activation_name(kind: ActivationKind) -> &'static str {
    match kind {
        ActivationKind::Relu => "relu",
        ActivationKind::SquaredRelu => "squared-relu",
    }
}

pub fn parse_mode(s: &str) -> CliResult<Mode> {
    match s {
        "two-layer" => Ok(Mode::TwoLayer),
        "fixed-directions" => Ok(Mode::FixedDirections),
        "output-layer" => Ok(Mode::OutputLayer),
        _ => config_err(format!("unknown mode {s:?} (two-layer, fixed-directions, output-layer)")),
    }
}

pub fn parse_loss(s: &str) -> CliResult<LossKind> {
    match s {
        "exponential" | "exp" => Ok(LossKind::Exponential),
        "logistic" => Ok(LossKind::Logistic),
        _ => config_err(format!("unknown loss {s:?} (exponential, logistic)")),
    }
}

/// `schedule` or a positive constant.
pub fn parse_step_rule(s: &str) -> CliResult<StepRule> {
    if s == "schedule" {
        return Ok(StepRule::PaperSchedule);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(StepRule::Constant(v)),
        _ => config_err(format!("step size must be `schedule` or a positive number, got {s:?}")),
    }
}

/// `default`, `balanced-sphere`, `gaussian:<sigma>`, `uniform-mass` or `zero`.
pub fn parse_init(s: &str, mode: Mode) -> CliResult<InitScheme> {
    let init = match s {
        "default" => return Ok(TrainConfig::new(mode, 1).init),
        "balanced-sphere" => InitScheme::BalancedSphere,
        "uniform-mass" => InitScheme::UniformMass,
        "zero" => InitScheme::Zero,
        _ => match s.strip_prefix("gaussian:").map(str::parse::<f64>) {
            Some(Ok(sigma)) => InitScheme::Gaussian(sigma),
            _ => return config_err(format!("unknown init {s:?}")),
        },
    };
    Ok(init)
}
