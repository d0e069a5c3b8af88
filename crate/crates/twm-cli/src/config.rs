//! Flat key-value run configuration with flag overrides.
//!
//! A config file holds one `key = value` pair per line, where a value is a
//! number, a `start:stop:count` range, `auto` (derive from the other
//! parameters), or `max` (the largest coherence allowed by the population,
//! only for `Q0sq`). Command-line `--set`/`--grid` assignments win over the
//! file; file entries win over the built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Fixed(f64),
    Range {
        start: f64,
        stop: f64,
        count: usize,
    },
    /// Derived from other parameters (w -> null-shift strength, tau -> one
    /// decay time, J -> 2 omega gamma, w1/w2 -> 2-D operational search).
    Auto,
    /// Population-limited maximal coherence; valid for Q0sq only.
    Max,
}

/// Keys the tool understands, with their defaults.
const KNOWN: &[(&str, Param)] = &[
    ("P0", Param::Fixed(0.9)),
    ("Q0sq", Param::Fixed(0.0)),
    ("m", Param::Fixed(0.4)),
    ("w", Param::Auto),
    ("tau", Param::Auto),
    ("f", Param::Fixed(0.3)),
    ("gamma", Param::Fixed(1e-2)),
    ("omega", Param::Fixed(1.0)),
    ("q", Param::Fixed(0.1)),
    ("m1", Param::Fixed(0.5)),
    ("m2", Param::Fixed(0.6)),
    ("w1", Param::Auto),
    ("w2", Param::Auto),
    ("J", Param::Auto),
    ("grid_res", Param::Fixed(64.0)),
    ("points", Param::Fixed(201.0)),
    ("tol", Param::Fixed(1e-9)),
    ("workers", Param::Fixed(0.0)),
];

/// Grid-axis order for sweeps: left varies slowest. The reversal strengths
/// sit innermost so consecutive rows share the expensive dissipation stage.
pub const AXIS_ORDER: &[&str] = &[
    "f", "gamma", "omega", "tau", "P0", "Q0sq", "q", "m", "m1", "m2", "w", "w1", "w2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, Param>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KNOWN.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.merge_text(&text)?;
        Ok(cfg)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value", lineno + 1));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN.iter().any(|(k, _)| *k == key) {
            return err(format!("unknown parameter `{key}`"));
        }
        let param = parse_value(value)
            .ok_or_else(|| ConfigError(format!("cannot parse `{value}` for `{key}`")))?;
        if matches!(param, Param::Max) && key != "Q0sq" {
            return err(format!("`max` is only meaningful for Q0sq, not `{key}`"));
        }
        self.values.insert(key.to_string(), param);
        Ok(())
    }

    pub fn set_grid(&mut self, key: &str, spec: &str) -> Result<(), ConfigError> {
        let range = parse_range(spec)
            .ok_or_else(|| ConfigError(format!("cannot parse grid `{spec}` for `{key}`")))?;
        if !KNOWN.iter().any(|(k, _)| *k == key) {
            return err(format!("unknown parameter `{key}`"));
        }
        self.values.insert(key.to_string(), range);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Param {
        *self
            .values
            .get(key)
            .unwrap_or_else(|| panic!("unknown config key {key}"))
    }

    /// A parameter that must be a single number here.
    pub fn fixed(&self, key: &str) -> Result<f64, ConfigError> {
        match self.get(key) {
            Param::Fixed(v) => Ok(v),
            Param::Range { .. } => err(format!("`{key}` must be a single value here, not a range")),
            Param::Auto => err(format!("`{key}` = auto is not allowed here")),
            Param::Max => err(format!("`{key}` = max is not allowed here")),
        }
    }

    pub fn usize_value(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.fixed(key)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return err(format!("`{key}` must be a non-negative integer, got {v}"));
        }
        Ok(v as usize)
    }

    /// Dissipation time; `auto` resolves to one decay time 1/gamma.
    pub fn tau(&self) -> Result<f64, ConfigError> {
        match self.get("tau") {
            Param::Auto => Ok(1.0 / self.fixed("gamma")?),
            _ => self.fixed("tau"),
        }
    }

    /// Exchange coupling; `auto` resolves to 2 omega gamma.
    pub fn coupling(&self) -> Result<f64, ConfigError> {
        match self.get("J") {
            Param::Auto => Ok(2.0 * self.fixed("omega")? * self.fixed("gamma")?),
            _ => self.fixed("J"),
        }
    }

    /// The ranged axes in sweep order.
    pub fn ranged_axes(&self) -> Vec<(String, f64, f64, usize)> {
        AXIS_ORDER
            .iter()
            .filter_map(|&k| match self.get(k) {
                Param::Range { start, stop, count } => Some((k.to_string(), start, stop, count)),
                _ => None,
            })
            .collect()
    }

    /// Serialize so that parsing the output reproduces `self` exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.values {
            let rendered = match value {
                Param::Fixed(v) => format_float(*v),
                Param::Range { start, stop, count } => {
                    format!("{}:{}:{}", format_float(*start), format_float(*stop), count)
                }
                Param::Auto => "auto".to_string(),
                Param::Max => "max".to_string(),
            };
            writeln!(out, "{key} = {rendered}").unwrap();
        }
        out
    }
}

fn parse_value(value: &str) -> Option<Param> {
    match value {
        "auto" => Some(Param::Auto),
        "max" => Some(Param::Max),
        _ => {
            if value.contains(':') {
                parse_range(value)
            } else {
                value.parse::<f64>().ok().map(Param::Fixed)
            }
        }
    }
}

fn parse_range(spec: &str) -> Option<Param> {
    let mut parts = spec.split(':');
    let start = parts.next()?.trim().parse::<f64>().ok()?;
    let stop = parts.next()?.trim().parse::<f64>().ok()?;
    let count = parts.next()?.trim().parse::<usize>().ok()?;
    if parts.next().is_some() || count == 0 || !start.is_finite() || !stop.is_finite() {
        return None;
    }
    Some(Param::Range { start, stop, count })
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// The `i`-th grid value of a `start:stop:count` axis.
pub fn grid_value(start: f64, stop: f64, count: usize, i: usize) -> f64 {
    if count == 1 {
        start
    } else {
        start + (stop - start) * i as f64 / (count - 1) as f64
    }
}
