//! Profile specifications and the layered run configuration.
//!
//! A command's parameters come from three layers: built-in defaults, an
//! optional `--config` JSON file, then explicit flags. The merged object is
//! deserialized into the command's parameter struct and written back, in
//! full, into every output header.

use std::path::Path;

use anyhow::{bail, Context};
use rmotion_core::profile::OccupationProfile;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Half-width of the default domain of the unit profile.
pub const UNIT_HALF_WIDTH: f64 = 8.0;

fn default_half_width() -> f64 {
    UNIT_HALF_WIDTH
}

fn default_per_unit() -> u32 {
    64
}

/// Initial occupation profile `L0` as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `L0 = 1` on `[-half_width, half_width]`.
    Unit {
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
    Constant { c: f64, domain: (f64, f64) },
    /// Piecewise linear through `knots`, held constant outside them.
    Pwl {
        knots: Vec<(f64, f64)>,
        #[serde(default)]
        domain: Option<(f64, f64)>,
    },
    Bump {
        height: f64,
        width: f64,
        #[serde(default = "default_per_unit")]
        per_unit: u32,
        domain: (f64, f64),
    },
    Ramp { a: f64, b: f64, lo: f64, hi: f64, domain: (f64, f64) },
}

impl ProfileSpec {
    pub fn unit() -> Self {
        ProfileSpec::Unit { half_width: UNIT_HALF_WIDTH }
    }

    pub fn build(&self) -> anyhow::Result<OccupationProfile> {
        let p = match self {
            ProfileSpec::Unit { half_width } => OccupationProfile::unit(*half_width),
            ProfileSpec::Constant { c, domain } => OccupationProfile::constant(*c, *domain),
            ProfileSpec::Pwl { knots, domain } => OccupationProfile::piecewise_linear(knots, *domain),
            ProfileSpec::Bump { height, width, per_unit, domain } => {
                OccupationProfile::bump(*height, *width, *per_unit, *domain)
            }
            ProfileSpec::Ramp { a, b, lo, hi, domain } => OccupationProfile::ramp(*a, *b, *lo, *hi, *domain),
        };
        p.context("invalid profile")
    }
}

/// Parse a `--profile` argument: `unit`, an inline JSON object, or the path
/// of a JSON file.
pub fn parse_profile_arg(arg: &str) -> anyhow::Result<Value> {
    let arg = arg.trim();
    if arg == "unit" {
        return Ok(serde_json::to_value(ProfileSpec::unit())?);
    }
    let text = if arg.starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading profile file {arg}"))?
    };
    let v: Value = serde_json::from_str(&text).context("profile is not valid JSON")?;
    // validate now so the message names the profile rather than a later field
    serde_json::from_value::<ProfileSpec>(v.clone()).context("invalid profile spec")?;
    Ok(v)
}

/// Flag values layered over a config file.
#[derive(Debug, Default, Clone)]
pub struct Layers {
    file: Map<String, Value>,
    flags: Map<String, Value>,
}

impl Layers {
    pub fn new(config: Option<&Path>) -> anyhow::Result<Self> {
        let file = match config {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))? {
                    Value::Object(m) => m,
                    _ => bail!("config {} must hold a JSON object", p.display()),
                }
            }
        };
        Ok(Layers { file, flags: Map::new() })
    }

    /// Start from an in-memory object instead of a file.
    pub fn from_value(v: Value) -> anyhow::Result<Self> {
        match v {
            Value::Null => Ok(Layers::default()),
            Value::Object(file) => Ok(Layers { file, flags: Map::new() }),
            _ => bail!("config must be a JSON object"),
        }
    }

    /// Record an explicit flag (skipped when absent).
    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) -> anyhow::Result<&mut Self> {
        if let Some(v) = value {
            self.flags.insert(key.to_string(), serde_json::to_value(v)?);
        }
        Ok(self)
    }

    /// Record an already-encoded flag value.
    pub fn set_value(&mut self, key: &str, value: Option<Value>) -> &mut Self {
        if let Some(v) = value {
            self.flags.insert(key.to_string(), v);
        }
        self
    }

    pub fn merged(&self) -> Value {
        let mut m = self.file.clone();
        for (k, v) in &self.flags {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    /// Deserialize the merged layers. Errors name the offending field.
    pub fn resolve<T: DeserializeOwned>(&self) -> anyhow::Result<T> {
        serde_json::from_value(self.merged()).map_err(|e| anyhow::anyhow!(UsageError(format!("invalid config: {e}"))))
    }
}

/// A configuration problem the user can fix on the command line.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
