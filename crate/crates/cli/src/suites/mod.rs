//! Verification suites.
//!
//! Each suite has a parameter struct whose defaults are the acceptance
//! settings; any field can be overridden from a JSON config. `replicas` is
//! always the suite's main sample count. Replicas draw from addressable
//! streams and fan out over rayon; results are collected in replica order,
//! so a report does not depend on the thread count.

mod envdiff;
mod flow;
mod lattice;
mod lrm;
mod sampler;

use std::time::Instant;

use rayon::prelude::*;
use rmotion_core::stats::{ks_two_sample, KsResult};
use rmotion_core::RngStream;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Layers, UsageError};

pub use envdiff::OccupationRatio;
pub use flow::{FlowOracles, LocaltimeIdentity, QuadraticVariation};
pub use lattice::{Growth, Martingale, MixtureErrw, MixtureVrjp};
pub use lrm::{CrossConstruction, Hitting, Scaling};
pub use sampler::SamplerMoments;

/// Every suite name accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "mixture-vrjp",
    "mixture-errw",
    "martingale",
    "flow-oracles",
    "localtime-identity",
    "qv",
    "sampler-moments",
    "hitting",
    "scaling",
    "cross-construction",
    "occupation-ratio",
    "growth",
];

/// How a statistic was judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Non-rejection of an identity in law that holds at fixed mesh.
    Exact,
    /// Distance band for a mesh-limited (asymptotic) comparison.
    Band,
    /// Deterministic or moment check against a known value.
    Oracle,
    /// Reported only; never affects the verdict.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "threshold")]
pub enum Rule {
    /// `value > threshold` (p-values).
    Above(f64),
    Below(f64),
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
    Report,
}

impl Rule {
    fn holds(&self, v: f64) -> bool {
        match *self {
            Rule::Above(t) => v > t,
            Rule::Below(t) => v < t,
            Rule::AtMost(t) => v <= t,
            Rule::AtLeast(t) => v >= t,
            Rule::Within(a, b) => v >= a && v <= b,
            Rule::Report => true,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Rule::Above(t) => format!("> {t}"),
            Rule::Below(t) => format!("< {t}"),
            Rule::AtMost(t) => format!("<= {t}"),
            Rule::AtLeast(t) => format!(">= {t}"),
            Rule::Within(a, b) => format!("in [{a}, {b}]"),
            Rule::Report => "reported".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    #[serde(flatten)]
    pub rule: Rule,
    pub regime: Regime,
    pub pass: bool,
}

impl Statistic {
    pub fn new(name: impl Into<String>, value: f64, rule: Rule, regime: Regime) -> Self {
        let pass = rule.holds(value);
        Statistic { name: name.into(), value, rule, regime, pass }
    }

    /// Non-rejection of an exact identity at level `alpha`.
    pub fn p_value(name: impl Into<String>, p: f64, alpha: f64) -> Self {
        Self::new(name, p, Rule::Above(alpha), Regime::Exact)
    }

    pub fn band(name: impl Into<String>, d: f64, width: f64) -> Self {
        Self::new(name, d, Rule::Below(width), Regime::Band)
    }

    pub fn oracle(name: impl Into<String>, value: f64, rule: Rule) -> Self {
        Self::new(name, value, rule, Regime::Oracle)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, Rule::Report, Regime::Diagnostic)
    }

    /// Judged against `rule`, but excluded from the verdict.
    pub fn diagnostic(name: impl Into<String>, value: f64, rule: Rule) -> Self {
        Self::new(name, value, rule, Regime::Diagnostic)
    }

    pub fn gating(&self) -> bool {
        self.regime != Regime::Diagnostic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub suite: String,
    pub params: Value,
    pub statistics: Vec<Statistic>,
    pub seeds: Vec<u64>,
    pub runtime_s: f64,
    pub pass: bool,
}

impl TestReport {
    /// Statistics that decide the verdict.
    pub fn gating(&self) -> impl Iterator<Item = &Statistic> {
        self.statistics.iter().filter(|s| s.gating())
    }

    pub fn get(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    /// Human-readable lines, one per statistic.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {} ({:.1} s)\n", self.suite, if self.pass { "PASS" } else { "FAIL" }, self.runtime_s);
        for s in &self.statistics {
            let mark = match (s.gating(), s.pass) {
                (false, _) => "info",
                (true, true) => "ok",
                (true, false) => "FAIL",
            };
            out += &format!("  [{mark:>4}] {} = {} ({}, {:?})\n", s.name, short(s.value), s.rule.describe(), s.regime);
        }
        out
    }
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.4e}")
    } else {
        format!("{v:.6}")
    }
}

pub(crate) trait Suite: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>>;
}

fn go<S: Suite>(config: Value, seed: u64) -> anyhow::Result<TestReport> {
    let params: S = Layers::from_value(config)?.resolve()?;
    let start = Instant::now();
    let statistics = params.run(RngStream::new(seed, 0).named(S::NAME))?;
    let pass = statistics.iter().filter(|s| s.gating()).all(|s| s.pass);
    Ok(TestReport {
        suite: S::NAME.to_string(),
        params: serde_json::to_value(&params)?,
        statistics,
        seeds: vec![seed],
        runtime_s: start.elapsed().as_secs_f64(),
        pass,
    })
}

/// Run suite `name` with `config` (a JSON object of overrides, or null).
pub fn run_suite(name: &str, config: Value, seed: u64) -> anyhow::Result<TestReport> {
    match name {
        "mixture-vrjp" => go::<MixtureVrjp>(config, seed),
        "mixture-errw" => go::<MixtureErrw>(config, seed),
        "martingale" => go::<Martingale>(config, seed),
        "flow-oracles" => go::<FlowOracles>(config, seed),
        "localtime-identity" => go::<LocaltimeIdentity>(config, seed),
        "qv" => go::<QuadraticVariation>(config, seed),
        "sampler-moments" => go::<SamplerMoments>(config, seed),
        "hitting" => go::<Hitting>(config, seed),
        "scaling" => go::<Scaling>(config, seed),
        "cross-construction" => go::<CrossConstruction>(config, seed),
        "occupation-ratio" => go::<OccupationRatio>(config, seed),
        "growth" => go::<Growth>(config, seed),
        _ => Err(UsageError(format!("unknown suite '{name}' (expected one of: {})", SUITES.join(", "))).into()),
    }
}

/// Default parameters of a suite, as JSON.
pub fn default_params(name: &str) -> anyhow::Result<Value> {
    fn d<S: Suite>() -> anyhow::Result<Value> {
        Ok(serde_json::to_value(S::default())?)
    }
    match name {
        "mixture-vrjp" => d::<MixtureVrjp>(),
        "mixture-errw" => d::<MixtureErrw>(),
        "martingale" => d::<Martingale>(),
        "flow-oracles" => d::<FlowOracles>(),
        "localtime-identity" => d::<LocaltimeIdentity>(),
        "qv" => d::<QuadraticVariation>(),
        "sampler-moments" => d::<SamplerMoments>(),
        "hitting" => d::<Hitting>(),
        "scaling" => d::<Scaling>(),
        "cross-construction" => d::<CrossConstruction>(),
        "occupation-ratio" => d::<OccupationRatio>(),
        "growth" => d::<Growth>(),
        _ => Err(UsageError(format!("unknown suite '{name}'")).into()),
    }
}

/// Map replicas `0..n` in parallel, keeping replica order.
pub(crate) fn par_map<T, F>(n: u64, f: F) -> anyhow::Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> anyhow::Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Samples of one arm after dropping boundary-flagged replicas.
#[derive(Debug, Clone, Default)]
pub(crate) struct Arm {
    pub kept: Vec<f64>,
    pub dropped: u64,
}

impl Arm {
    pub fn new(samples: impl IntoIterator<Item = (f64, bool)>) -> Self {
        let mut arm = Arm::default();
        for (x, flagged) in samples {
            if flagged {
                arm.dropped += 1;
            } else {
                arm.kept.push(x);
            }
        }
        arm
    }
}

/// KS comparison of two arms, with the drop counts as diagnostics.
pub(crate) fn compare_arms(label: &str, a: &Arm, b: &Arm, stats: &mut Vec<Statistic>) -> anyhow::Result<KsResult> {
    let r = ks_two_sample(&a.kept, &b.kept)?;
    stats.push(Statistic::info(format!("{label}.ks_d"), r.d));
    stats.push(Statistic::info(format!("{label}.dropped_a"), a.dropped as f64));
    stats.push(Statistic::info(format!("{label}.dropped_b"), b.dropped as f64));
    Ok(r)
}
