//! Suites on the reinforced motion built from the flow.

use rmotion_core::brownian::brownian_path;
use rmotion_core::envdiff::{env_lrm_position, xi_position};
use rmotion_core::flow::{trace_reduced, uniform_grid, FlowOptions};
use rmotion_core::lattice::Vrjp;
use rmotion_core::lrm::{rescale, simulate_lrm, simulate_lrm_until, LrmConfig, LrmPath};
use rmotion_core::profile::OccupationProfile;
use rmotion_core::stats::race_once;
use rmotion_core::RngStream;
use serde::{Deserialize, Serialize};

use super::{compare_arms, par_map, Arm, Rule, Statistic, Suite};

/// Flow settings shared by the reinforced-motion suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowGrid {
    pub du: f64,
    pub span: f64,
    pub points: usize,
    /// Flow-time budget per path.
    pub u_max: f64,
}

impl Default for FlowGrid {
    fn default() -> Self {
        FlowGrid { du: 1e-4, span: 4.0, points: 801, u_max: 100.0 }
    }
}

impl FlowGrid {
    fn config(&self, t_max: f64) -> LrmConfig {
        LrmConfig { du: self.du, t_max, u_max: self.u_max, span: self.span, points: self.points, snapshot_times: Vec::new() }
    }
}

/// `X_t` of a finished path, flagged when the path is unusable at `t`.
fn position(path: &LrmPath, t: f64) -> (f64, bool) {
    if path.boundary_hit || path.final_t() < t {
        return (f64::NAN, true);
    }
    match path.position_at(t) {
        Ok(x) => (x, false),
        Err(_) => (f64::NAN, true),
    }
}

/// Exit side of the LRM from `(x1, x2)` against the race of the drifted
/// driver lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hitting {
    pub x1: f64,
    pub x2: f64,
    pub replicas: u64,
    pub oracle_replicas: u64,
    pub oracle_step: f64,
    /// Symmetric interval `(-symmetric, symmetric)` checked against 1/2.
    pub symmetric: f64,
    pub symmetric_replicas: u64,
    pub half_width: f64,
    pub flow: FlowGrid,
    pub sigmas: f64,
}

impl Default for Hitting {
    fn default() -> Self {
        Hitting {
            x1: -2.0,
            x2: 1.0,
            replicas: 10_000,
            oracle_replicas: 1_000_000,
            oracle_step: 1e-4,
            symmetric: 1.0,
            symmetric_replicas: 10_000,
            half_width: 8.0,
            flow: FlowGrid::default(),
            sigmas: 3.0,
        }
    }
}

/// Fraction of paths leaving `(x1, x2)` at the top, and the number of
/// undecided paths.
fn exit_top(profile: &OccupationProfile, flow: &FlowGrid, x1: f64, x2: f64, n: u64, stream: RngStream) -> anyhow::Result<(u64, u64)> {
    let cfg = flow.config(f64::MAX);
    let outcomes = par_map(n, |k| {
        let path = simulate_lrm_until(profile, 0.0, &cfg, stream.replica(k), |_, x| x <= x1 || x >= x2)?;
        let x = *path.x.last().unwrap();
        Ok(if x >= x2 {
            Some(true)
        } else if x <= x1 {
            Some(false)
        } else {
            None
        })
    })?;
    let top = outcomes.iter().filter(|o| **o == Some(true)).count() as u64;
    let undecided = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    Ok((top, undecided))
}

impl Suite for Hitting {
    const NAME: &'static str = "hitting";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        if !(self.x1 < 0.0 && 0.0 < self.x2 && self.symmetric > 0.0) {
            anyhow::bail!("hitting needs x1 < 0 < x2 and symmetric > 0");
        }
        let profile = OccupationProfile::unit(self.half_width)?;
        let s0 = profile.scale_s0(0.0)?;
        let (y1, y2) = (s0.eval(self.x1)?, s0.eval(self.x2)?);
        let mut stats = Vec::new();

        let oracle = root.named("oracle");
        let hits = par_map(self.oracle_replicas, |k| Ok(race_once(y1, y2, self.oracle_step, &mut oracle.replica(k).rng())))?;
        let po = hits.iter().filter(|h| **h).count() as f64 / self.oracle_replicas as f64;
        let se_o = (po * (1.0 - po) / self.oracle_replicas as f64).sqrt();

        let (top, undecided) = exit_top(&profile, &self.flow, self.x1, self.x2, self.replicas, root.named("lrm"))?;
        let n = (self.replicas - undecided) as f64;
        let pl = top as f64 / n;
        let se_l = (pl * (1.0 - pl) / n).sqrt();
        stats.push(Statistic::info("oracle_p", po));
        stats.push(Statistic::info("oracle_se", se_o));
        stats.push(Statistic::info("lrm_p", pl));
        stats.push(Statistic::info("lrm_se", se_l));
        stats.push(Statistic::info("undecided", undecided as f64));
        let z = (pl - po).abs() / (se_l * se_l + se_o * se_o).sqrt();
        stats.push(Statistic::oracle("lrm_vs_oracle_z", z, Rule::Below(self.sigmas)));

        let a = self.symmetric;
        let (top, undecided) = exit_top(&profile, &self.flow, -a, a, self.symmetric_replicas, root.named("symmetric"))?;
        let n = (self.symmetric_replicas - undecided) as f64;
        let ps = top as f64 / n;
        stats.push(Statistic::info("symmetric_p", ps));
        stats.push(Statistic::oracle("symmetric_z", (ps - 0.5).abs() / (0.25 / n).sqrt(), Rule::Below(self.sigmas)));
        Ok(stats)
    }
}

/// `c^2 X_{c^-3 t}` of the unit-profile motion against the motion built
/// directly with `L0 = c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scaling {
    pub c: f64,
    pub t: f64,
    pub replicas: u64,
    pub half_width: f64,
    pub flow: FlowGrid,
    pub alpha: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Scaling { c: 2.0, t: 1.0, replicas: 10_000, half_width: 8.0, flow: FlowGrid::default(), alpha: 0.01 }
    }
}

impl Suite for Scaling {
    const NAME: &'static str = "scaling";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        let (c, t) = (self.c, self.t);
        let unit = OccupationProfile::unit(self.half_width)?;
        let scaled = OccupationProfile::constant(c, (-c * c * self.half_width, c * c * self.half_width))?;
        let cfg_unit = self.flow.config(t / (c * c * c));
        let cfg_direct = self.flow.config(t);
        let s = root.named("rescaled");
        let a = par_map(self.replicas, |k| {
            let p = simulate_lrm(&unit, 0.0, &cfg_unit, s.replica(k))?;
            Ok(position(&rescale(&p, c)?, t))
        })?;
        let s = root.named("direct");
        let b = par_map(self.replicas, |k| Ok(position(&simulate_lrm(&scaled, 0.0, &cfg_direct, s.replica(k))?, t)))?;
        let mut stats = Vec::new();
        let ks = compare_arms("x_t", &Arm::new(a), &Arm::new(b), &mut stats)?;
        stats.push(Statistic::p_value("x_t.ks_p", ks.p, self.alpha));
        Ok(stats)
    }
}

/// The three constructions of `X_t` compared pairwise, and the reduced
/// process from the flow against its environment representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossConstruction {
    pub t: f64,
    pub n: u32,
    pub m: u32,
    pub replicas: u64,
    pub half_width: f64,
    pub flow: FlowGrid,
    pub xi_u: f64,
    pub xi_replicas: u64,
    pub band: f64,
}

impl Default for CrossConstruction {
    fn default() -> Self {
        CrossConstruction {
            t: 1.0,
            n: 8,
            m: 8,
            replicas: 10_000,
            half_width: 8.0,
            flow: FlowGrid::default(),
            xi_u: 0.5,
            xi_replicas: 10_000,
            band: 0.05,
        }
    }
}

impl Suite for CrossConstruction {
    const NAME: &'static str = "cross-construction";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        let profile = OccupationProfile::unit(self.half_width)?;
        let lp = profile.lattice_restrict(self.n)?;
        let t = self.t;
        let s = root.named("vrjp");
        let vrjp = Arm::new(par_map(self.replicas, |k| {
            let mut w = Vrjp::new(&lp)?;
            w.advance(t, &mut s.replica(k).rng(), |_, _| {});
            Ok((w.position(), w.absorbed()))
        })?);
        let cfg = self.flow.config(t);
        let s = root.named("lrm");
        let lrm = Arm::new(par_map(self.replicas, |k| Ok(position(&simulate_lrm(&profile, 0.0, &cfg, s.replica(k))?, t)))?);
        let s = root.named("envdiff");
        let env = Arm::new(par_map(self.replicas, |k| Ok(env_lrm_position(&profile, self.m, t, s.replica(k), None)?))?);

        let mut stats = Vec::new();
        for (label, a, b) in [("vrjp_vs_lrm", &vrjp, &lrm), ("vrjp_vs_envdiff", &vrjp, &env), ("lrm_vs_envdiff", &lrm, &env)] {
            let ks = compare_arms(label, a, b, &mut stats)?;
            stats.push(Statistic::band(format!("{label}.band_d"), ks.d, self.band));
        }

        let ys = uniform_grid(self.flow.span, self.flow.points)?;
        let opts = FlowOptions { widen: Some(ys[1] - ys[0]), record_events: false };
        let s = root.named("xi-flow");
        let steps = (self.xi_u / self.flow.du).round() as usize;
        let flow_xi = Arm::new(par_map(self.xi_replicas, |k| {
            let d = brownian_path(self.flow.du, steps as f64 * self.flow.du, s.replica(k))?;
            let tr = trace_reduced(&d, &ys, steps, opts)?;
            Ok((*tr.xi.last().unwrap(), false))
        })?);
        let s = root.named("xi-env");
        let env_xi = Arm::new(par_map(self.xi_replicas, |k| Ok(xi_position(&profile, self.m, self.xi_u, s.replica(k))?))?);
        let ks = compare_arms("xi", &flow_xi, &env_xi, &mut stats)?;
        stats.push(Statistic::band("xi.band_d", ks.d, self.band));
        Ok(stats)
    }
}
