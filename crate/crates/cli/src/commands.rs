//! Command implementations. Every command takes its resolved parameters,
//! writes CSVs under an output directory and returns the written paths.
//!
//! Column schemas (each file starts with a `# {json}` header holding the
//! command, the full parameter set and the profile fingerprint):
//!
//! - `trajectory.csv`: one row per jump, plus the start row at time 0.
//! - `local_times.csv`: per-site values at the horizon.
//! - `summary.csv`: one row per replica.
//! - `environment.csv`: environment values per site or grid point.
//! - `checkpoints.csv`, `reduced.csv`, `events.csv`: flow output.
//! - `path.csv`, `snapshots.csv`: reinforced-motion output.

use std::path::{Path, PathBuf};

use rmotion_core::envdiff::{simulate_env_diffusion, time_change_to_lrm};
use rmotion_core::environment::{default_dy, sample_continuous_env, sample_discrete_env, sample_gamma_env};
use rmotion_core::flow::{uniform_grid, FlowIntegrator, FlowOptions};
use rmotion_core::brownian::brownian_path;
use rmotion_core::lattice::{simulate_vrjp, Errw};
use rmotion_core::lrm::{rescale, simulate_lrm, transform_profile, LrmConfig, LrmPath};
use rmotion_core::profile::OccupationProfile;
use rmotion_core::RngStream;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ProfileSpec;
use crate::output::{Cell, CsvWriter};
use crate::suites::par_map;

fn default_seed() -> u64 {
    1
}
fn one() -> u64 {
    1
}

fn header(command: &str, params: &impl Serialize, profile: Option<&OccupationProfile>) -> anyhow::Result<Value> {
    let mut h = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(params)?,
    });
    if let Some(p) = profile {
        h["profile_fingerprint"] = json!(format!("{:016x}", p.fingerprint()));
    }
    Ok(h)
}

fn root(command: &str, seed: u64) -> RngStream {
    RngStream::new(seed, 0).named(command)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateVrjp {
    pub profile: ProfileSpec,
    #[serde(default = "vrjp_n")]
    pub n: u32,
    #[serde(default = "eight")]
    pub t_max: f64,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn vrjp_n() -> u32 {
    8
}
fn eight() -> f64 {
    8.0
}

pub fn simulate_vrjp_cmd(p: &SimulateVrjp, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let profile = p.profile.build()?;
    let h = header("simulate vrjp", p, Some(&profile))?;
    let r = root("simulate-vrjp", p.seed);
    let runs = par_map(p.replicas, |k| Ok(simulate_vrjp(&profile, p.n, p.t_max, r.replica(k))?))?;
    let mut traj = CsvWriter::create(&out.join("trajectory.csv"), &h, &["replica", "t", "site", "x"])?;
    let mut lt = CsvWriter::create(&out.join("local_times.csv"), &h, &["replica", "site", "x", "l0", "ell", "l"])?;
    let mut sum = CsvWriter::create(&out.join("summary.csv"), &h, &["replica", "horizon", "jumps", "final_x", "boundary_hit"])?;
    for (k, (tr, field)) in runs.iter().enumerate() {
        let dx = tr.spacing();
        traj.row(&[k.into(), 0.0.into(), tr.start_site.into(), (tr.start_site as f64 * dx).into()])?;
        for (&t, &s) in tr.jump_times.iter().zip(&tr.sites) {
            traj.row(&[k.into(), t.into(), s.into(), (s as f64 * dx).into()])?;
        }
        for (j, (&l0, &e)) in field.base.iter().zip(&field.ell).enumerate() {
            let s = field.lo + j as i64;
            lt.row(&[k.into(), s.into(), (s as f64 * dx).into(), l0.into(), e.into(), (l0 + e).into()])?;
        }
        let last = tr.final_site() as f64 * dx;
        sum.row(&[k.into(), tr.horizon.into(), tr.jump_times.len().into(), last.into(), (tr.boundary_hit as u64).into()])?;
    }
    Ok(vec![traj.finish()?.0, lt.finish()?.0, sum.finish()?.0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateErrw {
    pub profile: ProfileSpec,
    #[serde(default = "errw_n")]
    pub n: u32,
    #[serde(default = "errw_steps")]
    pub steps: u64,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn errw_n() -> u32 {
    4
}
fn errw_steps() -> u64 {
    256
}

pub fn simulate_errw_cmd(p: &SimulateErrw, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let profile = p.profile.build()?;
    let lp = profile.lattice_restrict(p.n)?;
    let h = header("simulate errw", p, Some(&profile))?;
    let r = root("simulate-errw", p.seed);
    let runs = par_map(p.replicas, |k| {
        let mut w = Errw::new(&lp)?;
        let mut rng = r.replica(k).rng();
        let mut sites = vec![w.site()];
        while w.steps() < p.steps {
            match w.step(&mut rng) {
                Some(s) => sites.push(s),
                None => break,
            }
        }
        let weights: Vec<f64> = (lp.lo + 1..=lp.hi()).map(|i| w.weight(i)).collect();
        Ok((sites, weights, w.absorbed()))
    })?;
    let dx = lp.spacing();
    let mut traj = CsvWriter::create(&out.join("trajectory.csv"), &h, &["replica", "step", "site", "x"])?;
    let mut wt = CsvWriter::create(&out.join("weights.csv"), &h, &["replica", "x_left", "x_right", "weight"])?;
    let mut sum = CsvWriter::create(&out.join("summary.csv"), &h, &["replica", "steps", "final_x", "boundary_hit"])?;
    for (k, (sites, weights, hit)) in runs.iter().enumerate() {
        for (j, &s) in sites.iter().enumerate() {
            traj.row(&[k.into(), j.into(), s.into(), (s as f64 * dx).into()])?;
        }
        for (j, &w) in weights.iter().enumerate() {
            let right = lp.lo + 1 + j as i64;
            wt.row(&[k.into(), ((right - 1) as f64 * dx).into(), (right as f64 * dx).into(), w.into()])?;
        }
        let last = *sites.last().unwrap() as f64 * dx;
        sum.row(&[k.into(), (sites.len() - 1).into(), last.into(), (*hit as u64).into()])?;
    }
    Ok(vec![traj.finish()?.0, wt.finish()?.0, sum.finish()?.0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateEnvdiff {
    pub profile: ProfileSpec,
    #[serde(default = "vrjp_n")]
    pub m: u32,
    #[serde(default = "unit_f")]
    pub q_max: f64,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn unit_f() -> f64 {
    1.0
}

pub fn simulate_envdiff_cmd(p: &SimulateEnvdiff, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let profile = p.profile.build()?;
    let h = header("simulate envdiff", p, Some(&profile))?;
    let r = root("simulate-envdiff", p.seed);
    let runs = par_map(p.replicas, |k| {
        let run = simulate_env_diffusion(&profile, p.m, p.q_max, r.replica(k), None)?;
        let (tt, tf) = time_change_to_lrm(&run, &profile)?;
        Ok((run, tt, tf))
    })?;
    let cols = ["replica", "q", "t", "site", "x"];
    let mut traj = CsvWriter::create(&out.join("trajectory.csv"), &h, &cols)?;
    let mut lt = CsvWriter::create(&out.join("local_times.csv"), &h, &["replica", "site", "x", "env_u", "lambda", "l_star"])?;
    let mut sum = CsvWriter::create(&out.join("summary.csv"), &h, &["replica", "q", "t", "final_x", "boundary_hit", "env_fingerprint"])?;
    for (k, (run, tt, tf)) in runs.iter().enumerate() {
        let dx = run.traj.spacing();
        let s0 = run.traj.start_site;
        traj.row(&[k.into(), 0.0.into(), 0.0.into(), s0.into(), (s0 as f64 * dx).into()])?;
        for ((&q, &t), &s) in run.traj.jump_times.iter().zip(&tt.jump_times).zip(&run.traj.sites) {
            traj.row(&[k.into(), q.into(), t.into(), s.into(), (s as f64 * dx).into()])?;
        }
        let env = &run.lattice_env;
        for (j, &lam) in run.local_times.ell.iter().enumerate() {
            let s = run.local_times.lo + j as i64;
            let l_star = tf.base[j] + tf.ell[j];
            lt.row(&[k.into(), s.into(), (s as f64 * dx).into(), env.at(s).into(), lam.into(), l_star.into()])?;
        }
        let fp = format!("{:016x}", run.env_fingerprint());
        let last = run.traj.final_site() as f64 * dx;
        sum.row(&[k.into(), run.traj.horizon.into(), tt.horizon.into(), last.into(), (run.traj.boundary_hit as u64).into(), fp.as_str().into()])?;
    }
    Ok(vec![traj.finish()?.0, lt.finish()?.0, sum.finish()?.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    /// sinh increments on `2^-n Z` (VRJP mixture).
    Discrete,
    /// Brownian environment on the `S0` image grid.
    Continuous,
    /// Gamma edge weights with sinh increments (ERRW mixture).
    Gamma,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSample {
    pub profile: ProfileSpec,
    #[serde(default = "env_kind")]
    pub kind: EnvKind,
    #[serde(default = "vrjp_n")]
    pub n: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn env_kind() -> EnvKind {
    EnvKind::Discrete
}

pub fn env_sample_cmd(p: &EnvSample, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let profile = p.profile.build()?;
    let h = header("env sample", p, Some(&profile))?;
    let s = root("env-sample", p.seed);
    let path = out.join("environment.csv");
    let dx = (-(p.n as f64)).exp2();
    let w = match p.kind {
        EnvKind::Discrete => {
            let env = sample_discrete_env(&profile, p.n, s)?;
            let mut w = CsvWriter::create(&path, &h, &["site", "x", "u"])?;
            for i in env.lo..=env.hi() {
                w.row(&[i.into(), (i as f64 * dx).into(), env.at(i).into()])?;
            }
            w
        }
        EnvKind::Continuous => {
            let env = sample_continuous_env(&profile, default_dy(&profile, p.n), s)?;
            let mut w = CsvWriter::create(&path, &h, &["k", "y", "w", "u"])?;
            for k in env.k_lo..=env.k_hi() {
                let y = k as f64 * env.dy;
                w.row(&[k.into(), y.into(), env.w[(k - env.k_lo) as usize].into(), env.u_grid(k).into()])?;
            }
            w
        }
        EnvKind::Gamma => {
            let env = sample_gamma_env(&profile, p.n, s)?;
            let mut w = CsvWriter::create(&path, &h, &["site", "x", "u_hat", "gamma_left_edge"])?;
            for (j, (&u, &g)) in env.uhat.iter().zip(&env.gamma).enumerate() {
                let i = env.lo + j as i64;
                w.row(&[i.into(), (i as f64 * dx).into(), u.into(), g.into()])?;
            }
            w
        }
    };
    Ok(vec![w.finish()?.0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRunParams {
    #[serde(default = "du")]
    pub du: f64,
    #[serde(default = "unit_f")]
    pub u_max: f64,
    #[serde(default = "span")]
    pub span: f64,
    #[serde(default = "points")]
    pub points: usize,
    /// Checkpoint every `stride` driver steps.
    #[serde(default = "stride")]
    pub stride: usize,
    #[serde(default = "yes")]
    pub widen: bool,
    #[serde(default = "yes")]
    pub events: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn du() -> f64 {
    1e-4
}
fn span() -> f64 {
    4.0
}
fn points() -> usize {
    201
}
fn stride() -> usize {
    100
}
fn yes() -> bool {
    true
}

pub fn flow_run_cmd(p: &FlowRunParams, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if p.stride == 0 {
        anyhow::bail!(crate::config::UsageError("stride must be positive".into()));
    }
    let h = header("flow run", p, None)?;
    let ys = uniform_grid(p.span, p.points)?;
    let opts = FlowOptions { widen: p.widen.then(|| ys[1] - ys[0]), record_events: p.events };
    let driver = brownian_path(p.du, p.u_max, root("flow-run", p.seed).named("driver"))?;
    let mut f = FlowIntegrator::new(&driver, &ys, opts)?;
    let mut cp = CsvWriter::create(&out.join("checkpoints.csv"), &h, &["u", "label", "psi", "mode", "lcal", "lambda"])?;
    let mut red = CsvWriter::create(&out.join("reduced.csv"), &h, &["u", "b", "xi", "lambda_xi"])?;
    let mut ev = CsvWriter::create(&out.join("events.csv"), &h, &["u", "label", "kind"])?;
    loop {
        let u = f.u();
        let (lcal, lam) = f.local_times();
        for i in 0..f.len() {
            let mode = match f.mode(i) {
                rmotion_core::flow::Mode::Below => "below",
                rmotion_core::flow::Mode::Sliding => "sliding",
                rmotion_core::flow::Mode::Above => "above",
            };
            cp.row(&[u.into(), f.labels()[i].into(), f.position(i).into(), mode.into(), lcal[i].into(), lam[i].into()])?;
        }
        let (xi, lx) = f.xi_lambda()?;
        red.row(&[u.into(), f.b().into(), xi.into(), lx.into()])?;
        for e in f.take_events() {
            ev.row(&[e.u.into(), e.y.into(), e.kind.as_str().into()])?;
        }
        if f.done() {
            break;
        }
        f.run_to(f.step_index() + p.stride);
    }
    Ok(vec![cp.finish()?.0, red.finish()?.0, ev.finish()?.0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrmParams {
    pub profile: ProfileSpec,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "du")]
    pub du: f64,
    #[serde(default = "eight")]
    pub t_max: f64,
    #[serde(default = "u_budget")]
    pub u_max: f64,
    #[serde(default = "span")]
    pub span: f64,
    #[serde(default = "points")]
    pub points: usize,
    /// Times at which the whole profile `L_t` is written.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Write every `stride`-th sample of the path (the last is always
    /// written).
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// `lrm rescale`: the factor `c`.
    #[serde(default)]
    pub c: Option<f64>,
}

fn u_budget() -> f64 {
    1000.0
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrmMode {
    Build,
    /// Build, then map through `(c^2 X_{c^-3 t})`.
    Rescale,
    /// Build the unit-profile motion from 0, then transfer it to the
    /// requested profile and start point.
    Transfer,
}

pub fn lrm_cmd(mode: LrmMode, p: &LrmParams, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    use crate::config::UsageError;
    if p.stride == 0 {
        anyhow::bail!(UsageError("stride must be positive".into()));
    }
    let name = match mode {
        LrmMode::Build => "lrm build",
        LrmMode::Rescale => "lrm rescale",
        LrmMode::Transfer => "lrm transfer",
    };
    let c = match (mode, p.c) {
        (LrmMode::Rescale, None) => anyhow::bail!(UsageError("lrm rescale needs c".into())),
        (LrmMode::Rescale, Some(c)) => c,
        (_, Some(_)) => anyhow::bail!(UsageError("c is only used by lrm rescale".into())),
        _ => 1.0,
    };
    let profile = p.profile.build()?;
    let h = header(name, p, Some(&profile))?;
    let cfg = LrmConfig { du: p.du, t_max: p.t_max, u_max: p.u_max, span: p.span, points: p.points, snapshot_times: p.snapshots.clone() };
    // One stream for all modes: a seed names the same driver in each.
    let r = root("lrm", p.seed);
    // the unit run must cover the S0-image of the target domain
    let (s_lo, s_hi) = profile.scale_s0(p.x0)?.s_range();
    let unit = OccupationProfile::unit(s_lo.abs().max(s_hi.abs()))?;
    let paths = par_map(p.replicas, |k| -> anyhow::Result<LrmPath> {
        Ok(match mode {
            LrmMode::Build => simulate_lrm(&profile, p.x0, &cfg, r.replica(k))?,
            LrmMode::Rescale => rescale(&simulate_lrm(&profile, p.x0, &cfg, r.replica(k))?, c)?,
            LrmMode::Transfer => transform_profile(&simulate_lrm(&unit, 0.0, &cfg, r.replica(k))?, &profile, p.x0)?,
        })
    })?;
    let mut pw = CsvWriter::create(&out.join("path.csv"), &h, &["replica", "u", "t", "x", "l_at_x"])?;
    let mut sw = CsvWriter::create(&out.join("snapshots.csv"), &h, &["replica", "t", "x", "l"])?;
    let mut sum = CsvWriter::create(&out.join("summary.csv"), &h, &["replica", "final_t", "final_x", "short", "boundary_hit"])?;
    for (k, path) in paths.iter().enumerate() {
        let n = path.t.len();
        for j in (0..n).filter(|j| j % p.stride == 0 || j + 1 == n) {
            let u: Cell = path.u.get(j).copied().unwrap_or(f64::NAN).into();
            pw.row(&[k.into(), u, path.t[j].into(), path.x[j].into(), path.l_at_x[j].into()])?;
        }
        for s in &path.snapshots {
            for (&x, &l) in s.x.iter().zip(&s.l) {
                sw.row(&[k.into(), s.t.into(), x.into(), l.into()])?;
            }
        }
        let last = path.x.last().copied().unwrap_or(path.x0);
        sum.row(&[k.into(), path.final_t().into(), last.into(), (path.short as u64).into(), (path.boundary_hit as u64).into()])?;
    }
    Ok(vec![pw.finish()?.0, sw.finish()?.0, sum.finish()?.0])
}
