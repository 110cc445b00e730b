//! The mixture-of-diffusions side: the mesh-`m` walk in a continuous
//! environment `U`, its time change to reinforced time, and the reduced
//! (`xi`) clock of the unit-profile case.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::environment::{default_dy, sample_continuous_env, ContinuousEnvironment, DiscreteEnvironment};
use crate::lattice::{jump_process_in_environment, mixture_time_change, EnvWalk, JumpTrajectory, LocalTimeField, TimeKind};
use crate::profile::OccupationProfile;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone)]
pub struct EnvDiffusionRun {
    pub m: u32,
    pub env: ContinuousEnvironment,
    pub lattice_env: DiscreteEnvironment,
    /// `q`-time trajectory from 0.
    pub traj: JumpTrajectory,
    /// Density-normalized `lambda_q` at `q_max`.
    pub local_times: LocalTimeField,
}

impl EnvDiffusionRun {
    pub fn env_fingerprint(&self) -> u64 {
        self.env.fingerprint()
    }
}

fn environment_for(
    profile: &OccupationProfile,
    m: u32,
    stream: RngStream,
    quenched: Option<&ContinuousEnvironment>,
) -> Result<(ContinuousEnvironment, DiscreteEnvironment)> {
    if m == 0 {
        return Err(Error::invalid("mesh exponent m must be at least 1"));
    }
    let env = match quenched {
        Some(e) => e.clone(),
        None => sample_continuous_env(profile, default_dy(profile, m), stream.named("env"))?,
    };
    let lattice = env.on_lattice(profile, m)?;
    Ok((env, lattice))
}

/// Walk at mesh `m` in `U` (fresh unless `quenched` is given) up to `q_max`.
pub fn simulate_env_diffusion(
    profile: &OccupationProfile,
    m: u32,
    q_max: f64,
    stream: RngStream,
    quenched: Option<&ContinuousEnvironment>,
) -> Result<EnvDiffusionRun> {
    let (env, lattice_env) = environment_for(profile, m, stream, quenched)?;
    let (traj, local_times) = jump_process_in_environment(&lattice_env, profile, m, q_max, stream.named("walk"))?;
    Ok(EnvDiffusionRun { m, env, lattice_env, traj, local_times })
}

/// `(X*, L* - L0)` in reinforced time, `dt = (L0(Z)^2 + 2 lambda(Z))^{-1/2} dq`.
pub fn time_change_to_lrm(run: &EnvDiffusionRun, profile: &OccupationProfile) -> Result<(JumpTrajectory, LocalTimeField)> {
    mixture_time_change(&run.traj, &run.local_times, profile)
}

/// Position of `X*_t` for a fresh (or quenched) environment, run directly on
/// the reinforced clock. Returns `(X*_t, boundary_hit)`.
pub fn env_lrm_position(
    profile: &OccupationProfile,
    m: u32,
    t: f64,
    stream: RngStream,
    quenched: Option<&ContinuousEnvironment>,
) -> Result<(f64, bool)> {
    let (_, lattice) = environment_for(profile, m, stream, quenched)?;
    let lp = profile.lattice_restrict(m)?;
    let mut w = EnvWalk::new(&lattice, &lp)?;
    let mut rng = stream.named("walk").rng();
    w.advance_t(t, &mut rng, |_, _, _| {});
    Ok((w.position(), w.absorbed()))
}

/// Position of the walk at `q`. Returns `(Z_q, boundary_hit)`.
pub fn env_diffusion_position(
    profile: &OccupationProfile,
    m: u32,
    q: f64,
    stream: RngStream,
    quenched: Option<&ContinuousEnvironment>,
) -> Result<(f64, bool)> {
    let (_, lattice) = environment_for(profile, m, stream, quenched)?;
    let lp = profile.lattice_restrict(m)?;
    let mut w = EnvWalk::new(&lattice, &lp)?;
    let mut rng = stream.named("walk").rng();
    w.advance_q(q, &mut rng, |_, _, _| {});
    Ok((w.position(), w.absorbed()))
}

/// The reduced process recovered from a unit-profile run:
/// `du = (1 + 2 lambda(Z))^{-2} dq` and `Lambda = lambda / (1 + 2 lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiRepresentation {
    pub n: u32,
    pub lo: i64,
    pub start_site: i64,
    /// Reduced time of each jump.
    pub jump_u: Vec<f64>,
    pub sites: Vec<i64>,
    pub u_end: f64,
    /// `Lambda` per site at `u_end`.
    pub lambda: Vec<f64>,
    pub boundary_hit: bool,
}

impl XiRepresentation {
    pub fn position_at(&self, u: f64) -> f64 {
        let k = self.jump_u.partition_point(|&v| v <= u);
        let s = if k == 0 { self.start_site } else { self.sites[k - 1] };
        s as f64 * (-(self.n as f64)).exp2()
    }
}

/// `lambda -> lambda / (1 + 2 lambda)`, in `[0, 1/2)`.
pub fn lambda_from_local_time(l: f64) -> f64 {
    if l.is_infinite() {
        return 0.5;
    }
    l / (1.0 + 2.0 * l)
}

pub fn xi_representation(run: &EnvDiffusionRun, profile: &OccupationProfile) -> Result<XiRepresentation> {
    if !profile.is_unit() {
        return Err(Error::invalid("the reduced representation needs the unit profile"));
    }
    let traj = &run.traj;
    if traj.time_kind != TimeKind::Q {
        return Err(Error::invalid("expected a q-time trajectory"));
    }
    let lt = &run.local_times;
    let dens = (traj.n as f64).exp2();
    let mut lam = alloc::vec![0.0; lt.ell.len()];
    let mut u = 0.0;
    let mut jump_u = Vec::with_capacity(traj.jump_times.len());
    let k = traj.jump_times.len();
    for (j, (a, b, s)) in traj.sojourns().enumerate() {
        let i = (s - lt.lo) as usize;
        let before = lam[i];
        lam[i] += dens * (b - a);
        u += (1.0 / (1.0 + 2.0 * before) - 1.0 / (1.0 + 2.0 * lam[i])) / (2.0 * dens);
        if j < k && b == traj.jump_times[j] {
            jump_u.push(u);
        }
    }
    Ok(XiRepresentation {
        n: traj.n,
        lo: lt.lo,
        start_site: traj.start_site,
        jump_u,
        sites: traj.sites.clone(),
        u_end: u,
        lambda: lam.into_iter().map(lambda_from_local_time).collect(),
        boundary_hit: traj.boundary_hit,
    })
}

/// `xi_u` for a fresh unit-profile environment run directly on the reduced
/// clock. Returns `(xi_u, boundary_hit)`.
pub fn xi_position(profile: &OccupationProfile, m: u32, u: f64, stream: RngStream) -> Result<(f64, bool)> {
    if !profile.is_unit() {
        return Err(Error::invalid("the reduced representation needs the unit profile"));
    }
    let (_, lattice) = environment_for(profile, m, stream, None)?;
    let lp = profile.lattice_restrict(m)?;
    let mut w = EnvWalk::new(&lattice, &lp)?;
    let mut rng = stream.named("walk").rng();
    w.advance_u(u, &mut rng, |_, _, _| {});
    Ok((w.position(), w.absorbed()))
}
