//! Markov jump process in a discrete environment and the mixture time
//! change that turns it into a VRJP.
//!
//! Rate from `x` to `x'`: `2^(2n-1) (L0(x') / L0(x)) exp(U(x) - U(x'))`.
//! Local times `lambda` are density-normalized (factor `2^n`). The mixture
//! clock is `t(q) = 2^-n sum_x (sqrt(L0(x)^2 + 2 lambda_q(x)) - L0(x))`;
//! along a sojourn only the occupied term moves, so it is inverted in
//! closed form.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;

use super::{JumpTrajectory, LocalTimeField, TimeKind};
use crate::environment::DiscreteEnvironment;
use crate::profile::{LatticeProfile, OccupationProfile};
use crate::sampling::exp1;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone)]
pub struct EnvWalk {
    lo: i64,
    hi: i64,
    dens: f64,
    base: Vec<f64>,
    r_left: Vec<f64>,
    r_right: Vec<f64>,
    lambda: Vec<f64>,
    pos: i64,
    q: f64,
    t: f64,
    u: f64,
    absorbed: bool,
    reflecting: bool,
}

impl EnvWalk {
    pub fn new(env: &DiscreteEnvironment, lp: &LatticeProfile) -> Result<Self> {
        if env.n != lp.n || env.lo != lp.lo || env.values.len() != lp.values.len() {
            return Err(Error::invalid("environment and profile lattices differ"));
        }
        if !lp.contains(0) {
            return Err(Error::invalid("start site 0 outside the lattice domain"));
        }
        let len = lp.values.len();
        let c = (2.0 * lp.n as f64 - 1.0).exp2();
        let (l0, u) = (&lp.values, &env.values);
        let rate = |from: usize, to: usize| c * (l0[to] / l0[from]) * (u[from] - u[to]).exp();
        let r_left = (0..len).map(|k| if k > 0 { rate(k, k - 1) } else { 0.0 }).collect();
        let r_right = (0..len).map(|k| if k + 1 < len { rate(k, k + 1) } else { 0.0 }).collect();
        Ok(EnvWalk {
            lo: lp.lo,
            hi: lp.hi(),
            dens: (lp.n as f64).exp2(),
            base: l0.clone(),
            r_left,
            r_right,
            lambda: alloc::vec![0.0; len],
            pos: 0,
            q: 0.0,
            t: 0.0,
            u: 0.0,
            absorbed: lp.lo == 0 || lp.hi() == 0,
            reflecting: false,
        })
    }

    /// Reflect at the end sites instead of absorbing (diagnostics only; the
    /// law-equivalence suites always absorb).
    pub fn reflecting(mut self) -> Self {
        self.reflecting = true;
        self.absorbed = self.lo == self.hi;
        self
    }

    pub fn site(&self) -> i64 {
        self.pos
    }
    pub fn position(&self) -> f64 {
        self.pos as f64 / self.dens
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    /// Mixture clock `t(q)`.
    pub fn t(&self) -> f64 {
        self.t
    }
    /// Reduced clock `u(q)` with `du = (1 + 2 lambda(Z))^-2 dq`; it is the
    /// flow time of the reduced process when `L0 = 1`.
    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn absorbed(&self) -> bool {
        self.absorbed
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn lo(&self) -> i64 {
        self.lo
    }

    #[inline]
    fn rates(&self, k: usize) -> (f64, f64) {
        (self.r_left[k], self.r_right[k])
    }

    #[inline]
    fn jump<R: Rng + ?Sized>(&mut self, r_m: f64, r_p: f64, rng: &mut R) {
        self.pos += if rng.random::<f64>() * (r_m + r_p) < r_p { 1 } else { -1 };
        if !self.reflecting && (self.pos == self.lo || self.pos == self.hi) {
            self.absorbed = true;
        }
    }

    /// Run in `q` until `q_target` or absorption. Reports `(q, t, site)`.
    pub fn advance_q<R: Rng + ?Sized>(&mut self, q_target: f64, rng: &mut R, mut on_jump: impl FnMut(f64, f64, i64)) {
        while !self.absorbed && self.q < q_target {
            let k = (self.pos - self.lo) as usize;
            let (r_m, r_p) = self.rates(k);
            let s = exp1(rng) / (r_m + r_p);
            let l0 = self.base[k];
            let a = self.lambda[k];
            let stop = self.q + s >= q_target;
            let s = if stop { q_target - self.q } else { s };
            let b = a + self.dens * s;
            self.t += ((l0 * l0 + 2.0 * b).sqrt() - (l0 * l0 + 2.0 * a).sqrt()) / self.dens;
            self.u += self.u_increment(a, b);
            self.lambda[k] = b;
            if stop {
                self.q = q_target;
                return;
            }
            self.q += s;
            self.jump(r_m, r_p, rng);
            on_jump(self.q, self.t, self.pos);
        }
    }

    /// Run until the mixture clock reaches `t_target` (or absorption).
    /// Reports `(q, t, site)`.
    pub fn advance_t<R: Rng + ?Sized>(&mut self, t_target: f64, rng: &mut R, mut on_jump: impl FnMut(f64, f64, i64)) {
        while !self.absorbed && self.t < t_target {
            let k = (self.pos - self.lo) as usize;
            let (r_m, r_p) = self.rates(k);
            let s = exp1(rng) / (r_m + r_p);
            let l0 = self.base[k];
            let a = self.lambda[k];
            let cur = (l0 * l0 + 2.0 * a).sqrt();
            let b = a + self.dens * s;
            let dt = ((l0 * l0 + 2.0 * b).sqrt() - cur) / self.dens;
            if self.t + dt >= t_target {
                let l_star = cur + self.dens * (t_target - self.t);
                let b_star = 0.5 * (l_star * l_star - l0 * l0);
                self.q += (b_star - a) / self.dens;
                self.u += self.u_increment(a, b_star);
                self.lambda[k] = b_star;
                self.t = t_target;
                return;
            }
            self.u += self.u_increment(a, b);
            self.lambda[k] = b;
            self.t += dt;
            self.q += s;
            self.jump(r_m, r_p, rng);
            on_jump(self.q, self.t, self.pos);
        }
    }
}

impl EnvWalk {
    #[inline]
    fn u_increment(&self, a: f64, b: f64) -> f64 {
        (1.0 / (1.0 + 2.0 * a) - 1.0 / (1.0 + 2.0 * b)) / (2.0 * self.dens)
    }

    /// Run until the reduced clock reaches `u_target` (or absorption).
    /// Reports `(u, q, site)`.
    pub fn advance_u<R: Rng + ?Sized>(&mut self, u_target: f64, rng: &mut R, mut on_jump: impl FnMut(f64, f64, i64)) {
        while !self.absorbed && self.u < u_target {
            let k = (self.pos - self.lo) as usize;
            let (r_m, r_p) = self.rates(k);
            let s = exp1(rng) / (r_m + r_p);
            let l0 = self.base[k];
            let a = self.lambda[k];
            let b = a + self.dens * s;
            let du = self.u_increment(a, b);
            if self.u + du >= u_target {
                let inv = 1.0 / (1.0 + 2.0 * a) - 2.0 * self.dens * (u_target - self.u);
                let b_star = if inv > 0.0 { (0.5 * (1.0 / inv - 1.0)).clamp(a, b) } else { b };
                self.q += (b_star - a) / self.dens;
                self.t += ((l0 * l0 + 2.0 * b_star).sqrt() - (l0 * l0 + 2.0 * a).sqrt()) / self.dens;
                self.lambda[k] = b_star;
                self.u = u_target;
                return;
            }
            self.t += ((l0 * l0 + 2.0 * b).sqrt() - (l0 * l0 + 2.0 * a).sqrt()) / self.dens;
            self.lambda[k] = b;
            self.u += du;
            self.q += s;
            self.jump(r_m, r_p, rng);
            on_jump(self.u, self.q, self.pos);
        }
    }
}

/// Run the environment walk from 0 for `q_max` units of `q`.
pub fn jump_process_in_environment(
    env: &DiscreteEnvironment,
    profile: &OccupationProfile,
    n: u32,
    q_max: f64,
    stream: RngStream,
) -> Result<(JumpTrajectory, LocalTimeField)> {
    if !(q_max > 0.0 && q_max.is_finite()) {
        return Err(Error::invalid("q_max must be positive"));
    }
    let lp = profile.lattice_restrict(n)?;
    let mut w = EnvWalk::new(env, &lp)?;
    let mut rng = stream.rng();
    let mut traj = JumpTrajectory::new(n, TimeKind::Q, 0);
    w.advance_q(q_max, &mut rng, |q, _, s| traj.push(q, s));
    traj.boundary_hit = w.absorbed();
    traj.horizon = w.q();
    let mut field = LocalTimeField::zero(&lp, TimeKind::Q);
    field.ell.copy_from_slice(w.lambda());
    Ok((traj, field))
}

/// Map a `q`-time trajectory onto reinforced time `t` and return
/// `L_t = sqrt(L0^2 + 2 lambda)` as a local-time field over `L0`.
pub fn mixture_time_change(
    traj: &JumpTrajectory,
    local_times: &LocalTimeField,
    profile: &OccupationProfile,
) -> Result<(JumpTrajectory, LocalTimeField)> {
    if traj.time_kind != TimeKind::Q || local_times.time_kind != TimeKind::Q {
        return Err(Error::invalid("mixture time change expects a q-time trajectory"));
    }
    let lp = profile.lattice_restrict(traj.n)?;
    if local_times.n != traj.n || local_times.lo != lp.lo || local_times.base != lp.values {
        return Err(Error::invalid("local times do not match the profile lattice"));
    }
    let dens = (traj.n as f64).exp2();
    let mut lambda = alloc::vec![0.0; lp.values.len()];
    let mut out = JumpTrajectory::new(traj.n, TimeKind::T, traj.start_site);
    out.boundary_hit = traj.boundary_hit;
    let mut t = 0.0;
    let k = traj.jump_times.len();
    for (j, (a, b, s)) in traj.sojourns().enumerate() {
        let i = (s - lp.lo) as usize;
        let l0 = lp.values[i];
        let before = (l0 * l0 + 2.0 * lambda[i]).sqrt();
        lambda[i] += dens * (b - a);
        t += ((l0 * l0 + 2.0 * lambda[i]).sqrt() - before) / dens;
        if j < k && b == traj.jump_times[j] {
            out.push(t, traj.sites[j]);
        }
    }
    out.horizon = t;
    let mut field = LocalTimeField::zero(&lp, TimeKind::T);
    for (i, e) in field.ell.iter_mut().enumerate() {
        let l0 = lp.values[i];
        *e = (l0 * l0 + 2.0 * lambda[i]).sqrt() - l0;
    }
    Ok((out, field))
}
