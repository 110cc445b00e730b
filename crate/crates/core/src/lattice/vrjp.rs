//! The mesh VRJP: jump rate to `x ± 2^-n` is `2^(2n-1) L_t(x ± 2^-n)`,
//! with `L_t = L0 + l_t` and `l_t` the density-normalized local time.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;

use super::{JumpTrajectory, LocalTimeField, TimeKind};
use crate::profile::{LatticeProfile, OccupationProfile};
use crate::sampling::exp1;
use crate::{Error, Result, RngStream};

/// Resumable VRJP state started from site 0.
#[derive(Debug, Clone)]
pub struct Vrjp {
    pub(super) n: u32,
    pub(super) lo: i64,
    pub(super) hi: i64,
    pub(super) c: f64,
    pub(super) dens: f64,
    pub(super) l: Vec<f64>,
    pub(super) pos: i64,
    pub(super) t: f64,
    pub(super) absorbed: bool,
}

impl Vrjp {
    pub fn new(lp: &LatticeProfile) -> Result<Self> {
        if !lp.contains(0) {
            return Err(Error::invalid("start site 0 outside the lattice domain"));
        }
        let n = lp.n;
        Ok(Vrjp {
            n,
            lo: lp.lo,
            hi: lp.hi(),
            c: (2.0 * n as f64 - 1.0).exp2(),
            dens: (n as f64).exp2(),
            l: lp.values.clone(),
            pos: 0,
            t: 0.0,
            absorbed: lp.lo == 0 || lp.hi() == 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }
    pub fn site(&self) -> i64 {
        self.pos
    }
    pub fn position(&self) -> f64 {
        self.pos as f64 * (-(self.n as f64)).exp2()
    }
    pub fn absorbed(&self) -> bool {
        self.absorbed
    }
    /// `L_t` on the lattice sites (index `i - lo`).
    pub fn occupation(&self) -> &[f64] {
        &self.l
    }
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Run until time `t_target` or absorption, reporting each jump.
    pub fn advance<R: Rng + ?Sized>(&mut self, t_target: f64, rng: &mut R, mut on_jump: impl FnMut(f64, i64)) {
        while !self.absorbed && self.t < t_target {
            let k = (self.pos - self.lo) as usize;
            let r_m = self.c * self.l[k - 1];
            let r_p = self.c * self.l[k + 1];
            let total = r_m + r_p;
            let s = exp1(rng) / total;
            if self.t + s >= t_target {
                self.l[k] += self.dens * (t_target - self.t);
                self.t = t_target;
                return;
            }
            self.l[k] += self.dens * s;
            self.t += s;
            self.pos += if rng.random::<f64>() * total < r_p { 1 } else { -1 };
            on_jump(self.t, self.pos);
            if self.pos == self.lo || self.pos == self.hi {
                self.absorbed = true;
            }
        }
    }
}

/// Simulate the VRJP from 0 up to `t_max` (or absorption at the domain
/// boundary, which sets `boundary_hit`).
pub fn simulate_vrjp(
    profile: &OccupationProfile,
    n: u32,
    t_max: f64,
    stream: RngStream,
) -> Result<(JumpTrajectory, LocalTimeField)> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max must be positive"));
    }
    let lp = profile.lattice_restrict(n)?;
    let mut sim = Vrjp::new(&lp)?;
    let mut rng = stream.rng();
    let mut traj = JumpTrajectory::new(n, TimeKind::T, 0);
    sim.advance(t_max, &mut rng, |t, s| traj.push(t, s));
    traj.boundary_hit = sim.absorbed();
    traj.horizon = sim.time();
    let mut field = LocalTimeField::zero(&lp, TimeKind::T);
    for (e, (l, b)) in field.ell.iter_mut().zip(sim.l.iter().zip(&lp.values)) {
        *e = l - b;
    }
    Ok((traj, field))
}
