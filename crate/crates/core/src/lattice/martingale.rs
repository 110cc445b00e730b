//! The discrete scale martingale of the VRJP.
//!
//! With edge gaps `g(x) = 2^-n / (L_t(x) L_t(x - 2^-n))`, the process
//! `M = S_t(X_t)` is constant between jumps and moves by `+g(X + 2^-n)` or
//! `-g(X)` at a jump, the gap evaluated at the jump time. It is run on the
//! clock `du/dt = (L_- + L_+) / (2 L(X)^2 L_- L_+)`; over a sojourn of length
//! `s` starting with `L(X) = a` this integrates to
//! `coef * s / (a (a + 2^n s))`, `coef = (L_- + L_+) / (2 L_- L_+)`.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;

use super::{JumpTrajectory, LocalTimeField, TimeKind, Vrjp};
use crate::profile::{LatticeProfile, OccupationProfile};
use crate::sampling::exp1;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrace {
    /// `u` at each jump.
    pub u: Vec<f64>,
    /// `M` just after each jump.
    pub m: Vec<f64>,
    pub lo: i64,
    /// Gap of the edge between sites `lo + k - 1` and `lo + k` at the
    /// horizon (`gaps[0]` unused).
    pub gaps: Vec<f64>,
    /// `u` at the trajectory horizon.
    pub u_end: f64,
}

impl MartingaleTrace {
    pub fn value_at(&self, u: f64) -> f64 {
        let k = self.u.partition_point(|&v| v <= u);
        if k == 0 {
            0.0
        } else {
            self.m[k - 1]
        }
    }
}

#[inline]
fn du_sojourn(a: f64, lm: f64, lp: f64, dens: f64, s: f64) -> f64 {
    let coef = (lm + lp) / (2.0 * lm * lp);
    coef * s / (a * (a + dens * s))
}

/// Build the trace from a recorded VRJP path.
pub fn track_martingale(
    traj: &JumpTrajectory,
    local_times: &LocalTimeField,
    profile: &OccupationProfile,
) -> Result<MartingaleTrace> {
    if traj.time_kind != TimeKind::T {
        return Err(Error::invalid("martingale tracking needs a t-time trajectory"));
    }
    let lp: LatticeProfile = profile.lattice_restrict(traj.n)?;
    if local_times.lo != lp.lo || local_times.base != lp.values {
        return Err(Error::invalid("local times do not match the profile lattice"));
    }
    let dens = (traj.n as f64).exp2();
    let h = 1.0 / dens;
    let mut l = lp.values.clone();
    let (mut u, mut m) = (0.0, 0.0);
    let mut out = MartingaleTrace { u: Vec::new(), m: Vec::new(), lo: lp.lo, gaps: Vec::new(), u_end: 0.0 };
    let k_jumps = traj.jump_times.len();
    let mut prev_end = 0.0;
    for j in 0..=k_jumps {
        let site = if j == 0 { traj.start_site } else { traj.sites[j - 1] };
        let end = if j == k_jumps { traj.horizon } else { traj.jump_times[j] };
        let k = (site - lp.lo) as usize;
        let s = end - prev_end;
        prev_end = end;
        if k > 0 && k + 1 < l.len() {
            u += du_sojourn(l[k], l[k - 1], l[k + 1], dens, s);
        }
        l[k] += dens * s;
        if j < k_jumps {
            let next = (traj.sites[j] - lp.lo) as usize;
            let gap = h / (l[k] * l[next]);
            m += if next > k { gap } else { -gap };
            out.u.push(u);
            out.m.push(m);
        }
    }
    out.u_end = u;
    out.gaps = (0..l.len()).map(|k| if k == 0 { 0.0 } else { h / (l[k] * l[k - 1]) }).collect();
    Ok(out)
}

/// Resumable VRJP driven on the martingale clock `u`.
#[derive(Debug, Clone)]
pub struct MartingaleSim {
    walk: Vrjp,
    u: f64,
    m: f64,
}

impl MartingaleSim {
    pub fn new(lp: &LatticeProfile) -> Result<Self> {
        Ok(MartingaleSim { walk: Vrjp::new(lp)?, u: 0.0, m: 0.0 })
    }

    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn absorbed(&self) -> bool {
        self.walk.absorbed
    }
    pub fn vrjp(&self) -> &Vrjp {
        &self.walk
    }

    /// Run until `u_target` (or absorption), reporting `(u, dM)` per jump.
    pub fn advance_u<R: Rng + ?Sized>(&mut self, u_target: f64, rng: &mut R, mut on_jump: impl FnMut(f64, f64)) {
        let w = &mut self.walk;
        let h = 1.0 / w.dens;
        while !w.absorbed && self.u < u_target {
            let k = (w.pos - w.lo) as usize;
            let (a, lm, lp) = (w.l[k], w.l[k - 1], w.l[k + 1]);
            let total = w.c * (lm + lp);
            let s = exp1(rng) / total;
            let du = du_sojourn(a, lm, lp, w.dens, s);
            if self.u + du >= u_target {
                let d = u_target - self.u;
                let coef = (lm + lp) / (2.0 * lm * lp);
                let s_star = d * a * a / (coef - d * a * w.dens);
                w.l[k] += w.dens * s_star;
                w.t += s_star;
                self.u = u_target;
                return;
            }
            self.u += du;
            w.l[k] += w.dens * s;
            w.t += s;
            let dm = if rng.random::<f64>() * total < w.c * lp {
                w.pos += 1;
                h / (w.l[k] * lp)
            } else {
                w.pos -= 1;
                -h / (w.l[k] * lm)
            };
            self.m += dm;
            on_jump(self.u, dm);
            if w.pos == w.lo || w.pos == w.hi {
                w.absorbed = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::simulate_vrjp;
    use crate::RngStream;

    #[test]
    fn first_jump_gap() {
        let p = OccupationProfile::unit(4.0).unwrap();
        let (tr, lt) = simulate_vrjp(&p, 0, 5.0, RngStream::new(1, 1)).unwrap();
        let tr_m = track_martingale(&tr, &lt, &p).unwrap();
        let t1 = tr.jump_times[0];
        assert!((tr_m.m[0].abs() - 1.0 / (1.0 + t1)).abs() < 1e-15);
        assert_eq!(tr_m.m[0].signum(), tr.sites[0] as f64);
    }

    #[test]
    fn online_and_replay_agree() {
        let p = OccupationProfile::unit(2.0).unwrap();
        let lp = p.lattice_restrict(3).unwrap();
        let mut sim = MartingaleSim::new(&lp).unwrap();
        let mut rng = RngStream::new(5, 2).rng();
        let mut us = Vec::new();
        sim.advance_u(0.3, &mut rng, |u, _| us.push(u));
        // replay the same walk (same draws) through the recorded path
        let (tr, lt) = {
            let mut w = Vrjp::new(&lp).unwrap();
            let mut rng = RngStream::new(5, 2).rng();
            let mut traj = JumpTrajectory::new(3, TimeKind::T, 0);
            w.advance(sim.vrjp().time(), &mut rng, |t, s| traj.push(t, s));
            traj.horizon = w.time();
            let mut f = LocalTimeField::zero(&lp, TimeKind::T);
            for (e, (l, b)) in f.ell.iter_mut().zip(w.l.iter().zip(&lp.values)) {
                *e = l - b;
            }
            (traj, f)
        };
        let tm = track_martingale(&tr, &lt, &p).unwrap();
        assert_eq!(tm.u.len(), us.len());
        for (a, b) in tm.u.iter().zip(&us) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((tm.m.last().unwrap() - sim.m()).abs() < 1e-12);
        assert!((tm.u_end - 0.3).abs() < 1e-9);
        assert!(tm.gaps[1..].iter().all(|&g| g > 0.0));
    }
}
