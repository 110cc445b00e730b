//! Edge-reinforced random walk and its mixture representation.
//!
//! Edge `k` joins sites `lo + k - 1` and `lo + k` (so `k` runs over
//! `1..len`). Initial ERRW weights are `w0 = 2^(n-1) L0(x - 2^-n) L0(x)`;
//! each crossing, in either direction, adds 1.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;

use super::{JumpTrajectory, TimeKind};
use crate::environment::GammaEnvironment;
use crate::profile::{LatticeProfile, OccupationProfile};
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone)]
pub struct Errw {
    lo: i64,
    hi: i64,
    w: Vec<f64>,
    pos: i64,
    steps: u64,
    absorbed: bool,
}

impl Errw {
    pub fn new(lp: &LatticeProfile) -> Result<Self> {
        if !lp.contains(0) {
            return Err(Error::invalid("start site 0 outside the lattice domain"));
        }
        let half = (lp.n as f64 - 1.0).exp2();
        let mut w = alloc::vec![0.0; lp.values.len()];
        for k in 1..w.len() {
            w[k] = half * lp.values[k - 1] * lp.values[k];
        }
        Ok(Errw { lo: lp.lo, hi: lp.hi(), w, pos: 0, steps: 0, absorbed: lp.lo == 0 || lp.hi() == 0 })
    }

    pub fn site(&self) -> i64 {
        self.pos
    }
    pub fn steps(&self) -> u64 {
        self.steps
    }
    pub fn absorbed(&self) -> bool {
        self.absorbed
    }
    /// Weight of the edge between sites `i - 1` and `i`.
    pub fn weight(&self, i: i64) -> f64 {
        self.w[(i - self.lo) as usize]
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<i64> {
        if self.absorbed {
            return None;
        }
        let k = (self.pos - self.lo) as usize;
        let (wl, wr) = (self.w[k], self.w[k + 1]);
        if rng.random::<f64>() * (wl + wr) < wr {
            self.w[k + 1] += 1.0;
            self.pos += 1;
        } else {
            self.w[k] += 1.0;
            self.pos -= 1;
        }
        self.steps += 1;
        if self.pos == self.lo || self.pos == self.hi {
            self.absorbed = true;
        }
        Some(self.pos)
    }
}

fn run_steps(steps: u64, mut next: impl FnMut() -> Option<i64>) -> JumpTrajectory {
    let mut traj = JumpTrajectory::new(0, TimeKind::Step, 0);
    for k in 1..=steps {
        match next() {
            Some(s) => traj.push(k as f64, s),
            None => {
                traj.boundary_hit = true;
                break;
            }
        }
    }
    traj.horizon = traj.jump_times.last().copied().unwrap_or(0.0);
    traj
}

/// `steps` ERRW steps from 0; stops early (flagged) at the domain boundary.
pub fn simulate_errw(profile: &OccupationProfile, n: u32, steps: u64, stream: RngStream) -> Result<JumpTrajectory> {
    let lp = profile.lattice_restrict(n)?;
    let mut w = Errw::new(&lp)?;
    let mut rng = stream.rng();
    let mut traj = run_steps(steps, || w.step(&mut rng));
    traj.n = n;
    traj.boundary_hit |= w.absorbed();
    Ok(traj)
}

/// Random walk with conductances `gamma(e) exp(-(U(x) + U(x')))` on edge
/// `e = {x, x'}`.
#[derive(Debug, Clone)]
pub struct ErrwInEnvironment {
    lo: i64,
    hi: i64,
    p_right: Vec<f64>,
    pos: i64,
    absorbed: bool,
}

impl ErrwInEnvironment {
    pub fn new(env: &GammaEnvironment) -> Result<Self> {
        let lo = env.lo;
        let hi = env.hi();
        if lo > 0 || hi < 0 {
            return Err(Error::invalid("start site 0 outside the environment"));
        }
        let len = env.uhat.len();
        // log-conductance of edge k (between k-1 and k)
        let logc = |k: usize| env.gamma[k].ln() - (env.uhat[k - 1] + env.uhat[k]);
        let mut p_right = alloc::vec![0.0; len];
        for k in 1..len.saturating_sub(1) {
            p_right[k] = 1.0 / (1.0 + (logc(k) - logc(k + 1)).exp());
        }
        Ok(ErrwInEnvironment { lo, hi, p_right, pos: 0, absorbed: lo == 0 || hi == 0 })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<i64> {
        if self.absorbed {
            return None;
        }
        let k = (self.pos - self.lo) as usize;
        self.pos += if rng.random::<f64>() < self.p_right[k] { 1 } else { -1 };
        if self.pos == self.lo || self.pos == self.hi {
            self.absorbed = true;
        }
        Some(self.pos)
    }

    pub fn absorbed(&self) -> bool {
        self.absorbed
    }
}

/// `steps` steps of the mixture walk in a fixed gamma environment.
pub fn simulate_errw_in_environment(env: &GammaEnvironment, steps: u64, stream: RngStream) -> Result<JumpTrajectory> {
    let mut w = ErrwInEnvironment::new(env)?;
    let mut rng = stream.rng();
    let mut traj = run_steps(steps, || w.step(&mut rng));
    traj.n = env.n;
    traj.boundary_hit |= w.absorbed();
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_weights_and_increment() {
        let p = OccupationProfile::unit(4.0).unwrap();
        let lp = p.lattice_restrict(1).unwrap();
        let mut w = Errw::new(&lp).unwrap();
        assert!((lp.lo + 1..=lp.hi()).all(|i| w.weight(i) == 1.0));
        let mut rng = RngStream::new(0, 0).rng();
        let s = w.step(&mut rng).unwrap();
        let edge = if s == 1 { 1 } else { 0 };
        assert_eq!(w.weight(edge), 2.0);
        assert_eq!(w.weight(1 - edge), 1.0);
    }

    #[test]
    fn first_step_is_fair() {
        let p = OccupationProfile::unit(4.0).unwrap();
        let n = 100_000;
        let right = (0..n)
            .filter(|&k| simulate_errw(&p, 1, 1, RngStream::new(4, k)).unwrap().sites[0] == 1)
            .count();
        let f = right as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.005, "{f}");
    }

    #[test]
    fn truncation_is_flagged() {
        let p = OccupationProfile::unit(1.0).unwrap();
        let tr = simulate_errw(&p, 0, 1000, RngStream::new(0, 1)).unwrap();
        assert!(tr.boundary_hit);
        assert_eq!(tr.final_site().abs(), 1);
        assert!(tr.sites.len() < 1000);
    }
}
