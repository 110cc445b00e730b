//! Exact event-driven lattice processes on `2^-n Z`.
//!
//! Sites are addressed by integer index `i` (position `i 2^-n`). Every
//! process lives on the sites of a [`LatticeProfile`]; reaching either end
//! site absorbs the walk and sets `boundary_hit`.
//!
//! While a walk sits at a site, the neighbour rates are constant (only the
//! occupied site's local time grows), so each sojourn is a single
//! exponential draw and every clock below is integrated in closed form.

mod env_walk;
mod errw;
mod martingale;
mod vrjp;

pub use env_walk::{jump_process_in_environment, mixture_time_change, EnvWalk};
pub use errw::{simulate_errw, simulate_errw_in_environment, Errw, ErrwInEnvironment};
pub use martingale::{track_martingale, MartingaleSim, MartingaleTrace};
pub use vrjp::{simulate_vrjp, Vrjp};

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::profile::LatticeProfile;

/// Time units carried by a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    /// Reinforced (VRJP / LRM) time `t`.
    T,
    /// Environment-walk time `q`.
    Q,
    /// Discrete steps; `jump_times` are `1, 2, ...`.
    Step,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub n: u32,
    pub time_kind: TimeKind,
    pub start_site: i64,
    pub jump_times: Vec<f64>,
    /// Site after each jump.
    pub sites: Vec<i64>,
    pub boundary_hit: bool,
    /// Time up to which the path is known.
    pub horizon: f64,
}

impl JumpTrajectory {
    pub(crate) fn new(n: u32, time_kind: TimeKind, start_site: i64) -> Self {
        JumpTrajectory {
            n,
            time_kind,
            start_site,
            jump_times: Vec::new(),
            sites: Vec::new(),
            boundary_hit: false,
            horizon: 0.0,
        }
    }

    pub fn spacing(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }

    /// Site index occupied at time `t` (right-continuous).
    pub fn site_at(&self, t: f64) -> i64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            self.start_site
        } else {
            self.sites[k - 1]
        }
    }

    pub fn position_at(&self, t: f64) -> f64 {
        self.site_at(t) as f64 * self.spacing()
    }

    pub fn final_site(&self) -> i64 {
        self.sites.last().copied().unwrap_or(self.start_site)
    }

    /// `(start, end, site)` for every sojourn up to the horizon.
    pub fn sojourns(&self) -> impl Iterator<Item = (f64, f64, i64)> + '_ {
        let k = self.jump_times.len();
        (0..=k).filter_map(move |j| {
            let a = if j == 0 { 0.0 } else { self.jump_times[j - 1] };
            let b = if j == k { self.horizon } else { self.jump_times[j] };
            let s = if j == 0 { self.start_site } else { self.sites[j - 1] };
            (b > a).then_some((a, b, s))
        })
    }

    pub(crate) fn push(&mut self, t: f64, site: i64) {
        self.jump_times.push(t);
        self.sites.push(site);
    }
}

/// Density-normalized local times `l(i) = 2^n * occupation(i)` on the sites
/// of a lattice profile, next to the initial values `base = L0(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    pub n: u32,
    pub lo: i64,
    pub base: Vec<f64>,
    /// Local time at the trajectory horizon.
    pub ell: Vec<f64>,
    pub time_kind: TimeKind,
}

impl LocalTimeField {
    pub(crate) fn zero(lp: &LatticeProfile, time_kind: TimeKind) -> Self {
        LocalTimeField {
            n: lp.n,
            lo: lp.lo,
            base: lp.values.clone(),
            ell: alloc::vec![0.0; lp.values.len()],
            time_kind,
        }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.ell.len() as i64 - 1
    }

    pub fn get(&self, i: i64) -> f64 {
        self.ell[(i - self.lo) as usize]
    }

    /// `L = L0 + l` at the horizon.
    pub fn profile(&self) -> Vec<f64> {
        self.base.iter().zip(&self.ell).map(|(b, l)| b + l).collect()
    }

    /// `sum_i 2^-n l(i)`, which equals the elapsed time.
    pub fn total_occupation(&self) -> f64 {
        (-(self.n as f64)).exp2() * self.ell.iter().sum::<f64>()
    }

    /// Local times at an earlier time `t`, rebuilt from the trajectory.
    /// Exact: the occupied site's local time is linear in time.
    pub fn at(&self, traj: &JumpTrajectory, t: f64) -> Vec<f64> {
        let dens = (self.n as f64).exp2();
        let mut ell = alloc::vec![0.0; self.ell.len()];
        for (a, b, s) in traj.sojourns() {
            if a >= t {
                break;
            }
            ell[(s - self.lo) as usize] += dens * (b.min(t) - a);
        }
        ell
    }
}
