//! Quenched occupation ratio of the diffusion in a Brownian environment.

use rmotion_core::environment::{default_dy, sample_continuous_env};
use rmotion_core::lattice::EnvWalk;
use rmotion_core::profile::OccupationProfile;
use rmotion_core::RngStream;
use serde::{Deserialize, Serialize};

use super::{par_map, Rule, Statistic, Suite};

/// For a fixed environment, `log L*(x) + U(x) - log L0(x)` is flat on
/// compacts once `q` is large. The statistic per environment is its
/// spread (max minus min) over the lattice points of the window, which
/// bounds every pairwise log-ratio deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupationRatio {
    /// Independent environments.
    pub replicas: u64,
    pub m: u32,
    pub q: f64,
    pub window: (f64, f64),
    pub half_width: f64,
    pub band: f64,
}

impl Default for OccupationRatio {
    fn default() -> Self {
        OccupationRatio { replicas: 10, m: 6, q: 1e4, window: (-1.0, 1.0), half_width: 32.0, band: 0.1 }
    }
}

impl Suite for OccupationRatio {
    const NAME: &'static str = "occupation-ratio";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        let profile = OccupationProfile::unit(self.half_width)?;
        let (a, b) = self.window;
        let lp = profile.lattice_restrict(self.m)?;
        let per = par_map(self.replicas, |k| {
            let s = root.replica(k);
            let env = sample_continuous_env(&profile, default_dy(&profile, self.m), s.named("env"))?;
            // Only the local times are needed, so the walk runs unrecorded.
            let mut w = EnvWalk::new(&env.on_lattice(&profile, self.m)?, &lp)?;
            w.advance_q(self.q, &mut s.named("walk").rng(), |_, _, _| {});
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (j, (&l0, &lam)) in lp.values.iter().zip(w.lambda()).enumerate() {
                let x = lp.site(lp.lo + j as i64);
                if x < a || x > b {
                    continue;
                }
                let l_star = (l0 * l0 + 2.0 * lam).sqrt();
                let dev = l_star.ln() - l0.ln() + env.eval(x)?;
                lo = lo.min(dev);
                hi = hi.max(dev);
            }
            Ok((hi - lo, w.absorbed()))
        })?;
        let mut stats = Vec::new();
        for (k, (spread, hit)) in per.iter().enumerate() {
            stats.push(Statistic::band(format!("env{k}.spread"), *spread, self.band));
            if *hit {
                stats.push(Statistic::oracle(format!("env{k}.boundary_hit"), 1.0, Rule::AtMost(0.0)));
            }
        }
        stats.push(Statistic::info("max_spread", per.iter().map(|p| p.0).fold(0.0, f64::max)));
        Ok(stats)
    }
}
