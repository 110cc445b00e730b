//! Suites on the lattice processes: mixture identities, the scale
//! martingale and the growth diagnostic.

use rmotion_core::envdiff::env_diffusion_position;
use rmotion_core::environment::{sample_discrete_env, sample_gamma_env};
use rmotion_core::lattice::{EnvWalk, Errw, ErrwInEnvironment, MartingaleSim, Vrjp};
use rmotion_core::profile::OccupationProfile;
use rmotion_core::stats::{mean, ols, variance};
use rmotion_core::RngStream;
use serde::{Deserialize, Serialize};

use super::{compare_arms, par_map, Arm, Rule, Statistic, Suite};

/// VRJP against the walk in a sampled sinh environment, run on the
/// reinforced clock.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureVrjp {
    pub n: u32,
    pub half_width: f64,
    pub times: Vec<f64>,
    pub replicas: u64,
    pub alpha: f64,
}

impl Default for MixtureVrjp {
    fn default() -> Self {
        MixtureVrjp { n: 5, half_width: 2.0, times: vec![0.1, 0.5], replicas: 20_000, alpha: 0.01 }
    }
}

fn sorted_times(times: &[f64]) -> anyhow::Result<Vec<f64>> {
    let mut t = times.to_vec();
    if t.is_empty() || t.iter().any(|x| !(*x > 0.0)) {
        anyhow::bail!("times must be a nonempty list of positive values");
    }
    t.sort_by(f64::total_cmp);
    Ok(t)
}

impl Suite for MixtureVrjp {
    const NAME: &'static str = "mixture-vrjp";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        let profile = OccupationProfile::unit(self.half_width)?;
        let lp = profile.lattice_restrict(self.n)?;
        let times = sorted_times(&self.times)?;
        let direct = root.named("vrjp");
        let a = par_map(self.replicas, |k| {
            let mut w = Vrjp::new(&lp)?;
            let mut rng = direct.replica(k).rng();
            Ok(times
                .iter()
                .map(|&t| {
                    w.advance(t, &mut rng, |_, _| {});
                    (w.position(), w.absorbed())
                })
                .collect::<Vec<_>>())
        })?;
        let mixed = root.named("mixture");
        let b = par_map(self.replicas, |k| {
            let s = mixed.replica(k);
            let env = sample_discrete_env(&profile, self.n, s.named("env"))?;
            let mut w = EnvWalk::new(&env, &lp)?;
            let mut rng = s.named("walk").rng();
            Ok(times
                .iter()
                .map(|&t| {
                    w.advance_t(t, &mut rng, |_, _, _| {});
                    (w.position(), w.absorbed())
                })
                .collect::<Vec<_>>())
        })?;
        let mut stats = Vec::new();
        for (j, t) in times.iter().enumerate() {
            let label = format!("t={t}");
            let arm_a = Arm::new(a.iter().map(|r| r[j]));
            let arm_b = Arm::new(b.iter().map(|r| r[j]));
            let ks = compare_arms(&label, &arm_a, &arm_b, &mut stats)?;
            stats.push(Statistic::p_value(format!("{label}.ks_p"), ks.p, self.alpha));
        }
        Ok(stats)
    }
}

/// ERRW against the random walk in a Gamma / sinh environment, plus the
/// mesh-limited comparison with the walk in a Brownian environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureErrw {
    pub n: u32,
    pub half_width: f64,
    /// Step count; `None` means `4^n / 2`.
    pub steps: Option<u64>,
    pub replicas: u64,
    pub alpha: f64,
    /// Mesh of the band comparison (ERRW after `4^m q` steps vs `Z_q`).
    pub band_m: u32,
    pub band_q: f64,
    pub band_half_width: f64,
    pub band_replicas: u64,
    pub band: f64,
}

impl Default for MixtureErrw {
    fn default() -> Self {
        MixtureErrw {
            n: 4,
            half_width: 2.0,
            steps: None,
            replicas: 20_000,
            alpha: 0.01,
            band_m: 8,
            band_q: 0.5,
            band_half_width: 4.0,
            band_replicas: 10_000,
            band: 0.05,
        }
    }
}

fn errw_site(lp: &rmotion_core::profile::LatticeProfile, steps: u64, stream: RngStream) -> anyhow::Result<(f64, bool)> {
    let mut w = Errw::new(lp)?;
    let mut rng = stream.rng();
    for _ in 0..steps {
        if w.step(&mut rng).is_none() {
            break;
        }
    }
    Ok((w.site() as f64, w.absorbed()))
}

impl Suite for MixtureErrw {
    const NAME: &'static str = "mixture-errw";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        let mut stats = Vec::new();
        let profile = OccupationProfile::unit(self.half_width)?;
        let lp = profile.lattice_restrict(self.n)?;
        let steps = self.steps.unwrap_or(1u64 << (2 * self.n - 1).min(62));
        stats.push(Statistic::info("steps", steps as f64));
        let direct = root.named("errw");
        let a = par_map(self.replicas, |k| errw_site(&lp, steps, direct.replica(k)))?;
        let mixed = root.named("mixture");
        let b = par_map(self.replicas, |k| {
            let s = mixed.replica(k);
            let env = sample_gamma_env(&profile, self.n, s.named("env"))?;
            let mut w = ErrwInEnvironment::new(&env)?;
            let mut rng = s.named("walk").rng();
            let mut site = 0;
            for _ in 0..steps {
                match w.step(&mut rng) {
                    Some(x) => site = x,
                    None => break,
                }
            }
            Ok((site as f64, w.absorbed()))
        })?;
        let ks = compare_arms("sites", &Arm::new(a), &Arm::new(b), &mut stats)?;
        stats.push(Statistic::p_value("sites.ks_p", ks.p, self.alpha));

        if self.band_replicas > 0 {
            let profile = OccupationProfile::unit(self.band_half_width)?;
            let lp = profile.lattice_restrict(self.band_m)?;
            let spacing = lp.spacing();
            let steps = ((4f64).powi(self.band_m as i32) * self.band_q).floor() as u64;
            let stream = root.named("band-errw");
            let a = par_map(self.band_replicas, |k| {
                errw_site(&lp, steps, stream.replica(k)).map(|(s, f)| (s * spacing, f))
            })?;
            let stream = root.named("band-envdiff");
            let b = par_map(self.band_replicas, |k| {
                Ok(env_diffusion_position(&profile, self.band_m, self.band_q, stream.replica(k), None)?)
            })?;
            let ks = compare_arms("errw_vs_diffusion", &Arm::new(a), &Arm::new(b), &mut stats)?;
            stats.push(Statistic::band("errw_vs_diffusion.band_d", ks.d, self.band));
        }
        Ok(stats)
    }
}

/// Moments of the discrete scale martingale on its own clock.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Martingale {
    pub n: u32,
    pub half_width: f64,
    pub replicas: u64,
    /// `M` is read on the grid `k / grid`, `k = 0..=grid` (so `u` runs to 1).
    pub grid: u32,
    /// Window lengths, in grid cells, of the squared-increment regression.
    pub lags: Vec<u32>,
    pub variance_at: Vec<f64>,
    pub slope_tolerance: f64,
    pub variance_tolerance: f64,
    pub min_sojourns: u64,
}

impl Default for Martingale {
    fn default() -> Self {
        Martingale {
            n: 5,
            half_width: 8.0,
            replicas: 10_000,
            grid: 64,
            lags: vec![1, 2, 4, 8, 16],
            variance_at: vec![0.25, 0.5, 1.0],
            slope_tolerance: 0.05,
            variance_tolerance: 0.05,
            min_sojourns: 100_000,
        }
    }
}

struct MartingaleReplica {
    grid: Vec<f64>,
    jumps: u64,
    sum: f64,
    sum_sq: f64,
    absorbed: bool,
}

impl Suite for Martingale {
    const NAME: &'static str = "martingale";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        let profile = OccupationProfile::unit(self.half_width)?;
        let lp = profile.lattice_restrict(self.n)?;
        let g = self.grid as usize;
        let runs = par_map(self.replicas, |k| {
            let mut sim = MartingaleSim::new(&lp)?;
            let mut rng = root.replica(k).rng();
            let mut r = MartingaleReplica { grid: vec![0.0; g + 1], jumps: 0, sum: 0.0, sum_sq: 0.0, absorbed: false };
            for j in 1..=g {
                sim.advance_u(j as f64 / g as f64, &mut rng, |_, dm| {
                    r.jumps += 1;
                    r.sum += dm;
                    r.sum_sq += dm * dm;
                });
                r.grid[j] = sim.m();
            }
            r.absorbed = sim.absorbed();
            Ok(r)
        })?;
        let runs: Vec<_> = runs.into_iter().filter(|r| !r.absorbed).collect();
        let mut stats = vec![Statistic::info("dropped", (self.replicas as usize - runs.len()) as f64)];

        // jump increments: optional stopping makes each one centred
        let jumps: u64 = runs.iter().map(|r| r.jumps).sum();
        let sum: f64 = runs.iter().map(|r| r.sum).sum();
        let sum_sq: f64 = runs.iter().map(|r| r.sum_sq).sum();
        let nj = jumps as f64;
        let m = sum / nj;
        let sd = ((sum_sq - nj * m * m) / (nj - 1.0)).sqrt();
        stats.push(Statistic::oracle("sojourns", nj, Rule::AtLeast(self.min_sojourns as f64)));
        stats.push(Statistic::info("jump_increment_mean", m));
        stats.push(Statistic::oracle("jump_increment_mean_z", (m / (sd / nj.sqrt())).abs(), Rule::Below(3.0)));

        // E[(M_u1 - M_u0)^2] = u1 - u0 on disjoint fixed windows
        let (mut du, mut dm2) = (Vec::new(), Vec::new());
        for &lag in &self.lags {
            let lag = lag as usize;
            if lag == 0 || lag > g {
                anyhow::bail!("lags must lie in 1..=grid");
            }
            for r in &runs {
                for s in (0..=g - lag).step_by(lag) {
                    du.push(lag as f64 / g as f64);
                    dm2.push((r.grid[s + lag] - r.grid[s]).powi(2));
                }
            }
        }
        let fit = ols(&du, &dm2)?;
        let tol = self.slope_tolerance;
        stats.push(Statistic::oracle("qv_slope", fit.slope, Rule::Within(1.0 - tol, 1.0 + tol)));
        stats.push(Statistic::info("qv_slope_se", fit.slope_se));
        stats.push(Statistic::info("qv_intercept", fit.intercept));

        // Gaussian-limit check on the variance of M_u
        for &u in &self.variance_at {
            let j = (u * g as f64).round() as usize;
            if j == 0 || j > g || ((j as f64 / g as f64) - u).abs() > 1e-12 {
                anyhow::bail!("variance_at points must lie on the grid");
            }
            let xs: Vec<f64> = runs.iter().map(|r| r.grid[j]).collect();
            let tol = self.variance_tolerance;
            stats.push(Statistic::oracle(format!("var_ratio_u={u}"), variance(&xs) / u, Rule::Within(1.0 - tol, 1.0 + tol)));
        }

        // increments over [0, 1/2] and [1/2, 1] are uncorrelated
        let h = g / 2;
        let a: Vec<f64> = runs.iter().map(|r| r.grid[h]).collect();
        let b: Vec<f64> = runs.iter().map(|r| r.grid[g] - r.grid[h]).collect();
        let (ma, mb) = (mean(&a), mean(&b));
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
        let corr = cov / (variance(&a) * variance(&b)).sqrt();
        stats.push(Statistic::oracle("increment_corr_z", corr.abs() * (a.len() as f64).sqrt(), Rule::Below(3.0)));
        Ok(stats)
    }
}

/// Slope of `log max_{s<=t} |X_s|` against `log t` for the VRJP on `Z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Growth {
    pub n: u32,
    pub half_width: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub replicas: u64,
    pub band: (f64, f64),
}

impl Default for Growth {
    fn default() -> Self {
        Growth { n: 0, half_width: 4096.0, t_min: 1e2, t_max: 1e5, points: 16, replicas: 8, band: (0.15, 0.55) }
    }
}

impl Suite for Growth {
    const NAME: &'static str = "growth";

    fn run(&self, root: RngStream) -> anyhow::Result<Vec<Statistic>> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.points >= 3) {
            anyhow::bail!("growth needs 0 < t_min < t_max and at least three points");
        }
        let profile = OccupationProfile::unit(self.half_width)?;
        let lp = profile.lattice_restrict(self.n)?;
        let spacing = lp.spacing();
        let ratio = (self.t_max / self.t_min).ln() / (self.points - 1) as f64;
        let times: Vec<f64> = (0..self.points).map(|j| self.t_min * (ratio * j as f64).exp()).collect();
        let runs = par_map(self.replicas, |k| {
            let mut w = Vrjp::new(&lp)?;
            let mut rng = root.replica(k).rng();
            let mut reach: i64 = 0;
            let mut out = Vec::with_capacity(times.len());
            for &t in &times {
                w.advance(t, &mut rng, |_, s| reach = reach.max(s.abs()));
                out.push(((reach.max(1) as f64) * spacing).ln());
            }
            Ok((out, w.absorbed()))
        })?;
        let kept: Vec<&Vec<f64>> = runs.iter().filter(|r| !r.1).map(|r| &r.0).collect();
        let mut stats = vec![Statistic::info("dropped", (runs.len() - kept.len()) as f64)];
        if kept.is_empty() {
            anyhow::bail!("every replica reached the domain boundary");
        }
        let lt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let lm: Vec<f64> = (0..times.len()).map(|j| kept.iter().map(|r| r[j]).sum::<f64>() / kept.len() as f64).collect();
        let fit = ols(&lt, &lm)?;
        stats.push(Statistic::diagnostic("slope", fit.slope, Rule::Within(self.band.0, self.band.1)));
        stats.push(Statistic::info("slope_se", fit.slope_se));
        stats.push(Statistic::info("reference_slope", 1.0 / 3.0));
        Ok(stats)
    }
}
