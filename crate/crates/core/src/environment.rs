//! Random environments: the discrete potential `U^(n)`, the continuous
//! potential `U = sqrt(2) W(S0) + |S0|`, the gamma / `U-hat` pair of the
//! ERRW representation, and natural scales.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::profile::{OccupationProfile, ScaleTable, Segment};
use crate::sampling::{sample_gamma, sample_sinh_v, standard_normal};
use crate::{Error, Result, RngStream};

/// `U^(n)` on the sites `lo..lo+len` of `2^-n Z`, with `U(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnvironment {
    pub n: u32,
    pub lo: i64,
    pub values: Vec<f64>,
}

impl DiscreteEnvironment {
    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }
    pub fn at(&self, i: i64) -> f64 {
        self.values[(i - self.lo) as usize]
    }
    pub fn fingerprint(&self) -> u64 {
        crate::rng::fnv64(
            [self.n as u64, self.lo as u64].into_iter().chain(self.values.iter().map(|v| v.to_bits())),
        )
    }
}

/// Increments from the sinh density with `K = 2^n L0(x) L0(x - 2^-n)` on
/// each edge, summed outward from 0. The two branches use separate
/// sub-streams, so they are independent.
pub fn sample_discrete_env(profile: &OccupationProfile, n: u32, stream: RngStream) -> Result<DiscreteEnvironment> {
    let lp = profile.lattice_restrict(n)?;
    if !lp.contains(0) {
        return Err(Error::invalid("site 0 outside the lattice domain"));
    }
    let dens = (n as f64).exp2();
    let mut values = alloc::vec![0.0; lp.values.len()];
    let z = (0 - lp.lo) as usize;
    let mut rng = stream.named("right").rng();
    for k in z + 1..values.len() {
        let kk = dens * lp.values[k] * lp.values[k - 1];
        values[k] = values[k - 1] + sample_sinh_v(kk, &mut rng)?;
    }
    let mut rng = stream.named("left").rng();
    for k in (0..z).rev() {
        let kk = dens * lp.values[k] * lp.values[k + 1];
        values[k] = values[k + 1] + sample_sinh_v(kk, &mut rng)?;
    }
    Ok(DiscreteEnvironment { n, lo: lp.lo, values })
}

/// `U(x) = sqrt(2) W(S0(x)) + |S0(x)|`, with `W` a two-sided Brownian path
/// stored on the grid `y = k dy`, `k = k_lo..`, and interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEnvironment {
    pub s0: ScaleTable,
    pub dy: f64,
    pub k_lo: i64,
    pub w: Vec<f64>,
}

/// Grid step matching a mesh-`m` lattice: the `S0`-image of `2^-m` where
/// `L0` is largest, i.e. the finest image cell.
pub fn default_dy(profile: &OccupationProfile, m: u32) -> f64 {
    let lmax = profile.knots().iter().map(|k| k.1).fold(0.0, f64::max);
    (-(m as f64)).exp2() / (lmax * lmax)
}

fn y_grid(s0: &ScaleTable, dy: f64) -> (i64, i64) {
    let (a, b) = s0.s_range();
    ((a / dy).floor() as i64, (b / dy).ceil() as i64)
}

impl ContinuousEnvironment {
    /// The environment with `U = 0`, i.e. `W(y) = -|y| / sqrt(2)`.
    pub fn zero(profile: &OccupationProfile, dy: f64) -> Result<Self> {
        Self::from_w(profile, dy, |y| -y.abs() / core::f64::consts::SQRT_2)
    }

    /// Build from an explicit `W` evaluated on the grid (tests, overrides).
    pub fn from_w(profile: &OccupationProfile, dy: f64, w: impl Fn(f64) -> f64) -> Result<Self> {
        if !(dy > 0.0 && dy.is_finite()) {
            return Err(Error::invalid("grid step must be positive"));
        }
        let s0 = profile.scale_s0(0.0)?;
        let (k_lo, k_hi) = y_grid(&s0, dy);
        let w = (k_lo..=k_hi).map(|k| w(k as f64 * dy)).collect();
        Ok(ContinuousEnvironment { s0, dy, k_lo, w })
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.w.len() as i64 - 1
    }

    fn w_at(&self, y: f64) -> f64 {
        let s = y / self.dy - self.k_lo as f64;
        let i = (s.floor().max(0.0) as usize).min(self.w.len() - 2);
        let f = s - i as f64;
        self.w[i] + f * (self.w[i + 1] - self.w[i])
    }

    /// `U` on the grid point `k`.
    pub fn u_grid(&self, k: i64) -> f64 {
        let y = k as f64 * self.dy;
        core::f64::consts::SQRT_2 * self.w[(k - self.k_lo) as usize] + y.abs()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let y = self.s0.eval(x)?;
        Ok(core::f64::consts::SQRT_2 * self.w_at(y) + y.abs())
    }

    /// Values at the sites of `2^-m Z` inside the profile domain.
    pub fn on_lattice(&self, profile: &OccupationProfile, m: u32) -> Result<DiscreteEnvironment> {
        let lp = profile.lattice_restrict(m)?;
        let values = (lp.lo..=lp.hi()).map(|i| self.eval(lp.site(i))).collect::<Result<Vec<_>>>()?;
        Ok(DiscreteEnvironment { n: m, lo: lp.lo, values })
    }

    pub fn fingerprint(&self) -> u64 {
        crate::rng::fnv64(
            [self.dy.to_bits(), self.k_lo as u64].into_iter().chain(self.w.iter().map(|v| v.to_bits())),
        )
    }
}

pub fn sample_continuous_env(profile: &OccupationProfile, dy: f64, stream: RngStream) -> Result<ContinuousEnvironment> {
    let mut env = ContinuousEnvironment::from_w(profile, dy, |_| 0.0)?;
    let sd = dy.sqrt();
    let z = (0 - env.k_lo) as usize;
    let mut rng = stream.named("right").rng();
    for k in z + 1..env.w.len() {
        env.w[k] = env.w[k - 1] + sd * standard_normal(&mut rng);
    }
    let mut rng = stream.named("left").rng();
    for k in (0..z).rev() {
        env.w[k] = env.w[k + 1] + sd * standard_normal(&mut rng);
    }
    Ok(env)
}

/// Per-edge `gamma(x - 2^-n, x)` and the partial sums `U-hat`.
/// `gamma[k]` belongs to the edge between sites `lo + k - 1` and `lo + k`
/// (`gamma[0]` is unused and zero).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEnvironment {
    pub n: u32,
    pub lo: i64,
    pub gamma: Vec<f64>,
    pub uhat: Vec<f64>,
}

impl GammaEnvironment {
    pub fn hi(&self) -> i64 {
        self.lo + self.uhat.len() as i64 - 1
    }
}

pub fn sample_gamma_env(profile: &OccupationProfile, n: u32, stream: RngStream) -> Result<GammaEnvironment> {
    let lp = profile.lattice_restrict(n)?;
    if !lp.contains(0) {
        return Err(Error::invalid("site 0 outside the lattice domain"));
    }
    let half = (n as f64 - 1.0).exp2();
    let len = lp.values.len();
    let mut gamma = alloc::vec![0.0; len];
    let mut rng = stream.named("gamma").rng();
    for k in 1..len {
        gamma[k] = sample_gamma(half * lp.values[k - 1] * lp.values[k], &mut rng)?;
    }
    let mut uhat = alloc::vec![0.0; len];
    let z = (0 - lp.lo) as usize;
    let mut rng = stream.named("right").rng();
    for k in z + 1..len {
        uhat[k] = uhat[k - 1] + sample_sinh_v(2.0 * gamma[k], &mut rng)?;
    }
    let mut rng = stream.named("left").rng();
    for k in (0..z).rev() {
        uhat[k] = uhat[k + 1] + sample_sinh_v(2.0 * gamma[k + 1], &mut rng)?;
    }
    Ok(GammaEnvironment { n, lo: lp.lo, gamma, uhat })
}

/// Environment accepted by [`natural_scale`].
pub enum EnvRef<'a> {
    Discrete(&'a DiscreteEnvironment),
    Continuous(&'a ContinuousEnvironment),
}

/// Natural scale anchored at 0.
///
/// Continuous: `int_0^x L0^-2 e^(2U)`, by trapezoid in `y = S0(x)` with
/// `e^(2U)` exact at the grid points. Discrete: per-edge increments
/// `2^-n L0(x)^-1 L0(x - 2^-n)^-1 e^(U(x) + U(x - 2^-n))`, linear between
/// sites.
pub fn natural_scale(env: EnvRef<'_>, profile: &OccupationProfile) -> Result<ScaleTable> {
    match env {
        EnvRef::Continuous(e) => {
            let ys: Vec<f64> = (e.k_lo..=e.k_hi()).map(|k| k as f64 * e.dy).collect();
            let ex: Vec<f64> = (e.k_lo..=e.k_hi()).map(|k| (2.0 * e.u_grid(k)).exp()).collect();
            let slopes: Vec<f64> = ex.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            e.s0.compose_linear(&ys[..ys.len() - 1], &slopes, 0.0)
        }
        EnvRef::Discrete(e) => {
            let lp = profile.lattice_restrict(e.n)?;
            if lp.lo != e.lo || lp.values.len() != e.values.len() {
                return Err(Error::invalid("environment and profile lattices differ"));
            }
            if !lp.contains(0) {
                return Err(Error::invalid("site 0 outside the lattice domain"));
            }
            let h = lp.spacing();
            let len = e.values.len();
            if len < 2 {
                return Err(Error::invalid("lattice has a single site"));
            }
            let segs = (0..len - 1)
                .map(|k| {
                    let inc = h / (lp.values[k] * lp.values[k + 1]) * (e.values[k] + e.values[k + 1]).exp();
                    Segment { x: lp.site(lp.lo + k as i64), l: 1.0, b: 0.0, f: inc / h }
                })
                .collect();
            Ok(ScaleTable::from_segments(0.0, segs, lp.site(lp.hi())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn discrete_env_anchor_and_moments() {
        let p = OccupationProfile::unit(1.0).unwrap();
        let n = 8;
        let reps = 100_000;
        let root = RngStream::new(21, 0);
        let mut at1 = Vec::with_capacity(reps);
        let mut left = Vec::with_capacity(reps);
        for r in 0..reps {
            let e = sample_discrete_env(&p, n, root.replica(r as u64)).unwrap();
            assert_eq!(e.at(0), 0.0);
            at1.push(e.at(256));
            left.push(e.at(-256));
        }
        let (m, v) = mean_var(&at1);
        assert!((m - 1.0).abs() < 0.02, "mean {m}");
        assert!((v - 2.0).abs() < 0.05, "var {v}");
        assert!(corr(&at1, &left).abs() < 4.0 / (reps as f64).sqrt());
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, va) = mean_var(a);
        let (mb, vb) = mean_var(b);
        let c = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
        c / (va * vb).sqrt()
    }

    #[test]
    fn continuous_env_moments() {
        let p = OccupationProfile::unit(2.0).unwrap();
        let reps = 100_000;
        let mut at1 = Vec::with_capacity(reps);
        let mut left = Vec::with_capacity(reps);
        for r in 0..reps {
            let e = sample_continuous_env(&p, 1.0 / 64.0, RngStream::new(3, r as u64)).unwrap();
            assert_eq!(e.eval(0.0).unwrap(), 0.0);
            at1.push(e.eval(1.0).unwrap());
            left.push(e.eval(-1.0).unwrap());
        }
        let (m, v) = mean_var(&at1);
        // standard errors: sqrt(2/1e5) = 0.0045 and 2 sqrt(2/1e5) = 0.009
        assert!((m - 1.0).abs() < 0.0135, "mean {m}");
        assert!((v - 2.0).abs() < 0.027, "var {v}");
        assert!(corr(&at1, &left).abs() < 4.0 / (reps as f64).sqrt());
    }

    #[test]
    fn gamma_env_moments() {
        let p = OccupationProfile::unit(1.0).unwrap();
        let reps = 10_000;
        let mut g = Vec::new();
        let mut sums = Vec::new();
        for r in 0..reps {
            let e = sample_gamma_env(&p, 4, RngStream::new(8, r)).unwrap();
            assert_eq!(e.uhat[(0 - e.lo) as usize], 0.0);
            g.extend_from_slice(&e.gamma[1..11]);
        }
        assert_eq!(g.len(), 100_000);
        let (m, _) = mean_var(&g);
        assert!((m - 8.0).abs() < 0.05, "{m}");
        for r in 0..2_000 {
            let e = sample_gamma_env(&p, 8, RngStream::new(9, r)).unwrap();
            let z = (0 - e.lo) as usize;
            sums.push(e.gamma[z + 1..=z + 256].iter().map(|g| 0.5 / g).sum::<f64>());
        }
        let (m, _) = mean_var(&sums);
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn natural_scale_examples() {
        let p = OccupationProfile::unit(3.0).unwrap();
        let e = ContinuousEnvironment::zero(&p, 1.0 / 32.0).unwrap();
        let s = natural_scale(EnvRef::Continuous(&e), &p).unwrap();
        for x in [-2.9, -1.0, 0.0, 0.3, 2.5] {
            assert!((s.eval(x).unwrap() - x).abs() < 1e-12);
        }
        let q = OccupationProfile::bump(1.0, 0.5, 32, (-3.0, 3.0)).unwrap();
        let c = 0.7;
        let e = ContinuousEnvironment::from_w(&q, 1.0 / 32.0, |y| (c - y.abs()) / core::f64::consts::SQRT_2).unwrap();
        let s = natural_scale(EnvRef::Continuous(&e), &q).unwrap();
        let s0 = q.scale_s0(0.0).unwrap();
        for x in [-2.9, -1.0, 0.0, 0.3, 2.5] {
            assert!((s.eval(x).unwrap() - (2.0 * c).exp() * s0.eval(x).unwrap()).abs() < 1e-12);
        }
        let lp = p.lattice_restrict(3).unwrap();
        let d = DiscreteEnvironment { n: 3, lo: lp.lo, values: alloc::vec![0.0; lp.values.len()] };
        let s = natural_scale(EnvRef::Discrete(&d), &p).unwrap();
        assert!((s.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn natural_scale_monotone_roundtrip() {
        let p = OccupationProfile::bump(0.5, 1.0, 16, (-2.0, 2.0)).unwrap();
        let mut rng = RngStream::new(0, 99).rng();
        for r in 0..10 {
            let e = sample_continuous_env(&p, 1.0 / 64.0, RngStream::new(1, r)).unwrap();
            let s = natural_scale(EnvRef::Continuous(&e), &p).unwrap();
            let d = sample_discrete_env(&p, 5, RngStream::new(2, r)).unwrap();
            let sd = natural_scale(EnvRef::Discrete(&d), &p).unwrap();
            for t in [&s, &sd] {
                assert!(t.knots().windows(2).all(|w| w[1].1 > w[0].1));
                let (a, b) = t.x_range();
                for _ in 0..200 {
                    let x = rng.random_range(a..b);
                    let back = t.invert(t.eval(x).unwrap()).unwrap();
                    assert!((back - x).abs() < 1e-10, "{x} {back}");
                }
            }
        }
    }

    #[test]
    fn env_fingerprint_tracks_content() {
        let p = OccupationProfile::unit(1.0).unwrap();
        let a = sample_continuous_env(&p, 0.01, RngStream::new(1, 1)).unwrap();
        let b = sample_continuous_env(&p, 0.01, RngStream::new(1, 1)).unwrap();
        let c = sample_continuous_env(&p, 0.01, RngStream::new(1, 2)).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
