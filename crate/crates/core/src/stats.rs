//! Small statistics toolkit: two-sample KS, Wilson intervals, least
//! squares, and the drifted-Brownian race oracle.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;

use crate::sampling::standard_normal;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("sample contains NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value at
/// effective size `n_a n_b / (n_a + n_b)`. Ties are stepped over together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS samples must be nonempty"));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] == x {
            i += 1;
        }
        while j < nb && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    Ok(KsResult { d, p: kolmogorov_q(ne.sqrt() * d), n_a: na, n_b: nb })
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// One-sample KS statistic against a continuous `cdf`, with the asymptotic
/// p-value. Returns `(D, p)`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::invalid("KS sample must be nonempty"));
    }
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok((d, kolmogorov_q(n.sqrt() * d)))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series, fast for small lambda
        let c = -PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            s += (c * m * m).exp();
        }
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Wilson score interval for `hits` successes out of `n` at `z` standard
/// errors.
pub fn wilson(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let mid = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares of `y` on `x` with intercept.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("regression needs at least three paired points"));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("regressor is constant"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (rss / (x.len() as f64 - 2.0) / sxx).sqrt();
    Ok(LinearFit { slope, intercept, slope_se })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceEstimate {
    pub p: f64,
    pub hits: u64,
    pub replicas: u64,
}

impl RaceEstimate {
    pub fn std_error(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.replicas as f64).sqrt()
    }
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson(self.hits, self.replicas, z)
    }
}

/// One replica of the race: does `B_u + u` reach `y2` before `B_u - u`
/// reaches `y1`?
///
/// Equivalently `B` leaves the closing corridor `(y1 + u, y2 - u)` through
/// the top. Steps adapt to the corridor width `w` (`h = (w/6)^2`, at most
/// `0.01`, at least `step`); within a step, crossing of each straight
/// boundary is decided by the exact Brownian-bridge probability
/// `exp(-2 d0 d1 / h)`.
pub fn race_once<R: Rng + ?Sized>(y1: f64, y2: f64, step: f64, rng: &mut R) -> bool {
    let u_close = 0.5 * (y2 - y1);
    let (mut u, mut b) = (0.0, 0.0);
    loop {
        let w = y2 - y1 - 2.0 * u;
        let h = (w * w / 36.0).clamp(step, 0.01).min(u_close - u);
        let b1 = b + h.sqrt() * standard_normal(rng);
        let u1 = u + h;
        let (up0, up1) = (y2 - u - b, y2 - u1 - b1);
        let (dn0, dn1) = (b - y1 - u, b1 - y1 - u1);
        if up1 <= 0.0 && dn1 <= 0.0 {
            // only possible at the closing time; both boundaries coincide
            return rng.random::<bool>();
        }
        if up1 <= 0.0 {
            return true;
        }
        if dn1 <= 0.0 {
            return false;
        }
        let p_up = (-2.0 * up0 * up1 / h).exp();
        let p_dn = (-2.0 * dn0 * dn1 / h).exp();
        if p_up + p_dn > 0.0 && rng.random::<f64>() < p_up + p_dn - p_up * p_dn {
            return rng.random::<f64>() * (p_up + p_dn) < p_up;
        }
        u = u1;
        b = b1;
        if u >= u_close {
            // the corridor has closed with B strictly inside: measure zero
            return rng.random::<bool>();
        }
    }
}

/// Monte Carlo estimate of `P(U_up(y2) < U_down(y1))`.
pub fn race_oracle(y1: f64, y2: f64, step: f64, replicas: u64, stream: RngStream) -> Result<RaceEstimate> {
    if !(y1 < 0.0 && y2 > 0.0) || !(step > 0.0) || replicas == 0 {
        return Err(Error::invalid("race oracle needs y1 < 0 < y2, step > 0, replicas > 0"));
    }
    let hits = (0..replicas).filter(|&k| race_once(y1, y2, step, &mut stream.replica(k).rng())).count() as u64;
    Ok(RaceEstimate { p: hits as f64 / replicas as f64, hits, replicas })
}
