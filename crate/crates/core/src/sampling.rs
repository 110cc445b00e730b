//! Samplers for the laws that appear in the mixing measures.
//!
//! Gaussian draws use the Marsaglia polar method, fixed for every build so
//! that seeded runs reproduce.
//! Gamma, inverse-Gaussian, exponential and Poisson draws are delegated to
//! `rand_distr`.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, InverseGaussian, Poisson};

use crate::{Error, Result};

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal by the polar method. The second variate of each accepted
/// pair is discarded so the routine stays stateless.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let a = 2.0 * rng.random::<f64>() - 1.0;
        let b = 2.0 * rng.random::<f64>() - 1.0;
        let s = a * a + b * b;
        if s > 0.0 && s < 1.0 {
            return a * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Gamma(shape, scale 1).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::invalid("gamma shape must be positive"));
    }
    let g = Gamma::new(shape, 1.0).map_err(|_| Error::invalid("gamma shape"))?;
    Ok(g.sample(rng))
}

/// Inverse Gaussian IG(mean, shape): variance mean^3 / shape.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> Result<f64> {
    if !(mean > 0.0 && shape > 0.0 && mean.is_finite() && shape.is_finite()) {
        return Err(Error::invalid("inverse-Gaussian parameters must be positive"));
    }
    let ig = InverseGaussian::new(mean, shape).map_err(|_| Error::invalid("inverse-Gaussian"))?;
    Ok(ig.sample(rng))
}

/// Draw V with density `sqrt(K/(4π)) exp(-K sinh(v/2)^2 + v/2)`.
///
/// `exp(-V)` is IG(1, K/2); the change of variables `z = e^{-v}` turns one
/// density into the other, so the draw is exact.
pub fn sample_sinh_v<R: Rng + ?Sized>(k: f64, rng: &mut R) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid("sinh-density parameter K must be positive"));
    }
    let z = sample_inverse_gaussian(1.0, 0.5 * k, rng)?;
    Ok(-z.ln())
}

/// Log-density of the law sampled by [`sample_sinh_v`].
pub fn sinh_v_log_density(k: f64, v: f64) -> f64 {
    let s = (0.5 * v).sinh();
    0.5 * (k / (4.0 * core::f64::consts::PI)).ln() - k * s * s + 0.5 * v
}

/// Poisson(mean); zero mean gives zero.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<f64> {
    if mean == 0.0 {
        return Ok(0.0);
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::invalid("Poisson mean must be nonnegative"));
    }
    let p = Poisson::new(mean).map_err(|_| Error::invalid("Poisson mean out of range"))?;
    Ok(p.sample(rng))
}

/// Number of failures before the `successes`-th success in Bernoulli(p)
/// trials, via the gamma-Poisson mixture (valid for huge counts).
pub fn sample_negative_binomial<R: Rng + ?Sized>(successes: f64, p: f64, rng: &mut R) -> Result<f64> {
    if successes == 0.0 {
        return Ok(0.0);
    }
    if !(p > 0.0 && p <= 1.0) || !(successes > 0.0) {
        return Err(Error::invalid("negative binomial parameters"));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let rate = sample_gamma(successes, rng)? * (1.0 - p) / p;
    sample_poisson(rate, rng)
}
