//! Driving Brownian paths on a uniform grid.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::sampling::standard_normal;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub du: f64,
    /// `values[k] = B(k du)`, `values[0] = 0`.
    pub values: Vec<f64>,
}

impl BrownianPath {
    /// The identically zero driver on `K = ceil(u_max/du)` steps.
    pub fn zero(du: f64, u_max: f64) -> Result<Self> {
        let k = steps(du, u_max)?;
        Ok(BrownianPath { du, values: alloc::vec![0.0; k + 1] })
    }

    /// Linear driver `B(u) = slope * u`.
    pub fn linear(du: f64, u_max: f64, slope: f64) -> Result<Self> {
        let k = steps(du, u_max)?;
        Ok(BrownianPath { du, values: (0..=k).map(|i| slope * i as f64 * du).collect() })
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn u_max(&self) -> f64 {
        self.steps() as f64 * self.du
    }

    /// Piecewise-linear evaluation; clamps to the path's time range.
    pub fn at(&self, u: f64) -> f64 {
        let k = self.steps();
        if u <= 0.0 {
            return self.values[0];
        }
        let s = u / self.du;
        let i = (s.floor() as usize).min(k);
        if i >= k {
            return self.values[k];
        }
        let w = s - i as f64;
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Path of `B(u0 + .) - B(u0)` for a grid index `k0`.
    pub fn shifted(&self, k0: usize) -> BrownianPath {
        let b0 = self.values[k0];
        BrownianPath { du: self.du, values: self.values[k0..].iter().map(|b| b - b0).collect() }
    }
}

fn steps(du: f64, u_max: f64) -> Result<usize> {
    if !(du > 0.0 && du.is_finite()) {
        return Err(Error::invalid("du must be positive"));
    }
    if !(u_max > 0.0 && u_max.is_finite()) || u_max < du {
        return Err(Error::invalid("u_max must be at least du"));
    }
    // u_max/du can land a hair above an integer through rounding.
    let r = u_max / du;
    let n = r.round();
    Ok(if (r - n).abs() <= 1e-9 * n { n as usize } else { r.ceil() as usize })
}

pub fn brownian_path(du: f64, u_max: f64, stream: RngStream) -> Result<BrownianPath> {
    let k = steps(du, u_max)?;
    let mut rng = stream.rng();
    let sd = du.sqrt();
    let mut values = Vec::with_capacity(k + 1);
    let mut b = 0.0;
    values.push(b);
    for _ in 0..k {
        b += sd * standard_normal(&mut rng);
        values.push(b);
    }
    Ok(BrownianPath { du, values })
}

/// Refine by `factor` (a power of two) with successive Brownian-bridge
/// midpoints. Coarse grid values are kept bit-for-bit.
pub fn refine_path(path: &BrownianPath, factor: u32, stream: RngStream) -> Result<BrownianPath> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::invalid("refinement factor must be a power of two"));
    }
    let mut rng = stream.rng();
    let mut cur = path.clone();
    let mut f = factor;
    while f > 1 {
        let h = cur.du;
        let sd = (h / 4.0).sqrt();
        let mut values = Vec::with_capacity(2 * cur.values.len() - 1);
        for w in cur.values.windows(2) {
            values.push(w[0]);
            values.push(0.5 * (w[0] + w[1]) + sd * standard_normal(&mut rng));
        }
        values.push(*cur.values.last().unwrap());
        cur = BrownianPath { du: h / 2.0, values };
        f /= 2;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size_and_origin() {
        let p = brownian_path(1.0, 3.0, RngStream::new(1, 2)).unwrap();
        assert_eq!(p.values.len(), 4);
        assert_eq!(p.values[0], 0.0);
        let p = brownian_path(1e-4, 1.0, RngStream::new(1, 2)).unwrap();
        assert_eq!(p.steps(), 10_000);
        let p = brownian_path(0.3, 1.0, RngStream::new(1, 2)).unwrap();
        assert_eq!(p.steps(), 4);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(brownian_path(0.0, 1.0, RngStream::new(1, 0)).is_err());
        assert!(brownian_path(-1.0, 1.0, RngStream::new(1, 0)).is_err());
        assert!(brownian_path(1.0, 0.5, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn increments_have_variance_du() {
        let du = 0.01;
        let p = brownian_path(du, 10_000.0, RngStream::new(9, 0)).unwrap();
        let n = p.steps() as f64;
        let inc: Vec<f64> = p.values.windows(2).map(|w| w[1] - w[0]).collect();
        let m = inc.iter().sum::<f64>() / n;
        let v = inc.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        assert!((v / du - 1.0).abs() < 0.01, "{v}");
        let k4 = inc.iter().map(|x| x.powi(4)).sum::<f64>() / n / (du * du);
        assert!((k4 - 3.0).abs() < 0.05, "{k4}");
    }

    #[test]
    fn determinism() {
        let a = brownian_path(0.1, 5.0, RngStream::new(3, 4)).unwrap();
        let b = brownian_path(0.1, 5.0, RngStream::new(3, 4)).unwrap();
        assert_eq!(a, b);
        let c = brownian_path(0.1, 5.0, RngStream::new(3, 5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn refine_identity_and_pinning() {
        let p = brownian_path(0.1, 2.0, RngStream::new(3, 4)).unwrap();
        assert_eq!(refine_path(&p, 1, RngStream::new(0, 0)).unwrap(), p);
        let r = refine_path(&p, 8, RngStream::new(0, 1)).unwrap();
        assert_eq!(r.steps(), 8 * p.steps());
        for (k, v) in p.values.iter().enumerate() {
            assert_eq!(r.values[8 * k], *v);
        }
        assert!(refine_path(&p, 3, RngStream::new(0, 0)).is_err());
        assert!(refine_path(&p, 0, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn bridge_midpoint_variance() {
        // Oracle: midpoints of an independently generated fine path, measured
        // against the chord of its even-indexed values.
        let du = 1.0;
        let n = 1_000_000;
        let fine = brownian_path(du / 2.0, n as f64 * du, RngStream::new(17, 0)).unwrap();
        let oracle: f64 = (0..n)
            .map(|k| {
                let d = fine.values[2 * k + 1] - 0.5 * (fine.values[2 * k] + fine.values[2 * k + 2]);
                d * d
            })
            .sum::<f64>()
            / n as f64;
        let coarse = BrownianPath::zero(du, n as f64 * du).unwrap();
        let r = refine_path(&coarse, 2, RngStream::new(17, 1)).unwrap();
        let v: f64 = (0..n).map(|k| r.values[2 * k + 1].powi(2)).sum::<f64>() / n as f64;
        assert!((v / (du / 4.0) - 1.0).abs() < 0.01, "{v}");
        assert!((oracle / (du / 4.0) - 1.0).abs() < 0.01, "{oracle}");
    }

    #[test]
    fn interpolation_and_shift() {
        let p = BrownianPath::linear(0.5, 2.0, 2.0).unwrap();
        assert!((p.at(0.75) - 1.5).abs() < 1e-15);
        assert_eq!(p.at(10.0), 4.0);
        let s = p.shifted(2);
        assert_eq!(s.values, [0.0, 1.0, 2.0]);
    }
}
