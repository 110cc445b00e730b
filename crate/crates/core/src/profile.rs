//! Initial occupation profiles `L0` and exact scale tables.
//!
//! Every profile is held internally as a piecewise-linear table covering its
//! domain (constants use two knots; the gaussian bump is compiled at a fixed
//! knot density). Scale integrals of `L0^-2` are then closed-form per
//! segment: on a piece where `L(r) = l + b (r - a)`,
//! `int_a^x L^-2 = (x - a) / (l (l + b (x - a)))`.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    Constant(f64),
    PiecewiseLinear,
    /// `1 + height * exp(-x^2 / (2 width^2))`, compiled to `per_unit`
    /// knots per unit length.
    Bump { height: f64, width: f64, per_unit: u32 },
    /// `lo` left of `a`, `hi` right of `b`, linear in between.
    Ramp { a: f64, b: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationProfile {
    pub kind: ProfileKind,
    pub domain: (f64, f64),
    knots: Vec<(f64, f64)>,
}

fn check_domain(domain: (f64, f64)) -> Result<()> {
    if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
        return Err(Error::invalid("domain must be a nonempty finite interval"));
    }
    Ok(())
}

impl OccupationProfile {
    pub fn constant(c: f64, domain: (f64, f64)) -> Result<Self> {
        check_domain(domain)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("constant profile must be positive"));
        }
        Ok(OccupationProfile {
            kind: ProfileKind::Constant(c),
            domain,
            knots: alloc::vec![(domain.0, c), (domain.1, c)],
        })
    }

    /// `L0 = 1` on `[-a, a]`.
    pub fn unit(a: f64) -> Result<Self> {
        Self::constant(1.0, (-a, a))
    }

    /// Knots are sorted by `x`; values beyond the outer knots are held flat.
    pub fn piecewise_linear(knots: &[(f64, f64)], domain: Option<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("piecewise-linear profile needs knots"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("profile knots must be strictly increasing in x"));
            }
        }
        if knots.iter().any(|k| !(k.1 > 0.0 && k.1.is_finite() && k.0.is_finite())) {
            return Err(Error::invalid("profile values must be positive and finite"));
        }
        let domain = domain.unwrap_or((knots[0].0, knots[knots.len() - 1].0));
        check_domain(domain)?;
        Ok(Self::from_table(ProfileKind::PiecewiseLinear, domain, knots))
    }

    pub fn bump(height: f64, width: f64, per_unit: u32, domain: (f64, f64)) -> Result<Self> {
        check_domain(domain)?;
        if !(height > -1.0 && width > 0.0 && per_unit > 0) {
            return Err(Error::invalid("bump needs height > -1, width > 0, per_unit > 0"));
        }
        let f = |x: f64| 1.0 + height * (-(x * x) / (2.0 * width * width)).exp();
        let cells = ((domain.1 - domain.0) * per_unit as f64).ceil().max(1.0) as usize;
        let h = (domain.1 - domain.0) / cells as f64;
        let knots: Vec<(f64, f64)> = (0..=cells)
            .map(|i| {
                let x = if i == cells { domain.1 } else { domain.0 + i as f64 * h };
                (x, f(x))
            })
            .collect();
        Ok(Self::from_table(ProfileKind::Bump { height, width, per_unit }, domain, &knots))
    }

    pub fn ramp(a: f64, b: f64, lo: f64, hi: f64, domain: (f64, f64)) -> Result<Self> {
        check_domain(domain)?;
        if !(a < b && lo > 0.0 && hi > 0.0) {
            return Err(Error::invalid("ramp needs a < b and positive levels"));
        }
        Ok(Self::from_table(ProfileKind::Ramp { a, b, lo, hi }, domain, &[(a, lo), (b, hi)]))
    }

    /// Restrict a flat-extended table to the domain, inserting the domain
    /// ends as knots.
    fn from_table(kind: ProfileKind, domain: (f64, f64), knots: &[(f64, f64)]) -> Self {
        let eval = |x: f64| interp(knots, x);
        let mut t = Vec::with_capacity(knots.len() + 2);
        t.push((domain.0, eval(domain.0)));
        t.extend(knots.iter().copied().filter(|k| k.0 > domain.0 && k.0 < domain.1));
        t.push((domain.1, eval(domain.1)));
        OccupationProfile { kind, domain, knots: t }
    }

    /// The knot table over the domain.
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_unit(&self) -> bool {
        self.knots.iter().all(|k| k.1 == 1.0)
    }

    /// `L0(x)`, held flat outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.knots, x)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    /// Multiply every value by `c` (same domain).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let kind = match self.kind {
            ProfileKind::Constant(v) => ProfileKind::Constant(c * v),
            _ => ProfileKind::PiecewiseLinear,
        };
        Ok(OccupationProfile {
            kind,
            domain: self.domain,
            knots: self.knots.iter().map(|&(x, l)| (x, c * l)).collect(),
        })
    }

    /// Whether `int_0^{+inf} L0^-2 = int_{-inf}^0 L0^-2 = inf` holds for the
    /// profile extended to the whole line. Every kind here has bounded tails
    /// (flat extension), so the check is symbolic and always succeeds; it is
    /// kept as an explicit guard for future kinds.
    pub fn non_explosive(&self) -> bool {
        match self.kind {
            ProfileKind::Constant(_) | ProfileKind::PiecewiseLinear => true,
            ProfileKind::Bump { height, .. } => height > -1.0,
            ProfileKind::Ramp { lo, hi, .. } => lo.is_finite() && hi.is_finite(),
        }
    }

    /// 64-bit fingerprint of the domain and knot table.
    pub fn fingerprint(&self) -> u64 {
        let words = [self.domain.0, self.domain.1]
            .into_iter()
            .chain(self.knots.iter().flat_map(|&(x, l)| [x, l]))
            .map(f64::to_bits);
        crate::rng::fnv64(words)
    }

    pub fn lattice_restrict(&self, n: u32) -> Result<LatticeProfile> {
        let scale = (n as f64).exp2();
        let lo = (self.domain.0 * scale).ceil();
        let hi = (self.domain.1 * scale).floor();
        if lo > hi {
            return Err(Error::invalid("domain contains no lattice site"));
        }
        let (lo, hi) = (lo as i64, hi as i64);
        let values = (lo..=hi).map(|i| self.eval(i as f64 / scale)).collect();
        Ok(LatticeProfile { n, lo, values })
    }

    /// `S0(x) = int_{x0}^x L0^-2`.
    pub fn scale_s0(&self, x0: f64) -> Result<ScaleTable> {
        if !self.contains(x0) {
            return Err(Error::invalid("scale anchor outside the profile domain"));
        }
        let mut segs = Vec::with_capacity(self.knots.len() + 1);
        for w in self.knots.windows(2) {
            let ((xa, la), (xb, lb)) = (w[0], w[1]);
            let b = (lb - la) / (xb - xa);
            if x0 > xa && x0 < xb {
                segs.push(Segment { x: xa, l: la, b, f: 1.0 });
                segs.push(Segment { x: x0, l: self.eval(x0), b, f: 1.0 });
            } else {
                segs.push(Segment { x: xa, l: la, b, f: 1.0 });
            }
        }
        Ok(ScaleTable::from_segments(x0, segs, self.domain.1))
    }
}

fn interp(knots: &[(f64, f64)], x: f64) -> f64 {
    let n = knots.len();
    if x <= knots[0].0 {
        return knots[0].1;
    }
    if x >= knots[n - 1].0 {
        return knots[n - 1].1;
    }
    let j = knots.partition_point(|k| k.0 <= x);
    let (a, b) = (knots[j - 1], knots[j]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

/// `L0` on the sites `i 2^-n`, `i = lo..lo+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeProfile {
    pub n: u32,
    pub lo: i64,
    pub values: Vec<f64>,
}

impl LatticeProfile {
    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }
    pub fn contains(&self, i: i64) -> bool {
        i >= self.lo && i <= self.hi()
    }
    /// Value at site index `i` (site `i 2^-n`).
    pub fn at(&self, i: i64) -> f64 {
        self.values[(i - self.lo) as usize]
    }
    pub fn spacing(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }
    pub fn site(&self, i: i64) -> f64 {
        i as f64 * self.spacing()
    }
}

/// One piece of a scale table: for `r` in `[x, next.x]`,
/// `S(r) = S(x) + f (r - x) / (l (l + b (r - x)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub x: f64,
    pub l: f64,
    pub b: f64,
    pub f: f64,
}

impl Segment {
    #[inline]
    fn delta(&self, dr: f64) -> f64 {
        self.f * dr / (self.l * (self.l + self.b * dr))
    }
    #[inline]
    fn inv_delta(&self, ds: f64) -> f64 {
        let d = ds / self.f;
        d * self.l * self.l / (1.0 - self.b * self.l * d)
    }
}

/// Strictly increasing function given by exact closed-form pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTable {
    pub x0: f64,
    segs: Vec<Segment>,
    /// `S` at each segment start, plus the right end.
    s: Vec<f64>,
    x_end: f64,
}

impl ScaleTable {
    pub(crate) fn from_segments(x0: f64, segs: Vec<Segment>, x_end: f64) -> Self {
        let m = segs.len();
        let widths: Vec<f64> = (0..m)
            .map(|i| {
                let next = if i + 1 < m { segs[i + 1].x } else { x_end };
                segs[i].delta(next - segs[i].x)
            })
            .collect();
        // Sum outward from the anchor so S(x0) = 0 exactly.
        let k0 = segs.partition_point(|s| s.x <= x0).saturating_sub(1);
        let mut s = alloc::vec![0.0; m + 1];
        let base = segs[k0].delta(x0 - segs[k0].x);
        s[k0] = -base;
        for i in (0..k0).rev() {
            s[i] = s[i + 1] - widths[i];
        }
        for i in k0..m {
            s[i + 1] = if i == k0 { widths[i] - base } else { s[i] + widths[i] };
        }
        ScaleTable { x0, segs, s, x_end }
    }

    /// Table range in `x`.
    pub fn x_range(&self) -> (f64, f64) {
        (self.segs[0].x, self.x_end)
    }

    /// Table range in `S`.
    pub fn s_range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    /// `(x, S(x))` at every knot.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.segs.iter().zip(&self.s).map(|(g, s)| (g.x, *s)).collect();
        v.push((self.x_end, self.s[self.s.len() - 1]));
        v
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.x_range();
        if !(x >= lo && x <= hi) {
            return Err(Error::Range { value: x, lo, hi });
        }
        if x == self.x0 {
            return Ok(0.0);
        }
        let i = self.segs.partition_point(|g| g.x <= x).saturating_sub(1);
        let g = &self.segs[i];
        Ok(self.s[i] + g.delta(x - g.x))
    }

    /// The unique `x` with `S(x) = y`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.s_range();
        if !(y >= lo && y <= hi) {
            return Err(Error::Range { value: y, lo, hi });
        }
        if y == 0.0 {
            return Ok(self.x0);
        }
        let m = self.segs.len();
        let i = self.s[..m].partition_point(|&s| s <= y).saturating_sub(1);
        let g = &self.segs[i];
        let next = if i + 1 < m { self.segs[i + 1].x } else { self.x_end };
        Ok((g.x + g.inv_delta(y - self.s[i])).min(next))
    }

    /// Composite table `x -> F(S(x))` where `F` is piecewise linear in `S`
    /// with breakpoints `ys` and slopes `slopes[k]` on `[ys[k], ys[k+1]]`.
    /// The result stays exact per piece.
    pub(crate) fn compose_linear(&self, ys: &[f64], slopes: &[f64], x0: f64) -> Result<ScaleTable> {
        let mut segs: Vec<Segment> = Vec::new();
        let mut cuts: Vec<f64> = Vec::new();
        for &y in ys {
            let (lo, hi) = self.s_range();
            if y > lo && y < hi {
                cuts.push(self.invert(y)?);
            }
        }
        let mut xs: Vec<f64> = self.segs.iter().map(|g| g.x).chain(cuts).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        for &x in &xs {
            let i = self.segs.partition_point(|g| g.x <= x).saturating_sub(1);
            let g = self.segs[i];
            let l = g.l + g.b * (x - g.x);
            // slope of F at S(x) from the right
            let sx = self.eval(x)?;
            let k = ys.partition_point(|&y| y <= sx).saturating_sub(1).min(slopes.len() - 1);
            segs.push(Segment { x, l, b: g.b, f: g.f * slopes[k] });
        }
        Ok(ScaleTable::from_segments(x0, segs, self.x_end))
    }
}
