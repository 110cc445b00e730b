//! The convergent Bass-Burdzy flow `dY/du = -sign(Y - B_u)` against a
//! piecewise-linear driver, integrated exactly.
//!
//! On a driver segment of slope `m` every flow line moves at `-1` (above
//! `B`), `+1` (below) or with `B` (sliding, possible only when `|m| <= 1`).
//! Meeting times are roots of linear equations. By monotonicity the tracked
//! lines always split into three contiguous index groups: below `[0, lo)`,
//! sliding `[lo, hi)` and above `[hi, N)`. Below lines are stored as
//! anchors `a` with `Y = a + u`, above lines with `Y = a - u`, so a step
//! costs O(1) plus one unit per line that changes group.
//!
//! Lines that slide together coincide from then on: against a
//! piecewise-linear driver the flow map is non-decreasing, not strictly
//! increasing. Merged stretches are `O(du)` long and vanish as the driver
//! is refined.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::borrow::Cow;
use alloc::vec::Vec;

use crate::brownian::BrownianPath;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Below,
    Sliding,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A line passes from below `B` to above it.
    CrossUp,
    /// A line passes from above `B` to below it.
    CrossDown,
    SlideBegin,
    SlideEnd,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::CrossUp => "cross_up",
            EventKind::CrossDown => "cross_down",
            EventKind::SlideBegin => "slide_begin",
            EventKind::SlideEnd => "slide_end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEvent {
    pub u: f64,
    /// Initial condition of the line (indices shift when the grid widens).
    pub y: f64,
    pub kind: EventKind,
}

/// Snapshot of all tracked lines.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: f64,
    /// Driver value `B(u)`.
    pub b: f64,
    pub y: Vec<f64>,
    pub psi: Vec<f64>,
    pub mode: Vec<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Extend the grid by this spacing whenever the outermost line on a
    /// side reaches the driver. `None` keeps the grid fixed.
    pub widen: Option<f64>,
    pub record_events: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { widen: None, record_events: false }
    }
}

/// Streaming integrator over one driver.
#[derive(Debug, Clone)]
pub struct FlowIntegrator<'a> {
    driver: Cow<'a, BrownianPath>,
    k: usize,
    y: Vec<f64>,
    anchor: Vec<f64>,
    lo: usize,
    hi: usize,
    opts: FlowOptions,
    /// Running minimum of the centred slope at each line (clamping).
    slope_min: Vec<f64>,
    drift: f64,
    events: Vec<FlowEvent>,
    widened: usize,
}

fn check_grid(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::invalid("flow grid is empty"));
    }
    if y.iter().any(|v| !v.is_finite()) || y.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("flow grid must be strictly increasing"));
    }
    Ok(())
}

impl<'a> FlowIntegrator<'a> {
    /// Start from the identity map at `u = 0`.
    pub fn new(driver: &'a BrownianPath, y_grid: &[f64], opts: FlowOptions) -> Result<Self> {
        check_grid(y_grid)?;
        Self::with_positions(driver, y_grid, y_grid, opts)
    }

    /// Start with line `i` (label `labels[i]`) at `positions[i]`, which must
    /// be non-decreasing. Used to restart a flow at an intermediate time.
    pub fn with_positions(driver: &'a BrownianPath, labels: &[f64], positions: &[f64], opts: FlowOptions) -> Result<Self> {
        Self::build(Cow::Borrowed(driver), labels, positions, opts)
    }

    fn build(driver: Cow<'a, BrownianPath>, labels: &[f64], positions: &[f64], opts: FlowOptions) -> Result<Self> {
        check_grid(labels)?;
        if labels.len() != positions.len() || positions.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("initial positions must be non-decreasing and match the labels"));
        }
        if let Some(h) = opts.widen {
            if !(h > 0.0) {
                return Err(Error::invalid("widening spacing must be positive"));
            }
        }
        let b0 = driver.values[0];
        let mut labels = labels.to_vec();
        let mut positions = positions.to_vec();
        if let Some(h) = opts.widen {
            while positions[positions.len() - 1] <= b0 {
                labels.push(labels[labels.len() - 1] + h);
                positions.push(positions[positions.len() - 1] + h);
            }
            while positions[0] >= b0 {
                labels.insert(0, labels[0] - h);
                positions.insert(0, positions[0] - h);
            }
        }
        let lo = positions.partition_point(|&p| p < b0);
        let mut it = FlowIntegrator {
            driver,
            k: 0,
            slope_min: alloc::vec![f64::INFINITY; labels.len()],
            y: labels,
            anchor: positions,
            lo,
            hi: lo,
            opts,
            drift: 0.0,
            events: Vec::new(),
            widened: 0,
        };
        it.widen_if_needed();
        Ok(it)
    }

    /// Integrator that owns its driver, so the driver can be extended.
    pub fn owned(driver: BrownianPath, y_grid: &[f64], opts: FlowOptions) -> Result<FlowIntegrator<'static>> {
        check_grid(y_grid)?;
        FlowIntegrator::build(Cow::Owned(driver), y_grid, y_grid, opts)
    }

    /// Append a continuation of the driver: `more` starts at 0 and is
    /// shifted to the current end point. The step sizes must agree.
    pub fn extend_driver(&mut self, more: &BrownianPath) -> Result<()> {
        if (more.du - self.driver.du).abs() > 1e-15 * self.driver.du {
            return Err(Error::invalid("driver continuation has a different step"));
        }
        let d = self.driver.to_mut();
        let end = d.values[d.values.len() - 1];
        let base = more.values[0];
        d.values.extend(more.values[1..].iter().map(|v| v - base + end));
        Ok(())
    }

    pub fn driver(&self) -> &BrownianPath {
        &self.driver
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.k as f64 * self.driver.du
    }
    #[inline]
    pub fn b(&self) -> f64 {
        self.driver.values[self.k]
    }
    pub fn step_index(&self) -> usize {
        self.k
    }
    pub fn done(&self) -> bool {
        self.k >= self.driver.steps()
    }
    pub fn len(&self) -> usize {
        self.y.len()
    }
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
    pub fn labels(&self) -> &[f64] {
        &self.y
    }
    pub fn groups(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }
    pub fn events(&self) -> &[FlowEvent] {
        &self.events
    }
    pub fn take_events(&mut self) -> Vec<FlowEvent> {
        core::mem::take(&mut self.events)
    }
    /// Lines added by widening so far.
    pub fn widened(&self) -> usize {
        self.widened
    }
    /// Largest upward correction applied by slope clamping.
    pub fn clamp_drift(&self) -> f64 {
        self.drift
    }

    #[inline]
    pub fn position(&self, i: usize) -> f64 {
        let u = self.u();
        if i < self.lo {
            self.anchor[i] + u
        } else if i < self.hi {
            self.b()
        } else {
            self.anchor[i] - u
        }
    }

    pub fn mode(&self, i: usize) -> Mode {
        if i < self.lo {
            Mode::Below
        } else if i < self.hi {
            Mode::Sliding
        } else {
            Mode::Above
        }
    }

    pub fn state(&self) -> FlowState {
        FlowState {
            u: self.u(),
            b: self.b(),
            y: self.y.clone(),
            psi: (0..self.y.len()).map(|i| self.position(i)).collect(),
            mode: (0..self.y.len()).map(|i| self.mode(i)).collect(),
        }
    }

    fn log(&mut self, u: f64, i: usize, kind: EventKind) {
        if self.opts.record_events {
            self.events.push(FlowEvent { u, y: self.y[i], kind });
        }
    }

    /// Keep an untouched line on each side of the driver. A line added
    /// next to one that has just reached `B` has never met it.
    fn widen_if_needed(&mut self) {
        let Some(h) = self.opts.widen else { return };
        while self.hi == self.y.len() {
            let y = self.y[self.y.len() - 1] + h;
            self.y.push(y);
            self.anchor.push(y);
            self.slope_min.push(f64::INFINITY);
            self.widened += 1;
        }
        while self.lo == 0 {
            let y = self.y[0] - h;
            self.y.insert(0, y);
            self.anchor.insert(0, y);
            self.slope_min.insert(0, f64::INFINITY);
            self.lo += 1;
            self.hi += 1;
            self.widened += 1;
        }
    }

    /// Advance one driver segment. Returns `false` once the driver ends.
    pub fn step(&mut self) -> bool {
        if self.done() {
            return false;
        }
        let du = self.driver.du;
        let u0 = self.u();
        let b0 = self.driver.values[self.k];
        let b1 = self.driver.values[self.k + 1];
        let m = (b1 - b0) / du;

        // sliding lines peel off when the driver outruns them
        if self.hi > self.lo && m.abs() > 1.0 {
            if m > 1.0 {
                for i in self.lo..self.hi {
                    self.anchor[i] = b0 - u0;
                    self.log(u0, i, EventKind::SlideEnd);
                }
                self.lo = self.hi;
            } else {
                for i in self.lo..self.hi {
                    self.anchor[i] = b0 + u0;
                    self.log(u0, i, EventKind::SlideEnd);
                }
                self.hi = self.lo;
            }
        }

        // above lines, lowest first
        let close = 1.0 + m;
        if close > 0.0 {
            loop {
                if self.hi == self.y.len() {
                    if self.opts.widen.is_none() {
                        break;
                    }
                    self.widen_if_needed();
                }
                let j = self.hi;
                let d = (self.anchor[j] - u0 - b0).max(0.0);
                if d > close * du {
                    break;
                }
                let tau = (d / close).min(du);
                if m > 1.0 {
                    self.anchor[j] = b0 + m * tau - (u0 + tau);
                    self.lo = j + 1;
                    self.hi = j + 1;
                    self.log(u0 + tau, j, EventKind::CrossDown);
                } else {
                    self.hi = j + 1;
                    self.log(u0 + tau, j, EventKind::SlideBegin);
                }
            }
        }

        // below lines, highest first
        let close = 1.0 - m;
        if close > 0.0 {
            loop {
                if self.lo == 0 {
                    if self.opts.widen.is_none() {
                        break;
                    }
                    self.widen_if_needed();
                }
                let j = self.lo - 1;
                let d = (b0 - self.anchor[j] - u0).max(0.0);
                if d > close * du {
                    break;
                }
                let tau = (d / close).min(du);
                if m < -1.0 {
                    self.anchor[j] = b0 + m * tau + (u0 + tau);
                    self.lo = j;
                    self.hi = j;
                    self.log(u0 + tau, j, EventKind::CrossUp);
                } else {
                    self.lo = j;
                    self.log(u0 + tau, j, EventKind::SlideBegin);
                }
            }
        }

        self.k += 1;
        if self.opts.widen.is_some() && (self.hi == self.y.len() || self.lo == 0) {
            self.widen_if_needed();
        }
        true
    }

    /// Run to step index `k` (clamped to the driver length).
    pub fn run_to(&mut self, k: usize) {
        while self.k < k && self.step() {}
    }

    /// `xi_u = Psi_u^{-1}(B_u)` by monotone piecewise-linear inversion; a
    /// flat stretch at `B_u` maps to its midpoint.
    pub fn xi(&self) -> Result<f64> {
        let b = self.b();
        if self.hi > self.lo {
            return Ok(0.5 * (self.y[self.lo] + self.y[self.hi - 1]));
        }
        let n = self.y.len();
        if self.lo == 0 || self.lo == n {
            return Err(Error::Range { value: b, lo: self.position(0), hi: self.position(n - 1) });
        }
        let (i, j) = (self.lo - 1, self.lo);
        let (pi, pj) = (self.position(i), self.position(j));
        let w = if pj > pi { (b - pi) / (pj - pi) } else { 0.5 };
        Ok(self.y[i] + w * (self.y[j] - self.y[i]))
    }

    /// Centred-difference slope at line `i` (one-sided at the ends).
    fn raw_slope(&self, i: usize) -> f64 {
        let n = self.y.len();
        let (a, c) = if n == 1 {
            return 1.0;
        } else if i == 0 {
            (0, 1)
        } else if i + 1 == n {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (self.position(c) - self.position(a)) / (self.y[c] - self.y[a])
    }

    /// Slope clamped to its running minimum (exact slopes never increase).
    fn slope(&mut self, i: usize) -> f64 {
        let s = self.raw_slope(i);
        let m = self.slope_min[i];
        if s > m {
            self.drift = self.drift.max(s - m);
            m
        } else {
            self.slope_min[i] = s;
            s
        }
    }

    /// `(Lcal, Lambda)` at line `i`, with `Lcal = -log(slope)/2` and
    /// `Lambda = (1 - exp(-2 Lcal))/2 = (1 - slope)/2`.
    pub fn local_time_at(&mut self, i: usize) -> (f64, f64) {
        let s = self.slope(i).min(1.0);
        (-0.5 * s.ln(), 0.5 * (1.0 - s))
    }

    /// `Lambda` at an arbitrary label by linear interpolation between the
    /// bracketing lines.
    pub fn lambda_at(&mut self, y: f64) -> Result<f64> {
        let n = self.y.len();
        if !(y >= self.y[0] && y <= self.y[n - 1]) {
            return Err(Error::Range { value: y, lo: self.y[0], hi: self.y[n - 1] });
        }
        let j = self.y.partition_point(|&v| v <= y).min(n - 1).max(1);
        let i = j - 1;
        let w = (y - self.y[i]) / (self.y[j] - self.y[i]);
        let (_, li) = self.local_time_at(i);
        let (_, lj) = self.local_time_at(j);
        Ok(li + w * (lj - li))
    }

    /// `(xi_u, Lambda_u(xi_u))`.
    ///
    /// On a merged stretch the centred slopes vanish; there the slope is
    /// the secant between the nearest unmerged lines on either side.
    pub fn xi_lambda(&mut self) -> Result<(f64, f64)> {
        let xi = self.xi()?;
        let n = self.y.len();
        if self.hi > self.lo + 1 && self.lo > 0 && self.hi < n {
            let (i, j) = (self.lo - 1, self.hi);
            let s = ((self.position(j) - self.position(i)) / (self.y[j] - self.y[i])).min(1.0);
            return Ok((xi, 0.5 * (1.0 - s)));
        }
        Ok((xi, self.lambda_at(xi)?))
    }

    /// `(Lcal, Lambda)` at every line, clamped.
    pub fn local_times(&mut self) -> (Vec<f64>, Vec<f64>) {
        (0..self.y.len()).map(|i| self.local_time_at(i)).unzip()
    }
}

/// Flow run with checkpoints every `stride` driver steps (plus the end).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub states: Vec<FlowState>,
    pub events: Vec<FlowEvent>,
    pub widened: usize,
}

pub fn flow_run(driver: &BrownianPath, y_grid: &[f64], u_max: f64, stride: usize, opts: FlowOptions) -> Result<FlowRun> {
    let steps = steps_for(driver, u_max)?;
    let stride = stride.max(1);
    let mut f = FlowIntegrator::new(driver, y_grid, opts)?;
    let mut states = alloc::vec![f.state()];
    while f.step_index() < steps {
        f.step();
        if f.step_index() % stride == 0 || f.step_index() == steps {
            states.push(f.state());
        }
    }
    Ok(FlowRun { states, events: f.take_events(), widened: f.widened() })
}

fn steps_for(driver: &BrownianPath, u_max: f64) -> Result<usize> {
    let k = (u_max / driver.du).round();
    if !(u_max > 0.0) || k as usize > driver.steps() || (k * driver.du - u_max).abs() > 1e-9 * u_max {
        return Err(Error::invalid("u_max must be a positive multiple of du within the driver"));
    }
    Ok(k as usize)
}

/// Inversion of a non-decreasing table at `b`.
pub fn invert_table(y: &[f64], psi: &[f64], b: f64) -> Result<f64> {
    let n = psi.len();
    let i = psi.partition_point(|&p| p < b);
    let j = psi.partition_point(|&p| p <= b);
    if i < j {
        return Ok(0.5 * (y[i] + y[j - 1]));
    }
    if i == 0 || i == n {
        return Err(Error::Range { value: b, lo: psi[0], hi: psi[n - 1] });
    }
    let w = (b - psi[i - 1]) / (psi[i] - psi[i - 1]);
    Ok(y[i - 1] + w * (y[i] - y[i - 1]))
}

/// `xi_u` at each checkpoint.
pub fn reduced_process(states: &[FlowState]) -> Result<Vec<(f64, f64)>> {
    states.iter().map(|s| Ok((s.u, invert_table(&s.y, &s.psi, s.b)?))).collect()
}

/// Per-checkpoint `(Lcal, Lambda)` by centred differences, clamped so that
/// both are non-decreasing in `u` at every label. Also returns the largest
/// clamping correction.
pub fn flow_local_times(states: &[FlowState]) -> Result<(Vec<(Vec<f64>, Vec<f64>)>, f64)> {
    let mut out = Vec::with_capacity(states.len());
    let mut drift: f64 = 0.0;
    let mut floor: Vec<(f64, f64)> = Vec::new();
    for s in states {
        let n = s.y.len();
        if n < 3 {
            return Err(Error::invalid("local times need at least three tracked points"));
        }
        // labels can only be added at the ends
        if floor.len() < n {
            let mut f2: Vec<(f64, f64)> = Vec::with_capacity(n);
            let left = if floor.is_empty() { 0 } else { s.y.partition_point(|&v| v < floor[0].0) };
            f2.extend(s.y[..left].iter().map(|&y| (y, f64::INFINITY)));
            f2.extend(floor.iter().copied());
            f2.extend(s.y[f2.len()..].iter().map(|&y| (y, f64::INFINITY)));
            floor = f2;
        }
        let mut lc = Vec::with_capacity(n);
        let mut la = Vec::with_capacity(n);
        for i in 0..n {
            let (a, c) = if i == 0 { (0, 1) } else if i + 1 == n { (n - 2, n - 1) } else { (i - 1, i + 1) };
            let mut sl = (s.psi[c] - s.psi[a]) / (s.y[c] - s.y[a]);
            let fl = &mut floor[i].1;
            if sl > *fl {
                drift = drift.max(sl - *fl);
                sl = *fl;
            } else {
                *fl = sl;
            }
            let sl = sl.min(1.0);
            lc.push(-0.5 * sl.ln());
            la.push(0.5 * (1.0 - sl));
        }
        out.push((lc, la));
    }
    Ok((out, drift))
}

/// Per-step trace of `xi_u` and `Lambda_u(xi_u)` on the driver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    pub du: f64,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Integrate over `steps` driver steps and record `xi` and `Lambda(xi)`
/// after every step (and at `u = 0`).
pub fn trace_reduced(driver: &BrownianPath, y_grid: &[f64], steps: usize, opts: FlowOptions) -> Result<ReducedTrace> {
    let mut f = FlowIntegrator::new(driver, y_grid, opts)?;
    let steps = steps.min(driver.steps());
    let mut xi = Vec::with_capacity(steps + 1);
    let mut lambda = Vec::with_capacity(steps + 1);
    loop {
        let (x, l) = f.xi_lambda()?;
        xi.push(x);
        lambda.push(l);
        if f.step_index() >= steps {
            break;
        }
        f.step();
    }
    Ok(ReducedTrace { du: driver.du, xi, lambda })
}

/// Uniform grid of `points` labels on `[-span, span]`.
pub fn uniform_grid(span: f64, points: usize) -> Result<Vec<f64>> {
    if !(span > 0.0) || points < 2 {
        return Err(Error::invalid("grid needs span > 0 and at least two points"));
    }
    let h = 2.0 * span / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { span } else { -span + i as f64 * h }).collect())
}

/// Occupation density of a path sampled every `du` (linear between
/// samples), on bins `[k w, (k+1) w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationBins {
    pub width: f64,
    pub k_lo: i64,
    pub density: Vec<f64>,
}

impl OccupationBins {
    pub fn center(&self, idx: usize) -> f64 {
        (self.k_lo + idx as i64) as f64 * self.width + 0.5 * self.width
    }
    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.width
    }
}

pub fn occupation_binning(path: &[f64], du: f64, bin_width: f64) -> Result<OccupationBins> {
    if !(bin_width > 0.0) || !(du > 0.0) || path.is_empty() {
        return Err(Error::invalid("binning needs a nonempty path, du > 0 and bin width > 0"));
    }
    let lo = path.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = path.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k_lo = (lo / bin_width).floor() as i64;
    let k_hi = (hi / bin_width).floor() as i64;
    let mut time = alloc::vec![0.0; (k_hi - k_lo + 1) as usize];
    let bin = |x: f64| (((x / bin_width).floor() as i64).clamp(k_lo, k_hi) - k_lo) as usize;
    if path.len() == 1 {
        return Ok(OccupationBins { width: bin_width, k_lo, density: time });
    }
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            time[bin(a)] += du;
            continue;
        }
        // split [a, b] at bin edges; time is proportional to distance
        let (s, e) = if a < b { (a, b) } else { (b, a) };
        let rate = du / (e - s);
        let (ks, ke) = (bin(s), bin(e));
        if ks == ke {
            time[ks] += du;
            continue;
        }
        let mut x = s;
        for k in ks..ke {
            let edge = (k_lo + k as i64 + 1) as f64 * bin_width;
            time[k] += (edge - x) * rate;
            x = edge;
        }
        time[ke] += (e - x) * rate;
    }
    Ok(OccupationBins { width: bin_width, k_lo, density: time.iter().map(|t| t / bin_width).collect() })
}

/// `sum (path[k+stride] - path[k])^2` over the sub-grid of every
/// `stride`-th sample.
pub fn quadratic_variation(path: &[f64], stride: usize) -> Result<f64> {
    if stride == 0 {
        return Err(Error::invalid("partition stride must be positive"));
    }
    Ok(path.iter().step_by(stride).collect::<Vec<_>>().windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::brownian_path;
    use crate::RngStream;

    #[test]
    fn zero_driver_descends_then_slides() {
        let d = BrownianPath::zero(1e-3, 2.0).unwrap();
        let ys = [0.25, 0.5, 1.0, 1.5, 2.5];
        let run = flow_run(&d, &ys, 2.0, 100, FlowOptions::default()).unwrap();
        for s in &run.states {
            for (y, p) in s.y.iter().zip(&s.psi) {
                assert!((p - (y - s.u).max(0.0)).abs() < 1e-12, "u {} y {y} p {p}", s.u);
            }
        }
        assert!(reduced_process(&run.states[..1]).is_err());
    }

    #[test]
    fn linear_driver_crossing() {
        let d = BrownianPath::linear(1e-3, 1.0, 2.0).unwrap();
        let ys = [-0.5, 0.3, 0.6, 0.9];
        let run = flow_run(&d, &ys, 1.0, 10, FlowOptions::default()).unwrap();
        for s in &run.states {
            for (y, p) in s.y.iter().zip(&s.psi) {
                let exp = if *y > 0.0 {
                    let us = y / 3.0;
                    if s.u <= us { y - s.u } else { y + s.u - 2.0 * us }
                } else {
                    y + s.u
                };
                assert!((p - exp).abs() < 1e-9, "u {} y {y} p {p} exp {exp}", s.u);
            }
        }
    }

    #[test]
    fn events_are_logged() {
        let d = BrownianPath::linear(1e-2, 1.0, 2.0).unwrap();
        let opts = FlowOptions { widen: None, record_events: true };
        let run = flow_run(&d, &[0.3], 1.0, 100, opts).unwrap();
        assert_eq!(run.events.len(), 1);
        assert_eq!(run.events[0].kind, EventKind::CrossDown);
        assert!((run.events[0].u - 0.1).abs() < 1e-12);
        let z = BrownianPath::zero(1e-2, 1.0).unwrap();
        let run = flow_run(&z, &[0.3], 1.0, 100, opts).unwrap();
        assert_eq!(run.events[0].kind, EventKind::SlideBegin);
    }

    #[test]
    fn monotone_and_lipschitz_on_brownian_driver() {
        let d = brownian_path(1e-4, 1.0, RngStream::new(4, 0)).unwrap();
        let ys = uniform_grid(4.0, 101).unwrap();
        let run = flow_run(&d, &ys, 1.0, 1, FlowOptions::default()).unwrap();
        for w in run.states.windows(2) {
            for i in 0..ys.len() {
                assert!(w[1].psi[i] - w[0].psi[i] <= d.du * (1.0 + 1e-9));
                assert!(w[0].psi[i] - w[1].psi[i] <= d.du * (1.0 + 1e-9));
            }
        }
        for s in &run.states {
            assert!(s.psi.windows(2).all(|p| p[1] >= p[0]));
        }
    }

    #[test]
    fn restart_reproduces_the_flow() {
        let d = brownian_path(1e-4, 1.0, RngStream::new(9, 0)).unwrap();
        let ys = uniform_grid(3.0, 61).unwrap();
        let mut f = FlowIntegrator::new(&d, &ys, FlowOptions::default()).unwrap();
        let k0 = 4321;
        f.run_to(k0);
        let b0 = d.values[k0];
        let shifted = d.shifted(k0);
        let start: Vec<f64> = (0..ys.len()).map(|i| f.position(i) - b0).collect();
        let mut g = FlowIntegrator::with_positions(&shifted, &ys, &start, FlowOptions::default()).unwrap();
        f.run_to(d.steps());
        g.run_to(shifted.steps());
        for i in 0..ys.len() {
            assert!((f.position(i) - (g.position(i) + b0)).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_starts_at_zero_and_brackets() {
        let d = brownian_path(1e-3, 1.0, RngStream::new(1, 3)).unwrap();
        let ys = uniform_grid(4.0, 81).unwrap();
        let mut f = FlowIntegrator::new(&d, &ys, FlowOptions::default()).unwrap();
        assert!(f.xi().unwrap().abs() < 1e-15);
        let z = BrownianPath::zero(1e-3, 1.0).unwrap();
        let dyadic: Vec<f64> = (-32..=32).map(|i| i as f64 * 0.125).collect();
        let mut g = FlowIntegrator::new(&z, &dyadic, FlowOptions::default()).unwrap();
        while !f.done() {
            f.step();
            g.step();
            let xi = f.xi().unwrap();
            let j = ys.partition_point(|&y| y <= xi);
            let b = f.b();
            if j > 0 && j < ys.len() {
                assert!(f.position(j - 1) <= b + 1e-12 && b <= f.position(j) + 1e-12);
            }
            assert!(g.xi().unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn local_time_endpoints_and_monotone() {
        let d = brownian_path(1e-3, 1.0, RngStream::new(2, 3)).unwrap();
        let ys = uniform_grid(3.0, 121).unwrap();
        let run = flow_run(&d, &ys, 1.0, 50, FlowOptions::default()).unwrap();
        let (lt, drift) = flow_local_times(&run.states).unwrap();
        assert!(lt[0].0.iter().all(|&v| v.abs() < 1e-12) && lt[0].1.iter().all(|&v| v.abs() < 1e-12));
        for w in lt.windows(2) {
            for i in 0..ys.len() {
                assert!(w[1].0[i] >= w[0].0[i]);
                let (l, lam) = (w[1].0[i], w[1].1[i]);
                assert!((lam - 0.5 * (1.0 - (-2.0 * l).exp())).abs() < 1e-12);
                assert!(lam < 0.5 && lam >= 0.0);
            }
        }
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn widening_keeps_xi_bracketed() {
        let d = BrownianPath::linear(1e-3, 3.0, 1.5).unwrap();
        let ys = uniform_grid(0.5, 11).unwrap();
        let opts = FlowOptions { widen: Some(0.1), record_events: false };
        let mut f = FlowIntegrator::new(&d, &ys, opts).unwrap();
        while f.step() {
            assert!(f.xi().is_ok());
        }
        assert!(f.widened() > 0);
        let mut g = FlowIntegrator::new(&d, &ys, FlowOptions::default()).unwrap();
        g.run_to(d.steps());
        assert!(matches!(g.xi(), Err(Error::Range { .. })));
    }

    #[test]
    fn widened_lines_follow_the_exact_flow() {
        // lines added later must coincide with a run that had them from
        // the start
        let d = brownian_path(1e-3, 2.0, RngStream::new(6, 1)).unwrap();
        let h = 0.05;
        let small: Vec<f64> = (-4..=4).map(|i| i as f64 * h).collect();
        let big: Vec<f64> = (-80..=80).map(|i| i as f64 * h).collect();
        let opts = FlowOptions { widen: Some(h), record_events: false };
        let mut f = FlowIntegrator::new(&d, &small, opts).unwrap();
        let mut g = FlowIntegrator::new(&d, &big, FlowOptions::default()).unwrap();
        f.run_to(d.steps());
        g.run_to(d.steps());
        for (i, y) in f.labels().iter().enumerate() {
            let j = big.iter().position(|v| (v - y).abs() < 1e-9).unwrap();
            assert!((f.position(i) - g.position(j)).abs() < 1e-9);
        }
    }

    #[test]
    fn binning_examples() {
        let p = alloc::vec![0.12; 101];
        let b = occupation_binning(&p, 0.01, 0.05).unwrap();
        assert_eq!(b.density.len(), 1);
        assert!((b.density[0] - 1.0 / 0.05).abs() < 1e-12);
        let d = brownian_path(1e-4, 1.0, RngStream::new(1, 1)).unwrap();
        let b = occupation_binning(&d.values, 1e-4, 0.05).unwrap();
        assert!((b.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(quadratic_variation(&p, 1).unwrap(), 0.0);
        let qv = quadratic_variation(&d.values, 1).unwrap();
        assert!((qv - 1.0).abs() < 0.05);
    }

    #[test]
    fn invert_table_flat_and_range() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let psi = [-1.0, 0.5, 0.5, 2.0];
        assert_eq!(invert_table(&y, &psi, 0.5).unwrap(), 1.5);
        assert_eq!(invert_table(&y, &psi, -0.25).unwrap(), 0.5);
        assert!(invert_table(&y, &psi, 3.0).is_err());
        assert!(check_grid(&[]).is_err());
    }
}
