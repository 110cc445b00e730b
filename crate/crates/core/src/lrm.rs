//! The linearly reinforced motion assembled from a flow run: scale change
//! `X = S0^{-1}(xi)`, time change `dt = L0(X)^3 (1 - 2 Lambda(xi))^{-3/2} du`
//! and profile `L_t(x) = L0(x) (1 - 2 Lambda_{u(t)}(S0(x)))^{-1/2}`.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::brownian::brownian_path;
use crate::flow::{uniform_grid, FlowIntegrator, FlowOptions, ReducedTrace};
use crate::profile::{OccupationProfile, ScaleTable};
use crate::{Error, Result, RngStream};

/// Runs abort when `1 - 2 Lambda` drops below this.
pub const SINGULAR_FLOOR: f64 = 1e-6;

/// Driver steps generated per chunk.
const CHUNK_STEPS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub u: f64,
    pub x: Vec<f64>,
    pub l: Vec<f64>,
}

impl ProfileSnapshot {
    /// `L` at `x` by linear interpolation; `None` outside the snapshot.
    pub fn at(&self, x: f64) -> Option<f64> {
        let n = self.x.len();
        if n == 0 || !(x >= self.x[0] && x <= self.x[n - 1]) {
            return None;
        }
        let j = self.x.partition_point(|&v| v <= x).clamp(1, n - 1);
        let i = j - 1;
        let w = if self.x[j] > self.x[i] { (x - self.x[i]) / (self.x[j] - self.x[i]) } else { 0.0 };
        Some(self.l[i] + w * (self.l[j] - self.l[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrmPath {
    pub x0: f64,
    /// Flow time of each sample (empty after `transform_profile`).
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// `L_t(X_t)` evaluated through the profile field at each sample.
    pub l_at_x: Vec<f64>,
    pub snapshots: Vec<ProfileSnapshot>,
    /// The requested horizon was not reached.
    pub short: bool,
    /// The path left the profile domain (and was truncated there).
    pub boundary_hit: bool,
    /// Built from the unit profile started at 0.
    pub unit: bool,
}

impl LrmPath {
    pub fn final_t(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// `X_t` by linear interpolation between samples.
    pub fn position_at(&self, t: f64) -> Result<f64> {
        interp(&self.t, &self.x, t)
    }

    /// `t(u)`.
    pub fn t_of_u(&self, u: f64) -> Result<f64> {
        interp(&self.u, &self.t, u)
    }

    /// `u(t)`, the inverse change of time.
    pub fn u_of_t(&self, t: f64) -> Result<f64> {
        interp(&self.t, &self.u, t)
    }

    /// Time spent in `[a, b]` up to the last sample, with `X` linear
    /// between samples.
    pub fn occupation_time(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for k in 1..self.t.len() {
            let dt = self.t[k] - self.t[k - 1];
            let (p, q) = (self.x[k - 1], self.x[k]);
            if p == q {
                if p >= a && p <= b {
                    total += dt;
                }
                continue;
            }
            let (lo, hi) = if p < q { (p, q) } else { (q, p) };
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            total += dt * overlap / (hi - lo);
        }
        total
    }
}

fn interp(xs: &[f64], ys: &[f64], v: f64) -> Result<f64> {
    let n = xs.len();
    if n == 0 || !(v >= xs[0] && v <= xs[n - 1]) {
        let (lo, hi) = if n == 0 { (0.0, 0.0) } else { (xs[0], xs[n - 1]) };
        return Err(Error::Range { value: v, lo, hi });
    }
    let j = xs.partition_point(|&s| s < v);
    if j == 0 || xs[j] == v {
        return Ok(ys[j]);
    }
    let i = j - 1;
    Ok(ys[i] + (v - xs[i]) / (xs[j] - xs[i]) * (ys[j] - ys[i]))
}

fn singular(gap: f64, u: f64) -> Error {
    Error::Numerical(alloc::format!("1 - 2 Lambda = {gap:e} at u = {u} (below {SINGULAR_FLOOR:e})"))
}

/// Incremental time change shared by the batch and streaming builders.
struct Assembler<'p> {
    profile: &'p OccupationProfile,
    scale: ScaleTable,
    path: LrmPath,
    f_prev: f64,
}

impl<'p> Assembler<'p> {
    fn new(profile: &'p OccupationProfile, x0: f64) -> Result<Self> {
        if !profile.contains(x0) {
            return Err(Error::invalid("x0 outside the profile domain"));
        }
        let scale = profile.scale_s0(x0)?;
        Ok(Assembler {
            profile,
            scale,
            path: LrmPath {
                x0,
                u: Vec::new(),
                t: Vec::new(),
                x: Vec::new(),
                l_at_x: Vec::new(),
                snapshots: Vec::new(),
                short: false,
                boundary_hit: false,
                unit: profile.is_unit() && x0 == 0.0,
            },
            f_prev: 0.0,
        })
    }

    /// Push the sample at flow time `u`. `l_at_x` is `(1 - 2 Lambda)` read
    /// back at `S0(X)` through the field. Returns `Ok(false)` when the path
    /// leaves the domain.
    fn push(&mut self, u: f64, xi: f64, lambda: f64, gap_at_x: Option<f64>) -> Result<bool> {
        let Ok(x) = self.scale.invert(xi) else {
            self.path.boundary_hit = true;
            return Ok(false);
        };
        let gap = 1.0 - 2.0 * lambda;
        if gap < SINGULAR_FLOOR {
            return Err(singular(gap, u));
        }
        let l0 = self.profile.eval(x);
        let f = l0 * l0 * l0 * gap.powf(-1.5);
        let t = match self.path.t.last() {
            None => 0.0,
            Some(&t) => t + 0.5 * (self.f_prev + f) * (u - self.path.u[self.path.u.len() - 1]),
        };
        self.f_prev = f;
        self.path.u.push(u);
        self.path.t.push(t);
        self.path.x.push(x);
        let g = gap_at_x.unwrap_or(gap).max(SINGULAR_FLOOR);
        self.path.l_at_x.push(l0 / g.sqrt());
        Ok(true)
    }

    fn t(&self) -> f64 {
        self.path.final_t()
    }

    fn snapshot(&mut self, labels: &[f64], lambda: &[f64]) {
        let (u, t) = (*self.path.u.last().unwrap_or(&0.0), self.t());
        let mut xs = Vec::with_capacity(labels.len());
        let mut ls = Vec::with_capacity(labels.len());
        for (&y, &lam) in labels.iter().zip(lambda) {
            if let Ok(x) = self.scale.invert(y) {
                xs.push(x);
                ls.push(self.profile.eval(x) / (1.0 - 2.0 * lam).max(SINGULAR_FLOOR).sqrt());
            }
        }
        self.path.snapshots.push(ProfileSnapshot { t, u, x: xs, l: ls });
    }
}

/// Build from a recorded reduced trace plus `(u, labels, Lambda)` field
/// snapshots. Stops at the first sample with `t >= t_max`.
pub fn build_lrm(
    trace: &ReducedTrace,
    fields: &[(f64, Vec<f64>, Vec<f64>)],
    profile: &OccupationProfile,
    x0: f64,
    t_max: f64,
) -> Result<LrmPath> {
    if trace.xi.len() != trace.lambda.len() || trace.xi.is_empty() {
        return Err(Error::invalid("trace must hold matching nonempty xi and Lambda samples"));
    }
    let mut a = Assembler::new(profile, x0)?;
    let mut fi = 0;
    for (k, (&xi, &lam)) in trace.xi.iter().zip(&trace.lambda).enumerate() {
        let u = k as f64 * trace.du;
        if !a.push(u, xi, lam, None)? {
            break;
        }
        while fi < fields.len() && fields[fi].0 <= u + 0.5 * trace.du {
            a.snapshot(&fields[fi].1, &fields[fi].2);
            fi += 1;
        }
        if a.t() >= t_max {
            break;
        }
    }
    a.path.short = a.t() < t_max;
    Ok(a.path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrmConfig {
    pub du: f64,
    pub t_max: f64,
    /// Flow-time budget; the path is flagged short if it runs out first.
    pub u_max: f64,
    /// Initial label grid `[-span, span]` in `S0` coordinates (widened on
    /// demand at the same spacing).
    pub span: f64,
    pub points: usize,
    /// Times at which to record the whole profile `L_t`.
    pub snapshot_times: Vec<f64>,
}

impl Default for LrmConfig {
    fn default() -> Self {
        LrmConfig { du: 1e-4, t_max: 1.0, u_max: 100.0, span: 4.0, points: 201, snapshot_times: Vec::new() }
    }
}

impl LrmConfig {
    fn check(&self) -> Result<()> {
        if !(self.du > 0.0 && self.t_max > 0.0 && self.u_max > 0.0) {
            return Err(Error::invalid("du, t_max and u_max must be positive"));
        }
        Ok(())
    }
}

/// Stream a fresh driver through the flow and assemble the path until
/// `t_max`, the `u_max` budget, the domain boundary, or `stop(t, x)`.
pub fn simulate_lrm_until<F: FnMut(f64, f64) -> bool>(
    profile: &OccupationProfile,
    x0: f64,
    cfg: &LrmConfig,
    stream: RngStream,
    mut stop: F,
) -> Result<LrmPath> {
    cfg.check()?;
    let labels = uniform_grid(cfg.span, cfg.points)?;
    let h = labels[1] - labels[0];
    let opts = FlowOptions { widen: Some(h), record_events: false };
    let chunk_u = CHUNK_STEPS as f64 * cfg.du;
    let drivers = stream.named("driver");
    let mut chunk = 0u64;
    let first = brownian_path(cfg.du, chunk_u, drivers.substream(chunk))?;
    let mut flow = FlowIntegrator::owned(first, &labels, opts)?;
    let mut a = Assembler::new(profile, x0)?;
    let mut snaps = cfg.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    let mut si = 0;
    loop {
        let (xi, lam) = flow.xi_lambda()?;
        let u = flow.u();
        let gap_at_x = a.scale.invert(xi).ok().and_then(|x| a.scale.eval(x).ok()).and_then(|y| flow.lambda_at(y).ok()).map(|l| 1.0 - 2.0 * l);
        if !a.push(u, xi, lam, gap_at_x)? {
            break;
        }
        let t = a.t();
        while si < snaps.len() && snaps[si] <= t {
            let (_, field) = flow.local_times();
            let lab = flow.labels().to_vec();
            a.snapshot(&lab, &field);
            si += 1;
        }
        if t >= cfg.t_max || stop(t, *a.path.x.last().unwrap()) {
            break;
        }
        if u + 0.5 * cfg.du >= cfg.u_max {
            break;
        }
        if flow.done() {
            chunk += 1;
            let more = brownian_path(cfg.du, chunk_u, drivers.substream(chunk))?;
            flow.extend_driver(&more)?;
        }
        flow.step();
    }
    a.path.short = a.t() < cfg.t_max;
    Ok(a.path)
}

pub fn simulate_lrm(profile: &OccupationProfile, x0: f64, cfg: &LrmConfig, stream: RngStream) -> Result<LrmPath> {
    simulate_lrm_until(profile, x0, cfg, stream, |_, _| false)
}

/// The LRM for `profile` started at `x0`, obtained from a unit-profile path
/// by `X = S0^{-1}(chi)` and `dt = L0(X)^3 dtau`.
pub fn transform_profile(unit: &LrmPath, profile: &OccupationProfile, x0: f64) -> Result<LrmPath> {
    if !unit.unit {
        return Err(Error::invalid("transform_profile needs a unit-profile path started at 0"));
    }
    let mut a = Assembler::new(profile, x0)?;
    let scale = &a.scale;
    let mut path = LrmPath {
        x0,
        u: Vec::new(),
        t: Vec::with_capacity(unit.t.len()),
        x: Vec::with_capacity(unit.t.len()),
        l_at_x: Vec::with_capacity(unit.t.len()),
        snapshots: Vec::new(),
        short: unit.short,
        boundary_hit: unit.boundary_hit,
        unit: profile.is_unit() && x0 == 0.0,
    };
    let mut f_prev = 0.0;
    for k in 0..unit.t.len() {
        let Ok(x) = scale.invert(unit.x[k]) else {
            path.boundary_hit = true;
            path.short = true;
            break;
        };
        let l0 = profile.eval(x);
        let f = l0 * l0 * l0;
        let t = if k == 0 { 0.0 } else { path.t[k - 1] + 0.5 * (f_prev + f) * (unit.t[k] - unit.t[k - 1]) };
        f_prev = f;
        path.t.push(t);
        path.x.push(x);
        path.l_at_x.push(l0 * unit.l_at_x[k]);
    }
    for s in &unit.snapshots {
        let mut xs = Vec::with_capacity(s.x.len());
        let mut ls = Vec::with_capacity(s.x.len());
        for (&y, &l1) in s.x.iter().zip(&s.l) {
            if let Ok(x) = scale.invert(y) {
                xs.push(x);
                ls.push(profile.eval(x) * l1);
            }
        }
        let t = interp(&unit.t, &path.t, s.t).unwrap_or(f64::NAN);
        path.snapshots.push(ProfileSnapshot { t, u: s.u, x: xs, l: ls });
    }
    a.path = path;
    Ok(a.path)
}

/// `(c^2 X_{c^{-3} t})`: the LRM with profile `c L0(./c^2)`.
pub fn rescale(path: &LrmPath, c: f64) -> Result<LrmPath> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("rescale factor must be positive"));
    }
    let (c2, c3) = (c * c, c * c * c);
    let mut p = path.clone();
    p.x0 *= c2;
    p.t.iter_mut().for_each(|t| *t *= c3);
    p.x.iter_mut().for_each(|x| *x *= c2);
    p.l_at_x.iter_mut().for_each(|l| *l *= c);
    for s in &mut p.snapshots {
        s.t *= c3;
        s.x.iter_mut().for_each(|x| *x *= c2);
        s.l.iter_mut().for_each(|l| *l *= c);
    }
    p.unit = path.unit && c == 1.0;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaceOutcome {
    HitX2First,
    HitX1First,
    Undecided,
}

/// Which of `x1 < X(t0) < x2` the path reaches first after `t0`.
pub fn hitting_race(path: &LrmPath, t0: f64, x1: f64, x2: f64) -> Result<RaceOutcome> {
    let x = path.position_at(t0)?;
    if !(x1 < x && x < x2) {
        return Err(Error::invalid("hitting race needs x1 < X(t0) < x2"));
    }
    let k0 = path.t.partition_point(|&t| t <= t0);
    for &xk in &path.x[k0..] {
        if xk >= x2 {
            return Ok(RaceOutcome::HitX2First);
        }
        if xk <= x1 {
            return Ok(RaceOutcome::HitX1First);
        }
    }
    Ok(RaceOutcome::Undecided)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::BrownianPath;
    use crate::flow::trace_reduced;

    fn cfg(t_max: f64) -> LrmConfig {
        LrmConfig { t_max, ..LrmConfig::default() }
    }

    #[test]
    fn starts_at_x0_with_l0() {
        let p = OccupationProfile::ramp(-1.0, 1.0, 1.0, 2.0, (-6.0, 6.0)).unwrap();
        let c = LrmConfig { snapshot_times: alloc::vec![0.0], ..cfg(0.5) };
        let path = simulate_lrm(&p, 0.5, &c, RngStream::new(1, 0)).unwrap();
        assert_eq!(path.t[0], 0.0);
        assert_eq!(path.x[0], 0.5);
        let s = &path.snapshots[0];
        for (x, l) in s.x.iter().zip(&s.l) {
            assert!((l - p.eval(*x)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_time_change_dominates_u() {
        let p = OccupationProfile::unit(8.0).unwrap();
        let path = simulate_lrm(&p, 0.0, &cfg(1.0), RngStream::new(2, 0)).unwrap();
        assert!(!path.short);
        for (u, t) in path.u.iter().zip(&path.t) {
            assert!(t >= &(u - 1e-12));
        }
        assert!(path.t.windows(2).all(|w| w[1] >= w[0]));
        for &t in path.t.iter().step_by(97) {
            let u = path.u_of_t(t).unwrap();
            assert!((path.t_of_u(u).unwrap() - t).abs() < 1e-9);
        }
    }

    #[test]
    fn a_posteriori_clock_matches() {
        // dt = L_t(X_t)^3 du with L read back through the profile field
        let p = OccupationProfile::unit(8.0).unwrap();
        for r in 0..5 {
            let path = simulate_lrm(&p, 0.0, &cfg(1.0), RngStream::new(3, r)).unwrap();
            let mut t = 0.0;
            for k in 1..path.t.len() {
                let (a, b) = (path.l_at_x[k - 1], path.l_at_x[k]);
                t += 0.5 * (a * a * a + b * b * b) * (path.u[k] - path.u[k - 1]);
            }
            assert!((t / path.final_t() - 1.0).abs() < 0.01, "{t} {}", path.final_t());
        }
    }

    #[test]
    fn profile_snapshots_dominate_l0_and_grow() {
        let p = OccupationProfile::unit(8.0).unwrap();
        let c = LrmConfig { snapshot_times: alloc::vec![0.25, 0.5, 1.0], ..cfg(1.0) };
        let path = simulate_lrm(&p, 0.0, &c, RngStream::new(4, 0)).unwrap();
        assert_eq!(path.snapshots.len(), 3);
        for s in &path.snapshots {
            assert!(s.l.iter().all(|&l| l >= 1.0));
        }
        for w in path.snapshots.windows(2) {
            for &x in w[0].x.iter().step_by(5) {
                assert!(w[1].at(x).unwrap() >= w[0].at(x).unwrap() - 1e-12);
            }
        }
    }

    #[test]
    fn occupation_density_identity() {
        let p = OccupationProfile::unit(8.0).unwrap();
        let c = LrmConfig { snapshot_times: alloc::vec![1.0], ..cfg(1.0) };
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for r in 0..10 {
            let path = simulate_lrm(&p, 0.0, &c, RngStream::new(5, r)).unwrap();
            let s = path.snapshots.last().unwrap();
            let (a, b) = (-0.2, 0.3);
            lhs += path.occupation_time(a, b);
            // trapezoid of L_t - L0 over [a, b]
            let n = 200;
            let h = (b - a) / n as f64;
            let g = |x: f64| s.at(x).unwrap() - 1.0;
            rhs += h * ((0..=n).map(|i| g(a + i as f64 * h)).sum::<f64>() - 0.5 * (g(a) + g(b)));
        }
        assert!((lhs / rhs - 1.0).abs() < 0.02, "{lhs} {rhs}");
    }

    #[test]
    fn build_from_recorded_trace() {
        let p = OccupationProfile::unit(8.0).unwrap();
        let labels = uniform_grid(4.0, 201).unwrap();
        let d = brownian_path(1e-4, 2.0, RngStream::new(7, 0)).unwrap();
        let tr = trace_reduced(&d, &labels, d.steps(), FlowOptions { widen: Some(0.04), record_events: false }).unwrap();
        let path = build_lrm(&tr, &[], &p, 0.0, 1.0).unwrap();
        assert!(!path.short && path.final_t() >= 1.0);
        assert!(path.t.windows(2).all(|w| w[1] > w[0]));
        for (k, x) in path.x.iter().enumerate() {
            assert!((x - tr.xi[k]).abs() < 1e-12);
        }
        // the zero driver collapses every line onto B: Lambda reaches 1/2
        let z = BrownianPath::zero(1e-3, 1.0).unwrap();
        let tr = trace_reduced(&z, &labels, z.steps(), FlowOptions::default()).unwrap();
        assert!(matches!(build_lrm(&tr, &[], &p, 0.0, 10.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn rescale_and_transform_examples() {
        let p = OccupationProfile::unit(8.0).unwrap();
        let path = simulate_lrm(&p, 0.0, &cfg(0.5), RngStream::new(6, 0)).unwrap();
        assert_eq!(rescale(&path, 1.0).unwrap(), path);
        let r = rescale(&path, 2.0).unwrap();
        for k in (0..path.t.len()).step_by(101) {
            assert_eq!((r.t[k], r.x[k]), (8.0 * path.t[k], 4.0 * path.x[k]));
        }
        assert!(rescale(&path, 0.0).is_err());
        let id = transform_profile(&path, &p, 0.0).unwrap();
        for k in 0..path.t.len() {
            assert!((id.t[k] - path.t[k]).abs() < 1e-12 && (id.x[k] - path.x[k]).abs() < 1e-12);
        }
        // constant c: space by c^2 and time by c^3
        let two = OccupationProfile::constant(2.0, (-30.0, 30.0)).unwrap();
        let tp = transform_profile(&path, &two, 0.0).unwrap();
        for k in (0..path.t.len()).step_by(101) {
            assert!((tp.t[k] - r.t[k]).abs() < 1e-9 * (1.0 + r.t[k]));
            assert!((tp.x[k] - r.x[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn race_preconditions_and_outcomes() {
        let path = LrmPath {
            x0: 0.0,
            u: alloc::vec![0.0, 1.0, 2.0],
            t: alloc::vec![0.0, 1.0, 2.0],
            x: alloc::vec![0.0, 0.5, 1.2],
            l_at_x: alloc::vec![1.0; 3],
            snapshots: Vec::new(),
            short: false,
            boundary_hit: false,
            unit: true,
        };
        assert_eq!(hitting_race(&path, 0.0, -1.0, 1.0).unwrap(), RaceOutcome::HitX2First);
        assert_eq!(hitting_race(&path, 0.0, -1.0, 2.0).unwrap(), RaceOutcome::Undecided);
        assert!(hitting_race(&path, 0.0, 0.0, 1.0).is_err());
    }
}
