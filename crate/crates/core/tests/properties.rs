use proptest::prelude::*;

use rmotion_core::brownian::brownian_path;
use rmotion_core::environment::{natural_scale, sample_continuous_env, sample_discrete_env, EnvRef};
use rmotion_core::flow::{flow_run, occupation_binning, uniform_grid, FlowIntegrator, FlowOptions};
use rmotion_core::lattice::{simulate_vrjp, track_martingale};
use rmotion_core::profile::OccupationProfile;
use rmotion_core::stats::ks_two_sample;
use rmotion_core::RngStream;

fn pwl_profile() -> impl Strategy<Value = OccupationProfile> {
    prop::collection::vec(0.2f64..3.0, 3..8).prop_map(|ls| {
        let n = ls.len();
        let knots: Vec<(f64, f64)> = ls.iter().enumerate().map(|(i, &l)| (-4.0 + 8.0 * i as f64 / (n - 1) as f64, l)).collect();
        OccupationProfile::piecewise_linear(&knots, None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_tables_round_trip(p in pwl_profile(), x0 in -3.5f64..3.5, xs in prop::collection::vec(-4.0f64..4.0, 20)) {
        let s = p.scale_s0(x0).unwrap();
        prop_assert_eq!(s.eval(x0).unwrap(), 0.0);
        let mut prev = f64::NEG_INFINITY;
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        for &x in &sorted {
            let y = s.eval(x).unwrap();
            prop_assert!(y >= prev);
            prev = y;
            let back = s.invert(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn flow_is_monotone_and_lipschitz(seed in 0u64..1000) {
        let d = brownian_path(1e-3, 0.5, RngStream::new(seed, 0)).unwrap();
        let ys = uniform_grid(2.0, 41).unwrap();
        let run = flow_run(&d, &ys, 0.5, 1, FlowOptions::default()).unwrap();
        for w in run.states.windows(2) {
            for i in 0..ys.len() {
                prop_assert!((w[1].psi[i] - w[0].psi[i]).abs() <= d.du * (1.0 + 1e-9));
            }
        }
        for s in &run.states {
            prop_assert!(s.psi.windows(2).all(|p| p[1] >= p[0]));
        }
    }

    #[test]
    fn flow_restart_composes(seed in 0u64..1000, cut in 1usize..499) {
        let d = brownian_path(1e-3, 0.5, RngStream::new(seed, 1)).unwrap();
        let ys = uniform_grid(2.0, 41).unwrap();
        let mut f = FlowIntegrator::new(&d, &ys, FlowOptions::default()).unwrap();
        f.run_to(cut);
        let b0 = d.values[cut];
        let start: Vec<f64> = (0..ys.len()).map(|i| f.position(i) - b0).collect();
        let tail = d.shifted(cut);
        let mut g = FlowIntegrator::with_positions(&tail, &ys, &start, FlowOptions::default()).unwrap();
        f.run_to(d.steps());
        g.run_to(tail.steps());
        for i in 0..ys.len() {
            prop_assert!((f.position(i) - g.position(i) - b0).abs() < 1e-12);
        }
    }

    #[test]
    fn binning_conserves_mass(seed in 0u64..1000, w in 0.01f64..0.5) {
        let d = brownian_path(1e-3, 1.0, RngStream::new(seed, 2)).unwrap();
        let b = occupation_binning(&d.values, d.du, w).unwrap();
        prop_assert!((b.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(b.density.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn ks_is_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..60), b in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let x = ks_two_sample(&a, &b).unwrap();
        let y = ks_two_sample(&b, &a).unwrap();
        prop_assert!((x.d - y.d).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&x.d) && (0.0..=1.0).contains(&x.p));
        prop_assert_eq!(ks_two_sample(&a, &a).unwrap().d, 0.0);
    }

    #[test]
    fn vrjp_occupation_identity(seed in 0u64..1000, n in 0u32..5, t in 0.1f64..3.0) {
        let p = OccupationProfile::unit(8.0).unwrap();
        let (traj, lt) = simulate_vrjp(&p, n, t, RngStream::new(seed, 3)).unwrap();
        prop_assert!(traj.sites.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
        prop_assert!(traj.jump_times.windows(2).all(|w| w[1] > w[0]));
        if !traj.boundary_hit {
            prop_assert!((lt.total_occupation() - t).abs() < 1e-12 * (1.0 + t));
        }
        let m = track_martingale(&traj, &lt, &p).unwrap();
        prop_assert!(m.gaps[1..].iter().all(|&g| g > 0.0));
    }

    #[test]
    fn environments_are_anchored(seed in 0u64..1000, p in pwl_profile()) {
        let d = sample_discrete_env(&p, 3, RngStream::new(seed, 4)).unwrap();
        prop_assert_eq!(d.at(0), 0.0);
        let c = sample_continuous_env(&p, 1.0 / 64.0, RngStream::new(seed, 5)).unwrap();
        prop_assert!(c.eval(0.0).unwrap().abs() < 1e-15);
        for env in [EnvRef::Discrete(&d), EnvRef::Continuous(&c)] {
            let s = natural_scale(env, &p).unwrap();
            let k = s.knots();
            prop_assert!(k.windows(2).all(|w| w[1].1 > w[0].1));
        }
    }
}
