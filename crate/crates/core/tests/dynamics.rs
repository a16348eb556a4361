//! Lévy triplets, the α solver, path simulation and barrier hedges through
//! the public API.

use nalgebra::{DMatrix, DVector};
use selfdual::hedging::{
    build_hedge, detect_first_hit, evaluate_hedge, simulate_paths, Barrier, HedgeForm, HedgeSettings, Knock, Path, PathConfig,
};
use selfdual::levy::{
    check_qsd_triplet, lambert_w0, martingale_drift, martingale_normalized, solve_alpha, triple_norm, Ball, Convention, GaussianJumps,
    JumpMeasure, LevyTriplet,
};
use selfdual::pricing::Payoff;
use selfdual::stats::Running;
use selfdual::{RngStream, Verdict};

fn pattern(s2: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[s2, 0.5 * s2, 0.5 * s2, s2])
}

fn jump_fixture() -> LevyTriplet {
    let g = GaussianJumps::tilted(pattern(0.09), DVector::zeros(2), 1.0, 0.5, 1).unwrap();
    let nu = JumpMeasure::zero(2).with_gaussian(g).unwrap();
    let t = LevyTriplet::new(pattern(0.04), nu, DVector::zeros(2), Convention::Truncated(Ball::Triple { i: 1 })).unwrap();
    martingale_normalized(&t).unwrap()
}

fn spread() -> Payoff {
    Payoff::SpreadCall { long: vec![1.0, 0.0], short: vec![0.0, 0.5], k: 0.85 }
}

#[test]
fn frozen_scalars() {
    assert!((triple_norm(&[1.0, 0.0], 1).unwrap().powi(2) - 1.5).abs() < 1e-15);
    assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-12);
    let nu = JumpMeasure::zero(2).with_atom(&[0.1, 0.0], 2.0).unwrap();
    let t = LevyTriplet::new(pattern(0.04), nu, DVector::zeros(2), Convention::Truncated(Ball::Euclidean)).unwrap();
    let want = -2.0 * (0.1f64.exp() - 1.0 - 0.1) - 0.02;
    assert!((martingale_drift(&t, 1).unwrap() - want).abs() < 1e-15);
}

#[test]
fn normalized_triplet_is_a_martingale() {
    let t = jump_fixture();
    for j in 1..=2 {
        assert!(t.char_exponent_shifted(&[0.0, 0.0], j, 1.0).unwrap().norm() < 1e-12);
    }
}

#[test]
fn increments_match_cumulants() {
    let t = jump_fixture();
    let mut rng = RngStream::new(31, 0);
    let n = 1_000_000;
    let mut mean = [Running::default(), Running::default()];
    let mut cross = [[Running::default(), Running::default()], [Running::default(), Running::default()]];
    let m = t.mean();
    for _ in 0..n {
        let x = t.sample_increment(1.0, &mut rng).unwrap();
        for a in 0..2 {
            mean[a].push(x[a]);
            for b in 0..2 {
                cross[a][b].push((x[a] - m[a]) * (x[b] - m[b]));
            }
        }
    }
    let v = t.covariance();
    for a in 0..2 {
        let e = mean[a].estimate();
        assert!((e.value - m[a]).abs() < 4.0 * e.std_error, "mean {a}: {e:?} vs {}", m[a]);
        for b in 0..2 {
            let e = cross[a][b].estimate();
            assert!((e.value - v[(a, b)]).abs() < 4.0 * e.std_error, "cov {a}{b}: {e:?} vs {}", v[(a, b)]);
        }
    }
}

#[test]
fn alpha_agrees_with_the_triplet_conditions() {
    let t = LevyTriplet::black_scholes(DMatrix::from_element(1, 1, 0.04)).unwrap();
    let s = solve_alpha(&t, 1, 0.01).unwrap();
    assert_eq!(s.alpha, 0.5);
    // the driver of S = e^{λt} η has drift −α a/2 − λ in log terms
    let qsd = t.with_drift_component(1, -0.5 * 0.04 * 0.5 - 0.01).unwrap();
    assert_eq!(check_qsd_triplet(&qsd, 1, 0.01, s.alpha, 1e-12).unwrap().verdict, Verdict::Pass);
    assert_eq!(check_qsd_triplet(&qsd, 1, 0.01, 0.6, 1e-12).unwrap().verdict, Verdict::Fail);
}

#[test]
fn simulated_prices_grow_at_the_carry() {
    let cfg = PathConfig::new(vec![1.0, 2.0], vec![0.03, -0.01], jump_fixture(), 1.0, 20).unwrap();
    let paths = simulate_paths(&cfg, 40_000, &mut RngStream::new(32, 0)).unwrap();
    for (j, (s0, lam)) in [(1.0, 0.03), (2.0, -0.01)].into_iter().enumerate() {
        let mut acc = Running::default();
        for p in &paths {
            acc.push(p.terminal()[j]);
        }
        let e = acc.estimate();
        let want = s0 * f64::exp(lam);
        assert!((e.value - want).abs() < 4.0 * e.std_error, "{j}: {e:?} vs {want}");
    }
}

#[test]
fn jump_across_the_barrier_is_an_overshoot() {
    let path = Path::new(1, 0.1, vec![1.3, 1.2, 0.7, 0.9], vec![false, true, false]).unwrap();
    let b = Barrier::new(1, 1.0, &[1.3]).unwrap();
    let hit = detect_first_hit(&path, &b).unwrap();
    assert_eq!(hit.step, 2);
    assert!(hit.overshoot);
    assert_eq!(hit.value, 0.7);
}

#[test]
fn knock_in_and_out_hedges_replicate() {
    let cfg = PathConfig::new(vec![1.0, 1.0], vec![0.0, 0.0], LevyTriplet::black_scholes(pattern(0.0625)).unwrap(), 1.0, 100).unwrap();
    let b = Barrier::new(1, 0.8, cfg.s0()).unwrap();
    let settings = HedgeSettings { n_outer: 3000, n_inner: 5000, n_states: 15, ..Default::default() };
    for knock in [Knock::In, Knock::Out] {
        let plan = build_hedge(&spread(), b, 1.0, knock).unwrap();
        assert_eq!(plan.form, HedgeForm::Reflected);
        let rep = evaluate_hedge(&plan, &cfg, &settings, &mut RngStream::new(33, 0)).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}", rep.summary());
    }
}

#[test]
fn qsd_hedge_needs_the_right_order() {
    // strong carry so that the weight separates the two hedges at the hit states
    let cfg = PathConfig::new(vec![1.0, 1.0], vec![0.03, 0.03], LevyTriplet::black_scholes(pattern(0.09)).unwrap(), 1.0, 100).unwrap();
    let b = Barrier::new(1, 0.8, cfg.s0()).unwrap();
    let settings = HedgeSettings { n_outer: 4000, n_inner: 20_000, n_states: 20, ..Default::default() };
    let alpha = solve_alpha(cfg.driver(), 1, 0.03).unwrap().alpha;
    assert!((alpha - 1.0 / 3.0).abs() < 1e-12);
    let good = build_hedge(&spread(), b, alpha, Knock::In).unwrap();
    let rep = evaluate_hedge(&good, &cfg, &settings, &mut RngStream::new(34, 0)).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{}", rep.summary());
    let wrong = build_hedge(&spread(), b, 1.0, Knock::In).unwrap();
    let rep = evaluate_hedge(&wrong, &cfg, &settings, &mut RngStream::new(34, 0)).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail, "{}", rep.summary());
    assert!(rep.max_gap_in_se > 5.0);
}
