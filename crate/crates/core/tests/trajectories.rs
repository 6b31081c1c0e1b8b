mod common;

use common::*;
use daeobs::associated::construct;
use daeobs::dae::DaeSystem;
use daeobs::linalg::{Mat, Vector, DEFAULT_RANK_TOL};
use daeobs::lq::SolverOptions;
use daeobs::observer::{observer_kernel, synthesize};
use daeobs::random;
use daeobs::simulate::{integrate_lti, run_observer, sample_admissible, smooth_signal, uniform_grid, PrimalModel, SampledSignal};

fn replay_error(sys: &DaeSystem, x: &SampledSignal, u: &SampledSignal) -> f64 {
    let c = construct(sys, DEFAULT_RANK_TOL).unwrap();
    let (v, g) = c.lti.recover_input(sys.e(), x, u);
    let v0 = v.values.column(0).into_owned();
    let replay = integrate_lti(&c.lti.a_l, &c.lti.b_l, &v0, &g).unwrap();
    let (x2, u2) = c.lti.outputs(&replay, &g);
    (&x2.values - &x.values).amax().max((&u2.values - &u.values).amax())
}

#[test]
fn outputs_satisfy_the_dae_with_second_order_defect() {
    let mut gen = rng(23);
    let h = 1e-4;
    let grid = uniform_grid(2.0, h).unwrap();
    let mut tested = 0;
    for trial in 0..12 {
        let n = 2 + trial % 3;
        let mm = trial % 3;
        let rank_e = 1 + (trial * 7) % n;
        let sys = random::dae(&mut gen, n, mm, rank_e);
        let lti = construct(&sys, DEFAULT_RANK_TOL).unwrap().lti;
        let v0 = random::normal_matrix(&mut gen, lti.n_hat, 1).column(0).into_owned();
        let g = smooth_signal(&mut gen, &grid, lti.k);
        let v = integrate_lti(&lti.a_l, &lti.b_l, &v0, &g).unwrap();
        let (x, u) = lti.outputs(&v, &g);
        let scale = 1.0 + x.values.amax() + u.values.amax();
        let defects: Vec<f64> =
            [400, 200, 100, 50, 25].iter().map(|&s| fd_defect(&sys, &x.values, &u.values, h, s, 400) / scale).collect();
        for pair in defects.windows(2) {
            let floor = 1e-7;
            assert!(pair[1] <= floor || pair[0] / pair[1] > 3.0, "trial {trial}: defects {defects:?} do not decay quadratically");
        }
        assert!(defects[4] <= 1e-7 || defects[4] < defects[0] / 200.0, "trial {trial}: {defects:?}");
        tested += 1;
    }
    assert!(tested >= 10);
}

#[test]
fn hand_solution_with_algebraic_component_is_matched() {
    // x1' = -x1, 0 = x2 + u
    let sys = DaeSystem::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[-1.0, 0.0, 0.0, 1.0]), m(2, 1, &[0.0, 1.0])).unwrap();
    let grid = uniform_grid(3.0, 1e-3).unwrap();
    let x = SampledSignal::from_fn(&grid, 2, |t| vec![2.0 * (-t).exp(), -(2.0 * t).sin()]);
    let u = SampledSignal::from_fn(&grid, 1, |t| vec![(2.0 * t).sin()]);
    assert!(replay_error(&sys, &x, &u) < 1e-6);
}

#[test]
fn hand_solution_of_underdetermined_dae_is_matched() {
    // x1' = x2 with x2 free
    let sys = DaeSystem::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[0.0, 1.0, 0.0, 0.0]), Mat::zeros(2, 0)).unwrap();
    let grid = uniform_grid(3.0, 1e-3).unwrap();
    let x = SampledSignal::from_fn(&grid, 2, |t| vec![1.0 + t.sin(), t.cos()]);
    let u = SampledSignal::zeros(&grid, 0);
    assert!(replay_error(&sys, &x, &u) < 1e-6);
}

#[test]
fn hand_solution_of_purely_algebraic_dae_is_matched() {
    // 0 = x1 + u, 0 = u, x2 free
    let sys = DaeSystem::new(Mat::zeros(2, 2), m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 1, &[1.0, 1.0])).unwrap();
    let grid = uniform_grid(1.0, 1e-3).unwrap();
    let x = SampledSignal::from_fn(&grid, 2, |t| vec![0.0, t * t]);
    let u = SampledSignal::zeros(&grid, 1);
    assert!(replay_error(&sys, &x, &u) < 1e-9);
}

#[test]
fn trajectories_of_one_construction_are_reached_by_another() {
    let mut gen = rng(31);
    let grid = uniform_grid(2.0, 1e-3).unwrap();
    for trial in 0..10 {
        let n = 2 + trial % 3;
        let sys = random::dae(&mut gen, n, 1 + trial % 2, 1 + trial % n);
        let other = random::random_construction(&mut gen, &sys, DEFAULT_RANK_TOL).unwrap().lti;
        let v0 = random::normal_matrix(&mut gen, other.n_hat, 1).column(0).into_owned();
        let g = smooth_signal(&mut gen, &grid, other.k);
        let v = integrate_lti(&other.a_l, &other.b_l, &v0, &g).unwrap();
        let (x, u) = other.outputs(&v, &g);
        let scale = 1.0 + x.values.amax() + u.values.amax();
        let err = replay_error(&sys, &x, &u) / scale;
        assert!(err < 1e-5, "trial {trial}: {err:e}");
    }
}

#[test]
fn rk4_has_fourth_order_on_exponentials() {
    let a = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let b = Mat::zeros(2, 1);
    let x0 = v(&[1.0, 0.0]);
    let err = |h: f64| {
        let grid = uniform_grid(5.0, h).unwrap();
        let u = SampledSignal::zeros(&grid, 1);
        let x = integrate_lti(&a, &b, &x0, &u).unwrap();
        grid.iter()
            .enumerate()
            .map(|(i, &t)| ((x.values[(0, i)] - t.cos()).abs()).max((x.values[(1, i)] + t.sin()).abs()))
            .fold(0.0, f64::max)
    };
    let ratio = err(0.02) / err(0.01);
    assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rk4_has_fourth_order_with_ramp_input() {
    let a = m(1, 1, &[-1.0]);
    let b = m(1, 1, &[1.0]);
    let x0 = v(&[2.0]);
    let err = |h: f64| {
        let grid = uniform_grid(4.0, h).unwrap();
        let u = SampledSignal::from_fn(&grid, 1, |t| vec![t]);
        let x = integrate_lti(&a, &b, &x0, &u).unwrap();
        grid.iter().enumerate().map(|(i, &t)| (x.values[(0, i)] - (t - 1.0 + 3.0 * (-t).exp())).abs()).fold(0.0, f64::max)
    };
    let ratio = err(0.04) / err(0.02);
    assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
}

fn trapezoid_energy(s: &SampledSignal, w: &Mat) -> f64 {
    let vals: Vec<f64> = (0..s.len())
        .map(|i| {
            let x = s.values.column(i);
            (x.transpose() * w * x)[(0, 0)]
        })
        .collect();
    let h = s.grid[1] - s.grid[0];
    h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[vals.len() - 1]))
}

#[test]
fn stored_rho_matches_trapezoid_quadrature() {
    let grid = uniform_grid(10.0, 1e-3).unwrap();
    for fx in estimation_fixtures() {
        let model = PrimalModel::new(&fx.prob.obs, DEFAULT_RANK_TOL).unwrap();
        for seed in 0..5 {
            let mut gen = rng(100 + seed);
            let real = sample_admissible(&fx.prob, &model, &grid, &mut gen).unwrap();
            let x0 = &real.x0;
            let recomputed = (x0.transpose() * &fx.prob.q0 * x0)[(0, 0)]
                + trapezoid_energy(&real.f, &fx.prob.q)
                + trapezoid_energy(&real.eta, &fx.prob.r);
            assert!(rel(recomputed, real.rho) < 1e-6, "{}: {recomputed} vs {}", fx.name, real.rho);
            assert!(real.rho <= 1.0 + 1e-12);
            if real.rho > 0.0 {
                let edge = real.scaled(1.0 / real.rho.sqrt());
                assert!((edge.rho - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn kernel_quadrature_matches_observer_ode() {
    let t1 = 5.0;
    let h = 1e-3;
    let grid = uniform_grid(t1, h).unwrap();
    for fx in estimation_fixtures() {
        let obsv = synthesize(&fx.prob, &SolverOptions::default()).unwrap();
        let p = fx.prob.obs.p();
        let n = fx.prob.obs.n();
        let mut gen = rng(9);
        let y = smooth_signal(&mut gen, &grid, p);
        let est = run_observer(&obsv, &y).unwrap();
        // Simpson on the uniform grid
        let npts = grid.len();
        let mut acc = 0.0;
        for (i, &s) in grid.iter().enumerate() {
            let ker = observer_kernel(&obsv, t1, s).unwrap();
            let wy = ker.rows(n, p).dot(&y.values.column(i));
            let coef = if i == 0 || i == npts - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += coef * wy;
        }
        let quad = acc * h / 3.0;
        let ode = est.values[(0, npts - 1)];
        assert!((quad - ode).abs() <= 1e-5 * (1.0 + ode.abs()), "{}: {quad} vs {ode}", fx.name);
    }
}

#[test]
fn zero_functional_gives_zero_kernel_and_estimate() {
    let fx = &estimation_fixtures()[2];
    let mut prob = fx.prob.clone();
    prob.ell = Vector::zeros(prob.obs.n());
    let obsv = synthesize(&prob, &SolverOptions::default()).unwrap();
    assert_eq!(obsv.sigma, 0.0);
    assert!(observer_kernel(&obsv, 2.0, 0.5).unwrap().amax() == 0.0);
    let grid = uniform_grid(1.0, 1e-2).unwrap();
    let y = smooth_signal(&mut rng(1), &grid, prob.obs.p());
    assert!(run_observer(&obsv, &y).unwrap().values.amax() == 0.0);
}
