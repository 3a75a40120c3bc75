mod common;

use common::rng;
use num_complex::Complex64 as C64;
use rand::Rng;
use spinchain::oracle::{solve_pseudomode, solve_volterra, Scheme, VolterraConfig};
use spinchain::model::{validate, ChainSpec, InitialState, ReservoirSpec, TimeGrid};

#[test]
fn closed_chain_volterra_conserves_norm() {
    let res = ReservoirSpec::uncoupled();
    let cfg = validate(&ChainSpec::new(5, 1.0, 1.0), &res, &res, &InitialState::site(5, 1).unwrap()).unwrap();
    let grid = TimeGrid::uniform(50.0, 501).unwrap();
    let traj = solve_volterra(&cfg, &VolterraConfig { dt: 1e-3, scheme: Scheme::PredictorCorrector2 }, &grid).unwrap();
    let pm = solve_pseudomode(&cfg, &grid).unwrap();
    for p in 0..grid.len() {
        assert!((traj.total_population(p) - 1.0).abs() < 1e-8);
        assert!((pm.total_population(p) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn random_lorentzian_configs_agree() {
    let mut r = rng(29);
    for _ in 0..3 {
        let n = r.gen_range(2..=6);
        let res1 = ReservoirSpec::lorentzian(r.gen_range(0.1..1.0), r.gen_range(0.05..0.5), r.gen_range(-0.5..0.5));
        let res2 = ReservoirSpec::lorentzian(r.gen_range(0.1..1.0), r.gen_range(0.05..0.5), r.gen_range(-0.5..0.5));
        let init = common::random_state(&mut r, n);
        let cfg = validate(&ChainSpec::new(n, 1.0, 1.0), &res1, &res2, &init).unwrap();
        let grid = TimeGrid::uniform(15.0, 61).unwrap();
        let pm = solve_pseudomode(&cfg, &grid).unwrap();
        for scheme in [Scheme::PredictorCorrector2, Scheme::Trapezoid] {
            let vo = solve_volterra(&cfg, &VolterraConfig { dt: 1e-3, scheme }, &grid).unwrap();
            let dev = vo.max_deviation(&pm);
            assert!(dev < 1e-5, "{scheme:?}: {dev:e}");
        }
    }
}

#[test]
fn volterra_is_second_order() {
    let res = ReservoirSpec::ohmic(0.5, 1.0, 1.0);
    let cfg = validate(&ChainSpec::new(4, 1.0, 1.0), &res, &res, &InitialState::site(4, 1).unwrap()).unwrap();
    let grid = TimeGrid::uniform(10.0, 11).unwrap();
    let solve = |dt| solve_volterra(&cfg, &VolterraConfig { dt, scheme: Scheme::PredictorCorrector2 }, &grid).unwrap();
    let (coarse, mid, fine) = (solve(4e-3), solve(2e-3), solve(1e-3));
    let ratio = coarse.max_deviation(&mid) / mid.max_deviation(&fine);
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn pseudomode_elimination_matches_convolution() {
    // Directly convolving with the exponential kernel must agree with the
    // auxiliary-mode system down to the Volterra discretisation error.
    let res = ReservoirSpec::lorentzian(0.8, 0.4, 0.3);
    let init = InitialState::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
    let cfg = validate(&ChainSpec::new(2, 1.0, 0.0), &res, &res, &init).unwrap();
    let grid = TimeGrid::uniform(8.0, 17).unwrap();
    let pm = solve_pseudomode(&cfg, &grid).unwrap();
    let dt = 5e-4;
    let vo = solve_volterra(&cfg, &VolterraConfig { dt, scheme: Scheme::Trapezoid }, &grid).unwrap();
    assert!(vo.max_deviation(&pm) < (dt * dt).max(1e-8) * 10.0);
}
