mod common;

use common::{dense_solve, random_state, rel_vec, rng};
use num_complex::Complex64 as C64;
use rand::Rng;
use spinchain::kernels::{FnKernel, KernelHandle, LaplaceKernel, NoKernel};
use spinchain::laplace::{a_sequence, LaplaceState};
use spinchain::model::{validate, ChainSpec, InitialState, ReservoirSpec};
use std::sync::Arc;

#[test]
fn fig2a_matches_dense_solve() {
    let res = ReservoirSpec::lorentzian(0.3, 0.02, 0.0);
    let cfg = validate(&ChainSpec::new(5, 1.0, 1.0), &res, &res, &InitialState::site(5, 1).unwrap()).unwrap();
    let state = LaplaceState::new(&cfg);
    let s = C64::new(1.0, 0.5);
    let (b1, b2) = state.bath(s).unwrap();
    let want = dense_solve(2.0, s, b1, b2, cfg.initial.amplitudes());
    assert!(rel_vec(&state.f_all(s).unwrap(), &want) < 1e-10);
}

#[test]
fn random_systems_match_dense_solve() {
    let mut r = rng(11);
    for _ in 0..100 {
        let n = r.gen_range(2..=20);
        let coupling = r.gen_range(0.5..2.0);
        let chain = ChainSpec::new(n, coupling, r.gen_range(0.0..2.0));
        let res = if r.gen_bool(0.5) {
            ReservoirSpec::lorentzian(r.gen_range(0.0..2.0), r.gen_range(0.01..1.0), r.gen_range(-1.0..1.0))
        } else {
            ReservoirSpec::ohmic(r.gen_range(0.0..2.0), r.gen_range(0.3..2.0), r.gen_range(0.5..3.0))
        };
        let init = random_state(&mut r, n);
        let cfg = validate(&chain, &res, &ReservoirSpec::lorentzian(0.4, 0.1, 0.2), &init).unwrap();
        let state = LaplaceState::new(&cfg);
        let s = C64::new(r.gen_range(0.01..2.0), r.gen_range(-10.0..10.0));
        let (b1, b2) = state.bath(s).unwrap();
        let want = dense_solve(chain.k(), s, b1, b2, init.amplitudes());
        let got = state.f_all(s).unwrap();
        assert!(rel_vec(&got, &want) < 1e-9, "N={n} s={s}: {:e}", rel_vec(&got, &want));
    }
}

#[test]
fn recursion_matches_closed_form() {
    // A_m = ([iks + i√(k²s²+4)]^m − [iks − i√(k²s²+4)]^m) / (2^m i√(k²s²+4))
    let mut r = rng(5);
    let mut checked = 0;
    while checked < 200 {
        let k = r.gen_range(0.5..4.0);
        let s = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        if (k * k * s * s + 4.0).norm() <= 1e-3 {
            continue;
        }
        let x = C64::new(0.0, k) * s;
        let root = C64::new(0.0, 1.0) * (k * k * s * s + 4.0).sqrt();
        let (lp, lm) = ((x + root) / 2.0, (x - root) / 2.0);
        let seq = a_sequence(k, s, 60);
        for m in 0..=60 {
            let closed = (lp.powu(m as u32) - lm.powu(m as u32)) / root;
            let got = seq.get(m);
            let scale = got.norm().max(closed.norm()).max(1.0);
            assert!((got - closed).norm() / scale < 1e-9, "m={m} k={k} s={s}");
        }
        checked += 1;
    }
}

#[test]
fn interior_rows_hold() {
    let mut r = rng(21);
    for _ in 0..20 {
        let n = r.gen_range(3..=15);
        let init = random_state(&mut r, n);
        let b1v = C64::new(r.gen_range(0.0..1.0), r.gen_range(-1.0..1.0));
        let b2v = C64::new(r.gen_range(0.0..1.0), r.gen_range(-1.0..1.0));
        let state = LaplaceState::with_kernels(
            ChainSpec::new(n, 1.0, 0.0),
            Arc::new(FnKernel(move |_| b1v)),
            Arc::new(FnKernel(move |_| b2v)),
            &init,
        );
        let s = C64::new(r.gen_range(0.05..1.0), r.gen_range(-3.0..3.0));
        let f = state.f_all(s).unwrap();
        let c = init.amplitudes();
        let hop = C64::new(0.0, 0.5);
        let first = (s + b1v) * f[0] + hop * f[1] - c[0];
        assert!(first.norm() < 1e-11);
        for i in 1..n - 1 {
            let row = s * f[i] + hop * (f[i - 1] + f[i + 1]) - c[i];
            assert!(row.norm() < 1e-11, "row {i}: {}", row.norm());
        }
    }
}

#[test]
fn mirror_symmetry_for_random_configs() {
    let mut r = rng(3);
    for _ in 0..20 {
        let n = r.gen_range(2..=12);
        let init = random_state(&mut r, n);
        let k1: Arc<dyn LaplaceKernel> =
            Arc::new(KernelHandle::new(&ReservoirSpec::lorentzian(0.5, 0.1, 0.3), 1.0));
        let k2: Arc<dyn LaplaceKernel> = Arc::new(KernelHandle::new(&ReservoirSpec::ohmic(0.4, 1.0, 2.0), 1.0));
        let state = LaplaceState::with_kernels(ChainSpec::new(n, 1.0, 1.0), k1, k2, &init);
        let mirror = state.mirrored();
        let s = C64::new(r.gen_range(0.05..1.0), r.gen_range(-3.0..3.0));
        let f = state.f_all(s).unwrap();
        let g = mirror.f_all(s).unwrap();
        for i in 0..n {
            assert!((f[i] - g[n - 1 - i]).norm() <= 1e-13 * f[i].norm().max(1e-3));
        }
    }
}

#[test]
fn initial_value_theorem_every_site() {
    let res = ReservoirSpec::ohmic(0.3, 1.0, 1.0);
    let init = InitialState::uniform_channel(7).unwrap();
    let cfg = validate(&ChainSpec::new(7, 1.0, 1.0), &res, &res, &init).unwrap();
    let state = LaplaceState::new(&cfg);
    for s in [1e4, 1e6, 1e8] {
        let s = C64::new(s, 0.0);
        let f = state.f_all(s).unwrap();
        for (fi, ci) in f.iter().zip(init.amplitudes()) {
            assert!((s * fi - ci).norm() < 10.0 / s.re);
        }
    }
}

#[test]
fn forward_recursion_degrades_where_two_sided_does_not() {
    let init = InitialState::site(40, 1).unwrap();
    let state =
        LaplaceState::with_kernels(ChainSpec::new(40, 1.0, 0.0), Arc::new(NoKernel), Arc::new(NoKernel), &init);
    let s = C64::new(0.3, 2.5);
    let want = dense_solve(2.0, s, C64::new(0.0, 0.0), C64::new(0.0, 0.0), init.amplitudes());
    assert!(rel_vec(&state.f_all(s).unwrap(), &want) < 1e-12);
    assert!(rel_vec(&state.forward_recursion(s).unwrap(), &want) > 1e-6);
}
