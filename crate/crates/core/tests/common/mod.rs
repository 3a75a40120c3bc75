//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinchain::model::InitialState;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solve the N×N transformed system directly.
pub fn dense_solve(k: f64, s: C64, b1: C64, b2: C64, init: &[C64]) -> Vec<C64> {
    let n = init.len();
    let hop = C64::new(0.0, 1.0 / k);
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        m[(i, i)] = s;
        if i + 1 < n {
            m[(i, i + 1)] = hop;
            m[(i + 1, i)] = hop;
        }
    }
    m[(0, 0)] += b1;
    m[(n - 1, n - 1)] += b2;
    let rhs = DVector::from_column_slice(init);
    let x = m.lu().solve(&rhs).expect("dense system is singular");
    x.iter().copied().collect()
}

/// `∫₀^∞ e^{−st} r(t) dt` by double-exponential quadrature on unit panels,
/// truncated where `e^{−Re s·t}` drops below 1e-17.
pub fn numerical_laplace<R: Fn(f64) -> C64>(r: R, s: C64) -> C64 {
    let t_end = 40.0 / s.re;
    let width = 1.0;
    let panels = (t_end / width).ceil() as usize;
    let mut total = C64::new(0.0, 0.0);
    for p in 0..panels {
        let (a, b) = (p as f64 * width, (p + 1) as f64 * width);
        let f = |t: f64| (-s * t).exp() * r(t);
        let re = quadrature::double_exponential::integrate(|t| f(t).re, a, b, 1e-14).integral;
        let im = quadrature::double_exponential::integrate(|t| f(t).im, a, b, 1e-14).integral;
        total += C64::new(re, im);
    }
    total
}

pub fn random_state<G: Rng>(rng: &mut G, n: usize) -> InitialState {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    InitialState::new(v.iter().map(|z| z / norm).collect()).unwrap()
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Largest relative deviation between two vectors, normalised by the
/// larger vector norm.
pub fn rel_vec(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}
