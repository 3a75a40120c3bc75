//! Laplace-space solution of the chain: the `A_m(s)` sequence, the closed
//! form of `F₁(s)` and every other `F_i(s)` expressed through it.
//!
//! With `k = 2/𝒥` the transformed equations read
//!
//! ```text
//! (s + B₁) F₁ + (i/k) F₂           = c₁(0)
//!  s F_i + (i/k)(F_{i−1} + F_{i+1}) = c_i(0)      1 < i < N
//! (s + B₂) F_N + (i/k) F_{N−1}      = c_N(0)
//! ```
//!
//! `F_i = P_i F₁ − ik Σ_{n<i} A_{i−n} c_n` with `P_i = A_i + ikB₁A_{i−1}`
//! solves all rows but the last; the last row fixes `F₁`. Evaluating
//! `F_i` this way for large `N` amplifies rounding by `|A_N|²`, so
//! [`LaplaceState::f_all`] instead combines the left solution `P_i` with
//! its mirror image `Q_i` (the same construction started from site `N`):
//!
//! ```text
//! F_i = (ik/D) [ P_i Σ_{j≥i} Q_j c_j + Q_i Σ_{j<i} P_j c_j ]
//! ```
//!
//! which at `i = 1` is the closed form for `F₁`. Both factors are scaled
//! by powers of `σ = max(1, |ks|)` so nothing overflows.

use crate::kernels::{KernelError, KernelHandle, LaplaceKernel};
use crate::model::{ChainSpec, InitialState, ValidatedConfig};
use num_complex::Complex64 as C64;
use std::sync::Arc;
use thiserror::Error;

/// Relative residual of the last row above which a result is rejected.
pub const CLOSING_TOLERANCE: f64 = 1e-9;

/// Denominator magnitude treated as an exact zero.
pub const SINGULAR_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LaplaceError {
    #[error("SingularPoint: denominator vanishes at s = {s}")]
    SingularPoint { s: C64 },
    #[error("ConsistencyError: closing row residual {residual:e} at s = {s}")]
    Consistency { s: C64, residual: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `A_0 … A_{n_max}` at one `s`.
#[derive(Debug, Clone)]
pub struct ASequence {
    k: f64,
    s: C64,
    values: Vec<C64>,
}

impl ASequence {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn s(&self) -> C64 {
        self.s
    }

    /// `A_m`; `A_0 = 0`.
    pub fn get(&self, m: usize) -> C64 {
        self.values[m]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }
}

/// `A_0 = 0`, `A_1 = 1`, `A_{m+2} = iks A_{m+1} − A_m`.
pub fn a_sequence(k: f64, s: C64, n_max: usize) -> ASequence {
    let x = C64::new(0.0, k) * s;
    let mut values = Vec::with_capacity(n_max.max(1) + 1);
    values.push(C64::new(0.0, 0.0));
    values.push(C64::new(1.0, 0.0));
    for m in 2..=n_max {
        let next = x * values[m - 1] - values[m - 2];
        values.push(next);
    }
    values.truncate(n_max + 1);
    ASequence { k, s, values }
}

/// A chain with its two edge kernels and initial amplitudes.
#[derive(Clone)]
pub struct LaplaceState {
    chain: ChainSpec,
    kernels: [Arc<dyn LaplaceKernel>; 2],
    init: Vec<C64>,
}

impl std::fmt::Debug for LaplaceState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LaplaceState").field("chain", &self.chain).field("init", &self.init).finish_non_exhaustive()
    }
}

impl LaplaceState {
    pub fn new(config: &ValidatedConfig) -> Self {
        let omega_eg = config.chain.omega_eg;
        let b1: Arc<dyn LaplaceKernel> = Arc::new(KernelHandle::new(&config.reservoirs[0], omega_eg));
        let b2: Arc<dyn LaplaceKernel> = if config.reservoirs[0] == config.reservoirs[1] {
            b1.clone()
        } else {
            Arc::new(KernelHandle::new(&config.reservoirs[1], omega_eg))
        };
        Self { chain: config.chain.clone(), kernels: [b1, b2], init: config.initial.amplitudes().to_vec() }
    }

    pub fn with_kernels(
        chain: ChainSpec,
        b1: Arc<dyn LaplaceKernel>,
        b2: Arc<dyn LaplaceKernel>,
        init: &InitialState,
    ) -> Self {
        assert_eq!(chain.n_sites, init.len(), "initial state length must match the chain");
        Self { chain, kernels: [b1, b2], init: init.amplitudes().to_vec() }
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn n_sites(&self) -> usize {
        self.chain.n_sites
    }

    pub fn initial(&self) -> &[C64] {
        &self.init
    }

    /// Reservoirs swapped and the initial state reversed.
    pub fn mirrored(&self) -> Self {
        let mut init = self.init.clone();
        init.reverse();
        Self { chain: self.chain.clone(), kernels: [self.kernels[1].clone(), self.kernels[0].clone()], init }
    }

    /// `(B₁(s), B₂(s))`.
    pub fn bath(&self, s: C64) -> Result<(C64, C64), LaplaceError> {
        let b1 = self.kernels[0].laplace(s)?;
        if Arc::ptr_eq(&self.kernels[0], &self.kernels[1]) {
            return Ok((b1, b1));
        }
        Ok((b1, self.kernels[1].laplace(s)?))
    }

    pub fn is_meromorphic(&self) -> bool {
        self.kernels.iter().all(|k| k.is_meromorphic())
    }

    /// Extent in `|Im s|` beyond which every `F_i` is smooth: the hopping
    /// band plus the kernels' own scales.
    pub fn frequency_scale(&self) -> f64 {
        self.chain.coupling + self.kernels[0].frequency_scale().max(self.kernels[1].frequency_scale())
    }

    /// `F₁(s)` from the closed form.
    pub fn f1(&self, s: C64) -> Result<C64, LaplaceError> {
        let (b1, b2) = self.bath(s)?;
        let parts = self.scaled_parts(s, b1, b2)?;
        let ik = C64::new(0.0, self.chain.k());
        Ok(ik * parts.t[0] / parts.den)
    }

    /// All `F_i(s)`, checked against the closing row.
    pub fn f_all(&self, s: C64) -> Result<Vec<C64>, LaplaceError> {
        let (b1, b2) = self.bath(s)?;
        self.f_all_with(s, b1, b2)
    }

    /// [`f_all`](Self::f_all) with the kernel values supplied by the caller.
    pub fn f_all_with(&self, s: C64, b1: C64, b2: C64) -> Result<Vec<C64>, LaplaceError> {
        let n = self.n_sites();
        let parts = self.scaled_parts(s, b1, b2)?;
        let ik = C64::new(0.0, self.chain.k());
        let front = ik * parts.sigma / parts.den;
        let mut f = Vec::with_capacity(n);
        let mut u = C64::new(0.0, 0.0);
        for i in 0..n {
            f.push(front * (parts.p[i] * parts.t[i] + parts.q[i] * u));
            u = (u + parts.p[i] * self.init[i]) / parts.sigma;
        }
        let residual = self.closing_residual(s, b2, &f);
        if !(residual < CLOSING_TOLERANCE) {
            return Err(LaplaceError::Consistency { s, residual });
        }
        Ok(f)
    }

    /// `F_i = P_i F₁ − ik Σ_{n<i} A_{i−n} c_n` evaluated literally from
    /// `F₁`. Loses accuracy quickly as `N |s|` grows.
    pub fn forward_recursion(&self, s: C64) -> Result<Vec<C64>, LaplaceError> {
        let n = self.n_sites();
        let (b1, _) = self.bath(s)?;
        let f1 = self.f1(s)?;
        let k = self.chain.k();
        let ik = C64::new(0.0, k);
        let a = a_sequence(k, s, n);
        let mut f = vec![f1];
        for i in 2..=n {
            let mut acc = (a.get(i) + ik * b1 * a.get(i - 1)) * f1;
            for m in 1..i {
                acc -= ik * a.get(i - m) * self.init[m - 1];
            }
            f.push(acc);
        }
        Ok(f)
    }

    /// Relative residual of `(s+B₂)F_N + (i/k)F_{N−1} = c_N(0)`.
    pub fn closing_residual(&self, s: C64, b2: C64, f: &[C64]) -> f64 {
        let n = self.n_sites();
        let k = self.chain.k();
        let edge = (s + b2) * f[n - 1];
        let hop = C64::new(0.0, 1.0 / k) * f[n - 2];
        let c_n = self.init[n - 1];
        let scale = edge.norm() + hop.norm() + c_n.norm();
        if scale == 0.0 {
            return 0.0;
        }
        (edge + hop - c_n).norm() / scale
    }

    fn scaled_parts(&self, s: C64, b1: C64, b2: C64) -> Result<ScaledParts, LaplaceError> {
        let n = self.n_sites();
        let k = self.chain.k();
        let ik = C64::new(0.0, k);
        let x = ik * s;
        let sigma = x.norm().max(1.0);
        let inv = 1.0 / sigma;

        // ã_m = A_m / σ^m
        let mut a = Vec::with_capacity(n + 1);
        a.push(C64::new(0.0, 0.0));
        a.push(C64::new(inv, 0.0));
        for m in 2..=n {
            let next = (x * a[m - 1] - a[m - 2] * inv) * inv;
            a.push(next);
        }

        let p: Vec<C64> = (1..=n).map(|i| a[i] + ik * b1 * a[i - 1] * inv).collect();
        let q: Vec<C64> = (1..=n).map(|j| a[n + 1 - j] + ik * b2 * a[n - j] * inv).collect();

        let s2 = s + b2;
        let den = ik * s2 * a[n]
            - (1.0 + k * k * b1 * s2) * a[n - 1] * inv
            - ik * b1 * a[n - 2] * (inv * inv);
        if !(den.norm() >= SINGULAR_THRESHOLD) || !den.is_finite() {
            return Err(LaplaceError::SingularPoint { s });
        }

        let mut t = vec![C64::new(0.0, 0.0); n];
        let mut acc = C64::new(0.0, 0.0);
        for j in (0..n).rev() {
            acc = q[j] * self.init[j] + acc * inv;
            t[j] = acc;
        }
        Ok(ScaledParts { sigma, p, q, t, den })
    }
}

struct ScaledParts {
    sigma: f64,
    /// `P_i / σ^i`
    p: Vec<C64>,
    /// `Q_j / σ^{N+1−j}`
    q: Vec<C64>,
    /// `Σ_{j≥i} σ^{i−j} q_j c_j`
    t: Vec<C64>,
    /// `D / σ^N`
    den: C64,
}
