//! Numerical inverse Laplace transform onto a time grid.
//!
//! [`Method::FourierEuler`] discretises the Bromwich integral on the line
//! `Re s = a` with spacing `π/t`, a separate line per time point:
//!
//! ```text
//! f(t) ≈ e^{at}/(2t) Σ_{k∈ℤ} (−1)^k F(a + ikπ/t)
//! ```
//!
//! The aliasing error is `e^{−2at} f(3t) + …`, so `a·t` (the plan's
//! `contour_shift`) sets it directly. The symmetric partial sums are taken
//! to `n` terms, then binomially averaged over `euler_depth` more.
//!
//! [`Method::FixedTalbot`] deforms the contour into the left half-plane and
//! is therefore only offered when the image is meromorphic.

use crate::laplace::{LaplaceError, LaplaceState};
use crate::model::{Provenance, TimeGrid, Trajectory};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Factor applied to `contour_shift` on the single retry.
pub const RETRY_FACTOR: f64 = 1.25;

/// Partial sums dropped from the Euler mean for the error estimate.
const ESTIMATE_LAG: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FourierEuler,
    FixedTalbot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionPlan {
    pub method: Method,
    /// Product `a·t` of abscissa and time (FourierEuler only).
    pub contour_shift: f64,
    /// Minimum number of direct terms (FourierEuler) or contour nodes
    /// (FixedTalbot).
    pub n_terms: usize,
    pub euler_depth: usize,
    pub target_tol: f64,
}

impl Default for InversionPlan {
    fn default() -> Self {
        Self { method: Method::FourierEuler, contour_shift: 12.0, n_terms: 2000, euler_depth: 40, target_tol: 1e-8 }
    }
}

impl InversionPlan {
    pub fn talbot() -> Self {
        Self { method: Method::FixedTalbot, n_terms: 32, ..Self::default() }
    }

    pub fn check(&self) -> Result<(), InversionError> {
        let bad = |msg: &str| Err(InversionError::Plan(msg.to_string()));
        if !(self.contour_shift > 0.0) || !self.contour_shift.is_finite() {
            return bad("contour_shift must be positive");
        }
        if self.n_terms < 32 {
            return bad("n_terms must be at least 32");
        }
        if self.method == Method::FourierEuler && self.euler_depth <= ESTIMATE_LAG {
            return bad("euler_depth must exceed 8");
        }
        if !(self.target_tol >= 1e-12) {
            return bad("target_tol must be at least 1e-12");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InversionError {
    #[error("ContourError: at t = {t}: {source}")]
    Contour { t: f64, source: LaplaceError },
    #[error("ToleranceNotMet: error estimate {estimate:e} at t = {t} exceeds {target:e}")]
    ToleranceNotMet { t: f64, estimate: f64, target: f64 },
    #[error("MethodUnavailable: {0}")]
    MethodUnavailable(String),
    #[error("PlanError: {0}")]
    Plan(String),
}

/// A vector-valued Laplace image `F(s)` with known `f(0)`.
pub trait LaplaceImage: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, s: C64) -> Result<Vec<C64>, LaplaceError>;
    fn initial_values(&self) -> Vec<C64>;
    /// `|Im s|` beyond which `F` is smooth.
    fn frequency_scale(&self) -> f64;
    fn is_meromorphic(&self) -> bool;
}

impl LaplaceImage for LaplaceState {
    fn dim(&self) -> usize {
        self.n_sites()
    }

    fn eval(&self, s: C64) -> Result<Vec<C64>, LaplaceError> {
        self.f_all(s)
    }

    fn initial_values(&self) -> Vec<C64> {
        self.initial().to_vec()
    }

    fn frequency_scale(&self) -> f64 {
        LaplaceState::frequency_scale(self)
    }

    fn is_meromorphic(&self) -> bool {
        LaplaceState::is_meromorphic(self)
    }
}

/// A closure-backed image.
pub struct FnImage<F> {
    f: F,
    initial: Vec<C64>,
    scale: f64,
    meromorphic: bool,
}

impl<F> FnImage<F>
where
    F: Fn(C64) -> Vec<C64> + Sync,
{
    pub fn new(f: F, initial: Vec<C64>, scale: f64, meromorphic: bool) -> Self {
        Self { f, initial, scale, meromorphic }
    }
}

impl<F> LaplaceImage for FnImage<F>
where
    F: Fn(C64) -> Vec<C64> + Sync,
{
    fn dim(&self) -> usize {
        self.initial.len()
    }

    fn eval(&self, s: C64) -> Result<Vec<C64>, LaplaceError> {
        Ok((self.f)(s))
    }

    fn initial_values(&self) -> Vec<C64> {
        self.initial.clone()
    }

    fn frequency_scale(&self) -> f64 {
        self.scale
    }

    fn is_meromorphic(&self) -> bool {
        self.meromorphic
    }
}

/// Values and error estimate at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub values: Vec<C64>,
    pub error: f64,
}

/// Invert `image` on every grid point. Points run in parallel; each point's
/// summation order is fixed, so results do not depend on the schedule.
pub fn invert<I: LaplaceImage>(image: &I, plan: &InversionPlan, grid: &TimeGrid) -> Result<Trajectory, InversionError> {
    plan.check()?;
    if plan.method == Method::FixedTalbot && !image.is_meromorphic() {
        return Err(InversionError::MethodUnavailable(
            "FixedTalbot needs a meromorphic image (Lorentzian or absent reservoirs)".into(),
        ));
    }
    let points: Vec<PointEstimate> =
        grid.values().par_iter().map(|&t| invert_point(image, plan, t)).collect::<Result<_, _>>()?;
    let worst = points.iter().map(|p| p.error).fold(0.0, f64::max);
    if worst > plan.target_tol {
        log::warn!("inversion error estimate {worst:e} exceeds target {:e}", plan.target_tol);
    }
    let error_estimates = points.iter().map(|p| p.error).collect();
    let amplitudes = points.into_iter().map(|p| p.values).collect();
    Ok(Trajectory {
        grid: grid.clone(),
        amplitudes,
        provenance: Provenance::LaplaceInversion,
        error_estimates: Some(error_estimates),
    })
}

/// Reject a trajectory whose error estimates exceed the plan's target.
pub fn check_tolerance(traj: &Trajectory, plan: &InversionPlan) -> Result<(), InversionError> {
    let Some(errors) = &traj.error_estimates else { return Ok(()) };
    for (&t, &estimate) in traj.grid.values().iter().zip(errors) {
        if estimate > plan.target_tol {
            return Err(InversionError::ToleranceNotMet { t, estimate, target: plan.target_tol });
        }
    }
    Ok(())
}

/// Invert at a single time, retrying once on a shifted contour.
pub fn invert_point<I: LaplaceImage>(image: &I, plan: &InversionPlan, t: f64) -> Result<PointEstimate, InversionError> {
    if t == 0.0 {
        return Ok(PointEstimate { values: image.initial_values(), error: 0.0 });
    }
    let attempt = |shift: f64| match plan.method {
        Method::FourierEuler => fourier_euler(image, plan, shift, t),
        Method::FixedTalbot => fixed_talbot(image, plan.n_terms, t),
    };
    match attempt(plan.contour_shift) {
        Ok(p) => Ok(p),
        Err(first) => {
            log::debug!("t={t}: {first}; retrying with a shifted contour");
            attempt(plan.contour_shift * RETRY_FACTOR).map_err(|source| InversionError::Contour { t, source })
        }
    }
}

fn fourier_euler<I: LaplaceImage>(image: &I, plan: &InversionPlan, shift: f64, t: f64) -> Result<PointEstimate, LaplaceError> {
    let dim = image.dim();
    let a = shift / t;
    let h = PI / t;
    let n = plan.n_terms.max((2.0 * image.frequency_scale() * t / PI).ceil() as usize);
    let m = plan.euler_depth;

    let mut sum = image.eval(C64::new(a, 0.0))?;
    let mut tail: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    for k in 1..=n + m {
        let y = k as f64 * h;
        let up = image.eval(C64::new(a, y))?;
        let down = image.eval(C64::new(a, -y))?;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for ((acc, u), d) in sum.iter_mut().zip(&up).zip(&down) {
            *acc += sign * (u + d);
        }
        if k >= n {
            tail.push(sum.clone());
        }
    }

    let full = euler_mean(&tail, m, dim);
    let lagged = euler_mean(&tail, m - ESTIMATE_LAG, dim);
    let scale = shift.exp() / (2.0 * t);
    let mut error = 0.0_f64;
    let values: Vec<C64> = full
        .iter()
        .zip(&lagged)
        .map(|(f, l)| {
            error = error.max(scale * (f - l).norm());
            scale * f
        })
        .collect();
    Ok(PointEstimate { values, error: error + (-2.0 * shift).exp() })
}

/// `Σ_{j=0}^{m} C(m,j) 2^{−m} S_j` over the first `m+1` stored sums.
fn euler_mean(sums: &[Vec<C64>], m: usize, dim: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); dim];
    let mut w = 0.5_f64.powi(m as i32);
    for (j, s) in sums.iter().take(m + 1).enumerate() {
        for (o, v) in out.iter_mut().zip(s) {
            *o += w * v;
        }
        w *= (m - j) as f64 / (j + 1) as f64;
    }
    out
}

fn fixed_talbot<I: LaplaceImage>(image: &I, m: usize, t: f64) -> Result<PointEstimate, LaplaceError> {
    let full = talbot_sum(image, m, t)?;
    let coarse = talbot_sum(image, m - ESTIMATE_LAG, t)?;
    let error = full.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(PointEstimate { values: full, error })
}

fn talbot_sum<I: LaplaceImage>(image: &I, m: usize, t: f64) -> Result<Vec<C64>, LaplaceError> {
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let mut acc: Vec<C64> = image.eval(C64::new(r, 0.0))?.into_iter().map(|v| v * (r * t).exp()).collect();
    for k in 1..m {
        let theta = k as f64 * PI / mf;
        let cot = 1.0 / theta.tan();
        let s = C64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let upper = image.eval(s)?;
        let lower = image.eval(s.conj())?;
        let wu = (s * t).exp() * C64::new(1.0, sigma);
        let wl = (s.conj() * t).exp() * C64::new(1.0, -sigma);
        for ((o, u), l) in acc.iter_mut().zip(&upper).zip(&lower) {
            *o += wu * u + wl * l;
        }
    }
    let scale = r / (2.0 * mf);
    Ok(acc.into_iter().map(|v| v * scale).collect())
}
