//! Upper incomplete gamma function `Γ(a, z)` for real `a` (any sign) and
//! complex `z`, and the exponential integral `E₁(z) = Γ(0, z)`.
//!
//! Principal branch throughout, cut along the negative real `z` axis.
//! Internally every evaluation path produces the scaled quantity
//! `w = e^z z^{-a} Γ(a, z)`, which stays O(1/|z|) for large `|z|`; the
//! unscaled value is recovered only at the public boundary. The Ohmic
//! Laplace kernel consumes the scaled form directly so it never overflows
//! far out along the negative real axis.
//!
//! Evaluation regions:
//! - power series for `|z| < max(1, a+1)`, and hugging the cut (`Re z < 0`,
//!   `|z| + Re z` small) up to moderate `|z|`, where its terms share a sign;
//! - the asymptotic expansion hugging the cut at large `|z|`;
//! - the Legendre continued fraction (modified Lentz) everywhere else;
//! - non-positive integer `a = -n` in the series region goes through the
//!   finite-sum reduction `Γ(-n,z) = [e^{-z} z^{-n} Σ (-1)^k (n-k-1)! z^k
//!   + (-1)^n E₁(z)] / n!` for `|z| ≤ 2`, and through the limit form of the
//!   power series beyond that, where the reduction cancels;
//! - positive integer `a` uses the finite closed form.

use num_complex::Complex64 as C64;
use statrs::function::gamma::gamma as gamma_fn;
use thiserror::Error;

/// Iteration cap for every series and continued fraction.
pub const MAX_ITER: usize = 10_000;

/// `a` within this distance of a non-positive integer takes the
/// integer-reduction path.
pub const INTEGER_TOLERANCE: f64 = 1e-9;

const EPS: f64 = f64::EPSILON;
const TINY: f64 = 1e-300;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Points with `Re z < 0` and `|z| + Re z` below this are treated as hugging
/// the branch cut, where the continued fraction stalls.
const CUT_BAND: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaResult {
    pub value: C64,
    /// Absolute error estimate on `value`.
    pub est_error: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpecFunError {
    #[error("DomainError: Γ({a}, z) is singular at z = {z}")]
    Domain { a: f64, z: C64 },
    #[error("ConvergenceError: no convergence after {iterations} iterations (partial value {}, est. error {:e})", partial.value, partial.est_error)]
    Convergence { partial: GammaResult, iterations: usize },
}

/// Scaled value `w = e^z z^{-a} Γ(a,z)` and its relative error estimate.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    w: C64,
    rel_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Series,
    Asymptotic,
    ContinuedFraction,
}

fn hugs_cut(z: C64) -> bool {
    z.re < 0.0 && z.norm() + z.re < CUT_BAND
}

fn asymptotic_radius(a: f64) -> f64 {
    40.0 + 2.0 * a.abs()
}

fn region(a: f64, z: C64) -> Region {
    let r = z.norm();
    if hugs_cut(z) {
        if r < asymptotic_radius(a) {
            Region::Series
        } else {
            Region::Asymptotic
        }
    } else if r < 1.0_f64.max(a + 1.0) {
        Region::Series
    } else {
        Region::ContinuedFraction
    }
}

/// `Some(n)` when `a` is (within tolerance) the non-positive integer `-n`.
fn nonpositive_integer(a: f64) -> Option<u32> {
    let n = a.round();
    if n <= 0.0 && (a - n).abs() < INTEGER_TOLERANCE {
        Some((-n) as u32)
    } else {
        None
    }
}

fn convergence(w: C64, rel_err: f64, scale: C64, iterations: usize) -> SpecFunError {
    let value = scale * w;
    SpecFunError::Convergence {
        partial: GammaResult { value, est_error: value.norm() * rel_err },
        iterations,
    }
}

/// Legendre continued fraction, modified Lentz. Returns `w` directly.
fn continued_fraction(a: f64, z: C64) -> Result<Scaled, (Scaled, usize)> {
    let tiny = C64::new(TINY, 0.0);
    let mut b = z + 1.0 - a;
    let mut c = C64::new(1.0 / TINY, 0.0);
    let mut d = if b.norm() < TINY { tiny.inv() } else { b.inv() };
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = b + an * d;
        if d.norm() < TINY {
            d = tiny;
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = tiny;
        }
        d = d.inv();
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < EPS {
            return Ok(Scaled { w: h, rel_err: 4.0 * EPS * (i as f64).sqrt().max(1.0) });
        }
    }
    Err((Scaled { w: h, rel_err: f64::NAN }, MAX_ITER))
}

/// Asymptotic expansion `w ~ (1/z) Σ_k (a-1)(a-2)…(a-k) / z^k`.
fn asymptotic(a: f64, z: C64) -> Result<Scaled, (Scaled, usize)> {
    let zinv = z.inv();
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut prev = f64::INFINITY;
    for k in 1..=MAX_ITER {
        term *= (a - k as f64) * zinv;
        let t = term.norm();
        if t > prev {
            // Past the smallest term: the remainder is bounded by it.
            return Ok(Scaled { w: sum * zinv, rel_err: prev / sum.norm() + 4.0 * EPS });
        }
        sum += term;
        prev = t;
        if t < EPS * sum.norm() {
            return Ok(Scaled { w: sum * zinv, rel_err: 4.0 * EPS });
        }
    }
    Err((Scaled { w: sum * zinv, rel_err: prev / sum.norm() }, MAX_ITER))
}

/// `Γ(a,z) = Γ(a) − z^a Σ_k (−z)^k / (k! (a+k))` for `a` away from the
/// non-positive integers. Returns the unscaled value.
fn series_noninteger(a: f64, z: C64) -> Result<GammaResult, (GammaResult, usize)> {
    let mz = -z;
    let mut term = C64::new(1.0, 0.0); // (−z)^k / k!
    let mut sum = term / a;
    let mut abs_sum = sum.norm();
    let r = z.norm();
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=MAX_ITER {
        iterations = k;
        term *= mz / k as f64;
        let contrib = term / (a + k as f64);
        sum += contrib;
        abs_sum += contrib.norm();
        if (k as f64) > r && contrib.norm() < EPS * sum.norm() {
            converged = true;
            break;
        }
    }
    let za = (a * z.ln()).exp();
    let gamma_a = gamma_fn(a);
    let lower = za * sum;
    let value = C64::new(gamma_a, 0.0) - lower;
    let est_error = 8.0 * EPS * (gamma_a.abs() + za.norm() * abs_sum);
    let out = GammaResult { value, est_error };
    if converged {
        Ok(out)
    } else {
        Err((out, iterations))
    }
}

/// Limit of the power series at `a = -n`:
/// `Γ(-n,z) = ((-1)^n/n!)(ψ(n+1) − ln z) − z^{-n} Σ_{k≠n} (−z)^k / (k!(k−n))`.
/// Its terms share a sign along the negative real axis.
fn series_negative_integer(n: u32, z: C64) -> Result<GammaResult, (GammaResult, usize)> {
    let n_us = n as usize;
    let mz = -z;
    let mut term = C64::new(1.0, 0.0); // (−z)^k / k!
    let mut sum = if n == 0 { C64::new(0.0, 0.0) } else { term / -(n as f64) };
    let mut abs_sum = sum.norm();
    let r = z.norm();
    let mut n_fact = 1.0;
    let mut harmonic = 0.0;
    for j in 1..=n_us {
        n_fact *= j as f64;
        harmonic += 1.0 / j as f64;
    }
    let finish = |sum: C64, abs_sum: f64| {
        let ln_z = z.ln();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let psi = harmonic - EULER_GAMMA;
        let head = (C64::new(psi, 0.0) - ln_z) * (sign / n_fact);
        let zn = z.powi(-(n as i32));
        let value = head - zn * sum;
        let est_error = 8.0 * EPS * (head.norm() + zn.norm() * abs_sum);
        GammaResult { value, est_error }
    };
    for k in 1..=MAX_ITER {
        term *= mz / k as f64;
        if k == n_us {
            continue;
        }
        let contrib = term / (k as f64 - n as f64);
        sum += contrib;
        abs_sum += contrib.norm();
        if k > n_us && (k as f64) > r && contrib.norm() < EPS * sum.norm() {
            return Ok(finish(sum, abs_sum));
        }
    }
    Err((finish(sum, abs_sum), MAX_ITER))
}

/// `Γ(m, z) = (m−1)! e^{−z} Σ_{k<m} z^k / k!` for positive integer `m`.
fn positive_integer_closed_form(m: u32, z: C64) -> GammaResult {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut abs_sum = 1.0;
    let mut fact = 1.0;
    for k in 1..m as usize {
        term *= z / k as f64;
        sum += term;
        abs_sum += term.norm();
        fact *= k as f64;
    }
    let e = (-z).exp();
    let value = e * sum * fact;
    GammaResult { value, est_error: 4.0 * EPS * (m as f64) * e.norm() * abs_sum * fact }
}

/// `Some(m)` when `a` is exactly a small positive integer.
fn positive_integer(a: f64) -> Option<u32> {
    (a >= 1.0 && a <= 30.0 && a.fract() == 0.0).then_some(a as u32)
}

/// Radius below which the finite-sum reduction is taken for integer `a ≤ 0`;
/// beyond it the reduction cancels by roughly `|z|^n`.
const REDUCTION_RADIUS: f64 = 2.0;

/// `E₁(z) = −γ − ln z − Σ_{k≥1} (−z)^k / (k·k!)`.
fn e1_series(z: C64) -> Result<GammaResult, (GammaResult, usize)> {
    let mz = -z;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let r = z.norm();
    for k in 1..=MAX_ITER {
        term *= mz / k as f64;
        let contrib = term / k as f64;
        sum += contrib;
        abs_sum += contrib.norm();
        if (k as f64) > r && contrib.norm() < EPS * sum.norm().max(EPS) {
            let ln_z = z.ln();
            let value = -EULER_GAMMA - ln_z - sum;
            let est_error = 8.0 * EPS * (EULER_GAMMA + ln_z.norm() + abs_sum);
            return Ok(GammaResult { value, est_error });
        }
    }
    let value = -EULER_GAMMA - z.ln() - sum;
    Err((GammaResult { value, est_error: f64::NAN }, MAX_ITER))
}

/// Finite-sum reduction of `Γ(-n, z)` onto `Γ(0, z) = E₁(z)`:
///
/// `Γ(-n, z) = (1/n!) [ e^{-z}/z^n Σ_{k=0}^{n-1} (-1)^k (n-k-1)! z^k + (-1)^n Γ(0, z) ]`.
///
/// Exact in exact arithmetic; in floating point it cancels when `|z|` is
/// large, so [`upper_incomplete_gamma`] only takes it near the origin and
/// along the cut.
pub fn gamma_negative_integer(n: u32, z: C64) -> Result<GammaResult, SpecFunError> {
    if z == C64::new(0.0, 0.0) {
        return Err(SpecFunError::Domain { a: -(n as f64), z });
    }
    let e1 = exp_integral_e1(z)?;
    Ok(reduce_negative_integer(n, z, e1))
}

fn reduce_negative_integer(n: u32, z: C64, e1: GammaResult) -> GammaResult {
    if n == 0 {
        return e1;
    }
    let mut fact = vec![1.0_f64; n as usize + 1];
    for i in 1..=n as usize {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut poly = C64::new(0.0, 0.0);
    let mut abs_poly = 0.0;
    let mut zk = C64::new(1.0, 0.0);
    for k in 0..n as usize {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let t = zk * (sign * fact[n as usize - k - 1]);
        poly += t;
        abs_poly += t.norm();
        zk *= z;
    }
    let prefactor = (-z).exp() / z.powu(n);
    let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
    let value = (prefactor * poly + sign_n * e1.value) / fact[n as usize];
    let est_error =
        (4.0 * EPS * prefactor.norm() * abs_poly + e1.est_error + 4.0 * EPS * e1.value.norm()) / fact[n as usize];
    GammaResult { value, est_error }
}

/// Unscaled value in the series region.
fn series_region_value(a: f64, z: C64) -> Result<GammaResult, SpecFunError> {
    let conv = |(g, it): (GammaResult, usize)| SpecFunError::Convergence { partial: g, iterations: it };
    match nonpositive_integer(a) {
        Some(n) if z.norm() <= REDUCTION_RADIUS => {
            let e1 = e1_series(z).map_err(conv)?;
            Ok(reduce_negative_integer(n, z, e1))
        }
        Some(n) => series_negative_integer(n, z).map_err(conv),
        None => series_noninteger(a, z).map_err(conv),
    }
}

/// `e^{-z} z^a`, as a product so a large `Im z` keeps its phase bits.
fn unscale_factor(a: f64, z: C64) -> C64 {
    (-z).exp() * (a * z.ln()).exp()
}

fn to_scaled(a: f64, z: C64, g: GammaResult) -> Scaled {
    let scale = z.exp() * (-a * z.ln()).exp();
    let w = g.value * scale;
    let rel_err = if g.value.norm() > 0.0 { g.est_error / g.value.norm() } else { f64::INFINITY };
    Scaled { w, rel_err: rel_err + 4.0 * EPS }
}

fn scaled_impl(a: f64, z: C64) -> Result<Scaled, SpecFunError> {
    if z == C64::new(0.0, 0.0) {
        return Err(SpecFunError::Domain { a, z });
    }
    // For convergence failures report the partial unscaled value.
    let unscale = || unscale_factor(a, z);
    match region(a, z) {
        Region::ContinuedFraction => {
            continued_fraction(a, z).map_err(|(s, it)| convergence(s.w, s.rel_err, unscale(), it))
        }
        Region::Asymptotic => asymptotic(a, z).map_err(|(s, it)| convergence(s.w, s.rel_err, unscale(), it)),
        Region::Series => Ok(to_scaled(a, z, series_region_value(a, z)?)),
    }
}

/// Scaled upper incomplete gamma `e^z z^{-a} Γ(a, z)`, principal branch.
///
/// Bounded for large `|z|` in every direction, including along the cut.
pub fn scaled_upper_incomplete_gamma(a: f64, z: C64) -> Result<GammaResult, SpecFunError> {
    let s = scaled_impl(a, z)?;
    Ok(GammaResult { value: s.w, est_error: s.w.norm() * s.rel_err })
}

/// Upper incomplete gamma `Γ(a, z) = ∫_z^∞ t^{a-1} e^{-t} dt`, principal branch.
pub fn upper_incomplete_gamma(a: f64, z: C64) -> Result<GammaResult, SpecFunError> {
    if z == C64::new(0.0, 0.0) {
        if a > 0.0 {
            return Ok(GammaResult { value: C64::new(gamma_fn(a), 0.0), est_error: 8.0 * EPS * gamma_fn(a).abs() });
        }
        return Err(SpecFunError::Domain { a, z });
    }
    if let Some(m) = positive_integer(a) {
        return Ok(positive_integer_closed_form(m, z));
    }
    if region(a, z) == Region::Series {
        // Series paths produce the unscaled value natively.
        return series_region_value(a, z);
    }
    let s = scaled_impl(a, z)?;
    let value = unscale_factor(a, z) * s.w;
    Ok(GammaResult { value, est_error: value.norm() * (s.rel_err + 4.0 * EPS * (1.0 + z.norm())) })
}

/// Exponential integral `E₁(z) = Γ(0, z)`, principal branch.
pub fn exp_integral_e1(z: C64) -> Result<GammaResult, SpecFunError> {
    upper_incomplete_gamma(0.0, z)
}
