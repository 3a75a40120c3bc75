//! Reservoir spectral densities `J(ω)`, the memory kernels
//! `R(t) = ∫ J(ω) e^{-i(ω-ω_eg)t} dω` they induce, and their Laplace
//! transforms `B(s)`.
//!
//! Lorentzian and Ohmic reservoirs have closed forms for both kernels.
//! Tabulated densities are linearly interpolated and integrated
//! numerically, segment by segment.

use crate::model::ReservoirSpec;
use crate::quad;
use crate::specfun::{scaled_upper_incomplete_gamma, SpecFunError};
use num_complex::Complex64 as C64;
use statrs::function::gamma::gamma as gamma_fn;
use std::path::Path;
use thiserror::Error;

/// Absolute tolerance for the tabulated-density quadratures, relative to
/// a unit-area table.
pub const TABULATED_TOLERANCE: f64 = 1e-10;

const TABULATED_MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("BranchError: Ohmic kernel at s = {s} sits on or across the branch cut (needs Re s > 0)")]
    Branch { s: C64 },
    #[error("QuadratureError: tabulated kernel did not converge at s = {s} (error estimate {error:e})")]
    Quadrature { s: C64, error: f64 },
    #[error("DomainError: spectral density undefined at ω = {omega}")]
    Domain { omega: f64 },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("ParseError: line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Evaluates a reservoir's Laplace-domain kernel `B(s)`.
pub trait LaplaceKernel: Send + Sync {
    fn laplace(&self, s: C64) -> Result<C64, KernelError>;

    /// Rough extent in `|Im s|` of the kernel's structure; the inversion
    /// engine sizes its direct sum from it.
    fn frequency_scale(&self) -> f64 {
        0.0
    }

    /// True when `B(s)` has only poles, so contours may enter `Re s < 0`.
    fn is_meromorphic(&self) -> bool {
        false
    }
}

/// A kernel that is identically zero: an edge with no reservoir.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoKernel;

impl LaplaceKernel for NoKernel {
    fn laplace(&self, _s: C64) -> Result<C64, KernelError> {
        Ok(C64::new(0.0, 0.0))
    }

    fn is_meromorphic(&self) -> bool {
        true
    }
}

/// Wraps a closure as a kernel, for synthetic and test kernels.
pub struct FnKernel<F>(pub F);

impl<F> LaplaceKernel for FnKernel<F>
where
    F: Fn(C64) -> C64 + Send + Sync,
{
    fn laplace(&self, s: C64) -> Result<C64, KernelError> {
        Ok((self.0)(s))
    }
}

#[derive(Debug, Clone)]
enum Constants {
    Lorentzian {
        /// `γ/2 + iΔ_c`
        rate: C64,
    },
    Ohmic {
        omega_c: f64,
        s_param: f64,
        /// `𝒩 = 1/(ω_c² Γ(1+𝒮))`
        norm: f64,
    },
    Tabulated {
        samples: Vec<(f64, f64)>,
    },
}

/// A reservoir bound to the qubit frequency, with its derived constants.
#[derive(Debug, Clone)]
pub struct KernelHandle {
    reservoir: ReservoirSpec,
    omega_eg: f64,
    g2: f64,
    consts: Constants,
}

impl KernelHandle {
    pub fn new(reservoir: &ReservoirSpec, omega_eg: f64) -> Self {
        let g = reservoir.g();
        let consts = match reservoir {
            ReservoirSpec::Lorentzian { gamma, detuning, .. } => {
                Constants::Lorentzian { rate: C64::new(0.5 * gamma, *detuning) }
            }
            ReservoirSpec::Ohmic { omega_c, s_param, .. } => Constants::Ohmic {
                omega_c: *omega_c,
                s_param: *s_param,
                norm: 1.0 / (omega_c * omega_c * gamma_fn(1.0 + s_param)),
            },
            ReservoirSpec::Tabulated { samples, .. } => Constants::Tabulated { samples: samples.clone() },
        };
        Self { reservoir: reservoir.clone(), omega_eg, g2: g * g, consts }
    }

    pub fn reservoir(&self) -> &ReservoirSpec {
        &self.reservoir
    }

    pub fn omega_eg(&self) -> f64 {
        self.omega_eg
    }

    /// Spectral density `J(ω)`.
    pub fn spectral_density(&self, omega: f64) -> Result<f64, KernelError> {
        match &self.consts {
            Constants::Lorentzian { rate } => {
                let half_width = rate.re;
                let peak = self.omega_eg + rate.im;
                let d = omega - peak;
                Ok(self.g2 / std::f64::consts::PI * half_width / (d * d + half_width * half_width))
            }
            Constants::Ohmic { omega_c, s_param, norm } => {
                if omega < 0.0 {
                    return Err(KernelError::Domain { omega });
                }
                let x = omega / omega_c;
                Ok(norm * self.g2 * omega_c * x.powf(*s_param) * (-x).exp())
            }
            Constants::Tabulated { samples } => {
                if omega < 0.0 {
                    return Err(KernelError::Domain { omega });
                }
                Ok(self.g2 * interpolate(samples, omega))
            }
        }
    }

    /// Memory kernel `R(t)`, `t ≥ 0`.
    pub fn memory_kernel(&self, t: f64) -> C64 {
        if self.g2 == 0.0 {
            return C64::new(0.0, 0.0);
        }
        match &self.consts {
            Constants::Lorentzian { rate } => self.g2 * (-rate * t).exp(),
            Constants::Ohmic { omega_c, s_param, .. } => {
                let phase = C64::new(0.0, self.omega_eg * t);
                let base = C64::new(1.0, omega_c * t);
                self.g2 * (phase - (1.0 + s_param) * base.ln()).exp()
            }
            Constants::Tabulated { samples } => {
                let omega_eg = self.omega_eg;
                let r = integrate_segments(samples, &[], |w| C64::new(0.0, -(w - omega_eg) * t).exp());
                if !r.converged {
                    log::warn!("tabulated memory kernel at t={t}: quadrature error {:e}", r.abs_error);
                }
                self.g2 * r.value
            }
        }
    }

    /// Laplace-domain kernel `B(s)`, `Re s > 0`.
    pub fn laplace_kernel(&self, s: C64) -> Result<C64, KernelError> {
        if self.g2 == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        match &self.consts {
            Constants::Lorentzian { rate } => Ok(self.g2 / (s + rate)),
            Constants::Ohmic { omega_c, s_param, .. } => {
                if !(s.re > 0.0) {
                    return Err(KernelError::Branch { s });
                }
                // With K = (s − iω_eg)/ω_c and z = −iK the closed form
                // −g² (i^{1−𝒮}/ω_c) e^{−iK} K^𝒮 Γ(−𝒮, −iK) collapses on the
                // principal branch to −(i g²/ω_c) · e^z z^𝒮 Γ(−𝒮, z).
                let k = (s - C64::new(0.0, self.omega_eg)) / omega_c;
                let z = C64::new(0.0, -1.0) * k;
                let w = scaled_upper_incomplete_gamma(-s_param, z)?;
                Ok(C64::new(0.0, -self.g2 / omega_c) * w.value)
            }
            Constants::Tabulated { samples } => {
                let omega_eg = self.omega_eg;
                // The integrand peaks where ω − ω_eg = −Im s.
                let peak = omega_eg - s.im;
                let r = integrate_segments(samples, &[peak], |w| (s + C64::new(0.0, w - omega_eg)).inv());
                if !r.converged {
                    return Err(KernelError::Quadrature { s, error: r.abs_error });
                }
                Ok(self.g2 * r.value)
            }
        }
    }

    /// Location of the single Lorentzian pole `−γ/2 − iΔ_c`.
    pub fn lorentzian_pole(&self) -> Option<C64> {
        match &self.consts {
            Constants::Lorentzian { rate } => Some(-rate),
            _ => None,
        }
    }
}

impl LaplaceKernel for KernelHandle {
    fn laplace(&self, s: C64) -> Result<C64, KernelError> {
        self.laplace_kernel(s)
    }

    fn frequency_scale(&self) -> f64 {
        let g = self.g2.sqrt();
        match &self.consts {
            Constants::Lorentzian { rate } => rate.im.abs() + 2.0 * rate.re + g,
            Constants::Ohmic { omega_c, s_param, .. } => self.omega_eg + omega_c * (s_param + 10.0) + g,
            Constants::Tabulated { samples } => {
                let top = samples.last().map_or(0.0, |p| p.0);
                self.omega_eg.max((top - self.omega_eg).abs()) + g
            }
        }
    }

    fn is_meromorphic(&self) -> bool {
        matches!(self.consts, Constants::Lorentzian { .. }) || self.g2 == 0.0
    }
}

fn interpolate(samples: &[(f64, f64)], omega: f64) -> f64 {
    let first = samples[0].0;
    let last = samples[samples.len() - 1].0;
    if omega < first || omega > last {
        return 0.0;
    }
    let idx = samples.partition_point(|p| p.0 <= omega);
    if idx == 0 {
        return samples[0].1;
    }
    if idx >= samples.len() {
        return samples[samples.len() - 1].1;
    }
    let (w0, j0) = samples[idx - 1];
    let (w1, j1) = samples[idx];
    j0 + (j1 - j0) * (omega - w0) / (w1 - w0)
}

/// `∫ j(ω) f(ω) dω` over the table support with `j` the linear interpolant,
/// splitting additionally at `breaks` that fall inside a segment.
fn integrate_segments<F: Fn(f64) -> C64>(samples: &[(f64, f64)], breaks: &[f64], f: F) -> quad::QuadResult {
    let mut value = C64::new(0.0, 0.0);
    let mut abs_error = 0.0;
    let mut converged = true;
    let n_seg = (samples.len() - 1) as f64;
    for win in samples.windows(2) {
        let ((w0, j0), (w1, j1)) = (win[0], win[1]);
        let slope = (j1 - j0) / (w1 - w0);
        let g = |w: f64| f(w) * (j0 + slope * (w - w0));
        let mut cuts = vec![w0];
        cuts.extend(breaks.iter().copied().filter(|&b| b > w0 && b < w1));
        cuts.push(w1);
        for c in cuts.windows(2) {
            let r = quad::integrate(&g, c[0], c[1], TABULATED_TOLERANCE / n_seg, TABULATED_MAX_PANELS);
            value += r.value;
            abs_error += r.abs_error;
            converged &= r.converged;
        }
    }
    quad::QuadResult { value, abs_error, converged }
}

/// Parse a two-column `ω J(ω)` table; `#` starts a comment.
pub fn parse_tabulated(text: &str) -> Result<Vec<(f64, f64)>, KernelError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(KernelError::Parse { line: i + 1, msg: format!("expected 2 columns, found {}", fields.len()) });
        }
        let parse = |f: &str| {
            f.parse::<f64>()
                .map_err(|e| KernelError::Parse { line: i + 1, msg: format!("'{f}': {e}") })
        };
        out.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(out)
}

pub fn load_tabulated(path: &Path) -> Result<Vec<(f64, f64)>, KernelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KernelError::Parse { line: 0, msg: format!("{}: {e}", path.display()) })?;
    parse_tabulated(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lorentzian_peak_value() {
        let (g, gamma) = (0.3, 0.02);
        let h = KernelHandle::new(&ReservoirSpec::lorentzian(g, gamma, 0.0), 1.0);
        let peak = h.spectral_density(1.0).unwrap();
        assert!((peak - 2.0 * g * g / (PI * gamma)).abs() < 1e-12);
    }

    #[test]
    fn ohmic_density_peaks_at_s_times_cutoff() {
        for (s_param, omega_c) in [(1.0, 1.0), (2.0, 1.0), (3.0, 0.5), (1.5, 2.0)] {
            let h = KernelHandle::new(&ReservoirSpec::ohmic(0.3, omega_c, s_param), 1.0);
            let grid: Vec<f64> = (1..20_000).map(|i| i as f64 * 1e-3).collect();
            let argmax = grid
                .iter()
                .copied()
                .max_by(|a, b| h.spectral_density(*a).unwrap().total_cmp(&h.spectral_density(*b).unwrap()))
                .unwrap();
            assert!((argmax - s_param * omega_c).abs() < 2e-3, "S={s_param}: argmax {argmax}");
        }
        let h = KernelHandle::new(&ReservoirSpec::ohmic(0.3, 1.0, 1.0), 1.0);
        assert!(matches!(h.spectral_density(-0.1), Err(KernelError::Domain { .. })));
    }

    #[test]
    fn kernels_at_origin_equal_g_squared() {
        let specs = [ReservoirSpec::lorentzian(0.3, 0.02, 0.4), ReservoirSpec::ohmic(0.3, 1.0, 2.5)];
        for spec in specs {
            let h = KernelHandle::new(&spec, 1.0);
            assert!((h.memory_kernel(0.0) - c(0.09, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn lorentzian_kernel_values() {
        let h = KernelHandle::new(&ReservoirSpec::lorentzian(0.3, 0.02, 0.0), 0.0);
        let r = h.memory_kernel(10.0);
        assert!((r - c(0.09 * (-0.1_f64).exp(), 0.0)).norm() < 1e-15);
        assert!((r.re - 0.081_435).abs() < 1e-6);
        let b = h.laplace_kernel(c(0.0, 0.0)).unwrap();
        assert!((b - c(9.0, 0.0)).norm() < 1e-12);
        let far = h.laplace_kernel(c(1e8, 0.0)).unwrap();
        assert!((far * 1e8 - c(0.09, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn ohmic_memory_kernel_value() {
        let h = KernelHandle::new(&ReservoirSpec::ohmic(0.3, 1.0, 1.0), 1.0);
        let want = 0.09 * C64::new(0.0, 1.0).exp() * c(1.0, 1.0).powi(-2);
        assert!((h.memory_kernel(1.0) - want).norm() < 1e-15);
    }

    #[test]
    fn ohmic_laplace_kernel_rejects_branch() {
        let h = KernelHandle::new(&ReservoirSpec::ohmic(0.3, 1.0, 1.0), 1.0);
        assert!(matches!(h.laplace_kernel(c(0.0, 0.5)), Err(KernelError::Branch { .. })));
        assert!(matches!(h.laplace_kernel(c(-0.2, 0.5)), Err(KernelError::Branch { .. })));
    }

    #[test]
    fn zero_coupling_kernels_vanish() {
        let specs = [
            ReservoirSpec::lorentzian(0.0, 0.5, 1.0),
            ReservoirSpec::ohmic(0.0, 1.0, 2.0),
            ReservoirSpec::Tabulated { g: 0.0, samples: vec![(0.0, 1.0), (1.0, 1.0)] },
        ];
        for spec in specs {
            let h = KernelHandle::new(&spec, 1.0);
            for t in [0.0, 0.7, 12.0] {
                assert_eq!(h.memory_kernel(t), c(0.0, 0.0));
            }
            assert_eq!(h.laplace_kernel(c(0.3, -2.0)).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn lorentzian_pole_residue() {
        let h = KernelHandle::new(&ReservoirSpec::lorentzian(0.7, 0.3, -0.4), 2.0);
        let pole = h.lorentzian_pole().unwrap();
        assert!((pole - c(-0.15, 0.4)).norm() < 1e-15);
        for eps in [1e-3, 1e-6, 1e-9] {
            let s = pole + c(eps, eps);
            let b = h.laplace_kernel(s).unwrap();
            assert!((b.norm() * (s - pole).norm() - 0.49).abs() < 1e-9);
        }
    }

    #[test]
    fn tabulated_box_density() {
        // j = 1/2 on [0, 2]: R(t) = g² e^{iω_eg t} (1 − e^{−2it})/(2it)
        let h = KernelHandle::new(
            &ReservoirSpec::Tabulated { g: 0.5, samples: vec![(0.0, 0.5), (1.0, 0.5), (2.0, 0.5)] },
            1.0,
        );
        assert!((h.memory_kernel(0.0) - c(0.25, 0.0)).norm() < 1e-12);
        let t = 3.0;
        let want = 0.25 * C64::new(0.0, t).exp() * (1.0 - C64::new(0.0, -2.0 * t).exp()) / C64::new(0.0, 2.0 * t);
        assert!((h.memory_kernel(t) - want).norm() < 1e-11);
        // B(s) = g²/2 ∫_0^2 dω/(s + i(ω−1)) = g²/(2i) [ln(s+i) − ln(s−i)]
        let s = c(0.4, 0.3);
        let want = 0.25 / C64::new(0.0, 2.0) * ((s + C64::i()).ln() - (s - C64::i()).ln());
        assert!((h.laplace_kernel(s).unwrap() - want).norm() < 1e-10);
    }

    #[test]
    fn parse_table() {
        let text = "# omega J\n0.0 0.1\n0.5, 0.2 # trailing\n\n1.0\t0.0\n";
        let t = parse_tabulated(text).unwrap();
        assert_eq!(t, vec![(0.0, 0.1), (0.5, 0.2), (1.0, 0.0)]);
        assert!(matches!(parse_tabulated("1 2 3"), Err(KernelError::Parse { line: 1, .. })));
        assert!(matches!(parse_tabulated("1 x"), Err(KernelError::Parse { .. })));
    }
}
