//! Populations, average-state fidelity and sweep reductions over
//! trajectories.

use crate::inversion::{invert, InversionError, InversionPlan};
use crate::laplace::LaplaceState;
use crate::model::{validate, ChainSpec, InitialState, ModelError, ReservoirSpec, TimeGrid, Trajectory};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesLabel {
    /// 1-based site index.
    Site(usize),
    Channel,
    Total,
    Fidelity,
}

impl std::fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeriesLabel::Site(i) => write!(f, "P_{i}"),
            SeriesLabel::Channel => f.write_str("P_channel"),
            SeriesLabel::Total => f.write_str("P_total"),
            SeriesLabel::Fidelity => f.write_str("fidelity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub label: SeriesLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    /// `sites[i]` is `P_{i+1}`.
    pub sites: Vec<ObservableSeries>,
    /// Sites `2..N−1`.
    pub channel: ObservableSeries,
    pub total: ObservableSeries,
}

pub fn populations(traj: &Trajectory) -> Populations {
    let n = traj.n_sites();
    let series = |label, values| ObservableSeries { grid: traj.grid.clone(), values, label };
    let sites = (0..n)
        .map(|i| series(SeriesLabel::Site(i + 1), traj.amplitudes.iter().map(|row| row[i].norm_sqr()).collect()))
        .collect();
    let channel = traj.amplitudes.iter().map(|row| row[1..n - 1].iter().map(|z| z.norm_sqr()).sum()).collect();
    let total = traj.amplitudes.iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum()).collect();
    Populations { sites, channel: series(SeriesLabel::Channel, channel), total: series(SeriesLabel::Total, total) }
}

/// `ℱ = 1/2 + |c_N|²/6 + |c_N|/3`.
pub fn fidelity_value(c_n_abs: f64) -> f64 {
    0.5 + c_n_abs * c_n_abs / 6.0 + c_n_abs / 3.0
}

pub fn fidelity(traj: &Trajectory) -> ObservableSeries {
    let n = traj.n_sites();
    ObservableSeries {
        grid: traj.grid.clone(),
        values: traj.amplitudes.iter().map(|row| fidelity_value(row[n - 1].norm())).collect(),
        label: SeriesLabel::Fidelity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub value: f64,
    pub time: f64,
}

/// Maximum of a series, refined by the parabola through the discrete
/// maximum and its two neighbours.
pub fn refined_max(series: &ObservableSeries) -> Peak {
    let t = series.grid.values();
    let v = &series.values;
    let i = v.iter().enumerate().fold(0, |best, (j, x)| if *x > v[best] { j } else { best });
    if i == 0 || i + 1 == v.len() {
        return Peak { value: v[i], time: t[i] };
    }
    let (t0, t1, t2) = (t[i - 1], t[i], t[i + 1]);
    let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
    // Newton form: y = y0 + d1 (x−t0) + d2 (x−t0)(x−t1)
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let d2 = (d12 - d01) / (t2 - t0);
    if !(d2 < 0.0) {
        return Peak { value: y1, time: t1 };
    }
    let x = 0.5 * (t0 + t1) - d01 / (2.0 * d2);
    let x = x.clamp(t0, t2);
    let value = y0 + d01 * (x - t0) + d2 * (x - t0) * (x - t1);
    Peak { value: value.max(y1), time: x }
}

/// Angular frequency of the largest non-zero FFT bin of the
/// mean-subtracted series. The grid must be uniform.
pub fn dominant_frequency(series: &ObservableSeries) -> f64 {
    dominant_frequency_below(series, f64::INFINITY)
}

/// As [`dominant_frequency`], ignoring bins above `omega_max`.
pub fn dominant_frequency_below(series: &ObservableSeries, omega_max: f64) -> f64 {
    let t = series.grid.values();
    let n = series.values.len();
    if n < 4 {
        return 0.0;
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    let bin_width = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let top = ((omega_max / bin_width).floor() as usize).min(n / 2);
    let bin = (1..=top).max_by(|a, b| buf[*a].norm().total_cmp(&buf[*b].norm())).unwrap_or(0);
    bin as f64 * bin_width
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SweepError {
    #[error("N = {n}: {source}")]
    Model { n: usize, source: ModelError },
    #[error("N = {n}: {source}")]
    Inversion { n: usize, source: InversionError },
}

/// Everything but the chain length for a fidelity sweep; the excitation
/// starts on site 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub coupling: f64,
    pub omega_eg: f64,
    pub reservoirs: [ReservoirSpec; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityRow {
    pub n_sites: usize,
    pub max_fidelity: f64,
    pub argmax_t: f64,
}

/// Default horizon `4N/𝒥`.
pub fn default_horizon(n_sites: usize, coupling: f64) -> f64 {
    4.0 * n_sites as f64 / coupling
}

/// Maximum of `ℱ(t)` on `[0, horizon]` for each `N`, sampled every
/// `spacing` and refined quadratically.
pub fn max_fidelity_sweep(
    template: &SweepTemplate,
    n_values: &[usize],
    horizon: Option<f64>,
    spacing: f64,
    plan: &InversionPlan,
) -> Result<Vec<FidelityRow>, SweepError> {
    n_values
        .par_iter()
        .map(|&n| {
            let chain = ChainSpec::new(n, template.coupling, template.omega_eg);
            let init = InitialState::site(n, 1).map_err(|source| SweepError::Model { n, source })?;
            let cfg = validate(&chain, &template.reservoirs[0], &template.reservoirs[1], &init)
                .map_err(|source| SweepError::Model { n, source })?;
            let t_max = horizon.unwrap_or_else(|| default_horizon(n, template.coupling));
            let points = (t_max / spacing).ceil() as usize + 1;
            let grid = TimeGrid::uniform(t_max, points).map_err(|source| SweepError::Model { n, source })?;
            let traj = invert(&LaplaceState::new(&cfg), plan, &grid)
                .map_err(|source| SweepError::Inversion { n, source })?;
            let peak = refined_max(&fidelity(&traj));
            Ok(FidelityRow { n_sites: n, max_fidelity: peak.value, argmax_t: peak.time })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Provenance;
    use num_complex::Complex64 as C64;

    fn rabi(t_max: f64, points: usize) -> Trajectory {
        let grid = TimeGrid::uniform(t_max, points).unwrap();
        let amplitudes = grid
            .values()
            .iter()
            .map(|t| vec![C64::new((0.5 * t).cos(), 0.0), C64::new(0.0, -(0.5 * t).sin())])
            .collect();
        Trajectory { grid, amplitudes, provenance: Provenance::LaplaceInversion, error_estimates: None }
    }

    #[test]
    fn fidelity_values() {
        assert_eq!(fidelity_value(1.0), 1.0);
        assert_eq!(fidelity_value(0.0), 0.5);
        assert!((fidelity_value(0.5) - (0.5 + 0.25 / 6.0 + 0.5 / 3.0)).abs() < 1e-15);
        let mut prev = 0.5;
        for i in 1..=100 {
            let f = fidelity_value(i as f64 / 100.0);
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn population_identities() {
        let traj = rabi(10.0, 101);
        let p = populations(&traj);
        for k in 0..101 {
            let sum = p.sites[0].values[k] + p.sites[1].values[k] + p.channel.values[k];
            assert!((sum - p.total.values[k]).abs() < 1e-15);
            assert!((p.total.values[k] - 1.0).abs() < 1e-14);
            assert_eq!(p.channel.values[k], 0.0);
        }
    }

    #[test]
    fn quadratic_refinement_finds_off_grid_peak() {
        // ℱ peaks at t = π where |c₂| = 1
        let peak = refined_max(&fidelity(&rabi(6.0, 31)));
        assert!((peak.time - std::f64::consts::PI).abs() < 2e-3);
        assert!((peak.value - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rabi_frequency() {
        // P₁ = cos²(t/2) oscillates at ω = 1
        let p = populations(&rabi(200.0 * std::f64::consts::PI, 4001));
        assert!((dominant_frequency(&p.sites[0]) - 1.0).abs() < 1e-2);
    }
}
