//! Domain types shared by every solver: the chain, its two boundary
//! reservoirs, the initial single-excitation state, time grids and
//! trajectories.
//!
//! All frequencies are in units of the qubit-qubit coupling and all times in
//! units of its inverse. Amplitudes are the rotating-frame amplitudes; the
//! global phase `exp(-i[ω_e + (N-1)ω_g]t)` is never materialized because
//! every observable is phase-invariant.

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Tolerance on `Σ|c_i(0)|² = 1` for accepted initial states.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Slack allowed on `Σ|c_i(t)|² ≤ 1` for produced trajectories.
pub const LEAKAGE_TOLERANCE: f64 = 1e-6;

/// A Lorentzian reservoir warns when its width exceeds this fraction of its
/// peak frequency, since the analytic kernel extends the frequency integral
/// to negative frequencies.
pub const LORENTZIAN_WIDTH_RATIO: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("DimensionError: chain needs at least 2 sites, got {0}")]
    Dimension(usize),
    #[error("NormError: initial state norm² is {norm_sq}, expected 1 within {NORM_TOLERANCE:e}")]
    Norm { norm_sq: f64 },
    #[error("ParamError: {0}")]
    Param(String),
}

impl ModelError {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::Dimension(_) => "DimensionError",
            ModelError::Norm { .. } => "NormError",
            ModelError::Param(_) => "ParamError",
        }
    }
}

fn param(msg: impl Into<String>) -> ModelError {
    ModelError::Param(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub n_sites: usize,
    /// Nearest-neighbour coupling 𝒥.
    pub coupling: f64,
    /// Qubit transition frequency ω_eg = ω_e − ω_g.
    pub omega_eg: f64,
}

impl ChainSpec {
    pub fn new(n_sites: usize, coupling: f64, omega_eg: f64) -> Self {
        Self { n_sites, coupling, omega_eg }
    }

    /// `k = 2/𝒥`, the scale of the Laplace-space recursion.
    pub fn k(&self) -> f64 {
        2.0 / self.coupling
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.n_sites < 2 {
            return Err(ModelError::Dimension(self.n_sites));
        }
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(param(format!("coupling must be > 0, got {}", self.coupling)));
        }
        if !(self.omega_eg.is_finite() && self.omega_eg >= 0.0) {
            return Err(param(format!("omega_eg must be >= 0, got {}", self.omega_eg)));
        }
        Ok(())
    }
}

/// Spectral density of one boundary reservoir.
#[derive(Debug, Clone, PartialEq)]
pub enum ReservoirSpec {
    /// `J(ω) = g²/π · (γ/2) / ((ω − ω_c)² + (γ/2)²)`, parameterized by the
    /// detuning `Δ_c = ω_c − ω_eg` since the kernel depends on nothing else.
    Lorentzian { g: f64, gamma: f64, detuning: f64 },
    /// `J(ω) = 𝒩 g² ω_c (ω/ω_c)^𝒮 exp(−ω/ω_c)` with
    /// `𝒩 = 1/(ω_c² Γ(1+𝒮))`.
    Ohmic { g: f64, omega_c: f64, s_param: f64 },
    /// `J(ω) = g² · j(ω)` where `j` linearly interpolates the samples and
    /// vanishes outside them. A table with unit area gives `R(0) = g²`.
    Tabulated { g: f64, samples: Vec<(f64, f64)> },
}

impl ReservoirSpec {
    pub fn lorentzian(g: f64, gamma: f64, detuning: f64) -> Self {
        ReservoirSpec::Lorentzian { g, gamma, detuning }
    }

    pub fn ohmic(g: f64, omega_c: f64, s_param: f64) -> Self {
        ReservoirSpec::Ohmic { g, omega_c, s_param }
    }

    /// A reservoir that does not couple at all.
    pub fn uncoupled() -> Self {
        ReservoirSpec::Lorentzian { g: 0.0, gamma: 1.0, detuning: 0.0 }
    }

    pub fn g(&self) -> f64 {
        match self {
            ReservoirSpec::Lorentzian { g, .. }
            | ReservoirSpec::Ohmic { g, .. }
            | ReservoirSpec::Tabulated { g, .. } => *g,
        }
    }

    pub fn with_g(&self, new_g: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ReservoirSpec::Lorentzian { g, .. }
            | ReservoirSpec::Ohmic { g, .. }
            | ReservoirSpec::Tabulated { g, .. } => *g = new_g,
        }
        out
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ReservoirSpec::Lorentzian { .. } => "lorentzian",
            ReservoirSpec::Ohmic { .. } => "ohmic",
            ReservoirSpec::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_lorentzian(&self) -> bool {
        matches!(self, ReservoirSpec::Lorentzian { .. })
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let g = self.g();
        if !(g.is_finite() && g >= 0.0) {
            return Err(param(format!("g must be >= 0, got {g}")));
        }
        match self {
            ReservoirSpec::Lorentzian { gamma, detuning, .. } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(param(format!("Lorentzian gamma must be > 0, got {gamma}")));
                }
                if !detuning.is_finite() {
                    return Err(param("Lorentzian detuning must be finite"));
                }
            }
            ReservoirSpec::Ohmic { omega_c, s_param, .. } => {
                if !(omega_c.is_finite() && *omega_c > 0.0) {
                    return Err(param(format!("Ohmic omega_c must be > 0, got {omega_c}")));
                }
                if !(s_param.is_finite() && *s_param > 0.0) {
                    return Err(param(format!("Ohmic s_param must be > 0, got {s_param}")));
                }
            }
            ReservoirSpec::Tabulated { samples, .. } => {
                if samples.len() < 2 {
                    return Err(param("tabulated density needs at least 2 samples"));
                }
                for (i, &(w, j)) in samples.iter().enumerate() {
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(param(format!("tabulated frequency {w} must be >= 0")));
                    }
                    if !(j.is_finite() && j >= 0.0) {
                        return Err(param(format!("tabulated density {j} at ω={w} must be >= 0")));
                    }
                    if i > 0 && w <= samples[i - 1].0 {
                        return Err(param("tabulated frequencies must be strictly increasing"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Complex amplitudes `c_i(0)` over the single-excitation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    amplitudes: Vec<C64>,
}

impl InitialState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self, ModelError> {
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !((norm_sq - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(ModelError::Norm { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    /// Excitation on a single site (1-based).
    pub fn site(n_sites: usize, site: usize) -> Result<Self, ModelError> {
        if site == 0 || site > n_sites {
            return Err(param(format!("site {site} outside 1..={n_sites}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); n_sites];
        amps[site - 1] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: amps })
    }

    /// Equal superposition over the channel sites `2..=N-1`.
    pub fn uniform_channel(n_sites: usize) -> Result<Self, ModelError> {
        if n_sites < 3 {
            return Err(param("uniform-channel state needs N >= 3"));
        }
        let w = 1.0 / ((n_sites - 2) as f64).sqrt();
        let mut amps = vec![C64::new(0.0, 0.0); n_sites];
        for a in &mut amps[1..n_sites - 1] {
            *a = C64::new(w, 0.0);
        }
        Self::new(amps)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Site order reversed, `c_i ↔ c_{N+1-i}`.
    pub fn mirrored(&self) -> Self {
        let mut amps = self.amplitudes.clone();
        amps.reverse();
        Self { amplitudes: amps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_values: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_values: Vec<f64>) -> Result<Self, ModelError> {
        if t_values.is_empty() {
            return Err(param("time grid is empty"));
        }
        if !(t_values[0].is_finite() && t_values[0] >= 0.0) {
            return Err(param(format!("time grid must start at t >= 0, got {}", t_values[0])));
        }
        if t_values.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(param("time grid must be strictly increasing"));
        }
        Ok(Self { t_values })
    }

    /// `n_points` evenly spaced times on `[0, t_max]`.
    pub fn uniform(t_max: f64, n_points: usize) -> Result<Self, ModelError> {
        if n_points == 0 {
            return Err(param("time grid needs at least one point"));
        }
        if n_points == 1 {
            return Self::new(vec![t_max]);
        }
        if !(t_max > 0.0) {
            return Err(param(format!("t_max must be > 0, got {t_max}")));
        }
        let step = t_max / (n_points - 1) as f64;
        Self::new((0..n_points).map(|i| i as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.t_values
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.t_values.last().expect("grid is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    LaplaceInversion,
    VolterraOracle,
    PseudomodeOracle,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::LaplaceInversion => "laplace-inversion",
            Provenance::VolterraOracle => "volterra-oracle",
            Provenance::PseudomodeOracle => "pseudomode-oracle",
        }
    }
}

/// Per-site amplitudes `c̃_i(t)` on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// `amplitudes[p][i]` is site `i+1` at time `grid[p]`.
    pub amplitudes: Vec<Vec<C64>>,
    pub provenance: Provenance,
    /// Solver error estimate per time point, when the solver provides one.
    pub error_estimates: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn n_sites(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    pub fn total_population(&self, p: usize) -> f64 {
        self.amplitudes[p].iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest violation of `Σ|c_i|² ≤ 1`, zero when the bound holds.
    pub fn max_leakage_violation(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| (self.total_population(p) - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest amplitude difference to another trajectory on the same grid.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.grid.len(), other.grid.len(), "grids differ in length");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationWarning {
    /// A Lorentzian width is not small against its peak frequency, so the
    /// negative-frequency extension behind the analytic kernel is poor.
    LorentzianExtension { reservoir: usize, gamma: f64, omega_c: f64 },
}

impl std::fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationWarning::LorentzianExtension { reservoir, gamma, omega_c } => write!(
                f,
                "reservoir {reservoir}: Lorentzian width {gamma} is not << peak frequency {omega_c} \
                 (threshold gamma <= omega_c/5); negative-frequency extension is inaccurate"
            ),
        }
    }
}

/// A configuration that passed [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    pub chain: ChainSpec,
    pub reservoirs: [ReservoirSpec; 2],
    pub initial: InitialState,
    pub warnings: Vec<ValidationWarning>,
}

impl ValidatedConfig {
    pub fn n_sites(&self) -> usize {
        self.chain.n_sites
    }

    pub fn both_lorentzian(&self) -> bool {
        self.reservoirs.iter().all(ReservoirSpec::is_lorentzian)
    }

    /// Reservoirs swapped and initial state reversed.
    pub fn mirrored(&self) -> Self {
        let [a, b] = self.reservoirs.clone();
        Self {
            chain: self.chain,
            reservoirs: [b, a],
            initial: self.initial.mirrored(),
            warnings: self.warnings.clone(),
        }
    }
}

pub fn validate(
    chain: &ChainSpec,
    res1: &ReservoirSpec,
    res2: &ReservoirSpec,
    init: &InitialState,
) -> Result<ValidatedConfig, ModelError> {
    chain.check()?;
    res1.check()?;
    res2.check()?;
    if init.len() != chain.n_sites {
        return Err(param(format!(
            "initial state has {} amplitudes but the chain has {} sites",
            init.len(),
            chain.n_sites
        )));
    }
    let norm_sq: f64 = init.amplitudes().iter().map(|c| c.norm_sqr()).sum();
    if !((norm_sq - 1.0).abs() <= NORM_TOLERANCE) {
        return Err(ModelError::Norm { norm_sq });
    }

    let mut warnings = Vec::new();
    for (idx, res) in [res1, res2].into_iter().enumerate() {
        if let ReservoirSpec::Lorentzian { gamma, detuning, .. } = res {
            let omega_c = chain.omega_eg + detuning;
            if *gamma > LORENTZIAN_WIDTH_RATIO * omega_c {
                let w = ValidationWarning::LorentzianExtension { reservoir: idx + 1, gamma: *gamma, omega_c };
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }

    Ok(ValidatedConfig {
        chain: *chain,
        reservoirs: [res1.clone(), res2.clone()],
        initial: init.clone(),
        warnings,
    })
}
