//! Time-domain solvers used to validate the Laplace route.
//!
//! * [`solve_volterra`] integrates the integro-differential equations
//!   directly, for any kernel, keeping the full convolution history.
//! * [`solve_pseudomode`] replaces each Lorentzian reservoir by one damped
//!   auxiliary amplitude `b_j` obeying
//!   `ḃ_j = −(γ_j/2 + iΔ_j) b_j − i g_j c_edge`, which reproduces the
//!   exponential kernel exactly, and integrates the resulting linear ODE.

use crate::kernels::KernelHandle;
use crate::model::{ChainSpec, Provenance, ReservoirSpec, TimeGrid, Trajectory, ValidatedConfig};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

/// Largest admissible `dt·𝒥`.
pub const MAX_STEP: f64 = 0.1;

/// History steps served by one pass over the stored history.
const BLOCK: usize = 256;

/// History length per parallel work unit.
const CHUNK: usize = 8192;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("StepError: dt = {dt} exceeds the stability guard {limit}")]
    Step { dt: f64, limit: f64 },
    #[error("KindError: pseudomode oracle needs Lorentzian reservoirs, got {0}")]
    Kind(&'static str),
    #[error("IntegrationError: {0}")]
    Integration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Adams–Bashforth 2 predictor, trapezoid corrector, one correction.
    PredictorCorrector2,
    /// Implicit trapezoid; the memory term at the new step is solved for.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraConfig {
    pub dt: f64,
    pub scheme: Scheme,
}

impl Default for VolterraConfig {
    fn default() -> Self {
        Self { dt: 1e-3, scheme: Scheme::PredictorCorrector2 }
    }
}

impl VolterraConfig {
    pub fn check(&self, chain: &ChainSpec) -> Result<(), OracleError> {
        let limit = MAX_STEP / chain.coupling;
        if !(self.dt > 0.0 && self.dt <= limit) {
            return Err(OracleError::Step { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Volterra solve with the kernels of a validated configuration.
pub fn solve_volterra(config: &ValidatedConfig, cfg: &VolterraConfig, grid: &TimeGrid) -> Result<Trajectory, OracleError> {
    let omega_eg = config.chain.omega_eg;
    let h1 = KernelHandle::new(&config.reservoirs[0], omega_eg);
    let h2 = KernelHandle::new(&config.reservoirs[1], omega_eg);
    solve_volterra_with_kernels(
        &config.chain,
        |t| h1.memory_kernel(t),
        |t| h2.memory_kernel(t),
        config.initial.amplitudes(),
        cfg,
        grid,
    )
}

/// Volterra solve with arbitrary memory kernels `R₁`, `R₂`.
pub fn solve_volterra_with_kernels<R1, R2>(
    chain: &ChainSpec,
    r1: R1,
    r2: R2,
    init: &[C64],
    cfg: &VolterraConfig,
    grid: &TimeGrid,
) -> Result<Trajectory, OracleError>
where
    R1: Fn(f64) -> C64,
    R2: Fn(f64) -> C64,
{
    cfg.check(chain)?;
    let n = chain.n_sites;
    assert_eq!(init.len(), n, "initial state length must match the chain");
    let dt = cfg.dt;
    let steps = (grid.t_max() / dt).ceil() as usize;
    let hop = C64::new(0.0, -1.0 / chain.k());
    let mut edges = [Edge::new(&r1, steps, dt, 0), Edge::new(&r2, steps, dt, n - 1)];

    let rhs = |c: &[C64], conv: [C64; 2]| -> Vec<C64> {
        let mut d: Vec<C64> = (0..n)
            .map(|i| {
                let left = if i > 0 { c[i - 1] } else { C64::new(0.0, 0.0) };
                let right = if i + 1 < n { c[i + 1] } else { C64::new(0.0, 0.0) };
                hop * (left + right)
            })
            .collect();
        d[0] -= conv[0];
        d[n - 1] -= conv[1];
        d
    };

    // (I − dt/2 L) with the instantaneous memory weight folded into L.
    let implicit = Tridiagonal::new(
        (0..n)
            .map(|i| {
                let mut d = C64::new(1.0, 0.0);
                for e in &edges {
                    if e.site == i {
                        d += 0.25 * dt * dt * e.r0();
                    }
                }
                d
            })
            .collect(),
        -0.5 * dt * hop,
    );

    let mut c = init.to_vec();
    for e in edges.iter_mut() {
        e.push(c[e.site]);
    }
    let mut f = rhs(&c, [C64::new(0.0, 0.0); 2]);
    let mut f_prev: Option<Vec<C64>> = None;

    let times = grid.values();
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(times.len());
    let mut gi = 0;
    while gi < times.len() && times[gi] <= 0.0 {
        out.push(c.clone());
        gi += 1;
    }

    let mut step = 0;
    while step < steps {
        let block = BLOCK.min(steps - step);
        let base = step;
        let old: [Vec<C64>; 2] = [edges[0].old_part(base, block), edges[1].old_part(base, block)];
        for j in 0..block {
            let target = base + j + 1;
            let hist = [0, 1].map(|e| dt * (old[e][j] + edges[e].recent_part(base, target)));
            let conv_at = |c_next: &[C64], e: usize| hist[e] + 0.5 * dt * edges[e].r0() * c_next[edges[e].site];
            let c_next: Vec<C64> = match cfg.scheme {
                Scheme::PredictorCorrector2 => {
                    let pred: Vec<C64> = match &f_prev {
                        Some(fp) => (0..n).map(|i| c[i] + dt * (1.5 * f[i] - 0.5 * fp[i])).collect(),
                        None => (0..n).map(|i| c[i] + dt * f[i]).collect(),
                    };
                    let fp = rhs(&pred, [conv_at(&pred, 0), conv_at(&pred, 1)]);
                    (0..n).map(|i| c[i] + 0.5 * dt * (f[i] + fp[i])).collect()
                }
                Scheme::Trapezoid => {
                    let mut b: Vec<C64> = (0..n).map(|i| c[i] + 0.5 * dt * f[i]).collect();
                    for (e, edge) in edges.iter().enumerate() {
                        b[edge.site] -= 0.5 * dt * hist[e];
                    }
                    implicit.solve(b)
                }
            };
            let f_next = rhs(&c_next, [conv_at(&c_next, 0), conv_at(&c_next, 1)]);

            let (t0, t1) = ((target - 1) as f64 * dt, target as f64 * dt);
            while gi < times.len() && times[gi] <= t1 {
                out.push(hermite(&c, &f, &c_next, &f_next, dt, (times[gi] - t0) / dt));
                gi += 1;
            }

            for e in edges.iter_mut() {
                e.push(c_next[e.site]);
            }
            f_prev = Some(std::mem::replace(&mut f, f_next));
            c = c_next;
        }
        step += block;
    }
    while gi < times.len() {
        out.push(c.clone());
        gi += 1;
    }
    if out.iter().flatten().any(|z| !z.is_finite()) {
        return Err(OracleError::Integration("non-finite amplitude".into()));
    }
    Ok(Trajectory { grid: grid.clone(), amplitudes: out, provenance: Provenance::VolterraOracle, error_estimates: None })
}

/// One edge's kernel samples and amplitude history, split into real and
/// imaginary arrays.
struct Edge {
    site: usize,
    active: bool,
    kr: Vec<f64>,
    ki: Vec<f64>,
    hr: Vec<f64>,
    hi: Vec<f64>,
}

impl Edge {
    fn new<R: Fn(f64) -> C64>(r: &R, steps: usize, dt: f64, site: usize) -> Self {
        let samples: Vec<C64> = (0..=steps).map(|m| r(m as f64 * dt)).collect();
        let active = samples.iter().any(|z| *z != C64::new(0.0, 0.0));
        Self {
            site,
            active,
            kr: samples.iter().map(|z| z.re).collect(),
            ki: samples.iter().map(|z| z.im).collect(),
            hr: Vec::with_capacity(steps + 1),
            hi: Vec::with_capacity(steps + 1),
        }
    }

    fn r0(&self) -> C64 {
        C64::new(self.kr[0], self.ki[0])
    }

    fn push(&mut self, z: C64) {
        self.hr.push(z.re);
        self.hi.push(z.im);
    }

    /// `Σ_{m=0}^{base} w_m R_{base+1+j−m} c(m)` for `j < block`, with the
    /// trapezoid end weight `w_0 = 1/2`.
    fn old_part(&self, base: usize, block: usize) -> Vec<C64> {
        if !self.active {
            return vec![C64::new(0.0, 0.0); block];
        }
        let len = base + 1;
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..len.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * CHUNK;
                let hi = (lo + CHUNK).min(len);
                let mut acc_r = vec![0.0; block];
                let mut acc_i = vec![0.0; block];
                for m in lo..hi {
                    let w = if m == 0 { 0.5 } else { 1.0 };
                    let (cr, ci) = (w * self.hr[m], w * self.hi[m]);
                    let off = base + 1 - m;
                    let kr = &self.kr[off..off + block];
                    let ki = &self.ki[off..off + block];
                    for j in 0..block {
                        acc_r[j] += kr[j] * cr - ki[j] * ci;
                        acc_i[j] += kr[j] * ci + ki[j] * cr;
                    }
                }
                (acc_r, acc_i)
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); block];
        for (pr, pi) in &partials {
            for j in 0..block {
                out[j] += C64::new(pr[j], pi[j]);
            }
        }
        out
    }

    /// `Σ_{m=base+1}^{target−1} R_{target−m} c(m)`.
    fn recent_part(&self, base: usize, target: usize) -> C64 {
        if !self.active {
            return C64::new(0.0, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        for m in base + 1..target {
            let k = C64::new(self.kr[target - m], self.ki[target - m]);
            acc += k * C64::new(self.hr[m], self.hi[m]);
        }
        acc
    }
}

/// Cubic Hermite interpolation on `[0, 1]`.
fn hermite(c0: &[C64], f0: &[C64], c1: &[C64], f1: &[C64], h: f64, x: f64) -> Vec<C64> {
    let x2 = x * x;
    let x3 = x2 * x;
    let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
    let h10 = (x3 - 2.0 * x2 + x) * h;
    let h01 = -2.0 * x3 + 3.0 * x2;
    let h11 = (x3 - x2) * h;
    (0..c0.len()).map(|i| h00 * c0[i] + h10 * f0[i] + h01 * c1[i] + h11 * f1[i]).collect()
}

/// Symmetric tridiagonal matrix with constant off-diagonal, factored once.
struct Tridiagonal {
    off: C64,
    /// Thomas pivots.
    pivots: Vec<C64>,
}

impl Tridiagonal {
    fn new(diag: Vec<C64>, off: C64) -> Self {
        let mut pivots = Vec::with_capacity(diag.len());
        for (i, d) in diag.iter().enumerate() {
            let p = if i == 0 { *d } else { d - off * off / pivots[i - 1] };
            pivots.push(p);
        }
        Self { off, pivots }
    }

    fn solve(&self, mut b: Vec<C64>) -> Vec<C64> {
        let n = b.len();
        for i in 1..n {
            let l = self.off / self.pivots[i - 1];
            let prev = b[i - 1];
            b[i] -= l * prev;
        }
        b[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            let next = b[i + 1];
            b[i] = (b[i] - self.off * next) / self.pivots[i];
        }
        b
    }
}

/// Chain plus one auxiliary amplitude per Lorentzian reservoir.
#[derive(Debug, Clone)]
pub struct PseudomodeSystem {
    n_sites: usize,
    hop: C64,
    /// `g_j`
    coupling: [f64; 2],
    /// `γ_j/2 + iΔ_j`
    rate: [C64; 2],
    init: Vec<C64>,
}

/// Relative tolerance of the embedded Runge–Kutta integrator.
pub const PSEUDOMODE_RTOL: f64 = 1e-10;
const PSEUDOMODE_ATOL: f64 = 1e-13;

impl PseudomodeSystem {
    pub fn new(config: &ValidatedConfig) -> Result<Self, OracleError> {
        let mut coupling = [0.0; 2];
        let mut rate = [C64::new(0.0, 0.0); 2];
        for (j, res) in config.reservoirs.iter().enumerate() {
            match res {
                ReservoirSpec::Lorentzian { g, gamma, detuning } => {
                    coupling[j] = *g;
                    rate[j] = C64::new(0.5 * gamma, *detuning);
                }
                other => return Err(OracleError::Kind(other.kind_name())),
            }
        }
        Ok(Self {
            n_sites: config.chain.n_sites,
            hop: C64::new(0.0, -1.0 / config.chain.k()),
            coupling,
            rate,
            init: config.initial.amplitudes().to_vec(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.n_sites + 2
    }

    fn rhs(&self, y: &[C64], dy: &mut [C64]) {
        let n = self.n_sites;
        let mi = C64::new(0.0, -1.0);
        for i in 0..n {
            let left = if i > 0 { y[i - 1] } else { C64::new(0.0, 0.0) };
            let right = if i + 1 < n { y[i + 1] } else { C64::new(0.0, 0.0) };
            dy[i] = self.hop * (left + right);
        }
        let (b1, b2) = (y[n], y[n + 1]);
        dy[0] += mi * self.coupling[0] * b1;
        dy[n - 1] += mi * self.coupling[1] * b2;
        dy[n] = -self.rate[0] * b1 + mi * self.coupling[0] * y[0];
        dy[n + 1] = -self.rate[1] * b2 + mi * self.coupling[1] * y[n - 1];
    }
}

/// Pseudomode solve from a validated configuration.
pub fn solve_pseudomode(config: &ValidatedConfig, grid: &TimeGrid) -> Result<Trajectory, OracleError> {
    let system = PseudomodeSystem::new(config)?;
    solve_pseudomode_system(&system, grid)
}

pub fn solve_pseudomode_system(system: &PseudomodeSystem, grid: &TimeGrid) -> Result<Trajectory, OracleError> {
    let n = system.n_sites;
    let mut y = system.init.clone();
    y.extend([C64::new(0.0, 0.0); 2]);
    let mut t = 0.0;
    let mut rk = Dopri5::new(y.len());
    let mut h: f64 = 1e-3;
    let mut out = Vec::with_capacity(grid.len());
    for &target in grid.values() {
        while t < target {
            let step = h.min(target - t);
            let landing = step == target - t;
            let (accepted, next_h) = rk.step(system, &mut y, step)?;
            if accepted {
                t = if landing { target } else { t + step };
            }
            if !(landing && accepted) || next_h < h {
                h = next_h;
            }
        }
        out.push(y[..n].to_vec());
    }
    Ok(Trajectory { grid: grid.clone(), amplitudes: out, provenance: Provenance::PseudomodeOracle, error_estimates: None })
}

/// Dormand–Prince 5(4) with first-same-as-last reuse.
struct Dopri5 {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    fsal: bool,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self { k: std::array::from_fn(|_| z.clone()), tmp: z, fsal: false }
    }

    /// Attempt one step of size `h`; on acceptance `y` is advanced.
    /// Returns whether the step was accepted and the suggested next size.
    fn step(&mut self, sys: &PseudomodeSystem, y: &mut Vec<C64>, h: f64) -> Result<(bool, f64), OracleError> {
        if h < 1e-14 {
            return Err(OracleError::Integration(format!("step size underflow ({h:e})")));
        }
        let dim = y.len();
        if !self.fsal {
            sys.rhs(y, &mut self.k[0]);
            self.fsal = true;
        }
        for stage in 1..7 {
            let (done, rest) = self.k.split_at_mut(stage);
            for i in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for (kj, a) in done.iter().zip(&A[stage]) {
                    acc += *a * kj[i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            sys.rhs(&self.tmp, &mut rest[0]);
        }
        // The last stage is evaluated at the 5th-order solution, so tmp holds it.
        let mut err = 0.0_f64;
        for i in 0..dim {
            let mut e = C64::new(0.0, 0.0);
            for (j, ej) in E.iter().enumerate() {
                e += *ej * self.k[j][i];
            }
            let scale = PSEUDOMODE_ATOL + PSEUDOMODE_RTOL * y[i].norm().max(self.tmp[i].norm());
            let r = h * e.norm() / scale;
            err += r * r;
        }
        let err = (err / dim as f64).sqrt();
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            y.copy_from_slice(&self.tmp);
            self.k.swap(0, 6);
            Ok((true, h * factor))
        } else {
            Ok((false, h * factor.min(1.0)))
        }
    }
}
