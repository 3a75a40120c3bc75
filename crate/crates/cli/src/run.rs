//! Single runs: solve, then write the trajectory CSV, the JSON sidecar and,
//! for cross-checks, the oracle CSV and a deviation report.

use crate::config::{Backend, Resolved};
use crate::error::{kind_of, Category, CliError};
use crate::output::{trajectory_csv, write_atomic, write_json};
use serde_json::json;
use spinchain::inversion::invert;
use spinchain::laplace::LaplaceState;
use spinchain::model::Trajectory;
use spinchain::observables::{fidelity, refined_max};
use spinchain::oracle::{solve_pseudomode, solve_volterra};
use std::path::PathBuf;
use std::time::Instant;

/// Cross-check thresholds on the max amplitude deviation.
pub const PSEUDOMODE_THRESHOLD: f64 = 1e-6;
pub const VOLTERRA_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub p_total_final: f64,
    pub max_fidelity: f64,
    pub argmax_t: f64,
}

#[derive(Debug, Clone)]
pub struct CrossCheck {
    pub reference: Trajectory,
    pub threshold: f64,
    pub max_deviation: f64,
    pub t_at_max: f64,
}

impl CrossCheck {
    pub fn passed(&self) -> bool {
        self.max_deviation < self.threshold
    }

    fn report(&self) -> serde_json::Value {
        json!({
            "reference": self.reference.provenance.as_str(),
            "max_amplitude_deviation": self.max_deviation,
            "t_at_max": self.t_at_max,
            "threshold": self.threshold,
            "pass": self.passed(),
        })
    }
}

fn solver_err(e: impl std::fmt::Display) -> CliError {
    let msg = e.to_string();
    CliError::solver(kind_of(&msg), msg)
}

fn laplace(r: &Resolved) -> Result<Trajectory, CliError> {
    invert(&LaplaceState::new(&r.config), &r.plan, &r.grid).map_err(solver_err)
}

fn oracle(r: &Resolved) -> Result<(Trajectory, f64), CliError> {
    if r.config.both_lorentzian() {
        Ok((solve_pseudomode(&r.config, &r.grid).map_err(solver_err)?, PSEUDOMODE_THRESHOLD))
    } else {
        Ok((solve_volterra(&r.config, &r.volterra, &r.grid).map_err(solver_err)?, VOLTERRA_THRESHOLD))
    }
}

pub fn solve(r: &Resolved) -> Result<(Trajectory, Option<CrossCheck>), CliError> {
    match r.backend {
        Backend::Laplace => Ok((laplace(r)?, None)),
        Backend::Volterra => Ok((solve_volterra(&r.config, &r.volterra, &r.grid).map_err(solver_err)?, None)),
        Backend::Pseudomode => Ok((solve_pseudomode(&r.config, &r.grid).map_err(solver_err)?, None)),
        Backend::CrossCheck => {
            let primary = laplace(r)?;
            let (reference, threshold) = oracle(r)?;
            let (mut max_deviation, mut t_at_max) = (0.0, 0.0);
            for (p, t) in r.grid.values().iter().enumerate() {
                let d = primary.amplitudes[p]
                    .iter()
                    .zip(&reference.amplitudes[p])
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                if d > max_deviation {
                    (max_deviation, t_at_max) = (d, *t);
                }
            }
            Ok((primary, Some(CrossCheck { reference, threshold, max_deviation, t_at_max })))
        }
    }
}

pub fn summarize(traj: &Trajectory) -> RunSummary {
    let peak = refined_max(&fidelity(traj));
    RunSummary {
        p_total_final: traj.total_population(traj.grid.len() - 1),
        max_fidelity: peak.value,
        argmax_t: peak.time,
    }
}

/// Paths written by [`run`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub oracle_csv: Option<PathBuf>,
    pub deviation: Option<PathBuf>,
}

/// Solve and write every artifact. A failed cross-check still writes its
/// artifacts before reporting the mismatch.
pub fn run(r: &Resolved) -> Result<(RunSummary, Artifacts), CliError> {
    let start = Instant::now();
    let (traj, check) = solve(r)?;
    let wall_time = start.elapsed().as_secs_f64();

    let path = |suffix: &str| r.out_dir.join(format!("{}{suffix}", r.stem));
    let artifacts = Artifacts {
        csv: path(".csv"),
        sidecar: path(".json"),
        oracle_csv: check.as_ref().map(|_| path(".oracle.csv")),
        deviation: check.as_ref().map(|_| path(".deviation.json")),
    };
    write_atomic(&artifacts.csv, trajectory_csv(&traj).as_bytes())?;
    if let (Some(c), Some(oc), Some(dev)) = (&check, &artifacts.oracle_csv, &artifacts.deviation) {
        write_atomic(oc, trajectory_csv(&c.reference).as_bytes())?;
        write_json(dev, &c.report())?;
    }

    let summary = summarize(&traj);
    let max_error = traj.error_estimates.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max));
    let mut sidecar = serde_json::to_value(&r.canonical).expect("config serializes");
    sidecar["metadata"] = json!({
        "tool": "spinchain",
        "version": env!("CARGO_PKG_VERSION"),
        "provenance": traj.provenance.as_str(),
        "wall_time_s": wall_time,
        "warnings": r.config.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "diagnostics": {
            "max_error_estimate": max_error,
            "tolerance_met": max_error.map(|e| e <= r.plan.target_tol),
            "max_leakage_violation": traj.max_leakage_violation(),
            "p_total_final": summary.p_total_final,
            "max_fidelity": summary.max_fidelity,
            "argmax_t": summary.argmax_t,
        },
        "error_estimates": traj.error_estimates,
        "cross_check": check.as_ref().map(CrossCheck::report),
        "artifacts": {
            "csv": file_name(&artifacts.csv),
            "oracle_csv": artifacts.oracle_csv.as_ref().map(|p| file_name(p)),
            "deviation": artifacts.deviation.as_ref().map(|p| file_name(p)),
        },
    });
    write_json(&artifacts.sidecar, &sidecar)?;

    if let Some(c) = check.filter(|c| !c.passed()) {
        return Err(CliError::new(
            Category::CrossCheckMismatch,
            "DeviationError",
            format!(
                "laplace vs {} deviation {:e} at t = {} exceeds {:e}",
                c.reference.provenance.as_str(),
                c.max_deviation,
                c.t_at_max,
                c.threshold
            ),
        ));
    }
    Ok((summary, artifacts))
}

fn file_name(p: &std::path::Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}
