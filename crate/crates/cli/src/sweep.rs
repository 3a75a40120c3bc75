//! One-parameter sweeps. The axis is edited in the raw JSON, so every
//! point goes through the same parsing and validation as a single run.

use crate::config::{from_value, Overrides};
use crate::error::{CliError, Category};
use crate::output::{num, write_atomic};
use crate::run::{run, RunSummary};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::Path;

const RESERVOIR_KEYS: [&str; 5] = ["g", "gamma", "detuning", "omega_c", "s_param"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    path: Vec<String>,
    integer: bool,
}

impl Axis {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let path: Vec<String> = text.split('.').map(str::to_string).collect();
        let p: Vec<&str> = path.iter().map(String::as_str).collect();
        let integer = match p.as_slice() {
            ["chain", "n_sites"] | ["grid", "n_points"] | ["inversion", "n_terms" | "euler_depth"] => true,
            ["chain", "coupling" | "omega_eg"]
            | ["grid", "t_max"]
            | ["inversion", "contour_shift" | "target_tol"]
            | ["volterra", "dt"] => false,
            ["reservoirs", "both" | "left" | "right", key] if RESERVOIR_KEYS.contains(key) => false,
            _ => return Err(CliError::config("UnknownAxis", format!("`{text}` is not a numeric config field"))),
        };
        Ok(Self { path, integer })
    }

    pub fn leaf(&self) -> &str {
        self.path.last().expect("axis path is never empty")
    }

    pub fn name(&self) -> String {
        self.path.join(".")
    }

    fn number(&self, x: f64) -> Result<Value, CliError> {
        if self.integer {
            if !(x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64) {
                return Err(CliError::config("ValueError", format!("{} takes non-negative integers, got {x}", self.name())));
            }
            Ok(json!(x as u64))
        } else {
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .ok_or_else(|| CliError::config("ValueError", format!("{x} is not a finite number")))
        }
    }

    /// Copy of `config` with the axis set to `x`.
    pub fn apply(&self, config: &Value, x: f64) -> Result<Value, CliError> {
        let mut out = config.clone();
        let v = self.number(x)?;
        let shape = |msg: &str| CliError::config("SchemaError", msg.to_string());
        let root = out.as_object_mut().ok_or_else(|| shape("config must be a JSON object"))?;
        if self.path[0] == "reservoirs" {
            let res = root
                .get_mut("reservoirs")
                .and_then(Value::as_object_mut)
                .ok_or_else(|| shape("config has no `reservoirs` object"))?;
            let key = &self.path[2];
            match self.path[1].as_str() {
                "both" if res.contains_key("both") => set(res.get_mut("both"), key, v)?,
                "both" => {
                    set(res.get_mut("left"), key, v.clone())?;
                    set(res.get_mut("right"), key, v)?;
                }
                side => {
                    if let Some(both) = res.remove("both") {
                        res.insert("left".into(), both.clone());
                        res.insert("right".into(), both);
                    }
                    set(res.get_mut(side), key, v)?;
                }
            }
        } else {
            let section = root.entry(self.path[0].clone()).or_insert_with(|| json!({}));
            set(Some(section), &self.path[1], v)?;
        }
        Ok(out)
    }
}

fn set(target: Option<&mut Value>, key: &str, v: Value) -> Result<(), CliError> {
    let obj = target
        .and_then(Value::as_object_mut)
        .ok_or_else(|| CliError::config("SchemaError", format!("no object to hold `{key}`")))?;
    obj.insert(key.to_string(), v);
    Ok(())
}

/// Comma-separated numbers; `start:stop:step` expands inclusively.
pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |item: &str| CliError::config("ValueError", format!("cannot parse `{item}` as a value or start:stop:step"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<f64> = item.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(item))?;
        match parts.as_slice() {
            [x] => out.push(*x),
            [start, stop, step] if *step > 0.0 && stop >= start => {
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| start + i as f64 * step));
            }
            _ => return Err(bad(item)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<RunSummary, CliError>,
}

fn label(x: f64) -> String {
    format!("{x}")
}

/// Run every point. Failures are recorded per row; the summary keeps the
/// order of `values`.
pub fn sweep(base: &Value, base_dir: &Path, overrides: &Overrides, axis: &Axis, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    for &x in values {
        axis.number(x)?;
    }
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&x| {
            let outcome = (|| {
                let mut point = axis.apply(base, x)?;
                let stem = point
                    .pointer("/output/stem")
                    .and_then(Value::as_str)
                    .unwrap_or("trajectory")
                    .to_string();
                let section = point.as_object_mut().unwrap().entry("output").or_insert_with(|| json!({}));
                set(Some(section), "stem", json!(format!("{stem}_{}_{}", axis.leaf(), label(x))))?;
                let resolved = from_value(point)?.resolve(base_dir, overrides)?;
                log::info!("sweep point {} = {x}", axis.name());
                run(&resolved).map(|(summary, _)| summary)
            })();
            if let Err(e) = &outcome {
                log::warn!("sweep point {} = {x} failed: {e}", axis.name());
            }
            SweepRow { value: x, outcome }
        })
        .collect();
    Ok(rows)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn summary_csv(axis: &Axis, rows: &[SweepRow]) -> String {
    let mut out = format!("{},status,P_total_final,max_fidelity,argmax_t,message\n", axis.name());
    for row in rows {
        match &row.outcome {
            Ok(s) => writeln!(
                out,
                "{},ok,{},{},{},",
                num(row.value),
                num(s.p_total_final),
                num(s.max_fidelity),
                num(s.argmax_t)
            ),
            Err(e) => writeln!(out, "{},{},,,,{}", num(row.value), e.status(), quote(&e.to_string())),
        }
        .unwrap();
    }
    out
}

pub fn summary_json(axis: &Axis, rows: &[SweepRow]) -> Value {
    let rows: Vec<Value> = rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(s) => json!({
                "value": row.value,
                "status": "ok",
                "p_total_final": s.p_total_final,
                "max_fidelity": s.max_fidelity,
                "argmax_t": s.argmax_t,
            }),
            Err(e) => json!({ "value": row.value, "error": e.to_json() }),
        })
        .collect();
    json!({ "axis": axis.name(), "rows": rows })
}

pub fn write_summary(dir: &Path, stem: &str, axis: &Axis, rows: &[SweepRow]) -> Result<Option<std::path::PathBuf>, CliError> {
    if rows.is_empty() {
        return Ok(None);
    }
    let path = dir.join(format!("{stem}_sweep_{}.csv", axis.leaf()));
    write_atomic(&path, summary_csv(axis, rows).as_bytes())?;
    Ok(Some(path))
}

pub fn failure(rows: &[SweepRow]) -> Option<CliError> {
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    (failed > 0).then(|| {
        CliError::new(Category::SweepPartial, "SweepError", format!("{failed} of {} sweep points failed", rows.len()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_ranges() {
        assert_eq!(parse_values("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_values("4:40:4").unwrap().len(), 10);
        assert_eq!(parse_values("0.1:0.3:0.1").unwrap().len(), 3);
        assert!(parse_values("").unwrap().is_empty());
        assert!(parse_values("1:0:1").is_err());
        assert!(parse_values("x").is_err());
    }

    #[test]
    fn unknown_axes() {
        for bad in ["chain.spin", "reservoirs.middle.g", "reservoirs.both.kind", "initial", "grid"] {
            assert_eq!(Axis::parse(bad).unwrap_err().kind, "UnknownAxis", "{bad}");
        }
    }

    #[test]
    fn both_fans_out_and_sides_split() {
        let cfg = json!({"reservoirs": {"both": {"kind": "lorentzian", "g": 0.3, "gamma": 0.02}}});
        let a = Axis::parse("reservoirs.both.g").unwrap().apply(&cfg, 2.0).unwrap();
        assert_eq!(a["reservoirs"]["both"]["g"], json!(2.0));
        let b = Axis::parse("reservoirs.left.gamma").unwrap().apply(&cfg, 0.5).unwrap();
        assert_eq!(b["reservoirs"]["left"]["gamma"], json!(0.5));
        assert_eq!(b["reservoirs"]["right"]["gamma"], json!(0.02));
        assert!(b["reservoirs"].get("both").is_none());
        let c = Axis::parse("reservoirs.both.g").unwrap().apply(&b, 1.0).unwrap();
        assert_eq!(c["reservoirs"]["left"]["g"], json!(1.0));
        assert_eq!(c["reservoirs"]["right"]["g"], json!(1.0));
    }

    #[test]
    fn integer_axes() {
        let axis = Axis::parse("chain.n_sites").unwrap();
        let cfg = json!({"chain": {"n_sites": 3, "omega_eg": 1.0}});
        assert_eq!(axis.apply(&cfg, 8.0).unwrap()["chain"]["n_sites"], json!(8));
        assert_eq!(axis.apply(&cfg, 2.5).unwrap_err().kind, "ValueError");
        let inv = Axis::parse("inversion.n_terms").unwrap().apply(&cfg, 64.0).unwrap();
        assert_eq!(inv["inversion"]["n_terms"], json!(64));
    }
}
