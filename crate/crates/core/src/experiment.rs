//! Reproducible experiment runner.
//!
//! A JSON config names one experiment and its parameter grid. Running it
//! writes one CSV per grid cell, a `summary.json` with estimates and
//! measured constants, and a `manifest.json` whose `resolved` member is a
//! complete config: running it again reproduces every CSV byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::caps::Caps;
use crate::error::{NppError, Result};
use crate::instances::{sample_instance, CouplingMode, MIN_SAMPLE_SCALE_BITS};
use crate::landscape::{
    self, aggregate, ball_flips_for, eps_lcd, eps_ldp, eta_for, obstruction_exponent,
    obstruction_trial_levels, repel_constant, repel_trial, rounding_hardness_trial, trial_seed,
    ObstructionParams,
};
use crate::lowdeg::{self, JuntaAlgorithm, StabilitySample};
use crate::model::{Dist, EnergyLevel, MAX_SCALE_BITS};
use crate::par;
use crate::rng::{self, purpose};
use crate::solvers::Solver;
use crate::stats::{linear_fit, median, EstimateCI, MeanCI};
use crate::wide::{self, ceil_log2};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

const DEFAULT_SCALE_BITS: u32 = 128;
const MAX_N: u64 = 1 << 20;
const MAX_TRIALS: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Obstruction,
    Repel,
    Stability,
    Rounding,
    Scaling,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Obstruction => "obstruction",
            ExperimentKind::Repel => "repel",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Rounding => "rounding",
            ExperimentKind::Scaling => "scaling",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "obstruction" => ExperimentKind::Obstruction,
            "repel" => ExperimentKind::Repel,
            "stability" => ExperimentKind::Stability,
            "rounding" => ExperimentKind::Rounding,
            "scaling" => ExperimentKind::Scaling,
            _ => return None,
        })
    }

    fn fields(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Obstruction => &[
                "n", "energy", "eps", "eta", "mode", "solver", "scale_bits", "dist", "degree", "cells",
            ],
            ExperimentKind::Repel => &["n", "energy", "k", "scale_bits", "dist"],
            ExperimentKind::Stability => &["n", "degree", "eps", "mode", "junta", "radius"],
            ExperimentKind::Rounding => &["n", "energy", "degree", "junta", "radius", "scale_bits", "dist"],
            ExperimentKind::Scaling => &["n", "solver", "scale_bits", "dist"],
        }
    }
}

/// Algorithm family used by the stability and rounding experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JuntaFamily {
    SignProduct,
    Zero,
    Scaled(f64),
}

impl JuntaFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sign_product" => Ok(JuntaFamily::SignProduct),
            "zero" => Ok(JuntaFamily::Zero),
            _ => {
                let a = s
                    .strip_prefix("scaled:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .filter(|a| a.is_finite())
                    .ok_or_else(|| {
                        NppError::schema("junta", format!("{s:?} is not sign_product, zero or scaled:<a>"))
                    })?;
                Ok(JuntaFamily::Scaled(a))
            }
        }
    }

    pub fn build(self, n: usize, degree: usize) -> Result<JuntaAlgorithm> {
        match self {
            JuntaFamily::SignProduct => JuntaAlgorithm::sliding_sign_product(n, degree),
            JuntaFamily::Zero => Ok(JuntaAlgorithm::zero(n)),
            JuntaFamily::Scaled(a) => JuntaAlgorithm::scaled_sign_product(n, degree, a),
        }
    }

    fn name(self) -> String {
        match self {
            JuntaFamily::SignProduct => "sign_product".into(),
            JuntaFamily::Zero => "zero".into(),
            JuntaFamily::Scaled(a) => format!("scaled:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionCell {
    pub n: usize,
    pub energy: u32,
    pub eps: f64,
    pub eta: f64,
}

/// Per-experiment parameters after defaults and presets are resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Obstruction {
        mode: CouplingMode,
        solver: Solver,
        cells: Vec<ObstructionCell>,
    },
    Repel {
        n: Vec<usize>,
        energy: Vec<u32>,
        k: usize,
    },
    Stability {
        n: Vec<usize>,
        degree: Vec<usize>,
        eps: Vec<f64>,
        mode: CouplingMode,
        junta: JuntaFamily,
        /// Empty: plain algorithm; otherwise one grid axis of wrapper radii.
        radius: Vec<f64>,
    },
    Rounding {
        n: Vec<usize>,
        energy: Vec<u32>,
        degree: usize,
        junta: JuntaFamily,
        radius: f64,
    },
    Scaling {
        n: Vec<usize>,
        solver: Solver,
    },
}

/// A validated experiment with every default made explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: u64,
    pub scale_bits: u32,
    pub dist: Dist,
    pub plan: Plan,
}

fn schema(field: &str, reason: impl Into<String>) -> NppError {
    NppError::schema(field, reason)
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn get(&self, f: &str) -> Option<&'a Value> {
        self.map.get(f)
    }

    fn u64_value(f: &str, v: &Value) -> Result<u64> {
        v.as_u64()
            .ok_or_else(|| schema(f, format!("expected a nonnegative integer, got {v}")))
    }

    fn u64_in(&self, f: &str, lo: u64, hi: u64) -> Result<Option<u64>> {
        match self.get(f) {
            None => Ok(None),
            Some(v) => {
                let x = Self::u64_value(f, v)?;
                if !(lo..=hi).contains(&x) {
                    return Err(schema(f, format!("{x} is outside {lo}..={hi}")));
                }
                Ok(Some(x))
            }
        }
    }

    fn u64_list(&self, f: &str, lo: u64, hi: u64) -> Result<Option<Vec<u64>>> {
        let Some(v) = self.get(f) else { return Ok(None) };
        let items: Vec<&Value> = match v {
            Value::Array(a) if a.is_empty() => return Err(schema(f, "list must not be empty")),
            Value::Array(a) => a.iter().collect(),
            other => vec![other],
        };
        items
            .into_iter()
            .map(|x| {
                let x = Self::u64_value(f, x)?;
                if !(lo..=hi).contains(&x) {
                    return Err(schema(f, format!("{x} is outside {lo}..={hi}")));
                }
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn f64_value(f: &str, v: &Value, lo: f64, hi: f64) -> Result<f64> {
        let x = v
            .as_f64()
            .ok_or_else(|| schema(f, format!("expected a number, got {v}")))?;
        if !(x >= lo && x <= hi) {
            return Err(schema(f, format!("{x} is outside [{lo}, {hi}]")));
        }
        Ok(x)
    }

    fn f64_list(&self, f: &str, lo: f64, hi: f64) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(f) else { return Ok(None) };
        match v {
            Value::Array(a) if a.is_empty() => Err(schema(f, "list must not be empty")),
            Value::Array(a) => a.iter().map(|x| Self::f64_value(f, x, lo, hi)).collect::<Result<_>>().map(Some),
            other => Ok(Some(vec![Self::f64_value(f, other, lo, hi)?])),
        }
    }

    fn string(&self, f: &str) -> Result<Option<&'a str>> {
        match self.get(f) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(schema(f, format!("expected a string, got {v}"))),
        }
    }

    fn required<T>(f: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| schema(f, "required field is missing"))
    }

    fn dist(&self) -> Result<Dist> {
        match self.string("dist")? {
            None => Ok(Dist::Gaussian),
            Some(s) => Dist::parse(s).map_err(|_| schema("dist", format!("{s:?} is not gaussian or uniform_pm1"))),
        }
    }

    fn mode(&self) -> Result<CouplingMode> {
        match self.string("mode")? {
            None => Ok(CouplingMode::Resampled),
            Some(s) => CouplingMode::parse(s).map_err(|_| schema("mode", format!("{s:?} is not correlated or resampled"))),
        }
    }

    fn solver(&self, default: Solver) -> Result<Solver> {
        match self.string("solver")? {
            None => Ok(default),
            Some(s) => s.parse().map_err(|e: NppError| schema("solver", e.to_string())),
        }
    }

    fn junta(&self) -> Result<JuntaFamily> {
        match self.string("junta")? {
            None => Ok(JuntaFamily::SignProduct),
            Some(s) => JuntaFamily::parse(s),
        }
    }
}

enum Preset<'a> {
    Value(f64),
    Named(&'a str),
}

fn preset<'a>(f: &str, v: Option<&'a Value>, names: &[&str], lo: f64, hi: f64) -> Result<Option<Preset<'a>>> {
    match v {
        None => Ok(None),
        Some(Value::String(s)) if names.contains(&s.as_str()) => Ok(Some(Preset::Named(s))),
        Some(Value::String(s)) => Err(schema(f, format!("{s:?} is not one of {names:?} or a number"))),
        Some(x) => Ok(Some(Preset::Value(Fields::f64_value(f, x, lo, hi)?))),
    }
}

fn check_margin(field: &str, e: u32, scale_bits: u32) -> Result<()> {
    EnergyLevel::new(e)
        .check_margin(scale_bits)
        .map_err(|err| schema(field, err.to_string()))
}

fn to_usize(v: Vec<u64>) -> Vec<usize> {
    v.into_iter().map(|x| x as usize).collect()
}

fn to_u32(v: Vec<u64>) -> Vec<u32> {
    v.into_iter().map(|x| x as u32).collect()
}

impl ExperimentConfig {
    /// Validates a config, reporting the first offending field.
    pub fn from_json(v: &Value) -> Result<Self> {
        let map = v
            .as_object()
            .ok_or_else(|| schema("<root>", "config must be a JSON object"))?;
        let f = Fields { map };
        let name = Fields::required("experiment", f.string("experiment")?)?;
        let kind = ExperimentKind::parse(name).ok_or_else(|| {
            schema(
                "experiment",
                format!("{name:?} is not obstruction, repel, stability, rounding or scaling"),
            )
        })?;
        for key in map.keys() {
            if !["experiment", "seed", "trials"].contains(&key.as_str()) && !kind.fields().contains(&key.as_str()) {
                return Err(schema(key, format!("not a field of the {} experiment", kind.as_str())));
            }
        }
        let seed = match f.get("seed") {
            None => 0,
            Some(v) => Fields::u64_value("seed", v)?,
        };
        let trials = Fields::required("trials", f.u64_in("trials", 1, MAX_TRIALS)?)?;
        let uses_instances = kind.fields().contains(&"scale_bits");
        let scale_bits = f
            .u64_in("scale_bits", MIN_SAMPLE_SCALE_BITS as u64, MAX_SCALE_BITS as u64)?
            .map(|b| b as u32)
            .unwrap_or(if uses_instances { DEFAULT_SCALE_BITS } else { lowdeg::STABILITY_SCALE_BITS });
        let dist = f.dist()?;

        let plan = match kind {
            ExperimentKind::Obstruction => Self::obstruction_plan(&f, scale_bits)?,
            ExperimentKind::Repel => {
                let n = to_usize(Fields::required("n", f.u64_list("n", 1, 64)?)?);
                let energy = to_u32(Fields::required("energy", f.u64_list("energy", 0, MAX_SCALE_BITS as u64)?)?);
                for &e in &energy {
                    check_margin("energy", e, scale_bits)?;
                }
                let k = f.u64_in("k", 1, 8)?.unwrap_or(2) as usize;
                Plan::Repel { n, energy, k }
            }
            ExperimentKind::Stability => {
                let n = to_usize(Fields::required("n", f.u64_list("n", 1, MAX_N)?)?);
                let degree = to_usize(Fields::required("degree", f.u64_list("degree", 0, MAX_N)?)?);
                let eps = Fields::required("eps", f.f64_list("eps", 0.0, 1.0)?)?;
                let junta = f.junta()?;
                Self::check_degrees(&n, &degree, junta)?;
                let radius = f.f64_list("radius", 0.0, 1e6)?.unwrap_or_default();
                if !radius.is_empty() && n.iter().any(|&n| n > 64) {
                    return Err(schema("radius", "the improvement wrapper is limited to n <= 64"));
                }
                Plan::Stability {
                    n,
                    degree,
                    eps,
                    mode: f.mode()?,
                    junta,
                    radius,
                }
            }
            ExperimentKind::Rounding => {
                let n = to_usize(Fields::required("n", f.u64_list("n", 1, 64)?)?);
                let energy = to_u32(Fields::required("energy", f.u64_list("energy", 0, MAX_SCALE_BITS as u64)?)?);
                for &e in &energy {
                    check_margin("energy", e, scale_bits)?;
                }
                let degree = f.u64_in("degree", 0, 64)?.unwrap_or(1) as usize;
                let junta = f.junta()?;
                Self::check_degrees(&n, &[degree], junta)?;
                let radius = match f.get("radius") {
                    None => 1.0,
                    Some(v) => Fields::f64_value("radius", v, 0.0, 1e6)?,
                };
                Plan::Rounding {
                    n,
                    energy,
                    degree,
                    junta,
                    radius,
                }
            }
            ExperimentKind::Scaling => Plan::Scaling {
                n: to_usize(Fields::required("n", f.u64_list("n", 1, MAX_N)?)?),
                solver: f.solver(Solver::Mitm)?,
            },
        };
        Ok(ExperimentConfig {
            seed,
            trials,
            scale_bits,
            dist,
            plan,
        })
    }

    fn check_degrees(n: &[usize], degree: &[usize], junta: JuntaFamily) -> Result<()> {
        for &d in degree {
            if junta != JuntaFamily::Zero && d == 0 {
                return Err(schema("degree", "must be at least 1"));
            }
            if let Some(&m) = n.iter().find(|&&m| d > m) {
                return Err(schema("degree", format!("{d} exceeds n = {m}")));
            }
            if matches!(junta, JuntaFamily::Scaled(_)) && d > 20 {
                return Err(schema("degree", "table juntas are limited to degree 20"));
            }
        }
        Ok(())
    }

    fn obstruction_plan(f: &Fields, scale_bits: u32) -> Result<Plan> {
        let mode = f.mode()?;
        let solver = f.solver(Solver::BruteForce)?;
        let cells = if let Some(cells) = f.get("cells") {
            for key in ["n", "energy", "eps", "eta", "degree"] {
                if f.get(key).is_some() {
                    return Err(schema(key, "cannot be combined with explicit cells"));
                }
            }
            let list = cells
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| schema("cells", "expected a nonempty list of cell objects"))?;
            list.iter()
                .enumerate()
                .map(|(i, c)| {
                    let field = |k: &str| format!("cells[{i}].{k}");
                    let obj = c
                        .as_object()
                        .ok_or_else(|| schema(&format!("cells[{i}]"), "expected an object"))?;
                    if let Some(k) = obj.keys().find(|k| !["n", "energy", "eps", "eta"].contains(&k.as_str())) {
                        return Err(schema(&field(k), "not a cell field"));
                    }
                    let get = |k: &str| obj.get(k).ok_or_else(|| schema(&field(k), "required field is missing"));
                    let n = Fields::u64_value(&field("n"), get("n")?)?;
                    if !(1..=64).contains(&n) {
                        return Err(schema(&field("n"), format!("{n} is outside 1..=64")));
                    }
                    let energy = Fields::u64_value(&field("energy"), get("energy")?)?;
                    if energy > MAX_SCALE_BITS as u64 {
                        return Err(schema(&field("energy"), "too large"));
                    }
                    Ok(ObstructionCell {
                        n: n as usize,
                        energy: energy as u32,
                        eps: Fields::f64_value(&field("eps"), get("eps")?, 0.0, 1.0)?,
                        eta: Fields::f64_value(&field("eta"), get("eta")?, f64::MIN_POSITIVE, 0.499_999_999)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let n = to_usize(Fields::required("n", f.u64_list("n", 1, 64)?)?);
            let energy = to_u32(Fields::required("energy", f.u64_list("energy", 0, MAX_SCALE_BITS as u64)?)?);
            let degree = f.u64_in("degree", 1, 64)?.unwrap_or(1) as usize;
            let eps = preset("eps", f.get("eps"), &["ldp", "lcd"], 0.0, 1.0)?;
            let eta = preset("eta", f.get("eta"), &["auto"], f64::MIN_POSITIVE, 0.499_999_999)?;
            let mut cells = Vec::new();
            for &n in &n {
                for &e in &energy {
                    let eps = match &eps {
                        Some(Preset::Value(x)) => *x,
                        Some(Preset::Named("ldp")) => eps_ldp(e),
                        Some(Preset::Named(_)) => Self::lcd(n, degree)?,
                        None => match mode {
                            CouplingMode::Resampled => Self::lcd(n, degree)?,
                            CouplingMode::Correlated => eps_ldp(e),
                        },
                    };
                    let eta = match &eta {
                        Some(Preset::Value(x)) => *x,
                        _ => eta_for(e as f64, n).map_err(|err| schema("energy", err.to_string()))?,
                    };
                    cells.push(ObstructionCell { n, energy: e, eps, eta });
                }
            }
            cells
        };
        for c in &cells {
            check_margin("energy", c.energy, scale_bits)?;
            if mode == CouplingMode::Correlated && c.energy + 10 + ceil_log2(c.n as u64) > scale_bits {
                return Err(schema(
                    "energy",
                    format!(
                        "correlated pairs need energy <= scale_bits - log2(n) - 10 ({} at n = {})",
                        c.energy, c.n
                    ),
                ));
            }
        }
        Ok(Plan::Obstruction { mode, solver, cells })
    }

    fn lcd(n: usize, degree: usize) -> Result<f64> {
        eps_lcd(n, degree).map_err(|err| schema("degree", err.to_string()))
    }

    pub fn kind(&self) -> ExperimentKind {
        match self.plan {
            Plan::Obstruction { .. } => ExperimentKind::Obstruction,
            Plan::Repel { .. } => ExperimentKind::Repel,
            Plan::Stability { .. } => ExperimentKind::Stability,
            Plan::Rounding { .. } => ExperimentKind::Rounding,
            Plan::Scaling { .. } => ExperimentKind::Scaling,
        }
    }

    /// The config with every default and preset written out. Valid input
    /// for [`ExperimentConfig::from_json`], which maps it back to `self`.
    pub fn resolved_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("experiment".into(), json!(self.kind().as_str()));
        m.insert("seed".into(), json!(self.seed));
        m.insert("trials".into(), json!(self.trials));
        let instances = self.kind().fields().contains(&"scale_bits");
        if instances {
            m.insert("scale_bits".into(), json!(self.scale_bits));
            m.insert("dist".into(), json!(self.dist.as_str()));
        }
        match &self.plan {
            Plan::Obstruction { mode, solver, cells } => {
                m.insert("mode".into(), json!(mode.as_str()));
                m.insert("solver".into(), json!(solver.to_string()));
                let cells: Vec<Value> = cells
                    .iter()
                    .map(|c| json!({"n": c.n, "energy": c.energy, "eps": c.eps, "eta": c.eta}))
                    .collect();
                m.insert("cells".into(), Value::Array(cells));
            }
            Plan::Repel { n, energy, k } => {
                m.insert("n".into(), json!(n));
                m.insert("energy".into(), json!(energy));
                m.insert("k".into(), json!(k));
            }
            Plan::Stability {
                n,
                degree,
                eps,
                mode,
                junta,
                radius,
            } => {
                m.insert("n".into(), json!(n));
                m.insert("degree".into(), json!(degree));
                m.insert("eps".into(), json!(eps));
                m.insert("mode".into(), json!(mode.as_str()));
                m.insert("junta".into(), json!(junta.name()));
                if !radius.is_empty() {
                    m.insert("radius".into(), json!(radius));
                }
            }
            Plan::Rounding {
                n,
                energy,
                degree,
                junta,
                radius,
            } => {
                m.insert("n".into(), json!(n));
                m.insert("energy".into(), json!(energy));
                m.insert("degree".into(), json!(degree));
                m.insert("junta".into(), json!(junta.name()));
                m.insert("radius".into(), json!(radius));
            }
            Plan::Scaling { n, solver } => {
                m.insert("n".into(), json!(n));
                m.insert("solver".into(), json!(solver.to_string()));
            }
        }
        Value::Object(m)
    }

    /// Trials of all cells sharing `n` use the same instance stream.
    fn cell_seed(&self, n: usize) -> u64 {
        rng::derive(self.seed, &[purpose::BATCH, n as u64])
    }
}

/// One row of an obstruction CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionRow {
    pub trial: u64,
    pub s_diff: bool,
    pub s_solve_g: bool,
    pub s_solve_gp: bool,
    pub s_stable: bool,
    pub s_cond: bool,
    /// Flip count, or `NA` when no solution lies within the ball.
    pub nearest_flips: String,
    /// Wall time, or `NA` unless timings were requested.
    pub elapsed_ms: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepelRow {
    pub trial: u64,
    pub pair_within_k: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub trial: u64,
    pub sq_dist: f64,
    pub inner: f64,
    pub norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingRow {
    pub trial: u64,
    pub tilde_in_s: bool,
    pub hat_in_s: bool,
    pub hat_interior: bool,
    pub resampled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub trial: u64,
    /// Optimal `|s|` in units of `2^-B`, as hex.
    pub disc_q: String,
    /// `inf` for perfect partitions.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellRows {
    Obstruction(Vec<ObstructionRow>),
    Repel(Vec<RepelRow>),
    Stability(Vec<StabilityRow>),
    Rounding(Vec<RoundingRow>),
    Scaling(Vec<ScalingRow>),
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| NppError::Internal(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| NppError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| NppError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| NppError::Internal(e.to_string()))
}

fn from_csv<T: DeserializeOwned>(text: &str, file: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| NppError::Parse(format!("{file}: {e}")))
}

impl CellRows {
    pub fn to_csv(&self) -> Result<String> {
        match self {
            CellRows::Obstruction(r) => to_csv(
                r,
                &["trial", "s_diff", "s_solve_g", "s_solve_gp", "s_stable", "s_cond", "nearest_flips", "elapsed_ms"],
            ),
            CellRows::Repel(r) => to_csv(r, &["trial", "pair_within_k"]),
            CellRows::Stability(r) => to_csv(r, &["trial", "sq_dist", "inner", "norm_sq"]),
            CellRows::Rounding(r) => to_csv(r, &["trial", "tilde_in_s", "hat_in_s", "hat_interior", "resampled"]),
            CellRows::Scaling(r) => to_csv(r, &["trial", "disc_q", "energy"]),
        }
    }

    fn parse(kind: ExperimentKind, text: &str, file: &str) -> Result<Self> {
        Ok(match kind {
            ExperimentKind::Obstruction => CellRows::Obstruction(from_csv(text, file)?),
            ExperimentKind::Repel => CellRows::Repel(from_csv(text, file)?),
            ExperimentKind::Stability => CellRows::Stability(from_csv(text, file)?),
            ExperimentKind::Rounding => CellRows::Rounding(from_csv(text, file)?),
            ExperimentKind::Scaling => CellRows::Scaling(from_csv(text, file)?),
        })
    }
}

/// One grid cell: the CSV it owns and the parameters it was run with.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub file: String,
    pub params: Value,
}

impl ExperimentConfig {
    /// Grid cells in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let kind = self.kind().as_str();
        let mut out = Vec::new();
        let mut push = |label: String, params: Value| {
            let file = format!("{kind}_{:02}_{label}.csv", out.len());
            out.push(Cell { file, params });
        };
        match &self.plan {
            Plan::Obstruction { cells, .. } => {
                for c in cells {
                    let flips = ball_flips_for(c.eta, c.n);
                    push(
                        format!("n{}_E{}", c.n, c.energy),
                        json!({"n": c.n, "energy": c.energy, "eps": c.eps, "eta": c.eta, "ball_flips": flips}),
                    );
                }
            }
            Plan::Repel { n, energy, k } => {
                for &n in n {
                    for &e in energy {
                        push(format!("n{n}_E{e}"), json!({"n": n, "energy": e, "k": k}));
                    }
                }
            }
            Plan::Stability {
                n, degree, eps, radius, ..
            } => {
                let radii: Vec<Option<f64>> = if radius.is_empty() {
                    vec![None]
                } else {
                    radius.iter().copied().map(Some).collect()
                };
                for &n in n {
                    for &d in degree {
                        for &e in eps {
                            for &r in &radii {
                                let label = match r {
                                    None => format!("n{n}_D{d}_eps{e}"),
                                    Some(r) => format!("n{n}_D{d}_eps{e}_r{r}"),
                                };
                                push(label, json!({"n": n, "degree": d, "eps": e, "radius": r}));
                            }
                        }
                    }
                }
            }
            Plan::Rounding { n, energy, .. } => {
                for &n in n {
                    for &e in energy {
                        push(format!("n{n}_E{e}"), json!({"n": n, "energy": e}));
                    }
                }
            }
            Plan::Scaling { n, .. } => {
                for &n in n {
                    push(format!("n{n}"), json!({"n": n}));
                }
            }
        }
        out
    }
}

/// Execution options that do not affect the data.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the config's seed.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Record wall times in the obstruction `elapsed_ms` column.
    pub timings: bool,
    pub caps: Caps,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            seed: None,
            workers: None,
            timings: false,
            caps: Caps::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Value,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

fn get_f64(v: &Value, k: &str) -> f64 {
    v[k].as_f64().expect("cell parameters are numeric")
}

fn get_usize(v: &Value, k: &str) -> usize {
    v[k].as_u64().expect("cell parameters are integral") as usize
}

/// Computes the rows of every cell.
pub fn execute(cfg: &ExperimentConfig, timings: bool, caps: &Caps) -> Result<Vec<CellRows>> {
    let cells = cfg.cells();
    match &cfg.plan {
        Plan::Obstruction { mode, solver, cells: ocells } => {
            let params: Vec<ObstructionParams> = ocells
                .iter()
                .map(|c| ObstructionParams {
                    n: c.n,
                    scale_bits: cfg.scale_bits,
                    dist: cfg.dist,
                    energy: EnergyLevel::new(c.energy),
                    eps: c.eps,
                    eta: c.eta,
                    mode: *mode,
                    solver: *solver,
                    ball_flips: ball_flips_for(c.eta, c.n),
                    trials: cfg.trials,
                    seed: cfg.cell_seed(c.n),
                })
                .collect();
            // Cells that share (n, eps) share instances and solver outputs.
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for (i, p) in params.iter().enumerate() {
                match groups
                    .iter_mut()
                    .find(|g| params[g[0]].n == p.n && params[g[0]].eps == p.eps)
                {
                    Some(g) => g.push(i),
                    None => groups.push(vec![i]),
                }
            }
            let mut rows: Vec<Vec<ObstructionRow>> = vec![Vec::new(); params.len()];
            for group in groups {
                let ps: Vec<ObstructionParams> = group.iter().map(|&i| params[i].clone()).collect();
                let per_trial = par::try_map_indexed(cfg.trials, |t| obstruction_trial_levels(&ps, t, caps))?;
                for recs in per_trial {
                    for (&i, r) in group.iter().zip(recs) {
                        rows[i].push(ObstructionRow {
                            trial: r.trial,
                            s_diff: r.s_diff,
                            s_solve_g: r.s_solve_g,
                            s_solve_gp: r.s_solve_gp,
                            s_stable: r.s_stable,
                            s_cond: r.s_cond,
                            nearest_flips: r.nearest_flips.map_or("NA".into(), |k| k.to_string()),
                            elapsed_ms: if timings {
                                format!("{:.3}", r.elapsed_ms)
                            } else {
                                "NA".into()
                            },
                        });
                    }
                }
            }
            Ok(rows.into_iter().map(CellRows::Obstruction).collect())
        }
        Plan::Repel { k, .. } => cells
            .iter()
            .map(|c| {
                let n = get_usize(&c.params, "n");
                let lvl = EnergyLevel::new(get_usize(&c.params, "energy") as u32);
                let seed = cfg.cell_seed(n);
                let rows = par::try_map_indexed(cfg.trials, |t| {
                    let g = sample_instance(n, cfg.dist, cfg.scale_bits, trial_seed(seed, t))?;
                    Ok::<_, NppError>(RepelRow {
                        trial: t,
                        pair_within_k: repel_trial(&g, lvl, *k, caps)?,
                    })
                })?;
                Ok(CellRows::Repel(rows))
            })
            .collect(),
        Plan::Stability { mode, junta, .. } => cells
            .iter()
            .map(|c| {
                let n = get_usize(&c.params, "n");
                let a = junta.build(n, get_usize(&c.params, "degree"))?;
                let eps = get_f64(&c.params, "eps");
                let radius = c.params["radius"].as_f64();
                let seed = cfg.cell_seed(n);
                let rows = par::try_map_indexed(cfg.trials, |t| {
                    let ts = trial_seed(seed, t);
                    let s: StabilitySample = match radius {
                        None => lowdeg::stability_trial(&a, eps, *mode, ts)?,
                        Some(r) => lowdeg::wrapper_stability_trial(&a, eps, *mode, r, ts)?,
                    };
                    Ok::<_, NppError>(StabilityRow {
                        trial: t,
                        sq_dist: s.sq_dist,
                        inner: s.inner,
                        norm_sq: s.norm_sq,
                    })
                })?;
                Ok(CellRows::Stability(rows))
            })
            .collect(),
        Plan::Rounding {
            degree,
            junta,
            radius,
            ..
        } => cells
            .iter()
            .map(|c| {
                let n = get_usize(&c.params, "n");
                let lvl = EnergyLevel::new(get_usize(&c.params, "energy") as u32);
                let a = junta.build(n, *degree)?;
                let seed = cfg.cell_seed(n);
                let rows = par::try_map_indexed(cfg.trials, |t| {
                    let ts = trial_seed(seed, t);
                    let g = sample_instance(n, cfg.dist, cfg.scale_bits, ts)?;
                    let r = rounding_hardness_trial(&a, &g, lvl, *radius, rng::derive(ts, &[purpose::ROUNDING]))?;
                    Ok::<_, NppError>(RoundingRow {
                        trial: t,
                        tilde_in_s: r.tilde_in_s,
                        hat_in_s: r.hat_in_s,
                        hat_interior: r.hat_interior,
                        resampled: r.resampled,
                    })
                })?;
                Ok(CellRows::Rounding(rows))
            })
            .collect(),
        Plan::Scaling { solver, .. } => cells
            .iter()
            .map(|c| {
                let n = get_usize(&c.params, "n");
                let seed = cfg.cell_seed(n);
                let rows = par::try_map_indexed(cfg.trials, |t| {
                    let g = sample_instance(n, cfg.dist, cfg.scale_bits, trial_seed(seed, t))?;
                    let r = solver.solve(&g, caps)?;
                    Ok::<_, NppError>(ScalingRow {
                        trial: t,
                        disc_q: wide::to_hex(r.disc_q),
                        energy: r.energy,
                    })
                })?;
                Ok(CellRows::Scaling(rows))
            })
            .collect(),
    }
}

fn est(e: &EstimateCI) -> Value {
    serde_json::to_value(e).expect("estimates serialize")
}

fn est_or_null(e: Result<EstimateCI>) -> Value {
    e.map(|e| est(&e)).unwrap_or(Value::Null)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

/// Whether the point estimates of cells with the same `n` never increase
/// along the listed energy order.
fn nonincreasing(points: &[(usize, u32, f64)]) -> bool {
    points.iter().enumerate().all(|(i, &(n, e, p))| {
        points[i + 1..]
            .iter()
            .filter(|&&(m, f, _)| m == n && f > e)
            .all(|&(_, _, q)| q <= p)
    })
}

/// Summary statistics computed from the rows alone.
pub fn summarize_rows(cfg: &ExperimentConfig, rows: &[CellRows]) -> Result<Value> {
    let cells = cfg.cells();
    if cells.len() != rows.len() {
        return Err(NppError::Internal("row sets do not match the cell grid".into()));
    }
    let mut out = Vec::new();
    let mut extra = Map::new();
    match &cfg.plan {
        Plan::Obstruction { .. } => {
            let mut points = Vec::new();
            let mut max_c: Option<f64> = None;
            for (c, r) in cells.iter().zip(rows) {
                let CellRows::Obstruction(r) = r else { unreachable!() };
                let n = get_usize(&c.params, "n");
                let e = get_usize(&c.params, "energy") as u32;
                let eta = get_f64(&c.params, "eta");
                let exponent = obstruction_exponent(e, eta, n);
                let p_obst = aggregate(r, |x| !x.s_cond, |x| x.s_diff);
                let (c_point, c_upper) = match &p_obst {
                    Ok(p) => (
                        landscape::measured_constant(p.point, exponent),
                        landscape::measured_constant(p.hi, exponent),
                    ),
                    Err(_) => (None, None),
                };
                if let Ok(p) = &p_obst {
                    points.push((n, e, p.point));
                }
                if let Some(cp) = c_point {
                    max_c = Some(max_c.map_or(cp, |m: f64| m.max(cp)));
                }
                let mut v = c.params.clone();
                let m = v.as_object_mut().expect("cell params are objects");
                m.insert("file".into(), json!(c.file));
                m.insert("p_not_cond_given_diff".into(), est_or_null(p_obst));
                m.insert("p_diff".into(), est_or_null(aggregate(r, |x| x.s_diff, |_| true)));
                m.insert("p_solve_g".into(), est_or_null(aggregate(r, |x| x.s_solve_g, |_| true)));
                m.insert(
                    "p_solve_both_stable".into(),
                    est_or_null(aggregate(r, |x| x.s_solve_g && x.s_solve_gp && x.s_stable, |_| true)),
                );
                m.insert("p_unstable_given_diff".into(), est_or_null(aggregate(r, |x| !x.s_stable, |x| x.s_diff)));
                m.insert("bound_exponent".into(), json!(exponent));
                m.insert("c_point".into(), opt(c_point));
                m.insert("c_upper".into(), opt(c_upper));
                out.push(v);
            }
            extra.insert("nonincreasing_in_energy".into(), json!(nonincreasing(&points)));
            extra.insert("max_c_point".into(), opt(max_c));
        }
        Plan::Repel { k, .. } => {
            let mut points = Vec::new();
            for (c, r) in cells.iter().zip(rows) {
                let CellRows::Repel(r) = r else { unreachable!() };
                let n = get_usize(&c.params, "n");
                let e = get_usize(&c.params, "energy") as u32;
                let f = aggregate(r, |x| x.pair_within_k, |_| true)?;
                points.push((n, e, f.point));
                let mut v = c.params.clone();
                let m = v.as_object_mut().expect("cell params are objects");
                m.insert("file".into(), json!(c.file));
                m.insert("frequency".into(), est(&f));
                m.insert("c_point".into(), opt(repel_constant(f.point, e, *k, n)));
                m.insert("c_upper".into(), opt(repel_constant(f.hi, e, *k, n)));
                out.push(v);
            }
            extra.insert("nonincreasing_in_energy".into(), json!(nonincreasing(&points)));
        }
        Plan::Stability { mode, junta, .. } => {
            for (c, r) in cells.iter().zip(rows) {
                let CellRows::Stability(r) = r else { unreachable!() };
                let n = get_usize(&c.params, "n");
                let d = get_usize(&c.params, "degree");
                let eps = get_f64(&c.params, "eps");
                let sq: Vec<f64> = r.iter().map(|x| x.sq_dist).collect();
                let inn: Vec<f64> = r.iter().map(|x| x.inner).collect();
                let norm: Vec<f64> = r.iter().map(|x| x.norm_sq).collect();
                let c_norm = MeanCI::from_samples(&norm).mean / n as f64;
                let mut v = c.params.clone();
                let m = v.as_object_mut().expect("cell params are objects");
                m.insert("file".into(), json!(c.file));
                m.insert("mean_sq_dist".into(), serde_json::to_value(MeanCI::from_samples(&sq)).expect("serializes"));
                m.insert("mean_inner".into(), serde_json::to_value(MeanCI::from_samples(&inn)).expect("serializes"));
                m.insert("c_norm".into(), json!(c_norm));
                let bound = lowdeg::stability_bound(c_norm, d, eps, n);
                m.insert("bound_14".into(), json!(bound));
                let analytic = (*junta == JuntaFamily::SignProduct && *mode == CouplingMode::Resampled)
                    .then(|| n as f64 * (1.0 - eps).powi(d as i32));
                m.insert("analytic_inner".into(), opt(analytic));
                if let Some(radius) = c.params["radius"].as_f64() {
                    m.insert("bound_17".into(), json!(2.0 * bound + 8.0 * radius * radius));
                }
                out.push(v);
            }
        }
        Plan::Rounding { .. } => {
            for (c, r) in cells.iter().zip(rows) {
                let CellRows::Rounding(r) = r else { unreachable!() };
                let resampled: Vec<f64> = r.iter().map(|x| x.resampled as f64).collect();
                let mut v = c.params.clone();
                let m = v.as_object_mut().expect("cell params are objects");
                m.insert("file".into(), json!(c.file));
                m.insert("p_tilde".into(), est(&aggregate(r, |x| x.tilde_in_s, |_| true)?));
                m.insert("p_hat".into(), est(&aggregate(r, |x| x.hat_in_s, |_| true)?));
                m.insert(
                    "p_tilde_not_hat".into(),
                    est(&aggregate(r, |x| x.tilde_in_s && !x.hat_in_s, |_| true)?),
                );
                m.insert("mean_resampled".into(), json!(MeanCI::from_samples(&resampled).mean));
                out.push(v);
            }
        }
        Plan::Scaling { .. } => {
            let mut ns = Vec::new();
            let mut meds = Vec::new();
            for (c, r) in cells.iter().zip(rows) {
                let CellRows::Scaling(r) = r else { unreachable!() };
                let n = get_usize(&c.params, "n");
                let energies: Vec<f64> = r.iter().map(|x| x.energy).collect();
                let med = median(&energies);
                let mut v = c.params.clone();
                let m = v.as_object_mut().expect("cell params are objects");
                m.insert("file".into(), json!(c.file));
                m.insert("median_energy".into(), opt(med.is_finite().then_some(med)));
                m.insert("median_log2_disc".into(), opt(med.is_finite().then_some(-med)));
                if med.is_finite() {
                    ns.push(n as f64);
                    meds.push(-med);
                }
                out.push(v);
            }
            let slope = (ns.len() >= 2).then(|| linear_fit(&ns, &meds).0);
            extra.insert("slope_log2_disc_per_n".into(), opt(slope));
        }
    }
    let mut summary = Map::new();
    summary.insert("experiment".into(), json!(cfg.kind().as_str()));
    summary.insert("trials".into(), json!(cfg.trials));
    summary.insert("cells".into(), Value::Array(out));
    summary.extend(extra);
    Ok(Value::Object(summary))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> NppError {
    NppError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

/// Validates `config`, runs it and writes CSVs, summary and manifest into
/// `opts.out_dir`.
pub fn run(config: &Value, opts: &RunOptions) -> Result<RunReport> {
    let mut cfg = ExperimentConfig::from_json(config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let started = now_ms();
    let rows = match opts.workers {
        Some(w) => par::with_workers(w, || execute(&cfg, opts.timings, &opts.caps))?,
        None => execute(&cfg, opts.timings, &opts.caps)?,
    };
    let summary = summarize_rows(&cfg, &rows)?;

    fs::create_dir_all(&opts.out_dir).map_err(|e| io_err(&opts.out_dir, e))?;
    let mut files = Vec::new();
    for (cell, r) in cfg.cells().iter().zip(&rows) {
        let path = opts.out_dir.join(&cell.file);
        write_file(&path, &r.to_csv()?)?;
        files.push(path);
    }
    let summary_path = opts.out_dir.join(SUMMARY_FILE);
    write_file(&summary_path, &pretty(&summary))?;
    files.push(summary_path);

    let manifest = json!({
        "artifact_version": ARTIFACT_VERSION,
        "config": config,
        "resolved": cfg.resolved_json(),
        "root_seed": cfg.seed,
        "workers": opts.workers,
        "started_unix_ms": started,
        "finished_unix_ms": now_ms(),
        "outputs": cfg.cells().iter().map(|c| c.file.clone()).chain([SUMMARY_FILE.to_string()]).collect::<Vec<_>>(),
    });
    let manifest_path = opts.out_dir.join(MANIFEST_FILE);
    write_file(&manifest_path, &pretty(&manifest))?;
    files.push(manifest_path);
    Ok(RunReport {
        manifest,
        summary,
        files,
    })
}

/// Reads a manifest (or a directory holding one).
pub fn read_manifest(path: &Path) -> Result<Value> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| NppError::Parse(format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text).map_err(|e| NppError::Parse(format!("{}: {e}", file.display())))
}

/// Recomputes the summary of a finished run from its manifest and CSVs.
pub fn summarize(dir: &Path) -> Result<Value> {
    let manifest = read_manifest(dir)?;
    let dir = if dir.is_dir() { dir } else { dir.parent().unwrap_or(Path::new(".")) };
    let cfg = ExperimentConfig::from_json(&manifest["resolved"])?;
    let rows = cfg
        .cells()
        .iter()
        .map(|c| {
            let path = dir.join(&c.file);
            let text = fs::read_to_string(&path).map_err(|e| NppError::Parse(format!("{}: {e}", path.display())))?;
            CellRows::parse(cfg.kind(), &text, &c.file)
        })
        .collect::<Result<Vec<_>>>()?;
    summarize_rows(&cfg, &rows)
}
