//! Experiment configuration, the end-to-end weighted weak-type experiment and
//! the battery of lemma checks.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cubes::Cube;
use crate::decomp::{cz_decompose, ntv_decompose};
use crate::family::CubeFamily;
use crate::grid::{lp_norm, weak_sup, Grid, GridFunction, TracePoint, WeakSup, WeightedMeasure};
use crate::maximal::{radial_majorant_check, weak11_ratio, RadialProfile};
use crate::operator::{apply_operator, weighted_hormander, strong_type_ratio, KernelSpec, HormanderOptions};
use crate::weights::{ap_characteristic, nu_w, power_of_weight_check, vector_inequalities, Weight, WeightVector};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// `sup_t t^p μ({|g| > t})`, exact over the distinct values of `|g|`.
pub fn weak_quasinorm(g: &GridFunction, mu: &WeightedMeasure, p: f64) -> Result<WeakSup> {
    weak_sup(g, mu, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { value: f64 },
    /// `|x - center|^{-exponent}`.
    Power { exponent: f64, center: Vec<f64> },
}

impl WeightSpec {
    pub fn build(&self, grid: Grid) -> Result<Weight> {
        match self {
            WeightSpec::Constant { value } => Weight::constant(grid, *value),
            WeightSpec::Power { exponent, center } => Weight::power(grid, *exponent, center),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero,
    /// `height` on the box `[lo, hi)`.
    Indicator {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default = "one")]
        height: f64,
    },
    /// `height · max(0, 1 - |x - center|_∞ / radius)`.
    Tent {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        height: f64,
    },
}

impl FunctionSpec {
    pub fn build(&self, grid: Grid) -> Result<GridFunction> {
        let dim_ok = |v: &[f64]| {
            if v.len() == grid.dim() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "function spec has {} coordinates on a {}-d grid",
                    v.len(),
                    grid.dim()
                )))
            }
        };
        match self {
            FunctionSpec::Zero => Ok(GridFunction::zeros(grid)),
            FunctionSpec::Indicator { lo, hi, height } => {
                dim_ok(lo)?;
                dim_ok(hi)?;
                GridFunction::indicator(grid, lo, hi).map(|v| v * height)
            }
            FunctionSpec::Tent { center, radius, height } => {
                dim_ok(center)?;
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("tent radius {radius}")));
                }
                GridFunction::from_fn(grid, |x| {
                    let d = (0..grid.dim()).map(|k| (x[k] - center[k]).abs()).fold(0.0, f64::max);
                    height * (1.0 - d / radius).max(0.0)
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySettings {
    /// Level `t`; decompositions run at height `t^{1/m}`.
    pub t: f64,
    pub gammas: Vec<f64>,
    pub hormander_x_refine: usize,
}

impl Default for BatterySettings {
    fn default() -> Self {
        BatterySettings {
            t: 1.0,
            gammas: vec![0.25, 0.5, 0.75],
            hormander_x_refine: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    pub trace_csv: Option<String>,
    pub report_json: Option<String>,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_seed() -> u64 {
    20190601
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub n: usize,
    pub m: usize,
    /// Cells per axis.
    pub cells: usize,
    /// The box is `[-half_width, half_width)^n`.
    pub half_width: f64,
    pub kernel: String,
    /// Near-diagonal truncation radius; defaults to the cell width.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub weights: Vec<WeightSpec>,
    pub functions: Vec<FunctionSpec>,
    /// Multipliers `λ_i` applied to the functions.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Family for `[ν]_{A_1}`; defaults to exhaustive in 1-d, shifted dyadic in 2-d.
    #[serde(default)]
    pub family: Option<CubeFamily>,
    #[serde(default)]
    pub battery: BatterySettings,
    #[serde(default)]
    pub output: OutputSettings,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.weights.len() != self.m || self.functions.len() != self.m {
            return bad(format!(
                "m = {} needs as many weights and functions, got {} and {}",
                self.m,
                self.weights.len(),
                self.functions.len()
            ));
        }
        if let Some(s) = &self.scales {
            if s.len() != self.m || s.iter().any(|x| !x.is_finite()) {
                return bad("scales must be m finite numbers".into());
            }
        }
        for w in &self.weights {
            if let WeightSpec::Power { exponent, .. } = w {
                if !(0.0..1.0).contains(exponent) {
                    return bad(format!("power exponent {exponent} not in [0, 1)"));
                }
            }
        }
        self.grid()?;
        self.kernel_spec()?;
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return bad(format!("epsilon {e}"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.half_width, self.cells)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::by_name(&self.kernel, self.m, self.n)
    }

    pub fn family(&self) -> CubeFamily {
        self.family.unwrap_or(if self.n == 1 {
            CubeFamily::Exhaustive
        } else {
            CubeFamily::ShiftedDyadic
        })
    }

    pub fn epsilon(&self) -> Result<f64> {
        Ok(self.epsilon.unwrap_or(self.grid()?.cell_width()))
    }

    pub fn build_weights(&self) -> Result<Vec<Weight>> {
        let g = self.grid()?;
        self.weights.iter().map(|w| w.build(g)).collect()
    }

    /// Functions with the scales applied; each must vanish outside the
    /// middle half of the box.
    pub fn build_functions(&self) -> Result<Vec<GridFunction>> {
        let g = self.grid()?;
        let inner = Cube::new(&vec![0.0; self.n], self.half_width)?;
        self.functions
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let f = spec.build(g)?;
                let lambda = self.scales.as_ref().map_or(1.0, |s| s[i]);
                if let Some(q) = f.support_cube() {
                    if !inner.contains_cube(&q) {
                        return Err(Error::InvalidArgument(format!(
                            "function {} is not supported in the middle half of the box",
                            i + 1
                        )));
                    }
                }
                f.map(|v| v * lambda)
            })
            .collect()
    }
}

/// The standard `n = 1`, `m = 2` experiment: weights `|x|^{-a}` and
/// `|x - 1/2|^{-a}`, an indicator and a tent, box `[-4, 4)`.
pub fn default_battery(a: f64, cells: usize) -> ExperimentConfig {
    ExperimentConfig {
        id: format!("riesz2-a{a}-N{cells}"),
        n: 1,
        m: 2,
        cells,
        half_width: 4.0,
        kernel: "riesz2".into(),
        epsilon: None,
        weights: vec![
            WeightSpec::Power {
                exponent: a,
                center: vec![0.0],
            },
            WeightSpec::Power {
                exponent: a,
                center: vec![0.5],
            },
        ],
        functions: vec![
            FunctionSpec::Indicator {
                lo: vec![0.0],
                hi: vec![1.0],
                height: 1.0,
            },
            FunctionSpec::Tent {
                center: vec![-0.5],
                radius: 0.5,
                height: 1.0,
            },
        ],
        scales: None,
        seed: default_seed(),
        family: None,
        battery: BatterySettings::default(),
        output: OutputSettings::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub schema_version: u32,
    pub config_id: String,
    pub n: usize,
    pub m: usize,
    pub cells: usize,
    pub half_width: f64,
    pub kernel: String,
    pub epsilon: f64,
    pub seed: u64,
    /// `‖F‖_{L^{1/m,∞}(ν)} = (sup_t t^{1/m} ν({|F| > t}))^m`.
    pub lhs: f64,
    /// `sup_t t^{1/m} ν({|F| > t})`.
    pub weak_sup: f64,
    pub argmax_t: f64,
    pub norms: Vec<f64>,
    pub rhs_norm_product: f64,
    pub nu_characteristic: f64,
    pub nu_family: CubeFamily,
    pub nu_family_size: usize,
    pub weight_characteristics: Vec<f64>,
    /// `2m^2 + 2m - 2`.
    pub characteristic_exponent: u32,
    pub rhs: f64,
    pub ratio: f64,
    /// For `m = 1`: `[ν]_{A_1} max(1, log(e + [ν]_{A_1})) ‖f‖_{L^1(w)}` and the ratio against it.
    pub linear_log_bound: Option<f64>,
    pub linear_log_ratio: Option<f64>,
    pub caveat: String,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

pub fn characteristic_exponent(m: usize) -> u32 {
    let m = m as u32;
    2 * m * m + 2 * m - 2
}

/// Builds `ν = ∏ w_i^{1/m}`, applies the kernel to `f_i w_i ν^{(1-m)/m}`,
/// divides by `ν` and measures the `L^{1/m,∞}(ν)` quasinorm of the result
/// against `[ν]_{A_1}^{2m^2+2m-2} ∏ ‖f_i‖_{L^1(w_i)}`.
pub fn endpoint_experiment(cfg: &ExperimentConfig) -> Result<EndpointReport> {
    cfg.validate().map_err(Error::stage("config"))?;
    let m = cfg.m;
    let k = cfg.kernel_spec()?;
    let eps = cfg.epsilon()?;
    let weights = cfg.build_weights().map_err(Error::stage("weights"))?;
    let fs = cfg.build_functions().map_err(Error::stage("functions"))?;
    let v = WeightVector::endpoint(weights.clone()).map_err(Error::stage("weights"))?;
    let nu = nu_w(&v);
    let nu_meas = nu.measure();
    let family = cfg.family();
    let nu_report = ap_characteristic(&nu, 1.0, family).map_err(Error::stage("characteristic"))?;
    let weight_characteristics = weights
        .iter()
        .map(|w| ap_characteristic(w, 1.0, family).map(|r| r.value))
        .collect::<Result<Vec<_>>>()
        .map_err(Error::stage("characteristic"))?;

    let nu_pow = nu.density().map(|x| x.powf((1.0 - m as f64) / m as f64))?;
    let args = fs
        .iter()
        .zip(&weights)
        .map(|(f, w)| {
            f.zip_with(w.density(), |a, b| a * b)
                .and_then(|g| g.zip_with(&nu_pow, |a, b| a * b))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = apply_operator(&k, &args, eps).map_err(Error::stage("operator"))?;
    let big_f = out.values.zip_with(nu.density(), |a, b| a / b)?;
    let ws = weak_quasinorm(&big_f, &nu_meas, 1.0 / m as f64).map_err(Error::stage("quasinorm"))?;

    let norms = fs
        .iter()
        .zip(&weights)
        .map(|(f, w)| lp_norm(f, &w.measure(), 1.0))
        .collect::<Result<Vec<_>>>()?;
    let prod: f64 = norms.iter().product();
    let exponent = characteristic_exponent(m);
    let nu_char = nu_report.value;
    let rhs = nu_char.powi(exponent as i32) * prod;
    let lhs = ws.sup.powi(m as i32);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let linear = (m == 1).then(|| nu_char * 1f64.max((std::f64::consts::E + nu_char).ln()) * prod);
    Ok(EndpointReport {
        schema_version: SCHEMA_VERSION,
        config_id: cfg.id.clone(),
        n: cfg.n,
        m,
        cells: cfg.cells,
        half_width: cfg.half_width,
        kernel: k.name().into(),
        epsilon: eps,
        seed: cfg.seed,
        lhs,
        weak_sup: ws.sup,
        argmax_t: ws.argmax,
        norms,
        rhs_norm_product: prod,
        nu_characteristic: nu_char,
        nu_family: family,
        nu_family_size: nu_report.family_size,
        weight_characteristics,
        characteristic_exponent: exponent,
        rhs,
        ratio,
        linear_log_bound: linear,
        linear_log_ratio: linear.map(|b| if b > 0.0 { lhs / b } else { 0.0 }),
        caveat: "boundedness of the kernel operator is checked empirically, not proven; \
                 the implicit constant of the estimate is unknown, so the ratio is tracked, not bounded"
            .into(),
        trace: ws.trace,
    })
}

/// CSV trace rows `config_id,t,level_measure,t_pow_p_times_measure`.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner
            .write_record(["config_id", "t", "level_measure", "t_pow_p_times_measure"])
            .map_err(std::io::Error::from)?;
        Ok(TraceWriter { inner })
    }

    pub fn write(&mut self, config_id: &str, trace: &[TracePoint]) -> Result<()> {
        for p in trace {
            self.inner
                .write_record([
                    config_id.to_string(),
                    p.t.to_string(),
                    p.level_measure.to_string(),
                    p.weighted.to_string(),
                ])
                .map_err(std::io::Error::from)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Hard checks assert an inequality; soft ones only record a value.
    pub hard: bool,
    pub passed: bool,
    pub detail: serde_json::Value,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub schema_version: u32,
    pub config_id: String,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

struct Collector {
    checks: Vec<CheckOutcome>,
}

impl Collector {
    fn run<T: Serialize>(&mut self, name: String, hard: bool, f: impl FnOnce() -> Result<(bool, T)>) {
        let outcome = match f() {
            Ok((passed, detail)) => CheckOutcome {
                name,
                hard,
                passed,
                detail: serde_json::to_value(detail).unwrap_or(serde_json::Value::Null),
                error: None,
            },
            Err(e) => CheckOutcome {
                name,
                hard,
                passed: false,
                detail: serde_json::Value::Null,
                error: Some(e.to_string()),
            },
        };
        self.checks.push(outcome);
    }
}

/// Runs every lemma-level check on the configured weights and functions.
/// Failures are collected; `passed` is false when any hard check fails or
/// errors.
pub fn lemma_battery(cfg: &ExperimentConfig) -> Result<BatteryReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let k = cfg.kernel_spec()?;
    let eps = cfg.epsilon()?;
    let family = cfg.family();
    let settings = &cfg.battery;
    let mut c = Collector { checks: Vec::new() };

    let weights = match cfg.build_weights() {
        Ok(w) => w,
        Err(e) => {
            c.run::<()>("weights".into(), true, || Err(e));
            return Ok(finish(cfg, c));
        }
    };
    let fs = match cfg.build_functions() {
        Ok(f) => f,
        Err(e) => {
            c.run::<()>("functions".into(), true, || Err(e));
            return Ok(finish(cfg, c));
        }
    };

    for (i, w) in weights.iter().enumerate() {
        for &gamma in &settings.gammas {
            c.run(format!("power of weight w{} gamma={gamma}", i + 1), true, || {
                let r = power_of_weight_check(w, gamma, family)?;
                Ok((r.lhs <= r.rhs * (1.0 + 1e-12), r))
            });
        }
    }
    let vector = WeightVector::endpoint(weights.clone());
    c.run("vector characteristic inequalities".into(), true, || {
        let r = vector_inequalities(vector.as_ref().map_err(clone_err)?, family)?;
        Ok((r.min_residual() >= -1e-9, r))
    });
    let nu = match &vector {
        Ok(v) => nu_w(v),
        Err(_) => return Ok(finish(cfg, c)),
    };
    let nu_meas = nu.measure();

    for (i, (f, w)) in fs.iter().zip(&weights).enumerate() {
        if f.is_zero() {
            continue;
        }
        c.run(format!("weak (1,1) of M_w, f{}", i + 1), false, || {
            let r = weak11_ratio(f, &w.measure(), CubeFamily::Exhaustive)?;
            Ok((r.ratio.is_finite(), r))
        });
    }
    if grid.dim() == 1 {
        let f = &fs[0];
        let h = grid.cell_width();
        c.run("radial majorant, indicator profile".into(), true, || {
            let r = radial_majorant_check(f, &RadialProfile::Indicator { radius: 4.0 * h })?;
            Ok((r.max_violation <= 1e-12 * r.discrete_norm.max(1.0) * f.abs_max().max(1.0), r))
        });
        c.run("radial majorant, truncated power profile".into(), true, || {
            let r = radial_majorant_check(
                f,
                &RadialProfile::TruncatedPower {
                    scale: 16.0 * h,
                    delta: 1.0,
                },
            )?;
            Ok((r.passed(), r))
        });
    }

    if let Some(q) = fs.iter().find_map(|f| f.support_cube()) {
        c.run("weighted hormander estimate".into(), false, || {
            let opts = HormanderOptions {
                x_refine: settings.hormander_x_refine,
                seed: cfg.seed,
                family: Some(family),
                ..HormanderOptions::default()
            };
            let r = weighted_hormander(&k, &nu, &[vec![q]], &opts)?;
            Ok((r.lhs.is_finite() && r.rhs.is_finite(), r))
        });
    }
    if fs.iter().all(|f| !f.is_zero()) {
        c.run("strong type ratio".into(), false, || {
            let r = strong_type_ratio(&k, &fs, eps)?;
            Ok((r.is_finite(), json!({ "ratio": r })))
        });
    }

    let level = settings.t.powf(1.0 / cfg.m as f64);
    for (i, (f, w)) in fs.iter().zip(&weights).enumerate() {
        let phi = f
            .zip_with(w.density(), |a, b| a * b)
            .and_then(|g| g.zip_with(nu.density(), |a, b| a / b));
        c.run(format!("cz decomposition, f{}", i + 1), true, || {
            let d = cz_decompose(phi.as_ref().map_err(clone_err)?, &nu_meas, level)?;
            Ok((d.passed(), json!({ "cubes": d.bad_parts.len(), "properties": d.properties })))
        });
        c.run(format!("ntv decomposition, f{}", i + 1), true, || {
            let d = ntv_decompose(phi.as_ref().map_err(clone_err)?, &nu_meas, settings.t, cfg.m)?;
            let e = crate::decomp::construct_e_cubes(&d, &nu_meas)?;
            Ok((
                d.passed(),
                json!({
                    "cubes": d.whitney_cubes.len(),
                    "boundary_layer": d.boundary_layer.len(),
                    "e_cubes": e.len(),
                    "properties": d.properties,
                }),
            ))
        });
    }
    Ok(finish(cfg, c))
}

fn clone_err(e: &Error) -> Error {
    Error::Precondition(e.to_string())
}

fn finish(cfg: &ExperimentConfig, c: Collector) -> BatteryReport {
    let passed = c.checks.iter().all(|x| x.passed || !x.hard);
    BatteryReport {
        schema_version: SCHEMA_VERSION,
        config_id: cfg.id.clone(),
        checks: c.checks,
        passed,
    }
}
