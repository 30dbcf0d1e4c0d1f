use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use czlab::cubes::{certify_whitney, whitney_decompose, CellSet, WhitneyOptions};
use czlab::decomp::{construct_e_cubes, cz_decompose, ntv_decompose};
use czlab::harness::{
    default_battery, lemma_battery, endpoint_experiment, weak_quasinorm, ExperimentConfig, TraceWriter,
    SCHEMA_VERSION,
};
use czlab::maximal::hl_maximal;
use czlab::operator::{apply_operator, strong_type_ratio};
use czlab::weights::{ap_characteristic, multilinear_characteristic, nu_w, power_of_weight_check, vector_inequalities};
use czlab::{Error, GridFunction, Weight, WeightVector};

#[derive(Parser)]
#[command(name = "czlab", version, about = "Weighted weak-type experiments for multilinear singular integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (TOML). Without it the n = 1, m = 2 Riesz experiment with a = 1/4 is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq)]
enum Command {
    /// A_1 characteristics of the weights and of ν, power checks, vector inequalities.
    Characteristic,
    /// Dyadic Calderón–Zygmund split of each f_i w_i / ν at height t^{1/m}.
    DecomposeCz,
    /// Whitney-based split at level t, with the shrunken E cubes.
    DecomposeNtv,
    /// Whitney cubes of {M f_1 > level}, certified.
    Whitney {
        /// Defaults to half of sup |f_1|.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Applies the kernel to the functions; writes the output grid as CSV.
    Apply,
    /// Weak L^{p,∞}(w_i) quasinorm of each f_i.
    Weaknorm {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Every lemma-level check on the configured data.
    LemmaBattery,
    /// Weak-type endpoint experiment: quasinorm, bound and ratio.
    Theorem4,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Characteristic => "characteristic",
            Command::DecomposeCz => "decompose-cz",
            Command::DecomposeNtv => "decompose-ntv",
            Command::Whitney { .. } => "whitney",
            Command::Apply => "apply",
            Command::Weaknorm { .. } => "weaknorm",
            Command::LemmaBattery => "lemma-battery",
            Command::Theorem4 => "theorem4",
        }
    }
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl Into<anyhow::Error>) -> anyhow::Error {
    ConfigError(e.into()).into()
}

/// Core errors that describe bad input rather than a failed run.
fn classify(e: Error) -> anyhow::Error {
    match e.root() {
        Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::NonPositiveWeight { .. } => config_err(e),
        _ => e.into(),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config_err)?;
            ExperimentConfig::from_toml(&text).map_err(config_err)?
        }
        None => default_battery(0.25, 256),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

struct Run {
    cfg: ExperimentConfig,
    out_dir: PathBuf,
    command: &'static str,
}

impl Run {
    /// Configured output names apply to `theorem4` only; other commands
    /// write `<command>-<id>.<ext>`.
    fn path(&self, configured: Option<&String>, ext: &str) -> PathBuf {
        match configured.filter(|_| self.command == "theorem4") {
            Some(p) => self.out_dir.join(p),
            None => self.out_dir.join(format!("{}-{}.{ext}", self.command, self.cfg.id)),
        }
    }

    fn write_json<T: Serialize>(&self, report: &T) -> Result<PathBuf> {
        let path = self.path(self.cfg.output.report_json.as_ref(), "json");
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(file), report)?;
        Ok(path)
    }

    fn trace_writer(&self) -> Result<(PathBuf, TraceWriter<BufWriter<File>>)> {
        let path = self.path(self.cfg.output.trace_csv.as_ref(), "csv");
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, TraceWriter::new(BufWriter::new(file))?))
    }

    fn envelope(&self, passed: bool, body: Value) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config_id": self.cfg.id,
            "seed": self.cfg.seed,
            "passed": passed,
            "result": body,
        })
    }

    fn weights(&self) -> Result<Vec<Weight>> {
        self.cfg.build_weights().map_err(classify)
    }

    fn functions(&self) -> Result<Vec<GridFunction>> {
        self.cfg.build_functions().map_err(classify)
    }

    /// `φ_i = f_i w_i / ν` with `ν = ∏ w_i^{1/m}`.
    fn phis(&self) -> Result<(Weight, Vec<GridFunction>)> {
        let weights = self.weights()?;
        let fs = self.functions()?;
        let nu = nu_w(&WeightVector::endpoint(weights.clone()).map_err(classify)?);
        let phis = fs
            .iter()
            .zip(&weights)
            .map(|(f, w)| {
                f.zip_with(w.density(), |a, b| a * b)
                    .and_then(|g| g.zip_with(nu.density(), |a, b| a / b))
            })
            .collect::<czlab::Result<Vec<_>>>()?;
        Ok((nu, phis))
    }
}

fn characteristic(run: &Run) -> Result<(bool, Value)> {
    let family = run.cfg.family();
    let weights = run.weights()?;
    let mut passed = true;
    let mut per_weight = Vec::new();
    for w in &weights {
        let a1 = ap_characteristic(w, 1.0, family)?;
        passed &= a1.value >= 1.0 - 1e-12;
        let powers = run
            .cfg
            .battery
            .gammas
            .iter()
            .map(|&g| power_of_weight_check(w, g, family))
            .collect::<czlab::Result<Vec<_>>>()?;
        passed &= powers.iter().all(|c| c.lhs <= c.rhs * (1.0 + 1e-12));
        per_weight.push(json!({ "a1": a1, "power_checks": powers }));
    }
    let v = WeightVector::endpoint(weights).map_err(classify)?;
    let nu = ap_characteristic(&nu_w(&v), 1.0, family)?;
    let vector = multilinear_characteristic(&v, family)?;
    let ineq = vector_inequalities(&v, family)?;
    passed &= ineq.min_residual() >= -1e-9;
    println!(
        "[nu]_A1 = {:.6}, [w]_A(1,..,1) = {:.6}, weights: {}",
        nu.value,
        vector.value,
        per_weight.iter().map(|w| format!("{:.6}", w["a1"]["value"].as_f64().unwrap_or(f64::NAN))).collect::<Vec<_>>().join(", ")
    );
    Ok((
        passed,
        json!({ "weights": per_weight, "nu": nu, "vector": vector, "inequalities": ineq }),
    ))
}

fn decompose_cz(run: &Run) -> Result<(bool, Value)> {
    let (nu, phis) = run.phis()?;
    let nu_meas = nu.measure();
    let level = run.cfg.battery.t.powf(1.0 / run.cfg.m as f64);
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, phi) in phis.iter().enumerate() {
        let d = cz_decompose(phi, &nu_meas, level)?;
        passed &= d.passed();
        println!("f{}: {} cubes, properties {}", i + 1, d.bad_parts.len(), verdict(d.passed()));
        parts.push(json!({
            "height": d.height,
            "root": d.root,
            "nu_characteristic": d.nu_characteristic,
            "cubes": d.cubes().collect::<Vec<_>>(),
            "good_sup": d.good.abs_max(),
            "properties": d.properties,
        }));
    }
    Ok((passed, json!({ "functions": parts })))
}

fn decompose_ntv(run: &Run) -> Result<(bool, Value)> {
    let (nu, phis) = run.phis()?;
    let nu_meas = nu.measure();
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, phi) in phis.iter().enumerate() {
        let d = ntv_decompose(phi, &nu_meas, run.cfg.battery.t, run.cfg.m)?;
        let e = construct_e_cubes(&d, &nu_meas)?;
        passed &= d.passed();
        println!(
            "f{}: {} whitney cubes + {} boundary layer, {} E cubes, properties {}",
            i + 1,
            d.whitney_cubes.len(),
            d.boundary_layer.len(),
            e.len(),
            verdict(d.passed())
        );
        parts.push(json!({
            "level": d.level,
            "nu_characteristic": d.nu_characteristic,
            "weak_constant": d.weak_constant,
            "whitney_cubes": d.whitney_cubes,
            "boundary_layer": d.boundary_layer,
            "certificate": d.whitney_certificate,
            "e_cubes": e,
            "properties": d.properties,
        }));
    }
    Ok((passed, json!({ "functions": parts })))
}

fn whitney(run: &Run, level: Option<f64>) -> Result<(bool, Value)> {
    let fs = run.functions()?;
    let t = level.unwrap_or(0.5 * fs[0].abs_max());
    if !(t.is_finite() && t >= 0.0) {
        return Err(config_err(anyhow::anyhow!("level must be non-negative, got {t}")));
    }
    let mf = hl_maximal(&fs[0], run.cfg.family()).values;
    let omega = CellSet::from_predicate(*mf.grid(), |i| mf.values()[i] > t);
    let opts = WhitneyOptions {
        exterior_is_complement: true,
        ..WhitneyOptions::default()
    };
    let w = whitney_decompose(&omega, &opts)?;
    let cert = certify_whitney(&omega, &w, &opts);
    println!(
        "{} cells in omega, {} certified cubes, {} boundary layer, covered fraction {:.4}, {}",
        omega.count(),
        w.cubes.len(),
        w.boundary_layer.len(),
        cert.covered_fraction,
        verdict(cert.passed())
    );
    Ok((
        cert.passed(),
        json!({ "level": t, "omega_cells": omega.count(), "decomposition": w, "certificate": cert }),
    ))
}

fn apply(run: &Run) -> Result<(bool, Value)> {
    let fs = run.functions()?;
    let k = run.cfg.kernel_spec()?;
    let eps = run.cfg.epsilon()?;
    let out = apply_operator(&k, &fs, eps)?;
    let finite = out.values.values().iter().all(|v| v.is_finite());
    let ratio = if fs.iter().all(|f| !f.is_zero()) {
        Some(strong_type_ratio(&k, &fs, eps)?)
    } else {
        None
    };

    let path = run.path(run.cfg.output.trace_csv.as_ref(), "csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    let grid = *out.values.grid();
    let dim = grid.dim();
    let header: Vec<&str> = ["x", "y"][..dim].iter().copied().chain(["value"]).collect();
    w.write_record(&header)?;
    for (i, v) in out.values.values().iter().enumerate() {
        let c = grid.center(i);
        let mut row: Vec<String> = c[..dim].iter().map(|x| x.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    println!(
        "{}: sup |T| = {:.6e}, strong type ratio {}, values -> {}",
        out.kernel_name,
        out.values.abs_max(),
        ratio.map_or("n/a".into(), |r| format!("{r:.6}")),
        path.display()
    );
    Ok((
        finite,
        json!({ "kernel": out.kernel_name, "epsilon": out.epsilon, "sup": out.values.abs_max(), "strong_type_ratio": ratio }),
    ))
}

fn weaknorm(run: &Run, p: f64) -> Result<(bool, Value)> {
    if !(p.is_finite() && p > 0.0) {
        return Err(config_err(anyhow::anyhow!("p must be positive, got {p}")));
    }
    let weights = run.weights()?;
    let fs = run.functions()?;
    let (path, mut trace) = run.trace_writer()?;
    let mut parts = Vec::new();
    for (i, (f, w)) in fs.iter().zip(&weights).enumerate() {
        let ws = weak_quasinorm(f, &w.measure(), p)?;
        trace.write(&format!("{}/f{}", run.cfg.id, i + 1), &ws.trace)?;
        println!("f{}: sup_t t^{p} w(|f| > t) = {:.6e} at t = {:.6e}", i + 1, ws.sup, ws.argmax);
        parts.push(json!({ "sup": ws.sup, "quasinorm": ws.quasinorm(), "argmax_t": ws.argmax }));
    }
    trace.finish()?;
    println!("trace -> {}", path.display());
    Ok((true, json!({ "p": p, "functions": parts })))
}

fn battery(run: &Run) -> Result<(bool, Value)> {
    let r = lemma_battery(&run.cfg).map_err(classify)?;
    for c in &r.checks {
        let tag = if c.passed { "ok" } else if c.hard { "FAIL" } else { "soft-fail" };
        println!("{tag:>9}  {}{}", c.name, c.error.as_ref().map_or(String::new(), |e| format!(": {e}")));
    }
    Ok((r.passed, serde_json::to_value(&r)?))
}

fn theorem4(run: &Run) -> Result<(bool, Value)> {
    let r = endpoint_experiment(&run.cfg).map_err(classify)?;
    let (path, mut trace) = run.trace_writer()?;
    trace.write(&r.config_id, &r.trace)?;
    trace.finish()?;
    println!(
        "lhs = {:.6e}, [nu]_A1 = {:.6}, rhs = {:.6e}, ratio = {:.6e}; trace -> {}",
        r.lhs,
        r.nu_characteristic,
        r.rhs,
        r.ratio,
        path.display()
    );
    let passed = r.lhs.is_finite() && r.rhs.is_finite() && r.ratio.is_finite() && r.ratio >= 0.0;
    Ok((passed, serde_json::to_value(&r)?))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(config_err)?;
    }
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let run = Run {
        cfg,
        out_dir: cli.out_dir.clone(),
        command: cli.command.name(),
    };
    let (passed, body) = match cli.command {
        Command::Characteristic => characteristic(&run),
        Command::DecomposeCz => decompose_cz(&run),
        Command::DecomposeNtv => decompose_ntv(&run),
        Command::Whitney { level } => whitney(&run, level),
        Command::Apply => apply(&run),
        Command::Weaknorm { p } => weaknorm(&run, p),
        Command::LemmaBattery => battery(&run),
        Command::Theorem4 => theorem4(&run),
    }
    .map_err(|e| match e.downcast::<Error>() {
        Ok(core) => classify(core),
        Err(other) => other,
    })?;
    let report = if run.command == "theorem4" || run.command == "lemma-battery" {
        body
    } else {
        run.envelope(passed, body)
    };
    let path = run.write_json(&report)?;
    println!("{} -> {}", verdict(passed), path.display());
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
