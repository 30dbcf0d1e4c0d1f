//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime
//! against the budget. Exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{log_uniform, random_bumps, random_open_set, random_weight};
use czlab::cubes::whitney::{certify_whitney, whitney_decompose, WhitneyOptions};
use czlab::decomp::{cz_decompose, ntv_decompose, reconstruct};
use czlab::grid::lp_norm;
use czlab::harness::{default_battery, endpoint_experiment, EndpointReport};
use czlab::maximal::{radial_majorant_check, weak11_ratio, RadialProfile};
use czlab::operator::{
    check_size, check_smoothness, evaluate_at, weighted_hormander, KernelSpec, HormanderOptions, SamplingScale,
};
use czlab::weights::{
    ap_characteristic, multilinear_characteristic, power_of_weight_check, vector_inequalities,
};
use czlab::{Cube, CubeFamily, Error, Grid, GridFunction, Weight, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MEAN_ZERO_REL: f64 = 1e-10;
const POWER_SLACK: f64 = -1e-12;
const VECTOR_SLACK: f64 = -1e-9;
const COINCIDENCE_REL: f64 = 1e-12;
const HILBERT_ABS: f64 = 5e-3;
const QUADRATURE_REL: f64 = 0.01;
const SAMPLE_STABILITY: f64 = 0.20;
const LOG3_REL: f64 = 0.02;
const REFINE_STABILITY: f64 = 0.10;
const SCALE_INVARIANCE: f64 = 1e-9;
const N_STABILITY: f64 = 0.10;
const UNIFORMITY_FACTOR: f64 = 3.0;
const WEAK11_MAX: f64 = 4.0;
const WEIGHT_INDEPENDENCE: f64 = 1.5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn decomposition_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let grids = [Grid::new(1, 8.0, 256).unwrap(), Grid::new(2, 8.0, 32).unwrap()];
    let mut failures = Vec::new();

    let mut worst_mean = 0.0f64;
    for trial in 0..100 {
        let grid = grids[trial % 2];
        let nu = random_weight(&mut rng, grid, 0.75).measure();
        let phi = random_bumps(&mut rng, grid, true);
        let norm = lp_norm(&phi, &nu, 1.0).unwrap();
        let height = norm / nu.total() * log_uniform(&mut rng, 1.5, 50.0);
        match cz_decompose(&phi, &nu, height) {
            Ok(d) => {
                if !d.passed() {
                    let bad: Vec<_> = d.properties.iter().filter(|p| !p.passed).map(|p| p.name.clone()).collect();
                    failures.push(format!("cz trial {trial}: {bad:?}"));
                }
                for b in &d.bad_parts {
                    let v = czlab::cubes::cube_measure(&b.cube, &nu);
                    worst_mean = worst_mean.max(b.integral(&nu).abs() / (height * v));
                }
                let back = reconstruct(&d.good, &d.bad_parts);
                let err = back.zip_with(&phi, |a, b| (a - b).abs()).unwrap().abs_max();
                if err > 1e-12 * phi.abs_max() {
                    failures.push(format!("cz trial {trial}: reconstruction error {err:e}"));
                }
            }
            Err(e) => failures.push(format!("cz trial {trial}: {e}")),
        }
    }

    let mut certified = 0;
    let mut redrawn = 0;
    let mut cubes = 0;
    while certified < 100 {
        let grid = grids[certified % 2];
        let nu = random_weight(&mut rng, grid, 0.75).measure();
        let phi = random_bumps(&mut rng, grid, false);
        let m = rng.gen_range(1..=3);
        let norm = lp_norm(&phi, &nu, 1.0).unwrap();
        let level = norm / nu.total() * log_uniform(&mut rng, 4.0, 200.0);
        let t = level.powi(m as i32);
        match ntv_decompose(&phi, &nu, t, m) {
            Ok(d) => {
                certified += 1;
                cubes += d.whitney_cubes.len() + d.boundary_layer.len();
                if !d.passed() {
                    let bad: Vec<_> = d.properties.iter().filter(|p| !p.passed).map(|p| p.name.clone()).collect();
                    failures.push(format!("ntv: {bad:?}"));
                }
                if !d.whitney_certificate.passed() {
                    failures.push(format!("ntv: whitney {:?}", d.whitney_certificate));
                }
            }
            Err(Error::Precondition(_)) => {
                redrawn += 1;
                if redrawn > 200 {
                    failures.push("ntv: too many rejected draws".into());
                    break;
                }
            }
            Err(e) => {
                certified += 1;
                failures.push(format!("ntv: {e}"));
            }
        }
    }
    outcome(
        failures.is_empty() && worst_mean <= MEAN_ZERO_REL,
        format!(
            "100 cz + {certified} ntv triples, {cubes} ntv cubes, {redrawn} ntv draws rejected by precondition, \
             worst mean-zero slack {worst_mean:.1e}·scale, failures {failures:?}"
        ),
    )
}

fn whitney_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = Vec::new();
    let (mut certified, mut layer, mut worst_cover) = (0, 0, 1.0f64);
    for trial in 0..50 {
        let grid = if trial % 2 == 0 {
            Grid::new(1, 4.0, 256).unwrap()
        } else {
            Grid::new(2, 4.0, 64).unwrap()
        };
        let omega = random_open_set(&mut rng, grid);
        let opts = WhitneyOptions {
            exterior_is_complement: rng.gen(),
            ..WhitneyOptions::default()
        };
        match whitney_decompose(&omega, &opts) {
            Ok(w) => {
                let c = certify_whitney(&omega, &w, &opts);
                certified += c.cubes_checked;
                layer += w.boundary_layer.len();
                worst_cover = worst_cover.min(c.covered_fraction);
                if !c.passed() {
                    failures.push(format!("set {trial}: {c:?}"));
                }
            }
            Err(e) => failures.push(format!("set {trial}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "50 sets, {certified} cubes certified in [2, 8] diam, {layer} sub-cell boundary-layer cubes, \
             min certified cover {worst_cover:.4}, failures {failures:?}"
        ),
    )
}

fn weight_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let grid = Grid::new(1, 4.0, 2048).unwrap();
    let family = CubeFamily::Exhaustive;
    let mut failures = Vec::new();

    let mut worst_power = f64::INFINITY;
    for _ in 0..200 {
        let w = random_weight(&mut rng, grid, 0.9);
        let gamma = rng.gen::<f64>();
        let r = power_of_weight_check(&w, gamma, family).unwrap();
        let slack = r.slack() / r.rhs;
        worst_power = worst_power.min(slack);
        if slack < POWER_SLACK {
            failures.push(format!("power check gamma {gamma}: {} > {}", r.lhs, r.rhs));
        }
    }

    let mut worst_vector = f64::INFINITY;
    for _ in 0..50 {
        let m = rng.gen_range(2..=3);
        let weights: Vec<Weight> = (0..m).map(|_| random_weight(&mut rng, grid, 0.5)).collect();
        let exponents: Vec<f64> = (0..m)
            .map(|_| if rng.gen::<f64>() < 0.3 { 1.0 } else { rng.gen_range(1.2..4.0) })
            .collect();
        let v = WeightVector::new(weights, exponents.clone()).unwrap();
        let r = vector_inequalities(&v, family).unwrap();
        worst_vector = worst_vector.min(r.min_residual());
        if r.min_residual() < VECTOR_SLACK {
            failures.push(format!("inequalities for exponents {exponents:?}: {:?}", r.inequalities));
        }
    }

    let mut worst_m1 = 0.0f64;
    for _ in 0..20 {
        let w = random_weight(&mut rng, grid, 0.9);
        let p = if rng.gen::<bool>() { 1.0 } else { rng.gen_range(1.1..5.0) };
        let single = ap_characteristic(&w, p, family).unwrap().value;
        let v = WeightVector::new(vec![w], vec![p]).unwrap();
        let multi = multilinear_characteristic(&v, family).unwrap().value.powf(p);
        worst_m1 = worst_m1.max(rel(multi, single));
    }
    if worst_m1 > COINCIDENCE_REL {
        failures.push(format!("m = 1 coincidence off by {worst_m1:e}"));
    }
    outcome(
        failures.is_empty(),
        format!(
            "200 power checks (min rel slack {worst_power:.2e}), 50 vectors (min residual {worst_vector:.2e}), \
             m = 1 coincidence {worst_m1:.1e}, failures {failures:?}"
        ),
    )
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

fn operator_suite() -> Outcome {
    let mut failures = Vec::new();
    let g = Grid::new(1, 4.0, 2048).unwrap();
    let f = GridFunction::indicator(g, &[-1.0], &[1.0]);
    let h = g.cell_width();
    let at2 = evaluate_at(&KernelSpec::hilbert(), &[f], &[[2.0, 0.0]], h).unwrap()[0];
    let log3 = 3f64.ln();
    if (at2 - log3).abs() > HILBERT_ABS {
        failures.push(format!("hilbert at 2: {at2} vs {log3}"));
    }

    let g = Grid::new(1, 4.0, 512).unwrap();
    let f1 = GridFunction::indicator(g, &[0.0], &[1.0]);
    let f2 = GridFunction::indicator(g, &[-0.5], &[0.5]);
    let probes = [-2.0, -1.5, -1.0, -0.75, -0.25, 1.25, 1.5, 2.0, 2.5, 3.0];
    let points: Vec<[f64; 2]> = probes.iter().map(|&x| [x, 0.0]).collect();
    let k = KernelSpec::riesz2();
    let got = evaluate_at(&k, &[f1, f2], &points, g.cell_width()).unwrap();
    let mut worst = 0.0f64;
    for (&x, &v) in probes.iter().zip(&got) {
        let inner = |y1: f64| {
            simpson(
                &|y2: f64| (x - y1) / ((x - y1).powi(2) + (x - y2).powi(2)).powf(1.5),
                -0.5,
                0.5,
                1e-11,
            )
        };
        let oracle = simpson(&inner, 0.0, 1.0, 1e-10);
        let e = rel(v, oracle);
        worst = worst.max(e);
        if e > QUADRATURE_REL {
            failures.push(format!("riesz2 at {x}: {v} vs {oracle}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("hilbert at x = 2: {at2:.6} (log 3 = {log3:.6}); riesz2 vs quadrature worst rel {worst:.2e}; failures {failures:?}"),
    )
}

fn kernel_suite() -> Outcome {
    let scale = SamplingScale::default();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    let envelope = |k: &KernelSpec| (k.m() as f64).powf((k.n() * k.m()) as f64 / 2.0);
    for k in [KernelSpec::hilbert(), KernelSpec::riesz2(), KernelSpec::riesz3()] {
        let s1 = check_size(&k, 100_000, 11, &scale).unwrap().size_constant.unwrap();
        let s2 = check_size(&k, 1_000_000, 12, &scale).unwrap().size_constant.unwrap();
        let d1 = check_smoothness(&k, 100_000, 13, &scale).unwrap().smoothness_constant.unwrap();
        let d2 = check_smoothness(&k, 1_000_000, 14, &scale).unwrap().smoothness_constant.unwrap();
        lines.push(format!("{} size {s1:.3}/{s2:.3} smooth {d1:.3}/{d2:.3}", k.name()));
        if s1 > envelope(&k) * (1.0 + 1e-12) {
            failures.push(format!("{} size {s1} above {}", k.name(), envelope(&k)));
        }
        if k.name() == "hilbert" && d1 > 4.0 {
            failures.push(format!("hilbert smoothness {d1}"));
        }
        if rel(s2, s1) > SAMPLE_STABILITY || rel(d2, d1) > SAMPLE_STABILITY {
            failures.push(format!("{} unstable under 10x samples", k.name()));
        }
        if !(s1.is_finite() && d1.is_finite()) {
            failures.push(format!("{} non-finite constant", k.name()));
        }
    }
    outcome(failures.is_empty(), format!("{}; failures {failures:?}", lines.join("; ")))
}

fn hormander_suite() -> Outcome {
    let mut failures = Vec::new();
    let g = Grid::new(1, 256.0, 8192).unwrap();
    let w = Weight::constant(g, 1.0).unwrap();
    let q = Cube::new(&[0.0], 2.0).unwrap();
    let r = weighted_hormander(&KernelSpec::hilbert(), &w, &[vec![q]], &HormanderOptions::default()).unwrap();
    let oracle = 2.0 * 3f64.ln();
    if rel(r.lhs, oracle) > LOG3_REL {
        failures.push(format!("hilbert lhs {} vs {oracle}", r.lhs));
    }

    let g = Grid::new(1, 8.0, 512).unwrap();
    let k = KernelSpec::riesz2();
    let one = vec![Cube::new(&[0.5], 1.0).unwrap(), Cube::new(&[2.5], 1.0).unwrap()];
    let two = vec![vec![Cube::new(&[0.5], 1.0).unwrap()], vec![Cube::new(&[-2.5], 1.0).unwrap()]];
    let mut ratios = Vec::new();
    for a in [0.0, 0.25, 0.5] {
        let w = Weight::power(g, a, &[0.0]).unwrap();
        for (label, families) in [("l=1", vec![one.clone()]), ("l=2", two.clone())] {
            let run = |x_refine| {
                let opts = HormanderOptions {
                    x_refine,
                    ..HormanderOptions::default()
                };
                weighted_hormander(&k, &w, &families, &opts).unwrap().ratio.unwrap()
            };
            let (coarse, fine) = (run(2), run(4));
            ratios.push(format!("a={a} {label}: {coarse:.4}/{fine:.4}"));
            if !(coarse.is_finite() && fine.is_finite()) || rel(fine, coarse) > REFINE_STABILITY {
                failures.push(format!("a={a} {label}: {coarse} vs {fine}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "hilbert lhs {:.5} (2 log 3 = {oracle:.5}); riesz2 ratio at x-refine 2/4: {}; failures {failures:?}",
            r.lhs,
            ratios.join(", ")
        ),
    )
}

fn endpoint_suite() -> Outcome {
    let mut failures = Vec::new();
    let mut reports: Vec<EndpointReport> = Vec::new();
    let mut run = |a: f64, cells: usize, scales: Option<Vec<f64>>| {
        let mut cfg = default_battery(a, cells);
        cfg.scales = scales;
        let r = endpoint_experiment(&cfg).unwrap();
        reports.push(r.clone());
        r
    };
    let mut stable = Vec::new();
    let mut fine = Vec::new();
    for a in [0.0, 0.25, 0.5] {
        let lo = run(a, 256, None);
        let hi = run(a, 512, None);
        stable.push(format!("a={a}: {:.4}/{:.4}", lo.ratio, hi.ratio));
        if !(hi.ratio.is_finite() && hi.ratio > 0.0) || rel(hi.ratio, lo.ratio) > N_STABILITY {
            failures.push(format!("a={a}: N=256 ratio {} vs N=512 {}", lo.ratio, hi.ratio));
        }
        fine.push(hi.ratio);
    }
    let base = fine[0];
    let worst = fine.iter().map(|r| r / base).fold(0.0, f64::max);
    if worst > UNIFORMITY_FACTOR {
        failures.push(format!("power-weight ratio {worst:.3}x the all-ones baseline"));
    }

    let plain = run(0.25, 256, None);
    let scaled = run(0.25, 256, Some(vec![3.7, 0.02]));
    let drift = rel(scaled.ratio, plain.ratio);
    if drift > SCALE_INVARIANCE {
        failures.push(format!("rescaling moved the ratio by {drift:e}"));
    }
    for r in &reports {
        let json = serde_json::to_value(r).unwrap();
        if r.characteristic_exponent != 10 || json["characteristic_exponent"] != 10 {
            failures.push(format!("{}: exponent {}", r.config_id, r.characteristic_exponent));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "exponent 10 in {} reports; ratio N=256/512 {}; max {worst:.3}x baseline; scaling drift {drift:.1e}; failures {failures:?}",
            reports.len(),
            stable.join(", ")
        ),
    )
}

fn maximal_suite() -> Outcome {
    let mut failures = Vec::new();
    let g = Grid::new(1, 4.0, 2048).unwrap();
    let indicator = GridFunction::indicator(g, &[0.0], &[1.0]);
    let tent = GridFunction::from_fn(g, |x| (1.0 - (x[0] + 0.5).abs() / 0.5).max(0.0)).unwrap();
    let mut lines = Vec::new();
    for (name, f) in [("indicator", &indicator), ("tent", &tent)] {
        let mut base = None;
        for a in [0.0, 0.5] {
            let w = Weight::power(g, a, &[0.0]).unwrap().measure();
            let r = weak11_ratio(f, &w, CubeFamily::Exhaustive).unwrap().ratio;
            lines.push(format!("{name} a={a}: {r:.4}"));
            if r > WEAK11_MAX {
                failures.push(format!("{name} a={a}: ratio {r}"));
            }
            match base {
                None => base = Some(r),
                Some(b) => {
                    let q = r / b;
                    if !(1.0 / WEIGHT_INDEPENDENCE..=WEIGHT_INDEPENDENCE).contains(&q) {
                        failures.push(format!("{name} a={a}: {q:.3}x the unweighted ratio"));
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let lg = Grid::new(1, 8.0, 1024).unwrap();
    let mut inputs = vec![
        GridFunction::indicator(lg, &[0.0], &[1.0]),
        GridFunction::from_fn(lg, |x| (1.0 - x[0].abs()).max(0.0)).unwrap(),
    ];
    inputs.extend((0..10).map(|_| random_bumps(&mut rng, lg, true)));
    let profiles = [
        RadialProfile::Indicator { radius: 0.25 },
        RadialProfile::Indicator { radius: 1.0 },
        RadialProfile::TruncatedPower { scale: 0.5, delta: 1.0 },
        RadialProfile::TruncatedPower { scale: 1.0, delta: 0.5 },
    ];
    let mut worst_indicator = f64::NEG_INFINITY;
    let mut worst_power = f64::NEG_INFINITY;
    for f in &inputs {
        for p in &profiles {
            let r = radial_majorant_check(f, p).unwrap();
            match p {
                RadialProfile::Indicator { .. } => {
                    worst_indicator = worst_indicator.max(r.max_violation);
                    if r.max_violation > 0.0 {
                        failures.push(format!("indicator profile violation {:e}", r.max_violation));
                    }
                }
                _ => {
                    worst_power = worst_power.max(r.max_violation - r.epsilon_h);
                    if r.max_violation > r.epsilon_h {
                        failures.push(format!("{p:?}: {} > eps_h {}", r.max_violation, r.epsilon_h));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "weak (1,1): {}; radial worst violation {worst_indicator:.2e} (indicator), {worst_power:.2e} over eps_h (power); failures {failures:?}",
            lines.join(", ")
        ),
    )
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "decomposition property suite", 120, decomposition_suite),
        (2, "whitney certification", 60, whitney_suite),
        (3, "weight-theory inequalities", 180, weight_suite),
        (4, "operator oracle equivalence", 120, operator_suite),
        (5, "kernel conditions", 60, kernel_suite),
        (6, "weighted hormander two-sided estimate", 180, hormander_suite),
        (7, "weak-type endpoint end-to-end", 600, endpoint_suite),
        (8, "maximal-function checks", 120, maximal_suite),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(budget);
        let ok = out.passed && in_budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id} {name}: {} [{:.1} s of {budget} s] {}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
