//! Browser front end: each export takes plain numbers and returns a JSON
//! string for the page to plot.

use czlab::cubes::{certify_whitney, whitney_decompose, CellSet, Cube, WhitneyOptions};
use czlab::harness::{default_battery, endpoint_experiment};
use czlab::maximal::hl_maximal;
use czlab::weights::{ap_characteristic, power_of_weight_check};
use czlab::{CubeFamily, Grid, GridFunction, Weight};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const HALF_WIDTH: f64 = 4.0;

fn js_err(e: czlab::Error) -> JsValue {
    JsValue::from(e.to_string())
}

fn cells(n: u32) -> Result<usize, JsValue> {
    match n {
        16..=2048 if n.is_power_of_two() => Ok(n as usize),
        _ => Err(JsValue::from(format!("cells must be a power of two in [16, 2048], got {n}"))),
    }
}

fn intervals(cubes: &[Cube]) -> Vec<[f64; 2]> {
    cubes.iter().map(|q| [q.lower(0), q.upper(0)]).collect()
}

/// Indicator of `[lo, hi)`, its maximal function, the set `{Mf > level}` and
/// the Whitney cubes of that set.
#[wasm_bindgen]
pub fn level_set(lo: f64, hi: f64, level: f64, n: u32) -> Result<String, JsValue> {
    let grid = Grid::new(1, HALF_WIDTH, cells(n)?).map_err(js_err)?;
    let f = GridFunction::indicator(grid, &[lo], &[hi]);
    let mf = hl_maximal(&f, CubeFamily::Exhaustive).values;
    let omega = CellSet::from_predicate(grid, |i| mf.values()[i] > level);
    let opts = WhitneyOptions {
        exterior_is_complement: true,
        ..WhitneyOptions::default()
    };
    let w = whitney_decompose(&omega, &opts).map_err(js_err)?;
    let cert = certify_whitney(&omega, &w, &opts);
    let x: Vec<f64> = (0..grid.len()).map(|i| grid.center(i)[0]).collect();
    Ok(json!({
        "x": x,
        "f": f.values(),
        "mf": mf.values(),
        "omega": omega.members(),
        "cubes": intervals(&w.cubes),
        "layer": intervals(&w.boundary_layer),
        "certified": cert.passed(),
        "covered_fraction": cert.covered_fraction,
    })
    .to_string())
}

/// `[|x|^{-a}]_{A_1}` on a sweep of exponents, plus `[w^γ]_{A_1}` against
/// `[w]_{A_1}^γ` at the chosen `a`.
#[wasm_bindgen]
pub fn power_weight(a: f64, gamma: f64, n: u32) -> Result<String, JsValue> {
    let grid = Grid::new(1, HALF_WIDTH, cells(n)?).map_err(js_err)?;
    let sweep: Vec<Value> = (0..20)
        .map(|k| {
            let e = 0.05 * k as f64;
            let w = Weight::power(grid, e, &[0.0])?;
            let r = ap_characteristic(&w, 1.0, CubeFamily::Exhaustive)?;
            Ok(json!({ "a": e, "value": r.value }))
        })
        .collect::<czlab::Result<_>>()
        .map_err(js_err)?;
    let w = Weight::power(grid, a, &[0.0]).map_err(js_err)?;
    let check = power_of_weight_check(&w, gamma, CubeFamily::Exhaustive).map_err(js_err)?;
    Ok(json!({ "sweep": sweep, "check": check }).to_string())
}

/// Bilinear Riesz experiment with weights `|x|^{-a}`, `|x - 1/2|^{-a}`:
/// summary numbers and the distribution trace.
#[wasm_bindgen]
pub fn bilinear(a: f64, n: u32) -> Result<String, JsValue> {
    let n = cells(n)?.min(512);
    let r = endpoint_experiment(&default_battery(a, n)).map_err(js_err)?;
    let trace: Vec<[f64; 2]> = r.trace.iter().map(|p| [p.t, p.weighted]).collect();
    Ok(json!({
        "lhs": r.lhs,
        "rhs": r.rhs,
        "ratio": r.ratio,
        "nu_characteristic": r.nu_characteristic,
        "weights": r.weight_characteristics,
        "argmax_t": r.argmax_t,
        "trace": trace,
    })
    .to_string())
}
