//! Muckenhoupt characteristics, the product weight `ν` of a weight vector,
//! and the inequalities relating them.
//!
//! Every characteristic is a supremum over a [`CubeFamily`] of per-cube
//! quantities built from Lebesgue averages and cell minima. Grid-aligned cubes
//! contain whole cells only, so minima are exact cell minima.

use serde::{Deserialize, Serialize};

use crate::cubes::Cube;
use crate::family::{sup_scan, CubeFamily};
use crate::grid::{same_grid, Grid, GridFunction, WeightedMeasure};
use crate::{Error, Point, Result, MAX_DIM};

/// `|x - center|^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerForm {
    pub exponent: f64,
    pub center: Point,
}

impl PowerForm {
    pub fn eval(&self, x: Point, dim: usize) -> f64 {
        let r2: f64 = (0..dim).map(|d| (x[d] - self.center[d]).powi(2)).sum();
        r2.powf(-self.exponent / 2.0)
    }
}

/// Strictly positive grid function, optionally tagged with the power form it
/// was sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    density: GridFunction,
    form: Option<PowerForm>,
}

impl Weight {
    pub fn new(density: GridFunction) -> Result<Self> {
        check_positive(&density)?;
        Ok(Weight {
            density,
            form: None,
        })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Weight::new(GridFunction::constant(grid, c))
    }

    /// Power weight sampled at cell centers. With an even cell count the
    /// origin sits on a cell boundary, so a center at the origin is never hit.
    pub fn power(grid: Grid, exponent: f64, center: &[f64]) -> Result<Self> {
        if center.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "power weight center has {} coordinates on a {}-d grid",
                center.len(),
                grid.dim()
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..center.len()].copy_from_slice(center);
        let form = PowerForm {
            exponent,
            center: c,
        };
        let density = GridFunction::from_fn(grid, |x| form.eval(x, grid.dim()))?;
        check_positive(&density)?;
        Ok(Weight {
            density,
            form: Some(form),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.density.grid()
    }

    pub fn density(&self) -> &GridFunction {
        &self.density
    }

    pub fn form(&self) -> Option<&PowerForm> {
        self.form.as_ref()
    }

    pub fn measure(&self) -> WeightedMeasure {
        WeightedMeasure::new(self.density.clone()).expect("weights are positive")
    }

    /// `w^γ`.
    pub fn powf(&self, gamma: f64) -> Result<Weight> {
        let density = self.density.map(|v| v.powf(gamma))?;
        check_positive(&density)?;
        Ok(Weight {
            density,
            form: self.form.map(|f| PowerForm {
                exponent: f.exponent * gamma,
                ..f
            }),
        })
    }
}

fn check_positive(f: &GridFunction) -> Result<()> {
    match f.values().iter().position(|&v| !(v > 0.0)) {
        Some(cell) => Err(Error::NonPositiveWeight {
            cell,
            value: f.values()[cell],
        }),
        None => Ok(()),
    }
}

/// `m` weights with exponents `P = (p_1, ..., p_m)`, `p_i ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<Weight>,
    exponents: Vec<f64>,
    p: f64,
}

impl WeightVector {
    pub fn new(weights: Vec<Weight>, exponents: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != exponents.len() {
            return Err(Error::InvalidArgument(format!(
                "need m >= 1 weights with one exponent each, got {} and {}",
                weights.len(),
                exponents.len()
            )));
        }
        if let Some(p) = exponents.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
            return Err(Error::InvalidArgument(format!("exponent {p} not in [1, inf)")));
        }
        for w in &weights[1..] {
            same_grid(weights[0].grid(), w.grid())?;
        }
        let p = 1.0 / exponents.iter().map(|q| 1.0 / q).sum::<f64>();
        Ok(WeightVector {
            weights,
            exponents,
            p,
        })
    }

    /// All exponents equal to 1.
    pub fn endpoint(weights: Vec<Weight>) -> Result<Self> {
        let m = weights.len();
        WeightVector::new(weights, vec![1.0; m])
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        self.weights[0].grid()
    }
}

/// `ν = ∏ w_i^{p/p_i}`.
pub fn nu_w(v: &WeightVector) -> Weight {
    let grid = *v.grid();
    let mut vals = vec![1.0; grid.len()];
    for (w, &pi) in v.weights.iter().zip(&v.exponents) {
        let e = v.p / pi;
        for (a, &b) in vals.iter_mut().zip(w.density.values()) {
            *a *= b.powf(e);
        }
    }
    let forms: Vec<&PowerForm> = v.weights.iter().filter_map(|w| w.form.as_ref()).collect();
    let form = (forms.len() == v.m() && forms.iter().all(|f| f.center == forms[0].center)).then(|| {
        PowerForm {
            exponent: forms
                .iter()
                .zip(&v.exponents)
                .map(|(f, pi)| f.exponent * v.p / pi)
                .sum(),
            center: forms[0].center,
        }
    });
    Weight {
        density: GridFunction::new(grid, vals).expect("product of finite weights"),
        form,
    }
}

/// Supremum of a characteristic, with the cube that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicReport {
    pub value: f64,
    pub witness_center: Vec<f64>,
    pub witness_side: f64,
    pub family: CubeFamily,
    pub family_size: usize,
}

impl CharacteristicReport {
    fn from_scan(grid: &Grid, family: CubeFamily, scan: crate::family::SupScan) -> Self {
        let q = scan.witness.to_cube(grid);
        CharacteristicReport {
            value: scan.value,
            witness_center: q.center()[..grid.dim()].to_vec(),
            witness_side: q.side(),
            family,
            family_size: scan.family_size,
        }
    }

    pub fn witness(&self) -> Cube {
        Cube::new(&self.witness_center, self.witness_side).expect("witness is a grid cube")
    }
}

fn dual(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `[w]_{A_p}` over `family`; `p = 1` uses `avg_Q w / min_Q w`.
pub fn ap_characteristic(w: &Weight, p: f64, family: CubeFamily) -> Result<CharacteristicReport> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("A_p needs p >= 1, got {p}")));
    }
    check_positive(&w.density)?;
    let grid = w.grid();
    let vals = w.density.values();
    let scan = if p == 1.0 {
        sup_scan(grid, family, &[vals], &[vals], |c, s, m| s[0] / c / m[0])
    } else {
        let e = 1.0 - dual(p);
        let u: Vec<f64> = vals.iter().map(|v| v.powf(e)).collect();
        sup_scan(grid, family, &[vals, &u], &[], |c, s, _| {
            s[0] / c * (s[1] / c).powf(p - 1.0)
        })
    };
    Ok(CharacteristicReport::from_scan(grid, family, scan))
}

/// Both sides of `[w^γ]_{A_1} ≤ [w]_{A_1}^γ` over one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCheck {
    pub gamma: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl PowerCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn power_of_weight_check(w: &Weight, gamma: f64, family: CubeFamily) -> Result<PowerCheck> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} not in [0, 1]")));
    }
    let lhs = ap_characteristic(&w.powf(gamma)?, 1.0, family)?.value;
    let rhs = ap_characteristic(w, 1.0, family)?.value.powf(gamma);
    Ok(PowerCheck { gamma, lhs, rhs })
}

/// `[w]_{A_P}`: sup of `(avg ν)^{1/p} ∏ (avg w_i^{1-p_i'})^{1/p_i'}`, with
/// `(min w_i)^{-1}` for `p_i = 1`.
pub fn multilinear_characteristic(v: &WeightVector, family: CubeFamily) -> Result<CharacteristicReport> {
    let grid = *v.grid();
    let nu = nu_w(v);
    let mut sums: Vec<Vec<f64>> = vec![nu.density.values().to_vec()];
    let mut mins: Vec<&[f64]> = Vec::new();
    // slot per weight: (is_endpoint, index into sums or mins)
    let mut slots = Vec::with_capacity(v.m());
    for (w, &pi) in v.weights.iter().zip(&v.exponents) {
        if pi == 1.0 {
            slots.push((true, mins.len(), 0.0));
            mins.push(w.density.values());
        } else {
            let q = dual(pi);
            slots.push((false, sums.len(), q));
            sums.push(w.density.values().iter().map(|x| x.powf(1.0 - q)).collect());
        }
    }
    let sum_refs: Vec<&[f64]> = sums.iter().map(|s| s.as_slice()).collect();
    let p = v.p;
    let scan = sup_scan(&grid, family, &sum_refs, &mins, |c, s, m| {
        let mut val = (s[0] / c).powf(1.0 / p);
        for &(endpoint, k, q) in &slots {
            val *= if endpoint {
                1.0 / m[k]
            } else {
                (s[k] / c).powf(1.0 / q)
            };
        }
        val
    });
    Ok(CharacteristicReport::from_scan(&grid, family, scan))
}

/// One inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl Inequality {
    /// `(rhs - lhs) / rhs`; nonnegative when the inequality holds.
    pub fn residual(&self) -> f64 {
        (self.rhs - self.lhs) / self.rhs
    }
}

/// Characteristics of `ν`, of the dual weights and of the vector, with the
/// inequalities between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorInequalities {
    pub vector_characteristic: f64,
    pub nu_characteristic: f64,
    pub component_characteristics: Vec<f64>,
    pub inequalities: Vec<Inequality>,
}

impl VectorInequalities {
    pub fn min_residual(&self) -> f64 {
        self.inequalities
            .iter()
            .map(Inequality::residual)
            .fold(f64::INFINITY, f64::min)
    }
}

/// With `W = [w]_{A_P}` and `m = |P|`:
///
/// * `[ν]_{A_{mp}} ≤ W^p`;
/// * `[w_i^{1-p_i'}]_{A_{m p_i'}} ≤ W^{p_i'}` for `p_i > 1`, and
///   `[w_i^{1/m}]_{A_1} ≤ W^{1/m}` for `p_i = 1`;
/// * `W ≤ [ν]_{A_{mp}}^{1/p} ∏ B_i`, `B_i` the component characteristic to the
///   power `1/p_i'` (or `m` when `p_i = 1`).
pub fn vector_inequalities(v: &WeightVector, family: CubeFamily) -> Result<VectorInequalities> {
    let m = v.m() as f64;
    let p = v.p;
    let big_w = multilinear_characteristic(v, family)?.value;
    let nu_char = ap_characteristic(&nu_w(v), m * p, family)?.value;
    let mut inequalities = vec![Inequality {
        name: "nu in A_mp".into(),
        lhs: nu_char,
        rhs: big_w.powf(p),
    }];
    let mut components = Vec::with_capacity(v.m());
    let mut reverse = nu_char.powf(1.0 / p);
    for (i, (w, &pi)) in v.weights.iter().zip(&v.exponents).enumerate() {
        if pi == 1.0 {
            let b = ap_characteristic(&w.powf(1.0 / m)?, 1.0, family)?.value;
            inequalities.push(Inequality {
                name: format!("w_{}^(1/m) in A_1", i + 1),
                lhs: b,
                rhs: big_w.powf(1.0 / m),
            });
            reverse *= b.powf(m);
            components.push(b);
        } else {
            let q = dual(pi);
            let b = ap_characteristic(&w.powf(1.0 - q)?, m * q, family)?.value;
            inequalities.push(Inequality {
                name: format!("w_{}^(1-p') in A_mp'", i + 1),
                lhs: b,
                rhs: big_w.powf(q),
            });
            reverse *= b.powf(1.0 / q);
            components.push(b);
        }
    }
    inequalities.push(Inequality {
        name: "vector characteristic from components".into(),
        lhs: big_w,
        rhs: reverse,
    });
    Ok(VectorInequalities {
        vector_characteristic: big_w,
        nu_characteristic: nu_char,
        component_characteristics: components,
        inequalities,
    })
}
