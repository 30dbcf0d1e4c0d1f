//! Good/bad splittings of a function with respect to a weighted measure.
//!
//! [`cz_decompose`] is the dyadic stopping-time construction with mean-zero
//! bad parts. [`ntv_decompose`] cuts along the Whitney cubes of a level set
//! of the weighted maximal function and keeps `φ` itself on each cube;
//! [`construct_e_cubes`] then shrinks each cube to a concentric one of
//! prescribed measure.
//!
//! Every property is checked against a computable bound and reported with its
//! slack. Bounds hold exactly in the discrete model; the tolerances only absorb
//! floating-point rounding.

use serde::{Deserialize, Serialize};

use crate::cubes::{certify_whitney, cube_measure, whitney_decompose, CellSet, Cube, WhitneyCertificate, WhitneyOptions};
use crate::family::{CellCube, CubeFamily};
use crate::grid::{lp_norm, same_grid, Grid, GridFunction, WeightedMeasure};
use crate::maximal::{weak11_ratio, weighted_maximal};
use crate::weights::{ap_characteristic, Weight};
use crate::{Error, Result};

const REL_TOL: f64 = 1e-12;

/// One certified inequality `achieved ≤ bound`, at its tightest instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub bound: f64,
    pub achieved: f64,
    pub slack: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: &str, bound: f64, achieved: f64, tol: f64) -> Self {
        PropertyCheck {
            name: name.into(),
            bound,
            achieved,
            slack: bound - achieved,
            passed: achieved <= bound + tol,
        }
    }

    /// Worst instance of a per-cube inequality; vacuous when there are none.
    fn worst(name: &str, instances: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        let mut out = PropertyCheck {
            name: name.into(),
            bound: 0.0,
            achieved: 0.0,
            slack: 0.0,
            passed: true,
        };
        let mut worst = f64::INFINITY;
        for (bound, achieved, tol) in instances {
            let rel = (bound + tol - achieved) / (bound.abs() + tol).max(f64::MIN_POSITIVE);
            if rel < worst {
                worst = rel;
                out.bound = bound;
                out.achieved = achieved;
                out.slack = bound - achieved;
            }
            out.passed &= achieved <= bound + tol;
        }
        out
    }
}

fn all_passed(props: &[PropertyCheck]) -> bool {
    props.iter().all(|p| p.passed)
}

/// Bad part supported on one cube. Cells are listed with the value of the
/// bad function there (cell average).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub cube: Cube,
    pub cells: Vec<(usize, f64)>,
}

impl BadPart {
    pub fn to_grid_function(&self, grid: Grid) -> GridFunction {
        let mut v = vec![0.0; grid.len()];
        for &(i, x) in &self.cells {
            v[i] += x;
        }
        GridFunction::new(grid, v).expect("finite bad part")
    }

    pub fn l1_norm(&self, mu: &WeightedMeasure) -> f64 {
        self.cells.iter().map(|&(i, x)| x.abs() * mu.cell_measure(i)).sum()
    }

    pub fn integral(&self, mu: &WeightedMeasure) -> f64 {
        self.cells.iter().map(|&(i, x)| x * mu.cell_measure(i)).sum()
    }
}

/// `good + Σ bad` cell by cell.
pub fn reconstruct(good: &GridFunction, bad: &[BadPart]) -> GridFunction {
    let mut v = good.values().to_vec();
    for b in bad {
        for &(i, x) in &b.cells {
            v[i] += x;
        }
    }
    GridFunction::new(*good.grid(), v).expect("finite reconstruction")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub good: GridFunction,
    pub bad_parts: Vec<BadPart>,
    pub height: f64,
    pub root: Option<Cube>,
    /// `[ν]_{A_1}` over the shifted dyadic family.
    pub nu_characteristic: f64,
    pub properties: Vec<PropertyCheck>,
}

impl CzDecomposition {
    pub fn passed(&self) -> bool {
        all_passed(&self.properties)
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Cube> {
        self.bad_parts.iter().map(|b| &b.cube)
    }
}

struct CellSums<'a> {
    grid: &'a Grid,
    abs_mass: Vec<f64>,
    mass: Vec<f64>,
    nu: Vec<f64>,
}

impl CellSums<'_> {
    /// `(∫_Q |φ| dν, ∫_Q φ dν, ν(Q))`.
    fn over(&self, q: &CellCube) -> (f64, f64, f64) {
        let mut s = (0.0, 0.0, 0.0);
        for i in q.cells(self.grid) {
            s.0 += self.abs_mass[i];
            s.1 += self.mass[i];
            s.2 += self.nu[i];
        }
        s
    }
}

fn children(q: &CellCube, dim: usize) -> Vec<CellCube> {
    let h = q.side / 2;
    let mut out = Vec::with_capacity(1 << dim);
    for b in 0..(if dim == 2 { 2 } else { 1 }) {
        for a in 0..2 {
            out.push(CellCube {
                origin: [q.origin[0] + a * h, q.origin[1] + b * h],
                side: h,
            });
        }
    }
    out
}

/// Dyadic stopping time at `height`, started from the smallest dyadic cube
/// that contains the support of `φ` and has `ν`-average of `|φ|` at most
/// `height`. Selection is strict: cubes with average exactly `height` stay.
pub fn cz_decompose(phi: &GridFunction, nu: &WeightedMeasure, height: f64) -> Result<CzDecomposition> {
    same_grid(phi.grid(), nu.grid())?;
    if !(height.is_finite() && height > 0.0) {
        return Err(Error::InvalidArgument(format!("height {height} must be positive")));
    }
    let grid = *phi.grid();
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let nu_char = ap_characteristic(&Weight::new(nu.density().clone())?, 1.0, CubeFamily::ShiftedDyadic)?.value;
    let cell_nu: Vec<f64> = (0..grid.len()).map(|i| nu.cell_measure(i)).collect();
    let sums = CellSums {
        grid: &grid,
        abs_mass: phi.values().iter().zip(&cell_nu).map(|(f, m)| f.abs() * m).collect(),
        mass: phi.values().iter().zip(&cell_nu).map(|(f, m)| f * m).collect(),
        nu: cell_nu,
    };

    let mut good = phi.values().to_vec();
    let mut bad_parts = Vec::new();
    let mut sandwich = Vec::new();
    let root = match support_range(phi) {
        None => None,
        Some((lo, hi)) => {
            let mut found = None;
            let mut last_avg = f64::NAN;
            let mut side = 1;
            while side <= n {
                let origin = [lo[0] / side * side, lo[1] / side * side];
                let fits = (0..dim).all(|d| hi[d] / side * side == origin[d]);
                if fits {
                    let q = CellCube { origin, side };
                    let (a, _, v) = sums.over(&q);
                    last_avg = a / v;
                    if last_avg <= height {
                        found = Some(q);
                        break;
                    }
                }
                side *= 2;
            }
            match found {
                Some(q) => Some(q),
                None => {
                    return Err(Error::RootTooSmall {
                        average: last_avg,
                        height,
                        side: grid.bounding_cube().side(),
                    })
                }
            }
        }
    };

    if let Some(root) = root {
        let mut stack: Vec<(CellCube, f64)> = children(&root, dim)
            .into_iter()
            .map(|c| (c, sums.over(&root).0 / sums.over(&root).2))
            .collect();
        if root.side == 1 {
            stack.clear();
        }
        while let Some((q, parent_avg)) = stack.pop() {
            let (abs, signed, vol) = sums.over(&q);
            let avg = abs / vol;
            if avg > height {
                let mean = signed / vol;
                let cells: Vec<(usize, f64)> = q
                    .cells(&grid)
                    .into_iter()
                    .map(|i| {
                        good[i] = mean;
                        (i, phi.values()[i] - mean)
                    })
                    .collect();
                sandwich.push((avg, parent_avg));
                bad_parts.push(BadPart {
                    cube: q.to_cube(&grid),
                    cells,
                });
            } else if q.side > 1 && abs > 0.0 {
                stack.extend(children(&q, dim).into_iter().map(|c| (c, avg)));
            }
        }
    }

    let good = GridFunction::new(grid, good)?;
    let norm = lp_norm(phi, nu, 1.0)?;
    let nf = (1u32 << dim) as f64;
    let gbound = nf * nu_char * height;
    let mut properties = vec![
        PropertyCheck::new("good bounded", gbound, good.abs_max(), REL_TOL * gbound),
        PropertyCheck::new("good integrable", norm, lp_norm(&good, nu, 1.0)?, REL_TOL * norm.max(1e-300)),
    ];
    let total: f64 = bad_parts.iter().map(|b| cube_measure(&b.cube, nu)).sum();
    properties.push(PropertyCheck::new(
        "total cube measure",
        norm / height,
        total,
        REL_TOL * norm / height,
    ));
    properties.push(PropertyCheck::worst(
        "mean zero",
        bad_parts.iter().map(|b| {
            let v = cube_measure(&b.cube, nu);
            (0.0, b.integral(nu).abs(), 1e-10 * height * v)
        }),
    ));
    properties.push(PropertyCheck::worst(
        "bad part size",
        bad_parts.iter().map(|b| {
            let bound = 2.0 * nf * nu_char * height * cube_measure(&b.cube, nu);
            (bound, b.l1_norm(nu), REL_TOL * bound)
        }),
    ));
    let bad_total: f64 = bad_parts.iter().map(|b| b.l1_norm(nu)).sum();
    properties.push(PropertyCheck::new(
        "bad total",
        2.0 * norm,
        bad_total,
        REL_TOL * norm,
    ));
    properties.push(PropertyCheck::worst(
        "stopping sandwich",
        sandwich.iter().flat_map(|&(avg, parent)| {
            // avg > height (recorded as -avg ≤ -height) and parent ≤ height
            [(-height, -avg, 0.0), (height, parent, REL_TOL * height)]
        }),
    ));
    if sandwich.iter().any(|&(avg, _)| avg <= height) {
        properties.last_mut().expect("just pushed").passed = false;
    }

    Ok(CzDecomposition {
        good,
        bad_parts,
        height,
        root: root.map(|q| q.to_cube(&grid)),
        nu_characteristic: nu_char,
        properties,
    })
}

/// Per-axis index range of the nonzero cells.
fn support_range(f: &GridFunction) -> Option<([usize; 2], [usize; 2])> {
    let g = f.grid();
    let mut lo = [usize::MAX; 2];
    let mut hi = [0usize; 2];
    let mut any = false;
    for (i, &v) in f.values().iter().enumerate() {
        if v != 0.0 {
            any = true;
            let idx = g.multi_index(i);
            for d in 0..2 {
                lo[d] = lo[d].min(idx[d]);
                hi[d] = hi[d].max(idx[d]);
            }
        }
    }
    any.then_some((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtvDecomposition {
    pub omega: Vec<bool>,
    pub whitney_cubes: Vec<Cube>,
    pub boundary_layer: Vec<Cube>,
    pub whitney_certificate: WhitneyCertificate,
    pub good: GridFunction,
    /// One per Whitney cube, certified cubes first.
    pub bad_parts: Vec<BadPart>,
    pub t: f64,
    pub m: usize,
    /// `λ = t^{1/m}`.
    pub level: f64,
    /// `[ν]_{A_1}` over all grid-aligned cubes.
    pub nu_characteristic: f64,
    /// Empirical weak (1,1) ratio of `M_ν` on `φ`.
    pub weak_constant: f64,
    pub properties: Vec<PropertyCheck>,
}

impl NtvDecomposition {
    pub fn passed(&self) -> bool {
        all_passed(&self.properties)
    }

    /// `(17 √n)^n`.
    pub fn dilation_constant(dim: usize) -> f64 {
        (17.0 * (dim as f64).sqrt()).powi(dim as i32)
    }
}

/// Splits `φ ≥ 0` along the Whitney cubes of `Ω = {M_ν φ > t^{1/m}}`.
///
/// `Ω` must stay off the outermost layer of cells, so that the box exterior
/// can be counted as part of `Ωᶜ`.
pub fn ntv_decompose(phi: &GridFunction, nu: &WeightedMeasure, t: f64, m: usize) -> Result<NtvDecomposition> {
    same_grid(phi.grid(), nu.grid())?;
    if !(t.is_finite() && t > 0.0) || m == 0 {
        return Err(Error::InvalidArgument(format!("need t > 0 and m >= 1, got t = {t}, m = {m}")));
    }
    if let Some(i) = phi.values().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidArgument(format!("φ must be nonnegative (cell {i})")));
    }
    let level = t.powf(1.0 / m as f64);
    if nu.total() <= 1.0 / level {
        return Err(Error::Precondition(format!(
            "ν(box) = {} does not exceed t^(-1/m) = {}",
            nu.total(),
            1.0 / level
        )));
    }
    let grid = *phi.grid();
    let dim = grid.dim();
    let family = CubeFamily::Exhaustive;
    let maximal = weighted_maximal(phi, nu, family)?;
    let omega = CellSet::from_predicate(grid, |i| maximal.values.values()[i] > level);
    if omega.touches_box_boundary() {
        return Err(Error::Precondition(
            "the level set reaches the edge of the box; enlarge the box".into(),
        ));
    }
    let opts = WhitneyOptions {
        exterior_is_complement: true,
        ..WhitneyOptions::default()
    };
    let whitney = whitney_decompose(&omega, &opts)?;
    let certificate = certify_whitney(&omega, &whitney, &opts);

    let good_vals: Vec<f64> = (0..grid.len())
        .map(|i| if omega.contains(i) { 0.0 } else { phi.values()[i] })
        .collect();
    let good = GridFunction::new(grid, good_vals)?;
    let bad_parts: Vec<BadPart> = whitney
        .all_cubes()
        .map(|q| BadPart {
            cube: *q,
            cells: q
                .cell_overlaps(&grid)
                .into_iter()
                .map(|(i, frac)| (i, phi.values()[i] * frac))
                .collect(),
        })
        .collect();

    let nu_char = ap_characteristic(&Weight::new(nu.density().clone())?, 1.0, family)?.value;
    let norm = lp_norm(phi, nu, 1.0)?;
    let weak_constant = if phi.is_zero() {
        0.0
    } else {
        weak11_ratio(phi, nu, family)?.ratio
    };

    let mut properties = vec![PropertyCheck::new("good bounded", level, good.abs_max(), 0.0)];
    let omega_measure: f64 = whitney.all_cubes().map(|q| cube_measure(q, nu)).sum();
    let bound2 = weak_constant * norm / level;
    properties.push(PropertyCheck::new(
        "level set measure",
        bound2,
        omega_measure,
        REL_TOL * bound2.max(omega_measure),
    ));
    let c3 = NtvDecomposition::dilation_constant(dim) * nu_char * level;
    properties.push(PropertyCheck::worst(
        "bad part size",
        bad_parts.iter().map(|b| {
            let bound = c3 * cube_measure(&b.cube, nu);
            (bound, b.l1_norm(nu), REL_TOL * bound)
        }),
    ));
    let bad_total: f64 = bad_parts.iter().map(|b| b.l1_norm(nu)).sum();
    properties.push(PropertyCheck::new("bad total", norm, bad_total, REL_TOL * norm));
    // every dilated cube reaches the complement
    let dil = 17.0 * (dim as f64).sqrt();
    let tol = 1e-9 * grid.cell_width();
    let complement: Vec<Cube> = (0..grid.len())
        .filter(|&i| !omega.contains(i))
        .map(|i| Cube::new(&grid.center(i)[..dim], grid.cell_width()).expect("cell cube"))
        .collect();
    let misses = bad_parts
        .iter()
        .filter(|b| {
            let d = b.cube.dilate(dil).expect("positive dilation");
            !complement.iter().any(|c| d.distance(c) <= tol)
        })
        .count();
    properties.push(PropertyCheck::new("dilated cubes meet the complement", 0.0, misses as f64, 0.0));

    Ok(NtvDecomposition {
        omega: omega.members().to_vec(),
        whitney_cubes: whitney.cubes,
        boundary_layer: whitney.boundary_layer,
        whitney_certificate: certificate,
        good,
        bad_parts,
        t,
        m,
        level,
        nu_characteristic: nu_char,
        weak_constant,
        properties,
    })
}

/// Concentric subcube of prescribed measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ECube {
    pub cube: Cube,
    pub target: f64,
    pub achieved: f64,
}

/// Cube `Q(center of q, r)`, `0 ≤ r ≤ side(q)`, with `μ(Q) = target` to
/// relative `1e-9`, by bisection on `r`.
pub fn fit_cube(q: &Cube, target: f64, mu: &WeightedMeasure) -> Result<ECube> {
    let available = cube_measure(q, mu);
    if target > available * (1.0 + 1e-12) {
        return Err(Error::TargetExceedsCube { target, available });
    }
    if target <= 0.0 {
        return Ok(ECube {
            cube: Cube::degenerate(q.dim(), q.center()),
            target: 0.0,
            achieved: 0.0,
        });
    }
    let measure = |r: f64| cube_measure(&Cube::new_unchecked(q.dim(), q.center(), r), mu);
    let (mut lo, mut hi) = (0.0, q.side());
    let mut r = hi;
    let mut got = available;
    for _ in 0..200 {
        if (got - target).abs() <= 1e-9 * target {
            break;
        }
        r = 0.5 * (lo + hi);
        got = measure(r);
        if got < target {
            lo = r;
        } else {
            hi = r;
        }
    }
    if (got - target).abs() > 1e-9 * target {
        return Err(Error::Precondition(format!(
            "bisection stalled at measure {got} for target {target}"
        )));
    }
    Ok(ECube {
        cube: Cube::new_unchecked(q.dim(), q.center(), r),
        target,
        achieved: got,
    })
}

/// One `E` cube per bad part, with `ν(E) = a t^{-1/m}` where
/// `a = ‖b‖_{L^1(ν)} / ((17 √n)^n [ν]_{A_1})`.
pub fn construct_e_cubes(d: &NtvDecomposition, nu: &WeightedMeasure) -> Result<Vec<ECube>> {
    let dim = nu.grid().dim();
    let scale = NtvDecomposition::dilation_constant(dim) * d.nu_characteristic;
    d.bad_parts
        .iter()
        .map(|b| {
            let a = b.l1_norm(nu) / scale;
            let e = fit_cube(&b.cube, a / d.level, nu)?;
            if !b.cube.contains_cube(&e.cube) {
                return Err(Error::Precondition("E cube leaves its Whitney cube".into()));
            }
            Ok(e)
        })
        .collect()
}
