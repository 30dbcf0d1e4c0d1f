//! Whitney decomposition of a cell set into dyadic cubes.
//!
//! Geometry is done in cell units (the box is `[0, N)^n`), where every dyadic
//! coordinate is exact in binary floating point and the Whitney inequalities
//! `2 diam ≤ dist ≤ 8 diam` are compared in squared form without rounding.
//!
//! Cubes adjacent to `∂Ω` must shrink to zero, so a finite family cannot
//! cover `Ω` exactly. Refinement continues below the cell size down to
//! `2^-subcell_depth` cells; pieces at that floor which still violate the
//! lower bound are returned separately as the boundary layer. The certified
//! cubes touch every cell of `Ω`, and certified cubes plus boundary layer
//! partition `Ω` exactly.

use serde::{Deserialize, Serialize};

use super::{CellSet, Cube};
use crate::grid::Grid;
use crate::{Error, Result, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitneyOptions {
    /// Treat `R^n \ box` as part of the complement.
    pub exterior_is_complement: bool,
    /// Levels of dyadic refinement allowed below the cell size.
    pub subcell_depth: u32,
}

impl Default for WhitneyOptions {
    fn default() -> Self {
        WhitneyOptions {
            exterior_is_complement: false,
            subcell_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whitney {
    /// Cubes satisfying `2 diam ≤ dist(Q, Ωᶜ) ≤ 8 diam`.
    pub cubes: Vec<Cube>,
    /// Floor-size pieces next to `∂Ω` that satisfy only the upper bound.
    pub boundary_layer: Vec<Cube>,
}

impl Whitney {
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty() && self.boundary_layer.is_empty()
    }

    /// Certified cubes followed by the boundary layer.
    pub fn all_cubes(&self) -> impl Iterator<Item = &Cube> {
        self.cubes.iter().chain(&self.boundary_layer)
    }
}

#[derive(Debug, Clone, Copy)]
struct UnitCube {
    origin: [f64; MAX_DIM],
    side: f64,
}

/// Distances to `Ωᶜ` measured against the complement cells that border `Ω`
/// (the nearest complement point always lies on one of them) and, optionally,
/// the exterior of the box.
struct Complement {
    dim: usize,
    cells: usize,
    border: Vec<[f64; MAX_DIM]>,
    exterior: bool,
}

impl Complement {
    fn new(omega: &CellSet, exterior: bool) -> Self {
        let grid = omega.grid();
        let n = grid.cells_per_axis() as isize;
        let dim = grid.dim();
        let mut border = Vec::new();
        for i in 0..grid.len() {
            if omega.contains(i) {
                continue;
            }
            let idx = grid.multi_index(i);
            let reach: isize = if dim == 2 { 1 } else { 0 };
            let mut touches = false;
            'scan: for dj in -reach..=reach {
                for di in -1isize..=1 {
                    let a = idx[0] as isize + di;
                    let b = idx[1] as isize + dj;
                    if a < 0 || b < 0 || a >= n || (dim == 2 && b >= n) {
                        continue;
                    }
                    if omega.contains(grid.flat_index([a as usize, b as usize])) {
                        touches = true;
                        break 'scan;
                    }
                }
            }
            if touches {
                border.push([idx[0] as f64, idx[1] as f64]);
            }
        }
        Complement {
            dim,
            cells: grid.cells_per_axis(),
            border,
            exterior,
        }
    }

    fn is_empty(&self) -> bool {
        self.border.is_empty() && !self.exterior
    }

    fn dist2(&self, q: &UnitCube) -> f64 {
        let mut best = f64::INFINITY;
        if self.exterior {
            for d in 0..self.dim {
                let e = q.origin[d].min(self.cells as f64 - (q.origin[d] + q.side));
                best = best.min(e * e);
            }
        }
        for c in &self.border {
            let mut s = 0.0;
            for d in 0..self.dim {
                let gap = (c[d] - (q.origin[d] + q.side))
                    .max(q.origin[d] - (c[d] + 1.0))
                    .max(0.0);
                s += gap * gap;
            }
            if s < best {
                best = s;
                if s == 0.0 {
                    break;
                }
            }
        }
        best
    }
}

/// Integer prefix counts of member cells.
struct MemberCount {
    dim: usize,
    n: usize,
    prefix: Vec<u32>,
}

impl MemberCount {
    fn new(omega: &CellSet) -> Self {
        let grid = omega.grid();
        let n = grid.cells_per_axis();
        let dim = grid.dim();
        let w = n + 1;
        let prefix = if dim == 1 {
            let mut p = vec![0u32; w];
            for i in 0..n {
                p[i + 1] = p[i] + omega.contains(i) as u32;
            }
            p
        } else {
            let mut p = vec![0u32; w * w];
            for j in 0..n {
                for i in 0..n {
                    let v = omega.contains(grid.flat_index([i, j])) as u32;
                    p[(i + 1) + w * (j + 1)] =
                        v + p[i + w * (j + 1)] + p[(i + 1) + w * j] - p[i + w * j];
                }
            }
            p
        };
        MemberCount { dim, n, prefix }
    }

    fn count(&self, origin: [usize; MAX_DIM], side: usize) -> u32 {
        if self.dim == 1 {
            self.prefix[origin[0] + side] - self.prefix[origin[0]]
        } else {
            let w = self.n + 1;
            let (a, b) = (origin[0], origin[1]);
            let (c, d) = (a + side, b + side);
            self.prefix[c + w * d] + self.prefix[a + w * b]
                - self.prefix[a + w * d]
                - self.prefix[c + w * b]
        }
    }
}

enum Coverage {
    Empty,
    Partial,
    Full,
}

fn to_world(grid: &Grid, q: &UnitCube) -> Cube {
    let h = grid.cell_width();
    let mut center = [0.0; MAX_DIM];
    for (d, c) in center.iter_mut().enumerate().take(grid.dim()) {
        *c = grid.from_cell_units(q.origin[d] + q.side / 2.0);
    }
    Cube::new_unchecked(grid.dim(), center, q.side * h)
}

/// Dyadic Whitney decomposition of `Ω`: maximal dyadic cubes inside `Ω` with
/// `2 diam ≤ dist(Q, Ωᶜ)`, each re-checked against `dist ≤ 8 diam`.
pub fn whitney_decompose(omega: &CellSet, opts: &WhitneyOptions) -> Result<Whitney> {
    let grid = omega.grid();
    if omega.is_empty() {
        return Ok(Whitney {
            cubes: Vec::new(),
            boundary_layer: Vec::new(),
        });
    }
    let complement = Complement::new(omega, opts.exterior_is_complement);
    if complement.is_empty() {
        return Err(Error::Whitney(
            "Ω fills the whole domain; distance to the complement is undefined".into(),
        ));
    }
    let counts = MemberCount::new(omega);
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let floor = 0.5f64.powi(opts.subcell_depth as i32);
    let nf = dim as f64;

    let mut out = Whitney {
        cubes: Vec::new(),
        boundary_layer: Vec::new(),
    };
    let mut stack = vec![UnitCube {
        origin: [0.0; MAX_DIM],
        side: n as f64,
    }];
    while let Some(q) = stack.pop() {
        let coverage = if q.side >= 1.0 {
            let origin = [q.origin[0] as usize, q.origin[1] as usize];
            let full = (q.side as usize).pow(dim as u32) as u32;
            match counts.count(origin, q.side as usize) {
                0 => Coverage::Empty,
                c if c == full => Coverage::Full,
                _ => Coverage::Partial,
            }
        } else {
            // sub-cell cubes only descend from cubes already inside Ω
            Coverage::Full
        };
        let split = match coverage {
            Coverage::Empty => false,
            Coverage::Partial => true,
            Coverage::Full => {
                let d2 = complement.dist2(&q);
                let s2 = q.side * q.side;
                let lower_ok = 4.0 * nf * s2 <= d2;
                let upper_ok = d2 <= 64.0 * nf * s2;
                match (lower_ok, upper_ok) {
                    (true, true) => {
                        out.cubes.push(to_world(grid, &q));
                        false
                    }
                    _ if q.side > floor => true,
                    (false, true) => {
                        out.boundary_layer.push(to_world(grid, &q));
                        false
                    }
                    (_, false) => {
                        return Err(Error::Whitney(format!(
                            "cube at {:?} (side {} cells) stays farther than 8 diam from Ωᶜ",
                            q.origin, q.side
                        )))
                    }
                }
            }
        };
        if split {
            let half = q.side / 2.0;
            let shifts: &[[f64; MAX_DIM]] = if dim == 1 {
                &[[0.0, 0.0], [1.0, 0.0]]
            } else {
                &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
            };
            for s in shifts {
                stack.push(UnitCube {
                    origin: [q.origin[0] + s[0] * half, q.origin[1] + s[1] * half],
                    side: half,
                });
            }
        }
    }
    Ok(out)
}

/// Post-hoc certificate of a Whitney family, computed by brute force against
/// every complement cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCertificate {
    pub cubes_checked: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Largest `dist / diam` over the certified cubes.
    pub max_ratio: f64,
    /// Smallest `dist / diam` over the certified cubes.
    pub min_ratio: f64,
    pub overlapping_pairs: usize,
    /// Cubes (either list) not contained in a member cell union.
    pub escaped: usize,
    /// The set of cells met by certified cubes equals `Ω`.
    pub cell_level_union: bool,
    /// Certified cubes plus boundary layer partition `Ω` up to volume.
    pub exact_partition: bool,
    /// Fraction of `|Ω|` covered by the certified cubes.
    pub covered_fraction: f64,
}

impl WhitneyCertificate {
    pub fn passed(&self) -> bool {
        self.lower_violations == 0
            && self.upper_violations == 0
            && self.overlapping_pairs == 0
            && self.escaped == 0
            && self.cell_level_union
            && self.exact_partition
    }
}

pub fn certify_whitney(
    omega: &CellSet,
    w: &Whitney,
    opts: &WhitneyOptions,
) -> WhitneyCertificate {
    const TOL: f64 = 1e-9;
    let grid = omega.grid();
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let nf = dim as f64;
    let complement: Vec<[f64; MAX_DIM]> = (0..grid.len())
        .filter(|&i| !omega.contains(i))
        .map(|i| {
            let idx = grid.multi_index(i);
            [idx[0] as f64, idx[1] as f64]
        })
        .collect();
    let unit = |q: &Cube| -> UnitCube {
        let s = q.side() / grid.cell_width();
        let mut origin = [0.0; MAX_DIM];
        for (d, o) in origin.iter_mut().enumerate().take(dim) {
            *o = grid.to_cell_units(q.lower(d));
        }
        UnitCube { origin, side: s }
    };
    let dist2 = |q: &UnitCube| -> f64 {
        let mut best = f64::INFINITY;
        if opts.exterior_is_complement {
            for d in 0..dim {
                let e = q.origin[d].min(n as f64 - (q.origin[d] + q.side));
                best = best.min(e * e);
            }
        }
        for c in &complement {
            let s: f64 = (0..dim)
                .map(|d| {
                    let gap = (c[d] - (q.origin[d] + q.side))
                        .max(q.origin[d] - (c[d] + 1.0))
                        .max(0.0);
                    gap * gap
                })
                .sum();
            best = best.min(s);
        }
        best
    };

    let mut cert = WhitneyCertificate {
        cubes_checked: w.cubes.len(),
        lower_violations: 0,
        upper_violations: 0,
        max_ratio: 0.0,
        min_ratio: f64::INFINITY,
        overlapping_pairs: 0,
        escaped: 0,
        cell_level_union: true,
        exact_partition: true,
        covered_fraction: 0.0,
    };
    for q in &w.cubes {
        let u = unit(q);
        let d2 = dist2(&u);
        let s2 = u.side * u.side;
        if 4.0 * nf * s2 > d2 * (1.0 + TOL) {
            cert.lower_violations += 1;
        }
        if d2 > 64.0 * nf * s2 * (1.0 + TOL) {
            cert.upper_violations += 1;
        }
        let ratio = (d2 / (nf * s2)).sqrt();
        cert.max_ratio = cert.max_ratio.max(ratio);
        cert.min_ratio = cert.min_ratio.min(ratio);
    }
    for q in &w.boundary_layer {
        let u = unit(q);
        if dist2(&u) > 64.0 * nf * u.side * u.side * (1.0 + TOL) {
            cert.upper_violations += 1;
        }
    }

    // pairwise disjointness, sweeping along axis 0
    let mut all: Vec<&Cube> = w.all_cubes().collect();
    all.sort_by(|a, b| a.lower(0).total_cmp(&b.lower(0)));
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            if all[j].lower(0) >= all[i].upper(0) {
                break;
            }
            if all[i].overlaps(all[j]) {
                cert.overlapping_pairs += 1;
            }
        }
    }

    let mut certified = vec![0.0f64; grid.len()];
    let mut total = vec![0.0f64; grid.len()];
    for (k, q) in w.all_cubes().enumerate() {
        let overlaps = q.cell_overlaps(grid);
        let inside: f64 = overlaps.iter().map(|(_, f)| f).sum();
        if (inside - (q.side() / grid.cell_width()).powi(dim as i32)).abs() > TOL * inside.max(1.0)
            || overlaps.iter().any(|(i, _)| !omega.contains(*i))
        {
            cert.escaped += 1;
        }
        for (i, f) in overlaps {
            total[i] += f;
            if k < w.cubes.len() {
                certified[i] += f;
            }
        }
    }
    let mut covered = 0.0;
    for i in 0..grid.len() {
        let member = omega.contains(i);
        if member != (certified[i] > 0.0) {
            cert.cell_level_union = false;
        }
        let expected = if member { 1.0 } else { 0.0 };
        if (total[i] - expected).abs() > TOL {
            cert.exact_partition = false;
        }
        covered += certified[i];
    }
    let count = omega.count();
    cert.covered_fraction = if count == 0 { 1.0 } else { covered / count as f64 };
    if w.cubes.is_empty() {
        cert.min_ratio = 0.0;
    }
    cert
}
