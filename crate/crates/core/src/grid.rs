//! Uniform grids over `[-L, L)^n`, cell-averaged functions and weighted measures.

use serde::{Deserialize, Serialize};

use crate::cubes::Cube;
use crate::{Error, Point, Result, MAX_DIM};

/// Uniform grid of `N^n` cells over the half-open box `[-L, L)^n`.
///
/// Cell `i` occupies `[-L + i h, -L + (i + 1) h)` on each axis, with `h = 2L / N`.
/// Flat indices run fastest along axis 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    cells: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, cells: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=2")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if cells < 2 || !cells.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "cells per axis {cells} must be a power of two >= 2"
            )));
        }
        Ok(Grid {
            dim,
            half_width,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    /// Total number of cells, `N^n`.
    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat % self.cells, flat / self.cells],
        }
    }

    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] + self.cells * idx[1],
        }
    }

    /// Lower coordinate of cell `i` along one axis.
    pub fn cell_lower(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.cell_width()
    }

    pub fn center(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let h = self.cell_width();
        let mut p = [0.0; MAX_DIM];
        for (d, coord) in p.iter_mut().enumerate().take(self.dim) {
            *coord = -self.half_width + (idx[d] as f64 + 0.5) * h;
        }
        p
    }

    /// Cell containing `p`, if `p` lies in the box.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        let h = self.cell_width();
        let mut idx = [0usize; MAX_DIM];
        for d in 0..self.dim {
            let u = (p[d] + self.half_width) / h;
            if !(u >= 0.0 && u < self.cells as f64) {
                return None;
            }
            idx[d] = u.floor() as usize;
        }
        Some(self.flat_index(idx))
    }

    /// Map a coordinate to cell units, where the box becomes `[0, N)`.
    pub fn to_cell_units(&self, x: f64) -> f64 {
        (x + self.half_width) / self.cell_width()
    }

    pub fn from_cell_units(&self, u: f64) -> f64 {
        -self.half_width + u * self.cell_width()
    }

    /// The whole box as a cube.
    pub fn bounding_cube(&self) -> Cube {
        Cube::new_unchecked(self.dim, [0.0; MAX_DIM], 2.0 * self.half_width)
    }
}

/// Real function on a grid with cell-average semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridFunctionRecord", try_from = "GridFunctionRecord")]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

/// Wire format: `{n, L, N, values}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunctionRecord {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub values: Vec<f64>,
}

impl From<GridFunction> for GridFunctionRecord {
    fn from(f: GridFunction) -> Self {
        GridFunctionRecord {
            n: f.grid.dim,
            half_width: f.grid.half_width,
            cells: f.grid.cells,
            values: f.values,
        }
    }
}

impl TryFrom<GridFunctionRecord> for GridFunction {
    type Error = Error;

    fn try_from(r: GridFunctionRecord) -> Result<Self> {
        GridFunction::new(Grid::new(r.n, r.half_width, r.cells)?, r.values)
    }
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { cell, value });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    /// Indicator of the product of intervals `[lo_d, hi_d)` (cells selected by center).
    pub fn indicator(grid: Grid, lo: &[f64], hi: &[f64]) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let c = grid.center(i);
                let inside = (0..grid.dim).all(|d| c[d] >= lo[d] && c[d] < hi[d]);
                if inside {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn abs(&self) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Smallest cube (grid-aligned per axis, possibly longer on one axis than
    /// the cells it holds) bounding the nonzero cells.
    pub fn support_cube(&self) -> Option<Cube> {
        let mut lo = [usize::MAX; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut any = false;
        for (i, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                any = true;
                let idx = self.grid.multi_index(i);
                for d in 0..self.grid.dim {
                    lo[d] = lo[d].min(idx[d]);
                    hi[d] = hi[d].max(idx[d] + 1);
                }
            }
        }
        if !any {
            return None;
        }
        let h = self.grid.cell_width();
        let side = (0..self.grid.dim).map(|d| hi[d] - lo[d]).max().unwrap_or(1) as f64 * h;
        let mut center = [0.0; MAX_DIM];
        for d in 0..self.grid.dim {
            center[d] = self.grid.cell_lower(lo[d]) + side / 2.0;
        }
        Some(Cube::new_unchecked(self.grid.dim, center, side))
    }
}

/// The measure `density(x) dx` on a grid; density strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    density: GridFunction,
}

impl WeightedMeasure {
    pub fn new(density: GridFunction) -> Result<Self> {
        if let Some((cell, &value)) = density
            .values
            .iter()
            .enumerate()
            .find(|(_, &v)| v <= 0.0)
        {
            return Err(Error::NonPositiveWeight { cell, value });
        }
        Ok(WeightedMeasure { density })
    }

    pub fn lebesgue(grid: Grid) -> Self {
        WeightedMeasure {
            density: GridFunction::constant(grid, 1.0),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.density.grid
    }

    pub fn density(&self) -> &GridFunction {
        &self.density
    }

    pub fn cell_measure(&self, cell: usize) -> f64 {
        self.density.values[cell] * self.density.grid.cell_volume()
    }

    pub fn total(&self) -> f64 {
        self.density.values.iter().sum::<f64>() * self.density.grid.cell_volume()
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `∫ f dμ`.
pub fn integrate(f: &GridFunction, mu: &WeightedMeasure) -> Result<f64> {
    same_grid(&f.grid, mu.grid())?;
    let s: f64 = f
        .values
        .iter()
        .zip(&mu.density.values)
        .map(|(a, d)| a * d)
        .sum();
    Ok(s * f.grid.cell_volume())
}

/// `(∫ |f|^p dμ)^{1/p}`; `p = f64::INFINITY` gives `max |f|`.
pub fn lp_norm(f: &GridFunction, mu: &WeightedMeasure, p: f64) -> Result<f64> {
    same_grid(&f.grid, mu.grid())?;
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must be positive")));
    }
    if p.is_infinite() {
        return Ok(f.abs_max());
    }
    let s: f64 = f
        .values
        .iter()
        .zip(&mu.density.values)
        .map(|(a, d)| a.abs().powf(p) * d)
        .sum();
    Ok((s * f.grid.cell_volume()).powf(1.0 / p))
}

/// `μ({|f| > t})`.
pub fn level_set_measure(f: &GridFunction, mu: &WeightedMeasure, t: f64) -> Result<f64> {
    same_grid(&f.grid, mu.grid())?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("level t = {t} must be >= 0")));
    }
    let s: f64 = f
        .values
        .iter()
        .zip(&mu.density.values)
        .filter(|(a, _)| a.abs() > t)
        .map(|(_, d)| d)
        .sum();
    Ok(s * f.grid.cell_volume())
}

/// One point of the distribution trace `t ↦ t^p μ({|g| > t})`, evaluated
/// just below a distinct value `t` of `|g|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub level_measure: f64,
    pub weighted: f64,
}

/// Exact discrete value of `sup_{t>0} t^p μ({|g| > t})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakSup {
    pub p: f64,
    /// `sup_t t^p μ({|g| > t})`.
    pub sup: f64,
    /// The distinct value of `|g|` at which the supremum is approached from below.
    pub argmax: f64,
    pub trace: Vec<TracePoint>,
}

impl WeakSup {
    /// `‖g‖_{L^{p,∞}(μ)} = sup^{1/p}`.
    pub fn quasinorm(&self) -> f64 {
        self.sup.powf(1.0 / self.p)
    }
}

/// Between consecutive distinct values of `|g|` the level-set measure is
/// constant and `t^p` increases, so the supremum is the max over distinct
/// values `v` of `v^p μ({|g| >= v})`.
pub fn weak_sup(g: &GridFunction, mu: &WeightedMeasure, p: f64) -> Result<WeakSup> {
    same_grid(&g.grid, mu.grid())?;
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must be positive")));
    }
    let vol = g.grid.cell_volume();
    let mut cells: Vec<(f64, f64)> = g
        .values
        .iter()
        .zip(&mu.density.values)
        .map(|(v, d)| (v.abs(), d * vol))
        .filter(|(v, _)| *v > 0.0)
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut trace = Vec::new();
    let mut cumulative = 0.0;
    let mut best = (0.0, 0.0);
    let mut i = 0;
    while i < cells.len() {
        let v = cells[i].0;
        while i < cells.len() && cells[i].0 == v {
            cumulative += cells[i].1;
            i += 1;
        }
        let weighted = v.powf(p) * cumulative;
        if weighted > best.0 {
            best = (weighted, v);
        }
        trace.push(TracePoint {
            t: v,
            level_measure: cumulative,
            weighted,
        });
    }
    trace.reverse();
    Ok(WeakSup {
        p,
        sup: best.0,
        argmax: best.1,
        trace,
    })
}
