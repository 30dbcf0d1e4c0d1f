//! Axis-aligned cubes, cell sets and fractional cube measures.

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, WeightedMeasure};
use crate::{Error, Point, Result, MAX_DIM};

pub mod whitney;

pub use whitney::{certify_whitney, whitney_decompose, Whitney, WhitneyCertificate, WhitneyOptions};

/// Closed cube `Q(center, side)`; `side = 0` is allowed only for degenerate
/// cubes produced by empty targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "CubeRecord", try_from = "CubeRecord")]
pub struct Cube {
    dim: usize,
    center: Point,
    side: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeRecord {
    pub center: Vec<f64>,
    pub side: f64,
}

impl From<Cube> for CubeRecord {
    fn from(q: Cube) -> Self {
        CubeRecord {
            center: q.center[..q.dim].to_vec(),
            side: q.side,
        }
    }
}

impl TryFrom<CubeRecord> for Cube {
    type Error = Error;

    fn try_from(r: CubeRecord) -> Result<Self> {
        if r.side == 0.0 && (1..=MAX_DIM).contains(&r.center.len()) && r.center.iter().all(|c| c.is_finite()) {
            let mut c = [0.0; MAX_DIM];
            c[..r.center.len()].copy_from_slice(&r.center);
            return Ok(Cube::degenerate(r.center.len(), c));
        }
        Cube::new(&r.center, r.side)
    }
}

impl Cube {
    pub fn new(center: &[f64], side: f64) -> Result<Self> {
        let dim = center.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!("cube dimension {dim}")));
        }
        if !(side.is_finite() && side > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cube needs finite center and side > 0, got {center:?}, {side}"
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(center);
        Ok(Cube {
            dim,
            center: c,
            side,
        })
    }

    pub(crate) fn new_unchecked(dim: usize, center: Point, side: f64) -> Self {
        Cube { dim, center, side }
    }

    /// Zero-volume cube at `center`.
    pub fn degenerate(dim: usize, center: Point) -> Self {
        Cube {
            dim,
            center,
            side: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn diameter(&self) -> f64 {
        (self.dim as f64).sqrt() * self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    pub fn lower(&self, d: usize) -> f64 {
        self.center[d] - self.side / 2.0
    }

    pub fn upper(&self, d: usize) -> f64 {
        self.center[d] + self.side / 2.0
    }

    /// `rQ`: same center, side multiplied by `r`.
    pub fn dilate(&self, r: f64) -> Result<Cube> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!("dilation factor {r} must be > 0")));
        }
        Ok(Cube {
            side: self.side * r,
            ..*self
        })
    }

    /// Closed-cube membership.
    pub fn contains_point(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|d| (p[d] - self.center[d]).abs() <= self.side / 2.0)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        (0..self.dim).all(|d| other.lower(d) >= self.lower(d) && other.upper(d) <= self.upper(d))
    }

    /// Interiors intersect.
    pub fn overlaps(&self, other: &Cube) -> bool {
        (0..self.dim).all(|d| self.lower(d) < other.upper(d) && other.lower(d) < self.upper(d))
    }

    pub fn inside_box(&self, grid: &Grid) -> bool {
        grid.bounding_cube().contains_cube(self)
    }

    /// Euclidean distance between the closed cubes.
    pub fn distance(&self, other: &Cube) -> f64 {
        (0..self.dim)
            .map(|d| {
                let gap = (other.lower(d) - self.upper(d))
                    .max(self.lower(d) - other.upper(d))
                    .max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Cells meeting the cube in positive volume, with the overlap fraction
    /// `|Q ∩ cell| / h^n` of each.
    pub fn cell_overlaps(&self, grid: &Grid) -> Vec<(usize, f64)> {
        let mut per_axis: [Vec<(usize, f64)>; MAX_DIM] = [Vec::new(), Vec::new()];
        for (d, slot) in per_axis.iter_mut().enumerate() {
            if d >= grid.dim() {
                slot.push((0, 1.0));
                continue;
            }
            let lo = grid.to_cell_units(self.lower(d)).max(0.0);
            let hi = grid.to_cell_units(self.upper(d)).min(grid.cells_per_axis() as f64);
            if hi <= lo {
                return Vec::new();
            }
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(grid.cells_per_axis());
            for i in first..last {
                let len = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if len > 0.0 {
                    slot.push((i, len));
                }
            }
        }
        let mut out = Vec::with_capacity(per_axis[0].len() * per_axis[1].len());
        for &(j, fy) in &per_axis[1] {
            for &(i, fx) in &per_axis[0] {
                out.push((grid.flat_index([i, j]), fx * fy));
            }
        }
        out
    }
}

/// `μ(Q ∩ box)`, boundary cells weighted by their overlap fraction, so that
/// `r ↦ μ(Q(c, r))` is continuous.
pub fn cube_measure(q: &Cube, mu: &WeightedMeasure) -> f64 {
    let grid = mu.grid();
    let vol = grid.cell_volume();
    let dens = mu.density().values();
    q.cell_overlaps(grid)
        .into_iter()
        .map(|(i, frac)| dens[i] * frac)
        .sum::<f64>()
        * vol
}

/// Subset of grid cells, read as the open set given by the interior of the
/// union of its cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    grid: Grid,
    members: Vec<bool>,
}

impl CellSet {
    pub fn new(grid: Grid, members: Vec<bool>) -> Result<Self> {
        if members.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "cell set needs {} entries, got {}",
                grid.len(),
                members.len()
            )));
        }
        Ok(CellSet { grid, members })
    }

    pub fn empty(grid: Grid) -> Self {
        CellSet {
            grid,
            members: vec![false; grid.len()],
        }
    }

    pub fn from_predicate(grid: Grid, f: impl Fn(usize) -> bool) -> Self {
        CellSet {
            grid,
            members: (0..grid.len()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.members[cell]
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn measure(&self, mu: &WeightedMeasure) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.members[i])
            .map(|i| mu.cell_measure(i))
            .sum()
    }

    /// Whether any member cell touches the boundary of the box.
    pub fn touches_box_boundary(&self) -> bool {
        let n = self.grid.cells_per_axis();
        (0..self.grid.len()).any(|i| {
            self.members[i]
                && self.grid.multi_index(i)[..self.grid.dim()]
                    .iter()
                    .any(|&k| k == 0 || k == n - 1)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;

    #[test]
    fn dilate_examples() {
        let q = Cube::new(&[0.0], 1.0).unwrap();
        assert_eq!(q.dilate(1.0).unwrap(), q);
        let q = Cube::new(&[0.5], 1.0).unwrap();
        let d = q.dilate(2.0 * 1f64.sqrt()).unwrap();
        assert_eq!((d.center()[0], d.side()), (0.5, 2.0));
        let q = Cube::new(&[1.0, 1.0], 2.0).unwrap();
        let d = q.dilate(17.0 * 2f64.sqrt()).unwrap();
        assert!((d.side() - 48.083).abs() < 1e-3);
        assert_eq!(d.center(), [1.0, 1.0]);
        assert!(q.dilate(0.0).is_err());
        assert!(q.dilate(-2.0).is_err());
    }

    #[test]
    fn cube_measure_examples() {
        let g = Grid::new(1, 4.0, 64).unwrap();
        let leb = WeightedMeasure::lebesgue(g);
        let q = Cube::new(&[0.0], 2.0).unwrap();
        assert!((cube_measure(&q, &leb) - 2.0).abs() < 1e-12);
        let h = g.cell_width();
        let q = Cube::new(&[0.0], 1.5 * h).unwrap();
        assert!((cube_measure(&q, &leb) - 1.5 * h).abs() < 1e-15);

        let g = Grid::new(1, 2.0, 8192).unwrap();
        let mu = WeightedMeasure::new(GridFunction::from_fn(g, |p| p[0].abs().sqrt()).unwrap())
            .unwrap();
        let q = Cube::new(&[0.5], 1.0).unwrap();
        assert!((cube_measure(&q, &mu) - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn cube_measure_is_continuous_and_increasing() {
        let g = Grid::new(2, 2.0, 16).unwrap();
        let mu = WeightedMeasure::new(
            GridFunction::from_fn(g, |p| 1.0 + p[0] * p[0] + 0.5 * p[1].abs()).unwrap(),
        )
        .unwrap();
        let mut prev = 0.0;
        for k in 1..400 {
            let r = k as f64 * 0.01;
            let m = cube_measure(&Cube::new(&[0.1, -0.3], r).unwrap(), &mu);
            assert!(m > prev);
            let r0 = r - 0.01;
            let bound = mu.density().abs_max() * (r * r - r0 * r0);
            assert!(m - prev <= bound * (1.0 + 1e-12), "jump at r = {r}");
            prev = m;
        }
    }

    #[test]
    fn cube_measure_additive() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let mu = WeightedMeasure::new(GridFunction::from_fn(g, |p| 2.0 + p[0]).unwrap()).unwrap();
        let a = Cube::new(&[-0.3], 0.4).unwrap();
        let b = Cube::new(&[0.1], 0.4).unwrap();
        let ab = Cube::new(&[-0.1], 0.8).unwrap();
        let s = cube_measure(&a, &mu) + cube_measure(&b, &mu);
        assert!((s - cube_measure(&ab, &mu)).abs() < 1e-12);
    }

    #[test]
    fn cube_json() {
        let q = Cube::new(&[1.0, -2.0], 0.5).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"center":[1.0,-2.0],"side":0.5}"#);
        assert_eq!(serde_json::from_str::<Cube>(&s).unwrap(), q);
        assert!(serde_json::from_str::<Cube>(r#"{"center":[0.0],"side":-1.0}"#).is_err());
    }
}
