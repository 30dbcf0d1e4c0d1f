//! Families of grid-aligned cubes and the scans run over them.
//!
//! A family is organized by side length `s` (in cells). For each side every
//! window statistic (sums, minima) is computed at all `(N - s + 1)^n`
//! placements in `O(N^n)` time with prefix sums and monotone-deque sliding
//! windows, and the family then selects which placements count. The
//! exhaustive family has every placement of every side, so a full scan costs
//! `O(N^{n+1})`.

use serde::{Deserialize, Serialize};

use crate::cubes::Cube;
use crate::grid::Grid;
use crate::{par, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubeFamily {
    /// Every grid-aligned cube inside the box.
    #[default]
    Exhaustive,
    /// Dyadic cubes of the box.
    Dyadic,
    /// Dyadic cubes together with the `3^n - 1` grids shifted by a third of
    /// the side (rounded to whole cells).
    ShiftedDyadic,
}

impl std::fmt::Display for CubeFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CubeFamily::Exhaustive => "exhaustive",
            CubeFamily::Dyadic => "dyadic",
            CubeFamily::ShiftedDyadic => "shifted-dyadic",
        })
    }
}

impl std::str::FromStr for CubeFamily {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "exhaustive" => Ok(CubeFamily::Exhaustive),
            "dyadic" => Ok(CubeFamily::Dyadic),
            "shifted-dyadic" => Ok(CubeFamily::ShiftedDyadic),
            other => Err(crate::Error::InvalidArgument(format!("unknown cube family `{other}`"))),
        }
    }
}

/// Grid-aligned cube: `side` cells per axis starting at cell `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellCube {
    pub origin: [usize; MAX_DIM],
    pub side: usize,
}

impl CellCube {
    pub fn to_cube(&self, grid: &Grid) -> Cube {
        let h = grid.cell_width();
        let mut center = [0.0; MAX_DIM];
        for (d, c) in center.iter_mut().enumerate().take(grid.dim()) {
            *c = grid.cell_lower(self.origin[d]) + self.side as f64 * h / 2.0;
        }
        Cube::new_unchecked(grid.dim(), center, self.side as f64 * h)
    }

    pub fn contains(&self, grid: &Grid, cell: usize) -> bool {
        let idx = grid.multi_index(cell);
        (0..grid.dim()).all(|d| idx[d] >= self.origin[d] && idx[d] < self.origin[d] + self.side)
    }

    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        let s = self.side;
        if grid.dim() == 1 {
            (self.origin[0]..self.origin[0] + s).collect()
        } else {
            let mut out = Vec::with_capacity(s * s);
            for j in self.origin[1]..self.origin[1] + s {
                for i in self.origin[0]..self.origin[0] + s {
                    out.push(grid.flat_index([i, j]));
                }
            }
            out
        }
    }
}

struct Placement {
    side: usize,
    stride: usize,
    residues: Vec<[usize; MAX_DIM]>,
}

impl Placement {
    fn admits(&self, pos: [usize; MAX_DIM], dim: usize) -> bool {
        self.residues
            .iter()
            .any(|r| (0..dim).all(|d| pos[d] % self.stride == r[d]))
    }
}

impl CubeFamily {
    fn placements(&self, grid: &Grid) -> Vec<Placement> {
        let n = grid.cells_per_axis();
        let dim = grid.dim();
        let dyadic_sides = || (0..=n.trailing_zeros()).map(|k| 1usize << k);
        match self {
            CubeFamily::Exhaustive => (1..=n)
                .map(|side| Placement {
                    side,
                    stride: 1,
                    residues: vec![[0; MAX_DIM]],
                })
                .collect(),
            CubeFamily::Dyadic => dyadic_sides()
                .map(|side| Placement {
                    side,
                    stride: side,
                    residues: vec![[0; MAX_DIM]],
                })
                .collect(),
            CubeFamily::ShiftedDyadic => dyadic_sides()
                .map(|side| {
                    let mut shifts: Vec<usize> = [0, side / 3 + usize::from(side % 3 == 2), (2 * side + 1) / 3]
                        .into_iter()
                        .map(|s| s % side)
                        .collect();
                    shifts.sort_unstable();
                    shifts.dedup();
                    let mut residues = Vec::new();
                    for &a in &shifts {
                        if dim == 1 {
                            residues.push([a, 0]);
                        } else {
                            for &b in &shifts {
                                residues.push([a, b]);
                            }
                        }
                    }
                    Placement {
                        side,
                        stride: side,
                        residues,
                    }
                })
                .collect(),
        }
    }

    fn positions(grid: &Grid, pl: &Placement) -> Vec<[usize; MAX_DIM]> {
        let p = grid.cells_per_axis() - pl.side + 1;
        let dim = grid.dim();
        let mut out = Vec::new();
        let rows = if dim == 1 { 1 } else { p };
        for b in 0..rows {
            for a in 0..p {
                if pl.admits([a, b], dim) {
                    out.push([a, b]);
                }
            }
        }
        out
    }

    /// Number of cubes in the family.
    pub fn size(&self, grid: &Grid) -> usize {
        self.placements(grid)
            .iter()
            .map(|pl| Self::positions(grid, pl).len())
            .sum()
    }

    pub fn cubes(&self, grid: &Grid) -> Vec<CellCube> {
        self.placements(grid)
            .iter()
            .flat_map(|pl| {
                Self::positions(grid, pl)
                    .into_iter()
                    .map(move |origin| CellCube {
                        origin,
                        side: pl.side,
                    })
            })
            .collect()
    }
}

/// Neumaier-compensated prefix sums; window sums are accurate relative to the
/// window, not to the running total.
pub(crate) fn window_sums_1d(v: &[f64], s: usize) -> Vec<f64> {
    let mut hi = Vec::with_capacity(v.len() + 1);
    let mut lo = Vec::with_capacity(v.len() + 1);
    hi.push(0.0);
    lo.push(0.0);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        hi.push(sum);
        lo.push(comp);
    }
    (0..=v.len() - s)
        .map(|a| (hi[a + s] - hi[a]) + (lo[a + s] - lo[a]))
        .collect()
}

/// `out[i] = min(v[i..i+w])` (or max), by monotone deque.
fn sliding_extreme(v: &[f64], w: usize, max: bool) -> Vec<f64> {
    let better = |a: f64, b: f64| if max { a >= b } else { a <= b };
    let mut out = Vec::with_capacity(v.len() + 1 - w);
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for i in 0..v.len() {
        while let Some(&back) = dq.back() {
            if better(v[i], v[back]) {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(i);
        if dq[0] + w <= i {
            dq.pop_front();
        }
        if i + 1 >= w {
            out.push(v[dq[0]]);
        }
    }
    out
}

/// Window statistic over all placements of side `s`, as a `P^n` array with
/// `P = N - s + 1` (axis 0 fastest).
fn window_stat(grid: &Grid, v: &[f64], s: usize, op: WindowOp) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let row_op = |row: &[f64]| match op {
        WindowOp::Sum => window_sums_1d(row, s),
        WindowOp::Min => sliding_extreme(row, s, false),
    };
    if grid.dim() == 1 {
        return row_op(v);
    }
    let p = n - s + 1;
    // along axis 0 for every row, then along axis 1 for every column
    let mut rows = vec![0.0; p * n];
    for j in 0..n {
        let r = row_op(&v[j * n..(j + 1) * n]);
        for a in 0..p {
            rows[j + n * a] = r[a]; // transposed: column-major in j
        }
    }
    let mut out = vec![0.0; p * p];
    for a in 0..p {
        let c = row_op(&rows[n * a..n * (a + 1)]);
        for (b, val) in c.into_iter().enumerate() {
            out[a + p * b] = val;
        }
    }
    out
}

#[derive(Clone, Copy)]
enum WindowOp {
    Sum,
    Min,
}

/// Result of a supremum scan over a family.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SupScan {
    pub value: f64,
    pub witness: CellCube,
    pub family_size: usize,
}

/// `sup_Q value(|Q| in cells, sums over Q, minima over Q)` over the family.
pub(crate) fn sup_scan<F>(
    grid: &Grid,
    family: CubeFamily,
    sums: &[&[f64]],
    mins: &[&[f64]],
    value: F,
) -> SupScan
where
    F: Fn(f64, &[f64], &[f64]) -> f64 + Sync + Send,
{
    let placements = family.placements(grid);
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let init = || SupScan {
        value: f64::NEG_INFINITY,
        witness: CellCube {
            origin: [0; MAX_DIM],
            side: 1,
        },
        family_size: 0,
    };
    par::fold_reduce(
        placements.len(),
        init,
        |mut best, k| {
            let pl = &placements[k];
            let s = pl.side;
            let p = n - s + 1;
            let sum_arrays: Vec<Vec<f64>> = sums
                .iter()
                .map(|v| window_stat(grid, v, s, WindowOp::Sum))
                .collect();
            let min_arrays: Vec<Vec<f64>> = mins
                .iter()
                .map(|v| window_stat(grid, v, s, WindowOp::Min))
                .collect();
            let count = (s as f64).powi(dim as i32);
            let mut sbuf = vec![0.0; sums.len()];
            let mut mbuf = vec![0.0; mins.len()];
            for pos in CubeFamily::positions(grid, pl) {
                let flat = if dim == 1 { pos[0] } else { pos[0] + p * pos[1] };
                for (slot, arr) in sbuf.iter_mut().zip(&sum_arrays) {
                    *slot = arr[flat];
                }
                for (slot, arr) in mbuf.iter_mut().zip(&min_arrays) {
                    *slot = arr[flat];
                }
                let v = value(count, &sbuf, &mbuf);
                best.family_size += 1;
                if v > best.value {
                    best.value = v;
                    best.witness = CellCube { origin: pos, side: s };
                }
            }
            best
        },
        |a, b| {
            let size = a.family_size + b.family_size;
            let mut w = if b.value > a.value || (b.value == a.value && b.witness.side < a.witness.side) {
                b
            } else {
                a
            };
            w.family_size = size;
            w
        },
    )
}

/// `out[x] = max over family cubes Q ∋ x of num(Q) / den(Q)` where `num`,
/// `den` are window sums (`den = None` means the cell count).
pub(crate) fn cover_max(grid: &Grid, family: CubeFamily, num: &[f64], den: Option<&[f64]>) -> Vec<f64> {
    let placements = family.placements(grid);
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let len = grid.len();
    par::fold_reduce(
        placements.len(),
        || vec![f64::NEG_INFINITY; len],
        |mut acc, k| {
            let pl = &placements[k];
            let s = pl.side;
            let p = n - s + 1;
            let ns = window_stat(grid, num, s, WindowOp::Sum);
            let ds = den.map(|d| window_stat(grid, d, s, WindowOp::Sum));
            let count = (s as f64).powi(dim as i32);
            let mut avg = vec![f64::NEG_INFINITY; ns.len()];
            for pos in CubeFamily::positions(grid, pl) {
                let flat = if dim == 1 { pos[0] } else { pos[0] + p * pos[1] };
                avg[flat] = match &ds {
                    Some(d) => ns[flat] / d[flat],
                    None => ns[flat] / count,
                };
            }
            let covered = cover_windows(grid, &avg, s);
            for (a, c) in acc.iter_mut().zip(covered) {
                if c > *a {
                    *a = c;
                }
            }
            acc
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                if y > *x {
                    *x = y;
                }
            }
            a
        },
    )
}

/// Spread placement values back to cells: `out[x] = max_{a ≤ x < a + s} vals[a]`.
fn cover_windows(grid: &Grid, vals: &[f64], s: usize) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let p = n - s + 1;
    let cover_row = |row: &[f64]| -> Vec<f64> {
        let mut padded = vec![f64::NEG_INFINITY; s - 1];
        padded.extend_from_slice(row);
        padded.extend(std::iter::repeat(f64::NEG_INFINITY).take(s - 1));
        sliding_extreme(&padded, s, true)
    };
    if grid.dim() == 1 {
        return cover_row(vals);
    }
    // axis 0 for each of the p placement rows, then axis 1 per cell column
    let mut rows = vec![f64::NEG_INFINITY; n * p];
    for b in 0..p {
        let r = cover_row(&vals[b * p..(b + 1) * p]);
        for (x, v) in r.into_iter().enumerate() {
            rows[b + p * x] = v;
        }
    }
    let mut out = vec![f64::NEG_INFINITY; n * n];
    for x in 0..n {
        let c = cover_row(&rows[p * x..p * (x + 1)]);
        for (y, v) in c.into_iter().enumerate() {
            out[x + n * y] = v;
        }
    }
    out
}
