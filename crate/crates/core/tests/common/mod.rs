#![allow(dead_code)]

use czlab::cubes::CellSet;
use czlab::{Grid, GridFunction, Weight};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// A random cell boundary in `[-r, r]` on every axis.
pub fn boundary_point(rng: &mut ChaCha8Rng, grid: &Grid, r: f64) -> Vec<f64> {
    let h = grid.cell_width();
    let k = (r / h).floor() as i64;
    (0..grid.dim())
        .map(|_| rng.gen_range(-k..=k) as f64 * h)
        .collect()
}

/// Product of one or two power factors `|x - c|^{-a}`, `a ∈ [0, amax)`,
/// singularities on cell boundaries.
pub fn random_weight(rng: &mut ChaCha8Rng, grid: Grid, amax: f64) -> Weight {
    let factors = rng.gen_range(1..=2);
    let mut density = GridFunction::constant(grid, 1.0);
    for _ in 0..factors {
        let a = rng.gen::<f64>() * amax;
        let c = boundary_point(rng, &grid, grid.half_width() / 2.0);
        let w = Weight::power(grid, a, &c).unwrap();
        density = density.zip_with(w.density(), |x, y| x * y).unwrap();
    }
    Weight::new(density).unwrap()
}

/// Sum of one to three indicator or tent bumps supported in `[-L/4, L/4]^n`.
pub fn random_bumps(rng: &mut ChaCha8Rng, grid: Grid, signed: bool) -> GridFunction {
    let quarter = grid.half_width() / 4.0;
    let h = grid.cell_width();
    let mut f = GridFunction::zeros(grid);
    for _ in 0..rng.gen_range(1..=3) {
        let radius = rng.gen_range((2.0 * h).min(quarter / 4.0)..quarter / 2.0);
        let c: Vec<f64> = (0..grid.dim())
            .map(|_| rng.gen_range(-quarter + radius..quarter - radius))
            .collect();
        let mut height = rng.gen_range(0.5..5.0);
        if signed && rng.gen::<bool>() {
            height = -height;
        }
        let tent = rng.gen::<bool>();
        let g = GridFunction::from_fn(grid, |x| {
            let d = (0..grid.dim()).map(|k| (x[k] - c[k]).abs()).fold(0.0, f64::max);
            if tent {
                height * (1.0 - d / radius).max(0.0)
            } else if d < radius {
                height
            } else {
                0.0
            }
        })
        .unwrap();
        f = f.zip_with(&g, |a, b| a + b).unwrap();
    }
    f
}

/// Union of one to four random boxes or discs strictly inside the grid box.
pub fn random_open_set(rng: &mut ChaCha8Rng, grid: Grid) -> CellSet {
    let l = grid.half_width();
    let shapes: Vec<(Vec<f64>, f64, bool)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let r = rng.gen_range(0.05 * l..0.4 * l);
            let c = (0..grid.dim()).map(|_| rng.gen_range(-0.5 * l..0.5 * l)).collect();
            (c, r, rng.gen::<bool>())
        })
        .collect();
    CellSet::from_predicate(grid, |i| {
        let x = grid.center(i);
        shapes.iter().any(|(c, r, disc)| {
            let d = (0..grid.dim()).map(|k| (x[k] - c[k]).abs());
            if *disc {
                d.map(|v| v * v).sum::<f64>().sqrt() < *r
            } else {
                d.fold(0.0, f64::max) < *r
            }
        })
    })
}
