mod common;

use common::random_open_set;
use czlab::cubes::{certify_whitney, cube_measure, whitney_decompose, CellSet, WhitneyOptions};
use czlab::{Cube, Grid, GridFunction, WeightedMeasure};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Euclidean distance between two closed axis-parallel boxes `[lo, hi]`.
fn box_distance(a: &([f64; 2], [f64; 2]), b: &([f64; 2], [f64; 2]), dim: usize) -> f64 {
    (0..dim)
        .map(|d| {
            let gap = (b.0[d] - a.1[d]).max(a.0[d] - b.1[d]).max(0.0);
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

fn cube_box(q: &Cube) -> ([f64; 2], [f64; 2]) {
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for d in 0..q.dim() {
        lo[d] = q.lower(d);
        hi[d] = q.upper(d);
    }
    (lo, hi)
}

fn cell_box(grid: &Grid, i: usize) -> ([f64; 2], [f64; 2]) {
    let c = grid.center(i);
    let h = grid.cell_width() / 2.0;
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for d in 0..grid.dim() {
        lo[d] = c[d] - h;
        hi[d] = c[d] + h;
    }
    (lo, hi)
}

fn dist_to_complement(q: &Cube, omega: &CellSet, exterior: bool) -> f64 {
    let grid = omega.grid();
    let qb = cube_box(q);
    let mut best = (0..grid.len())
        .filter(|&i| !omega.contains(i))
        .map(|i| box_distance(&qb, &cell_box(grid, i), grid.dim()))
        .fold(f64::INFINITY, f64::min);
    if exterior {
        let l = grid.half_width();
        for d in 0..grid.dim() {
            best = best.min(qb.0[d] + l).min(l - qb.1[d]);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn whitney_cubes_satisfy_bounds_and_tile(seed in any::<u64>(), two_d in any::<bool>(), exterior in any::<bool>()) {
        let grid = if two_d { Grid::new(2, 4.0, 32).unwrap() } else { Grid::new(1, 4.0, 128).unwrap() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = random_open_set(&mut rng, grid);
        let opts = WhitneyOptions { exterior_is_complement: exterior, ..WhitneyOptions::default() };
        let w = whitney_decompose(&omega, &opts).unwrap();
        prop_assert!(certify_whitney(&omega, &w, &opts).passed());

        for q in &w.cubes {
            let dist = dist_to_complement(q, &omega, exterior);
            let diam = q.diameter();
            prop_assert!(dist >= 2.0 * diam * (1.0 - 1e-9), "{dist} < 2 * {diam}");
            prop_assert!(dist <= 8.0 * diam * (1.0 + 1e-9), "{dist} > 8 * {diam}");
        }
        let all: Vec<&Cube> = w.all_cubes().collect();
        for (a, p) in all.iter().enumerate() {
            for r in &all[..a] {
                prop_assert!(!p.overlaps(r));
            }
        }
        // union equality, cell by cell: certified cubes meet exactly Ω, and
        // with the boundary layer they fill every member cell
        let mut met = vec![false; grid.len()];
        let mut filled = vec![0.0; grid.len()];
        for q in &w.cubes {
            for (i, frac) in q.cell_overlaps(&grid) {
                met[i] = true;
                filled[i] += frac;
            }
        }
        for q in &w.boundary_layer {
            for (i, frac) in q.cell_overlaps(&grid) {
                filled[i] += frac;
            }
        }
        for i in 0..grid.len() {
            prop_assert_eq!(met[i], omega.contains(i));
            let want = if omega.contains(i) { 1.0 } else { 0.0 };
            prop_assert!((filled[i] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn cube_measure_additive_and_monotone(cx in -1.0..1.0f64, cy in -1.0..1.0f64, side in 0.05..1.5f64, seed in any::<u64>()) {
        let grid = Grid::new(2, 2.0, 32).unwrap();
        let mu = WeightedMeasure::new(
            GridFunction::from_fn(grid, |p| 1.0 + ((p[0] * 3.1 + p[1] * 1.7 + seed as f64 * 1e-3).sin()).abs()).unwrap(),
        ).unwrap();
        let q = Cube::new(&[cx, cy], side).unwrap();
        let quarter = side / 4.0;
        let parts: f64 = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
            .iter()
            .map(|(a, b)| cube_measure(&Cube::new(&[cx + a * quarter, cy + b * quarter], side / 2.0).unwrap(), &mu))
            .sum();
        let whole = cube_measure(&q, &mu);
        prop_assert!((whole - parts).abs() <= 1e-12 * whole);
        let bigger = cube_measure(&Cube::new(&[cx, cy], side * 1.01).unwrap(), &mu);
        prop_assert!(bigger > whole);
    }
}

#[test]
fn dilation_examples() {
    let q = Cube::new(&[0.5], 1.0).unwrap().dilate(2.0).unwrap();
    assert_eq!((q.center()[0], q.side()), (0.5, 2.0));
    let q = Cube::new(&[1.0, 1.0], 2.0).unwrap().dilate(17.0 * 2f64.sqrt()).unwrap();
    assert!((q.side() - 48.083).abs() < 1e-3);
    assert_eq!(&q.center()[..2], &[1.0, 1.0]);
}

#[test]
fn cube_measure_oracles() {
    let g = Grid::new(1, 2.0, 4096).unwrap();
    let mu = WeightedMeasure::new(GridFunction::from_fn(g, |x| x[0].abs().sqrt()).unwrap()).unwrap();
    let q = Cube::new(&[0.5], 1.0).unwrap();
    assert!((cube_measure(&q, &mu) - 2.0 / 3.0).abs() < 1e-3);
}
