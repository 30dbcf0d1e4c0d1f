mod common;

use common::{log_uniform, random_bumps, random_weight};
use czlab::cubes::cube_measure;
use czlab::decomp::{construct_e_cubes, cz_decompose, ntv_decompose, reconstruct, NtvDecomposition};
use czlab::grid::lp_norm;
use czlab::{Error, Grid, GridFunction, WeightedMeasure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, two_d: bool, signed: bool) -> (ChaCha8Rng, GridFunction, WeightedMeasure) {
    let grid = if two_d {
        Grid::new(2, 8.0, 32).unwrap()
    } else {
        Grid::new(1, 8.0, 256).unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = random_weight(&mut rng, grid, 0.75).measure();
    let phi = random_bumps(&mut rng, grid, signed);
    (rng, phi, nu)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cz_reconstructs_and_certifies(seed in any::<u64>(), two_d in any::<bool>()) {
        let (mut rng, phi, nu) = setup(seed, two_d, true);
        let height = lp_norm(&phi, &nu, 1.0).unwrap() / nu.total() * log_uniform(&mut rng, 1.5, 50.0);
        let d = cz_decompose(&phi, &nu, height).unwrap();
        let err = reconstruct(&d.good, &d.bad_parts).zip_with(&phi, |a, b| (a - b).abs()).unwrap().abs_max();
        prop_assert!(err <= 1e-12 * phi.abs_max());
        prop_assert!(d.passed(), "{:?}", d.properties);
        for b in &d.bad_parts {
            prop_assert!(b.integral(&nu).abs() <= 1e-10 * height * cube_measure(&b.cube, &nu));
        }
    }

    #[test]
    fn ntv_reconstructs_and_places_e_cubes(seed in any::<u64>(), two_d in any::<bool>()) {
        let (mut rng, phi, nu) = setup(seed, two_d, false);
        let m = rng.gen_range(1..=3);
        let level = lp_norm(&phi, &nu, 1.0).unwrap() / nu.total() * log_uniform(&mut rng, 4.0, 200.0);
        let d = match ntv_decompose(&phi, &nu, level.powi(m as i32), m) {
            Err(Error::Precondition(_)) => return Ok(()),
            other => other.unwrap(),
        };
        let err = reconstruct(&d.good, &d.bad_parts).zip_with(&phi, |a, b| (a - b).abs()).unwrap().abs_max();
        prop_assert!(err <= 1e-12 * phi.abs_max());
        prop_assert!(d.passed(), "{:?}", d.properties);
        let dil = NtvDecomposition::dilation_constant(phi.grid().dim());
        for b in &d.bad_parts {
            let bound = dil * d.nu_characteristic * d.level * cube_measure(&b.cube, &nu);
            prop_assert!(b.l1_norm(&nu) <= bound * (1.0 + 1e-12));
        }
        let es = construct_e_cubes(&d, &nu).unwrap();
        prop_assert_eq!(es.len(), d.bad_parts.len());
        for (e, b) in es.iter().zip(&d.bad_parts) {
            let target = b.l1_norm(&nu) / (dil * d.nu_characteristic) / d.level;
            prop_assert!((e.target - target).abs() <= 1e-12 * target.max(1e-300));
            prop_assert!((cube_measure(&e.cube, &nu) - target).abs() <= 1e-9 * target.max(1e-300));
            prop_assert!(b.cube.contains_cube(&e.cube));
        }
    }
}

#[test]
fn cz_hand_example() {
    let g = Grid::new(1, 1.0, 64).unwrap();
    let phi = GridFunction::from_fn(g, |x| if (0.0..0.5).contains(&x[0]) { 2.0 } else { 0.0 }).unwrap();
    let leb = WeightedMeasure::lebesgue(g);
    let d = cz_decompose(&phi, &leb, 0.5).unwrap();
    assert!(d.passed());
    let cubes: Vec<_> = d.cubes().collect();
    assert_eq!(cubes.len(), 1);
    assert_eq!((cubes[0].lower(0), cubes[0].upper(0)), (0.0, 1.0));
    for i in 0..g.len() {
        let x = g.center(i)[0];
        let good = if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        assert_eq!(d.good.values()[i], good);
        let bad = d.bad_parts[0].to_grid_function(g).values()[i];
        let want = if (0.0..0.5).contains(&x) { 1.0 } else if (0.5..1.0).contains(&x) { -1.0 } else { 0.0 };
        assert_eq!(bad, want);
    }
    assert!(d.good.abs_max() <= 2.0 * 0.5 * 2.0);
}
