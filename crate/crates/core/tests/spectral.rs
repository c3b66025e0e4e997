use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waves_core::spectral::random::{random_field, FieldSpec};
use waves_core::spectral::{hs_norm, sobolev_norm, DealiasRule, PeriodicGrid, SobolevIndex, SurfaceField};

fn field(dim: usize, n: usize, seed: u64, kmax: i64) -> SurfaceField {
    let grid = PeriodicGrid::new(dim, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_field(grid, &FieldSpec::smooth(kmax), &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_survive_the_round_trip(seed in any::<u64>(), dim in 1usize..=2, kmax in 1i64..12) {
        let f = field(dim, 32, seed, kmax);
        let back = SurfaceField::from_coeffs(f.grid(), f.coeffs().to_vec());
        let err = (&back - &f).sup_norm();
        prop_assert!(err <= 1e-12 * f.sup_norm().max(1e-300));
    }

    #[test]
    fn parseval_holds(seed in any::<u64>(), dim in 1usize..=2) {
        let f = field(dim, 32, seed, 10);
        let spectral: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum();
        let samples = f.l2_norm_values().powi(2);
        prop_assert!((spectral - samples).abs() <= 1e-12 * samples);
    }

    #[test]
    fn norms_are_monotone_in_the_exponent(seed in any::<u64>(), s in -2.0f64..6.0, ds in 0.0f64..4.0) {
        let f = field(1, 64, seed, 20);
        prop_assert!(hs_norm(&f, s) <= hs_norm(&f, s + ds) * (1.0 + 1e-14));
    }

    #[test]
    fn dealiasing_is_idempotent(seed in any::<u64>()) {
        let f = field(2, 16, seed, 7);
        let once = f.dealias(DealiasRule::TwoThirds);
        let twice = once.dealias(DealiasRule::TwoThirds);
        prop_assert_eq!(once.coeffs(), twice.coeffs());
    }

    #[test]
    fn linear_combinations_transform_linearly(a in -3.0f64..3.0, s1 in any::<u64>(), s2 in any::<u64>()) {
        let f = field(1, 32, s1, 10);
        let g = field(1, 32, s2, 10);
        let lhs = f.axpy(a, &g);
        let rhs = SurfaceField::from_values(f.grid(), f.values().iter().zip(g.values()).map(|(x, y)| a * x + y).collect());
        for (c, d) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            prop_assert!((c - d).norm() <= 1e-13 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn second_derivative_of_a_mode_is_the_squared_multiplier() {
    let grid = PeriodicGrid::one_d(32).unwrap();
    let f = SurfaceField::mode(grid, [3, 0], 1.0, 0.5);
    let d2 = f.derivative([2, 0]).unwrap();
    assert!((&d2 - &f.scale(-9.0)).sup_norm() < 1e-12);
    assert_eq!(f.derivative([0, 0]).unwrap().coeffs(), f.coeffs());
}

#[test]
fn derivative_order_is_limited() {
    let grid = PeriodicGrid::one_d(16).unwrap();
    assert!(SurfaceField::zeros(grid).derivative([4, 3]).is_err());
}

#[test]
fn homogeneous_half_norm_of_cosine_is_its_l2_norm() {
    let grid = PeriodicGrid::one_d(16).unwrap();
    let f = SurfaceField::from_fn(grid, |x| x[0].cos());
    let half = sobolev_norm(&f, SobolevIndex::homogeneous(0.5));
    assert!((half - f.l2_norm()).abs() < 1e-15);
    assert!((f.l2_norm() - 0.5_f64.sqrt()).abs() < 1e-15);
}

#[test]
fn two_thirds_rule_removes_the_top_mode() {
    let grid = PeriodicGrid::one_d(16).unwrap();
    let f = SurfaceField::mode(grid, [7, 0], 1.0, 0.0);
    let cut = f.dealias(DealiasRule::TwoThirds);
    assert!(cut.sup_norm() <= 1e-14);
    let flat = SurfaceField::constant(grid, 2.0);
    assert!((&flat.dealias(DealiasRule::TwoThirds) - &flat).sup_norm() <= 1e-15);
}
