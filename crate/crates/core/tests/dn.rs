use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waves_core::dn::{
    coercivity_ratio, commutator_residual, dn_apply, dn_contraction_gap, dn_elliptic, dn_flat, dn_inverse, DnBackend,
    FluidConfig,
};
use waves_core::spectral::random::{random_field, random_field_with_w_norm, FieldSpec};
use waves_core::spectral::{hs_norm, HalfNormWeight, PeriodicGrid, SurfaceField};
use waves_core::Error;

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::one_d(n).unwrap()
}

fn oracle() -> DnBackend {
    DnBackend::elliptic(64, 1e-13)
}

fn rel(a: &SurfaceField, b: &SurfaceField, s: f64) -> f64 {
    hs_norm(&(a - b), s) / hs_norm(b, s)
}

#[test]
fn elliptic_solver_reproduces_the_flat_multiplier() {
    let cfg = FluidConfig::finite(1.0, grid(128));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_field(cfg.grid, &FieldSpec::smooth(24), &mut rng);
    let (out, report) = dn_elliptic(&SurfaceField::zeros(cfg.grid), &g, &cfg, 64, 1e-12).unwrap();
    assert!(report.residual <= 1e-12);
    assert!(rel(&out, &dn_flat(&g, &cfg), 3.0) <= 1e-8);
}

#[test]
fn deep_water_mode_is_scaled_by_its_wavenumber() {
    let cfg = FluidConfig::infinite(grid(64));
    let g = SurfaceField::mode(cfg.grid, [2, 0], 0.0, 1.0);
    let out = dn_apply(&SurfaceField::zeros(cfg.grid), &g, &cfg, &oracle()).unwrap();
    assert!(rel(&out, &g.scale(2.0), 0.0) <= 1e-8);
}

/// Series error against the elliptic oracle over `a ∈ {0.0125, 0.025, 0.05}`.
fn series_error_slope(order: usize) -> f64 {
    let cfg = FluidConfig::finite(1.0, grid(64));
    let g = SurfaceField::mode(cfg.grid, [1, 0], 1.0, 0.0);
    let amps = [0.0125, 0.025, 0.05];
    let errs: Vec<f64> = amps
        .iter()
        .map(|&a| {
            let eta = SurfaceField::mode(cfg.grid, [1, 0], a, 0.0);
            let cs = dn_apply(&eta, &g, &cfg, &DnBackend::craig_sulem(order)).unwrap();
            let ex = dn_apply(&eta, &g, &cfg, &oracle()).unwrap();
            hs_norm(&(&cs - &ex), 0.0)
        })
        .collect();
    (errs[2] / errs[0]).ln() / (amps[2] / amps[0]).ln()
}

#[test]
fn series_truncation_error_has_the_expected_order() {
    for order in 1..=3 {
        let slope = series_error_slope(order);
        let expected = (order + 1) as f64;
        assert!((slope - expected).abs() <= 0.15 * expected, "order {order}: slope {slope}");
    }
}

#[test]
fn inverse_undoes_the_operator_on_deep_troughs() {
    let cfg = FluidConfig::finite(1.0, grid(64));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let raw = random_field(cfg.grid, &FieldSpec::smooth(5), &mut rng);
        let eta = raw.scale(0.7 / -raw.min_value());
        let g = random_field(cfg.grid, &FieldSpec::smooth(12), &mut rng);
        let h = dn_apply(&eta, &g, &cfg, &oracle()).unwrap();
        let back = dn_inverse(&eta, &h, &cfg, &oracle(), 1e-11).unwrap();
        assert!(rel(&back, &g, 0.0) <= 1e-9);
    }
}

#[test]
fn flat_inverse_of_cosine() {
    let cfg = FluidConfig::finite(1.0, grid(32));
    let h = SurfaceField::mode(cfg.grid, [1, 0], 1.0, 0.0);
    let g = dn_inverse(&SurfaceField::zeros(cfg.grid), &h, &cfg, &oracle(), 1e-12).unwrap();
    assert!(rel(&g, &h.scale(1.0 / 1.0_f64.tanh()), 0.0) <= 1e-10);
    let c = SurfaceField::constant(cfg.grid, 1.0);
    assert!(matches!(
        dn_inverse(&SurfaceField::zeros(cfg.grid), &c, &cfg, &oracle(), 1e-12),
        Err(Error::MeanNotZero { .. })
    ));
}

#[test]
fn contraction_gap_is_linear_in_the_surface_difference() {
    let cfg = FluidConfig::finite(1.0, grid(64));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eta = random_field_with_w_norm(cfg.grid, &FieldSpec::smooth(4), 2, 0.2, &mut rng);
    let w = random_field_with_w_norm(cfg.grid, &FieldSpec::smooth(4), 2, 0.01, &mut rng);
    let g = random_field(cfg.grid, &FieldSpec::smooth(8), &mut rng);
    let gap = |h: f64| dn_contraction_gap(&eta, &w.axpy(h, &eta), &g, &cfg, &oracle(), 3.0).unwrap();
    let (full, half) = (gap(1.0), gap(0.5));
    assert!((full / half - 2.0).abs() <= 0.2, "ratio {}", full / half);
    assert!(gap(0.0) <= 1e-10 * full.max(1.0));
    let scaled = dn_contraction_gap(&eta, &w.axpy(1.0, &eta), &g.scale(0.5), &cfg, &oracle(), 3.0).unwrap();
    assert!((scaled / full - 0.5).abs() <= 1e-6);
}

#[test]
fn coercivity_ratio_stays_bounded_below_for_steep_surfaces() {
    let cfg = FluidConfig::finite(1.0, grid(128));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for _ in 0..4 {
        // slope at most one, trough at least 0.3 above the bottom
        let raw = random_field(cfg.grid, &FieldSpec::smooth(4), &mut rng);
        let eta = raw.scale((1.0 / raw.partial(0).sup_norm()).min(0.7 / -raw.min_value()));
        assert!(eta.min_value() + 1.0 >= 0.3 - 1e-12);
        for _ in 0..5 {
            let g = random_field(cfg.grid, &FieldSpec::smooth(16), &mut rng);
            worst = worst.min(coercivity_ratio(&eta, &g, &cfg, &oracle(), HalfNormWeight::Standard).unwrap());
        }
    }
    assert!(worst >= 0.1, "minimum ratio {worst}");
}

#[test]
fn second_order_commutator_is_a_composition() {
    let cfg = FluidConfig::finite(1.0, grid(64));
    let eta = SurfaceField::from_fn(cfg.grid, |x| 0.1 * x[0].sin() + 0.05 * (2.0 * x[0]).cos());
    let f = SurfaceField::from_fn(cfg.grid, |x| (3.0 * x[0]).cos() + 0.3 * (5.0 * x[0]).sin());
    let backend = oracle();
    let c2 = commutator_residual(&eta, &f, [2, 0], 0.5, &cfg, &backend).unwrap().field;
    let c1 = commutator_residual(&eta, &f, [1, 0], 0.5, &cfg, &backend).unwrap().field;
    let c1d = commutator_residual(&eta, &f.partial(0), [1, 0], 0.5, &cfg, &backend).unwrap().field;
    let composed = &c1.partial(0) + &c1d;
    assert!(hs_norm(&(&c2 - &composed), 0.0) <= 1e-9 * hs_norm(&f, 2.0));
}
