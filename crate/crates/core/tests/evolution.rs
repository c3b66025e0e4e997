use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waves_core::dn::{DnBackend, FluidConfig};
use waves_core::evolution::{
    energy, energy_constants, linearized_step, simulate, EvolutionProblem, LinearFlow, LinearProblem, SchemeConfig,
};
use waves_core::spectral::random::{random_field, FieldSpec};
use waves_core::spectral::{hs_norm, PeriodicGrid, SurfaceField};

fn flat_problem(n: usize) -> EvolutionProblem {
    let grid = PeriodicGrid::one_d(n).unwrap();
    EvolutionProblem::new(SurfaceField::zeros(grid), 0.0, FluidConfig::finite(1.0, grid)).unwrap()
}

#[test]
fn small_flat_modes_decay_at_the_multiplier_rate() {
    let prob = flat_problem(32);
    let grid = prob.cfg.grid;
    for k in [1i64, 2, 3] {
        let a = 1e-4;
        let eta0 = SurfaceField::mode(grid, [k, 0], a, 0.0);
        let tr = simulate(&eta0, &prob, &SchemeConfig::imex2(1e-2), &DnBackend::default(), 1.0, 10, None).unwrap();
        let rate = k as f64 * (k as f64).tanh();
        for rec in &tr.records {
            let expected = a * (-rate * rec.t).exp() / 2.0_f64.sqrt();
            assert!((rec.l2 - expected).abs() <= 1e-2 * expected, "k={k} t={}", rec.t);
        }
    }
}

#[test]
fn recorded_mean_is_conserved() {
    let grid = PeriodicGrid::one_d(64).unwrap();
    let cfg = FluidConfig::finite(1.0, grid);
    let phi = SurfaceField::mode(grid, [1, 0], 0.5, 0.0);
    let prob = EvolutionProblem::new(phi, 0.05, cfg).unwrap();
    let eta0 = &SurfaceField::mode(grid, [2, 0], 0.1, 0.05) + &SurfaceField::constant(grid, 0.2);
    let tr = simulate(&eta0, &prob, &SchemeConfig::imex2(2e-2), &DnBackend::default(), 1.0, 5, None).unwrap();
    for rec in &tr.records {
        assert!(rec.l2.is_finite() && rec.hs.is_finite());
        assert!((rec.mean - 0.2).abs() <= 1e-11);
    }
}

#[test]
fn transport_treatments_agree_on_a_short_run() {
    use waves_core::evolution::TransportTreatment;
    let grid = PeriodicGrid::one_d(64).unwrap();
    let cfg = FluidConfig::finite(1.0, grid);
    let phi = SurfaceField::mode(grid, [1, 0], 0.3, 0.0);
    let prob = EvolutionProblem::new(phi, 0.2, cfg).unwrap();
    let eta0 = SurfaceField::mode(grid, [1, 0], 0.1, 0.1);
    let run = |t: TransportTreatment| {
        let scheme = SchemeConfig::imex2(5e-3).with_transport(t);
        simulate(&eta0, &prob, &scheme, &DnBackend::default(), 0.5, 100, None)
            .unwrap()
            .final_state()
            .eta
            .clone()
    };
    let implicit = run(TransportTreatment::Implicit);
    for t in [TransportTreatment::ExactPhase, TransportTreatment::Explicit] {
        assert!((&run(t) - &implicit).l2_norm() <= 1e-5 * implicit.l2_norm());
    }
}

#[test]
fn linear_flat_flow_multiplies_each_step_by_the_decay_factor() {
    let grid = PeriodicGrid::one_d(32).unwrap();
    let lin = LinearProblem {
        eta_star: SurfaceField::zeros(grid),
        gamma: 0.0,
        cfg: FluidConfig::finite(1.0, grid),
    };
    let g = SurfaceField::mode(grid, [1, 0], 1.0, 0.0);
    for dt in [0.1, 0.05] {
        let next = linearized_step(&g, &lin, &SchemeConfig::imex2(dt), &DnBackend::default(), None).unwrap();
        let exact = (-1.0_f64.tanh() * dt).exp();
        // local error of a second-order scheme
        assert!((next.l2_norm() / g.l2_norm() - exact).abs() <= 0.5 * dt.powi(3));
    }
}

#[test]
fn forcing_against_the_generator_freezes_the_state() {
    let grid = PeriodicGrid::one_d(32).unwrap();
    let eta_star = SurfaceField::mode(grid, [1, 0], 0.2, 0.0);
    let lin = LinearProblem {
        eta_star,
        gamma: 0.1,
        cfg: FluidConfig::finite(1.0, grid),
    };
    let scheme = SchemeConfig::imex2(1e-2);
    let mut flow = LinearFlow::new(&lin, &scheme, &DnBackend::default()).unwrap();
    let g = &SurfaceField::mode(grid, [2, 0], 1.0, 0.0) + &SurfaceField::mode(grid, [3, 0], 0.0, 0.5);
    let forcing = flow.generator(&g).unwrap().scale(-1.0);
    let mut state = g.clone();
    for _ in 0..10 {
        state = flow.step(&state, Some(&forcing)).unwrap();
    }
    assert!((&state - &g).l2_norm() <= 1e-6 * g.l2_norm());
}

#[test]
fn energy_is_equivalent_to_the_sobolev_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for dim in [1usize, 2] {
        let grid = PeriodicGrid::new(dim, 32).unwrap();
        for s in 0..=4u32 {
            for a in [0.5, 1.0, 3.0] {
                let (c1, c2) = energy_constants(dim, s, a);
                for _ in 0..5 {
                    let g = random_field(grid, &FieldSpec::smooth(10), &mut rng);
                    let h = hs_norm(&g, s as f64).powi(2);
                    let e = energy(&g, s, a);
                    assert!(c1 * h <= e * (1.0 + 1e-12) && e <= c2 * h * (1.0 + 1e-12), "d={dim} s={s} A={a}");
                }
            }
        }
    }
    assert_eq!(energy(&SurfaceField::zeros(PeriodicGrid::one_d(16).unwrap()), 3, 1.0), 0.0);
}
