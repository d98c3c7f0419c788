mod common;

use nalgebra::DMatrix;
use vibropol::models::{
    extract_params, lambda_sweep, model_modes, two_mode, ModelVariant, SweepSettings, TwoModeParams,
};
use vibropol::pipeline::{run_pipeline, PipelineSettings};
use vibropol::presets::{co2_analogue, pinned_triatomic, single_oscillator};
use vibropol::Error;

fn settings() -> PipelineSettings {
    PipelineSettings::default()
}

#[test]
fn full_model_reproduces_pipeline_in_mode_basis() {
    let (sys, surf) = pinned_triatomic([[0.03, 0.01, 0.04], [0.0, 0.05, -0.02]]);
    let params = extract_params(&sys, &surf, &settings()).unwrap();
    let result = run_pipeline(&sys, &surf, &settings()).unwrap();
    let fcs = &result.force_constants;

    let nr = sys.n_nuclear_dof();
    let np = sys.n_photons();
    let mut basis = DMatrix::zeros(nr + np, nr + np);
    basis.view_mut((0, 0), (nr, nr)).copy_from(&params.eta0);
    basis.view_mut((nr, nr), (np, np)).fill_with_identity();
    let in_modes = basis.transpose() * fcs.full_matrix() * &basis;
    let model = params.model_matrix(ModelVariant::Full).unwrap();
    assert!(common::rel_diff(&model, &in_modes) < 1e-9);

    let modes = model_modes(&params, ModelVariant::Full).unwrap();
    for (m, p) in modes.iter().zip(&result.modes) {
        assert!((m.omega - p.omega).abs() <= 1e-9 * p.omega);
    }
}

#[test]
fn xi_is_symmetric() {
    let (sys, surf) = pinned_triatomic([[0.05, 0.02, 0.04], [0.01, 0.06, -0.03]]);
    let p = extract_params(&sys, &surf, &settings()).unwrap();
    assert!((&p.xi - p.xi.transpose()).amax() <= 1e-9);
}

#[test]
fn maxwell_relation_holds() {
    for lambda in [0.02, 0.05, 0.1] {
        let (sys, surf) = pinned_triatomic([[lambda, 0.3 * lambda, 0.5 * lambda], [0.0, lambda, -0.4 * lambda]]);
        let report = extract_params(&sys, &surf, &settings())
            .unwrap()
            .maxwell_check()
            .unwrap();
        assert!(
            report.max_residual() <= 1e-7 * report.scale.max(1.0),
            "λ = {lambda}: {report:?}"
        );
    }
}

#[test]
fn maxwell_relation_as_printed_misses_the_response_sign() {
    let (sys, surf) = single_oscillator(2000.0, 2000.0, 0.1, 0.4, 8.0, 0.2);
    let report = extract_params(&sys, &surf, &settings())
        .unwrap()
        .maxwell_check()
        .unwrap();
    assert!(report.max_residual() <= 1e-7 * report.scale);
    assert!(report.max_residual_as_printed() > 1e-3 * report.scale);
}

#[test]
fn zero_coupling_models_give_bare_frequencies() {
    let (sys, surf) = pinned_triatomic([[0.0; 3], [0.0; 3]]);
    let p = extract_params(&sys, &surf, &settings()).unwrap();
    let mut bare: Vec<f64> = p.omega_sq.iter().map(|w| w.sqrt()).collect();
    bare.extend(p.photon_modes.iter().map(|m| m.omega));
    bare.sort_by(f64::total_cmp);
    for v in ModelVariant::ALL {
        let modes = model_modes(&p, v).unwrap();
        for (m, b) in modes.iter().zip(&bare) {
            assert!((m.omega - b).abs() <= 1e-12 * b);
        }
    }
}

#[test]
fn one_dimensional_photon_frequency_shift() {
    let (lambda, alpha) = (0.08, 5.0);
    let (sys, surf) = single_oscillator(2000.0, 2100.0, lambda, 0.3, alpha, 0.1);
    let p = extract_params(&sys, &surf, &settings()).unwrap();
    let two = TwoModeParams::from_model(&p, ModelVariant::Full, 0, 0);
    let z_mode = (0..3)
        .max_by(|&a, &b| p.dmu_dn0[(2, a)].abs().total_cmp(&p.dmu_dn0[(2, b)].abs()))
        .unwrap();
    let r = TwoModeParams::from_model(&p, ModelVariant::Full, z_mode, 0)
        .unwrap()
        .solve();
    assert!(two.is_ok());
    let wq = sys.photon_modes()[0].omega;
    let expected = wq * wq / (1.0 + alpha * lambda * lambda);
    assert!((r.omega_q_eff.powi(2) - expected).abs() <= 1e-9 * expected);
}

#[test]
fn two_mode_reduction_matches_pipeline() {
    let (sys, surf) = single_oscillator(2000.0, 2000.0, 0.05, 0.3, 4.0, 0.1);
    let p = extract_params(&sys, &surf, &settings()).unwrap();
    assert!(matches!(two_mode(&p, ModelVariant::Full), Err(Error::NotTwoMode(_))));
    let result = run_pipeline(&sys, &surf, &settings()).unwrap();
    let z_mode = (0..3)
        .max_by(|&a, &b| p.dmu_dn0[(2, a)].abs().total_cmp(&p.dmu_dn0[(2, b)].abs()))
        .unwrap();
    let r = TwoModeParams::from_model(&p, ModelVariant::Full, z_mode, 0)
        .unwrap()
        .solve();
    let coupled: Vec<f64> = result
        .modes
        .iter()
        .filter(|m| m.photon_character > 1e-12)
        .map(|m| m.omega)
        .collect();
    assert_eq!(coupled.len(), 2);
    assert!((coupled[0] - r.omega_minus).abs() <= 1e-9 * r.omega_minus);
    assert!((coupled[1] - r.omega_plus).abs() <= 1e-9 * r.omega_plus);
}

#[test]
fn hopfield_perturbative_branch_is_symmetric_at_resonance() {
    let (sys, surf) = single_oscillator(2000.0, 2000.0, 0.05, 0.3, 4.0, 0.1);
    let p = extract_params(&sys, &surf, &settings()).unwrap();
    let z_mode = (0..3)
        .max_by(|&a, &b| p.dmu_dn0[(2, a)].abs().total_cmp(&p.dmu_dn0[(2, b)].abs()))
        .unwrap();
    let r = TwoModeParams::from_model(&p, ModelVariant::Hopfield, z_mode, 0)
        .unwrap()
        .solve();
    let w = sys.photon_modes()[0].omega;
    let up = r.omega_plus_perturbative - w;
    let down = w - r.omega_minus_perturbative;
    assert!(up > 0.0);
    assert!((up - down).abs() <= 1e-14 * w);
}

#[test]
fn perturbative_and_exact_branch_share_first_order_splitting() {
    let base = TwoModeParams {
        omega_n: 0.0111,
        omega_q: 0.0110,
        xi: 0.0,
        z: 0.5,
        lambda: 0.0,
        dmu_dn: 0.02,
        dmu_dq: 0.0,
        quadratic_term: false,
    };
    let at = |l: f64| TwoModeParams { lambda: l, ..base }.solve();
    let (l1, l2) = (1e-3, 2e-3);
    let slope = |f: &dyn Fn(&vibropol::models::TwoModeResult) -> f64| {
        let (a, b) = (at(l1), at(l2));
        (f(&b) - f(&a)) / (b.lambda_eff - a.lambda_eff)
    };
    let exact = slope(&|r| r.splitting());
    let perturbative = slope(&|r| r.splitting_perturbative());
    assert!((exact - perturbative).abs() <= 0.01 * exact.abs());
}

#[test]
fn sweep_variants_coincide_without_coupling_and_diverge_with_it() {
    let (sys, surf) = co2_analogue(0.05);
    let lambdas = [0.0, 0.025, 0.05, 0.075, 0.1];
    let table = lambda_sweep(&sys, &surf, &lambdas, &settings(), &SweepSettings::default()).unwrap();
    assert!((table.target_mode_cm1 - 2436.0).abs() < 5.0);
    let first = &table.rows[0];
    for v in ModelVariant::ALL {
        let p = first.variant(v);
        assert!((p.minus - first.pipeline.minus).abs() < 1e-6);
        assert!((p.plus - first.pipeline.plus).abs() < 1e-6);
    }
    for row in &table.rows {
        assert!((row.full.minus - row.pipeline.minus).abs() <= 1e-9 * row.pipeline.minus);
        assert!((row.full.plus - row.pipeline.plus).abs() <= 1e-9 * row.pipeline.plus);
    }
    for v in [ModelVariant::Mu2, ModelVariant::Hopfield] {
        let dev: Vec<f64> = table
            .rows
            .iter()
            .map(|r| {
                let p = r.variant(v);
                (p.minus - r.full.minus).abs() + (p.plus - r.full.plus).abs()
            })
            .collect();
        assert!(dev.windows(2).all(|w| w[1] > w[0]), "{v:?}: {dev:?}");
    }
    let dq: Vec<f64> = table.rows.iter().map(|r| r.dmu_dq.abs()).collect();
    assert!(dq.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn force_split_is_required() {
    use vibropol::backend::{GridSample, GridSurface, GridSurfaceSpec};
    let (sys, _) = single_oscillator(2000.0, 2000.0, 0.05, 0.3, 4.0, 0.1);
    let mut samples = Vec::new();
    for x in [-0.1, 0.0, 0.1] {
        samples.push(GridSample {
            displacement: vec![0.0, 0.0, x, 0.0],
            energy: x * x,
            dipole: [0.0, 0.0, x],
        });
    }
    let spec = GridSurfaceSpec::from_samples(vec![0.0; 3], &samples, 2).unwrap();
    let grid = GridSurface::new(spec).unwrap();
    assert!(matches!(
        extract_params(&sys, &grid, &settings()),
        Err(Error::BackendLacksForceSplit)
    ));
}
