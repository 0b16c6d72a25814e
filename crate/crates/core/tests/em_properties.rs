mod common;

use common::{random_extended, random_original};
use ppls::em::{
    em_step_extended, em_step_original, fit_extended_em, fit_original_em, EmConfig, GramStats,
    InitStrategy,
};
use ppls::linalg::{max_abs, RngStream};
use ppls::metrics::{align_columns, median};
use ppls::model::{
    population_covariance_extended, population_covariance_original, sample_dataset,
    validate_extended, validate_original, PplsParams,
};

const SLACK: f64 = 1e-8;

#[test]
fn original_population_fixed_point() {
    let mut rng = RngStream::new(11, 0);
    for _ in 0..10 {
        let truth = random_original(8, 6, 3, &mut rng);
        assert!(validate_original(&truth).is_empty());
        let stats = GramStats::population(&population_covariance_original(&truth).unwrap(), 1000);
        let next = em_step_original(&stats, &truth, &EmConfig::default()).unwrap();
        assert!(max_abs(&(&next.w - &truth.w)) <= 1e-6);
        assert!(max_abs(&(&next.c - &truth.c)) <= 1e-6);
        for (a, b) in next.sigma_t.as_slice().iter().zip(truth.sigma_t.as_slice()) {
            assert!((a - b).abs() <= 1e-6);
        }
        for (a, b) in next.b.as_slice().iter().zip(truth.b.as_slice()) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!((next.sigma_e2 - truth.sigma_e2).abs() <= 1e-6);
        assert!((next.sigma_f2 - truth.sigma_f2).abs() <= 1e-6);
        assert!((next.sigma_h2 - truth.sigma_h2).abs() <= 1e-6);
    }
}

#[test]
fn extended_population_fixed_point() {
    let mut rng = RngStream::new(12, 0);
    for _ in 0..10 {
        let truth = random_extended(8, 6, 3, &mut rng);
        assert!(validate_extended(&truth).is_empty());
        let stats = GramStats::population(&population_covariance_extended(&truth).unwrap(), 1000);
        let next = em_step_extended(&stats, &truth, &EmConfig::default()).unwrap();
        assert!(max_abs(&(&next.w - &truth.w)) <= 1e-6);
        assert!(max_abs(&(&next.c - &truth.c)) <= 1e-6);
        assert!(max_abs(&(&next.psi_e - &truth.psi_e)) <= 1e-6);
        assert!(max_abs(&(&next.psi_f - &truth.psi_f)) <= 1e-6);
        for (a, b) in next.sigma_t.as_slice().iter().zip(truth.sigma_t.as_slice()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn extended_em_recovers_weights() {
    let mut rng = RngStream::new(13, 0);
    let truth = random_extended(20, 20, 3, &mut rng);
    let data = sample_dataset(&PplsParams::Extended(truth.clone()), 5000, &mut rng).unwrap();
    let (fit, trace) =
        fit_extended_em(&data.x, &data.y, 3, &EmConfig::default(), &mut rng).unwrap();
    assert!(
        trace.is_monotone(SLACK),
        "max decrease {}",
        trace.max_relative_decrease()
    );
    assert!(validate_extended(&fit).is_empty());
    let a = align_columns(&fit.w, &truth.w).unwrap();
    assert!(median(&a.abs_cos).unwrap() >= 0.9, "{:?}", a.abs_cos);
}

#[test]
fn original_em_recovers_weights() {
    let mut rng = RngStream::new(14, 0);
    let truth = random_original(20, 20, 3, &mut rng);
    let data = sample_dataset(&PplsParams::Original(truth.clone()), 5000, &mut rng).unwrap();
    let (fit, trace) =
        fit_original_em(&data.x, &data.y, 3, &EmConfig::default(), &mut rng).unwrap();
    assert!(
        trace.is_monotone(SLACK),
        "max decrease {}",
        trace.max_relative_decrease()
    );
    assert!(validate_original(&fit).is_empty());
    for (est, reference) in [(&fit.w, &truth.w), (&fit.c, &truth.c)] {
        let a = align_columns(est, reference).unwrap();
        assert!(a.abs_cos.iter().all(|&v| v >= 0.9), "{:?}", a.abs_cos);
    }
}

#[test]
fn monotone_on_many_datasets() {
    let mut rng = RngStream::new(15, 0);
    for rep in 0..6 {
        let n = [30, 100, 400][rep % 3];
        let init = if rep % 2 == 0 {
            InitStrategy::SvdStart
        } else {
            InitStrategy::RandomStart
        };
        let cfg = EmConfig {
            init,
            max_iters: 300,
            ..EmConfig::default()
        };
        let o = random_original(7, 5, 2, &mut rng);
        let d = sample_dataset(&PplsParams::Original(o), n, &mut rng).unwrap();
        let (fit, trace) = fit_original_em(&d.x, &d.y, 2, &cfg, &mut rng).unwrap();
        assert!(
            trace.is_monotone(SLACK),
            "original rep {rep}: {}",
            trace.max_relative_decrease()
        );
        assert!(validate_original(&fit).is_empty());

        let e = random_extended(7, 5, 2, &mut rng);
        let d = sample_dataset(&PplsParams::Extended(e), n, &mut rng).unwrap();
        let (fit, trace) = fit_extended_em(&d.x, &d.y, 2, &cfg, &mut rng).unwrap();
        assert!(
            trace.is_monotone(SLACK),
            "extended rep {rep}: {}",
            trace.max_relative_decrease()
        );
        assert!(validate_extended(&fit).is_empty());
    }
}

#[test]
fn minimal_sample_terminates() {
    let mut rng = RngStream::new(16, 0);
    let truth = random_extended(6, 5, 2, &mut rng);
    let d = sample_dataset(&PplsParams::Extended(truth), 3, &mut rng).unwrap();
    let cfg = EmConfig {
        max_iters: 200,
        ..EmConfig::default()
    };
    fit_extended_em(&d.x, &d.y, 2, &cfg, &mut rng).unwrap();
    fit_original_em(&d.x, &d.y, 2, &cfg, &mut rng).unwrap();
}

#[test]
fn same_seed_same_trace() {
    let run = || {
        let mut rng = RngStream::new(17, 3);
        let truth = random_extended(6, 5, 2, &mut rng);
        let d = sample_dataset(&PplsParams::Extended(truth), 200, &mut rng).unwrap();
        let cfg = EmConfig {
            init: InitStrategy::RandomStart,
            ..EmConfig::default()
        };
        let (e, te) = fit_extended_em(&d.x, &d.y, 2, &cfg, &mut rng).unwrap();
        let (o, to) = fit_original_em(&d.x, &d.y, 2, &cfg, &mut rng).unwrap();
        (e, te, o, to)
    };
    let (e1, te1, o1, to1) = run();
    let (e2, te2, o2, to2) = run();
    assert_eq!(e1, e2);
    assert_eq!(o1, o2);
    assert_eq!(te1.to_csv(), te2.to_csv());
    assert_eq!(to1.to_csv(), to2.to_csv());
}

#[test]
fn original_fit_has_isotropic_noise() {
    let mut rng = RngStream::new(18, 0);
    let truth = random_original(6, 5, 2, &mut rng);
    let d = sample_dataset(&PplsParams::Original(truth), 500, &mut rng).unwrap();
    let (fit, _) = fit_original_em(&d.x, &d.y, 2, &EmConfig::default(), &mut rng).unwrap();
    // the implied x-noise is σ_e² I: Var(x) − W Σ_t Wᵀ is a multiple of the identity
    let cov = population_covariance_original(&fit).unwrap();
    let signal = &fit.w * fit.sigma_t.to_matrix() * fit.w.transpose();
    let noise = cov.var_x - signal;
    let iso = nalgebra::DMatrix::<f64>::identity(6, 6) * fit.sigma_e2;
    assert!(max_abs(&(noise - iso)) < 1e-12);
}

#[test]
fn extended_and_original_agree_at_isotropy() {
    let mut rng = RngStream::new(19, 0);
    let truth = random_original(20, 20, 3, &mut rng);
    let d = sample_dataset(&PplsParams::Original(truth), 5000, &mut rng).unwrap();
    let cfg = EmConfig::default();
    let (o, _) = fit_original_em(&d.x, &d.y, 3, &cfg, &mut rng).unwrap();
    let (e, _) = fit_extended_em(&d.x, &d.y, 3, &cfg, &mut rng).unwrap();
    for (a, b) in [(&e.w, &o.w), (&e.c, &o.c)] {
        let al = align_columns(a, b).unwrap();
        assert!(al.abs_cos.iter().all(|&v| v >= 0.99), "{:?}", al.abs_cos);
    }
}
