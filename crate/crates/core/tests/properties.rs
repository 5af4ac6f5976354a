//! Cross-module properties: norm orderings between the filters, equiripple
//! shape of the optimal regret curve, and stability of every norm under
//! grid doubling.

use regret_filter::analysis::{norm_report, FrequencyGrid, Response};
use regret_filter::baselines::hinf_optimal;
use regret_filter::model_io::{builtin_scalar, builtin_tracking};
use regret_filter::synthesis::synthesize;

#[test]
fn norm_orderings_between_filters() {
    for model in [builtin_scalar(), builtin_tracking(1.0).unwrap()] {
        let grid = FrequencyGrid::new(1024).unwrap();
        let synth = synthesize(&model, 1e-6).unwrap();
        let (_, hinf) = hinf_optimal(&model, 1e-6).unwrap();
        let h2 = norm_report(&model, Response::Filter(&synth.kalman), &grid).unwrap();
        let ro = norm_report(&model, Response::Filter(&synth.filter), &grid).unwrap();
        let hi = norm_report(&model, Response::Filter(&hinf), &grid).unwrap();
        // average-case: Kalman <= regret-optimal <= H-infinity
        assert!(h2.frobenius_sq <= ro.frobenius_sq + 1e-9);
        assert!(ro.frobenius_sq <= hi.frobenius_sq + 1e-9);
        // worst-case: H-infinity <= regret-optimal <= Kalman
        assert!(hi.operator_sq <= ro.operator_sq + 1e-9);
        assert!(ro.operator_sq <= h2.operator_sq + 1e-9);
        // regret: the optimal filter beats both baselines
        assert!(ro.regret <= h2.regret.min(hi.regret) + 1e-9);
    }
}

#[test]
fn optimal_regret_curve_is_near_equiripple_on_scalar() {
    let model = builtin_scalar();
    let synth = synthesize(&model, 1e-6).unwrap();
    let grid = FrequencyGrid::new(1024).unwrap();
    let (_, curve) =
        regret_filter::analysis::regret_norm(&model, &synth.filter, &grid).unwrap();
    let max = curve.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let min = curve.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    assert!(
        (max - min) / max <= 0.05,
        "regret curve ripple {:.4} exceeds 5%",
        (max - min) / max
    );
}

#[test]
fn norms_are_stable_under_grid_doubling() {
    let model = builtin_tracking(1.0).unwrap();
    let synth = synthesize(&model, 1e-6).unwrap();
    let coarse = norm_report(
        &model,
        Response::Filter(&synth.filter),
        &FrequencyGrid::new(2048).unwrap(),
    )
    .unwrap();
    let fine = norm_report(
        &model,
        Response::Filter(&synth.filter),
        &FrequencyGrid::new(4096).unwrap(),
    )
    .unwrap();
    for (a, b) in [
        (coarse.frobenius_sq, fine.frobenius_sq),
        (coarse.operator_sq, fine.operator_sq),
        (coarse.regret, fine.regret),
    ] {
        assert!((a - b).abs() / b.abs().max(1e-300) < 1e-6, "{a} vs {b}");
    }
}
