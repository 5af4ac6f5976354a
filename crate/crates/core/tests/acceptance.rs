//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Identity residuals are measured relative to the magnitude of the compared
//! quantities (floored at one); near the tracking plant's unit-circle poles
//! the raw values reach 1e7 and an absolute 1e-8 would be below f64
//! resolution there.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::FftPlanner;

use regret_filter::analysis::{
    frobenius_norm_sq, norm_report, operator_norm_sq, regret_norm, sigma_max_complex,
    FrequencyGrid, Response,
};
use regret_filter::baselines::hinf_optimal;
use regret_filter::linalg::{solve_stein, spectral_radius, Matrix};
use regret_filter::model_io::{builtin_scalar, builtin_tracking};
use regret_filter::sim::{burn_in_steps, simulate, DisturbanceSpec};
use regret_filter::state_space::{
    error_row, eval_plant_channels, eval_transfer, CMatrix, LtiFilter, StateSpaceModel,
};
use regret_filter::synthesis::{
    anticausal_part, causal_anticausal_split, composed_filter_sample, delta_factor,
    existence_check, nabla_factor, nehari_sample, noncausal_from_channels, synthesize,
    SynthesisResult,
};

fn tracking() -> StateSpaceModel {
    builtin_tracking(1.0).unwrap()
}

fn both_models() -> Vec<(&'static str, StateSpaceModel)> {
    vec![("scalar", builtin_scalar()), ("tracking", tracking())]
}

fn midpoints(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64)
}

/// Residual scaled by the larger of one and the compared magnitudes.
fn rel_residual(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0)
}

fn error_sample(model: &StateSpaceModel, kw: &CMatrix, omega: f64) -> CMatrix {
    let (_, q, m, p) = model.dims();
    let (hw, lw) = eval_plant_channels(model, omega).unwrap();
    error_row(&lw, &hw, kw, q, m, p)
}

fn clairvoyant_sample(model: &StateSpaceModel, omega: f64) -> CMatrix {
    let (hw, lw) = eval_plant_channels(model, omega).unwrap();
    noncausal_from_channels(&hw, &lw).unwrap()
}

struct TableRow {
    name: &'static str,
    reference: [f64; 3],
}

fn measure_table(model: &StateSpaceModel) -> Vec<(&'static str, [f64; 3])> {
    let grid = FrequencyGrid::new(2048).unwrap();
    let synth = synthesize(model, 1e-6).unwrap();
    let (_, hinf) = hinf_optimal(model, 1e-6).unwrap();
    let mut rows = Vec::new();
    for (name, resp) in [
        ("noncausal", Response::Clairvoyant),
        ("regret_opt", Response::Filter(&synth.filter)),
        ("h2", Response::Filter(&synth.kalman)),
        ("hinf", Response::Filter(&hinf)),
    ] {
        let r = norm_report(model, resp, &grid).unwrap();
        rows.push((name, [r.frobenius_sq, r.operator_sq, r.regret]));
    }
    rows
}

fn check_cells(
    label: &str,
    rows: &[TableRow],
    measured: &[(&'static str, [f64; 3])],
    tol: f64,
) -> Vec<String> {
    let mut failures = Vec::new();
    for row in rows {
        let got = measured.iter().find(|(n, _)| *n == row.name).unwrap().1;
        for (i, col) in ["frobenius_sq", "operator_sq", "regret"].iter().enumerate() {
            let ok = (got[i] - row.reference[i]).abs() <= tol;
            println!(
                "  {label} {}/{col}: measured {:.4} vs {:.2} (±{tol:.2}) -> {}",
                row.name,
                got[i],
                row.reference[i],
                if ok { "PASS" } else { "FAIL" }
            );
            if !ok {
                failures.push(format!(
                    "{}/{col}: {:.4} vs {:.2}",
                    row.name, got[i], row.reference[i]
                ));
            }
        }
    }
    failures
}

#[test]
fn criterion_01_scalar_table() {
    let start = std::time::Instant::now();
    let measured = measure_table(&builtin_scalar());
    let rows = [
        TableRow { name: "noncausal", reference: [0.46, 0.99, 0.0] },
        TableRow { name: "regret_opt", reference: [0.65, 1.1, 0.38] },
        TableRow { name: "h2", reference: [0.6, 1.27, 0.7] },
        TableRow { name: "hinf", reference: [0.94, 0.99, 0.71] },
    ];
    let failures = check_cells("criterion 1", &rows, &measured, 0.02);
    let elapsed = start.elapsed();
    println!("  criterion 1 runtime: {elapsed:.2?}");
    assert!(elapsed.as_secs_f64() < 5.0, "table must reproduce in under 5 s");
    println!(
        "criterion 1 (scalar table, 12 cells +-0.02): {}",
        if failures.is_empty() { "PASS" } else { "FAIL" }
    );
    assert!(failures.is_empty(), "cells out of tolerance: {failures:?}");
}

#[test]
fn criterion_02_tracking_table() {
    let measured = measure_table(&tracking());
    let anchor = measured.iter().find(|(n, _)| *n == "noncausal").unwrap().1[0];
    let anchor_ok = (anchor - 0.39).abs() <= 0.03;
    println!(
        "  criterion 2 anchor noncausal/frobenius_sq: {anchor:.4} vs 0.39 -> {}",
        if anchor_ok { "PASS" } else { "FAIL (delta_t ambiguity; degrade to items 3-9)" }
    );
    if !anchor_ok {
        // With the anchor gone the table is not comparable; items 3-9 cover
        // the tracking model on their own.
        return;
    }
    let rows = [
        TableRow { name: "noncausal", reference: [0.39, 1.0, 0.0] },
        TableRow { name: "regret_opt", reference: [0.82, 1.24, 0.65] },
        TableRow { name: "h2", reference: [0.77, 1.4, 1.02] },
        TableRow { name: "hinf", reference: [0.97, 1.0, 0.95] },
    ];
    let failures = check_cells("criterion 2", &rows, &measured, 0.03);
    println!(
        "criterion 2 (tracking table, anchor + 11 cells +-0.03): {}",
        if failures.is_empty() { "PASS" } else { "FAIL" }
    );
    assert!(failures.is_empty(), "cells out of tolerance: {failures:?}");
}

#[test]
fn criterion_03_optimal_regret_certification() {
    for (name, model) in both_models() {
        let synth = synthesize(&model, 1e-6).unwrap();
        let gs2 = synth.gamma_star * synth.gamma_star;
        let grid = FrequencyGrid::new(2048).unwrap();
        let (measured, _) = regret_norm(&model, &synth.filter, &grid).unwrap();
        let ok = measured >= gs2 - 1e-4 && measured <= gs2 + 1e-6;
        println!(
            "criterion 3 ({name}): regret max {measured:.9} vs gamma*^2 {gs2:.9} -> {}",
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok, "{name}: {measured} not in [{} , {}]", gs2 - 1e-4, gs2 + 1e-6);
    }
}

#[test]
fn criterion_04_existence_condition_consistency() {
    for (name, model) in both_models() {
        let synth = synthesize(&model, 1e-6).unwrap();
        let at_star = synth.workspace.condition_value;
        let below = existence_check(&model, 0.99 * synth.gamma_star).unwrap().0;
        let above = existence_check(&model, 1.01 * synth.gamma_star).unwrap().0;
        let ok = at_star >= 1.0 - 1e-5 && at_star <= 1.0 && below > 1.0 && above < 1.0;
        println!(
            "criterion 4 ({name}): value(gamma*) = {at_star:.8}, value(0.99 g*) = {below:.6}, value(1.01 g*) = {above:.6} -> {}",
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok);
    }
}

#[test]
fn criterion_05_factorization_identities() {
    for (name, model) in both_models() {
        let synth = synthesize(&model, 1e-6).unwrap();
        for factor in [1.0, 2.0] {
            let gamma = synth.gamma_star * factor;
            let ws = regret_filter::synthesis::build_workspace(&model, gamma).unwrap();
            let (_, q, m, p) = model.dims();
            let mut delta_res: f64 = 0.0;
            let mut nabla_res: f64 = 0.0;
            for omega in midpoints(256) {
                let (delta, _) = delta_factor(&ws, omega).unwrap();
                let (hw, lw) = eval_plant_channels(&model, omega).unwrap();
                let lhs = &delta * delta.adjoint();
                let rhs = CMatrix::identity(m, m) + &hw * hw.adjoint();
                delta_res = delta_res.max(rel_residual(&lhs, &rhs));

                let (nabla, _) = nabla_factor(&ws, omega).unwrap();
                let g2 = Complex64::new(gamma * gamma, 0.0);
                let inner = CMatrix::identity(q, q) + hw.adjoint() * &hw;
                let rhs = (CMatrix::identity(p, p)
                    + &lw * inner.lu().try_inverse().unwrap() * lw.adjoint() / g2)
                    / g2;
                let lhs = nabla.adjoint() * &nabla;
                nabla_res = nabla_res.max(rel_residual(&lhs, &rhs));
            }
            let ok = delta_res < 1e-8 && nabla_res < 1e-8;
            println!(
                "criterion 5 ({name}, gamma = {factor} gamma*): delta residual {delta_res:.2e}, nabla residual {nabla_res:.2e} -> {}",
                if ok { "PASS" } else { "FAIL" }
            );
            assert!(ok);
        }
    }
}

/// Tap-energy split of frequency samples: (nonnegative-tap, negative-tap)
/// energies from an inverse FFT of midpoint samples.
fn tap_split(samples: &[CMatrix]) -> (f64, f64) {
    let n = samples.len();
    let (rows, cols) = (samples[0].nrows(), samples[0].ncols());
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut causal = 0.0;
    let mut anticausal = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let mut buf: Vec<rustfft::num_complex::Complex<f64>> = samples
                .iter()
                .map(|s| rustfft::num_complex::Complex::new(s[(i, j)].re, s[(i, j)].im))
                .collect();
            fft.process(&mut buf);
            for (tau, v) in buf.iter().enumerate() {
                // bins [0, n/2) are taps 0..n/2 (causal side, includes the
                // feedthrough tap), bins [n/2, n) are negative taps.
                if tau < n / 2 {
                    causal += v.norm_sqr();
                } else {
                    anticausal += v.norm_sqr();
                }
            }
        }
    }
    (causal, anticausal)
}

#[test]
fn criterion_06_decomposition_identity() {
    for (name, model) in both_models() {
        let synth = synthesize(&model, 1e-6).unwrap();
        let ws = &synth.workspace;
        let mut sum_res: f64 = 0.0;
        for omega in midpoints(256) {
            let (t, s) = causal_anticausal_split(ws, omega).unwrap();
            let (nabla, _) = nabla_factor(ws, omega).unwrap();
            let (delta, _) = delta_factor(ws, omega).unwrap();
            let (hw, lw) = eval_plant_channels(&model, omega).unwrap();
            let rhs = nabla * lw * hw.adjoint() * delta.adjoint().lu().try_inverse().unwrap();
            sum_res = sum_res.max(rel_residual(&(t + s), &rhs));
        }
        // T is strictly anticausal for every model; its taps decay with the
        // stable closed loop.
        let t_samples: Vec<CMatrix> = midpoints(2048)
            .map(|omega| anticausal_part(ws, omega).unwrap())
            .collect();
        let (t_causal, t_anti) = tap_split(&t_samples);
        let t_frac = t_causal / (t_causal + t_anti).max(1e-300);
        // The causal part S has an l2 tap expansion only when the plant has
        // no poles on the unit circle (the tracking kinematics do), so the
        // S-side split is checked on models with a stable plant.
        let mut s_frac = 0.0;
        if spectral_radius(&model.f) < 1.0 {
            let s_samples: Vec<CMatrix> = midpoints(2048)
                .map(|omega| causal_anticausal_split(ws, omega).unwrap().1)
                .collect();
            let (s_causal, s_anti) = tap_split(&s_samples);
            s_frac = s_anti / (s_causal + s_anti).max(1e-300);
        }
        let ok = sum_res < 1e-8 && t_frac < 1e-8 && s_frac < 1e-8;
        println!(
            "criterion 6 ({name}): sum residual {sum_res:.2e}, T causal-tap fraction {t_frac:.2e}, S anticausal-tap fraction {s_frac:.2e} -> {}",
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok);
    }
}

#[test]
fn criterion_07_nehari_certificate() {
    for (name, model) in both_models() {
        let synth = synthesize(&model, 1e-6).unwrap();
        let mut sup: f64 = 0.0;
        for omega in midpoints(4096) {
            let kn = nehari_sample(&synth.nehari, omega).unwrap();
            let t = anticausal_part(&synth.workspace, omega).unwrap();
            sup = sup.max(sigma_max_complex(&(kn - t)));
        }
        let ok = sup <= 1.0 + 1e-6;
        println!(
            "criterion 7 ({name}): ||K_N - T||_inf = {sup:.9} -> {}",
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok);
    }
}

#[test]
fn criterion_08_structural_checks() {
    for (name, model) in both_models() {
        let n = model.f.nrows();
        let synth = synthesize(&model, 1e-6).unwrap();
        let dim_ok = synth.filter.dim() == 3 * n;
        let rho = spectral_radius(&synth.filter.a);
        let mut worst: f64 = 0.0;
        for omega in midpoints(256) {
            let direct = eval_transfer(&synth.filter, omega).unwrap();
            let composed =
                composed_filter_sample(&synth.workspace, &synth.nehari, &synth.kalman, omega)
                    .unwrap();
            worst = worst.max((direct - composed).norm());
        }
        let ok = dim_ok && rho < 1.0 && worst < 1e-8;
        println!(
            "criterion 8 ({name}): dim {} (want {}), rho(A) = {rho:.4}, factor-eval gap {worst:.2e} -> {}",
            synth.filter.dim(),
            3 * n,
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok);
    }
}

fn random_stable_filter(rng: &mut ChaCha20Rng, states: usize, p: usize, m: usize) -> LtiFilter {
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    let mut a = Matrix::from_fn(states, states, |_, _| unit());
    let rho = spectral_radius(&a);
    if rho > 0.0 {
        a *= 0.8 / rho.max(0.8);
    }
    let b = Matrix::from_fn(states, m, |_, _| unit());
    let c = Matrix::from_fn(p, states, |_, _| unit());
    let d = Matrix::from_fn(p, m, |_, _| unit());
    LtiFilter::new(a, b, c, d).unwrap()
}

#[test]
fn criterion_09_algebraic_identities_random_filters() {
    for (name, model) in both_models() {
        let (_, _, m, p) = model.dims();
        let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
        let mut invariance: f64 = 0.0;
        let mut square: f64 = 0.0;
        for _ in 0..10 {
            let filt = random_stable_filter(&mut rng, 2, p, m);
            for omega in midpoints(64) {
                let kw = eval_transfer(&filt, omega).unwrap();
                let k0 = clairvoyant_sample(&model, omega);
                let t = error_sample(&model, &kw, omega);
                let t0 = error_sample(&model, &k0, omega);
                // T_K T_K0* = T_K0 T_K0*
                let lhs = &t * t0.adjoint();
                let rhs = &t0 * t0.adjoint();
                invariance = invariance.max(rel_residual(&lhs, &rhs));
                // T_K T_K* - T_K0 T_K0* = (K - K0)(I + H H*)(K - K0)*
                let (hw, _) = eval_plant_channels(&model, omega).unwrap();
                let diff = &kw - &k0;
                let gram = CMatrix::identity(hw.nrows(), hw.nrows()) + &hw * hw.adjoint();
                let lhs = &t * t.adjoint() - &t0 * t0.adjoint();
                let rhs = &diff * gram * diff.adjoint();
                square = square.max(rel_residual(&lhs, &rhs));
            }
        }
        let ok = invariance < 1e-8 && square < 1e-8;
        println!(
            "criterion 9 ({name}): invariance residual {invariance:.2e}, completion-of-square residual {square:.2e} -> {}",
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok);
    }
}

#[test]
fn criterion_10_solver_residuals() {
    for (name, model) in both_models() {
        let synth = synthesize(&model, 1e-6).unwrap();
        let ws = &synth.workspace;
        let f = &model.f;
        let g = &model.g;
        let h = &model.h;
        let l = &model.l;
        let gamma = ws.gamma;
        let rel = |lhs: &Matrix, rhs: &Matrix| -> f64 {
            (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0)
        };
        // P equation
        let p_rhs = g * g.transpose() + f * &ws.p * f.transpose()
            - f * &ws.p * h.transpose() * ws.re_p.clone().lu().try_inverse().unwrap()
                * h * &ws.p * f.transpose();
        let res_p = rel(&ws.p, &p_rhs);
        // W equation
        let w_rhs = h.transpose() * h + l.transpose() * l / (gamma * gamma)
            + f.transpose() * &ws.w * f
            - ws.k_w.transpose() * &ws.r_w * &ws.k_w;
        let res_w = rel(&ws.w, &w_rhs);
        // Q equation
        let q_rhs = -(g * ws.r_w.clone().lu().try_inverse().unwrap() * g.transpose())
            + &ws.f_w * &ws.q * ws.f_w.transpose()
            - &ws.k_q * &ws.r_q * ws.k_q.transpose();
        let res_q = rel(&ws.q, &q_rhs);
        // U equation
        let u_rhs = &ws.k_q * l * &ws.p * ws.f_p.transpose() + &ws.f_q * &ws.u * ws.f_p.transpose();
        let res_u = rel(&ws.u, &u_rhs);
        // Pi and Z equations
        let pi_rhs = ws.f_p.transpose() * &ws.pi * &ws.f_p
            + h.transpose() * ws.re_p.clone().lu().try_inverse().unwrap() * h;
        let res_pi = rel(&ws.pi, &pi_rhs);
        let pu = &ws.p - &ws.u;
        let z_rhs = &ws.f_p * &ws.z * ws.f_p.transpose()
            + &ws.f_p * pu.transpose() * l.transpose()
                * ws.r_q.clone().lu().try_inverse().unwrap()
                * l * pu * ws.f_p.transpose();
        let res_z = rel(&ws.z, &z_rhs);
        let worst = res_p.max(res_w).max(res_q).max(res_u).max(res_pi).max(res_z);
        let ok = worst <= 1e-10;
        println!(
            "criterion 10 ({name}): residuals P {res_p:.1e} W {res_w:.1e} Q {res_q:.1e} U {res_u:.1e} Pi {res_pi:.1e} Z {res_z:.1e} -> {}",
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(ok);
    }
    // Stein solutions match the truncated series for rho(A) <= 0.95
    let a = Matrix::from_row_slice(2, 2, &[0.95, 0.3, 0.0, 0.5]);
    let c = Matrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
    let x = solve_stein(&a, &c).unwrap();
    let mut oracle = c.clone();
    let mut ak = a.clone();
    loop {
        let term = &ak * &c * ak.transpose();
        oracle += &term;
        ak = &a * ak;
        if term.norm() < 1e-16 {
            break;
        }
    }
    let res = (&x - &oracle).norm() / oracle.norm();
    println!("criterion 10 (stein series): residual {res:.2e} -> {}", if res < 1e-10 { "PASS" } else { "FAIL" });
    assert!(res < 1e-10);
}

#[test]
fn criterion_11_simulation_orderings() {
    let model = tracking();
    let synth: SynthesisResult = synthesize(&model, 1e-6).unwrap();
    let (_, hinf) = hinf_optimal(&model, 1e-6).unwrap();
    let filters: [(&str, &LtiFilter); 3] = [
        ("h2", &synth.kalman),
        ("hinf", &hinf),
        ("regret_opt", &synth.filter),
    ];
    let grid = FrequencyGrid::new(2048).unwrap();

    // Gaussian: the Kalman filter wins and sits on its Frobenius norm
    let gauss = simulate(&model, &filters, &DisturbanceSpec::gaussian(100_000, 2024)).unwrap();
    let finals: Vec<f64> = gauss.runs.iter().map(|r| r.final_avg()).collect();
    let h2_best = finals[0] <= finals[1] && finals[0] <= finals[2];
    let fro = frobenius_norm_sq(&model, &synth.kalman, &grid).unwrap();
    let burn = burn_in_steps(&filters, 100_000);
    let plateau = gauss.runs[0].plateau_avg(burn);
    let h2_matches = (plateau - fro).abs() / fro < 0.05;
    let regret_not_worst_gauss = finals[2] <= finals[0].max(finals[1]);
    println!(
        "criterion 11 (gaussian): finals h2 {:.4} hinf {:.4} regret {:.4}; h2 plateau {plateau:.4} vs frobenius {fro:.4}",
        finals[0], finals[1], finals[2]
    );

    // Adversarial: each filter faces its own worst sinusoid; the H-infinity
    // filter ends lowest and the regret filter is never the worst
    let adv = simulate(&model, &filters, &DisturbanceSpec::adversarial(100_000)).unwrap();
    let finals_adv: Vec<f64> = adv.runs.iter().map(|r| r.final_avg()).collect();
    let hinf_best = finals_adv[1] <= finals_adv[0] && finals_adv[1] <= finals_adv[2];
    let regret_not_worst_adv = finals_adv[2] <= finals_adv[0].max(finals_adv[1]);
    println!(
        "criterion 11 (adversarial): finals h2 {:.4} hinf {:.4} regret {:.4}",
        finals_adv[0], finals_adv[1], finals_adv[2]
    );
    let ok = h2_best && h2_matches && regret_not_worst_gauss && hinf_best && regret_not_worst_adv;
    println!("criterion 11 (simulation orderings): {}", if ok { "PASS" } else { "FAIL" });
    assert!(h2_best, "Kalman filter must win under white noise");
    assert!(h2_matches, "plateau {plateau} vs frobenius {fro}");
    assert!(hinf_best, "H-infinity filter must win under adversarial input");
    assert!(regret_not_worst_gauss && regret_not_worst_adv);
}
