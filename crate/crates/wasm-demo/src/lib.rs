//! Browser bindings for the filter-synthesis library: three operations the
//! demo page calls with JSON strings, so no extra marshalling layer is
//! needed on either side.

use wasm_bindgen::prelude::*;

use regret_filter::analysis::{norm_report, regret_of, FrequencyGrid, Response};
use regret_filter::baselines::hinf_optimal;
use regret_filter::model_io::{builtin_scalar, builtin_tracking, ModelFile};
use regret_filter::sim::{simulate, DisturbanceKind, DisturbanceSpec};
use regret_filter::state_space::{LtiFilter, StateSpaceModel};
use regret_filter::synthesis::synthesize;

fn parse_model(model_json: &str) -> Result<StateSpaceModel, String> {
    let v: serde_json::Value = serde_json::from_str(model_json).map_err(|e| e.to_string())?;
    if let Some(builtin) = v.get("builtin").and_then(|b| b.as_str()) {
        return match builtin {
            "scalar" => {
                if let Some(f) = v.get("f").and_then(|x| x.as_f64()) {
                    scalar_with_pole(f)
                } else {
                    Ok(builtin_scalar())
                }
            }
            "tracking" => {
                let dt = v.get("delta_t").and_then(|x| x.as_f64()).unwrap_or(1.0);
                builtin_tracking(dt).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown builtin `{other}`")),
        };
    }
    let file: ModelFile = serde_json::from_str(model_json).map_err(|e| e.to_string())?;
    file.to_model().map_err(|e| e.to_string())
}

fn scalar_with_pole(f: f64) -> Result<StateSpaceModel, String> {
    use regret_filter::state_space::Matrix;
    if !(f.is_finite() && f.abs() < 1.0) {
        return Err(format!("scalar pole must satisfy |f| < 1, got {f}"));
    }
    StateSpaceModel::new(
        Matrix::from_row_slice(1, 1, &[f]),
        Matrix::from_row_slice(1, 1, &[1.0]),
        Matrix::from_row_slice(1, 1, &[1.0]),
        Matrix::from_row_slice(1, 1, &[1.0]),
    )
    .map_err(|e| e.to_string())
}

struct FilterSet {
    kalman: LtiFilter,
    hinf: LtiFilter,
    regret: LtiFilter,
    gamma_star_sq: f64,
    hinf_level_sq: f64,
}

fn build_set(model: &StateSpaceModel) -> Result<FilterSet, String> {
    let synth = synthesize(model, 1e-6).map_err(|e| e.to_string())?;
    let (level, hinf) = hinf_optimal(model, 1e-6).map_err(|e| e.to_string())?;
    Ok(FilterSet {
        kalman: synth.kalman.clone(),
        hinf,
        regret: synth.filter.clone(),
        gamma_star_sq: synth.gamma_star * synth.gamma_star,
        hinf_level_sq: level * level,
    })
}

pub fn synthesize_report_impl(model_json: &str) -> Result<String, String> {
    let model = parse_model(model_json)?;
    let set = build_set(&model)?;
    let grid = FrequencyGrid::new(1024).map_err(|e| e.to_string())?;
    let mut table = serde_json::Map::new();
    for (name, resp) in [
        ("noncausal", Response::Clairvoyant),
        ("regret_opt", Response::Filter(&set.regret)),
        ("h2", Response::Filter(&set.kalman)),
        ("hinf", Response::Filter(&set.hinf)),
    ] {
        let r = norm_report(&model, resp, &grid).map_err(|e| e.to_string())?;
        table.insert(
            name.to_string(),
            serde_json::json!({
                "frobenius_sq": r.frobenius_sq,
                "operator_sq": r.operator_sq,
                "regret": r.regret,
            }),
        );
    }
    let doc = serde_json::json!({
        "gamma_star_sq": set.gamma_star_sq,
        "hinf_level_sq": set.hinf_level_sq,
        "filter_dim": set.regret.dim(),
        "table": serde_json::Value::Object(table),
    });
    Ok(doc.to_string())
}

pub fn frequency_curves_impl(model_json: &str, grid_count: usize) -> Result<String, String> {
    let model = parse_model(model_json)?;
    let set = build_set(&model)?;
    let grid = FrequencyGrid::new(grid_count).map_err(|e| e.to_string())?;
    let omegas: Vec<f64> = grid.omegas().collect();
    let mut doc = serde_json::Map::new();
    doc.insert("omega".into(), serde_json::json!(omegas));
    for (name, resp) in [
        ("noncausal", Response::Clairvoyant),
        ("regret_opt", Response::Filter(&set.regret)),
        ("h2", Response::Filter(&set.kalman)),
        ("hinf", Response::Filter(&set.hinf)),
    ] {
        let r = norm_report(&model, resp, &grid).map_err(|e| e.to_string())?;
        let gain: Vec<f64> = r.curve.iter().map(|(_, v)| *v).collect();
        let (_, regret_curve) = regret_of(&model, resp, &grid).map_err(|e| e.to_string())?;
        let regret: Vec<f64> = regret_curve.iter().map(|(_, v)| *v).collect();
        doc.insert(format!("gain_{name}"), serde_json::json!(gain));
        doc.insert(format!("regret_{name}"), serde_json::json!(regret));
    }
    doc.insert("gamma_star_sq".into(), serde_json::json!(set.gamma_star_sq));
    Ok(serde_json::Value::Object(doc).to_string())
}

pub fn simulation_curves_impl(
    model_json: &str,
    kind: &str,
    horizon: usize,
    seed: u64,
) -> Result<String, String> {
    let model = parse_model(model_json)?;
    let set = build_set(&model)?;
    let kind = match kind {
        "gaussian" => DisturbanceKind::Gaussian,
        "adversarial" => DisturbanceKind::Adversarial,
        other => return Err(format!("unknown disturbance kind `{other}`")),
    };
    let spec = DisturbanceSpec { kind, horizon, seed, scale: 1.0 };
    let result = simulate(
        &model,
        &[("h2", &set.kalman), ("hinf", &set.hinf), ("regret_opt", &set.regret)],
        &spec,
    )
    .map_err(|e| e.to_string())?;
    // thin the curves so the page never draws more than ~2000 points
    let stride = (horizon / 2000).max(1);
    let t: Vec<usize> = (0..horizon).step_by(stride).map(|i| i + 1).collect();
    let mut doc = serde_json::Map::new();
    doc.insert("t".into(), serde_json::json!(t));
    for run in &result.runs {
        let ys: Vec<f64> = run.running_avg.iter().step_by(stride).copied().collect();
        doc.insert(format!("avg_{}", run.name), serde_json::json!(ys));
    }
    Ok(serde_json::Value::Object(doc).to_string())
}

#[wasm_bindgen]
pub fn synthesize_report(model_json: &str) -> Result<String, JsValue> {
    synthesize_report_impl(model_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn frequency_curves(model_json: &str, grid: usize) -> Result<String, JsValue> {
    frequency_curves_impl(model_json, grid).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulation_curves(
    model_json: &str,
    kind: &str,
    horizon: usize,
    seed: u64,
) -> Result<String, JsValue> {
    simulation_curves_impl(model_json, kind, horizon, seed).map_err(|e| JsValue::from_str(&e))
}
