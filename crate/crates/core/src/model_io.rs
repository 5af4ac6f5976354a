//! JSON model files and the builtin example models.
//!
//! A model document carries row-major nested arrays under `"F"`, `"G"`,
//! `"H"`, `"L"`, an optional `"name"` and an optional `"delta_t"` recorded
//! for tracking-style templates. Non-finite numbers are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::{Matrix, StateSpaceModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(Error::ModelFormat(format!("{what} must have at least one row")));
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(Error::ModelFormat(format!("{what} must have at least one column")));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::ModelFormat(format!(
                "{what} is not rectangular: row {i} has {} entries, expected {cols}",
                r.len()
            )));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelFormat(format!("{what} contains a non-finite entry")));
        }
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::new(
            to_matrix(&self.f, "F")?,
            to_matrix(&self.g, "G")?,
            to_matrix(&self.h, "H")?,
            to_matrix(&self.l, "L")?,
        )
    }
}

/// The scalar example: `F = 0.9`, `G = H = L = 1`.
pub fn builtin_scalar() -> StateSpaceModel {
    StateSpaceModel::new(
        Matrix::from_row_slice(1, 1, &[0.9]),
        Matrix::from_row_slice(1, 1, &[1.0]),
        Matrix::from_row_slice(1, 1, &[1.0]),
        Matrix::from_row_slice(1, 1, &[1.0]),
    )
    .expect("builtin scalar model is valid")
}

/// The tracking example: position/velocity kinematics driven by an
/// acceleration disturbance, position observed in noise, position estimated.
///
/// `F = [[1, dt], [0, 1]]`, `G = [0; dt]`, `H = L = [1, 0]`.
pub fn builtin_tracking(delta_t: f64) -> Result<StateSpaceModel> {
    if !(delta_t.is_finite() && delta_t > 0.0) {
        return Err(Error::ModelFormat(format!("delta_t must be positive, got {delta_t}")));
    }
    StateSpaceModel::new(
        Matrix::from_row_slice(2, 2, &[1.0, delta_t, 0.0, 1.0]),
        Matrix::from_row_slice(2, 1, &[0.0, delta_t]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
}

/// Resolves `builtin:scalar`, `builtin:tracking` or a file path.
pub fn load_model(spec: &str, delta_t: Option<f64>) -> Result<(StateSpaceModel, String)> {
    match spec {
        "builtin:scalar" => Ok((builtin_scalar(), "scalar".to_string())),
        "builtin:tracking" => {
            let dt = delta_t.unwrap_or(1.0);
            Ok((builtin_tracking(dt)?, format!("tracking(delta_t={dt})")))
        }
        path => {
            let text = std::fs::read_to_string(path)?;
            let file = ModelFile::parse(&text)?;
            let name = file.name.clone().unwrap_or_else(|| path.to_string());
            Ok((file.to_model()?, name))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_convert() {
        let text = r#"{"F": [[0.9]], "G": [[1.0]], "H": [[1.0]], "L": [[1.0]], "name": "s"}"#;
        let mf = ModelFile::parse(text).unwrap();
        let model = mf.to_model().unwrap();
        assert_eq!(model.dims(), (1, 1, 1, 1));
    }

    #[test]
    fn rejects_ragged_rows() {
        let text = r#"{"F": [[1.0, 0.0], [0.0]], "G": [[1.0],[1.0]], "H": [[1.0, 0.0]], "L": [[1.0, 0.0]]}"#;
        let mf = ModelFile::parse(text).unwrap();
        assert!(matches!(mf.to_model(), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn rejects_non_finite_literals() {
        let text = r#"{"F": [[NaN]], "G": [[1.0]], "H": [[1.0]], "L": [[1.0]]}"#;
        assert!(ModelFile::parse(text).is_err());
    }

    #[test]
    fn builtin_models_are_valid() {
        assert_eq!(builtin_scalar().dims(), (1, 1, 1, 1));
        assert_eq!(builtin_tracking(1.0).unwrap().dims(), (2, 1, 1, 1));
        assert!(builtin_tracking(0.0).is_err());
    }
}
