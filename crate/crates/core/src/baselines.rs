//! The central H-infinity filter used as a comparison baseline.
//!
//! For a disturbance-attenuation level the filter comes from one indefinite
//! DARE with the stacked output `[H; L]` and weight `blkdiag(I, -level^2 I)`.
//! Feasibility requires a stabilizing solution whose innovation Gramian has
//! inertia `(m plus, p minus)`; the optimal level is found by bisection
//! between the clairvoyant operator norm (never beatable) and the Kalman
//! filter's operator norm (always attainable).


use crate::analysis::{operator_of, FrequencyGrid, Response};
use crate::error::{Error, Result};
use crate::linalg::{solve_dare, spectral_radius, symmetrize, DareProblem, Matrix};
use crate::state_space::{LtiFilter, StateSpaceModel};
use crate::synthesis::kalman_filter;

const MAX_LEVEL_BISECTION: usize = 200;

/// Central H-infinity filter at a fixed attenuation level.
///
/// Returns `Infeasible` when the level is at or below the optimum: the
/// stacked DARE then has no stabilizing solution, the innovation inertia is
/// wrong, or the filter loop is unstable.
pub fn hinf_filter(model: &StateSpaceModel, level: f64) -> Result<LtiFilter> {
    if !(level > 0.0) {
        return Err(Error::Infeasible(level));
    }
    let (n, _, m, p) = model.dims();
    let mut stacked = Matrix::zeros(m + p, n);
    stacked.view_mut((0, 0), (m, n)).copy_from(&model.h);
    stacked.view_mut((m, 0), (p, n)).copy_from(&model.l);
    let mut r0 = Matrix::zeros(m + p, m + p);
    for i in 0..m {
        r0[(i, i)] = 1.0;
    }
    for i in 0..p {
        r0[(m + i, m + i)] = -level * level;
    }
    let prob = DareProblem::estimation(
        model.f.clone(),
        &stacked,
        symmetrize(&(&model.g * model.g.transpose())),
        r0,
    )?;
    let sol = solve_dare(&prob).map_err(|_| Error::Infeasible(level))?;

    // inertia of the indefinite innovation Gramian: m positive, p negative
    let eigs = nalgebra::linalg::SymmetricEigen::new(sol.r.clone()).eigenvalues;
    let pos = eigs.iter().filter(|&&e| e > 0.0).count();
    let neg = eigs.iter().filter(|&&e| e < 0.0).count();
    if pos != m || neg != p {
        return Err(Error::Infeasible(level));
    }

    central_filter_from(model, &sol.x).map_err(|_| Error::Infeasible(level))
}

/// Builds the observer-form filter
/// `(F - K_p H, K_p, L (I - P H* Re^{-1} H), L P H* Re^{-1})`
/// with `K_p = F P H* Re^{-1}`, `Re = I + H P H*`.
fn central_filter_from(model: &StateSpaceModel, p_mat: &Matrix) -> Result<LtiFilter> {
    let (n, _, m, _) = model.dims();
    let re = Matrix::identity(m, m) + &model.h * p_mat * model.h.transpose();
    let re_lu = re.clone().lu();
    if !re_lu.is_invertible() {
        return Err(Error::SingularInnovation);
    }
    let re_inv = re_lu.try_inverse().ok_or(Error::SingularInnovation)?;
    let k_p = &model.f * p_mat * model.h.transpose() * &re_inv;
    let a = &model.f - &k_p * &model.h;
    if spectral_radius(&a) >= 1.0 {
        return Err(Error::NoStabilizingSolution("central filter loop unstable".into()));
    }
    let c = &model.l
        * (Matrix::identity(n, n) - p_mat * model.h.transpose() * &re_inv * &model.h);
    let d = &model.l * p_mat * model.h.transpose() * &re_inv;
    LtiFilter::new(a, k_p, c, d)
}

/// Smallest feasible attenuation level (relative tolerance `tol`) and the
/// central filter synthesized there.
///
/// The feasibility record is checked for monotonicity: a feasible level
/// below an infeasible one aborts with `BracketFailure`.
pub fn hinf_optimal(model: &StateSpaceModel, tol: f64) -> Result<(f64, LtiFilter)> {
    if !(tol > 0.0) {
        return Err(Error::BracketFailure("tol must be positive".into()));
    }
    let (_, _, m, p) = model.dims();
    if model.l.norm() == 0.0 || model.g.norm() == 0.0 {
        return Ok((0.0, LtiFilter::zero(p, m)));
    }
    let grid = FrequencyGrid::new(1024)?;
    let (nc_op, _) = operator_of(model, Response::Clairvoyant, &grid)?;
    let kalman = kalman_filter(model)?;
    let (kal_op, _) = operator_of(model, Response::Filter(&kalman), &grid)?;

    let mut lo = nc_op.sqrt() * (1.0 - 1e-9);
    let mut hi = kal_op.sqrt();
    if hinf_filter(model, lo).is_ok() {
        // the clairvoyant bound itself is attainable; nothing to bisect
        return Ok((lo, hinf_filter(model, lo)?));
    }
    let mut grow = 0;
    while hinf_filter(model, hi).is_err() {
        hi *= 1.5;
        grow += 1;
        if grow > 20 {
            return Err(Error::BracketFailure(
                "no feasible attenuation level found above the Kalman norm".into(),
            ));
        }
    }
    let mut feas_min = hi;
    let mut infeas_max = lo;
    for _ in 0..MAX_LEVEL_BISECTION {
        let mid = 0.5 * (lo + hi);
        if hinf_filter(model, mid).is_ok() {
            hi = mid;
            feas_min = feas_min.min(mid);
        } else {
            lo = mid;
            infeas_max = infeas_max.max(mid);
        }
        if hi - lo <= tol * hi {
            break;
        }
    }
    if feas_min < infeas_max {
        return Err(Error::BracketFailure(format!(
            "feasible at {feas_min} but infeasible at larger {infeas_max}"
        )));
    }
    Ok((hi, hinf_filter(model, hi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{frobenius_norm_sq, operator_norm_sq, regret_norm};

    fn scalar_model() -> StateSpaceModel {
        StateSpaceModel::new(
            Matrix::from_row_slice(1, 1, &[0.9]),
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap()
    }

    fn tracking_model() -> StateSpaceModel {
        StateSpaceModel::new(
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn huge_level_recovers_kalman_filter() {
        for model in [scalar_model(), tracking_model()] {
            let hf = hinf_filter(&model, 1e6).unwrap();
            let kal = kalman_filter(&model).unwrap();
            assert!(
                (&hf.a - &kal.a).norm() <= 1e-6,
                "A mismatch {}",
                (&hf.a - &kal.a).norm()
            );
            assert!((&hf.d - &kal.d).norm() <= 1e-6);
        }
    }

    #[test]
    fn scalar_optimal_level_matches_clairvoyant_peak() {
        let model = scalar_model();
        let (level, filt) = hinf_optimal(&model, 1e-9).unwrap();
        assert!((level * level - 0.99).abs() < 0.02, "level^2 = {}", level * level);
        let grid = FrequencyGrid::new(2048).unwrap();
        let (op, _) = operator_norm_sq(&model, &filt, &grid).unwrap();
        assert!(op <= level * level * (1.0 + 1e-8 + 10.0 * 1e-9));
        // published regret for the H-infinity baseline
        let (reg, _) = regret_norm(&model, &filt, &grid).unwrap();
        assert!((reg - 0.71).abs() < 0.02, "regret = {reg}");
    }

    #[test]
    fn measured_norm_never_exceeds_level() {
        let model = tracking_model();
        for level_sq in [1.2, 1.35] {
            let filt = hinf_filter(&model, f64::sqrt(level_sq)).unwrap();
            let grid = FrequencyGrid::new(2048).unwrap();
            let (op, _) = operator_norm_sq(&model, &filt, &grid).unwrap();
            assert!(op <= level_sq + 1e-6, "bound violated: {op} > {level_sq}");
        }
    }

    #[test]
    fn below_optimum_is_infeasible() {
        let model = scalar_model();
        assert!(matches!(hinf_filter(&model, 0.9), Err(Error::Infeasible(_))));
        assert!(matches!(hinf_filter(&model, 0.5), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_target_short_circuits() {
        let model = StateSpaceModel::new(
            Matrix::from_row_slice(1, 1, &[0.9]),
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::from_row_slice(1, 1, &[0.0]),
        )
        .unwrap();
        let (level, filt) = hinf_optimal(&model, 1e-6).unwrap();
        assert_eq!(level, 0.0);
        let grid = FrequencyGrid::new(256).unwrap();
        let fro = frobenius_norm_sq(&model, &filt, &grid).unwrap();
        assert!(fro < 1e-12);
    }

    #[test]
    fn tracking_optimal_level_matches_clairvoyant_peak() {
        let model = tracking_model();
        let (level, _) = hinf_optimal(&model, 1e-9).unwrap();
        assert!((level * level - 1.0).abs() < 0.02, "level^2 = {}", level * level);
    }
}
