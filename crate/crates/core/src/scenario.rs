//! Family dispatch: one entry point per pipeline stage, plus the combined
//! diagnostics report.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    characteristic_selfcheck, conservation_jump, weak_form_check, CharacteristicsReport,
    JumpReport, WeakFormReport,
};
use crate::error::Result;
use crate::evolution::{plateau_taylor_check, q_time_derivative, qt_cusp_value};
use crate::helmholtz::{energy, p_residual, EulerianState};
use crate::lagrangian::{to_lagrangian, Labeling, LagrangianState};
use crate::profiles::{
    cusp_exponent, cuspon_profile, peakon_default_grid, peakon_profile, profile_residual,
    stumpon_profile, Family, ProfileTable, TravelingWaveParams,
};

/// Builds the profile table appropriate for the parameter family.
pub fn build_profile(params: &TravelingWaveParams, n_samples: usize) -> Result<ProfileTable> {
    match params.family {
        Family::PeakonDecay | Family::PeakonPeriodic => {
            let grid = peakon_default_grid(params, 0.0, n_samples);
            peakon_profile(params, 0.0, &grid)
        }
        Family::CusponDecay | Family::CusponPeriodic => cuspon_profile(params, n_samples),
        Family::StumponDecay | Family::StumponPeriodic => stumpon_profile(params, n_samples),
    }
}

/// Profile sampled into an Eulerian snapshot.
pub fn build_state(params: &TravelingWaveParams, n_samples: usize) -> Result<EulerianState> {
    Ok(EulerianState::from_profile(&build_profile(params, n_samples)?))
}

/// Initial label data for a simulation run.
pub fn build_labels(
    params: &TravelingWaveParams,
    n_samples: usize,
    n_labels: usize,
    labeling: Labeling,
) -> Result<LagrangianState> {
    let state = build_state(params, n_samples)?;
    to_lagrangian(&state, n_labels, labeling)
}

/// Computed-vs-expected pair for a pointwise check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueCheck {
    pub computed: f64,
    pub expected: f64,
}

/// Static diagnostics of one traveling wave.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub family: String,
    pub params: TravelingWaveParams,
    pub half_period: Option<f64>,
    /// Total energy of the sampled snapshot.
    pub energy: f64,
    /// Worst violation of the shape identity over the samples.
    pub profile_residual: f64,
    /// Fitted crest exponent (cusped families only; 2/3 expected).
    pub cusp_exponent: Option<f64>,
    /// Sup mismatch between convolved and closed-form pressure.
    pub pressure_mismatch: f64,
    pub jump: Option<JumpReport>,
    /// Whether the profile satisfies the energy balance law across its
    /// singular lines (flux jump compatible with zero).
    pub conservative: Option<bool>,
    pub weak_form: Option<WeakFormReport>,
    /// Q_t at the cusp (cuspons) or plateau middle (stumpons).
    pub qt_center: Option<ValueCheck>,
    pub characteristics: Option<CharacteristicsReport>,
    pub notes: Vec<String>,
}

/// Runs every diagnostic that applies to the family.
pub fn build_diagnostics(
    params: &TravelingWaveParams,
    n_samples: usize,
    n_labels: usize,
) -> Result<DiagnosticsReport> {
    let table = build_profile(params, n_samples)?;
    let state = EulerianState::from_profile(&table);
    let mut notes = Vec::new();

    let cusped = params.family.is_cusped();
    let exponent = if cusped { Some(cusp_exponent(&table)) } else { None };

    let jump = Some(conservation_jump(&table)?);
    let conservative = jump
        .as_ref()
        .map(|j| j.jump.abs() <= 0.01 * j.expected.abs().max(1.0));
    let weak_form = match weak_form_check(&table) {
        Ok(rep) => Some(rep),
        Err(e) => {
            notes.push(format!("weak-form check skipped: {e}"));
            None
        }
    };

    let qt_center = if cusped {
        let ls = to_lagrangian(&state, n_labels, Labeling::Standard)?;
        if params.family.is_stumpon() {
            let rep = plateau_taylor_check(&ls, params)?;
            notes.push(format!(
                "plateau curvature: fit {:.6}, expected {:.6}",
                rep.quad_coeff_fit, rep.quad_coeff_expected
            ));
            Some(ValueCheck {
                computed: rep.center_value,
                expected: rep.center_expected,
            })
        } else {
            let field = q_time_derivative(&ls)?;
            let i0 = (0..ls.n())
                .min_by(|&a, &b| ls.xis[a].abs().partial_cmp(&ls.xis[b].abs()).unwrap())
                .unwrap();
            Some(ValueCheck {
                computed: field.qt[i0],
                expected: qt_cusp_value(params),
            })
        }
    } else {
        None
    };

    let characteristics = if !cusped {
        let seeds: Vec<f64> = match table.half_period {
            Some(l) => vec![-0.5 * l, -0.25 * l, 0.25 * l, 0.5 * l],
            None => vec![-1.0, -0.5, 0.5, 1.0],
        };
        Some(characteristic_selfcheck(&table, &seeds, 2.0, 4000))
    } else {
        None
    };

    Ok(DiagnosticsReport {
        family: params.family.to_string(),
        params: *params,
        half_period: table.half_period,
        energy: energy(&state),
        profile_residual: profile_residual(&table),
        cusp_exponent: exponent,
        pressure_mismatch: p_residual(&table),
        jump,
        conservative,
        weak_form,
        qt_center,
        characteristics,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::derive_params;

    #[test]
    fn test_diagnostics_cover_each_family() {
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        let cases = [
            derive_params(1.0, 0.0, 1.0, 0.0, Family::PeakonDecay).unwrap(),
            derive_params(1.0, 0.5, 1.0, 0.0, Family::PeakonPeriodic).unwrap(),
            derive_params(golden, 0.0, 1.0, 0.0, Family::CusponPeriodic).unwrap(),
            derive_params(2.0, -0.5, 1.0, 0.0, Family::CusponDecay).unwrap(),
            derive_params(golden, 0.0, 1.0, 0.5155, Family::StumponPeriodic).unwrap(),
        ];
        for p in &cases {
            let rep = build_diagnostics(p, 1024, 512).unwrap();
            assert_eq!(rep.family, p.family.to_string());
            assert!(rep.energy > 0.0, "{}: energy", p.family);
            if p.family.is_cusped() {
                let alpha = rep.cusp_exponent.unwrap();
                assert!((alpha - 2.0 / 3.0).abs() < 0.05, "{}: alpha = {alpha}", p.family);
            } else {
                assert!(rep.characteristics.is_some());
            }
        }
    }
}
