//! Eulerian snapshots, energy measures, and the nonlocal pressure term.
//!
//! The pressure P solves P - P_xx = u^2 + u_x^2 / 2 with decay (line) or
//! periodic boundary conditions, i.e. a convolution of the source with
//! e^{-|x|} / 2 on the line and cosh(L - |x|) / (2 sinh L) on a period 2L.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::profiles::{Family, ProfileTable};
use crate::quad::Csum;

/// Spatial domain of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Periodic { period: f64 },
    Line,
}

impl Domain {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Periodic { .. })
    }
}

/// Energy measure: an absolutely continuous density sampled on the state's
/// grid (+inf at cusp samples) plus isolated point masses.
#[derive(Debug, Clone, Default)]
pub struct Measure {
    pub density: Vec<f64>,
    /// (position, mass) pairs.
    pub atoms: Vec<(f64, f64)>,
}

/// A wave snapshot in physical coordinates.
#[derive(Debug, Clone)]
pub struct EulerianState {
    pub xs: Vec<f64>,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub singular: Vec<bool>,
    /// Energy measure carried alongside u; None falls back to finite differences.
    pub mu: Option<Measure>,
    /// Reference level: the asymptotic value of u on the line, 0 on periodic domains.
    pub r: f64,
    pub domain: Domain,
}

impl EulerianState {
    /// Samples a traveling-wave profile into a snapshot, attaching the
    /// energy density (u - r)^2 + u_x^2.
    pub fn from_profile(table: &ProfileTable) -> EulerianState {
        let p = &table.params;
        let (domain, r) = match table.half_period {
            Some(h) => (Domain::Periodic { period: 2.0 * h }, 0.0),
            None => (Domain::Line, p.trough),
        };
        let density: Vec<f64> = table
            .vals
            .iter()
            .zip(&table.derivs)
            .map(|(&u, &ux)| {
                let du = u - r;
                du * du + ux * ux
            })
            .collect();
        EulerianState {
            xs: table.xs.clone(),
            u: table.vals.clone(),
            ux: table.derivs.clone(),
            singular: table.singular.clone(),
            mu: Some(Measure {
                density,
                atoms: Vec::new(),
            }),
            r,
            domain,
        }
    }
}

/// Integrates a sampled density over the grid cells, treating cells next to
/// a singular sample by the 2/3-power cusp law: near a cusp the divergent
/// part of the density grows like d^{-2/3}, so the cell [0, h] carries mass
/// 3 h rho(h) in terms of the finite neighbor value rho(h).
///
/// When `smooth` gives the non-divergent component of the density, singular
/// cells weight only the difference by the power law and integrate the
/// smooth part with the usual trapezoid, which removes an O(h) overcount.
pub fn cell_masses(
    xs: &[f64],
    density: &[f64],
    singular: &[bool],
    smooth: Option<&[f64]>,
) -> Vec<f64> {
    let n = xs.len();
    let mut masses = Vec::with_capacity(n.saturating_sub(1));
    let cusp_cell = |fin: usize, sing: usize, h: f64| match smooth {
        Some(sm) => (3.0 * (density[fin] - sm[fin]).max(0.0) + 0.5 * (sm[fin] + sm[sing])) * h,
        None => 3.0 * density[fin] * h,
    };
    for i in 0..n.saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        let m = match (singular[i], singular[i + 1]) {
            (false, false) => 0.5 * (density[i] + density[i + 1]) * h,
            (true, false) => cusp_cell(i + 1, i, h),
            (false, true) => cusp_cell(i, i + 1, h),
            (true, true) => 0.0,
        };
        masses.push(m);
    }
    masses
}

/// Distributes cell masses onto nodes: regular cells split evenly, cells
/// adjacent to a cusp assign their whole mass to the cusp sample (the
/// density concentrates there).
pub fn node_masses(
    xs: &[f64],
    density: &[f64],
    singular: &[bool],
    smooth: Option<&[f64]>,
) -> Vec<f64> {
    let cells = cell_masses(xs, density, singular, smooth);
    let mut w = vec![0.0; xs.len()];
    for (i, &m) in cells.iter().enumerate() {
        match (singular[i], singular[i + 1]) {
            (true, false) => w[i] += m,
            (false, true) => w[i + 1] += m,
            _ => {
                w[i] += 0.5 * m;
                w[i + 1] += 0.5 * m;
            }
        }
    }
    w
}

/// Total energy of a snapshot: the measure's mass when one is attached,
/// otherwise the trapezoid integral of (u - r)^2 + u_x^2 with u_x from
/// central differences.
pub fn energy(state: &EulerianState) -> f64 {
    match &state.mu {
        Some(mu) => {
            let smooth: Vec<f64> = state
                .u
                .iter()
                .map(|&u| (u - state.r) * (u - state.r))
                .collect();
            let mut acc = Csum::new();
            for m in cell_masses(&state.xs, &mu.density, &state.singular, Some(&smooth)) {
                acc.add(m);
            }
            for &(_, m) in &mu.atoms {
                acc.add(m);
            }
            acc.value()
        }
        None => {
            let n = state.xs.len();
            let mut dens = vec![0.0; n];
            for i in 0..n {
                let (il, ir) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let ux = (state.u[ir] - state.u[il]) / (state.xs[ir] - state.xs[il]);
                let du = state.u[i] - state.r;
                dens[i] = du * du + ux * ux;
            }
            let sing = vec![false; n];
            cell_masses(&state.xs, &dens, &sing, None).iter().sum()
        }
    }
}

/// Closed-form pressure of a traveling wave: P = (a + s^2 - (s - u)^2) / 2.
///
/// Follows from P_x = (s - u) u_x along the profile; the integration
/// constant a / 2 is the one consistent with the elliptic problem. On a
/// stumpon plateau (u = s, a = s^2) this gives exactly P = s^2.
pub fn p_closed_form(params: &crate::profiles::TravelingWaveParams, u: f64) -> f64 {
    let s = params.speed;
    0.5 * (params.a + s * s - (s - u) * (s - u))
}

fn pressure_source(state: &EulerianState) -> Vec<f64> {
    state
        .u
        .iter()
        .zip(&state.ux)
        .map(|(&u, &ux)| u * u + 0.5 * ux * ux)
        .collect()
}

/// Node weights for the pressure source u^2 + u_x^2 / 2, with u^2 as the
/// component that stays finite at cusps.
fn pressure_masses(state: &EulerianState, src: &[f64]) -> Vec<f64> {
    let smooth: Vec<f64> = state.u.iter().map(|&u| u * u).collect();
    node_masses(&state.xs, src, &state.singular, Some(&smooth))
}

/// Pressure on the sample grid by prefix-summed kernel convolution, O(N).
///
/// Line domains add the analytic tail contribution of the constant state
/// u = r beyond the truncation window.
pub fn p_convolution(state: &EulerianState) -> Vec<f64> {
    let xs = &state.xs;
    let n = xs.len();
    let src = pressure_source(state);
    let mass = pressure_masses(state, &src);
    let xbar = 0.5 * (xs[0] + xs[n - 1]);

    // S1 = sum_{j<i} e^{x_j - xbar} m_j, S4 = sum_{j>i} e^{-(x_j - xbar)} m_j,
    // S2 = sum_{j<i} e^{-(x_j - xbar)} m_j, S3 = sum_{j>i} e^{x_j - xbar} m_j.
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut s3 = vec![0.0; n];
    let mut s4 = vec![0.0; n];
    let (mut a1, mut a2) = (Csum::new(), Csum::new());
    for i in 1..n {
        a1.add((xs[i - 1] - xbar).exp() * mass[i - 1]);
        a2.add((-(xs[i - 1] - xbar)).exp() * mass[i - 1]);
        s1[i] = a1.value();
        s2[i] = a2.value();
    }
    let (mut a3, mut a4) = (Csum::new(), Csum::new());
    for i in (0..n - 1).rev() {
        a3.add((xs[i + 1] - xbar).exp() * mass[i + 1]);
        a4.add((-(xs[i + 1] - xbar)).exp() * mass[i + 1]);
        s3[i] = a3.value();
        s4[i] = a4.value();
    }

    let mut p = vec![0.0; n];
    match state.domain {
        Domain::Line => {
            let r2 = state.r * state.r;
            for i in 0..n {
                let bi = (-(xs[i] - xbar)).exp();
                let ai = (xs[i] - xbar).exp();
                let decaying = bi * s1[i] + ai * s4[i] + mass[i];
                let tail = 0.5 * r2 * ((xs[i] - xs[n - 1]).exp() + (xs[0] - xs[i]).exp());
                p[i] = 0.5 * decaying + tail;
            }
        }
        Domain::Periodic { period } => {
            let lh = 0.5 * period;
            let c = 1.0 / (4.0 * lh.sinh());
            let (ep, em) = (lh.exp(), (-lh).exp());
            for i in 0..n {
                let bi = (-(xs[i] - xbar)).exp();
                let ai = (xs[i] - xbar).exp();
                let decaying = bi * s1[i] + ai * s4[i] + mass[i];
                let growing = ai * s2[i] + bi * s3[i] + mass[i];
                p[i] = c * (ep * decaying + em * growing);
            }
        }
    }
    p
}

/// Pressure by direct double-loop kernel summation, O(N^2). Kept as the
/// reference implementation the fast path is checked against.
pub fn p_convolution_direct(state: &EulerianState) -> Vec<f64> {
    let xs = &state.xs;
    let n = xs.len();
    let src = pressure_source(state);
    let mass = pressure_masses(state, &src);
    // Rows are independent compensated sums; parallelizing over them keeps
    // the result identical to the serial loop.
    match state.domain {
        Domain::Line => {
            let r2 = state.r * state.r;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut acc = Csum::new();
                    for j in 0..n {
                        acc.add(0.5 * (-(xs[i] - xs[j]).abs()).exp() * mass[j]);
                    }
                    acc.add(0.5 * r2 * ((xs[i] - xs[n - 1]).exp() + (xs[0] - xs[i]).exp()));
                    acc.value()
                })
                .collect()
        }
        Domain::Periodic { period } => {
            let lh = 0.5 * period;
            let c = 1.0 / (2.0 * lh.sinh());
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut acc = Csum::new();
                    for j in 0..n {
                        let d = (xs[i] - xs[j]).abs();
                        acc.add(c * (lh - d).cosh() * mass[j]);
                    }
                    acc.value()
                })
                .collect()
        }
    }
}

/// Sup-norm mismatch between the convolved and closed-form pressure of a
/// traveling-wave snapshot.
pub fn p_residual(table: &ProfileTable) -> f64 {
    let state = EulerianState::from_profile(table);
    let p_num = p_convolution(&state);
    let mut worst: f64 = 0.0;
    for (i, &u) in state.u.iter().enumerate() {
        worst = worst.max((p_num[i] - p_closed_form(&table.params, u)).abs());
    }
    worst
}

/// Pressure mismatch across a ladder of resolutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ns: Vec<usize>,
    pub sup_errors: Vec<f64>,
    /// Fitted slope of log(error) against log(n), sign-flipped so that
    /// second-order convergence reads as 2.0.
    pub order: f64,
}

/// Runs the pressure check on rebuilt profiles of increasing resolution.
pub fn p_convergence(
    params: &crate::profiles::TravelingWaveParams,
    ns: &[usize],
) -> Result<ConvergenceReport> {
    let mut sup_errors = Vec::with_capacity(ns.len());
    for &n in ns {
        let table = match params.family {
            Family::PeakonDecay | Family::PeakonPeriodic => {
                let grid = crate::profiles::peakon_default_grid(params, 0.0, n);
                crate::profiles::peakon_profile(params, 0.0, &grid)?
            }
            Family::CusponDecay | Family::CusponPeriodic => {
                crate::profiles::cuspon_profile(params, n)?
            }
            Family::StumponDecay | Family::StumponPeriodic => {
                crate::profiles::stumpon_profile(params, n)?
            }
        };
        sup_errors.push(p_residual(&table));
    }
    if sup_errors.len() >= 2 && sup_errors[sup_errors.len() - 1] > sup_errors[0] {
        return Err(ChError::QuadratureNonconvergent(format!(
            "pressure mismatch grew under refinement: {sup_errors:?}"
        )));
    }
    let logs_n: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let logs_e: Vec<f64> = sup_errors.iter().map(|&e| e.max(1e-300).ln()).collect();
    let order = -crate::quad::ls_slope(&logs_n, &logs_e);
    // cusp-limited profiles converge like h^{2/3}; smooth ones like h^2
    let floor = if params.family.is_cusped() { 0.6 } else { 1.5 };
    if sup_errors.len() >= 2 && order < floor {
        return Err(ChError::QuadratureNonconvergent(format!(
            "pressure convergence order {order:.3} below {floor}"
        )));
    }
    Ok(ConvergenceReport {
        ns: ns.to_vec(),
        sup_errors,
        order,
    })
}
