//! Label-space (Lagrangian) representation of conservative solutions.
//!
//! A snapshot (u, mu) is recoded as three functions of a label xi: the
//! particle position y, the velocity U = u(y), and the cumulative energy H.
//! The standard labeling picks xi = y + F(y) with F the signed cumulative
//! energy measure, which equidistributes labels between space and energy and
//! keeps U uniformly Lipschitz in xi even across cusps.

use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::helmholtz::{cell_masses, Domain, EulerianState, Measure};

/// Flat runs of y shorter than this fraction of the y span are treated as
/// point masses of the energy measure.
pub const FLAT_EPS_REL: f64 = 1e-10;

/// Label-space domain bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LagDomain {
    /// Over one label period y gains 2 x_half and H gains 2 e_half; the
    /// label period is 2 (x_half + e_half).
    Periodic { x_half: f64, e_half: f64 },
    Line,
}

impl LagDomain {
    pub fn label_period(&self) -> Option<f64> {
        match self {
            LagDomain::Periodic { x_half, e_half } => Some(2.0 * (x_half + e_half)),
            LagDomain::Line => None,
        }
    }

    pub fn x_period(&self) -> Option<f64> {
        match self {
            LagDomain::Periodic { x_half, .. } => Some(2.0 * x_half),
            LagDomain::Line => None,
        }
    }
}

/// How labels are assigned at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labeling {
    /// xi = y + F(y); spreads labels into energy-dense regions.
    Standard,
    /// xi = y; keeps the initial grid uniform in space.
    Identity,
}

impl std::str::FromStr for Labeling {
    type Err = ChError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Labeling::Standard),
            "identity" => Ok(Labeling::Identity),
            other => Err(ChError::OutOfRange(format!("unknown labeling '{other}'"))),
        }
    }
}

/// A conservative-solution snapshot in label coordinates.
#[derive(Debug, Clone)]
pub struct LagrangianState {
    /// Uniform label grid (half-open over one period on periodic domains).
    pub xis: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub h: Vec<f64>,
    /// Reference level carried over from the Eulerian snapshot.
    pub r: f64,
    pub t: f64,
    pub domain: LagDomain,
    pub labeling: Labeling,
}

impl LagrangianState {
    pub fn n(&self) -> usize {
        self.xis.len()
    }

    pub fn label_spacing(&self) -> f64 {
        self.xis[1] - self.xis[0]
    }
}

/// Signed cumulative map g(x) = x + F(x) sampled at the grid nodes, where F
/// is the cumulative energy measure anchored to zero at the node nearest
/// x = 0. Atoms become jumps: g_left < g_right at their node.
struct CumulativeMap {
    g_left: Vec<f64>,
    g_right: Vec<f64>,
}

fn measure_density(state: &EulerianState) -> (Vec<f64>, Vec<bool>, Vec<(f64, f64)>) {
    match &state.mu {
        Some(mu) => (mu.density.clone(), state.singular.clone(), mu.atoms.clone()),
        None => {
            let n = state.xs.len();
            let mut dens = vec![0.0; n];
            for i in 0..n {
                let (il, ir) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let ux = (state.u[ir] - state.u[il]) / (state.xs[ir] - state.xs[il]);
                let du = state.u[i] - state.r;
                dens[i] = du * du + ux * ux;
            }
            (dens, vec![false; n], Vec::new())
        }
    }
}

fn build_cumulative(state: &EulerianState) -> Result<(CumulativeMap, Vec<f64>)> {
    let xs = &state.xs;
    let n = xs.len();
    if n < 3 {
        return Err(ChError::OutOfRange("snapshot needs at least 3 samples".into()));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(ChError::NonMonotonic(
                "snapshot grid must be strictly increasing".into(),
            ));
        }
    }
    let (dens, sing, atoms) = measure_density(state);
    let smooth: Vec<f64> = state
        .u
        .iter()
        .map(|&u| (u - state.r) * (u - state.r))
        .collect();
    let cells = cell_masses(xs, &dens, &sing, Some(&smooth));

    // Snap atoms onto their nearest node.
    let mut node_atom = vec![0.0; n];
    for &(pos, mass) in &atoms {
        let i = match xs.binary_search_by(|v| v.partial_cmp(&pos).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i >= n {
                    n - 1
                } else if (xs[i] - pos).abs() < (pos - xs[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        };
        node_atom[i] += mass;
    }

    let i0 = (0..n)
        .min_by(|&a, &b| xs[a].abs().partial_cmp(&xs[b].abs()).unwrap())
        .unwrap();
    let mut g_left = vec![0.0; n];
    let mut g_right = vec![0.0; n];
    g_left[i0] = xs[i0];
    g_right[i0] = xs[i0] + node_atom[i0];
    for i in i0 + 1..n {
        g_left[i] = g_right[i - 1] + (xs[i] - xs[i - 1]) + cells[i - 1];
        g_right[i] = g_left[i] + node_atom[i];
    }
    for i in (0..i0).rev() {
        g_right[i] = g_left[i + 1] - (xs[i + 1] - xs[i]) - cells[i];
        g_left[i] = g_right[i] - node_atom[i];
    }
    Ok((CumulativeMap { g_left, g_right }, cells))
}

/// Inverts g at label value q (already folded into the covered range):
/// returns (x, u).
fn invert_at(q: f64, map: &CumulativeMap, xs: &[f64], u: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let q = q.clamp(map.g_left[0], map.g_right[n - 1]);
    let j = map.g_left.partition_point(|&v| v <= q).saturating_sub(1);
    if q <= map.g_right[j] || j == n - 1 {
        return (xs[j], u[j]);
    }
    let gain = map.g_left[j + 1] - map.g_right[j]; // h + cell mass
    let h = xs[j + 1] - xs[j];
    let frac = ((q - map.g_right[j]) / gain).clamp(0.0, 1.0);
    (xs[j] + h * frac, u[j] + (u[j + 1] - u[j]) * frac)
}

/// Evaluates g at a position x (continuous part only, left limits at atoms).
fn g_at(x: f64, map: &CumulativeMap, xs: &[f64], cells: &[f64]) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return map.g_left[0] + (x - xs[0]);
    }
    if x >= xs[n - 1] {
        return map.g_right[n - 1] + (x - xs[n - 1]);
    }
    let j = xs.partition_point(|&v| v <= x).saturating_sub(1);
    let h = xs[j + 1] - xs[j];
    let frac = (x - xs[j]) / h;
    map.g_right[j] + frac * (h + cells[j])
}

/// Recodes an Eulerian snapshot into label coordinates with n_labels labels.
pub fn to_lagrangian(
    state: &EulerianState,
    n_labels: usize,
    labeling: Labeling,
) -> Result<LagrangianState> {
    if n_labels < 16 {
        return Err(ChError::OutOfRange("need at least 16 labels".into()));
    }
    let (map, cells) = build_cumulative(state)?;
    let xs = &state.xs;
    let n = xs.len();
    let g0 = map.g_left[0];
    let g1 = map.g_right[n - 1];

    let domain = match state.domain {
        Domain::Periodic { period } => {
            let e_half = 0.5 * (g1 - g0 - period);
            LagDomain::Periodic {
                x_half: 0.5 * period,
                e_half,
            }
        }
        Domain::Line => LagDomain::Line,
    };

    let mut xis = Vec::with_capacity(n_labels);
    let mut y = Vec::with_capacity(n_labels);
    let mut u = Vec::with_capacity(n_labels);
    let mut h = Vec::with_capacity(n_labels);

    match labeling {
        Labeling::Standard => {
            match state.domain {
                Domain::Periodic { period } => {
                    let xi_span = g1 - g0; // one label period
                    let anchor = g_at(xs[(0..n)
                        .min_by(|&a, &b| xs[a].abs().partial_cmp(&xs[b].abs()).unwrap())
                        .unwrap()], &map, xs, &cells);
                    for k in 0..n_labels {
                        let xi = anchor - 0.5 * xi_span + xi_span * k as f64 / n_labels as f64;
                        // fold into the covered range, remembering whole periods
                        let wraps = ((xi - g0) / xi_span).floor();
                        let q = xi - wraps * xi_span;
                        let (x, uu) = invert_at(q, &map, xs, &state.u);
                        let yy = x + wraps * period;
                        xis.push(xi);
                        y.push(yy);
                        u.push(uu);
                        h.push(xi - yy);
                    }
                }
                Domain::Line => {
                    for k in 0..n_labels {
                        let xi = g0 + (g1 - g0) * k as f64 / (n_labels - 1) as f64;
                        let (x, uu) = invert_at(xi, &map, xs, &state.u);
                        xis.push(xi);
                        y.push(x);
                        u.push(uu);
                        h.push(xi - x);
                    }
                }
            }
        }
        Labeling::Identity => match state.domain {
            Domain::Periodic { period } => {
                for k in 0..n_labels {
                    let xi = xs[0] + period * k as f64 / n_labels as f64;
                    let (x, uu) = eval_state(state, xi);
                    debug_assert!((x - xi).abs() < 1e-12);
                    xis.push(xi);
                    y.push(xi);
                    u.push(uu);
                    h.push(g_at(xi, &map, xs, &cells) - xi);
                }
            }
            Domain::Line => {
                for k in 0..n_labels {
                    let xi = xs[0] + (xs[n - 1] - xs[0]) * k as f64 / (n_labels - 1) as f64;
                    let (_, uu) = eval_state(state, xi);
                    xis.push(xi);
                    y.push(xi);
                    u.push(uu);
                    h.push(g_at(xi, &map, xs, &cells) - xi);
                }
            }
        },
    }

    Ok(LagrangianState {
        xis,
        y,
        u,
        h,
        r: state.r,
        t: 0.0,
        domain,
        labeling,
    })
}

fn eval_state(state: &EulerianState, x: f64) -> (f64, f64) {
    let xs = &state.xs;
    let n = xs.len();
    if x <= xs[0] {
        return (x, state.u[0]);
    }
    if x >= xs[n - 1] {
        return (x, state.u[n - 1]);
    }
    let j = xs.partition_point(|&v| v <= x).saturating_sub(1);
    let frac = (x - xs[j]) / (xs[j + 1] - xs[j]);
    (x, state.u[j] + (state.u[j + 1] - state.u[j]) * frac)
}

/// Maps a label snapshot back to physical space on the caller's grid.
///
/// Flat runs of y (atoms of the energy measure) are reported in the output
/// measure; the velocity stays continuous across them.
pub fn to_eulerian(lstate: &LagrangianState, out_grid: &[f64]) -> Result<EulerianState> {
    if out_grid.len() < 2 {
        return Err(ChError::OutOfRange("output grid needs at least 2 samples".into()));
    }
    for w in out_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(ChError::NonMonotonic(
                "output grid must be strictly increasing".into(),
            ));
        }
    }

    // Working copies, extended by one period for seamless interpolation.
    let mut y = lstate.y.clone();
    let mut u = lstate.u.clone();
    let mut h = lstate.h.clone();
    let domain = match lstate.domain {
        LagDomain::Periodic { x_half, e_half } => {
            y.push(lstate.y[0] + 2.0 * x_half);
            u.push(lstate.u[0]);
            h.push(lstate.h[0] + 2.0 * e_half);
            Domain::Periodic { period: 2.0 * x_half }
        }
        LagDomain::Line => Domain::Line,
    };
    let span = y[y.len() - 1] - y[0];
    let flat_abs = FLAT_EPS_REL * span.max(1.0);

    for w in y.windows(2) {
        if w[1] - w[0] < -1e-12 {
            return Err(ChError::NonMonotonicY {
                max_drop: w[0] - w[1],
                index: 0,
            });
        }
    }

    let (y0, period) = match domain {
        Domain::Periodic { period } => (y[0], period),
        Domain::Line => (y[0], 0.0),
    };

    let m = out_grid.len();
    let mut out_u = vec![0.0; m];
    let mut out_ux = vec![0.0; m];
    let mut out_dens = vec![0.0; m];
    for (k, &x_raw) in out_grid.iter().enumerate() {
        // fold into the covered y window on periodic domains
        let x = if period > 0.0 {
            y0 + (x_raw - y0).rem_euclid(period)
        } else {
            x_raw
        };
        if x <= y[0] {
            out_u[k] = if period > 0.0 { u[0] } else { lstate.r };
            continue;
        }
        if x >= y[y.len() - 1] {
            out_u[k] = if period > 0.0 { u[0] } else { lstate.r };
            continue;
        }
        let j = y.partition_point(|&v| v <= x).saturating_sub(1);
        let dy = y[j + 1] - y[j];
        if dy.abs() <= flat_abs {
            out_u[k] = u[j];
            out_ux[k] = 0.0;
            continue;
        }
        let frac = ((x - y[j]) / dy).clamp(0.0, 1.0);
        out_u[k] = u[j] + (u[j + 1] - u[j]) * frac;
        out_ux[k] = (u[j + 1] - u[j]) / dy;
    }

    // Density by mass, not by pointwise slope: each output node gets the
    // diffuse H gain over its midpoint dual cell divided by the cell width,
    // so integrating the samples back recovers the transported mass exactly
    // and a collapsed label cell cannot leak a huge ratio into one node.
    let n_cells = y.len() - 1;
    let mut ac_gain = vec![0.0; n_cells];
    let mut cum = vec![0.0; n_cells + 1];
    for j in 0..n_cells {
        if y[j + 1] - y[j] > flat_abs {
            ac_gain[j] = (h[j + 1] - h[j]).max(0.0);
        }
        cum[j + 1] = cum[j] + ac_gain[j];
    }
    let total_ac = cum[n_cells];
    let h_ac_local = |x: f64| -> f64 {
        let j = y
            .partition_point(|&v| v <= x)
            .saturating_sub(1)
            .min(n_cells - 1);
        let dy = y[j + 1] - y[j];
        if dy > flat_abs {
            cum[j] + ac_gain[j] * ((x - y[j]) / dy).clamp(0.0, 1.0)
        } else {
            cum[j]
        }
    };
    let h_ac = |x: f64| -> f64 {
        if period > 0.0 {
            let winds = ((x - y0) / period).floor();
            let folded = (x - winds * period).clamp(y[0], y[n_cells]);
            winds * total_ac + h_ac_local(folded)
        } else {
            h_ac_local(x.clamp(y[0], y[n_cells]))
        }
    };
    for k in 0..m {
        let e_l = if k == 0 {
            out_grid[0]
        } else {
            0.5 * (out_grid[k - 1] + out_grid[k])
        };
        let e_r = if k == m - 1 {
            out_grid[m - 1]
        } else {
            0.5 * (out_grid[k] + out_grid[k + 1])
        };
        out_dens[k] = (h_ac(e_r) - h_ac(e_l)).max(0.0) / (e_r - e_l);
    }

    // Atoms: flat y runs carrying energy.
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut j = 0;
    while j + 1 < y.len() {
        if y[j + 1] - y[j] <= flat_abs {
            let start = j;
            let mut mass = 0.0;
            while j + 1 < y.len() && y[j + 1] - y[j] <= flat_abs {
                // the flat cell carries no width, so its H gain is pure mass
                mass += h[j + 1] - h[j];
                j += 1;
            }
            if mass > flat_abs {
                atoms.push((y[start], mass));
            }
        } else {
            j += 1;
        }
    }

    Ok(EulerianState {
        xs: out_grid.to_vec(),
        u: out_u,
        ux: out_ux,
        singular: vec![false; m],
        mu: Some(Measure {
            density: out_dens,
            atoms,
        }),
        r: lstate.r,
        domain,
    })
}
