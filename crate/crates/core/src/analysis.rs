//! Diagnostics: flux balance across singular lines, weak-form residuals,
//! characteristic curves, and profile/shift comparisons.
//!
//! Along a traveling wave the energy flux
//!
//! ```text
//! f = u_x^2 (u - s) - s u^2 + 2 P u
//! ```
//!
//! is piecewise constant: -M m z on cusped flanks and s^3 on a plateau, so
//! the jump across a plateau edge is s^3 + M m z = (M - s)(s - m)(s - z).
//! Distributionally that jump is what the energy balance law concentrates
//! on the singular line x = s t + x_0.

use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::evolution::Trajectory;
use crate::helmholtz::{p_closed_form, EulerianState};
use crate::profiles::{peakon_half_period, Family, ProfileTable, TravelingWaveParams};
use crate::quad::{self, Csum};

/// Energy flux at a profile point, using the closed-form pressure.
pub fn flux(params: &TravelingWaveParams, u: f64, ux: f64) -> f64 {
    let s = params.speed;
    ux * ux * (u - s) - s * u * u + 2.0 * p_closed_form(params, u) * u
}

/// One resolution level of the one-sided flux extrapolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpSample {
    /// Distance from the singular line.
    pub d: f64,
    /// Flux on the side toward the profile center.
    pub inner: f64,
    /// Flux on the side away from the center.
    pub outer: f64,
}

/// One-sided flux limits across a singular line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpReport {
    pub x_line: f64,
    pub inner_limit: f64,
    pub outer_limit: f64,
    /// inner_limit - outer_limit.
    pub jump: f64,
    /// (M - s)(s - m)(s - z) for stumpons, 0 otherwise.
    pub expected: f64,
    pub samples: Vec<JumpSample>,
}

/// Extrapolates the flux to the rightmost singular line of a profile from
/// both sides, on geometrically shrinking offsets with Richardson steps
/// matched to the d^{2/3} cusp expansion.
pub fn conservation_jump(table: &ProfileTable) -> Result<JumpReport> {
    let p = &table.params;
    let x_line = match table
        .singular_points()
        .into_iter()
        .reduce(f64::max)
    {
        Some(x) => x,
        // peakons: use the corner; the flux is continuous there
        None => table.center,
    };
    let inner_avail = if p.ell > 0.0 {
        p.ell
    } else {
        match table.half_period {
            Some(h) => h,
            None => 1.0,
        }
    };
    let outer_avail = match table.half_period {
        Some(h) => h - p.ell,
        None => 1.0,
    };
    let d0 = 0.4 * inner_avail.min(outer_avail);
    if !(d0 > 0.0) {
        return Err(ChError::OutOfRange("profile too narrow for flux probes".into()));
    }

    let ratio: f64 = 0.5;
    let levels = 4;
    let mut samples = Vec::with_capacity(levels);
    let mut inner_vals = Vec::with_capacity(levels);
    let mut outer_vals = Vec::with_capacity(levels);
    for k in 0..levels {
        let d = d0 * ratio.powi(k as i32);
        let xi_in = x_line - d;
        let xi_out = x_line + d;
        let fin = flux(p, table.eval(xi_in), table.eval_deriv(xi_in));
        let fout = flux(p, table.eval(xi_out), table.eval_deriv(xi_out));
        samples.push(JumpSample {
            d,
            inner: fin,
            outer: fout,
        });
        inner_vals.push(fin);
        outer_vals.push(fout);
    }
    let exponents = [2.0 / 3.0, 4.0 / 3.0, 2.0];
    let inner_limit = quad::richardson_limit(&inner_vals, d0, ratio, &exponents);
    let outer_limit = quad::richardson_limit(&outer_vals, d0, ratio, &exponents);
    let expected = if p.family.is_stumpon() {
        p.jump_product()
    } else {
        0.0
    };
    Ok(JumpReport {
        x_line,
        inner_limit,
        outer_limit,
        jump: inner_limit - outer_limit,
        expected,
        samples,
    })
}

fn bump(z: f64) -> f64 {
    if z.abs() < 1.0 {
        (-1.0 / (1.0 - z * z)).exp()
    } else {
        0.0
    }
}

fn bump_deriv(z: f64) -> f64 {
    if z.abs() < 1.0 {
        let w = 1.0 - z * z;
        (-1.0 / w).exp() * (-2.0 * z / (w * w))
    } else {
        0.0
    }
}

/// Result of testing the energy balance law against a space-time bump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakFormReport {
    /// Integral of (u^2 + u_x^2) Phi_t + (u (u^2 + u_x^2) - u^3 + 2 P u) Phi_x.
    pub residual: f64,
    /// -jump * integral of Phi along the singular line.
    pub predicted: f64,
    /// Size of the integrand, for relative comparisons.
    pub scale: f64,
}

impl WeakFormReport {
    /// |residual - predicted| normalized by the larger of |predicted| and
    /// a fraction of the integrand size.
    pub fn relative_error(&self) -> f64 {
        (self.residual - self.predicted).abs() / self.predicted.abs().max(1e-3 * self.scale)
    }
}

/// Integrates the raw energy-balance weak form of a traveling wave against
/// a smooth bump centered on the leftmost singular line.
///
/// Coordinates are tilted to ride with the wave: rho = x - s t - x_0 with
/// x_0 the line's position at t = 0, so the singular set is rho = 0 and the
/// profile quantities depend on rho alone.
pub fn weak_form_check(table: &ProfileTable) -> Result<WeakFormReport> {
    let p = &table.params;
    let s = p.speed;
    let x0 = match table.singular_points().into_iter().reduce(f64::min) {
        Some(x) => x,
        None => table.center,
    };

    let t0 = 0.3f64;
    let r0 = 0.4f64;
    // the bump must not touch the neighboring singular lines
    if let Some(h) = table.half_period {
        let l_flank = h - p.ell;
        let gap = if p.ell > 0.0 {
            2.0 * l_flank.min(p.ell)
        } else {
            2.0 * l_flank
        };
        if r0 >= gap {
            return Err(ChError::OutOfRange(format!(
                "bump half-width {r0} does not fit between singular lines (gap {gap})"
            )));
        }
    }

    let rule_t = quad::gauss_legendre(24);
    let rule_r = quad::gauss_legendre(6);
    let nj = 48;

    // time integral of the bump along the line, for the prediction
    let mut phi_line = Csum::new();
    for &(zt, wt) in &rule_t {
        let tau = t0 * zt;
        phi_line.add(t0 * wt * bump(tau / t0) * bump(0.0));
    }

    let mut residual = Csum::new();
    let mut scale = Csum::new();
    for &(zt, wt) in &rule_t {
        let tau = t0 * zt;
        let b1 = bump(tau / t0);
        let db1 = bump_deriv(tau / t0) / t0;
        // rho panels graded cubically into the singular line from each side
        for side in [-1.0f64, 1.0] {
            for j in 0..nj {
                let a = r0 * (j as f64 / nj as f64).powi(3);
                let b = r0 * ((j + 1) as f64 / nj as f64).powi(3);
                for &(zr, wr) in &rule_r {
                    let d = 0.5 * (a + b) + 0.5 * (b - a) * zr;
                    let rho = side * d;
                    let w2 = wt * t0 * wr * 0.5 * (b - a);
                    let b2 = bump(rho / r0);
                    let db2 = bump_deriv(rho / r0) / r0;
                    let x_arg = rho + x0; // profile coordinate
                    let u = table.eval(x_arg);
                    let ux = table.eval_deriv(x_arg);
                    let pres = p_closed_form(p, u);
                    let a_dens = u * u + ux * ux;
                    let b_flux = u * a_dens - u * u * u + 2.0 * pres * u;
                    let phi_t = db1 * b2 - s * b1 * db2;
                    let phi_x = b1 * db2;
                    residual.add(w2 * (a_dens * phi_t + b_flux * phi_x));
                    scale.add(w2 * ((a_dens * phi_t).abs() + (b_flux * phi_x).abs()));
                }
            }
        }
    }

    let jump = if p.family.is_stumpon() {
        // crossing rho = 0 upward at the left plateau edge goes flank -> plateau
        p.jump_product()
    } else {
        0.0
    };
    Ok(WeakFormReport {
        residual: residual.value(),
        predicted: -jump * phi_line.value(),
        scale: scale.value(),
    })
}

/// Closed-form co-moving characteristic of a peakon: w(t) with
/// dw/dt = phi(w) - s, w measured from the profile center.
///
/// Decay: w = sgn(w0) ln(1 + (e^{|w0|} - 1) e^{-sgn(w0) s t}). Periodic:
/// w = -2 artanh(tanh(L/2) tanh(s t tanh(L) / 2 - artanh(tanh(w0/2)/tanh(L/2)))),
/// with |w0| = L the (unstable) crest fixed points.
pub fn peakon_characteristic_exact(params: &TravelingWaveParams, w0: f64, t: f64) -> f64 {
    let s = params.speed;
    match params.family {
        Family::PeakonDecay => {
            if w0 == 0.0 {
                0.0
            } else {
                let sg = w0.signum();
                sg * (1.0 + (w0.abs().exp_m1()) * (-sg * s * t).exp()).ln()
            }
        }
        Family::PeakonPeriodic => {
            let l = peakon_half_period(params);
            if w0.abs() >= l * (1.0 - 1e-12) {
                return w0.signum() * l;
            }
            let beta = ((0.5 * w0).tanh() / (0.5 * l).tanh()).atanh();
            let arg = 0.5 * s * t * l.tanh() - beta;
            -2.0 * ((0.5 * l).tanh() * arg.tanh()).atanh()
        }
        _ => f64::NAN,
    }
}

/// Integrates the same characteristic numerically with RK4 against the
/// tabulated profile.
pub fn characteristic_numeric(table: &ProfileTable, w0: f64, t_end: f64, n_steps: usize) -> f64 {
    let s = table.params.speed;
    let f = |w: f64| table.eval(table.center + w) - s;
    let dt = t_end / n_steps as f64;
    let mut w = w0;
    for _ in 0..n_steps {
        let k1 = f(w);
        let k2 = f(w + 0.5 * dt * k1);
        let k3 = f(w + 0.5 * dt * k2);
        let k4 = f(w + dt * k3);
        w += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

/// Exact-vs-numeric characteristic mismatch, per label offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacteristicsReport {
    pub w0: Vec<f64>,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

/// Cross-checks the closed-form curves against a fresh ODE integration for a
/// handful of seeds; a cheap self-consistency gauge for diagnostics output.
pub fn characteristic_selfcheck(
    table: &ProfileTable,
    seeds: &[f64],
    t_end: f64,
    n_steps: usize,
) -> CharacteristicsReport {
    let params = &table.params;
    let mut errors = Vec::with_capacity(seeds.len());
    let mut max_error: f64 = 0.0;
    for &w0 in seeds {
        let mut worst: f64 = 0.0;
        // compare along the way, not just at the end
        for k in 1..=8 {
            let t = t_end * k as f64 / 8.0;
            let exact = peakon_characteristic_exact(params, w0, t);
            let numeric = characteristic_numeric(table, w0, t, (n_steps * k / 8).max(16));
            worst = worst.max((numeric - exact).abs());
        }
        errors.push(worst);
        max_error = max_error.max(worst);
    }
    CharacteristicsReport {
        w0: seeds.to_vec(),
        errors,
        max_error,
    }
}

/// Compares simulated label positions against the closed-form peakon
/// characteristics: per label, the sup over snapshot times of
/// |y_numeric - y_exact|, with y_exact = x0 + s t + w(t; xi - x0).
///
/// Expects a run started from peakon initial data with identity labeling.
/// Periodic positions are compared modulo the period.
pub fn characteristics_compare(
    traj: &Trajectory,
    table: &ProfileTable,
    x0: f64,
) -> Result<CharacteristicsReport> {
    let params = &table.params;
    if params.family.is_cusped() {
        return Err(ChError::OutOfRange(format!(
            "characteristic curves need a peakon profile, got {}",
            params.family.name()
        )));
    }
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| ChError::OutOfRange("empty trajectory".into()))?;
    let speed = params.speed;
    let period = table.half_period.map(|l| 2.0 * l);
    let n = first.n();
    let w0: Vec<f64> = first
        .xis
        .iter()
        .map(|&xi| {
            let mut w = xi - x0;
            if let Some(p) = period {
                // reduce into [-L, L]; FP spill past a crest stays clamped
                w -= p * (w / p).round();
                w = w.clamp(-0.5 * p, 0.5 * p);
            }
            w
        })
        .collect();
    let mut errors = vec![0.0_f64; n];
    for snap in &traj.snapshots {
        let t = snap.t;
        for i in 0..n {
            let y_exact = x0 + speed * t + peakon_characteristic_exact(params, w0[i], t);
            let mut d = snap.y[i] - y_exact;
            if let Some(p) = period {
                d -= p * (d / p).round();
            }
            let d = d.abs();
            if d > errors[i] {
                errors[i] = d;
            }
        }
    }
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    Ok(CharacteristicsReport {
        w0,
        errors,
        max_error,
    })
}

/// Best translation delta aligning a snapshot with a reference profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftFit {
    pub delta: f64,
    pub sup_error: f64,
    pub l2_error: f64,
}

/// Golden-section fit of u(x) against table(x - base_shift - delta).
pub fn profile_mismatch(
    state: &EulerianState,
    table: &ProfileTable,
    base_shift: f64,
    window: f64,
) -> ShiftFit {
    let l2 = |delta: f64| -> f64 {
        let mut acc = Csum::new();
        for (i, &x) in state.xs.iter().enumerate() {
            let d = state.u[i] - table.eval(x - base_shift - delta);
            acc.add(d * d);
        }
        acc.value()
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-window, window);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (l2(c), l2(d));
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = l2(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = l2(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let delta = 0.5 * (a + b);
    let mut sup: f64 = 0.0;
    for (i, &x) in state.xs.iter().enumerate() {
        sup = sup.max((state.u[i] - table.eval(x - base_shift - delta)).abs());
    }
    ShiftFit {
        delta,
        sup_error: sup,
        l2_error: l2(delta).sqrt(),
    }
}

/// Largest deviation of u from the plateau height near a given center.
pub fn plateau_deviation(state: &EulerianState, params: &TravelingWaveParams, center: f64) -> f64 {
    let width = 0.5 * params.ell;
    let period = match state.domain {
        crate::helmholtz::Domain::Periodic { period } => Some(period),
        crate::helmholtz::Domain::Line => None,
    };
    let mut worst: f64 = 0.0;
    for (i, &x) in state.xs.iter().enumerate() {
        let mut d = x - center;
        if let Some(p) = period {
            d = (d % p + p) % p;
            if d > 0.5 * p {
                d -= p;
            }
        }
        if d.abs() <= width {
            worst = worst.max((state.u[i] - params.speed).abs());
        }
    }
    worst
}
