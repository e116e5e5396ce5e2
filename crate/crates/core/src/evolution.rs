//! Time evolution of conservative solutions in label coordinates.
//!
//! The state (y, U, H) evolves by
//!
//! ```text
//! y_t = U,    U_t = -Q,    H_t = U^3 - r U^2 + r^2 U - 2 P (U - r)
//! ```
//!
//! where P and Q are convolutions of the source density
//! G = (U^2 + 2 r U - r^2) y_xi + H_xi against exponential kernels: on the
//! line P = 1/4 int e^{-|y(xi)-y(eta)|} G deta and
//! Q = -1/4 int sgn(xi - eta) e^{-|y(xi)-y(eta)|} G deta; on a spatial
//! period 2L the kernels become cosh(L - |dy|) / (4 sinh L) and
//! sinh(L - |dy|) / (4 sinh L).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::lagrangian::{LagDomain, LagrangianState};
use crate::profiles::TravelingWaveParams;
use crate::quad::Csum;

/// Time step bound: dt <= CFL_DEFAULT * dxi / max(1, sup |U|).
pub const CFL_DEFAULT: f64 = 0.3;

/// y decreases below this absolute drop abort the run; smaller wiggles only
/// route the kernel sums through the direct path.
pub const MONOTONE_DROP_TOL: f64 = 1e-12;

fn central_diff(v: &[f64], dxi: f64, jump: Option<f64>) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    match jump {
        Some(j) => {
            for i in 0..n {
                let vp = if i + 1 < n { v[i + 1] } else { v[0] + j };
                let vm = if i > 0 { v[i - 1] } else { v[n - 1] - j };
                d[i] = (vp - vm) / (2.0 * dxi);
            }
        }
        None => {
            for i in 1..n - 1 {
                d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dxi);
            }
            d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dxi);
            d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dxi);
        }
    }
    d
}

/// Allowed per-step undershoot of the y ordering, as a fraction of the mean
/// label cell. Labels colliding at a cusp contact overshoot by amounts far
/// below one cell each step; a drop past a neighbor by half a cell means the
/// integrator has genuinely lost the ordering.
const MONOTONE_CLAMP_TOL: f64 = 0.5;

/// Least-squares projection onto nondecreasing sequences (pool adjacent
/// violators). Pools collided entries at their mean, leaving the rest alone.
fn pool_monotone(z: &mut [f64]) {
    let n = z.len();
    let mut mean = vec![0.0_f64; n];
    let mut count = vec![0_usize; n];
    let mut top = 0;
    for i in 0..n {
        let mut m = z[i];
        let mut c = 1_usize;
        while top > 0 && mean[top - 1] > m {
            let kc = count[top - 1] as f64;
            m = (mean[top - 1] * kc + m * c as f64) / (kc + c as f64);
            c += count[top - 1];
            top -= 1;
        }
        mean[top] = m;
        count[top] = c;
        top += 1;
    }
    let mut idx = 0;
    for b in 0..top {
        for _ in 0..count[b] {
            z[idx] = mean[b];
            idx += 1;
        }
    }
}

/// Restores the y ordering after a step, erroring on real crossings.
///
/// Characteristics of a conservative solution touch but never cross, so any
/// discrete inversion is contact overshoot; it is projected out (which keeps
/// the kernel prefix sums and the area weights exact) unless its size says
/// the step itself went wrong. Periodic grids are cut at the widest gap so
/// the projection sees one monotone stretch.
fn clamp_monotone(y: &mut [f64], domain: &LagDomain) -> Result<()> {
    let n = y.len();
    if n < 2 {
        return Ok(());
    }
    let (span, period) = match domain {
        LagDomain::Periodic { x_half, .. } => (2.0 * x_half, Some(2.0 * x_half)),
        LagDomain::Line => (y[n - 1] - y[0], None),
    };
    let tol = MONOTONE_CLAMP_TOL * span.abs() / n as f64;
    let mut worst = 0.0_f64;
    let mut worst_i = 0;
    for i in 0..n - 1 {
        let drop = y[i] - y[i + 1];
        if drop > worst {
            worst = drop;
            worst_i = i;
        }
    }
    if let Some(p) = period {
        let drop = y[n - 1] - (y[0] + p);
        if drop > worst {
            worst = drop;
            worst_i = n - 1;
        }
    }
    if worst > tol {
        return Err(ChError::NonMonotonicY {
            max_drop: worst,
            index: worst_i,
        });
    }
    if worst <= 0.0 {
        return Ok(());
    }
    match period {
        None => pool_monotone(y),
        Some(p) => {
            let mut cut = n - 1;
            let mut widest = y[0] + p - y[n - 1];
            for i in 0..n - 1 {
                let gap = y[i + 1] - y[i];
                if gap > widest {
                    widest = gap;
                    cut = i;
                }
            }
            // unroll one period starting just past the widest gap
            let mut z = Vec::with_capacity(n);
            for j in 0..n {
                let i = (cut + 1 + j) % n;
                z.push(if i <= cut { y[i] + p } else { y[i] });
            }
            let lifted = z.clone();
            pool_monotone(&mut z);
            for j in 0..n {
                if z[j] != lifted[j] {
                    let i = (cut + 1 + j) % n;
                    y[i] = if i <= cut { z[j] - p } else { z[j] };
                }
            }
        }
    }
    Ok(())
}

/// Checks that y is non-decreasing (a hard failure past MONOTONE_DROP_TOL)
/// and reports whether any slack calls for the direct kernel path.

fn monotone_status(y: &[f64], domain: &LagDomain) -> Result<bool> {
    let mut needs_direct = false;
    let mut check = |dy: f64, index: usize| -> Result<()> {
        if dy < -MONOTONE_DROP_TOL {
            return Err(ChError::NonMonotonicY {
                max_drop: -dy,
                index,
            });
        }
        if dy < 0.0 {
            needs_direct = true;
        }
        Ok(())
    };
    for i in 0..y.len() - 1 {
        check(y[i + 1] - y[i], i)?;
    }
    if let LagDomain::Periodic { x_half, .. } = domain {
        check(y[0] + 2.0 * x_half - y[y.len() - 1], y.len() - 1)?;
    }
    Ok(needs_direct)
}

/// Convolves one label-space density (already multiplied by dxi) against
/// both kernels. Returns (P-type sum, Q-type sum).
fn kernel_sums(
    domain: &LagDomain,
    y: &[f64],
    mass: &[f64],
    direct: bool,
) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    if direct {
        return kernel_sums_direct(domain, y, mass);
    }
    let ybar = 0.5 * (y[0] + y[n - 1]);

    // ascending and descending exponential prefix sums
    let mut s1 = vec![0.0; n]; // sum_{j<i} e^{y_j - ybar} m_j
    let mut s2 = vec![0.0; n]; // sum_{j<i} e^{-(y_j - ybar)} m_j
    let mut s3 = vec![0.0; n]; // sum_{j>i} e^{y_j - ybar} m_j
    let mut s4 = vec![0.0; n]; // sum_{j>i} e^{-(y_j - ybar)} m_j
    let (mut a1, mut a2) = (Csum::new(), Csum::new());
    for i in 1..n {
        a1.add((y[i - 1] - ybar).exp() * mass[i - 1]);
        a2.add((-(y[i - 1] - ybar)).exp() * mass[i - 1]);
        s1[i] = a1.value();
        s2[i] = a2.value();
    }
    let (mut a3, mut a4) = (Csum::new(), Csum::new());
    for i in (0..n - 1).rev() {
        a3.add((y[i + 1] - ybar).exp() * mass[i + 1]);
        a4.add((-(y[i + 1] - ybar)).exp() * mass[i + 1]);
        s3[i] = a3.value();
        s4[i] = a4.value();
    }

    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    match domain {
        LagDomain::Line => {
            for i in 0..n {
                let bi = (-(y[i] - ybar)).exp();
                let ai = (y[i] - ybar).exp();
                p[i] = 0.25 * (bi * s1[i] + ai * s4[i] + mass[i]);
                q[i] = -0.25 * (bi * s1[i] - ai * s4[i]);
            }
        }
        LagDomain::Periodic { x_half, .. } => {
            let l = *x_half;
            let c = 1.0 / (4.0 * l.sinh());
            let (ep, em) = (l.exp(), (-l).exp());
            for i in 0..n {
                let bi = (-(y[i] - ybar)).exp();
                let ai = (y[i] - ybar).exp();
                let decaying_l = bi * s1[i];
                let decaying_r = ai * s4[i];
                let growing_l = ai * s2[i];
                let growing_r = bi * s3[i];
                p[i] = c * (0.5 * ep * (decaying_l + decaying_r + mass[i])
                    + 0.5 * em * (growing_l + growing_r + mass[i]));
                q[i] = -c * (0.5 * ep * (decaying_l - decaying_r)
                    - 0.5 * em * (growing_l - growing_r));
            }
        }
    }
    (p, q)
}

fn kernel_sums_direct(domain: &LagDomain, y: &[f64], mass: &[f64]) -> (Vec<f64>, Vec<f64>) {
    // Each output row is an independent compensated sum, so rows can run in
    // parallel without changing any result bit.
    let n = y.len();
    let rows: Vec<(f64, f64)> = match domain {
        LagDomain::Line => (0..n)
            .into_par_iter()
            .map(|i| {
                let (mut ap, mut aq) = (Csum::new(), Csum::new());
                for j in 0..n {
                    let k = 0.25 * (-(y[i] - y[j]).abs()).exp() * mass[j];
                    ap.add(k);
                    if j < i {
                        aq.add(-k);
                    } else if j > i {
                        aq.add(k);
                    }
                }
                (ap.value(), aq.value())
            })
            .collect(),
        LagDomain::Periodic { x_half, .. } => {
            let l = *x_half;
            let c = 1.0 / (4.0 * l.sinh());
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let (mut ap, mut aq) = (Csum::new(), Csum::new());
                    for j in 0..n {
                        let d = (y[i] - y[j]).abs();
                        ap.add(c * (l - d).cosh() * mass[j]);
                        let kq = c * (l - d).sinh() * mass[j];
                        if j < i {
                            aq.add(-kq);
                        } else if j > i {
                            aq.add(kq);
                        }
                    }
                    (ap.value(), aq.value())
                })
                .collect()
        }
    };
    rows.into_iter().unzip()
}

/// The nonlocal fields of a label snapshot.
#[derive(Debug, Clone)]
pub struct PqField {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// True when y had sub-tolerance dips and the direct path was used.
    pub warned: bool,
}

fn source_density(ls: &LagrangianState, dy: &[f64], dh: &[f64]) -> Vec<f64> {
    let r = ls.r;
    (0..ls.n())
        .map(|i| {
            let u = ls.u[i];
            (u * u + 2.0 * r * u - r * r) * dy[i] + dh[i]
        })
        .collect()
}

fn line_tails(ls: &LagrangianState) -> (Vec<f64>, Vec<f64>) {
    // Beyond the truncation window u = r identically, contributing
    // closed-form exponential tails to P and Q.
    let n = ls.n();
    let r2 = ls.r * ls.r;
    let (y0, y1) = (ls.y[0], ls.y[n - 1]);
    let mut tp = vec![0.0; n];
    let mut tq = vec![0.0; n];
    for i in 0..n {
        let er = (ls.y[i] - y1).exp();
        let el = (y0 - ls.y[i]).exp();
        tp[i] = 0.5 * r2 * (er + el);
        tq[i] = 0.5 * r2 * (er - el);
    }
    (tp, tq)
}

/// Computes P and Q for a label snapshot.
pub fn compute_pq(ls: &LagrangianState) -> Result<PqField> {
    compute_pq_inner(ls, false)
}

/// Same fields as compute_pq, but by the O(N^2) reference summation. Kept
/// public so integration checks can pin the fast path against it.
pub fn compute_pq_direct(ls: &LagrangianState) -> Result<PqField> {
    compute_pq_inner(ls, true)
}

fn compute_pq_inner(ls: &LagrangianState, force_direct: bool) -> Result<PqField> {
    let n = ls.n();
    if n < 4 {
        return Err(ChError::OutOfRange("need at least 4 labels".into()));
    }
    let needs_direct = monotone_status(&ls.y, &ls.domain)?;
    let direct = needs_direct || force_direct;
    let dxi = ls.label_spacing();
    let (jy, jh) = match ls.domain {
        LagDomain::Periodic { x_half, e_half } => (Some(2.0 * x_half), Some(2.0 * e_half)),
        LagDomain::Line => (None, None),
    };
    let dy = central_diff(&ls.y, dxi, jy);
    let dh = central_diff(&ls.h, dxi, jh);
    let g = source_density(ls, &dy, &dh);
    let mass: Vec<f64> = g.iter().map(|v| v * dxi).collect();
    let (mut p, mut q) = kernel_sums(&ls.domain, &ls.y, &mass, direct);
    if matches!(ls.domain, LagDomain::Line) {
        let (tp, tq) = line_tails(ls);
        for i in 0..n {
            p[i] += tp[i];
            q[i] += tq[i];
        }
    }
    Ok(PqField {
        p,
        q,
        warned: needs_direct,
    })
}

/// One evaluation of the right-hand side.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub dy: Vec<f64>,
    pub du: Vec<f64>,
    pub dh: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub warned: bool,
}

/// Evaluates the evolution right-hand side at a snapshot.
pub fn rhs(ls: &LagrangianState) -> Result<RhsEval> {
    let pq = compute_pq(ls)?;
    let r = ls.r;
    let n = ls.n();
    let mut du = vec![0.0; n];
    let mut dh = vec![0.0; n];
    for i in 0..n {
        let u = ls.u[i];
        du[i] = -pq.q[i];
        dh[i] = u * u * u - r * u * u + r * r * u - 2.0 * pq.p[i] * (u - r);
    }
    Ok(RhsEval {
        dy: ls.u.clone(),
        du,
        dh,
        p: pq.p,
        q: pq.q,
        warned: pq.warned,
    })
}

/// Discrete energy built from y and U alone:
/// E = sum [(U - r)^2 y_xi + U_xi^2 / y_xi] dxi.
///
/// Independent of H, so it is an honest conservation instrument for runs
/// that transport energy through H.
pub fn lagrangian_energy(ls: &LagrangianState) -> f64 {
    let n = ls.n();
    let dxi = ls.label_spacing();
    let jy = ls.domain.x_period();
    let dy = central_diff(&ls.y, dxi, jy);
    let du = central_diff(&ls.u, dxi, jy.map(|_| 0.0));
    let mut acc = Csum::new();
    for i in 0..n {
        let v = ls.u[i] - ls.r;
        let mut cell = v * v * dy[i];
        if dy[i] > 1e-14 {
            cell += du[i] * du[i] / dy[i];
        }
        acc.add(cell * dxi);
    }
    acc.value()
}

/// Integrator configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    /// Fixed step; None picks the largest step allowed by the CFL bound.
    pub dt: Option<f64>,
    pub cfl: f64,
    /// Snapshots kept, endpoints included.
    pub n_snapshots: usize,
}

impl SimConfig {
    pub fn new(t_end: f64) -> Self {
        SimConfig {
            t_end,
            dt: None,
            cfl: CFL_DEFAULT,
            n_snapshots: 9,
        }
    }
}

/// A completed run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<LagrangianState>,
    /// lagrangian_energy at each snapshot.
    pub energy: Vec<f64>,
    pub dt: f64,
    pub n_steps: usize,
    pub warned_fallback: bool,
}

/// Integrates the label system with fixed-step RK4.
pub fn simulate(initial: &LagrangianState, cfg: &SimConfig) -> Result<Trajectory> {
    if !(cfg.t_end > 0.0) {
        return Err(ChError::OutOfRange(format!("t_end = {} must be > 0", cfg.t_end)));
    }
    if cfg.n_snapshots < 2 {
        return Err(ChError::OutOfRange("need at least 2 snapshots".into()));
    }
    let n = initial.n();
    let dxi = initial.label_spacing();
    let sup_u = initial.u.iter().fold(0f64, |m, v| m.max(v.abs()));
    let dt_max = cfg.cfl * dxi / sup_u.max(1.0);

    let n_seg = cfg.n_snapshots - 1;
    let dt_target = match cfg.dt {
        Some(dt) => {
            if dt > dt_max * (1.0 + 1e-9) {
                return Err(ChError::CflViolation { dt, dt_max });
            }
            dt
        }
        None => dt_max,
    };
    let steps_per_seg = ((cfg.t_end / (n_seg as f64 * dt_target)).ceil() as usize).max(1);
    let n_steps = steps_per_seg * n_seg;
    let dt = cfg.t_end / n_steps as f64;

    let mut y = initial.y.clone();
    let mut u = initial.u.clone();
    let mut h = initial.h.clone();
    let mut warned = false;

    let snapshot = |y: &[f64], u: &[f64], h: &[f64], t: f64| LagrangianState {
        xis: initial.xis.clone(),
        y: y.to_vec(),
        u: u.to_vec(),
        h: h.to_vec(),
        r: initial.r,
        t,
        domain: initial.domain,
        labeling: initial.labeling,
    };

    let mut snapshots = vec![snapshot(&y, &u, &h, 0.0)];
    let mut energy = vec![lagrangian_energy(&snapshots[0])];

    let eval = |y: &[f64], u: &[f64], h: &[f64]| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, bool)> {
        let st = snapshot(y, u, h, 0.0);
        let e = rhs(&st)?;
        Ok((e.dy, e.du, e.dh, e.warned))
    };

    for step in 0..n_steps {
        let t = step as f64 * dt;
        let (k1y, k1u, k1h, w1) = eval(&y, &u, &h)?;
        let mut y2 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut h2 = vec![0.0; n];
        for i in 0..n {
            y2[i] = y[i] + 0.5 * dt * k1y[i];
            u2[i] = u[i] + 0.5 * dt * k1u[i];
            h2[i] = h[i] + 0.5 * dt * k1h[i];
        }
        clamp_monotone(&mut y2, &initial.domain)?;
        let (k2y, k2u, k2h, w2) = eval(&y2, &u2, &h2)?;
        for i in 0..n {
            y2[i] = y[i] + 0.5 * dt * k2y[i];
            u2[i] = u[i] + 0.5 * dt * k2u[i];
            h2[i] = h[i] + 0.5 * dt * k2h[i];
        }
        clamp_monotone(&mut y2, &initial.domain)?;
        let (k3y, k3u, k3h, w3) = eval(&y2, &u2, &h2)?;
        for i in 0..n {
            y2[i] = y[i] + dt * k3y[i];
            u2[i] = u[i] + dt * k3u[i];
            h2[i] = h[i] + dt * k3h[i];
        }
        clamp_monotone(&mut y2, &initial.domain)?;
        let (k4y, k4u, k4h, w4) = eval(&y2, &u2, &h2)?;
        warned = warned || w1 || w2 || w3 || w4;

        for i in 0..n {
            y[i] += dt / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
            u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
            h[i] += dt / 6.0 * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i]);
        }

        let t_next = t + dt;
        for i in 0..n {
            if !(y[i].is_finite() && u[i].is_finite() && h[i].is_finite()) {
                return Err(ChError::BlowUp { t: t_next });
            }
        }
        clamp_monotone(&mut y, &initial.domain)?;

        if (step + 1) % steps_per_seg == 0 {
            let snap = snapshot(&y, &u, &h, t_next);
            energy.push(lagrangian_energy(&snap));
            snapshots.push(snap);
        }
    }

    Ok(Trajectory {
        snapshots,
        energy,
        dt,
        n_steps,
        warned_fallback: warned,
    })
}

/// Q together with its exact time derivative along the flow.
#[derive(Debug, Clone)]
pub struct QtField {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub qt: Vec<f64>,
    pub warned: bool,
}

/// Time derivative of Q at a snapshot, by operator splitting:
/// Q_t = U P - P_op[U G] + Q_op[F] with F = 4 U^2 U_xi - 4 U Q y_xi - 2 P U_xi.
///
/// The split follows from differentiating the kernel (y_t = U pulls out the
/// local term) and substituting the evolution equations into G_t.
pub fn q_time_derivative(ls: &LagrangianState) -> Result<QtField> {
    let n = ls.n();
    let direct = monotone_status(&ls.y, &ls.domain)?;
    let dxi = ls.label_spacing();
    let (jy, jh) = match ls.domain {
        LagDomain::Periodic { x_half, e_half } => (Some(2.0 * x_half), Some(2.0 * e_half)),
        LagDomain::Line => (None, None),
    };
    let dy = central_diff(&ls.y, dxi, jy);
    let dh = central_diff(&ls.h, dxi, jh);
    let du = central_diff(&ls.u, dxi, jy.map(|_| 0.0));
    let g = source_density(ls, &dy, &dh);
    let mass: Vec<f64> = g.iter().map(|v| v * dxi).collect();
    let (mut p, mut q) = kernel_sums(&ls.domain, &ls.y, &mass, direct);
    let line = matches!(ls.domain, LagDomain::Line);
    if line {
        let (tp, tq) = line_tails(ls);
        for i in 0..n {
            p[i] += tp[i];
            q[i] += tq[i];
        }
    }

    let ug_mass: Vec<f64> = (0..n).map(|i| ls.u[i] * g[i] * dxi).collect();
    let (mut pop_ug, _) = kernel_sums(&ls.domain, &ls.y, &ug_mass, direct);
    if line {
        // tail density U G -> r * 2 r^2
        let r3 = ls.r * ls.r * ls.r;
        let (y0, y1) = (ls.y[0], ls.y[n - 1]);
        for i in 0..n {
            pop_ug[i] += 0.5 * r3 * ((ls.y[i] - y1).exp() + (y0 - ls.y[i]).exp());
        }
    }

    let f_mass: Vec<f64> = (0..n)
        .map(|i| {
            let u = ls.u[i];
            (4.0 * u * u * du[i] - 4.0 * u * q[i] * dy[i] - 2.0 * p[i] * du[i]) * dxi
        })
        .collect();
    let (_, qop_f) = kernel_sums(&ls.domain, &ls.y, &f_mass, direct);

    let qt: Vec<f64> = (0..n)
        .map(|i| ls.u[i] * p[i] - pop_ug[i] + qop_f[i])
        .collect();
    Ok(QtField {
        p,
        q,
        qt,
        warned: direct,
    })
}

/// Q_t at the cusp of a cuspon at the moment the profile is exact:
/// (M - s)(s - m)(s - z) / 2.
pub fn qt_cusp_value(params: &TravelingWaveParams) -> f64 {
    0.5 * params.jump_product()
}

/// Q_t on the plateau of a periodic stumpon whose cusped flank has
/// half-period l_flank, at plateau position y (distance from the middle):
/// sinh(l_flank) cosh(y) / (2 sinh(l_flank + ell)) * (M - s)(s - m)(s - z).
pub fn qt_plateau_periodic(params: &TravelingWaveParams, l_flank: f64, y: f64) -> f64 {
    params.jump_product() * l_flank.sinh() * y.cosh() / (2.0 * (l_flank + params.ell).sinh())
}

/// Line limit of the plateau value: e^{-ell} cosh(y) (M - s)(s - m)(s - z) / 2.
pub fn qt_plateau_line(params: &TravelingWaveParams, y: f64) -> f64 {
    0.5 * params.jump_product() * (-params.ell).exp() * y.cosh()
}

/// How the computed Q_t behaves across a stumpon plateau.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauTaylorReport {
    /// Q_t at the label nearest the plateau middle.
    pub center_value: f64,
    /// Closed-form prediction at the middle.
    pub center_expected: f64,
    /// max |Q_t(xi) - Q_t(0)| over the sampled plateau labels.
    pub max_deviation: f64,
    /// Smallest C with |Q_t(xi) - Q_t(0)| <= C xi^2 over those labels.
    pub c_bound: f64,
    /// Least-squares quadratic coefficient of Q_t(xi) - Q_t(0) vs xi^2.
    pub quad_coeff_fit: f64,
    /// Closed-form quadratic coefficient Q_t(0) / (2 (1 + (s - r)^2)^2).
    pub quad_coeff_expected: f64,
}

/// Samples Q_t across the plateau of a stumpon snapshot (standard labels)
/// and compares it with the closed form.
pub fn plateau_taylor_check(
    ls: &LagrangianState,
    params: &TravelingWaveParams,
) -> Result<PlateauTaylorReport> {
    let field = q_time_derivative(ls)?;
    let sr = params.speed - ls.r;
    let stretch = 1.0 + sr * sr; // d xi / d y on the plateau
    let xi_edge = stretch * params.ell;

    let center_expected = match ls.domain {
        LagDomain::Periodic { x_half, .. } => {
            qt_plateau_periodic(params, x_half - params.ell, 0.0)
        }
        LagDomain::Line => qt_plateau_line(params, 0.0),
    };

    let mut center_value = f64::NAN;
    let mut best = f64::INFINITY;
    for i in 0..ls.n() {
        if ls.xis[i].abs() < best {
            best = ls.xis[i].abs();
            center_value = field.qt[i];
        }
    }

    let dxi = ls.label_spacing();
    let mut max_deviation: f64 = 0.0;
    let mut c_bound: f64 = 0.0;
    let mut sx = Vec::new();
    let mut sy = Vec::new();
    for i in 0..ls.n() {
        let xi = ls.xis[i];
        if xi.abs() > 0.8 * xi_edge {
            continue;
        }
        let dev = (field.qt[i] - center_value).abs();
        max_deviation = max_deviation.max(dev);
        if xi.abs() > 2.0 * dxi {
            c_bound = c_bound.max(dev / (xi * xi));
        }
        sx.push(xi * xi);
        sy.push(field.qt[i] - center_value);
    }
    let quad_coeff_fit = crate::quad::ls_slope(&sx, &sy);
    Ok(PlateauTaylorReport {
        center_value,
        center_expected,
        max_deviation,
        c_bound,
        quad_coeff_fit,
        quad_coeff_expected: center_expected / (2.0 * stretch * stretch),
    })
}
