//! Traveling-wave profiles: peakons, cuspons and stumpons.
//!
//! A profile is a bounded wave u(t, x) = phi(x - s t) whose shape satisfies
//!
//! ```text
//! (phi')^2 = (M - phi)(phi - m)(phi - z) / (s - phi)
//! ```
//!
//! with z = s - M - m and integration constant a = -M m - (M + m) z. The
//! admissible root orderings select the family: peakons have s = M, cuspons
//! have z <= m < s < M, and stumpons are cuspons with a = s^2 into which a
//! flat plateau at height s has been spliced.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::quad;

/// Relative tolerance used when validating parameter identities.
pub const PARAM_TOL_REL: f64 = 1e-12;

/// Decay profiles are truncated where |phi - m| falls below this fraction of s - m.
pub const DECAY_FLOOR_REL: f64 = 1e-8;

/// Below this relative gap between z and m the half-period integral is divergent.
pub const Z_DEGENERACY_FLOOR_REL: f64 = 1e-10;

/// Wave family labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PeakonDecay,
    PeakonPeriodic,
    CusponDecay,
    CusponPeriodic,
    StumponDecay,
    StumponPeriodic,
}

impl Family {
    pub fn is_periodic(self) -> bool {
        matches!(
            self,
            Family::PeakonPeriodic | Family::CusponPeriodic | Family::StumponPeriodic
        )
    }

    pub fn is_cusped(self) -> bool {
        !matches!(self, Family::PeakonDecay | Family::PeakonPeriodic)
    }

    pub fn is_stumpon(self) -> bool {
        matches!(self, Family::StumponDecay | Family::StumponPeriodic)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::PeakonDecay => "peakon-decay",
            Family::PeakonPeriodic => "peakon-periodic",
            Family::CusponDecay => "cuspon-decay",
            Family::CusponPeriodic => "cuspon-periodic",
            Family::StumponDecay => "stumpon-decay",
            Family::StumponPeriodic => "stumpon-periodic",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = ChError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peakon-decay" => Ok(Family::PeakonDecay),
            "peakon-periodic" => Ok(Family::PeakonPeriodic),
            "cuspon-decay" => Ok(Family::CusponDecay),
            "cuspon-periodic" => Ok(Family::CusponPeriodic),
            "stumpon-decay" => Ok(Family::StumponDecay),
            "stumpon-periodic" => Ok(Family::StumponPeriodic),
            other => Err(ChError::OutOfRange(format!("unknown family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Validated parameters of a traveling wave.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TravelingWaveParams {
    /// Wave crest height M.
    #[serde(rename = "M")]
    pub crest: f64,
    /// Trough (or asymptotic) level m.
    #[serde(rename = "m")]
    pub trough: f64,
    /// Wave speed s.
    #[serde(rename = "s")]
    pub speed: f64,
    /// Third root z = s - M - m of the shape cubic.
    pub z: f64,
    /// Integration constant a = -M m - (M + m) z.
    pub a: f64,
    /// Plateau half-width (zero unless the family is a stumpon).
    pub ell: f64,
    pub family: Family,
}

impl TravelingWaveParams {
    /// (M - phi)(phi - m)(phi - z).
    pub fn cubic(&self, phi: f64) -> f64 {
        (self.crest - phi) * (phi - self.trough) * (phi - self.z)
    }

    /// Squared slope (phi')^2 at height phi, away from phi = s.
    pub fn slope_sq(&self, phi: f64) -> f64 {
        self.cubic(phi) / (self.speed - phi)
    }

    /// (M - s)(s - m)(s - z), the product controlling the cusp-line flux jump.
    pub fn jump_product(&self) -> f64 {
        (self.crest - self.speed) * (self.speed - self.trough) * (self.speed - self.z)
    }

    /// Mirror image under u -> -u, which maps downward waves to upward ones.
    pub fn reflected(&self) -> Self {
        TravelingWaveParams {
            crest: -self.crest,
            trough: -self.trough,
            speed: -self.speed,
            z: -self.z,
            a: self.a,
            ell: self.ell,
            family: self.family,
        }
    }

    /// True for downward (mirror-image) waves, where s < m.
    pub fn is_downward(&self) -> bool {
        self.speed < self.trough
    }

    fn scale(&self) -> f64 {
        1f64.max(self.crest.abs())
            .max(self.trough.abs())
            .max(self.speed.abs())
    }
}

/// Validates the root ordering for the requested family and fills in z and a.
pub fn derive_params(
    crest: f64,
    trough: f64,
    speed: f64,
    ell: f64,
    family: Family,
) -> Result<TravelingWaveParams> {
    for (name, v) in [("M", crest), ("m", trough), ("s", speed), ("ell", ell)] {
        if !v.is_finite() {
            return Err(ChError::OutOfRange(format!("{name} = {v} is not finite")));
        }
    }
    let z = speed - crest - trough;
    let a = -crest * trough - (crest + trough) * z;
    let params = TravelingWaveParams {
        crest,
        trough,
        speed,
        z,
        a,
        ell,
        family,
    };
    let tol = PARAM_TOL_REL * params.scale();
    let ordered = |lo: f64, hi: f64| hi - lo > tol;

    if !family.is_stumpon() && ell != 0.0 {
        return Err(ChError::OrderingViolation(format!(
            "family {family} does not carry a plateau but ell = {ell}"
        )));
    }

    match family {
        Family::PeakonDecay => {
            if trough.abs() > tol {
                return Err(ChError::OrderingViolation(format!(
                    "peakon-decay requires m = 0, got m = {trough}"
                )));
            }
            if (speed - crest).abs() > tol {
                return Err(ChError::OrderingViolation(format!(
                    "peakon-decay requires s = M, got s = {speed}, M = {crest}"
                )));
            }
            if speed.abs() <= tol {
                return Err(ChError::OrderingViolation(
                    "peakon-decay requires a nonzero speed".into(),
                ));
            }
        }
        Family::PeakonPeriodic => {
            if (speed - crest).abs() > tol {
                return Err(ChError::OrderingViolation(format!(
                    "peakon-periodic requires s = M, got s = {speed}, M = {crest}"
                )));
            }
            let upward = ordered(0.0, trough) && ordered(trough, speed);
            let downward = ordered(trough, 0.0) && ordered(speed, trough);
            if !(upward || downward) {
                return Err(ChError::OrderingViolation(format!(
                    "peakon-periodic requires 0 < m < s or s < m < 0, got m = {trough}, s = {speed}"
                )));
            }
        }
        Family::CusponPeriodic | Family::StumponPeriodic => {
            let upward = ordered(z, trough) && ordered(trough, speed) && ordered(speed, crest);
            let downward = ordered(trough, z) && ordered(speed, trough) && ordered(crest, speed);
            if !(upward || downward) {
                return Err(ChError::OrderingViolation(format!(
                    "periodic cuspon requires z < m < s < M (or the mirror image), \
                     got z = {z}, m = {trough}, s = {speed}, M = {crest}"
                )));
            }
        }
        Family::CusponDecay | Family::StumponDecay => {
            if (z - trough).abs() > tol {
                return Err(ChError::OrderingViolation(format!(
                    "decay cuspon requires z = m, i.e. 2m = s - M; got z = {z}, m = {trough}"
                )));
            }
            let upward = ordered(trough, speed) && ordered(speed, crest);
            let downward = ordered(speed, trough) && ordered(crest, speed);
            if !(upward || downward) {
                return Err(ChError::OrderingViolation(format!(
                    "decay cuspon requires m < s < M (or the mirror image), \
                     got m = {trough}, s = {speed}, M = {crest}"
                )));
            }
        }
    }

    if family.is_stumpon() {
        let s_sq = speed * speed;
        if (a - s_sq).abs() > PARAM_TOL_REL * s_sq.max(1.0) || ell <= 0.0 {
            return Err(ChError::StumponInadmissible { a, s_sq, ell });
        }
    }

    Ok(params)
}

/// Internal parametric representation of one cusped half-profile.
///
/// With y(theta) = m + (s - m) sin^2(theta) the distance from the cusp is
/// x(theta) = int_theta^{pi/2} w dtheta, w = 2 (s - m) cos^2(theta) /
/// (sqrt(M - y) sqrt(y - z)). The integrand is smooth for periodic cuspons
/// and has an integrable 1/theta blow-up for decay cuspons, which is where
/// the truncation floor enters.
#[derive(Debug)]
pub(crate) struct CusponGeometry {
    params: TravelingWaveParams,
    /// Distance from the cusp, ascending from 0.
    pub(crate) x: Vec<f64>,
    /// Profile height at each x entry.
    pub(crate) phi: Vec<f64>,
    /// Half-period L for periodic families, truncation half-width otherwise.
    pub(crate) extent: f64,
    periodic: bool,
}

fn cuspon_weight(p: &TravelingWaveParams, theta: f64) -> f64 {
    let sm = p.speed - p.trough;
    let y = p.trough + sm * theta.sin().powi(2);
    let c = theta.cos();
    2.0 * sm * c * c / ((p.crest - y).sqrt() * (y - p.z).sqrt())
}

impl CusponGeometry {
    /// Builds the parametric table for upward parameters.
    fn build(params: &TravelingWaveParams, n_half: usize) -> Result<Self> {
        assert!(!params.is_downward());
        let sm = params.speed - params.trough;
        let periodic = params.family.is_periodic();
        if periodic && params.trough - params.z <= Z_DEGENERACY_FLOOR_REL * sm {
            return Err(ChError::QuadratureNonconvergent(
                "half-period integral diverges as the third root approaches the trough level"
                    .into(),
            ));
        }

        let theta_lo = if periodic {
            0.0
        } else {
            (DECAY_FLOOR_REL.sqrt()).asin()
        };

        // Base grid plus a logarithmic tail so s - phi is resolved down to
        // 1e-9 of the wave amplitude: the cusp behaves like s - phi ~ x^{2/3}
        // and linear interpolation needs the accumulation to stay accurate.
        let n_base = (2 * n_half).clamp(2048, 65536);
        let mut thetas: Vec<f64> = Vec::with_capacity(n_base + n_base / 2);
        if periodic {
            for i in 0..=n_base {
                thetas.push(theta_lo + (std::f64::consts::FRAC_PI_2 - theta_lo) * i as f64 / n_base as f64);
            }
        } else {
            // geometric spacing out of the truncation corner, uniform beyond
            let theta_break = 0.2f64;
            let n_geo = n_base / 3;
            let ratio = (theta_break / theta_lo).powf(1.0 / n_geo as f64);
            let mut t = theta_lo;
            for _ in 0..n_geo {
                thetas.push(t);
                t *= ratio;
            }
            let n_rest = n_base - n_geo;
            for i in 0..=n_rest {
                thetas.push(theta_break + (std::f64::consts::FRAC_PI_2 - theta_break) * i as f64 / n_rest as f64);
            }
        }
        // Logarithmically graded refinement of s - phi toward the cusp.
        let n_tail = n_base / 4;
        let g_min = 1e-9f64;
        let g_max = 0.2f64;
        for k in 0..n_tail {
            let g = g_min * (g_max / g_min).powf(k as f64 / (n_tail - 1) as f64);
            let theta = g.sqrt().min(1.0).acos();
            thetas.push(theta);
        }
        thetas.push(std::f64::consts::FRAC_PI_2);
        thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let rule = quad::gauss_legendre(5);
        let n = thetas.len();
        let mut x = vec![0.0; n];
        let mut acc = quad::Csum::new();
        for i in (0..n - 1).rev() {
            acc.add(quad::integrate_gl(
                &mut |t| cuspon_weight(params, t),
                thetas[i],
                thetas[i + 1],
                &rule,
            ));
            x[i] = acc.value();
        }
        let phi: Vec<f64> = thetas
            .iter()
            .map(|t| params.trough + sm * t.sin().powi(2))
            .collect();

        // Reverse so distance from the cusp ascends.
        let extent = x[0];
        let x: Vec<f64> = x.into_iter().rev().collect();
        let phi: Vec<f64> = phi.into_iter().rev().collect();
        Ok(CusponGeometry {
            params: *params,
            x,
            phi,
            extent,
            periodic,
        })
    }

    /// Height at distance d >= 0 from the cusp.
    fn phi_at(&self, d: f64) -> f64 {
        let p = &self.params;
        if d <= 0.0 {
            return p.speed;
        }
        if d >= self.extent {
            return if self.periodic { self.phi[self.x.len() - 1] } else { p.trough };
        }
        let j = match self.x.binary_search_by(|v| v.partial_cmp(&d).unwrap()) {
            Ok(j) => return self.phi[j],
            Err(j) => j,
        };
        if j == 1 {
            // leading cusp law s - phi = c d^{2/3}, calibrated on the first node
            let c = (p.speed - self.phi[1]) / self.x[1].powf(2.0 / 3.0);
            return p.speed - c * d.powf(2.0 / 3.0);
        }
        let (x0, x1) = (self.x[j - 1], self.x[j]);
        let (f0, f1) = (self.phi[j - 1], self.phi[j]);
        f0 + (f1 - f0) * (d - x0) / (x1 - x0)
    }

    /// Signed slope d phi / d x at distance d > 0 from the cusp (negative:
    /// the profile falls away from the crest).
    fn dphi_at(&self, d: f64) -> f64 {
        let p = &self.params;
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if d >= self.extent {
            return if self.periodic { 0.0 } else { -0.0 };
        }
        let phi = self.phi_at(d);
        let sq = p.slope_sq(phi).max(0.0);
        -sq.sqrt()
    }
}

/// Tabulated traveling-wave profile over one period (or a truncated line).
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub params: TravelingWaveParams,
    /// Position of the profile center (cusp, peak, or plateau midpoint).
    pub center: f64,
    /// Strictly increasing sample positions.
    pub xs: Vec<f64>,
    /// Profile heights at the samples.
    pub vals: Vec<f64>,
    /// Right-sided slope at each sample; +-inf at cusp samples.
    pub derivs: Vec<f64>,
    /// Marks samples where the slope blows up.
    pub singular: Vec<bool>,
    /// Half the spatial period (L, or L + ell for stumpons); None for decay waves.
    pub half_period: Option<f64>,
    geom: Option<Arc<CusponGeometry>>,
    /// -1 for downward (mirror-image) waves evaluated through the geometry.
    sign: f64,
}

impl ProfileTable {
    /// Positions of the samples flagged singular.
    pub fn singular_points(&self) -> Vec<f64> {
        self.xs
            .iter()
            .zip(&self.singular)
            .filter(|(_, &s)| s)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn period(&self) -> Option<f64> {
        self.half_period.map(|h| 2.0 * h)
    }

    /// Shifts the profile (and its singular markers) by dx.
    pub fn translated(&self, dx: f64) -> ProfileTable {
        let mut out = self.clone();
        out.center += dx;
        for x in &mut out.xs {
            *x += dx;
        }
        out
    }

    /// Distance from the center, folded into [0, half-period] for periodic waves.
    fn fold(&self, x: f64) -> f64 {
        let d = x - self.center;
        match self.half_period {
            Some(h) => {
                let p = 2.0 * h;
                let mut r = (d % p + p) % p;
                if r > h {
                    r = p - r;
                }
                r
            }
            None => d.abs(),
        }
    }

    /// Evaluates the profile at an arbitrary position.
    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.params;
        let d = self.fold(x);
        match p.family {
            Family::PeakonDecay => p.speed * (-d).exp(),
            Family::PeakonPeriodic => {
                let l = self.half_period.unwrap();
                p.speed * d.cosh() / l.cosh()
            }
            Family::CusponDecay | Family::CusponPeriodic => {
                let g = self.geom.as_ref().unwrap();
                self.sign * g.phi_at(d)
            }
            Family::StumponDecay | Family::StumponPeriodic => {
                let g = self.geom.as_ref().unwrap();
                if d <= p.ell {
                    p.speed
                } else {
                    self.sign * g.phi_at(d - p.ell)
                }
            }
        }
    }

    /// Signed slope at an arbitrary position (one-sided from the right of
    /// the center for symmetric corners; +-inf at cusp lines).
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let p = &self.params;
        let d = self.fold(x);
        // The folded distance rises to the right of the center, so flip the
        // slope sign on mirrored stretches.
        let raw = x - self.center;
        let orient = match self.half_period {
            Some(h) => {
                let pp = 2.0 * h;
                let r = ((raw % pp) + pp) % pp;
                if r > h {
                    -1.0
                } else {
                    1.0
                }
            }
            None => {
                if raw < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        let slope = match p.family {
            Family::PeakonDecay => -p.speed * (-d).exp(),
            Family::PeakonPeriodic => {
                let l = self.half_period.unwrap();
                p.speed * d.sinh() / l.cosh()
            }
            Family::CusponDecay | Family::CusponPeriodic => {
                let g = self.geom.as_ref().unwrap();
                self.sign * g.dphi_at(d)
            }
            Family::StumponDecay | Family::StumponPeriodic => {
                if d <= p.ell {
                    0.0
                } else {
                    let g = self.geom.as_ref().unwrap();
                    self.sign * g.dphi_at(d - p.ell)
                }
            }
        };
        orient * slope
    }
}

/// Builds a peakon table on the caller's grid with the corner at x0.
///
/// Decay peakons are s e^{-|x - x0|}. Periodic peakons place the trough at
/// x0 and read (s / cosh L) cosh(x - x0) on |x - x0| <= L with half-period
/// L = 2 ln((sqrt|s - m| + sqrt|s + m|) / sqrt(2|m|)).
pub fn peakon_profile(
    params: &TravelingWaveParams,
    x0: f64,
    grid: &[f64],
) -> Result<ProfileTable> {
    if grid.len() < 2 {
        return Err(ChError::OutOfRange("grid needs at least two samples".into()));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(ChError::NonMonotonic(
                "profile grid must be strictly increasing".into(),
            ));
        }
    }
    let half_period = match params.family {
        Family::PeakonDecay => None,
        Family::PeakonPeriodic => Some(peakon_half_period(params)),
        other => {
            return Err(ChError::OutOfRange(format!(
                "peakon_profile called with family {other}"
            )))
        }
    };
    let mut table = ProfileTable {
        params: *params,
        center: x0,
        xs: grid.to_vec(),
        vals: Vec::with_capacity(grid.len()),
        derivs: Vec::with_capacity(grid.len()),
        singular: vec![false; grid.len()],
        half_period,
        geom: None,
        sign: 1.0,
    };
    for &x in grid {
        table.vals.push(table.eval(x));
        table.derivs.push(table.eval_deriv(x));
    }
    Ok(table)
}

/// Half-period of a periodic peakon.
pub fn peakon_half_period(params: &TravelingWaveParams) -> f64 {
    let (s, m) = (params.speed, params.trough);
    2.0 * (((s - m).abs().sqrt() + (s + m).abs().sqrt()) / (2.0 * m.abs()).sqrt()).ln()
}

/// Uniform grid covering one full peakon wave, corner(s) landed on exactly.
pub fn peakon_default_grid(params: &TravelingWaveParams, x0: f64, n_samples: usize) -> Vec<f64> {
    let half = match params.family {
        Family::PeakonPeriodic => peakon_half_period(params),
        _ => -(DECAY_FLOOR_REL.ln()), // where |phi| / |s| reaches the decay floor
    };
    let n_half = (n_samples / 2).max(8);
    let mut grid = Vec::with_capacity(2 * n_half + 1);
    for i in -(n_half as i64)..=(n_half as i64) {
        grid.push(x0 + half * i as f64 / n_half as f64);
    }
    grid
}

/// Half-period L of the cusped part of a periodic cuspon or stumpon, i.e.
/// the distance from the cusp to the adjacent trough.
///
/// Computed as L = int_m^s sqrt(s-y) dy / (sqrt(M-y) sqrt(y-m) sqrt(y-z))
/// after the substitution y = m + (s - m) sin^2(theta), which removes both
/// endpoint singularities. Reports divergence when z approaches m.
pub fn cuspon_half_period(params: &TravelingWaveParams, quad_tol: f64) -> Result<f64> {
    let p = if params.is_downward() {
        params.reflected()
    } else {
        *params
    };
    if !p.family.is_cusped() {
        return Err(ChError::OutOfRange(format!(
            "cuspon_half_period called with family {}",
            p.family
        )));
    }
    let sm = p.speed - p.trough;
    if p.trough - p.z <= Z_DEGENERACY_FLOOR_REL * sm {
        return Err(ChError::QuadratureNonconvergent(
            "half-period integral diverges as the third root approaches the trough level".into(),
        ));
    }
    quad::adaptive_simpson(
        &mut |t| cuspon_weight(&p, t),
        0.0,
        std::f64::consts::FRAC_PI_2,
        quad_tol,
    )
}

fn build_cusped_table(
    params: &TravelingWaveParams,
    n_samples: usize,
    ell: f64,
) -> Result<ProfileTable> {
    let (build_params, sign) = if params.is_downward() {
        (params.reflected(), -1.0)
    } else {
        (*params, 1.0)
    };
    let n_half = (n_samples / 2).max(32);
    let geom = Arc::new(CusponGeometry::build(&build_params, n_half)?);
    let flank_extent = geom.extent;

    // Pick an evenly indexed subset of the dense parametric table so the
    // emitted samples are exact, then mirror around the center.
    let dense_n = geom.x.len();
    let n_flank = if ell > 0.0 {
        let frac = flank_extent / (flank_extent + ell);
        ((n_half as f64 * frac).round() as usize).clamp(16, dense_n)
    } else {
        n_half.min(dense_n)
    };
    let mut idx: Vec<usize> = (0..n_flank)
        .map(|k| ((k as f64) * (dense_n - 1) as f64 / (n_flank - 1) as f64).round() as usize)
        .collect();
    idx.dedup();

    // Right half: optional plateau samples, then the flank from the cusp out.
    let mut xs_half: Vec<f64> = Vec::new();
    let mut vals_half: Vec<f64> = Vec::new();
    let mut derivs_half: Vec<f64> = Vec::new();
    let mut sing_half: Vec<bool> = Vec::new();
    if ell > 0.0 {
        let n_plat = (n_half - n_flank).max(8);
        for k in 0..n_plat {
            xs_half.push(ell * k as f64 / n_plat as f64);
            vals_half.push(build_params.speed);
            derivs_half.push(0.0);
            sing_half.push(false);
        }
    }
    for &j in &idx {
        let d = geom.x[j];
        xs_half.push(ell + d);
        vals_half.push(geom.phi[j]);
        if j == 0 {
            derivs_half.push(f64::NEG_INFINITY);
            sing_half.push(true);
        } else {
            derivs_half.push(geom.dphi_at(d));
            sing_half.push(false);
        }
    }

    // Mirror. xs_half starts at the center sample x = 0.
    let mut xs = Vec::with_capacity(2 * xs_half.len() - 1);
    let mut vals = Vec::with_capacity(xs.capacity());
    let mut derivs = Vec::with_capacity(xs.capacity());
    let mut singular = Vec::with_capacity(xs.capacity());
    for k in (1..xs_half.len()).rev() {
        xs.push(-xs_half[k]);
        vals.push(sign * vals_half[k]);
        derivs.push(sign * -derivs_half[k]);
        singular.push(sing_half[k]);
    }
    for k in 0..xs_half.len() {
        xs.push(xs_half[k]);
        vals.push(sign * vals_half[k]);
        derivs.push(sign * derivs_half[k]);
        singular.push(sing_half[k]);
    }

    let half_period = if params.family.is_periodic() {
        Some(flank_extent + ell)
    } else {
        None
    };
    let table = ProfileTable {
        params: *params,
        center: 0.0,
        xs,
        vals,
        derivs,
        singular,
        half_period,
        geom: Some(geom),
        sign,
    };

    // The cusp must carry the 2/3-power law; a failed fit means the
    // inversion near the crest went wrong.
    let expo = cusp_exponent(&table);
    if (expo - 2.0 / 3.0).abs() > 0.05 {
        return Err(ChError::NonMonotonic(format!(
            "cusp exponent fit {expo:.4} is outside 2/3 +- 0.05"
        )));
    }
    Ok(table)
}

/// Builds a cuspon profile with the cusp at the origin.
pub fn cuspon_profile(params: &TravelingWaveParams, n_samples: usize) -> Result<ProfileTable> {
    match params.family {
        Family::CusponDecay | Family::CusponPeriodic => build_cusped_table(params, n_samples, 0.0),
        other => Err(ChError::OutOfRange(format!(
            "cuspon_profile called with family {other}"
        ))),
    }
}

/// Builds a stumpon profile: plateau of half-width ell centered at the
/// origin, cusped flanks glued at |x| = ell.
pub fn stumpon_profile(params: &TravelingWaveParams, n_samples: usize) -> Result<ProfileTable> {
    match params.family {
        Family::StumponDecay | Family::StumponPeriodic => {
            let s_sq = params.speed * params.speed;
            if (params.a - s_sq).abs() > PARAM_TOL_REL * s_sq.max(1.0) || params.ell <= 0.0 {
                return Err(ChError::StumponInadmissible {
                    a: params.a,
                    s_sq,
                    ell: params.ell,
                });
            }
            build_cusped_table(params, n_samples, params.ell)
        }
        other => Err(ChError::OutOfRange(format!(
            "stumpon_profile called with family {other}"
        ))),
    }
}

/// Fits the exponent alpha in |s - phi(x)| ~ |x|^alpha near the cusp.
pub fn cusp_exponent(table: &ProfileTable) -> f64 {
    let p = &table.params;
    let scale = match table.half_period {
        Some(h) => h - p.ell,
        None => 1.0,
    };
    let mut lx = Vec::new();
    let mut lf = Vec::new();
    for k in 0..12 {
        let d = scale * 1e-6 * 10f64.powf(3.0 * k as f64 / 11.0);
        let x = table.center + p.ell + d;
        let gap = (table.eval(x) - p.speed).abs();
        if gap > 0.0 {
            lx.push(d.ln());
            lf.push(gap.ln());
        }
    }
    quad::ls_slope(&lx, &lf)
}

/// Maximum violation of the shape identity over the table samples.
///
/// Non-singular flank samples are scored by
/// |(phi')^2 (s - phi) - (M - phi)(phi - m)(phi - z)|; plateau samples by
/// their deviation from height s and slope 0. Singular samples are skipped.
pub fn profile_residual(table: &ProfileTable) -> f64 {
    let p = &table.params;
    let mut worst: f64 = 0.0;
    for i in 0..table.xs.len() {
        if table.singular[i] {
            continue;
        }
        let on_plateau = p.ell > 0.0 && table.fold(table.xs[i]) <= p.ell;
        let r = if on_plateau {
            (table.vals[i] - p.speed).abs().max(table.derivs[i].abs())
        } else {
            let phi = table.vals[i];
            let d = table.derivs[i];
            (d * d * (p.speed - phi) - p.cubic(phi)).abs()
        };
        worst = worst.max(r);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_ratio() -> f64 {
        0.5 * (1.0 + 5f64.sqrt())
    }

    fn golden_cuspon() -> TravelingWaveParams {
        derive_params(golden_ratio(), 0.0, 1.0, 0.0, Family::CusponPeriodic).unwrap()
    }

    #[test]
    fn test_derive_params_golden_ratio_crest_gives_unit_constant() {
        let p = golden_cuspon();
        assert!((p.a - 1.0).abs() < 1e-14);
        assert!((p.z - (1.0 - golden_ratio())).abs() < 1e-15);
    }

    #[test]
    fn test_derive_params_accepts_unit_decay_peakon() {
        let p = derive_params(1.0, 0.0, 1.0, 0.0, Family::PeakonDecay).unwrap();
        assert_eq!(p.z, 0.0);
        assert_eq!(p.a, 0.0);
    }

    #[test]
    fn test_derive_params_accepts_golden_stumpon() {
        let p = derive_params(golden_ratio(), 0.0, 1.0, 0.5155, Family::StumponPeriodic).unwrap();
        assert!((p.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn test_derive_params_rejects_stumpon_with_wrong_constant() {
        // M = 2, m = 0, s = 1 gives a = 2 != s^2
        let err = derive_params(2.0, 0.0, 1.0, 0.3, Family::StumponPeriodic).unwrap_err();
        match err {
            ChError::StumponInadmissible { a, s_sq, .. } => {
                assert!((a - 2.0).abs() < 1e-12);
                assert!((s_sq - 1.0).abs() < 1e-15);
            }
            other => panic!("expected StumponInadmissible, got {other:?}"),
        }
    }

    #[test]
    fn test_derive_params_rejects_bad_ordering() {
        assert!(derive_params(1.0, 0.5, 2.0, 0.0, Family::CusponPeriodic).is_err());
    }

    #[test]
    fn test_peakon_half_period_matches_trough_identity() {
        // m = s / cosh(L) must invert the half-period formula
        let s = 1.0;
        let l_target = 0.5f64;
        let m = s / l_target.cosh();
        let p = derive_params(s, m, s, 0.0, Family::PeakonPeriodic).unwrap();
        let l = peakon_half_period(&p);
        assert!((l - l_target).abs() < 1e-12, "L = {l}");
    }

    #[test]
    fn test_peakon_profile_decay_values() {
        let p = derive_params(1.0, 0.0, 1.0, 0.0, Family::PeakonDecay).unwrap();
        let grid = peakon_default_grid(&p, 0.0, 512);
        let t = peakon_profile(&p, 0.0, &grid).unwrap();
        assert!((t.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((t.eval(1.0) - (-1f64).exp()).abs() < 1e-15);
        assert!((t.eval(-1.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn test_cuspon_half_period_reference_value() {
        let p = golden_cuspon();
        let l = cuspon_half_period(&p, 1e-10).unwrap();
        assert!(2.0 * l > 2.966 && 2.0 * l < 2.972, "2L = {}", 2.0 * l);
    }

    #[test]
    fn test_cuspon_half_period_divergence_reported() {
        // Force z == m through a raw struct: the family check alone would
        // reject this, which is the point of the floor.
        let mut p = derive_params(2.0, -0.5, 1.0, 0.0, Family::CusponDecay).unwrap();
        p.family = Family::CusponPeriodic;
        assert!(matches!(
            cuspon_half_period(&p, 1e-10),
            Err(ChError::QuadratureNonconvergent(_))
        ));
    }

    #[test]
    fn test_cuspon_profile_hits_crest_and_trough() {
        let p = golden_cuspon();
        let t = cuspon_profile(&p, 2000).unwrap();
        let l = t.half_period.unwrap();
        assert!((t.eval(0.0) - 1.0).abs() < 1e-12);
        assert!((t.eval(l) - 0.0).abs() < 1e-9);
        assert!(t.eval_deriv(l).abs() < 1e-4);
        assert_eq!(t.singular_points(), vec![0.0]);
    }

    #[test]
    fn test_cusp_exponent_is_two_thirds() {
        let p = golden_cuspon();
        let t = cuspon_profile(&p, 2000).unwrap();
        let alpha = cusp_exponent(&t);
        assert!((alpha - 2.0 / 3.0).abs() < 0.05, "alpha = {alpha}");
    }

    #[test]
    fn test_stumpon_profile_plateau_and_flank() {
        let ell = 0.5155;
        let p = derive_params(golden_ratio(), 0.0, 1.0, ell, Family::StumponPeriodic).unwrap();
        let t = stumpon_profile(&p, 2000).unwrap();
        for x in [0.0, 0.2, -0.4, 0.51] {
            assert!((t.eval(x) - 1.0).abs() < 1e-15, "plateau at {x}");
        }
        let lw = t.half_period.unwrap();
        assert!((t.eval(lw) - 0.0).abs() < 1e-9, "trough at {lw}");
        let sp = t.singular_points();
        assert_eq!(sp.len(), 2);
        assert!((sp[0] + ell).abs() < 1e-15 && (sp[1] - ell).abs() < 1e-15);
    }

    #[test]
    fn test_profile_residual_peakon_exact() {
        let p = derive_params(1.0, 0.0, 1.0, 0.0, Family::PeakonDecay).unwrap();
        let grid = peakon_default_grid(&p, 0.0, 2000);
        let t = peakon_profile(&p, 0.0, &grid).unwrap();
        assert!(profile_residual(&t) <= 1e-10);
    }

    #[test]
    fn test_profile_residual_cuspon_small() {
        let t = cuspon_profile(&golden_cuspon(), 2000).unwrap();
        assert!(profile_residual(&t) <= 1e-6);
    }

    #[test]
    fn test_profile_residual_stumpon_plateau_exact() {
        let ell = 0.5;
        let p = derive_params(golden_ratio(), 0.0, 1.0, ell, Family::StumponPeriodic).unwrap();
        let t = stumpon_profile(&p, 1000).unwrap();
        for (i, &x) in t.xs.iter().enumerate() {
            if x.abs() < ell && !t.singular[i] {
                assert_eq!(t.vals[i], 1.0);
                assert_eq!(t.derivs[i], 0.0);
            }
        }
    }

    #[test]
    fn test_downward_cuspon_is_reflection_of_upward() {
        let up = golden_cuspon();
        let down = derive_params(-golden_ratio(), 0.0, -1.0, 0.0, Family::CusponPeriodic).unwrap();
        let tu = cuspon_profile(&up, 512).unwrap();
        let td = cuspon_profile(&down, 512).unwrap();
        for x in [0.0, 0.3, 0.9, 1.2] {
            assert!((td.eval(x) + tu.eval(x)).abs() < 1e-12, "x = {x}");
        }
        assert!((td.half_period.unwrap() - tu.half_period.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn test_profile_symmetry_and_periodic_wrap() {
        let t = cuspon_profile(&golden_cuspon(), 1024).unwrap();
        let l = t.half_period.unwrap();
        for &x in &[0.1, 0.45, 0.8, 1.3] {
            assert!((t.eval(x) - t.eval(-x)).abs() <= 1e-12);
            assert!((t.eval(x + 2.0 * l) - t.eval(x)).abs() <= 1e-10);
        }
    }
}
