//! Small quadrature and extrapolation helpers used by the profile and
//! analysis modules. Everything here works on plain closures and `f64`.

use crate::error::{ChError, Result};

/// Compensated (Neumaier) accumulator. Keeps long sums accurate to a few ulp.
#[derive(Debug, Clone, Copy, Default)]
pub struct Csum {
    s: f64,
    c: f64,
}

impl Csum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Sums a slice with compensation.
pub fn csum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Csum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pn(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_pn(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates f over [a, b] with a single n-point Gauss-Legendre panel.
pub fn integrate_gl(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = Csum::new();
    for &(x, w) in rule {
        acc.add(w * f(mid + half * x));
    }
    half * acc.value()
}

/// Adaptive Simpson integration with an absolute tolerance.
pub fn adaptive_simpson(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    const MAX_DEPTH: usize = 48;
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &mut impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth >= MAX_DEPTH {
            return Err(ChError::QuadratureNonconvergent(format!(
                "adaptive refinement stalled on [{a}, {b}] with residual {:.3e}",
                delta.abs()
            )));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }

    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Cumulative integral of f along the given ascending nodes.
///
/// Returns partial integrals from nodes[0] to each node, computed with a
/// fixed Gauss-Legendre panel per interval so the result is smooth in the
/// node positions.
pub fn cumulative_gl(f: &mut impl FnMut(f64) -> f64, nodes: &[f64], rule: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = Csum::new();
    out.push(0.0);
    for w in nodes.windows(2) {
        acc.add(integrate_gl(f, w[0], w[1], rule));
        out.push(acc.value());
    }
    out
}

/// Extrapolates f(h) -> f(0) from samples at h_k = h0 * ratio^k assuming an
/// expansion f(h) = f0 + sum_j c_j h^{p_j} with the given exponent ladder.
///
/// `values[k]` is the sample at h0 * ratio^k. The number of exponents must be
/// one less than the number of samples.
pub fn richardson_limit(values: &[f64], h0: f64, ratio: f64, exponents: &[f64]) -> f64 {
    let n = values.len();
    assert_eq!(exponents.len() + 1, n);
    // Solve the small Vandermonde-like system for [f0, c_1, ..].
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for k in 0..n {
        let h = h0 * ratio.powi(k as i32);
        a[k][0] = 1.0;
        for (j, &p) in exponents.iter().enumerate() {
            a[k][j + 1] = h.powf(p);
        }
        b[k] = values[k];
    }
    solve_dense(&mut a, &mut b);
    b[0]
}

/// In-place Gaussian elimination with partial pivoting for small systems.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / d;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        b[col] /= a[col][col];
        for row in 0..col {
            b[row] -= a[row][col] * b[col];
        }
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
