//! Laplace-domain description of the infinite-chain NRPT hitting time and
//! numerical Bromwich inversion for the constant C(Λ).
//!
//! F(z) is the Laplace transform of t ↦ Pr(τ∞ > t + 1), and
//! C(Λ, t) = (1/π) ∫₀^∞ Re(e^{ixt} F(−γ + ix)) dx = e^{γt} Pr(τ∞ > t + 1)
//! with γ = 1/(Λ + 2).

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

const SINHC_CUTOFF: f64 = 1e-4;

/// r(z) = √((z + Λ)² − Λ²), principal branch (Re r ≥ 0).
pub fn r_of_z(z: Complex64, lambda: f64) -> Complex64 {
    let r = ((z + lambda) * (z + lambda) - lambda * lambda).sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

fn sinhc(w: Complex64) -> Complex64 {
    if w.norm() < SINHC_CUTOFF {
        let w2 = w * w;
        1.0 + w2 / 6.0 + w2 * w2 / 120.0 + w2 * w2 * w2 / 5040.0
    } else {
        w.sinh() / w
    }
}

/// D(x, z) = cosh(x r) + z x sinhc(x r). Only even powers of r enter, so the
/// branch of the square root does not matter.
pub fn eval_d(x: f64, z: Complex64, lambda: f64) -> Complex64 {
    d_with_r(x, z, r_of_z(z, lambda))
}

fn d_with_r(x: f64, z: Complex64, r: Complex64) -> Complex64 {
    let w = r * x;
    w.cosh() + z * x * sinhc(w)
}

/// D(1, −γ) on the real axis, for 0 < γ < 2Λ.
pub fn d_real_axis(lambda: f64, gamma: f64) -> f64 {
    let w = (gamma * (2.0 * lambda - gamma)).sqrt();
    w.cos() - gamma / w * w.sin()
}

/// e^z / D(1, z), written as 2e^{z−r}/((1 + z/r) + e^{−2r}(1 − z/r)) when
/// |r| is large so that neither factor overflows.
fn exp_over_d(z: Complex64, lambda: f64) -> Result<Complex64> {
    let r = r_of_z(z, lambda);
    let q = if r.norm() > 1.0 {
        let zr = z / r;
        let den = (1.0 + zr) + (-2.0 * r).exp() * (1.0 - zr);
        // |D| = e^{Re r}|den|/2
        if den.norm().ln() + r.re - std::f64::consts::LN_2 < (1e-14f64).ln() {
            return Err(Error::Numerical(format!("D(1, z) vanishes at z = {z}")));
        }
        2.0 * (z - r).exp() / den
    } else {
        let d = d_with_r(1.0, z, r);
        if d.norm() < 1e-14 {
            return Err(Error::Numerical(format!("D(1, z) vanishes at z = {z}")));
        }
        z.exp() / d
    };
    if !(q.re.is_finite() && q.im.is_finite()) {
        return Err(Error::Numerical(format!("e^z/D overflow at z = {z}")));
    }
    Ok(q)
}

/// F(z) = (D(1, z) − e^z)/(z D(1, z)).
pub fn eval_f(z: Complex64, lambda: f64) -> Result<Complex64> {
    ensure(z != Complex64::new(0.0, 0.0), || "F is undefined at z = 0".into())?;
    Ok((1.0 - exp_over_d(z, lambda)?) / z)
}

/// F(z) − (1 − e^{−Λ})/z, which decays like 1/|z|² on vertical lines.
fn eval_f_reduced(z: Complex64, lambda: f64) -> Result<Complex64> {
    Ok(((-lambda).exp() - exp_over_d(z, lambda)?) / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    pub lambda: f64,
    pub gamma: f64,
    /// Truncation point of the inversion integral.
    pub r_max: f64,
}

impl LaplaceParams {
    pub fn new(lambda: f64) -> Result<Self> {
        ensure(lambda >= 1.0, || format!("Lambda must be >= 1, got {lambda}"))?;
        Ok(Self {
            lambda,
            gamma: 1.0 / (lambda + 2.0),
            r_max: 1e4,
        })
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lambda >= 1.0, || {
            format!("Lambda must be >= 1, got {}", self.lambda)
        })?;
        let edge = 1.0 / (self.lambda + std::f64::consts::SQRT_2);
        ensure(self.gamma > 0.0 && self.gamma < edge, || {
            format!("gamma {} outside (0, {edge})", self.gamma)
        })?;
        ensure(self.r_max > 1.0, || "truncation R must exceed 1".into())
    }
}

fn check_compact_hypotheses(lambda: f64, gamma: f64, eps: f64) -> Result<()> {
    ensure(lambda >= 1.0, || format!("Lambda must be >= 1, got {lambda}"))?;
    let lo = 1.0 / (4.0 * lambda);
    let hi = 1.0 / (lambda + std::f64::consts::SQRT_2);
    ensure(gamma >= lo && gamma < hi, || {
        format!("gamma {gamma} outside [{lo}, {hi})")
    })?;
    ensure(eps > 0.0 && eps <= 1.0 / (136.0 * lambda), || {
        format!("epsilon {eps} outside (0, 1/(136 Lambda)]")
    })
}

/// Grid minimum of |D(1, −γ + ix)| over x ∈ [0, ε].
pub fn pole_margin_check(lambda: f64, gamma: f64, eps: f64, grid_points: usize) -> Result<f64> {
    check_compact_hypotheses(lambda, gamma, eps)?;
    ensure(grid_points >= 2, || "need at least two grid points".into())?;
    Ok((0..grid_points)
        .map(|k| {
            let x = eps * k as f64 / (grid_points - 1) as f64;
            eval_d(1.0, Complex64::new(-gamma, x), lambda).norm()
        })
        .fold(f64::INFINITY, f64::min))
}

/// The closed-form upper bound on C(γ, Λ), all five terms.
pub fn c_analytic_bound(lambda: f64, gamma: f64, b: f64, eps: f64) -> Result<f64> {
    check_compact_hypotheses(lambda, gamma, eps)?;
    let b_min = 6f64.sqrt() * (lambda + 1.0);
    ensure(b >= b_min, || format!("B = {b} below sqrt(6)(Lambda+1) = {b_min}"))?;
    let pi = std::f64::consts::PI;
    let k = (lambda - gamma) * ((1.0 + b * b / (4.0 * lambda * lambda)).sqrt() - b / (2.0 * lambda));
    let bracket = |s: f64| -s * (-(-s).exp()).ln_1p() + 2.0 * (-s).exp();
    let eg = (-gamma).exp();
    let t1 = (1.0 + (-lambda).exp()) * (2.0 + pi) / pi;
    let t2 = 15.0 * eps * eg / (pi * gamma);
    let t3 = 765.0 * lambda * (-0.75 * lambda).exp() / (pi * b);
    let t4 = 4.0 * eg / (pi * k) * bracket(k.sqrt());
    let t5 = 4.0 * eg / (pi * gamma * k) * bracket((eps * k).sqrt());
    let total = t1 + t2 + t3 + t4 + t5;
    if !total.is_finite() {
        return Err(Error::Numerical("analytic bound is not finite".into()));
    }
    Ok(total)
}

/// Defaults B = √6(Λ+1), ε = 1/(136Λ), γ = 1/(Λ+2).
pub fn c_analytic_bound_default(lambda: f64) -> Result<f64> {
    c_analytic_bound(
        lambda,
        1.0 / (lambda + 2.0),
        6f64.sqrt() * (lambda + 1.0),
        1.0 / (136.0 * lambda),
    )
}

// Filon-type quadrature: the smooth factor F(c + ix) − a/(c + ix) is
// interpolated by a degree-11 polynomial on each panel, and the product with
// e^{ixt} is integrated exactly. Panels do not depend on t, so a whole C(Λ, t)
// curve costs one set of transform evaluations.

const NODES: usize = 12;

struct Basis {
    nodes: [f64; NODES],
    vinv: DMatrix<f64>,
}

fn basis() -> &'static Basis {
    static BASIS: OnceLock<Basis> = OnceLock::new();
    BASIS.get_or_init(|| {
        let pi = std::f64::consts::PI;
        let mut nodes = [0.0; NODES];
        for (j, u) in nodes.iter_mut().enumerate() {
            *u = ((2 * j + 1) as f64 * pi / (2 * NODES) as f64).cos();
        }
        let v = DMatrix::from_fn(NODES, NODES, |j, k| nodes[j].powi(k as i32));
        let vinv = v.try_inverse().expect("Chebyshev Vandermonde is invertible");
        Basis { nodes, vinv }
    })
}

/// ∫_{−1}^{1} u^k e^{iθu} du for k < NODES.
fn moments(theta: f64) -> [Complex64; NODES] {
    let mut m = [Complex64::new(0.0, 0.0); NODES];
    if theta.abs() < 4.0 {
        for (k, mk) in m.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..80 {
                if (k + j) % 2 == 0 {
                    acc += term * (2.0 / (k + j + 1) as f64);
                }
                term *= Complex64::new(0.0, theta) / (j + 1) as f64;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *mk = acc;
        }
    } else {
        let i_theta = Complex64::new(0.0, theta);
        let ep = Complex64::from_polar(1.0, theta);
        let em = ep.conj();
        m[0] = (ep - em) / i_theta;
        for k in 1..NODES {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            m[k] = (ep - sign * em) / i_theta - (k as f64 / i_theta) * m[k - 1];
        }
    }
    m
}

struct Panel {
    center: f64,
    half: f64,
    coef: [Complex64; NODES],
}

/// Inversion integral along the vertical line Re z = `abscissa`, prepared for
/// repeated evaluation at many t.
pub struct Bromwich {
    pub lambda: f64,
    pub abscissa: f64,
    pub r_max: f64,
    /// Bound on the dropped contribution beyond R (|G| ≤ c/x², c inflated ×2).
    pub tail_bound: f64,
    residue: f64,
    panels: Vec<Panel>,
}

impl Bromwich {
    pub fn new(lambda: f64, abscissa: f64, r_max: f64) -> Result<Self> {
        ensure(lambda > 0.0, || format!("Lambda must be positive, got {lambda}"))?;
        ensure(r_max > 1.0, || "truncation R must exceed 1".into())?;
        ensure(abscissa > -1.0 / (lambda + std::f64::consts::SQRT_2), || {
            format!("abscissa {abscissa} left of the pole-free strip")
        })?;
        let basis = basis();
        let mut edges = vec![0.0];
        let mut width = 0.05 / (lambda + 1.0);
        let mut x = 0.0;
        while x < r_max {
            let next = (x + width).min(r_max);
            edges.push(next);
            x = next;
            width = (width * 1.2).min(0.25f64.max(0.02 * x));
        }
        let mut panels = Vec::with_capacity(edges.len() - 1);
        for w in edges.windows(2) {
            let center = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            let mut values = [Complex64::new(0.0, 0.0); NODES];
            for (v, &u) in values.iter_mut().zip(&basis.nodes) {
                *v = eval_f_reduced(Complex64::new(abscissa, center + half * u), lambda)?;
            }
            let mut coef = [Complex64::new(0.0, 0.0); NODES];
            for (k, c) in coef.iter_mut().enumerate() {
                for (j, v) in values.iter().enumerate() {
                    *c += *v * basis.vinv[(k, j)];
                }
            }
            panels.push(Panel { center, half, coef });
        }
        let g_end = eval_f_reduced(Complex64::new(abscissa, r_max), lambda)?.norm();
        let tail_bound = 2.0 * g_end * r_max * r_max / r_max / std::f64::consts::PI;
        let a = -(-lambda).exp_m1();
        Ok(Self {
            lambda,
            abscissa,
            r_max,
            tail_bound,
            residue: a,
            panels,
        })
    }

    /// (1/π) ∫₀^∞ Re(e^{ixt} F(c + ix)) dx for t > 0, with the a/z part of F
    /// integrated in closed form (it contributes a·e^{−ct} when c > 0 and
    /// nothing when c < 0).
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for p in &self.panels {
            let m = moments(t * p.half);
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..NODES {
                s += p.coef[k] * m[k];
            }
            acc += (Complex64::from_polar(p.half, t * p.center) * s).re;
        }
        let pole_part = if self.abscissa > 0.0 {
            self.residue * (-self.abscissa * t).exp()
        } else {
            0.0
        };
        acc / std::f64::consts::PI + pole_part
    }

    /// Pr(τ∞ > t + 1) reconstructed from the integral.
    pub fn survival_shifted(&self, t: f64) -> f64 {
        (self.abscissa * t).exp() * self.integral(t)
    }
}

/// C(Λ, t) for one t.
pub fn estimate_c(params: &LaplaceParams, t: f64) -> Result<f64> {
    params.validate()?;
    ensure(t > 0.0, || format!("t must be positive, got {t}"))?;
    Ok(Bromwich::new(params.lambda, -params.gamma, params.r_max)?.integral(t))
}

/// 200 log-spaced points on [0.001, 3000].
pub fn default_t_grid() -> Vec<f64> {
    log_grid(1e-3, 3000.0, 200)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CCurve {
    pub lambda: f64,
    pub gamma: f64,
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    pub tail_bound: f64,
}

impl CCurve {
    pub fn compute(params: &LaplaceParams, t_grid: &[f64]) -> Result<Self> {
        params.validate()?;
        ensure(t_grid.iter().all(|&t| t > 0.0), || "t grid must be positive".into())?;
        let b = Bromwich::new(params.lambda, -params.gamma, params.r_max)?;
        let c = t_grid.iter().map(|&t| b.integral(t)).collect();
        Ok(Self {
            lambda: params.lambda,
            gamma: params.gamma,
            t: t_grid.to_vec(),
            c,
            tail_bound: b.tail_bound,
        })
    }

    /// (sup C(Λ, t), argmax t).
    pub fn supremum(&self) -> (f64, f64) {
        self.c.iter().zip(&self.t).fold(
            (f64::NEG_INFINITY, 0.0),
            |acc, (&c, &t)| if c > acc.0 { (c, t) } else { acc },
        )
    }
}

/// C(Λ): supremum of C(Λ, t) over the default grid.
pub fn c_lambda(lambda: f64) -> Result<f64> {
    Ok(CCurve::compute(&LaplaceParams::new(lambda)?, &default_t_grid())?
        .supremum()
        .0)
}

/// |F(x + iy)| on a rectangular grid, rows over y, for external rendering.
pub fn f_magnitude_grid(lambda: f64, xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
    ys.iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| {
                    eval_f(Complex64::new(x, y), lambda)
                        .map(|f| f.norm())
                        .unwrap_or(f64::NAN)
                })
                .collect()
        })
        .collect()
}
