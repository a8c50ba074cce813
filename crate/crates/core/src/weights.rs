//! Admissible weights, the cut-off `eta`, and weighted norms on the grid.
//!
//! `kappa_{alpha,beta}` is `exp(2 beta x)` for `x <= -1`, `(1+x)^{2 alpha}`
//! (or `2 - (1+x)^{-1/2}` when `alpha = 0`) for `x >= 0`, joined on `(-1, 0)`
//! by the quintic Hermite interpolant of value, slope and curvature of the two
//! outer pieces. `rho_alpha = 1 + kappa_{alpha,1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::field::Field;
use crate::profile;
use crate::spectral::SpectralGrid;

/// Samples used to confirm the bridge derivative stays positive.
const BRIDGE_CHECK_POINTS: usize = 2048;

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth cut-off: 0 for `x <= 0`, 1 for `x >= 1`, `eta(x) + eta(1-x) = 1`.
pub fn eta(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = bump(x);
    let b = bump(1.0 - x);
    a / (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    RhoAlpha,
    KappaAlphaBeta,
    Exp2Alpha,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub kind: WeightKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    1.0
}

/// Anything usable as a weight `psi(x)`.
pub trait WeightFn: Sync {
    fn value(&self, x: f64) -> f64;
}

impl WeightFn for WeightSpec {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

/// `psi'` of a weight, itself admissible for the families here.
#[derive(Debug, Clone, Copy)]
pub struct Derivative(pub WeightSpec);

impl WeightFn for Derivative {
    fn value(&self, x: f64) -> f64 {
        self.0.derivative(x)
    }
}

impl<F: Fn(f64) -> f64 + Sync> WeightFn for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

fn falling(s: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (s - i as f64))
}

impl WeightSpec {
    pub fn new(kind: WeightKind, alpha: f64, beta: f64) -> Result<Self> {
        let w = Self { kind, alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn one() -> Self {
        Self {
            kind: WeightKind::One,
            alpha: 0.0,
            beta: 1.0,
        }
    }

    pub fn exp2alpha(alpha: f64) -> Result<Self> {
        Self::new(WeightKind::Exp2Alpha, alpha, 1.0)
    }

    pub fn rho(alpha: f64) -> Result<Self> {
        Self::new(WeightKind::RhoAlpha, alpha, 1.0)
    }

    pub fn kappa(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(WeightKind::KappaAlphaBeta, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ZkError::Domain(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(ZkError::Domain(format!("beta must be > 0, got {}", self.beta)));
        }
        if matches!(self.kind, WeightKind::RhoAlpha | WeightKind::KappaAlphaBeta) {
            let beta = self.bridge_beta();
            let c = bridge_coeffs(self.alpha, beta);
            let min_slope = (0..=BRIDGE_CHECK_POINTS)
                .map(|i| poly_deriv(&c, i as f64 / BRIDGE_CHECK_POINTS as f64, 1))
                .fold(f64::INFINITY, f64::min);
            if min_slope <= 0.0 {
                return Err(ZkError::Domain(format!(
                    "quintic bridge is not increasing for alpha={}, beta={beta}",
                    self.alpha
                )));
            }
        }
        Ok(())
    }

    fn bridge_beta(&self) -> f64 {
        match self.kind {
            WeightKind::RhoAlpha => 1.0,
            _ => self.beta,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.nth_derivative(x, 0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.nth_derivative(x, 1)
    }

    /// Derivative of order `k <= 3`.
    pub fn nth_derivative(&self, x: f64, k: usize) -> f64 {
        assert!(k <= 3, "only derivatives up to third order are provided");
        match self.kind {
            WeightKind::One => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            WeightKind::Exp2Alpha => {
                let r = 2.0 * self.alpha;
                r.powi(k as i32) * (r * x).exp()
            }
            WeightKind::KappaAlphaBeta => kappa_nth(self.alpha, self.beta, x, k),
            WeightKind::RhoAlpha => {
                let v = kappa_nth(self.alpha, 1.0, x, k);
                if k == 0 {
                    1.0 + v
                } else {
                    v
                }
            }
        }
    }
}

fn outer_left(beta: f64, x: f64, k: usize) -> f64 {
    let r = 2.0 * beta;
    r.powi(k as i32) * (r * x).exp()
}

fn outer_right(alpha: f64, x: f64, k: usize) -> f64 {
    let t = 1.0 + x;
    if alpha > 0.0 {
        let s = 2.0 * alpha;
        falling(s, k) * t.powf(s - k as f64)
    } else if k == 0 {
        2.0 - t.powf(-0.5)
    } else {
        -falling(-0.5, k) * t.powf(-0.5 - k as f64)
    }
}

/// Quintic coefficients (in `t = x + 1`) matching value, slope and curvature
/// of the outer pieces at `t = 0` and `t = 1`.
fn bridge_coeffs(alpha: f64, beta: f64) -> [f64; 6] {
    let (v0, d0, s0) = (
        outer_left(beta, -1.0, 0),
        outer_left(beta, -1.0, 1),
        outer_left(beta, -1.0, 2),
    );
    let (v1, d1, s1) = (
        outer_right(alpha, 0.0, 0),
        outer_right(alpha, 0.0, 1),
        outer_right(alpha, 0.0, 2),
    );
    let (c0, c1, c2) = (v0, d0, 0.5 * s0);
    let a = v1 - (c0 + c1 + c2);
    let b = d1 - (c1 + 2.0 * c2);
    let c = s1 - 2.0 * c2;
    [
        c0,
        c1,
        c2,
        10.0 * a - 4.0 * b + 0.5 * c,
        -15.0 * a + 7.0 * b - c,
        6.0 * a - 3.0 * b + 0.5 * c,
    ]
}

fn poly_deriv(c: &[f64; 6], t: f64, k: usize) -> f64 {
    let mut acc = 0.0;
    for p in (k..6).rev() {
        acc = acc * t + c[p] * falling(p as f64, k);
    }
    acc
}

fn kappa_nth(alpha: f64, beta: f64, x: f64, k: usize) -> f64 {
    if x <= -1.0 {
        outer_left(beta, x, k)
    } else if x >= 0.0 {
        outer_right(alpha, x, k)
    } else {
        poly_deriv(&bridge_coeffs(alpha, beta), x + 1.0, k)
    }
}

/// Largest sampled `|psi'| / psi` on `[a, b]`.
pub fn admissibility_constant(w: &WeightSpec, a: f64, b: f64, samples: usize) -> f64 {
    (0..=samples)
        .map(|i| {
            let x = a + (b - a) * i as f64 / samples as f64;
            w.derivative(x).abs() / w.eval(x)
        })
        .fold(0.0, f64::max)
}

/// Conservative envelope for the admissibility constant of the four families.
pub fn admissibility_envelope(w: &WeightSpec) -> f64 {
    2.0 * 1f64.max(2.0 * w.alpha).max(2.0 * w.beta) + 1.0
}

fn weighted_grid_sum(u: &Field, psi: &dyn WeightFn) -> Result<f64> {
    let dom = u.domain();
    let vals = u
        .physical()
        .ok_or_else(|| ZkError::Usage("weighted norm needs the physical representation".into()))?;
    let plane = dom.plane_len();
    let mut acc = 0.0;
    for j in 0..dom.nx {
        let w = psi.value(dom.x(j));
        for &v in &vals[j * plane..(j + 1) * plane] {
            if !v.is_finite() {
                return Err(ZkError::Data(format!("non-finite value in plane {j}")));
            }
            acc += v * v * w;
        }
    }
    Ok(acc * dom.cell_volume())
}

/// `( sum u^2 psi(x_j) dx dy dz )^{1/2}` over the collocation grid.
pub fn weighted_l2_norm(u: &Field, w: &dyn WeightFn) -> Result<f64> {
    Ok(weighted_grid_sum(u, w)?.sqrt())
}

pub fn l2_norm(u: &Field) -> Result<f64> {
    weighted_l2_norm(u, &WeightSpec::one())
}

/// Weighted L2 norm of `|Du|`, transverse integrals taken exactly in the
/// sine basis (equivalently: trapezoid rule including the wall points).
pub fn weighted_h1_seminorm(grid: &SpectralGrid, u: &Field, w: &dyn WeightFn) -> Result<f64> {
    let u = grid.sync(u)?;
    let dens = profile::gradient_density(grid, u.coeffs());
    let dom = grid.domain();
    let total: f64 = dens
        .iter()
        .enumerate()
        .map(|(j, d)| d * w.value(dom.x(j)))
        .sum();
    Ok((total * dom.dx()).sqrt())
}

/// Local-smoothing functional: the largest, over unit windows
/// `[x0, x0 + 1]` anchored at grid points (periodically wrapped), of the
/// time-integrated windowed gradient energy.
///
/// `densities[s][j]` is `∫_Ω |Du|^2` on plane `j` at sample `s`; samples are
/// `dt` apart and cover `[0, T]`.
pub fn local_smoothing_lambda(densities: &[Vec<f64>], dt: f64, dx: f64) -> Result<f64> {
    let first = densities
        .first()
        .ok_or_else(|| ZkError::Usage("empty gradient history".into()))?;
    let nx = first.len();
    if densities.iter().any(|d| d.len() != nx) {
        return Err(ZkError::Usage("gradient history has inconsistent plane counts".into()));
    }
    // time integral per plane (trapezoid)
    let mut integrated = vec![0.0; nx];
    if densities.len() == 1 {
        return Ok(0.0);
    }
    for (s, d) in densities.iter().enumerate() {
        let wt = if s == 0 || s + 1 == densities.len() { 0.5 * dt } else { dt };
        for (acc, v) in integrated.iter_mut().zip(d) {
            *acc += wt * v;
        }
    }
    let span = ((1.0 + 1e-12) / dx).floor() as usize;
    let width = (span + 1).min(nx);
    let mut best = 0.0f64;
    for start in 0..nx {
        let s: f64 = (0..width).map(|o| integrated[(start + o) % nx]).sum();
        best = best.max(s * dx);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use std::f64::consts::PI;

    #[test]
    fn eta_examples_and_symmetry() {
        assert_eq!(eta(0.0), 0.0);
        assert_eq!(eta(-3.0), 0.0);
        assert_eq!(eta(1.0), 1.0);
        assert_eq!(eta(0.5), 0.5);
        let mut worst = 0.0f64;
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = -0.5 + 2.0 * i as f64 / 9_999.0;
            worst = worst.max((eta(x) + eta(1.0 - x) - 1.0).abs());
            assert!(eta(x) >= prev);
            prev = eta(x);
        }
        assert!(worst <= 1e-15, "{worst}");
    }

    #[test]
    fn weight_examples() {
        assert!((WeightSpec::rho(0.0).unwrap().eval(0.0) - 2.0).abs() < 1e-15);
        assert!((WeightSpec::rho(1.0).unwrap().eval(1.0) - 5.0).abs() < 1e-14);
        let r = WeightSpec::rho(0.75).unwrap();
        assert!((r.eval(-2.0) - (1.0 + (-4.0f64).exp())).abs() < 1e-15);
        assert!((WeightSpec::kappa(0.0, 0.8).unwrap().eval(0.0) - 1.0).abs() < 1e-15);
        assert!((WeightSpec::rho(1.0).unwrap().derivative(1.0) - 4.0).abs() < 1e-14);
        let b = 1.3;
        let k = WeightSpec::kappa(0.5, b).unwrap();
        assert!((k.derivative(-2.0) - 2.0 * b * (-4.0 * b).exp()).abs() < 1e-15);
    }

    #[test]
    fn bridge_is_c2_and_increasing() {
        for w in [
            WeightSpec::rho(0.0).unwrap(),
            WeightSpec::rho(0.75).unwrap(),
            WeightSpec::kappa(1.0, 1.0).unwrap(),
            WeightSpec::kappa(0.1, 1.5).unwrap(),
        ] {
            for x0 in [-1.0, 0.0] {
                for k in 0..3 {
                    let a = w.nth_derivative(x0 - 1e-12, k);
                    let b = w.nth_derivative(x0 + 1e-12, k);
                    assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{w:?} x0={x0} k={k}");
                }
            }
            for i in 1..1000 {
                assert!(w.derivative(-1.0 + i as f64 / 1000.0) > 0.0);
            }
        }
    }

    #[test]
    fn rejects_non_monotone_bridge() {
        assert!(matches!(WeightSpec::kappa(3.0, 0.25), Err(ZkError::Domain(_))));
        assert!(WeightSpec::new(WeightKind::Exp2Alpha, -0.1, 1.0).is_err());
        assert!(WeightSpec::new(WeightKind::KappaAlphaBeta, 0.5, 0.0).is_err());
    }

    #[test]
    fn bridge_derivative_matches_finite_differences() {
        let w = WeightSpec::rho(0.75).unwrap();
        for i in 1..20 {
            let x = -1.0 + i as f64 / 20.0;
            let h = 1e-6;
            let fd = (w.eval(x + h) - w.eval(x - h)) / (2.0 * h);
            assert!((fd - w.derivative(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn local_smoothing_examples() {
        assert!(matches!(local_smoothing_lambda(&[], 0.1, 0.1), Err(ZkError::Usage(_))));
        let zero = vec![vec![0.0; 40]; 5];
        assert_eq!(local_smoothing_lambda(&zero, 0.1, 0.25).unwrap(), 0.0);

        // constant in time: T times the windowed spatial integral
        let dens: Vec<f64> = (0..40).map(|j| (j as f64 * 0.3).sin().powi(2)).collect();
        let dx = 0.25;
        let series = vec![dens.clone(); 11];
        let t = 10.0 * 0.2;
        let lam = local_smoothing_lambda(&series, 0.2, dx).unwrap();
        let spatial = (0..40)
            .map(|s| (0..5).map(|o| dens[(s + o) % 40]).sum::<f64>() * dx)
            .fold(0.0, f64::max);
        assert!((lam - t * spatial).abs() < 1e-12);

        // periodic shift leaves it unchanged
        let shifted: Vec<Vec<f64>> = series
            .iter()
            .map(|d| (0..40).map(|j| d[(j + 7) % 40]).collect())
            .collect();
        let lam2 = local_smoothing_lambda(&shifted, 0.2, dx).unwrap();
        assert!((lam - lam2).abs() < 1e-12);
    }

    #[test]
    fn one_weight_matches_plain_norm_bitwise() {
        let dom = DomainSpec::new(PI, 2.0, 5.0, 16, 5, 6).unwrap();
        let u = Field::from_fn(dom, |x, y, z| (x * 0.7).cos() * y.sin() * (z * 1.1).sin()).unwrap();
        let a = weighted_l2_norm(&u, &WeightSpec::one()).unwrap();
        let direct = (u.values().iter().map(|v| v * v).sum::<f64>() * dom.cell_volume()).sqrt();
        assert_eq!(a, l2_norm(&u).unwrap());
        assert!((a - direct).abs() <= 1e-14 * direct);
        assert_eq!(weighted_l2_norm(&Field::zeros(dom), &WeightSpec::rho(0.5).unwrap()).unwrap(), 0.0);
    }
}
