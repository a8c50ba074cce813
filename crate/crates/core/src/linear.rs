//! Exact solution operator of `u_t + b u_x + Δu_x - δ Δu = f`, the Duhamel
//! integral for forcing, and a Picard (contraction) iteration used to
//! cross-check the nonlinear stepper.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::field::Field;
use crate::forcing::TimeForcing;
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::gauss_legendre_on;
use crate::spectral::SpectralGrid;

pub const DEFAULT_DUHAMEL_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    /// Drift coefficient.
    pub b: f64,
    /// Parabolic regularization, in `[0, 1]`.
    pub delta: f64,
}

impl LinearParams {
    pub fn new(b: f64, delta: f64) -> Result<Self> {
        let p = Self { b, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b.is_finite() {
            return Err(ZkError::Domain(format!("b must be finite, got {}", self.b)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(ZkError::Domain(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        Ok(())
    }
}

/// Per-mode growth rate `i(xi^3 - b xi + xi lambda) - delta (xi^2 + lambda)`.
#[inline]
pub fn symbol(xi: f64, lambda: f64, p: &LinearParams) -> Complex64 {
    Complex64::new(
        -p.delta * (xi * xi + lambda),
        xi * xi * xi - p.b * xi + xi * lambda,
    )
}

/// `exp(symbol * t)` for every spectral slot.
pub fn exp_factors(grid: &SpectralGrid, p: &LinearParams, t: f64) -> Vec<Complex64> {
    let lambda = grid.lambda();
    let plane = lambda.len();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.domain().len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(i, row)| {
        let xi = grid.xi()[i];
        for (v, &l) in row.iter_mut().zip(lambda) {
            *v = (symbol(xi, l, p) * t).exp();
        }
    });
    out
}

fn multiply(coeffs: &mut [Complex64], factors: &[Complex64]) {
    coeffs
        .par_iter_mut()
        .zip(factors.par_iter())
        .for_each(|(c, f)| *c *= f);
}

/// Advance spectral coefficients in place by `t` under the linear flow.
pub fn propagate_coeffs(grid: &SpectralGrid, coeffs: &mut [Complex64], t: f64, p: &LinearParams) {
    if t == 0.0 {
        return;
    }
    multiply(coeffs, &exp_factors(grid, p, t));
}

pub fn propagate(grid: &SpectralGrid, u0: &Field, t: f64, p: &LinearParams) -> Result<Field> {
    p.validate()?;
    if !(t >= 0.0) {
        return Err(ZkError::Usage(format!("propagation time must be >= 0, got {t}")));
    }
    let u0 = grid.sync(u0)?;
    let mut c = u0.coeffs().to_vec();
    propagate_coeffs(grid, &mut c, t, p);
    Field::from_spectral(*grid.domain(), c)
}

/// `propagate(u0, t)` plus the Duhamel term `∫_0^t e^{L(t-s)} f(s) ds`
/// approximated with `nq`-node Gauss–Legendre quadrature.
pub fn duhamel_apply(
    grid: &SpectralGrid,
    u0: &Field,
    forcing: &dyn TimeForcing,
    t: f64,
    p: &LinearParams,
    nq: usize,
) -> Result<Field> {
    let u0 = grid.sync(u0)?;
    let c = duhamel_coeffs(grid, u0.coeffs(), forcing, t, p, nq)?;
    Field::from_spectral(*grid.domain(), c)
}

fn duhamel_coeffs(
    grid: &SpectralGrid,
    u0: &[Complex64],
    forcing: &dyn TimeForcing,
    t: f64,
    p: &LinearParams,
    nq: usize,
) -> Result<Vec<Complex64>> {
    p.validate()?;
    if nq < 2 {
        return Err(ZkError::Usage(format!("need at least 2 quadrature nodes, got {nq}")));
    }
    if !(t >= 0.0) {
        return Err(ZkError::Usage(format!("propagation time must be >= 0, got {t}")));
    }
    let mut out = u0.to_vec();
    propagate_coeffs(grid, &mut out, t, p);
    if t == 0.0 || forcing.is_zero() {
        return Ok(out);
    }
    let (nodes, weights) = gauss_legendre_on(nq, 0.0, t);
    for (s, w) in nodes.iter().zip(&weights) {
        if let Some(mut f) = forcing.coefficients(*s)? {
            if f.len() != out.len() {
                return Err(ZkError::Usage("forcing has the wrong number of coefficients".into()));
            }
            propagate_coeffs(grid, &mut f, t - s, p);
            out.par_iter_mut().zip(f.par_iter()).for_each(|(o, v)| *o += v * w);
        }
    }
    Ok(out)
}

/// Spectral `-∂_x g(u)` (masked when dealiasing is on).
pub(crate) fn flux_divergence(grid: &SpectralGrid, g: &Nonlinearity, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let dom = grid.domain();
    let mut phys = grid.inverse(coeffs);
    if let Some(pos) = phys.iter().position(|v| !v.is_finite()) {
        let plane = dom.plane_len();
        return Err(ZkError::Data(format!(
            "non-finite state at (j={}, m={}, n={})",
            pos / plane,
            (pos % plane) / dom.nz,
            pos % dom.nz
        )));
    }
    phys.par_iter_mut().for_each(|v| *v = g.g(*v));
    let mut spec = grid.forward(&phys);
    grid.apply_mask(&mut spec);
    let plane = dom.plane_len();
    spec.par_chunks_mut(plane).enumerate().for_each(|(i, row)| {
        let f = Complex64::new(0.0, -grid.xi()[i]);
        row.iter_mut().for_each(|c| *c *= f);
    });
    Ok(spec)
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    /// Final iterate at time `t`.
    pub field: Field,
    /// `||v_{k+1}(t) - v_k(t)||_{L2}` for each iteration.
    pub differences: Vec<f64>,
}

/// Lagrange basis values at `s` for the given nodes.
fn lagrange_weights(nodes: &[f64], s: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (s - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

/// Contraction iteration `v_{k+1} = Λ v_k`, where `Λ v` solves the linear
/// problem with forcing `f - ∂_x g(v)`. Iterates are represented by their
/// interaction-picture values `e^{-Ls} v(s)` at the Gauss nodes of `[0, t]`
/// and interpolated in between.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    grid: &SpectralGrid,
    u0: &Field,
    forcing: &dyn TimeForcing,
    p: &LinearParams,
    g: &Nonlinearity,
    n_iter: usize,
    t: f64,
    nq: usize,
) -> Result<PicardResult> {
    p.validate()?;
    if !(p.delta > 0.0) {
        return Err(ZkError::Usage("Picard iteration requires delta > 0".into()));
    }
    if n_iter == 0 {
        return Err(ZkError::Usage("n_iter must be at least 1".into()));
    }
    if !(t > 0.0) {
        return Err(ZkError::Usage(format!("iteration horizon must be positive, got {t}")));
    }
    let dom = *grid.domain();
    let u0 = grid.sync(u0)?;
    let c0 = u0.coeffs().to_vec();
    let (nodes, _) = gauss_legendre_on(nq, 0.0, t);

    // v_0 = linear flow of u0: in the interaction picture it is u0 at every node
    let mut pictures: Vec<Vec<Complex64>> = vec![c0.clone(); nodes.len()];
    let mut current = c0.clone();
    propagate_coeffs(grid, &mut current, t, p);
    let mut differences = Vec::with_capacity(n_iter);

    for _ in 0..n_iter {
        let iterate_at = |s: f64| -> Vec<Complex64> {
            let w = lagrange_weights(&nodes, s);
            let mut v = vec![Complex64::new(0.0, 0.0); dom.len()];
            for (wi, pic) in w.iter().zip(&pictures) {
                v.par_iter_mut().zip(pic.par_iter()).for_each(|(a, b)| *a += b * wi);
            }
            propagate_coeffs(grid, &mut v, s, p);
            v
        };
        let rhs = |s: f64| -> Result<Option<Vec<Complex64>>> {
            let v = iterate_at(s);
            let mut out = flux_divergence(grid, g, &v)?;
            if let Some(f) = forcing.coefficients(s)? {
                out.par_iter_mut().zip(f.par_iter()).for_each(|(a, b)| *a += b);
            }
            Ok(Some(out))
        };
        let source = ClosureForcing(&rhs);

        let mut next_pictures = Vec::with_capacity(nodes.len());
        for &s in &nodes {
            let mut v = duhamel_coeffs(grid, &c0, &source, s, p, nq)?;
            propagate_coeffs(grid, &mut v, -s, p);
            next_pictures.push(v);
        }
        let next = duhamel_coeffs(grid, &c0, &source, t, p, nq)?;
        let diff = (next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * 2.0
            * dom.x_half)
            .sqrt();
        if let Some(&prev) = differences.last() {
            if diff > 10.0 * prev && prev > 0.0 {
                return Err(ZkError::Convergence(format!(
                    "Picard difference grew from {prev:e} to {diff:e}"
                )));
            }
        }
        differences.push(diff);
        pictures = next_pictures;
        current = next;
    }
    Ok(PicardResult {
        field: Field::from_spectral(dom, current)?,
        differences,
    })
}

struct ClosureForcing<'a, F>(&'a F);

impl<F> TimeForcing for ClosureForcing<'_, F>
where
    F: Fn(f64) -> Result<Option<Vec<Complex64>>> + Sync,
{
    fn coefficients(&self, t: f64) -> Result<Option<Vec<Complex64>>> {
        (self.0)(t)
    }
}
