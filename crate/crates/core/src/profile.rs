//! Per-plane (fixed x) integrals over the cross-section. Every diagnostic is
//! assembled from these profiles, so recorded runs only keep `O(nx)` data per
//! sample.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::spectral::SpectralGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneProfile {
    pub t: f64,
    /// `∫_Ω u^2`
    pub mass: Vec<f64>,
    /// `∫_Ω u_x^2`
    pub grad_x: Vec<f64>,
    /// `∫_Ω (u_y^2 + u_z^2)`
    pub grad_perp: Vec<f64>,
    /// `∫_Ω u^3`
    pub cubic: Vec<f64>,
    /// `∫_Ω G(u)` with `G(u) = ∫_0^u g'(s) s ds` for the active nonlinearity.
    pub flux: Vec<f64>,
    /// `∫_Ω f u`
    pub forcing: Vec<f64>,
    /// `max_Ω |u|`
    pub max_abs: Vec<f64>,
}

impl PlaneProfile {
    pub fn nx(&self) -> usize {
        self.mass.len()
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.grad_x.iter().zip(&self.grad_perp).map(|(a, b)| a + b).collect()
    }
}

/// `sum_l a_l^2` and `sum_l lambda_l a_l^2` per plane of a mixed array.
fn plane_sums(mixed: &[f64], lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let plane = lambda.len();
    mixed
        .par_chunks(plane)
        .map(|a| {
            let mut s = 0.0;
            let mut sl = 0.0;
            for (v, l) in a.iter().zip(lambda) {
                s += v * v;
                sl += l * v * v;
            }
            (s, sl)
        })
        .unzip()
}

/// `∫_Ω |Du|^2` per x-plane.
pub fn gradient_density(grid: &SpectralGrid, spec: &[Complex64]) -> Vec<f64> {
    let mixed = grid.x_inverse(spec);
    let mixed_x = grid.x_inverse(&grid.dx(spec));
    let (_, perp) = plane_sums(&mixed, grid.lambda());
    let (gx, _) = plane_sums(&mixed_x, grid.lambda());
    gx.iter().zip(&perp).map(|(a, b)| a + b).collect()
}

/// Full profile of a synced state.
pub fn compute(
    grid: &SpectralGrid,
    t: f64,
    spec: &[Complex64],
    phys: &[f64],
    forcing: Option<&[f64]>,
    flux_fn: &(dyn Fn(f64) -> f64 + Sync),
) -> PlaneProfile {
    let dom = grid.domain();
    let plane = dom.plane_len();
    let da = dom.dy() * dom.dz();
    let mixed = grid.x_inverse(spec);
    let mixed_x = grid.x_inverse(&grid.dx(spec));
    let (mass, grad_perp) = plane_sums(&mixed, grid.lambda());
    let (grad_x, _) = plane_sums(&mixed_x, grid.lambda());

    let pointwise: Vec<(f64, f64, f64, f64)> = phys
        .par_chunks(plane)
        .enumerate()
        .map(|(j, u)| {
            let mut cubic = 0.0;
            let mut flux = 0.0;
            let mut fu = 0.0;
            let mut mx = 0.0f64;
            for (n, &v) in u.iter().enumerate() {
                cubic += v * v * v;
                flux += flux_fn(v);
                if let Some(f) = forcing {
                    fu += f[j * plane + n] * v;
                }
                mx = mx.max(v.abs());
            }
            (cubic * da, flux * da, fu * da, mx)
        })
        .collect();

    PlaneProfile {
        t,
        mass,
        grad_x,
        grad_perp,
        cubic: pointwise.iter().map(|p| p.0).collect(),
        flux: pointwise.iter().map(|p| p.1).collect(),
        forcing: pointwise.iter().map(|p| p.2).collect(),
        max_abs: pointwise.iter().map(|p| p.3).collect(),
    }
}
