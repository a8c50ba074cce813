//! Physical <-> spectral transforms on the layer grid.
//!
//! Normalization: with `phi_l(y) = sqrt(2/L) sin(pi l y / L)` (orthonormal on
//! `(0, L)` and, exactly, under the interior grid sum with weight `dy`), the
//! coefficients `c[k][l1][l2]` satisfy
//!
//! ```text
//! u(x_j, y_m, z_n) = sum_k sum_l c[k][l] exp(i xi_k x_j) phi_l1(y_m) phi_l2(z_n),
//! xi_k = pi k / X.
//! ```
//!
//! Parseval then reads `sum_grid u^2 dx dy dz = 2X sum |c|^2`.
//!
//! A "mixed" array holds x in physical space and (y, z) as sine coefficients;
//! exact transverse integrals are taken there.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::{dealias_mask, DomainSpec};
use crate::error::{Result, ZkError};
use crate::field::Field;

/// Dense row-major matrix used for the transverse basis changes.
#[derive(Debug, Clone)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Per-axis sine tables.
#[derive(Debug, Clone)]
struct SineAxis {
    /// `phi_{p+1}(y_m) * dy`, shape `n x n` (coefficient p, point m).
    forward: Mat,
    /// `phi_{p+1}(y_m)`, shape `n x n` (point m, coefficient p).
    inverse: Mat,
    /// `phi'_{p+1}(y_m)` at interior points.
    deriv: Mat,
    /// Values on the closed grid `m = 0..=n+1` (boundary included).
    closed_value: Mat,
    closed_deriv: Mat,
}

impl SineAxis {
    fn new(n: usize, len: f64) -> Self {
        let h = len / (n + 1) as f64;
        let amp = (2.0 / len).sqrt();
        let arg = |mode: usize, point: usize| PI * (mode * point) as f64 / (n + 1) as f64;
        let val = |mode: usize, point: usize| amp * arg(mode, point).sin();
        let der = |mode: usize, point: usize| amp * (PI * mode as f64 / len) * arg(mode, point).cos();
        Self {
            forward: Mat::from_fn(n, n, |p, m| val(p + 1, m + 1) * h),
            inverse: Mat::from_fn(n, n, |m, p| val(p + 1, m + 1)),
            deriv: Mat::from_fn(n, n, |m, p| der(p + 1, m + 1)),
            closed_value: Mat::from_fn(n + 2, n, |m, p| if m == 0 || m == n + 1 { 0.0 } else { val(p + 1, m) }),
            closed_deriv: Mat::from_fn(n + 2, n, |m, p| der(p + 1, m)),
        }
    }
}

/// Which transverse operator to apply when leaving mixed space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransverseOp {
    Value,
    DerivY,
    DerivZ,
}

/// Transform context: FFT plans, sine tables, wavenumbers and the dealias mask.
pub struct SpectralGrid {
    dom: DomainSpec,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    sy: SineAxis,
    sz: SineAxis,
    xi: Vec<f64>,
    lambda: Vec<f64>,
    mask: Vec<bool>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("dom", &self.dom).finish()
    }
}

impl SpectralGrid {
    pub fn new(dom: DomainSpec) -> Result<Self> {
        dom.validate()?;
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(dom.nx);
        let fft_inv = planner.plan_fft_inverse(dom.nx);
        let xi = (0..dom.nx).map(|i| dom.xi(i)).collect();
        let mut lambda = Vec::with_capacity(dom.plane_len());
        for p in 0..dom.ny {
            for q in 0..dom.nz {
                lambda.push(dom.lambda_slot(p, q));
            }
        }
        Ok(Self {
            fft_fwd,
            fft_inv,
            sy: SineAxis::new(dom.ny, dom.l1),
            sz: SineAxis::new(dom.nz, dom.l2),
            xi,
            lambda,
            mask: dealias_mask(&dom),
            dom,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.dom
    }

    /// Wavenumber per x storage slot.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Transverse eigenvalues per plane slot `p * nz + q`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn apply_mask(&self, spec: &mut [Complex64]) {
        if !self.dom.dealias {
            return;
        }
        spec.par_iter_mut().zip(self.mask.par_iter()).for_each(|(c, &keep)| {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        });
    }

    fn sign(&self, i: usize) -> f64 {
        if self.dom.signed_k(i).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Apply `my` along y and `mz` along z to every x-plane.
    fn apply_planes(&self, my: &Mat, mz: &Mat, input: &[f64]) -> Vec<f64> {
        let (ny, nz) = (my.cols, mz.cols);
        let in_plane = ny * nz;
        let out_plane = my.rows * mz.rows;
        let mut out = vec![0.0; self.dom.nx * out_plane];
        out.par_chunks_mut(out_plane)
            .zip(input.par_chunks(in_plane))
            .for_each_init(
                || vec![0.0; my.rows * nz],
                |tmp, (dst, src)| {
                    tmp.iter_mut().for_each(|v| *v = 0.0);
                    for r in 0..my.rows {
                        let trow = &mut tmp[r * nz..(r + 1) * nz];
                        for (m, &w) in my.row(r).iter().enumerate() {
                            if w == 0.0 {
                                continue;
                            }
                            let srow = &src[m * nz..(m + 1) * nz];
                            for (t, &s) in trow.iter_mut().zip(srow) {
                                *t += w * s;
                            }
                        }
                    }
                    for r in 0..my.rows {
                        let trow = &tmp[r * nz..(r + 1) * nz];
                        for s in 0..mz.rows {
                            let zrow = mz.row(s);
                            let mut acc = 0.0;
                            for n in 0..nz {
                                acc += trow[n] * zrow[n];
                            }
                            dst[r * mz.rows + s] = acc;
                        }
                    }
                },
            );
        out
    }

    /// Real mixed array (x physical) -> spectral coefficients.
    pub fn x_forward(&self, mixed: &[f64]) -> Vec<Complex64> {
        let nx = self.dom.nx;
        let plane = self.dom.plane_len();
        let mut lines = vec![Complex64::new(0.0, 0.0); nx * plane];
        let fft = &self.fft_fwd;
        lines
            .par_chunks_mut(nx)
            .enumerate()
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                |scratch, (p, line)| {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = Complex64::new(mixed[j * plane + p], 0.0);
                    }
                    fft.process_with_scratch(line, scratch);
                },
            );
        let inv_n = 1.0 / nx as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); nx * plane];
        out.par_chunks_mut(plane).enumerate().for_each(|(i, dst)| {
            let s = self.sign(i) * inv_n;
            for (p, v) in dst.iter_mut().enumerate() {
                *v = lines[p * nx + i] * s;
            }
        });
        out
    }

    /// Spectral coefficients -> real mixed array (x physical).
    pub fn x_inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let nx = self.dom.nx;
        let plane = self.dom.plane_len();
        let mut lines = vec![Complex64::new(0.0, 0.0); nx * plane];
        let fft = &self.fft_inv;
        lines
            .par_chunks_mut(nx)
            .enumerate()
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                |scratch, (p, line)| {
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = spec[i * plane + p] * self.sign(i);
                    }
                    fft.process_with_scratch(line, scratch);
                },
            );
        let mut out = vec![0.0; nx * plane];
        out.par_chunks_mut(plane).enumerate().for_each(|(j, dst)| {
            for (p, v) in dst.iter_mut().enumerate() {
                *v = lines[p * nx + j].re;
            }
        });
        out
    }

    /// Physical grid values -> mixed array.
    pub fn transverse_forward(&self, phys: &[f64]) -> Vec<f64> {
        self.apply_planes(&self.sy.forward, &self.sz.forward, phys)
    }

    /// Mixed array -> values (or a transverse derivative) on the interior grid.
    pub fn transverse_inverse(&self, mixed: &[f64], op: TransverseOp) -> Vec<f64> {
        match op {
            TransverseOp::Value => self.apply_planes(&self.sy.inverse, &self.sz.inverse, mixed),
            TransverseOp::DerivY => self.apply_planes(&self.sy.deriv, &self.sz.inverse, mixed),
            TransverseOp::DerivZ => self.apply_planes(&self.sy.inverse, &self.sz.deriv, mixed),
        }
    }

    /// Mixed array -> values on the closed grid `(ny+2) x (nz+2)` per plane,
    /// boundary points included.
    pub fn transverse_inverse_closed(&self, mixed: &[f64], op: TransverseOp) -> Vec<f64> {
        let (y, z) = match op {
            TransverseOp::Value => (&self.sy.closed_value, &self.sz.closed_value),
            TransverseOp::DerivY => (&self.sy.closed_deriv, &self.sz.closed_value),
            TransverseOp::DerivZ => (&self.sy.closed_value, &self.sz.closed_deriv),
        };
        self.apply_planes(y, z, mixed)
    }

    pub fn forward(&self, phys: &[f64]) -> Vec<Complex64> {
        self.x_forward(&self.transverse_forward(phys))
    }

    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        self.transverse_inverse(&self.x_inverse(spec), TransverseOp::Value)
    }

    /// Multiply by `i xi` (spectral x-derivative).
    pub fn dx(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let plane = self.dom.plane_len();
        let mut out = spec.to_vec();
        out.par_chunks_mut(plane).enumerate().for_each(|(i, c)| {
            let f = Complex64::new(0.0, self.xi[i]);
            c.iter_mut().for_each(|v| *v *= f);
        });
        out
    }

    /// Populate the spectral representation from the physical one.
    pub fn to_spectral(&self, f: &Field) -> Result<Field> {
        self.check_dom(f)?;
        let phys = f
            .physical()
            .ok_or_else(|| ZkError::Usage("field has no physical representation".into()))?;
        if let Some(pos) = phys.iter().position(|v| !v.is_finite()) {
            return Err(ZkError::Data(format!("non-finite value at flat index {pos}")));
        }
        let spec = self.forward(phys);
        Ok(Field::synced(self.dom, phys.to_vec(), spec))
    }

    /// Populate the physical representation from the spectral one.
    pub fn to_physical(&self, f: &Field) -> Result<Field> {
        self.check_dom(f)?;
        let spec = f
            .spectral()
            .ok_or_else(|| ZkError::Usage("field has no spectral representation".into()))?;
        if let Some(pos) = spec.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(ZkError::Data(format!("non-finite coefficient at flat index {pos}")));
        }
        let phys = self.inverse(spec);
        Ok(Field::synced(self.dom, phys, spec.to_vec()))
    }

    /// Bring both representations in sync, transforming whichever is missing.
    pub fn sync(&self, f: &Field) -> Result<Field> {
        match (f.physical(), f.spectral()) {
            (Some(_), Some(_)) => Ok(f.clone()),
            (Some(_), None) => self.to_spectral(f),
            (None, Some(_)) => self.to_physical(f),
            (None, None) => unreachable!("a field always carries one representation"),
        }
    }

    /// Pointwise gradient `(u_x, u_y, u_z)` on the interior grid.
    pub fn gradient(&self, spec: &[Complex64]) -> [Vec<f64>; 3] {
        let mixed = self.x_inverse(spec);
        let mixed_x = self.x_inverse(&self.dx(spec));
        [
            self.transverse_inverse(&mixed_x, TransverseOp::Value),
            self.transverse_inverse(&mixed, TransverseOp::DerivY),
            self.transverse_inverse(&mixed, TransverseOp::DerivZ),
        ]
    }

    fn check_dom(&self, f: &Field) -> Result<()> {
        if f.domain() != &self.dom {
            return Err(ZkError::Usage("field belongs to a different domain".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(DomainSpec::new(2.0, 3.0, 5.0, 16, 6, 5).unwrap()).unwrap()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_field_has_zero_coefficients() {
        let g = grid();
        let spec = g.forward(&vec![0.0; g.domain().len()]);
        assert!(spec.iter().all(|c| c.norm() == 0.0));
        let back = g.inverse(&spec);
        assert!(back.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn basis_function_is_single_pair() {
        let g = grid();
        let d = *g.domain();
        let k = 3usize;
        let mut u = vec![0.0; d.len()];
        for j in 0..d.nx {
            for m in 0..d.ny {
                for n in 0..d.nz {
                    u[d.index(j, m, n)] = (PI * d.y(m) / d.l1).sin()
                        * (PI * d.z(n) / d.l2).sin()
                        * (2.0 * PI * d.x(j) / (2.0 * d.x_half) * k as f64).cos();
                }
            }
        }
        let spec = g.forward(&u);
        let big: Vec<usize> = (0..spec.len()).filter(|&i| spec[i].norm() > 1e-12).collect();
        assert_eq!(big.len(), 2);
        let plane = d.plane_len();
        let ks: Vec<i64> = big.iter().map(|&i| d.signed_k(i / plane)).collect();
        assert!(ks.contains(&3) && ks.contains(&-3));
        assert!(big.iter().all(|&i| i % plane == 0));
    }

    #[test]
    fn single_coefficient_gives_basis_product() {
        let g = grid();
        let d = *g.domain();
        let mut spec = vec![Complex64::new(0.0, 0.0); d.len()];
        // k = 2, l1 = 2, l2 = 1, plus its conjugate partner for a real field.
        let slot = |i: usize| i * d.plane_len() + d.nz;
        spec[slot(2)] = Complex64::new(0.5, 0.0);
        spec[slot(d.nx - 2)] = Complex64::new(0.5, 0.0);
        let u = g.inverse(&spec);
        let amp = 2.0 / (d.l1 * d.l2).sqrt();
        let mut expect = vec![0.0; d.len()];
        for j in 0..d.nx {
            for m in 0..d.ny {
                for n in 0..d.nz {
                    expect[d.index(j, m, n)] = amp
                        * (2.0 * PI * d.y(m) / d.l1).sin()
                        * (PI * d.z(n) / d.l2).sin()
                        * (2.0 * PI * d.x(j) / d.x_half).cos();
                }
            }
        }
        assert!(rel(&u, &expect) < 1e-13);
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid();
        let d = *g.domain();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = g.forward(&u);
            let back = g.inverse(&spec);
            assert!(rel(&back, &u) < 1e-12);
            let grid_norm: f64 = u.iter().map(|v| v * v).sum::<f64>() * d.cell_volume();
            let spec_norm: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() * 2.0 * d.x_half;
            assert!((grid_norm - spec_norm).abs() / grid_norm < 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetry_in_xi() {
        let g = grid();
        let d = *g.domain();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = g.forward(&u);
        let plane = d.plane_len();
        for i in 1..d.nx {
            let partner = d.nx - i;
            for p in 0..plane {
                let a = spec[i * plane + p];
                let b = spec[partner * plane + p].conj();
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_of_basis_product_are_exact() {
        let g = grid();
        let d = *g.domain();
        let (kx, l1, l2) = (2.0, 3.0, 2.0);
        let w = PI * kx / d.x_half;
        let (a, b) = (PI * l1 / d.l1, PI * l2 / d.l2);
        let mut u = vec![0.0; d.len()];
        let mut ex = [vec![0.0; d.len()], vec![0.0; d.len()], vec![0.0; d.len()]];
        for j in 0..d.nx {
            for m in 0..d.ny {
                for n in 0..d.nz {
                    let (x, y, z) = (d.x(j), d.y(m), d.z(n));
                    let idx = d.index(j, m, n);
                    u[idx] = (w * x).sin() * (a * y).sin() * (b * z).sin();
                    ex[0][idx] = w * (w * x).cos() * (a * y).sin() * (b * z).sin();
                    ex[1][idx] = a * (w * x).sin() * (a * y).cos() * (b * z).sin();
                    ex[2][idx] = b * (w * x).sin() * (a * y).sin() * (b * z).cos();
                }
            }
        }
        let grad = g.gradient(&g.forward(&u));
        for c in 0..3 {
            assert!(rel(&grad[c], &ex[c]) < 1e-10, "component {c}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid();
        let mut u = vec![0.0; g.domain().len()];
        u[17] = f64::NAN;
        let f = Field::from_physical(*g.domain(), u).unwrap_err();
        assert!(matches!(f, ZkError::Data(_)));
    }
}
