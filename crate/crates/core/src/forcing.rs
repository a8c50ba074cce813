//! Time-dependent right-hand sides `f(t, x, y, z)`, delivered as spectral
//! coefficients.

use num_complex::Complex64;

use crate::error::{Result, ZkError};
use crate::spectral::SpectralGrid;

pub trait TimeForcing: Sync {
    /// Coefficients at time `t`; `Ok(None)` means `f(t) = 0`.
    fn coefficients(&self, t: f64) -> Result<Option<Vec<Complex64>>>;

    /// Whether the forcing vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl TimeForcing for NoForcing {
    fn coefficients(&self, _t: f64) -> Result<Option<Vec<Complex64>>> {
        Ok(None)
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Closure returning coefficients.
pub struct FnForcing<F>(pub F);

impl<F> TimeForcing for FnForcing<F>
where
    F: Fn(f64) -> Vec<Complex64> + Sync,
{
    fn coefficients(&self, t: f64) -> Result<Option<Vec<Complex64>>> {
        Ok(Some((self.0)(t)))
    }
}

/// Physical-space callback `f(t, x, y, z)` sampled on the grid.
pub struct GridForcing<'g, F> {
    grid: &'g SpectralGrid,
    f: F,
}

impl<'g, F> GridForcing<'g, F>
where
    F: Fn(f64, f64, f64, f64) -> f64 + Sync,
{
    pub fn new(grid: &'g SpectralGrid, f: F) -> Self {
        Self { grid, f }
    }
}

impl<F> TimeForcing for GridForcing<'_, F>
where
    F: Fn(f64, f64, f64, f64) -> f64 + Sync,
{
    fn coefficients(&self, t: f64) -> Result<Option<Vec<Complex64>>> {
        let dom = self.grid.domain();
        let mut vals = Vec::with_capacity(dom.len());
        for j in 0..dom.nx {
            for m in 0..dom.ny {
                for n in 0..dom.nz {
                    vals.push((self.f)(t, dom.x(j), dom.y(m), dom.z(n)));
                }
            }
        }
        if let Some(p) = vals.iter().position(|v| !v.is_finite()) {
            return Err(ZkError::Data(format!("forcing is non-finite at t={t}, index {p}")));
        }
        Ok(Some(self.grid.forward(&vals)))
    }
}

/// Forcing known at discrete times, linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct SampledForcing {
    times: Vec<f64>,
    coeffs: Vec<Vec<Complex64>>,
}

impl SampledForcing {
    pub fn new(times: Vec<f64>, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if times.is_empty() || times.len() != coeffs.len() {
            return Err(ZkError::Usage("sampled forcing needs matching, non-empty times and samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ZkError::Usage("sample times must be strictly increasing".into()));
        }
        Ok(Self { times, coeffs })
    }
}

impl TimeForcing for SampledForcing {
    fn coefficients(&self, t: f64) -> Result<Option<Vec<Complex64>>> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        let tol = 1e-12 * (1.0 + t1.abs());
        if t < t0 - tol || t > t1 + tol {
            return Err(ZkError::Usage(format!(
                "forcing samples cover [{t0}, {t1}] but t = {t} was requested"
            )));
        }
        if self.times.len() == 1 {
            return Ok(Some(self.coeffs[0].clone()));
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (a, b) = (self.times[i - 1], self.times[i]);
        let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
        Ok(Some(
            self.coeffs[i - 1]
                .iter()
                .zip(&self.coeffs[i])
                .map(|(p, q)| p * (1.0 - w) + q * w)
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_forcing_interpolates_and_checks_coverage() {
        let one = vec![Complex64::new(1.0, 0.0); 3];
        let three = vec![Complex64::new(3.0, 0.0); 3];
        let f = SampledForcing::new(vec![0.0, 1.0], vec![one, three]).unwrap();
        let mid = f.coefficients(0.25).unwrap().unwrap();
        assert!((mid[0].re - 1.5).abs() < 1e-15);
        assert!(matches!(f.coefficients(1.5), Err(ZkError::Usage(_))));
        assert!(matches!(f.coefficients(-0.1), Err(ZkError::Usage(_))));
    }
}
