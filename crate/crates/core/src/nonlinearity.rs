//! The truncated flux `g_h`: exactly `u^2/2` for `|u| <= 1/h`, linear with
//! slope `2/h` beyond `2/h`, and the integral of
//! `s eta(2 - h|s|) + (2 sgn s / h) eta(h|s| - 1)` in between.

use crate::error::{Result, ZkError};
use crate::quadrature::integrate_adaptive;
use crate::weights::eta;

pub const TABLE_POINTS: usize = 4096;
const BAND_TOL: f64 = 1e-13;

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(ZkError::Domain(format!("h must lie in (0, 1], got {h}")));
    }
    Ok(())
}

#[inline]
fn integrand(s: f64, h: f64) -> f64 {
    let a = s.abs();
    s * eta(2.0 - h * a) + 2.0 * s.signum() / h * eta(h * a - 1.0)
}

/// `g_h'(u)`: the integrand of `g_h` evaluated at `u`.
pub fn g_h_prime(u: f64, h: f64) -> Result<f64> {
    check_h(h)?;
    if !u.is_finite() {
        return Err(ZkError::Data(format!("non-finite argument {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(integrand(u, h))
}

/// Reference evaluation of `g_h(u)` with adaptive quadrature on the middle band.
pub fn g_h_eval(u: f64, h: f64) -> Result<f64> {
    check_h(h)?;
    if !u.is_finite() {
        return Err(ZkError::Data(format!("non-finite argument {u}")));
    }
    let a = u.abs();
    let lo = 1.0 / h;
    let hi = 2.0 / h;
    if a <= lo {
        return Ok(0.5 * u * u);
    }
    let band = |b: f64| 0.5 * lo * lo + integrate_adaptive(|s| integrand(s, h), lo, b, BAND_TOL);
    if a <= hi {
        Ok(band(a))
    } else {
        Ok(band(hi) + 2.0 / h * (a - hi))
    }
}

/// Cubic Hermite table of `g_h` and of `G_h(u) = ∫_0^u g_h'(s) s ds` on the
/// middle band.
#[derive(Debug, Clone)]
pub struct TruncatedFlux {
    h: f64,
    lo: f64,
    step: f64,
    g: Vec<f64>,
    flux: Vec<f64>,
    g_hi: f64,
    flux_hi: f64,
}

impl TruncatedFlux {
    pub fn new(h: f64) -> Result<Self> {
        check_h(h)?;
        let lo = 1.0 / h;
        let hi = 2.0 / h;
        let step = (hi - lo) / (TABLE_POINTS - 1) as f64;
        let mut g = Vec::with_capacity(TABLE_POINTS);
        let mut flux = Vec::with_capacity(TABLE_POINTS);
        let mut gv = 0.5 * lo * lo;
        let mut fv = lo * lo * lo / 3.0;
        g.push(gv);
        flux.push(fv);
        for i in 1..TABLE_POINTS {
            let a = lo + (i - 1) as f64 * step;
            let b = if i + 1 == TABLE_POINTS { hi } else { lo + i as f64 * step };
            gv += integrate_adaptive(|s| integrand(s, h), a, b, 1e-16);
            fv += integrate_adaptive(|s| integrand(s, h) * s, a, b, 1e-16 * hi);
            g.push(gv);
            flux.push(fv);
        }
        Ok(Self {
            h,
            lo,
            step,
            g_hi: gv,
            flux_hi: fv,
            g,
            flux,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn hermite(&self, table: &[f64], deriv: impl Fn(f64) -> f64, a: f64) -> f64 {
        let pos = (a - self.lo) / self.step;
        let i = (pos.floor() as usize).min(TABLE_POINTS - 2);
        let x0 = self.lo + i as f64 * self.step;
        let t = (a - x0) / self.step;
        let (p0, p1) = (table[i], table[i + 1]);
        let (m0, m1) = (deriv(x0) * self.step, deriv(x0 + self.step) * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1
    }

    /// Tabulated `g_h(u)`.
    pub fn g(&self, u: f64) -> f64 {
        let a = u.abs();
        let hi = 2.0 * self.lo;
        if a <= self.lo {
            0.5 * u * u
        } else if a >= hi {
            self.g_hi + 2.0 / self.h * (a - hi)
        } else {
            self.hermite(&self.g, |s| integrand(s, self.h), a)
        }
    }

    pub fn g_prime(&self, u: f64) -> f64 {
        if u == 0.0 {
            0.0
        } else {
            integrand(u, self.h)
        }
    }

    /// `∫_0^u g_h'(s) s ds`, odd in `u`.
    pub fn flux(&self, u: f64) -> f64 {
        let a = u.abs();
        let hi = 2.0 * self.lo;
        let v = if a <= self.lo {
            a * a * a / 3.0
        } else if a >= hi {
            self.flux_hi + (a * a - hi * hi) / self.h
        } else {
            self.hermite(&self.flux, |s| integrand(s, self.h) * s, a)
        };
        v.copysign(u)
    }

    /// Interior band `[1/h, 2/h]`.
    pub fn band(&self) -> (f64, f64) {
        (self.lo, 2.0 * self.lo)
    }
}

/// Nonlinear flux selection for the stepper.
#[derive(Debug, Clone)]
pub enum Nonlinearity {
    /// Linear equation only.
    Off,
    /// `g(u) = u^2 / 2`.
    Quadratic,
    Truncated(TruncatedFlux),
}

impl Nonlinearity {
    pub fn g(&self, u: f64) -> f64 {
        match self {
            Self::Off => 0.0,
            Self::Quadratic => 0.5 * u * u,
            Self::Truncated(t) => t.g(u),
        }
    }

    /// `∫_0^u g'(s) s ds`
    pub fn flux(&self, u: f64) -> f64 {
        match self {
            Self::Off => 0.0,
            Self::Quadratic => u * u * u / 3.0,
            Self::Truncated(t) => t.flux(u),
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self, Self::Off)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_region_is_exact() {
        assert_eq!(g_h_eval(1.0, 0.5).unwrap(), 0.5);
        assert_eq!(g_h_eval(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(g_h_prime(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(g_h_prime(0.0, 0.5).unwrap(), 0.0);
        let t = TruncatedFlux::new(0.25).unwrap();
        for i in 0..=400 {
            let u = -4.0 + 8.0 * i as f64 / 400.0;
            assert_eq!(t.g(u), 0.5 * u * u);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(g_h_eval(1.0, 0.0), Err(ZkError::Domain(_))));
        assert!(matches!(g_h_eval(1.0, 1.5), Err(ZkError::Domain(_))));
        assert!(matches!(g_h_prime(1.0, -0.1), Err(ZkError::Domain(_))));
        assert!(TruncatedFlux::new(2.0).is_err());
    }

    #[test]
    fn even_in_u() {
        for h in [1.0, 0.3] {
            for i in 0..50 {
                let u = 0.17 * i as f64;
                assert_eq!(g_h_eval(u, h).unwrap(), g_h_eval(-u, h).unwrap());
            }
        }
    }

    #[test]
    fn flux_matches_quadratic_primitive_and_is_odd() {
        let t = TruncatedFlux::new(0.5).unwrap();
        assert!((t.flux(1.5) - 1.125).abs() < 1e-15);
        assert_eq!(t.flux(-3.1), -t.flux(3.1));
        // beyond the band the slope of the primitive is g'(u) u = 2u/h
        let d = (t.flux(6.0 + 1e-5) - t.flux(6.0 - 1e-5)) / 2e-5;
        assert!((d - 2.0 * 6.0 / 0.5).abs() < 1e-5);
    }
}
