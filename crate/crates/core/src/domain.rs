//! Geometry of the truncated layer: a periodic x-window `[-X, X)` times the
//! rectangle `(0, L1) x (0, L2)` with homogeneous Dirichlet walls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};

pub const MIN_NX: usize = 8;
pub const MAX_NX: usize = 1 << 14;
pub const MIN_NT: usize = 4;
pub const MAX_NT: usize = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Extent in y.
    pub l1: f64,
    /// Extent in z.
    pub l2: f64,
    /// Half-length of the periodic x-window.
    pub x_half: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dealias: bool,
}

impl DomainSpec {
    pub fn new(l1: f64, l2: f64, x_half: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let dom = Self {
            l1,
            l2,
            x_half,
            nx,
            ny,
            nz,
            dealias: true,
        };
        dom.validate()?;
        Ok(dom)
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l1", self.l1), ("l2", self.l2), ("x_half", self.x_half)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ZkError::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.nx % 2 != 0 || !(MIN_NX..=MAX_NX).contains(&self.nx) {
            return Err(ZkError::Domain(format!(
                "nx must be even and in [{MIN_NX}, {MAX_NX}], got {}",
                self.nx
            )));
        }
        for (name, n) in [("ny", self.ny), ("nz", self.nz)] {
            if !(MIN_NT..=MAX_NT).contains(&n) {
                return Err(ZkError::Domain(format!(
                    "{name} must be in [{MIN_NT}, {MAX_NT}], got {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_half / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.l1 / (self.ny + 1) as f64
    }

    pub fn dz(&self) -> f64 {
        self.l2 / (self.nz + 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy() * self.dz()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn plane_len(&self) -> usize {
        self.ny * self.nz
    }

    /// Flat index, x slowest and z fastest.
    #[inline]
    pub fn index(&self, j: usize, m: usize, n: usize) -> usize {
        (j * self.ny + m) * self.nz + n
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.x_half + j as f64 * self.dx()
    }

    /// Interior collocation point `y_m`, `m` is zero-based (`y = (m+1) dy`).
    pub fn y(&self, m: usize) -> f64 {
        (m + 1) as f64 * self.dy()
    }

    pub fn z(&self, n: usize) -> f64 {
        (n + 1) as f64 * self.dz()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Signed Fourier index of storage slot `i`; the Nyquist slot reports `nx/2`.
    pub fn signed_k(&self, i: usize) -> i64 {
        let n = self.nx as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wavenumber `pi k / X` used for differentiation and propagation.
    /// The Nyquist slot carries no resolvable direction and is assigned zero.
    pub fn xi(&self, i: usize) -> f64 {
        if i == self.nx / 2 {
            0.0
        } else {
            PI * self.signed_k(i) as f64 / self.x_half
        }
    }

    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }

    /// `pi l / L1` for the one-based sine index.
    pub fn mu_y(&self, l1: usize) -> f64 {
        PI * l1 as f64 / self.l1
    }

    pub fn mu_z(&self, l2: usize) -> f64 {
        PI * l2 as f64 / self.l2
    }

    /// Eigenvalue for the zero-based storage slots `(p, q)` (modes `p+1`, `q+1`).
    pub fn lambda_slot(&self, p: usize, q: usize) -> f64 {
        let a = self.mu_y(p + 1);
        let b = self.mu_z(q + 1);
        a * a + b * b
    }

    pub fn lambda11(&self) -> f64 {
        self.lambda_slot(0, 0)
    }

    /// Largest |xi| that survives the dealiasing mask.
    pub fn max_xi(&self) -> f64 {
        let kmax = if self.dealias {
            self.nx / 3
        } else {
            self.nx / 2 - 1
        };
        PI * kmax as f64 / self.x_half
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    pub l1: usize,
    pub l2: usize,
    pub lambda: f64,
}

/// Dirichlet eigenvalue of `-Δ` on the rectangle for the sine mode `(l1, l2)`.
pub fn eigenvalue(l1: i64, l2: i64, dom: &DomainSpec) -> Result<f64> {
    if l1 < 1 || l2 < 1 {
        return Err(ZkError::Domain(format!(
            "mode indices must be positive, got ({l1}, {l2})"
        )));
    }
    let a = PI * l1 as f64 / dom.l1;
    let b = PI * l2 as f64 / dom.l2;
    Ok(a * a + b * b)
}

/// All resolved transverse modes sorted by eigenvalue.
pub fn sorted_modes(dom: &DomainSpec) -> Vec<TransverseMode> {
    let mut modes: Vec<TransverseMode> = (1..=dom.ny)
        .flat_map(|l1| {
            (1..=dom.nz).map(move |l2| TransverseMode {
                l1,
                l2,
                lambda: dom.lambda_slot(l1 - 1, l2 - 1),
            })
        })
        .collect();
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    modes
}

/// Two-thirds rule mask over the spectral array (x slowest, z fastest).
pub fn dealias_mask(dom: &DomainSpec) -> Vec<bool> {
    if !dom.dealias {
        return vec![true; dom.len()];
    }
    let kx = (dom.nx / 3) as i64;
    let ky = 2 * dom.ny / 3;
    let kz = 2 * dom.nz / 3;
    let mut mask = Vec::with_capacity(dom.len());
    for i in 0..dom.nx {
        let keep_x = dom.signed_k(i).abs() <= kx && i != dom.nx / 2;
        for p in 0..dom.ny {
            for q in 0..dom.nz {
                mask.push(keep_x && p + 1 <= ky && q + 1 <= kz);
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(l: f64) -> DomainSpec {
        DomainSpec::new(l, l, 8.0, 12, 6, 6).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let d = cube(PI);
        assert!((eigenvalue(1, 1, &d).unwrap() - 2.0).abs() < 1e-14);
        assert!((eigenvalue(1, 2, &d).unwrap() - 5.0).abs() < 1e-14);
        let u = cube(1.0);
        assert!((eigenvalue(1, 1, &u).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        assert!(matches!(eigenvalue(0, 1, &d), Err(ZkError::Domain(_))));
        assert!(matches!(eigenvalue(1, -3, &d), Err(ZkError::Domain(_))));
    }

    #[test]
    fn sorted_modes_monotone() {
        let d = DomainSpec::new(1.3, 2.7, 4.0, 8, 9, 7).unwrap();
        let modes = sorted_modes(&d);
        assert_eq!(modes.len(), 63);
        assert!(modes.windows(2).all(|w| w[0].lambda <= w[1].lambda));
        assert_eq!((modes[0].l1, modes[0].l2), (1, 1));
    }

    #[test]
    fn mask_keeps_two_thirds() {
        let d = cube(PI);
        let mask = dealias_mask(&d);
        let kept: Vec<i64> = (0..d.nx)
            .filter(|&i| mask[d.index(i, 0, 0)])
            .map(|i| d.signed_k(i))
            .collect();
        let mut sorted = kept.clone();
        sorted.sort();
        assert_eq!(sorted, vec![-4, -3, -2, -1, 0, 1, 2, 3, 4]);
        assert!(mask[d.index(0, 3, 3)]);
        assert!(!mask[d.index(0, 4, 0)]);

        let all = dealias_mask(&d.with_dealias(false));
        assert!(all.iter().all(|&b| b));
    }

    #[test]
    fn mask_idempotent() {
        let d = cube(PI);
        let mask = dealias_mask(&d);
        let once: Vec<f64> = mask.iter().map(|&k| if k { 1.5 } else { 0.0 }).collect();
        let twice: Vec<f64> = once
            .iter()
            .zip(&mask)
            .map(|(&v, &k)| if k { v } else { 0.0 })
            .collect();
        assert_eq!(once, twice);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(DomainSpec::new(1.0, 1.0, 1.0, 9, 4, 4).is_err());
        assert!(DomainSpec::new(1.0, 1.0, 1.0, 6, 4, 4).is_err());
        assert!(DomainSpec::new(0.0, 1.0, 1.0, 8, 4, 4).is_err());
        assert!(DomainSpec::new(1.0, 1.0, 1.0, 8, 3, 4).is_err());
        assert!(DomainSpec::new(1.0, 1.0, f64::NAN, 8, 4, 4).is_err());
    }
}
