//! Field storage and the `ZKF1` binary snapshot format.
//!
//! Snapshot layout (all little-endian):
//!
//! ```text
//! b"ZKF1" | nx: u64 | ny: u64 | nz: u64 | l1: f64 | l2: f64 | x_half: f64 | values: f64 * nx*ny*nz
//! ```
//!
//! Values are physical grid samples, x slowest and z fastest.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::domain::DomainSpec;
use crate::error::{Result, ZkError};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ZKF1";
pub const SNAPSHOT_HEADER_LEN: usize = 4 + 3 * 8 + 3 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Physical,
    Spectral,
    Both,
}

#[derive(Debug, Clone)]
pub struct Field {
    dom: DomainSpec,
    physical: Vec<f64>,
    spectral: Vec<Complex64>,
    repr: Representation,
}

impl Field {
    pub fn zeros(dom: DomainSpec) -> Self {
        Self {
            dom,
            physical: vec![0.0; dom.len()],
            spectral: vec![Complex64::new(0.0, 0.0); dom.len()],
            repr: Representation::Both,
        }
    }

    pub fn from_physical(dom: DomainSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != dom.len() {
            return Err(ZkError::Usage(format!(
                "expected {} grid values, got {}",
                dom.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(ZkError::Data(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            dom,
            physical: values,
            spectral: Vec::new(),
            repr: Representation::Physical,
        })
    }

    /// Sample `f(x, y, z)` on the collocation grid.
    pub fn from_fn(dom: DomainSpec, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(dom.len());
        for j in 0..dom.nx {
            let x = dom.x(j);
            for m in 0..dom.ny {
                let y = dom.y(m);
                for n in 0..dom.nz {
                    values.push(f(x, y, dom.z(n)));
                }
            }
        }
        Self::from_physical(dom, values)
    }

    pub fn from_spectral(dom: DomainSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != dom.len() {
            return Err(ZkError::Usage(format!(
                "expected {} coefficients, got {}",
                dom.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            dom,
            physical: Vec::new(),
            spectral: coeffs,
            repr: Representation::Spectral,
        })
    }

    pub(crate) fn synced(dom: DomainSpec, physical: Vec<f64>, spectral: Vec<Complex64>) -> Self {
        Self {
            dom,
            physical,
            spectral,
            repr: Representation::Both,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.dom
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn physical(&self) -> Option<&[f64]> {
        match self.repr {
            Representation::Physical | Representation::Both => Some(&self.physical),
            Representation::Spectral => None,
        }
    }

    pub fn spectral(&self) -> Option<&[Complex64]> {
        match self.repr {
            Representation::Spectral | Representation::Both => Some(&self.spectral),
            Representation::Physical => None,
        }
    }

    /// Physical values; panics if the physical side is not available.
    pub fn values(&self) -> &[f64] {
        self.physical().expect("physical representation not synced")
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.spectral().expect("spectral representation not synced")
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let phys = self
            .physical()
            .ok_or_else(|| ZkError::Usage("snapshot needs the physical representation".into()))?;
        let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 8 * phys.len());
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        for n in [self.dom.nx, self.dom.ny, self.dom.nz] {
            buf.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in [self.dom.l1, self.dom.l2, self.dom.x_half] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in phys {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Read a snapshot; the dealias flag is not stored and is taken from `dealias`.
    pub fn read_snapshot(path: &Path, dealias: bool) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::decode_snapshot(&bytes, dealias)
    }

    pub fn decode_snapshot(bytes: &[u8], dealias: bool) -> Result<Self> {
        let header = read_snapshot_header(bytes)?;
        let dom = header.with_dealias(dealias);
        let expected = SNAPSHOT_HEADER_LEN + 8 * dom.len();
        if bytes.len() != expected {
            return Err(ZkError::Data(format!(
                "snapshot has {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let values = bytes[SNAPSHOT_HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_physical(dom, values)
    }
}

/// Parse and validate the fixed-size header.
pub fn read_snapshot_header(bytes: &[u8]) -> Result<DomainSpec> {
    if bytes.len() < SNAPSHOT_HEADER_LEN || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(ZkError::Data("missing ZKF1 header".into()));
    }
    let u = |i: usize| u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().unwrap()) as usize;
    let f = |i: usize| f64::from_le_bytes(bytes[28 + 8 * i..36 + 8 * i].try_into().unwrap());
    DomainSpec::new(f(0), f(1), f(2), u(0), u(1), u(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let dom = DomainSpec::new(1.5, 2.5, 4.0, 8, 4, 5).unwrap();
        let f = Field::from_fn(dom, |x, y, z| x + 10.0 * y + 100.0 * z).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.zkf");
        f.write_snapshot(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"ZKF1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 8);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 5);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(bytes[44..52].try_into().unwrap()), 4.0);
        // second value is (j=0, m=0, n=1): z fastest
        let v1 = f64::from_le_bytes(bytes[60..68].try_into().unwrap());
        assert_eq!(v1, dom.x(0) + 10.0 * dom.y(0) + 100.0 * dom.z(1));
        assert_eq!(bytes.len(), SNAPSHOT_HEADER_LEN + 8 * 160);
    }

    #[test]
    fn corrupt_snapshots_rejected() {
        assert!(Field::decode_snapshot(b"ZKF0aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", true).is_err());
        let dom = DomainSpec::new(1.0, 1.0, 1.0, 8, 4, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.zkf");
        Field::zeros(dom).write_snapshot(&p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        assert!(Field::decode_snapshot(&bytes, true).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn snapshot_round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 8 * 4 * 4), l1 in 0.1f64..10.0) {
            let dom = DomainSpec::new(l1, 2.0, 3.0, 8, 4, 4).unwrap();
            let f = Field::from_physical(dom, vals.clone()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.zkf");
            f.write_snapshot(&p).unwrap();
            let g = Field::read_snapshot(&p, true).unwrap();
            prop_assert_eq!(g.domain(), &dom);
            prop_assert_eq!(g.values(), &vals[..]);
        }
    }
}
