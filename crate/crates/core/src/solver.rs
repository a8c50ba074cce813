//! Integrating-factor RK4 time stepping for
//! `u_t + b u_x + Δu_x - δΔu + g(u)_x = f`.
//!
//! The linear part is applied exactly through `exp(L dt)`; only the flux and
//! forcing go through the explicit Runge–Kutta stages. When the nonlinearity
//! is on and dealiasing is enabled the state lives in the two-thirds band.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::field::Field;
use crate::forcing::TimeForcing;
use crate::linear::{exp_factors, flux_divergence, picard_iterate, LinearParams, DEFAULT_DUHAMEL_NODES};
use crate::nonlinearity::{Nonlinearity, TruncatedFlux};
use crate::profile::{self, PlaneProfile};
use crate::spectral::SpectralGrid;
use crate::weights::{weighted_l2_norm, WeightFn};

/// Largest admissible `|u|` on the outermost x-planes.
pub const SEAM_TOL: f64 = 1e-10;
/// Bound on `dt * max|u| * max|xi|`.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxMode {
    /// Linear equation.
    Off,
    /// `g(u) = u^2/2`.
    Quadratic,
    /// `g_h` with the configured `h`.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: LinearParams,
    /// Truncation level; 0 selects the un-truncated flux.
    pub h: f64,
    pub flux: FluxMode,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    /// Compare the first step against a Picard iteration.
    pub picard_check: bool,
    /// Reject initial data that is not negligible at the torus seam.
    pub enforce_seam_guard: bool,
}

impl SolverConfig {
    /// The approximating problem: `δ = h`, flux `g_h` (or `u^2/2` when `h = 0`).
    pub fn regularized(b: f64, h: f64, dt: f64, t_final: f64) -> Self {
        Self {
            params: LinearParams { b, delta: h },
            h,
            flux: if h > 0.0 { FluxMode::Truncated } else { FluxMode::Quadratic },
            dt,
            t_final,
            snapshot_stride: 1,
            picard_check: false,
            enforce_seam_guard: true,
        }
    }

    pub fn linear(b: f64, delta: f64, dt: f64, t_final: f64) -> Self {
        Self {
            params: LinearParams { b, delta },
            h: 0.0,
            flux: FluxMode::Off,
            ..Self::regularized(b, 0.0, dt, t_final)
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ZkError::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(ZkError::Domain(format!(
                "T must be at least dt, got T={} dt={}",
                self.t_final, self.dt
            )));
        }
        let n = self.t_final / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(ZkError::Domain(format!(
                "T={} is not a whole number of steps dt={}",
                self.t_final, self.dt
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(ZkError::Domain("snapshot_stride must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.h) {
            return Err(ZkError::Domain(format!("h must lie in [0, 1], got {}", self.h)));
        }
        if self.flux == FluxMode::Truncated && self.h == 0.0 {
            return Err(ZkError::Domain("truncated flux requires h > 0".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Ok(match self.flux {
            FluxMode::Off => Nonlinearity::Off,
            FluxMode::Quadratic => Nonlinearity::Quadratic,
            FluxMode::Truncated => Nonlinearity::Truncated(TruncatedFlux::new(self.h)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub u: Field,
    pub step_count: usize,
    pub config: SolverConfig,
    /// Recorded profiles, one per snapshot (first at `t = 0`).
    pub samples: Vec<PlaneProfile>,
    /// Whether a non-zero forcing drove the run.
    pub forced: bool,
    /// Set when the solution exceeded `SEAM_TOL` at the seam.
    pub seam_warning: bool,
    /// Set when `max|u| > 1/h` with the truncated flux (g_h differs from `u^2/2`).
    pub truncation_active: bool,
    /// L2 distance between the first IF-RK4 step and four Picard iterates.
    pub picard_gap: Option<f64>,
}

/// `max|u|` over the two outermost x-planes.
pub fn seam_magnitude(profile: &PlaneProfile) -> f64 {
    let n = profile.nx();
    profile.max_abs[0].max(profile.max_abs[n - 1])
}

/// Spectral `-∂_x g(u) + f`.
pub fn nonlinear_rhs(grid: &SpectralGrid, u: &Field, f: Option<&Field>, g: &Nonlinearity) -> Result<Field> {
    let u = grid.sync(u)?;
    let dom = *grid.domain();
    let mut out = if g.is_off() {
        vec![Complex64::new(0.0, 0.0); dom.len()]
    } else {
        flux_divergence(grid, g, u.coeffs())?
    };
    if let Some(f) = f {
        let f = grid.sync(f)?;
        out.iter_mut().zip(f.coeffs()).for_each(|(a, b)| *a += b);
    }
    Field::from_spectral(dom, out)
}

/// Precomputed exponentials and flux for repeated steps of one configuration.
pub struct Stepper<'a> {
    grid: &'a SpectralGrid,
    cfg: SolverConfig,
    g: Nonlinearity,
    forcing: &'a dyn TimeForcing,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    masked: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a SpectralGrid, cfg: SolverConfig, forcing: &'a dyn TimeForcing) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.nonlinearity()?;
        let masked = grid.domain().dealias && !g.is_off();
        Ok(Self {
            grid,
            full: exp_factors(grid, &cfg.params, cfg.dt),
            half: exp_factors(grid, &cfg.params, 0.5 * cfg.dt),
            cfg,
            g,
            forcing,
            masked,
        })
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.g
    }

    /// Restrict to the dealiased band when the nonlinear term is active.
    pub fn prepare(&self, coeffs: &mut [Complex64]) {
        if self.masked {
            self.grid.apply_mask(coeffs);
        }
    }

    fn rhs(&self, c: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let mut out = if self.g.is_off() {
            vec![Complex64::new(0.0, 0.0); c.len()]
        } else {
            flux_divergence(self.grid, &self.g, c)?
        };
        if let Some(mut f) = self.forcing.coefficients(t)? {
            if f.len() != c.len() {
                return Err(ZkError::Usage("forcing has the wrong number of coefficients".into()));
            }
            self.prepare(&mut f);
            out.par_iter_mut().zip(f.par_iter()).for_each(|(a, b)| *a += b);
        }
        for v in out.iter_mut() {
            *v *= self.cfg.dt;
        }
        Ok(out)
    }

    /// One IF-RK4 step from time `t`.
    pub fn advance(&self, c: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let dt = self.cfg.dt;
        let (e, e2) = (&self.full, &self.half);
        let n = c.len();
        let zip = |f: &(dyn Fn(usize) -> Complex64 + Sync)| -> Vec<Complex64> { (0..n).into_par_iter().map(f).collect() };

        let k1 = self.rhs(c, t)?;
        let s2 = zip(&|i| e2[i] * (c[i] + 0.5 * k1[i]));
        let k2 = self.rhs(&s2, t + 0.5 * dt)?;
        let s3 = zip(&|i| e2[i] * c[i] + 0.5 * k2[i]);
        let k3 = self.rhs(&s3, t + 0.5 * dt)?;
        let s4 = zip(&|i| e[i] * c[i] + e2[i] * k3[i]);
        let k4 = self.rhs(&s4, t + dt)?;
        Ok(zip(&|i| {
            e[i] * c[i] + (e[i] * k1[i] + 2.0 * e2[i] * (k2[i] + k3[i]) + k4[i]) / 6.0
        }))
    }

    fn sample(&self, t: f64, spec: &[Complex64], phys: &[f64]) -> Result<PlaneProfile> {
        let f = match self.forcing.coefficients(t)? {
            Some(mut f) => {
                self.prepare(&mut f);
                Some(self.grid.inverse(&f))
            }
            None => None,
        };
        let g = &self.g;
        Ok(profile::compute(self.grid, t, spec, phys, f.as_deref(), &|v| g.flux(v)))
    }
}

fn check_finite(c: &[Complex64], step: usize) -> Result<()> {
    if c.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(ZkError::Instability {
            step,
            reason: "non-finite coefficients".into(),
        });
    }
    Ok(())
}

/// Advance a state by one step.
pub fn step(
    grid: &SpectralGrid,
    state: SimulationState,
    cfg: &SolverConfig,
    forcing: &dyn TimeForcing,
) -> Result<SimulationState> {
    let stepper = Stepper::new(grid, *cfg, forcing)?;
    let u = grid.sync(&state.u)?;
    let next = stepper.advance(u.coeffs(), state.t)?;
    check_finite(&next, state.step_count + 1)?;
    let step_count = state.step_count + 1;
    Ok(SimulationState {
        t: step_count as f64 * cfg.dt,
        u: grid.to_physical(&Field::from_spectral(*grid.domain(), next)?)?,
        step_count,
        ..state
    })
}

pub fn run(grid: &SpectralGrid, u0: &Field, cfg: &SolverConfig, forcing: &dyn TimeForcing) -> Result<SimulationState> {
    run_observed(grid, u0, cfg, forcing, &mut |_, _| Ok(()))
}

/// `run`, calling `observe(t, u)` with the synced field at every snapshot.
pub fn run_observed(
    grid: &SpectralGrid,
    u0: &Field,
    cfg: &SolverConfig,
    forcing: &dyn TimeForcing,
    observe: &mut dyn FnMut(f64, &Field) -> Result<()>,
) -> Result<SimulationState> {
    let stepper = Stepper::new(grid, *cfg, forcing)?;
    let dom = *grid.domain();
    let u0 = grid.sync(u0)?;
    let mut c = u0.coeffs().to_vec();
    stepper.prepare(&mut c);
    let mut phys = grid.inverse(&c);

    let first = stepper.sample(0.0, &c, &phys)?;
    if cfg.enforce_seam_guard && seam_magnitude(&first) > SEAM_TOL {
        return Err(ZkError::Guard(format!(
            "initial data reaches {:e} at the x-seam (limit {SEAM_TOL:e})",
            seam_magnitude(&first)
        )));
    }
    let band = if cfg.flux == FluxMode::Truncated { 1.0 / cfg.h } else { f64::INFINITY };
    let mut state = SimulationState {
        t: 0.0,
        u: Field::zeros(dom),
        step_count: 0,
        config: *cfg,
        samples: Vec::new(),
        forced: !forcing.is_zero(),
        seam_warning: false,
        truncation_active: false,
        picard_gap: None,
    };
    let mut record = |state: &mut SimulationState, p: PlaneProfile, field: &Field| -> Result<()> {
        state.seam_warning |= seam_magnitude(&p) > SEAM_TOL;
        state.samples.push(p);
        observe(state.t, field)
    };
    let field0 = Field::synced(dom, phys.clone(), c.clone());
    record(&mut state, first, &field0)?;

    let max_xi = dom.max_xi();
    let n = cfg.n_steps();
    for k in 0..n {
        let umax = phys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !stepper.nonlinearity().is_off() && cfg.dt * umax * max_xi > CFL_LIMIT {
            return Err(ZkError::Guard(format!(
                "dt * max|u| * max|xi| = {:.3} exceeds {CFL_LIMIT} at step {k}",
                cfg.dt * umax * max_xi
            )));
        }
        state.truncation_active |= umax > band;
        c = stepper.advance(&c, k as f64 * cfg.dt)?;
        check_finite(&c, k + 1)?;
        phys = grid.inverse(&c);
        state.step_count = k + 1;
        state.t = (k + 1) as f64 * cfg.dt;

        if k == 0 && cfg.picard_check {
            state.picard_gap = Some(picard_gap(grid, &u0, cfg, forcing, stepper.nonlinearity(), &c)?);
        }
        if (k + 1) % cfg.snapshot_stride == 0 || k + 1 == n {
            let p = stepper.sample(state.t, &c, &phys)?;
            let f = Field::synced(dom, phys.clone(), c.clone());
            record(&mut state, p, &f)?;
        }
    }
    let umax = phys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    state.truncation_active |= umax > band;
    state.u = Field::synced(dom, phys, c);
    Ok(state)
}

fn picard_gap(
    grid: &SpectralGrid,
    u0: &Field,
    cfg: &SolverConfig,
    forcing: &dyn TimeForcing,
    g: &Nonlinearity,
    stepped: &[Complex64],
) -> Result<f64> {
    let mut start = u0.coeffs().to_vec();
    if grid.domain().dealias && !g.is_off() {
        grid.apply_mask(&mut start);
    }
    let start = Field::from_spectral(*grid.domain(), start)?;
    let r = picard_iterate(grid, &start, forcing, &cfg.params, g, 4, cfg.dt, DEFAULT_DUHAMEL_NODES)?;
    let d: f64 = r
        .field
        .coeffs()
        .iter()
        .zip(stepped)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok((d * 2.0 * grid.domain().x_half).sqrt())
}

/// Outcome of a perturbation experiment for one `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceReport {
    pub eps: f64,
    /// `||u0 - ũ0||` in the weighted norm.
    pub initial_distance: f64,
    /// `sup_t ||u(t) - ũ(t)||` in the weighted norm.
    pub sup_distance: f64,
    /// `sup_distance / initial_distance`; `None` when both vanish.
    pub ratio: Option<f64>,
}

/// Run `u0` and `u0 + eps * perturbation` side by side and measure the
/// weighted amplification of their difference over the snapshots.
pub fn continuous_dependence_experiment(
    grid: &SpectralGrid,
    u0: &Field,
    perturbation: &Field,
    eps: f64,
    cfg: &SolverConfig,
    w: &dyn WeightFn,
    forcing: &dyn TimeForcing,
) -> Result<DependenceReport> {
    let (mut reports, _) = dependence_ladder(grid, u0, perturbation, &[eps], cfg, w, forcing)?;
    Ok(reports.remove(0))
}

/// The perturbation experiment for several `eps`, sharing one base run.
/// Also returns the base run.
pub fn dependence_ladder(
    grid: &SpectralGrid,
    u0: &Field,
    perturbation: &Field,
    eps_values: &[f64],
    cfg: &SolverConfig,
    w: &dyn WeightFn,
    forcing: &dyn TimeForcing,
) -> Result<(Vec<DependenceReport>, SimulationState)> {
    if let Some(eps) = eps_values.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(ZkError::Usage(format!("eps must be positive, got {eps}")));
    }
    let dom = *grid.domain();
    let base = grid.sync(u0)?;
    let pert = grid.sync(perturbation)?;
    let exact_match = pert.values().iter().all(|v| *v == 0.0);
    let base_field = Field::from_physical(dom, base.values().to_vec())?;

    let mut trajectory = Vec::new();
    let state = run_observed(grid, &base_field, cfg, forcing, &mut |_, f| {
        trajectory.push(f.values().to_vec());
        Ok(())
    })?;
    let reports = eps_values
        .par_iter()
        .map(|&eps| -> Result<DependenceReport> {
            let shifted: Vec<f64> = base.values().iter().zip(pert.values()).map(|(a, b)| a + eps * b).collect();
            let shifted = Field::from_physical(dom, shifted)?;
            let mut distances = Vec::with_capacity(trajectory.len());
            run_observed(grid, &shifted, cfg, forcing, &mut |_, f| {
                let reference = &trajectory[distances.len()];
                let diff: Vec<f64> = f.values().iter().zip(reference).map(|(a, b)| a - b).collect();
                distances.push(weighted_l2_norm(&Field::from_physical(dom, diff)?, w)?);
                Ok(())
            })?;
            let initial = distances[0];
            let sup = distances.iter().copied().fold(0.0, f64::max);
            let ratio = if exact_match || (initial == 0.0 && sup == 0.0) {
                None
            } else {
                Some(sup / initial)
            };
            Ok(DependenceReport {
                eps,
                initial_distance: initial,
                sup_distance: sup,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reports, state))
}
