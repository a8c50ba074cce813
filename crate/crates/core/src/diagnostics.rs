//! Conservation laws, energy identities, the Friedrichs constant, the weighted
//! interpolation inequality and exponential decay, evaluated on recorded runs.

use rayon::prelude::*;

use crate::domain::DomainSpec;
use crate::error::{Result, ZkError};
use crate::field::Field;
use crate::forcing::NoForcing;
use crate::profile::{self, PlaneProfile};
use crate::solver::{run, SimulationState, SolverConfig};
use crate::spectral::{SpectralGrid, TransverseOp};
use crate::weights::{WeightFn, WeightSpec};

/// Quantities entering the decay estimate for the exponential weight `e^{2αx}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPrediction {
    pub alpha: f64,
    /// The nonlinear decay constant has no explicit value and is not computed.
    pub beta_rate: Option<f64>,
    pub omega_area: f64,
    pub lambda11: f64,
    pub b: f64,
    /// `2α(λ11 - b - 4α²)`: lower bound on the decay rate of `∫u² e^{2αx}`
    /// for the linear, unregularized flow.
    pub predicted_linear_rate: f64,
}

impl DecayPrediction {
    pub fn new(dom: &DomainSpec, b: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ZkError::Domain(format!("alpha must be positive, got {alpha}")));
        }
        let lambda11 = dom.lambda11();
        Ok(Self {
            alpha,
            beta_rate: None,
            omega_area: dom.area(),
            lambda11,
            b,
            predicted_linear_rate: 2.0 * alpha * (lambda11 - b - 4.0 * alpha * alpha),
        })
    }
}

/// `∫ u²` from a profile.
pub fn profile_mass(p: &PlaneProfile, dx: f64) -> f64 {
    p.mass.iter().sum::<f64>() * dx
}

/// `∫ (|Du|² - u³/3)` from a profile.
pub fn profile_energy(p: &PlaneProfile, dx: f64) -> f64 {
    (0..p.nx())
        .map(|j| p.grad_x[j] + p.grad_perp[j] - p.cubic[j] / 3.0)
        .sum::<f64>()
        * dx
}

/// `∫ u² ψ` from a profile.
pub fn profile_weighted_mass(p: &PlaneProfile, dom: &DomainSpec, w: &dyn WeightFn) -> f64 {
    p.mass.iter().enumerate().map(|(j, m)| m * w.value(dom.x(j))).sum::<f64>() * dom.dx()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    pub initial_mass: f64,
    pub initial_energy: f64,
    /// `max_t |M(t) - M(0)| / |M(0)|`
    pub mass_drift: f64,
    /// `max_t |E(t) - E(0)| / |E(0)|`
    pub energy_drift: f64,
}

fn relative_drift(series: &[f64]) -> f64 {
    let base = series[0];
    let worst = series.iter().map(|v| (v - base).abs()).fold(0.0, f64::max);
    if worst == 0.0 {
        0.0
    } else {
        worst / base.abs()
    }
}

pub fn conservation_report(run: &SimulationState) -> Result<ConservationReport> {
    if run.forced {
        return Err(ZkError::Usage("conservation laws need a homogeneous (unforced) run".into()));
    }
    if run.samples.len() < 2 {
        return Err(ZkError::Usage("need at least two snapshots".into()));
    }
    let dx = run.u.domain().dx();
    let mass: Vec<f64> = run.samples.iter().map(|p| profile_mass(p, dx)).collect();
    let energy: Vec<f64> = run.samples.iter().map(|p| profile_energy(p, dx)).collect();
    Ok(ConservationReport {
        initial_mass: mass[0],
        initial_energy: energy[0],
        mass_drift: relative_drift(&mass),
        energy_drift: relative_drift(&energy),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedrichsReport {
    /// Smallest Rayleigh quotient `∫|∇⊥φ|² / ∫φ²`, i.e. `λ11`.
    pub min_rayleigh: f64,
    /// Sharp constant `1/√λ11` in `‖φ‖ ≤ C ‖∇⊥φ‖`.
    pub sharp_constant: f64,
    /// The cruder constant `min(L1, L2)/π`.
    pub crude_constant: f64,
}

pub fn friedrichs_min_rayleigh(dom: &DomainSpec) -> FriedrichsReport {
    let lam = dom.lambda11();
    FriedrichsReport {
        min_rayleigh: lam,
        sharp_constant: 1.0 / lam.sqrt(),
        crude_constant: dom.l1.min(dom.l2) / std::f64::consts::PI,
    }
}

/// `∫|∇⊥φ|² / ∫φ²` for a field.
pub fn rayleigh_quotient(grid: &SpectralGrid, phi: &Field) -> Result<f64> {
    let phi = grid.sync(phi)?;
    let p = profile::compute(grid, 0.0, phi.coeffs(), phi.values(), None, &|_| 0.0);
    let mass: f64 = p.mass.iter().sum();
    if mass == 0.0 {
        return Err(ZkError::Usage("Rayleigh quotient of the zero field".into()));
    }
    Ok(p.grad_perp.iter().sum::<f64>() / mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpolationRatio {
    Value(f64),
    /// Both sides vanish.
    Degenerate,
}

impl InterpolationRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::Degenerate => None,
        }
    }
}

/// Exponent `s = (2m+3)/(4k) - 3/(2kq)`, after checking `(k, m, q)`.
pub fn interpolation_exponent(k: usize, m: usize, q: f64) -> Result<f64> {
    let ok = match (k, m) {
        (1, 0) | (2, 1) => (2.0..=6.0).contains(&q),
        (2, 0) => q >= 2.0 && q.is_finite(),
        _ => false,
    };
    if !ok {
        return Err(ZkError::Usage(format!(
            "(k={k}, m={m}, q={q}) is outside the admissible parameter table"
        )));
    }
    let (k, m) = (k as f64, m as f64);
    Ok((2.0 * m + 3.0) / (4.0 * k) - 3.0 / (2.0 * k * q))
}

/// Per-plane `∫_Ω |D²φ|²`.
fn hessian_density(grid: &SpectralGrid, spec: &[num_complex::Complex64]) -> Vec<f64> {
    let dx1 = grid.dx(spec);
    let dx2 = grid.dx(&dx1);
    let a = grid.x_inverse(spec);
    let b = grid.x_inverse(&dx1);
    let c = grid.x_inverse(&dx2);
    let lambda = grid.lambda();
    let plane = lambda.len();
    (0..grid.domain().nx)
        .into_par_iter()
        .map(|j| {
            let r = j * plane..(j + 1) * plane;
            a[r.clone()]
                .iter()
                .zip(&b[r.clone()])
                .zip(&c[r])
                .zip(lambda)
                .map(|(((a, b), c), l)| c * c + 2.0 * l * b * b + l * l * a * a)
                .sum()
        })
        .collect()
}

/// `LHS / RHS` of the weighted interpolation inequality with unit constant:
/// `‖ |D^m φ| ψ1^s ψ2^{1/2-s} ‖_q` against
/// `‖ |D^k φ| ψ1^{1/2} ‖^{2s} ‖ φ ψ2^{1/2} ‖^{1-2s} + ‖ φ ψ2^{1/2} ‖`.
pub fn interpolation_ratio(
    grid: &SpectralGrid,
    phi: &Field,
    k: usize,
    m: usize,
    q: f64,
    w1: &dyn WeightFn,
    w2: &dyn WeightFn,
) -> Result<InterpolationRatio> {
    let s = interpolation_exponent(k, m, q)?;
    let dom = *grid.domain();
    let phi = grid.sync(phi)?;
    let xs = dom.xs();
    let psi1: Vec<f64> = xs.iter().map(|&x| w1.value(x)).collect();
    let psi2: Vec<f64> = xs.iter().map(|&x| w2.value(x)).collect();
    if psi1.iter().chain(&psi2).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(ZkError::Usage("weights must be finite and non-negative on the grid".into()));
    }
    if psi1.iter().zip(&psi2).any(|(a, b)| *b == 0.0 && *a > 0.0) {
        return Err(ZkError::Usage("psi1 is not dominated by psi2 on the grid".into()));
    }
    let dx = dom.dx();
    let mass = profile::compute(grid, 0.0, phi.coeffs(), phi.values(), None, &|_| 0.0).mass;
    let low: f64 = (mass.iter().zip(&psi2).map(|(m, p)| m * p).sum::<f64>() * dx).sqrt();
    let top_density = match k {
        1 => profile::gradient_density(grid, phi.coeffs()),
        _ => hessian_density(grid, phi.coeffs()),
    };
    let top: f64 = (top_density.iter().zip(&psi1).map(|(d, p)| d * p).sum::<f64>() * dx).sqrt();
    let mix = |j: usize| psi1[j].powf(s) * psi2[j].powf(0.5 - s);

    let lhs = if q == 2.0 {
        let dens = if m == 0 { mass } else { profile::gradient_density(grid, phi.coeffs()) };
        (dens.iter().enumerate().map(|(j, d)| d * mix(j).powi(2)).sum::<f64>() * dx).sqrt()
    } else {
        let plane = dom.plane_len();
        let magnitude: Vec<f64> = if m == 0 {
            phi.values().iter().map(|v| v.abs()).collect()
        } else {
            let spec = phi.coeffs();
            let mixed = grid.x_inverse(spec);
            let ux = grid.transverse_inverse(&grid.x_inverse(&grid.dx(spec)), TransverseOp::Value);
            let uy = grid.transverse_inverse(&mixed, TransverseOp::DerivY);
            let uz = grid.transverse_inverse(&mixed, TransverseOp::DerivZ);
            (0..ux.len()).map(|i| (ux[i] * ux[i] + uy[i] * uy[i] + uz[i] * uz[i]).sqrt()).collect()
        };
        let sum: f64 = magnitude
            .par_chunks(plane)
            .enumerate()
            .map(|(j, row)| {
                let f = mix(j);
                row.iter().map(|v| (v * f).powf(q)).sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        (sum * dom.cell_volume()).powf(1.0 / q)
    };
    let rhs = if low == 0.0 { 0.0 } else { top.powf(2.0 * s) * low.powf(1.0 - 2.0 * s) + low };
    if rhs == 0.0 {
        return if lhs == 0.0 {
            Ok(InterpolationRatio::Degenerate)
        } else {
            Err(ZkError::Data("right-hand side vanishes for a non-zero left-hand side".into()))
        };
    }
    Ok(InterpolationRatio::Value(lhs / rhs))
}

/// Least-squares slope of `-ln(values)` against `times`, ignoring samples
/// below `1e3 ε` relative to the first.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let v0 = *values.first()?;
    if !(v0 > 0.0) {
        return None;
    }
    let floor = 1e3 * f64::EPSILON * v0;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > floor)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecayStatus {
    Valid,
    /// Zero data; no rate.
    Trivial,
    /// The solution left the window or reached the seam.
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub prediction: DecayPrediction,
    pub status: DecayStatus,
    pub times: Vec<f64>,
    /// `(∫_window u² e^{2αx})^{1/2}` per snapshot.
    pub weighted_norms: Vec<f64>,
    /// Fitted decay rate of `∫_window u² e^{2αx}`; compare with `predicted_linear_rate`.
    pub fitted_rate: Option<f64>,
    /// Fitted decay rate of the norm itself (half of the above for a pure exponential).
    pub fitted_norm_rate: Option<f64>,
    pub nonincreasing: bool,
    /// `max|u|` over planes right of the window, over the whole run.
    pub outside_window_max: f64,
}

fn empty_decay(prediction: DecayPrediction, status: DecayStatus) -> DecayReport {
    let trivial = status == DecayStatus::Trivial;
    DecayReport {
        prediction,
        status,
        times: if trivial { vec![0.0] } else { vec![] },
        weighted_norms: if trivial { vec![0.0] } else { vec![] },
        fitted_rate: None,
        fitted_norm_rate: None,
        nonincreasing: trivial,
        outside_window_max: if trivial { 0.0 } else { f64::NAN },
    }
}

/// Run an unforced problem and measure the decay of the exponentially weighted
/// norm on the window `[-X, window_right]`.
pub fn decay_experiment(
    grid: &SpectralGrid,
    u0: &Field,
    cfg: &SolverConfig,
    alpha: f64,
    window_right: f64,
) -> Result<DecayReport> {
    let prediction = DecayPrediction::new(grid.domain(), cfg.params.b, alpha)?;
    let u0 = grid.sync(u0)?;
    if u0.values().iter().all(|v| *v == 0.0) {
        return Ok(empty_decay(prediction, DecayStatus::Trivial));
    }
    match run(grid, &u0, cfg, &NoForcing) {
        Ok(s) => decay_from_run(&s, alpha, window_right),
        Err(ZkError::Guard(reason)) => Ok(empty_decay(prediction, DecayStatus::Invalid(reason))),
        Err(e) => Err(e),
    }
}

/// Decay analysis of a finished unforced run.
pub fn decay_from_run(state: &SimulationState, alpha: f64, window_right: f64) -> Result<DecayReport> {
    let dom = *state.u.domain();
    let prediction = DecayPrediction::new(&dom, state.config.params.b, alpha)?;
    if state.forced {
        return Err(ZkError::Usage("decay experiments need an unforced run".into()));
    }
    if !(window_right < dom.x_half && window_right > -dom.x_half) {
        return Err(ZkError::Usage(format!(
            "window edge {window_right} must lie inside (-{0}, {0})",
            dom.x_half
        )));
    }
    if state.samples.iter().all(|p| p.max_abs.iter().all(|v| *v == 0.0)) {
        return Ok(empty_decay(prediction, DecayStatus::Trivial));
    }
    let inside: Vec<bool> = (0..dom.nx).map(|j| dom.x(j) <= window_right).collect();
    let psi = WeightSpec::exp2alpha(alpha)?;
    let mut times = Vec::with_capacity(state.samples.len());
    let mut squared = Vec::with_capacity(state.samples.len());
    let mut outside = 0.0f64;
    for p in &state.samples {
        times.push(p.t);
        let mut acc = 0.0;
        for j in 0..dom.nx {
            if inside[j] {
                acc += p.mass[j] * psi.eval(dom.x(j));
            } else {
                outside = outside.max(p.max_abs[j]);
            }
        }
        squared.push(acc * dom.dx());
    }
    let status = if outside >= 1e-10 {
        DecayStatus::Invalid(format!("solution reaches {outside:e} outside the window"))
    } else if state.seam_warning {
        DecayStatus::Invalid("solution reached the x-seam".into())
    } else {
        DecayStatus::Valid
    };
    let norms: Vec<f64> = squared.iter().map(|v| v.sqrt()).collect();
    Ok(DecayReport {
        prediction,
        status,
        nonincreasing: squared.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
        fitted_rate: fit_decay_rate(&times, &squared),
        fitted_norm_rate: fit_decay_rate(&times, &norms),
        times,
        weighted_norms: norms,
        outside_window_max: outside,
    })
}

/// Which balance law to check on a recorded run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdentityKind {
    /// `∫u²(t) + 2δ∫∫|Du|² = ∫u0² + 2∫∫fu` for the linear problem.
    LinearL2,
    /// Weighted balance with `ψ = e^{2αx}` (or any admissible weight).
    Weighted(WeightSpec),
    /// The same L2 balance for the regularized nonlinear problem, where the
    /// flux term integrates to zero.
    RegularizedL2,
}

impl IdentityKind {
    pub fn weighted_exp(alpha: f64) -> Result<Self> {
        Ok(Self::Weighted(WeightSpec::exp2alpha(alpha)?))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::LinearL2 => "linear-l2-balance",
            Self::Weighted(_) => "weighted-balance",
            Self::RegularizedL2 => "regularized-l2-balance",
        }
    }
}

/// Relative residual `|LHS - RHS| / max(|LHS|, |RHS|, ε)` of the integrated
/// balance at every snapshot, with trapezoidal time quadrature.
pub fn identity_residual_series(run: &SimulationState, which: IdentityKind) -> Result<Vec<f64>> {
    if run.samples.len() < 2 {
        return Err(ZkError::Usage("identity residual needs at least two snapshots".into()));
    }
    let dom = *run.u.domain();
    let dx = dom.dx();
    let p = run.config.params;
    // per-sample (stored state term, time-integrated left terms, time-integrated right terms)
    let rates: Vec<(f64, f64, f64)> = match which {
        IdentityKind::LinearL2 | IdentityKind::RegularizedL2 => run
            .samples
            .iter()
            .map(|s| {
                let mass = profile_mass(s, dx);
                let grad: f64 = s.gradient().iter().sum::<f64>() * dx;
                let fu: f64 = s.forcing.iter().sum::<f64>() * dx;
                (mass, 2.0 * p.delta * grad, 2.0 * fu)
            })
            .collect(),
        IdentityKind::Weighted(w) => {
            w.validate()?;
            let d: Vec<[f64; 4]> = (0..dom.nx)
                .map(|j| {
                    let x = dom.x(j);
                    [w.eval(x), w.nth_derivative(x, 1), w.nth_derivative(x, 2), w.nth_derivative(x, 3)]
                })
                .collect();
            run.samples
                .iter()
                .map(|s| {
                    let (mut mass, mut left, mut right) = (0.0, 0.0, 0.0);
                    for (j, [w0, w1, w2, w3]) in d.iter().enumerate() {
                        mass += s.mass[j] * w0;
                        left += (3.0 * s.grad_x[j] + s.grad_perp[j]) * w1
                            + 2.0 * p.delta * (s.grad_x[j] + s.grad_perp[j]) * w0;
                        right += s.mass[j] * (p.b * w1 + w3 + p.delta * w2)
                            + 2.0 * s.flux[j] * w1
                            + 2.0 * s.forcing[j] * w0;
                    }
                    (mass * dx, left * dx, right * dx)
                })
                .collect()
        }
    };
    let mut out = Vec::with_capacity(rates.len());
    let (mut int_left, mut int_right) = (0.0, 0.0);
    for i in 0..rates.len() {
        if i > 0 {
            let h = run.samples[i].t - run.samples[i - 1].t;
            int_left += 0.5 * h * (rates[i].1 + rates[i - 1].1);
            int_right += 0.5 * h * (rates[i].2 + rates[i - 1].2);
        }
        let lhs = rates[i].0 + int_left;
        let rhs = rates[0].0 + int_right;
        let scale = lhs.abs().max(rhs.abs()).max(f64::EPSILON);
        out.push((lhs - rhs).abs() / scale);
    }
    Ok(out)
}

/// Residual of the balance over the whole run.
pub fn identity_residual(run: &SimulationState, which: IdentityKind) -> Result<f64> {
    Ok(*identity_residual_series(run, which)?.last().unwrap())
}
