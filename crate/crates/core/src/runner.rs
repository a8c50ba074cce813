//! Preset execution and on-disk outputs (`metrics.csv`, `report.txt`,
//! snapshots).

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialCondition, Preset};
use crate::diagnostics::{
    conservation_report, decay_from_run, identity_residual_series, interpolation_ratio, profile_energy,
    profile_mass, profile_weighted_mass, IdentityKind,
};
use crate::domain::DomainSpec;
use crate::error::{Result, ZkError};
use crate::field::Field;
use crate::forcing::NoForcing;
use crate::solver::{dependence_ladder, run_observed, seam_magnitude, FluxMode, SimulationState, SolverConfig};
use crate::spectral::SpectralGrid;
use crate::weights::{l2_norm, Derivative, WeightFn, WeightSpec};

pub const METRICS_HEADER: &str =
    "t,l2,energy,weighted_l2,max_abs,seam_magnitude,l2_identity_residual,weighted_identity_residual";

/// Admissible `(k, m, q)` triples exercised by the interpolation audit.
pub const AUDIT_COMBOS: [(usize, usize, f64); 6] =
    [(1, 0, 2.0), (1, 0, 4.0), (1, 0, 6.0), (2, 0, 4.0), (2, 1, 2.0), (2, 0, 8.0)];

/// Environment variable naming the default output base directory.
pub const OUTPUT_ROOT_ENV: &str = "ZK_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    pub l2: f64,
    pub energy: f64,
    pub weighted_l2: f64,
    pub max_abs: f64,
    pub seam_magnitude: f64,
    pub l2_identity_residual: f64,
    pub weighted_identity_residual: f64,
}

pub fn metric_rows(state: &SimulationState, weight: &WeightSpec) -> Result<Vec<MetricRow>> {
    let dom = *state.u.domain();
    let dx = dom.dx();
    let n = state.samples.len();
    let (l2_res, w_res) = if n >= 2 {
        let kind = if state.config.flux == FluxMode::Off {
            IdentityKind::LinearL2
        } else {
            IdentityKind::RegularizedL2
        };
        (
            identity_residual_series(state, kind)?,
            identity_residual_series(state, IdentityKind::Weighted(*weight))?,
        )
    } else {
        (vec![0.0; n], vec![0.0; n])
    };
    Ok(state
        .samples
        .iter()
        .enumerate()
        .map(|(i, p)| MetricRow {
            t: p.t,
            l2: profile_mass(p, dx).sqrt(),
            energy: profile_energy(p, dx),
            weighted_l2: profile_weighted_mass(p, &dom, weight).sqrt(),
            max_abs: p.max_abs.iter().copied().fold(0.0, f64::max),
            seam_magnitude: seam_magnitude(p),
            l2_identity_residual: l2_res[i],
            weighted_identity_residual: w_res[i],
        })
        .collect())
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.t,
            r.l2,
            r.energy,
            r.weighted_l2,
            r.max_abs,
            r.seam_magnitude,
            r.l2_identity_residual,
            r.weighted_identity_residual
        ));
    }
    out
}

/// Sample an initial condition on the grid.
pub fn initial_field(ic: &InitialCondition, dom: DomainSpec) -> Result<Field> {
    match ic {
        InitialCondition::GaussianPulse {
            amplitude,
            center,
            width,
            modes,
            l2_norm: target,
        } => {
            let (my, mz) = (dom.mu_y(modes[0]), dom.mu_z(modes[1]));
            let f = Field::from_fn(dom, |x, y, z| {
                amplitude * (-((x - center) / width).powi(2)).exp() * (my * y).sin() * (mz * z).sin()
            })?;
            match target {
                Some(t) => {
                    let n = l2_norm(&f)?;
                    if n == 0.0 {
                        return Ok(f);
                    }
                    Field::from_physical(dom, f.values().iter().map(|v| v * t / n).collect())
                }
                None => Ok(f),
            }
        }
        InitialCondition::SingleMode { amplitude, k, modes } => {
            let xi = std::f64::consts::PI * *k as f64 / dom.x_half;
            let (my, mz) = (dom.mu_y(modes[0]), dom.mu_z(modes[1]));
            Field::from_fn(dom, |x, y, z| amplitude * (xi * x).cos() * (my * y).sin() * (mz * z).sin())
        }
        InitialCondition::File { path } => Field::read_snapshot(path, dom.dealias),
    }
}

/// Random band-limited field number `index` of the stream keyed by `seed`.
pub fn random_band_limited(grid: &SpectralGrid, seed: u64, index: u64, band_x: usize, band_t: usize) -> Result<Field> {
    let dom = *grid.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut c = vec![Complex64::new(0.0, 0.0); dom.len()];
    for i in 0..dom.nx {
        if dom.signed_k(i).unsigned_abs() as usize > band_x || i == dom.nx / 2 {
            continue;
        }
        let xi = dom.xi(i);
        for p in 0..band_t.min(dom.ny) {
            for q in 0..band_t.min(dom.nz) {
                let scale = 1.0 / (1.0 + xi * xi + dom.lambda_slot(p, q));
                let re: f64 = rng.random_range(-1.0..1.0);
                let im: f64 = rng.random_range(-1.0..1.0);
                c[dom.index(i, p, q)] = Complex64::new(re, im) * scale;
            }
        }
    }
    Field::from_physical(dom, grid.inverse(&c))
}

/// Results of one experiment, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub preset: Preset,
    /// Ordered `key=value` report lines.
    pub entries: Vec<(String, String)>,
    /// Rows for the top-level `metrics.csv`.
    pub metrics: Vec<MetricRow>,
    /// Per sweep point metrics, written under `points/`.
    pub point_metrics: Vec<(String, Vec<MetricRow>)>,
    /// Snapshot name and field.
    pub snapshots: Vec<(String, Field)>,
}

impl Outcome {
    fn new(preset: Preset) -> Self {
        Self {
            preset,
            entries: Vec::new(),
            metrics: Vec::new(),
            point_metrics: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        self.get(key)?.parse().ok()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:e}"))
}

/// Run the configured preset in memory, on `jobs` worker threads if given.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Outcome> {
    cfg.validate()?;
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| ZkError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| dispatch(cfg))
        }
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = SpectralGrid::new(cfg.domain_spec())?;
    match cfg.preset {
        Preset::LinearDispersion | Preset::Conservation | Preset::Custom => single_run(cfg, &grid),
        Preset::HSweep => h_sweep(cfg, &grid),
        Preset::DecaySweep => decay_sweep(cfg, &grid),
        Preset::Perturbation => perturbation(cfg, &grid),
        Preset::InterpolationAudit => interpolation_audit(cfg, &grid),
    }
}

fn snapshot_name(t: f64, dt: f64) -> String {
    format!("t{:08}.zkf", (t / dt).round() as u64)
}

fn single_run(cfg: &ExperimentConfig, grid: &SpectralGrid) -> Result<Outcome> {
    let solver = cfg.solver_config();
    let u0 = initial_field(&cfg.initial_condition, *grid.domain())?;
    let every = cfg.output.snapshot_every;
    let mut snapshots = Vec::new();
    let mut index = 0usize;
    let state = run_observed(grid, &u0, &solver, &NoForcing, &mut |t, f| {
        if index == 0 || (every > 0 && index % every == 0) {
            snapshots.push((snapshot_name(t, solver.dt), f.clone()));
        }
        index += 1;
        Ok(())
    })?;
    let last = snapshot_name(state.t, solver.dt);
    if snapshots.last().map(|s| &s.0) != Some(&last) {
        snapshots.push((last, state.u.clone()));
    }

    let mut out = Outcome::new(cfg.preset);
    let rows = metric_rows(&state, &cfg.weight)?;
    let l2_0 = rows[0].l2;
    let l2_drift = rows
        .iter()
        .map(|r| if l2_0 == 0.0 { (r.l2 - l2_0).abs() } else { (r.l2 - l2_0).abs() / l2_0 })
        .fold(0.0, f64::max);
    out.push(
        "check",
        match cfg.preset {
            Preset::LinearDispersion => "linear-isometry",
            Preset::Conservation => "conservation-laws",
            _ => "trajectory",
        },
    );
    out.push("steps", state.step_count);
    out.push("t_final", format!("{:e}", state.t));
    out.push("l2_initial", format!("{l2_0:e}"));
    out.push("l2_final", format!("{:e}", rows.last().unwrap().l2));
    out.push("l2_drift", format!("{l2_drift:e}"));
    if state.samples.len() >= 2 {
        let c = conservation_report(&state)?;
        out.push("mass_drift", format!("{:e}", c.mass_drift));
        out.push("energy_initial", format!("{:e}", c.initial_energy));
        out.push("energy_drift", format!("{:e}", c.energy_drift));
        let kind = if solver.flux == FluxMode::Off {
            IdentityKind::LinearL2
        } else {
            IdentityKind::RegularizedL2
        };
        out.push("l2_identity", kind.tag());
        out.push("l2_identity_residual", format!("{:e}", rows.last().unwrap().l2_identity_residual));
        out.push("weighted_identity", IdentityKind::Weighted(cfg.weight).tag());
        out.push(
            "weighted_identity_residual",
            format!("{:e}", rows.last().unwrap().weighted_identity_residual),
        );
    }
    out.push("max_abs", format!("{:e}", rows.iter().map(|r| r.max_abs).fold(0.0, f64::max)));
    out.push("seam_warning", state.seam_warning);
    out.push("truncation_active", state.truncation_active);
    if let Some(g) = state.picard_gap {
        out.push("picard_gap", format!("{g:e}"));
    }
    out.metrics = rows;
    out.snapshots = snapshots;
    Ok(out)
}

fn h_sweep(cfg: &ExperimentConfig, grid: &SpectralGrid) -> Result<Outcome> {
    let u0 = initial_field(&cfg.initial_condition, *grid.domain())?;
    let hs = &cfg.experiment.h_values;
    let runs = hs
        .par_iter()
        .map(|&h| -> Result<(SimulationState, Vec<f64>)> {
            let solver = SolverConfig {
                h,
                flux: FluxMode::Truncated,
                params: crate::linear::LinearParams {
                    b: cfg.solver.b,
                    delta: h,
                },
                ..cfg.solver_config()
            };
            let state = run_observed(grid, &u0, &solver, &NoForcing, &mut |_, _| Ok(()))?;
            let res = identity_residual_series(&state, IdentityKind::RegularizedL2)?;
            Ok((state, res))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outcome::new(cfg.preset);
    out.push("check", "vanishing-regularization");
    out.push("identity", IdentityKind::RegularizedL2.tag());
    let mut worst = 0.0f64;
    for (h, (state, res)) in hs.iter().zip(&runs) {
        let r = *res.last().unwrap();
        worst = worst.max(r);
        out.push(format!("residual[h={h}]"), format!("{r:e}"));
        out.push(format!("truncation_active[h={h}]"), state.truncation_active);
        out.point_metrics.push((format!("h={h}"), metric_rows(state, &cfg.weight)?));
    }
    out.push("max_residual", format!("{worst:e}"));
    let mut distances = Vec::new();
    for (i, w) in runs.windows(2).enumerate() {
        let d = l2_distance(&w[0].0.u, &w[1].0.u)?;
        out.push(format!("distance[h={},h={}]", hs[i], hs[i + 1]), format!("{d:e}"));
        distances.push(d);
    }
    out.push("cauchy", distances.windows(2).all(|w| w[1] < w[0]));
    out.metrics = out.point_metrics.last().map(|p| p.1.clone()).unwrap_or_default();
    Ok(out)
}

fn l2_distance(a: &Field, b: &Field) -> Result<f64> {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    l2_norm(&Field::from_physical(*a.domain(), diff)?)
}

fn decay_sweep(cfg: &ExperimentConfig, grid: &SpectralGrid) -> Result<Outcome> {
    let solver = cfg.solver_config();
    let u0 = initial_field(&cfg.initial_condition, *grid.domain())?;
    let mut out = Outcome::new(cfg.preset);
    out.push("check", "weighted-decay");
    out.push("initial_l2", format!("{:e}", l2_norm(&u0)?));
    let state = match run_observed(grid, &u0, &solver, &NoForcing, &mut |_, _| Ok(())) {
        Ok(s) => s,
        Err(ZkError::Guard(reason)) => {
            out.push("status", "invalid-experiment");
            out.push("reason", reason);
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let window = cfg.window();
    out.push("window_right", window);
    for &alpha in &cfg.experiment.alphas {
        let r = decay_from_run(&state, alpha, window)?;
        let label = format!("alpha={alpha}");
        let status = match &r.status {
            crate::diagnostics::DecayStatus::Valid => "valid".to_string(),
            crate::diagnostics::DecayStatus::Trivial => "trivial".to_string(),
            crate::diagnostics::DecayStatus::Invalid(m) => format!("invalid-experiment ({m})"),
        };
        out.push(format!("status[{label}]"), status);
        out.push(format!("predicted_linear_rate[{label}]"), format!("{:e}", r.prediction.predicted_linear_rate));
        out.push(format!("fitted_rate[{label}]"), opt(r.fitted_rate));
        out.push(format!("fitted_norm_rate[{label}]"), opt(r.fitted_norm_rate));
        out.push(format!("nonincreasing[{label}]"), r.nonincreasing);
        out.push(format!("outside_window_max[{label}]"), format!("{:e}", r.outside_window_max));
        let w = WeightSpec::exp2alpha(alpha)?;
        out.point_metrics.push((label, metric_rows(&state, &w)?));
    }
    out.metrics = metric_rows(&state, &cfg.weight)?;
    Ok(out)
}

fn perturbation(cfg: &ExperimentConfig, grid: &SpectralGrid) -> Result<Outcome> {
    let solver = cfg.solver_config();
    let dom = *grid.domain();
    let u0 = initial_field(&cfg.initial_condition, dom)?;
    let direction = cfg.experiment.perturbation.clone().unwrap_or(InitialCondition::GaussianPulse {
        amplitude: 1.0,
        center: 1.0,
        width: 3.0,
        modes: [1, 2],
        l2_norm: None,
    });
    let p = initial_field(&direction, dom)?;
    let (reports, state) = dependence_ladder(grid, &u0, &p, &cfg.experiment.eps_values, &solver, &cfg.weight, &NoForcing)?;
    let mut out = Outcome::new(cfg.preset);
    out.push("check", "continuous-dependence");
    let mut ratios = Vec::new();
    for r in &reports {
        out.push(format!("ratio[eps={}]", r.eps), opt(r.ratio));
        out.push(format!("sup_distance[eps={}]", r.eps), format!("{:e}", r.sup_distance));
        ratios.extend(r.ratio);
    }
    if ratios.is_empty() {
        out.push("exact_match", true);
    } else {
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        out.push("ratio_max", format!("{hi:e}"));
        out.push("ratio_spread", format!("{:e}", (hi - lo) / lo));
    }
    out.metrics = metric_rows(&state, &cfg.weight)?;
    Ok(out)
}

/// Running maxima of the interpolation ratio over `samples` and `2 * samples`
/// random fields, for each `(k, m, q)` and weight pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditLine {
    pub k: usize,
    pub m: usize,
    pub q: f64,
    pub weights: &'static str,
    pub max_first: f64,
    pub max_all: f64,
}

impl AuditLine {
    /// Relative growth of the maximum when the sample is doubled.
    pub fn change(&self) -> f64 {
        (self.max_all - self.max_first) / self.max_first
    }
}

pub fn run_interpolation_audit(
    grid: &SpectralGrid,
    seed: u64,
    samples: usize,
    band_x: usize,
    band_t: usize,
) -> Result<Vec<AuditLine>> {
    let rho = WeightSpec::rho(0.75)?;
    let rho_prime = Derivative(rho);
    let one = WeightSpec::one();
    let pairs: [(&'static str, &dyn WeightFn, &dyn WeightFn); 2] =
        [("one,one", &one, &one), ("rho'_0.75,rho_0.75", &rho_prime, &rho)];
    let ratios: Vec<Vec<f64>> = (0..2 * samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let phi = grid.sync(&random_band_limited(grid, seed, i, band_x, band_t)?)?;
            let mut row = Vec::with_capacity(pairs.len() * AUDIT_COMBOS.len());
            for (_, w1, w2) in &pairs {
                for &(k, m, q) in &AUDIT_COMBOS {
                    let r = interpolation_ratio(grid, &phi, k, m, q, *w1, *w2)?;
                    row.push(r.value().unwrap_or(0.0));
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lines = Vec::new();
    for (pi, (name, _, _)) in pairs.iter().enumerate() {
        for (ci, &(k, m, q)) in AUDIT_COMBOS.iter().enumerate() {
            let col = pi * AUDIT_COMBOS.len() + ci;
            let max = |n: usize| ratios[..n].iter().map(|r| r[col]).fold(0.0, f64::max);
            lines.push(AuditLine {
                k,
                m,
                q,
                weights: name,
                max_first: max(samples),
                max_all: max(2 * samples),
            });
        }
    }
    Ok(lines)
}

fn interpolation_audit(cfg: &ExperimentConfig, grid: &SpectralGrid) -> Result<Outcome> {
    let e = &cfg.experiment;
    let lines = run_interpolation_audit(grid, cfg.seed, e.samples, e.band_x, e.band_transverse)?;
    let mut out = Outcome::new(cfg.preset);
    out.push("check", "interpolation-inequality");
    out.push("samples", e.samples);
    let mut worst = 0.0f64;
    for l in &lines {
        let label = format!("k={},m={},q={},w={}", l.k, l.m, l.q, l.weights);
        out.push(format!("max_ratio[{label}]"), format!("{:e}", l.max_first));
        out.push(format!("max_ratio_doubled[{label}]"), format!("{:e}", l.max_all));
        worst = worst.max(l.change());
    }
    out.push("max_change", format!("{worst:e}"));
    Ok(out)
}

/// Output directory: explicit flag, then the config, then
/// `$ZK_OUTPUT_ROOT/<preset>-<hash>` (default root `runs`).
pub fn resolve_output_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(format!("{}-{}", cfg.preset.name(), &cfg.hash()[..12]))
}

fn partial_path(dir: &Path) -> PathBuf {
    let mut s = dir.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

fn write_report(path: &Path, cfg: &ExperimentConfig, status: &str, entries: &[(String, String)]) -> Result<()> {
    let mut text = format!(
        "preset={}\nconfig_hash={}\nseed={}\nstatus={status}\n",
        cfg.preset.name(),
        cfg.hash(),
        cfg.seed
    );
    for (k, v) in entries {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

fn failure_entries(e: &ZkError) -> Vec<(String, String)> {
    let kind = match e {
        ZkError::Domain(_) => "domain",
        ZkError::Data(_) => "data",
        ZkError::Usage(_) => "usage",
        ZkError::Instability { .. } => "instability",
        ZkError::Convergence(_) => "convergence",
        ZkError::Guard(_) => "guard",
        ZkError::Config(_) => "config",
        ZkError::Io(_) => "io",
    };
    let mut v = vec![("failure".to_string(), kind.to_string())];
    if let ZkError::Instability { step, .. } = e {
        v.push(("failure_step".into(), step.to_string()));
    }
    v.push(("message".into(), e.to_string().replace('\n', " ")));
    v
}

/// Run the experiment and persist its outputs under `dir`. Files are written
/// to `<dir>.partial` and renamed once complete; a failed run is finalized
/// with `status=failed` and a `failure.txt` record before the error is returned.
pub fn execute(cfg: &ExperimentConfig, dir: &Path, jobs: Option<usize>) -> Result<PathBuf> {
    if dir.exists() {
        return Err(ZkError::Usage(format!("output directory {} already exists", dir.display())));
    }
    let partial = partial_path(dir);
    if partial.exists() {
        fs::remove_dir_all(&partial)?;
    }
    fs::create_dir_all(&partial)?;
    fs::write(partial.join("config.toml"), cfg.canonical())?;

    let result = run_experiment(cfg, jobs).and_then(|out| {
        fs::write(partial.join("metrics.csv"), metrics_csv(&out.metrics))?;
        if !out.point_metrics.is_empty() {
            fs::create_dir_all(partial.join("points"))?;
            for (label, rows) in &out.point_metrics {
                fs::write(partial.join("points").join(format!("{label}.csv")), metrics_csv(rows))?;
            }
        }
        if !out.snapshots.is_empty() {
            fs::create_dir_all(partial.join("snapshots"))?;
            for (name, f) in &out.snapshots {
                f.write_snapshot(&partial.join("snapshots").join(name))?;
            }
        }
        write_report(&partial.join("report.txt"), cfg, "ok", &out.entries)
    });
    if let Err(e) = &result {
        let entries = failure_entries(e);
        write_report(&partial.join("report.txt"), cfg, "failed", &entries)?;
        let record: String = entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        fs::write(partial.join("failure.txt"), record)?;
    }
    fs::rename(&partial, dir)?;
    result.map(|_| dir.to_path_buf())
}

/// `report.txt` of a finished run as key/value pairs.
pub fn read_report(dir: &Path) -> Result<Vec<(String, String)>> {
    let path = dir.join("report.txt");
    let text = fs::read_to_string(&path)
        .map_err(|e| ZkError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fields_are_reproducible_per_index() {
        let grid = SpectralGrid::new(DomainSpec::new(3.0, 2.0, 8.0, 32, 8, 8).unwrap()).unwrap();
        let a = random_band_limited(&grid, 7, 3, 4, 3).unwrap();
        let b = random_band_limited(&grid, 7, 3, 4, 3).unwrap();
        let c = random_band_limited(&grid, 7, 4, 4, 3).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn csv_has_fixed_header() {
        let csv = metrics_csv(&[]);
        assert_eq!(csv.trim_end(), METRICS_HEADER);
    }

    #[test]
    fn small_custom_run_reports() {
        let cfg = ExperimentConfig::parse(
            "[domain]\nnx = 96\nny = 4\nnz = 4\nx_half = 8.0\n[solver]\nt_final = 0.01\n[initial_condition]\nkind = \"gaussian-pulse\"\nwidth = 1.5\n",
        )
        .unwrap();
        let out = run_experiment(&cfg, Some(2)).unwrap();
        assert_eq!(out.number("steps"), Some(10.0));
        assert_eq!(out.metrics.len(), 11);
        assert_eq!(out.snapshots.len(), 2);
    }
}
