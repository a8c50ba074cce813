//! Experiment configuration: a TOML document layered over preset defaults.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::DomainSpec;
use crate::error::{Result, ZkError};
use crate::linear::LinearParams;
use crate::solver::{FluxMode, SolverConfig};
use crate::weights::{WeightKind, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    LinearDispersion,
    Conservation,
    HSweep,
    DecaySweep,
    Perturbation,
    InterpolationAudit,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::LinearDispersion,
        Preset::Conservation,
        Preset::HSweep,
        Preset::DecaySweep,
        Preset::Perturbation,
        Preset::InterpolationAudit,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LinearDispersion => "linear-dispersion",
            Self::Conservation => "conservation",
            Self::HSweep => "h-sweep",
            Self::DecaySweep => "decay-sweep",
            Self::Perturbation => "perturbation",
            Self::InterpolationAudit => "interpolation-audit",
            Self::Custom => "custom",
        }
    }

    /// Settings the preset layers beneath the user document.
    fn defaults(self) -> &'static str {
        match self {
            Self::LinearDispersion => {
                r#"
                [domain]
                nx = 128
                ny = 32
                nz = 32
                [solver]
                flux = "off"
                snapshot_stride = 10
                [initial_condition]
                kind = "gaussian-pulse"
                width = 2.0
                "#
            }
            Self::Conservation => {
                r#"
                [domain]
                nx = 128
                ny = 32
                nz = 32
                [solver]
                flux = "quadratic"
                snapshot_stride = 10
                [initial_condition]
                kind = "gaussian-pulse"
                width = 2.0
                "#
            }
            Self::HSweep => {
                r#"
                [solver]
                t_final = 0.5
                "#
            }
            Self::DecaySweep => {
                r#"
                [domain]
                x_half = 64.0
                nx = 256
                ny = 8
                nz = 8
                [solver]
                flux = "off"
                dt = 0.01
                t_final = 5.0
                snapshot_stride = 10
                [initial_condition]
                kind = "gaussian-pulse"
                width = 6.0
                [experiment]
                window = 32.0
                "#
            }
            Self::Perturbation => {
                r#"
                [solver]
                snapshot_stride = 20
                [weight]
                kind = "kappa-alpha-beta"
                alpha = 1.0
                beta = 1.0
                [initial_condition]
                kind = "gaussian-pulse"
                amplitude = 0.5
                "#
            }
            Self::InterpolationAudit => {
                r#"
                [domain]
                x_half = 8.0
                "#
            }
            Self::Custom => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_l")]
    pub l1: f64,
    #[serde(default = "default_l")]
    pub l2: f64,
    #[serde(default = "default_x_half")]
    pub x_half: f64,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_nt")]
    pub ny: usize,
    #[serde(default = "default_nt")]
    pub nz: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            l1: PI,
            l2: PI,
            x_half: default_x_half(),
            nx: default_nx(),
            ny: default_nt(),
            nz: default_nt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub b: f64,
    /// Truncation level; 0 runs the un-truncated flux.
    #[serde(default)]
    pub h: f64,
    /// Parabolic coefficient; defaults to `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Defaults to `truncated` when `h > 0`, else `quadratic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<FluxMode>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final", alias = "T")]
    pub t_final: f64,
    #[serde(default = "default_one")]
    pub snapshot_stride: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default)]
    pub picard_check: bool,
    #[serde(default = "default_true")]
    pub enforce_seam_guard: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            b: 0.0,
            h: 0.0,
            delta: None,
            flux: None,
            dt: default_dt(),
            t_final: default_t_final(),
            snapshot_stride: 1,
            dealias: true,
            picard_check: false,
            enforce_seam_guard: true,
        }
    }
}

impl SolverSection {
    pub fn to_solver(&self) -> SolverConfig {
        SolverConfig {
            params: LinearParams {
                b: self.b,
                delta: self.delta.unwrap_or(self.h),
            },
            h: self.h,
            flux: self.flux.unwrap_or(if self.h > 0.0 { FluxMode::Truncated } else { FluxMode::Quadratic }),
            dt: self.dt,
            t_final: self.t_final,
            snapshot_stride: self.snapshot_stride,
            picard_check: self.picard_check,
            enforce_seam_guard: self.enforce_seam_guard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `A exp(-((x-c)/w)^2) φ_{l1}(y) φ_{l2}(z)`, with unit-peak sines.
    GaussianPulse {
        #[serde(default = "default_one_f")]
        amplitude: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_modes")]
        modes: [usize; 2],
        /// Rescale to this L2 norm instead of using `amplitude`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l2_norm: Option<f64>,
    },
    /// `A cos(π k x / X) sin(π l1 y / L1) sin(π l2 z / L2)`.
    SingleMode {
        #[serde(default = "default_one_f")]
        amplitude: f64,
        #[serde(default = "default_one")]
        k: usize,
        #[serde(default = "default_modes")]
        modes: [usize; 2],
    },
    /// A `ZKF1` snapshot whose header matches the domain.
    File { path: PathBuf },
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self::GaussianPulse {
            amplitude: 1.0,
            center: 0.0,
            width: default_width(),
            modes: default_modes(),
            l2_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_h_values")]
    pub h_values: Vec<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Right edge of the decay window; defaults to `x_half / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default = "default_eps_values")]
    pub eps_values: Vec<f64>,
    /// Direction of the perturbation; defaults to a shifted pulse in mode (1, 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<InitialCondition>,
    /// Random fields per audit batch (the audit also evaluates twice as many).
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Largest |k| of random audit fields.
    #[serde(default = "default_band_x")]
    pub band_x: usize,
    /// Largest transverse index of random audit fields.
    #[serde(default = "default_band_t")]
    pub band_transverse: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            h_values: default_h_values(),
            alphas: default_alphas(),
            window: None,
            eps_values: default_eps_values(),
            perturbation: None,
            samples: default_samples(),
            band_x: default_band_x(),
            band_transverse: default_band_t(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write a snapshot every this many recorded samples; 0 keeps only the
    /// initial and final states.
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub initial_condition: InitialCondition,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_l() -> f64 {
    PI
}
fn default_x_half() -> f64 {
    16.0
}
fn default_nx() -> usize {
    64
}
fn default_nt() -> usize {
    16
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    1.0
}
fn default_one() -> usize {
    1
}
fn default_one_f() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_width() -> f64 {
    3.0
}
fn default_modes() -> [usize; 2] {
    [1, 1]
}
fn default_h_values() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_alphas() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn default_eps_values() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_samples() -> usize {
    200
}
fn default_band_x() -> usize {
    8
}
fn default_band_t() -> usize {
    4
}
fn default_preset() -> Preset {
    Preset::Custom
}
fn default_weight() -> WeightSpec {
    WeightSpec {
        kind: WeightKind::Exp2Alpha,
        alpha: 0.1,
        beta: 1.0,
    }
}

/// Overlay `top` onto `base`; sub-tables merge unless their `kind` differs.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t))
                if b.get("kind").is_none() || t.get("kind").is_none() || b.get("kind") == t.get("kind") =>
            {
                merge(b, t)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| ZkError::Usage(format!("bad override key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ZkError::Usage(format!("override {key:?}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parse a `key=value` override; the value is read as TOML, falling back to a string.
pub fn parse_override(spec: &str) -> Result<(String, toml::Value)> {
    let (k, v) = spec
        .split_once('=')
        .ok_or_else(|| ZkError::Usage(format!("override {spec:?} is not of the form key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn config_error(e: toml::de::Error) -> ZkError {
    ZkError::Config(e.to_string().trim_end().to_string())
}

impl ExperimentConfig {
    /// Parse, apply preset defaults and validate.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut user: toml::Table = toml::from_str(text).map_err(config_error)?;
        let text = if overrides.is_empty() {
            text.to_string()
        } else {
            for (k, v) in overrides {
                set_dotted(&mut user, k, v.clone())?;
            }
            toml::to_string(&user).map_err(|e| ZkError::Config(e.to_string()))?
        };
        let preset: Preset = match user.get("preset") {
            Some(v) => v.clone().try_into().map_err(config_error)?,
            None => default_preset(),
        };
        let mut merged: toml::Table = toml::from_str(preset.defaults()).map_err(config_error)?;
        // a partial sub-table without `kind` refines the preset's variant
        let mut text = text;
        let mut inherited = false;
        for (k, v) in user.iter_mut() {
            if let (toml::Value::Table(t), Some(toml::Value::Table(d))) = (v, merged.get(k)) {
                if let (None, Some(kind)) = (t.get("kind"), d.get("kind")) {
                    t.insert("kind".into(), kind.clone());
                    inherited = true;
                }
            }
        }
        if inherited {
            text = toml::to_string(&user).map_err(|e| ZkError::Config(e.to_string()))?;
        }
        // typed pass on the user document alone: unknown keys and type errors with line info
        let _: ExperimentConfig = toml::from_str(&text).map_err(config_error)?;
        merge(&mut merged, user);
        let cfg: ExperimentConfig = toml::Value::Table(merged).try_into().map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults of a preset, validated.
    pub fn preset(p: Preset) -> Result<Self> {
        Self::parse(&format!("preset = \"{}\"", p.name()))
    }

    pub fn domain_spec(&self) -> DomainSpec {
        let d = &self.domain;
        DomainSpec {
            l1: d.l1,
            l2: d.l2,
            x_half: d.x_half,
            nx: d.nx,
            ny: d.ny,
            nz: d.nz,
            dealias: self.solver.dealias,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.to_solver()
    }

    pub fn window(&self) -> f64 {
        self.experiment.window.unwrap_or(0.5 * self.domain.x_half)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &'static str| move |e: ZkError| ZkError::Config(format!("{name}: {}", strip(&e)));
        self.domain_spec().validate().map_err(field("domain"))?;
        let s = &self.solver;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(ZkError::Config(format!("solver.dt: dt must be positive, got {}", s.dt)));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(ZkError::Config(format!("solver.t_final: T must be positive, got {}", s.t_final)));
        }
        if let Some(d) = s.delta {
            if !(0.0..=1.0).contains(&d) {
                return Err(ZkError::Config(format!("solver.delta: delta must lie in [0, 1], got {d}")));
            }
        }
        self.solver_config().validate().map_err(field("solver"))?;
        self.weight.validate().map_err(field("weight"))?;
        let check_ic = |ic: &InitialCondition, name: &'static str| -> Result<()> {
            match ic {
                InitialCondition::GaussianPulse { amplitude, width, modes, l2_norm, center } => {
                    if !(width.is_finite() && *width > 0.0) {
                        return Err(ZkError::Config(format!("{name}.width: width must be positive, got {width}")));
                    }
                    if !amplitude.is_finite() || !center.is_finite() {
                        return Err(ZkError::Config(format!("{name}: amplitude and center must be finite")));
                    }
                    if let Some(n) = l2_norm {
                        if !(n.is_finite() && *n >= 0.0) {
                            return Err(ZkError::Config(format!("{name}.l2_norm: must be non-negative, got {n}")));
                        }
                    }
                    check_modes(modes, name)
                }
                InitialCondition::SingleMode { amplitude, modes, k } => {
                    if !amplitude.is_finite() {
                        return Err(ZkError::Config(format!("{name}.amplitude: must be finite")));
                    }
                    if *k >= self.domain.nx / 2 {
                        return Err(ZkError::Config(format!("{name}.k: k must be below nx/2, got {k}")));
                    }
                    check_modes(modes, name)
                }
                InitialCondition::File { path } => {
                    let bytes = std::fs::read(path).map_err(|e| {
                        ZkError::Config(format!("{name}.path: cannot read {}: {e}", path.display()))
                    })?;
                    let header = crate::field::read_snapshot_header(&bytes).map_err(field("initial_condition.path"))?;
                    let d = self.domain_spec();
                    if (header.nx, header.ny, header.nz) != (d.nx, d.ny, d.nz)
                        || header.l1 != d.l1
                        || header.l2 != d.l2
                        || header.x_half != d.x_half
                    {
                        return Err(ZkError::Config(format!(
                            "{name}.path: snapshot header does not match the configured domain"
                        )));
                    }
                    Ok(())
                }
            }
        };
        check_ic(&self.initial_condition, "initial_condition")?;
        let e = &self.experiment;
        if let Some(p) = &e.perturbation {
            check_ic(p, "experiment.perturbation")?;
        }
        if e.h_values.is_empty() || e.h_values.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
            return Err(ZkError::Config("experiment.h_values: each h must lie in (0, 1]".into()));
        }
        if e.alphas.is_empty() || e.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(ZkError::Config("experiment.alphas: each alpha must be positive".into()));
        }
        if e.eps_values.is_empty() || e.eps_values.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(ZkError::Config("experiment.eps_values: each eps must be positive".into()));
        }
        let w = self.window();
        if !(w > -self.domain.x_half && w < self.domain.x_half) {
            return Err(ZkError::Config(format!(
                "experiment.window: must lie inside (-x_half, x_half), got {w}"
            )));
        }
        if e.samples == 0 {
            return Err(ZkError::Config("experiment.samples: must be at least 1".into()));
        }
        if e.band_x == 0 || e.band_x >= self.domain.nx / 2 {
            return Err(ZkError::Config("experiment.band_x: must lie in [1, nx/2)".into()));
        }
        if e.band_transverse == 0 || e.band_transverse > self.domain.ny.min(self.domain.nz) {
            return Err(ZkError::Config("experiment.band_transverse: must lie in [1, min(ny, nz)]".into()));
        }
        Ok(())
    }

    /// Canonical TOML serialization of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_modes(modes: &[usize; 2], name: &str) -> Result<()> {
    if modes[0] == 0 || modes[1] == 0 {
        return Err(ZkError::Config(format!("{name}.modes: transverse indices start at 1")));
    }
    Ok(())
}

fn strip(e: &ZkError) -> String {
    match e {
        ZkError::Domain(m) | ZkError::Data(m) | ZkError::Usage(m) | ZkError::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.preset, Preset::Custom);
        assert_eq!(c.solver.dt, 1e-3);
        assert_eq!(c.solver.t_final, 1.0);
        assert!(c.solver.dealias);
        assert_eq!(c.solver_config().flux, FluxMode::Quadratic);
    }

    #[test]
    fn negative_dt_is_rejected() {
        let e = ExperimentConfig::parse("[solver]\ndt = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("dt must be positive"), "{e}");
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let e = ExperimentConfig::parse("seed = 1\n[solver]\nfoo = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("foo"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        let e = ExperimentConfig::parse("[initial_condition]\nkind = \"single-mode\"\nwidth = 2.0\n").unwrap_err();
        assert!(e.to_string().contains("width"), "{e}");
    }

    #[test]
    fn syntax_error_has_line() {
        let e = ExperimentConfig::parse("seed = 1\n[solver\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn presets_validate_and_layer() {
        for p in Preset::ALL {
            let c = ExperimentConfig::preset(p).unwrap();
            assert_eq!(c.preset, p);
        }
        let c = ExperimentConfig::parse("preset = \"conservation\"\n[domain]\nnx = 64\n").unwrap();
        assert_eq!((c.domain.nx, c.domain.ny), (64, 32));
        let c = ExperimentConfig::parse(
            "preset = \"linear-dispersion\"\n[initial_condition]\nkind = \"single-mode\"\nk = 2\n",
        )
        .unwrap();
        assert!(matches!(c.initial_condition, InitialCondition::SingleMode { k: 2, .. }));
    }

    #[test]
    fn overrides_apply() {
        let o = vec![parse_override("solver.dt=0.002").unwrap(), parse_override("preset=h-sweep").unwrap()];
        let c = ExperimentConfig::parse_with_overrides("", &o).unwrap();
        assert_eq!(c.solver.dt, 0.002);
        assert_eq!(c.preset, Preset::HSweep);
        assert_eq!(c.solver.t_final, 0.5);
        assert!(parse_override("nonsense").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::parse("seed = 1").unwrap();
        let b = ExperimentConfig::parse("seed = 1").unwrap();
        let c = ExperimentConfig::parse("seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(ExperimentConfig::parse(&a.canonical()).unwrap(), a);
    }

    #[test]
    fn partial_section_keeps_preset_variant() {
        let cfg = ExperimentConfig::parse("preset = \"decay-sweep\"\n[initial_condition]\ncenter = 4.0\n").unwrap();
        match cfg.initial_condition {
            InitialCondition::GaussianPulse { center, width, .. } => assert_eq!((center, width), (4.0, 6.0)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
