//! JSON run configuration, `--set` overrides and validation.

use cns_core::picard::{PicardConfig, Potential};
use cns_core::verify::mms::{MmsSolver, Refinement};
use cns_core::{CnsError, Result, SlabGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    VerifyTransform,
    Mms,
    EnergyReport,
    GenData,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::VerifyTransform => "verify-transform",
            Mode::Mms => "mms",
            Mode::EnergyReport => "energy-report",
            Mode::GenData => "gen-data",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    #[serde(rename = "Nz")]
    pub nz: usize,
    #[serde(rename = "L1", default = "two_pi")]
    pub l1: f64,
    #[serde(rename = "L2", default = "two_pi")]
    pub l2: f64,
    #[serde(default = "one")]
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "one")]
    pub t_final: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: default_dt(), t_final: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum PotentialConfig {
    Zero,
    /// Φ = g·x₃.
    Vertical { g: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "one")]
    pub c_hat: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "zero_potential")]
    pub potential: PotentialConfig,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig { c_hat: 1.0, gamma: 1.0, sigma: 1.0, potential: PotentialConfig::Zero }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSettings {
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_diff_tol")]
    pub diff_tol: f64,
    #[serde(default = "default_eps0")]
    pub smallness_threshold: f64,
    #[serde(default = "default_compat_tol")]
    pub compat_tol: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            max_sweeps: default_sweeps(),
            diff_tol: default_diff_tol(),
            smallness_threshold: default_eps0(),
            compat_tol: default_compat_tol(),
        }
    }
}

/// Initial data: generated from `seed`/`amplitude`, or read from `dir`
/// (files written by `gen-data`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { seed: default_seed(), amplitude: default_amplitude(), dir: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write fields every k levels; 0 writes the final level only.
    #[serde(default)]
    pub fields_every: usize,
    #[serde(default = "yes")]
    pub energy_csv: bool,
    #[serde(default = "yes")]
    pub convergence_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, fields_every: 0, energy_csv: true, convergence_csv: true }
    }
}

/// `None` runs every solver (or both refinements).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsConfig {
    #[serde(default)]
    pub solver: Option<MmsSolver>,
    #[serde(default)]
    pub refinement: Option<Refinement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Surface amplitude of the smooth manufactured case.
    #[serde(default = "default_verify_eps")]
    pub amplitude: f64,
    #[serde(default = "default_verify_t")]
    pub t: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { amplitude: default_verify_eps(), t: default_verify_t() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub picard: PicardSettings,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub mms: MmsConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn two_pi() -> f64 {
    2.0 * PI
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    1e-3
}
fn default_sweeps() -> usize {
    30
}
fn default_diff_tol() -> f64 {
    1e-8
}
fn default_eps0() -> f64 {
    cns_core::picard::DEFAULT_SMALLNESS
}
fn default_compat_tol() -> f64 {
    1e-6
}
fn default_seed() -> u64 {
    7
}
fn default_amplitude() -> f64 {
    1e-2
}
fn default_verify_eps() -> f64 {
    0.05
}
fn default_verify_t() -> f64 {
    0.3
}
fn zero_potential() -> PotentialConfig {
    PotentialConfig::Zero
}

/// Parses a JSON document, applies `key.path=value` overrides and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| CnsError::Config(format!("invalid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig =
        serde_path_to_error::deserialize(doc).map_err(|e| CnsError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `path`, or standard input for `-`.
pub fn read_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| CnsError::Config(format!("cannot read {}: {e}", path.display())))?
    };
    parse_config(&text, overrides)
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| CnsError::Config(format!("--set expects key=value, got {spec:?}")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CnsError::Config(format!("bad key {key:?}")));
    }
    let mut node = doc;
    for p in &parts[..parts.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| CnsError::Config(format!("`{key}`: `{p}` is not inside an object")))?;
        node = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| CnsError::Config(format!("`{key}` does not name an object member")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.space_grid()?;
        let positive = [
            ("time.dt", self.time.dt),
            ("time.T", self.time.t_final),
            ("physics.c_hat", self.physics.c_hat),
            ("physics.gamma", self.physics.gamma),
            ("physics.sigma", self.physics.sigma),
            ("picard.diff_tol", self.picard.diff_tol),
            ("picard.smallness_threshold", self.picard.smallness_threshold),
            ("picard.compat_tol", self.picard.compat_tol),
            ("verify.amplitude", self.verify.amplitude),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(CnsError::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.data.amplitude.is_finite() && self.data.amplitude >= 0.0) {
            return Err(CnsError::Config(format!("data.amplitude must be nonnegative, got {}", self.data.amplitude)));
        }
        if !self.verify.t.is_finite() {
            return Err(CnsError::Config("verify.t must be finite".into()));
        }
        if let PotentialConfig::Vertical { g } = self.physics.potential {
            if !g.is_finite() {
                return Err(CnsError::Config("physics.potential.g must be finite".into()));
            }
        }
        if self.picard.max_sweeps == 0 {
            return Err(CnsError::Config("picard.max_sweeps must be at least 1".into()));
        }
        self.steps()?;
        Ok(())
    }

    /// Number of time steps; T must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        let r = self.time.t_final / self.time.dt;
        let n = r.round();
        if n < 1.0 || (r - n).abs() > 1e-9 * n {
            return Err(CnsError::Config(format!("time.T = {} is not a whole number of steps dt = {}", self.time.t_final, self.time.dt)));
        }
        Ok(n as usize)
    }

    pub fn space_grid(&self) -> Result<SlabGrid> {
        let g = &self.grid;
        SlabGrid::new(g.n1, g.n2, g.nz, g.l1, g.l2, g.b).map_err(|e| match e {
            CnsError::Grid(m) => CnsError::Config(m),
            e => e,
        })
    }

    pub fn grid(&self) -> Result<SlabGrid> {
        self.space_grid()?.with_time(self.time.dt, self.steps()?)
    }

    pub fn potential(&self) -> Potential {
        match self.physics.potential {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Vertical { g } => Potential::Vertical(g),
        }
    }

    pub fn picard(&self, initial: cns_core::picard::InitialData) -> Result<PicardConfig> {
        let mut p = PicardConfig::new(self.grid()?, initial);
        p.c_hat = self.physics.c_hat;
        p.gamma = self.physics.gamma;
        p.sigma = self.physics.sigma;
        p.potential = self.potential();
        p.max_sweeps = self.picard.max_sweeps;
        p.diff_tol = self.picard.diff_tol;
        p.smallness_threshold = self.picard.smallness_threshold;
        p.compat_tol = self.picard.compat_tol;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"grid":{"N1":16,"N2":16,"Nz":17}}"#, &[]).unwrap();
        assert_eq!(c.grid.l1, 2.0 * PI);
        assert_eq!(c.grid.b, 1.0);
        assert_eq!((c.physics.gamma, c.physics.sigma, c.physics.c_hat), (1.0, 1.0, 1.0));
        assert_eq!((c.time.dt, c.time.t_final), (1e-3, 1.0));
        assert_eq!((c.picard.max_sweeps, c.picard.diff_tol), (30, 1e-8));
        assert_eq!(c.steps().unwrap(), 1000);
    }

    #[test]
    fn bad_n1_names_the_rule() {
        let e = parse_config(r#"{"grid":{"N1":0,"N2":16,"Nz":17}}"#, &[]).unwrap_err();
        assert!(e.to_string().contains("N1 must be ≥4 and even"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(r#"{"grid":{"N1":16,"N2":16,"Nz":17},"physics":{"gamma":1,"sigmaa":2}}"#, &[]).unwrap_err();
        let m = e.to_string();
        assert!(m.contains("sigmaa") && m.contains("physics"), "{m}");
    }

    #[test]
    fn type_mismatch_reports_path() {
        let e = parse_config(r#"{"grid":{"N1":16,"N2":"sixteen","Nz":17}}"#, &[]).unwrap_err();
        assert!(e.to_string().contains("grid.N2"), "{e}");
    }

    #[test]
    fn missing_grid_size_rejected() {
        let e = parse_config(r#"{"grid":{"N1":16,"N2":16}}"#, &[]).unwrap_err();
        assert!(e.to_string().contains("Nz"), "{e}");
    }

    #[test]
    fn overrides_apply_and_create_sections() {
        let c = parse_config(
            r#"{"grid":{"N1":16,"N2":16,"Nz":17}}"#,
            &["grid.N1=8".into(), "picard.max_sweeps=5".into(), "physics.potential={\"kind\":\"vertical\",\"g\":2.5}".into()],
        )
        .unwrap();
        assert_eq!(c.grid.n1, 8);
        assert_eq!(c.picard.max_sweeps, 5);
        assert_eq!(c.physics.potential, PotentialConfig::Vertical { g: 2.5 });
        assert!(parse_config(r#"{"grid":{"N1":16,"N2":16,"Nz":17}}"#, &["grid.N1".into()]).is_err());
    }

    #[test]
    fn fractional_step_count_rejected() {
        assert!(parse_config(r#"{"grid":{"N1":16,"N2":16,"Nz":17},"time":{"dt":0.3,"T":1}}"#, &[]).is_err());
    }

    #[test]
    fn round_trip() {
        let c = parse_config(r#"{"grid":{"N1":16,"N2":8,"Nz":9,"b":0.5},"mode":"mms","mms":{"solver":"stokes"}}"#, &[]).unwrap();
        let back = parse_config(&c.to_json(), &[]).unwrap();
        assert_eq!(c, back);
    }
}
