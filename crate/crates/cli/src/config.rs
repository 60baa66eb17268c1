//! Run configuration: a TOML (or JSON) tree, dotted-path overrides, and
//! validation with field-path diagnostics.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use skms::flat::{ChannelProbe, PositionProbe};
use skms::geometry::SpacetimeParams;
use skms::position::QuadratureSpec;
use skms::thermal::ThermalParams;

/// A configuration problem tied to the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: SpacetimeParams,
    /// When present, position-space commands evaluate the thermal state.
    pub thermal: Option<ThermalParams>,
    pub quadrature: QuadratureSpec,
    pub modes: ModesConfig,
    pub green: GreenConfig,
    pub twopoint: TwoPointConfig,
    pub kms: KmsConfig,
    pub decay: DecayConfig,
    pub integrability: IntegrabilityConfig,
    pub flat: FlatConfig,
    /// Not echoed in reports, so the output location never changes report bytes.
    #[serde(skip_serializing)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SpacetimeParams { big_m: 1.0, m: 1.0 },
            thermal: None,
            quadrature: QuadratureSpec { rel_tol: 1e-5, ..QuadratureSpec::default() },
            modes: ModesConfig::default(),
            green: GreenConfig::default(),
            twopoint: TwoPointConfig::default(),
            kms: KmsConfig::default(),
            decay: DecayConfig::default(),
            integrability: IntegrabilityConfig::default(),
            flat: FlatConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Evenly spaced frequencies, `count ≥ 2` points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    pub omegas: Vec<f64>,
    /// Appended to `omegas` when present.
    pub omega_range: Option<OmegaRange>,
    pub l_max: u32,
    pub tol: f64,
    /// Grid spacing in `r*`; `0.05·min(M, 1/m)` when absent.
    pub h: Option<f64>,
    /// Tortoise interval shared by both modes; derived from `M` when absent.
    pub overlap: Option<[f64; 2]>,
    pub r_seed: Option<f64>,
    pub rstar_seed: Option<f64>,
    pub seed_order: usize,
    /// Fit window in `r` for the infinity mode; defaults to `[r_seed/2, r_seed]`.
    pub phi_window: Option<[f64; 2]>,
    /// Fit window in `r*` for the horizon mode; defaults to `[rstar_seed, rstar_seed/2]`.
    pub psi_window: Option<[f64; 2]>,
    /// Every n-th grid point goes to the samples table.
    pub sample_stride: usize,
    pub max_wronskian_spread: f64,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self {
            omegas: vec![0.5, 1.2],
            omega_range: None,
            l_max: 1,
            tol: 1e-10,
            h: None,
            overlap: None,
            r_seed: None,
            rstar_seed: None,
            seed_order: 12,
            phi_window: None,
            psi_window: None,
            sample_stride: 20,
            max_wronskian_spread: 1e-6,
        }
    }
}

impl ModesConfig {
    /// `omegas` followed by the range points.
    pub fn omega_list(&self) -> Vec<f64> {
        let mut v = self.omegas.clone();
        if let Some(r) = self.omega_range {
            let n = r.count.max(2);
            v.extend((0..n).map(|k| r.start + (r.stop - r.start) * k as f64 / (n - 1) as f64));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenConfig {
    pub omegas: Vec<f64>,
    pub l_max: u32,
    pub r: f64,
    pub rps: Vec<f64>,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self { omegas: vec![0.4, 0.8, 1.5, 2.5], l_max: 2, r: 10.0, rps: vec![10.0, 15.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoPointConfig {
    /// Complex time difference `[Re t, Im t]`, `Im t < 0`.
    pub t: [f64; 2],
    pub r: f64,
    pub rps: Vec<f64>,
    /// Angular separation of the two points.
    pub gamma: f64,
}

impl Default for TwoPointConfig {
    fn default() -> Self {
        Self { t: [0.5, -1.0], r: 10.0, rps: vec![11.0, 12.0], gamma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmsEvaluator {
    /// Closed-form-free flat thermal integral at separation `|r − r'|`.
    Flat,
    /// Angular mode sum on the configured Schwarzschild background.
    ModeSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmsCase {
    pub beta: f64,
    pub epsilon: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KmsConfig {
    pub evaluator: KmsEvaluator,
    pub cases: Vec<KmsCase>,
    pub r: f64,
    pub rp: f64,
    /// Frequencies of the `l = 0` spectral table used for detailed balance
    /// and positivity at `r = r' = r`.
    pub omegas: Vec<f64>,
}

impl Default for KmsConfig {
    fn default() -> Self {
        Self {
            evaluator: KmsEvaluator::Flat,
            cases: vec![KmsCase { beta: 2.0, epsilon: 0.2, t: 0.5 }, KmsCase { beta: 4.0, epsilon: 0.4, t: 0.3 }],
            r: 20.0,
            rp: 20.0,
            omegas: vec![0.3, 0.6, 0.9, 1.2, 1.7, 2.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub t: [f64; 2],
    pub r: f64,
    pub rps: Vec<f64>,
    /// Allowed relative deviation of the fitted rate from `m`.
    pub rate_tol: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { t: [0.0, -0.5], r: 20.0, rps: (0..10).map(|k| 30.0 + 5.0 * k as f64).collect(), rate_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrabilityConfig {
    pub t: [f64; 2],
    pub r: f64,
    pub r_min: f64,
    pub cuts: Vec<f64>,
    pub tail_tol: f64,
}

impl Default for IntegrabilityConfig {
    fn default() -> Self {
        Self { t: [0.0, -0.5], r: 20.0, r_min: 25.0, cuts: vec![80.0, 120.0, 160.0, 200.0], tail_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlatConfig {
    /// Black-hole masses compared, smallest first.
    pub masses: Vec<f64>,
    pub channels: Vec<ChannelProbe>,
    pub positions: Vec<PositionProbe>,
    /// Allowed relative deviation at the smallest mass.
    pub max_deviation: f64,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self {
            masses: vec![1e-3, 1e-2],
            channels: vec![
                ChannelProbe { omega: 1.2, l: 0, r: 60.0, rp: 70.0 },
                ChannelProbe { omega: 0.6, l: 0, r: 60.0, rp: 70.0 },
                ChannelProbe { omega: 0.8, l: 2, r: 50.0, rp: 55.0 },
            ],
            positions: vec![PositionProbe { t_re: 0.5, t_im: -1.0, r: 60.0, rp: 60.0 }],
            max_deviation: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Falls back to `$SKMS_OUT_DIR`, then `skms-out`.
    pub dir: Option<String>,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, format: Format::Both }
    }
}

/// Reads a config file into a JSON tree. A JSON report is accepted as well;
/// its echoed `config` is used.
pub fn load_tree(path: &Path) -> CResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
        return Ok(match v {
            Value::Object(mut o) if o.contains_key("schema_version") && o.contains_key("config") => o.remove("config").unwrap_or_default(),
            other => other,
        });
    }
    let t: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
    serde_json::to_value(t).map_err(|e| ConfigError::new("", e.to_string()))
}

/// Applies `key.sub=value`; the value is parsed as a TOML literal, or taken as
/// a string when that fails.
pub fn apply_override(tree: &mut Value, assignment: &str) -> CResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(assignment, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::new(key, "empty key segment"));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => serde_json::to_value(t.remove("v")).map_err(|e| ConfigError::new(key, e.to_string()))?,
        Err(_) => Value::String(raw.trim().to_string()),
    };
    if !tree.is_object() {
        *tree = Value::Object(Default::default());
    }
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| ConfigError::new(parts[..i].join("."), "not a table"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
        if entry.is_null() {
            *entry = Value::Object(Default::default());
        }
        node = entry;
    }
    Ok(())
}

/// Deserializes and validates a tree.
pub fn from_tree(tree: Value) -> CResult<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Recursively overlays `top` onto `base`; tables merge, everything else is replaced.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Starts from the defaults, overlays `path` (if any), applies overrides in
/// order, and validates.
pub fn load(path: Option<&Path>, overrides: &[String]) -> CResult<RunConfig> {
    let mut tree = serde_json::to_value(RunConfig::default()).map_err(|e| ConfigError::new("", e.to_string()))?;
    if let Some(p) = path {
        merge(&mut tree, load_tree(p)?);
    }
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    from_tree(tree)
}

fn check(ok: bool, path: &str, msg: &str) -> CResult<()> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(path, msg))
    }
}

fn positive(x: f64, path: &str) -> CResult<()> {
    check(x > 0.0 && x.is_finite(), path, "must be a positive finite number")
}

fn increasing(xs: &[f64], path: &str) -> CResult<()> {
    check(xs.windows(2).all(|w| w[1] > w[0]), path, "must be strictly increasing")
}

fn time(t: [f64; 2], path: &str) -> CResult<()> {
    check(t[0].is_finite() && t[1] < 0.0, path, "needs finite Re t and Im t < 0")
}

impl RunConfig {
    pub fn validate(&self) -> CResult<()> {
        let p = &self.params;
        check(p.big_m >= 0.0 && p.big_m.is_finite(), "params.M", "must be >= 0")?;
        positive(p.m, "params.m")?;
        if let Some(th) = &self.thermal {
            positive(th.beta, "thermal.beta")?;
            check(th.epsilon > 0.0 && th.epsilon < 0.5 * th.beta, "thermal.epsilon", "must lie in (0, beta/2)")?;
        }
        self.quadrature.validate(p.m).map_err(|e| ConfigError::new("quadrature", e.to_string()))?;
        let horizon = 2.0 * p.big_m;

        let md = &self.modes;
        check((1e-12..=1e-4).contains(&md.tol), "modes.tol", "must lie in [1e-12, 1e-4]")?;
        if let Some(h) = md.h {
            positive(h, "modes.h")?;
        }
        check(md.seed_order >= 1, "modes.seed_order", "must be >= 1")?;
        check(md.sample_stride >= 1, "modes.sample_stride", "must be >= 1")?;
        positive(md.max_wronskian_spread, "modes.max_wronskian_spread")?;
        check(md.omega_list().iter().all(|w| w.is_finite() && *w != 0.0), "modes.omegas", "frequencies must be finite and nonzero")?;
        if let Some(r) = md.omega_range {
            check(r.count >= 2, "modes.omega_range.count", "must be >= 2")?;
        }
        if let Some([a, b]) = md.overlap {
            check(b > a, "modes.overlap", "needs overlap[1] > overlap[0]")?;
        }

        let g = &self.green;
        check(g.omegas.iter().all(|w| w.is_finite() && *w > 0.0), "green.omegas", "frequencies must be positive")?;
        check(g.r > horizon && g.rps.iter().all(|&x| x > horizon), "green.rps", "radii must lie outside the horizon")?;
        check(!g.rps.is_empty(), "green.rps", "needs at least one radius")?;

        let tp = &self.twopoint;
        time(tp.t, "twopoint.t")?;
        check(tp.r > horizon && !tp.rps.is_empty() && tp.rps.iter().all(|&x| x > horizon), "twopoint.rps", "radii must lie outside the horizon")?;
        check(tp.gamma.is_finite(), "twopoint.gamma", "must be finite")?;
        if let Some(th) = &self.thermal {
            check(-tp.t[1] < th.beta, "twopoint.t", "thermal evaluation needs -beta < Im t")?;
        }

        let k = &self.kms;
        check(!k.cases.is_empty(), "kms.cases", "needs at least one case")?;
        for (i, c) in k.cases.iter().enumerate() {
            positive(c.beta, &format!("kms.cases[{i}].beta"))?;
            check(c.epsilon > 0.0 && c.epsilon < 0.5 * c.beta, &format!("kms.cases[{i}].epsilon"), "must lie in (0, beta/2)")?;
            check(c.t.is_finite(), &format!("kms.cases[{i}].t"), "must be finite")?;
        }
        check(k.r > horizon && k.rp > horizon, "kms.r", "radii must lie outside the horizon")?;
        check(k.omegas.iter().all(|w| w.is_finite() && *w > 0.0), "kms.omegas", "frequencies must be positive")?;

        let d = &self.decay;
        time(d.t, "decay.t")?;
        increasing(&d.rps, "decay.rps")?;
        check(d.rps.len() >= skms::position::MIN_DECAY_SAMPLES, "decay.rps", "needs at least 8 radii")?;
        check(d.r > horizon && d.rps[0] > d.r, "decay.rps", "radii must exceed decay.r")?;
        positive(d.rate_tol, "decay.rate_tol")?;

        let it = &self.integrability;
        time(it.t, "integrability.t")?;
        check(it.r > horizon && it.r_min > horizon, "integrability.r_min", "radii must lie outside the horizon")?;
        check(it.cuts.len() >= skms::position::MIN_CUTS, "integrability.cuts", "needs at least 4 cuts")?;
        increasing(&it.cuts, "integrability.cuts")?;
        check(it.cuts[0] > it.r_min, "integrability.cuts", "cuts must exceed r_min")?;
        positive(it.tail_tol, "integrability.tail_tol")?;

        let f = &self.flat;
        check(!f.masses.is_empty(), "flat.masses", "needs at least one mass")?;
        increasing(&f.masses, "flat.masses")?;
        check(f.masses.iter().all(|&x| x >= 0.0 && x <= 1e-2 / p.m), "flat.masses", "masses must lie in [0, 1e-2/m]")?;
        check(f.channels.iter().all(|c| c.r >= 50.0 / p.m && c.rp >= 50.0 / p.m), "flat.channels", "probe radii must be >= 50/m")?;
        check(f.positions.iter().all(|c| c.r >= 50.0 / p.m && c.rp >= 50.0 / p.m && c.t_im < 0.0), "flat.positions", "probe radii must be >= 50/m and Im t < 0")?;
        positive(f.max_deviation, "flat.max_deviation")?;
        Ok(())
    }
}
