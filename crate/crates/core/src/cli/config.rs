//! Experiment configuration: JSON file, `--set` overrides, validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::error::{KblError, Result};
use crate::grid::{Grid, ScalarField};
use crate::koopman::TruncationSpec;
use crate::spectral::Potential;

/// A field on `[0,1]`. `sink` and `sink_perturbation` only make sense for
/// initial conditions and are resolved against the spectral basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `Σ c_k x^k`
    Polynomial { coeffs: Vec<f64> },
    /// `Σ a_k cos(kπx)`, `k ≥ 0`
    Cosine { coeffs: Vec<f64> },
    /// `Σ b_k sin(kπx)`, `k ≥ 1`
    Sine { coeffs: Vec<f64> },
    /// CSV of samples: one column on the grid nodes, or `x,value` pairs
    /// interpolated linearly. Relative paths resolve against the config file.
    Table { path: PathBuf },
    Sink,
    SinkPerturbation { amplitude: f64, mode: usize },
}

impl FieldSpec {
    pub fn is_sink(&self) -> bool {
        matches!(self, FieldSpec::Sink | FieldSpec::SinkPerturbation { .. })
    }

    /// Samples a basis-independent spec on `grid`.
    pub fn evaluate(&self, grid: Grid, base_dir: &Path, path: &str) -> Result<ScalarField> {
        let field = match self {
            FieldSpec::Constant { value } => ScalarField::constant(grid, *value),
            FieldSpec::Polynomial { coeffs } => {
                ScalarField::from_fn(grid, |x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c))?
            }
            FieldSpec::Cosine { coeffs } => ScalarField::from_fn(grid, |x| {
                coeffs.iter().enumerate().map(|(k, a)| a * (k as f64 * PI * x).cos()).sum()
            })?,
            FieldSpec::Sine { coeffs } => ScalarField::from_fn(grid, |x| {
                coeffs.iter().enumerate().map(|(k, b)| b * ((k + 1) as f64 * PI * x).sin()).sum()
            })?,
            FieldSpec::Table { path: file } => read_table(grid, &base_dir.join(file), path)?,
            FieldSpec::Sink | FieldSpec::SinkPerturbation { .. } => {
                return Err(KblError::Config(format!("{path}: `{}` needs a spectral basis", self.kind())))
            }
        };
        if let Some(i) = field.values().iter().position(|v| !v.is_finite()) {
            return Err(KblError::Config(format!("{path}: non-finite value at node {i}")));
        }
        Ok(field)
    }

    fn kind(&self) -> &'static str {
        match self {
            FieldSpec::Constant { .. } => "constant",
            FieldSpec::Polynomial { .. } => "polynomial",
            FieldSpec::Cosine { .. } => "cosine",
            FieldSpec::Sine { .. } => "sine",
            FieldSpec::Table { .. } => "table",
            FieldSpec::Sink => "sink",
            FieldSpec::SinkPerturbation { .. } => "sink_perturbation",
        }
    }
}

fn read_table(grid: Grid, file: &Path, path: &str) -> Result<ScalarField> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| KblError::Config(format!("{path}: cannot read {}: {e}", file.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            // a header line is tolerated before the data
            Err(_) if rows.is_empty() => continue,
            Err(_) => {
                return Err(KblError::Config(format!("{path}: {}:{}: not a number", file.display(), lineno + 1)))
            }
        }
    }
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != width) || !(width == 1 || width == 2) {
        return Err(KblError::Config(format!("{path}: table must have one or two columns")));
    }
    if width == 1 {
        if rows.len() != grid.n_points() {
            return Err(KblError::Config(format!(
                "{path}: {} samples but the grid has {} points",
                rows.len(),
                grid.n_points()
            )));
        }
        return ScalarField::new(grid, rows.into_iter().map(|r| r[0]).collect());
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    if xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KblError::Config(format!("{path}: x column must be strictly increasing")));
    }
    if xs[0] > 0.0 || *xs.last().unwrap() < 1.0 {
        return Err(KblError::Config(format!("{path}: x column must cover [0, 1]")));
    }
    ScalarField::from_fn(grid, |x| {
        let j = xs.partition_point(|&xj| xj <= x).clamp(1, xs.len() - 1);
        let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        ys[j - 1] + w * (ys[j] - ys[j - 1])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub max_mode: usize,
    pub max_order: usize,
    #[serde(default)]
    pub lambda_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub potential: FieldSpec,
    pub n_points: usize,
    /// Number of retained eigenmodes `K`.
    pub modes: usize,
    pub initial: FieldSpec,
    pub times: Vec<f64>,
    pub truncation: TruncationConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Time step of the finite-difference Burgers solver.
    pub dt: f64,
    /// End of the window searched for blow-up.
    pub horizon: f64,
    /// Random states per randomized check in `verify`.
    pub samples: usize,
    /// Evaluate Koopman series at uncertified times instead of failing.
    pub allow_uncertified: bool,
    /// Debug hook for `verify`: corrupt this eigenmode before running checks.
    pub fault_mode: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            potential: FieldSpec::Polynomial { coeffs: vec![10.0, 5.0] },
            n_points: 1001,
            modes: 60,
            initial: FieldSpec::SinkPerturbation { amplitude: 0.05, mode: 1 },
            times: vec![0.3, 0.5, 1.0],
            truncation: TruncationConfig {
                max_mode: 6,
                max_order: 2,
                lambda_cut: None,
            },
            output_dir: PathBuf::from("kbl_out"),
            seed: 0,
            dt: 1e-4,
            horizon: 2.0,
            samples: 10,
            allow_uncertified: false,
            fault_mode: None,
        }
    }
}

/// Sets `key` (dotted path) in a JSON object. The value is parsed as JSON
/// when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| KblError::Config(format!("--set expects key=value, got `{assignment}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(KblError::Config(format!("--set: malformed key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(KblError::Config(format!("--set {key}: `{}` is not an object", parts[..depth].join("."))));
        }
        let map = node.as_object_mut().unwrap();
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!()
}

/// A validated configuration plus where relative table paths resolve.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Reads `path` (or starts from defaults), applies overrides, deserializes
    /// with field-path errors and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (mut root, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| KblError::Config(format!("cannot read config {}: {e}", p.display())))?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| KblError::Config(format!("{}: {e}", p.display())))?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (v, dir)
            }
            None => (serde_json::to_value(ExperimentConfig::default())?, PathBuf::new()),
        };
        if !root.is_object() {
            return Err(KblError::Config("config root must be a JSON object".into()));
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let config = from_value(root)?;
        config.validate()?;
        Ok(Self { config, base_dir })
    }

    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            base_dir: PathBuf::new(),
        })
    }
}

fn from_value(v: Value) -> Result<ExperimentConfig> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        KblError::Config(format!("{path}: {}", e.into_inner()))
    })
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(KblError::Config(format!("{path}: {msg}")));
        if self.n_points < 5 || self.n_points % 2 == 0 {
            return bad("n_points", format!("must be odd and at least 5, got {}", self.n_points));
        }
        if self.modes < 2 || self.modes > self.n_points / 4 {
            return bad("modes", format!("must lie in [2, n_points/4 = {}], got {}", self.n_points / 4, self.modes));
        }
        if self.potential.is_sink() {
            return bad("potential", "sink states are only valid initial conditions".into());
        }
        if let FieldSpec::SinkPerturbation { amplitude, mode } = &self.initial {
            if !amplitude.is_finite() {
                return bad("initial.amplitude", "must be finite".into());
            }
            if *mode == 0 {
                return bad("initial.mode", "must be >= 1".into());
            }
        }
        if self.times.is_empty() {
            return bad("times", "must not be empty".into());
        }
        for (i, t) in self.times.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) {
                return bad(&format!("times[{i}]"), format!("must be finite and >= 0, got {t}"));
            }
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times", "must be strictly increasing".into());
        }
        let tr = &self.truncation;
        if tr.max_mode < 1 || tr.max_mode >= self.modes {
            return bad(
                "truncation.max_mode",
                format!("must lie in [1, modes - 1 = {}], got {}", self.modes - 1, tr.max_mode),
            );
        }
        if let Some(c) = tr.lambda_cut {
            if !(c > 0.0 && c < 1.0) {
                return bad("truncation.lambda_cut", format!("must lie in (0, 1), got {c}"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", format!("must be positive, got {}", self.horizon));
        }
        if self.samples == 0 {
            return bad("samples", "must be >= 1".into());
        }
        if let Some(m) = self.fault_mode {
            if m >= self.modes {
                return bad("fault_mode", format!("must be < modes = {}, got {m}", self.modes));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_points)
    }

    pub fn trunc(&self) -> Result<TruncationSpec> {
        let t = TruncationSpec::new(self.truncation.max_mode, self.truncation.max_order)?;
        match self.truncation.lambda_cut {
            Some(c) => t.with_lambda_cut(c),
            None => Ok(t),
        }
    }

    /// Samples and checks the potential; non-positive values are a
    /// validation error naming the offending node.
    pub fn potential(&self, base_dir: &Path) -> Result<Potential> {
        let grid = self.grid()?;
        let field = self.potential.evaluate(grid, base_dir, "potential")?;
        if let Some((i, v)) = field.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(KblError::Config(format!(
                "potential: must be strictly positive, got {v} at x = {}",
                grid.node(i)
            )));
        }
        Potential::new(field)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.digest(), back.digest());
    }

    #[test]
    fn overrides_set_nested_values() {
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        apply_override(&mut v, "truncation.max_mode=8").unwrap();
        apply_override(&mut v, r#"potential={"kind":"constant","value":3.0}"#).unwrap();
        apply_override(&mut v, "output_dir=runs/a").unwrap();
        let c = from_value(v).unwrap();
        assert_eq!(c.truncation.max_mode, 8);
        assert_eq!(c.potential, FieldSpec::Constant { value: 3.0 });
        assert_eq!(c.output_dir, PathBuf::from("runs/a"));
        let mut v = json!({"n_points": 3});
        assert!(apply_override(&mut v, "n_points.x=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn errors_carry_field_paths() {
        let v = json!({"truncation": {"max_mode": "six", "max_order": 2}});
        let e = from_value(v).unwrap_err().to_string();
        assert!(e.contains("truncation.max_mode"), "{e}");
        let v = json!({"potential": {"kind": "quartic"}});
        assert!(from_value(v).unwrap_err().to_string().contains("potential"));
        let v = json!({"modez": 3});
        assert!(from_value(v).unwrap_err().to_string().contains("modez"));

        let mut c = ExperimentConfig::default();
        c.n_points = 1000;
        assert!(c.validate().unwrap_err().to_string().contains("n_points"));
        let mut c = ExperimentConfig::default();
        c.modes = 400;
        assert!(c.validate().unwrap_err().to_string().contains("modes"));
        let mut c = ExperimentConfig::default();
        c.times = vec![0.5, 0.2];
        assert!(c.validate().unwrap_err().to_string().contains("times"));
    }

    #[test]
    fn grammar_evaluates() {
        let g = Grid::new(101).unwrap();
        let here = Path::new(".");
        let p = FieldSpec::Polynomial { coeffs: vec![10.0, 5.0] }.evaluate(g, here, "p").unwrap();
        assert!((p.values()[100] - 15.0).abs() < 1e-14);
        let c = FieldSpec::Cosine { coeffs: vec![1.0, 0.5] }.evaluate(g, here, "c").unwrap();
        assert!((c.values()[0] - 1.5).abs() < 1e-14 && (c.values()[100] - 0.5).abs() < 1e-14);
        let s = FieldSpec::Sine { coeffs: vec![2.0] }.evaluate(g, here, "s").unwrap();
        assert!((s.values()[50] - 2.0).abs() < 1e-14);
        assert!(FieldSpec::Sink.evaluate(g, here, "initial").is_err());
    }

    #[test]
    fn tables_and_positivity() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("v.csv"), "x,value\n0,1\n0.5,2\n1,1\n").unwrap();
        let g = Grid::new(5).unwrap();
        let f = FieldSpec::Table { path: "v.csv".into() }.evaluate(g, dir.path(), "potential").unwrap();
        assert_eq!(f.values(), &[1.0, 1.5, 2.0, 1.5, 1.0]);

        std::fs::write(dir.path().join("z.csv"), "1\n1\n0\n1\n1\n").unwrap();
        let c = ExperimentConfig {
            potential: FieldSpec::Table { path: "z.csv".into() },
            n_points: 5,
            modes: 1,
            ..Default::default()
        };
        let e = c.potential(dir.path()).unwrap_err();
        assert!(e.to_string().contains("strictly positive"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }
}
