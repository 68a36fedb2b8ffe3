//! JSON model files, named presets, `key=value` overrides and grids.

use crate::error::{QrmError, Result};
use crate::examples::{thermal_population, QubitNQubitParams, ThreeQubitParams};
use crate::linalg::{c, CMatrix, HilbertDims};
use crate::model::{random_model, QrmModel, RandomModelOptions, ResetSpec};
use crate::random::rng_from_seed;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    m.rows().into_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson, what: &str) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(QrmError::Config(format!("{what}: ragged matrix")));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| c(rows[i][j][0], rows[i][j][1])))
}

/// On-disk description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dims: [usize; 3],
    pub tau_a: MatrixJson,
    pub tau_b: MatrixJson,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub h_a: MatrixJson,
    pub h_b: MatrixJson,
    pub h_c: MatrixJson,
    pub h_coupling: MatrixJson,
    #[serde(default)]
    pub g: f64,
}

impl ModelConfig {
    pub fn from_model(m: &QrmModel) -> Self {
        ModelConfig {
            dims: [m.dims.n_a, m.dims.n_c, m.dims.n_b],
            tau_a: matrix_to_json(&m.reset_a.tau),
            tau_b: matrix_to_json(&m.reset_b.tau),
            gamma_a: m.reset_a.gamma,
            gamma_b: m.reset_b.gamma,
            h_a: matrix_to_json(&m.h_a),
            h_b: matrix_to_json(&m.h_b),
            h_c: matrix_to_json(&m.h_c),
            h_coupling: matrix_to_json(&m.h_coupling),
            g: m.g,
        }
    }

    /// Shape errors are configuration errors; physical invariants are model errors.
    pub fn to_model(&self) -> Result<QrmModel> {
        let [na, nc, nb] = self.dims;
        let dims = HilbertDims::new(na, nc, nb).map_err(|e| QrmError::Config(e.to_string()))?;
        let shaped = |m: &MatrixJson, n: usize, what: &str| -> Result<CMatrix> {
            let x = matrix_from_json(m, what)?;
            if x.dim() != (n, n) {
                return Err(QrmError::Config(format!("{what} must be {n}x{n}, got {}x{}", x.nrows(), x.ncols())));
            }
            Ok(x)
        };
        QrmModel::new(
            dims,
            ResetSpec::new(shaped(&self.tau_a, na, "tau_a")?, self.gamma_a)?,
            ResetSpec::new(shaped(&self.tau_b, nb, "tau_b")?, self.gamma_b)?,
            shaped(&self.h_a, na, "h_a")?,
            shaped(&self.h_b, nb, "h_b")?,
            shaped(&self.h_c, nc, "h_c")?,
            shaped(&self.h_coupling, na * nc * nb, "h_coupling")?,
            self.g,
        )
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn model_hash(m: &QrmModel) -> String {
    ModelConfig::from_model(m).hash()
}

pub const PRESETS: [&str; 4] = ["three-qubit", "three-qubit-driven", "qubit-n-qubit", "random"];

/// Random-model preset knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPreset {
    pub n_a: usize,
    pub n_c: usize,
    pub n_b: usize,
    pub seed: u64,
    pub drive_a: bool,
    pub drive_b: bool,
    pub drive_c: bool,
    pub coupling_scale: f64,
}

impl Default for RandomPreset {
    fn default() -> Self {
        RandomPreset { n_a: 2, n_c: 3, n_b: 2, seed: 0, drive_a: false, drive_b: false, drive_c: false, coupling_scale: 1.0 }
    }
}

impl RandomPreset {
    pub fn build(&self) -> Result<QrmModel> {
        let dims = HilbertDims::new(self.n_a, self.n_c, self.n_b).map_err(|e| QrmError::Config(e.to_string()))?;
        let opts = RandomModelOptions {
            drive_a: self.drive_a,
            drive_b: self.drive_b,
            drive_c: self.drive_c,
            coupling_scale: self.coupling_scale,
            g: 0.0,
        };
        Ok(random_model(&mut rng_from_seed(self.seed), dims, opts))
    }
}

/// Default qubit–`C³`–qubit preset.
pub fn default_qubit_n_qubit() -> QubitNQubitParams {
    QubitNQubitParams::with_couplings(&[0.4, 0.7, 0.5], &[0.6, 0.3, 0.8], &[0.0, 1.0, 2.5], 0.7, 0.4, 1.0, 1.5)
}

/// A parsed `--set key=value`; values are JSON literals, bare words fall back to strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: Value,
}

pub fn parse_override(s: &str) -> Result<Override> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| QrmError::Config(format!("override '{s}' is not key=value")))?;
    let key = k.trim().to_string();
    if key.is_empty() {
        return Err(QrmError::Config(format!("override '{s}' has an empty key")));
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok(Override { key, value })
}

fn apply_overrides<T: Serialize + for<'de> Deserialize<'de>>(base: &T, overrides: &[Override], skip: &[&str]) -> Result<T> {
    let mut v = serde_json::to_value(base).map_err(|e| QrmError::Config(e.to_string()))?;
    let obj = v.as_object_mut().expect("struct serialises to an object");
    for o in overrides.iter().filter(|o| !skip.contains(&o.key.as_str())) {
        if !obj.contains_key(&o.key) {
            let known: Vec<_> = obj.keys().cloned().collect();
            return Err(QrmError::Config(format!("unknown key '{}'; expected one of {}", o.key, known.join(", "))));
        }
        obj.insert(o.key.clone(), o.value.clone());
    }
    serde_json::from_value(v).map_err(|e| QrmError::Config(format!("override rejected: {e}")))
}

fn override_f64(overrides: &[Override], key: &str) -> Result<Option<f64>> {
    overrides
        .iter()
        .rev()
        .find(|o| o.key == key)
        .map(|o| o.value.as_f64().ok_or_else(|| QrmError::Config(format!("{key} must be a number"))))
        .transpose()
}

/// Where the model comes from, resolved into a concrete model.
#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub source: String,
    pub model: QrmModel,
    pub config: ModelConfig,
    /// Preset parameters after overrides, when the model came from a preset.
    pub params: Option<Value>,
}

impl ResolvedModel {
    pub fn hash(&self) -> String {
        self.config.hash()
    }
}

fn finish(source: String, model: QrmModel, params: Option<Value>) -> ResolvedModel {
    ResolvedModel { source, config: ModelConfig::from_model(&model), model, params }
}

/// Builds a preset; `seed` feeds the `random` preset unless overridden.
pub fn resolve_preset(name: &str, overrides: &[Override], seed: u64) -> Result<ResolvedModel> {
    let g = override_f64(overrides, "g")?.unwrap_or(0.0);
    let src = format!("preset:{name}");
    let r = match name {
        "three-qubit" | "three-qubit-driven" => {
            let mut p: ThreeQubitParams = apply_overrides(&ThreeQubitParams::default(), overrides, &["g", "beta_a", "beta_b"])?;
            // inverse temperatures take precedence over populations
            if let Some(b) = override_f64(overrides, "beta_a")? {
                p.t_a = thermal_population(b, p.e_a);
            }
            if let Some(b) = override_f64(overrides, "beta_b")? {
                p.t_b = thermal_population(b, p.e_b);
            }
            let m = if name == "three-qubit" { p.build()? } else { p.build_driven()? };
            finish(src, m.with_g(g), Some(serde_json::to_value(p).unwrap()))
        }
        "qubit-n-qubit" => {
            let p: QubitNQubitParams = apply_overrides(&default_qubit_n_qubit(), overrides, &["g"])?;
            p.validate()?;
            finish(src, p.build()?.with_g(g), Some(serde_json::to_value(&p).unwrap()))
        }
        "random" => {
            let base = RandomPreset { seed, ..Default::default() };
            let p: RandomPreset = apply_overrides(&base, overrides, &["g"])?;
            finish(src, p.build()?.with_g(g), Some(serde_json::to_value(&p).unwrap()))
        }
        _ => return Err(QrmError::Config(format!("unknown preset '{name}'; known: {}", PRESETS.join(", ")))),
    };
    Ok(r)
}

/// Loads a model file; overrides act on the top-level fields (e.g. `g`, `gamma_a`).
pub fn resolve_file(path: &std::path::Path, overrides: &[Override]) -> Result<ResolvedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| QrmError::Config(format!("{}: {e}", path.display())))?;
    let cfg: ModelConfig = serde_json::from_str(&text).map_err(|e| QrmError::Config(format!("{}: {e}", path.display())))?;
    let cfg = apply_overrides(&cfg, overrides, &[])?;
    let model = cfg.to_model()?;
    Ok(finish(format!("file:{}", path.display()), model, None))
}

/// `a:b:n` (linear), `a:b:nlog` or `a:b:n:log` (geometric), or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| QrmError::Config(format!("grid '{s}': {why}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(&format!("'{t}' is not a number")));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.len() {
        1 => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        3 | 4 => {
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let mut count = parts[2].trim();
            let mut log = parts.len() == 4;
            if parts.len() == 4 && parts[3].trim() != "log" {
                return Err(bad("fourth field must be 'log'"));
            }
            if let Some(stripped) = count.strip_suffix("log") {
                count = stripped;
                log = true;
            }
            let n: usize = count.trim().parse().map_err(|_| bad("point count is not an integer"))?;
            if n == 0 {
                return Err(bad("needs at least one point"));
            }
            if log && !(a > 0.0 && b > 0.0) {
                return Err(bad("log grid needs positive ends"));
            }
            (0..n)
                .map(|i| {
                    let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    if log {
                        (a.ln() + f * (b.ln() - a.ln())).exp()
                    } else {
                        a + f * (b - a)
                    }
                })
                .collect()
        }
        _ => return Err(bad("expected a:b:n[log] or a comma list")),
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(bad("empty or non-finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("must be strictly increasing"));
    }
    Ok(grid)
}
