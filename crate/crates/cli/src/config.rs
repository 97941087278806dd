//! Experiment configuration: `key value` files with `[section]` headers,
//! overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use unitary_landscapes::dynamics::{ControlField, ControlProblem};
use unitary_landscapes::gates;
use unitary_landscapes::io::{parse_field, read_matrix};
use unitary_landscapes::landscapes::LandscapeKind;
use unitary_landscapes::matgeom::{analyze_weight, seeded_complex_gaussian, UnitaryMatrix, WeightSpectrum};
use unitary_landscapes::scalar::{cplx, CMatrix};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("field `{field}`: {msg}")]
    Field { field: String, msg: String },

    #[error("{path}:{line}: {msg}")]
    Syntax { path: String, line: usize, msg: String },

    #[error("cannot read `{path}`: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn field_err(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.to_string(), msg: msg.into() }
}

/// Recognized keys per section; keys are accepted in any section listed here.
const SECTIONS: &[(&str, &[&str])] = &[
    ("experiment", &["n", "a", "w", "kind", "seed", "output"]),
    ("tolerances", &["tau_cluster", "tau_crit", "tau_null", "tau_grad", "tau_match", "tau_value"]),
    ("flow", &["max_iter", "step", "u0"]),
    ("control", &["h0", "mu", "t", "m", "hbar", "field"]),
];

pub fn known_key(key: &str) -> bool {
    SECTIONS.iter().any(|(_, keys)| keys.contains(&key))
}

/// Raw `key → value` settings.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Directory used to resolve relative paths from the config file.
    base: Option<PathBuf>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: String| ConfigError::Syntax { path: origin.to_string(), line: idx + 1, msg };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(format!("unterminated section header `{line}`")))?
                    .trim();
                let known = SECTIONS.iter().find(|(s, _)| *s == name);
                section = Some(known.ok_or_else(|| syntax(format!("unknown section `{name}`")))?.0);
                continue;
            }
            let (key, value) = match line.split_once(char::is_whitespace) {
                Some((k, v)) => (k.trim().to_ascii_lowercase(), v.trim().to_string()),
                None => return Err(syntax(format!("expected `key value`, got `{line}`"))),
            };
            let allowed = match section {
                Some(s) => SECTIONS.iter().find(|(name, _)| *name == s).is_some_and(|(_, keys)| keys.contains(&key.as_str())),
                None => known_key(&key),
            };
            if !allowed {
                return Err(syntax(format!("unknown key `{key}`")));
            }
            values.insert(key, value);
        }
        Ok(Self { values, base: None })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let mut s = Self::parse(&text, &path.display().to_string())?;
        s.base = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    /// Flag values win over file values; flag paths stay relative to the cwd.
    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
        self.values.insert(format!("{key}@flag"), String::new());
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn path(&self, key: &str, raw: &str) -> PathBuf {
        let p = PathBuf::from(raw);
        match (&self.base, self.values.contains_key(&format!("{key}@flag"))) {
            (Some(base), false) if p.is_relative() => base.join(p),
            _ => p,
        }
    }

    fn parse_num<V: std::str::FromStr>(&self, key: &str, default: V) -> Result<V, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| field_err(key, format!("cannot parse `{v}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSource {
    Identity,
    Projector(usize),
    Diagonal(Vec<f64>),
    File(PathBuf),
    Random(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateSource {
    Named(String),
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct Tolerances {
    pub cluster: f64,
    pub crit: f64,
    pub null: Option<f64>,
    pub grad: f64,
    pub matching: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ControlBlock {
    pub h0: CMatrix<f64>,
    pub mu: CMatrix<f64>,
    pub horizon: f64,
    pub slices: usize,
    pub hbar: f64,
    pub field: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n: usize,
    pub weight: WeightSource,
    pub gate: GateSource,
    pub kind: LandscapeKind,
    pub seed: u64,
    pub tol: Tolerances,
    pub max_iter: Option<usize>,
    pub step: Option<f64>,
    pub u0: Option<String>,
    pub control: Option<ControlBlock>,
    pub output: Option<PathBuf>,
}

fn split_source(raw: &str) -> (String, String) {
    let raw = raw.trim();
    match raw.split_once(|c: char| c.is_whitespace() || c == ':') {
        Some((head, rest)) => (head.to_ascii_lowercase(), rest.trim().to_string()),
        None => (raw.to_ascii_lowercase(), String::new()),
    }
}

fn parse_weight(settings: &Settings, raw: &str) -> Result<WeightSource, ConfigError> {
    let (head, rest) = split_source(raw);
    let need = |what: &str| field_err("A", format!("`{head}` needs {what}"));
    Ok(match head.as_str() {
        "identity" => WeightSource::Identity,
        "projector" => WeightSource::Projector(rest.parse().map_err(|_| need("a rank"))?),
        "diagonal" => {
            let entries: Result<Vec<f64>, _> = rest.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let entries = entries.map_err(|_| need("a comma-separated list of reals"))?;
            if entries.is_empty() || entries.iter().any(|x| !x.is_finite()) {
                return Err(need("finite entries"));
            }
            WeightSource::Diagonal(entries)
        }
        "file" if !rest.is_empty() => WeightSource::File(settings.path("a", &rest)),
        "random" => WeightSource::Random(rest.parse().map_err(|_| need("an integer seed"))?),
        _ => return Err(field_err("A", format!("unknown weight source `{raw}`"))),
    })
}

fn parse_gate(settings: &Settings, raw: &str) -> Result<GateSource, ConfigError> {
    let (head, rest) = split_source(raw);
    Ok(match head.as_str() {
        "identity" | "hadamard" | "cnot" | "qft" => GateSource::Named(head),
        "random" => {
            let seed: u64 = rest.parse().map_err(|_| field_err("W", "`random` needs an integer seed"))?;
            GateSource::Named(format!("random:{seed}"))
        }
        "file" if !rest.is_empty() => GateSource::File(settings.path("w", &rest)),
        _ => return Err(field_err("W", format!("unknown gate source `{raw}`"))),
    })
}

fn named_operator(settings: &Settings, key: &str, raw: &str) -> Result<CMatrix<f64>, ConfigError> {
    let (head, rest) = split_source(raw);
    let m = match head.as_str() {
        "sigma_x" => gates::pauli_x(),
        "sigma_y" => gates::pauli_y(),
        "sigma_z" => gates::pauli_z(),
        "zero" => CMatrix::zeros(2, 2),
        _ => {
            let path = if head == "file" { rest } else { raw.to_string() };
            read_matrix::<f64>(&settings.path(key, &path)).map_err(|e| field_err(key, e.to_string()))?
        }
    };
    Ok(m)
}

impl ExperimentConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self, ConfigError> {
        let weight = parse_weight(settings, settings.get("a").unwrap_or("identity"))?;
        let gate = parse_gate(settings, settings.get("w").unwrap_or("identity"))?;
        let kind = match settings.get("kind") {
            Some(k) => k.parse().map_err(|_| field_err("kind", format!("unknown landscape kind `{k}`")))?,
            None => LandscapeKind::F,
        };
        let n_flag: Option<usize> = match settings.get("n") {
            Some(v) => Some(v.parse().map_err(|_| field_err("N", format!("cannot parse `{v}`")))?),
            None => None,
        };
        let n = match (&weight, n_flag) {
            (WeightSource::Diagonal(d), Some(n)) if d.len() != n => {
                return Err(field_err("N", format!("diagonal weight has {} entries but N = {n}", d.len())))
            }
            (WeightSource::Diagonal(d), _) => d.len(),
            (WeightSource::File(_), n) => n.unwrap_or(0),
            (_, Some(n)) => n,
            (_, None) => match &gate {
                GateSource::Named(name) if name == "hadamard" => 2,
                GateSource::Named(name) if name == "cnot" => 4,
                _ => return Err(field_err("N", "dimension is required for this weight source")),
            },
        };
        if n == 0 && !matches!(weight, WeightSource::File(_)) {
            return Err(field_err("N", "dimension must be positive"));
        }
        if let WeightSource::Projector(r) = weight {
            if r > n {
                return Err(field_err("A", format!("projector rank {r} exceeds N = {n}")));
            }
        }
        let tol = Tolerances {
            cluster: settings.parse_num("tau_cluster", unitary_landscapes::matgeom::TAU_CLUSTER)?,
            crit: settings.parse_num("tau_crit", unitary_landscapes::atlas::TAU_CRIT)?,
            null: match settings.get("tau_null") {
                Some(_) => Some(settings.parse_num("tau_null", 0.0)?),
                None => None,
            },
            grad: settings.parse_num("tau_grad", 1e-10)?,
            matching: settings.parse_num("tau_match", 1e-6)?,
            value: settings.parse_num("tau_value", 1e-4)?,
        };
        let max_iter = match settings.get("max_iter") {
            Some(_) => Some(settings.parse_num("max_iter", 0usize)?),
            None => None,
        };
        let step = match settings.get("step") {
            Some(_) => Some(settings.parse_num("step", 0.0)?),
            None => None,
        };
        let control = Self::control_block(settings)?;
        Ok(Self {
            n,
            weight,
            gate,
            kind,
            seed: settings.parse_num("seed", 0u64)?,
            tol,
            max_iter,
            step,
            u0: settings.get("u0").map(str::to_string),
            control,
            output: settings.get("output").map(PathBuf::from),
        })
    }

    fn control_block(settings: &Settings) -> Result<Option<ControlBlock>, ConfigError> {
        let keys = ["h0", "mu", "t", "m"];
        let present: Vec<&str> = keys.iter().copied().filter(|k| settings.get(k).is_some()).collect();
        if present.is_empty() {
            return Ok(None);
        }
        if let Some(missing) = keys.iter().find(|k| settings.get(k).is_none()) {
            return Err(field_err(missing, "control block is incomplete"));
        }
        let h0 = named_operator(settings, "h0", settings.get("h0").unwrap_or_default())?;
        let mu = named_operator(settings, "mu", settings.get("mu").unwrap_or_default())?;
        let horizon: f64 = settings.parse_num("t", 0.0)?;
        let slices: usize = settings.parse_num("m", 0)?;
        let hbar: f64 = settings.parse_num("hbar", 1.0)?;
        if !(horizon > 0.0) {
            return Err(field_err("T", "horizon must be positive"));
        }
        if slices == 0 {
            return Err(field_err("m", "slice count must be positive"));
        }
        if !(hbar > 0.0) {
            return Err(field_err("hbar", "must be positive"));
        }
        let field = settings.get("field").map(|f| settings.path("field", f));
        Ok(Some(ControlBlock { h0, mu, horizon, slices, hbar, field }))
    }

    pub fn weight_matrix(&self) -> Result<CMatrix<f64>, ConfigError> {
        let n = self.n;
        let diag = |d: Vec<f64>| {
            CMatrix::from_diagonal(&unitary_landscapes::nalgebra::DVector::from_iterator(
                d.len(),
                d.into_iter().map(|x| cplx(x, 0.0)),
            ))
        };
        let a = match &self.weight {
            WeightSource::Identity => CMatrix::identity(n, n),
            WeightSource::Projector(r) => diag((0..n).map(|i| if i < *r { 1.0 } else { 0.0 }).collect()),
            WeightSource::Diagonal(d) => diag(d.clone()),
            WeightSource::Random(seed) => seeded_complex_gaussian(n, *seed),
            WeightSource::File(p) => read_matrix::<f64>(p).map_err(|e| field_err("A", e.to_string()))?,
        };
        if a.nrows() != a.ncols() {
            return Err(field_err("A", format!("weight must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if n != 0 && a.nrows() != n {
            return Err(field_err("A", format!("weight is {}x{} but N = {n}", a.nrows(), a.ncols())));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(field_err("A", "weight has non-finite entries"));
        }
        Ok(a)
    }

    pub fn weight_spectrum(&self) -> Result<WeightSpectrum<f64>, ConfigError> {
        analyze_weight(&self.weight_matrix()?, self.tol.cluster).map_err(|e| field_err("A", e.to_string()))
    }

    /// Dimension after resolving file-backed weights.
    pub fn dim(&self) -> Result<usize, ConfigError> {
        if self.n > 0 {
            Ok(self.n)
        } else {
            Ok(self.weight_matrix()?.nrows())
        }
    }

    pub fn target(&self) -> Result<UnitaryMatrix<f64>, ConfigError> {
        let n = self.dim()?;
        match &self.gate {
            GateSource::Named(name) => gates::named(name, n).map_err(|e| field_err("W", e.to_string())),
            GateSource::File(p) => {
                let m = read_matrix::<f64>(p).map_err(|e| field_err("W", e.to_string()))?;
                if m.nrows() != n {
                    return Err(field_err("W", format!("gate is {}x{} but N = {n}", m.nrows(), m.ncols())));
                }
                UnitaryMatrix::new(m).map_err(|e| field_err("W", e.to_string()))
            }
        }
    }

    pub fn control_problem(&self) -> Result<Option<ControlProblem<f64>>, ConfigError> {
        let Some(c) = &self.control else { return Ok(None) };
        let cp = ControlProblem::new(c.h0.clone(), c.mu.clone(), c.hbar, c.horizon, c.slices)
            .map_err(|e| field_err("h0", e.to_string()))?;
        Ok(Some(cp))
    }

    pub fn initial_field(&self, cp: &ControlProblem<f64>) -> Result<Option<ControlField<f64>>, ConfigError> {
        let Some(path) = self.control.as_ref().and_then(|c| c.field.clone()) else { return Ok(None) };
        let text = fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let rec = parse_field(&text).map_err(|e| field_err("field", e.to_string()))?;
        if rec.samples.len() != cp.slices() {
            return Err(field_err("field", format!("{} samples but m = {}", rec.samples.len(), cp.slices())));
        }
        let field = ControlField::new(rec.samples, rec.horizon).map_err(|e| field_err("field", e.to_string()))?;
        Ok(Some(field))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let s = Settings::parse("# demo\n[experiment]\nN 3\nA diagonal 2,1,1\n\n[tolerances]\ntau_grad 1e-9 # tighter\n", "t").unwrap();
        let c = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.weight, WeightSource::Diagonal(vec![2.0, 1.0, 1.0]));
        assert_eq!(c.tol.grad, 1e-9);
    }

    #[test]
    fn flags_override_file() {
        let mut s = Settings::parse("kind F\nN 2\n", "t").unwrap();
        s.set("kind", "P".into());
        assert_eq!(ExperimentConfig::from_settings(&s).unwrap().kind, LandscapeKind::P);
    }

    #[test]
    fn errors_name_the_field() {
        let s = Settings::parse("N 2\nA projector 5\n", "t").unwrap();
        let e = ExperimentConfig::from_settings(&s).unwrap_err().to_string();
        assert!(e.contains("`A`"), "{e}");
        let e = Settings::parse("[control]\nN 2\n", "t").unwrap_err().to_string();
        assert!(e.contains("unknown key"), "{e}");
        let s = Settings::parse("N 2\nh0 sigma_z\n", "t").unwrap();
        let e = ExperimentConfig::from_settings(&s).unwrap_err().to_string();
        assert!(e.contains("`mu`"), "{e}");
    }

    #[test]
    fn diagonal_fixes_dimension() {
        let s = Settings::parse("A diagonal 2,1\n", "t").unwrap();
        assert_eq!(ExperimentConfig::from_settings(&s).unwrap().n, 2);
        let s = Settings::parse("A diagonal 2,1\nN 3\n", "t").unwrap();
        assert!(ExperimentConfig::from_settings(&s).is_err());
    }
}
