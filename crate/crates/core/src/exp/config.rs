use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::bp::{BpInit, BpOptions};
use crate::error::{Error, Result};
use crate::model::{builtin_model, model_from_json, model_to_json, ObservationModel};

/// The experiment drivers known to [`super::run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    CorrelationDecay,
    BpVsExact,
    DeMatch,
    EntropyIdentity,
    GraphStats,
    Calibration,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::CorrelationDecay,
        Self::BpVsExact,
        Self::DeMatch,
        Self::EntropyIdentity,
        Self::GraphStats,
        Self::Calibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CorrelationDecay => "correlation_decay",
            Self::BpVsExact => "bp_vs_exact",
            Self::DeMatch => "de_match",
            Self::EntropyIdentity => "entropy_identity",
            Self::GraphStats => "graph_stats",
            Self::Calibration => "calibration",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// BP settings used by experiments that run message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct BpSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BpSettings {
    fn default() -> Self {
        Self { damping: 0.0, tol: 1e-10, max_iter: 200 }
    }
}

impl BpSettings {
    pub fn options(&self) -> BpOptions {
        BpOptions { init: BpInit::Prior, damping: self.damping, tol: self.tol, max_iter: self.max_iter }
    }
}

/// A fully resolved experiment configuration. See `docs/config.md` for
/// the JSON schema and per-experiment defaults.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ObservationModel,
    pub alpha: f64,
    pub gamma: f64,
    pub sizes: Vec<usize>,
    pub epsilon: f64,
    pub theta: Option<f64>,
    pub k: usize,
    pub replicas: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub radii: Vec<usize>,
    pub forest_only: bool,
    pub delta_theta: f64,
    pub nodes_per_graph: usize,
    pub population: usize,
    pub generations: usize,
    pub stationary_tol: Option<f64>,
    pub bp: BpSettings,
    pub tail_sizes: Vec<usize>,
    pub bins: usize,
}

const FIELDS: &[&str] = &[
    "experiment",
    "model",
    "alpha",
    "gamma",
    "sizes",
    "epsilon",
    "theta",
    "k",
    "replicas",
    "seed",
    "output",
    "radii",
    "forest_only",
    "delta_theta",
    "nodes_per_graph",
    "population",
    "generations",
    "stationary_tol",
    "bp",
    "tail_sizes",
    "bins",
];

/// Group testing with a 5% symmetric flip and prior mass 0.1 on defectives.
pub fn default_model() -> ObservationModel {
    let params: BTreeMap<String, f64> = [("p1".to_string(), 0.1), ("f".to_string(), 0.05)].into();
    builtin_model("group_testing", &params).expect("default model is valid")
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
}

impl Fields<'_> {
    fn f64(&self, field: &str) -> Result<Option<f64>> {
        match self.map.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_f64().filter(|x| x.is_finite()).map(Some).ok_or_else(|| Error::config(field, "expected a finite number")),
        }
    }

    fn u64(&self, field: &str) -> Result<Option<u64>> {
        match self.map.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| Error::config(field, "expected a nonnegative integer")),
        }
    }

    fn usize(&self, field: &str) -> Result<Option<usize>> {
        Ok(self.u64(field)?.map(|v| v as usize))
    }

    fn bool(&self, field: &str) -> Result<Option<bool>> {
        match self.map.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_bool().map(Some).ok_or_else(|| Error::config(field, "expected true or false")),
        }
    }

    fn str(&self, field: &str) -> Result<Option<&str>> {
        match self.map.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| Error::config(field, "expected a string")),
        }
    }

    fn usize_list(&self, field: &str) -> Result<Option<Vec<usize>>> {
        match self.map.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_u64().map(|x| x as usize).ok_or_else(|| Error::config(field, "expected a list of nonnegative integers")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(field, "expected a list of nonnegative integers")),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `kind` with the default model.
    pub fn defaults(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let sizes = match kind {
            CorrelationDecay => vec![6, 8, 10, 12],
            BpVsExact => vec![6, 10, 14],
            DeMatch => vec![2000],
            EntropyIdentity => vec![6],
            GraphStats => vec![500],
            Calibration => vec![10],
        };
        let replicas = match kind {
            CorrelationDecay | BpVsExact => 200,
            DeMatch => 4,
            EntropyIdentity => 2000,
            GraphStats => 10_000,
            Calibration => 500,
        };
        let theta = match kind {
            DeMatch => Some(0.1),
            EntropyIdentity => Some(0.3),
            _ => None,
        };
        Self {
            experiment: kind,
            model: default_model(),
            alpha: 0.5,
            gamma: 2.0,
            sizes,
            epsilon: 0.3,
            theta,
            k: 2,
            replicas,
            seed: 1,
            output: None,
            radii: if kind == GraphStats { vec![1, 2] } else { Vec::new() },
            forest_only: false,
            delta_theta: 0.05,
            nodes_per_graph: 500,
            population: 10_000,
            generations: 30,
            stationary_tol: None,
            bp: BpSettings::default(),
            tail_sizes: vec![1, 2, 5, 10, 20, 50],
            bins: 10,
        }
    }

    /// Parses a config document. `kind` (from the CLI subcommand) wins when
    /// the document has no `experiment` field and must agree otherwise.
    /// A string `model` is a path resolved against `base_dir`.
    pub fn from_json(doc: &Value, kind: Option<ExperimentKind>, base_dir: Option<&Path>) -> Result<Self> {
        let map = doc.as_object().ok_or_else(|| Error::config("<root>", "expected a JSON object"))?;
        if let Some(unknown) = map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(Error::config(unknown.clone(), "unknown field"));
        }
        let f = Fields { map };
        let named = match f.str("experiment")? {
            Some(name) => Some(ExperimentKind::from_name(name).ok_or_else(|| Error::config("experiment", format!("unknown experiment `{name}`")))?),
            None => None,
        };
        let kind = match (named, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::config("experiment", format!("config is for `{}` but `{}` was requested", a.name(), b.name())))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::config("experiment", "missing")),
        };
        let mut cfg = Self::defaults(kind);
        if let Some(model) = map.get("model") {
            cfg.model = load_model(model, base_dir)?;
        }
        if let Some(v) = f.f64("alpha")? {
            cfg.alpha = v;
        }
        if let Some(v) = f.f64("gamma")? {
            cfg.gamma = v;
        }
        if let Some(v) = f.usize_list("sizes")? {
            cfg.sizes = v;
        }
        if let Some(v) = f.f64("epsilon")? {
            cfg.epsilon = v;
        }
        if map.contains_key("theta") {
            cfg.theta = f.f64("theta")?;
        }
        if let Some(v) = f.usize("k")? {
            cfg.k = v;
        }
        if let Some(v) = f.usize("replicas")? {
            cfg.replicas = v;
        }
        if let Some(v) = f.u64("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = f.str("output")? {
            cfg.output = Some(match base_dir {
                Some(dir) if Path::new(v).is_relative() => dir.join(v),
                _ => PathBuf::from(v),
            });
        }
        if let Some(v) = f.usize_list("radii")? {
            cfg.radii = v;
        }
        if let Some(v) = f.bool("forest_only")? {
            cfg.forest_only = v;
        }
        if let Some(v) = f.f64("delta_theta")? {
            cfg.delta_theta = v;
        }
        if let Some(v) = f.usize("nodes_per_graph")? {
            cfg.nodes_per_graph = v;
        }
        if let Some(v) = f.usize("population")? {
            cfg.population = v;
        }
        if let Some(v) = f.usize("generations")? {
            cfg.generations = v;
        }
        cfg.stationary_tol = f.f64("stationary_tol")?.or(cfg.stationary_tol);
        if let Some(bp) = map.get("bp") {
            cfg.bp = parse_bp(bp)?;
        }
        if let Some(v) = f.usize_list("tail_sizes")? {
            cfg.tail_sizes = v;
        }
        if let Some(v) = f.usize("bins")? {
            cfg.bins = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| Error::config("<root>", format!("invalid JSON: {e}")))?;
        Self::from_json(&doc, kind, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("epsilon", "must lie in (0, 1]"));
        }
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("theta", "must lie in [0, 1]"));
            }
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha", "must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::config("gamma", "must be nonnegative"));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::config("sizes", "must be a nonempty list of positive sizes"));
        }
        for (field, value) in [
            ("k", self.k),
            ("replicas", self.replicas),
            ("nodes_per_graph", self.nodes_per_graph),
            ("population", self.population),
            ("bins", self.bins),
        ] {
            if value == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if !(self.delta_theta > 0.0) {
            return Err(Error::config("delta_theta", "must be positive"));
        }
        if let Some(tol) = self.stationary_tol {
            if !(tol >= 0.0) {
                return Err(Error::config("stationary_tol", "must be nonnegative"));
            }
        }
        if !(0.0..1.0).contains(&self.bp.damping) {
            return Err(Error::config("bp.damping", "must lie in [0, 1)"));
        }
        if !(self.bp.tol >= 0.0) || self.bp.max_iter == 0 {
            return Err(Error::config("bp", "tol must be nonnegative and max_iter at least 1"));
        }
        Ok(())
    }

    /// The resolved configuration with the model inlined; parsing it back
    /// gives an identical configuration.
    pub fn to_json(&self) -> Value {
        json!({
            "experiment": self.experiment.name(),
            "model": model_to_json(&self.model),
            "alpha": self.alpha,
            "gamma": self.gamma,
            "sizes": self.sizes,
            "epsilon": self.epsilon,
            "theta": self.theta,
            "k": self.k,
            "replicas": self.replicas,
            "seed": self.seed,
            "output": self.output.as_ref().map(|p| p.display().to_string()),
            "radii": self.radii,
            "forest_only": self.forest_only,
            "delta_theta": self.delta_theta,
            "nodes_per_graph": self.nodes_per_graph,
            "population": self.population,
            "generations": self.generations,
            "stationary_tol": self.stationary_tol,
            "bp": {"damping": self.bp.damping, "tol": self.bp.tol, "max_iter": self.bp.max_iter},
            "tail_sizes": self.tail_sizes,
            "bins": self.bins,
        })
    }
}

fn load_model(value: &Value, base_dir: Option<&Path>) -> Result<ObservationModel> {
    let doc = match value {
        Value::String(path) => {
            let path = match base_dir {
                Some(dir) if Path::new(path).is_relative() => dir.join(path),
                _ => PathBuf::from(path),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::config("model", format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::config("model", format!("invalid JSON in {}: {e}", path.display())))?
        }
        Value::Object(_) => value.clone(),
        _ => return Err(Error::config("model", "expected a model object or a path")),
    };
    model_from_json(&doc).map_err(|e| Error::config("model", e.to_string()))
}

fn parse_bp(value: &Value) -> Result<BpSettings> {
    let map = value.as_object().ok_or_else(|| Error::config("bp", "expected an object"))?;
    if let Some(unknown) = map.keys().find(|k| !["damping", "tol", "max_iter"].contains(&k.as_str())) {
        return Err(Error::config(format!("bp.{unknown}"), "unknown field"));
    }
    let mut out = BpSettings::default();
    let num = |key: &str| -> Result<Option<f64>> {
        match map.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::config(format!("bp.{key}"), "expected a number")),
        }
    };
    if let Some(v) = num("damping")? {
        out.damping = v;
    }
    if let Some(v) = num("tol")? {
        out.tol = v;
    }
    if let Some(v) = map.get("max_iter") {
        out.max_iter = v.as_u64().ok_or_else(|| Error::config("bp.max_iter", "expected a positive integer"))? as usize;
    }
    Ok(out)
}
