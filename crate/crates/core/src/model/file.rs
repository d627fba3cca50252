//! JSON model descriptions.
//!
//! ```json
//! {"q": 2, "prior": [0.9, 0.1], "theta": 0.1,
//!  "R": [[0.8, 0.2], [0.2, 0.8]],
//!  "Q": {"2": [[[1, 0], [0, 0]], [[0, 1], [1, 1]]]}}
//! ```
//! Tables are nested arrays with the output index outermost, then one level
//! per input. `Q` may instead be `{"builtin": name, "params": {...}}`, and
//! the whole document may be a bare `{"builtin": name, "params": {...}}`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::{builtin_model, trivial_side_kernel, DiscreteKernel, FactorKernels, ObservationModel, Prior};
use crate::error::{Error, Result};

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("field `{field}`: {msg}"))
}

fn obj<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| invalid(field, "expected an object"))
}

fn check_keys(map: &Map<String, Value>, field: &str, known: &[&str]) -> Result<()> {
    match map.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(invalid(field, format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}

fn parse_params(v: Option<&Value>, field: &str) -> Result<BTreeMap<String, f64>> {
    let Some(v) = v else { return Ok(BTreeMap::new()) };
    obj(v, field)?
        .iter()
        .map(|(k, val)| {
            val.as_f64()
                .map(|f| (k.clone(), f))
                .ok_or_else(|| invalid(&format!("{field}.{k}"), "expected a number"))
        })
        .collect()
}

/// Validates a JSON model description and builds the model. The error names
/// the first violated constraint.
pub fn validate_model(doc: &Value) -> Result<ObservationModel> {
    model_from_json(doc)
}

pub fn model_from_json(doc: &Value) -> Result<ObservationModel> {
    let map = obj(doc, "model")?;
    if map.contains_key("builtin") {
        check_keys(map, "model", &["builtin", "params"])?;
        let name = map["builtin"].as_str().ok_or_else(|| invalid("builtin", "expected a string"))?;
        return builtin_model(name, &parse_params(map.get("params"), "params")?);
    }
    check_keys(map, "model", &["q", "prior", "theta", "R", "Q"])?;
    let q = map
        .get("q")
        .and_then(Value::as_u64)
        .ok_or_else(|| invalid("q", "expected a positive integer"))? as usize;
    let prior_vals = map
        .get("prior")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("prior", "expected an array"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| invalid("prior", "expected numbers")))
        .collect::<Result<Vec<f64>>>()?;
    if prior_vals.len() != q {
        return Err(invalid("prior", format!("has {} entries, q = {q}", prior_vals.len())));
    }
    let prior = Prior::new(prior_vals)?;
    let theta = match map.get("theta") {
        None => 0.0,
        Some(v) => v.as_f64().ok_or_else(|| invalid("theta", "expected a number"))?,
    };
    let side = match map.get("R") {
        None => trivial_side_kernel(q),
        Some(v) => parse_table(v, q, 1, "R")?,
    };
    let q_spec = obj(map.get("Q").ok_or_else(|| invalid("Q", "missing"))?, "Q")?;
    if q_spec.contains_key("builtin") {
        check_keys(q_spec, "Q", &["builtin", "params"])?;
        let name = q_spec["builtin"].as_str().ok_or_else(|| invalid("Q.builtin", "expected a string"))?;
        let base = builtin_model(name, &parse_params(q_spec.get("params"), "Q.params")?)?;
        let kind = base.builtin_kind().cloned().expect("built-ins are generated families");
        let model = ObservationModel::generated(prior, side, kind, theta)?;
        return Ok(if base.non_soft_flag() { model.flag_non_soft() } else { model });
    }
    let mut tables = BTreeMap::new();
    for (key, table) in q_spec {
        let k: usize = key.parse().map_err(|_| invalid("Q", format!("arity key `{key}` is not an integer")))?;
        tables.insert(k, parse_table(table, q, k, &format!("Q.{key}"))?);
    }
    ObservationModel::new(prior, side, FactorKernels::Tables(tables), theta)
}

fn parse_table(v: &Value, q: usize, arity: usize, field: &str) -> Result<DiscreteKernel> {
    let outer = v.as_array().ok_or_else(|| invalid(field, "expected nested arrays"))?;
    let s = outer.len();
    if s == 0 {
        return Err(invalid(field, "empty output alphabet"));
    }
    let mut flat = Vec::with_capacity(s * q.pow(arity as u32));
    for row in outer {
        flatten(row, q, arity, field, &mut flat)?;
    }
    DiscreteKernel::from_full_table(q, arity, s, &flat).map_err(|e| match e {
        Error::Validation(msg) => invalid(field, msg),
        other => other,
    })
}

fn flatten(v: &Value, q: usize, depth: usize, field: &str, out: &mut Vec<f64>) -> Result<()> {
    if depth == 0 {
        out.push(v.as_f64().ok_or_else(|| invalid(field, "expected a number at the innermost level"))?);
        return Ok(());
    }
    let arr = v.as_array().ok_or_else(|| invalid(field, "table nesting is shallower than the arity"))?;
    if arr.len() != q {
        return Err(invalid(field, format!("input level has {} entries, expected q = {q}", arr.len())));
    }
    arr.iter().try_for_each(|inner| flatten(inner, q, depth - 1, field, out))
}

fn nest(flat: &[f64], q: usize, depth: usize) -> Value {
    if depth == 0 {
        return json!(flat[0]);
    }
    let stride = flat.len() / q;
    Value::Array((0..q).map(|x| nest(&flat[x * stride..(x + 1) * stride], q, depth - 1)).collect())
}

fn table_json(kernel: &DiscreteKernel) -> Value {
    let flat = kernel.to_full_table();
    let per_output = flat.len() / kernel.output_alphabet();
    Value::Array(
        flat.chunks(per_output)
            .map(|chunk| nest(chunk, kernel.input_alphabet(), kernel.arity()))
            .collect(),
    )
}

/// Serializes a model to the explicit JSON form.
pub fn model_to_json(model: &ObservationModel) -> Value {
    let q_field = match (model.builtin_kind(), model.factor_tables()) {
        (Some(kind), _) => {
            let name = if model.non_soft_flag() { "mod2_storage" } else { kind.name() };
            let params = if model.non_soft_flag() { BTreeMap::new() } else { kind.params() };
            json!({"builtin": name, "params": params})
        }
        (None, Some(tables)) => Value::Object(tables.iter().map(|(k, t)| (k.to_string(), table_json(t))).collect()),
        (None, None) => unreachable!("a model has either tables or a generated family"),
    };
    json!({
        "q": model.q(),
        "prior": model.prior().probs(),
        "theta": model.theta(),
        "R": table_json(model.side_kernel()),
        "Q": q_field,
    })
}
