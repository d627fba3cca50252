//! Built-in observation models: noisy group testing, parity checks through a
//! BSC (LDGM codes) and noiseless mod-2 storage.

use std::collections::BTreeMap;

use super::{bsc_side_kernel, trivial_side_kernel, DiscreteKernel, ObservationModel, Prior};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinKind {
    /// `Y_a = OR(x_da)`; a positive pool reads 0 with probability
    /// `false_negative`, a negative pool reads 1 with probability `false_positive`.
    GroupTesting { false_negative: f64, false_positive: f64 },
    /// `Y_a = XOR(x_da)` flipped with probability `flip`.
    ParityBsc { flip: f64 },
}

impl BuiltinKind {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinKind::GroupTesting { .. } => "group_testing",
            BuiltinKind::ParityBsc { .. } => "parity_bsc",
        }
    }

    pub(crate) fn kernel(&self, k: usize) -> Result<DiscreteKernel> {
        match *self {
            BuiltinKind::GroupTesting { false_negative, false_positive } => DiscreteKernel::from_fn(2, k, 2, |x| {
                let positive = if x.contains(&1) { 1.0 - false_negative } else { false_positive };
                vec![1.0 - positive, positive]
            }),
            BuiltinKind::ParityBsc { flip } => DiscreteKernel::from_fn(2, k, 2, |x| {
                let parity = x.iter().filter(|&&v| v == 1).count() % 2;
                let one = if parity == 1 { 1.0 - flip } else { flip };
                vec![1.0 - one, one]
            }),
        }
    }

    pub(crate) fn params(&self) -> BTreeMap<String, f64> {
        match *self {
            BuiltinKind::GroupTesting { false_negative, false_positive } => {
                [("f".to_string(), false_negative), ("fp".to_string(), false_positive)].into_iter().collect()
            }
            BuiltinKind::ParityBsc { flip } => [("p".to_string(), flip)].into_iter().collect(),
        }
    }
}

fn take(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    let v = match (params.get(key), default) {
        (Some(&v), _) => v,
        (None, Some(d)) => d,
        (None, None) => return Err(Error::InvalidParams(format!("missing parameter `{key}`"))),
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParams(format!("parameter `{key}` = {v} outside [0, 1]")));
    }
    Ok(v)
}

fn check_known(name: &str, params: &BTreeMap<String, f64>, known: &[&str]) -> Result<()> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParams(format!("unknown parameter `{k}` for {name}"))),
        None => Ok(()),
    }
}

/// Builds a binary built-in model.
///
/// Common parameters: `p1` (prior mass of symbol 1), `r` (BSC side channel
/// flip; omitted means no side information), `theta`.
/// - `group_testing`: `f` false-negative rate (default 0), `fp`
///   false-positive rate (default `f`); `p1` defaults to 0.1.
/// - `parity_bsc`: required flip `p`; `p1` defaults to 0.5.
/// - `mod2_storage`: parity with `p = 0`, flagged non-soft.
pub fn builtin_model(name: &str, params: &BTreeMap<String, f64>) -> Result<ObservationModel> {
    let (kind, p1_default, non_soft) = match name {
        "group_testing" => {
            check_known(name, params, &["p1", "f", "fp", "r", "theta"])?;
            let f = take(params, "f", Some(0.0))?;
            let fp = take(params, "fp", Some(f))?;
            (BuiltinKind::GroupTesting { false_negative: f, false_positive: fp }, 0.1, false)
        }
        "parity_bsc" => {
            check_known(name, params, &["p1", "p", "r", "theta"])?;
            (BuiltinKind::ParityBsc { flip: take(params, "p", None)? }, 0.5, false)
        }
        "mod2_storage" => {
            check_known(name, params, &["p1", "r", "theta"])?;
            (BuiltinKind::ParityBsc { flip: 0.0 }, 0.5, true)
        }
        other => return Err(Error::InvalidParams(format!("unknown built-in model `{other}`"))),
    };
    let prior = Prior::bernoulli(take(params, "p1", Some(p1_default))?)?;
    let side = match params.get("r") {
        Some(_) => bsc_side_kernel(take(params, "r", None)?)?,
        None => trivial_side_kernel(2),
    };
    let theta = take(params, "theta", Some(0.0))?;
    let model = ObservationModel::generated(prior, side, kind, theta)?;
    Ok(if non_soft { model.flag_non_soft() } else { model })
}
