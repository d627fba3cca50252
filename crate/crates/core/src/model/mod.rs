//! Finite-alphabet observation models.

mod builtin;
mod file;
mod kernel;
mod world;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub use builtin::{builtin_model, BuiltinKind};
pub use file::{model_from_json, model_to_json, validate_model};
pub use kernel::{multiset_count, softness_constant, DiscreteKernel};
pub use world::{sample_crn_world, sample_world, sample_world_with, CrnWorld, World};

const PRIOR_TOL: f64 = 1e-12;

/// Largest factor arity a generated kernel family will produce.
pub const MAX_ARITY: usize = 64;

/// Arities inspected when deciding whether a generated family is soft.
pub const SOFTNESS_CHECK_ARITY: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    probs: Vec<f64>,
}

impl Prior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Validation(format!("prior needs at least 2 symbols, got {}", probs.len())));
        }
        if let Some((x, p)) = probs.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
            return Err(Error::Validation(format!("prior entry {x} is negative or NaN ({p})")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(Error::Validation(format!("prior sums to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn bernoulli(p1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(Error::InvalidParams(format!("Bernoulli parameter {p1} outside [0, 1]")));
        }
        Self::new(vec![1.0 - p1, p1])
    }

    pub fn q(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy(&self) -> f64 {
        crate::stats::entropy(&self.probs)
    }
}

/// Kernels for function nodes, indexed by arity.
#[derive(Debug, Clone)]
pub(crate) enum FactorKernels {
    Tables(BTreeMap<usize, DiscreteKernel>),
    Generated {
        kind: BuiltinKind,
        cache: Vec<OnceLock<DiscreteKernel>>,
    },
}

/// Prior, side kernel `R`, symmetric factor kernels `Q^(k)` and the reveal
/// probability `theta`. Immutable once built; share freely across threads.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    prior: Prior,
    side: DiscreteKernel,
    factors: FactorKernels,
    theta: f64,
    /// Set for built-ins that are knowingly non-soft (noiseless parity).
    non_soft_flag: bool,
    /// Constant kernel used for degree-0 factors when no table is given.
    constant: DiscreteKernel,
}

impl ObservationModel {
    pub(crate) fn new(prior: Prior, side: DiscreteKernel, factors: FactorKernels, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Validation(format!("theta = {theta} outside [0, 1]")));
        }
        let q = prior.q();
        let constant = DiscreteKernel::from_fn(q, 0, 1, |_| vec![1.0])?;
        let model = Self { prior, side, factors, theta, non_soft_flag: false, constant };
        model.validate()?;
        Ok(model)
    }

    /// Model with explicit factor tables.
    pub fn from_tables(prior: Prior, side: DiscreteKernel, tables: BTreeMap<usize, DiscreteKernel>, theta: f64) -> Result<Self> {
        Self::new(prior, side, FactorKernels::Tables(tables), theta)
    }

    pub(crate) fn generated(prior: Prior, side: DiscreteKernel, kind: BuiltinKind, theta: f64) -> Result<Self> {
        let cache = (0..=MAX_ARITY).map(|_| OnceLock::new()).collect();
        Self::new(prior, side, FactorKernels::Generated { kind, cache }, theta)
    }

    pub(crate) fn flag_non_soft(mut self) -> Self {
        self.non_soft_flag = true;
        self
    }

    /// Re-checks that every kernel shares the prior's alphabet, has
    /// stochastic rows and carries the arity it is filed under.
    pub fn validate(&self) -> Result<()> {
        let q = self.prior.q();
        if self.side.arity() != 1 || self.side.input_alphabet() != q {
            return Err(Error::Validation(format!(
                "R must be an arity-1 kernel over {q} symbols (got arity {}, alphabet {})",
                self.side.arity(),
                self.side.input_alphabet()
            )));
        }
        if let FactorKernels::Tables(tables) = &self.factors {
            for (&k, kernel) in tables {
                if kernel.arity() != k || kernel.input_alphabet() != q {
                    return Err(Error::Validation(format!(
                        "Q^({k}) has arity {} over {} symbols, expected arity {k} over {q}",
                        kernel.arity(),
                        kernel.input_alphabet()
                    )));
                }
            }
        }
        if let FactorKernels::Generated { kind, .. } = &self.factors {
            if q != 2 {
                return Err(Error::Validation(format!("built-in {} requires a binary alphabet", kind.name())));
            }
        }
        Ok(())
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn q(&self) -> usize {
        self.prior.q()
    }

    pub fn side_kernel(&self) -> &DiscreteKernel {
        &self.side
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Validation(format!("theta = {theta} outside [0, 1]")));
        }
        let mut m = self.clone();
        m.theta = theta;
        Ok(m)
    }

    pub fn builtin_kind(&self) -> Option<&BuiltinKind> {
        match &self.factors {
            FactorKernels::Generated { kind, .. } => Some(kind),
            FactorKernels::Tables(_) => None,
        }
    }

    pub(crate) fn factor_tables(&self) -> Option<&BTreeMap<usize, DiscreteKernel>> {
        match &self.factors {
            FactorKernels::Tables(t) => Some(t),
            FactorKernels::Generated { .. } => None,
        }
    }

    /// Kernel `Q^(k)`. Degree-0 factors fall back to a constant output when
    /// no table is provided.
    pub fn factor_kernel(&self, k: usize) -> Result<&DiscreteKernel> {
        match &self.factors {
            FactorKernels::Tables(tables) => match tables.get(&k) {
                Some(kernel) => Ok(kernel),
                None if k == 0 => Ok(&self.constant),
                None => Err(Error::MissingArity(k)),
            },
            FactorKernels::Generated { kind, cache } => {
                let slot = cache.get(k).ok_or(Error::MissingArity(k))?;
                if let Some(kernel) = slot.get() {
                    return Ok(kernel);
                }
                let kernel = kind.kernel(k)?;
                Ok(slot.get_or_init(|| kernel))
            }
        }
    }

    /// True when `R` and every `Q^(k)`, `k >= 1`, have a finite softness
    /// constant (generated families are checked up to
    /// [`SOFTNESS_CHECK_ARITY`]). Knowingly non-soft built-ins are never soft.
    pub fn is_soft(&self) -> bool {
        if self.non_soft_flag || softness_constant(&self.side).is_none() {
            return false;
        }
        match &self.factors {
            FactorKernels::Tables(tables) => tables
                .iter()
                .filter(|(&k, _)| k >= 1)
                .all(|(_, kernel)| softness_constant(kernel).is_some()),
            FactorKernels::Generated { .. } => (1..=SOFTNESS_CHECK_ARITY)
                .all(|k| self.factor_kernel(k).map(|kr| softness_constant(kr).is_some()).unwrap_or(false)),
        }
    }

    pub fn non_soft_flag(&self) -> bool {
        self.non_soft_flag
    }

    /// Refuses models without soft noise.
    pub fn require_soft(&self) -> Result<()> {
        if self.is_soft() {
            Ok(())
        } else {
            Err(Error::NotSoft(
                "bound checks assume every observation kernel has strictly positive likelihoods".into(),
            ))
        }
    }
}

/// Trivial side kernel with a single output (no side information).
pub fn trivial_side_kernel(q: usize) -> DiscreteKernel {
    DiscreteKernel::from_fn(q, 1, 1, |_| vec![1.0]).expect("constant kernel is valid")
}

/// Binary symmetric side channel.
pub fn bsc_side_kernel(r: f64) -> Result<DiscreteKernel> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParams(format!("side channel flip {r} outside [0, 1]")));
    }
    DiscreteKernel::from_fn(2, 1, 2, |x| if x[0] == 0 { vec![1.0 - r, r] } else { vec![r, 1.0 - r] })
}
