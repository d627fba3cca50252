use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-10;

/// A point of the probability simplex over the hidden alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marginal(Vec<f64>);

impl Marginal {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Validation(format!("not a probability vector: {probs:?}")));
        }
        Ok(Self(probs))
    }

    /// Normalizes nonnegative weights. `None` if they sum to zero.
    pub fn from_weights(mut weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        for w in &mut weights {
            *w /= total;
        }
        Some(Self(weights))
    }

    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }

    pub fn point_mass(q: usize, at: usize) -> Self {
        let mut v = vec![0.0; q];
        v[at] = 1.0;
        Self(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn entropy(&self) -> f64 {
        crate::stats::entropy(&self.0)
    }

    pub fn tv(&self, other: &Marginal) -> f64 {
        tv_unchecked(&self.0, &other.0)
    }

    /// `Some(x)` when all mass sits on one symbol.
    pub fn as_point_mass(&self) -> Option<usize> {
        self.0.iter().position(|&p| p == 1.0)
    }
}

impl std::ops::Index<usize> for Marginal {
    type Output = f64;

    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

pub(crate) fn tv_unchecked(p: &[f64], r: &[f64]) -> f64 {
    0.5 * p.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total variation distance `(1/2) sum |p - r|`.
pub fn tv(p: &[f64], r: &[f64]) -> Result<f64> {
    if p.len() != r.len() {
        return Err(Error::SizeMismatch(p.len(), r.len()));
    }
    Ok(tv_unchecked(p, r))
}

/// Kullback-Leibler divergence in nats; infinite when `r` misses mass of `p`.
pub fn kl_divergence(p: &[f64], r: &[f64]) -> f64 {
    p.iter()
        .zip(r)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

/// Posterior law of an ordered set of variables. Index digits follow the
/// order of `vars`, first variable most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub vars: Vec<usize>,
    pub q: usize,
    pub probs: Vec<f64>,
}

impl JointTable {
    /// Marginal of the `k`-th listed variable.
    pub fn marginal(&self, k: usize) -> Marginal {
        let stride = self.q.pow((self.vars.len() - 1 - k) as u32);
        let mut out = vec![0.0; self.q];
        for (idx, p) in self.probs.iter().enumerate() {
            out[(idx / stride) % self.q] += p;
        }
        Marginal(out)
    }

    /// Product of the single-variable marginals, laid out like `probs`.
    pub fn product_of_marginals(&self) -> Vec<f64> {
        let margs: Vec<Marginal> = (0..self.vars.len()).map(|k| self.marginal(k)).collect();
        let mut out = vec![1.0; self.probs.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let mut rest = idx;
            for m in margs.iter().rev() {
                *slot *= m[rest % self.q];
                rest /= self.q;
            }
        }
        out
    }

    /// TV distance between the joint and the product of its marginals.
    pub fn factorization_gap(&self) -> f64 {
        tv_unchecked(&self.probs, &self.product_of_marginals())
    }

    /// Mutual information of a two-variable table, in nats.
    pub fn mutual_information(&self) -> f64 {
        assert_eq!(self.vars.len(), 2, "mutual information needs a pair table");
        kl_divergence(&self.probs, &self.product_of_marginals())
    }
}
