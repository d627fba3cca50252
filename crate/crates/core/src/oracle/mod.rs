//! Brute-force ground truth for small systems.
//!
//! The full posterior `P{X = x | Y, Z(theta)}` is enumerated over all `q^n`
//! assignments with log-space weights
//! `sum_i [ln p(x_i) + ln R(z_i|x_i)] + sum_a ln Q(y_a|x_da)`, restricted to
//! assignments compatible with the revealed symbols, and normalized once
//! after subtracting the maximum. All information quantities are in nats.

mod marginal;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::FactorGraph;
use crate::model::{sample_crn_world, CrnWorld, ObservationModel, World};
use crate::rng::seeded;
use crate::stats::{entropy, Welford};

pub use marginal::{kl_divergence, tv, JointTable, Marginal};

/// Largest joint state space the oracle will enumerate.
pub const MAX_STATES: f64 = (1u64 << 26) as f64;

pub(crate) fn check_feasible(q: usize, vars: usize) -> Result<()> {
    let states = (q as f64).powi(vars as i32);
    if states > MAX_STATES {
        Err(Error::Infeasible { states, limit: MAX_STATES })
    } else {
        Ok(())
    }
}

/// Per-variable log weight `ln p(x) + ln R(z|x)`, `-inf` where the reveal
/// rules the symbol out.
pub(crate) fn var_log_weights(model: &ObservationModel, z: usize, reveal: Option<usize>) -> Vec<f64> {
    let prior = model.prior().probs();
    let side = model.side_kernel();
    (0..model.q())
        .map(|x| match reveal {
            Some(r) if r != x => f64::NEG_INFINITY,
            _ => (prior[x] * side.prob(z, &[x])).ln(),
        })
        .collect()
}

/// `ln Q(y | x_da)` for every local assignment of the factor's neighbours,
/// indexed with the first neighbour most significant.
pub(crate) fn factor_log_table(model: &ObservationModel, arity: usize, y: usize) -> Result<Vec<f64>> {
    let kernel = model.factor_kernel(arity)?;
    let q = model.q();
    let mut local = vec![0usize; arity];
    let len = q.pow(arity as u32);
    let mut out = Vec::with_capacity(len);
    for idx in 0..len {
        let mut rest = idx;
        for slot in local.iter_mut().rev() {
            *slot = rest % q;
            rest /= q;
        }
        out.push(kernel.prob(y, &local).ln());
    }
    Ok(out)
}

/// Normalized posterior over all `q^n` assignments (variable 0 most
/// significant).
#[derive(Debug, Clone)]
pub struct Posterior {
    n: usize,
    q: usize,
    probs: Vec<f64>,
}

impl Posterior {
    pub fn compute(g: &FactorGraph, model: &ObservationModel, world: &World) -> Result<Self> {
        let (n, q) = (g.n(), model.q());
        check_feasible(q, n)?;
        world.check(g, model)?;
        let var_lw: Vec<Vec<f64>> = (0..n).map(|i| var_log_weights(model, world.z[i], world.reveal[i])).collect();
        let fac_lw: Vec<Vec<f64>> = (0..g.m())
            .map(|a| factor_log_table(model, g.fac_neighbors(a).len(), world.y[a]))
            .collect::<Result<_>>()?;
        let states = q.pow(n as u32);
        let mut logw = Vec::with_capacity(states);
        let mut digits = vec![0usize; n];
        for idx in 0..states {
            let mut rest = idx;
            for d in digits.iter_mut().rev() {
                *d = rest % q;
                rest /= q;
            }
            let mut lw: f64 = (0..n).map(|i| var_lw[i][digits[i]]).sum();
            if lw > f64::NEG_INFINITY {
                for (a, table) in fac_lw.iter().enumerate() {
                    let local = g.fac_neighbors(a).iter().fold(0, |acc, &i| acc * q + digits[i]);
                    lw += table[local];
                }
            }
            logw.push(lw);
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ImpossibleWorld);
        }
        let mut probs: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(Self { n, q, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn digit(&self, idx: usize, i: usize) -> usize {
        (idx / self.q.pow((self.n - 1 - i) as u32)) % self.q
    }

    pub fn joint(&self, vars: &[usize]) -> Result<JointTable> {
        if let Some(&i) = vars.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange { kind: "variable", index: i, len: self.n });
        }
        let strides: Vec<usize> = vars.iter().map(|&i| self.q.pow((self.n - 1 - i) as u32)).collect();
        let mut out = vec![0.0; self.q.pow(vars.len() as u32)];
        for (idx, &p) in self.probs.iter().enumerate() {
            let local = strides.iter().fold(0, |acc, &s| acc * self.q + (idx / s) % self.q);
            out[local] += p;
        }
        Ok(JointTable { vars: vars.to_vec(), q: self.q, probs: out })
    }

    pub fn marginal(&self, i: usize) -> Marginal {
        let mut out = vec![0.0; self.q];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[self.digit(idx, i)] += p;
        }
        Marginal::new(out).expect("posterior is normalized")
    }

    pub fn marginals(&self) -> Vec<Marginal> {
        let mut out = vec![vec![0.0; self.q]; self.n];
        let mut digits = vec![0usize; self.n];
        for (idx, &p) in self.probs.iter().enumerate() {
            self.decode(idx, &mut digits);
            for (i, &d) in digits.iter().enumerate() {
                out[i][d] += p;
            }
        }
        out.into_iter().map(|v| Marginal::new(v).expect("posterior is normalized")).collect()
    }

    fn decode(&self, idx: usize, digits: &mut [usize]) {
        let mut rest = idx;
        for d in digits.iter_mut().rev() {
            *d = rest % self.q;
            rest /= self.q;
        }
    }

    /// All pair tables `P{X_i = a, X_j = b}` in one pass, as
    /// `pairs[i][j][a * q + b]` (the diagonal holds `P{X_i = a}` on `a == b`).
    pub fn pair_tables(&self) -> Vec<Vec<Vec<f64>>> {
        let (n, q) = (self.n, self.q);
        let mut acc = vec![vec![vec![0.0; q * q]; n]; n];
        let mut digits = vec![0usize; n];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.decode(idx, &mut digits);
            for i in 0..n {
                let row = &mut acc[i];
                let base = digits[i] * q;
                for j in 0..n {
                    row[j][base + digits[j]] += p;
                }
            }
        }
        acc
    }

    /// Entropy of the full posterior, `H(X | Y = y, Z(theta) = z)`.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

pub fn posterior_joint(g: &FactorGraph, model: &ObservationModel, world: &World, vars: &[usize]) -> Result<JointTable> {
    Posterior::compute(g, model, world)?.joint(vars)
}

/// TV distance between the joint posterior of `ids` and the product of
/// their marginals.
pub fn factorization_gap(g: &FactorGraph, model: &ObservationModel, world: &World, ids: &[usize]) -> Result<f64> {
    Ok(posterior_joint(g, model, world, ids)?.factorization_gap())
}

/// `I(X_i; X_j | Y = y, Z(theta) = z)` in nats.
pub fn conditional_mi(g: &FactorGraph, model: &ObservationModel, world: &World, i: usize, j: usize) -> Result<f64> {
    let post = Posterior::compute(g, model, world)?;
    Ok(pair_mutual_information(&post, i, j))
}

pub(crate) fn pair_mutual_information(post: &Posterior, i: usize, j: usize) -> f64 {
    if i == j {
        return post.marginal(i).entropy();
    }
    post.joint(&[i, j]).expect("ids checked").mutual_information()
}

/// Sum over all ordered pairs `(i, j)`, diagonal included, of the
/// conditional mutual information; the diagonal terms are the marginal
/// entropies.
pub fn mutual_information_sum(post: &Posterior) -> f64 {
    let q = post.q;
    let pairs = post.pair_tables();
    let mut total = 0.0;
    for i in 0..post.n {
        for j in 0..post.n {
            let joint = &pairs[i][j];
            if i == j {
                let diag: Vec<f64> = (0..q).map(|a| joint[a * q + a]).collect();
                total += entropy(&diag);
                continue;
            }
            let pi: Vec<f64> = (0..q).map(|a| (0..q).map(|b| joint[a * q + b]).sum()).collect();
            let pj: Vec<f64> = (0..q).map(|b| (0..q).map(|a| joint[a * q + b]).sum()).collect();
            let product: Vec<f64> = (0..q * q).map(|idx| pi[idx / q] * pj[idx % q]).collect();
            total += kl_divergence(joint, &product);
        }
    }
    total
}

/// Conditional variance of the overlap `Q(xi)` given the observations:
/// `(1/n^2) sum_{i,j} (P{X_i = xi, X_j = xi} - P{X_i = xi} P{X_j = xi})^2`.
pub fn overlap_variance(g: &FactorGraph, model: &ObservationModel, world: &World, xi: usize) -> Result<f64> {
    if xi >= model.q() {
        return Err(Error::IndexOutOfRange { kind: "symbol", index: xi, len: model.q() });
    }
    let post = Posterior::compute(g, model, world)?;
    Ok(overlap_variance_of(&post, xi))
}

pub(crate) fn overlap_variance_of(post: &Posterior, xi: usize) -> f64 {
    let (n, q) = (post.n, post.q);
    let pairs = post.pair_tables();
    let single: Vec<f64> = (0..n).map(|i| pairs[i][i][xi * q + xi]).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cov = pairs[i][j][xi * q + xi] - single[i] * single[j];
            total += cov * cov;
        }
    }
    total / (n * n) as f64
}

/// Monte-Carlo estimate of `H(X | Y, Z(theta))` for a fixed graph: the mean
/// over sampled worlds of the exact posterior entropy, with its standard
/// error.
pub fn conditional_entropy_mc(g: &FactorGraph, model: &ObservationModel, theta: f64, n_worlds: usize, seed: u64) -> Result<(f64, f64)> {
    if n_worlds < 2 {
        return Err(Error::InvalidParams("conditional entropy needs at least 2 worlds".into()));
    }
    let mut rng = seeded(seed);
    let worlds = sample_crn_worlds(g, model, n_worlds, &mut rng)?;
    let acc: Welford = conditional_entropy_crn(g, model, theta, &worlds)?.into_iter().collect();
    Ok((acc.mean(), acc.std_error()))
}

pub fn sample_crn_worlds<R: Rng + ?Sized>(g: &FactorGraph, model: &ObservationModel, count: usize, rng: &mut R) -> Result<Vec<CrnWorld>> {
    (0..count).map(|_| sample_crn_world(g, model, rng)).collect()
}

/// Per-world posterior entropies at reveal level `theta`, reusing the given
/// world draws (common random numbers across `theta`).
pub fn conditional_entropy_crn(g: &FactorGraph, model: &ObservationModel, theta: f64, worlds: &[CrnWorld]) -> Result<Vec<f64>> {
    worlds
        .iter()
        .map(|w| Ok(Posterior::compute(g, model, &w.at(theta))?.entropy()))
        .collect()
}

#[cfg(test)]
mod tests;
