//! Population dynamics for the density-evolution recursion.
//!
//! A population is a sample of `(x, nu)` pairs: a hidden symbol and the
//! posterior message a variable with that symbol receives on the limiting
//! tree. One generation builds every new element from a Galton-Watson star
//! whose incoming slots are resampled from the previous generation, so the
//! observations on the star are drawn from the stored true symbols.

use std::fmt::Write as _;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{local_update_raw, var_weights, KernelCache};
use crate::error::{Error, Result};
use crate::model::ObservationModel;
use crate::rng::{categorical, poisson, seeded, stream, SimRng};
use crate::stats::{entropy, ks_statistic};

/// Number of histogram bins per symbol in a [`PopulationSummary`].
pub const HIST_BINS: usize = 100;

/// Tree law of the limiting neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0 && self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma and alpha must be finite and nonnegative (gamma = {}, alpha = {})",
                self.gamma, self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    q: usize,
    x: Vec<usize>,
    /// Row-major `len x q` messages.
    msgs: Vec<f64>,
    pub params: DeParams,
    pub theta: f64,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn symbol(&self, k: usize) -> usize {
        self.x[k]
    }

    pub fn message(&self, k: usize) -> &[f64] {
        &self.msgs[k * self.q..(k + 1) * self.q]
    }

    /// Every element's `nu(xi)`.
    pub fn component(&self, xi: usize) -> Vec<f64> {
        self.msgs.chunks(self.q).map(|m| m[xi]).collect()
    }

    /// Snapshot with columns `x,nu_0,...,nu_{q-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for xi in 0..self.q {
            let _ = write!(out, ",nu_{xi}");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{}", self.x[k]);
            for v in self.message(k) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    fn from_elems(q: usize, elems: Vec<(usize, Vec<f64>)>, params: DeParams, theta: f64, generation: usize) -> Self {
        let mut x = Vec::with_capacity(elems.len());
        let mut msgs = Vec::with_capacity(elems.len() * q);
        for (xi, m) in elems {
            x.push(xi);
            msgs.extend(m);
        }
        Self { q, x, msgs, params, theta, generation }
    }
}

/// Draws the root's side observation and reveal and returns `(z, reveal)`.
fn root_observations(model: &ObservationModel, x: usize, rng: &mut SimRng) -> (usize, Option<usize>) {
    let z = categorical(rng, model.side_kernel().dist(&[x]));
    let revealed = rng.random::<f64>() < model.theta();
    (z, revealed.then_some(x))
}

fn check_inputs(params: &DeParams, n_pop: usize) -> Result<()> {
    params.validate()?;
    if n_pop == 0 {
        return Err(Error::InvalidParams("population size must be at least 1".into()));
    }
    Ok(())
}

/// Generation 0: every element is a zero-factor posterior
/// `nu ∝ p R^theta(z|.)` for its own `x`, `z` and reveal.
pub fn de_init(model: &ObservationModel, params: DeParams, n_pop: usize, seed: u64) -> Result<Population> {
    check_inputs(&params, n_pop)?;
    let prior = model.prior().probs();
    let elems = (0..n_pop)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let x = categorical(&mut rng, prior);
            let (z, reveal) = root_observations(model, x, &mut rng);
            let w = var_weights(model, z, reveal);
            let total: f64 = w.iter().sum();
            (x, w.into_iter().map(|v| v / total).collect())
        })
        .collect();
    Ok(Population::from_elems(model.q(), elems, params, model.theta(), 0))
}

/// One generation of the recursion with a fresh population of the same size.
pub fn de_step(pop: &Population, model: &ObservationModel, seed: u64) -> Result<Population> {
    if pop.q != model.q() {
        return Err(Error::SizeMismatch(model.q(), pop.q));
    }
    let prior = model.prior().probs();
    let mean_factors = pop.params.gamma * pop.params.alpha;
    let elems: Vec<(usize, Vec<f64>)> = (0..pop.len())
        .into_par_iter()
        .map_init(
            || KernelCache::new(model),
            |cache, k| {
                let mut rng = stream(seed, k as u64);
                let x0 = categorical(&mut rng, prior);
                let l = poisson(&mut rng, mean_factors);
                let mut picks = Vec::with_capacity(l);
                for _ in 0..l {
                    let slots = poisson(&mut rng, pop.params.gamma);
                    let idx: Vec<usize> = (0..slots).map(|_| rng.random_range(0..pop.len())).collect();
                    let mut inputs = Vec::with_capacity(slots + 1);
                    inputs.push(x0);
                    inputs.extend(idx.iter().map(|&j| pop.x[j]));
                    let y = categorical(&mut rng, model.factor_kernel(slots + 1)?.dist(&inputs));
                    picks.push((y, idx));
                }
                let (z, reveal) = root_observations(model, x0, &mut rng);
                let factors: Vec<(usize, Vec<&[f64]>)> =
                    picks.iter().map(|(y, idx)| (*y, idx.iter().map(|&j| pop.message(j)).collect())).collect();
                Ok((x0, local_update_raw(cache, z, reveal, &factors)?))
            },
        )
        .collect::<Result<_>>()?;
    Ok(Population::from_elems(pop.q, elems, pop.params, pop.theta, pop.generation + 1))
}

/// Summary functionals of a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub mean_message: Vec<f64>,
    pub mean_entropy: f64,
    /// Mean of `1 - nu(x)`, the TV distance to the point mass at the truth.
    pub error_proxy: f64,
    /// `histogram[xi][b]`: fraction of elements with `nu(xi)` in bin `b` of
    /// a uniform grid on `[0, 1]`.
    pub histogram: Vec<Vec<f64>>,
}

pub fn hist_bin(v: f64) -> usize {
    ((v * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

pub fn population_stats(pop: &Population) -> PopulationSummary {
    let n = pop.len() as f64;
    let q = pop.q;
    let mut mean_message = vec![0.0; q];
    let mut histogram = vec![vec![0.0; HIST_BINS]; q];
    let (mut h, mut err) = (0.0, 0.0);
    for k in 0..pop.len() {
        let m = pop.message(k);
        for xi in 0..q {
            mean_message[xi] += m[xi] / n;
            histogram[xi][hist_bin(m[xi])] += 1.0 / n;
        }
        h += entropy(m);
        err += 1.0 - m[pop.x[k]];
    }
    PopulationSummary { mean_message, mean_entropy: h / n, error_proxy: err / n, histogram }
}

/// Largest Kolmogorov-Smirnov distance between the empirical laws of
/// `nu(xi)` over symbols `xi`.
pub fn population_distance(a: &Population, b: &Population) -> Result<f64> {
    if a.q != b.q {
        return Err(Error::SizeMismatch(a.q, b.q));
    }
    Ok((0..a.q).map(|xi| ks_statistic(&a.component(xi), &b.component(xi))).fold(0.0, f64::max))
}

/// Stationarity threshold used when none is given: about twice the typical
/// two-sample KS fluctuation at this population size.
pub fn default_stationary_tol(n_pop: usize) -> f64 {
    2.0 * (2.0 / n_pop as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub generation: usize,
    pub summary: PopulationSummary,
    /// Distance to the previous generation; absent for generation 0.
    pub ks_to_prev: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DeRun {
    pub population: Population,
    pub history: Vec<HistoryRow>,
    /// First generation `g` with the distances into `g`, `g+1` and `g+2`
    /// all at most the tolerance.
    pub stationary_at: Option<usize>,
}

impl DeRun {
    /// History CSV with columns `generation,mean_entropy,error_proxy,ks_to_prev`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,mean_entropy,error_proxy,ks_to_prev\n");
        for row in &self.history {
            let ks = row.ks_to_prev.map(|d| format!("{d:.16e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.16e},{:.16e},{ks}", row.generation, row.summary.mean_entropy, row.summary.error_proxy);
        }
        out
    }
}

/// Runs `iters` generations from [`de_init`]. Generation seeds are drawn
/// from a ChaCha stream keyed by `seed`.
pub fn de_run(model: &ObservationModel, params: DeParams, n_pop: usize, iters: usize, seed: u64, tol: Option<f64>) -> Result<DeRun> {
    let tol = tol.unwrap_or_else(|| default_stationary_tol(n_pop));
    let mut master = seeded(seed);
    let mut pop = de_init(model, params, n_pop, master.next_u64())?;
    let mut history = vec![HistoryRow { generation: 0, summary: population_stats(&pop), ks_to_prev: None }];
    let mut run = 0usize;
    let mut stationary_at = None;
    for g in 1..=iters {
        let next = de_step(&pop, model, master.next_u64())?;
        let d = population_distance(&pop, &next)?;
        history.push(HistoryRow { generation: g, summary: population_stats(&next), ks_to_prev: Some(d) });
        run = if d <= tol { run + 1 } else { 0 };
        if run == 3 && stationary_at.is_none() {
            stationary_at = Some(g - 2);
        }
        pop = next;
    }
    Ok(DeRun { population: pop, history, stationary_at })
}
