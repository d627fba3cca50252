use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FactorGraph;
use crate::error::{Error, Result};
use crate::rng::{poisson, seeded};

/// Parameters of the `G(n, alpha n, gamma/n)` ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl EnsembleParams {
    pub fn new(n: usize, alpha: f64, gamma: f64) -> Result<Self> {
        let params = Self { n, alpha, gamma };
        params.validate()?;
        Ok(params)
    }

    /// Number of function nodes, `floor(alpha * n)`.
    pub fn m(&self) -> usize {
        (self.alpha * self.n as f64).floor() as usize
    }

    pub fn p_edge(&self) -> f64 {
        self.gamma / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.m() < 1 {
            return Err(Error::InvalidParams(format!(
                "floor(alpha * n) must be at least 1 (alpha = {}, n = {})",
                self.alpha, self.n
            )));
        }
        let p = self.p_edge();
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParams(format!("edge probability gamma/n = {p} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Samples `G(n, alpha n, gamma/n)`: every `(i, a)` pair is an edge
/// independently with probability `gamma/n`, drawn in row-major order from
/// one ChaCha8 stream.
pub fn sample_graph(params: &EnsembleParams, seed: u64) -> Result<FactorGraph> {
    params.validate()?;
    let mut rng = seeded(seed);
    Ok(sample_graph_with(params, &mut rng))
}

pub(crate) fn sample_graph_with<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> FactorGraph {
    let (n, m, p) = (params.n, params.m(), params.p_edge());
    let mut g = FactorGraph::empty(n, m);
    for i in 0..n {
        for a in 0..m {
            if rng.random::<f64>() < p {
                g.var_adj[i].push(a);
                g.fac_adj[a].push(i);
            }
        }
    }
    g
}

/// A sampled Galton-Watson tree rooted at variable 0.
#[derive(Debug, Clone)]
pub struct GwTree {
    pub graph: FactorGraph,
    pub root: usize,
    /// Generation of every variable node (root = 0).
    pub var_depth: Vec<usize>,
}

/// Samples the `t`-generation tree: every variable above the last
/// generation gets `Poisson(gamma * alpha)` function children, and every
/// function node gets `Poisson(gamma)` fresh variable children.
pub fn sample_gw_tree(gamma: f64, alpha: f64, depth: usize, seed: u64) -> Result<GwTree> {
    let mut rng = seeded(seed);
    sample_gw_tree_with(gamma, alpha, depth, &mut rng)
}

pub(crate) fn sample_gw_tree_with<R: Rng + ?Sized>(
    gamma: f64,
    alpha: f64,
    depth: usize,
    rng: &mut R,
) -> Result<GwTree> {
    if !(gamma.is_finite() && gamma >= 0.0 && alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "gamma and alpha must be finite and nonnegative (gamma = {gamma}, alpha = {alpha})"
        )));
    }
    let mut var_depth = vec![0usize];
    let mut edges = Vec::new();
    let mut m = 0usize;
    let mut frontier = vec![0usize];
    for generation in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let factors = poisson(rng, gamma * alpha);
            for _ in 0..factors {
                let a = m;
                m += 1;
                edges.push((v, a));
                let children = poisson(rng, gamma);
                for _ in 0..children {
                    let j = var_depth.len();
                    var_depth.push(generation + 1);
                    edges.push((j, a));
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    let graph = FactorGraph::from_edges(var_depth.len(), m, edges)?;
    Ok(GwTree { graph, root: 0, var_depth })
}
