//! Canonical shapes of tree-like neighbourhoods and their Galton-Watson
//! probabilities.
//!
//! Children are ordered by (subtree size, canonical code), so two balls get
//! the same [`Shape`] exactly when they are isomorphic as rooted trees.

use std::collections::BTreeMap;

use super::{neighborhood, FactorGraph};
use crate::error::Result;
use crate::stats::poisson_pmf;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Tree(ShapeVar),
    /// The ball contains a cycle.
    Cyclic,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeVar {
    pub factors: Vec<ShapeFac>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeFac {
    pub vars: Vec<ShapeVar>,
}

impl ShapeVar {
    pub fn leaf() -> Self {
        ShapeVar { factors: Vec::new() }
    }

    pub fn with(factors: Vec<ShapeFac>) -> Self {
        let mut v = ShapeVar { factors };
        v.factors.sort_by_cached_key(|f| (f.size(), f.code()));
        v
    }

    /// Variable plus function node count.
    pub fn size(&self) -> usize {
        1 + self.factors.iter().map(ShapeFac::size).sum::<usize>()
    }

    pub fn code(&self) -> String {
        let inner: String = self.factors.iter().map(ShapeFac::code).collect();
        format!("v({inner})")
    }
}

impl ShapeFac {
    pub fn with(vars: Vec<ShapeVar>) -> Self {
        let mut f = ShapeFac { vars };
        f.vars.sort_by_cached_key(|v| (v.size(), v.code()));
        f
    }

    pub fn size(&self) -> usize {
        1 + self.vars.iter().map(ShapeVar::size).sum::<usize>()
    }

    pub fn code(&self) -> String {
        let inner: String = self.vars.iter().map(ShapeVar::code).collect();
        format!("f({inner})")
    }
}

impl Shape {
    pub fn size(&self) -> Option<usize> {
        match self {
            Shape::Tree(root) => Some(root.size()),
            Shape::Cyclic => None,
        }
    }

    pub fn code(&self) -> String {
        match self {
            Shape::Tree(root) => root.code(),
            Shape::Cyclic => "cyclic".to_string(),
        }
    }
}

/// Canonical shape of the radius-`t` ball around `i`.
pub fn neighborhood_shape(g: &FactorGraph, i: usize, t: usize) -> Result<Shape> {
    let nb = neighborhood(g, i, t)?;
    let mut var_seen = vec![false; g.n()];
    let mut fac_seen = vec![false; g.m()];
    var_seen[i] = true;
    Ok(match build_var(g, i, None, 0, t, &mut var_seen, &mut fac_seen) {
        Some(root) if root.size() == nb.size() => Shape::Tree(root),
        _ => Shape::Cyclic,
    })
}

fn build_var(
    g: &FactorGraph,
    v: usize,
    parent: Option<usize>,
    depth: usize,
    t: usize,
    var_seen: &mut [bool],
    fac_seen: &mut [bool],
) -> Option<ShapeVar> {
    if depth == t {
        return Some(ShapeVar::leaf());
    }
    let mut factors = Vec::new();
    for &a in g.var_neighbors(v) {
        if Some(a) == parent {
            continue;
        }
        if fac_seen[a] {
            return None;
        }
        fac_seen[a] = true;
        let mut vars = Vec::new();
        for &j in g.fac_neighbors(a) {
            if j == v {
                continue;
            }
            if var_seen[j] {
                return None;
            }
            var_seen[j] = true;
            vars.push(build_var(g, j, Some(a), depth + 1, t, var_seen, fac_seen)?);
        }
        factors.push(ShapeFac::with(vars));
    }
    Some(ShapeVar::with(factors))
}

/// Probability that the `t`-generation Galton-Watson tree is isomorphic to
/// `shape` (zero for shapes deeper than `t` or for [`Shape::Cyclic`]).
pub fn gw_shape_probability(shape: &Shape, gamma: f64, alpha: f64, t: usize) -> f64 {
    match shape {
        Shape::Tree(root) => var_prob(root, gamma, alpha, 0, t),
        Shape::Cyclic => 0.0,
    }
}

fn var_prob(v: &ShapeVar, gamma: f64, alpha: f64, depth: usize, t: usize) -> f64 {
    if depth == t {
        return if v.factors.is_empty() { 1.0 } else { 0.0 };
    }
    let children: Vec<f64> = v.factors.iter().map(|f| fac_prob(f, gamma, alpha, depth, t)).collect();
    poisson_pmf(v.factors.len(), gamma * alpha)
        * arrangements(v.factors.iter().map(ShapeFac::code))
        * children.iter().product::<f64>()
}

fn fac_prob(f: &ShapeFac, gamma: f64, alpha: f64, depth: usize, t: usize) -> f64 {
    let children: Vec<f64> = f.vars.iter().map(|v| var_prob(v, gamma, alpha, depth + 1, t)).collect();
    poisson_pmf(f.vars.len(), gamma) * arrangements(f.vars.iter().map(ShapeVar::code)) * children.iter().product::<f64>()
}

/// Number of distinct orderings of a multiset: `k! / prod(mult!)`.
fn arrangements(codes: impl Iterator<Item = String>) -> f64 {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for c in codes {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    counts.values().fold(fact(total), |acc, &m| acc / fact(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_shape_probability() {
        let g = FactorGraph::empty(1, 1);
        let s = neighborhood_shape(&g, 0, 1).unwrap();
        assert_eq!(s.code(), "v()");
        assert!((gw_shape_probability(&s, 2.0, 0.5, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gw_shape_probability(&s, 0.0, 0.5, 1), 1.0);
    }

    #[test]
    fn sibling_order_does_not_matter() {
        // root with a bare factor and a factor with one child, in both orders
        let g1 = FactorGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        let g2 = FactorGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        let s1 = neighborhood_shape(&g1, 0, 1).unwrap();
        assert_eq!(s1, neighborhood_shape(&g2, 0, 1).unwrap());
        assert_eq!(s1.code(), "v(f()f(v()))");
    }

    #[test]
    fn cycle_is_detected() {
        let g = FactorGraph::from_edges(2, 2, [(0, 0), (1, 0), (0, 1), (1, 1)]).unwrap();
        assert_eq!(neighborhood_shape(&g, 0, 1).unwrap(), Shape::Cyclic);
    }

    #[test]
    fn two_bare_factors_probability() {
        let s = Shape::Tree(ShapeVar::with(vec![ShapeFac::with(vec![]), ShapeFac::with(vec![])]));
        let (gamma, alpha) = (2.0f64, 0.5f64);
        let l = gamma * alpha;
        let expected = (-l).exp() * l * l / 2.0 * (-gamma).exp() * (-gamma).exp();
        assert!((gw_shape_probability(&s, gamma, alpha, 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn depth_one_shape_probabilities_sum_to_one() {
        // enumerate all depth-one shapes with up to 6 factors of up to 8 leaves
        let (gamma, alpha) = (1.3, 0.8);
        let leaf_factors: Vec<ShapeFac> = (0..=8).map(|k| ShapeFac::with(vec![ShapeVar::leaf(); k])).collect();
        let mut total = 0.0;
        fn rec(start: usize, left: usize, acc: &mut Vec<ShapeFac>, pool: &[ShapeFac], out: &mut Vec<ShapeVar>) {
            out.push(ShapeVar::with(acc.clone()));
            if left == 0 {
                return;
            }
            for k in start..pool.len() {
                acc.push(pool[k].clone());
                rec(k, left - 1, acc, pool, out);
                acc.pop();
            }
        }
        let mut shapes = Vec::new();
        rec(0, 6, &mut Vec::new(), &leaf_factors, &mut shapes);
        for s in shapes {
            total += gw_shape_probability(&Shape::Tree(s), gamma, alpha, 1);
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}
