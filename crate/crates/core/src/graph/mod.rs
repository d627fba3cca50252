//! Bipartite factor graphs: variable nodes `0..n`, function nodes `0..m`.

mod neighborhood;
mod sample;
mod shape;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use neighborhood::{distance, neighborhood, Neighborhood};
pub(crate) use neighborhood::bfs_distances;
pub(crate) use sample::sample_graph_with;
pub use sample::{sample_graph, sample_gw_tree, EnsembleParams, GwTree};
pub use shape::{gw_shape_probability, neighborhood_shape, Shape, ShapeFac, ShapeVar};

/// Immutable bipartite adjacency between variable and function nodes.
///
/// Adjacency lists are sorted ascending and free of duplicates, and
/// `a` appears in `var_adj[i]` exactly when `i` appears in `fac_adj[a]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    var_adj: Vec<Vec<usize>>,
    fac_adj: Vec<Vec<usize>>,
}

impl FactorGraph {
    /// Graph with `n` variables, `m` function nodes and no edges.
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            var_adj: vec![Vec::new(); n],
            fac_adj: vec![Vec::new(); m],
        }
    }

    /// Builds a graph from `(variable, factor)` pairs in any order.
    pub fn from_edges(n: usize, m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, a) in edges {
            if i >= n {
                return Err(Error::IndexOutOfRange { kind: "variable", index: i, len: n });
            }
            if a >= m {
                return Err(Error::IndexOutOfRange { kind: "factor", index: a, len: m });
            }
            if !set.insert((i, a)) {
                return Err(Error::InvalidParams(format!("duplicate edge ({i}, {a})")));
            }
        }
        let mut g = Self::empty(n, m);
        for (i, a) in set {
            g.var_adj[i].push(a);
            g.fac_adj[a].push(i);
        }
        for adj in &mut g.fac_adj {
            adj.sort_unstable();
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.var_adj.len()
    }

    pub fn m(&self) -> usize {
        self.fac_adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.var_adj.iter().map(Vec::len).sum()
    }

    /// Function nodes adjacent to variable `i`.
    pub fn var_neighbors(&self, i: usize) -> &[usize] {
        &self.var_adj[i]
    }

    /// Variable nodes adjacent to function node `a`.
    pub fn fac_neighbors(&self, a: usize) -> &[usize] {
        &self.fac_adj[a]
    }

    /// Edges in lexicographic `(variable, factor)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.var_adj
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().map(move |&a| (i, a)))
    }

    pub fn check_var(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { kind: "variable", index: i, len: self.n() })
        }
    }

    pub fn check_fac(&self, a: usize) -> Result<()> {
        if a < self.m() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { kind: "factor", index: a, len: self.m() })
        }
    }

    /// Re-checks the adjacency invariants. Always true for graphs built
    /// through this module; used by tests after surgery.
    pub fn is_consistent(&self) -> bool {
        let sorted_unique = |v: &Vec<usize>| v.windows(2).all(|w| w[0] < w[1]);
        self.var_adj.iter().all(sorted_unique)
            && self.fac_adj.iter().all(sorted_unique)
            && self.var_adj.iter().enumerate().all(|(i, adj)| {
                adj.iter()
                    .all(|&a| a < self.m() && self.fac_adj[a].binary_search(&i).is_ok())
            })
            && self.fac_adj.iter().enumerate().all(|(a, adj)| {
                adj.iter()
                    .all(|&i| i < self.n() && self.var_adj[i].binary_search(&a).is_ok())
            })
    }

    /// True when the graph has no cycles (every connected component is a tree).
    pub fn is_forest(&self) -> bool {
        // a component is a tree iff edges = nodes - 1; summed: E = N - components
        let nodes = self.n() + self.m();
        self.num_edges() + self.count_components() == nodes
    }

    fn count_components(&self) -> usize {
        let mut seen_var = vec![false; self.n()];
        let mut seen_fac = vec![false; self.m()];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.n() {
            if seen_var[start] {
                continue;
            }
            components += 1;
            seen_var[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &a in &self.var_adj[i] {
                    if seen_fac[a] {
                        continue;
                    }
                    seen_fac[a] = true;
                    for &j in &self.fac_adj[a] {
                        if !seen_var[j] {
                            seen_var[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        components + seen_fac.iter().filter(|&&s| !s).count()
    }

    /// Serializes to the edge-list text format: `n m` then one `i a` per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.n(), self.m()).unwrap();
        for (i, a) in self.edges() {
            writeln!(out, "{i} {a}").unwrap();
        }
        out
    }

    /// Parses the edge-list format. Edges must be sorted and unique so that
    /// parsing and re-serializing is byte-exact.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let (n, m) = parse_pair(header, 1)?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let pair = parse_pair(line, idx + 1)?;
            if let Some(&prev) = edges.last() {
                if pair <= prev {
                    return Err(Error::Parse {
                        line: idx + 1,
                        msg: "edges must be strictly increasing in (i, a) order".into(),
                    });
                }
            }
            edges.push(pair);
        }
        Self::from_edges(n, m, edges)
    }

    /// Removes variable `j` together with every function node adjacent to
    /// it, or removes a single function node. Exactly one of the two may be
    /// given.
    pub fn surgery(&self, drop_var: Option<usize>, drop_fac: Option<usize>) -> Result<Surgery> {
        match (drop_var, drop_fac) {
            (Some(j), None) => {
                self.check_var(j)?;
                let keep_var: Vec<bool> = (0..self.n()).map(|i| i != j).collect();
                let keep_fac: Vec<bool> = (0..self.m())
                    .map(|a| self.fac_adj[a].binary_search(&j).is_err())
                    .collect();
                Ok(self.restrict(&keep_var, &keep_fac))
            }
            (None, Some(a)) => {
                self.check_fac(a)?;
                let keep_var = vec![true; self.n()];
                let keep_fac: Vec<bool> = (0..self.m()).map(|b| b != a).collect();
                Ok(self.restrict(&keep_var, &keep_fac))
            }
            (None, None) => Ok(self.restrict(&vec![true; self.n()], &vec![true; self.m()])),
            (Some(_), Some(_)) => Err(Error::InvalidParams(
                "graph surgery takes at most one of drop_var / drop_fac".into(),
            )),
        }
    }

    /// Subgraph induced by a variable subset: keeps the listed variables and
    /// every function node whose neighbourhood lies inside that subset.
    pub fn induced(&self, keep_var: &[bool]) -> Surgery {
        let keep_fac: Vec<bool> = self
            .fac_adj
            .iter()
            .map(|adj| adj.iter().all(|&i| keep_var[i]))
            .collect();
        self.restrict(keep_var, &keep_fac)
    }

    /// Keeps the flagged nodes and the edges between kept nodes. Kept nodes
    /// are renumbered densely in their original order.
    pub fn restrict(&self, keep_var: &[bool], keep_fac: &[bool]) -> Surgery {
        let var_map = dense_map(keep_var);
        let fac_map = dense_map(keep_fac);
        let n = var_map.iter().flatten().count();
        let m = fac_map.iter().flatten().count();
        let mut g = Self::empty(n, m);
        for (i, a) in self.edges() {
            if let (Some(ni), Some(na)) = (var_map[i], fac_map[a]) {
                g.var_adj[ni].push(na);
                g.fac_adj[na].push(ni);
            }
        }
        Surgery { graph: g, var_map, fac_map }
    }
}

fn dense_map(keep: &[bool]) -> Vec<Option<usize>> {
    let mut next = 0;
    keep.iter()
        .map(|&k| {
            k.then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn parse_pair(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let err = |msg: &str| Error::Parse { line: lineno, msg: msg.to_string() };
    let mut it = line.split(' ');
    let a = it.next().ok_or_else(|| err("expected two integers"))?;
    let b = it.next().ok_or_else(|| err("expected two integers"))?;
    if it.next().is_some() {
        return Err(err("expected exactly two integers"));
    }
    let a = a.parse().map_err(|_| err("invalid integer"))?;
    let b = b.parse().map_err(|_| err("invalid integer"))?;
    Ok((a, b))
}

/// Result of graph surgery: the reduced graph plus old-to-new id maps
/// (`None` marks a removed node).
#[derive(Debug, Clone)]
pub struct Surgery {
    pub graph: FactorGraph,
    pub var_map: Vec<Option<usize>>,
    pub fac_map: Vec<Option<usize>>,
}

impl Surgery {
    /// New-to-old variable ids.
    pub fn var_origin(&self) -> Vec<usize> {
        invert(&self.var_map, self.graph.n())
    }

    pub fn fac_origin(&self) -> Vec<usize> {
        invert(&self.fac_map, self.graph.m())
    }
}

fn invert(map: &[Option<usize>], len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for (old, new) in map.iter().enumerate() {
        if let Some(new) = new {
            out[*new] = old;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x0 - a0 - x1 - a1 - x2
    pub(crate) fn path3() -> FactorGraph {
        FactorGraph::from_edges(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap()
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(matches!(
            FactorGraph::from_edges(2, 1, [(2, 0)]),
            Err(Error::IndexOutOfRange { kind: "variable", .. })
        ));
        assert!(matches!(
            FactorGraph::from_edges(2, 1, [(0, 1)]),
            Err(Error::IndexOutOfRange { kind: "factor", .. })
        ));
        assert!(FactorGraph::from_edges(2, 1, [(0, 0), (0, 0)]).is_err());
    }

    #[test]
    fn edge_list_round_trip_is_byte_exact() {
        let g = path3();
        let text = g.to_edge_list();
        assert_eq!(text, "3 2\n0 0\n1 0\n1 1\n2 1\n");
        let back = FactorGraph::from_edge_list(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_edge_list(), text);
    }

    #[test]
    fn edge_list_rejects_unsorted_lines() {
        let err = FactorGraph::from_edge_list("2 2\n1 0\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(FactorGraph::from_edge_list("2 x\n").is_err());
    }

    #[test]
    fn drop_isolated_variable_keeps_factors() {
        let g = FactorGraph::from_edges(3, 1, [(0, 0), (1, 0)]).unwrap();
        let s = g.surgery(Some(2), None).unwrap();
        assert_eq!(s.graph.n(), 2);
        assert_eq!(s.graph.m(), 1);
        assert_eq!(s.graph.fac_neighbors(0), &[0, 1]);
        assert_eq!(s.var_map, vec![Some(0), Some(1), None]);
    }

    #[test]
    fn drop_variable_removes_adjacent_factors() {
        // x0 - a0 - x1
        let g = FactorGraph::from_edges(2, 1, [(0, 0), (1, 0)]).unwrap();
        let s = g.surgery(Some(1), None).unwrap();
        assert_eq!(s.graph.n(), 1);
        assert_eq!(s.graph.m(), 0);
        assert_eq!(s.var_origin(), vec![0]);
    }

    #[test]
    fn drop_factor_removes_only_its_edges() {
        // K shape: x1 is shared by a0 and a1, a1 also reaches x2 and x3
        let g = FactorGraph::from_edges(4, 2, [(0, 0), (1, 0), (1, 1), (2, 1), (3, 1)]).unwrap();
        let s = g.surgery(None, Some(1)).unwrap();
        assert_eq!(s.graph.n(), 4);
        assert_eq!(s.graph.m(), 1);
        assert_eq!(s.graph.num_edges(), 2);
        assert!(s.graph.var_neighbors(2).is_empty());
        assert_eq!(s.fac_map, vec![Some(0), None]);
        assert!(s.graph.is_consistent());
    }

    #[test]
    fn surgery_rejects_two_targets_and_bad_ids() {
        let g = path3();
        assert!(g.surgery(Some(0), Some(0)).is_err());
        assert!(g.surgery(Some(3), None).is_err());
        assert!(g.surgery(None, Some(2)).is_err());
    }

    #[test]
    fn forest_detection() {
        assert!(path3().is_forest());
        let cycle = FactorGraph::from_edges(2, 2, [(0, 0), (1, 0), (0, 1), (1, 1)]).unwrap();
        assert!(!cycle.is_forest());
        assert!(FactorGraph::empty(3, 2).is_forest());
    }
}
