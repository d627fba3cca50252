use std::collections::VecDeque;

use super::FactorGraph;
use crate::error::Result;

/// Radius-`t` ball around a variable node.
///
/// `facs` holds the interior function nodes: those adjacent to a variable
/// at distance `< t`. Each of them has its whole neighbourhood inside
/// `vars` and at least one neighbour off the boundary. All sets are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub root: usize,
    pub radius: usize,
    pub vars: Vec<usize>,
    pub facs: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl Neighborhood {
    /// Variable plus function node count.
    pub fn size(&self) -> usize {
        self.vars.len() + self.facs.len()
    }

    /// Membership mask over all `n` variables.
    pub fn var_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &j in &self.vars {
            mask[j] = true;
        }
        mask
    }
}

/// Breadth-first distances from `i`, counted in traversed function nodes,
/// truncated at `max_depth`.
pub(crate) fn bfs_distances(g: &FactorGraph, i: usize, max_depth: Option<usize>) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    let mut fac_seen = vec![false; g.m()];
    let mut queue = VecDeque::new();
    dist[i] = Some(0);
    queue.push_back(i);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        if max_depth.is_some_and(|t| d >= t) {
            continue;
        }
        for &a in g.var_neighbors(v) {
            if fac_seen[a] {
                continue;
            }
            fac_seen[a] = true;
            for &j in g.fac_neighbors(a) {
                if dist[j].is_none() {
                    dist[j] = Some(d + 1);
                    queue.push_back(j);
                }
            }
        }
    }
    dist
}

pub fn neighborhood(g: &FactorGraph, i: usize, t: usize) -> Result<Neighborhood> {
    g.check_var(i)?;
    let dist = bfs_distances(g, i, Some(t));
    let mut vars = Vec::new();
    let mut boundary = Vec::new();
    let mut fac_in = vec![false; g.m()];
    for (j, d) in dist.iter().enumerate() {
        let Some(d) = *d else { continue };
        vars.push(j);
        if d == t {
            boundary.push(j);
        } else {
            for &a in g.var_neighbors(j) {
                fac_in[a] = true;
            }
        }
    }
    let facs = (0..g.m()).filter(|&a| fac_in[a]).collect();
    Ok(Neighborhood { root: i, radius: t, vars, facs, boundary })
}

/// Shortest-path distance between two variables in function-node hops;
/// `None` when they are disconnected.
pub fn distance(g: &FactorGraph, i: usize, j: usize) -> Result<Option<usize>> {
    g.check_var(i)?;
    g.check_var(j)?;
    Ok(bfs_distances(g, i, None)[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_graph, EnsembleParams};
    use proptest::prelude::*;

    fn path3() -> FactorGraph {
        FactorGraph::from_edges(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap()
    }

    #[test]
    fn radius_zero_is_the_root_alone() {
        // a degree-one factor on the root is not interior at radius 0
        let g = FactorGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        let nb = neighborhood(&g, 0, 0).unwrap();
        assert_eq!(nb.vars, vec![0]);
        assert!(nb.facs.is_empty());
        assert_eq!(nb.boundary, vec![0]);
    }

    #[test]
    fn path_neighborhoods() {
        let g = path3();
        let nb = neighborhood(&g, 0, 1).unwrap();
        assert_eq!((nb.vars, nb.facs, nb.boundary), (vec![0, 1], vec![0], vec![1]));
        let nb = neighborhood(&g, 0, 2).unwrap();
        assert_eq!((nb.vars, nb.facs, nb.boundary), (vec![0, 1, 2], vec![0, 1], vec![2]));
    }

    #[test]
    fn path_distances() {
        let g = path3();
        assert_eq!(distance(&g, 1, 1).unwrap(), Some(0));
        assert_eq!(distance(&g, 0, 2).unwrap(), Some(2));
        let disconnected = FactorGraph::from_edges(2, 1, [(0, 0)]).unwrap();
        assert_eq!(distance(&disconnected, 0, 1).unwrap(), None);
        assert!(distance(&g, 0, 5).is_err());
        assert!(neighborhood(&g, 3, 1).is_err());
    }

    proptest! {
        #[test]
        fn ball_matches_independent_distances(seed in 0u64..10_000, t in 0usize..4) {
            let g = sample_graph(&EnsembleParams::new(30, 0.7, 2.5).unwrap(), seed).unwrap();
            let nb = neighborhood(&g, 0, t).unwrap();
            let expected: Vec<usize> = (0..g.n())
                .filter(|&j| distance(&g, 0, j).unwrap().is_some_and(|d| d <= t))
                .collect();
            prop_assert_eq!(&nb.vars, &expected);
            let mask = nb.var_mask(g.n());
            for &a in &nb.facs {
                prop_assert!(g.fac_neighbors(a).iter().all(|&j| mask[j]));
            }
            prop_assert!(nb.vars.contains(&0));
            prop_assert!(nb.boundary.iter().all(|j| nb.vars.contains(j)));
        }
    }
}
