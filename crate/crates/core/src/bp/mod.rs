//! Belief propagation, the one-step local update map `F` and the
//! boundary-factorized marginal `mu^{theta,t}`.
//!
//! Messages live on the edges of a [`FactorGraph`] in the lexicographic
//! `(variable, factor)` order of [`FactorGraph::edges`]. One sweep first
//! recomputes every factor-to-variable message from the current
//! variable-to-factor messages, then every variable-to-factor message from
//! the fresh factor-to-variable ones.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, neighborhood, FactorGraph};
use crate::model::{ObservationModel, World};
use crate::oracle::{check_feasible, Marginal, Posterior};

/// Largest local state space `q^k` a single factor update will enumerate.
pub const MAX_FACTOR_STATES: usize = 1 << 20;

/// Directed messages on every edge of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    edges: Vec<(usize, usize)>,
    var_to_fac: Vec<Vec<f64>>,
    fac_to_var: Vec<Vec<f64>>,
}

impl MessageSet {
    pub fn uniform(g: &FactorGraph, q: usize) -> Self {
        let edges: Vec<_> = g.edges().collect();
        let u = vec![1.0 / q as f64; q];
        Self { var_to_fac: vec![u.clone(); edges.len()], fac_to_var: vec![u; edges.len()], edges }
    }

    /// Builds a message set from explicit per-edge vectors, checking that
    /// every message lies on the simplex.
    pub fn from_parts(g: &FactorGraph, var_to_fac: Vec<Vec<f64>>, fac_to_var: Vec<Vec<f64>>) -> Result<Self> {
        let edges: Vec<_> = g.edges().collect();
        if var_to_fac.len() != edges.len() || fac_to_var.len() != edges.len() {
            return Err(Error::SizeMismatch(edges.len(), var_to_fac.len().max(fac_to_var.len())));
        }
        for msg in var_to_fac.iter().chain(&fac_to_var) {
            Marginal::new(msg.clone())?;
        }
        Ok(Self { edges, var_to_fac, fac_to_var })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_id(&self, var: usize, fac: usize) -> Option<usize> {
        self.edges.binary_search(&(var, fac)).ok()
    }

    /// `nu_{i -> a}` on edge `e`.
    pub fn var_to_fac(&self, e: usize) -> &[f64] {
        &self.var_to_fac[e]
    }

    /// `nu-hat_{a -> i}` on edge `e`.
    pub fn fac_to_var(&self, e: usize) -> &[f64] {
        &self.fac_to_var[e]
    }

    /// Debug dump with columns `direction,var,fac,symbol,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,var,fac,symbol,value\n");
        for (dir, msgs) in [("v2f", &self.var_to_fac), ("f2v", &self.fac_to_var)] {
            for (&(i, a), msg) in self.edges.iter().zip(msgs) {
                for (x, v) in msg.iter().enumerate() {
                    let _ = writeln!(out, "{dir},{i},{a},{x},{v:.16e}");
                }
            }
        }
        out
    }
}

/// Starting messages for [`bp_run`].
#[derive(Debug, Clone, Default)]
pub enum BpInit {
    Uniform,
    /// `nu_{i -> a} ∝ p R^theta(z_i|.)`, factor messages uniform.
    #[default]
    Prior,
    Given(MessageSet),
}

#[derive(Debug, Clone)]
pub struct BpOptions {
    pub init: BpInit,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { init: BpInit::Prior, damping: 0.0, tol: 1e-12, max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub messages: MessageSet,
    pub converged: bool,
    pub iters: usize,
    /// Largest total-variation change of any message in the last sweep.
    pub residual: f64,
}

/// Linear factor tables `Q(y | x_1..x_k)` keyed by `(k, y)`, first slot most
/// significant.
pub(crate) struct KernelCache<'m> {
    model: &'m ObservationModel,
    tables: HashMap<(usize, usize), Vec<f64>>,
}

impl<'m> KernelCache<'m> {
    pub(crate) fn new(model: &'m ObservationModel) -> Self {
        Self { model, tables: HashMap::new() }
    }

    pub(crate) fn model(&self) -> &'m ObservationModel {
        self.model
    }

    pub(crate) fn table(&mut self, arity: usize, y: usize) -> Result<&[f64]> {
        let model = self.model;
        if !self.tables.contains_key(&(arity, y)) {
            let q = model.q();
            let states = (q as f64).powi(arity as i32);
            if states > MAX_FACTOR_STATES as f64 {
                return Err(Error::Infeasible { states, limit: MAX_FACTOR_STATES as f64 });
            }
            let kernel = model.factor_kernel(arity)?;
            let mut local = vec![0usize; arity];
            let mut table = Vec::with_capacity(states as usize);
            for _ in 0..states as usize {
                table.push(kernel.prob(y, &local));
                advance(&mut local, q);
            }
            self.tables.insert((arity, y), table);
        }
        Ok(&self.tables[&(arity, y)])
    }
}

/// Odometer step, last digit fastest.
fn advance(digits: &mut [usize], q: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < q {
            return;
        }
        *d = 0;
    }
}

/// Unnormalized `sum_{x_{-target}} Q(y|x) prod_{s != target} incoming[s](x_s)`.
/// `incoming[target]` is ignored.
fn factor_to_slot(table: &[f64], q: usize, incoming: &[&[f64]], target: usize) -> Vec<f64> {
    let mut out = vec![0.0; q];
    let mut digits = vec![0usize; incoming.len()];
    for &w in table {
        if w > 0.0 {
            let mut prod = w;
            for (s, msg) in incoming.iter().enumerate() {
                if s != target {
                    prod *= msg[digits[s]];
                    if prod == 0.0 {
                        break;
                    }
                }
            }
            out[digits[target]] += prod;
        }
        advance(&mut digits, q);
    }
    out
}

fn normalize(mut v: Vec<f64>, context: impl FnOnce() -> String) -> Result<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroNormalizer(context()));
    }
    for x in &mut v {
        *x /= total;
    }
    Ok(v)
}

/// `p(x) R(z|x)` times the reveal indicator.
pub(crate) fn var_weights(model: &ObservationModel, z: usize, reveal: Option<usize>) -> Vec<f64> {
    let prior = model.prior().probs();
    let side = model.side_kernel();
    (0..model.q())
        .map(|x| match reveal {
            Some(r) if r != x => 0.0,
            _ => prior[x] * side.prob(z, &[x]),
        })
        .collect()
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn damp(update: Vec<f64>, old: &[f64], damping: f64) -> Vec<f64> {
    if damping == 0.0 {
        return update;
    }
    update.iter().zip(old).map(|(u, o)| (1.0 - damping) * u + damping * o).collect()
}

struct EdgeIndex {
    by_var: Vec<Vec<usize>>,
    by_fac: Vec<Vec<usize>>,
}

impl EdgeIndex {
    fn new(g: &FactorGraph) -> Self {
        let mut by_var = vec![Vec::new(); g.n()];
        let mut by_fac = vec![Vec::new(); g.m()];
        for (e, (i, a)) in g.edges().enumerate() {
            by_var[i].push(e);
            by_fac[a].push(e);
        }
        Self { by_var, by_fac }
    }
}

/// Runs synchronous belief propagation until the largest message change is
/// at most `tol` or `max_iter` sweeps have been made.
pub fn bp_run(g: &FactorGraph, model: &ObservationModel, world: &World, opts: &BpOptions) -> Result<BpOutcome> {
    world.check(g, model)?;
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidParams(format!("damping {} outside [0, 1)", opts.damping)));
    }
    if !(opts.tol >= 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParams("bp needs tol >= 0 and max_iter >= 1".into()));
    }
    let q = model.q();
    let idx = EdgeIndex::new(g);
    let edges: Vec<_> = g.edges().collect();
    let var_w: Vec<Vec<f64>> = (0..g.n()).map(|i| var_weights(model, world.z[i], world.reveal[i])).collect();
    let mut msgs = match &opts.init {
        BpInit::Uniform => MessageSet::uniform(g, q),
        BpInit::Prior => {
            let mut m = MessageSet::uniform(g, q);
            for (e, &(i, a)) in edges.iter().enumerate() {
                m.var_to_fac[e] = normalize(var_w[i].clone(), || format!("initial message on edge {e} (variable {i} -> factor {a})"))?;
            }
            m
        }
        BpInit::Given(m) => {
            if m.edges != edges {
                return Err(Error::Validation("initial messages do not match the graph edges".into()));
            }
            if m.var_to_fac.iter().chain(&m.fac_to_var).any(|v| v.len() != q) {
                return Err(Error::Validation(format!("initial messages must have {q} entries")));
            }
            m.clone()
        }
    };
    let mut cache = KernelCache::new(model);
    let mut residual = 0.0;
    for iter in 1..=opts.max_iter {
        residual = 0.0f64;
        let mut f2v = vec![Vec::new(); edges.len()];
        for (a, eids) in idx.by_fac.iter().enumerate() {
            let table = cache.table(eids.len(), world.y[a])?;
            let incoming: Vec<&[f64]> = eids.iter().map(|&e| &msgs.var_to_fac[e][..]).collect();
            for (s, &e) in eids.iter().enumerate() {
                let raw = factor_to_slot(table, q, &incoming, s);
                let msg = normalize(raw, || format!("edge {e} (factor {a} -> variable {})", edges[e].0))?;
                let msg = damp(msg, &msgs.fac_to_var[e], opts.damping);
                residual = residual.max(tv(&msg, &msgs.fac_to_var[e]));
                f2v[e] = msg;
            }
        }
        let mut v2f = vec![Vec::new(); edges.len()];
        for (i, eids) in idx.by_var.iter().enumerate() {
            for &e in eids {
                let mut raw = var_w[i].clone();
                for &other in eids.iter().filter(|&&o| o != e) {
                    for (r, m) in raw.iter_mut().zip(&f2v[other]) {
                        *r *= m;
                    }
                }
                let msg = normalize(raw, || format!("edge {e} (variable {i} -> factor {})", edges[e].1))?;
                let msg = damp(msg, &msgs.var_to_fac[e], opts.damping);
                residual = residual.max(tv(&msg, &msgs.var_to_fac[e]));
                v2f[e] = msg;
            }
        }
        msgs.fac_to_var = f2v;
        msgs.var_to_fac = v2f;
        if residual <= opts.tol {
            return Ok(BpOutcome { messages: msgs, converged: true, iters: iter, residual });
        }
    }
    Ok(BpOutcome { messages: msgs, converged: false, iters: opts.max_iter, residual })
}

/// BP estimate `∝ p(x_i) R^theta(z_i|x_i) prod_{b in di} nu-hat_{b -> i}(x_i)`.
pub fn bp_marginal(g: &FactorGraph, model: &ObservationModel, world: &World, msgs: &MessageSet, i: usize) -> Result<Marginal> {
    g.check_var(i)?;
    let mut w = var_weights(model, world.z[i], world.reveal[i]);
    for &a in g.var_neighbors(i) {
        let e = msgs
            .edge_id(i, a)
            .ok_or_else(|| Error::Validation(format!("no message on edge ({i}, {a})")))?;
        for (x, m) in w.iter_mut().zip(&msgs.fac_to_var[e]) {
            *x *= m;
        }
    }
    normalize(w, || format!("BP marginal of variable {i}")).map(Marginal::from_normalized)
}

/// One function node around the centre of a [`LocalStar`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarFactor {
    pub y: usize,
    /// Labels of the non-centre neighbours, one per incoming slot.
    pub slots: Vec<usize>,
}

impl StarFactor {
    pub fn arity(&self) -> usize {
        self.slots.len() + 1
    }
}

/// The depth-one view of a variable: its own observations and, for each
/// adjacent function node, the observed output and the incoming slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalStar {
    pub center: usize,
    pub z: usize,
    pub reveal: Option<usize>,
    pub factors: Vec<StarFactor>,
}

impl LocalStar {
    /// The star of variable `i`; slots are labelled by neighbour ids.
    pub fn from_graph(g: &FactorGraph, world: &World, i: usize) -> Result<Self> {
        g.check_var(i)?;
        let factors = g
            .var_neighbors(i)
            .iter()
            .map(|&a| StarFactor { y: world.y[a], slots: g.fac_neighbors(a).iter().copied().filter(|&j| j != i).collect() })
            .collect();
        Ok(Self { center: i, z: world.z[i], reveal: world.reveal[i], factors })
    }

    /// True when no neighbour label appears in two slots.
    pub fn has_distinct_slots(&self) -> bool {
        let mut seen: Vec<usize> = self.factors.iter().flat_map(|f| f.slots.iter().copied()).collect();
        let len = seen.len();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == len
    }
}

/// The local update map: the centre marginal
/// `∝ p R^theta(z|x) prod_a sum_{x_slots} Q(y_a | x, x_slots) prod nu_slot`.
/// `incoming[a][s]` is the message into slot `s` of factor `a`.
pub fn local_update_f(model: &ObservationModel, star: &LocalStar, incoming: &[Vec<Marginal>]) -> Result<Marginal> {
    if incoming.len() != star.factors.len() {
        return Err(Error::SizeMismatch(star.factors.len(), incoming.len()));
    }
    let mut factors = Vec::with_capacity(incoming.len());
    for (f, inc) in star.factors.iter().zip(incoming) {
        if inc.len() != f.slots.len() {
            return Err(Error::SizeMismatch(f.slots.len(), inc.len()));
        }
        if inc.iter().any(|m| m.q() != model.q()) {
            return Err(Error::Validation(format!("incoming messages must have {} entries", model.q())));
        }
        factors.push((f.y, inc.iter().map(|m| m.probs()).collect::<Vec<_>>()));
    }
    let mut cache = KernelCache::new(model);
    local_update_raw(&mut cache, star.z, star.reveal, &factors).map(Marginal::from_normalized)
}

/// Shared arithmetic behind [`local_update_f`]: `factors` lists each
/// function node's output and its incoming slot messages.
pub(crate) fn local_update_raw(cache: &mut KernelCache, z: usize, reveal: Option<usize>, factors: &[(usize, Vec<&[f64]>)]) -> Result<Vec<f64>> {
    let model = cache.model();
    let q = model.q();
    let ones = vec![1.0; q];
    let mut out = var_weights(model, z, reveal);
    for (a, (y, slots)) in factors.iter().enumerate() {
        let mut incoming: Vec<&[f64]> = Vec::with_capacity(slots.len() + 1);
        incoming.push(&ones);
        incoming.extend(slots.iter().copied());
        let table = cache.table(incoming.len(), *y)?;
        let msg = normalize(factor_to_slot(table, q, &incoming, 0), || format!("factor {a} of the local star"))?;
        for (o, m) in out.iter_mut().zip(&msg) {
            *o *= m;
        }
    }
    normalize(out, || "centre of the local star".into())
}

/// How marginals on a reduced graph are obtained.
#[derive(Debug, Clone)]
pub enum Method {
    Oracle,
    Bp(BpOptions),
}

/// Marginals of `targets` on `g`. The oracle enumerates only the connected
/// part of the graph that touches the targets.
fn marginals_on(g: &FactorGraph, model: &ObservationModel, world: &World, targets: &[usize], method: &Method) -> Result<Vec<Marginal>> {
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    match method {
        Method::Oracle => {
            let mut keep = vec![false; g.n()];
            let mut stack: Vec<usize> = targets.to_vec();
            let mut seen_fac = vec![false; g.m()];
            while let Some(j) = stack.pop() {
                if std::mem::replace(&mut keep[j], true) {
                    continue;
                }
                for &a in g.var_neighbors(j) {
                    if !std::mem::replace(&mut seen_fac[a], true) {
                        stack.extend(g.fac_neighbors(a).iter().copied().filter(|&l| !keep[l]));
                    }
                }
            }
            let part = g.induced(&keep);
            let post = Posterior::compute(&part.graph, model, &world.restrict(&part))?;
            Ok(targets.iter().map(|&j| post.marginal(part.var_map[j].expect("target kept"))).collect())
        }
        Method::Bp(opts) => {
            let out = bp_run(g, model, world, opts)?;
            targets.iter().map(|&j| bp_marginal(g, model, world, &out.messages, j)).collect()
        }
    }
}

/// Marginals of every `j` sharing a function node with `i`, computed with
/// `i` and all of its function nodes removed.
pub fn cavity_marginals(g: &FactorGraph, model: &ObservationModel, world: &World, i: usize, method: &Method) -> Result<BTreeMap<usize, Marginal>> {
    g.check_var(i)?;
    world.check(g, model)?;
    let mut nbrs: Vec<usize> = g.var_neighbors(i).iter().flat_map(|&a| g.fac_neighbors(a).iter().copied()).filter(|&j| j != i).collect();
    nbrs.sort_unstable();
    nbrs.dedup();
    if nbrs.is_empty() {
        return Ok(BTreeMap::new());
    }
    let cut = g.surgery(Some(i), None)?;
    let targets: Vec<usize> = nbrs.iter().map(|&j| cut.var_map[j].expect("neighbour survives")).collect();
    let margs = marginals_on(&cut.graph, model, &world.restrict(&cut), &targets, method)?;
    Ok(nbrs.into_iter().zip(margs).collect())
}

/// `F^n_i` evaluated at the cavity marginals of `i`'s neighbours.
pub fn local_update_at_cavity(g: &FactorGraph, model: &ObservationModel, world: &World, i: usize, method: &Method) -> Result<Marginal> {
    let star = LocalStar::from_graph(g, world, i)?;
    let cav = cavity_marginals(g, model, world, i, method)?;
    let incoming: Vec<Vec<Marginal>> = star.factors.iter().map(|f| f.slots.iter().map(|j| cav[j].clone()).collect()).collect();
    local_update_f(model, &star, &incoming)
}

/// `mu^{theta,t}_i`: exact enumeration over the radius-`t` ball with the
/// interior function nodes, the prior and side terms of the non-boundary
/// variables, and the boundary variables weighted independently by their
/// marginals on the graph induced by variables at distance `>= t`.
pub fn boundary_factorized_marginal(g: &FactorGraph, model: &ObservationModel, world: &World, i: usize, t: usize, method: &Method) -> Result<Marginal> {
    world.check(g, model)?;
    let nb = neighborhood(g, i, t)?;
    let q = model.q();
    check_feasible(q, nb.vars.len())?;
    let dist = bfs_distances(g, i, None);
    let outer: Vec<bool> = dist.iter().map(|d| d.is_none_or(|d| d >= t)).collect();
    let bar = g.induced(&outer);
    let targets: Vec<usize> = nb.boundary.iter().map(|&j| bar.var_map[j].expect("boundary is outside")).collect();
    let boundary = marginals_on(&bar.graph, model, &world.restrict(&bar), &targets, method)?;

    let mut local = vec![usize::MAX; g.n()];
    for (k, &j) in nb.vars.iter().enumerate() {
        local[j] = k;
    }
    let mut weights: Vec<Vec<f64>> = nb.vars.iter().map(|&j| var_weights(model, world.z[j], world.reveal[j])).collect();
    for (&j, m) in nb.boundary.iter().zip(boundary) {
        weights[local[j]] = m.into_vec();
    }
    let mut cache = KernelCache::new(model);
    let mut factors = Vec::with_capacity(nb.facs.len());
    for &a in &nb.facs {
        let slots: Vec<usize> = g.fac_neighbors(a).iter().map(|&j| local[j]).collect();
        let table = cache.table(slots.len(), world.y[a])?.to_vec();
        factors.push((slots, table));
    }
    let root = local[i];
    let mut out = vec![0.0; q];
    let mut digits = vec![0usize; nb.vars.len()];
    let states = q.pow(nb.vars.len() as u32);
    for _ in 0..states {
        let mut w: f64 = digits.iter().zip(&weights).map(|(&x, wj)| wj[x]).product();
        if w > 0.0 {
            for (slots, table) in &factors {
                w *= table[slots.iter().fold(0, |acc, &k| acc * q + digits[k])];
                if w == 0.0 {
                    break;
                }
            }
            out[digits[root]] += w;
        }
        advance(&mut digits, q);
    }
    normalize(out, || format!("boundary-factorized marginal of variable {i} at radius {t}")).map(Marginal::from_normalized)
}
