//! Large-graph experiments: BP against density evolution, and ensemble
//! statistics of sampled graphs.

use rand::seq::index::sample;
use rand::{Rng, RngCore};

use super::{replicate, ExperimentConfig, ResultRow, ResultTable};
use crate::bp::{bp_marginal, bp_run};
use crate::de::{de_run, DeParams};
use crate::error::{Error, Result};
use crate::graph::{gw_shape_probability, neighborhood, neighborhood_shape, sample_graph_with, EnsembleParams, Shape, ShapeFac, ShapeVar};
use crate::model::sample_world_with;
use crate::rng::stream;
use crate::stats::{binomial_pmf, chi_square_gof, entropy, ks_statistic, Welford};

/// BP marginals at random nodes of sampled graphs against the population
/// produced by density evolution at the same `(gamma, alpha, theta)`.
pub fn exp_de_match(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let theta = cfg.theta.ok_or_else(|| Error::config("theta", "required for de_match"))?;
    let model = cfg.model.with_theta(theta)?;
    let q = model.q();
    let opts = cfg.bp.options();
    let mut table = ResultTable::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let params = EnsembleParams::new(n, cfg.alpha, cfg.gamma)?;
        if cfg.nodes_per_graph > n {
            return Err(Error::config("nodes_per_graph", format!("{} exceeds n = {n}", cfg.nodes_per_graph)));
        }
        let graphs = replicate(cfg, n, |rng| {
            let g = sample_graph_with(&params, rng);
            let world = sample_world_with(&g, &model, theta, rng)?;
            let out = bp_run(&g, &model, &world, &opts)?;
            let margs = sample(rng, n, cfg.nodes_per_graph)
                .into_iter()
                .map(|i| bp_marginal(&g, &model, &world, &out.messages, i).map(|m| m.into_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok((out.converged, out.iters, margs))
        })?;
        let margs: Vec<&Vec<f64>> = graphs.iter().flat_map(|g| &g.2).collect();
        let converged = graphs.iter().filter(|g| g.0).count();
        let iters: Welford = graphs.iter().map(|g| g.1 as f64).collect();
        let de_seed = stream(cfg.seed, u64::MAX - n as u64).next_u64();
        let run = de_run(&model, DeParams { gamma: cfg.gamma, alpha: cfg.alpha }, cfg.population, cfg.generations, de_seed, cfg.stationary_tol)?;
        let pop = &run.population;

        for xi in 0..q {
            let bp_side: Vec<f64> = margs.iter().map(|m| m[xi]).collect();
            let ks = ks_statistic(&bp_side, &pop.component(xi));
            table.push(ResultRow::new("ks_symbol", ks, 0.0, margs.len()).n(n).theta(theta).label(format!("xi={xi}")));
        }
        let bp_entropy: Welford = margs.iter().map(|m| entropy(m)).collect();
        let de_summary = &run.history.last().expect("history has generation 0").summary;
        table.push(ResultRow::from_acc("bp_mean_entropy", &bp_entropy).n(n).theta(theta));
        table.push(ResultRow::new("de_mean_entropy", de_summary.mean_entropy, 0.0, pop.len()).n(n).theta(theta));
        table.push(ResultRow::new("bp_converged_fraction", converged as f64 / graphs.len() as f64, 0.0, graphs.len()).n(n).theta(theta));
        table.push(ResultRow::from_acc("bp_iterations", &iters).n(n).theta(theta));
        let stationary = run.stationary_at.map_or(f64::NAN, |g| g as f64);
        table.push(ResultRow::new("de_stationary_generation", stationary, 0.0, cfg.generations).n(n).theta(theta));
        for row in &run.history[1..] {
            let d = row.ks_to_prev.expect("later generations have a distance");
            table.push(ResultRow::new("population_distance", d, 0.0, pop.len()).n(n).t(row.generation).theta(theta));
        }
    }
    Ok(table)
}

/// Tree shapes with at most three nodes at radius 1.
fn small_shapes() -> Vec<Shape> {
    let leaf = ShapeVar::leaf;
    vec![
        Shape::Tree(leaf()),
        Shape::Tree(ShapeVar::with(vec![ShapeFac::with(vec![])])),
        Shape::Tree(ShapeVar::with(vec![ShapeFac::with(vec![leaf()])])),
        Shape::Tree(ShapeVar::with(vec![ShapeFac::with(vec![]), ShapeFac::with(vec![])])),
    ]
}

fn frequency_row(statistic: &str, hits: usize, total: usize) -> ResultRow {
    let p = hits as f64 / total as f64;
    ResultRow::new(statistic, p, (p * (1.0 - p) / total as f64).sqrt(), total)
}

struct GraphSample {
    shape: String,
    ball_sizes: Vec<usize>,
    residual_edges: u64,
    residual_pairs: u64,
    var_degree: usize,
    fac_degree: usize,
}

/// Radius-1 shape frequencies against the Galton-Watson law, neighbourhood
/// size tails, the edge frequency in the residual graph outside a ball,
/// and degree goodness of fit. One random root per sampled graph.
pub fn exp_graph_stats(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(cfg.experiment.name());
    let shapes = small_shapes();
    let codes: Vec<String> = shapes.iter().map(Shape::code).collect();
    let residual_t = cfg.radii.first().copied().unwrap_or(1);
    for &n in &cfg.sizes {
        let params = EnsembleParams::new(n, cfg.alpha, cfg.gamma)?;
        let (m, p) = (params.m(), params.p_edge());
        let samples = replicate(cfg, n, |rng| {
            let g = sample_graph_with(&params, rng);
            let root = rng.random_range(0..n);
            let shape = neighborhood_shape(&g, root, 1)?.code();
            let ball_sizes = cfg.radii.iter().map(|&t| neighborhood(&g, root, t).map(|b| b.size())).collect::<Result<_>>()?;
            let ball = neighborhood(&g, root, residual_t)?;
            let in_ball = ball.var_mask(n);
            let mut in_facs = vec![false; m];
            for &a in &ball.facs {
                in_facs[a] = true;
            }
            let residual_edges = g.edges().filter(|&(j, a)| !in_ball[j] && !in_facs[a]).count() as u64;
            let residual_pairs = ((n - ball.vars.len()) * (m - ball.facs.len())) as u64;
            Ok(GraphSample { shape, ball_sizes, residual_edges, residual_pairs, var_degree: g.var_neighbors(root).len(), fac_degree: g.fac_neighbors(0).len() })
        })?;
        let total = samples.len();

        for (shape, code) in shapes.iter().zip(&codes) {
            let hits = samples.iter().filter(|s| &s.shape == code).count();
            table.push(frequency_row("shape_probability", hits, total).n(n).t(1).label(code.clone()).bound(gw_shape_probability(shape, cfg.gamma, cfg.alpha, 1)));
        }
        for (r, &t) in cfg.radii.iter().enumerate() {
            for &size in &cfg.tail_sizes {
                let hits = samples.iter().filter(|s| s.ball_sizes[r] >= size).count();
                table.push(frequency_row("tail_probability", hits, total).n(n).t(t).label(format!("M={size}")));
            }
        }

        let edges: u64 = samples.iter().map(|s| s.residual_edges).sum();
        let pairs: u64 = samples.iter().map(|s| s.residual_pairs).sum();
        table.push(frequency_row("residual_edge_frequency", edges as usize, pairs as usize).n(n).t(residual_t).bound(p));

        let zero = samples.iter().filter(|s| s.var_degree == 0).count();
        table.push(frequency_row("root_degree_zero", zero, total).n(n).bound((-cfg.gamma * cfg.alpha).exp()));
        for (statistic, trials, degrees) in [
            ("var_degree_chi_square", m, samples.iter().map(|s| s.var_degree).collect::<Vec<_>>()),
            ("fac_degree_chi_square", n, samples.iter().map(|s| s.fac_degree).collect()),
        ] {
            let mut observed = vec![0u64; trials + 1];
            for d in degrees {
                observed[d] += 1;
            }
            let (stat, dof, pvalue) = chi_square_gof(&observed, &binomial_pmf(trials, p));
            table.push(ResultRow::new(statistic, pvalue, 0.0, total).n(n).label(format!("stat={stat:.6} dof={dof}")));
        }
    }
    Ok(table)
}
