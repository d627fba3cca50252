//! Experiments that need the exact posterior.

use rand::seq::index::sample;
use rand::Rng;

use super::{replicate, ExperimentConfig, ResultRow, ResultTable};
use crate::bp::{boundary_factorized_marginal, local_update_at_cavity, Method};
use crate::error::{Error, Result};
use crate::graph::{sample_graph_with, EnsembleParams, FactorGraph};
use crate::model::{sample_crn_world, sample_world_with, World};
use crate::oracle::{check_feasible, mutual_information_sum, overlap_variance_of, Posterior};
use crate::rng::{stream, SimRng};
use crate::stats::Welford;

/// Attempts per replica before `forest_only` sampling gives up.
const MAX_FOREST_TRIES: usize = 100_000;

fn draw_theta(cfg: &ExperimentConfig, rng: &mut SimRng) -> f64 {
    cfg.theta.unwrap_or_else(|| rng.random::<f64>() * cfg.epsilon)
}

fn sample_instance(cfg: &ExperimentConfig, params: &EnsembleParams, rng: &mut SimRng) -> Result<(FactorGraph, f64, World)> {
    let mut tries = 0;
    let g = loop {
        let g = sample_graph_with(params, rng);
        if !cfg.forest_only || g.is_forest() {
            break g;
        }
        tries += 1;
        if tries == MAX_FOREST_TRIES {
            return Err(Error::InvalidParams(format!("no forest in {MAX_FOREST_TRIES} draws at n = {}", params.n)));
        }
    };
    let theta = draw_theta(cfg, rng);
    let world = sample_world_with(&g, &cfg.model, theta, rng)?;
    Ok((g, theta, world))
}

fn oracle_params(cfg: &ExperimentConfig, n: usize) -> Result<EnsembleParams> {
    check_feasible(cfg.model.q(), n)?;
    EnsembleParams::new(n, cfg.alpha, cfg.gamma)
}

/// `(|X|+1)^k exp(k^2 / 2n) sqrt(H(X_1) epsilon / n)`.
pub fn correlation_bound(q: usize, k: usize, n: usize, prior_entropy: f64, epsilon: f64) -> f64 {
    let k = k as f64;
    let n = n as f64;
    ((q + 1) as f64).powf(k) * (k * k / (2.0 * n)).exp() * (prior_entropy * epsilon / n).sqrt()
}

/// Theta-integrated factorization gap at `k` random distinct nodes, the
/// normalized mutual-information sum and the overlap variance of symbol 1.
pub fn exp_correlation_decay(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let q = cfg.model.q();
    let h1 = cfg.model.prior().entropy();
    let eps = cfg.epsilon;
    let mut table = ResultTable::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let params = oracle_params(cfg, n)?;
        if cfg.k > n {
            return Err(Error::config("k", format!("k = {} exceeds n = {n}", cfg.k)));
        }
        let samples = replicate(cfg, n, |rng| {
            let (g, _, world) = sample_instance(cfg, &params, rng)?;
            let post = Posterior::compute(&g, &cfg.model, &world)?;
            let nodes = sample(rng, n, cfg.k).into_vec();
            let gap = post.joint(&nodes)?.factorization_gap();
            Ok([eps * gap, eps * mutual_information_sum(&post) / n as f64, eps * overlap_variance_of(&post, 1)])
        })?;
        let mut acc = [Welford::new(), Welford::new(), Welford::new()];
        for s in &samples {
            for (a, v) in acc.iter_mut().zip(s) {
                a.push(*v);
            }
        }
        table.push(ResultRow::from_acc("factorization_gap", &acc[0]).n(n).k(cfg.k).bound(correlation_bound(q, cfg.k, n, h1, eps)));
        table.push(ResultRow::from_acc("mutual_information_sum", &acc[1]).n(n).bound(2.0 * h1));
        table.push(ResultRow::from_acc("overlap_variance", &acc[2]).n(n).label("xi=1"));
    }
    Ok(table)
}

/// Theta-integrated `tv(mu_i, F^n_i(oracle cavity marginals))` at a random
/// node, plus `tv(mu_i, mu^{theta,t}_i)` for every configured radius.
pub fn exp_bp_vs_exact(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.model.require_soft()?;
    let eps = cfg.epsilon;
    let mut table = ResultTable::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let params = oracle_params(cfg, n)?;
        let samples = replicate(cfg, n, |rng| {
            let (g, _, world) = sample_instance(cfg, &params, rng)?;
            let i = rng.random_range(0..n);
            let truth = Posterior::compute(&g, &cfg.model, &world)?.marginal(i);
            let mut out = vec![eps * truth.tv(&local_update_at_cavity(&g, &cfg.model, &world, i, &Method::Oracle)?)];
            for &t in &cfg.radii {
                out.push(eps * truth.tv(&boundary_factorized_marginal(&g, &cfg.model, &world, i, t, &Method::Oracle)?));
            }
            Ok(out)
        })?;
        let mut acc = vec![Welford::new(); 1 + cfg.radii.len()];
        for s in &samples {
            for (a, v) in acc.iter_mut().zip(s) {
                a.push(*v);
            }
        }
        let label = if cfg.forest_only { "forest" } else { "" };
        table.push(ResultRow::from_acc("local_update_gap", &acc[0]).n(n).label(label));
        for (a, &t) in acc[1..].iter().zip(&cfg.radii) {
            table.push(ResultRow::from_acc("boundary_gap", a).n(n).t(t).label(label));
        }
    }
    Ok(table)
}

/// Centered finite difference of `H(X | Y, Z(theta))` on common random
/// numbers against `-sum_i H(X_i | Y, Z^(i)(theta))` on the same worlds,
/// for one sampled graph per size.
pub fn exp_entropy_identity(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let theta = cfg.theta.ok_or_else(|| Error::config("theta", "required for entropy_identity"))?;
    let d = cfg.delta_theta;
    if d < 0.02 {
        return Err(Error::config("delta_theta", format!("{d} is below 0.02, too small for Monte-Carlo noise")));
    }
    if theta - d < 0.0 || theta + d > 1.0 {
        return Err(Error::config("delta_theta", format!("theta +- delta_theta must stay in [0, 1] (theta = {theta})")));
    }
    let mut table = ResultTable::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let params = oracle_params(cfg, n)?;
        let g = sample_graph_with(&params, &mut stream(cfg.seed, n as u64));
        let samples = replicate(cfg, n, |rng| {
            let w = sample_crn_world(&g, &cfg.model, rng)?;
            let h_plus = Posterior::compute(&g, &cfg.model, &w.at(theta + d))?.entropy();
            let h_minus = Posterior::compute(&g, &cfg.model, &w.at(theta - d))?.entropy();
            let base_world = w.at(theta);
            let base = Posterior::compute(&g, &cfg.model, &base_world)?;
            let mut rhs = 0.0;
            for i in 0..n {
                rhs -= if base_world.reveal[i].is_none() {
                    base.marginal(i).entropy()
                } else {
                    Posterior::compute(&g, &cfg.model, &base_world.masked(&[i]))?.marginal(i).entropy()
                };
            }
            Ok(((h_plus - h_minus) / (2.0 * d), rhs))
        })?;
        let fd: Welford = samples.iter().map(|s| s.0).collect();
        let rhs: Welford = samples.iter().map(|s| s.1).collect();
        let diff: Welford = samples.iter().map(|s| s.0 - s.1).collect();
        let scale = rhs.mean().abs();
        let (rel, rel_se) = if scale > 0.0 { (diff.mean().abs() / scale, diff.std_error() / scale) } else { (diff.mean().abs(), diff.std_error()) };
        table.push(ResultRow::from_acc("entropy_derivative_fd", &fd).n(n).theta(theta));
        table.push(ResultRow::from_acc("entropy_derivative_identity", &rhs).n(n).theta(theta));
        table.push(ResultRow::new("relative_error", rel, rel_se, samples.len()).n(n).theta(theta));
    }
    Ok(table)
}

/// Oracle posteriors `P(X_i = 1 | Y, Z)` over all nodes of every replica,
/// split into equal-count bins by predicted value; each bin compares the
/// mean prediction with the observed frequency of `X_i = 1`.
pub fn exp_calibration(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let params = oracle_params(cfg, n)?;
        let samples = replicate(cfg, n, |rng| {
            let (g, _, world) = sample_instance(cfg, &params, rng)?;
            let post = Posterior::compute(&g, &cfg.model, &world)?;
            Ok((0..n).map(|i| (post.marginal(i)[1], world.x[i] == 1)).collect::<Vec<_>>())
        })?;
        let mut pairs: Vec<(f64, bool)> = samples.into_iter().flatten().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = pairs.len();
        let mut worst: f64 = 0.0;
        for b in 0..cfg.bins {
            let chunk = &pairs[b * total / cfg.bins..(b + 1) * total / cfg.bins];
            if chunk.is_empty() {
                continue;
            }
            let cnt = chunk.len() as f64;
            let pred = chunk.iter().map(|p| p.0).sum::<f64>() / cnt;
            let freq = chunk.iter().filter(|p| p.1).count() as f64 / cnt;
            let se = (freq * (1.0 - freq) / cnt).sqrt();
            let label = format!("bin={b}");
            table.push(ResultRow::new("calibration_predicted", pred, 0.0, chunk.len()).n(n).label(label.clone()));
            table.push(ResultRow::new("calibration_observed", freq, se, chunk.len()).n(n).label(label.clone()));
            table.push(ResultRow::new("calibration_gap", (pred - freq).abs(), se, chunk.len()).n(n).label(label));
            worst = worst.max((pred - freq).abs());
        }
        table.push(ResultRow::new("max_calibration_gap", worst, 0.0, total).n(n));
    }
    Ok(table)
}
