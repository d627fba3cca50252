//! Small statistics helpers shared by the experiment drivers and tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Running mean and variance (Welford), mergeable across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Welford::new();
        for v in iter {
            acc.push(v);
        }
        acc
    }
}

/// Two-sample Kolmogorov-Smirnov statistic. Inputs need not be sorted.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Pearson chi-square goodness of fit. Adjacent cells are pooled from the
/// upper tail until every expected count is at least 5. Returns
/// `(statistic, degrees_of_freedom, p_value)`.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> (f64, usize, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        obs_acc += o as f64;
        exp_acc += p * total;
        if exp_acc >= 5.0 {
            cells.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs_acc;
                last.1 += exp_acc;
            }
            None => cells.push((obs_acc, exp_acc)),
        }
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    let p = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(stat)
    };
    (stat, dof, p)
}

/// Natural-log entropy of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

pub fn binomial_pmf(trials: usize, prob: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(trials + 1);
    let mut ln_choose = 0.0f64;
    for k in 0..=trials {
        if k > 0 {
            ln_choose += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        }
        let v = if prob == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else if prob == 1.0 {
            if k == trials { 1.0 } else { 0.0 }
        } else {
            (ln_choose + k as f64 * prob.ln() + (trials - k) as f64 * (1.0 - prob).ln()).exp()
        };
        out.push(v);
    }
    out
}

pub fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=k).map(|v| (v as f64).ln()).sum();
    (k as f64 * mean.ln() - mean - ln_fact).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn welford_merge_matches_single_pass() {
        let data: Vec<f64> = (0..50).map(|v| (v as f64 * 0.37).sin()).collect();
        let whole: Welford = data.iter().copied().collect();
        let mut left: Welford = data[..17].iter().copied().collect();
        let right: Welford = data[17..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        assert_relative_eq!(left.mean(), whole.mean(), epsilon = 1e-14);
        assert_relative_eq!(left.variance(), whole.variance(), epsilon = 1e-13);
    }

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        let a = [0.1, 0.2, 0.2, 0.9];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.0], &[1.0, 1.0, 1.0]), 1.0);
        assert_relative_eq!(ks_statistic(&[0.0, 1.0], &[1.0, 1.0]), 0.5);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let pmf = binomial_pmf(40, 0.07);
        assert_relative_eq!(pmf.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pmf[0], 0.93f64.powi(40), epsilon = 1e-14);
    }

    #[test]
    fn chi_square_accepts_exact_counts() {
        let probs = [0.25, 0.5, 0.25];
        let (stat, dof, p) = chi_square_gof(&[250, 500, 250], &probs);
        assert_eq!(stat, 0.0);
        assert_eq!(dof, 2);
        assert_relative_eq!(p, 1.0);
    }
}
