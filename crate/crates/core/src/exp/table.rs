use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::stats::Welford;

/// Column order of every result CSV.
pub const COLUMNS: [&str; 11] = ["experiment", "statistic", "n", "k", "t", "theta", "label", "estimate", "std_error", "bound", "count"];

/// One estimate with its parameters. `bound` carries the analytic value the
/// estimate is checked against, when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub statistic: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub theta: Option<f64>,
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: Option<f64>,
    pub count: usize,
}

impl ResultRow {
    pub fn new(statistic: &str, estimate: f64, std_error: f64, count: usize) -> Self {
        Self { statistic: statistic.into(), n: None, k: None, t: None, theta: None, label: String::new(), estimate, std_error, bound: None, count }
    }

    pub fn from_acc(statistic: &str, acc: &Welford) -> Self {
        Self::new(statistic, acc.mean(), acc.std_error(), acc.count() as usize)
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn t(mut self, t: usize) -> Self {
        self.t = Some(t);
        self
    }

    pub fn theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    /// `estimate <= bound + slack * std_error`; `None` without a bound.
    pub fn within_bound(&self, slack: f64) -> Option<bool> {
        self.bound.map(|b| self.estimate <= b + slack * self.std_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub experiment: String,
    pub rows: Vec<ResultRow>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    /// Rows with the given statistic name, in table order.
    pub fn select<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic == statistic)
    }

    /// First row with this statistic at size `n`.
    pub fn find(&self, statistic: &str, n: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.statistic == statistic && r.n == Some(n))
    }

    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.experiment,
                r.statistic,
                opt(r.n),
                opt(r.k),
                opt(r.t),
                r.theta.map(float).unwrap_or_default(),
                r.label,
                float(r.estimate),
                float(r.std_error),
                r.bound.map(float).unwrap_or_default(),
                r.count
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new("demo");
        t.push(ResultRow::new("gap", 0.125, 0.0, 3).n(6).k(2).bound(1.0));
        t.push(ResultRow::new("ks", 1.0 / 3.0, 0.5, 1).label("xi=1").theta(0.1));
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "experiment,statistic,n,k,t,theta,label,estimate,std_error,bound,count");
        assert_eq!(lines[1], "demo,gap,6,2,,,,1.2500000000000000e-1,0.0000000000000000e0,1.0000000000000000e0,3");
        assert_eq!(lines[2], "demo,ks,,,,1.0000000000000001e-1,xi=1,3.3333333333333331e-1,5.0000000000000000e-1,,1");
        assert_eq!(t.find("gap", 6).unwrap().within_bound(3.0), Some(true));
    }
}
