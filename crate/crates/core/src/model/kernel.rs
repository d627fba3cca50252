use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;

/// Permutation-symmetric likelihood table `L[y | x_1..x_k]`.
///
/// Rows are indexed by the multiset of inputs (the sorted input tuple), so
/// symmetry holds by construction. Multisets are ranked in colex order of
/// the strictly increasing sequence `x_(j) + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    arity: usize,
    q: usize,
    s: usize,
    table: Vec<f64>,
}

impl DiscreteKernel {
    /// Builds a kernel from a function of the sorted input tuple returning
    /// the output distribution. Rows are checked to be stochastic.
    pub fn from_fn(q: usize, arity: usize, s: usize, mut row: impl FnMut(&[usize]) -> Vec<f64>) -> Result<Self> {
        if q == 0 || s == 0 {
            return Err(Error::Validation("kernel alphabets must be non-empty".into()));
        }
        let rows = multiset_count(q, arity);
        let mut table = vec![0.0; rows * s];
        let mut tuple = vec![0usize; arity];
        loop {
            let r = rank_sorted(&tuple);
            let dist = row(&tuple);
            if dist.len() != s {
                return Err(Error::Validation(format!(
                    "kernel row for inputs {tuple:?} has {} outputs, expected {s}",
                    dist.len()
                )));
            }
            table[r * s..(r + 1) * s].copy_from_slice(&dist);
            if !next_multiset(&mut tuple, q) {
                break;
            }
        }
        let kernel = Self { arity, q, s, table };
        kernel.check_rows()?;
        Ok(kernel)
    }

    /// Builds a kernel from a full table indexed `[y][x_1]..[x_k]` flattened
    /// row-major (outputs outermost). Fails on the first non-stochastic row
    /// or asymmetric entry.
    pub fn from_full_table(q: usize, arity: usize, s: usize, flat: &[f64]) -> Result<Self> {
        let inputs = q.pow(arity as u32);
        if flat.len() != s * inputs {
            return Err(Error::Validation(format!(
                "arity-{arity} table has {} entries, expected {}",
                flat.len(),
                s * inputs
            )));
        }
        let mut tuple = vec![0usize; arity];
        for idx in 0..inputs {
            decode_full(idx, q, &mut tuple);
            let total: f64 = (0..s).map(|y| flat[y * inputs + idx]).sum();
            if (total - 1.0).abs() > ROW_TOL || (0..s).any(|y| !(flat[y * inputs + idx] >= 0.0)) {
                return Err(Error::Validation(format!(
                    "arity-{arity} kernel row for inputs {tuple:?} is not a distribution (sums to {total})"
                )));
            }
            let mut sorted = tuple.clone();
            sorted.sort_unstable();
            let canon = encode_full(&sorted, q);
            if canon != idx {
                for y in 0..s {
                    let (a, b) = (flat[y * inputs + idx], flat[y * inputs + canon]);
                    if a != b {
                        return Err(Error::Validation(format!(
                            "arity-{arity} kernel is not permutation symmetric: L[{y} | {tuple:?}] = {a} but L[{y} | {sorted:?}] = {b}"
                        )));
                    }
                }
            }
        }
        Self::from_fn(q, arity, s, |sorted| {
            let idx = encode_full(sorted, q);
            (0..s).map(|y| flat[y * inputs + idx]).collect()
        })
    }

    /// Full table `[y][x_1]..[x_k]` flattened row-major.
    pub fn to_full_table(&self) -> Vec<f64> {
        let inputs = self.q.pow(self.arity as u32);
        let mut flat = vec![0.0; self.s * inputs];
        let mut tuple = vec![0usize; self.arity];
        for idx in 0..inputs {
            decode_full(idx, self.q, &mut tuple);
            for y in 0..self.s {
                flat[y * inputs + idx] = self.prob(y, &tuple);
            }
        }
        flat
    }

    fn check_rows(&self) -> Result<()> {
        for (r, row) in self.table.chunks(self.s).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOL || row.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Validation(format!(
                    "arity-{} kernel row {r} (inputs {:?}) sums to {total}",
                    self.arity,
                    unrank(r, self.q, self.arity)
                )));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn input_alphabet(&self) -> usize {
        self.q
    }

    pub fn output_alphabet(&self) -> usize {
        self.s
    }

    pub fn num_rows(&self) -> usize {
        self.table.len() / self.s
    }

    /// Output distribution for the input multiset with the given rank.
    pub fn row(&self, rank: usize) -> &[f64] {
        &self.table[rank * self.s..(rank + 1) * self.s]
    }

    /// Rank of an input tuple in any order.
    pub fn rank(&self, inputs: &[usize]) -> usize {
        debug_assert_eq!(inputs.len(), self.arity);
        rank_unsorted(inputs, self.q)
    }

    pub fn prob(&self, y: usize, inputs: &[usize]) -> f64 {
        self.table[self.rank(inputs) * self.s + y]
    }

    /// Output distribution for an input tuple in any order.
    pub fn dist(&self, inputs: &[usize]) -> &[f64] {
        self.row(self.rank(inputs))
    }
}

/// `C(q + k - 1, k)`: number of size-`k` multisets over `q` symbols.
pub fn multiset_count(q: usize, k: usize) -> usize {
    binomial(q + k - 1, k)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, j| acc * (n - j) / (j + 1))
}

fn rank_sorted(sorted: &[usize]) -> usize {
    sorted
        .iter()
        .enumerate()
        .map(|(j, &x)| binomial(x + j, j + 1))
        .sum()
}

fn rank_unsorted(inputs: &[usize], q: usize) -> usize {
    if q == 2 {
        return inputs.iter().filter(|&&x| x == 1).count();
    }
    let mut sorted = inputs.to_vec();
    sorted.sort_unstable();
    rank_sorted(&sorted)
}

fn unrank(rank: usize, q: usize, k: usize) -> Vec<usize> {
    let mut tuple = vec![0usize; k];
    loop {
        if rank_sorted(&tuple) == rank {
            return tuple;
        }
        if !next_multiset(&mut tuple, q) {
            return tuple;
        }
    }
}

/// Advances a nondecreasing tuple to the next one in colex rank order.
fn next_multiset(tuple: &mut [usize], q: usize) -> bool {
    // colex over x_(j) + j: increment the lowest position that can grow
    let k = tuple.len();
    for j in 0..k {
        let cap = if j + 1 < k { tuple[j + 1] } else { q - 1 };
        if tuple[j] < cap {
            tuple[j] += 1;
            for v in tuple.iter_mut().take(j) {
                *v = 0;
            }
            return true;
        }
    }
    false
}

fn decode_full(mut idx: usize, q: usize, out: &mut [usize]) {
    // x_1 is the most significant digit, matching nested [x_1][x_2].. arrays
    for slot in out.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
}

fn encode_full(tuple: &[usize], q: usize) -> usize {
    tuple.iter().fold(0, |acc, &x| acc * q + x)
}

/// Likelihood-ratio moment `max_{x, x1, x2} sum_y L(y|x1)/L(y|x2) L(y|x)`.
/// `None` means the kernel is not soft (some ratio is unbounded).
pub fn softness_constant(kernel: &DiscreteKernel) -> Option<f64> {
    let rows = kernel.num_rows();
    let mut best = 0.0f64;
    for r1 in 0..rows {
        for r2 in 0..rows {
            let (l1, l2) = (kernel.row(r1), kernel.row(r2));
            for r in 0..rows {
                let l = kernel.row(r);
                let mut total = 0.0;
                for y in 0..kernel.output_alphabet() {
                    if l2[y] == 0.0 {
                        if l1[y] > 0.0 || l[y] > 0.0 {
                            return None;
                        }
                        continue;
                    }
                    total += l1[y] / l2[y] * l[y];
                }
                best = best.max(total);
            }
        }
    }
    Some(best)
}
