//! Compressed-row storage and an envelope (profile) Cholesky factorization
//! under reverse Cuthill-McKee ordering.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles an `n x n` matrix, summing duplicate entries. Explicit
    /// zeros produced by summation are kept so the sparsity pattern stays
    /// structural.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Exact structural and numeric symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| fabs(v)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).filter(|&(j, _)| j != i).map(|(j, _)| j).collect())
        .collect();
    let degree = |i: usize| adj[i].len();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![usize::MAX; n];

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree(i))
            .unwrap();
        let start = pseudo_peripheral(seed, &adj, &mut seen);

        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree(v), v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Level structure `(eccentricity, last level)` of a BFS from `root`.
fn levels(root: usize, adj: &[Vec<usize>], seen: &mut [usize]) -> (usize, Vec<usize>) {
    let mut frontier = vec![root];
    seen[root] = root;
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &adj[u] {
                if seen[v] != root {
                    seen[v] = root;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        frontier = next;
        depth += 1;
    }
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], seen: &mut [usize]) -> usize {
    let mut root = seed;
    let (mut ecc, mut last) = levels(root, adj, seen);
    loop {
        let candidate = *last.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
        // seen[] is keyed by root; reset marks so the candidate BFS starts clean
        for s in seen.iter_mut() {
            *s = usize::MAX;
        }
        let (e, l) = levels(candidate, adj, seen);
        for s in seen.iter_mut() {
            *s = usize::MAX;
        }
        if e <= ecc {
            return root;
        }
        root = candidate;
        ecc = e;
        last = l;
    }
}

/// `L L^T` factor of a symmetric positive-definite matrix in envelope storage.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (old_i, &i) in inverse.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let j = inverse[old_j];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (old_i, &i) in inverse.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let j = inverse[old_j];
                if j <= i {
                    data[offset[i] + (j - first[i])] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = offset[i];
            for j in fi..i {
                let fj = first[j];
                let row_j = offset[j];
                let k0 = fi.max(fj);
                let mut s = data[row_i + (j - fi)];
                for k in k0..j {
                    s -= data[row_i + (k - fi)] * data[row_j + (k - fj)];
                }
                data[row_i + (j - fi)] = s / data[row_j + (j - fj)];
            }
            let diag = data[row_i + (i - fi)];
            let mut d = diag;
            for k in fi..i {
                let l = data[row_i + (k - fi)];
                d -= l * l;
            }
            if !(d.is_finite() && d > 1e-15 * diag) {
                return Err(Error::NotPositiveDefinite { row: perm[i] });
            }
            data[row_i + (i - fi)] = sqrt(d);
        }

        Ok(Self {
            perm,
            first,
            offset,
            data,
        })
    }

    /// Stored entries of the factor, a measure of fill.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.offset[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[row + (k - fi)] * y[k];
            }
            y[i] = s / self.data[row + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.offset[i];
            let xi = y[i] / self.data[row + (i - fi)];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.data[row + (k - fi)] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
