//! Weighted temporal causal graphs over (variable, lag) parents.

use crate::tensor::{Scalar, Tensor};

/// Weighted adjacency over `(variable, lag) -> variable` edges.
///
/// `weights` has shape `[n, l_max+1, n]`: entry `[i][c][j]` is the strength
/// of the edge from variable `i` at lag column `c` to variable `j` at the
/// current timestep. Column `l_max` is the contemporaneous (lag 0) block;
/// column 0 is the oldest lag. The lag value of column `c` is `l_max - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph<F> {
    pub names: Vec<String>,
    pub l_max: usize,
    pub weights: Tensor<F>,
}

impl<F: Scalar> TemporalGraph<F> {
    pub fn zeros(names: Vec<String>, l_max: usize) -> Self {
        let n = names.len();
        TemporalGraph {
            names,
            l_max,
            weights: Tensor::zeros(&[n, l_max + 1, n]),
        }
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    /// Lag value encoded by weight column `c`.
    pub fn lag_of_column(&self, c: usize) -> usize {
        self.l_max - c
    }

    /// Weight column encoding lag `lag`.
    pub fn column_of_lag(&self, lag: usize) -> usize {
        self.l_max - lag
    }

    pub fn weight_at(&self, from: usize, lag: usize, to: usize) -> F {
        self.weights.get3(from, self.column_of_lag(lag), to)
    }

    pub fn set_weight(&mut self, from: usize, lag: usize, to: usize, w: F) {
        let c = self.column_of_lag(lag);
        self.weights.set3(from, c, to, w);
    }

    /// The lag-0 block as an `n x n` matrix (`[i][j]` = edge i -> j).
    pub fn contemporaneous_block(&self) -> Tensor<F> {
        let n = self.n();
        let c = self.l_max;
        let mut out = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                out.set2(i, j, self.weights.get3(i, c, j));
            }
        }
        out
    }

    /// Binary graph keeping edges with weight strictly above `omega`.
    pub fn threshold(&self, omega: F) -> TemporalGraph<F> {
        let mut out = self.clone();
        for w in out.weights.data_mut() {
            *w = if *w > omega { F::one() } else { F::zero() };
        }
        out
    }

    /// Iterates nonzero edges as `(from, lag, to, weight)` in
    /// (from, lag, to) lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, usize, F)> {
        let n = self.n();
        let mut out = Vec::new();
        for from in 0..n {
            for lag in 0..=self.l_max {
                for to in 0..n {
                    let w = self.weight_at(from, lag, to);
                    if w != F::zero() {
                        out.push((from, lag, to, w));
                    }
                }
            }
        }
        out
    }

    /// Topological order of the contemporaneous block treating nonzero
    /// weights as edges, or `None` if it has a cycle.
    pub fn contemporaneous_topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let block = self.contemporaneous_block();
        let mut indegree = vec![0usize; n];
        for i in 0..n {
            for (j, deg) in indegree.iter_mut().enumerate() {
                if block.get2(i, j) != F::zero() {
                    *deg += 1;
                }
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop() {
            order.push(v);
            for (j, deg) in indegree.iter_mut().enumerate() {
                if block.get2(v, j) != F::zero() {
                    *deg -= 1;
                    if *deg == 0 {
                        queue.push(j);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}
