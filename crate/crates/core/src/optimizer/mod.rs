//! The unified objective over row-stochastic prediction matrices and its
//! projected gradient descent solver.

mod loss;
mod projection;
mod solver;

pub use loss::{
    gradient, loss_distribution, loss_gender, loss_initial, loss_mi, loss_negative, total_loss, LossTerms, LossWeights,
    Objective,
};
pub use projection::project_row_simplex;
pub use solver::{predict_names, solve_pgd, solve_pgd_observed, SolveOutcome, SolverConfig, Termination, TraceRow};

use std::ops::{Index, IndexMut};

/// An `n x k` matrix of naming scores, row-major. Solver outputs keep every
/// row on the probability simplex; loss functions accept any values.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl PredictionMatrix {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            values: vec![0.0; n * k],
        }
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            values: vec![1.0 / k as f64; n * k],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == k), "ragged rows");
        Self {
            n: rows.len(),
            k,
            values: rows.concat(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest violation of row-stochasticity: negative entries or row sums away from 1.
    pub fn simplex_violation(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let neg = row.iter().fold(0.0f64, |m, &x| m.max(-x));
                let sum: f64 = row.iter().sum();
                neg.max((sum - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        self.values.iter().all(|x| x.is_finite()) && self.simplex_violation() <= tol
    }
}

impl Index<(usize, usize)> for PredictionMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.k + j]
    }
}

impl IndexMut<(usize, usize)> for PredictionMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.k + j]
    }
}
