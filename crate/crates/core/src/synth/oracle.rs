//! Exhaustive minimization over a simplex grid, for checking the solver on
//! tiny instances.
//!
//! The objective is rebuilt here from the raw constraint data, not from the
//! optimizer's loss code: per-row terms and per-pair smoothness terms are
//! tabulated over the grid, and the distribution term is tabulated over the
//! integer column sums. Enumeration then only adds table entries.

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::features::SimilarityGraph;
use crate::names::CharacterRoster;
use crate::optimizer::{LossWeights, PredictionMatrix};

pub const MAX_ORACLE_N: usize = 4;
pub const MAX_ORACLE_K: usize = 3;

/// All points of the `k`-simplex whose coordinates are multiples of `1/steps`,
/// as integer coordinates.
pub fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            rec(k - 1, remaining - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(k, steps, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub f: PredictionMatrix,
}

/// Minimum of the weighted objective over every `f` whose rows lie on the
/// simplex grid with spacing `resolution`.
#[allow(clippy::needless_range_loop)]
pub fn grid_oracle(
    constraints: &ConstraintSet,
    graph: &SimilarityGraph,
    roster: &CharacterRoster,
    weights: LossWeights,
    resolution: f64,
) -> Result<OracleResult> {
    let (n, k) = (constraints.n, constraints.k);
    if n > MAX_ORACLE_N || k > MAX_ORACLE_K {
        return Err(Error::OracleTooLarge { n, k });
    }
    if n == 0 || k == 0 || graph.n() != n || roster.len() != k {
        return Err(Error::InvalidInput("oracle instance shapes do not agree".into()));
    }
    let steps = (1.0 / resolution).round();
    if !(resolution > 0.0) || steps < 1.0 || (steps * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} does not divide 1"
        )));
    }
    let steps = steps as usize;
    let grid = simplex_grid(k, steps);
    let points: Vec<Vec<f64>> = grid
        .iter()
        .map(|p| p.iter().map(|&c| c as f64 / steps as f64).collect())
        .collect();
    let m = points.len();
    let name_male = roster.name_genders();

    // Per-row terms: label fit, soft targets, negatives, gender.
    let labeled: std::collections::BTreeSet<usize> = constraints.positives.iter().map(|p| p.0).collect();
    let l = labeled.len();
    let mut unary = vec![vec![0.0; m]; n];
    for (i, row) in unary.iter_mut().enumerate() {
        for (g, p) in row.iter_mut().zip(&points) {
            let mut v = 0.0;
            for &(pi, j) in &constraints.positives {
                if pi == i {
                    let d: f64 = (0..k).map(|c| (p[c] - f64::from(u8::from(c == j))).powi(2)).sum();
                    v += weights.initial * d / l as f64;
                }
            }
            for t in constraints.mi_targets.iter().filter(|t| t.instance == i) {
                let d: f64 = (0..k).map(|c| (p[c] - f64::from(u8::from(c == t.class))).powi(2)).sum();
                v += weights.mi * t.weight * d;
            }
            for &(ni, j) in &constraints.negatives {
                if ni == i {
                    v += weights.negative * p[j] * p[j];
                }
            }
            let pa = constraints.p_male_audio[i];
            for (j, &pn) in name_male.iter().enumerate() {
                if pa < 0.5 && pn > 0.5 {
                    v += weights.gender * pa * (1.0 - pn) * p[j];
                } else if pa > 0.5 && pn < 0.5 {
                    v += weights.gender * (1.0 - pa) * pn * p[j];
                }
            }
            *g = v;
        }
    }

    // Pair terms for a < b, counting both orderings.
    let sq_dist: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum())
                .collect()
        })
        .collect();
    let mut pair = vec![vec![None::<Vec<f64>>; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let w = weights.initial * (graph.weight(a, b) + graph.weight(b, a)) / n as f64;
            if w != 0.0 {
                let table: Vec<f64> = (0..m * m).map(|x| w * sq_dist[x / m][x % m]).collect();
                pair[a][b] = Some(table);
            }
        }
    }

    // Distribution term over integer column sums of the first k - 1 columns.
    let sums = n * steps + 1;
    let dis_value = |col_sums: &[usize]| -> f64 {
        let mut total_steps = 0;
        let mut v = 0.0;
        for (j, &s) in col_sums.iter().enumerate() {
            total_steps += s;
            let mean = s as f64 / (steps * n) as f64;
            v += (mean - constraints.prior[j]).powi(2);
        }
        let last = (n * steps - total_steps) as f64 / (steps * n) as f64;
        v + (last - constraints.prior[k - 1]).powi(2)
    };
    let dis_table: Vec<f64> = match k {
        1 => vec![weights.distribution * dis_value(&[])],
        2 => (0..sums).map(|a| weights.distribution * dis_value(&[a])).collect(),
        _ => (0..sums * sums)
            .map(|x| {
                let (a, b) = (x / sums, x % sums);
                if a + b <= n * steps {
                    weights.distribution * dis_value(&[a, b])
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let dis_index = |s: &[usize; 2]| -> usize {
        match k {
            1 => 0,
            2 => s[0],
            _ => s[0] * sums + s[1],
        }
    };

    // Every term is non-negative, so the cheapest unary entries of the rows
    // not yet assigned bound what the rest of a branch can add.
    let mut order: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut suffix_bound = vec![0.0; n + 1];
    for (i, row) in unary.iter().enumerate() {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        suffix_bound[i] = row[idx[0]];
        order.push(idx);
    }
    for i in (0..n).rev() {
        suffix_bound[i] += suffix_bound[i + 1];
    }

    let mut best = f64::INFINITY;
    let mut best_choice = vec![0usize; n];
    let mut choice = vec![0usize; n];
    let mut col = [0usize; 2];
    search(
        0,
        0.0,
        &mut choice,
        &mut col,
        &Tables {
            grid: &grid,
            unary: &unary,
            order: &order,
            suffix_bound: &suffix_bound,
            pair: &pair,
            dis_table: &dis_table,
            m,
            k,
        },
        &dis_index,
        &mut best,
        &mut best_choice,
    );

    let rows: Vec<Vec<f64>> = best_choice.iter().map(|&c| points[c].clone()).collect();
    Ok(OracleResult {
        objective: best,
        f: PredictionMatrix::from_rows(&rows),
    })
}

struct Tables<'a> {
    grid: &'a [Vec<usize>],
    unary: &'a [Vec<f64>],
    order: &'a [Vec<usize>],
    suffix_bound: &'a [f64],
    pair: &'a [Vec<Option<Vec<f64>>>],
    dis_table: &'a [f64],
    m: usize,
    k: usize,
}

#[allow(clippy::too_many_arguments)]
fn search(
    row: usize,
    partial: f64,
    choice: &mut [usize],
    col: &mut [usize; 2],
    t: &Tables<'_>,
    dis_index: &dyn Fn(&[usize; 2]) -> usize,
    best: &mut f64,
    best_choice: &mut [usize],
) {
    let n = choice.len();
    for &c in &t.order[row] {
        if partial + t.unary[row][c] + t.suffix_bound[row + 1] >= *best {
            // Candidates are sorted by unary cost; the rest cannot do better.
            break;
        }
        let mut v = partial + t.unary[row][c];
        for (prev, &pc) in choice[..row].iter().enumerate() {
            if let Some(table) = &t.pair[prev][row] {
                v += table[pc * t.m + c];
            }
        }
        if v + t.suffix_bound[row + 1] >= *best {
            continue;
        }
        let point = &t.grid[c];
        let saved = *col;
        for (j, s) in col.iter_mut().enumerate().take(t.k.saturating_sub(1).min(2)) {
            *s += point[j];
        }
        choice[row] = c;
        if row + 1 == n {
            let total = v + t.dis_table[dis_index(col)];
            if total < *best {
                *best = total;
                best_choice.copy_from_slice(choice);
            }
        } else {
            search(row + 1, v, choice, col, t, dis_index, best, best_choice);
        }
        *col = saved;
    }
}
