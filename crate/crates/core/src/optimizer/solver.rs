use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::features::SimilarityGraph;
use crate::names::CharacterRoster;

use super::{project_row_simplex, LossWeights, Objective, PredictionMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Largest step tried; backtracking shrinks it as needed.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    /// Step shrink factor in (0, 1).
    pub backtrack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iters: 2000,
            tolerance: 1e-7,
            backtrack: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step size must be > 0, got {}",
                self.step_size
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be >= 0, got {}",
                self.tolerance
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidInput(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative objective decrease fell below the tolerance (or the
    /// objective reached zero).
    Converged,
    /// The projected step vanished or no step size gave a decrease.
    Stationary,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step_size: f64,
}

impl TraceRow {
    pub fn to_csv(rows: &[TraceRow]) -> String {
        let mut out = String::from("iteration,objective,step_size\n");
        for r in rows {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.objective, r.step_size));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub f: PredictionMatrix,
    pub iterations: usize,
    pub objective: f64,
    pub termination: Termination,
    /// Row 0 is the uniform starting point.
    pub trace: Vec<TraceRow>,
}

pub fn solve_pgd(
    constraints: &ConstraintSet,
    graph: &SimilarityGraph,
    roster: &CharacterRoster,
    weights: LossWeights,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let objective = Objective::new(constraints, graph, roster, weights)?;
    solve_pgd_observed(&objective, config, |_, _, _| {})
}

fn project_rows(f: &mut PredictionMatrix) {
    for i in 0..f.n() {
        let p = project_row_simplex(f.row(i));
        f.row_mut(i).copy_from_slice(&p);
    }
}

/// Projected gradient descent from uniform rows. `observe` sees every
/// accepted iterate, starting with iteration 0.
///
/// Each step starts at twice the previous accepted step (capped at
/// `config.step_size`) and shrinks by `config.backtrack` until the
/// projected point satisfies the sufficient-decrease condition
/// `F(x+) <= F(x) + <g, x+ - x> + ||x+ - x||^2 / (2 t)`, which also
/// guarantees `F(x+) <= F(x)`.
pub fn solve_pgd_observed(
    objective: &Objective<'_>,
    config: &SolverConfig,
    mut observe: impl FnMut(usize, &PredictionMatrix, f64),
) -> Result<SolveOutcome> {
    config.validate()?;
    let (n, k) = (objective.n(), objective.k());
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot solve an empty problem ({n} x {k})"
        )));
    }
    let min_step = config.step_size * 1e-14;
    let mut f = PredictionMatrix::uniform(n, k);
    let mut value = objective.value(&f);
    check_finite(value, 0)?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        objective: value,
        step_size: 0.0,
    }];
    observe(0, &f, value);

    let mut step = config.step_size;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut candidate = f.clone();
    'outer: for it in 1..=config.max_iters {
        if value == 0.0 {
            termination = Termination::Converged;
            break;
        }
        let grad = objective.gradient(&f);
        let mut trial = (step / config.backtrack).min(config.step_size);
        let next_value = loop {
            for ((c, x), g) in candidate
                .as_mut_slice()
                .iter_mut()
                .zip(f.as_slice())
                .zip(grad.as_slice())
            {
                *c = x - trial * g;
            }
            project_rows(&mut candidate);
            let (mut linear, mut dist_sq) = (0.0, 0.0);
            for ((c, x), g) in candidate.as_slice().iter().zip(f.as_slice()).zip(grad.as_slice()) {
                let d = c - x;
                linear += g * d;
                dist_sq += d * d;
            }
            if dist_sq == 0.0 {
                termination = Termination::Stationary;
                break 'outer;
            }
            let cv = objective.value(&candidate);
            check_finite(cv, it)?;
            if cv <= value && cv <= value + linear + dist_sq / (2.0 * trial) {
                break cv;
            }
            trial *= config.backtrack;
            if trial < min_step {
                termination = Termination::Stationary;
                break 'outer;
            }
        };
        let relative = (value - next_value) / value.abs().max(f64::MIN_POSITIVE);
        std::mem::swap(&mut f, &mut candidate);
        value = next_value;
        step = trial;
        iterations = it;
        trace.push(TraceRow {
            iteration: it,
            objective: value,
            step_size: trial,
        });
        observe(it, &f, value);
        if relative < config.tolerance {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(SolveOutcome {
        f,
        iterations,
        objective: value,
        termination,
        trace,
    })
}

fn check_finite(value: f64, iteration: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "objective is {value} at iteration {iteration}"
        )))
    }
}

/// Canonical name of each row's argmax; ties go to the larger prior, then
/// the lower class index.
pub fn predict_names(f: &PredictionMatrix, roster: &CharacterRoster) -> Vec<String> {
    const TIE: f64 = 1e-12;
    (0..f.n())
        .map(|i| {
            let row = f.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                let diff = row[j] - row[best];
                if diff > TIE || (diff.abs() <= TIE && roster.prior[j] > roster.prior[best]) {
                    best = j;
                }
            }
            roster.clusters[best].canonical.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::NameCluster;
    use approx::assert_relative_eq;

    fn roster(k: usize, prior: Vec<f64>) -> CharacterRoster {
        let clusters = (0..k)
            .map(|j| NameCluster {
                canonical: format!("C{j}"),
                aliases: [format!("C{j}")].into(),
                count_first: 1,
                count_second: 0,
                count_third: 0,
                p_male_name: 0.5,
            })
            .collect();
        CharacterRoster { clusters, prior }
    }

    #[test]
    fn single_class_is_immediate() {
        let c = ConstraintSet::empty(3, 1);
        let g = SimilarityGraph::empty(3);
        let out = solve_pgd(
            &c,
            &g,
            &roster(1, vec![1.0]),
            LossWeights::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(out.iterations <= 1);
        assert_ne!(out.termination, Termination::MaxIterations);
        assert!(out.f.as_slice().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn isolated_label_fits_one_hot() {
        let mut c = ConstraintSet::empty(3, 2);
        c.positives.insert((1, 0));
        let g = SimilarityGraph::empty(3);
        let w = LossWeights::from_array([1.0, 0.0, 0.0, 0.0, 0.0]);
        let out = solve_pgd(&c, &g, &roster(2, vec![0.5, 0.5]), w, &SolverConfig::default()).unwrap();
        assert_relative_eq!(out.f[(1, 0)], 1.0, epsilon = 1e-6);
        for i in [0, 2] {
            assert_eq!(out.f.row(i), &[0.5, 0.5]);
        }
        assert_eq!(out.termination, Termination::Converged);
    }

    #[test]
    fn monotone_and_feasible() {
        let mut c = ConstraintSet::empty(4, 3);
        c.positives.insert((0, 0));
        c.negatives.insert((1, 0));
        c.p_male_audio = vec![0.2, 0.9, 0.5, 0.1];
        c.prior = vec![0.5, 0.3, 0.2];
        let g = SimilarityGraph::from_dense(
            4,
            vec![
                0.0, 0.9, 0.1, 0.0, 0.9, 0.0, 0.3, 0.2, 0.1, 0.3, 0.0, 0.7, 0.0, 0.2, 0.7, 0.0,
            ],
        )
        .unwrap();
        let obj = Objective::with_name_genders(&c, &g, vec![0.9, 0.1, 0.5], LossWeights::default()).unwrap();
        let mut last = f64::INFINITY;
        let out = solve_pgd_observed(&obj, &SolverConfig::default(), |_, f, v| {
            assert!(f.is_row_stochastic(1e-9));
            assert!(v <= last);
            last = v;
        })
        .unwrap();
        assert_eq!(out.trace.len(), out.iterations + 1);
        assert_eq!(out.trace.last().unwrap().objective, out.objective);
    }

    #[test]
    fn rejects_bad_config_and_non_finite() {
        let c = ConstraintSet::empty(1, 2);
        let g = SimilarityGraph::empty(1);
        let r = roster(2, vec![0.5, 0.5]);
        let bad = SolverConfig {
            backtrack: 1.0,
            ..SolverConfig::default()
        };
        assert!(solve_pgd(&c, &g, &r, LossWeights::default(), &bad).is_err());

        let mut c = ConstraintSet::empty(1, 2);
        c.prior = vec![f64::NAN, 0.5];
        let err = solve_pgd(&c, &g, &r, LossWeights::default(), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn prediction_tie_breaks() {
        let f = PredictionMatrix::from_rows(&[vec![0.7, 0.3], vec![0.5, 0.5], vec![0.3, 0.7]]);
        assert_eq!(predict_names(&f, &roster(2, vec![0.6, 0.4])), ["C0", "C0", "C1"]);
        assert_eq!(predict_names(&f, &roster(2, vec![0.4, 0.6])), ["C0", "C1", "C1"]);
        assert_eq!(predict_names(&f, &roster(2, vec![0.5, 0.5])), ["C0", "C0", "C1"]);
    }

    #[test]
    fn trace_csv() {
        let rows = [TraceRow {
            iteration: 0,
            objective: 1.5,
            step_size: 0.0,
        }];
        assert_eq!(TraceRow::to_csv(&rows), "iteration,objective,step_size\n0,1.5,0\n");
    }
}
