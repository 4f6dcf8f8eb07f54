use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::features::SimilarityGraph;
use crate::names::CharacterRoster;

use super::PredictionMatrix;

/// Multipliers of the five objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub initial: f64,
    pub mi: f64,
    pub negative: f64,
    pub gender: f64,
    pub distribution: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            initial: 1.0,
            mi: 1.0,
            negative: 1.0,
            gender: 1.0,
            distribution: 1.0,
        }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.initial, self.mi, self.negative, self.gender, self.distribution]
    }

    pub fn from_array(w: [f64; 5]) -> Self {
        Self {
            initial: w[0],
            mi: w[1],
            negative: w[2],
            gender: w[3],
            distribution: w[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(format!(
                "loss weights must be finite and >= 0: {w:?}"
            )));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidInput("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// Unweighted values of the five terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub initial: f64,
    pub mi: f64,
    pub negative: f64,
    pub gender: f64,
    pub distribution: f64,
}

impl LossTerms {
    pub fn as_array(&self) -> [f64; 5] {
        [self.initial, self.mi, self.negative, self.gender, self.distribution]
    }

    pub fn weighted(&self, w: &LossWeights) -> f64 {
        self.as_array().iter().zip(w.as_array()).map(|(t, w)| t * w).sum()
    }
}

fn squared_distance_to_onehot(row: &[f64], class: usize) -> f64 {
    row.iter()
        .enumerate()
        .map(|(c, &x)| {
            let d = if c == class { x - 1.0 } else { x };
            d * d
        })
        .sum()
}

/// `(1/l) sum ||f_i - y_i||^2 + (1/n) sum_i sum_j w_ij ||f_i - f_j||^2`.
pub fn loss_initial(f: &PredictionMatrix, constraints: &ConstraintSet, graph: &SimilarityGraph) -> f64 {
    let l = constraints.labeled_count();
    let fit = if l == 0 {
        0.0
    } else {
        constraints
            .positives
            .iter()
            .map(|&(i, j)| squared_distance_to_onehot(f.row(i), j))
            .sum::<f64>()
            / l as f64
    };
    let n = f.n();
    if n == 0 {
        return fit;
    }
    let mut smooth = 0.0;
    for i in 0..n {
        let fi = f.row(i);
        for &(j, w) in graph.neighbors(i) {
            let d: f64 = fi.iter().zip(f.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            smooth += w * d;
        }
    }
    fit + smooth / n as f64
}

/// `sum s ||f_i - e_j||^2` over the multiple-instance targets.
pub fn loss_mi(f: &PredictionMatrix, constraints: &ConstraintSet) -> f64 {
    constraints
        .mi_targets
        .iter()
        .map(|t| t.weight * squared_distance_to_onehot(f.row(t.instance), t.class))
        .sum()
}

/// `sum (f_ij)^2` over the negative cells.
pub fn loss_negative(f: &PredictionMatrix, constraints: &ConstraintSet) -> f64 {
    constraints.negatives.iter().map(|&(i, j)| f[(i, j)] * f[(i, j)]).sum()
}

/// Linear coefficient of `f_ij` in the gender term.
fn gender_coefficient(p_audio: f64, p_name: f64) -> f64 {
    if p_audio < 0.5 && p_name > 0.5 {
        p_audio * (1.0 - p_name)
    } else if p_audio > 0.5 && p_name < 0.5 {
        (1.0 - p_audio) * p_name
    } else {
        0.0
    }
}

/// Penalty on mass given to names whose gender disagrees with the voice.
pub fn loss_gender(f: &PredictionMatrix, constraints: &ConstraintSet, name_male: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..f.n() {
        let pa = constraints.p_male_audio[i];
        for (j, &pn) in name_male.iter().enumerate() {
            let c = gender_coefficient(pa, pn);
            if c != 0.0 {
                total += c * f[(i, j)];
            }
        }
    }
    total
}

fn column_means(f: &PredictionMatrix) -> Vec<f64> {
    let mut means = vec![0.0; f.k()];
    for i in 0..f.n() {
        for (m, x) in means.iter_mut().zip(f.row(i)) {
            *m += x;
        }
    }
    let n = f.n().max(1) as f64;
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// Squared error between the column means of `f` and the prior.
pub fn loss_distribution(f: &PredictionMatrix, constraints: &ConstraintSet) -> f64 {
    column_means(f)
        .iter()
        .zip(&constraints.prior)
        .map(|(m, d)| (m - d) * (m - d))
        .sum()
}

/// The weighted objective with its inputs bundled.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub constraints: &'a ConstraintSet,
    pub graph: &'a SimilarityGraph,
    pub name_male: Vec<f64>,
    pub weights: LossWeights,
}

impl<'a> Objective<'a> {
    pub fn new(
        constraints: &'a ConstraintSet,
        graph: &'a SimilarityGraph,
        roster: &CharacterRoster,
        weights: LossWeights,
    ) -> Result<Self> {
        Self::with_name_genders(constraints, graph, roster.name_genders(), weights)
    }

    pub fn with_name_genders(
        constraints: &'a ConstraintSet,
        graph: &'a SimilarityGraph,
        name_male: Vec<f64>,
        weights: LossWeights,
    ) -> Result<Self> {
        weights.validate()?;
        constraints.validate()?;
        if graph.n() != constraints.n {
            return Err(Error::InvalidInput(format!(
                "graph has {} nodes but constraints cover {} instances",
                graph.n(),
                constraints.n
            )));
        }
        if name_male.len() != constraints.k {
            return Err(Error::InvalidInput(format!(
                "{} name genders for {} classes",
                name_male.len(),
                constraints.k
            )));
        }
        Ok(Self {
            constraints,
            graph,
            name_male,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.constraints.n
    }

    pub fn k(&self) -> usize {
        self.constraints.k
    }

    fn check_shape(&self, f: &PredictionMatrix) {
        assert_eq!((f.n(), f.k()), (self.n(), self.k()), "prediction matrix shape");
    }

    pub fn terms(&self, f: &PredictionMatrix) -> LossTerms {
        self.check_shape(f);
        LossTerms {
            initial: loss_initial(f, self.constraints, self.graph),
            mi: loss_mi(f, self.constraints),
            negative: loss_negative(f, self.constraints),
            gender: loss_gender(f, self.constraints, &self.name_male),
            distribution: loss_distribution(f, self.constraints),
        }
    }

    pub fn value(&self, f: &PredictionMatrix) -> f64 {
        self.terms(f).weighted(&self.weights)
    }

    /// Gradients of the five unweighted terms.
    pub fn term_gradients(&self, f: &PredictionMatrix) -> [PredictionMatrix; 5] {
        self.check_shape(f);
        let (n, k) = (self.n(), self.k());
        let c = self.constraints;
        let mut g_init = PredictionMatrix::zeros(n, k);
        let mut g_mi = PredictionMatrix::zeros(n, k);
        let mut g_neg = PredictionMatrix::zeros(n, k);
        let mut g_gender = PredictionMatrix::zeros(n, k);
        let mut g_dis = PredictionMatrix::zeros(n, k);

        let l = c.labeled_count();
        if l > 0 {
            let scale = 2.0 / l as f64;
            for &(i, j) in &c.positives {
                for col in 0..k {
                    let target = if col == j { 1.0 } else { 0.0 };
                    g_init[(i, col)] += scale * (f[(i, col)] - target);
                }
            }
        }
        if n > 0 {
            let scale = 2.0 / n as f64;
            for i in 0..n {
                for &(j, w) in self.graph.neighbors(i) {
                    // w_ij appears in row i's and row j's sums.
                    let w = w + self.graph.weight(j, i);
                    for col in 0..k {
                        g_init[(i, col)] += scale * w * (f[(i, col)] - f[(j, col)]);
                    }
                }
            }
        }

        for t in &c.mi_targets {
            for col in 0..k {
                let target = if col == t.class { 1.0 } else { 0.0 };
                g_mi[(t.instance, col)] += 2.0 * t.weight * (f[(t.instance, col)] - target);
            }
        }

        for &(i, j) in &c.negatives {
            g_neg[(i, j)] += 2.0 * f[(i, j)];
        }

        for i in 0..n {
            for (j, &pn) in self.name_male.iter().enumerate() {
                g_gender[(i, j)] = gender_coefficient(c.p_male_audio[i], pn);
            }
        }

        if n > 0 {
            let means = column_means(f);
            for i in 0..n {
                for j in 0..k {
                    g_dis[(i, j)] = 2.0 * (means[j] - c.prior[j]) / n as f64;
                }
            }
        }
        [g_init, g_mi, g_neg, g_gender, g_dis]
    }

    pub fn gradient(&self, f: &PredictionMatrix) -> PredictionMatrix {
        let grads = self.term_gradients(f);
        let mut out = PredictionMatrix::zeros(self.n(), self.k());
        for (g, w) in grads.iter().zip(self.weights.as_array()) {
            if w == 0.0 {
                continue;
            }
            for (o, x) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *o += w * x;
            }
        }
        out
    }
}

/// Weighted sum of all five terms.
pub fn total_loss(
    f: &PredictionMatrix,
    constraints: &ConstraintSet,
    graph: &SimilarityGraph,
    roster: &CharacterRoster,
    weights: LossWeights,
) -> Result<f64> {
    Ok(Objective::new(constraints, graph, roster, weights)?.value(f))
}

/// Analytic gradient of [`total_loss`].
pub fn gradient(
    f: &PredictionMatrix,
    constraints: &ConstraintSet,
    graph: &SimilarityGraph,
    roster: &CharacterRoster,
    weights: LossWeights,
) -> Result<PredictionMatrix> {
    Ok(Objective::new(constraints, graph, roster, weights)?.gradient(f))
}
