//! Per-segment feature vectors and the fused similarity graph.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::srt::SubtitleSegment;
use crate::text::words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Text,
    Acoustic,
    Visual,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Acoustic, Modality::Visual];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Acoustic => "acoustic",
            Modality::Visual => "visual",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Modality::Text),
            "acoustic" => Ok(Modality::Acoustic),
            "visual" => Ok(Modality::Visual),
            other => Err(Error::InvalidInput(format!("unknown modality {other:?}"))),
        }
    }
}

/// Vectors of one modality keyed by segment position. Coverage may be partial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityVectors {
    pub modality: Modality,
    pub dim: usize,
    pub vectors: BTreeMap<usize, Vec<f64>>,
}

impl ModalityVectors {
    pub fn new(modality: Modality, dim: usize) -> Self {
        Self {
            modality,
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, pos: usize, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{} vector at {pos} has length {}, expected {}",
                self.modality,
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{} vector at {pos} is not finite",
                self.modality
            )));
        }
        self.vectors.insert(pos, v);
        Ok(())
    }

    pub fn get(&self, pos: usize) -> Option<&[f64]> {
        self.vectors.get(&pos).map(Vec::as_slice)
    }

    /// CSV with header `segment_pos,v0,...,v{dim-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_pos");
        for d in 0..self.dim {
            out.push_str(&format!(",v{d}"));
        }
        out.push('\n');
        for (pos, v) in &self.vectors {
            out.push_str(&pos.to_string());
            for x in v {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

/// tf-idf over the movie's own segments: raw term counts times `ln(n / df)`.
pub fn compute_tfidf(segments: &[SubtitleSegment]) -> ModalityVectors {
    let docs: Vec<Vec<String>> = segments.iter().map(|s| words(&s.clean_text).collect()).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for w in unique {
            *df.entry(w).or_default() += 1;
        }
    }
    let index: BTreeMap<&str, usize> = df.keys().enumerate().map(|(i, w)| (*w, i)).collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = df.values().map(|&d| (n / d as f64).ln()).collect();

    let mut out = ModalityVectors::new(Modality::Text, index.len());
    for (pos, doc) in docs.iter().enumerate() {
        let mut v = vec![0.0; index.len()];
        for w in doc {
            v[index[w.as_str()]] += 1.0;
        }
        for (x, idf) in v.iter_mut().zip(&idf) {
            *x *= idf;
        }
        out.vectors.insert(pos, v);
    }
    out
}

/// Reads an embedding CSV with header `segment_pos,v0,...,v{d-1}`.
pub fn load_embeddings(bytes: &[u8], modality: Modality) -> Result<ModalityVectors> {
    let records = crate::io::read_raw(bytes)?;
    let Some((_, header)) = records.first() else {
        return Err(Error::Header("missing header segment_pos,v0,...".into()));
    };
    let dim = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("segment_pos".to_string())
        .chain((0..dim).map(|d| format!("v{d}")))
        .collect();
    if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Header(format!(
            "expected segment_pos,v0,...,v{{d-1}}, found {:?}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = ModalityVectors::new(modality, dim);
    for (row, record) in records.iter().skip(1) {
        let row = *row;
        if record.len() != dim + 1 {
            return Err(Error::csv(
                row,
                format!("ragged row: expected {} values, found {}", dim, record.len() - 1),
            ));
        }
        let pos: usize = crate::io::parse_field(&record[0], row, "segment_pos")?;
        let mut v = Vec::with_capacity(dim);
        for (d, field) in record.iter().skip(1).enumerate() {
            let x: f64 = crate::io::parse_field(field, row, &format!("v{d}"))?;
            if !x.is_finite() {
                return Err(Error::csv(row, format!("non-finite value in v{d}")));
            }
            v.push(x);
        }
        if out.vectors.insert(pos, v).is_some() {
            return Err(Error::csv(row, format!("duplicate segment_pos {pos}")));
        }
    }
    Ok(out)
}

/// Non-negative per-modality mixing weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalityWeights {
    pub text: f64,
    pub acoustic: f64,
    pub visual: f64,
}

impl Default for ModalityWeights {
    fn default() -> Self {
        Self {
            text: 1.0,
            acoustic: 1.0,
            visual: 1.0,
        }
    }
}

impl ModalityWeights {
    pub fn get(&self, m: Modality) -> f64 {
        match m {
            Modality::Text => self.text,
            Modality::Acoustic => self.acoustic,
            Modality::Visual => self.visual,
        }
    }

    /// Weight 1 on `m`, 0 elsewhere.
    pub fn only(m: Modality) -> Self {
        let mut w = Self {
            text: 0.0,
            acoustic: 0.0,
            visual: 0.0,
        };
        match m {
            Modality::Text => w.text = 1.0,
            Modality::Acoustic => w.acoustic = 1.0,
            Modality::Visual => w.visual = 1.0,
        }
        w
    }
}

/// Symmetric non-negative similarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    weights: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
    pub modality_weights: ModalityWeights,
}

impl SimilarityGraph {
    /// Builds a graph from a dense row-major matrix, checking its invariants.
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "weight matrix has {} entries, expected {}",
                weights.len(),
                n * n
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidInput(format!("invalid weight {w} at ({i}, {j})")));
                }
                if w != weights[j * n + i] {
                    return Err(Error::InvalidInput(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_dense_unchecked(n, weights, ModalityWeights::default()))
    }

    fn from_dense_unchecked(n: usize, weights: Vec<f64>, modality_weights: ModalityWeights) -> Self {
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter_map(|j| {
                        let w = weights[i * n + j];
                        (w > 0.0).then_some((j, w))
                    })
                    .collect()
            })
            .collect();
        Self {
            n,
            weights,
            neighbors,
            modality_weights,
        }
    }

    /// A graph with no edges.
    pub fn empty(n: usize) -> Self {
        Self::from_dense_unchecked(n, vec![0.0; n * n], ModalityWeights::default())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Nonzero weights of row `i`, ascending by column.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fuses per-modality similarities `1 / (1 + ||v_i - v_j||)` into one graph
/// over `n` segments. Modality weights are renormalized per pair over the
/// modalities both segments have. `top_k > 0` keeps the k strongest
/// weights per row, symmetrized by max.
pub fn fuse_similarities(
    mods: &[ModalityVectors],
    weights: ModalityWeights,
    n: usize,
    top_k: usize,
) -> Result<SimilarityGraph> {
    for m in Modality::ALL {
        let w = weights.get(m);
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidInput(format!(
                "modality weight for {m} must be >= 0, got {w}"
            )));
        }
    }
    let mut sorted: Vec<&ModalityVectors> = mods.iter().collect();
    sorted.sort_by_key(|m| m.modality);
    for pair in sorted.windows(2) {
        if pair[0].modality == pair[1].modality {
            return Err(Error::InvalidInput(format!(
                "modality {} given twice",
                pair[0].modality
            )));
        }
    }
    let active: Vec<(f64, Vec<Option<&[f64]>>)> = sorted
        .iter()
        .filter(|m| weights.get(m.modality) > 0.0)
        .map(|m| {
            let mut dense = vec![None; n];
            for (&pos, v) in &m.vectors {
                if pos < n {
                    dense[pos] = Some(v.as_slice());
                }
            }
            (weights.get(m.modality), dense)
        })
        .collect();
    if active.is_empty() {
        return Err(Error::InvalidInput(
            "all modality weights are zero for the supplied modalities".into(),
        ));
    }
    for m in &sorted {
        if let Some((&pos, _)) = m.vectors.iter().next_back() {
            if pos >= n {
                return Err(Error::InvalidInput(format!(
                    "{} vector at position {pos} but only {n} segments",
                    m.modality
                )));
            }
        }
    }

    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let mut total_alpha = 0.0;
            let mut acc = 0.0;
            for (alpha, vecs) in &active {
                if let (Some(a), Some(b)) = (vecs[i], vecs[j]) {
                    total_alpha += alpha;
                    acc += alpha / (1.0 + euclidean(a, b));
                }
            }
            let w = if total_alpha > 0.0 { acc / total_alpha } else { 0.0 };
            dense[i * n + j] = w;
            dense[j * n + i] = w;
        }
    }
    if top_k > 0 {
        dense = sparsify(n, &dense, top_k);
    }
    Ok(SimilarityGraph::from_dense_unchecked(n, dense, weights))
}

fn sparsify(n: usize, dense: &[f64], k: usize) -> Vec<f64> {
    let mut keep = vec![false; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let row = &dense[i * n..(i + 1) * n];
        order.clear();
        order.extend((0..n).filter(|&j| j != i && row[j] > 0.0));
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            keep[i * n + j] = true;
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if keep[i * n + j] || keep[j * n + i] {
                out[i * n + j] = dense[i * n + j];
            }
        }
    }
    out
}
