//! Alias-aware weighted precision, recall and F-score, and the three
//! mention-prior baselines.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{parse_field, read_csv, GenderProbs};
use crate::names::CharacterRoster;

/// Gold label for unnamed speakers.
pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldAnnotation {
    pub labels: BTreeMap<usize, String>,
}

impl GoldAnnotation {
    /// Reads `segment_pos,speaker`.
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (row, record) in read_csv(bytes, &["segment_pos", "speaker"])? {
            let pos: usize = parse_field(&record[0], row, "segment_pos")?;
            if labels.insert(pos, record[1].to_string()).is_some() {
                return Err(Error::csv(row, format!("duplicate segment_pos {pos}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            labels: names
                .iter()
                .enumerate()
                .map(|(i, s)| (i, s.as_ref().to_string()))
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_pos,speaker\n");
        for (pos, name) in &self.labels {
            out.push_str(&format!("{pos},{name}\n"));
        }
        out
    }
}

/// Predicted alias to gold name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AliasMap {
    pub pairs: BTreeMap<String, String>,
}

impl AliasMap {
    /// Reads `alias,gold_name`. Rejects chains where a gold name is itself an alias
    /// of a different name.
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (row, record) in read_csv(bytes, &["alias", "gold_name"])? {
            if let Some(prev) = pairs.insert(record[0].to_string(), record[1].to_string()) {
                if prev != record[1] {
                    return Err(Error::csv(row, format!("alias {:?} mapped twice", &record[0])));
                }
            }
        }
        let map = Self { pairs };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        for (alias, gold) in &self.pairs {
            if let Some(next) = self.pairs.get(gold) {
                if next != gold {
                    return Err(Error::InvalidInput(format!(
                        "alias chain {alias:?} -> {gold:?} -> {next:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve<'a>(&'a self, name: &'a str) -> &'a str {
        self.pairs.get(name).map_or(name, String::as_str)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alias,gold_name\n");
        for (a, g) in &self.pairs {
            out.push_str(&format!("{a},{g}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Support-weighted averages of per-class precision, recall and F over the
/// gold classes. `predictions[i]` is scored against gold position `i`.
pub fn weighted_prf(predictions: &[String], gold: &GoldAnnotation, aliases: &AliasMap) -> Result<Prf> {
    if predictions.len() != gold.labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} gold segments",
            predictions.len(),
            gold.labels.len()
        )));
    }
    if gold.labels.keys().enumerate().any(|(i, &pos)| i != pos) {
        return Err(Error::InvalidInput("gold positions must cover 0..n".into()));
    }
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
    let mut correct: BTreeMap<&str, usize> = BTreeMap::new();
    for (pred, gold_name) in predictions.iter().zip(gold.labels.values()) {
        let pred = aliases.resolve(pred);
        *support.entry(gold_name).or_default() += 1;
        *predicted.entry(pred).or_default() += 1;
        if pred == gold_name {
            *correct.entry(gold_name).or_default() += 1;
        }
    }
    let total = predictions.len();
    if total == 0 {
        return Ok(Prf::default());
    }
    let mut out = Prf::default();
    for (class, &sup) in &support {
        let tp = correct.get(class).copied().unwrap_or(0) as f64;
        let pc = predicted.get(class).copied().unwrap_or(0);
        let p = if pc > 0 { tp / pc as f64 } else { 0.0 };
        let r = tp / sup as f64;
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let w = sup as f64 / total as f64;
        out.precision += w * p;
        out.recall += w * r;
        out.f_score += w * f;
    }
    Ok(out)
}

/// Per-video scores and their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub per_video: Vec<(String, Prf)>,
}

impl EvalReport {
    pub fn push(&mut self, video: impl Into<String>, prf: Prf) {
        self.per_video.push((video.into(), prf));
    }

    pub fn aggregate(&self) -> Prf {
        let n = self.per_video.len();
        if n == 0 {
            return Prf::default();
        }
        let mut out = Prf::default();
        for (_, p) in &self.per_video {
            out.precision += p.precision;
            out.recall += p.recall;
            out.f_score += p.f_score;
        }
        out.precision /= n as f64;
        out.recall /= n as f64;
        out.f_score /= n as f64;
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("video,precision,recall,f_score\n");
        let line = |name: &str, p: &Prf| format!("{name},{:.6},{:.6},{:.6}\n", p.precision, p.recall, p.f_score);
        for (name, p) in &self.per_video {
            out.push_str(&line(name, p));
        }
        out.push_str(&line("mean", &self.aggregate()));
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (name, p) in &self.per_video {
            out.push_str(&format!(
                "{name}: weighted precision {:.4}, recall {:.4}, F {:.4}\n",
                p.precision, p.recall, p.f_score
            ));
        }
        let a = self.aggregate();
        out.push_str(&format!(
            "mean over {} video(s): precision {:.4}, recall {:.4}, F {:.4}\n",
            self.per_video.len(),
            a.precision,
            a.recall,
            a.f_score
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Most frequently mentioned character everywhere.
    B1,
    /// Draws from the mention prior.
    B2,
    /// Draws from the prior restricted to names of the voice's gender.
    B3,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(BaselineKind::B1),
            "b2" => Ok(BaselineKind::B2),
            "b3" => Ok(BaselineKind::B3),
            other => Err(Error::InvalidInput(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Inverse-CDF draw from unnormalized `weights` restricted to `allowed`.
fn draw(u: f64, weights: &[f64], allowed: &[usize]) -> usize {
    let total: f64 = allowed.iter().map(|&j| weights[j]).sum();
    let target = u * total;
    let mut acc = 0.0;
    for &j in allowed {
        acc += weights[j];
        if target < acc {
            return j;
        }
    }
    *allowed
        .iter()
        .rev()
        .find(|&&j| weights[j] > 0.0)
        .unwrap_or(&allowed[allowed.len() - 1])
}

/// Baseline predictions for `n` segments. Every segment consumes exactly one
/// uniform draw for B2 and B3, so B3 with neutral voice genders reproduces B2.
pub fn baseline(
    kind: BaselineKind,
    roster: &CharacterRoster,
    n: usize,
    gender_probs: Option<&GenderProbs>,
    seed: u64,
) -> Result<Vec<String>> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    let names = roster.names();
    let d = &roster.prior;
    let all: Vec<usize> = (0..roster.len()).collect();
    match kind {
        BaselineKind::B1 => {
            let mut best = 0;
            for j in 1..d.len() {
                if d[j] > d[best] {
                    best = j;
                }
            }
            Ok(vec![names[best].to_string(); n])
        }
        BaselineKind::B2 | BaselineKind::B3 => {
            let genders = roster.name_genders();
            let males: Vec<usize> = all.iter().copied().filter(|&j| genders[j] > 0.5).collect();
            let females: Vec<usize> = all.iter().copied().filter(|&j| genders[j] < 0.5).collect();
            let usable = |set: &[usize]| set.iter().any(|&j| d[j] > 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|i| {
                    let u: f64 = rng.random();
                    let allowed: &[usize] = match (kind, gender_probs.map(|g| g.get(i))) {
                        (BaselineKind::B3, Some(p)) if p > 0.5 && usable(&males) => &males,
                        (BaselineKind::B3, Some(p)) if p < 0.5 && usable(&females) => &females,
                        _ => &all,
                    };
                    names[draw(u, d, allowed)].to_string()
                })
                .collect())
        }
    }
}
