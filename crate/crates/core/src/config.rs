//! Flat `key = value` pipeline configuration.
//!
//! One pair per line; `#` starts a comment. Relative paths resolve against
//! the directory holding the config file. Unknown or repeated keys are
//! errors, as are values that do not parse.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::constraints::DEFAULT_WINDOW;
use crate::error::{Error, Result};
use crate::eval::BaselineKind;
use crate::features::{Modality, ModalityWeights};
use crate::optimizer::{LossWeights, SolverConfig};
use crate::reference::{DEFAULT_SELF_TRIGGERS, DEFAULT_VOCATIVE_TRIGGERS};
use crate::synth::SynthSpec;

pub const DEFAULT_TOP_K: usize = 20;

/// Where the text modality comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextSource {
    /// TF-IDF over the cleaned dialogue.
    Tfidf,
    /// Precomputed vectors from `text_embeddings`.
    Embeddings,
    None,
}

impl FromStr for TextSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(TextSource::Tfidf),
            "embeddings" => Ok(TextSource::Embeddings),
            "none" => Ok(TextSource::None),
            other => Err(Error::config(
                "text_source",
                format!("expected tfidf, embeddings or none, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub base_dir: PathBuf,
    pub video: String,
    pub srt: Option<PathBuf>,
    pub text_source: TextSource,
    pub text_embeddings: Option<PathBuf>,
    pub acoustic_embeddings: Option<PathBuf>,
    pub visual_embeddings: Option<PathBuf>,
    pub gender_probs: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub predictions: PathBuf,
    pub roster: PathBuf,
    pub trace: Option<PathBuf>,
    pub report: PathBuf,
    pub summary: PathBuf,
    pub loss: LossWeights,
    pub modality_weights: ModalityWeights,
    pub window: usize,
    /// Neighbours kept per row of the graph; 0 keeps it dense.
    pub top_k: usize,
    pub solver: SolverConfig,
    pub seed: u64,
    pub baseline: BaselineKind,
    pub self_triggers: Vec<String>,
    pub vocative_triggers: Vec<String>,
    /// Used by the synth subcommand; its seed is `seed`.
    pub synth: SynthSpec,
}

impl PipelineConfig {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Self {
            base_dir: base_dir.into(),
            video: "video".into(),
            srt: None,
            text_source: TextSource::Tfidf,
            text_embeddings: None,
            acoustic_embeddings: None,
            visual_embeddings: None,
            gender_probs: None,
            lexicon: None,
            gold: None,
            aliases: None,
            predictions: "predictions.csv".into(),
            roster: "roster.csv".into(),
            trace: None,
            report: "report.csv".into(),
            summary: "summary.txt".into(),
            loss: LossWeights::default(),
            modality_weights: ModalityWeights::default(),
            window: DEFAULT_WINDOW,
            top_k: DEFAULT_TOP_K,
            solver: SolverConfig::default(),
            seed: 0,
            baseline: BaselineKind::B3,
            self_triggers: DEFAULT_SELF_TRIGGERS.iter().map(|s| s.to_string()).collect(),
            vocative_triggers: DEFAULT_VOCATIVE_TRIGGERS.iter().map(|s| s.to_string()).collect(),
            synth: SynthSpec::default(),
        }
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config = Self::new(base_dir);
        let mut seen = BTreeSet::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(line, format!("line {} is not `key = value`", no + 1)));
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "given more than once"));
            }
            config.set(key, value.trim())?;
        }
        config.synth.seed = config.seed;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
        }
        fn path(value: &str) -> Option<PathBuf> {
            (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
        }
        fn list(value: &str) -> Vec<String> {
            value
                .split('|')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        }
        let s = &mut self.synth;
        match key {
            "video" => self.video = value.to_string(),
            "srt" => self.srt = path(value),
            "text_source" => self.text_source = value.parse()?,
            "text_embeddings" => self.text_embeddings = path(value),
            "acoustic_embeddings" => self.acoustic_embeddings = path(value),
            "visual_embeddings" => self.visual_embeddings = path(value),
            "gender_probs" => self.gender_probs = path(value),
            "lexicon" => self.lexicon = path(value),
            "gold" => self.gold = path(value),
            "aliases" => self.aliases = path(value),
            "predictions" => self.predictions = value.into(),
            "roster" => self.roster = value.into(),
            "trace" => self.trace = path(value),
            "report" => self.report = value.into(),
            "summary" => self.summary = value.into(),
            "lambda_initial" => self.loss.initial = num(key, value)?,
            "lambda_mi" => self.loss.mi = num(key, value)?,
            "lambda_negative" => self.loss.negative = num(key, value)?,
            "lambda_gender" => self.loss.gender = num(key, value)?,
            "lambda_distribution" => self.loss.distribution = num(key, value)?,
            "alpha_text" => self.modality_weights.text = num(key, value)?,
            "alpha_acoustic" => self.modality_weights.acoustic = num(key, value)?,
            "alpha_visual" => self.modality_weights.visual = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "top_k" => self.top_k = num(key, value)?,
            "step_size" => self.solver.step_size = num(key, value)?,
            "max_iters" => self.solver.max_iters = num(key, value)?,
            "tolerance" => self.solver.tolerance = num(key, value)?,
            "backtrack" => self.solver.backtrack = num(key, value)?,
            "seed" => {
                self.seed = num(key, value)?;
                s.seed = self.seed;
            }
            "baseline" => {
                self.baseline = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected b1, b2 or b3, got {value:?}")))?
            }
            "self_triggers" => self.self_triggers = list(value),
            "vocative_triggers" => self.vocative_triggers = list(value),
            "synth_k" => s.k = num(key, value)?,
            "synth_n" => s.n = num(key, value)?,
            "synth_label_rate" => s.label_rate = num(key, value)?,
            "synth_second_rate" => s.second_rate = num(key, value)?,
            "synth_third_rate" => s.third_rate = num(key, value)?,
            "synth_gender_separation" => s.gender_separation = num(key, value)?,
            "synth_speaker_skew" => s.speaker_skew = num(key, value)?,
            _ => {
                let Some((m, field)) = key
                    .strip_prefix("synth_")
                    .and_then(|rest| rest.split_once('_'))
                    .and_then(|(m, f)| Some((m.parse::<Modality>().ok()?, f)))
                else {
                    return Err(Error::config(key, "unknown key"));
                };
                let spec = match m {
                    Modality::Text => &mut s.text,
                    Modality::Acoustic => &mut s.acoustic,
                    Modality::Visual => &mut s.visual,
                };
                match field {
                    "dim" => spec.dim = num(key, value)?,
                    "noise" => spec.noise = num(key, value)?,
                    "coverage" => spec.coverage = num(key, value)?,
                    _ => return Err(Error::config(key, "unknown key")),
                }
            }
        }
        Ok(())
    }

    /// Checks numeric ranges owned by other modules, reporting the config key.
    pub fn validate(&self) -> Result<()> {
        let loss = [
            ("lambda_initial", self.loss.initial),
            ("lambda_mi", self.loss.mi),
            ("lambda_negative", self.loss.negative),
            ("lambda_gender", self.loss.gender),
            ("lambda_distribution", self.loss.distribution),
            ("alpha_text", self.modality_weights.text),
            ("alpha_acoustic", self.modality_weights.acoustic),
            ("alpha_visual", self.modality_weights.visual),
        ];
        for (key, v) in loss {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be a finite value >= 0, got {v}")));
            }
        }
        if self.window < 1 {
            return Err(Error::config("window", "must be at least 1"));
        }
        let solver = &self.solver;
        if !(solver.step_size > 0.0 && solver.step_size.is_finite()) {
            return Err(Error::config(
                "step_size",
                format!("must be > 0, got {}", solver.step_size),
            ));
        }
        if !(solver.tolerance >= 0.0) {
            return Err(Error::config(
                "tolerance",
                format!("must be >= 0, got {}", solver.tolerance),
            ));
        }
        if !(solver.backtrack > 0.0 && solver.backtrack < 1.0) {
            return Err(Error::config(
                "backtrack",
                format!("must lie in (0, 1), got {}", solver.backtrack),
            ));
        }
        if self.text_source == TextSource::Embeddings && self.text_embeddings.is_none() {
            return Err(Error::config(
                "text_embeddings",
                "required when text_source = embeddings",
            ));
        }
        Ok(())
    }

    /// Resolves a configured path against the config directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The resolved path for `key`, or an error naming it if unset.
    pub fn require(&self, key: &str, p: Option<&PathBuf>) -> Result<PathBuf> {
        p.map(|p| self.resolve(p))
            .ok_or_else(|| Error::config(key, "required but not set"))
    }

    pub fn embeddings_path(&self, m: Modality) -> Option<&PathBuf> {
        match m {
            Modality::Text => self.text_embeddings.as_ref(),
            Modality::Acoustic => self.acoustic_embeddings.as_ref(),
            Modality::Visual => self.visual_embeddings.as_ref(),
        }
    }
}
