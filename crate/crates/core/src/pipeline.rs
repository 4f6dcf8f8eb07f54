//! End-to-end wiring: subtitles to roster, constraints, graph and names.

use crate::config::{PipelineConfig, TextSource};
use crate::constraints::{build_constraints, ConstraintSet, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::features::{
    compute_tfidf, fuse_similarities, load_embeddings, Modality, ModalityVectors, ModalityWeights, SimilarityGraph,
};
use crate::io::GenderProbs;
use crate::names::{build_roster, cluster_names, extract_mentions, CharacterRoster, Lexicon, NameMention};
use crate::optimizer::{
    predict_names, solve_pgd_observed, LossWeights, Objective, PredictionMatrix, SolveOutcome, SolverConfig,
};
use crate::reference::{classify_all, ReferenceRules};
use crate::srt::{clean_segments, parse_srt, SubtitleSegment};

/// Text-side analysis of one movie.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    /// Cleaned segments; positions here are instance numbers.
    pub segments: Vec<SubtitleSegment>,
    /// Every extracted mention with its reference type.
    pub mentions: Vec<NameMention>,
    pub roster: CharacterRoster,
}

impl Dialogue {
    pub fn n(&self) -> usize {
        self.segments.len()
    }
}

/// Cleans parsed subtitles, extracts and classifies mentions, clusters them
/// and builds the roster.
pub fn analyze_dialogue(raw: &[SubtitleSegment], lexicon: &Lexicon, rules: &ReferenceRules) -> Result<Dialogue> {
    let segments = clean_segments(raw);
    let mentions = classify_all(&segments, &extract_mentions(&segments, lexicon), rules);
    let clusters = cluster_names(&mentions, lexicon);
    let roster = build_roster(&clusters, &mentions)?;
    Ok(Dialogue {
        segments,
        mentions,
        roster,
    })
}

/// Knobs of the model itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub loss: LossWeights,
    pub modality_weights: ModalityWeights,
    pub window: usize,
    pub top_k: usize,
    pub solver: SolverConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            loss: LossWeights::default(),
            modality_weights: ModalityWeights::default(),
            window: DEFAULT_WINDOW,
            top_k: crate::config::DEFAULT_TOP_K,
            solver: SolverConfig::default(),
        }
    }
}

impl ModelSettings {
    pub fn from_config(c: &PipelineConfig) -> Self {
        Self {
            loss: c.loss,
            modality_weights: c.modality_weights,
            window: c.window,
            top_k: c.top_k,
            solver: c.solver,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub constraints: ConstraintSet,
    pub graph: SimilarityGraph,
    pub outcome: SolveOutcome,
    /// Predicted canonical name per segment.
    pub names: Vec<String>,
}

/// Builds constraints and the graph, then solves. Modalities with zero
/// weight are ignored; with none left the graph has no edges.
pub fn solve_dialogue(
    dialogue: &Dialogue,
    modalities: &[ModalityVectors],
    gender: &GenderProbs,
    settings: &ModelSettings,
) -> Result<Solution> {
    solve_dialogue_observed(dialogue, modalities, gender, settings, |_, _, _| {})
}

pub fn solve_dialogue_observed(
    dialogue: &Dialogue,
    modalities: &[ModalityVectors],
    gender: &GenderProbs,
    settings: &ModelSettings,
    observe: impl FnMut(usize, &PredictionMatrix, f64),
) -> Result<Solution> {
    let n = dialogue.n();
    if n == 0 {
        return Err(Error::InvalidInput("no dialogue segments".into()));
    }
    let constraints = build_constraints(&dialogue.mentions, &dialogue.roster, gender, n, settings.window)?;
    let active = modalities
        .iter()
        .any(|m| settings.modality_weights.get(m.modality) > 0.0);
    let graph = if active {
        fuse_similarities(modalities, settings.modality_weights, n, settings.top_k)?
    } else {
        SimilarityGraph::empty(n)
    };
    let objective = Objective::new(&constraints, &graph, &dialogue.roster, settings.loss)?;
    let outcome = solve_pgd_observed(&objective, &settings.solver, observe)?;
    let names = predict_names(&outcome.f, &dialogue.roster);
    Ok(Solution {
        constraints,
        graph,
        outcome,
        names,
    })
}

/// Everything the solver needs for one movie, read from configured files.
#[derive(Debug, Clone)]
pub struct MovieInputs {
    pub dialogue: Dialogue,
    pub modalities: Vec<ModalityVectors>,
    pub gender: GenderProbs,
}

fn read(config: &PipelineConfig, key: &str, p: Option<&std::path::PathBuf>) -> Result<Vec<u8>> {
    let path = config.require(key, p)?;
    std::fs::read(&path).map_err(|e| Error::config(key, format!("{}: {e}", path.display())))
}

pub fn load_lexicon(config: &PipelineConfig) -> Result<Lexicon> {
    match &config.lexicon {
        Some(p) => Lexicon::from_csv(&read(config, "lexicon", Some(p))?),
        None => Ok(Lexicon::builtin()),
    }
}

pub fn reference_rules(config: &PipelineConfig) -> ReferenceRules {
    ReferenceRules::new(&config.self_triggers, &config.vocative_triggers)
}

/// Parses and analyzes the configured subtitle file.
pub fn load_dialogue(config: &PipelineConfig) -> Result<Dialogue> {
    let raw = parse_srt(&read(config, "srt", config.srt.as_ref())?)?;
    analyze_dialogue(&raw, &load_lexicon(config)?, &reference_rules(config))
}

/// Loads subtitles, gender probabilities and modality vectors. Embedding
/// files that are not configured are skipped; the text modality follows
/// `text_source`.
pub fn load_inputs(config: &PipelineConfig) -> Result<MovieInputs> {
    config.validate()?;
    let dialogue = load_dialogue(config)?;
    let gender = match &config.gender_probs {
        Some(p) => GenderProbs::from_csv(&read(config, "gender_probs", Some(p))?)?,
        None => GenderProbs::default(),
    };
    let mut modalities = Vec::new();
    match config.text_source {
        TextSource::Tfidf => modalities.push(compute_tfidf(&dialogue.segments)),
        TextSource::Embeddings => {
            let bytes = read(config, "text_embeddings", config.text_embeddings.as_ref())?;
            modalities.push(load_embeddings(&bytes, Modality::Text)?);
        }
        TextSource::None => {}
    }
    for m in [Modality::Acoustic, Modality::Visual] {
        if let Some(p) = config.embeddings_path(m) {
            let key = format!("{m}_embeddings");
            modalities.push(load_embeddings(&read(config, &key, Some(p))?, m)?);
        }
    }
    Ok(MovieInputs {
        dialogue,
        modalities,
        gender,
    })
}
