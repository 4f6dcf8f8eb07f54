//! Seeded synthetic movies and brute-force oracles.
//!
//! A synthetic movie is a cast of named characters, a sequence of scenes in
//! which a few of them talk in turn, and per-segment modality vectors drawn
//! around a latent centroid for each speaker. The dialogue uses the same
//! trigger phrases as the reference classifier, so the text alone carries
//! first, second and third person evidence.

mod oracle;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::{AliasMap, GoldAnnotation};
use crate::features::{Modality, ModalityVectors};
use crate::io::GenderProbs;
use crate::reference::RefType;
use crate::srt::{write_srt, SubtitleSegment};

pub use oracle::{grid_oracle, simplex_grid, OracleResult, MAX_ORACLE_K, MAX_ORACLE_N};

/// (given name, nickname used in direct address)
const MALE_NAMES: &[(&str, Option<&str>)] = &[
    ("Kevin", Some("Kev")),
    ("Sheldon", Some("Shel")),
    ("Marcus", None),
    ("Victor", Some("Vic")),
    ("Howard", None),
    ("Oliver", None),
    ("Dmitri", None),
    ("Raymond", Some("Ray")),
    ("Gordon", None),
    ("Felix", None),
    ("Quentin", None),
    ("Walter", None),
];

const FEMALE_NAMES: &[(&str, Option<&str>)] = &[
    ("Penny", None),
    ("Leslie", None),
    ("Amelia", None),
    ("Beatrice", Some("Bea")),
    ("Gloria", None),
    ("Natalie", Some("Nat")),
    ("Rosalind", Some("Ros")),
    ("Yvonne", None),
    ("Harriet", None),
    ("Stella", None),
    ("Deborah", Some("Deb")),
    ("Cynthia", None),
];

const SURNAMES: &[&str] = &[
    "Lomax",
    "Bloom",
    "Hartley",
    "Quinn",
    "Mercer",
    "Okafor",
    "Lindqvist",
    "Petrov",
    "Castellano",
    "Whitaker",
    "Novak",
    "Delacroix",
    "Brennan",
    "Sato",
    "Fairbanks",
    "Holloway",
    "Achterberg",
    "Valdez",
    "Kowalski",
    "Umbridge",
    "Thornton",
    "Zielinski",
    "Esposito",
    "Marchetti",
];

pub const MAX_CHARACTERS: usize = 24;

/// Loss weights chosen by grid search on development seeds 100 to 105 of
/// the default spec. Benchmark seeds are disjoint from these.
pub const TUNED_LOSS_WEIGHTS: [f64; 5] = [200.0, 1.0, 10.0, 200.0, 1.0];

const SELF_TEMPLATES: &[&str] = &[
    "I'm {}.",
    "My name is {}.",
    "Hi, I'm {}.",
    "Call me {}.",
    "Hello, I am {}.",
];

/// `{}` is the name, `{f}` a lowercase filler sentence.
const ADDRESS_TEMPLATES: &[&str] = &[
    "Hey {}, {f}",
    "{}, {f}",
    "Thanks, {}.",
    "Listen, {}, {f}",
    "{}!",
    "Oh, hi, {}.",
    "Sorry, {}.",
];

const MENTION_TEMPLATES: &[&str] = &[
    "So how did it go with {}?",
    "Have you seen {}?",
    "I talked to {} yesterday.",
    "{} is late again.",
    "Did {} call?",
    "Where is {}?",
    "I think {} knows.",
];

const FILLERS: &[&str] = &[
    "We should go.",
    "That is not what I meant.",
    "Let's get out of here.",
    "You never listen to me.",
    "It's getting late.",
    "What do you want?",
    "This is ridiculous.",
    "We need to talk.",
    "Are you serious?",
    "Nothing happened.",
    "Just give me a minute.",
    "You have to trust me.",
    "Where were you last night?",
    "That was close.",
    "Keep your voice down.",
    "Everything is fine.",
    "Do you think they know?",
    "We have a problem.",
    "Come on, hurry up.",
    "Not now.",
    "Of course.",
    "You're kidding.",
    "Don't worry about it.",
    "It was an accident.",
    "Tell me everything.",
    "Wait here.",
];

const STAGE_DIRECTIONS: &[&str] = &["[sighs]", "[laughs]", "[door closes]", "(whispering)"];

/// Per-modality settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalitySpec {
    pub dim: usize,
    /// Standard deviation of the per-segment Gaussian noise.
    pub noise: f64,
    /// Probability that a segment has a vector at all.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub k: usize,
    pub n: usize,
    /// Probability that a segment opens with the speaker introducing themself.
    pub label_rate: f64,
    /// Probability that a segment addresses another character in the scene.
    pub second_rate: f64,
    /// Probability that a segment talks about an absent character.
    pub third_rate: f64,
    pub text: ModalitySpec,
    pub acoustic: ModalitySpec,
    pub visual: ModalitySpec,
    /// Mean of the audio gender classifier's logit, signed by true gender.
    pub gender_separation: f64,
    /// Speaking share of the character ranked `r` is proportional to
    /// `(r + 1)^-speaker_skew`.
    pub speaker_skew: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            k: 8,
            n: 500,
            label_rate: 0.05,
            second_rate: 0.3,
            third_rate: 0.15,
            text: ModalitySpec {
                dim: 16,
                noise: 2.0,
                coverage: 1.0,
            },
            acoustic: ModalitySpec {
                dim: 24,
                noise: 1.4,
                coverage: 1.0,
            },
            visual: ModalitySpec {
                dim: 32,
                noise: 1.2,
                coverage: 0.6,
            },
            gender_separation: 1.5,
            speaker_skew: 0.8,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k > MAX_CHARACTERS {
            return Err(Error::InvalidInput(format!(
                "character count must lie in 1..={MAX_CHARACTERS}, got {}",
                self.k
            )));
        }
        if self.n < self.k {
            return Err(Error::InvalidInput(format!(
                "need at least as many segments as characters ({} < {})",
                self.n, self.k
            )));
        }
        let rates = [
            ("label_rate", self.label_rate),
            ("second_rate", self.second_rate),
            ("third_rate", self.third_rate),
            ("text coverage", self.text.coverage),
            ("acoustic coverage", self.acoustic.coverage),
            ("visual coverage", self.visual.coverage),
        ];
        for (what, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInput(format!("{what} must lie in [0, 1], got {r}")));
            }
        }
        for (m, s) in self.modalities() {
            if !(s.noise >= 0.0 && s.noise.is_finite()) {
                return Err(Error::InvalidInput(format!("{m} noise must be >= 0, got {}", s.noise)));
            }
        }
        if !(self.gender_separation.is_finite() && self.speaker_skew.is_finite() && self.speaker_skew >= 0.0) {
            return Err(Error::InvalidInput(
                "gender separation and speaker skew must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn modalities(&self) -> [(Modality, ModalitySpec); 3] {
        [
            (Modality::Text, self.text),
            (Modality::Acoustic, self.acoustic),
            (Modality::Visual, self.visual),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCharacter {
    /// Gold name, `"Given Surname"`.
    pub full_name: String,
    pub given: String,
    pub nickname: Option<String>,
    pub male: bool,
}

impl SynthCharacter {
    fn surfaces(&self) -> Vec<&str> {
        let mut s = vec![self.full_name.as_str(), self.given.as_str()];
        s.extend(self.nickname.as_deref());
        s
    }
}

/// A name the generator wrote into the dialogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedMention {
    pub segment_pos: usize,
    pub character: usize,
    pub surface: String,
    pub ref_type: RefType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMovie {
    pub spec: SynthSpec,
    pub characters: Vec<SynthCharacter>,
    /// Gold speaker index per segment.
    pub speakers: Vec<usize>,
    pub segments: Vec<SubtitleSegment>,
    pub mentions: Vec<PlannedMention>,
    /// Text, acoustic and visual vectors, in that order.
    pub modalities: Vec<ModalityVectors>,
    pub gender_probs: GenderProbs,
    pub gold: GoldAnnotation,
    pub aliases: AliasMap,
}

pub const SRT_FILE: &str = "movie.srt";
pub const GENDER_FILE: &str = "gender.csv";
pub const GOLD_FILE: &str = "gold.csv";
pub const ALIAS_FILE: &str = "aliases.csv";
pub const CONFIG_FILE: &str = "config.txt";

pub fn embedding_file(m: Modality) -> String {
    format!("{m}.csv")
}

impl SynthMovie {
    pub fn srt(&self) -> String {
        write_srt(&self.segments)
    }

    /// Pipeline configuration pointing at the files written by [`Self::write_to`].
    pub fn config_text(&self) -> String {
        let mut out = String::new();
        let s = &self.spec;
        let _ = writeln!(out, "# synthetic movie: {} characters, {} segments", s.k, s.n);
        let _ = writeln!(out, "video = synth-{}", s.seed);
        let _ = writeln!(out, "seed = {}", s.seed);
        let names = ["initial", "mi", "negative", "gender", "distribution"];
        for (name, w) in names.iter().zip(TUNED_LOSS_WEIGHTS) {
            let _ = writeln!(out, "lambda_{name} = {w}");
        }
        let _ = writeln!(out, "srt = {SRT_FILE}");
        let _ = writeln!(out, "text_source = embeddings");
        for m in Modality::ALL {
            let _ = writeln!(out, "{m}_embeddings = {}", embedding_file(m));
        }
        let _ = writeln!(out, "gender_probs = {GENDER_FILE}");
        let _ = writeln!(out, "gold = {GOLD_FILE}");
        let _ = writeln!(out, "aliases = {ALIAS_FILE}");
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(SRT_FILE), self.srt())?;
        for v in &self.modalities {
            std::fs::write(dir.join(embedding_file(v.modality)), v.to_csv())?;
        }
        std::fs::write(dir.join(GENDER_FILE), self.gender_probs.to_csv())?;
        std::fs::write(dir.join(GOLD_FILE), self.gold.to_csv())?;
        std::fs::write(dir.join(ALIAS_FILE), self.aliases.to_csv())?;
        std::fs::write(dir.join(CONFIG_FILE), self.config_text())?;
        Ok(())
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn fill(template: &str, name: &str, filler: &str) -> String {
    template.replace("{f}", &lowercase_first(filler)).replace("{}", name)
}

fn cast(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<SynthCharacter> {
    let mut male: Vec<_> = MALE_NAMES.to_vec();
    let mut female: Vec<_> = FEMALE_NAMES.to_vec();
    let mut surnames: Vec<_> = SURNAMES.to_vec();
    male.shuffle(rng);
    female.shuffle(rng);
    surnames.shuffle(rng);
    (0..spec.k)
        .map(|r| {
            let is_male = if male.is_empty() {
                false
            } else if female.is_empty() {
                true
            } else {
                rng.random::<bool>()
            };
            let (given, nick) = if is_male { male.pop() } else { female.pop() }.expect("pools cover MAX_CHARACTERS");
            SynthCharacter {
                full_name: format!("{given} {}", surnames[r]),
                given: given.to_string(),
                nickname: nick.map(String::from),
                male: is_male,
            }
        })
        .collect()
}

/// Scene-structured speaker sequence: scenes of 6 to 20 turns among two or
/// three characters, never the same speaker twice in a row.
fn plan_speakers(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let share: Vec<f64> = (0..spec.k).map(|r| ((r + 1) as f64).powf(-spec.speaker_skew)).collect();
    let mut speakers = Vec::with_capacity(spec.n);
    let mut scene_of = Vec::with_capacity(spec.n);
    let mut scene = 0;
    while speakers.len() < spec.n {
        let len = rng.random_range(6..=20).min(spec.n - speakers.len());
        let size = if spec.k >= 3 && rng.random::<f64>() < 0.4 {
            3
        } else {
            2.min(spec.k)
        };
        let mut weights = share.clone();
        let mut cast = Vec::with_capacity(size);
        for _ in 0..size {
            let c = weighted_index(rng, &weights);
            weights[c] = 0.0;
            cast.push(c);
        }
        let mut prev = None;
        for _ in 0..len {
            let mut choices: Vec<usize> = cast.iter().copied().filter(|&c| Some(c) != prev).collect();
            if choices.is_empty() {
                choices = cast.clone();
            }
            let w: Vec<f64> = choices.iter().map(|&c| share[c]).collect();
            let s = choices[weighted_index(rng, &w)];
            speakers.push(s);
            scene_of.push(scene);
            prev = Some(s);
        }
        scene += 1;
    }
    // Every character speaks at least once.
    for c in 0..spec.k {
        if !speakers.contains(&c) {
            let slot = c * (spec.n / spec.k);
            speakers[slot] = c;
        }
    }
    (speakers, scene_of)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthMovie> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let characters = cast(spec, &mut rng);
    let (speakers, scene_of) = plan_speakers(spec, &mut rng);
    let n = spec.n;

    let mut segments = Vec::with_capacity(n);
    let mut mentions = Vec::new();
    let mut clock: u64 = 1_000;
    for i in 0..n {
        let speaker = speakers[i];
        let mut sentences: Vec<String> = Vec::new();
        let mut planned: Vec<(usize, String, RefType)> = Vec::new();

        if rng.random::<f64>() < spec.label_rate {
            let c = &characters[speaker];
            let surface = if rng.random::<f64>() < 0.7 {
                &c.given
            } else {
                &c.full_name
            };
            sentences.push(fill(pick(&mut rng, SELF_TEMPLATES), surface, ""));
            planned.push((speaker, surface.clone(), RefType::First));
        }
        if rng.random::<f64>() < spec.second_rate {
            let same_scene = |j: usize| scene_of[j] == scene_of[i] && speakers[j] != speaker;
            let partners: Vec<usize> = (0..n)
                .filter(|&j| scene_of[j] == scene_of[i] && speakers[j] != speaker)
                .map(|j| speakers[j])
                .collect();
            let addressee = if i + 1 < n && same_scene(i + 1) {
                Some(speakers[i + 1])
            } else if i > 0 && same_scene(i - 1) {
                Some(speakers[i - 1])
            } else {
                partners.first().copied()
            };
            if let Some(a) = addressee {
                let c = &characters[a];
                let u = rng.random::<f64>();
                let surface = match (&c.nickname, u) {
                    (Some(nick), u) if u < 0.15 => nick,
                    (_, u) if u < 0.85 => &c.given,
                    _ => &c.full_name,
                };
                let filler = pick(&mut rng, FILLERS);
                // Unlisted words only count as names away from a sentence start.
                let templates: Vec<&str> = if Some(surface) == c.nickname.as_ref() {
                    ADDRESS_TEMPLATES
                        .iter()
                        .copied()
                        .filter(|t| !t.starts_with("{}"))
                        .collect()
                } else {
                    ADDRESS_TEMPLATES.to_vec()
                };
                sentences.push(fill(pick(&mut rng, &templates), surface, filler));
                planned.push((a, surface.clone(), RefType::Second));
            }
        }
        if rng.random::<f64>() < spec.third_rate {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let present: Vec<usize> = (lo..=hi).map(|j| speakers[j]).collect();
            let absent: Vec<usize> = (0..spec.k).filter(|c| !present.contains(c)).collect();
            if !absent.is_empty() {
                let a = *pick(&mut rng, &absent);
                let c = &characters[a];
                let surface = if rng.random::<f64>() < 0.8 {
                    &c.given
                } else {
                    &c.full_name
                };
                sentences.push(fill(pick(&mut rng, MENTION_TEMPLATES), surface, ""));
                planned.push((a, surface.clone(), RefType::Third));
            }
        }
        if sentences.is_empty() || rng.random::<f64>() < 0.5 {
            sentences.push(pick(&mut rng, FILLERS).to_string());
        }
        if rng.random::<f64>() < 0.05 {
            sentences.insert(0, pick(&mut rng, STAGE_DIRECTIONS).to_string());
        }
        let lines = if sentences.len() >= 2 && rng.random::<f64>() < 0.4 {
            let cut = sentences.len() / 2;
            vec![sentences[..cut].join(" "), sentences[cut..].join(" ")]
        } else {
            vec![sentences.join(" ")]
        };

        clock += rng.random_range(200..1_500);
        let duration = rng.random_range(800..4_000);
        segments.push(SubtitleSegment::new(i + 1, clock, clock + duration, lines));
        clock += duration;
        mentions.extend(
            planned
                .into_iter()
                .map(|(character, surface, ref_type)| PlannedMention {
                    segment_pos: i,
                    character,
                    surface,
                    ref_type,
                }),
        );
    }

    let mut modalities = Vec::with_capacity(3);
    for (modality, m) in spec.modalities() {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let centroids: Vec<Vec<f64>> = (0..spec.k)
            .map(|_| (0..m.dim).map(|_| unit.sample(&mut rng)).collect())
            .collect();
        let mut vectors = ModalityVectors::new(modality, m.dim);
        for (i, &s) in speakers.iter().enumerate() {
            let present = m.coverage >= 1.0 || rng.random::<f64>() < m.coverage;
            if !present || m.dim == 0 {
                continue;
            }
            let v: Vec<f64> = centroids[s]
                .iter()
                .map(|&c| {
                    if m.noise > 0.0 {
                        c + m.noise * unit.sample(&mut rng)
                    } else {
                        c
                    }
                })
                .collect();
            vectors.insert(i, v)?;
        }
        modalities.push(vectors);
    }

    let logit = Normal::new(spec.gender_separation.abs(), 1.0).expect("finite parameters");
    let gender_probs = GenderProbs(
        speakers
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let z = logit.sample(&mut rng);
                let z = if characters[s].male { z } else { -z };
                (i, 1.0 / (1.0 + (-z).exp()))
            })
            .collect(),
    );

    let gold_names: Vec<&str> = speakers.iter().map(|&s| characters[s].full_name.as_str()).collect();
    let gold = GoldAnnotation::from_names(&gold_names);
    let mut aliases = AliasMap::default();
    for c in &characters {
        for surface in c.surfaces() {
            aliases.pairs.insert(surface.to_string(), c.full_name.clone());
        }
    }

    Ok(SynthMovie {
        spec: spec.clone(),
        characters,
        speakers,
        segments,
        mentions,
        modalities,
        gender_probs,
        gold,
        aliases,
    })
}
