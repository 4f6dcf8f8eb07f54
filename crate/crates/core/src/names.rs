//! Character roster discovery: mention detection, alias clustering and the
//! mention prior.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::reference::RefType;
use crate::srt::SubtitleSegment;
use crate::text::{is_apostrophe, tokenize};

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.csv");
const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Normalized edit distance at or below which two surfaces link.
pub const LINK_DISTANCE: f64 = 0.34;
/// Shortest token that may link as a string prefix ("Kev" / "Kevin").
const MIN_PREFIX_LEN: usize = 3;
/// Clusters below this total mention count are discarded.
pub const MIN_CLUSTER_COUNT: usize = 3;

/// Given names with their probability of being male.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    names: HashMap<String, f64>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_LEXICON.as_bytes()).expect("builtin lexicon is valid")
    }

    /// Reads a `name,p_male` CSV.
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut names = HashMap::new();
        for (row, record) in crate::io::read_csv(bytes, &["name", "p_male"])? {
            let p: f64 = crate::io::parse_field(&record[1], row, "p_male")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::csv(row, format!("p_male {p} outside [0, 1]")));
            }
            names.insert(record[0].to_string(), p);
        }
        Ok(Self { names })
    }

    pub fn insert(&mut self, name: impl Into<String>, p_male: f64) {
        self.names.insert(name.into(), p_male);
    }

    pub fn contains(&self, word: &str) -> bool {
        self.names.contains_key(word)
    }

    /// Gender of a surface: the whole surface if listed, else its first token.
    pub fn p_male(&self, surface: &str) -> Option<f64> {
        self.names.get(surface).copied().or_else(|| {
            surface
                .split_whitespace()
                .next()
                .and_then(|first| self.names.get(first).copied())
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Capitalized words that never start a mention.
#[derive(Debug, Clone)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }

    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

impl Default for StopWords {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameMention {
    /// Position of the segment in the cleaned segment list.
    pub segment_pos: usize,
    pub surface: String,
    /// Half-open token range in the segment's `clean_text`.
    pub token_span: (usize, usize),
    pub ref_type: Option<RefType>,
}

/// Strips a trailing possessive `'s`.
fn base_word(word: &str) -> &str {
    let mut chars = word.char_indices().rev();
    match (chars.next(), chars.next()) {
        (Some((_, 's')), Some((i, c))) if is_apostrophe(c) && i > 0 => &word[..i],
        _ => word,
    }
}

pub fn extract_mentions(segments: &[SubtitleSegment], lexicon: &Lexicon) -> Vec<NameMention> {
    extract_mentions_with(segments, lexicon, &StopWords::builtin())
}

/// A token qualifies if it is a lexicon name, or a capitalized non-stop word
/// that does not open a sentence. Adjacent qualifying tokens with no
/// punctuation between them merge into one mention.
pub fn extract_mentions_with(
    segments: &[SubtitleSegment],
    lexicon: &Lexicon,
    stopwords: &StopWords,
) -> Vec<NameMention> {
    let mut mentions = Vec::new();
    for (pos, seg) in segments.iter().enumerate() {
        let tokens = tokenize(&seg.clean_text);
        let qualifies = |i: usize| {
            let tok = &tokens[i];
            if !tok.is_capitalized() || stopwords.contains(&tok.word) {
                return false;
            }
            let base = base_word(&tok.word);
            lexicon.contains(base) || (!tok.sentence_start && !stopwords.contains(base))
        };
        let mut i = 0;
        while i < tokens.len() {
            if !qualifies(i) {
                i += 1;
                continue;
            }
            let start = i;
            let mut end = i + 1;
            while end < tokens.len()
                && tokens[end - 1].trailing.is_empty()
                && tokens[end].sentence == tokens[start].sentence
                && base_word(&tokens[end - 1].word) == tokens[end - 1].word
                && qualifies(end)
            {
                end += 1;
            }
            let surface = tokens[start..end]
                .iter()
                .map(|t| base_word(&t.word))
                .collect::<Vec<_>>()
                .join(" ");
            mentions.push(NameMention {
                segment_pos: pos,
                surface,
                token_span: (start, end),
                ref_type: None,
            });
            i = end;
        }
    }
    mentions
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameCluster {
    pub canonical: String,
    pub aliases: BTreeSet<String>,
    pub count_first: usize,
    pub count_second: usize,
    pub count_third: usize,
    pub p_male_name: f64,
}

impl NameCluster {
    pub fn total(&self) -> usize {
        self.count_first + self.count_second + self.count_third
    }

    pub fn addressed(&self) -> usize {
        self.count_first + self.count_second
    }
}

fn normalized_distance(a: &str, b: &str) -> f64 {
    let (a, b) = (a.to_lowercase(), b.to_lowercase());
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    strsim::levenshtein(&a, &b) as f64 / longest as f64
}

/// `short` leads `long` token by token; the last token of `short` may be a
/// string prefix of at least three letters.
fn is_token_prefix(short: &str, long: &str) -> bool {
    let s: Vec<&str> = short.split_whitespace().collect();
    let l: Vec<&str> = long.split_whitespace().collect();
    if s.is_empty() || s.len() > l.len() || s == l {
        return false;
    }
    let last = s.len() - 1;
    if s[..last] != l[..last] {
        return false;
    }
    s[last] == l[last] || (s[last].chars().count() >= MIN_PREFIX_LEN && l[last].starts_with(s[last]))
}

fn genders_conflict(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a > 0.5 && b < 0.5) || (a < 0.5 && b > 0.5),
        _ => false,
    }
}

/// Whether two surfaces are linked for single-link clustering.
pub fn surfaces_link(a: &str, b: &str, lexicon: &Lexicon) -> bool {
    let similar = normalized_distance(a, b) <= LINK_DISTANCE || is_token_prefix(a, b) || is_token_prefix(b, a);
    similar && !genders_conflict(lexicon.p_male(a), lexicon.p_male(b))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-link clustering of mention surfaces. Clusters come out ordered by
/// descending mention count, then canonical name.
pub fn cluster_names(mentions: &[NameMention], lexicon: &Lexicon) -> Vec<NameCluster> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for m in mentions {
        *freq.entry(m.surface.as_str()).or_default() += 1;
    }
    let surfaces: Vec<&str> = freq.keys().copied().collect();
    let mut parent: Vec<usize> = (0..surfaces.len()).collect();
    for a in 0..surfaces.len() {
        for b in a + 1..surfaces.len() {
            if surfaces_link(surfaces[a], surfaces[b], lexicon) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (i, s) in surfaces.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(s);
    }

    let mut clusters: Vec<(usize, NameCluster)> = groups
        .into_values()
        .map(|members| {
            let canonical = *members
                .iter()
                .max_by(|a, b| {
                    freq[*a]
                        .cmp(&freq[*b])
                        .then(a.chars().count().cmp(&b.chars().count()))
                        .then(b.cmp(a))
                })
                .expect("groups are non-empty");
            let total = members.iter().map(|s| freq[s]).sum();
            let aliases: BTreeSet<String> = members.iter().map(|s| s.to_string()).collect();
            let mut cluster = NameCluster {
                canonical: canonical.to_string(),
                p_male_name: lexicon.p_male(canonical).unwrap_or(0.5),
                aliases,
                count_first: 0,
                count_second: 0,
                count_third: 0,
            };
            tally(&mut cluster, mentions);
            (total, cluster)
        })
        .collect();
    clusters.sort_by(|(ta, a), (tb, b)| tb.cmp(ta).then_with(|| a.canonical.cmp(&b.canonical)));
    clusters.into_iter().map(|(_, c)| c).collect()
}

fn tally(cluster: &mut NameCluster, mentions: &[NameMention]) {
    cluster.count_first = 0;
    cluster.count_second = 0;
    cluster.count_third = 0;
    for m in mentions.iter().filter(|m| cluster.aliases.contains(&m.surface)) {
        match m.ref_type {
            Some(RefType::First) => cluster.count_first += 1,
            Some(RefType::Second) => cluster.count_second += 1,
            Some(RefType::Third) => cluster.count_third += 1,
            None => {}
        }
    }
}

/// The surviving clusters and their mention prior `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterRoster {
    pub clusters: Vec<NameCluster>,
    pub prior: Vec<f64>,
}

impl CharacterRoster {
    /// Builds a roster from clusters whose counts are already filled in,
    /// with a prior proportional to first- plus second-person counts.
    pub fn from_clusters(clusters: Vec<NameCluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::EmptyRoster);
        }
        let mut weights: Vec<f64> = clusters.iter().map(|c| c.addressed() as f64).collect();
        if weights.iter().sum::<f64>() == 0.0 {
            weights = clusters.iter().map(|c| c.total() as f64).collect();
        }
        let total: f64 = weights.iter().sum();
        let prior = if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / clusters.len() as f64; clusters.len()]
        };
        Ok(Self { clusters, prior })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.clusters.iter().map(|c| c.canonical.as_str()).collect()
    }

    /// P_gn per class.
    pub fn name_genders(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.p_male_name).collect()
    }

    /// Class index of a mention surface.
    pub fn class_of(&self, surface: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.aliases.contains(surface))
    }

    /// Roster as CSV: `class,canonical,aliases,count_first,count_second,count_third,p_male,prior`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,canonical,aliases,count_first,count_second,count_third,p_male,prior\n");
        for (j, (c, d)) in self.clusters.iter().zip(&self.prior).enumerate() {
            let aliases: Vec<&str> = c.aliases.iter().map(String::as_str).collect();
            out.push_str(&format!(
                "{j},{},{},{},{},{},{},{}\n",
                c.canonical,
                aliases.join("|"),
                c.count_first,
                c.count_second,
                c.count_third,
                c.p_male_name,
                d
            ));
        }
        out
    }
}

/// Recounts references per cluster, drops clusters with fewer than three
/// mentions or with third-person mentions only, and computes the prior.
pub fn build_roster(clusters: &[NameCluster], classified_mentions: &[NameMention]) -> Result<CharacterRoster> {
    let kept: Vec<NameCluster> = clusters
        .iter()
        .cloned()
        .map(|mut c| {
            tally(&mut c, classified_mentions);
            c
        })
        .filter(|c| c.total() >= MIN_CLUSTER_COUNT && c.addressed() > 0)
        .collect();
    CharacterRoster::from_clusters(kept)
}
