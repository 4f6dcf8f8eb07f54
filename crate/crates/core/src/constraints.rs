//! Turns classified mentions into optimizer constraints.
//!
//! * first person in segment `i` naming `j`: positive label `(i, j)`
//! * second person: soft targets `(i', j, 1 / (1 + |i' - i|))` for every
//!   neighbour within the window, excluding `i`
//! * third person: negatives `(i - 1, j)`, `(i, j)`, `(i + 1, j)`
//!
//! Positive labels override any negative or soft target on the same cell.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::io::GenderProbs;
use crate::names::{CharacterRoster, NameMention};
use crate::reference::RefType;

pub const DEFAULT_WINDOW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiTarget {
    pub instance: usize,
    pub class: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub n: usize,
    pub k: usize,
    pub positives: BTreeSet<(usize, usize)>,
    /// Sorted by (instance, class, weight).
    pub mi_targets: Vec<MiTarget>,
    pub negatives: BTreeSet<(usize, usize)>,
    /// P_ga for every instance, 0.5 where unknown.
    pub p_male_audio: Vec<f64>,
    pub prior: Vec<f64>,
}

impl ConstraintSet {
    /// No evidence: uniform prior, neutral audio genders.
    pub fn empty(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            positives: BTreeSet::new(),
            mi_targets: Vec::new(),
            negatives: BTreeSet::new(),
            p_male_audio: vec![0.5; n],
            prior: vec![1.0 / k.max(1) as f64; k],
        }
    }

    /// Number of distinct positively labelled instances.
    pub fn labeled_count(&self) -> usize {
        self.positives.iter().map(|&(i, _)| i).collect::<BTreeSet<_>>().len()
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |&(i, j): &(usize, usize)| i < self.n && j < self.k;
        if !self.positives.iter().all(in_range) || !self.negatives.iter().all(in_range) {
            return Err(Error::InvalidInput("constraint index out of range".into()));
        }
        if self.positives.iter().any(|p| self.negatives.contains(p)) {
            return Err(Error::InvalidInput("cell is both positive and negative".into()));
        }
        for t in &self.mi_targets {
            if t.instance >= self.n || t.class >= self.k || !(t.weight > 0.0 && t.weight <= 1.0) {
                return Err(Error::InvalidInput(format!("invalid multiple-instance target {t:?}")));
            }
        }
        if self.p_male_audio.len() != self.n || self.prior.len() != self.k {
            return Err(Error::InvalidInput(
                "gender or prior vector has the wrong length".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the constraint set for `n` instances. Mentions whose surface is
/// not in the roster, or that carry no reference type, are skipped.
pub fn build_constraints(
    mentions: &[NameMention],
    roster: &CharacterRoster,
    gender_probs: &GenderProbs,
    n: usize,
    window: usize,
) -> Result<ConstraintSet> {
    if window < 1 {
        return Err(Error::InvalidInput("window must be at least 1".into()));
    }
    let mut set = ConstraintSet {
        n,
        k: roster.len(),
        positives: BTreeSet::new(),
        mi_targets: Vec::new(),
        negatives: BTreeSet::new(),
        p_male_audio: (0..n).map(|i| gender_probs.get(i)).collect(),
        prior: roster.prior.clone(),
    };
    for m in mentions {
        let (Some(j), Some(ref_type)) = (roster.class_of(&m.surface), m.ref_type) else {
            continue;
        };
        let i = m.segment_pos;
        if i >= n {
            return Err(Error::InvalidInput(format!(
                "mention at segment {i} but only {n} segments"
            )));
        }
        match ref_type {
            RefType::First => {
                set.positives.insert((i, j));
            }
            RefType::Second => {
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(n - 1);
                for other in (lo..=hi).filter(|&o| o != i) {
                    set.mi_targets.push(MiTarget {
                        instance: other,
                        class: j,
                        weight: 1.0 / (1.0 + other.abs_diff(i) as f64),
                    });
                }
            }
            RefType::Third => {
                for other in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                    set.negatives.insert((other, j));
                }
            }
        }
    }
    let positives = &set.positives;
    set.negatives.retain(|p| !positives.contains(p));
    set.mi_targets.retain(|t| !positives.contains(&(t.instance, t.class)));
    set.mi_targets.sort_by(|a, b| {
        (a.instance, a.class)
            .cmp(&(b.instance, b.class))
            .then(a.weight.total_cmp(&b.weight))
    });
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::NameCluster;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn roster(names: &[&str]) -> CharacterRoster {
        let clusters = names
            .iter()
            .map(|n| NameCluster {
                canonical: n.to_string(),
                aliases: [n.to_string()].into(),
                count_first: 1,
                count_second: 1,
                count_third: 1,
                p_male_name: 0.5,
            })
            .collect();
        CharacterRoster::from_clusters(clusters).unwrap()
    }

    fn mention(pos: usize, surface: &str, r: RefType) -> NameMention {
        NameMention {
            segment_pos: pos,
            surface: surface.to_string(),
            token_span: (0, 1),
            ref_type: Some(r),
        }
    }

    #[test]
    fn first_person_is_positive() {
        let r = roster(&["Leonard", "Sheldon"]);
        let set = build_constraints(
            &[mention(7, "Sheldon", RefType::First)],
            &r,
            &GenderProbs::default(),
            10,
            2,
        )
        .unwrap();
        assert!(set.positives.contains(&(7, 1)));
        assert_eq!(set.labeled_count(), 1);
    }

    #[test]
    fn second_person_window() {
        let r = roster(&["Penny"]);
        let set = build_constraints(
            &[mention(5, "Penny", RefType::Second)],
            &r,
            &GenderProbs::default(),
            10,
            2,
        )
        .unwrap();
        let got: Vec<(usize, usize, f64)> = set.mi_targets.iter().map(|t| (t.instance, t.class, t.weight)).collect();
        let want = [(3, 0, 1.0 / 3.0), (4, 0, 0.5), (6, 0, 0.5), (7, 0, 1.0 / 3.0)];
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!((g.0, g.1), (w.0, w.1));
            assert_relative_eq!(g.2, w.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn third_person_clipped() {
        let r = roster(&["Leslie"]);
        let set = build_constraints(
            &[mention(0, "Leslie", RefType::Third)],
            &r,
            &GenderProbs::default(),
            5,
            2,
        )
        .unwrap();
        assert_eq!(set.negatives, [(0, 0), (1, 0)].into());
        let set = build_constraints(
            &[mention(4, "Leslie", RefType::Third)],
            &r,
            &GenderProbs::default(),
            5,
            2,
        )
        .unwrap();
        assert_eq!(set.negatives, [(3, 0), (4, 0)].into());
    }

    #[test]
    fn positives_dominate() {
        let r = roster(&["Amy"]);
        let ms = [
            mention(2, "Amy", RefType::Third),
            mention(3, "Amy", RefType::First),
            mention(4, "Amy", RefType::Second),
        ];
        let set = build_constraints(&ms, &r, &GenderProbs::default(), 6, 1).unwrap();
        assert!(!set.negatives.contains(&(3, 0)));
        assert!(set.mi_targets.iter().all(|t| t.instance != 3));
        set.validate().unwrap();
    }

    #[test]
    fn skips_unknown_and_rejects_bad_window() {
        let r = roster(&["Amy"]);
        let ms = [
            mention(0, "Zed", RefType::First),
            NameMention {
                ref_type: None,
                ..mention(0, "Amy", RefType::First)
            },
        ];
        let set = build_constraints(&ms, &r, &GenderProbs::default(), 2, 1).unwrap();
        assert!(set.positives.is_empty());
        assert!(build_constraints(&[], &r, &GenderProbs::default(), 2, 0).is_err());
    }

    #[test]
    fn audio_genders_default() {
        let r = roster(&["Amy"]);
        let mut g = GenderProbs::default();
        g.0.insert(1, 0.8);
        let set = build_constraints(&[], &r, &g, 3, 1).unwrap();
        assert_eq!(set.p_male_audio, [0.5, 0.8, 0.5]);
    }

    fn arb_mentions() -> impl Strategy<Value = Vec<NameMention>> {
        prop::collection::vec(
            (
                0usize..12,
                0usize..3,
                prop_oneof![Just(RefType::First), Just(RefType::Second), Just(RefType::Third)],
            ),
            0..20,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(pos, c, r)| mention(pos, ["Amy", "Bob", "Cat"][c], r))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn invariants(ms in arb_mentions(), window in 1usize..4, seed in any::<u64>()) {
            let r = roster(&["Amy", "Bob", "Cat"]);
            let g = GenderProbs::default();
            let set = build_constraints(&ms, &r, &g, 12, window).unwrap();
            set.validate().unwrap();
            for t in &set.mi_targets {
                let delta = (1.0 / t.weight - 1.0).round();
                prop_assert!(delta >= 1.0 && delta <= window as f64);
                prop_assert!((t.weight - 1.0 / (1.0 + delta)).abs() < 1e-12);
            }
            let mut shuffled = ms.clone();
            let len = shuffled.len().max(1);
            shuffled.rotate_left((seed as usize) % len);
            shuffled.reverse();
            prop_assert_eq!(build_constraints(&shuffled, &r, &g, 12, window).unwrap(), set);
        }
    }
}
