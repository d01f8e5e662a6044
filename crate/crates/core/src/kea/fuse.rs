//! Candidate fusion: duplicate mentions of one identity collapse into a
//! single candidate with noisy-or confidence.

use std::collections::BTreeMap;

use super::{FusedCandidate, Mention};
use crate::content::tokenize;

/// Group mentions (from any document or origin) by fusion identity and
/// combine confidences.
///
/// Identity is the case-folded, whitespace-normalized, honorific-stripped
/// canonical label plus the candidate class. Confidence is noisy-or:
/// `1 - prod(1 - c_i)`, so every extra supporting mention can only raise
/// it. Output is ordered by (label, class); supporting mentions by
/// (pid, offset).
pub fn fuse_candidates(mentions: &[Mention], honorifics: &[String]) -> Vec<FusedCandidate> {
    let honorific_terms: Vec<Vec<String>> = honorifics
        .iter()
        .map(|h| tokenize(h).into_iter().map(|t| t.term).collect())
        .filter(|v: &Vec<String>| !v.is_empty())
        .collect();

    let mut groups: BTreeMap<(String, String), Vec<Mention>> = BTreeMap::new();
    for m in mentions {
        let key = (
            fusion_key(&m.canonical_label, &honorific_terms),
            m.candidate_class.clone(),
        );
        groups.entry(key).or_default().push(m.clone());
    }

    groups
        .into_iter()
        .map(|((_, class), mut group)| {
            group.sort_by(|a, b| {
                (a.pid.as_str(), a.start, a.end).cmp(&(b.pid.as_str(), b.start, b.end))
            });
            let fused_confidence = noisy_or(group.iter().map(|m| m.confidence));
            // Canonical label spelling: taken from the first mention.
            let label = group[0].canonical_label.clone();
            FusedCandidate {
                label,
                class,
                mentions: group,
                fused_confidence,
            }
        })
        .collect()
}

fn noisy_or(confidences: impl Iterator<Item = f64>) -> f64 {
    1.0 - confidences.fold(1.0, |acc, c| acc * (1.0 - c))
}

/// Normalized label with leading honorific tokens removed.
fn fusion_key(label: &str, honorifics: &[Vec<String>]) -> String {
    let mut terms: Vec<String> = tokenize(label).into_iter().map(|t| t.term).collect();
    loop {
        let stripped = honorifics
            .iter()
            .filter(|h| terms.len() > h.len() && terms.starts_with(h))
            .map(|h| h.len())
            .max();
        match stripped {
            Some(n) => terms.drain(..n),
            None => break,
        };
    }
    terms.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kea::Origin;
    use crate::store::Pid;
    use proptest::prelude::*;

    fn mention(label: &str, class: &str, confidence: f64, start: usize) -> Mention {
        Mention {
            pid: Pid::parse("ikmf:000000000000000000000000000000aa").unwrap(),
            start,
            end: start + label.len().max(1),
            surface: label.to_string(),
            canonical_label: label.to_string(),
            candidate_class: class.to_string(),
            confidence,
            origin: Origin::Prose,
        }
    }

    #[test]
    fn duplicate_identity_fuses_with_noisy_or() {
        let dr = Mention {
            canonical_label: "Dr. Smith".into(),
            ..mention("Dr. Smith", "Person", 0.8, 0)
        };
        let plain = Mention {
            canonical_label: "smith".into(),
            ..mention("smith", "Person", 1.0, 20)
        };
        let fused = fuse_candidates(&[dr, plain], &["Dr.".into()]);
        assert_eq!(fused.len(), 1);
        // 1 - (1-0.8)(1-1.0) = 1.0
        assert_eq!(fused[0].fused_confidence, 1.0);
        assert_eq!(fused[0].mentions.len(), 2);
    }

    #[test]
    fn single_candidate_keeps_its_confidence() {
        let fused = fuse_candidates(&[mention("Smith", "Person", 0.8, 0)], &[]);
        assert_eq!(fused.len(), 1);
        assert!((fused[0].fused_confidence - 0.8).abs() < 1e-12);
    }

    #[test]
    fn class_is_part_of_identity() {
        let fused = fuse_candidates(
            &[
                mention("Smith", "Person", 0.9, 0),
                mention("Smith", "Organisation", 0.9, 10),
            ],
            &[],
        );
        assert_eq!(fused.len(), 2);
    }

    #[test]
    fn fusion_is_idempotent() {
        let input = vec![
            mention("Smith", "Person", 0.8, 0),
            mention("smith", "Person", 0.5, 10),
            mention("Project X", "Project", 1.0, 20),
        ];
        let once = fuse_candidates(&input, &[]);
        let all_mentions: Vec<Mention> = once.iter().flat_map(|f| f.mentions.clone()).collect();
        let twice = fuse_candidates(&all_mentions, &[]);
        assert_eq!(once.len(), twice.len());
        for (a, b) in once.iter().zip(&twice) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.class, b.class);
            assert!((a.fused_confidence - b.fused_confidence).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            confs in proptest::collection::vec(0.0f64..1.0, 1..6),
            seed in 0u64..1000,
        ) {
            let mentions: Vec<Mention> = confs
                .iter()
                .enumerate()
                .map(|(i, c)| mention(if i % 2 == 0 { "Smith" } else { "Jones" }, "Person", *c, i * 10))
                .collect();
            let mut shuffled = mentions.clone();
            // Simple deterministic shuffle.
            let n = shuffled.len();
            for i in 0..n {
                let j = ((seed as usize).wrapping_mul(31).wrapping_add(i * 7)) % n;
                shuffled.swap(i, j);
            }
            let a = fuse_candidates(&mentions, &[]);
            let b = fuse_candidates(&shuffled, &[]);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(&x.label, &y.label);
                prop_assert!((x.fused_confidence - y.fused_confidence).abs() < 1e-12);
            }
        }

        #[test]
        fn noisy_or_is_monotone(
            confs in proptest::collection::vec(0.0f64..1.0, 1..6),
            extra in 0.0f64..1.0,
        ) {
            let mentions: Vec<Mention> = confs
                .iter()
                .enumerate()
                .map(|(i, c)| mention("Smith", "Person", *c, i * 10))
                .collect();
            let before = fuse_candidates(&mentions, &[])[0].fused_confidence;
            let mut more = mentions.clone();
            more.push(mention("Smith", "Person", extra, 999));
            let after = fuse_candidates(&more, &[])[0].fused_confidence;
            prop_assert!(after >= before - 1e-12);
        }
    }
}
