//! Deterministic synthetic corpus generation.
//!
//! A [`SyntheticSpec`] fixes an exact label-set composition, a phrase bank,
//! a length model, and a seed. [`generate_synthetic`] expands it into a
//! corpus where every document's gold labels are recoverable by plain
//! substring search: each gold label contributes at least one trigger
//! phrase, every other sentence is neutral distractor text, and no trigger
//! phrase of a non-gold label ever appears. Equal specs produce
//! byte-identical corpora.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::label::{Label, LabelSet};
use crate::seeding::{derive_seed_tagged, rng_from};

/// Triggers are placed within the first this-many sentences so that head
/// truncation at typical caps still sees them.
const TRIGGER_WINDOW: usize = 10;

/// Joiner for multiple trigger clauses packed into one sentence. Phrases may
/// not contain ';', so no phrase can straddle the joiner.
const CLAUSE_JOINER: &str = "; ";

/// One composition entry: how many documents carry exactly this label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionEntry {
    pub labels: LabelSet,
    pub count: usize,
}

/// Per-label trigger phrases plus neutral filler.
///
/// Rendered trigger sentences are `prefix + phrase + "."`; a document's
/// remaining sentences come from `distractors`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseBank {
    #[serde(rename = "SI")]
    pub si: Vec<String>,
    #[serde(rename = "SA")]
    pub sa: Vec<String>,
    #[serde(rename = "ES")]
    pub es: Vec<String>,
    #[serde(rename = "NSSI")]
    pub nssi: Vec<String>,
    pub distractors: Vec<String>,
    #[serde(default = "default_prefixes")]
    pub prefixes: Vec<String>,
}

fn default_prefixes() -> Vec<String> {
    ["Patient ", "He ", "She ", "The patient "]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

impl PhraseBank {
    pub fn pool(&self, label: Label) -> &[String] {
        match label {
            Label::SI => &self.si,
            Label::SA => &self.sa,
            Label::ES => &self.es,
            Label::NSSI => &self.nssi,
        }
    }
}

/// Document length model, in sentences.
///
/// Every document draws a base count from `sentences`. When `long_tail` is
/// set, a `fraction` of documents additionally draw `extra_sentences`,
/// giving a bimodal length distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthModel {
    pub sentences: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_tail: Option<LongTail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTail {
    pub fraction: f64,
    pub extra_sentences: (usize, usize),
}

/// Full recipe for a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub total_documents: usize,
    pub composition: Vec<CompositionEntry>,
    pub length: LengthModel,
    pub phrases: PhraseBank,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("composition counts sum to {actual}, spec requests {requested} documents")]
    CompositionMismatch { requested: usize, actual: usize },
    #[error("label set {0} appears more than once in composition")]
    DuplicateComposition(LabelSet),
    #[error("phrase pool for label {0} is empty")]
    EmptyPool(Label),
    #[error("distractor pool is empty")]
    EmptyDistractors,
    #[error("prefix pool is empty")]
    EmptyPrefixes,
    #[error("length range ({0}, {1}) invalid: need 1 <= min <= max")]
    BadLength(usize, usize),
    #[error("long tail fraction {0} not in [0, 1]")]
    BadTailFraction(f64),
    #[error("phrase {0:?} invalid: phrases must be trimmed, non-empty, and free of '.', ';', and newlines")]
    BadPhrase(String),
    #[error("prefix {0:?} invalid: prefixes must be non-empty and free of '.', ';', and newlines")]
    BadPrefix(String),
    #[error("distractor {0:?} invalid: must be a single trimmed sentence ending in '.'")]
    BadDistractor(String),
    #[error("trigger phrase {inner:?} ({inner_label}) appears inside a rendered {outer_label} sentence {outer:?}")]
    PhraseCollision {
        outer_label: Label,
        outer: String,
        inner_label: Label,
        inner: String,
    },
    #[error("trigger phrase {phrase:?} ({label}) appears inside distractor {distractor:?}")]
    DistractorCollision {
        label: Label,
        phrase: String,
        distractor: String,
    },
    #[error("generated document {id} recovers labels {recovered}, expected {expected}")]
    Unsound {
        id: String,
        recovered: LabelSet,
        expected: LabelSet,
    },
}

impl SyntheticSpec {
    /// Validate all structural invariants the generator relies on.
    pub fn validate(&self) -> Result<(), SynthError> {
        let actual: usize = self.composition.iter().map(|e| e.count).sum();
        if actual != self.total_documents {
            return Err(SynthError::CompositionMismatch {
                requested: self.total_documents,
                actual,
            });
        }
        for (i, entry) in self.composition.iter().enumerate() {
            if self.composition[..i].iter().any(|e| e.labels == entry.labels) {
                return Err(SynthError::DuplicateComposition(entry.labels));
            }
        }
        for label in Label::ALL {
            if self.phrases.pool(label).is_empty() {
                return Err(SynthError::EmptyPool(label));
            }
        }
        if self.phrases.distractors.is_empty() {
            return Err(SynthError::EmptyDistractors);
        }
        if self.phrases.prefixes.is_empty() {
            return Err(SynthError::EmptyPrefixes);
        }
        let (lo, hi) = self.length.sentences;
        if lo < 1 || lo > hi {
            return Err(SynthError::BadLength(lo, hi));
        }
        if let Some(tail) = &self.length.long_tail {
            if !tail.fraction.is_finite() || !(0.0..=1.0).contains(&tail.fraction) {
                return Err(SynthError::BadTailFraction(tail.fraction));
            }
            let (tlo, thi) = tail.extra_sentences;
            if tlo > thi {
                return Err(SynthError::BadLength(tlo, thi));
            }
        }
        for label in Label::ALL {
            for phrase in self.phrases.pool(label) {
                if phrase.is_empty()
                    || phrase.trim() != phrase
                    || phrase.contains(['.', ';', '\n'])
                {
                    return Err(SynthError::BadPhrase(phrase.clone()));
                }
            }
        }
        for prefix in &self.phrases.prefixes {
            if prefix.is_empty() || prefix.contains(['.', ';', '\n']) {
                return Err(SynthError::BadPrefix(prefix.clone()));
            }
        }
        for d in &self.phrases.distractors {
            let ok = !d.is_empty()
                && d.trim() == d
                && d.ends_with('.')
                && d.matches('.').count() == 1
                && !d.contains('\n');
            if !ok {
                return Err(SynthError::BadDistractor(d.clone()));
            }
        }
        // No phrase of label b may occur inside any rendered sentence of
        // label a. Together with the character restrictions above this makes
        // substring search an exact label decoder.
        for a in Label::ALL {
            for b in Label::ALL {
                if a == b {
                    continue;
                }
                for p in self.phrases.pool(a) {
                    for prefix in &self.phrases.prefixes {
                        let rendered = format!("{prefix}{p}.");
                        for q in self.phrases.pool(b) {
                            if rendered.contains(q.as_str()) {
                                return Err(SynthError::PhraseCollision {
                                    outer_label: a,
                                    outer: rendered,
                                    inner_label: b,
                                    inner: q.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        for d in &self.phrases.distractors {
            for label in Label::ALL {
                for q in self.phrases.pool(label) {
                    if d.contains(q.as_str()) {
                        return Err(SynthError::DistractorCollision {
                            label,
                            phrase: q.clone(),
                            distractor: d.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The default 500-document profile shipped with the toolkit: 675 label
    /// instances over SI=294, SA=265, ES=22, NSSI=94; 103 label-free
    /// documents; cardinality histogram (103, 172, 176, 45, 4); 178
    /// documents carrying both SI and SA; roughly 14% of documents long
    /// enough to exceed a 512-token cap.
    pub fn reference() -> SyntheticSpec {
        use Label::{ES, NSSI, SA, SI};
        let entry = |labels: &[Label], count: usize| CompositionEntry {
            labels: LabelSet::from_labels(labels),
            count,
        };
        SyntheticSpec {
            seed: 2026,
            total_documents: 500,
            composition: vec![
                entry(&[], 103),
                entry(&[SI], 96),
                entry(&[SA], 62),
                entry(&[ES], 3),
                entry(&[NSSI], 11),
                entry(&[SI, SA], 133),
                entry(&[SI, ES], 2),
                entry(&[SA, ES], 4),
                entry(&[SI, NSSI], 17),
                entry(&[SA, NSSI], 18),
                entry(&[ES, NSSI], 2),
                entry(&[SI, SA, ES], 3),
                entry(&[SI, SA, NSSI], 38),
                entry(&[SI, ES, NSSI], 1),
                entry(&[SA, ES, NSSI], 3),
                entry(&[SI, SA, ES, NSSI], 4),
            ],
            length: LengthModel {
                sentences: (3, 6),
                long_tail: Some(LongTail {
                    fraction: 0.138,
                    extra_sentences: (75, 95),
                }),
            },
            phrases: PhraseBank::reference(),
        }
    }
}

impl PhraseBank {
    /// The built-in phrase bank. Each label keeps at least one content word
    /// that no other pool or distractor uses, so the labels stay separable
    /// at the word level; shared words like "suicide" appear across pools
    /// on purpose.
    pub fn reference() -> PhraseBank {
        let v = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        PhraseBank {
            si: v(&[
                "reports persistent suicidal ideation with a specific plan",
                "endorses active suicidal ideation most days",
                "describes intrusive thoughts of ending his own life",
                "voices a passive death wish without any plan",
            ]),
            sa: v(&[
                "survived an intentional overdose last month",
                "made a suicide attempt by overdose two weeks ago",
                "was hospitalized after a medically serious suicide attempt",
                "ingested a handful of pills in a suicide attempt",
            ]),
            es: v(&[
                "says a close friend attempted suicide last year",
                "witnessed a family suicide during childhood",
                "lost her brother to suicide in adolescence",
                "was bereaved by a coworker suicide this spring",
            ]),
            nssi: v(&[
                "engages in superficial cutting without suicidal intent",
                "reports self-harm without intent to die",
                "burns her forearms to relieve tension",
                "admits scratching himself to cope with stress",
            ]),
            distractors: v(&[
                "Vital signs remained stable throughout the entire visit.",
                "The care team reviewed current medications at bedside.",
                "Sleep has been fragmented with frequent awakenings lately.",
                "Appetite is fair and weight has held steady.",
                "He attended the morning group session without difficulty.",
                "Mood was described as even for most of the day.",
                "She tolerated the new dose with no reported side effects.",
                "Laboratory values from this morning were within normal limits.",
                "The patient ambulated independently around the unit twice.",
                "Discharge coordination will continue with the social worker.",
                "Breakfast intake was roughly three quarters of the tray.",
                "He remained cooperative and attentive during the interview.",
                "Speech was clear with normal rate and rhythm.",
                "She completed the worksheet exercises before lunch today.",
                "Blood pressure readings were rechecked after the afternoon walk.",
                "The overnight shift reported a quiet and restful night.",
                "Hygiene and grooming were appropriate this morning.",
                "He verbalized understanding of the updated teaching points.",
                "Physical therapy recommended continued gentle stretching daily.",
                "The dietitian visited to discuss balanced meal choices.",
                "She practiced the breathing exercises twice this afternoon.",
                "No acute distress was observed during rounds today.",
                "Concentration appeared adequate during the brief cognitive screen.",
                "He asked appropriate questions about the revised schedule.",
                "Skin was warm and dry with good color overall.",
                "The unit milieu remained calm through the evening hours.",
                "She met briefly with the attending psychiatrist after lunch.",
                "Orientation was intact to person place and time.",
                "He declined the optional afternoon recreation outing politely.",
                "Fluid intake improved after encouragement from the nursing staff.",
                "The treatment review meeting is scheduled for Thursday morning.",
                "She reported mild headache relieved by rest and hydration.",
                "Gait was steady without assistive devices on the ward.",
                "He spent part of the afternoon reading in the dayroom.",
                "Call light remains within reach and safety checks continue.",
                "The evening medication pass was completed without issues.",
            ]),
            prefixes: default_prefixes(),
        }
    }
}

/// Decode a document's labels by substring search over the phrase bank.
///
/// For generated corpora this recovers the gold set exactly; the generator
/// enforces it.
pub fn recover_labels(text: &str, bank: &PhraseBank) -> LabelSet {
    let mut set = LabelSet::EMPTY;
    for label in Label::ALL {
        if bank.pool(label).iter().any(|p| text.contains(p.as_str())) {
            set.insert(label);
        }
    }
    set
}

/// Generate the corpus described by `spec`. Pure in `spec`: equal specs
/// yield byte-identical corpora.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus, SynthError> {
    spec.validate()?;

    let mut sets: Vec<LabelSet> = Vec::with_capacity(spec.total_documents);
    for entry in &spec.composition {
        sets.extend(std::iter::repeat_n(entry.labels, entry.count));
    }
    let mut order_rng = rng_from(derive_seed_tagged(spec.seed, "order", &[]));
    sets.shuffle(&mut order_rng);

    let width = spec.total_documents.to_string().len().max(3);
    let mut documents = Vec::with_capacity(sets.len());
    for (i, &gold) in sets.iter().enumerate() {
        let mut rng = rng_from(derive_seed_tagged(spec.seed, "doc", &[i as u64]));
        let text = render_document(spec, gold, &mut rng);
        documents.push(Document {
            id: format!("synth-{:0width$}", i + 1),
            text,
            gold,
        });
    }
    let corpus = Corpus::new(documents).expect("generated ids unique, texts non-empty");

    for doc in corpus.iter() {
        let recovered = recover_labels(&doc.text, &spec.phrases);
        if recovered != doc.gold {
            return Err(SynthError::Unsound {
                id: doc.id.clone(),
                recovered,
                expected: doc.gold,
            });
        }
    }
    Ok(corpus)
}

fn render_document<R: Rng>(spec: &SyntheticSpec, gold: LabelSet, rng: &mut R) -> String {
    let (lo, hi) = spec.length.sentences;
    let mut n = rng.gen_range(lo..=hi);
    if let Some(tail) = &spec.length.long_tail {
        if rng.gen::<f64>() < tail.fraction {
            let (tlo, thi) = tail.extra_sentences;
            n += rng.gen_range(tlo..=thi);
        }
    }

    // Two trigger phrases per gold label when the document has room, one
    // otherwise; tiny documents pack several clauses into one sentence.
    let mut clauses: Vec<(Label, &str)> = Vec::new();
    let cardinality = gold.cardinality();
    if cardinality > 0 {
        let per_label = if n >= 2 * cardinality { 2 } else { 1 };
        for label in gold.iter() {
            let pool = spec.phrases.pool(label);
            let take = per_label.min(pool.len());
            let first = rng.gen_range(0..pool.len());
            clauses.push((label, pool[first].as_str()));
            if take == 2 {
                let second = (first + 1 + rng.gen_range(0..pool.len() - 1)) % pool.len();
                clauses.push((label, pool[second].as_str()));
            }
        }
    }

    let mut sentences: Vec<String> = Vec::with_capacity(n);
    if clauses.is_empty() {
        for _ in 0..n {
            sentences.push(sample_distractor(spec, rng));
        }
    } else if clauses.len() <= n {
        let window = n.min(TRIGGER_WINDOW);
        let positions = sample_distinct(rng, clauses.len(), window);
        let mut slot = vec![usize::MAX; n];
        for (clause_idx, &pos) in positions.iter().enumerate() {
            slot[pos] = clause_idx;
        }
        for &clause_idx in &slot {
            if clause_idx == usize::MAX {
                sentences.push(sample_distractor(spec, rng));
            } else {
                sentences.push(render_trigger(spec, &[clauses[clause_idx].1], rng));
            }
        }
    } else {
        let mut groups: Vec<Vec<&str>> = vec![Vec::new(); n];
        for (j, &(_, phrase)) in clauses.iter().enumerate() {
            groups[j % n].push(phrase);
        }
        for group in &groups {
            sentences.push(render_trigger(spec, group, rng));
        }
    }
    sentences.join(" ")
}

fn render_trigger<R: Rng>(spec: &SyntheticSpec, phrases: &[&str], rng: &mut R) -> String {
    let prefixes = &spec.phrases.prefixes;
    let prefix = &prefixes[rng.gen_range(0..prefixes.len())];
    format!("{prefix}{}.", phrases.join(CLAUSE_JOINER))
}

fn sample_distractor<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> String {
    let pool = &spec.phrases.distractors;
    pool[rng.gen_range(0..pool.len())].clone()
}

/// First `take` entries of a seeded partial shuffle of `0..window`.
fn sample_distinct<R: Rng>(rng: &mut R, take: usize, window: usize) -> Vec<usize> {
    debug_assert!(take <= window);
    let mut indices: Vec<usize> = (0..window).collect();
    for i in 0..take {
        let j = rng.gen_range(i..window);
        indices.swap(i, j);
    }
    indices.truncate(take);
    indices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_to_jsonl, label_distribution};
    use proptest::prelude::*;

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            seed: 7,
            total_documents: 3,
            composition: vec![
                CompositionEntry {
                    labels: LabelSet::from_labels(&[Label::SI]),
                    count: 2,
                },
                CompositionEntry {
                    labels: LabelSet::EMPTY,
                    count: 1,
                },
            ],
            length: LengthModel {
                sentences: (3, 5),
                long_tail: None,
            },
            phrases: PhraseBank::reference(),
        }
    }

    #[test]
    fn counts_match_composition_and_regeneration_is_bit_exact() {
        let spec = tiny_spec();
        let corpus = generate_synthetic(&spec).unwrap();
        assert_eq!(corpus.len(), 3);
        let si_docs = corpus
            .iter()
            .filter(|d| d.gold == LabelSet::from_labels(&[Label::SI]))
            .count();
        let empty_docs = corpus.iter().filter(|d| d.gold.is_empty()).count();
        assert_eq!((si_docs, empty_docs), (2, 1));

        let again = generate_synthetic(&spec).unwrap();
        assert_eq!(corpus_to_jsonl(&corpus), corpus_to_jsonl(&again));
    }

    #[test]
    fn differing_seeds_differ() {
        let a = generate_synthetic(&tiny_spec()).unwrap();
        let mut spec = tiny_spec();
        spec.seed = 8;
        let b = generate_synthetic(&spec).unwrap();
        assert_ne!(corpus_to_jsonl(&a), corpus_to_jsonl(&b));
    }

    #[test]
    fn single_sentence_length_range() {
        let mut spec = tiny_spec();
        spec.length = LengthModel {
            sentences: (1, 1),
            long_tail: None,
        };
        // Include a four-label document: all clauses must fold into the one
        // sentence.
        spec.composition.push(CompositionEntry {
            labels: LabelSet::FULL,
            count: 1,
        });
        spec.total_documents = 4;
        let corpus = generate_synthetic(&spec).unwrap();
        for doc in corpus.iter() {
            assert_eq!(doc.text.matches('.').count(), 1, "doc {}: {}", doc.id, doc.text);
            assert!(doc.text.ends_with('.'));
        }
    }

    #[test]
    fn substring_search_recovers_gold_labels() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let bank = PhraseBank::reference();
        for doc in corpus.iter() {
            assert_eq!(recover_labels(&doc.text, &bank), doc.gold, "doc {}", doc.id);
        }
    }

    #[test]
    fn reference_distribution_is_exact() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let dist = label_distribution(&corpus);
        assert_eq!(dist.corpus_size, 500);
        assert_eq!(dist.total_label_instances, 675);
        assert_eq!(dist.per_label_counts, [294, 265, 22, 94]);
        assert_eq!(dist.cardinality_histogram, [103, 172, 176, 45, 4]);
        assert_eq!(dist.single_label_breakdown, [96, 62, 3, 11]);
        assert_eq!(dist.pair(Label::SI, Label::SA), 178);
    }

    #[test]
    fn reference_lengths_are_bimodal() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let long = corpus
            .iter()
            .filter(|d| d.text.matches('.').count() > 40)
            .count();
        // Expect about 13.8% of 500; allow generous binomial slack.
        assert!((40..=100).contains(&long), "long docs: {long}");
        let short = corpus
            .iter()
            .filter(|d| d.text.matches('.').count() <= 6)
            .count();
        assert_eq!(short + long, 500);
    }

    #[test]
    fn composition_mismatch_is_rejected() {
        let mut spec = tiny_spec();
        spec.total_documents = 5;
        assert!(matches!(
            generate_synthetic(&spec).unwrap_err(),
            SynthError::CompositionMismatch {
                requested: 5,
                actual: 3
            }
        ));
    }

    #[test]
    fn duplicate_label_set_is_rejected() {
        let mut spec = tiny_spec();
        spec.composition.push(CompositionEntry {
            labels: LabelSet::from_labels(&[Label::SI]),
            count: 1,
        });
        spec.total_documents = 4;
        assert!(matches!(
            generate_synthetic(&spec).unwrap_err(),
            SynthError::DuplicateComposition(_)
        ));
    }

    #[test]
    fn phrase_with_period_is_rejected() {
        let mut spec = tiny_spec();
        spec.phrases.si.push("bad. phrase".to_string());
        assert!(matches!(
            generate_synthetic(&spec).unwrap_err(),
            SynthError::BadPhrase(_)
        ));
    }

    #[test]
    fn cross_label_substring_is_rejected() {
        let mut spec = tiny_spec();
        // "suicide" occurs inside rendered SA sentences.
        spec.phrases.es = vec!["suicide".to_string()];
        assert!(matches!(
            generate_synthetic(&spec).unwrap_err(),
            SynthError::PhraseCollision { .. }
        ));
    }

    #[test]
    fn empty_pool_is_rejected() {
        let mut spec = tiny_spec();
        spec.phrases.nssi.clear();
        assert!(matches!(
            generate_synthetic(&spec).unwrap_err(),
            SynthError::EmptyPool(Label::NSSI)
        ));
    }

    fn arb_composition() -> impl Strategy<Value = Vec<CompositionEntry>> {
        // Up to one entry per label set, counts 0..8.
        proptest::collection::vec(0usize..8, 16).prop_map(|counts| {
            counts
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c > 0)
                .map(|(mask, count)| CompositionEntry {
                    labels: LabelSet::from_flags([
                        mask & 1 != 0,
                        mask & 2 != 0,
                        mask & 4 != 0,
                        mask & 8 != 0,
                    ]),
                    count,
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn generated_corpora_satisfy_distribution_invariants(
            composition in arb_composition(),
            seed in 0u64..1000,
            lo in 1usize..4,
            extra in 0usize..4,
        ) {
            let total = composition.iter().map(|e| e.count).sum();
            let spec = SyntheticSpec {
                seed,
                total_documents: total,
                composition,
                length: LengthModel { sentences: (lo, lo + extra), long_tail: None },
                phrases: PhraseBank::reference(),
            };
            let corpus = generate_synthetic(&spec).unwrap();
            prop_assert_eq!(corpus.len(), total);
            let dist = label_distribution(&corpus);
            prop_assert_eq!(
                dist.total_label_instances,
                dist.per_label_counts.iter().sum::<usize>()
            );
            prop_assert_eq!(dist.cardinality_histogram.iter().sum::<usize>(), total);
            prop_assert_eq!(
                dist.single_label_breakdown.iter().sum::<usize>(),
                dist.cardinality_histogram[1]
            );
            for entry in &spec.composition {
                let got = corpus.iter().filter(|d| d.gold == entry.labels).count();
                prop_assert_eq!(got, entry.count);
            }
            for doc in corpus.iter() {
                prop_assert_eq!(recover_labels(&doc.text, &spec.phrases), doc.gold);
            }
        }
    }
}
