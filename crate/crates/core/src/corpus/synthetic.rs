use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{tokenize, Document, TaskId, NUM_CLASSES};
use crate::util::rng_for;
use crate::{Error, Result};

/// Phrase inventory that decides one task's label.
///
/// A negated finding yields label 0, an affirmed finding label 1, and an
/// affirmed finding preceded by a worsening marker label 2. Findings are
/// drawn with Zipfian weights by list position, so later entries are rare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLexicon {
    pub findings: Vec<String>,
    pub modifiers: Vec<String>,
    /// Each template holds a single `{}` marking where the finding goes.
    pub negation_templates: Vec<String>,
    pub worsening_markers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_documents: usize,
    pub trigger_lexicon: BTreeMap<TaskId, TaskLexicon>,
    pub background_vocab_size: usize,
    pub doc_length_range: (usize, usize),
    pub seed: u64,
    /// Relative label frequencies per task.
    pub label_distribution: BTreeMap<TaskId, [f64; NUM_CLASSES]>,
    pub finding_zipf_exponent: f64,
    pub background_zipf_exponent: f64,
    /// Probability that a background sentence carries a `date` or `name` placeholder.
    pub placeholder_rate: f64,
    pub modifier_rate: f64,
    /// Probability that a negated finding also carries a worsening marker ("no new ...").
    pub negated_marker_rate: f64,
    pub id_prefix: String,
    /// Unlabeled corpora (for embedding training) carry no labels.
    pub labeled: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let counts: [(u8, [f64; 3]); 5] = [
            (1, [58.0, 940.0, 402.0]),
            (2, [653.0, 546.0, 201.0]),
            (3, [751.0, 443.0, 206.0]),
            (4, [1113.0, 173.0, 114.0]),
            (5, [1078.0, 172.0, 150.0]),
        ];
        SyntheticSpec {
            num_documents: 1400,
            trigger_lexicon: default_lexicon(),
            background_vocab_size: 600,
            doc_length_range: (50, 150),
            seed: 0,
            label_distribution: counts
                .into_iter()
                .map(|(t, c)| (TaskId::new(t).unwrap(), c))
                .collect(),
            finding_zipf_exponent: 1.0,
            background_zipf_exponent: 1.0,
            placeholder_rate: 0.08,
            modifier_rate: 0.5,
            negated_marker_rate: 0.25,
            id_prefix: "doc".into(),
            labeled: true,
        }
    }
}

/// Generated documents plus the per-task label histogram.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub label_counts: BTreeMap<TaskId, [usize; NUM_CLASSES]>,
}

fn words(s: &[&str]) -> Vec<String> {
    s.iter().map(|w| w.to_string()).collect()
}

/// Head-CT style lexicon for the five tasks.
pub fn default_lexicon() -> BTreeMap<TaskId, TaskLexicon> {
    let negations = words(&[
        "no {}",
        "no evidence of {}",
        "negative for {}",
        "without {}",
        "{} is not seen",
        "no definite {}",
    ]);
    let markers = words(&["new", "increased", "worsening", "enlarging", "progressive"]);
    let modifiers = words(&["acute", "small", "large", "mild", "moderate", "subtle"]);
    let findings: [(u8, &[&str]); 5] = [
        (
            1,
            &[
                "intracranial abnormality",
                "abnormal study",
                "intracranial process",
                "structural abnormality",
                "significant abnormality",
                "parenchymal abnormality",
                "cerebral abnormality",
                "intracranial pathology",
                "abnormal attenuation",
                "encephalomalacia",
            ],
        ),
        (
            2,
            &[
                "intraparenchymal hemorrhage",
                "subdural hematoma",
                "subarachnoid hemorrhage",
                "intracranial hemorrhage",
                "epidural hematoma",
                "intraventricular hemorrhage",
                "hemorrhagic contusion",
                "parenchymal hematoma",
                "petechial hemorrhage",
                "extraaxial hematoma",
                "microhemorrhage",
                "hemoventricle",
            ],
        ),
        (
            3,
            &[
                "sulcal effacement",
                "midline shift",
                "mass effect",
                "subfalcine herniation",
                "uncal herniation",
                "cisternal effacement",
                "tonsillar herniation",
                "transtentorial herniation",
                "ventricular compression",
                "sulcal crowding",
            ],
        ),
        (
            4,
            &[
                "ischemic infarct",
                "cytotoxic edema",
                "territorial infarction",
                "ischemic stroke",
                "lacunar infarct",
                "embolic infarct",
                "watershed infarct",
                "cortical ischemia",
                "hyperdense vessel",
                "insular ribboning",
            ],
        ),
        (
            5,
            &[
                "hydrocephalus",
                "ventriculomegaly",
                "ventricular enlargement",
                "obstructive hydrocephalus",
                "communicating hydrocephalus",
                "transependymal flow",
                "temporal horn dilatation",
                "ventricular dilatation",
                "entrapped ventricle",
                "ventricular ballooning",
            ],
        ),
    ];
    findings
        .into_iter()
        .map(|(t, f)| {
            (
                TaskId::new(t).unwrap(),
                TaskLexicon {
                    findings: words(f),
                    modifiers: modifiers.clone(),
                    negation_templates: negations.clone(),
                    worsening_markers: markers.clone(),
                },
            )
        })
        .collect()
}

const BACKGROUND_WORDS: &[&str] = &[
    "the", "of", "and", "is", "are", "there", "in", "with", "to", "a", "for", "on", "at", "as",
    "be", "this", "from", "by", "which", "may", "again", "also", "within", "at", "since", "prior",
    "study", "exam", "examination", "comparison", "date", "name", "findings", "impression",
    "technique", "contrast", "axial", "images", "obtained", "through", "head", "brain", "ct",
    "noncontrast", "ventricles", "sulci", "normal", "size", "configuration", "gray", "white",
    "matter", "differentiation", "preserved", "basal", "cisterns", "patent", "calvarium", "intact",
    "fracture", "skull", "base", "mastoid", "air", "cells", "clear", "paranasal", "sinuses",
    "orbits", "unremarkable", "soft", "tissues", "scalp", "periventricular", "hypodensity",
    "likely", "represents", "chronic", "microvascular", "ischemic", "changes", "volume", "loss",
    "age", "appropriate", "atherosclerotic", "calcifications", "carotid", "siphons", "vertebral",
    "arteries", "posterior", "fossa", "cerebellum", "brainstem", "pons", "medulla", "thalamus",
    "frontal", "parietal", "temporal", "occipital", "lobe", "left", "right", "bilateral",
    "hemisphere", "cortex", "region", "measuring", "approximately", "3mm", "5mm", "1cm", "2cm",
    "slightly", "stable", "compared", "previous", "clinical", "history", "altered", "mental",
    "status", "patient", "evaluate", "fall", "trauma", "headache", "confusion", "dictated",
    "reviewed", "attending", "radiologist", "report", "signed", "correlation", "recommended",
    "follow", "up", "mri", "could", "further", "characterize", "artifact", "motion", "limits",
    "evaluation", "demonstrates", "appears", "visualized", "portions", "globes", "lenses",
    "nasopharynx", "craniocervical", "junction", "sella", "pineal", "calcification",
    "choroid", "plexus", "falx", "dural", "attenuation", "density", "focus", "area", "overall",
];

/// Background vocabulary: realistic filler words not used by any lexicon,
/// padded with numbered terms up to `size` entries.
fn background_vocabulary(lexicon: &BTreeMap<TaskId, TaskLexicon>, size: usize) -> Vec<String> {
    let reserved = reserved_words(lexicon);
    let mut seen = HashSet::new();
    let mut out: Vec<String> = BACKGROUND_WORDS
        .iter()
        .map(|w| w.to_string())
        .filter(|w| !reserved.contains(w) && seen.insert(w.clone()))
        .take(size)
        .collect();
    let mut i = 0;
    while out.len() < size {
        let w = format!("term{i:04}");
        if !reserved.contains(&w) {
            out.push(w);
        }
        i += 1;
    }
    out
}

fn reserved_words(lexicon: &BTreeMap<TaskId, TaskLexicon>) -> HashSet<String> {
    let mut reserved = HashSet::new();
    for lex in lexicon.values() {
        let all = lex
            .findings
            .iter()
            .chain(&lex.modifiers)
            .chain(&lex.worsening_markers)
            .chain(&lex.negation_templates);
        for phrase in all {
            for w in tokenize(&phrase.replace("{}", " ")) {
                reserved.insert(w);
            }
        }
    }
    // Function words inside templates stay usable as background; the
    // distinctive cue words are what make a template recognisable.
    for w in ["of", "for", "is"] {
        reserved.remove(w);
    }
    reserved
}

struct Template {
    prefix: Vec<String>,
    suffix: Vec<String>,
}

struct CompiledLexicon {
    findings: Vec<Vec<String>>,
    finding_weights: WeightedIndex<f64>,
    modifiers: Vec<String>,
    templates: Vec<Template>,
    markers: Vec<String>,
}

impl CompiledLexicon {
    fn new(lex: &TaskLexicon, zipf: f64) -> Result<Self> {
        if lex.findings.is_empty() {
            return Err(Error::InvalidArgument("lexicon needs at least one finding".into()));
        }
        if lex.negation_templates.is_empty() || lex.worsening_markers.is_empty() {
            return Err(Error::InvalidArgument(
                "lexicon needs negation templates and worsening markers".into(),
            ));
        }
        let templates = lex
            .negation_templates
            .iter()
            .map(|t| {
                let (pre, post) = t.split_once("{}").ok_or_else(|| {
                    Error::InvalidArgument(format!("negation template {t:?} lacks a {{}} slot"))
                })?;
                Ok(Template {
                    prefix: tokenize(pre),
                    suffix: tokenize(post),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if templates.iter().any(|t| t.prefix.is_empty() && t.suffix.is_empty()) {
            return Err(Error::InvalidArgument("negation template has no cue words".into()));
        }
        let weights: Vec<f64> = (0..lex.findings.len())
            .map(|r| 1.0 / ((r + 1) as f64).powf(zipf))
            .collect();
        Ok(CompiledLexicon {
            findings: lex.findings.iter().map(|f| tokenize(f)).collect(),
            finding_weights: WeightedIndex::new(weights).expect("positive weights"),
            modifiers: lex.modifiers.clone(),
            templates,
            markers: lex.worsening_markers.clone(),
        })
    }

    fn max_phrase_len(&self) -> usize {
        let finding = self.findings.iter().map(Vec::len).max().unwrap_or(0);
        let template = self
            .templates
            .iter()
            .map(|t| t.prefix.len() + t.suffix.len())
            .max()
            .unwrap_or(0);
        finding + template + 2
    }

    fn phrase(&self, label: usize, modifier_rate: f64, negated_marker_rate: f64, rng: &mut impl Rng) -> Vec<String> {
        let finding = &self.findings[self.finding_weights.sample(rng)];
        let mut core = Vec::new();
        let marker = match label {
            0 => rng.gen_bool(negated_marker_rate),
            1 => false,
            _ => true,
        };
        if marker {
            core.push(self.markers.choose(rng).unwrap().clone());
        }
        if !self.modifiers.is_empty() && rng.gen_bool(modifier_rate) {
            core.push(self.modifiers.choose(rng).unwrap().clone());
        }
        core.extend(finding.iter().cloned());
        if label == 0 {
            let t = self.templates.choose(rng).unwrap();
            let mut out = t.prefix.clone();
            out.extend(core);
            out.extend(t.suffix.iter().cloned());
            out
        } else {
            core
        }
    }

    fn locate(&self, tokens: &[String]) -> Option<PhraseMatch> {
        let (core_start, core_end) = (0..tokens.len()).find_map(|i| {
            self.findings
                .iter()
                .filter(|f| tokens[i..].starts_with(f))
                .map(|f| f.len())
                .max()
                .map(|len| (i, i + len))
        })?;
        let mut start = core_start;
        while start > 0 && self.modifiers.contains(&tokens[start - 1]) {
            start -= 1;
        }
        let worsening = start > 0 && self.markers.contains(&tokens[start - 1]);
        if worsening {
            start -= 1;
        }
        let mut end = core_end;
        let mut negated = false;
        for t in &self.templates {
            let pre_ok = t.prefix.len() <= start && tokens[..start].ends_with(&t.prefix);
            let post_ok = tokens[core_end..].starts_with(&t.suffix);
            if pre_ok && post_ok {
                negated = true;
                start -= t.prefix.len();
                end = core_end + t.suffix.len();
                break;
            }
        }
        Some(PhraseMatch {
            start,
            end,
            core_start,
            core_end,
            negated,
            worsening,
        })
    }
}

/// Where a task's label-determining phrase sits in a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseMatch {
    /// First token of the whole phrase, including any negation cue.
    pub start: usize,
    /// One past the last token of the whole phrase.
    pub end: usize,
    pub core_start: usize,
    pub core_end: usize,
    pub negated: bool,
    pub worsening: bool,
}

impl PhraseMatch {
    pub fn label(&self) -> u8 {
        match (self.negated, self.worsening) {
            (true, _) => 0,
            (false, false) => 1,
            (false, true) => 2,
        }
    }
}

/// Finds the first occurrence of a `lexicon` finding in `tokens` and its context.
pub fn locate_phrase(tokens: &[String], lexicon: &TaskLexicon) -> Result<Option<PhraseMatch>> {
    Ok(CompiledLexicon::new(lexicon, 1.0)?.locate(tokens))
}

/// Recomputes every task's label from the token sequence alone.
pub fn relabel(tokens: &[String], lexicon: &BTreeMap<TaskId, TaskLexicon>) -> Result<BTreeMap<TaskId, u8>> {
    let mut out = BTreeMap::new();
    for (&task, lex) in lexicon {
        if let Some(m) = locate_phrase(tokens, lex)? {
            out.insert(task, m.label());
        }
    }
    Ok(out)
}

fn zipf_index(n: usize, exponent: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / ((r + 1) as f64).powf(exponent))).expect("non-empty")
}

/// Generates `spec.num_documents` synthetic reports.
///
/// Each document is drawn from its own random stream `(seed, index)`, so a
/// corpus of N documents is a prefix of any larger corpus with the same seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    let (min_len, max_len) = spec.doc_length_range;
    if min_len > max_len {
        return Err(Error::InvalidArgument(format!(
            "doc_length_range ({min_len}, {max_len}) is empty"
        )));
    }
    if spec.background_vocab_size == 0 {
        return Err(Error::InvalidArgument("background_vocab_size must be >= 1".into()));
    }
    let compiled: Vec<(TaskId, CompiledLexicon, WeightedIndex<f64>)> = spec
        .trigger_lexicon
        .iter()
        .map(|(&task, lex)| {
            let dist = spec.label_distribution.get(&task).copied().unwrap_or([1.0; 3]);
            let labels = WeightedIndex::new(dist).map_err(|_| {
                Error::InvalidArgument(format!("{task} label distribution must be positive"))
            })?;
            Ok((task, CompiledLexicon::new(lex, spec.finding_zipf_exponent)?, labels))
        })
        .collect::<Result<_>>()?;
    let needed: usize = compiled.iter().map(|(_, c, _)| c.max_phrase_len()).sum::<usize>() + compiled.len();
    if min_len < needed {
        return Err(Error::InvalidArgument(format!(
            "doc_length_range minimum {min_len} cannot fit the trigger phrases; need at least {needed}"
        )));
    }
    let background = background_vocabulary(&spec.trigger_lexicon, spec.background_vocab_size);
    let background_dist = zipf_index(background.len(), spec.background_zipf_exponent);

    let mut documents = Vec::with_capacity(spec.num_documents);
    let mut label_counts: BTreeMap<TaskId, [usize; NUM_CLASSES]> = BTreeMap::new();
    for i in 0..spec.num_documents {
        let mut rng = rng_for(spec.seed, i as u64);
        let mut labels = BTreeMap::new();
        let mut phrases = Vec::new();
        for (task, lex, label_dist) in &compiled {
            let label = label_dist.sample(&mut rng);
            labels.insert(*task, label as u8);
            phrases.push(lex.phrase(label, spec.modifier_rate, spec.negated_marker_rate, &mut rng));
        }
        let phrase_len: usize = phrases.iter().map(Vec::len).sum();
        let total = rng.gen_range(min_len..=max_len);
        let bg = background_tokens(total - phrase_len, &background, &background_dist, spec.placeholder_rate, &mut rng);

        phrases.shuffle(&mut rng);
        let mut gaps: Vec<usize> = (0..=bg.len()).collect();
        gaps.shuffle(&mut rng);
        let mut slots: Vec<(usize, Vec<String>)> = gaps.into_iter().zip(phrases).collect();
        slots.sort_by_key(|(g, _)| *g);
        let mut tokens = Vec::with_capacity(total);
        let mut slot_iter = slots.into_iter().peekable();
        for pos in 0..=bg.len() {
            while let Some((_, phrase)) = slot_iter.next_if(|(g, _)| *g == pos) {
                tokens.extend(phrase);
            }
            if pos < bg.len() {
                tokens.push(bg[pos].clone());
            }
        }

        let raw_text = render(&tokens);
        let doc_labels = if spec.labeled { labels.clone() } else { BTreeMap::new() };
        let doc = Document::new(format!("{}{i:06}", spec.id_prefix), raw_text, doc_labels)?;
        debug_assert_eq!(doc.tokens, tokens);
        for (t, l) in &labels {
            label_counts.entry(*t).or_insert([0; NUM_CLASSES])[*l as usize] += 1;
        }
        documents.push(doc);
    }
    Ok(SyntheticCorpus {
        documents,
        label_counts,
    })
}

fn background_tokens(
    len: usize,
    vocab: &[String],
    dist: &WeightedIndex<f64>,
    placeholder_rate: f64,
    rng: &mut impl Rng,
) -> Vec<String> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let sentence = rng.gen_range(4..=12).min(len - out.len());
        let start = out.len();
        for _ in 0..sentence.saturating_sub(1) {
            out.push(vocab[dist.sample(rng)].clone());
        }
        out.push(".".to_string());
        if sentence > 1 && rng.gen_bool(placeholder_rate) {
            let at = rng.gen_range(start..out.len() - 1);
            out[at] = if rng.gen_bool(0.5) { "date" } else { "name" }.to_string();
        }
    }
    out
}

/// Human-readable text whose tokenization gives back `tokens`.
fn render(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut sentence_start = true;
    for tok in tokens {
        let is_period = tok == ".";
        if !out.is_empty() && !is_period {
            out.push(' ');
        }
        if sentence_start && !is_period {
            let mut chars = tok.chars();
            if let Some(c) = chars.next() {
                out.extend(c.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push_str(tok);
        }
        sentence_start = is_period;
    }
    out
}
