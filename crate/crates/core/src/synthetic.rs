//! Synthetic multilingual ontologies for end-to-end experiments.
//!
//! Each concept has a random syllable stem. Its English synonyms combine the
//! stem with modifier words drawn from a small shared pool, so surface
//! overlap alone is a poor guide: many unrelated concepts share modifiers.
//! Each pseudo-language rewrites English text with a fixed partial letter
//! substitution and a word suffix. Its synonyms are rewrites of the first
//! English synonyms; the last one of each language is held out as the test
//! query.
//!
//! Translation pairs cover the vocabulary names are built from: every
//! modifier and a sample of stems, each paired with its rewrite in one
//! language. No held-out query appears among them.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bitext::TranslationPair;
use crate::linker::EvalExample;
use crate::record::{LabelId, Lang, NameRecord};
use crate::rng::{seeded_rng, SeededRng};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub concepts: usize,
    pub en_synonyms: usize,
    pub languages: usize,
    /// Per language and concept; the last one is the test query.
    pub foreign_synonyms: usize,
    pub modifiers: usize,
    pub stem_syllables: usize,
    pub bitext_pairs: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            concepts: 500,
            en_synonyms: 3,
            languages: 3,
            foreign_synonyms: 2,
            modifiers: 6,
            stem_syllables: 3,
            bitext_pairs: 1000,
        }
    }
}

/// A pseudo-language: letter substitutions plus a suffix on every word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub lang: Lang,
    pub substitutions: BTreeMap<char, char>,
    pub suffix: String,
}

impl Rewrite {
    pub fn apply(&self, text: &str) -> String {
        text.split(' ')
            .map(|word| {
                let mut w: String = word
                    .chars()
                    .map(|c| *self.substitutions.get(&c).unwrap_or(&c))
                    .collect();
                w.push_str(&self.suffix);
                w
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub languages: Vec<Rewrite>,
    /// Every English synonym.
    pub en_synonyms: Vec<NameRecord>,
    /// Foreign synonyms that are not held out.
    pub foreign_synonyms: Vec<NameRecord>,
    /// English and non-held-out foreign synonyms; the candidate index.
    pub ontology: Vec<NameRecord>,
    /// One held-out query per concept and language.
    pub test_sets: BTreeMap<Lang, Vec<EvalExample>>,
    /// English to foreign word pairs.
    pub bitext: Vec<TranslationPair>,
}

impl SyntheticCorpus {
    /// English synonyms plus the non-held-out foreign synonyms.
    pub fn all_synonyms(&self) -> Vec<NameRecord> {
        let mut all = self.en_synonyms.clone();
        all.extend(self.foreign_synonyms.iter().cloned());
        all
    }
}

fn syllable(rng: &mut SeededRng) -> String {
    let c = CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char;
    let v = VOWELS[rng.gen_range(0..VOWELS.len())] as char;
    format!("{c}{v}")
}

fn word(rng: &mut SeededRng, syllables: usize) -> String {
    (0..syllables).map(|_| syllable(rng)).collect()
}

/// Draws a word of `syllables` syllables not yet in `used`.
fn fresh_word(rng: &mut SeededRng, syllables: usize, used: &mut HashSet<String>) -> String {
    loop {
        let w = word(rng, syllables);
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn pseudo_lang(i: usize) -> Lang {
    let code = [b'q', b'a' + i as u8];
    Lang::new(std::str::from_utf8(&code).expect("ascii")).expect("valid code")
}

fn make_rewrite(rng: &mut SeededRng, i: usize) -> Rewrite {
    // Half of the consonants and two vowels change; the rest are shared with
    // English, so some n-grams survive the rewrite.
    let mut consonants: Vec<char> = CONSONANTS.iter().map(|&b| b as char).collect();
    consonants.shuffle(rng);
    let moved = &consonants[..consonants.len() / 2];
    let mut targets = moved.to_vec();
    targets.rotate_left(1 + i % (moved.len() - 1));
    let mut substitutions: BTreeMap<char, char> = moved.iter().copied().zip(targets).collect();
    let mut vowels: Vec<char> = VOWELS.iter().map(|&b| b as char).collect();
    vowels.shuffle(rng);
    substitutions.insert(vowels[0], vowels[1]);
    substitutions.insert(vowels[1], vowels[0]);
    let suffixes = ["en", "ak", "ul", "is", "oz", "et"];
    Rewrite {
        lang: pseudo_lang(i),
        substitutions,
        suffix: suffixes[i % suffixes.len()].to_string(),
    }
}

/// English synonym `k` of a concept: the stem with one or two modifiers.
fn english_synonym(rng: &mut SeededRng, stem: &str, modifiers: &[String], k: usize) -> String {
    let m = |rng: &mut SeededRng| modifiers[rng.gen_range(0..modifiers.len())].clone();
    match k % 3 {
        0 => format!("{stem} {}", m(rng)),
        1 => format!("{} {stem}", m(rng)),
        _ => format!("{} {stem} {}", m(rng), m(rng)),
    }
}

pub fn generate(config: &SyntheticConfig, seed: u64) -> SyntheticCorpus {
    assert!(config.foreign_synonyms >= 1 && config.languages >= 1 && config.en_synonyms >= 1);
    assert!(config.languages <= 25);
    let mut rng = seeded_rng(seed);
    let mut used = HashSet::new();
    let modifiers: Vec<String> = (0..config.modifiers).map(|_| fresh_word(&mut rng, 2, &mut used)).collect();
    let languages: Vec<Rewrite> = (0..config.languages).map(|i| make_rewrite(&mut rng, i)).collect();

    let mut stems = Vec::with_capacity(config.concepts);
    let mut en_synonyms = Vec::new();
    let mut foreign_synonyms = Vec::new();
    let mut test_sets: BTreeMap<Lang, Vec<EvalExample>> =
        languages.iter().map(|l| (l.lang, Vec::new())).collect();
    for c in 0..config.concepts {
        let label = LabelId::new(format!("C{:07}", c + 1)).expect("valid label");
        let stem = fresh_word(&mut rng, config.stem_syllables, &mut used);
        stems.push(stem.clone());
        let english: Vec<String> = (0..config.en_synonyms.max(config.foreign_synonyms))
            .map(|k| english_synonym(&mut rng, &stem, &modifiers, k))
            .collect();
        for name in &english[..config.en_synonyms] {
            en_synonyms.push(NameRecord::new(name, label.clone(), Lang::EN).expect("non-empty"));
        }
        for lang in &languages {
            for (k, source) in english[..config.foreign_synonyms].iter().enumerate() {
                let name = lang.apply(source);
                if k + 1 == config.foreign_synonyms {
                    test_sets.get_mut(&lang.lang).expect("language").push(EvalExample {
                        sentence: String::new(),
                        mention: name,
                        gold_cui: label.clone(),
                        lang: lang.lang,
                    });
                } else {
                    foreign_synonyms.push(NameRecord::new(&name, label.clone(), lang.lang).expect("non-empty"));
                }
            }
        }
    }

    // Every modifier in every language, then distinct (stem, language)
    // combinations, then fresh words if the stems run out. No pair repeats.
    let mut bitext = Vec::with_capacity(config.bitext_pairs);
    let push = |src: &str, lang: &Rewrite, out: &mut Vec<TranslationPair>| {
        if out.len() < config.bitext_pairs {
            out.push(TranslationPair::new(src, &lang.apply(src), Lang::EN, lang.lang).expect("non-empty"));
        }
    };
    for lang in &languages {
        for m in &modifiers {
            push(m, lang, &mut bitext);
        }
    }
    let combos = stems.len() * languages.len();
    let wanted = config.bitext_pairs.saturating_sub(bitext.len()).min(combos);
    for i in rand::seq::index::sample(&mut rng, combos, wanted) {
        push(&stems[i / languages.len()], &languages[i % languages.len()], &mut bitext);
    }
    while bitext.len() < config.bitext_pairs {
        let lang = &languages[bitext.len() % languages.len()];
        let syllables = rng.gen_range(2..=config.stem_syllables.max(2));
        let w = fresh_word(&mut rng, syllables, &mut used);
        push(&w, lang, &mut bitext);
    }

    let mut ontology = en_synonyms.clone();
    ontology.extend(foreign_synonyms.iter().cloned());
    SyntheticCorpus {
        languages,
        en_synonyms,
        foreign_synonyms,
        ontology,
        test_sets,
        bitext,
    }
}
