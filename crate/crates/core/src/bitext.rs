//! Translation pairs as pseudo-labelled name records.
//!
//! Every pair becomes its own two-member class whose label is the uppercase
//! language pair followed by the 1-based pair index, e.g. the 2,344th
//! English-German pair is `ENDE2344`. When word dictionaries and title pairs
//! are combined, dictionary labels carry an extra `M` (`ENDEM17`) so the two
//! counters cannot collide.

use std::io::BufRead;

use crate::error::Result;
use crate::record::{normalize_name, LabelId, Lang, NameRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationPair {
    pub src_name: String,
    pub tgt_name: String,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
}

impl TranslationPair {
    /// Normalizes both sides; `None` if either is empty afterwards.
    pub fn new(src: &str, tgt: &str, src_lang: Lang, tgt_lang: Lang) -> Option<Self> {
        let (src_name, tgt_name) = (normalize_name(src), normalize_name(tgt));
        (!src_name.is_empty() && !tgt_name.is_empty()).then_some(TranslationPair {
            src_name,
            tgt_name,
            src_lang,
            tgt_lang,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedPairs {
    pub pairs: Vec<TranslationPair>,
    pub malformed: usize,
}

/// Word dictionaries: `source<whitespace>target`, exactly two tokens.
pub fn parse_word_translations<R: BufRead>(
    reader: R,
    src_lang: Lang,
    tgt_lang: Lang,
) -> Result<ParsedPairs> {
    parse_pairs(reader, |line| {
        let mut tokens = line.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(s), Some(t), None) => TranslationPair::new(s, t, src_lang, tgt_lang),
            _ => None,
        }
    })
}

/// Title pairs: `source title<TAB>target title`. Tab is the only separator, so
/// multi-word titles survive.
pub fn parse_title_pairs<R: BufRead>(
    reader: R,
    src_lang: Lang,
    tgt_lang: Lang,
) -> Result<ParsedPairs> {
    parse_pairs(reader, |line| {
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(t), None) => TranslationPair::new(s, t, src_lang, tgt_lang),
            _ => None,
        }
    })
}

fn parse_pairs<R: BufRead>(
    reader: R,
    parse: impl Fn(&str) -> Option<TranslationPair>,
) -> Result<ParsedPairs> {
    let mut out = ParsedPairs::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match parse(line) {
            Some(pair) => out.pairs.push(pair),
            None => out.malformed += 1,
        }
    }
    if out.malformed > 0 {
        log::warn!("bitext: skipped {} malformed lines", out.malformed);
    }
    Ok(out)
}

/// `ENDE2344` for `(en, de, 2344)`. No zero padding.
pub fn pseudo_label(src_lang: Lang, tgt_lang: Lang, index: usize) -> LabelId {
    tagged_pseudo_label(src_lang, tgt_lang, "", index)
}

/// Like [`pseudo_label`] with a source tag between the codes and the index.
pub fn tagged_pseudo_label(src_lang: Lang, tgt_lang: Lang, tag: &str, index: usize) -> LabelId {
    debug_assert!(index >= 1, "pseudo-label indices are 1-based");
    let label = format!(
        "{}{}{}{}",
        src_lang.to_uppercase(),
        tgt_lang.to_uppercase(),
        tag,
        index
    );
    LabelId::new(label).expect("pseudo-labels contain no separators")
}

/// Two records per pair sharing the pair's pseudo-label.
pub fn pairs_to_records(pairs: &[TranslationPair]) -> Vec<NameRecord> {
    tagged_pairs_to_records(pairs, "")
}

pub fn tagged_pairs_to_records(pairs: &[TranslationPair], tag: &str) -> Vec<NameRecord> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for (i, pair) in pairs.iter().enumerate() {
        let label = tagged_pseudo_label(pair.src_lang, pair.tgt_lang, tag, i + 1);
        out.push(NameRecord {
            name: pair.src_name.clone(),
            label: label.clone(),
            lang: pair.src_lang,
        });
        out.push(NameRecord {
            name: pair.tgt_name.clone(),
            label,
            lang: pair.tgt_lang,
        });
    }
    out
}

/// Title pairs and word pairs in one record list, dictionary labels tagged `M`.
pub fn combine_title_and_word_pairs(
    titles: &[TranslationPair],
    words: &[TranslationPair],
) -> Vec<NameRecord> {
    let mut records = pairs_to_records(titles);
    records.extend(tagged_pairs_to_records(words, "M"));
    records
}
