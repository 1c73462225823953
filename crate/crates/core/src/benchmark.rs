//! Test-set construction from hyperlinked mentions.
//!
//! The pipeline starts from pre-extracted `(lang, sentence, mention, title)`
//! occurrences:
//!
//! 1. [`link_mentions`] keeps occurrences whose title maps to a CUI.
//! 2. [`dedup_surface_forms`] keeps the first example of each mention string.
//! 3. [`filter_mention_equals_title`] drops mentions spelled like their page.
//! 4. [`sample_test_set`] draws a fixed-size sample.
//!
//! String comparisons are exact after NFC normalization; case is significant.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::seq::index;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::io::open_lines;
use crate::linker::EvalExample;
use crate::record::{LabelId, Lang};
use crate::rng::seeded_rng;

pub const DEFAULT_SAMPLE_SIZE: usize = 1000;

/// A hyperlink: `mention` in `sentence` points to the page `page_title`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MentionOccurrence {
    pub lang: Lang,
    pub sentence: String,
    pub mention: String,
    pub page_title: String,
}

impl MentionOccurrence {
    pub fn new(lang: Lang, sentence: &str, mention: &str, page_title: &str) -> Result<Self> {
        let mention = mention.trim();
        let page_title = page_title.trim();
        if mention.is_empty() || page_title.is_empty() {
            return Err(Error::InvalidRecord("empty mention or page title".into()));
        }
        Ok(MentionOccurrence {
            lang,
            sentence: sentence.to_string(),
            mention: mention.to_string(),
            page_title: page_title.to_string(),
        })
    }
}

/// Page title to CUI, per language. Titles listed without a language apply
/// to every language that has no entry of its own.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TitleCuiMap {
    per_lang: BTreeMap<Lang, HashMap<String, LabelId>>,
    any_lang: HashMap<String, LabelId>,
}

impl TitleCuiMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a title. A title already mapped to a different CUI in the same
    /// language is an error.
    pub fn insert(&mut self, lang: Option<Lang>, title: &str, cui: LabelId) -> Result<()> {
        let map = match lang {
            Some(l) => self.per_lang.entry(l).or_default(),
            None => &mut self.any_lang,
        };
        let key = nfc(title.trim());
        match map.get(&key) {
            Some(existing) if *existing != cui => Err(Error::InvalidRecord(format!(
                "title {key:?} maps to both {existing} and {cui}"
            ))),
            _ => {
                map.insert(key, cui);
                Ok(())
            }
        }
    }

    pub fn get(&self, lang: Lang, title: &str) -> Option<&LabelId> {
        let key = nfc(title);
        self.per_lang
            .get(&lang)
            .and_then(|m| m.get(&key))
            .or_else(|| self.any_lang.get(&key))
    }

    pub fn len(&self) -> usize {
        self.any_lang.len() + self.per_lang.values().map(HashMap::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An evaluation example that still remembers the page it was linked through.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkedExample {
    pub example: EvalExample,
    pub page_title: String,
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Keeps occurrences whose title is mapped, in input order. Also returns the
/// number of unmapped occurrences.
pub fn link_mentions(occurrences: &[MentionOccurrence], map: &TitleCuiMap) -> (Vec<LinkedExample>, usize) {
    let mut unmapped = 0;
    let mut out = Vec::new();
    for occ in occurrences {
        match map.get(occ.lang, &occ.page_title) {
            Some(cui) => out.push(LinkedExample {
                example: EvalExample {
                    sentence: occ.sentence.clone(),
                    mention: occ.mention.clone(),
                    gold_cui: cui.clone(),
                    lang: occ.lang,
                },
                page_title: occ.page_title.clone(),
            }),
            None => unmapped += 1,
        }
    }
    (out, unmapped)
}

/// First example of each NFC mention string per language wins.
pub fn dedup_surface_forms(examples: &[LinkedExample]) -> Vec<LinkedExample> {
    let mut seen = HashSet::new();
    examples
        .iter()
        .filter(|e| seen.insert((e.example.lang, nfc(&e.example.mention))))
        .cloned()
        .collect()
}

/// Drops examples whose mention equals the linked page title.
pub fn filter_mention_equals_title(examples: &[LinkedExample]) -> Vec<LinkedExample> {
    examples
        .iter()
        .filter(|e| nfc(&e.example.mention) != nfc(&e.page_title))
        .cloned()
        .collect()
}

/// Uniform sample of `n` examples without replacement, sorted by
/// `(mention, cui)`.
pub fn sample_test_set(examples: &[EvalExample], n: usize, seed: u64) -> Result<Vec<EvalExample>> {
    if examples.len() < n {
        return Err(Error::TooFewExamples {
            needed: n,
            available: examples.len(),
        });
    }
    let mut rng = seeded_rng(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, examples.len(), n).into_vec();
    picked.sort_unstable();
    let mut out: Vec<EvalExample> = picked.into_iter().map(|i| examples[i].clone()).collect();
    out.sort_by(|a, b| {
        (&a.mention, &a.gold_cui, &a.sentence).cmp(&(&b.mention, &b.gold_cui, &b.sentence))
    });
    Ok(out)
}

/// Per-language pipeline counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchmarkStats {
    /// Distinct sentences among linked occurrences.
    pub sentences: usize,
    /// Distinct page titles among linked occurrences.
    pub unique_titles: usize,
    /// Linked occurrences.
    pub mentions: usize,
    /// Examples left after surface-form dedup.
    pub unique_mentions: usize,
    /// Examples left after dedup and the mention=title filter.
    pub filtered: usize,
}

/// Everything the pipeline produced for one language.
#[derive(Debug, Clone, Default)]
pub struct LangBenchmark {
    pub stats: BenchmarkStats,
    pub unmapped: usize,
    /// Candidates for sampling: deduplicated and filtered.
    pub examples: Vec<EvalExample>,
}

/// Runs link, dedup and filter for every language present in the input.
pub fn build_benchmark(occurrences: &[MentionOccurrence], map: &TitleCuiMap) -> BTreeMap<Lang, LangBenchmark> {
    let mut by_lang: BTreeMap<Lang, Vec<MentionOccurrence>> = BTreeMap::new();
    for occ in occurrences {
        by_lang.entry(occ.lang).or_default().push(occ.clone());
    }
    by_lang
        .into_iter()
        .map(|(lang, occs)| {
            let (linked, unmapped) = link_mentions(&occs, map);
            let unique = dedup_surface_forms(&linked);
            let filtered = filter_mention_equals_title(&unique);
            let stats = BenchmarkStats {
                sentences: linked.iter().map(|e| &e.example.sentence).collect::<HashSet<_>>().len(),
                unique_titles: linked.iter().map(|e| nfc(&e.page_title)).collect::<HashSet<_>>().len(),
                mentions: linked.len(),
                unique_mentions: unique.len(),
                filtered: filtered.len(),
            };
            let examples = filtered.into_iter().map(|e| e.example).collect();
            (
                lang,
                LangBenchmark {
                    stats,
                    unmapped,
                    examples,
                },
            )
        })
        .collect()
}

/// Counts for every language; languages without occurrences are absent.
pub fn stats(occurrences: &[MentionOccurrence], map: &TitleCuiMap) -> BTreeMap<Lang, BenchmarkStats> {
    build_benchmark(occurrences, map)
        .into_iter()
        .map(|(lang, b)| (lang, b.stats))
        .collect()
}

/// One row per statistic, one column per language.
pub fn stats_to_tsv(stats: &BTreeMap<Lang, BenchmarkStats>) -> String {
    let mut out = String::from("stat");
    for lang in stats.keys() {
        let _ = write!(out, "\t{lang}");
    }
    out.push('\n');
    let rows: [(&str, fn(&BenchmarkStats) -> usize); 5] = [
        ("sentences", |s| s.sentences),
        ("unique_titles", |s| s.unique_titles),
        ("mentions", |s| s.mentions),
        ("unique_mentions", |s| s.unique_mentions),
        ("unique_mentions_mention_ne_title", |s| s.filtered),
    ];
    for (name, get) in rows {
        out.push_str(name);
        for s in stats.values() {
            let _ = write!(out, "\t{}", get(s));
        }
        out.push('\n');
    }
    out
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses `lang<TAB>sentence<TAB>mention<TAB>page_title` lines.
pub fn read_occurrences(path: &Path) -> Result<Vec<MentionOccurrence>> {
    let mut out = Vec::new();
    for (i, line) in open_lines(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [lang, sentence, mention, title] = fields[..] else {
            return Err(parse_error(
                path,
                i + 1,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        };
        let lang = Lang::new(lang.trim()).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        out.push(
            MentionOccurrence::new(lang, sentence, mention, title)
                .map_err(|e| parse_error(path, i + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

/// Parses `title<TAB>cui` or `title<TAB>cui<TAB>lang` lines.
pub fn read_title_map(path: &Path) -> Result<TitleCuiMap> {
    let mut map = TitleCuiMap::new();
    for (i, line) in open_lines(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |e: Error| parse_error(path, i + 1, e.to_string());
        let fields: Vec<&str> = line.split('\t').collect();
        let (title, cui, lang) = match fields[..] {
            [t, c] => (t, c, None),
            [t, c, l] => (t, c, Some(Lang::new(l.trim()).map_err(err)?)),
            _ => {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                ))
            }
        };
        if title.trim().is_empty() {
            return Err(parse_error(path, i + 1, "empty title"));
        }
        let cui = LabelId::new(cui.trim()).map_err(err)?;
        map.insert(lang, title, cui).map_err(err)?;
    }
    Ok(map)
}
