//! Entity linking by exhaustive nearest-neighbour search, and Precision@k.
//!
//! Every ontology name is encoded once into a [`CandidateIndex`]. A query is
//! encoded the same way and scored against every row; candidates are ordered
//! by similarity, ties going to the lower index. A query counts as a hit at
//! `k` when its gold CUI is among the first `k` *distinct* CUIs of that
//! ranking, so one concept's synonyms cannot crowd the others out of the top 5.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::io::open_lines;
use crate::linalg::{dot, Matrix};
use crate::record::{normalize_name, LabelId, Lang, NameRecord};

#[derive(Debug, Clone)]
pub struct CandidateIndex {
    pub names: Vec<String>,
    pub cuis: Vec<LabelId>,
    pub embeddings: Matrix,
}

impl CandidateIndex {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn distinct_cuis(&self) -> usize {
        self.cuis.iter().collect::<HashSet<_>>().len()
    }
}

/// Encodes the ontology in input order. Duplicate names are kept.
pub fn build_index(params: &EncoderParams, ontology: &[NameRecord]) -> Result<CandidateIndex> {
    if ontology.is_empty() {
        return Err(Error::EmptyOntology);
    }
    let names: Vec<String> = ontology.iter().map(|r| r.name.clone()).collect();
    let embeddings = params.encode_batch(&names);
    Ok(CandidateIndex {
        names,
        cuis: ontology.iter().map(|r| r.label.clone()).collect(),
        embeddings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub name: String,
    pub cui: LabelId,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub query: String,
    /// The top `k` names.
    pub hits: Vec<Hit>,
    /// The first `k` distinct CUIs in rank order.
    pub predicted_cuis: Vec<LabelId>,
}

/// Exact top-`k` ranking of the index against an embedded query.
/// `k` larger than the index is clamped.
pub fn rank_embedding(index: &CandidateIndex, query: &str, embedding: &[f64], k: usize) -> RankedResult {
    assert!(k >= 1, "k must be at least 1");
    let m = index.len();
    let k = k.min(m);
    let scores: Vec<f64> = index.embeddings.iter_rows().map(|row| dot(row, embedding)).collect();
    let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));

    let mut ids: Vec<usize> = (0..m).collect();
    // Partial selection first; fall back to a full sort when the window holds
    // fewer than k distinct CUIs.
    let mut window = (k * 16).max(64).min(m);
    let ranked = loop {
        let mut head = ids.clone();
        if window < m {
            head.select_nth_unstable_by(window - 1, order);
            head.truncate(window);
        }
        head.sort_unstable_by(order);
        let distinct = head
            .iter()
            .map(|&i| &index.cuis[i])
            .collect::<HashSet<_>>()
            .len();
        if distinct >= k || window == m {
            break head;
        }
        window = (window * 4).min(m);
        ids = (0..m).collect();
    };

    let hits = ranked[..k]
        .iter()
        .map(|&i| Hit {
            index: i,
            name: index.names[i].clone(),
            cui: index.cuis[i].clone(),
            similarity: scores[i],
        })
        .collect();
    let mut seen = HashSet::new();
    let predicted_cuis = ranked
        .iter()
        .map(|&i| &index.cuis[i])
        .filter(|c| seen.insert(*c))
        .take(k)
        .cloned()
        .collect();
    RankedResult {
        query: query.to_string(),
        hits,
        predicted_cuis,
    }
}

pub fn rank(index: &CandidateIndex, params: &EncoderParams, query: &str, k: usize) -> RankedResult {
    if k > index.len() {
        log::warn!("k = {k} exceeds the index size {}; clamping", index.len());
    }
    let embedding = params.encode(query);
    rank_embedding(index, query, embedding.as_slice(), k)
}

/// Fraction of queries whose gold CUI is among their first `k` predicted CUIs.
/// An empty query list scores 0.
pub fn precision_at_k(results: &[RankedResult], golds: &[LabelId], k: usize) -> Result<f64> {
    if results.len() != golds.len() {
        return Err(Error::LengthMismatch {
            results: results.len(),
            golds: golds.len(),
        });
    }
    if results.is_empty() {
        return Ok(0.0);
    }
    let hits = results
        .iter()
        .zip(golds)
        .filter(|(r, gold)| r.predicted_cuis.iter().take(k).any(|c| c == *gold))
        .count();
    Ok(hits as f64 / results.len() as f64)
}

/// A test query. The sentence is carried along but never encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvalExample {
    pub sentence: String,
    pub mention: String,
    pub gold_cui: LabelId,
    pub lang: Lang,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangMetrics {
    pub lang: Lang,
    pub n: usize,
    /// `None` for an empty test set.
    pub p_at_1: Option<f64>,
    pub p_at_5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_lang: Vec<LangMetrics>,
    /// Unweighted mean over languages with a non-empty test set.
    pub avg_p_at_1: Option<f64>,
    pub avg_p_at_5: Option<f64>,
    pub avg_n: usize,
}

impl EvalReport {
    pub fn get(&self, lang: Lang) -> Option<&LangMetrics> {
        self.per_lang.iter().find(|m| m.lang == lang)
    }

    /// Tab-separated `lang p_at_1 p_at_5 n`, one language per line in code
    /// order, then `avg`. Empty test sets print `NA`.
    pub fn to_report_string(&self) -> String {
        let fmt = |p: Option<f64>| p.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let mut out = String::from("lang\tp_at_1\tp_at_5\tn\n");
        for m in &self.per_lang {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", m.lang, fmt(m.p_at_1), fmt(m.p_at_5), m.n);
        }
        let _ = writeln!(
            out,
            "avg\t{}\t{}\t{}",
            fmt(self.avg_p_at_1),
            fmt(self.avg_p_at_5),
            self.avg_n
        );
        out
    }
}

/// Ranks every test query and scores P@1 and P@5 per language.
pub fn evaluate(
    params: &EncoderParams,
    index: &CandidateIndex,
    test_sets: &BTreeMap<Lang, Vec<EvalExample>>,
) -> Result<EvalReport> {
    let mut per_lang = Vec::with_capacity(test_sets.len());
    for (&lang, examples) in test_sets {
        if examples.is_empty() {
            log::warn!("test set for {lang} is empty; excluded from the average");
            per_lang.push(LangMetrics {
                lang,
                n: 0,
                p_at_1: None,
                p_at_5: None,
            });
            continue;
        }
        let results: Vec<RankedResult> = examples
            .par_iter()
            .map(|ex| rank(index, params, &ex.mention, 5))
            .collect();
        let golds: Vec<LabelId> = examples.iter().map(|e| e.gold_cui.clone()).collect();
        per_lang.push(LangMetrics {
            lang,
            n: examples.len(),
            p_at_1: Some(precision_at_k(&results, &golds, 1)?),
            p_at_5: Some(precision_at_k(&results, &golds, 5)?),
        });
    }
    let scored: Vec<&LangMetrics> = per_lang.iter().filter(|m| m.n > 0).collect();
    let mean = |f: fn(&LangMetrics) -> Option<f64>| {
        (!scored.is_empty()).then(|| scored.iter().filter_map(|m| f(m)).sum::<f64>() / scored.len() as f64)
    };
    Ok(EvalReport {
        avg_p_at_1: mean(|m| m.p_at_1),
        avg_p_at_5: mean(|m| m.p_at_5),
        avg_n: scored.iter().map(|m| m.n).sum(),
        per_lang,
    })
}

/// Parses `sentence<TAB>mention<TAB>cui` lines.
pub fn read_test_set(path: &Path, lang: Lang) -> Result<Vec<EvalExample>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in open_lines(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [sentence, mention, cui] = fields[..] else {
            return Err(parse_err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let mention = normalize_name(mention);
        if mention.is_empty() {
            return Err(parse_err("empty mention".into()));
        }
        out.push(EvalExample {
            sentence: sentence.to_string(),
            mention,
            gold_cui: LabelId::new(cui.trim()).map_err(|e| parse_err(e.to_string()))?,
            lang,
        });
    }
    Ok(out)
}

/// Language code carried by a test-set file name: the last `_`, `-` or `.`
/// separated segment of the stem (`de.tsv`, `xlbel_de.tsv`).
pub fn lang_from_file_name(path: &Path) -> Option<Lang> {
    let stem = path.file_stem()?.to_str()?;
    let code = stem.rsplit(['_', '-', '.']).next()?;
    Lang::new(code).ok()
}

pub fn format_test_set(examples: &[EvalExample]) -> String {
    let mut out = String::new();
    for e in examples {
        let sentence = e.sentence.replace(['\t', '\n', '\r'], " ");
        let _ = writeln!(out, "{sentence}\t{}\t{}", e.mention, e.gold_cui);
    }
    out
}

/// Reads every `*.tsv` file in `dir` whose name carries a language code.
pub fn read_test_dir(dir: &Path) -> Result<BTreeMap<Lang, Vec<EvalExample>>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "tsv") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut sets: BTreeMap<Lang, Vec<EvalExample>> = BTreeMap::new();
    for path in paths {
        match lang_from_file_name(&path) {
            Some(lang) => sets.entry(lang).or_default().extend(read_test_set(&path, lang)?),
            None => log::warn!("skipping {}: no language code in the name", path.display()),
        }
    }
    Ok(sets)
}
