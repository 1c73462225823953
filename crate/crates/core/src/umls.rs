//! Synonym extraction from `MRCONSO.RRF`.
//!
//! Each line is `|`-separated with the standard column layout: the CUI in
//! field 0, the three-letter source language (LAT) in field 1 and the string
//! (STR) in field 14.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use xxhash_rust::xxh3::xxh3_128;

use crate::error::Result;
use crate::record::{is_cui, LabelId, Lang, NameRecord};

const CUI_FIELD: usize = 0;
const LAT_FIELD: usize = 1;
const STR_FIELD: usize = 14;
const MIN_FIELDS: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RrfError {
    #[error("expected at least {MIN_FIELDS} fields, found {0}")]
    TooFewFields(usize),
    #[error("empty CUI")]
    EmptyCui,
    #[error("empty STR")]
    EmptyStr,
    #[error("malformed CUI {0:?}")]
    MalformedCui(String),
}

/// The three MRCONSO columns the toolkit uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrfRow {
    pub cui: LabelId,
    pub lat: String,
    pub str_field: String,
}

pub fn parse_rrf_line(line: &str) -> Result<RrfRow, RrfError> {
    let line = line.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() < MIN_FIELDS {
        return Err(RrfError::TooFewFields(fields.len()));
    }
    let cui = fields[CUI_FIELD];
    if cui.is_empty() {
        return Err(RrfError::EmptyCui);
    }
    if !is_cui(cui) {
        return Err(RrfError::MalformedCui(cui.to_string()));
    }
    let str_field = fields[STR_FIELD];
    if str_field.trim().is_empty() {
        return Err(RrfError::EmptyStr);
    }
    Ok(RrfRow {
        cui: LabelId::new(cui).expect("validated CUI is a valid label"),
        lat: fields[LAT_FIELD].to_string(),
        str_field: str_field.to_string(),
    })
}

/// Maps an RRF LAT code to its ISO-639-1 code.
pub fn lat_to_lang(lat: &str) -> Option<Lang> {
    let code = match lat {
        "ENG" => "en",
        "SPA" => "es",
        "JPN" => "ja",
        "RUS" => "ru",
        "GER" => "de",
        "KOR" => "ko",
        "CHI" => "zh",
        "TUR" => "tr",
        "FIN" => "fi",
        "FRE" => "fr",
        "POR" => "pt",
        "DUT" => "nl",
        "ITA" => "it",
        "CZE" => "cs",
        "NOR" => "no",
        "POL" => "pl",
        "EST" => "et",
        "SWE" => "sv",
        "HRV" => "hr",
        "GRE" => "el",
        "LAV" => "lv",
        _ => return None,
    };
    Some(Lang::new(code).expect("table codes are valid"))
}

/// Records plus the counts of everything that was not kept.
#[derive(Debug, Clone, Default)]
pub struct SynonymExtraction {
    pub records: Vec<NameRecord>,
    pub unparsable: usize,
    /// Rows whose LAT is not in the code table; they are kept as `xx`.
    pub unknown_lang: usize,
    pub duplicates: usize,
    pub filtered_out: usize,
}

/// Streams RRF lines into deduplicated records in input order.
///
/// Duplicates are exact `(cui, name, lang)` matches after name normalization.
/// Bad lines (including invalid UTF-8) are counted and skipped.
pub fn extract_synonyms<R: BufRead>(
    mut reader: R,
    lang_filter: Option<&HashSet<Lang>>,
) -> Result<SynonymExtraction> {
    let mut out = SynonymExtraction::default();
    let mut seen: HashSet<u128> = HashSet::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        let Ok(line) = std::str::from_utf8(&buf) else {
            out.unparsable += 1;
            continue;
        };
        if line.trim().is_empty() {
            continue;
        }
        let row = match parse_rrf_line(line) {
            Ok(row) => row,
            Err(_) => {
                out.unparsable += 1;
                continue;
            }
        };
        let lang = lat_to_lang(&row.lat).unwrap_or_else(|| {
            out.unknown_lang += 1;
            Lang::UNKNOWN
        });
        if let Some(filter) = lang_filter {
            if !filter.contains(&lang) {
                out.filtered_out += 1;
                continue;
            }
        }
        let Ok(record) = NameRecord::new(&row.str_field, row.cui, lang) else {
            out.unparsable += 1;
            continue;
        };
        if !seen.insert(record_key(&record)) {
            out.duplicates += 1;
            continue;
        }
        out.records.push(record);
    }
    if out.unparsable + out.unknown_lang > 0 {
        log::warn!(
            "rrf: {} unparsable lines, {} rows with unknown language",
            out.unparsable,
            out.unknown_lang
        );
    }
    Ok(out)
}

fn record_key(r: &NameRecord) -> u128 {
    let mut bytes = Vec::with_capacity(r.label.as_str().len() + r.name.len() + 4);
    bytes.extend_from_slice(r.label.as_str().as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(r.name.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(r.lang.as_str().as_bytes());
    xxh3_128(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangShare {
    pub name_count: usize,
    pub fraction: f64,
}

/// Per-language record counts and shares, ordered by language code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LanguageStats {
    pub per_lang: BTreeMap<Lang, LangShare>,
    pub total: usize,
}

pub fn language_stats(records: &[NameRecord]) -> LanguageStats {
    let mut counts: BTreeMap<Lang, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.lang).or_default() += 1;
    }
    let total = records.len();
    let per_lang = counts
        .into_iter()
        .map(|(lang, name_count)| {
            let fraction = name_count as f64 / total as f64;
            (lang, LangShare { name_count, fraction })
        })
        .collect();
    LanguageStats { per_lang, total }
}

impl LanguageStats {
    /// `lang<TAB>count<TAB>fraction` lines, largest share first.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<_> = self.per_lang.iter().collect();
        rows.sort_by(|a, b| b.1.name_count.cmp(&a.1.name_count).then(a.0.cmp(b.0)));
        let mut out = String::from("lang\tcount\tfraction\n");
        for (lang, share) in rows {
            out.push_str(&format!("{lang}\t{}\t{:.6}\n", share.name_count, share.fraction));
        }
        out.push_str(&format!("total\t{}\t{:.6}\n", self.total, if self.total > 0 { 1.0 } else { 0.0 }));
        out
    }
}
