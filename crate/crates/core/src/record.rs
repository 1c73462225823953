//! Names, labels and languages: the `(name, label)` items every other module
//! consumes.

use std::fmt;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A class label: a UMLS CUI such as `C0042196` or a translation pseudo-label
/// such as `ENDE2344`.
///
/// Labels are compared byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(String);

impl LabelId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::InvalidLabel {
                value,
                reason: "empty",
            });
        }
        if value.contains(['\t', '\n', '\r', '|']) {
            return Err(Error::InvalidLabel {
                value,
                reason: "contains tab, newline or pipe",
            });
        }
        Ok(LabelId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True for UMLS concept identifiers (`C` followed by at least one digit).
    pub fn is_cui(&self) -> bool {
        is_cui(&self.0)
    }
}

pub(crate) fn is_cui(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('C') && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LabelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LabelId::new(s)
    }
}

impl AsRef<str> for LabelId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Two-letter lowercase language code; `xx` stands for unknown.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lang([u8; 2]);

impl Lang {
    pub const UNKNOWN: Lang = Lang(*b"xx");
    pub const EN: Lang = Lang(*b"en");

    pub fn new(code: &str) -> Result<Self> {
        match code.as_bytes() {
            &[a, b] if a.is_ascii_lowercase() && b.is_ascii_lowercase() => Ok(Lang([a, b])),
            _ => Err(Error::InvalidLang(code.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        // Both bytes are ASCII lowercase letters.
        std::str::from_utf8(&self.0).expect("ascii")
    }

    pub fn to_uppercase(self) -> String {
        self.as_str().to_ascii_uppercase()
    }
}

impl fmt::Debug for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lang({})", self.as_str())
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lang::new(s)
    }
}

/// Parses a comma-separated list such as `en,es,de`.
pub fn parse_lang_list(list: &str) -> Result<Vec<Lang>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Lang::new)
        .collect()
}

/// One `(name, label, language)` item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NameRecord {
    pub name: String,
    pub label: LabelId,
    pub lang: Lang,
}

impl NameRecord {
    /// Builds a record, normalizing the name. Fails if nothing is left of it.
    pub fn new(name: &str, label: LabelId, lang: Lang) -> Result<Self> {
        let name = normalize_name(name);
        if name.is_empty() {
            return Err(Error::InvalidRecord(format!("empty name for label {label}")));
        }
        Ok(NameRecord { name, label, lang })
    }
}

/// NFC-normalizes, maps tabs and line breaks to spaces, and trims.
pub fn normalize_name(name: &str) -> String {
    let nfc: String = name
        .nfc()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect();
    nfc.trim().to_string()
}

/// Truncates to at most `max_chars` Unicode scalar values.
pub fn truncate_chars(name: &str, max_chars: usize) -> &str {
    match name.char_indices().nth(max_chars) {
        Some((byte, _)) => &name[..byte],
        None => name,
    }
}

/// Result of [`validate_records`].
#[derive(Debug, Clone, Default)]
pub struct Validated {
    pub records: Vec<NameRecord>,
    pub dropped: usize,
}

/// Normalizes and truncates names, dropping records whose name ends up empty.
/// Order is preserved.
pub fn validate_records(records: Vec<NameRecord>, max_name_chars: usize) -> Validated {
    let mut out = Validated::default();
    for mut record in records {
        let normalized = normalize_name(&record.name);
        let truncated = truncate_chars(&normalized, max_name_chars);
        // A cut can expose trailing whitespace (or, rarely, a composable pair).
        let name = normalize_name(truncated);
        if name.is_empty() {
            out.dropped += 1;
            continue;
        }
        record.name = name;
        out.records.push(record);
    }
    if out.dropped > 0 {
        log::info!("dropped {} records with empty names", out.dropped);
    }
    out
}
