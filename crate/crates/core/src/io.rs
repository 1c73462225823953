//! File plumbing: atomic writes and the canonical record TSV
//! (`label<TAB>name<TAB>lang`, one record per line).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::record::{Lang, LabelId, NameRecord};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::file(path, std::io::Error::other("not a file path")))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub fn open_lines(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(BufReader::new(file))
}

pub fn format_records(records: &[NameRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(r.label.as_str());
        out.push('\t');
        out.push_str(&r.name);
        out.push('\t');
        out.push_str(r.lang.as_str());
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[NameRecord]) -> Result<()> {
    write_atomic(path, format_records(records).as_bytes())
}

/// Parses one canonical record line.
pub fn parse_record_line(line: &str) -> std::result::Result<NameRecord, String> {
    let mut fields = line.split('\t');
    let (Some(label), Some(name), Some(lang), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err("expected 3 tab-separated fields".into());
    };
    let label = LabelId::new(label).map_err(|e| e.to_string())?;
    let lang = Lang::new(lang).map_err(|e| e.to_string())?;
    NameRecord::new(name, label, lang).map_err(|e| e.to_string())
}

/// Reads a canonical record file. Any malformed line is an error naming the
/// line; blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<NameRecord>> {
    let reader = open_lines(path)?;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record_line(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Streams records into any writer.
pub fn write_records_to<W: Write>(writer: W, records: &[NameRecord]) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(format_records(records).as_bytes())?;
    w.flush()
}
