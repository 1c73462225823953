//! Cross-lingual transfer experiments: train several variants on the same
//! data and score them against one index and one set of test files.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use anyhow::{bail, Result};
use xlsap::linker::{build_index, evaluate, EvalExample, EvalReport};
use xlsap::sap::train;
use xlsap::{init_params, EncoderParams, Lang, NameRecord, TrainConfig};

/// Which synonyms a variant trains on before the optional bitext stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    /// No training.
    Init,
    /// English synonyms only.
    EnSyn,
    /// Synonyms in every language.
    AllSyn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub base: Base,
    /// Continue on translation pairs afterwards.
    pub bitext: bool,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (base, bitext) = match s.strip_suffix("+wt") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let base = match base {
            "init" => Base::Init,
            "en_syn" => Base::EnSyn,
            "all_syn" => Base::AllSyn,
            _ => return Err(format!("unknown variant {s:?} (expected init, en_syn or all_syn, optionally with +wt)")),
        };
        Ok(Variant { base, bitext })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.base {
            Base::Init => "init",
            Base::EnSyn => "en_syn",
            Base::AllSyn => "all_syn",
        };
        write!(f, "{base}{}", if self.bitext { "+wt" } else { "" })
    }
}

pub fn parse_variants(list: &str) -> Result<Vec<Variant>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Variant::from_str)
        .collect()
}

pub struct ExperimentInputs<'a> {
    /// Synonyms in every language; `en_syn` keeps the English ones.
    pub synonyms: &'a [NameRecord],
    /// Pseudo-labelled translation pairs.
    pub bitext: Option<&'a [NameRecord]>,
    pub ontology: &'a [NameRecord],
    pub test_sets: &'a BTreeMap<Lang, Vec<EvalExample>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<(Variant, EvalReport)>,
}

impl ExperimentReport {
    pub fn get(&self, variant: Variant) -> Option<&EvalReport> {
        self.rows.iter().find(|(v, _)| *v == variant).map(|(_, r)| r)
    }

    /// One row per variant; `<lang>_p_at_1` and `<lang>_p_at_5` columns per
    /// language, then the averages.
    pub fn to_table(&self) -> String {
        let fmt = |p: Option<f64>| p.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let mut out = String::from("variant");
        let langs: Vec<Lang> = self
            .rows
            .first()
            .map(|(_, r)| r.per_lang.iter().map(|m| m.lang).collect())
            .unwrap_or_default();
        for lang in &langs {
            let _ = write!(out, "\t{lang}_p_at_1\t{lang}_p_at_5");
        }
        out.push_str("\tavg_p_at_1\tavg_p_at_5\n");
        for (variant, report) in &self.rows {
            out.push_str(&variant.to_string());
            for m in &report.per_lang {
                let _ = write!(out, "\t{}\t{}", fmt(m.p_at_1), fmt(m.p_at_5));
            }
            let _ = writeln!(out, "\t{}\t{}", fmt(report.avg_p_at_1), fmt(report.avg_p_at_5));
        }
        out
    }
}

/// Trains every variant from the same initialization and evaluates each.
/// Stage models are shared between variants that start the same way.
pub fn run_transfer_experiment(
    inputs: &ExperimentInputs<'_>,
    variants: &[Variant],
    config: &TrainConfig,
) -> Result<ExperimentReport> {
    if variants.iter().any(|v| v.bitext) && inputs.bitext.is_none() {
        bail!("a +wt variant needs translation pairs");
    }
    let init = init_params(config, config.seed);
    let english: Vec<NameRecord> = inputs.synonyms.iter().filter(|r| r.lang == Lang::EN).cloned().collect();
    let mut stage1: BTreeMap<&'static str, EncoderParams> = BTreeMap::new();
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let key = match variant.base {
            Base::Init => "init",
            Base::EnSyn => "en_syn",
            Base::AllSyn => "all_syn",
        };
        if !stage1.contains_key(key) {
            let params = match variant.base {
                Base::Init => init.clone(),
                Base::EnSyn => train(&english, config, init.clone())?.params,
                Base::AllSyn => train(inputs.synonyms, config, init.clone())?.params,
            };
            stage1.insert(key, params);
        }
        let mut params = stage1[key].clone();
        if variant.bitext {
            let pairs = inputs.bitext.expect("checked above");
            params = train(pairs, config, params)?.params;
        }
        log::info!("evaluating {variant}");
        let index = build_index(&params, inputs.ontology)?;
        rows.push((variant, evaluate(&params, &index, inputs.test_sets)?));
    }
    Ok(ExperimentReport { rows })
}
