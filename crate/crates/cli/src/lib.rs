//! The `xlsap` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad or missing flags), 2 for
//! data errors (unreadable or malformed inputs, training failures).

pub mod experiment;

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use xlsap::benchmark::{self, DEFAULT_SAMPLE_SIZE};
use xlsap::bitext::{self, parse_title_pairs, parse_word_translations};
use xlsap::config::{load_config, write_config};
use xlsap::encoder::{read_checkpoint, write_checkpoint};
use xlsap::io::{open_lines, read_records, write_atomic, write_records};
use xlsap::linker::{build_index, evaluate, format_test_set, read_test_dir, rank};
use xlsap::record::{parse_lang_list, validate_records};
use xlsap::sap::{trace_to_csv, train_sequential};
use xlsap::synthetic::{self, SyntheticConfig};
use xlsap::umls::{extract_synonyms, language_stats};
use xlsap::{init_params, Lang, NameRecord, TrainConfig};

use experiment::{parse_variants, run_transfer_experiment, ExperimentInputs};

#[derive(Debug, Parser)]
#[command(name = "xlsap", version, about = "Cross-lingual self-alignment pretraining for entity linking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract (cui, name, lang) records from an MRCONSO.RRF file.
    IngestUmls(IngestUmls),
    /// Turn word dictionaries and/or title pairs into pseudo-labelled records.
    IngestBitext(IngestBitext),
    /// Train an encoder on synonym records, optionally continuing on bitext.
    Train(Train),
    /// Score a checkpoint with Precision@1/@5 per language.
    Evaluate(Evaluate),
    /// Build test sets from hyperlinked mention occurrences.
    BuildBenchmark(BuildBenchmark),
    /// Per-language counts of a record file.
    Stats(Stats),
    /// Train and compare en_syn / all_syn / +wt variants.
    Experiment(Experiment),
    /// Write a synthetic multilingual corpus for experiments.
    Synth(Synth),
}

#[derive(Debug, Args)]
pub struct IngestUmls {
    /// MRCONSO.RRF file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated language codes to keep; all when omitted.
    #[arg(long)]
    pub langs: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-language count table here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestBitext {
    /// Word dictionary, `source target` per line.
    #[arg(long)]
    pub muse: Option<PathBuf>,
    /// Title pairs, `source<TAB>target` per line.
    #[arg(long)]
    pub wt: Option<PathBuf>,
    #[arg(long, default_value = "en")]
    pub src: String,
    #[arg(long)]
    pub tgt: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Train {
    /// Synonym records.
    #[arg(long)]
    pub data: PathBuf,
    /// Translation-pair records to continue on after the synonyms.
    #[arg(long)]
    pub bitext: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Start from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub model: PathBuf,
    /// Candidate records.
    #[arg(long)]
    pub ontology: PathBuf,
    /// Directory of `<lang>.tsv` test files.
    #[arg(long)]
    pub tests: PathBuf,
    /// Metrics report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the top-k names of every query here.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

#[derive(Debug, Args)]
pub struct BuildBenchmark {
    /// `lang<TAB>sentence<TAB>mention<TAB>page_title` lines.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `title<TAB>cui[<TAB>lang]` lines.
    #[arg(long)]
    pub titles: PathBuf,
    /// Output directory for `<lang>.tsv` and `stats.tsv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Stats {
    /// Record file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Experiment {
    /// Synonym records in every language.
    #[arg(long)]
    pub synonyms: PathBuf,
    /// Translation-pair records for `+wt` variants.
    #[arg(long)]
    pub bitext: Option<PathBuf>,
    #[arg(long)]
    pub ontology: PathBuf,
    #[arg(long)]
    pub tests: PathBuf,
    /// Comma-separated: init, en_syn, all_syn, each optionally with +wt.
    #[arg(long, default_value = "en_syn,all_syn")]
    pub variants: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comparison table; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Synth {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub concepts: usize,
}

/// A failure caused by the invocation rather than by the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                1
            } else {
                2
            }
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::IngestUmls(a) => ingest_umls(a),
        Command::IngestBitext(a) => ingest_bitext(a),
        Command::Train(a) => train_command(a),
        Command::Evaluate(a) => evaluate_command(a),
        Command::BuildBenchmark(a) => build_benchmark(a),
        Command::Stats(a) => stats_command(a),
        Command::Experiment(a) => experiment_command(a),
        Command::Synth(a) => synth_command(a),
    }
}

fn lang_arg(code: &str, flag: &str) -> Result<Lang> {
    Lang::new(code).map_err(|_| usage(format!("--{flag}: invalid language code {code:?}")))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn ingest_umls(a: IngestUmls) -> Result<()> {
    let filter = match &a.langs {
        Some(list) => Some(
            parse_lang_list(list)
                .map_err(|e| usage(format!("--langs: {e}")))?
                .into_iter()
                .collect::<HashSet<_>>(),
        ),
        None => None,
    };
    let reader = open_lines(&a.input)?;
    let extraction = extract_synonyms(reader, filter.as_ref()).with_context(|| a.input.display().to_string())?;
    eprintln!(
        "{} records ({} unparsable, {} unknown language, {} duplicates, {} filtered out)",
        extraction.records.len(),
        extraction.unparsable,
        extraction.unknown_lang,
        extraction.duplicates,
        extraction.filtered_out
    );
    let stats = language_stats(&extraction.records).to_tsv();
    eprint!("{stats}");
    if let Some(path) = &a.stats {
        write_atomic(path, stats.as_bytes())?;
    }
    write_records(&a.out, &extraction.records)?;
    Ok(())
}

fn ingest_bitext(a: IngestBitext) -> Result<()> {
    let src = lang_arg(&a.src, "src")?;
    let tgt = lang_arg(&a.tgt, "tgt")?;
    if a.muse.is_none() && a.wt.is_none() {
        return Err(usage("ingest-bitext needs --muse, --wt or both"));
    }
    let words = match &a.muse {
        Some(path) => parse_word_translations(open_lines(path)?, src, tgt)?.pairs,
        None => Vec::new(),
    };
    let titles = match &a.wt {
        Some(path) => parse_title_pairs(open_lines(path)?, src, tgt)?.pairs,
        None => Vec::new(),
    };
    eprintln!("{} word pairs, {} title pairs", words.len(), titles.len());
    let records = match (a.muse.is_some(), a.wt.is_some()) {
        (true, true) => bitext::combine_title_and_word_pairs(&titles, &words),
        (true, false) => bitext::pairs_to_records(&words),
        _ => bitext::pairs_to_records(&titles),
    };
    write_records(&a.out, &records)?;
    Ok(())
}

fn load_train_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut config = match path {
        Some(p) => load_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn read_training_records(path: &Path, config: &TrainConfig) -> Result<Vec<NameRecord>> {
    let validated = validate_records(read_records(path)?, config.max_name_chars);
    if validated.dropped > 0 {
        eprintln!("{}: dropped {} records", path.display(), validated.dropped);
    }
    Ok(validated.records)
}

fn train_command(a: Train) -> Result<()> {
    let config = load_train_config(a.config.as_deref(), a.seed)?;
    let stage1 = read_training_records(&a.data, &config)?;
    let stage2 = match &a.bitext {
        Some(path) => read_training_records(path, &config)?,
        None => Vec::new(),
    };
    let initial = match &a.init {
        Some(path) => read_checkpoint(path)?.0,
        None => init_params(&config, config.seed),
    };
    eprintln!("training on {} synonym and {} bitext records", stage1.len(), stage2.len());
    let outcome = train_sequential(&stage1, &stage2, &config, initial)?;
    if let Some(path) = &a.trace {
        write_atomic(path, trace_to_csv(&outcome.trace).as_bytes())?;
    }
    write_checkpoint(&a.out, &outcome.params, &config)?;
    Ok(())
}

fn evaluate_command(a: Evaluate) -> Result<()> {
    if !a.tests.is_dir() {
        bail!("test directory {} does not exist", a.tests.display());
    }
    let (params, _) = read_checkpoint(&a.model)?;
    let ontology = read_records(&a.ontology)?;
    let tests = read_test_dir(&a.tests)?;
    if tests.is_empty() {
        bail!("no <lang>.tsv test files in {}", a.tests.display());
    }
    let index = build_index(&params, &ontology)?;
    eprintln!(
        "index: {} names, {} concepts",
        index.len(),
        index.distinct_cuis()
    );
    let report = evaluate(&params, &index, &tests)?;
    if let Some(path) = &a.predictions {
        let mut out = String::from("lang\tmention\tgold\trank\tname\tcui\tsimilarity\n");
        for (lang, examples) in &tests {
            for ex in examples {
                let ranked = rank(&index, &params, &ex.mention, a.k as usize);
                for (r, hit) in ranked.hits.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{lang}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
                        ex.mention,
                        ex.gold_cui,
                        r + 1,
                        hit.name,
                        hit.cui,
                        hit.similarity
                    );
                }
            }
        }
        write_atomic(path, out.as_bytes())?;
    }
    emit(a.out.as_deref(), &report.to_report_string())
}

fn build_benchmark(a: BuildBenchmark) -> Result<()> {
    let occurrences = benchmark::read_occurrences(&a.input)?;
    let titles = benchmark::read_title_map(&a.titles)?;
    let built = benchmark::build_benchmark(&occurrences, &titles);
    std::fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;
    for (lang, b) in &built {
        if b.unmapped > 0 {
            eprintln!("{lang}: {} occurrences with unmapped titles", b.unmapped);
        }
        match benchmark::sample_test_set(&b.examples, a.n, a.seed) {
            Ok(sample) => {
                write_atomic(&a.out.join(format!("{lang}.tsv")), format_test_set(&sample).as_bytes())?;
            }
            Err(e) => eprintln!("{lang}: skipped: {e}"),
        }
    }
    let stats: BTreeMap<Lang, benchmark::BenchmarkStats> = built.iter().map(|(l, b)| (*l, b.stats)).collect();
    write_atomic(&a.out.join("stats.tsv"), benchmark::stats_to_tsv(&stats).as_bytes())?;
    Ok(())
}

fn stats_command(a: Stats) -> Result<()> {
    let records = read_records(&a.input)?;
    emit(a.out.as_deref(), &language_stats(&records).to_tsv())
}

fn experiment_command(a: Experiment) -> Result<()> {
    let variants = parse_variants(&a.variants).map_err(|e| usage(format!("--variants: {e}")))?;
    if variants.is_empty() {
        return Err(usage("--variants is empty"));
    }
    if variants.iter().any(|v| v.bitext) && a.bitext.is_none() {
        return Err(usage("+wt variants need --bitext"));
    }
    if !a.tests.is_dir() {
        bail!("test directory {} does not exist", a.tests.display());
    }
    let config = load_train_config(a.config.as_deref(), a.seed)?;
    let synonyms = read_training_records(&a.synonyms, &config)?;
    let bitext = match &a.bitext {
        Some(path) => Some(read_training_records(path, &config)?),
        None => None,
    };
    let ontology = read_records(&a.ontology)?;
    let test_sets = read_test_dir(&a.tests)?;
    let inputs = ExperimentInputs {
        synonyms: &synonyms,
        bitext: bitext.as_deref(),
        ontology: &ontology,
        test_sets: &test_sets,
    };
    let report = run_transfer_experiment(&inputs, &variants, &config)?;
    emit(a.out.as_deref(), &report.to_table())
}

/// Training settings for the synthetic corpus: plain SGD needs a far larger
/// step than the published transformer fine-tuning rate.
pub fn synthetic_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 1.0,
        epochs: 20,
        batch_size: 128,
        seed,
        ..TrainConfig::default()
    }
}

fn synth_command(a: Synth) -> Result<()> {
    if a.concepts == 0 {
        return Err(usage("--concepts must be positive"));
    }
    let config = SyntheticConfig {
        concepts: a.concepts,
        ..SyntheticConfig::default()
    };
    let corpus = synthetic::generate(&config, a.seed);
    let tests = a.out.join("tests");
    std::fs::create_dir_all(&tests).with_context(|| tests.display().to_string())?;
    write_records(&a.out.join("synonyms.tsv"), &corpus.all_synonyms())?;
    write_records(&a.out.join("ontology.tsv"), &corpus.ontology)?;
    write_records(&a.out.join("bitext.tsv"), &bitext::pairs_to_records(&corpus.bitext))?;
    for (lang, examples) in &corpus.test_sets {
        write_atomic(&tests.join(format!("{lang}.tsv")), format_test_set(examples).as_bytes())?;
    }
    write_config(a.out.join("experiment.cfg"), &synthetic_train_config(a.seed))?;
    eprintln!(
        "{} concepts, {} synonyms, {} bitext pairs, {} languages",
        config.concepts,
        corpus.ontology.len(),
        corpus.bitext.len(),
        corpus.test_sets.len()
    );
    Ok(())
}
