//! `deplen`: command-line front end for the dependency-length toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Progress goes to
//! stderr (verbosity via `DEPLEN_LOG`); data products are written only
//! under `--out`.

mod settings;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use deplen_core::analysis::{self, Loaded};
use deplen_core::features::write_feature_csv;
use deplen_core::treebank::{write_corpus, Format};
use deplen_core::variants::VariantRecord;
use serde_json::json;

use settings::{resolve, Common, Resolved, SynthArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(deplen_core::Error),
}

impl From<deplen_core::Error> for CliError {
    fn from(e: deplen_core::Error) -> Self {
        match e {
            deplen_core::Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Data(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "deplen", version, about = "Dependency-length analysis of preverbal constituent orders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a corpus and summarize trees and diagnostics
    Parse(#[command(flatten)] Common),
    /// Split eligible sentences into preverbal constituents
    Decompose(#[command(flatten)] Common),
    /// Dump the reference and sampled variant orders of every sentence
    Variants(#[command(flatten)] Common),
    /// Normalized dependency length per ordering strategy
    Strategies(#[command(flatten)] Common),
    /// Pairwise feature deltas, one CSV per constituent count
    Features(#[command(flatten)] Common),
    /// Positional regressions with feature elimination
    Fit(#[command(flatten)] Common),
    /// Cross-validated classification accuracy tables
    Classify(#[command(flatten)] Common),
    /// Generate a synthetic verb-final corpus
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Every figure and table dataset plus a manifest
    ReportAll(#[command(flatten)] Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Parse(_) => "parse",
            Command::Decompose(_) => "decompose",
            Command::Variants(_) => "variants",
            Command::Strategies(_) => "strategies",
            Command::Features(_) => "features",
            Command::Fit(_) => "fit",
            Command::Classify(_) => "classify",
            Command::Synth { .. } => "synth",
            Command::ReportAll(_) => "report-all",
        }
    }
}

fn read_corpus(r: &Resolved) -> Result<Vec<u8>, CliError> {
    let path = r
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing --corpus".into()))?;
    fs::read(path).map_err(|e| CliError::Data(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into()))
}

fn create(path: PathBuf) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(command: Command) -> Result<(), CliError> {
    let (common, synth) = match &command {
        Command::Synth { common, synth } => (common.clone(), synth.clone()),
        Command::Parse(c)
        | Command::Decompose(c)
        | Command::Variants(c)
        | Command::Strategies(c)
        | Command::Features(c)
        | Command::Fit(c)
        | Command::Classify(c)
        | Command::ReportAll(c) => (c.clone(), SynthArgs::default()),
    };
    let r = resolve(common, synth)?;
    if let Some(n) = r.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let config = &r.experiment;
    let out = &r.out;

    if let Command::Synth { .. } = command {
        fs::create_dir_all(out)?;
        log::info!("generating {} sentences", r.synth.sentences);
        let sentences = analysis::generate_synthetic_corpus(&r.synth, config.seed)?;
        let mut w = create(out.join("synthetic.conllu"))?;
        write_corpus(&mut w, &sentences, Format::Conllu)?;
        w.flush()?;
        let mut w = create(out.join("synth_manifest.json"))?;
        serde_json::to_writer_pretty(&mut w, &json!({ "seed": config.seed, "spec": r.synth }))
            .map_err(deplen_core::Error::from)?;
        writeln!(w)?;
        return Ok(());
    }

    if let Command::ReportAll(_) = command {
        let bytes = read_corpus(&r)?;
        let report = analysis::report_all(&bytes, r.format, config, out)?;
        for d in &report.diagnostics {
            log::warn!("{d}");
        }
        log::info!("{} eligible sentences, {} pairs, {} files", report.eligible, report.pairs, report.files.len());
        return Ok(());
    }

    let loaded: Loaded = analysis::load(&read_corpus(&r)?, r.format, config)?;
    fs::create_dir_all(out)?;
    let exp = &loaded.experiment;
    let mut diagnostics = Vec::new();
    let mut pairs = None;
    match command {
        Command::Parse(_) => {
            let summary = json!({
                "sentences": loaded.corpus.sentences.len(),
                "projective": loaded.corpus.projective_count(),
                "diagnostics": loaded.corpus.diagnostics,
            });
            let mut w = create(out.join("parse_summary.json"))?;
            serde_json::to_writer_pretty(&mut w, &summary).map_err(deplen_core::Error::from)?;
            writeln!(w)?;
        }
        Command::Decompose(_) => {
            let mut w = csv::Writer::from_path(out.join("constituents.csv")).map_err(deplen_core::Error::from)?;
            w.write_record(["sentence_id", "k", "verb_index", "position", "head_index", "start", "end", "length", "head_right_offset"])
                .map_err(deplen_core::Error::from)?;
            for item in &exp.items {
                let plan = &item.plan;
                for (i, c) in plan.preverbal().iter().enumerate() {
                    w.write_record([
                        item.id.clone(),
                        plan.k().to_string(),
                        plan.verb_index().to_string(),
                        (i + 1).to_string(),
                        c.head_index.to_string(),
                        c.span.start.to_string(),
                        c.span.end.to_string(),
                        c.length.to_string(),
                        c.head_right_offset.to_string(),
                    ])
                    .map_err(deplen_core::Error::from)?;
                }
            }
            w.flush()?;
        }
        Command::Variants(_) => {
            let mut w = create(out.join("variants.jsonl"))?;
            for item in &exp.items {
                let set = analysis::variants_for(item, config)?;
                let orders = std::iter::once(&set.reference_order).chain(&set.sampled_variants);
                for order in orders {
                    let record = VariantRecord::new(&item.id, &item.plan, order, config.convention);
                    serde_json::to_writer(&mut w, &record).map_err(deplen_core::Error::from)?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
        }
        Command::Strategies(_) => {
            analysis::write_fig4(exp, config, out)?;
            let mut w = csv::Writer::from_path(out.join("strategies.csv")).map_err(deplen_core::Error::from)?;
            let mut header = vec!["sentence_id".to_string(), "k".to_string(), "tokens".to_string()];
            header.extend(config.strategies.iter().map(|s| s.to_string()));
            w.write_record(&header).map_err(deplen_core::Error::from)?;
            for item in exp.items.iter().filter(|i| config.k_range().contains(&i.plan.k())) {
                let dls = analysis::sentence_strategy_dls(item, config);
                let mut row = vec![item.id.clone(), item.plan.k().to_string(), item.plan.tree().len().to_string()];
                row.extend(config.strategies.iter().map(|s| format!("{:.6}", dls[s])));
                w.write_record(&row).map_err(deplen_core::Error::from)?;
            }
            w.flush()?;
        }
        Command::Features(_) => {
            let examples = analysis::pairwise_dataset(exp, config)?;
            for k in config.k_range() {
                let subset: Vec<_> = examples.iter().filter(|e| e.k == k).cloned().collect();
                if subset.is_empty() {
                    diagnostics.push(format!("no pairs with k={k}"));
                    continue;
                }
                write_feature_csv(create(out.join(format!("features_k{k}.csv")))?, &subset, k)?;
            }
            pairs = Some(examples.len());
        }
        Command::Fit(_) => {
            let examples = analysis::pairwise_dataset(exp, config)?;
            analysis::write_regressions(&examples, config, out, &mut diagnostics)?;
            pairs = Some(examples.len());
        }
        Command::Classify(_) => {
            let examples = analysis::pairwise_dataset(exp, config)?;
            analysis::write_classification(&examples, config, out, &mut diagnostics)?;
            pairs = Some(examples.len());
        }
        Command::Synth { .. } | Command::ReportAll(_) => unreachable!(),
    }
    for d in &diagnostics {
        log::warn!("{d}");
    }
    analysis::write_manifest(&loaded, config, pairs, &diagnostics, out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEPLEN_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let name = cli.command.name();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            let mut cmd = Cli::command();
            if let Some(sub) = cmd.find_subcommand_mut(name) {
                let mut sub = sub.clone().bin_name(format!("deplen {name}"));
                eprintln!("{}", sub.render_help());
            }
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
