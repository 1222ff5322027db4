//! Writes every figure and table dataset for one corpus into a directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::*;
use crate::treebank::{parse_corpus, Corpus, Format};

/// What `report_all` produced.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub eligible: usize,
    pub pairs: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    format: String,
    corpus_sha256: String,
    sentences: usize,
    parse_diagnostics: usize,
    eligible: usize,
    skipped: &'a BTreeMap<String, usize>,
    pairs: Option<usize>,
    diagnostics: &'a [String],
}

#[derive(Serialize)]
struct Correlation {
    pearson_r: Option<f64>,
    sentences: usize,
    note: Option<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn write_accuracy_table(path: &Path, rows: &[AccuracyRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["predictors", "accuracy_pct", "mcnemar_statistic", "mcnemar_p", "exact", "stars"])?;
    for r in rows {
        let (stat, p, exact) = match &r.mcnemar {
            Some(m) => (fmt(m.statistic), format!("{:.6e}", m.p_two_tailed), m.exact.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            r.predictors.join("+"),
            format!("{:.2}", 100.0 * r.accuracy),
            stat,
            p,
            exact,
            r.stars.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed corpus with its eligible sentences and content hash.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub corpus: Corpus,
    pub experiment: Experiment,
    pub format: Format,
    pub sha256: String,
}

pub fn load(corpus_bytes: &[u8], format: Format, config: &ExperimentConfig) -> Result<Loaded> {
    let corpus = parse_corpus(corpus_bytes, format)?;
    let experiment = prepare(&corpus, config);
    log::info!("{} of {} sentences eligible", experiment.items.len(), corpus.sentences.len());
    Ok(Loaded {
        corpus,
        experiment,
        format,
        sha256: Sha256::digest(corpus_bytes).iter().map(|b| format!("{b:02x}")).collect(),
    })
}

pub fn write_fig1(exp: &Experiment, config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    let p = dir.join("fig1_counts.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["k", "references", "reference_pct", "variants", "variant_pct"])?;
    for row in constituent_count_histogram(exp, config.cap) {
        w.write_record([
            row.k.to_string(),
            row.references.to_string(),
            fmt(row.reference_pct),
            row.variants.to_string(),
            fmt(row.variant_pct),
        ])?;
    }
    w.flush()?;
    Ok(p)
}

pub fn write_fig2(exp: &Experiment, config: &ExperimentConfig, dir: &Path, diagnostics: &mut Vec<String>) -> Result<PathBuf> {
    let p = dir.join("fig2_profile.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["k", "position", "mean_length", "sentences"])?;
    for k in config.k_range() {
        match position_length_profile(exp, k) {
            Ok(profile) => {
                let n = exp.with_k(k).count();
                for (i, m) in profile.iter().enumerate() {
                    w.write_record([k.to_string(), (i + 1).to_string(), fmt(*m), n.to_string()])?;
                }
            }
            Err(e) => diagnostics.push(format!("fig2 k={k}: {e}")),
        }
    }
    w.flush()?;
    Ok(p)
}

pub fn write_fig4(exp: &Experiment, config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    let p = dir.join("fig4_curves.csv");
    let mut w = csv_writer(&p)?;
    let mut header = vec!["k".to_string(), "sentences".to_string()];
    header.extend(config.strategies.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for row in strategy_curves(exp, config) {
        let mut rec = vec![row.k.to_string(), row.sentences.to_string()];
        rec.extend(config.strategies.iter().map(|s| fmt(row.means[s])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(p)
}

/// Tables 1 and 2: per-k positional regressions.
pub fn write_regressions(
    examples: &[PairwiseExample],
    config: &ExperimentConfig,
    dir: &Path,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for (name, kind) in [
        ("table1_regression.json", RegressionKind::DependencyLength),
        ("table2_regression.json", RegressionKind::ConstituentLength),
    ] {
        let report = match run_regression(examples, kind, config) {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(format!("{name}: {e}"));
                let pairs = examples.iter().filter(|e| e.k == config.fit_k).count();
                RegressionReport::empty(kind, config.fit_k, pairs, e.to_string())
            }
        };
        if report.status != "ok" {
            diagnostics.push(format!("{name}: {}", report.status));
        }
        let p = dir.join(name);
        write_json(&p, &report)?;
        files.push(p);
    }
    Ok(files)
}

/// Tables 3 and 4. An insufficient dataset leaves header-only tables and a diagnostic.
pub fn write_classification(
    examples: &[PairwiseExample],
    config: &ExperimentConfig,
    dir: &Path,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<PathBuf>> {
    let (dl_rows, len_rows) = match run_classification_suite(examples, config) {
        Ok(suite) => (suite.dependency_length, suite.constituent_length),
        Err(e) => {
            diagnostics.push(format!("classification: {e}"));
            (Vec::new(), Vec::new())
        }
    };
    let mut files = Vec::new();
    for (name, rows) in [("table3_accuracy.csv", &dl_rows), ("table4_accuracy.csv", &len_rows)] {
        let p = dir.join(name);
        write_accuracy_table(&p, rows)?;
        files.push(p);
    }
    Ok(files)
}

pub fn write_correlation(exp: &Experiment, dir: &Path) -> Result<PathBuf> {
    let correlation = match length_count_correlation(exp) {
        Ok(r) => Correlation {
            pearson_r: Some(r),
            sentences: exp.items.len(),
            note: None,
        },
        Err(e) => Correlation {
            pearson_r: None,
            sentences: exp.items.len(),
            note: Some(e.to_string()),
        },
    };
    let p = dir.join("correlation.json");
    write_json(&p, &correlation)?;
    Ok(p)
}

pub fn write_manifest(
    loaded: &Loaded,
    config: &ExperimentConfig,
    pairs: Option<usize>,
    diagnostics: &[String],
    dir: &Path,
) -> Result<PathBuf> {
    let manifest = Manifest {
        config,
        format: loaded.format.to_string(),
        corpus_sha256: loaded.sha256.clone(),
        sentences: loaded.corpus.sentences.len(),
        parse_diagnostics: loaded.corpus.diagnostics.len(),
        eligible: loaded.experiment.items.len(),
        skipped: &loaded.experiment.skipped,
        pairs,
        diagnostics,
    };
    let p = dir.join("manifest.json");
    write_json(&p, &manifest)?;
    Ok(p)
}

/// Parses `corpus_bytes`, runs every analysis and writes the datasets under
/// `out_dir`. Output bytes depend only on the corpus, the config and the seed.
pub fn report_all(corpus_bytes: &[u8], format: Format, config: &ExperimentConfig, out_dir: &Path) -> Result<Report> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let loaded = load(corpus_bytes, format, config)?;
    let exp = &loaded.experiment;
    let mut diagnostics = Vec::new();
    let mut files = vec![
        write_fig1(exp, config, out_dir)?,
        write_fig2(exp, config, out_dir, &mut diagnostics)?,
    ];
    log::info!("strategy curves");
    files.push(write_fig4(exp, config, out_dir)?);
    log::info!("pairwise dataset");
    let examples = pairwise_dataset(exp, config)?;
    log::info!("regressions on k={}", config.fit_k);
    files.extend(write_regressions(&examples, config, out_dir, &mut diagnostics)?);
    log::info!("classification suite on {} pairs", examples.len());
    files.extend(write_classification(&examples, config, out_dir, &mut diagnostics)?);
    files.push(write_correlation(exp, out_dir)?);
    files.push(write_manifest(&loaded, config, Some(examples.len()), &diagnostics, out_dir)?);
    Ok(Report {
        files,
        eligible: exp.items.len(),
        pairs: examples.len(),
        diagnostics,
    })
}
