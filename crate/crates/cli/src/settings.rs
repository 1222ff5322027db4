//! Flag and config-file resolution. A config file is flat `key = value`
//! text using the long flag names; flags given on the command line win.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use deplen_core::analysis::{ExperimentConfig, SyntheticSpec};
use deplen_core::constituency::DistanceConvention;
use deplen_core::stats::ZScoreMode;
use deplen_core::treebank::Format;
use deplen_core::variants::Strategy;

use crate::CliError;

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Input treebank
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Input format: conllu or tsv-minimal
    #[arg(long)]
    pub format: Option<Format>,
    /// Maximum number of orders per sentence, reference included
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Standardization statistics: fold (training split) or global
    #[arg(long)]
    pub zscore: Option<ZScoreMode>,
    /// Seeded draws averaged for the random and least-effort strategies
    #[arg(long)]
    pub random_draws: Option<usize>,
    /// Constituent count used for the regression tables
    #[arg(long)]
    pub fit_k: Option<usize>,
    /// Comma-separated strategy list for the curves
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    /// Arc length convention: intervening or positional
    #[arg(long)]
    pub convention: Option<DistanceConvention>,
    /// Drop punctuation tokens before decomposition
    #[arg(long)]
    pub exclude_punct: bool,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value file providing defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub p_least_effort: Option<f64>,
    #[arg(long)]
    pub noise_temperature: Option<f64>,
    #[arg(long)]
    pub mean_length: Option<f64>,
    #[arg(long)]
    pub head_final_prob: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Resolved {
    pub corpus: Option<PathBuf>,
    pub format: Format,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub experiment: ExperimentConfig,
    pub synth: SyntheticSpec,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config key `{key}`: invalid value `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("config key `{key}`: expected a boolean, got `{value}`"))),
    }
}

fn read_config_file(path: &Path, common: &mut Common, synth: &mut SynthArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut file = Common::default();
    let mut file_synth = SynthArgs::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "corpus" => file.corpus = Some(value.into()),
            "format" => file.format = Some(parse(&key, value)?),
            "cap" => file.cap = Some(parse(&key, value)?),
            "seed" => file.seed = Some(parse(&key, value)?),
            "k-min" => file.k_min = Some(parse(&key, value)?),
            "k-max" => file.k_max = Some(parse(&key, value)?),
            "folds" => file.folds = Some(parse(&key, value)?),
            "zscore" => file.zscore = Some(parse(&key, value)?),
            "random-draws" => file.random_draws = Some(parse(&key, value)?),
            "fit-k" => file.fit_k = Some(parse(&key, value)?),
            "strategies" => {
                file.strategies = Some(value.split(',').map(|s| parse(&key, s.trim())).collect::<Result<_, _>>()?)
            }
            "convention" => file.convention = Some(parse(&key, value)?),
            "exclude-punct" => file.exclude_punct = parse_bool(&key, value)?,
            "jobs" => file.jobs = Some(parse(&key, value)?),
            "out" => file.out = Some(value.into()),
            "sentences" => file_synth.sentences = Some(parse(&key, value)?),
            "p-least-effort" => file_synth.p_least_effort = Some(parse(&key, value)?),
            "noise-temperature" => file_synth.noise_temperature = Some(parse(&key, value)?),
            "mean-length" => file_synth.mean_length = Some(parse(&key, value)?),
            "head-final-prob" => file_synth.head_final_prob = Some(parse(&key, value)?),
            _ => return Err(CliError::Usage(format!("{}:{}: unknown key `{key}`", path.display(), n + 1))),
        }
    }
    macro_rules! fill {
        ($dst:expr, $src:expr, $($f:ident),*) => { $( if $dst.$f.is_none() { $dst.$f = $src.$f.take(); } )* };
    }
    fill!(common, file, corpus, format, cap, seed, k_min, k_max, folds, zscore, random_draws, fit_k, strategies, convention, jobs, out);
    fill!(synth, file_synth, sentences, p_least_effort, noise_temperature, mean_length, head_final_prob);
    common.exclude_punct |= file.exclude_punct;
    Ok(())
}

pub fn resolve(mut common: Common, mut synth: SynthArgs) -> Result<Resolved, CliError> {
    if let Some(path) = common.config.clone() {
        read_config_file(&path, &mut common, &mut synth)?;
    }
    let d = ExperimentConfig::default();
    let experiment = ExperimentConfig {
        cap: common.cap.unwrap_or(d.cap),
        seed: common.seed.unwrap_or(d.seed),
        k_min: common.k_min.unwrap_or(d.k_min),
        k_max: common.k_max.unwrap_or(d.k_max),
        strategies: common.strategies.unwrap_or(d.strategies),
        zscore: common.zscore.unwrap_or(d.zscore),
        folds: common.folds.unwrap_or(d.folds),
        random_draws: common.random_draws.unwrap_or(d.random_draws),
        fit_k: common.fit_k.unwrap_or(d.fit_k),
        convention: common.convention.unwrap_or(d.convention),
        exclude_punct: common.exclude_punct,
    };
    experiment.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let s = SyntheticSpec::default();
    let spec = SyntheticSpec {
        sentences: synth.sentences.unwrap_or(s.sentences),
        p_least_effort: synth.p_least_effort.unwrap_or(s.p_least_effort),
        noise_temperature: synth.noise_temperature.unwrap_or(s.noise_temperature),
        mean_length: synth.mean_length.unwrap_or(s.mean_length),
        head_final_prob: synth.head_final_prob.unwrap_or(s.head_final_prob),
        ..s
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if common.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be positive".into()));
    }
    let out = common
        .out
        .ok_or_else(|| CliError::Usage("missing --out directory".into()))?;
    Ok(Resolved {
        corpus: common.corpus,
        format: common.format.unwrap_or(Format::Conllu),
        out,
        jobs: common.jobs,
        experiment,
        synth: spec,
    })
}
