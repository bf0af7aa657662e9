//! Command-line interface: `gen`, `stats`, `train`, `eval`, `detect`, `transform`.
//!
//! Every command is also callable in-process through [`run`], which returns
//! what the binary prints. Exit codes: 0 success, 1 usage or input error,
//! 2 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::annotations::AgreementGroup;
use crate::dirichlet::{softmax, CategoricalDist};
use crate::error::{Error, Result};
use crate::io::{Checkpoint, Dataset, Record, Split};
use crate::losses::LossKind;
use crate::metrics::{detect_report, evaluate, Detection, MetricsReport};
use crate::model::{train, ModelParams, TrainConfig, TrainLog};
use crate::synth::{generate, stats, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "dirprior", version, about = "Dirichlet-prior modelling of ambiguous multi-annotator labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and print its statistics.
    Gen(GenArgs),
    /// Print the statistics table of a dataset.
    Stats(StatsArgs),
    /// Train a classifier under one of the four losses.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write the metrics report.
    Eval(EvalArgs),
    /// Detect no-majority utterances; write PR curves and print AUPRs.
    Detect(DetectArgs),
    /// Rewrite a dataset with vote-and-replace labels.
    Transform(TransformArgs),
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("bad list entry {p:?}")))
        .collect()
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = parse_list(s)?;
    v.try_into().map_err(|_| "expected three comma-separated numbers".to_string())
}

/// Hidden layer sizes as given on the command line; empty means a linear model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenSizes(pub Vec<usize>);

fn parse_hidden(s: &str) -> std::result::Result<HiddenSizes, String> {
    if s.trim().is_empty() {
        return Ok(HiddenSizes(Vec::new()));
    }
    parse_list(s).map(HiddenSizes)
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub annotators: usize,
    #[arg(long, default_value_t = 0.04)]
    pub multi_tag_prob: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Low, medium and high ambiguity regime probabilities.
    #[arg(long, value_parser = parse_triple)]
    pub mix: Option<[f64; 3]>,
    /// Dirichlet precision of each regime (default K+15, K+3, K).
    #[arg(long, value_parser = parse_triple)]
    pub precisions: Option<[f64; 3]>,
}

impl GenArgs {
    pub fn config(&self) -> SynthConfig {
        let mut c = SynthConfig::new(self.n, self.k, self.d, self.seed);
        c.annotators = self.annotators;
        c.multi_tag_prob = self.multi_tag_prob;
        c.noise_sigma = self.noise;
        c.test_fraction = self.test_fraction;
        if let Some(m) = self.mix {
            c.group_mix = m;
        }
        if let Some(p) = self.precisions {
            c.precisions = p;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Restrict to one split.
    #[arg(long)]
    pub split: Option<Split>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// hard, soft, dpn or dpn-kl.
    #[arg(long)]
    pub loss: LossKind,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss log (CSV).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 150)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "64", value_parser = parse_hidden)]
    pub hidden: HiddenSizes,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long = "lambda")]
    pub lambda: Option<f64>,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        let mut c = TrainConfig::new(self.loss);
        c.epochs = self.epochs;
        c.learning_rate = self.lr;
        c.batch_size = self.batch;
        c.hidden = self.hidden.0.clone();
        c.seed = self.seed;
        if let Some(v) = self.eps1 {
            c.loss.eps1 = v;
        }
        if let Some(v) = self.eps2 {
            c.loss.eps2 = v;
        }
        if let Some(v) = self.lambda {
            c.loss.lambda = v;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Max.P curve CSV.
    #[arg(long)]
    pub out_maxp: PathBuf,
    /// Entropy curve CSV.
    #[arg(long)]
    pub out_ent: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Predictive distribution of a network for one feature vector.
pub fn predict(params: &ModelParams, features: &[f64]) -> Result<CategoricalDist> {
    Ok(softmax(&params.forward(features)?))
}

fn load_model(path: &PathBuf, data: &Dataset) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    if ck.classes != data.space.names() {
        return Err(Error::invalid("checkpoint classes differ from the dataset manifest"));
    }
    if ck.params.input_dim() != data.dim {
        return Err(Error::invalid("checkpoint input size differs from the dataset feature dimension"));
    }
    Ok(ck)
}

fn split_records(data: &Dataset, split: Split) -> Result<Vec<&Record>> {
    let recs: Vec<&Record> = data.split(split).collect();
    if recs.is_empty() {
        return Err(Error::invalid(format!("dataset has no {} split", split.as_str())));
    }
    Ok(recs)
}

/// Metrics of `predictor` on the records of one split.
pub fn report_for(
    data: &Dataset,
    split: Split,
    predictor: impl Fn(&Record) -> Result<CategoricalDist>,
) -> Result<MetricsReport> {
    let recs = split_records(data, split)?;
    let preds = recs.iter().map(|r| predictor(r)).collect::<Result<Vec<_>>>()?;
    let sets: Vec<_> = recs.iter().map(|r| &r.annotations).collect();
    evaluate(&sets, &preds)
}

/// No-majority detection of `predictor` on the records of one split.
pub fn detection_for(
    data: &Dataset,
    split: Split,
    predictor: impl Fn(&Record) -> Result<CategoricalDist>,
) -> Result<Detection> {
    let recs = split_records(data, split)?;
    let preds = recs.iter().map(|r| predictor(r)).collect::<Result<Vec<_>>>()?;
    let groups: Vec<AgreementGroup> = recs.iter().map(|r| r.annotations.group()).collect();
    detect_report(&groups, &preds)
}

/// Train on the train split of `data`.
pub fn train_on(data: &Dataset, config: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let examples = data.examples(Split::Train);
    if examples.is_empty() {
        return Err(Error::invalid("dataset has no train split"));
    }
    let (params, log) = train(&examples, config)?;
    Ok((
        Checkpoint {
            classes: data.space.names().to_vec(),
            params,
            train_config: config.clone(),
        },
        log,
    ))
}

pub fn log_csv(log: &TrainLog) -> String {
    let mut s = String::from("epoch,mean_loss\n");
    for (e, v) in log.epoch_loss.iter().enumerate() {
        let _ = writeln!(s, "{},{}", e + 1, v);
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

pub fn report_summary(r: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "utterances     {}", r.count);
    let _ = writeln!(s, "WA             {}", fmt_opt(r.wa));
    let _ = writeln!(s, "UA             {}", fmt_opt(r.ua));
    let _ = writeln!(s, "mean KL        {:.6}", r.mean_kl);
    let _ = writeln!(s, "mean entropy   {:.6}", r.mean_entropy);
    let _ = writeln!(s, "mean Max.P     {:.6}", r.mean_maxp);
    let _ = writeln!(s, "AUPR(Max.P)    {}", fmt_opt(r.aupr_maxp));
    let _ = writeln!(s, "AUPR(Ent.)     {}", fmt_opt(r.aupr_ent));
    for (g, m) in &r.per_group {
        let _ = writeln!(
            s,
            "  {g:<9} n={:<5} Max.P {:.4}  Ent. {:.4}  KL {:.4}  WA {}  UA {}",
            m.count,
            m.mean_maxp,
            m.mean_entropy,
            m.mean_kl,
            fmt_opt(m.wa),
            fmt_opt(m.ua)
        );
    }
    s
}

/// Run one command; returns the text printed on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Gen(a) => {
            let corpus = generate(&a.config())?;
            let data = corpus.to_dataset();
            data.save(&a.out)?;
            let st = stats(data.records.iter().map(|r| &r.annotations))?;
            Ok(st.table())
        }
        Command::Stats(a) => {
            let data = Dataset::load(&a.data)?;
            let st = match a.split {
                Some(sp) => stats(data.split(sp).map(|r| &r.annotations))?,
                None => stats(data.records.iter().map(|r| &r.annotations))?,
            };
            Ok(st.table())
        }
        Command::Train(a) => {
            let data = Dataset::load(&a.data)?;
            let config = a.config();
            let (ck, log) = train_on(&data, &config)?;
            ck.save(&a.out)?;
            if let Some(p) = &a.log {
                fs::write(p, log_csv(&log))?;
            }
            Ok(format!(
                "trained {} on {} utterances for {} epochs; final mean loss {}\n",
                config.loss.kind,
                log.examples_used,
                log.epoch_loss.len(),
                log.epoch_loss.last().copied().unwrap_or(f64::NAN)
            ))
        }
        Command::Eval(a) => {
            let data = Dataset::load(&a.data)?;
            let ck = load_model(&a.model, &data)?;
            let report = report_for(&data, a.split, |r| predict(&ck.params, &r.features))?;
            fs::write(&a.out, report.to_json())?;
            Ok(report_summary(&report))
        }
        Command::Detect(a) => {
            let data = Dataset::load(&a.data)?;
            let ck = load_model(&a.model, &data)?;
            let det = detection_for(&data, a.split, |r| predict(&ck.params, &r.features))?;
            fs::write(&a.out_maxp, det.maxp.to_csv())?;
            fs::write(&a.out_ent, det.ent.to_csv())?;
            Ok(format!("aupr_maxp {}\naupr_ent {}\n", det.aupr_maxp, det.aupr_ent))
        }
        Command::Transform(a) => {
            let data = Dataset::load(&a.data)?;
            let out = data.vote_and_replace()?;
            out.save(&a.out)?;
            let changed = data
                .records
                .iter()
                .zip(&out.records)
                .filter(|(x, y)| x.annotations != y.annotations)
                .count();
            Ok(format!("rewrote {changed} of {} utterances\n", data.records.len()))
        }
    }
}

/// Parse `args` (program name first), run, print, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
