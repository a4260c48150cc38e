mod commands;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gimirec::config::{load_config, parse_overrides, Preset};
use gimirec::{AblationVariant, HyperParams, NegativeSampling};

#[derive(Parser)]
#[command(name = "gimirec", version, about = "Multi-interest sequential recommender with global item context")]
struct Cli {
    /// Worker threads (default: all cores). Use 1 for bit-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Floating-point width for training and evaluation.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F32)]
    precision: Precision,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an interaction log, filter, index and split it into a bundle.
    Prepare(commands::PrepareArgs),
    /// Build the item graph from training users and export it.
    Gce(commands::GceArgs),
    /// Train a model and write checkpoint.bin, train.log and config.txt.
    Train(commands::TrainArgs),
    /// Evaluate a trained run and print a JSON report.
    Eval(commands::EvalArgs),
    /// Print top-N recommendations for users.
    Recommend(commands::RecommendArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(commands::GradcheckArgs),
    /// Train and evaluate all four graph variants.
    Ablate(commands::AblateArgs),
    /// Write a synthetic log with planted cluster structure.
    Synth(commands::SynthArgs),
}

/// Hyperparameters: preset, then config file, then `GIMI_SEED`, then flags.
#[derive(Args, Clone, Debug, Default)]
pub struct HyperArgs {
    /// Named preset: amazon-books, amazon-hybrid or taobao-buy.
    #[arg(long)]
    preset: Option<Preset>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "l-rec")]
    l_rec: Option<usize>,
    #[arg(long = "l-time")]
    l_time: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long = "l-layer")]
    l_layer: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long = "neg-samples")]
    neg_samples: Option<usize>,
    #[arg(long = "max-steps")]
    max_steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long = "time-unit-seconds")]
    time_unit_seconds: Option<i64>,
    /// full, no_I, no_IN or no_INT.
    #[arg(long)]
    variant: Option<AblationVariant>,
    #[arg(long, env = "GIMI_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    residual: Option<bool>,
    #[arg(long = "allow-self-pairs")]
    allow_self_pairs: Option<bool>,
    /// uniform or log-uniform.
    #[arg(long)]
    sampling: Option<NegativeSampling>,
    #[arg(long = "eval-every")]
    eval_every: Option<usize>,
}

impl HyperArgs {
    pub fn resolve(&self) -> Result<HyperParams> {
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_owned(), v));
            }
        };
        put("a", self.a.map(|v| v.to_string()));
        put("b", self.b.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("beta", self.beta.map(|v| v.to_string()));
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("k", self.k.map(|v| v.to_string()));
        put("l_rec", self.l_rec.map(|v| v.to_string()));
        put("l_time", self.l_time.map(|v| v.to_string()));
        put("d", self.d.map(|v| v.to_string()));
        put("h", self.h.map(|v| v.to_string()));
        put("l_layer", self.l_layer.map(|v| v.to_string()));
        put("batch", self.batch.map(|v| v.to_string()));
        put("neg_samples", self.neg_samples.map(|v| v.to_string()));
        put("max_steps", self.max_steps.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| v.to_string()));
        put("dropout", self.dropout.map(|v| v.to_string()));
        put("time_unit_seconds", self.time_unit_seconds.map(|v| v.to_string()));
        put("variant", self.variant.map(|v| v.as_str().to_owned()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("residual", self.residual.map(|v| v.to_string()));
        put("allow_self_pairs", self.allow_self_pairs.map(|v| v.to_string()));
        put("sampling", self.sampling.map(|v| v.as_str().to_owned()));
        put("eval_every", self.eval_every.map(|v| v.to_string()));
        overrides.extend(parse_overrides(&self.set)?);
        Ok(load_config(self.preset, self.config.as_deref(), &overrides)?)
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let p = cli.precision;
    match cli.command {
        Command::Prepare(a) => commands::prepare(&a),
        Command::Gce(a) => commands::gce(&a, p),
        Command::Train(a) => commands::train(&a, p),
        Command::Eval(a) => commands::eval(&a, p),
        Command::Recommend(a) => commands::recommend(&a, p),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Ablate(a) => commands::ablate(&a, p),
        Command::Synth(a) => commands::synth(&a),
    }
}
