use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use gimirec::gce::{build_from_sequences, global_embeddings, write_adjacency, write_embeddings_f32};
use gimirec::ingest::{parse_log, prepare as prepare_dataset, read_bundle, write_bundle, Dataset, LogFormat, UserSequence};
use gimirec::serve_eval::{evaluate, evaluate_ranker, top_n, MetricsReport, PopularityRanker, RandomRanker};
use gimirec::synth::{generate, write_csv, SynthConfig};
use gimirec::train::gradcheck::{gradcheck as run_gradcheck, DEFAULT_TOLERANCE};
use gimirec::train::{read_checkpoint, train as train_model, TrainOptions, CHECKPOINT_FILE, CONFIG_FILE};
use gimirec::{AblationVariant, Error, HyperParams, ModelConfig, ModelParams, Scalar};
use serde_json::{json, Value};

use crate::{HyperArgs, Precision};

#[derive(Args)]
pub struct PrepareArgs {
    /// Delimited interaction log: user, item, unix timestamp.
    #[arg(long)]
    input: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed of the user split.
    #[arg(long, env = "GIMI_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value_t = 0)]
    user_col: usize,
    #[arg(long, default_value_t = 1)]
    item_col: usize,
    #[arg(long, default_value_t = 2)]
    timestamp_col: usize,
    /// Skip the first line.
    #[arg(long)]
    header: bool,
}

pub fn prepare(a: &PrepareArgs) -> Result<()> {
    let fmt = LogFormat {
        delimiter: a.delimiter,
        user_col: a.user_col,
        item_col: a.item_col,
        timestamp_col: a.timestamp_col,
        skip_header: a.header,
    };
    let report = parse_log(&a.input, &fmt)?;
    if report.rejects > 0 {
        log::warn!(
            "{} malformed lines skipped (first at line {})",
            report.rejects,
            report.rejected_lines.first().copied().unwrap_or(0)
        );
    }
    let data = prepare_dataset(&report.records, a.seed)?;
    write_bundle(&a.out, &data)?;
    println!(
        "records={} rejects={} users={} items={} train={} valid={} test={}",
        report.records.len(),
        report.rejects,
        data.sequences.len(),
        data.num_items() - 1,
        data.split.train.len(),
        data.split.valid.len(),
        data.split.test.len()
    );
    Ok(())
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum GceAction {
    Export,
}

#[derive(Args)]
pub struct GceArgs {
    /// `export` is accepted for symmetry; it is the only action.
    #[arg(value_enum)]
    _action: Option<GceAction>,
    /// Bundle directory written by `prepare`.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for adjacency.adj and global_emb.f32.
    #[arg(long)]
    out: PathBuf,
    /// Take the item table from this checkpoint instead of a seeded
    /// initialization.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

pub fn gce(a: &GceArgs, p: Precision) -> Result<()> {
    match p {
        Precision::F32 => gce_with::<f32>(a),
        Precision::F64 => gce_with::<f64>(a),
    }
}

fn gce_with<T: Scalar>(a: &GceArgs) -> Result<()> {
    let hp = a.hyper.resolve()?;
    let data = read_bundle(&a.data)?;
    let n = data.num_items();
    let (acc, adj) = build_from_sequences::<T, _>(data.train_sequences(), &hp, n);
    let item_table = match &a.checkpoint {
        Some(path) => {
            let (dims, params) = read_checkpoint::<T>(path)?;
            if dims.num_items != n {
                bail!("checkpoint has {} item slots, bundle has {n}", dims.num_items);
            }
            params.item_table
        }
        None => {
            let dims = gimirec::ModelDims::from_hyper(&hp, n);
            ModelParams::<T>::init(&dims, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(hp.seed)).item_table
        }
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_adjacency(&a.out.join("adjacency.adj"), &adj.a_norm)?;
    write_embeddings_f32(&a.out.join("global_emb.f32"), &global_embeddings(&adj.a_norm, &item_table))?;
    println!(
        "variant={} items={} pair_occurrences={} nnz={} d={}",
        hp.variant.as_str(),
        n,
        acc.total_occurrences(),
        adj.a_norm.nnz(),
        item_table.cols()
    );
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
}

pub fn train(a: &TrainArgs, p: Precision) -> Result<()> {
    let hp = a.hyper.resolve()?;
    let data = read_bundle(&a.data)?;
    let opts = TrainOptions {
        out_dir: Some(a.out.clone()),
    };
    let (best_step, last_line) = match p {
        Precision::F32 => summarize(train_model::<f32>(&hp, &data, &opts)?),
        Precision::F64 => summarize(train_model::<f64>(&hp, &data, &opts)?),
    };
    println!("{last_line}");
    println!("best step {best_step}; checkpoint at {}", a.out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn summarize<T: Scalar>(out: gimirec::train::TrainOutput<T>) -> (usize, String) {
    (out.best_step, out.log.last().map(|r| r.log_line()).unwrap_or_default())
}

/// Bundle + run directory + the run's own configuration.
struct Run {
    data: Dataset,
    hp: HyperParams,
    checkpoint: PathBuf,
}

fn load_run(data: &Path, run: &Path) -> Result<Run> {
    let data = read_bundle(data)?;
    let cfg_path = run.join(CONFIG_FILE);
    if !cfg_path.exists() {
        return Err(Error::MissingArtifact {
            path: cfg_path,
            hint: "run `gimirec train` first".into(),
        }
        .into());
    }
    let mut hp = HyperParams::default();
    hp.apply_text(&std::fs::read_to_string(&cfg_path)?)?;
    Ok(Run {
        data,
        hp,
        checkpoint: run.join(CHECKPOINT_FILE),
    })
}

fn split_users<'a>(data: &'a Dataset, split: &str) -> Result<Vec<&'a UserSequence>> {
    Ok(match split {
        "test" => data.select(&data.split.test),
        "valid" => data.select(&data.split.valid),
        "train" => data.select(&data.split.train),
        other => bail!("unknown split `{other}` (train|valid|test)"),
    })
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Run directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_values_t = [20, 50])]
    cutoffs: Vec<usize>,
    /// Also report popularity and random baselines.
    #[arg(long)]
    baselines: bool,
}

fn report_json(r: &MetricsReport) -> Value {
    let at: BTreeMap<String, Value> = r
        .at
        .iter()
        .map(|(n, m)| (n.to_string(), json!({"recall": m.recall, "ndcg": m.ndcg, "hit_rate": m.hit_rate})))
        .collect();
    json!({"users": r.users, "metrics": at})
}

pub fn eval(a: &EvalArgs, p: Precision) -> Result<()> {
    let run = load_run(&a.data, &a.run)?;
    let users = split_users(&run.data, &a.split)?;
    let report = match p {
        Precision::F32 => eval_with::<f32>(&run, &users, &a.cutoffs)?,
        Precision::F64 => eval_with::<f64>(&run, &users, &a.cutoffs)?,
    };
    let config: BTreeMap<String, String> = run
        .hp
        .to_kv_string()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned())))
        .collect();
    let mut out = json!({
        "split": a.split,
        "precision": format!("{p:?}").to_lowercase(),
        "checkpoint": run.checkpoint.display().to_string(),
        "model": report_json(&report),
        "config": config,
        "build": {
            "version": env!("CARGO_PKG_VERSION"),
            "git": env!("GIMIREC_GIT_DESCRIBE"),
        },
    });
    if a.baselines {
        let pop = evaluate_ranker(&users, &PopularityRanker::new(run.data.num_items(), run.data.train_sequences()), &a.cutoffs)?;
        let rnd = evaluate_ranker(
            &users,
            &RandomRanker {
                num_items: run.data.num_items(),
                seed: run.hp.seed,
            },
            &a.cutoffs,
        )?;
        out["popularity"] = report_json(&pop);
        out["random"] = report_json(&rnd);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn load_model<T: Scalar>(run: &Run) -> Result<(ModelParams<T>, gimirec::CsrMatrix<T>, ModelConfig)> {
    let n = run.data.num_items();
    let (dims, params) = read_checkpoint::<T>(&run.checkpoint)?;
    if dims != gimirec::ModelDims::from_hyper(&run.hp, n) {
        bail!("checkpoint dimensions {dims:?} do not match the run config and bundle");
    }
    let (_, adj) = build_from_sequences::<T, _>(run.data.train_sequences(), &run.hp, n);
    Ok((params, adj.a_norm, ModelConfig::from_hyper(&run.hp, n)))
}

fn eval_with<T: Scalar>(run: &Run, users: &[&UserSequence], cutoffs: &[usize]) -> Result<MetricsReport> {
    let (params, a_norm, cfg) = load_model::<T>(run)?;
    Ok(evaluate(users, &params, &a_norm, &cfg, cutoffs)?)
}

#[derive(Args)]
pub struct RecommendArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    run: PathBuf,
    /// Raw user ids, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    users: Vec<String>,
    #[arg(short = 'n', long, default_value_t = 20)]
    top: usize,
}

pub fn recommend(a: &RecommendArgs, p: Precision) -> Result<()> {
    let run = load_run(&a.data, &a.run)?;
    match p {
        Precision::F32 => recommend_with::<f32>(a, &run),
        Precision::F64 => recommend_with::<f64>(a, &run),
    }
}

fn recommend_with<T: Scalar>(a: &RecommendArgs, run: &Run) -> Result<()> {
    let (params, a_norm, cfg) = load_model::<T>(run)?;
    let e = global_embeddings(&a_norm, &params.item_table);
    for raw in &a.users {
        let Some(u) = run.data.users.get(raw) else {
            bail!("unknown user `{raw}`");
        };
        let seq = &run.data.sequences[u];
        let im = gimirec::serve_eval::infer_interests(seq, seq.len(), &params, &e, &cfg)?;
        let seen: HashSet<usize> = seq.items.iter().copied().collect();
        let items: Vec<&str> = top_n(&im.vectors, &e, a.top, &seen)
            .into_iter()
            .filter_map(|i| run.data.items.raw(i))
            .collect();
        println!("{raw}\t{}", items.join(","));
    }
    Ok(())
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, env = "GIMI_SEED", default_value_t = 7)]
    seed: u64,
    /// Number of random tiny models.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    let report = run_gradcheck(a.seed, a.instances)?;
    println!("{:<24} {:>12}", "tensor", "max rel err");
    for (name, err) in report.per_tensor() {
        println!("{name:<24} {err:>12.3e}");
    }
    let worst = report.max_rel_err();
    let verdict = if report.passed(a.tol) { "PASS" } else { "FAIL" };
    println!("instances={} max rel err {worst:.3e}", report.instances.len());
    println!("max rel err ≤ {:e}: {verdict}", a.tol);
    if verdict == "FAIL" {
        std::process::exit(1);
    }
    Ok(())
}

#[derive(Args)]
pub struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Training seeds averaged per variant.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value = "test")]
    split: String,
    #[command(flatten)]
    hyper: HyperArgs,
}

pub fn ablate(a: &AblateArgs, p: Precision) -> Result<()> {
    let base = a.hyper.resolve()?;
    let data = read_bundle(&a.data)?;
    let users = split_users(&data, &a.split)?;
    let cutoffs = [20, 50];
    println!(
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "variant", "R@20", "N@20", "H@20", "R@50", "N@50", "H@50"
    );
    for v in AblationVariant::ALL {
        let mut sums = [0.0f64; 6];
        for s in 0..a.seeds {
            let mut hp = base.clone();
            hp.variant = v;
            hp.seed = base.seed + s;
            let r = match p {
                Precision::F32 => ablate_one::<f32>(&hp, &data, &users, &cutoffs)?,
                Precision::F64 => ablate_one::<f64>(&hp, &data, &users, &cutoffs)?,
            };
            for (i, n) in cutoffs.iter().enumerate() {
                let m = r.get(*n);
                sums[3 * i] += m.recall;
                sums[3 * i + 1] += m.ndcg;
                sums[3 * i + 2] += m.hit_rate;
            }
        }
        let k = a.seeds.max(1) as f64;
        let row: Vec<String> = sums.iter().map(|s| format!("{:>8.4}", s / k)).collect();
        println!("{:<8} {}", v.as_str(), row.join(" "));
    }
    Ok(())
}

fn ablate_one<T: Scalar>(hp: &HyperParams, data: &Dataset, users: &[&UserSequence], cutoffs: &[usize]) -> Result<MetricsReport> {
    let out = train_model::<T>(hp, data, &TrainOptions::default())?;
    Ok(evaluate(users, &out.best, &out.adjacency.a_norm, &out.model, cutoffs)?)
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    users: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 40)]
    items_per_cluster: usize,
    /// Space sessions closely instead of months apart.
    #[arg(long)]
    no_interval_signal: bool,
    #[arg(long, env = "GIMI_SEED", default_value_t = 0)]
    seed: u64,
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        users: a.users,
        clusters: a.clusters,
        items_per_cluster: a.items_per_cluster,
        interval_signal: !a.no_interval_signal,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let recs = generate(&cfg);
    write_csv(&a.out, &recs)?;
    println!("wrote {} interactions for {} users to {}", recs.len(), a.users, a.out.display());
    Ok(())
}
