use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use capcomp_core::data::{
    generate_pairs_limited, generate_same_image_pairs, ingest_dataset, read_pairs, split, write_jsonl, write_pairs,
    Dataset, IngestFormat, PairSamplingConfig, SplitSpec,
};
use capcomp_core::metrics::{agreement_matrix, pairwise_accuracy, MetricsReport, RaterMatrix};
use capcomp_core::protocols::{evaluate_model, run_same_image_protocol, run_sweep_n, score_map, ITEM_TRAIN_FRACTION};
use capcomp_core::scorer::{load_checkpoint, save_checkpoint};
use capcomp_core::synthetic::{generate, SyntheticConfig};
use capcomp_core::training::{train_pairwise, train_regression, TrainConfig, TrainReport};
use capcomp_core::{seed, study, Error};
use capcomp_service::{ServiceConfig, ServiceError, SessionPolicy};
use serde::Serialize;

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericFailure(_) => CliError::Numeric(e.to_string()),
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::GenPairs(a) => gen_pairs(a),
        Command::TrainReg(a) => train_reg(a),
        Command::TrainPair(a) => train_pair(a),
        Command::Eval(a) => eval(a),
        Command::SweepN(a) => sweep(a),
        Command::SameImage(a) => same_image(a),
        Command::Agreement(a) => agreement(a),
        Command::Serve(a) => serve(a),
    }
}

/// Prints `text` and, with `out`, writes `report` as pretty JSON.
fn emit<T: Serialize>(out: Option<&Path>, report: &T, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        let mut json = serde_json::to_string_pretty(report).map_err(|e| CliError::Data(e.to_string()))?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn load_data(a: &DataArgs) -> Result<Dataset> {
    let format = match (&a.store, a.image_dim) {
        (Some(store), Some(image_dim)) => IngestFormat::BinaryEmbeddings {
            store: store.clone(),
            image_dim,
        },
        _ => IngestFormat::Jsonl,
    };
    Ok(ingest_dataset(&a.data, &format)?)
}

fn normalized(ds: Dataset) -> Result<Dataset> {
    Ok(if ds.is_normalized() {
        ds
    } else {
        ds.normalize_ratings()?
    })
}

/// The fixed item-level split every training and evaluation command shares.
fn item_split(ds: &Dataset) -> Result<(Dataset, Dataset)> {
    Ok(split(ds, &SplitSpec::sequential(ITEM_TRAIN_FRACTION))?)
}

fn load_config(a: &ConfigArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn metrics_table(title: &str, m: &MetricsReport) -> String {
    format!(
        "{title}\n{:>8}  {:>8}  {:>8}  {:>8}\n{:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}\n",
        "MSE", "MAE", "pearson", "spearman", m.mse, m.mae, m.pearson, m.spearman
    )
}

#[derive(Serialize)]
struct IngestSummary {
    items: usize,
    images: usize,
    multi_caption_images: usize,
    image_dim: usize,
    text_dim: usize,
    rating_min: f64,
    rating_max: f64,
    rating_mean: f64,
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let ys = ds.ratings();
    let summary = IngestSummary {
        items: ds.len(),
        images: ds.image_groups().len(),
        multi_caption_images: ds.image_groups().values().filter(|g| g.len() > 1).count(),
        image_dim: ds.dims().image,
        text_dim: ds.dims().text,
        rating_min: ys.iter().copied().fold(f64::INFINITY, f64::min),
        rating_max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        rating_mean: ys.iter().sum::<f64>() / ys.len().max(1) as f64,
    };
    if let Some(path) = &a.export {
        write_jsonl(&ds, path)?;
    }
    let s = &summary;
    let text = format!(
        "items {}  images {} ({} with several captions)  dims {}+{}  ratings {:.3}..{:.3} mean {:.4}\n",
        s.items, s.images, s.multi_caption_images, s.image_dim, s.text_dim, s.rating_min, s.rating_max, s.rating_mean
    );
    emit(a.out.as_deref(), &summary, &text)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = if a.multi_caption {
        SyntheticConfig::multi_caption(a.seed)
    } else {
        SyntheticConfig::linear(a.seed)
    };
    if let Some(n) = a.images {
        cfg.images = n;
    }
    if let Some(k) = a.captions {
        cfg.captions_per_image = k;
    }
    let ds = generate(&cfg)?;
    write_jsonl(&ds, &a.out)?;
    println!("wrote {} items to {}", ds.len(), a.out.display());
    Ok(())
}

fn gen_pairs(a: GenPairsArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let pairs = if a.same_image {
        generate_same_image_pairs(&ds)
    } else {
        let pool = if a.all_items { ds } else { item_split(&ds)?.0 };
        generate_pairs_limited(&pool, &PairSamplingConfig::new(a.n, seed::derive(a.seed, "pairs")))?
    };
    write_pairs(&pairs, &a.out)?;
    println!("wrote {} pairs to {}", pairs.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainOutput {
    model: &'static str,
    config: TrainConfig,
    train_items: usize,
    test_items: usize,
    pairs: Option<usize>,
    training: TrainReport,
    test: MetricsReport,
}

fn train_reg(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let (train, test) = item_split(&normalized(load_data(&a.data)?)?)?;
    let (model, report) = train_regression(&train, &cfg)?;
    let metrics = evaluate_model(&model, &test)?;
    tracing::info!(secs = report.wall_time_secs, "regression training finished");
    save_checkpoint(&model, &a.checkpoint)?;
    let text = metrics_table("regression model, test split", &metrics);
    let out = TrainOutput {
        model: "regression",
        config: cfg,
        train_items: train.len(),
        test_items: test.len(),
        pairs: None,
        training: report,
        test: metrics,
    };
    emit(a.out.as_deref(), &out, &text)
}

fn train_pair(a: TrainPairArgs) -> Result<()> {
    let cfg = load_config(&a.train.config)?;
    let (train, test) = item_split(&normalized(load_data(&a.train.data)?)?)?;
    let pairs = match &a.pairs {
        Some(p) => read_pairs(p)?,
        None => generate_pairs_limited(&train, &PairSamplingConfig::new(a.n, seed::derive(cfg.seed, "pairs")))?,
    };
    let (model, report) = train_pairwise(&train, &pairs, &cfg)?;
    let metrics = evaluate_model(&model, &test)?;
    tracing::info!(secs = report.wall_time_secs, "comparative training finished");
    save_checkpoint(&model, &a.train.checkpoint)?;
    let text = metrics_table(
        &format!("comparative model ({} pairs), test split", pairs.len()),
        &metrics,
    );
    let out = TrainOutput {
        model: "comparative",
        config: cfg,
        train_items: train.len(),
        test_items: test.len(),
        pairs: Some(pairs.len()),
        training: report,
        test: metrics,
    };
    emit(a.train.out.as_deref(), &out, &text)
}

#[derive(Serialize)]
struct EvalOutput {
    items: usize,
    metrics: MetricsReport,
    pairs: Option<usize>,
    pairwise_accuracy: Option<f64>,
}

fn eval(a: EvalArgs) -> Result<()> {
    let ds = normalized(load_data(&a.data)?)?;
    let model = load_checkpoint(&a.checkpoint)?;
    if model.input_dim() != ds.input_dim() {
        return Err(CliError::Data(format!(
            "checkpoint expects {}-d input, dataset has {}",
            model.input_dim(),
            ds.input_dim()
        )));
    }
    let target = if a.all_items { ds.clone() } else { item_split(&ds)?.1 };
    let metrics = evaluate_model(&model, &target)?;
    let mut text = metrics_table(if a.all_items { "all items" } else { "test split" }, &metrics);
    let (mut n_pairs, mut accuracy) = (None, None);
    if let Some(p) = &a.pairs {
        let pairs = read_pairs(p)?;
        let scores: HashMap<String, f64> = score_map(&model, &ds)?;
        let acc = pairwise_accuracy(&scores, &pairs)?;
        let _ = writeln!(text, "pairwise accuracy {acc:.4} over {} pairs", pairs.len());
        n_pairs = Some(pairs.len());
        accuracy = Some(acc);
    }
    let out = EvalOutput {
        items: target.len(),
        metrics,
        pairs: n_pairs,
        pairwise_accuracy: accuracy,
    };
    emit(a.out.as_deref(), &out, &text)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = load_config(&ConfigArgs {
        config: a.config.clone(),
        seed: None,
    })?;
    let table = run_sweep_n(&load_data(&a.data)?, &a.n_values, &a.seeds, &cfg)?;
    emit(a.out.as_deref(), &table, &table.render_text())
}

fn same_image(a: SameImageArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let table = run_same_image_protocol(&load_data(&a.data)?, a.runs, &cfg)?;
    emit(a.out.as_deref(), &table, &table.render_text())
}

fn agreement(a: AgreementArgs) -> Result<()> {
    let m = match (&a.source.data, a.source.study) {
        (Some(p), _) => RaterMatrix::from_csv_path(p)?,
        (None, Some(n)) => study::task(n)?,
        (None, None) => return Err(CliError::Usage("one of --data or --study is required".into())),
    };
    let table = agreement_matrix(&m)?;
    emit(a.out.as_deref(), &table, &table.render_text())
}

fn serve(a: ServeArgs) -> Result<()> {
    let cfg = ServiceConfig {
        data_dir: a.data_dir,
        bank_files: a.banks,
        static_dir: a.static_dir,
        media_dir: a.media_dir,
        policy: match a.session_policy {
            Policy::Replace => SessionPolicy::Replace,
            Policy::Reject => SessionPolicy::Reject,
        },
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    eprintln!("serving on http://{}", a.serve_addr);
    rt.block_on(capcomp_service::serve(a.serve_addr, &cfg))?;
    Ok(())
}
