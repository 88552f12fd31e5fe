//! Command-line surface: gen-data, pretrain, train, eval, report.
//!
//! Flags may also come from a `--config` file of `key = value` lines;
//! flags given on the command line win. Errors exit nonzero with a single
//! `error: <kind>: <message>` line on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::data::{
    load_corpus, split, synthesize, Corpus, DatasetSplit, SplitProportions, SynthesisSpec,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_gloss, read_eval_csv, write_eval_csv};
use crate::model::{
    build_graph, load_checkpoint, save_checkpoint, EncoderConfig, ModelParameters, SkeletonGraph,
    UPPER_BODY_27,
};
use crate::numerics::{set_parallelism, Scalar};
use crate::report::{reference_reports, render_report, MethodReport};
use crate::taxonomy::{build_taxonomy, TYPE_COUNT};
use crate::training::{
    fit_examples, pretrain_gloss, train, RunManifest, Strategy, TrainingPlan,
};

#[derive(Parser)]
#[command(
    name = "phonolearn",
    version,
    about = "Train and evaluate sign-language phoneme-type classifiers on pose corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (poses, labels, manifest).
    GenData(GenDataArgs),
    /// Gloss pre-training: encoder plus gloss head.
    Pretrain(PretrainArgs),
    /// Train phoneme heads with one of the three strategies.
    Train(TrainArgs),
    /// Score a checkpoint on a corpus split.
    Eval(EvalArgs),
    /// Merge eval outputs into the accuracy table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    /// Regenerate from an existing manifest instead of building a spec.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total example count.
    #[arg(long)]
    examples: Option<usize>,
    /// Gloss vocabulary size.
    #[arg(long)]
    glosses: Option<usize>,
    /// Frames per example.
    #[arg(long)]
    frames: Option<usize>,
    /// Coordinate noise sigma.
    #[arg(long)]
    noise: Option<f64>,
    /// Active classes per type (capped at each cardinality).
    #[arg(long)]
    active: Option<u32>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Knobs shared by pretrain and train.
#[derive(Args, Clone)]
struct RunOpts {
    /// Key=value defaults file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_max: Option<f64>,
    #[arg(long)]
    lr_min: Option<f64>,
    /// Worker threads for the parallel kernels; 1 = serial reference mode.
    #[arg(long)]
    threads: Option<usize>,
    /// Split proportions train,validation,test (decimals or fractions).
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Encoder channel widths, e.g. 16,32.
    #[arg(long)]
    channels: Option<String>,
    /// Temporal kernel size (odd).
    #[arg(long)]
    kernel: Option<usize>,
    /// Float width: 32 or 64.
    #[arg(long)]
    precision: Option<u32>,
}

#[derive(Args)]
struct PretrainArgs {
    /// Corpus directory.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV path (default: <out>.trace.csv).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// finetune | multitask | curriculum
    #[arg(long)]
    strategy: String,
    /// Phoneme type for finetune: 1..16 or "all".
    #[arg(long, name = "type")]
    type_: Option<String>,
    /// Curriculum interval (epochs between type introductions).
    #[arg(long)]
    e: Option<usize>,
    /// Starting checkpoint (gloss pre-trained base model).
    #[arg(long)]
    init: Option<PathBuf>,
    /// Checkpoint output path (a directory when --type all).
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV path (default: <out>.trace.csv).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which split to score: train | validation | test | all.
    #[arg(long, default_value = "test")]
    split_name: String,
    /// Eval CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Also report gloss accuracy on stderr.
    #[arg(long, default_value_t = false)]
    gloss: bool,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct ReportArgs {
    /// Eval CSV inputs, one per method column.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Column names matching --input order (default: file stems).
    #[arg(long = "name")]
    names: Vec<String>,
    /// Append the previously reported reference columns.
    #[arg(long, default_value_t = false)]
    with_reference: bool,
    /// Write the plain-text table here as well as stdout.
    #[arg(long)]
    text_out: Option<PathBuf>,
    /// Write the CSV form here.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Clap renders usage/help; exit code 2 for usage errors.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {}", e.kind(), msg);
            1
        }
    }
}

// ---- config file ----

struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: expected key = value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigFile(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("config key '{key}' has unparsable value '{raw}'"))
            }),
        }
    }
}

/// flag value, else config value, else default.
fn pick<T: FromStr + Clone>(flag: &Option<T>, config: &ConfigFile, key: &str, default: T) -> Result<T> {
    Ok(flag
        .clone()
        .or(config.get::<T>(key)?)
        .unwrap_or(default))
}

struct ResolvedRun {
    seed: u64,
    epochs: Option<usize>,
    batch_size: usize,
    lr_max: f64,
    lr_min: f64,
    proportions: SplitProportions,
    split_seed: u64,
    channels: Vec<usize>,
    kernel: usize,
    precision: u32,
}

fn resolve_run(opts: &RunOpts) -> Result<ResolvedRun> {
    let config = ConfigFile::load(opts.config.as_deref())?;
    let channels_text: String = pick(&opts.channels, &config, "channels", "16,32".to_string())?;
    let channels: Vec<usize> = channels_text
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad channel width '{p}'")))
        })
        .collect::<Result<_>>()?;
    let split_text: String = pick(&opts.split, &config, "split", "8/11,1/11,2/11".to_string())?;
    let epochs = match opts.epochs {
        Some(e) => Some(e),
        None => config.get::<usize>("epochs")?,
    };
    let threads: usize = pick(&opts.threads, &config, "threads", 0)?;
    set_parallelism(threads != 1);
    if threads > 1 {
        // Ignore failure: the global pool can only be sized once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let precision: u32 = pick(&opts.precision, &config, "precision", 32)?;
    if precision != 32 && precision != 64 {
        return Err(Error::Config(format!("precision {precision} must be 32 or 64")));
    }
    Ok(ResolvedRun {
        seed: pick(&opts.seed, &config, "seed", 42)?,
        epochs,
        batch_size: pick(&opts.batch_size, &config, "batch_size", 32)?,
        lr_max: pick(&opts.lr_max, &config, "lr_max", 1e-3)?,
        lr_min: pick(&opts.lr_min, &config, "lr_min", 1e-5)?,
        proportions: SplitProportions::parse(&split_text)?,
        split_seed: pick(&opts.split_seed, &config, "split_seed", 42)?,
        channels,
        kernel: pick(&opts.kernel, &config, "kernel", 5)?,
        precision,
    })
}

// ---- shared pipeline pieces ----

fn frames_from_corpus(corpus: &Corpus) -> usize {
    corpus
        .manifest
        .as_ref()
        .map(|m| m.frames)
        .or_else(|| corpus.examples.first().map(|e| e.pose.frames))
        .unwrap_or(32)
}

fn prepare_split(
    data_dir: &Path,
    frames: usize,
    resolved: &ResolvedRun,
) -> Result<(Corpus, DatasetSplit)> {
    let mut corpus = load_corpus(data_dir)?;
    fit_examples(&mut corpus.examples, frames);
    let examples = std::mem::take(&mut corpus.examples);
    let s = split(examples, resolved.proportions, resolved.split_seed)?;
    Ok((corpus, s))
}

fn data_manifest_reference(data_dir: &Path) -> (Option<String>, Option<String>) {
    let path = data_dir.join(crate::data::MANIFEST_FILE);
    match std::fs::read(&path) {
        Ok(bytes) => {
            use sha2::{Digest, Sha256};
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            (
                Some(path.display().to_string()),
                Some(hex::encode(hasher.finalize())),
            )
        }
        Err(_) => (None, None),
    }
}

fn encoder_config(resolved: &ResolvedRun, frames: usize) -> EncoderConfig {
    EncoderConfig {
        blocks: resolved.channels.len(),
        channels: resolved.channels.clone(),
        temporal_kernel: resolved.kernel,
        embedding_dim: *resolved.channels.last().unwrap_or(&0),
        joints: 27,
        frames,
    }
}

/// A checkpoint of either float width.
enum AnyModel {
    F32(ModelParameters<f32>),
    F64(ModelParameters<f64>),
}

fn load_any_checkpoint(path: &Path) -> Result<(AnyModel, SkeletonGraph)> {
    match load_checkpoint::<f32>(path) {
        Ok((params, graph)) => Ok((AnyModel::F32(params), graph)),
        Err(Error::Validation(msg)) if msg.contains("dtype") => {
            let (params, graph) = load_checkpoint::<f64>(path)?;
            Ok((AnyModel::F64(params), graph))
        }
        Err(e) => Err(e),
    }
}

// ---- commands ----

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let config = ConfigFile::load(args.config.as_deref())?;
    let spec = match &args.from_manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SynthesisSpec>(&text)
                .map_err(|e| Error::format(path, e.to_string()))?
        }
        None => SynthesisSpec::build(
            pick(&args.seed, &config, "seed", 42)?,
            pick(&args.examples, &config, "examples", 2750)?,
            pick(&args.glosses, &config, "glosses", 20)?,
            pick(&args.frames, &config, "frames", 32)?,
            pick(&args.noise, &config, "noise", 0.01)?,
            pick(&args.active, &config, "active", 4)?,
        ),
    };
    let graph = build_graph(UPPER_BODY_27)?;
    let examples = synthesize(&spec, &graph)?;
    crate::data::write_corpus(&args.out, &spec, &examples)?;
    println!(
        "wrote {} examples ({} glosses, {} frames, sigma {}) to {}",
        examples.len(),
        spec.gloss_count,
        spec.frames,
        spec.noise_sigma,
        args.out.display()
    );
    Ok(())
}

fn run_pretrain<E: Scalar>(
    args: &PretrainArgs,
    resolved: &ResolvedRun,
    corpus: &Corpus,
    dataset: &DatasetSplit,
    frames: usize,
) -> Result<()> {
    let taxonomy = build_taxonomy();
    let graph = build_graph(UPPER_BODY_27)?;
    let config = encoder_config(resolved, frames);
    let mut params =
        ModelParameters::<E>::init(config, &taxonomy, corpus.gloss_count, resolved.seed)?;
    let plan = TrainingPlan {
        strategy: Strategy::Multitask, // unused by gloss pre-training
        total_epochs: resolved.epochs.unwrap_or(10),
        curriculum_interval: 1,
        batch_size: resolved.batch_size,
        lr_max: resolved.lr_max,
        lr_min: resolved.lr_min,
        seed: resolved.seed,
        pretrained_checkpoint: None,
    };
    let trace = pretrain_gloss(&mut params, &graph, dataset, &plan)?;
    save_checkpoint(&args.out, &params, &graph)?;
    let (data_manifest, data_manifest_hash) = data_manifest_reference(&args.data);
    RunManifest {
        plan,
        taxonomy_hash: taxonomy.hash(),
        data_manifest,
        data_manifest_hash,
    }
    .write(&manifest_path(&args.out))?;
    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| trace_path_for(&args.out));
    trace.write_csv(&trace_path)?;
    if let Some(last) = trace.epochs.last() {
        println!(
            "pretrained {} epochs; final gloss loss {:.4}, val acc {}",
            trace.epochs.len(),
            last.loss,
            last.val_accuracy
                .map(|v| format!("{v:.1}%"))
                .unwrap_or_else(|| "n/a".to_string())
        );
    }
    println!("checkpoint: {}", args.out.display());
    Ok(())
}

fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    checkpoint.with_file_name(name)
}

fn trace_path_for(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".trace.csv");
    checkpoint.with_file_name(name)
}

fn cmd_pretrain(args: PretrainArgs) -> Result<()> {
    let resolved = resolve_run(&args.opts)?;
    let probe_frames = {
        let corpus = load_corpus(&args.data)?;
        frames_from_corpus(&corpus)
    };
    let (corpus, dataset) = prepare_split(&args.data, probe_frames, &resolved)?;
    match resolved.precision {
        64 => run_pretrain::<f64>(&args, &resolved, &corpus, &dataset, probe_frames),
        _ => run_pretrain::<f32>(&args, &resolved, &corpus, &dataset, probe_frames),
    }
}

fn parse_strategy(args: &TrainArgs, resolved: &ResolvedRun) -> Result<(Vec<Strategy>, usize, usize)> {
    // Returns (runs, total_epochs default, curriculum interval).
    let interval = args.e.unwrap_or(3);
    match args.strategy.as_str() {
        "multitask" => Ok((vec![Strategy::Multitask], resolved.epochs.unwrap_or(24), interval)),
        "curriculum" => {
            let total = resolved.epochs.unwrap_or(TYPE_COUNT * interval);
            Ok((vec![Strategy::Curriculum], total, interval))
        }
        "finetune" => {
            let type_arg = args.type_.as_deref().ok_or_else(|| {
                Error::Usage("finetune requires --type <1..16|all>".into())
            })?;
            let runs = if type_arg == "all" {
                (1..=TYPE_COUNT)
                    .map(|type_id| Strategy::Finetune { type_id })
                    .collect()
            } else {
                let type_id: usize = type_arg.parse().map_err(|_| {
                    Error::Usage(format!("--type '{type_arg}' must be 1..16 or 'all'"))
                })?;
                vec![Strategy::Finetune { type_id }]
            };
            Ok((runs, resolved.epochs.unwrap_or(12), interval))
        }
        other => Err(Error::Usage(format!(
            "unknown strategy '{other}' (expected finetune, multitask, or curriculum)"
        ))),
    }
}

fn run_train<E: Scalar>(
    args: &TrainArgs,
    resolved: &ResolvedRun,
    corpus: &Corpus,
    dataset: &DatasetSplit,
    frames: usize,
    runs: &[Strategy],
    total_epochs: usize,
    interval: usize,
) -> Result<()> {
    let taxonomy = build_taxonomy();
    let many = runs.len() > 1;
    if many {
        std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    }
    for strategy in runs {
        let (mut params, graph) = match &args.init {
            Some(ckpt) => {
                let (params, graph) = load_checkpoint::<E>(ckpt)?;
                if params.gloss_count != corpus.gloss_count {
                    return Err(Error::Validation(format!(
                        "checkpoint gloss vocabulary {} does not match corpus {}",
                        params.gloss_count, corpus.gloss_count
                    )));
                }
                (params, graph)
            }
            None => {
                let config = encoder_config(resolved, frames);
                let params = ModelParameters::<E>::init(
                    config,
                    &taxonomy,
                    corpus.gloss_count,
                    resolved.seed,
                )?;
                (params, build_graph(UPPER_BODY_27)?)
            }
        };
        if let Strategy::Finetune { type_id } = strategy {
            // Heads start from the init scheme, one fresh draw per type.
            let head_seed =
                crate::data::splitmix64(resolved.seed ^ (*type_id as u64) << 32 | 0x66);
            params.reinit_phoneme_heads(&taxonomy, head_seed);
        }
        let plan = TrainingPlan {
            strategy: *strategy,
            total_epochs,
            curriculum_interval: interval,
            batch_size: resolved.batch_size,
            lr_max: resolved.lr_max,
            lr_min: resolved.lr_min,
            seed: resolved.seed,
            pretrained_checkpoint: args.init.clone(),
        };
        let trace = train(&mut params, &graph, dataset, &plan)?;
        let out_path = if many {
            let Strategy::Finetune { type_id } = strategy else {
                unreachable!("multi-run is finetune-only")
            };
            args.out.join(format!("type{type_id:02}.json"))
        } else {
            args.out.clone()
        };
        save_checkpoint(&out_path, &params, &graph)?;
        let (data_manifest, data_manifest_hash) = data_manifest_reference(&args.data);
        RunManifest {
            plan,
            taxonomy_hash: taxonomy.hash(),
            data_manifest,
            data_manifest_hash,
        }
        .write(&manifest_path(&out_path))?;
        let trace_path = if many {
            trace_path_for(&out_path)
        } else {
            args.trace.clone().unwrap_or_else(|| trace_path_for(&out_path))
        };
        trace.write_csv(&trace_path)?;
        let last_k = trace.epochs.last().map(|r| r.active_types).unwrap_or(0);
        println!(
            "trained {:?} for {} epochs (final k={last_k}); checkpoint: {}",
            strategy,
            trace.epochs.len(),
            out_path.display()
        );
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let resolved = resolve_run(&args.opts)?;
    let (runs, total_epochs, interval) = parse_strategy(&args, &resolved)?;
    // Geometry follows the starting checkpoint when given.
    let frames = match &args.init {
        Some(ckpt) => match load_any_checkpoint(ckpt)? {
            (AnyModel::F32(p), _) => p.config.frames,
            (AnyModel::F64(p), _) => p.config.frames,
        },
        None => {
            let corpus = load_corpus(&args.data)?;
            frames_from_corpus(&corpus)
        }
    };
    let (corpus, dataset) = prepare_split(&args.data, frames, &resolved)?;
    match resolved.precision {
        64 => run_train::<f64>(
            &args, &resolved, &corpus, &dataset, frames, &runs, total_epochs, interval,
        ),
        _ => run_train::<f32>(
            &args, &resolved, &corpus, &dataset, frames, &runs, total_epochs, interval,
        ),
    }
}

fn eval_model<E: Scalar>(
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
    examples: &[crate::data::LabeledExample],
    out: &Path,
    gloss: bool,
) -> Result<()> {
    let refs: Vec<&crate::data::LabeledExample> = examples.iter().collect();
    let accuracies = evaluate(params, graph, &refs)?;
    write_eval_csv(out, &accuracies)?;
    let mean: f64 =
        accuracies.values().map(|a| a.percent()).sum::<f64>() / accuracies.len() as f64;
    println!(
        "evaluated {} examples; mean per-type top-1 accuracy {mean:.1}%",
        examples.len()
    );
    if gloss {
        let g = evaluate_gloss(params, graph, &refs)?;
        println!("gloss accuracy {:.1}%", g.percent());
    }
    println!("eval csv: {}", out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let resolved = resolve_run(&args.opts)?;
    let (model, graph) = load_any_checkpoint(&args.checkpoint)?;
    let frames = match &model {
        AnyModel::F32(p) => p.config.frames,
        AnyModel::F64(p) => p.config.frames,
    };
    let taxonomy_hash = match &model {
        AnyModel::F32(p) => p.taxonomy_hash.clone(),
        AnyModel::F64(p) => p.taxonomy_hash.clone(),
    };
    let (corpus, dataset) = prepare_split(&args.data, frames, &resolved)?;
    if let Some(manifest) = &corpus.manifest {
        if !manifest.taxonomy_hash.is_empty() && manifest.taxonomy_hash != taxonomy_hash {
            return Err(Error::Validation(format!(
                "checkpoint taxonomy hash {} does not match corpus manifest hash {}",
                taxonomy_hash, manifest.taxonomy_hash
            )));
        }
    }
    let examples: Vec<crate::data::LabeledExample> = match args.split_name.as_str() {
        "train" => dataset.train,
        "validation" => dataset.validation,
        "test" => dataset.test,
        "all" => {
            let mut all = dataset.train;
            all.extend(dataset.validation);
            all.extend(dataset.test);
            all
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown split '{other}' (expected train, validation, test, or all)"
            )))
        }
    };
    match model {
        AnyModel::F32(params) => eval_model(&params, &graph, &examples, &args.out, args.gloss),
        AnyModel::F64(params) => eval_model(&params, &graph, &examples, &args.out, args.gloss),
    }
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    if !args.names.is_empty() && args.names.len() != args.inputs.len() {
        return Err(Error::Usage(format!(
            "{} --name values for {} --input files",
            args.names.len(),
            args.inputs.len()
        )));
    }
    let mut methods = Vec::new();
    for (i, input) in args.inputs.iter().enumerate() {
        let per_type = read_eval_csv(input)?;
        let name = args
            .names
            .get(i)
            .cloned()
            .unwrap_or_else(|| {
                input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("method{}", i + 1))
            });
        methods.push(MethodReport { name, per_type });
    }
    if args.with_reference {
        methods.extend(reference_reports());
    }
    let rendered = render_report(&methods)?;
    print!("{}", rendered.text);
    if let Some(path) = &args.text_out {
        std::fs::write(path, &rendered.text).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &args.csv_out {
        std::fs::write(path, &rendered.csv).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
