use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use hybridfm::ann::{top_k_exact, RpForest};
use hybridfm::eval::{
    dimension_sweep, run_experiment, warm_split, write_results_table, write_sweep_table, ExperimentConfig, SplitKind,
    SyntheticConfig,
};
use hybridfm::ingest::{self, Dataset, ModelKind};
use hybridfm::{fit, load_model_file, save_model_file, ModelState, Side, TrainConfig};

mod config;

use config::{default_threads, pick, FileConfig};

#[derive(Parser)]
#[command(name = "hybridfm", version, about = "Hybrid matrix factorisation recommender")]
struct Cli {
    /// TOML file with default settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw corpus into the canonical dataset directory
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Train a factorisation model on a dataset directory
    Train(TrainArgs),
    /// Nearest neighbours of a feature or item in a trained model
    Similar(SimilarArgs),
    /// Repeated split/train/evaluate runs, printed as a results table
    Experiment(ExperimentArgs),
    /// Test AUC against latent dimensionality
    Sweep(SweepArgs),
    /// Generate a synthetic dataset with planted tag groups
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum IngestCommand {
    /// MovieLens ratings plus optional genres and tag genome
    Movielens(MovielensArgs),
    /// StackExchange Posts.xml and Users.xml dumps
    Stackexchange(StackexchangeArgs),
}

#[derive(Args)]
struct MovielensArgs {
    /// Ratings file (user::item::rating::timestamp)
    #[arg(long)]
    ratings: PathBuf,
    /// Movies file (id::title::genres)
    #[arg(long)]
    movies: Option<PathBuf>,
    /// Tag relevance rows (item, tag, relevance)
    #[arg(long)]
    genome: Option<PathBuf>,
    /// Tag id to name table, when the genome rows carry tag ids
    #[arg(long)]
    genome_tags: Option<PathBuf>,
    /// Minimum relevance for a tag to be kept
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StackexchangeArgs {
    #[arg(long)]
    posts: PathBuf,
    #[arg(long)]
    users: PathBuf,
    /// Negatives sampled per positive
    #[arg(long)]
    negative_ratio: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainingFlags {
    /// Latent dimensionality
    #[arg(long)]
    d: Option<usize>,
    /// Adagrad base learning rate
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Maximum number of epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Non-improving epochs tolerated before early stopping
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[command(flatten)]
    training: TrainingFlags,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-epoch history table here
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "query")]
struct SimilarQuery {
    /// Item feature (tag) name
    #[arg(long)]
    tag: Option<String>,
    /// User feature name
    #[arg(long)]
    user_feature: Option<String>,
    /// Item name; needs --dataset to resolve item names
    #[arg(long, requires = "dataset")]
    item: Option<String>,
}

#[derive(Args)]
struct SimilarArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    query: SimilarQuery,
    /// Dataset the model was trained on (for --item)
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Use an RP-tree forest instead of exhaustive search
    #[arg(long)]
    approximate: bool,
    #[arg(long, default_value_t = 8)]
    trees: usize,
    #[arg(long, default_value_t = 64)]
    leaf_capacity: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset label in the table; defaults to the directory name
    #[arg(long)]
    name: Option<String>,
    /// Comma-separated models; defaults to every model the dataset supports
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Vec<ModelKind>,
    /// Comma-separated splits (warm, cold)
    #[arg(long, value_delimiter = ',', value_parser = parse_split, default_value = "warm,cold")]
    split: Vec<SplitKind>,
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    training: TrainingFlags,
    /// Share of pairs (warm) or items (cold) held out
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Write `model dataset split seed auc` rows here
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_model, default_value = "lightfm-tags,lsi-lr,lsi-up")]
    models: Vec<ModelKind>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128,256,512")]
    dims: Vec<usize>,
    #[arg(long, value_parser = parse_split, default_value = "cold")]
    split: SplitKind,
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    training: TrainingFlags,
    #[arg(long)]
    test_fraction: Option<f64>,
}

/// Generator settings; every field may also come from `--params`.
#[derive(Args, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthParams {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    tags: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    tags_per_item: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    per_user: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with generator settings
    #[arg(long = "params")]
    params_file: Option<PathBuf>,
    #[command(flatten)]
    params: SynthParams,
    #[arg(long)]
    out: PathBuf,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: hybridfm::Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<SplitKind, String> {
    s.parse().map_err(|e: hybridfm::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Ingest(IngestCommand::Movielens(a)) => ingest_movielens(a, &file, &mut out)?,
        Command::Ingest(IngestCommand::Stackexchange(a)) => ingest_stackexchange(a, &file, &mut out)?,
        Command::Train(a) => train(a, &file, &mut out)?,
        Command::Similar(a) => similar(a, &mut out)?,
        Command::Experiment(a) => experiment(a, &file, &mut out)?,
        Command::Sweep(a) => sweep(a, &file, &mut out)?,
        Command::Synth(a) => synth(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_dir(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn dataset_summary(d: &Dataset, out: &mut impl Write) -> Result<()> {
    writeln!(out, "users\t{}", d.n_users())?;
    writeln!(out, "items\t{}", d.n_items())?;
    writeln!(out, "positives\t{}", d.interactions.positives().count())?;
    writeln!(out, "negatives\t{}", d.interactions.negatives().count())?;
    writeln!(out, "tags\t{}", d.tag_vocabulary().len())?;
    Ok(())
}

fn ingest_movielens(a: MovielensArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let threshold = pick(a.threshold, file.threshold, ingest::DEFAULT_GENOME_THRESHOLD);
    let ratings = ingest::parse_ratings(open(&a.ratings)?).with_context(|| format!("in {}", a.ratings.display()))?;
    let movies = match &a.movies {
        Some(p) => ingest::parse_movies(open(p)?).with_context(|| format!("in {}", p.display()))?,
        None => Vec::new(),
    };
    let mut tags = match &a.genome {
        Some(p) => ingest::parse_tag_genome(open(p)?, threshold).with_context(|| format!("in {}", p.display()))?,
        None => Vec::new(),
    };
    if let Some(p) = &a.genome_tags {
        let names = ingest::parse_genome_tags(open(p)?).with_context(|| format!("in {}", p.display()))?;
        for t in &mut tags {
            t.tag = names
                .get(&t.tag)
                .with_context(|| format!("tag id {} missing from {}", t.tag, p.display()))?
                .clone();
        }
    }
    let dataset = ingest::movielens_dataset(&ratings, &movies, &tags)?;
    dataset.write_dir(&a.out)?;
    dataset_summary(&dataset, out)
}

fn ingest_stackexchange(a: StackexchangeArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let ratio = pick(a.negative_ratio, file.negative_ratio, ingest::DEFAULT_NEGATIVE_RATIO);
    let seed = pick(a.seed, file.seed, 0);
    let raw = ingest::parse_stackexchange(open(&a.posts)?, open(&a.users)?)?;
    if raw.anonymous_answers > 0 {
        log::info!("ignored {} answers without an owner", raw.anonymous_answers);
    }
    let dataset = ingest::stackexchange_dataset(&raw, ratio, seed)?;
    dataset.write_dir(&a.out)?;
    dataset_summary(&dataset, out)?;
    writeln!(out, "skipped_answers\t{}", raw.skipped_answers)?;
    Ok(())
}

struct Resolved {
    dim: usize,
    train: TrainConfig,
}

fn resolve_training(flags: &TrainingFlags, file: &FileConfig) -> Result<Resolved> {
    let defaults = TrainConfig::default();
    let train = TrainConfig {
        learning_rate: pick(flags.lr, file.lr, defaults.learning_rate),
        epochs_max: pick(flags.epochs, file.epochs, defaults.epochs_max),
        threads: match flags.threads.or(file.threads) {
            Some(t) => t,
            None => default_threads()?,
        },
        patience: pick(flags.patience, file.patience, defaults.patience),
        seed: pick(flags.seed, file.seed, defaults.seed),
    };
    train.validate()?;
    let dim = pick(flags.d, file.d, ExperimentConfig::default().dim);
    if dim == 0 {
        bail!("--d must be positive");
    }
    Ok(Resolved { dim, train })
}

fn train(a: TrainArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let Some(variant) = a.model.feature_variant() else {
        bail!("`train` builds factorisation models; {} is only available in `experiment`", a.model);
    };
    let settings = resolve_training(&a.training, file)?;
    let dataset = read_dataset(&a.dataset)?;
    let mapping = dataset.feature_mapping(variant)?;
    // no test set: only the validation carve-out for early stopping
    let split = warm_split(&dataset.interactions, 0.0, settings.train.seed)?;
    let mut model = ModelState::for_mapping(settings.dim, &mapping, settings.train.seed)?;
    let history = fit(&mut model, &mapping, &split.train, &split.validation, &settings.train)?;
    save_model_file(&model, &mapping, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.history {
        history.write_table(BufWriter::new(File::create(path)?))?;
    }
    history.write_table(out)?;
    Ok(())
}

fn to_f64(rows: Vec<Vec<f32>>) -> Vec<Vec<f64>> {
    rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect()
}

fn similar(a: SimilarArgs, out: &mut impl Write) -> Result<()> {
    let (model, mapping) = load_model_file(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let (table, names, query): (Vec<Vec<f64>>, Vec<String>, usize) = if let Some(item) = &a.query.item {
        let dataset = read_dataset(a.dataset.as_deref().expect("clap enforces --dataset"))?;
        if dataset.n_items() != mapping.n_items() {
            bail!(
                "dataset has {} items but the model was trained on {}",
                dataset.n_items(),
                mapping.n_items()
            );
        }
        let id = dataset.items.index_of(item).with_context(|| format!("unknown item `{item}`"))?;
        let reps = model.representations(&mapping)?;
        let table = (0..mapping.n_items() as u32)
            .map(|i| reps.item(i).expect("in range").to_vec())
            .collect();
        (table, dataset.items.iter().map(str::to_owned).collect(), id)
    } else {
        let (side, name) = match (&a.query.tag, &a.query.user_feature) {
            (Some(t), _) => (Side::Item, t),
            (_, Some(u)) => (Side::User, u),
            _ => unreachable!("clap requires one query"),
        };
        let vocab = mapping.features(side);
        let id = vocab.index_of(name).with_context(|| format!("unknown {side} feature `{name}`"))?;
        (to_f64(model.embedding_rows(side)), vocab.iter().map(str::to_owned).collect(), id)
    };

    let results = if a.approximate {
        let q = table[query].clone();
        RpForest::build(table, a.trees, a.leaf_capacity, a.seed)?.query(&q, a.k, Some(query))?
    } else {
        let k = a.k.min(table.len().saturating_sub(1));
        top_k_exact(&table, query, k)?
    };
    for (rank, (id, cosine)) in results.iter().enumerate() {
        writeln!(out, "{}\t{}\t{cosine:.6}", rank + 1, names[*id])?;
    }
    Ok(())
}

fn experiment_config(flags: &TrainingFlags, test_fraction: Option<f64>, file: &FileConfig) -> Result<ExperimentConfig> {
    let settings = resolve_training(flags, file)?;
    let defaults = ExperimentConfig::default();
    Ok(ExperimentConfig {
        dim: settings.dim,
        train: settings.train,
        test_fraction: pick(test_fraction, file.test_fraction, defaults.test_fraction),
        lsi_l2: file.l2.unwrap_or(defaults.lsi_l2),
    })
}

fn seeds(reps: Option<usize>, base: u64, file: &FileConfig) -> Result<Vec<u64>> {
    let reps = pick(reps, file.reps, 10);
    if reps == 0 {
        bail!("--reps must be positive");
    }
    Ok((0..reps as u64).map(|k| base + k).collect())
}

fn dataset_name(path: &Path, name: Option<String>) -> String {
    name.unwrap_or_else(|| {
        path.file_name()
            .map_or_else(|| "dataset".to_owned(), |n| n.to_string_lossy().into_owned())
    })
}

fn experiment(a: ExperimentArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let config = experiment_config(&a.training, a.test_fraction, file)?;
    let seeds = seeds(a.reps, config.train.seed, file)?;
    let dataset = read_dataset(&a.dataset)?;
    let name = dataset_name(&a.dataset, a.name);
    let models = if a.models.is_empty() {
        ModelKind::ALL
            .into_iter()
            .filter(|m| m.feature_variant().is_none_or(|v| !v.needs_user_metadata()) || dataset.has_user_metadata())
            .collect()
    } else {
        a.models
    };
    let mut reports = Vec::new();
    for &model in &models {
        for &split in &a.split {
            reports.push(run_experiment(model, &dataset, &name, split, &config, &seeds)?);
        }
    }
    if let Some(path) = &a.details {
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(f, "model\tdataset\tsplit\tseed\tauc")?;
        for r in &reports {
            for (seed, auc) in seeds.iter().zip(&r.aucs) {
                writeln!(f, "{}\t{}\t{}\t{seed}\t{auc:.6}", r.model, r.dataset, r.split)?;
            }
        }
        f.flush()?;
    }
    write_results_table(&reports, out)?;
    Ok(())
}

fn sweep(a: SweepArgs, file: &FileConfig, out: &mut impl Write) -> Result<()> {
    let config = experiment_config(&a.training, a.test_fraction, file)?;
    let seeds = seeds(a.reps, config.train.seed, file)?;
    let dataset = read_dataset(&a.dataset)?;
    let name = dataset_name(&a.dataset, a.name);
    let rows = dimension_sweep(&a.models, &dataset, &name, a.split, &config, &a.dims, &seeds)?;
    write_sweep_table(&rows, out)?;
    Ok(())
}

fn synth(a: SynthArgs, out: &mut impl Write) -> Result<()> {
    let from_file: SynthParams = match &a.params_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthParams::default(),
    };
    let f = a.params;
    let d = SyntheticConfig::default();
    let config = SyntheticConfig {
        n_users: pick(f.users, from_file.users, d.n_users),
        n_items: pick(f.items, from_file.items, d.n_items),
        n_tags: pick(f.tags, from_file.tags, d.n_tags),
        n_groups: pick(f.groups, from_file.groups, d.n_groups),
        tags_per_item: pick(f.tags_per_item, from_file.tags_per_item, d.tags_per_item),
        latent_dim: pick(f.latent_dim, from_file.latent_dim, d.latent_dim),
        interactions_per_user: pick(f.per_user, from_file.per_user, d.interactions_per_user),
        tag_noise: pick(f.noise, from_file.noise, d.tag_noise),
        seed: pick(f.seed, from_file.seed, d.seed),
    };
    let data = config.generate()?;
    data.dataset.write_dir(&a.out)?;
    let mut groups = BufWriter::new(File::create(a.out.join("tag_groups.tsv"))?);
    for (g, tags) in data.tag_groups.iter().enumerate() {
        for t in tags {
            writeln!(groups, "{g}\t{t}")?;
        }
    }
    groups.flush()?;
    dataset_summary(&data.dataset, out)
}
