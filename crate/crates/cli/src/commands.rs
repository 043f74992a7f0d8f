use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use outfitfuse_core::dataset::{generate_synthetic, Dataset, SyntheticSpec};
use outfitfuse_core::evaluation::{evaluate, MetricsReport, QuestionCounts};
use outfitfuse_core::model::{FusionKind, Model, ModelConfig};
use outfitfuse_core::numerics::grad_check;
use outfitfuse_core::training::{train_ensemble, EpochRecord, TripletSampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::manifest::{self, StoredDataset};

pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_TOL: f64 = 1e-4;
const GRADCHECK_DIM: usize = 8;

#[derive(Debug, Parser)]
#[command(
    name = "outfitfuse",
    version,
    about = "Type-aware outfit compatibility with attention-fused embeddings"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dataset manifest; overrides the configured path.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output location; overrides the configured path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More log output; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Valid,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into the --out directory.
    Gen,
    /// Train an ensemble and write checkpoints, metrics.jsonl and config.toml.
    Train {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the configured fusion mechanism.
        #[arg(long)]
        fusion: Option<String>,
    },
    /// Evaluate checkpoints on a question split and write a JSON report.
    Eval {
        /// Checkpoint files, or directories whose `*.ckpt` files are used.
        #[arg(long, num_args = 1.., required = true)]
        checkpoints: Vec<PathBuf>,
        /// Report path; defaults to --out, or stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Print the compatibility score of two items.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        a: String,
        b: String,
    },
    /// Compare analytic and numeric gradients of the training objective.
    Gradcheck {
        /// Check one fusion mechanism instead of all of them.
        #[arg(long)]
        fusion: Option<String>,
    },
    /// Print the resolved configuration.
    Config,
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    }

    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(d) = &self.data {
            config.data = Some(d.clone());
        }
        if let Some(o) = &self.out {
            config.out = Some(o.clone());
        }
        Ok(config)
    }
}

fn parse_fusion(name: &str) -> Result<FusionKind> {
    FusionKind::parse(name).ok_or_else(|| {
        anyhow!(
            "unknown fusion '{name}', expected one of {}",
            FusionKind::ALL.map(|k| k.as_str()).join(", ")
        )
    })
}

fn load_data(config: &RunConfig) -> Result<StoredDataset> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| anyhow!("no dataset given; pass --data or set `data` in the config"))?;
    manifest::load(path)
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let config = cli.resolve_config()?;
    match &cli.command {
        Command::Gen => gen(&config),
        Command::Train { out_dir, fusion } => {
            let mut config = config;
            if let Some(f) = fusion {
                config.model.fusion = f.clone();
            }
            let dir = out_dir
                .clone()
                .or_else(|| config.out.clone())
                .ok_or_else(|| anyhow!("pass --out-dir"))?;
            train(&config, &dir)
        }
        Command::Eval {
            checkpoints,
            report,
            split,
        } => eval(
            &config,
            checkpoints,
            report.as_deref().or(config.out.as_deref()),
            *split,
        ),
        Command::Score { checkpoint, a, b } => score(&config, checkpoint, a, b),
        Command::Gradcheck { fusion } => {
            let kinds = match fusion {
                Some(f) => vec![parse_fusion(f)?],
                None => FusionKind::ALL.to_vec(),
            };
            gradcheck(&config, &kinds)
        }
        Command::Config => {
            print!("{}", config.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gen(config: &RunConfig) -> Result<ExitCode> {
    let dir = config
        .out
        .as_ref()
        .ok_or_else(|| anyhow!("pass --out with the destination directory"))?;
    let data = generate_synthetic(&config.synthetic_spec(), config.seed)?;
    let path = manifest::save(dir, &data.dataset, &data.questions)?;
    log::info!(
        "wrote {} items and {} outfits to {}",
        data.dataset.items().len(),
        data.dataset.outfits().len(),
        path.display()
    );
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EpochLine {
    run: usize,
    epoch: usize,
    steps: usize,
    triplets: usize,
    skipped: usize,
    loss: f64,
    comp: f64,
    vsim: f64,
    tsim: f64,
    vse: f64,
    valid_auc: Option<f64>,
}

impl From<&EpochRecord> for EpochLine {
    fn from(r: &EpochRecord) -> Self {
        Self {
            run: r.run,
            epoch: r.epoch,
            steps: r.steps,
            triplets: r.triplets,
            skipped: r.skipped,
            loss: r.loss,
            comp: r.terms.comp,
            vsim: r.terms.vsim,
            tsim: r.terms.tsim,
            vse: r.terms.vse,
            valid_auc: r.valid_auc,
        }
    }
}

fn train(config: &RunConfig, dir: &Path) -> Result<ExitCode> {
    let train_config = config.train_config()?;
    let data = load_data(config)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut echo = config.clone();
    echo.out = Some(dir.to_path_buf());
    fs::write(dir.join("config.toml"), echo.to_toml()?)?;

    let runs = train_ensemble(&data.dataset, &data.questions.valid, &train_config)?;
    let mut metrics = BufWriter::new(File::create(dir.join("metrics.jsonl"))?);
    for (r, trained) in runs.iter().enumerate() {
        for record in &trained.history {
            serde_json::to_writer(&mut metrics, &EpochLine::from(record))?;
            metrics.write_all(b"\n")?;
        }
        let path = dir.join(format!("run{r}.ckpt"));
        checkpoint::save(&path, &trained.model)?;
        println!("{}", path.display());
    }
    metrics.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CountsJson {
    total: usize,
    answered: usize,
    discarded: usize,
    unanswerable: usize,
}

impl From<QuestionCounts> for CountsJson {
    fn from(c: QuestionCounts) -> Self {
        Self {
            total: c.total,
            answered: c.answered,
            discarded: c.discarded,
            unanswerable: c.unanswerable,
        }
    }
}

fn report_json(
    report: &MetricsReport,
    checkpoints: &[PathBuf],
    split: SplitArg,
) -> serde_json::Value {
    json!({
        "split": match split { SplitArg::Valid => "valid", SplitArg::Test => "test" },
        "runs": report.runs.iter().zip(checkpoints).map(|(r, p)| json!({
            "checkpoint": p.display().to_string(),
            "fc_auc": r.fc_auc,
            "fitb_accuracy": r.fitb_accuracy,
        })).collect::<Vec<_>>(),
        "mean_fc_auc": report.mean_fc_auc,
        "mean_fitb_accuracy": report.mean_fitb_accuracy,
        "voted_fitb_accuracy": report.voted_fitb_accuracy,
        "fc": CountsJson::from(report.fc),
        "fitb": CountsJson::from(report.fitb),
        "skipped_pairs": report.skipped_pairs,
        "undefined": report.undefined_metrics(),
    })
}

fn expand_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|f| f.extension().is_some_and(|e| e == "ckpt"));
            found.sort();
            if found.is_empty() {
                bail!("no .ckpt files in {}", p.display());
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn eval(
    config: &RunConfig,
    checkpoints: &[PathBuf],
    out: Option<&Path>,
    split: SplitArg,
) -> Result<ExitCode> {
    let data = load_data(config)?;
    let checkpoints = expand_checkpoints(checkpoints)?;
    let models = checkpoints
        .iter()
        .map(|p| checkpoint::load(p))
        .collect::<Result<Vec<Model>>>()?;
    let questions = match split {
        SplitArg::Valid => &data.questions.valid,
        SplitArg::Test => &data.questions.test,
    };
    let report = evaluate(&data.dataset, questions, &models)?;
    write_json(out, &report_json(&report, &checkpoints, split))?;
    let undefined = report.undefined_metrics();
    if undefined.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        log::error!("undefined metrics: {}", undefined.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn score(config: &RunConfig, path: &Path, a: &str, b: &str) -> Result<ExitCode> {
    let data = load_data(config)?;
    let model = checkpoint::load(path)?;
    let ds = &data.dataset;
    let lookup = |name: &str| {
        ds.item_id(name)
            .map(|id| ds.item(id))
            .ok_or_else(|| anyhow!("unknown item '{name}'"))
    };
    let (ia, ib) = (lookup(a)?, lookup(b)?);
    if !ia.is_described() || !ib.is_described() {
        bail!("both items need a description to be scored");
    }
    let s = model.pair_score(ia, ib)?;
    println!("{}", json!({ "a": a, "b": b, "score": s }));
    Ok(ExitCode::SUCCESS)
}

fn gradcheck_dataset(config: &RunConfig) -> Result<Dataset> {
    if config.data.is_some() {
        return Ok(load_data(config)?.dataset);
    }
    let spec = SyntheticSpec {
        types: 3,
        styles: 2,
        train_outfits: 4,
        valid_outfits: 0,
        test_outfits: 0,
        min_outfit_size: 2,
        max_outfit_size: 3,
        regions: 4,
        words: 3,
        region_dim: 6,
        word_dim: 5,
        signal_rows: 1,
        ..SyntheticSpec::default()
    };
    Ok(generate_synthetic(&spec, config.seed)?.dataset)
}

fn gradcheck(config: &RunConfig, kinds: &[FusionKind]) -> Result<ExitCode> {
    let ds = gradcheck_dataset(config)?;
    let sampler = TripletSampler::new(&ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let epoch = sampler.sample(&mut rng);
    let t = epoch
        .triplets
        .first()
        .ok_or_else(|| anyhow!("the dataset yields no training triplet"))?;
    let items = [ds.item(t.anchor), ds.item(t.positive), ds.item(t.negative)];
    let weights = config.loss_weights();
    let mut models = Vec::new();
    let mut passed = true;
    for &kind in kinds {
        let model_config = ModelConfig {
            fusion: kind,
            common_dim: GRADCHECK_DIM,
            compat_dim: GRADCHECK_DIM,
            hidden_dim: GRADCHECK_DIM,
            hops: config.model.hops,
            factor: config.model.factor,
        };
        let model = Model::init(
            model_config,
            ds.dims(),
            &ds.training_type_pairs(),
            config.seed,
        )?;
        let report = grad_check(
            &model.store,
            |tape, s| Ok(model.layout.objective_on(tape, s, items, &weights)?.0),
            GRADCHECK_STEP,
            GRADCHECK_TOL,
        )?;
        passed &= report.passed();
        models.push(json!({
            "fusion": kind.as_str(),
            "passed": report.passed(),
            "max_rel_error": report.max_rel_error(),
            "blocks": report.blocks.iter().map(|b| json!({
                "name": b.name,
                "entries": b.entries,
                "max_abs_error": b.max_abs_error,
                "max_rel_error": b.max_rel_error,
            })).collect::<Vec<_>>(),
        }));
    }
    let out = json!({
        "step": GRADCHECK_STEP,
        "tolerance": GRADCHECK_TOL,
        "triplet": [&items[0].name, &items[1].name, &items[2].name],
        "passed": passed,
        "models": models,
    });
    write_json(config.out.as_deref(), &out)?;
    Ok(if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
