//! `crl`: synthetic corpora, training, evaluation, decoding and diversity
//! export for curiosity-driven paragraph generation.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crl_core::corpus::{load_dataset, save_dataset, synth_split, tokenize, GrammarSpec, Scene, Vocabulary};
use crl_core::metrics::diversity_graph;
use crl_core::trainer::{decode, evaluate, DecodeMode, Model, TrainConfig, Trainer};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "crl", version, about = "Curiosity-driven RL for paragraph generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a grammar file.
    Synth(SynthArgs),
    /// Train a model; one JSON report line per epoch.
    Train(TrainArgs),
    /// Decode a split and print its metrics.
    Eval(EvalArgs),
    /// Decode a single scene.
    Generate(GenerateArgs),
    /// Export the word co-occurrence graph of generated text.
    Diversity(DiversityArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Grammar TOML; built-in defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the grammar seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    val: usize,
}

/// Flags that override config-file values.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.beam_width {
            cfg.beam_width = v;
        }
        if let Some(v) = &self.checkpoint_dir {
            cfg.checkpoint_dir = Some(v.clone());
        }
        if let Some(v) = &self.report {
            cfg.report_path = Some(v.clone());
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from a checkpoint directory.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Also write the effective config here.
    #[arg(long)]
    dump_config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Read data paths from this config instead of the checkpoint's.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `train` or `val`.
    #[arg(long, default_value = "val")]
    split: String,
    /// Dataset manifest; overrides `--split`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// `beam` (with `--beam-width`) or `greedy`.
    #[arg(long, default_value = "beam")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    beam_width: usize,
}

impl DataArgs {
    fn decode_mode(&self) -> Result<DecodeMode> {
        match self.mode.as_str() {
            "greedy" => Ok(DecodeMode::Greedy),
            "beam" if self.beam_width >= 1 => Ok(DecodeMode::Beam(self.beam_width)),
            "beam" => bail!("beam width must be at least 1"),
            other => bail!("unknown decode mode {other:?}; expected greedy or beam"),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write the decoded paragraphs here, one per line.
    #[arg(long)]
    candidates: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    scene: String,
}

#[derive(Args)]
struct DiversityArgs {
    /// Generated text, one paragraph per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Diversity(a) => cmd_diversity(a),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GrammarSpec::from_toml_str(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => GrammarSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let corpus = synth_split(&spec, a.train, a.val)?;
    let raw = |v: &[crl_core::corpus::SynthScene]| v.iter().map(|s| s.raw.clone()).collect::<Vec<_>>();
    save_dataset(&a.out, "train", &raw(&corpus.train))?;
    if a.val > 0 {
        save_dataset(&a.out, "val", &raw(&corpus.val))?;
    }
    corpus.vocab.save(&a.out.join("vocab.txt"))?;
    fs::write(a.out.join("grammar.toml"), spec.to_toml_string())?;
    println!(
        "{}",
        serde_json::json!({
            "out": a.out,
            "train": a.train,
            "val": a.val,
            "vocab": corpus.vocab.len(),
        })
    );
    Ok(())
}

/// Makes relative paths in `cfg` relative to `base`.
fn resolve_paths(cfg: &mut TrainConfig, base: &Path) {
    for p in [
        &mut cfg.train_data,
        &mut cfg.val_data,
        &mut cfg.vocab,
        &mut cfg.checkpoint_dir,
        &mut cfg.report_path,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = TrainConfig::from_toml_str(&text).with_context(|| format!("in {}", path.display()))?;
    resolve_paths(&mut cfg, path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("config is missing `{key}`"))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.overrides.apply(&mut cfg);
    cfg.validate()?;

    let effective = cfg.to_toml_string();
    eprintln!("# effective config\n{effective}");
    if let Some(p) = &a.dump_config {
        fs::write(p, &effective).with_context(|| format!("writing {}", p.display()))?;
    }

    let vocab = Vocabulary::load(required(&cfg.vocab, "vocab")?)?;
    let train = load_dataset(required(&cfg.train_data, "train_data")?, &vocab, cfg.t_max)?;
    let val = load_dataset(required(&cfg.val_data, "val_data")?, &vocab, cfg.t_max)?;

    let mut trainer = match &a.resume {
        Some(dir) => Trainer::resume(dir, cfg.clone(), vocab, &train)?,
        None => Trainer::new(cfg.clone(), vocab, &train)?,
    };
    let mut report_file = match &cfg.report_path {
        Some(p) => {
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            let f = fs::OpenOptions::new()
                .create(true)
                .append(a.resume.is_some())
                .write(true)
                .truncate(a.resume.is_none())
                .open(p)
                .with_context(|| format!("opening {}", p.display()))?;
            Some(f)
        }
        None => None,
    };
    let stdout = std::io::stdout();
    trainer.run(&train, &val, |r| {
        let line = serde_json::to_string(r).expect("report serializes");
        let mut out = stdout.lock();
        let _ = writeln!(out, "{line}");
        if let Some(f) = report_file.as_mut() {
            writeln!(f, "{line}").map_err(|e| crl_core::Error::InvalidArgument(format!("report write failed: {e}")))?;
        }
        Ok(())
    })?;
    Ok(())
}

struct Loaded {
    model: Model,
    cfg: TrainConfig,
    vocab: Vocabulary,
    scenes: Vec<Scene>,
}

fn load_for_decoding(a: &DataArgs) -> Result<Loaded> {
    let (model, ckpt_cfg) = Model::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let vocab = Vocabulary::load(&a.checkpoint.join("vocab.txt"))?;
    let data_cfg = match &a.config {
        Some(p) => load_config(Some(p))?,
        None => ckpt_cfg.clone(),
    };
    let manifest = match &a.data {
        Some(p) => p.clone(),
        None => match a.split.as_str() {
            "train" => required(&data_cfg.train_data, "train_data")?.to_path_buf(),
            "val" => required(&data_cfg.val_data, "val_data")?.to_path_buf(),
            other => bail!("unknown split {other:?}; expected train or val"),
        },
    };
    let scenes = load_dataset(&manifest, &vocab, ckpt_cfg.t_max)?;
    Ok(Loaded {
        model,
        cfg: ckpt_cfg,
        vocab,
        scenes,
    })
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let l = load_for_decoding(&a.data)?;
    let ev = evaluate(&l.model.policy, &l.scenes, &l.vocab, a.data.decode_mode()?, l.cfg.t_max)?;
    if let Some(p) = &a.candidates {
        let mut text = String::new();
        for c in &ev.candidates {
            text.push_str(&l.vocab.render(c)?);
            text.push('\n');
        }
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut out = serde_json::to_value(&ev.report)?;
    out["mode"] = a.data.mode.clone().into();
    out["beam_width"] = a.data.beam_width.into();
    println!("{out}");
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let l = load_for_decoding(&a.data)?;
    let scene = l
        .scenes
        .iter()
        .find(|s| s.id == a.scene)
        .ok_or_else(|| anyhow!("scene {:?} not found", a.scene))?;
    let hyp = decode(&l.model.policy, &scene.features, a.data.decode_mode()?, l.cfg.t_max)?;
    let out = serde_json::json!({
        "scene": scene.id,
        "tokens": l.vocab.decode(&hyp.tokens)?,
        "text": l.vocab.render(&hyp.tokens)?,
        "log_prob": hyp.log_prob,
    });
    println!("{out}");
    Ok(())
}

fn cmd_diversity(a: DiversityArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let paragraphs: Vec<Vec<String>> = text.lines().map(tokenize).collect();
    let graph = diversity_graph(&paragraphs);
    let json = graph.to_json();
    match &a.out {
        Some(p) => {
            fs::write(p, serde_json::to_string_pretty(&json)?).with_context(|| format!("writing {}", p.display()))?;
            println!("{}", serde_json::to_string(&graph.stats())?);
        }
        None => println!("{json}"),
    }
    Ok(())
}
