use std::io::Write;
use std::path::{Path, PathBuf};

use actgen_core::{simulate_dyad, surface_label, DeflectionWeights, EntryKind, Epa, Identity};
use actgen_neural::{
    checksum, generate_response, save_checkpoint, train_model, AnnealSchedule, DecodeConfig,
    Example, ModelConfig, Net, OptimizerSettings, TrainSettings, Variant, Vocab,
};
use actgen_pipeline::synthetic::affect_template_corpus;
use actgen_pipeline::{
    construct_triples, export_rating_sheet, load_dataset, parse_corpus, persist_dataset,
    round_trip_alignment, wilcoxon_signed_rank, CorpusSource, DatasetSplit, IdentitySetting,
    PipelineError, RatingPair, SplitFractions, TrainingTriple,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::api::{lexicon_key, serve, AppState};
use crate::config::{ClassifierStrategy, ServiceConfig};
use crate::resources::{load_generator, vocab_path, ResourcePaths, Resources};
use crate::ApiError;

#[derive(Debug, Parser)]
#[command(
    name = "actgen",
    version,
    about = "Affect-controlled dialogue generation"
)]
pub struct Cli {
    /// Seed for shuffling, initialization and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a dialogue corpus into train/valid/test triples.
    Ingest(IngestArgs),
    /// Train a response generator on a triple dataset.
    Train(TrainArgs),
    /// Round-trip affect alignment, rating-sheet export, rating comparison.
    Eval(EvalArgs),
    /// Simulate a dyad and print the trace as TSV.
    Simulate(SimulateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory with movie_lines.txt and movie_conversations.txt.
    #[arg(long)]
    pub cornell: Option<PathBuf>,
    /// JSONL conversations, one {"id", "utterances"} object per line.
    #[arg(long)]
    pub jsonl: Vec<PathBuf>,
    /// Generate this many affect-template triples instead of reading a corpus.
    #[arg(long, conflicts_with_all = ["cornell", "jsonl"])]
    pub synthetic: Option<usize>,
    /// Identity pair the speakers play, `friend_friend`, `enemy_enemy` or `a:b`.
    #[arg(long, default_value = "friend_friend")]
    pub setting: IdentitySetting,
    #[arg(long, default_value_t = 0.05)]
    pub valid: f64,
    #[arg(long, default_value_t = 0.05)]
    pub test: f64,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub data: ResourcePaths,
}

/// Model and optimizer settings for `train`, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub max_len: usize,
    /// Includes the four reserved tokens.
    pub vocab_size: usize,
    pub optimizer: OptimizerSettings,
    pub warmup_steps: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::new(Variant::Cvae, 0);
        Self {
            embed_dim: m.embed_dim,
            hidden_dim: m.hidden_dim,
            latent_dim: m.latent_dim,
            max_len: m.max_len,
            vocab_size: 24000,
            optimizer: OptimizerSettings::default(),
            warmup_steps: AnnealSchedule::default().warmup_steps,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    /// Dataset directory written by `ingest`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Checkpoint manifest path; the vocabulary is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss log (defaults to `<out>.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, requires = "model")]
    pub dataset: Option<PathBuf>,
    /// EPA-conditioned checkpoint to evaluate.
    #[arg(long, requires = "dataset")]
    pub model: Option<PathBuf>,
    /// Alpha-blind checkpoint to compare against.
    #[arg(long, requires = "model")]
    pub baseline: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitName,
    /// Writes the JSON report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exports model responses for human rating.
    #[arg(long, requires = "model")]
    pub rating_sheet: Option<PathBuf>,
    /// Two completed rating sheets, compared with a one-tailed signed-rank test.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub compare: Vec<PathBuf>,
    #[arg(long, default_value = "naturalness")]
    pub column: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_level: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "friend")]
    pub actor: String,
    #[arg(long, default_value = "friend")]
    pub object: String,
    /// Opening behavior label.
    #[arg(long, conflicts_with = "epa", required_unless_present = "epa")]
    pub behavior: Option<String>,
    /// Opening behavior as `e,p,a`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_epa)]
    pub epa: Option<Epa>,
    #[arg(long, default_value_t = 3)]
    pub turns: usize,
    #[command(flatten)]
    pub data: ResourcePaths,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service config JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured bind address.
    #[arg(long)]
    pub bind: Option<String>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
        .map_err(|e: actgen_neural::NeuralError| e.to_string())
}

fn parse_epa(s: &str) -> Result<Epa, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [f64; 3] = parts
        .try_into()
        .map_err(|_| "expected three comma-separated numbers".to_string())?;
    actgen_core::validate_epa(arr)
        .map(|v| v.epa)
        .map_err(|e| e.to_string())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), ApiError> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => ingest(a, seed.unwrap_or(0), out),
        Command::Train(a) => train(a, seed.unwrap_or(0), out),
        Command::Eval(a) => eval(a, seed, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Serve(a) => serve_cmd(a, seed),
    }
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), ApiError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    conversations: usize,
    malformed_lines: usize,
    pairs: usize,
    triples: usize,
    skipped_s2epa: usize,
    skipped_solver: usize,
    train: usize,
    valid: usize,
    test: usize,
    seed: u64,
}

fn ingest(a: IngestArgs, seed: u64, out: &mut dyn Write) -> Result<(), ApiError> {
    let res = Resources::load(&a.data)?;
    let s2epa = res.s2epa(&ClassifierStrategy::Offline)?;
    let mut summary = IngestSummary {
        conversations: 0,
        malformed_lines: 0,
        pairs: 0,
        triples: 0,
        skipped_s2epa: 0,
        skipped_solver: 0,
        train: 0,
        valid: 0,
        test: 0,
        seed,
    };
    let triples = if let Some(n) = a.synthetic {
        let t = affect_template_corpus(&s2epa, n, seed)?;
        summary.pairs = t.len();
        t
    } else {
        let mut sources: Vec<CorpusSource> = a.jsonl.into_iter().map(CorpusSource::Jsonl).collect();
        if let Some(dir) = a.cornell {
            sources.push(CorpusSource::Cornell {
                lines: dir.join("movie_lines.txt"),
                conversations: dir.join("movie_conversations.txt"),
            });
        }
        if sources.is_empty() {
            return Err(ApiError::bad_request(
                "give --cornell, --jsonl or --synthetic",
            ));
        }
        let (convs, corpus) = parse_corpus(&sources)?;
        let (h, g) = a.setting.labels();
        let id1 = Identity::from_lexicon(&res.lexicon, h)?;
        let id2 = Identity::from_lexicon(&res.lexicon, g)?;
        let (t, report) = construct_triples(
            &convs,
            &id1,
            &id2,
            &s2epa,
            &res.model,
            &DeflectionWeights::ones(),
        );
        summary.conversations = report.conversations;
        summary.malformed_lines = corpus.malformed;
        summary.pairs = report.pairs;
        summary.skipped_s2epa = report.skipped_s2epa;
        summary.skipped_solver = report.skipped_solver;
        t
    };
    if triples.is_empty() {
        return Err(ApiError::bad_request("no training triples produced"));
    }
    summary.triples = triples.len();
    let fractions = SplitFractions {
        train: 1.0 - a.valid - a.test,
        valid: a.valid,
        test: a.test,
    };
    let split = DatasetSplit::new(triples, fractions, seed)?;
    (summary.train, summary.valid, summary.test) =
        (split.train.len(), split.valid.len(), split.test.len());
    persist_dataset(&split, &a.out)?;
    write_json(out, &summary)
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    variant: Variant,
    examples: usize,
    vocab_size: usize,
    steps: usize,
    final_total: f64,
    final_kl: f64,
    checkpoint: PathBuf,
    vocab: PathBuf,
    log: PathBuf,
    checksum: String,
}

fn train(a: TrainArgs, seed: u64, out: &mut dyn Write) -> Result<(), ApiError> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<TrainConfig>(&std::fs::read_to_string(p)?)
            .map_err(|e| ApiError::bad_request(format!("{}: {e}", p.display())))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.steps {
        cfg.optimizer.steps = s;
    }
    if let Some(lr) = a.lr {
        cfg.optimizer.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.optimizer.batch_size = b;
    }
    if let Some(w) = a.warmup {
        cfg.warmup_steps = w;
    }
    let split = load_dataset(&a.dataset)?;
    if split.train.is_empty() {
        return Err(ApiError::bad_request("training split is empty"));
    }
    let vocab = Vocab::from_sentences(
        split
            .train
            .iter()
            .flat_map(|t| [t.prompt.as_str(), t.response.as_str()]),
        cfg.vocab_size,
    )?;
    let model = ModelConfig {
        embed_dim: cfg.embed_dim,
        hidden_dim: cfg.hidden_dim,
        latent_dim: cfg.latent_dim,
        max_len: cfg.max_len,
        seed,
        ..ModelConfig::new(a.variant, vocab.len())
    };
    let examples: Vec<Example<f32>> = split
        .train
        .iter()
        .map(|t| t.to_example(&vocab, cfg.max_len))
        .collect();
    let settings = TrainSettings {
        optimizer: cfg.optimizer.clone(),
        anneal: Some(AnnealSchedule::new(cfg.warmup_steps)?),
        checkpoint: None,
    };
    let (net, log) = train_model(&examples, &model, &settings)?;
    let steps = log.rows.len() as u64;
    save_checkpoint(&net, steps, &a.out)?;
    let vpath = vocab_path(&a.out);
    std::fs::write(&vpath, serde_json::to_vec_pretty(&vocab)?)?;
    let log_path = a.log.unwrap_or_else(|| a.out.with_extension("log.csv"));
    log.save_csv(&log_path)?;
    let last = log.last();
    write_json(
        out,
        &TrainSummary {
            variant: a.variant,
            examples: examples.len(),
            vocab_size: vocab.len(),
            steps: log.rows.len(),
            final_total: last.map_or(f64::NAN, |r| r.total),
            final_kl: last.map_or(f64::NAN, |r| r.kl),
            checkpoint: a.out,
            vocab: vpath,
            log: log_path,
            checksum: checksum(&net),
        },
    )
}

struct Loaded {
    network: Net,
    vocab: Vocab,
    decode: DecodeConfig,
}

fn load_neural(path: &Path, seed: Option<u64>) -> Result<Loaded, ApiError> {
    let decode = DecodeConfig {
        seed,
        ..DecodeConfig::default()
    };
    match load_generator(path, decode)? {
        actgen_pipeline::ResponseGenerator::Neural {
            network,
            vocab,
            decode,
        } => {
            let decode = DecodeConfig {
                max_len: network.config().max_len + 1,
                ..decode
            };
            Ok(Loaded {
                network,
                vocab,
                decode,
            })
        }
        actgen_pipeline::ResponseGenerator::Template(_) => unreachable!("checkpoints are neural"),
    }
}

impl Loaded {
    fn respond(&self, t: &TrainingTriple) -> Result<String, PipelineError> {
        let alpha = t.alpha.to_f64().map(|v| v as f32);
        Ok(generate_response(&self.network, &self.vocab, &t.prompt, &alpha, &self.decode)?.surface)
    }
}

fn read_ratings(path: &Path, column: &str) -> Result<Vec<f64>, ApiError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| ApiError::bad_request(format!("{}: {e}", path.display())))?;
    let idx = r
        .headers()
        .map_err(|e| ApiError::bad_request(e.to_string()))?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| {
            ApiError::bad_request(format!("{} has no column '{column}'", path.display()))
        })?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| ApiError::bad_request(e.to_string()))?;
            let cell = rec.get(idx).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|_| {
                ApiError::bad_request(format!(
                    "{} row {}: '{cell}' is not a rating",
                    path.display(),
                    i + 2
                ))
            })
        })
        .collect()
}

fn eval(a: EvalArgs, seed: Option<u64>, out: &mut dyn Write) -> Result<(), ApiError> {
    if a.model.is_none() && a.compare.is_empty() {
        return Err(ApiError::bad_request(
            "give --dataset with --model, or --compare A B",
        ));
    }
    let mut report = serde_json::Map::new();
    if let (Some(dataset), Some(model_path)) = (&a.dataset, &a.model) {
        let split = load_dataset(dataset)?;
        let triples = match a.split {
            SplitName::Train => split.train,
            SplitName::Valid => split.valid,
            SplitName::Test => split.test,
        };
        let model = load_neural(model_path, seed)?;
        report.insert(
            "variant".into(),
            serde_json::to_value(model.network.variant())?,
        );
        if let Some(baseline_path) = &a.baseline {
            let baseline = load_neural(baseline_path, seed)?;
            let res = Resources::load(&ResourcePaths::default())?;
            let s2epa = res.s2epa(&ClassifierStrategy::Offline)?;
            let alignment = round_trip_alignment(
                |t| model.respond(t),
                |t| baseline.respond(t),
                &triples,
                &s2epa,
            )?;
            report.insert("alignment".into(), serde_json::to_value(alignment)?);
        }
        if let Some(sheet) = &a.rating_sheet {
            let setting = model.network.variant().to_string();
            let pairs = triples
                .iter()
                .map(|t| {
                    Ok(RatingPair {
                        prompt: t.prompt.clone(),
                        response: model.respond(t)?,
                        setting: setting.clone(),
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            let rows = export_rating_sheet(&pairs, sheet)?;
            report.insert("rating_rows".into(), rows.into());
        }
    }
    if let [sheet_a, sheet_b] = a.compare.as_slice() {
        let (xa, xb) = (
            read_ratings(sheet_a, &a.column)?,
            read_ratings(sheet_b, &a.column)?,
        );
        let w = wilcoxon_signed_rank(&xa, &xb, true, a.alpha_level)?;
        report.insert("wilcoxon".into(), serde_json::to_value(w)?);
    }
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_vec_pretty(&report)?)?;
    }
    write_json(out, &report)
}

pub const TSV_HEADER: &str = "turn\tactor\tobject\te\tp\ta\tnearest\tdeflection";

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), ApiError> {
    let res = Resources::load(&a.data)?;
    let lex = &res.lexicon;
    let actor = Identity::from_lexicon(lex, &lexicon_key(&a.actor))?;
    let object = Identity::from_lexicon(lex, &lexicon_key(&a.object))?;
    let opening = match (&a.behavior, a.epa) {
        (Some(label), _) => lex.epa(EntryKind::Behavior, &lexicon_key(label))?,
        (None, Some(epa)) => epa,
        (None, None) => return Err(ApiError::bad_request("give --behavior or --epa")),
    };
    let trace = simulate_dyad(
        (actor, object),
        opening,
        a.turns,
        &res.model,
        &DeflectionWeights::ones(),
        Some(lex),
    )?;
    writeln!(out, "{TSV_HEADER}")?;
    for row in trace {
        let [e, p, ac] = row.behavior.to_f64();
        let nearest: Vec<String> = row
            .nearest
            .iter()
            .map(|m| surface_label(&m.label))
            .collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{e:.4}\t{p:.4}\t{ac:.4}\t{}\t{:.4}",
            row.turn,
            row.actor,
            row.object,
            nearest.join(","),
            row.deflection
        )?;
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs, seed: Option<u64>) -> Result<(), ApiError> {
    let mut config = match &a.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(bind) = a.bind {
        config.bind = bind;
    }
    let addr = config.addr()?;
    let state = AppState::from_config(config, seed)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        serve(state, listener).await
    })?;
    Ok(())
}
