// SPDX-License-Identifier: Apache-2.0

//! The `paramdoc` command line.
//!
//! [`run`] takes argv plus output sinks and returns the process exit code:
//! 0 on success, 1 for runtime failures (with the offending path in the
//! message), 2 for usage errors.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use paramdoc_core::abstraction::{
    abstract_log, parse_log, write_profile_dir, GroupScope, DEFAULT_CANDIDATE_CAP,
};
use paramdoc_core::corpus::{corpus_stats, parse_spec};
use paramdoc_core::param_index::{build_index, consistency_report, recommend};
use paramdoc_core::seq2seq::{
    encode_pairs, exact_match_rate, generate_description, parse_pairs, read_checkpoint,
    vocab_for_pairs, write_checkpoint, TrainConfig, Trainer, DEFAULT_HIDDEN_DIM, DEFAULT_INPUT_DIM,
    DEFAULT_LEARNING_RATE,
};
use paramdoc_core::{ApiSpec, Candidate, Corpus, GruModel, ParamIndex};
use paramdoc_service::events::read_log;
use paramdoc_service::metrics::{parse_instant, Window};
use paramdoc_service::{acceptance_by_kind, acceptance_rate, weekly_series, ServeConfig};
use serde_json::{json, Value};

pub const DEFAULT_SEED: u64 = 17;

#[derive(Parser, Debug)]
#[command(
    name = "paramdoc",
    version,
    about = "Parameter-level API documentation toolkit"
)]
pub struct Cli {
    /// Output format for stdout reports.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    pub format: Format,
    /// Seed for every random choice (model initialization).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate API spec documents and write a canonical corpus file.
    Ingest {
        /// Spec files (`.json`, one document) or corpus files (`.jsonl`).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print deduplication statistics and the description consistency score.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Build the parameter index and write it as a cache file.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search-based candidates for one parameter.
    Recommend {
        #[arg(long)]
        corpus: PathBuf,
        /// Cache written by `index`; rebuilt from the corpus when absent.
        #[arg(long)]
        index: Option<PathBuf>,
        /// API id or unique API name.
        #[arg(long)]
        api: String,
        #[arg(long)]
        param: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Train the translator on `api<TAB>param<TAB>description` pairs.
    Train(TrainArgs),
    /// Translate one API/parameter name pair with a trained checkpoint.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        api: String,
        #[arg(long)]
        param: String,
    },
    /// Mine patterns, common strings and examples from a request log.
    Abstract {
        /// `api<TAB>param<TAB>value` lines.
        #[arg(long)]
        log: PathBuf,
        /// Directory receiving one profile document per group.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        shards: usize,
        #[arg(long, default_value_t = DEFAULT_CANDIDATE_CAP)]
        candidate_cap: usize,
        #[arg(long, value_enum, default_value_t = Scope::Param)]
        scope: Scope,
    },
    /// Acceptance rate over a recorded event log.
    Metrics {
        #[arg(long)]
        events: PathBuf,
        /// Inclusive start (RFC 3339 or YYYY-MM-DD).
        #[arg(long)]
        from: Option<String>,
        /// Exclusive end (RFC 3339 or YYYY-MM-DD).
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_enum)]
        bucket: Option<Bucket>,
    },
    /// Run the HTTP recommendation service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Checkpoint destination.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_DIM)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = DEFAULT_INPUT_DIM)]
    pub input_dim: usize,
    /// Stop once greedy exact match on the training pairs reaches this rate.
    #[arg(long)]
    pub stop_at: Option<f64>,
    /// Epochs between exact-match evaluations when `--stop-at` is set.
    #[arg(long, default_value_t = 25)]
    pub eval_every: usize,
    /// Keep a constant learning rate.
    #[arg(long)]
    pub no_decay: bool,
    /// Optional file receiving one loss value per epoch.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// TOML file naming the artifacts; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    /// One profile per parameter name.
    Param,
    /// One profile per (api, parameter).
    ApiParam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bucket {
    Weekly,
}

/// A runtime failure; always exit code 1.
#[derive(Debug)]
pub struct Failure(pub String);

impl Failure {
    fn at(path: &Path, e: impl Display) -> Failure {
        Failure(format!("{}: {e}", path.display()))
    }
}

type Outcome = Result<Report, Failure>;

/// What a subcommand prints: a text rendering and a JSON rendering.
pub struct Report {
    text: String,
    json: Value,
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let body = match cli.format {
                Format::Text => report.text,
                Format::Json => {
                    let mut s =
                        serde_json::to_string_pretty(&report.json).expect("reports serialize");
                    s.push('\n');
                    s
                }
            };
            let _ = out.write_all(body.as_bytes());
            0
        }
        Err(Failure(msg)) => {
            let _ = writeln!(err, "paramdoc: {msg}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Ingest { inputs, out } => ingest(inputs, out),
        Command::Stats { corpus } => stats(corpus),
        Command::Index { corpus, out } => index(corpus, out),
        Command::Recommend {
            corpus,
            index,
            api,
            param,
            k,
        } => recommend_cmd(corpus, index.as_deref(), api, param, *k),
        Command::Train(args) => train_cmd(args, cli.seed),
        Command::Generate { model, api, param } => generate(model, api, param),
        Command::Abstract {
            log,
            out,
            shards,
            candidate_cap,
            scope,
        } => abstract_cmd(log, out, *shards, *candidate_cap, *scope),
        Command::Metrics {
            events,
            from,
            to,
            bucket,
        } => metrics(events, from.as_deref(), to.as_deref(), *bucket),
        Command::Serve(args) => serve(args),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::at(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::at(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::at(path, e))
}

fn load_corpus_file(path: &Path) -> Result<Corpus, Failure> {
    Corpus::from_ndjson(&read(path)?).map_err(|e| Failure::at(path, e))
}

fn ingest(inputs: &[PathBuf], out: &Path) -> Outcome {
    let mut specs: Vec<ApiSpec> = Vec::new();
    for path in inputs {
        let text = read(path)?;
        let is_lines = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("jsonl" | "ndjson")
        );
        if is_lines {
            let c = Corpus::from_ndjson(&text).map_err(|e| Failure::at(path, e))?;
            specs.extend(c.iter().cloned());
        } else {
            specs.push(parse_spec(&text).map_err(|e| Failure::at(path, e))?);
        }
    }
    let corpus = Corpus::from_specs(specs).map_err(|e| Failure(e.to_string()))?;
    write(out, &corpus.to_ndjson())?;
    Ok(Report {
        text: format!(
            "wrote {} apis, {} parameters to {}\n",
            corpus.len(),
            corpus.parameter_count(),
            out.display()
        ),
        json: json!({
            "apis": corpus.len(),
            "parameters": corpus.parameter_count(),
            "digest": corpus.digest(),
            "out": out.display().to_string(),
        }),
    })
}

fn stats(path: &Path) -> Outcome {
    let corpus = load_corpus_file(path)?;
    if corpus.is_empty() || corpus.parameter_count() == 0 {
        return Err(Failure(format!("{}: empty corpus", path.display())));
    }
    let s = corpus_stats(&corpus);
    let consistency =
        consistency_report(&build_index(&corpus)).map_err(|e| Failure(e.to_string()))?;
    let ratio = s.compression_ratio.expect("non-empty corpus has a ratio");
    let mut text = format!(
        "apis: {}\ntotal_parameter_occurrences: {}\nunique_parameter_names: {}\ncompression_ratio: {ratio:.4}\n",
        corpus.len(),
        s.total_parameter_occurrences,
        s.unique_parameter_names,
    );
    match consistency {
        Some(c) => text.push_str(&format!("mean_set_similarity: {c:.4}\n")),
        None => text.push_str("mean_set_similarity: undefined\n"),
    }
    Ok(Report {
        text,
        json: json!({
            "apis": corpus.len(),
            "total_parameter_occurrences": s.total_parameter_occurrences,
            "unique_parameter_names": s.unique_parameter_names,
            "compression_ratio": ratio,
            "mean_set_similarity": consistency,
        }),
    })
}

fn index(corpus_path: &Path, out: &Path) -> Outcome {
    let corpus = load_corpus_file(corpus_path)?;
    let idx = build_index(&corpus);
    write(out, &idx.to_cache(&corpus))?;
    let names = idx.names().count();
    Ok(Report {
        text: format!(
            "indexed {names} names, {} postings to {}\n",
            idx.total_postings(),
            out.display()
        ),
        json: json!({ "names": names, "postings": idx.total_postings(), "out": out.display().to_string() }),
    })
}

fn candidate_json(c: &Candidate) -> Value {
    json!({
        "kind": c.kind.tag(),
        "description": c.description,
        "example": c.example,
        "type": c.ptype.map(|t| t.as_str()),
        "required": c.required,
        "score": c.score,
        "provenance": c.provenance,
    })
}

fn recommend_cmd(
    corpus_path: &Path,
    index_path: Option<&Path>,
    api: &str,
    param: &str,
    k: usize,
) -> Outcome {
    let corpus = load_corpus_file(corpus_path)?;
    let idx = match index_path {
        Some(p) => ParamIndex::from_cache(&read(p)?, &corpus).map_err(|e| Failure::at(p, e))?,
        None => build_index(&corpus),
    };
    let spec = corpus
        .resolve(api)
        .ok_or_else(|| Failure(format!("unknown api `{api}`")))?;
    let list = recommend(&idx, &spec.api_id, param, k).map_err(|e| Failure(e.to_string()))?;
    let mut text = String::new();
    if list.is_empty() {
        text.push_str("no candidates\n");
    }
    for (i, c) in list.iter().enumerate() {
        text.push_str(&format!(
            "{}. {:?} example={:?} score={:.4} from {}\n",
            i + 1,
            c.description,
            c.example,
            c.score,
            c.provenance.join(",")
        ));
    }
    Ok(Report {
        text,
        json: json!({
            "api_id": spec.api_id,
            "param_name": param,
            "candidates": list.iter().map(candidate_json).collect::<Vec<_>>(),
        }),
    })
}

fn train_cmd(args: &TrainArgs, seed: u64) -> Outcome {
    if args.hidden_dim == 0 || args.input_dim == 0 {
        return Err(Failure("dimensions must be positive".into()));
    }
    if !(args.learning_rate.is_finite() && args.learning_rate >= 0.0) {
        return Err(Failure(
            "learning rate must be a non-negative number".into(),
        ));
    }
    let text = read(&args.pairs)?;
    let pairs = parse_pairs(&text).map_err(|e| Failure::at(&args.pairs, e))?;
    if pairs.is_empty() {
        return Err(Failure(format!(
            "{}: no training pairs",
            args.pairs.display()
        )));
    }
    let vocab = vocab_for_pairs(&pairs);
    let encoded = encode_pairs(&pairs, &vocab).map_err(|e| Failure::at(&args.pairs, e))?;
    let model = GruModel::new(vocab, args.input_dim, args.hidden_dim, seed);
    let config = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        decay_on_stall: !args.no_decay,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, config);
    let every = args.eval_every.max(1);
    let mut reached = None;
    for epoch in 1..=args.epochs {
        trainer
            .run_epoch(&encoded)
            .map_err(|e| Failure(e.to_string()))?;
        if let Some(target) = args.stop_at {
            if epoch % every == 0 {
                let rate = exact_match_rate(&trainer.model, &encoded)
                    .map_err(|e| Failure(e.to_string()))?;
                if rate >= target {
                    reached = Some(epoch);
                    break;
                }
            }
        }
    }
    let (model, losses) = trainer.finish();
    let exact = exact_match_rate(&model, &encoded).map_err(|e| Failure(e.to_string()))?;
    write(&args.out, &write_checkpoint(&model))?;
    if let Some(p) = &args.loss_out {
        let body: String = losses.iter().map(|l| format!("{l}\n")).collect();
        write(p, &body)?;
    }
    let first = losses.first().copied();
    let last = losses.last().copied();
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    Ok(Report {
        text: format!(
            "epochs: {}\nvocab: {}\nparameters: {}\ninitial_loss: {}\nfinal_loss: {}\nexact_match: {exact:.4}\nwrote {}\n",
            losses.len(),
            model.vocab.len(),
            model.parameter_count(),
            fmt(first),
            fmt(last),
            args.out.display()
        ),
        json: json!({
            "epochs": losses.len(),
            "stopped_early_at": reached,
            "vocab": model.vocab.len(),
            "parameters": model.parameter_count(),
            "initial_loss": first,
            "final_loss": last,
            "exact_match": exact,
            "out": args.out.display().to_string(),
        }),
    })
}

fn generate(model_path: &Path, api: &str, param: &str) -> Outcome {
    let model = read_checkpoint(&read(model_path)?).map_err(|e| Failure::at(model_path, e))?;
    let c = generate_description(&model, api, param).map_err(|e| Failure(e.to_string()))?;
    Ok(Report {
        text: format!("{:?} score={:.4}\n", c.description, c.score),
        json: candidate_json(&c),
    })
}

fn abstract_cmd(log: &Path, out: &Path, shards: usize, cap: usize, scope: Scope) -> Outcome {
    if shards == 0 {
        return Err(Failure("--shards must be positive".into()));
    }
    if cap == 0 {
        return Err(Failure("--candidate-cap must be positive".into()));
    }
    let records = parse_log(&read(log)?).map_err(|e| Failure::at(log, e))?;
    let scope = match scope {
        Scope::Param => GroupScope::Parameter,
        Scope::ApiParam => GroupScope::ApiParameter,
    };
    // At most `shards` mappers run concurrently per group.
    let profiles = abstract_log(&records, scope, shards, cap).map_err(|e| Failure::at(log, e))?;
    fs::create_dir_all(out).map_err(|e| Failure::at(out, e))?;
    let written = write_profile_dir(out, &profiles).map_err(|e| Failure(e.to_string()))?;
    let mut text = String::new();
    let mut items = Vec::new();
    for ((key, p), path) in profiles.iter().zip(&written) {
        text.push_str(&format!(
            "{}: pattern {} rate {} -> {}\n",
            key.relative_path().display(),
            p.parameter_pattern,
            p.document().rate,
            path.display()
        ));
        items.push(json!({
            "api_name": key.api_name,
            "param_name": key.param_name,
            "parameter_pattern": p.parameter_pattern,
            "rate": p.document().rate,
            "path": path.display().to_string(),
        }));
    }
    Ok(Report {
        text,
        json: json!({ "profiles": items }),
    })
}

fn metrics(events: &Path, from: Option<&str>, to: Option<&str>, bucket: Option<Bucket>) -> Outcome {
    let parse = |s: Option<&str>| {
        s.map(parse_instant)
            .transpose()
            .map_err(|e| Failure(e.to_string()))
    };
    let window = Window::new(parse(from)?, parse(to)?).map_err(|e| Failure(e.to_string()))?;
    let log = read_log(events).map_err(|e| Failure(e.to_string()))?;
    let overall = acceptance_rate(&log, &window);
    let by_kind = acceptance_by_kind(&log, &window);
    let rate = |r: Option<f64>| r.map_or("undefined".to_string(), |r| format!("{r:.4}"));
    let mut text = format!(
        "valid: {}\ntotal: {}\nrate: {}\n",
        overall.valid,
        overall.total,
        rate(overall.rate)
    );
    for (kind, s) in &by_kind {
        text.push_str(&format!(
            "{kind}: {}/{} rate {}\n",
            s.valid,
            s.total,
            rate(s.rate)
        ));
    }
    let buckets = bucket.map(|_| weekly_series(&log, &window));
    if let Some(bs) = &buckets {
        for b in bs {
            text.push_str(&format!(
                "{} {}/{} {}\n",
                b.week,
                b.stats.valid,
                b.stats.total,
                rate(b.stats.rate)
            ));
        }
    }
    let mut json = json!({
        "valid": overall.valid,
        "total": overall.total,
        "rate": overall.rate,
        "by_kind": by_kind,
    });
    if let Some(bs) = buckets {
        json["buckets"] = serde_json::to_value(bs).expect("buckets serialize");
    }
    Ok(Report { text, json })
}

fn serve(args: &ServeArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(p) => ServeConfig::load(p).map_err(|e| Failure(e.to_string()))?,
        None => {
            let missing = |flag: &str| Failure(format!("--{flag} is required without --config"));
            ServeConfig {
                corpus: args.corpus.clone().ok_or_else(|| missing("corpus"))?,
                model: None,
                profiles: None,
                listen: paramdoc_service::config::DEFAULT_LISTEN.to_string(),
                events: args.events.clone().ok_or_else(|| missing("events"))?,
            }
        }
    };
    if let Some(c) = &args.corpus {
        cfg.corpus = c.clone();
    }
    if let Some(m) = &args.model {
        cfg.model = Some(m.clone());
    }
    if let Some(p) = &args.profiles {
        cfg.profiles = Some(p.clone());
    }
    if let Some(l) = &args.listen {
        cfg.listen = l.clone();
    }
    if let Some(e) = &args.events {
        cfg.events = e.clone();
    }
    paramdoc_service::serve_blocking(&cfg).map_err(|e| Failure(e.to_string()))?;
    Ok(Report {
        text: String::new(),
        json: json!({ "stopped": true }),
    })
}
