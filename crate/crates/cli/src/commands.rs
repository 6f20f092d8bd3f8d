use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use serde_json::json;

use sarquant::corpus::{self, aggregate, corpus_stats, read_votes};
use sarquant::eval::{cross_validate, MlpLearner};
use sarquant::features::{featurize_corpus, hash_featurize, load_embedding_table};
use sarquant::model::{grad_check, train, RegressorParams};
use sarquant::{Backend, EmbeddingTable, FeatureConfig, LabeledExample, Model, Sample};
use sarquant_annotate::AnnotationService;

use crate::args::{Command, FeatureArgs};

pub enum Failure {
    /// Flags that parse but do not make sense together.
    Usage(String),
    /// Anything wrong with inputs, outputs or the computation itself.
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Aggregate { input, out, quorum } => {
            let records = read_votes(open(&input)?, quorum).with_context(|| format!("reading {}", input.display()))?;
            let corpus = aggregate(&records).context("aggregating votes")?;
            write_atomic(&out, |w| Ok(corpus::write_corpus(w, &corpus)?))?;
            eprintln!("aggregated {} sentences into {}", corpus.len(), out.display());
            Ok(())
        }
        Command::Stats {
            input,
            threshold,
            quorum,
            json,
        } => {
            let corpus = load_corpus(&input)?;
            let stats = corpus_stats(&corpus, threshold, quorum);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).context("serializing stats")?);
            } else {
                print!("{stats}");
            }
            Ok(())
        }
        Command::Train {
            input,
            model,
            history,
            features,
            train: train_args,
        } => {
            let config = train_args.config();
            config.validate().map_err(|e| usage(e.to_string()))?;
            let corpus = load_corpus(&input)?;
            let (feature_config, samples) = build_samples(&corpus, &features)?;
            let outcome = train(&samples, &config).context("training")?;
            let trained = Model {
                features: Some(feature_config),
                ..outcome.model
            };
            write_atomic(&model, |w| Ok(w.write_all(trained.to_json().as_bytes())?))?;
            if let Some(path) = history {
                let body = serde_json::to_string_pretty(&json!({ "epoch_loss": outcome.history }))
                    .context("serializing history")?;
                write_atomic(&path, |w| Ok(w.write_all(body.as_bytes())?))?;
            }
            if let Some(last) = outcome.history.last() {
                eprintln!("final epoch loss {last:.9}");
            }
            Ok(())
        }
        Command::Cv {
            input,
            k,
            out,
            threshold,
            features,
            train: train_args,
        } => {
            let config = train_args.config();
            config.validate().map_err(|e| usage(e.to_string()))?;
            if k < 2 {
                return Err(usage("--k must be at least 2"));
            }
            let corpus = load_corpus(&input)?;
            if corpus.len() < k {
                return Err(Failure::Data(anyhow!(
                    "{} examples cannot be split into {k} folds",
                    corpus.len()
                )));
            }
            let (feature_config, samples) = build_samples(&corpus, &features)?;
            let seed = config.seed;
            let learner = MlpLearner { config };
            let mut report = cross_validate(&samples, &learner, k, seed, threshold).context("cross-validation")?;
            report.config = json!({ "model": report.config, "features": feature_config });
            if let Some(path) = out {
                let body = report.to_json() + "\n";
                write_atomic(&path, |w| Ok(w.write_all(body.as_bytes())?))?;
            }
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Predict {
            model,
            text,
            input,
            corpus,
            table,
        } => predict(&model, text, input.as_deref(), corpus.as_deref(), table.as_deref()),
        Command::Gradcheck {
            dim,
            hidden,
            layers,
            step,
            tolerance,
            seed,
        } => {
            if dim == 0 || hidden == 0 || layers == 0 {
                return Err(usage("--dim, --hidden and --layers must be positive"));
            }
            let params = RegressorParams::init(dim, hidden, layers, seed).context("initializing network")?;
            let x: Vec<f64> = (0..dim).map(|i| ((i as f64 + 1.0) * 0.37).sin()).collect();
            let err = grad_check(&params, &x, 0.3, step).context("gradient check")?;
            println!("max relative error {err:.3e}");
            if err < tolerance {
                Ok(())
            } else {
                Err(Failure::Data(anyhow!("gradient check failed: {err:.3e} >= {tolerance:.3e}")))
            }
        }
        Command::Serve {
            port,
            host,
            data_dir,
            quorum,
        } => {
            if quorum == 0 {
                return Err(usage("--quorum must be positive"));
            }
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| usage(format!("bad listen address {host}:{port}: {e}")))?;
            let service = AnnotationService::open(&data_dir, quorum)
                .with_context(|| format!("opening event log in {}", data_dir.display()))?;
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime
                .block_on(sarquant_annotate::http::serve(addr, Arc::new(service)))
                .context("serving")?;
            Ok(())
        }
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<LabeledExample>> {
    let corpus = corpus::read_corpus(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if corpus.is_empty() {
        return Err(anyhow!("{} holds no examples", path.display()));
    }
    Ok(corpus)
}

fn load_table(path: &Path) -> anyhow::Result<EmbeddingTable> {
    load_embedding_table(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn build_samples(corpus: &[LabeledExample], args: &FeatureArgs) -> Result<(FeatureConfig, Vec<Sample>), Failure> {
    let table = match (&args.table, args.backend) {
        (Some(path), crate::args::BackendArg::Embeddings) => Some(load_table(path)?),
        (None, crate::args::BackendArg::Embeddings) => {
            return Err(usage("--backend embeddings needs --table"));
        }
        (_, crate::args::BackendArg::Hashed) => None,
    };
    let config = args.config(table.as_ref().map(EmbeddingTable::dim));
    config.validate().map_err(|e| usage(e.to_string()))?;
    let vectors = featurize_corpus(corpus, &config, table.as_ref()).context("computing features")?;
    let samples = vectors
        .into_iter()
        .zip(corpus)
        .map(|(features, example)| Sample::new(features, example.label))
        .collect();
    Ok((config, samples))
}

fn predict(
    model_path: &Path,
    texts: Vec<String>,
    input: Option<&Path>,
    corpus_path: Option<&Path>,
    table_path: Option<&Path>,
) -> Outcome {
    let model = Model::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let features = model
        .features
        .clone()
        .ok_or_else(|| anyhow!("model file carries no feature settings"))?;

    let vectors = match features.backend {
        Backend::Hashed => {
            let mut all = texts;
            if let Some(path) = input {
                for line in open(path)?.lines() {
                    all.push(line.with_context(|| format!("reading {}", path.display()))?);
                }
            }
            if let Some(path) = corpus_path {
                all.extend(load_corpus(path)?.into_iter().map(|e| e.text));
            }
            if all.is_empty() {
                return Err(usage("nothing to predict: pass --text, --in or --corpus"));
            }
            all.iter().map(|t| hash_featurize(t, &features)).collect::<Vec<_>>()
        }
        Backend::Embeddings => {
            let (Some(corpus_path), Some(table_path)) = (corpus_path, table_path) else {
                return Err(usage("an embeddings model needs --corpus and --table"));
            };
            let corpus = load_corpus(corpus_path)?;
            let table = load_table(table_path)?;
            featurize_corpus(&corpus, &features, Some(&table)).context("computing features")?
        }
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for v in &vectors {
        let y = model.predict(v.as_slice()).context("prediction")?;
        writeln!(out, "{y:.9}").context("writing output")?;
    }
    Ok(())
}

/// Write through a temporary file in the target directory, then rename, so a
/// failed run never leaves a partial file behind.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut File) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    fill(tmp.as_file_mut()).with_context(|| format!("writing {}", path.display()))?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}
