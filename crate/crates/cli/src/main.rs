use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pagegnn::harness::dataset::write_record;
use pagegnn::{
    evaluate, load_model, page_to_record, predict_html, save_model, split_dataset, train, Dataset,
    Error, ExternalEmbeddings, ModelConfig, PipelineMode, Readout, SplitRatios, TextSource,
    XPathLimits,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pagegnn",
    version,
    about = "Classify web pages from their text and DOM structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fused,
    TextOnly,
    GraphOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadoutArg {
    Sum,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadInput {
    Fused,
    GraphOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a directory of labelled HTML files into a JSONL dataset.
    Extract {
        #[arg(long)]
        input_dir: PathBuf,
        /// Lines of `relative/path<TAB>label`.
        #[arg(long)]
        labels_file: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a model; a `val_ratio` share of the data is held out for model selection.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// `key=value` hyperparameter file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        readout: Option<ReadoutArg>,
        /// Which representation feeds the classifier; `graph-only` equals `--mode graph-only`.
        #[arg(long, value_enum, conflicts_with = "mode")]
        head_input: Option<HeadInput>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Precomputed page vectors, one `page_id<TAB>v1,v2,...` line each.
        #[arg(long)]
        text_embeddings: Option<PathBuf>,
    },
    /// Print accuracy, macro precision, recall and F1 plus the confusion matrix.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text_embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
    },
    /// Classify one HTML file.
    Predict {
        #[arg(long)]
        html: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, requires = "page_id")]
        text_embeddings: Option<PathBuf>,
        /// Key of this page in the embeddings file.
        #[arg(long)]
        page_id: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_numeric() => EXIT_NUMERIC,
        Some(Error::Config(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Extract {
            input_dir,
            labels_file,
            output,
        } => extract(&input_dir, &labels_file, &output),
        Command::Train {
            data,
            config,
            model_out,
            seed,
            mode,
            readout,
            head_input,
            epochs,
            text_embeddings,
        } => {
            let mut cfg = match &config {
                Some(path) => ModelConfig::load(path)
                    .with_context(|| format!("reading {}", path.display()))?,
                None => ModelConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(epochs) = epochs {
                cfg.epochs = epochs;
            }
            cfg.mode = match (mode, head_input) {
                (Some(ModeArg::Fused), _) | (None, Some(HeadInput::Fused)) => PipelineMode::Fused,
                (Some(ModeArg::TextOnly), _) => PipelineMode::TextOnly,
                (Some(ModeArg::GraphOnly), _) | (None, Some(HeadInput::GraphOnly)) => {
                    PipelineMode::GraphOnly
                }
                (None, None) => cfg.mode,
            };
            match readout {
                Some(ReadoutArg::Sum) => cfg.readout = Readout::Sum,
                Some(ReadoutArg::Max) => cfg.readout = Readout::Max,
                None => {}
            }
            let external = match &text_embeddings {
                Some(path) => {
                    cfg.text_source = TextSource::External;
                    Some(load_embeddings(path, cfg.text_width)?)
                }
                None => None,
            };
            cfg.validate()?;
            run_train(&data, &cfg, &model_out, external.as_ref())
        }
        Command::Evaluate {
            data,
            model,
            text_embeddings,
            batch_size,
        } => {
            let model =
                load_model(&model).with_context(|| format!("loading {}", model.display()))?;
            let external = text_embeddings
                .map(|p| load_embeddings(&p, model.config.text_width))
                .transpose()?;
            let data =
                Dataset::load(&data).with_context(|| format!("reading {}", data.display()))?;
            let m = evaluate(&model, &data, external.as_ref(), batch_size)?;
            println!("accuracy\t{:.4}", m.accuracy);
            println!("macro_precision\t{:.4}", m.macro_precision);
            println!("macro_recall\t{:.4}", m.macro_recall);
            println!("macro_f1\t{:.4}", m.macro_f1);
            println!("confusion (rows: true, columns: predicted)");
            println!("\t{}", model.labels.join("\t"));
            for (label, row) in model.labels.iter().zip(&m.confusion) {
                let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                println!("{label}\t{}", cells.join("\t"));
            }
            Ok(())
        }
        Command::Predict {
            html,
            model,
            text_embeddings,
            page_id,
        } => {
            let model =
                load_model(&model).with_context(|| format!("loading {}", model.display()))?;
            if model.config.mode.uses_text()
                && model.config.text_source == TextSource::External
                && text_embeddings.is_none()
            {
                bail!(Error::Config(
                    "this model reads external text embeddings; pass --text-embeddings and --page-id".into()
                ));
            }
            let external = text_embeddings
                .map(|p| load_embeddings(&p, model.config.text_width))
                .transpose()?;
            let raw = std::fs::read_to_string(&html)
                .with_context(|| format!("reading {}", html.display()))?;
            let id = page_id.unwrap_or_else(|| html.display().to_string());
            let (label, pred) = predict_html(&model, &id, &raw, external.as_ref())?;
            println!("label\t{label}");
            for (name, p) in model.labels.iter().zip(&pred.probs) {
                println!("p({name})\t{p:.6}");
            }
            Ok(())
        }
    }
}

fn load_embeddings(path: &Path, dim: usize) -> anyhow::Result<ExternalEmbeddings> {
    ExternalEmbeddings::load(path, dim).with_context(|| format!("reading {}", path.display()))
}

fn extract(input_dir: &Path, labels_file: &Path, output: &Path) -> anyhow::Result<()> {
    let listing = std::fs::read_to_string(labels_file)
        .with_context(|| format!("reading {}", labels_file.display()))?;
    let mut entries = Vec::new();
    for (n, line) in listing.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((path, label)) = line.split_once('\t') else {
            bail!(Error::Dataset(format!(
                "{} line {}: expected path<TAB>label",
                labels_file.display(),
                n + 1
            )));
        };
        entries.push((path.trim().to_string(), label.trim().to_string()));
    }
    entries.sort();

    let mut out = std::io::BufWriter::new(
        std::fs::File::create(output).with_context(|| format!("creating {}", output.display()))?,
    );
    let (mut written, mut skipped) = (0, 0);
    for (path, label) in &entries {
        let full = input_dir.join(path);
        let bytes = std::fs::read(&full).with_context(|| format!("reading {}", full.display()))?;
        let raw = String::from_utf8_lossy(&bytes);
        match page_to_record(path.as_str(), &raw, label.as_str(), XPathLimits::default()) {
            Ok(record) => {
                write_record(&mut out, &record)?;
                written += 1;
            }
            Err(Error::EmptyDocument) => {
                eprintln!("warning: {path}: empty document, skipped");
                skipped += 1;
            }
            Err(e) => return Err(e).with_context(|| format!("extracting {path}")),
        }
    }
    out.flush()?;
    eprintln!(
        "extracted {written} pages ({skipped} empty skipped) to {}",
        output.display()
    );
    Ok(())
}

fn run_train(
    data_path: &Path,
    cfg: &ModelConfig,
    model_out: &Path,
    external: Option<&ExternalEmbeddings>,
) -> anyhow::Result<()> {
    let data =
        Dataset::load(data_path).with_context(|| format!("reading {}", data_path.display()))?;
    let ratios = SplitRatios::new(1.0 - cfg.val_ratio, cfg.val_ratio, 0.0)?;
    let split = split_dataset(&data, ratios, cfg.seed, false)?;
    eprintln!(
        "training on {} pages, validating on {}, {} classes, mode {}",
        split.train.len(),
        split.val.len(),
        data.num_classes(),
        cfg.mode.as_str()
    );
    let (model, history) = train(&split.train, &split.val, cfg, external)?;
    for e in &history.epochs {
        let val = e
            .val
            .as_ref()
            .map(|v| format!("\tval_acc {:.4}\tval_f1 {:.4}", v.accuracy, v.macro_f1))
            .unwrap_or_default();
        println!(
            "epoch {}\tloss {:.6}\ttrain_acc {:.4}{val}",
            e.epoch + 1,
            e.train_loss,
            e.train.accuracy
        );
    }
    if let Some(best) = history.best_epoch {
        println!("kept epoch {}", best + 1);
    }
    save_model(&model, model_out).with_context(|| format!("writing {}", model_out.display()))?;
    eprintln!("model written to {}", model_out.display());
    Ok(())
}
