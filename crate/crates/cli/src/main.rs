//! Command-line front end: train, eval, generate, bench, verify.
//!
//! Exit codes: 0 success, 1 verification or scaling-assertion failure,
//! 2 configuration error, 3 I/O error, 4 checkpoint error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agglo_core::bench::{crossover, fit_scaling, run_bench, write_csv, write_meta, BenchConfig};
use agglo_core::data::{ingest_text8, split, synthetic_corpus, CharVocab, CorpusSplit};
use agglo_core::error::Error;
use agglo_core::model::{checkpoint, generate, AttentionKind, EncodingKind};
use agglo_core::tensor::{DType, Elem};
use agglo_core::training::{evaluate, train, TrainOptions};
use agglo_core::verify::{run_all, VerifyOptions};
use agglo_core::Result;

use config::{parse_lengths, BenchSettings, RunSettings};

const TEXT8_URL: &str = "http://mattmahoney.net/dc/text8.zip";

#[derive(Parser)]
#[command(
    name = "agglo",
    about = "Linear-time class-based attention: training, evaluation, benchmarking, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Preset name or config file path
    #[arg(long)]
    config: Option<String>,
    /// Global random seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics, checkpoints and echoed config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Numeric precision override
    #[arg(long)]
    dtype: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and keep the best-validation checkpoint
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Corpus file path, or `synthetic` for the built-in generator
        #[arg(long)]
        data: Option<String>,
        /// Read at most this many corpus characters
        #[arg(long)]
        limit_chars: Option<usize>,
        /// Attention kind override
        #[arg(long)]
        attention: Option<String>,
        /// Sequence encoding override
        #[arg(long)]
        encoding: Option<String>,
        /// Epoch cap override
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Report bits per character of a checkpoint on a corpus split
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        /// Checkpoint file
        #[arg(long)]
        ckpt: PathBuf,
        /// Which split to score: train, valid or test
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        limit_chars: Option<usize>,
    },
    /// Sample text from a checkpoint
    Generate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "the ")]
        prompt: String,
        #[arg(long, default_value_t = 200)]
        n_tokens: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
    },
    /// Time isolated attention layers across sequence lengths
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated sequence lengths
        #[arg(long)]
        lengths: Option<String>,
        /// Fail (exit 1) unless fitted slopes sit in the expected bands
        #[arg(long)]
        assert_scaling: bool,
        /// Time forward+backward instead of forward only
        #[arg(long)]
        time_backward: bool,
    },
    /// Run the oracle, causality and gradient check suite
    Verify {
        #[command(flatten)]
        common: CommonOpts,
        /// Fault-injection hook: remove the prefix restriction from the
        /// masked layer under test; the causality check must fail
        #[arg(long)]
        break_masking: bool,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::Checkpoint(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    agglo_core::retain_large_allocations();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train {
            common,
            data,
            limit_chars,
            attention,
            encoding,
            max_epochs,
        } => cmd_train(common, data, limit_chars, attention, encoding, max_epochs),
        Command::Eval {
            common,
            ckpt,
            split,
            data,
            limit_chars,
        } => cmd_eval(common, ckpt, split, data, limit_chars),
        Command::Generate {
            common,
            ckpt,
            prompt,
            n_tokens,
            temperature,
        } => cmd_generate(common, ckpt, prompt, n_tokens, temperature),
        Command::Bench {
            common,
            lengths,
            assert_scaling,
            time_backward,
        } => cmd_bench(common, lengths, assert_scaling, time_backward),
        Command::Verify {
            common,
            break_masking,
        } => cmd_verify(common, break_masking),
    }
}

fn echo_config(text: &str, out: Option<&Path>) -> Result<()> {
    print!("{text}");
    println!("---");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("effective_config.txt"), text)?;
    }
    Ok(())
}

/// Tokenized corpus from a real file or the deterministic generator.
fn load_corpus(settings: &RunSettings) -> Result<CorpusSplit> {
    let tokens = if settings.corpus == "synthetic" {
        CharVocab::encode(&synthetic_corpus(settings.limit_chars, settings.seed))
    } else {
        let path = Path::new(&settings.corpus);
        if !path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!(
                    "corpus file {} not found; fetch and extract it yourself (official source: {}) or pass --data synthetic",
                    path.display(),
                    TEXT8_URL
                ),
            )));
        }
        ingest_text8(path, Some(settings.limit_chars))?.0
    };
    split(&tokens, settings.fractions)
}

fn apply_common(settings: &mut RunSettings, common: &CommonOpts) -> Result<()> {
    if let Some(seed) = common.seed {
        settings.seed = seed;
    }
    if let Some(dtype) = &common.dtype {
        settings.dtype = dtype.parse()?;
    }
    Ok(())
}

fn cmd_train(
    common: CommonOpts,
    data: Option<String>,
    limit_chars: Option<usize>,
    attention: Option<String>,
    encoding: Option<String>,
    max_epochs: Option<usize>,
) -> Result<ExitCode> {
    let mut settings = RunSettings::resolve(common.config.as_deref())?;
    apply_common(&mut settings, &common)?;
    if let Some(d) = data {
        settings.corpus = d;
    }
    if let Some(l) = limit_chars {
        settings.limit_chars = l;
    }
    if let Some(a) = attention {
        settings.model.attention_kind = a.parse::<AttentionKind>()?;
    }
    if let Some(e) = encoding {
        settings.model.encoding_kind = e.parse::<EncodingKind>()?;
    }
    if let Some(m) = max_epochs {
        settings.max_epochs = m;
    }
    settings.model.validate()?;
    echo_config(&settings.to_text("train"), common.out.as_deref())?;

    let corpus = load_corpus(&settings)?;
    let opts = TrainOptions {
        batch_size: settings.batch_size,
        max_epochs: settings.max_epochs,
        patience: settings.patience,
        seed: settings.seed,
        rho: settings.rho,
        eps: settings.eps,
        clip_norm: settings.clip_norm,
        target_valid_bits: settings.target_valid_bits,
        out_dir: common.out.clone(),
        verbose: true,
    };
    let run = match settings.dtype {
        DType::F32 => train::<f32>(&settings.model, &corpus, &opts)?.0,
        DType::F64 => train::<f64>(&settings.model, &corpus, &opts)?.0,
    };
    println!(
        "finished after {} epochs ({:?}); best validation {:.4} bits at epoch {}",
        run.epochs_run, run.stop, run.best_valid_bits, run.best_epoch
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    common: CommonOpts,
    ckpt: PathBuf,
    split_name: String,
    data: Option<String>,
    limit_chars: Option<usize>,
) -> Result<ExitCode> {
    let mut settings = RunSettings::resolve(common.config.as_deref())?;
    apply_common(&mut settings, &common)?;
    if let Some(d) = data {
        settings.corpus = d;
    }
    if let Some(l) = limit_chars {
        settings.limit_chars = l;
    }
    echo_config(&settings.to_text("eval"), common.out.as_deref())?;
    let corpus = load_corpus(&settings)?;
    let stream = match split_name.as_str() {
        "train" => &corpus.train,
        "valid" => &corpus.valid,
        "test" => &corpus.test,
        other => return Err(Error::config(format!("unknown split `{other}`"))),
    };

    fn run<E: Elem>(ckpt: &Path, stream: &[u32], batch: usize) -> Result<(f64, usize)> {
        let model = checkpoint::load::<E>(ckpt)?;
        Ok((
            evaluate(&model, stream, model.config.seq_len, batch)?,
            model.config.seq_len,
        ))
    }
    let (bits, _) = match settings.dtype {
        DType::F32 => run::<f32>(&ckpt, stream, settings.batch_size)?,
        DType::F64 => run::<f64>(&ckpt, stream, settings.batch_size)?,
    };
    println!("{split_name} loss: {bits:.4} bits per character");
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(
    common: CommonOpts,
    ckpt: PathBuf,
    prompt: String,
    n_tokens: usize,
    temperature: f64,
) -> Result<ExitCode> {
    let mut settings = RunSettings::resolve(common.config.as_deref())?;
    apply_common(&mut settings, &common)?;
    echo_config(&settings.to_text("generate"), common.out.as_deref())?;

    fn run<E: Elem>(
        ckpt: &Path,
        prompt: &str,
        n_tokens: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<String> {
        let model = checkpoint::load::<E>(ckpt)?;
        if model.config.vocab_size != CharVocab::SIZE {
            return Err(Error::config(format!(
                "checkpoint vocabulary {} is not the {}-symbol character set",
                model.config.vocab_size,
                CharVocab::SIZE
            )));
        }
        let ids = generate(
            &model,
            &CharVocab::encode(prompt),
            n_tokens,
            temperature,
            seed,
        )?;
        Ok(CharVocab::decode(&ids))
    }
    let text = match settings.dtype {
        DType::F32 => run::<f32>(&ckpt, &prompt, n_tokens, temperature, settings.seed)?,
        DType::F64 => run::<f64>(&ckpt, &prompt, n_tokens, temperature, settings.seed)?,
    };
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(
    common: CommonOpts,
    lengths: Option<String>,
    assert_scaling: bool,
    time_backward: bool,
) -> Result<ExitCode> {
    let mut settings = BenchSettings::resolve(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        settings.seed = seed;
    }
    if let Some(dtype) = &common.dtype {
        settings.dtype = dtype.parse()?;
    }
    if let Some(csv) = &lengths {
        settings.seq_lengths = parse_lengths(csv)?;
    }
    settings.time_backward |= time_backward;
    echo_config(&settings.to_text(), common.out.as_deref())?;

    let config = BenchConfig {
        batch: settings.batch,
        d_model: settings.d_model,
        heads_or_classes: settings.heads_or_classes,
        seq_lengths: settings.seq_lengths.clone(),
        replicas: settings.replicas,
        warmup: settings.warmup,
        masked: settings.masked,
        seed: settings.seed,
        time_backward: settings.time_backward,
    };
    // the slope bands need >= 3 lengths before any timing is spent
    if assert_scaling && config.seq_lengths.len() < 3 {
        return Err(Error::contract(format!(
            "--assert-scaling needs >= 3 sequence lengths, got {:?}",
            config.seq_lengths
        )));
    }
    let run = match settings.dtype {
        DType::F32 => run_bench::<f32>(&config)?,
        DType::F64 => run_bench::<f64>(&config)?,
    };
    let fits = fit_scaling(&run.records)?;
    let cross = crossover(&run.records)?;

    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        write_csv(&run.records, &dir.join("bench.csv"))?;
        write_meta(&run, &fits, cross, &dir.join("bench_meta.txt"))?;
    }
    println!(
        "{} records on {} (pinned: {})",
        run.records.len(),
        run.meta.machine,
        run.meta.pinned
    );
    for s in &run.skipped {
        println!(
            "skipped {} at length {} replica {}: {}",
            s.kind.name(),
            s.seq_len,
            s.replica,
            s.reason
        );
    }
    for fit in &fits {
        println!(
            "{} log-log slope {:.3} +/- {:.3} over lengths {:?}",
            fit.kind.name(),
            fit.slope,
            fit.stderr,
            fit.lengths_used
        );
    }
    match cross {
        Some(t) => println!("crossover: class averaging overtakes full attention at length {t}"),
        None => println!("crossover: none within the measured range"),
    }

    if assert_scaling {
        let mut ok = true;
        for fit in &fits {
            let band = match fit.kind {
                AttentionKind::Full => (1.7, 2.3),
                AttentionKind::Agglomerative => (0.7, 1.3),
            };
            if fit.slope < band.0 || fit.slope > band.1 {
                println!(
                    "scaling assertion FAILED: {} slope {:.3} outside [{}, {}]",
                    fit.kind.name(),
                    fit.slope,
                    band.0,
                    band.1
                );
                ok = false;
            }
        }
        if !ok {
            return Ok(ExitCode::from(1));
        }
        println!("scaling assertion passed");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(common: CommonOpts, break_masking: bool) -> Result<ExitCode> {
    let dtype = match &common.dtype {
        Some(d) => d.parse()?,
        None => DType::F64,
    };
    println!(
        "# verification (dtype={}, break_masking={break_masking})",
        dtype.name()
    );
    let results = run_all(&VerifyOptions {
        dtype,
        break_masking,
    })?;
    let mut all_ok = true;
    for r in &results {
        println!(
            "[{}] {} — {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        all_ok &= r.passed;
    }
    if all_ok {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verification failed");
        Ok(ExitCode::from(1))
    }
}

#[cfg(test)]
mod tests {
    use super::config::{KvConfig, RunSettings};

    #[test]
    fn effective_config_round_trips() {
        let mut a = RunSettings::resolve(Some("text8_full_embed")).unwrap();
        a.seed = 1234;
        a.limit_chars = 5555;
        let text = a.to_text("train");
        let mut b = RunSettings::default();
        b.apply(&KvConfig::parse(&text).unwrap()).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.limit_chars, b.limit_chars);
        assert_eq!(a.fractions, b.fractions);
    }

    #[test]
    fn unknown_presets_are_config_errors() {
        assert!(RunSettings::resolve(Some("no_such_preset")).is_err());
    }
}
