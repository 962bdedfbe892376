use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lpface::image::{read_pgm, write_pgm};
use lpface::logpolar::{log_polar_transform, LogPolarConfig};
use lpface::pipeline::{
    compare_modes, evaluate, load_bundle, load_generic, load_orl, save_bundle, split,
    sweep_hidden1, train_pipeline, write_comparison_csv, write_curve_csv, write_sweep_csv, Dataset,
    Mode, PipelineConfig,
};
use lpface::{selftest, synth, Error};

/// Face recognition with log-polar registration, eigenfaces and an MLP.
#[derive(Parser)]
#[command(name = "lpface", version)]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log-polar transform of a single PGM image.
    Transform {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        base: u32,
        /// Innermost sampled radius as a fraction of the reference radius.
        #[arg(long)]
        inner_ratio: Option<f64>,
    },
    /// Train a model on the training split of a dataset.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Where to write the model bundle.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on the held-out split of a dataset.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Score every image instead of only the held-out split.
        #[arg(long)]
        all: bool,
        /// Winning-score threshold for false rejection.
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<f64>,
        /// Write the recognition curve here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Error traces for several first-hidden-layer widths.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        epochs: usize,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Train and evaluate both modes for several seeds.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Run the built-in numerical checks.
    Selftest,
    /// Write a procedural ORL-shaped face dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        subjects: usize,
        #[arg(long, default_value_t = 10)]
        images: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    /// `s1..sK/1..J.pgm`
    Orl,
    /// `<subject>/<any>.pgm`, resized to `--size`
    Generic,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset root directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Layout::Orl)]
    layout: Layout,
    /// Target size for the generic layout, `WxH`.
    #[arg(long, value_parser = parse_size, default_value = "92x112")]
    size: (usize, usize),
}

#[derive(Args)]
struct ModelArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    per_class_train: Option<usize>,
}

impl ModelArgs {
    fn config(&self) -> lpface::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(seed) = self.seed {
            cfg.hyper.seed = seed;
        }
        if let Some(n) = self.max_epochs {
            cfg.hyper.max_epochs = n;
        }
        if let Some(k) = self.per_class_train {
            cfg.split.per_class_train = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn load(data: &DataArgs) -> lpface::Result<Dataset> {
    let ds = match data.layout {
        Layout::Orl => load_orl(&data.data)?,
        Layout::Generic => load_generic(&data.data, data.size)?,
    };
    log::info!(
        "loaded {} images of {} subjects from {}",
        ds.len(),
        ds.num_classes(),
        data.data.display()
    );
    Ok(ds)
}

fn create(path: &Path) -> lpface::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(command: Command) -> lpface::Result<()> {
    match command {
        Command::Transform {
            input,
            output,
            base,
            inner_ratio,
        } => {
            let mut cfg = LogPolarConfig {
                base,
                ..Default::default()
            };
            if let Some(r) = inner_ratio {
                cfg.inner_ratio = r;
            }
            let img = read_pgm(&input)?;
            let out = log_polar_transform(&img, &cfg)?;
            write_pgm(&output, &out)?;
            println!(
                "{}x{} -> {}x{}",
                img.width(),
                img.height(),
                out.width(),
                out.height()
            );
        }
        Command::Train { data, model, out } => {
            let cfg = model.config()?;
            let ds = load(&data)?;
            let (train, _) = split(&ds, &cfg.split)?;
            let bundle = train_pipeline(&train, &cfg)?;
            save_bundle(&bundle, &out)?;
            println!(
                "{} model: {} epochs, E = {:.6} ({:?}), saved to {}",
                bundle.mode,
                bundle.meta.epochs,
                bundle.meta.final_error,
                bundle.meta.stop,
                out.display()
            );
        }
        Command::Eval {
            bundle,
            data,
            all,
            threshold,
            csv,
        } => {
            let bundle = load_bundle(&bundle)?;
            let ds = load(&data)?;
            let test = if all {
                ds
            } else {
                split(&ds, &bundle.split)?.1
            };
            let metrics = evaluate(&bundle, &test, threshold.unwrap_or(0.0))?;
            if let Some(path) = csv {
                let mut w = create(&path)?;
                write_curve_csv(&metrics, &mut w)?;
                w.flush()?;
            }
            println!(
                "{} images: recognition {:.2}%, false rejection {:.2}% at threshold {}",
                metrics.total,
                metrics.recognition_rate,
                metrics.false_rejection_rate,
                metrics.threshold
            );
        }
        Command::Sweep {
            data,
            model,
            sizes,
            epochs,
            csv,
        } => {
            let cfg = model.config()?;
            let ds = load(&data)?;
            let (train, _) = split(&ds, &cfg.split)?;
            let results = sweep_hidden1(&train, &cfg, &sizes, epochs)?;
            let mut w = create(&csv)?;
            write_sweep_csv(&results, &mut w)?;
            w.flush()?;
            for r in &results {
                match &r.trace {
                    Ok(_) => println!(
                        "hidden1 = {:>3}: E = {:.6}",
                        r.hidden1,
                        r.final_error().unwrap_or(f64::NAN)
                    ),
                    Err(e) => println!("hidden1 = {:>3}: failed: {e}", r.hidden1),
                }
            }
        }
        Command::Compare {
            data,
            model,
            seeds,
            csv,
        } => {
            let cfg = model.config()?;
            let ds = load(&data)?;
            let rows = compare_modes(&ds, &cfg, &seeds)?;
            let mut w = create(&csv)?;
            write_comparison_csv(&rows, &mut w)?;
            w.flush()?;
            for r in &rows {
                println!(
                    "{:<8} seed {}: error {:>6.2}% (published {:.1}%)",
                    r.mode.to_string(),
                    r.seed,
                    r.metrics.error_rate(),
                    r.published_error_rate()
                );
            }
        }
        Command::Selftest => {
            let checks = selftest::run();
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                return Err(Error::InvalidInput("self-test failed".into()));
            }
        }
        Command::Synth {
            out,
            subjects,
            images,
            seed,
        } => {
            if subjects < 2 || images < 2 {
                return Err(Error::InvalidInput(
                    "need at least 2 subjects and 2 images each".into(),
                ));
            }
            let spec = synth::SynthSpec {
                subjects,
                images_per_subject: images,
                seed,
                ..Default::default()
            };
            synth::write_orl_tree(&synth::dataset(&spec), &out)?;
            println!("wrote {} images to {}", subjects * images, out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TrainingDiverged { .. } => 3,
        e if e.is_data_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
