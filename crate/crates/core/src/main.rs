use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavefuse::eigen::ComponentCount;
use wavefuse::fusion::{fuse_images, FusionPolicy, FusionRule};
use wavefuse::imgio::{load_image, save_image};
use wavefuse::pipeline::{
    evaluate, export_decomposition, generate_synthetic_dataset, ingest_dataset, load_model,
    run_protocol, save_model, train_pipeline, FusionSettings, Modality, PipelineConfig,
    PipelineError, SplitSpec, Subset, SynthConfig,
};
use wavefuse::wavelet::{decompose_padded, WaveletKind};

#[derive(Parser)]
#[command(
    name = "wavefuse",
    version,
    about = "Wavelet fusion of thermal and visual face images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-level decomposition of one PGM, exported as raw f64 grids.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "db2")]
        wavelet: WaveletKind,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse one thermal/visual pair into a single PGM.
    Fuse {
        #[arg(long)]
        thermal: PathBuf,
        #[arg(long)]
        visual: PathBuf,
        #[arg(long, default_value = "db2")]
        wavelet: WaveletKind,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value = "maxabs")]
        approx_rule: FusionRule,
        #[arg(long, default_value = "minabs")]
        detail_rule: FusionRule,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic class-structured dataset of PGM pairs.
    Synth {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 64)]
        rows: usize,
        #[arg(long, default_value_t = 64)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse, fit eigenfaces and train the classifier.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "db2")]
        wavelet: WaveletKind,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "model")]
        out: PathBuf,
    },
    /// Recognition rates of a trained model.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Defaults to the modality the model was trained with.
        #[arg(long)]
        modality: Option<Modality>,
        #[arg(long, default_value = "test")]
        subset: Subset,
    },
    /// Train and evaluate with both Haar and db2 on the same split.
    Protocol {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Training fraction per class, or a JSON file mapping class to training ids.
    #[arg(long, default_value = "0.5")]
    split: String,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value = "maxabs")]
    approx_rule: FusionRule,
    #[arg(long, default_value = "minabs")]
    detail_rule: FusionRule,
    #[arg(long, default_value = "fused")]
    modality: Modality,
    /// Number of eigenfaces, or AUTO for 95% of the eigenvalue mass.
    #[arg(long, default_value = "AUTO")]
    pca_k: String,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "100")]
    hidden: String,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    target_error: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn usage(msg: String) -> PipelineError {
    PipelineError::InvalidArgument(msg)
}

impl ModelArgs {
    fn config(&self, wavelet: WaveletKind) -> Result<PipelineConfig, PipelineError> {
        let split = match self.split.parse::<f64>() {
            Ok(f) => SplitSpec::fraction(f, self.seed)?,
            Err(_) => SplitSpec::from_json_file(Path::new(&self.split))?,
        };
        let pca = if self.pca_k.eq_ignore_ascii_case("auto") {
            ComponentCount::default()
        } else {
            ComponentCount::Fixed(self.pca_k.parse().map_err(|_| {
                usage(format!(
                    "--pca-k expects AUTO or an integer, got {:?}",
                    self.pca_k
                ))
            })?)
        };
        let hidden = self
            .hidden
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                usage(format!(
                    "--hidden expects comma separated sizes, got {:?}",
                    self.hidden
                ))
            })?;
        Ok(PipelineConfig {
            fusion: FusionSettings {
                wavelet,
                levels: self.levels,
                policy: FusionPolicy::new(self.approx_rule, self.detail_rule),
                modality: self.modality,
            },
            split,
            pca,
            hidden,
            learning_rate: self.lr,
            momentum: self.momentum,
            epochs: self.epochs,
            target_error: self.target_error,
            seed: self.seed,
        })
    }
}

fn check_levels(levels: usize) -> Result<(), PipelineError> {
    if levels == 0 || levels > 16 {
        return Err(usage(format!("--levels must lie in 1..=16, got {levels}")));
    }
    Ok(())
}

fn warn_unpaired(unpaired: &[String]) {
    for f in unpaired {
        eprintln!("warning: skipping unpaired file {f}");
    }
}

fn run(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Decompose {
            input,
            wavelet,
            levels,
            out,
        } => {
            check_levels(levels)?;
            let img = load_image(&input)?;
            let tree = decompose_padded(&img, wavelet, levels)?;
            let manifest = export_decomposition(&tree, &out)?;
            println!(
                "{}: {}x{} padded to {}x{}, {} levels of {} written to {}",
                input.display(),
                manifest.original_dims.rows,
                manifest.original_dims.cols,
                manifest.padded_dims.rows,
                manifest.padded_dims.cols,
                levels,
                wavelet,
                out.display()
            );
        }
        Command::Fuse {
            thermal,
            visual,
            wavelet,
            levels,
            approx_rule,
            detail_rule,
            out,
        } => {
            check_levels(levels)?;
            let t = load_image(&thermal)?;
            let v = load_image(&visual)?;
            let fused = fuse_images(
                &t,
                &v,
                wavelet,
                levels,
                FusionPolicy::new(approx_rule, detail_rule),
            )?;
            save_image(&fused, &out)?;
        }
        Command::Synth {
            classes,
            per_class,
            rows,
            cols,
            seed,
            out,
        } => {
            let cfg = SynthConfig {
                classes,
                per_class,
                rows,
                cols,
                seed,
            };
            generate_synthetic_dataset(&cfg, &out)?;
            println!(
                "wrote {} pairs ({classes} classes x {per_class}) to {}",
                classes * per_class,
                out.display()
            );
        }
        Command::Train {
            data,
            wavelet,
            model,
            out,
        } => {
            let cfg = model.config(wavelet)?;
            check_levels(cfg.fusion.levels)?;
            let dataset = ingest_dataset(&data, &cfg.split)?;
            warn_unpaired(&dataset.unpaired);
            let trained = train_pipeline(&dataset, &cfg)?;
            save_model(&trained, &out)?;
            let t = &trained.training;
            println!(
                "trained on {} samples: {} eigenfaces, {} epochs, final mse {:.6}{}",
                dataset.count_in(wavefuse::pipeline::Split::Train),
                trained.eigenspace.k(),
                t.epochs_run,
                t.final_mse,
                if t.reached_target {
                    " (target reached)"
                } else {
                    ""
                }
            );
        }
        Command::Evaluate {
            data,
            model,
            report,
            modality,
            subset,
        } => {
            let trained = load_model(&model)?;
            let dataset = ingest_dataset(&data, &trained.config.split)?;
            warn_unpaired(&dataset.unpaired);
            let result = evaluate(&trained, &dataset, subset, modality)?;
            result.save(&report)?;
            println!("{result}");
        }
        Command::Protocol { data, model, out } => {
            let cfg = model.config(WaveletKind::Db2)?;
            check_levels(cfg.fusion.levels)?;
            let report = run_protocol(&data, &cfg, &WaveletKind::ALL, &out)?;
            println!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
