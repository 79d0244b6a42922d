//! The `pointfold` binary: every workflow as a subcommand.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 1 for anything
//! else, with a single `ERROR <code>: <message>` line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pointfold_cli::commands::{self, DecoderKind};
use pointfold_cli::config::Settings;
use pointfold_cli::error::Result;

#[derive(Parser)]
#[command(name = "pointfold", version, about = "Point-cloud auto-encoder workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Config file (flat key = value with [sections]).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. --set train.iterations=500 (repeatable;
    /// wins over the config file).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// Root random seed (shorthand for --set run.seed=N).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("run.seed={seed}"));
        }
        Settings::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the 4-class synthetic dataset with train/test manifests.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the auto-encoder on a dataset manifest.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training manifest (path,label CSV).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shorthand for --set train.iterations=N.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Encode and decode one cloud, reporting the Chamfer distance.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// Input cloud (.xyz or .off).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the decoder stages (grid, fold 1, fold 2, ...) as colored PLY.
    FoldStages {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode the straight latent path between two clouds.
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input_a: PathBuf,
        #[arg(long)]
        input_b: PathBuf,
        /// Number of schedule points (endpoints included).
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode every cloud of a manifest into a codeword CSV.
    ExtractFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the linear classifier on frozen codewords and report accuracy.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train_features: PathBuf,
        #[arg(long)]
        test_features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classifier accuracy as a function of the labeled fraction.
    SweepLabels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train_features: PathBuf,
        #[arg(long)]
        test_features: PathBuf,
        /// Comma-separated fractions in (0, 1].
        #[arg(long, default_value = "0.01,0.02,0.05,0.075,0.1,0.15,0.2,1.0")]
        fractions: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every decoder variant plus the FC baseline under one seed.
    CompareDecoders {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shorthand for --set train.iterations=N.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Compare the graph encoder against the graphless ablation on noisy data.
    Robustness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Fraction of points shifted inside each cloud's bounding box.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Round-trip random clouds through the hand-constructed 2-layer
    /// perceptron and verify exact recovery.
    VerifyUniversal {
        #[command(flatten)]
        common: Common,
        /// Grid size (a perfect square).
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the decoder parameter count.
    CountParams {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = DecoderArg::Folding)]
        decoder: DecoderArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Folding,
    Fc,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, out } => {
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::gen_data(&settings, &out)
        }
        Command::Train {
            common,
            data,
            out,
            iterations,
        } => {
            let mut common = common;
            if let Some(n) = iterations {
                common.overrides.push(format!("train.iterations={n}"));
            }
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::train_cmd(&settings, &data, &out).map(|_| ())
        }
        Command::Reconstruct {
            common,
            model,
            input,
            out,
        } => {
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::reconstruct_cmd(&settings, &model, &input, &out).map(|_| ())
        }
        Command::FoldStages {
            common,
            model,
            input,
            out,
        } => {
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::fold_stages_cmd(&settings, &model, &input, &out)
        }
        Command::Interpolate {
            common,
            model,
            input_a,
            input_b,
            steps,
            out,
        } => {
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::interpolate_cmd(&settings, &model, &input_a, &input_b, steps, &out)
        }
        Command::ExtractFeatures {
            common,
            model,
            data,
            out,
        } => {
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::extract_features_cmd(&settings, &model, &data, &out)
        }
        Command::Classify {
            common,
            train_features,
            test_features,
            out,
        } => {
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::classify_cmd(&settings, &train_features, &test_features, &out).map(|_| ())
        }
        Command::SweepLabels {
            common,
            train_features,
            test_features,
            fractions,
            out,
        } => {
            let settings = common.settings()?;
            let fractions = commands::parse_fractions(&fractions)?;
            commands::check_out_dir(&out)?;
            commands::sweep_labels_cmd(&settings, &train_features, &test_features, &fractions, &out)
        }
        Command::CompareDecoders {
            common,
            train,
            test,
            out,
            iterations,
        } => {
            let mut common = common;
            if let Some(n) = iterations {
                common.overrides.push(format!("train.iterations={n}"));
            }
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::compare_decoders_cmd(&settings, &train, &test, &out)
        }
        Command::Robustness {
            common,
            train,
            test,
            noise,
            out,
            iterations,
        } => {
            let mut common = common;
            if let Some(n) = iterations {
                common.overrides.push(format!("train.iterations={n}"));
            }
            let settings = common.settings()?;
            commands::check_out_dir(&out)?;
            commands::robustness_cmd(&settings, &train, &test, noise, &out)
        }
        Command::VerifyUniversal {
            common,
            m,
            trials,
            out,
        } => {
            let settings = common.settings()?;
            if let Some(out) = &out {
                commands::check_out_dir(out)?;
            }
            commands::verify_universal_cmd(&settings, m, trials, out.as_deref())
        }
        Command::CountParams {
            common,
            decoder,
            out,
        } => {
            let settings = common.settings()?;
            let kind = match decoder {
                DecoderArg::Folding => DecoderKind::Folding,
                DecoderArg::Fc => DecoderKind::Fc,
            };
            if let Some(out) = &out {
                commands::check_out_dir(out)?;
            }
            commands::count_params_cmd(&settings, kind, out.as_deref()).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {}", e.code(), message);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
