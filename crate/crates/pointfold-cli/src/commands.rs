//! Implementations of every subcommand. Each validates its inputs before
//! creating the output directory, writes all artifacts underneath it, and
//! drops a `manifest.json` run record alongside them.

use std::path::Path;

use pointfold::chamfer::chamfer;
use pointfold::classify::{
    extract_features, interpolate, label_fraction_sweep, train_linear,
};
use pointfold::cloud::PointCloud;
use pointfold::grid::{GridMode, GridSpec};
use pointfold::matrix::Matrix;
use pointfold::model::{
    fc_decoder_param_count, folding_decoder_param_count, AutoEncoder, Decoder, FoldingConfig,
};
use pointfold::train::{fold_stages, reconstruct, train, TrainEvent, TrainLog};
use pointfold::universal::verify_universality;

use crate::checkpoint;
use crate::config::Settings;
use crate::dataset;
use crate::error::{io_err, CliError, Result};
use crate::formats;
use crate::manifest::RunManifest;

/// Output size of the fully-connected baseline decoder.
const FC_BASELINE_POINTS: usize = 2048;

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(io_err(out))
}

fn config_err(e: pointfold::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Builds the configured folding auto-encoder, mapping construction
/// problems (bad widths, non-square grids) to configuration errors.
fn build_model(settings: &Settings) -> Result<AutoEncoder> {
    AutoEncoder::init_folding(
        settings.encoder_config(),
        settings.folding_config(),
        settings.seed,
    )
    .map_err(config_err)
}

fn load_input_cloud(path: &Path, settings: &Settings) -> Result<PointCloud> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let cloud = match ext.as_str() {
        "xyz" => formats::read_xyz(path)?,
        "off" => {
            let mesh = formats::read_off(path)?;
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("off");
            let mut rng = pointfold::rng::stream(settings.seed, &format!("data/sample/{name}"));
            pointfold::cloud::sample_mesh(&mesh, settings.mesh_points, &mut rng)?
        }
        other => {
            return Err(CliError::Config(format!(
                "unsupported input format '.{other}' for {}",
                path.display()
            )))
        }
    };
    Ok(cloud.normalize_unit_sphere())
}

/// Colors for the stages of a decoder: the folding grid's gradient, carried
/// through every stage by the shared row index.
fn stage_colors(model: &AutoEncoder) -> Option<Vec<[u8; 3]>> {
    match &model.decoder {
        Decoder::Folding(d) => Some(formats::grid_color_gradient(&d.grid)),
        Decoder::Fc(_) => None,
    }
}

// ---------------------------------------------------------------------------

pub fn gen_data(settings: &Settings, out: &Path) -> Result<()> {
    if settings.per_class == 0 || settings.test_per_class == 0 {
        return Err(CliError::Config(
            "gen.per_class and gen.test_per_class must be at least 1".into(),
        ));
    }
    prepare_out(out)?;
    let (train_n, test_n) = dataset::generate(settings, out)?;
    RunManifest::new("gen-data", settings).write(out)?;
    println!("wrote {train_n} training and {test_n} test clouds under {}", out.display());
    Ok(())
}

pub fn train_cmd(settings: &Settings, data: &Path, out: &Path) -> Result<TrainLog> {
    dataset::require_file(data, "dataset manifest")?;
    let mut model = build_model(settings)?;
    let config = settings.train_config();
    config.validate().map_err(config_err)?;
    let clouds = dataset::load(data, settings)?;

    prepare_out(out)?;
    let snapshots = out.join("snapshots");
    let checkpoints = out.join("checkpoints");
    if config.snapshot_every > 0 {
        prepare_out(&snapshots)?;
        prepare_out(&checkpoints)?;
    }

    let mut log_csv = formats::LossCsv::create(&out.join("log.csv"))?;
    let mut sink_err: Option<CliError> = None;
    let log = {
        let sink_err = &mut sink_err;
        let snapshots = &snapshots;
        let checkpoints = &checkpoints;
        train(&mut model, &clouds, &config, settings.seed, &mut |event| {
            let outcome = match event {
                TrainEvent::Loss { iteration, loss } => log_csv.append(iteration, loss),
                TrainEvent::Snapshot {
                    iteration,
                    stages,
                    model,
                } => write_snapshot(snapshots, checkpoints, iteration, stages, model),
            };
            match outcome {
                Ok(()) => Ok(()),
                Err(e) => {
                    let msg = e.to_string();
                    *sink_err = Some(e);
                    Err(pointfold::Error::Callback(msg))
                }
            }
        })
    };
    let log = match log {
        Ok(log) => log,
        Err(engine) => {
            return Err(sink_err.take().unwrap_or(CliError::Engine(engine)));
        }
    };
    log_csv.finish()?;

    checkpoint::save(&model, &out.join("model.ckpt"))?;
    RunManifest::new("train", settings).write(out)?;

    let initial = log.initial_smoothed(config.loss_window);
    let last = log.final_smoothed(config.loss_window);
    println!(
        "trained {} iterations: smoothed loss {initial:.6} -> {last:.6}",
        config.iterations
    );
    Ok(log)
}

fn write_snapshot(
    snapshots: &Path,
    checkpoints: &Path,
    iteration: usize,
    stages: &[Matrix],
    model: &AutoEncoder,
) -> Result<()> {
    let colors = stage_colors(model);
    for (k, stage) in stages.iter().enumerate() {
        let path = snapshots.join(format!("iter{iteration}_stage{k}.ply"));
        formats::write_ply_ascii(stage, colors.as_deref(), &path)?;
    }
    checkpoint::save(model, &checkpoints.join(format!("iter{iteration}.ckpt")))
}

pub fn reconstruct_cmd(
    settings: &Settings,
    model_path: &Path,
    input: &Path,
    out: &Path,
) -> Result<f64> {
    dataset::require_file(model_path, "model checkpoint")?;
    dataset::require_file(input, "input cloud")?;
    let model = checkpoint::load(model_path)?;
    let cloud = load_input_cloud(input, settings)?;
    let (rebuilt, result) = reconstruct(&model, &cloud)?;

    prepare_out(out)?;
    formats::write_xyz(&rebuilt, &out.join("reconstruction.xyz"))?;
    formats::write_ply_ascii(
        rebuilt.points(),
        stage_colors(&model).as_deref(),
        &out.join("reconstruction.ply"),
    )?;
    formats::write_table(
        "metric,value",
        &[format!("chamfer,{}", result.value)],
        &out.join("metrics.csv"),
    )?;
    RunManifest::new("reconstruct", settings).write(out)?;
    println!("chamfer {}", result.value);
    Ok(result.value)
}

pub fn fold_stages_cmd(
    settings: &Settings,
    model_path: &Path,
    input: &Path,
    out: &Path,
) -> Result<()> {
    dataset::require_file(model_path, "model checkpoint")?;
    dataset::require_file(input, "input cloud")?;
    let model = checkpoint::load(model_path)?;
    let cloud = load_input_cloud(input, settings)?;
    let stages = fold_stages(&model, &cloud)?;

    prepare_out(out)?;
    let colors = stage_colors(&model);
    for (k, stage) in stages.iter().enumerate() {
        formats::write_ply_ascii(stage, colors.as_deref(), &out.join(format!("stage{k}.ply")))?;
    }
    RunManifest::new("fold-stages", settings).write(out)?;
    println!("wrote {} stages under {}", stages.len(), out.display());
    Ok(())
}

pub fn interpolate_cmd(
    settings: &Settings,
    model_path: &Path,
    input_a: &Path,
    input_b: &Path,
    steps: usize,
    out: &Path,
) -> Result<()> {
    if steps < 2 {
        return Err(CliError::Config(format!(
            "interpolation needs at least 2 steps, got {steps}"
        )));
    }
    dataset::require_file(model_path, "model checkpoint")?;
    dataset::require_file(input_a, "first input cloud")?;
    dataset::require_file(input_b, "second input cloud")?;
    let model = checkpoint::load(model_path)?;
    let a = load_input_cloud(input_a, settings)?;
    let b = load_input_cloud(input_b, settings)?;
    let path = interpolate(&model, &a, &b, steps)?;

    prepare_out(out)?;
    let colors = stage_colors(&model);
    let mut rows = Vec::new();
    for (i, cloud) in path.iter().enumerate() {
        formats::write_ply_ascii(
            cloud.points(),
            colors.as_deref(),
            &out.join(format!("step_{i:02}.ply")),
        )?;
        let t = i as f64 / (steps - 1) as f64;
        let drift = chamfer(&path[0], cloud)?.value;
        rows.push(format!("{i},{t},{drift}"));
    }
    formats::write_table("step,t,chamfer_to_first", &rows, &out.join("trend.csv"))?;
    RunManifest::new("interpolate", settings).write(out)?;
    println!("wrote {steps} interpolation steps under {}", out.display());
    Ok(())
}

pub fn extract_features_cmd(
    settings: &Settings,
    model_path: &Path,
    data: &Path,
    out: &Path,
) -> Result<()> {
    dataset::require_file(model_path, "model checkpoint")?;
    dataset::require_file(data, "dataset manifest")?;
    let model = checkpoint::load(model_path)?;
    let clouds = dataset::load(data, settings)?;
    let features = extract_features(&model, &clouds)?;

    prepare_out(out)?;
    formats::write_codewords(&features, &out.join("codewords.csv"))?;
    RunManifest::new("extract-features", settings).write(out)?;
    println!(
        "wrote {} codewords of length {} under {}",
        features.len(),
        features.dim(),
        out.display()
    );
    Ok(())
}

pub fn classify_cmd(
    settings: &Settings,
    train_features: &Path,
    test_features: &Path,
    out: &Path,
) -> Result<(f64, f64)> {
    dataset::require_file(train_features, "training codeword table")?;
    dataset::require_file(test_features, "test codeword table")?;
    let train_set = formats::read_codewords(train_features)?;
    let test_set = formats::read_codewords(test_features)?;
    let model = train_linear(&train_set, &settings.classifier_config())?;
    let train_acc = model.accuracy(&train_set)?;
    let test_acc = model.accuracy(&test_set)?;

    prepare_out(out)?;
    formats::write_table(
        "split,accuracy",
        &[format!("train,{train_acc}"), format!("test,{test_acc}")],
        &out.join("report.csv"),
    )?;
    RunManifest::new("classify", settings).write(out)?;
    println!("train_accuracy {train_acc}");
    println!("test_accuracy {test_acc}");
    Ok((train_acc, test_acc))
}

pub fn sweep_labels_cmd(
    settings: &Settings,
    train_features: &Path,
    test_features: &Path,
    fractions: &[f64],
    out: &Path,
) -> Result<()> {
    dataset::require_file(train_features, "training codeword table")?;
    dataset::require_file(test_features, "test codeword table")?;
    if fractions.is_empty() {
        return Err(CliError::Config("no label fractions given".into()));
    }
    let train_set = formats::read_codewords(train_features)?;
    let test_set = formats::read_codewords(test_features)?;
    let mut rng = pointfold::rng::stream(settings.seed, "sweep/subsample");
    let rows = label_fraction_sweep(
        &train_set,
        &test_set,
        fractions,
        &settings.classifier_config(),
        &mut rng,
    )?;

    prepare_out(out)?;
    let lines: Vec<String> = rows
        .iter()
        .map(|r| match r.accuracy {
            Some(acc) => format!("{},{},false,{acc}", r.fraction, r.used),
            None => format!("{},{},true,", r.fraction, r.used),
        })
        .collect();
    formats::write_table("fraction,used,degenerate,accuracy", &lines, &out.join("sweep.csv"))?;
    RunManifest::new("sweep-labels", settings).write(out)?;
    for (r, line) in rows.iter().zip(&lines) {
        let _ = r;
        println!("{line}");
    }
    Ok(())
}

/// One decoder variant of the comparison harness.
struct Variant {
    name: &'static str,
    dim: usize,
    mode: GridMode,
    folds: usize,
}

const VARIANTS: [Variant; 5] = [
    Variant { name: "regular_2d_2folds", dim: 2, mode: GridMode::Regular, folds: 2 },
    Variant { name: "regular_2d_3folds", dim: 2, mode: GridMode::Regular, folds: 3 },
    Variant { name: "regular_1d_2folds", dim: 1, mode: GridMode::Regular, folds: 2 },
    Variant { name: "regular_3d_2folds", dim: 3, mode: GridMode::Regular, folds: 2 },
    Variant { name: "uniform_2d_2folds", dim: 2, mode: GridMode::UniformRandom, folds: 2 },
];

/// Grid size for a variant: the configured m for its native dimension,
/// otherwise the nearest perfect power for the lattice dimension.
fn variant_grid_m(dim: usize, m2d: usize) -> usize {
    match dim {
        1 => m2d,
        2 => m2d,
        _ => {
            let side = (m2d as f64).powf(1.0 / 3.0).round().max(1.0) as usize;
            side * side * side
        }
    }
}

pub fn compare_decoders_cmd(
    settings: &Settings,
    train_data: &Path,
    test_data: &Path,
    out: &Path,
) -> Result<()> {
    dataset::require_file(train_data, "training dataset manifest")?;
    dataset::require_file(test_data, "test dataset manifest")?;
    // every variant must be constructible before anything runs
    let mut jobs: Vec<(String, AutoEncoder)> = Vec::new();
    for v in &VARIANTS {
        let grid = GridSpec {
            dim: v.dim,
            mode: v.mode,
            m: variant_grid_m(v.dim, settings.grid_m),
            extent: settings.grid_extent,
        };
        let model = AutoEncoder::init_folding(
            settings.encoder_config(),
            FoldingConfig {
                grid,
                folds: v.folds,
                hidden: 512,
                codeword_len: settings.codeword,
            },
            settings.seed,
        )
        .map_err(config_err)?;
        jobs.push((v.name.to_string(), model));
    }
    jobs.push((
        "fc_baseline".to_string(),
        AutoEncoder::init_fc(settings.encoder_config(), FC_BASELINE_POINTS, settings.seed),
    ));

    let train_clouds = dataset::load(train_data, settings)?;
    let test_clouds = dataset::load(test_data, settings)?;
    let config = settings.train_config();
    config.validate().map_err(config_err)?;

    prepare_out(out)?;
    let mut rows = Vec::new();
    for (name, mut model) in jobs {
        let log = train(&mut model, &train_clouds, &config, settings.seed, &mut |_| Ok(()))?;
        let final_loss = log.final_smoothed(config.loss_window);
        let train_features = extract_features(&model, &train_clouds)?;
        let test_features = extract_features(&model, &test_clouds)?;
        let classifier = train_linear(&train_features, &settings.classifier_config())?;
        let accuracy = classifier.accuracy(&test_features)?;
        let (dim, mode, folds, m) = match &model.decoder {
            Decoder::Folding(d) => (
                d.config.grid.dim,
                match d.config.grid.mode {
                    GridMode::Regular => "regular",
                    GridMode::UniformRandom => "uniform",
                },
                d.config.folds,
                d.config.grid.m,
            ),
            Decoder::Fc(_) => (0, "none", 0, FC_BASELINE_POINTS),
        };
        let row = format!(
            "{name},{dim},{mode},{m},{folds},{},{final_loss},{accuracy}",
            model.decoder.param_count()
        );
        println!("{row}");
        rows.push(row);
    }
    formats::write_table(
        "variant,grid_dim,grid_mode,grid_m,folds,decoder_params,final_loss,test_accuracy",
        &rows,
        &out.join("compare.csv"),
    )?;
    RunManifest::new("compare-decoders", settings).write(out)?;
    Ok(())
}

pub fn robustness_cmd(
    settings: &Settings,
    train_data: &Path,
    test_data: &Path,
    noise: f64,
    out: &Path,
) -> Result<()> {
    dataset::require_file(train_data, "training dataset manifest")?;
    dataset::require_file(test_data, "test dataset manifest")?;
    if !(0.0..=1.0).contains(&noise) {
        return Err(CliError::Config(format!("noise fraction {noise} outside [0, 1]")));
    }
    let mut train_clouds = dataset::load(train_data, settings)?;
    let mut test_clouds = dataset::load(test_data, settings)?;
    if noise > 0.0 {
        let mut rng = pointfold::rng::stream(settings.seed, "robustness/noise/train");
        for c in &mut train_clouds {
            *c = c.shift_noise(noise, &mut rng)?;
        }
        let mut rng = pointfold::rng::stream(settings.seed, "robustness/noise/test");
        for c in &mut test_clouds {
            *c = c.shift_noise(noise, &mut rng)?;
        }
    }
    let config = settings.train_config();
    config.validate().map_err(config_err)?;

    prepare_out(out)?;
    let mut rows = Vec::new();
    for (name, graph_layers) in [("graph", true), ("no_graph", false)] {
        let mut enc = settings.encoder_config();
        enc.use_graph_layers = graph_layers;
        let mut model =
            AutoEncoder::init_folding(enc, settings.folding_config(), settings.seed)
                .map_err(config_err)?;
        let log = train(&mut model, &train_clouds, &config, settings.seed, &mut |_| Ok(()))?;
        let final_loss = log.final_smoothed(config.loss_window);
        let train_features = extract_features(&model, &train_clouds)?;
        let test_features = extract_features(&model, &test_clouds)?;
        let classifier = train_linear(&train_features, &settings.classifier_config())?;
        let accuracy = classifier.accuracy(&test_features)?;
        let row = format!("{name},{noise},{final_loss},{accuracy}");
        println!("{row}");
        rows.push(row);
    }
    formats::write_table(
        "encoder,noise_fraction,final_loss,test_accuracy",
        &rows,
        &out.join("robustness.csv"),
    )?;
    RunManifest::new("robustness", settings).write(out)?;
    Ok(())
}

pub fn verify_universal_cmd(
    settings: &Settings,
    m: usize,
    trials: usize,
    out: Option<&Path>,
) -> Result<()> {
    let mut rng = pointfold::rng::stream(settings.seed, "universal/verify");
    let report = verify_universality(trials, m, &mut rng).map_err(|e| match e {
        pointfold::Error::InvalidConfig(msg) => CliError::Config(msg),
        other => CliError::Engine(other),
    })?;

    if let Some(out) = out {
        prepare_out(out)?;
        let rows: Vec<String> = report
            .trials
            .iter()
            .map(|t| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    t.trial,
                    t.max_abs_error,
                    t.stats.open_per_channel[0],
                    t.stats.open_per_channel[1],
                    t.stats.open_per_channel[2],
                    t.stats.case_m1,
                    t.stats.case_m2,
                    t.stats.case_diag,
                    t.stats.min_open_margin,
                    t.stats.min_closed_margin,
                )
            })
            .collect();
        formats::write_table(
            "trial,max_abs_error,open_gates_x,open_gates_y,open_gates_z,case_m1,case_m2,case_diag,min_open_margin,min_closed_margin",
            &rows,
            &out.join("report.csv"),
        )?;
        RunManifest::new("verify-universal", settings).write(out)?;
    }

    let exact = report.all_exact(1e-9);
    println!(
        "m={m} trials={trials} max_error={:e} gates={}",
        report.max_error(),
        if exact { "exact" } else { "VIOLATED" }
    );
    if !exact {
        return Err(CliError::Verify(format!(
            "universality check failed at m={m}: max error {:e}",
            report.max_error()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Folding,
    Fc,
}

pub fn count_params_cmd(
    settings: &Settings,
    decoder: DecoderKind,
    out: Option<&Path>,
) -> Result<usize> {
    let count = match decoder {
        DecoderKind::Folding => {
            folding_decoder_param_count(settings.codeword, settings.grid_dim, settings.folds)
        }
        DecoderKind::Fc => fc_decoder_param_count(settings.codeword, FC_BASELINE_POINTS),
    };
    println!("{count}");
    if let Some(out) = out {
        prepare_out(out)?;
        formats::write_table(
            "decoder,params",
            &[format!(
                "{},{count}",
                match decoder {
                    DecoderKind::Folding => "folding",
                    DecoderKind::Fc => "fc",
                }
            )],
            &out.join("params.csv"),
        )?;
        RunManifest::new("count-params", settings).write(out)?;
    }
    Ok(count)
}

/// Parses a comma-separated fraction list.
pub fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad fraction '{f}'")))
        })
        .collect()
}

/// Guard used by tests and main: the output directory must not be a file.
pub fn check_out_dir(out: &Path) -> Result<()> {
    if out.is_file() {
        return Err(CliError::Config(format!(
            "output directory '{}' is an existing file",
            out.display()
        )));
    }
    Ok(())
}
