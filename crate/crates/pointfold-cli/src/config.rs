//! Flat key-value settings with sections, merged from built-in defaults, an
//! optional config file, and command-line overrides (highest precedence).
//! Unknown sections or keys are rejected before any work starts.

use std::fmt::Write as _;
use std::path::Path;

use pointfold::adam::AdamConfig;
use pointfold::classify::ClassifierConfig;
use pointfold::grid::{GridMode, GridSpec};
use pointfold::model::{EncoderConfig, FoldingConfig};
use pointfold::train::TrainConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    // [run]
    pub seed: u64,
    // [data]
    pub mesh_points: usize,
    // [model]
    pub k: usize,
    pub codeword: usize,
    pub folds: usize,
    pub include_self: bool,
    pub relu_after_kmap: bool,
    pub graph_layers: bool,
    // [grid]
    pub grid_dim: usize,
    pub grid_mode: GridMode,
    pub grid_m: usize,
    pub grid_extent: f64,
    // [train]
    pub iterations: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub rotate: bool,
    pub noise: f64,
    pub snapshot_every: usize,
    pub loss_window: usize,
    // [classifier]
    pub cls_epochs: usize,
    pub cls_lr: f64,
    pub cls_l2: f64,
    pub cls_margin: f64,
    // [gen]
    pub per_class: usize,
    pub test_per_class: usize,
    pub gen_points: usize,
    pub gen_rotate: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 42,
            mesh_points: 2048,
            k: 16,
            codeword: 512,
            folds: 2,
            include_self: true,
            relu_after_kmap: true,
            graph_layers: true,
            grid_dim: 2,
            grid_mode: GridMode::Regular,
            grid_m: 225,
            grid_extent: 0.5,
            iterations: 2000,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-6,
            batch_size: 1,
            rotate: true,
            noise: 0.0,
            snapshot_every: 500,
            loss_window: 100,
            cls_epochs: 1000,
            cls_lr: 0.05,
            cls_l2: 1e-4,
            cls_margin: 1.0,
            per_class: 100,
            test_per_class: 50,
            gen_points: 256,
            gen_rotate: true,
        }
    }
}

impl Settings {
    /// Defaults, then file (if given), then `section.key=value` overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
            s.apply_text(&text)?;
        }
        for ov in overrides {
            let (key, value) = ov.split_once('=').ok_or_else(|| {
                CliError::Config(format!("override '{ov}' is not section.key=value"))
            })?;
            let (section, key) = key.trim().split_once('.').ok_or_else(|| {
                CliError::Config(format!("override key '{key}' is not section.key"))
            })?;
            s.apply(section, key, value.trim())?;
        }
        Ok(s)
    }

    fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {}: expected key = value", ln + 1))
            })?;
            self.apply(&section, key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("config line {}: {e}", ln + 1)))?;
        }
        Ok(())
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let unknown = || {
            CliError::Config(format!("unknown setting '{section}.{key}'"))
        };
        match (section, key) {
            ("run", "seed") => self.seed = parse(section, key, value)?,
            ("data", "mesh_points") => self.mesh_points = parse(section, key, value)?,
            ("model", "k") => self.k = parse(section, key, value)?,
            ("model", "codeword") => self.codeword = parse(section, key, value)?,
            ("model", "folds") => self.folds = parse(section, key, value)?,
            ("model", "include_self") => self.include_self = parse_bool(section, key, value)?,
            ("model", "relu_after_kmap") => {
                self.relu_after_kmap = parse_bool(section, key, value)?
            }
            ("model", "graph_layers") => self.graph_layers = parse_bool(section, key, value)?,
            ("grid", "dim") => self.grid_dim = parse(section, key, value)?,
            ("grid", "mode") => {
                self.grid_mode = match value {
                    "regular" => GridMode::Regular,
                    "uniform" | "uniform_random" => GridMode::UniformRandom,
                    other => {
                        return Err(CliError::Config(format!("unknown grid mode '{other}'")))
                    }
                }
            }
            ("grid", "m") => self.grid_m = parse(section, key, value)?,
            ("grid", "extent") => self.grid_extent = parse(section, key, value)?,
            ("train", "iterations") => self.iterations = parse(section, key, value)?,
            ("train", "lr") => self.lr = parse(section, key, value)?,
            ("train", "beta1") => self.beta1 = parse(section, key, value)?,
            ("train", "beta2") => self.beta2 = parse(section, key, value)?,
            ("train", "epsilon") => self.epsilon = parse(section, key, value)?,
            ("train", "weight_decay") => self.weight_decay = parse(section, key, value)?,
            ("train", "batch_size") => self.batch_size = parse(section, key, value)?,
            ("train", "rotate") => self.rotate = parse_bool(section, key, value)?,
            ("train", "noise") => self.noise = parse(section, key, value)?,
            ("train", "snapshot_every") => self.snapshot_every = parse(section, key, value)?,
            ("train", "loss_window") => self.loss_window = parse(section, key, value)?,
            ("classifier", "epochs") => self.cls_epochs = parse(section, key, value)?,
            ("classifier", "lr") => self.cls_lr = parse(section, key, value)?,
            ("classifier", "l2") => self.cls_l2 = parse(section, key, value)?,
            ("classifier", "margin") => self.cls_margin = parse(section, key, value)?,
            ("gen", "per_class") => self.per_class = parse(section, key, value)?,
            ("gen", "test_per_class") => self.test_per_class = parse(section, key, value)?,
            ("gen", "points") => self.gen_points = parse(section, key, value)?,
            ("gen", "rotate") => self.gen_rotate = parse_bool(section, key, value)?,
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Stable textual form of the effective settings; hashed into the run
    /// manifest so two runs can be diffed by configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mode = match self.grid_mode {
            GridMode::Regular => "regular",
            GridMode::UniformRandom => "uniform",
        };
        let _ = write!(
            s,
            "classifier.epochs={}\nclassifier.l2={}\nclassifier.lr={}\nclassifier.margin={}\n\
             data.mesh_points={}\n\
             gen.per_class={}\ngen.points={}\ngen.rotate={}\ngen.test_per_class={}\n\
             grid.dim={}\ngrid.extent={}\ngrid.m={}\ngrid.mode={mode}\n\
             model.codeword={}\nmodel.folds={}\nmodel.graph_layers={}\nmodel.include_self={}\nmodel.k={}\nmodel.relu_after_kmap={}\n\
             run.seed={}\n\
             train.batch_size={}\ntrain.beta1={}\ntrain.beta2={}\ntrain.epsilon={}\ntrain.iterations={}\ntrain.loss_window={}\ntrain.lr={}\ntrain.noise={}\ntrain.rotate={}\ntrain.snapshot_every={}\ntrain.weight_decay={}\n",
            self.cls_epochs, self.cls_l2, self.cls_lr, self.cls_margin,
            self.mesh_points,
            self.per_class, self.gen_points, self.gen_rotate, self.test_per_class,
            self.grid_dim, self.grid_extent, self.grid_m,
            self.codeword, self.folds, self.graph_layers, self.include_self, self.k, self.relu_after_kmap,
            self.seed,
            self.batch_size, self.beta1, self.beta2, self.epsilon, self.iterations,
            self.loss_window, self.lr, self.noise, self.rotate, self.snapshot_every, self.weight_decay,
        );
        s
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            k: self.k,
            include_self: self.include_self,
            relu_after_kmap: self.relu_after_kmap,
            use_graph_layers: self.graph_layers,
            head_widths: vec![512, self.codeword],
            ..Default::default()
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            dim: self.grid_dim,
            mode: self.grid_mode,
            m: self.grid_m,
            extent: self.grid_extent,
        }
    }

    pub fn folding_config(&self) -> FoldingConfig {
        FoldingConfig::new(self.grid_spec(), self.folds, self.codeword)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
                weight_decay: self.weight_decay,
            },
            iterations: self.iterations,
            batch_size: self.batch_size,
            rotation_augment: self.rotate,
            noise_fraction: self.noise,
            snapshot_every: self.snapshot_every,
            loss_window: self.loss_window,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            margin: self.cls_margin,
            l2: self.cls_l2,
            epochs: self.cls_epochs,
            lr: self.cls_lr,
        }
    }
}

fn parse<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("setting '{section}.{key}': bad value '{value}'")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        other => Err(CliError::Config(format!(
            "setting '{section}.{key}': bad boolean '{other}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "[run]\nseed = 7\n[train]\niterations = 50\nlr = 0.001 # inline comment\n",
        )
        .unwrap();
        let s = Settings::resolve(Some(&path), &["train.iterations=9".into()]).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.iterations, 9);
        assert_eq!(s.lr, 0.001);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "[train]\nlearning_rate = 0.1\n").unwrap();
        assert!(Settings::resolve(Some(&path), &[]).is_err());
        assert!(Settings::resolve(None, &["nothing.here=1".into()]).is_err());
    }

    #[test]
    fn canonical_is_stable_and_distinguishes() {
        let a = Settings::default();
        let mut b = Settings::default();
        assert_eq!(a.canonical(), b.canonical());
        b.iterations = 3;
        assert_ne!(a.canonical(), b.canonical());
    }
}
