//! Frozen-codeword evaluation: a linear max-margin classifier trained by
//! full-batch gradient descent, the label-fraction sweep, and latent-space
//! interpolation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{AutoEncoder, Codeword};
use crate::rng::Stream;

/// Codewords with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    /// N x d.
    pub codewords: Matrix,
    /// N category ids.
    pub labels: Vec<u32>,
}

impl FeatureSet {
    pub fn new(codewords: Matrix, labels: Vec<u32>) -> Result<FeatureSet> {
        if codewords.rows() != labels.len() {
            return Err(Error::DataLength {
                rows: codewords.rows(),
                cols: codewords.cols(),
                got: labels.len(),
            });
        }
        Ok(FeatureSet { codewords, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codewords.cols()
    }

    /// Number of classes, assuming ids 0..C.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Rows selected by `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        let mut codewords = Matrix::zeros(indices.len(), self.dim());
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            codewords.row_mut(row).copy_from_slice(self.codewords.row(i));
            labels.push(self.labels[i]);
        }
        FeatureSet { codewords, labels }
    }
}

/// Encodes every cloud with the frozen model; labels come from the clouds.
/// No augmentation is applied.
pub fn extract_features(model: &AutoEncoder, dataset: &[PointCloud]) -> Result<FeatureSet> {
    if dataset.is_empty() {
        return Err(Error::Empty {
            op: "extract_features",
        });
    }
    let d = model.encoder.config.codeword_len();
    let mut codewords = Matrix::zeros(dataset.len(), d);
    let mut labels = Vec::with_capacity(dataset.len());
    for (i, cloud) in dataset.iter().enumerate() {
        let code = model.encoder.encode(cloud)?;
        codewords.row_mut(i).copy_from_slice(code.as_slice());
        labels.push(cloud.label.unwrap_or(0));
    }
    FeatureSet::new(codewords, labels)
}

/// Hyperparameters of the hinge-loss trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub margin: f64,
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            margin: 1.0,
            l2: 1e-4,
            epochs: 1000,
            lr: 0.05,
        }
    }
}

/// Affine scores with argmax decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// d x C.
    pub weight: Matrix,
    /// 1 x C.
    pub bias: Matrix,
}

impl LinearClassifier {
    pub fn scores(&self, features: &Matrix) -> Result<Matrix> {
        let mut s = features.matmul(&self.weight)?;
        for r in 0..s.rows() {
            let row = s.row_mut(r);
            for (v, b) in row.iter_mut().zip(self.bias.row(0)) {
                *v += b;
            }
        }
        Ok(s)
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<u32>> {
        let s = self.scores(features)?;
        Ok((0..s.rows())
            .map(|r| {
                let row = s.row(r);
                let mut best = 0usize;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect())
    }

    pub fn accuracy(&self, set: &FeatureSet) -> Result<f64> {
        let preds = self.predict(&set.codewords)?;
        let hits = preds
            .iter()
            .zip(&set.labels)
            .filter(|(p, l)| p == l)
            .count();
        Ok(hits as f64 / set.len() as f64)
    }
}

/// Trains the multiclass hinge classifier (one-vs-rest margins summed per
/// sample) by deterministic full-batch gradient descent from zero weights.
pub fn train_linear(train: &FeatureSet, config: &ClassifierConfig) -> Result<LinearClassifier> {
    let classes = train.n_classes();
    if classes < 2 {
        return Err(Error::InvalidConfig(
            "classifier needs at least 2 classes in the training set".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::Empty { op: "train_linear" });
    }
    let n = train.len();
    let d = train.dim();
    let mut model = LinearClassifier {
        weight: Matrix::zeros(d, classes),
        bias: Matrix::zeros(1, classes),
    };
    let inv_n = 1.0 / n as f64;
    for _ in 0..config.epochs {
        let scores = model.scores(&train.codewords)?;
        // margin-violation indicator, with the true class collecting the
        // negative counts
        let mut push = Matrix::zeros(n, classes);
        for i in 0..n {
            let y = train.labels[i] as usize;
            let srow = scores.row(i);
            let mut violations = 0.0;
            let prow = push.row_mut(i);
            for c in 0..classes {
                if c != y && srow[c] + config.margin > srow[y] {
                    prow[c] = 1.0;
                    violations += 1.0;
                }
            }
            prow[y] = -violations;
        }
        let mut dw = train.codewords.matmul_tn(&push)?;
        for (w, g) in model.weight.data_mut().iter_mut().zip(dw.data_mut()) {
            let grad = *g * inv_n + 2.0 * config.l2 * *w;
            *w -= config.lr * grad;
        }
        for c in 0..classes {
            let mut db = 0.0;
            for i in 0..n {
                db += push.get(i, c);
            }
            let b = model.bias.get(0, c);
            model.bias.set(0, c, b - config.lr * db * inv_n);
        }
    }
    Ok(model)
}

/// One row of the label-fraction sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fraction: f64,
    /// Training samples actually used.
    pub used: usize,
    /// None when some class received no samples.
    pub accuracy: Option<f64>,
}

/// For each fraction: stratified subsample of the training codewords, train,
/// and score on the full test split.
pub fn label_fraction_sweep(
    train: &FeatureSet,
    test: &FeatureSet,
    fractions: &[f64],
    config: &ClassifierConfig,
    rng: &mut Stream,
) -> Result<Vec<SweepRow>> {
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "label fraction {f} outside (0, 1]"
            )));
        }
    }
    let classes = train.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in train.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        // per class: shuffle, take round(fraction * count); the selection is
        // re-sorted so fraction 1.0 reproduces the full set order exactly
        let mut selected = Vec::new();
        let mut degenerate = false;
        for members in &by_class {
            if members.is_empty() {
                continue;
            }
            let take = round_count(fraction, members.len());
            if take == 0 {
                degenerate = true;
            }
            let mut pool = members.clone();
            for i in 0..take.min(pool.len()) {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            selected.extend_from_slice(&pool[..take.min(pool.len())]);
        }
        selected.sort_unstable();
        if degenerate {
            rows.push(SweepRow {
                fraction,
                used: selected.len(),
                accuracy: None,
            });
            continue;
        }
        let subset = train.subset(&selected);
        let model = train_linear(&subset, config)?;
        rows.push(SweepRow {
            fraction,
            used: selected.len(),
            accuracy: Some(model.accuracy(test)?),
        });
    }
    Ok(rows)
}

/// Nearest integer to `fraction * count` (ties round up), so the stratified
/// counts sit within one sample of the ideal.
fn round_count(fraction: f64, count: usize) -> usize {
    let ideal = fraction * count as f64;
    let floor = ideal as usize;
    if ideal - floor as f64 >= 0.5 {
        floor + 1
    } else {
        floor
    }
}

/// Decodes the uniform codeword path `(1 - t) θ_a + t θ_b` at `steps`
/// schedule points; the endpoints reuse the endpoint codewords untouched.
pub fn interpolate(
    model: &AutoEncoder,
    a: &PointCloud,
    b: &PointCloud,
    steps: usize,
) -> Result<Vec<PointCloud>> {
    if steps < 2 {
        return Err(Error::OutOfRange {
            what: "interpolation steps",
            got: steps,
            limit: 2,
        });
    }
    let theta_a = model.encoder.encode(a)?;
    let theta_b = model.encoder.encode(b)?;
    let mut out = Vec::with_capacity(steps);
    for i in 0..steps {
        let theta = if i == 0 {
            theta_a.clone()
        } else if i == steps - 1 {
            theta_b.clone()
        } else {
            let t = i as f64 / (steps - 1) as f64;
            Codeword(
                theta_a
                    .as_slice()
                    .iter()
                    .zip(theta_b.as_slice())
                    .map(|(x, y)| (1.0 - t) * x + t * y)
                    .collect(),
            )
        };
        out.push(model.decoder.decode(&theta)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn toy_separable(n_per_class: usize) -> FeatureSet {
        // two 2D blobs far apart
        let mut rng = stream(131, "test/classify/toy");
        let mut codewords = Matrix::zeros(2 * n_per_class, 2);
        let mut labels = Vec::new();
        for i in 0..2 * n_per_class {
            let class = (i % 2) as u32;
            let center = if class == 0 { [-2.0, -1.0] } else { [2.0, 1.5] };
            codewords.set(i, 0, center[0] + rng.gen_range(-0.3..0.3));
            codewords.set(i, 1, center[1] + rng.gen_range(-0.3..0.3));
            labels.push(class);
        }
        FeatureSet::new(codewords, labels).unwrap()
    }

    #[test]
    fn separable_toy_set_reaches_full_train_accuracy() {
        let set = toy_separable(20);
        let model = train_linear(&set, &ClassifierConfig::default()).unwrap();
        assert_eq!(model.accuracy(&set).unwrap(), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let set = FeatureSet::new(Matrix::zeros(4, 3), vec![0, 0, 0, 0]).unwrap();
        assert!(train_linear(&set, &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn permuted_labels_score_near_chance() {
        // informative features, shuffled labels: test accuracy must sit in
        // the binomial 3-sigma band around 1/C
        let mut rng = stream(132, "test/classify/null");
        let n = 160;
        let classes = 4u32;
        let mut make = |shuffle: bool| {
            let mut codewords = Matrix::zeros(n, 8);
            let mut labels = Vec::new();
            for i in 0..n {
                let class = (i as u32) % classes;
                for c in 0..8 {
                    codewords.set(
                        i,
                        c,
                        class as f64 * 0.8 + rng.gen_range(-0.2..0.2) + c as f64 * 0.01,
                    );
                }
                labels.push(class);
            }
            if shuffle {
                for i in 0..n {
                    let j = rng.gen_range(i..n);
                    labels.swap(i, j);
                }
            }
            FeatureSet::new(codewords, labels).unwrap()
        };
        let train_set = make(true);
        let test_set = make(true);
        let model = train_linear(&train_set, &ClassifierConfig::default()).unwrap();
        let acc = model.accuracy(&test_set).unwrap();
        let p = 1.0 / classes as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (acc - p).abs() <= 3.0 * sigma,
            "accuracy {acc} outside chance band"
        );
    }

    #[test]
    fn feature_scaling_keeps_decisions_on_separable_set() {
        let set = toy_separable(16);
        let scaled = FeatureSet::new(set.codewords.scale(2.0), set.labels.clone()).unwrap();
        let m1 = train_linear(&set, &ClassifierConfig::default()).unwrap();
        let m2 = train_linear(&scaled, &ClassifierConfig::default()).unwrap();
        let p1 = m1.predict(&set.codewords).unwrap();
        let p2 = m2.predict(&scaled.codewords).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn prediction_invariant_under_constant_score_shift() {
        let set = toy_separable(10);
        let model = train_linear(&set, &ClassifierConfig::default()).unwrap();
        let mut shifted = model.clone();
        for v in shifted.bias.data_mut() {
            *v += 42.0;
        }
        assert_eq!(
            model.predict(&set.codewords).unwrap(),
            shifted.predict(&set.codewords).unwrap()
        );
    }

    #[test]
    fn sweep_full_fraction_reproduces_full_accuracy() {
        let train_set = toy_separable(12);
        let test_set = toy_separable(8);
        let cfg = ClassifierConfig::default();
        let full = train_linear(&train_set, &cfg)
            .unwrap()
            .accuracy(&test_set)
            .unwrap();
        let rows = label_fraction_sweep(
            &train_set,
            &test_set,
            &[1.0],
            &cfg,
            &mut stream(133, "sweep"),
        )
        .unwrap();
        assert_eq!(rows[0].accuracy, Some(full));
        assert_eq!(rows[0].used, train_set.len());
    }

    #[test]
    fn sweep_counts_are_stratified_and_degenerate_marked() {
        let train_set = toy_separable(20); // 20 per class
        let test_set = toy_separable(6);
        let cfg = ClassifierConfig {
            epochs: 50,
            ..Default::default()
        };
        let rows = label_fraction_sweep(
            &train_set,
            &test_set,
            &[0.011, 0.5, 0.1],
            &cfg,
            &mut stream(134, "sweep"),
        )
        .unwrap();
        // fraction 0.011 of 20 rounds to 0 per class -> degenerate
        assert_eq!(rows[0].accuracy, None);
        // fraction 0.5 of 20 -> 10 per class
        assert_eq!(rows[1].used, 20);
        // fraction 0.1 of 20 -> 2 per class
        assert_eq!(rows[2].used, 4);
        assert!(rows[1].accuracy.is_some());
    }

    #[test]
    fn interpolation_endpoints_are_bitwise_decodes() {
        use crate::grid::GridSpec;
        use crate::model::{EncoderConfig, FoldingConfig};
        use crate::shapes::{synth_shape, ShapeKind, ShapeParams};

        let enc = EncoderConfig {
            k: 4,
            point_widths: vec![8, 8, 8],
            graph_widths: vec![12, 16],
            head_widths: vec![10, 6],
            ..Default::default()
        };
        let model = AutoEncoder::init_folding(
            enc,
            FoldingConfig::new(GridSpec::default_square(16), 2, 6),
            135,
        )
        .unwrap();
        let mut rng = stream(136, "test/classify/interp");
        let a = synth_shape(ShapeKind::Sphere, 24, &mut rng, &ShapeParams::default()).unwrap();
        let b = synth_shape(ShapeKind::Plane, 24, &mut rng, &ShapeParams::default()).unwrap();
        let path = interpolate(&model, &a, &b, 5).unwrap();
        assert_eq!(path.len(), 5);
        let (code_a, _) = model.autoencode(&a).unwrap();
        let (code_b, _) = model.autoencode(&b).unwrap();
        assert_eq!(
            path[0].points(),
            model.decoder.decode(&code_a).unwrap().points()
        );
        assert_eq!(
            path[4].points(),
            model.decoder.decode(&code_b).unwrap().points()
        );
        assert!(interpolate(&model, &a, &b, 1).is_err());
    }
}
