//! The auto-encoder: a per-point MLP plus two graph max-pooling layers and a
//! global max-pool on the encoder side, and a grid-folding (or baseline
//! fully-connected) perceptron stack on the decoder side.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::graph::{build_knn, concat_input_features, local_covariance};
use crate::grid::{make_grid, GridSpec};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Stream;
use crate::tape::{Activation, NodeId, Tape};

/// Width of the latent vector a cloud is compressed to.
pub const DEFAULT_CODEWORD_LEN: usize = 512;
/// Neighbor count of the encoder's k-NN graph.
pub const DEFAULT_K: usize = 16;

/// The latent vector produced by the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(pub Vec<f64>);

impl Codeword {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_row(&self) -> Matrix {
        Matrix::from_vec(1, self.0.len(), self.0.clone()).expect("row vector")
    }

    pub fn from_row(row: &Matrix) -> Codeword {
        Codeword(row.data().to_vec())
    }
}

/// One affine layer of a shared per-row perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `in x out`.
    pub weight: Matrix,
    /// `1 x out`.
    pub bias: Matrix,
}

impl Linear {
    fn init(fan_in: usize, fan_out: usize, rng: &mut Stream) -> Linear {
        let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Linear {
            weight: Matrix::from_vec(fan_in, fan_out, data).expect("sized"),
            bias: Matrix::zeros(1, fan_out),
        }
    }
}

/// A stack of [`Linear`] layers with per-layer activations, applied
/// independently to each row of its input.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<(Linear, Activation)>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(widths: &[usize], activations: &[Activation], rng: &mut Stream) -> Mlp {
        assert_eq!(widths.len(), activations.len() + 1);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| (Linear::init(w[0], w[1], rng), act))
            .collect();
        Mlp { layers }
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].0.weight.rows()
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().expect("nonempty").0.weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|(l, _)| l.weight.rows() * l.weight.cols() + l.bias.cols())
            .sum()
    }

    fn forward_on_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        reg: &mut ParamRegistry,
        prefix: &str,
    ) -> Result<NodeId> {
        let mut cur = x;
        for (i, (layer, act)) in self.layers.iter().enumerate() {
            let w = tape.leaf(layer.weight.clone());
            let b = tape.leaf(layer.bias.clone());
            reg.push(format!("{prefix}.{i}.weight"), w, false);
            reg.push(format!("{prefix}.{i}.bias"), b, true);
            cur = tape.per_row_mlp(cur, &[(w, b, *act)])?;
        }
        Ok(cur)
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Matrix, bool)) {
        for (i, (layer, _)) in self.layers.iter().enumerate() {
            f(format!("{prefix}.{i}.weight"), &layer.weight, false);
            f(format!("{prefix}.{i}.bias"), &layer.bias, true);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut Matrix, bool)) {
        for (i, (layer, _)) in self.layers.iter_mut().enumerate() {
            f(format!("{prefix}.{i}.weight"), &mut layer.weight, false);
            f(format!("{prefix}.{i}.bias"), &mut layer.bias, true);
        }
    }
}

/// Parameter nodes registered during a taped forward pass, in the same
/// order as [`AutoEncoder::visit_params`].
#[derive(Default)]
pub struct ParamRegistry {
    pub entries: Vec<(String, NodeId, bool)>,
}

impl ParamRegistry {
    fn push(&mut self, name: String, node: NodeId, is_bias: bool) {
        self.entries.push((name, node, is_bias));
    }
}

/// Architecture switches of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// k-NN graph size.
    pub k: usize,
    /// Pool over `{i} ∪ N(i)` rather than `N(i)` alone.
    pub include_self: bool,
    /// Apply an extra ReLU after each feature-map multiply.
    pub relu_after_kmap: bool,
    /// When false, the graph max-pooling layers degrade to per-point linear
    /// maps of the same widths (the robustness-ablation encoder).
    pub use_graph_layers: bool,
    /// Per-point MLP widths after the 12-wide input.
    pub point_widths: Vec<usize>,
    /// Output widths of the two feature maps.
    pub graph_widths: Vec<usize>,
    /// Head widths after global pooling; the last is the codeword length.
    pub head_widths: Vec<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            k: DEFAULT_K,
            include_self: true,
            relu_after_kmap: true,
            use_graph_layers: true,
            point_widths: vec![64, 64, 64],
            graph_widths: vec![128, 1024],
            head_widths: vec![512, DEFAULT_CODEWORD_LEN],
        }
    }
}

impl EncoderConfig {
    pub fn codeword_len(&self) -> usize {
        *self.head_widths.last().expect("head has layers")
    }
}

/// Encoder parameters: per-point MLP, feature maps, head MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub point_mlp: Mlp,
    /// The feature-mapping matrices of the graph layers (no bias).
    pub k_maps: Vec<Matrix>,
    pub head_mlp: Mlp,
}

impl EncoderParams {
    pub fn init(config: EncoderConfig, rng: &mut Stream) -> EncoderParams {
        let mut point_widths = vec![12];
        point_widths.extend_from_slice(&config.point_widths);
        let point_acts = vec![Activation::Relu; config.point_widths.len()];
        let point_mlp = Mlp::init(&point_widths, &point_acts, rng);

        let mut k_maps = Vec::new();
        let mut prev = *config.point_widths.last().expect("point widths");
        for &w in &config.graph_widths {
            let bound = math::sqrt(6.0 / (prev + w) as f64);
            let data = (0..prev * w).map(|_| rng.gen_range(-bound..=bound)).collect();
            k_maps.push(Matrix::from_vec(prev, w, data).expect("sized"));
            prev = w;
        }

        let mut head_widths = vec![prev];
        head_widths.extend_from_slice(&config.head_widths);
        let mut head_acts = vec![Activation::Relu; config.head_widths.len()];
        if let Some(last) = head_acts.last_mut() {
            *last = Activation::Identity;
        }
        let head_mlp = Mlp::init(&head_widths, &head_acts, rng);

        EncoderParams {
            config,
            point_mlp,
            k_maps,
            head_mlp,
        }
    }

    pub fn param_count(&self) -> usize {
        self.point_mlp.param_count()
            + self
                .k_maps
                .iter()
                .map(|k| k.rows() * k.cols())
                .sum::<usize>()
            + self.head_mlp.param_count()
    }

    /// Taped encoder pipeline: covariance features, per-point MLP, the two
    /// graph layers, global column max, head MLP. Returns the codeword node.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        cloud: &PointCloud,
        reg: &mut ParamRegistry,
    ) -> Result<NodeId> {
        if cloud.len() <= self.config.k {
            return Err(Error::OutOfRange {
                what: "encoder input size n (needs n > k)",
                got: cloud.len(),
                limit: self.config.k + 1,
            });
        }
        let graph = build_knn(cloud, self.config.k)?;
        let cov = local_covariance(cloud, &graph)?;
        let feats = concat_input_features(cloud, &cov)?;
        let mut x = tape.leaf(feats);
        x = self.point_mlp.forward_on_tape(tape, x, reg, "encoder.point_mlp")?;
        for (i, k_map) in self.k_maps.iter().enumerate() {
            let w = tape.leaf(k_map.clone());
            reg.push(format!("encoder.k_map.{i}"), w, false);
            if self.config.use_graph_layers {
                x = tape.neighborhood_max(x, &graph, self.config.include_self)?;
                x = tape.relu(x);
            }
            x = tape.matmul(x, w)?;
            if self.config.relu_after_kmap {
                x = tape.relu(x);
            }
        }
        x = tape.column_max(x)?;
        self.head_mlp.forward_on_tape(tape, x, reg, "encoder.head_mlp")
    }

    /// Inference-only encoding.
    pub fn encode(&self, cloud: &PointCloud) -> Result<Codeword> {
        let mut tape = Tape::new();
        let mut reg = ParamRegistry::default();
        let node = self.forward_on_tape(&mut tape, cloud, &mut reg)?;
        Ok(Codeword::from_row(tape.value(node)))
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Matrix, bool)) {
        self.point_mlp.visit("encoder.point_mlp", f);
        for (i, k_map) in self.k_maps.iter().enumerate() {
            f(format!("encoder.k_map.{i}"), k_map, false);
        }
        self.head_mlp.visit("encoder.head_mlp", f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Matrix, bool)) {
        self.point_mlp.visit_mut("encoder.point_mlp", f);
        for (i, k_map) in self.k_maps.iter_mut().enumerate() {
            f(format!("encoder.k_map.{i}"), k_map, false);
        }
        self.head_mlp.visit_mut("encoder.head_mlp", f);
    }
}

/// Architecture switches of the folding decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldingConfig {
    pub grid: GridSpec,
    /// Number of folding operations (2 or 3).
    pub folds: usize,
    /// Hidden width of each fold's 3-layer perceptron.
    pub hidden: usize,
    /// Codeword length the decoder consumes.
    pub codeword_len: usize,
}

impl FoldingConfig {
    pub fn new(grid: GridSpec, folds: usize, codeword_len: usize) -> FoldingConfig {
        FoldingConfig {
            grid,
            folds,
            hidden: 512,
            codeword_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(2..=3).contains(&self.folds) {
            return Err(Error::InvalidConfig(format!(
                "folds = {} not in {{2, 3}}",
                self.folds
            )));
        }
        Ok(())
    }
}

/// Folding decoder parameters: the fixed grid plus one 3-layer perceptron
/// per fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldingDecoder {
    pub config: FoldingConfig,
    /// The materialised m x dim grid (persisted with the model so that
    /// uniform-random grids survive a checkpoint round-trip).
    pub grid: Matrix,
    pub fold_mlps: Vec<Mlp>,
}

impl FoldingDecoder {
    /// Weights draw before the grid so that the weight stream is identical
    /// across grid modes.
    pub fn init(config: FoldingConfig, rng: &mut Stream) -> Result<FoldingDecoder> {
        config.validate()?;
        let d = config.codeword_len;
        let h = config.hidden;
        let mut fold_mlps = Vec::new();
        let mut in_dim = config.grid.dim;
        for _ in 0..config.folds {
            fold_mlps.push(Mlp::init(
                &[d + in_dim, h, h, 3],
                &[Activation::Relu, Activation::Relu, Activation::Identity],
                rng,
            ));
            in_dim = 3;
        }
        let grid = make_grid(&config.grid, rng)?;
        Ok(FoldingDecoder {
            config,
            grid,
            fold_mlps,
        })
    }

    pub fn param_count(&self) -> usize {
        self.fold_mlps.iter().map(Mlp::param_count).sum()
    }

    /// All stages of the decoding: `[grid, fold1, fold2, (fold3)]`.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        codeword: NodeId,
        reg: &mut ParamRegistry,
    ) -> Result<Vec<NodeId>> {
        let grid_node = tape.leaf(self.grid.clone());
        let mut stages = vec![grid_node];
        let mut x = grid_node;
        for (i, mlp) in self.fold_mlps.iter().enumerate() {
            x = fold_once(tape, x, codeword, mlp, reg, &format!("decoder.fold.{i}"))?;
            stages.push(x);
        }
        Ok(stages)
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Matrix, bool)) {
        for (i, mlp) in self.fold_mlps.iter().enumerate() {
            mlp.visit(&format!("decoder.fold.{i}"), f);
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Matrix, bool)) {
        for (i, mlp) in self.fold_mlps.iter_mut().enumerate() {
            mlp.visit_mut(&format!("decoder.fold.{i}"), f);
        }
    }
}

/// One folding operation: replicate the codeword across the input rows,
/// concatenate, and apply the shared per-row perceptron.
pub fn fold_once(
    tape: &mut Tape,
    input: NodeId,
    codeword: NodeId,
    mlp: &Mlp,
    reg: &mut ParamRegistry,
    prefix: &str,
) -> Result<NodeId> {
    let m = tape.value(input).rows();
    let rep = tape.replicate_rows(codeword, m)?;
    let cat = tape.rowwise_concat(input, rep)?;
    mlp.forward_on_tape(tape, cat, reg, prefix)
}

/// The fully-connected baseline decoder: a plain 3-layer perceptron from
/// the codeword to all output coordinates at once.
#[derive(Debug, Clone, PartialEq)]
pub struct FcDecoder {
    pub mlp: Mlp,
    pub out_points: usize,
}

impl FcDecoder {
    /// Baseline widths 512 -> 1024 -> 2048 -> 3*out_points.
    pub fn init(codeword_len: usize, out_points: usize, rng: &mut Stream) -> FcDecoder {
        let mlp = Mlp::init(
            &[codeword_len, 1024, 2048, 3 * out_points],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            rng,
        );
        FcDecoder { mlp, out_points }
    }

    pub fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        codeword: NodeId,
        reg: &mut ParamRegistry,
    ) -> Result<Vec<NodeId>> {
        let flat = self
            .mlp
            .forward_on_tape(tape, codeword, reg, "decoder.fc")?;
        let out = tape.reshape(flat, self.out_points, 3)?;
        Ok(vec![out])
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Matrix, bool)) {
        self.mlp.visit("decoder.fc", f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Matrix, bool)) {
        self.mlp.visit_mut("decoder.fc", f);
    }
}

/// Either decoder behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    Folding(FoldingDecoder),
    Fc(FcDecoder),
}

impl Decoder {
    pub fn param_count(&self) -> usize {
        match self {
            Decoder::Folding(d) => d.param_count(),
            Decoder::Fc(d) => d.param_count(),
        }
    }

    pub fn out_points(&self) -> usize {
        match self {
            Decoder::Folding(d) => d.grid.rows(),
            Decoder::Fc(d) => d.out_points,
        }
    }

    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        codeword: NodeId,
        reg: &mut ParamRegistry,
    ) -> Result<Vec<NodeId>> {
        match self {
            Decoder::Folding(d) => d.forward_on_tape(tape, codeword, reg),
            Decoder::Fc(d) => d.forward_on_tape(tape, codeword, reg),
        }
    }

    /// Inference-only decoding; returns every stage, the last being the
    /// reconstruction.
    pub fn decode_stages(&self, codeword: &Codeword) -> Result<Vec<Matrix>> {
        let mut tape = Tape::new();
        let mut reg = ParamRegistry::default();
        let cw = tape.leaf(codeword.to_row());
        let stages = self.forward_on_tape(&mut tape, cw, &mut reg)?;
        Ok(stages.into_iter().map(|s| tape.value(s).clone()).collect())
    }

    pub fn decode(&self, codeword: &Codeword) -> Result<PointCloud> {
        let stages = self.decode_stages(codeword)?;
        PointCloud::new(stages.into_iter().next_back().expect("at least one stage"))
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Matrix, bool)) {
        match self {
            Decoder::Folding(d) => d.visit(f),
            Decoder::Fc(d) => d.visit(f),
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Matrix, bool)) {
        match self {
            Decoder::Folding(d) => d.visit_mut(f),
            Decoder::Fc(d) => d.visit_mut(f),
        }
    }
}

/// Handles into a taped full forward pass.
pub struct TapedAutoEncoder {
    /// Parameter leaves, in [`AutoEncoder::visit_params`] order.
    pub params: ParamRegistry,
    pub codeword: NodeId,
    /// Decoder stages; the last entry is the reconstruction.
    pub stages: Vec<NodeId>,
}

impl TapedAutoEncoder {
    pub fn output(&self) -> NodeId {
        *self.stages.last().expect("stages nonempty")
    }
}

/// The complete model.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub encoder: EncoderParams,
    pub decoder: Decoder,
}

impl AutoEncoder {
    /// Builds a freshly initialised model. Weights draw from the labeled
    /// streams `init/encoder`, `init/decoder` and `init/grid` under `root`.
    pub fn init_folding(
        enc: EncoderConfig,
        dec: FoldingConfig,
        root: u64,
    ) -> Result<AutoEncoder> {
        if enc.codeword_len() != dec.codeword_len {
            return Err(Error::InvalidConfig(format!(
                "encoder codeword {} != decoder codeword {}",
                enc.codeword_len(),
                dec.codeword_len
            )));
        }
        let encoder = EncoderParams::init(enc, &mut crate::rng::stream(root, "init/encoder"));
        // the grid draws from its own stream so regular/uniform grids see
        // identical weight initialisation
        let mut dec_rng = crate::rng::stream(root, "init/decoder");
        let mut grid_rng = crate::rng::stream(root, "init/grid");
        let mut decoder = FoldingDecoder::init(dec, &mut dec_rng)?;
        decoder.grid = make_grid(&decoder.config.grid, &mut grid_rng)?;
        Ok(AutoEncoder {
            encoder,
            decoder: Decoder::Folding(decoder),
        })
    }

    pub fn init_fc(enc: EncoderConfig, out_points: usize, root: u64) -> AutoEncoder {
        let codeword_len = enc.codeword_len();
        let encoder = EncoderParams::init(enc, &mut crate::rng::stream(root, "init/encoder"));
        let decoder = FcDecoder::init(
            codeword_len,
            out_points,
            &mut crate::rng::stream(root, "init/decoder"),
        );
        AutoEncoder {
            encoder,
            decoder: Decoder::Fc(decoder),
        }
    }

    /// Full taped forward pass (encode then decode).
    pub fn forward_on_tape(&self, tape: &mut Tape, cloud: &PointCloud) -> Result<TapedAutoEncoder> {
        let mut params = ParamRegistry::default();
        let codeword = self.encoder.forward_on_tape(tape, cloud, &mut params)?;
        let stages = self.decoder.forward_on_tape(tape, codeword, &mut params)?;
        Ok(TapedAutoEncoder {
            params,
            codeword,
            stages,
        })
    }

    /// Encode-decode without gradients.
    pub fn autoencode(&self, cloud: &PointCloud) -> Result<(Codeword, PointCloud)> {
        let codeword = self.encoder.encode(cloud)?;
        let out = self.decoder.decode(&codeword)?;
        Ok((codeword, out))
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Walks every parameter matrix with its stable name; biases flagged.
    pub fn visit_params<'a>(&'a self, f: &mut impl FnMut(String, &'a Matrix, bool)) {
        self.encoder.visit(f);
        self.decoder.visit(f);
    }

    pub fn visit_params_mut(&mut self, f: &mut impl FnMut(String, &mut Matrix, bool)) {
        self.encoder.visit_mut(f);
        self.decoder.visit_mut(f);
    }

    /// Named snapshot of all parameters (cloned).
    pub fn named_params(&self) -> Vec<(String, Matrix, bool)> {
        let mut out = Vec::new();
        self.visit_params(&mut |name, m, is_bias| out.push((name, m.clone(), is_bias)));
        out
    }
}

/// Decoder parameter count of the default folding decoder (d = 512, 2D
/// grid, two folds, hidden 512): two perceptrons of widths
/// 514/515 -> 512 -> 512 -> 3.
pub fn folding_decoder_param_count(codeword_len: usize, grid_dim: usize, folds: usize) -> usize {
    let h = 512usize;
    let mut total = 0;
    let mut in_dim = grid_dim;
    for _ in 0..folds {
        let w0 = codeword_len + in_dim;
        total += w0 * h + h + h * h + h + h * 3 + 3;
        in_dim = 3;
    }
    total
}

/// Parameter count of the fully-connected baseline decoder
/// (512 -> 1024 -> 2048 -> 6144 for 2048 output points).
pub fn fc_decoder_param_count(codeword_len: usize, out_points: usize) -> usize {
    let widths = [codeword_len, 1024, 2048, 3 * out_points];
    widths
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridMode;
    use crate::rng::stream;
    use rand::Rng;

    fn small_encoder_config() -> EncoderConfig {
        EncoderConfig {
            k: 4,
            point_widths: vec![8, 8, 8],
            graph_widths: vec![12, 16],
            head_widths: vec![10, 6],
            ..Default::default()
        }
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = stream(seed, "test/model/cloud");
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        PointCloud::from_points(&pts).unwrap()
    }

    #[test]
    fn encode_is_permutation_invariant_bitwise() {
        let enc = EncoderParams::init(small_encoder_config(), &mut stream(71, "init"));
        let cloud = random_cloud(20, 72);
        let base = enc.encode(&cloud).unwrap();
        let mut rng = stream(73, "perm");
        for _ in 0..8 {
            let mut perm: Vec<usize> = (0..20).collect();
            for i in 0..20 {
                let j = rng.gen_range(i..20);
                perm.swap(i, j);
            }
            let mut pts = Matrix::zeros(20, 3);
            for (new_i, &old_i) in perm.iter().enumerate() {
                pts.row_mut(new_i).copy_from_slice(cloud.points().row(old_i));
            }
            let permuted = PointCloud::new(pts).unwrap();
            let code = enc.encode(&permuted).unwrap();
            assert_eq!(base, code);
        }
    }

    #[test]
    fn zero_weights_give_zero_codeword() {
        let mut enc = EncoderParams::init(small_encoder_config(), &mut stream(74, "init"));
        enc.visit_mut(&mut |_, m, _| {
            *m = Matrix::zeros(m.rows(), m.cols());
        });
        let code = enc.encode(&random_cloud(16, 75)).unwrap();
        assert!(code.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_rejects_small_clouds() {
        let enc = EncoderParams::init(small_encoder_config(), &mut stream(76, "init"));
        assert!(enc.encode(&random_cloud(4, 77)).is_err());
        assert!(enc.encode(&random_cloud(5, 77)).is_ok());
    }

    #[test]
    fn no_graph_variant_is_still_invariant_and_differs() {
        let cfg = small_encoder_config();
        let mut ablated = cfg.clone();
        ablated.use_graph_layers = false;
        // identical weights for both: same init stream
        let enc = EncoderParams::init(cfg, &mut stream(78, "init"));
        let mut no_graph = enc.clone();
        no_graph.config.use_graph_layers = false;

        let cloud = random_cloud(20, 79);
        let a = enc.encode(&cloud).unwrap();
        let b = no_graph.encode(&cloud).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(b.len(), 6);
        assert_ne!(a, b);

        // permutation invariance survives the ablation
        let mut pts = Matrix::zeros(20, 3);
        for i in 0..20 {
            pts.row_mut(i).copy_from_slice(cloud.points().row(19 - i));
        }
        let rev = PointCloud::new(pts).unwrap();
        assert_eq!(no_graph.encode(&rev).unwrap(), b);
    }

    #[test]
    fn fold_intermediate_width_is_dim_plus_codeword() {
        let spec = GridSpec::default_square(9);
        let dec =
            FoldingDecoder::init(FoldingConfig::new(spec, 2, 6), &mut stream(80, "init")).unwrap();
        assert_eq!(dec.fold_mlps[0].in_width(), 2 + 6);
        assert_eq!(dec.fold_mlps[1].in_width(), 3 + 6);
        assert_eq!(dec.fold_mlps[1].out_width(), 3);
    }

    #[test]
    fn decode_zero_weights_collapses_to_bias_point() {
        let spec = GridSpec::default_square(16);
        let mut dec =
            FoldingDecoder::init(FoldingConfig::new(spec, 2, 5), &mut stream(81, "init")).unwrap();
        for mlp in &mut dec.fold_mlps {
            for (layer, _) in &mut mlp.layers {
                layer.weight = Matrix::zeros(layer.weight.rows(), layer.weight.cols());
                layer.bias = Matrix::zeros(1, layer.bias.cols());
            }
        }
        // put a recognisable bias on the last layer
        let last = dec.fold_mlps.last_mut().unwrap();
        last.layers.last_mut().unwrap().0.bias =
            Matrix::from_rows(&[&[0.25, -0.5, 1.0]]).unwrap();
        let out = Decoder::Folding(dec)
            .decode(&Codeword(vec![0.3; 5]))
            .unwrap();
        for i in 0..out.len() {
            assert_eq!(out.point(i), [0.25, -0.5, 1.0]);
        }
    }

    #[test]
    fn identical_grid_rows_give_identical_output_rows() {
        // two identical rows through a fold are mapped identically
        let dec = FoldingDecoder::init(
            FoldingConfig::new(
                GridSpec {
                    dim: 2,
                    mode: GridMode::UniformRandom,
                    m: 4,
                    extent: 0.5,
                },
                2,
                5,
            ),
            &mut stream(82, "init"),
        )
        .unwrap();
        let mut dup = dec.clone();
        let row = dup.grid.row(0).to_vec();
        dup.grid.row_mut(1).copy_from_slice(&row);
        let out = Decoder::Folding(dup)
            .decode_stages(&Codeword(vec![0.1, -0.2, 0.3, 0.4, -0.5]))
            .unwrap();
        let last = out.last().unwrap();
        assert_eq!(last.row(0), last.row(1));
    }

    #[test]
    fn decode_row_depends_only_on_its_grid_row() {
        let dec = FoldingDecoder::init(
            FoldingConfig::new(GridSpec::default_square(9), 2, 5),
            &mut stream(83, "init"),
        )
        .unwrap();
        let code = Codeword(vec![0.2, 0.1, -0.3, 0.5, 0.0]);
        let base = Decoder::Folding(dec.clone()).decode(&code).unwrap();
        // zeroing every other grid row must leave row 4 unchanged
        let mut mutated = dec;
        for r in 0..9 {
            if r != 4 {
                mutated.grid.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let out = Decoder::Folding(mutated).decode(&code).unwrap();
        assert_eq!(out.point(4), base.point(4));
    }

    #[test]
    fn permuting_grid_rows_permutes_output_rows() {
        let dec = FoldingDecoder::init(
            FoldingConfig::new(GridSpec::default_square(16), 2, 4),
            &mut stream(84, "init"),
        )
        .unwrap();
        let code = Codeword(vec![0.4, -0.1, 0.2, 0.6]);
        let base = Decoder::Folding(dec.clone()).decode(&code).unwrap();
        let mut rev = dec;
        let original = rev.grid.clone();
        for r in 0..16 {
            rev.grid.row_mut(r).copy_from_slice(original.row(15 - r));
        }
        let out = Decoder::Folding(rev).decode(&code).unwrap();
        for r in 0..16 {
            assert_eq!(out.point(r), base.point(15 - r));
        }
    }

    #[test]
    fn default_folding_output_is_2025_points() {
        let dec = FoldingDecoder::init(
            FoldingConfig::new(GridSpec::default_square(2025), 2, DEFAULT_CODEWORD_LEN),
            &mut stream(85, "init"),
        )
        .unwrap();
        let code = Codeword(vec![0.01; DEFAULT_CODEWORD_LEN]);
        let out = Decoder::Folding(dec).decode(&code).unwrap();
        assert_eq!(out.len(), 2025);
    }

    #[test]
    fn fc_decoder_shape_and_zero_weight_bias() {
        let mut dec = FcDecoder::init(8, 2048, &mut stream(86, "init"));
        for (layer, _) in &mut dec.mlp.layers {
            layer.weight = Matrix::zeros(layer.weight.rows(), layer.weight.cols());
            layer.bias = Matrix::zeros(1, layer.bias.cols());
        }
        let out = Decoder::Fc(dec).decode(&Codeword(vec![1.0; 8])).unwrap();
        assert_eq!(out.len(), 2048);
        for i in 0..10 {
            assert_eq!(out.point(i), [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn decoder_param_counts_match_closed_form() {
        // folding: 514/515 -> 512 -> 512 -> 3 twice
        assert_eq!(folding_decoder_param_count(512, 2, 2), 1_056_262);
        // fully-connected baseline: 512 -> 1024 -> 2048 -> 6144
        assert_eq!(fc_decoder_param_count(512, 2048), 15_213_568);
        let ratio = folding_decoder_param_count(512, 2, 2) as f64
            / fc_decoder_param_count(512, 2048) as f64;
        assert!(ratio > 0.065 && ratio < 0.075, "{ratio}");
        assert!(ratio < 0.08);

        // the structs agree with the closed forms
        let fold = FoldingDecoder::init(
            FoldingConfig::new(GridSpec::default_square(2025), 2, 512),
            &mut stream(87, "init"),
        )
        .unwrap();
        assert_eq!(fold.param_count(), 1_056_262);
        let fc = FcDecoder::init(512, 2048, &mut stream(88, "init"));
        assert_eq!(fc.param_count(), 15_213_568);
    }

    #[test]
    fn full_forward_is_finite() {
        let model = AutoEncoder::init_folding(
            small_encoder_config(),
            FoldingConfig::new(GridSpec::default_square(16), 2, 6),
            91,
        )
        .unwrap();
        let (code, out) = model.autoencode(&random_cloud(24, 92)).unwrap();
        assert!(code.as_slice().iter().all(|v| v.is_finite()));
        assert!(out.points().is_finite());
    }

    #[test]
    fn named_params_align_with_taped_registry() {
        let model = AutoEncoder::init_folding(
            small_encoder_config(),
            FoldingConfig::new(GridSpec::default_square(9), 3, 6),
            93,
        )
        .unwrap();
        let mut tape = Tape::new();
        let taped = model
            .forward_on_tape(&mut tape, &random_cloud(12, 94))
            .unwrap();
        let named = model.named_params();
        assert_eq!(named.len(), taped.params.entries.len());
        for ((n1, m, b1), (n2, node, b2)) in named.iter().zip(&taped.params.entries) {
            assert_eq!(n1, n2);
            assert_eq!(b1, b2);
            assert_eq!(m, tape.value(*node));
        }
    }
}
