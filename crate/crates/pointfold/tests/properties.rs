//! Property tests for the structural invariants: permutation invariance of
//! the encoder, Chamfer symmetry and oracle agreement, and augmentation
//! bookkeeping.

use proptest::prelude::*;

use pointfold::chamfer::chamfer;
use pointfold::cloud::PointCloud;
use pointfold::grid::GridSpec;
use pointfold::matrix::Matrix;
use pointfold::model::{AutoEncoder, EncoderConfig, FoldingConfig};
use pointfold::rng::stream;

fn cloud_strategy(max_n: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(
        prop::array::uniform3(-1.0f64..1.0),
        1..=max_n,
    )
    .prop_map(|pts| PointCloud::from_points(&pts).unwrap())
}

fn tiny_model(seed: u64) -> AutoEncoder {
    let enc = EncoderConfig {
        k: 4,
        point_widths: vec![8, 8, 8],
        graph_widths: vec![12, 16],
        head_widths: vec![10, 6],
        ..Default::default()
    };
    AutoEncoder::init_folding(
        enc,
        FoldingConfig {
            grid: GridSpec::default_square(16),
            folds: 2,
            hidden: 8,
            codeword_len: 6,
        },
        seed,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encoder_is_permutation_invariant(
        pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 8..24),
        perm_seed in 0u64..1000,
    ) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        let model = tiny_model(777);
        let base = model.encoder.encode(&cloud).unwrap();

        use pointfold::rng::Rng;
        let mut rng = stream(perm_seed, "prop/perm");
        let n = cloud.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let j = rng.gen_range(i..n);
            perm.swap(i, j);
        }
        let mut permuted = Matrix::zeros(n, 3);
        for (new_i, &old_i) in perm.iter().enumerate() {
            permuted.row_mut(new_i).copy_from_slice(cloud.points().row(old_i));
        }
        let code = model.encoder.encode(&PointCloud::new(permuted).unwrap()).unwrap();
        prop_assert_eq!(base, code);
    }

    #[test]
    fn chamfer_is_symmetric_and_matches_double_loop(
        a in cloud_strategy(32),
        b in cloud_strategy(32),
    ) {
        let ab = chamfer(&a, &b).unwrap();
        let ba = chamfer(&b, &a).unwrap();
        prop_assert_eq!(ab.value.to_bits(), ba.value.to_bits());

        // independent recomputation straight from the definition
        let dist = |p: [f64; 3], q: [f64; 3]| -> f64 {
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        let mut sum_ab = 0.0;
        for i in 0..a.len() {
            let mut best = f64::INFINITY;
            for j in 0..b.len() {
                best = best.min(dist(a.point(i), b.point(j)));
            }
            sum_ab += best;
        }
        let mut sum_ba = 0.0;
        for j in 0..b.len() {
            let mut best = f64::INFINITY;
            for i in 0..a.len() {
                best = best.min(dist(a.point(i), b.point(j)));
            }
            sum_ba += best;
        }
        let oracle = (sum_ab / a.len() as f64).max(sum_ba / b.len() as f64);
        prop_assert_eq!(ab.value.to_bits(), oracle.to_bits());
        prop_assert!(ab.value >= 0.0);
    }

    #[test]
    fn chamfer_is_zero_only_for_equal_sets(a in cloud_strategy(16)) {
        let same = chamfer(&a, &a).unwrap();
        prop_assert_eq!(same.value, 0.0);
    }

    #[test]
    fn augmentations_preserve_point_count(
        pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 4..40),
        rotation in 0usize..24,
        fraction in 0.0f64..1.0,
        seed in 0u64..500,
    ) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        let rotated = cloud.axis_aligned_rotation(rotation).unwrap();
        prop_assert_eq!(rotated.len(), cloud.len());

        let mut rng = stream(seed, "prop/noise");
        let noisy = cloud.shift_noise(fraction, &mut rng).unwrap();
        prop_assert_eq!(noisy.len(), cloud.len());
        // exactly ceil(fraction * n) points replaced
        let moved = (0..cloud.len())
            .filter(|&i| noisy.point(i) != cloud.point(i))
            .count();
        prop_assert!(moved <= (fraction * cloud.len() as f64).ceil() as usize);

        let normalized = cloud.normalize_unit_sphere();
        prop_assert_eq!(normalized.len(), cloud.len());
        let max_norm = (0..normalized.len())
            .map(|i| {
                let p = normalized.point(i);
                (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
            })
            .fold(0.0f64, f64::max);
        prop_assert!(max_norm <= 1.0 + 1e-9);
    }

    #[test]
    fn decode_rows_are_pointwise_in_grid_rows(
        codeword in prop::collection::vec(-1.0f64..1.0, 6),
        row in 0usize..16,
    ) {
        // zeroing every other grid row leaves the chosen row's output alone
        let model = tiny_model(778);
        let code = pointfold::model::Codeword(codeword);
        let pointfold::model::Decoder::Folding(decoder) = &model.decoder else {
            unreachable!()
        };
        let base = model.decoder.decode(&code).unwrap();
        let mut zeroed = decoder.clone();
        for r in 0..zeroed.grid.rows() {
            if r != row {
                zeroed.grid.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let out = pointfold::model::Decoder::Folding(zeroed).decode(&code).unwrap();
        prop_assert_eq!(out.point(row), base.point(row));
    }
}
