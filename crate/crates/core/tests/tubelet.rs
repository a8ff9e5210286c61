mod support;

use mimd_core::model::{count_tokens, extract_tubelets, ImageDims, ModelConfig, Tubelet};
use mimd_core::Tensor;
use support::{tubelet_case, Mix};

#[test]
fn embedding_matches_strided_convolution() {
    let mut mix = Mix(1);
    for i in 0..50 {
        // alternate between a small geometry and one with several channels
        let cfg = ModelConfig {
            image: ImageDims {
                slices: 4 + 2 * (i % 3),
                height: 6,
                width: 4 * (1 + i % 2),
                channels: 1 + i % 3,
            },
            tubelet: Tubelet { t: 2, h: 3, w: 2 },
            embed_dim: 5,
            heads: 1,
            ..ModelConfig::default()
        };
        let (err, tokens) = tubelet_case(&cfg, &mut mix).unwrap();
        assert!(err < 1e-10, "case {i}: {err:e}");
        assert_eq!(tokens, cfg.tokens());
    }
}

#[test]
fn default_geometry_has_80_tokens() {
    let cfg = ModelConfig::default();
    assert_eq!(cfg.tokens(), (25 / 5) * (32 / 8) * (32 / 8));
    assert_eq!(cfg.tokens(), 80);
    let (err, tokens) = tubelet_case(&ModelConfig { embed_dim: 4, heads: 1, ..cfg }, &mut Mix(2)).unwrap();
    assert!(err < 1e-10);
    assert_eq!(tokens, 80);
}

#[test]
fn non_dividing_tubelets_are_rejected() {
    let image = ImageDims {
        slices: 25,
        height: 32,
        width: 32,
        channels: 3,
    };
    assert!(count_tokens(image, Tubelet { t: 4, h: 8, w: 8 }).is_err());
    assert!(count_tokens(image, Tubelet { t: 5, h: 7, w: 8 }).is_err());
    assert_eq!(count_tokens(image, Tubelet { t: 25, h: 8, w: 8 }).unwrap(), 16);
}

#[test]
fn wrong_volume_shape_is_rejected() {
    let cfg = ModelConfig::default();
    assert!(extract_tubelets(&Tensor::zeros(&[25, 32, 32, 1]), &cfg).is_err());
}
