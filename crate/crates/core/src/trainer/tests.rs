use super::*;
use crate::encoder::{write_checkpoint, Variant, VariantConfig};
use crate::frontend::{load_noise_bank, synth_dataset, FrontendConfig, Manifest, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_model(seed: u64) -> Model<f64> {
    let cfg = VariantConfig {
        kernel: 3,
        expansion: 2,
        n_blocks: 2,
        ..VariantConfig::new(Variant::Mlp, 8)
    };
    Model::new(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn data(keep_audio: bool) -> (tempfile::TempDir, TrainSet) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        train_positives: 30,
        train_negative_hours: 20.0 / 3600.0,
        eval_positives: 0,
        eval_negative_hours: 0.0,
        negative_seconds: 1.0,
        noise_seconds: 1.0,
        seed: 5,
        ..SynthSpec::default()
    };
    let out = synth_dataset(&spec, dir.path()).unwrap();
    let m = Manifest::load(&out.train_manifest).unwrap();
    let noise = load_noise_bank(&out.noise_list).unwrap();
    let set = load_train_set(&m, &FrontendConfig::default(), keep_audio, noise).unwrap();
    (dir, set)
}

fn ckpt_bytes(m: &Model<f64>) -> Vec<u8> {
    let mut b = Vec::new();
    write_checkpoint(m, &mut b).unwrap();
    b
}

#[test]
fn loss_decreases_over_ten_epochs() {
    let (_d, set) = data(false);
    assert_eq!(set.items.len(), 50);
    let mut model = tiny_model(1);
    let cfg = TrainConfig {
        batch_size: 8,
        adam: AdamConfig {
            lr: 3e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let report = train(&mut model, &set, None, &cfg, None).unwrap();
    let first = report.epochs.first().unwrap().loss;
    let last = report.last("train").unwrap().loss;
    assert_eq!(report.epochs.len(), 10);
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn zero_lr_leaves_parameters_bitwise_unchanged() {
    let (_d, set) = data(false);
    let mut model = tiny_model(2);
    let before = ckpt_bytes(&model);
    let cfg = TrainConfig {
        epochs: 1,
        adam: AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    train(&mut model, &set, None, &cfg, None).unwrap();
    assert_eq!(ckpt_bytes(&model), before);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let (_d, set) = data(true);
    let cfg = TrainConfig {
        epochs: 2,
        noise_prob: 0.5,
        speed_prob: 0.5,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let out = tempfile::tempdir().unwrap();
        let mut model = tiny_model(3);
        train(&mut model, &set, Some(&set), &cfg, Some(out.path())).unwrap();
        let read = |n: &str| std::fs::read(out.path().join(n)).unwrap();
        (read("model.ckpt"), read("epoch_01.ckpt"), read("metrics.jsonl"))
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let log = String::from_utf8(a.2).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(log.lines().next().unwrap().starts_with("{\"epoch\":1,\"split\":\"train\",\"loss\":"));
}

#[test]
fn augmentation_without_audio_is_a_data_error() {
    let (_d, set) = data(false);
    let cfg = TrainConfig {
        epochs: 1,
        noise_prob: 1.0,
        ..TrainConfig::default()
    };
    let err = train(&mut tiny_model(4), &set, None, &cfg, None).unwrap_err();
    assert!(matches!(err, Error::Data { .. }));
}

#[test]
fn config_validation() {
    let (_d, set) = data(false);
    let bad = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(train(&mut tiny_model(5), &set, None, &bad, None).is_err());
    let bad = TrainConfig {
        class_weights: vec![1.0; 3],
        ..TrainConfig::default()
    };
    assert!(train(&mut tiny_model(5), &set, None, &bad, None).is_err());
}
