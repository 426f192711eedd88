use std::path::{Path, PathBuf};
use std::process::Command;

use uavsec::cae::{self, CaeConfig, ModelParams, TrainConfig};
use uavsec::pipeline::{self, ExperimentConfig, Split};
use uavsec::rng::stream;
use uavsec::{Error, ImageTensor32};

fn digits() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/digits")
}

fn tiny(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset_path: digits(),
        latent_lengths: vec![4, 8],
        snr_grid_db: vec![5.0, 10.0, 20.0],
        train: TrainConfig { iterations: 2, batch_size: 16, ..Default::default() },
        max_train_images: Some(32),
        max_test_images: Some(10),
        ber_bits_per_point: 2000,
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn digit_files_load_with_stable_contents() {
    let test: Vec<ImageTensor32> = pipeline::load_dataset(digits(), Split::Test).unwrap();
    let train: Vec<ImageTensor32> = pipeline::load_dataset(digits(), Split::Train).unwrap();
    assert_eq!((test.len(), train.len()), (4997, 5003));
    assert!(test.iter().all(|img| img.dims() == (28, 28, 1) && img.in_unit_range()));
    let checksum: u32 = test[0].values().iter().map(|v| (v * 255.0).round() as u32).sum();
    assert_eq!(checksum, 19608);
}

#[test]
fn csv_covers_the_grid_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let report = pipeline::sweep::<f32>(&cfg).unwrap();
    assert_eq!(report.cells.len(), 2 * 3 * 2);

    let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("latent_length,snr_db,party,metric,mean,std,trials"));
    assert_eq!(lines.count(), 2 * 3 * 2 * 4);

    for file in ["secrecy.csv", "ber.csv", "mse_vs_latent.svg", "mse_vs_snr.svg", "ber.svg", "samples_L8_snr20.png"] {
        assert!(dir.path().join(file).is_file(), "{file} missing");
    }
    for l in [4, 8] {
        let params: ModelParams<f64> = cae::load_checkpoint(cfg.checkpoint_path(l)).unwrap();
        assert_eq!(params.config().latent_length, l);
    }
}

#[test]
fn missing_checkpoint_is_reported_when_training_is_off() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { train_if_missing: false, ..tiny(dir.path()) };
    assert!(matches!(
        pipeline::run_end_to_end::<f32>(&cfg),
        Err(Error::MissingCheckpoint { latent_length: 4, .. })
    ));
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let params = ModelParams::<f64>::init(CaeConfig::digits(32), &mut stream(1)).unwrap();
    cae::save_checkpoint(&params, &path).unwrap();
    assert_eq!(cae::load_checkpoint::<f64>(&path).unwrap(), params);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[4] = 9;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(cae::load_checkpoint::<f64>(&path), Err(Error::VersionMismatch { found: 9, .. })));
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"seed": 7, "latent_lengths": [32], "train": {"iterations": 10}}"#).unwrap();
    let cfg = ExperimentConfig::load(&good).unwrap();
    assert_eq!((cfg.seed, cfg.latent_lengths.clone(), cfg.train.iterations), (7, vec![32], 10));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seed": 7, "antennas": 4}"#).unwrap();
    assert!(matches!(ExperimentConfig::load(&bad), Err(Error::ConfigInvalid(_))));
    assert!(matches!(ExperimentConfig::load(dir.path().join("none.json")), Err(Error::IoFailure { .. })));
}

#[test]
fn cli_secrecy_and_output_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let flag_dir = dir.path().join("from_flag");
    let bin = env!("CARGO_BIN_EXE_uavsec");

    let status = Command::new(bin)
        .args(["secrecy", "--draws", "50", "--seed", "3"])
        .env(pipeline::OUTPUT_DIR_ENV, &env_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_dir.join("secrecy.csv").is_file());

    let status = Command::new(bin)
        .args(["ber", "--bits", "2000", "--output-dir"])
        .arg(&flag_dir)
        .env(pipeline::OUTPUT_DIR_ENV, &env_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_dir.join("ber.csv").is_file());
    assert!(!env_dir.join("ber.csv").exists());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"bogus": 1}"#).unwrap();
    let out = Command::new(bin).args(["eval", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn shipped_configs_parse() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    assert_eq!(ExperimentConfig::load(root.join("default.json")).unwrap(), ExperimentConfig::default());
    ExperimentConfig::load(root.join("quick.json")).unwrap();
}
