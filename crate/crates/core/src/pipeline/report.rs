//! CSV output. Floats use Rust's shortest round-trip formatting, so equal
//! reports give byte-identical files.

use std::fs;
use std::path::Path;

use super::{RunReport, Summary};
use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per latent length, SNR, party and metric, with columns
/// `latent_length, snr_db, party, metric, mean, std, trials`.
pub fn emit_csv(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let mut rows = Vec::with_capacity(report.cells.len() * 4);
    for cell in &report.cells {
        let q = &cell.quality;
        let ratio = Summary { mean: q.compression_ratio, std: 0.0, trials: q.plain_mse.trials };
        for (metric, s) in [
            ("normalized_mse", &q.normalized_mse),
            ("plain_mse", &q.plain_mse),
            ("psnr_db", &q.psnr_db),
            ("compression_ratio", &ratio),
        ] {
            rows.push(vec![
                cell.latent_length.to_string(),
                cell.snr_db.to_string(),
                cell.party.as_str().to_string(),
                metric.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.trials.to_string(),
            ]);
        }
    }
    write_rows(path.as_ref(), &["latent_length", "snr_db", "party", "metric", "mean", "std", "trials"], rows)
}

pub fn emit_secrecy_csv(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let rows = report.secrecy.iter().flat_map(|s| {
        [
            ("bob_capacity", s.bob_capacity),
            ("eve_capacity", s.eve_capacity),
            ("secrecy_lower_bound", s.secrecy_lower_bound),
            ("positive_fraction", Summary { mean: s.positive_fraction, std: 0.0, trials: s.bob_capacity.trials }),
        ]
        .into_iter()
        .map(move |(metric, v)| {
            vec![s.snr_db.to_string(), metric.to_string(), v.mean.to_string(), v.std.to_string(), v.trials.to_string()]
        })
    });
    write_rows(path.as_ref(), &["snr_db", "metric", "mean", "std", "trials"], rows)
}

pub fn emit_ber_csv(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let rows = report.ber.iter().flat_map(|(scenario, points)| {
        points.iter().map(move |p| {
            vec![
                scenario.as_str().to_string(),
                p.snr_db.to_string(),
                p.ber.to_string(),
                p.std_error().to_string(),
                p.errors.to_string(),
                p.trials.to_string(),
            ]
        })
    });
    write_rows(path.as_ref(), &["scenario", "snr_db", "ber", "std_error", "errors", "trials"], rows)
}

/// Per-step mini-batch losses from training.
pub fn emit_train_csv(histories: &[(usize, Vec<f64>)], path: impl AsRef<Path>) -> Result<()> {
    let rows = histories.iter().flat_map(|(l, losses)| {
        losses.iter().enumerate().map(move |(i, loss)| vec![l.to_string(), i.to_string(), loss.to_string()])
    });
    write_rows(path.as_ref(), &["latent_length", "iteration", "loss"], rows)
}
