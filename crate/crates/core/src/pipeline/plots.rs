//! SVG line charts and PNG reconstruction grids.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Party, RunReport};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 170.0, 40.0, 55.0); // left, right, top, bottom
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

struct Chart<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    log_y: bool,
    series: Vec<Series>,
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart<'_> {
    fn render(&self) -> String {
        let (ml, mr, mt, mb) = MARGIN;
        let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
        let ty = |v: f64| if self.log_y { v.max(1e-300).log10() } else { v };
        let finite: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || y > 0.0))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &finite {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(ty(y));
            y1 = y1.max(ty(y));
        }
        if finite.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if self.log_y {
            (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
        } else {
            let pad = ((y1 - y0) * 0.05).max(1e-9);
            (y0, y1) = (if y0 >= 0.0 { (y0 - pad).max(0.0) } else { y0 - pad }, y1 + pad);
        }
        if x1 <= x0 {
            (x0, x1) = (x0 - 1.0, x1 + 1.0);
        }
        let px = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| mt + ph - (ty(y) - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, ml + pw / 2.0, escape(self.title));
        let _ = writeln!(s, r##"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);

        for t in nice_ticks(x0, x1) {
            let x = px(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, mt, mt + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, mt + ph + 16.0, fmt_tick(t));
        }
        let y_ticks: Vec<f64> = if self.log_y {
            (y0 as i32..=y1 as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            nice_ticks(y0, y1)
        };
        for t in y_ticks {
            let y = py(t);
            let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, ml + pw);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, ml - 6.0, y + 4.0, fmt_tick(t));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, HEIGHT - 14.0, escape(self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            mt + ph / 2.0,
            escape(self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|&&(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || y > 0.0))
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, pts.join(" "));
            for p in &pts {
                let (cx, cy) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
            let ly = mt + 10.0 + 18.0 * i as f64;
            let lx = ml + pw + 12.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 22.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Writes the figures for whatever `report` contains:
/// `mse_vs_latent.svg`, `mse_vs_snr.svg`, `psnr_vs_latent.svg`,
/// `secrecy.svg` and `ber.svg`.
pub fn emit_plots(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let lengths: Vec<usize> = {
        let mut v: Vec<usize> = report.cells.iter().map(|c| c.latent_length).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let snrs = sorted_unique(report.cells.iter().map(|c| c.snr_db).collect());

    if !report.cells.is_empty() {
        let mut by_latent = Vec::new();
        let mut psnr = Vec::new();
        for party in [Party::Bob, Party::Eve] {
            for &snr in &snrs {
                let pick = |f: &dyn Fn(&super::QualitySummary) -> f64| -> Vec<(f64, f64)> {
                    lengths
                        .iter()
                        .filter_map(|&l| report.cell(l, snr, party).map(|c| (l as f64, f(&c.quality))))
                        .collect()
                };
                let label = format!("{} {snr} dB", party.as_str());
                by_latent.push(Series {
                    label: label.clone(),
                    points: pick(&|q| q.normalized_mse.mean),
                    dashed: party == Party::Eve,
                });
                psnr.push(Series { label, points: pick(&|q| q.psnr_db.mean), dashed: party == Party::Eve });
            }
        }
        let chart = Chart {
            title: "Reconstruction error by latent length",
            x_label: "latent length",
            y_label: "normalized MSE",
            log_y: true,
            series: by_latent,
        };
        write_file(&dir.join("mse_vs_latent.svg"), chart.render().as_bytes())?;
        let chart = Chart { title: "PSNR by latent length", x_label: "latent length", y_label: "PSNR (dB)", log_y: false, series: psnr };
        write_file(&dir.join("psnr_vs_latent.svg"), chart.render().as_bytes())?;

        let mut by_snr = Vec::new();
        for party in [Party::Bob, Party::Eve] {
            for &l in &lengths {
                let points = snrs
                    .iter()
                    .filter_map(|&snr| report.cell(l, snr, party).map(|c| (snr, c.quality.normalized_mse.mean)))
                    .collect();
                by_snr.push(Series { label: format!("{} L={l}", party.as_str()), points, dashed: party == Party::Eve });
            }
        }
        let chart = Chart { title: "Reconstruction error by SNR", x_label: "SNR (dB)", y_label: "normalized MSE", log_y: true, series: by_snr };
        write_file(&dir.join("mse_vs_snr.svg"), chart.render().as_bytes())?;
    }

    if !report.secrecy.is_empty() {
        let pick = |f: &dyn Fn(&super::SecrecySummary) -> f64| report.secrecy.iter().map(|s| (s.snr_db, f(s))).collect();
        let series = vec![
            Series { label: "Bob capacity".into(), points: pick(&|s| s.bob_capacity.mean), dashed: false },
            Series { label: "Eve capacity".into(), points: pick(&|s| s.eve_capacity.mean), dashed: true },
            Series { label: "secrecy bound".into(), points: pick(&|s| s.secrecy_lower_bound.mean), dashed: false },
        ];
        let chart = Chart { title: "Secrecy rate", x_label: "SNR (dB)", y_label: "bits per channel use", log_y: false, series };
        write_file(&dir.join("secrecy.svg"), chart.render().as_bytes())?;
    }

    if !report.ber.is_empty() {
        let series = report
            .ber
            .iter()
            .map(|(scenario, points)| Series {
                label: scenario.as_str().to_string(),
                points: points.iter().map(|p| (p.snr_db, p.ber)).collect(),
                dashed: *scenario == crate::modem::Scenario::EveWithAn,
            })
            .collect();
        let chart = Chart { title: "BPSK bit error rate", x_label: "SNR (dB)", y_label: "BER", log_y: true, series };
        write_file(&dir.join("ber.svg"), chart.render().as_bytes())?;
    }
    Ok(())
}

/// Writes `samples_L{L}_snr{snr}.png` for every sample set: originals on the
/// top row, Bob's reconstructions in the middle, Eve's at the bottom.
pub fn emit_samples(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for set in &report.samples {
        let Some(first) = set.original.first() else { continue };
        let (w, h, c) = first.dims();
        let cols = set.original.len();
        let gap = 2;
        let (gw, gh) = (cols * (w + gap) + gap, 3 * (h + gap) + gap);
        let mut canvas = image::GrayImage::from_pixel(gw as u32, gh as u32, image::Luma([128]));
        for (row, images) in [&set.original, &set.bob, &set.eve].into_iter().enumerate() {
            for (col, img) in images.iter().enumerate() {
                let (ox, oy) = (gap + col * (w + gap), gap + row * (h + gap));
                for y in 0..h {
                    for x in 0..w {
                        let px = &img.values()[(y * w + x) * c..(y * w + x + 1) * c];
                        let v = px.iter().sum::<f64>() / c as f64;
                        let byte = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                        canvas.put_pixel((ox + x) as u32, (oy + y) as u32, image::Luma([byte]));
                    }
                }
            }
        }
        let path = dir.join(format!("samples_L{}_snr{}.png", set.latent_length, set.snr_db));
        canvas.save(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_the_range() {
        let t = nice_ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(nice_ticks(32.0, 256.0).len() >= 3);
    }

    #[test]
    fn chart_is_well_formed() {
        let chart = Chart {
            title: "a < b",
            x_label: "x",
            y_label: "y",
            log_y: true,
            series: vec![Series { label: "s".into(), points: vec![(0.0, 0.1), (1.0, 0.01), (2.0, 0.0)], dashed: true }],
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
