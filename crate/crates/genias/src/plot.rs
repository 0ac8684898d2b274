//! Offline SVG plots: score histograms (optionally log-scale counts) and
//! original-versus-patched window overlays with shaded replacement spans.

use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{GeniasError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn write_svg(path: &Path, body: String) -> Result<()> {
    std::fs::write(path, body).map_err(|e| GeniasError::io(path.display().to_string(), e))
}

fn fmt(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Overlaid histogram of two score sets over a shared bin range.
/// With `log_y` the bar heights follow log10(1 + count) and the axis group
/// carries a `data-yscale="log"` attribute.
pub fn score_histogram_svg(
    scores_a: &[f64],
    label_a: &str,
    scores_b: &[f64],
    label_b: &str,
    bins: usize,
    log_y: bool,
    path: &Path,
) -> Result<()> {
    if scores_a.is_empty() || scores_b.is_empty() || bins == 0 {
        return Err(GeniasError::Param(
            "histogram needs non-empty score sets and at least one bin".into(),
        ));
    }
    let lo = scores_a
        .iter()
        .chain(scores_b)
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = scores_a
        .iter()
        .chain(scores_b)
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let count = |scores: &[f64]| -> Vec<usize> {
        let mut c = vec![0usize; bins];
        for &s in scores {
            let idx = (((s - lo) / span) * bins as f64) as usize;
            c[idx.min(bins - 1)] += 1;
        }
        c
    };
    let ca = count(scores_a);
    let cb = count(scores_b);
    let max_count = ca.iter().chain(cb.iter()).copied().max().unwrap_or(1).max(1);

    let scale = |c: usize| -> f64 {
        if log_y {
            (1.0 + c as f64).log10() / (1.0 + max_count as f64).log10()
        } else {
            c as f64 / max_count as f64
        }
    };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / bins as f64;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<g class=\"axes\" data-yscale=\"{}\">\n",
        if log_y { "log" } else { "linear" }
    ));
    s.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    ));
    s.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        HEIGHT - MARGIN + 16.0,
        fmt(lo)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        fmt(hi)
    ));
    s.push_str("</g>\n");

    for (color, counts, label, dy) in [
        ("#4878cf", &ca, label_a, 14.0),
        ("#d65f5f", &cb, label_b, 30.0),
    ] {
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let h = scale(c) * plot_h;
            s.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\" fill-opacity=\"0.55\"/>\n",
                MARGIN + i as f64 * bar_w,
                HEIGHT - MARGIN - h,
                bar_w.max(1.0),
                h
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            WIDTH - MARGIN - 160.0,
            MARGIN + dy
        ));
    }
    s.push_str("</svg>\n");
    write_svg(path, s)
}

/// One panel per dimension: the original window, the patched window, and
/// shaded spans over replaced cells.
pub fn overlay_svg(
    original: &ArrayView2<f64>,
    patched: &ArrayView2<f64>,
    mask: &Array2<u8>,
    path: &Path,
) -> Result<()> {
    if original.shape() != patched.shape() || original.shape() != mask.shape() {
        return Err(GeniasError::Shape {
            expected: format!("{:?}", original.shape()),
            actual: format!("{:?} / {:?}", patched.shape(), mask.shape()),
        });
    }
    let (t_len, dims) = (original.nrows(), original.ncols());
    if t_len < 2 {
        return Err(GeniasError::Param("overlay needs at least two timesteps".into()));
    }
    let panel_h = 160.0;
    let height = MARGIN + dims as f64 * (panel_h + 20.0);
    let plot_w = WIDTH - 2.0 * MARGIN;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for d in 0..dims {
        let top = MARGIN / 2.0 + d as f64 * (panel_h + 20.0);
        let lo = original
            .column(d)
            .iter()
            .chain(patched.column(d).iter())
            .fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = original
            .column(d)
            .iter()
            .chain(patched.column(d).iter())
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x_of = |t: usize| MARGIN + t as f64 / (t_len - 1) as f64 * plot_w;
        let y_of = |v: f64| top + panel_h - (v - lo) / span * panel_h;

        // Shade contiguous replaced spans.
        let mut t = 0;
        while t < t_len {
            if mask[[t, d]] == 1 {
                let start = t;
                while t < t_len && mask[[t, d]] == 1 {
                    t += 1;
                }
                s.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{panel_h}\" fill=\"#d65f5f\" fill-opacity=\"0.12\"/>\n",
                    x_of(start),
                    (x_of(t.saturating_sub(1)) - x_of(start)).max(1.0),
                ));
            } else {
                t += 1;
            }
        }

        for (data, color, width) in [(original.view(), "#777777", 1.2), (patched.view(), "#d65f5f", 1.5)] {
            let points: Vec<String> = (0..t_len)
                .map(|t| format!("{:.2},{:.2}", x_of(t), y_of(data[[t, d]])))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n",
                points.join(" ")
            ));
        }
        s.push_str(&format!(
            "<text x=\"{MARGIN}\" y=\"{:.2}\" font-size=\"11\">dim {d} [{}, {}]</text>\n",
            top - 4.0,
            fmt(lo),
            fmt(hi)
        ));
    }
    s.push_str("</svg>\n");
    write_svg(path, s)
}
