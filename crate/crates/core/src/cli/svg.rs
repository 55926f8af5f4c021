//! Minimal SVG line plots (risk curves, difference curves with confidence
//! bands). The CSV stays the source of truth; these are quick-look charts
//! with no external plotting dependency.

/// One plotted series: points in data coordinates, optional (lo, hi) band.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub band: Vec<(f64, f64, f64)>,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            band: Vec::new(),
        }
    }
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders the series into a complete SVG document. `log_x` plots x on a
/// log10 axis (all x must be positive then).
pub fn render_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_x: bool,
) -> String {
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| {
            s.points
                .iter()
                .map(|p| p.0)
                .chain(s.band.iter().map(|b| b.0))
        })
        .map(|x| if log_x { x.log10() } else { x })
        .collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| {
            s.points
                .iter()
                .map(|p| p.1)
                .chain(s.band.iter().flat_map(|b| [b.1, b.2]))
        })
        .collect();
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);

    let to_x = |x: f64| {
        let x = if log_x { x.log10() } else { x };
        MARGIN + (x - x_min) / (x_max - x_min) * (W - 2.0 * MARGIN)
    };
    let to_y = |y: f64| H - MARGIN - (y - y_min) / (y_max - y_min) * (H - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));

    // axes with 5 ticks each
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    ));
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = MARGIN + (W - 2.0 * MARGIN) * i as f64 / 4.0;
        let label = if log_x { fmt(10f64.powf(fx)) } else { fmt(fx) };
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            H - MARGIN + 18.0
        ));
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = H - MARGIN - (H - 2.0 * MARGIN) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{py}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MARGIN - 6.0,
            fmt(fy)
        ));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#dddddd\"/>\n",
            W - MARGIN
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        W / 2.0,
        H - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !s.band.is_empty() {
            let mut d = String::from("M");
            for (x, lo, _) in &s.band {
                d.push_str(&format!("{:.2},{:.2} L", to_x(*x), to_y(*lo)));
            }
            for (x, _, hi) in s.band.iter().rev() {
                d.push_str(&format!("{:.2},{:.2} L", to_x(*x), to_y(*hi)));
            }
            d.truncate(d.len() - 2);
            d.push('Z');
            svg.push_str(&format!(
                "<path d=\"{d}\" fill=\"{color}\" opacity=\"0.18\"/>\n"
            ));
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", to_x(*x), to_y(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            pts.join(" ")
        ));
        for p in &pts {
            let (px, py) = p.split_once(',').unwrap();
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.4\" fill=\"{color}\"/>\n"
            ));
        }
        // legend entry
        let ly = MARGIN + 18.0 * i as f64 + 8.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2.5\"/>\n",
            W - MARGIN - 170.0,
            W - MARGIN - 146.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            W - MARGIN - 140.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.06;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let series = vec![
            Series::line("flat", vec![(0.1, 1.2), (1.0, 1.4), (10.0, 1.49)]),
            Series {
                label: "diff".into(),
                points: vec![(0.1, -0.3), (1.0, -0.2), (10.0, -0.05)],
                band: vec![(0.1, -0.35, -0.25), (1.0, -0.25, -0.15), (10.0, -0.1, 0.0)],
            },
        ];
        let svg = render_plot("risk vs total", "Lambda", "risk", &series, true);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("path d="));
    }
}
