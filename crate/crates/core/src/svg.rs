//! Minimal SVG heatmaps with a linear colour scale and labelled colour bar.

use std::fmt::Write;

/// A row-major grid of values. `values[j * nx + i]` is the cell at column i, row j;
/// row 0 is drawn at the bottom. Non-finite cells are drawn grey.
#[derive(Clone, Debug)]
pub struct Heatmap<'a> {
    pub title: &'a str,
    pub values: &'a [f64],
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// Colour-scale limits; `None` uses the data range.
    pub limits: Option<(f64, f64)>,
}

const STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [59, 76, 192]),
    (0.25, [141, 176, 254]),
    (0.5, [221, 221, 221]),
    (0.75, [244, 154, 123]),
    (1.0, [180, 4, 38]),
];

/// Colour at `t ∈ [0, 1]` on a blue-white-red ramp.
pub fn colour(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    for w in STOPS.windows(2) {
        let ((a, ca), (b, cb)) = (w[0], w[1]);
        if t <= b {
            let s = (t - a) / (b - a);
            let mut out = [0u8; 3];
            for c in 0..3 {
                out[c] = (ca[c] as f64 + s * (cb[c] as f64 - ca[c] as f64)).round() as u8;
            }
            return out;
        }
    }
    STOPS[STOPS.len() - 1].1
}

fn data_limits(values: &[f64]) -> (f64, f64) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Renders the heatmap as a standalone SVG document.
pub fn render(h: &Heatmap) -> String {
    assert_eq!(h.values.len(), h.nx * h.ny, "heatmap size mismatch");
    let (lo, hi) = h.limits.unwrap_or_else(|| data_limits(h.values));
    let (left, top, plot, bar_gap, bar_w) = (70.0, 40.0, 400.0, 20.0, 20.0);
    let width = left + plot + bar_gap + bar_w + 70.0;
    let height = top + plot + 60.0;
    let cw = plot / h.nx.max(1) as f64;
    let ch = plot / h.ny.max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot / 2.0,
        escape(h.title)
    );
    for j in 0..h.ny {
        for i in 0..h.nx {
            let v = h.values[j * h.nx + i];
            let fill = if v.is_finite() {
                let [r, g, b] = colour((v - lo) / (hi - lo));
                format!("rgb({r},{g},{b})")
            } else {
                "rgb(128,128,128)".to_string()
            };
            let x = left + i as f64 * cw;
            let y = top + plot - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );

    // Axis ticks at the ends and middle of each range.
    for f in [0.0, 0.5, 1.0] {
        let xv = h.x_range.0 + f * (h.x_range.1 - h.x_range.0);
        let yv = h.y_range.0 + f * (h.y_range.1 - h.y_range.0);
        let px = left + f * plot;
        let py = top + plot - f * plot;
        let _ = writeln!(
            s,
            r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            top + plot,
            top + plot + 5.0,
            top + plot + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py}" x2="{left}" y2="{py}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + plot / 2.0,
        top + plot + 40.0,
        escape(h.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        top + plot / 2.0,
        top + plot / 2.0,
        escape(h.y_label)
    );

    // Colour bar.
    let bx = left + plot + bar_gap;
    let bands = 64;
    for b in 0..bands {
        let t = (b as f64 + 0.5) / bands as f64;
        let [r, g, bl] = colour(t);
        let y = top + plot - (b + 1) as f64 * plot / bands as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{y:.3}" width="{bar_w}" height="{:.3}" fill="rgb({r},{g},{bl})"/>"#,
            plot / bands as f64 + 0.05
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{bx}" y="{top}" width="{bar_w}" height="{plot}" fill="none" stroke="black"/>"#
    );
    for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let v = lo + f * (hi - lo);
        let py = top + plot - f * plot;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="black"/><text x="{}" y="{}">{}</text>"#,
            bx + bar_w,
            bx + bar_w + 4.0,
            bx + bar_w + 6.0,
            py + 4.0,
            tick_label(v)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
