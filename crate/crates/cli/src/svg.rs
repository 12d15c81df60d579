//! Minimal self-contained SVG rendering: line charts and heatmaps with axis
//! labels, no external assets.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite()) {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() {
            min = 0.0;
            max = 1.0;
        }
        if min == max {
            min -= 0.5;
            max += 0.5;
        }
        Range { min, max }
    }

    fn pad(mut self, fraction: f64) -> Range {
        let pad = (self.max - self.min) * fraction;
        self.min -= pad;
        self.max += pad;
        self
    }

    fn scale(&self, v: f64, lo: f64, hi: f64) -> f64 {
        lo + (v - self.min) / (self.max - self.min) * (hi - lo)
    }
}

fn axes(out: &mut String, title: &str, x_label: &str, y_label: &str, x: &Range, y: &Range) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        (x0 + x1) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let vx = x.min + t * (x.max - x.min);
        let vy = y.min + t * (y.max - y.min);
        let px = x.scale(vx, x0, x1);
        let py = y.scale(vy, y0, y1);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{y0}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            y0 + 5.0,
            y0 + 20.0,
            format_tick(vx)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{x0}\" y2=\"{py:.1}\" stroke=\"black\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            format_tick(vy)
        );
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// A multi-series line chart with points, one polyline per series.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let mut out = String::new();
    header(&mut out);
    let x_range = Range::of(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0))).pad(0.02);
    let y_range = Range::of(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.1))).pad(0.05);
    axes(&mut out, title, x_label, y_label, &x_range, &y_range);

    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    for (index, (name, points)) in series.iter().enumerate() {
        let color = SERIES_COLORS[index % SERIES_COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| {
                format!(
                    "{:.1},{:.1}",
                    x_range.scale(x, x0, x1),
                    y_range.scale(y, y0, y1)
                )
            })
            .collect();
        if path.len() > 1 {
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.join(" ")
            );
        }
        for p in &path {
            let mut coords = p.split(',');
            let (px, py) = (coords.next().unwrap(), coords.next().unwrap());
            let _ = writeln!(out, "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>");
        }
        let ly = MARGIN_TOP + 16.0 * index as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            x1 + 10.0,
            ly,
            x1 + 25.0,
            ly + 9.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// A heatmap over a small rectangular grid; `None` cells render gray.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_ticks: &[String],
    y_ticks: &[String],
    cells: &[Vec<Option<f64>>],
) -> String {
    let mut out = String::new();
    header(&mut out);
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        (x0 + x1) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );

    let range = Range::of(cells.iter().flatten().filter_map(|c| *c));
    let rows = cells.len().max(1);
    let cols = cells.first().map_or(1, |r| r.len()).max(1);
    let cell_w = (x1 - x0) / cols as f64;
    let cell_h = (y0 - y1) / rows as f64;
    for (row, row_cells) in cells.iter().enumerate() {
        for (col, cell) in row_cells.iter().enumerate() {
            let px = x0 + col as f64 * cell_w;
            let py = y1 + row as f64 * cell_h;
            let fill = match cell {
                Some(v) => viridis((v - range.min) / (range.max - range.min).max(1e-300)),
                None => "#bbbbbb".to_string(),
            };
            let _ = writeln!(
                out,
                "<rect x=\"{px:.1}\" y=\"{py:.1}\" width=\"{cell_w:.1}\" height=\"{cell_h:.1}\" \
                 fill=\"{fill}\" stroke=\"white\"/>"
            );
        }
    }
    for (col, tick) in x_ticks.iter().enumerate().take(cols) {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x0 + (col as f64 + 0.5) * cell_w,
            y0 + 18.0,
            escape(tick)
        );
    }
    for (row, tick) in y_ticks.iter().enumerate().take(rows) {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            x0 - 6.0,
            y1 + (row as f64 + 0.5) * cell_h + 4.0,
            escape(tick)
        );
    }
    out.push_str("</svg>\n");
    out
}

// Five-stop approximation of the viridis colormap.
fn viridis(t: f64) -> String {
    let stops = [
        (68u8, 1u8, 84u8),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ];
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    let f = t - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(stops[i].0, stops[i + 1].0),
        mix(stops[i].1, stops[i + 1].1),
        mix(stops[i].2, stops[i + 1].2)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_balanced_xml(text: &str) {
        // Rough well-formedness check: every opened tag closes.
        let mut depth = 0i32;
        for token in text.split('<').skip(1) {
            if token.starts_with('/') {
                depth -= 1;
            } else if !token.trim_end().ends_with("/>") {
                depth += 1;
            }
            assert!(depth >= 0, "unbalanced: {token}");
        }
        assert_eq!(depth, 0);
    }

    #[test]
    fn line_chart_is_valid_xml() {
        let svg = line_chart(
            "t",
            "x",
            "y",
            &[("a & b".into(), vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)])],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("&amp;"));
        assert_balanced_xml(&svg);
    }

    #[test]
    fn heatmap_is_valid_xml() {
        let svg = heatmap(
            "t",
            "x",
            "y",
            &["1".into(), "2".into()],
            &["a".into()],
            &[vec![Some(0.5), None]],
        );
        assert_balanced_xml(&svg);
        assert!(svg.contains("#bbbbbb"));
    }
}
