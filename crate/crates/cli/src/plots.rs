//! Static SVG plot emission: metric bar charts and reward-component
//! curves. Output is plain text and fully deterministic.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
}

/// Vertical bar chart of labeled non-negative values.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut svg = header(title);
    if !bars.is_empty() {
        let max = bars.iter().map(|(_, v)| *v).fold(0.0f64, f64::max).max(1e-12);
        let plot_w = WIDTH - 2.0 * MARGIN;
        let plot_h = HEIGHT - 2.0 * MARGIN;
        let slot = plot_w / bars.len() as f64;
        let bar_w = slot * 0.6;
        for (i, (label, value)) in bars.iter().enumerate() {
            let h = (value / max).max(0.0) * plot_h;
            let x = MARGIN + i as f64 * slot + (slot - bar_w) / 2.0;
            let y = HEIGHT - MARGIN - h;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" \
                 fill=\"#4878a8\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
                 text-anchor=\"middle\">{label}</text>\n",
                x + bar_w / 2.0,
                HEIGHT - MARGIN + 16.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{value:.4}</text>\n",
                x + bar_w / 2.0,
                y - 4.0
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Line chart of one or more named series over a shared x axis.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const COLORS: [&str; 4] = ["#4878a8", "#a84848", "#48a868", "#a88a48"];
    let mut svg = header(title);
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if !points.is_empty() {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if (x1 - x0).abs() < 1e-12 {
            x1 = x0 + 1.0;
        }
        if (y1 - y0).abs() < 1e-12 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        for (si, (name, pts)) in series.iter().enumerate() {
            if pts.is_empty() {
                continue;
            }
            let color = COLORS[si % COLORS.len()];
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path.join(" ")
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
                 fill=\"{color}\">{name}</text>\n",
                WIDTH - MARGIN + 4.0,
                40.0 + 16.0 * si as f64
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
