//! Minimal SVG line/scatter rendering for quick looks at the CSV outputs.
//!
//! Deliberately tiny: fixed canvas, one series, numeric tick labels. The
//! CSV files stay the primary artifacts.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 58.0;

pub enum PlotStyle {
    Line,
    Scatter,
}

pub struct Plot<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub style: PlotStyle,
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
}

fn range(values: &[f64]) -> (f64, f64) {
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
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn render(plot: &Plot) -> String {
    let (x_lo, x_hi) = range(plot.xs);
    let (y_lo, y_hi) = range(plot.ys);
    let map_x = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let map_y = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    // tick labels at the corners of the data range
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{:.4}</text>\n",
        MARGIN,
        HEIGHT - MARGIN + 16.0,
        x_lo
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{:.4}</text>\n",
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        x_hi
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.4}</text>\n",
        MARGIN - 6.0,
        HEIGHT - MARGIN,
        y_lo
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.4}</text>\n",
        MARGIN - 6.0,
        MARGIN + 4.0,
        y_hi
    ));
    // labels
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 14.0,
        plot.x_label
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        plot.y_label
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        plot.title
    ));

    match plot.style {
        PlotStyle::Line => {
            let points: Vec<String> = plot
                .xs
                .iter()
                .zip(plot.ys)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", map_x(x), map_y(y)))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
                points.join(" ")
            ));
        }
        PlotStyle::Scatter => {
            for (&x, &y) in plot.xs.iter().zip(plot.ys) {
                if x.is_finite() && y.is_finite() {
                    out.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"#2c6fbb\"/>\n",
                        map_x(x),
                        map_y(y)
                    ));
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
