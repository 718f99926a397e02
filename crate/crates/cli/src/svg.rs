//! Minimal SVG plotting: linear axes, points, polylines, shaded bands and
//! reference lines. Output depends only on the data, so it is reproducible
//! byte for byte.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

#[derive(Debug, Clone)]
enum Layer {
    Points { xs: Vec<f64>, ys: Vec<f64> },
    Line { xs: Vec<f64>, ys: Vec<f64>, dashed: bool },
    Band { xs: Vec<f64>, lower: Vec<f64>, upper: Vec<f64> },
    Stems { xs: Vec<f64>, ys: Vec<f64> },
    HLine { y: f64, dashed: bool },
    Labels { xs: Vec<f64>, ys: Vec<f64>, text: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    layers: Vec<Layer>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            layers: Vec::new(),
        }
    }

    pub fn points(mut self, xs: &[f64], ys: &[f64]) -> Self {
        self.layers.push(Layer::Points { xs: xs.to_vec(), ys: ys.to_vec() });
        self
    }

    pub fn line(mut self, xs: &[f64], ys: &[f64], dashed: bool) -> Self {
        self.layers.push(Layer::Line { xs: xs.to_vec(), ys: ys.to_vec(), dashed });
        self
    }

    pub fn band(mut self, xs: &[f64], lower: &[f64], upper: &[f64]) -> Self {
        self.layers.push(Layer::Band {
            xs: xs.to_vec(),
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        });
        self
    }

    /// Vertical segments from zero, as in an index or ACF plot.
    pub fn stems(mut self, xs: &[f64], ys: &[f64]) -> Self {
        self.layers.push(Layer::Stems { xs: xs.to_vec(), ys: ys.to_vec() });
        self
    }

    pub fn hline(mut self, y: f64, dashed: bool) -> Self {
        self.layers.push(Layer::HLine { y, dashed });
        self
    }

    pub fn labels(mut self, xs: &[f64], ys: &[f64], text: Vec<String>) -> Self {
        self.layers.push(Layer::Labels { xs: xs.to_vec(), ys: ys.to_vec(), text });
        self
    }

    fn extent(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        let take = |r: &mut (f64, f64), v: f64| {
            if v.is_finite() {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        };
        for layer in &self.layers {
            match layer {
                Layer::Points { xs, ys } | Layer::Line { xs, ys, .. } | Layer::Labels { xs, ys, .. } => {
                    xs.iter().for_each(|&v| take(&mut xr, v));
                    ys.iter().for_each(|&v| take(&mut yr, v));
                }
                Layer::Stems { xs, ys } => {
                    xs.iter().for_each(|&v| take(&mut xr, v));
                    ys.iter().for_each(|&v| take(&mut yr, v));
                    take(&mut yr, 0.0);
                }
                Layer::Band { xs, lower, upper } => {
                    xs.iter().for_each(|&v| take(&mut xr, v));
                    lower.iter().chain(upper).for_each(|&v| take(&mut yr, v));
                }
                Layer::HLine { y, .. } => take(&mut yr, *y),
            }
        }
        (pad(xr), pad(yr))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.extent();
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
        let sy = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        // axes frame and ticks
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(s, r#"<path d="M{l:.1},{t:.1}V{b:.1}H{r:.1}" fill="none" stroke="black"/>"#);
        let mut tick_path = String::new();
        for v in ticks(x0, x1) {
            let x = sx(v);
            let _ = write!(tick_path, "M{x:.1},{b:.1}v5");
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, b + 17.0, tick_label(v));
        }
        for v in ticks(y0, y1) {
            let y = sy(v);
            let _ = write!(tick_path, "M{l:.1},{y:.1}h-5");
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, l - 8.0, y + 4.0, tick_label(v));
        }
        let _ = writeln!(s, r#"<path d="{tick_path}" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(&self.y_label)
        );

        for layer in &self.layers {
            match layer {
                Layer::Band { xs, lower, upper } => {
                    let mut d = String::new();
                    for (i, (&x, &y)) in xs.iter().zip(upper).enumerate() {
                        let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { 'M' } else { 'L' }, sx(x), sy(y));
                    }
                    for (&x, &y) in xs.iter().zip(lower).rev() {
                        let _ = write!(d, "L{:.2},{:.2}", sx(x), sy(y));
                    }
                    d.push('Z');
                    let _ = writeln!(s, r##"<path d="{d}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##);
                }
                Layer::Line { xs, ys, dashed } => {
                    let d = polyline(xs, ys, &sx, &sy);
                    let dash = if *dashed { r#" stroke-dasharray="5,4""# } else { "" };
                    let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#d62728" stroke-width="1.5"{dash}/>"##);
                }
                Layer::Points { xs, ys } => {
                    let mut d = String::new();
                    for (&x, &y) in xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = write!(d, "M{:.2},{:.2}m-2.5,0a2.5,2.5 0 1,0 5,0a2.5,2.5 0 1,0 -5,0", sx(x), sy(y));
                    }
                    let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#1f77b4"/>"##);
                }
                Layer::Stems { xs, ys } => {
                    let mut d = String::new();
                    for (&x, &y) in xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = write!(d, "M{:.2},{:.2}V{:.2}", sx(x), sy(0.0), sy(y));
                    }
                    let _ = writeln!(s, r##"<path d="{d}" stroke="#1f77b4" stroke-width="1.5"/>"##);
                }
                Layer::HLine { y, dashed } => {
                    let dash = if *dashed { r#" stroke-dasharray="5,4""# } else { "" };
                    let _ = writeln!(s, r#"<path d="M{l:.1},{:.2}H{r:.1}" stroke="gray"{dash}/>"#, sy(*y));
                }
                Layer::Labels { xs, ys, text } => {
                    for ((&x, &y), t) in xs.iter().zip(ys).zip(text) {
                        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, sx(x) + 4.0, sy(y) - 4.0, escape(t));
                    }
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn polyline(xs: &[f64], ys: &[f64], sx: &impl Fn(f64) -> f64, sy: &impl Fn(f64) -> f64) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x.is_finite() && y.is_finite()) {
            pen_down = false;
            continue;
        }
        let _ = write!(d, "{}{:.2},{:.2}", if pen_down { 'L' } else { 'M' }, sx(x), sy(y));
        pen_down = true;
    }
    d
}

/// Widens a range by 5% each side; a degenerate or empty range becomes `[v-1, v+1]`.
fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 1.0, hi + 1.0);
    }
    let m = 0.05 * (hi - lo);
    (lo - m, hi + m)
}

/// Round tick positions (steps of 1, 2 or 5 times a power of ten).
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
