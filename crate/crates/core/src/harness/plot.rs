use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{read_csv, MetricsRow};
use crate::error::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Which per-episode quantity a learning curve shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveMetric {
    Return,
    Steps,
}

impl CurveMetric {
    fn label(self) -> &'static str {
        match self {
            CurveMetric::Return => "episode return",
            CurveMetric::Steps => "steps per episode",
        }
    }

    fn of(self, r: &MetricsRow) -> f64 {
        match self {
            CurveMetric::Return => r.episode_return,
            CurveMetric::Steps => r.steps as f64,
        }
    }
}

/// One agent's runs: values indexed `[trial][episode]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    pub trials: Vec<Vec<f64>>,
}

impl CurveSeries {
    pub fn from_rows(label: impl Into<String>, rows: &[MetricsRow], metric: CurveMetric) -> Self {
        let n = rows.iter().map(|r| r.trial + 1).max().unwrap_or(0);
        let mut trials = vec![Vec::new(); n];
        let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
        sorted.sort_by_key(|r| (r.trial, r.episode));
        for r in sorted {
            trials[r.trial].push(metric.of(r));
        }
        CurveSeries {
            label: label.into(),
            trials,
        }
    }

    pub fn from_csv(path: &Path, metric: CurveMetric) -> Result<Self> {
        let label = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        Ok(Self::from_rows(label, &read_csv(path)?, metric))
    }

    /// Per-episode mean and population standard deviation over the trials that
    /// reached that episode.
    pub fn mean_std(&self) -> Vec<(f64, f64)> {
        let len = self.trials.iter().map(Vec::len).max().unwrap_or(0);
        (0..len)
            .map(|e| {
                let v: Vec<f64> = self.trials.iter().filter_map(|t| t.get(e).copied()).collect();
                let m = v.iter().sum::<f64>() / v.len() as f64;
                let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
                (m, var.sqrt())
            })
            .collect()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if (b - a).abs() < 1e-12 { (a - 1.0, b + 1.0) } else { (a, b) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        writeln!(svg, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#333"/>"##, r - l, b - t).unwrap();
        for i in 0..=5 {
            let fx = self.x0 + (self.x1 - self.x0) * i as f64 / 5.0;
            let fy = self.y0 + (self.y1 - self.y0) * i as f64 / 5.0;
            let (x, y) = (self.px(fx), self.py(fy));
            writeln!(svg, r##"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, b + 5.0).unwrap();
            writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, b + 18.0, tick(fx)).unwrap();
            writeln!(svg, r##"<line x1="{:.2}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="#333"/>"##, l - 5.0).unwrap();
            writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, l - 8.0, y + 4.0, tick(fy)).unwrap();
        }
        writeln!(svg, r#"<text x="{:.2}" y="24" font-size="14" text-anchor="middle">{}</text>"#, (l + r) / 2.0, esc(title)).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, esc(xlabel)).unwrap();
        writeln!(
            svg,
            r#"<text x="18" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            esc(ylabel)
        )
        .unwrap();
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e5) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn write(path: &Path, svg: String) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Mean-over-trials curves with a one-standard-deviation band, one series per input.
pub fn render_learning_curve(series: &[CurveSeries], metric: CurveMetric, title: &str) -> Result<String> {
    let stats: Vec<Vec<(f64, f64)>> = series.iter().map(CurveSeries::mean_std).collect();
    if stats.iter().all(Vec::is_empty) {
        return Err(Error::Usage("learning curve needs at least one episode".into()));
    }
    let episodes = stats.iter().map(Vec::len).max().unwrap_or(1);
    let lo = stats.iter().flatten().map(|(m, s)| m - s).fold(f64::INFINITY, f64::min);
    let hi = stats.iter().flatten().map(|(m, s)| m + s).fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new(0.0, episodes.saturating_sub(1).max(1) as f64, lo, hi);
    let mut svg = header();
    f.axes(&mut svg, title, "episode", metric.label());
    for (i, (s, st)) in series.iter().zip(&stats).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if st.is_empty() {
            continue;
        }
        let mut band = String::new();
        for (e, (m, sd)) in st.iter().enumerate() {
            write!(band, "{:.2},{:.2} ", f.px(e as f64), f.py(m + sd)).unwrap();
        }
        for (e, (m, sd)) in st.iter().enumerate().rev() {
            write!(band, "{:.2},{:.2} ", f.px(e as f64), f.py(m - sd)).unwrap();
        }
        writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.trim_end()).unwrap();
        let line: Vec<String> = st
            .iter()
            .enumerate()
            .map(|(e, (m, _))| format!("{:.2},{:.2}", f.px(e as f64), f.py(*m)))
            .collect();
        writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" ")).unwrap();
        let ly = TOP + 20.0 * i as f64 + 10.0;
        writeln!(svg, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#, W - RIGHT + 15.0, W - RIGHT + 35.0).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="12">{} (n={})</text>"#, W - RIGHT + 40.0, ly + 4.0, esc(&s.label), s.trials.len()).unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_learning_curve(series: &[CurveSeries], metric: CurveMetric, title: &str, path: &Path) -> Result<()> {
    write(path, render_learning_curve(series, metric, title)?)
}

/// Marker shape for a latent point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Cross,
}

pub fn marker_for(reward: f64) -> Marker {
    if reward >= 0.0 {
        Marker::Circle
    } else {
        Marker::Cross
    }
}

/// 2-D latent scatter: circles for non-negative reward, crosses for negative,
/// coloured by cluster when `clusters` is given.
pub fn render_latent_scatter(points: &[[f64; 2]], rewards: &[f64], clusters: Option<&[usize]>, title: &str) -> Result<String> {
    if points.len() != rewards.len() || clusters.is_some_and(|c| c.len() != points.len()) {
        return Err(Error::Shape("scatter: points, rewards and clusters differ in length".into()));
    }
    if points.is_empty() {
        return Err(Error::Usage("scatter needs at least one point".into()));
    }
    let xs = points.iter().map(|p| p[0]);
    let ys = points.iter().map(|p| p[1]);
    let f = Frame::new(
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
        ys.clone().fold(f64::INFINITY, f64::min),
        ys.fold(f64::NEG_INFINITY, f64::max),
    );
    let mut svg = header();
    f.axes(&mut svg, title, "z1", "z2");
    let color = |i: usize| clusters.map_or("#1f77b4", |c| PALETTE[c[i] % PALETTE.len()]);
    for (i, (p, &r)) in points.iter().zip(rewards).enumerate() {
        let (x, y) = (f.px(p[0]), f.py(p[1]));
        match marker_for(r) {
            Marker::Circle => writeln!(svg, r#"<circle class="pos" cx="{x:.2}" cy="{y:.2}" r="2.2" fill="{}" fill-opacity="0.6"/>"#, color(i)).unwrap(),
            Marker::Cross => writeln!(
                svg,
                r#"<path class="neg" d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{}" stroke-width="1.4"/>"#,
                x - 3.5, y - 3.5, x + 3.5, y + 3.5, x - 3.5, y + 3.5, x + 3.5, y - 3.5,
                color(i)
            )
            .unwrap(),
        }
    }
    let lx = W - RIGHT + 15.0;
    let mut ly = TOP + 10.0;
    writeln!(svg, r##"<circle cx="{:.2}" cy="{ly:.2}" r="3" fill="#555"/><text x="{:.2}" y="{:.2}" font-size="12">reward &#8805; 0</text>"##, lx + 5.0, lx + 15.0, ly + 4.0).unwrap();
    ly += 20.0;
    writeln!(
        svg,
        r##"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="#555" stroke-width="1.4"/><text x="{:.2}" y="{:.2}" font-size="12">reward &lt; 0</text>"##,
        lx + 2.0, ly - 3.0, lx + 8.0, ly + 3.0, lx + 2.0, ly + 3.0, lx + 8.0, ly - 3.0,
        lx + 15.0,
        ly + 4.0
    )
    .unwrap();
    if let Some(c) = clusters {
        let k = c.iter().max().map_or(0, |m| m + 1);
        for j in 0..k {
            ly += 20.0;
            writeln!(
                svg,
                r#"<rect class="legend-cluster" x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}" font-size="12">cluster {j}</text>"#,
                lx,
                ly - 5.0,
                PALETTE[j % PALETTE.len()],
                lx + 15.0,
                ly + 4.0
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_latent_scatter(points: &[[f64; 2]], rewards: &[f64], clusters: Option<&[usize]>, title: &str, path: &Path) -> Result<()> {
    write(path, render_latent_scatter(points, rewards, clusters, title)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_markers_follow_reward_sign() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]];
        let all_pos = render_latent_scatter(&pts, &[1.0, 0.0, 1.0], None, "t").unwrap();
        assert_eq!(all_pos.matches("class=\"pos\"").count(), 3);
        assert_eq!(all_pos.matches("class=\"neg\"").count(), 0);
        let mixed = render_latent_scatter(&pts, &[1.0, -1.0, 1.0], Some(&[0, 1, 2]), "t").unwrap();
        assert_eq!(mixed.matches("class=\"neg\"").count(), 1);
        assert_eq!(mixed.matches("legend-cluster").count(), 3);
        for c in &PALETTE[..3] {
            assert!(mixed.contains(c));
        }
        assert!(render_latent_scatter(&pts, &[1.0], None, "t").is_err());
    }

    #[test]
    fn curve_stats_and_svg() {
        let s = CurveSeries {
            label: "dqn".into(),
            trials: vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]],
        };
        assert_eq!(s.mean_std(), vec![(2.0, 1.0), (2.0, 0.0), (2.0, 1.0)]);
        let svg = render_learning_curve(&[s], CurveMetric::Return, "CartPole").unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polygon") && svg.contains("<polyline") && svg.contains("episode return"));
    }
}
