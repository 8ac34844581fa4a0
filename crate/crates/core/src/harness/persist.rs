//! CSV outputs. Every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};
use crate::harness::experiment::{HorizonSummary, RegretReport, RunRecord};

/// Hex SHA-256 of a configuration's canonical text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io { path: PathBuf::from("<csv buffer>"), source: e.into_error() })
}

pub fn run_id(mode: &str, learner: &str, horizon: usize, seed: u64) -> String {
    format!("{mode}_{learner}_T{horizon}_s{seed}")
}

#[derive(Debug, Serialize)]
struct TraceRow {
    t: usize,
    reward: f64,
    cum_reward: f64,
    query_count: u32,
}

/// `trace_<runid>.csv`: one row per round.
pub fn write_trace(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    let id = run_id(record.mode.as_str(), record.learner.as_str(), record.horizon, record.seed);
    let mut cum = 0.0;
    let rows = record.rewards.iter().zip(&record.query_counts).enumerate().map(|(t, (&r, &q))| {
        cum += r;
        TraceRow { t: t + 1, reward: r, cum_reward: cum, query_count: q }
    });
    let path = dir.join(format!("trace_{id}.csv"));
    write_atomic(&path, &csv_bytes(rows)?)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    run_id: &'a str,
    mode: &'a str,
    learner: &'a str,
    horizon: usize,
    seed: u64,
    config_hash: &'a str,
    static_regret: f64,
    static_certificate: f64,
    linear_regret: f64,
    play_overhead: f64,
    shrink_overhead: f64,
    adaptive_regret: f64,
    adaptive_certificate: f64,
    dynamic_regret: f64,
    dynamic_linear_regret: f64,
    dynamic_certificate: f64,
    path_length_pt: f64,
    benchmark_value: f64,
    benchmark_error_bound: f64,
    total_reward: f64,
    total_queries: u64,
}

/// `report_<runid>.csv`: the run's metrics in a single row.
pub fn write_report(dir: &Path, record: &RunRecord, report: &RegretReport, config_hash: &str) -> Result<PathBuf> {
    let id = run_id(record.mode.as_str(), record.learner.as_str(), record.horizon, record.seed);
    let row = ReportRow {
        run_id: &id,
        mode: record.mode.as_str(),
        learner: record.learner.as_str(),
        horizon: record.horizon,
        seed: record.seed,
        config_hash,
        static_regret: report.static_regret,
        static_certificate: report.static_certificate,
        linear_regret: report.linear_regret,
        play_overhead: report.play_overhead,
        shrink_overhead: report.shrink_overhead,
        adaptive_regret: report.adaptive_regret,
        adaptive_certificate: report.adaptive_certificate,
        dynamic_regret: report.dynamic_regret,
        dynamic_linear_regret: report.dynamic_linear_regret,
        dynamic_certificate: report.dynamic_certificate,
        path_length_pt: report.path_length_pt,
        benchmark_value: report.benchmark_value,
        benchmark_error_bound: report.benchmark_error_bound,
        total_reward: report.total_reward,
        total_queries: report.total_queries,
    };
    let path = dir.join(format!("report_{id}.csv"));
    write_atomic(&path, &csv_bytes([row])?)?;
    Ok(path)
}

/// One line of `slopes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub mode: String,
    pub learner: String,
    pub slope: f64,
    pub r2: f64,
    /// Horizons joined by `;`.
    pub horizons: String,
    pub seeds: usize,
    pub metric: String,
    pub target: f64,
}

pub const SLOPES_HEADER: &str = "mode,learner,slope,r2,horizons,seeds,metric,target";

/// `slopes.csv`; the header is written even when no fit was possible.
pub fn write_slopes(dir: &Path, rows: &[SlopeRow]) -> Result<PathBuf> {
    let path = dir.join("slopes.csv");
    let bytes = if rows.is_empty() { format!("{SLOPES_HEADER}\n").into_bytes() } else { csv_bytes(rows)? };
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// `summary_<mode>_<learner>.csv`: seed-averaged metrics per horizon.
pub fn write_summary(dir: &Path, mode: &str, learner: &str, rows: &[HorizonSummary]) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Row {
        horizon: usize,
        seeds: usize,
        static_regret: f64,
        static_regret_sd: f64,
        static_certificate: f64,
        static_certificate_sd: f64,
        adaptive_regret: f64,
        adaptive_certificate: f64,
        dynamic_regret: f64,
        dynamic_certificate: f64,
        path_length_pt: f64,
    }
    let out = rows.iter().map(|s| Row {
        horizon: s.horizon,
        seeds: s.seeds,
        static_regret: s.static_regret,
        static_regret_sd: s.static_regret_sd,
        static_certificate: s.static_certificate,
        static_certificate_sd: s.static_certificate_sd,
        adaptive_regret: s.adaptive_regret,
        adaptive_certificate: s.adaptive_certificate,
        dynamic_regret: s.dynamic_regret,
        dynamic_certificate: s.dynamic_certificate,
        path_length_pt: s.path_length_pt,
    });
    let path = dir.join(format!("summary_{mode}_{learner}.csv"));
    write_atomic(&path, &csv_bytes(out)?)?;
    Ok(path)
}

/// A labelled series of `(T, value)` points for the log-log plot.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders positive points on log-log axes as a standalone SVG.
pub fn loglog_svg(title: &str, series: &[PlotSeries]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (0.0, 1.0, 0.0, 1.0);
    if !pts.is_empty() {
        x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    }
    let span = |a: f64, b: f64| if b - a > 1e-12 { b - a } else { 1.0 };
    let sx = |x: f64| m + (x - x0) / span(x0, x1) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / span(y0, y1) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" stroke="black" fill="none"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log10 T</text>"#, w / 2.0, h - 20.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" font-size="12" transform="rotate(-90 16 {})">log10 value</text>"#, h / 2.0, h / 2.0);
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = ser
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x.log10()), sy(y.log10())))
            .collect();
        if !coords.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none"/>"#, coords.join(" "));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            w - m - 150.0,
            m + 16.0 * k as f64,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_plot(path: &Path, title: &str, series: &[PlotSeries]) -> Result<()> {
    write_atomic(path, loglog_svg(title, series).as_bytes())
}
