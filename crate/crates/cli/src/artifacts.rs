//! Output files: CSV tables, snapshot dumps, SVG plots and manifests.
//!
//! Every file is written to `<path>.partial` first and renamed once
//! complete, so an interrupted or failed stage leaves only `.partial` files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dampwave::heat_kernel::Grid;
use serde::Serialize;

use crate::CliError;

/// 8-byte magic at the start of every snapshot file.
pub const SNAPSHOT_MAGIC: [u8; 8] = *b"DWSNAP01";
pub const SNAPSHOT_HEADER: usize = 32;

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` to `path` through a `.partial` sibling.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = partial_path(path);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Shortest round-trip decimal; `inf`, `-inf` and `NaN` for non-finite values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV document with a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn save(self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.into_bytes())
    }
}

/// Reads a CSV file into a header and rows, skipping `#` comment lines.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Flat little-endian dump: magic, `u32 n`, `u32 N`, `f64 L`, `f64 t`, then
/// `Nⁿ` values.
pub fn encode_snapshot(grid: &Grid, t: f64, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER + 8 * values.len());
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&(grid.dim as u32).to_le_bytes());
    out.extend_from_slice(&(grid.points as u32).to_le_bytes());
    out.extend_from_slice(&grid.half_width.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SnapshotFile, String> {
    if bytes.len() < SNAPSHOT_HEADER || bytes[..8] != SNAPSHOT_MAGIC {
        return Err("not a snapshot file".into());
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().expect("8 bytes"));
    let (dim, points) = (u32_at(8), u32_at(12));
    let count = points.checked_pow(dim as u32).ok_or("grid size overflows")?;
    if bytes.len() != SNAPSHOT_HEADER + 8 * count {
        return Err(format!("expected {count} values, found {} bytes of data", bytes.len() - SNAPSHOT_HEADER));
    }
    let values = (0..count).map(|i| f64_at(SNAPSHOT_HEADER + 8 * i)).collect();
    Ok(SnapshotFile { dim, points, half_width: f64_at(16), t: f64_at(24), values })
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    /// draw markers instead of a line
    pub markers: bool,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal line plot: one polyline (or marker set) per series, axis box and
/// extreme tick labels.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let finite = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        w - 2.0 * m,
        h - 2.0 * m
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        h - 15.0,
        escape(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>\n",
        h / 2.0,
        h / 2.0,
        escape(y_label)
    ));
    for (v, x, anchor) in [(x0, m, "start"), (x1, w - m, "end")] {
        s.push_str(&format!("<text x=\"{x}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>\n", h - m + 15.0, tick(v)));
    }
    for (v, y) in [(y0, h - m), (y1, m + 10.0)] {
        s.push_str(&format!("<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{}</text>\n", m - 5.0, tick(v)));
    }
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = ser.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        if ser.markers {
            for (x, y) in &pts {
                s.push_str(&format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n", sx(*x), sy(*y)));
            }
        } else if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                coords.join(" ")
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            m + 10.0,
            m + 18.0 + 15.0 * k as f64,
            escape(ser.label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
    pub wall_clock_s: f64,
    pub artifacts: Vec<String>,
}

/// Reproducibility record written next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    /// SHA-256 of the configuration text (or of the argument list)
    pub config_hash: String,
    pub versions: Vec<(String, String)>,
    pub deterministic: bool,
    pub workers: usize,
    pub started_unix_s: u64,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(command: &str, config_text: &str, deterministic: bool) -> Self {
        use sha2::{Digest, Sha256};
        let hash = Sha256::digest(config_text.as_bytes());
        Self {
            command: command.into(),
            config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            versions: vec![
                ("dampwave".into(), dampwave::VERSION.into()),
                ("dampwave-cli".into(), env!("CARGO_PKG_VERSION").into()),
            ],
            deterministic,
            workers: rayon::current_num_threads(),
            started_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            stages: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_vec_pretty(self).expect("manifest serializes");
        write_file(path, &json)
    }
}
