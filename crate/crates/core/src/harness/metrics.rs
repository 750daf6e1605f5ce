use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "trial,episode,return,steps,recon,kl,q_loss,total_loss,epsilon";

/// One line of `metrics.csv`. Loss columns hold the mean over the episode's
/// updates and are `None` when no update happened (or the agent has no such term).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub trial: usize,
    pub episode: usize,
    pub episode_return: f64,
    pub steps: usize,
    pub recon: Option<f64>,
    pub kl: Option<f64>,
    pub q_loss: Option<f64>,
    pub total_loss: Option<f64>,
    pub epsilon: Option<f64>,
}

fn real(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        if v.is_nan() {
            out.push_str("nan");
        } else {
            write!(out, "{v:.16e}").unwrap();
        }
    }
}

fn parse_real(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("bad number `{field}` in metrics")))
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let mut s = format!("{},{}", self.trial, self.episode);
        real(&mut s, Some(self.episode_return));
        write!(s, ",{}", self.steps).unwrap();
        for v in [self.recon, self.kl, self.q_loss, self.total_loss, self.epsilon] {
            real(&mut s, v);
        }
        s
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Format(format!("expected 9 metrics fields, got {}", f.len())));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad integer `{s}` in metrics")))
        };
        Ok(MetricsRow {
            trial: int(f[0])?,
            episode: int(f[1])?,
            episode_return: parse_real(f[2])?.ok_or_else(|| Error::Format("missing return".into()))?,
            steps: int(f[3])?,
            recon: parse_real(f[4])?,
            kl: parse_real(f[5])?,
            q_loss: parse_real(f[6])?,
            total_loss: parse_real(f[7])?,
            epsilon: parse_real(f[8])?,
        })
    }
}

/// Line-buffered writer used for per-trial part files, flushed after every row.
pub struct RowWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl RowWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(RowWriter {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        let path = &self.path;
        writeln!(self.out, "{}", row.to_csv_line())
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == CSV_HEADER => {}
        Some(Err(e)) => return Err(Error::io(path, e)),
        _ => return Err(Error::Format(format!("{}: missing metrics header", path.display()))),
    }
    lines
        .map(|l| MetricsRow::parse_csv_line(&l.map_err(|e| Error::io(path, e))?))
        .collect()
}

/// Rows of a part file without header, tolerating a truncated last line.
pub(crate) fn read_part(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| MetricsRow::parse_csv_line(l).ok())
        .collect())
}

/// Groups rows by trial, each sorted by episode.
pub fn returns_by_trial(rows: &[MetricsRow]) -> Vec<Vec<f64>> {
    let trials = rows.iter().map(|r| r.trial + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); trials];
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.trial, r.episode));
    for r in sorted {
        out[r.trial].push(r.episode_return);
    }
    out
}
