//! Time-series panels: CSV ingestion, output and declustering.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extremes::{upper_ranks, Margins, SampleMatrix};

/// What to do with rows containing a missing value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NaPolicy {
    Drop,
    #[default]
    Error,
}

impl FromStr for NaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(NaPolicy::Drop),
            "error" => Ok(NaPolicy::Error),
            other => Err(Error::Parse(format!("unknown NA policy '{other}'"))),
        }
    }
}

/// A column given by header name or by 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<usize>() {
            Ok(0) => Err(Error::Parse("column positions are 1-based".into())),
            Ok(i) => Ok(ColumnRef::Index(i)),
            Err(_) => Ok(ColumnRef::Name(s.to_string())),
        }
    }
}

impl ColumnRef {
    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<usize> {
        let idx = match self {
            ColumnRef::Index(i) => *i - 1,
            ColumnRef::Name(name) => header
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| Error::Parse(format!("no column named '{name}'")))?,
        };
        if idx >= width {
            return Err(Error::Parse(format!("column {} out of range", idx + 1)));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadConfig {
    pub has_header: bool,
    pub timestamp_column: Option<ColumnRef>,
    /// Consecutive rows sharing a value in this column form one segment.
    pub segment_column: Option<ColumnRef>,
    /// Explicit segment start rows (0-based); used when no segment column is given.
    pub segment_starts: Option<Vec<usize>>,
    pub na_policy: NaPolicy,
}

/// `n x d` observations in time order, optionally split into segments.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    columns: Vec<String>,
    values: Vec<f64>,
    timestamps: Option<Vec<String>>,
    /// Start row of each segment; always begins with 0.
    segments: Vec<usize>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

fn timestamp_key(s: &str) -> (Option<f64>, &str) {
    (s.trim().parse::<f64>().ok(), s)
}

impl TimeSeriesPanel {
    pub fn new(
        columns: Vec<String>,
        values: Vec<f64>,
        timestamps: Option<Vec<String>>,
        segments: Option<Vec<usize>>,
    ) -> Result<Self> {
        let d = columns.len();
        if d == 0 || !values.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {d} columns",
                values.len()
            )));
        }
        let n = values.len() / d;
        if let Some(ts) = &timestamps {
            if ts.len() != n {
                return Err(Error::DimensionMismatch(format!("{} timestamps for {n} rows", ts.len())));
            }
        }
        let mut segments = segments.unwrap_or_default();
        if segments.first() != Some(&0) {
            segments.insert(0, 0);
        }
        if segments.windows(2).any(|w| w[0] >= w[1]) || segments.last().is_some_and(|&s| s >= n.max(1)) {
            return Err(Error::InvalidParameter(format!(
                "segment starts {segments:?} must increase within 0..{n}"
            )));
        }
        let panel = TimeSeriesPanel {
            columns,
            values,
            timestamps,
            segments,
        };
        panel.check_time_order()?;
        Ok(panel)
    }

    fn check_time_order(&self) -> Result<()> {
        let Some(ts) = &self.timestamps else {
            return Ok(());
        };
        for (start, end) in self.segment_ranges() {
            for t in start + 1..end {
                let (prev, cur) = (timestamp_key(&ts[t - 1]), timestamp_key(&ts[t]));
                let increasing = match (prev.0, cur.0) {
                    (Some(p), Some(c)) => p < c,
                    _ => prev.1 < cur.1,
                };
                if !increasing {
                    return Err(Error::InvalidParameter(format!(
                        "timestamps not increasing at row {t} ('{}' then '{}')",
                        ts[t - 1],
                        ts[t]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.d()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.d()..(t + 1) * self.d()]
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn segment_starts(&self) -> &[usize] {
        &self.segments
    }

    /// Half-open row ranges of the segments.
    pub fn segment_ranges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        self.segments
            .iter()
            .enumerate()
            .map(|(s, &start)| (start, self.segments.get(s + 1).copied().unwrap_or(n)))
            .filter(|(a, b)| a < b)
            .collect()
    }

    /// Panel restricted to `rows` (ascending); segments follow the rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<TimeSeriesPanel> {
        let mut values = Vec::with_capacity(rows.len() * self.d());
        let mut segments = Vec::new();
        let ranges = self.segment_ranges();
        let mut last_segment = None;
        for (pos, &t) in rows.iter().enumerate() {
            values.extend_from_slice(self.row(t));
            let seg = ranges.iter().position(|&(a, b)| a <= t && t < b);
            if seg != last_segment {
                segments.push(pos);
                last_segment = seg;
            }
        }
        let timestamps = self
            .timestamps
            .as_ref()
            .map(|ts| rows.iter().map(|&t| ts[t].clone()).collect());
        TimeSeriesPanel::new(self.columns.clone(), values, timestamps, Some(segments))
    }

    pub fn to_sample(&self) -> Result<SampleMatrix> {
        SampleMatrix::new(self.n(), self.d(), self.values.clone(), Margins::Raw)
    }

    pub fn from_sample(x: &SampleMatrix) -> Self {
        TimeSeriesPanel {
            columns: (1..=x.d()).map(|j| format!("X{j}")).collect(),
            values: x.values().to_vec(),
            timestamps: None,
            segments: vec![0],
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, config: &LoadConfig) -> Result<TimeSeriesPanel> {
    read_csv(std::fs::File::open(path)?, config)
}

pub fn read_csv<R: Read>(input: R, config: &LoadConfig) -> Result<TimeSeriesPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(config.has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Option<Vec<String>> = if config.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let width = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| records.first().map(csv::StringRecord::len))
        .ok_or_else(|| Error::Parse("empty input".into()))?;

    let ts_col = config
        .timestamp_column
        .as_ref()
        .map(|c| c.resolve(header.as_deref(), width))
        .transpose()?;
    let seg_col = config
        .segment_column
        .as_ref()
        .map(|c| c.resolve(header.as_deref(), width))
        .transpose()?;
    let payload: Vec<usize> = (0..width)
        .filter(|c| Some(*c) != ts_col && Some(*c) != seg_col)
        .collect();
    if payload.is_empty() {
        return Err(Error::Parse("no numeric columns".into()));
    }
    let columns = payload
        .iter()
        .map(|&c| header.as_ref().map_or_else(|| format!("X{}", c + 1), |h| h[c].clone()))
        .collect();

    let mut values = Vec::with_capacity(records.len() * payload.len());
    let mut timestamps = ts_col.map(|_| Vec::with_capacity(records.len()));
    let mut segment_labels = Vec::new();
    let mut kept_input_rows = Vec::new();
    let mut dropped = 0usize;
    'rows: for (r, rec) in records.iter().enumerate() {
        let line = r + 1 + usize::from(config.has_header);
        let mut row = Vec::with_capacity(payload.len());
        for &c in &payload {
            let cell = &rec[c];
            if is_missing(cell) {
                match config.na_policy {
                    NaPolicy::Drop => {
                        dropped += 1;
                        continue 'rows;
                    }
                    NaPolicy::Error => return Err(Error::MissingValue { row: line, column: c + 1 }),
                }
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}, column {}: '{cell}' is not numeric", c + 1)))?;
            row.push(v);
        }
        values.extend(row);
        if let (Some(ts), Some(c)) = (timestamps.as_mut(), ts_col) {
            ts.push(rec[c].to_string());
        }
        if let Some(c) = seg_col {
            segment_labels.push(rec[c].to_string());
        }
        kept_input_rows.push(r);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }

    let segments = if seg_col.is_some() {
        let mut starts = vec![0];
        for t in 1..segment_labels.len() {
            if segment_labels[t] != segment_labels[t - 1] {
                starts.push(t);
            }
        }
        Some(starts)
    } else {
        config.segment_starts.as_ref().map(|starts| {
            // Map input-row boundaries onto surviving rows.
            let mut mapped: Vec<usize> = starts
                .iter()
                .map(|&s| kept_input_rows.partition_point(|&r| r < s))
                .filter(|&s| s < kept_input_rows.len())
                .collect();
            mapped.dedup();
            mapped
        })
    };
    TimeSeriesPanel::new(columns, values, timestamps, segments)
}

/// Writes the panel with a header; a timestamp column leads when present.
pub fn write_csv<W: Write>(panel: &TimeSeriesPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::new();
    if panel.timestamps.is_some() {
        header.push("timestamp".to_string());
    }
    header.extend(panel.columns.iter().cloned());
    w.write_record(&header)?;
    for t in 0..panel.n() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(ts) = &panel.timestamps {
            rec.push(ts[t].clone());
        }
        rec.extend(panel.row(t).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Rowwise maximum of rank-standardised values within one segment.
fn magnitudes(panel: &TimeSeriesPanel, start: usize, end: usize) -> Vec<f64> {
    let d = panel.d();
    let len = end - start;
    let denom = (len + 1) as f64;
    let mut m = vec![f64::NEG_INFINITY; len];
    for c in 0..d {
        let column: Vec<f64> = (start..end).map(|t| panel.values[t * d + c]).collect();
        for (t, rank) in upper_ranks(&column).into_iter().enumerate() {
            m[t] = m[t].max((-(rank as f64 / denom).ln()).powf(-0.5));
        }
    }
    m
}

/// Maximal runs `[a, b)` of unassigned days.
fn free_runs(assigned: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (t, &a) in assigned.iter().chain(std::iter::once(&true)).enumerate() {
        match (a, start) {
            (false, None) => start = Some(t),
            (true, Some(s)) => {
                runs.push((s, t));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

/// Retained day offsets of one segment with magnitudes `m`.
pub(crate) fn decluster_segment(m: &[f64], l: usize) -> Vec<usize> {
    let mut assigned = vec![false; m.len()];
    let mut kept = Vec::new();
    loop {
        let runs: Vec<(usize, usize)> = free_runs(&assigned).into_iter().filter(|(a, b)| b - a >= l).collect();
        let mut peak: Option<(usize, (usize, usize))> = None;
        for &(a, b) in &runs {
            for t in a..b {
                if peak.is_none_or(|(p, _)| m[t] > m[p]) {
                    peak = Some((t, (a, b)));
                }
            }
        }
        let Some((t, (a, b))) = peak else { break };
        let lo = t.saturating_sub(l / 2).max(a);
        let hi = (t + l - l / 2).min(b);
        for slot in &mut assigned[lo..hi] {
            *slot = true;
        }
        kept.push(t);
    }
    kept.sort_unstable();
    kept
}

/// Keeps one day per `l`-day window around successive maxima within each segment.
pub fn decluster(panel: &TimeSeriesPanel, l: usize) -> Result<TimeSeriesPanel> {
    if l == 0 {
        return Err(Error::InvalidParameter("window width must be at least 1".into()));
    }
    let kept: Vec<Vec<usize>> = panel
        .segment_ranges()
        .into_par_iter()
        .map(|(start, end)| {
            let m = magnitudes(panel, start, end);
            decluster_segment(&m, l).into_iter().map(|t| start + t).collect()
        })
        .collect();
    panel.select_rows(&kept.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(rows: &[Vec<f64>]) -> TimeSeriesPanel {
        let d = rows[0].len();
        TimeSeriesPanel::new((1..=d).map(|j| format!("s{j}")).collect(), rows.concat(), None, None).unwrap()
    }

    #[test]
    fn loads_plain_csv() {
        let p = read_csv("1,2\n3,4\n5,6\n".as_bytes(), &LoadConfig::default()).unwrap();
        assert_eq!((p.n(), p.d()), (3, 2));
        assert_eq!(p.row(2), &[5.0, 6.0]);
    }

    #[test]
    fn header_and_timestamp() {
        let cfg = LoadConfig {
            has_header: true,
            timestamp_column: Some("date".parse().unwrap()),
            ..Default::default()
        };
        let text = "date,a,b\n2001-06-01,1,2\n2001-06-02,3,4\n";
        let p = read_csv(text.as_bytes(), &cfg).unwrap();
        assert_eq!(p.columns(), &["a", "b"]);
        assert_eq!(p.timestamps().unwrap(), &["2001-06-01", "2001-06-02"]);
        let bad = "date,a,b\n2001-06-02,1,2\n2001-06-01,3,4\n";
        assert!(read_csv(bad.as_bytes(), &cfg).is_err());
    }

    #[test]
    fn missing_values() {
        let text = "1,2\nNA,4\n5,6\n";
        let drop = LoadConfig {
            na_policy: NaPolicy::Drop,
            ..Default::default()
        };
        assert_eq!(read_csv(text.as_bytes(), &drop).unwrap().n(), 2);
        assert!(matches!(
            read_csv(text.as_bytes(), &LoadConfig::default()),
            Err(Error::MissingValue { row: 2, column: 1 })
        ));
    }

    #[test]
    fn malformed_input() {
        assert!(read_csv("1,2\n3\n".as_bytes(), &LoadConfig::default()).is_err());
        assert!(read_csv("1,x\n".as_bytes(), &LoadConfig::default()).is_err());
    }

    #[test]
    fn segments_from_column_and_starts() {
        let cfg = LoadConfig {
            has_header: true,
            segment_column: Some(ColumnRef::Index(1)),
            ..Default::default()
        };
        let p = read_csv("year,v\n1,1\n1,2\n2,3\n2,4\n2,5\n".as_bytes(), &cfg).unwrap();
        assert_eq!(p.segment_ranges(), vec![(0, 2), (2, 5)]);
        let cfg = LoadConfig {
            segment_starts: Some(vec![0, 3]),
            na_policy: NaPolicy::Drop,
            ..Default::default()
        };
        let p = read_csv("1\n2\nNA\n4\n5\n".as_bytes(), &cfg).unwrap();
        assert_eq!(p.segment_ranges(), vec![(0, 2), (2, 4)]);
    }

    #[test]
    fn csv_round_trip() {
        let p = panel(&[vec![1.5, 2.0], vec![3.0, 4.25]]);
        let mut buf = Vec::new();
        write_csv(&p, &mut buf).unwrap();
        let cfg = LoadConfig {
            has_header: true,
            ..Default::default()
        };
        let q = read_csv(buf.as_slice(), &cfg).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn unit_window_is_identity() {
        let rows: Vec<Vec<f64>> = (0..20).map(|t| vec![(t * 7 % 11) as f64, (t % 5) as f64]).collect();
        let p = panel(&rows);
        assert_eq!(decluster(&p, 1).unwrap(), p);
    }

    #[test]
    fn constant_segment_single_window() {
        let p = panel(&vec![vec![2.0, 2.0]; 9]);
        assert_eq!(decluster(&p, 9).unwrap().n(), 1);
    }

    #[test]
    fn two_spikes_retained() {
        let mut rows = vec![vec![1.0, 1.0]; 8];
        rows[1] = vec![50.0, 3.0];
        rows[5] = vec![2.0, 40.0];
        let out = decluster(&panel(&rows), 3).unwrap();
        assert_eq!(out.n(), 2);
        assert_eq!(out.row(0), &[50.0, 3.0]);
        assert_eq!(out.row(1), &[2.0, 40.0]);
    }

    #[test]
    fn windows_do_not_cross_segments() {
        let rows: Vec<Vec<f64>> = (0..12).map(|t| vec![t as f64]).collect();
        let p = TimeSeriesPanel::new(vec!["v".into()], rows.concat(), None, Some(vec![0, 6])).unwrap();
        let out = decluster(&p, 3).unwrap();
        assert_eq!(out.segment_ranges().len(), 2);
        assert!(out.n() >= 2);
    }

    #[test]
    fn segment_window_bookkeeping() {
        // Peak at 0 with l = 4: window [0, 2) after clipping.
        assert_eq!(decluster_segment(&[9.0, 1.0, 1.0, 1.0, 1.0, 1.0], 4), vec![0, 2]);
        assert!(decluster_segment(&[1.0, 2.0], 3).is_empty());
        assert!(decluster(&panel(&[vec![1.0]]), 0).is_err());
    }
}
