//! Temperature CSV ingest, month-by-block slicing, and histogram files.
//!
//! Input rows are `date,avg_temp,ci95` with dates `YYYY-MM-DD` (the day is
//! ignored). Histogram files hold normalised weights as
//! `value,log_weight,weight`, preceded in CSV by one `# ` line carrying the
//! run metadata as a JSON object.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Histogram;
use crate::logweight::LogWeight;
use crate::models::{MonthObservations, BLOCKS};

/// First year kept by the loader and first year of block 1.
pub const FIRST_YEAR: i32 = 1756;
/// Last year kept by the loader.
pub const LAST_YEAR: i32 = 2016;
pub const BLOCK_YEARS: i32 = 20;
/// Last year covered by the thirteen blocks.
pub const LAST_BLOCK_YEAR: i32 = FIRST_YEAR + BLOCKS as i32 * BLOCK_YEARS - 1;

/// Published half-width of a 95% interval over the standard deviation.
const CI95_WIDTH: f64 = 3.92;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonthlyRecord {
    pub year: i32,
    pub month: u32,
    pub avg_temp: f64,
    pub ci95: f64,
}

/// One calendar month across the thirteen blocks; each block holds
/// `(temperature, std)` pairs in year order.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSeries {
    pub month: u32,
    pub blocks: Vec<Vec<(f64, f64)>>,
}

impl BlockSeries {
    pub fn observations(&self) -> MonthObservations {
        MonthObservations {
            ys: self.blocks.iter().map(|b| b.iter().map(|p| p.0).collect()).collect(),
            vs: self.blocks.iter().map(|b| b.iter().map(|p| p.1).collect()).collect(),
        }
    }
}

pub fn ci95_to_std(ci95: f64) -> Result<f64> {
    if ci95 > 0.0 && ci95.is_finite() {
        Ok(ci95 / CI95_WIDTH)
    } else {
        Err(Error::InvalidScale(ci95))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

fn parse_date(field: &str) -> Option<(i32, u32)> {
    let mut parts = field.split('-');
    let (y, m, d) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || y.len() != 4 || m.len() != 2 || d.len() != 2 {
        return None;
    }
    let year: i32 = y.parse().ok()?;
    let month: u32 = m.parse().ok()?;
    let day: u32 = d.parse().ok()?;
    ((1..=12).contains(&month) && (1..=31).contains(&day)).then_some((year, month))
}

fn parse_number(path: &Path, line: usize, name: &str, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| parse_error(path, line, format!("{name} is not a number: {field:?}")))
}

/// Records read from a temperature file, plus how many rows fell outside
/// the kept years.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureData {
    pub records: Vec<MonthlyRecord>,
    pub dropped: usize,
}

/// Reads a `date,avg_temp,ci95` file. Dates must strictly increase; rows
/// outside [`FIRST_YEAR`]..=[`LAST_YEAR`] are dropped and counted.
pub fn read_temperature_csv(path: &Path) -> Result<TemperatureData> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["date", "avg_temp", "ci95"] {
        return Err(parse_error(path, 1, "expected header date,avg_temp,ci95"));
    }
    let mut records = Vec::new();
    let mut dropped = 0;
    let mut previous: Option<(i32, u32)> = None;
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 3 {
            return Err(parse_error(
                path,
                line,
                format!("expected 3 fields, found {}", row.len()),
            ));
        }
        let (year, month) =
            parse_date(&row[0]).ok_or_else(|| parse_error(path, line, format!("bad date {:?}", &row[0])))?;
        let avg_temp = parse_number(path, line, "avg_temp", &row[1])?;
        let ci95 = parse_number(path, line, "ci95", &row[2])?;
        if !(ci95 > 0.0) {
            return Err(parse_error(path, line, format!("ci95 must be positive, got {ci95}")));
        }
        if previous.is_some_and(|p| p >= (year, month)) {
            return Err(Error::NonMonotoneDates {
                path: path.to_path_buf(),
                line,
            });
        }
        previous = Some((year, month));
        if (FIRST_YEAR..=LAST_YEAR).contains(&year) {
            records.push(MonthlyRecord {
                year,
                month,
                avg_temp,
                ci95,
            });
        } else {
            dropped += 1;
        }
    }
    Ok(TemperatureData { records, dropped })
}

/// [`read_temperature_csv`], logging a warning for dropped rows.
pub fn load_temperature_csv(path: &Path) -> Result<Vec<MonthlyRecord>> {
    let data = read_temperature_csv(path)?;
    if data.dropped > 0 {
        log::warn!(
            "{}: dropped {} rows outside {FIRST_YEAR}-{LAST_YEAR}",
            path.display(),
            data.dropped
        );
    }
    Ok(data.records)
}

/// Twelve month series of thirteen 20-year blocks starting in
/// [`FIRST_YEAR`]; block 1 is 1756-1775. Records after [`LAST_BLOCK_YEAR`]
/// are not used. Every (year, month) in the covered span must be present.
pub fn slice_blocks(records: &[MonthlyRecord]) -> Result<Vec<BlockSeries>> {
    let years = (LAST_BLOCK_YEAR - FIRST_YEAR + 1) as usize;
    let mut grid: Vec<[Option<(f64, f64)>; 12]> = vec![[None; 12]; years];
    for r in records {
        if !(FIRST_YEAR..=LAST_BLOCK_YEAR).contains(&r.year) || !(1..=12).contains(&r.month) {
            continue;
        }
        grid[(r.year - FIRST_YEAR) as usize][(r.month - 1) as usize] = Some((r.avg_temp, ci95_to_std(r.ci95)?));
    }
    let missing: Vec<(i32, u32)> = grid
        .iter()
        .enumerate()
        .flat_map(|(y, months)| {
            months
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_none())
                .map(move |(m, _)| (FIRST_YEAR + y as i32, m as u32 + 1))
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::CoverageGap(missing));
    }
    Ok((1..=12u32)
        .map(|month| BlockSeries {
            month,
            blocks: grid
                .chunks(BLOCK_YEARS as usize)
                .map(|block| {
                    block
                        .iter()
                        .map(|m| m[(month - 1) as usize].expect("checked"))
                        .collect()
                })
                .collect(),
        })
        .collect())
}

/// Loads `path` and returns the block observations of `month` (1 to 12).
pub fn month_observations(path: &Path, month: u32) -> Result<MonthObservations> {
    if !(1..=12).contains(&month) {
        return Err(Error::Config(format!("month must be in 1..=12, got {month}")));
    }
    let series = slice_blocks(&load_temperature_csv(path)?)?;
    Ok(series[(month - 1) as usize].observations())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Run description written alongside a histogram.
pub type Metadata = BTreeMap<String, String>;

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    value: f64,
    /// `null` for a zero weight.
    log_weight: Option<f64>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonHistogram {
    metadata: Metadata,
    entries: Vec<JsonEntry>,
}

/// Writes `h` normalised, one row per entry.
pub fn write_histogram(h: &Histogram<f64>, path: &Path, format: Format, metadata: &Metadata) -> Result<()> {
    let normalised = h.clone().normalise()?;
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => {
            let meta = serde_json::to_string(metadata).map_err(|e| Error::Config(e.to_string()))?;
            writeln!(out, "# {meta}").map_err(|e| io_error(path, e))?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["value", "log_weight", "weight"])
                .map_err(|e| csv_error(path, e))?;
            for (lw, v) in normalised.iter() {
                w.write_record([v.to_string(), lw.log_value().to_string(), lw.to_prob().to_string()])
                    .map_err(|e| csv_error(path, e))?;
            }
            w.flush().map_err(|e| io_error(path, e))?;
        }
        Format::Json => {
            let doc = JsonHistogram {
                metadata: metadata.clone(),
                entries: normalised
                    .iter()
                    .map(|(lw, v)| JsonEntry {
                        value: *v,
                        log_weight: (!lw.is_zero()).then(|| lw.log_value()),
                        weight: lw.to_prob(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &doc).map_err(|e| io_error(path, e.into()))?;
            writeln!(out).map_err(|e| io_error(path, e))?;
        }
    }
    out.flush().map_err(|e| io_error(path, e))
}

/// Reads a file written by [`write_histogram`].
pub fn read_histogram(path: &Path, format: Format) -> Result<(Metadata, Histogram<f64>)> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = BufReader::new(file);
    match format {
        Format::Json => {
            let doc: JsonHistogram =
                serde_json::from_reader(reader).map_err(|e| parse_error(path, e.line(), e.to_string()))?;
            let h = doc
                .entries
                .into_iter()
                .map(|e| {
                    let lw = match e.log_weight {
                        Some(l) => LogWeight::try_from_log(l)?,
                        None => LogWeight::ZERO,
                    };
                    Ok((lw, e.value))
                })
                .collect::<Result<Histogram<f64>>>()?;
            Ok((doc.metadata, h))
        }
        Format::Csv => {
            let mut first = String::new();
            reader.read_line(&mut first).map_err(|e| io_error(path, e))?;
            let meta_text = first
                .strip_prefix("# ")
                .ok_or_else(|| parse_error(path, 1, "missing metadata line"))?;
            let metadata: Metadata =
                serde_json::from_str(meta_text.trim_end()).map_err(|e| parse_error(path, 1, e.to_string()))?;
            let mut rows = csv::Reader::from_reader(reader);
            let header = rows.headers().map_err(|e| csv_error(path, e))?.clone();
            if header.iter().collect::<Vec<_>>() != ["value", "log_weight", "weight"] {
                return Err(parse_error(path, 2, "expected header value,log_weight,weight"));
            }
            let mut h = Histogram::new();
            for row in rows.records() {
                let row = row.map_err(|e| csv_error(path, e))?;
                // Lines are counted from the header, which sits below the
                // metadata line.
                let line = row.position().map_or(0, |p| p.line() as usize + 1);
                let value: f64 = row[0].parse().map_err(|_| parse_error(path, line, "bad value"))?;
                let log: f64 = row[1].parse().map_err(|_| parse_error(path, line, "bad log_weight"))?;
                h.push(LogWeight::try_from_log(log)?, value);
            }
            Ok((metadata, h))
        }
    }
}

/// `base` with `-block-NN` inserted before its extension.
pub fn block_path(base: &Path, block: usize) -> PathBuf {
    suffixed_path(base, &format!("block-{block:02}"))
}

/// `base` with `-suffix` inserted before its extension.
pub fn suffixed_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    base.with_file_name(name)
}
