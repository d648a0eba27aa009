//! Shot records and their line-oriented persistence format.
//!
//! ```text
//! # sensorgrid dataset
//! # schema_version=1
//! # config_hash=…
//! # seed=42
//! # mode=array
//! # grid rows=15 cols=18 pitch_m=7e-6 origin_x_m=0 origin_y_m=0
//! # prep_efficiency=0.3
//! # diagnostic_truth=false
//! # units: cycle=index site_or_position=index|x_m,y_m T_seconds=s flags=0/1
//! # columns: cycle site_or_position T_seconds test_on occupied_before detected_after
//! 0 17 6.4e-5 1 1 0
//! …
//! # end records=…
//! ```
//!
//! Columns are tab separated. Probe records write their position as `x,y`
//! in meters instead of a site index.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::array::GridGeometry;
use crate::error::DatasetError;

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "# sensorgrid dataset";
const COLUMNS: &str = "cycle site_or_position T_seconds test_on occupied_before detected_after";
const TRUTH_COLUMNS: &str = " prepared final_down";

/// Where a shot was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShotSource {
    /// Array site, linear index `row·cols + col`.
    Site(u32),
    /// Index into [`DatasetMeta::probe_positions`].
    Probe(u32),
}

/// Internal state an atom was prepared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prepared {
    Up,
    Down,
    /// Left outside the measurement basis; removed at pushout.
    Dark,
}

impl Prepared {
    fn code(self) -> &'static str {
        match self {
            Prepared::Up => "up",
            Prepared::Down => "down",
            Prepared::Dark => "dark",
        }
    }

    fn parse(s: &str) -> Option<Option<Self>> {
        Some(match s {
            "up" => Some(Prepared::Up),
            "down" => Some(Prepared::Down),
            "dark" => Some(Prepared::Dark),
            "-" => None,
            _ => return None,
        })
    }
}

/// Hidden simulation truth, only emitted in diagnostic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotTruth {
    /// `None` for an empty site.
    pub prepared: Option<Prepared>,
    /// Atom ended in |↓⟩ and survived to the final image.
    pub final_down: bool,
}

/// Outcome of one site in one measurement cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub cycle: u32,
    pub source: ShotSource,
    /// Free precession time, s.
    pub t: f64,
    pub test_on: bool,
    pub occupied_before: bool,
    pub detected_after: bool,
    pub truth: Option<ShotTruth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetMode {
    Array,
    Scan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub mode: DatasetMode,
    pub grid: GridGeometry,
    pub probe_positions: Vec<[f64; 2]>,
    /// Fraction of loaded atoms that enter the Ramsey sequence.
    pub prep_efficiency: f64,
    pub diagnostic_truth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<ShotRecord>,
}

impl Dataset {
    /// Position of a record's source in the sensor plane.
    pub fn position(&self, source: ShotSource) -> [f64; 2] {
        match source {
            ShotSource::Site(s) => self.meta.grid.position_of(s as usize),
            ShotSource::Probe(i) => self.meta.probe_positions[i as usize],
        }
    }

    /// Serializes to the text format.
    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn write_to<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let m = &self.meta;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "# schema_version={}", m.schema_version)?;
        writeln!(w, "# config_hash={}", m.config_hash)?;
        writeln!(w, "# seed={}", m.seed)?;
        writeln!(
            w,
            "# mode={}",
            match m.mode {
                DatasetMode::Array => "array",
                DatasetMode::Scan => "scan",
            }
        )?;
        writeln!(
            w,
            "# grid rows={} cols={} pitch_m={:e} origin_x_m={:e} origin_y_m={:e}",
            m.grid.rows, m.grid.cols, m.grid.pitch, m.grid.origin[0], m.grid.origin[1]
        )?;
        for (i, p) in m.probe_positions.iter().enumerate() {
            writeln!(w, "# probe index={i} x_m={:e} y_m={:e}", p[0], p[1])?;
        }
        writeln!(w, "# prep_efficiency={:e}", m.prep_efficiency)?;
        writeln!(w, "# diagnostic_truth={}", m.diagnostic_truth)?;
        writeln!(
            w,
            "# units: cycle=index site_or_position=index|x_m,y_m T_seconds=s flags=0/1"
        )?;
        writeln!(
            w,
            "# columns: {COLUMNS}{}",
            if m.diagnostic_truth { TRUTH_COLUMNS } else { "" }
        )?;

        let probe_keys: Vec<String> = m
            .probe_positions
            .iter()
            .map(|p| format!("{:e},{:e}", p[0], p[1]))
            .collect();
        let mut t_cache: HashMap<u64, String> = HashMap::new();
        let mut line = String::with_capacity(64);
        for r in &self.records {
            line.clear();
            let t = t_cache
                .entry(r.t.to_bits())
                .or_insert_with(|| format!("{:e}", r.t));
            let _ = write!(line, "{}\t", r.cycle);
            match r.source {
                ShotSource::Site(s) => {
                    let _ = write!(line, "{s}");
                }
                ShotSource::Probe(i) => line.push_str(&probe_keys[i as usize]),
            }
            let _ = write!(
                line,
                "\t{t}\t{}\t{}\t{}",
                r.test_on as u8, r.occupied_before as u8, r.detected_after as u8
            );
            if m.diagnostic_truth {
                let truth = r.truth.unwrap_or(ShotTruth {
                    prepared: None,
                    final_down: false,
                });
                let _ = write!(
                    line,
                    "\t{}\t{}",
                    truth.prepared.map_or("-", Prepared::code),
                    truth.final_down as u8
                );
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        writeln!(w, "# end records={}", self.records.len())?;
        w.flush()
    }

    /// Writes via a temporary file in the same directory, then renames.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        write_atomic_with(path, |f| self.write_to(f))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        parse(r)
    }

    pub fn read_path(path: &Path) -> Result<Self, DatasetError> {
        let f = std::fs::File::open(path)?;
        parse(std::io::BufReader::new(f))
    }
}

/// Writes `path` by streaming into a sibling temporary file and renaming it.
pub fn write_atomic_with<F>(path: &Path, body: F) -> std::io::Result<()>
where
    F: FnOnce(&mut std::fs::File) -> std::io::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        body(&mut f)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn perr(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        line,
        message: message.into(),
    }
}

fn kv<'a>(s: &'a str, key: &str, line: usize) -> Result<&'a str, DatasetError> {
    s.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| perr(line, format!("missing `{key}=`")))
}

fn num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T, DatasetError> {
    s.parse()
        .map_err(|_| perr(line, format!("invalid {what} `{s}`")))
}

fn flag(s: &str, what: &str, line: usize) -> Result<bool, DatasetError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(perr(line, format!("invalid {what} flag `{s}`"))),
    }
}

fn parse<R: BufRead>(r: R) -> Result<Dataset, DatasetError> {
    let mut lines = r.lines().enumerate();
    let first = lines
        .next()
        .ok_or_else(|| DatasetError::Schema("empty file".into()))?;
    if first.1?.trim_end() != MAGIC {
        return Err(DatasetError::Schema("missing dataset magic line".into()));
    }

    let mut schema_version = None;
    let mut config_hash = String::new();
    let mut seed = 0u64;
    let mut mode = DatasetMode::Array;
    let mut grid = None;
    let mut probe_positions = Vec::new();
    let mut prep_efficiency = 1.0;
    let mut diagnostic_truth = false;
    let mut columns_seen = false;
    let mut end_count = None;
    let mut records = Vec::new();
    let mut probe_lookup: HashMap<String, u32> = HashMap::new();

    let mut last_line = 1;
    for (i, line) in lines {
        let n = i + 1;
        last_line = n;
        let line = line?;
        if let Some(h) = line.strip_prefix('#') {
            let h = h.trim();
            if end_count.is_some() {
                return Err(perr(n, "content after end marker"));
            }
            if let Some(v) = h.strip_prefix("schema_version=") {
                let v: u32 = num(v, "schema version", n)?;
                if v != SCHEMA_VERSION {
                    return Err(DatasetError::Schema(format!(
                        "schema version {v}, expected {SCHEMA_VERSION}"
                    )));
                }
                schema_version = Some(v);
            } else if let Some(v) = h.strip_prefix("config_hash=") {
                config_hash = v.to_string();
            } else if let Some(v) = h.strip_prefix("seed=") {
                seed = num(v, "seed", n)?;
            } else if let Some(v) = h.strip_prefix("mode=") {
                mode = match v {
                    "array" => DatasetMode::Array,
                    "scan" => DatasetMode::Scan,
                    _ => return Err(perr(n, format!("unknown mode `{v}`"))),
                };
            } else if let Some(v) = h.strip_prefix("grid ") {
                grid = Some(GridGeometry {
                    rows: num(kv(v, "rows", n)?, "rows", n)?,
                    cols: num(kv(v, "cols", n)?, "cols", n)?,
                    pitch: num(kv(v, "pitch_m", n)?, "pitch", n)?,
                    origin: [
                        num(kv(v, "origin_x_m", n)?, "origin x", n)?,
                        num(kv(v, "origin_y_m", n)?, "origin y", n)?,
                    ],
                });
            } else if let Some(v) = h.strip_prefix("probe ") {
                let idx: usize = num(kv(v, "index", n)?, "probe index", n)?;
                if idx != probe_positions.len() {
                    return Err(perr(n, "probe indices must be consecutive"));
                }
                let p = [
                    num(kv(v, "x_m", n)?, "probe x", n)?,
                    num(kv(v, "y_m", n)?, "probe y", n)?,
                ];
                probe_lookup.insert(format!("{:e},{:e}", p[0], p[1]), idx as u32);
                probe_positions.push(p);
            } else if let Some(v) = h.strip_prefix("prep_efficiency=") {
                prep_efficiency = num(v, "prep efficiency", n)?;
            } else if let Some(v) = h.strip_prefix("diagnostic_truth=") {
                diagnostic_truth = num(v, "diagnostic flag", n)?;
            } else if let Some(v) = h.strip_prefix("columns:") {
                let expected = format!(
                    "{COLUMNS}{}",
                    if diagnostic_truth { TRUTH_COLUMNS } else { "" }
                );
                if v.trim() != expected {
                    return Err(DatasetError::Schema(format!("unexpected columns `{}`", v.trim())));
                }
                columns_seen = true;
            } else if let Some(v) = h.strip_prefix("end records=") {
                end_count = Some(num::<usize>(v, "record count", n)?);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if end_count.is_some() {
            return Err(perr(n, "content after end marker"));
        }
        if !columns_seen || schema_version.is_none() {
            return Err(DatasetError::Schema(format!(
                "line {n}: record before the column header"
            )));
        }
        let mut f = line.split('\t');
        let mut next = |what: &str| f.next().ok_or_else(|| perr(n, format!("missing column {what}")));
        let cycle: u32 = num(next("cycle")?, "cycle", n)?;
        let src = next("site_or_position")?;
        let source = if src.contains(',') {
            ShotSource::Probe(
                *probe_lookup
                    .get(src)
                    .ok_or_else(|| perr(n, format!("unknown probe position `{src}`")))?,
            )
        } else {
            ShotSource::Site(num(src, "site", n)?)
        };
        let t: f64 = num(next("T_seconds")?, "T_seconds", n)?;
        let test_on = flag(next("test_on")?, "test_on", n)?;
        let occupied_before = flag(next("occupied_before")?, "occupied_before", n)?;
        let detected_after = flag(next("detected_after")?, "detected_after", n)?;
        let truth = if diagnostic_truth {
            let p = next("prepared")?;
            let prepared =
                Prepared::parse(p).ok_or_else(|| perr(n, format!("invalid prepared `{p}`")))?;
            let final_down = flag(next("final_down")?, "final_down", n)?;
            Some(ShotTruth {
                prepared,
                final_down,
            })
        } else {
            None
        };
        if f.next().is_some() {
            return Err(perr(n, "too many columns"));
        }
        records.push(ShotRecord {
            cycle,
            source,
            t,
            test_on,
            occupied_before,
            detected_after,
            truth,
        });
    }

    let grid = grid.ok_or_else(|| DatasetError::Schema("missing grid header".into()))?;
    if let Some(bad) = records.iter().find_map(|r| match r.source {
        ShotSource::Site(s) if s as usize >= grid.site_count() => Some(s),
        _ => None,
    }) {
        return Err(DatasetError::Schema(format!("site {bad} outside the grid")));
    }
    match end_count {
        None => Err(perr(last_line, "file truncated: missing end marker")),
        Some(c) if c != records.len() => Err(DatasetError::Schema(format!(
            "end marker announces {c} records, found {}",
            records.len()
        ))),
        Some(_) => Ok(Dataset {
            meta: DatasetMeta {
                schema_version: schema_version.unwrap_or(SCHEMA_VERSION),
                config_hash,
                seed,
                mode,
                grid,
                probe_positions,
                prep_efficiency,
                diagnostic_truth,
            },
            records,
        }),
    }
}
