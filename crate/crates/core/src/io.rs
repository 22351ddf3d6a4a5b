//! Subgroup CSV files (`sample,obs_index,x,y`, one row per observation) and
//! number formatting for emitted tables.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::PhaseISeries;

pub const SUBGROUP_HEADER: [&str; 4] = ["sample", "obs_index", "x", "y"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ObservationRecord {
    sample: u64,
    obs_index: u64,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgroup {
    pub sample: u64,
    pub observations: Vec<[f64; 2]>,
}

impl Subgroup {
    pub fn means(&self) -> (f64, f64) {
        let n = self.observations.len() as f64;
        let (sx, sy) = self.observations.iter().fold((0.0, 0.0), |(a, b), o| (a + o[0], b + o[1]));
        (sx / n, sy / n)
    }
}

/// Subgroups of equal size in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupData {
    subgroups: Vec<Subgroup>,
}

impl SubgroupData {
    pub fn new(subgroups: Vec<Subgroup>) -> Result<Self> {
        let Some(first) = subgroups.first() else {
            return Err(Error::Data("no subgroups".into()));
        };
        let n = first.observations.len();
        if n == 0 {
            return Err(Error::Data(format!("sample {} is empty", first.sample)));
        }
        for g in &subgroups {
            if g.observations.len() != n {
                return Err(Error::Data(format!(
                    "sample {} has {} observations, expected {n}",
                    g.sample,
                    g.observations.len()
                )));
            }
        }
        Ok(Self { subgroups })
    }

    pub fn subgroups(&self) -> &[Subgroup] {
        &self.subgroups
    }

    pub fn subgroup_size(&self) -> usize {
        self.subgroups[0].observations.len()
    }

    /// All observations concatenated, for estimation.
    pub fn to_series(&self) -> Result<PhaseISeries> {
        PhaseISeries::new(self.subgroups.iter().flat_map(|g| g.observations.iter().copied()).collect())
    }
}

/// Reads subgroup data. Lines starting with `#` are comments. Rows of one
/// sample must be contiguous with `obs_index` running 1, 2, ….
pub fn read_subgroups<R: Read>(reader: R) -> Result<SubgroupData> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != SUBGROUP_HEADER {
        return Err(Error::Data(format!(
            "expected header `{}`, got `{}`",
            SUBGROUP_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut subgroups: Vec<Subgroup> = Vec::new();
    for (i, rec) in rdr.deserialize::<ObservationRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        if !rec.x.is_finite() || !rec.y.is_finite() {
            return Err(Error::Data(format!("row {}: non-finite value", i + 1)));
        }
        match subgroups.last_mut() {
            Some(g) if g.sample == rec.sample => {
                if rec.obs_index != g.observations.len() as u64 + 1 {
                    return Err(Error::Data(format!(
                        "sample {}: obs_index {} out of order",
                        rec.sample, rec.obs_index
                    )));
                }
                g.observations.push([rec.x, rec.y]);
            }
            _ => {
                if subgroups.iter().any(|g| g.sample == rec.sample) {
                    return Err(Error::Data(format!("sample {} is not contiguous", rec.sample)));
                }
                if rec.obs_index != 1 {
                    return Err(Error::Data(format!("sample {} does not start at obs_index 1", rec.sample)));
                }
                subgroups.push(Subgroup { sample: rec.sample, observations: vec![[rec.x, rec.y]] });
            }
        }
    }
    SubgroupData::new(subgroups)
}

pub fn read_subgroups_path(path: impl AsRef<Path>) -> Result<SubgroupData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_subgroups(file)
}

/// Writes subgroup data. Values use the shortest representation that
/// parses back to the same `f64`, so a write/read cycle is lossless.
pub fn write_subgroups<W: Write>(writer: W, data: &SubgroupData, preamble: &[String]) -> Result<()> {
    let mut w = writer;
    for line in preamble {
        writeln!(w, "# {line}").map_err(|e| Error::Data(e.to_string()))?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SUBGROUP_HEADER).map_err(|e| Error::Data(e.to_string()))?;
    for g in &data.subgroups {
        for (j, o) in g.observations.iter().enumerate() {
            wtr.write_record([g.sample.to_string(), (j + 1).to_string(), format!("{:?}", o[0]), format!("{:?}", o[1])])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    wtr.flush().map_err(|e| Error::Data(e.to_string()))
}

/// Formats with at least seven significant digits, and never fewer than the
/// shortest round-trip representation needs.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let shortest = format!("{v:?}");
    if v != 0.0 && significant_digits(&shortest) >= 7 {
        return shortest;
    }
    if v == 0.0 {
        return "0.000000".into();
    }
    if shortest.contains('e') {
        return format!("{v:.6e}");
    }
    let decimals = (6 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn significant_digits(s: &str) -> usize {
    let mantissa = s.split('e').next().unwrap_or(s);
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let trimmed = digits.trim_start_matches('0');
    let trimmed = if mantissa.contains('.') { trimmed } else { trimmed.trim_end_matches('0') };
    trimmed.len()
}
