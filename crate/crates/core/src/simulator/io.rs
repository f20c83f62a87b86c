//! Stream CSV (`sample,bus_<id>,...`), ground-truth sidecar, and initial
//! state files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StreamRecord;
use crate::error::{Error, Result};
use crate::network::{BranchId, BusId, NetworkCase};

/// Ground truth written next to a simulated stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub outage_sample: Option<u64>,
    pub scenario: Option<usize>,
    pub seed: u64,
    /// Lines removed by `scenario`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<BranchId>,
}

pub fn write_truth(path: impl AsRef<Path>, truth: &Truth) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(file, truth)?;
    Ok(())
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Truth> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn column_name(id: BusId) -> String {
    format!("bus_{id}")
}

pub fn write_stream_csv<'r, W: Write>(
    writer: W,
    bus_ids: &[BusId],
    records: impl IntoIterator<Item = &'r StreamRecord>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["sample".to_string()];
    header.extend(bus_ids.iter().map(|&id| column_name(id)));
    out.write_record(&header)?;
    for record in records {
        if record.angles.len() != bus_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: bus_ids.len(),
                found: record.angles.len(),
            });
        }
        let mut row = vec![record.sample_index.to_string()];
        row.extend(record.angles.iter().map(|a| format!("{a:e}")));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("stream", e))?;
    Ok(())
}

/// One parsed CSV row, angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub sample_index: u64,
    pub angles: Vec<f64>,
}

/// Row-by-row reader whose header must name exactly `expected` buses, in
/// order.
pub struct CsvStream<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    width: usize,
    scale: f64,
    line: u64,
}

impl<R: Read> CsvStream<R> {
    pub fn new(reader: R, expected: &[BusId], degrees: bool) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = inner.headers()?.clone();
        let found: Vec<&str> = header.iter().collect();
        let wanted: Vec<String> = std::iter::once("sample".to_string())
            .chain(expected.iter().map(|&id| column_name(id)))
            .collect();
        if found != wanted {
            return Err(Error::Stream(format!(
                "header {:?} does not match the placement (expected {:?})",
                found.join(","),
                wanted.join(",")
            )));
        }
        Ok(Self {
            records: inner.into_records(),
            width: wanted.len(),
            scale: if degrees { std::f64::consts::PI / 180.0 } else { 1.0 },
            line: 1,
        })
    }
}

impl<R: Read> Iterator for CsvStream<R> {
    type Item = Result<StreamSample>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = self.records.next()?;
        self.line += 1;
        let line = self.line;
        Some(record.map_err(Error::from).and_then(|r| {
            if r.len() != self.width {
                return Err(Error::Stream(format!(
                    "line {line}: {} fields, expected {}",
                    r.len(),
                    self.width
                )));
            }
            let sample_index = r[0]
                .parse::<u64>()
                .map_err(|_| Error::Stream(format!("line {line}: bad sample index {:?}", &r[0])))?;
            let angles = r
                .iter()
                .skip(1)
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(|x| x * self.scale)
                        .ok_or_else(|| Error::Stream(format!("line {line}: bad angle {f:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StreamSample { sample_index, angles })
        }))
    }
}

#[derive(Debug, Deserialize)]
struct InitialRow {
    bus: BusId,
    angle: f64,
}

/// `θ_0` from a `bus,angle` CSV covering every bus, re-referenced so the
/// reference bus sits at 0.
pub fn read_initial_angles(path: impl AsRef<Path>, case: &NetworkCase, degrees: bool) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let scale = if degrees { std::f64::consts::PI / 180.0 } else { 1.0 };
    let mut angles = vec![None; case.n_buses()];
    for row in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file).deserialize() {
        let row: InitialRow = row?;
        let idx = case
            .bus_index(row.bus)
            .ok_or_else(|| Error::MalformedCase(format!("initial state names unknown bus {}", row.bus)))?;
        if angles[idx].replace(row.angle * scale).is_some() {
            return Err(Error::DuplicateBus(row.bus));
        }
    }
    let angles = angles
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            a.ok_or_else(|| Error::MalformedCase(format!("initial state lacks bus {}", case.buses()[i].id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let reference = angles[case.reference_index()];
    Ok(angles.into_iter().map(|a| a - reference).collect())
}
