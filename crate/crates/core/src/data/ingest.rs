use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Utc};

use super::series::{format_timestamp, parse_timestamp, Freq, TimeSeries};
use super::{DataError, FillPolicy};

/// One long-format observation. `value: None` marks an explicitly missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series_id: String,
    pub timestamp: DateTime<Utc>,
    pub value: Option<f64>,
}

impl Row {
    pub fn new(series_id: impl Into<String>, timestamp: DateTime<Utc>, value: f64) -> Self {
        Self {
            series_id: series_id.into(),
            timestamp,
            value: Some(value),
        }
    }
}

/// Groups long-format rows into one [`TimeSeries`] per id (sorted by id),
/// inserting grid gaps and filling them per `fill`.
pub fn ingest(rows: &[Row], freq: Freq, fill: FillPolicy) -> Result<Vec<TimeSeries>, DataError> {
    if rows.is_empty() {
        return Err(DataError::EmptySeries(String::new()));
    }
    let mut groups: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.series_id.as_str()).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|(id, mut group)| {
            group.sort_by_key(|r| r.timestamp);
            for pair in group.windows(2) {
                if pair[0].timestamp == pair[1].timestamp {
                    return Err(DataError::DuplicateTimestamp {
                        series_id: id.to_string(),
                        timestamp: format_timestamp(pair[0].timestamp, freq),
                    });
                }
            }
            let start = group[0].timestamp;
            let slots = place_on_grid(id, &group, start, freq)?;
            let values = fill_gaps(id, slots, fill)?;
            TimeSeries::new(id, start, freq, values)
        })
        .collect()
}

fn place_on_grid(id: &str, group: &[&Row], start: DateTime<Utc>, freq: Freq) -> Result<Vec<Option<f64>>, DataError> {
    if freq == Freq::BusinessDaily {
        return Ok(group.iter().map(|r| r.value).collect());
    }
    let mut offsets = Vec::with_capacity(group.len());
    for row in group {
        let off = freq
            .grid_offset(start, row.timestamp)
            .ok_or_else(|| DataError::OffGrid {
                series_id: id.to_string(),
                timestamp: format_timestamp(row.timestamp, freq),
                freq,
            })?;
        offsets.push(off as usize);
    }
    let len = offsets.last().map_or(0, |o| o + 1);
    let mut slots = vec![None; len];
    for (row, off) in group.iter().zip(offsets) {
        slots[off] = row.value;
    }
    Ok(slots)
}

fn fill_gaps(id: &str, slots: Vec<Option<f64>>, fill: FillPolicy) -> Result<Vec<f64>, DataError> {
    let mut out = Vec::with_capacity(slots.len());
    for slot in slots {
        let v = match (slot.filter(|v| !v.is_nan()), fill) {
            (Some(v), _) => v,
            (None, FillPolicy::ZeroFill) => 0.0,
            (None, FillPolicy::ForwardFill) => match out.last() {
                Some(&prev) => prev,
                None => return Err(DataError::LeadingMissing(id.to_string())),
            },
        };
        if !v.is_finite() {
            return Err(DataError::NonFinite(id.to_string()));
        }
        out.push(v);
    }
    Ok(out)
}

/// Reads `series_id,timestamp,value` CSV and ingests it.
///
/// Empty cells and `NaN` values are treated as missing and filled.
pub fn read_csv<R: Read>(reader: R, freq: Freq, fill: FillPolicy) -> Result<Vec<TimeSeries>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::UnparseableRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let expected = ["series_id", "timestamp", "value"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(DataError::UnparseableRow {
            line: 1,
            reason: format!(
                "expected header `series_id,timestamp,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::UnparseableRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| DataError::UnparseableRow { line, reason };
        let timestamp =
            parse_timestamp(&record[1]).ok_or_else(|| bad(format!("unparseable timestamp `{}`", &record[1])))?;
        let raw = &record[2];
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| bad(format!("unparseable value `{raw}`")))?;
            if v.is_infinite() {
                return Err(bad(format!("non-finite value `{raw}`")));
            }
            Some(v)
        };
        rows.push(Row {
            series_id: record[0].to_string(),
            timestamp,
            value,
        });
    }
    ingest(&rows, freq, fill)
}

/// Writes series back out in the same long format. Values use the shortest
/// round-trip representation, so `read_csv(write_csv(x)) == x` bit for bit.
pub fn write_csv<W: Write>(writer: W, series: &[TimeSeries]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series_id", "timestamp", "value"])?;
    for s in series {
        for (i, v) in s.values().iter().enumerate() {
            w.write_record([
                s.series_id().to_string(),
                format_timestamp(s.timestamp(i), s.freq()),
                v.to_string(),
            ])?;
        }
    }
    w.flush()
}
