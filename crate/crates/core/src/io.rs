//! CSV readers and writers for the pipeline's flat-file formats.

use std::collections::BTreeMap;
use std::str::FromStr;

use csv::StringRecord;

use crate::error::{Error, Result};

/// Reads a CSV whose header must equal `expected`. Returns each record with
/// its 1-based line number (the header is row 1).
pub(crate) fn read_csv(bytes: &[u8], expected: &[&str]) -> Result<Vec<(usize, StringRecord)>> {
    let records = read_raw(bytes)?;
    let Some((_, header)) = records.first() else {
        return Err(Error::Header(format!(
            "missing header, expected {:?}",
            expected.join(",")
        )));
    };
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Header(format!(
            "expected {:?}, found {:?}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::with_capacity(records.len() - 1);
    for (row, record) in records.into_iter().skip(1) {
        if record.len() != expected.len() {
            return Err(Error::csv(
                row,
                format!("expected {} fields, found {}", expected.len(), record.len()),
            ));
        }
        out.push((row, record));
    }
    Ok(out)
}

/// All records, header included, without any shape checks.
pub(crate) fn read_raw(bytes: &[u8]) -> Result<Vec<(usize, StringRecord)>> {
    let bytes = bytes.strip_prefix("\u{feff}".as_bytes()).unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(i + 1, e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        // The reader's own line count can point at skipped blank lines.
        let line = record.position().map_or(i + 1, |p| {
            let mut start = p.byte() as usize;
            while matches!(bytes.get(start), Some(b'\r' | b'\n')) {
                start += 1;
            }
            1 + bytes[..start.min(bytes.len())].iter().filter(|&&b| b == b'\n').count()
        });
        out.push((line, record));
    }
    Ok(out)
}

pub(crate) fn parse_field<T: FromStr>(value: &str, row: usize, column: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::csv(row, format!("invalid {column} value {value:?}")))
}

fn probability_map(bytes: &[u8]) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for (row, record) in read_csv(bytes, &["segment_pos", "p_male"])? {
        let pos: usize = parse_field(&record[0], row, "segment_pos")?;
        let p: f64 = parse_field(&record[1], row, "p_male")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::csv(row, format!("p_male {p} outside [0, 1]")));
        }
        if out.insert(pos, p).is_some() {
            return Err(Error::csv(row, format!("duplicate segment_pos {pos}")));
        }
    }
    Ok(out)
}

/// Per-segment probability that the voice is male (`segment_pos,p_male`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderProbs(pub BTreeMap<usize, f64>);

impl GenderProbs {
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        probability_map(bytes).map(Self)
    }

    pub fn get(&self, pos: usize) -> f64 {
        self.0.get(&pos).copied().unwrap_or(0.5)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_pos,p_male\n");
        for (pos, p) in &self.0 {
            out.push_str(&format!("{pos},{p}\n"));
        }
        out
    }
}

/// `segment_pos,name` rows in segment order.
pub fn write_predictions(names: &[String]) -> String {
    let mut out = String::from("segment_pos,name\n");
    for (pos, name) in names.iter().enumerate() {
        out.push_str(&format!("{pos},{name}\n"));
    }
    out
}

/// Reads predictions; positions must form `0..n` in any order.
pub fn read_predictions(bytes: &[u8]) -> Result<Vec<String>> {
    let mut map = BTreeMap::new();
    for (row, record) in read_csv(bytes, &["segment_pos", "name"])? {
        let pos: usize = parse_field(&record[0], row, "segment_pos")?;
        if map.insert(pos, record[1].to_string()).is_some() {
            return Err(Error::csv(row, format!("duplicate segment_pos {pos}")));
        }
    }
    if let Some((&last, _)) = map.iter().next_back() {
        if last + 1 != map.len() {
            return Err(Error::InvalidInput(format!(
                "predictions cover {} positions but the largest is {last}",
                map.len()
            )));
        }
    }
    Ok(map.into_values().collect())
}
