// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

use super::Matrix;

/// One subject's `T × K` matrix of per-time-point profiles.
///
/// Rows are time points, columns are channels.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeCourses {
    subject_id: String,
    data: Matrix,
}

impl TimeCourses {
    pub fn new(subject_id: impl Into<String>, data: Matrix) -> Result<Self> {
        if data.rows() < 2 || data.cols() < 1 {
            return Err(invalid(format!(
                "time courses need at least 2 time points and 1 channel, got {}x{}",
                data.rows(),
                data.cols()
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            data,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of channels `K`.
    pub fn channels(&self) -> usize {
        self.data.cols()
    }

    /// Profile at 0-based row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    /// Parses CSV text: an optional header row, then `T` rows of `K`
    /// comma-separated decimals.
    ///
    /// The first record is treated as a header when any of its fields fails
    /// to parse as a number.
    pub fn from_csv_reader<R: Read>(subject_id: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(None)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("csv: {e}")))?;
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => {
                    width = Some(record.len());
                    continue;
                }
                Err(e) => {
                    return Err(Error::Parse(format!("line {}: {e}", line + 1)));
                }
            };
            if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse(format!(
                    "line {}, column {}: non-finite value",
                    line + 1,
                    bad + 1
                )));
            }
            match width {
                Some(w) if w != values.len() => {
                    return Err(Error::Parse(format!(
                        "line {} has {} columns, expected {w}",
                        line + 1,
                        values.len()
                    )));
                }
                _ => width = Some(values.len()),
            }
            rows.push(values);
        }
        let data = Matrix::from_rows(&rows).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(subject_id, data).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv_str(subject_id: impl Into<String>, text: &str) -> Result<Self> {
        Self::from_csv_reader(subject_id, text.as_bytes())
    }

    pub fn read_csv(subject_id: impl Into<String>, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(subject_id, std::io::BufReader::new(file))
    }

    /// Writes a header `ch1,…,chK` followed by one row per time point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.channels()).map(|k| format!("ch{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.data.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_header() {
        let a = TimeCourses::from_csv_str("a", "x,y\n1,2\n3.5,-4e-1\n").unwrap();
        let b = TimeCourses::from_csv_str("b", "1,2\n3.5,-0.4").unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(a.len(), 2);
        assert_eq!(a.channels(), 2);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            TimeCourses::from_csv_str("s", "1,2\n3\n"),
            Err(Error::Parse(_))
        ));
        assert!(TimeCourses::from_csv_str("s", "1,2\n3,abc\n").is_err());
        assert!(TimeCourses::from_csv_str("s", "1,2\nNaN,3\n").is_err());
        assert!(TimeCourses::from_csv_str("s", "1,inf\n2,3\n").is_err());
        // Single time point is not a sequence.
        assert!(TimeCourses::from_csv_str("s", "a,b\n1,2\n").is_err());
        assert!(TimeCourses::from_csv_str("s", "").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Matrix::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-17, 1e300]]).unwrap();
        let tc = TimeCourses::new("s", m).unwrap();
        let back = TimeCourses::from_csv_str("s", &tc.to_csv_string()).unwrap();
        assert_eq!(back, tc);
    }
}
