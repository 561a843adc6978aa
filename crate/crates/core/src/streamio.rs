//! CSV formats for sample streams and time-domain signals.
//!
//! A sample stream has the header `index,location,value,flag` with flags
//! `ok`, `lo` and `hi`. The `location` column may be left empty, or dropped
//! from the header altogether, for gridded data; it then defaults to the
//! index. Rows may come in any order.
//!
//! A declipped stream is written back row for row in the input order. Rows
//! without an estimate are reproduced from their original text, so a stream
//! without saturated samples round-trips byte for byte; estimated rows carry
//! the new value and the flag `est`.

use std::io::{Read, Write};

use crate::declip::{DeclipReport, Flag, SaturatedStream};
use crate::error::{Error, Result};
use crate::ofdm::Waveform;

#[derive(Debug, Clone, PartialEq)]
struct Row {
    index: String,
    location: Option<String>,
    value: String,
}

/// A parsed stream file that remembers its original text.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    with_location: bool,
    rows: Vec<Row>,
    /// `order[k]` is the file row holding stream sample `k`.
    order: Vec<usize>,
    stream: SaturatedStream,
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

impl StreamFile {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let with_location = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["index", "location", "value", "flag"] => true,
            ["index", "value", "flag"] => false,
            _ => {
                return Err(parse_error(
                    1,
                    format!(
                        "expected header `index,location,value,flag`, got `{}`",
                        header.join(",")
                    ),
                ))
            }
        };

        let mut rows = Vec::new();
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| rec.get(i).unwrap_or("");
            let (index, location, value, flag) = if with_location {
                (field(0), Some(field(1)), field(2), field(3))
            } else {
                (field(0), None, field(1), field(2))
            };
            let idx: u64 = index
                .parse()
                .map_err(|_| parse_error(line, format!("index `{index}` is not a nonnegative integer")))?;
            let t = match location {
                Some(l) if !l.is_empty() => l
                    .parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite())
                    .ok_or_else(|| parse_error(line, format!("location `{l}` is not a finite number")))?,
                _ => idx as f64,
            };
            let v = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, format!("value `{value}` is not a finite number")))?;
            let f: Flag = flag.parse().map_err(|e| match e {
                Error::Parse { message, .. } => parse_error(line, message),
                other => other,
            })?;
            samples.push((t, v, f, rows.len(), line));
            rows.push(Row {
                index: index.to_string(),
                location: location.map(str::to_string),
                value: value.to_string(),
            });
        }

        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = samples.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(parse_error(
                w[1].4,
                format!("location {} appears twice (also on line {})", w[1].0, w[0].4),
            ));
        }
        let order = samples.iter().map(|s| s.3).collect();
        let stream = SaturatedStream::new(
            samples.iter().map(|s| s.0).collect(),
            samples.iter().map(|s| s.1).collect(),
            samples.iter().map(|s| s.2).collect(),
        )?;
        Ok(Self {
            with_location,
            rows,
            order,
            stream,
        })
    }

    pub fn stream(&self) -> &SaturatedStream {
        &self.stream
    }

    /// Writes the file back with every estimate from `report` substituted.
    pub fn write_declipped<W: Write>(&self, report: &DeclipReport, mut w: W) -> Result<()> {
        let mut estimates: Vec<Option<f64>> = vec![None; self.rows.len()];
        for e in &report.estimates {
            let row = *self.order.get(e.index).ok_or(Error::LengthMismatch {
                expected: self.order.len(),
                got: e.index + 1,
            })?;
            estimates[row] = Some(e.value);
        }
        let flags = self.row_flags();
        if self.with_location {
            writeln!(w, "index,location,value,flag")?;
        } else {
            writeln!(w, "index,value,flag")?;
        }
        for (i, row) in self.rows.iter().enumerate() {
            let (value, flag) = match estimates[i] {
                Some(v) => (v.to_string(), "est".to_string()),
                None => (row.value.clone(), flags[i].to_string()),
            };
            match &row.location {
                Some(l) => writeln!(w, "{},{},{},{}", row.index, l, value, flag)?,
                None => writeln!(w, "{},{},{}", row.index, value, flag)?,
            }
        }
        Ok(())
    }

    fn row_flags(&self) -> Vec<Flag> {
        let mut flags = vec![Flag::Ok; self.rows.len()];
        for (k, &row) in self.order.iter().enumerate() {
            flags[row] = self.stream.flags()[k];
        }
        flags
    }
}

/// Writes a signal as `index,real,imag` rows; real signals get a zero
/// imaginary column.
pub fn write_signal_csv<W: Write>(signal: &Waveform, mut w: W) -> Result<()> {
    writeln!(w, "index,real,imag")?;
    for (i, c) in signal.to_complex().iter().enumerate() {
        writeln!(w, "{i},{},{}", c.re, c.im)?;
    }
    Ok(())
}

/// Writes a saturated stream in the sample-stream format.
pub fn write_stream_csv<W: Write>(stream: &SaturatedStream, mut w: W) -> Result<()> {
    writeln!(w, "index,location,value,flag")?;
    for i in 0..stream.len() {
        writeln!(
            w,
            "{i},{},{},{}",
            stream.locations()[i],
            stream.values()[i],
            stream.flags()[i]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::declip::{declip_stream, WindowConfig};
    use crate::kernel::BandSpec;

    #[test]
    fn unsaturated_file_round_trips_byte_for_byte() {
        let text = "index,location,value,flag\n0,0,0.1000,ok\n1,,-2e-1,ok\n2,2.5,0.30,ok\n";
        let f = StreamFile::read(text.as_bytes()).unwrap();
        assert_eq!(f.stream().locations(), &[0.0, 1.0, 2.5]);
        let r = declip_stream(f.stream(), &BandSpec::nyquist(), &WindowConfig::new(2)).unwrap();
        let mut out = Vec::new();
        f.write_declipped(&r, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn estimated_rows_are_marked() {
        let text = "index,value,flag\n0,0.5,ok\n1,1,hi\n2,0.5,ok\n3,0.25,ok\n";
        let f = StreamFile::read(text.as_bytes()).unwrap();
        let r = declip_stream(f.stream(), &BandSpec::nyquist(), &WindowConfig::new(2)).unwrap();
        let mut out = Vec::new();
        f.write_declipped(&r, &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "index,value,flag");
        assert!(lines[2].starts_with("1,") && lines[2].ends_with(",est"));
        assert_eq!(lines[3], "2,0.5,ok");
    }

    #[test]
    fn unsorted_rows_keep_their_order() {
        let text = "index,location,value,flag\n1,1,1,hi\n0,0,0.5,ok\n2,2,0.5,ok\n";
        let f = StreamFile::read(text.as_bytes()).unwrap();
        assert_eq!(f.stream().flags(), &[Flag::Ok, Flag::High, Flag::Ok]);
        let r = declip_stream(f.stream(), &BandSpec::nyquist(), &WindowConfig::new(2)).unwrap();
        let mut out = Vec::new();
        f.write_declipped(&r, &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        assert!(out.lines().nth(1).unwrap().ends_with(",est"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_flag = "index,value,flag\n0,0.5,ok\n1,1,high\n";
        match StreamFile::read(bad_flag.as_bytes()) {
            Err(Error::Parse { line: 3, message }) => assert!(message.contains("high")),
            other => panic!("{other:?}"),
        }
        let bad_value = "index,value,flag\n0,abc,ok\n";
        assert!(matches!(
            StreamFile::read(bad_value.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let dup = "index,location,value,flag\n0,1,0.5,ok\n1,1,0.5,ok\n";
        assert!(matches!(
            StreamFile::read(dup.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        let header = "i,v,f\n";
        assert!(matches!(
            StreamFile::read(header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn signal_dump_has_one_row_per_sample() {
        let mut out = Vec::new();
        write_signal_csv(&Waveform::Real(vec![1.0, -0.5]), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "index,real,imag\n0,1,0\n1,-0.5,0\n");
    }
}
