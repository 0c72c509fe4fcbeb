use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, MiniGesture, Sample, SampleStream};

const REQUIRED_COLUMNS: [&str; 4] = ["t", "x", "y", "z"];

/// Reads one sample stream from CSV with header `t,x,y,z[,label]`.
///
/// Empty label cells are allowed and yield unlabeled samples. Timestamps must
/// strictly increase.
pub fn ingest_reader<R: Read>(reader: R, name: &str) -> Result<SampleStream, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_label = match names.as_slice() {
        [t, x, y, z] if [*t, *x, *y, *z] == REQUIRED_COLUMNS => false,
        [t, x, y, z, "label"] if [*t, *x, *y, *z] == REQUIRED_COLUMNS => true,
        _ => {
            return Err(DataError::Parse {
                line: 1,
                message: format!("expected header `t,x,y,z[,label]`, found `{}`", names.join(",")),
            })
        }
    };
    let width = headers.len();

    let mut samples = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(DataError::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let num = |i: usize| -> Result<f64, DataError> {
            let cell = &record[i];
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                line,
                message: format!("column `{}`: `{cell}` is not a number", REQUIRED_COLUMNS[i]),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line,
                    message: format!("column `{}` is not finite", REQUIRED_COLUMNS[i]),
                });
            }
            Ok(v)
        };
        let t = num(0)?;
        if t <= prev_t {
            return Err(DataError::NonMonotonic { line, prev: prev_t, t });
        }
        prev_t = t;
        let label = if has_label && !record[4].is_empty() {
            Some(record[4].parse::<MiniGesture>().map_err(|_| DataError::Parse {
                line,
                message: format!("invalid label `{}`", &record[4]),
            })?)
        } else {
            None
        };
        samples.push(Sample {
            t,
            ax: num(1)?,
            ay: num(2)?,
            az: num(3)?,
            label,
        });
    }
    Ok(SampleStream::new(name, samples))
}

pub fn ingest_path(path: impl AsRef<Path>) -> Result<SampleStream, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ingest_reader(BufReader::new(file), &name)
}

/// Writes a stream in the ingest format. Floats use the shortest
/// representation that parses back to the same bits.
pub fn export_stream<W: Write>(writer: W, stream: &SampleStream) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["t", "x", "y", "z", "label"])?;
    for s in &stream.samples {
        let label = s.label.map(|l| l.to_string()).unwrap_or_default();
        wtr.write_record([
            s.t.to_string(),
            s.ax.to_string(),
            s.ay.to_string(),
            s.az.to_string(),
            label,
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn export_stream_path(path: impl AsRef<Path>, stream: &SampleStream) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    export_stream(BufWriter::new(file), stream)
}
