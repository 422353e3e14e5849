use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gp::Dataset;

/// Reads `x0,...,x{d-1},y`. `expected_dim` pins `d` when given.
pub fn read_dataset<R: Read>(r: R, expected_dim: Option<usize>) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers: Vec<String> = csv
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let d = headers.len().saturating_sub(1);
    let expected: Vec<String> = (0..d)
        .map(|k| format!("x{k}"))
        .chain(["y".to_string()])
        .collect();
    if headers.len() < 2 || headers != expected {
        return Err(Error::Schema(format!(
            "expected header x0,...,x{{d-1}},y, got {}",
            headers.join(",")
        )));
    }
    if let Some(e) = expected_dim.filter(|&e| e != d) {
        return Err(Error::Schema(format!(
            "expected {e} feature columns, found {d}"
        )));
    }
    let mut coords = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in csv.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Schema(format!("line {line}: {e}")))?;
        if rec.len() != d + 1 {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields, got {}",
                d + 1,
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .map(|f| {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Schema(format!("line {line}: cannot parse `{f}`")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Schema(format!(
                        "line {line}: non-finite value `{f}`"
                    )))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        y.push(vals[d]);
        coords.push(vals[..d].to_vec());
    }
    if y.is_empty() {
        return Err(Error::input("dataset file has no rows"));
    }
    Dataset::new(coords, y)
}

pub fn load_csv(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let f =
        std::fs::File::open(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    read_dataset(f, expected_dim)
}

pub fn write_dataset<W: Write>(data: &Dataset, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..data.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    csv.write_record(&header)?;
    for (p, y) in data.points().iter().zip(data.y()) {
        let mut rec: Vec<String> = p.coords.iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{y:?}"));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}
