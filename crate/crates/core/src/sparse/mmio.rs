use std::io::{BufRead, Write};

use super::csr::CsrMatrix;
use super::triplet::{Triplet, TripletMatrix};
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

/// Writes the lower triangle of a symmetric matrix, 1-based.
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    let lower: usize = (0..a.n())
        .map(|i| a.row(i).0.iter().filter(|&&j| j <= i).count())
        .sum();
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), lower)?;
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}

/// Reads a symmetric coordinate file, mirroring off-diagonal entries.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != HEADER {
        return Err(Error::Schema(format!(
            "unexpected Matrix Market header: {header}"
        )));
    }
    let bad = |l: &str| Error::Schema(format!("malformed Matrix Market line: {l}"));
    let mut size: Option<usize> = None;
    let mut entries = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                let [r, c, _] = parts[..] else {
                    return Err(bad(t));
                };
                let r: usize = r.parse().map_err(|_| bad(t))?;
                if c.parse::<usize>().map_err(|_| bad(t))? != r {
                    return Err(bad(t));
                }
                size = Some(r);
            }
            Some(_) => {
                let [i, j, v] = parts[..] else {
                    return Err(bad(t));
                };
                let i: usize = i.parse().map_err(|_| bad(t))?;
                let j: usize = j.parse().map_err(|_| bad(t))?;
                let v: f64 = v.parse().map_err(|_| bad(t))?;
                if i == 0 || j == 0 {
                    return Err(bad(t));
                }
                entries.push(Triplet {
                    row: i - 1,
                    col: j - 1,
                    value: v,
                });
                if i != j {
                    entries.push(Triplet {
                        row: j - 1,
                        col: i - 1,
                        value: v,
                    });
                }
            }
        }
    }
    let n = size.ok_or_else(|| Error::Schema("missing Matrix Market size line".into()))?;
    TripletMatrix::from_entries(n, entries)?.to_csr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn round_trip() {
        let d = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.1, 0.0, 0.1, 3.0, -0.25, 0.0, -0.25, 1.0 / 3.0],
        );
        let a = CsrMatrix::from_dense(&d).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 5\n"));
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), a);
    }
}
