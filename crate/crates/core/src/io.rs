//! svmlight text format, the binary CSR container and CSV export.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, Default)]
pub struct SvmlightOptions {
    /// Divide all values by the largest magnitude instead of rejecting `|v| > 1`.
    pub rescale: bool,
    /// Column count; inferred from the largest index when absent.
    pub n_features: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SvmlightData {
    pub x: SparseMatrix,
    pub y: Vec<f64>,
    /// The divisor applied to the values when rescaling was requested.
    pub scale: Option<f64>,
}

/// Parse svmlight text: `label idx:val ...` with 1-based, strictly increasing indices.
pub fn read_svmlight<R: Read>(reader: R, opts: SvmlightOptions) -> Result<SvmlightData> {
    let mut y = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_idx = 0usize;
    let mut max_abs = 0.0f64;
    let mut first_large: Option<usize> = None;

    for (ln, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = ln + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: line_no, msg };
        let mut tok = content.split_whitespace();
        let label: f64 = tok.next().unwrap().parse().map_err(|_| perr("label is not a number".into()))?;
        let mut row = Vec::new();
        let mut prev = 0usize;
        for t in tok {
            let (a, b) = t.split_once(':').ok_or_else(|| perr(format!("expected idx:val, got `{t}`")))?;
            let idx: usize = a.parse().map_err(|_| perr(format!("bad index `{a}`")))?;
            let v: f64 = b.parse().map_err(|_| perr(format!("bad value `{b}`")))?;
            if idx == 0 {
                return Err(perr("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(perr(format!("index {idx} not strictly increasing")));
            }
            if v == 0.0 {
                return Err(perr(format!("explicit zero at index {idx}")));
            }
            if !v.is_finite() {
                return Err(perr(format!("non-finite value at index {idx}")));
            }
            if v.abs() > 1.0 && first_large.is_none() {
                first_large = Some(line_no);
            }
            max_abs = max_abs.max(v.abs());
            prev = idx;
            row.push((idx - 1, v));
        }
        max_idx = max_idx.max(prev);
        y.push(label);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let p = match opts.n_features {
        Some(p) if p < max_idx => return Err(Error::Shape(format!("index {max_idx} exceeds declared {p} features"))),
        Some(p) => p,
        None => max_idx,
    };
    if opts.rescale {
        let s = if max_abs > 0.0 { max_abs } else { 1.0 };
        for r in rows.iter_mut() {
            for e in r.iter_mut() {
                e.1 /= s;
            }
        }
        let x = SparseMatrix::from_rows_unbounded(p, &rows)?;
        return Ok(SvmlightData { x, y, scale: Some(s) });
    }
    if let Some(line) = first_large {
        return Err(Error::Parse { line, msg: "value with |v| > 1; rescale the data".into() });
    }
    let x = SparseMatrix::from_rows(p, &rows)?;
    Ok(SvmlightData { x, y, scale: None })
}

pub fn read_svmlight_file(path: &Path, opts: SvmlightOptions) -> Result<SvmlightData> {
    read_svmlight(std::fs::File::open(path)?, opts)
}

/// Write svmlight text. Values use the shortest round-trip representation.
pub fn write_svmlight<W: Write>(mut w: W, x: &SparseMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.n_rows() {
        return Err(Error::Shape("label count differs from row count".into()));
    }
    for (i, label) in y.iter().enumerate() {
        write!(w, "{label}")?;
        let (idx, val) = x.row(i);
        for (&k, &v) in idx.iter().zip(val) {
            write!(w, " {}:{}", k + 1, v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"MWCSR\0\0\x01";

/// Plain CSR arrays without value-range invariants, used for hashed outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrData {
    pub n_rows: usize,
    pub n_cols: usize,
    pub offsets: Vec<u64>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrData {
    pub fn from_sparse(x: &SparseMatrix) -> Self {
        Self {
            n_rows: x.n_rows(),
            n_cols: x.n_cols(),
            offsets: x.offsets().iter().map(|&o| o as u64).collect(),
            indices: x.indices().to_vec(),
            values: x.values().to_vec(),
        }
    }

    /// Drops exact zeros.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut offsets = vec![0u64];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    indices.push(j as u32);
                    values.push(v);
                }
            }
            offsets.push(indices.len() as u64);
        }
        Self { n_rows: m.nrows(), n_cols: m.ncols(), offsets, indices, values }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for j in self.offsets[i] as usize..self.offsets[i + 1] as usize {
                d[(i, self.indices[j] as usize)] = self.values[j];
            }
        }
        d
    }

    pub fn to_sparse(&self) -> Result<SparseMatrix> {
        SparseMatrix::from_csr_unbounded(
            self.n_rows,
            self.n_cols,
            self.offsets.iter().map(|&o| o as usize).collect(),
            self.indices.clone(),
            self.values.clone(),
        )
    }
}

/// Binary container: magic, `n_rows`, `n_cols`, `nnz` (u64), then offsets (u64),
/// indices (u32) and values (f64), all little-endian.
pub fn write_container<W: Write>(w: W, m: &CsrData) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(MAGIC)?;
    for d in [m.n_rows as u64, m.n_cols as u64, m.indices.len() as u64] {
        w.write_all(&d.to_le_bytes())?;
    }
    for o in &m.offsets {
        w.write_all(&o.to_le_bytes())?;
    }
    for i in &m.indices {
        w.write_all(&i.to_le_bytes())?;
    }
    for v in &m.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_container<R: Read>(r: R) -> Result<CsrData> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut u64s = |k: usize| -> Result<Vec<u64>> {
        let mut buf = vec![0u8; k * 8];
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated container".into()))?;
        Ok(buf.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let dims = u64s(3)?;
    let (n_rows, n_cols, nnz) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let offsets = u64s(n_rows + 1)?;
    let mut buf = vec![0u8; nnz * 4];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated container".into()))?;
    let indices: Vec<u32> = buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    let mut buf = vec![0u8; nnz * 8];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated container".into()))?;
    let values: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if offsets.first() != Some(&0) || *offsets.last().unwrap() as usize != nnz {
        return Err(Error::Format("inconsistent offsets".into()));
    }
    if offsets.windows(2).any(|w| w[0] > w[1]) || indices.iter().any(|&k| k as usize >= n_cols) {
        return Err(Error::Format("corrupt container".into()));
    }
    Ok(CsrData { n_rows, n_cols, offsets, indices, values })
}

/// Write a row-major table of numbers as headerless CSV.
pub fn write_csv<W: Write, T: std::fmt::Display>(
    w: W,
    n_rows: usize,
    n_cols: usize,
    get: impl Fn(usize, usize) -> T,
) -> Result<()> {
    let mut w = BufWriter::new(w);
    for i in 0..n_rows {
        for j in 0..n_cols {
            if j > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{}", get(i, j))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SvmlightData> {
        read_svmlight(s.as_bytes(), SvmlightOptions::default())
    }

    #[test]
    fn parses_and_round_trips() {
        let text = "1 1:0.5 3:-1\n0 2:1\n-2.5\n";
        let d = parse(text).unwrap();
        assert_eq!(d.x.n_rows(), 3);
        assert_eq!(d.x.n_cols(), 3);
        assert_eq!(d.x.get(0, 2), -1.0);
        let mut out = Vec::new();
        write_svmlight(&mut out, &d.x, &d.y).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("1 1:1\n1 3:1 2:1\n").unwrap_err().to_string();
        assert!(e.starts_with("line 2"), "{e}");
        let e = parse("1 1:1\n1 2:0\n").unwrap_err().to_string();
        assert!(e.contains("explicit zero"), "{e}");
        let e = parse("1 1:2\n").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("rescale"), "{e}");
        assert_eq!(parse("\n# only a comment\n").unwrap_err().to_string(), "no rows");
    }

    #[test]
    fn rescale_divides_by_max() {
        let d = read_svmlight("1 1:2 2:-4\n".as_bytes(), SvmlightOptions { rescale: true, n_features: None }).unwrap();
        assert_eq!(d.scale, Some(4.0));
        assert_eq!(d.x.get(0, 1), -1.0);
        assert_eq!(d.x.get(0, 0), 0.5);
    }

    #[test]
    fn container_round_trip_and_corruption() {
        let x = SparseMatrix::from_rows(4, &[vec![(0, 0.25), (3, -1.0)], vec![], vec![(2, 1.0)]]).unwrap();
        let c = CsrData::from_sparse(&x);
        let mut buf = Vec::new();
        write_container(&mut buf, &c).unwrap();
        let back = read_container(&buf[..]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_sparse().unwrap(), x);
        assert!(read_container(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_container(&bad[..]).is_err());
    }
}
