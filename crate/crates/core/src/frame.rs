//! Frames stored through their analysis operator, and frame-bound certificates.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::linalg::{extreme_eigenvalues, outer_gram, weighted_outer_gram, CMatrix, CVector, C64};

/// Finite frame in `ℂ^m` given by its `M × m` analysis operator.
///
/// Row `i` holds the frame element `y^i`. The frame operator is
/// `∑_i y^i (y^i)*`, which is what [`FrameMatrix::gram`] returns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    rows: CMatrix,
}

impl FrameMatrix {
    pub fn new(rows: CMatrix) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(FrameError::InvalidInput(format!(
                "frame must have at least one row and one column, got {}x{}",
                rows.nrows(),
                rows.ncols()
            )));
        }
        if let Some(pos) = rows.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            let (r, c) = (pos % rows.nrows(), pos / rows.nrows());
            return Err(FrameError::InvalidInput(format!("non-finite entry at row {r}, column {c}")));
        }
        Ok(FrameMatrix { rows })
    }

    /// Build from real entries.
    pub fn from_real(rows: usize, cols: usize, data_row_major: &[f64]) -> Result<Self> {
        if data_row_major.len() != rows * cols {
            return Err(FrameError::InvalidInput("data length does not match shape".into()));
        }
        Self::new(CMatrix::from_fn(rows, cols, |i, j| C64::new(data_row_major[i * cols + j], 0.0)))
    }

    /// Number of frame elements `M`.
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rows
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rows
    }

    /// Frame element `y^i` as a column vector.
    pub fn element(&self, i: usize) -> CVector {
        self.rows.row(i).transpose()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.rows.row(i).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.row_norm_sq(i)).collect()
    }

    /// Frame operator `∑_i y^i (y^i)*` as an `m × m` Hermitian matrix.
    pub fn gram(&self) -> CMatrix {
        outer_gram(&self.rows)
    }

    /// Frame made of the listed rows, in the given order, duplicates allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Result<FrameMatrix> {
        check_indices(indices, self.len())?;
        let m = self.dim();
        FrameMatrix::new(CMatrix::from_fn(indices.len(), m, |r, c| self.rows[(indices[r], c)]))
    }
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    match indices.iter().find(|&&i| i >= len) {
        Some(i) => Err(FrameError::InvalidInput(format!("index {i} out of range for {len} rows"))),
        None => Ok(()),
    }
}

/// Lower and upper frame bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl FrameBounds {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < a {
            return Err(FrameError::InvalidInput(format!("invalid frame bounds A={a}, B={b}")));
        }
        Ok(FrameBounds { a, b })
    }

    /// `B / A`, infinite for a non-frame.
    pub fn ratio(&self) -> f64 {
        if self.a > 0.0 {
            self.b / self.a
        } else {
            f64::INFINITY
        }
    }

    pub fn is_frame(&self) -> bool {
        self.a > 0.0
    }
}

/// Index subset with nonnegative weights attached to a parent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSubframe {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    #[serde(rename = "parent_M")]
    pub parent_len: usize,
}

impl WeightedSubframe {
    pub fn new(indices: Vec<usize>, weights: Vec<f64>, parent_len: usize) -> Result<Self> {
        let sub = WeightedSubframe { indices, weights, parent_len };
        sub.validate()?;
        Ok(sub)
    }

    /// All-ones weights on the given distinct indices.
    pub fn unweighted(indices: Vec<usize>, parent_len: usize) -> Result<Self> {
        let weights = vec![1.0; indices.len()];
        Self::new(indices, weights, parent_len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.len() != self.weights.len() {
            return Err(FrameError::InvalidInput("indices and weights differ in length".into()));
        }
        check_indices(&self.indices, self.parent_len)?;
        let mut seen = vec![false; self.parent_len];
        for &i in &self.indices {
            if std::mem::replace(&mut seen[i], true) {
                return Err(FrameError::InvalidInput(format!("duplicate index {i}")));
            }
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(FrameError::InvalidInput(format!("weight {w} is not a nonnegative number")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Optimal frame bounds `(λ_min, λ_max)` of the frame operator.
pub fn frame_bounds(y: &FrameMatrix) -> FrameBounds {
    let (a, b) = extreme_eigenvalues(&y.gram());
    FrameBounds { a, b: b.max(a) }
}

/// Extreme eigenvalues of `∑_{i∈J} s_i y^i (y^i)*`.
pub fn weighted_frame_bounds(y: &FrameMatrix, sub: &WeightedSubframe) -> Result<FrameBounds> {
    if sub.parent_len != y.len() {
        return Err(FrameError::InvalidInput(format!(
            "subframe refers to {} rows but the frame has {}",
            sub.parent_len,
            y.len()
        )));
    }
    sub.validate()?;
    let g = weighted_outer_gram(y.matrix(), &sub.indices, &sub.weights);
    let (a, b) = extreme_eigenvalues(&g);
    Ok(FrameBounds { a, b: b.max(a) })
}

/// `‖Y‖_F² = ∑_i ‖y^i‖²`.
pub fn frobenius_norm_sq(y: &FrameMatrix) -> f64 {
    y.matrix().norm_squared()
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    m: usize,
    #[serde(rename = "M")]
    len: usize,
    rows: Vec<Vec<f64>>,
}

fn interleave(y: &FrameMatrix) -> Vec<Vec<f64>> {
    (0..y.len())
        .map(|i| y.matrix().row(i).iter().flat_map(|z| [z.re, z.im]).collect())
        .collect()
}

fn deinterleave(m: usize, rows: Vec<Vec<f64>>) -> Result<FrameMatrix> {
    let len = rows.len();
    let mut mat = CMatrix::zeros(len, m);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != 2 * m {
            return Err(FrameError::Parse(format!("row {i} has {} values, expected {}", row.len(), 2 * m)));
        }
        for j in 0..m {
            mat[(i, j)] = C64::new(row[2 * j], row[2 * j + 1]);
        }
    }
    FrameMatrix::new(mat)
}

impl FrameMatrix {
    /// Write the CSV wire format: header `m=<m>,M=<M>` then one row of
    /// interleaved `re,im` pairs per frame element.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record([format!("m={}", self.dim()), format!("M={}", self.len())])
            .map_err(csv_err)?;
        for row in interleave(self) {
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| FrameError::Parse("empty frame file".into()))?
            .map_err(csv_err)?;
        let mut m = None;
        let mut len = None;
        for field in header.iter() {
            match field.split_once('=') {
                Some(("m", v)) => m = Some(parse_usize(v)?),
                Some(("M", v)) => len = Some(parse_usize(v)?),
                _ => return Err(FrameError::Parse(format!("unexpected header field '{field}'"))),
            }
        }
        let (m, len) = match (m, len) {
            (Some(m), Some(len)) => (m, len),
            _ => return Err(FrameError::Parse("header must be 'm=<int>,M=<int>'".into())),
        };
        let mut rows = Vec::with_capacity(len);
        for rec in records {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| FrameError::Parse(format!("'{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.len() != len {
            return Err(FrameError::Parse(format!("header declares M={len} but {} rows follow", rows.len())));
        }
        deinterleave(m, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FrameJson { m: self.dim(), len: self.len(), rows: interleave(self) };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FrameJson = serde_json::from_str(text)?;
        if doc.rows.len() != doc.len {
            return Err(FrameError::Parse(format!("declared M={} but {} rows given", doc.len, doc.rows.len())));
        }
        deinterleave(doc.m, doc.rows)
    }

    /// Load from a `.json` or CSV file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&std::fs::read_to_string(path)?)
        } else {
            Self::read_csv(std::fs::File::open(path)?)
        }
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| FrameError::Parse(format!("'{s}' is not a nonnegative integer")))
}

pub(crate) fn csv_err(e: csv::Error) -> FrameError {
    FrameError::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_bounds() {
        let y = FrameMatrix::new(CMatrix::identity(4, 4)).unwrap();
        let fb = frame_bounds(&y);
        assert_relative_eq!(fb.a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fb.b, 1.0, epsilon = 1e-12);
        assert_relative_eq!(frobenius_norm_sq(&y), 4.0);
    }

    #[test]
    fn three_vectors_in_plane() {
        // Frame operator [[2,1],[1,2]] has eigenvalues 1 and 3, trace 4.
        let y = FrameMatrix::from_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let fb = frame_bounds(&y);
        assert_relative_eq!(fb.a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fb.b, 3.0, epsilon = 1e-12);
        assert_relative_eq!(frobenius_norm_sq(&y), 4.0);
    }

    #[test]
    fn weighted_bounds_examples() {
        let y = FrameMatrix::from_real(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let sub = WeightedSubframe::new(vec![0, 2], vec![2.0, 1.0], 3).unwrap();
        let fb = weighted_frame_bounds(&y, &sub).unwrap();
        assert_relative_eq!(fb.a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fb.b, 2.0, epsilon = 1e-12);

        let e = FrameMatrix::new(CMatrix::identity(3, 3)).unwrap();
        let one = WeightedSubframe::unweighted(vec![0], 3).unwrap();
        let fb = weighted_frame_bounds(&e, &one).unwrap();
        assert_eq!(fb.a, 0.0);
        assert_relative_eq!(fb.b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = CMatrix::identity(2, 2);
        m[(1, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(FrameMatrix::new(m), Err(FrameError::InvalidInput(_))));
        let y = FrameMatrix::new(CMatrix::identity(2, 2)).unwrap();
        let bad = WeightedSubframe { indices: vec![5], weights: vec![1.0], parent_len: 2 };
        assert!(matches!(weighted_frame_bounds(&y, &bad), Err(FrameError::InvalidInput(_))));
        assert!(WeightedSubframe::new(vec![0, 0], vec![1.0, 1.0], 2).is_err());
        assert!(WeightedSubframe::new(vec![0], vec![-1.0], 2).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mat = CMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 + 0.25, j as f64 - 1.5));
        let y = FrameMatrix::new(mat).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m=2,M=3\n"));
        assert_eq!(FrameMatrix::read_csv(buf.as_slice()).unwrap(), y);
        assert_eq!(FrameMatrix::from_json(&y.to_json().unwrap()).unwrap(), y);
    }

    #[test]
    fn csv_row_count_mismatch() {
        let text = "m=1,M=2\n1,0\n";
        assert!(matches!(FrameMatrix::read_csv(text.as_bytes()), Err(FrameError::Parse(_))));
    }
}
