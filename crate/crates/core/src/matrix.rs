use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix. Rows are the sensing vectors `a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "matrix entry ({}, {}) is not finite",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for r in rows {
            check_len("matrix row", p, r.len())?;
            data.extend(r);
        }
        Self::new(n, p, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// First `n` rows as a new matrix.
    pub fn top_rows(&self, n: usize) -> Result<Self> {
        if n > self.rows {
            return Err(Error::Config(format!(
                "requested {n} rows from a matrix with {}",
                self.rows
            )));
        }
        Ok(Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        })
    }

    /// Rows in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// `out = A x`
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = crate::scalar::dot(row, x);
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("matrix-vector product", self.cols, x.len())?;
        let mut out = vec![T::zero(); self.rows];
        if self.cols > 0 {
            self.mul_vec_into(x, &mut out);
        }
        Ok(out)
    }

    /// `out = Aᵀ r`
    pub fn tmul_vec_into(&self, r: &[T], out: &mut [T]) {
        debug_assert_eq!(r.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = T::zero());
        if self.cols == 0 {
            return;
        }
        for (&ri, row) in r.iter().zip(self.data.chunks_exact(self.cols)) {
            if ri != T::zero() {
                for (o, &a) in out.iter_mut().zip(row) {
                    *o = *o + ri * a;
                }
            }
        }
    }

    pub fn min_entry(&self) -> Option<T> {
        self.data.iter().copied().reduce(T::min)
    }

    pub fn max_entry(&self) -> Option<T> {
        self.data.iter().copied().reduce(T::max)
    }

    /// Location `(row, col)` of the smallest entry.
    pub fn argmin_entry(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, T)> = None;
        for (pos, &x) in self.data.iter().enumerate() {
            if best.is_none_or(|(_, b)| x < b) {
                best = Some((pos, x));
            }
        }
        best.map(|(pos, _)| (pos / self.cols, pos % self.cols))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|x| U::from_f64(x.as_f64()).expect("cast"))
                .collect(),
        }
    }

    /// Gram matrix `AᵀA / n` as a row-major `p × p` buffer.
    pub fn scaled_gram(&self) -> Vec<T> {
        let p = self.cols;
        let n = T::from_usize(self.rows.max(1)).expect("row count");
        let mut g = vec![T::zero(); p * p];
        for row in self.data.chunks_exact(p.max(1)) {
            for (j, &aj) in row.iter().enumerate() {
                if aj == T::zero() {
                    continue;
                }
                let gj = &mut g[j * p..(j + 1) * p];
                for (gjl, &al) in gj.iter_mut().zip(row) {
                    *gjl = *gjl + aj * al;
                }
            }
        }
        g.iter_mut().for_each(|x| *x = *x / n);
        g
    }
}

impl Matrix<f64> {
    /// Largest eigenvalue of `AᵀA / n`, i.e. the squared top singular value
    /// of `A / √n`.
    pub fn top_gram_eigenvalue(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let a = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        let sigma = a.singular_values().max();
        sigma * sigma / self.rows as f64
    }
}

impl<T: Scalar> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Reads a matrix from CSV: one row per line, comma-separated decimals, no header.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<Matrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Domain(format!("bad matrix entry {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(rows)
}

pub fn write_matrix_csv<W: Write>(m: &Matrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_gram() {
        let a = Matrix::<f64>::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(a.mul_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0, -1.0]);
        let mut t = vec![0.0; 2];
        a.tmul_vec_into(&[1.0, 0.0, 2.0], &mut t);
        assert_eq!(t, vec![1.0, 0.0]);
        let g = a.scaled_gram();
        assert!((g[0] - 10.0 / 3.0).abs() < 1e-12);
        assert!((g[1] - 14.0 / 3.0).abs() < 1e-12);
        assert!((g[3] - 21.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.argmin_entry(), Some((2, 1)));
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(Matrix::<f64>::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = Matrix::from_rows(vec![vec![0.5, 1.25], vec![-3.0, 1e-7]]).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&a, &mut buf).unwrap();
        let b = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn top_eigenvalue_of_scaled_identity() {
        let a = Matrix::<f64>::identity(4).map(|x| 2.0 * x);
        assert!((a.top_gram_eigenvalue() - 1.0).abs() < 1e-12);
    }
}
