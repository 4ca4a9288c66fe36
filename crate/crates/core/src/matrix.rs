//! Dense row-major matrices.
//!
//! Networks use the column convention: rows index neurons, columns index the
//! samples of a batch, so a layer computes `Z = W·A + B` with `A` of shape
//! `n_in × batch`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::one())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Wraps a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "buffer of length {} cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input. Intended for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend(r.iter().map(|&x| T::lit(x)));
        }
        Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i},{j}) out of bounds"
        );
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i},{j}) out of bounds"
        );
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// New matrix made of the given columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, indices.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = &mut out.data[i * indices.len()..(i + 1) * indices.len()];
            for (d, &j) in dst.iter_mut().zip(indices) {
                *d = src[j];
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(self.shape_err("matmul", other));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in self.data[i * k..(i + 1) * k].iter().enumerate() {
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(self.shape_err("t_matmul", other));
        }
        let (m, n) = (self.cols, other.cols);
        let mut out = Self::zeros(m, n);
        for p in 0..self.rows {
            let b_row = other.row(p);
            for (i, &a) in self.row(p).iter().enumerate() {
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materialising the transpose.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(self.shape_err("matmul_t", other));
        }
        let (m, n) = (self.rows, other.rows);
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            let a_row = self.row(i);
            for j in 0..n {
                out.data[i * n + j] = a_row
                    .iter()
                    .zip(other.row(j))
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            }
        }
        Ok(out)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map("hadamard", other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map("sub", other, |a, b| a - b)
    }

    /// Broadcast-adds an `n × 1` bias column to every column of `self`.
    pub fn add_bias(&self, bias: &Self) -> Result<Self> {
        if bias.cols != 1 || bias.rows != self.rows {
            return Err(self.shape_err("add_bias", bias));
        }
        let mut out = self.clone();
        for (i, &b) in bias.data.iter().enumerate() {
            for v in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *v += b;
            }
        }
        Ok(out)
    }

    /// Sums each row, giving an `n × 1` column.
    pub fn row_sum(&self) -> Self {
        let data = (0..self.rows)
            .map(|i| self.row(i).iter().copied().sum())
            .collect();
        Matrix {
            rows: self.rows,
            cols: 1,
            data,
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, op: &'static str, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(self.shape_err(op, other));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Errors if any entry is NaN or infinite.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(p) => Err(Error::NonFinite(format!(
                "{what}[{},{}] = {}",
                p / self.cols.max(1),
                p % self.cols.max(1),
                self.data[p]
            ))),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &x| if x.abs() > m { x.abs() } else { m })
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::lit(x.to_f64_lossy())).collect(),
        }
    }

    fn shape_err(&self, op: &'static str, other: &Self) -> Error {
        Error::Shape {
            op,
            left: self.shape(),
            right: other.shape(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for v in self.data[i * self.cols..(i + 1) * self.cols].iter().take(8) {
                write!(f, "{v:>10.4?} ")?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M = Matrix<f64>;

    // Scalar-loop oracles, written against raw indexing only.
    fn oracle_matmul(a: &M, b: &M) -> M {
        M::from_fn(a.rows(), b.cols(), |i, j| {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            s
        })
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> M {
        M::from_fn(r, c, |_, _| rng.gen_range(-2.0..2.0))
    }

    fn assert_close(a: &M, b: &M, rel: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            let denom = x.abs().max(y.abs()).max(1.0);
            assert!((x - y).abs() / denom <= rel, "{x} vs {y}");
        }
    }

    #[test]
    fn matmul_examples() {
        let id = M::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let v = M::from_rows(&[[3.0], [4.0]]);
        assert_eq!(id.matmul(&v).unwrap(), v);

        let a = M::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = M::from_rows(&[[5.0], [6.0]]);
        assert_eq!(a.matmul(&b).unwrap(), M::from_rows(&[[17.0], [39.0]]));
    }

    #[test]
    fn matmul_dimension_mismatch_names_shapes() {
        let err = M::zeros(2, 3).matmul(&M::zeros(4, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(4, 1)"), "{msg}");
    }

    #[test]
    fn hadamard_examples() {
        let a = M::from_rows(&[[2.0, 3.0]]);
        assert_eq!(a.hadamard(&M::ones(1, 2)).unwrap(), a);
        assert_eq!(
            a.hadamard(&M::from_rows(&[[4.0, 5.0]])).unwrap(),
            M::from_rows(&[[8.0, 15.0]])
        );
        assert_eq!(
            M::from_rows(&[[1.0]])
                .hadamard(&M::from_rows(&[[0.0]]))
                .unwrap(),
            M::from_rows(&[[0.0]])
        );
        assert!(a.hadamard(&M::ones(2, 1)).is_err());
    }

    #[test]
    fn add_bias_examples() {
        let z = M::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(z.add_bias(&M::zeros(2, 1)).unwrap(), z);
        assert_eq!(
            z.add_bias(&M::from_rows(&[[10.0], [20.0]])).unwrap(),
            M::from_rows(&[[11.0, 12.0], [23.0, 24.0]])
        );
        assert!(M::zeros(3, 2).add_bias(&M::zeros(2, 1)).is_err());
    }

    #[test]
    fn row_sum_examples() {
        assert_eq!(M::ones(2, 3).row_sum(), M::from_rows(&[[3.0], [3.0]]));
        assert_eq!(
            M::from_rows(&[[1.0, -1.0]]).row_sum(),
            M::from_rows(&[[0.0]])
        );
        assert_eq!(
            M::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).row_sum(),
            M::from_rows(&[[3.0], [7.0]])
        );
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(M::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn ensure_finite_reports_position() {
        let mut m = M::zeros(2, 2);
        m.set(1, 0, f64::NAN);
        let msg = m.ensure_finite("z").unwrap_err().to_string();
        assert!(msg.contains("z[1,0]"), "{msg}");
    }

    #[test]
    fn ops_agree_with_scalar_loops_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (m, k, n) = (
                rng.gen_range(1..=8),
                rng.gen_range(1..=8),
                rng.gen_range(1..=8),
            );
            let a = random(&mut rng, m, k);
            let b = random(&mut rng, k, n);
            assert_close(&a.matmul(&b).unwrap(), &oracle_matmul(&a, &b), 1e-12);

            let at = random(&mut rng, k, m);
            assert_close(
                &at.t_matmul(&b).unwrap(),
                &oracle_matmul(&at.transpose(), &b),
                1e-12,
            );
            let bt = random(&mut rng, n, k);
            assert_close(
                &a.matmul_t(&bt).unwrap(),
                &oracle_matmul(&a, &bt.transpose()),
                1e-12,
            );

            let c = random(&mut rng, m, k);
            let had = M::from_fn(m, k, |i, j| a.get(i, j) * c.get(i, j));
            assert_close(&a.hadamard(&c).unwrap(), &had, 1e-12);

            let bias = random(&mut rng, m, 1);
            let biased = M::from_fn(m, k, |i, j| a.get(i, j) + bias.get(i, 0));
            assert_close(&a.add_bias(&bias).unwrap(), &biased, 1e-12);

            let rs = M::from_fn(m, 1, |i, _| (0..k).map(|j| a.get(i, j)).sum());
            assert_close(&a.row_sum(), &rs, 1e-12);
        }
    }

    proptest! {
        #[test]
        fn matmul_is_associative(seed in any::<u64>(), m in 1usize..6, k in 1usize..6, n in 1usize..6, p in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&mut rng, m, k);
            let b = random(&mut rng, k, n);
            let c = random(&mut rng, n, p);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            assert_close(&left, &right, 1e-9);
        }

        #[test]
        fn identity_is_exact(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&mut rng, m, n);
            prop_assert_eq!(M::identity(m).matmul(&a).unwrap(), a.clone());
            prop_assert_eq!(a.matmul(&M::identity(n)).unwrap(), a);
        }

        #[test]
        fn double_transpose_is_bitwise_identity(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&mut rng, m, n);
            let back = a.transpose().transpose();
            prop_assert!(a.as_slice().iter().zip(back.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
