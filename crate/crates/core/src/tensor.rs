//! Dense row-major matrices.
//!
//! Every value that leaves a constructor or an operation here is checked for
//! finiteness: a NaN or infinity is an error, never a silently propagated value.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "tensor",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        let t = Tensor { rows, cols, data };
        t.ensure_finite("tensor construction")?;
        Ok(t)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, S::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: S) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: S) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn row_vector(data: Vec<S>) -> Result<Self> {
        let n = data.len();
        Self::new(1, n, data)
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    op: "from_rows",
                    left: (rows.len(), cols),
                    right: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor { rows, cols, data }
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

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Same data viewed with a different shape.
    pub fn reshape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.data.len() {
            return Err(Error::Dimension {
                op: "reshape",
                left: (self.rows, self.cols),
                right: (rows, cols),
            });
        }
        self.rows = rows;
        self.cols = cols;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> Result<S> {
        if self.shape() != (1, 1) {
            return Err(Error::Dimension {
                op: "item",
                left: self.shape(),
                right: (1, 1),
            });
        }
        Ok(self.data[0])
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.same_shape(other, op)?;
        Ok(Tensor {
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

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    /// `op(a) * op(b)` where `op` optionally transposes.
    pub fn matmul(a: &Self, trans_a: bool, b: &Self, trans_b: bool) -> Result<Self> {
        let (m, ka) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
        let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
        if ka != kb {
            return Err(Error::Dimension {
                op: "matmul",
                left: (m, ka),
                right: (kb, n),
            });
        }
        let mut out = vec![S::zero(); m * n];
        if m > 0 && n > 0 && ka > 0 {
            let (rsa, csa) = if trans_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
            let (rsb, csb) = if trans_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
            // SAFETY: strides describe the row-major buffers of `a`, `b` and
            // the freshly allocated `m x n` output.
            unsafe {
                S::gemm(
                    m,
                    ka,
                    n,
                    S::one(),
                    a.data.as_ptr(),
                    rsa,
                    csa,
                    b.data.as_ptr(),
                    rsb,
                    csb,
                    S::zero(),
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        Ok(Tensor {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// Adds a `1 x cols` bias to every row.
    pub fn add_row_bias(&self, bias: &Self) -> Result<Self> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::Dimension {
                op: "add_row_bias",
                left: self.shape(),
                right: bias.shape(),
            });
        }
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols.max(1)) {
            for (x, &b) in row.iter_mut().zip(&bias.data) {
                *x += b;
            }
        }
        Ok(out)
    }

    /// Column sums as a `1 x cols` tensor.
    pub fn col_sum(&self) -> Self {
        let mut out = vec![S::zero(); self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        Tensor {
            rows: 1,
            cols: self.cols,
            data: out,
        }
    }

    /// Repeats a `1 x cols` tensor `rows` times.
    pub fn broadcast_rows(&self, rows: usize) -> Result<Self> {
        if self.rows != 1 {
            return Err(Error::Dimension {
                op: "broadcast_rows",
                left: self.shape(),
                right: (1, self.cols),
            });
        }
        let mut data = Vec::with_capacity(rows * self.cols);
        for _ in 0..rows {
            data.extend_from_slice(&self.data);
        }
        Ok(Tensor {
            rows,
            cols: self.cols,
            data,
        })
    }

    pub fn concat_cols(a: &Self, b: &Self) -> Result<Self> {
        if a.rows != b.rows {
            return Err(Error::Dimension {
                op: "concat_cols",
                left: a.shape(),
                right: b.shape(),
            });
        }
        let cols = a.cols + b.cols;
        let mut data = Vec::with_capacity(a.rows * cols);
        for r in 0..a.rows {
            data.extend_from_slice(a.row(r));
            data.extend_from_slice(b.row(r));
        }
        Ok(Tensor {
            rows: a.rows,
            cols,
            data,
        })
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.cols {
            return Err(Error::Dimension {
                op: "slice_cols",
                left: self.shape(),
                right: (start, len),
            });
        }
        let mut data = Vec::with_capacity(self.rows * len);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + len]);
        }
        Ok(Tensor {
            rows: self.rows,
            cols: len,
            data,
        })
    }

    /// Places `self` at column offset `start` of a zero tensor `total` wide.
    pub fn embed_cols(&self, start: usize, total: usize) -> Result<Self> {
        if start + self.cols > total {
            return Err(Error::Dimension {
                op: "embed_cols",
                left: self.shape(),
                right: (start, total),
            });
        }
        let mut out = Self::zeros(self.rows, total);
        for r in 0..self.rows {
            out.row_mut(r)[start..start + self.cols].copy_from_slice(self.row(r));
        }
        Ok(out)
    }

    /// Euclidean norm of every row, as a `rows x 1` tensor.
    pub fn row_norms(&self) -> Self {
        let data = (0..self.rows)
            .map(|r| self.row(r).iter().map(|&x| x * x).sum::<S>().sqrt())
            .collect();
        Tensor {
            rows: self.rows,
            cols: 1,
            data,
        }
    }

    pub fn leaky_relu(&self, slope: S) -> Self {
        self.map(|x| if x >= S::zero() { x } else { slope * x })
    }

    /// Elementwise derivative of the leaky rectifier at `self`.
    pub fn leaky_relu_mask(&self, slope: S) -> Self {
        self.map(|x| if x >= S::zero() { S::one() } else { slope })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Tensor::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(Tensor::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn matmul_transposes() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let ab = Tensor::matmul(&a, false, &b, false).unwrap();
        assert_eq!(ab.data(), &[1.0, 2.0, 4.0, 3.0, 4.0, 10.0, 5.0, 6.0, 16.0]);
        let at = a.transpose();
        let bt = b.transpose();
        assert_eq!(Tensor::matmul(&at, true, &b, false).unwrap(), ab);
        assert_eq!(Tensor::matmul(&a, false, &bt, true).unwrap(), ab);
        assert_eq!(Tensor::matmul(&at, true, &bt, true).unwrap(), ab);
        assert!(Tensor::matmul(&a, false, &a, false).is_err());
    }

    #[test]
    fn column_helpers() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.col_sum().data(), &[5.0, 7.0, 9.0]);
        let s = a.slice_cols(1, 2).unwrap();
        assert_eq!(s.data(), &[2.0, 3.0, 5.0, 6.0]);
        let e = s.embed_cols(1, 3).unwrap();
        assert_eq!(e.data(), &[0.0, 2.0, 3.0, 0.0, 5.0, 6.0]);
        let c = Tensor::concat_cols(&a.slice_cols(0, 1).unwrap(), &s).unwrap();
        assert_eq!(c, a);
        assert_eq!(a.row_norms().data()[0], 14f64.sqrt());
    }
}
