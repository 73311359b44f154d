use crate::{Error, Result};

/// Dense n-dimensional real array in row-major order, the universal carrier
/// for parameters and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting NaN/Inf entries and shape/data mismatches.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.clone(),
                got: vec![data.len()],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    /// 2-d tensor from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = if n == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::ShapeMismatch {
                    expected: vec![n, m],
                    got: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![n, m], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows of a 2-d tensor.
    pub fn nrows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "nrows on non-matrix tensor");
        self.shape[0]
    }

    /// Number of columns of a 2-d tensor.
    pub fn ncols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "ncols on non-matrix tensor");
        self.shape[1]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let m = self.ncols();
        self.data[i * m + j] = v;
    }

    /// Reinterprets the flat data under a new shape with the same length.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape,
                got: self.shape.clone(),
            });
        }
        Ok(Self {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        super::l2_norm(&self.data)
    }

    /// Elementwise `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scaled(&self, alpha: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Matrix product of two 2-d tensors.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (n, k) = (self.nrows(), self.ncols());
        let (k2, m) = (other.nrows(), other.ncols());
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut out = Tensor::zeros(vec![n, m]);
        for i in 0..n {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out.data[i * m + j] += a * other.data[l * m + j];
                }
            }
        }
        out
    }

    /// Transpose of a 2-d tensor.
    pub fn transposed(&self) -> Tensor {
        let (n, m) = (self.nrows(), self.ncols());
        let mut out = Tensor::zeros(vec![m, n]);
        for i in 0..n {
            for j in 0..m {
                out.data[j * n + i] = self.data[i * m + j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.l2_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan() {
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(Tensor::new(vec![3], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let eye = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(a.matmul(&eye), a);
    }

    #[test]
    fn transpose_round_trip() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.transposed().transposed(), a);
    }
}
