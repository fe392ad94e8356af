//! Dense order-3 tensors, mode-q matricization and mode-q products.
//!
//! Elements are stored in column-major order, the first index running
//! fastest: element `(i1, i2, i3)` (0-based) lives at `i1 + d1 * (i2 + d2 * i3)`.
//! With this layout the mode-1 unfolding is the storage buffer read as a
//! `d1 x (d2 d3)` column-major matrix and each frontal slice is a contiguous
//! `d1 x d2` block.
//!
//! Matricization follows the usual tensor convention (1-based):
//! element `(i1, i2, i3)` maps to row `i_q` and column
//! `j = 1 + sum_{k != q} (i_k - 1) J_k` with `J_k = prod_{h < k, h != q} d_h`.
//! For a `3 x 4 x 2` tensor this gives
//!
//! ```text
//! mat_1: 3 x 8,  columns ordered by (i2, i3) with i2 fastest
//! mat_2: 4 x 6,  columns ordered by (i1, i3) with i1 fastest
//! mat_3: 2 x 12, columns ordered by (i1, i2) with i1 fastest
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Dense real tensor of order 3. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

fn check_mode(q: usize) -> Result<()> {
    if (1..=3).contains(&q) {
        Ok(())
    } else {
        Err(Error::InvalidMode(q))
    }
}

impl Tensor3 {
    /// Wraps a column-major buffer. All dimensions must be positive.
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must be positive, got {dims:?}"
            )));
        }
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "buffer of length {} for dims {dims:?} (expected {len})",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "tensor dimensions must be positive");
        Self {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    /// Builds a tensor from a function of 0-based indices.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "tensor dimensions must be positive");
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    /// Stacks `d1 x d2` matrices as frontal slices.
    pub fn from_frontal_slices(slices: &[Matrix]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("no frontal slices".into()))?;
        let (d1, d2) = first.shape();
        let mut data = Vec::with_capacity(d1 * d2 * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (d1, d2) {
                return Err(Error::DimensionMismatch(format!(
                    "slice {k} has shape {:?}, expected {:?}",
                    s.shape(),
                    (d1, d2)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::new([d1, d2, slices.len()], data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Raw column-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.dims[0] * (i2 + self.dims[1] * i3)
    }

    /// Element at 0-based indices. Panics when out of range.
    #[inline]
    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        assert!(
            i1 < self.dims[0] && i2 < self.dims[1] && i3 < self.dims[2],
            "index ({i1}, {i2}, {i3}) out of range for {:?}",
            self.dims
        );
        self.data[self.offset(i1, i2, i3)]
    }

    /// Frontal slice `k` (0-based) as a `d1 x d2` matrix.
    pub fn frontal_slice(&self, k: usize) -> Matrix {
        let n = self.dims[0] * self.dims[1];
        Matrix::from_column_slice(self.dims[0], self.dims[1], &self.data[k * n..(k + 1) * n])
    }

    /// Mode-q matricization, `q` in {1, 2, 3}.
    pub fn mat(&self, q: usize) -> Result<Matrix> {
        check_mode(q)?;
        let [d1, d2, d3] = self.dims;
        Ok(match q {
            1 => Matrix::from_column_slice(d1, d2 * d3, &self.data),
            2 => Matrix::from_fn(d2, d1 * d3, |i2, col| {
                let (i1, i3) = (col % d1, col / d1);
                self.data[self.offset(i1, i2, i3)]
            }),
            _ => Matrix::from_column_slice(d1 * d2, d3, &self.data).transpose(),
        })
    }

    /// Inverse of [`Tensor3::mat`]: folds a mode-q unfolding back into a tensor of `dims`.
    pub fn from_mat(m: &Matrix, q: usize, dims: [usize; 3]) -> Result<Self> {
        check_mode(q)?;
        let dq = dims[q - 1];
        let rest: usize = dims.iter().product::<usize>() / dq.max(1);
        if m.shape() != (dq, rest) {
            return Err(Error::DimensionMismatch(format!(
                "mode-{q} unfolding has shape {:?}, expected {:?}",
                m.shape(),
                (dq, rest)
            )));
        }
        let d1 = dims[0];
        match q {
            1 => Self::new(dims, m.as_slice().to_vec()),
            2 => Ok(Self::from_fn(dims, |i1, i2, i3| m[(i2, i1 + d1 * i3)])),
            _ => Self::new(dims, m.transpose().as_slice().to_vec()),
        }
    }

    /// Mode-q product `t x_q x`: `mat_q(result) = x * mat_q(t)`.
    pub fn mode_mul(&self, q: usize, x: &Matrix) -> Result<Self> {
        check_mode(q)?;
        let [d1, d2, d3] = self.dims;
        let dq = self.dims[q - 1];
        if x.ncols() != dq {
            return Err(Error::DimensionMismatch(format!(
                "mode-{q} product needs a matrix with {dq} columns, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::DimensionMismatch(
                "mode product with an empty matrix".into(),
            ));
        }
        let p = x.nrows();
        match q {
            1 => {
                let z = x * Matrix::from_column_slice(d1, d2 * d3, &self.data);
                Self::new([p, d2, d3], z.as_slice().to_vec())
            }
            3 => {
                // mat_3(t)' is the buffer read as a (d1 d2) x d3 matrix.
                let z = Matrix::from_column_slice(d1 * d2, d3, &self.data) * x.transpose();
                Self::new([d1, d2, p], z.as_slice().to_vec())
            }
            _ => {
                let z = x * self.mat(2)?;
                Self::from_mat(&z, 2, [d1, p, d3])
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "tensors of dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            dims: self.dims,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "tensors of dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// True when every frontal slice has an exactly zero diagonal.
    pub fn has_zero_diagonals(&self) -> bool {
        let d = self.dims[0].min(self.dims[1]);
        (0..self.dims[2]).all(|k| (0..d).all(|i| self.get(i, i, k) == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_tensor() -> Tensor3 {
        Tensor3::new([3, 4, 2], (1..=24).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn layout_matches_worked_example() {
        let t = appendix_tensor();
        // frontal slice 1: [[1,4,7,10],[2,5,8,11],[3,6,9,12]]
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert_eq!(t.get(0, 1, 0), 4.0);
        assert_eq!(t.get(2, 3, 0), 12.0);
        assert_eq!(t.get(0, 0, 1), 13.0);
        assert_eq!(t.frontal_slice(1)[(1, 2)], 20.0);
    }

    #[test]
    fn invalid_mode_is_rejected() {
        let t = appendix_tensor();
        assert_eq!(t.mat(0), Err(Error::InvalidMode(0)));
        assert_eq!(t.mat(4), Err(Error::InvalidMode(4)));
        assert!(t.mode_mul(5, &Matrix::identity(2, 2)).is_err());
    }

    #[test]
    fn single_slice_mode1_unfolding_is_the_slice() {
        let s = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = Tensor3::from_frontal_slices(std::slice::from_ref(&s)).unwrap();
        assert_eq!(t.mat(1).unwrap(), s);
    }

    #[test]
    fn unit_tensor_round_trip() {
        let t = Tensor3::new([1, 1, 1], vec![2.5]).unwrap();
        for q in 1..=3 {
            assert_eq!(Tensor3::from_mat(&t.mat(q).unwrap(), q, t.dims()).unwrap(), t);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(Tensor3::new([2, 2, 2], vec![0.0; 7]).is_err());
        assert!(Tensor3::new([0, 2, 2], vec![]).is_err());
        let m = Matrix::zeros(3, 7);
        assert!(Tensor3::from_mat(&m, 1, [3, 4, 2]).is_err());
        let t = appendix_tensor();
        assert!(t.mode_mul(2, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn mode_product_by_row_of_ones_sums_the_mode() {
        let t = Tensor3::new([2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let ones = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let z = t.mode_mul(2, &ones).unwrap();
        assert_eq!(z.dims(), [2, 1, 2]);
        for i in 0..2 {
            for k in 0..2 {
                let expected: f64 = (0..2).map(|j| t.get(i, j, k)).sum();
                assert_eq!(z.get(i, 0, k), expected);
            }
        }
        // entries 1..8 column-major: slice 1 = [[1,3],[2,4]], slice 2 = [[5,7],[6,8]]
        assert_eq!(z.as_slice(), &[4.0, 6.0, 12.0, 14.0]);
    }

    #[test]
    fn frobenius_norms() {
        assert_eq!(Tensor3::zeros([2, 3, 4]).frobenius_norm(), 0.0);
        let mut data = vec![0.0; 8];
        data[5] = 3.0;
        assert_eq!(Tensor3::new([2, 2, 2], data).unwrap().frobenius_norm(), 3.0);
        // sum_{k=1}^{24} k^2 = 24*25*49/6 = 4900
        assert_eq!(appendix_tensor().frobenius_norm(), 70.0);
    }
}
