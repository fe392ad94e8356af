//! Independent reference implementations shared by the integration tests.
//! Everything here works from the elementwise definitions, never through the
//! library's matricization or design-assembly code.
#![allow(dead_code)]

use fnar::model::PanelSeries;
use fnar::{Matrix, Tensor3};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
}

/// `X x_q Y` straight from the elementwise definition.
pub fn brute_mode_mul(x: &Tensor3, q: usize, y: &Matrix) -> Tensor3 {
    let mut dims = x.dims();
    let dq = dims[q - 1];
    assert_eq!(y.ncols(), dq);
    dims[q - 1] = y.nrows();
    Tensor3::from_fn(dims, |a, b, c| {
        (0..dq)
            .map(|s| {
                let (i, j, k) = match q {
                    1 => (s, b, c),
                    2 => (a, s, c),
                    _ => (a, b, s),
                };
                let row = [a, b, c][q - 1];
                x.get(i, j, k) * y[(row, s)]
            })
            .sum()
    })
}

/// Mode-q unfolding from the index map `j = sum_{k != q} i_k J_k`,
/// `J_k = prod_{l < k, l != q} d_l`.
pub fn brute_mat(x: &Tensor3, q: usize) -> Matrix {
    let d = x.dims();
    let others: Vec<usize> = (0..3).filter(|&k| k != q - 1).collect();
    let cols = d[others[0]] * d[others[1]];
    let mut m = Matrix::zeros(d[q - 1], cols);
    for i1 in 0..d[0] {
        for i2 in 0..d[1] {
            for i3 in 0..d[2] {
                let idx = [i1, i2, i3];
                let j = idx[others[0]] + d[others[0]] * idx[others[1]];
                m[(idx[q - 1], j)] = x.get(i1, i2, i3);
            }
        }
    }
    m
}

pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Stacked `(N T) x (r + 2N)` FNAR design assembled entry by entry.
pub fn stacked_system(y: &PanelSeries, factors: &[Tensor3]) -> (Matrix, DVector<f64>) {
    let (t_total, n) = (y.n_periods(), y.n_nodes());
    let r = factors[0].dims()[2];
    let p = r + 2 * n;
    let rows = (t_total - 1) * n;
    let mut x = Matrix::zeros(rows, p);
    let mut target = DVector::zeros(rows);
    let v = y.values();
    for t in 1..t_total {
        for i in 0..n {
            let row = (t - 1) * n + i;
            for k in 0..r {
                x[(row, k)] = (0..n).map(|j| factors[t - 1].get(i, j, k) * v[(t - 1, j)]).sum();
            }
            x[(row, r + i)] = v[(t - 1, i)];
            x[(row, r + n + i)] = 1.0;
            target[row] = v[(t, i)];
        }
    }
    (x, target)
}

/// Least squares by Householder QR, a different route from the library's
/// Cholesky normal equations.
pub fn qr_least_squares(x: &Matrix, y: &DVector<f64>) -> DVector<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().tr_mul(y);
    qr.r().solve_upper_triangular(&qty).expect("full column rank")
}
