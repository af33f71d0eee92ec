//! Dense symmetric eigensolver with a selection of the low end of the spectrum.

use faer::{Mat, Par, Side};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("matrix is empty")]
    Empty,
    #[error("symmetric eigensolver did not converge")]
    NoConvergence,
}

/// Which eigenpairs to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// All eigenvalues strictly below the bound.
    Below(f64),
    /// The `k` lowest eigenvalues.
    Lowest(usize),
}

/// Ascending eigenvalues with eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

/// Threads used inside dense linear algebra. 0 or 1 means sequential.
pub fn set_linalg_threads(threads: usize) {
    let par = if threads <= 1 { Par::Seq } else { Par::rayon(threads) };
    faer::set_global_parallelism(par);
}

/// Eigenpairs of the symmetric matrix `a`; only the lower triangle is read.
pub fn symmetric_eigen(a: &Mat<f64>, selection: Selection) -> Result<Eigenpairs, EigenError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Err(EigenError::Empty);
    }
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| EigenError::NoConvergence)?;
    let s = evd.S().column_vector();
    let all: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let m = match selection {
        Selection::Below(bound) => all.iter().take_while(|&&x| x < bound).count(),
        Selection::Lowest(k) => k.min(n),
    };
    let u = evd.U();
    let vectors = Mat::from_fn(n, m, |i, j| u[(i, j)]);
    let mut values = all;
    values.truncate(m);
    Ok(Eigenpairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let e = symmetric_eigen(&a, Selection::Lowest(2)).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let (v0, v1) = (e.vectors[(0, 0)], e.vectors[(1, 0)]);
        assert!((v0.abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((v0 + v1).abs() < 1e-14);
    }

    #[test]
    fn below_bound_selects_subset() {
        let n = 300;
        let a = Mat::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let some = symmetric_eigen(&a, Selection::Below(0.5)).unwrap();
        let expected =
            (1..=n).filter(|&k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos() < 0.5).count();
        assert_eq!(some.values.len(), expected);
        for (k, &lam) in some.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((lam - exact).abs() < 1e-12);
            let v = some.vectors.col(k);
            let res = &a * v - v * faer::Scale(lam);
            assert!(res.norm_l2() < 1e-12);
            assert!((v.norm_l2() - 1.0).abs() < 1e-13);
        }
        let none = symmetric_eigen(&a, Selection::Below(-10.0)).unwrap();
        assert!(none.values.is_empty());
    }
}
