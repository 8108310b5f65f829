//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Largest singular value.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solves `m x = rhs`, refusing numerically singular systems.
pub fn solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, rhs.ncols()));
    }
    let sv = m.clone().singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if hi == 0.0 || lo <= 1e-12 * hi {
        return None;
    }
    m.clone().lu().solve(rhs)
}

pub fn solve_vec(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let r = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    solve(m, &r).map(|x| x.column(0).into_owned())
}

pub fn sup_norm(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Row space rank with relative tolerance.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let hi = sv.max();
    if hi == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-10 * hi).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert!((operator_norm(&a) - 2.0).abs() < 1e-12);
        assert!(spectral_radius(&a) < 1e-12);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_radius(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_refused() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve_vec(&m, &DVector::from_vec(vec![1.0, 1.0])).is_none());
        let x = solve_vec(&(DMatrix::identity(2, 2) * 2.0), &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }
}
