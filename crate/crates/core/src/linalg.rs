//! Dense complex linear algebra helpers shared across modules.

use crate::{C64, CoreError};
use nalgebra::{DMatrix, DVector};

pub fn op_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn identity(d: usize) -> DMatrix<C64> {
    DMatrix::identity(d, d)
}

/// Fixed unitary used to break zero patterns that stall the QR iteration.
/// Conjugation by it preserves the spectrum to machine precision.
fn fixed_unitary(d: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |i, j| {
        C64::new(((i * d + j + 1) as f64).sin(), ((2 * i + 3 * j + 1) as f64).cos())
    });
    g.qr().q()
}

fn schur_diagonal(m: DMatrix<C64>) -> Option<Vec<C64>> {
    let t = m.try_schur(1e-13, 50_000)?.unpack().1;
    Some((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues of a general complex square matrix via the Schur form.
///
/// The iteration can stall on exact zero patterns (nilpotent truncations of
/// shifts, for one); a unitary conjugation retry covers those, at the cost
/// of the usual perturbation sensitivity of defective eigenvalues.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>, CoreError> {
    if m.nrows() != m.ncols() {
        return Err(CoreError::dim(format!(
            "eigenvalues require a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if let Some(eigs) = schur_diagonal(m.clone()) {
        return Ok(eigs);
    }
    let q = fixed_unitary(m.nrows());
    schur_diagonal(q.adjoint() * m * &q).ok_or(CoreError::EigenFailed)
}

/// Eigen decomposition of a Hermitian matrix: real eigenvalues with an
/// orthonormal eigenvector basis, both in descending eigenvalue order.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let se = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order.iter().map(|&i| se.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Orthonormal basis of the numerical kernel: right singular vectors whose
/// singular values fall at or below the absolute cutoff.
pub fn kernel(m: &DMatrix<C64>, cutoff: f64) -> Vec<DVector<C64>> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 {
        return (0..m.ncols())
            .map(|j| DVector::from_fn(m.ncols(), |i, _| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
            .collect();
    }
    let svd = m.clone().svd(true, true);
    let v_t = svd.v_t.expect("svd requested right vectors");
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            out.push(v_t.row(i).adjoint());
        }
    }
    // columns of v_t beyond the singular value count (ncols > nrows) are
    // automatically null
    for i in svd.singular_values.len()..m.ncols() {
        if i < v_t.nrows() {
            out.push(v_t.row(i).adjoint());
        }
    }
    out
}

pub fn try_inverse(m: &DMatrix<C64>) -> Result<DMatrix<C64>, CoreError> {
    m.clone().lu().try_inverse().ok_or(CoreError::Singular)
}

/// Hermitian square root with negative eigenvalues clamped to zero.
pub fn sqrt_psd(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (values, vectors) = hermitian_eigen(m);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &vectors * d * vectors.adjoint()
}

pub fn condition_number(m: &DMatrix<C64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenvalues_of_defective_block() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let mut eigs = eigenvalues(&m).unwrap();
        eigs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_eq!(eigs.len(), 2);
        for e in eigs {
            assert!((e - c(1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn hermitian_eigen_matches_characteristic_roots() {
        // eigenvalues of [[1,1],[1,2]] are (3 +- sqrt(5))/2
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        let (values, vectors) = hermitian_eigen(&m);
        let hi = (3.0 + 5.0f64.sqrt()) / 2.0;
        let lo = (3.0 - 5.0f64.sqrt()) / 2.0;
        assert!((values[0] - hi).abs() < 1e-12);
        assert!((values[1] - lo).abs() < 1e-12);
        let recomposed = &vectors
            * DMatrix::from_diagonal(&DVector::from_iterator(2, values.iter().map(|&l| c(l, 0.0))))
            * vectors.adjoint();
        assert!(op_norm(&(recomposed - m)) < 1e-12);
    }

    #[test]
    fn kernel_of_rank_one_projection() {
        // P = [[1,1,0],[1,1,0],[0,0,0]] has a two dimensional kernel
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
                c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
            ],
        );
        let null = kernel(&m, 1e-10 * op_norm(&m));
        assert_eq!(null.len(), 2);
        for v in &null {
            assert!((&m * v).norm() < 1e-12);
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let s = sqrt_psd(&m);
        assert!(op_norm(&(&s * &s - &m)) < 1e-12);
        assert!(op_norm(&(&s - s.adjoint())) < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let inv = try_inverse(&m).unwrap();
        assert!(op_norm(&(&m * inv - identity(2))) < 1e-14);
    }
}
