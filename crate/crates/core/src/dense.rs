//! Dense reference matrices for small systems.
//!
//! [`kron_matrix`] assembles each Pauli string from 2×2 factors with
//! Kronecker products and never touches [`PauliString::apply`], so it serves
//! as an independent check on the matrix-free path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::pauli::{OperatorSum, PauliString};

/// Largest spin count for which dense matrices are built.
pub const DENSE_MAX_SITES: usize = 14;

fn check(op: &OperatorSum, n: usize) -> Result<()> {
    if n > DENSE_MAX_SITES {
        return Err(Error::CapExceeded(format!(
            "dense matrices are limited to {DENSE_MAX_SITES} spins, got {n}"
        )));
    }
    if op.min_sites() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: op.min_sites(),
        });
    }
    Ok(())
}

/// Dense matrix from the matrix-element rule of [`PauliString::apply`].
pub fn dense_matrix(op: &OperatorSum, n: usize) -> Result<DMatrix<f64>> {
    check(op, n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for t in op.terms() {
        for b in 0..dim as u64 {
            let (c, s) = t.apply(b);
            m[(c as usize, b as usize)] += s;
        }
    }
    Ok(m)
}

fn site_factor(t: &PauliString, e: usize) -> DMatrix<f64> {
    let x = t.xmask >> e & 1 == 1;
    let z = t.zmask >> e & 1 == 1;
    // basis order (up, down); Z = diag(1, -1), X swaps; X·Z when both
    match (x, z) {
        (false, false) => DMatrix::identity(2, 2),
        (false, true) => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        (true, false) => DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        (true, true) => DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
    }
}

/// Dense matrix assembled from Kronecker products; spin 0 is the least
/// significant bit of the basis index.
pub fn kron_matrix(op: &OperatorSum, n: usize) -> Result<DMatrix<f64>> {
    check(op, n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for t in op.terms() {
        let mut k = DMatrix::from_element(1, 1, t.coeff);
        for e in (0..n).rev() {
            k = k.kronecker(&site_factor(t, e));
        }
        m += k;
    }
    Ok(m)
}

/// Ascending eigenvalues and matching eigenvectors (columns).
pub fn eigh(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<DVector<f64>>>(),
    );
    (vals, vecs)
}

/// Lowest `k` eigenpairs by full dense diagonalization.
pub fn lowest(op: &OperatorSum, n: usize, k: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let (vals, vecs) = eigh(kron_matrix(op, n)?);
    let k = k.min(vals.len());
    Ok((
        vals[..k].to_vec(),
        (0..k).map(|i| vecs.column(i).into_owned()).collect(),
    ))
}
