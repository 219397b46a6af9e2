//! Positivity repair for affine matrix approximants.
//!
//! A polynomial fit of a uniformly positive definite matrix can lose
//! definiteness. The repair keeps the fit when its smallest eigenvalue
//! stays above r/2 on the element, replaces runaway fits (largest
//! eigenvalue beyond 4M) by r times the identity, and otherwise shifts the
//! diagonal so the smallest eigenvalue lands at 3r/4. For affine entries
//! the smallest eigenvalue is concave and the largest convex in x, so both
//! extrema over a triangle are attained at its vertices and the checks are
//! exact.

use crate::error::{Error, Result};
use crate::geometry::Triangle;
use crate::poly::{MatPoly1, Poly1, SymMat2};

/// Which of the three branches fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairCase {
    Unchanged,
    ScaledIdentity,
    DiagonalShift,
}

/// Eigenvalue cap factor: fits with largest eigenvalue beyond `CAP * M` are
/// discarded entirely.
pub const CAP: f64 = 4.0;

/// Extremes of the eigenvalues of an affine matrix field over a triangle,
/// evaluated exactly at the vertices.
pub fn vertex_eigen_range(b: &MatPoly1, tri: &Triangle) -> (f64, f64) {
    let mut mu = f64::INFINITY;
    let mut m0 = f64::NEG_INFINITY;
    for v in tri {
        let (lo, hi) = b.eval(*v).eigenvalues();
        mu = mu.min(lo);
        m0 = m0.max(hi);
    }
    (mu, m0)
}

/// Three-branch repair of an affine symmetric fit on one element; `r` and
/// `m` are the certified spectral bounds of the matrix being approximated.
///
/// The cap check runs first: an admissible smallest eigenvalue must not
/// rescue a fit whose largest eigenvalue already exploded.
pub fn repair_positivity(
    b: &MatPoly1,
    tri: &Triangle,
    r: f64,
    m: f64,
) -> Result<(MatPoly1, RepairCase)> {
    if !(r > 0.0 && r <= m) {
        return Err(Error::InvalidParameter(format!(
            "repair needs spectral bounds 0 < r <= M, got ({r}, {m})"
        )));
    }
    let (mu, m0) = vertex_eigen_range(b, tri);
    if m0 > CAP * m {
        return Ok((
            MatPoly1::constant(SymMat2::scaled_identity(r)),
            RepairCase::ScaledIdentity,
        ));
    }
    if mu >= 0.5 * r {
        return Ok((*b, RepairCase::Unchanged));
    }
    Ok((b.shift_diagonal(0.75 * r - mu), RepairCase::DiagonalShift))
}
