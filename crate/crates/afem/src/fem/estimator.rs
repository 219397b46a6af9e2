//! Residual a posteriori error estimator for the P1 Galerkin solution with
//! piecewise polynomial data.
//!
//! Per element,
//!
//! ```text
//! eta_T = diam(T) ||fhat + div(Ahat grad U)||_{L2(T)}
//!         + ( sum_F diam(F) ||[Ahat grad U]||^2_{L2(F)} )^{1/2}
//! ```
//!
//! where F runs over the edges of T and `[.]` is the normal flux jump, so
//! every interior edge contributes to both of its elements; boundary edges
//! carry no jump. With affine data and constant P1 gradients both terms are
//! integrated exactly.

use std::io::Write;

use crate::error::Result;
use crate::fem::{basis_gradients, P1Space};
use crate::geometry::{self, Point};
use crate::mesh::{ElementId, MeshForest};
use crate::poly::{MatPoly1, Poly1, PwPolyMatrix, PwPolyScalar};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone)]
pub struct EstimatorReport {
    /// Elements in partition order.
    pub elements: Vec<ElementId>,
    /// Indicator per element, nonnegative.
    pub indicators: Vec<f64>,
    /// l2 aggregate of the indicators.
    pub total: f64,
}

impl EstimatorReport {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `element_id eta` pairs preceded by a mesh reference line.
    pub fn dump(&self, mesh_ref: &str, out: &mut impl Write) -> Result<()> {
        writeln!(out, "mesh {mesh_ref}")?;
        for (id, eta) in self.elements.iter().zip(&self.indicators) {
            writeln!(out, "{id} {eta}")?;
        }
        Ok(())
    }
}

/// Flux Ahat grad U on one element as an affine vector field.
fn elementwise_flux(
    forest: &MeshForest,
    space: &P1Space,
    k: usize,
    u: &[f64],
    ahat: &PwPolyMatrix,
) -> Result<(MatPoly1, [f64; 2])> {
    let id = space.partition().elements()[k];
    let a = *ahat.poly_on(forest, id)?;
    let grad = space.gradient_on(forest, k, u);
    Ok((a, grad))
}

fn flux_at(a: &MatPoly1, grad: [f64; 2], p: Point) -> [f64; 2] {
    a.eval(p).apply(grad)
}

pub fn estimate(
    forest: &MeshForest,
    space: &P1Space,
    u: &[f64],
    ahat: &PwPolyMatrix,
    fhat: &PwPolyScalar,
) -> Result<EstimatorReport> {
    let partition = space.partition();
    let interior = forest.interior_edges_of(partition)?;
    let n = partition.len();
    let mut pos_of: std::collections::HashMap<ElementId, usize> = std::collections::HashMap::new();
    for (k, id) in partition.iter().enumerate() {
        pos_of.insert(id, k);
    }

    // jump contributions accumulated per element
    let mut jump2 = vec![0.0; n];
    for edge in &interior {
        let (t0, t1) = edge.elements;
        let (k0, k1) = (pos_of[&t0], pos_of[&t1]);
        let (a0, g0) = elementwise_flux(forest, space, k0, u, ahat)?;
        let (a1, g1) = elementwise_flux(forest, space, k1, u, ahat)?;
        let pa = forest.point(edge.vertices.0);
        let pb = forest.point(edge.vertices.1);
        let len = geometry::dist(pa, pb);
        let normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        // the jump is affine along the edge; two-point Gauss is exact for
        // its square
        let s = 0.5 / 3.0_f64.sqrt();
        let mut integral = 0.0;
        for t in [0.5 - s, 0.5 + s] {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let f0 = flux_at(&a0, g0, x);
            let f1 = flux_at(&a1, g1, x);
            let j = (f0[0] - f1[0]) * normal[0] + (f0[1] - f1[1]) * normal[1];
            integral += 0.5 * len * j * j;
        }
        let w = len * integral;
        jump2[k0] += w;
        jump2[k1] += w;
    }

    let rule = QuadratureRule::degree2();
    let mut indicators = Vec::with_capacity(n);
    let mut total2 = 0.0;
    for (k, id) in partition.iter().enumerate() {
        let tri = forest.triangle(id);
        let (a, grad) = elementwise_flux(forest, space, k, u, ahat)?;
        // div(Ahat grad U) is constant: the affine entries of Ahat are the
        // only x-dependence left after the constant gradient
        let div = a.a11.cx * grad[0] + a.a12.cx * grad[1] + a.a12.cy * grad[0]
            + a.a22.cy * grad[1];
        let f: Poly1 = *fhat.poly_on(forest, id)?;
        let area = geometry::area(&tri);
        let mut res2 = 0.0;
        for (m, w) in rule.points.iter().zip(&rule.weights) {
            let x = geometry::from_barycentric(&tri, *m);
            let r = f.eval(x) + div;
            res2 += w * area * r * r;
        }
        let eta = geometry::diameter(&tri) * res2.sqrt() + jump2[k].sqrt();
        total2 += eta * eta;
        indicators.push(eta);
    }

    Ok(EstimatorReport {
        elements: partition.elements().to_vec(),
        indicators,
        total: total2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{apply_dirichlet, assemble, solve_cg, P1Space};
    use crate::mesh::unit_square;
    use crate::poly::SymMat2;

    #[test]
    fn affine_solution_with_identity_coefficient_has_zero_estimator() {
        let mut f = unit_square();
        f.refine_uniform(1);
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let ahat = PwPolyMatrix::constant_field(p.clone(), SymMat2::identity());
        let fhat = PwPolyScalar::constant_field(p.clone(), 0.0);
        let u: Vec<f64> = (0..space.ndofs())
            .map(|d| {
                let x = f.point(space.vertex_of_dof(d));
                1.5 * x[0] - 0.25 * x[1] + 2.0
            })
            .collect();
        let rep = estimate(&f, &space, &u, &ahat, &fhat).unwrap();
        assert!(rep.total < 1e-13);
        assert!(rep.indicators.iter().all(|&e| e >= 0.0 && e < 1e-13));
    }

    #[test]
    fn unit_load_estimator_is_positive_and_aggregates() {
        // uniform refinement of the square until there is an interior dof
        let mut f = unit_square();
        f.refine_uniform(1);
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        assert_eq!(space.interior_dofs().len(), 1);
        let ahat = PwPolyMatrix::constant_field(p.clone(), SymMat2::identity());
        let fhat = PwPolyScalar::constant_field(p.clone(), 1.0);
        let raw = assemble(&f, &space, &ahat, &fhat).unwrap();
        let sys = apply_dirichlet(&f, &raw, &space, |_| 0.0);
        let u = solve_cg(&sys, 1e-12, 1000).unwrap();
        let rep = estimate(&f, &space, &u, &ahat, &fhat).unwrap();
        assert!(rep.indicators.iter().all(|&e| e > 0.0));
        let sum2: f64 = rep.indicators.iter().map(|e| e * e).sum();
        assert!((rep.total * rep.total - sum2).abs() < 1e-13 * sum2);
        // the interior residual part alone is diam * area^{1/2} for f = 1,
        // A = I, so each indicator is at least that
        for (k, id) in p.iter().enumerate() {
            let floor = f.diameter_of(id) * f.area_of(id).sqrt();
            assert!(rep.indicators[k] >= floor - 1e-13);
        }
    }

    #[test]
    fn hand_checked_two_triangle_patch() {
        // coarse square, affine hat data: residual part of each indicator is
        // diam * ||1||_{L2} = sqrt(2) * sqrt(1/2); jump of grad across the
        // diagonal for u = interpolant of x*y localizes the remainder
        let f = unit_square();
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let ahat = PwPolyMatrix::constant_field(p.clone(), SymMat2::identity());
        let fhat = PwPolyScalar::constant_field(p.clone(), 1.0);
        // dof values: interpolant of x*y at the four corners
        let u: Vec<f64> = (0..space.ndofs())
            .map(|d| {
                let x = f.point(space.vertex_of_dof(d));
                x[0] * x[1]
            })
            .collect();
        let rep = estimate(&f, &space, &u, &ahat, &fhat).unwrap();
        // gradient of interpolant on lower triangle (0,0),(1,0),(1,1):
        // u = x*y interpolant = y there? vertices: (0,0)->0,(1,0)->0,(1,1)->1
        // plane through those: u = y on that triangle; on the upper triangle
        // u = x. flux jump across diagonal (0,0)-(1,1): [grad] . n with
        // grad difference (−1, 1), n = (1,−1)/sqrt(2): |j| = sqrt(2)
        let len = 2.0_f64.sqrt();
        let want_jump2 = len * (len * 2.0); // diam(F) * int_F j^2 = len * (len * 2)
        let res = 2.0_f64.sqrt() * 0.5_f64.sqrt();
        for &eta in &rep.indicators {
            assert!((eta - (res + want_jump2.sqrt())).abs() < 1e-12);
        }
    }
}
