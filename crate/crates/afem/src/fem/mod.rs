//! Conforming P1 finite elements: space setup, Galerkin assembly with
//! piecewise polynomial data, Dirichlet elimination, and error evaluation.

pub mod estimator;
pub mod solve;

pub use estimator::{estimate, EstimatorReport};
pub use solve::{solve_cg, CsrMatrix, LinearSystem};

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Triangle};
use crate::mesh::{MeshForest, Partition, VertexId};
use crate::poly::{PwPolyMatrix, PwPolyScalar};
use crate::quadrature::{self, AdaptiveQuad, QuadratureRule};

/// One degree of freedom per vertex of a conforming partition.
#[derive(Debug, Clone)]
pub struct P1Space {
    partition: Partition,
    vertex_of_dof: Vec<VertexId>,
    dof_of_vertex: HashMap<VertexId, usize>,
    interior_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    /// Per element (aligned with the partition) the dof triple of its
    /// vertices, newest first.
    element_dofs: Vec<[usize; 3]>,
}

impl P1Space {
    pub fn new(forest: &MeshForest, partition: &Partition) -> Result<P1Space> {
        if !forest.owns(partition) {
            return Err(Error::ForeignPartition);
        }
        // estimator and assembly both need conformity
        forest.interior_edges_of(partition)?;
        let vertex_of_dof = forest.vertex_ids_of(partition);
        let dof_of_vertex: HashMap<VertexId, usize> = vertex_of_dof
            .iter()
            .enumerate()
            .map(|(d, &v)| (v, d))
            .collect();
        let mut interior_dofs = Vec::new();
        let mut boundary_dofs = Vec::new();
        for (d, &v) in vertex_of_dof.iter().enumerate() {
            if forest.vertices[v].on_boundary {
                boundary_dofs.push(d);
            } else {
                interior_dofs.push(d);
            }
        }
        let element_dofs = partition
            .iter()
            .map(|id| {
                let v = forest.node(id).vertices;
                [dof_of_vertex[&v[0]], dof_of_vertex[&v[1]], dof_of_vertex[&v[2]]]
            })
            .collect();
        Ok(P1Space {
            partition: partition.clone(),
            vertex_of_dof,
            dof_of_vertex,
            interior_dofs,
            boundary_dofs,
            element_dofs,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn vertex_of_dof(&self, d: usize) -> VertexId {
        self.vertex_of_dof[d]
    }

    pub fn dof_of_vertex(&self, v: VertexId) -> Option<usize> {
        self.dof_of_vertex.get(&v).copied()
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn element_dofs(&self) -> &[[usize; 3]] {
        &self.element_dofs
    }

    /// Constant gradient of the P1 interpolant of `u` on element `k`
    /// (position within the partition).
    pub fn gradient_on(&self, forest: &MeshForest, k: usize, u: &[f64]) -> [f64; 2] {
        let id = self.partition.elements()[k];
        let tri = forest.triangle(id);
        let grads = basis_gradients(&tri);
        let dofs = self.element_dofs[k];
        let mut g = [0.0, 0.0];
        for i in 0..3 {
            g[0] += u[dofs[i]] * grads[i][0];
            g[1] += u[dofs[i]] * grads[i][1];
        }
        g
    }
}

/// Gradients of the three barycentric basis functions on a triangle;
/// constant vectors, ordered like the vertices.
pub fn basis_gradients(t: &Triangle) -> [[f64; 2]; 3] {
    let a2 = 2.0 * geometry::signed_area(t);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let p1 = t[(i + 1) % 3];
        let p2 = t[(i + 2) % 3];
        g[i] = [(p1[1] - p2[1]) / a2, (p2[0] - p1[0]) / a2];
    }
    g
}

/// Assemble stiffness matrix and load vector for the bilinear form with
/// diffusion `ahat` and right side `fhat`, both piecewise polynomial on a
/// coarsening of the space's partition. The element integrals are exact for
/// affine data: the stiffness uses the midpoint value of `ahat` (its element
/// mean) against constant P1 gradients, and the load a degree-2 rule.
pub fn assemble(
    forest: &MeshForest,
    space: &P1Space,
    ahat: &PwPolyMatrix,
    fhat: &PwPolyScalar,
) -> Result<LinearSystem> {
    if ahat.bounds().is_none() {
        return Err(Error::UncertifiedCoefficient);
    }
    let n = space.ndofs();
    let mut triplets = Vec::with_capacity(9 * space.partition().len());
    let mut rhs = vec![0.0; n];
    let rule = QuadratureRule::degree2();
    for (k, id) in space.partition().iter().enumerate() {
        let tri = forest.triangle(id);
        let area = geometry::area(&tri);
        let grads = basis_gradients(&tri);
        let a_mid = ahat.poly_on(forest, id)?.eval(geometry::centroid(&tri));
        let dofs = space.element_dofs()[k];
        for i in 0..3 {
            let agi = a_mid.apply(grads[i]);
            for j in 0..3 {
                let kij = area * (agi[0] * grads[j][0] + agi[1] * grads[j][1]);
                triplets.push((dofs[i], dofs[j], kij));
            }
        }
        let f = fhat.poly_on(forest, id)?;
        // edge-midpoint rule: basis i is 1/2 on its two adjacent midpoints
        for (m, w) in rule.points.iter().zip(&rule.weights) {
            let x = geometry::from_barycentric(&tri, *m);
            let fx = f.eval(x);
            for i in 0..3 {
                rhs[dofs[i]] += w * area * fx * m[i];
            }
        }
    }
    Ok(LinearSystem {
        matrix: CsrMatrix::from_triplets(n, triplets),
        rhs,
    })
}

/// Symmetric elimination of Dirichlet values: boundary rows and columns are
/// removed from the operator (their couplings move to the right side),
/// boundary rows become identity with the interpolated trace as data. The
/// solution of the returned system interpolates `g` at boundary vertices.
pub fn apply_dirichlet(
    forest: &MeshForest,
    sys: &LinearSystem,
    space: &P1Space,
    g: impl Fn(Point) -> f64,
) -> LinearSystem {
    let n = sys.ndofs();
    let mut is_boundary = vec![false; n];
    let mut bc = vec![0.0; n];
    for &d in space.boundary_dofs() {
        is_boundary[d] = true;
        bc[d] = g(forest.point(space.vertex_of_dof(d)));
    }
    let mut rhs = sys.rhs.clone();
    let mut triplets = Vec::with_capacity(sys.matrix.nnz());
    for r in 0..n {
        if is_boundary[r] {
            continue;
        }
        for (c, v) in sys.matrix.row(r) {
            if is_boundary[c] {
                rhs[r] -= v * bc[c];
            } else {
                triplets.push((r, c, v));
            }
        }
    }
    for d in 0..n {
        if is_boundary[d] {
            triplets.push((d, d, 1.0));
            rhs[d] = bc[d];
        }
    }
    LinearSystem {
        matrix: CsrMatrix::from_triplets(n, triplets),
        rhs,
    }
}

/// Euclidean norm of the discrete residual b - K u over interior dofs of the
/// raw (unconstrained) system: the Galerkin orthogonality defect.
pub fn galerkin_residual(raw: &LinearSystem, space: &P1Space, u: &[f64]) -> f64 {
    let mut ku = vec![0.0; raw.ndofs()];
    raw.matrix.matvec(u, &mut ku);
    space
        .interior_dofs()
        .iter()
        .map(|&d| (raw.rhs[d] - ku[d]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// H1 seminorm distance between the exact gradient and the piecewise
/// constant gradient of the finite element function: elements flagged by
/// `use_adaptive` (singular points, coefficient interfaces) are integrated
/// with the subdivision rule, everything else with the fixed degree-4 rule.
pub fn h1_seminorm_error(
    forest: &MeshForest,
    space: &P1Space,
    u: &[f64],
    grad_exact: &dyn Fn(Point) -> [f64; 2],
    use_adaptive: &dyn Fn(&Triangle) -> bool,
    quad: &AdaptiveQuad,
) -> f64 {
    let mut total = 0.0;
    for (k, id) in space.partition().iter().enumerate() {
        let tri = forest.triangle(id);
        let gu = space.gradient_on(forest, k, u);
        let integrand = |p: Point| {
            let ge = grad_exact(p);
            (ge[0] - gu[0]).powi(2) + (ge[1] - gu[1]).powi(2)
        };
        total += if use_adaptive(&tri) {
            quadrature::integrate_adaptive(integrand, &tri, quad).values[0]
        } else {
            quadrature::integrate(integrand, &tri, QuadratureRule::degree4())
        };
    }
    total.sqrt()
}

/// Lp norm of the broken gradient over a subset of elements (`None` means
/// all); `p = f64::INFINITY` gives the elementwise maximum.
pub fn gradient_lp_norm(
    forest: &MeshForest,
    space: &P1Space,
    u: &[f64],
    p: f64,
    subset: Option<&[bool]>,
) -> f64 {
    let mut acc: f64 = 0.0;
    for (k, id) in space.partition().iter().enumerate() {
        if let Some(mask) = subset {
            if !mask[k] {
                continue;
            }
        }
        let g = space.gradient_on(forest, k, u);
        let mag = g[0].hypot(g[1]);
        if p.is_infinite() {
            acc = acc.max(mag);
        } else {
            acc += mag.powf(p) * forest.area_of(id);
        }
    }
    if p.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}

/// Write `dof_index value` pairs preceded by a mesh reference line.
pub fn dump_solution(mesh_ref: &str, u: &[f64], out: &mut impl Write) -> Result<()> {
    writeln!(out, "mesh {mesh_ref}")?;
    for (d, v) in u.iter().enumerate() {
        writeln!(out, "{d} {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;
    use crate::poly::{MatPoly1, Poly1, SymMat2};

    fn identity_field(p: Partition) -> PwPolyMatrix {
        PwPolyMatrix::constant_field(p, SymMat2::identity())
    }

    #[test]
    fn local_stiffness_on_reference_triangle() {
        let f = MeshForest::from_initial(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            &[[0, 1, 2]],
            &[0],
        )
        .unwrap();
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let sys = assemble(
            &f,
            &space,
            &identity_field(p.clone()),
            &PwPolyScalar::constant_field(p.clone(), 0.0),
        )
        .unwrap();
        // dofs are ordered by vertex id = input order here
        let want = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            let mut row = [0.0; 3];
            for (c, v) in sys.matrix.row(i) {
                row[c] = v;
            }
            for j in 0..3 {
                assert!(
                    (row[j] - want[i][j]).abs() < 1e-14,
                    "K[{i}][{j}] = {}",
                    row[j]
                );
            }
        }
    }

    #[test]
    fn stiffness_scales_linearly_in_the_coefficient() {
        let f = unit_square();
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let zero = PwPolyScalar::constant_field(p.clone(), 0.0);
        let k1 = assemble(&f, &space, &identity_field(p.clone()), &zero).unwrap();
        let c = 3.75;
        let kc = assemble(
            &f,
            &space,
            &PwPolyMatrix::constant_field(p.clone(), SymMat2::scaled_identity(c)),
            &zero,
        )
        .unwrap();
        for r in 0..space.ndofs() {
            let a: Vec<_> = k1.matrix.row(r).collect();
            let b: Vec<_> = kc.matrix.row(r).collect();
            for ((ca, va), (cb, vb)) in a.iter().zip(&b) {
                assert_eq!(ca, cb);
                assert!((vb - c * va).abs() < 1e-12 * (1.0 + va.abs()));
            }
        }
    }

    #[test]
    fn unit_load_vector_on_reference_triangle() {
        let f = MeshForest::from_initial(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            &[[0, 1, 2]],
            &[0],
        )
        .unwrap();
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let sys = assemble(
            &f,
            &space,
            &identity_field(p.clone()),
            &PwPolyScalar::constant_field(p, 1.0),
        )
        .unwrap();
        for d in 0..3 {
            assert!((sys.rhs[d] - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn space_rejects_nonconforming_partitions() {
        let mut f = unit_square();
        f.refine_marked(&[0]).unwrap();
        let p = f.active_partition();
        assert!(matches!(
            P1Space::new(&f, &p),
            Err(Error::NonConformingPartition { .. })
        ));
    }

    #[test]
    fn affine_solutions_are_reproduced_exactly() {
        // A = I, f = 0, boundary trace of u(x, y) = 2x - 3y + 1:
        // the discrete solution equals u at every vertex
        let mut f = unit_square();
        f.refine_uniform(2);
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let raw = assemble(
            &f,
            &space,
            &identity_field(p.clone()),
            &PwPolyScalar::constant_field(p.clone(), 0.0),
        )
        .unwrap();
        let exact = |x: Point| 2.0 * x[0] - 3.0 * x[1] + 1.0;
        let sys = apply_dirichlet(&f, &raw, &space, exact);
        let u = solve_cg(&sys, 1e-12, 10_000).unwrap();
        for d in 0..space.ndofs() {
            let x = f.point(space.vertex_of_dof(d));
            assert!(
                (u[d] - exact(x)).abs() < 1e-10,
                "dof {d}: {} vs {}",
                u[d],
                exact(x)
            );
        }
        // Galerkin orthogonality on interior rows
        assert!(galerkin_residual(&raw, &space, &u) < 1e-10);
    }

    #[test]
    fn zero_dirichlet_keeps_interior_system() {
        let f = unit_square();
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let raw = assemble(
            &f,
            &space,
            &identity_field(p.clone()),
            &PwPolyScalar::constant_field(p, 1.0),
        )
        .unwrap();
        let sys = apply_dirichlet(&f, &raw, &space, |_| 0.0);
        let u = solve_cg(&sys, 1e-12, 100).unwrap();
        // all four vertices of the square are boundary vertices here
        assert!(space.interior_dofs().is_empty());
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coercivity_of_assembled_matrix() {
        // r |v|_H1^2 <= v' K v <= M |v|_H1^2 for the P1 interpolant of
        // arbitrary dof vectors, with certified bounds (r, M) of the field
        let mut forest = unit_square();
        forest.refine_uniform(2);
        let p = forest.active_partition();
        let space = P1Space::new(&forest, &p).unwrap();
        let a = MatPoly1 {
            a11: Poly1::constant(2.0),
            a12: Poly1::constant(0.5),
            a22: Poly1::constant(1.0),
        };
        let m = a.eval([0.0, 0.0]);
        let (lo, hi) = m.eigenvalues();
        let field = PwPolyMatrix::new(p.clone(), 0, vec![a; p.len()], Some((lo, hi))).unwrap();
        let sys = assemble(
            &forest,
            &space,
            &field,
            &PwPolyScalar::constant_field(p.clone(), 0.0),
        )
        .unwrap();
        let n = space.ndofs();
        let mut state = 12345u64;
        for _ in 0..5 {
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
                })
                .collect();
            let mut kv = vec![0.0; n];
            sys.matrix.matvec(&v, &mut kv);
            let vkv: f64 = v.iter().zip(&kv).map(|(a, b)| a * b).sum();
            let h1: f64 = (0..p.len())
                .map(|k| {
                    let g = space.gradient_on(&forest, k, &v);
                    (g[0] * g[0] + g[1] * g[1]) * forest.area_of(p.elements()[k])
                })
                .sum();
            assert!(vkv >= lo * h1 - 1e-12);
            assert!(vkv <= hi * h1 + 1e-12);
        }
    }

    #[test]
    fn h1_error_of_quadratic_against_zero() {
        // u = x^2, U = 0 on the reference triangle: error = sqrt(1/3)
        let f = MeshForest::from_initial(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            &[[0, 1, 2]],
            &[0],
        )
        .unwrap();
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let u = vec![0.0; 3];
        let err = h1_seminorm_error(
            &f,
            &space,
            &u,
            &|x| [2.0 * x[0], 0.0],
            &|_| false,
            &AdaptiveQuad::default(),
        );
        assert!((err - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn h1_error_vanishes_for_interpolated_affine() {
        let mut f = unit_square();
        f.refine_uniform(1);
        let p = f.active_partition();
        let space = P1Space::new(&f, &p).unwrap();
        let u: Vec<f64> = (0..space.ndofs())
            .map(|d| {
                let x = f.point(space.vertex_of_dof(d));
                4.0 * x[0] - x[1]
            })
            .collect();
        let err = h1_seminorm_error(
            &f,
            &space,
            &u,
            &|_| [4.0, -1.0],
            &|_| false,
            &AdaptiveQuad::default(),
        );
        assert!(err < 1e-13);
    }
}
