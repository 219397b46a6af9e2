//! Piecewise polynomial fields (degree at most one) over a partition of the
//! bisection forest, scalar and symmetric-matrix valued.
//!
//! Fields built on a coarse partition can be evaluated on any refinement:
//! lookups walk the ancestry until they land on an element of the carrier
//! partition.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::{ElementId, MeshForest, Partition};

/// Affine scalar polynomial c0 + cx*x + cy*y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly1 {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Poly1 {
    pub fn constant(c: f64) -> Self {
        Poly1 {
            c0: c,
            cx: 0.0,
            cy: 0.0,
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.c0 + self.cx * p[0] + self.cy * p[1]
    }

    pub fn is_constant(&self) -> bool {
        self.cx == 0.0 && self.cy == 0.0
    }
}

/// Symmetric 2x2 matrix value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub fn identity() -> Self {
        SymMat2 {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        }
    }

    pub fn scaled_identity(c: f64) -> Self {
        SymMat2 {
            a11: c,
            a12: 0.0,
            a22: c,
        }
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let rad = (0.25 * (self.a11 - self.a22).powi(2) + self.a12 * self.a12).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues().0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().1
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        lo.abs().max(hi.abs())
    }

    pub fn sub(&self, o: &SymMat2) -> SymMat2 {
        SymMat2 {
            a11: self.a11 - o.a11,
            a12: self.a12 - o.a12,
            a22: self.a22 - o.a22,
        }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a12 * v[0] + self.a22 * v[1],
        ]
    }
}

/// Affine symmetric-matrix polynomial; entries are `Poly1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatPoly1 {
    pub a11: Poly1,
    pub a12: Poly1,
    pub a22: Poly1,
}

impl MatPoly1 {
    pub fn constant(m: SymMat2) -> Self {
        MatPoly1 {
            a11: Poly1::constant(m.a11),
            a12: Poly1::constant(m.a12),
            a22: Poly1::constant(m.a22),
        }
    }

    pub fn eval(&self, p: Point) -> SymMat2 {
        SymMat2 {
            a11: self.a11.eval(p),
            a12: self.a12.eval(p),
            a22: self.a22.eval(p),
        }
    }

    pub fn shift_diagonal(&self, s: f64) -> MatPoly1 {
        let mut out = *self;
        out.a11.c0 += s;
        out.a22.c0 += s;
        out
    }

    pub fn scale(&self, c: f64) -> MatPoly1 {
        let s = |p: Poly1| Poly1 {
            c0: c * p.c0,
            cx: c * p.cx,
            cy: c * p.cy,
        };
        MatPoly1 {
            a11: s(self.a11),
            a12: s(self.a12),
            a22: s(self.a22),
        }
    }
}

/// Piecewise polynomial scalar field over a partition.
#[derive(Debug, Clone)]
pub struct PwPolyScalar {
    partition: Partition,
    degree: usize,
    polys: Vec<Poly1>,
    index: HashMap<ElementId, usize>,
}

/// Piecewise polynomial symmetric-matrix field with optional certified
/// spectral bounds (lower bound on the smallest and upper bound on the
/// largest eigenvalue over the whole field).
#[derive(Debug, Clone)]
pub struct PwPolyMatrix {
    partition: Partition,
    degree: usize,
    polys: Vec<MatPoly1>,
    bounds: Option<(f64, f64)>,
    index: HashMap<ElementId, usize>,
}

fn build_index(p: &Partition) -> HashMap<ElementId, usize> {
    p.iter().enumerate().map(|(i, id)| (id, i)).collect()
}

fn resolve(
    forest: &MeshForest,
    index: &HashMap<ElementId, usize>,
    elem: ElementId,
) -> Result<usize> {
    let mut cur = Some(elem);
    while let Some(id) = cur {
        if let Some(&i) = index.get(&id) {
            return Ok(i);
        }
        cur = forest.node(id).parent;
    }
    Err(Error::PartitionMismatch(elem))
}

impl PwPolyScalar {
    pub fn new(partition: Partition, degree: usize, polys: Vec<Poly1>) -> Result<Self> {
        if polys.len() != partition.len() {
            return Err(Error::InvalidParameter(
                "one polynomial per partition element required".into(),
            ));
        }
        if degree > 1 {
            return Err(Error::InvalidParameter("degree must be 0 or 1".into()));
        }
        let index = build_index(&partition);
        Ok(PwPolyScalar {
            partition,
            degree,
            polys,
            index,
        })
    }

    pub fn constant_field(partition: Partition, c: f64) -> Self {
        let polys = vec![Poly1::constant(c); partition.len()];
        Self::new(partition, 0, polys).expect("constant field")
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn polys(&self) -> &[Poly1] {
        &self.polys
    }

    /// Polynomial on `elem`, which may be any descendant of a carrier element.
    pub fn poly_on(&self, forest: &MeshForest, elem: ElementId) -> Result<&Poly1> {
        resolve(forest, &self.index, elem).map(|i| &self.polys[i])
    }

    pub fn eval_on(&self, forest: &MeshForest, elem: ElementId, p: Point) -> Result<f64> {
        Ok(self.poly_on(forest, elem)?.eval(p))
    }

    /// Per-element coefficients in element-id order.
    pub fn dump(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "pw-scalar degree {}", self.degree)?;
        for (id, poly) in self.partition.iter().zip(&self.polys) {
            writeln!(out, "{id} {} {} {}", poly.c0, poly.cx, poly.cy)?;
        }
        Ok(())
    }
}

impl PwPolyMatrix {
    pub fn new(
        partition: Partition,
        degree: usize,
        polys: Vec<MatPoly1>,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        if polys.len() != partition.len() {
            return Err(Error::InvalidParameter(
                "one matrix polynomial per partition element required".into(),
            ));
        }
        if degree > 1 {
            return Err(Error::InvalidParameter("degree must be 0 or 1".into()));
        }
        if let Some((r, m)) = bounds {
            if !(r > 0.0 && r <= m) {
                return Err(Error::InvalidParameter(format!(
                    "invalid spectral bounds ({r}, {m})"
                )));
            }
        }
        let index = build_index(&partition);
        Ok(PwPolyMatrix {
            partition,
            degree,
            polys,
            bounds,
            index,
        })
    }

    pub fn constant_field(partition: Partition, m: SymMat2) -> Self {
        let (lo, hi) = m.eigenvalues();
        let polys = vec![MatPoly1::constant(m); partition.len()];
        Self::new(partition, 0, polys, Some((lo, hi))).expect("constant matrix field")
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn polys(&self) -> &[MatPoly1] {
        &self.polys
    }

    /// Certified (lower eigenvalue bound, upper eigenvalue bound), if any.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    pub fn certified_lower(&self) -> Result<f64> {
        self.bounds
            .map(|(r, _)| r)
            .ok_or(Error::UncertifiedCoefficient)
    }

    pub fn poly_on(&self, forest: &MeshForest, elem: ElementId) -> Result<&MatPoly1> {
        resolve(forest, &self.index, elem).map(|i| &self.polys[i])
    }

    pub fn eval_on(&self, forest: &MeshForest, elem: ElementId, p: Point) -> Result<SymMat2> {
        Ok(self.poly_on(forest, elem)?.eval(p))
    }

    /// Same field scaled by a positive constant.
    pub fn scaled(&self, c: f64) -> Result<PwPolyMatrix> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        PwPolyMatrix::new(
            self.partition.clone(),
            self.degree,
            self.polys.iter().map(|p| p.scale(c)).collect(),
            self.bounds.map(|(r, m)| (c * r, c * m)),
        )
    }

    pub fn dump(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "pw-matrix degree {}", self.degree)?;
        for (id, m) in self.partition.iter().zip(&self.polys) {
            writeln!(
                out,
                "{id} {} {} {} {} {} {} {} {} {}",
                m.a11.c0, m.a11.cx, m.a11.cy, m.a12.c0, m.a12.cx, m.a12.cy, m.a22.c0, m.a22.cx,
                m.a22.cy
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn eigenvalues_of_symmetric_matrix() {
        let m = SymMat2 {
            a11: 2.0,
            a12: 1.0,
            a22: 2.0,
        };
        let (lo, hi) = m.eigenvalues();
        assert!((lo - 1.0).abs() < 1e-15);
        assert!((hi - 3.0).abs() < 1e-15);
        assert!((m.spectral_norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn ancestor_lookup_resolves_descendants() {
        let mut f = unit_square();
        let coarse = f.active_partition();
        let field = PwPolyScalar::new(
            coarse.clone(),
            1,
            vec![
                Poly1 {
                    c0: 1.0,
                    cx: 2.0,
                    cy: 0.0,
                },
                Poly1 {
                    c0: -1.0,
                    cx: 0.0,
                    cy: 3.0,
                },
            ],
        )
        .unwrap();
        f.refine_uniform(2);
        for id in f.active_partition().iter() {
            let c = crate::geometry::centroid(&f.triangle(id));
            let got = field.eval_on(&f, id, c).unwrap();
            // ancestor is determined by which coarse triangle contains c
            let root = {
                let mut cur = id;
                while let Some(p) = f.node(cur).parent {
                    cur = p;
                }
                cur
            };
            let want = field.polys()[root].eval(c);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn field_on_finer_partition_rejects_coarse_elements() {
        let mut f = unit_square();
        f.refine_uniform(1);
        let fine = f.active_partition();
        let field = PwPolyScalar::constant_field(fine, 1.0);
        // roots are strictly coarser than the carrier partition
        assert!(matches!(
            field.poly_on(&f, 0),
            Err(Error::PartitionMismatch(0))
        ));
    }
}
