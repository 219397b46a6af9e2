//! Adaptive Lq approximation of problem data (right-hand side and diffusion
//! matrix) on the bisection forest: local best-polynomial errors, the
//! greedy refine-the-worst loop, positivity repair for matrix approximants,
//! and the integrability-range arithmetic for rough coefficients.

mod greedy;
mod repair;

pub use greedy::{coeff, greedy, rhs, ApproxOptions, CoeffOutcome, GreedyOutcome, RhsOutcome};
pub use repair::{repair_positivity, RepairCase};

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Triangle};
use crate::poly::{MatPoly1, Poly1, SymMat2};
use crate::quadrature::{self, AdaptiveQuad, QuadratureRule};

/// Lebesgue exponent q in [2, inf].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lq {
    Finite(f64),
    Inf,
}

impl Lq {
    pub fn new(q: f64) -> Result<Lq> {
        if q.is_infinite() && q > 0.0 {
            Ok(Lq::Inf)
        } else if q >= 2.0 && q.is_finite() {
            Ok(Lq::Finite(q))
        } else {
            Err(Error::InvalidParameter(format!(
                "Lebesgue exponent must be in [2, inf], got {q}"
            )))
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Lq::Inf)
    }

    /// Aggregate a slice of nonnegative local quantities: the lq sum for
    /// finite q, the maximum for q = inf.
    pub fn aggregate(&self, values: impl Iterator<Item = f64>) -> f64 {
        match self {
            Lq::Finite(q) => values.map(|v| v.powf(*q)).sum::<f64>().powf(1.0 / q),
            Lq::Inf => values.fold(0.0, f64::max),
        }
    }
}

impl std::fmt::Display for Lq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lq::Finite(q) => write!(f, "{q}"),
            Lq::Inf => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Lq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Lq> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Lq::Inf);
        }
        let q: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse exponent {s:?}")))?;
        Lq::new(q)
    }
}

/// Exact pointwise evaluators for the problem data with certified spectral
/// bounds of the diffusion matrix.
pub struct CoefficientOracle {
    pub eval_a: Box<dyn Fn(Point) -> SymMat2 + Send + Sync>,
    pub eval_f: Box<dyn Fn(Point) -> f64 + Send + Sync>,
    /// Certified lower bound of the smallest eigenvalue, positive.
    pub r: f64,
    /// Certified upper bound of the largest eigenvalue.
    pub m: f64,
    /// Locations of point singularities of the solution or data; quadrature
    /// hint only.
    pub singular_points: Vec<Point>,
}

impl CoefficientOracle {
    pub fn new(
        eval_a: Box<dyn Fn(Point) -> SymMat2 + Send + Sync>,
        eval_f: Box<dyn Fn(Point) -> f64 + Send + Sync>,
        r: f64,
        m: f64,
        singular_points: Vec<Point>,
    ) -> Result<CoefficientOracle> {
        if !(r > 0.0 && r <= m && m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spectral bounds must satisfy 0 < r <= M, got ({r}, {m})"
            )));
        }
        Ok(CoefficientOracle {
            eval_a,
            eval_f,
            r,
            m,
            singular_points,
        })
    }

    /// Constant-coefficient oracle, mostly for tests and sanity baselines.
    pub fn constant(a: SymMat2, f: f64) -> CoefficientOracle {
        let (r, m) = a.eigenvalues();
        CoefficientOracle {
            eval_a: Box::new(move |_| a),
            eval_f: Box::new(move |_| f),
            r,
            m,
            singular_points: Vec::new(),
        }
    }
}

/// Best-approximation error of a scalar on one element together with the
/// approximant realizing it (for q > 2 a surrogate: the L2 projection
/// measured in Lq; for q = inf the sampled half-range construction).
#[derive(Debug, Clone, Copy)]
pub struct LocalFit {
    pub error: f64,
    pub poly: Poly1,
}

/// Barycentric lattice with n subdivisions, vertices included.
fn lattice_points(tri: &Triangle, n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let l = [
                i as f64 / n as f64,
                j as f64 / n as f64,
                (n - i - j) as f64 / n as f64,
            ];
            pts.push(geometry::from_barycentric(tri, l));
        }
    }
    pts
}

const SUP_LATTICE: usize = 20;

/// L2 projection onto polynomials of degree <= `degree` plus the squared L2
/// residual. The linear fit uses the centered, diameter-scaled monomial
/// basis so the Gram solve stays well conditioned on small far-off elements.
fn l2_fit(
    g: &dyn Fn(Point) -> f64,
    tri: &Triangle,
    degree: usize,
    quad: &AdaptiveQuad,
) -> Result<(Poly1, f64)> {
    let area = geometry::area(tri);
    match degree {
        0 => {
            let ints = quadrature::integrate_adaptive_vec(|p| [g(p), g(p) * g(p)], tri, quad);
            let mean = ints.values[0] / area;
            let e2 = (ints.values[1] - ints.values[0] * ints.values[0] / area).max(0.0);
            Ok((Poly1::constant(mean), e2))
        }
        1 => {
            let c = geometry::centroid(tri);
            let h = geometry::diameter(tri);
            let xs = move |p: Point| (p[0] - c[0]) / h;
            let ys = move |p: Point| (p[1] - c[1]) / h;
            // moments of g against the local basis plus the squared norm
            let m = quadrature::integrate_adaptive_vec(
                |p| {
                    let v = g(p);
                    [v, v * xs(p), v * ys(p), v * v]
                },
                tri,
                quad,
            )
            .values;
            // Gram matrix of {1, X, Y}: entries are quadratics, the
            // edge-midpoint rule is exact
            let rule = QuadratureRule::degree2();
            let mut gram = [[0.0; 3]; 3];
            for (bp, w) in rule.points.iter().zip(&rule.weights) {
                let p = geometry::from_barycentric(tri, *bp);
                let basis = [1.0, xs(p), ys(p)];
                for i in 0..3 {
                    for j in 0..3 {
                        gram[i][j] += w * area * basis[i] * basis[j];
                    }
                }
            }
            let coeff = solve3(gram, [m[0], m[1], m[2]])?;
            let e2 = (m[3] - coeff[0] * m[0] - coeff[1] * m[1] - coeff[2] * m[2]).max(0.0);
            // back to global coordinates
            let poly = Poly1 {
                c0: coeff[0] - coeff[1] * c[0] / h - coeff[2] * c[1] / h,
                cx: coeff[1] / h,
                cy: coeff[2] / h,
            };
            Ok((poly, e2))
        }
        d => Err(Error::InvalidParameter(format!(
            "approximation degree must be 0 or 1, got {d}"
        ))),
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    for k in 0..3 {
        let piv = (k..3)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[piv][k].abs() < 1e-300 {
            return Err(Error::InvalidParameter("singular local Gram matrix".into()));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut s = b[k];
        for j in k + 1..3 {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

/// Local best-approximation error in Lq(T); see `LocalFit` for exactly what
/// is computed per exponent regime.
pub fn local_best(
    g: &dyn Fn(Point) -> f64,
    tri: &Triangle,
    q: Lq,
    degree: usize,
    quad: &AdaptiveQuad,
) -> Result<LocalFit> {
    match q {
        Lq::Finite(qv) if qv == 2.0 => {
            let (poly, e2) = l2_fit(g, tri, degree, quad)?;
            Ok(LocalFit {
                error: e2.sqrt(),
                poly,
            })
        }
        Lq::Finite(qv) => {
            let (poly, _) = l2_fit(g, tri, degree, quad)?;
            let eq = quadrature::integrate_adaptive(
                |p| (g(p) - poly.eval(p)).abs().powf(qv),
                tri,
                quad,
            )
            .values[0]
                .max(0.0);
            Ok(LocalFit {
                error: eq.powf(1.0 / qv),
                poly,
            })
        }
        Lq::Inf => {
            let base = if degree == 0 {
                Poly1::constant(0.0)
            } else {
                l2_fit(g, tri, degree, quad)?.0
            };
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in lattice_points(tri, SUP_LATTICE) {
                let r = g(p) - base.eval(p);
                lo = lo.min(r);
                hi = hi.max(r);
            }
            let mut poly = base;
            poly.c0 += 0.5 * (hi + lo);
            Ok(LocalFit {
                error: 0.5 * (hi - lo),
                poly,
            })
        }
    }
}

/// Matrix-valued local error: entrywise errors of the three independent
/// entries aggregated in lq, sharing one integration pass per element.
pub fn local_best_matrix(
    a: &dyn Fn(Point) -> SymMat2,
    tri: &Triangle,
    q: Lq,
    degree: usize,
    quad: &AdaptiveQuad,
) -> Result<(f64, MatPoly1)> {
    let area = geometry::area(tri);
    let (polys, l2_errors): ([Poly1; 3], [f64; 3]) = match degree {
        // the sup-norm constant fit needs no integrals, only the sampled
        // ranges below
        0 if q.is_inf() => ([Poly1::constant(0.0); 3], [0.0; 3]),
        0 => {
            let ints = quadrature::integrate_adaptive_vec(
                |p| {
                    let m = a(p);
                    [m.a11, m.a12, m.a22, m.a11 * m.a11, m.a12 * m.a12, m.a22 * m.a22]
                },
                tri,
                quad,
            )
            .values;
            let mut polys = [Poly1::constant(0.0); 3];
            let mut errs = [0.0; 3];
            for e in 0..3 {
                polys[e] = Poly1::constant(ints[e] / area);
                errs[e] = (ints[3 + e] - ints[e] * ints[e] / area).max(0.0).sqrt();
            }
            (polys, errs)
        }
        1 => {
            let c = geometry::centroid(tri);
            let h = geometry::diameter(tri);
            let xs = move |p: Point| (p[0] - c[0]) / h;
            let ys = move |p: Point| (p[1] - c[1]) / h;
            let ints = quadrature::integrate_adaptive_vec(
                |p| {
                    let m = a(p);
                    let (x, y) = (xs(p), ys(p));
                    [
                        m.a11,
                        m.a11 * x,
                        m.a11 * y,
                        m.a11 * m.a11,
                        m.a12,
                        m.a12 * x,
                        m.a12 * y,
                        m.a12 * m.a12,
                        m.a22,
                        m.a22 * x,
                        m.a22 * y,
                        m.a22 * m.a22,
                    ]
                },
                tri,
                quad,
            )
            .values;
            let rule = QuadratureRule::degree2();
            let mut gram = [[0.0; 3]; 3];
            for (bp, w) in rule.points.iter().zip(&rule.weights) {
                let p = geometry::from_barycentric(tri, *bp);
                let basis = [1.0, xs(p), ys(p)];
                for i in 0..3 {
                    for j in 0..3 {
                        gram[i][j] += w * area * basis[i] * basis[j];
                    }
                }
            }
            let mut polys = [Poly1::constant(0.0); 3];
            let mut errs = [0.0; 3];
            for e in 0..3 {
                let m = [ints[4 * e], ints[4 * e + 1], ints[4 * e + 2]];
                let coeff = solve3(gram, m)?;
                errs[e] = (ints[4 * e + 3] - coeff[0] * m[0] - coeff[1] * m[1] - coeff[2] * m[2])
                    .max(0.0)
                    .sqrt();
                polys[e] = Poly1 {
                    c0: coeff[0] - coeff[1] * c[0] / h - coeff[2] * c[1] / h,
                    cx: coeff[1] / h,
                    cy: coeff[2] / h,
                };
            }
            (polys, errs)
        }
        d => {
            return Err(Error::InvalidParameter(format!(
                "approximation degree must be 0 or 1, got {d}"
            )))
        }
    };

    let mat = MatPoly1 {
        a11: polys[0],
        a12: polys[1],
        a22: polys[2],
    };
    let error = match q {
        Lq::Finite(qv) if qv == 2.0 => Lq::Finite(2.0).aggregate(l2_errors.iter().copied()),
        Lq::Finite(qv) => {
            // entrywise lq of the Lq entry errors equals the 1/q power of
            // the summed residual integrals
            let res = quadrature::integrate_adaptive_vec(
                |p| {
                    let m = a(p);
                    let b = mat.eval(p);
                    [
                        (m.a11 - b.a11).abs().powf(qv),
                        (m.a12 - b.a12).abs().powf(qv),
                        (m.a22 - b.a22).abs().powf(qv),
                    ]
                },
                tri,
                quad,
            )
            .values;
            res.iter().map(|v| v.max(0.0)).sum::<f64>().powf(1.0 / qv)
        }
        Lq::Inf => {
            // per-entry sampled residual half ranges; the approximant entry
            // is the fit shifted to the middle of its residual range
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in lattice_points(tri, SUP_LATTICE) {
                let m = a(p);
                let b = mat.eval(p);
                for (e, v) in [m.a11 - b.a11, m.a12 - b.a12, m.a22 - b.a22]
                    .into_iter()
                    .enumerate()
                {
                    lo[e] = lo[e].min(v);
                    hi[e] = hi[e].max(v);
                }
            }
            let mut shifted = mat;
            shifted.a11.c0 += 0.5 * (hi[0] + lo[0]);
            shifted.a12.c0 += 0.5 * (hi[1] + lo[1]);
            shifted.a22.c0 += 0.5 * (hi[2] + lo[2]);
            let err = (0..3).map(|e| 0.5 * (hi[e] - lo[e])).fold(0.0, f64::max);
            return Ok((err, shifted));
        }
    };
    Ok((error, mat))
}

/// Parameters of the gradient-integrability estimate for rough
/// coefficients: the Lipschitz-domain limit exponent P of the Laplacian,
/// its norm constant K, and the spectral bounds of the coefficient.
#[derive(Debug, Clone, Copy)]
pub struct MeyersParams {
    pub p_limit: f64,
    pub k_norm: f64,
    pub r: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MeyersRange {
    pub p_star: f64,
    params: MeyersParams,
}

/// eta(p) = (1/2 - 1/p) / (1/2 - 1/P), rising from 0 at p = 2 to 1 at p = P.
pub fn meyers_eta(params: &MeyersParams, p: f64) -> f64 {
    (0.5 - 1.0 / p) / (0.5 - 1.0 / params.p_limit)
}

/// Largest exponent p* in (2, P) with K^eta(p) (1 - t) < 1, plus the norm
/// constant C(p) valid for p below p*(r/M).
pub fn meyers_range(params: &MeyersParams, t: f64) -> Result<MeyersRange> {
    if !(params.p_limit > 2.0) || !(params.k_norm >= 1.0) {
        return Err(Error::InvalidParameter(
            "need P > 2 and K >= 1 in the integrability estimate".into(),
        ));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contrast parameter t must be in (0, 1), got {t}"
        )));
    }
    let p_star = if params.k_norm == 1.0 {
        // K^eta = 1 and 1 - t < 1: the whole range survives
        params.p_limit
    } else {
        let eta_star = ((1.0 / (1.0 - t)).ln() / params.k_norm.ln()).min(1.0);
        if eta_star >= 1.0 {
            params.p_limit
        } else {
            1.0 / (0.5 - eta_star * (0.5 - 1.0 / params.p_limit))
        }
    };
    Ok(MeyersRange {
        p_star,
        params: *params,
    })
}

impl MeyersRange {
    /// C(p) = (1/M) K^eta(p) / (1 - K^eta(p) (1 - r/M)); defined while the
    /// denominator stays positive, i.e. p < p*(r/M).
    pub fn constant(&self, p: f64) -> Result<f64> {
        if !(p >= 2.0) {
            return Err(Error::InvalidParameter("need p >= 2".into()));
        }
        let eta = meyers_eta(&self.params, p);
        let ke = self.params.k_norm.powf(eta);
        let denom = 1.0 - ke * (1.0 - self.params.r / self.params.m);
        if denom <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "norm constant undefined at p = {p} (beyond the integrability range)"
            )));
        }
        Ok(ke / (self.params.m * denom))
    }
}
