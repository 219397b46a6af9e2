//! Numerical integration on triangles.
//!
//! Fixed symmetric Gauss rules cover polynomial integrands (assembly, P1
//! moments). `integrate_adaptive` handles integrands that jump across
//! interfaces the mesh does not resolve: it subdivides a triangle into four
//! similar children and accepts a cell once the coarse and refined estimates
//! agree within the tolerance scaled by the cell's area fraction.

use crate::geometry::{self, Point, Triangle};

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the nodes.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to one; scaled by the triangle area at use sites.
    pub weights: Vec<f64>,
    /// Largest total polynomial degree integrated exactly.
    pub exactness_degree: usize,
}

impl QuadratureRule {
    /// Edge-midpoint rule, exact for quadratics. Used for P1 mass terms.
    pub fn degree2() -> &'static QuadratureRule {
        use std::sync::OnceLock;
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| QuadratureRule {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            exactness_degree: 2,
        })
    }

    /// Six-point symmetric rule, exact for quartics. Default assembly rule.
    /// Node and weight parameters in closed form, so the weights sum to one
    /// to machine precision.
    pub fn degree4() -> &'static QuadratureRule {
        use std::sync::OnceLock;
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let s = 10.0_f64.sqrt();
            let t = (38.0 - 8.8 * s).sqrt();
            let a1 = (8.0 - s + t) / 18.0;
            let a2 = (8.0 - s - t) / 18.0;
            let d = (213125.0 - 53320.0 * s).sqrt();
            let w1 = (620.0 + d) / 3720.0;
            let w2 = (620.0 - d) / 3720.0;
            QuadratureRule {
                points: vec![
                    [1.0 - 2.0 * a1, a1, a1],
                    [a1, 1.0 - 2.0 * a1, a1],
                    [a1, a1, 1.0 - 2.0 * a1],
                    [1.0 - 2.0 * a2, a2, a2],
                    [a2, 1.0 - 2.0 * a2, a2],
                    [a2, a2, 1.0 - 2.0 * a2],
                ],
                weights: vec![w1, w1, w1, w2, w2, w2],
                exactness_degree: 4,
            }
        })
    }

    /// Degree-8 reference rule: a 5x5 Gauss-Legendre tensor rule collapsed
    /// onto the triangle. 25 positive-weight points from closed-form
    /// constants; used to cross-check the adaptive scheme.
    pub fn degree8() -> &'static QuadratureRule {
        use std::sync::OnceLock;
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| {
            // 5-point Gauss-Legendre on [-1, 1]
            let q = (10.0_f64 / 7.0).sqrt();
            let n1 = (5.0 - 2.0 * q).sqrt() / 3.0;
            let n2 = (5.0 + 2.0 * q).sqrt() / 3.0;
            let s70 = 70.0_f64.sqrt();
            let gl_nodes = [-n2, -n1, 0.0, n1, n2];
            let gl_weights = [
                (322.0 - 13.0 * s70) / 900.0,
                (322.0 + 13.0 * s70) / 900.0,
                128.0 / 225.0,
                (322.0 + 13.0 * s70) / 900.0,
                (322.0 - 13.0 * s70) / 900.0,
            ];
            // map to [0, 1]: node (n+1)/2, weight w/2
            let mut points = Vec::with_capacity(25);
            let mut weights = Vec::with_capacity(25);
            for i in 0..5 {
                let u = 0.5 * (gl_nodes[i] + 1.0);
                let wu = 0.5 * gl_weights[i];
                for j in 0..5 {
                    let v = 0.5 * (gl_nodes[j] + 1.0);
                    let wv = 0.5 * gl_weights[j];
                    // collapsed map (u, v) -> (x, y) = (u, v(1-u)),
                    // Jacobian (1-u); weights normalized by the area 1/2
                    let x = u;
                    let y = v * (1.0 - u);
                    points.push([1.0 - x - y, x, y]);
                    weights.push(2.0 * wu * wv * (1.0 - u));
                }
            }
            QuadratureRule {
                points,
                weights,
                exactness_degree: 8,
            }
        })
    }
}

/// Fixed-rule integral of `f` over `tri`.
pub fn integrate(f: impl Fn(Point) -> f64, tri: &Triangle, rule: &QuadratureRule) -> f64 {
    let a = geometry::area(tri);
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        acc += w * f(geometry::from_barycentric(tri, *p));
    }
    a * acc
}

/// Fixed-rule integral of a vector-valued integrand; one pass shares the
/// evaluation of `f` between all components.
pub fn integrate_vec<const N: usize>(
    f: impl Fn(Point) -> [f64; N],
    tri: &Triangle,
    rule: &QuadratureRule,
) -> [f64; N] {
    let a = geometry::area(tri);
    let mut acc = [0.0; N];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = f(geometry::from_barycentric(tri, *p));
        for i in 0..N {
            acc[i] += w * v[i];
        }
    }
    for x in &mut acc {
        *x *= a;
    }
    acc
}

/// Controls for the subdivision quadrature.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveQuad {
    pub tol: f64,
    pub max_depth: usize,
}

impl Default for AdaptiveQuad {
    fn default() -> Self {
        AdaptiveQuad {
            tol: 1e-8,
            max_depth: 12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult<const N: usize> {
    pub values: [f64; N],
    /// True when some cell was accepted only because `max_depth` was hit;
    /// the values are then the best available estimate.
    pub depth_exceeded: bool,
}

/// Adaptive integral of a scalar integrand.
pub fn integrate_adaptive(
    f: impl Fn(Point) -> f64,
    tri: &Triangle,
    opts: &AdaptiveQuad,
) -> AdaptiveResult<1> {
    integrate_adaptive_vec(|p| [f(p)], tri, opts)
}

/// Adaptive integral of a vector integrand. All components must pass the
/// acceptance test for a cell to be accepted.
pub fn integrate_adaptive_vec<const N: usize>(
    f: impl Fn(Point) -> [f64; N],
    tri: &Triangle,
    opts: &AdaptiveQuad,
) -> AdaptiveResult<N> {
    assert!(opts.tol > 0.0, "adaptive quadrature needs tol > 0");
    let root_area = geometry::area(tri);
    let rule = QuadratureRule::degree4();
    let mut total = [0.0; N];
    let mut depth_exceeded = false;
    // (cell, depth, coarse estimate of the cell, agreed at the parent level).
    // A cell is accepted only after coarse and refined estimates agree at
    // two consecutive levels; a single agreement can be accidental when the
    // integrand jumps inside the cell.
    let mut stack: Vec<(Triangle, usize, [f64; N], bool)> =
        vec![(*tri, 0, integrate_vec(&f, tri, rule), false)];
    while let Some((cell, depth, coarse, parent_agreed)) = stack.pop() {
        let kids = split4(&cell);
        let mut refined = [0.0; N];
        let mut kid_vals = [[0.0; N]; 4];
        for (k, kid) in kids.iter().enumerate() {
            kid_vals[k] = integrate_vec(&f, kid, rule);
            for i in 0..N {
                refined[i] += kid_vals[k][i];
            }
        }
        let budget = opts.tol * (geometry::area(&cell) / root_area);
        let agree = (0..N).all(|i| (refined[i] - coarse[i]).abs() <= budget);
        if (agree && parent_agreed) || depth >= opts.max_depth {
            if !agree {
                depth_exceeded = true;
            }
            for i in 0..N {
                total[i] += refined[i];
            }
        } else {
            for (k, kid) in kids.iter().enumerate() {
                stack.push((*kid, depth + 1, kid_vals[k], agree));
            }
        }
    }
    AdaptiveResult {
        values: total,
        depth_exceeded,
    }
}

fn split4(t: &Triangle) -> [Triangle; 4] {
    let m01 = geometry::midpoint(t[0], t[1]);
    let m12 = geometry::midpoint(t[1], t[2]);
    let m20 = geometry::midpoint(t[2], t[0]);
    [
        [t[0], m01, m20],
        [m01, t[1], m12],
        [m20, m12, t[2]],
        [m01, m12, m20],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: Triangle = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    /// Exact monomial moments over the reference triangle:
    /// integral of x^a y^b equals a! b! / (a+b+2)!.
    fn exact_moment(a: u32, b: u32) -> f64 {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check_exactness(rule: &QuadratureRule) {
        for a in 0..=rule.exactness_degree as u32 {
            for b in 0..=(rule.exactness_degree as u32 - a) {
                let got = integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32), &REF, rule);
                let want = exact_moment(a, b);
                assert!(
                    (got - want).abs() <= 1e-14 * (1.0 + want.abs()),
                    "x^{a} y^{b}: got {got}, want {want}"
                );
            }
        }
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-13);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rules_integrate_monomials_exactly() {
        check_exactness(QuadratureRule::degree2());
        check_exactness(QuadratureRule::degree4());
        check_exactness(QuadratureRule::degree8());
    }

    #[test]
    fn constant_and_linear_moments() {
        let t: Triangle = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((integrate(|_| 1.0, &t, QuadratureRule::degree2()) - 0.5).abs() < 1e-15);
        assert!((integrate(|p| p[0], &t, QuadratureRule::degree2()) - 1.0 / 6.0).abs() < 1e-15);
        // x^2 y with a degree-4 rule: exact value 1/60
        let v = integrate(|p| p[0] * p[0] * p[1], &t, QuadratureRule::degree4());
        assert!((v - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn linearity_and_positivity() {
        let rule = QuadratureRule::degree4();
        let f = |p: Point| (3.1 * p[0]).sin();
        let g = |p: Point| (p[1] * 2.0).cos();
        let lhs = integrate(|p| 2.5 * f(p) - 1.25 * g(p), &REF, rule);
        let rhs = 2.5 * integrate(f, &REF, rule) - 1.25 * integrate(g, &REF, rule);
        assert!((lhs - rhs).abs() < 1e-14);
        let pos = integrate(|p| p[0] * p[0] + 0.1, &REF, rule);
        assert!(pos > 0.0);
    }

    /// Area of the intersection of a convex polygon with a half plane
    /// n.x >= c, via Sutherland-Hodgman clipping. Independent oracle for the
    /// adaptive rule on discontinuous integrands.
    fn clip_area(poly: &[Point], n: Point, c: f64) -> f64 {
        let side = |p: Point| n[0] * p[0] + n[1] * p[1] - c;
        let mut out: Vec<Point> = Vec::new();
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let (sa, sb) = (side(a), side(b));
            if sa >= 0.0 {
                out.push(a);
            }
            if (sa > 0.0) != (sb > 0.0) && sa != sb {
                let t = sa / (sa - sb);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        if out.len() < 3 {
            return 0.0;
        }
        let mut area = 0.0;
        for i in 1..out.len() - 1 {
            area += crate::geometry::signed_area(&[out[0], out[i], out[i + 1]]);
        }
        area.abs()
    }

    #[test]
    fn adaptive_indicator_matches_polygon_clipping() {
        // indicator of the half plane x > 0.25; exact area 9/32
        let f = |p: Point| if p[0] > 0.25 { 1.0 } else { 0.0 };
        let oracle = clip_area(&REF, [1.0, 0.0], 0.25);
        assert!((oracle - 9.0 / 32.0).abs() < 1e-15);
        let opts = AdaptiveQuad {
            tol: 1e-6,
            max_depth: 20,
        };
        let got = integrate_adaptive(f, &REF, &opts);
        assert!(
            (got.values[0] - 9.0 / 32.0).abs() < 1e-6,
            "got {}",
            got.values[0]
        );

        // a slanted cut through a non-reference triangle
        let t: Triangle = [[-1.0, 0.0], [2.0, -0.5], [0.5, 2.0]];
        let n = [0.6, 0.8];
        let g = |p: Point| if n[0] * p[0] + n[1] * p[1] > 0.3 { 2.0 } else { 0.0 };
        let want = 2.0 * clip_area(&t, n, 0.3);
        let got = integrate_adaptive(g, &t, &opts);
        assert!(
            (got.values[0] - want).abs() < 1e-5 * (1.0 + want),
            "got {} want {want}",
            got.values[0]
        );
    }

    #[test]
    fn adaptive_smooth_matches_degree8() {
        // gentle integrand: the fixed degree-8 rule resolves it well below
        // the adaptive tolerance, so the two must agree at that tolerance
        let f = |p: Point| (p[0] + 0.5 * p[1]).sin() + p[0] * p[1];
        let want = integrate(f, &REF, QuadratureRule::degree8());
        let got = integrate_adaptive(f, &REF, &AdaptiveQuad::default());
        assert!(!got.depth_exceeded);
        assert!((got.values[0] - want).abs() < 1e-8);
    }

    #[test]
    fn adaptive_constant_accepts_at_depth_zero() {
        let t: Triangle = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let got = integrate_adaptive(|_| 3.25, &t, &AdaptiveQuad::default());
        assert!((got.values[0] - 3.25 * 2.0).abs() < 1e-13);
        assert!(!got.depth_exceeded);
    }

    #[test]
    fn adaptive_reports_depth_exhaustion() {
        let f = |p: Point| if p[0] > 0.3 { 1.0 } else { 0.0 };
        let got = integrate_adaptive(
            f,
            &REF,
            &AdaptiveQuad {
                tol: 1e-12,
                max_depth: 3,
            },
        );
        assert!(got.depth_exceeded);
        // still a usable estimate
        assert!((got.values[0] - 0.245).abs() < 0.05);
    }
}
