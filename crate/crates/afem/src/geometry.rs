//! Small planar geometry helpers shared by the mesh, quadrature and
//! assembly code.

pub type Point = [f64; 2];
/// Vertex coordinates of a triangle, counter-clockwise.
pub type Triangle = [Point; 3];

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn dist(a: Point, b: Point) -> f64 {
    sub(a, b)[0].hypot(sub(a, b)[1])
}

pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

pub fn signed_area(t: &Triangle) -> f64 {
    0.5 * cross(sub(t[1], t[0]), sub(t[2], t[0]))
}

pub fn area(t: &Triangle) -> f64 {
    signed_area(t).abs()
}

/// Longest edge length.
pub fn diameter(t: &Triangle) -> f64 {
    dist(t[0], t[1]).max(dist(t[1], t[2])).max(dist(t[2], t[0]))
}

pub fn centroid(t: &Triangle) -> Point {
    [
        (t[0][0] + t[1][0] + t[2][0]) / 3.0,
        (t[0][1] + t[1][1] + t[2][1]) / 3.0,
    ]
}

/// Map barycentric coordinates to physical coordinates.
pub fn from_barycentric(t: &Triangle, l: [f64; 3]) -> Point {
    [
        l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0],
        l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1],
    ]
}

/// Smallest interior angle in radians.
pub fn min_angle(t: &Triangle) -> f64 {
    let mut smallest = f64::INFINITY;
    for i in 0..3 {
        let a = t[i];
        let u = sub(t[(i + 1) % 3], a);
        let v = sub(t[(i + 2) % 3], a);
        let c = dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt());
        smallest = smallest.min(c.clamp(-1.0, 1.0).acos());
    }
    smallest
}

/// Euclidean distance from `p` to the (closed) triangle; zero inside.
pub fn dist_to_triangle(t: &Triangle, p: Point) -> f64 {
    let s = signed_area(t).signum();
    let mut inside = true;
    let mut best = f64::INFINITY;
    for i in 0..3 {
        let a = t[i];
        let b = t[(i + 1) % 3];
        if s * cross(sub(b, a), sub(p, a)) < 0.0 {
            inside = false;
        }
        best = best.min(dist_to_segment(a, b, p));
    }
    if inside {
        0.0
    } else {
        best
    }
}

fn dist_to_segment(a: Point, b: Point, p: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist([a[0] + t * ab[0], a[1] + t * ab[1]], p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: Triangle = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn reference_triangle_measures() {
        assert_eq!(signed_area(&REF), 0.5);
        assert_eq!(diameter(&REF), 2.0_f64.sqrt());
        let deg45 = std::f64::consts::FRAC_PI_4;
        assert!((min_angle(&REF) - deg45).abs() < 1e-14);
    }

    #[test]
    fn barycentric_map_hits_vertices_and_centroid() {
        assert_eq!(from_barycentric(&REF, [1.0, 0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(from_barycentric(&REF, [0.0, 0.0, 1.0]), [0.0, 1.0]);
        let c = from_barycentric(&REF, [1.0 / 3.0; 3]);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15 && (c[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn point_triangle_distance() {
        assert_eq!(dist_to_triangle(&REF, [0.2, 0.2]), 0.0);
        assert!((dist_to_triangle(&REF, [-1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((dist_to_triangle(&REF, [1.0, 1.0]) - 0.5_f64.sqrt()).abs() < 1e-15);
    }
}
