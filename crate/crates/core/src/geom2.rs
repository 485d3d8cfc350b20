//! Planar predicates and polygon helpers shared by projection, meshing and
//! the height grid.

use nalgebra::Point2;

/// Exact orientation sign via adaptive-precision arithmetic: > 0 if `c` is
/// left of the directed line `a -> b`.
pub fn orient(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    )
}

fn on_segment(a: Point2<f64>, b: Point2<f64>, p: Point2<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Whether closed segments `[a,b]` and `[c,d]` intersect (exact predicates).
pub fn segments_intersect(
    a: Point2<f64>,
    b: Point2<f64>,
    c: Point2<f64>,
    d: Point2<f64>,
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// O(n^2) simple-polygon test: no two non-adjacent edges may intersect, and
/// adjacent edges may share only their common endpoint.
pub fn polygon_is_simple(poly: &[Point2<f64>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // shared endpoint allowed; any further contact is a fold
                let shared = if j == i + 1 { b } else { a };
                let (e, f) = if j == i + 1 { (c, d) } else { (d, c) };
                debug_assert!(shared == e || shared == f || n == 3);
                // spur: the far endpoint of one edge lies on the other
                if orient(a, b, c) == 0.0 && orient(a, b, d) == 0.0 {
                    // collinear adjacent edges folding back over each other
                    let far = if shared == c { d } else { c };
                    if on_segment(a, b, far) && far != a && far != b {
                        return false;
                    }
                    let far2 = if shared == a { b } else { a };
                    if on_segment(c, d, far2) && far2 != c && far2 != d {
                        return false;
                    }
                }
            } else if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Twice the signed area of a closed polygon (positive = counterclockwise).
pub fn polygon_signed_area2(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc
}

/// Strict point-in-polygon by crossing count. Points on the boundary are
/// classified by `boundary_distance` separately.
pub fn point_in_polygon(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the closest point of the closed polygon boundary,
/// together with (edge index, parameter in [0,1]) of that closest point.
pub fn closest_boundary_point(
    poly: &[Point2<f64>],
    p: Point2<f64>,
) -> (f64, usize, f64) {
    let n = poly.len();
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = a + ab * t;
        let d = (p - q).norm();
        if d < best.0 {
            best = (d, i, t);
        }
    }
    best
}
