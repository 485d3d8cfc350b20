//! Projection chart for a cell: fit an affine plane, project the contour,
//! and compute the Dirichlet boundary data for the conformal-factor solve.

use crate::geom2;
use crate::net::Polyline3;
use nalgebra::{Matrix3, Point2, Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("contour points are collinear, no plane defined")]
    CollinearInput,
    #[error("contour must be closed with at least 3 points")]
    BadContour,
    #[error("projected contour self-intersects; the plane choice failed")]
    ProjectionNotInjective,
    #[error("degenerate (zero-length) boundary edge at node {0}")]
    DegenerateEdge(usize),
}

/// An orthonormal right-handed frame for a plane in space.
#[derive(Debug, Clone)]
pub struct AffineChart {
    pub origin: Point3<f64>,
    pub basis_u: Vector3<f64>,
    pub basis_v: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl AffineChart {
    fn from_normal(origin: Point3<f64>, normal: Vector3<f64>) -> AffineChart {
        let mut normal = normal.normalize();
        // deterministic sign: make the largest-magnitude component positive
        let k = normal.iamax();
        if normal[k] < 0.0 {
            normal = -normal;
        }
        // basis_u: global axis least aligned with the normal, projected
        let mut axis = Vector3::zeros();
        axis[normal.iamin()] = 1.0;
        let basis_u = (axis - normal * axis.dot(&normal)).normalize();
        let basis_v = normal.cross(&basis_u);
        AffineChart { origin, basis_u, basis_v, normal }
    }

    /// In-plane coordinates of a point.
    pub fn to_plane(&self, p: Point3<f64>) -> Point2<f64> {
        let d = p - self.origin;
        Point2::new(d.dot(&self.basis_u), d.dot(&self.basis_v))
    }

    /// Signed offset of a point along the chart normal.
    pub fn height(&self, p: Point3<f64>) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    /// World position of in-plane coordinates `(u, v)` lifted by `h`.
    pub fn lift(&self, uv: Point2<f64>, h: f64) -> Point3<f64> {
        self.origin + self.basis_u * uv.x + self.basis_v * uv.y + self.normal * h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneStrategy {
    ThreeCorners,
    LeastSquares,
}

/// Fit the projection plane for a contour. `LeastSquares` minimizes squared
/// normal distance over all samples; `ThreeCorners` picks three corner
/// points of the cell contour. The origin is the contour centroid projected
/// to the plane.
pub fn fit_plane(contour: &Polyline3, strategy: PlaneStrategy) -> Result<AffineChart, ProjectionError> {
    let pts = contour.points();
    if !contour.is_closed() || pts.len() < 3 {
        return Err(ProjectionError::BadContour);
    }
    let centroid = Point3::from(
        pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / pts.len() as f64,
    );
    let normal = match strategy {
        PlaneStrategy::LeastSquares => {
            let mut cov = Matrix3::zeros();
            for p in pts {
                let d = p - centroid;
                cov += d * d.transpose();
            }
            let eig = cov.symmetric_eigen();
            // eigenvector of the smallest eigenvalue
            let k = eig.eigenvalues.iamin();
            let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let mut sorted = lam.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // collinear data: two near-zero eigenvalues
            if sorted[1] <= 1e-12 * sorted[2].max(f64::MIN_POSITIVE) {
                return Err(ProjectionError::CollinearInput);
            }
            eig.eigenvectors.column(k).into_owned()
        }
        PlaneStrategy::ThreeCorners => {
            let corners = detect_corners(contour);
            let tri = best_triangle(pts, &corners).ok_or(ProjectionError::CollinearInput)?;
            let n = (pts[tri.1] - pts[tri.0]).cross(&(pts[tri.2] - pts[tri.0]));
            if n.norm() <= 1e-14 * contour.diameter().powi(2) {
                return Err(ProjectionError::CollinearInput);
            }
            n
        }
    };
    let chart = AffineChart::from_normal(centroid, normal);
    Ok(chart)
}

/// Indices of contour nodes with a pronounced turning angle, in index order.
fn detect_corners(contour: &Polyline3) -> Vec<usize> {
    let pts = contour.points();
    let n = pts.len();
    let mut corners = Vec::new();
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        let a = (pts[i] - prev).normalize();
        let b = (next - pts[i]).normalize();
        let turn = a.dot(&b).clamp(-1.0, 1.0).acos();
        if turn > 0.35 {
            corners.push(i);
        }
    }
    corners
}

/// The three candidate indices spanning the largest triangle; falls back to
/// thirds of the contour when fewer than three corners were detected.
fn best_triangle(pts: &[Point3<f64>], corners: &[usize]) -> Option<(usize, usize, usize)> {
    let n = pts.len();
    let candidates: Vec<usize> = if corners.len() >= 3 {
        corners.to_vec()
    } else {
        vec![0, n / 3, 2 * n / 3]
    };
    let mut best = None;
    let mut best_area = 0.0;
    for (ii, &i) in candidates.iter().enumerate() {
        for (jj, &j) in candidates.iter().enumerate().skip(ii + 1) {
            for &k in candidates.iter().skip(jj + 1) {
                let area = (pts[j] - pts[i]).cross(&(pts[k] - pts[i])).norm();
                if area > best_area {
                    best_area = area;
                    best = Some((i, j, k));
                }
            }
        }
    }
    if best_area > 0.0 {
        best
    } else {
        None
    }
}

/// A cell contour expressed in its projection chart: the planar boundary
/// polygon, per-node normal offsets, and the Dirichlet data for the
/// conformal-factor equation.
#[derive(Debug, Clone)]
pub struct CellChart {
    pub chart: AffineChart,
    pub boundary2d: Vec<Point2<f64>>,
    pub heights: Vec<f64>,
    pub dirichlet_g: Vec<f64>,
}

impl CellChart {
    /// World-space contour node `i` reconstructed from the chart.
    pub fn lift_node(&self, i: usize) -> Point3<f64> {
        self.chart.lift(self.boundary2d[i], self.heights[i])
    }

    /// Chart-frame contour: (u, v, height) triples.
    pub fn contour_in_chart(&self) -> Vec<Point3<f64>> {
        self.boundary2d
            .iter()
            .zip(&self.heights)
            .map(|(q, &h)| Point3::new(q.x, q.y, h))
            .collect()
    }

    /// Arc lengths of the planar boundary polygon at each node.
    pub fn planar_arc_lengths(&self) -> Vec<f64> {
        let n = self.boundary2d.len();
        let mut s = Vec::with_capacity(n);
        s.push(0.0);
        for i in 1..n {
            s.push(s[i - 1] + (self.boundary2d[i] - self.boundary2d[i - 1]).norm());
        }
        s
    }
}

/// Project a closed contour onto a chart. Fails with
/// `ProjectionNotInjective` when the planar shadow self-intersects; the
/// caller is expected to retry with a different plane strategy or split the
/// cell. The output polygon is reordered counterclockwise.
pub fn project_contour(
    contour: &Polyline3,
    chart: &AffineChart,
) -> Result<CellChart, ProjectionError> {
    if !contour.is_closed() || contour.num_points() < 3 {
        return Err(ProjectionError::BadContour);
    }
    let mut boundary2d: Vec<Point2<f64>> =
        contour.points().iter().map(|&p| chart.to_plane(p)).collect();
    let mut heights: Vec<f64> = contour.points().iter().map(|&p| chart.height(p)).collect();
    if !geom2::polygon_is_simple(&boundary2d) {
        return Err(ProjectionError::ProjectionNotInjective);
    }
    if geom2::polygon_signed_area2(&boundary2d) < 0.0 {
        boundary2d.reverse();
        heights.reverse();
    }
    Ok(CellChart { chart: chart.clone(), boundary2d, heights, dirichlet_g: Vec::new() })
}

/// Per-node Dirichlet data with the one-sided values kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DirichletData {
    pub g: Vec<f64>,
    pub one_sided: Vec<(f64, f64)>,
}

/// Boundary data for the conformal-factor equation: at each boundary node,
/// half the log of the speed of the contour lift with respect to planar arc
/// length. Each node takes the average of its two one-sided values, which
/// handles contour corners and is second-order accurate on smooth arcs.
pub fn dirichlet_data(cell_chart: &CellChart) -> Result<DirichletData, ProjectionError> {
    let n = cell_chart.boundary2d.len();
    let lift: Vec<Point3<f64>> = (0..n).map(|i| cell_chart.lift_node(i)).collect();
    let mut g = Vec::with_capacity(n);
    let mut one_sided = Vec::with_capacity(n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        let db = (cell_chart.boundary2d[i] - cell_chart.boundary2d[prev]).norm();
        let df = (cell_chart.boundary2d[next] - cell_chart.boundary2d[i]).norm();
        if db <= 0.0 {
            return Err(ProjectionError::DegenerateEdge(prev));
        }
        if df <= 0.0 {
            return Err(ProjectionError::DegenerateEdge(i));
        }
        let speed_b = (lift[i] - lift[prev]).norm() / db;
        let speed_f = (lift[next] - lift[i]).norm() / df;
        let gb = 0.5 * speed_b.ln();
        let gf = 0.5 * speed_f.ln();
        one_sided.push((gb, gf));
        // projection shortens, so each one-sided value is >= 0 up to roundoff
        g.push((0.5 * (gb + gf)).max(0.0));
    }
    Ok(DirichletData { g, one_sided })
}
