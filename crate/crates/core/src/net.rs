//! The input net of curves: polyline geometry, intersections, cells, and the
//! geodesic-compatibility check at crossings.
//!
//! Curves are plain polylines; every differential quantity is a central
//! finite difference in arc length. Cells are part of the input — this module
//! validates them, it does not extract faces from a curve arrangement.

use nalgebra::{Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("polyline has a zero-length segment at index {0}")]
    ZeroLengthSegment(usize),
    #[error("closed polyline stores its first point twice (drop the duplicate last point)")]
    DuplicateClosingPoint,
    #[error("arc-length parameter {s} outside range [0, {max}]")]
    ParamOutOfRange { s: f64, max: f64 },
    #[error("cell {cell} references missing curve {curve}")]
    MissingCurve { cell: usize, curve: usize },
    #[error("intersection {0} references missing curve {1}")]
    IntersectionMissingCurve(usize, usize),
    #[error("intersection {index} position is {dist:.3e} away from curve {curve} at its stated parameter (tol {tol:.3e})")]
    IntersectionOffCurve { index: usize, curve: usize, dist: f64, tol: f64 },
    #[error("cell {cell}: segments {a} and {b} do not share an endpoint (gap {gap:.3e}, tol {tol:.3e})")]
    CellNotClosed { cell: usize, a: usize, b: usize, gap: f64, tol: f64 },
    #[error("cell {cell}: boundary has fewer than 3 distinct points")]
    CellTooSmall { cell: usize },
    #[error("cell {cell}: segment {seg} has an empty parameter interval")]
    EmptySegment { cell: usize, seg: usize },
}

/// An open or closed 3D polyline. For closed curves the first point is
/// stored exactly once; the closing segment is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline3 {
    points: Vec<Point3<f64>>,
    closed: bool,
}

impl Polyline3 {
    pub fn new(points: Vec<Point3<f64>>, closed: bool) -> Result<Polyline3, NetError> {
        if points.len() < 2 {
            return Err(NetError::TooFewPoints(points.len()));
        }
        for i in 1..points.len() {
            if points[i] == points[i - 1] {
                return Err(NetError::ZeroLengthSegment(i - 1));
            }
        }
        if closed && points[0] == points[points.len() - 1] {
            return Err(NetError::DuplicateClosingPoint);
        }
        Ok(Polyline3 { points, closed })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    fn num_segments(&self) -> usize {
        if self.closed { self.points.len() } else { self.points.len() - 1 }
    }

    fn segment(&self, i: usize) -> (Point3<f64>, Point3<f64>) {
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        (a, b)
    }

    /// Cumulative arc length at each node (length = num_points).
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.points.len());
        s.push(0.0);
        for i in 1..self.points.len() {
            s.push(s[i - 1] + (self.points[i] - self.points[i - 1]).norm());
        }
        s
    }

    /// Total arc length, including the implicit closing segment when closed.
    pub fn total_length(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.num_segments() {
            let (a, b) = self.segment(i);
            total += (b - a).norm();
        }
        total
    }

    /// Position at arc-length parameter `s` in `[0, total_length]`.
    pub fn point_at(&self, s: f64) -> Result<Point3<f64>, NetError> {
        let total = self.total_length();
        let tol = 1e-9 * total.max(1.0);
        if s < -tol || s > total + tol {
            return Err(NetError::ParamOutOfRange { s, max: total });
        }
        let mut s = s.clamp(0.0, total);
        for i in 0..self.num_segments() {
            let (a, b) = self.segment(i);
            let len = (b - a).norm();
            if s <= len {
                return Ok(a + (b - a) * (s / len));
            }
            s -= len;
        }
        Ok(self.points[if self.closed { 0 } else { self.points.len() - 1 }])
    }

    /// Bounding-box diagonal of the curve.
    pub fn diameter(&self) -> f64 {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi - lo).norm()
    }

    /// Resample to roughly uniform spacing. Keeps the first point; closed
    /// curves stay closed. The node count is chosen so spacing <= `spacing`.
    pub fn resample(&self, spacing: f64) -> Polyline3 {
        assert!(spacing > 0.0);
        let total = self.total_length();
        let n = ((total / spacing).ceil() as usize).max(if self.closed { 3 } else { 1 });
        let mut pts = Vec::with_capacity(n + 1);
        let count = if self.closed { n } else { n + 1 };
        for k in 0..count {
            let s = total * k as f64 / n as f64;
            pts.push(self.point_at(s).expect("in range"));
        }
        Polyline3::new(pts, self.closed).expect("resampled polyline valid")
    }
}

/// Discrete Frenet data at a point of a polyline.
#[derive(Debug, Clone)]
pub struct FrenetData {
    pub tangent: Vector3<f64>,
    /// `None` when the curvature is below the degeneracy threshold.
    pub principal_normal: Option<Vector3<f64>>,
    pub curvature: f64,
}

/// Tangent, curvature and principal normal from central differences in arc
/// length at the node nearest to `s`. The normal is the component of the
/// second difference orthogonal to the tangent, so the pair is orthogonal by
/// construction even on unevenly sampled polylines.
pub fn estimate_frenet(curve: &Polyline3, s: f64) -> Result<FrenetData, NetError> {
    let total = curve.total_length();
    let tol = 1e-9 * total.max(1.0);
    if s < -tol || s > total + tol {
        return Err(NetError::ParamOutOfRange { s, max: total });
    }
    let s = s.clamp(0.0, total);
    let arcs = curve.arc_lengths();
    let n = curve.num_points();

    // nearest node, wrapping for closed curves
    let mut k = match arcs.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= n {
                if curve.is_closed() && (total - s) < (s - arcs[n - 1]) { 0 } else { n - 1 }
            } else if (s - arcs[i - 1]) <= (arcs[i] - s) {
                i - 1
            } else {
                i
            }
        }
    };

    let (prev, next, d1, d2);
    if curve.is_closed() {
        let kp = (k + n - 1) % n;
        let kn = (k + 1) % n;
        d1 = (curve.points[k] - curve.points[kp]).norm();
        d2 = (curve.points[kn] - curve.points[k]).norm();
        prev = curve.points[kp];
        next = curve.points[kn];
    } else {
        if n == 2 {
            // straight segment: tangent defined, curvature zero
            let t = (curve.points[1] - curve.points[0]).normalize();
            return Ok(FrenetData { tangent: t, principal_normal: None, curvature: 0.0 });
        }
        k = k.clamp(1, n - 2);
        d1 = (curve.points[k] - curve.points[k - 1]).norm();
        d2 = (curve.points[k + 1] - curve.points[k]).norm();
        prev = curve.points[k - 1];
        next = curve.points[k + 1];
    }
    let here = curve.points[k];

    let first = (next - prev) / (d1 + d2);
    // non-uniform central second difference
    let second = (next * d1 - (here.coords * (d1 + d2)).into() + prev * d2).coords
        * (2.0 / (d1 * d2 * (d1 + d2)));

    let tangent = first.normalize();
    let curvature = second.norm();
    let orth = second - tangent * second.dot(&tangent);
    let tol_curv = 1e-8 / curve.diameter();
    let principal_normal =
        if orth.norm() > tol_curv && curvature > tol_curv { Some(orth.normalize()) } else { None };
    Ok(FrenetData { tangent, principal_normal, curvature })
}

/// A recorded crossing between two net curves.
#[derive(Debug, Clone)]
pub struct Intersection {
    pub curve_a: usize,
    pub curve_b: usize,
    pub param_a: f64,
    pub param_b: f64,
    pub position: Point3<f64>,
}

/// One oriented piece of a cell boundary: the parameter interval
/// `[t0, t1]` of a net curve, traversed backwards if `reversed`.
#[derive(Debug, Clone)]
pub struct CellSegment {
    pub curve: usize,
    pub t0: f64,
    pub t1: f64,
    pub reversed: bool,
}

/// A closed region of the net, bounded by curve segments between
/// intersections.
#[derive(Debug, Clone)]
pub struct Cell {
    pub segments: Vec<CellSegment>,
}

#[derive(Debug, Clone)]
pub struct GeodesicNet {
    pub curves: Vec<Polyline3>,
    pub intersections: Vec<Intersection>,
    pub cells: Vec<Cell>,
}

/// Per-intersection outcome of the geodesic-compatibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodecityStatus {
    Pass,
    Fail,
    /// At least one curve is locally straight; counts as compatible.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct GeodecityRecord {
    pub intersection: usize,
    pub status: GeodecityStatus,
    /// Angle between the two principal normals, reduced modulo sign.
    pub angle_defect: f64,
}

impl GeodesicNet {
    /// Structural validation: index ranges, intersection positions, cell
    /// boundary closure. `tol_pos` is the positional tolerance.
    pub fn validate(&self, tol_pos: f64) -> Result<(), NetError> {
        for (i, x) in self.intersections.iter().enumerate() {
            for curve in [x.curve_a, x.curve_b] {
                if curve >= self.curves.len() {
                    return Err(NetError::IntersectionMissingCurve(i, curve));
                }
            }
            for (curve, param) in [(x.curve_a, x.param_a), (x.curve_b, x.param_b)] {
                let p = self.curves[curve].point_at(param)?;
                let dist = (p - x.position).norm();
                if dist > tol_pos {
                    return Err(NetError::IntersectionOffCurve { index: i, curve, dist, tol: tol_pos });
                }
            }
        }
        for (ci, cell) in self.cells.iter().enumerate() {
            for (si, seg) in cell.segments.iter().enumerate() {
                if seg.curve >= self.curves.len() {
                    return Err(NetError::MissingCurve { cell: ci, curve: seg.curve });
                }
                if (seg.t1 - seg.t0).abs() <= 0.0 {
                    return Err(NetError::EmptySegment { cell: ci, seg: si });
                }
            }
            let m = cell.segments.len();
            for si in 0..m {
                let here = &cell.segments[si];
                let next = &cell.segments[(si + 1) % m];
                let end = self.segment_endpoint(here, true)?;
                let start = self.segment_endpoint(next, false)?;
                let gap = (end - start).norm();
                if gap > tol_pos {
                    return Err(NetError::CellNotClosed { cell: ci, a: si, b: (si + 1) % m, gap, tol: tol_pos });
                }
            }
            let contour = self.cell_contour(ci, tol_pos)?;
            if contour.polyline.num_points() < 3 {
                return Err(NetError::CellTooSmall { cell: ci });
            }
        }
        Ok(())
    }

    fn segment_endpoint(&self, seg: &CellSegment, end: bool) -> Result<Point3<f64>, NetError> {
        let t = if end != seg.reversed { seg.t1 } else { seg.t0 };
        self.curves[seg.curve].point_at(t)
    }

    /// Concatenate a cell's boundary segments into one closed polyline.
    /// Each node records which curve and arc-length parameter it came from.
    pub fn cell_contour(&self, cell: usize, tol_pos: f64) -> Result<ResolvedContour, NetError> {
        let cell_ref = &self.cells[cell];
        let mut pts: Vec<Point3<f64>> = Vec::new();
        let mut prov: Vec<(usize, f64)> = Vec::new();
        for seg in &cell_ref.segments {
            let curve = &self.curves[seg.curve];
            let arcs = curve.arc_lengths();
            let total = curve.total_length();
            // parameters of interior nodes strictly inside (t0, t1)
            let mut params: Vec<f64> = vec![seg.t0];
            for &a in &arcs {
                if a > seg.t0 + 1e-12 * total && a < seg.t1 - 1e-12 * total {
                    params.push(a);
                }
            }
            // a closed curve's implicit closing node at total_length
            if curve.is_closed() && total > seg.t0 + 1e-12 * total && total < seg.t1 - 1e-12 * total {
                params.push(total);
            }
            params.push(seg.t1);
            params.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if seg.reversed {
                params.reverse();
            }
            for &t in &params {
                let p = curve.point_at(if curve.is_closed() { t % total } else { t })?;
                if let Some(last) = pts.last() {
                    if (p - last).norm() <= tol_pos {
                        continue;
                    }
                }
                pts.push(p);
                prov.push((seg.curve, t));
            }
        }
        // drop a duplicated closing node
        if pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= tol_pos {
            pts.pop();
            prov.pop();
        }
        let polyline = Polyline3::new(pts, true)?;
        Ok(ResolvedContour { polyline, provenance: prov })
    }
}

/// A cell boundary flattened to a closed polyline, with per-node provenance
/// `(curve id, arc-length parameter)` for mapping split points back onto the
/// net.
#[derive(Debug, Clone)]
pub struct ResolvedContour {
    pub polyline: Polyline3,
    pub provenance: Vec<(usize, f64)>,
}

impl ResolvedContour {
    /// Resample to roughly uniform spacing, interpolating provenance
    /// parameters linearly within each source segment.
    pub fn resample(&self, spacing: f64) -> ResolvedContour {
        let total = self.polyline.total_length();
        let n = ((total / spacing).ceil() as usize).max(3);
        let arcs = self.polyline.arc_lengths();
        let pts_in = self.polyline.points();
        let m = pts_in.len();
        let mut pts = Vec::with_capacity(n);
        let mut prov = Vec::with_capacity(n);
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            // locate segment
            let i = match arcs.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
                Ok(i) => i.min(m - 1),
                Err(i) => i.saturating_sub(1).min(m - 1),
            };
            let s0 = arcs[i];
            let (p0, idx1) = (pts_in[i], (i + 1) % m);
            let p1 = pts_in[idx1];
            let len = (p1 - p0).norm();
            let u = if len > 0.0 { ((s - s0) / len).clamp(0.0, 1.0) } else { 0.0 };
            pts.push(p0 + (p1 - p0) * u);
            // provenance interpolation only valid within one source curve
            let (c0, t0) = self.provenance[i];
            let (c1, t1) = self.provenance[idx1];
            if c0 == c1 {
                prov.push((c0, t0 + (t1 - t0) * u));
            } else {
                prov.push(if u < 0.5 { (c0, t0) } else { (c1, t1) });
            }
        }
        ResolvedContour {
            polyline: Polyline3::new(pts, true).expect("resampled contour valid"),
            provenance: prov,
        }
    }
}

/// Check the geodesic-compatibility condition at every intersection: the two
/// principal normals must agree modulo sign. Degenerate normals (locally
/// straight curves) count as compatible and are reported, not raised.
pub fn check_geodecity(net: &GeodesicNet, tol_angle: f64) -> Vec<GeodecityRecord> {
    net.intersections
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let fa = estimate_frenet(&net.curves[x.curve_a], x.param_a);
            let fb = estimate_frenet(&net.curves[x.curve_b], x.param_b);
            match (fa, fb) {
                (Ok(fa), Ok(fb)) => match (fa.principal_normal, fb.principal_normal) {
                    (Some(na), Some(nb)) => {
                        let defect = na.dot(&nb).abs().min(1.0).acos();
                        let status = if defect <= tol_angle {
                            GeodecityStatus::Pass
                        } else {
                            GeodecityStatus::Fail
                        };
                        GeodecityRecord { intersection: i, status, angle_defect: defect }
                    }
                    _ => GeodecityRecord {
                        intersection: i,
                        status: GeodecityStatus::Degenerate,
                        angle_defect: 0.0,
                    },
                },
                _ => GeodecityRecord {
                    intersection: i,
                    status: GeodecityStatus::Degenerate,
                    angle_defect: 0.0,
                },
            }
        })
        .collect()
}
