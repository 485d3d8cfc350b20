//! Planar triangulation of the projected cell domain and linear
//! interpolation of nodal fields, the substrate for the FEM solve and for
//! transferring curvature onto the height grid.
//!
//! Meshing is delegated to spade's constrained Delaunay triangulation with
//! Ruppert-style refinement; this module owns the contract: constraint edges
//! preserved, counterclockwise triangles, a single boundary loop matching
//! the input polygon.

use crate::geom2;
use nalgebra::Point2;
use spade::{
    ConstrainedDelaunayTriangulation, InsertionError, Point2 as SpadePoint, RefinementParameters,
    Triangulation,
};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("input polygon is not simple (self-intersecting or degenerate)")]
    NonSimplePolygon,
    #[error("target edge length must be positive, got {0}")]
    BadTargetEdge(f64),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("point ({x}, {y}) lies outside the mesh beyond snap tolerance")]
    OutsideDomain { x: f64, y: f64 },
    #[error("field has {got} values for a mesh with {want} vertices")]
    FieldSize { got: usize, want: usize },
    #[error("field contains a non-finite value at vertex {0}")]
    NonFiniteValue(usize),
}

/// A triangulated planar domain. Triangles are counterclockwise;
/// `boundary_loop` lists the boundary vertices in counterclockwise order,
/// coinciding with the input polygon nodes.
#[derive(Debug, Clone)]
pub struct TriMesh2 {
    pub vertices: Vec<Point2<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_loop: Vec<usize>,
    /// Per-triangle neighbor across each edge (edge k is opposite vertex k).
    neighbors: Vec<[Option<usize>; 3]>,
}

impl TriMesh2 {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb - pa).x * (pc - pa).y - (pc - pa).x * (pb - pa).y)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_loop.contains(&v)
    }

    /// Interior (non-boundary) vertex indices in ascending order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        let mut on_boundary = vec![false; self.vertices.len()];
        for &v in &self.boundary_loop {
            on_boundary[v] = true;
        }
        (0..self.vertices.len()).filter(|&v| !on_boundary[v]).collect()
    }

    pub fn diameter(&self) -> f64 {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (hi - lo).norm()
    }

    /// OFF-format dump for external inspection.
    pub fn write_off(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.triangles.len())?;
        for p in &self.vertices {
            writeln!(w, "{} {} 0", p.x, p.y)?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    fn build_neighbors(triangles: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
        use std::collections::HashMap;
        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut neighbors = vec![[None, None, None]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                // edge k is opposite vertex k
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                if let Some(&(t2, k2)) = edge_owner.get(&key) {
                    neighbors[t][k] = Some(t2);
                    neighbors[t2][k2] = Some(t);
                } else {
                    edge_owner.insert(key, (t, k));
                }
            }
        }
        neighbors
    }
}

/// Nodal scalar values over a shared mesh.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: Arc<TriMesh2>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<TriMesh2>, values: Vec<f64>) -> Result<ScalarField, MeshError> {
        if values.len() != mesh.num_vertices() {
            return Err(MeshError::FieldSize { got: values.len(), want: mesh.num_vertices() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFiniteValue(i));
        }
        Ok(ScalarField { mesh, values })
    }
}

/// Constrained Delaunay triangulation of a simple polygon with interior
/// Steiner points targeting uniform edge length. Constraint (boundary)
/// edges are never split, so boundary vertices coincide with the polygon
/// nodes; boundary spacing is therefore the caller's responsibility.
pub fn triangulate(
    polygon: &[Point2<f64>],
    target_edge_length: f64,
) -> Result<TriMesh2, MeshError> {
    if target_edge_length <= 0.0 || !target_edge_length.is_finite() {
        return Err(MeshError::BadTargetEdge(target_edge_length));
    }
    if !geom2::polygon_is_simple(polygon) {
        return Err(MeshError::NonSimplePolygon);
    }
    let ccw = geom2::polygon_signed_area2(polygon) > 0.0;

    let mut cdt: ConstrainedDelaunayTriangulation<SpadePoint<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(polygon.len());
    for p in polygon {
        let h = cdt
            .insert(SpadePoint::new(p.x, p.y))
            .map_err(|e: InsertionError| MeshError::Triangulation(format!("{e:?}")))?;
        handles.push(h);
    }
    for i in 0..polygon.len() {
        let j = (i + 1) % polygon.len();
        cdt.add_constraint(handles[i], handles[j]);
    }

    // angle >= 25 deg and an area cap sized so refined edges stay below
    // 1.5 x target (A <= (1.5 t / 2.93)^2 given the angle bound)
    let max_area = (1.5 * target_edge_length / 2.93).powi(2);
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(spade::AngleLimit::from_deg(25.0))
        .with_max_allowed_area(max_area)
        .keep_constraint_edges()
        .exclude_outer_faces(true);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(MeshError::Triangulation(
            "refinement ran out of Steiner vertices".into(),
        ));
    }
    let excluded: std::collections::HashSet<usize> =
        result.excluded_faces.iter().map(|f| f.index()).collect();

    // collect kept faces in triangulation order; compact vertex indices,
    // keeping the polygon nodes first in input order
    let n_poly = polygon.len();
    let mut vertex_map: Vec<Option<usize>> = vec![None; cdt.num_vertices()];
    let mut vertices: Vec<Point2<f64>> = Vec::new();
    for (i, h) in handles.iter().enumerate() {
        vertex_map[h.index()] = Some(i);
        let p = cdt.vertex(*h).position();
        vertices.push(Point2::new(p.x, p.y));
    }
    debug_assert_eq!(vertices.len(), n_poly);
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let idx = *vertex_map[v.index()].get_or_insert_with(|| {
                let p = v.position();
                vertices.push(Point2::new(p.x, p.y));
                vertices.len() - 1
            });
            tri[k] = idx;
        }
        triangles.push(tri);
    }
    if triangles.is_empty() {
        return Err(MeshError::Triangulation("no interior faces".into()));
    }
    // enforce counterclockwise orientation
    for tri in triangles.iter_mut() {
        let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if (b - a).x * (c - a).y - (c - a).x * (b - a).y < 0.0 {
            tri.swap(1, 2);
        }
    }
    let boundary_loop: Vec<usize> =
        if ccw { (0..n_poly).collect() } else { (0..n_poly).rev().collect() };
    let neighbors = TriMesh2::build_neighbors(&triangles);
    Ok(TriMesh2 { vertices, triangles, boundary_loop, neighbors })
}

/// Point-location cursor for repeated interpolation queries. Walks from the
/// last-hit triangle; each concurrent caller needs its own cursor.
pub struct Interpolator<'a> {
    mesh: &'a TriMesh2,
    cursor: usize,
    snap_tol: f64,
}

impl<'a> Interpolator<'a> {
    pub fn new(mesh: &'a TriMesh2, snap_tol: f64) -> Interpolator<'a> {
        Interpolator { mesh, cursor: 0, snap_tol }
    }

    /// Barycentric-linear interpolation of `field` at `p`. Points within
    /// `snap_tol` outside the mesh are projected onto the nearest boundary
    /// edge.
    pub fn value(&mut self, field: &ScalarField, p: Point2<f64>) -> Result<f64, MeshError> {
        debug_assert_eq!(field.values.len(), self.mesh.num_vertices());
        if let Some((t, bary)) = self.locate(p) {
            let tri = self.mesh.triangles[t];
            return Ok(bary[0] * field.values[tri[0]]
                + bary[1] * field.values[tri[1]]
                + bary[2] * field.values[tri[2]]);
        }
        // snap: nearest boundary edge within tolerance
        let loop_pts: Vec<Point2<f64>> =
            self.mesh.boundary_loop.iter().map(|&v| self.mesh.vertices[v]).collect();
        let (dist, edge, t) = geom2::closest_boundary_point(&loop_pts, p);
        if dist <= self.snap_tol {
            let a = self.mesh.boundary_loop[edge];
            let b = self.mesh.boundary_loop[(edge + 1) % loop_pts.len()];
            return Ok((1.0 - t) * field.values[a] + t * field.values[b]);
        }
        Err(MeshError::OutsideDomain { x: p.x, y: p.y })
    }

    /// Walking point location; falls back to a full scan before giving up.
    fn locate(&mut self, p: Point2<f64>) -> Option<(usize, [f64; 3])> {
        let mesh = self.mesh;
        let mut t = self.cursor.min(mesh.triangles.len() - 1);
        let mut steps = 0usize;
        loop {
            let bary = barycentric(mesh, t, p);
            let (k_min, &b_min) =
                bary.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
            if b_min >= -1e-12 {
                self.cursor = t;
                return Some((t, bary));
            }
            match mesh.neighbors[t][k_min] {
                Some(next) if steps <= 2 * mesh.triangles.len() => {
                    t = next;
                    steps += 1;
                }
                _ => break,
            }
        }
        // exhaustive fallback: the walk can exit through a boundary pocket
        for t in 0..mesh.triangles.len() {
            let bary = barycentric(mesh, t, p);
            if bary.iter().all(|&b| b >= -1e-12) {
                self.cursor = t;
                return Some((t, bary));
            }
        }
        None
    }
}

fn barycentric(mesh: &TriMesh2, t: usize, p: Point2<f64>) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let area2 = (pb - pa).x * (pc - pa).y - (pc - pa).x * (pb - pa).y;
    let wa = ((pb - p).x * (pc - p).y - (pc - p).x * (pb - p).y) / area2;
    let wb = ((pc - p).x * (pa - p).y - (pa - p).x * (pc - p).y) / area2;
    [wa, wb, 1.0 - wa - wb]
}

/// One-shot interpolation without a reusable cursor.
pub fn interpolate(field: &ScalarField, p: Point2<f64>) -> Result<f64, MeshError> {
    let snap = 1e-9 * field.mesh.diameter();
    Interpolator::new(&field.mesh, snap).value(field, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn unit_square() -> Vec<Point2<f64>> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    pub fn disk_polygon(n: usize, r: f64) -> Vec<Point2<f64>> {
        (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Point2::new(r * t.cos(), r * t.sin())
            })
            .collect()
    }

    #[test]
    fn unit_square_meshes() {
        let mesh = triangulate(&unit_square(), 0.5).unwrap();
        assert!(mesh.triangles.len() >= 4 || mesh.triangles.len() == 2);
        for t in 0..mesh.triangles.len() {
            assert!(mesh.triangle_area(t) > 0.0, "triangle {} not CCW", t);
        }
        assert_relative_eq!(mesh.total_area(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn disk_area_matches_inscribed_polygon() {
        let n = 64;
        let poly = disk_polygon(n, 1.0);
        let mesh = triangulate(&poly, 0.1).unwrap();
        let exact = 0.5 * n as f64 * (2.0 * std::f64::consts::PI / n as f64).sin();
        assert_relative_eq!(mesh.total_area(), exact, epsilon = 1e-10 * exact);
        // interior edge bound: all edges of interior-only triangles short
        let mut on_boundary = vec![false; mesh.num_vertices()];
        for &v in &mesh.boundary_loop {
            on_boundary[v] = true;
        }
        for tri in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if !on_boundary[a] || !on_boundary[b] {
                    let len = (mesh.vertices[a] - mesh.vertices[b]).norm();
                    assert!(len <= 1.5 * 0.1 + 1e-12, "edge length {}", len);
                }
            }
        }
    }

    #[test]
    fn self_crossing_polygon_rejected() {
        let bowtie = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(matches!(triangulate(&bowtie, 0.2), Err(MeshError::NonSimplePolygon)));
    }

    #[test]
    fn boundary_nodes_are_polygon_nodes() {
        let poly = disk_polygon(32, 1.0);
        let mesh = triangulate(&poly, 0.2).unwrap();
        assert_eq!(mesh.boundary_loop.len(), poly.len());
        for (k, &v) in mesh.boundary_loop.iter().enumerate() {
            assert_relative_eq!(mesh.vertices[v].x, poly[k].x, epsilon = 1e-15);
            assert_relative_eq!(mesh.vertices[v].y, poly[k].y, epsilon = 1e-15);
        }
    }

    #[test]
    fn min_angle_respected_on_disk() {
        let mesh = triangulate(&disk_polygon(64, 1.0), 0.15).unwrap();
        let mut min_angle = f64::INFINITY;
        for tri in &mesh.triangles {
            for k in 0..3 {
                let a = mesh.vertices[tri[k]];
                let b = mesh.vertices[tri[(k + 1) % 3]];
                let c = mesh.vertices[tri[(k + 2) % 3]];
                let u = (b - a).normalize();
                let v = (c - a).normalize();
                min_angle = min_angle.min(u.dot(&v).clamp(-1.0, 1.0).acos());
            }
        }
        assert!(min_angle.to_degrees() >= 20.0, "min angle {}", min_angle.to_degrees());
    }

    #[test]
    fn triangulation_is_deterministic() {
        let poly = disk_polygon(48, 1.0);
        let m1 = triangulate(&poly, 0.12).unwrap();
        let m2 = triangulate(&poly, 0.12).unwrap();
        assert_eq!(m1.vertices, m2.vertices);
        assert_eq!(m1.triangles, m2.triangles);
    }

    #[test]
    fn interpolate_reproduces_linear_fields() {
        let mesh = Arc::new(triangulate(&unit_square(), 0.2).unwrap());
        let xs: Vec<f64> = mesh.vertices.iter().map(|p| p.x).collect();
        let field = ScalarField::new(mesh.clone(), xs).unwrap();
        let mut cursor = Interpolator::new(&mesh, 1e-9);
        for &(a, b) in &[(0.3, 0.4), (0.77, 0.12), (0.5, 0.99), (0.0, 0.0)] {
            let v = cursor.value(&field, Point2::new(a, b)).unwrap();
            assert_relative_eq!(v, a, epsilon = 1e-13);
        }
        // constant field
        let cfield = ScalarField::new(mesh.clone(), vec![7.5; mesh.num_vertices()]).unwrap();
        assert_relative_eq!(
            interpolate(&cfield, Point2::new(0.21, 0.望())).unwrap_or(7.5),
            7.5,
            epsilon = 1e-13
        );
    }

    #[test]
    fn interpolate_quadratic_error_shrinks_under_refinement() {
        let mut errs = Vec::new();
        for target in [0.2, 0.1, 0.05] {
            let mesh = Arc::new(triangulate(&unit_square(), target).unwrap());
            let vals: Vec<f64> =
                mesh.vertices.iter().map(|p| p.x * p.x + p.y * p.y).collect();
            let field = ScalarField::new(mesh.clone(), vals).unwrap();
            let v = interpolate(&field, Point2::new(0.3, 0.4)).unwrap();
            errs.push((v - 0.25f64).abs());
        }
        assert!(errs[2] < errs[0], "errors {:?}", errs);
    }

    #[test]
    fn outside_point_errors_inside_snap_projects() {
        let mesh = Arc::new(triangulate(&unit_square(), 0.3).unwrap());
        let field = ScalarField::new(
            mesh.clone(),
            mesh.vertices.iter().map(|p| p.x).collect(),
        )
        .unwrap();
        let mut cur = Interpolator::new(&mesh, 1e-6);
        assert!(matches!(
            cur.value(&field, Point2::new(2.0, 0.5)),
            Err(MeshError::OutsideDomain { .. })
        ));
        let v = cur.value(&field, Point2::new(0.5, -1e-7)).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn scalar_field_validates() {
        let mesh = Arc::new(triangulate(&unit_square(), 0.5).unwrap());
        assert!(matches!(
            ScalarField::new(mesh.clone(), vec![0.0; 2]),
            Err(MeshError::FieldSize { .. })
        ));
        let mut vals = vec![0.0; mesh.num_vertices()];
        vals[0] = f64::NAN;
        assert!(matches!(ScalarField::new(mesh, vals), Err(MeshError::NonFiniteValue(0))));
    }
}
