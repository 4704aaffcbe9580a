//! Conforming 2D triangulations: edge topology, point location, patches, and
//! longest-edge bisection refinement with conformity closure.
//!
//! A [`Mesh`] is an immutable value after construction; refinement produces a
//! new mesh. Elements are treated as closed sets: a point on a shared edge or
//! vertex belongs to every incident element.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {0} references vertex {1} out of range")]
    VertexOutOfRange(usize, usize),
    #[error("triangle {0} has zero area")]
    DegenerateTriangle(usize),
    #[error("duplicate triangle {0} and {1}")]
    DuplicateTriangle(usize, usize),
    #[error("non-manifold edge ({0}, {1}) with more than 2 incident triangles")]
    NonManifoldEdge(usize, usize),
    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutsideDomain(f64, f64),
    #[error("bisection closure did not terminate within {0} sweeps")]
    ClosureOverflow(usize),
    #[error("invalid mesh file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An edge of the triangulation, stored with vertex ids in increasing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Incident element ids; `second` is `None` for boundary edges.
    pub first: usize,
    pub second: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }
}

/// Where a point sits relative to the triangulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocationKind {
    AtVertex(usize),
    OnEdge(usize),
    InteriorOf(usize),
}

#[derive(Clone, Debug)]
pub struct PointLocation {
    pub kind: LocationKind,
    /// All element ids whose closure contains the point.
    pub containing_elements: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Edge id of local edge `k = (v_k, v_{k+1})` of each triangle.
    tri_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    /// Local index of the refinement (strictly longest) edge of each triangle.
    refinement_edge: Vec<u8>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dx * dx + dy * dy
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Derives edges, incidences, boundary flags, and refinement edges from a
    /// raw vertex/triangle list. Orientation is normalized to counterclockwise.
    pub fn build_topology(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut tris = triangles;
        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        for (t, tri) in tris.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange(t, v));
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area == 0.0 {
                return Err(MeshError::DegenerateTriangle(t));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
            let mut key = *tri;
            key.sort_unstable();
            if let Some(&prev) = seen.get(&key) {
                return Err(MeshError::DuplicateTriangle(prev, t));
            }
            seen.insert(key, t);
        }

        // Edge ids are assigned in lexicographic order of the sorted vertex
        // pair, which makes "smallest edge id" tie-breaking deterministic.
        let mut edge_map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let key = sorted_pair(tri[k], tri[(k + 1) % 3]);
                edge_map.entry(key).or_default().push(t);
            }
        }
        let mut edges = Vec::with_capacity(edge_map.len());
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        for (&(a, b), incident) in &edge_map {
            if incident.len() > 2 {
                return Err(MeshError::NonManifoldEdge(a, b));
            }
            edge_id.insert((a, b), edges.len());
            edges.push(Edge {
                vertices: [a, b],
                first: incident[0],
                second: incident.get(1).copied(),
            });
        }

        let mut tri_edges = Vec::with_capacity(tris.len());
        let mut refinement_edge = Vec::with_capacity(tris.len());
        for tri in &tris {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                ids[k] = edge_id[&sorted_pair(tri[k], tri[(k + 1) % 3])];
            }
            tri_edges.push(ids);
            // Longest edge; ties broken by smallest global edge id.
            let mut best = 0usize;
            for k in 1..3 {
                let lk = dist2(vertices[tri[k]], vertices[tri[(k + 1) % 3]]);
                let lb = dist2(vertices[tri[best]], vertices[tri[(best + 1) % 3]]);
                if lk > lb || (lk == lb && ids[k] < ids[best]) {
                    best = k;
                }
            }
            refinement_edge.push(best as u8);
        }

        let mut boundary_vertex = vec![false; nv];
        for e in &edges {
            if e.is_boundary() {
                boundary_vertex[e.vertices[0]] = true;
                boundary_vertex[e.vertices[1]] = true;
            }
        }

        Ok(Mesh {
            vertices,
            triangles: tris,
            edges,
            tri_edges,
            boundary_vertex,
            refinement_edge,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge ids of the three local edges `(v_k, v_{k+1})` of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|&&b| !b).count()
    }

    pub fn refinement_edge(&self, t: usize) -> usize {
        self.refinement_edge[t] as usize
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn domain_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Element size `h_K` (the diameter, i.e. the longest edge length).
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let va = self.vertices[a];
        let vb = self.vertices[b];
        let vc = self.vertices[c];
        dist2(va, vb).max(dist2(vb, vc)).max(dist2(vc, va)).sqrt()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist2(self.vertices[a], self.vertices[b]).sqrt()
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let va = self.vertices[a];
        let vb = self.vertices[b];
        let vc = self.vertices[c];
        [
            (va[0] + vb[0] + vc[0]) / 3.0,
            (va[1] + vb[1] + vc[1]) / 3.0,
        ]
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for tri in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[tri[k]];
                let q = self.vertices[tri[(k + 1) % 3]];
                let r = self.vertices[tri[(k + 2) % 3]];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let dot = u[0] * v[0] + u[1] * v[1];
                let cross = (u[0] * v[1] - u[1] * v[0]).abs();
                min = min.min(cross.atan2(dot));
            }
        }
        min
    }

    /// Barycentric coordinates of `z` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, z: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let va = self.vertices[a];
        let vb = self.vertices[b];
        let vc = self.vertices[c];
        let total = signed_area(va, vb, vc);
        [
            signed_area(z, vb, vc) / total,
            signed_area(va, z, vc) / total,
            signed_area(va, vb, z) / total,
        ]
    }

    /// Classifies `z` as a vertex, edge, or interior point of the
    /// triangulation, together with every closed element containing it.
    ///
    /// A barycentric coordinate within the (relative) tolerance of 0 demotes
    /// the classification to the edge or vertex case.
    pub fn locate_point(&self, z: [f64; 2], tol: f64) -> Result<PointLocation, MeshError> {
        let mut containing = Vec::new();
        let mut kind: Option<LocationKind> = None;
        for t in 0..self.n_triangles() {
            let lambda = self.barycentric(t, z);
            let eps = tol.max(1e-12 * self.diameter(t)).max(1e-14);
            if lambda.iter().any(|&l| l < -eps) {
                continue;
            }
            containing.push(t);
            if kind.is_some() {
                continue;
            }
            let near_zero: Vec<usize> = (0..3).filter(|&k| lambda[k] <= eps).collect();
            match near_zero.len() {
                2 => {
                    // z coincides with the remaining vertex.
                    let k = (0..3).find(|k| !near_zero.contains(k)).unwrap();
                    kind = Some(LocationKind::AtVertex(self.triangles[t][k]));
                }
                1 => {
                    // z sits on the edge opposite the vanishing coordinate,
                    // which is local edge (k+1, k+2).
                    let k = near_zero[0];
                    kind = Some(LocationKind::OnEdge(self.tri_edges[t][(k + 1) % 3]));
                }
                _ => kind = Some(LocationKind::InteriorOf(t)),
            }
        }
        match kind {
            Some(kind) => Ok(PointLocation {
                kind,
                containing_elements: containing,
            }),
            None => Err(MeshError::PointOutsideDomain(z[0], z[1])),
        }
    }

    /// Side neighbors of `K`, including `K` itself.
    pub fn side_patch(&self, t: usize) -> Vec<usize> {
        let mut out = vec![t];
        for &e in &self.tri_edges[t] {
            let edge = &self.edges[e];
            for cand in [Some(edge.first), edge.second].into_iter().flatten() {
                if cand != t && !out.contains(&cand) {
                    out.push(cand);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Elements sharing at least a vertex with `K`, including `K` itself.
    pub fn vertex_patch(&self, t: usize) -> Vec<usize> {
        let verts: BTreeSet<usize> = self.triangles[t].iter().copied().collect();
        let mut out = Vec::new();
        for (s, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|v| verts.contains(v)) {
                out.push(s);
            }
        }
        out
    }

    /// The 1-2 elements incident to edge `e`.
    pub fn edge_patch(&self, e: usize) -> Vec<usize> {
        let edge = &self.edges[e];
        match edge.second {
            Some(s) => vec![edge.first, s],
            None => vec![edge.first],
        }
    }

    /// Elements incident to each vertex.
    pub fn vertex_to_triangles(&self) -> Vec<Vec<usize>> {
        let mut map = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                map[v].push(t);
            }
        }
        map
    }

    /// Bisects every marked element through its refinement edge and closes
    /// the mesh recursively so that no hanging nodes remain.
    pub fn longest_edge_bisect(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        const MAX_SWEEPS: usize = 10_000;
        let mut verts = self.vertices.clone();
        let mut tris: Vec<[usize; 3]> = self.triangles.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();

        let mut marked: Vec<usize> = marked.to_vec();
        marked.sort_unstable();
        marked.dedup();

        let longest_local = |verts: &[[f64; 2]], tri: &[usize; 3]| -> usize {
            let mut best = 0usize;
            for k in 1..3 {
                let pk = sorted_pair(tri[k], tri[(k + 1) % 3]);
                let pb = sorted_pair(tri[best], tri[(best + 1) % 3]);
                let lk = dist2(verts[pk.0], verts[pk.1]);
                let lb = dist2(verts[pb.0], verts[pb.1]);
                if lk > lb || (lk == lb && pk < pb) {
                    best = k;
                }
            }
            best
        };

        // Bisect one triangle through its longest edge; the second child is
        // appended, the first replaces the parent in place.
        let bisect = |verts: &mut Vec<[f64; 2]>,
                      tris: &mut Vec<[usize; 3]>,
                      midpoints: &mut HashMap<(usize, usize), usize>,
                      t: usize| {
            let tri = tris[t];
            let k = longest_local(verts, &tri);
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = sorted_pair(a, b);
            let m = *midpoints.entry(key).or_insert_with(|| {
                let pa = verts[key.0];
                let pb = verts[key.1];
                verts.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                verts.len() - 1
            });
            tris[t] = [a, m, c];
            tris.push([m, b, c]);
        };

        for &t in &marked {
            bisect(&mut verts, &mut tris, &mut midpoints, t);
        }

        // Conformity closure: any triangle with a registered midpoint on one
        // of its edges is bisected through its longest edge, until stable.
        let mut sweeps = 0;
        loop {
            let mut changed = false;
            let mut t = 0;
            while t < tris.len() {
                let tri = tris[t];
                let hanging = (0..3)
                    .any(|k| midpoints.contains_key(&sorted_pair(tri[k], tri[(k + 1) % 3])));
                if hanging {
                    bisect(&mut verts, &mut tris, &mut midpoints, t);
                    changed = true;
                } else {
                    t += 1;
                }
            }
            if !changed {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(MeshError::ClosureOverflow(MAX_SWEEPS));
            }
        }

        Mesh::build_topology(verts, tris)
    }

    /// Writes the plain-text mesh format: `nv nt`, then vertex lines `x y`,
    /// then triangle lines `i j k`. Coordinates carry 17 significant digits.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<(), MeshError> {
        writeln!(w, "{} {}", self.n_vertices(), self.n_triangles())?;
        for v in &self.vertices {
            writeln!(w, "{:.16e} {:.16e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Mesh, MeshError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| MeshError::Parse("empty file".into()))??;
        let mut it = header.split_whitespace();
        let nv: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MeshError::Parse("bad header".into()))?;
        let nt: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MeshError::Parse("bad header".into()))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| MeshError::Parse("missing vertex line".into()))??;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MeshError::Parse("bad vertex line".into()))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MeshError::Parse("bad vertex line".into()))?;
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = lines
                .next()
                .ok_or_else(|| MeshError::Parse("missing triangle line".into()))?;
            let line = line?;
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| MeshError::Parse("bad triangle line".into()))?;
            if ids.len() != 3 {
                return Err(MeshError::Parse("bad triangle line".into()));
            }
            triangles.push([ids[0], ids[1], ids[2]]);
        }
        Mesh::build_topology(vertices, triangles)
    }
}

/// Unit square split into two triangles along the main diagonal.
pub fn two_triangle_square() -> Mesh {
    Mesh::build_topology(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("valid built-in mesh")
}

/// Initial mesh for the unit square: four sub-squares, each split into four
/// triangles through its center (criss-cross pattern); 13 vertices and 16
/// triangles.
pub fn unit_square_crisscross() -> Mesh {
    let mut vertices = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            vertices.push([0.5 * i as f64, 0.5 * j as f64]);
        }
    }
    let centers = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];
    let mut triangles = Vec::new();
    for (s, &c) in centers.iter().enumerate() {
        let (i, j) = (s % 2, s / 2);
        let sw = j * 3 + i;
        let se = sw + 1;
        let nw = sw + 3;
        let ne = nw + 1;
        let cid = 9 + s;
        vertices.push(c);
        triangles.push([sw, se, cid]);
        triangles.push([se, ne, cid]);
        triangles.push([ne, nw, cid]);
        triangles.push([nw, sw, cid]);
    }
    Mesh::build_topology(vertices, triangles).expect("valid built-in mesh")
}

/// Initial mesh for the L-shaped domain `(-1,1)^2 \ [0,1) x (-1,0]`: three
/// unit squares, each split by the diagonal through the reentrant corner.
pub fn lshape_initial() -> Mesh {
    let vertices = vec![
        [-1.0, -1.0],
        [0.0, -1.0],
        [-1.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [-1.0, 1.0],
        [0.0, 1.0],
        [1.0, 1.0],
    ];
    let triangles = vec![
        [0, 1, 3],
        [0, 3, 2],
        [2, 3, 5],
        [3, 6, 5],
        [3, 4, 7],
        [3, 7, 6],
    ];
    Mesh::build_topology(vertices, triangles).expect("valid built-in mesh")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triangle_square_topology() {
        let mesh = two_triangle_square();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_triangles(), 2);
        assert_eq!(mesh.n_edges(), 5);
        let boundary = mesh.edges().iter().filter(|e| e.is_boundary()).count();
        assert_eq!(boundary, 4);
    }

    #[test]
    fn crisscross_matches_initial_square_mesh() {
        let mesh = unit_square_crisscross();
        assert_eq!(mesh.n_vertices(), 13);
        assert_eq!(mesh.n_triangles(), 16);
        assert!((mesh.domain_area() - 1.0).abs() < 1e-14);
        // Every interior edge has exactly 2 incident triangles by
        // construction of build_topology; spot-check conformity counts.
        let interior = mesh.edges().iter().filter(|e| !e.is_boundary()).count();
        let boundary = mesh.n_edges() - interior;
        assert_eq!(boundary, 8);
    }

    #[test]
    fn lshape_boundary_edge_count_matches_perimeter() {
        let mesh = lshape_initial();
        let boundary = mesh.edges().iter().filter(|e| e.is_boundary()).count();
        // 8 unit perimeter segments, one edge each.
        assert_eq!(boundary, 8);
        assert!((mesh.domain_area() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn build_topology_rejects_bad_input() {
        assert!(matches!(
            Mesh::build_topology(vec![[0.0, 0.0], [1.0, 0.0]], vec![[0, 1, 2]]),
            Err(MeshError::VertexOutOfRange(0, 2))
        ));
        assert!(matches!(
            Mesh::build_topology(
                vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
                vec![[0, 1, 2]]
            ),
            Err(MeshError::DegenerateTriangle(0))
        ));
        assert!(matches!(
            Mesh::build_topology(
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
                vec![[0, 1, 2], [0, 2, 1]]
            ),
            Err(MeshError::DuplicateTriangle(0, 1))
        ));
        assert!(matches!(
            Mesh::build_topology(
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 1.0]],
                vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]]
            ),
            Err(MeshError::NonManifoldEdge(0, 1))
        ));
    }

    #[test]
    fn locate_point_classifies_vertices_edges_interior() {
        let mesh = two_triangle_square();
        let loc = mesh.locate_point([0.0, 0.0], 1e-12).unwrap();
        assert_eq!(loc.kind, LocationKind::AtVertex(0));
        assert_eq!(loc.containing_elements, vec![0, 1]);

        let bc = mesh.barycenter(0);
        let loc = mesh.locate_point(bc, 1e-12).unwrap();
        assert_eq!(loc.kind, LocationKind::InteriorOf(0));
        assert_eq!(loc.containing_elements, vec![0]);

        // Midpoint of the shared diagonal.
        let loc = mesh.locate_point([0.5, 0.5], 1e-12).unwrap();
        match loc.kind {
            LocationKind::OnEdge(e) => assert_eq!(mesh.edge(e).vertices, [0, 2]),
            other => panic!("expected OnEdge, got {other:?}"),
        }
        assert_eq!(loc.containing_elements, vec![0, 1]);

        assert!(mesh.locate_point([2.0, 2.0], 1e-12).is_err());
    }

    #[test]
    fn locate_point_crisscross_center_is_vertex() {
        // (0.25, 0.25) is a diagonal crossing point of the criss-cross mesh;
        // verified against barycentric coordinates in the closure test below.
        let mesh = unit_square_crisscross();
        let loc = mesh.locate_point([0.25, 0.25], 1e-12).unwrap();
        assert_eq!(loc.kind, LocationKind::AtVertex(9));
        assert_eq!(loc.containing_elements.len(), 4);
        // Oracle: each containing element must report a barycentric
        // coordinate of 1 at the vertex.
        for &t in &loc.containing_elements {
            let lambda = mesh.barycentric(t, [0.25, 0.25]);
            let k = mesh.triangle(t).iter().position(|&v| v == 9).unwrap();
            assert!((lambda[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_vertex_locates_at_itself() {
        let mesh = unit_square_crisscross();
        for v in 0..mesh.n_vertices() {
            let loc = mesh.locate_point(mesh.vertex(v), 1e-12).unwrap();
            assert_eq!(loc.kind, LocationKind::AtVertex(v));
        }
    }

    #[test]
    fn bisect_empty_marking_is_identity() {
        let mesh = unit_square_crisscross();
        let refined = mesh.longest_edge_bisect(&[]).unwrap();
        assert_eq!(mesh, refined);
    }

    #[test]
    fn bisect_single_triangle_closure() {
        // Marking one triangle of the 2-triangle square bisects it through
        // the diagonal; the neighbor must be bisected too to stay conforming.
        let mesh = two_triangle_square();
        let refined = mesh.longest_edge_bisect(&[0]).unwrap();
        assert_eq!(refined.n_triangles(), 4);
        assert!((refined.domain_area() - 1.0).abs() < 1e-14);
        for e in refined.edges() {
            let n = 1 + e.second.is_some() as usize;
            assert_eq!(n, if e.is_boundary() { 1 } else { 2 });
        }
    }

    #[test]
    fn uniform_bisection_doubles_elements() {
        let mesh = unit_square_crisscross();
        let all: Vec<usize> = (0..mesh.n_triangles()).collect();
        let refined = mesh.longest_edge_bisect(&all).unwrap();
        assert!(refined.n_triangles() >= 2 * mesh.n_triangles());
        assert!((refined.domain_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn patches_on_crisscross() {
        let mesh = unit_square_crisscross();
        for t in 0..mesh.n_triangles() {
            let side = mesh.side_patch(t);
            let star = mesh.vertex_patch(t);
            assert!(side.iter().all(|s| star.contains(s)));
        }
        // Every criss-cross triangle has an interior side count >= 2, and an
        // interior one (sharing all three sides) has a full patch of 4.
        let interior = (0..mesh.n_triangles())
            .find(|&t| mesh.triangle_edges(t).iter().all(|&e| !mesh.edge(e).is_boundary()))
            .expect("criss-cross has interior triangles");
        assert_eq!(mesh.side_patch(interior).len(), 4);
        // A boundary edge patch has cardinality 1.
        let be = (0..mesh.n_edges()).find(|&e| mesh.edge(e).is_boundary()).unwrap();
        assert_eq!(mesh.edge_patch(be).len(), 1);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let mesh = unit_square_crisscross()
            .longest_edge_bisect(&[0, 3, 7])
            .unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let parsed = Mesh::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(mesh, parsed);
    }
}
