//! Structured triangulations of rectangles, face connectivity and periodic pairing.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Triangulation with positively oriented triangles.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub domain: Rect,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

impl Mesh {
    /// Builds a mesh from raw arrays, checking indices and orientation.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, domain: Rect) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("triangle {t} references a missing vertex")));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} has non-positive area {a}")));
            }
        }
        Ok(Mesh { vertices, triangles, domain })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    /// Maximum edge length over all triangles.
    pub fn h_max(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.n_triangles() {
            let [a, b, c] = self.triangle_coords(t);
            h = h.max(dist(a, b)).max(dist(b, c)).max(dist(c, a));
        }
        h
    }

    /// Writes `v x y` and `t i j k` lines.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.vertices {
            writeln!(out, "v {:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "t {} {} {}", t[0], t[1], t[2])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Splits each of `nx × ny` cells into two triangles along the lower-left to
/// upper-right diagonal.
pub fn build_structured_triangle_mesh(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("cell counts must be positive, got ({nx}, {ny})")));
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) {
        return Err(Error::InvalidArgument(format!("degenerate rectangle {rect:?}")));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { rect.y1 } else { rect.y0 + rect.height() * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { rect.x1 } else { rect.x0 + rect.width() * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = id(i, j);
            let b = id(i + 1, j);
            let c = id(i + 1, j + 1);
            let d = id(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::new(vertices, triangles, rect)
}

/// Local edge `e` of a triangle joins local vertices `(e+1)%3 → (e+2)%3`,
/// i.e. the edge opposite vertex `e`, traversed counter-clockwise.
pub fn local_edge_vertices(e: usize) -> (usize, usize) {
    ((e + 1) % 3, (e + 2) % 3)
}

/// One mesh edge with its adjacent triangles.
#[derive(Clone, Debug)]
pub struct Face {
    /// Endpoint vertex ids, ascending.
    pub vertices: [usize; 2],
    /// (element, local edge) of the plus side (smaller element index).
    pub plus: (usize, usize),
    pub minus: Option<(usize, usize)>,
    /// Unit normal pointing out of the plus element.
    pub normal: [f64; 2],
    pub length: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct FaceSet {
    pub faces: Vec<Face>,
    pub interior_ids: Vec<usize>,
    pub boundary_ids: Vec<usize>,
    /// Face id of each local edge, per element.
    pub element_faces: Vec<[usize; 3]>,
}

impl FaceSet {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

pub fn build_face_connectivity(mesh: &Mesh) -> Result<FaceSet> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut element_faces = vec![[usize::MAX; 3]; mesh.n_triangles()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let (la, lb) = local_edge_vertices(e);
            let (a, b) = (tri[la], tri[lb]);
            let key = (a.min(b), a.max(b));
            match index.get(&key) {
                Some(&f) => {
                    let face = &mut faces[f];
                    if face.minus.is_some() {
                        return Err(Error::Topology(format!(
                            "edge ({}, {}) is shared by more than two triangles",
                            key.0, key.1
                        )));
                    }
                    face.minus = Some((t, e));
                    element_faces[t][e] = f;
                }
                None => {
                    let pa = mesh.vertices[a];
                    let pb = mesh.vertices[b];
                    let length = dist(pa, pb);
                    if length == 0.0 {
                        return Err(Error::Geometry(format!("zero-length edge ({a}, {b})")));
                    }
                    let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                    index.insert(key, faces.len());
                    element_faces[t][e] = faces.len();
                    faces.push(Face { vertices: [key.0, key.1], plus: (t, e), minus: None, normal, length });
                }
            }
        }
    }
    let interior_ids = (0..faces.len()).filter(|&f| faces[f].minus.is_some()).collect();
    let boundary_ids = (0..faces.len()).filter(|&f| faces[f].minus.is_none()).collect();
    Ok(FaceSet { faces, interior_ids, boundary_ids, element_faces })
}

/// Identification of opposite boundary faces and vertices.
#[derive(Clone, Debug, Default)]
pub struct PeriodicMap {
    /// Matched boundary faces `(f, g)` with `f < g`.
    pub face_pairs: Vec<(usize, usize)>,
    /// Master vertex of every vertex (identity for unmatched vertices).
    pub vertex_map: Vec<usize>,
    /// Partner of every face, if paired.
    pub partner: Vec<Option<usize>>,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl PeriodicMap {
    pub fn identity(mesh: &Mesh, faces: &FaceSet) -> Self {
        PeriodicMap {
            face_pairs: Vec::new(),
            vertex_map: (0..mesh.n_vertices()).collect(),
            partner: vec![None; faces.len()],
            periodic_x: false,
            periodic_y: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.face_pairs.is_empty()
    }

    pub fn partner(&self, f: usize) -> Option<usize> {
        self.partner.get(f).copied().flatten()
    }

    /// Canonical representative of a face: the smaller id of a pair.
    pub fn master_face(&self, f: usize) -> usize {
        match self.partner(f) {
            Some(g) => f.min(g),
            None => f,
        }
    }
}

pub fn apply_periodic_identification(
    mesh: &Mesh,
    faces: &FaceSet,
    periodic_x: bool,
    periodic_y: bool,
) -> Result<PeriodicMap> {
    let mut map = PeriodicMap::identity(mesh, faces);
    map.periodic_x = periodic_x;
    map.periodic_y = periodic_y;
    if !periodic_x && !periodic_y {
        return Ok(map);
    }
    let r = mesh.domain;
    let tol = 1e-10 * r.width().max(r.height());
    let on = |v: f64, c: f64| (v - c).abs() <= tol;

    // Vertex masters: shift from the right/top sides back to the left/bottom.
    let boundary_vertices: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| {
            let p = mesh.vertices[v];
            on(p[0], r.x0) || on(p[0], r.x1) || on(p[1], r.y0) || on(p[1], r.y1)
        })
        .collect();
    let find_vertex = |p: [f64; 2]| -> Option<usize> {
        boundary_vertices
            .iter()
            .copied()
            .find(|&v| on(mesh.vertices[v][0], p[0]) && on(mesh.vertices[v][1], p[1]))
    };
    for &v in &boundary_vertices {
        let mut p = mesh.vertices[v];
        if periodic_x && on(p[0], r.x1) {
            p[0] = r.x0;
        }
        if periodic_y && on(p[1], r.y1) {
            p[1] = r.y0;
        }
        map.vertex_map[v] = find_vertex(p).ok_or_else(|| {
            Error::Periodicity(format!("no periodic image for boundary vertex {v} at {:?}", mesh.vertices[v]))
        })?;
    }

    let mut pair = |from: &[usize], to: &[usize], shift: [f64; 2]| -> Result<()> {
        if from.len() != to.len() {
            return Err(Error::Periodicity(format!(
                "opposite boundaries carry {} and {} faces",
                from.len(),
                to.len()
            )));
        }
        for &f in from {
            let fv = faces.faces[f].vertices.map(|v| mesh.vertices[v]);
            let target = to.iter().copied().find(|&g| {
                let gv = faces.faces[g].vertices.map(|v| mesh.vertices[v]);
                let same = |a: [f64; 2], b: [f64; 2]| on(a[0] + shift[0], b[0]) && on(a[1] + shift[1], b[1]);
                (same(fv[0], gv[0]) && same(fv[1], gv[1])) || (same(fv[0], gv[1]) && same(fv[1], gv[0]))
            });
            let g = target.ok_or_else(|| {
                Error::Periodicity(format!("boundary face {f} has no translated partner"))
            })?;
            if (faces.faces[f].length - faces.faces[g].length).abs() > 1e-12 * faces.faces[f].length.max(1.0) {
                return Err(Error::Periodicity(format!("faces {f} and {g} differ in length")));
            }
            map.partner[f] = Some(g);
            map.partner[g] = Some(f);
            map.face_pairs.push((f.min(g), f.max(g)));
        }
        Ok(())
    };

    let side = |pred: &dyn Fn([f64; 2]) -> bool| -> Vec<usize> {
        faces
            .boundary_ids
            .iter()
            .copied()
            .filter(|&f| faces.faces[f].vertices.iter().all(|&v| pred(mesh.vertices[v])))
            .collect()
    };
    if periodic_x {
        let left = side(&|p| on(p[0], r.x0));
        let right = side(&|p| on(p[0], r.x1));
        pair(&left, &right, [r.width(), 0.0])?;
    }
    if periodic_y {
        let bottom = side(&|p| on(p[1], r.y0));
        let top = side(&|p| on(p[1], r.y1));
        pair(&bottom, &top, [0.0, r.height()])?;
    }
    map.face_pairs.sort_unstable();
    Ok(map)
}

/// A face as seen by the assembly loops, with periodic pairs merged into a
/// single interior face.
#[derive(Clone, Debug)]
pub struct FaceCoupling {
    /// Representative face id (the smaller id for a periodic pair).
    pub face: usize,
    pub plus: (usize, usize),
    pub minus: Option<(usize, usize)>,
    /// Unit normal out of the plus element.
    pub normal: [f64; 2],
    pub length: f64,
    /// Translation taking plus-side points onto the minus element.
    pub shift: [f64; 2],
}

impl FaceCoupling {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

/// Immutable bundle of a mesh with its faces, periodic map and effective face list.
#[derive(Clone, Debug)]
pub struct Topology {
    pub mesh: Mesh,
    pub faces: FaceSet,
    pub periodic: PeriodicMap,
    pub couplings: Vec<FaceCoupling>,
}

impl Topology {
    pub fn new(mesh: Mesh, faces: FaceSet, periodic: PeriodicMap) -> Self {
        let mut couplings = Vec::with_capacity(faces.len());
        for (f, face) in faces.faces.iter().enumerate() {
            if face.minus.is_some() {
                couplings.push(FaceCoupling {
                    face: f,
                    plus: face.plus,
                    minus: face.minus,
                    normal: face.normal,
                    length: face.length,
                    shift: [0.0, 0.0],
                });
                continue;
            }
            match periodic.partner(f) {
                Some(g) if g < f => {}
                Some(g) => {
                    let other = &faces.faces[g];
                    let (a, b) = (face.plus.0, other.plus.0);
                    let mid = |fc: &Face| {
                        let p = mesh.vertices[fc.vertices[0]];
                        let q = mesh.vertices[fc.vertices[1]];
                        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
                    };
                    let (pf, pg) = (mid(face), mid(other));
                    let (plus_face, minus_face, shift) = if a <= b {
                        (face, other, [pg[0] - pf[0], pg[1] - pf[1]])
                    } else {
                        (other, face, [pf[0] - pg[0], pf[1] - pg[1]])
                    };
                    couplings.push(FaceCoupling {
                        face: f,
                        plus: plus_face.plus,
                        minus: Some(minus_face.plus),
                        normal: plus_face.normal,
                        length: plus_face.length,
                        shift,
                    });
                }
                None => couplings.push(FaceCoupling {
                    face: f,
                    plus: face.plus,
                    minus: None,
                    normal: face.normal,
                    length: face.length,
                    shift: [0.0, 0.0],
                }),
            }
        }
        Topology { mesh, faces, periodic, couplings }
    }

    /// Structured mesh of `rect` with optional periodicity in both directions.
    pub fn structured(nx: usize, ny: usize, rect: Rect, periodic: bool) -> Result<Self> {
        let mesh = build_structured_triangle_mesh(nx, ny, rect)?;
        let faces = build_face_connectivity(&mesh)?;
        let map = apply_periodic_identification(&mesh, &faces, periodic, periodic)?;
        if periodic && (nx < 2 || ny < 2) {
            return Err(Error::InvalidArgument("periodic meshes need at least two cells per direction".into()));
        }
        Ok(Topology::new(mesh, faces, map))
    }

    pub fn n_interior_couplings(&self) -> usize {
        self.couplings.iter().filter(|c| c.minus.is_some()).count()
    }
}
