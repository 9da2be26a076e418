//! Global finite element spaces, dof maps, interpolation and point evaluation.

use std::sync::Arc;

use crate::element::{interior_moment_tests, legendre01, ElementMap, Family, ReferenceBasis, ReferenceEval, REFERENCE_VERTICES};
use crate::error::{Error, Result};
use crate::mesh::{local_edge_vertices, Topology};
use crate::quadrature::{edge_rule, triangle_rule, QuadratureRule};

/// Kind of global space. The degree passed alongside is the element degree
/// (e.g. 2 for P2 Taylor-Hood velocity, 2 for BDM_2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// Continuous vector Lagrange (Taylor-Hood velocity).
    ContinuousVector,
    /// Continuous scalar Lagrange (Taylor-Hood pressure).
    ContinuousScalar,
    /// Discontinuous scalar Lagrange.
    DiscontinuousScalar,
    Bdm,
    Rt,
}

impl SpaceKind {
    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::ContinuousVector | SpaceKind::Bdm | SpaceKind::Rt)
    }

    pub fn is_hdiv(self) -> bool {
        matches!(self, SpaceKind::Bdm | SpaceKind::Rt)
    }
}

/// Whether dofs on non-periodic boundary faces are eliminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Vector spaces drop boundary dofs (zero Dirichlet for Lagrange, zero
    /// normal trace for H(div)); scalar spaces are never constrained.
    Constrained,
    Free,
}

/// Local-to-global link of one element dof.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalDof {
    pub global: Option<usize>,
    pub sign: f64,
}

/// Physical value and gradient of a basis function (or field) at a point.
/// Scalars use `val[0]` and `grad[0]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Shape {
    pub val: [f64; 2],
    /// `grad[c][j] = ∂v_c / ∂x_j`.
    pub grad: [[f64; 2]; 2],
}

impl Shape {
    pub fn div(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }

    pub fn add_scaled(&mut self, a: f64, s: &Shape) {
        for c in 0..2 {
            self.val[c] += a * s.val[c];
            for j in 0..2 {
                self.grad[c][j] += a * s.grad[c][j];
            }
        }
    }
}

#[derive(Debug)]
pub struct FunctionSpace {
    pub topo: Arc<Topology>,
    pub kind: SpaceKind,
    pub degree: usize,
    /// Scalar Lagrange basis for Lagrange kinds, vector basis for H(div).
    pub basis: ReferenceBasis,
    pub maps: Vec<ElementMap>,
    pub mode: BoundaryMode,
    local_dim: usize,
    dofs: Vec<LocalDof>,
    n_dofs: usize,
}

/// Reference point on local edge `e` at parameter `s` (counter-clockwise).
pub fn edge_reference_point(e: usize, s: f64) -> [f64; 2] {
    let (la, lb) = local_edge_vertices(e);
    let (a, b) = (REFERENCE_VERTICES[la], REFERENCE_VERTICES[lb]);
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

pub fn build_function_space(topo: &Arc<Topology>, kind: SpaceKind, degree: usize) -> Result<FunctionSpace> {
    build_function_space_with(topo, kind, degree, BoundaryMode::Constrained)
}

pub fn build_function_space_with(
    topo: &Arc<Topology>,
    kind: SpaceKind,
    degree: usize,
    mode: BoundaryMode,
) -> Result<FunctionSpace> {
    let family = match kind {
        SpaceKind::Bdm => Family::Bdm,
        SpaceKind::Rt => Family::Rt,
        _ => Family::Lagrange,
    };
    let basis = ReferenceBasis::new(family, degree)?;
    let mesh = &topo.mesh;
    let faces = &topo.faces;
    let periodic = &topo.periodic;
    let maps = (0..mesh.n_triangles())
        .map(|t| ElementMap::new(mesh.triangle_coords(t)))
        .collect::<Result<Vec<_>>>()?;
    let ne = mesh.n_triangles();
    let ncomp = if kind == SpaceKind::ContinuousVector { 2 } else { 1 };
    let nb = basis.dim;
    let local_dim = nb * ncomp;

    // Canonical direction of a face: from the lower to the higher vertex id of its master face.
    let forward = |t: usize, e: usize| -> bool {
        let f = faces.element_faces[t][e];
        let mf = &faces.faces[periodic.master_face(f)];
        let tc = {
            let p = mesh.vertices[mf.vertices[0]];
            let q = mesh.vertices[mf.vertices[1]];
            [q[0] - p[0], q[1] - p[1]]
        };
        let tri = mesh.triangles[t];
        let (la, lb) = local_edge_vertices(e);
        let p = mesh.vertices[tri[la]];
        let q = mesh.vertices[tri[lb]];
        (q[0] - p[0]) * tc[0] + (q[1] - p[1]) * tc[1] > 0.0
    };
    let constrained_face = |f: usize| -> bool {
        mode == BoundaryMode::Constrained
            && kind.is_vector()
            && faces.faces[f].is_boundary()
            && periodic.partner(f).is_none()
    };

    // Raw numbering of scalar "slots" (nodes or moments), then compaction.
    let mut raw = vec![(usize::MAX, 1.0f64); ne * nb];
    let mut constrained_raw: Vec<bool> = Vec::new();
    let mut next = 0usize;
    let ent = basis.entity_dofs.clone();
    let per_edge = ent.edge[0].len();
    match kind {
        SpaceKind::DiscontinuousScalar => {
            for t in 0..ne {
                for i in 0..nb {
                    raw[t * nb + i] = (next, 1.0);
                    next += 1;
                }
            }
            constrained_raw = vec![false; next];
        }
        SpaceKind::ContinuousScalar | SpaceKind::ContinuousVector => {
            let nv = mesh.n_vertices();
            let mut vertex_id = vec![usize::MAX; nv];
            for v in 0..nv {
                let m = periodic.vertex_map[v];
                if vertex_id[m] == usize::MAX {
                    vertex_id[m] = next;
                    next += 1;
                }
            }
            let mut vertex_constrained = vec![false; nv];
            for &f in &faces.boundary_ids {
                if constrained_face(f) {
                    for &v in &faces.faces[f].vertices {
                        vertex_constrained[periodic.vertex_map[v]] = true;
                    }
                }
            }
            constrained_raw.resize(next, false);
            for v in 0..nv {
                if vertex_id[v] != usize::MAX {
                    constrained_raw[vertex_id[v]] = vertex_constrained[v];
                }
            }
            let mut face_base = vec![usize::MAX; faces.len()];
            for f in 0..faces.len() {
                if periodic.master_face(f) == f && per_edge > 0 {
                    face_base[f] = next;
                    next += per_edge;
                    constrained_raw.extend(std::iter::repeat(constrained_face(f)).take(per_edge));
                }
            }
            for t in 0..ne {
                let tri = mesh.triangles[t];
                for lv in 0..3 {
                    raw[t * nb + ent.vertex[lv][0]] = (vertex_id[periodic.vertex_map[tri[lv]]], 1.0);
                }
                for e in 0..3 {
                    let f = periodic.master_face(faces.element_faces[t][e]);
                    let fw = forward(t, e);
                    for (j, &l) in ent.edge[e].iter().enumerate() {
                        let g = if fw { j } else { per_edge - 1 - j };
                        raw[t * nb + l] = (face_base[f] + g, 1.0);
                    }
                }
                for &l in &ent.interior {
                    raw[t * nb + l] = (next, 1.0);
                    constrained_raw.push(false);
                    next += 1;
                }
            }
        }
        SpaceKind::Bdm | SpaceKind::Rt => {
            let mut face_base = vec![usize::MAX; faces.len()];
            for f in 0..faces.len() {
                if periodic.master_face(f) == f {
                    face_base[f] = next;
                    next += per_edge;
                    constrained_raw.extend(std::iter::repeat(constrained_face(f)).take(per_edge));
                }
            }
            for t in 0..ne {
                for e in 0..3 {
                    let f = periodic.master_face(faces.element_faces[t][e]);
                    let fw = forward(t, e);
                    for (j, &l) in ent.edge[e].iter().enumerate() {
                        let sign = if fw { 1.0 } else if j % 2 == 0 { -1.0 } else { 1.0 };
                        raw[t * nb + l] = (face_base[f] + j, sign);
                    }
                }
                for &l in &ent.interior {
                    raw[t * nb + l] = (next, 1.0);
                    constrained_raw.push(false);
                    next += 1;
                }
            }
        }
    }
    let mut compact = vec![None; next];
    let mut count = 0;
    for (r, c) in compact.iter_mut().enumerate() {
        if !constrained_raw[r] {
            *c = Some(count);
            count += 1;
        }
    }
    let mut dofs = vec![LocalDof { global: None, sign: 1.0 }; ne * local_dim];
    for t in 0..ne {
        for i in 0..nb {
            let (r, sign) = raw[t * nb + i];
            debug_assert!(r != usize::MAX);
            for c in 0..ncomp {
                dofs[t * local_dim + c * nb + i] =
                    LocalDof { global: compact[r].map(|g| g * ncomp + c), sign };
            }
        }
    }
    Ok(FunctionSpace {
        topo: topo.clone(),
        kind,
        degree,
        basis,
        maps,
        mode,
        local_dim,
        dofs,
        n_dofs: count * ncomp,
    })
}

impl FunctionSpace {
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn n_elements(&self) -> usize {
        self.maps.len()
    }

    pub fn is_vector(&self) -> bool {
        self.kind.is_vector()
    }

    /// Polynomial degree of the local shape functions.
    pub fn poly_degree(&self) -> usize {
        self.basis.poly_degree
    }

    pub fn local_dofs(&self, elem: usize) -> &[LocalDof] {
        &self.dofs[elem * self.local_dim..(elem + 1) * self.local_dim]
    }

    /// Maps reference evaluations on `elem` to physical shapes (signs included).
    pub fn transform(&self, elem: usize, ev: &ReferenceEval, out: &mut Vec<Shape>) {
        out.clear();
        let map = &self.maps[elem];
        let dofs = self.local_dofs(elem);
        match self.kind {
            SpaceKind::Bdm | SpaceKind::Rt => {
                for i in 0..self.basis.dim {
                    let s = dofs[i].sign;
                    let v = map.piola(ev.values[i]);
                    let g = map.piola_gradient(ev.grads[i]);
                    out.push(Shape {
                        val: [s * v[0], s * v[1]],
                        grad: [[s * g[0][0], s * g[0][1]], [s * g[1][0], s * g[1][1]]],
                    });
                }
            }
            SpaceKind::ContinuousVector => {
                let nb = self.basis.dim;
                for c in 0..2 {
                    for i in 0..nb {
                        let g = map.scalar_gradient(ev.grads[i][0]);
                        let mut sh = Shape::default();
                        sh.val[c] = ev.values[i][0];
                        sh.grad[c] = g;
                        out.push(sh);
                    }
                }
            }
            SpaceKind::ContinuousScalar | SpaceKind::DiscontinuousScalar => {
                for i in 0..self.basis.dim {
                    out.push(Shape {
                        val: [ev.values[i][0], 0.0],
                        grad: [map.scalar_gradient(ev.grads[i][0]), [0.0, 0.0]],
                    });
                }
            }
        }
    }

    /// Physical shapes of every local basis function on `elem` at reference point `xi`.
    pub fn shapes_at(&self, elem: usize, xi: [f64; 2]) -> Vec<Shape> {
        let mut out = Vec::with_capacity(self.local_dim);
        self.transform(elem, &self.basis.eval_reference(xi), &mut out);
        out
    }

    /// Local coefficient vector of `coeffs` on `elem` (zero for eliminated dofs).
    pub fn gather(&self, elem: usize, coeffs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.local_dofs(elem).iter().map(|d| d.global.map_or(0.0, |g| coeffs[g])));
    }

    /// Locates the triangle containing `x`; returns the element and reference point.
    pub fn locate(&self, x: [f64; 2]) -> Result<(usize, [f64; 2])> {
        let tol = 1e-12;
        for (t, m) in self.maps.iter().enumerate() {
            let xi = m.map_to_reference(x);
            if xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol {
                return Ok((t, xi));
            }
        }
        Err(Error::Geometry(format!("point {x:?} lies outside the mesh")))
    }
}

/// Quadrature rules with reference basis evaluations, reused across assemblies.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub volume_rule: QuadratureRule,
    pub volume: Vec<ReferenceEval>,
    pub edge_rule: QuadratureRule,
    /// `edge[e][r][q]`: local edge `e` at parameter `s_q` (`r = 0`) or `1 − s_q` (`r = 1`).
    pub edge: Vec<[Vec<ReferenceEval>; 2]>,
}

impl Tabulation {
    pub fn new(space: &FunctionSpace, volume_degree: usize, edge_degree: usize) -> Result<Self> {
        let volume_rule = triangle_rule(volume_degree)?;
        let edge_rule = edge_rule(edge_degree)?;
        let volume = volume_rule.points.iter().map(|p| space.basis.eval_reference(*p)).collect();
        let edge = (0..3)
            .map(|e| {
                let fwd = edge_rule.points.iter().map(|q| space.basis.eval_reference(edge_reference_point(e, q[0]))).collect();
                let rev = edge_rule.points.iter().map(|q| space.basis.eval_reference(edge_reference_point(e, 1.0 - q[0]))).collect();
                [fwd, rev]
            })
            .collect();
        Ok(Tabulation { volume_rule, volume, edge_rule, edge })
    }

    /// Default rules: degree `3p + 2` with `p` the local polynomial degree.
    pub fn default_for(space: &FunctionSpace) -> Result<Self> {
        let d = 3 * space.poly_degree() + 2;
        Tabulation::new(space, d, d)
    }
}

/// Coefficient vector over a space.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub space: Arc<FunctionSpace>,
    pub coeffs: Vec<f64>,
}

impl DiscreteField {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient length {} differs from dof count {}",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(DiscreteField { space, coeffs })
    }

    pub fn zeros(space: Arc<FunctionSpace>) -> Self {
        let n = space.n_dofs();
        DiscreteField { space, coeffs: vec![0.0; n] }
    }

    /// Value and gradient on `elem` at reference point `xi`.
    pub fn eval_element(&self, elem: usize, xi: [f64; 2]) -> Shape {
        let shapes = self.space.shapes_at(elem, xi);
        let mut out = Shape::default();
        for (d, s) in self.space.local_dofs(elem).iter().zip(&shapes) {
            if let Some(g) = d.global {
                out.add_scaled(self.coeffs[g], s);
            }
        }
        out
    }
}

/// Point evaluation; scalars are returned in the first component.
pub fn evaluate_field(field: &DiscreteField, x: [f64; 2]) -> Result<[f64; 2]> {
    let (t, xi) = field.space.locate(x)?;
    Ok(field.eval_element(t, xi).val)
}

/// Nodal (Lagrange) or moment (BDM/RT) interpolant. For scalar spaces only the
/// first component of `f` is used.
pub fn interpolate_field(space: &Arc<FunctionSpace>, f: impl Fn([f64; 2]) -> [f64; 2]) -> DiscreteField {
    let mut coeffs = vec![0.0; space.n_dofs()];
    let mut done = vec![false; space.n_dofs()];
    let ne = space.n_elements();
    match space.kind {
        SpaceKind::Bdm | SpaceKind::Rt => {
            let k = space.basis.degree;
            let family = space.basis.family;
            let deg = (2 * space.poly_degree() + 8).min(crate::quadrature::MAX_DEGREE);
            let er = edge_rule(deg).expect("edge rule");
            let tr = triangle_rule(deg).expect("triangle rule");
            let per_edge = space.basis.entity_dofs.edge[0].len();
            for t in 0..ne {
                let map = &space.maps[t];
                let dofs = space.local_dofs(t);
                let verts = map.vertices;
                for e in 0..3 {
                    let first = space.basis.entity_dofs.edge[e][0];
                    if dofs[first].global.map_or(true, |g| done[g]) {
                        continue;
                    }
                    let (la, lb) = local_edge_vertices(e);
                    let (a, b) = (verts[la], verts[lb]);
                    let nu = [b[1] - a[1], -(b[0] - a[0])];
                    let mut mom = vec![0.0; per_edge];
                    for (q, w) in er.points.iter().zip(&er.weights) {
                        let s = q[0];
                        let v = f([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                        let vn = v[0] * nu[0] + v[1] * nu[1];
                        for (j, l) in legendre01(k, s).into_iter().enumerate() {
                            mom[j] += w * vn * l;
                        }
                    }
                    for (j, &l) in space.basis.entity_dofs.edge[e].iter().enumerate() {
                        if let Some(g) = dofs[l].global {
                            coeffs[g] = dofs[l].sign * mom[j];
                            done[g] = true;
                        }
                    }
                }
                let interior = &space.basis.entity_dofs.interior;
                if !interior.is_empty() {
                    let mut mom = vec![0.0; interior.len()];
                    for (q, w) in tr.points.iter().zip(&tr.weights) {
                        let fh = map.piola_inverse(f(map.map_to_physical(*q)));
                        for (i, psi) in interior_moment_tests(family, k, *q).into_iter().enumerate() {
                            mom[i] += w * (fh[0] * psi[0] + fh[1] * psi[1]);
                        }
                    }
                    for (i, &l) in interior.iter().enumerate() {
                        if let Some(g) = dofs[l].global {
                            coeffs[g] = mom[i];
                        }
                    }
                }
            }
        }
        _ => {
            let nb = space.basis.dim;
            for t in 0..ne {
                let map = &space.maps[t];
                let dofs = space.local_dofs(t);
                for (i, node) in space.basis.nodes.iter().enumerate() {
                    let v = f(map.map_to_physical(*node));
                    let ncomp = if space.kind == SpaceKind::ContinuousVector { 2 } else { 1 };
                    for c in 0..ncomp {
                        if let Some(g) = dofs[c * nb + i].global {
                            if !done[g] {
                                coeffs[g] = v[c];
                                done[g] = true;
                            }
                        }
                    }
                }
            }
        }
    }
    DiscreteField { space: space.clone(), coeffs }
}

/// Scalar convenience wrapper around [`interpolate_field`].
pub fn interpolate_scalar(space: &Arc<FunctionSpace>, f: impl Fn([f64; 2]) -> f64) -> DiscreteField {
    interpolate_field(space, |x| [f(x), 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn topo(nx: usize, rect: Rect, periodic: bool) -> Arc<Topology> {
        Arc::new(Topology::structured(nx, nx, rect, periodic).unwrap())
    }

    fn tg() -> Rect {
        Rect::new(0.0, 0.0, 2.0 * PI, 2.0 * PI)
    }

    #[test]
    fn dof_counts() {
        let t1 = topo(1, Rect::unit(), false);
        assert_eq!(build_function_space(&t1, SpaceKind::DiscontinuousScalar, 1).unwrap().n_dofs(), 6);
        let t = topo(10, tg(), true);
        let v = build_function_space(&t, SpaceKind::Bdm, 2).unwrap();
        let q = build_function_space(&t, SpaceKind::DiscontinuousScalar, 1).unwrap();
        assert_eq!(v.n_dofs() + q.n_dofs() + 1, 2101);
        let v = build_function_space(&t, SpaceKind::ContinuousVector, 2).unwrap();
        let q = build_function_space(&t, SpaceKind::ContinuousScalar, 1).unwrap();
        assert_eq!(v.n_dofs() + q.n_dofs() + 1, 901);
        let v = build_function_space(&t, SpaceKind::Bdm, 3).unwrap();
        let q = build_function_space(&t, SpaceKind::DiscontinuousScalar, 2).unwrap();
        assert_eq!(v.n_dofs() + q.n_dofs() + 1, 4001);
        let total: usize = (0..v.n_elements()).map(|e| v.local_dofs(e).len()).sum();
        assert_eq!(total, v.n_elements() * v.local_dim());
    }

    #[test]
    fn dirichlet_elimination() {
        let t = topo(3, Rect::unit(), false);
        // P2 on a 3x3 grid: 7x7 nodes, interior 5x5.
        let v = build_function_space(&t, SpaceKind::ContinuousVector, 2).unwrap();
        assert_eq!(v.n_dofs(), 2 * 25);
        // BDM_1: interior faces only, 2 dofs each.
        let b = build_function_space(&t, SpaceKind::Bdm, 1).unwrap();
        assert_eq!(b.n_dofs(), 2 * t.faces.interior_ids.len());
        let free = build_function_space_with(&t, SpaceKind::Bdm, 1, BoundaryMode::Free).unwrap();
        assert_eq!(free.n_dofs(), 2 * t.faces.len());
    }

    fn random_field(space: &Arc<FunctionSpace>, seed: u64) -> DiscreteField {
        let mut r = rand::rngs::StdRng::seed_from_u64(seed);
        let c = (0..space.n_dofs()).map(|_| r.gen::<f64>() - 0.5).collect();
        DiscreteField::new(space.clone(), c).unwrap()
    }

    // Traces of both sides at the face quadrature points.
    fn face_traces(u: &DiscreteField) -> Vec<([f64; 2], [f64; 2], [f64; 2])> {
        let s = &u.space;
        let rule = edge_rule(7).unwrap();
        let mut out = Vec::new();
        for c in &s.topo.couplings {
            let Some((tm, em)) = c.minus else { continue };
            for q in &rule.points {
                let up = u.eval_element(c.plus.0, edge_reference_point(c.plus.1, q[0]));
                let um = u.eval_element(tm, edge_reference_point(em, 1.0 - q[0]));
                let xp = s.maps[c.plus.0].map_to_physical(edge_reference_point(c.plus.1, q[0]));
                let xm = s.maps[tm].map_to_physical(edge_reference_point(em, 1.0 - q[0]));
                assert!((xp[0] + c.shift[0] - xm[0]).abs() < 1e-12 && (xp[1] + c.shift[1] - xm[1]).abs() < 1e-12);
                out.push((up.val, um.val, c.normal));
            }
        }
        out
    }

    #[test]
    fn hdiv_normal_continuity() {
        for periodic in [false, true] {
            let t = topo(4, Rect::new(0.0, 0.0, 1.0, 1.3), periodic);
            for (kind, k) in [(SpaceKind::Bdm, 1), (SpaceKind::Bdm, 2), (SpaceKind::Bdm, 3), (SpaceKind::Rt, 0), (SpaceKind::Rt, 1), (SpaceKind::Rt, 2)] {
                let s = Arc::new(build_function_space(&t, kind, k).unwrap());
                let u = random_field(&s, 3);
                for (a, b, n) in face_traces(&u) {
                    let jn = (a[0] - b[0]) * n[0] + (a[1] - b[1]) * n[1];
                    assert!(jn.abs() <= 1e-11, "{kind:?}{k} periodic={periodic}: {jn}");
                }
            }
        }
    }

    #[test]
    fn lagrange_continuity() {
        for periodic in [false, true] {
            let t = topo(4, Rect::unit(), periodic);
            for k in 1..=4 {
                let s = Arc::new(build_function_space(&t, SpaceKind::ContinuousVector, k).unwrap());
                for (a, b, _) in face_traces(&random_field(&s, 5)) {
                    assert!((a[0] - b[0]).abs() <= 1e-11 && (a[1] - b[1]).abs() <= 1e-11, "P{k}");
                }
            }
        }
    }

    #[test]
    fn reproduction() {
        let t = topo(3, Rect::new(-0.5, -0.5, 0.5, 0.5), false);
        let free = |kind, k| Arc::new(build_function_space_with(&t, kind, k, BoundaryMode::Free).unwrap());
        let mut r = rand::rngs::StdRng::seed_from_u64(1);
        let pts: Vec<[f64; 2]> = (0..20).map(|_| [r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5]).collect();

        let b1 = free(SpaceKind::Bdm, 1);
        let c = interpolate_field(&b1, |_| [1.0, 0.0]);
        let rot = interpolate_field(&b1, |x| [x[1], -x[0]]);
        for p in &pts {
            let v = evaluate_field(&c, *p).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
            let w = evaluate_field(&rot, *p).unwrap();
            assert!((w[0] - p[1]).abs() < 1e-12 && (w[1] + p[0]).abs() < 1e-12);
        }
        let p1 = free(SpaceKind::ContinuousScalar, 1);
        let l = interpolate_scalar(&p1, |x| x[0] + x[1]);
        assert!((evaluate_field(&l, [0.3, 0.4]).unwrap()[0] - 0.7).abs() < 1e-13);

        // Fields already in the space are reproduced exactly.
        for (kind, k) in [(SpaceKind::Bdm, 2), (SpaceKind::Rt, 1), (SpaceKind::ContinuousVector, 3)] {
            let s = free(kind, k);
            let u = random_field(&s, 11);
            let back = interpolate_field(&s, |x| evaluate_field(&u, x).unwrap());
            for p in &pts {
                let a = evaluate_field(&u, *p).unwrap();
                let b = evaluate_field(&back, *p).unwrap();
                assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12, "{kind:?}{k}");
            }
        }
        let z = interpolate_field(&b1, |_| [0.0, 0.0]);
        assert!(z.coeffs.iter().all(|&c| c == 0.0));
        assert!(matches!(evaluate_field(&z, [2.0, 0.0]), Err(Error::Geometry(_))));
    }

    #[test]
    fn wrong_length_rejected() {
        let t = topo(2, Rect::unit(), false);
        let s = Arc::new(build_function_space(&t, SpaceKind::DiscontinuousScalar, 1).unwrap());
        assert!(DiscreteField::new(s, vec![0.0; 3]).is_err());
    }
}
