//! Assembly of the mass, viscous, pressure-divergence, convective and
//! stabilization operators.
//!
//! Face conventions: `[[v]] = v⁺ − v⁻` and `{{v}} = ½(v⁺ + v⁻)` on interior
//! faces, `[[v]] = {{v}} = v` on boundary faces, with `n_F` pointing out of the
//! plus element. All velocity-velocity matrices share one sparsity pattern.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::FaceCoupling;
use crate::space::{DiscreteField, FunctionSpace, LocalDof, Shape, SpaceKind, Tabulation};
use crate::sparse::CsrMatrix;

/// Which viscous stress enters the diffusion form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StressVariant {
    /// `∇u + ∇uᵀ − ⅔(∇·u)I`.
    FullDeviatoric,
    /// `∇u + ∇uᵀ`.
    SymmetricPair,
    /// `∇u`.
    GradientOnly,
}

impl StressVariant {
    pub fn stress(self, g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        match self {
            StressVariant::GradientOnly => *g,
            StressVariant::SymmetricPair => {
                [[2.0 * g[0][0], g[0][1] + g[1][0]], [g[0][1] + g[1][0], 2.0 * g[1][1]]]
            }
            StressVariant::FullDeviatoric => {
                let d = 2.0 / 3.0 * (g[0][0] + g[1][1]);
                [[2.0 * g[0][0] - d, g[0][1] + g[1][0]], [g[0][1] + g[1][0], 2.0 * g[1][1] - d]]
            }
        }
    }
}

/// Penalty and material parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxParams {
    pub zeta: f64,
    pub eta: f64,
    pub nu: f64,
    pub delta: f64,
}

impl FluxParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::InvalidArgument(format!("zeta = {} outside [0, 1]", self.zeta)));
        }
        if !(self.eta > 0.0 && self.nu > 0.0 && self.delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("need eta > 0, nu > 0, delta >= 0; got {self:?}")));
        }
        Ok(())
    }
}

/// Interior penalty default `3(k+1)(k+2)`.
pub fn default_eta(k: usize) -> f64 {
    3.0 * ((k + 1) * (k + 2)) as f64
}

/// Time-independent operators of one velocity/pressure pair.
#[derive(Clone, Debug)]
pub struct FormMatrices {
    pub m: CsrMatrix,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub mean: Vec<f64>,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn matvec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn contract(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

const FACE_CHUNK: usize = 2048;

/// Shapes on both sides of a face at every face quadrature point.
struct FaceShapes {
    plus: Vec<Vec<Shape>>,
    minus: Option<Vec<Vec<Shape>>>,
    weights: Vec<f64>,
}

/// Assembler bound to one velocity space and its quadrature tabulation.
pub struct VelocityAssembler {
    pub space: Arc<FunctionSpace>,
    pub tab: Tabulation,
    pattern: CsrMatrix,
    face_terms_needed: Vec<bool>,
    // Pattern positions of each local matrix entry, `NO_POS` for eliminated dofs.
    elem_pos: Vec<Vec<u32>>,
    face_pos: Vec<Vec<u32>>,
    elem_shapes: OnceLock<Vec<(Vec<Vec<Shape>>, Vec<f64>)>>,
    face_shapes: OnceLock<Vec<Option<FaceShapes>>>,
}

const NO_POS: u32 = u32::MAX;

fn positions(pattern: &CsrMatrix, dofs: &[LocalDof]) -> Vec<u32> {
    let mut out = Vec::with_capacity(dofs.len() * dofs.len());
    for r in dofs {
        for c in dofs {
            out.push(match (r.global, c.global) {
                (Some(r), Some(c)) => pattern.find(r, c).expect("entry in pattern") as u32,
                _ => NO_POS,
            });
        }
    }
    out
}

impl VelocityAssembler {
    pub fn new(space: &Arc<FunctionSpace>) -> Result<Self> {
        Self::with_tabulation(space, Tabulation::default_for(space)?)
    }

    pub fn with_tabulation(space: &Arc<FunctionSpace>, tab: Tabulation) -> Result<Self> {
        if !space.is_vector() {
            return Err(Error::Contract("velocity assembler needs a vector-valued space".into()));
        }
        // Continuous spaces have vanishing interior jumps.
        let continuous = space.kind == SpaceKind::ContinuousVector;
        let face_terms_needed: Vec<bool> =
            space.topo.couplings.iter().map(|c| !(continuous && c.minus.is_some())).collect();
        let n = space.n_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut add_block = |a: &[LocalDof], b: &[LocalDof]| {
            for da in a.iter().filter_map(|d| d.global) {
                for db in b.iter().filter_map(|d| d.global) {
                    rows[da].push(db);
                }
            }
        };
        for t in 0..space.n_elements() {
            let d = space.local_dofs(t);
            add_block(d, d);
        }
        for (c, &needed) in space.topo.couplings.iter().zip(&face_terms_needed) {
            if let (true, Some((tm, _))) = (needed, c.minus) {
                let (dp, dm) = (space.local_dofs(c.plus.0), space.local_dofs(tm));
                add_block(dp, dm);
                add_block(dm, dp);
            }
        }
        let pattern = CsrMatrix::from_pattern(n, n, rows);
        if pattern.nnz() >= NO_POS as usize {
            return Err(Error::InvalidArgument("velocity pattern too large".into()));
        }
        let elem_pos = (0..space.n_elements()).map(|t| positions(&pattern, space.local_dofs(t))).collect();
        let face_pos = space
            .topo
            .couplings
            .iter()
            .zip(&face_terms_needed)
            .map(|(c, &needed)| if needed { positions(&pattern, &face_dofs(space, c)) } else { Vec::new() })
            .collect();
        Ok(VelocityAssembler {
            space: space.clone(),
            tab,
            pattern,
            face_terms_needed,
            elem_pos,
            face_pos,
            elem_shapes: OnceLock::new(),
            face_shapes: OnceLock::new(),
        })
    }

    /// Zero matrix carrying the shared velocity-velocity pattern.
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    fn element_shapes(&self, t: usize) -> &(Vec<Vec<Shape>>, Vec<f64>) {
        let all = self
            .elem_shapes
            .get_or_init(|| (0..self.space.n_elements()).into_par_iter().map(|t| self.map_element_shapes(t)).collect());
        &all[t]
    }

    fn face_shapes(&self, ci: usize) -> &FaceShapes {
        let all = self.face_shapes.get_or_init(|| {
            let couplings = &self.space.topo.couplings;
            (0..couplings.len())
                .into_par_iter()
                .map(|ci| self.face_terms_needed[ci].then(|| self.map_face_shapes(&couplings[ci])))
                .collect()
        });
        all[ci].as_ref().expect("face shapes for a coupling with face terms")
    }

    fn map_element_shapes(&self, t: usize) -> (Vec<Vec<Shape>>, Vec<f64>) {
        let det = self.space.maps[t].det;
        let shapes = self
            .tab
            .volume
            .iter()
            .map(|ev| {
                let mut s = Vec::new();
                self.space.transform(t, ev, &mut s);
                s
            })
            .collect();
        let w = self.tab.volume_rule.weights.iter().map(|w| w * det).collect();
        (shapes, w)
    }

    fn map_face_shapes(&self, c: &FaceCoupling) -> FaceShapes {
        let side = |t: usize, e: usize, r: usize| -> Vec<Vec<Shape>> {
            self.tab.edge[e][r]
                .iter()
                .map(|ev| {
                    let mut s = Vec::new();
                    self.space.transform(t, ev, &mut s);
                    s
                })
                .collect()
        };
        FaceShapes {
            plus: side(c.plus.0, c.plus.1, 0),
            minus: c.minus.map(|(t, e)| side(t, e, 1)),
            weights: self.tab.edge_rule.weights.iter().map(|w| w * c.length).collect(),
        }
    }

    /// Volume integral with a pointwise kernel `k(qp, shapes, weight, local)`.
    fn assemble_volume<K>(&self, kernel: K) -> CsrMatrix
    where
        K: Fn(usize, usize, &[Shape], f64, &mut [f64]) + Sync,
    {
        let n = self.space.local_dim();
        let locals: Vec<Vec<f64>> = (0..self.space.n_elements())
            .into_par_iter()
            .map(|t| {
                let (shapes, w) = self.element_shapes(t);
                let mut local = vec![0.0; n * n];
                for (q, s) in shapes.iter().enumerate() {
                    kernel(t, q, s, w[q], &mut local);
                }
                local
            })
            .collect();
        let mut m = self.pattern.clone();
        for (pos, local) in self.elem_pos.iter().zip(&locals) {
            add_local(&mut m, pos, local);
        }
        m
    }

    /// Face integral. The kernel sees per-function jumps and averages of the
    /// combined plus/minus dof list and writes the combined local matrix.
    fn assemble_faces<K>(&self, m: &mut CsrMatrix, kernel: K)
    where
        K: Fn(usize, usize, &FaceData, f64, &mut [f64]) + Sync,
    {
        let couplings = &self.space.topo.couplings;
        let ids: Vec<usize> = (0..couplings.len()).filter(|&i| self.face_terms_needed[i]).collect();
        for chunk in ids.chunks(FACE_CHUNK) {
            let locals: Vec<(usize, Vec<f64>)> = chunk
                .par_iter()
                .map(|&ci| {
                    let c = &couplings[ci];
                    let fs = self.face_shapes(ci);
                    let nloc = fs.plus[0].len() + fs.minus.as_ref().map_or(0, |m| m[0].len());
                    let mut local = vec![0.0; nloc * nloc];
                    for q in 0..fs.weights.len() {
                        let data = FaceData::new(c, &fs.plus[q], fs.minus.as_ref().map(|m| &m[q][..]));
                        kernel(ci, q, &data, fs.weights[q], &mut local);
                    }
                    (ci, local)
                })
                .collect();
            for (ci, local) in locals {
                add_local(m, &self.face_pos[ci], &local);
            }
        }
    }

    pub fn mass(&self) -> CsrMatrix {
        let n = self.space.local_dim();
        self.assemble_volume(|_, _, s, w, local| {
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += w * dot(s[i].val, s[j].val);
                }
            }
        })
    }

    /// Viscous form without the factor ν.
    pub fn viscous(&self, variant: StressVariant, eta: f64) -> CsrMatrix {
        let n = self.space.local_dim();
        let mut m = self.assemble_volume(|_, _, s, w, local| {
            let tau: Vec<[[f64; 2]; 2]> = s.iter().map(|x| variant.stress(&x.grad)).collect();
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += w * contract(&tau[j], &s[i].grad);
                }
            }
        });
        self.assemble_faces(&mut m, |_, _, d, w, local| {
            let nl = d.jump.len();
            let pen = eta / d.length;
            let tn: Vec<[f64; 2]> = d.avg_grad.iter().map(|g| matvec(&variant.stress(g), d.normal)).collect();
            for i in 0..nl {
                for j in 0..nl {
                    local[i * nl + j] +=
                        w * (-dot(d.jump[j], tn[i]) - dot(d.jump[i], tn[j]) + pen * dot(d.jump[i], d.jump[j]));
                }
            }
        });
        m
    }

    /// Convective form `c_h(β; v, w)` with β frozen; rows are test functions.
    pub fn convective(&self, beta: &DiscreteField, zeta: f64) -> Result<CsrMatrix> {
        let bs = &beta.space;
        if !bs.is_vector() {
            return Err(Error::Contract("convecting field must be normal-continuous (vector H(div) or continuous space)".into()));
        }
        if !Arc::ptr_eq(&bs.topo, &self.space.topo) && bs.n_elements() != self.space.n_elements() {
            return Err(Error::Contract("convecting field lives on a different mesh".into()));
        }
        let n = self.space.local_dim();
        let couplings = &self.space.topo.couplings;
        let kernel = |b: &Shape, s: &[Shape], w: f64, local: &mut [f64]| {
            let divb = b.div();
            for j in 0..n {
                let adv = matvec(&s[j].grad, b.val);
                for i in 0..n {
                    local[i * n + j] += w * (dot(adv, s[i].val) + 0.5 * divb * dot(s[j].val, s[i].val));
                }
            }
        };
        let face_kernel = |bn: f64, d: &FaceData, w: f64, local: &mut [f64]| {
            let nl = d.jump.len();
            for i in 0..nl {
                for j in 0..nl {
                    local[i * nl + j] +=
                        w * (-bn * dot(d.jump[j], d.avg[i]) + zeta * bn.abs() * dot(d.jump[j], d.jump[i]));
                }
            }
        };
        let mut m;
        if Arc::ptr_eq(bs, &self.space) {
            // β is a combination of the test functions already evaluated.
            let elem_coeffs: Vec<Vec<f64>> =
                (0..self.space.n_elements()).map(|t| local_coeffs(beta, self.space.local_dofs(t))).collect();
            m = self.assemble_volume(|t, _, s, w, local| {
                let mut b = Shape::default();
                for (c, sh) in elem_coeffs[t].iter().zip(s) {
                    b.add_scaled(*c, sh);
                }
                kernel(&b, s, w, local)
            });
            self.assemble_faces(&mut m, |ci, _, d, w, local| {
                let coeffs = local_coeffs(beta, &face_dofs(&self.space, &couplings[ci]));
                let avg = coeffs.iter().zip(&d.avg).fold([0.0, 0.0], |a, (c, v)| [a[0] + c * v[0], a[1] + c * v[1]]);
                face_kernel(dot(avg, d.normal), d, w, local)
            });
        } else {
            let btab = Tabulation::new(bs, self.tab.volume_rule.exact_degree, self.tab.edge_rule.exact_degree)?;
            let sampler = Sampler { field: beta, tab: &btab };
            m = self.assemble_volume(|t, q, s, w, local| kernel(&sampler.volume(t, q), s, w, local));
            self.assemble_faces(&mut m, |ci, q, d, w, local| {
                face_kernel(sampler.normal_flux(&couplings[ci], q), d, w, local)
            });
        }
        Ok(m)
    }

    /// `δ(|u| div v, div w)` with `|u|` taken from the given field.
    pub fn graddiv_nonlinear(&self, u: &DiscreteField, delta: f64) -> Result<CsrMatrix> {
        if delta == 0.0 {
            return Ok(self.pattern.clone());
        }
        let utab = Tabulation::new(&u.space, self.tab.volume_rule.exact_degree, self.tab.edge_rule.exact_degree)?;
        let sampler = Sampler { field: u, tab: &utab };
        let n = self.space.local_dim();
        Ok(self.assemble_volume(|t, q, s, w, local| {
            let v = sampler.volume(t, q).val;
            let mag = (v[0] * v[0] + v[1] * v[1]).sqrt();
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += w * delta * mag * s[j].div() * s[i].div();
                }
            }
        }))
    }

    /// Linear grad-div term `ε(div v, div w)`.
    pub fn graddiv_linear(&self, eps: f64) -> CsrMatrix {
        let n = self.space.local_dim();
        self.assemble_volume(|_, _, s, w, local| {
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += w * eps * s[j].div() * s[i].div();
                }
            }
        })
    }

    /// `∫ f·φ_i`.
    pub fn load(&self, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> Vec<f64> {
        let n = self.space.local_dim();
        let locals: Vec<Vec<f64>> = (0..self.space.n_elements())
            .into_par_iter()
            .map(|t| {
                let (shapes, w) = self.element_shapes(t);
                let map = &self.space.maps[t];
                let mut local = vec![0.0; n];
                for (q, s) in shapes.iter().enumerate() {
                    let fx = f(map.map_to_physical(self.tab.volume_rule.points[q]));
                    for i in 0..n {
                        local[i] += w[q] * dot(fx, s[i].val);
                    }
                }
                local
            })
            .collect();
        let mut out = vec![0.0; self.space.n_dofs()];
        for (t, local) in locals.iter().enumerate() {
            for (d, v) in self.space.local_dofs(t).iter().zip(local) {
                if let Some(g) = d.global {
                    out[g] += v;
                }
            }
        }
        out
    }

    /// `B_ij = (div φ_j, ψ_i)` with rows over the pressure space.
    pub fn divergence(&self, q: &Arc<FunctionSpace>) -> Result<CsrMatrix> {
        if q.is_vector() {
            return Err(Error::Contract("pressure space must be scalar".into()));
        }
        let qtab = Tabulation::new(q, self.tab.volume_rule.exact_degree, self.tab.edge_rule.exact_degree)?;
        let nv = self.space.local_dim();
        let locals: Vec<Vec<f64>> = (0..self.space.n_elements())
            .into_par_iter()
            .map(|t| {
                let (shapes, w) = self.element_shapes(t);
                let mut ps = Vec::new();
                let nq = q.local_dim();
                let mut local = vec![0.0; nq * nv];
                for (k, s) in shapes.iter().enumerate() {
                    q.transform(t, &qtab.volume[k], &mut ps);
                    for i in 0..nq {
                        for j in 0..nv {
                            local[i * nv + j] += w[k] * ps[i].val[0] * s[j].div();
                        }
                    }
                }
                local
            })
            .collect();
        let mut trip = Vec::new();
        for (t, local) in locals.iter().enumerate() {
            let (dq, dv) = (q.local_dofs(t), self.space.local_dofs(t));
            for (i, ri) in dq.iter().enumerate() {
                let Some(r) = ri.global else { continue };
                for (j, cj) in dv.iter().enumerate() {
                    if let Some(c) = cj.global {
                        trip.push((r, c, local[i * nv + j]));
                    }
                }
            }
        }
        Ok(CsrMatrix::from_triplets(q.n_dofs(), self.space.n_dofs(), &trip))
    }
}

/// Plus dofs followed by minus dofs.
fn face_dofs(space: &FunctionSpace, c: &FaceCoupling) -> Vec<LocalDof> {
    let mut dofs = space.local_dofs(c.plus.0).to_vec();
    if let Some((tm, _)) = c.minus {
        dofs.extend_from_slice(space.local_dofs(tm));
    }
    dofs
}

fn add_local(m: &mut CsrMatrix, pos: &[u32], local: &[f64]) {
    for (&p, &v) in pos.iter().zip(local) {
        if p != NO_POS {
            m.values[p as usize] += v;
        }
    }
}

fn local_coeffs(field: &DiscreteField, dofs: &[LocalDof]) -> Vec<f64> {
    dofs.iter().map(|d| d.global.map_or(0.0, |g| field.coeffs[g])).collect()
}

/// Jumps, averages and averaged gradients of the combined plus/minus basis at one face point.
pub struct FaceData {
    pub jump: Vec<[f64; 2]>,
    pub avg: Vec<[f64; 2]>,
    pub avg_grad: Vec<[[f64; 2]; 2]>,
    pub normal: [f64; 2],
    pub length: f64,
}

impl FaceData {
    fn new(c: &FaceCoupling, plus: &[Shape], minus: Option<&[Shape]>) -> Self {
        let n = plus.len() + minus.map_or(0, |m| m.len());
        let mut jump = Vec::with_capacity(n);
        let mut avg = Vec::with_capacity(n);
        let mut avg_grad = Vec::with_capacity(n);
        let half = if minus.is_some() { 0.5 } else { 1.0 };
        let scale = |g: &[[f64; 2]; 2], a: f64| [[a * g[0][0], a * g[0][1]], [a * g[1][0], a * g[1][1]]];
        for s in plus {
            jump.push(s.val);
            avg.push([half * s.val[0], half * s.val[1]]);
            avg_grad.push(scale(&s.grad, half));
        }
        if let Some(m) = minus {
            for s in m {
                jump.push([-s.val[0], -s.val[1]]);
                avg.push([0.5 * s.val[0], 0.5 * s.val[1]]);
                avg_grad.push(scale(&s.grad, 0.5));
            }
        }
        FaceData { jump, avg, avg_grad, normal: c.normal, length: c.length }
    }
}

/// Evaluates a field at the assembler's quadrature points.
struct Sampler<'a> {
    field: &'a DiscreteField,
    tab: &'a Tabulation,
}

impl Sampler<'_> {
    fn combine(&self, t: usize, ev: &crate::element::ReferenceEval) -> Shape {
        let space = &self.field.space;
        let mut s = Vec::new();
        space.transform(t, ev, &mut s);
        let mut out = Shape::default();
        for (d, sh) in space.local_dofs(t).iter().zip(&s) {
            if let Some(g) = d.global {
                out.add_scaled(self.field.coeffs[g], sh);
            }
        }
        out
    }

    fn volume(&self, t: usize, q: usize) -> Shape {
        self.combine(t, &self.tab.volume[q])
    }

    /// `{{β}}·n_F` at face point `q`.
    fn normal_flux(&self, c: &FaceCoupling, q: usize) -> f64 {
        let bp = self.combine(c.plus.0, &self.tab.edge[c.plus.1][0][q]).val;
        match c.minus {
            Some((tm, em)) => {
                let bm = self.combine(tm, &self.tab.edge[em][1][q]).val;
                0.5 * (dot(bp, c.normal) + dot(bm, c.normal))
            }
            None => dot(bp, c.normal),
        }
    }
}

pub fn assemble_mass_matrix(v: &Arc<FunctionSpace>) -> Result<CsrMatrix> {
    Ok(VelocityAssembler::new(v)?.mass())
}

pub fn assemble_viscous_form(v: &Arc<FunctionSpace>, variant: StressVariant, params: &FluxParams) -> Result<CsrMatrix> {
    Ok(VelocityAssembler::new(v)?.viscous(variant, params.eta))
}

pub fn assemble_pressure_divergence_form(v: &Arc<FunctionSpace>, q: &Arc<FunctionSpace>) -> Result<CsrMatrix> {
    VelocityAssembler::new(v)?.divergence(q)
}

pub fn assemble_convective_form(v: &Arc<FunctionSpace>, beta: &DiscreteField, zeta: f64) -> Result<CsrMatrix> {
    VelocityAssembler::new(v)?.convective(beta, zeta)
}

pub fn assemble_graddiv_stabilization(v: &Arc<FunctionSpace>, u: &DiscreteField, delta: f64) -> Result<CsrMatrix> {
    VelocityAssembler::new(v)?.graddiv_nonlinear(u, delta)
}

pub fn assemble_load_vector(v: &Arc<FunctionSpace>, f: impl Fn([f64; 2], f64) -> [f64; 2] + Sync, t: f64) -> Result<Vec<f64>> {
    Ok(VelocityAssembler::new(v)?.load(|x| f(x, t)))
}

/// `m_i = ∫ ψ_i` over the pressure space.
pub fn pressure_mean_vector(q: &Arc<FunctionSpace>) -> Result<Vec<f64>> {
    let tab = Tabulation::new(q, 2 * q.poly_degree().max(1), 1)?;
    let mut out = vec![0.0; q.n_dofs()];
    let mut s = Vec::new();
    for t in 0..q.n_elements() {
        let det = q.maps[t].det;
        for (k, ev) in tab.volume.iter().enumerate() {
            q.transform(t, ev, &mut s);
            let w = tab.volume_rule.weights[k] * det;
            for (d, sh) in q.local_dofs(t).iter().zip(&s) {
                if let Some(g) = d.global {
                    out[g] += w * sh.val[0];
                }
            }
        }
    }
    Ok(out)
}

/// Mass, viscous, divergence and mean operators of a velocity/pressure pair.
pub fn assemble_forms(
    assembler: &VelocityAssembler,
    q: &Arc<FunctionSpace>,
    variant: StressVariant,
    eta: f64,
) -> Result<FormMatrices> {
    Ok(FormMatrices {
        m: assembler.mass(),
        a: assembler.viscous(variant, eta),
        b: assembler.divergence(q)?,
        mean: pressure_mean_vector(q)?,
    })
}
