//! Norms, errors, convergence rates, kernel fields and identity checks.
//!
//! Everything here integrates directly from point evaluations of discrete
//! fields and does not share code paths with the matrix assembly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{StressVariant, VelocityAssembler};
use crate::mesh::FaceCoupling;
use crate::quadrature::{edge_rule, triangle_rule, QuadratureRule, MAX_DEGREE};
use crate::space::{edge_reference_point, BoundaryMode, DiscreteField, Shape, SpaceKind, Tabulation};

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub k: usize,
    pub h: f64,
    pub dof: usize,
    pub vel_l2: f64,
    pub pres_l2: f64,
    pub vel_order: Option<f64>,
    pub pres_order: Option<f64>,
}

/// Fills the order columns from consecutive rows.
pub fn fill_orders(reports: &mut [ErrorReport]) -> Result<()> {
    let hv: Vec<(f64, f64)> = reports.iter().map(|r| (r.h, r.vel_l2)).collect();
    let hp: Vec<(f64, f64)> = reports.iter().map(|r| (r.h, r.pres_l2)).collect();
    let ov = observed_order(&hv)?;
    let op = observed_order(&hp)?;
    for (i, r) in reports.iter_mut().enumerate() {
        r.vel_order = if i == 0 { None } else { Some(ov[i - 1]) };
        r.pres_order = if i == 0 { None } else { Some(op[i - 1]) };
    }
    Ok(())
}

/// `log(e₀/e₁)/log(h₀/h₁)` for consecutive `(h, e)` pairs.
pub fn observed_order(errors: &[(f64, f64)]) -> Result<Vec<f64>> {
    for (i, &(h, e)) in errors.iter().enumerate() {
        if !(h > 0.0 && e > 0.0) {
            return Err(Error::InvalidArgument(format!("row {i}: need positive h and error, got ({h}, {e})")));
        }
        if i > 0 && !(h < errors[i - 1].0) {
            return Err(Error::InvalidArgument("mesh sizes must be strictly decreasing".into()));
        }
    }
    Ok(errors.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect())
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn frob(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn rule_degree(d: usize) -> usize {
    d.clamp(1, MAX_DEGREE)
}

/// Sum over elements of `f(elem, x, shape, weight)` at every volume point.
fn integrate_volume<F>(field: &DiscreteField, rule: &QuadratureRule, f: F) -> f64
where
    F: Fn(usize, [f64; 2], &Shape) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..field.space.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = &field.space.maps[t];
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(&xi, &w)| w * map.det * f(t, map.map_to_physical(xi), &field.eval_element(t, xi)))
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum()
}

/// Field traces on both sides of a face point.
struct Trace {
    plus: Shape,
    minus: Option<Shape>,
}

impl Trace {
    fn jump(&self) -> [f64; 2] {
        match &self.minus {
            Some(m) => sub(self.plus.val, m.val),
            None => self.plus.val,
        }
    }

    fn avg(&self) -> [f64; 2] {
        match &self.minus {
            Some(m) => [0.5 * (self.plus.val[0] + m.val[0]), 0.5 * (self.plus.val[1] + m.val[1])],
            None => self.plus.val,
        }
    }

    /// `{{g(∇w)}}` for a pointwise map of the gradient.
    fn avg_of(&self, g: impl Fn(&Shape) -> [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let p = g(&self.plus);
        match &self.minus {
            Some(m) => {
                let q = g(m);
                [[0.5 * (p[0][0] + q[0][0]), 0.5 * (p[0][1] + q[0][1])], [0.5 * (p[1][0] + q[1][0]), 0.5 * (p[1][1] + q[1][1])]]
            }
            None => p,
        }
    }
}

fn trace(field: &DiscreteField, c: &FaceCoupling, s: f64) -> Trace {
    let plus = field.eval_element(c.plus.0, edge_reference_point(c.plus.1, s));
    let minus = c.minus.map(|(t, e)| field.eval_element(t, edge_reference_point(e, 1.0 - s)));
    Trace { plus, minus }
}

/// Sum over couplings of `f(coupling, traces…, weight)`; `fields` are traced together.
fn integrate_faces<F>(fields: &[&DiscreteField], degree: usize, include_boundary: bool, f: F) -> f64
where
    F: Fn(&FaceCoupling, &[Trace]) -> f64 + Sync,
{
    let rule = edge_rule(rule_degree(degree)).expect("edge rule within range");
    let couplings = &fields[0].space.topo.couplings;
    let parts: Vec<f64> = couplings
        .par_iter()
        .filter(|c| include_boundary || c.minus.is_some())
        .map(|c| {
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(p, &w)| {
                    let tr: Vec<Trace> = fields.iter().map(|fl| trace(fl, c, p[0])).collect();
                    w * c.length * f(c, &tr)
                })
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum()
}

fn volume_rule_for(field: &DiscreteField, factor: usize, extra: usize) -> QuadratureRule {
    triangle_rule(rule_degree(factor * field.space.poly_degree() + extra)).expect("triangle rule within range")
}

fn face_degree(field: &DiscreteField) -> usize {
    2 * field.space.poly_degree() + 2
}

fn require_vector(w: &DiscreteField, what: &str) -> Result<()> {
    if w.space.is_vector() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} needs a vector-valued field")))
    }
}

fn dev_sym(g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    StressVariant::FullDeviatoric.stress(g)
}

/// `‖∇w + ∇wᵀ − ⅔(div w)I‖²` over all elements.
fn dev_sym_sq(w: &DiscreteField) -> f64 {
    let rule = volume_rule_for(w, 2, 0);
    integrate_volume(w, &rule, |_, _, s| {
        let d = dev_sym(&s.grad);
        frob(&d, &d)
    })
}

fn jump_sq(w: &DiscreteField, include_boundary: bool) -> f64 {
    integrate_faces(&[w], face_degree(w), include_boundary, |c, t| {
        let j = t[0].jump();
        dot(j, j) / c.length
    })
}

/// `(‖∇w+∇wᵀ−⅔(div w)I‖² + Σ_F h_F⁻¹‖[[w]]‖²)^{1/2}`; boundary faces optional.
pub fn sym_triple_norm(w: &DiscreteField, include_boundary: bool) -> Result<f64> {
    require_vector(w, "sym_triple_norm")?;
    Ok((dev_sym_sq(w) + jump_sq(w, include_boundary)).sqrt())
}

/// `(Σ_F h_F⁻¹‖[[w]]‖²)^{1/2}` over all faces.
pub fn jump_seminorm(w: &DiscreteField) -> Result<f64> {
    require_vector(w, "jump_seminorm")?;
    Ok(jump_sq(w, true).sqrt())
}

/// Normal and tangential parts `(Σ h⁻¹‖[[w]]·n‖², Σ h⁻¹‖[[w]]·t‖²)`.
pub fn jump_components(w: &DiscreteField) -> Result<(f64, f64)> {
    require_vector(w, "jump_components")?;
    let n = integrate_faces(&[w], face_degree(w), true, |c, t| dot(t[0].jump(), c.normal).powi(2) / c.length);
    let tt = integrate_faces(&[w], face_degree(w), true, |c, t| {
        dot(t[0].jump(), [-c.normal[1], c.normal[0]]).powi(2) / c.length
    });
    Ok((n, tt))
}

/// `{{β}}·n_F` from a trace pair.
fn normal_flux(b: &Trace, n: [f64; 2]) -> f64 {
    dot(b.avg(), n)
}

/// `(ζ Σ_F ∫|β·n_F| |[[w]]|²)^{1/2}`.
pub fn convective_seminorm(beta: &DiscreteField, w: &DiscreteField, zeta: f64) -> Result<f64> {
    require_vector(beta, "convective_seminorm")?;
    require_vector(w, "convective_seminorm")?;
    if zeta == 0.0 {
        return Ok(0.0);
    }
    let deg = beta.space.poly_degree() + face_degree(w);
    let s = integrate_faces(&[beta, w], deg, true, |c, t| {
        let j = t[1].jump();
        normal_flux(&t[0], c.normal).abs() * dot(j, j)
    });
    Ok((zeta * s).max(0.0).sqrt())
}

/// `‖f − f_h‖_{L²}` with a rule of degree `3p + 4`; scalar fields use component 0.
pub fn l2_error_field(fh: &DiscreteField, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> f64 {
    let rule = volume_rule_for(fh, 3, 4);
    let vector = fh.space.is_vector();
    integrate_volume(fh, &rule, |_, x, s| {
        let e = sub(f(x), s.val);
        if vector {
            dot(e, e)
        } else {
            e[0] * e[0]
        }
    })
    .max(0.0)
    .sqrt()
}

/// Pressure error after removing the mean of both the exact and the discrete pressure.
pub fn l2_error_pressure(ph: &DiscreteField, p: impl Fn([f64; 2]) -> f64 + Sync) -> Result<f64> {
    if ph.space.is_vector() {
        return Err(Error::Contract("pressure error needs a scalar field".into()));
    }
    let rule = volume_rule_for(ph, 3, 4);
    let area = ph.space.topo.mesh.domain.area();
    let mean_exact = integrate_volume(ph, &rule, |_, x, _| p(x)) / area;
    let mean_h = integrate_volume(ph, &rule, |_, _, s| s.val[0]) / area;
    let e2 = integrate_volume(ph, &rule, |_, x, s| {
        let e = (p(x) - mean_exact) - (s.val[0] - mean_h);
        e * e
    });
    Ok(e2.max(0.0).sqrt())
}

/// `½‖u‖²`.
pub fn kinetic_energy(u: &DiscreteField) -> f64 {
    let rule = volume_rule_for(u, 2, 0);
    0.5 * integrate_volume(u, &rule, |_, _, s| dot(s.val, s.val))
}

/// `max |div u|` over the volume points of the default assembly rule.
pub fn max_cellwise_divergence(u: &DiscreteField) -> f64 {
    let space = &u.space;
    if !space.is_vector() {
        return 0.0;
    }
    let tab = match Tabulation::default_for(space) {
        Ok(t) => t,
        Err(_) => return f64::NAN,
    };
    (0..space.n_elements())
        .into_par_iter()
        .map(|t| {
            let mut shapes = Vec::new();
            let dofs = space.local_dofs(t);
            tab.volume
                .iter()
                .map(|ev| {
                    space.transform(t, ev, &mut shapes);
                    let d: f64 = dofs
                        .iter()
                        .zip(&shapes)
                        .filter_map(|(d, s)| d.global.map(|g| u.coeffs[g] * s.div()))
                        .sum();
                    d.abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Maximum of `|u|` over element vertices and volume points.
pub fn max_velocity_magnitude(u: &DiscreteField) -> f64 {
    let rule = volume_rule_for(u, 1, 0);
    let mut pts: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    pts.extend_from_slice(&rule.points);
    (0..u.space.n_elements())
        .into_par_iter()
        .map(|t| {
            pts.iter().map(|&xi| {
                let v = u.eval_element(t, xi).val;
                dot(v, v).sqrt()
            })
            .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Conformal Killing field of the plane: `k₁`-rotation plus translation `(k₂, k₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelField2D {
    pub k: [f64; 3],
}

/// Ten-parameter conformal Killing field in three dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelField3D {
    pub k: [f64; 10],
}

/// Value, gradient `G_ij = ∂w_i/∂x_j` and `G + Gᵀ − ⅔ tr(G) I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEval {
    pub value: Vec<f64>,
    pub gradient: Vec<Vec<f64>>,
    pub dev_sym_grad: Vec<Vec<f64>>,
}

impl KernelField2D {
    pub fn value(&self, x: [f64; 2]) -> [f64; 2] {
        let k = &self.k;
        [k[0] * x[1] + k[1], -k[0] * x[0] + k[2]]
    }

    pub fn gradient(&self) -> [[f64; 2]; 2] {
        [[0.0, self.k[0]], [-self.k[0], 0.0]]
    }
}

impl KernelField3D {
    pub fn value(&self, x: [f64; 3]) -> [f64; 3] {
        let k = &self.k;
        let r = [[0.0, k[0], k[1]], [-k[0], 0.0, k[2]], [-k[1], -k[2], 0.0]];
        let c = [k[3], k[4], k[5]];
        let q = [k[7], k[8], k[9]];
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let s = 2.0 * (q[0] * x[0] + q[1] * x[1] + q[2] * x[2]) + k[6];
        let mut w = [0.0; 3];
        for i in 0..3 {
            w[i] = r[i][0] * x[0] + r[i][1] * x[1] + r[i][2] * x[2] + c[i] - r2 * q[i] + s * x[i];
        }
        w
    }

    pub fn gradient(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let k = &self.k;
        let r = [[0.0, k[0], k[1]], [-k[0], 0.0, k[2]], [-k[1], -k[2], 0.0]];
        let q = [k[7], k[8], k[9]];
        let s = 2.0 * (q[0] * x[0] + q[1] * x[1] + q[2] * x[2]) + k[6];
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = r[i][j] - 2.0 * x[j] * q[i] + 2.0 * q[j] * x[i] + if i == j { s } else { 0.0 };
            }
        }
        g
    }
}

/// `G + Gᵀ − ⅔ tr(G) I` for a square gradient.
pub fn deviatoric_sym(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = g.len();
    let tr: f64 = (0..d).map(|i| g[i][i]).sum();
    (0..d)
        .map(|i| (0..d).map(|j| g[i][j] + g[j][i] - if i == j { 2.0 / 3.0 * tr } else { 0.0 }).collect())
        .collect()
}

/// Evaluates the kernel field with `coeffs` (3 in 2D, 10 in 3D) at `x`.
pub fn eval_kernel_field(dim: usize, coeffs: &[f64], x: &[f64]) -> Result<KernelEval> {
    let (value, gradient): (Vec<f64>, Vec<Vec<f64>>) = match (dim, coeffs.len(), x.len()) {
        (2, 3, 2) => {
            let f = KernelField2D { k: [coeffs[0], coeffs[1], coeffs[2]] };
            let g = f.gradient();
            (f.value([x[0], x[1]]).to_vec(), g.iter().map(|r| r.to_vec()).collect())
        }
        (3, 10, 3) => {
            let mut k = [0.0; 10];
            k.copy_from_slice(coeffs);
            let f = KernelField3D { k };
            let p = [x[0], x[1], x[2]];
            (f.value(p).to_vec(), f.gradient(p).iter().map(|r| r.to_vec()).collect())
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "kernel field needs dim 2 with 3 coefficients or dim 3 with 10; got dim {dim}, {} coefficients, {}-point",
                coeffs.len(),
                x.len()
            )))
        }
    };
    let dev_sym_grad = deviatoric_sym(&gradient);
    Ok(KernelEval { value, gradient, dev_sym_grad })
}

/// Identities checked against the assembled forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentityKind {
    /// `(β·∇w, w) + ½((div β)w, w) = Σ_F ⟨(β·n)[[w]], {{w}}⟩`.
    JumpIdentity,
    /// `(∇wᵀ, ∇w) = ‖div w‖²` for continuous fields vanishing on the boundary.
    Allaire,
    /// `a_h(w,w) = ½‖τ‖² + (2/9)‖div w‖² − 2Σ⟨[[w]], {{τ}}n⟩ + η|w|²_J`.
    Decomposition,
    /// `a_h(w,w)` with every dilatational term collected separately.
    GraddivSign,
    /// `c_h(β; w, w) = |w|²_β`.
    ConvectiveEnergy,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 5] = [
        IdentityKind::JumpIdentity,
        IdentityKind::Allaire,
        IdentityKind::Decomposition,
        IdentityKind::GraddivSign,
        IdentityKind::ConvectiveEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::JumpIdentity => "jump_identity",
            IdentityKind::Allaire => "allaire",
            IdentityKind::Decomposition => "decomposition",
            IdentityKind::GraddivSign => "graddiv_sign",
            IdentityKind::ConvectiveEnergy => "convective_energy",
        }
    }
}

/// Fields and parameters for one identity evaluation.
pub struct IdentityInputs<'a> {
    pub w: &'a DiscreteField,
    /// Convecting field for the convective identities.
    pub beta: Option<&'a DiscreteField>,
    pub eta: f64,
    pub zeta: f64,
}

fn relative(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let s = scale.max(lhs.abs()).max(rhs.abs());
    if s == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / s
    }
}

/// Convecting fields need a continuous normal trace that vanishes on the boundary.
fn require_normal_conforming(beta: &DiscreteField) -> Result<()> {
    let kind = beta.space.kind;
    let ok = matches!(kind, SpaceKind::Bdm | SpaceKind::Rt | SpaceKind::ContinuousVector)
        && (beta.space.mode == BoundaryMode::Constrained || beta.space.topo.faces.boundary_ids.is_empty());
    if ok {
        Ok(())
    } else {
        Err(Error::Contract("convecting field must lie in H0(div): normal-continuous with zero boundary flux".into()))
    }
}

/// `(β·∇w, w)`, `½((div β)w, w)` and `Σ_F ⟨({{β}}·n)[[w]], {{w}}⟩`.
fn convective_parts(beta: &DiscreteField, w: &DiscreteField) -> Result<(f64, f64, f64)> {
    let p = w.space.poly_degree();
    let deg = beta.space.poly_degree() + 2 * p + 2;
    let rule = triangle_rule(rule_degree(deg))?;
    let parts: Vec<(f64, f64)> = (0..w.space.n_elements())
        .into_par_iter()
        .map(|t| {
            let det = w.space.maps[t].det;
            rule.points.iter().zip(&rule.weights).fold((0.0, 0.0), |(a, b), (&xi, &wq)| {
                let ws = w.eval_element(t, xi);
                let bs = beta.eval_element(t, xi);
                let adv = mat_vec(&ws.grad, bs.val);
                (a + wq * det * dot(adv, ws.val), b + wq * det * 0.5 * bs.div() * dot(ws.val, ws.val))
            })
        })
        .collect();
    let (adv, dil) = parts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let central = integrate_faces(&[beta, w], deg, true, |c, t| normal_flux(&t[0], c.normal) * dot(t[1].jump(), t[1].avg()));
    Ok((adv, dil, central))
}

/// Relative residual of the named identity.
pub fn verify_identity(kind: IdentityKind, inputs: &IdentityInputs) -> Result<f64> {
    let w = inputs.w;
    require_vector(w, kind.name())?;
    match kind {
        IdentityKind::JumpIdentity | IdentityKind::ConvectiveEnergy => {
            let beta = inputs.beta.ok_or_else(|| Error::Contract(format!("{} needs a convecting field", kind.name())))?;
            require_normal_conforming(beta)?;
            if !std::sync::Arc::ptr_eq(&beta.space.topo, &w.space.topo) {
                return Err(Error::Contract("fields must share a mesh".into()));
            }
            let (adv, dil, central) = convective_parts(beta, w)?;
            if kind == IdentityKind::JumpIdentity {
                Ok(relative(adv + dil, central, adv.abs() + dil.abs() + central.abs()))
            } else {
                let asm = VelocityAssembler::new(&w.space)?;
                let c = asm.convective(beta, inputs.zeta)?;
                let lhs = c.quad_form(&w.coeffs);
                let rhs = convective_seminorm(beta, w, inputs.zeta)?.powi(2);
                Ok(relative(lhs, rhs, adv.abs() + dil.abs() + central.abs() + rhs))
            }
        }
        IdentityKind::Allaire => {
            let dirichlet = w.space.mode == BoundaryMode::Constrained || w.space.topo.faces.boundary_ids.is_empty();
            if w.space.kind != SpaceKind::ContinuousVector || !dirichlet {
                return Err(Error::Contract("allaire identity needs a continuous field vanishing on the boundary".into()));
            }
            let rule = volume_rule_for(w, 2, 0);
            let lhs = integrate_volume(w, &rule, |_, _, s| {
                let g = &s.grad;
                g[0][0] * g[0][0] + 2.0 * g[0][1] * g[1][0] + g[1][1] * g[1][1]
            });
            let rhs = integrate_volume(w, &rule, |_, _, s| s.div() * s.div());
            let scale = integrate_volume(w, &rule, |_, _, s| frob(&s.grad, &s.grad));
            Ok(relative(lhs, rhs, scale))
        }
        IdentityKind::Decomposition | IdentityKind::GraddivSign => {
            let asm = VelocityAssembler::new(&w.space)?;
            let a = asm.viscous(StressVariant::FullDeviatoric, inputs.eta);
            let lhs = a.quad_form(&w.coeffs);
            let rule = volume_rule_for(w, 2, 0);
            let fd = face_degree(w);
            let div2 = integrate_volume(w, &rule, |_, _, s| s.div() * s.div());
            let jumps = jump_sq(w, true);
            let terms: Vec<f64> = if kind == IdentityKind::Decomposition {
                let tau2 = dev_sym_sq(w);
                let cross = integrate_faces(&[w], fd, true, |c, t| {
                    let tn = mat_vec(&t[0].avg_of(|s| dev_sym(&s.grad)), c.normal);
                    dot(t[0].jump(), tn)
                });
                vec![0.5 * tau2, 2.0 / 9.0 * div2, -2.0 * cross, inputs.eta * jumps]
            } else {
                let sym = |s: &Shape| StressVariant::SymmetricPair.stress(&s.grad);
                let vol = integrate_volume(w, &rule, |_, _, s| frob(&sym(s), &s.grad));
                let cross = integrate_faces(&[w], fd, true, |c, t| dot(t[0].jump(), mat_vec(&t[0].avg_of(sym), c.normal)));
                let dil = integrate_faces(&[w], fd, true, |c, t| {
                    let d = t[0].avg_of(|s| [[s.div(), 0.0], [0.0, s.div()]]);
                    dot(t[0].jump(), mat_vec(&d, c.normal))
                });
                vec![vol, -2.0 * cross, inputs.eta * jumps, 4.0 / 3.0 * dil, -2.0 / 3.0 * div2]
            };
            let rhs: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|x| x.abs()).sum();
            Ok(relative(lhs, rhs, scale))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orders_of_exact_power_law() {
        let rows: Vec<(f64, f64)> = [0.8, 0.4, 0.2, 0.1].iter().map(|&h: &f64| (h, 2.5 * h.powi(3))).collect();
        for r in observed_order(&rows).unwrap() {
            assert!((r - 3.0).abs() < 1e-12);
        }
        assert!(observed_order(&[(0.5, 1.0), (0.25, 0.0)]).is_err());
        assert!(observed_order(&[(0.25, 1.0), (0.5, 0.5)]).is_err());
    }

    #[test]
    fn kernel_examples() {
        let e = eval_kernel_field(2, &[1.0, 0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(e.value, vec![0.0, -1.0]);
        assert!(e.dev_sym_grad.iter().flatten().all(|v| v.abs() < 1e-15));
        let mut k = [0.0; 10];
        k[6] = 1.0;
        let e = eval_kernel_field(3, &k, &[0.3, -0.2, 0.7]).unwrap();
        assert_eq!(e.value, vec![0.3, -0.2, 0.7]);
        assert!(eval_kernel_field(4, &k, &[0.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn kernel_3d_gradient_matches_differences(k in proptest::collection::vec(-1.0f64..1.0, 10),
                                                   x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let mut kk = [0.0; 10];
            kk.copy_from_slice(&k);
            let f = KernelField3D { k: kk };
            let p = [x[0], x[1], x[2]];
            let g = f.gradient(p);
            let h = 1e-6;
            for j in 0..3 {
                let mut a = p;
                let mut b = p;
                a[j] += h;
                b[j] -= h;
                let (wa, wb) = (f.value(a), f.value(b));
                for i in 0..3 {
                    let fd = (wa[i] - wb[i]) / (2.0 * h);
                    prop_assert!((fd - g[i][j]).abs() < 1e-8);
                }
            }
            let e = eval_kernel_field(3, &k, &x).unwrap();
            prop_assert!(e.dev_sym_grad.iter().flatten().all(|v| v.abs() < 1e-12));
        }
    }
}
