//! Reference bases on the triangle `(0,0),(1,0),(0,1)` and affine element maps.
//!
//! Every basis is built from the dual of its degrees of freedom: a spanning set
//! of monomials is inverted against the dof functionals.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::local_edge_vertices;
use crate::quadrature::{edge_rule, triangle_rule};

pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Lagrange,
    Bdm,
    Rt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueRank {
    Scalar,
    Vector,
}

/// Number of monomials of total degree `<= k`.
pub fn polynomial_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponents `(a, b)` of `x^a y^b`, ordered by total degree then by `b`.
fn monomial_exponents(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(polynomial_count(k));
    for d in 0..=k as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn powi(x: f64, n: i32) -> f64 {
    if n <= 0 {
        1.0
    } else {
        x.powi(n)
    }
}

/// Values and first derivatives of the monomials, centred at the reference
/// barycentre, at `p`.
fn eval_monomials(exps: &[(i32, i32)], p: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let p = [p[0] - 1.0 / 3.0, p[1] - 1.0 / 3.0];
    let mut v = Vec::with_capacity(exps.len());
    let mut g = Vec::with_capacity(exps.len());
    for &(a, b) in exps {
        let xa = powi(p[0], a);
        let yb = powi(p[1], b);
        v.push(xa * yb);
        let dx = if a > 0 { a as f64 * powi(p[0], a - 1) * yb } else { 0.0 };
        let dy = if b > 0 { b as f64 * xa * powi(p[1], b - 1) } else { 0.0 };
        g.push([dx, dy]);
    }
    (v, g)
}

/// Shifted Legendre polynomials `P_j(2s − 1)` for `j = 0..=n`.
pub fn legendre01(n: usize, s: f64) -> Vec<f64> {
    let z = 2.0 * s - 1.0;
    let mut out = vec![1.0; n + 1];
    if n >= 1 {
        out[1] = z;
    }
    for j in 2..=n {
        out[j] = ((2 * j - 1) as f64 * z * out[j - 1] - (j - 1) as f64 * out[j - 2]) / j as f64;
    }
    out
}

/// Dof indices attached to each mesh entity of the reference triangle.
#[derive(Clone, Debug, Default)]
pub struct EntityDofs {
    pub vertex: [Vec<usize>; 3],
    pub edge: [Vec<usize>; 3],
    pub interior: Vec<usize>,
}

/// Nodal (Lagrange) or moment-based (BDM, RT) basis on the reference triangle.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    pub family: Family,
    pub degree: usize,
    pub dim: usize,
    pub value_rank: ValueRank,
    /// Polynomial degree of the spanning monomials.
    pub poly_degree: usize,
    pub entity_dofs: EntityDofs,
    /// Lagrange nodes in dof order (empty for H(div) families).
    pub nodes: Vec<[f64; 2]>,
    exps: Vec<(i32, i32)>,
    /// `coeffs[(i * ncomp + c) * nmono + m]`.
    coeffs: Vec<f64>,
}

/// Reference values and gradients of every basis function at one point.
/// For scalar bases `values[i]` is `[φ_i, 0]` and `grads[i][0]` holds `∇φ_i`.
#[derive(Clone, Debug)]
pub struct ReferenceEval {
    pub values: Vec<[f64; 2]>,
    /// `grads[i][c][j] = ∂φ_i,c / ∂ξ_j`.
    pub grads: Vec<[[f64; 2]; 2]>,
}

impl ReferenceBasis {
    pub fn new(family: Family, degree: usize) -> Result<Self> {
        match family {
            Family::Lagrange => lagrange(degree),
            Family::Bdm => hdiv(Family::Bdm, degree),
            Family::Rt => hdiv(Family::Rt, degree),
        }
    }

    fn ncomp(&self) -> usize {
        match self.value_rank {
            ValueRank::Scalar => 1,
            ValueRank::Vector => 2,
        }
    }

    /// Evaluates all basis functions on the reference element.
    pub fn eval_reference(&self, p: [f64; 2]) -> ReferenceEval {
        let (mv, mg) = eval_monomials(&self.exps, p);
        let nm = self.exps.len();
        let nc = self.ncomp();
        let mut values = vec![[0.0; 2]; self.dim];
        let mut grads = vec![[[0.0; 2]; 2]; self.dim];
        for i in 0..self.dim {
            for c in 0..nc {
                let row = &self.coeffs[(i * nc + c) * nm..(i * nc + c + 1) * nm];
                let mut v = 0.0;
                let mut g = [0.0; 2];
                for m in 0..nm {
                    v += row[m] * mv[m];
                    g[0] += row[m] * mg[m][0];
                    g[1] += row[m] * mg[m][1];
                }
                values[i][c] = v;
                grads[i][c] = g;
            }
        }
        ReferenceEval { values, grads }
    }
}

fn lagrange_nodes(k: usize) -> (Vec<[f64; 2]>, EntityDofs) {
    let mut nodes: Vec<[f64; 2]> = REFERENCE_VERTICES.to_vec();
    let mut ent = EntityDofs { vertex: [vec![0], vec![1], vec![2]], ..Default::default() };
    for e in 0..3 {
        let (la, lb) = local_edge_vertices(e);
        let (a, b) = (REFERENCE_VERTICES[la], REFERENCE_VERTICES[lb]);
        for j in 1..k {
            let s = j as f64 / k as f64;
            ent.edge[e].push(nodes.len());
            nodes.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    for j in 1..k {
        for i in 1..k - j {
            ent.interior.push(nodes.len());
            nodes.push([i as f64 / k as f64, j as f64 / k as f64]);
        }
    }
    (nodes, ent)
}

fn invert_dual(dual: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    dual.try_inverse()
        .ok_or_else(|| Error::Geometry(format!("dual matrix of {what} is singular")))
}

fn lagrange(k: usize) -> Result<ReferenceBasis> {
    if !(1..=4).contains(&k) {
        return Err(Error::Capability(format!("Lagrange degree {k} not in 1..=4")));
    }
    let exps = monomial_exponents(k);
    let n = exps.len();
    let (nodes, entity_dofs) = lagrange_nodes(k);
    let mut dual = DMatrix::zeros(n, n);
    for (j, p) in nodes.iter().enumerate() {
        let (v, _) = eval_monomials(&exps, *p);
        for i in 0..n {
            dual[(i, j)] = v[i];
        }
    }
    let c = invert_dual(dual, "Lagrange")?;
    let mut coeffs = vec![0.0; n * n];
    for i in 0..n {
        for m in 0..n {
            coeffs[i * n + m] = c[(i, m)];
        }
    }
    Ok(ReferenceBasis {
        family: Family::Lagrange,
        degree: k,
        dim: n,
        value_rank: ValueRank::Scalar,
        poly_degree: k,
        entity_dofs,
        nodes,
        exps,
        coeffs,
    })
}

/// Vector polynomial as coefficients over `(component, monomial)`.
type VecPoly = Vec<f64>;

fn eval_vecpoly(p: &VecPoly, exps: &[(i32, i32)], x: [f64; 2]) -> [f64; 2] {
    let (v, _) = eval_monomials(exps, x);
    let nm = exps.len();
    let mut out = [0.0; 2];
    for c in 0..2 {
        out[c] = (0..nm).map(|m| p[c * nm + m] * v[m]).sum();
    }
    out
}

fn hdiv(family: Family, k: usize) -> Result<ReferenceBasis> {
    let (poly_degree, dim) = match family {
        Family::Bdm if (1..=4).contains(&k) => (k, (k + 1) * (k + 2)),
        Family::Rt if k <= 3 => (k + 1, (k + 1) * (k + 3)),
        _ => return Err(Error::Capability(format!("{family:?} degree {k} not supported"))),
    };
    let exps = monomial_exponents(poly_degree);
    let nm = exps.len();
    let unit = |c: usize, m: usize| {
        let mut p = vec![0.0; 2 * nm];
        p[c * nm + m] = 1.0;
        p
    };

    // Spanning set of the element space.
    let mut span: Vec<VecPoly> = Vec::with_capacity(dim);
    let n_low = polynomial_count(k);
    for c in 0..2 {
        for m in 0..n_low {
            span.push(unit(c, m));
        }
    }
    if family == Family::Rt {
        // x · (homogeneous degree-k monomials)
        for &(a, b) in exps.iter().take(n_low) {
            if (a + b) as usize != k {
                continue;
            }
            let mut p = vec![0.0; 2 * nm];
            let ix = exps.iter().position(|&e| e == (a + 1, b)).unwrap();
            let iy = exps.iter().position(|&e| e == (a, b + 1)).unwrap();
            p[ix] = 1.0;
            p[nm + iy] = 1.0;
            span.push(p);
        }
    }
    debug_assert_eq!(span.len(), dim);

    let n_tests = interior_moment_tests(family, k, [0.0, 0.0]).len();
    let per_edge = k + 1;
    debug_assert_eq!(3 * per_edge + n_tests, dim);

    let erule = edge_rule(2 * poly_degree + 1)?;
    let trule = triangle_rule(2 * poly_degree + 1)?;
    let mut dual = DMatrix::zeros(dim, dim);
    for (i, p) in span.iter().enumerate() {
        for e in 0..3 {
            let (la, lb) = local_edge_vertices(e);
            let (a, b) = (REFERENCE_VERTICES[la], REFERENCE_VERTICES[lb]);
            let nu = [b[1] - a[1], -(b[0] - a[0])];
            for (q, w) in erule.points.iter().zip(&erule.weights) {
                let s = q[0];
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let v = eval_vecpoly(p, &exps, x);
                let vn = v[0] * nu[0] + v[1] * nu[1];
                for (j, l) in legendre01(k, s).into_iter().enumerate() {
                    dual[(i, e * per_edge + j)] += w * vn * l;
                }
            }
        }
        for (q, w) in trule.points.iter().zip(&trule.weights) {
            let v = eval_vecpoly(p, &exps, *q);
            for (t, g) in interior_moment_tests(family, k, *q).into_iter().enumerate() {
                dual[(i, 3 * per_edge + t)] += w * (v[0] * g[0] + v[1] * g[1]);
            }
        }
    }
    let c = invert_dual(dual, "H(div) element")?;
    let mut coeffs = vec![0.0; dim * 2 * nm];
    for i in 0..dim {
        for (s, p) in span.iter().enumerate() {
            let cis = c[(i, s)];
            if cis == 0.0 {
                continue;
            }
            for r in 0..2 * nm {
                coeffs[i * 2 * nm + r] += cis * p[r];
            }
        }
    }
    let mut entity_dofs = EntityDofs::default();
    for e in 0..3 {
        entity_dofs.edge[e] = (e * per_edge..(e + 1) * per_edge).collect();
    }
    entity_dofs.interior = (3 * per_edge..dim).collect();
    Ok(ReferenceBasis {
        family,
        degree: k,
        dim,
        value_rank: ValueRank::Vector,
        poly_degree,
        entity_dofs,
        nodes: Vec::new(),
        exps,
        coeffs,
    })
}

/// Interior moment test functions of an H(div) basis at a reference point:
/// `(P_{k−2})² ⊕ P̃_{k−2}·(y, −x)` for BDM_k and `(P_{k−1})²` for RT_k.
pub fn interior_moment_tests(family: Family, k: usize, p: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    match family {
        Family::Bdm if k >= 2 => {
            let exps = monomial_exponents(k - 2);
            let (v, _) = eval_monomials(&exps, p);
            for c in 0..2 {
                for m in 0..exps.len() {
                    let mut t = [0.0; 2];
                    t[c] = v[m];
                    out.push(t);
                }
            }
            for (m, &(a, b)) in exps.iter().enumerate() {
                if (a + b) as usize == k - 2 {
                    out.push([v[m] * p[1], -v[m] * p[0]]);
                }
            }
        }
        Family::Rt if k >= 1 => {
            let exps = monomial_exponents(k - 1);
            let (v, _) = eval_monomials(&exps, p);
            for c in 0..2 {
                for m in 0..exps.len() {
                    let mut t = [0.0; 2];
                    t[c] = v[m];
                    out.push(t);
                }
            }
        }
        _ => {}
    }
    out
}

/// Affine map `x = v₀ + J ξ` of the reference triangle onto a physical one.
#[derive(Clone, Copy, Debug)]
pub struct ElementMap {
    pub vertices: [[f64; 2]; 3],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub jac_inv: [[f64; 2]; 2],
    /// `J⁻ᵀ`.
    pub jac_inv_t: [[f64; 2]; 2],
}

impl ElementMap {
    pub fn new(vertices: [[f64; 2]; 3]) -> Result<Self> {
        let [a, b, c] = vertices;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = (jac[0][0].abs() + jac[0][1].abs() + jac[1][0].abs() + jac[1][1].abs()).powi(2);
        if !(det > 1e-14 * scale) {
            return Err(Error::Geometry(format!("element map is singular or inverted (det J = {det})")));
        }
        let jac_inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        let jac_inv_t = [[jac_inv[0][0], jac_inv[1][0]], [jac_inv[0][1], jac_inv[1][1]]];
        Ok(ElementMap { vertices, jac, det, jac_inv, jac_inv_t })
    }

    pub fn map_to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        let v0 = self.vertices[0];
        [
            v0[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            v0[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn map_to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.vertices[0][0], x[1] - self.vertices[0][1]];
        [
            self.jac_inv[0][0] * d[0] + self.jac_inv[0][1] * d[1],
            self.jac_inv[1][0] * d[0] + self.jac_inv[1][1] * d[1],
        ]
    }

    /// Contravariant Piola transform of a reference vector.
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [(j[0][0] * v[0] + j[0][1] * v[1]) / self.det, (j[1][0] * v[0] + j[1][1] * v[1]) / self.det]
    }

    /// Inverse Piola: `det J · J⁻¹ v`.
    pub fn piola_inverse(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac_inv;
        [(j[0][0] * v[0] + j[0][1] * v[1]) * self.det, (j[1][0] * v[0] + j[1][1] * v[1]) * self.det]
    }

    /// Physical gradient of a Piola-mapped function: `J Ĝ J⁻¹ / det J`.
    pub fn piola_gradient(&self, g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let j = &self.jac;
        let ji = &self.jac_inv;
        let mut jg = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                jg[r][c] = j[r][0] * g[0][c] + j[r][1] * g[1][c];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = (jg[r][0] * ji[0][c] + jg[r][1] * ji[1][c]) / self.det;
            }
        }
        out
    }

    /// Physical gradient of a scalar: `J⁻ᵀ ∇̂`.
    pub fn scalar_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let t = &self.jac_inv_t;
        [t[0][0] * g[0] + t[0][1] * g[1], t[1][0] * g[0] + t[1][1] * g[1]]
    }
}

/// Scalar Lagrange values and reference gradients at a reference point.
pub fn eval_scalar_basis(basis: &ReferenceBasis, point: [f64; 2]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    if basis.family != Family::Lagrange {
        return Err(Error::Contract("eval_scalar_basis needs a Lagrange basis".into()));
    }
    let r = basis.eval_reference(point);
    Ok((r.values.iter().map(|v| v[0]).collect(), r.grads.iter().map(|g| g[0]).collect()))
}

/// Piola-mapped H(div) basis functions: physical values, divergences and gradients.
#[allow(clippy::type_complexity)]
pub fn eval_hdiv_basis(
    basis: &ReferenceBasis,
    map: &ElementMap,
    point: [f64; 2],
) -> Result<(Vec<[f64; 2]>, Vec<f64>, Vec<[[f64; 2]; 2]>)> {
    if basis.family == Family::Lagrange {
        return Err(Error::Contract("eval_hdiv_basis needs a BDM or RT basis".into()));
    }
    if !(map.det > 0.0) {
        return Err(Error::Geometry("singular element map".into()));
    }
    let r = basis.eval_reference(point);
    let values = r.values.iter().map(|v| map.piola(*v)).collect();
    let divs = r.grads.iter().map(|g| (g[0][0] + g[1][1]) / map.det).collect();
    let grads = r.grads.iter().map(|g| map.piola_gradient(*g)).collect();
    Ok((values, divs, grads))
}
