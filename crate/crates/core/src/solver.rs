//! Saddle-point solves, Picard linearization and BDF time stepping.

use std::collections::VecDeque;
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};
use nalgebra::{DMatrix, DVector};

use crate::analysis;
use crate::cli::{setup_case, CaseConfig, CaseSetup};
use crate::error::{Error, Result};
use crate::forms::{assemble_forms, FluxParams, FormMatrices, StressVariant, VelocityAssembler};
use crate::space::{interpolate_field, DiscreteField, FunctionSpace};
use crate::sparse::CsrMatrix;

/// BDF coefficients `(a₀, [a₁, …])` for `(a₀uⁿ⁺¹ − Σ aᵢ uⁿ⁺¹⁻ⁱ)/Δt`.
pub fn bdf_coefficients(order: usize) -> (f64, Vec<f64>) {
    match order {
        1 => (1.0, vec![1.0]),
        2 => (1.5, vec![2.0, -0.5]),
        3 => (11.0 / 6.0, vec![3.0, -1.5, 1.0 / 3.0]),
        _ => panic!("BDF order {order} not supported"),
    }
}

/// Time step, end time and startup schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeScheme {
    pub dt: f64,
    pub t_end: f64,
    /// Seed the first three levels from an exact solution instead of ramping BDF1 → BDF3.
    pub exact_start: bool,
}

impl TimeScheme {
    pub fn new(dt: f64, t_end: f64, exact_start: bool) -> Result<Self> {
        if !(dt > 0.0) || !(t_end >= dt) {
            return Err(Error::InvalidArgument(format!("need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}")));
        }
        Ok(TimeScheme { dt, t_end, exact_start })
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// BDF order used for step `n` (1-based level index of the new state).
    pub fn order_for_level(&self, n: usize) -> usize {
        if self.exact_start {
            3
        } else {
            n.min(3)
        }
    }
}

/// Solver for the augmented system `[K, −Bᵀ, 0; −B, 0, m; 0, mᵀ, 0]` with
/// unknowns `[u, p, λ]`.
///
/// Restarted GMRES on the full system, right-preconditioned by a sparse
/// `LDLᵀ` of the symmetric part with a small negative shift on the pressure
/// and multiplier diagonal. The shifted matrix is quasi-definite, so the
/// factorization is stable under the fill-reducing ordering. The factor is
/// reused while the velocity block changes and rebuilt once GMRES slows
/// down. A pivoted sparse LU of the exact matrix is the fallback.
pub struct SaddleSolver {
    nu: usize,
    np: usize,
    global: CsrMatrix,
    k_map: Vec<usize>,
    k_row_ptr: Vec<usize>,
    k_col_idx: Vec<usize>,
    pre_col_ptr: Vec<usize>,
    pre_row_idx: Vec<usize>,
    // Global positions of `S[i][j]` and `S[j][i]` for each stored upper entry.
    pre_src: Vec<(usize, usize)>,
    pre_diag: Vec<usize>,
    ldlt_symbolic: SymbolicCholesky<usize>,
    ldlt: Option<Vec<f64>>,
    stale: bool,
    // Krylov iterations of the first solve after the last factorization.
    baseline: Option<usize>,
    matrix_norm: f64,
    lu: Option<Lu<usize, f64>>,
    // Previous solution, used as the Krylov starting guess.
    last: Option<Vec<f64>>,
    pub stats: SolverStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub factorizations: usize,
    pub solves: usize,
    pub krylov_iterations: usize,
    pub lu_fallbacks: usize,
}

const SOLVE_TOL: f64 = 1e-13;
const STAGNATION_TOL: f64 = 1e-11;
const RESTART: usize = 40;
const MAX_CYCLES: usize = 12;
const SHIFT: f64 = 1e-4;
const NONE: usize = usize::MAX;

impl SaddleSolver {
    pub fn new(k_pattern: &CsrMatrix, b: &CsrMatrix, mean: &[f64]) -> Result<Self> {
        faer::set_global_parallelism(faer::Par::Seq);
        let nu = k_pattern.nrows;
        let np = b.nrows;
        if b.ncols != nu || mean.len() != np {
            return Err(Error::InvalidArgument("inconsistent saddle block sizes".into()));
        }
        let n = nu + np + 1;
        let bt = b.transpose();
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(k_pattern.nnz() + 2 * b.nnz() + 2 * np);
        for r in 0..nu {
            let (cols, _) = k_pattern.row(r);
            for &c in cols {
                trip.push((r, c, 0.0));
            }
            let (cols, vals) = bt.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((r, nu + c, -v));
            }
        }
        for r in 0..np {
            let (cols, vals) = b.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((nu + r, c, -v));
            }
            trip.push((nu + r, nu + np, mean[r]));
            trip.push((nu + np, nu + r, mean[r]));
        }
        let global = CsrMatrix::from_triplets(n, n, &trip);
        let mut k_map = Vec::with_capacity(k_pattern.nnz());
        for r in 0..nu {
            let (cols, _) = k_pattern.row(r);
            for &c in cols {
                k_map.push(global.find(r, c).expect("velocity entry in global pattern"));
            }
        }

        // Upper triangle of the symmetrized pattern plus every diagonal, as CSC.
        let gt = global.transpose();
        let mut pre_col_ptr = vec![0];
        let mut pre_row_idx = Vec::new();
        let mut pre_src = Vec::new();
        let mut pre_diag = vec![NONE; n];
        for j in 0..n {
            let mut rows: Vec<usize> = global.row(j).0.iter().chain(gt.row(j).0).copied().filter(|&i| i <= j).collect();
            rows.push(j);
            rows.sort_unstable();
            rows.dedup();
            for i in rows {
                if i == j {
                    pre_diag[j] = pre_row_idx.len();
                }
                pre_row_idx.push(i);
                pre_src.push((global.find(i, j).unwrap_or(NONE), global.find(j, i).unwrap_or(NONE)));
            }
            pre_col_ptr.push(pre_row_idx.len());
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &pre_col_ptr, None, &pre_row_idx);
        let ldlt_symbolic = factorize_symbolic_cholesky(sym, Side::Upper, SymmetricOrdering::Amd, Default::default())
            .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
        Ok(SaddleSolver {
            nu,
            np,
            global,
            k_map,
            k_row_ptr: k_pattern.row_ptr.clone(),
            k_col_idx: k_pattern.col_idx.clone(),
            pre_col_ptr,
            pre_row_idx,
            pre_src,
            pre_diag,
            ldlt_symbolic,
            ldlt: None,
            stale: false,
            baseline: None,
            matrix_norm: 0.0,
            lu: None,
            last: None,
            stats: SolverStats::default(),
        })
    }

    pub fn size(&self) -> usize {
        self.nu + self.np + 1
    }

    /// Replaces the velocity block; `k` must carry the pattern given at construction.
    pub fn set_velocity_block(&mut self, k: &CsrMatrix) {
        assert!(k.row_ptr == self.k_row_ptr && k.col_idx == self.k_col_idx, "velocity block pattern changed");
        for (i, &g) in self.k_map.iter().enumerate() {
            self.global.values[g] = k.values[i];
        }
        self.lu = None;
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.global
    }

    fn block_name(&self, i: usize) -> &'static str {
        if i < self.nu {
            "velocity"
        } else if i < self.nu + self.np {
            "pressure"
        } else {
            "mean multiplier"
        }
    }

    /// Shift on the constraint diagonal, relative to the Schur complement scale.
    fn shift(&self) -> f64 {
        let mut kdiag: f64 = 0.0;
        for r in 0..self.nu {
            kdiag = kdiag.max(self.global.get(r, r).abs());
        }
        let mut off: f64 = 0.0;
        for r in self.nu..self.size() {
            off = self.global.row(r).1.iter().fold(off, |m, v| m.max(v.abs()));
        }
        if kdiag > 0.0 && off > 0.0 {
            SHIFT * off * off / kdiag
        } else {
            SHIFT
        }
    }

    /// Factorizes the preconditioner from the current matrix values.
    pub fn factorize(&mut self) -> Result<()> {
        let n = self.size();
        let shift = self.shift();
        let v = &self.global.values;
        let mut values: Vec<f64> = self
            .pre_src
            .iter()
            .map(|&(a, b)| {
                let x = if a == NONE { 0.0 } else { v[a] };
                let y = if b == NONE { 0.0 } else { v[b] };
                0.5 * (x + y)
            })
            .collect();
        for j in self.nu..n {
            values[self.pre_diag[j]] -= shift;
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.pre_col_ptr, None, &self.pre_row_idx);
        let mat = SparseColMatRef::new(sym, &values);
        let mut l = vec![0.0; self.ldlt_symbolic.len_val()];
        let mut mem = MemBuffer::new(self.ldlt_symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        let reg = LdltRegularization::default();
        self.ldlt_symbolic
            .factorize_numeric_ldlt(&mut l, mat, Side::Upper, reg, Par::Seq, MemStack::new(&mut mem), Default::default())
            .map_err(|e| Error::Solver(format!("preconditioner factorization failed: {e:?}")))?;
        self.ldlt = Some(l);
        self.stale = false;
        self.baseline = None;
        self.stats.factorizations += 1;
        Ok(())
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let l = self.ldlt.as_ref().expect("factorization present");
        let f = LdltRef::new(&self.ldlt_symbolic, l);
        let mut m = Mat::<f64>::from_fn(r.len(), 1, |i, _| r[i]);
        let mut mem = MemBuffer::new(self.ldlt_symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        f.solve_in_place_with_conj(Conj::No, m.as_mut(), Par::Seq, MemStack::new(&mut mem));
        (0..r.len()).map(|i| m[(i, 0)]).collect()
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let ax = self.global.matvec(x);
        rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    /// `‖rhs − S x‖_∞`.
    pub fn residual_inf(&self, x: &[f64], rhs: &[f64]) -> f64 {
        inf_norm(&self.residual(x, rhs))
    }

    /// Solves with the current matrix values.
    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if rhs.len() != n {
            return Err(Error::InvalidArgument(format!("rhs length {} differs from system size {n}", rhs.len())));
        }
        self.stats.solves += 1;
        let bnorm = inf_norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        self.matrix_norm = (0..n).map(|r| self.global.row(r).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut fresh = false;
        if self.ldlt.is_none() || self.stale {
            fresh = self.factorize().is_ok();
        }
        let guess = self.last.take().filter(|g| g.iter().all(|v| v.is_finite()));
        let mut x = None;
        if self.ldlt.is_some() {
            x = self.gmres(rhs, bnorm, guess.clone());
            if x.is_none() && !fresh && self.factorize().is_ok() {
                x = self.gmres(rhs, bnorm, None);
            }
        }
        let x = match x {
            Some(x) => x,
            None => self.lu_solve(rhs, bnorm)?,
        };
        self.last = Some(x.clone());
        Ok(x)
    }

    /// Normwise backward error scale `‖S‖_∞‖x‖_∞ + ‖b‖_∞`.
    fn backward_scale(&self, x: &[f64], bnorm: f64) -> f64 {
        self.matrix_norm * inf_norm(x) + bnorm
    }

    /// Solves with the pivoted LU of the exact matrix only.
    pub fn solve_direct(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if rhs.len() != n {
            return Err(Error::InvalidArgument(format!("rhs length {} differs from system size {n}", rhs.len())));
        }
        let bnorm = inf_norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        self.lu_solve(rhs, bnorm)
    }

    /// Right-preconditioned restarted GMRES from a zero initial guess.
    fn gmres(&mut self, rhs: &[f64], bnorm: f64, guess: Option<Vec<f64>>) -> Option<Vec<f64>> {
        let n = rhs.len();
        let (mut x, mut r) = match guess {
            Some(g) => {
                let r = self.residual(&g, rhs);
                (g, r)
            }
            None => (vec![0.0; n], rhs.to_vec()),
        };
        let mut rn = inf_norm(&r);
        let mut target = SOLVE_TOL * self.backward_scale(&x, bnorm);
        let mut iterations = 0;
        for cycle in 0..MAX_CYCLES {
            if rn <= target {
                break;
            }
            let beta = norm2(&r);
            let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
            let mut h: Vec<Vec<f64>> = Vec::new();
            let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
            let mut g = vec![beta];
            for j in 0..RESTART {
                let z = self.precondition(&basis[j]);
                let mut w = self.global.matvec(&z);
                iterations += 1;
                let mut col = vec![0.0; j + 2];
                // Two passes of modified Gram-Schmidt.
                for _ in 0..2 {
                    for (i, v) in basis.iter().enumerate() {
                        let d = dot(&w, v);
                        col[i] += d;
                        for (wk, vk) in w.iter_mut().zip(v) {
                            *wk -= d * vk;
                        }
                    }
                }
                let wn = norm2(&w);
                col[j + 1] = wn;
                for i in 0..j {
                    let (a, b) = (col[i], col[i + 1]);
                    col[i] = cs[i] * a + sn[i] * b;
                    col[i + 1] = -sn[i] * a + cs[i] * b;
                }
                let rho = col[j].hypot(col[j + 1]);
                let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
                col[j] = rho;
                col[j + 1] = 0.0;
                cs.push(c);
                sn.push(s);
                g.push(-s * g[j]);
                g[j] *= c;
                h.push(col);
                if !(wn > 0.0) || g[j + 1].abs() <= 0.5 * target {
                    break;
                }
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            let m = h.len();
            let mut y = vec![0.0; m];
            for i in (0..m).rev() {
                let s: f64 = (i + 1..m).map(|k| h[k][i] * y[k]).sum();
                y[i] = (g[i] - s) / h[i][i];
            }
            let mut u = vec![0.0; n];
            for (yi, v) in y.iter().zip(&basis) {
                for (uk, vk) in u.iter_mut().zip(v) {
                    *uk += yi * vk;
                }
            }
            let dx = self.precondition(&u);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = self.residual(&x, rhs);
            let new = inf_norm(&r);
            if !new.is_finite() {
                break;
            }
            target = SOLVE_TOL * self.backward_scale(&x, bnorm);
            if new <= target {
                rn = new;
                break;
            }
            if cycle > 0 && new > 0.5 * rn {
                rn = new;
                break;
            }
            rn = new;
        }
        self.stats.krylov_iterations += iterations;
        match self.baseline {
            None => self.baseline = Some(iterations),
            Some(b) if 2 * iterations > 3 * b + 4 => self.stale = true,
            Some(_) => {}
        }
        if rn <= STAGNATION_TOL * self.backward_scale(&x, bnorm) && x.iter().all(|v| v.is_finite()) {
            Some(x)
        } else {
            None
        }
    }

    /// Pivoted sparse LU of the exact matrix with iterative refinement.
    fn lu_solve(&mut self, rhs: &[f64], bnorm: f64) -> Result<Vec<f64>> {
        let n = self.size();
        self.stats.lu_fallbacks += 1;
        if self.lu.is_none() {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.global.row_ptr, None, &self.global.col_idx);
            let symbolic =
                SymbolicLu::try_new(sym).map_err(|e| Error::Solver(format!("symbolic LU failed: {e:?}")))?;
            let mat = SparseColMatRef::new(sym, &self.global.values);
            let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| match e {
                LuError::SymbolicSingular { index } => Error::Solver(format!(
                    "singular factorization: zero pivot at index {index} ({} block)",
                    self.block_name(index.min(n - 1))
                )),
                other => Error::Solver(format!("numeric LU failed: {other:?}")),
            })?;
            self.lu = Some(lu);
        }
        let lu = self.lu.as_ref().expect("factorization present");
        let apply = |r: &[f64]| {
            let mut m = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            // The CSR arrays describe Sᵀ in column-major form.
            lu.solve_transpose_in_place(m.as_mut());
            (0..n).map(|i| m[(i, 0)]).collect::<Vec<f64>>()
        };
        let mut x = apply(rhs);
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver(format!(
                "singular factorization: non-finite solution in the {} block",
                self.block_name(i)
            )));
        }
        let mut res = self.residual_inf(&x, rhs);
        for _ in 0..3 {
            if res <= SOLVE_TOL * bnorm {
                break;
            }
            let d = apply(&self.residual(&x, rhs));
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
            res = self.residual_inf(&x, rhs);
        }
        if res <= 1e-9 * bnorm {
            Ok(x)
        } else {
            Err(Error::Solver(format!("linear solve residual {res:e} exceeds tolerance (rhs norm {bnorm:e})")))
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Assembled augmented system with its right-hand side.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub k: CsrMatrix,
    pub b: CsrMatrix,
    pub mean: Vec<f64>,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub multiplier: f64,
}

pub fn solve_saddle_system(sys: &SaddleSystem) -> Result<SaddleSolution> {
    let mut solver = SaddleSolver::new(&sys.k, &sys.b, &sys.mean)?;
    solver.set_velocity_block(&sys.k);
    let mut rhs = sys.rhs_u.clone();
    rhs.extend_from_slice(&sys.rhs_p);
    rhs.push(0.0);
    let x = solver.solve(&rhs)?;
    Ok(split_solution(&x, sys.k.nrows, sys.b.nrows))
}

fn split_solution(x: &[f64], nu: usize, np: usize) -> SaddleSolution {
    SaddleSolution { u: x[..nu].to_vec(), p: x[nu..nu + np].to_vec(), multiplier: x[nu + np] }
}

/// Result of a Picard loop.
#[derive(Clone, Debug)]
pub struct PicardOutcome {
    /// Full solution vector of the last linear solve.
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `‖Δu‖_∞ / max(1, ‖u‖_∞)` per iteration.
    pub history: Vec<f64>,
}

/// Fixed-point iteration `β ↦ solve(β)` on the leading `n_velocity` entries.
///
/// The next β is the Anderson mixture of the last few solve outputs; the stopping
/// test is on the plain update `‖g(β) − β‖_∞`, so a converged result is the same fixed point.
pub fn picard_iterate<F>(initial: &[f64], n_velocity: usize, tol: f64, max_iter: usize, mut solve: F) -> Result<PicardOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut beta = initial[..n_velocity].to_vec();
    let mut history = Vec::new();
    let mut outputs: VecDeque<Vec<f64>> = VecDeque::new();
    let mut updates: VecDeque<Vec<f64>> = VecDeque::new();
    for it in 1..=max_iter {
        let x = solve(&beta)?;
        let u = &x[..n_velocity];
        let f: Vec<f64> = u.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let rel = inf_norm(&f) / inf_norm(u).max(1.0);
        history.push(rel);
        if !rel.is_finite() {
            return Err(Error::NonlinearDivergence { iterations: it, history });
        }
        if rel <= tol {
            return Ok(PicardOutcome { solution: x, iterations: it, history });
        }
        if history.len() >= 2 && rel > history[history.len() - 2] {
            outputs.clear();
            updates.clear();
        }
        outputs.push_back(u.to_vec());
        updates.push_back(f);
        if outputs.len() > ANDERSON_DEPTH + 1 {
            outputs.pop_front();
            updates.pop_front();
        }
        beta = anderson_mix(&outputs, &updates);
    }
    Err(Error::NonlinearDivergence { iterations: max_iter, history })
}

const ANDERSON_DEPTH: usize = 5;

/// `g_k − ΔG γ` with `γ` minimizing `‖f_k − ΔF γ‖₂`.
fn anderson_mix(outputs: &VecDeque<Vec<f64>>, updates: &VecDeque<Vec<f64>>) -> Vec<f64> {
    let m = outputs.len() - 1;
    let last = &outputs[m];
    if m == 0 {
        return last.clone();
    }
    let n = last.len();
    let df = DMatrix::from_fn(n, m, |r, c| updates[c + 1][r] - updates[c][r]);
    let fk = DVector::from_column_slice(&updates[m]);
    let Ok(gamma) = df.clone().svd(true, true).solve(&fk, 1e-12 * df.norm()) else { return last.clone() };
    if gamma.iter().any(|g| !g.is_finite()) {
        return last.clone();
    }
    let mut next = last.clone();
    for (c, g) in gamma.iter().enumerate() {
        for (r, v) in next.iter_mut().enumerate() {
            *v -= g * (outputs[c + 1][r] - outputs[c][r]);
        }
    }
    next
}

pub const PICARD_TOL: f64 = 1e-10;
pub const PICARD_MAX_ITER: usize = 50;

/// Right-hand side contribution per time level.
pub enum Forcing {
    None,
    /// Body force `f(x, t)`.
    Field(Box<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>),
    /// Precomputed load vector as a function of time.
    Discrete(Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

/// Discretized problem: spaces, constant operators and the reusable solver.
pub struct Simulation {
    pub vel: Arc<FunctionSpace>,
    pub pres: Arc<FunctionSpace>,
    pub asm: VelocityAssembler,
    pub forms: FormMatrices,
    pub params: FluxParams,
    pub variant: StressVariant,
    pub convection: bool,
    pub forcing: Forcing,
    pub dt: f64,
    solver: SaddleSolver,
    base_order: Option<usize>,
    base: CsrMatrix,
}

/// One completed time step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub multiplier: f64,
    pub picard_iterations: usize,
}

impl Simulation {
    pub fn new(
        vel: Arc<FunctionSpace>,
        pres: Arc<FunctionSpace>,
        variant: StressVariant,
        params: FluxParams,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        let asm = VelocityAssembler::new(&vel)?;
        let forms = assemble_forms(&asm, &pres, variant, params.eta)?;
        let solver = SaddleSolver::new(asm.pattern(), &forms.b, &forms.mean)?;
        let base = asm.pattern().clone();
        Ok(Simulation {
            vel,
            pres,
            asm,
            forms,
            params,
            variant,
            convection: true,
            forcing: Forcing::None,
            dt,
            solver,
            base_order: None,
            base,
        })
    }

    pub fn system_size(&self) -> usize {
        self.solver.size()
    }

    pub fn solver_stats(&self) -> SolverStats {
        self.solver.stats
    }

    fn load(&self, t: f64) -> Vec<f64> {
        match &self.forcing {
            Forcing::None => vec![0.0; self.vel.n_dofs()],
            Forcing::Field(f) => self.asm.load(|x| f(x, t)),
            Forcing::Discrete(f) => f(t),
        }
    }

    fn field(&self, coeffs: &[f64]) -> DiscreteField {
        DiscreteField { space: self.vel.clone(), coeffs: coeffs.to_vec() }
    }

    /// Velocity block `(a₀/Δt)M + νA + C(β) + S(β)`.
    fn velocity_block(&mut self, order: usize, beta: &[f64]) -> Result<CsrMatrix> {
        if self.base_order != Some(order) {
            let (a0, _) = bdf_coefficients(order);
            let mut base = self.forms.m.scaled(a0 / self.dt);
            base.axpy(self.params.nu, &self.forms.a);
            self.base = base;
            self.base_order = Some(order);
        }
        let mut k = self.base.clone();
        if self.convection || self.params.delta > 0.0 {
            let b = self.field(beta);
            if self.convection {
                k.axpy(1.0, &self.asm.convective(&b, self.params.zeta)?);
            }
            if self.params.delta > 0.0 {
                k.axpy(1.0, &self.asm.graddiv_nonlinear(&b, self.params.delta)?);
            }
        }
        Ok(k)
    }

    /// One implicit BDF step of the given order; `history[0]` is the newest level.
    pub fn bdf_step(&mut self, history: &[&[f64]], order: usize, t_new: f64) -> Result<StepOutcome> {
        if history.len() < order {
            return Err(Error::InvalidArgument(format!("BDF{order} needs {order} history levels")));
        }
        let (_, a) = bdf_coefficients(order);
        let nu = self.vel.n_dofs();
        let np = self.pres.n_dofs();
        let mut comb = vec![0.0; nu];
        for (ai, h) in a.iter().zip(history) {
            for (c, v) in comb.iter_mut().zip(h.iter()) {
                *c += ai * v;
            }
        }
        let mcomb = self.forms.m.matvec(&comb);
        let f = self.load(t_new);
        let mut rhs = vec![0.0; nu + np + 1];
        for i in 0..nu {
            rhs[i] = mcomb[i] / self.dt + f[i];
        }
        let guess = extrapolate(history);
        let needs_picard = self.convection || self.params.delta > 0.0;
        let outcome = if needs_picard {
            picard_iterate(&guess, nu, PICARD_TOL, PICARD_MAX_ITER, |beta| {
                let k = self.velocity_block(order, beta)?;
                self.solver.set_velocity_block(&k);
                self.solver.solve(&rhs)
            })?
        } else {
            let k = self.velocity_block(order, &guess)?;
            self.solver.set_velocity_block(&k);
            let x = self.solver.solve(&rhs)?;
            PicardOutcome { solution: x, iterations: 1, history: vec![] }
        };
        let s = split_solution(&outcome.solution, nu, np);
        Ok(StepOutcome { u: s.u, p: s.p, multiplier: s.multiplier, picard_iterations: outcome.iterations })
    }

    /// Discretely divergence-free L2 projection of `f` (velocity, pressure-like multiplier).
    pub fn project_div_free(&self, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> Result<SaddleSolution> {
        let rhs_u = self.asm.load(f);
        let sys = SaddleSystem {
            k: self.forms.m.clone(),
            b: self.forms.b.clone(),
            mean: self.forms.mean.clone(),
            rhs_u,
            rhs_p: vec![0.0; self.pres.n_dofs()],
        };
        solve_saddle_system(&sys)
    }

    /// Pressure consistent with `u₀` from `M a − Bᵀp = −C(u₀)u₀ − νAu₀`, `B a = 0`.
    pub fn consistent_pressure(&self, u0: &[f64]) -> Result<Vec<f64>> {
        let b = self.field(u0);
        let mut op = self.forms.a.scaled(self.params.nu);
        if self.convection {
            op.axpy(1.0, &self.asm.convective(&b, self.params.zeta)?);
        }
        if self.params.delta > 0.0 {
            op.axpy(1.0, &self.asm.graddiv_nonlinear(&b, self.params.delta)?);
        }
        let rhs_u: Vec<f64> = op.matvec(u0).into_iter().map(|v| -v).collect();
        let sys = SaddleSystem {
            k: self.forms.m.clone(),
            b: self.forms.b.clone(),
            mean: self.forms.mean.clone(),
            rhs_u,
            rhs_p: vec![0.0; self.pres.n_dofs()],
        };
        Ok(solve_saddle_system(&sys)?.p)
    }
}

/// Polynomial extrapolation of the history to the next level.
fn extrapolate(history: &[&[f64]]) -> Vec<f64> {
    match history.len() {
        0 => unreachable!("empty history"),
        1 => history[0].to_vec(),
        2 => history[0].iter().zip(history[1].iter()).map(|(a, b)| 2.0 * a - b).collect(),
        _ => history[0]
            .iter()
            .zip(history[1].iter())
            .zip(history[2].iter())
            .map(|((a, b), c)| 3.0 * a - 3.0 * b + c)
            .collect(),
    }
}

/// Last three velocity levels, newest first.
#[derive(Clone, Debug, Default)]
pub struct History {
    pub levels: Vec<Vec<f64>>,
}

impl History {
    pub fn push(&mut self, u: Vec<f64>) {
        self.levels.insert(0, u);
        self.levels.truncate(3);
    }

    pub fn views(&self) -> Vec<&[f64]> {
        self.levels.iter().map(|v| v.as_slice()).collect()
    }
}

/// Advances the history by one step at time `t + Δt`.
pub fn bdf3_advance(history: &mut History, t: f64, scheme: &TimeScheme, sim: &mut Simulation) -> Result<StepOutcome> {
    let order = history.levels.len().min(3);
    let order = if scheme.exact_start { order.max(3).min(history.levels.len()) } else { order };
    let out = sim.bdf_step(&history.views(), order, t + scheme.dt)?;
    history.push(out.u.clone());
    Ok(out)
}

/// Per-step diagnostics of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub bdf_order: usize,
    pub kinetic_energy: f64,
    pub max_divergence: f64,
    pub picard_iterations: usize,
    /// True for history levels taken from the exact solution.
    pub seeded: bool,
}

/// Final state and time series of one case.
pub struct RunResult {
    pub setup: CaseSetup,
    pub u: DiscreteField,
    pub p: DiscreteField,
    pub t: f64,
    pub steps: Vec<StepDiagnostics>,
    pub system_size: usize,
    pub solver_stats: SolverStats,
}

impl RunResult {
    pub fn initial_energy(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.kinetic_energy)
    }
}

pub fn run_case(config: &CaseConfig) -> Result<RunResult> {
    run_case_with(config, |_| {})
}

/// Runs a case, reporting each step to `observer`.
pub fn run_case_with(config: &CaseConfig, mut observer: impl FnMut(&StepDiagnostics)) -> Result<RunResult> {
    let setup = setup_case(config)?;
    let scheme = TimeScheme::new(config.dt, config.t_end, setup.exact.is_some())?;
    let mut sim = Simulation::new(setup.vel.clone(), setup.pres.clone(), setup.variant, setup.params, config.dt)?;
    let mut history = History::default();
    let mut steps = Vec::new();
    let n_steps = scheme.n_steps();
    let mut record = |sim: &Simulation, step: usize, order: usize, u: &[f64], picard: usize, seeded: bool| {
        let f = DiscreteField { space: sim.vel.clone(), coeffs: u.to_vec() };
        let d = StepDiagnostics {
            step,
            t: step as f64 * config.dt,
            bdf_order: order,
            kinetic_energy: 0.5 * sim.forms.m.quad_form(u),
            max_divergence: analysis::max_cellwise_divergence(&f),
            picard_iterations: picard,
            seeded,
        };
        observer(&d);
        d
    };

    let mut p_last: Vec<f64>;
    let seeds = if let Some(exact) = &setup.exact {
        let levels = 3.min(n_steps + 1);
        for lvl in 0..levels {
            let t = lvl as f64 * config.dt;
            let u = interpolate_field(&sim.vel, |x| exact.velocity(x, t)).coeffs;
            steps.push(record(&sim, lvl, 0, &u, 0, true));
            history.push(u);
        }
        let t = (levels - 1) as f64 * config.dt;
        p_last = interpolate_field(&sim.pres, |x| [exact.pressure(x, t), 0.0]).coeffs;
        levels
    } else {
        let u0 = interpolate_field(&sim.vel, |x| (setup.initial)(x)).coeffs;
        p_last = sim.consistent_pressure(&u0)?;
        steps.push(record(&sim, 0, 0, &u0, 0, true));
        history.push(u0);
        1
    };
    for step in seeds..=n_steps {
        let order = scheme.order_for_level(step).min(history.levels.len());
        let out = sim.bdf_step(&history.views(), order, step as f64 * config.dt)?;
        steps.push(record(&sim, step, order, &out.u, out.picard_iterations, false));
        history.push(out.u);
        p_last = out.p;
    }
    let u = DiscreteField { space: sim.vel.clone(), coeffs: history.levels[0].clone() };
    let p = DiscreteField { space: sim.pres.clone(), coeffs: p_last };
    Ok(RunResult {
        t: n_steps as f64 * config.dt,
        u,
        p,
        steps,
        system_size: sim.system_size(),
        solver_stats: sim.solver_stats(),
        setup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bdf3_scalar_order() {
        // u' = λu, exact start, BDF3 errors shrink by ~8 per halving.
        let lambda = -1.3;
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let (a0, a) = bdf_coefficients(3);
            let mut h = vec![(lambda * 2.0 * dt).exp(), (lambda * dt).exp(), 1.0];
            for _ in 3..=n {
                let s: f64 = a.iter().zip(&h).map(|(ai, hi)| ai * hi).sum();
                let u = s / (a0 - lambda * dt);
                h.insert(0, u);
                h.truncate(3);
            }
            (h[0] - lambda.exp()).abs()
        };
        let (e1, e2, e3) = (err(20), err(40), err(80));
        let r1 = (e1 / e2).log2();
        let r2 = (e2 / e3).log2();
        assert!((r1 - 3.0).abs() < 0.15 && (r2 - 3.0).abs() < 0.1, "{r1} {r2}");
    }

    #[test]
    fn bdf_weights_consistent() {
        for q in 1..=3 {
            let (a0, a) = bdf_coefficients(q);
            // exact for constants
            assert!((a0 - a.iter().sum::<f64>()).abs() < 1e-15);
        }
    }

    #[test]
    fn picard_linear_map_converges_fast() {
        let out = picard_iterate(&[0.0, 0.0], 2, 1e-10, 50, |_| Ok(vec![1.0, 2.0])).unwrap();
        assert!(out.iterations <= 2);
        let err = picard_iterate(&[0.0], 1, 1e-10, 5, |b| Ok(vec![b[0] + 1.0])).unwrap_err();
        assert!(matches!(err, Error::NonlinearDivergence { iterations: 5, .. }));
    }

    #[test]
    fn anderson_mixing_beats_slow_contraction() {
        // g(b) = D b + c with contraction 0.95: plain iteration needs ~450 steps.
        let d = [0.95, -0.9, 0.5, 0.1];
        let c = [1.0, 2.0, -1.0, 0.5];
        let out = picard_iterate(&[0.0; 4], 4, 1e-10, 50, |b| Ok((0..4).map(|i| d[i] * b[i] + c[i]).collect())).unwrap();
        assert!(out.iterations <= 10, "{}", out.iterations);
        for i in 0..4 {
            assert!((out.solution[i] - c[i] / (1.0 - d[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn time_scheme_validation() {
        assert!(TimeScheme::new(0.0, 1.0, true).is_err());
        assert!(TimeScheme::new(0.1, 0.05, true).is_err());
        let s = TimeScheme::new(0.01, 1.0, false).unwrap();
        assert_eq!(s.n_steps(), 100);
        assert_eq!((s.order_for_level(1), s.order_for_level(2), s.order_for_level(7)), (1, 2, 3));
    }

    #[test]
    fn tiny_saddle() {
        // K = I (2x2), B = [1 1], mean = [1].
        let k = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        let sys = SaddleSystem { k, b, mean: vec![1.0], rhs_u: vec![1.0, 3.0], rhs_p: vec![0.0] };
        let s = solve_saddle_system(&sys).unwrap();
        // mean constraint forces p = 0, then u = rhs and B u = −m λ.
        assert!(s.p[0].abs() < 1e-14);
        assert!((s.u[0] - 1.0).abs() < 1e-14 && (s.u[1] - 3.0).abs() < 1e-14);
        assert!((s.multiplier - 4.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_reports_block() {
        let k = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 0.0)]);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]);
        let sys = SaddleSystem { k, b, mean: vec![1.0], rhs_u: vec![1.0, 1.0], rhs_p: vec![0.0] };
        match solve_saddle_system(&sys) {
            Err(Error::Solver(msg)) => assert!(msg.contains("singular") || msg.contains("residual"), "{msg}"),
            other => panic!("expected solver error, got {other:?}"),
        }
    }
}
