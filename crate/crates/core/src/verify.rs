//! Randomized identity, kernel and coercivity checks.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::analysis::{eval_kernel_field, sym_triple_norm, verify_identity, IdentityInputs, IdentityKind, KernelField3D};
use crate::error::Result;
use crate::forms::{default_eta, StressVariant, VelocityAssembler};
use crate::mesh::{Rect, Topology};
use crate::space::{build_function_space, build_function_space_with, BoundaryMode, DiscreteField, FunctionSpace, SpaceKind};

pub const IDENTITY_TOL: f64 = 1e-10;
pub const KERNEL_TOL: f64 = 1e-12;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn max_below(name: impl Into<String>, worst: f64, tol: f64, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), worst, tol, pass: worst <= tol, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: worst {:.3e} (tol {:.1e}){}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tol,
            if self.detail.is_empty() { String::new() } else { format!("; {}", self.detail) }
        )
    }
}

/// Random coefficient vector in `[-1, 1]`.
pub fn random_field(space: &Arc<FunctionSpace>, rng: &mut impl Rng) -> DiscreteField {
    let coeffs = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DiscreteField { space: space.clone(), coeffs }
}

fn draw_rng(seed: u64, tag: u64, i: usize) -> StdRng {
    StdRng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (tag << 32) ^ i as u64)
}

struct Meshes {
    walls: Arc<Topology>,
    periodic: Arc<Topology>,
}

fn meshes(n: usize) -> Result<Meshes> {
    // Slightly skewed rectangle so that no special symmetry hides errors.
    let r = Rect::new(0.0, 0.0, 1.0, 0.8);
    Ok(Meshes { walls: Arc::new(Topology::structured(n, n, r, false)?), periodic: Arc::new(Topology::structured(n, n, r, true)?) })
}

/// Worst relative residual of `kind` over `draws` random inputs.
fn identity_check(
    kind: IdentityKind,
    spaces: &[(String, Arc<FunctionSpace>)],
    draws: usize,
    seed: u64,
) -> Result<CheckResult> {
    let results: Vec<Result<f64>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let (_, space) = &spaces[i % spaces.len()];
            let mut rng = draw_rng(seed, kind as u64 + 1, i);
            let w = random_field(space, &mut rng);
            let beta = random_field(space, &mut rng);
            let k = space.poly_degree();
            let inputs = IdentityInputs { w: &w, beta: Some(&beta), eta: default_eta(k), zeta: rng.gen_range(0.0..1.0) };
            verify_identity(kind, &inputs)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in results {
        worst = worst.max(r?);
    }
    let names: Vec<&str> = spaces.iter().map(|(n, _)| n.as_str()).collect();
    Ok(CheckResult::max_below(kind.name(), worst, IDENTITY_TOL, format!("{draws} draws over {}", names.join(", "))))
}

/// Form identities on an `n × n` mesh for velocity degrees `degrees`.
pub fn check_identities(n: usize, degrees: &[usize], draws: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let m = meshes(n)?;
    let mut hdiv = Vec::new();
    let mut any = Vec::new();
    let mut th = Vec::new();
    for &d in degrees {
        for (label, topo) in [("walls", &m.walls), ("periodic", &m.periodic)] {
            let b = Arc::new(build_function_space(topo, SpaceKind::Bdm, d)?);
            hdiv.push((format!("BDM{d}/{label}"), b.clone()));
            any.push((format!("BDM{d}/{label}"), b));
            let c = Arc::new(build_function_space(topo, SpaceKind::ContinuousVector, d + 1)?);
            th.push((format!("P{}/{label}", d + 1), c.clone()));
            any.push((format!("P{}/{label}", d + 1), c));
        }
        let free = Arc::new(build_function_space_with(&m.walls, SpaceKind::Bdm, d, BoundaryMode::Free)?);
        any.push((format!("BDM{d}/free"), free));
        if d >= 1 {
            let rt = Arc::new(build_function_space(&m.walls, SpaceKind::Rt, d)?);
            hdiv.push((format!("RT{d}/walls"), rt));
        }
    }
    Ok(vec![
        identity_check(IdentityKind::JumpIdentity, &hdiv, draws, seed)?,
        identity_check(IdentityKind::ConvectiveEnergy, &hdiv, draws, seed)?,
        identity_check(IdentityKind::Decomposition, &any, draws, seed)?,
        identity_check(IdentityKind::GraddivSign, &any, draws, seed)?,
        identity_check(IdentityKind::Allaire, &th, draws, seed)?,
    ])
}

/// Analytic kernel residuals plus agreement with central differences.
pub fn check_kernels(draws_3d: usize, draws_2d: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = draw_rng(seed, 99, 0);
    let mut worst3: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..draws_3d {
        let k: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = eval_kernel_field(3, &k, &x)?;
        worst3 = e.dev_sym_grad.iter().flatten().fold(worst3, |m, v| m.max(v.abs()));
        let mut kk = [0.0; 10];
        kk.copy_from_slice(&k);
        let f = KernelField3D { k: kk };
        let h = 1e-6;
        let mut g = vec![vec![0.0; 3]; 3];
        for j in 0..3 {
            let (mut a, mut b) = ([x[0], x[1], x[2]], [x[0], x[1], x[2]]);
            a[j] += h;
            b[j] -= h;
            let (wa, wb) = (f.value(a), f.value(b));
            for i in 0..3 {
                g[i][j] = (wa[i] - wb[i]) / (2.0 * h);
            }
        }
        let dev = crate::analysis::deviatoric_sym(&g);
        worst_fd = dev.iter().flatten().fold(worst_fd, |m, v| m.max(v.abs()));
    }
    let mut worst2: f64 = 0.0;
    for _ in 0..draws_2d {
        let k: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = eval_kernel_field(2, &k, &x)?;
        worst2 = e.dev_sym_grad.iter().flatten().fold(worst2, |m, v| m.max(v.abs()));
    }
    Ok(vec![
        CheckResult::max_below("kernel_3d", worst3, KERNEL_TOL, format!("{draws_3d} draws")),
        CheckResult::max_below("kernel_2d", worst2, KERNEL_TOL, format!("{draws_2d} draws")),
        // Central differences carry O(h²) truncation and O(ε/h) rounding.
        CheckResult::max_below("kernel_3d_finite_difference", worst_fd, 1e-8, "step 1e-6"),
    ])
}

/// Positivity of `a_h` and its ratio to `|||·|||²_sym`, and SPD mass matrices.
pub fn check_coercivity(n: usize, degrees: &[usize], draws: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let topo = Arc::new(Topology::structured(n, n, Rect::new(0.0, 0.0, 1.0, 0.8), false)?);
    let mut out = Vec::new();
    for &d in degrees {
        let space = Arc::new(build_function_space(&topo, SpaceKind::Bdm, d)?);
        let eta = default_eta(d.saturating_sub(1));
        let asm = VelocityAssembler::new(&space)?;
        let a = asm.viscous(StressVariant::FullDeviatoric, eta);
        let ratios: Vec<Result<(f64, f64)>> = (0..draws)
            .into_par_iter()
            .map(|i| {
                let mut rng = draw_rng(seed, 200 + d as u64, i);
                let w = random_field(&space, &mut rng);
                let ah = a.quad_form(&w.coeffs);
                let norm = sym_triple_norm(&w, true)?;
                Ok((ah, ah / (norm * norm)))
            })
            .collect();
        let mut min_a = f64::INFINITY;
        let mut min_ratio = f64::INFINITY;
        for r in ratios {
            let (ah, q) = r?;
            min_a = min_a.min(ah);
            min_ratio = min_ratio.min(q);
        }
        out.push(CheckResult {
            name: format!("coercivity_BDM{d}"),
            worst: min_ratio,
            tol: 0.0,
            pass: min_a > 0.0 && min_ratio > 0.0,
            detail: format!("eta={eta}, min a_h(w,w)={min_a:.3e}, empirical c={min_ratio:.4}, {draws} draws"),
        });
        let m = asm.mass();
        let dense = DMatrix::from_fn(m.nrows, m.ncols, |r, c| m.get(r, c));
        let spd = dense.clone().cholesky().is_some() && m.max_asymmetry() <= 1e-14 * m.max_abs();
        out.push(CheckResult {
            name: format!("mass_spd_BDM{d}"),
            worst: m.max_asymmetry(),
            tol: 1e-14 * m.max_abs(),
            pass: spd,
            detail: format!("{} dofs, Cholesky {}", m.nrows, if spd { "succeeded" } else { "failed" }),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub draws: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub lines: Vec<String>,
    pub passed: bool,
}

/// Full suite used by `versatile-ns verify`.
pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    let mut passed = true;
    let parts = [
        check_identities(4, &[1, 2, 3], opts.draws, opts.seed),
        check_kernels(1000, 200, opts.seed),
        check_coercivity(4, &[1, 2, 3], 200, opts.seed),
    ];
    for part in parts {
        match part {
            Ok(cs) => {
                for c in cs {
                    passed &= c.pass;
                    lines.push(c.line());
                    checks.push(c);
                }
            }
            Err(e) => {
                passed = false;
                lines.push(format!("[FAIL] error: {e}"));
            }
        }
    }
    SuiteReport { checks, lines, passed }
}
