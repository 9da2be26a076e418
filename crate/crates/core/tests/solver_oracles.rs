use std::f64::consts::PI;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use versatile_ns::forms::{assemble_forms, default_eta, FluxParams, StressVariant, VelocityAssembler};
use versatile_ns::mesh::{Rect, Topology};
use versatile_ns::solver::{bdf_coefficients, solve_saddle_system, Forcing, SaddleSolver, SaddleSystem, Simulation};
use versatile_ns::space::{build_function_space, interpolate_field, FunctionSpace, SpaceKind};
use versatile_ns::sparse::CsrMatrix;

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn pair(n: usize, periodic: bool, th: bool, k: usize) -> (Arc<FunctionSpace>, Arc<FunctionSpace>) {
    let rect = if periodic { Rect::new(0.0, 0.0, 2.0 * PI, 2.0 * PI) } else { Rect::unit() };
    let topo = Arc::new(Topology::structured(n, n, rect, periodic).unwrap());
    if th {
        (
            Arc::new(build_function_space(&topo, SpaceKind::ContinuousVector, k + 1).unwrap()),
            Arc::new(build_function_space(&topo, SpaceKind::ContinuousScalar, k).unwrap()),
        )
    } else {
        (
            Arc::new(build_function_space(&topo, SpaceKind::Bdm, k + 1).unwrap()),
            Arc::new(build_function_space(&topo, SpaceKind::DiscontinuousScalar, k).unwrap()),
        )
    }
}

/// `[K −Bᵀ 0; −B 0 m; 0 mᵀ 0]` applied to `(u, p, λ)`.
fn apply(k: &CsrMatrix, b: &CsrMatrix, mean: &[f64], u: &[f64], p: &[f64], lam: f64) -> (Vec<f64>, Vec<f64>) {
    let bt = b.transpose();
    let ku = k.matvec(u);
    let btp = bt.matvec(p);
    let fu = ku.iter().zip(&btp).map(|(a, c)| a - c).collect();
    let bu = b.matvec(u);
    let fp = bu.iter().zip(mean).map(|(a, m)| -a + m * lam).collect();
    (fu, fp)
}

#[test]
fn manufactured_saddle_solution_is_recovered() {
    let mut rng = StdRng::seed_from_u64(7);
    for (th, periodic) in [(false, true), (false, false), (true, true), (true, false)] {
        let (v, q) = pair(4, periodic, th, 1);
        let asm = VelocityAssembler::new(&v).unwrap();
        let f = assemble_forms(&asm, &q, StressVariant::FullDeviatoric, default_eta(1)).unwrap();
        let mut k = f.m.scaled(100.0);
        k.axpy(0.01, &f.a);
        let u: Vec<f64> = (0..v.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut p: Vec<f64> = (0..q.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let area: f64 = f.mean.iter().sum();
        let pm: f64 = f.mean.iter().zip(&p).map(|(m, x)| m * x).sum::<f64>() / area;
        p.iter_mut().for_each(|x| *x -= pm);
        let (rhs_u, rhs_p) = apply(&k, &f.b, &f.mean, &u, &p, 0.0);
        let sys = SaddleSystem { k, b: f.b.clone(), mean: f.mean.clone(), rhs_u, rhs_p };
        let s = solve_saddle_system(&sys).unwrap();
        let eu = s.u.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let ep = s.p.iter().zip(&p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(eu < 1e-10 && ep < 1e-10 && s.multiplier.abs() < 1e-10, "th={th}: {eu} {ep} {}", s.multiplier);
    }
}

#[test]
fn gradient_forcing_moves_only_the_pressure_for_hdiv_pairs() {
    // (∇φ, v) = −(φ, div v) and div v ∈ Q_h, so u_h = 0 whatever ν is.
    let grad = |x: [f64; 2]| [2.0 * x[0] * x[1], x[0] * x[0]];
    let mut th_velocity = Vec::new();
    for nu in [1.0, 1e-4] {
        for th in [false, true] {
            let (v, q) = pair(4, false, th, 1);
            let asm = VelocityAssembler::new(&v).unwrap();
            let f = assemble_forms(&asm, &q, StressVariant::FullDeviatoric, default_eta(1)).unwrap();
            let k = f.a.scaled(nu);
            let rhs_u = asm.load(grad);
            let sys = SaddleSystem { k, b: f.b.clone(), mean: f.mean.clone(), rhs_u, rhs_p: vec![0.0; q.n_dofs()] };
            let s = solve_saddle_system(&sys).unwrap();
            if th {
                th_velocity.push(inf(&s.u));
            } else {
                assert!(inf(&s.u) < 1e-10, "nu={nu}: {}", inf(&s.u));
                // p_h is the L2 projection of x²y minus its mean 1/6.
                let ph = versatile_ns::space::DiscreteField { space: q.clone(), coeffs: s.p.clone() };
                let e = versatile_ns::analysis::l2_error_pressure(&ph, |x| x[0] * x[0] * x[1]).unwrap();
                assert!(e < 0.02, "{e}");
            }
        }
    }
    // Taylor-Hood leaks the gradient into the velocity with a 1/ν amplification.
    assert!(th_velocity[0] > 1e-8);
    assert!(th_velocity[1] / th_velocity[0] > 1e3, "{th_velocity:?}");
}

#[test]
fn krylov_and_direct_routes_agree_on_a_convective_system() {
    let (v, q) = pair(6, true, false, 1);
    let asm = VelocityAssembler::new(&v).unwrap();
    let f = assemble_forms(&asm, &q, StressVariant::SymmetricPair, default_eta(1)).unwrap();
    let beta = interpolate_field(&v, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()]);
    let mut k = f.m.scaled(11.0 / 6.0 / 0.01);
    k.axpy(0.01, &f.a);
    k.axpy(1.0, &asm.convective(&beta, 0.5).unwrap());
    let mut solver = SaddleSolver::new(asm.pattern(), &f.b, &f.mean).unwrap();
    solver.set_velocity_block(&k);
    let mut rng = StdRng::seed_from_u64(3);
    let mut rhs: Vec<f64> = (0..solver.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    *rhs.last_mut().unwrap() = 0.0;
    let a = solver.solve(&rhs).unwrap();
    let b = solver.solve_direct(&rhs).unwrap();
    let scale = inf(&b);
    let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-9 * scale, "{diff} vs {scale}");
    // Normwise backward error ‖b − Sx‖ / (‖S‖‖x‖ + ‖b‖).
    let s = solver.matrix();
    let snorm = (0..s.nrows).map(|r| s.row(r).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    for x in [&a, &b] {
        let berr = solver.residual_inf(x, &rhs) / (snorm * inf(x) + inf(&rhs));
        assert!(berr <= 1e-12, "{berr}");
    }
}

#[test]
fn bdf3_is_exact_for_cubic_in_time_solutions() {
    // u(t) = q(t) w with B w = 0 solves M u' + νA u − Bᵀp = q'(t) M w + ν q(t) A w with p = 0.
    let (v, q) = pair(4, true, false, 1);
    let params = FluxParams { zeta: 0.5, eta: default_eta(1), nu: 0.1, delta: 0.0 };
    let dt = 0.05;
    let mut sim = Simulation::new(v.clone(), q.clone(), StressVariant::SymmetricPair, params, dt).unwrap();
    sim.convection = false;
    let w = sim.project_div_free(|x| [x[1].sin(), x[0].cos() * x[1].sin()]).unwrap().u;
    let qt = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t + 0.5 * t * t * t;
    let dq = |t: f64| 2.0 - 6.0 * t + 1.5 * t * t;
    let mw = sim.forms.m.matvec(&w);
    let aw = sim.forms.a.matvec(&w);
    sim.forcing = Forcing::Discrete(Box::new(move |t| mw.iter().zip(&aw).map(|(m, a)| dq(t) * m + 0.1 * qt(t) * a).collect()));
    let scaled = |t: f64| w.iter().map(|x| qt(t) * x).collect::<Vec<f64>>();
    let mut hist = vec![scaled(2.0 * dt), scaled(dt), scaled(0.0)];
    let wn = inf(&w);
    for n in 3..12 {
        let t = n as f64 * dt;
        let views: Vec<&[f64]> = hist.iter().map(|h| h.as_slice()).collect();
        let out = sim.bdf_step(&views, 3, t).unwrap();
        let exact = scaled(t);
        let err = out.u.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-9 * wn, "step {n}: {err}");
        assert!(inf(&out.p) <= 1e-8, "step {n}: pressure {}", inf(&out.p));
        hist.insert(0, out.u);
        hist.truncate(3);
    }
    let (a0, a) = bdf_coefficients(3);
    assert!((a0 - a.iter().sum::<f64>()).abs() < 1e-15);
}

#[test]
fn zero_state_stays_zero() {
    let (v, q) = pair(3, true, false, 1);
    let params = FluxParams { zeta: 0.5, eta: default_eta(1), nu: 0.01, delta: 1.0 };
    let mut sim = Simulation::new(v.clone(), q, StressVariant::SymmetricPair, params, 0.01).unwrap();
    let z = vec![0.0; v.n_dofs()];
    let out = sim.bdf_step(&[&z, &z, &z], 3, 0.03).unwrap();
    assert!(out.u.iter().all(|x| *x == 0.0) && out.p.iter().all(|x| *x == 0.0));
}
