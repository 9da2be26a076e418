use std::f64::consts::PI;
use std::sync::Arc;

use versatile_ns::forms::{assemble_forms, default_eta, StressVariant, VelocityAssembler};
use versatile_ns::mesh::{Rect, Topology};
use versatile_ns::space::{
    build_function_space, build_function_space_with, interpolate_field, interpolate_scalar, BoundaryMode, SpaceKind,
};

fn unit(n: usize, periodic: bool) -> Arc<Topology> {
    Arc::new(Topology::structured(n, n, Rect::unit(), periodic).unwrap())
}

#[test]
fn mass_of_constant_field_is_area_times_magnitude() {
    let topo = Arc::new(Topology::structured(3, 5, Rect::new(0.0, 0.0, 2.0, 0.5), true).unwrap());
    for (kind, d) in [(SpaceKind::Bdm, 1), (SpaceKind::Bdm, 2), (SpaceKind::Rt, 1), (SpaceKind::ContinuousVector, 2)] {
        let v = Arc::new(build_function_space(&topo, kind, d).unwrap());
        let u = interpolate_field(&v, |_| [3.0, -4.0]);
        let m = VelocityAssembler::new(&v).unwrap().mass();
        let got = m.quad_form(&u.coeffs);
        assert!((got - 25.0).abs() < 1e-11, "{kind:?}{d}: {got}");
    }
}

#[test]
fn viscous_form_vanishes_on_constants() {
    let topo = unit(4, true);
    for variant in [StressVariant::FullDeviatoric, StressVariant::SymmetricPair, StressVariant::GradientOnly] {
        for (kind, d) in [(SpaceKind::Bdm, 2), (SpaceKind::ContinuousVector, 2)] {
            let v = Arc::new(build_function_space(&topo, kind, d).unwrap());
            let u = interpolate_field(&v, |_| [0.7, 1.3]);
            let a = VelocityAssembler::new(&v).unwrap().viscous(variant, default_eta(1));
            let r = a.matvec(&u.coeffs);
            let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(worst < 1e-11, "{variant:?} {kind:?}: {worst}");
        }
    }
}

#[test]
fn viscous_form_on_smooth_periodic_field_matches_exact_integral() {
    // u = (sin y, 0): ∇u = [[0, cos y], [0, 0]].
    // Full deviatoric and symmetric pair: τ:∇u = cos² y, GradientOnly: cos² y.
    // ∫ over [0, 2π]² of cos² y is 2π².
    let exact = 2.0 * PI * PI;
    let rect = Rect::new(0.0, 0.0, 2.0 * PI, 2.0 * PI);
    let mut prev = f64::INFINITY;
    for n in [8, 16] {
        let topo = Arc::new(Topology::structured(n, n, rect, true).unwrap());
        let v = Arc::new(build_function_space(&topo, SpaceKind::Bdm, 2).unwrap());
        let u = interpolate_field(&v, |x| [x[1].sin(), 0.0]);
        let a = VelocityAssembler::new(&v).unwrap().viscous(StressVariant::FullDeviatoric, default_eta(1));
        let err = (a.quad_form(&u.coeffs) - exact).abs() / exact;
        assert!(err < prev, "no convergence: {err} after {prev}");
        prev = err;
    }
    assert!(prev < 2e-3, "{prev}");
}

#[test]
fn divergence_matrix_obeys_divergence_theorem() {
    // u = (x², xy) has div u = 3x and ∫ over the unit square is 1.5.
    let topo = unit(5, false);
    for (kind, d, pk, pd) in [
        (SpaceKind::Bdm, 2, SpaceKind::DiscontinuousScalar, 1),
        (SpaceKind::Rt, 1, SpaceKind::DiscontinuousScalar, 1),
        (SpaceKind::ContinuousVector, 2, SpaceKind::ContinuousScalar, 1),
    ] {
        let v = Arc::new(build_function_space_with(&topo, kind, d, BoundaryMode::Free).unwrap());
        let q = Arc::new(build_function_space(&topo, pk, pd).unwrap());
        let u = interpolate_field(&v, |x| [x[0] * x[0], x[0] * x[1]]);
        let one = interpolate_scalar(&q, |_| 1.0);
        let b = VelocityAssembler::new(&v).unwrap().divergence(&q).unwrap();
        let got = b.bilinear(&one.coeffs, &u.coeffs);
        assert!((got - 1.5).abs() < 1e-11, "{kind:?}: {got}");
    }
}

#[test]
fn pressure_mean_vector_integrates() {
    let topo = unit(4, false);
    for (kind, d) in [(SpaceKind::DiscontinuousScalar, 1), (SpaceKind::DiscontinuousScalar, 2), (SpaceKind::ContinuousScalar, 1)]
    {
        let v = Arc::new(build_function_space(&topo, SpaceKind::Bdm, 2).unwrap());
        let q = Arc::new(build_function_space(&topo, kind, d).unwrap());
        let asm = VelocityAssembler::new(&v).unwrap();
        let f = assemble_forms(&asm, &q, StressVariant::SymmetricPair, default_eta(1)).unwrap();
        // ∫ (x + 2y) over the unit square is 1.5.
        let p = interpolate_scalar(&q, |x| x[0] + 2.0 * x[1]);
        let got: f64 = f.mean.iter().zip(&p.coeffs).map(|(m, c)| m * c).sum();
        assert!((got - 1.5).abs() < 1e-12, "{kind:?}{d}: {got}");
    }
}

#[test]
fn convection_of_constant_by_constant_is_zero() {
    let topo = unit(4, true);
    let v = Arc::new(build_function_space(&topo, SpaceKind::Bdm, 2).unwrap());
    let beta = interpolate_field(&v, |_| [1.0, 0.5]);
    for zeta in [0.0, 0.5, 1.0] {
        let c = VelocityAssembler::new(&v).unwrap().convective(&beta, zeta).unwrap();
        let r = c.matvec(&beta.coeffs);
        assert!(r.iter().all(|x| x.abs() < 1e-12), "zeta {zeta}");
    }
}

#[test]
fn convection_is_skew_for_central_flux_and_div_free_beta() {
    // With ζ = 0 and an exactly divergence-free β the form is skew-symmetric.
    let rect = Rect::new(0.0, 0.0, 2.0 * PI, 2.0 * PI);
    let topo = Arc::new(Topology::structured(4, 4, rect, true).unwrap());
    let v = Arc::new(build_function_space(&topo, SpaceKind::Bdm, 2).unwrap());
    let beta = interpolate_field(&v, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()]);
    let c = VelocityAssembler::new(&v).unwrap().convective(&beta, 0.0).unwrap();
    let ct = c.transpose();
    let mut sym = c.clone();
    sym.axpy(1.0, &ct);
    assert!(sym.max_abs() < 1e-12 * c.max_abs().max(1.0), "{}", sym.max_abs());
}

#[test]
fn upwind_convection_adds_exactly_the_jump_penalty() {
    // c(ζ) − c(0) = ζ Σ |{{β}}·n| ⟨[[v]], [[w]]⟩ is symmetric positive semidefinite.
    let topo = unit(4, false);
    let v = Arc::new(build_function_space(&topo, SpaceKind::Bdm, 1).unwrap());
    let beta = interpolate_field(&v, |x| [x[1] * (1.0 - x[1]), 0.3 * x[0] * (1.0 - x[0])]);
    let asm = VelocityAssembler::new(&v).unwrap();
    let c0 = asm.convective(&beta, 0.0).unwrap();
    let c1 = asm.convective(&beta, 1.0).unwrap();
    let c5 = asm.convective(&beta, 0.5).unwrap();
    let mut d1 = c1.clone();
    d1.axpy(-1.0, &c0);
    let mut d5 = c5.clone();
    d5.axpy(-1.0, &c0);
    assert!(d1.max_asymmetry() < 1e-13);
    let mut lin = d1.scaled(0.5);
    lin.axpy(-1.0, &d5);
    assert!(lin.max_abs() < 1e-13);
    for s in 0..10 {
        let x: Vec<f64> = (0..v.n_dofs()).map(|i| ((i * 31 + s * 17) % 13) as f64 - 6.0).collect();
        assert!(d1.quad_form(&x) >= -1e-12);
    }
}

#[test]
fn linear_graddiv_matches_divergence_squared() {
    let topo = unit(3, false);
    let v = Arc::new(build_function_space_with(&topo, SpaceKind::Bdm, 2, BoundaryMode::Free).unwrap());
    let u = interpolate_field(&v, |x| [x[0] * x[0], x[0] * x[1]]);
    let g = VelocityAssembler::new(&v).unwrap().graddiv_linear(2.0);
    // 2 ∫ (3x)² = 6.
    assert!((g.quad_form(&u.coeffs) - 6.0).abs() < 1e-11);
}
