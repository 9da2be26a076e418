//! Quadrature rules on the reference triangle `(0,0),(1,0),(0,1)` and the unit edge.

use crate::error::{Error, Result};

/// Highest polynomial degree for which rules are provided.
pub const MAX_DEGREE: usize = 30;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = 0.5 * (z + 1.0);
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn check_degree(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DEGREE {
        return Err(Error::Capability(format!("quadrature degree {d} outside 1..={MAX_DEGREE}")));
    }
    Ok(())
}

/// Rule on the reference triangle exact for total degree `exact_degree`.
pub fn triangle_rule(exact_degree: usize) -> Result<QuadratureRule> {
    check_degree(exact_degree)?;
    let (points, weights) = match exact_degree {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5]),
        2 => (
            vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            vec![1.0 / 6.0; 3],
        ),
        d => {
            // Collapsed tensor Gauss rule: x = u, y = v(1-u).
            let n = (d + 3) / 2;
            let (g, gw) = gauss_legendre(n);
            let mut pts = Vec::with_capacity(n * n);
            let mut wts = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let u = g[i];
                    pts.push([u, g[j] * (1.0 - u)]);
                    wts.push(gw[i] * gw[j] * (1.0 - u));
                }
            }
            (pts, wts)
        }
    };
    Ok(QuadratureRule { points, weights, exact_degree })
}

/// Gauss-Legendre rule on `[0, 1]` with `⌈(d+1)/2⌉` points; the second
/// coordinate of each point is zero.
pub fn edge_rule(exact_degree: usize) -> Result<QuadratureRule> {
    check_degree(exact_degree)?;
    let n = (exact_degree + 2) / 2;
    let (x, w) = gauss_legendre(n);
    Ok(QuadratureRule { points: x.into_iter().map(|s| [s, 0.0]).collect(), weights: w, exact_degree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    // ∫_T x^a y^b = a! b! / (a+b+2)!
    fn simplex_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn integrate(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(p, w)| w * f(p[0], p[1])).sum()
    }

    #[test]
    fn small_rules() {
        let r1 = triangle_rule(1).unwrap();
        assert_eq!(r1.len(), 1);
        assert_eq!(r1.weights[0], 0.5);
        let r2 = triangle_rule(2).unwrap();
        assert!((integrate(&r2, |x, y| x * y) - 1.0 / 24.0).abs() < 1e-14);
        let r8 = triangle_rule(8).unwrap();
        let exact = 24.0 * 24.0 / factorial(10);
        assert!((exact - 1.5873e-4).abs() < 1e-8);
        assert!((integrate(&r8, |x, y| x.powi(4) * y.powi(4)) - exact).abs() < 1e-13);
    }

    #[test]
    fn edge_rules() {
        let e1 = edge_rule(1).unwrap();
        assert_eq!(e1.points, vec![[0.5, 0.0]]);
        assert_eq!(e1.weights, vec![1.0]);
        let e3 = edge_rule(3).unwrap();
        assert_eq!(e3.len(), 2);
        assert!((integrate(&e3, |x, _| x.powi(3)) - 0.25).abs() < 1e-15);
        let e5 = edge_rule(5).unwrap();
        assert_eq!(e5.len(), 3);
        assert!((integrate(&e5, |x, _| x.powi(5)) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn all_monomials_exact() {
        for d in 1..=MAX_DEGREE {
            let r = triangle_rule(d).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let q = integrate(&r, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!((q - simplex_monomial(a, b)).abs() < 1e-13, "d={d} a={a} b={b}");
                }
            }
            let e = edge_rule(d).unwrap();
            assert!((e.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..=d as i32 {
                let q = integrate(&e, |x, _| x.powi(a));
                assert!((q - 1.0 / (a as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(triangle_rule(0), Err(Error::Capability(_))));
        assert!(matches!(edge_rule(MAX_DEGREE + 1), Err(Error::Capability(_))));
    }

    proptest! {
        #[test]
        fn random_polynomials(d in 1usize..=12, coeffs in proptest::collection::vec(-1.0f64..1.0, 91)) {
            let r = triangle_rule(d).unwrap();
            let mut exact = 0.0;
            let mut terms = Vec::new();
            let mut idx = 0;
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    exact += coeffs[idx] * simplex_monomial(a, b);
                    terms.push((coeffs[idx], a as i32, b as i32));
                    idx += 1;
                }
            }
            let q = integrate(&r, |x, y| terms.iter().map(|(c, a, b)| c * x.powi(*a) * y.powi(*b)).sum());
            let scale = terms.iter().map(|t| t.0.abs()).sum::<f64>().max(1e-300);
            prop_assert!((q - exact).abs() <= 1e-12 * scale);
        }
    }
}
