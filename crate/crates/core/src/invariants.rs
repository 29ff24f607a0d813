//! Randomized cross-module invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use crate::difiter::DifferentialIteration;
use crate::equilibria::{self, characteristic_polynomial, find_zeros};
use crate::hermite::{hermite_eval, hermite_zeros};
use crate::lorenzlab::{self, ConfrontationConfig, LorenzParams};
use crate::models;
use crate::polymap::{PartialLinearDecomposition, Poly, PolyMap};
use crate::region::{keyed_rng, BoxRegion};
use crate::saddle::{hessian_yf, series_exp_derivative, ComplexPoly, PlancherelRotach};
use crate::ulam::{build_transition, EscapePolicy, GridPartition};

fn poly(dim: usize, max_deg: u32) -> impl Strategy<Value = Poly> {
    prop::collection::vec(((-3i32..=3), prop::collection::vec(0..=max_deg, dim)), 0..6).prop_map(move |terms| {
        Poly::from_terms(dim, terms.into_iter().map(|(c, p)| (c as f64 * 0.5, p))).unwrap()
    })
}

fn square_map(max_deg: u32) -> impl Strategy<Value = PolyMap> {
    (1usize..=3).prop_flat_map(move |d| {
        prop::collection::vec(poly(d, max_deg), d).prop_map(move |c| PolyMap::new(d, c).unwrap())
    })
}

fn map_and_points(max_deg: u32) -> impl Strategy<Value = (PolyMap, Vec<f64>, Vec<f64>)> {
    square_map(max_deg).prop_flat_map(|m| {
        let d = m.dim_in();
        (
            Just(m),
            prop::collection::vec(-1.5f64..1.5, d),
            prop::collection::vec(-1.5f64..1.5, d),
        )
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn translate_conjugates((m, x, alpha) in map_and_points(3)) {
        let t = m.translate(&alpha).unwrap();
        let shifted: Vec<f64> = x.iter().zip(&alpha).map(|(a, b)| a + b).collect();
        let lhs = t.evaluate(&x).unwrap();
        let rhs = m.evaluate(&shifted).unwrap();
        for i in 0..lhs.len() {
            prop_assert!(rel_close(lhs[i], rhs[i] - alpha[i], 1e-12), "{} vs {}", lhs[i], rhs[i] - alpha[i]);
        }
    }

    #[test]
    fn jacobian_matches_central_differences((m, x, _) in map_and_points(3)) {
        let j = m.jacobian_at(&x).unwrap();
        let h = 1e-5;
        for k in 0..x.len() {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[k] += h;
            dn[k] -= h;
            let fu = m.evaluate(&up).unwrap();
            let fd = m.evaluate(&dn).unwrap();
            for i in 0..fu.len() {
                let fdv = (fu[i] - fd[i]) / (2.0 * h);
                prop_assert!((j[(i, k)] - fdv).abs() < 1e-6 * j[(i, k)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn map_plus_negation_is_zero(m in square_map(4)) {
        let z = m.add(&m.neg()).unwrap();
        prop_assert!(z.is_zero());
        prop_assert!(z.components().iter().all(|c| c.terms().is_empty()));
    }

    #[test]
    fn decompose_recompose_is_exact(m in square_map(3), block in 0usize..3) {
        if block < m.dim_in() {
            if let Some(dec) = PartialLinearDecomposition::decompose(&m, &[block]) {
                prop_assert_eq!(dec.recompose(), m);
            }
        }
    }

    #[test]
    fn lorenz_decomposition_is_exact(sigma in 0.1f64..20.0, rho in 0.1f64..40.0, beta in 0.1f64..5.0) {
        let p = LorenzParams::new(sigma, rho, beta).unwrap();
        let f = models::lorenz(&p);
        let dec = PartialLinearDecomposition::decompose(&f, &[0]).unwrap();
        prop_assert_eq!(dec.recompose(), f);
    }

    #[test]
    fn linear_orbit_matches_closed_form(lambda in -5.0f64..-0.01, a0 in -10.0f64..10.0, delta in 0.001f64..0.1, n in 1usize..400) {
        let f = PolyMap::new(1, vec![Poly::from_terms(1, [(lambda, vec![1])]).unwrap()]).unwrap();
        let it = DifferentialIteration::ode(f, delta).unwrap();
        let orbit = it.orbit(&[a0], n, 0).unwrap();
        let exact = a0 * (1.0 + delta * lambda).powi(n as i32);
        prop_assert!((orbit.last().unwrap()[0] - exact).abs() <= 1e-12 * exact.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn orbits_are_deterministic((m, x, _) in map_and_points(2), delta in 0.001f64..0.05) {
        let it = DifferentialIteration::ode(m, delta).unwrap();
        let a = it.orbit(&x, 200, 0);
        let b = it.orbit(&x, 200, 0);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let pa: Vec<u64> = a.points().flatten().map(|v| v.to_bits()).collect();
                let pb: Vec<u64> = b.points().flatten().map(|v| v.to_bits()).collect();
                prop_assert_eq!(pa, pb);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one run failed and the other did not"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn zeros_are_verified_independently(m in square_map(2), delta in 0.001f64..0.1) {
        let d = m.dim_in();
        let region = BoxRegion::cube(d, -2.0, 2.0).unwrap();
        let search = find_zeros(&m, &region, 6, delta).unwrap();
        for z in &search.zeros {
            let v = m.evaluate(&z.location).unwrap();
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(r < 1e-12, "residual {r}");
            let it = DifferentialIteration::ode(m.clone(), delta).unwrap();
            let moved = it.step(&z.location).unwrap();
            let shift = moved.iter().zip(&z.location).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(shift <= delta * 1e-12);
        }
    }

    #[test]
    fn eigenvalues_are_characteristic_roots(m in square_map(2), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let d = m.dim_in();
        let at = &x[..d];
        let eig = equilibria::eigenvalues(&m.jacobian_at(at).unwrap());
        let coeffs = characteristic_polynomial(&m, at).unwrap();
        let scale = coeffs.iter().map(|c| c.abs()).fold(1.0, f64::max);
        for l in &eig {
            let v = equilibria::eval_upoly(&coeffs, *l);
            prop_assert!(v.norm() < 1e-8 * scale * (1.0 + l.norm()).powi(d as i32), "{v}");
        }
    }

    #[test]
    fn yf_hessian_matches_differences((m, x, y) in map_and_points(3)) {
        let h = hessian_yf(&m, &y, &x).unwrap();
        let g = m.dot(&y).unwrap();
        let step = 1e-5;
        for i in 0..x.len() {
            let gi = g.derivative(i);
            for k in 0..x.len() {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[k] += step;
                dn[k] -= step;
                let fd = (gi.eval(&up) - gi.eval(&dn)) / (2.0 * step);
                let exact = h.matrix[i][k];
                prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0));
                prop_assert_eq!(h.matrix[i][k], h.matrix[k][i]);
            }
        }
    }

    #[test]
    fn series_matches_hermite(n in 0u32..=20, x in -2.5f64..2.5) {
        let p = ComplexPoly::real(Poly::from_terms(1, [(2.0 * x, vec![1]), (-1.0, vec![2])]).unwrap());
        let s = series_exp_derivative(&p, &[n]).unwrap().value;
        let h = hermite_eval(n as usize, x);
        let scale = (0..=n).map(|k| hermite_eval(k as usize, x.abs() + 1.0).abs()).fold(1.0, f64::max);
        prop_assert!((s.re - h).abs() <= 1e-9 * scale && s.im == 0.0);
    }

    #[test]
    fn frame_identities(r in -5.0f64..5.0, s in -5.0f64..5.0, t in -5.0f64..5.0) {
        prop_assume!(s != 0.0 || t != 0.0);
        let p = LorenzParams::classic();
        let f = lorenzlab::wing_frame(&p, [r, s, t]).unwrap();
        prop_assert!(f.orthogonality_error() < 1e-12);
        prop_assert!(f.eigenvector_error() < 1e-12 * f.mu.max(1.0));
        let alpha = p.alpha().unwrap();
        let scale = 1.0 + f.omega_bar_plus.abs() + f.omega_bar_minus.abs();
        prop_assert!((f.omega_bar_plus - f.omega_bar_minus - 2.0 * t * alpha).abs() <= 1e-12 * scale);
    }

    #[test]
    fn transition_rows_are_stochastic(seed in 0u64..1000, m in 4usize..40) {
        let map = DifferentialIteration::ode(models::full_logistic_field(), 1.0).unwrap();
        let part = GridPartition::uniform(BoxRegion::new(vec![0.0], vec![1.0]).unwrap(), m).unwrap();
        let a = build_transition(&map, &part, 9, seed, EscapePolicy::Discard).unwrap();
        let b = build_transition(&map, &part, 9, seed, EscapePolicy::Discard).unwrap();
        prop_assert_eq!(&a, &b);
        for i in 0..a.states {
            prop_assert!((a.row_sum(i) - 1.0).abs() < 1e-12);
        }
    }
}

/// Independent gradient of `P`: differentiate monomials term by term.
fn gradient_by_terms(p: &ComplexPoly, z: &[Complex64]) -> Vec<Complex64> {
    let d = z.len();
    let mut g = vec![Complex64::new(0.0, 0.0); d];
    for (c, powers) in p.terms() {
        for l in 0..d {
            if powers[l] == 0 {
                continue;
            }
            let mut term = c * powers[l] as f64;
            for (k, &e) in powers.iter().enumerate() {
                let e = if k == l { e - 1 } else { e };
                term *= z[k].powu(e);
            }
            g[l] += term;
        }
    }
    g
}

#[test]
fn critical_points_verified_by_independent_gradient() {
    let it = DifferentialIteration::ode(models::lorenz(&LorenzParams::classic()), 0.005).unwrap();
    let y: Vec<Complex64> = [0.1, 1.0, 1.0].iter().map(|v| Complex64::new(v * 4.0, 0.0)).collect();
    let pr = PlancherelRotach::from_iteration(&it, y, vec![4, 4, 4]).unwrap();
    let search = pr.critical_points(64, 0).unwrap();
    assert!(!search.points.is_empty());
    for cp in &search.points {
        let g = gradient_by_terms(&pr.exponent, &cp.location);
        for l in 0..3 {
            let r = cp.location[l] * g[l] - pr.n[l] as f64;
            assert!(r.norm() < 1e-10, "{r}");
        }
    }
}

#[test]
fn classification_is_stable_in_delta() {
    let f = models::lorenz(&LorenzParams::classic());
    let region = BoxRegion::new(vec![-30.0, -30.0, 0.0], vec![30.0, 30.0, 60.0]).unwrap();
    let classes: Vec<Vec<_>> = [0.01, 0.005, 0.001]
        .iter()
        .map(|d| find_zeros(&f, &region, 8, *d).unwrap().zeros.iter().map(|z| z.classification).collect())
        .collect();
    assert!(classes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn zero_set_stable_under_refinement() {
    let f = models::lorenz(&LorenzParams::classic());
    let region = BoxRegion::new(vec![-30.0, -30.0, 0.0], vec![30.0, 30.0, 60.0]).unwrap();
    let a = find_zeros(&f, &region, 8, 0.005).unwrap().zeros;
    let b = find_zeros(&f, &region, 16, 0.005).unwrap().zeros;
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(x.location.iter().zip(&y.location).all(|(u, v)| (u - v).abs() < 1e-10));
    }
}

#[test]
fn hermite_zero_count_and_sign_changes() {
    for n in [1, 2, 7, 30, 101] {
        let z = hermite_zeros(n).unwrap();
        assert_eq!(z.zeros.len(), n);
        let mut probes = vec![z.zeros[0] - 1.0];
        probes.extend(z.zeros.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        probes.push(z.zeros[n - 1] + 1.0);
        let signs: Vec<f64> = probes.iter().map(|x| hermite_eval(n, *x).signum()).collect();
        assert!(signs.windows(2).all(|w| w[0] == -w[1]), "n = {n}");
        let total: f64 = z.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn wing_occupancy_is_balanced() {
    use rand::Rng;
    for seed in 0..3u64 {
        let mut rng = keyed_rng(seed, 1);
        let mut cfg = ConfrontationConfig::classic(1_000_000);
        cfg.start = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(5.0..40.0)];
        let c = lorenzlab::confront(&cfg).unwrap();
        assert!(c.inside_box);
        assert!((0.5..=2.0).contains(&c.occupancy_ratio), "seed {seed}: {}", c.occupancy_ratio);
    }
}

#[test]
fn lorenz_equilibria_agree_across_modules() {
    let p = LorenzParams::classic();
    let f = lorenzlab::lorenz_field(&p);
    let region = BoxRegion::new(vec![-30.0, -30.0, 0.0], vec![30.0, 30.0, 60.0]).unwrap();
    let zs = find_zeros(&f, &region, 8, 0.005).unwrap().zeros;
    let expect = [p.wing_minus(), [0.0; 3], p.wing_plus()];
    for (z, e) in zs.iter().zip(expect) {
        assert!(z.location.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-10));
        let direct = equilibria::eigenvalues(&f.jacobian_at(&e).unwrap());
        for (a, b) in z.eigenvalues.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
