use quatflag::sde::SimplexState;
use quatflag::spectral::dirichlet::log_dirichlet_density;
use quatflag::spectral::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shifted_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<JacobiIndex> {
    let base = JacobiIndex::uniform(n, 1.5).unwrap();
    let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    vec![base.clone(), base.shifted(&mu).unwrap()]
}

#[test]
fn jacobi_polynomials_are_generator_eigenfunctions() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in [2usize, 3] {
        for kappa in shifted_indices(n, &mut rng) {
            for p in jacobi_polynomials(&kappa, 5).unwrap() {
                let g = apply_generator(&kappa, &p.poly).unwrap();
                let expect = p.poly.scale(kappa.eigenvalue(p.degree()));
                let err = g.sub(&expect).max_abs_coeff();
                assert!(err <= 1e-9 * p.poly.max_abs_coeff().max(1.0), "n={n} tau={:?} err={err}", p.tau);
            }
        }
    }
}

#[test]
fn beta_two_two_first_eigenvalue() {
    let k = JacobiIndex::uniform(2, 1.5).unwrap();
    assert_eq!(k.eigenvalue(1), -4.0);
}

#[test]
fn low_degree_family_is_orthonormal_in_three_variables() {
    let k = JacobiIndex::new(vec![1.5, 2.1, 0.8]).unwrap();
    let b = JacobiBasis::new(&k, 4).unwrap();
    for i in 0..b.len() {
        for j in 0..=i {
            let g = b.gram_entry(i, j);
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g - e).abs() < 1e-10, "({i},{j}) {g}");
        }
    }
    // The double-precision coefficients also pass a quadrature Gram check. A
    // fixed rule is used since off-diagonal entries have no relative scale.
    let ps = b.polynomials();
    for (i, j) in [(3usize, 3usize), (7, 2), (14, 9)] {
        let v = simplex_rule(2, 160, &mut |x| ps[i].eval(&x[..2]) * ps[j].eval(&x[..2]) * dirichlet_density(&k, x).unwrap());
        let e = if i == j { 1.0 } else { 0.0 };
        assert!((v - e).abs() < 1e-8, "({i},{j}) {v}");
    }
}

#[test]
fn moments_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let n = if case % 2 == 0 { 2 } else { 3 };
        let kappa = JacobiIndex::new((0..n).map(|_| rng.gen_range(0.0..3.0)).collect()).unwrap();
        let alpha: Vec<u32> = (0..n - 1).map(|_| rng.gen_range(0..5)).collect();
        let exact = dirichlet_moment(&kappa, &alpha).unwrap();
        let q = integrate_simplex(
            n - 1,
            |x| {
                let m: f64 = x.iter().zip(&alpha).map(|(v, &a)| v.powi(a as i32)).product();
                m * dirichlet_density(&kappa, x).unwrap()
            },
            1e-11,
            8,
            if n == 2 { 8192 } else { 512 },
        )
        .unwrap();
        assert!((q.value - exact).abs() <= 1e-8 * exact, "kappa={kappa:?} alpha={alpha:?}: {} vs {exact}", q.value);
    }
}

#[test]
fn dirichlet_density_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let kappa = JacobiIndex::new((0..3).map(|_| rng.gen_range(0.0..3.0)).collect()).unwrap();
        let q = integrate_simplex(2, |x| dirichlet_density(&kappa, x).unwrap(), 1e-10, 8, 512).unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{kappa:?}: {}", q.value);
    }
}

#[test]
fn lifted_generator_restricts_to_simplex_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [2usize, 3, 4] {
        let kappa = JacobiIndex::new((0..n).map(|_| rng.gen_range(-0.4..3.0)).collect()).unwrap();
        let mut p = Polynomial::zero(n);
        for _ in 0..12 {
            let e: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            p.add_term(&e, rng.gen_range(-1.0..1.0)).unwrap();
        }
        let lhs = apply_lifted_generator(&kappa, &p).unwrap().restrict_to_simplex();
        let rhs = apply_generator(&kappa, &p.restrict_to_simplex()).unwrap();
        let err = lhs.sub(&rhs).max_abs_coeff();
        assert!(err < 1e-10 * rhs.max_abs_coeff().max(1.0), "n={n}: {err}");
    }
}

#[test]
fn heat_kernel_symmetry_and_positivity() {
    let kappa = JacobiIndex::uniform(2, 1.5).unwrap();
    let hk = HeatKernel::new(&kappa, 40).unwrap();
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    for &t in &[0.05, 0.2, 1.0] {
        for &x in &grid {
            for &y in &grid {
                let a = hk.eval(t, &[x], &[y]).unwrap();
                assert!(a.accurate, "t={t} x={x} y={y} tail={}", a.tail_bound);
                assert!(a.value > 0.0, "t={t} x={x} y={y}: {}", a.value);
                let b = hk.eval(t, &[y], &[x]).unwrap();
                assert!((a.value - b.value).abs() <= 1e-12 * a.value.abs().max(1.0));
            }
        }
    }
}

#[test]
fn heat_kernel_semigroup_property() {
    let kappa = JacobiIndex::new(vec![1.5, 2.3]).unwrap();
    let hk = HeatKernel::new(&kappa, 40).unwrap();
    let (x, y, t, s) = (0.3, 0.8, 0.07, 0.11);
    let lhs = integrate_simplex(
        1,
        |z| {
            let z1 = &z[..1];
            hk.eval(t, &[x], z1).unwrap().value * hk.eval(s, z1, &[y]).unwrap().value * dirichlet_density(&kappa, z).unwrap()
        },
        1e-10,
        16,
        1024,
    )
    .unwrap();
    let rhs = hk.eval(t + s, &[x], &[y]).unwrap().value;
    assert!((lhs.value - rhs).abs() < 1e-8 * rhs, "{} vs {rhs}", lhs.value);
}

#[test]
fn heat_kernel_is_a_probability_density() {
    let kappa = JacobiIndex::uniform(3, 1.5).unwrap();
    let hk = HeatKernel::new(&kappa, 12).unwrap();
    let p0 = hk.basis().eval_all(&[0.2, 0.5]).unwrap();
    let mass = integrate_simplex(
        2,
        |z| {
            let pz = hk.basis().eval_all(&z[..2]).unwrap();
            hk.eval_values(0.3, &p0, &pz).unwrap().value * dirichlet_density(&kappa, z).unwrap()
        },
        1e-9,
        8,
        128,
    )
    .unwrap();
    assert!((mass.value - 1.0).abs() < 1e-8, "{}", mass.value);
}

#[test]
fn conditional_cf_is_decreasing_in_frequency() {
    let lam0 = SimplexState::new(vec![0.5, 0.5]).unwrap();
    let lam = SimplexState::new(vec![0.35, 0.65]).unwrap();
    let mut prev = 1.0;
    for k in 1..=6 {
        let s = 0.3 * k as f64;
        let u = FrequencyVector::new(vec![[s, 0.0, 0.5 * s], [0.0, -0.2 * s, 0.0]]).unwrap();
        let v = cf_conditional(0.5, &lam0, &lam, &u, 40).unwrap();
        assert!(v.kernel_accurate);
        assert!(v.value > 0.0 && v.value < prev, "step {k}: {} after {prev}", v.value);
        prev = v.value;
    }
}

#[test]
fn unconditional_cf_averages_conditional_cf() {
    // Integrate the conditional formula against the law of lambda(t), whose
    // density is the index-3/2 kernel at time 2t.
    let t = 0.4;
    let lam0 = SimplexState::new(vec![0.3, 0.7]).unwrap();
    let u = FrequencyVector::new(vec![[0.6, -0.3, 0.2], [0.1, 0.4, 0.0]]).unwrap();
    let cf = AreaCf::new(&u, 40).unwrap();
    let base = JacobiIndex::uniform(2, 1.5).unwrap();
    let hk = HeatKernel::new(&base, 40).unwrap();
    let avg = integrate_simplex(
        1,
        |z| {
            if z[0] <= 0.0 || z[1] <= 0.0 {
                return 0.0;
            }
            let lam = SimplexState::new(z.to_vec()).unwrap();
            let c = cf.conditional(t, &lam0, &lam).unwrap().value;
            c * hk.eval(2.0 * t, &[0.3], &z[..1]).unwrap().value * log_dirichlet_density(&base, z).unwrap().exp()
        },
        1e-10,
        16,
        2048,
    )
    .unwrap();
    let direct = cf.unconditional(t, &lam0).unwrap();
    assert!((avg.value - direct.value).abs() < 1e-8, "{} vs {}", avg.value, direct.value);
    assert!(direct.value > 0.0 && direct.value < 1.0);
}

#[test]
fn unconditional_cf_approaches_gaussian_limit() {
    // cf(t, u / sqrt t) -> exp(-u' Sigma u / 2) for large t.
    let t: f64 = 20.0;
    let lam0 = SimplexState::new(vec![0.5, 0.5]).unwrap();
    let sigma = limit_covariance(2).unwrap();
    for u in [vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.4, -0.3, 0.0, 0.2, 0.0, 0.5]] {
        let uv = nalgebra::DVector::from_vec(u.clone());
        let limit = -0.5 * (uv.transpose() * &sigma * &uv)[(0, 0)];
        let f = FrequencyVector::from_flat(2, &u).unwrap().scaled(1.0 / t.sqrt());
        let v = cf_unconditional(t, &lam0, &f, 40).unwrap();
        let rel = (v.value.ln() - limit).abs() / limit.abs();
        assert!(rel < 0.02, "u={u:?}: log cf {} vs {limit}", v.value.ln());
    }
}

#[test]
fn stationary_integral_of_inverse_radius() {
    for n in 2..=5usize {
        let r = stationary_inverse_ratio_mean(n).unwrap();
        assert!((r.value - (2 * n - 2) as f64).abs() < 1e-8, "n={n}: {}", r.value);
    }
}

#[test]
fn polynomial_table_exports_as_json() {
    let kappa = JacobiIndex::uniform(3, 1.5).unwrap();
    let ps = jacobi_polynomials(&kappa, 2).unwrap();
    let json = serde_json::to_string(&ps).unwrap();
    let back: Vec<SimplexPolynomial> = serde_json::from_str(&json).unwrap();
    assert_eq!(ps, back);
}
