use quatflag::flag::{horizontality_check, sample_flag_area, skew_product_bm, FlagStepper, DOMAIN_FLOOR};
use quatflag::quat::Quaternion;
use quatflag::sde::*;
use quatflag::spectral::{cf_unconditional, limit_covariance, FrequencyVector};
use quatflag::spn::{barycentric_start, casimir_rate, complete_to_spn, start_with_last_row_moduli};
use quatflag::stats::*;
use quatflag::winding::{sample_variation_bm, CanonicalVariation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const WORKERS: usize = 4;

fn two_sample_z(a: &McEstimate, b: &McEstimate) -> Vec<f64> {
    a.value
        .iter()
        .zip(&b.value)
        .zip(a.std_error.iter().zip(&b.std_error))
        .map(|((x, y), (s, t))| (x - y) / (s * s + t * t).sqrt())
        .collect()
}

/// First and second moments of the terminal squared moduli.
fn moment_samples(lambdas: &[Vec<f64>]) -> Vec<Vec<f64>> {
    lambdas.iter().map(|l| l.iter().copied().chain(l.iter().map(|x| x * x)).collect()).collect()
}

fn last_row_lambda(u: &quatflag::spn::SpnMatrix) -> Vec<f64> {
    u.last_row().iter().map(|q| q.norm_sqr()).collect()
}

#[test]
fn group_mean_decays_at_casimir_rate() {
    let n = 2;
    let cfg = SimConfig::new(n, 0.3, 2e-3, 3000, 101);
    let u0 = start_with_last_row_moduli(&[0.3, 0.7]).unwrap();
    let ends: Vec<Vec<f64>> = run_paths(WORKERS, cfg.n_paths, |i| {
        let p = sample_spn_bm(&cfg, &u0, i).unwrap();
        let u = p.states.last().unwrap();
        (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).flat_map(|(r, c)| u.get(r, c).to_array()).collect()
    })
    .unwrap();
    let est = mean_vector_estimate(&ends).unwrap();
    let decay = (-casimir_rate(n).unwrap() * cfg.t_final).exp();
    let target: Vec<f64> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .flat_map(|(r, c)| u0.get(r, c).to_array())
        .map(|x| x * decay)
        .collect();
    let cmp = compare_entries(&est, &target, 0.0, 3.0).unwrap();
    assert!(cmp.iter().all(|c| c.pass), "max |z| {}", max_abs_z(&cmp));
}

#[test]
fn last_row_moduli_follow_the_simplex_diffusion() {
    let cfg = SimConfig::new(2, 0.2, 1e-3, 3000, 7);
    let lam0 = SimplexState::new(vec![0.8, 0.2]).unwrap();
    let u0 = start_with_last_row_moduli(lam0.as_slice()).unwrap();
    let group: Vec<Vec<f64>> =
        run_paths(WORKERS, cfg.n_paths, |i| last_row_lambda(sample_spn_bm(&cfg, &u0, i).unwrap().states.last().unwrap()))
            .unwrap();
    let simplex: Vec<Vec<f64>> = run_paths(WORKERS, cfg.n_paths, |i| {
        sample_jacobi_simplex(&cfg, &lam0, i).unwrap().states.last().unwrap().as_slice().to_vec()
    })
    .unwrap();
    let a = mean_vector_estimate(&moment_samples(&group)).unwrap();
    let b = mean_vector_estimate(&moment_samples(&simplex)).unwrap();
    for z in two_sample_z(&a, &b) {
        assert!(z.abs() <= 3.0, "z = {z}");
    }
}

#[test]
fn simplex_mean_follows_the_mean_ode() {
    let cfg = SimConfig::new(2, 0.25, 1e-3, 2000, 17);
    let lam0 = SimplexState::new(vec![0.9, 0.1]).unwrap();
    let paths: Vec<Vec<Vec<f64>>> = run_paths(WORKERS, cfg.n_paths, |i| {
        let p = sample_jacobi_simplex(&cfg, &lam0, i).unwrap();
        p.states.iter().skip(50).step_by(50).map(|s| s.as_slice().to_vec()).collect()
    })
    .unwrap();
    let times: Vec<f64> = cfg.times().into_iter().skip(50).step_by(50).collect();
    let report = mean_ode_check(&paths, &times, lam0.as_slice(), 4.0 * cfg.step(), 3.0).unwrap();
    assert!(report.pass, "max |z| {}", report.max_abs_z);
    let flag: Vec<Vec<Vec<f64>>> = run_paths(WORKERS, 1000, |i| {
        let p = sample_spn_bm(&SimConfig::new(2, 0.25, 1e-3, 1000, 18), &barycentric_start(2).unwrap(), i).unwrap();
        p.states.iter().skip(50).step_by(50).map(last_row_lambda).collect()
    })
    .unwrap();
    let fixed = mean_ode_check(&flag, &times, &[0.5, 0.5], 0.0, 3.0).unwrap();
    assert!(fixed.pass, "max |z| {}", fixed.max_abs_z);
}

#[test]
fn skew_product_matches_group_brownian_motion() {
    let cfg = SimConfig::new(2, 0.4, 2e-3, 3000, 23);
    let u0 = start_with_last_row_moduli(&[0.6, 0.4]).unwrap();
    let skew: Vec<Vec<f64>> =
        run_paths(WORKERS, cfg.n_paths, |i| last_row_lambda(skew_product_bm(&cfg, &u0, i).unwrap().states.last().unwrap()))
            .unwrap();
    let direct_cfg = SimConfig { seed: 24, ..cfg.clone() };
    let direct: Vec<Vec<f64>> = run_paths(WORKERS, cfg.n_paths, |i| {
        last_row_lambda(sample_spn_bm(&direct_cfg, &u0, i).unwrap().states.last().unwrap())
    })
    .unwrap();
    let a = mean_vector_estimate(&moment_samples(&skew)).unwrap();
    let b = mean_vector_estimate(&moment_samples(&direct)).unwrap();
    for z in two_sample_z(&a, &b) {
        assert!(z.abs() <= 3.0, "z = {z}");
    }
}

#[test]
fn round_variation_matches_sphere_brownian_motion() {
    let cfg = SimConfig { sphere_scheme: SphereScheme::Intrinsic, ..SimConfig::new(2, 0.5, 2e-3, 3000, 29) };
    let x0 = [Quaternion::new(0.8, 0.0, 0.0, 0.0), Quaternion::new(0.0, 0.6, 0.0, 0.0)];
    let round = CanonicalVariation::round(2);
    let var: Vec<Vec<f64>> = run_paths(WORKERS, cfg.n_paths, |i| {
        let p = sample_variation_bm(&cfg, &round, &x0, i).unwrap();
        p.states.last().unwrap().iter().map(|q| q.norm_sqr()).collect()
    })
    .unwrap();
    let sphere_cfg = SimConfig { seed: 30, ..cfg.clone() };
    let sph: Vec<Vec<f64>> = run_paths(WORKERS, cfg.n_paths, |i| {
        let p = sample_sphere_bm(&sphere_cfg, &x0, i).unwrap();
        p.states.last().unwrap().iter().map(|q| q.norm_sqr()).collect()
    })
    .unwrap();
    let a = mean_vector_estimate(&moment_samples(&var)).unwrap();
    let b = mean_vector_estimate(&moment_samples(&sph)).unwrap();
    for z in two_sample_z(&a, &b) {
        assert!(z.abs() <= 3.0, "z = {z}");
    }
}

#[test]
fn empirical_cf_matches_spectral_formula() {
    let cfg = SimConfig::new(2, 0.5, 2e-3, 5000, 31);
    let u0 = barycentric_start(2).unwrap();
    let areas: Vec<_> = run_paths(WORKERS, cfg.n_paths, |i| sample_flag_area(&cfg, &u0, i).unwrap().area).unwrap();
    let u = FrequencyVector::new(vec![[0.8, 0.0, 0.3], [0.0, -0.5, 0.2]]).unwrap();
    let mc = empirical_cf(&areas, &u).unwrap();
    let exact = cf_unconditional(0.5, &SimplexState::barycentre(2), &u, 40).unwrap();
    let z = z_score(mc.real.scalar(), mc.real.scalar_se(), exact.value, 0.0);
    assert!(z.abs() <= 3.0, "mc {} exact {} z {z}", mc.real.scalar(), exact.value);
    assert!(mc.imag.scalar().abs() <= 3.0 * mc.imag.scalar_se());
}

#[test]
fn area_covariance_grows_linearly() {
    // A short horizon still shows the limiting structure within a generous bias budget.
    let cfg = SimConfig::new(2, 5.0, 4e-3, 1500, 37);
    let u0 = barycentric_start(2).unwrap();
    let scaled: Vec<Vec<f64>> = run_paths(WORKERS, cfg.n_paths, |i| {
        sample_flag_area(&cfg, &u0, i).unwrap().area.flat().iter().map(|v| v / cfg.t_final.sqrt()).collect()
    })
    .unwrap();
    let est = cov_estimate(&scaled).unwrap();
    let cmp = CovarianceComparison::new(&est, &limit_covariance(2).unwrap(), 5.0 / cfg.t_final, 3.0).unwrap();
    assert!(cmp.pass, "max |z| {}\n{:.3}", cmp.max_abs_z, cmp.estimate);
}

#[test]
fn ergodic_average_of_inverse_moduli() {
    let u0 = barycentric_start(2).unwrap();
    let h = 1e-3;
    let mut flag = FlagStepper::new(&u0, h, DOMAIN_FLOOR).unwrap();
    let mut rng = path_rng(41, 0, Lane::Group);
    let mut path = Vec::new();
    for _ in 0..100_000 {
        flag.step(&mut rng).unwrap();
        path.push(flag.lambda().to_vec());
    }
    let est = ergodic_check(&path, 0.0).unwrap();
    for (v, s) in est.value.iter().zip(&est.std_error) {
        assert!((v - 2.0).abs() <= 3.0 * s, "{v} +- {s}");
    }
}

#[test]
fn assembled_path_is_asymptotically_horizontal() {
    let cfg = SimConfig::new(2, 1.0, 1e-4, 100, 43);
    let r = horizontality_check(&cfg, &barycentric_start(2).unwrap(), 4, WORKERS).unwrap();
    assert!(r.rms_fine < r.rms_coarse);
    assert!(r.rms_fine <= 0.02, "{r:?}");
}

#[test]
fn standard_errors_are_calibrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let reps = 500;
    let mut covered = 0;
    for _ in 0..reps {
        let x: Vec<f64> = (0..200usize).map(|_| { let g: f64 = StandardNormal.sample(&mut rng); 1.0 + g }).collect();
        let e = mean_estimate(&x).unwrap();
        if (e.scalar() - 1.0).abs() <= 2.0 * e.scalar_se() {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    assert!((rate - 0.95).abs() <= 0.02, "coverage {rate}");
}

#[test]
fn gaussian_pairs_have_identity_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let s: Vec<Vec<f64>> =
        (0..100_000).map(|_| vec![StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]).collect();
    let est = cov_estimate(&s).unwrap();
    let cmp = compare_entries(&est, &[1.0, 0.0, 0.0, 1.0], 0.0, 3.0).unwrap();
    assert!(cmp.iter().all(|c| c.pass), "{cmp:?}");
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let cfg = SimConfig::new(2, 0.1, 2e-3, 16, 59);
    let u0 = complete_to_spn(&[Quaternion::real(0.6), Quaternion::new(0.0, 0.8, 0.0, 0.0)]).unwrap();
    let run = |w| run_paths(w, cfg.n_paths, |i| sample_flag_area(&cfg, &u0, i).unwrap()).unwrap();
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}
