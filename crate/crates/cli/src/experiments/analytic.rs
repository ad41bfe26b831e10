//! Deterministic checks of the Jacobi polynomials, Dirichlet moments and the
//! spectral heat kernel.

use quatflag::spectral::dirichlet::{dirichlet_density, dirichlet_moment};
use quatflag::spectral::poly::MonomialBasis;
use quatflag::spectral::{
    apply_generator, integrate_simplex, stationary_inverse_ratio_mean, HeatKernel, JacobiBasis, JacobiIndex,
};

use crate::config::ExperimentSpec;
use crate::error::CliResult;
use crate::report::{Check, Outcome, Report};

/// Relative tolerance of the eigenfunction identity.
pub const EIGEN_TOL: f64 = 1e-9;

/// Tolerance on Gram entries of the orthonormal basis.
pub const GRAM_TOL: f64 = 1e-10;

/// Tolerance on quadrature checks (moments, masses, semigroup, stationary integral).
pub const QUAD_TOL: f64 = 1e-8;

/// Relative tolerance on the symmetry of the heat kernel.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default largest total degree of the eigenfunction checks.
pub const DEFAULT_EIGEN_DEGREE: u32 = 5;

/// Index shift used when the configuration gives none.
const DEFAULT_SHIFT: [f64; 4] = [0.7, 1.3, 0.4, 1.9];

fn indices(spec: &ExperimentSpec) -> CliResult<Vec<(&'static str, JacobiIndex)>> {
    let n = spec.sim.n;
    let base = JacobiIndex::uniform(n, 1.5)?;
    let shift = spec.model.mu.clone().unwrap_or_else(|| DEFAULT_SHIFT[..n].to_vec());
    let shifted = base.shifted(&shift)?;
    Ok(vec![("base", base), ("shifted", shifted)])
}

/// Largest relative defect of `G p = lambda p` per total degree.
fn eigen_checks(label: &str, kappa: &JacobiIndex, max_degree: u32, report: &mut Report) -> CliResult<()> {
    let basis = JacobiBasis::new(kappa, max_degree)?;
    let mut worst = vec![0.0f64; max_degree as usize + 1];
    for p in basis.polynomials() {
        let g = apply_generator(kappa, &p.poly)?;
        let err = g.sub(&p.poly.scale(kappa.eigenvalue(p.degree()))).max_abs_coeff() / p.poly.max_abs_coeff().max(1.0);
        let d = p.degree() as usize;
        worst[d] = worst[d].max(err);
    }
    for (d, w) in worst.into_iter().enumerate() {
        report.push(Check::at_most("eigen_identity", format!("kappa={label} degree={d}"), w, EIGEN_TOL));
    }
    Ok(())
}

fn gram_check(label: &str, kappa: &JacobiIndex, max_degree: u32, report: &mut Report) -> CliResult<()> {
    let basis = JacobiBasis::new(kappa, max_degree)?;
    let mut worst: f64 = 0.0;
    for a in 0..basis.len() {
        for b in 0..=a {
            let e = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((basis.gram_entry(a, b) - e).abs());
        }
    }
    report.push(Check::at_most("gram", format!("kappa={label} degree<={max_degree}"), worst, GRAM_TOL));
    Ok(())
}

pub(super) fn jacobi_checks(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let degree = spec.model.max_degree.unwrap_or(DEFAULT_EIGEN_DEGREE);
    let mut report = Report::new(spec.kind, &spec.sim, &spec.model);
    for (label, kappa) in indices(spec)? {
        if spec.runs("eigenfunctions") {
            eigen_checks(label, &kappa, degree, &mut report)?;
        }
        if spec.runs("orthonormality") {
            gram_check(label, &kappa, degree, &mut report)?;
        }
    }
    Ok(Outcome { report: report.finish(), samples: None })
}

fn quadrature_order(n: usize) -> usize {
    if n == 2 {
        8192
    } else {
        512
    }
}

fn moment_checks(label: &str, kappa: &JacobiIndex, report: &mut Report) -> CliResult<()> {
    let n = kappa.n();
    let monomials = MonomialBasis::new(n - 1, 3);
    for i in 0..monomials.len() {
        let alpha = monomials.exponents(i).to_vec();
        let exact = dirichlet_moment(kappa, &alpha)?;
        let q = integrate_simplex(
            n - 1,
            |x| {
                let m: f64 = x.iter().zip(&alpha).map(|(v, &a)| v.powi(a as i32)).product();
                m * dirichlet_density(kappa, x).unwrap_or(f64::NAN)
            },
            1e-11,
            8,
            quadrature_order(n),
        )?;
        report.push(Check::within("moment", format!("kappa={label} alpha={alpha:?}"), q.value, exact, QUAD_TOL * exact));
    }
    Ok(())
}

fn mass_check(label: &str, kappa: &JacobiIndex, report: &mut Report) -> CliResult<()> {
    let n = kappa.n();
    let q = integrate_simplex(n - 1, |x| dirichlet_density(kappa, x).unwrap_or(f64::NAN), 1e-10, 8, quadrature_order(n))?;
    report.push(Check::within("density_mass", format!("kappa={label}"), q.value, 1.0, QUAD_TOL));
    Ok(())
}

/// Interior test points of the simplex in the first `n - 1` coordinates.
fn test_points(n: usize) -> Vec<Vec<f64>> {
    match n {
        2 => [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&x| vec![x]).collect(),
        _ => vec![vec![0.2, 0.5], vec![0.3, 0.3], vec![0.6, 0.1], vec![0.15, 0.15]],
    }
}

fn kernel_checks(kappa: &JacobiIndex, degree: u32, report: &mut Report) -> CliResult<()> {
    let n = kappa.n();
    let hk = HeatKernel::new(kappa, degree)?;
    let times: &[f64] = if n == 2 { &[0.2, 1.0] } else { &[0.3, 1.0] };
    let points = test_points(n);
    for &t in times {
        let mut asym: f64 = 0.0;
        let mut min_value = f64::INFINITY;
        let mut inaccurate = 0;
        for x in &points {
            for y in &points {
                let a = hk.eval(t, x, y)?;
                let b = hk.eval(t, y, x)?;
                asym = asym.max((a.value - b.value).abs() / a.value.abs().max(1.0));
                min_value = min_value.min(a.value);
                inaccurate += usize::from(!a.accurate);
            }
        }
        report.push(Check::at_most("kernel_symmetry", format!("t={t}"), asym, SYMMETRY_TOL));
        report.push(Check::at_least("kernel_positivity", format!("t={t}"), min_value, f64::MIN_POSITIVE));
        report.push(Check::at_most("kernel_tail", format!("t={t}"), inaccurate as f64, 0.0));
    }
    let t = times[0];
    let p0 = hk.basis().eval_all(&points[0])?;
    let q = integrate_simplex(
        n - 1,
        |z| {
            let mass = || -> quatflag::Result<f64> {
                let pz = hk.basis().eval_all(&z[..n - 1])?;
                Ok(hk.eval_values(t, &p0, &pz)?.value * dirichlet_density(kappa, z)?)
            };
            mass().unwrap_or(f64::NAN)
        },
        1e-9,
        8,
        if n == 2 { 2048 } else { 128 },
    )?;
    report.push(Check::within("kernel_mass", format!("t={t} x={:?}", points[0]), q.value, 1.0, QUAD_TOL));
    Ok(())
}

fn semigroup_check(kappa: &JacobiIndex, degree: u32, report: &mut Report) -> CliResult<()> {
    let hk = HeatKernel::new(kappa, degree)?;
    let (x, y, t, s) = (0.3, 0.8, 0.07, 0.11);
    let lhs = integrate_simplex(
        1,
        |z| {
            let v = || -> quatflag::Result<f64> {
                Ok(hk.eval(t, &[x], &z[..1])?.value * hk.eval(s, &z[..1], &[y])?.value * dirichlet_density(kappa, z)?)
            };
            v().unwrap_or(f64::NAN)
        },
        1e-10,
        16,
        1024,
    )?;
    let rhs = hk.eval(t + s, &[x], &[y])?.value;
    report.push(Check::within("semigroup", format!("t={t} s={s}"), lhs.value, rhs, QUAD_TOL * rhs.abs()));
    Ok(())
}

pub(super) fn spectral_checks(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let n = spec.sim.n;
    let mut report = Report::new(spec.kind, &spec.sim, &spec.model);
    let kappas = indices(spec)?;
    let base = &kappas[0].1;
    if spec.runs("eigenfunctions") {
        eigen_checks("base", base, DEFAULT_EIGEN_DEGREE, &mut report)?;
    }
    if spec.runs("moments") {
        for (label, kappa) in &kappas {
            moment_checks(label, kappa, &mut report)?;
        }
    }
    if spec.runs("density_mass") {
        for (label, kappa) in &kappas {
            mass_check(label, kappa, &mut report)?;
        }
    }
    let degree = spec.model.max_degree.unwrap_or(if n == 2 { 40 } else { 12 });
    if spec.runs("kernel") {
        kernel_checks(base, degree, &mut report)?;
    }
    if spec.runs("semigroup") {
        if n == 2 {
            semigroup_check(base, degree, &mut report)?;
        } else {
            report.note("semigroup check runs for n = 2 only");
        }
    }
    if spec.runs("stationary") {
        let q = stationary_inverse_ratio_mean(n)?;
        report.push(Check::within("stationary_integral", format!("n={n}"), q.value, (2 * n - 2) as f64, QUAD_TOL));
    }
    Ok(Outcome { report: report.finish(), samples: None })
}
