//! Machine-checkable invariant suite: every structural identity the closed
//! forms must satisfy, evaluated on randomized parameter corpora with
//! counter-based per-item seeding (worker count cannot change the corpus).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    h_complex_dyn, initial_covariance_mat, uniform_grid, Mat4, Propagator, ReducedEvolution,
    SqueezeSpec,
};
use crate::error::Result;
use crate::measures::{
    discord_conditional_min, discord_conditional_min_brute, dynamical_fidelity_susceptibility,
    fidelity_route, gaussian_fidelity_real, log_negativity_mat, pt_symplectic_eigenvalues,
    two_mode_symplectic_eigenvalues, DiscordBlocks, FidelityRoute, MeasuredMode,
    WeakCouplingPrediction,
};
use crate::spectrum::{
    bogoliubov_generic, bogoliubov_hmr, ClosedFormSpectrum, HmrGauge, OscillatorParams,
    QuadraticForm,
};
use crate::symplectic::{
    numeric_propagator, symplectic_eigenvalues_real, symplecticity_residual, ModeBasis, C64,
};

/// One validation check: a scalar residual (or deviation) against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: &'static str, value: f64, threshold: f64) -> CheckResult {
        CheckResult {
            name,
            value,
            threshold,
            pass: value <= threshold && value.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<38} value {:>12.4e}  threshold {:>9.1e}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            ));
        }
        out
    }
}

fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Random stable parameter set away from the frozen-mediator limit.
pub fn random_params(rng: &mut impl Rng) -> OscillatorParams {
    let omega_a: f64 = rng.random_range(0.3..3.0);
    let omega_b: f64 = rng.random_range(0.3..3.0);
    let lambda_a = rng.random_range(0.0..0.9) * omega_a;
    let lambda_b = rng.random_range(0.0..0.9) * omega_b;
    let gmax = (0.25 * (omega_a + lambda_a) * (omega_b + lambda_b)).sqrt();
    let g = rng.random_range(0.01..0.95) * gmax;
    let th = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
    OscillatorParams {
        omega_a,
        omega_b,
        lambda_a,
        lambda_b,
        g_a: g * th.cos(),
        g_b: g * th.sin(),
    }
}

/// Random parameter set exactly at the frozen-mediator point.
pub fn random_hmr_params(rng: &mut impl Rng) -> OscillatorParams {
    let omega_a: f64 = rng.random_range(0.5..4.0);
    let omega_b: f64 = rng.random_range(0.5..4.0);
    let lambda_a = rng.random_range(0.0..0.85) * omega_a;
    let gmax = (0.25 * (omega_a + lambda_a) * 2.0 * omega_b).sqrt();
    let g = rng.random_range(0.01..0.9) * gmax;
    let th = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
    OscillatorParams {
        omega_a,
        omega_b,
        lambda_a,
        lambda_b: omega_b,
        g_a: g * th.cos(),
        g_b: g * th.sin(),
    }
}

/// Random physical two-mode covariance matrix in the real basis, built as a
/// random symplectic conjugation of a thermal spectrum.
pub fn random_two_mode_state(rng: &mut impl Rng) -> Mat4 {
    let nu1 = 1.0 + rng.random_range(0.0..1.0f64).powi(2) * 2.0;
    let nu2 = 1.0 + rng.random_range(0.0..1.0f64).powi(2) * 2.0;
    let d = nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::new(nu1, nu2, nu1, nu2));
    // random symplectic via exp(Ω H) with symmetric H
    let mut h = DMatrix::<f64>::zeros(4, 4);
    for i in 0..4 {
        for j in i..4 {
            let v = rng.random_range(-0.45..0.45);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let s_dyn = (crate::symplectic::symplectic_form_real(2) * h).exp();
    let s = Mat4::from_fn(|i, j| s_dyn[(i, j)]);
    s * d * s.transpose()
}

/// Random two-mode product state (uncorrelated squeezed thermal modes).
pub fn random_product_state(rng: &mut impl Rng) -> Mat4 {
    let mut m = Mat4::zeros();
    for mode in 0..2usize {
        let nu: f64 = 1.0 + rng.random_range(0.0..1.5);
        let r: f64 = rng.random_range(0.0..0.8);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (sin, cos) = phi.sin_cos();
        let rot = nalgebra::Matrix2::new(cos, -sin, sin, cos);
        let blk = rot
            * nalgebra::Matrix2::new(nu * (2.0 * r).exp(), 0.0, 0.0, nu * (-2.0 * r).exp())
            * rot.transpose();
        // scatter into (x1, x2, p1, p2) ordering
        let idx = [mode, mode + 2];
        for a in 0..2 {
            for b in 0..2 {
                m[(idx[a], idx[b])] = blk[(a, b)];
            }
        }
    }
    m
}

fn par_max(n: u64, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> f64 {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i);
            f(&mut rng)
        })
        .reduce(|| 0.0, f64::max)
}

/// Runs the full invariant suite. Deterministic for a fixed seed.
pub fn run_validate(seed: u64) -> Result<ValidationReport> {
    let mut checks = Vec::new();

    // 1. closed-form spectrum vs numeric symplectic eigenvalues of H
    let spectrum_dev = par_max(1000, seed ^ 0x01, |rng| {
        let p = random_params(rng);
        let spec = ClosedFormSpectrum::from_params(&p).expect("stable params");
        let form = QuadraticForm::build_unchecked(&p);
        let h = form.h_real();
        let hd = DMatrix::from_fn(6, 6, |i, j| h[(i, j)]);
        let mut numeric = symplectic_eigenvalues_real(&hd).expect("eigensolver");
        numeric.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut closed = [spec.k1, spec.k2, spec.k3];
        closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        closed
            .iter()
            .zip(numeric.iter())
            .map(|(c, n)| (c - n).abs() / c.max(1e-12))
            .fold(0.0, f64::max)
    });
    checks.push(CheckResult::new("spectrum_cross_validation", spectrum_dev, 1e-8));

    // 2-3. generic-branch closure identities and reconstruction
    let generic_identity = par_max(1000, seed ^ 0x02, |rng| {
        let p = random_params(rng);
        let spec = ClosedFormSpectrum::from_params(&p).unwrap();
        bogoliubov_generic(&p, &spec).unwrap().identity_residual()
    });
    checks.push(CheckResult::new("bogoliubov_identity_generic", generic_identity, 1e-10));
    let generic_reconstruction = par_max(1000, seed ^ 0x03, |rng| {
        let p = random_params(rng);
        let spec = ClosedFormSpectrum::from_params(&p).unwrap();
        let form = QuadraticForm::build_unchecked(&p);
        bogoliubov_generic(&p, &spec)
            .unwrap()
            .reconstruction_residual(&form)
    });
    checks.push(CheckResult::new(
        "bogoliubov_reconstruction_generic",
        generic_reconstruction,
        1e-9,
    ));

    // 4-5. frozen-mediator branch
    let hmr_identity = par_max(200, seed ^ 0x04, |rng| {
        let p = random_hmr_params(rng);
        bogoliubov_hmr(&p, &HmrGauge::default())
            .unwrap()
            .identity_residual()
    });
    checks.push(CheckResult::new("bogoliubov_identity_hmr", hmr_identity, 1e-10));
    let hmr_reconstruction = par_max(200, seed ^ 0x05, |rng| {
        let p = random_hmr_params(rng);
        let form = QuadraticForm::build_unchecked(&p);
        bogoliubov_hmr(&p, &HmrGauge::default())
            .unwrap()
            .reconstruction_residual(&form)
    });
    checks.push(CheckResult::new(
        "bogoliubov_reconstruction_hmr",
        hmr_reconstruction,
        1e-9,
    ));

    // 6. gauge independence of the frozen-mediator propagator
    let gauge_dev = par_max(50, seed ^ 0x06, |rng| {
        let p = random_hmr_params(rng);
        let g1 = bogoliubov_hmr(&p, &HmrGauge::default()).unwrap();
        let g2 = bogoliubov_hmr(
            &p,
            &HmrGauge {
                chi1: 0.3,
                chi2: 2.0,
            },
        )
        .unwrap();
        let (p1, p2) = (
            Propagator::from_bogoliubov(&g1),
            Propagator::from_bogoliubov(&g2),
        );
        [0.1, 1.0, 10.0]
            .iter()
            .map(|&t| {
                (p1.matrix(t) - p2.matrix(t))
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    });
    checks.push(CheckResult::new("hmr_gauge_independence", gauge_dev, 1e-9));

    // 7. closed-form propagator vs matrix-exponential oracle (both branches)
    let prop_dev = par_max(100, seed ^ 0x07, |rng| {
        let p = if rng.random_range(0..5) == 0 {
            random_hmr_params(rng)
        } else {
            random_params(rng)
        };
        let prop = Propagator::new(&p).unwrap();
        let h = h_complex_dyn(&QuadraticForm::build_unchecked(&p));
        [0.1, 1.0, 10.0]
            .iter()
            .map(|&t| {
                let s_num = numeric_propagator(&h, t).unwrap();
                let s_cl = prop.matrix(t);
                (0..6)
                    .flat_map(|i| (0..6).map(move |j| (i, j)))
                    .map(|(i, j)| (s_cl[(i, j)] - s_num[(i, j)]).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    });
    checks.push(CheckResult::new("propagator_vs_oracle", prop_dev, 1e-9));

    // 8. group property and symplecticity of the closed form
    let group_dev = par_max(100, seed ^ 0x08, |rng| {
        let p = random_params(rng);
        let prop = Propagator::new(&p).unwrap();
        let (t1, t2) = (rng.random_range(0.05..5.0), rng.random_range(0.05..5.0));
        let lhs = prop.matrix(t1 + t2);
        let rhs = prop.matrix(t1) * prop.matrix(t2);
        (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max)
    });
    checks.push(CheckResult::new("propagator_group_property", group_dev, 1e-9));
    let symp_dev = par_max(100, seed ^ 0x09, |rng| {
        let p = random_params(rng);
        let prop = Propagator::new(&p).unwrap();
        let t = rng.random_range(0.0..20.0);
        let s = prop.matrix(t);
        let sd = DMatrix::from_fn(6, 6, |i, j| s[(i, j)]);
        symplecticity_residual(&sd, ModeBasis::Complex)
    });
    checks.push(CheckResult::new("propagator_symplecticity", symp_dev, 1e-10));

    // 9. purity preservation for pure initial states
    let purity_dev = par_max(100, seed ^ 0x0a, |rng| {
        let p = random_params(rng);
        let sq = SqueezeSpec {
            r: [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ],
            theta: [
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            ],
        };
        let prop = Propagator::new(&p).unwrap();
        let sigma0 = initial_covariance_mat(&sq);
        let t = rng.random_range(0.0..30.0);
        let st = crate::dynamics::evolve_cov_mat(&sigma0, &prop.blocks(t));
        let sd = DMatrix::from_fn(6, 6, |i, j| st[(i, j)]);
        let u = crate::symplectic::basis_change_matrix(3);
        let real = (u.adjoint() * sd * u).map(|z: C64| z.re);
        symplectic_eigenvalues_real(&real)
            .unwrap()
            .into_iter()
            .map(|nu| (nu - 1.0).abs())
            .fold(0.0, f64::max)
    });
    checks.push(CheckResult::new("purity_preservation", purity_dev, 1e-9));

    // 10. basis-change round trip
    let basis_dev = par_max(200, seed ^ 0x0b, |rng| {
        let raw = DMatrix::from_fn(6, 6, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let herm = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
        let st = crate::symplectic::CovarianceState::new(ModeBasis::Complex, herm.clone()).unwrap();
        let back = st.basis_change(ModeBasis::Real).basis_change(ModeBasis::Complex);
        (back.matrix() - &herm)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    });
    checks.push(CheckResult::new("basis_change_round_trip", basis_dev, 1e-12));

    // 11. partial-transpose spectrum of product states never dips below 1
    let pt_product_dev = par_max(200, seed ^ 0x0c, |rng| {
        let m = random_product_state(rng);
        let (n1, _) = pt_symplectic_eigenvalues(&m);
        let en = log_negativity_mat(&m);
        (1.0 - n1).max(en)
    });
    checks.push(CheckResult::new("pt_product_state_floor", pt_product_dev, 1e-9));

    // 12. discord closed form vs brute-force measurement minimization
    let discord_dev = par_max(200, seed ^ 0x0d, |rng| {
        let m = random_two_mode_state(rng);
        let blocks = DiscordBlocks::from_matrix(&m, MeasuredMode::C);
        let closed = discord_conditional_min(&blocks);
        let brute = discord_conditional_min_brute(&m, MeasuredMode::C);
        (closed - brute).abs()
    });
    checks.push(CheckResult::new("discord_oracle_agreement", discord_dev, 1e-4));
    let discord_inf = par_max(200, seed ^ 0x0d, |rng| {
        let m = random_two_mode_state(rng);
        let blocks = DiscordBlocks::from_matrix(&m, MeasuredMode::C);
        let closed = discord_conditional_min(&blocks);
        let brute = discord_conditional_min_brute(&m, MeasuredMode::C);
        closed - brute
    });
    checks.push(CheckResult::new("discord_infimum_property", discord_inf, 1e-6));

    // 13. fidelity identities and route agreement
    let fid_self = par_max(100, seed ^ 0x0e, |rng| {
        let m = random_two_mode_state(rng);
        let md = DMatrix::from_fn(4, 4, |i, j| m[(i, j)]);
        (gaussian_fidelity_real(&md, &md).unwrap() - 1.0).abs()
    });
    checks.push(CheckResult::new("fidelity_self_unity", fid_self, 1e-10));
    let fid_routes = par_max(100, seed ^ 0x0f, |rng| {
        let a = random_two_mode_state(rng);
        let b = random_two_mode_state(rng);
        let ad = DMatrix::from_fn(4, 4, |i, j| a[(i, j)]);
        let bd = DMatrix::from_fn(4, 4, |i, j| b[(i, j)]);
        let v = fidelity_route(&ad, &bd, FidelityRoute::VAux).unwrap();
        let w = fidelity_route(&ad, &bd, FidelityRoute::WAux).unwrap();
        (v - w).abs()
    });
    checks.push(CheckResult::new("fidelity_route_agreement", fid_routes, 1e-8));
    let sq1 = |r: f64| {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            (-2.0 * r).exp(),
            (2.0 * r).exp(),
        ]))
    };
    let fid_spot = (gaussian_fidelity_real(&sq1(0.3), &sq1(0.7))? - 1.0 / 0.4f64.cosh().sqrt())
        .abs();
    checks.push(CheckResult::new("fidelity_squeezed_pair_spot", fid_spot, 1e-8));

    // 14. susceptibility: stationary null and quadratic convergence
    let stationary = {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 2.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.0,
            g_b: 0.0,
        };
        let ev = ReducedEvolution::new(&p, &SqueezeSpec::vacuum())?;
        [0.0, 1.3, 9.4]
            .iter()
            .map(|&t| dynamical_fidelity_susceptibility(&ev, t, 1e-3).unwrap())
            .fold(0.0, f64::max)
    };
    checks.push(CheckResult::new("dfs_stationary_null", stationary, 1e-12));
    let slope_dev = (dfs_convergence_slope()? - 2.0).abs();
    checks.push(CheckResult::new("dfs_convergence_order", slope_dev, 0.1));

    // 15. weak-coupling long-time average
    let weak_dev = {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.005,
            g_b: 0.005,
        };
        let pred = WeakCouplingPrediction::new(&p)?;
        let sim = weak_coupling_average(&p, 10)?;
        (sim - pred.e_n_avg()).abs() / pred.e_n_avg()
    };
    checks.push(CheckResult::new("weak_coupling_average", weak_dev, 0.05));

    // 16. reduced physicality along evolved trajectories
    let reduced_floor = par_max(50, seed ^ 0x10, |rng| {
        let p = random_params(rng);
        let ev = ReducedEvolution::new(&p, &SqueezeSpec::vacuum()).unwrap();
        let t = rng.random_range(0.0..20.0);
        let (n1, _) = two_mode_symplectic_eigenvalues(&ev.reduced_real_at(t));
        (1.0 - n1).max(0.0)
    });
    checks.push(CheckResult::new("reduced_state_physicality", reduced_floor, 1e-9));

    let passed = checks.iter().all(|c| c.pass);
    Ok(ValidationReport {
        seed,
        checks,
        passed,
    })
}

/// Simulated weak-coupling `⟨E_N⟩` over `beats` beat periods.
pub fn weak_coupling_average(p: &OscillatorParams, beats: u32) -> Result<f64> {
    let pred = WeakCouplingPrediction::new(p)?;
    let spec = ClosedFormSpectrum::from_params(p)?;
    let t_max = beats as f64 * pred.beat_period();
    let n = ((20.0 * t_max * spec.k_max() / std::f64::consts::TAU).ceil() as usize).max(4096);
    let ev = ReducedEvolution::new(p, &SqueezeSpec::vacuum())?;
    let grid = uniform_grid(t_max, n);
    let sum: f64 = grid
        .par_iter()
        .map(|&t| log_negativity_mat(&ev.reduced_real_at(t)))
        .sum();
    Ok(sum / n as f64)
}

/// Log–log slope of the susceptibility-estimator error against the step, on
/// a generic squeezed trajectory; second-order stencils give slope 2.
pub fn dfs_convergence_slope() -> Result<f64> {
    let p = OscillatorParams {
        omega_a: 1.7,
        omega_b: 1.1,
        lambda_a: 0.6,
        lambda_b: 0.4,
        g_a: 0.35,
        g_b: 0.2,
    };
    let sq = SqueezeSpec {
        r: [0.4, 0.6, 0.2],
        theta: [0.3, 1.1, -0.7],
    };
    let ev = ReducedEvolution::new(&p, &sq)?;
    let t0 = 2.9;
    let chi = |dt: f64| dynamical_fidelity_susceptibility(&ev, t0, dt);
    // Richardson reference from the two smallest steps
    let c1 = chi(2.5e-4)?;
    let c2 = chi(1.25e-4)?;
    let reference = (4.0 * c2 - c1) / 3.0;
    let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];
    let mut pts = Vec::new();
    for &dt in &steps {
        let err = (chi(dt)? - reference).abs();
        if err > 0.0 {
            pts.push((dt.ln(), err.ln()));
        }
    }
    // least-squares slope
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
