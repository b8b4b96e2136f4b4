//! Quantum-correlation measures on reduced two-mode Gaussian states:
//! logarithmic negativity, Gaussian quantum discord (closed form plus an
//! independent brute-force minimizer), Gaussian fidelity (two algebraic
//! routes), dynamical fidelity susceptibility and long-time averages.

use nalgebra::{DMatrix, Matrix2, Vector4};
use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{Mat4, ReducedEvolution, SqueezeSpec};
use crate::error::{Error, Result};
use crate::spectrum::{ClosedFormSpectrum, OscillatorParams};
use crate::symplectic::{CovarianceState, C64};
#[cfg(test)]
use crate::symplectic::ModeBasis;

/// Physicality floor: states whose symplectic spectrum dips below
/// `1 - PHYSICALITY_TOL` are rejected as inputs to the measures.
pub const PHYSICALITY_TOL: f64 = 1e-6;

/// Entries of the partial-transpose symplectic spectrum within this distance
/// below 1 are treated as exactly 1 (no spurious negativity).
pub const PT_CLAMP_TOL: f64 = 1e-10;

pub type Mat2 = Matrix2<f64>;

/// Which terminal mode the Gaussian measurement acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasuredMode {
    A,
    C,
}

// ---------------------------------------------------------------------------
// symplectic spectra of two-mode states (real basis (x1, x2, p1, p2))
// ---------------------------------------------------------------------------

/// Symplectic eigenvalues (ascending pair) of a two-mode real-basis
/// covariance matrix, from the eigenvalues of `iΩσ`.
pub fn two_mode_symplectic_eigenvalues(sigma: &Mat4) -> (f64, f64) {
    #[rustfmt::skip]
    let om = Mat4::new(
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, -1.0, 0.0, 0.0,
    );
    let eigs: Vector4<Complex<f64>> = (om * sigma).complex_eigenvalues();
    let mut mods: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0.5 * (mods[0] + mods[1]), 0.5 * (mods[2] + mods[3]))
}

/// Partial transpose of the second mode: momentum flip `Λ σ Λ`,
/// `Λ = diag(1, 1, 1, -1)`.
pub fn partial_transpose_mat(sigma: &Mat4) -> Mat4 {
    let mut m = *sigma;
    for k in 0..4 {
        m[(3, k)] = -m[(3, k)];
    }
    for k in 0..4 {
        m[(k, 3)] = -m[(k, 3)];
    }
    m
}

/// Absolute-value symplectic spectrum of the partial transpose.
pub fn pt_symplectic_eigenvalues(sigma: &Mat4) -> (f64, f64) {
    two_mode_symplectic_eigenvalues(&partial_transpose_mat(sigma))
}

/// Logarithmic negativity from a real-basis two-mode covariance matrix;
/// assumes the input is physical.
pub fn log_negativity_mat(sigma: &Mat4) -> f64 {
    let (n1, n2) = pt_symplectic_eigenvalues(sigma);
    let mut en = 0.0;
    for nu in [n1, n2] {
        if nu < 1.0 - PT_CLAMP_TOL {
            en -= nu.log2();
        }
    }
    en.max(0.0)
}

fn reduced_real_from_state(sigma: &CovarianceState) -> Result<Mat4> {
    if sigma.n_modes() != 2 {
        return Err(Error::Structure(format!(
            "expected a 2-mode state, got {} modes",
            sigma.n_modes()
        )));
    }
    let m = sigma.to_real_matrix();
    Ok(Mat4::from_fn(|i, j| m[(i, j)]))
}

fn check_physical(sigma: &Mat4) -> Result<()> {
    let (n1, _) = two_mode_symplectic_eigenvalues(sigma);
    if n1 < 1.0 - PHYSICALITY_TOL {
        return Err(Error::Numerical(format!(
            "unphysical covariance matrix: smallest symplectic eigenvalue {n1:.9}"
        )));
    }
    Ok(())
}

/// Logarithmic negativity of a two-mode state,
/// `E_N = max[0, -Σ_{ν̃ < 1} log₂ ν̃]` over the partial-transpose spectrum.
pub fn log_negativity(sigma: &CovarianceState) -> Result<f64> {
    let m = reduced_real_from_state(sigma)?;
    check_physical(&m)?;
    Ok(log_negativity_mat(&m))
}

// ---------------------------------------------------------------------------
// Gaussian quantum discord
// ---------------------------------------------------------------------------

/// Determinants of the blocks entering the discord formula, using the
/// standard naming: `det_unmeasured` / `det_measured` are the marginal-mode
/// blocks, `det_cross` the off-diagonal correlation block and `det_full` the
/// whole two-mode matrix. (The measured-mode marginal, not the correlation
/// block, feeds the local-entropy term; a brute-force minimizer over
/// measurement covariances adjudicates this convention in the test suite.)
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiscordBlocks {
    pub det_unmeasured: f64,
    pub det_measured: f64,
    pub det_cross: f64,
    pub det_full: f64,
}

/// Splits a real-basis `(x1, x2, p1, p2)` two-mode matrix into per-mode 2×2
/// blocks `(unmeasured, cross, measured)` with the measured mode second.
fn mode_blocks(sigma: &Mat4, measured: MeasuredMode) -> (Mat2, Mat2, Mat2) {
    // interleaved per-mode indices: mode1 = (x1, p1) = (0, 2), mode2 = (1, 3)
    let (m1, m2): ([usize; 2], [usize; 2]) = match measured {
        MeasuredMode::C => ([0, 2], [1, 3]),
        MeasuredMode::A => ([1, 3], [0, 2]),
    };
    let pick = |r: [usize; 2], c: [usize; 2]| {
        Mat2::new(
            sigma[(r[0], c[0])],
            sigma[(r[0], c[1])],
            sigma[(r[1], c[0])],
            sigma[(r[1], c[1])],
        )
    };
    (pick(m1, m1), pick(m1, m2), pick(m2, m2))
}

impl DiscordBlocks {
    pub fn from_matrix(sigma: &Mat4, measured: MeasuredMode) -> DiscordBlocks {
        let (a, c, b) = mode_blocks(sigma, measured);
        DiscordBlocks {
            det_unmeasured: a.determinant(),
            det_measured: b.determinant(),
            det_cross: c.determinant(),
            det_full: sigma.determinant(),
        }
    }
}

/// Binary-entropy-like function of a symplectic eigenvalue,
/// `f(x) = ((x+1)/2) log₂((x+1)/2) - ((x-1)/2) log₂((x-1)/2)`, with
/// `f(1) = 0` by continuity. Inputs slightly below 1 (within 1e-8) are
/// rounded up; anything lower is an unphysical argument.
pub fn f_entropy(x: f64) -> Result<f64> {
    if x < 1.0 - 1e-8 {
        return Err(Error::Numerical(format!(
            "entropy function argument {x} below 1"
        )));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let p = 0.5 * (x + 1.0);
    let m = 0.5 * (x - 1.0);
    let mterm = if m > 0.0 { m * m.log2() } else { 0.0 };
    Ok(p * p.log2() - mterm)
}

/// Closed-form minimum of `det ε` over single-mode Gaussian measurements,
/// piecewise in the block determinants.
pub fn discord_conditional_min(blocks: &DiscordBlocks) -> f64 {
    let a = blocks.det_unmeasured;
    let b = blocks.det_measured;
    let c = blocks.det_cross;
    let d = blocks.det_full;
    // Uncorrelated or pure measured marginal: the conditional state equals
    // the unmeasured marginal and the branch formulas degenerate.
    if c * c <= 1e-14 * a.abs().max(1.0) * b.abs().max(1.0) {
        return a;
    }
    if (d - a * b).powi(2) <= (1.0 + b) * c * c * (a + d) && (b - 1.0).abs() > 1e-10 {
        let inner = (c * c + (b - 1.0) * (d - a)).max(0.0);
        (2.0 * c * c + (b - 1.0) * (d - a) + 2.0 * c.abs() * inner.sqrt()) / ((b - 1.0) * (b - 1.0))
    } else {
        let inner = (c.powi(4) + (d - a * b).powi(2) - 2.0 * c * c * (a * b + d)).max(0.0);
        (a * b - c * c + d - inner.sqrt()) / (2.0 * b)
    }
}

/// Gaussian quantum discord of a two-mode state with an optimized Gaussian
/// measurement on `measured`.
pub fn gaussian_discord(sigma: &CovarianceState, measured: MeasuredMode) -> Result<f64> {
    let m = reduced_real_from_state(sigma)?;
    check_physical(&m)?;
    gaussian_discord_mat(&m, measured)
}

/// Same as [`gaussian_discord`] on a raw real-basis matrix (no physicality
/// check), for the hot evolution path.
pub fn gaussian_discord_mat(sigma: &Mat4, measured: MeasuredMode) -> Result<f64> {
    let blocks = DiscordBlocks::from_matrix(sigma, measured);
    let (nu_minus, nu_plus) = two_mode_symplectic_eigenvalues(sigma);
    let e_min = discord_conditional_min(&blocks);
    let d = f_entropy(blocks.det_measured.max(1.0).sqrt())?
        - f_entropy(nu_minus.max(1.0))?
        - f_entropy(nu_plus.max(1.0))?
        + f_entropy(e_min.max(1.0).sqrt())?;
    if d < -1e-6 {
        return Err(Error::Numerical(format!(
            "discord evaluated to {d}, well below zero"
        )));
    }
    Ok(d.max(0.0))
}

/// Conditional covariance after a Gaussian measurement with covariance
/// `meas` on the measured mode: `ε = A - C (B + meas)⁻¹ Cᵀ`.
fn conditional_det(a: &Mat2, c: &Mat2, b: &Mat2, meas: &Mat2) -> f64 {
    let sum = b + meas;
    match sum.try_inverse() {
        Some(inv) => (a - c * inv * c.transpose()).determinant(),
        None => f64::INFINITY,
    }
}

fn measurement_cov(log_s: f64, phi: f64) -> Mat2 {
    let s = log_s.clamp(-22.0, 22.0).exp();
    let (sin, cos) = phi.sin_cos();
    let rot = Mat2::new(cos, -sin, sin, cos);
    rot * Mat2::new(s, 0.0, 0.0, 1.0 / s) * rot.transpose()
}

/// Brute-force minimization of `det ε` over pure single-mode Gaussian
/// measurement covariances `R(φ) diag(s, 1/s) R(φ)ᵀ`: a log-spaced seed grid
/// (128 values of `s` in `[1e-3, 1e3]` × 64 angles) followed by Nelder–Mead
/// refinement. Independent of the closed form; used as its oracle.
pub fn discord_conditional_min_brute(sigma: &Mat4, measured: MeasuredMode) -> f64 {
    let (a, c, b) = mode_blocks(sigma, measured);
    let objective = |z: &[f64; 2]| conditional_det(&a, &c, &b, &measurement_cov(z[0], z[1]));

    let mut best = f64::INFINITY;
    let mut best_z = [0.0_f64, 0.0_f64];
    let (ns, nphi) = (128, 64);
    let ls_lo = (1e-3_f64).ln();
    let ls_hi = (1e3_f64).ln();
    for i in 0..ns {
        let ls = ls_lo + (ls_hi - ls_lo) * i as f64 / (ns - 1) as f64;
        for j in 0..nphi {
            let phi = std::f64::consts::PI * j as f64 / nphi as f64;
            let v = objective(&[ls, phi]);
            if v < best {
                best = v;
                best_z = [ls, phi];
            }
        }
    }
    let step = [
        (ls_hi - ls_lo) / (ns - 1) as f64,
        std::f64::consts::PI / nphi as f64,
    ];
    let refined = nelder_mead(objective, best_z, step, 600, 1e-15);
    best.min(refined)
}

/// Minimal Nelder–Mead on 2 variables; returns the best objective value.
fn nelder_mead<F>(f: F, start: [f64; 2], step: [f64; 2], max_iter: usize, ftol: f64) -> f64
where
    F: Fn(&[f64; 2]) -> f64,
{
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(|p| f(&p));
    for _ in 0..max_iter {
        // order best..worst
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if (values[w] - values[b]).abs() <= ftol * (1.0 + values[b].abs()) {
            break;
        }
        let centroid = [
            0.5 * (simplex[b][0] + simplex[m][0]),
            0.5 * (simplex[b][1] + simplex[m][1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[w][0]),
            centroid[1] + (centroid[1] - simplex[w][1]),
        ];
        let fr = f(&reflect);
        if fr < values[b] {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - simplex[w][0]),
                centroid[1] + 2.0 * (centroid[1] - simplex[w][1]),
            ];
            let fe = f(&expand);
            if fe < fr {
                simplex[w] = expand;
                values[w] = fe;
            } else {
                simplex[w] = reflect;
                values[w] = fr;
            }
        } else if fr < values[m] {
            simplex[w] = reflect;
            values[w] = fr;
        } else {
            let contract = [
                centroid[0] + 0.5 * (simplex[w][0] - centroid[0]),
                centroid[1] + 0.5 * (simplex[w][1] - centroid[1]),
            ];
            let fc = f(&contract);
            if fc < values[w] {
                simplex[w] = contract;
                values[w] = fc;
            } else {
                // shrink toward best
                for i in [m, w] {
                    simplex[i] = [
                        simplex[b][0] + 0.5 * (simplex[i][0] - simplex[b][0]),
                        simplex[b][1] + 0.5 * (simplex[i][1] - simplex[b][1]),
                    ];
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    values.into_iter().fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Gaussian fidelity
// ---------------------------------------------------------------------------

/// Uhlmann fidelity between two zero-mean Gaussian states given as real-basis
/// covariance matrices (vacuum = identity). Computed through the auxiliary
/// matrix `V_aux = Ωᵀ (V₁+V₂)⁻¹ (Ω/4 + V₂ Ω V₁)` after rescaling to the
/// vacuum = ½ convention the auxiliary-matrix formulas are written in.
pub fn gaussian_fidelity_real(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<f64> {
    fidelity_route(v1, v2, FidelityRoute::VAux)
}

/// Algebraic route selector for the fidelity cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityRoute {
    /// `F_tot⁴ = det[2 (√(I + (V_aux Ω)⁻²/4) + I) V_aux]`
    VAux,
    /// `F_tot⁴ = det[(√(I - W⁻²) + I) W iΩ]` with `W = -2 V_aux iΩ`
    WAux,
}

pub fn fidelity_route(v1: &DMatrix<f64>, v2: &DMatrix<f64>, route: FidelityRoute) -> Result<f64> {
    let n2 = v1.nrows();
    if v1.shape() != v2.shape() || n2 != v1.ncols() || n2 % 2 != 0 {
        return Err(Error::Structure(
            "fidelity expects two equal square 2n x 2n matrices".into(),
        ));
    }
    let n = n2 / 2;
    let h1 = v1 * 0.5;
    let h2 = v2 * 0.5;
    let sum = &h1 + &h2;
    let det_sum = sum.determinant();
    let inv = sum.clone().try_inverse().ok_or_else(|| {
        Error::Numerical(format!(
            "V1 + V2 is singular (det = {det_sum:.3e}); fidelity undefined"
        ))
    })?;
    let om = crate::symplectic::symplectic_form_real(n);
    let vaux = om.transpose() * inv * (&om * 0.25 + &h2 * &om * &h1);
    let det_vaux = vaux.determinant();
    let vo = &vaux * &om;

    let ftot4 = match route {
        FidelityRoute::VAux => {
            let vo2 = &vo * &vo;
            let vo2_inv = vo2.try_inverse().ok_or_else(|| {
                Error::Numerical("(V_aux Ω)² is singular; fidelity undefined".into())
            })?;
            let m = DMatrix::<f64>::identity(n2, n2) + vo2_inv * 0.25;
            let eigs = m.complex_eigenvalues();
            let mut prod = C64::new(1.0, 0.0);
            for mu in eigs.iter() {
                prod *= C64::new(1.0, 0.0) + mu.sqrt();
            }
            let scale = 2f64.powi(n2 as i32);
            check_real(prod)? * scale * det_vaux
        }
        FidelityRoute::WAux => {
            let mus = vo.complex_eigenvalues();
            let mut prod = C64::new(1.0, 0.0);
            for mu in mus.iter() {
                let w = C64::new(0.0, -2.0) * mu;
                let inner = C64::new(1.0, 0.0) - (w * w).inv();
                prod *= (C64::new(1.0, 0.0) + inner.sqrt()) * w;
            }
            let det_i_omega = if n % 2 == 0 { 1.0 } else { -1.0 };
            check_real(prod)? * det_i_omega
        }
    };
    if ftot4 < 0.0 {
        return Err(Error::Numerical(format!(
            "negative F_tot⁴ = {ftot4:.3e} in fidelity"
        )));
    }
    if det_sum <= 0.0 {
        return Err(Error::Numerical(format!(
            "det(V1 + V2) = {det_sum:.3e} is not positive"
        )));
    }
    let f = ftot4.powf(0.25) / det_sum.powf(0.25);
    if f > 1.0 + 1e-6 {
        return Err(Error::Numerical(format!("fidelity {f} exceeds 1")));
    }
    Ok(f.clamp(0.0, 1.0))
}

fn check_real(z: C64) -> Result<f64> {
    if z.im.abs() > 1e-8 * z.re.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "fidelity determinant has a residual imaginary part: {z}"
        )));
    }
    Ok(z.re)
}

/// Fidelity between two covariance states (any common basis, 1 or 2 modes).
pub fn gaussian_fidelity(s1: &CovarianceState, s2: &CovarianceState) -> Result<f64> {
    if s1.n_modes() != s2.n_modes() {
        return Err(Error::Structure(format!(
            "fidelity expects equal mode counts, got {} and {}",
            s1.n_modes(),
            s2.n_modes()
        )));
    }
    gaussian_fidelity_real(&s1.to_real_matrix(), &s2.to_real_matrix())
}

fn mat4_to_dyn(m: &Mat4) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
}

/// Fast path used in the evolution loops.
pub fn fidelity_mat4(a: &Mat4, b: &Mat4) -> Result<f64> {
    gaussian_fidelity_real(&mat4_to_dyn(a), &mat4_to_dyn(b))
}

// ---------------------------------------------------------------------------
// dynamical fidelity susceptibility
// ---------------------------------------------------------------------------

/// Symmetric second-difference estimator of the fidelity curvature of the
/// reduced terminal-mode state:
/// `χ_F(t) = [2 - F(σ(t), σ(t+δt)) - F(σ(t), σ(t-δt))] / δt²`.
///
/// `F(t, t) = 1` is used exactly; states at `t ± δt` are evaluated from the
/// closed form, never interpolated. Small negative values (estimator noise)
/// are clamped to zero.
pub fn dynamical_fidelity_susceptibility(
    ev: &ReducedEvolution,
    t: f64,
    delta_t: f64,
) -> Result<f64> {
    if !(delta_t > 0.0) || !delta_t.is_finite() {
        return Err(Error::parameter("delta_t", "must be finite and > 0"));
    }
    let s0 = ev.reduced_real_at(t);
    let sp = ev.reduced_real_at(t + delta_t);
    let sm = ev.reduced_real_at(t - delta_t);
    let chi = (2.0 - fidelity_mat4(&s0, &sp)? - fidelity_mat4(&s0, &sm)?) / (delta_t * delta_t);
    Ok(chi.max(0.0))
}

// ---------------------------------------------------------------------------
// analytic references
// ---------------------------------------------------------------------------

/// Weak-coupling analytic waveform and long-time average for the symmetric
/// vacuum configuration (`omega_a = omega_b`, zero squeezing strengths,
/// `g_a = g_b`), valid for `lambda_p = √2 g / ω` well below 1.
#[derive(Debug, Clone, Copy)]
pub struct WeakCouplingPrediction {
    pub omega: f64,
    pub g: f64,
    pub lambda_p: f64,
}

impl WeakCouplingPrediction {
    pub fn new(p: &OscillatorParams) -> Result<WeakCouplingPrediction> {
        let scale = p.omega_a.abs().max(p.omega_b.abs());
        if (p.omega_a - p.omega_b).abs() > 1e-12 * scale {
            return Err(Error::NotApplicable(
                "weak-coupling law needs omega_a = omega_b".into(),
            ));
        }
        if p.lambda_a != 0.0 || p.lambda_b != 0.0 {
            return Err(Error::NotApplicable(
                "weak-coupling law needs zero self-squeezing".into(),
            ));
        }
        if (p.g_a - p.g_b).abs() > 1e-12 * scale {
            return Err(Error::NotApplicable(
                "weak-coupling law needs g_a = g_b".into(),
            ));
        }
        let lambda_p = 2f64.sqrt() * p.g_a / p.omega_a;
        if lambda_p >= 0.05 {
            return Err(Error::NotApplicable(format!(
                "coupling ratio {lambda_p} too large for the weak-coupling law"
            )));
        }
        Ok(WeakCouplingPrediction {
            omega: p.omega_a,
            g: p.g_a,
            lambda_p,
        })
    }

    /// `E_N(t) ≈ λ_p |sin(2√2 g t)| / (2 ln 2)`.
    pub fn e_n_at(&self, t: f64) -> f64 {
        self.lambda_p * (2.0 * 2f64.sqrt() * self.g * t).sin().abs() / (2.0 * 2f64.ln())
    }

    /// `⟨E_N⟩ = λ_p / (π ln 2)`.
    pub fn e_n_avg(&self) -> f64 {
        self.lambda_p / (std::f64::consts::PI * 2f64.ln())
    }

    /// Period of the entanglement beat `|sin(2√2 g t)|`.
    pub fn beat_period(&self) -> f64 {
        std::f64::consts::PI / (2.0 * 2f64.sqrt() * self.g)
    }

    /// Peak value `λ_p / (2 ln 2)`, reached at `2√2 g t = π/2`.
    pub fn e_n_peak(&self) -> f64 {
        self.lambda_p / (2.0 * 2f64.ln())
    }
}

/// Closed-form partial-transpose spectrum of the reduced state in the exact
/// frozen-mediator limit (`lambda_b = omega_b`) with a vacuum initial state:
/// `ν̃₁ = 1` and
/// `ν̃₂ = √(1 + 16 sin²(k₁t/2)(cos(k₁t) λ_A + ω_A)(g_A² + g_B²)
///        / ((ω_A - λ_A)(ω_A + λ_A)²))`.
/// Both stay at or above 1, so the negativity vanishes identically.
pub fn hmr_pt_eigenvalues(p: &OscillatorParams, t: f64) -> Result<(f64, f64)> {
    if (p.omega_b - p.lambda_b) / p.omega_b >= crate::spectrum::HMR_BRANCH_THRESHOLD {
        return Err(Error::NotApplicable(
            "closed-form PT spectrum requires lambda_b = omega_b".into(),
        ));
    }
    if p.lambda_a >= p.omega_a {
        return Err(Error::parameter("lambda_a", "requires lambda_a < omega_a"));
    }
    let k1 = (p.omega_a * p.omega_a - p.lambda_a * p.lambda_a).sqrt();
    let s = (0.5 * k1 * t).sin();
    let nu2 = (1.0
        + 16.0 * s * s * ((k1 * t).cos() * p.lambda_a + p.omega_a) * p.coupling_norm_sq()
            / ((p.omega_a - p.lambda_a) * (p.omega_a + p.lambda_a).powi(2)))
    .sqrt();
    Ok((1.0, nu2))
}

// ---------------------------------------------------------------------------
// time averages and the measure pipeline
// ---------------------------------------------------------------------------

/// Arithmetic mean of uniformly spaced samples.
pub fn time_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::parameter("series", "cannot average an empty series"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Validates an averaging window against the spectrum: the window must cover
/// at least 10 periods of the slowest nonzero mode and the sampling density
/// at least 20 points per period of the fastest mode.
pub fn validate_window(spec: &ClosedFormSpectrum, t_max: f64, n_samples: usize) -> Result<()> {
    let k_min = spec
        .k_min_positive()
        .ok_or_else(|| Error::Numerical("no nonzero normal-mode frequency".into()))?;
    let min_window = 10.0 * std::f64::consts::TAU / k_min;
    if t_max < min_window {
        return Err(Error::parameter(
            "time.t_max",
            format!("window {t_max} too short; need at least {min_window:.6}"),
        ));
    }
    let needed = (20.0 * t_max * spec.k_max() / std::f64::consts::TAU).ceil() as usize;
    if n_samples < needed {
        return Err(Error::parameter(
            "time.n_samples",
            format!("{n_samples} samples too few; need at least {needed}"),
        ));
    }
    Ok(())
}

/// Default averaging window: `periods` full cycles of the slowest nonzero
/// mode, sampled at ≥ 20 points per period of the fastest mode (at least
/// 4096 samples).
pub fn default_window(spec: &ClosedFormSpectrum, periods: u32) -> Result<(f64, usize)> {
    let k_min = spec
        .k_min_positive()
        .ok_or_else(|| Error::Numerical("no nonzero normal-mode frequency".into()))?;
    let t_max = periods as f64 * std::f64::consts::TAU / k_min;
    let n = (20.0 * t_max * spec.k_max() / std::f64::consts::TAU).ceil() as usize;
    Ok((t_max, n.max(4096)))
}

/// Which series the measure pipeline evaluates.
#[derive(Debug, Clone, Copy)]
pub struct MeasureOptions {
    pub t_max: f64,
    pub n_samples: usize,
    /// Finite-difference step for the susceptibility, as a fraction of the
    /// fastest mode's period.
    pub delta_t_factor: f64,
    pub discord: bool,
    pub chi_f: bool,
    /// Also track the fidelity between `σ_AC(t)` and `σ_AC(0)`.
    pub fidelity_to_initial: bool,
    pub measured_mode: MeasuredMode,
}

impl MeasureOptions {
    pub fn standard(t_max: f64, n_samples: usize) -> MeasureOptions {
        MeasureOptions {
            t_max,
            n_samples,
            delta_t_factor: 1e-3,
            discord: true,
            chi_f: true,
            fidelity_to_initial: false,
            measured_mode: MeasuredMode::C,
        }
    }
}

/// Time-indexed measure samples with their long-time averages.
#[derive(Debug, Clone)]
pub struct MeasureSeries {
    pub times: Vec<f64>,
    pub e_n: Vec<f64>,
    pub discord: Option<Vec<f64>>,
    pub chi_f: Option<Vec<f64>>,
    pub fidelity: Option<Vec<f64>>,
    pub averages: Averages,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Averages {
    pub e_n: f64,
    pub discord: Option<f64>,
    pub chi_f: Option<f64>,
    pub fidelity: Option<f64>,
}

/// Evaluates the requested measures along a uniform grid over `[0, t_max)`.
/// Samples are independent and computed in parallel; assembly is
/// index-ordered, so results do not depend on the worker count.
pub fn evaluate_measures(
    params: &OscillatorParams,
    sq: &SqueezeSpec,
    opts: &MeasureOptions,
) -> Result<MeasureSeries> {
    let ev = ReducedEvolution::new(params, sq)?;
    validate_window(&ev.spectrum, opts.t_max, opts.n_samples)?;
    let delta_t = opts.delta_t_factor * std::f64::consts::TAU / ev.spectrum.k_max();
    let times = crate::dynamics::uniform_grid(opts.t_max, opts.n_samples);
    let sigma0_red = if opts.fidelity_to_initial {
        Some(ev.reduced_real_at(0.0))
    } else {
        None
    };

    struct Sample {
        e_n: f64,
        discord: Option<f64>,
        chi_f: Option<f64>,
        fidelity: Option<f64>,
    }

    let samples: Vec<Result<Sample>> = times
        .par_iter()
        .map(|&t| {
            let red = ev.reduced_real_at(t);
            let e_n = log_negativity_mat(&red);
            let discord = if opts.discord {
                Some(gaussian_discord_mat(&red, opts.measured_mode)?)
            } else {
                None
            };
            let chi_f = if opts.chi_f {
                Some(dynamical_fidelity_susceptibility(&ev, t, delta_t)?)
            } else {
                None
            };
            let fidelity = match &sigma0_red {
                Some(s0) => Some(fidelity_mat4(s0, &red)?),
                None => None,
            };
            Ok(Sample {
                e_n,
                discord,
                chi_f,
                fidelity,
            })
        })
        .collect();

    let mut e_n = Vec::with_capacity(times.len());
    let mut discord = opts.discord.then(|| Vec::with_capacity(times.len()));
    let mut chi_f = opts.chi_f.then(|| Vec::with_capacity(times.len()));
    let mut fidelity = opts
        .fidelity_to_initial
        .then(|| Vec::with_capacity(times.len()));
    for s in samples {
        let s = s?;
        e_n.push(s.e_n);
        if let (Some(v), Some(x)) = (discord.as_mut(), s.discord) {
            v.push(x);
        }
        if let (Some(v), Some(x)) = (chi_f.as_mut(), s.chi_f) {
            v.push(x);
        }
        if let (Some(v), Some(x)) = (fidelity.as_mut(), s.fidelity) {
            v.push(x);
        }
    }

    let averages = Averages {
        e_n: time_average(&e_n)?,
        discord: discord.as_deref().map(time_average).transpose()?,
        chi_f: chi_f.as_deref().map(time_average).transpose()?,
        fidelity: fidelity.as_deref().map(time_average).transpose()?,
    };
    Ok(MeasureSeries {
        times,
        e_n,
        discord,
        chi_f,
        fidelity,
        averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    /// TMSV in the real basis (x1, x2, p1, p2).
    fn tmsv(r: f64) -> Mat4 {
        let c = (2.0 * r).cosh();
        let s = (2.0 * r).sinh();
        #[rustfmt::skip]
        let m = Mat4::new(
            c, s, 0.0, 0.0,
            s, c, 0.0, 0.0,
            0.0, 0.0, c, -s,
            0.0, 0.0, -s, c,
        );
        m
    }

    fn product_state(nu1: f64, nu2: f64) -> Mat4 {
        Mat4::from_diagonal(&Vector4::new(nu1, nu2, nu1, nu2))
    }

    fn to_state(m: &Mat4) -> CovarianceState {
        CovarianceState::new(
            ModeBasis::Real,
            DMatrix::from_fn(4, 4, |i, j| C64::new(m[(i, j)], 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn tmsv_log_negativity_is_linear_in_r() {
        let r = 0.5;
        let en = log_negativity(&to_state(&tmsv(r))).unwrap();
        assert_abs_diff_eq!(en, 2.0 * r / 2f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(en, 1.44270, epsilon = 1e-5);
    }

    #[test]
    fn product_states_carry_no_negativity_or_discord() {
        let st = to_state(&product_state(1.7, 1.2));
        assert_abs_diff_eq!(log_negativity(&st).unwrap(), 0.0, epsilon = 1e-12);
        let d = gaussian_discord(&st, MeasuredMode::C).unwrap();
        assert!(d.abs() < 1e-9, "product discord {d}");
        let d = gaussian_discord(&st, MeasuredMode::A).unwrap();
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn rejects_unphysical_states() {
        let st = to_state(&product_state(0.5, 1.0));
        assert!(log_negativity(&st).is_err());
        assert!(gaussian_discord(&st, MeasuredMode::C).is_err());
    }

    #[test]
    fn tmsv_discord_equals_marginal_entropy() {
        // pure-state discord reduces to the entanglement entropy
        let r = 0.5;
        let d = gaussian_discord(&to_state(&tmsv(r)), MeasuredMode::C).unwrap();
        let expect = f_entropy((2.0 * r).cosh()).unwrap();
        assert_abs_diff_eq!(d, expect, epsilon = 1e-8);
        // symmetric state: measuring either mode gives the same discord
        let d2 = gaussian_discord(&to_state(&tmsv(r)), MeasuredMode::A).unwrap();
        assert_abs_diff_eq!(d, d2, epsilon = 1e-9);
    }

    #[test]
    fn closed_form_conditional_min_matches_brute_force_on_tmsv() {
        let m = tmsv(0.5);
        let blocks = DiscordBlocks::from_matrix(&m, MeasuredMode::C);
        let closed = discord_conditional_min(&blocks);
        let brute = discord_conditional_min_brute(&m, MeasuredMode::C);
        assert_abs_diff_eq!(closed, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(closed, brute, epsilon = 1e-6);
    }

    #[test]
    fn entropy_function_domain() {
        assert_eq!(f_entropy(1.0).unwrap(), 0.0);
        assert_eq!(f_entropy(1.0 - 5e-9).unwrap(), 0.0);
        assert!(f_entropy(0.9).is_err());
        let v = f_entropy(3.0).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 2.0_f64.log2() - 1.0 * 1.0_f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_identities() {
        let vac = DMatrix::<f64>::identity(4, 4);
        assert_abs_diff_eq!(
            gaussian_fidelity_real(&vac, &vac).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // pure squeezed pair, single mode
        let sq = |r: f64| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                (-2.0 * r).exp(),
                (2.0 * r).exp(),
            ]))
        };
        let f = gaussian_fidelity_real(&sq(0.3), &sq(0.7)).unwrap();
        assert_abs_diff_eq!(f, 1.0 / (0.4f64.cosh()).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(f, 0.96177, epsilon = 5e-6);
        // the two algebraic routes agree
        let fw = fidelity_route(&sq(0.3), &sq(0.7), FidelityRoute::WAux).unwrap();
        assert_abs_diff_eq!(f, fw, epsilon = 1e-10);
        // symmetry
        let a = mat4_to_dyn(&tmsv(0.4));
        let b = mat4_to_dyn(&product_state(1.3, 2.0));
        assert_abs_diff_eq!(
            gaussian_fidelity_real(&a, &b).unwrap(),
            gaussian_fidelity_real(&b, &a).unwrap(),
            epsilon = 1e-10
        );
        // self-fidelity of a mixed state
        assert_abs_diff_eq!(gaussian_fidelity_real(&b, &b).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn dfs_vanishes_on_stationary_states() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 2.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.0,
            g_b: 0.0,
        };
        let ev = ReducedEvolution::new(&p, &SqueezeSpec::vacuum()).unwrap();
        for t in [0.0, 1.0, 7.3] {
            let chi = dynamical_fidelity_susceptibility(&ev, t, 1e-3).unwrap();
            assert!(chi.abs() < 1e-12, "chi = {chi}");
        }
        assert!(dynamical_fidelity_susceptibility(&ev, 1.0, 0.0).is_err());
        assert!(dynamical_fidelity_susceptibility(&ev, 1.0, -0.1).is_err());
    }

    #[test]
    fn weak_coupling_prediction_values() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.005,
            g_b: 0.005,
        };
        let w = WeakCouplingPrediction::new(&p).unwrap();
        assert_abs_diff_eq!(w.e_n_avg(), 0.0032474, epsilon = 1e-6);
        assert_abs_diff_eq!(
            w.e_n_at(std::f64::consts::FRAC_PI_2 / (2.0 * 2f64.sqrt() * 0.005)),
            w.e_n_peak(),
            epsilon = 1e-12
        );
        // not applicable off the symmetric vacuum configuration
        let asym = OscillatorParams {
            omega_b: 1.1,
            ..p
        };
        assert!(WeakCouplingPrediction::new(&asym).is_err());
        let strong = OscillatorParams {
            g_a: 0.1,
            g_b: 0.1,
            ..p
        };
        assert!(WeakCouplingPrediction::new(&strong).is_err());
        // zero coupling degenerates to zero entanglement
        let zero = OscillatorParams {
            g_a: 0.0,
            g_b: 0.0,
            ..p
        };
        assert_eq!(WeakCouplingPrediction::new(&zero).unwrap().e_n_avg(), 0.0);
    }

    #[test]
    fn hmr_pt_spectrum_spot_values() {
        let p = OscillatorParams {
            omega_a: 5.0,
            omega_b: 4.0,
            lambda_a: 3.0,
            lambda_b: 4.0,
            g_a: 1.0,
            g_b: 1.0,
        };
        let (n1, n2) = hmr_pt_eigenvalues(&p, 0.0).unwrap();
        assert_eq!(n1, 1.0);
        assert_abs_diff_eq!(n2, 1.0, epsilon = 1e-12);
        let k1 = 4.0;
        let (_, n2) = hmr_pt_eigenvalues(&p, std::f64::consts::PI / k1).unwrap();
        assert_abs_diff_eq!(n2, 1.5f64.sqrt(), epsilon = 1e-12);
        // inapplicable away from the frozen limit
        let gen = OscillatorParams {
            lambda_b: 3.0,
            ..p
        };
        assert!(hmr_pt_eigenvalues(&gen, 1.0).is_err());
    }

    #[test]
    fn averaging_of_rectified_sine() {
        // 10 full periods of |sin|, default-density sampling
        let n = 4096;
        let t_max = 10.0 * std::f64::consts::PI;
        let vals: Vec<f64> = (0..n)
            .map(|j| (j as f64 * t_max / n as f64).sin().abs())
            .collect();
        let mean = time_average(&vals).unwrap();
        assert_abs_diff_eq!(mean, 2.0 / std::f64::consts::PI, epsilon = 1e-4);
        // constant series
        let c = vec![0.7; 100];
        assert_abs_diff_eq!(time_average(&c).unwrap(), 0.7, epsilon = 1e-15);
        assert!(time_average(&[]).is_err());
    }

    #[test]
    fn window_validation_bounds() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.1,
            g_b: 0.1,
        };
        let spec = ClosedFormSpectrum::from_params(&p).unwrap();
        let (t_max, n) = default_window(&spec, 50).unwrap();
        validate_window(&spec, t_max, n).unwrap();
        assert!(validate_window(&spec, 1.0, n).is_err());
        assert!(validate_window(&spec, t_max, 10).is_err());
    }
}
