//! Initial covariance matrices, the closed-form propagator and time
//! evolution.
//!
//! Evolution is evaluated directly at each requested time from the closed
//! form — there is no stepping and no error accumulation; trajectory points
//! are independent and may be computed in parallel.

use nalgebra::{DMatrix, Matrix3, Matrix4, Matrix6, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{
    bogoliubov_for, BogoliubovMatrices, ClosedFormSpectrum, OscillatorParams, QuadraticForm,
};
use crate::symplectic::{CovarianceState, ModeBasis, C64};

pub type CMat3 = Matrix3<C64>;
pub type CMat4 = Matrix4<C64>;
pub type CMat6 = Matrix6<C64>;
pub type Mat4 = Matrix4<f64>;

/// Per-mode squeezing strengths and angles of the initial product state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeSpec {
    pub r: [f64; 3],
    pub theta: [f64; 3],
}

impl SqueezeSpec {
    pub fn vacuum() -> Self {
        SqueezeSpec {
            r: [0.0; 3],
            theta: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.r.iter().enumerate() {
            if !r.is_finite() || *r < 0.0 {
                return Err(Error::parameter(
                    "squeeze.r",
                    format!("r[{i}] must be finite and >= 0, got {r}"),
                ));
            }
        }
        for (i, th) in self.theta.iter().enumerate() {
            if !th.is_finite() {
                return Err(Error::parameter(
                    "squeeze.theta",
                    format!("theta[{i}] must be finite"),
                ));
            }
        }
        Ok(())
    }

    /// Angles reduced modulo 2π.
    pub fn normalized(&self) -> SqueezeSpec {
        let tau = std::f64::consts::TAU;
        SqueezeSpec {
            r: self.r,
            theta: self.theta.map(|t| t.rem_euclid(tau)),
        }
    }
}

/// Covariance matrix of the product of single-mode squeezed vacua, in the
/// complex basis: per mode the `a a†` moment is `cosh 2r` and the anomalous
/// `a a` moment is `-e^{iθ} sinh 2r`. Vacuum (`r = 0`) gives the identity.
pub fn initial_covariance(sq: &SqueezeSpec) -> Result<CovarianceState> {
    sq.validate()?;
    let sq = sq.normalized();
    let m = initial_covariance_mat(&sq);
    let dm = DMatrix::from_fn(6, 6, |i, j| m[(i, j)]);
    CovarianceState::new(ModeBasis::Complex, dm)
}

pub(crate) fn initial_covariance_mat(sq: &SqueezeSpec) -> CMat6 {
    let mut m = CMat6::zeros();
    for i in 0..3 {
        let ch = (2.0 * sq.r[i]).cosh();
        let sh = (2.0 * sq.r[i]).sinh();
        let phase = C64::new(0.0, sq.theta[i]).exp();
        m[(i, i)] = C64::new(ch, 0.0);
        m[(3 + i, 3 + i)] = C64::new(ch, 0.0);
        m[(i, 3 + i)] = -phase * sh;
        m[(3 + i, i)] = (-phase * sh).conj();
    }
    m
}

/// The two 3×3 blocks of the propagator `S(t) = [[A, B], [B*, A*]]` in the
/// complex basis, with `Aᵀ = A` and `B = -B†`.
#[derive(Debug, Clone)]
pub struct PropagatorBlocks {
    pub a: CMat3,
    pub b: CMat3,
    pub t: f64,
}

impl PropagatorBlocks {
    /// Assembles the full 6×6 propagator.
    pub fn s_matrix(&self) -> CMat6 {
        let mut s = CMat6::zeros();
        s.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.a);
        s.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.b);
        s.fixed_view_mut::<3, 3>(3, 0).copy_from(&self.b.map(|z| z.conj()));
        s.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.a.map(|z| z.conj()));
        s
    }

    /// Max-norm deviations from the structural constraints
    /// (`Aᵀ = A`, `B + B† = 0`, `S Ω S† = Ω`).
    pub fn structure_residual(&self) -> f64 {
        let ra = (self.a.transpose() - self.a)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let rb = (self.b + self.b.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let s = self.s_matrix();
        let mut omega = CMat6::zeros();
        for i in 0..3 {
            omega[(i, i)] = C64::new(0.0, -1.0);
            omega[(3 + i, 3 + i)] = C64::new(0.0, 1.0);
        }
        let rs = (s * omega * s.adjoint() - omega)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        ra.max(rb).max(rs)
    }
}

/// Closed-form propagator engine for one parameter set.
///
/// Precomputes the Bogoliubov data once; each call to [`Propagator::blocks`]
/// costs a few 3×3 complex products.
#[derive(Debug, Clone)]
pub struct Propagator {
    alpha: CMat3,
    beta: CMat3,
    k_diag: [f64; 3],
    /// Frozen-mediator residual coefficient; adds the exact linear-in-time
    /// mediator-position shear when nonzero.
    frozen_coeff: f64,
}

impl Propagator {
    pub fn new(params: &OscillatorParams) -> Result<Propagator> {
        params.validate()?;
        let bog = bogoliubov_for(params)?;
        Ok(Self::from_bogoliubov(&bog))
    }

    pub fn from_bogoliubov(bog: &BogoliubovMatrices) -> Propagator {
        let cast = |m: &Matrix3<f64>| m.map(|x| C64::new(x, 0.0));
        Propagator {
            alpha: cast(&bog.alpha),
            beta: cast(&bog.beta),
            k_diag: [bog.k_diag[0], bog.k_diag[1], bog.k_diag[2]],
            frozen_coeff: bog.frozen_coeff,
        }
    }

    /// `A(t) = α† e^{-ik̃t} α - βᵀ e^{+ik̃t} β` and
    /// `B(t) = α† e^{-ik̃t} β - βᵀ e^{+ik̃t} α` (real α, β), plus, in the
    /// frozen-mediator branch, the shear `-i δ t (A - B) E₂₂` restoring the
    /// undiagonalized mediator-position term; the result then equals
    /// `exp(ΩHt)` exactly in both branches.
    pub fn blocks(&self, t: f64) -> PropagatorBlocks {
        let phase_m = CMat3::from_diagonal(&SMatrix::<C64, 3, 1>::from_fn(|i, _| {
            C64::new(0.0, -self.k_diag[i] * t).exp()
        }));
        let phase_p = phase_m.map(|z| z.conj());
        let at = self.alpha.adjoint() * phase_m * self.alpha
            - self.beta.transpose() * phase_p * self.beta;
        let bt = self.alpha.adjoint() * phase_m * self.beta
            - self.beta.transpose() * phase_p * self.alpha;
        let (a, b) = if self.frozen_coeff != 0.0 {
            let corr = (at - bt) * C64::new(0.0, -self.frozen_coeff * t);
            // the correction only carries the mediator column
            let mut shear = CMat3::zeros();
            shear.set_column(1, &corr.column(1));
            (at + shear, bt + shear)
        } else {
            (at, bt)
        };
        PropagatorBlocks { a, b, t }
    }

    /// Full propagator matrix at `t`.
    pub fn matrix(&self, t: f64) -> CMat6 {
        self.blocks(t).s_matrix()
    }
}

/// Applies the propagator blocks to a complex-basis covariance matrix via the
/// block update
/// `𝒰(t) = A 𝒰 A* + B 𝒱* A* - B 𝒰* B - A 𝒱 B`,
/// `𝒱(t) = A 𝒱 A + B 𝒰* A - A 𝒰 B* - B 𝒱* B*`,
/// equivalent to `σ(t) = S σ S†` for the structured `S`.
pub fn evolve_covariance(
    sigma0: &CovarianceState,
    blocks: &PropagatorBlocks,
) -> Result<CovarianceState> {
    if sigma0.basis() != ModeBasis::Complex {
        return Err(Error::Structure(
            "evolution expects the complex basis; call basis_change first".into(),
        ));
    }
    if sigma0.n_modes() != 3 {
        return Err(Error::Structure(format!(
            "evolution expects a 3-mode state, got {}",
            sigma0.n_modes()
        )));
    }
    let m = sigma0.matrix();
    let mut s0 = CMat6::zeros();
    for i in 0..6 {
        for j in 0..6 {
            s0[(i, j)] = m[(i, j)];
        }
    }
    let out = evolve_cov_mat(&s0, blocks);
    let dm = DMatrix::from_fn(6, 6, |i, j| out[(i, j)]);
    CovarianceState::new(ModeBasis::Complex, dm)
}

pub(crate) fn evolve_cov_mat(sigma0: &CMat6, blocks: &PropagatorBlocks) -> CMat6 {
    let u0: CMat3 = sigma0.fixed_view::<3, 3>(0, 0).into();
    let v0: CMat3 = sigma0.fixed_view::<3, 3>(0, 3).into();
    let a = &blocks.a;
    let b = &blocks.b;
    let a_c = a.map(|z| z.conj());
    let b_c = b.map(|z| z.conj());
    let u0_c = u0.map(|z| z.conj());
    let v0_c = v0.map(|z| z.conj());
    let ut = a * u0 * a_c + b * v0_c * a_c - b * u0_c * b - a * v0 * b;
    let vt = a * v0 * a + b * u0_c * a - a * u0 * b_c - b * v0_c * b_c;
    let mut out = CMat6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&ut);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&vt);
    out.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&vt.map(|z| z.conj()));
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&ut.map(|z| z.conj()));
    // exact hermitization of the diagonal block against roundoff drift
    let herm = (out + out.adjoint()) * C64::new(0.5, 0.0);
    herm
}

/// Extracts the reduced terminal-mode (A–C) covariance from a full 6×6
/// complex-basis matrix and expresses it in the real basis
/// `(x_A, x_C, p_A, p_C)`.
pub(crate) fn reduced_real_from_full(sigma: &CMat6) -> Mat4 {
    // keep complex indices (a, c, a†, c†) = (0, 2, 3, 5)
    const KEEP: [usize; 4] = [0, 2, 3, 5];
    let mut red = CMat4::zeros();
    for (i, &ki) in KEEP.iter().enumerate() {
        for (j, &kj) in KEEP.iter().enumerate() {
            red[(i, j)] = sigma[(ki, kj)];
        }
    }
    // conjugate by the 2-mode basis-change unitary: real = U† red U
    let s = 1.0 / 2f64.sqrt();
    let i = C64::new(0.0, s);
    let r = C64::new(s, 0.0);
    #[rustfmt::skip]
    let u = CMat4::new(
        r, C64::new(0.0, 0.0), i, C64::new(0.0, 0.0),
        C64::new(0.0, 0.0), r, C64::new(0.0, 0.0), i,
        r, C64::new(0.0, 0.0), -i, C64::new(0.0, 0.0),
        C64::new(0.0, 0.0), r, C64::new(0.0, 0.0), -i,
    );
    let real = u.adjoint() * red * u;
    real.map(|z| z.re)
}

/// Time-indexed evolution of the full state and its terminal-mode reduction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CovarianceState>,
    pub reduced_states: Vec<CovarianceState>,
}

/// Uniform grid of `n` samples covering `[0, t_max)`; leaving out the right
/// endpoint makes arithmetic means exact-period averages for periodic
/// signals.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 * t_max / n as f64).collect()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::parameter("time_grid", "grid must be nonempty"));
    }
    if grid[0] != 0.0 {
        return Err(Error::parameter("time_grid", "grid must start at 0"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parameter(
            "time_grid",
            "grid must be strictly increasing",
        ));
    }
    Ok(())
}

/// Evolves the initial squeezed product state over the grid, computing each
/// point independently from the closed form.
pub fn evolve_trajectory(
    params: &OscillatorParams,
    sq: &SqueezeSpec,
    grid: &[f64],
) -> Result<Trajectory> {
    validate_grid(grid)?;
    let prop = Propagator::new(params)?;
    let sigma0 = initial_covariance_mat(&sq.normalized());
    sq.validate()?;
    let mut states = Vec::with_capacity(grid.len());
    let mut reduced = Vec::with_capacity(grid.len());
    for &t in grid {
        let blocks = prop.blocks(t);
        let st = evolve_cov_mat(&sigma0, &blocks);
        let full = CovarianceState::new(
            ModeBasis::Complex,
            DMatrix::from_fn(6, 6, |i, j| st[(i, j)]),
        )?;
        let red = full.partial_trace_to_terminal()?;
        states.push(full);
        reduced.push(red);
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        reduced_states: reduced,
    })
}

/// Lightweight closed-form evaluator for the reduced terminal-mode state,
/// used by the measure pipelines; states are computed on demand at any time,
/// never interpolated.
#[derive(Debug, Clone)]
pub struct ReducedEvolution {
    prop: Propagator,
    sigma0: CMat6,
    pub spectrum: ClosedFormSpectrum,
}

impl ReducedEvolution {
    pub fn new(params: &OscillatorParams, sq: &SqueezeSpec) -> Result<ReducedEvolution> {
        params.validate()?;
        sq.validate()?;
        let spectrum = ClosedFormSpectrum::from_params(params)?;
        let prop = Propagator::new(params)?;
        Ok(ReducedEvolution {
            prop,
            sigma0: initial_covariance_mat(&sq.normalized()),
            spectrum,
        })
    }

    /// Reduced A–C covariance at time `t`, in the real basis
    /// `(x_A, x_C, p_A, p_C)`.
    pub fn reduced_real_at(&self, t: f64) -> Mat4 {
        let blocks = self.prop.blocks(t);
        let full = evolve_cov_mat(&self.sigma0, &blocks);
        reduced_real_from_full(&full)
    }

    /// Full complex-basis state at time `t`.
    pub fn full_at(&self, t: f64) -> CMat6 {
        evolve_cov_mat(&self.sigma0, &self.prop.blocks(t))
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }
}

/// Quadratic form helper: complex-basis H as a dynamic matrix, for handing to
/// the generic matrix-exponential oracle.
pub fn h_complex_dyn(form: &QuadraticForm) -> DMatrix<C64> {
    let h = form.h_block();
    DMatrix::from_fn(6, 6, |i, j| C64::new(h[(i, j)], 0.0))
}
