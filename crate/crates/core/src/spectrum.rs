//! Closed-form diagonalization of the three-oscillator model: normal-mode
//! frequencies, stability constraint, Bogoliubov matrices (generic and
//! frozen-mediator branches) and regime classification.
//!
//! Mode ordering is (A, B, C) with B the mediator; A and C are identical
//! oscillators sharing `omega_a`, `lambda_a`.

use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Mat6 = Matrix6<f64>;

/// Mediator branch threshold: the frozen-mediator tables are used only when
/// `(omega_b - lambda_b)/omega_b` falls below this.
pub const HMR_BRANCH_THRESHOLD: f64 = 1e-9;
/// Below this ratio (but above the branch threshold) the generic tables lose
/// digits; such parameter sets are flagged as ill-conditioned.
pub const HMR_CONDITIONING_THRESHOLD: f64 = 1e-6;
/// Classification cutoff for the "near" regimes.
pub const NEAR_REGIME_THRESHOLD: f64 = 1e-3;

/// The six Hamiltonian parameters.
///
/// `omega_*` are oscillator frequencies, `lambda_*` self-squeezing strengths
/// and `g_*` the mediator couplings (A–B and B–C), all in units of ħ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub g_a: f64,
    pub g_b: f64,
}

impl OscillatorParams {
    /// Checks all parameter bounds, including the stability constraint.
    pub fn validate(&self) -> Result<()> {
        if !self.omega_a.is_finite() || self.omega_a <= 0.0 {
            return Err(Error::parameter("omega_a", "must be finite and > 0"));
        }
        if !self.omega_b.is_finite() || self.omega_b <= 0.0 {
            return Err(Error::parameter("omega_b", "must be finite and > 0"));
        }
        if !(0.0..self.omega_a).contains(&self.lambda_a) {
            return Err(Error::parameter(
                "lambda_a",
                format!(
                    "must satisfy 0 <= lambda_a < omega_a (got {} vs omega_a = {})",
                    self.lambda_a, self.omega_a
                ),
            ));
        }
        if !(0.0..=self.omega_b).contains(&self.lambda_b) {
            return Err(Error::parameter(
                "lambda_b",
                format!(
                    "must satisfy 0 <= lambda_b <= omega_b (got {} vs omega_b = {})",
                    self.lambda_b, self.omega_b
                ),
            ));
        }
        if !self.g_a.is_finite() || !self.g_b.is_finite() {
            return Err(Error::parameter("g_a", "couplings must be finite"));
        }
        let st = self.stability_check();
        if !st.ok {
            return Err(Error::parameter(
                "g_a",
                format!(
                    "coupling bound violated: g_a² + g_b² must not exceed \
                     (omega_a + lambda_a)(omega_b + lambda_b)/4; margin = {:.6e}",
                    st.margin
                ),
            ));
        }
        Ok(())
    }

    /// Stability margin `(omega_a + lambda_a)(omega_b + lambda_b)/4 - (g_a² + g_b²)`.
    /// Reports, never fails: negative margin means unstable parameters.
    pub fn stability_check(&self) -> StabilityReport {
        let margin = 0.25 * (self.omega_a + self.lambda_a) * (self.omega_b + self.lambda_b)
            - (self.g_a * self.g_a + self.g_b * self.g_b);
        StabilityReport {
            margin,
            ok: margin >= 0.0,
        }
    }

    /// Regime classification based on how close each oscillator pair sits to
    /// its critical squeezing.
    pub fn classify_regime(&self) -> Regime {
        let hmr_ratio = (self.omega_b - self.lambda_b) / self.omega_b;
        let lmr_ratio = (self.omega_a - self.lambda_a) / self.omega_a;
        if hmr_ratio < HMR_BRANCH_THRESHOLD {
            Regime::ExactHmr
        } else if hmr_ratio < NEAR_REGIME_THRESHOLD {
            Regime::NearHmr
        } else if lmr_ratio < NEAR_REGIME_THRESHOLD {
            Regime::NearLmr
        } else {
            Regime::Generic
        }
    }

    pub fn coupling_norm_sq(&self) -> f64 {
        self.g_a * self.g_a + self.g_b * self.g_b
    }
}

/// Result of the stability test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityReport {
    pub margin: f64,
    pub ok: bool,
}

/// Parameter regime of the mediator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Generic,
    NearHmr,
    ExactHmr,
    NearLmr,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Generic => "generic",
            Regime::NearHmr => "near_hmr",
            Regime::ExactHmr => "exact_hmr",
            Regime::NearLmr => "near_lmr",
        }
    }
}

/// The quadratic form of the Hamiltonian in the complex basis,
/// `H = [[U, V], [V, U]]` with 3×3 real symmetric blocks.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub u: Mat3,
    pub v: Mat3,
}

impl QuadraticForm {
    /// Assembles U and V from the model parameters.
    pub fn build(p: &OscillatorParams) -> Result<QuadraticForm> {
        p.validate()?;
        Ok(Self::build_unchecked(p))
    }

    /// Same as [`QuadraticForm::build`] without parameter validation, for
    /// grid scans that deliberately cross the stability boundary.
    pub fn build_unchecked(p: &OscillatorParams) -> QuadraticForm {
        let u = Mat3::new(
            p.omega_a, p.g_a, 0.0, //
            p.g_a, p.omega_b, p.g_b, //
            0.0, p.g_b, p.omega_a,
        );
        let v = Mat3::new(
            p.lambda_a, p.g_a, 0.0, //
            p.g_a, p.lambda_b, p.g_b, //
            0.0, p.g_b, p.lambda_a,
        );
        QuadraticForm { u, v }
    }

    /// The full 6×6 form `[[U, V], [V, U]]` (real entries, complex basis).
    pub fn h_block(&self) -> Mat6 {
        let mut h = Mat6::zeros();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.u);
        h.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.v);
        h.fixed_view_mut::<3, 3>(3, 0).copy_from(&self.v);
        h.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.u);
        h
    }

    /// The same form expressed in the real basis: block-diagonal
    /// `[[U + V, 0], [0, U - V]]`.
    pub fn h_real(&self) -> Mat6 {
        let mut h = Mat6::zeros();
        let sum = self.u + self.v;
        let diff = self.u - self.v;
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&sum);
        h.fixed_view_mut::<3, 3>(3, 3).copy_from(&diff);
        h
    }
}

/// Closed-form normal-mode frequencies of the model.
///
/// `k1` belongs to the antisymmetric A–C combination that decouples from the
/// mediator; `k2`/`k3` are the minus/plus roots of the remaining quartic and
/// therefore need not be in ascending order relative to `k1`
/// (always `k2 <= k1 <= k3`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosedFormSpectrum {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Discriminant of the quartic factor; nonnegative for stable parameters.
    pub q: f64,
    pub regime: Regime,
}

impl ClosedFormSpectrum {
    pub fn from_params(p: &OscillatorParams) -> Result<ClosedFormSpectrum> {
        let st = p.stability_check();
        if !st.ok {
            return Err(Error::parameter(
                "g_a",
                format!("unstable parameters (stability margin {:.6e})", st.margin),
            ));
        }
        let pa = p.omega_a * p.omega_a - p.lambda_a * p.lambda_a;
        let qb = p.omega_b * p.omega_b - p.lambda_b * p.lambda_b;
        let s = pa + qb;
        let r = (p.omega_a + p.lambda_a) * (p.omega_b + p.lambda_b) - 4.0 * p.coupling_norm_sq();
        let q = s * s - 4.0 * (p.omega_a - p.lambda_a) * (p.omega_b - p.lambda_b) * r;
        if q < -1e-9 * s * s {
            return Err(Error::Numerical(format!(
                "inconsistent parameters: discriminant {q:.6e} < 0 despite stability"
            )));
        }
        let sq = q.max(0.0).sqrt();
        let k1 = pa.sqrt();
        let k2 = (0.5 * (s - sq)).max(0.0).sqrt();
        let k3 = (0.5 * (s + sq)).sqrt();
        Ok(ClosedFormSpectrum {
            k1,
            k2,
            k3,
            q,
            regime: p.classify_regime(),
        })
    }

    pub fn k_diag(&self) -> Vector3<f64> {
        Vector3::new(self.k1, self.k2, self.k3)
    }

    /// Smallest strictly positive normal-mode frequency.
    pub fn k_min_positive(&self) -> Option<f64> {
        [self.k1, self.k2, self.k3]
            .into_iter()
            .filter(|k| *k > 1e-12)
            .fold(None, |acc, k| Some(acc.map_or(k, |a: f64| a.min(k))))
    }

    pub fn k_max(&self) -> f64 {
        self.k1.max(self.k2).max(self.k3)
    }
}

/// Direction cosines entering the generic Bogoliubov table.
///
/// `(x1, y1)` mixes the two coupling channels; `(x2, y2)` mixes the symmetric
/// A–C combination with the mediator. Both are unit vectors.
#[derive(Debug, Clone, Copy)]
pub struct PhaseAngles {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    /// Normalization of the second angle pair before taking the square root.
    pub t_norm: f64,
}

impl PhaseAngles {
    pub fn from_params(p: &OscillatorParams, spec: &ClosedFormSpectrum) -> PhaseAngles {
        let gn = p.coupling_norm_sq().sqrt();
        // Degenerate direction for vanishing couplings; any unit vector works
        // since the affected table entries carry a factor of g.
        let (x1, y1) = if gn == 0.0 {
            (1.0, 0.0)
        } else {
            (p.g_b / gn, p.g_a / gn)
        };
        let a = p.omega_a - p.lambda_a;
        let b = p.omega_b - p.lambda_b;
        let num = spec.k2 * spec.k2 + p.lambda_a * p.lambda_a - p.omega_a * p.omega_a;
        let cross = 4.0 * a * b * p.coupling_norm_sq();
        let t_norm = num * num + cross;
        let (x2, y2) = if t_norm == 0.0 {
            // Only reachable for g = 0 with degenerate k2 = k1.
            (0.0, 1.0)
        } else {
            (num / t_norm.sqrt(), cross.sqrt() / t_norm.sqrt())
        };
        PhaseAngles {
            x1,
            y1,
            x2,
            y2,
            t_norm,
        }
    }
}

/// Which closed-form table produced a Bogoliubov pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BogoliubovBranch {
    Generic,
    /// Frozen-mediator limit (`lambda_b = omega_b`).
    Hmr,
}

/// Numerical conditioning of the generic table for the given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    Well,
    /// `omega_b - lambda_b` is small enough that the generic table loses
    /// digits; results remain usable but residuals degrade.
    NearDegenerate,
}

/// Real Bogoliubov matrices diagonalizing the quadratic form, together with
/// the normal-mode frequencies they belong to.
///
/// In the frozen-mediator branch the k2 = 0 mode carries no oscillation and
/// the tables diagonalize the form only up to a residual `x_B²` term; its
/// coefficient is `frozen_coeff` and the exact propagator restores it as a
/// linear-in-time correction.
#[derive(Debug, Clone)]
pub struct BogoliubovMatrices {
    pub alpha: Mat3,
    pub beta: Mat3,
    pub k_diag: Vector3<f64>,
    pub branch: BogoliubovBranch,
    pub conditioning: Conditioning,
    /// Coefficient of the undiagonalized mediator-position term (zero in the
    /// generic branch).
    pub frozen_coeff: f64,
}

/// Gauge freedom of the frozen-mediator table. Any valid gauge produces the
/// same propagator; fixed defaults keep intermediate artifacts reproducible.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HmrGauge {
    pub chi1: f64,
    pub chi2: f64,
}

impl Default for HmrGauge {
    fn default() -> Self {
        HmrGauge {
            chi1: 1.0,
            chi2: std::f64::consts::SQRT_2,
        }
    }
}

impl HmrGauge {
    pub fn validate(&self) -> Result<()> {
        if !self.chi1.is_finite() || !self.chi2.is_finite() {
            return Err(Error::Gauge("gauge parameters must be finite".into()));
        }
        if self.chi2.abs() - 1.0 <= 1e-6 {
            return Err(Error::Gauge(format!(
                "|chi2| must exceed 1 by more than 1e-6 (got {})",
                self.chi2
            )));
        }
        Ok(())
    }
}

fn hmr_ratio(p: &OscillatorParams) -> f64 {
    (p.omega_b - p.lambda_b) / p.omega_b
}

/// Generic-branch Bogoliubov matrices.
///
/// Fails for frozen-mediator parameters (`lambda_b` at `omega_b` within the
/// branch threshold), directing the caller to [`bogoliubov_hmr`].
pub fn bogoliubov_generic(
    p: &OscillatorParams,
    spec: &ClosedFormSpectrum,
) -> Result<BogoliubovMatrices> {
    let ratio = hmr_ratio(p);
    if ratio < HMR_BRANCH_THRESHOLD {
        return Err(Error::NotApplicable(
            "mediator is at its critical squeezing; use the frozen-mediator branch".into(),
        ));
    }
    let conditioning = if ratio < HMR_CONDITIONING_THRESHOLD {
        Conditioning::NearDegenerate
    } else {
        Conditioning::Well
    };
    let ang = PhaseAngles::from_params(p, spec);
    let a = p.omega_a - p.lambda_a;
    let b = p.omega_b - p.lambda_b;
    let (k1, k2, k3) = (spec.k1, spec.k2, spec.k3);
    if k2 <= 0.0 {
        return Err(Error::Numerical(format!(
            "k2 = {k2} is not strictly positive; generic table is singular"
        )));
    }
    let da = |k: f64| 2.0 * (k * a).sqrt();
    let db = |k: f64| 2.0 * (k * b).sqrt();

    let mut alpha = Mat3::zeros();
    let mut beta = Mat3::zeros();
    alpha[(0, 0)] = (k1 + a) * ang.x1 / da(k1);
    alpha[(0, 2)] = -(k1 + a) * ang.y1 / da(k1);
    alpha[(1, 0)] = (k2 + a) * ang.y1 * ang.y2 / da(k2);
    alpha[(1, 1)] = (k2 + b) * ang.x2 / db(k2);
    alpha[(1, 2)] = (k2 + a) * ang.x1 * ang.y2 / da(k2);
    alpha[(2, 0)] = -(k3 + a) * ang.y1 * ang.x2 / da(k3);
    alpha[(2, 1)] = (k3 + b) * ang.y2 / db(k3);
    alpha[(2, 2)] = -(k3 + a) * ang.x1 * ang.x2 / da(k3);

    beta[(0, 0)] = (k1 - a) * ang.x1 / da(k1);
    beta[(0, 2)] = -(k1 - a) * ang.y1 / da(k1);
    beta[(1, 0)] = (k2 - a) * ang.y1 * ang.y2 / da(k2);
    beta[(1, 1)] = (k2 - b) * ang.x2 / db(k2);
    beta[(1, 2)] = (k2 - a) * ang.x1 * ang.y2 / da(k2);
    beta[(2, 0)] = -(k3 - a) * ang.y1 * ang.x2 / da(k3);
    beta[(2, 1)] = (k3 - b) * ang.y2 / db(k3);
    beta[(2, 2)] = -(k3 - a) * ang.x1 * ang.x2 / da(k3);

    Ok(BogoliubovMatrices {
        alpha,
        beta,
        k_diag: spec.k_diag(),
        branch: BogoliubovBranch::Generic,
        conditioning,
        frozen_coeff: 0.0,
    })
}

/// Frozen-mediator Bogoliubov matrices (`lambda_b = omega_b`).
///
/// The normal-mode frequencies collapse to `k = (k1, 0, k1)` and the mediator
/// position decouples as a conserved quantity. The tables leave a residual
/// `delta · x_B²` term undiagonalized with
/// `delta = omega_b - 2 (g_a² + g_b²)/(omega_a + lambda_a)`, stored as
/// `frozen_coeff`; the propagator accounts for it exactly.
pub fn bogoliubov_hmr(p: &OscillatorParams, gauge: &HmrGauge) -> Result<BogoliubovMatrices> {
    if hmr_ratio(p) >= HMR_BRANCH_THRESHOLD {
        return Err(Error::NotApplicable(format!(
            "lambda_b = {} is not at omega_b = {}; use the generic branch",
            p.lambda_b, p.omega_b
        )));
    }
    if p.lambda_a >= p.omega_a {
        return Err(Error::parameter(
            "lambda_a",
            "frozen-mediator branch requires lambda_a < omega_a",
        ));
    }
    gauge.validate()?;
    let a = p.omega_a - p.lambda_a;
    let c = p.omega_a + p.lambda_a;
    let k1 = (p.omega_a * p.omega_a - p.lambda_a * p.lambda_a).sqrt();
    let n1 = (1.0 + gauge.chi1 * gauge.chi1).sqrt();
    let d = (k1 * a).sqrt();
    let s2 = (gauge.chi2 * gauge.chi2 - 1.0).sqrt();
    let (chi1, chi2) = (gauge.chi1, gauge.chi2);

    let mut alpha = Mat3::zeros();
    let mut beta = Mat3::zeros();
    alpha[(0, 0)] = chi1 * (k1 + a) / (2.0 * n1 * d);
    alpha[(0, 1)] = k1 * (p.g_b + chi1 * p.g_a) / (c * n1 * d);
    alpha[(0, 2)] = (k1 + a) / (2.0 * n1 * d);
    alpha[(1, 0)] = -(chi2 - 1.0) * p.g_a / (c * s2);
    alpha[(1, 1)] = chi2 / s2;
    alpha[(1, 2)] = -(chi2 - 1.0) * p.g_b / (c * s2);
    alpha[(2, 0)] = (k1 + a) / (2.0 * n1 * d);
    alpha[(2, 1)] = k1 * (p.g_a - chi1 * p.g_b) / (c * n1 * d);
    alpha[(2, 2)] = -(k1 + a) * chi1 / (2.0 * n1 * d);

    beta[(0, 0)] = chi1 * (k1 - a) / (2.0 * n1 * d);
    beta[(0, 1)] = alpha[(0, 1)];
    beta[(0, 2)] = (k1 - a) / (2.0 * n1 * d);
    beta[(1, 0)] = -alpha[(1, 0)];
    beta[(1, 1)] = 1.0 / s2;
    beta[(1, 2)] = -alpha[(1, 2)];
    beta[(2, 0)] = (k1 - a) / (2.0 * n1 * d);
    beta[(2, 1)] = alpha[(2, 1)];
    beta[(2, 2)] = -(k1 - a) * chi1 / (2.0 * n1 * d);

    let frozen_coeff = p.omega_b - 2.0 * p.coupling_norm_sq() / c;
    Ok(BogoliubovMatrices {
        alpha,
        beta,
        k_diag: Vector3::new(k1, 0.0, k1),
        branch: BogoliubovBranch::Hmr,
        conditioning: Conditioning::Well,
        frozen_coeff,
    })
}

/// Branch dispatch with the default gauge.
pub fn bogoliubov_for(p: &OscillatorParams) -> Result<BogoliubovMatrices> {
    if hmr_ratio(p) < HMR_BRANCH_THRESHOLD {
        bogoliubov_hmr(p, &HmrGauge::default())
    } else {
        let spec = ClosedFormSpectrum::from_params(p)?;
        bogoliubov_generic(p, &spec)
    }
}

impl BogoliubovMatrices {
    /// Max-norm residual of the two closure identities
    /// `α αᵀ - β βᵀ = I` and `α βᵀ - β αᵀ = 0`.
    pub fn identity_residual(&self) -> f64 {
        let r1 = self.alpha * self.alpha.transpose() - self.beta * self.beta.transpose()
            - Mat3::identity();
        let r2 = self.alpha * self.beta.transpose() - self.beta * self.alpha.transpose();
        r1.iter()
            .chain(r2.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm residual of reconstructing the quadratic form:
    /// `αᵀ k̃ α + βᵀ k̃ β = U` and `αᵀ k̃ β + βᵀ k̃ α = V`, where in the
    /// frozen-mediator branch both right-hand sides carry the residual
    /// mediator-position term on their central entry.
    pub fn reconstruction_residual(&self, form: &QuadraticForm) -> f64 {
        let k = Mat3::from_diagonal(&self.k_diag);
        let mut u_target = form.u;
        let mut v_target = form.v;
        u_target[(1, 1)] -= self.frozen_coeff;
        v_target[(1, 1)] -= self.frozen_coeff;
        let ru = self.alpha.transpose() * k * self.alpha + self.beta.transpose() * k * self.beta
            - u_target;
        let rv = self.alpha.transpose() * k * self.beta + self.beta.transpose() * k * self.alpha
            - v_target;
        ru.iter()
            .chain(rv.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::symplectic_eigenvalues_real;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn dm(m: &Mat6) -> DMatrix<f64> {
        DMatrix::from_fn(6, 6, |i, j| m[(i, j)])
    }

    #[test]
    fn quadratic_form_matches_parameter_layout() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 2.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.0,
            g_b: 0.0,
        };
        let f = QuadraticForm::build(&p).unwrap();
        assert_eq!(f.u, Mat3::from_diagonal(&Vector3::new(1.0, 2.0, 1.0)));
        assert_eq!(f.v, Mat3::zeros());

        let p2 = OscillatorParams {
            omega_a: 5.0,
            omega_b: 5.0,
            lambda_a: 1e-4,
            lambda_b: 4.9,
            g_a: 1.0,
            g_b: 1.0,
        };
        let f2 = QuadraticForm::build(&p2).unwrap();
        assert_eq!(f2.u[(0, 0)], 5.0);
        assert_eq!(f2.u[(1, 1)], 5.0);
        assert_eq!(f2.u[(2, 2)], 5.0);
        assert_eq!(f2.u[(0, 1)], 1.0);
        assert_eq!(f2.u[(1, 2)], 1.0);
        assert_eq!(f2.u[(0, 2)], 0.0);
        assert_eq!(f2.v[(0, 0)], 1e-4);
        assert_eq!(f2.v[(1, 1)], 4.9);
        assert_eq!(f2.v[(2, 2)], 1e-4);
        assert_eq!(f2.v[(0, 1)], 1.0);
        assert_eq!(f2.v[(0, 2)], 0.0);

        // symmetric parameters give a mirror-symmetric form (A <-> C)
        let p3 = OscillatorParams {
            omega_a: 2.0,
            omega_b: 2.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.4,
            g_b: 0.4,
        };
        let f3 = QuadraticForm::build(&p3).unwrap();
        let h = f3.h_block();
        // swap modes A and C in both sectors
        let perm = [2usize, 1, 0, 5, 4, 3];
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(h[(i, j)], h[(perm[i], perm[j])], epsilon = 0.0);
            }
        }
    }

    #[test]
    fn stability_margins_match_hand_values() {
        let mut p = OscillatorParams {
            omega_a: 2.0,
            omega_b: 2.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.7,
            g_b: 0.7,
        };
        let st = p.stability_check();
        assert!(st.ok);
        assert_abs_diff_eq!(st.margin, 0.02, epsilon = 1e-12);

        p.g_a = 0.8;
        p.g_b = 0.8;
        let st = p.stability_check();
        assert!(!st.ok);
        assert_abs_diff_eq!(st.margin, -0.28, epsilon = 1e-12);

        p.g_a = 0.0;
        p.g_b = 0.0;
        assert!(p.stability_check().ok);
    }

    #[test]
    fn closed_form_spectrum_spot_values() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.1,
            g_b: 0.1,
        };
        let s = ClosedFormSpectrum::from_params(&p).unwrap();
        assert_abs_diff_eq!(s.k1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.k2, 0.84685, epsilon = 5e-6);
        assert_abs_diff_eq!(s.k3, 1.13263, epsilon = 5e-6);

        // frozen mediator: k = (k1, 0, k1)
        let p = OscillatorParams {
            omega_a: 5.0,
            omega_b: 3.0,
            lambda_a: 3.0,
            lambda_b: 3.0,
            g_a: 1.0,
            g_b: 1.0,
        };
        let s = ClosedFormSpectrum::from_params(&p).unwrap();
        assert_abs_diff_eq!(s.k1, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.k2, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.k3, 4.0, epsilon = 1e-9);

        // decoupled oscillators
        let p = OscillatorParams {
            omega_a: 1.5,
            omega_b: 0.7,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.0,
            g_b: 0.0,
        };
        let s = ClosedFormSpectrum::from_params(&p).unwrap();
        assert_abs_diff_eq!(s.k1, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.k2, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(s.k3, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_spectrum_matches_numeric_route() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.1,
            g_b: 0.1,
        };
        let s = ClosedFormSpectrum::from_params(&p).unwrap();
        let form = QuadraticForm::build(&p).unwrap();
        let h = dm(&form.h_real());
        let mut numeric = symplectic_eigenvalues_real(&h).unwrap();
        numeric.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut closed = [s.k1, s.k2, s.k3];
        closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (c, n) in closed.iter().zip(numeric.iter()) {
            assert_abs_diff_eq!(c, n, epsilon = 1e-10);
        }
    }

    #[test]
    fn regime_classification() {
        let base = OscillatorParams {
            omega_a: 5.0,
            omega_b: 5.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.1,
            g_b: 0.1,
        };
        let exact = OscillatorParams {
            lambda_b: 5.0,
            ..base
        };
        assert_eq!(exact.classify_regime(), Regime::ExactHmr);

        let near = OscillatorParams {
            lambda_b: 5.0 * (1.0 - 1e-4),
            ..base
        };
        assert_eq!(near.classify_regime(), Regime::NearHmr);

        // ratio 0.02 sits above the near cutoff
        let fig_top = OscillatorParams {
            omega_b: 5.0,
            lambda_b: 4.9,
            lambda_a: 1e-4,
            g_b: 1.0,
            ..base
        };
        assert_eq!(fig_top.classify_regime(), Regime::Generic);

        let fig_bottom = OscillatorParams {
            omega_a: 5.0,
            lambda_a: 4.999,
            omega_b: 3.0,
            lambda_b: 2.0,
            g_a: 1.0,
            g_b: 1.4,
        };
        assert_eq!(fig_bottom.classify_regime(), Regime::NearLmr);
    }

    #[test]
    fn generic_bogoliubov_identities_and_reconstruction() {
        let sets = [
            (1.0, 1.0, 0.0, 0.0, 0.1, 0.1),
            (2.0, 1.3, 0.7, 0.4, 0.3, 0.5),
            // near-critical outer oscillators, strong couplings
            (5.0, 3.0, 4.999, 2.0, 1.0, 1.4),
        ];
        for (wa, wb, la, lb, ga, gb) in sets {
            let p = OscillatorParams {
                omega_a: wa,
                omega_b: wb,
                lambda_a: la,
                lambda_b: lb,
                g_a: ga,
                g_b: gb,
            };
            let spec = ClosedFormSpectrum::from_params(&p).unwrap();
            let bog = bogoliubov_generic(&p, &spec).unwrap();
            let form = QuadraticForm::build(&p).unwrap();
            assert!(
                bog.identity_residual() < 1e-10,
                "identities {:?}: {}",
                (wa, wb, la, lb, ga, gb),
                bog.identity_residual()
            );
            assert!(
                bog.reconstruction_residual(&form) < 1e-9,
                "reconstruction {:?}: {}",
                (wa, wb, la, lb, ga, gb),
                bog.reconstruction_residual(&form)
            );
        }
    }

    #[test]
    fn symmetric_case_gives_diagonal_phase_angle() {
        let p = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 0.0,
            lambda_b: 0.0,
            g_a: 0.2,
            g_b: 0.2,
        };
        let spec = ClosedFormSpectrum::from_params(&p).unwrap();
        let ang = PhaseAngles::from_params(&p, &spec);
        let inv = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(ang.x1, inv, epsilon = 1e-14);
        assert_abs_diff_eq!(ang.y1, inv, epsilon = 1e-14);
        assert_abs_diff_eq!(ang.x1 * ang.x1 + ang.y1 * ang.y1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ang.x2 * ang.x2 + ang.y2 * ang.y2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hmr_branch_identities_and_gauge_validation() {
        let p = OscillatorParams {
            omega_a: 5.0,
            omega_b: 4.0,
            lambda_a: 3.0,
            lambda_b: 4.0,
            g_a: 1.0,
            g_b: 1.0,
        };
        let bog = bogoliubov_hmr(&p, &HmrGauge::default()).unwrap();
        assert!(bog.identity_residual() < 1e-10);
        let form = QuadraticForm::build(&p).unwrap();
        assert!(bog.reconstruction_residual(&form) < 1e-9);
        assert_abs_diff_eq!(bog.k_diag[0], 4.0, epsilon = 1e-12);
        assert_eq!(bog.k_diag[1], 0.0);

        // second gauge also closes
        let bog2 = bogoliubov_hmr(
            &p,
            &HmrGauge {
                chi1: 0.3,
                chi2: 2.0,
            },
        )
        .unwrap();
        assert!(bog2.identity_residual() < 1e-10);
        assert!(bog2.reconstruction_residual(&form) < 1e-9);

        // invalid gauge
        assert!(bogoliubov_hmr(
            &p,
            &HmrGauge {
                chi1: 0.0,
                chi2: 1.0
            }
        )
        .is_err());

        // generic branch refuses these parameters
        let spec = ClosedFormSpectrum::from_params(&p).unwrap();
        assert!(matches!(
            bogoliubov_generic(&p, &spec),
            Err(Error::NotApplicable(_))
        ));
        // and the frozen branch refuses generic ones
        let pg = OscillatorParams {
            lambda_b: 2.0,
            ..p
        };
        assert!(matches!(
            bogoliubov_hmr(&pg, &HmrGauge::default()),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn parameter_validation_bounds() {
        let bad_lambda = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 1.0, // equality not admitted for the outer pair
            lambda_b: 0.0,
            g_a: 0.0,
            g_b: 0.0,
        };
        assert!(bad_lambda.validate().is_err());

        let unstable = OscillatorParams {
            omega_a: 1.0,
            omega_b: 1.0,
            lambda_a: 1.0 - 1e-9,
            lambda_b: 1.0,
            g_a: 3.0,
            g_b: 0.0,
        };
        assert!(unstable.validate().is_err());

        let hmr_ok = OscillatorParams {
            omega_a: 5.0,
            omega_b: 3.0,
            lambda_a: 3.0,
            lambda_b: 3.0,
            g_a: 1.0,
            g_b: 1.0,
        };
        hmr_ok.validate().unwrap();
    }

    #[test]
    fn q_discriminant_nonnegative_under_stability() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let omega_a: f64 = rng.random_range(0.2..5.0);
            let omega_b: f64 = rng.random_range(0.2..5.0);
            let lambda_a = rng.random_range(0.0..0.99) * omega_a;
            let lambda_b = rng.random_range(0.0..0.99) * omega_b;
            let gmax = (0.25_f64 * (omega_a + lambda_a) * (omega_b + lambda_b)).sqrt();
            let g = rng.random_range(0.0..0.999) * gmax;
            let th = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let p = OscillatorParams {
                omega_a,
                omega_b,
                lambda_a,
                lambda_b,
                g_a: g * th.cos(),
                g_b: g * th.sin(),
            };
            let s = ClosedFormSpectrum::from_params(&p).unwrap();
            assert!(s.q >= 0.0, "Q = {} for {p:?}", s.q);
            assert!(s.k2 <= s.k1 + 1e-12 && s.k1 <= s.k3 + 1e-12);
        }
    }
}
