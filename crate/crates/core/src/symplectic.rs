//! Basis conventions, symplectic structure and generic covariance-matrix
//! operations.
//!
//! Two bases are supported for an `n`-mode system:
//!
//! * `Complex`: mode operators ordered `(a_1 .. a_n, a_1^† .. a_n^†)`.
//! * `Real`: quadratures ordered `(x_1 .. x_n, p_1 .. p_n)`.
//!
//! Covariance matrices are symmetrized second moments normalized so that the
//! vacuum is the identity in both bases. First moments are identically zero
//! throughout this crate: the model Hamiltonian has no linear terms and every
//! supported initial state is zero-mean, so means are not represented.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Hermiticity tolerance accepted when constructing a covariance matrix.
pub const HERMITICITY_TOL: f64 = 1e-9;

/// Relative tolerance used when pairing the ± eigenvalues of `iΩM`.
pub const PAIRING_REL_TOL: f64 = 1e-8;

/// Mode-operator ordering carried by every covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeBasis {
    /// Annihilators first, then creators.
    Complex,
    /// Positions first, then momenta.
    Real,
}

/// The symplectic form for `n` modes in the given basis.
///
/// In the complex basis this is `-i diag(1..1, -1..-1)`; in the real basis
/// the block form `[[0, I], [-I, 0]]`. Both satisfy `Ω² = -I`.
pub fn symplectic_form(n_modes: usize, basis: ModeBasis) -> DMatrix<C64> {
    let n = n_modes;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    match basis {
        ModeBasis::Complex => {
            for i in 0..n {
                m[(i, i)] = C64::new(0.0, -1.0);
                m[(n + i, n + i)] = C64::new(0.0, 1.0);
            }
        }
        ModeBasis::Real => {
            for i in 0..n {
                m[(i, n + i)] = C64::new(1.0, 0.0);
                m[(n + i, i)] = C64::new(-1.0, 0.0);
            }
        }
    }
    m
}

/// Real-valued symplectic form `[[0, I], [-I, 0]]` for `n` modes.
pub fn symplectic_form_real(n_modes: usize) -> DMatrix<f64> {
    let n = n_modes;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// Unitary mapping real-basis vectors to complex-basis vectors,
/// `(1/√2) [[I, iI], [I, -iI]]`.
pub fn basis_change_matrix(n_modes: usize) -> DMatrix<C64> {
    let n = n_modes;
    let s = 1.0 / 2f64.sqrt();
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        u[(i, i)] = C64::new(s, 0.0);
        u[(i, n + i)] = C64::new(0.0, s);
        u[(n + i, i)] = C64::new(s, 0.0);
        u[(n + i, n + i)] = C64::new(0.0, -s);
    }
    u
}

/// A zero-mean Gaussian state, represented by its covariance matrix in a
/// declared basis.
#[derive(Debug, Clone)]
pub struct CovarianceState {
    basis: ModeBasis,
    matrix: DMatrix<C64>,
    n_modes: usize,
}

impl CovarianceState {
    /// Wraps a covariance matrix, checking shape and hermiticity.
    pub fn new(basis: ModeBasis, matrix: DMatrix<C64>) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::Structure(format!(
                "covariance matrix must be square with even dimension, got {r}x{c}"
            )));
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let herm_dev = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_dev > HERMITICITY_TOL * scale {
            return Err(Error::Structure(format!(
                "covariance matrix is not Hermitian (deviation {herm_dev:.3e})"
            )));
        }
        Ok(Self {
            basis,
            n_modes: r / 2,
            matrix,
        })
    }

    /// The vacuum state: identity in either basis.
    pub fn vacuum(n_modes: usize, basis: ModeBasis) -> Self {
        Self {
            basis,
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            n_modes,
        }
    }

    pub fn basis(&self) -> ModeBasis {
        self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// The covariance matrix in the real basis, with the (numerically tiny)
    /// imaginary parts dropped.
    pub fn to_real_matrix(&self) -> DMatrix<f64> {
        let m = match self.basis {
            ModeBasis::Real => self.matrix.clone(),
            ModeBasis::Complex => {
                let u = basis_change_matrix(self.n_modes);
                u.adjoint() * &self.matrix * u
            }
        };
        m.map(|z| z.re)
    }

    /// Re-expresses the state in `target`, conjugating by the basis-change
    /// unitary. A round trip reproduces the input to machine precision.
    pub fn basis_change(&self, target: ModeBasis) -> CovarianceState {
        if self.basis == target {
            return self.clone();
        }
        let u = basis_change_matrix(self.n_modes);
        let matrix = match target {
            ModeBasis::Complex => &u * &self.matrix * u.adjoint(),
            ModeBasis::Real => u.adjoint() * &self.matrix * &u,
        };
        CovarianceState {
            basis: target,
            matrix,
            n_modes: self.n_modes,
        }
    }

    /// Traces out every mode except the first and the last, producing the
    /// reduced two-mode state of the terminal oscillators. In the covariance
    /// picture this deletes the rows and columns of the interior modes.
    pub fn partial_trace_to_terminal(&self) -> Result<CovarianceState> {
        let n = self.n_modes;
        if n < 3 {
            return Err(Error::Structure(format!(
                "partial trace to terminal modes needs at least 3 modes, got {n}"
            )));
        }
        let keep = [0usize, n - 1, n, 2 * n - 1];
        let mut m = DMatrix::zeros(4, 4);
        for (i, &ki) in keep.iter().enumerate() {
            for (j, &kj) in keep.iter().enumerate() {
                m[(i, j)] = self.matrix[(ki, kj)];
            }
        }
        Ok(CovarianceState {
            basis: self.basis,
            matrix: m,
            n_modes: 2,
        })
    }

    /// Partial transpose with respect to the second retained mode of a
    /// two-mode state. In the real basis this conjugates by
    /// `Λ = diag(1, 1, 1, -1)` (momentum flip of the second mode); in the
    /// complex basis it swaps that mode's annihilator and creator indices.
    pub fn partial_transpose_second(&self) -> Result<CovarianceState> {
        if self.n_modes != 2 {
            return Err(Error::Structure(format!(
                "partial transpose expects a 2-mode state, got {} modes",
                self.n_modes
            )));
        }
        let mut m = self.matrix.clone();
        match self.basis {
            ModeBasis::Real => {
                // p2 is index 3 in (x1, x2, p1, p2)
                for k in 0..4 {
                    m[(3, k)] = -m[(3, k)];
                }
                for k in 0..4 {
                    m[(k, 3)] = -m[(k, 3)];
                }
            }
            ModeBasis::Complex => {
                // swap a2 (index 1) with a2^† (index 3)
                m.swap_rows(1, 3);
                m.swap_columns(1, 3);
            }
        }
        Ok(CovarianceState {
            basis: self.basis,
            matrix: m,
            n_modes: 2,
        })
    }

    /// Symplectic eigenvalues of this state, one per mode, ascending.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues_real(&self.to_real_matrix())
    }
}

/// Symplectic eigenvalues of a Hermitian matrix given in the complex basis:
/// the absolute values of the eigenvalues of `iΩM`, which come in ± pairs;
/// pairs are collapsed to one entry per mode, sorted ascending.
pub fn symplectic_eigenvalues(m: &DMatrix<C64>, basis: ModeBasis) -> Result<Vec<f64>> {
    let real = match basis {
        ModeBasis::Real => m.map(|z| z.re),
        ModeBasis::Complex => {
            let n = m.nrows() / 2;
            let u = basis_change_matrix(n);
            (u.adjoint() * m * u).map(|z| z.re)
        }
    };
    symplectic_eigenvalues_real(&real)
}

/// Same as [`symplectic_eigenvalues`] for a real symmetric matrix in the
/// real basis.
pub fn symplectic_eigenvalues_real(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows() / 2;
    if m.nrows() != m.ncols() || n == 0 {
        return Err(Error::Structure("matrix must be square 2n x 2n".into()));
    }
    let om = symplectic_form_real(n);
    let prod = om * m;
    let eigs = prod.complex_eigenvalues();
    pair_moduli(eigs.as_slice(), m)
}

/// Collapses the 2n eigenvalue moduli of `iΩM` into n per-mode values,
/// verifying that they really do come in close pairs.
fn pair_moduli(eigs: &[C64], m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut mods: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let global = mods.last().copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(mods.len() / 2);
    for pair in mods.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        let tol = PAIRING_REL_TOL * f64::max(b, 1e-2 * global) + 1e-14;
        if (b - a).abs() > tol {
            let cond = condition_estimate(m);
            return Err(Error::Numerical(format!(
                "eigenvalues of iΩM failed to pair: |{a:.12e}| vs |{b:.12e}| \
                 (matrix condition estimate {cond:.3e})"
            )));
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Matrix exponential `exp(Ω H t)` of a quadratic form, computed by a
/// general-purpose scaling-and-squaring method. This is the generic oracle
/// against which the closed-form propagator is validated.
///
/// `h` is the quadratic form in the complex basis; the result is the
/// propagator in the complex basis.
pub fn numeric_propagator(h: &DMatrix<C64>, t: f64) -> Result<DMatrix<C64>> {
    let (r, c) = h.shape();
    if r != c || r % 2 != 0 {
        return Err(Error::Structure(format!(
            "quadratic form must be square with even dimension, got {r}x{c}"
        )));
    }
    let n = r / 2;
    let u = basis_change_matrix(n);
    let h_real = (u.adjoint() * h * &u).map(|z| z.re);
    let gen = symplectic_form_real(n) * h_real * t;
    let s_real = gen.exp();
    if s_real.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "matrix exponential overflowed for t = {t} (generator norm {:.3e})",
            gen.norm()
        )));
    }
    let s_real_c = s_real.map(|x| C64::new(x, 0.0));
    Ok(&u * s_real_c * u.adjoint())
}

/// Max-norm deviation of `S Ω S† - Ω`; zero for exactly symplectic `S`.
pub fn symplecticity_residual(s: &DMatrix<C64>, basis: ModeBasis) -> f64 {
    let n = s.nrows() / 2;
    let om = symplectic_form(n, basis);
    let dev = s * &om * s.adjoint() - &om;
    dev.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Returns a DVector copy of the eigenvalue moduli of `iΩM` without pair
/// collapsing, mainly for diagnostics.
pub fn raw_symplectic_moduli(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() / 2;
    let prod = symplectic_form_real(n) * m;
    let eigs = prod.complex_eigenvalues();
    DVector::from_iterator(2 * n, eigs.iter().map(|z| z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&raw + raw.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        for basis in [ModeBasis::Complex, ModeBasis::Real] {
            let om = symplectic_form(3, basis);
            let sq = &om * &om;
            let dev = (&sq + DMatrix::<C64>::identity(6, 6))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-15, "{basis:?}: {dev}");
        }
        // real-basis form is antisymmetric
        let om = symplectic_form_real(3);
        assert!((om.transpose() + &om).norm() < 1e-15);
    }

    #[test]
    fn vacuum_is_basis_invariant() {
        let vac = CovarianceState::vacuum(3, ModeBasis::Real);
        let c = vac.basis_change(ModeBasis::Complex);
        let dev = (c.matrix() - DMatrix::<C64>::identity(6, 6))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-14);
    }

    #[test]
    fn single_mode_squeezed_basis_change_matches_direct_product() {
        // real-basis diag(e^{-2r}, e^{2r}) -> complex [[cosh2r, -sinh2r], [-sinh2r, cosh2r]]
        let r: f64 = 0.37;
        let real = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new((-2.0 * r).exp(), 0.0),
            C64::new((2.0 * r).exp(), 0.0),
        ]));
        let st = CovarianceState::new(ModeBasis::Real, real).unwrap();
        let c = st.basis_change(ModeBasis::Complex);
        let ch = (2.0 * r).cosh();
        let sh = (2.0 * r).sinh();
        assert_abs_diff_eq!(c.matrix()[(0, 0)].re, ch, epsilon = 1e-12);
        assert_abs_diff_eq!(c.matrix()[(0, 1)].re, -sh, epsilon = 1e-12);
        assert_abs_diff_eq!(c.matrix()[(1, 0)].re, -sh, epsilon = 1e-12);
        assert_abs_diff_eq!(c.matrix()[(1, 1)].re, ch, epsilon = 1e-12);
        assert!(c.matrix().iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn basis_round_trip_is_identity() {
        let m = random_hermitian(6, 42);
        let st = CovarianceState::new(ModeBasis::Complex, m.clone()).unwrap();
        let back = st.basis_change(ModeBasis::Real).basis_change(ModeBasis::Complex);
        let dev = (back.matrix() - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12, "round-trip residual {dev}");
    }

    #[test]
    fn partial_trace_of_block_diagonal_product_state() {
        // product state sigma_A ⊕ sigma_B ⊕ sigma_C in the complex basis
        let (da, db, dc) = (1.7, 2.9, 1.1);
        let mut m = DMatrix::<C64>::zeros(6, 6);
        for (i, d) in [(0usize, da), (1, db), (2, dc)] {
            m[(i, i)] = C64::new(d, 0.0);
            m[(i + 3, i + 3)] = C64::new(d, 0.0);
        }
        let st = CovarianceState::new(ModeBasis::Complex, m).unwrap();
        let red = st.partial_trace_to_terminal().unwrap();
        let expect = [da, dc, da, dc];
        for i in 0..4 {
            assert_abs_diff_eq!(red.matrix()[(i, i)].re, expect[i], epsilon = 1e-15);
        }
        // vacuum reduces to vacuum
        let vac = CovarianceState::vacuum(3, ModeBasis::Complex);
        let rv = vac.partial_trace_to_terminal().unwrap();
        assert!((rv.matrix() - DMatrix::<C64>::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_symplectic_spectrum_is_ones() {
        let vac = CovarianceState::vacuum(3, ModeBasis::Complex);
        let nus = vac.symplectic_eigenvalues().unwrap();
        assert_eq!(nus.len(), 3);
        for nu in nus {
            assert_abs_diff_eq!(nu, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_transpose_of_tmsv_gives_exponential_pair() {
        // two-mode squeezed vacuum in the real basis (x1, x2, p1, p2)
        let r: f64 = 0.5;
        let c2 = (2.0 * r).cosh();
        let s2 = (2.0 * r).sinh();
        let mut m = DMatrix::<C64>::identity(4, 4) * C64::new(c2, 0.0);
        m[(0, 1)] = C64::new(s2, 0.0);
        m[(1, 0)] = C64::new(s2, 0.0);
        m[(2, 3)] = C64::new(-s2, 0.0);
        m[(3, 2)] = C64::new(-s2, 0.0);
        let st = CovarianceState::new(ModeBasis::Real, m).unwrap();
        // state itself is pure
        let nus = st.symplectic_eigenvalues().unwrap();
        for nu in &nus {
            assert_abs_diff_eq!(*nu, 1.0, epsilon = 1e-10);
        }
        let pt = st.partial_transpose_second().unwrap();
        let pts = pt.symplectic_eigenvalues().unwrap();
        assert_abs_diff_eq!(pts[0], (-2.0 * r).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(pts[1], (2.0 * r).exp(), epsilon = 1e-10);
        // complex-basis route agrees
        let ptc = st
            .basis_change(ModeBasis::Complex)
            .partial_transpose_second()
            .unwrap();
        let ptsc = ptc.symplectic_eigenvalues().unwrap();
        assert_abs_diff_eq!(pts[0], ptsc[0], epsilon = 1e-10);
        assert_abs_diff_eq!(pts[1], ptsc[1], epsilon = 1e-10);
    }

    #[test]
    fn numeric_propagator_at_zero_is_identity() {
        let h = random_hermitian(6, 7);
        let s = numeric_propagator(&((&h + h.adjoint()) * C64::new(0.5, 0.0)), 0.0).unwrap();
        assert!((s - DMatrix::<C64>::identity(6, 6)).norm() < 1e-14);
    }

    #[test]
    fn free_evolution_gives_counter_rotating_phases() {
        // decoupled oscillators: U = diag(w), V = 0
        let (wa, wb) = (1.3, 2.1);
        let mut h = DMatrix::<C64>::zeros(6, 6);
        for (i, w) in [(0usize, wa), (1, wb), (2, wa)] {
            h[(i, i)] = C64::new(w, 0.0);
            h[(i + 3, i + 3)] = C64::new(w, 0.0);
        }
        let t = 0.83;
        let s = numeric_propagator(&h, t).unwrap();
        for (i, w) in [(0usize, wa), (1, wb), (2, wa)] {
            let expect = C64::new(0.0, -w * t).exp();
            assert!((s[(i, i)] - expect).norm() < 1e-12);
            assert!((s[(i + 3, i + 3)] - expect.conj()).norm() < 1e-12);
        }
        assert!(symplecticity_residual(&s, ModeBasis::Complex) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_and_odd_dimensions() {
        let mut m = DMatrix::<C64>::identity(4, 4);
        m[(0, 1)] = C64::new(0.5, 0.0); // asymmetric
        assert!(CovarianceState::new(ModeBasis::Real, m).is_err());
        let odd = DMatrix::<C64>::identity(3, 3);
        assert!(CovarianceState::new(ModeBasis::Real, odd).is_err());
        let two_mode = CovarianceState::vacuum(2, ModeBasis::Real);
        assert!(two_mode.partial_trace_to_terminal().is_err());
    }
}
