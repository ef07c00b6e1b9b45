//! Square space-time block codes and their dispersion-matrix form.
//!
//! Five generators are provided:
//!
//! * [`build_ostbc4`]: rate-3/4 orthogonal code for four antennas.
//! * [`build_qostbc4`]: rate-1 quasi-orthogonal (ABBA) code for four antennas.
//! * [`build_half_rate4`]: rate-1/2 orthogonal code for four antennas,
//!   two Alamouti blocks on the diagonal.
//! * [`build_ostbc8`]: rate-1/2 orthogonal code for eight antennas, an
//!   Alamouti-style doubling of the rate-3/4 four-antenna code with the fourth
//!   symbol on the off-diagonal blocks.
//! * [`build_qostbc8`]: rate-3/4 quasi-orthogonal code for eight antennas,
//!   `[[A, B], [B, A]]` over two rate-3/4 orthogonal blocks.
//!
//! Every generator is real-linear in the symbol components, so each code is
//! fully described by its dispersion matrices (see [`LinearDispersion`]).

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DstmError, Result};
use crate::matrix::ComplexMatrix;
use crate::scalar::Real;

/// Which generator a codebook is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StbcKind {
    Ostbc4,
    Qostbc4,
    HalfRate4,
    Ostbc8,
    Qostbc8,
}

impl StbcKind {
    pub fn n_tx(self) -> usize {
        match self {
            StbcKind::Ostbc4 | StbcKind::Qostbc4 | StbcKind::HalfRate4 => 4,
            StbcKind::Ostbc8 | StbcKind::Qostbc8 => 8,
        }
    }

    pub fn n_sym(self) -> usize {
        match self {
            StbcKind::Ostbc4 => 3,
            StbcKind::HalfRate4 => 2,
            StbcKind::Qostbc4 | StbcKind::Ostbc8 => 4,
            StbcKind::Qostbc8 => 6,
        }
    }

    /// True for codes whose Gram matrix is `(Σ|c|²)·I` for every symbol vector.
    pub fn is_orthogonal(self) -> bool {
        !matches!(self, StbcKind::Qostbc4 | StbcKind::Qostbc8)
    }

    pub fn build<T: Real>(self, c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
        match self {
            StbcKind::Ostbc4 => build_ostbc4(c),
            StbcKind::Qostbc4 => build_qostbc4(c),
            StbcKind::HalfRate4 => build_half_rate4(c),
            StbcKind::Ostbc8 => build_ostbc8(c),
            StbcKind::Qostbc8 => build_qostbc8(c),
        }
    }

    pub fn dispersion<T: Real>(self) -> Result<LinearDispersion<T>> {
        extract_dispersion(|c| self.build(c), self.n_sym(), self.n_tx())
    }

    pub fn name(self) -> &'static str {
        match self {
            StbcKind::Ostbc4 => "rate-3/4 O-STBC (4 tx)",
            StbcKind::Qostbc4 => "rate-1 QO-STBC (4 tx)",
            StbcKind::HalfRate4 => "rate-1/2 O-STBC (4 tx)",
            StbcKind::Ostbc8 => "rate-1/2 O-STBC (8 tx)",
            StbcKind::Qostbc8 => "rate-3/4 QO-STBC (8 tx)",
        }
    }
}

fn check_arity<T: Real>(c: &[Complex<T>], expected: usize) -> Result<()> {
    if c.len() != expected {
        return Err(DstmError::Arity { expected, got: c.len() });
    }
    if !c.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(DstmError::NonFinite("symbol vector"));
    }
    Ok(())
}

fn square<T: Real>(rows: [[Complex<T>; 4]; 4]) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(4, 4, |i, j| rows[i][j])
}

fn ostbc4_block<T: Real>(c1: Complex<T>, c2: Complex<T>, c3: Complex<T>) -> ComplexMatrix<T> {
    let z = Complex::zero();
    square([
        [c1, z, c2, -c3],
        [z, c1, c3.conj(), c2.conj()],
        [-c2.conj(), -c3, c1.conj(), z],
        [c3.conj(), -c2, z, c1.conj()],
    ])
}

/// Rate-3/4 orthogonal code; `C·Cᴴ = (|c₁|²+|c₂|²+|c₃|²)·I₄`.
pub fn build_ostbc4<T: Real>(c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
    check_arity(c, 3)?;
    Ok(ostbc4_block(c[0], c[1], c[2]))
}

/// Rate-1 quasi-orthogonal code. Its Gram matrix is `α·I` plus `β` on the
/// anti-diagonal pattern `(1,4), (4,1), −(2,3), −(3,2)`; see [`gram_params_qo4`].
pub fn build_qostbc4<T: Real>(c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
    check_arity(c, 4)?;
    let [c1, c2, c3, c4] = [c[0], c[1], c[2], c[3]];
    Ok(square([
        [c1, -c2.conj(), -c3.conj(), c4],
        [c2, c1.conj(), -c4.conj(), -c3],
        [c3, -c4.conj(), c1.conj(), -c2],
        [c4, c3.conj(), c2.conj(), c1],
    ]))
}

/// Rate-1/2 four-antenna code: `diag(G(c₁,c₂), G(c₁,c₂))` with the Alamouti
/// block `G = [[c₁, c₂], [−c₂*, c₁*]]`.
pub fn build_half_rate4<T: Real>(c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
    check_arity(c, 2)?;
    let (c1, c2) = (c[0], c[1]);
    let alamouti = [[c1, c2], [-c2.conj(), c1.conj()]];
    Ok(ComplexMatrix::from_fn(4, 4, |i, j| {
        if i / 2 == j / 2 {
            alamouti[i % 2][j % 2]
        } else {
            Complex::zero()
        }
    }))
}

/// Rate-1/2 eight-antenna code `[[A, c₄·I], [−c₄*·I, Aᴴ]]` with
/// `A = O4(c₁,c₂,c₃)`; `C·Cᴴ = (Σ|cᵢ|²)·I₈`.
pub fn build_ostbc8<T: Real>(c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
    check_arity(c, 4)?;
    let a = ostbc4_block(c[0], c[1], c[2]);
    let ah = a.adjoint();
    let c4 = c[3];
    Ok(ComplexMatrix::from_fn(8, 8, |i, j| match (i / 4, j / 4) {
        (0, 0) => a[(i, j)],
        (1, 1) => ah[(i - 4, j - 4)],
        (0, 1) if i == j - 4 => c4,
        (1, 0) if i - 4 == j => -c4.conj(),
        _ => Complex::zero(),
    }))
}

/// Rate-3/4 eight-antenna quasi-orthogonal code `[[A, B], [B, A]]` with
/// `A = O4(c₁,c₂,c₃)` and `B = O4(c₄,c₅,c₆)`. Decodable in the pairs
/// `(c₁,c₄), (c₂,c₅), (c₃,c₆)`.
pub fn build_qostbc8<T: Real>(c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
    check_arity(c, 6)?;
    let a = ostbc4_block(c[0], c[1], c[2]);
    let b = ostbc4_block(c[3], c[4], c[5]);
    Ok(ComplexMatrix::from_fn(8, 8, |i, j| {
        if (i / 4) == (j / 4) {
            a[(i % 4, j % 4)]
        } else {
            b[(i % 4, j % 4)]
        }
    }))
}

/// `(α, β)` of the quasi-orthogonal Gram matrix:
/// `α = Σ|cᵢ|²`, `β = 2·Re(c₁c₄* − c₂c₃*)`.
pub fn gram_params_qo4<T: Real>(c: &[Complex<T>]) -> Result<(T, T)> {
    check_arity(c, 4)?;
    let alpha = c.iter().map(|z| z.norm_sqr()).sum();
    let beta = T::lit(2.0) * (c[0] * c[3].conj() - c[1] * c[2].conj()).re;
    Ok((alpha, beta))
}

/// A linear code as `codeword(c) = Σₖ (cₖᴿ·Aₖ + cₖᴵ·j·Bₖ)`.
#[derive(Clone, Debug)]
pub struct LinearDispersion<T> {
    n_tx: usize,
    n_sym: usize,
    a: Vec<ComplexMatrix<T>>,
    b: Vec<ComplexMatrix<T>>,
}

impl<T: Real> LinearDispersion<T> {
    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_sym(&self) -> usize {
        self.n_sym
    }

    /// Real-part dispersion matrix `Aₖ`.
    pub fn a(&self, k: usize) -> &ComplexMatrix<T> {
        &self.a[k]
    }

    /// Imaginary-part dispersion matrix `Bₖ` (the codeword carries `j·Bₖ`).
    pub fn b(&self, k: usize) -> &ComplexMatrix<T> {
        &self.b[k]
    }

    /// Number of real slots, `2·n_sym`. Slot `2k` is `Re cₖ`, slot `2k+1` is `Im cₖ`.
    pub fn n_slots(&self) -> usize {
        2 * self.n_sym
    }

    /// The matrix multiplying real slot `s`: `A_{s/2}` or `j·B_{s/2}`.
    pub fn slot_matrix(&self, s: usize) -> ComplexMatrix<T> {
        let k = s / 2;
        if s.is_multiple_of(2) {
            self.a[k].clone()
        } else {
            self.b[k].scale(Complex::new(T::zero(), T::one()))
        }
    }

    pub fn codeword(&self, c: &[Complex<T>]) -> Result<ComplexMatrix<T>> {
        check_arity(c, self.n_sym)?;
        let mut out = ComplexMatrix::zeros(self.n_tx, self.n_tx);
        let j = Complex::new(T::zero(), T::one());
        for (k, z) in c.iter().enumerate() {
            out.add_scaled(&self.a[k], z.re);
            out.add_scaled(&self.b[k].scale(j), z.im);
        }
        Ok(out)
    }
}

/// Recovers the dispersion matrices of a linear generator by probing it with
/// unit real and unit imaginary symbols, then checks the reconstruction at
/// random symbol vectors.
pub fn extract_dispersion<T, F>(builder: F, n_sym: usize, n_tx: usize) -> Result<LinearDispersion<T>>
where
    T: Real,
    F: Fn(&[Complex<T>]) -> Result<ComplexMatrix<T>>,
{
    let minus_j = Complex::new(T::zero(), -T::one());
    let mut a = Vec::with_capacity(n_sym);
    let mut b = Vec::with_capacity(n_sym);
    for k in 0..n_sym {
        let mut probe = vec![Complex::zero(); n_sym];
        probe[k] = Complex::new(T::one(), T::zero());
        let ak = builder(&probe)?;
        probe[k] = Complex::new(T::zero(), T::one());
        let jbk = builder(&probe)?;
        if ak.rows() != n_tx || ak.cols() != n_tx {
            return Err(DstmError::Dimension(format!(
                "builder produced {}x{}, expected {n_tx}x{n_tx}",
                ak.rows(),
                ak.cols()
            )));
        }
        a.push(ak);
        b.push(jbk.scale(minus_j));
    }
    let disp = LinearDispersion { n_tx, n_sym, a, b };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d15e);
    for _ in 0..2 {
        let c: Vec<Complex<T>> = (0..n_sym)
            .map(|_| Complex::new(T::lit(rng.random_range(-1.0..1.0)), T::lit(rng.random_range(-1.0..1.0))))
            .collect();
        let residual = (&builder(&c)? - &disp.codeword(&c)?).max_abs().as_f64();
        if residual > 1e-9_f64.max(T::UNITARY_TOL) {
            return Err(DstmError::NonLinear { residual });
        }
    }
    Ok(disp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type C = Complex<f64>;
    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn real_matrix(rows: &[[f64; 4]; 4]) -> M {
        M::from_fn(4, 4, |i, j| c(rows[i][j], 0.0))
    }

    fn arb_symbols(n: usize) -> impl Strategy<Value = Vec<C>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    fn energy(s: &[C]) -> f64 {
        s.iter().map(|z| z.norm_sqr()).sum()
    }

    fn assert_close(a: &M, b: &M, tol: f64) {
        let d = (a - b).max_abs();
        assert!(d <= tol, "matrices differ by {d}: {a:?} vs {b:?}");
    }

    #[test]
    fn ostbc4_reads_off_generator() {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        assert_eq!(build_ostbc4(&[one, z, z]).unwrap(), M::identity(4));
        let expected = real_matrix(&[
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
        ]);
        assert_eq!(build_ostbc4(&[z, one, z]).unwrap(), expected);
    }

    #[test]
    fn arity_is_checked() {
        let z = c(0.0, 0.0);
        assert!(matches!(build_ostbc4(&[z; 4]), Err(DstmError::Arity { expected: 3, got: 4 })));
        assert!(matches!(build_qostbc4(&[z; 3]), Err(DstmError::Arity { .. })));
        assert!(matches!(build_ostbc8(&[z; 6]), Err(DstmError::Arity { .. })));
        assert!(matches!(build_qostbc8(&[z; 4]), Err(DstmError::Arity { .. })));
    }

    #[test]
    fn qostbc4_examples() {
        let z = c(0.0, 0.0);
        assert_eq!(build_qostbc4(&[c(1.0, 0.0), z, z, z]).unwrap(), M::identity(4));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = [c(h, 0.0), z, z, c(h, 0.0)];
        let (alpha, beta) = gram_params_qo4(&s).unwrap();
        assert!((alpha - 1.0).abs() < 1e-15 && (beta - 1.0).abs() < 1e-15);
        let g = build_qostbc4(&s).unwrap().gram();
        assert!((g[(0, 3)].re - 1.0).abs() < 1e-15);
        assert!((g[(1, 2)].re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_params_examples() {
        let z = c(0.0, 0.0);
        assert_eq!(gram_params_qo4(&[c(1.0, 0.0), z, z, z]).unwrap(), (1.0, 0.0));
        // (c1, c4) = (j/√2, 0), (c2, c3) = (0, e^{jπ/4}/√2)
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rot = Complex::from_polar(h, std::f64::consts::FRAC_PI_4);
        let (alpha, beta) = gram_params_qo4(&[c(0.0, h), z, rot, z]).unwrap();
        assert!((alpha - 1.0).abs() < 1e-15);
        assert_eq!(beta, 0.0);
    }

    #[test]
    fn ostbc8_unit_symbol_is_unitary() {
        let z = c(0.0, 0.0);
        let u = build_ostbc8(&[c(1.0, 0.0), z, z, z]).unwrap();
        assert!(u.unitarity_defect().unwrap() <= 1e-12);
    }

    #[test]
    fn ostbc8_single_symbol_distance_determinant() {
        let z = c(0.0, 0.0);
        let delta = c(0.3, -0.7);
        let d = build_ostbc8(&[delta, z, z, z]).unwrap();
        let det = d.gram().determinant().unwrap();
        let closed = delta.norm_sqr().powi(8);
        assert!((det.re - closed).abs() <= 1e-12 * closed.max(1e-30));
        assert!(det.im.abs() < 1e-15);
    }

    #[test]
    fn qostbc8_single_symbol_gram() {
        let z = c(0.0, 0.0);
        let g = build_qostbc8(&[c(1.0, 0.0), z, z, z, z, z]).unwrap().gram();
        assert_close(&g, &M::identity(8), 1e-15);
    }

    #[test]
    fn dispersion_first_matrices_are_identity() {
        let o4 = StbcKind::Ostbc4.dispersion::<f64>().unwrap();
        assert_eq!(o4.a(0), &M::identity(4));
        let q4 = StbcKind::Qostbc4.dispersion::<f64>().unwrap();
        assert_eq!(q4.a(0), &M::identity(4));
    }

    #[test]
    fn nonlinear_builder_is_rejected() {
        let r = extract_dispersion(
            |c: &[C]| Ok(M::scalar(2, c[0] * c[0] + c[1])),
            2,
            2,
        );
        assert!(matches!(r, Err(DstmError::NonLinear { .. })));
        let affine = extract_dispersion(|x: &[C]| Ok(M::scalar(2, x[0] + c(1.0, 0.0))), 1, 2);
        assert!(matches!(affine, Err(DstmError::NonLinear { .. })));
    }

    #[test]
    fn single_precision_builders() {
        let s = [Complex::<f32>::new(0.6, 0.0), Complex::new(0.0, 0.8), Complex::new(0.0, 0.0)];
        let u = build_ostbc4(&s).unwrap();
        assert!(u.unitarity_defect().unwrap() < 1e-6);
    }

    proptest! {
        #[test]
        fn ostbc4_gram_is_scaled_identity(s in arb_symbols(3)) {
            let g = build_ostbc4(&s).unwrap().gram();
            assert_close(&g, &M::scalar(4, c(energy(&s), 0.0)), 1e-12);
            let u = build_ostbc4(&s).unwrap();
            prop_assume!(energy(&s) > 1e-3);
            let normalised = u.scale_real(1.0 / energy(&s).sqrt());
            prop_assert!(normalised.unitarity_defect().unwrap() <= 1e-12);
        }

        #[test]
        fn qostbc4_gram_pattern(s in arb_symbols(4)) {
            let g = build_qostbc4(&s).unwrap().gram();
            let (alpha, beta) = gram_params_qo4(&s).unwrap();
            let mut expected = M::scalar(4, c(alpha, 0.0));
            expected[(0, 3)] = c(beta, 0.0);
            expected[(3, 0)] = c(beta, 0.0);
            expected[(1, 2)] = c(-beta, 0.0);
            expected[(2, 1)] = c(-beta, 0.0);
            assert_close(&g, &expected, 1e-12);
        }

        #[test]
        fn half_rate4_gram_is_scaled_identity(s in arb_symbols(2)) {
            let g = build_half_rate4(&s).unwrap().gram();
            assert_close(&g, &M::scalar(4, c(energy(&s), 0.0)), 1e-12);
        }

        #[test]
        fn ostbc8_gram_is_scaled_identity(s in arb_symbols(4)) {
            let g = build_ostbc8(&s).unwrap().gram();
            assert_close(&g, &M::scalar(8, c(energy(&s), 0.0)), 1e-12);
        }

        #[test]
        fn ostbc8_distance_determinant(x in arb_symbols(4), y in arb_symbols(4)) {
            let d = &build_ostbc8(&x).unwrap() - &build_ostbc8(&y).unwrap();
            let delta: Vec<C> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let closed = energy(&delta).powi(8);
            let det = d.gram().determinant().unwrap().re;
            prop_assert!((det - closed).abs() <= 1e-9 * closed.max(1e-12));
        }

        #[test]
        fn qostbc8_gram_pattern(s in arb_symbols(6)) {
            let g = build_qostbc8(&s).unwrap().gram();
            let alpha = energy(&s);
            let beta: f64 = 2.0 * (0..3).map(|i| (s[i] * s[i + 3].conj()).re).sum::<f64>();
            let expected = M::from_fn(8, 8, |i, j| {
                if i == j { c(alpha, 0.0) } else if i % 4 == j % 4 { c(beta, 0.0) } else { c(0.0, 0.0) }
            });
            assert_close(&g, &expected, 1e-12);
        }

        #[test]
        fn qostbc8_single_pair_distance_determinant(
            da in (-1.0..1.0f64, -1.0..1.0f64),
            db in (-1.0..1.0f64, -1.0..1.0f64),
            slot in 0usize..3,
        ) {
            let (da, db) = (c(da.0, da.1), c(db.0, db.1));
            let mut s = vec![c(0.0, 0.0); 6];
            s[slot] = da;
            s[slot + 3] = db;
            let det = build_qostbc8(&s).unwrap().gram().determinant().unwrap().re;
            let closed = ((da + db).norm_sqr() * (da - db).norm_sqr()).powi(4);
            prop_assert!((det - closed).abs() <= 1e-9 * closed.max(1e-12));
        }

        #[test]
        fn dispersion_reconstructs_every_code(s in arb_symbols(6)) {
            for kind in [StbcKind::Ostbc4, StbcKind::Qostbc4, StbcKind::HalfRate4, StbcKind::Ostbc8, StbcKind::Qostbc8] {
                let disp = kind.dispersion::<f64>().unwrap();
                let sym = &s[..kind.n_sym()];
                assert_close(&disp.codeword(sym).unwrap(), &kind.build(sym).unwrap(), 1e-12);
                let via_slots = (0..disp.n_slots()).fold(M::zeros(kind.n_tx(), kind.n_tx()), |mut acc, slot| {
                    let z = sym[slot / 2];
                    acc.add_scaled(&disp.slot_matrix(slot), if slot % 2 == 0 { z.re } else { z.im });
                    acc
                });
                assert_close(&via_slots, &kind.build(sym).unwrap(), 1e-12);
            }
        }
    }
}
