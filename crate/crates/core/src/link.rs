//! Differential encoding and non-coherent decoding.
//!
//! The encoder chains `C_t = C_{t−1}·U_t` from a known unitary `C₀`. Both
//! decoders maximize `Re tr(R_tᴴ R_{t−1} U)` over the codebook: the full
//! decoder scores every codeword, the groupwise decoder exploits linearity of
//! the metric in the symbol slots and searches each decoding group on its own.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{DstmError, Result};
use crate::matrix::ComplexMatrix;
use crate::scalar::Real;

/// Blocks between unitarity checks of the encoder state.
pub const RENORM_PERIOD: usize = 512;
/// Defect above which the encoder state is re-unitarized at a check.
pub const RENORM_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderChoice {
    #[default]
    Groupwise,
    FullMl,
}

/// Running state of the differential encoder.
#[derive(Clone, Debug)]
pub struct DifferentialEncoder<'a, T> {
    cb: &'a Codebook<T>,
    state: ComplexMatrix<T>,
    count: usize,
}

impl<'a, T: Real> DifferentialEncoder<'a, T> {
    pub fn new(cb: &'a Codebook<T>, c0: ComplexMatrix<T>) -> Result<Self> {
        if c0.rows() != cb.n_tx() || c0.cols() != cb.n_tx() {
            return Err(DstmError::Dimension(format!(
                "reference codeword is {}x{}, codebook needs {}x{}",
                c0.rows(),
                c0.cols(),
                cb.n_tx(),
                cb.n_tx()
            )));
        }
        let defect = c0.unitarity_defect()?;
        if !(defect.as_f64() <= T::UNITARY_TOL) {
            return Err(DstmError::NotUnitary {
                label: usize::MAX,
                defect: defect.as_f64(),
            });
        }
        Ok(Self { cb, state: c0, count: 0 })
    }

    /// Encodes one label and returns the new transmitted codeword.
    pub fn push(&mut self, label: usize) -> Result<&ComplexMatrix<T>> {
        let u = self.cb.matrix(label)?;
        self.state = &self.state * u;
        self.count += 1;
        if self.count.is_multiple_of(RENORM_PERIOD) {
            let threshold = T::lit(RENORM_THRESHOLD).max(T::epsilon() * T::lit(16.0));
            if self.state.unitarity_defect()? > threshold {
                self.state.reunitarize()?;
            }
        }
        Ok(&self.state)
    }

    pub fn state(&self) -> &ComplexMatrix<T> {
        &self.state
    }
}

/// `C_t = C_{t−1}·U(label_t)` for every label, starting from `c0`.
pub fn differential_encode<T: Real>(
    labels: &[usize],
    cb: &Codebook<T>,
    c0: &ComplexMatrix<T>,
) -> Result<Vec<ComplexMatrix<T>>> {
    let mut enc = DifferentialEncoder::new(cb, c0.clone())?;
    labels.iter().map(|&l| enc.push(l).cloned()).collect()
}

/// `R_tᴴ · R_{t−1}`, the only receiver statistic the metric needs.
pub fn correlation<T: Real>(r_t: &ComplexMatrix<T>, r_prev: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if r_t.rows() != r_prev.rows() || r_t.cols() != r_prev.cols() {
        return Err(DstmError::Dimension(format!(
            "received blocks are {}x{} and {}x{}",
            r_t.rows(),
            r_t.cols(),
            r_prev.rows(),
            r_prev.cols()
        )));
    }
    r_t.adjoint().matmul(r_prev)
}

/// `Re tr(R_tᴴ · R_{t−1} · U)`.
pub fn trace_metric<T: Real>(r_t: &ComplexMatrix<T>, r_prev: &ComplexMatrix<T>, u: &ComplexMatrix<T>) -> Result<T> {
    correlation(r_t, r_prev)?.re_trace_product(u)
}

fn check_shape<T: Real>(g: &ComplexMatrix<T>, cb: &Codebook<T>) -> Result<()> {
    if g.rows() != cb.n_tx() {
        return Err(DstmError::Dimension(format!(
            "received blocks have {} columns, codebook has {} antennas",
            g.rows(),
            cb.n_tx()
        )));
    }
    Ok(())
}

/// Exhaustive search; ties go to the smallest label.
pub fn full_ml_decode<T: Real>(r_t: &ComplexMatrix<T>, r_prev: &ComplexMatrix<T>, cb: &Codebook<T>) -> Result<usize> {
    let g = correlation(r_t, r_prev)?;
    check_shape(&g, cb)?;
    Ok(full_ml_from_correlation(&g, cb))
}

pub(crate) fn full_ml_from_correlation<T: Real>(g: &ComplexMatrix<T>, cb: &Codebook<T>) -> usize {
    let mut best = 0;
    let mut best_metric = T::neg_infinity();
    for (label, u) in cb.matrices().iter().enumerate() {
        let metric = g.re_trace_product(u).expect("shape checked by caller");
        if metric > best_metric {
            best_metric = metric;
            best = label;
        }
    }
    best
}

/// Independent per-group search over slot correlations.
pub fn groupwise_decode<T: Real>(r_t: &ComplexMatrix<T>, r_prev: &ComplexMatrix<T>, cb: &Codebook<T>) -> Result<usize> {
    groupwise_decode_counted(r_t, r_prev, cb).map(|(label, _)| label)
}

/// As [`groupwise_decode`], also returning how many constellation points were scored.
pub fn groupwise_decode_counted<T: Real>(
    r_t: &ComplexMatrix<T>,
    r_prev: &ComplexMatrix<T>,
    cb: &Codebook<T>,
) -> Result<(usize, usize)> {
    let g = correlation(r_t, r_prev)?;
    check_shape(&g, cb)?;
    Ok(groupwise_from_correlation(&g, cb))
}

pub(crate) fn groupwise_from_correlation<T: Real>(g: &ComplexMatrix<T>, cb: &Codebook<T>) -> (usize, usize) {
    // Re tr(G·D) = Σ Re(G_ji · D_ij) over the nonzeros of D
    let corr: Vec<T> = cb
        .slot_terms()
        .iter()
        .map(|terms| {
            terms.iter().fold(T::zero(), |acc, &(i, j, v)| {
                let z = g[(j, i)];
                acc + z.re * v.re - z.im * v.im
            })
        })
        .collect();
    let mut label = 0;
    let mut evaluated = 0;
    for group in cb.groups() {
        let mut best = 0;
        let mut best_metric = T::neg_infinity();
        for (p, point) in group.constellation().points().iter().enumerate() {
            let metric = group
                .slots()
                .iter()
                .zip(point)
                .fold(T::zero(), |acc, (&s, &x)| acc + corr[s] * x);
            evaluated += 1;
            if metric > best_metric {
                best_metric = metric;
                best = p;
            }
        }
        label = label * group.size() + best;
    }
    (label, evaluated)
}

pub(crate) fn decode_from_correlation<T: Real>(g: &ComplexMatrix<T>, cb: &Codebook<T>, choice: DecoderChoice) -> usize {
    match choice {
        DecoderChoice::Groupwise => groupwise_from_correlation(g, cb).0,
        DecoderChoice::FullMl => full_ml_from_correlation(g, cb),
    }
}

/// `true` if every entry of a received block is zero.
pub fn is_silent<T: Real>(r: &ComplexMatrix<T>) -> bool {
    r.as_slice().iter().all(|z| z.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh, transmit, NoiseParams};
    use crate::codebook::{assemble, DecodingGroup};
    use crate::constellation::{qo_pairwise, theorem1_theta};
    use crate::stbc::StbcKind;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M = ComplexMatrix<f64>;

    fn qo4(m: usize) -> Codebook<f64> {
        let set = qo_pairwise::<f64>(m, theorem1_theta(m), 2).unwrap().to_joint().unwrap();
        let groups = vec![
            DecodingGroup::new(vec![0, 1, 6, 7], set.clone()).unwrap(),
            DecodingGroup::new(vec![2, 3, 4, 5], set).unwrap(),
        ];
        assemble(StbcKind::Qostbc4.dispersion().unwrap(), groups).unwrap()
    }

    /// Arg-min residual form of the decision rule, used only as an oracle.
    fn residual_decode(r_t: &M, r_prev: &M, cb: &Codebook<f64>) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (label, u) in cb.matrices().iter().enumerate() {
            let e = (r_t - &(r_prev * u)).frobenius_norm_sqr();
            if e < best.0 {
                best = (e, label);
            }
        }
        best.1
    }

    fn row(v: &[f64]) -> M {
        M::from_fn(1, v.len(), |_, j| Complex::new(v[j], 0.0))
    }

    #[test]
    fn encoder_examples() {
        let cb = qo4(4);
        let identity_label = (0..cb.len())
            .find(|&l| (&cb.matrices()[l] - &M::identity(4)).max_abs() < 1e-12);
        // label of U = I, if the codebook has one; otherwise use label 0
        let k = identity_label.unwrap_or(0);
        let out = differential_encode(&[k], &cb, &M::identity(4)).unwrap();
        assert_eq!(out.len(), 1);
        assert!((&out[0] - &cb.matrices()[k]).max_abs() < 1e-15);

        let out = differential_encode(&[17], &cb, &M::identity(4)).unwrap();
        assert!((&out[0] - &cb.matrices()[17]).max_abs() < 1e-15);

        assert!(matches!(
            differential_encode(&[64], &cb, &M::identity(4)),
            Err(DstmError::UnknownLabel { .. })
        ));
        assert!(matches!(
            differential_encode(&[0], &cb, &M::scalar(4, Complex::new(2.0, 0.0))),
            Err(DstmError::NotUnitary { .. })
        ));
    }

    #[test]
    fn encoder_drift_stays_bounded() {
        let cb = qo4(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..cb.len())).collect();
        let mut enc = DifferentialEncoder::new(&cb, M::identity(4)).unwrap();
        for &l in &labels {
            enc.push(l).unwrap();
        }
        assert!(enc.state().unitarity_defect().unwrap() <= 1e-8);
    }

    #[test]
    fn trace_metric_examples() {
        let r = row(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(trace_metric(&r, &r, &M::identity(4)).unwrap(), 1.0);
        assert!(trace_metric(&r, &row(&[1.0, 0.0]), &M::identity(4)).is_err());
    }

    #[test]
    fn noiseless_metric_peaks_at_transmitted_codeword() {
        let cb = qo4(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = sample_rayleigh::<f64, _>(1, 4, &mut rng).h;
        let u0 = &cb.matrices()[21];
        let r_t = &h * u0;
        let top = trace_metric(&r_t, &h, u0).unwrap();
        for (l, u) in cb.matrices().iter().enumerate() {
            if l != 21 {
                assert!(trace_metric(&r_t, &h, u).unwrap() < top);
            }
        }
    }

    #[test]
    fn trace_and_residual_forms_agree() {
        let cb = qo4(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = NoiseParams::new(0.3).unwrap();
        for _ in 0..100 {
            let h = sample_rayleigh::<f64, _>(1, 4, &mut rng).h;
            let c_prev = cb.matrices()[rng.random_range(0..cb.len())].clone();
            let u = &cb.matrices()[rng.random_range(0..cb.len())];
            let r_prev = transmit(&h, &c_prev, &noise, &mut rng).unwrap();
            let r_t = transmit(&h, &(&c_prev * u), &noise, &mut rng).unwrap();
            assert_eq!(full_ml_decode(&r_t, &r_prev, &cb).unwrap(), residual_decode(&r_t, &r_prev, &cb));
        }
    }

    #[test]
    fn silent_input_decodes_to_label_zero() {
        let cb = qo4(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r_t = transmit(&M::zeros(1, 4), &M::identity(4), &NoiseParams::new(1.0).unwrap(), &mut rng).unwrap();
        let r_prev = M::zeros(1, 4);
        assert!(is_silent(&r_prev));
        assert_eq!(full_ml_decode(&r_t, &r_prev, &cb).unwrap(), 0);
        assert_eq!(groupwise_decode(&r_t, &r_prev, &cb).unwrap(), 0);
    }

    #[test]
    fn groupwise_counts_candidates() {
        let cb = qo4(8);
        let r = row(&[1.0, 0.5, -0.2, 0.1]);
        let (_, evaluated) = groupwise_decode_counted(&r, &r, &cb).unwrap();
        assert_eq!(evaluated, 16 + 16);
        assert_eq!(cb.len(), 256);
    }

    #[test]
    fn high_snr_error_rate_is_small() {
        let cb = qo4(4);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let noise = NoiseParams::new(crate::channel::snr_db_to_sigma2(30.0)).unwrap();
        let mut errors = 0;
        for _ in 0..1000 {
            let h = sample_rayleigh::<f64, _>(1, 4, &mut rng).h;
            let label = rng.random_range(0..cb.len());
            let r_prev = transmit(&h, &M::identity(4), &noise, &mut rng).unwrap();
            let r_t = transmit(&h, &cb.matrices()[label], &noise, &mut rng).unwrap();
            if full_ml_decode(&r_t, &r_prev, &cb).unwrap() != label {
                errors += 1;
            }
        }
        assert!(errors < 10, "{errors} errors in 1000 trials");
    }

    #[test]
    fn metric_is_linear_in_the_codeword() {
        let cb = qo4(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = sample_rayleigh::<f64, _>(2, 4, &mut rng).h;
        let r_t = transmit(&h, &cb.matrices()[3], &NoiseParams::new(0.5).unwrap(), &mut rng).unwrap();
        let (a, b) = (0.7, -1.3);
        let (u1, u2) = (&cb.matrices()[10], &cb.matrices()[40]);
        let mut combo = u1.scale_real(a);
        combo.add_scaled(u2, b);
        let lhs = trace_metric(&r_t, &h, &combo).unwrap();
        let rhs = a * trace_metric(&r_t, &h, u1).unwrap() + b * trace_metric(&r_t, &h, u2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
