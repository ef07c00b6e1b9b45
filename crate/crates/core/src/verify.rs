//! Self-check batteries run by `dstm verify` and the acceptance suite.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_rayleigh, snr_db_to_sigma2, transmit, NoiseParams};
use crate::codebook::Codebook;
use crate::constellation::rotation_sweep;
use crate::error::Result;
use crate::link::{full_ml_decode, groupwise_decode, groupwise_decode_counted, DifferentialEncoder};
use crate::matrix::ComplexMatrix;
use crate::scalar::Real;
use crate::scheme::Scheme;

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Case {
    pub m: usize,
    pub best_theta: f64,
    pub expected: Vec<f64>,
    pub grid_step: f64,
    pub pass: bool,
}

/// Optimal rotations predicted for the pairwise set.
pub fn theorem1_expected(m: usize) -> Vec<f64> {
    let mf = m as f64;
    if m.is_multiple_of(2) {
        vec![PI / mf]
    } else {
        vec![PI / (2.0 * mf), 3.0 * PI / (2.0 * mf)]
    }
}

/// Sweeps each `M` on a grid of step `π/(divisions·M)`.
pub fn theorem1_battery(ms: impl IntoIterator<Item = usize>, divisions: usize) -> Result<Vec<Theorem1Case>> {
    ms.into_iter()
        .map(|m| {
            let sweep = rotation_sweep(m, divisions)?;
            let expected = theorem1_expected(m);
            let pass = expected
                .iter()
                .any(|e| (sweep.best_theta - e).abs() <= sweep.grid_step * (1.0 + 1e-9));
            Ok(Theorem1Case {
                m,
                best_theta: sweep.best_theta,
                expected,
                grid_step: sweep.grid_step,
                pass,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceCase {
    pub label: String,
    pub trials: usize,
    pub mismatches: usize,
    /// Candidates scored by the groupwise decoder per block.
    pub evaluated: usize,
    /// `Σ_g L_g` for the codebook.
    pub expected_evaluated: usize,
    pub codebook_size: usize,
    pub pass: bool,
}

/// Groupwise versus exhaustive decoding on random noisy block pairs.
///
/// Trial `i` draws its channel, codewords and an SNR in `[0, 20]` dB from its
/// own RNG stream, so results do not depend on scheduling.
pub fn equivalence_check(label: &str, cb: &Codebook<f64>, trials: usize, seed: u64) -> Result<EquivalenceCase> {
    let expected_evaluated: usize = cb.groups().iter().map(|g| g.size()).sum();
    let outcomes: Vec<(bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let h = sample_rayleigh::<f64, _>(1, cb.n_tx(), &mut rng).h;
            let noise = NoiseParams::new(snr_db_to_sigma2(rng.random_range(0.0..20.0)))?;
            let c_prev = &cb.matrices()[rng.random_range(0..cb.len())];
            let u = &cb.matrices()[rng.random_range(0..cb.len())];
            let r_prev = transmit(&h, c_prev, &noise, &mut rng)?;
            let r_t = transmit(&h, &(c_prev * u), &noise, &mut rng)?;
            let (g, evaluated) = groupwise_decode_counted(&r_t, &r_prev, cb)?;
            let f = full_ml_decode(&r_t, &r_prev, cb)?;
            Ok((g != f, evaluated))
        })
        .collect::<Result<_>>()?;
    let mismatches = outcomes.iter().filter(|o| o.0).count();
    let evaluated = outcomes.first().map_or(expected_evaluated, |o| o.1);
    let counts_ok = outcomes.iter().all(|o| o.1 == expected_evaluated);
    Ok(EquivalenceCase {
        label: label.to_owned(),
        trials,
        mismatches,
        evaluated,
        expected_evaluated,
        codebook_size: cb.len(),
        pass: mismatches == 0 && counts_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitarityCase {
    pub label: String,
    pub codebook_size: usize,
    pub max_defect: f64,
    pub pass: bool,
}

pub fn unitarity_check<T: Real>(label: &str, cb: &Codebook<T>) -> Result<UnitarityCase> {
    let mut max_defect = 0.0f64;
    for u in cb.matrices() {
        max_defect = max_defect.max(u.unitarity_defect()?.as_f64());
    }
    Ok(UnitarityCase {
        label: label.to_owned(),
        codebook_size: cb.len(),
        max_defect,
        pass: max_defect <= T::UNITARY_TOL,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiselessCase {
    pub label: String,
    pub channels: usize,
    pub blocks: usize,
    pub errors: usize,
    pub pass: bool,
}

/// Sends every label once per channel through a noiseless link and decodes
/// it with the groupwise decoder.
pub fn noiseless_check(label: &str, cb: &Codebook<f64>, channels: usize, seed: u64) -> Result<NoiselessCase> {
    let quiet = NoiseParams::new(0.0)?;
    let per_channel: Vec<usize> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let h = loop {
                let h = sample_rayleigh::<f64, _>(1, cb.n_tx(), &mut rng).h;
                if h.frobenius_norm_sqr() > 1e-12 {
                    break h;
                }
            };
            let mut enc = DifferentialEncoder::new(cb, ComplexMatrix::identity(cb.n_tx()))?;
            let mut r_prev = transmit(&h, enc.state(), &quiet, &mut rng)?;
            let mut errors = 0;
            for l in 0..cb.len() {
                let r_t = transmit(&h, enc.push(l)?, &quiet, &mut rng)?;
                if groupwise_decode(&r_t, &r_prev, cb)? != l {
                    errors += 1;
                }
                r_prev = r_t;
            }
            Ok(errors)
        })
        .collect::<Result<_>>()?;
    let errors = per_channel.iter().sum();
    Ok(NoiselessCase {
        label: label.to_owned(),
        channels,
        blocks: channels * cb.len(),
        errors,
        pass: errors == 0,
    })
}

/// The shipped schemes with their `f64` codebooks.
pub fn shipped_codebooks() -> Result<Vec<(Scheme, Codebook<f64>)>> {
    Scheme::shipped()
        .into_iter()
        .map(|s| {
            let cb = s.build::<f64>()?;
            Ok((s, cb))
        })
        .collect()
}
