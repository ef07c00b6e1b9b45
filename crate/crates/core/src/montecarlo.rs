//! Seeded block-error-rate simulation over quasi-static Rayleigh fading.
//!
//! Every frame draws its own channel, labels and noise from a ChaCha stream
//! keyed by `(seed, SNR index, frame index)`. Frames are computed in fixed-size
//! batches (possibly in parallel) and accumulated strictly in frame order, so
//! the stopping point and the counts do not depend on the number of workers.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_rayleigh, snr_db_to_sigma2, transmit, NoiseParams};
use crate::codebook::Codebook;
use crate::error::{DstmError, Result};
use crate::link::{correlation, decode_from_correlation, DecoderChoice, DifferentialEncoder};
use crate::matrix::ComplexMatrix;
use crate::scalar::Real;
use crate::scheme::{Scheme, SchemeSpec};

pub const DEFAULT_FRAME_LEN: usize = 9;
pub const DEFAULT_MAX_ERRORS: u64 = 200;
pub const DEFAULT_MAX_BLOCKS: u64 = 100_000;
pub const MIN_MAX_BLOCKS: u64 = 1000;

/// Frames generated per scheduling batch. Fixed so results are independent
/// of the worker count.
const BATCH_FRAMES: u64 = 256;

pub const CSV_HEADER: &str = "scheme,n_tx,n_rx,snr_db,blocks,errors,bler,ci95";

fn default_frame_len() -> usize {
    DEFAULT_FRAME_LEN
}
fn default_max_errors() -> u64 {
    DEFAULT_MAX_ERRORS
}
fn default_max_blocks() -> u64 {
    DEFAULT_MAX_BLOCKS
}
fn default_n_rx() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(flatten)]
    pub scheme: SchemeSpec,
    /// Optional consistency check against the scheme's antenna count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tx: Option<usize>,
    #[serde(default = "default_n_rx")]
    pub n_rx: usize,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_max_blocks")]
    pub max_blocks: u64,
    #[serde(default = "default_max_errors")]
    pub max_errors: u64,
    #[serde(default = "default_frame_len")]
    pub frame_len: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub decoder: DecoderChoice,
    /// Thread cap; `None` uses the global pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(scheme: SchemeSpec, snr_db: Vec<f64>) -> Self {
        Self {
            scheme,
            n_tx: None,
            n_rx: 1,
            snr_db,
            max_blocks: DEFAULT_MAX_BLOCKS,
            max_errors: DEFAULT_MAX_ERRORS,
            frame_len: DEFAULT_FRAME_LEN,
            seed: 0,
            decoder: DecoderChoice::default(),
            workers: None,
        }
    }

    /// Checks the invariants and resolves the scheme.
    pub fn validate(&self) -> Result<Scheme> {
        let scheme = Scheme::from_spec(&self.scheme)?;
        if let Some(n_tx) = self.n_tx {
            if n_tx != scheme.n_tx() {
                return Err(DstmError::InvalidParameter(format!(
                    "n_tx = {n_tx} but scheme {scheme} uses {} antennas",
                    scheme.n_tx()
                )));
            }
        }
        let invalid = |msg: String| Err(DstmError::InvalidParameter(msg));
        if self.n_rx == 0 {
            return invalid("n_rx must be at least 1".into());
        }
        if self.frame_len < 2 {
            return invalid(format!("frame_len = {} must be at least 2", self.frame_len));
        }
        if self.max_blocks < MIN_MAX_BLOCKS {
            return invalid(format!("max_blocks = {} must be at least {MIN_MAX_BLOCKS}", self.max_blocks));
        }
        if self.max_errors == 0 {
            return invalid("max_errors must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return invalid("snr_db list is empty".into());
        }
        if let Some(v) = self.snr_db.iter().find(|v| !v.is_finite()) {
            return invalid(format!("SNR {v} is not finite"));
        }
        if self.workers == Some(0) {
            return invalid("workers must be at least 1".into());
        }
        Ok(scheme)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlerPoint {
    pub snr_db: f64,
    pub blocks: u64,
    pub errors: u64,
    pub bler: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
}

impl BlerPoint {
    pub fn from_counts(snr_db: f64, blocks: u64, errors: u64) -> Self {
        let n = blocks as f64;
        let bler = if blocks == 0 { 0.0 } else { errors as f64 / n };
        let ci95 = if blocks == 0 { 1.0 } else { 1.96 * (bler * (1.0 - bler) / n).sqrt() };
        Self {
            snr_db,
            blocks,
            errors,
            bler,
            ci95,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameOutcome {
    pub blocks: u64,
    pub errors: u64,
}

/// One frame: `C₀ = I`, then `frame_len − 1` random labels sent
/// differentially over the fixed channel `h` and decoded block by block.
pub fn run_frame<T, R>(
    cb: &Codebook<T>,
    h: &ComplexMatrix<T>,
    sigma2: T,
    rng: &mut R,
    frame_len: usize,
    decoder: DecoderChoice,
) -> Result<FrameOutcome>
where
    T: Real,
    StandardNormal: Distribution<T>,
    R: Rng + ?Sized,
{
    if frame_len < 2 {
        return Err(DstmError::InvalidParameter(format!("frame_len = {frame_len} must be at least 2")));
    }
    let noise = NoiseParams::new(sigma2)?;
    let mut enc = DifferentialEncoder::new(cb, ComplexMatrix::identity(cb.n_tx()))?;
    let mut r_prev = transmit(h, enc.state(), &noise, rng)?;
    let mut out = FrameOutcome::default();
    for _ in 1..frame_len {
        let label = rng.random_range(0..cb.len());
        let c = enc.push(label)?;
        let r_t = transmit(h, c, &noise, rng)?;
        let g = correlation(&r_t, &r_prev)?;
        if decode_from_correlation(&g, cb, decoder) != label {
            out.errors += 1;
        }
        out.blocks += 1;
        r_prev = r_t;
    }
    Ok(out)
}

/// RNG for one frame, independent of scheduling.
pub fn frame_rng(seed: u64, point: usize, frame: u64) -> ChaCha8Rng {
    assert!(point < 1 << 32 && frame < 1 << 32, "frame index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | frame);
    rng
}

fn simulate_frame(cb: &Codebook<f64>, cfg: &SimConfig, point: usize, frame: u64, sigma2: f64) -> Result<FrameOutcome> {
    let mut rng = frame_rng(cfg.seed, point, frame);
    let h = sample_rayleigh::<f64, _>(cfg.n_rx, cb.n_tx(), &mut rng).h;
    run_frame(cb, &h, sigma2, &mut rng, cfg.frame_len, cfg.decoder)
}

fn simulate_point(cb: &Codebook<f64>, cfg: &SimConfig, point: usize) -> Result<BlerPoint> {
    let snr = cfg.snr_db[point];
    let sigma2 = snr_db_to_sigma2(snr);
    let (mut blocks, mut errors) = (0u64, 0u64);
    let mut next = 0u64;
    while blocks < cfg.max_blocks && errors < cfg.max_errors {
        let batch: Vec<FrameOutcome> = (next..next + BATCH_FRAMES)
            .into_par_iter()
            .map(|f| simulate_frame(cb, cfg, point, f, sigma2))
            .collect::<Result<_>>()?;
        next += BATCH_FRAMES;
        for o in batch {
            blocks += o.blocks;
            errors += o.errors;
            if blocks >= cfg.max_blocks || errors >= cfg.max_errors {
                break;
            }
        }
    }
    Ok(BlerPoint::from_counts(snr, blocks, errors))
}

/// Simulates every SNR point of the configuration.
pub fn run_bler(cfg: &SimConfig) -> Result<Vec<BlerPoint>> {
    let scheme = cfg.validate()?;
    let cb = scheme.build::<f64>()?;
    run_bler_with(&cb, cfg)
}

/// As [`run_bler`] with a prebuilt codebook.
pub fn run_bler_with(cb: &Codebook<f64>, cfg: &SimConfig) -> Result<Vec<BlerPoint>> {
    let run = || (0..cfg.snr_db.len()).map(|p| simulate_point(cb, cfg, p)).collect();
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| DstmError::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// SNR where a BLER curve crosses a target, with the crossings of the
/// `bler ± ci95` envelopes as a confidence band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RequiredSnr {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

fn crossing(points: &[BlerPoint], target: f64, value: impl Fn(&BlerPoint) -> f64) -> Option<f64> {
    let floor = 1e-12;
    let log = |p: &BlerPoint| value(p).max(floor).log10();
    let t = target.log10();
    points.windows(2).find_map(|w| {
        let (a, b) = (log(&w[0]), log(&w[1]));
        if a >= t && b < t {
            let frac = (a - t) / (a - b);
            Some(w[0].snr_db + frac * (w[1].snr_db - w[0].snr_db))
        } else {
            None
        }
    })
}

/// Log-linear interpolation of the first downward crossing of `target`.
/// Points must be sorted by SNR.
pub fn required_snr(points: &[BlerPoint], target: f64) -> Option<RequiredSnr> {
    Some(RequiredSnr {
        estimate: crossing(points, target, |p| p.bler)?,
        low: crossing(points, target, |p| p.bler - p.ci95)?,
        high: crossing(points, target, |p| p.bler + p.ci95)?,
    })
}

/// Shortest round-trip decimal form, fixed regardless of locale.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv<W: Write>(mut w: W, label: &str, n_tx: usize, n_rx: usize, points: &[BlerPoint]) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{label},{n_tx},{n_rx},{},{},{},{},{}\n",
            num(p.snr_db),
            p.blocks,
            p.errors,
            num(p.bler),
            num(p.ci95)
        ));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub scheme_label: String,
    pub codebook_size: usize,
    pub config: SimConfig,
    pub points: Vec<BlerPoint>,
    pub wall_clock_s: f64,
}

/// Runs a configuration and returns its manifest.
pub fn run_with_manifest(cfg: &SimConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let scheme = cfg.validate()?;
    let cb = scheme.build::<f64>()?;
    let points = run_bler_with(&cb, cfg)?;
    Ok(RunManifest {
        scheme_label: scheme.label(),
        codebook_size: cb.len(),
        config: cfg.clone(),
        points,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::Scheme;

    fn qo4_cfg(snr: Vec<f64>) -> SimConfig {
        SimConfig::new(
            SchemeSpec {
                scheme: "qo4".into(),
                m: Some(8),
                ..Default::default()
            },
            snr,
        )
    }

    #[test]
    fn wald_interval() {
        let p = BlerPoint::from_counts(0.0, 10_000, 100);
        assert_eq!(p.bler, 0.01);
        assert!((p.ci95 - 1.96 * (0.01f64 * 0.99 / 10_000.0).sqrt()).abs() < 1e-15);
        assert_eq!(BlerPoint::from_counts(0.0, 10, 0).ci95, 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = qo4_cfg(vec![10.0]);
        assert!(cfg.validate().is_ok());
        cfg.frame_len = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = qo4_cfg(vec![]);
        assert!(cfg.validate().is_err());
        cfg.snr_db = vec![1.0];
        cfg.max_blocks = 999;
        assert!(cfg.validate().is_err());
        let mut cfg = qo4_cfg(vec![1.0]);
        cfg.n_tx = Some(8);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn noiseless_frames_are_error_free() {
        let cb = Scheme::named("qo4").unwrap().build::<f64>().unwrap();
        for frame in 0..50 {
            let mut rng = frame_rng(5, 0, frame);
            let h = sample_rayleigh::<f64, _>(1, 4, &mut rng).h;
            let out = run_frame(&cb, &h, 0.0, &mut rng, 9, DecoderChoice::Groupwise).unwrap();
            assert_eq!(out, FrameOutcome { blocks: 8, errors: 0 });
        }
    }

    #[test]
    fn dead_channel_errs_at_guessing_rate() {
        let cb = Scheme::named("o4-psk").unwrap().build::<f64>().unwrap();
        let h = ComplexMatrix::zeros(1, 4);
        let mut rng = frame_rng(1, 0, 0);
        let mut total = FrameOutcome::default();
        for _ in 0..2000 {
            let o = run_frame(&cb, &h, 1.0, &mut rng, 9, DecoderChoice::Groupwise).unwrap();
            total.blocks += o.blocks;
            total.errors += o.errors;
        }
        let rate = total.errors as f64 / total.blocks as f64;
        let expect = 1.0 - 1.0 / cb.len() as f64;
        let half = 1.96 * (expect * (1.0 - expect) / total.blocks as f64).sqrt();
        assert!((rate - expect).abs() < 2.0 * half + 1e-3, "{rate} vs {expect}");
    }

    #[test]
    fn frame_is_reproducible() {
        let cb = Scheme::named("qo4").unwrap().build::<f64>().unwrap();
        let cfg = qo4_cfg(vec![5.0]);
        let a = simulate_frame(&cb, &cfg, 0, 77, 0.3).unwrap();
        let b = simulate_frame(&cb, &cfg, 0, 77, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn early_stop_is_exact_and_worker_independent() {
        let mut cfg = qo4_cfg(vec![0.0, 6.0]);
        cfg.max_errors = 50;
        cfg.max_blocks = 5000;
        cfg.seed = 9;
        cfg.workers = Some(1);
        let one = run_bler(&cfg).unwrap();
        cfg.workers = Some(4);
        let four = run_bler(&cfg).unwrap();
        assert_eq!(one, four);
        assert!(one[0].errors >= 50 && one[0].errors < 50 + 8);
    }

    #[test]
    fn low_snr_reaches_guessing_floor() {
        let mut cfg = qo4_cfg(vec![-20.0]);
        cfg.max_errors = 100_000;
        cfg.max_blocks = 20_000;
        let p = run_bler(&cfg).unwrap()[0];
        let floor = 1.0 - 1.0 / 256.0;
        assert!((p.bler - floor).abs() <= p.ci95.max(1e-3) * 3.0, "{p:?}");
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        let pts = [BlerPoint::from_counts(10.0, 1000, 5)];
        write_csv(&mut buf, "qo4-m8", 4, 1, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("qo4-m8,4,1,10.0,1000,5,0.005,"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn required_snr_interpolates_in_log_domain() {
        let pts = [BlerPoint::from_counts(0.0, 1000, 100), BlerPoint::from_counts(10.0, 100_000, 100)];
        let r = required_snr(&pts, 0.01).unwrap();
        assert!((r.estimate - 5.0).abs() < 1e-9);
        assert!(r.low <= r.estimate && r.estimate <= r.high);
        assert!(required_snr(&pts, 1e-5).is_none());
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"scheme":"qo4","m":8,"theta":"theorem1","snr_db":[0,5],"seed":3,"decoder":"full-ml"}"#;
        let cfg: SimConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.decoder, DecoderChoice::FullMl);
        assert_eq!(cfg.frame_len, DEFAULT_FRAME_LEN);
        assert_eq!(cfg.max_errors, DEFAULT_MAX_ERRORS);
        let back: SimConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
