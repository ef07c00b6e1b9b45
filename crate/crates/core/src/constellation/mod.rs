//! Joint constellation sets.
//!
//! A joint constellation assigns one point to a whole group of real symbol
//! slots at once. Three families are built here: spherical codes scaled to a
//! group power ([`sphere`]), the pairwise symbol-pair set with rotation used
//! by the quasi-orthogonal codes ([`qo_pairwise`]), and plain PSK for the
//! symbol-by-symbol baselines ([`psk`]).

pub mod sphere;

use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{DstmError, Result};
use crate::scalar::Real;

pub use sphere::{
    builtin_sphere, load_sphere, optimize_sphere, parse_sphere, sphere_to_joint, OptimizerConfig, SphericalCode,
};

/// Points in `group_dim` real dimensions, all with squared norm `power`.
/// Point `i` carries bit label `i`.
#[derive(Clone, Debug, Serialize)]
pub struct JointGroupSet<T> {
    group_dim: usize,
    points: Vec<Vec<T>>,
    power: T,
}

impl<T: Real> JointGroupSet<T> {
    pub fn new(group_dim: usize, points: Vec<Vec<T>>, power: T) -> Result<Self> {
        if !points.len().is_power_of_two() || points.len() < 2 {
            return Err(DstmError::NotPowerOfTwo(points.len()));
        }
        if !(power > T::zero()) {
            return Err(DstmError::InvalidParameter(format!("group power {power} must be positive")));
        }
        let tol = T::lit(T::ROUNDOFF) * power.max(T::one());
        for (i, p) in points.iter().enumerate() {
            if p.len() != group_dim {
                return Err(DstmError::Dimension(format!(
                    "point {i} has {} components, expected {group_dim}",
                    p.len()
                )));
            }
            let e: T = p.iter().map(|&x| x * x).sum();
            if !e.is_finite() || (e - power).abs() > tol {
                return Err(DstmError::InvalidParameter(format!(
                    "point {i} has squared norm {e}, expected {power}"
                )));
            }
        }
        Ok(Self { group_dim, points, power })
    }

    pub fn group_dim(&self) -> usize {
        self.group_dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits(&self) -> u32 {
        self.points.len().trailing_zeros()
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn point(&self, label: usize) -> &[T] {
        &self.points[label]
    }

    /// Minimum squared Euclidean distance between distinct points.
    pub fn min_sq_distance(&self) -> T {
        let mut best = T::infinity();
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                let d: T = p.iter().zip(q).map(|(&a, &b)| (a - b) * (a - b)).sum();
                best = best.min(d);
            }
        }
        best
    }
}

/// Symbol-pair set `{(a_k, b_k)}` for quasi-orthogonal codes, with
/// `|a_k|² + |b_k|² = power` and `Re(a_k b_k*) = ν` for every pair.
#[derive(Clone, Debug)]
pub struct PairwiseSet<T> {
    m: usize,
    theta: T,
    power: T,
    nu: T,
    pairs: Vec<(Complex<T>, Complex<T>)>,
}

impl<T: Real> PairwiseSet<T> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Complex<T>, Complex<T>)] {
        &self.pairs
    }

    /// Largest deviation from the constant-power and constant-ν criteria.
    pub fn criteria_defect(&self) -> (T, T) {
        let mut power_dev = T::zero();
        let mut nu_dev = T::zero();
        for (a, b) in &self.pairs {
            power_dev = power_dev.max((a.norm_sqr() + b.norm_sqr() - self.power).abs());
            nu_dev = nu_dev.max(((a * b.conj()).re - self.nu).abs());
        }
        (power_dev, nu_dev)
    }

    /// Real-vector view `(Re a, Im a, Re b, Im b)` for bit mapping.
    pub fn to_joint(&self) -> Result<JointGroupSet<T>> {
        let points = self.pairs.iter().map(|(a, b)| vec![a.re, a.im, b.re, b.im]).collect();
        JointGroupSet::new(4, points, self.power)
    }
}

/// The rotated pairwise set: `M` pairs `(ρ·e^{j2kπ/M}, 0)` followed by `M`
/// pairs `(0, ρ·e^{j(2kπ/M + θ)})`, `k = 1..M`, with `ρ² = 1/n_groups`.
pub fn qo_pairwise<T: Real>(m: usize, theta: T, n_groups: usize) -> Result<PairwiseSet<T>> {
    if m < 2 {
        return Err(DstmError::InvalidParameter(format!("M = {m} must be at least 2")));
    }
    let two_pi = T::TAU();
    let mf = T::from_usize(m).unwrap();
    if !(theta >= T::zero() && theta < two_pi / mf) {
        return Err(DstmError::InvalidParameter(format!(
            "rotation {theta} outside [0, 2π/{m})"
        )));
    }
    if !(2..=3).contains(&n_groups) {
        return Err(DstmError::InvalidParameter(format!(
            "pairwise sets are defined for 2 or 3 decoding groups, got {n_groups}"
        )));
    }
    let power = T::one() / T::from_usize(n_groups).unwrap();
    let rho = power.sqrt();
    let step = two_pi / mf;
    let mut pairs = Vec::with_capacity(2 * m);
    for k in 1..=m {
        let phase = step * T::from_usize(k).unwrap();
        pairs.push((Complex::from_polar(rho, phase), Complex::zero()));
    }
    for k in 1..=m {
        let phase = step * T::from_usize(k).unwrap() + theta;
        pairs.push((Complex::zero(), Complex::from_polar(rho, phase)));
    }
    Ok(PairwiseSet {
        m,
        theta,
        power,
        nu: T::zero(),
        pairs,
    })
}

/// Optimal rotation for the pairwise set: `π/M` for even `M`, `π/(2M)` for
/// odd `M` (where `3π/(2M)` scores the same).
pub fn theorem1_theta<T: Real>(m: usize) -> T {
    let mf = T::from_usize(m.max(1)).unwrap();
    if m.is_multiple_of(2) {
        T::PI() / mf
    } else {
        T::PI() / (T::lit(2.0) * mf)
    }
}

/// `n`-PSK at radius `√power`, as two real slots per point.
pub fn psk<T: Real>(n: usize, power: T) -> Result<JointGroupSet<T>> {
    if !n.is_power_of_two() || n < 2 {
        return Err(DstmError::NotPowerOfTwo(n));
    }
    let r = power.sqrt();
    let nf = T::from_usize(n).unwrap();
    let points = (0..n)
        .map(|k| {
            let phase = T::TAU() * T::from_usize(k).unwrap() / nf;
            vec![r * phase.cos(), r * phase.sin()]
        })
        .collect();
    JointGroupSet::new(2, points, power)
}

/// `[|Δa + Δb|² · |Δa − Δb|²]²`, the determinant a single differing pair
/// contributes to a four-antenna quasi-orthogonal codeword distance.
pub fn pair_distance_product<T: Real>(p: (Complex<T>, Complex<T>), q: (Complex<T>, Complex<T>)) -> T {
    let da = p.0 - q.0;
    let db = p.1 - q.1;
    let prod = (da + db).norm_sqr() * (da - db).norm_sqr();
    prod * prod
}

const SCORE_RTOL: f64 = 1e-9;

/// Score of one rotation in a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationScore {
    /// Minimum pair determinant over all pairs.
    pub overall: f64,
    /// Minimum over pairs taking one point from each half of the set; the
    /// only θ-dependent part.
    pub cross: f64,
}

impl RotationScore {
    /// Scores within a relative `1e-9` count as equal: the same-half pairs do
    /// not depend on θ, but their computed determinants wobble by a few ulps.
    fn better_than(&self, other: &Self) -> bool {
        let exceeds = |a: f64, b: f64| a > b + SCORE_RTOL * a.abs().max(b.abs());
        exceeds(self.overall, other.overall)
            || (!exceeds(other.overall, self.overall) && exceeds(self.cross, other.cross))
    }
}

/// Brute-force score of the pairwise set with `M` and rotation `θ` at pair power 1/2.
pub fn rotation_score(m: usize, theta: f64) -> Result<RotationScore> {
    let set = qo_pairwise::<f64>(m, theta, 2)?;
    let pairs = set.pairs();
    let mut overall = f64::INFINITY;
    let mut cross = f64::INFINITY;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let d = pair_distance_product(pairs[i], pairs[j]);
            overall = overall.min(d);
            if (i < m) != (j < m) {
                cross = cross.min(d);
            }
        }
    }
    Ok(RotationScore { overall, cross })
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOutcome {
    pub m: usize,
    pub grid_step: f64,
    pub best_theta: f64,
    pub best: RotationScore,
}

/// Exhaustive rotation sweep over `[0, 2π/M)` with step `π/(divisions·M)`.
///
/// Ties on the overall minimum (which happen once the same-half pairs
/// dominate, for larger `M`) are broken by the cross-half minimum, then
/// toward the smaller angle.
pub fn rotation_sweep(m: usize, divisions: usize) -> Result<SweepOutcome> {
    let mf = m as f64;
    let step = std::f64::consts::PI / (divisions as f64 * mf);
    let n_grid = 2 * divisions;
    let mut best_theta = 0.0;
    let mut best = rotation_score(m, 0.0)?;
    for g in 1..n_grid {
        let theta = g as f64 * step;
        let score = rotation_score(m, theta)?;
        if score.better_than(&best) {
            best = score;
            best_theta = theta;
        }
    }
    Ok(SweepOutcome {
        m,
        grid_step: step,
        best_theta,
        best,
    })
}
