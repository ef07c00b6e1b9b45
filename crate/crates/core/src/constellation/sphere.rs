//! Spherical codes: point sets on the unit sphere with a large minimum angle.
//!
//! Codes come from three places: the embedded 16-point 3-D code, the bundled
//! coordinate files for (3, 8) and (4, 64) that [`optimize_sphere`] produced,
//! and user files in the plain-text coordinate format (one point per line,
//! `d` decimal numbers separated by whitespace, `#` starts a comment line).

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::JointGroupSet;
use crate::error::{DstmError, Result};
use crate::scalar::Real;

/// Optimal 16-point code in three dimensions, stored at radius `√0.5`.
pub const SPHERE_3X16_HALF_POWER: [[f64; 3]; 16] = [
    [0.089527456, 0.681333248, -0.166642852],
    [-0.418469889, 0.545080831, 0.166642852],
    [0.057360813, 0.436534568, 0.5533058],
    [-0.268116333, 0.349236773, -0.5533058],
    [-0.681333248, 0.089527456, -0.166642852],
    [-0.545080831, -0.418469889, 0.166642852],
    [-0.436534568, 0.057360813, 0.5533058],
    [-0.349236773, -0.268116333, -0.5533058],
    [-0.089527456, -0.681333248, -0.166642852],
    [0.418469889, -0.545080831, 0.166642852],
    [-0.057360813, -0.436534568, 0.5533058],
    [0.268116333, -0.349236773, -0.5533058],
    [0.681333248, -0.089527456, -0.166642852],
    [0.545080831, 0.418469889, 0.166642852],
    [0.436534568, -0.057360813, 0.5533058],
    [0.349236773, 0.268116333, -0.5533058],
];

const BUNDLED_3X8: &str = include_str!("../../data/sphere_3x8.txt");
const BUNDLED_4X64: &str = include_str!("../../data/sphere_4x64.txt");

/// Best known minimum angles (degrees) and the slack accepted for bundled files.
const TARGET_3X8: (f64, f64) = (74.8585, 0.9);
const TARGET_4X64: (f64, f64) = (42.3062, 1.0);

/// Tolerance on the spread of row radii accepted by the loader.
const RADIUS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalCode {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl SphericalCode {
    /// Wraps unit vectors; every point must have norm 1 within 1e-12.
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(DstmError::InvalidParameter(format!(
                "a spherical code needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(DstmError::Dimension(format!("point {i} has {} coordinates, expected {dim}", p.len())));
            }
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
                return Err(DstmError::InvalidParameter(format!("point {i} has norm {norm}")));
            }
        }
        Ok(Self { dim, points })
    }

    /// Normalizes rows that share a common radius (within 1e-6).
    pub fn from_common_radius(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let radii: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let mean = radii.iter().sum::<f64>() / radii.len().max(1) as f64;
        if !(mean > 0.0) {
            return Err(DstmError::InvalidParameter("rows have zero radius".into()));
        }
        if let Some((i, r)) = radii.iter().enumerate().find(|(_, r)| (**r - mean).abs() > RADIUS_TOL) {
            return Err(DstmError::InvalidParameter(format!(
                "row {i} has radius {r}, others average {mean}"
            )));
        }
        let points = rows
            .into_iter()
            .zip(&radii)
            .map(|(r, &norm)| r.into_iter().map(|x| x / norm).collect())
            .collect();
        Self::new(dim, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Smallest pairwise angle in degrees.
    pub fn min_angle(&self) -> f64 {
        max_inner_product(&self.points).clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// Serializes in the coordinate-file format.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# spherical code d={} n={} min_angle={:.6} deg\n",
            self.dim,
            self.len(),
            self.min_angle()
        );
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

fn max_inner_product(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(p.iter().zip(q).map(|(a, b)| a * b).sum());
        }
    }
    best
}

/// Parses the coordinate-file format; `origin` is only used in error messages.
pub fn parse_sphere(text: &str, origin: &Path) -> Result<SphericalCode> {
    let parse_err = |msg: String| DstmError::Parse {
        path: origin.to_path_buf(),
        msg,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| parse_err(format!("line {}: `{tok}`: {e}", lineno + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(format!(
                    "line {}: {} coordinates, previous rows have {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(parse_err(format!("need at least 2 points, found {}", rows.len())));
    }
    let dim = rows[0].len();
    SphericalCode::from_common_radius(dim, rows).map_err(|e| parse_err(e.to_string()))
}

pub fn load_sphere(path: impl AsRef<Path>) -> Result<SphericalCode> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_sphere(&text, path)
}

/// Built-in codes: `(3, 16)` embedded, `(3, 8)` and `(4, 64)` bundled.
pub fn builtin_sphere(d: usize, n: usize) -> Result<SphericalCode> {
    let (text, name, target) = match (d, n) {
        (3, 16) => {
            let rows = SPHERE_3X16_HALF_POWER.iter().map(|r| r.to_vec()).collect();
            return SphericalCode::from_common_radius(3, rows);
        }
        (3, 8) => (BUNDLED_3X8, "data/sphere_3x8.txt", TARGET_3X8),
        (4, 64) => (BUNDLED_4X64, "data/sphere_4x64.txt", TARGET_4X64),
        _ => {
            return Err(DstmError::Unsupported(format!(
                "no built-in spherical code for d={d}, n={n} (have 3x8, 3x16, 4x64)"
            )))
        }
    };
    let code = parse_sphere(text, Path::new(name))?;
    let floor = target.0 - target.1;
    if code.dim() != d || code.len() != n || code.min_angle() < floor {
        return Err(DstmError::Parse {
            path: name.into(),
            msg: format!(
                "bundled code is {}x{} with min angle {:.4} deg, need {d}x{n} with at least {floor:.4}",
                code.dim(),
                code.len(),
                code.min_angle()
            ),
        });
    }
    Ok(code)
}

/// Scales the unit points to squared norm `power`. Label `i` is point `i`.
pub fn sphere_to_joint<T: Real>(s: &SphericalCode, power: T) -> Result<JointGroupSet<T>> {
    if !s.len().is_power_of_two() {
        return Err(DstmError::NotPowerOfTwo(s.len()));
    }
    let r = power.sqrt();
    let points = s
        .points()
        .iter()
        .map(|p| p.iter().map(|&x| T::lit(x) * r).collect())
        .collect();
    JointGroupSet::new(s.dim(), points, power)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub iterations: usize,
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            iterations: 2000,
            restarts: 32,
        }
    }
}

/// Exponent of the repulsion potential at the end of the schedule.
const FINAL_EXPONENT: f64 = 300.0;

/// Best-of-restarts repulsion descent for `n` points on the unit sphere in
/// `d` dimensions. Each restart uses its own RNG stream derived from the seed,
/// so the result does not depend on how restarts are scheduled.
pub fn optimize_sphere(d: usize, n: usize, cfg: &OptimizerConfig) -> Result<SphericalCode> {
    if d < 2 || n < 2 {
        return Err(DstmError::InvalidParameter(format!("need d >= 2 and n >= 2, got d={d}, n={n}")));
    }
    let restarts = cfg.restarts.max(1);
    let runs: Vec<(f64, Vec<Vec<f64>>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let pts = if n == 2 {
                // the antipodal pair is optimal in every dimension
                let p = random_unit(d, &mut rng);
                let q = p.iter().map(|x| -x).collect();
                vec![p, q]
            } else {
                let mut pts = repulsion_descent(d, n, cfg.iterations, &mut rng);
                polish_min_distance(&mut pts, cfg.iterations);
                pts
            };
            (max_inner_product(&pts), pts)
        })
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.0 < runs[best].0 {
            best = i;
        }
    }
    let points = runs.into_iter().nth(best).map(|r| r.1).unwrap_or_default();
    SphericalCode::new(d, points)
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Inverse-power repulsion with the exponent ramped from 2 to
/// [`FINAL_EXPONENT`]; forces are normalized by the nearest-pair distance so
/// the high exponents act as a soft minimum. Returns the best snapshot seen.
fn repulsion_descent(d: usize, n: usize, iterations: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut x: Vec<Vec<f64>> = (0..n).map(|_| random_unit(d, rng)).collect();
    let mut best = x.clone();
    let mut best_dist2 = 0.0;
    let mut dist2 = vec![0.0; n * n];
    let mut force = vec![vec![0.0; d]; n];
    let iterations = iterations.max(1);
    for it in 0..=iterations {
        let mut min2 = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let r2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                dist2[i * n + j] = r2;
                dist2[j * n + i] = r2;
                min2 = min2.min(r2);
            }
        }
        if min2 > best_dist2 {
            best_dist2 = min2;
            best.clone_from(&x);
        }
        if it == iterations || min2 <= 0.0 {
            break;
        }
        let frac = it as f64 / iterations as f64;
        let half_exp = 0.5 * (2.0 + (FINAL_EXPONENT - 2.0) * frac) + 1.0;
        for f in force.iter_mut() {
            f.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..n {
            for j in i + 1..n {
                let w = (min2 / dist2[i * n + j]).powf(half_exp);
                if w < 1e-300 {
                    continue;
                }
                for k in 0..d {
                    let delta = w * (x[i][k] - x[j][k]);
                    force[i][k] += delta;
                    force[j][k] -= delta;
                }
            }
        }
        let mut fmax: f64 = 0.0;
        for (f, p) in force.iter_mut().zip(&x) {
            let radial: f64 = f.iter().zip(p).map(|(a, b)| a * b).sum();
            f.iter_mut().zip(p).for_each(|(a, b)| *a -= radial * b);
            fmax = fmax.max(f.iter().map(|a| a * a).sum::<f64>().sqrt());
        }
        if fmax <= 0.0 {
            break;
        }
        let step = (0.1 * (1.0 - frac).powi(2) + 2e-3) * min2.sqrt() / fmax;
        for (p, f) in x.iter_mut().zip(&force) {
            p.iter_mut().zip(f).for_each(|(a, b)| *a += step * b);
            normalize(p);
        }
    }
    best
}

fn min_dist2(x: &[Vec<f64>]) -> f64 {
    let mut min2 = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            min2 = min2.min(x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    min2
}

/// Pushes apart the pairs near the current minimum distance, keeping a move
/// only when the minimum distance grows. The step adapts to the outcome.
fn polish_min_distance(x: &mut Vec<Vec<f64>>, rounds: usize) {
    let n = x.len();
    let d = x[0].len();
    let mut cur = min_dist2(x);
    let mut step = 1e-3;
    let mut force = vec![vec![0.0; d]; n];
    for _ in 0..rounds {
        if step < 1e-13 {
            break;
        }
        let band = cur * (1.0 + 8.0 * step);
        for f in force.iter_mut() {
            f.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..n {
            for j in i + 1..n {
                let r2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 <= band {
                    let inv = 1.0 / r2.sqrt();
                    for k in 0..d {
                        let delta = (x[i][k] - x[j][k]) * inv;
                        force[i][k] += delta;
                        force[j][k] -= delta;
                    }
                }
            }
        }
        let trial: Vec<Vec<f64>> = x
            .iter()
            .zip(&force)
            .map(|(p, f)| {
                let mut q: Vec<f64> = p.iter().zip(f).map(|(a, b)| a + step * b).collect();
                normalize(&mut q);
                q
            })
            .collect();
        let next = min_dist2(&trial);
        if next > cur {
            *x = trial;
            cur = next;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> SphericalCode {
        let s = 1.0 / 3f64.sqrt();
        let rows = vec![
            vec![s, s, s],
            vec![s, -s, -s],
            vec![-s, s, -s],
            vec![-s, -s, s],
        ];
        SphericalCode::new(3, rows).unwrap()
    }

    /// Independent oracle: arccos over every ordered pair.
    fn brute_min_angle(s: &SphericalCode) -> f64 {
        let mut best = 180.0f64;
        for (i, p) in s.points().iter().enumerate() {
            for (j, q) in s.points().iter().enumerate() {
                if i != j {
                    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
                    best = best.min(dot.clamp(-1.0, 1.0).acos().to_degrees());
                }
            }
        }
        best
    }

    #[test]
    fn min_angle_examples() {
        let pair = SphericalCode::new(3, vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        assert_eq!(pair.min_angle(), 180.0);
        let tet = tetrahedron();
        let analytic = (-1.0f64 / 3.0).acos().to_degrees();
        assert!((tet.min_angle() - analytic).abs() < 1e-9);
        assert!((brute_min_angle(&tet) - 109.4712).abs() < 1e-4);
    }

    #[test]
    fn appendix_code_matches_reference_angle() {
        let s = builtin_sphere(3, 16).unwrap();
        assert!((s.min_angle() - 52.2444).abs() < 1e-3);
        assert!((s.min_angle() - brute_min_angle(&s)).abs() < 1e-9);
        let first = &s.points()[0];
        let expected = [0.089527456, 0.681333248, -0.166642852].map(|x| x / 0.5f64.sqrt());
        for (a, b) in first.iter().zip(expected) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn bundled_codes_meet_targets() {
        let s8 = builtin_sphere(3, 8).unwrap();
        assert_eq!((s8.dim(), s8.len()), (3, 8));
        assert!(s8.min_angle() >= 74.0);
        let s64 = builtin_sphere(4, 64).unwrap();
        assert_eq!((s64.dim(), s64.len()), (4, 64));
        assert!(s64.min_angle() >= 41.3);
        assert!(matches!(builtin_sphere(3, 32), Err(DstmError::Unsupported(_))));
    }

    #[test]
    fn sphere_to_joint_examples() {
        let s = builtin_sphere(3, 16).unwrap();
        let joint = sphere_to_joint(&s, 0.5f64).unwrap();
        for (p, row) in joint.points().iter().zip(SPHERE_3X16_HALF_POWER) {
            for (a, b) in p.iter().zip(row) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((p.iter().map(|x| x * x).sum::<f64>() - 0.5).abs() < 1e-12);
        }

        let s8 = builtin_sphere(3, 8).unwrap();
        let j8 = sphere_to_joint(&s8, 0.5f64).unwrap();
        let from_angle = 2.0 * 0.5 * (1.0 - s8.min_angle().to_radians().cos());
        assert!((j8.min_sq_distance() - from_angle).abs() < 1e-12);

        let three = SphericalCode::new(2, vec![vec![1.0, 0.0], vec![-0.5, 0.75f64.sqrt()], vec![-0.5, -0.75f64.sqrt()]]).unwrap();
        assert!(matches!(sphere_to_joint(&three, 0.5f64), Err(DstmError::NotPowerOfTwo(3))));
    }

    #[test]
    fn parser_round_trip_and_errors() {
        let s = builtin_sphere(3, 16).unwrap();
        let back = parse_sphere(&s.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back.len(), 16);
        for (a, b) in s.points().iter().zip(back.points()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-15);
            }
        }

        let ragged = "1 0 0\n0 1\n";
        assert!(matches!(parse_sphere(ragged, Path::new("r")), Err(DstmError::Parse { .. })));
        let radii = "1 0 0\n0 2 0\n";
        assert!(matches!(parse_sphere(radii, Path::new("r")), Err(DstmError::Parse { .. })));
        let single = "# one point\n1 0 0\n";
        assert!(matches!(parse_sphere(single, Path::new("r")), Err(DstmError::Parse { .. })));
        let junk = "1 0 x\n0 1 0\n";
        assert!(matches!(parse_sphere(junk, Path::new("r")), Err(DstmError::Parse { .. })));
    }

    #[test]
    fn optimizer_small_cases() {
        let cfg = OptimizerConfig { seed: 7, iterations: 2000, restarts: 4 };
        assert_eq!(optimize_sphere(3, 2, &cfg).unwrap().min_angle(), 180.0);
        assert!(optimize_sphere(3, 4, &cfg).unwrap().min_angle() >= 109.0);
        assert!(optimize_sphere(1, 4, &cfg).is_err());
    }

    #[test]
    fn optimizer_is_deterministic_and_best_of_restarts() {
        let cfg = OptimizerConfig { seed: 11, iterations: 300, restarts: 3 };
        let a = optimize_sphere(3, 6, &cfg).unwrap();
        let b = optimize_sphere(3, 6, &cfg).unwrap();
        assert_eq!(a, b);
        let best = a.min_angle();
        let single = optimize_sphere(3, 6, &OptimizerConfig { restarts: 1, ..cfg }).unwrap();
        assert!(best >= single.min_angle());
    }
}
