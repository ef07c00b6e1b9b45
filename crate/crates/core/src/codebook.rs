//! Unitary codebooks built from a linear code and joint constellation groups,
//! plus the diversity and coding-gain analyses.
//!
//! A codebook is the Cartesian product of its decoding groups: each group
//! owns a disjoint set of real symbol slots and draws one point from its
//! constellation. Labels are mixed-radix numbers with group 0 in the most
//! significant position.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::{JointGroupSet, PairwiseSet};
use crate::error::{DstmError, Result};
use crate::matrix::{elimination_rank_pivots, gram_into, lu_determinant, ComplexMatrix};
use crate::scalar::Real;
use crate::stbc::LinearDispersion;

/// Largest codebook that [`assemble`] will enumerate.
pub const MAX_CODEBOOK_SIZE: usize = 1 << 16;

#[derive(Clone, Debug)]
pub struct DecodingGroup<T> {
    slots: Vec<usize>,
    constellation: JointGroupSet<T>,
}

impl<T: Real> DecodingGroup<T> {
    pub fn new(slots: Vec<usize>, constellation: JointGroupSet<T>) -> Result<Self> {
        if slots.len() != constellation.group_dim() {
            return Err(DstmError::Dimension(format!(
                "group has {} slots but its constellation has dimension {}",
                slots.len(),
                constellation.group_dim()
            )));
        }
        Ok(Self { slots, constellation })
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn constellation(&self) -> &JointGroupSet<T> {
        &self.constellation
    }

    pub fn size(&self) -> usize {
        self.constellation.len()
    }

    pub fn bits(&self) -> u32 {
        self.constellation.bits()
    }
}

/// Nonzero entries `(row, col, value)` of one slot's dispersion matrix.
pub(crate) type SparseTerms<T> = Vec<(usize, usize, Complex<T>)>;

#[derive(Clone, Debug)]
pub struct Codebook<T> {
    n_tx: usize,
    dispersion: LinearDispersion<T>,
    slot_terms: Vec<SparseTerms<T>>,
    groups: Vec<DecodingGroup<T>>,
    matrices: Vec<ComplexMatrix<T>>,
}

/// Enumerates every codeword and checks that each one is unitary.
pub fn assemble<T: Real>(dispersion: LinearDispersion<T>, groups: Vec<DecodingGroup<T>>) -> Result<Codebook<T>> {
    let n_slots = dispersion.n_slots();
    let mut owner = vec![None; n_slots];
    for (g, group) in groups.iter().enumerate() {
        for &s in group.slots() {
            if s >= n_slots {
                return Err(DstmError::Dimension(format!("slot {s} out of range (code has {n_slots})")));
            }
            if let Some(other) = owner[s].replace(g) {
                return Err(DstmError::InvalidParameter(format!("slot {s} claimed by groups {other} and {g}")));
            }
        }
    }
    if let Some(s) = owner.iter().position(Option::is_none) {
        return Err(DstmError::InvalidParameter(format!("slot {s} is not covered by any group")));
    }
    let size = groups
        .iter()
        .try_fold(1usize, |acc, g| acc.checked_mul(g.size()))
        .filter(|&n| n <= MAX_CODEBOOK_SIZE)
        .ok_or_else(|| DstmError::Unsupported(format!("codebook larger than {MAX_CODEBOOK_SIZE} codewords")))?;

    let slot_mats: Vec<ComplexMatrix<T>> = (0..n_slots).map(|s| dispersion.slot_matrix(s)).collect();
    let slot_terms = slot_mats
        .iter()
        .map(|m| {
            let mut terms = Vec::new();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    if !m[(i, j)].is_zero() {
                        terms.push((i, j, m[(i, j)]));
                    }
                }
            }
            terms
        })
        .collect();

    let n_tx = dispersion.n_tx();
    let mut cb = Codebook {
        n_tx,
        dispersion,
        slot_terms,
        groups,
        matrices: Vec::with_capacity(size),
    };
    let tol = T::lit(T::UNITARY_TOL);
    for label in 0..size {
        let idx = cb.split_label(label);
        let mut u = ComplexMatrix::zeros(n_tx, n_tx);
        for (group, &p) in cb.groups.iter().zip(&idx) {
            for (&slot, &value) in group.slots().iter().zip(group.constellation().point(p)) {
                u.add_scaled(&slot_mats[slot], value);
            }
        }
        let defect = u.unitarity_defect()?;
        if !(defect <= tol) {
            return Err(DstmError::NotUnitary {
                label,
                defect: defect.as_f64(),
            });
        }
        cb.matrices.push(u);
    }
    Ok(cb)
}

impl<T: Real> Codebook<T> {
    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn bits(&self) -> u32 {
        self.groups.iter().map(DecodingGroup::bits).sum()
    }

    pub fn groups(&self) -> &[DecodingGroup<T>] {
        &self.groups
    }

    pub fn dispersion(&self) -> &LinearDispersion<T> {
        &self.dispersion
    }

    pub fn matrices(&self) -> &[ComplexMatrix<T>] {
        &self.matrices
    }

    pub fn matrix(&self, label: usize) -> Result<&ComplexMatrix<T>> {
        self.matrices.get(label).ok_or(DstmError::UnknownLabel {
            label,
            size: self.len(),
        })
    }

    pub(crate) fn slot_terms(&self) -> &[SparseTerms<T>] {
        &self.slot_terms
    }

    /// Per-group point indices of a label (group 0 first).
    pub fn split_label(&self, mut label: usize) -> Vec<usize> {
        let mut idx = vec![0; self.groups.len()];
        for (g, group) in self.groups.iter().enumerate().rev() {
            idx[g] = label % group.size();
            label /= group.size();
        }
        idx
    }

    pub fn join_label(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.groups).fold(0, |acc, (&i, g)| acc * g.size() + i)
    }

    /// Candidates examined by each parallel decoder.
    pub fn search_spaces(&self) -> Vec<usize> {
        self.groups.iter().map(DecodingGroup::size).collect()
    }

    pub fn export(&self) -> CodebookExport {
        let width = self.bits() as usize;
        CodebookExport {
            n_tx: self.n_tx,
            n_sym: self.dispersion.n_sym(),
            size: self.len(),
            bits: self.bits(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupExport {
                    slots: g.slots().to_vec(),
                    size: g.size(),
                    bits: g.bits(),
                    points: g
                        .constellation()
                        .points()
                        .iter()
                        .map(|p| p.iter().map(|x| x.as_f64()).collect())
                        .collect(),
                })
                .collect(),
            codewords: self
                .matrices
                .iter()
                .enumerate()
                .map(|(label, m)| CodewordExport {
                    label,
                    bits: format!("{label:0width$b}"),
                    matrix: (0..m.rows())
                        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re.as_f64(), m[(i, j)].im.as_f64()]).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

/// JSON export of a codebook. Complex entries are `[re, im]` pairs, matrices
/// are row-major lists of rows, and `bits` is the label in binary with group 0
/// in the leading bits.
#[derive(Debug, Serialize)]
pub struct CodebookExport {
    pub n_tx: usize,
    pub n_sym: usize,
    pub size: usize,
    pub bits: u32,
    pub groups: Vec<GroupExport>,
    pub codewords: Vec<CodewordExport>,
}

#[derive(Debug, Serialize)]
pub struct GroupExport {
    /// Real slots (`2k` = Re cₖ, `2k+1` = Im cₖ) filled by this group's points.
    pub slots: Vec<usize>,
    pub size: usize,
    pub bits: u32,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct CodewordExport {
    pub label: usize,
    pub bits: String,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

/// Result of the exhaustive pair enumeration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats<T> {
    /// Minimum rank of `U_k − U_l`.
    pub diversity: usize,
    /// Minimum of `det((U_k − U_l)(U_k − U_l)ᴴ)`.
    pub min_det: T,
    /// `N_T · min_det^(1/N_T)`, or zero without full diversity.
    pub coding_gain: T,
}

/// Enumerates all unordered codeword pairs once, collecting rank and
/// distance-determinant minima.
pub fn pair_stats<T: Real>(cb: &Codebook<T>, rank_tol: T) -> Result<PairStats<T>> {
    let n = cb.n_tx;
    let mats = &cb.matrices;
    if mats.len() < 2 {
        return Err(DstmError::InvalidParameter("pair statistics need at least two codewords".into()));
    }
    let neg_tol = T::lit(T::ROUNDOFF);
    let per_row = |k: usize| -> (usize, T, Option<T>) {
        let mut diff = vec![Complex::<T>::zero(); n * n];
        let mut work = vec![Complex::<T>::zero(); n * n];
        let mut gram = vec![Complex::<T>::zero(); n * n];
        let mut min_rank = n;
        let mut min_det = T::infinity();
        let mut bad = None;
        let uk = mats[k].as_slice();
        for ul in &mats[k + 1..] {
            for ((d, a), b) in diff.iter_mut().zip(uk).zip(ul.as_slice()) {
                *d = a - b;
            }
            work.copy_from_slice(&diff);
            let (rank, pivots) = elimination_rank_pivots(&mut work, n, n, rank_tol);
            min_rank = min_rank.min(rank);
            // det(ΔΔᴴ) = |det Δ|², read off the pivots when Δ has full rank
            let det = if rank == n {
                pivots
            } else {
                gram_into(&diff, n, n, &mut gram);
                lu_determinant(&mut gram, n).re
            };
            if det < -neg_tol {
                bad = Some(det);
            }
            min_det = min_det.min(det.max(T::zero()));
        }
        (min_rank, min_det, bad)
    };
    let (diversity, min_det, bad) = (0..mats.len() - 1)
        .into_par_iter()
        .map(per_row)
        .reduce(
            || (n, T::infinity(), None),
            |a, b| (a.0.min(b.0), a.1.min(b.1), a.2.or(b.2)),
        );
    if let Some(det) = bad {
        return Err(DstmError::NegativeDeterminant(det.as_f64()));
    }
    let nt = T::from_usize(n).unwrap();
    let coding_gain = if diversity == n {
        nt * min_det.powf(T::one() / nt)
    } else {
        T::zero()
    };
    Ok(PairStats {
        diversity,
        min_det,
        coding_gain,
    })
}

/// Minimum rank of `U_k − U_l` over all pairs.
pub fn diversity_rank<T: Real>(cb: &Codebook<T>, tol: T) -> Result<usize> {
    pair_stats(cb, tol).map(|s| s.diversity)
}

/// Brute-force coding gain; zero for codebooks without full diversity.
pub fn coding_gain<T: Real>(cb: &Codebook<T>) -> Result<T> {
    pair_stats(cb, T::lit(T::RANK_TOL)).map(|s| s.coding_gain)
}

/// Orthogonal codes: the distance determinant is `(Σ|Δᵢ|²)^N_T`, so the gain
/// is `N_T` times the minimum squared distance of the joint constellation.
pub fn coding_gain_fast_ostbc<T: Real>(set: &JointGroupSet<T>, n_tx: usize) -> T {
    T::from_usize(n_tx).unwrap() * set.min_sq_distance()
}

/// Closed-form minimum of `[|Δa+Δb|²·|Δa−Δb|²]²` over the rotated pairwise
/// set, taken as the smaller of the same-half minimum
/// `(2ρ²(1 − cos 2πn/M))⁴` and the cross-half minimum
/// `16ρ⁸·sin⁴(2πn/M − θ)`, where `ρ²` is the pair power.
pub fn detmin_fast_qo<T: Real>(set: &PairwiseSet<T>) -> T {
    let m = set.m();
    let mf = T::from_usize(m).unwrap();
    let p = set.power();
    let two = T::lit(2.0);
    let same_half = (1..m)
        .map(|n| {
            let phase = T::TAU() * T::from_usize(n).unwrap() / mf;
            (two * p * (T::one() - phase.cos())).powi(4)
        })
        .fold(T::infinity(), T::min);
    let cross_half = (0..m)
        .map(|n| {
            let phase = T::TAU() * T::from_usize(n).unwrap() / mf - set.theta();
            T::lit(16.0) * p.powi(4) * phase.sin().powi(4)
        })
        .fold(T::infinity(), T::min);
    same_half.min(cross_half)
}

/// Quasi-orthogonal codes: the four-antenna distance determinant is
/// `P²` and the eight-antenna one `P⁴`, with `P = |Δa+Δb|²·|Δa−Δb|²`, so
/// both gains reduce to `N_T · √P_min = N_T · detmin^(1/4)`.
pub fn coding_gain_fast_qo<T: Real>(set: &PairwiseSet<T>, n_tx: usize) -> T {
    T::from_usize(n_tx).unwrap() * detmin_fast_qo(set).powf(T::lit(0.25))
}

/// `log₂(N) / N_T` bits per channel use.
pub fn spectral_efficiency<T: Real>(cb: &Codebook<T>) -> f64 {
    (cb.len() as f64).log2() / cb.n_tx() as f64
}
