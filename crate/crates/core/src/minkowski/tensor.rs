use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::{FourVector, TimeDirection};
use crate::error::{Error, Result};

/// Largest rank accepted by the polarization identity (2ⁿ − 1 diagonal samples
/// per coefficient).
pub const MAX_POLARIZATION_RANK: usize = 6;

/// Totally symmetric covariant tensor on R⁴.
///
/// Only coefficients with sorted indices μ₁ ≤ … ≤ μₙ are stored; the full
/// tensor component for any index tuple is the stored value for its sorted
/// permutation. A stored coefficient stands for `multiplicity(idx)` entries of
/// the full 4ⁿ array, which is the weight used by [`SymmetricTensor::frobenius_norm`]
/// and by contractions.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    rank: usize,
    coefficients: Vec<f64>,
}

/// Sorted multi-indices of the given rank, in lexicographic order.
pub(crate) fn multi_indices(rank: usize) -> Vec<Vec<usize>> {
    fn rec(rank: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == rank {
            out.push(cur.clone());
            return;
        }
        for mu in start..4 {
            cur.push(mu);
            rec(rank, mu, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(rank, 0, &mut Vec::with_capacity(rank), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Number of distinct permutations of a sorted multi-index.
pub(crate) fn multiplicity(idx: &[usize]) -> f64 {
    let mut counts = [0usize; 4];
    for &mu in idx {
        counts[mu] += 1;
    }
    factorial(idx.len()) / counts.iter().map(|&c| factorial(c)).product::<f64>()
}

impl SymmetricTensor {
    pub fn zeros(rank: usize) -> Self {
        let n = multi_indices(rank).len();
        SymmetricTensor {
            rank,
            coefficients: vec![0.0; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        SymmetricTensor {
            rank: 0,
            coefficients: vec![value],
        }
    }

    /// Builds a tensor from its values on sorted multi-indices.
    pub fn from_fn(rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let coefficients = multi_indices(rank).iter().map(|idx| f(idx)).collect();
        SymmetricTensor { rank, coefficients }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of independent coefficients, C(n+3, 3).
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn position(idx: &[usize]) -> usize {
        // rank ≤ 6 keeps the linear scan cheap
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        multi_indices(idx.len())
            .iter()
            .position(|m| *m == sorted)
            .expect("index components must be in 0..4")
    }

    /// Component for an arbitrary (unsorted) index tuple.
    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.rank, "index length must equal rank");
        self.coefficients[Self::position(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        assert_eq!(idx.len(), self.rank, "index length must equal rank");
        let p = Self::position(idx);
        self.coefficients[p] = value;
    }

    /// Multilinear evaluation T(v₁, …, vₙ).
    pub fn evaluate(&self, args: &[FourVector]) -> f64 {
        assert_eq!(args.len(), self.rank, "argument count must equal rank");
        if self.rank == 0 {
            return self.coefficients[0];
        }
        let comps: Vec<[f64; 4]> = args.iter().map(|v| v.components()).collect();
        let n = self.rank;
        let mut total = 0.0;
        let mut idx = vec![0usize; n];
        for (flat, coefficient) in self.full_lookup().into_iter().enumerate() {
            let mut rem = flat;
            let mut prod = 1.0;
            for (i, slot) in idx.iter_mut().enumerate() {
                *slot = rem % 4;
                rem /= 4;
                prod *= comps[i][*slot];
            }
            if prod != 0.0 {
                total += coefficient * prod;
            }
        }
        total
    }

    /// Dense 4ⁿ array, flat index Σ μᵢ 4ⁱ.
    fn full_lookup(&self) -> Vec<f64> {
        let n = self.rank;
        let positions: HashMap<Vec<usize>, usize> =
            multi_indices(n).into_iter().enumerate().map(|(i, m)| (m, i)).collect();
        (0..4usize.pow(n as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut idx: Vec<usize> = (0..n)
                    .map(|_| {
                        let mu = rem % 4;
                        rem /= 4;
                        mu
                    })
                    .collect();
                idx.sort_unstable();
                self.coefficients[positions[&idx]]
            })
            .collect()
    }

    /// T(v, …, v).
    pub fn diagonal(&self, v: &FourVector) -> f64 {
        let args = vec![*v; self.rank];
        self.evaluate(&args)
    }

    /// Pullback by a linear map: T'(v₁, …) = T(M v₁, …).
    pub fn transform(&self, m: &Matrix4<f64>) -> SymmetricTensor {
        let cols: Vec<FourVector> = (0..4)
            .map(|mu| FourVector::from_raw([m[(0, mu)], m[(1, mu)], m[(2, mu)], m[(3, mu)]]))
            .collect();
        SymmetricTensor::from_fn(self.rank, |idx| {
            let args: Vec<FourVector> = idx.iter().map(|&mu| cols[mu]).collect();
            self.evaluate(&args)
        })
    }

    /// Norm of the full 4ⁿ coefficient array.
    pub fn frobenius_norm(&self) -> f64 {
        multi_indices(self.rank)
            .iter()
            .zip(&self.coefficients)
            .map(|(idx, c)| multiplicity(idx) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, factor: f64) -> SymmetricTensor {
        SymmetricTensor {
            rank: self.rank,
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymmetricTensor) -> SymmetricTensor {
        assert_eq!(self.rank, other.rank, "rank mismatch");
        SymmetricTensor {
            rank: self.rank,
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymmetricTensor) -> SymmetricTensor {
        self.add(&other.scale(-1.0))
    }

    /// Multiplicity-weighted inner product, consistent with the Frobenius norm.
    pub fn dot(&self, other: &SymmetricTensor) -> f64 {
        assert_eq!(self.rank, other.rank, "rank mismatch");
        multi_indices(self.rank)
            .iter()
            .zip(self.coefficients.iter().zip(&other.coefficients))
            .map(|(idx, (a, b))| multiplicity(idx) * a * b)
            .sum()
    }

    /// Coefficients scaled by √multiplicity, so that Euclidean geometry on the
    /// result matches the Frobenius geometry of the full tensor.
    pub fn weighted_coefficients(&self) -> Vec<f64> {
        multi_indices(self.rank)
            .iter()
            .zip(&self.coefficients)
            .map(|(idx, c)| multiplicity(idx).sqrt() * c)
            .collect()
    }

    /// Rank-2 tensor as a symmetric matrix T_μν.
    pub fn to_matrix(&self) -> Option<Matrix4<f64>> {
        (self.rank == 2).then(|| Matrix4::from_fn(|i, j| self.get(&[i, j])))
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients.iter().all(|c| c.is_finite())
    }
}

impl Serialize for SymmetricTensor {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, f64> = multi_indices(self.rank)
            .iter()
            .zip(&self.coefficients)
            .map(|(idx, c)| (idx.iter().map(|m| m.to_string()).collect::<String>(), *c))
            .collect();
        let mut s = serializer.serialize_struct("SymmetricTensor", 2)?;
        s.serialize_field("rank", &self.rank)?;
        s.serialize_field("coefficients", &map)?;
        s.end()
    }
}

fn check_basis(basis: &[FourVector]) -> Result<Matrix4<f64>> {
    if basis.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "basis must contain 4 vectors, got {}",
            basis.len()
        )));
    }
    let b = Matrix4::from_fn(|i, a| basis[a].component(i));
    b.try_inverse()
        .ok_or_else(|| Error::InvalidInput("basis vectors are linearly dependent".into()))
}

/// Reconstructs a symmetric tensor from its diagonal restriction
/// t̃(v) = T(v, …, v) via the polarization identity
///
/// T(v₁,…,vₙ) = (1/n!) Σₖ (−1)ⁿ⁻ᵏ Σ_{|J|=k} t̃(Σ_{i∈J} vᵢ),
///
/// applied to basis vectors. Diagonal samples are memoized by the multiset of
/// basis vectors entering the sum.
pub fn try_polarization_reconstruct<F>(mut diag: F, rank: usize, basis: &[FourVector]) -> Result<SymmetricTensor>
where
    F: FnMut(&FourVector) -> Result<f64>,
{
    if rank > MAX_POLARIZATION_RANK {
        return Err(Error::InvalidInput(format!(
            "polarization rank {rank} exceeds {MAX_POLARIZATION_RANK}"
        )));
    }
    let inv = check_basis(basis)?;
    if rank == 0 {
        return Ok(SymmetricTensor::scalar(diag(&FourVector::ZERO)?));
    }

    let mut cache: HashMap<[u8; 4], f64> = HashMap::new();
    let mut sample = |counts: [u8; 4]| -> Result<f64> {
        if let Some(v) = cache.get(&counts) {
            return Ok(*v);
        }
        let v = (0..4).fold(FourVector::ZERO, |acc, a| acc + (counts[a] as f64) * basis[a]);
        let value = diag(&v)?;
        cache.insert(counts, value);
        Ok(value)
    };

    let norm = factorial(rank);
    let mut coefficients = Vec::new();
    for idx in multi_indices(rank) {
        let mut total = 0.0;
        for mask in 1u32..(1 << rank) {
            let mut counts = [0u8; 4];
            for (i, &a) in idx.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    counts[a] += 1;
                }
            }
            let k = mask.count_ones() as usize;
            let sign = if (rank - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            total += sign * sample(counts)?;
        }
        coefficients.push(total / norm);
    }
    let in_basis = SymmetricTensor { rank, coefficients };
    if basis.iter().enumerate().all(|(a, b)| *b == FourVector::basis(a)) {
        Ok(in_basis)
    } else {
        Ok(in_basis.transform(&inv))
    }
}

/// Infallible form of [`try_polarization_reconstruct`].
pub fn polarization_reconstruct<F>(mut diag: F, rank: usize, basis: &[FourVector]) -> Result<SymmetricTensor>
where
    F: FnMut(&FourVector) -> f64,
{
    try_polarization_reconstruct(|v| Ok(diag(v)), rank, basis)
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorFit {
    pub tensor: SymmetricTensor,
    /// Euclidean norm of the sample residual vector.
    pub residual: f64,
}

/// Least-squares recovery of a symmetric tensor from samples T(e, …, e) on
/// unit timelike directions. Homogeneous polynomials are determined by their
/// values on the unit hyperboloid, so a full-rank sample set pins down the
/// tensor uniquely.
pub fn tensor_from_timelike_diagonal(samples: &[(TimeDirection, f64)], rank: usize) -> Result<TensorFit> {
    let indices = multi_indices(rank);
    let unknowns = indices.len();
    if samples.is_empty() {
        return Err(Error::RankDeficient("no samples".into()));
    }
    let a = DMatrix::from_fn(samples.len(), unknowns, |row, col| {
        let e = samples[row].0.vector().components();
        let idx = &indices[col];
        multiplicity(idx) * idx.iter().map(|&mu| e[mu]).product::<f64>()
    });
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let numerical_rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    if numerical_rank < unknowns {
        return Err(Error::RankDeficient(format!(
            "{} samples determine only {numerical_rank} of {unknowns} independent rank-{rank} coefficients",
            samples.len()
        )));
    }
    let c = svd.solve(&y, cutoff).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let residual = (&a * &c - &y).norm();
    Ok(TensorFit {
        tensor: SymmetricTensor {
            rank,
            coefficients: c.iter().copied().collect(),
        },
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::minkowski_product;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standard_basis() -> Vec<FourVector> {
        (0..4).map(FourVector::basis).collect()
    }

    fn random_tensor(rng: &mut ChaCha8Rng, rank: usize) -> SymmetricTensor {
        SymmetricTensor::from_fn(rank, |_| rng.random_range(-1.0..1.0))
    }

    fn random_timelike(rng: &mut ChaCha8Rng) -> TimeDirection {
        let s: [f64; 3] = [
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        ];
        let n2: f64 = s.iter().map(|c| c * c).sum();
        TimeDirection::new(FourVector::from_raw([(1.0 + n2).sqrt(), s[0], s[1], s[2]])).unwrap()
    }

    // Independent multilinear evaluation straight from the full index sum.
    fn brute_force_eval(t: &SymmetricTensor, args: &[FourVector]) -> f64 {
        let n = args.len();
        let mut total = 0.0;
        for flat in 0..4usize.pow(n as u32) {
            let mut rem = flat;
            let mut idx = Vec::new();
            let mut prod = 1.0;
            for v in args {
                let mu = rem % 4;
                rem /= 4;
                idx.push(mu);
                prod *= v.component(mu);
            }
            idx.sort();
            let pos = multi_indices(n).iter().position(|m| *m == idx).unwrap();
            total += t.coefficients()[pos] * prod;
        }
        total
    }

    #[test]
    fn counts_and_multiplicities() {
        assert_eq!(multi_indices(0).len(), 1);
        assert_eq!(multi_indices(2).len(), 10);
        assert_eq!(multi_indices(4).len(), 35);
        assert_eq!(multiplicity(&[0, 0, 1]), 3.0);
        assert_eq!(multiplicity(&[0, 1, 2, 3]), 24.0);
        let total: f64 = multi_indices(3).iter().map(|m| multiplicity(m)).sum();
        assert_eq!(total, 64.0);
    }

    #[test]
    fn evaluation_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(&mut rng, 3);
        let v: Vec<FourVector> = (0..3)
            .map(|_| FourVector::from_raw([rng.random(), rng.random(), rng.random(), rng.random()]))
            .collect();
        let a = t.evaluate(&[v[0], v[1], v[2]]);
        let b = t.evaluate(&[v[2], v[0], v[1]]);
        assert!((a - b).abs() < 1e-14);
        assert!((a - brute_force_eval(&t, &v)).abs() < 1e-13);
    }

    #[test]
    fn metric_from_its_square() {
        let t = polarization_reconstruct(|v| v.square(), 2, &standard_basis()).unwrap();
        let u = FourVector::from_raw([0.3, 1.0, -2.0, 0.5]);
        let w = FourVector::from_raw([1.7, 0.2, 0.1, -0.4]);
        assert!((t.evaluate(&[u, w]) - minkowski_product(&u, &w)).abs() < 1e-14);
        assert_eq!(t.get(&[0, 0]), 1.0);
        assert_eq!(t.get(&[1, 1]), -1.0);
    }

    #[test]
    fn rank_one_is_identity() {
        let f = |v: &FourVector| 2.0 * v.t() - v.component(3);
        let t = polarization_reconstruct(f, 1, &standard_basis()).unwrap();
        let v = FourVector::from_raw([0.5, 9.0, 1.0, 2.0]);
        assert!((t.diagonal(&v) - f(&v)).abs() < 1e-14);
    }

    #[test]
    fn rank_three_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(&mut rng, 3);
        let r = polarization_reconstruct(|v| brute_force_eval(&t, &[*v, *v, *v]), 3, &standard_basis()).unwrap();
        assert!(r.sub(&t).max_abs() < 1e-10);
    }

    #[test]
    fn rank_guard() {
        let err = polarization_reconstruct(|_| 0.0, 7, &standard_basis()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn nonstandard_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_tensor(&mut rng, 2);
        let basis = vec![
            FourVector::from_raw([1.0, 0.2, 0.0, 0.0]),
            FourVector::from_raw([0.0, 1.0, 0.3, 0.0]),
            FourVector::from_raw([0.1, 0.0, 1.0, 0.0]),
            FourVector::from_raw([0.0, 0.0, 0.4, 1.0]),
        ];
        let r = polarization_reconstruct(|v| t.diagonal(v), 2, &basis).unwrap();
        assert!(r.sub(&t).max_abs() < 1e-12);
        assert!(polarization_reconstruct(|v| t.diagonal(v), 2, &basis[..3]).is_err());
    }

    #[test]
    fn scalar_from_single_sample() {
        let fit = tensor_from_timelike_diagonal(&[(TimeDirection::REST, 0.25)], 0).unwrap();
        assert_eq!(fit.tensor.coefficients(), &[0.25]);
    }

    #[test]
    fn metric_from_timelike_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<_> = (0..20)
            .map(|_| {
                let e = random_timelike(&mut rng);
                (e, e.vector().square())
            })
            .collect();
        let fit = tensor_from_timelike_diagonal(&samples, 2).unwrap();
        let eta = polarization_reconstruct(|v| v.square(), 2, &standard_basis()).unwrap();
        assert!(fit.tensor.sub(&eta).max_abs() < 1e-8);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn single_direction_is_rank_deficient() {
        let err = tensor_from_timelike_diagonal(&[(TimeDirection::REST, 1.0)], 2).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
    }

    #[test]
    fn timelike_fit_agrees_with_polarization() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for rank in 1..=3 {
            let t = random_tensor(&mut rng, rank);
            let samples: Vec<_> = (0..60)
                .map(|_| {
                    let e = random_timelike(&mut rng);
                    (e, t.diagonal(&e.vector()))
                })
                .collect();
            let fit = tensor_from_timelike_diagonal(&samples, rank).unwrap();
            let pol = polarization_reconstruct(|v| t.diagonal(v), rank, &standard_basis()).unwrap();
            assert!(fit.tensor.sub(&pol).max_abs() < 1e-8, "rank {rank}");
        }
    }

    #[test]
    fn frobenius_matches_full_array() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = random_tensor(&mut rng, 2);
        let m = t.to_matrix().unwrap();
        assert!((t.frobenius_norm() - m.norm()).abs() < 1e-13);
        let w: f64 = t.weighted_coefficients().iter().map(|c| c * c).sum();
        assert!((w.sqrt() - m.norm()).abs() < 1e-13);
    }
}
