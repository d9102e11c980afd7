//! Exact symmetric tensor algebra on a single fibre.
//!
//! A rank-`k` element is stored as coefficients against the symmetrised basis
//! `e^K`, indexed by nondecreasing multi-indices `K`.  The product convention
//! is the permutation sum without factorial normalisation:
//! `u₁·…·u_k = Σ_{σ} u_{σ(1)}⊗…⊗u_{σ(k)}`, so a chain product of basis
//! covectors is exactly the basis element `e^K` with coefficient one, and the
//! product of two stored tensors multiplies coefficients and merges index
//! multisets.  Repeated indices then carry multinomial weights
//! `⟨e^K, e^K⟩ = Π_a m_a!`, which are applied inside [`inner_product`] rather
//! than in storage.
//!
//! The Lorentzian fibre `F = ℝ·f ⊕ E` carries `η = −f⊗f + g`; index `0` is
//! the timelike direction `f` and indices `1..=dim_E` are an orthonormal basis
//! of `E`.  Dualisation flips the sign of the `f`-component, which is where
//! every Lorentzian sign below comes from.

use crate::exact::Exact;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    EuclideanOnE,
    LorentzianOnF,
}

/// The fibre over which tensors live: `E` of dimension `dim_e = n+1`, or the
/// Lorentzian extension `F = ℝ ⊕ E` of dimension `dim_e + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FibreSpec {
    pub dim_e: usize,
    pub signature: Signature,
}

impl FibreSpec {
    pub fn euclidean(dim_e: usize) -> Self {
        assert!(dim_e >= 1, "fibre dimension must be positive");
        FibreSpec { dim_e, signature: Signature::EuclideanOnE }
    }

    pub fn lorentzian(dim_e: usize) -> Self {
        assert!(dim_e >= 1, "fibre dimension must be positive");
        FibreSpec { dim_e, signature: Signature::LorentzianOnF }
    }

    /// Total dimension of the fibre vector space.
    pub fn dim(&self) -> usize {
        match self.signature {
            Signature::EuclideanOnE => self.dim_e,
            Signature::LorentzianOnF => self.dim_e + 1,
        }
    }

    /// Sign of the metric on basis direction `i` (`−1` only for `f`).
    pub fn eps(&self, i: usize) -> i64 {
        match self.signature {
            Signature::EuclideanOnE => 1,
            Signature::LorentzianOnF => {
                if i == 0 {
                    -1
                } else {
                    1
                }
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FibreError {
    #[error("fibre mismatch: {0:?} vs {1:?}")]
    FibreMismatch(FibreSpec, FibreSpec),
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("operation requires rank >= {needed}, got {got}")]
    RankTooLow { needed: usize, got: usize },
    #[error("operation requires the Lorentzian fibre")]
    WrongFibre,
}

/// Nondecreasing sequence of basis indices; the canonical label of a
/// symmetrised basis element.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        MultiIndex(indices)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Multiplicity of index `i`.
    pub fn multiplicity(&self, i: usize) -> usize {
        self.0.iter().filter(|&&j| j == i).count()
    }

    /// Merge with another multi-index (used by the symmetric product).
    pub fn merged(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex::new(v)
    }

    /// Remove one occurrence of `i`; `None` if absent.
    pub fn without_one(&self, i: usize) -> Option<MultiIndex> {
        let pos = self.0.iter().position(|&j| j == i)?;
        let mut v = self.0.clone();
        v.remove(pos);
        Some(MultiIndex(v))
    }

    /// Append `count` copies of `i` and resort.
    pub fn with(&self, i: usize, count: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend(std::iter::repeat(i).take(count));
        MultiIndex::new(v)
    }

    /// Π_a m_a! over the distinct indices — the diagonal weight of `e^K`.
    pub fn multinomial_weight(&self) -> u64 {
        let mut weight = 1u64;
        let mut run = 1u64;
        for w in self.0.windows(2) {
            if w[0] == w[1] {
                run += 1;
                weight *= run;
            } else {
                run = 1;
            }
        }
        weight
    }

    /// All nondecreasing multi-indices of length `rank` over `dim` symbols.
    pub fn all(dim: usize, rank: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(rank);
        fn rec(dim: usize, rank: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if current.len() == rank {
                out.push(MultiIndex(current.clone()));
                return;
            }
            for i in start..dim {
                current.push(i);
                rec(dim, rank, i, current, out);
                current.pop();
            }
        }
        rec(dim, rank, 0, &mut current, &mut out);
        out
    }
}

/// Exact symmetric tensor over a fibre.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SymTensor {
    fibre: FibreSpec,
    rank: usize,
    coeffs: BTreeMap<MultiIndex, Exact>,
}

impl SymTensor {
    pub fn zero(fibre: FibreSpec, rank: usize) -> Self {
        SymTensor { fibre, rank, coeffs: BTreeMap::new() }
    }

    /// The scalar 1 as a rank-0 tensor.
    pub fn scalar(fibre: FibreSpec, value: Exact) -> Self {
        let mut t = SymTensor::zero(fibre, 0);
        t.set(MultiIndex::empty(), value);
        t
    }

    /// Basis covector `e^i`.
    pub fn basis_covector(fibre: FibreSpec, i: usize) -> Self {
        assert!(i < fibre.dim(), "basis index out of range");
        let mut t = SymTensor::zero(fibre, 1);
        t.set(MultiIndex::new(vec![i]), Exact::one());
        t
    }

    /// Basis element `e^K` (chain product of basis covectors).
    pub fn basis_element(fibre: FibreSpec, k: MultiIndex) -> Self {
        assert!(k.indices().iter().all(|&i| i < fibre.dim()));
        let mut t = SymTensor::zero(fibre, k.len());
        t.set(k, Exact::one());
        t
    }

    /// The metric `g = ½ Σ_i e^i·e^i` (Euclidean) or `η = −f⊗f + g`
    /// (Lorentzian) as a rank-2 tensor.
    pub fn metric(fibre: FibreSpec) -> Self {
        let mut t = SymTensor::zero(fibre, 2);
        for i in 0..fibre.dim() {
            t.add_to(
                MultiIndex::new(vec![i, i]),
                Exact::from_ratio(fibre.eps(i), 2),
            );
        }
        t
    }

    pub fn fibre(&self) -> FibreSpec {
        self.fibre
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: &MultiIndex) -> Exact {
        self.coeffs.get(k).cloned().unwrap_or_else(Exact::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &Exact)> {
        self.coeffs.iter()
    }

    pub fn set(&mut self, k: MultiIndex, value: Exact) {
        assert_eq!(k.len(), self.rank, "multi-index length must equal rank");
        if value.is_zero() {
            self.coeffs.remove(&k);
        } else {
            self.coeffs.insert(k, value);
        }
    }

    pub fn add_to(&mut self, k: MultiIndex, value: Exact) {
        assert_eq!(k.len(), self.rank, "multi-index length must equal rank");
        if value.is_zero() {
            return;
        }
        let became_zero = {
            let slot = self.coeffs.entry(k.clone()).or_insert_with(Exact::zero);
            *slot += value;
            slot.is_zero()
        };
        if became_zero {
            self.coeffs.remove(&k);
        }
    }

    pub fn scale(&self, s: &Exact) -> SymTensor {
        let mut out = SymTensor::zero(self.fibre, self.rank);
        for (k, v) in &self.coeffs {
            out.set(k.clone(), s * v);
        }
        out
    }

    pub fn add(&self, other: &SymTensor) -> Result<SymTensor, FibreError> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.add_to(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SymTensor) -> Result<SymTensor, FibreError> {
        self.add(&other.scale(&Exact::from_integer(-1)))
    }

    fn compatible(&self, other: &SymTensor) -> Result<(), FibreError> {
        if self.fibre != other.fibre {
            return Err(FibreError::FibreMismatch(self.fibre, other.fibre));
        }
        if self.rank != other.rank {
            return Err(FibreError::RankMismatch(self.rank, other.rank));
        }
        Ok(())
    }
}

/// Symmetric (permutation-sum) product.
pub fn sym_product(u: &SymTensor, v: &SymTensor) -> Result<SymTensor, FibreError> {
    if u.fibre != v.fibre {
        return Err(FibreError::FibreMismatch(u.fibre, v.fibre));
    }
    let mut out = SymTensor::zero(u.fibre, u.rank + v.rank);
    for (ku, cu) in &u.coeffs {
        for (kv, cv) in &v.coeffs {
            out.add_to(ku.merged(kv), cu * cv);
        }
    }
    Ok(out)
}

/// Hook contraction `ι_u v` of a covector into a higher-rank tensor,
/// metric-adjoint to multiplication by `u`.
pub fn hook_contract(u: &SymTensor, v: &SymTensor) -> Result<SymTensor, FibreError> {
    if u.fibre != v.fibre {
        return Err(FibreError::FibreMismatch(u.fibre, v.fibre));
    }
    if u.rank != 1 {
        return Err(FibreError::RankMismatch(u.rank, 1));
    }
    if v.rank == 0 {
        return Err(FibreError::RankTooLow { needed: 1, got: 0 });
    }
    let mut out = SymTensor::zero(v.fibre, v.rank - 1);
    for (ku, cu) in &u.coeffs {
        let i = ku.indices()[0];
        let eps = Exact::from_integer(v.fibre.eps(i));
        for (kv, cv) in &v.coeffs {
            let mult = kv.multiplicity(i);
            if mult == 0 {
                continue;
            }
            let reduced = kv.without_one(i).unwrap();
            out.add_to(reduced, cu * cv * eps.clone() * Exact::from_integer(mult as i64));
        }
    }
    Ok(out)
}

/// Lefschetz raising operator `L u = Σ_i e^i·e^i·u`.
pub fn lefschetz_l(u: &SymTensor) -> SymTensor {
    let mut out = SymTensor::zero(u.fibre, u.rank + 2);
    for i in 0..u.fibre.dim() {
        for (k, v) in &u.coeffs {
            out.add_to(k.with(i, 2), v.clone());
        }
    }
    out
}

/// Lefschetz trace `Λ u = Σ_i ι_{e^i}ι_{e^i} u`, built from the
/// signature-aware hooks; since each index contributes `ε_i² = 1`, the
/// resulting coefficients are signature-free on both fibres (this is the
/// adjoint of `L` for the Lorentzian inner product, not the `η`-trace).
/// Rank below 2 is an error by design — the block assembly layer must never
/// request it.
pub fn lefschetz_trace(u: &SymTensor) -> Result<SymTensor, FibreError> {
    if u.rank < 2 {
        return Err(FibreError::RankTooLow { needed: 2, got: u.rank });
    }
    let mut out = SymTensor::zero(u.fibre, u.rank - 2);
    for (k, v) in &u.coeffs {
        for i in 0..u.fibre.dim() {
            let m = k.multiplicity(i);
            if m < 2 {
                continue;
            }
            // ι_{e^i}ι_{e^i} contributes ε_i²·m(m−1) = m(m−1).
            let reduced = k.without_one(i).unwrap().without_one(i).unwrap();
            let factor = Exact::from_integer((m * (m - 1)) as i64);
            out.add_to(reduced, v * &factor);
        }
    }
    Ok(out)
}

/// Induced inner product: `⟨u₁·…·u_k, v₁·…·v_k⟩ = Σ_σ Π_i g⁻¹(u_i, v_σ(i))`.
/// On the stored basis this is diagonal with multinomial weights and the
/// Lorentzian sign `(−1)^{m_f}`.
pub fn inner_product(u: &SymTensor, v: &SymTensor) -> Result<Exact, FibreError> {
    u.compatible(v)?;
    let mut acc = Exact::zero();
    for (k, cu) in &u.coeffs {
        if let Some(cv) = v.coeffs.get(k) {
            let mut weight = Exact::from_integer(k.multinomial_weight() as i64);
            if u.fibre.signature == Signature::LorentzianOnF && k.multiplicity(0) % 2 == 1 {
                weight = -weight;
            }
            acc += cu * cv * weight;
        }
    }
    Ok(acc)
}

/// The list `(u^{(0)},…,u^{(m)})` with `u = Σ_k a_k f^{m−k}·u^{(k)}`,
/// `a_k = 1/√((m−k)!)`, components over the Euclidean fibre `E`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LorentzDecomposition {
    pub m: usize,
    pub components: Vec<SymTensor>,
}

impl LorentzDecomposition {
    pub fn zero(dim_e: usize, m: usize) -> Self {
        let fibre_e = FibreSpec::euclidean(dim_e);
        LorentzDecomposition {
            m,
            components: (0..=m).map(|k| SymTensor::zero(fibre_e, k)).collect(),
        }
    }

    pub fn component(&self, k: usize) -> &SymTensor {
        &self.components[k]
    }

    pub fn dim_e(&self) -> usize {
        self.components[0].fibre().dim_e
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Shift a multi-index over `F` (indices `1..=dim_e` are `E`) down to `E`.
fn shift_down(k: &MultiIndex) -> MultiIndex {
    MultiIndex::new(k.indices().iter().map(|&i| i - 1).collect())
}

fn shift_up(k: &MultiIndex) -> MultiIndex {
    MultiIndex::new(k.indices().iter().map(|&i| i + 1).collect())
}

/// Split `u ∈ Sym^m F*` into its Minkowski-scale components.
pub fn lorentz_decompose(u: &SymTensor) -> Result<LorentzDecomposition, FibreError> {
    if u.fibre.signature != Signature::LorentzianOnF {
        return Err(FibreError::WrongFibre);
    }
    let m = u.rank;
    let mut d = LorentzDecomposition::zero(u.fibre.dim_e, m);
    for (key, v) in &u.coeffs {
        let f_count = key.multiplicity(0);
        let k = m - f_count;
        // u_K = a_k·u^{(k)}_I with a_k = 1/√((m−k)!), so u^{(k)}_I = √((m−k)!)·u_K.
        let scale = Exact::sqrt_of(factorial(f_count));
        let e_part = shift_down(&MultiIndex::new(
            key.indices().iter().copied().filter(|&i| i != 0).collect(),
        ));
        d.components[k].add_to(e_part, v * &scale);
    }
    Ok(d)
}

/// Reassemble `u = Σ_k a_k f^{m−k}·u^{(k)}`; exact inverse of
/// [`lorentz_decompose`].
pub fn lorentz_compose(d: &LorentzDecomposition) -> SymTensor {
    let fibre_f = FibreSpec::lorentzian(d.dim_e());
    let mut u = SymTensor::zero(fibre_f, d.m);
    for (k, comp) in d.components.iter().enumerate() {
        let f_count = d.m - k;
        let a_k = Exact::sqrt_of(factorial(f_count))
            .invert_single_term()
            .expect("a_k is a single radical term");
        for (key, v) in &comp.coeffs {
            let full = shift_up(key).with(0, f_count);
            u.add_to(full, v * &a_k);
        }
    }
    u
}

/// Outcome of the trace-free component check: either all relations
/// `Λ u^{(k)} = −√((m−k+2)(m−k+1))·u^{(k−2)}` hold, or the first violated `k`
/// is reported.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceFreeWitness {
    Holds,
    ViolatedAt(usize),
}

impl TraceFreeWitness {
    pub fn holds(&self) -> bool {
        matches!(self, TraceFreeWitness::Holds)
    }
}

/// Check the component form of fibre trace-freeness: `trace_F u = 0` iff
/// `Λ u^{(k)} = −b_{k−2}b_{k−1} u^{(k−2)}` for all `k ≥ 2`, with
/// `b_{k−2}b_{k−1} = √((m−k+2)(m−k+1))` exactly representable.
pub fn check_tracefree_relation(d: &LorentzDecomposition) -> TraceFreeWitness {
    let m = d.m;
    for k in 2..=m {
        let lhs = lefschetz_trace(&d.components[k]).expect("rank k >= 2");
        let b_product = Exact::sqrt_of(((m - k + 2) * (m - k + 1)) as u64);
        let rhs = d.components[k - 2].scale(&(-b_product));
        if lhs != rhs {
            return TraceFreeWitness::ViolatedAt(k);
        }
    }
    TraceFreeWitness::Holds
}

// --- JSON serialization ------------------------------------------------

/// One `(indices, numerator, denominator, radicand)` row of the interchange
/// schema.  Coefficients with several radical terms emit one row per term.
#[derive(Serialize, Deserialize)]
struct EntryRow(Vec<usize>, String, String, u64);

#[derive(Serialize, Deserialize)]
struct SymTensorSchema {
    fibre: FibreSpec,
    rank: usize,
    entries: Vec<EntryRow>,
}

impl Serialize for SymTensor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut entries = Vec::new();
        for (k, v) in &self.coeffs {
            for (radicand, q) in v.terms() {
                entries.push(EntryRow(
                    k.indices().to_vec(),
                    q.numer().to_string(),
                    q.denom().to_string(),
                    radicand,
                ));
            }
        }
        SymTensorSchema { fibre: self.fibre, rank: self.rank, entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymTensor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let schema = SymTensorSchema::deserialize(deserializer)?;
        let mut t = SymTensor::zero(schema.fibre, schema.rank);
        for EntryRow(indices, num, den, radicand) in schema.entries {
            let num: num::BigInt = num.parse().map_err(D::Error::custom)?;
            let den: num::BigInt = den.parse().map_err(D::Error::custom)?;
            if den == num::BigInt::from(0) {
                return Err(D::Error::custom("zero denominator"));
            }
            let coeff = Exact::from_rational(num::BigRational::new(num, den))
                * Exact::sqrt_of(radicand);
            t.add_to(MultiIndex::new(indices), coeff);
        }
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
struct DecompositionSchema {
    m: usize,
    components: Vec<SymTensor>,
}

impl Serialize for LorentzDecomposition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DecompositionSchema { m: self.m, components: self.components.clone() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LorentzDecomposition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let schema = DecompositionSchema::deserialize(deserializer)?;
        if schema.components.len() != schema.m + 1 {
            return Err(D::Error::custom("decomposition needs m+1 components"));
        }
        for (k, c) in schema.components.iter().enumerate() {
            if c.rank() != k {
                return Err(D::Error::custom("component k must have rank k"));
            }
        }
        Ok(LorentzDecomposition { m: schema.m, components: schema.components })
    }
}
