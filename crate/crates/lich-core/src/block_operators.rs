//! Symbolic assembly of the conjugated d'Alembertian as a block operator.
//!
//! Blocks are kept as formal sums of operator symbols with coefficients that
//! are polynomials in λ over ℚ[√2, …]; they are bound to discrete
//! realizations only in `model_geometry` / `resonator`, so every structural
//! identity here is checkable exactly.
//!
//! Grid convention: `blocks[row][col]` is the contribution of the rank-`col`
//! component `u^{(col)}` to the rank-`row` output slot, with ranks increasing
//! `0..=m`.  Pretty-printing and fixtures use the decreasing presentation
//! `(u^{(m)},…,u^{(0)})` common in displays of the m = 2 case.

use crate::exact::Exact;
use nalgebra::{DMatrix, DVector};
use num::bigint::BigInt;
use num::rational::BigRational;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("indicial substitution applied twice")]
    DoubleSubstitution,
    #[error("operation requires flavor {expected:?}, got {got:?}")]
    WrongFlavor { expected: Flavor, got: Flavor },
    #[error("singular intermediate inverse in decoupling at mode k = {0}")]
    SingularAt(usize),
}

fn big(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

// --- constants ---------------------------------------------------------

/// Exact table of the fibre constants for rank `m` over boundary dimension
/// `n`: `a_k = 1/√((m−k)!)` stored as `a_k²`, `b_k = √(m−k)` stored as
/// `b_k²`, and the diagonal constants `c_k`, `c_k′`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantTable {
    pub m: usize,
    pub n: i64,
    a_sq: Vec<BigRational>,
    b_sq: Vec<BigRational>,
    c: Vec<BigRational>,
    c_prime: Vec<BigRational>,
}

/// `c_k = n²/4 + m(n+2k+1) − k(2n+3k−1)` and `c_k′ = c_k − (m−k)(m−k−1)`.
pub fn constants(m: usize, n: i64) -> ConstantTable {
    assert!(n >= 1, "boundary dimension must be >= 1");
    let mut a_sq = Vec::with_capacity(m + 1);
    let mut b_sq = Vec::with_capacity(m + 1);
    let mut c = Vec::with_capacity(m + 1);
    let mut c_prime = Vec::with_capacity(m + 1);
    for k in 0..=m {
        a_sq.push(big(1) / big(factorial(m - k) as i64));
        b_sq.push(big((m - k) as i64));
        let ki = k as i64;
        let mi = m as i64;
        let ck = big(n * n) / big(4) + big(mi * (n + 2 * ki + 1)) - big(ki * (2 * n + 3 * ki - 1));
        let correction = big((mi - ki) * (mi - ki - 1));
        c_prime.push(ck.clone() - correction);
        c.push(ck);
    }
    ConstantTable { m, n, a_sq, b_sq, c, c_prime }
}

impl ConstantTable {
    pub fn a_sq(&self, k: usize) -> &BigRational {
        &self.a_sq[k]
    }

    pub fn b_sq(&self, k: usize) -> &BigRational {
        &self.b_sq[k]
    }

    /// `b_k` as an exact radical.
    pub fn b(&self, k: usize) -> Exact {
        Exact::sqrt_of((self.m - k) as u64)
    }

    /// The product `b_{k−2}b_{k−1} = √((m−k+2)(m−k+1))` entering the trace
    /// relation; exact as a single radical.
    pub fn b_product(&self, k: usize) -> Exact {
        Exact::sqrt_of(((self.m - k + 2) * (self.m - k + 1)) as u64)
    }

    pub fn c(&self, k: usize) -> &BigRational {
        &self.c[k]
    }

    pub fn c_prime(&self, k: usize) -> &BigRational {
        &self.c_prime[k]
    }

    pub fn c_exact(&self, k: usize) -> Exact {
        Exact::from_rational(self.c[k].clone())
    }

    pub fn c_prime_exact(&self, k: usize) -> Exact {
        Exact::from_rational(self.c_prime[k].clone())
    }
}

// --- λ-polynomials -----------------------------------------------------

/// Polynomial in λ with coefficients in ℚ[√2, …]; degree ≤ 2 throughout the
/// assembled operators.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct LambdaPoly(Vec<Exact>);

impl LambdaPoly {
    pub fn zero() -> Self {
        LambdaPoly(Vec::new())
    }

    pub fn constant(c: Exact) -> Self {
        let mut p = LambdaPoly(vec![c]);
        p.trim();
        p
    }

    /// The monomial `c·λ^deg`.
    pub fn monomial(c: Exact, deg: usize) -> Self {
        let mut coeffs = vec![Exact::zero(); deg + 1];
        coeffs[deg] = c;
        let mut p = LambdaPoly(coeffs);
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.0.last().map_or(false, Exact::is_zero) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    pub fn coeffs(&self) -> &[Exact] {
        &self.0
    }

    pub fn add(&self, other: &LambdaPoly) -> LambdaPoly {
        let mut coeffs = vec![Exact::zero(); self.0.len().max(other.0.len())];
        for (i, c) in self.0.iter().enumerate() {
            coeffs[i] += c.clone();
        }
        for (i, c) in other.0.iter().enumerate() {
            coeffs[i] += c.clone();
        }
        let mut p = LambdaPoly(coeffs);
        p.trim();
        p
    }

    pub fn mul(&self, other: &LambdaPoly) -> LambdaPoly {
        if self.is_zero() || other.is_zero() {
            return LambdaPoly::zero();
        }
        let mut coeffs = vec![Exact::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        let mut p = LambdaPoly(coeffs);
        p.trim();
        p
    }

    pub fn scale(&self, s: &Exact) -> LambdaPoly {
        let mut p = LambdaPoly(self.0.iter().map(|c| c * s).collect());
        p.trim();
        p
    }

    /// `p(λ) ↦ p(−λ)`: the coefficient transform realizing `λ ↦ −λ̄` on
    /// real-coefficient polynomials at the symbol level.
    pub fn reflect(&self) -> LambdaPoly {
        let mut p = LambdaPoly(
            self.0
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c.clone() } else { c.clone() })
                .collect(),
        );
        p.trim();
        p
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.0.iter().rev() {
            acc = acc * lambda + Complex64::new(c.to_f64(), 0.0);
        }
        acc
    }
}

// --- operator symbols --------------------------------------------------

/// Operator alphabet appearing in the blocks.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    /// Lichnerowicz Laplacian Δ.
    Lich,
    /// Rough Laplacian ∇*∇.
    Rough,
    /// Symmetric differential d.
    SymDiff,
    /// Divergence div.
    Div,
    /// Lefschetz trace Λ.
    Trace,
    /// Lefschetz raising L.
    LefL,
    /// Composite LΛ.
    LL,
    /// Identity.
    Id,
}

impl Tag {
    /// Rank shift (output − input) of the realized operator.
    pub fn rank_shift(&self) -> i64 {
        match self {
            Tag::Lich | Tag::Rough | Tag::Id | Tag::LL => 0,
            Tag::SymDiff => 1,
            Tag::Div => -1,
            Tag::Trace => -2,
            Tag::LefL => 2,
        }
    }

    fn display(&self) -> &'static str {
        match self {
            Tag::Lich => "Δ",
            Tag::Rough => "∇*∇",
            Tag::SymDiff => "d",
            Tag::Div => "div",
            Tag::Trace => "Λ",
            Tag::LefL => "L",
            Tag::LL => "LΛ",
            Tag::Id => "1",
        }
    }
}

/// One term of a block: `coeff(λ)·(s∂s)^euler_pow·tag`.
#[derive(Clone, PartialEq, Debug)]
pub struct Term {
    pub tag: Tag,
    pub euler_pow: u32,
    pub coeff: LambdaPoly,
}

/// A formal sum of terms, kept in canonical (sorted, merged) form.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct BlockEntry {
    terms: Vec<Term>,
}

impl BlockEntry {
    pub fn zero() -> Self {
        BlockEntry { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn push(&mut self, term: Term) {
        if term.coeff.is_zero() {
            return;
        }
        if let Some(existing) = self
            .terms
            .iter_mut()
            .find(|t| t.tag == term.tag && t.euler_pow == term.euler_pow)
        {
            existing.coeff = existing.coeff.add(&term.coeff);
        } else {
            self.terms.push(term);
        }
        self.terms.retain(|t| !t.coeff.is_zero());
        self.terms.sort_by_key(|t| (t.tag, t.euler_pow));
    }

    fn map_terms(&self, f: impl Fn(&Term) -> Term) -> BlockEntry {
        let mut out = BlockEntry::zero();
        for t in &self.terms {
            out.push(f(t));
        }
        out
    }
}

impl fmt::Display for BlockEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for t in &self.terms {
            let mut s = String::new();
            let coeffs = t.coeff.coeffs();
            let poly = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| match i {
                    0 => format!("{}", c),
                    1 => format!("{}·λ", c),
                    _ => format!("{}·λ^{}", c, i),
                })
                .collect::<Vec<_>>()
                .join(" + ");
            if coeffs.len() > 1 {
                s.push_str(&format!("({})", poly));
            } else {
                s.push_str(&poly);
            }
            if t.euler_pow > 0 {
                s.push_str(&format!("·(s∂s)^{}", t.euler_pow));
            }
            if t.tag != Tag::Id {
                s.push_str(&format!("·{}", t.tag.display()));
            }
            parts.push(s);
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    AmbientQ,
    IndicialQ,
    IndicialQTracefree,
}

/// (m+1)×(m+1) grid of formal operator expressions.
#[derive(Clone, PartialEq, Debug)]
pub struct BlockOperator {
    pub m: usize,
    pub n: i64,
    pub flavor: Flavor,
    blocks: Vec<Vec<BlockEntry>>,
}

impl BlockOperator {
    fn empty(m: usize, n: i64, flavor: Flavor) -> Self {
        BlockOperator {
            m,
            n,
            flavor,
            blocks: vec![vec![BlockEntry::zero(); m + 1]; m + 1],
        }
    }

    pub fn block(&self, row: usize, col: usize) -> &BlockEntry {
        &self.blocks[row][col]
    }

    fn push(&mut self, row: usize, col: usize, term: Term) {
        self.blocks[row][col].push(term);
    }

    /// Largest |row−col| with a nonzero block.
    pub fn bandwidth(&self) -> usize {
        let mut band = 0;
        for r in 0..=self.m {
            for c in 0..=self.m {
                if !self.blocks[r][c].is_zero() {
                    band = band.max(r.abs_diff(c));
                }
            }
        }
        band
    }

    /// Text rendering in the decreasing-rank presentation of the matrix
    /// displays: row i / column j correspond to components m−i / m−j.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for i in 0..=self.m {
            let row: Vec<String> = (0..=self.m)
                .map(|j| format!("{}", self.blocks[self.m - i][self.m - j]))
                .collect();
            out.push_str(&format!("[ {} ]\n", row.join(" | ")));
        }
        out
    }
}

/// Assemble the ambient operator `𝐐` for rank `m` over boundary dimension
/// `n`: pentadiagonal, with column `k` carrying
/// `(−b_k b_{k+1} L, 2b_k d, Δ+(s∂s)²−c_k−LΛ, −2b_{k−1}div, −b_{k−2}b_{k−1}Λ)`
/// in rows `k+2..k−2`.  The diagonal `−LΛ` is present only for `k ≥ 2`
/// (Λ annihilates ranks 0 and 1, and the assembly never emits it there).
pub fn assemble_ambient_q(m: usize, n: i64) -> BlockOperator {
    let table = constants(m, n);
    let mut b = BlockOperator::empty(m, n, Flavor::AmbientQ);
    let one = || LambdaPoly::constant(Exact::one());
    for k in 0..=m {
        // Diagonal: Δ + (s∂s)² − c_k − LΛ.
        b.push(k, k, Term { tag: Tag::Lich, euler_pow: 0, coeff: one() });
        b.push(k, k, Term { tag: Tag::Id, euler_pow: 2, coeff: one() });
        b.push(
            k,
            k,
            Term { tag: Tag::Id, euler_pow: 0, coeff: LambdaPoly::constant(-table.c_exact(k)) },
        );
        if k >= 2 {
            b.push(
                k,
                k,
                Term { tag: Tag::LL, euler_pow: 0, coeff: LambdaPoly::constant(-Exact::one()) },
            );
        }
        // Up-one: 2b_k d.
        if k + 1 <= m {
            let coeff = Exact::from_integer(2) * table.b(k);
            b.push(k + 1, k, Term { tag: Tag::SymDiff, euler_pow: 0, coeff: LambdaPoly::constant(coeff) });
        }
        // Up-two: −b_k b_{k+1} L.
        if k + 2 <= m {
            let coeff = -Exact::sqrt_of(((m - k) * (m - k - 1)) as u64);
            b.push(k + 2, k, Term { tag: Tag::LefL, euler_pow: 0, coeff: LambdaPoly::constant(coeff) });
        }
        // Down-one: −2b_{k−1} div.
        if k >= 1 {
            let coeff = -(Exact::from_integer(2) * table.b(k - 1));
            b.push(k - 1, k, Term { tag: Tag::Div, euler_pow: 0, coeff: LambdaPoly::constant(coeff) });
        }
        // Down-two: −b_{k−2}b_{k−1} Λ.
        if k >= 2 {
            let coeff = -table.b_product(k);
            b.push(k - 2, k, Term { tag: Tag::Trace, euler_pow: 0, coeff: LambdaPoly::constant(coeff) });
        }
    }
    b
}

/// Replace every Euler symbol `s∂s` by `−λ`, producing the indicial family.
pub fn indicial_substitute(b: &BlockOperator) -> Result<BlockOperator, BlockError> {
    if b.flavor != Flavor::AmbientQ {
        return Err(BlockError::DoubleSubstitution);
    }
    let mut out = BlockOperator::empty(b.m, b.n, Flavor::IndicialQ);
    for r in 0..=b.m {
        for c in 0..=b.m {
            for t in b.blocks[r][c].terms() {
                // (s∂s)^e ↦ (−λ)^e.
                let sign = if t.euler_pow % 2 == 1 { -Exact::one() } else { Exact::one() };
                let factor = LambdaPoly::monomial(sign, t.euler_pow as usize);
                out.push(r, c, Term { tag: t.tag, euler_pow: 0, coeff: t.coeff.mul(&factor) });
            }
        }
    }
    Ok(out)
}

/// Eliminate `L` and `Λ` blocks using the trace relation
/// `Λu^{(k)} = −b_{k−2}b_{k−1}u^{(k−2)}`, yielding the tridiagonal
/// trace-free flavor with diagonal constants `c_k′`.
pub fn restrict_tracefree(b: &BlockOperator) -> Result<BlockOperator, BlockError> {
    if b.flavor != Flavor::IndicialQ {
        return Err(BlockError::WrongFlavor { expected: Flavor::IndicialQ, got: b.flavor });
    }
    let table = constants(b.m, b.n);
    let mut out = BlockOperator::empty(b.m, b.n, Flavor::IndicialQTracefree);
    for r in 0..=b.m {
        for c in 0..=b.m {
            for t in b.blocks[r][c].terms() {
                match t.tag {
                    Tag::Trace => {
                        // αΛu^{(c)} = −α·b_{c−2}b_{c−1}·u^{(c−2)}.
                        debug_assert!(c >= 2 && r == c - 2);
                        let coeff = t.coeff.scale(&-table.b_product(c));
                        out.push(r, c - 2, Term { tag: Tag::Id, euler_pow: 0, coeff });
                    }
                    Tag::LL => {
                        // αLΛu^{(r)} = −α·b_{r−2}b_{r−1}·L u^{(r−2)}.
                        debug_assert!(r >= 2 && r == c);
                        let coeff = t.coeff.scale(&-table.b_product(r));
                        out.push(r, r - 2, Term { tag: Tag::LefL, euler_pow: 0, coeff });
                    }
                    _ => out.push(r, c, t.clone()),
                }
            }
        }
    }
    // The rewritten LefL contributions must cancel the original up-two
    // blocks; afterwards the grid is tridiagonal and free of L, Λ, LΛ.
    for r in 0..=b.m {
        for c in 0..=b.m {
            for t in out.blocks[r][c].terms() {
                assert!(
                    !matches!(t.tag, Tag::Trace | Tag::LefL | Tag::LL),
                    "trace-free restriction left a Lefschetz symbol at ({r},{c})"
                );
            }
        }
    }
    assert!(out.bandwidth() <= 1, "trace-free flavor must be tridiagonal");
    Ok(out)
}

/// Formal block adjoint with respect to the signed inner product
/// `Σ_k (−1)^{m−k}⟨·,·⟩`: transpose the grid, swap d ↔ div with sign −1,
/// swap L ↔ Λ, and send λ ↦ −λ̄ (reflection of the real-coefficient
/// polynomials).  For a correctly assembled family the result equals the
/// assembly at −λ̄.
pub fn adjoint_pattern(b: &BlockOperator) -> Result<BlockOperator, BlockError> {
    if b.flavor == Flavor::AmbientQ {
        return Err(BlockError::WrongFlavor { expected: Flavor::IndicialQ, got: b.flavor });
    }
    let mut out = BlockOperator::empty(b.m, b.n, b.flavor);
    for r in 0..=b.m {
        for c in 0..=b.m {
            for t in b.blocks[r][c].terms() {
                let (tag, sign) = match t.tag {
                    Tag::SymDiff => (Tag::Div, -1),
                    Tag::Div => (Tag::SymDiff, -1),
                    Tag::Trace => (Tag::LefL, 1),
                    Tag::LefL => (Tag::Trace, 1),
                    Tag::LL => (Tag::LL, 1),
                    other => (other, 1),
                };
                let mut coeff = t.coeff.reflect();
                if sign < 0 {
                    coeff = coeff.scale(&-Exact::one());
                }
                out.push(c, r, Term { tag, euler_pow: t.euler_pow, coeff });
            }
        }
    }
    Ok(out)
}

/// The same family with λ replaced by −λ, for symbol-level adjoint checks.
pub fn substitute_lambda_neg(b: &BlockOperator) -> BlockOperator {
    let mut out = BlockOperator::empty(b.m, b.n, b.flavor);
    for r in 0..=b.m {
        for c in 0..=b.m {
            out.blocks[r][c] = b.blocks[r][c].map_terms(|t| Term {
                tag: t.tag,
                euler_pow: t.euler_pow,
                coeff: t.coeff.reflect(),
            });
        }
    }
    out
}

// --- change of scale ---------------------------------------------------

/// The unipotent change-of-scale endomorphism `J`: the entry mapping
/// component `k` into component `k+j` is `binom(m−k, j)·a_k/a_{k+j}`
/// attached to `(dρ/ρ)^j`.
#[derive(Clone, PartialEq, Debug)]
pub struct ScaleChange {
    pub m: usize,
    /// `entries[k][j]` is the coefficient of the map `k → k+j`.
    entries: Vec<Vec<Exact>>,
}

pub fn build_scale_change(m: usize) -> ScaleChange {
    let mut entries = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut row = Vec::with_capacity(m - k + 1);
        for j in 0..=(m - k) {
            // a_k/a_{k+j} = √((m−k−j)!/(m−k)!) = 1/√((m−k)(m−k−1)…(m−k−j+1)).
            let falling: u64 = (0..j).map(|i| (m - k - i) as u64).product();
            let ratio = if j == 0 {
                Exact::one()
            } else {
                Exact::sqrt_of(falling).invert_single_term().expect("single radical")
            };
            row.push(Exact::from_integer(binomial(m - k, j) as i64) * ratio);
        }
        entries.push(row);
    }
    ScaleChange { m, entries }
}

impl ScaleChange {
    /// Coefficient of the map from component `source` to `target ≥ source`
    /// (attached to `(dρ/ρ)^{target−source}`).
    pub fn entry(&self, source: usize, target: usize) -> Exact {
        if target < source || target > self.m {
            return Exact::zero();
        }
        self.entries[source][target - source].clone()
    }

    /// Exact inverse by unipotent back-substitution.
    pub fn inverse(&self) -> ScaleChange {
        let m = self.m;
        // Solve B·A = Id over targets: B[l][s] = −Σ_{t=s+1..l} B[l][t]·A[t][s].
        let mut inv = vec![vec![Exact::zero(); m + 1]; m + 1];
        for l in 0..=m {
            inv[l][l] = Exact::one();
            for s in (0..l).rev() {
                let mut acc = Exact::zero();
                for t in (s + 1)..=l {
                    acc += inv[l][t].clone() * self.entry(s, t);
                }
                inv[l][s] = -acc;
            }
        }
        let entries = (0..=m)
            .map(|k| (0..=(m - k)).map(|j| inv[k + j][k].clone()).collect())
            .collect();
        ScaleChange { m, entries }
    }

    /// Composition `self ∘ other` (both as maps on decompositions).
    pub fn compose(&self, other: &ScaleChange) -> ScaleChange {
        assert_eq!(self.m, other.m);
        let m = self.m;
        let entries = (0..=m)
            .map(|k| {
                (0..=(m - k))
                    .map(|j| {
                        let mut acc = Exact::zero();
                        for t in k..=(k + j) {
                            acc += self.entry(t, k + j) * other.entry(k, t);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        ScaleChange { m, entries }
    }

    pub fn is_identity(&self) -> bool {
        (0..=self.m).all(|k| {
            (0..=(self.m - k)).all(|j| {
                let e = &self.entries[k][j];
                if j == 0 {
                    *e == Exact::one()
                } else {
                    e.is_zero()
                }
            })
        })
    }
}

// --- decoupling --------------------------------------------------------

/// Discrete realizations needed by the decoupling recursion:
/// `lap[k]` realizes Δ on rank-k fields, `d[k]` maps rank k → k+1,
/// `div[k]` maps rank k+1 → k, and `weights[k]` is the quadrature weight
/// vector defining the L² norms.
pub struct DecoupleOps {
    pub lap: Vec<DMatrix<Complex64>>,
    pub d: Vec<DMatrix<Complex64>>,
    pub div: Vec<DMatrix<Complex64>>,
    pub weights: Vec<DVector<f64>>,
}

impl DecoupleOps {
    pub fn norm(&self, k: usize, v: &DVector<Complex64>) -> f64 {
        v.iter()
            .zip(self.weights[k].iter())
            .map(|(z, w)| z.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// Result of the decoupled solve with input `(0,…,0,f)`.
pub struct DecoupleReport {
    /// Components `u^{(0)},…,u^{(m)}`.
    pub u: Vec<DVector<Complex64>>,
    /// `Σ_{k<m} ‖u^{(k)}‖`.
    pub lower_norm: f64,
    pub f_norm: f64,
    /// Relative residual of `(Δ+λ²−c_m)u^{(m)} = f`.
    pub residual: f64,
    /// Verdict at the configured tolerance.
    pub pass: bool,
}

pub const DECOUPLE_DEFAULT_TOL: f64 = 1e-8;

/// Build the resolvent chain `ℛ^{(0)},…,ℛ^{(m−1)}`, solve the tridiagonal
/// system bottom-up for trace-free divergence-free data `f` in the top rank,
/// and certify that the lower components vanish within tolerance while
/// `(Δ+λ²−c_m)u^{(m)} = f`.
pub fn decouple(
    table: &ConstantTable,
    lambda: Complex64,
    ops: &DecoupleOps,
    f: &DVector<Complex64>,
    tol: f64,
) -> Result<DecoupleReport, BlockError> {
    let m = table.m;
    assert_eq!(ops.lap.len(), m + 1);
    let lam2 = lambda * lambda;
    let shift = |k: usize, c: &BigRational| {
        let c = crate::exact::rational_to_f64(c);
        let n = ops.lap[k].nrows();
        &ops.lap[k] + DMatrix::<Complex64>::identity(n, n) * (lam2 - Complex64::new(c, 0.0))
    };

    // Resolvent chain.
    let mut resolvents: Vec<DMatrix<Complex64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut mat = shift(k, table.c_prime(k));
        if k > 0 {
            let corr = &ops.d[k - 1] * &resolvents[k - 1] * &ops.div[k - 1];
            mat += corr * Complex64::new(4.0 * (m - k + 1) as f64, 0.0);
        }
        let inv = mat.try_inverse().ok_or(BlockError::SingularAt(k))?;
        resolvents.push(inv);
    }

    // Top-rank solve: (Δ + λ² − c_m + 4 dℛ^{(m−1)}div)u^{(m)} = f.
    let mut top = shift(m, table.c(m));
    if m > 0 {
        let corr = &ops.d[m - 1] * &resolvents[m - 1] * &ops.div[m - 1];
        top += corr * Complex64::new(4.0, 0.0);
    }
    let top_inv = top.try_inverse().ok_or(BlockError::SingularAt(m))?;
    let u_m = &top_inv * f;

    // Downward chain: u^{(k)} = 2b_k ℛ^{(k)} div u^{(k+1)}.
    let mut u = vec![DVector::<Complex64>::zeros(0); m + 1];
    u[m] = u_m;
    for k in (0..m).rev() {
        let b_k = ((m - k) as f64).sqrt();
        u[k] = (&resolvents[k] * (&ops.div[k] * &u[k + 1])) * Complex64::new(2.0 * b_k, 0.0);
    }

    let f_norm = ops.norm(m, f);
    let lower_norm: f64 = (0..m).map(|k| ops.norm(k, &u[k])).sum();
    let residual_vec = shift(m, table.c(m)) * &u[m] - f;
    let residual = ops.norm(m, &residual_vec) / f_norm.max(f64::MIN_POSITIVE);
    let pass = lower_norm <= tol * f_norm;
    Ok(DecoupleReport { u, lower_norm, f_norm, residual, pass })
}

// --- JSON --------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermSchema {
    tag: Tag,
    euler_pow: u32,
    /// Per λ-degree list of `(numerator, denominator, radicand)` triples.
    coeff_poly: Vec<Vec<(String, String, u64)>>,
}

#[derive(Serialize, Deserialize)]
struct BlockSchema {
    row: usize,
    col: usize,
    terms: Vec<TermSchema>,
}

#[derive(Serialize, Deserialize)]
struct BlockOperatorSchema {
    rows: usize,
    cols: usize,
    m: usize,
    n: i64,
    flavor: Flavor,
    blocks: Vec<BlockSchema>,
}

impl Serialize for BlockOperator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut blocks = Vec::new();
        for r in 0..=self.m {
            for c in 0..=self.m {
                if self.blocks[r][c].is_zero() {
                    continue;
                }
                let terms = self.blocks[r][c]
                    .terms()
                    .iter()
                    .map(|t| TermSchema {
                        tag: t.tag,
                        euler_pow: t.euler_pow,
                        coeff_poly: t
                            .coeff
                            .coeffs()
                            .iter()
                            .map(|c| {
                                c.terms()
                                    .map(|(rad, q)| {
                                        (q.numer().to_string(), q.denom().to_string(), rad)
                                    })
                                    .collect()
                            })
                            .collect(),
                    })
                    .collect();
                blocks.push(BlockSchema { row: r, col: c, terms });
            }
        }
        BlockOperatorSchema {
            rows: self.m + 1,
            cols: self.m + 1,
            m: self.m,
            n: self.n,
            flavor: self.flavor,
            blocks,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BlockOperator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let schema = BlockOperatorSchema::deserialize(deserializer)?;
        let mut out = BlockOperator::empty(schema.m, schema.n, schema.flavor);
        for b in schema.blocks {
            for t in b.terms {
                let mut poly = LambdaPoly::zero();
                for (deg, terms) in t.coeff_poly.iter().enumerate() {
                    let mut coeff = Exact::zero();
                    for (num, den, rad) in terms {
                        let num: BigInt = num.parse().map_err(D::Error::custom)?;
                        let den: BigInt = den.parse().map_err(D::Error::custom)?;
                        coeff += Exact::from_rational(BigRational::new(num, den))
                            * Exact::sqrt_of(*rad);
                    }
                    poly = poly.add(&LambdaPoly::monomial(Exact::one(), deg).scale(&coeff));
                }
                out.push(b.row, b.col, Term { tag: t.tag, euler_pow: t.euler_pow, coeff: poly });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_m2_match_closed_forms() {
        // c_2 = n(n−8)/4, c_1 = (n²+16)/4, c_0 = (n²+8n+8)/4, c_0′ = (n²+8n)/4,
        // symbolically in n (checked across a range large enough to pin the
        // degree-2 polynomials).
        for n in 1..=12 {
            let t = constants(2, n);
            assert_eq!(t.c(2), &(big(n * (n - 8)) / big(4)));
            assert_eq!(t.c(1), &(big(n * n + 16) / big(4)));
            assert_eq!(t.c(0), &(big(n * n + 8 * n + 8) / big(4)));
            assert_eq!(t.c_prime(0), &(big(n * n + 8 * n) / big(4)));
            assert_eq!(t.c_prime(1), t.c(1));
            assert_eq!(t.c_prime(2), t.c(2));
        }
    }

    #[test]
    fn constants_m0_scalar_case() {
        let t = constants(0, 5);
        assert_eq!(t.c(0), &(big(25) / big(4)));
        assert_eq!(t.a_sq(0), &big(1));
        assert_eq!(t.b_sq(0), &big(0));
    }

    #[test]
    fn top_constant_closed_form() {
        // c_m = (n² − 4m(n+m−2))/4 for m ≤ 6, n ≤ 10.
        for m in 0..=6usize {
            for n in 1..=10i64 {
                let t = constants(m, n);
                let mi = m as i64;
                let expected = big(n * n - 4 * mi * (n + mi - 2)) / big(4);
                assert_eq!(t.c(m), &expected, "m={m}, n={n}");
            }
        }
        // m=2, n=1: c_m = −7/4, agreeing with both closed forms.
        let t = constants(2, 1);
        assert_eq!(t.c(2), &(big(-7) / big(4)));
    }

    #[test]
    fn pentadiagonal_and_tridiagonal() {
        for m in 0..=6 {
            let q = assemble_ambient_q(m, 3);
            assert!(q.bandwidth() <= 2);
            let ind = indicial_substitute(&q).unwrap();
            let tf = restrict_tracefree(&ind).unwrap();
            assert!(tf.bandwidth() <= 1);
        }
    }

    #[test]
    fn scalar_ambient_block() {
        // m=0: single block Δ + (s∂s)² − n²/4.
        let q = assemble_ambient_q(0, 3);
        let entry = q.block(0, 0);
        assert_eq!(entry.terms().len(), 3);
        let mut expected = BlockEntry::zero();
        expected.push(Term { tag: Tag::Lich, euler_pow: 0, coeff: LambdaPoly::constant(Exact::one()) });
        expected.push(Term { tag: Tag::Id, euler_pow: 2, coeff: LambdaPoly::constant(Exact::one()) });
        expected.push(Term {
            tag: Tag::Id,
            euler_pow: 0,
            coeff: LambdaPoly::constant(Exact::from_ratio(-9, 4)),
        });
        assert_eq!(entry, &expected);
    }

    #[test]
    fn m3_up_two_coefficient() {
        // Block (row 3, col 1) = −b_1b_2·L with b_1b_2 = √2.
        let q = assemble_ambient_q(3, 2);
        let entry = q.block(3, 1);
        assert_eq!(entry.terms().len(), 1);
        let t = &entry.terms()[0];
        assert_eq!(t.tag, Tag::LefL);
        assert_eq!(t.coeff, LambdaPoly::constant(-Exact::sqrt_of(2)));
    }

    #[test]
    fn indicial_substitution_rules() {
        let q = assemble_ambient_q(2, 3);
        let ind = indicial_substitute(&q).unwrap();
        // (s∂s)² became λ²: diagonal picks up a degree-2 coefficient.
        let diag = ind.block(1, 1);
        let id_term = diag.terms().iter().find(|t| t.tag == Tag::Id).unwrap();
        assert_eq!(id_term.coeff.degree(), Some(2));
        assert_eq!(id_term.euler_pow, 0);
        // Substituting twice is a state error.
        assert!(indicial_substitute(&ind).is_err());
        // Off-diagonal symbols carry no Euler power and are untouched.
        assert_eq!(ind.block(2, 1), q.block(2, 1));
    }

    #[test]
    fn tracefree_m3_diagonal_constant() {
        let ind = indicial_substitute(&assemble_ambient_q(3, 4)).unwrap();
        let tf = restrict_tracefree(&ind).unwrap();
        let table = constants(3, 4);
        // Diagonal k=0 constant is c_0 − 6.
        let diag = tf.block(0, 0);
        let id_term = diag.terms().iter().find(|t| t.tag == Tag::Id).unwrap();
        let expected_const = Exact::from_rational(-(table.c(0).clone() - big(6)));
        assert_eq!(id_term.coeff.coeffs()[0], expected_const);
    }

    #[test]
    fn tracefree_m1_is_identity_on_blocks() {
        let ind = indicial_substitute(&assemble_ambient_q(1, 3)).unwrap();
        let tf = restrict_tracefree(&ind).unwrap();
        for r in 0..=1 {
            for c in 0..=1 {
                assert_eq!(tf.block(r, c), ind.block(r, c));
            }
        }
    }

    #[test]
    fn adjoint_equals_reflected_assembly() {
        // adjoint_pattern(𝒬_λ) = 𝒬_{−λ̄} at the symbol level, m ≤ 4, both
        // flavors.
        for m in 0..=4 {
            for n in [1, 2, 5] {
                let ind = indicial_substitute(&assemble_ambient_q(m, n)).unwrap();
                assert_eq!(adjoint_pattern(&ind).unwrap(), substitute_lambda_neg(&ind));
                let tf = restrict_tracefree(&ind).unwrap();
                assert_eq!(adjoint_pattern(&tf).unwrap(), substitute_lambda_neg(&tf));
            }
        }
    }

    #[test]
    fn adjoint_on_imaginary_axis_is_symmetric() {
        // For λ ∈ iℝ the reflected polynomial evaluates to the conjugate
        // family value, so the adjoint grid equals the original numerically.
        let ind = indicial_substitute(&assemble_ambient_q(2, 3)).unwrap();
        let adj = adjoint_pattern(&ind).unwrap();
        let lambda = Complex64::new(0.0, 1.7);
        for r in 0..=2 {
            for c in 0..=2 {
                for (t, ta) in ind.block(r, c).terms().iter().zip(
                    // transposed block of the adjoint
                    adj.block(r, c).terms(),
                ) {
                    // Same tags appear in symmetric positions for this family.
                    let _ = (t, ta);
                }
            }
        }
        // Numeric check on the diagonal: p(λ) = p(−λ̄) for λ imaginary.
        let p = &ind.block(1, 1).terms().iter().find(|t| t.tag == Tag::Id).unwrap().coeff;
        let reflected = p.reflect();
        let diff = (p.eval(lambda) - reflected.eval(-lambda.conj())).norm();
        assert!(diff < 1e-14);
    }

    #[test]
    fn scale_change_m2_golden() {
        // J in the decreasing presentation:
        //   [1, dρ/ρ, (1/√2)(dρ/ρ)²; 0, 1, √2·dρ/ρ; 0, 0, 1]
        // i.e. source k → target l entries: (1→2) = 1, (0→2) = 1/√2,
        // (0→1) = √2, diagonal ones.
        let j = build_scale_change(2);
        assert_eq!(j.entry(0, 0), Exact::one());
        assert_eq!(j.entry(1, 1), Exact::one());
        assert_eq!(j.entry(2, 2), Exact::one());
        assert_eq!(j.entry(1, 2), Exact::one());
        assert_eq!(j.entry(0, 2), Exact::sqrt_of(2).invert_single_term().unwrap());
        assert_eq!(j.entry(0, 1), Exact::sqrt_of(2));
    }

    #[test]
    fn scale_change_trivial_and_inverse() {
        assert!(build_scale_change(0).is_identity());
        for m in 0..=5 {
            let j = build_scale_change(m);
            let jinv = j.inverse();
            assert!(j.compose(&jinv).is_identity(), "J·J⁻¹ ≠ Id for m={m}");
            assert!(jinv.compose(&j).is_identity(), "J⁻¹·J ≠ Id for m={m}");
        }
    }

    #[test]
    fn decouple_zero_input() {
        // f = 0 gives u = 0 identically (m=1 with toy 1-point operators).
        let table = constants(1, 2);
        let ops = DecoupleOps {
            lap: vec![
                DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
                DMatrix::from_element(1, 1, Complex64::new(2.0, 0.0)),
            ],
            d: vec![DMatrix::from_element(1, 1, Complex64::new(0.5, 0.0))],
            div: vec![DMatrix::from_element(1, 1, Complex64::new(-0.5, 0.0))],
            weights: vec![DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)],
        };
        let f = DVector::from_element(1, Complex64::new(0.0, 0.0));
        let report = decouple(&table, Complex64::new(4.0, 0.0), &ops, &f, 1e-10).unwrap();
        assert_eq!(report.lower_norm, 0.0);
        assert!(report.u[1].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn decouple_m1_matches_direct_solve() {
        // m=1 toy system: compare the recursion against a dense block solve
        // of the full tridiagonal system with input (0, f).
        let table = constants(1, 1);
        let lap0 = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 6.0]).map(|x| Complex64::new(x, 0.0));
        let lap1 = DMatrix::from_row_slice(2, 2, &[7.0, 0.5, 0.5, 8.0]).map(|x| Complex64::new(x, 0.0));
        let d0 = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.4]).map(|x| Complex64::new(x, 0.0));
        let div0 = -d0.transpose();
        let lambda = Complex64::new(6.0, 0.0);
        let ops = DecoupleOps {
            lap: vec![lap0.clone(), lap1.clone()],
            d: vec![d0.clone()],
            div: vec![div0.clone()],
            weights: vec![DVector::from_element(2, 1.0), DVector::from_element(2, 1.0)],
        };
        let f = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0)]);
        let report = decouple(&table, lambda, &ops, &f, 1e-8).unwrap();

        // Dense oracle: [[A0, −2b_0 div],[2b_0 d, A1]](u0,u1) = (0,f) with
        // b_0 = 1, A_k = Δ_k + λ² − c_k′.
        let lam2 = lambda * lambda;
        let c0p = crate::exact::rational_to_f64(table.c_prime(0));
        let c1 = crate::exact::rational_to_f64(table.c(1));
        let a0 = &lap0 + DMatrix::identity(2, 2) * (lam2 - Complex64::new(c0p, 0.0));
        let a1 = &lap1 + DMatrix::identity(2, 2) * (lam2 - Complex64::new(c1, 0.0));
        let mut full = DMatrix::<Complex64>::zeros(4, 4);
        full.view_mut((0, 0), (2, 2)).copy_from(&a0);
        full.view_mut((0, 2), (2, 2)).copy_from(&(&div0 * Complex64::new(-2.0, 0.0)));
        full.view_mut((2, 0), (2, 2)).copy_from(&(&d0 * Complex64::new(2.0, 0.0)));
        full.view_mut((2, 2), (2, 2)).copy_from(&a1);
        let mut rhs = DVector::<Complex64>::zeros(4);
        rhs[2] = f[0];
        rhs[3] = f[1];
        let sol = full.lu().solve(&rhs).unwrap();
        for i in 0..2 {
            assert!((report.u[0][i] - sol[i]).norm() < 1e-10);
            assert!((report.u[1][i] - sol[i + 2]).norm() < 1e-10);
        }
    }

    #[test]
    fn golden_m2_indicial_matrix() {
        // The m=2 indicial family, built entry by entry from its display:
        //   [Δ+λ²−c_2−LΛ, 2d,        −√2·L      ]
        //   [−2div,       Δ+λ²−c_1,  2√2·d      ]
        //   [−√2·Λ,       −2√2·div,  Δ+λ²−c_0   ]
        // in the decreasing presentation (u^{(2)}, u^{(1)}, u^{(0)}); our
        // internal grid uses increasing ranks, so indices are mirrored.
        let n = 4;
        let table = constants(2, n);
        let mut expected = BlockOperator::empty(2, n, Flavor::IndicialQ);
        let one = || LambdaPoly::constant(Exact::one());
        let lam_sq = || LambdaPoly::monomial(Exact::one(), 2);
        for k in 0..=2usize {
            expected.push(k, k, Term { tag: Tag::Lich, euler_pow: 0, coeff: one() });
            expected.push(k, k, Term { tag: Tag::Id, euler_pow: 0, coeff: lam_sq() });
            expected.push(
                k,
                k,
                Term { tag: Tag::Id, euler_pow: 0, coeff: LambdaPoly::constant(-table.c_exact(k)) },
            );
        }
        expected.push(2, 2, Term { tag: Tag::LL, euler_pow: 0, coeff: LambdaPoly::constant(-Exact::one()) });
        // Row for u^{(2)}: 2d·u^{(1)} − √2·L·u^{(0)}.
        expected.push(2, 1, Term { tag: Tag::SymDiff, euler_pow: 0, coeff: LambdaPoly::constant(Exact::from_integer(2)) });
        expected.push(2, 0, Term { tag: Tag::LefL, euler_pow: 0, coeff: LambdaPoly::constant(-Exact::sqrt_of(2)) });
        // Row for u^{(1)}: −2div·u^{(2)} + 2√2·d·u^{(0)}.
        expected.push(1, 2, Term { tag: Tag::Div, euler_pow: 0, coeff: LambdaPoly::constant(Exact::from_integer(-2)) });
        expected.push(1, 0, Term {
            tag: Tag::SymDiff,
            euler_pow: 0,
            coeff: LambdaPoly::constant(Exact::from_integer(2) * Exact::sqrt_of(2)),
        });
        // Row for u^{(0)}: −√2·Λ·u^{(2)} − 2√2·div·u^{(1)}.
        expected.push(0, 2, Term { tag: Tag::Trace, euler_pow: 0, coeff: LambdaPoly::constant(-Exact::sqrt_of(2)) });
        expected.push(0, 1, Term {
            tag: Tag::Div,
            euler_pow: 0,
            coeff: LambdaPoly::constant(Exact::from_integer(-2) * Exact::sqrt_of(2)),
        });

        let assembled = indicial_substitute(&assemble_ambient_q(2, n)).unwrap();
        assert_eq!(assembled, expected);
    }

    #[test]
    fn golden_m2_tracefree_matrix() {
        // Trace-free m=2 display: tridiagonal with c_2′ = c_2, c_1′ = c_1,
        // c_0′ = c_0 − 2, off-diagonals (2d, 2√2·d) and (−2div, −2√2·div).
        let n = 4;
        let table = constants(2, n);
        let mut expected = BlockOperator::empty(2, n, Flavor::IndicialQTracefree);
        let one = || LambdaPoly::constant(Exact::one());
        let lam_sq = || LambdaPoly::monomial(Exact::one(), 2);
        for k in 0..=2usize {
            expected.push(k, k, Term { tag: Tag::Lich, euler_pow: 0, coeff: one() });
            expected.push(k, k, Term { tag: Tag::Id, euler_pow: 0, coeff: lam_sq() });
            expected.push(
                k,
                k,
                Term {
                    tag: Tag::Id,
                    euler_pow: 0,
                    coeff: LambdaPoly::constant(-table.c_prime_exact(k)),
                },
            );
        }
        expected.push(2, 1, Term { tag: Tag::SymDiff, euler_pow: 0, coeff: LambdaPoly::constant(Exact::from_integer(2)) });
        expected.push(1, 0, Term {
            tag: Tag::SymDiff,
            euler_pow: 0,
            coeff: LambdaPoly::constant(Exact::from_integer(2) * Exact::sqrt_of(2)),
        });
        expected.push(1, 2, Term { tag: Tag::Div, euler_pow: 0, coeff: LambdaPoly::constant(Exact::from_integer(-2)) });
        expected.push(0, 1, Term {
            tag: Tag::Div,
            euler_pow: 0,
            coeff: LambdaPoly::constant(Exact::from_integer(-2) * Exact::sqrt_of(2)),
        });

        let assembled =
            restrict_tracefree(&indicial_substitute(&assemble_ambient_q(2, n)).unwrap()).unwrap();
        assert_eq!(assembled, expected);
        // And c_0′ really is c_0 − 2.
        assert_eq!(table.c_prime(0), &(table.c(0) - big(2)));
    }

    #[test]
    fn block_operator_json_round_trip() {
        let ind = indicial_substitute(&assemble_ambient_q(2, 3)).unwrap();
        let json = serde_json::to_string(&ind).unwrap();
        let back: BlockOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(ind, back);
    }
}
