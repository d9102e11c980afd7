//! Exact symbolic algebra of radial operators on the ball models.
//!
//! Operators are finite sums of monomials `p(λ)·ρ^a w^b ∂_ρ^j` with
//! `w = 1 − ρ²/4` and `p` a λ-polynomial with Gaussian coefficients.  The
//! only structural relation is `∂_ρ∘(ρ^a w^b) = a ρ^{a−1}w^b
//! − (b/2)ρ^{a+1}w^{b−1} + ρ^a w^b ∂_ρ`; everything else is bookkeeping.
//! After conjugation to the even variable μ = ρ² the operators become
//! polynomial data ready for collocation.

use crate::block_operators::LambdaPoly;
use crate::exact::Exact;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

/// λ-polynomial with Gaussian-rational coefficients: `re + i·im`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CPoly {
    pub re: LambdaPoly,
    pub im: LambdaPoly,
}

impl CPoly {
    pub fn zero() -> Self {
        CPoly { re: LambdaPoly::zero(), im: LambdaPoly::zero() }
    }

    pub fn real(p: LambdaPoly) -> Self {
        CPoly { re: p, im: LambdaPoly::zero() }
    }

    pub fn constant(c: Exact) -> Self {
        CPoly::real(LambdaPoly::constant(c))
    }

    pub fn imag_constant(c: Exact) -> Self {
        CPoly { re: LambdaPoly::zero(), im: LambdaPoly::constant(c) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn degree(&self) -> usize {
        self.re.degree().unwrap_or(0).max(self.im.degree().unwrap_or(0))
    }

    pub fn add(&self, other: &CPoly) -> CPoly {
        CPoly { re: self.re.add(&other.re), im: self.im.add(&other.im) }
    }

    pub fn mul(&self, other: &CPoly) -> CPoly {
        let minus = Exact::from_integer(-1);
        CPoly {
            re: self.re.mul(&other.re).add(&self.im.mul(&other.im).scale(&minus)),
            im: self.re.mul(&other.im).add(&self.im.mul(&other.re)),
        }
    }

    pub fn scale(&self, s: &Exact) -> CPoly {
        CPoly { re: self.re.scale(s), im: self.im.scale(s) }
    }

    pub fn neg(&self) -> CPoly {
        self.scale(&Exact::from_integer(-1))
    }

    /// Multiplication by the imaginary unit.
    pub fn times_i(&self) -> CPoly {
        CPoly { re: self.im.scale(&Exact::from_integer(-1)), im: self.re.clone() }
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.re.eval(lambda) + Complex64::new(0.0, 1.0) * self.im.eval(lambda)
    }

    /// Coefficient of `λ^d` as a complex number.
    pub fn lambda_coeff(&self, d: usize) -> Complex64 {
        let pick = |p: &LambdaPoly| p.coeffs().get(d).map_or(0.0, |c| c.to_f64());
        Complex64::new(pick(&self.re), pick(&self.im))
    }
}

/// Monomial key `ρ^a w^b ∂_ρ^j`.
type Key = (i64, i64, u32);

/// Radial operator in normal form `Σ p_{a,b,j}(λ) ρ^a w^b ∂_ρ^j`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RadialOp {
    terms: BTreeMap<Key, CPoly>,
}

impl RadialOp {
    pub fn zero() -> Self {
        RadialOp { terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The multiplication operator `c·ρ^a w^b`.
    pub fn function(a: i64, b: i64, coeff: CPoly) -> Self {
        let mut op = RadialOp::zero();
        op.add_term(a, b, 0, coeff);
        op
    }

    pub fn constant(c: Exact) -> Self {
        RadialOp::function(0, 0, CPoly::constant(c))
    }

    pub fn one() -> Self {
        RadialOp::constant(Exact::one())
    }

    /// `∂_ρ`.
    pub fn deriv() -> Self {
        let mut op = RadialOp::zero();
        op.add_term(0, 0, 1, CPoly::constant(Exact::one()));
        op
    }

    /// `ρ∂_ρ` (the boundary Euler field).
    pub fn rho_deriv() -> Self {
        let mut op = RadialOp::zero();
        op.add_term(1, 0, 1, CPoly::constant(Exact::one()));
        op
    }

    pub fn add_term(&mut self, a: i64, b: i64, j: u32, coeff: CPoly) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry((a, b, j)).or_insert_with(CPoly::zero);
        *slot = slot.add(&coeff);
        if slot.is_zero() {
            self.terms.remove(&(a, b, j));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &CPoly)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &RadialOp) -> RadialOp {
        let mut out = self.clone();
        for (&(a, b, j), p) in &other.terms {
            out.add_term(a, b, j, p.clone());
        }
        out
    }

    pub fn sub(&self, other: &RadialOp) -> RadialOp {
        self.add(&other.scale_poly(&CPoly::constant(Exact::from_integer(-1))))
    }

    pub fn scale(&self, s: &Exact) -> RadialOp {
        self.scale_poly(&CPoly::constant(s.clone()))
    }

    pub fn scale_poly(&self, p: &CPoly) -> RadialOp {
        let mut out = RadialOp::zero();
        for (&(a, b, j), q) in &self.terms {
            out.add_term(a, b, j, p.mul(q));
        }
        out
    }

    /// Left-multiply by `ρ^a w^b`.
    pub fn shift(&self, da: i64, db: i64) -> RadialOp {
        let mut out = RadialOp::zero();
        for (&(a, b, j), p) in &self.terms {
            out.add_term(a + da, b + db, j, p.clone());
        }
        out
    }

    /// `∂_ρ ∘ self` in normal form.
    fn deriv_compose(&self) -> RadialOp {
        let mut out = RadialOp::zero();
        let half = Exact::from_ratio(1, 2);
        for (&(a, b, j), p) in &self.terms {
            // ∂(ρ^a w^b u) = aρ^{a−1}w^b u − (b/2)ρ^{a+1}w^{b−1}u + ρ^aw^b ∂u.
            out.add_term(a - 1, b, j, p.scale(&Exact::from_integer(a)));
            out.add_term(a + 1, b - 1, j, p.scale(&half.scale_int(-b)));
            out.add_term(a, b, j + 1, p.clone());
        }
        out
    }

    /// Operator composition `self ∘ other`.
    pub fn compose(&self, other: &RadialOp) -> RadialOp {
        let mut out = RadialOp::zero();
        for (&(a, b, j), p) in &self.terms {
            let mut right = other.clone();
            for _ in 0..j {
                right = right.deriv_compose();
            }
            for (&(a2, b2, j2), q) in &right.terms {
                out.add_term(a + a2, b + b2, j2, p.mul(q));
            }
        }
        out
    }

    /// Conjugation `ρ^{−c} ∘ self ∘ ρ^{c}` for a λ-polynomial exponent `c`:
    /// every `∂_ρ` becomes `∂_ρ + c/ρ`.
    pub fn conjugate_by_rho_power(&self, c: &LambdaPoly) -> RadialOp {
        let shifted = {
            // ∂ + cρ^{−1} as a formal operator.
            let mut s = RadialOp::deriv();
            s.add_term(-1, 0, 0, CPoly::real(c.clone()));
            s
        };
        let mut out = RadialOp::zero();
        for (&(a, b, j), p) in &self.terms {
            let mut acc = RadialOp::one();
            for _ in 0..j {
                acc = shifted.compose(&acc);
            }
            for (&(a2, b2, j2), q) in &acc.terms {
                out.add_term(a + a2, b + b2, j2, p.mul(q));
            }
        }
        out
    }

    pub fn max_deriv_order(&self) -> u32 {
        self.terms.keys().map(|&(_, _, j)| j).max().unwrap_or(0)
    }

    pub fn max_lambda_degree(&self) -> usize {
        self.terms.values().map(CPoly::degree).max().unwrap_or(0)
    }

    /// Convert to the even coordinate μ = ρ², using `∂_ρ = 2ρ∂_μ`.  Fails if
    /// any monomial has `a + j` odd (the operator would not descend to a
    /// function of μ).
    pub fn to_mu(&self) -> Result<MuOp, RadialError> {
        let mut out = MuOp::zero();
        for (&(a, b, j), p) in &self.terms {
            if (a + j as i64) % 2 != 0 {
                return Err(RadialError::OddSymbol { a, b, j });
            }
            match j {
                0 => out.add_term(a / 2, b, 0, p.clone()),
                1 => {
                    // ρ^a ∂_ρ = 2ρ^{a+1}∂_μ.
                    out.add_term(
                        (a + 1) / 2,
                        b,
                        1,
                        p.scale(&Exact::from_integer(2)),
                    );
                }
                2 => {
                    // ρ^a ∂_ρ² = 4ρ^{a+2}∂_μ² + 2ρ^a ∂_μ.
                    out.add_term((a + 2) / 2, b, 2, p.scale(&Exact::from_integer(4)));
                    out.add_term(a / 2, b, 1, p.scale(&Exact::from_integer(2)));
                }
                _ => return Err(RadialError::OrderTooHigh(j)),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for RadialOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b, j), p) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "[{:?}+i{:?}]", p.re, p.im)?;
            if a != 0 {
                write!(f, "·ρ^{a}")?;
            }
            if b != 0 {
                write!(f, "·w^{b}")?;
            }
            if j != 0 {
                write!(f, "·∂^{j}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RadialError {
    #[error("monomial ρ^{a} w^{b} ∂^{j} has odd parity and no μ-form")]
    OddSymbol { a: i64, b: i64, j: u32 },
    #[error("∂-order {0} exceeds the second-order normal form")]
    OrderTooHigh(u32),
    #[error("λ-degree {0} exceeds the quadratic pencil")]
    LambdaDegreeTooHigh(usize),
}

/// Operator in the even coordinate: `Σ p(λ)·μ^a w^b ∂_μ^j`, `j ≤ 2`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MuOp {
    terms: BTreeMap<Key, CPoly>,
}

impl MuOp {
    pub fn zero() -> Self {
        MuOp { terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, a: i64, b: i64, j: u32, coeff: CPoly) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry((a, b, j)).or_insert_with(CPoly::zero);
        *slot = slot.add(&coeff);
        if slot.is_zero() {
            self.terms.remove(&(a, b, j));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &CPoly)> {
        self.terms.iter()
    }

    pub fn max_lambda_degree(&self) -> usize {
        self.terms.values().map(CPoly::degree).max().unwrap_or(0)
    }

    /// Coefficient function of `∂_μ^j` and `λ^d` evaluated at `μ`.
    pub fn coeff_at(&self, j: u32, d: usize, mu: f64) -> Complex64 {
        let w = 1.0 - mu / 4.0;
        let mut out = Complex64::new(0.0, 0.0);
        for (&(a, b, jj), p) in &self.terms {
            if jj != j {
                continue;
            }
            out += p.lambda_coeff(d) * mu.powi(a as i32) * w.powi(b as i32);
        }
        out
    }
}

impl Exact {
    fn scale_int(&self, k: i64) -> Exact {
        self * &Exact::from_integer(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam() -> Complex64 {
        Complex64::new(0.37, -1.21)
    }

    /// Apply an operator to ρ ↦ ρ^p numerically via its normal form.
    fn apply_to_power(op: &RadialOp, p: i32, rho: f64) -> Complex64 {
        let w = 1.0 - rho * rho / 4.0;
        let mut out = Complex64::new(0.0, 0.0);
        for (&(a, b, j), c) in op.terms() {
            // ∂^j ρ^p = p(p−1)…(p−j+1) ρ^{p−j}.
            let mut fall = 1.0;
            for t in 0..j {
                fall *= (p - t as i32) as f64;
            }
            out += c.eval(lam())
                * fall
                * rho.powi(p - j as i32 + a as i32)
                * w.powi(b as i32);
        }
        out
    }

    #[test]
    fn composition_matches_leibniz() {
        // (∂∘ρw)(ρ^3) = ∂(ρ^4 w) = 4ρ³w − ρ⁵/2.
        let op = RadialOp::deriv().compose(&RadialOp::function(
            1,
            1,
            CPoly::constant(Exact::one()),
        ));
        let rho: f64 = 0.83;
        let w = 1.0 - rho * rho / 4.0;
        let expect = 4.0 * rho.powi(3) * w - rho.powi(5) / 2.0;
        let got = apply_to_power(&op, 3, rho);
        assert!((got - expect).norm() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn conjugation_shifts_euler_operator() {
        // ρ^{−c}(ρ∂)ρ^{c} = ρ∂ + c.
        let c = LambdaPoly::monomial(Exact::one(), 1); // c = λ
        let conj = RadialOp::rho_deriv().conjugate_by_rho_power(&c);
        let expect = RadialOp::rho_deriv().add(&RadialOp::function(
            0,
            0,
            CPoly::real(c.clone()),
        ));
        assert_eq!(conj, expect);
    }

    #[test]
    fn second_order_conjugation_is_consistent() {
        // ρ^{−c}∂²ρ^{c} applied to ρ^p must equal ∂²ρ^{p+c'} shifted, checked
        // numerically with c = 2 (an integer so powers stay polynomial).
        let c = LambdaPoly::constant(Exact::from_integer(2));
        let conj = RadialOp::deriv()
            .compose(&RadialOp::deriv())
            .conjugate_by_rho_power(&c);
        let rho: f64 = 0.61;
        let p = 3;
        // ρ^{−2}·∂²(ρ^{p+2}) = (p+2)(p+1)ρ^{p−2}·ρ^{...}: evaluate directly.
        let expect = ((p + 2) * (p + 1)) as f64 * rho.powi(p - 2);
        let got = apply_to_power(&conj, p, rho);
        assert!((got - Complex64::new(expect, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mu_conversion_of_euler_square() {
        // (ρ∂_ρ)² = 4μ²∂_μ² + 4μ∂_μ... check on μ-powers: (ρ∂)ρ^{2q} = 2qρ^{2q}.
        let op = RadialOp::rho_deriv().compose(&RadialOp::rho_deriv());
        let mu_op = op.to_mu().unwrap();
        let mu = 1.7;
        // Apply to μ^2: expect (2q)² μ^q with q=2 → 16μ².
        let mut got = Complex64::new(0.0, 0.0);
        for (&(a, b, j), c) in mu_op.terms() {
            let w = 1.0 - mu / 4.0;
            let fall = match j {
                0 => mu * mu,
                1 => 2.0 * mu,
                2 => 2.0,
                _ => unreachable!(),
            };
            got += c.eval(lam()) * fall * mu.powi(a as i32) * w.powi(b as i32);
        }
        assert!((got - Complex64::new(16.0 * mu * mu, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn odd_symbols_are_rejected() {
        let op = RadialOp::function(1, 0, CPoly::constant(Exact::one()));
        assert!(matches!(op.to_mu(), Err(RadialError::OddSymbol { .. })));
    }
}
