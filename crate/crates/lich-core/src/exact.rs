//! Exact scalar arithmetic in the ring ℚ[√2, √3, …].
//!
//! Fibre-level constants such as `a_k = 1/√((m−k)!)` and `b_k = √(m−k)` are
//! irrational, but every identity we check lives in the ring generated over ℚ
//! by finitely many square roots.  An [`Exact`] value is a finite sum of terms
//! `q·√d` with `q ∈ ℚ` and `d` a squarefree positive integer; the basis
//! elements `√d` for distinct squarefree `d` are linearly independent over ℚ,
//! so equality of two values is equality of their term maps.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Split `n` into `(s, d)` with `n = s²·d` and `d` squarefree.
fn extract_square(n: u64) -> (u64, u64) {
    debug_assert!(n >= 1);
    let mut square = 1u64;
    let mut rest = n;
    let mut p = 2u64;
    while p * p <= rest {
        while rest % (p * p) == 0 {
            rest /= p * p;
            square *= p;
        }
        p += 1;
    }
    (square, rest)
}

/// Element of ℚ[√2, √3, …]: map from squarefree radicand to rational
/// coefficient.  The radicand 1 carries the rational part.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Exact {
    terms: BTreeMap<u64, BigRational>,
}

impl Exact {
    pub fn zero() -> Self {
        Exact { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Exact::from_integer(1)
    }

    pub fn from_integer(n: i64) -> Self {
        Exact::from_ratio(n, 1)
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let q = BigRational::new(BigInt::from(num), BigInt::from(den));
        Exact::from_rational(q)
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut e = Exact::zero();
        if !q.is_zero() {
            e.terms.insert(1, q);
        }
        e
    }

    /// √n for a nonnegative integer n, reduced to canonical form.
    pub fn sqrt_of(n: u64) -> Self {
        if n == 0 {
            return Exact::zero();
        }
        let (s, d) = extract_square(n);
        let mut e = Exact::zero();
        e.terms.insert(d, BigRational::from(BigInt::from(s)));
        e
    }

    /// `q·√n` in one step.
    pub fn ratio_sqrt(num: i64, den: i64, n: u64) -> Self {
        Exact::from_ratio(num, den) * Exact::sqrt_of(n)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational part, if the value is purely rational.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(q) = self.terms.get(&1) {
                return Some(q.clone());
            }
        }
        None
    }

    /// Iterate over `(radicand, coefficient)` terms in radicand order.
    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.terms.iter().map(|(d, q)| (*d, q))
    }

    /// Number of radical terms; a plain rational has at most one.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(d, q)| rational_to_f64(q) * (*d as f64).sqrt())
            .sum()
    }

    /// Multiplicative inverse for single-term values `q·√d`
    /// (1/(q√d) = √d/(q·d)).  General inverses are never needed.
    pub fn invert_single_term(&self) -> Option<Exact> {
        if self.terms.len() != 1 {
            return None;
        }
        let (d, q) = self.terms.iter().next().unwrap();
        let mut e = Exact::zero();
        e.terms
            .insert(*d, (q * BigRational::from(BigInt::from(*d as i64))).recip());
        Some(e)
    }

    fn insert_term(&mut self, d: u64, q: BigRational) {
        if q.is_zero() {
            return;
        }
        let entry = self.terms.entry(d).or_insert_with(BigRational::zero);
        *entry += q;
        if entry.is_zero() {
            self.terms.remove(&d);
        }
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    // Good enough for the magnitudes in this crate; numerators stay small.
    let n = q.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = q.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    n / d
}

impl Add for Exact {
    type Output = Exact;
    fn add(mut self, rhs: Exact) -> Exact {
        self += rhs;
        self
    }
}

impl AddAssign for Exact {
    fn add_assign(&mut self, rhs: Exact) {
        for (d, q) in rhs.terms {
            self.insert_term(d, q);
        }
    }
}

impl Sub for Exact {
    type Output = Exact;
    fn sub(mut self, rhs: Exact) -> Exact {
        self -= rhs;
        self
    }
}

impl SubAssign for Exact {
    fn sub_assign(&mut self, rhs: Exact) {
        for (d, q) in rhs.terms {
            self.insert_term(d, -q);
        }
    }
}

impl Neg for Exact {
    type Output = Exact;
    fn neg(mut self) -> Exact {
        for q in self.terms.values_mut() {
            *q = -q.clone();
        }
        self
    }
}

impl Mul for Exact {
    type Output = Exact;
    fn mul(self, rhs: Exact) -> Exact {
        &self * &rhs
    }
}

impl Mul for &Exact {
    type Output = Exact;
    fn mul(self, rhs: &Exact) -> Exact {
        let mut out = Exact::zero();
        for (da, qa) in &self.terms {
            for (db, qb) in &rhs.terms {
                // √a·√b = gcd-free reduction of √(ab).
                let (s, d) = extract_square(da * db);
                out.insert_term(d, qa * qb * BigRational::from(BigInt::from(s)));
            }
        }
        out
    }
}

impl MulAssign for Exact {
    fn mul_assign(&mut self, rhs: Exact) {
        *self = &*self * &rhs;
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (d, q) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *d == 1 {
                write!(f, "{}", q)?;
            } else if q.is_one() {
                write!(f, "√{}", d)?;
            } else {
                write!(f, "{}·√{}", q, d)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
