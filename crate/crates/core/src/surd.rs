//! Exact arithmetic in multiquadratic fields `Q(sqrt d1, sqrt d2, ...)`.
//!
//! An element is a finite sum `sum_s a_s * sqrt(s)` over squarefree integers
//! `s` (with `sqrt(1) = 1` and `sqrt(-n) = i sqrt(n)`). Node coordinates of a
//! Cayley-Rohn quartic lie in at worst a quadratic field each, but divisors
//! combine nodes from different fields, so products must stay closed.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::{radicand_generators, squarefree_decompose};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Surd {
    terms: BTreeMap<i64, BigRational>,
}

impl Surd {
    pub fn zero() -> Self {
        Surd::default()
    }

    pub fn one() -> Self {
        Surd::from_rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Surd::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_rational(r: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(1, r);
        }
        Surd { terms }
    }

    /// `c * sqrt(s)` for a squarefree `s`.
    pub fn term(c: BigRational, s: i64) -> Self {
        debug_assert!(s != 0);
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(s, c);
        }
        Surd { terms }
    }

    /// `sqrt(r)` for a rational `r`; `None` if the radicand resists factoring.
    pub fn sqrt_rational(r: &BigRational) -> Option<Self> {
        if r.is_zero() {
            return Some(Surd::zero());
        }
        let prod = r.numer() * r.denom();
        let (g, s) = squarefree_decompose(&prod)?;
        let s = s.to_i64()?;
        let coeff = BigRational::new(BigInt::from(g), r.denom().clone());
        Some(Surd::term(coeff, s))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.terms.keys().all(|&s| s == 1)
    }

    pub fn rational_part(&self) -> BigRational {
        self.terms.get(&1).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        self.is_rational().then(|| self.rational_part())
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        self.terms.iter().map(|(&s, c)| (s, c))
    }

    /// Radicands other than 1 appearing in this element.
    pub fn radicands(&self) -> Vec<i64> {
        self.terms.keys().copied().filter(|&s| s != 1).collect()
    }

    /// The automorphism negating every generator in `gen` (a prime or -1).
    fn conjugate_by(&self, gen: i64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(&s, c)| {
                let flips = if gen == -1 { s < 0 } else { s % gen == 0 };
                (s, if flips { -c.clone() } else { c.clone() })
            })
            .collect();
        Surd { terms }
    }

    /// Apply the automorphism `sqrt(d) -> -sqrt(d)` for a squarefree `d`,
    /// extended by fixing all generators not dividing `d`. For a single
    /// quadratic radicand this is the Galois conjugation.
    pub fn conjugate(&self, d: i64) -> Self {
        // flip terms whose radicand shares an odd number of generators with d
        let gens = radicand_generators(d);
        let terms = self
            .terms
            .iter()
            .map(|(&s, c)| {
                let shared = gens
                    .iter()
                    .filter(|&&g| if g == -1 { s < 0 } else { s % g == 0 })
                    .count();
                (s, if shared % 2 == 1 { -c.clone() } else { c.clone() })
            })
            .collect();
        Surd { terms }
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let mut y = self.clone();
        let mut num = Surd::one();
        loop {
            let gen = y.radicands().into_iter().flat_map(radicand_generators).next();
            let Some(gen) = gen else { break };
            let c = y.conjugate_by(gen);
            num = &num * &c;
            y = &y * &c;
        }
        let r = y.rational_part();
        Some(num.scale(&r.recip()))
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_zero() {
            return Surd::zero();
        }
        Surd { terms: self.terms.iter().map(|(&s, c)| (s, c * r)).collect() }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Surd::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Numerical value (real, imaginary).
    pub fn to_complex(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&s, c) in &self.terms {
            let v = crate::arith::to_f64(c) * (s.unsigned_abs() as f64).sqrt();
            if s < 0 {
                im += v;
            } else {
                re += v;
            }
        }
        (re, im)
    }
}

fn mul_radicands(s: i64, t: i64) -> (i64, i64) {
    // sqrt(s) sqrt(t) = sign * g * sqrt(st / g^2)
    let g = s.unsigned_abs().gcd(&t.unsigned_abs()) as i64;
    let sign = if s < 0 && t < 0 { -1 } else { 1 };
    (sign * g, (s / g) * (t / g))
}

impl Add for &Surd {
    type Output = Surd;
    fn add(self, other: &Surd) -> Surd {
        let mut terms = self.terms.clone();
        for (&s, c) in &other.terms {
            let e = terms.entry(s).or_insert_with(BigRational::zero);
            *e += c;
            if e.is_zero() {
                terms.remove(&s);
            }
        }
        Surd { terms }
    }
}

impl Sub for &Surd {
    type Output = Surd;
    fn sub(self, other: &Surd) -> Surd {
        self + &(-other)
    }
}

impl Neg for &Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { terms: self.terms.iter().map(|(&s, c)| (s, -c)).collect() }
    }
}

impl Mul for &Surd {
    type Output = Surd;
    fn mul(self, other: &Surd) -> Surd {
        let mut terms: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (&s, a) in &self.terms {
            for (&t, b) in &other.terms {
                let (f, r) = mul_radicands(s, t);
                let e = terms.entry(r).or_insert_with(BigRational::zero);
                *e += a * b * BigRational::from_integer(f.into());
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Surd { terms }
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Surd {
            type Output = Surd;
            fn $m(self, other: Surd) -> Surd { $tr::$m(&self, &other) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        -&self
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&s, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if s == 1 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*sqrt({s})")?;
            }
        }
        Ok(())
    }
}

/// Minimal field interface shared by rationals and surds, used by the
/// generic linear algebra.
pub trait Scalar: Clone + PartialEq + fmt::Debug {
    fn zero_value() -> Self;
    fn one_value() -> Self;
    fn is_zero_value(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    fn from_bigint(n: &BigInt) -> Self;
}

impl Scalar for BigRational {
    fn zero_value() -> Self {
        Zero::zero()
    }
    fn one_value() -> Self {
        One::one()
    }
    fn is_zero_value(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        (!Zero::is_zero(self)).then(|| self.recip())
    }
    fn from_bigint(n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }
}

impl Scalar for Surd {
    fn zero_value() -> Self {
        Surd::zero()
    }
    fn one_value() -> Self {
        Surd::one()
    }
    fn is_zero_value(&self) -> bool {
        Surd::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        Surd::inv(self)
    }
    fn from_bigint(n: &BigInt) -> Self {
        Surd::from_rational(BigRational::from_integer(n.clone()))
    }
}
