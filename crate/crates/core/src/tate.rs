//! Tate classes, rank upper bounds, Artin–Tate discriminant classes and
//! the combination of several primes.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith;
use crate::poly::{self, IntPoly};
use crate::weil::{PsiCandidate, SignResolution, SignStatus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TateError {
    #[error("number of Tate classes {0} is even")]
    ParityViolation(usize),
    #[error("rank {rho} does not match the multiplicity {found} of p^m")]
    NonzeroRemainder { rho: usize, found: usize },
    #[error("Artin–Tate limit is not positive")]
    NonPositiveLimit,
    #[error("non-Tate factor is not integral after base change")]
    NonIntegralBaseChange,
    #[error("could not factor {0}")]
    FactorizationFailed(String),
}

/// Tate part of a candidate: cyclotomic orders with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TateDecomposition {
    pub cyclotomic: Vec<(u32, u32)>,
    /// `psi` with the Tate factors divided out, low degree first.
    pub rest: IntPoly,
}

impl TateDecomposition {
    pub fn u(&self) -> usize {
        7 - poly::degree(&self.rest)
    }

    pub fn orders(&self) -> Vec<u32> {
        self.cyclotomic.iter().map(|&(n, _)| n).collect()
    }
}

pub fn tate_decomposition(psi: &PsiCandidate, p: u64) -> TateDecomposition {
    let (cyclotomic, rest) = poly::strip_cyclotomic(&psi.poly(), &BigInt::from(p));
    TateDecomposition { cyclotomic, rest }
}

/// `u`: number of eigenvalues of `psi` of the form `p * zeta`.
pub fn tate_class_count(psi: &PsiCandidate, p: u64) -> usize {
    tate_decomposition(psi, p).u()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankBoundAtPrime {
    pub p: u64,
    pub bound: usize,
    /// Squarefree representatives; two entries possible if the sign is ambiguous.
    #[serde(with = "arith::decimal::set")]
    pub disc_classes: BTreeSet<BigInt>,
}

/// Upper bound `15 + u`, maximized over an ambiguous pair.
pub fn rank_upper_bound(us: &[usize]) -> Result<usize, TateError> {
    for &u in us {
        if u % 2 == 0 {
            return Err(TateError::ParityViolation(u));
        }
    }
    Ok(15 + us.iter().copied().max().expect("at least one candidate"))
}

fn lcm_all(values: impl IntoIterator<Item = u64>) -> u64 {
    values.into_iter().fold(1, |a, b| a.lcm(&b))
}

/// Smallest `m` after which every Tate class is Frobenius-invariant.
pub fn base_change_degree(psi: &PsiCandidate, cycle_type: &[usize], p: u64) -> u64 {
    let dec = tate_decomposition(psi, p);
    lcm_all(dec.orders().into_iter().map(u64::from).chain(cycle_type.iter().map(|&d| d as u64)))
}

/// `|Delta| #Br` over `F_{p^m}`: the limit of `Phi(T) / (T - q)^rho` at
/// `T = q = p^m`, divided by `q^(21 - rho)`.
pub fn artin_tate_value(psi: &PsiCandidate, p: u64, rho: usize, m: u64) -> Result<BigRational, TateError> {
    let dec = tate_decomposition(psi, p);
    if dec.orders().iter().any(|&n| !m.is_multiple_of(n as u64)) {
        return Err(TateError::NonzeroRemainder { rho, found: 15 });
    }
    let tate = 15 + dec.u();
    let g = &dec.rest;
    let d = poly::degree(g);
    // eigenvalues of the non-Tate part raised to the m-th power
    let s = poly::power_sums(g, d * m as usize);
    let sm: Vec<BigInt> = (1..=d).map(|j| s[j * m as usize - 1].clone()).collect();
    let gm = poly::from_power_sums(&sm, d).map_err(|_| TateError::NonIntegralBaseChange)?;
    let q = BigInt::from(p).pow(m as u32);
    // a non-Tate eigenvalue can still become q^1 after base change only if
    // it was p times a root of unity, which has been stripped already
    let mut value = poly::eval(&gm, &q);
    let mut found = tate;
    let lin = vec![-q.clone(), BigInt::one()];
    let mut rest = gm;
    while value.is_zero() {
        rest = poly::divmod_monic(&rest, &lin).0;
        value = poly::eval(&rest, &q);
        found += 1;
    }
    if found != rho {
        return Err(TateError::NonzeroRemainder { rho, found });
    }
    if !value.is_positive() {
        return Err(TateError::NonPositiveLimit);
    }
    // a supersingular reduction has rho = 22 and an empty non-Tate part
    Ok(if rho <= 21 {
        BigRational::new(value, q.pow((21 - rho) as u32))
    } else {
        BigRational::from_integer(value * q.pow((rho - 21) as u32))
    })
}

/// Square class of the discriminant of the geometric Picard lattice, sign
/// `(-1)^(rho-1)` from the signature `(1, rho - 1)`.
pub fn artin_tate_disc_class_at(psi: &PsiCandidate, p: u64, rho: usize, m: u64) -> Result<BigInt, TateError> {
    let value = artin_tate_value(psi, p, rho, m)?;
    let signed = if rho.is_multiple_of(2) { -value } else { value };
    arith::squarefree_class(&signed).ok_or_else(|| TateError::FactorizationFailed(signed.to_string()))
}

pub fn artin_tate_disc_class(psi: &PsiCandidate, cycle_type: &[usize], p: u64, rho: usize) -> Result<BigInt, TateError> {
    let m = base_change_degree(psi, cycle_type, p);
    artin_tate_disc_class_at(psi, p, rho, m)
}

/// Bound and class set at one prime from a (possibly ambiguous) resolution.
pub fn bound_at_prime(resolution: &SignResolution, cycle_type: &[usize], p: u64) -> Result<RankBoundAtPrime, TateError> {
    let us: Vec<usize> = resolution.candidates.iter().map(|c| tate_class_count(c, p)).collect();
    let bound = rank_upper_bound(&us)?;
    let mut disc_classes = BTreeSet::new();
    for (c, &u) in resolution.candidates.iter().zip(&us) {
        if resolution.status == SignStatus::Resolved || 15 + u == bound {
            disc_classes.insert(artin_tate_disc_class(c, cycle_type, p, 15 + u)?);
        }
    }
    Ok(RankBoundAtPrime { p, bound, disc_classes })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedBound {
    pub upper: usize,
    /// Primes attaining the minimum bound.
    pub witnesses: Vec<RankBoundAtPrime>,
    /// Two witnesses with disjoint class sets, if found.
    pub conflict: Option<(u64, u64)>,
}

pub fn combine_primes(bounds: &[RankBoundAtPrime]) -> Option<CombinedBound> {
    let b = bounds.iter().map(|r| r.bound).min()?;
    let mut witnesses: Vec<RankBoundAtPrime> = bounds.iter().filter(|r| r.bound == b).cloned().collect();
    witnesses.sort_by_key(|r| r.p);
    let mut conflict = None;
    'outer: for (i, a) in witnesses.iter().enumerate() {
        for c in &witnesses[i + 1..] {
            if a.disc_classes.is_disjoint(&c.disc_classes) {
                conflict = Some((a.p, c.p));
                break 'outer;
            }
        }
    }
    let upper = if conflict.is_some() { b - 1 } else { b };
    Some(CombinedBound { upper, witnesses, conflict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{mul, scaled_cyclotomic};

    fn ip(v: &[i64]) -> IntPoly {
        v.iter().map(|&c| BigInt::from(c)).collect()
    }

    fn cand(poly: &IntPoly, sign: i8) -> PsiCandidate {
        PsiCandidate { coeffs: poly.iter().rev().cloned().collect(), sign }
    }

    fn bound(p: u64, b: usize, classes: &[i64]) -> RankBoundAtPrime {
        RankBoundAtPrime { p, bound: b, disc_classes: classes.iter().map(|&c| BigInt::from(c)).collect() }
    }

    #[test]
    fn counts_tate_classes() {
        let p = 7u64;
        let all_p = (0..7).fold(ip(&[1]), |acc, _| mul(&acc, &ip(&[-7, 1])));
        assert_eq!(tate_class_count(&cand(&all_p, -1), p), 7);
        let g = mul(&ip(&[49, 3, 1]), &mul(&ip(&[49, -5, 1]), &ip(&[49, 1, 1])));
        let psi = mul(&ip(&[-7, 1]), &g);
        assert_eq!(tate_class_count(&cand(&psi, -1), p), 1);
        let psi3 = mul(&mul(&ip(&[-7, 1]), &scaled_cyclotomic(3, &BigInt::from(7))), &mul(&ip(&[49, -5, 1]), &ip(&[49, 1, 1])));
        assert_eq!(tate_class_count(&cand(&psi3, -1), p), 3);
    }

    #[test]
    fn bounds_and_parity() {
        assert_eq!(rank_upper_bound(&[1]), Ok(16));
        assert_eq!(rank_upper_bound(&[1, 3]), Ok(18));
        assert_eq!(rank_upper_bound(&[2]), Err(TateError::ParityViolation(2)));
    }

    #[test]
    fn combine_examples() {
        let c = combine_primes(&[bound(5, 16, &[-1]), bound(7, 16, &[-2])]).unwrap();
        assert_eq!(c.upper, 15);
        let c = combine_primes(&[bound(5, 16, &[-1]), bound(7, 16, &[-1])]).unwrap();
        assert_eq!(c.upper, 16);
        let c = combine_primes(&[bound(5, 18, &[-1]), bound(7, 16, &[-1]), bound(11, 18, &[-3])]).unwrap();
        assert_eq!(c.upper, 16);
        let c = combine_primes(&[bound(5, 16, &[-1, -2]), bound(7, 16, &[-2])]).unwrap();
        assert_eq!(c.upper, 16);
        assert!(combine_primes(&[]).is_none());
    }

    #[test]
    fn supersingular_class() {
        // (T - p)^4 (T + p)^3: every eigenvalue is Tate, rank 22 after base change
        let p = 23u64;
        let psi = (0..7).fold(ip(&[1]), |acc, i| mul(&acc, &ip(&[if i < 4 { -23 } else { 23 }, 1])));
        let c = cand(&psi, 1);
        assert_eq!(tate_class_count(&c, p), 7);
        let ct = vec![1usize; 14];
        assert_eq!(base_change_degree(&c, &ct, p), 2);
        assert_eq!(artin_tate_value(&c, p, 22, 2).unwrap(), BigRational::from_integer(BigInt::from(529)));
        assert_eq!(artin_tate_disc_class(&c, &ct, p, 22).unwrap(), BigInt::from(-1));
        assert_eq!(rank_upper_bound(&[7]), Ok(22));
    }

    #[test]
    fn artin_tate_hand_evaluated() {
        // psi = (T - p)(T^2 + pT + p^2)(T^2 - aT + p^2)^2, one Tate pair from zeta_3
        let p = 5u64;
        let a = 3i64;
        let quad = ip(&[25, -a, 1]);
        let psi = mul(&mul(&ip(&[-5, 1]), &scaled_cyclotomic(3, &BigInt::from(5))), &mul(&quad, &quad));
        let c = cand(&psi, -1);
        assert_eq!(tate_class_count(&c, p), 3);
        let ct = vec![1usize; 14];
        assert_eq!(base_change_degree(&c, &ct, p), 3);
        // over F_{p^3}: non-Tate eigenvalues mu^3 with mu + mubar = a
        // prod (q - mu^3)(q - mubar^3) = (q^2 - q (mu^3 + mubar^3) + q^2), squared
        let q = 125i64;
        let tr3 = a * a * a - 3 * a * 25;
        let pair = 2 * q * q - q * tr3;
        let value = BigRational::new(BigInt::from(pair * pair), BigInt::from(q).pow(3));
        assert_eq!(artin_tate_value(&c, p, 18, 3).unwrap(), value);
        let expected = arith::squarefree_class(&-value).unwrap();
        assert_eq!(artin_tate_disc_class(&c, &ct, p, 18).unwrap(), expected);
        // a synthetic polynomial need not satisfy the Brauer-square constraint,
        // so over F_{p^6} the class differs: here every factor is a square
        assert_eq!(artin_tate_disc_class_at(&c, p, 18, 6).unwrap(), BigInt::from(-1));
        assert_eq!(expected, BigInt::from(-5));
        assert!(matches!(artin_tate_value(&c, p, 16, 3), Err(TateError::NonzeroRemainder { .. })));
    }
}
