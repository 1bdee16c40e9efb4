//! Reconstruction of the unknown degree-7 factor `psi` of the Frobenius
//! characteristic polynomial on `H^2`.
//!
//! The hyperplane class and the 14 exceptional curves span a rank-15
//! sublattice on which Frobenius acts by `p` times the node permutation.
//! Subtracting its power sums from the traces leaves the power sums of the
//! seven remaining eigenvalues. Three of them fix `psi` up to the sign of
//! the functional equation.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{self, IntPoly};

/// Relative tolerance on `|lambda| = p`.
pub const ROOT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeilError {
    #[error("Newton identity e_{0} is not integral")]
    NewtonNonIntegral(usize),
    #[error("no sign of the functional equation gives a Weil polynomial")]
    NoCandidateSurvives,
    #[error("t_4 rejects both sign candidates")]
    BothRejected,
    #[error("need traces t_1..t_3, got {0}")]
    MissingTraces(usize),
}

/// `(T - p) * prod over orbits (T^d - p^d)`, low degree first.
pub fn known_factor(cycle_type: &[usize], p: u64) -> IntPoly {
    let p = BigInt::from(p);
    let mut f: IntPoly = vec![-p.clone(), BigInt::one()];
    for &d in cycle_type {
        let mut g = vec![BigInt::zero(); d + 1];
        g[0] = -p.pow(d as u32);
        g[d] = BigInt::one();
        f = poly::mul(&f, &g);
    }
    f
}

/// Number of exceptional classes fixed by `Frob^k`.
pub fn fixed_classes(cycle_type: &[usize], k: usize) -> u64 {
    cycle_type.iter().filter(|&&d| k.is_multiple_of(d)).map(|&d| d as u64).sum()
}

/// `p^k (1 + Fix(Frob^k))`.
pub fn known_power_sums(cycle_type: &[usize], p: u64, k: usize) -> BigInt {
    BigInt::from(p).pow(k as u32) * BigInt::from(1 + fixed_classes(cycle_type, k))
}

/// A monic degree-7 candidate for `psi`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiCandidate {
    /// Coefficients, leading 1 first.
    #[serde(with = "crate::arith::decimal::vec")]
    pub coeffs: Vec<BigInt>,
    /// `c_7 = sign * p^7`.
    pub sign: i8,
}

impl PsiCandidate {
    /// Coefficients low degree first.
    pub fn poly(&self) -> IntPoly {
        self.coeffs.iter().rev().cloned().collect()
    }

    pub fn power_sums(&self, n: usize) -> Vec<BigInt> {
        poly::power_sums(&self.poly(), n)
    }

    /// `c_{7-i} = sign p^(7-2i) c_i` for `i = 0..=3`.
    pub fn satisfies_functional_equation(&self, p: u64) -> bool {
        let p = BigInt::from(p);
        (0..=3).all(|i| self.coeffs[7 - i] == BigInt::from(self.sign) * p.pow(7 - 2 * i as u32) * &self.coeffs[i])
    }

    pub fn roots_on_circle(&self, p: u64) -> bool {
        poly::roots_on_circle(&self.poly(), &BigInt::from(p), ROOT_TOLERANCE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignStatus {
    Resolved,
    Ambiguous,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignResolution {
    pub status: SignStatus,
    pub candidates: Vec<PsiCandidate>,
}

/// Power sums of `psi`'s roots from the traces.
pub fn unknown_power_sums(traces: &[i64], cycle_type: &[usize], p: u64) -> Vec<BigInt> {
    traces
        .iter()
        .enumerate()
        .map(|(i, &t)| BigInt::from(t) - known_power_sums(cycle_type, p, i + 1))
        .collect()
}

/// Both functional-equation mirrors of `T^7 + c1 T^6 + c2 T^5 + c3 T^4 + ...`.
pub fn mirror_candidates(c: [&BigInt; 3], p: u64) -> [PsiCandidate; 2] {
    let pb = BigInt::from(p);
    [1i8, -1].map(|sign| {
        let e = BigInt::from(sign);
        let coeffs = vec![
            BigInt::one(),
            c[0].clone(),
            c[1].clone(),
            c[2].clone(),
            &e * &pb * c[2],
            &e * pb.pow(3) * c[1],
            &e * pb.pow(5) * c[0],
            &e * pb.pow(7),
        ];
        PsiCandidate { coeffs, sign }
    })
}

pub fn psi_from_traces(traces: &[i64], cycle_type: &[usize], p: u64) -> Result<SignResolution, WeilError> {
    if traces.len() < 3 {
        return Err(WeilError::MissingTraces(traces.len()));
    }
    let s = unknown_power_sums(&traces[..3], cycle_type, p);
    // T^3 - e1 T^2 + e2 T - e3
    let cubic = poly::from_power_sums(&s, 3).map_err(WeilError::NewtonNonIntegral)?;
    let candidates: Vec<PsiCandidate> = mirror_candidates([&cubic[2], &cubic[1], &cubic[0]], p)
        .into_iter()
        .filter(|c| c.roots_on_circle(p))
        .collect();
    match candidates.len() {
        0 => Err(WeilError::NoCandidateSurvives),
        1 => Ok(SignResolution { status: SignStatus::Resolved, candidates }),
        _ => Ok(SignResolution { status: SignStatus::Ambiguous, candidates }),
    }
}

/// Keep the candidates whose predicted `s_4` matches the measured trace.
pub fn resolve_with_t4(
    resolution: &SignResolution,
    t4: i64,
    cycle_type: &[usize],
    p: u64,
) -> Result<SignResolution, WeilError> {
    let s4 = BigInt::from(t4) - known_power_sums(cycle_type, p, 4);
    let candidates: Vec<PsiCandidate> =
        resolution.candidates.iter().filter(|c| c.power_sums(4)[3] == s4).cloned().collect();
    match candidates.len() {
        0 => Err(WeilError::BothRejected),
        1 => Ok(SignResolution { status: SignStatus::Resolved, candidates }),
        _ => Ok(SignResolution { status: SignStatus::Ambiguous, candidates }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{mul, scaled_cyclotomic};

    fn ip(v: &[i64]) -> IntPoly {
        v.iter().map(|&c| BigInt::from(c)).collect()
    }

    #[test]
    fn known_sums() {
        let all = vec![1usize; 14];
        assert_eq!(known_power_sums(&all, 7, 1), BigInt::from(15 * 7));
        let mixed = [2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1];
        assert_eq!(known_power_sums(&mixed, 7, 1), BigInt::from(9 * 7));
        assert_eq!(known_power_sums(&mixed, 7, 2), BigInt::from(15 * 49));
        assert_eq!(known_power_sums(&mixed, 7, 4), BigInt::from(15 * 7i64.pow(4)));
        assert_eq!(poly::degree(&known_factor(&mixed, 7)), 15);
    }

    /// Feed the traces of `(known factor) * psi0` back in.
    fn round_trip(psi0: &IntPoly, cycle_type: &[usize], p: u64) -> SignResolution {
        let s = poly::power_sums(psi0, 4);
        let traces: Vec<i64> = (0..3)
            .map(|i| {
                let t = &s[i] + known_power_sums(cycle_type, p, i + 1);
                i64::try_from(t).unwrap()
            })
            .collect();
        psi_from_traces(&traces, cycle_type, p).unwrap()
    }

    #[test]
    fn recovers_synthetic_psi() {
        let p = 11u64;
        let pb = BigInt::from(p);
        let ct = vec![1usize; 14];
        // (T - p) * p^6 Phi_7(T/p)
        let psi0 = mul(&ip(&[-11, 1]), &scaled_cyclotomic(7, &pb));
        let res = round_trip(&psi0, &ct, p);
        let polys: Vec<IntPoly> = res.candidates.iter().map(|c| c.poly()).collect();
        assert!(polys.contains(&psi0));
        for c in &res.candidates {
            assert!(c.satisfies_functional_equation(p));
        }
        // (T + p) (T^2 - a T + p^2)^3 with |a| < 2p
        let quad = ip(&[121, -5, 1]);
        let psi1 = mul(&ip(&[11, 1]), &mul(&quad, &mul(&quad, &quad)));
        let res = round_trip(&psi1, &[2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1], p);
        assert!(res.candidates.iter().any(|c| c.poly() == psi1));
    }

    #[test]
    fn t4_separates_signs() {
        let p = 5u64;
        let ct = vec![1usize; 14];
        let psi0 = mul(&ip(&[-5, 1]), &mul(&ip(&[25, 3, 1]), &mul(&ip(&[25, -7, 1]), &ip(&[25, 1, 1]))));
        let res = round_trip(&psi0, &ct, p);
        let s4 = &poly::power_sums(&psi0, 4)[3] + known_power_sums(&ct, p, 4);
        let fixed = resolve_with_t4(&res, i64::try_from(s4).unwrap(), &ct, p).unwrap();
        assert!(fixed.candidates.iter().any(|c| c.poly() == psi0));
        if res.status == SignStatus::Ambiguous {
            let preds: Vec<BigInt> = res.candidates.iter().map(|c| c.power_sums(4)[3].clone()).collect();
            if preds[0] != preds[1] {
                assert_eq!(fixed.status, SignStatus::Resolved);
            }
        }
    }

    #[test]
    fn non_integral_newton() {
        // s = (1, 0, 0) relative to known sums gives e2 = 1/2
        let ct = vec![1usize; 14];
        let p = 5;
        let t: Vec<i64> = (1..=3).map(|k| i64::try_from(known_power_sums(&ct, p, k)).unwrap() + [1, 0, 0][k - 1]).collect();
        assert_eq!(psi_from_traces(&t, &ct, p), Err(WeilError::NewtonNonIntegral(2)));
    }
}
