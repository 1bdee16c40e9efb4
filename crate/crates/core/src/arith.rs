//! Integer helpers: squarefree decomposition of big integers and rationals.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

const TRIAL_LIMIT: u64 = 1 << 16;

/// Deterministic Miller-Rabin for the first 20 prime bases; exact far past
/// the sizes met here, probabilistic beyond 3.3e24.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    const BASES: [u32; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];
    for &b in &BASES {
        let b = BigUint::from(b);
        if *n == b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let nm1 = n - &one;
    let s = nm1.trailing_zeros().unwrap_or(0);
    let d = &nm1 >> s;
    'witness: for &b in &BASES {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x == one || x == nm1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == nm1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A nontrivial factor of a composite `n` by Brent's variant of Pollard rho.
fn pollard_rho(n: &BigUint) -> Option<BigUint> {
    if n.is_even() {
        return Some(BigUint::from(2u32));
    }
    let one = BigUint::one();
    for c in 1u32..64 {
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut y = BigUint::from(2u32);
        let mut r = 1u64;
        let mut q = BigUint::one();
        let mut g = BigUint::one();
        let mut x = y.clone();
        let mut ys = y.clone();
        while g == one {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g == one {
                ys = y.clone();
                for _ in 0..(r - k).min(128) {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = q * diff % n;
                }
                g = q.gcd(n);
                k += 128;
            }
            r *= 2;
            if r > 1 << 22 {
                break;
            }
        }
        if g == *n {
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if g != one {
                    break;
                }
            }
        }
        if g != one && g != *n {
            return Some(g);
        }
    }
    None
}

/// Prime factorization with multiplicities. Returns `None` only if a
/// composite cofactor resists Pollard rho.
pub fn factor(n: &BigUint) -> Option<Vec<(BigUint, u32)>> {
    let mut out: Vec<(BigUint, u32)> = Vec::new();
    let mut n = n.clone();
    let mut d = 2u64;
    while d < TRIAL_LIMIT && BigUint::from(d * d) <= n {
        let bd = BigUint::from(d);
        let mut e = 0;
        while (&n % &bd).is_zero() {
            n /= &bd;
            e += 1;
        }
        if e > 0 {
            out.push((bd, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_probable_prime(&m) {
            match out.iter_mut().find(|(p, _)| *p == m) {
                Some(entry) => entry.1 += 1,
                None => out.push((m, 1)),
            }
            continue;
        }
        let r = m.sqrt();
        if &r * &r == m {
            stack.push(r.clone());
            stack.push(r);
            continue;
        }
        let f = pollard_rho(&m)?;
        let g = &m / &f;
        stack.push(f);
        stack.push(g);
    }
    out.sort();
    Some(out)
}

/// Write a nonzero integer as `g^2 * s` with `s` squarefree (sign kept in `s`).
pub fn squarefree_decompose(n: &BigInt) -> Option<(BigUint, BigInt)> {
    assert!(!n.is_zero(), "squarefree part of zero");
    let mag = n.magnitude();
    let mut g = BigUint::one();
    let mut s = BigUint::one();
    for (p, e) in factor(mag)? {
        g *= p.pow(e / 2);
        if e % 2 == 1 {
            s *= p;
        }
    }
    let sign = if n.sign() == Sign::Minus { -1 } else { 1 };
    Some((g, BigInt::from(sign) * BigInt::from(s)))
}

/// Squarefree representative of the class of a nonzero rational in `Q*/Q*^2`.
pub fn squarefree_class(x: &BigRational) -> Option<BigInt> {
    let prod = x.numer() * x.denom();
    squarefree_decompose(&prod).map(|(_, s)| s)
}

pub fn squarefree_i64(n: i64) -> i64 {
    squarefree_decompose(&BigInt::from(n)).expect("small integers factor").1.to_i64().unwrap()
}

/// Prime divisors of a nonzero `i64` radicand, plus `-1` for negatives.
pub fn radicand_generators(s: i64) -> Vec<i64> {
    let mut out = Vec::new();
    if s < 0 {
        out.push(-1);
    }
    let mut m = s.unsigned_abs();
    let mut d = 2u64;
    while d * d <= m {
        if m.is_multiple_of(d) {
            out.push(d as i64);
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out.push(m as i64);
    }
    out
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `|x|` as `f64` (for display and numerics only).
pub fn to_f64(x: &BigRational) -> f64 {
    let n = x.numer().to_f64().unwrap_or(f64::NAN);
    let d = x.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000) as usize;
        let n = (x.numer().abs() >> shift).to_f64().unwrap() * x.numer().signum().to_f64().unwrap();
        let d = (x.denom() >> shift).to_f64().unwrap();
        n / d
    }
}

/// Serde adapters writing `BigInt`s as decimal strings.
pub mod decimal {
    use std::collections::BTreeSet;
    use std::str::FromStr;

    use num_bigint::BigInt;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    fn parse<E: Error>(s: &str) -> Result<BigInt, E> {
        BigInt::from_str(s).map_err(|e| E::custom(format!("{s:?}: {e}")))
    }

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        parse(&String::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.to_string()))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
            Vec::<String>::deserialize(d)?.iter().map(|x| parse(x)).collect()
        }
    }

    pub mod set {
        use super::*;

        pub fn serialize<S: Serializer>(v: &BTreeSet<BigInt>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.to_string()))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<BigInt>, D::Error> {
            Vec::<String>::deserialize(d)?.iter().map(|x| parse(x)).collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => s.serialize_some(&x.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigInt>, D::Error> {
            Option::<String>::deserialize(d)?.map(|x| parse(&x)).transpose()
        }
    }
}
