//! Integer and rational univariate polynomials, stored low degree first.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith;

pub type IntPoly = Vec<BigInt>;
pub type RatPoly = Vec<BigRational>;

/// Orders `n` with `phi(n) <= 7`.
pub const CYCLOTOMIC_ORDERS: [u32; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 14, 18];

pub fn trim<T: Zero>(mut a: Vec<T>) -> Vec<T> {
    while a.last().is_some_and(|c| c.is_zero()) {
        a.pop();
    }
    a
}

pub fn degree<T>(a: &[T]) -> usize {
    a.len().saturating_sub(1)
}

pub fn mul(a: &[BigInt], b: &[BigInt]) -> IntPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut c = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            c[i + j] += x * y;
        }
    }
    c
}

/// Quotient and remainder by a monic divisor.
pub fn divmod_monic(a: &[BigInt], b: &[BigInt]) -> (IntPoly, IntPoly) {
    debug_assert!(b.last().is_some_and(|c| c.is_one()));
    let mut r = a.to_vec();
    let db = b.len() - 1;
    if r.len() <= db {
        return (Vec::new(), trim(r));
    }
    let mut q = vec![BigInt::zero(); r.len() - db];
    for i in (0..q.len()).rev() {
        let c = r[i + db].clone();
        if c.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            r[i + j] -= &c * bj;
        }
        q[i] = c;
    }
    r.truncate(db);
    (q, trim(r))
}

pub fn eval(a: &[BigInt], x: &BigInt) -> BigInt {
    a.iter().rev().fold(BigInt::zero(), |acc, c| acc * x + c)
}

/// `Phi_n`, by dividing `T^n - 1` by `Phi_d` for the proper divisors `d`.
pub fn cyclotomic(n: u32) -> IntPoly {
    let mut f = vec![BigInt::zero(); n as usize + 1];
    f[0] = BigInt::from(-1);
    f[n as usize] = BigInt::one();
    for d in 1..n {
        if n.is_multiple_of(d) {
            f = divmod_monic(&f, &cyclotomic(d)).0;
        }
    }
    f
}

/// `p^phi(n) Phi_n(T / p)`: the monic integer polynomial whose roots are
/// `p` times the primitive `n`-th roots of unity.
pub fn scaled_cyclotomic(n: u32, p: &BigInt) -> IntPoly {
    let c = cyclotomic(n);
    let d = c.len() - 1;
    c.into_iter().enumerate().map(|(i, ci)| ci * p.pow((d - i) as u32)).collect()
}

/// Newton's identities for a monic polynomial: `s_1..s_n`.
pub fn power_sums(a: &[BigInt], n: usize) -> Vec<BigInt> {
    let d = a.len() - 1;
    // e-style coefficients: T^d + c_1 T^(d-1) + ... + c_d
    let c = |i: usize| -> BigInt { if i <= d { a[d - i].clone() } else { BigInt::zero() } };
    let mut s: Vec<BigInt> = Vec::with_capacity(n);
    for k in 1..=n {
        let mut v = -c(k) * BigInt::from(k);
        for i in 1..k {
            v -= c(i) * &s[k - i - 1];
        }
        s.push(v);
    }
    s
}

/// The monic degree-`d` polynomial with power sums `s_1..s_d`, if it has
/// integer coefficients. Returns the index `k` of the first non-integral
/// elementary symmetric function otherwise.
pub fn from_power_sums(s: &[BigInt], d: usize) -> Result<IntPoly, usize> {
    let mut e = vec![BigInt::one()];
    for k in 1..=d {
        let mut acc = BigInt::zero();
        for i in 1..=k {
            let term = &e[k - i] * &s[i - 1];
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let (q, r) = acc.div_rem(&BigInt::from(k));
        if !r.is_zero() {
            return Err(k);
        }
        e.push(q);
    }
    // T^d - e1 T^(d-1) + e2 T^(d-2) - ...
    let mut out = vec![BigInt::zero(); d + 1];
    for (k, ek) in e.into_iter().enumerate() {
        out[d - k] = if k % 2 == 0 { ek } else { -ek };
    }
    Ok(out)
}

fn to_rat(a: &[BigInt]) -> RatPoly {
    a.iter().map(|c| BigRational::from_integer(c.clone())).collect()
}

fn rat_rem(a: &[BigRational], b: &[BigRational]) -> RatPoly {
    let mut r = trim(a.to_vec());
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !r.is_empty() {
        let f = r.last().unwrap() / &lead;
        let shift = r.len() - 1 - db;
        for (j, bj) in b.iter().enumerate() {
            r[shift + j] = &r[shift + j] - &f * bj;
        }
        r.pop();
        r = trim(r);
    }
    r
}

pub fn rat_gcd(a: &[BigRational], b: &[BigRational]) -> RatPoly {
    let mut a = trim(a.to_vec());
    let mut b = trim(b.to_vec());
    while !b.is_empty() {
        let r = rat_rem(&a, &b);
        a = b;
        b = r;
    }
    if let Some(l) = a.last().cloned() {
        for c in a.iter_mut() {
            *c = &*c / &l;
        }
    }
    a
}

fn rat_div_exact(a: &[BigRational], b: &[BigRational]) -> RatPoly {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let mut q = vec![BigRational::zero(); r.len() - db];
    for i in (0..q.len()).rev() {
        let f = &r[i + db] / &b[db];
        for (j, bj) in b.iter().enumerate() {
            r[i + j] = &r[i + j] - &f * bj;
        }
        q[i] = f;
    }
    q
}

/// The squarefree kernel `f / gcd(f, f')` of an integer polynomial, as a
/// monic rational polynomial with the same roots.
pub fn squarefree_kernel(a: &[BigInt]) -> RatPoly {
    let f = to_rat(a);
    if f.len() <= 2 {
        return f;
    }
    let df: RatPoly = f.iter().enumerate().skip(1).map(|(i, c)| c * BigRational::from_integer(BigInt::from(i))).collect();
    let g = rat_gcd(&f, &df);
    let mut k = rat_div_exact(&f, &g);
    let l = k.last().unwrap().clone();
    for c in k.iter_mut() {
        *c = &*c / &l;
    }
    k
}

/// All complex roots by the Aberth iteration.
pub fn complex_roots(a: &[f64]) -> Vec<Complex64> {
    let d = a.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = a[d];
    let c: Vec<f64> = a.iter().map(|x| x / lead).collect();
    let radius = 1.0 + c[..d].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius * 0.5, 0.4 + std::f64::consts::TAU * k as f64 / d as f64))
        .collect();
    let evald = |x: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for i in (0..d).rev() {
            dp = dp * x + p;
            p = p * x + c[i];
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..d {
            let (p, dp) = evald(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != i {
                    sum += 1.0 / (z[i] - z[j]);
                }
            }
            let step = ratio / (1.0 - ratio * sum);
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Whether every root of `f(p T) / p^deg` lies on the unit circle within
/// `tol`, checked on the squarefree kernel so repeated roots stay accurate.
pub fn roots_on_circle(f: &[BigInt], p: &BigInt, tol: f64) -> bool {
    let d = degree(f);
    let scaled: Vec<BigRational> = f
        .iter()
        .enumerate()
        .map(|(i, c)| BigRational::new(c * p.pow(i as u32), p.pow(d as u32)))
        .collect();
    let ints: Vec<BigInt> = {
        let den = scaled.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        scaled.iter().map(|c| (c * BigRational::from_integer(den.clone())).to_integer()).collect()
    };
    let kernel = squarefree_kernel(&ints);
    let coeffs: Vec<f64> = kernel.iter().map(arith::to_f64).collect();
    complex_roots(&coeffs).iter().all(|r| (r.norm() - 1.0).abs() <= tol)
}

/// Divide out all factors `p^phi(n) Phi_n(T/p)`; returns the multiplicities
/// `(n, m)` found and the remaining cofactor.
pub fn strip_cyclotomic(f: &[BigInt], p: &BigInt) -> (Vec<(u32, u32)>, IntPoly) {
    let mut g = f.to_vec();
    let mut found = Vec::new();
    for &n in &CYCLOTOMIC_ORDERS {
        let phi = scaled_cyclotomic(n, p);
        let mut mult = 0;
        while g.len() >= phi.len() {
            let (q, r) = divmod_monic(&g, &phi);
            if !r.is_empty() {
                break;
            }
            g = q;
            mult += 1;
        }
        if mult > 0 {
            found.push((n, mult));
        }
    }
    (found, g)
}

pub fn to_i64_vec(a: &[BigInt]) -> Option<Vec<i64>> {
    a.iter().map(|c| c.to_i64()).collect()
}

pub fn max_abs_bits(a: &[BigInt]) -> u64 {
    a.iter().map(|c| c.abs().bits()).max().unwrap_or(0)
}
