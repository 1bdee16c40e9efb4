//! Arithmetic in `F_p` and its extensions `F_{p^k}`, `k <= 4`.
//!
//! Elements are fixed-size coefficient arrays, so nothing in the counting
//! loops allocates. The extension modulus is the lexicographically least
//! monic irreducible polynomial of the requested degree, which keeps runs
//! reproducible across machines.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Largest extension degree supported.
pub const MAX_DEGREE: usize = 4;

/// Primes must stay below this bound so that unreduced products fit in `u32`.
pub const MAX_PRIME: u32 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("characteristic {0} is not supported (need 5 <= p < {MAX_PRIME})")]
    UnsupportedPrime(u64),
    #[error("extension degree {0} out of range 1..=4")]
    DegreeOutOfRange(usize),
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands belong to different fields")]
    FieldMismatch,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Lemire's fastmod for 32-bit numerators.
#[derive(Clone, Copy, Debug)]
struct FastMod {
    d: u32,
    m: u64,
}

impl FastMod {
    fn new(d: u32) -> Self {
        FastMod { d, m: u64::MAX / d as u64 + 1 }
    }

    #[inline(always)]
    fn reduce(self, a: u32) -> u32 {
        let low = self.m.wrapping_mul(a as u64);
        ((low as u128 * self.d as u128) >> 64) as u32
    }
}

/// The prime field `F_p` with a precomputed character and inverse table.
#[derive(Clone, Debug)]
pub struct PrimeField {
    p: u32,
    fm: FastMod,
    chi: Vec<i8>,
    inv: Vec<u32>,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if p < 5 || p >= MAX_PRIME as u64 {
            return Err(FieldError::UnsupportedPrime(p));
        }
        let p = p as u32;
        let fm = FastMod::new(p);
        let mut chi = vec![-1i8; p as usize];
        chi[0] = 0;
        for a in 1..p {
            chi[((a as u64 * a as u64) % p as u64) as usize] = 1;
        }
        let mut inv = vec![0u32; p as usize];
        for a in 1..p {
            if inv[a as usize] == 0 {
                let b = pow_mod(a as u64, p as u64 - 2, p as u64) as u32;
                inv[a as usize] = b;
                inv[b as usize] = a;
            }
        }
        Ok(PrimeField { p, fm, chi, inv })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline(always)]
    pub fn reduce(&self, a: u32) -> u32 {
        self.fm.reduce(a)
    }

    #[inline(always)]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline(always)]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.fm.reduce(a * b)
    }

    #[inline(always)]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    /// Inverse of a nonzero residue; `inv(0)` is 0.
    #[inline(always)]
    pub fn inv(&self, a: u32) -> u32 {
        self.inv[a as usize]
    }

    /// Quadratic character by table lookup.
    #[inline(always)]
    pub fn chi(&self, a: u32) -> i8 {
        self.chi[a as usize]
    }

    /// Quadratic character by Euler's criterion.
    pub fn legendre(&self, a: u32) -> i8 {
        let a = a % self.p;
        if a == 0 {
            return 0;
        }
        if pow_mod(a as u64, (self.p as u64 - 1) / 2, self.p as u64) == 1 {
            1
        } else {
            -1
        }
    }

    /// Reduce a signed integer.
    pub fn from_i64(&self, a: i64) -> u32 {
        a.rem_euclid(self.p as i64) as u32
    }

    /// Square root of a residue by Tonelli-Shanks, if it exists.
    pub fn sqrt(&self, a: u32) -> Option<u32> {
        let p = self.p as u64;
        let a = a as u64 % p;
        if a == 0 {
            return Some(0);
        }
        if self.chi(a as u32) != 1 {
            return None;
        }
        let mut q = p - 1;
        let mut s = 0;
        while q.is_multiple_of(2) {
            q /= 2;
            s += 1;
        }
        let mut z = 2;
        while self.chi(z as u32) != -1 {
            z += 1;
        }
        let mut m = s;
        let mut c = pow_mod(z, q, p);
        let mut t = pow_mod(a, q, p);
        let mut r = pow_mod(a, q.div_ceil(2), p);
        while t != 1 {
            let mut i = 0;
            let mut tt = t;
            while tt != 1 {
                tt = tt * tt % p;
                i += 1;
            }
            let b = pow_mod(c, 1 << (m - i - 1), p);
            m = i;
            c = b * b % p;
            t = t * c % p;
            r = r * b % p;
        }
        Some(r as u32)
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = (acc as u128 * base as u128 % m as u128) as u64;
        }
        base = (base as u128 * base as u128 % m as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// An element of `F_{p^k}`: coefficients of the residue representative,
/// low degree first. Entries at index `>= k` are always zero.
///
/// The derived ordering is lexicographic, low-degree coefficient first,
/// which is the order used for canonical Frobenius-orbit representatives.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fq(pub [u32; MAX_DEGREE]);

impl Fq {
    pub const ZERO: Fq = Fq([0; MAX_DEGREE]);
    pub const ONE: Fq = Fq([1, 0, 0, 0]);

    #[inline(always)]
    pub fn is_zero(self) -> bool {
        self.0 == [0; MAX_DEGREE]
    }

    pub fn coeffs(&self) -> &[u32; MAX_DEGREE] {
        &self.0
    }

    /// Lies in the prime field.
    pub fn is_prime_field(self) -> bool {
        self.0[1] == 0 && self.0[2] == 0 && self.0[3] == 0
    }

    /// Pack into a `u64` key (16 bits per coefficient).
    #[inline(always)]
    pub fn key(self) -> u64 {
        self.0[0] as u64
            | (self.0[1] as u64) << 16
            | (self.0[2] as u64) << 32
            | (self.0[3] as u64) << 48
    }
}

impl fmt::Debug for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fq{:?}", self.0)
    }
}

/// The field `F_{p^k} = F_p[T]/(m(T))`.
#[derive(Clone, Debug)]
pub struct ExtField {
    base: PrimeField,
    k: usize,
    q: u64,
    /// Low coefficients of the monic modulus.
    modulus: [u32; MAX_DEGREE],
    /// `p - modulus[i]`, so that `T^k = sum neg_mod[i] T^i`.
    neg_mod: [u32; MAX_DEGREE],
    /// `frob[i]` is `(T^i)^p`.
    frob: [Fq; MAX_DEGREE],
}

impl PartialEq for ExtField {
    fn eq(&self, other: &Self) -> bool {
        self.base.p == other.base.p && self.k == other.k && self.modulus == other.modulus
    }
}

impl Eq for ExtField {}

impl ExtField {
    /// Build `F_{p^k}` with the lexicographically least monic irreducible
    /// modulus (coefficients compared low degree first). For `k = 1` the
    /// modulus is `T`.
    pub fn new(p: u64, k: usize) -> Result<Self, FieldError> {
        if !(1..=MAX_DEGREE).contains(&k) {
            return Err(FieldError::DegreeOutOfRange(k));
        }
        let base = PrimeField::new(p)?;
        let modulus = least_irreducible(p as u32, k);
        let mut neg_mod = [0u32; MAX_DEGREE];
        for i in 0..k {
            neg_mod[i] = base.neg(modulus[i]);
        }
        let mut field = ExtField {
            q: p.pow(k as u32),
            base,
            k,
            modulus,
            neg_mod,
            frob: [Fq::ZERO; MAX_DEGREE],
        };
        let t = field.generator_t();
        let tp = field.pow(t, p);
        let mut acc = Fq::ONE;
        for i in 0..k {
            field.frob[i] = acc;
            acc = field.mul(acc, tp);
        }
        Ok(field)
    }

    pub fn p(&self) -> u32 {
        self.base.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of elements.
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn prime_field(&self) -> &PrimeField {
        &self.base
    }

    /// Monic modulus coefficients, low degree first, including the leading 1.
    pub fn modulus(&self) -> Vec<u32> {
        let mut m = self.modulus[..self.k].to_vec();
        m.push(1);
        m
    }

    /// The class of `T` (for `k = 1`, the residue 0 since the modulus is `T`).
    pub fn generator_t(&self) -> Fq {
        if self.k == 1 {
            Fq::ZERO
        } else {
            Fq([0, 1, 0, 0])
        }
    }

    #[inline(always)]
    pub fn from_u32(&self, a: u32) -> Fq {
        Fq([a % self.base.p, 0, 0, 0])
    }

    pub fn from_i64(&self, a: i64) -> Fq {
        Fq([self.base.from_i64(a), 0, 0, 0])
    }

    /// Element with the given coefficients (reduced mod p).
    pub fn from_coeffs(&self, c: &[u32]) -> Fq {
        assert!(c.len() <= self.k, "too many coefficients for degree {}", self.k);
        let mut out = [0u32; MAX_DEGREE];
        for (o, &x) in out.iter_mut().zip(c) {
            *o = x % self.base.p;
        }
        Fq(out)
    }

    /// The `idx`-th element in base-`p` digit order, `idx < q`.
    pub fn element(&self, mut idx: u64) -> Fq {
        let p = self.base.p as u64;
        let mut out = [0u32; MAX_DEGREE];
        for o in out.iter_mut().take(self.k) {
            *o = (idx % p) as u32;
            idx /= p;
        }
        Fq(out)
    }

    pub fn index(&self, a: Fq) -> u64 {
        let p = self.base.p as u64;
        let mut idx = 0u64;
        for i in (0..self.k).rev() {
            idx = idx * p + a.0[i] as u64;
        }
        idx
    }

    /// All elements, in index order.
    pub fn elements(&self) -> impl Iterator<Item = Fq> + '_ {
        ElementIter { field: self, cur: Fq::ZERO, done: false }
    }

    #[inline(always)]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        let f = &self.base;
        Fq([
            f.add(a.0[0], b.0[0]),
            f.add(a.0[1], b.0[1]),
            f.add(a.0[2], b.0[2]),
            f.add(a.0[3], b.0[3]),
        ])
    }

    #[inline(always)]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        let f = &self.base;
        Fq([
            f.sub(a.0[0], b.0[0]),
            f.sub(a.0[1], b.0[1]),
            f.sub(a.0[2], b.0[2]),
            f.sub(a.0[3], b.0[3]),
        ])
    }

    #[inline(always)]
    pub fn neg(&self, a: Fq) -> Fq {
        let f = &self.base;
        Fq([f.neg(a.0[0]), f.neg(a.0[1]), f.neg(a.0[2]), f.neg(a.0[3])])
    }

    /// Multiply by a prime-field scalar.
    #[inline(always)]
    pub fn scale(&self, a: Fq, s: u32) -> Fq {
        let f = &self.base;
        Fq([f.mul(a.0[0], s), f.mul(a.0[1], s), f.mul(a.0[2], s), f.mul(a.0[3], s)])
    }

    #[inline(always)]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        match self.k {
            1 => Fq([self.base.mul(a.0[0], b.0[0]), 0, 0, 0]),
            2 => self.mul2(a, b),
            3 => self.mul3(a, b),
            _ => self.mul4(a, b),
        }
    }

    #[inline(always)]
    pub fn square(&self, a: Fq) -> Fq {
        self.mul(a, a)
    }

    #[inline(always)]
    fn mul2(&self, a: Fq, b: Fq) -> Fq {
        let f = &self.base;
        let [a0, a1, ..] = a.0;
        let [b0, b1, ..] = b.0;
        let c2 = f.reduce(a1 * b1);
        let c0 = a0 * b0 + c2 * self.neg_mod[0];
        let c1 = a0 * b1 + a1 * b0 + c2 * self.neg_mod[1];
        Fq([f.reduce(c0), f.reduce(c1), 0, 0])
    }

    #[inline(always)]
    fn mul3(&self, a: Fq, b: Fq) -> Fq {
        let f = &self.base;
        let [a0, a1, a2, _] = a.0;
        let [b0, b1, b2, _] = b.0;
        let n = &self.neg_mod;
        let c4 = f.reduce(a2 * b2);
        let mut c3 = a1 * b2 + a2 * b1;
        let mut c2 = a0 * b2 + a1 * b1 + a2 * b0;
        let mut c1 = a0 * b1 + a1 * b0;
        let c0 = a0 * b0;
        // T^4 = T * T^3
        c1 += c4 * n[0];
        c2 += c4 * n[1];
        c3 += c4 * n[2];
        let c3 = f.reduce(c3);
        let c0 = c0 + c3 * n[0];
        c1 += c3 * n[1];
        c2 += c3 * n[2];
        Fq([f.reduce(c0), f.reduce(c1), f.reduce(c2), 0])
    }

    #[inline(always)]
    fn mul4(&self, a: Fq, b: Fq) -> Fq {
        let f = &self.base;
        let [a0, a1, a2, a3] = a.0;
        let [b0, b1, b2, b3] = b.0;
        let n = &self.neg_mod;
        let c6 = f.reduce(a3 * b3);
        let mut c5 = f.reduce(a2 * b3 + a3 * b2);
        let mut c4 = a1 * b3 + a2 * b2 + a3 * b1;
        let mut c3 = a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0;
        let mut c2 = a0 * b2 + a1 * b1 + a2 * b0;
        let mut c1 = a0 * b1 + a1 * b0;
        let mut c0 = a0 * b0;
        // T^6 = T^2 * T^4
        c2 += c6 * n[0];
        c3 += c6 * n[1];
        c4 += c6 * n[2];
        c5 = f.reduce(c5 + c6 * n[3]);
        c1 += c5 * n[0];
        c2 += c5 * n[1];
        c3 += c5 * n[2];
        c4 = f.reduce(c4 + c5 * n[3]);
        c0 += c4 * n[0];
        c1 += c4 * n[1];
        c2 += c4 * n[2];
        c3 += c4 * n[3];
        Fq([f.reduce(c0), f.reduce(c1), f.reduce(c2), f.reduce(c3)])
    }

    pub fn pow(&self, mut base: Fq, mut exp: u64) -> Fq {
        let mut acc = Fq::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// `a^p`.
    #[inline(always)]
    pub fn frobenius(&self, a: Fq) -> Fq {
        if self.k == 1 {
            return a;
        }
        let f = &self.base;
        let mut acc = [0u32; MAX_DEGREE];
        for i in 0..self.k {
            let ai = a.0[i];
            if ai == 0 {
                continue;
            }
            let img = &self.frob[i].0;
            for j in 0..self.k {
                acc[j] += ai * img[j];
                if acc[j] >= 1 << 30 {
                    acc[j] = f.reduce(acc[j]);
                }
            }
        }
        Fq([f.reduce(acc[0]), f.reduce(acc[1]), f.reduce(acc[2]), f.reduce(acc[3])])
    }

    /// Norm to the prime field, `a * a^p * ... * a^{p^{k-1}}`.
    #[inline]
    pub fn norm(&self, a: Fq) -> u32 {
        let mut acc = a;
        let mut conj = a;
        for _ in 1..self.k {
            conj = self.frobenius(conj);
            acc = self.mul(acc, conj);
        }
        debug_assert!(acc.is_prime_field());
        acc.0[0]
    }

    /// Quadratic character of `F_q`: the prime-field character of the norm.
    #[inline]
    pub fn chi(&self, a: Fq) -> i8 {
        self.base.chi(self.norm(a))
    }

    /// Quadratic character by Euler's criterion in `F_q` (slow reference).
    pub fn chi_euler(&self, a: Fq) -> i8 {
        if a.is_zero() {
            return 0;
        }
        let e = self.pow(a, (self.q - 1) / 2);
        if e == Fq::ONE {
            1
        } else {
            debug_assert_eq!(e, self.neg(Fq::ONE));
            -1
        }
    }

    /// Inverse of a nonzero element through the norm.
    #[inline]
    pub fn inv(&self, a: Fq) -> Option<Fq> {
        if a.is_zero() {
            return None;
        }
        let mut rest = Fq::ONE;
        let mut conj = a;
        for _ in 1..self.k {
            conj = self.frobenius(conj);
            rest = self.mul(rest, conj);
        }
        let n = self.mul(a, rest);
        Some(self.scale(rest, self.base.inv(n.0[0])))
    }

    pub fn div(&self, a: Fq, b: Fq) -> Result<Fq, FieldError> {
        self.inv(b).map(|bi| self.mul(a, bi)).ok_or(FieldError::DivisionByZero)
    }

    /// Size of the Frobenius orbit of `a`.
    pub fn orbit_size(&self, a: Fq) -> usize {
        let mut c = self.frobenius(a);
        let mut n = 1;
        while c != a {
            c = self.frobenius(c);
            n += 1;
        }
        n
    }

    /// Wrap a raw element for checked arithmetic.
    pub fn wrap(&self, value: Fq) -> FieldElement<'_> {
        FieldElement { field: self, value }
    }

    /// Square root in `F_q` (Tonelli-Shanks on the multiplicative group).
    pub fn sqrt(&self, a: Fq) -> Option<Fq> {
        if a.is_zero() {
            return Some(Fq::ZERO);
        }
        if self.chi(a) != 1 {
            return None;
        }
        if self.k == 1 {
            return self.base.sqrt(a.0[0]).map(|r| self.from_u32(r));
        }
        let mut q1 = self.q - 1;
        let mut s = 0u32;
        while q1.is_multiple_of(2) {
            q1 /= 2;
            s += 1;
        }
        let z = self.elements().find(|&e| self.chi(e) == -1).expect("nonresidue exists");
        let mut m = s;
        let mut c = self.pow(z, q1);
        let mut t = self.pow(a, q1);
        let mut r = self.pow(a, q1.div_ceil(2));
        while t != Fq::ONE {
            let mut i = 0;
            let mut tt = t;
            while tt != Fq::ONE {
                tt = self.square(tt);
                i += 1;
            }
            let b = self.pow(c, 1u64 << (m - i - 1));
            m = i;
            c = self.square(b);
            t = self.mul(t, c);
            r = self.mul(r, b);
        }
        Some(r)
    }
}

struct ElementIter<'a> {
    field: &'a ExtField,
    cur: Fq,
    done: bool,
}

impl Iterator for ElementIter<'_> {
    type Item = Fq;

    fn next(&mut self) -> Option<Fq> {
        if self.done {
            return None;
        }
        let out = self.cur;
        let p = self.field.base.p;
        let mut i = 0;
        loop {
            if i == self.field.k {
                self.done = true;
                break;
            }
            self.cur.0[i] += 1;
            if self.cur.0[i] < p {
                break;
            }
            self.cur.0[i] = 0;
            i += 1;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        if self.done {
            (0, Some(0))
        } else {
            let n = (self.field.q - self.field.index(self.cur)) as usize;
            (n, Some(n))
        }
    }
}

/// Monic irreducible of degree `k` over `F_p`, least in low-degree-first
/// lexicographic order. Returns the low `k` coefficients.
fn least_irreducible(p: u32, k: usize) -> [u32; MAX_DEGREE] {
    if k == 1 {
        return [0; MAX_DEGREE];
    }
    let total = (p as u64).pow(k as u32);
    for idx in 0..total {
        let mut c = [0u32; MAX_DEGREE];
        let mut r = idx;
        for ci in c.iter_mut().take(k) {
            *ci = (r % p as u64) as u32;
            r /= p as u64;
        }
        let mut poly: Vec<u64> = c[..k].iter().map(|&x| x as u64).collect();
        poly.push(1);
        if is_irreducible_fp(&poly, p as u64) {
            return c;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Rabin's test for a monic polynomial over `F_p` (coefficients low first).
pub fn is_irreducible_fp(f: &[u64], p: u64) -> bool {
    let n = f.len() - 1;
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let x = vec![0, 1];
    // x^{p^n} == x mod f
    let mut xp = x.clone();
    let mut powers = Vec::with_capacity(n + 1);
    powers.push(xp.clone());
    for _ in 0..n {
        xp = fp_poly::powmod(&xp, p, f, p);
        powers.push(xp.clone());
    }
    if fp_poly::trim(fp_poly::sub(&powers[n], &x, p)) != Vec::<u64>::new() {
        return false;
    }
    let mut m = n;
    let mut r = 2;
    let mut primes = Vec::new();
    while r <= m {
        if m.is_multiple_of(r) {
            primes.push(r);
            while m.is_multiple_of(r) {
                m /= r;
            }
        }
        r += 1;
    }
    for r in primes {
        let h = fp_poly::trim(fp_poly::sub(&powers[n / r], &x, p));
        let g = fp_poly::gcd(f.to_vec(), h, p);
        if g.len() > 1 {
            return false;
        }
    }
    true
}

/// Dense polynomials over `F_p` with `u64` coefficients, low degree first.
pub(crate) mod fp_poly {
    use super::pow_mod;

    pub fn trim(mut a: Vec<u64>) -> Vec<u64> {
        while a.last() == Some(&0) {
            a.pop();
        }
        a
    }

    pub fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| {
                let x = a.get(i).copied().unwrap_or(0);
                let y = b.get(i).copied().unwrap_or(0);
                (x + p - y) % p
            })
            .collect()
    }

    pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        let mut r = trim(a.to_vec());
        let m = trim(m.to_vec());
        let dm = m.len() - 1;
        let inv_lead = pow_mod(m[dm], p - 2, p);
        while r.len() > dm {
            let lead = r[r.len() - 1] * inv_lead % p;
            let shift = r.len() - 1 - dm;
            for (i, &mi) in m.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p - lead * mi % p) % p;
            }
            r = trim(r);
        }
        r
    }

    pub fn mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut c = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                c[i + j] = (c[i + j] + x * y) % p;
            }
        }
        rem(&c, m, p)
    }

    pub fn powmod(a: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
        let mut acc = vec![1u64];
        let mut base = rem(a, m, p);
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(&acc, &base, m, p);
            }
            base = mulmod(&base, &base, m, p);
            e >>= 1;
        }
        acc
    }

    pub fn gcd(a: Vec<u64>, b: Vec<u64>, p: u64) -> Vec<u64> {
        let mut a = trim(a);
        let mut b = trim(b);
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }
}

/// Checked arithmetic on elements tied to their field.
#[derive(Clone, Copy, Debug)]
pub struct FieldElement<'f> {
    field: &'f ExtField,
    value: Fq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Inv,
    Pow(u64),
}

impl<'f> FieldElement<'f> {
    pub fn value(&self) -> Fq {
        self.value
    }

    pub fn field(&self) -> &'f ExtField {
        self.field
    }

    /// Apply `op`; unary operations ignore `other`.
    pub fn arith(&self, other: &FieldElement<'_>, op: ArithOp) -> Result<FieldElement<'f>, FieldError> {
        if !matches!(op, ArithOp::Neg | ArithOp::Inv | ArithOp::Pow(_)) && self.field != other.field {
            return Err(FieldError::FieldMismatch);
        }
        let f = self.field;
        let (a, b) = (self.value, other.value);
        let value = match op {
            ArithOp::Add => f.add(a, b),
            ArithOp::Sub => f.sub(a, b),
            ArithOp::Mul => f.mul(a, b),
            ArithOp::Div => f.div(a, b)?,
            ArithOp::Neg => f.neg(a),
            ArithOp::Inv => f.inv(a).ok_or(FieldError::DivisionByZero)?,
            ArithOp::Pow(e) => f.pow(a, e),
        };
        Ok(FieldElement { field: f, value })
    }
}

impl PartialEq for FieldElement<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.value == other.value
    }
}

impl PartialOrd for FieldElement<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.field != other.field {
            return None;
        }
        Some(self.value.cmp(&other.value))
    }
}

/// Rank of a small matrix over `F_q` by Gaussian elimination.
pub fn rank(field: &ExtField, rows: &[Vec<Fq>]) -> usize {
    let mut m: Vec<Vec<Fq>> = rows.to_vec();
    let nrows = m.len();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..ncols {
        let Some(pr) = (r..nrows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, pr);
        let inv = field.inv(m[r][c]).unwrap();
        for i in r + 1..nrows {
            if m[i][c].is_zero() {
                continue;
            }
            let f = field.mul(m[i][c], inv);
            for j in c..ncols {
                let t = field.mul(f, m[r][j]);
                m[i][j] = field.sub(m[i][j], t);
            }
        }
        r += 1;
        if r == nrows {
            break;
        }
    }
    r
}

/// Right kernel basis of a small matrix over `F_q`.
pub fn kernel(field: &ExtField, rows: &[Vec<Fq>], ncols: usize) -> Vec<Vec<Fq>> {
    let mut m: Vec<Vec<Fq>> = rows.to_vec();
    let nrows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(pr) = (r..nrows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, pr);
        let inv = field.inv(m[r][c]).unwrap();
        for j in 0..ncols {
            m[r][j] = field.mul(m[r][j], inv);
        }
        for i in 0..nrows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c];
                for j in 0..ncols {
                    let t = field.mul(f, m[r][j]);
                    m[i][j] = field.sub(m[i][j], t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|f| {
            let mut v = vec![Fq::ZERO; ncols];
            v[f] = Fq::ONE;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = field.neg(m[row][f]);
            }
            v
        })
        .collect()
}

/// Scale a projective point so its first nonzero coordinate is 1.
pub fn normalize_point(field: &ExtField, pt: &mut [Fq]) {
    if let Some(&lead) = pt.iter().find(|c| !c.is_zero()) {
        let inv = field.inv(lead).unwrap();
        for c in pt.iter_mut() {
            *c = field.mul(*c, inv);
        }
    }
}

/// Polynomials of degree at most 4 over `F_q`, low degree first.
pub type SmallPoly = [Fq; 5];

/// Number of distinct roots in `F_q` of a polynomial of degree `<= 4`,
/// via `deg gcd(f, X^q - X)`. The zero polynomial returns `q + 1`, the
/// point count of a projective line lying entirely in the surface.
pub fn quartic_root_count(field: &ExtField, f: &[Fq]) -> u64 {
    let mut f: Vec<Fq> = f.to_vec();
    while f.last().is_some_and(|c| c.is_zero()) {
        f.pop();
    }
    match f.len() {
        0 => return field.q() + 1,
        1 => return 0,
        2 => return 1,
        _ => {}
    }
    if f.len() == 3 {
        // a z^2 + b z + c
        let disc = field.sub(field.square(f[1]), field.scale(field.mul(f[2], f[0]), 4));
        return (1 + field.chi(disc)) as u64;
    }
    let lead_inv = field.inv(*f.last().unwrap()).unwrap();
    let f: Vec<Fq> = f.iter().map(|&c| field.mul(c, lead_inv)).collect();
    let xq = fq_poly::pow_x(field, field.q(), &f);
    let mut h = xq;
    if h.len() < 2 {
        h.resize(2, Fq::ZERO);
    }
    h[1] = field.sub(h[1], Fq::ONE);
    let g = fq_poly::gcd(field, f, fq_poly::trim(h));
    (g.len() - 1) as u64
}

/// Small dense polynomials over `F_q`, low degree first.
pub mod fq_poly {
    use super::{ExtField, Fq};

    pub fn trim(mut a: Vec<Fq>) -> Vec<Fq> {
        while a.last().is_some_and(|c| c.is_zero()) {
            a.pop();
        }
        a
    }

    pub fn rem(field: &ExtField, a: Vec<Fq>, m: &[Fq]) -> Vec<Fq> {
        let mut r = trim(a);
        let dm = m.len() - 1;
        let inv_lead = field.inv(m[dm]).expect("nonzero leading coefficient");
        while r.len() > dm {
            let lead = field.mul(r[r.len() - 1], inv_lead);
            let shift = r.len() - 1 - dm;
            for (i, &mi) in m.iter().enumerate() {
                r[shift + i] = field.sub(r[shift + i], field.mul(lead, mi));
            }
            r = trim(r);
        }
        r
    }

    pub fn mul(field: &ExtField, a: &[Fq], b: &[Fq]) -> Vec<Fq> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut c = vec![Fq::ZERO; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                c[i + j] = field.add(c[i + j], field.mul(x, y));
            }
        }
        c
    }

    /// `X^e mod m` for monic `m`.
    pub fn pow_x(field: &ExtField, e: u64, m: &[Fq]) -> Vec<Fq> {
        let mut acc = vec![Fq::ONE];
        let mut base = rem(field, vec![Fq::ZERO, Fq::ONE], m);
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = rem(field, mul(field, &acc, &base), m);
            }
            base = rem(field, mul(field, &base, &base), m);
            e >>= 1;
        }
        acc
    }

    pub fn gcd(field: &ExtField, a: Vec<Fq>, b: Vec<Fq>) -> Vec<Fq> {
        let mut a = trim(a);
        let mut b = trim(b);
        while !b.is_empty() {
            let r = rem(field, a, &b);
            a = b;
            b = r;
        }
        a
    }

    pub fn eval(field: &ExtField, a: &[Fq], x: Fq) -> Fq {
        a.iter().rev().fold(Fq::ZERO, |acc, &c| field.add(field.mul(acc, x), c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(field: &ExtField, rng: &mut impl Rng) -> Fq {
        field.element(rng.gen_range(0..field.q()))
    }

    #[test]
    fn make_field_errors() {
        assert_eq!(ExtField::new(9, 1), Err(FieldError::NotPrime(9)));
        assert_eq!(ExtField::new(3, 1), Err(FieldError::UnsupportedPrime(3)));
        assert_eq!(ExtField::new(7, 5), Err(FieldError::DegreeOutOfRange(5)));
        assert_eq!(ExtField::new(7, 0), Err(FieldError::DegreeOutOfRange(0)));
    }

    #[test]
    fn prime_field_basics() {
        let f = ExtField::new(7, 1).unwrap();
        assert_eq!(f.q(), 7);
        assert_eq!(f.modulus(), vec![0, 1]);
        assert_eq!(f.mul(f.from_u32(3), f.from_u32(5)), f.from_u32(1));
        assert_eq!(f.inv(f.from_u32(3)), Some(f.from_u32(5)));
        assert_eq!(f.chi(f.from_u32(2)), 1);
        assert_eq!(f.chi(f.from_u32(3)), -1);
        assert_eq!(f.chi(Fq::ZERO), 0);
    }

    #[test]
    fn least_quadratic_modulus_mod_7() {
        // Oracle: enumerate monic quadratics in lexicographic order and test by root search.
        let f = ExtField::new(7, 2).unwrap();
        let mut expected = None;
        'outer: for c0 in 0..7u64 {
            for c1 in 0..7u64 {
                if (0..7u64).all(|x| (x * x + c1 * x + c0) % 7 != 0) {
                    expected = Some(vec![c0 as u32, c1 as u32, 1]);
                    break 'outer;
                }
            }
        }
        assert_eq!(Some(f.modulus()), expected);
        // t * t is the reduction of t^2 by the modulus.
        let t = f.generator_t();
        let m = f.modulus();
        let expect = f.from_coeffs(&[(7 - m[0]) % 7, (7 - m[1]) % 7]);
        assert_eq!(f.mul(t, t), expect);
    }

    #[test]
    fn cubic_field_order() {
        let f = ExtField::new(5, 3).unwrap();
        assert_eq!(f.q(), 125);
        assert_eq!(f.elements().count(), 125);
        for a in f.elements().skip(1) {
            assert_eq!(f.pow(a, 124), Fq::ONE);
        }
    }

    #[test]
    fn field_axioms_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(p, k) in &[(5, 1), (5, 4), (7, 2), (11, 3), (13, 4), (101, 3), (23, 4)] {
            let f = ExtField::new(p, k).unwrap();
            for _ in 0..300 {
                let (a, b, c) = (random(&f, &mut rng), random(&f, &mut rng), random(&f, &mut rng));
                assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                assert_eq!(f.add(a, f.neg(a)), Fq::ZERO);
                if !a.is_zero() {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), Fq::ONE);
                }
            }
        }
    }

    #[test]
    fn frobenius_order_and_fixed_field() {
        for &(p, k) in &[(5, 3), (7, 2), (5, 4)] {
            let f = ExtField::new(p, k).unwrap();
            let mut fixed = 0;
            for a in f.elements() {
                let mut c = a;
                for _ in 0..k {
                    c = f.frobenius(c);
                }
                assert_eq!(c, a);
                assert_eq!(f.frobenius(a), f.pow(a, p));
                if f.frobenius(a) == a {
                    fixed += 1;
                    assert!(a.is_prime_field());
                }
            }
            assert_eq!(fixed, p);
        }
    }

    #[test]
    fn character_matches_euler_exhaustively() {
        for &(p, k) in &[(5, 1), (5, 2), (7, 2), (5, 3), (11, 2)] {
            let f = ExtField::new(p, k).unwrap();
            let mut plus = 0;
            for a in f.elements() {
                assert_eq!(f.chi(a), f.chi_euler(a), "p={p} k={k} a={a:?}");
                if f.chi(a) == 1 {
                    plus += 1;
                }
            }
            assert_eq!(plus, (f.q() - 1) / 2);
        }
        let pf = PrimeField::new(101).unwrap();
        for a in 0..101 {
            assert_eq!(pf.chi(a), pf.legendre(a));
        }
    }

    #[test]
    fn character_multiplicative() {
        let f = ExtField::new(7, 2).unwrap();
        for a in f.elements().skip(1) {
            assert_eq!(f.chi(f.square(a)), 1);
            for b in f.elements().skip(1) {
                assert_eq!(f.chi(f.mul(a, b)), f.chi(a) * f.chi(b));
            }
        }
    }

    #[test]
    fn root_counts() {
        let f = ExtField::new(5, 1).unwrap();
        let x4m1 = [f.from_i64(-1), Fq::ZERO, Fq::ZERO, Fq::ZERO, Fq::ONE];
        assert_eq!(quartic_root_count(&f, &x4m1), 4);
        let f7 = ExtField::new(7, 1).unwrap();
        assert_eq!(quartic_root_count(&f7, &[Fq::ONE, Fq::ZERO, Fq::ONE]), 0);
        assert_eq!(quartic_root_count(&f7, &[Fq::ZERO; 5]), 8);
    }

    #[test]
    fn root_counts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(p, k) in &[(5, 1), (7, 1), (11, 1), (5, 2), (7, 2), (11, 2), (5, 3)] {
            let f = ExtField::new(p, k).unwrap();
            for trial in 0..60 {
                let mut poly = [Fq::ZERO; 5];
                for c in poly.iter_mut() {
                    *c = random(&f, &mut rng);
                }
                if trial % 5 == 0 {
                    // force repeated roots: (z - r)^2 (z - s)(z - s')
                    let r = random(&f, &mut rng);
                    let s = random(&f, &mut rng);
                    let lin = |c: Fq| vec![f.neg(c), Fq::ONE];
                    let sq = fq_poly::mul(&f, &lin(r), &lin(r));
                    let pr = fq_poly::mul(&f, &sq, &fq_poly::mul(&f, &lin(s), &lin(r)));
                    poly.copy_from_slice(&pr);
                }
                let brute = f.elements().filter(|&z| fq_poly::eval(&f, &poly, z).is_zero()).count() as u64;
                assert_eq!(quartic_root_count(&f, &poly), brute);
            }
        }
    }

    #[test]
    fn sqrt_roundtrip() {
        for &(p, k) in &[(7, 1), (13, 2), (5, 3)] {
            let f = ExtField::new(p, k).unwrap();
            for a in f.elements() {
                match f.sqrt(a) {
                    Some(r) => assert_eq!(f.square(r), a),
                    None => assert_eq!(f.chi(a), -1),
                }
            }
        }
    }

    #[test]
    fn checked_arith() {
        let f7 = ExtField::new(7, 1).unwrap();
        let f11 = ExtField::new(11, 1).unwrap();
        let a = f7.wrap(f7.from_u32(3));
        let b = f7.wrap(f7.from_u32(5));
        assert_eq!(a.arith(&b, ArithOp::Mul).unwrap().value(), Fq::ONE);
        assert_eq!(a.arith(&a, ArithOp::Inv).unwrap().value(), f7.from_u32(5));
        let zero = f7.wrap(Fq::ZERO);
        assert_eq!(a.arith(&zero, ArithOp::Div), Err(FieldError::DivisionByZero));
        let c = f11.wrap(f11.from_u32(3));
        assert_eq!(a.arith(&c, ArithOp::Add), Err(FieldError::FieldMismatch));
    }
}
