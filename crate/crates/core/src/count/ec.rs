//! Frobenius traces of elliptic curves and character sums of quartics.
//!
//! For `h` of degree 3 or 4 without repeated roots, `y^2 = h(z)` is a genus
//! one curve whose Jacobian is `Y^2 = X^3 - 27 I X - 27 J` with `I, J` the
//! classical invariants of the binary quartic. Its trace gives
//! `sum_z chi(h(z)) = -a - chi(lead)`, which turns an `O(q)` loop into a
//! baby-step giant-step computation in the group.

use crate::ff::{ExtField, Fq};

/// Below this field size the trace is computed by a direct character sum.
pub const NAIVE_LIMIT: u64 = 600;

const MAX_ATTEMPTS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pt {
    Inf,
    Aff(Fq, Fq),
}

/// Short Weierstrass curve `y^2 = x^3 + a x + b` over `F_q`.
struct Curve<'f> {
    f: &'f ExtField,
    a: Fq,
}

impl Curve<'_> {
    fn neg(&self, p: Pt) -> Pt {
        match p {
            Pt::Inf => Pt::Inf,
            Pt::Aff(x, y) => Pt::Aff(x, self.f.neg(y)),
        }
    }

    fn add(&self, p: Pt, q: Pt) -> Pt {
        let f = self.f;
        match (p, q) {
            (Pt::Inf, _) => q,
            (_, Pt::Inf) => p,
            (Pt::Aff(x1, y1), Pt::Aff(x2, y2)) => {
                let lambda = if x1 == x2 {
                    if f.add(y1, y2).is_zero() {
                        return Pt::Inf;
                    }
                    let num = f.add(f.scale(f.square(x1), 3), self.a);
                    f.mul(num, f.inv(f.add(y1, y1)).unwrap())
                } else {
                    f.mul(f.sub(y2, y1), f.inv(f.sub(x2, x1)).unwrap())
                };
                let x3 = f.sub(f.sub(f.square(lambda), x1), x2);
                let y3 = f.sub(f.mul(lambda, f.sub(x1, x3)), y1);
                Pt::Aff(x3, y3)
            }
        }
    }

    fn mul(&self, p: Pt, n: u64) -> Pt {
        let mut acc = Pt::Inf;
        let mut base = p;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.add(acc, base);
            }
            base = self.add(base, base);
            n >>= 1;
        }
        acc
    }

    fn mul_signed(&self, p: Pt, n: i64) -> Pt {
        let r = self.mul(p, n.unsigned_abs());
        if n < 0 {
            self.neg(r)
        } else {
            r
        }
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `a = q + 1 - #E(F_q)` by a direct character sum.
pub fn trace_naive(field: &ExtField, a: Fq, b: Fq) -> i64 {
    let mut s = 0i64;
    for x in field.elements() {
        let rhs = field.add(field.mul(field.add(field.square(x), a), x), b);
        s += field.chi(rhs) as i64;
    }
    -s
}

/// Trace of Frobenius of the nonsingular curve `y^2 = x^3 + a x + b`.
pub fn trace(field: &ExtField, a: Fq, b: Fq) -> i64 {
    let q = field.q();
    if q <= NAIVE_LIMIT {
        return trace_naive(field, a, b);
    }
    trace_bsgs(field, a, b).unwrap_or_else(|| trace_naive(field, a, b))
}

/// Baby-step giant-step on random points of the curve and its quadratic
/// twist. A point on the twist by `f = x^3 + a x + b` is `(x f, f^2)` on
/// `Y^2 = X^3 + a f^2 X + b f^3`, so no square roots are needed.
fn trace_bsgs(field: &ExtField, a: Fq, b: Fq) -> Option<i64> {
    let q = field.q();
    let bound = 2 * isqrt(q) as i64 + 1;
    let mut cands: Option<Vec<i64>> = None;
    let mut state = (field.index(a) ^ field.index(b).rotate_left(29)) | 1;
    let m = isqrt(2 * bound as u64 + 1) as i64 + 1;
    let width = 2 * m + 1;
    let steps = bound / width + 2;
    let mut baby: Vec<(u64, i64, Fq)> = Vec::with_capacity(m as usize + 1);
    for _ in 0..MAX_ATTEMPTS {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let x = field.element(state % q);
        let fx = field.add(field.mul(field.add(field.square(x), a), x), b);
        if fx.is_zero() {
            continue;
        }
        let eps = field.chi(fx) as i64;
        let f2 = field.square(fx);
        let curve = Curve { f: field, a: field.mul(a, f2) };
        let pt = Pt::Aff(field.mul(x, fx), f2);
        // want b' = eps * a with (q + 1) P = b' P
        let found: Vec<i64> = match &cands {
            Some(c) if c.len() <= 6 => c
                .iter()
                .copied()
                .filter(|&t| curve.mul_signed(pt, q as i64 + 1 - eps * t) == Pt::Inf)
                .collect(),
            _ => {
                baby.clear();
                let mut zeros = Vec::new();
                let mut cur = Pt::Inf;
                for j in 0..=m {
                    match cur {
                        Pt::Aff(bx, by) => baby.push((bx.key(), j, by)),
                        Pt::Inf => zeros.push(j),
                    }
                    cur = curve.add(cur, pt);
                }
                baby.sort_unstable_by_key(|e| e.0);
                let giant = curve.mul(pt, width as u64);
                let r = curve.mul(pt, q + 1);
                let mut t = curve.add(r, curve.mul(giant, steps as u64));
                let neg_giant = curve.neg(giant);
                let mut hits = Vec::new();
                for s in -steps..=steps {
                    // t = R - s G
                    match t {
                        Pt::Inf => {
                            for &j in &zeros {
                                hits.push(s * width + j);
                                hits.push(s * width - j);
                            }
                        }
                        Pt::Aff(tx, ty) => {
                            let key = tx.key();
                            let start = baby.partition_point(|e| e.0 < key);
                            for &(_, j, by) in baby[start..].iter().take_while(|e| e.0 == key) {
                                // both signs when the point is 2-torsion
                                if by == ty {
                                    hits.push(s * width + j);
                                }
                                if field.add(by, ty).is_zero() {
                                    hits.push(s * width - j);
                                }
                            }
                        }
                    }
                    t = curve.add(t, neg_giant);
                }
                let mut out: Vec<i64> = hits
                    .into_iter()
                    .filter(|&v| v.abs() <= bound)
                    .map(|v| eps * v)
                    .collect();
                out.sort_unstable();
                out.dedup();
                if let Some(c) = &cands { out.retain(|v| c.contains(v)) }
                out
            }
        };
        if found.is_empty() {
            return None;
        }
        if found.len() == 1 {
            return Some(found[0]);
        }
        cands = Some(found);
    }
    None
}

/// Binary quartic invariants `(I, J)` of `a z^4 + b z^3 + c z^2 + d z + e`.
pub fn quartic_invariants(field: &ExtField, h: [Fq; 5]) -> (Fq, Fq) {
    let f = field;
    let [e, d, c, b, a] = h;
    let i = f.add(f.sub(f.scale(f.mul(a, e), 12), f.scale(f.mul(b, d), 3)), f.square(c));
    let ace = f.mul(f.mul(a, c), e);
    let bcd = f.mul(f.mul(b, c), d);
    let ad2 = f.mul(a, f.square(d));
    let eb2 = f.mul(e, f.square(b));
    let c3 = f.mul(f.square(c), c);
    let j = f.sub(
        f.sub(f.sub(f.add(f.scale(ace, 72), f.scale(bcd, 9)), f.scale(ad2, 27)), f.scale(eb2, 27)),
        f.scale(c3, 2),
    );
    (i, j)
}

/// `sum_{z in F_q} chi(h(z))` for a polynomial of degree at most 6.
pub fn char_sum(field: &ExtField, h: &[Fq]) -> i64 {
    let q = field.q() as i64;
    let mut len = h.len();
    while len > 0 && h[len - 1].is_zero() {
        len -= 1;
    }
    // len is the degree plus one
    match len {
        0 => 0,
        1 => q * field.chi(h[0]) as i64,
        2 => 0,
        3 => {
            let (c, b, a) = (h[0], h[1], h[2]);
            let disc = field.sub(field.square(b), field.scale(field.mul(a, c), 4));
            let ca = field.chi(a) as i64;
            if disc.is_zero() {
                (q - 1) * ca
            } else {
                -ca
            }
        }
        4 | 5 => {
            let h5 = [h[0], h[1], h[2], h[3], if len == 5 { h[4] } else { Fq::ZERO }];
            let (i, j) = quartic_invariants(field, h5);
            // 27 disc = 4 I^3 - J^2
            let d = field.sub(field.scale(field.mul(field.square(i), i), 4), field.square(j));
            if d.is_zero() {
                return char_sum_naive(field, h);
            }
            let ea = field.neg(field.scale(i, 27));
            let eb = field.neg(field.scale(j, 27));
            -trace(field, ea, eb) - field.chi(h5[4]) as i64
        }
        _ => char_sum_naive(field, h),
    }
}

pub fn char_sum_naive(field: &ExtField, h: &[Fq]) -> i64 {
    field
        .elements()
        .map(|z| field.chi(crate::ff::fq_poly::eval(field, h, z)) as i64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bsgs_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(p, k) in &[(29, 2), (11, 3), (101, 2), (7, 4), (31, 2), (13, 3)] {
            let f = ExtField::new(p, k).unwrap();
            for _ in 0..150 {
                let a = f.element(rng.gen_range(0..f.q()));
                let b = f.element(rng.gen_range(0..f.q()));
                let d = f.add(f.scale(f.mul(f.square(a), a), 4), f.scale(f.square(b), 27));
                if d.is_zero() {
                    continue;
                }
                let naive = trace_naive(&f, a, b);
                assert!(naive.abs() as f64 <= 2.0 * (f.q() as f64).sqrt());
                assert_eq!(trace_bsgs(&f, a, b), Some(naive), "p={p} k={k} a={a:?} b={b:?}");
            }
        }
    }

    #[test]
    fn supersingular_and_small_order_curves() {
        // y^2 = x^3 + x over F_{p^2} with p = 3 mod 4: supersingular, trace +-2p
        let f = ExtField::new(43, 2).unwrap();
        let a = trace_bsgs(&f, Fq::ONE, Fq::ZERO);
        assert_eq!(a, Some(trace_naive(&f, Fq::ONE, Fq::ZERO)));
        let f = ExtField::new(1009, 1).unwrap();
        for b in 1..30 {
            let bb = f.from_u32(b);
            assert_eq!(trace_bsgs(&f, Fq::ZERO, bb), Some(trace_naive(&f, Fq::ZERO, bb)));
        }
    }

    #[test]
    fn character_sums_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(p, k) in &[(5, 1), (7, 1), (11, 2), (13, 1), (7, 3), (41, 2)] {
            let f = ExtField::new(p, k).unwrap();
            for trial in 0..80 {
                let deg = trial % 7;
                let mut h: Vec<Fq> = (0..=deg).map(|_| f.element(rng.gen_range(0..f.q()))).collect();
                if trial % 9 == 0 && deg >= 3 {
                    // repeated root
                    let r = f.element(rng.gen_range(0..f.q()));
                    let sq = crate::ff::fq_poly::mul(&f, &[f.neg(r), Fq::ONE], &[f.neg(r), Fq::ONE]);
                    h = crate::ff::fq_poly::mul(&f, &sq, &h[..deg - 1]);
                }
                assert_eq!(char_sum(&f, &h), char_sum_naive(&f, &h), "p={p} k={k} h={h:?}");
            }
        }
    }
}

