//! Point counts of the nodal quartic over `F_{p^k}` and their lift to the
//! minimal resolution.
//!
//! The production path projects from the node `(0:0:0:1)`: writing the
//! equation as `Q w^2 + K w + F`, a point `(x:y:z)` of the plane has
//! `1 + chi(K^2 - 4QF)` preimages when `Q != 0`. Summing over the pencil of
//! lines through `(0:0:1)`, each line contributes a character sum of the
//! restricted discriminant. The discriminant contains the three tropes
//! through the center, so on each line it is a quartic and the sum is the
//! trace of an elliptic curve (see [`ec`]).
//!
//! The direct method, the fibration method and plain enumeration of
//! `P^3(F_q)` are independent cross-checks.

pub mod ec;
pub mod singular;

use std::time::Instant;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{build_quartic, DenseForm, Exponent, ReducedSurface};
use crate::ff::{self, fq_poly, ExtField, FieldError, Fq};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CountError {
    #[error("node {0} is not rational over F_p")]
    NodeNotRational(usize),
    #[error("tangent cone at node {0} is degenerate")]
    DegenerateTangentCone(usize),
    #[error("the quartic is not singular at node {0}")]
    NotSingular(usize),
    #[error("no F_p-point off the surface found")]
    NoExteriorPoint,
    #[error("fewer than two rational nodes")]
    InsufficientRationalNodes,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Degree-two model summed over the pencil of lines through one point.
    Pencil,
    /// Degree-two model enumerated over Frobenius-orbit representatives of the plane.
    DegreeTwo,
    /// Degree-two model enumerated over every point of the plane.
    DegreeTwoFull,
    Direct,
    Fibration,
    BruteForce,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pencil => "pencil",
            Method::DegreeTwo => "degree-two",
            Method::DegreeTwoFull => "degree-two-full",
            Method::Direct => "direct",
            Method::Fibration => "fibration",
            Method::BruteForce => "brute-force",
        }
    }
}

/// `V: Q w^2 + K w + F = 0` after moving a rational node to `(0:0:0:1)`.
#[derive(Clone, Debug)]
pub struct DegreeTwoModel {
    pub p: u64,
    pub node: usize,
    /// Columns are the images of the new coordinate vectors; the last is the node.
    pub transform: [[u32; 4]; 4],
    pub q: DenseForm,
    pub k: DenseForm,
    pub f: DenseForm,
}

impl DegreeTwoModel {
    /// The ramification sextic `K^2 - 4 Q F`.
    pub fn ramification(&self) -> DenseForm {
        let kk = self.k.mul(&self.k, self.p);
        let qf = self.q.mul(&self.f, self.p);
        kk.add_scaled(&qf, self.p - 4, self.p)
    }

    /// `#{w : Q w^2 + K w + F = 0}` over the given field (`q` for `Q = K = F = 0`).
    #[inline]
    fn fiber(&self, field: &ExtField, pt: &[Fq; 4]) -> u64 {
        let qv = self.q.eval(field, pt);
        let kv = self.k.eval(field, pt);
        if qv.is_zero() {
            if !kv.is_zero() {
                return 1;
            }
            return if self.f.eval(field, pt).is_zero() { field.q() } else { 0 };
        }
        let fv = self.f.eval(field, pt);
        let disc = field.sub(field.square(kv), field.scale(field.mul(qv, fv), 4));
        (1 + field.chi(disc) as i64) as u64
    }
}

pub fn degree_two_model(surface: &ReducedSurface, node: usize) -> Result<DegreeTwoModel, CountError> {
    if surface.orbit_sizes[node] != 1 {
        return Err(CountError::NodeNotRational(node));
    }
    let p = surface.p;
    let pt: Vec<u32> = surface.nodes[node].iter().map(|c| c.0[0]).collect();
    let lead = (0..4).find(|&i| pt[i] != 0).expect("projective point");
    let mut transform = [[0u32; 4]; 4];
    let mut col = 0;
    for j in 0..4 {
        if j != lead {
            transform[j][col] = 1;
            col += 1;
        }
    }
    for i in 0..4 {
        transform[i][3] = pt[i];
    }
    let map: [[BigInt; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| BigInt::from(transform[i][j])));
    let g = build_quartic(&surface.cv).compose(&map).reduce(p);
    let mut slices: [Vec<(Exponent, u32)>; 3] = Default::default();
    for &(e, c) in &g.terms {
        if e[3] > 2 {
            return Err(CountError::NotSingular(node));
        }
        let mut e2 = e;
        e2[3] = 0;
        slices[e[3] as usize].push((e2, c));
    }
    let [f, k, q] = slices;
    let model = DegreeTwoModel {
        p,
        node,
        transform,
        q: DenseForm { degree: 2, terms: q },
        k: DenseForm { degree: 3, terms: k },
        f: DenseForm { degree: 4, terms: f },
    };
    let fp = ExtField::new(p, 1)?;
    let gram: Vec<Vec<Fq>> = (0..3)
        .map(|a| {
            (0..3)
                .map(|b| {
                    let mut e = [0u8; 4];
                    e[a] += 1;
                    e[b] += 1;
                    let c = fp.from_u32(model.q.coeff(&e));
                    // symmetric matrix of Q, doubled to stay integral
                    if a == b {
                        fp.scale(c, 2)
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    if ff::rank(&fp, &gram) != 3 {
        return Err(CountError::DegenerateTangentCone(node));
    }
    Ok(model)
}

/// Normalized points of `P^2(F_q)`: `(1:y:z)`, `(0:1:z)`, `(0:0:1)`.
fn plane_point(field: &ExtField, idx: u64) -> [Fq; 4] {
    let q = field.q();
    if idx < q * q {
        [Fq::ONE, field.element(idx / q), field.element(idx % q), Fq::ZERO]
    } else if idx < q * q + q {
        [Fq::ZERO, Fq::ONE, field.element(idx - q * q), Fq::ZERO]
    } else {
        [Fq::ZERO, Fq::ZERO, Fq::ONE, Fq::ZERO]
    }
}

/// Orbit size if `pt` is the lexicographically least of its conjugates.
#[inline]
fn canonical_orbit<const N: usize>(field: &ExtField, pt: &[Fq; N]) -> Option<u64> {
    let mut c = *pt;
    for j in 1..=field.k() as u64 {
        for x in c.iter_mut() {
            *x = field.frobenius(*x);
        }
        if c == *pt {
            return Some(j);
        }
        if c < *pt {
            return None;
        }
    }
    unreachable!("Frobenius has order dividing k")
}

/// `#V(F_{p^k})` by enumerating the plane of the degree-two model. With
/// `orbits`, only Frobenius-orbit representatives are visited and weighted
/// by orbit size.
pub fn count_degree_two(model: &DegreeTwoModel, k: usize, orbits: bool) -> Result<u64, CountError> {
    let field = ExtField::new(model.p, k)?;
    let q = field.q();
    let total = q * q + q + 1;
    let sum: u64 = (0..total)
        .into_par_iter()
        .map(|idx| {
            let pt = plane_point(&field, idx);
            let weight = if orbits {
                match canonical_orbit(&field, &pt) {
                    Some(w) => w,
                    None => return 0,
                }
            } else {
                1
            };
            weight * model.fiber(&field, &pt)
        })
        .sum();
    Ok(1 + sum)
}

/// A ternary form restricted to the lines `(1 : t : z)`, as polynomials
/// in `t` for each power of `z`.
struct LineRestriction {
    by_z: Vec<Vec<Fq>>,
    at_infinity: Vec<Fq>,
}

impl LineRestriction {
    fn new(form: &DenseForm, degree: usize) -> Self {
        let mut by_z = vec![vec![Fq::ZERO; degree + 1]; degree + 1];
        let mut at_infinity = vec![Fq::ZERO; degree + 1];
        for &(e, c) in &form.terms {
            let c = Fq([c, 0, 0, 0]);
            by_z[e[2] as usize][e[1] as usize] = c;
            if e[0] == 0 {
                at_infinity[e[2] as usize] = c;
            }
        }
        LineRestriction { by_z, at_infinity }
    }

    #[inline]
    fn eval<const N: usize>(&self, field: &ExtField, t: Fq) -> [Fq; N] {
        let mut out = [Fq::ZERO; N];
        for (j, poly) in self.by_z.iter().enumerate().take(N) {
            out[j] = poly.iter().rev().fold(Fq::ZERO, |acc, &c| field.add(field.mul(acc, t), c));
        }
        out
    }
}

fn trimmed(a: &[Fq]) -> &[Fq] {
    let mut n = a.len();
    while n > 0 && a[n - 1].is_zero() {
        n -= 1;
    }
    &a[..n]
}

/// Affine roots in `F_q` of a polynomial of degree at most 2 (`q` if zero).
#[inline]
fn quadratic_roots(field: &ExtField, a: &[Fq; 3]) -> u64 {
    match trimmed(a).len() {
        0 => field.q(),
        1 => 0,
        2 => 1,
        _ => {
            let disc = field.sub(field.square(a[1]), field.scale(field.mul(a[2], a[0]), 4));
            (1 + field.chi(disc) as i64) as u64
        }
    }
}

/// `sum_z #{w}` over the affine line `z -> (x0 : y0 : z)` given the
/// restricted `Q, K, F` and discriminant.
fn line_sum(field: &ExtField, qv: &[Fq; 3], kv: &[Fq; 4], fv: &[Fq; 5], dv: &[Fq; 7]) -> i64 {
    let q = field.q() as i64;
    let nq = quadratic_roots(field, qv);
    let mut total = q + ec::char_sum(field, dv) - nq as i64;
    if nq > 0 {
        let g = fq_poly::gcd(field, trimmed(qv).to_vec(), trimmed(kv).to_vec());
        if g.len() != 1 {
            let g = fq_poly::gcd(field, g, trimmed(fv).to_vec());
            let common = match g.len() {
                0 => field.q(),
                1 => 0,
                _ => ff::quartic_root_count(field, &g),
            };
            total += q * common as i64;
        }
    }
    total
}

/// `#V(F_{p^k})` from a model centered at `(0:0:0:1)` in the original
/// coordinates, summing over the pencil of lines through `(0:0:1)`.
pub fn count_pencil(model: &DegreeTwoModel, k: usize) -> Result<u64, CountError> {
    let field = ExtField::new(model.p, k)?;
    let q = field.q();
    let delta = model.ramification();
    let rq = LineRestriction::new(&model.q, 2);
    let rk = LineRestriction::new(&model.k, 3);
    let rf = LineRestriction::new(&model.f, 4);
    let rd = LineRestriction::new(&delta, 6);
    let lines: i64 = (0..q)
        .into_par_iter()
        .map(|idx| {
            let t = field.element(idx);
            let Some(w) = canonical_orbit(&field, &[t]) else { return 0 };
            let qv = rq.eval::<3>(&field, t);
            let kv = rk.eval::<4>(&field, t);
            let fv = rf.eval::<5>(&field, t);
            let dv = rd.eval::<7>(&field, t);
            w as i64 * line_sum(&field, &qv, &kv, &fv, &dv)
        })
        .sum();
    let at_inf = |r: &LineRestriction, n: usize| -> Vec<Fq> { r.at_infinity[..n].to_vec() };
    let (qv, kv, fv, dv) = (at_inf(&rq, 3), at_inf(&rk, 4), at_inf(&rf, 5), at_inf(&rd, 7));
    let x0 = line_sum(
        &field,
        &qv.try_into().unwrap(),
        &kv.try_into().unwrap(),
        &fv.try_into().unwrap(),
        &dv.try_into().unwrap(),
    );
    let apex = model.fiber(&field, &[Fq::ZERO, Fq::ZERO, Fq::ONE, Fq::ZERO]) as i64;
    let total = 1 + apex + x0 + lines;
    Ok(total as u64)
}

/// `#V(F_{p^k})` by exhaustive evaluation on `P^3(F_q)`.
pub fn count_brute_force(surface: &ReducedSurface, k: usize) -> Result<u64, CountError> {
    let field = ExtField::new(surface.p, k)?;
    let q = field.q();
    let mut count = 0u64;
    for lead in 0..4 {
        let free = 3 - lead;
        let n = q.pow(free as u32);
        count += (0..n)
            .into_par_iter()
            .filter(|&idx| {
                let mut pt = [Fq::ZERO; 4];
                pt[lead] = Fq::ONE;
                let mut r = idx;
                for c in pt.iter_mut().skip(lead + 1) {
                    *c = field.element(r % q);
                    r /= q;
                }
                surface.form.eval(&field, &pt).is_zero()
            })
            .count() as u64;
    }
    Ok(count)
}

fn exterior_point(surface: &ReducedSurface, field: &ExtField) -> Option<[Fq; 4]> {
    let p = surface.p as u32;
    for a in 0..p.min(5) {
        for b in 0..p.min(5) {
            for c in 0..p.min(5) {
                let pt = [Fq::ONE, field.from_u32(a), field.from_u32(b), field.from_u32(c)];
                if !surface.form.eval(field, &pt).is_zero() {
                    return Some(pt);
                }
            }
        }
    }
    None
}

/// `#V(F_{p^k})` by intersecting with the lines through a point `O` off `V`.
pub fn count_direct(surface: &ReducedSurface, k: usize) -> Result<u64, CountError> {
    let field = ExtField::new(surface.p, k)?;
    let o = exterior_point(surface, &field).ok_or(CountError::NoExteriorPoint)?;
    // O = (1 : ...), so the plane x = 0 is a complement
    let q = field.q();
    let total = q * q + q + 1;
    let samples: Vec<Fq> = (0..5).map(|s| field.from_u32(s)).collect();
    let lagrange = lagrange_basis(&field, &samples);
    let sum: u64 = (0..total)
        .into_par_iter()
        .map(|idx| {
            let d = plane_point(&field, idx);
            let d = [Fq::ZERO, d[0], d[1], d[2]];
            let values: Vec<Fq> = samples
                .iter()
                .map(|&s| {
                    let pt: [Fq; 4] = std::array::from_fn(|i| field.add(d[i], field.mul(s, o[i])));
                    surface.form.eval(&field, &pt)
                })
                .collect();
            let mut poly = [Fq::ZERO; 5];
            for (v, basis) in values.iter().zip(&lagrange) {
                for (c, b) in poly.iter_mut().zip(basis) {
                    *c = field.add(*c, field.mul(*v, *b));
                }
            }
            ff::quartic_root_count(&field, &poly)
        })
        .sum();
    Ok(sum)
}

/// Coefficient vectors of the Lagrange basis polynomials on the nodes.
fn lagrange_basis(field: &ExtField, nodes: &[Fq]) -> Vec<Vec<Fq>> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut poly = vec![Fq::ONE];
            let mut denom = Fq::ONE;
            for (j, &xj) in nodes.iter().enumerate() {
                if i != j {
                    poly = fq_poly::mul(field, &poly, &[field.neg(xj), Fq::ONE]);
                    denom = field.mul(denom, field.sub(xi, xj));
                }
            }
            let inv = field.inv(denom).unwrap();
            poly.iter().map(|&c| field.mul(c, inv)).collect()
        })
        .collect()
}

/// `#V(F_{p^k})` via the pencil of planes through the line joining two
/// rational nodes. Inside each plane the section is projected from the
/// first node, which makes it quadratic in the remaining coordinate.
pub fn count_fibration(surface: &ReducedSurface, k: usize) -> Result<u64, CountError> {
    let field = ExtField::new(surface.p, k)?;
    let rational: Vec<usize> = (0..14).filter(|&i| surface.orbit_sizes[i] == 1).collect();
    if rational.len() < 2 {
        return Err(CountError::InsufficientRationalNodes);
    }
    let lift = |pt: &[Fq; 4]| -> [Fq; 4] { std::array::from_fn(|i| field.from_u32(pt[i].0[0])) };
    let n1 = lift(&surface.nodes[rational[0]]);
    let n2 = lift(&surface.nodes[rational[1]]);
    // complete n1, n2 to a basis with two unit vectors
    let fp = ExtField::new(surface.p, 1)?;
    let mut extra = Vec::new();
    for i in 0..4 {
        let mut e = [Fq::ZERO; 4];
        e[i] = Fq::ONE;
        let mut rows = vec![n1.to_vec(), n2.to_vec()];
        rows.extend(extra.iter().map(|v: &[Fq; 4]| v.to_vec()));
        rows.push(e.to_vec());
        if ff::rank(&fp, &rows) == rows.len() {
            extra.push(e);
        }
        if extra.len() == 2 {
            break;
        }
    }
    let (u, v) = (extra[0], extra[1]);
    let q = field.q();
    let f = &surface.form;
    let combo = |a: Fq, b: Fq, c: Fq, w: &[Fq; 4]| -> [Fq; 4] {
        std::array::from_fn(|i| field.add(field.add(field.mul(a, n1[i]), field.mul(b, n2[i])), field.mul(c, w[i])))
    };
    let minus_one = field.neg(Fq::ONE);
    // planes spanned by n1, n2 and W = U + m V (m in F_q) or W = V
    let planes = q + 1;
    let off_line: u64 = (0..planes)
        .into_par_iter()
        .map(|m| {
            let w: [Fq; 4] = if m < q {
                let mm = field.element(m);
                std::array::from_fn(|i| field.add(u[i], field.mul(mm, v[i])))
            } else {
                v
            };
            let mut s = 0u64;
            for b in field.elements() {
                let g0 = f.eval(&field, &combo(Fq::ZERO, b, Fq::ONE, &w));
                let g1 = f.eval(&field, &combo(Fq::ONE, b, Fq::ONE, &w));
                let gm = f.eval(&field, &combo(minus_one, b, Fq::ONE, &w));
                // g(a) = alpha a^2 + beta a + gamma
                let inv2 = field.inv(field.from_u32(2)).unwrap();
                let alpha = field.mul(field.sub(field.add(g1, gm), field.add(g0, g0)), inv2);
                let beta = field.mul(field.sub(g1, gm), inv2);
                s += quadratic_roots(&field, &[g0, beta, alpha]);
            }
            s
        })
        .sum();
    let on_line = if f.eval(&field, &combo(Fq::ONE, Fq::ONE, Fq::ZERO, &u)).is_zero() { q + 1 } else { 2 };
    Ok(off_line + on_line)
}

/// Counts on the nodal quartic and its resolution for `k = 1..=K`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointCounts {
    pub p: u64,
    /// `nv[i] = #V(F_{p^(i+1)})`.
    pub nv: Vec<u64>,
    pub nres: Vec<u64>,
    /// `t_k = Nres_k - 1 - p^(2k)`; fits `i64` for every supported `p^k`.
    pub traces: Vec<i64>,
}

impl PointCounts {
    pub fn max_k(&self) -> usize {
        self.nv.len()
    }
}

/// Blow up the nodes: each `F_{p^k}`-rational node becomes a conic with
/// `p^k + 1` points.
pub fn lift_counts_to_resolution(p: u64, nv: &[u64], orbit_sizes: &[u8]) -> PointCounts {
    let mut nres = Vec::with_capacity(nv.len());
    let mut traces = Vec::with_capacity(nv.len());
    for (i, &n) in nv.iter().enumerate() {
        let k = i as u32 + 1;
        let fixed = orbit_sizes.iter().filter(|&&d| k.is_multiple_of(d as u32)).count() as u64;
        let pk = p.pow(k);
        let r = n + pk * fixed;
        nres.push(r);
        traces.push(r as i64 - 1 - (pk as i64) * (pk as i64));
    }
    PointCounts { p, nv: nv.to_vec(), nres, traces }
}

/// One timed count, for the optional CSV dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub p: u64,
    pub k: usize,
    pub method: Method,
    pub nv: u64,
    pub nres: u64,
    pub trace: i64,
    pub millis: f64,
}

impl CountRow {
    pub fn csv_header() -> &'static str {
        "p,k,method,Nv,Nres,t,wall_ms"
    }

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{},{},{:.3}", self.p, self.k, self.method.name(), self.nv, self.nres, self.trace, self.millis)
    }
}

/// Count with the chosen method, timing it.
pub fn count_with(surface: &ReducedSurface, k: usize, method: Method) -> Result<CountRow, CountError> {
    let start = Instant::now();
    let nv = match method {
        Method::Pencil => count_pencil(&degree_two_model(surface, 0)?, k)?,
        Method::DegreeTwo => count_degree_two(&degree_two_model(surface, 0)?, k, true)?,
        Method::DegreeTwoFull => count_degree_two(&degree_two_model(surface, 0)?, k, false)?,
        Method::Direct => count_direct(surface, k)?,
        Method::Fibration => count_fibration(surface, k)?,
        Method::BruteForce => count_brute_force(surface, k)?,
    };
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let fixed = surface.fixed_nodes(k as u32) as u64;
    let pk = surface.p.pow(k as u32);
    let nres = nv + pk * fixed;
    let trace = nres as i64 - 1 - (pk as i64) * (pk as i64);
    Ok(CountRow { p: surface.p, k, method, nv, nres, trace, millis })
}
