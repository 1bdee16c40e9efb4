//! Cayley-Rohn quartics: the determinantal equation, its 14 nodes and
//! 6 tropes, reduction modulo primes and random sampling.
//!
//! A coefficient vector `[c1..c8]` defines `A = c1 x + c2 y + c3 z + c4 w`
//! and `B = c5 x + c6 y + c7 z + c8 w`. The surface is the determinant of
//!
//! ```text
//! | 0 x y z |
//! | x 0 w A |
//! | y w 0 B |
//! | z A B 0 |
//! ```
//!
//! so the paired linear forms are `(l1, l1') = (x, B)`, `(l2, l2') = (y, A)`,
//! `(l3, l3') = (z, w)` and the equation is
//! `sum li^2 li'^2 - 2 sum_{i<j} li lj li' lj'`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ff::{self, ExtField, Fq};
use crate::count;
use crate::linalg;
use crate::surd::{Scalar, Surd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("restriction to trope {0} is not a perfect square")]
    NotAPerfectSquare(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BadReduction {
    #[error("p = {0} is not a supported prime")]
    UnsupportedPrime(u64),
    #[error("nodes {0} and {1} collide mod p")]
    Collision(usize, usize),
    #[error("node {0} is not an ordinary double point mod p")]
    NotA1(usize),
    #[error("degenerate linear system for node {0} mod p")]
    DegenerateSystem(usize),
    #[error("singular points beyond the 14 nodes mod p")]
    ExtraSingularity,
}

/// The eight integers `[c1, ..., c8]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(pub [i64; 8]);

impl fmt::Display for CoefficientVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl CoefficientVector {
    pub fn new(c: [i64; 8]) -> Self {
        CoefficientVector(c)
    }

    /// `A = c1 x + c2 y + c3 z + c4 w`.
    pub fn form_a(&self) -> [i64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    /// `B = c5 x + c6 y + c7 z + c8 w`.
    pub fn form_b(&self) -> [i64; 4] {
        [self.0[4], self.0[5], self.0[6], self.0[7]]
    }

    /// `[l1, l2, l3, l1', l2', l3']`.
    pub fn linear_forms(&self) -> [[i64; 4]; 6] {
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], self.form_b(), self.form_a(), [0, 0, 0, 1]]
    }

    /// The pair `(li, li')` for `i` in `0..3`.
    pub fn pair(&self, i: usize) -> ([i64; 4], [i64; 4]) {
        let l = self.linear_forms();
        (l[i], l[i + 3])
    }
}

pub type Exponent = [u8; 4];

/// A homogeneous polynomial in `x, y, z, w` with integer coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Form {
    degree: u8,
    coeffs: BTreeMap<Exponent, BigInt>,
}

pub type QuarticForm = Form;

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*x^{}y^{}z^{}w^{}", e[0], e[1], e[2], e[3])?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Form {
    pub fn zero(degree: u8) -> Self {
        Form { degree, coeffs: BTreeMap::new() }
    }

    pub fn linear(l: &[i64; 4]) -> Self {
        let mut f = Form::zero(1);
        for (i, &c) in l.iter().enumerate() {
            let mut e = [0u8; 4];
            e[i] = 1;
            f.add_term(e, BigInt::from(c));
        }
        f
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &BigInt)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, e: &Exponent) -> BigInt {
        self.coeffs.get(e).cloned().unwrap_or_else(BigInt::zero)
    }

    fn add_term(&mut self, e: Exponent, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(e).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&e);
        }
    }

    pub fn add(&self, other: &Form) -> Form {
        let mut out = self.clone();
        if self.is_zero() {
            out.degree = other.degree;
        }
        for (e, c) in &other.coeffs {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn scale(&self, s: &BigInt) -> Form {
        let mut out = Form::zero(self.degree);
        for (e, c) in &self.coeffs {
            out.add_term(*e, c * s);
        }
        out
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.add(&other.scale(&BigInt::from(-1)))
    }

    pub fn mul(&self, other: &Form) -> Form {
        let mut out = Form::zero(self.degree + other.degree);
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &other.coeffs {
                let e = [e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3]];
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Form {
        let mut out = Form::zero(self.degree.saturating_sub(1));
        for (e, c) in &self.coeffs {
            if e[var] > 0 {
                let mut e2 = *e;
                e2[var] -= 1;
                out.add_term(e2, c * BigInt::from(e[var]));
            }
        }
        out
    }

    pub fn eval<T: Scalar>(&self, pt: &[T; 4]) -> T {
        let mut powers: Vec<Vec<T>> = Vec::with_capacity(4);
        for x in pt {
            let mut v = vec![T::one_value()];
            for i in 0..self.degree as usize {
                v.push(v[i].mul(x));
            }
            powers.push(v);
        }
        let mut acc = T::zero_value();
        for (e, c) in &self.coeffs {
            let mut t = T::from_bigint(c);
            for i in 0..4 {
                if e[i] > 0 {
                    t = t.mul(&powers[i][e[i] as usize]);
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    /// Substitute `X_i = sum_j map[i][j] u_j` for new variables `u_0..u_3`.
    pub fn compose(&self, map: &[[BigInt; 4]; 4]) -> Form {
        let images: Vec<Form> = map
            .iter()
            .map(|row| {
                let mut f = Form::zero(1);
                for (j, c) in row.iter().enumerate() {
                    let mut e = [0u8; 4];
                    e[j] = 1;
                    f.add_term(e, c.clone());
                }
                f
            })
            .collect();
        let mut out = Form::zero(self.degree);
        for (e, c) in &self.coeffs {
            let mut t = Form::zero(0);
            t.add_term([0; 4], c.clone());
            for i in 0..4 {
                for _ in 0..e[i] {
                    t = t.mul(&images[i]);
                }
            }
            out = out.add(&t);
        }
        out.degree = self.degree;
        out
    }

    /// Reduce the coefficients modulo `p` as a dense term list.
    pub fn reduce(&self, p: u64) -> DenseForm {
        let pm = BigInt::from(p);
        let terms = self
            .coeffs
            .iter()
            .filter_map(|(e, c)| {
                let r = ((c % &pm) + &pm) % &pm;
                let r = r.to_u32().unwrap();
                (r != 0).then_some((*e, r))
            })
            .collect();
        DenseForm { degree: self.degree, terms }
    }
}

/// A form with coefficients reduced mod `p`, for fast evaluation over `F_{p^k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseForm {
    pub degree: u8,
    pub terms: Vec<(Exponent, u32)>,
}

impl DenseForm {
    pub fn eval(&self, field: &ExtField, pt: &[Fq; 4]) -> Fq {
        let d = self.degree as usize;
        let mut powers = [[Fq::ONE; 7]; 4];
        for i in 0..4 {
            for j in 1..=d {
                powers[i][j] = field.mul(powers[i][j - 1], pt[i]);
            }
        }
        let mut acc = Fq::ZERO;
        for &(e, c) in &self.terms {
            let mut t = field.mul(powers[0][e[0] as usize], powers[1][e[1] as usize]);
            t = field.mul(t, powers[2][e[2] as usize]);
            t = field.mul(t, powers[3][e[3] as usize]);
            acc = field.add(acc, field.scale(t, c));
        }
        acc
    }
}

impl DenseForm {
    pub fn mul(&self, other: &DenseForm, p: u64) -> DenseForm {
        let mut acc: BTreeMap<Exponent, u64> = BTreeMap::new();
        for &(e1, c1) in &self.terms {
            for &(e2, c2) in &other.terms {
                let e = [e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3]];
                let v = acc.entry(e).or_insert(0);
                *v = (*v + c1 as u64 * c2 as u64) % p;
            }
        }
        DenseForm {
            degree: self.degree + other.degree,
            terms: acc.into_iter().filter(|&(_, c)| c != 0).map(|(e, c)| (e, c as u32)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &DenseForm, s: u64, p: u64) -> DenseForm {
        let mut acc: BTreeMap<Exponent, u64> = self.terms.iter().map(|&(e, c)| (e, c as u64)).collect();
        for &(e, c) in &other.terms {
            let v = acc.entry(e).or_insert(0);
            *v = (*v + s % p * c as u64) % p;
        }
        DenseForm {
            degree: self.degree.max(other.degree),
            terms: acc.into_iter().filter(|&(_, c)| c != 0).map(|(e, c)| (e, c as u32)).collect(),
        }
    }

    pub fn coeff(&self, e: &Exponent) -> u32 {
        self.terms.iter().find(|(x, _)| x == e).map_or(0, |&(_, c)| c)
    }

    pub fn derivative(&self, var: usize, p: u64) -> DenseForm {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[var] > 0)
            .map(|&(e, c)| {
                let mut e2 = e;
                e2[var] -= 1;
                (e2, (c as u64 * e[var] as u64 % p) as u32)
            })
            .filter(|&(_, c)| c != 0)
            .collect();
        DenseForm { degree: self.degree.saturating_sub(1), terms }
    }
}

/// Expand the 4x4 symmetric determinant by the Leibniz formula.
pub fn build_quartic(cv: &CoefficientVector) -> QuarticForm {
    let l = cv.linear_forms();
    let (x, y, z) = (Form::linear(&l[0]), Form::linear(&l[1]), Form::linear(&l[2]));
    let (b, a, w) = (Form::linear(&l[3]), Form::linear(&l[4]), Form::linear(&l[5]));
    let zero = Form::zero(1);
    let m = [
        [zero.clone(), x.clone(), y.clone(), z.clone()],
        [x, zero.clone(), w.clone(), a.clone()],
        [y, w, zero.clone(), b.clone()],
        [z, a, b, zero],
    ];
    let mut det = Form::zero(4);
    for perm in permutations4() {
        let sign = permutation_sign(&perm);
        let mut t = Form::zero(0);
        t.add_term([0; 4], BigInt::from(sign));
        for (i, &j) in perm.iter().enumerate() {
            t = t.mul(&m[i][j]);
        }
        det = det.add(&t);
    }
    det.degree = 4;
    det
}

/// `sum li^2 li'^2 - 2 sum_{i<j} li lj li' lj'`, expanded directly.
pub fn six_term_identity(cv: &CoefficientVector) -> QuarticForm {
    let lf = cv.linear_forms();
    let prods: Vec<Form> = (0..3).map(|i| Form::linear(&lf[i]).mul(&Form::linear(&lf[i + 3]))).collect();
    let mut out = Form::zero(4);
    for p in &prods {
        out = out.add(&p.mul(p));
    }
    let two = BigInt::from(-2);
    for i in 0..3 {
        for j in i + 1..3 {
            out = out.add(&prods[i].mul(&prods[j]).scale(&two));
        }
    }
    out
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    if p.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn permutation_sign(p: &[usize; 4]) -> i64 {
    let mut inv = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    /// `choice[i] = 0` picks `li`, `1` picks `li'`.
    PlaneTriple { choice: [u8; 3] },
    /// On `li = li' = 0`; `branch` selects the root `+sqrt` / `-sqrt`.
    ConicPair { pair: usize, branch: u8 },
}

impl NodeKind {
    pub fn index(self) -> usize {
        match self {
            NodeKind::PlaneTriple { choice } => 4 * choice[0] as usize + 2 * choice[1] as usize + choice[2] as usize,
            NodeKind::ConicPair { pair, branch } => 8 + 2 * pair + branch as usize,
        }
    }

    pub fn all() -> Vec<NodeKind> {
        let mut out = Vec::with_capacity(14);
        for i in 0..8u8 {
            out.push(NodeKind::PlaneTriple { choice: [(i >> 2) & 1, (i >> 1) & 1, i & 1] });
        }
        for pair in 0..3 {
            for branch in 0..2 {
                out.push(NodeKind::ConicPair { pair, branch });
            }
        }
        out
    }
}

/// A node with exact coordinates, normalized so the first nonzero
/// coordinate is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub index: usize,
    pub kind: NodeKind,
    pub coords: [Surd; 4],
    /// Squarefree `d` with coordinates in `Q(sqrt d)`; 1 when rational.
    pub field: i64,
    /// Index of the Galois-conjugate node, if irrational.
    pub conjugate: Option<usize>,
}

impl Node {
    pub fn is_rational(&self) -> bool {
        self.field == 1
    }
}

fn normalize_surd(pt: &mut [Surd; 4]) {
    if let Some(lead) = pt.iter().find(|c| !c.is_zero()).cloned() {
        let inv = lead.inv().unwrap();
        for c in pt.iter_mut() {
            *c = &*c * &inv;
        }
    }
}

fn rational_kernel(rows: &[[i64; 4]]) -> Vec<[BigRational; 4]> {
    let m: linalg::Matrix<BigRational> = rows
        .iter()
        .map(|r| r.iter().map(|&c| BigRational::from_integer(c.into())).collect())
        .collect();
    linalg::kernel(&m, 4)
        .into_iter()
        .map(|v| [v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()])
        .collect()
}

fn dot(l: &[i64; 4], v: &[BigRational; 4]) -> BigRational {
    l.iter().zip(v).fold(BigRational::zero(), |acc, (&a, b)| acc + b * BigRational::from_integer(a.into()))
}

/// Binary quadratic `a s^2 + b s r + c r^2` cut out by `lj lj' - lk lk'` on
/// the line spanned by `u, v`.
fn pair_quadratic(cv: &CoefficientVector, i: usize, u: &[BigRational; 4], v: &[BigRational; 4]) -> [BigRational; 3] {
    let j = (i + 1) % 3;
    let k = (i + 2) % 3;
    let lf = cv.linear_forms();
    let h = |pt: &[BigRational; 4]| dot(&lf[j], pt) * dot(&lf[j + 3], pt) - dot(&lf[k], pt) * dot(&lf[k + 3], pt);
    let a = h(u);
    let c = h(v);
    let uv: [BigRational; 4] = std::array::from_fn(|t| &u[t] + &v[t]);
    let b = h(&uv) - &a - &c;
    [a, b, c]
}

/// The 14 nodes in canonical order: eight plane-triple nodes (choice
/// patterns in binary order) then two nodes per pair `i = 1, 2, 3`.
pub fn singular_points(cv: &CoefficientVector) -> Result<Vec<Node>, FamilyError> {
    let lf = cv.linear_forms();
    let mut nodes = Vec::with_capacity(14);
    for kind in NodeKind::all() {
        let idx = kind.index();
        match kind {
            NodeKind::PlaneTriple { choice } => {
                let rows: Vec<[i64; 4]> = (0..3).map(|i| lf[i + 3 * choice[i] as usize]).collect();
                let ker = rational_kernel(&rows);
                if ker.len() != 1 {
                    return Err(FamilyError::DegenerateSurface(format!("node {idx}: planes not independent")));
                }
                let mut coords: [Surd; 4] = std::array::from_fn(|t| Surd::from_rational(ker[0][t].clone()));
                normalize_surd(&mut coords);
                nodes.push(Node { index: idx, kind, coords, field: 1, conjugate: None });
            }
            NodeKind::ConicPair { pair, branch } => {
                let ker = rational_kernel(&[lf[pair], lf[pair + 3]]);
                if ker.len() != 2 {
                    return Err(FamilyError::DegenerateSurface(format!("node {idx}: li = li' as planes")));
                }
                let [a, b, c] = pair_quadratic(cv, pair, &ker[0], &ker[1]);
                let disc = &b * &b - BigRational::from_integer(4.into()) * &a * &c;
                if disc.is_zero() {
                    return Err(FamilyError::DegenerateSurface(format!("node {idx}: double root")));
                }
                if a.is_zero() && b.is_zero() {
                    return Err(FamilyError::DegenerateSurface(format!("node {idx}: line in surface")));
                }
                let root = Surd::sqrt_rational(&disc)
                    .ok_or_else(|| FamilyError::DegenerateSurface("unfactorable discriminant".into()))?;
                let field = root.radicands().first().copied().unwrap_or(1);
                let u: [Surd; 4] = std::array::from_fn(|t| Surd::from_rational(ker[0][t].clone()));
                let v: [Surd; 4] = std::array::from_fn(|t| Surd::from_rational(ker[1][t].clone()));
                let (s, r) = if a.is_zero() {
                    // roots r = 0 and (s : r) = (-c : b)
                    if branch == 0 {
                        (Surd::one(), Surd::zero())
                    } else {
                        (Surd::from_rational(-c.clone()), Surd::from_rational(b.clone()))
                    }
                } else {
                    let sgn = if branch == 0 { Surd::one() } else { Surd::from_int(-1) };
                    let num = &Surd::from_rational(-b.clone()) + &(&sgn * &root);
                    let two_a = BigRational::from_integer(2.into()) * &a;
                    (num.scale(&two_a.recip()), Surd::one())
                };
                let mut coords: [Surd; 4] = std::array::from_fn(|t| &(&s * &u[t]) + &(&r * &v[t]));
                normalize_surd(&mut coords);
                let conjugate = (field != 1).then_some(idx ^ 1);
                nodes.push(Node { index: idx, kind, coords, field, conjugate });
            }
        }
    }
    let quartic = build_quartic(cv);
    check_nodes(&quartic, &nodes)?;
    Ok(nodes)
}

fn check_nodes(quartic: &QuarticForm, nodes: &[Node]) -> Result<(), FamilyError> {
    for i in 0..nodes.len() {
        for j in 0..i {
            if nodes[i].coords == nodes[j].coords {
                return Err(FamilyError::DegenerateSurface(format!("nodes {j} and {i} coincide")));
            }
        }
    }
    let grads: Vec<Form> = (0..4).map(|v| quartic.derivative(v)).collect();
    let hess: Vec<Vec<Form>> = grads.iter().map(|g| (0..4).map(|v| g.derivative(v)).collect()).collect();
    for n in nodes {
        if grads.iter().any(|g| !g.eval(&n.coords).is_zero()) {
            return Err(FamilyError::DegenerateSurface(format!("node {} is not singular", n.index)));
        }
        let h: linalg::Matrix<Surd> = hess.iter().map(|row| row.iter().map(|f| f.eval(&n.coords)).collect()).collect();
        if linalg::rank(&h) != 3 {
            return Err(FamilyError::DegenerateSurface(format!("node {} is not of type A1", n.index)));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trope {
    /// Position in `[l1, l2, l3, l1', l2', l3']`.
    pub which: usize,
    pub plane: [i64; 4],
    /// The conic `lj lj' - lk lk'` as a quadratic form in `x, y, z, w`
    /// (only its restriction to the plane matters).
    pub conic: Form,
    pub degenerate: bool,
    pub nodes: Vec<usize>,
}

fn integer_basis(v: &[BigRational; 4]) -> [BigInt; 4] {
    let mut lcm = BigInt::one();
    for c in v {
        lcm = num_integer::Integer::lcm(&lcm, c.denom());
    }
    std::array::from_fn(|t| (&v[t] * BigRational::from_integer(lcm.clone())).to_integer())
}

/// Parametrization matrix `X_i = sum_j M[i][j] u_j` of the plane `l = 0`.
fn plane_map(l: &[i64; 4]) -> [[BigInt; 4]; 4] {
    let ker = rational_kernel(&[*l]);
    let cols: Vec<[BigInt; 4]> = ker.iter().map(integer_basis).collect();
    std::array::from_fn(|i| std::array::from_fn(|j| if j < 3 { cols[j][i].clone() } else { BigInt::zero() }))
}

pub fn tropes(cv: &CoefficientVector) -> Result<Vec<Trope>, FamilyError> {
    let quartic = build_quartic(cv);
    let nodes = singular_points(cv)?;
    let lf = cv.linear_forms();
    let mut out = Vec::with_capacity(6);
    for which in 0..6 {
        let i = which % 3;
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let conic = Form::linear(&lf[j])
            .mul(&Form::linear(&lf[j + 3]))
            .sub(&Form::linear(&lf[k]).mul(&Form::linear(&lf[k + 3])));
        let map = plane_map(&lf[which]);
        let restricted = quartic.compose(&map);
        let conic_r = conic.compose(&map);
        if restricted != conic_r.mul(&conic_r) {
            return Err(FamilyError::NotAPerfectSquare(which));
        }
        let gram: linalg::Matrix<BigRational> = (0..3)
            .map(|a| {
                (0..3)
                    .map(|b| {
                        let mut e = [0u8; 4];
                        e[a] += 1;
                        e[b] += 1;
                        let c = BigRational::from_integer(conic_r.coeff(&e));
                        if a == b {
                            c
                        } else {
                            c / BigRational::from_integer(2.into())
                        }
                    })
                    .collect()
            })
            .collect();
        let degenerate = linalg::determinant(&gram).is_zero();
        let lform: [Surd; 4] = std::array::from_fn(|t| Surd::from_int(lf[which][t]));
        let incident = nodes
            .iter()
            .filter(|n| {
                let s = (0..4).fold(Surd::zero(), |acc, t| &acc + &(&lform[t] * &n.coords[t]));
                s.is_zero()
            })
            .map(|n| n.index)
            .collect();
        out.push(Trope { which, plane: lf[which], conic, degenerate, nodes: incident });
    }
    Ok(out)
}

/// A quartic reduced mod `p` together with its nodes over `F_{p^2}`.
#[derive(Clone, Debug)]
pub struct ReducedSurface {
    pub p: u64,
    pub cv: CoefficientVector,
    pub form: DenseForm,
    /// `F_{p^2}`, where every node is defined.
    pub field2: ExtField,
    pub nodes: Vec<[Fq; 4]>,
    /// Frobenius orbit size of each node (1 or 2).
    pub orbit_sizes: Vec<u8>,
    /// One entry per orbit, sorted descending.
    pub cycle_type: Vec<usize>,
    /// Incident node indices per trope, in `[l1, l2, l3, l1', l2', l3']` order.
    pub tropes: Vec<Vec<usize>>,
}

impl ReducedSurface {
    /// Number of nodes fixed by the `k`-th power of Frobenius.
    pub fn fixed_nodes(&self, k: u32) -> usize {
        self.orbit_sizes.iter().filter(|&&d| k.is_multiple_of(d as u32)).count()
    }
}

pub fn reduce_mod_p(cv: &CoefficientVector, p: u64) -> Result<ReducedSurface, BadReduction> {
    let f2 = ExtField::new(p, 2).map_err(|_| BadReduction::UnsupportedPrime(p))?;
    let lf = cv.linear_forms();
    let conv = |l: &[i64; 4]| -> Vec<Fq> { l.iter().map(|&c| f2.from_i64(c)).collect() };
    let mut nodes: Vec<[Fq; 4]> = Vec::with_capacity(14);
    for kind in NodeKind::all() {
        let idx = kind.index();
        match kind {
            NodeKind::PlaneTriple { choice } => {
                let rows: Vec<Vec<Fq>> = (0..3).map(|i| conv(&lf[i + 3 * choice[i] as usize])).collect();
                let ker = ff::kernel(&f2, &rows, 4);
                if ker.len() != 1 {
                    return Err(BadReduction::DegenerateSystem(idx));
                }
                let mut pt = [ker[0][0], ker[0][1], ker[0][2], ker[0][3]];
                ff::normalize_point(&f2, &mut pt);
                nodes.push(pt);
            }
            NodeKind::ConicPair { pair, branch } => {
                let rows = vec![conv(&lf[pair]), conv(&lf[pair + 3])];
                let ker = ff::kernel(&f2, &rows, 4);
                if ker.len() != 2 {
                    return Err(BadReduction::DegenerateSystem(idx));
                }
                let (j, k) = ((pair + 1) % 3, (pair + 2) % 3);
                let lin = |l: &[i64; 4], v: &[Fq]| {
                    (0..4).fold(Fq::ZERO, |acc, t| f2.add(acc, f2.mul(f2.from_i64(l[t]), v[t])))
                };
                let h = |v: &[Fq]| {
                    f2.sub(f2.mul(lin(&lf[j], v), lin(&lf[j + 3], v)), f2.mul(lin(&lf[k], v), lin(&lf[k + 3], v)))
                };
                let (u, v) = (&ker[0], &ker[1]);
                let a = h(u);
                let c = h(v);
                let uv: Vec<Fq> = (0..4).map(|t| f2.add(u[t], v[t])).collect();
                let b = f2.sub(f2.sub(h(&uv), a), c);
                let disc = f2.sub(f2.square(b), f2.scale(f2.mul(a, c), 4));
                if disc.is_zero() || (a.is_zero() && b.is_zero()) {
                    return Err(BadReduction::DegenerateSystem(idx));
                }
                let (s, r) = if a.is_zero() {
                    if branch == 0 {
                        (Fq::ONE, Fq::ZERO)
                    } else {
                        (f2.neg(c), b)
                    }
                } else {
                    let root = f2.sqrt(disc).expect("every F_p element is a square in F_p^2");
                    let root = if branch == 0 { root } else { f2.neg(root) };
                    let s = f2.div(f2.sub(root, b), f2.scale(a, 2)).unwrap();
                    (s, Fq::ONE)
                };
                let mut pt: [Fq; 4] = std::array::from_fn(|t| f2.add(f2.mul(s, u[t]), f2.mul(r, v[t])));
                ff::normalize_point(&f2, &mut pt);
                nodes.push(pt);
            }
        }
    }
    for i in 0..14 {
        for j in 0..i {
            if nodes[i] == nodes[j] {
                return Err(BadReduction::Collision(j, i));
            }
        }
    }
    let quartic = build_quartic(cv);
    let hess: Vec<Vec<DenseForm>> = (0..4)
        .map(|a| (0..4).map(|b| quartic.derivative(a).derivative(b).reduce(p)).collect())
        .collect();
    let grads: Vec<DenseForm> = (0..4).map(|a| quartic.derivative(a).reduce(p)).collect();
    for (idx, pt) in nodes.iter().enumerate() {
        if grads.iter().any(|g| !g.eval(&f2, pt).is_zero()) {
            return Err(BadReduction::NotA1(idx));
        }
        let h: Vec<Vec<Fq>> = hess.iter().map(|row| row.iter().map(|f| f.eval(&f2, pt)).collect()).collect();
        if ff::rank(&f2, &h) != 3 {
            return Err(BadReduction::NotA1(idx));
        }
    }
    let orbit_sizes: Vec<u8> = nodes
        .iter()
        .map(|pt| if pt.iter().all(|c| f2.frobenius(*c) == *c) { 1 } else { 2 })
        .collect();
    let mut cycle_type: Vec<usize> = vec![1; orbit_sizes.iter().filter(|&&d| d == 1).count()];
    let twos = orbit_sizes.iter().filter(|&&d| d == 2).count();
    if twos % 2 != 0 {
        return Err(BadReduction::DegenerateSystem(8));
    }
    cycle_type.splice(0..0, std::iter::repeat_n(2, twos / 2));
    let tropes = (0..6)
        .map(|w| {
            let l = conv(&lf[w]);
            (0..14)
                .filter(|&n| (0..4).fold(Fq::ZERO, |acc, t| f2.add(acc, f2.mul(l[t], nodes[n][t]))).is_zero())
                .collect()
        })
        .collect();
    let surface = ReducedSurface { p, cv: *cv, form: quartic.reduce(p), field2: f2, nodes, orbit_sizes, cycle_type, tropes };
    let model = count::degree_two_model(&surface, 0).map_err(|_| BadReduction::NotA1(0))?;
    match count::singular::extra_singular_lines(&surface, &model) {
        Ok(0) => Ok(surface),
        _ => Err(BadReduction::ExtraSingularity),
    }
}

/// `n` admissible vectors with `c1 = c2 = c3 = 1` and the rest uniform in
/// `[-bound, bound]`, deterministic in `seed`.
pub fn random_sample(n: usize, seed: u64, bound: i64) -> Vec<CoefficientVector> {
    assert!(bound >= 1, "bound must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut c = [1i64; 8];
        for x in c.iter_mut().skip(3) {
            *x = rng.gen_range(-bound..=bound);
        }
        let cv = CoefficientVector(c);
        if singular_points(&cv).is_ok() {
            out.push(cv);
        }
    }
    out
}

/// Squarefree field discriminants of the three conic-pair node pairs.
pub fn node_fields(nodes: &[Node]) -> [i64; 3] {
    std::array::from_fn(|i| nodes[8 + 2 * i].field)
}
