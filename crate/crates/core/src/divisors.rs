//! Explicit curves through the nodes and the intersection lattice they span.
//!
//! On the resolution, a curve `D` passing simply through `k` nodes has the
//! projection `D' = D + 1/2 sum E_i` orthogonal to all exceptional curves,
//! with `D'^2 = D^2 + k/2` and `D'_1 D'_2 = k' + k/2` where `k'` counts the
//! smooth common points and `k` the shared nodes. The exceptional curves
//! and the projected classes span a lattice of rank `14 + rank(Gram)`.
//!
//! Curves searched:
//! - lines through two nodes (the quartic vanishes on `P + Q`);
//! - planes through three nodes on which the quartic splits into two conics.
//!   In plane coordinates `aP + bQ + cR` the section is
//!   `alpha b^2c^2 + beta a^2c^2 + gamma a^2b^2 + abc (delta a + eps b + zeta c)`,
//!   which after the Cremona map `a = 1/A` becomes a ternary quadratic form
//!   `G(A, B, C)`. The section splits into two conics through the three
//!   nodes exactly when `G` is a product of two distinct linear forms.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith;
use crate::family::{build_quartic, singular_points, CoefficientVector, FamilyError, Node, QuarticForm};
use crate::linalg::{self, Matrix};
use crate::surd::Surd;

type P4 = [Surd; 4];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DivisorError {
    #[error("curves {0} and {1} meet with multiplicity > 1")]
    MultiplicityUnsupported(usize, usize),
    #[error("Gram matrix has no nonzero minor")]
    SingularSpan,
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivisorKind {
    Hyperplane,
    Exceptional(usize),
    Line,
    Conic,
    CubicResidual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorClass {
    pub kind: DivisorKind,
    pub incident: BTreeSet<usize>,
    /// Self-intersection of the strict transform before projection.
    pub self_int: i64,
    /// Intersection with the hyperplane class.
    pub degree: i64,
}

impl DivisorClass {
    pub fn hyperplane() -> Self {
        DivisorClass { kind: DivisorKind::Hyperplane, incident: BTreeSet::new(), self_int: 4, degree: 4 }
    }

    pub fn exceptional(i: usize) -> Self {
        DivisorClass { kind: DivisorKind::Exceptional(i), incident: BTreeSet::new(), self_int: -2, degree: 0 }
    }

    /// A smooth rational curve (line or conic) through the given nodes.
    pub fn rational_curve(kind: DivisorKind, incident: impl IntoIterator<Item = usize>) -> Self {
        let degree = match kind {
            DivisorKind::Line => 1,
            DivisorKind::Conic => 2,
            DivisorKind::CubicResidual => 3,
            _ => panic!("not a curve kind"),
        };
        let self_int = if kind == DivisorKind::CubicResidual { 0 } else { -2 };
        DivisorClass { kind, incident: incident.into_iter().collect(), self_int, degree }
    }

    fn is_curve(&self) -> bool {
        matches!(self.kind, DivisorKind::Line | DivisorKind::Conic | DivisorKind::CubicResidual)
    }
}

fn half(k: usize) -> BigRational {
    BigRational::new(BigInt::from(k), BigInt::from(2))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `D'^2 = D^2 + k/2`.
pub fn self_intersection(d: &DivisorClass) -> BigRational {
    match d.kind {
        DivisorKind::Hyperplane | DivisorKind::Exceptional(_) => int(d.self_int),
        _ => int(d.self_int) + half(d.incident.len()),
    }
}

/// `D'_1 D'_2` for two distinct classes meeting in `smooth_meets` smooth points.
pub fn intersection_number(d1: &DivisorClass, d2: &DivisorClass, smooth_meets: i64) -> BigRational {
    use DivisorKind::*;
    match (d1.kind, d2.kind) {
        (Exceptional(_), _) | (_, Exceptional(_)) => int(0),
        (Hyperplane, Hyperplane) => int(4),
        (Hyperplane, _) => int(d2.degree),
        (_, Hyperplane) => int(d1.degree),
        _ => int(smooth_meets) + half(d1.incident.intersection(&d2.incident).count()),
    }
}

/// Gram matrix of projected classes, with smooth meeting counts from `meets`.
pub fn gram_matrix<F>(classes: &[DivisorClass], mut meets: F) -> Result<Matrix<BigRational>, DivisorError>
where
    F: FnMut(usize, usize) -> Result<i64, DivisorError>,
{
    let n = classes.len();
    let mut g = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                self_intersection(&classes[i])
            } else {
                let k = if classes[i].is_curve() && classes[j].is_curve() { meets(i, j)? } else { 0 };
                intersection_number(&classes[i], &classes[j], k)
            };
            g[i][j] = v.clone();
            g[j][i] = v;
        }
    }
    Ok(g)
}

pub fn rank_lower_bound(gram: &Matrix<BigRational>) -> usize {
    14 + linalg::rank(gram)
}

/// Square class of `2^14 det` of the Gram matrix restricted to a basis of its span.
pub fn lattice_disc_class(gram: &Matrix<BigRational>) -> Result<BigInt, DivisorError> {
    let basis = linalg::independent_rows(gram);
    if basis.is_empty() {
        return Err(DivisorError::SingularSpan);
    }
    let sub: Matrix<BigRational> = basis.iter().map(|&i| basis.iter().map(|&j| gram[i][j].clone()).collect()).collect();
    let det = linalg::determinant(&sub) * BigRational::from_integer(BigInt::from(2).pow(14));
    arith::squarefree_class(&det).ok_or(DivisorError::SingularSpan)
}

fn dot(l: &P4, x: &P4) -> Surd {
    (0..4).fold(Surd::zero(), |acc, t| &acc + &(&l[t] * &x[t]))
}

fn add(x: &P4, y: &P4) -> P4 {
    std::array::from_fn(|t| &x[t] + &y[t])
}

fn lin(a: &Surd, x: &P4, b: &Surd, y: &P4) -> P4 {
    std::array::from_fn(|t| &(a * &x[t]) + &(b * &y[t]))
}

fn rank_of(points: &[&P4]) -> usize {
    let m: Matrix<Surd> = points.iter().map(|p| p.to_vec()).collect();
    linalg::rank(&m)
}

fn same_point(x: &P4, y: &P4) -> bool {
    rank_of(&[x, y]) == 1
}

/// Linear forms vanishing on the given points.
fn annihilator(points: &[&P4]) -> Vec<P4> {
    let m: Matrix<Surd> = points.iter().map(|p| p.to_vec()).collect();
    linalg::kernel(&m, 4).into_iter().map(|v| [v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()]).collect()
}

/// Two points spanning the line `{l1 = l2 = 0}`.
fn meet_line(l1: &P4, l2: &P4) -> (P4, P4) {
    let ker = annihilator(&[l1, l2]);
    (ker[0].clone(), ker[1].clone())
}

fn radicands_of(points: &[&P4]) -> Vec<i64> {
    let mut r: BTreeSet<i64> = BTreeSet::new();
    for p in points {
        for c in p.iter() {
            r.extend(c.radicands());
        }
    }
    r.into_iter().collect()
}

/// A line on the surface through at least two nodes.
#[derive(Clone, Debug)]
pub struct Line {
    pub points: (P4, P4),
    pub nodes: Vec<usize>,
}

/// One conic of a split plane: `u bc + v ac + w ab = 0` in the frame
/// coordinates `aP + bQ + cR`.
#[derive(Clone, Debug)]
pub struct Conic {
    pub plane: usize,
    pub coeffs: [Surd; 3],
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SplitPlane {
    pub form: P4,
    pub frame: [P4; 3],
    pub frame_nodes: [usize; 3],
    /// All nodes lying in the plane.
    pub nodes: Vec<usize>,
    /// Second intersection point of the two conics besides the frame.
    pub fourth_point: P4,
    pub fourth_is_node: bool,
}

impl SplitPlane {
    fn frame_coords(&self, z: &P4) -> [Surd; 3] {
        let m: Matrix<Surd> = (0..4)
            .map(|t| vec![self.frame[0][t].clone(), self.frame[1][t].clone(), self.frame[2][t].clone(), -z[t].clone()])
            .collect();
        let ker = linalg::kernel(&m, 4);
        let v = &ker[0];
        let inv = v[3].inv().expect("point lies in the plane");
        [&v[0] * &inv, &v[1] * &inv, &v[2] * &inv]
    }
}

impl Conic {
    fn eval_frame(&self, f: &[Surd; 3]) -> Surd {
        let [u, v, w] = &self.coeffs;
        let t1 = &(u * &f[1]) * &f[2];
        let t2 = &(v * &f[0]) * &f[2];
        let t3 = &(w * &f[0]) * &f[1];
        &(&t1 + &t2) + &t3
    }

    fn eval(&self, plane: &SplitPlane, z: &P4) -> Surd {
        self.eval_frame(&plane.frame_coords(z))
    }

    /// `c0 s^2 + c1 s t + c2 t^2` on the line `sX + tY` inside the plane.
    fn on_line(&self, plane: &SplitPlane, x: &P4, y: &P4) -> [Surd; 3] {
        let fx = plane.frame_coords(x);
        let fy = plane.frame_coords(y);
        let fxy: [Surd; 3] = std::array::from_fn(|i| &fx[i] + &fy[i]);
        let c0 = self.eval_frame(&fx);
        let c2 = self.eval_frame(&fy);
        let c1 = &(&self.eval_frame(&fxy) - &c0) - &c2;
        [c0, c1, c2]
    }
}

fn quad_disc(q: &[Surd; 3]) -> Surd {
    &(&q[1] * &q[1]) - &(&Surd::from_int(4) * &(&q[0] * &q[2]))
}

fn quad_at(q: &[Surd; 3], s: &Surd, t: &Surd) -> Surd {
    let a = &(&q[0] * s) * s;
    let b = &(&q[1] * s) * t;
    let c = &(&q[2] * t) * t;
    &(&a + &b) + &c
}

/// Parameters `(s : t)` of nodes on the line `sX + tY`.
fn node_params(nodes: &[Node], on: &[usize], x: &P4, y: &P4) -> Vec<(usize, Surd, Surd)> {
    on.iter()
        .map(|&i| {
            let n = &nodes[i].coords;
            // n = s x + t y: solve with the kernel of [x y -n]
            let m: Matrix<Surd> = (0..4).map(|k| vec![x[k].clone(), y[k].clone(), -n[k].clone()]).collect();
            let v = linalg::kernel(&m, 3).remove(0);
            (i, v[0].clone(), v[1].clone())
        })
        .collect()
}

/// Everything found on one surface.
#[derive(Clone, Debug)]
pub struct DivisorSearch {
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    pub planes: Vec<SplitPlane>,
    pub conics: Vec<Conic>,
    /// Configurations that needed a field the exact arithmetic cannot reach.
    pub unresolved: Vec<String>,
    /// Violations of "no 4 nodes collinear; 3 collinear nodes span a line on V".
    pub audit_failures: Vec<String>,
}

/// Serializable summary of one divisor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorFinding {
    pub kind: DivisorKind,
    pub nodes: Vec<usize>,
    /// Radicands of the field of definition (empty if rational).
    pub field: Vec<i64>,
    /// Two points for a line; the plane's linear form for a conic.
    pub coefficients: Vec<Vec<String>>,
}

pub fn find_lines(quartic: &QuarticForm, nodes: &[Node]) -> (Vec<Line>, Vec<String>) {
    let mut lines: Vec<Line> = Vec::new();
    let mut audit = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let (p, q) = (&nodes[i].coords, &nodes[j].coords);
            let on: Vec<usize> = (0..nodes.len()).filter(|&k| rank_of(&[p, q, &nodes[k].coords]) == 2).collect();
            if !seen.insert(on.clone()) {
                continue;
            }
            if on.len() > 3 {
                audit.push(format!("nodes {on:?} are collinear"));
            }
            let contained = quartic.eval(&add(p, q)).is_zero();
            if contained {
                lines.push(Line { points: (p.clone(), q.clone()), nodes: on });
            } else if on.len() == 3 {
                audit.push(format!("nodes {on:?} are collinear but the line is not on the surface"));
            }
        }
    }
    (lines, audit)
}

/// Factor a rank-2 symmetric matrix's quadratic form into two linear forms.
fn factor_rank_two(g: &[[Surd; 3]; 3]) -> Option<([Surd; 3], [Surd; 3])> {
    let two = Surd::from_int(2);
    // zero diagonal: 2 (g01 AB + g02 AC + g12 BC) with one coefficient zero
    if (0..3).all(|i| g[i][i].is_zero()) {
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            if g[i][j].is_zero() {
                // 2 x_k (g_ki x_i + g_kj x_j)
                let mut l1 = [Surd::zero(), Surd::zero(), Surd::zero()];
                l1[k] = two.clone();
                let mut l2 = [Surd::zero(), Surd::zero(), Surd::zero()];
                l2[i] = g[k][i].clone();
                l2[j] = g[k][j].clone();
                return Some((l1, l2));
            }
        }
        return None;
    }
    let i = (0..3).find(|&i| !g[i][i].is_zero())?;
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    // g_ii G = X^2 - (m_jj Y_j^2 + 2 m_jk Y_j Y_k + m_kk Y_k^2), X = sum g_il x_l
    let m = |a: usize, b: usize| &(&g[i][a] * &g[i][b]) - &(&g[i][i] * &g[a][b]);
    let (mjj, mjk, mkk) = (m(j, j), m(j, k), m(k, k));
    // the bracket is a square times a rational number when it can be factored here
    let (lead, y) = if !mjj.is_zero() {
        let r = &mjk * &mjj.inv()?;
        let mut y = [Surd::zero(), Surd::zero(), Surd::zero()];
        y[j] = Surd::one();
        y[k] = r;
        (mjj, y)
    } else if !mkk.is_zero() {
        let mut y = [Surd::zero(), Surd::zero(), Surd::zero()];
        y[k] = Surd::one();
        (mkk, y)
    } else {
        // bracket = 2 m_jk Y_j Y_k; rank 2 forces m_jk = 0, so G is a square
        return None;
    };
    let s = Surd::sqrt_rational(&lead.as_rational()?)?;
    let x: [Surd; 3] = std::array::from_fn(|l| g[i][l].clone());
    let l1 = std::array::from_fn(|l| &x[l] + &(&s * &y[l]));
    let l2 = std::array::from_fn(|l| &x[l] - &(&s * &y[l]));
    Some((l1, l2))
}

fn cross(a: &[Surd; 3], b: &[Surd; 3]) -> [Surd; 3] {
    [
        &(&a[1] * &b[2]) - &(&a[2] * &b[1]),
        &(&a[2] * &b[0]) - &(&a[0] * &b[2]),
        &(&a[0] * &b[1]) - &(&a[1] * &b[0]),
    ]
}

enum PlaneOutcome {
    NotSplit,
    Split(SplitPlane, Vec<[Surd; 3]>),
    Unresolved(String),
}

fn examine_triple(quartic: &QuarticForm, nodes: &[Node], tri: [usize; 3]) -> PlaneOutcome {
    let [p, q, r] = tri.map(|i| &nodes[i].coords);
    let neg = |x: &P4| -> P4 { std::array::from_fn(|t| -x[t].clone()) };
    let f = |x: P4| quartic.eval(&x);
    let alpha = f(add(q, r));
    let beta = f(add(p, r));
    let gamma = f(add(p, q));
    let s = &(&alpha + &beta) + &gamma;
    let fppp = f(add(&add(p, q), r));
    let half = Surd::from_rational(arith::rat_frac(1, 2));
    let part = |other: Surd| &(&(&fppp + &other) * &half) - &s;
    let delta = part(f(add(&add(&neg(p), q), r)));
    let eps = part(f(add(&add(p, &neg(q)), r)));
    let zeta = part(f(add(&add(p, q), &neg(r))));
    let g = [
        [alpha.clone(), &zeta * &half, &eps * &half],
        [&zeta * &half, beta.clone(), &delta * &half],
        [&eps * &half, &delta * &half, gamma.clone()],
    ];
    let gm: Matrix<Surd> = g.iter().map(|row| row.to_vec()).collect();
    if linalg::rank(&gm) != 2 {
        return PlaneOutcome::NotSplit;
    }
    let Some((l1, l2)) = factor_rank_two(&g) else {
        return PlaneOutcome::Unresolved(format!("plane through nodes {tri:?}: conics need a further square root"));
    };
    let form = annihilator(&[p, q, r]).remove(0);
    let pnodes: Vec<usize> = (0..nodes.len()).filter(|&i| dot(&form, &nodes[i].coords).is_zero()).collect();
    let x = cross(&l1, &l2);
    let both_conics = l1.iter().chain(&l2).all(|c| !c.is_zero());
    if both_conics && x.iter().any(|c| c.is_zero()) {
        return PlaneOutcome::Unresolved(format!("plane through nodes {tri:?}: conics are tangent at a node"));
    }
    let img = [&x[1] * &x[2], &x[0] * &x[2], &x[0] * &x[1]];
    let fourth: P4 = std::array::from_fn(|t| &(&(&img[0] * &p[t]) + &(&img[1] * &q[t])) + &(&img[2] * &r[t]));
    let fourth_is_node = pnodes.iter().any(|&i| same_point(&nodes[i].coords, &fourth));
    let plane = SplitPlane {
        form,
        frame: [p.clone(), q.clone(), r.clone()],
        frame_nodes: tri,
        nodes: pnodes,
        fourth_point: fourth,
        fourth_is_node,
    };
    PlaneOutcome::Split(plane, vec![l1, l2])
}

pub fn find_splitting_planes(quartic: &QuarticForm, nodes: &[Node]) -> (Vec<SplitPlane>, Vec<Conic>, Vec<String>) {
    let mut planes: Vec<SplitPlane> = Vec::new();
    let mut conics = Vec::new();
    let mut unresolved = Vec::new();
    let mut done: BTreeSet<Vec<usize>> = BTreeSet::new();
    let n = nodes.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (p, q, r) = (&nodes[a].coords, &nodes[b].coords, &nodes[c].coords);
                if rank_of(&[p, q, r]) < 3 {
                    continue;
                }
                let form = annihilator(&[p, q, r]).remove(0);
                let pnodes: Vec<usize> = (0..n).filter(|&i| dot(&form, &nodes[i].coords).is_zero()).collect();
                if done.contains(&pnodes) {
                    continue;
                }
                match examine_triple(quartic, nodes, [a, b, c]) {
                    // a plane through five or more nodes can split for some triples only
                    PlaneOutcome::NotSplit => {}
                    PlaneOutcome::Unresolved(msg) => {
                        // another triple in the same plane may still work
                        unresolved.push((pnodes, msg));
                    }
                    PlaneOutcome::Split(plane, factors) => {
                        done.insert(pnodes);
                        let idx = planes.len();
                        for l in factors {
                            if l.iter().any(|c| c.is_zero()) {
                                // contains a line through two frame nodes
                                continue;
                            }
                            let mut conic = Conic { plane: idx, coeffs: l, nodes: Vec::new() };
                            conic.nodes =
                                plane.nodes.iter().copied().filter(|&i| conic.eval(&plane, &nodes[i].coords).is_zero()).collect();
                            conics.push(conic);
                        }
                        planes.push(plane);
                    }
                }
            }
        }
    }
    let unresolved = unresolved.into_iter().filter(|(pn, _)| !done.contains(pn)).map(|(_, m)| m).collect::<BTreeSet<_>>();
    (planes, conics, unresolved.into_iter().collect())
}

/// A curve in the search, addressed by kind and index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveRef {
    Line(usize),
    Conic(usize),
}

impl DivisorSearch {
    pub fn run(cv: &CoefficientVector) -> Result<Self, DivisorError> {
        let nodes = singular_points(cv)?;
        let quartic = build_quartic(cv);
        let (lines, audit_failures) = find_lines(&quartic, &nodes);
        let (planes, conics, unresolved) = find_splitting_planes(&quartic, &nodes);
        Ok(DivisorSearch { nodes, lines, planes, conics, unresolved, audit_failures })
    }

    pub fn curves(&self) -> Vec<CurveRef> {
        (0..self.lines.len()).map(CurveRef::Line).chain((0..self.conics.len()).map(CurveRef::Conic)).collect()
    }

    pub fn class_of(&self, c: CurveRef) -> DivisorClass {
        match c {
            CurveRef::Line(i) => DivisorClass::rational_curve(DivisorKind::Line, self.lines[i].nodes.iter().copied()),
            CurveRef::Conic(i) => DivisorClass::rational_curve(DivisorKind::Conic, self.conics[i].nodes.iter().copied()),
        }
    }

    fn nodes_of(&self, c: CurveRef) -> &[usize] {
        match c {
            CurveRef::Line(i) => &self.lines[i].nodes,
            CurveRef::Conic(i) => &self.conics[i].nodes,
        }
    }

    /// Number of smooth points of the surface where two distinct curves meet.
    pub fn smooth_meets(&self, a: CurveRef, b: CurveRef) -> Result<i64, DivisorError> {
        let err = || DivisorError::MultiplicityUnsupported(self.curve_id(a), self.curve_id(b));
        let shared: Vec<usize> = self.nodes_of(a).iter().copied().filter(|i| self.nodes_of(b).contains(i)).collect();
        match (a, b) {
            (CurveRef::Line(i), CurveRef::Line(j)) => {
                let (l1, l2) = (&self.lines[i], &self.lines[j]);
                let coplanar = rank_of(&[&l1.points.0, &l1.points.1, &l2.points.0, &l2.points.1]) == 3;
                Ok(if coplanar && shared.is_empty() { 1 } else { 0 })
            }
            (CurveRef::Line(i), CurveRef::Conic(j)) | (CurveRef::Conic(j), CurveRef::Line(i)) => {
                let line = &self.lines[i];
                let conic = &self.conics[j];
                let plane = &self.planes[conic.plane];
                let (x, y) = &line.points;
                let (fx, fy) = (dot(&plane.form, x), dot(&plane.form, y));
                if fx.is_zero() && fy.is_zero() {
                    let q = conic.on_line(plane, x, y);
                    if q.iter().all(|c| c.is_zero()) {
                        return Err(err());
                    }
                    if quad_disc(&q).is_zero() {
                        return Err(err());
                    }
                    let roots = if q[0].is_zero() && q[1].is_zero() { 1 } else { 2 };
                    let on_nodes = node_params(&self.nodes, &line.nodes, x, y)
                        .iter()
                        .filter(|(_, s, t)| quad_at(&q, s, t).is_zero())
                        .count() as i64;
                    Ok(roots - on_nodes)
                } else {
                    let z = lin(&fy, x, &-fx, y);
                    if line.nodes.iter().any(|&n| same_point(&self.nodes[n].coords, &z)) {
                        return Ok(0);
                    }
                    Ok(if conic.eval(plane, &z).is_zero() { 1 } else { 0 })
                }
            }
            (CurveRef::Conic(i), CurveRef::Conic(j)) => {
                let (c1, c2) = (&self.conics[i], &self.conics[j]);
                if c1.plane == c2.plane {
                    let plane = &self.planes[c1.plane];
                    return Ok(if plane.fourth_is_node { 0 } else { 1 });
                }
                let (p1, p2) = (&self.planes[c1.plane], &self.planes[c2.plane]);
                let (x, y) = meet_line(&p1.form, &p2.form);
                let q1 = c1.on_line(p1, &x, &y);
                let q2 = c2.on_line(p2, &x, &y);
                let on_line: Vec<usize> = shared.clone();
                let params = node_params(&self.nodes, &on_line, &x, &y);
                let proportional = (0..3).all(|a| (0..3).all(|b| (&(&q1[a] * &q2[b]) - &(&q1[b] * &q2[a])).is_zero()));
                if proportional {
                    if quad_disc(&q1).is_zero() {
                        return Err(err());
                    }
                    return Ok(2 - params.len() as i64);
                }
                // resultant of the two binary quadratics
                let [a0, a1, a2] = &q1;
                let [b0, b1, b2] = &q2;
                let d02 = &(a0 * b2) - &(a2 * b0);
                let d01 = &(a0 * b1) - &(a1 * b0);
                let d12 = &(a1 * b2) - &(a2 * b1);
                let res = &(&d02 * &d02) - &(&d01 * &d12);
                if !res.is_zero() {
                    return Ok(0);
                }
                if params.iter().any(|(_, s, t)| quad_at(&q1, s, t).is_zero() && quad_at(&q2, s, t).is_zero()) {
                    // the single common point is a shared node
                    return Ok(0);
                }
                if quad_disc(&q1).is_zero() || quad_disc(&q2).is_zero() {
                    return Err(err());
                }
                Ok(1)
            }
        }
    }

    fn curve_id(&self, c: CurveRef) -> usize {
        match c {
            CurveRef::Line(i) => i,
            CurveRef::Conic(i) => self.lines.len() + i,
        }
    }

    /// Classes `H` followed by the given curves, and their Gram matrix.
    pub fn gram_of(&self, curves: &[CurveRef]) -> Result<(Vec<DivisorClass>, Matrix<BigRational>), DivisorError> {
        let mut classes = vec![DivisorClass::hyperplane()];
        classes.extend(curves.iter().map(|&c| self.class_of(c)));
        let g = gram_matrix(&classes, |i, j| self.smooth_meets(curves[i - 1], curves[j - 1]))?;
        Ok((classes, g))
    }

    /// Gram matrix over `H` and every curve found, dropping curves whose
    /// intersections are out of scope.
    pub fn full_gram(&self) -> (Vec<CurveRef>, Matrix<BigRational>, Vec<String>) {
        let mut kept: Vec<CurveRef> = Vec::new();
        let mut dropped = Vec::new();
        for c in self.curves() {
            let ok = kept.iter().all(|&k| self.smooth_meets(k, c).is_ok());
            if ok {
                kept.push(c);
            } else {
                dropped.push(format!("{c:?}: tangency with a kept curve"));
            }
        }
        let (_, g) = self.gram_of(&kept).expect("pairs checked above");
        (kept, g, dropped)
    }

    pub fn findings(&self) -> Vec<DivisorFinding> {
        let show = |p: &P4| p.iter().map(|c| c.to_string()).collect::<Vec<_>>();
        let mut out: Vec<DivisorFinding> = self
            .lines
            .iter()
            .map(|l| DivisorFinding {
                kind: DivisorKind::Line,
                nodes: l.nodes.clone(),
                field: radicands_of(&[&l.points.0, &l.points.1]),
                coefficients: vec![show(&l.points.0), show(&l.points.1)],
            })
            .collect();
        for c in &self.conics {
            let plane = &self.planes[c.plane];
            let mut field: BTreeSet<i64> = radicands_of(&[&plane.form]).into_iter().collect();
            for x in &c.coeffs {
                field.extend(x.radicands());
            }
            out.push(DivisorFinding {
                kind: DivisorKind::Conic,
                nodes: c.nodes.clone(),
                field: field.into_iter().collect(),
                coefficients: vec![show(&plane.form), c.coeffs.iter().map(|x| x.to_string()).collect()],
            });
        }
        out
    }
}

/// Lower bound and lattice class from all curves found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerBound {
    pub bound: usize,
    #[serde(with = "crate::arith::decimal")]
    pub disc_class: BigInt,
    pub findings: Vec<DivisorFinding>,
    pub diagnostics: Vec<String>,
}

pub fn lower_bound(cv: &CoefficientVector) -> Result<LowerBound, DivisorError> {
    let search = DivisorSearch::run(cv)?;
    let (_, gram, dropped) = search.full_gram();
    let mut diagnostics = search.unresolved.clone();
    diagnostics.extend(search.audit_failures.iter().cloned());
    diagnostics.extend(dropped);
    Ok(LowerBound {
        bound: rank_lower_bound(&gram),
        disc_class: lattice_disc_class(&gram)?,
        findings: search.findings(),
        diagnostics,
    })
}

/// Gram matrix of a line through `k` nodes and the residual cubic of a
/// plane containing it; the two meet in `3 - k` further smooth points.
pub fn line_cubic_gram(k: usize) -> Matrix<BigRational> {
    let line = DivisorClass::rational_curve(DivisorKind::Line, 0..k);
    let cubic = DivisorClass::rational_curve(DivisorKind::CubicResidual, 0..k);
    gram_matrix(&[line, cubic], |_, _| Ok(3 - k as i64)).expect("no fallible meets")
}

/// Gram matrix of the two conics of a split plane through `k` nodes; they
/// meet in `4 - k` further smooth points.
pub fn conic_pair_gram(k: usize) -> Matrix<BigRational> {
    let conic = DivisorClass::rational_curve(DivisorKind::Conic, 0..k);
    gram_matrix(&[conic.clone(), conic], |_, _| Ok(4 - k as i64)).expect("no fallible meets")
}
