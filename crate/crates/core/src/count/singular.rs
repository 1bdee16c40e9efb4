//! Screening for singular points beyond the 14 nodes.
//!
//! Projection from a node identifies the blow-up of `V` there, away from
//! lines through the node, with the double cover of the plane branched
//! along `B = K^2 - 4QF`. A singular point of `V` therefore shows up as a
//! singular point of `B`, which is found line by line in the pencil through
//! `(0:0:1)` as a common root of `B`, `B_z` and `B_y` (Euler's relation
//! supplies `B_x` for `p > 3`). Points explained by the other nodes or by
//! lines through the center (`Q = K = F = 0`) are discarded.
//!
//! A line through the center lying on `V` contracts to a single singular
//! point of `B`, so such lines are checked separately: the gradient of
//! `Q w^2 + K w + F` restricted to the line must vanish only at nodes.
//!
//! Lines with `t` in `F_{p^2}` are scanned, so every extra singularity whose
//! Galois orbit has size at most two is caught.

use super::{CountError, DegreeTwoModel, LineRestriction};
use crate::family::{DenseForm, ReducedSurface};
use crate::ff::{fq_poly, ExtField, Fq};

/// Quotient of `a` by a divisor `b`.
fn divide(field: &ExtField, a: &[Fq], b: &[Fq]) -> Vec<Fq> {
    let mut r = fq_poly::trim(a.to_vec());
    let b = fq_poly::trim(b.to_vec());
    let db = b.len() - 1;
    let lead = field.inv(b[db]).expect("nonzero leading coefficient");
    if r.len() <= db {
        return vec![Fq::ZERO];
    }
    let mut q = vec![Fq::ZERO; r.len() - db];
    for i in (0..q.len()).rev() {
        let c = field.mul(r[i + db], lead);
        q[i] = c;
        for (j, &bj) in b.iter().enumerate() {
            r[i + j] = field.sub(r[i + j], field.mul(c, bj));
        }
    }
    q
}

/// Drop from `g` every root shared with `known`; true if something is left.
fn has_unexplained_root(field: &ExtField, g: Vec<Fq>, known: &[Fq]) -> bool {
    let mut r = fq_poly::trim(g);
    if r.is_empty() {
        // the whole line is singular
        return true;
    }
    loop {
        if r.len() <= 1 {
            return false;
        }
        let d = fq_poly::gcd(field, r.clone(), known.to_vec());
        if d.len() <= 1 {
            return true;
        }
        r = divide(field, &r, &d);
    }
}

fn common(field: &ExtField, polys: &[Vec<Fq>]) -> Vec<Fq> {
    polys.iter().skip(1).fold(fq_poly::trim(polys[0].clone()), |g, h| fq_poly::gcd(field, g, fq_poly::trim(h.clone())))
}

/// Image in the model's plane of a point of `P^3(F_{p^2})`.
fn project(model: &DegreeTwoModel, field: &ExtField, pt: &[Fq; 4]) -> [Fq; 3] {
    let t = &model.transform;
    let lead = (0..4).find(|&i| t[i][3] != 0).expect("center is a point");
    let w = field.div(pt[lead], field.from_u32(t[lead][3])).unwrap();
    let mut out = [Fq::ZERO; 3];
    let mut col = 0;
    for j in 0..4 {
        if j != lead {
            out[col] = field.sub(pt[j], field.mul(field.from_u32(t[j][3]), w));
            col += 1;
        }
    }
    out
}

/// Node images in the plane, normalized, with their `w` coordinate.
fn node_images(surface: &ReducedSurface, model: &DegreeTwoModel) -> Vec<([Fq; 3], Fq)> {
    let field = &surface.field2;
    let t = &model.transform;
    let lead = (0..4).find(|&i| t[i][3] != 0).expect("center is a point");
    let mut out = Vec::new();
    for (i, pt) in surface.nodes.iter().enumerate() {
        if i == model.node {
            continue;
        }
        let w = field.div(pt[lead], field.from_u32(t[lead][3])).unwrap();
        let img = project(model, field, pt);
        let c = *img.iter().find(|c| !c.is_zero()).expect("node differs from the center");
        let inv = field.inv(c).unwrap();
        out.push((img.map(|x| field.mul(x, inv)), field.mul(w, inv)));
    }
    out
}

/// Whether the line from the center towards `dir` (with `Q = K = F = 0`
/// there) carries a singular point of `V` that is not a node.
fn unexplained_on_center_line(
    field: &ExtField,
    derivs: &[[DenseForm; 3]; 3],
    dir: [Fq; 3],
    nodes: &[([Fq; 3], Fq)],
) -> bool {
    let pt = [dir[0], dir[1], dir[2], Fq::ZERO];
    // d/dw of Q w^2 + K w + F vanishes identically on such a line
    let polys: Vec<Vec<Fq>> = derivs.iter().map(|[dq, dk, df]| vec![df.eval(field, &pt), dk.eval(field, &pt), dq.eval(field, &pt)]).collect();
    let g = common(field, &polys);
    let known = nodes
        .iter()
        .filter(|(img, _)| *img == dir)
        .fold(vec![Fq::ONE], |acc, &(_, w)| fq_poly::mul(field, &acc, &[field.neg(w), Fq::ONE]));
    has_unexplained_root(field, g, &known)
}

fn roots_in_field(field: &ExtField, f: &[Fq]) -> Vec<Fq> {
    if f.len() <= 1 {
        return Vec::new();
    }
    field.elements().filter(|&x| fq_poly::eval(field, f, x).is_zero()).collect()
}

/// Number of plane lines (or the apex) carrying a singular point of `V`
/// that is neither one of the nodes nor on a line through the center.
pub fn extra_singular_lines(surface: &ReducedSurface, model: &DegreeTwoModel) -> Result<usize, CountError> {
    let p = model.p;
    let field = &surface.field2;
    let b = model.ramification();
    let (bx, by, bz) = (b.derivative(0, p), b.derivative(1, p), b.derivative(2, p));
    let rb = LineRestriction::new(&b, 6);
    let rby = LineRestriction::new(&by, 5);
    let rbz = LineRestriction::new(&bz, 5);
    let rbx = LineRestriction::new(&bx, 5);
    let (rq, rk, rf) = (LineRestriction::new(&model.q, 2), LineRestriction::new(&model.k, 3), LineRestriction::new(&model.f, 4));
    let derivs: [[DenseForm; 3]; 3] = std::array::from_fn(|v| [model.q.derivative(v, p), model.k.derivative(v, p), model.f.derivative(v, p)]);
    let images = node_images(surface, model);

    // node images, grouped by line
    let mut on_line: Vec<(Fq, Fq)> = Vec::new();
    let mut at_x0: Vec<Fq> = Vec::new();
    let mut apex_known = false;
    for (i, pt) in surface.nodes.iter().enumerate() {
        if i == model.node {
            continue;
        }
        let [a, y, z] = project(model, field, pt);
        if !a.is_zero() {
            let inv = field.inv(a).unwrap();
            on_line.push((field.mul(y, inv), field.mul(z, inv)));
        } else if !y.is_zero() {
            at_x0.push(field.div(z, y).unwrap());
        } else {
            apex_known = true;
        }
    }
    let roots_poly = |zs: &mut dyn Iterator<Item = Fq>| -> Vec<Fq> {
        zs.fold(vec![Fq::ONE], |acc, z| fq_poly::mul(field, &acc, &[field.neg(z), Fq::ONE]))
    };

    let mut extra = 0;
    for idx in 0..field.q() {
        let t = field.element(idx);
        let g = common(
            field,
            &[rb.eval::<7>(field, t).to_vec(), rbz.eval::<6>(field, t).to_vec(), rby.eval::<6>(field, t).to_vec()],
        );
        if g.len() == 1 {
            continue;
        }
        let nodes = roots_poly(&mut on_line.iter().filter(|(s, _)| *s == t).map(|&(_, z)| z));
        let lines = common(field, &[rq.eval::<3>(field, t).to_vec(), rk.eval::<4>(field, t).to_vec(), rf.eval::<5>(field, t).to_vec()]);
        let through_center = roots_in_field(field, &lines)
            .into_iter()
            .any(|z| unexplained_on_center_line(field, &derivs, [Fq::ONE, t, z], &images));
        if through_center || has_unexplained_root(field, g, &fq_poly::mul(field, &nodes, &lines)) {
            extra += 1;
        }
    }

    // the line x = 0 through the apex
    let inf = |r: &LineRestriction| r.at_infinity.clone();
    let g = common(field, &[inf(&rb), inf(&rbz), inf(&rbx)]);
    if g.len() > 1 {
        let nodes = roots_poly(&mut at_x0.iter().copied());
        let lines = common(field, &[inf(&rq), inf(&rk), inf(&rf)]);
        let through_center = roots_in_field(field, &lines)
            .into_iter()
            .any(|z| unexplained_on_center_line(field, &derivs, [Fq::ZERO, Fq::ONE, z], &images));
        if through_center || has_unexplained_root(field, g, &fq_poly::mul(field, &nodes, &lines)) {
            extra += 1;
        }
    } else if g.is_empty() {
        extra += 1;
    }

    let apex = [Fq::ZERO, Fq::ZERO, Fq::ONE, Fq::ZERO];
    let singular_apex = [&bx, &by, &bz].iter().all(|d| d.eval(field, &apex).is_zero());
    let line_apex = [&model.q, &model.k, &model.f].iter().all(|d| d.eval(field, &apex).is_zero());
    if (singular_apex && !apex_known && !line_apex) || (line_apex && unexplained_on_center_line(field, &derivs, [Fq::ZERO, Fq::ZERO, Fq::ONE], &images)) {
        extra += 1;
    }
    Ok(extra)
}

#[cfg(test)]
mod tests {
    use crate::family::{reduce_mod_p, BadReduction, CoefficientVector};

    fn flagged(c: [i64; 8], p: u64) -> bool {
        matches!(reduce_mod_p(&CoefficientVector(c), p), Err(BadReduction::ExtraSingularity))
    }

    // each of these has one extra singular point over F_p, found by brute force
    #[test]
    fn extra_point_off_center_lines() {
        assert!(flagged([1, 1, 1, -14, 3, -11, 20, -13], 23));
    }

    #[test]
    fn extra_point_on_line_through_center() {
        assert!(flagged([1, 1, 1, -8, 8, -18, -19, -11], 7));
        assert!(flagged([1, 1, 1, 4, 2, -5, 19, 17], 5));
    }

    #[test]
    fn good_primes_pass() {
        assert!(reduce_mod_p(&CoefficientVector([1, 1, 1, -14, 3, -11, 20, -13]), 19).is_ok());
    }
}
