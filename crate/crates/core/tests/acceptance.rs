//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! so that the ten criteria print one line each, in order, and share one
//! cache of per-prime records.
//!
//! `cargo test -p k3rank --test acceptance`; set `ACCEPTANCE_ONLY=3,5` to
//! run a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use k3rank::arith::rat_frac;
use k3rank::divisors::{conic_pair_gram, line_cubic_gram, CurveRef, DivisorSearch};
use k3rank::family::random_sample;
use k3rank::linalg::{self, Matrix};
use k3rank::pipeline::{
    analyze_surface_at_prime, count_all_methods, determine_rank_with, distinguish_surfaces, lower_side, primes_between,
    verdict_from_records, LowerSide, Outcome, PrimeRecord,
};
use k3rank::tate::{artin_tate_disc_class_at, base_change_degree};
use k3rank::{CoefficientVector, SignStatus};
use num_bigint::BigInt;
use num_rational::BigRational;

const S1: CoefficientVector = CoefficientVector([1, 1, 1, -7, 16, 6, -9, 12]);
const S2: CoefficientVector = CoefficientVector([1, 1, 1, -1, -16, 7, 10, -10]);
const S5: CoefficientVector = CoefficientVector([1, 1, 1, -1, -13, 0, 11, -11]);

const SAMPLE_SEED: u64 = 20_240_607;
const ORACLE_SEED: u64 = 77;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Records and lower bounds computed once and shared between criteria.
struct Cache {
    sample: Vec<CoefficientVector>,
    records: BTreeMap<(CoefficientVector, u64), PrimeRecord>,
    lower: BTreeMap<CoefficientVector, LowerSide>,
}

impl Cache {
    fn new() -> Self {
        Cache { sample: random_sample(100, SAMPLE_SEED, 20), records: BTreeMap::new(), lower: BTreeMap::new() }
    }

    fn record(&mut self, cv: CoefficientVector, p: u64) -> PrimeRecord {
        self.records.entry((cv, p)).or_insert_with(|| analyze_surface_at_prime(&cv, p, 3)).clone()
    }

    fn records_for(&mut self, cv: CoefficientVector, primes: &[u64]) -> Vec<PrimeRecord> {
        primes.iter().map(|&p| self.record(cv, p)).collect()
    }

    fn lower(&mut self, cv: CoefficientVector) -> LowerSide {
        self.lower.entry(cv).or_insert_with(|| lower_side(&cv)).clone()
    }
}

fn ratm(rows: &[&[(i64, i64)]]) -> Matrix<BigRational> {
    rows.iter().map(|r| r.iter().map(|&(n, d)| rat_frac(n, d)).collect()).collect()
}

fn minor(g: &Matrix<BigRational>) -> Matrix<BigRational> {
    g[1..].iter().map(|r| r[1..].to_vec()).collect()
}

fn line_with(s: &DivisorSearch, nodes: &[usize]) -> Result<usize, String> {
    s.lines.iter().position(|l| l.nodes == nodes).ok_or_else(|| format!("no line through nodes {nodes:?}"))
}

fn conics_in(s: &DivisorSearch, nodes: &[usize]) -> Vec<usize> {
    (0..s.conics.len()).filter(|&i| s.planes[s.conics[i].plane].nodes == nodes).collect()
}

fn s5_upper(c: &mut Cache) -> Check {
    let mut parts = Vec::new();
    for p in [23, 31] {
        let r = c.record(S5, p);
        ensure!(r.is_good(), "p = {p}: {:?} {:?}", r.outcome, r.diagnostics);
        ensure!(r.bound == Some(18), "p = {p}: bound {:?}, expected 18", r.bound);
        parts.push(format!("p={p}: 18 (count {:.1} s)", r.timings.count_us as f64 / 1e6));
    }
    Ok(parts.join(", "))
}

fn s5_lower(c: &mut Cache) -> Check {
    let s = DivisorSearch::run(&S5).map_err(|e| e.to_string())?;
    let l = line_with(&s, &[0, 3, 9])?;
    let a = conics_in(&s, &[0, 1, 6, 7]);
    let b = conics_in(&s, &[0, 2, 5, 7]);
    ensure!(a.len() == 2 && !b.is_empty(), "split planes missing: {} and {} conics", a.len(), b.len());
    let curves = [CurveRef::Line(l), CurveRef::Conic(a[0]), CurveRef::Conic(a[1]), CurveRef::Conic(b[0])];
    let (_, g) = s.gram_of(&curves).map_err(|e| e.to_string())?;
    let printed = ratm(&[
        &[(-1, 2), (1, 2), (1, 2), (1, 2)],
        &[(1, 2), (0, 1), (2, 1), (1, 1)],
        &[(1, 2), (2, 1), (0, 1), (1, 1)],
        &[(1, 2), (1, 1), (1, 1), (0, 1)],
    ]);
    ensure!(minor(&g) == printed, "Gram matrix differs: {:?}", minor(&g));
    ensure!(linalg::rank(&printed) == 4, "rank {}", linalg::rank(&printed));
    let lower = c.lower(S5);
    let (v, _) = determine_rank_with(&S5, &lower, &primes_between(5, 31), |p| c.record(S5, p));
    ensure!(v.consistent, "inconsistent: {:?}", v.diagnostics);
    ensure!(v.rank == Some(18), "verdict {:?} (lower {}, upper {:?})", v.rank, v.lower_bound, v.upper_bound);
    Ok(format!("Gram matrix reproduced, rank 4, verdict rank 18 (witness p = {})", v.witnesses[0].p))
}

fn s2(c: &mut Cache) -> Check {
    let s = DivisorSearch::run(&S2).map_err(|e| e.to_string())?;
    let q = conics_in(&s, &[0, 1, 6, 7]);
    ensure!(q.len() == 2, "{} conics in the plane through 0,1,6,7", q.len());
    let curves = [CurveRef::Conic(q[0]), CurveRef::Conic(q[1]), CurveRef::Line(line_with(&s, &[0, 3, 8])?), CurveRef::Line(line_with(&s, &[1, 2, 9])?)];
    let (_, g) = s.gram_of(&curves).map_err(|e| e.to_string())?;
    let printed = ratm(&[
        &[(0, 1), (2, 1), (1, 2), (1, 2)],
        &[(2, 1), (0, 1), (1, 2), (1, 2)],
        &[(1, 2), (1, 2), (-1, 2), (1, 1)],
        &[(1, 2), (1, 2), (1, 1), (-1, 2)],
    ]);
    ensure!(minor(&g) == printed, "Gram matrix differs: {:?}", minor(&g));
    ensure!(linalg::rank(&printed) == 3, "rank {}", linalg::rank(&printed));
    let lower = c.lower(S2);
    ensure!(lower.bound == 17, "lower bound {}", lower.bound);
    let (v, _) = determine_rank_with(&S2, &lower, &primes_between(5, 60), |p| c.record(S2, p));
    ensure!(v.consistent, "inconsistent: {:?}", v.diagnostics);
    let (pa, pb) = v.conflict.ok_or_else(|| format!("no two primes with bound 18 and disjoint classes; upper {:?}", v.upper_bound))?;
    ensure!(v.upper_bound == Some(17) && v.rank == Some(17), "upper {:?}, rank {:?}", v.upper_bound, v.rank);
    let classes = |p: u64| v.witnesses.iter().find(|w| w.p == p).map(|w| format!("{:?}", w.disc_classes.iter().map(|c| c.to_string()).collect::<Vec<_>>()));
    Ok(format!("Gram rank 3; bound 18 at p={pa} {} and p={pb} {} -> upper 17, rank 17", classes(pa).unwrap_or_default(), classes(pb).unwrap_or_default()))
}

fn s1(c: &mut Cache) -> Check {
    let r = c.record(S1, 61);
    ensure!(r.is_good(), "p = 61: {:?} {:?}", r.outcome, r.diagnostics);
    ensure!(r.bound == Some(16), "p = 61: bound {:?}", r.bound);
    let s = DivisorSearch::run(&S1).map_err(|e| e.to_string())?;
    ensure!(s.planes.len() == 1, "{} splitting planes", s.planes.len());
    let plane = &s.planes[0];
    ensure!(plane.nodes.len() == 3 && !plane.fourth_is_node, "plane through nodes {:?}", plane.nodes);
    let lower = c.lower(S1);
    let (v, _) = determine_rank_with(&S1, &lower, &primes_between(5, 61), |p| c.record(S1, p));
    ensure!(v.consistent, "inconsistent: {:?}", v.diagnostics);
    ensure!(v.rank == Some(16), "verdict {:?} (upper {:?})", v.rank, v.upper_bound);
    Ok(format!("bound 16 at p = 61 ({:.1} s); tangent plane through nodes {:?}; rank 16", r.timings.count_us as f64 / 1e6, plane.nodes))
}

fn determinants(_: &mut Cache) -> Check {
    let mut got = Vec::new();
    for k in [2usize, 3] {
        let d = linalg::determinant(&line_cubic_gram(k));
        ensure!(d == rat_frac(2 * k as i64 - 9, 1), "line + cubic, k = {k}: {d}");
        got.push(format!("line/cubic k={k}: {d}"));
    }
    for k in [2usize, 3, 4] {
        let d = linalg::determinant(&conic_pair_gram(k));
        ensure!(d == rat_frac(2 * k as i64 - 12, 1), "conic pair, k = {k}: {d}");
        got.push(format!("conics k={k}: {d}"));
    }
    Ok(got.join(", "))
}

fn counting_oracles(_: &mut Cache) -> Check {
    // most reductions at p <= 11 are bad, so draw until ten surfaces have
    // at least two good cases
    let (mut surfaces, mut checked, mut drawn) = (0, 0, 0);
    for cv in random_sample(400, ORACLE_SEED, 20) {
        if surfaces == 10 {
            break;
        }
        drawn += 1;
        let mut good = Vec::new();
        for (p, k) in [(5, 1), (7, 1), (11, 1), (5, 2)] {
            if let Ok(rows) = count_all_methods(&cv, p, k, true) {
                good.push((p, k, rows));
            }
        }
        if good.len() < 2 {
            continue;
        }
        surfaces += 1;
        for (p, k, rows) in good {
            ensure!(rows.iter().any(|(m, _)| *m == k3rank::Method::BruteForce), "{cv} p={p}: no brute force row");
            ensure!(rows.windows(2).all(|w| w[0].1 == w[1].1), "{cv} p={p} k={k}: {rows:?}");
            checked += 1;
        }
    }
    ensure!(surfaces == 10, "only {surfaces} usable surfaces");
    Ok(format!("{checked} (surface, p, k) cases on 10 surfaces agree across all methods ({drawn} drawn)"))
}

fn structural(c: &mut Cache) -> Check {
    let primes = primes_between(5, 29);
    let mut good = 0;
    let mut at_checks = 0;
    for cv in c.sample[..30].to_vec() {
        let recs = c.records_for(cv, &primes);
        for r in &recs {
            ensure!(r.outcome != Outcome::Inconsistent, "{cv} p={}: {:?}", r.p, r.diagnostics);
            if !r.is_good() {
                continue;
            }
            good += 1;
            let p = r.p;
            let p7 = BigInt::from(p).pow(7);
            for (psi, &u) in r.psi.iter().zip(&r.u) {
                ensure!(psi.coeffs.len() == 8 && psi.coeffs[0] == BigInt::from(1), "{cv} p={p}: psi not monic of degree 7");
                ensure!(psi.coeffs[7] == p7 || psi.coeffs[7] == -&p7, "{cv} p={p}: c7 = {}", psi.coeffs[7]);
                ensure!(psi.satisfies_functional_equation(p), "{cv} p={p}: functional equation");
                ensure!(psi.roots_on_circle(p), "{cv} p={p}: root off |x| = p");
                ensure!(u % 2 == 1, "{cv} p={p}: u = {u}");
                if r.sign_status == Some(SignStatus::Resolved) {
                    let m = base_change_degree(psi, &r.cycle_type, p);
                    let a = artin_tate_disc_class_at(psi, p, 15 + u, m).map_err(|e| e.to_string())?;
                    let b = artin_tate_disc_class_at(psi, p, 15 + u, 2 * m).map_err(|e| e.to_string())?;
                    ensure!(a == b, "{cv} p={p}: class {a} at m={m} but {b} at m={}", 2 * m);
                    at_checks += 1;
                }
            }
            let b = r.bound.ok_or("good record without bound")?;
            ensure!(b % 2 == 0 && b >= 16, "{cv} p={p}: bound {b}");
        }
        let lower = c.lower(cv);
        let v = verdict_from_records(&cv, &lower, &recs);
        ensure!(v.consistent, "{cv}: {:?}", v.diagnostics);
        if let Some(u) = v.upper_bound {
            ensure!(lower.bound <= u, "{cv}: lower {} > upper {u}", lower.bound);
        }
    }
    ensure!(good > 0, "no good reductions");
    Ok(format!("{good} good (surface, prime) pairs, {at_checks} Artin-Tate base-change checks"))
}

fn trend(c: &mut Cache) -> Check {
    let primes = primes_between(11, 47);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut row = Vec::new();
    for &p in &primes {
        let (mut good, mut b16) = (0, 0);
        for cv in c.sample.clone() {
            let r = c.record(cv, p);
            ensure!(r.outcome != Outcome::Inconsistent, "{cv} p={p}: {:?}", r.diagnostics);
            if r.is_good() {
                good += 1;
                b16 += usize::from(r.bound == Some(16));
            }
        }
        let frac = b16 as f64 / good.max(1) as f64;
        xs.push(p as f64);
        ys.push(frac);
        row.push(format!("{p}:{b16}/{good}"));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    ensure!(slope > 0.0, "slope {slope:.5} per unit p; {}", row.join(" "));
    Ok(format!("slope {slope:+.5}/p; bound-16 share {}", row.join(" ")))
}

fn generic_rank(c: &mut Cache) -> Check {
    let mut chosen = Vec::new();
    let mut with_divisors = 0;
    for cv in c.sample.clone() {
        if chosen.len() == 50 {
            break;
        }
        if c.lower(cv).bound == 15 {
            chosen.push(cv);
        } else {
            with_divisors += 1;
        }
    }
    ensure!(chosen.len() == 50, "only {} divisor-free surfaces", chosen.len());
    let early = primes_between(5, 49);
    let late = primes_between(5, 103);
    let (mut by49, mut later, mut open) = (0, 0, Vec::new());
    for cv in chosen {
        let lower = c.lower(cv);
        let (v, _) = determine_rank_with(&cv, &lower, &early, |p| c.record(cv, p));
        ensure!(v.consistent, "{cv}: {:?}", v.diagnostics);
        if v.rank == Some(15) {
            by49 += 1;
            continue;
        }
        let (v, _) = determine_rank_with(&cv, &lower, &late, |p| c.record(cv, p));
        ensure!(v.consistent, "{cv}: {:?}", v.diagnostics);
        match v.rank {
            Some(15) => later += 1,
            Some(r) => return Err(format!("{cv}: rank {r} with lower bound 15")),
            None => open.push(format!("{cv} upper {:?} conflict {:?} bad {:?}", v.upper_bound, v.conflict, v.bad_primes)),
        }
    }
    ensure!(by49 >= 40, "{by49}/50 determined below 50");
    let mut msg = format!("{by49}/50 rank 15 below 50, {later} more by 103, {} unresolved ({with_divisors} skipped with divisors)", open.len());
    for o in open {
        msg.push_str(&format!("\n      unresolved: {o}"));
    }
    Ok(msg)
}

fn isomorphy(c: &mut Cache) -> Check {
    let surfaces: Vec<CoefficientVector> = c.sample[..50].to_vec();
    let mut primes = primes_between(5, 47);
    let mut records: Vec<PrimeRecord> = surfaces.iter().flat_map(|&cv| c.records_for(cv, &primes)).collect();
    let mut table = distinguish_surfaces(&records);
    for p in primes_between(48, 61) {
        let open: BTreeSet<CoefficientVector> = table.iter().filter(|w| w.witness.is_none()).flat_map(|w| [w.a, w.b]).collect();
        if open.is_empty() {
            break;
        }
        primes.push(p);
        records.extend(open.into_iter().map(|cv| c.record(cv, p)));
        table = distinguish_surfaces(&records);
    }
    let open: Vec<String> = table.iter().filter(|w| w.witness.is_none()).map(|w| format!("{} ~ {}", w.a, w.b)).collect();
    let tolerated = table.len() / 50;
    ensure!(open.len() <= tolerated, "{} of {} pairs unresolved: {}", open.len(), table.len(), open.join(", "));
    let mut msg = format!("{} of {} pairs distinguished with primes <= {}", table.len() - open.len(), table.len(), primes.last().unwrap());
    for o in open {
        msg.push_str(&format!("\n      not distinguished: {o}"));
    }
    Ok(msg)
}

fn main() {
    let criteria: [(&str, fn(&mut Cache) -> Check); 10] = [
        ("S5 upper bound 18 at p = 23, 31", s5_upper),
        ("S5 Gram matrix and rank 18", s5_lower),
        ("S2 Gram matrix, conflicting classes, rank 17", s2),
        ("S1 bound 16 at p = 61, tangent plane, rank 16", s1),
        ("synthetic Gram determinants", determinants),
        ("counting methods agree with brute force", counting_oracles),
        ("structural invariants on 30 surfaces, p < 30", structural),
        ("bound-16 share increases from p = 11 to 47", trend),
        ("generic surfaces reach rank 15", generic_rank),
        ("pairwise distinction with p <= 61", isomorphy),
    ];
    let only: Option<BTreeSet<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    // panics are reported as failures below
    panic::set_hook(Box::new(|_| {}));
    let mut cache = Cache::new();
    let mut failed = 0;
    let t0 = Instant::now();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let res = panic::catch_unwind(AssertUnwindSafe(|| f(&mut cache))).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} [{secs:.1} s]\n      {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} [{secs:.1} s]\n      {detail}");
            }
        }
        std::io::stdout().flush().ok();
    }
    println!("acceptance: {failed} failed, {:.0} s total", t0.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
