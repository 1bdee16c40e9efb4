//! Per-prime analyses, rank verdicts, pairwise distinguishing, report
//! tables and newline-delimited JSON persistence.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::count::{self, lift_counts_to_resolution, Method, PointCounts};
use crate::divisors::{self, DivisorFinding};
use crate::family::{reduce_mod_p, CoefficientVector};
use crate::tate::{self, combine_primes, RankBoundAtPrime};
use crate::weil::{self, PsiCandidate, SignResolution, SignStatus};

/// Part of every record's identity; bump when counts or bounds could change.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "/pencil-1");

/// Largest prime at which an ambiguous sign triggers a count over `F_{p^4}`.
pub const FOURTH_POWER_CAP: u64 = 23;

pub const DEFAULT_PRIMES: (u64, u64) = (5, 50);
pub const MAX_PRIME: u64 = 103;

pub fn primes_between(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(2)..=hi).filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)).collect()
}

/// Parse `"5..50"` (inclusive) or a comma-separated list.
pub fn parse_primes(spec: &str) -> Result<Vec<u64>, String> {
    let bad = |s: &str| format!("bad prime spec {s:?}");
    if let Some((a, b)) = spec.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| bad(spec))?;
        let hi: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad(spec))?;
        return Ok(primes_between(lo, hi));
    }
    let mut out: Vec<u64> = spec.split(',').map(|s| s.trim().parse().map_err(|_| bad(spec))).collect::<Result<_, _>>()?;
    if out.iter().any(|&p| primes_between(p, p).is_empty()) {
        return Err(bad(spec));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    BadReduction,
    /// Counts, Weil reconstruction or Tate data contradict each other.
    Inconsistent,
}

/// Wall time per phase, in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub reduce_us: u64,
    pub count_us: u64,
    pub weil_us: u64,
    pub tate_us: u64,
}

fn micros(start: Instant) -> u64 {
    start.elapsed().as_micros() as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeRecord {
    pub cv: CoefficientVector,
    pub p: u64,
    pub max_k: usize,
    pub code_version: String,
    pub outcome: Outcome,
    pub diagnostics: Vec<String>,
    pub counts: Option<PointCounts>,
    pub cycle_type: Vec<usize>,
    pub sign_status: Option<SignStatus>,
    pub psi: Vec<PsiCandidate>,
    /// Tate class count per surviving candidate.
    pub u: Vec<usize>,
    pub bound: Option<usize>,
    #[serde(with = "arith::decimal::set")]
    pub disc_classes: BTreeSet<BigInt>,
    pub timings: PhaseTimings,
}

pub type RecordKey = (CoefficientVector, u64, usize, String);

impl PrimeRecord {
    fn new(cv: CoefficientVector, p: u64, max_k: usize) -> Self {
        PrimeRecord {
            cv,
            p,
            max_k,
            code_version: CODE_VERSION.to_string(),
            outcome: Outcome::Ok,
            diagnostics: Vec::new(),
            counts: None,
            cycle_type: Vec::new(),
            sign_status: None,
            psi: Vec::new(),
            u: Vec::new(),
            bound: None,
            disc_classes: BTreeSet::new(),
            timings: PhaseTimings::default(),
        }
    }

    pub fn key(&self) -> RecordKey {
        (self.cv, self.p, self.max_k, self.code_version.clone())
    }

    pub fn is_good(&self) -> bool {
        self.outcome == Outcome::Ok
    }

    pub fn rank_bound(&self) -> Option<RankBoundAtPrime> {
        Some(RankBoundAtPrime { p: self.p, bound: self.bound?, disc_classes: self.disc_classes.clone() })
    }

    /// Bound and classes are exact: either one candidate survived or both
    /// have the same number of Tate classes.
    pub fn is_sharp(&self) -> bool {
        self.is_good() && (self.sign_status == Some(SignStatus::Resolved) || self.u.windows(2).all(|w| w[0] == w[1]))
    }

    fn fail(mut self, outcome: Outcome, msg: String) -> Self {
        self.outcome = outcome;
        self.diagnostics.push(msg);
        self
    }
}

fn count_all(surface: &crate::family::ReducedSurface, ks: std::ops::RangeInclusive<usize>) -> Result<Vec<u64>, String> {
    let model = count::degree_two_model(surface, 0);
    ks.map(|k| match &model {
        Ok(m) => count::count_pencil(m, k).or_else(|_| count::count_direct(surface, k)),
        Err(_) => count::count_direct(surface, k),
    }
    .map_err(|e| format!("count over F_{{p^{k}}}: {e}")))
    .collect()
}

/// Reduce, count for `k = 1..=max_k` (adding `k = 4` on an ambiguous sign
/// when `p <= FOURTH_POWER_CAP`), reconstruct `psi` and bound the rank.
pub fn analyze_surface_at_prime(cv: &CoefficientVector, p: u64, max_k: usize) -> PrimeRecord {
    analyze_with_cap(cv, p, max_k, FOURTH_POWER_CAP)
}

pub fn analyze_with_cap(cv: &CoefficientVector, p: u64, max_k: usize, fourth_cap: u64) -> PrimeRecord {
    let mut rec = PrimeRecord::new(*cv, p, max_k);
    let max_k = max_k.max(3);
    let t = Instant::now();
    let surface = match reduce_mod_p(cv, p) {
        Ok(s) => s,
        Err(e) => {
            rec.timings.reduce_us = micros(t);
            return rec.fail(Outcome::BadReduction, e.to_string());
        }
    };
    rec.timings.reduce_us = micros(t);
    rec.cycle_type = surface.cycle_type.clone();

    let t = Instant::now();
    let mut nv = match count_all(&surface, 1..=max_k) {
        Ok(nv) => nv,
        Err(e) => return rec.fail(Outcome::Inconsistent, e),
    };
    rec.timings.count_us = micros(t);

    let t = Instant::now();
    let counts = lift_counts_to_resolution(p, &nv, &surface.orbit_sizes);
    let mut resolution = match weil::psi_from_traces(&counts.traces, &surface.cycle_type, p) {
        Ok(r) => r,
        Err(e) => {
            rec.counts = Some(counts);
            return rec.fail(Outcome::Inconsistent, e.to_string());
        }
    };
    rec.timings.weil_us = micros(t);
    let mut counts = counts;
    if resolution.status == SignStatus::Ambiguous && (nv.len() >= 4 || p <= fourth_cap) {
        if nv.len() < 4 {
            let t = Instant::now();
            match count_all(&surface, 4..=4) {
                Ok(extra) => nv.extend(extra),
                Err(e) => return rec.fail(Outcome::Inconsistent, e),
            }
            rec.timings.count_us += micros(t);
            counts = lift_counts_to_resolution(p, &nv, &surface.orbit_sizes);
        }
        let t = Instant::now();
        match weil::resolve_with_t4(&resolution, counts.traces[3], &surface.cycle_type, p) {
            Ok(r) => resolution = r,
            Err(e) => {
                rec.counts = Some(counts);
                return rec.fail(Outcome::Inconsistent, e.to_string());
            }
        }
        rec.timings.weil_us += micros(t);
    }
    rec.counts = Some(counts);
    rec.sign_status = Some(resolution.status);
    rec.psi = resolution.candidates.clone();

    let t = Instant::now();
    rec.u = resolution.candidates.iter().map(|c| tate::tate_class_count(c, p)).collect();
    match tate::bound_at_prime(&resolution, &surface.cycle_type, p) {
        Ok(b) => {
            rec.bound = Some(b.bound);
            rec.disc_classes = b.disc_classes;
        }
        Err(e) => return rec.fail(Outcome::Inconsistent, e.to_string()),
    }
    rec.timings.tate_us = micros(t);
    rec
}

/// Rebuild the sign resolution stored in a record.
pub fn resolution_of(rec: &PrimeRecord) -> Option<SignResolution> {
    Some(SignResolution { status: rec.sign_status?, candidates: rec.psi.clone() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePolicy {
    pub primes: Vec<u64>,
    pub max_k: usize,
    pub fourth_power_cap: u64,
}

impl Default for PrimePolicy {
    fn default() -> Self {
        PrimePolicy { primes: primes_between(DEFAULT_PRIMES.0, DEFAULT_PRIMES.1), max_k: 3, fourth_power_cap: FOURTH_POWER_CAP }
    }
}

impl PrimePolicy {
    pub fn up_to(cap: u64) -> Self {
        PrimePolicy { primes: primes_between(DEFAULT_PRIMES.0, cap), ..Self::default() }
    }
}

/// Lower-bound half of a verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerSide {
    pub bound: usize,
    #[serde(with = "arith::decimal::option")]
    pub disc_class: Option<BigInt>,
    pub findings: Vec<DivisorFinding>,
    pub diagnostics: Vec<String>,
}

impl LowerSide {
    /// `H` and the exceptional curves alone.
    pub fn trivial() -> Self {
        LowerSide { bound: 15, disc_class: Some(BigInt::from(1)), findings: Vec::new(), diagnostics: Vec::new() }
    }
}

pub fn lower_side(cv: &CoefficientVector) -> LowerSide {
    match divisors::lower_bound(cv) {
        Ok(lb) => LowerSide { bound: lb.bound, disc_class: Some(lb.disc_class), findings: lb.findings, diagnostics: lb.diagnostics },
        Err(e) => LowerSide { diagnostics: vec![format!("divisor search failed: {e}")], ..LowerSide::trivial() },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceVerdict {
    pub cv: CoefficientVector,
    pub lower_bound: usize,
    pub upper_bound: Option<usize>,
    /// Set exactly when the bounds meet.
    pub rank: Option<usize>,
    pub witnesses: Vec<RankBoundAtPrime>,
    pub conflict: Option<(u64, u64)>,
    pub primes_used: Vec<u64>,
    pub bad_primes: Vec<u64>,
    pub consistent: bool,
    pub diagnostics: Vec<String>,
}

/// Combine a lower bound with per-prime records; order-independent.
pub fn verdict_from_records(cv: &CoefficientVector, lower: &LowerSide, records: &[PrimeRecord]) -> SurfaceVerdict {
    let mut recs: Vec<&PrimeRecord> = records.iter().filter(|r| r.cv == *cv).collect();
    recs.sort_by_key(|r| r.p);
    let mut diagnostics = lower.diagnostics.clone();
    let mut consistent = true;
    for r in recs.iter().filter(|r| r.outcome == Outcome::Inconsistent) {
        consistent = false;
        diagnostics.push(format!("p = {}: {}", r.p, r.diagnostics.join("; ")));
    }
    let bounds: Vec<RankBoundAtPrime> = recs.iter().filter(|r| r.is_good()).filter_map(|r| r.rank_bound()).collect();
    let combined = combine_primes(&bounds);
    let upper = combined.as_ref().map(|c| c.upper);
    if let Some(u) = upper {
        if u < lower.bound {
            consistent = false;
            diagnostics.push(format!("lower bound {} exceeds upper bound {u}", lower.bound));
        }
    }
    let rank = upper.filter(|&u| u == lower.bound);
    if let (Some(c), Some(_), Some(class)) = (&combined, rank, &lower.disc_class) {
        if c.conflict.is_none() {
            for w in c.witnesses.iter().filter(|w| !w.disc_classes.contains(class)) {
                consistent = false;
                diagnostics.push(format!(
                    "lattice class {class} not among Artin-Tate classes {:?} at p = {}",
                    w.disc_classes.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                    w.p
                ));
            }
        }
    }
    SurfaceVerdict {
        cv: *cv,
        lower_bound: lower.bound,
        upper_bound: upper,
        rank,
        witnesses: combined.as_ref().map(|c| c.witnesses.clone()).unwrap_or_default(),
        conflict: combined.and_then(|c| c.conflict),
        primes_used: recs.iter().map(|r| r.p).collect(),
        bad_primes: recs.iter().filter(|r| r.outcome == Outcome::BadReduction).map(|r| r.p).collect(),
        consistent,
        diagnostics,
    }
}

/// Walk the policy's primes in order, stopping once the bounds meet.
/// `analyze` supplies the record for a prime (fresh or cached).
pub fn determine_rank_with<F>(cv: &CoefficientVector, lower: &LowerSide, primes: &[u64], mut analyze: F) -> (SurfaceVerdict, Vec<PrimeRecord>)
where
    F: FnMut(u64) -> PrimeRecord,
{
    let mut records = Vec::new();
    let mut verdict = verdict_from_records(cv, lower, &records);
    for &p in primes {
        records.push(analyze(p));
        verdict = verdict_from_records(cv, lower, &records);
        if verdict.rank.is_some() || !verdict.consistent {
            break;
        }
    }
    (verdict, records)
}

pub fn determine_rank(cv: &CoefficientVector, policy: &PrimePolicy) -> SurfaceVerdict {
    let lower = lower_side(cv);
    determine_rank_with(cv, &lower, &policy.primes, |p| analyze_with_cap(cv, p, policy.max_k, policy.fourth_power_cap)).0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distinction {
    Bound { p: u64, a: usize, b: usize },
    DiscClass { p: u64, bound: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairWitness {
    pub a: CoefficientVector,
    pub b: CoefficientVector,
    pub witness: Option<Distinction>,
}

/// Geometric invariants at `p` that differ, if any.
fn distinguish_at(x: &PrimeRecord, y: &PrimeRecord) -> Option<Distinction> {
    if !x.is_sharp() || !y.is_sharp() {
        return None;
    }
    let (bx, by) = (x.bound?, y.bound?);
    if bx != by {
        return Some(Distinction::Bound { p: x.p, a: bx, b: by });
    }
    if x.disc_classes.is_disjoint(&y.disc_classes) {
        return Some(Distinction::DiscClass { p: x.p, bound: bx });
    }
    None
}

/// One entry per unordered pair of distinct surfaces, using the smallest
/// common prime that separates them.
pub fn distinguish_surfaces(records: &[PrimeRecord]) -> Vec<PairWitness> {
    let mut by_cv: BTreeMap<CoefficientVector, BTreeMap<u64, &PrimeRecord>> = BTreeMap::new();
    for r in records {
        by_cv.entry(r.cv).or_default().insert(r.p, r);
    }
    let cvs: Vec<&CoefficientVector> = by_cv.keys().collect();
    let pairs: Vec<(usize, usize)> = (0..cvs.len()).flat_map(|i| (i + 1..cvs.len()).map(move |j| (i, j))).collect();
    pairs
        .into_par_iter()
        .map(|(i, j)| {
            let (ra, rb) = (&by_cv[cvs[i]], &by_cv[cvs[j]]);
            let witness = ra.iter().find_map(|(p, x)| rb.get(p).and_then(|y| distinguish_at(x, y)));
            PairWitness { a: *cvs[i], b: *cvs[j], witness }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub p: u64,
    pub finished: usize,
    pub left: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    /// Progress tables keyed by the lower bound (the rank expected).
    pub progress: BTreeMap<usize, Vec<ProgressRow>>,
    /// `(p, #good reduction, #bound 16)`.
    pub bound16: Vec<(u64, usize, usize)>,
    /// Artin-Tate classes at sharp records with bound 16, most frequent first.
    pub histogram: Vec<(BigInt, usize)>,
    pub rank_tally: BTreeMap<usize, usize>,
    pub unresolved: usize,
}

/// Build the report tables. Surfaces absent from `lower` are taken to
/// have the trivial lower bound 15.
pub fn report(records: &[PrimeRecord], lower: &BTreeMap<CoefficientVector, usize>) -> Report {
    let mut out = Report::default();
    let mut by_cv: BTreeMap<CoefficientVector, Vec<PrimeRecord>> = BTreeMap::new();
    for r in records {
        by_cv.entry(r.cv).or_default().push(r.clone());
    }
    let primes: BTreeSet<u64> = records.iter().map(|r| r.p).collect();

    for (cv, recs) in &by_cv {
        let lb = lower.get(cv).copied().unwrap_or(15);
        let side = LowerSide { bound: lb, disc_class: None, findings: Vec::new(), diagnostics: Vec::new() };
        let mut finished_at = None;
        for &p in &primes {
            let upto: Vec<PrimeRecord> = recs.iter().filter(|r| r.p <= p).cloned().collect();
            if let Some(rank) = verdict_from_records(cv, &side, &upto).rank {
                finished_at = Some((p, rank));
                break;
            }
        }
        let rows = out.progress.entry(lb).or_insert_with(|| primes.iter().map(|&p| ProgressRow { p, finished: 0, left: 0 }).collect());
        for row in rows.iter_mut() {
            match finished_at {
                Some((p, _)) if p == row.p => row.finished += 1,
                Some((p, _)) if p < row.p => {}
                _ => row.left += 1,
            }
        }
        match finished_at {
            Some((_, rank)) => *out.rank_tally.entry(rank).or_default() += 1,
            None => out.unresolved += 1,
        }
    }
    for rows in out.progress.values_mut() {
        // drop leading primes where nothing has happened yet, keeping the layout compact
        let total = rows.first().map(|r| r.finished + r.left).unwrap_or(0);
        let first = rows.iter().position(|r| r.finished > 0 || r.left < total).unwrap_or(rows.len().saturating_sub(1));
        rows.drain(..first);
    }

    for &p in &primes {
        let good = records.iter().filter(|r| r.p == p && r.is_good()).count();
        let b16 = records.iter().filter(|r| r.p == p && r.is_good() && r.bound == Some(16)).count();
        out.bound16.push((p, good, b16));
    }

    let mut hist: BTreeMap<BigInt, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.bound == Some(16) && r.sign_status == Some(SignStatus::Resolved)) {
        for c in &r.disc_classes {
            *hist.entry(c.clone()).or_default() += 1;
        }
    }
    out.histogram = hist.into_iter().collect();
    out.histogram.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

impl Report {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (rank, rows) in &self.progress {
            let _ = writeln!(s, "Rank {rank} expected");
            let _ = writeln!(s, "{:>6} {:>16} {:>12}", "prime", "#cases finished", "#cases left");
            for r in rows {
                let _ = writeln!(s, "{:>6} {:>16} {:>12}", r.p, r.finished, r.left);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{:>6} {:>6} {:>9}", "prime", "good", "bound16");
        for (p, g, b) in &self.bound16 {
            let _ = writeln!(s, "{p:>6} {g:>6} {b:>9}");
        }
        s.push('\n');
        let _ = writeln!(s, "{} distinct discriminant classes", self.histogram.len());
        for (c, n) in &self.histogram {
            let _ = writeln!(s, "{:>8} {n:>6}", format!("({c})"));
        }
        s.push('\n');
        for (rank, n) in &self.rank_tally {
            let _ = writeln!(s, "rank {rank}: {n}");
        }
        let _ = writeln!(s, "unresolved: {}", self.unresolved);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("expected_rank,p,finished,left\n");
        for (rank, rows) in &self.progress {
            for r in rows {
                let _ = writeln!(s, "{rank},{},{},{}", r.p, r.finished, r.left);
            }
        }
        s.push_str("\np,good,bound16\n");
        for (p, g, b) in &self.bound16 {
            let _ = writeln!(s, "{p},{g},{b}");
        }
        s.push_str("\nclass,count\n");
        for (c, n) in &self.histogram {
            let _ = writeln!(s, "{c},{n}");
        }
        s
    }
}

/// Append-only NDJSON file of [`PrimeRecord`]s with an exclusive writer.
pub struct ResultStore {
    path: PathBuf,
    file: File,
    known: HashSet<RecordKey>,
}

impl ResultStore {
    /// Open for appending, taking an exclusive lock. With `resume` the
    /// existing records are kept and indexed; otherwise the file is truncated.
    pub fn open(path: impl AsRef<Path>, resume: bool) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.try_lock().map_err(|_| io::Error::new(io::ErrorKind::WouldBlock, format!("{} is locked by another writer", path.display())))?;
        let mut known = HashSet::new();
        if resume {
            for r in load_records(&path)? {
                known.insert(r.key());
            }
        } else {
            file.set_len(0)?;
        }
        Ok(ResultStore { path, file, known })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.known.contains(key)
    }

    pub fn append(&mut self, rec: &PrimeRecord) -> io::Result<()> {
        let line = serde_json::to_string(rec).map_err(io::Error::other)?;
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        self.known.insert(rec.key());
        Ok(())
    }
}

pub fn load_records(path: impl AsRef<Path>) -> io::Result<Vec<PrimeRecord>> {
    let file = match File::open(path.as_ref()) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.as_ref().display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub computed: usize,
    pub skipped: usize,
    pub bad_reduction: usize,
    pub inconsistent: usize,
}

/// Analyze every `(surface, prime)` job not yet in the store on `jobs`
/// threads; results are appended as they finish.
pub fn run_batch(sample: &[CoefficientVector], primes: &[u64], max_k: usize, store: &mut ResultStore, jobs: usize) -> io::Result<BatchSummary> {
    let todo: Vec<(CoefficientVector, u64)> = sample
        .iter()
        .flat_map(|cv| primes.iter().map(move |&p| (*cv, p)))
        .filter(|(cv, p)| !store.contains(&(*cv, *p, max_k, CODE_VERSION.to_string())))
        .collect();
    let skipped = sample.len() * primes.len() - todo.len();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(io::Error::other)?;
    let summary = Mutex::new(BatchSummary { skipped, ..Default::default() });
    let sink = Mutex::new(store);
    pool.install(|| {
        todo.par_iter().try_for_each(|(cv, p)| {
            let rec = analyze_surface_at_prime(cv, *p, max_k);
            let mut s = summary.lock().unwrap();
            s.computed += 1;
            match rec.outcome {
                Outcome::BadReduction => s.bad_reduction += 1,
                Outcome::Inconsistent => s.inconsistent += 1,
                Outcome::Ok => {}
            }
            drop(s);
            sink.lock().unwrap().append(&rec)
        })
    })?;
    Ok(summary.into_inner().unwrap())
}

pub fn save_sample(path: impl AsRef<Path>, sample: &[CoefficientVector]) -> io::Result<()> {
    let text = serde_json::to_string_pretty(sample).map_err(io::Error::other)?;
    std::fs::write(path, text + "\n")
}

pub fn load_sample(path: impl AsRef<Path>) -> io::Result<Vec<CoefficientVector>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Count with every method applicable at `(p, k)`; used to cross-check.
pub fn count_all_methods(cv: &CoefficientVector, p: u64, k: usize, with_brute_force: bool) -> Result<Vec<(Method, u64)>, String> {
    let surface = reduce_mod_p(cv, p).map_err(|e| e.to_string())?;
    let mut methods = vec![Method::Pencil, Method::DegreeTwo, Method::DegreeTwoFull, Method::Direct, Method::Fibration];
    if with_brute_force {
        methods.push(Method::BruteForce);
    }
    let mut out = Vec::new();
    for m in methods {
        match count::count_with(&surface, k, m) {
            Ok(row) => out.push((m, row.nv)),
            Err(count::CountError::InsufficientRationalNodes | count::CountError::NodeNotRational(_)) => {}
            Err(e) => return Err(format!("{}: {e}", m.name())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S5: CoefficientVector = CoefficientVector([1, 1, 1, -1, -13, 0, 11, -11]);

    fn fake(cv: [i64; 8], p: u64, bound: usize, classes: &[i64]) -> PrimeRecord {
        let mut r = PrimeRecord::new(CoefficientVector(cv), p, 3);
        r.bound = Some(bound);
        r.u = vec![bound - 15];
        r.sign_status = Some(SignStatus::Resolved);
        r.disc_classes = classes.iter().map(|&c| BigInt::from(c)).collect();
        r
    }

    #[test]
    fn prime_lists() {
        assert_eq!(primes_between(5, 50), vec![5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
        assert_eq!(parse_primes("5..13").unwrap(), vec![5, 7, 11, 13]);
        assert_eq!(parse_primes("31,23").unwrap(), vec![23, 31]);
        assert!(parse_primes("4,5").is_err());
        assert!(parse_primes("x..5").is_err());
    }

    #[test]
    fn bad_prime_is_recorded() {
        // 13 divides a node-collision resultant of S2
        let s2 = CoefficientVector([1, 1, 1, -1, -16, 7, 10, -10]);
        let rec = analyze_surface_at_prime(&s2, 13, 3);
        assert_eq!(rec.outcome, Outcome::BadReduction);
        assert!(rec.bound.is_none());
        assert!(!rec.diagnostics.is_empty());
    }

    #[test]
    fn s5_record_round_trips() {
        let rec = analyze_surface_at_prime(&S5, 23, 3);
        assert_eq!(rec.outcome, Outcome::Ok, "{:?}", rec.diagnostics);
        assert_eq!(rec.bound, Some(18));
        assert_eq!(rec.disc_classes, [BigInt::from(-3)].into_iter().collect());
        let json = serde_json::to_string(&rec).unwrap();
        let back: PrimeRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn verdict_order_independent() {
        let cv = [1, 1, 1, 2, 3, 4, 5, 6];
        let recs = vec![fake(cv, 7, 18, &[-1]), fake(cv, 11, 16, &[-1]), fake(cv, 13, 16, &[-2])];
        let lower = LowerSide::trivial();
        let v1 = verdict_from_records(&CoefficientVector(cv), &lower, &recs);
        let mut rev = recs.clone();
        rev.reverse();
        let v2 = verdict_from_records(&CoefficientVector(cv), &lower, &rev);
        assert_eq!(v1, v2);
        assert_eq!(v1.rank, Some(15));
        assert_eq!(v1.conflict, Some((11, 13)));
    }

    #[test]
    fn verdict_flags_lower_above_upper() {
        let cv = [1, 1, 1, 2, 3, 4, 5, 6];
        let lower = LowerSide { bound: 17, ..LowerSide::trivial() };
        let v = verdict_from_records(&CoefficientVector(cv), &lower, &[fake(cv, 7, 16, &[-1])]);
        assert!(!v.consistent);
        assert_eq!(v.rank, None);
    }

    #[test]
    fn verdict_checks_lattice_class() {
        let cv = [1, 1, 1, 2, 3, 4, 5, 6];
        let lower = LowerSide { bound: 16, disc_class: Some(BigInt::from(-6)), ..LowerSide::trivial() };
        let ok = verdict_from_records(&CoefficientVector(cv), &lower, &[fake(cv, 61, 16, &[-6])]);
        assert!(ok.consistent);
        assert_eq!(ok.rank, Some(16));
        let bad = verdict_from_records(&CoefficientVector(cv), &lower, &[fake(cv, 61, 16, &[-5])]);
        assert!(!bad.consistent);
    }

    #[test]
    fn distinguishing() {
        let a = [1, 1, 1, 2, 3, 4, 5, 6];
        let b = [1, 1, 1, 2, 3, 4, 5, 7];
        let w = distinguish_surfaces(&[fake(a, 7, 16, &[-1]), fake(b, 7, 16, &[-2])]);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].witness, Some(Distinction::DiscClass { p: 7, bound: 16 }));
        let w = distinguish_surfaces(&[fake(a, 7, 16, &[-1]), fake(b, 7, 16, &[-1]), fake(b, 11, 18, &[-1])]);
        assert_eq!(w[0].witness, None);
        let w = distinguish_surfaces(&[fake(a, 7, 16, &[-1]), fake(a, 7, 16, &[-1])]);
        assert!(w.is_empty());
    }

    #[test]
    fn empty_report() {
        let r = report(&[], &BTreeMap::new());
        assert!(r.progress.is_empty() && r.bound16.is_empty() && r.histogram.is_empty());
        assert!(r.to_csv().starts_with("expected_rank"));
    }

    #[test]
    fn report_progress() {
        let a = [1, 1, 1, 2, 3, 4, 5, 6];
        let b = [1, 1, 1, 2, 3, 4, 5, 7];
        let recs = vec![fake(a, 7, 16, &[-1]), fake(a, 11, 16, &[-2]), fake(b, 7, 16, &[-1]), fake(b, 11, 16, &[-1]), fake(b, 13, 16, &[-3])];
        let r = report(&recs, &BTreeMap::new());
        let rows = &r.progress[&15];
        assert_eq!(rows.iter().map(|r| (r.p, r.finished, r.left)).collect::<Vec<_>>(), vec![(11, 1, 1), (13, 1, 0)]);
        assert_eq!(r.rank_tally[&15], 2);
        assert_eq!(r.histogram[0], (BigInt::from(-1), 3));
        assert_eq!(r.bound16[0], (7, 2, 2));
    }

    #[test]
    fn store_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let sample = [S5];
        {
            let mut store = ResultStore::open(&path, false).unwrap();
            let s = run_batch(&sample, &[5, 7], 3, &mut store, 1).unwrap();
            assert_eq!(s.computed, 2);
            assert!(ResultStore::open(&path, true).is_err(), "second writer must be refused");
        }
        let mut store = ResultStore::open(&path, true).unwrap();
        let s = run_batch(&sample, &[5, 7, 11], 3, &mut store, 1).unwrap();
        assert_eq!((s.computed, s.skipped), (1, 2));
        let recs = load_records(&path).unwrap();
        assert_eq!(recs.len(), 3);
    }
}
