use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use k3rank::family::random_sample;
use k3rank::pipeline::{
    self, analyze_with_cap, determine_rank, load_records, load_sample, lower_side, parse_primes, save_sample,
    verdict_from_records, Outcome, PrimePolicy, PrimeRecord, ResultStore, FOURTH_POWER_CAP,
};
use k3rank::CoefficientVector;

/// Exit status when the data contradict themselves.
const INCONSISTENT: u8 = 2;

#[derive(Parser)]
#[command(name = "k3rank", version, about = "Picard ranks of 14-nodal Cayley-Rohn quartics")]
struct Cli {
    /// Directory that relative output and input paths are resolved against.
    #[arg(long, global = true, env = "K3RANK_RESULTS_DIR")]
    results_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random sample of coefficient vectors.
    Sample {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        bound: i64,
        #[arg(long, default_value = "sample.json")]
        out: PathBuf,
    },
    /// Count points and bound the rank of one surface at each prime.
    Analyze {
        #[arg(long)]
        coeffs: String,
        #[arg(long, default_value = "5..50")]
        primes: String,
        /// Highest extension degree counted up front (at least 3).
        #[arg(long, default_value_t = 3)]
        max_ext: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a sample at every prime, appending to a results file.
    Batch {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, default_value = "5..50")]
        primes: String,
        #[arg(long, default_value_t = 3)]
        max_ext: usize,
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "results.jsonl")]
        out: PathBuf,
    },
    /// Determine the Picard rank: divisors from below, primes from above.
    Rank {
        #[arg(long)]
        coeffs: String,
        #[arg(long, default_value_t = pipeline::MAX_PRIME)]
        prime_cap: u64,
        #[arg(long, default_value_t = 3)]
        max_ext: usize,
    },
    /// Progress tables, bound-16 counts and discriminant histogram.
    Report {
        #[arg(long = "in", default_value = "results.jsonl")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Skip the divisor search and assume lower bound 15 everywhere.
        #[arg(long)]
        assume_generic: bool,
        /// Also list pairs of surfaces that no prime distinguishes.
        #[arg(long)]
        pairs: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

fn parse_coeffs(s: &str) -> Result<CoefficientVector, String> {
    let v: Vec<i64> = serde_json::from_str(s).map_err(|e| format!("--coeffs: {e}"))?;
    let arr: [i64; 8] = v.try_into().map_err(|v: Vec<i64>| format!("--coeffs: expected 8 integers, got {}", v.len()))?;
    Ok(CoefficientVector(arr))
}

fn resolve(dir: &Option<PathBuf>, path: &Path) -> PathBuf {
    match dir {
        Some(d) if path.is_relative() => d.join(path),
        _ => path.to_path_buf(),
    }
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), String> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.to_string()),
        _ => Ok(()),
    }
}

fn io_err(p: &Path) -> impl Fn(io::Error) -> String + '_ {
    move |e| format!("{}: {e}", p.display())
}

fn summary_line(r: &PrimeRecord) -> String {
    match r.outcome {
        Outcome::Ok => {
            let classes: Vec<String> = r.disc_classes.iter().map(|c| c.to_string()).collect();
            format!(
                "p = {:>3}  bound {}  classes {{{}}}  sign {:?}  ({:.1} s)",
                r.p,
                r.bound.unwrap_or(0),
                classes.join(", "),
                r.sign_status.unwrap(),
                r.timings.count_us as f64 / 1e6
            )
        }
        Outcome::BadReduction => format!("p = {:>3}  bad reduction: {}", r.p, r.diagnostics.join("; ")),
        Outcome::Inconsistent => format!("p = {:>3}  INCONSISTENT: {}", r.p, r.diagnostics.join("; ")),
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let dir = &cli.results_dir;
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
    }
    match cli.command {
        Command::Sample { count, seed, bound, out } => {
            if bound < 1 {
                return Err("--bound must be positive".into());
            }
            let out = resolve(dir, &out);
            save_sample(&out, &random_sample(count, seed, bound)).map_err(io_err(&out))?;
            eprintln!("wrote {count} vectors to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { coeffs, primes, max_ext, out } => {
            let cv = parse_coeffs(&coeffs)?;
            let primes = parse_primes(&primes)?;
            let mut store = match &out {
                Some(o) => {
                    let o = resolve(dir, o);
                    Some(ResultStore::open(&o, true).map_err(io_err(&o))?)
                }
                None => None,
            };
            let mut records = Vec::new();
            for &p in &primes {
                let rec = analyze_with_cap(&cv, p, max_ext, FOURTH_POWER_CAP);
                eprintln!("{}", summary_line(&rec));
                match store.as_mut() {
                    Some(s) => s.append(&rec).map_err(|e| e.to_string())?,
                    None => emit(&format!("{}\n", serde_json::to_string(&rec).map_err(|e| e.to_string())?))?,
                }
                records.push(rec);
            }
            let verdict = verdict_from_records(&cv, &pipeline::LowerSide::trivial(), &records);
            if let Some(u) = verdict.upper_bound {
                eprintln!("combined upper bound {u}{}", verdict.conflict.map(|(a, b)| format!(" (classes at {a} and {b} differ)")).unwrap_or_default());
            }
            let inconsistent = records.iter().any(|r| r.outcome == Outcome::Inconsistent);
            Ok(if inconsistent { ExitCode::from(INCONSISTENT) } else { ExitCode::SUCCESS })
        }
        Command::Batch { sample, primes, max_ext, resume, jobs, out } => {
            let sample_path = resolve(dir, &sample);
            let sample = load_sample(&sample_path).map_err(io_err(&sample_path))?;
            let primes = parse_primes(&primes)?;
            let out = resolve(dir, &out);
            let mut store = ResultStore::open(&out, resume).map_err(io_err(&out))?;
            let s = pipeline::run_batch(&sample, &primes, max_ext, &mut store, jobs).map_err(io_err(&out))?;
            eprintln!(
                "computed {}, skipped {}, bad reduction {}, inconsistent {} -> {}",
                s.computed,
                s.skipped,
                s.bad_reduction,
                s.inconsistent,
                out.display()
            );
            Ok(if s.inconsistent > 0 { ExitCode::from(INCONSISTENT) } else { ExitCode::SUCCESS })
        }
        Command::Rank { coeffs, prime_cap, max_ext } => {
            let cv = parse_coeffs(&coeffs)?;
            let policy = PrimePolicy { max_k: max_ext, ..PrimePolicy::up_to(prime_cap) };
            let verdict = determine_rank(&cv, &policy);
            emit(&format!("{}\n", serde_json::to_string_pretty(&verdict).map_err(|e| e.to_string())?))?;
            match verdict.rank {
                Some(r) => eprintln!("Picard rank {r}"),
                None => eprintln!(
                    "unresolved: {} <= rank <= {}",
                    verdict.lower_bound,
                    verdict.upper_bound.map_or("?".into(), |u| u.to_string())
                ),
            }
            Ok(if verdict.consistent { ExitCode::SUCCESS } else { ExitCode::from(INCONSISTENT) })
        }
        Command::Report { input, format, assume_generic, pairs } => {
            let input = resolve(dir, &input);
            let records = load_records(&input).map_err(io_err(&input))?;
            let mut lower = BTreeMap::new();
            let mut consistent = !records.iter().any(|r| r.outcome == Outcome::Inconsistent);
            if !assume_generic {
                let cvs: std::collections::BTreeSet<CoefficientVector> = records.iter().map(|r| r.cv).collect();
                for cv in cvs {
                    let side = lower_side(&cv);
                    consistent &= verdict_from_records(&cv, &side, &records).consistent;
                    lower.insert(cv, side.bound);
                }
            }
            let rep = pipeline::report(&records, &lower);
            let text = match format {
                Format::Table => rep.to_table(),
                Format::Csv => rep.to_csv(),
            };
            let mut text = text;
            if pairs {
                let table = pipeline::distinguish_surfaces(&records);
                let open: Vec<_> = table.iter().filter(|w| w.witness.is_none()).collect();
                let _ = writeln!(text, "\n{} of {} pairs not distinguished", open.len(), table.len());
                for w in open {
                    let _ = writeln!(text, "  {} {}", w.a, w.b);
                }
            }
            emit(&text)?;
            Ok(if consistent { ExitCode::SUCCESS } else { ExitCode::from(INCONSISTENT) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
