use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netkat_learn_core::learn_pnka::learn_pnka;
use netkat_learn_core::learn_snka::learn_snka;
use netkat_learn_core::learn_spp::learn_spp;
use netkat_learn_core::member::gs_member;
use netkat_learn_core::parse::parse_expr;
use netkat_learn_core::spp::Store;
use netkat_learn_core::teacher::{build_staged_target, PnkaTeacher, SnkaTeacher, SppTeacher};
use netkat_learn_core::{Expr, Packet, PacketSpace, Val};

use netkat_learn_tools::bench;

/// Learners for NetKAT behavior: packet pair functions and trace
/// automata, plus a benchmark harness over synthetic topologies.
///
/// Packet spaces are text files: one `field <name> <count>` (values
/// 0..count-1) or `field <name> <lo>..<hi>` line per field, `#`
/// comments. Traces are semicolon-separated packets, each packet a
/// comma-separated list of `field=value` covering every field, e.g.
/// `sw=1,pt=1;sw=2,pt=2;sw=2,pt=1;sw=2,pt=1`.
#[derive(Parser)]
#[command(name = "netkat-learn", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether a trace belongs to an expression's language.
    Eval {
        /// Packet space file.
        space: PathBuf,
        /// NetKAT expression, e.g. "f=1; (f:=2; dup)*; f=2".
        expr: String,
        /// Trace, e.g. "f=1;f=2;f=2".
        trace: String,
    },
    /// Learn a dup-free expression's packet pair function from queries.
    LearnSpp {
        /// Packet space file.
        space: PathBuf,
        /// Dup-free NetKAT expression to use as the hidden target.
        expr: String,
        /// Also print the counterexample sequence.
        #[arg(long)]
        trace: bool,
    },
    /// Learn the canonical per-packet automaton of a staged target.
    LearnPnka {
        /// Packet space file.
        space: PathBuf,
        #[command(flatten)]
        target: StagedTarget,
        /// Also print the counterexample sequence.
        #[arg(long)]
        trace: bool,
    },
    /// Learn a symbolic trace automaton of a staged target.
    LearnSnka {
        /// Packet space file.
        space: PathBuf,
        #[command(flatten)]
        target: StagedTarget,
        /// Also print per-round conjecture sizes and counterexamples.
        #[arg(long)]
        trace: bool,
    },
    /// Run a benchmark suite and write a CSV.
    Bench {
        /// Suite file: `<kind> <n> <mode>` or `file <path> <mode>` per
        /// line, `#` comments. Modes: transfer, full. Kinds: line,
        /// ring, star, tree, random.
        config: PathBuf,
        /// Seed for generated topologies.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Wall-clock budget per instance in milliseconds.
        #[arg(long, default_value_t = 120_000)]
        timeout_ms: u64,
        /// Instances to run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CSV output path.
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
}

/// A staged target `p_i · (d · dup)* · p_f`, given either as the three
/// stages or as one expression of exactly that shape.
#[derive(Args)]
struct StagedTarget {
    /// Initial-packet predicate.
    #[arg(long, requires = "d", requires = "pf", conflicts_with = "expr_staged")]
    pi: Option<String>,
    /// Dup-free hop policy.
    #[arg(long)]
    d: Option<String>,
    /// Final-packet predicate.
    #[arg(long)]
    pf: Option<String>,
    /// Whole staged expression to split into the three stages.
    #[arg(long, conflicts_with_all = ["d", "pf"])]
    expr_staged: Option<String>,
}

fn main() -> ExitCode {
    // die quietly when a downstream pager closes the pipe, like any
    // other unix filter
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Eval { space, expr, trace } => {
            let sp = load_space(&space)?;
            let e = parse_expr(&expr, &sp).map_err(|e| anyhow::anyhow!("expression: {e}"))?;
            let w = parse_trace(&sp, &trace)?;
            if gs_member(&sp, &e, &w) {
                println!("member");
            } else {
                println!("non-member");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::LearnSpp { space, expr, trace } => {
            let sp = load_space(&space)?;
            let e = parse_expr(&expr, &sp).map_err(|e| anyhow::anyhow!("expression: {e}"))?;
            let mut st = Store::new(sp.clone());
            let target = match st.compile(&e) {
                Ok(t) => t,
                Err(_) => bail!("expression: the target of learn-spp must be dup-free"),
            };
            let mut teacher = SppTeacher::new(target);
            let (learned, log) = learn_spp(&mut st, &mut teacher);
            if trace {
                for (a, b) in &log.counterexamples {
                    println!(
                        "counterexample: ({}) -> ({})",
                        sp.format_packet(a),
                        sp.format_packet(b)
                    );
                }
            }
            print!("{}", st.dump(learned));
            println!("membership queries: {}", teacher.mem_queries);
            println!("equivalence queries: {}", teacher.equiv_queries);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::LearnPnka {
            space,
            target,
            trace,
        } => {
            let sp = load_space(&space)?;
            let (p_init, step, p_final) = target.stages(&sp)?;
            let mut st = Store::new(sp.clone());
            let snka = build_staged_target(&mut st, &p_init, &step, &p_final)
                .map_err(|e| anyhow::anyhow!("staged target: {e}"))?;
            let mut teacher = PnkaTeacher::new(snka);
            let (learned, log) = learn_pnka(&mut st, &mut teacher);
            if trace {
                for c in &log.counterexamples {
                    println!("counterexample: {}", format_trace(&sp, c));
                }
            }
            print!("{}", learned.dump());
            println!("membership queries: {}", teacher.mem_queries);
            println!("equivalence queries: {}", teacher.equiv_queries);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::LearnSnka {
            space,
            target,
            trace,
        } => {
            let sp = load_space(&space)?;
            let (p_init, step, p_final) = target.stages(&sp)?;
            let mut st = Store::new(sp.clone());
            let snka = build_staged_target(&mut st, &p_init, &step, &p_final)
                .map_err(|e| anyhow::anyhow!("staged target: {e}"))?;
            let mut teacher = SnkaTeacher::new(snka);
            let (learned, log) = learn_snka(&mut st, &mut teacher);
            if trace {
                for (i, c) in log.counterexamples.iter().enumerate() {
                    println!(
                        "round {}: {} states, counterexample {}",
                        i + 1,
                        log.conjectures[i].n(),
                        format_trace(&sp, c)
                    );
                }
            }
            print!("{}", learned.dump(&st));
            let live = learned.live_states(&mut st);
            println!(
                "live states: {} of {}",
                live.iter().filter(|&&x| x).count(),
                learned.n()
            );
            println!("membership queries: {}", teacher.mem_queries);
            println!("equivalence queries: {}", teacher.equiv_queries);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench {
            config,
            seed,
            timeout_ms,
            jobs,
            out,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            let instances = bench::parse_config(&text, seed, base)?;
            let results = bench::run_bench(&instances, timeout_ms, jobs);
            bench::print_results(&results);
            bench::write_csv(&out, &results)?;
            if results.iter().all(|r| r.success) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

impl StagedTarget {
    fn stages(&self, sp: &PacketSpace) -> Result<(Expr, Expr, Expr)> {
        let parse = |what: &str, text: &str| -> Result<Expr> {
            parse_expr(text, sp).map_err(|e| anyhow::anyhow!("{what}: {e}"))
        };
        match (&self.pi, &self.d, &self.pf, &self.expr_staged) {
            (Some(pi), Some(d), Some(pf), None) => {
                Ok((parse("--pi", pi)?, parse("--d", d)?, parse("--pf", pf)?))
            }
            (None, None, None, Some(whole)) => split_staged(parse("--expr-staged", whole)?),
            _ => bail!("give either --pi, --d and --pf, or --expr-staged"),
        }
    }
}

/// Split `p_i · (d · dup)* · p_f` into its stages. The expression must
/// have exactly one top-level starred factor whose body ends in `dup`.
fn split_staged(e: Expr) -> Result<(Expr, Expr, Expr)> {
    fn flatten(e: Expr, out: &mut Vec<Expr>) {
        match e {
            Expr::Seq(a, b) => {
                flatten(*a, out);
                flatten(*b, out);
            }
            other => out.push(other),
        }
    }
    let mut factors = Vec::new();
    flatten(e, &mut factors);
    let stars: Vec<usize> = factors
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f, Expr::Star(_)))
        .map(|(i, _)| i)
        .collect();
    let at = match stars.as_slice() {
        [i] => *i,
        [] => bail!("--expr-staged: no starred hop stage found"),
        _ => bail!("--expr-staged: more than one starred factor"),
    };
    let body = match factors[at].clone() {
        Expr::Star(b) => *b,
        _ => unreachable!(),
    };
    let mut hop = Vec::new();
    flatten(body, &mut hop);
    if hop.pop() != Some(Expr::Dup) {
        bail!("--expr-staged: the starred stage must end in dup");
    }
    if hop.is_empty() {
        bail!("--expr-staged: the starred stage has no hop policy");
    }
    let p_final = Expr::seq_all(factors.split_off(at + 1));
    factors.pop();
    let p_init = Expr::seq_all(factors);
    Ok((p_init, Expr::seq_all(hop), p_final))
}

/// Read a packet space file: `field <name> <count>` for 0-based domains
/// or `field <name> <lo>..<hi>` for inclusive ranges.
fn load_space(path: &std::path::Path) -> Result<PacketSpace> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut fields: Vec<(String, Vec<Val>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fail = |msg: &str| -> anyhow::Error {
            anyhow::anyhow!("{}:{}: {}", path.display(), lineno + 1, msg)
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        let (name, spec) = match words.as_slice() {
            ["field", name, spec] => (*name, *spec),
            _ => return Err(fail("expected `field <name> <count|lo..hi>`")),
        };
        let domain: Vec<Val> = if let Some((lo, hi)) = spec.split_once("..") {
            let lo: Val = lo.parse().map_err(|_| fail("bad range start"))?;
            let hi: Val = hi.parse().map_err(|_| fail("bad range end"))?;
            if lo > hi {
                return Err(fail("empty range"));
            }
            (lo..=hi).collect()
        } else {
            let count: Val = spec.parse().map_err(|_| fail("bad value count"))?;
            if count == 0 {
                return Err(fail("a field needs at least one value"));
            }
            (0..count).collect()
        };
        fields.push((name.to_string(), domain));
    }
    PacketSpace::new(fields).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e))
}

fn parse_trace(sp: &PacketSpace, text: &str) -> Result<Vec<Packet>> {
    let mut out = Vec::new();
    for (i, part) in text.split(';').enumerate() {
        let fail = |msg: String| -> anyhow::Error {
            anyhow::anyhow!("trace packet {}: {}", i + 1, msg)
        };
        let mut packet: Vec<Option<Val>> = vec![None; sp.num_fields()];
        for kv in part.split(',') {
            let (name, val) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `field=value`, got `{}`", kv.trim())))?;
            let f = sp
                .field_by_name(name.trim())
                .ok_or_else(|| fail(format!("unknown field `{}`", name.trim())))?;
            let v: Val = val
                .trim()
                .parse()
                .map_err(|_| fail(format!("bad value `{}`", val.trim())))?;
            if !sp.domain(f).contains(&v) {
                return Err(fail(format!("value {} outside {}'s domain", v, name.trim())));
            }
            if packet[f].replace(v).is_some() {
                return Err(fail(format!("field `{}` set twice", name.trim())));
            }
        }
        let packet: Option<Packet> = packet.into_iter().collect();
        out.push(packet.ok_or_else(|| fail("every field needs a value".into()))?);
    }
    if out.len() < 2 {
        bail!("a trace has at least two packets");
    }
    Ok(out)
}

fn format_trace(sp: &PacketSpace, w: &[Packet]) -> String {
    w.iter()
        .map(|p| sp.format_packet(p))
        .collect::<Vec<_>>()
        .join(";")
}
