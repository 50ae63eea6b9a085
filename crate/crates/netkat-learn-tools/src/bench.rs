//! Policy encoding over topologies and the benchmark harness.
//!
//! Encoding follows the worked two-switch network: a routing stage `r`
//! that picks the outgoing port and a topology stage `t` that either
//! hands the packet to the attached host (host ports pass through) or
//! carries it across a link. The two-switch line reproduces that network
//! literally, with fields sw and pt only; every other topology routes by
//! destination with fields sw, pt, dst and shortest paths chosen by
//! breadth-first search, ties to the smallest neighbor id.

use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use netkat_learn_core::learn_snka::learn_snka;
use netkat_learn_core::learn_spp::learn_spp;
use netkat_learn_core::spp::Store;
use netkat_learn_core::teacher::{build_staged_target, equiv_snka, SnkaTeacher, SppTeacher};
use netkat_learn_core::{Expr, PacketSpace, Val};

use crate::topo::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One hop of the network: the dup-free `r·t`, learned as an SPP.
    Transfer,
    /// Whole traces: the staged `p_i·(r·t·dup)*·p_f`, learned as an
    /// automaton.
    Full,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "transfer" => Some(Mode::Transfer),
            "full" => Some(Mode::Full),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Transfer => "transfer",
            Mode::Full => "full",
        }
    }
}

pub enum Policy {
    Transfer(Expr),
    Full {
        p_init: Expr,
        step: Expr,
        p_final: Expr,
    },
}

pub struct Encoded {
    pub space: PacketSpace,
    pub policy: Policy,
}

impl Encoded {
    /// The staged expression of a full-mode policy, for oracle checks.
    pub fn staged_expr(&self) -> Option<Expr> {
        match &self.policy {
            Policy::Transfer(_) => None,
            Policy::Full {
                p_init,
                step,
                p_final,
            } => Some(Expr::seq_all(vec![
                p_init.clone(),
                Expr::star(Expr::seq(step.clone(), Expr::Dup)),
                p_final.clone(),
            ])),
        }
    }
}

const SW: usize = 0;
const PT: usize = 1;
const DST: usize = 2;

fn is_worked_two_switch(t: &Topology) -> bool {
    t.n == 2 && t.links == [(1, 2, 2, 2)] && t.host_ports == [vec![1, 3], vec![1, 3]]
}

/// Per-destination hop distances, usize::MAX when unreachable.
fn distances(t: &Topology) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); t.n + 1];
    for &(a, _, b, _) in &t.links {
        adj[a].push(b);
        adj[b].push(a);
    }
    (0..=t.n)
        .map(|dst| {
            let mut dist = vec![usize::MAX; t.n + 1];
            if dst == 0 {
                return dist;
            }
            let mut queue = std::collections::VecDeque::new();
            dist[dst] = 0;
            queue.push_back(dst);
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
            dist
        })
        .collect()
}

/// The outgoing port at `sw` for traffic to `dst`: the host port when
/// already there, otherwise the port facing the smallest neighbor that
/// lies on a shortest path.
fn next_port(t: &Topology, dist: &[Vec<usize>], sw: usize, dst: usize) -> Result<u16> {
    if sw == dst {
        return Ok(1);
    }
    let d = dist[dst][sw];
    if d == usize::MAX {
        bail!("switch {} cannot reach {}: topology is disconnected", sw, dst);
    }
    let mut best: Option<(usize, u16)> = None;
    for (port, nb) in t.link_ports(sw) {
        if dist[dst][nb] + 1 == d && best.map_or(true, |(b, _)| nb < b) {
            best = Some((nb, port));
        }
    }
    let (_, port) = best.expect("finite distance has a next hop");
    Ok(port)
}

fn test(f: usize, v: usize) -> Expr {
    Expr::TestEq(f, v as Val)
}

fn assign(f: usize, v: usize) -> Expr {
    Expr::Assign(f, v as Val)
}

/// Encode a topology's policy. Transfer mode yields the dup-free one-hop
/// expression; full mode the three stages for a staged trace automaton.
pub fn encode_policy(t: &Topology, mode: Mode) -> Result<Encoded> {
    if !t.is_connected() {
        bail!("{}: topology is disconnected", t.name);
    }
    if is_worked_two_switch(t) {
        let space = PacketSpace::new(vec![("sw", vec![1, 2]), ("pt", vec![1, 2, 3])])
            .expect("fixed two-switch space");
        let r = Expr::union(
            Expr::seq(test(PT, 1), assign(PT, 2)),
            Expr::seq(test(PT, 2), assign(PT, 1)),
        );
        let hop = Expr::union(
            Expr::seq(test(SW, 1), assign(SW, 2)),
            Expr::seq(test(SW, 2), assign(SW, 1)),
        );
        let topo = Expr::union_all(vec![
            test(PT, 1),
            test(PT, 3),
            Expr::seq(test(PT, 2), hop),
        ]);
        let step = Expr::seq(r, topo);
        let policy = match mode {
            Mode::Transfer => Policy::Transfer(step),
            Mode::Full => Policy::Full {
                p_init: Expr::seq(test(SW, 1), test(PT, 1)),
                step,
                p_final: Expr::seq(test(SW, 2), test(PT, 1)),
            },
        };
        return Ok(Encoded { space, policy });
    }

    let sw_domain: Vec<Val> = (1..=t.n as Val).collect();
    let pt_domain: Vec<Val> = (1..=t.max_degree() as Val + 1).collect();
    let space = PacketSpace::new(vec![
        ("sw", sw_domain.clone()),
        ("pt", pt_domain),
        ("dst", sw_domain),
    ])
    .expect("topology space");

    let dist = distances(t);
    let mut routes = Vec::new();
    for sw in 1..=t.n {
        for dst in 1..=t.n {
            let port = next_port(t, &dist, sw, dst)?;
            routes.push(Expr::seq_all(vec![
                test(SW, sw),
                test(DST, dst),
                assign(PT, port as usize),
            ]));
        }
    }
    let r = Expr::union_all(routes);

    let mut carries = vec![test(PT, 1)];
    for &(a, pa, b, pb) in &t.links {
        carries.push(Expr::seq_all(vec![
            test(SW, a),
            test(PT, pa as usize),
            assign(SW, b),
            assign(PT, pb as usize),
        ]));
        carries.push(Expr::seq_all(vec![
            test(SW, b),
            test(PT, pb as usize),
            assign(SW, a),
            assign(PT, pa as usize),
        ]));
    }
    let topo = Expr::union_all(carries);
    let step = Expr::seq(r, topo);

    let policy = match mode {
        Mode::Transfer => Policy::Transfer(step),
        Mode::Full => {
            let p_init = Expr::union_all(
                (1..=t.n).map(|sw| {
                    Expr::seq(
                        test(SW, sw),
                        Expr::union_all((1..=t.n).map(|dst| test(DST, dst))),
                    )
                }),
            );
            let p_final = Expr::union_all(
                (1..=t.n).map(|sw| Expr::seq(test(SW, sw), test(DST, sw))),
            );
            Policy::Full {
                p_init,
                step,
                p_final,
            }
        }
    };
    Ok(Encoded { space, policy })
}

/// One benchmark unit: a topology and the learning mode to run on it.
#[derive(Clone)]
pub struct BenchInstance {
    pub topo: Topology,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchResult {
    pub name: String,
    pub kind: String,
    pub n: usize,
    pub pk_size: u64,
    pub mode: Mode,
    pub target_size: u64,
    pub learned_states: u64,
    pub mem_queries: u64,
    pub equiv_queries: u64,
    pub wall_ms: u64,
    pub success: bool,
}

impl BenchResult {
    fn failure(inst: &BenchInstance, wall_ms: u64) -> BenchResult {
        BenchResult {
            name: inst.topo.name.clone(),
            kind: inst.topo.kind.to_string(),
            n: inst.topo.n,
            pk_size: 0,
            mode: inst.mode,
            target_size: 0,
            learned_states: 0,
            mem_queries: 0,
            equiv_queries: 0,
            wall_ms,
            success: false,
        }
    }

    /// The CSV row without the wall clock, for deterministic stdout.
    pub fn stdout_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.name,
            self.kind,
            self.n,
            self.pk_size,
            self.mode.as_str(),
            self.target_size,
            self.learned_states,
            self.mem_queries,
            self.equiv_queries,
            self.success
        )
    }
}

/// Run one instance to completion: build the target, learn it, verify
/// the result against the target independently of the learner's own
/// stopping condition.
pub fn run_instance(inst: &BenchInstance) -> Result<BenchResult> {
    let enc = encode_policy(&inst.topo, inst.mode)?;
    let mut st = Store::new(enc.space.clone());
    let started = Instant::now();
    let (target_size, learned_states, mem, equiv, success) = match &enc.policy {
        Policy::Transfer(e) => {
            let target = st
                .compile(e)
                .expect("transfer encoding is dup-free");
            let mut teacher = SppTeacher::new(target);
            let (learned, _) = learn_spp(&mut st, &mut teacher);
            (
                st.mu(target),
                st.mu(learned),
                teacher.mem_queries,
                teacher.equiv_queries,
                learned == target,
            )
        }
        Policy::Full {
            p_init,
            step,
            p_final,
        } => {
            let target = build_staged_target(&mut st, p_init, step, p_final)
                .map_err(|e| anyhow::anyhow!("staged target: {}", e))?;
            let mut teacher = SnkaTeacher::new(target.clone());
            let (learned, _) = learn_snka(&mut st, &mut teacher);
            (
                target.n() as u64,
                learned.n() as u64,
                teacher.mem_queries,
                teacher.equiv_queries,
                equiv_snka(&mut st, &target, &learned).is_none(),
            )
        }
    };
    Ok(BenchResult {
        name: inst.topo.name.clone(),
        kind: inst.topo.kind.to_string(),
        n: inst.topo.n,
        pk_size: enc.space.packet_count(),
        mode: inst.mode,
        target_size,
        learned_states,
        mem_queries: mem,
        equiv_queries: equiv,
        wall_ms: started.elapsed().as_millis() as u64,
        success,
    })
}

/// Run one instance under a wall-clock timeout. A run that exceeds the
/// budget is recorded as a failure row; the stray worker is abandoned.
/// A zero budget admits no run at all.
pub fn run_instance_timed(inst: &BenchInstance, timeout_ms: u64) -> BenchResult {
    if timeout_ms == 0 {
        return BenchResult::failure(inst, 0);
    }
    let (tx, rx) = std::sync::mpsc::channel();
    let moved = inst.clone();
    let started = Instant::now();
    std::thread::spawn(move || {
        let r = run_instance(&moved);
        let _ = tx.send(r);
    });
    match rx.recv_timeout(Duration::from_millis(timeout_ms)) {
        Ok(Ok(r)) => r,
        Ok(Err(_)) | Err(_) => {
            BenchResult::failure(inst, started.elapsed().as_millis() as u64)
        }
    }
}

/// Run a suite, optionally with several instances in flight. Results
/// come back in instance order whatever the completion order was.
pub fn run_bench(instances: &[BenchInstance], timeout_ms: u64, jobs: usize) -> Vec<BenchResult> {
    let slots: Vec<Mutex<Option<BenchResult>>> =
        instances.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(instances.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= instances.len() {
                    break;
                }
                let r = run_instance_timed(&instances[i], timeout_ms);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("no poison").expect("all slots filled"))
        .collect()
}

pub const CSV_HEADER: &str =
    "name,kind,n,pk_size,mode,target_size,learned_states,mem_queries,equiv_queries,wall_ms,success";

pub fn write_csv(path: &Path, results: &[BenchResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    w.write_record(CSV_HEADER.split(','))?;
    for r in results {
        w.write_record([
            r.name.as_str(),
            r.kind.as_str(),
            &r.n.to_string(),
            &r.pk_size.to_string(),
            r.mode.as_str(),
            &r.target_size.to_string(),
            &r.learned_states.to_string(),
            &r.mem_queries.to_string(),
            &r.equiv_queries.to_string(),
            &r.wall_ms.to_string(),
            &r.success.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a suite config: one instance per line, `#` comments. Lines are
/// `<kind> <n> <mode>` for generated topologies or `file <path> <mode>`
/// for an edge list.
pub fn parse_config(text: &str, seed: u64, base: &Path) -> Result<Vec<BenchInstance>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let fail = |msg: &str| -> anyhow::Error {
            anyhow::anyhow!("config line {}: {}", lineno + 1, msg)
        };
        match words.as_slice() {
            ["file", path, mode] => {
                let mode = Mode::parse(mode).ok_or_else(|| fail("unknown mode"))?;
                let topo = crate::topo::ingest_edge_list(&base.join(path))?;
                out.push(BenchInstance { topo, mode });
            }
            [kind, n, mode] => {
                let kind = crate::topo::TopoKind::parse(kind)
                    .ok_or_else(|| fail("unknown topology kind"))?;
                let n: usize = n.parse().map_err(|_| fail("bad switch count"))?;
                let mode = Mode::parse(mode).ok_or_else(|| fail("unknown mode"))?;
                let topo = crate::topo::gen_topology(kind, n, seed)?;
                out.push(BenchInstance { topo, mode });
            }
            _ => return Err(fail("expected `<kind> <n> <mode>` or `file <path> <mode>`")),
        }
    }
    if out.is_empty() {
        bail!("config lists no instances");
    }
    Ok(out)
}

pub fn print_results(results: &[BenchResult]) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "name,kind,n,pk_size,mode,target_size,learned_states,mem_queries,equiv_queries,success"
    );
    for r in results {
        let _ = writeln!(out, "{}", r.stdout_line());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{gen_topology, TopoKind};
    use netkat_learn_core::member::{all_strings, bounded_lang, gs_member};

    fn line2() -> Topology {
        gen_topology(TopoKind::Line, 2, 0).unwrap()
    }

    #[test]
    fn two_switch_transfer_is_the_worked_expression() {
        let enc = encode_policy(&line2(), Mode::Transfer).unwrap();
        let mut st = Store::new(enc.space.clone());
        let got = match &enc.policy {
            Policy::Transfer(e) => st.compile(e).unwrap(),
            _ => unreachable!(),
        };
        let r = Expr::union(
            Expr::seq(Expr::TestEq(PT, 1), Expr::Assign(PT, 2)),
            Expr::seq(Expr::TestEq(PT, 2), Expr::Assign(PT, 1)),
        );
        let hop = Expr::union(
            Expr::seq(Expr::TestEq(SW, 1), Expr::Assign(SW, 2)),
            Expr::seq(Expr::TestEq(SW, 2), Expr::Assign(SW, 1)),
        );
        let t = Expr::union_all(vec![
            Expr::TestEq(PT, 1),
            Expr::TestEq(PT, 3),
            Expr::seq(Expr::TestEq(PT, 2), hop),
        ]);
        let want = st.compile(&Expr::seq(r, t)).unwrap();
        assert_eq!(got, want);
        // pointwise agreement with the membership oracle on pairs
        let e = match enc.policy {
            Policy::Transfer(e) => e,
            _ => unreachable!(),
        };
        for a in enc.space.packets() {
            for b in enc.space.packets() {
                assert_eq!(
                    st.eval(got, &a, &b),
                    gs_member(&enc.space, &e, &[a.clone(), b.clone()]),
                );
            }
        }
    }

    #[test]
    fn two_switch_full_matches_the_trace_language() {
        let enc = encode_policy(&line2(), Mode::Full).unwrap();
        let staged = enc.staged_expr().unwrap();
        // same bounded language as the literal worked target expression
        let sp = enc.space.clone();
        let lit = Expr::seq_all(vec![
            Expr::seq(Expr::TestEq(SW, 1), Expr::TestEq(PT, 1)),
            Expr::star(Expr::seq(
                Expr::seq(
                    Expr::union(
                        Expr::seq(Expr::TestEq(PT, 1), Expr::Assign(PT, 2)),
                        Expr::seq(Expr::TestEq(PT, 2), Expr::Assign(PT, 1)),
                    ),
                    Expr::union_all(vec![
                        Expr::TestEq(PT, 1),
                        Expr::TestEq(PT, 3),
                        Expr::seq(
                            Expr::TestEq(PT, 2),
                            Expr::union(
                                Expr::seq(Expr::TestEq(SW, 1), Expr::Assign(SW, 2)),
                                Expr::seq(Expr::TestEq(SW, 2), Expr::Assign(SW, 1)),
                            ),
                        ),
                    ]),
                ),
                Expr::Dup,
            )),
            Expr::seq(Expr::TestEq(SW, 2), Expr::TestEq(PT, 1)),
        ]);
        assert_eq!(bounded_lang(&sp, &staged, 3), bounded_lang(&sp, &lit, 3));
    }

    #[test]
    fn ring_routing_reaches_every_destination() {
        let t = gen_topology(TopoKind::Ring, 3, 0).unwrap();
        let enc = encode_policy(&t, Mode::Full).unwrap();
        let (p_init, step, p_final) = match &enc.policy {
            Policy::Full {
                p_init,
                step,
                p_final,
            } => (p_init, step, p_final),
            _ => unreachable!(),
        };
        let mut st = Store::new(enc.space.clone());
        let target = build_staged_target(&mut st, p_init, step, p_final).unwrap();
        let d = st.compile(step).unwrap();
        for src in 1..=3u16 {
            for dst in 1..=3u16 {
                // drive the hop function from (src, host port, dst) until
                // the packet sits at its destination
                let mut trace = vec![vec![src, 1, dst]];
                for _ in 0..3 {
                    if trace.last().unwrap()[SW] == dst {
                        break;
                    }
                    let here = st.sp_singleton(trace.last().unwrap());
                    let next = st.image(d, here);
                    let p = st.sp_min_packet(next).expect("route continues");
                    trace.push(p);
                }
                assert_eq!(trace.last().unwrap()[SW], dst, "{src} -> {dst}");
                trace.push(trace.last().unwrap().clone());
                assert!(target.run(&st, &trace), "{src} -> {dst}: {trace:?}");
            }
        }
    }

    #[test]
    fn three_ring_trace_automaton_learned_small() {
        let t = gen_topology(TopoKind::Ring, 3, 0).unwrap();
        let enc = encode_policy(&t, Mode::Full).unwrap();
        let (p_init, step, p_final) = match &enc.policy {
            Policy::Full {
                p_init,
                step,
                p_final,
            } => (p_init, step, p_final),
            _ => unreachable!(),
        };
        let mut st = Store::new(enc.space.clone());
        let target = build_staged_target(&mut st, p_init, step, p_final).unwrap();
        let mut teacher = SnkaTeacher::new(target.clone());
        let (h, _) = learn_snka(&mut st, &mut teacher);
        assert!(h.n() <= 4, "{}", h.n());
        assert_eq!(equiv_snka(&mut st, &target, &h), None);
        let staged = enc.staged_expr().unwrap();
        for w in all_strings(&enc.space, 1) {
            assert_eq!(h.run(&st, &w), gs_member(&enc.space, &staged, &w), "{w:?}");
        }
    }

    #[test]
    fn line_suite_runs_to_success() {
        let instances: Vec<BenchInstance> = (2..=6)
            .map(|n| BenchInstance {
                topo: gen_topology(TopoKind::Line, n, 0).unwrap(),
                mode: Mode::Transfer,
            })
            .collect();
        let results = run_bench(&instances, 120_000, 2);
        assert_eq!(results.len(), 5);
        for r in &results {
            assert!(r.success, "{}", r.name);
            assert!(r.mem_queries > 0);
            assert!(r.equiv_queries > 0);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_csv(&path, &results).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn zero_timeout_records_failures() {
        let instances = vec![BenchInstance {
            topo: line2(),
            mode: Mode::Transfer,
        }];
        let results = run_bench(&instances, 0, 1);
        assert_eq!(results.len(), 1);
        assert!(!results[0].success);
    }

    #[test]
    fn config_lines_parse() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("pair.txt"), "a b\n").unwrap();
        let cfg = "# suite\nline 2 transfer\nring 4 full\nfile pair.txt transfer\n";
        let instances = parse_config(cfg, 7, dir.path()).unwrap();
        assert_eq!(instances.len(), 3);
        assert_eq!(instances[0].topo.name, "line2");
        assert_eq!(instances[1].topo.n, 4);
        assert_eq!(instances[2].topo.name, "pair");
        assert!(parse_config("", 0, dir.path()).is_err());
        assert!(parse_config("blob 3 full\n", 0, dir.path()).is_err());
        assert!(parse_config("line x full\n", 0, dir.path()).is_err());
    }
}
