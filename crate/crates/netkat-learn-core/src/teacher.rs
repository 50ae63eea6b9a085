//! Teacher oracles.
//!
//! Each learner talks to a teacher through two calls: a membership query and
//! an equivalence query. The teachers wrap a concrete target (a packet
//! transformation for the dup-free learner, a symbolic automaton otherwise)
//! and count the queries they answer, so harnesses can report query usage
//! without instrumenting the learners themselves.
//!
//! Equivalence of symbolic automata is decided by [`equiv_snka`], which also
//! serves the packet automaton learner: hypotheses are embedded with
//! [`embed_pnka`] and compared against the target language in symbolic form.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::automata::{Pnka, Snka};
use crate::expr::Expr;
use crate::gs::Gs;
use crate::space::{Packet, Val};
use crate::spp::{ContainsDup, Sp, Spp, Store, BOT, SP_EMPTY, SP_FULL, TOP};

/// Why a staged target could not be built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagedError {
    /// The named stage compiles to a transformation that moves packets,
    /// but the stage position demands a predicate.
    NotPredicate(&'static str),
    /// A stage contains dup; every stage must be dup free.
    ContainsDup,
}

impl From<ContainsDup> for StagedError {
    fn from(_: ContainsDup) -> StagedError {
        StagedError::ContainsDup
    }
}

impl core::fmt::Display for StagedError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StagedError::NotPredicate(what) => {
                write!(f, "{what} must be a predicate (no assignments take effect)")
            }
            StagedError::ContainsDup => write!(f, "stages must be dup free"),
        }
    }
}

/// Answers queries about a dup-free policy held as a packet transformation.
pub struct SppTeacher {
    target: Spp,
    pub mem_queries: u64,
    pub equiv_queries: u64,
}

impl SppTeacher {
    pub fn new(target: Spp) -> SppTeacher {
        SppTeacher {
            target,
            mem_queries: 0,
            equiv_queries: 0,
        }
    }

    pub fn target(&self) -> Spp {
        self.target
    }

    /// Does the target relate `a` to `b`?
    pub fn member(&mut self, st: &Store, a: &[Val], b: &[Val]) -> bool {
        self.mem_queries += 1;
        st.eval(self.target, a, b)
    }

    /// None if the hypothesis equals the target; otherwise the least packet
    /// pair on which they disagree.
    pub fn equivalent(&mut self, st: &mut Store, hyp: Spp) -> Option<(Packet, Packet)> {
        self.equiv_queries += 1;
        let d = st.xor(self.target, hyp);
        st.choose_pair(d)
    }
}

/// Answers queries about a symbolic automaton target.
pub struct SnkaTeacher {
    target: Snka,
    pub mem_queries: u64,
    pub equiv_queries: u64,
}

impl SnkaTeacher {
    pub fn new(target: Snka) -> SnkaTeacher {
        SnkaTeacher {
            target,
            mem_queries: 0,
            equiv_queries: 0,
        }
    }

    pub fn target(&self) -> &Snka {
        &self.target
    }

    pub fn member(&mut self, st: &Store, w: &[Packet]) -> bool {
        self.mem_queries += 1;
        self.target.run(st, w)
    }

    /// None means language equality; otherwise a guarded string accepted by
    /// exactly one side, with as few dups as any distinguishing string has.
    pub fn equivalent(&mut self, st: &mut Store, hyp: &Snka) -> Option<Gs> {
        self.equiv_queries += 1;
        let cex = equiv_snka(st, &self.target, hyp);
        if let Some(w) = &cex {
            debug_assert_ne!(self.target.run(st, w), hyp.run(st, w));
        }
        cex
    }
}

/// Answers queries for the packet automaton learner. The target language is
/// held as a symbolic automaton; hypotheses are embedded into the same form
/// so one equivalence procedure serves both automaton learners.
pub struct PnkaTeacher {
    target: Snka,
    pub mem_queries: u64,
    pub equiv_queries: u64,
}

impl PnkaTeacher {
    pub fn new(target: Snka) -> PnkaTeacher {
        PnkaTeacher {
            target,
            mem_queries: 0,
            equiv_queries: 0,
        }
    }

    pub fn from_pnka(st: &mut Store, target: &Pnka) -> PnkaTeacher {
        let t = embed_pnka(st, target);
        PnkaTeacher::new(t)
    }

    pub fn target(&self) -> &Snka {
        &self.target
    }

    pub fn member(&mut self, st: &Store, w: &[Packet]) -> bool {
        self.mem_queries += 1;
        self.target.run(st, w)
    }

    pub fn equivalent(&mut self, st: &mut Store, hyp: &Pnka) -> Option<Gs> {
        self.equiv_queries += 1;
        let eh = embed_pnka(st, hyp);
        let cex = equiv_snka(st, &self.target, &eh);
        if let Some(w) = &cex {
            debug_assert_ne!(self.target.run(st, w), hyp.run(w));
        }
        cex
    }
}

/// Embed a packet automaton as a symbolic automaton over the same space.
///
/// State q becomes state q+1; a fresh start state 0 bundles the per-packet
/// start map. Pairs entering state q+1 always carry q's spell on the left,
/// which is exactly the packet under which q can be entered, so runs of the
/// two machines stay in lockstep. The result is deterministic because each
/// left packet determines the source row and each right packet the target.
pub fn embed_pnka(st: &mut Store, m: &Pnka) -> Snka {
    let n = m.num_states();
    let packets: Vec<Packet> = m.space().packets().collect();
    let mut eps = vec![BOT; n + 1];
    let mut delta = vec![vec![BOT; n + 1]; n + 1];
    for a in &packets {
        let q0 = m.start_state(a);
        for b in &packets {
            let pr = st.spp_pair(a, b);
            let q1 = m.next(q0, b);
            delta[0][q1 + 1] = st.union(delta[0][q1 + 1], pr);
            if m.observes(q0, b) {
                eps[0] = st.union(eps[0], pr);
            }
        }
    }
    for q in 0..n {
        let spell = m.spell_of(q).clone();
        for b in &packets {
            let pr = st.spp_pair(&spell, b);
            let q1 = m.next(q, b);
            delta[q + 1][q1 + 1] = st.union(delta[q + 1][q1 + 1], pr);
            if m.observes(q, b) {
                eps[q + 1] = st.union(eps[q + 1], pr);
            }
        }
    }
    Snka { eps, delta }
}

/// Build the two-state target for policies of shape `init·(step·dup)*·final`
/// where init and final are predicates and step is a dup-free policy.
///
/// State 0 accepts the strings with no dup at all (both predicates pass on
/// the initial packet); state 1 loops on the step transformation, with the
/// final predicate as its observation. A string is accepted exactly when
/// its interior packets chain through the step function from a packet
/// passing init, and its last packet repeats one passing final.
pub fn build_staged_target(
    st: &mut Store,
    p_init: &Expr,
    step: &Expr,
    p_final: &Expr,
) -> Result<Snka, StagedError> {
    let ci = compile_predicate(st, p_init, "initial stage")?;
    let cf = compile_predicate(st, p_final, "final stage")?;
    let cd = st.compile(step)?;
    let head = st.seq(ci, cf);
    let enter = st.seq(ci, cd);
    Ok(Snka {
        eps: vec![head, cf],
        delta: vec![vec![BOT, enter], vec![BOT, cd]],
    })
}

fn compile_predicate(st: &mut Store, e: &Expr, what: &'static str) -> Result<Spp, StagedError> {
    let c = st.compile(e)?;
    if st.diff(c, TOP) != BOT {
        return Err(StagedError::NotPredicate(what));
    }
    Ok(c)
}

/// A product state: the target's state paired with the hypothesis's state,
/// where None stands for a side that has fallen off its automaton (no
/// transition matched) and observes nothing from then on.
type Node = (Option<usize>, Option<usize>);

fn eps_at(m: &Snka, s: Option<usize>) -> Spp {
    s.map_or(BOT, |q| m.eps[q])
}

/// Outgoing product edges, labelled with the packet pairs taking them.
/// Pairs matched by exactly one side move the other side to its dead state.
fn product_edges(st: &mut Store, tgt: &Snka, hyp: &Snka, node: Node) -> Vec<(Node, Spp)> {
    let mut out = Vec::new();
    match node {
        (Some(t), Some(h)) => {
            let mut t_all = BOT;
            for t2 in 0..tgt.n() {
                t_all = st.union(t_all, tgt.delta[t][t2]);
            }
            let mut h_all = BOT;
            for h2 in 0..hyp.n() {
                h_all = st.union(h_all, hyp.delta[h][h2]);
            }
            for t2 in 0..tgt.n() {
                for h2 in 0..hyp.n() {
                    let s = st.inter(tgt.delta[t][t2], hyp.delta[h][h2]);
                    if s != BOT {
                        out.push(((Some(t2), Some(h2)), s));
                    }
                }
            }
            for t2 in 0..tgt.n() {
                let s = st.diff(tgt.delta[t][t2], h_all);
                if s != BOT {
                    out.push(((Some(t2), None), s));
                }
            }
            for h2 in 0..hyp.n() {
                let s = st.diff(hyp.delta[h][h2], t_all);
                if s != BOT {
                    out.push(((None, Some(h2)), s));
                }
            }
        }
        (Some(t), None) => {
            for t2 in 0..tgt.n() {
                if tgt.delta[t][t2] != BOT {
                    out.push(((Some(t2), None), tgt.delta[t][t2]));
                }
            }
        }
        (None, Some(h)) => {
            for h2 in 0..hyp.n() {
                if hyp.delta[h][h2] != BOT {
                    out.push(((None, Some(h2)), hyp.delta[h][h2]));
                }
            }
        }
        (None, None) => {}
    }
    out
}

/// Language equivalence of two deterministic symbolic automata built in this
/// store. None means every guarded string gets the same verdict from both.
/// Otherwise the result is a distinguishing string with as few dups as any
/// distinguishing string has, chosen deterministically.
///
/// The search walks the product of the two automata one dup at a time,
/// tracking for every product state the set of packets that can be the
/// current head of a run arriving there. Layer k holds the heads first
/// reachable with exactly k dups, so scanning layers in order finds a
/// minimal counterexample: a product state whose observations disagree on
/// some pair whose left packet is in the layer's set. The word itself is
/// recovered by walking the layers backwards through preimages. The search
/// stops when a layer adds no new (state, head) fact, which bounds it by
/// the product size times the packet count.
pub fn equiv_snka(st: &mut Store, tgt: &Snka, hyp: &Snka) -> Option<Gs> {
    debug_assert!(tgt.is_deterministic(st));
    debug_assert!(hyp.is_deterministic(st));
    let start: Node = (Some(0), Some(0));
    let mut acc: BTreeMap<Node, Sp> = BTreeMap::new();
    acc.insert(start, SP_FULL);
    let mut layers: Vec<BTreeMap<Node, Sp>> = vec![BTreeMap::new()];
    layers[0].insert(start, SP_FULL);
    loop {
        let k = layers.len() - 1;
        let mut hit: Option<(Node, Packet, Packet)> = None;
        let frontier: Vec<(Node, Sp)> = layers[k].iter().map(|(&n, &r)| (n, r)).collect();
        for &(node, reach) in &frontier {
            let et = eps_at(tgt, node.0);
            let eh = eps_at(hyp, node.1);
            let x = st.xor(et, eh);
            if x == BOT {
                continue;
            }
            let idr = st.id_of(reach);
            let mm = st.seq(idr, x);
            if let Some((alpha, beta)) = st.choose_pair(mm) {
                hit = Some((node, alpha, beta));
                break;
            }
        }
        if let Some((node, alpha, beta)) = hit {
            return Some(backtrack(st, tgt, hyp, &layers, node, alpha, beta));
        }
        let mut next: BTreeMap<Node, Sp> = BTreeMap::new();
        for &(node, reach) in &frontier {
            for (succ, spp) in product_edges(st, tgt, hyp, node) {
                let img = st.image(spp, reach);
                if img == SP_EMPTY {
                    continue;
                }
                let cur = next.get(&succ).copied().unwrap_or(SP_EMPTY);
                let merged = st.sp_union(cur, img);
                next.insert(succ, merged);
            }
        }
        let mut fresh: BTreeMap<Node, Sp> = BTreeMap::new();
        for (node, r) in next {
            let old = acc.get(&node).copied().unwrap_or(SP_EMPTY);
            let new = st.sp_diff(r, old);
            if new != SP_EMPTY {
                let merged = st.sp_union(old, r);
                acc.insert(node, merged);
                fresh.insert(node, new);
            }
        }
        if fresh.is_empty() {
            return None;
        }
        layers.push(fresh);
    }
}

/// Recover the packet word delivering `alpha` to `node` in the last layer,
/// then close it with the disagreeing observation `beta`. Every head in
/// layer j has a predecessor head in layer j-1, because layers record first
/// arrivals of a breadth-first search.
fn backtrack(
    st: &mut Store,
    tgt: &Snka,
    hyp: &Snka,
    layers: &[BTreeMap<Node, Sp>],
    node: Node,
    alpha: Packet,
    beta: Packet,
) -> Gs {
    let mut rev = vec![beta, alpha];
    let mut cur = node;
    for j in (1..layers.len()).rev() {
        let want = {
            let head = rev.last().expect("nonempty").clone();
            st.sp_singleton(&head)
        };
        let mut found = false;
        'scan: for (&cand, &creach) in &layers[j - 1] {
            for (succ, spp) in product_edges(st, tgt, hyp, cand) {
                if succ != cur {
                    continue;
                }
                let pre = st.preimage(spp, want);
                let avail = st.sp_inter(pre, creach);
                if avail != SP_EMPTY {
                    rev.push(st.sp_min_packet(avail).expect("nonempty set"));
                    cur = cand;
                    found = true;
                    break 'scan;
                }
            }
        }
        assert!(found, "layered reach lost its predecessor");
    }
    rev.reverse();
    rev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::example_pnka;
    use crate::member::{all_strings, gs_member};
    use crate::space::PacketSpace;

    fn one_field() -> PacketSpace {
        PacketSpace::new(vec![("f", vec![1, 2])]).unwrap()
    }

    /// init f=1, step f:=2, final f=2.
    fn small_staged(st: &mut Store) -> Snka {
        build_staged_target(
            st,
            &Expr::TestEq(0, 1),
            &Expr::Assign(0, 2),
            &Expr::TestEq(0, 2),
        )
        .unwrap()
    }

    #[test]
    fn spp_teacher_reports_least_disagreement() {
        let sp = PacketSpace::new(vec![("f", vec![0, 1, 2])]).unwrap();
        let mut st = Store::new(sp);
        let target = st.compile(&Expr::TestEq(0, 1)).unwrap();
        let mut t = SppTeacher::new(target);
        assert_eq!(t.equivalent(&mut st, BOT), Some((vec![1], vec![1])));
        assert_eq!(t.equivalent(&mut st, target), None);
        assert!(t.member(&st, &[1], &[1]));
        assert!(!t.member(&st, &[0], &[0]));
        assert_eq!(t.mem_queries, 2);
        assert_eq!(t.equiv_queries, 2);
    }

    #[test]
    fn staged_target_matches_the_expression_language() {
        let sp = one_field();
        let mut st = Store::new(sp.clone());
        let m = small_staged(&mut st);
        assert!(m.is_deterministic(&mut st));
        let e = Expr::seq_all(vec![
            Expr::TestEq(0, 1),
            Expr::star(Expr::seq(Expr::Assign(0, 2), Expr::Dup)),
            Expr::TestEq(0, 2),
        ]);
        for w in all_strings(&sp, 3) {
            assert_eq!(m.run(&st, &w), gs_member(&sp, &e, &w), "{w:?}");
        }
    }

    #[test]
    fn staged_target_rejects_bad_stages() {
        let sp = one_field();
        let mut st = Store::new(sp);
        let r = build_staged_target(
            &mut st,
            &Expr::Assign(0, 1),
            &Expr::One,
            &Expr::One,
        );
        assert_eq!(r.unwrap_err(), StagedError::NotPredicate("initial stage"));
        let r = build_staged_target(&mut st, &Expr::One, &Expr::Dup, &Expr::One);
        assert_eq!(r.unwrap_err(), StagedError::ContainsDup);
    }

    #[test]
    fn equivalence_finds_a_minimal_counterexample() {
        let sp = one_field();
        let mut st = Store::new(sp);
        let m = small_staged(&mut st);
        let empty = Snka::empty();
        // least accepted string has one dup: 1 2 2
        let w = equiv_snka(&mut st, &m, &empty).expect("languages differ");
        assert_eq!(w, vec![vec![1], vec![2], vec![2]]);
        assert!(m.run(&st, &w));
        assert!(!empty.run(&st, &w));
        // the check is symmetric in verdict, not in the returned word's side
        let w2 = equiv_snka(&mut st, &empty, &m).expect("languages differ");
        assert!(m.run(&st, &w2));
    }

    #[test]
    fn equivalence_accepts_equal_languages_of_different_shape() {
        let sp = one_field();
        let mut st = Store::new(sp);
        let m = small_staged(&mut st);
        assert_eq!(equiv_snka(&mut st, &m, &m.clone()), None);
        // pad with an unreachable state
        let mut padded = m.clone();
        padded.eps.push(TOP);
        for row in &mut padded.delta {
            row.push(BOT);
        }
        padded.delta.push(vec![BOT, BOT, BOT]);
        assert_eq!(equiv_snka(&mut st, &m, &padded), None);
    }

    #[test]
    fn dead_sides_keep_the_search_alive() {
        let sp = one_field();
        let mut st = Store::new(sp);
        // target accepts f=1 then two steps of f:=2; hypothesis dies after one
        let m = small_staged(&mut st);
        let cut = {
            let enter = m.delta[0][1];
            Snka {
                eps: vec![m.eps[0], BOT],
                delta: vec![vec![BOT, enter], vec![BOT, BOT]],
            }
        };
        let w = equiv_snka(&mut st, &m, &cut).expect("languages differ");
        assert!(m.run(&st, &w));
        assert!(!cut.run(&st, &w));
        assert_eq!(w.len(), 3);
    }

    #[test]
    fn embedding_preserves_the_language() {
        let m = example_pnka();
        let sp = m.space().clone();
        let mut st = Store::new(sp.clone());
        let s = embed_pnka(&mut st, &m);
        assert!(s.is_deterministic(&mut st));
        for w in all_strings(&sp, 3) {
            assert_eq!(s.run(&st, &w), m.run(&w), "{w:?}");
        }
    }

    #[test]
    fn pnka_teacher_distinguishes_hypotheses()  {
        let m = example_pnka();
        let sp = m.space().clone();
        let mut st = Store::new(sp.clone());
        let mut teacher = PnkaTeacher::from_pnka(&mut st, &m);
        assert_eq!(teacher.equivalent(&mut st, &m), None);
        // all-rejecting two-state automaton with correct spells
        let dead = Pnka::new(
            sp,
            vec![0, 1],
            vec![vec![0, 1], vec![0, 1]],
            vec![vec![false, false], vec![false, false]],
            vec![vec![1], vec![2]],
        )
        .unwrap();
        let w = teacher.equivalent(&mut st, &dead).expect("languages differ");
        assert!(m.run(&w));
        assert_eq!(w, vec![vec![1], vec![1]]);
        assert_eq!(teacher.equiv_queries, 2);
    }
}
