//! Learner for symbolic automata.
//!
//! Where the canonical learner seeds every packet table with every
//! single-packet suffix, this learner keeps tables only for packets that
//! counterexamples have actually shown, and cells only for the prefix and
//! suffix sets those counterexamples produced. Each counterexample is cut at
//! every position; the prefix joins the access set and the suffix the
//! suffix set of the table named by the prefix's last packet. Rows are
//! mapped onto a small global state set, transition and observation
//! evidence is collected per state as packet pairs, and the symbolic
//! hypothesis is synthesized from that evidence, with cross-column
//! subtraction forcing determinism.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::automata::Snka;
use crate::epp::{hyp_spp, Epp};
use crate::gs::{shortlex_cmp, splits, Gs};
use crate::space::{Packet, PacketSpace};
use crate::spp::{Store, BOT};
use crate::teacher::SnkaTeacher;

#[derive(Default)]
struct Table {
    access: BTreeSet<Gs>,
    suffixes: BTreeSet<Gs>,
}

type Tables = BTreeMap<Packet, Table>;

/// Evidence automaton: global state count plus the packet pair evidence
/// collected for every observation and transition slot.
pub struct EvidenceAutomaton {
    pub n: usize,
    pub eps: Vec<Epp>,
    pub delta: Vec<Vec<Epp>>,
}

/// What the learner did: conjectures in order (the initial empty automaton
/// included), the counterexample rejecting each non-final one, and the
/// evidence behind every conjecture after the first.
pub struct SnkaLearnLog {
    pub conjectures: Vec<Snka>,
    pub counterexamples: Vec<Gs>,
    pub evidence: Vec<EvidenceAutomaton>,
}

/// Add every cut of a counterexample to the table of its cut packet.
fn update_partial(tables: &mut Tables, c: &Gs) {
    for (s, e) in splits(c) {
        let t = tables.entry(s.last().expect("nonempty").clone()).or_default();
        t.access.insert(s.to_vec());
        t.suffixes.insert(e.to_vec());
    }
}

/// Fill every missing cell of every table with a membership query.
fn extend(
    st: &mut Store,
    teacher: &mut SnkaTeacher,
    tables: &Tables,
    cache: &mut BTreeMap<Gs, bool>,
) {
    let mut words = Vec::new();
    for t in tables.values() {
        for s in &t.access {
            for e in &t.suffixes {
                let mut w = s.clone();
                w.extend_from_slice(e);
                words.push(w);
            }
        }
    }
    for w in words {
        if !cache.contains_key(&w) {
            let v = teacher.member(st, &w);
            cache.insert(w, v);
        }
    }
}

fn cell(cache: &BTreeMap<Gs, bool>, s: &[Packet], e: &[Packet]) -> bool {
    let mut w = s.to_vec();
    w.extend_from_slice(e);
    *cache.get(&w).expect("cell filled before use")
}

fn row(cache: &BTreeMap<Gs, bool>, t: &Table, s: &Gs) -> Vec<bool> {
    t.suffixes.iter().map(|e| cell(cache, s, e)).collect()
}

/// Repair until equal rows whose one-packet extensions both appear as
/// access strings agree on those extensions' rows. A disagreement means
/// the shared row hides a real distinction, which the suffix that exposes
/// it repairs once prepended with the extension packet.
fn mk_consistent(
    st: &mut Store,
    teacher: &mut SnkaTeacher,
    tables: &mut Tables,
    cache: &mut BTreeMap<Gs, bool>,
) {
    loop {
        extend(st, teacher, tables, cache);
        let mut fix: Option<(Packet, Gs)> = None;
        'scan: for (p, t) in tables.iter() {
            let mut access: Vec<&Gs> = t.access.iter().collect();
            access.sort_by(|a, b| shortlex_cmp(a, b));
            for i in 0..access.len() {
                for j in i + 1..access.len() {
                    if row(cache, t, access[i]) != row(cache, t, access[j]) {
                        continue;
                    }
                    for (b, tb) in tables.iter() {
                        let mut x1 = access[i].clone();
                        x1.push(b.clone());
                        let mut x2 = access[j].clone();
                        x2.push(b.clone());
                        if !tb.access.contains(&x1) || !tb.access.contains(&x2) {
                            continue;
                        }
                        let mut suffixes: Vec<&Gs> = tb.suffixes.iter().collect();
                        suffixes.sort_by(|a, c| shortlex_cmp(a, c));
                        for e in suffixes {
                            if cell(cache, &x1, e) != cell(cache, &x2, e) {
                                let mut suffix = vec![b.clone()];
                                suffix.extend_from_slice(e);
                                fix = Some((p.clone(), suffix));
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
        match fix {
            Some((p, suffix)) => {
                tables
                    .get_mut(&p)
                    .expect("table exists")
                    .suffixes
                    .insert(suffix);
            }
            None => return,
        }
    }
}

/// Global slot of every distinct row. Slot 0 is reserved for the rows of
/// bare one-packet access strings (the states a run can start in); all
/// other rows of a table fill slots 1.. ordered by their least access
/// string. Keeping one slot space per packet is sound because evidence
/// pairs from different tables differ in their left packet.
fn glob_slots(tables: &Tables, cache: &BTreeMap<Gs, bool>) -> (usize, BTreeMap<(Packet, Vec<bool>), usize>) {
    let mut slots: BTreeMap<(Packet, Vec<bool>), usize> = BTreeMap::new();
    let mut n = 1;
    for (p, t) in tables {
        let bare = vec![p.clone()];
        let mut owners: BTreeMap<Vec<bool>, Gs> = BTreeMap::new();
        for s in &t.access {
            let r = row(cache, t, s);
            match owners.get(&r) {
                Some(cur) if shortlex_cmp(cur, s) != core::cmp::Ordering::Greater => {}
                _ => {
                    owners.insert(r, s.clone());
                }
            }
        }
        let mut rest: Vec<(Gs, Vec<bool>)> = Vec::new();
        for (r, owner) in owners {
            if owner == bare {
                slots.insert((p.clone(), r), 0);
            } else {
                rest.push((owner, r));
            }
        }
        rest.sort_by(|a, b| shortlex_cmp(&a.0, &b.0));
        for (i, (_, r)) in rest.into_iter().enumerate() {
            slots.insert((p.clone(), r), i + 1);
            n = n.max(i + 2);
        }
    }
    (n, slots)
}

/// Collect the evidence automaton: positive pairs along every access
/// string extension that is itself an access string, observation pairs
/// from every single-packet suffix, and a negative pair on every other
/// transition column of a positive's source row, which is what makes the
/// synthesized transitions disjoint. A positive and negative colliding on
/// one pair would mean the teacher contradicted itself.
fn evidence_automaton(
    space: &PacketSpace,
    tables: &Tables,
    cache: &BTreeMap<Gs, bool>,
) -> EvidenceAutomaton {
    let (n, slots) = glob_slots(tables, cache);
    let mut eps = vec![Epp::empty(); n];
    let mut delta = vec![vec![Epp::empty(); n]; n];
    for (p, t) in tables {
        for s in &t.access {
            let g = slots[&(p.clone(), row(cache, t, s))];
            for e in &t.suffixes {
                if e.len() == 1 {
                    eps[g].insert(space, p, &e[0], cell(cache, s, e));
                }
            }
        }
    }
    let mut positives: Vec<(usize, usize, Packet, Packet)> = Vec::new();
    for (p, t) in tables {
        for s in &t.access {
            let g1 = slots[&(p.clone(), row(cache, t, s))];
            for (b, tb) in tables {
                let mut sb = s.clone();
                sb.push(b.clone());
                if !tb.access.contains(&sb) {
                    continue;
                }
                let g2 = slots[&(b.clone(), row(cache, tb, &sb))];
                delta[g1][g2].insert(space, p, b, true);
                positives.push((g1, g2, p.clone(), b.clone()));
            }
        }
    }
    for (g1, g2, a, b) in positives {
        for g in 0..n {
            if g != g2 {
                delta[g1][g].insert(space, &a, &b, false);
            }
        }
    }
    EvidenceAutomaton { n, eps, delta }
}

/// Synthesize a symbolic automaton from the evidence: observations come
/// straight from their evidence, and each transition is the synthesis of
/// its own evidence minus the union of its row's other syntheses, so the
/// rows are disjoint by construction while every positive pair survives
/// (the negatives planted on other columns keep their syntheses off it).
fn sym_convert(st: &mut Store, ea: &EvidenceAutomaton) -> Snka {
    let n = ea.n;
    let eps: Vec<_> = ea.eps.iter().map(|e| hyp_spp(st, e)).collect();
    let raw: Vec<Vec<_>> = ea
        .delta
        .iter()
        .map(|row| row.iter().map(|e| hyp_spp(st, e)).collect())
        .collect();
    let mut delta = vec![vec![BOT; n]; n];
    for q in 0..n {
        for j in 0..n {
            let mut others = BOT;
            for (j2, &r) in raw[q].iter().enumerate() {
                if j2 != j {
                    others = st.union(others, r);
                }
            }
            delta[q][j] = st.diff(raw[q][j], others);
        }
    }
    Snka { eps, delta }
}

pub fn learn_snka(st: &mut Store, teacher: &mut SnkaTeacher) -> (Snka, SnkaLearnLog) {
    let space = st.space().clone();
    let mut tables: Tables = BTreeMap::new();
    let mut cache: BTreeMap<Gs, bool> = BTreeMap::new();
    let mut hyp = Snka::empty();
    let mut log = SnkaLearnLog {
        conjectures: vec![hyp.clone()],
        counterexamples: Vec::new(),
        evidence: Vec::new(),
    };
    while let Some(c) = teacher.equivalent(st, &hyp) {
        update_partial(&mut tables, &c);
        log.counterexamples.push(c);
        mk_consistent(st, teacher, &mut tables, &mut cache);
        let ea = evidence_automaton(&space, &tables, &cache);
        hyp = sym_convert(st, &ea);
        debug_assert!(hyp.is_deterministic(st));
        debug_assert!(log
            .counterexamples
            .iter()
            .all(|c| hyp.run(st, c) == *cache.get(c).expect("counterexamples are cells")));
        log.evidence.push(ea);
        log.conjectures.push(hyp.clone());
    }
    (hyp, log)
}
