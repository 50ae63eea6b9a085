//! Learner for packet automata.
//!
//! One observation table per packet: the table for packet p holds access
//! strings ending in p and suffix strings, and a cell is the membership
//! verdict of access plus suffix. Suffix sets start as the single packets,
//! so every table can always observe immediately; access sets start as the
//! bare one-packet string. The table family is grown until every one-packet
//! extension of an access string matches some access row (closed) and equal
//! rows stay equal under every extension (consistent); the rows then form
//! the states of a conjectured automaton. A rejected conjecture comes back
//! as a guarded string counterexample, and all its prefixes become access
//! strings, which provably splits at least one state.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::automata::Pnka;
use crate::gs::{shortlex_cmp, Gs};
use crate::space::{Packet, PacketSpace};
use crate::spp::Store;
use crate::teacher::PnkaTeacher;

/// Per-packet observation table. Cells live in the shared query cache,
/// keyed by the whole word, so tables never ask the same string twice.
struct Table {
    access: BTreeSet<Gs>,
    suffixes: BTreeSet<Gs>,
}

/// What the learner did: every conjecture in order, the counterexample that
/// rejected each non-final one, and for every conjecture the filled table
/// cells (whole word with verdict) it was built from. The cells let a
/// harness replay the agreement between conjecture and table.
pub struct PnkaLearnLog {
    pub conjectures: Vec<Pnka>,
    pub counterexamples: Vec<Gs>,
    pub cells: Vec<Vec<(Gs, bool)>>,
}

struct State<'a> {
    space: PacketSpace,
    packets: Vec<Packet>,
    tables: BTreeMap<Packet, Table>,
    cache: BTreeMap<Gs, bool>,
    teacher: &'a mut PnkaTeacher,
}

impl<'a> State<'a> {
    fn new(space: PacketSpace, teacher: &'a mut PnkaTeacher) -> State<'a> {
        let packets: Vec<Packet> = space.packets().collect();
        let tables = packets
            .iter()
            .map(|p| {
                let mut access = BTreeSet::new();
                access.insert(alloc::vec![p.clone()]);
                let suffixes = packets.iter().map(|b| alloc::vec![b.clone()]).collect();
                (p.clone(), Table { access, suffixes })
            })
            .collect();
        State {
            space,
            packets,
            tables,
            cache: BTreeMap::new(),
            teacher,
        }
    }

    fn all_access(&self) -> Vec<Gs> {
        self.tables
            .values()
            .flat_map(|t| t.access.iter().cloned())
            .collect()
    }

    /// Extension rows of one table: every access string anywhere, extended
    /// by this table's packet.
    fn extensions(&self, p: &Packet) -> Vec<Gs> {
        let mut out: Vec<Gs> = self
            .all_access()
            .into_iter()
            .map(|mut s| {
                s.push(p.clone());
                s
            })
            .collect();
        out.sort_by(|a, b| shortlex_cmp(a, b));
        out.dedup();
        out
    }

    fn fill(&mut self, st: &mut Store) {
        let mut words = Vec::new();
        for (p, t) in &self.tables {
            let mut rows: Vec<Gs> = t.access.iter().cloned().collect();
            rows.extend(self.extensions(p));
            for s in rows {
                for e in &t.suffixes {
                    let mut w = s.clone();
                    w.extend_from_slice(e);
                    words.push(w);
                }
            }
        }
        for w in words {
            if !self.cache.contains_key(&w) {
                let v = self.teacher.member(st, &w);
                self.cache.insert(w, v);
            }
        }
    }

    fn cell(&self, s: &Gs, e: &Gs) -> bool {
        let mut w = s.clone();
        w.extend_from_slice(e);
        *self.cache.get(&w).expect("cell filled before use")
    }

    /// Verdict vector of one row over the table's suffix set.
    fn row(&self, table: &Packet, s: &Gs) -> Vec<bool> {
        self.tables[table]
            .suffixes
            .iter()
            .map(|e| self.cell(s, e))
            .collect()
    }

    fn sorted_access(&self, table: &Packet) -> Vec<Gs> {
        let mut out: Vec<Gs> = self.tables[table].access.iter().cloned().collect();
        out.sort_by(|a, b| shortlex_cmp(a, b));
        out
    }

    /// First extension row matching no access row, if any.
    fn closed_violation(&self) -> Option<(Packet, Gs)> {
        for p in &self.packets {
            let t = &self.tables[p];
            let have: BTreeSet<Vec<bool>> =
                t.access.iter().map(|s| self.row(p, s)).collect();
            for x in self.extensions(p) {
                if !t.access.contains(&x) && !have.contains(&self.row(p, &x)) {
                    return Some((p.clone(), x));
                }
            }
        }
        None
    }

    /// First pair of equal rows whose one-packet extensions disagree, with
    /// the suffix that repairs the split.
    fn consistency_violation(&self) -> Option<(Packet, Gs)> {
        for p in &self.packets {
            let access = self.sorted_access(p);
            for i in 0..access.len() {
                for j in i + 1..access.len() {
                    if self.row(p, &access[i]) != self.row(p, &access[j]) {
                        continue;
                    }
                    for b in &self.packets {
                        let mut x1 = access[i].clone();
                        x1.push(b.clone());
                        let mut x2 = access[j].clone();
                        x2.push(b.clone());
                        let mut suffixes: Vec<Gs> =
                            self.tables[b].suffixes.iter().cloned().collect();
                        suffixes.sort_by(|a, c| shortlex_cmp(a, c));
                        for e in suffixes {
                            if self.cell(&x1, &e) != self.cell(&x2, &e) {
                                let mut suffix = alloc::vec![b.clone()];
                                suffix.extend_from_slice(&e);
                                return Some((p.clone(), suffix));
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn stabilize(&mut self, st: &mut Store) {
        loop {
            self.fill(st);
            if let Some((p, x)) = self.closed_violation() {
                self.tables.get_mut(&p).expect("table exists").access.insert(x);
                continue;
            }
            if let Some((p, e)) = self.consistency_violation() {
                self.tables.get_mut(&p).expect("table exists").suffixes.insert(e);
                continue;
            }
            return;
        }
    }

    /// Build the automaton whose states are the distinct rows. Stable state
    /// numbering: tables in packet order, rows by least owning access
    /// string, so reruns produce identical automata.
    fn hypothesis(&self) -> Pnka {
        let mut ids: BTreeMap<(Packet, Vec<bool>), usize> = BTreeMap::new();
        let mut reprs: Vec<(Packet, Gs)> = Vec::new();
        for p in &self.packets {
            for s in self.sorted_access(p) {
                let key = (p.clone(), self.row(p, &s));
                if !ids.contains_key(&key) {
                    ids.insert(key, reprs.len());
                    reprs.push((p.clone(), s));
                }
            }
        }
        let n = reprs.len();
        let start: Vec<usize> = self
            .packets
            .iter()
            .map(|p| {
                let bare = alloc::vec![p.clone()];
                ids[&(p.clone(), self.row(p, &bare))]
            })
            .collect();
        let mut delta = Vec::with_capacity(n);
        let mut obs = Vec::with_capacity(n);
        let mut spell = Vec::with_capacity(n);
        for (p, s) in &reprs {
            let mut drow = Vec::with_capacity(self.packets.len());
            let mut orow = Vec::with_capacity(self.packets.len());
            for b in &self.packets {
                let mut x = s.clone();
                x.push(b.clone());
                drow.push(*ids.get(&(b.clone(), self.row(b, &x))).expect("table closed"));
                orow.push(self.cell(s, &alloc::vec![b.clone()]));
            }
            delta.push(drow);
            obs.push(orow);
            spell.push(p.clone());
        }
        Pnka::new(self.space.clone(), start, delta, obs, spell)
            .expect("closed consistent tables give a well formed automaton")
    }

    /// All filled cells the current tables can see, deduplicated by word.
    fn snapshot(&self) -> Vec<(Gs, bool)> {
        let mut seen: BTreeMap<Gs, bool> = BTreeMap::new();
        for (p, t) in &self.tables {
            let mut rows: Vec<Gs> = t.access.iter().cloned().collect();
            rows.extend(self.extensions(p));
            for s in rows {
                for e in &t.suffixes {
                    let mut w = s.clone();
                    w.extend_from_slice(e);
                    let v = *self.cache.get(&w).expect("cell filled");
                    seen.insert(w, v);
                }
            }
        }
        seen.into_iter().collect()
    }
}

pub fn learn_pnka(st: &mut Store, teacher: &mut PnkaTeacher) -> (Pnka, PnkaLearnLog) {
    let space = st.space().clone();
    let mut state = State::new(space, teacher);
    let mut log = PnkaLearnLog {
        conjectures: Vec::new(),
        counterexamples: Vec::new(),
        cells: Vec::new(),
    };
    loop {
        state.stabilize(st);
        let hyp = state.hypothesis();
        let cells = state.snapshot();
        debug_assert!(cells.iter().all(|(w, v)| hyp.run(w) == *v));
        log.cells.push(cells);
        log.conjectures.push(hyp.clone());
        match state.teacher.equivalent(st, &hyp) {
            None => return (hyp, log),
            Some(c) => {
                for i in 1..=c.len() {
                    let s = c[..i].to_vec();
                    let last = s.last().expect("nonempty prefix").clone();
                    state
                        .tables
                        .get_mut(&last)
                        .expect("every packet has a table")
                        .access
                        .insert(s);
                }
                log.counterexamples.push(c);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{example_pnka, iso_pnka, Snka};
    use crate::expr::Expr;
    use crate::member::{all_strings, gs_member};
    use crate::space::PacketSpace;
    use crate::teacher::build_staged_target;
    use alloc::vec;

    #[test]
    fn learns_the_four_state_example() {
        let target = example_pnka();
        let sp = target.space().clone();
        let mut st = Store::new(sp.clone());
        let mut teacher = PnkaTeacher::from_pnka(&mut st, &target);
        let (h, log) = learn_pnka(&mut st, &mut teacher);
        assert!(iso_pnka(&h, &target.minimize()));
        assert_eq!(h.num_states(), 4);
        // every conjecture matched the table it came from
        for (m, cells) in log.conjectures.iter().zip(&log.cells) {
            for (w, v) in cells {
                assert_eq!(m.run(w), *v, "{w:?}");
            }
        }
        // each counterexample bought at least one state
        for pair in log.conjectures.windows(2) {
            assert!(pair[1].num_states() > pair[0].num_states());
        }
        for w in all_strings(&sp, 3) {
            assert_eq!(h.run(&w), target.run(&w), "{w:?}");
        }
    }

    #[test]
    fn learns_an_accept_everything_machine_in_one_round() {
        let sp = PacketSpace::new(vec![("f", vec![1, 2])]).unwrap();
        let full = Pnka::new(
            sp.clone(),
            vec![0, 1],
            vec![vec![0, 1], vec![0, 1]],
            vec![vec![true, true], vec![true, true]],
            vec![vec![1], vec![2]],
        )
        .unwrap();
        let mut st = Store::new(sp);
        let mut teacher = PnkaTeacher::from_pnka(&mut st, &full);
        let (h, log) = learn_pnka(&mut st, &mut teacher);
        assert!(iso_pnka(&h, &full.minimize()));
        assert_eq!(log.counterexamples, Vec::<Gs>::new());
        assert_eq!(teacher.equiv_queries, 1);
    }

    #[test]
    fn learns_a_staged_language_through_the_symbolic_teacher() {
        let sp = PacketSpace::new(vec![("f", vec![1, 2])]).unwrap();
        let mut st = Store::new(sp.clone());
        let target: Snka = build_staged_target(
            &mut st,
            &Expr::TestEq(0, 1),
            &Expr::Assign(0, 2),
            &Expr::TestEq(0, 2),
        )
        .unwrap();
        let mut teacher = PnkaTeacher::new(target.clone());
        let (h, _log) = learn_pnka(&mut st, &mut teacher);
        let e = Expr::seq_all(vec![
            Expr::TestEq(0, 1),
            Expr::star(Expr::seq(Expr::Assign(0, 2), Expr::Dup)),
            Expr::TestEq(0, 2),
        ]);
        for w in all_strings(&sp, 3) {
            assert_eq!(h.run(&w), gs_member(&sp, &e, &w), "{w:?}");
        }
    }
}
