//! Trace automata in two flavors: packet-indexed deterministic
//! automata whose states remember the last logged packet (their
//! spell), and symbolic automata whose transitions and acceptance are
//! packet-pair structures.
//!
//! Both read a trace the same way: the first packet picks the start
//! (or seeds the first transition pair), interior packets drive
//! transitions, and the final two packets feed the observation.

use crate::gs::Gs;
use crate::space::{Packet, PacketSpace};
use crate::spp::{Spp, Store, BOT};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnkaError {
    Shape(&'static str),
    /// A transition or start edge lands on a state whose spell is not
    /// the packet that was just consumed.
    Spelling { state: usize },
}

impl core::fmt::Display for PnkaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PnkaError::Shape(what) => write!(f, "malformed automaton: {}", what),
            PnkaError::Spelling { state } => {
                write!(f, "state {} is entered under a packet other than its spell", state)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PnkaError {}

/// Deterministic trace automaton over an explicit packet space. Start,
/// transition, and observation tables are total and indexed by packet;
/// every state carries the packet under which it is entered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnka {
    space: PacketSpace,
    start: Vec<usize>,
    delta: Vec<Vec<usize>>,
    obs: Vec<Vec<bool>>,
    spell: Vec<Packet>,
}

impl Pnka {
    pub fn new(
        space: PacketSpace,
        start: Vec<usize>,
        delta: Vec<Vec<usize>>,
        obs: Vec<Vec<bool>>,
        spell: Vec<Packet>,
    ) -> Result<Pnka, PnkaError> {
        let n = spell.len();
        let pc = space.packet_count() as usize;
        if n == 0 {
            return Err(PnkaError::Shape("no states"));
        }
        if start.len() != pc {
            return Err(PnkaError::Shape("start table must cover every packet"));
        }
        if delta.len() != n || obs.len() != n {
            return Err(PnkaError::Shape("per-state tables must cover every state"));
        }
        if delta.iter().any(|r| r.len() != pc) || obs.iter().any(|r| r.len() != pc) {
            return Err(PnkaError::Shape("state rows must cover every packet"));
        }
        if start.iter().chain(delta.iter().flatten()).any(|&q| q >= n) {
            return Err(PnkaError::Shape("state index out of range"));
        }
        if spell.iter().any(|p| !space.contains(p)) {
            return Err(PnkaError::Shape("spell outside the packet space"));
        }
        for i in 0..pc {
            let p = space.packet_at(i);
            if spell[start[i]] != p {
                return Err(PnkaError::Spelling { state: start[i] });
            }
            for row in &delta {
                if spell[row[i]] != p {
                    return Err(PnkaError::Spelling { state: row[i] });
                }
            }
        }
        Ok(Pnka {
            space,
            start,
            delta,
            obs,
            spell,
        })
    }

    pub fn space(&self) -> &PacketSpace {
        &self.space
    }

    pub fn num_states(&self) -> usize {
        self.spell.len()
    }

    pub fn start_state(&self, p: &Packet) -> usize {
        self.start[self.space.packet_index(p) as usize]
    }

    pub fn next(&self, q: usize, p: &Packet) -> usize {
        self.delta[q][self.space.packet_index(p) as usize]
    }

    pub fn observes(&self, q: usize, p: &Packet) -> bool {
        self.obs[q][self.space.packet_index(p) as usize]
    }

    pub fn spell_of(&self, q: usize) -> &Packet {
        &self.spell[q]
    }

    /// Accept a trace: the first packet picks the start state, interior
    /// packets drive transitions, the last packet is observed.
    pub fn run(&self, w: &[Packet]) -> bool {
        debug_assert!(w.len() >= 2);
        let mut q = self.start_state(&w[0]);
        for p in &w[1..w.len() - 1] {
            q = self.next(q, p);
        }
        self.observes(q, &w[w.len() - 1])
    }

    /// Reachable quotient under observation equivalence. Spells are
    /// part of the initial split: two states entered under different
    /// packets never merge, even when both are dead.
    pub fn minimize(&self) -> Pnka {
        let n = self.num_states();
        let mut reach = alloc::vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for &q in &self.start {
            if !reach[q] {
                reach[q] = true;
                stack.push(q);
            }
        }
        while let Some(q) = stack.pop() {
            for &r in &self.delta[q] {
                if !reach[r] {
                    reach[r] = true;
                    stack.push(r);
                }
            }
        }
        let states: Vec<usize> = (0..n).filter(|&q| reach[q]).collect();

        let mut class = alloc::vec![usize::MAX; n];
        let mut keys: BTreeMap<(Packet, Vec<bool>), usize> = BTreeMap::new();
        for &q in &states {
            let k = (self.spell[q].clone(), self.obs[q].clone());
            let next_id = keys.len();
            class[q] = *keys.entry(k).or_insert(next_id);
        }
        let mut count = keys.len();
        loop {
            let mut sigs: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
            let mut next = alloc::vec![usize::MAX; n];
            for &q in &states {
                let sig = (
                    class[q],
                    self.delta[q].iter().map(|&r| class[r]).collect::<Vec<_>>(),
                );
                let next_id = sigs.len();
                next[q] = *sigs.entry(sig).or_insert(next_id);
            }
            if sigs.len() == count {
                break;
            }
            count = sigs.len();
            class = next;
        }

        // canonical numbering: classes in order of first appearance
        let mut renum = alloc::vec![usize::MAX; count];
        let mut reps: Vec<usize> = Vec::new();
        for &q in &states {
            if renum[class[q]] == usize::MAX {
                renum[class[q]] = reps.len();
                reps.push(q);
            }
        }
        let cls = |q: usize| renum[class[q]];
        let start = self.start.iter().map(|&q| cls(q)).collect();
        let delta = reps
            .iter()
            .map(|&q| self.delta[q].iter().map(|&r| cls(r)).collect())
            .collect();
        let obs = reps.iter().map(|&q| self.obs[q].clone()).collect();
        let spell = reps.iter().map(|&q| self.spell[q].clone()).collect();
        Pnka::new(self.space.clone(), start, delta, obs, spell)
            .expect("quotient preserves well-formedness")
    }

    pub fn dump(&self) -> String {
        let pc = self.space.packet_count() as usize;
        let mut out = format!("pnka: {} states\n  start:", self.num_states());
        for i in 0..pc {
            let p = self.space.packet_at(i);
            out.push_str(&format!(" {}->q{}", self.space.format_packet(&p), self.start[i]));
        }
        out.push('\n');
        for q in 0..self.num_states() {
            out.push_str(&format!(
                "  q{} spell {}",
                q,
                self.space.format_packet(&self.spell[q])
            ));
            out.push_str(" obs {");
            let mut first = true;
            for i in 0..pc {
                if self.obs[q][i] {
                    if !first {
                        out.push_str(", ");
                    }
                    first = false;
                    out.push_str(&self.space.format_packet(&self.space.packet_at(i)));
                }
            }
            out.push_str("} delta:");
            for i in 0..pc {
                let p = self.space.packet_at(i);
                out.push_str(&format!(
                    " {}->q{}",
                    self.space.format_packet(&p),
                    self.delta[q][i]
                ));
            }
            out.push('\n');
        }
        out
    }
}

/// Structure-preserving bijection test for two reachable automata over
/// the same space: walk both from the starts in lockstep and demand the
/// pairing stays one-to-one with matching spells and observations.
pub fn iso_pnka(a: &Pnka, b: &Pnka) -> bool {
    if a.space != b.space || a.num_states() != b.num_states() {
        return false;
    }
    let pc = a.space.packet_count() as usize;
    let mut ab = alloc::vec![usize::MAX; a.num_states()];
    let mut ba = alloc::vec![usize::MAX; b.num_states()];
    let mut stack: Vec<(usize, usize)> = (0..pc).map(|i| (a.start[i], b.start[i])).collect();
    while let Some((x, y)) = stack.pop() {
        if ab[x] != usize::MAX || ba[y] != usize::MAX {
            if ab[x] != y || ba[y] != x {
                return false;
            }
            continue;
        }
        ab[x] = y;
        ba[y] = x;
        if a.spell[x] != b.spell[y] || a.obs[x] != b.obs[y] {
            return false;
        }
        for i in 0..pc {
            stack.push((a.delta[x][i], b.delta[y][i]));
        }
    }
    ab.iter().all(|&v| v != usize::MAX)
}

/// Symbolic trace automaton: state 0 is the start; `delta[s][t]` and
/// `eps[s]` are pair structures in some shared [`Store`]. Runs assume
/// the transition rows are pairwise disjoint (see
/// [`Snka::is_deterministic`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snka {
    pub eps: Vec<Spp>,
    pub delta: Vec<Vec<Spp>>,
}

impl Snka {
    /// The automaton of the empty language.
    pub fn empty() -> Snka {
        Snka {
            eps: alloc::vec![BOT],
            delta: alloc::vec![alloc::vec![BOT]],
        }
    }

    pub fn n(&self) -> usize {
        self.eps.len()
    }

    /// Accept a trace: consecutive packet pairs drive transitions, the
    /// final pair must satisfy the state's acceptance structure. A pair
    /// matching no transition rejects.
    pub fn run(&self, st: &Store, w: &[Packet]) -> bool {
        debug_assert!(w.len() >= 2);
        let mut s = 0usize;
        for i in 0..w.len() - 2 {
            let mut next = None;
            for t in 0..self.n() {
                if st.eval(self.delta[s][t], &w[i], &w[i + 1]) {
                    next = Some(t);
                    break;
                }
            }
            match next {
                Some(t) => s = t,
                None => return false,
            }
        }
        st.eval(self.eps[s], &w[w.len() - 2], &w[w.len() - 1])
    }

    /// Which states take part in some accepting run. A state is live
    /// when a run prefix can reach it with a carry packet from which an
    /// accepted suffix exists; everything else is a drop state that only
    /// ever rejects. Learned automata routinely grow drop states out of
    /// negative counterexamples, so language-size claims count live
    /// states.
    pub fn live_states(&self, st: &mut Store) -> Vec<bool> {
        let n = self.n();
        let mut reach = alloc::vec![crate::spp::SP_EMPTY; n];
        reach[0] = crate::spp::SP_FULL;
        loop {
            let mut changed = false;
            for s in 0..n {
                for t in 0..n {
                    let img = st.image(self.delta[s][t], reach[s]);
                    let grown = st.sp_union(reach[t], img);
                    if grown != reach[t] {
                        reach[t] = grown;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut acc: Vec<_> = self
            .eps
            .iter()
            .map(|&e| st.preimage(e, crate::spp::SP_FULL))
            .collect();
        loop {
            let mut changed = false;
            for s in 0..n {
                for t in 0..n {
                    let pre = st.preimage(self.delta[s][t], acc[t]);
                    let grown = st.sp_union(acc[s], pre);
                    if grown != acc[s] {
                        acc[s] = grown;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (0..n)
            .map(|s| st.sp_inter(reach[s], acc[s]) != crate::spp::SP_EMPTY)
            .collect()
    }

    /// Transition rows must be pairwise disjoint for runs to be
    /// well-defined.
    pub fn is_deterministic(&self, st: &mut Store) -> bool {
        for s in 0..self.n() {
            for t1 in 0..self.n() {
                for t2 in t1 + 1..self.n() {
                    if st.inter(self.delta[s][t1], self.delta[s][t2]) != BOT {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn dump(&self, st: &Store) -> String {
        let mut out = format!("snka: {} states, start s0\n", self.n());
        let mut used: Vec<Spp> = Vec::new();
        let name = |s: Spp, used: &mut Vec<Spp>| -> String {
            match s {
                BOT => String::from("F"),
                crate::spp::TOP => String::from("T"),
                _ => {
                    if !used.contains(&s) {
                        used.push(s);
                    }
                    format!("#{}", s)
                }
            }
        };
        for s in 0..self.n() {
            out.push_str(&format!("  s{}: eps {}", s, name(self.eps[s], &mut used)));
            for t in 0..self.n() {
                if self.delta[s][t] != BOT {
                    out.push_str(&format!(
                        ", d(s{} -> s{}) {}",
                        s,
                        t,
                        name(self.delta[s][t], &mut used)
                    ));
                }
            }
            out.push('\n');
        }
        for s in used {
            out.push_str(&st.dump(s));
        }
        out
    }
}

/// Language of a symbolic automaton up to a dup budget, by running
/// every trace. Exhaustive; test sized.
pub fn snka_lang(st: &Store, m: &Snka, space: &PacketSpace, max_dups: usize) -> Vec<Gs> {
    crate::member::all_strings(space, max_dups)
        .into_iter()
        .filter(|w| m.run(st, w))
        .collect()
}

/// Four-state automaton over one two-valued field, small enough to check
/// every behavior by hand. Both dead states are kept apart by their spells.
/// Shared by the learner and teacher tests.
#[cfg(test)]
pub(crate) fn example_pnka() -> Pnka {
    let sp = PacketSpace::new(alloc::vec![("f", alloc::vec![1, 2])]).unwrap();
    Pnka::new(
        sp,
        alloc::vec![0, 1],
        alloc::vec![
            alloc::vec![3, 2],
            alloc::vec![3, 1],
            alloc::vec![0, 1],
            alloc::vec![3, 1]
        ],
        alloc::vec![
            alloc::vec![true, false],
            alloc::vec![false, false],
            alloc::vec![false, true],
            alloc::vec![false, false],
        ],
        alloc::vec![alloc::vec![1], alloc::vec![2], alloc::vec![2], alloc::vec![1]],
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::member::all_strings;
    use alloc::vec;

    fn two_packets() -> PacketSpace {
        PacketSpace::new(vec![("f", vec![1, 2])]).unwrap()
    }

    #[test]
    fn runs_follow_the_tables() {
        let m = example_pnka();
        let pi = vec![1u16];
        let pb = vec![2u16];
        assert!(!m.run(&[pi.clone(), pb.clone()]));
        assert!(m.run(&[pi.clone(), pb.clone(), pb.clone()]));
        assert!(m.run(&[pi.clone(), pi.clone()]));
        assert!(m.run(&[pi.clone(), pb.clone(), pi.clone(), pi.clone()]));
    }

    #[test]
    fn construction_checks_spells() {
        let sp = two_packets();
        // q0 entered under both packets: spell cannot be right for both
        let bad = Pnka::new(
            sp,
            vec![0, 0],
            vec![vec![0, 0]],
            vec![vec![false, false]],
            vec![vec![1]],
        );
        assert_eq!(bad.unwrap_err(), PnkaError::Spelling { state: 0 });
    }

    #[test]
    fn minimization_is_tight_and_stable() {
        let m = example_pnka();
        let min = m.minimize();
        // the two dead states carry different spells, so nothing merges
        assert_eq!(min.num_states(), 4);
        assert!(iso_pnka(&m, &min));

        // pad with a redundant copy of q3 and an unreachable state
        let sp = two_packets();
        let padded = Pnka::new(
            sp,
            vec![0, 1],
            vec![
                vec![4, 2],
                vec![3, 1],
                vec![0, 1],
                vec![3, 1],
                vec![3, 1],
                vec![4, 2],
            ],
            vec![
                vec![true, false],
                vec![false, false],
                vec![false, true],
                vec![false, false],
                vec![false, false],
                vec![true, true],
            ],
            vec![vec![1], vec![2], vec![2], vec![1], vec![1], vec![1]],
        )
        .unwrap();
        let pmin = padded.minimize();
        assert_eq!(pmin.num_states(), 4);
        assert!(iso_pnka(&pmin, &min));
        for w in all_strings(padded.space(), 3) {
            assert_eq!(padded.run(&w), pmin.run(&w));
        }
    }

    #[test]
    fn iso_rejects_semantic_differences() {
        let m = example_pnka();
        let sp = two_packets();
        // same shape, one observation flipped
        let other = Pnka::new(
            sp,
            vec![0, 1],
            vec![vec![3, 2], vec![3, 1], vec![0, 1], vec![3, 1]],
            vec![
                vec![true, true],
                vec![false, false],
                vec![false, true],
                vec![false, false],
            ],
            vec![vec![1], vec![2], vec![2], vec![1]],
        )
        .unwrap();
        assert!(!iso_pnka(&m, &other));

        // cutting the example down by a state can never be isomorphic
        let truncated = Pnka::new(
            two_packets(),
            vec![0, 1],
            vec![vec![2, 1], vec![2, 1], vec![2, 1]],
            vec![
                vec![true, false],
                vec![false, false],
                vec![false, false],
            ],
            vec![vec![1], vec![2], vec![1]],
        )
        .unwrap();
        assert!(!iso_pnka(&m, &truncated));

        // relabeled states are still isomorphic: swap q2 and q3
        let swapped = Pnka::new(
            two_packets(),
            vec![0, 1],
            vec![vec![2, 3], vec![2, 1], vec![2, 1], vec![0, 1]],
            vec![
                vec![true, false],
                vec![false, false],
                vec![false, false],
                vec![false, true],
            ],
            vec![vec![1], vec![2], vec![1], vec![2]],
        )
        .unwrap();
        assert!(iso_pnka(&m, &swapped));
    }

    #[test]
    fn symbolic_runs_and_determinism() {
        let sp = two_packets();
        let mut st = Store::new(sp.clone());
        assert!(Snka::empty().is_deterministic(&mut st));
        for w in all_strings(&sp, 2) {
            assert!(!Snka::empty().run(&st, &w));
        }

        let to2 = st.compile(&Expr::Assign(0, 2)).unwrap();
        let at2 = st.compile(&Expr::TestEq(0, 2)).unwrap();
        let m = Snka {
            eps: vec![BOT, at2],
            delta: vec![vec![BOT, to2], vec![BOT, BOT]],
        };
        assert!(m.is_deterministic(&mut st));
        for w in all_strings(&sp, 2) {
            let expect = w.len() == 3 && w[1] == vec![2] && w[2] == vec![2];
            assert_eq!(m.run(&st, &w), expect, "{:?}", w);
        }
        assert_eq!(snka_lang(&st, &m, &sp, 2).len(), 2);

        let overlapping = Snka {
            eps: vec![BOT, at2],
            delta: vec![vec![to2, to2], vec![BOT, BOT]],
        };
        assert!(!overlapping.is_deterministic(&mut st));
    }
}
