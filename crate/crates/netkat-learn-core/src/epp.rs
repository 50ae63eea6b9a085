//! Partial pair evidence: a trie recording which packet pairs a
//! teacher has answered and how, plus the synthesis step that turns the
//! evidence into the cheapest consistent pair structure.

use crate::space::{Packet, PacketSpace, Val};
use crate::spp::{gen_row, Spp, Store, BOT, TOP};
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

/// Evidence trie. One level per field in order; a level maps the
/// input value, then the output value, to the next level. Paths always
/// run through every field, so leaves sit below the last one. The trie
/// is a partial function on pairs: unobserved pairs are simply absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Epp {
    Leaf(bool),
    Node(usize, BTreeMap<Val, BTreeMap<Val, Box<Epp>>>),
}

impl Epp {
    pub fn empty() -> Epp {
        Epp::Node(0, BTreeMap::new())
    }

    /// Record one answered pair. Re-inserting a pair with a different
    /// answer is a bug in the caller (answers come from a function).
    pub fn insert(&mut self, space: &PacketSpace, a: &[Val], b: &[Val], out: bool) {
        match self {
            Epp::Leaf(x) => assert_eq!(*x, out, "pair relabeled: evidence must stay functional"),
            Epp::Node(f, rows) => {
                let fresh = if *f + 1 == space.num_fields() {
                    Epp::Leaf(out)
                } else {
                    Epp::Node(*f + 1, BTreeMap::new())
                };
                rows.entry(a[*f])
                    .or_default()
                    .entry(b[*f])
                    .or_insert_with(|| Box::new(fresh))
                    .insert(space, a, b, out);
            }
        }
    }

    pub fn lookup(&self, a: &[Val], b: &[Val]) -> Option<bool> {
        match self {
            Epp::Leaf(x) => Some(*x),
            Epp::Node(f, rows) => rows.get(&a[*f])?.get(&b[*f])?.lookup(a, b),
        }
    }

    /// Every recorded pair with its answer, in trie order.
    pub fn defined_pairs(&self) -> Vec<(Packet, Packet, bool)> {
        let mut out = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        self.collect(&mut a, &mut b, &mut out);
        out
    }

    fn collect(&self, a: &mut Packet, b: &mut Packet, out: &mut Vec<(Packet, Packet, bool)>) {
        match self {
            Epp::Leaf(x) => out.push((a.clone(), b.clone(), *x)),
            Epp::Node(_, rows) => {
                for (&va, row) in rows {
                    for (&vb, child) in row {
                        a.push(va);
                        b.push(vb);
                        child.collect(a, b, out);
                        a.pop();
                        b.pop();
                    }
                }
            }
        }
    }
}

/// Smallest consistent generalization of the evidence. Each observed
/// input value is tried as the generic one: its row becomes the shared
/// muts and unchanged-through default, other observed inputs stay as
/// explicit branches. The candidate with the least size wins, ties to
/// the smallest input value. No evidence at a level means no pairs, so
/// the empty trie synthesizes the empty relation.
pub fn hyp_spp(st: &mut Store, e: &Epp) -> Spp {
    match e {
        Epp::Leaf(true) => TOP,
        Epp::Leaf(false) => BOT,
        Epp::Node(f, rows) => {
            let mut best: Option<(Spp, u64)> = None;
            let keys: Vec<Val> = rows.keys().copied().collect();
            for v in keys {
                let cand = select(st, *f, rows, v);
                let cost = st.mu(cand);
                if best.map_or(true, |(_, c)| cost < c) {
                    best = Some((cand, cost));
                }
            }
            best.map_or(BOT, |(s, _)| s)
        }
    }
}

fn select(
    st: &mut Store,
    field: usize,
    rows: &BTreeMap<Val, BTreeMap<Val, Box<Epp>>>,
    v: Val,
) -> Spp {
    let mut muts = BTreeMap::new();
    let mut default = BOT;
    for (&u, child) in &rows[&v] {
        let h = hyp_spp(st, child);
        if u == v {
            default = h;
        } else {
            muts.insert(u, h);
        }
    }
    let mut sem_rows: BTreeMap<Val, BTreeMap<Val, Spp>> = BTreeMap::new();
    for (&v2, row) in rows {
        if v2 == v {
            continue;
        }
        let mut r = BTreeMap::new();
        for (&u, child) in row {
            r.insert(u, hyp_spp(st, child));
        }
        sem_rows.insert(v2, r);
    }
    let domain = st.space().domain(field).to_vec();
    for &w in &domain {
        if !sem_rows.contains_key(&w) {
            sem_rows.insert(w, gen_row(&muts, default, w));
        }
    }
    st.mk_from_rows(field, sem_rows)
}

/// Evidence family that punishes greedy generalization: one packet per
/// graph vertex, one per unordered vertex pair, and answers arranged so
/// a synthesizer that commits to the wrong generic vertex pays for
/// every incident edge. Returns the two-field space (vertex-or-pair
/// code, then a direction bit) together with the evidence.
pub fn to_epp_hardness(n: usize, edges: &[(usize, usize)]) -> (PacketSpace, Epp) {
    assert!(n >= 2);
    let pair_count = n * (n - 1) / 2;
    let f1_domain: Vec<Val> = (0..(n + pair_count) as Val).collect();
    let space = PacketSpace::new(alloc::vec![
        ("f1", f1_domain),
        ("f2", alloc::vec![1, 2]),
    ])
    .unwrap();
    let enc = |a: usize, b: usize| -> Val {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        (n + (i * (2 * n - i - 1)) / 2 + (j - i - 1)) as Val
    };
    let mut edge_set = BTreeSet::new();
    for &(a, b) in edges {
        assert!(a < n && b < n && a != b, "bad edge ({}, {})", a, b);
        edge_set.insert(if a < b { (a, b) } else { (b, a) });
    }
    let dir_level = |fwd: bool| {
        let mut rows: BTreeMap<Val, BTreeMap<Val, Box<Epp>>> = BTreeMap::new();
        rows.entry(1).or_default().insert(2, Box::new(Epp::Leaf(fwd)));
        rows.entry(2).or_default().insert(1, Box::new(Epp::Leaf(!fwd)));
        Epp::Node(1, rows)
    };
    let mut rows: BTreeMap<Val, BTreeMap<Val, Box<Epp>>> = BTreeMap::new();
    for v1 in 0..n {
        for v2 in 0..n {
            if v1 == v2 {
                continue;
            }
            let key = if v1 < v2 { (v1, v2) } else { (v2, v1) };
            let fwd = !edge_set.contains(&key) || v1 < v2;
            rows.entry(v1 as Val)
                .or_default()
                .insert(enc(v1, v2), Box::new(dir_level(fwd)));
        }
    }
    (space, Epp::Node(0, rows))
}
