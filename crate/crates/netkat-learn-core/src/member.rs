//! Exact denotational membership: does a guarded string belong to the
//! trace language of an expression?
//!
//! Sequencing hides the shared boundary packet (the intermediate packet
//! of `p;q` is existentially quantified, never logged), so a naive split
//! search would have to guess it from the whole packet space. Instead,
//! for each sub-expression and each segment of the string's interior
//! snapshots we compute the full input/output relation over packets;
//! relation composition absorbs the hidden packet. Star takes a closure
//! per segment. Everything is memoized on (sub-expression, segment), so
//! the oracle is polynomial in the string length.

use crate::expr::Expr;
use crate::gs::Gs;
use crate::space::{Packet, PacketSpace};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

type Rel = BTreeSet<(u32, u32)>;

/// `w ∈ ⟦e⟧`, exactly.
pub fn gs_member(space: &PacketSpace, e: &Expr, w: &[Packet]) -> bool {
    debug_assert!(w.len() >= 2 && w.iter().all(|p| space.contains(p)));
    let mut nodes = Vec::new();
    let root = index_nodes(e, &mut nodes);
    let mut cx = Cx {
        space,
        nodes,
        interior: &w[1..w.len() - 1],
        memo: BTreeMap::new(),
        closures: BTreeMap::new(),
    };
    let full = cx.rel(root, 0, cx.interior.len());
    let key = (
        space.packet_index(&w[0]) as u32,
        space.packet_index(&w[w.len() - 1]) as u32,
    );
    full.contains(&key)
}

/// Post-order numbering so memo keys are stable across calls.
fn index_nodes<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) -> usize {
    match e {
        Expr::Union(a, b) | Expr::Seq(a, b) => {
            index_nodes(a, out);
            index_nodes(b, out);
        }
        Expr::Star(a) => {
            index_nodes(a, out);
        }
        _ => {}
    }
    out.push(e);
    out.len() - 1
}

struct Cx<'a> {
    space: &'a PacketSpace,
    nodes: Vec<&'a Expr>,
    interior: &'a [Packet],
    memo: BTreeMap<(usize, usize, usize), Rel>,
    closures: BTreeMap<usize, Rel>,
}

impl Cx<'_> {
    /// Relation of node `n` over the interior segment `l..r`: the pairs
    /// (input, output) such that input · interior[l..r] (as dup
    /// snapshots) · output is a trace of the sub-expression.
    fn rel(&mut self, n: usize, l: usize, r: usize) -> Rel {
        if let Some(cached) = self.memo.get(&(n, l, r)) {
            return cached.clone();
        }
        let result = match self.nodes[n] {
            Expr::Zero => Rel::new(),
            Expr::One => {
                if l == r {
                    self.diag()
                } else {
                    Rel::new()
                }
            }
            Expr::TestEq(f, v) => self.filter_diag(l, r, |p| p[*f] == *v),
            Expr::TestNe(f, v) => self.filter_diag(l, r, |p| p[*f] != *v),
            Expr::Assign(f, v) => {
                let mut out = Rel::new();
                if l == r {
                    for (i, mut p) in self.space.packets().enumerate() {
                        p[*f] = *v;
                        out.insert((i as u32, self.space.packet_index(&p) as u32));
                    }
                }
                out
            }
            Expr::Dup => {
                let mut out = Rel::new();
                if r == l + 1 {
                    let i = self.space.packet_index(&self.interior[l]) as u32;
                    out.insert((i, i));
                }
                out
            }
            Expr::Union(..) => {
                let b = n - 1;
                let a = child_a(&self.nodes, n);
                let mut out = self.rel(a, l, r);
                out.extend(self.rel(b, l, r));
                out
            }
            Expr::Seq(..) => {
                let b = n - 1;
                let a = child_a(&self.nodes, n);
                let mut out = Rel::new();
                for k in l..=r {
                    let ra = self.rel(a, l, k);
                    if ra.is_empty() {
                        continue;
                    }
                    let rb = self.rel(b, k, r);
                    out.extend(compose(&ra, &rb));
                }
                out
            }
            Expr::Star(..) => {
                let a = n - 1;
                // X(l,r) = base ∪ ⋃_k rel(a,l,k)∘X(k,r); the k=l term is
                // self-referential, so solve X = C ∪ A∘X as X = A*∘C.
                let base = if l == r { self.diag() } else { Rel::new() };
                let mut c = base;
                for k in (l + 1)..=r {
                    let ra = self.rel(a, l, k);
                    if ra.is_empty() {
                        continue;
                    }
                    let xs = self.rel(n, k, r);
                    c.extend(compose(&ra, &xs));
                }
                let astar = self.closure_of(a);
                compose(&astar, &c)
            }
        };
        self.memo.insert((n, l, r), result.clone());
        result
    }

    /// Reflexive-transitive closure of the node's empty-segment relation.
    fn closure_of(&mut self, n: usize) -> Rel {
        if let Some(c) = self.closures.get(&n) {
            return c.clone();
        }
        let a = self.rel(n, 0, 0);
        let mut res = self.diag();
        loop {
            let step = compose(&res, &a);
            let before = res.len();
            res.extend(step);
            if res.len() == before {
                break;
            }
        }
        self.closures.insert(n, res.clone());
        res
    }

    fn diag(&self) -> Rel {
        (0..self.space.packet_count() as u32)
            .map(|i| (i, i))
            .collect()
    }

    fn filter_diag(&self, l: usize, r: usize, keep: impl Fn(&Packet) -> bool) -> Rel {
        let mut out = Rel::new();
        if l == r {
            for (i, p) in self.space.packets().enumerate() {
                if keep(&p) {
                    out.insert((i as u32, i as u32));
                }
            }
        }
        out
    }
}

/// Index of the left child of a binary node, given post-order layout:
/// the right child sits at n-1, preceded by its whole subtree; the left
/// child sits just before that subtree.
fn child_a(nodes: &[&Expr], n: usize) -> usize {
    let b = n - 1;
    b - node_count(nodes[b])
}

fn node_count(e: &Expr) -> usize {
    match e {
        Expr::Union(a, b) | Expr::Seq(a, b) => node_count(a) + node_count(b) + 1,
        Expr::Star(a) => node_count(a) + 1,
        _ => 1,
    }
}

fn compose(r1: &Rel, r2: &Rel) -> Rel {
    let mut by_first: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(b, c) in r2 {
        by_first.entry(b).or_default().push(c);
    }
    let mut out = Rel::new();
    for &(a, b) in r1 {
        if let Some(cs) = by_first.get(&b) {
            for &c in cs {
                out.insert((a, c));
            }
        }
    }
    out
}

/// Brute-force bounded language: every trace of `e` with at most
/// `max_dups` dups, built by unioning the trace sets of each construct
/// with star unrolled until the bounded set stops growing. Independent
/// of [`gs_member`]'s relation machinery; intended as a test oracle on
/// small spaces.
pub fn bounded_lang(space: &PacketSpace, e: &Expr, max_dups: usize) -> BTreeSet<Gs> {
    let max_len = max_dups + 2;
    match e {
        Expr::Zero => BTreeSet::new(),
        Expr::One => space.packets().map(|p| alloc::vec![p.clone(), p]).collect(),
        Expr::TestEq(f, v) => space
            .packets()
            .filter(|p| p[*f] == *v)
            .map(|p| alloc::vec![p.clone(), p])
            .collect(),
        Expr::TestNe(f, v) => space
            .packets()
            .filter(|p| p[*f] != *v)
            .map(|p| alloc::vec![p.clone(), p])
            .collect(),
        Expr::Assign(f, v) => space
            .packets()
            .map(|p| {
                let mut q = p.clone();
                q[*f] = *v;
                alloc::vec![p, q]
            })
            .collect(),
        Expr::Dup => {
            if max_len >= 3 {
                space
                    .packets()
                    .map(|p| alloc::vec![p.clone(), p.clone(), p])
                    .collect()
            } else {
                BTreeSet::new()
            }
        }
        Expr::Union(a, b) => {
            let mut out = bounded_lang(space, a, max_dups);
            out.extend(bounded_lang(space, b, max_dups));
            out
        }
        Expr::Seq(a, b) => {
            let la = bounded_lang(space, a, max_dups);
            let lb = bounded_lang(space, b, max_dups);
            let mut out = BTreeSet::new();
            for u in &la {
                for v in &lb {
                    if let Some(w) = diamond(u, v, max_len) {
                        out.insert(w);
                    }
                }
            }
            out
        }
        Expr::Star(a) => {
            let la = bounded_lang(space, a, max_dups);
            let mut out: BTreeSet<Gs> =
                space.packets().map(|p| alloc::vec![p.clone(), p]).collect();
            loop {
                let mut grew = false;
                let snapshot: Vec<Gs> = out.iter().cloned().collect();
                for u in &la {
                    for v in &snapshot {
                        if let Some(w) = diamond(u, v, max_len) {
                            grew |= out.insert(w);
                        }
                    }
                }
                if !grew {
                    return out;
                }
            }
        }
    }
}

/// Every guarded string over the space with at most `max_dups` dups, in
/// a deterministic order. Exhaustive test driver; the count grows as
/// |Pk|^(dups+2), so keep the space tiny.
pub fn all_strings(space: &PacketSpace, max_dups: usize) -> Vec<Gs> {
    let packets: Vec<_> = space.packets().collect();
    let mut out = Vec::new();
    let mut frontier: Vec<Gs> = packets.iter().map(|p| alloc::vec![p.clone()]).collect();
    for _ in 0..=max_dups {
        let mut next = Vec::new();
        for w in &frontier {
            for p in &packets {
                let mut x = w.clone();
                x.push(p.clone());
                out.push(x.clone());
                next.push(x);
            }
        }
        frontier = next;
    }
    out
}

/// Trace concatenation per the denotational semantics: defined iff the
/// boundary packets agree, and both copies vanish from the result (the
/// boundary is not logged). Distinct from `gs::gs_concat`, which keeps
/// one copy as a snapshot.
fn diamond(u: &[Packet], v: &[Packet], max_len: usize) -> Option<Gs> {
    if u.last() != v.first() {
        return None;
    }
    let len = u.len() + v.len() - 2;
    if len > max_len {
        return None;
    }
    let mut w = Vec::with_capacity(len);
    w.extend_from_slice(&u[..u.len() - 1]);
    w.extend_from_slice(&v[1..]);
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn f12() -> PacketSpace {
        PacketSpace::new(vec![("f", vec![1, 2])]).unwrap()
    }

    fn gs(vs: &[u16]) -> Gs {
        vs.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn primitive_rows() {
        let sp = f12();
        assert!(gs_member(&sp, &Expr::TestEq(0, 1), &gs(&[1, 1])));
        assert!(!gs_member(&sp, &Expr::TestEq(0, 1), &gs(&[1, 2])));
        assert!(!gs_member(&sp, &Expr::TestEq(0, 1), &gs(&[2, 2])));
        assert!(gs_member(&sp, &Expr::Dup, &gs(&[1, 1, 1])));
        assert!(!gs_member(&sp, &Expr::Dup, &gs(&[1, 2, 1])));
        assert!(!gs_member(&sp, &Expr::Dup, &gs(&[1, 1])));
    }

    #[test]
    fn seq_hides_the_boundary_packet() {
        let sp = f12();
        // f:=2 then f:=1 takes 1 to 1 through an unlogged 2.
        let e = Expr::seq(Expr::Assign(0, 2), Expr::Assign(0, 1));
        assert!(gs_member(&sp, &e, &gs(&[1, 1])));
        assert!(gs_member(&sp, &e, &gs(&[2, 1])));
        assert!(!gs_member(&sp, &e, &gs(&[1, 2])));
        assert!(!gs_member(&sp, &e, &gs(&[1, 2, 1])));
    }

    #[test]
    fn star_unfolds_once() {
        let sp = f12();
        let e = Expr::star(Expr::seq(Expr::Assign(0, 2), Expr::Dup));
        assert!(gs_member(&sp, &e, &gs(&[1, 2, 2])));
        assert!(gs_member(&sp, &e, &gs(&[1, 1])));
        assert!(gs_member(&sp, &e, &gs(&[1, 2, 2, 2])));
        assert!(!gs_member(&sp, &e, &gs(&[1, 2])));
        assert!(!gs_member(&sp, &e, &gs(&[1, 2, 1])));
    }

    #[test]
    fn dup_seq_keeps_the_snapshot() {
        let sp = f12();
        // dup;f:=2 logs the input packet, then rewrites it silently.
        let e = Expr::seq(Expr::Dup, Expr::Assign(0, 2));
        assert!(gs_member(&sp, &e, &gs(&[1, 1, 2])));
        assert!(!gs_member(&sp, &e, &gs(&[1, 2])));
        assert!(!gs_member(&sp, &e, &gs(&[1, 1, 1])));
    }

    #[test]
    fn bounded_lang_matches_member_exhaustively() {
        let sp = f12();
        let exprs = [
            Expr::star(Expr::seq(Expr::Assign(0, 2), Expr::Dup)),
            Expr::seq(Expr::Dup, Expr::Dup),
            Expr::union(
                Expr::seq(Expr::TestEq(0, 1), Expr::Dup),
                Expr::star(Expr::Dup),
            ),
            Expr::star(Expr::star(Expr::seq(Expr::TestNe(0, 2), Expr::Dup))),
            Expr::seq(
                Expr::star(Expr::seq(Expr::Assign(0, 1), Expr::Dup)),
                Expr::TestEq(0, 1),
            ),
        ];
        for e in &exprs {
            let lang = bounded_lang(&sp, e, 3);
            for w in all_strings(&sp, 3) {
                assert_eq!(
                    gs_member(&sp, e, &w),
                    lang.contains(&w),
                    "disagree on {:?}",
                    w
                );
            }
        }
    }
}
