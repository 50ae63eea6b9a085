//! Guarded strings and their partial concatenations.
//!
//! A guarded string is a packet sequence of length at least two: the
//! first packet is the input, the last is the output, and every interior
//! packet is a dup snapshot (dup markers are implicit between consecutive
//! packets). A prefix `Pk·(Pk·dup)*` is a nonempty sequence whose last
//! packet is its most recent snapshot; a suffix `(Pk·dup)*·Pk` is a
//! nonempty sequence ending in the bare output packet. The learners'
//! observation tables are keyed by prefixes and suffixes.

use crate::space::Packet;
use alloc::vec::Vec;

/// A guarded string; invariant `len >= 2`.
pub type Gs = Vec<Packet>;

/// Number of dups in a guarded string (its interior packet count).
pub fn dups(w: &[Packet]) -> usize {
    debug_assert!(w.len() >= 2);
    w.len() - 2
}

/// Concatenation of guarded strings: defined iff `last(u) = first(v)`;
/// the shared boundary packet is kept once, as an interior snapshot.
pub fn gs_concat(u: &[Packet], v: &[Packet]) -> Option<Gs> {
    debug_assert!(u.len() >= 2 && v.len() >= 2);
    if u.last() != v.first() {
        return None;
    }
    let mut out = Vec::with_capacity(u.len() + v.len() - 1);
    out.extend_from_slice(u);
    out.extend_from_slice(&v[1..]);
    Some(out)
}

/// The final packet of a prefix (the bare input packet when the prefix
/// has length one, otherwise its latest dup snapshot).
pub fn last(prefix: &[Packet]) -> &Packet {
    debug_assert!(!prefix.is_empty());
    prefix.last().unwrap()
}

/// Prefix-onto-string concatenation: defined iff `last(p)` equals the
/// first packet of `w`; the duplicated boundary packet is dropped from
/// `w`'s side.
pub fn prefix_concat(p: &[Packet], w: &[Packet]) -> Option<Gs> {
    debug_assert!(!p.is_empty() && w.len() >= 2);
    if p.last() != w.first() {
        return None;
    }
    let mut out = Vec::with_capacity(p.len() + w.len() - 1);
    out.extend_from_slice(p);
    out.extend_from_slice(&w[1..]);
    Some(out)
}

/// Prefix-suffix join; always defined and always a guarded string.
pub fn join(prefix: &[Packet], suffix: &[Packet]) -> Gs {
    debug_assert!(!prefix.is_empty() && !suffix.is_empty());
    let mut out = Vec::with_capacity(prefix.len() + suffix.len());
    out.extend_from_slice(prefix);
    out.extend_from_slice(suffix);
    out
}

/// All ways to split `w` into a prefix and a suffix: `(w[..i], w[i..])`
/// for `i` in `1..len`, so a string of n packets has n-1 splits.
pub fn splits(w: &[Packet]) -> impl Iterator<Item = (&[Packet], &[Packet])> {
    debug_assert!(w.len() >= 2);
    (1..w.len()).map(move |i| (&w[..i], &w[i..]))
}

/// Shortlex order on packet sequences: length first, then lexicographic.
/// The deterministic iteration order for table witnesses.
pub fn shortlex_cmp(a: &[Packet], b: &[Packet]) -> core::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pk(v: u16) -> Packet {
        alloc::vec![v]
    }

    fn gs(vs: &[u16]) -> Gs {
        vs.iter().map(|&v| pk(v)).collect()
    }

    #[test]
    fn concat_keeps_one_boundary_copy() {
        assert_eq!(gs_concat(&gs(&[1, 2]), &gs(&[2, 1])), Some(gs(&[1, 2, 1])));
        assert_eq!(gs_concat(&gs(&[1, 2]), &gs(&[1, 2])), None);
        assert_eq!(gs_concat(&gs(&[1, 1]), &gs(&[1, 1])), Some(gs(&[1, 1, 1])));
    }

    #[test]
    fn concat_associative_where_defined() {
        let all = [gs(&[1, 1]), gs(&[1, 2]), gs(&[2, 1]), gs(&[2, 2])];
        for u in &all {
            for v in &all {
                for w in &all {
                    let lhs = gs_concat(u, v).and_then(|uv| gs_concat(&uv, w));
                    let rhs = gs_concat(v, w).and_then(|vw| gs_concat(u, &vw));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn prefix_ops() {
        assert_eq!(last(&gs(&[1, 2])), &pk(2));
        assert_eq!(prefix_concat(&gs(&[1]), &gs(&[1, 2])), Some(gs(&[1, 2])));
        assert_eq!(prefix_concat(&gs(&[1]), &gs(&[2, 2])), None);
        assert_eq!(join(&gs(&[1, 2]), &gs(&[1])), gs(&[1, 2, 1]));
    }

    #[test]
    fn split_count_is_packets_minus_one() {
        let w = gs(&[1, 2, 2, 1]);
        let ss: Vec<_> = splits(&w).collect();
        assert_eq!(ss.len(), 3);
        assert_eq!(ss[0], (&w[..1], &w[1..]));
        for (p, e) in ss {
            assert_eq!(join(p, e), w);
        }
    }
}
