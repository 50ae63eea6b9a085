//! Packet spaces: an ordered list of named fields, each with a finite
//! value domain. Packets are total assignments, stored positionally.

use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

/// A header field value. Domains are small naturals.
pub type Val = u16;

/// A packet: one value per field, in the space's field order.
pub type Packet = Vec<Val>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketSpace {
    names: Vec<String>,
    domains: Vec<Vec<Val>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpaceError {
    NoFields,
    DuplicateField(String),
    EmptyDomain(String),
}

impl fmt::Display for SpaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceError::NoFields => write!(f, "packet space has no fields"),
            SpaceError::DuplicateField(n) => write!(f, "duplicate field name `{}`", n),
            SpaceError::EmptyDomain(n) => write!(f, "field `{}` has an empty domain", n),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpaceError {}

impl PacketSpace {
    /// Builds a space from `(name, domain)` pairs. Field order is the
    /// given order and is fixed for the lifetime of the space; domains
    /// are sorted and deduplicated.
    pub fn new<S: Into<String>>(fields: Vec<(S, Vec<Val>)>) -> Result<PacketSpace, SpaceError> {
        if fields.is_empty() {
            return Err(SpaceError::NoFields);
        }
        let mut names = Vec::with_capacity(fields.len());
        let mut domains = Vec::with_capacity(fields.len());
        for (name, mut dom) in fields {
            let name = name.into();
            if names.contains(&name) {
                return Err(SpaceError::DuplicateField(name));
            }
            dom.sort_unstable();
            dom.dedup();
            if dom.is_empty() {
                return Err(SpaceError::EmptyDomain(name));
            }
            names.push(name);
            domains.push(dom);
        }
        Ok(PacketSpace { names, domains })
    }

    /// Convenience: fields with 0-based domains `{0..size-1}`, the shape
    /// of space declaration files.
    pub fn zero_based<S: Into<String>>(
        fields: Vec<(S, u16)>,
    ) -> Result<PacketSpace, SpaceError> {
        PacketSpace::new(
            fields
                .into_iter()
                .map(|(n, k)| (n, (0..k).collect()))
                .collect(),
        )
    }

    pub fn num_fields(&self) -> usize {
        self.names.len()
    }

    pub fn field_name(&self, f: usize) -> &str {
        &self.names[f]
    }

    pub fn field_by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn domain(&self, f: usize) -> &[Val] {
        &self.domains[f]
    }

    /// Number of packets in the space (product of domain sizes).
    pub fn packet_count(&self) -> u64 {
        self.domains
            .iter()
            .fold(1u64, |acc, d| acc.saturating_mul(d.len() as u64))
    }

    pub fn contains(&self, p: &[Val]) -> bool {
        p.len() == self.domains.len()
            && p.iter()
                .zip(&self.domains)
                .all(|(v, d)| d.binary_search(v).is_ok())
    }

    /// Index of a packet in the lexicographic enumeration (fields
    /// major-to-minor in space order, values in domain order).
    pub fn packet_index(&self, p: &[Val]) -> usize {
        debug_assert!(self.contains(p));
        let mut ix = 0usize;
        for (v, d) in p.iter().zip(&self.domains) {
            ix = ix * d.len() + d.binary_search(v).unwrap();
        }
        ix
    }

    /// Inverse of [`packet_index`](Self::packet_index).
    pub fn packet_at(&self, mut ix: usize) -> Packet {
        let mut p = alloc::vec![0; self.domains.len()];
        for f in (0..self.domains.len()).rev() {
            let d = &self.domains[f];
            p[f] = d[ix % d.len()];
            ix /= d.len();
        }
        p
    }

    /// All packets, in index order.
    pub fn packets(&self) -> impl Iterator<Item = Packet> + '_ {
        (0..self.packet_count() as usize).map(|ix| self.packet_at(ix))
    }

    /// The all-minimal packet (smallest value in every domain), the
    /// deterministic fill for unconstrained fields in witness extraction.
    pub fn min_packet(&self) -> Packet {
        self.domains.iter().map(|d| d[0]).collect()
    }

    /// Renders a packet as `f=1,g=2` in field order.
    pub fn format_packet(&self, p: &[Val]) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (f, v) in p.iter().enumerate() {
            if f > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}={}", self.names[f], v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_index_roundtrip() {
        let sp = PacketSpace::new(vec![("f", vec![1, 2]), ("g", vec![0, 1, 2])]).unwrap();
        assert_eq!(sp.packet_count(), 6);
        for (ix, p) in sp.packets().enumerate() {
            assert!(sp.contains(&p));
            assert_eq!(sp.packet_index(&p), ix);
            assert_eq!(sp.packet_at(ix), p);
        }
    }

    #[test]
    fn unsorted_domain_is_normalized() {
        let sp = PacketSpace::new(vec![("f", vec![3, 1, 2, 1])]).unwrap();
        assert_eq!(sp.domain(0), &[1, 2, 3]);
        assert_eq!(sp.min_packet(), vec![1]);
    }

    #[test]
    fn rejects_bad_spaces() {
        assert_eq!(
            PacketSpace::new(Vec::<(&str, Vec<Val>)>::new()),
            Err(SpaceError::NoFields)
        );
        assert!(matches!(
            PacketSpace::new(vec![("f", vec![1]), ("f", vec![2])]),
            Err(SpaceError::DuplicateField(_))
        ));
        assert!(matches!(
            PacketSpace::new(vec![("f", vec![])]),
            Err(SpaceError::EmptyDomain(_))
        ));
    }

    #[test]
    fn format_packet_matches_trace_syntax() {
        let sp = PacketSpace::new(vec![("sw", vec![1, 2]), ("pt", vec![1, 2, 3])]).unwrap();
        assert_eq!(sp.format_packet(&[2, 1]), "sw=2,pt=1");
    }
}
