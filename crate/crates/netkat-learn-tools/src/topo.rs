//! Synthetic topologies and an edge list reader.
//!
//! Switches are numbered 1..=n. Each switch owns host-facing ports and
//! link ports; a link names both of its endpoints once. Port numbering
//! follows a fixed scheme (host port 1, link ports 2.. in the order the
//! links were attached), except the two-switch line, which reproduces a
//! specific worked topology: host ports 1 and 3 on both switches and the
//! link on port 2.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopoKind {
    Line,
    Ring,
    Star,
    Tree,
    Random,
    File,
}

impl TopoKind {
    pub fn parse(s: &str) -> Option<TopoKind> {
        Some(match s {
            "line" => TopoKind::Line,
            "ring" => TopoKind::Ring,
            "star" => TopoKind::Star,
            "tree" => TopoKind::Tree,
            "random" => TopoKind::Random,
            "file" => TopoKind::File,
            _ => return None,
        })
    }
}

impl fmt::Display for TopoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopoKind::Line => "line",
            TopoKind::Ring => "ring",
            TopoKind::Star => "star",
            TopoKind::Tree => "tree",
            TopoKind::Random => "random",
            TopoKind::File => "file",
        })
    }
}

/// A switch network. `links` holds every physical link once with both
/// endpoints spelled out; symmetry is by construction. A ring of two
/// switches is the doubled link, which is fine here because the two
/// (switch, port) endpoints still differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub name: String,
    pub kind: TopoKind,
    pub n: usize,
    pub links: Vec<(usize, u16, usize, u16)>,
    pub host_ports: Vec<Vec<u16>>,
}

impl Topology {
    /// Every (switch, port) endpoint must be unique, switch ids in range.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            bail!("topology needs at least 2 switches");
        }
        if self.host_ports.len() != self.n {
            bail!("host port list does not match switch count");
        }
        let mut used: BTreeSet<(usize, u16)> = BTreeSet::new();
        let mut claim = |sw: usize, pt: u16| -> Result<()> {
            if sw < 1 || sw > self.n {
                bail!("switch {} out of range", sw);
            }
            if !used.insert((sw, pt)) {
                bail!("port {} on switch {} used twice", pt, sw);
            }
            Ok(())
        };
        for (sw, ports) in self.host_ports.iter().enumerate() {
            for &p in ports {
                claim(sw + 1, p)?;
            }
        }
        for &(a, pa, b, pb) in &self.links {
            claim(a, pa)?;
            claim(b, pb)?;
        }
        Ok(())
    }

    /// Link ports of one switch with the switch on the other end, in
    /// port order.
    pub fn link_ports(&self, sw: usize) -> Vec<(u16, usize)> {
        let mut out = Vec::new();
        for &(a, pa, b, pb) in &self.links {
            if a == sw {
                out.push((pa, b));
            }
            if b == sw {
                out.push((pb, a));
            }
        }
        out.sort();
        out
    }

    pub fn max_degree(&self) -> usize {
        (1..=self.n)
            .map(|sw| self.link_ports(sw).len())
            .max()
            .unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n + 1];
        for &(a, _, b, _) in &self.links {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n + 1];
        let mut stack = vec![1usize];
        seen[1] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        (1..=self.n).all(|x| seen[x])
    }
}

/// Wire up a node list and an edge list (in a fixed order) into a
/// topology: every node gets host port 1, links claim ports 2.. per node
/// in edge order.
fn assemble(name: String, kind: TopoKind, n: usize, edges: &[(usize, usize)]) -> Topology {
    let mut next_port = vec![2u16; n + 1];
    let mut links = Vec::new();
    for &(a, b) in edges {
        let pa = next_port[a];
        next_port[a] += 1;
        let pb = next_port[b];
        next_port[b] += 1;
        links.push((a, pa, b, pb));
    }
    Topology {
        name,
        kind,
        n,
        links,
        host_ports: vec![vec![1]; n],
    }
}

/// Build a synthetic topology. Deterministic in the seed (only `random`
/// consumes it).
pub fn gen_topology(kind: TopoKind, n: usize, seed: u64) -> Result<Topology> {
    if n < 2 {
        bail!("{} topology needs at least 2 switches, got {}", kind, n);
    }
    let name = format!("{}{}", kind, n);
    let t = match kind {
        TopoKind::Line if n == 2 => Topology {
            name,
            kind,
            n,
            links: vec![(1, 2, 2, 2)],
            host_ports: vec![vec![1, 3], vec![1, 3]],
        },
        TopoKind::Line => {
            let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            assemble(name, kind, n, &edges)
        }
        TopoKind::Ring => {
            let mut edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            edges.push((n, 1));
            assemble(name, kind, n, &edges)
        }
        TopoKind::Star => {
            let edges: Vec<_> = (2..=n).map(|i| (1, i)).collect();
            assemble(name, kind, n, &edges)
        }
        TopoKind::Tree => {
            let edges: Vec<_> = (2..=n).map(|i| (i / 2, i)).collect();
            assemble(name, kind, n, &edges)
        }
        TopoKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges: Vec<(usize, usize)> = Vec::new();
            let mut present: BTreeSet<(usize, usize)> = BTreeSet::new();
            for i in 2..=n {
                let parent = rng.gen_range(1..i);
                edges.push((parent, i));
                present.insert((parent, i));
            }
            for i in 1..=n {
                for j in i + 1..=n {
                    if !present.contains(&(i, j)) && rng.gen_bool(1.0 / n as f64) {
                        edges.push((i, j));
                        present.insert((i, j));
                    }
                }
            }
            assemble(name, kind, n, &edges)
        }
        TopoKind::File => bail!("file topologies come from ingest_edge_list"),
    };
    debug_assert!(t.validate().is_ok());
    Ok(t)
}

/// Read a topology from an edge list: one `u v` pair per line, `#`
/// starts a comment. Node names are arbitrary words, numbered 1.. in
/// order of first appearance. Duplicate edges and self loops are
/// rejected; an edgeless file has no topology in it.
pub fn ingest_edge_list(path: &Path) -> Result<Topology> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".into());
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut raw_edges: Vec<(usize, usize)> = Vec::new();
    let mut present: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let (u, v) = match (words.next(), words.next(), words.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => bail!("line {}: expected `u v`", lineno + 1),
        };
        let mut id = |w: &str| -> usize {
            *ids.entry(w.to_string()).or_insert_with(|| {
                order.push(w.to_string());
                order.len()
            })
        };
        let (a, b) = (id(u), id(v));
        if a == b {
            bail!("line {}: self loop on {}", lineno + 1, u);
        }
        let key = (a.min(b), a.max(b));
        if !present.insert(key) {
            bail!("line {}: duplicate edge {} {}", lineno + 1, u, v);
        }
        raw_edges.push((a, b));
    }
    if raw_edges.is_empty() {
        bail!("{}: no edges", path.display());
    }
    let t = assemble(name, TopoKind::File, order.len(), &raw_edges);
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_switch_line_is_the_worked_topology() {
        let t = gen_topology(TopoKind::Line, 2, 0).unwrap();
        assert_eq!(t.links, vec![(1, 2, 2, 2)]);
        assert_eq!(t.host_ports, vec![vec![1, 3], vec![1, 3]]);
        t.validate().unwrap();
    }

    #[test]
    fn ring_sizes_and_degenerate_ring() {
        let t = gen_topology(TopoKind::Ring, 3, 0).unwrap();
        assert_eq!(t.links.len(), 3);
        assert!(t.is_connected());
        // a two-switch ring doubles the link; ports still unique
        let t2 = gen_topology(TopoKind::Ring, 2, 0).unwrap();
        assert_eq!(t2.links.len(), 2);
        t2.validate().unwrap();
        assert_eq!(t2.max_degree(), 2);
    }

    #[test]
    fn shapes_are_connected_and_valid() {
        for kind in [TopoKind::Line, TopoKind::Ring, TopoKind::Star, TopoKind::Tree] {
            for n in 2..=8 {
                let t = gen_topology(kind, n, 0).unwrap();
                t.validate().unwrap();
                assert!(t.is_connected(), "{} {}", kind, n);
            }
        }
    }

    #[test]
    fn random_is_deterministic_in_seed() {
        let a = gen_topology(TopoKind::Random, 6, 42).unwrap();
        let b = gen_topology(TopoKind::Random, 6, 42).unwrap();
        let c = gen_topology(TopoKind::Random, 6, 43).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        c.validate().unwrap();
    }

    #[test]
    fn too_small_is_an_error() {
        assert!(gen_topology(TopoKind::Line, 1, 0).is_err());
        assert!(gen_topology(TopoKind::Ring, 0, 0).is_err());
    }

    #[test]
    fn edge_lists_roundtrip_and_reject_junk() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("line3.txt");
        std::fs::write(&ok, "# a line\na b\nb c\n").unwrap();
        let t = ingest_edge_list(&ok).unwrap();
        assert_eq!(t.n, 3);
        assert_eq!(t.links.len(), 2);
        assert_eq!(t.name, "line3");
        assert!(t.is_connected());

        let empty = dir.path().join("empty.txt");
        std::fs::write(&empty, "# nothing\n").unwrap();
        assert!(ingest_edge_list(&empty).is_err());

        let dup = dir.path().join("dup.txt");
        std::fs::write(&dup, "a b\nb a\n").unwrap();
        let err = ingest_edge_list(&dup).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");

        let short = dir.path().join("short.txt");
        std::fs::write(&short, "a\n").unwrap();
        assert!(ingest_edge_list(&short).is_err());

        let loopy = dir.path().join("loop.txt");
        std::fs::write(&loopy, "a a\n").unwrap();
        assert!(ingest_edge_list(&loopy).is_err());
    }
}
