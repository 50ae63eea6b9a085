//! Symbolic packet pairs: canonical decision structures denoting sets
//! of packet pairs, the dup-free fragment of the policy algebra.
//!
//! A structure is either `BOT` (no pairs), `TOP` (the identity
//! relation), or a node that examines one field. A node carries three
//! parts. `branches` pins specific input values: if the input value has
//! a branch row, the output value must appear in that row. Otherwise
//! `muts` names output values that are reachable from every remaining
//! input value, and `default` covers the case where the field passes
//! through unchanged (it is shadowed on outputs named by `muts`). A
//! field with no node on a path is unchanged, so `TOP` behaves as skip,
//! not as the full relation.
//!
//! Every constructor funnels through [`Store::mk_from_rows`], which
//! rebuilds the unique minimal (branches, muts, default) decomposition
//! from the semantic per-input rows. Structural equality of handles
//! therefore coincides with semantic equality, operators can be
//! memoized by handle, and fixpoints terminate the moment the handle
//! stops changing.

use crate::expr::Expr;
use crate::space::{Packet, PacketSpace, Val};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Handle to an interned packet-pair structure.
pub type Spp = u32;
/// Handle to an interned packet set.
pub type Sp = u32;

/// The empty pair relation.
pub const BOT: Spp = 0;
/// The identity pair relation (skip).
pub const TOP: Spp = 1;
/// The empty packet set.
pub const SP_EMPTY: Sp = 0;
/// The full packet set.
pub const SP_FULL: Sp = 1;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SppNode {
    field: usize,
    branches: BTreeMap<Val, BTreeMap<Val, Spp>>,
    muts: BTreeMap<Val, Spp>,
    default: Spp,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SpNode {
    field: usize,
    branches: BTreeMap<Val, Sp>,
    default: Sp,
}

/// Returned by [`Store::compile`] when the policy mentions dup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainsDup;

impl core::fmt::Display for ContainsDup {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("policy contains dup")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ContainsDup {}

// one memo table per operator, keyed by tag
const T_UNION: u8 = 0;
const T_INTER: u8 = 1;
const T_DIFF: u8 = 2;
const T_XOR: u8 = 3;
const T_SEQ: u8 = 4;
const T_SP_UNION: u8 = 5;
const T_SP_INTER: u8 = 6;
const T_IMAGE: u8 = 7;
const T_PREIMAGE: u8 = 8;
const T_STAR: u8 = 9;
const T_IDOF: u8 = 10;
const T_SP_DIFF: u8 = 11;

/// Arena and canonicalization tables for pair and set structures over
/// one packet space. Handles are only meaningful relative to the store
/// that issued them.
pub struct Store {
    space: PacketSpace,
    spp_nodes: Vec<SppNode>,
    spp_ids: BTreeMap<SppNode, Spp>,
    sp_nodes: Vec<SpNode>,
    sp_ids: BTreeMap<SpNode, Sp>,
    bin_memo: BTreeMap<(u8, u32, u32), u32>,
    un_memo: BTreeMap<(u8, u32), u32>,
}

impl Store {
    pub fn new(space: PacketSpace) -> Self {
        Store {
            space,
            spp_nodes: Vec::new(),
            spp_ids: BTreeMap::new(),
            sp_nodes: Vec::new(),
            sp_ids: BTreeMap::new(),
            bin_memo: BTreeMap::new(),
            un_memo: BTreeMap::new(),
        }
    }

    pub fn space(&self) -> &PacketSpace {
        &self.space
    }

    fn spp_node(&self, s: Spp) -> &SppNode {
        &self.spp_nodes[(s - 2) as usize]
    }

    fn sp_node(&self, s: Sp) -> &SpNode {
        &self.sp_nodes[(s - 2) as usize]
    }

    fn spp_field(&self, s: Spp) -> usize {
        if s < 2 {
            usize::MAX
        } else {
            self.spp_node(s).field
        }
    }

    fn sp_field(&self, s: Sp) -> usize {
        if s < 2 {
            usize::MAX
        } else {
            self.sp_node(s).field
        }
    }

    /// Does the pair (a, b) belong to the relation?
    pub fn eval(&self, s: Spp, a: &[Val], b: &[Val]) -> bool {
        let mut s = s;
        let mut next = 0;
        loop {
            if s == BOT {
                return false;
            }
            if s == TOP {
                return a[next..] == b[next..];
            }
            let n = self.spp_node(s);
            for g in next..n.field {
                if a[g] != b[g] {
                    return false;
                }
            }
            let (va, vb) = (a[n.field], b[n.field]);
            s = if let Some(row) = n.branches.get(&va) {
                match row.get(&vb) {
                    Some(&c) => c,
                    None => return false,
                }
            } else if let Some(&c) = n.muts.get(&vb) {
                c
            } else if va == vb {
                n.default
            } else {
                return false;
            };
            next = n.field + 1;
        }
    }

    /// The effective output row for input value `v` at `field`, where
    /// the structure either tests `field` or sits deeper (then the
    /// field passes through unchanged).
    fn row_of(&self, s: Spp, field: usize, v: Val) -> BTreeMap<Val, Spp> {
        if s == BOT {
            return BTreeMap::new();
        }
        if s != TOP {
            let n = self.spp_node(s);
            if n.field == field {
                return n
                    .branches
                    .get(&v)
                    .cloned()
                    .unwrap_or_else(|| gen_row(&n.muts, n.default, v));
            }
            debug_assert!(n.field > field);
        }
        let mut r = BTreeMap::new();
        r.insert(v, s);
        r
    }

    /// Canonical node from semantic rows: `rows[v]` is the output map
    /// for input value `v` (missing inputs mean the empty row). Scores
    /// every (muts, default) decomposition a single input's row can
    /// induce, keeps the one reproducing the most rows (ties to the
    /// smallest input value, plain split before the all-muts variant),
    /// and pins the rest as explicit branches. Collapses to `default`
    /// when nothing else remains, so identity levels vanish.
    pub fn mk_from_rows(&mut self, field: usize, rows_in: BTreeMap<Val, BTreeMap<Val, Spp>>) -> Spp {
        debug_assert!(field < self.space.num_fields());
        let domain = self.space.domain(field).to_vec();
        let mut rows: BTreeMap<Val, BTreeMap<Val, Spp>> = BTreeMap::new();
        for &v in &domain {
            let mut r = rows_in.get(&v).cloned().unwrap_or_default();
            r.retain(|u, c| {
                debug_assert!(domain.binary_search(u).is_ok());
                *c != BOT
            });
            rows.insert(v, r);
        }
        let mut best: Option<(BTreeMap<Val, Spp>, Spp, usize)> = None;
        for &v in &domain {
            let rv = &rows[&v];
            let diag = rv.get(&v).copied();
            let mut plain = rv.clone();
            plain.remove(&v);
            let mut cands = alloc::vec![(plain, diag.unwrap_or(BOT))];
            if diag.is_some() {
                cands.push((rv.clone(), BOT));
            }
            for (m, d) in cands {
                let covered = domain
                    .iter()
                    .filter(|&&w| rows[&w] == gen_row(&m, d, w))
                    .count();
                if best.as_ref().map_or(true, |&(_, _, c)| covered > c) {
                    best = Some((m, d, covered));
                }
            }
        }
        let (muts, default, _) = best.unwrap();
        let mut branches = BTreeMap::new();
        for &v in &domain {
            if rows[&v] != gen_row(&muts, default, v) {
                branches.insert(v, rows[&v].clone());
            }
        }
        if branches.is_empty() && muts.is_empty() {
            return default;
        }
        self.intern_spp(SppNode {
            field,
            branches,
            muts,
            default,
        })
    }

    fn intern_spp(&mut self, node: SppNode) -> Spp {
        debug_assert!(node
            .branches
            .values()
            .flat_map(|r| r.values())
            .chain(node.muts.values())
            .chain([&node.default])
            .all(|&c| c < 2 || self.spp_node(c).field > node.field));
        if let Some(&id) = self.spp_ids.get(&node) {
            return id;
        }
        let id = (self.spp_nodes.len() + 2) as u32;
        self.spp_nodes.push(node.clone());
        self.spp_ids.insert(node, id);
        id
    }

    pub fn union(&mut self, x: Spp, y: Spp) -> Spp {
        self.bin(T_UNION, x, y)
    }

    pub fn inter(&mut self, x: Spp, y: Spp) -> Spp {
        self.bin(T_INTER, x, y)
    }

    pub fn diff(&mut self, x: Spp, y: Spp) -> Spp {
        self.bin(T_DIFF, x, y)
    }

    pub fn xor(&mut self, x: Spp, y: Spp) -> Spp {
        self.bin(T_XOR, x, y)
    }

    /// Relational composition; the middle packet is not observable.
    pub fn seq(&mut self, x: Spp, y: Spp) -> Spp {
        self.bin(T_SEQ, x, y)
    }

    fn bin(&mut self, tag: u8, x: Spp, y: Spp) -> Spp {
        match tag {
            T_UNION => {
                if x == y || y == BOT {
                    return x;
                }
                if x == BOT {
                    return y;
                }
            }
            T_INTER => {
                if x == y {
                    return x;
                }
                if x == BOT || y == BOT {
                    return BOT;
                }
            }
            T_DIFF => {
                if x == BOT || x == y {
                    return BOT;
                }
                if y == BOT {
                    return x;
                }
            }
            T_XOR => {
                if x == y {
                    return BOT;
                }
                if x == BOT {
                    return y;
                }
                if y == BOT {
                    return x;
                }
            }
            T_SEQ => {
                if x == BOT || y == BOT {
                    return BOT;
                }
                if x == TOP {
                    return y;
                }
                if y == TOP {
                    return x;
                }
            }
            _ => unreachable!(),
        }
        let commutes = matches!(tag, T_UNION | T_INTER | T_XOR);
        let key = if commutes && x > y {
            (tag, y, x)
        } else {
            (tag, x, y)
        };
        if let Some(&r) = self.bin_memo.get(&key) {
            return r;
        }
        let f = self.spp_field(x).min(self.spp_field(y));
        let domain = self.space.domain(f).to_vec();
        let mut rows = BTreeMap::new();
        for &v in &domain {
            let rx = self.row_of(x, f, v);
            let row = if tag == T_SEQ {
                let mut out: BTreeMap<Val, Spp> = BTreeMap::new();
                for (w, c1) in rx {
                    for (u, c2) in self.row_of(y, f, w) {
                        let z = self.bin(T_SEQ, c1, c2);
                        if z != BOT {
                            let cur = out.remove(&u).unwrap_or(BOT);
                            let merged = self.bin(T_UNION, cur, z);
                            out.insert(u, merged);
                        }
                    }
                }
                out
            } else {
                let ry = self.row_of(y, f, v);
                let keys: BTreeSet<Val> = rx.keys().chain(ry.keys()).copied().collect();
                let mut out = BTreeMap::new();
                for u in keys {
                    let cx = rx.get(&u).copied().unwrap_or(BOT);
                    let cy = ry.get(&u).copied().unwrap_or(BOT);
                    out.insert(u, self.bin(tag, cx, cy));
                }
                out
            };
            rows.insert(v, row);
        }
        let r = self.mk_from_rows(f, rows);
        self.bin_memo.insert(key, r);
        r
    }

    /// Least fixpoint of z = skip + x;z. Handle equality is semantic,
    /// so the loop exits exactly when the chain saturates.
    pub fn star(&mut self, x: Spp) -> Spp {
        if let Some(&r) = self.un_memo.get(&(T_STAR, x)) {
            return r;
        }
        let mut z = TOP;
        loop {
            let step = self.seq(x, z);
            let nz = self.union(TOP, step);
            if nz == z {
                break;
            }
            z = nz;
        }
        self.un_memo.insert((T_STAR, x), z);
        z
    }

    /// Compile a dup-free policy. Tests against values outside the
    /// field's domain are vacuous and fold away; assignments outside it
    /// would leave the space and are a caller bug.
    pub fn compile(&mut self, e: &Expr) -> Result<Spp, ContainsDup> {
        Ok(match e {
            Expr::Zero => BOT,
            Expr::One => TOP,
            Expr::TestEq(f, v) => {
                let mut rows = BTreeMap::new();
                if self.space.domain(*f).contains(v) {
                    rows.insert(*v, [(*v, TOP)].into_iter().collect());
                }
                self.mk_from_rows(*f, rows)
            }
            Expr::TestNe(f, v) => {
                let domain = self.space.domain(*f).to_vec();
                let mut rows = BTreeMap::new();
                for &w in &domain {
                    if w != *v {
                        rows.insert(w, [(w, TOP)].into_iter().collect());
                    }
                }
                self.mk_from_rows(*f, rows)
            }
            Expr::Assign(f, v) => {
                debug_assert!(
                    self.space.domain(*f).contains(v),
                    "assignment outside the field domain"
                );
                let domain = self.space.domain(*f).to_vec();
                let mut rows = BTreeMap::new();
                for &w in &domain {
                    rows.insert(w, [(*v, TOP)].into_iter().collect());
                }
                self.mk_from_rows(*f, rows)
            }
            Expr::Dup => return Err(ContainsDup),
            Expr::Union(a, b) => {
                let x = self.compile(a)?;
                let y = self.compile(b)?;
                self.union(x, y)
            }
            Expr::Seq(a, b) => {
                let x = self.compile(a)?;
                let y = self.compile(b)?;
                self.seq(x, y)
            }
            Expr::Star(a) => {
                let x = self.compile(a)?;
                self.star(x)
            }
        })
    }

    /// Structure size: per distinct reachable node, the number of
    /// branch keys plus all branch row entries plus the number of muts.
    /// Leaves cost nothing.
    pub fn mu(&self, s: Spp) -> u64 {
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![s];
        let mut total = 0u64;
        while let Some(t) = stack.pop() {
            if t < 2 || !seen.insert(t) {
                continue;
            }
            let n = self.spp_node(t);
            total += (n.branches.len() + n.muts.len()) as u64;
            for row in n.branches.values() {
                total += row.len() as u64;
                stack.extend(row.values().copied());
            }
            stack.extend(n.muts.values().copied());
            stack.push(n.default);
        }
        total
    }

    /// Deterministic witness pair for a nonempty relation: fields are
    /// settled left to right, trying input values in ascending order
    /// and outputs ascending within the chosen input; unconstrained
    /// fields take the least domain value on both sides.
    pub fn choose_pair(&self, s: Spp) -> Option<(Packet, Packet)> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        if self.choose_rec(s, 0, &mut a, &mut b) {
            Some((a, b))
        } else {
            None
        }
    }

    fn choose_rec(&self, s: Spp, f: usize, a: &mut Packet, b: &mut Packet) -> bool {
        if s == BOT {
            return false;
        }
        if f == self.space.num_fields() {
            debug_assert_eq!(s, TOP);
            return true;
        }
        for &v in self.space.domain(f) {
            for (u, c) in self.row_of(s, f, v) {
                if c == BOT {
                    continue;
                }
                a.push(v);
                b.push(u);
                if self.choose_rec(c, f + 1, a, b) {
                    return true;
                }
                a.pop();
                b.pop();
            }
        }
        false
    }

    /// Readable multi-line rendering; shared nodes print once and are
    /// referenced by handle. T is skip, F is the empty relation.
    pub fn dump(&self, s: Spp) -> String {
        fn visit(st: &Store, t: Spp, seen: &mut BTreeSet<Spp>, order: &mut Vec<Spp>) {
            if t < 2 || !seen.insert(t) {
                return;
            }
            order.push(t);
            let n = st.spp_node(t);
            for row in n.branches.values() {
                for &c in row.values() {
                    visit(st, c, seen, order);
                }
            }
            for &c in n.muts.values() {
                visit(st, c, seen, order);
            }
            visit(st, n.default, seen, order);
        }
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        visit(self, s, &mut seen, &mut order);
        let mut out = format!("spp {}\n", ref_str(s));
        for t in order {
            let n = self.spp_node(t);
            let mut line = format!("  #{} {}:", t, self.space.field_name(n.field));
            for (v, row) in &n.branches {
                let parts: Vec<String> = row
                    .iter()
                    .map(|(u, c)| format!("{}:{}", u, ref_str(*c)))
                    .collect();
                line.push_str(&format!(" {}->{{{}}}", v, parts.join(",")));
            }
            let parts: Vec<String> = n
                .muts
                .iter()
                .map(|(u, c)| format!("{}:{}", u, ref_str(*c)))
                .collect();
            line.push_str(&format!(" | muts {{{}}} | else {}", parts.join(","), ref_str(n.default)));
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Child of a set trie at `field` for value `v` (the set either
    /// tests `field` or does not constrain it).
    fn sp_child(&self, sp: Sp, field: usize, v: Val) -> Sp {
        if sp < 2 {
            return sp;
        }
        let n = self.sp_node(sp);
        if n.field > field {
            return sp;
        }
        debug_assert_eq!(n.field, field);
        n.branches.get(&v).copied().unwrap_or(n.default)
    }

    /// Canonical set node from one child per domain value: the most
    /// common child becomes the default (ties to the smallest handle),
    /// equal children fold into it, childless nodes collapse.
    fn mk_sp(&mut self, field: usize, children: BTreeMap<Val, Sp>) -> Sp {
        debug_assert_eq!(children.len(), self.space.domain(field).len());
        let mut counts: BTreeMap<Sp, usize> = BTreeMap::new();
        for &c in children.values() {
            *counts.entry(c).or_insert(0) += 1;
        }
        let mut default = SP_EMPTY;
        let mut best = 0;
        for (&c, &k) in &counts {
            if k > best {
                best = k;
                default = c;
            }
        }
        let branches: BTreeMap<Val, Sp> =
            children.into_iter().filter(|&(_, c)| c != default).collect();
        if branches.is_empty() {
            return default;
        }
        let node = SpNode {
            field,
            branches,
            default,
        };
        debug_assert!(node
            .branches
            .values()
            .chain([&node.default])
            .all(|&c| c < 2 || self.sp_node(c).field > field));
        if let Some(&id) = self.sp_ids.get(&node) {
            return id;
        }
        let id = (self.sp_nodes.len() + 2) as u32;
        self.sp_nodes.push(node.clone());
        self.sp_ids.insert(node, id);
        id
    }

    pub fn sp_union(&mut self, x: Sp, y: Sp) -> Sp {
        self.sp_bin(T_SP_UNION, x, y)
    }

    pub fn sp_inter(&mut self, x: Sp, y: Sp) -> Sp {
        self.sp_bin(T_SP_INTER, x, y)
    }

    pub fn sp_diff(&mut self, x: Sp, y: Sp) -> Sp {
        self.sp_bin(T_SP_DIFF, x, y)
    }

    fn sp_bin(&mut self, tag: u8, x: Sp, y: Sp) -> Sp {
        match tag {
            T_SP_UNION => {
                if x == y || y == SP_EMPTY {
                    return x;
                }
                if x == SP_EMPTY {
                    return y;
                }
                if x == SP_FULL || y == SP_FULL {
                    return SP_FULL;
                }
            }
            T_SP_INTER => {
                if x == y || y == SP_FULL {
                    return x;
                }
                if x == SP_FULL {
                    return y;
                }
                if x == SP_EMPTY || y == SP_EMPTY {
                    return SP_EMPTY;
                }
            }
            T_SP_DIFF => {
                if x == y || x == SP_EMPTY || y == SP_FULL {
                    return SP_EMPTY;
                }
                if y == SP_EMPTY {
                    return x;
                }
            }
            _ => unreachable!(),
        }
        let commutes = tag != T_SP_DIFF;
        let key = if commutes && x > y {
            (tag, y, x)
        } else {
            (tag, x, y)
        };
        if let Some(&r) = self.bin_memo.get(&key) {
            return r;
        }
        let f = self.sp_field(x).min(self.sp_field(y));
        let domain = self.space.domain(f).to_vec();
        let mut children = BTreeMap::new();
        for &v in &domain {
            let cx = self.sp_child(x, f, v);
            let cy = self.sp_child(y, f, v);
            children.insert(v, self.sp_bin(tag, cx, cy));
        }
        let r = self.mk_sp(f, children);
        self.bin_memo.insert(key, r);
        r
    }

    pub fn sp_contains(&self, sp: Sp, p: &[Val]) -> bool {
        let mut sp = sp;
        loop {
            if sp == SP_EMPTY {
                return false;
            }
            if sp == SP_FULL {
                return true;
            }
            let n = self.sp_node(sp);
            sp = n.branches.get(&p[n.field]).copied().unwrap_or(n.default);
        }
    }

    /// Least packet of a nonempty set, fields settled left to right.
    pub fn sp_min_packet(&self, sp: Sp) -> Option<Packet> {
        let mut p = Vec::new();
        if self.sp_min_rec(sp, 0, &mut p) {
            Some(p)
        } else {
            None
        }
    }

    fn sp_min_rec(&self, sp: Sp, f: usize, p: &mut Packet) -> bool {
        if sp == SP_EMPTY {
            return false;
        }
        if f == self.space.num_fields() {
            debug_assert_eq!(sp, SP_FULL);
            return true;
        }
        for &v in self.space.domain(f) {
            let c = self.sp_child(sp, f, v);
            if c != SP_EMPTY {
                p.push(v);
                if self.sp_min_rec(c, f + 1, p) {
                    return true;
                }
                p.pop();
            }
        }
        false
    }

    pub fn sp_singleton(&mut self, p: &[Val]) -> Sp {
        let mut acc = SP_FULL;
        for f in (0..self.space.num_fields()).rev() {
            let domain = self.space.domain(f).to_vec();
            let children: BTreeMap<Val, Sp> = domain
                .iter()
                .map(|&v| (v, if v == p[f] { acc } else { SP_EMPTY }))
                .collect();
            acc = self.mk_sp(f, children);
        }
        acc
    }

    /// The one-pair relation {(a, b)}.
    pub fn spp_pair(&mut self, a: &[Val], b: &[Val]) -> Spp {
        let mut acc = TOP;
        for f in (0..self.space.num_fields()).rev() {
            let mut row = BTreeMap::new();
            row.insert(b[f], acc);
            let mut rows = BTreeMap::new();
            rows.insert(a[f], row);
            acc = self.mk_from_rows(f, rows);
        }
        acc
    }

    /// Identity relation restricted to a packet set.
    pub fn id_of(&mut self, sp: Sp) -> Spp {
        if sp == SP_EMPTY {
            return BOT;
        }
        if sp == SP_FULL {
            return TOP;
        }
        if let Some(&r) = self.un_memo.get(&(T_IDOF, sp)) {
            return r;
        }
        let n = self.sp_node(sp).clone();
        let domain = self.space.domain(n.field).to_vec();
        let mut rows = BTreeMap::new();
        for &v in &domain {
            let c = n.branches.get(&v).copied().unwrap_or(n.default);
            if c != SP_EMPTY {
                let sub = self.id_of(c);
                rows.insert(v, [(v, sub)].into_iter().collect());
            }
        }
        let r = self.mk_from_rows(n.field, rows);
        self.un_memo.insert((T_IDOF, sp), r);
        r
    }

    /// Outputs reachable from some input in `sp`.
    pub fn image(&mut self, s: Spp, sp: Sp) -> Sp {
        if s == BOT || sp == SP_EMPTY {
            return SP_EMPTY;
        }
        if s == TOP {
            return sp;
        }
        let key = (T_IMAGE, s, sp);
        if let Some(&r) = self.bin_memo.get(&key) {
            return r;
        }
        let f = self.spp_field(s).min(self.sp_field(sp));
        let domain = self.space.domain(f).to_vec();
        let mut children: BTreeMap<Val, Sp> =
            domain.iter().map(|&v| (v, SP_EMPTY)).collect();
        for &v in &domain {
            let sv = self.sp_child(sp, f, v);
            if sv == SP_EMPTY {
                continue;
            }
            for (u, c) in self.row_of(s, f, v) {
                let img = self.image(c, sv);
                if img != SP_EMPTY {
                    let cur = children[&u];
                    let merged = self.sp_union(cur, img);
                    children.insert(u, merged);
                }
            }
        }
        let r = self.mk_sp(f, children);
        self.bin_memo.insert(key, r);
        r
    }

    /// Inputs with some output in `sp`.
    pub fn preimage(&mut self, s: Spp, sp: Sp) -> Sp {
        if s == BOT || sp == SP_EMPTY {
            return SP_EMPTY;
        }
        if s == TOP {
            return sp;
        }
        let key = (T_PREIMAGE, s, sp);
        if let Some(&r) = self.bin_memo.get(&key) {
            return r;
        }
        let f = self.spp_field(s).min(self.sp_field(sp));
        let domain = self.space.domain(f).to_vec();
        let mut children = BTreeMap::new();
        for &v in &domain {
            let mut acc = SP_EMPTY;
            for (u, c) in self.row_of(s, f, v) {
                let su = self.sp_child(sp, f, u);
                if su == SP_EMPTY {
                    continue;
                }
                let pre = self.preimage(c, su);
                acc = self.sp_union(acc, pre);
            }
            children.insert(v, acc);
        }
        let r = self.mk_sp(f, children);
        self.bin_memo.insert(key, r);
        r
    }
}

/// Output row induced on input `w` by a (muts, default) pair: the muts
/// themselves, plus `w` kept unchanged through `default` unless a mut
/// already claims `w`.
pub(crate) fn gen_row(m: &BTreeMap<Val, Spp>, d: Spp, w: Val) -> BTreeMap<Val, Spp> {
    if m.contains_key(&w) {
        return m.clone();
    }
    let mut r = m.clone();
    if d != BOT {
        r.insert(w, d);
    }
    r
}

fn ref_str(s: Spp) -> String {
    match s {
        BOT => String::from("F"),
        TOP => String::from("T"),
        _ => format!("#{}", s),
    }
}
