//! Active learning of NetKAT automata.
//!
//! This crate implements three learners over packet-forwarding behavior:
//! the canonical packet-state learner ([`learn_pnka`]), the dup-free
//! symbolic learner over packet-pair relations ([`learn_spp`]), and the
//! full symbolic automaton learner ([`learn_snka`]), together with the
//! teacher oracles that answer their membership and equivalence queries
//! ([`teacher`]).
//!
//! Supporting layers: packet spaces and guarded strings ([`space`],
//! [`gs`]), NetKAT abstract syntax with a parser ([`expr`], [`parse`]),
//! an exact denotational membership oracle ([`member`]), canonical
//! symbolic packet programs in an interning store ([`spp`]), evidence
//! tries ([`epp`]), and the executable automaton forms ([`automata`]).
//!
//! Everything is deterministic: iteration uses ordered maps, all
//! tie-breaks are fixed, and repeated runs produce identical query
//! sequences and counterexamples.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default
//! `std` feature only adds `std::error::Error` impls.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod automata;
pub mod epp;
pub mod expr;
pub mod gs;
pub mod learn_pnka;
pub mod learn_snka;
pub mod learn_spp;
pub mod member;
pub mod parse;
pub mod space;
pub mod spp;
pub mod teacher;

pub use expr::Expr;
pub use space::{Packet, PacketSpace, Val};
