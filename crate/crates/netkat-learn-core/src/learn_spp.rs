//! Learner for dup-free policies.
//!
//! The learner keeps every answered packet pair in an evidence trie and
//! conjectures the synthesized transformation after each new pair. The first
//! conjecture is the empty transformation, made before any evidence exists;
//! each rejection yields one counterexample pair, which is resolved with a
//! single membership query. Since a pair never has to be asked twice, the
//! loop ends after at most one equivalence query per packet pair.

use alloc::vec::Vec;

use crate::epp::{hyp_spp, Epp};
use crate::space::Packet;
use crate::spp::{Spp, Store, BOT};
use crate::teacher::SppTeacher;

/// What the learner did, in order: every conjecture handed to the teacher
/// (the initial empty one included) and the counterexample pair that
/// rejected each non-final conjecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SppLearnLog {
    pub conjectures: Vec<Spp>,
    pub counterexamples: Vec<(Packet, Packet)>,
}

pub fn learn_spp(st: &mut Store, teacher: &mut SppTeacher) -> (Spp, SppLearnLog) {
    let mut log = SppLearnLog {
        conjectures: Vec::new(),
        counterexamples: Vec::new(),
    };
    let mut evidence = Epp::empty();
    let mut hyp = BOT;
    log.conjectures.push(hyp);
    let mut verdict = teacher.equivalent(st, hyp);
    while let Some((a, b)) = verdict {
        let out = teacher.member(st, &a, &b);
        let space = st.space().clone();
        evidence.insert(&space, &a, &b, out);
        log.counterexamples.push((a, b));
        hyp = hyp_spp(st, &evidence);
        debug_assert!(evidence
            .defined_pairs()
            .iter()
            .all(|(a, b, out)| st.eval(hyp, a, b) == *out));
        log.conjectures.push(hyp);
        verdict = teacher.equivalent(st, hyp);
    }
    (hyp, log)
}
