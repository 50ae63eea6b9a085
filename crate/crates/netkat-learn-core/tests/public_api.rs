//! Cross-module scenarios through the public surface only: parse a
//! policy, compile it, learn it back, and run the learned automata.

use netkat_learn_core::automata::snka_lang;
use netkat_learn_core::learn_snka::learn_snka;
use netkat_learn_core::learn_spp::learn_spp;
use netkat_learn_core::member::{bounded_lang, gs_member};
use netkat_learn_core::parse::parse_expr;
use netkat_learn_core::spp::Store;
use netkat_learn_core::teacher::{build_staged_target, SnkaTeacher, SppTeacher};
use netkat_learn_core::PacketSpace;

#[test]
fn parsed_policy_learned_back_as_the_same_relation() {
    let space = PacketSpace::new(vec![("sw", vec![1, 2]), ("pt", vec![1, 2])]).unwrap();
    let e = parse_expr("sw=1; pt:=2 + sw=2; pt:=1", &space).unwrap();
    let mut st = Store::new(space.clone());
    let target = st.compile(&e).unwrap();

    let mut teacher = SppTeacher::new(target);
    let (h, log) = learn_spp(&mut st, &mut teacher);
    assert_eq!(h, target);
    assert_eq!(log.conjectures.last(), Some(&h));

    // the learned relation answers exactly like the denotational oracle
    for a in space.packets() {
        for b in space.packets() {
            assert_eq!(
                st.eval(h, &a, &b),
                gs_member(&space, &e, &[a.clone(), b.clone()])
            );
        }
    }
}

#[test]
fn staged_toggle_policy_learned_as_a_trace_automaton() {
    let space = PacketSpace::new(vec![("f", vec![1, 2])]).unwrap();
    let p_init = parse_expr("f=1", &space).unwrap();
    let step = parse_expr("f=1; f:=2 + f=2; f:=1", &space).unwrap();
    let p_final = parse_expr("f=2", &space).unwrap();
    let staged = parse_expr("f=1; ( (f=1; f:=2 + f=2; f:=1); dup )*; f=2", &space).unwrap();

    let mut st = Store::new(space.clone());
    let target = build_staged_target(&mut st, &p_init, &step, &p_final).unwrap();
    let mut teacher = SnkaTeacher::new(target.clone());
    let (h, _) = learn_snka(&mut st, &mut teacher);

    let want = bounded_lang(&space, &staged, 3);
    let got: std::collections::BTreeSet<_> =
        snka_lang(&st, &h, &space, 3).into_iter().collect();
    assert_eq!(got, want);
}
