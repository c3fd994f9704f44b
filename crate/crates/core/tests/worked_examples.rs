//! Structure of the model forms on the three-context example system with
//! contexts 1:{1,2,3}, 2:{3,4}, 3:{1,2,3,4}.

use contextuality_core::catalog;
use contextuality_core::consistify::ContextKind;
use contextuality_core::hvm::{Response, to_fc_no_cim};
use contextuality_core::{
    build_consistified_hvms, build_gen, consistify, to_cim_no_fc, verify_witness, ContentId,
};

#[test]
fn context_free_form_answers_each_content_separately() {
    let s = catalog::r0_shape(2);
    let cim = to_cim_no_fc(&build_gen(&s));
    let Response::ContextFree(table) = &cim.response else {
        panic!("response still reads the context");
    };
    let c2 = s.find_context("2").unwrap();
    let (q3, q4) = (s.find_content("3").unwrap(), s.find_content("4").unwrap());
    // Every hidden state of context 2 is a partial assignment to contents 3
    // and 4, and the pair of single-content answers reproduces the bunch.
    for &state in cim.hidden[c2.index()].keys() {
        assert!(table.contains_key(&(q3, state)) && table.contains_key(&(q4, state)));
        assert!(!table.contains_key(&(s.find_content("1").unwrap(), state)));
    }
    assert_eq!(cim.pushforward(c2).unwrap(), s.context(c2).pmf);
}

#[test]
fn shared_hidden_form_projects_the_context_component() {
    let s = catalog::r0_shape(2);
    let fc = to_fc_no_cim(&to_cim_no_fc(&build_gen(&s))).unwrap();
    assert!(!fc.hidden_dist_context_dependent());
    let supports: usize = to_cim_no_fc(&build_gen(&s)).hidden.iter().map(|h| h.len()).product();
    assert_eq!(fc.states.len(), supports);
    let c2 = s.find_context("2").unwrap();
    // Reading context 2 only ever consults contents 3 and 4.
    let Response::ContextReading(table) = &fc.response else { panic!() };
    let read: std::collections::BTreeSet<ContentId> =
        table.keys().filter(|k| k.2 == c2).map(|k| k.0).collect();
    assert_eq!(read.into_iter().collect::<Vec<_>>(), s.context(c2).contents);
    assert!(verify_witness(&fc, &s).unwrap().passed());
}

#[test]
fn consistified_models_use_one_function_per_context_type() {
    let s = catalog::r0_shape(2);
    let r = consistify(&s).consistified().cloned().unwrap();
    let forms = build_consistified_hvms(&r).unwrap();
    let sys = &r.system;
    let xi_32 = sys.find_content("3@2").unwrap();
    let bunch_2 = sys.find_context("ctx:2").unwrap();
    let connection_3 = sys.find_context("cnt:3").unwrap();
    assert_eq!(sys.context(bunch_2).contents, vec![xi_32, sys.find_content("4@2").unwrap()]);
    let expected_connection: Vec<ContentId> =
        ["3@1", "3@2", "3@3"].iter().map(|id| sys.find_content(id).unwrap()).collect();
    assert_eq!(sys.context(connection_3).contents, expected_connection);

    // Φ = (X, Y): bunch contexts read X, connection contexts read Y, so the
    // same content can be answered differently in its two contexts.
    let fc = &forms.fc_no_cim;
    assert!(!fc.hidden_dist_context_dependent());
    let differs = (0..fc.states.len())
        .any(|k| fc.outcome(xi_32, k, bunch_2) != fc.outcome(xi_32, k, connection_3));
    // X and Y are independent copies, so they disagree on some state exactly
    // when the variable is not deterministic.
    let spread = sys.variable_marginal(xi_32, bunch_2).unwrap().support_len() > 1;
    assert_eq!(differs, spread);

    // Ψ₁ on every bunch context, Ψ₂ on every connection, one response ψ.
    let cim = &forms.cim_no_fc;
    assert!(!cim.uses_context_in_response());
    for (pi, kind) in r.kinds.iter().enumerate() {
        let first_of_kind = r.kinds.iter().position(|k| std::mem::discriminant(k) == std::mem::discriminant(kind)).unwrap();
        assert_eq!(cim.hidden[pi], cim.hidden[first_of_kind]);
    }
    let first_bunch = r.kinds.iter().position(|k| matches!(k, ContextKind::Bunch(_))).unwrap();
    let first_connection = r.kinds.iter().position(|k| matches!(k, ContextKind::Connection(_))).unwrap();
    assert_ne!(cim.hidden[first_bunch], cim.hidden[first_connection]);

    for w in [fc, cim] {
        assert!(verify_witness(w, sys).unwrap().passed());
    }
    assert_eq!(forms.bell.is_some(), contextuality_core::find_reduced_coupling(sys).is_some());
}

#[test]
fn bell_form_exists_only_without_contextuality() {
    let classical = catalog::chsh([1, 1, 1, 1].map(|v| contextuality_core::Rational::from_integer(v.into()))).unwrap();
    let bell = contextuality_core::build_bell(&classical).expect("classical correlations admit a Bell model");
    assert!(verify_witness(&bell, &classical).unwrap().passed());
    let cim = to_cim_no_fc(&build_gen(&classical));
    assert!(verify_witness(&to_fc_no_cim(&cim).unwrap(), &classical).unwrap().passed());
    assert!(contextuality_core::build_bell(&catalog::pr_box()).is_none());
}
