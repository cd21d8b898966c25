use logaug::rules::{
    contrapositive, decompose_consequent, negation_normal_form, normalize_antecedent, parse_rules, Expr, Literal,
    Rho, RuleStatement,
};
use proptest::prelude::*;

const ATOMS: [&str; 5] = ["A", "B", "C", "D", "E"];
const DECLS: &str = "\
pred A(0) neuron \"a\"
pred B(0) neuron \"b\"
pred C(0) neuron \"c\"
pred D(0) neuron \"d\"
pred E(0) neuron \"e\"
pred Q(0) neuron \"q'\"
pred R(0) neuron \"r'\"
";

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = (0..ATOMS.len(), any::<bool>()).prop_map(|(i, neg)| {
        Expr::Lit(Literal {
            negated: neg,
            ..Literal::new(ATOMS[i], Vec::new())
        })
    });
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::not),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::And),
            prop::collection::vec(inner, 2..=3).prop_map(Expr::Or),
        ]
    })
}

/// Truth of a literal's atom under assignment bits, keyed by predicate name.
fn atom(bits: u32) -> impl FnMut(&Literal) -> bool {
    move |l: &Literal| {
        let i = match l.predicate.as_str() {
            "Q" => 5,
            "R" => 6,
            p => ATOMS.iter().position(|a| *a == p).expect("known atom"),
        };
        bits >> i & 1 == 1
    }
}

fn has_not(e: &Expr) -> bool {
    match e {
        Expr::Lit(_) => false,
        Expr::Not(_) => true,
        Expr::And(es) | Expr::Or(es) => es.iter().any(has_not),
    }
}

fn implies(l: bool, r: bool) -> bool {
    !l || r
}

proptest! {
    #[test]
    fn printing_and_reparsing_preserves_meaning(e in expr(), neg in any::<bool>()) {
        let q = if neg { "!Q" } else { "Q" };
        let src = format!("{DECLS}{e} -> {q}\n");
        let parsed = parse_rules(&src).unwrap();
        let stmt = &parsed.statements[0];
        for bits in 0..1u32 << 5 {
            prop_assert_eq!(stmt.antecedent.eval(&mut atom(bits)), e.eval(&mut atom(bits)));
        }
        // The printed form is a fixed point of parse ∘ print.
        let again = parse_rules(&parsed.to_string()).unwrap();
        prop_assert_eq!(again.without_lines(), parsed.without_lines());
    }

    #[test]
    fn negation_normal_form_is_equivalent_and_negation_free(e in expr()) {
        let n = negation_normal_form(&e);
        prop_assert!(!has_not(&n));
        for bits in 0..1u32 << 5 {
            prop_assert_eq!(n.eval(&mut atom(bits)), e.eval(&mut atom(bits)));
        }
    }

    #[test]
    fn normalized_antecedent_is_equivalent(e in expr()) {
        let stmt = RuleStatement::implication(Vec::new(), e.clone(), Expr::lit("Q"));
        let norm = normalize_antecedent(&stmt);
        for bits in 0..1u32 << 5 {
            prop_assert_eq!(norm.eval(&mut atom(bits)), e.eval(&mut atom(bits)), "{}", norm);
        }
        // Each auxiliary body only mentions atoms and earlier auxiliaries.
        for (k, d) in norm.aux_definitions.iter().enumerate() {
            for l in &d.body.literals {
                let is_atom = ATOMS.contains(&l.predicate.as_str());
                let earlier = norm.aux_definitions[..k].iter().any(|p| p.literal.predicate == l.predicate);
                prop_assert!(is_atom || earlier, "{} in {}", l, norm);
            }
        }
    }

    #[test]
    fn contrapositive_is_logically_equivalent(e in expr(), neg in any::<bool>()) {
        let q = Expr::Lit(Literal { negated: neg, ..Literal::new("Q", Vec::new()) });
        let stmt = RuleStatement::implication(Vec::new(), e.clone(), q.clone());
        let Ok(flipped) = contrapositive(&stmt) else {
            return Ok(());
        };
        for bits in 0..1u32 << 6 {
            let original = implies(e.eval(&mut atom(bits)), q.eval(&mut atom(bits)));
            let other = implies(flipped.antecedent.eval(&mut atom(bits)), flipped.consequent.eval(&mut atom(bits)));
            prop_assert_eq!(original, other);
        }
    }

    #[test]
    fn decomposed_consequents_are_jointly_equivalent(e in expr(), nq in any::<bool>(), nr in any::<bool>()) {
        let lit = |p: &str, n: bool| Expr::Lit(Literal { negated: n, ..Literal::new(p, Vec::new()) });
        let cons = Expr::And(vec![lit("Q", nq), lit("R", nr)]);
        let stmt = RuleStatement::implication(Vec::new(), e.clone(), cons.clone());
        let parts = decompose_consequent(&stmt).unwrap();
        prop_assert_eq!(parts.len(), 2);
        for bits in 0..1u32 << 7 {
            let whole = implies(e.eval(&mut atom(bits)), cons.eval(&mut atom(bits)));
            let split = parts
                .iter()
                .all(|p| implies(p.antecedent.eval(&mut atom(bits)), p.consequent.eval(&mut atom(bits))));
            prop_assert_eq!(whole, split);
        }
    }

    #[test]
    fn rho_text_round_trips(v in 0.0..1e6f64) {
        let r = Rho::Value(v);
        prop_assert_eq!(r.to_string().parse::<Rho>().unwrap(), r);
    }
}

#[test]
fn rho_parsing_rejects_negative_and_non_finite() {
    assert_eq!("HARD".parse::<Rho>().unwrap(), Rho::Hard);
    for bad in ["-1", "nan", "inf", "", "soft"] {
        assert!(bad.parse::<Rho>().is_err(), "{bad}");
    }
}

#[test]
fn shipped_programs_round_trip() {
    for (name, _, src) in logaug::tasks::SHIPPED_RULES {
        let p = parse_rules(src).unwrap();
        let again = parse_rules(&p.to_string()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again.without_lines(), p.without_lines(), "{name}");
    }
}
