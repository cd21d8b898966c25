use logaug::rules::{FlatAntecedent, FlatForm, Literal};
use logaug::soft_logic::{compile_distance, ideal_distance, DistanceForm};
use proptest::prelude::*;

fn flat(form: FlatForm, negs: &[bool]) -> FlatAntecedent {
    FlatAntecedent {
        form,
        literals: negs
            .iter()
            .enumerate()
            .map(|(i, &n)| Literal {
                predicate: format!("Z{i}"),
                args: Vec::new(),
                negated: n,
            })
            .collect(),
    }
}

/// The four rows written out directly, with negated inputs already flipped.
fn table_row(form: DistanceForm, z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let s: f64 = z.iter().sum();
    match form {
        DistanceForm::Conj => (s - n + 1.0).max(0.0),
        DistanceForm::Disj => s.min(1.0),
        DistanceForm::NegDisj => (1.0 - s).max(0.0),
        DistanceForm::NegConj => (n - s).min(1.0),
    }
}

fn effective(z: &[f64], negs: &[bool]) -> Vec<f64> {
    z.iter().zip(negs).map(|(&v, &n)| if n { 1.0 - v } else { v }).collect()
}

fn antecedent() -> impl Strategy<Value = (FlatForm, Vec<bool>)> {
    (
        prop_oneof![Just(FlatForm::Conjunction), Just(FlatForm::Disjunction)],
        prop::collection::vec(any::<bool>(), 1..=8),
    )
}

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, n)
}

#[test]
fn vertices_agree_with_the_indicator_up_to_six_mixed_literals() {
    for n in 1..=6usize {
        for pattern in 0..1u32 << n {
            let negs: Vec<bool> = (0..n).map(|i| pattern >> i & 1 == 1).collect();
            for form in [FlatForm::Conjunction, FlatForm::Disjunction] {
                let ante = flat(form, &negs);
                let d = compile_distance(&ante).unwrap();
                for v in 0..1u32 << n {
                    let zb: Vec<bool> = (0..n).map(|i| v >> i & 1 == 1).collect();
                    let z: Vec<f64> = zb.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                    assert_eq!(d.eval(&z).unwrap(), ideal_distance(&ante, &zb), "{ante} at {zb:?}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn compiled_distance_matches_the_table((form, negs) in antecedent(), seed in any::<u64>()) {
        let ante = flat(form, &negs);
        let d = compile_distance(&ante).unwrap();
        let z: Vec<f64> = (0..negs.len()).map(|i| ((seed >> (i * 7)) % 1000) as f64 / 999.0).collect();
        let all_negated = negs.len() > 1 && negs.iter().all(|&n| n);
        // Pushing an outer negation through: ⋀¬z = ¬⋁z and ⋁¬z = ¬⋀z.
        let expected = match (form, all_negated) {
            (FlatForm::Conjunction, false) => table_row(DistanceForm::Conj, &effective(&z, &negs)),
            (FlatForm::Disjunction, false) => table_row(DistanceForm::Disj, &effective(&z, &negs)),
            (FlatForm::Conjunction, true) => table_row(DistanceForm::NegDisj, &z),
            (FlatForm::Disjunction, true) => table_row(DistanceForm::NegConj, &z),
        };
        prop_assert!((d.eval(&z).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn distances_stay_in_the_unit_interval((form, negs) in antecedent(), z in unit_vec(8)) {
        let d = compile_distance(&flat(form, &negs)).unwrap();
        let v = d.eval(&z[..negs.len()]).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn distances_are_one_lipschitz_in_l1((form, negs) in antecedent(), z in unit_vec(8), w in unit_vec(8)) {
        let n = negs.len();
        let d = compile_distance(&flat(form, &negs)).unwrap();
        let l1: f64 = z[..n].iter().zip(&w[..n]).map(|(a, b)| (a - b).abs()).sum();
        let gap = (d.eval(&z[..n]).unwrap() - d.eval(&w[..n]).unwrap()).abs();
        prop_assert!(gap <= l1 + 1e-12);
    }

    #[test]
    fn raising_a_positive_literal_never_lowers_the_distance(
        (form, negs) in antecedent(), z in unit_vec(8), k in 0usize..8, bump in 0.0..1.0f64,
    ) {
        let n = negs.len();
        let k = k % n;
        let d = compile_distance(&flat(form, &negs)).unwrap();
        let mut up = z[..n].to_vec();
        // Moving the input towards "literal true" on either polarity.
        up[k] = if negs[k] { up[k] * (1.0 - bump) } else { up[k] + (1.0 - up[k]) * bump };
        prop_assert!(d.eval(&up).unwrap() >= d.eval(&z[..n]).unwrap() - 1e-12);
    }

    #[test]
    fn negated_rows_are_complements(z in prop::collection::vec(0.0..=1.0f64, 2..=8)) {
        let n = z.len();
        let conj = compile_distance(&flat(FlatForm::Conjunction, &vec![false; n])).unwrap();
        let disj = compile_distance(&flat(FlatForm::Disjunction, &vec![false; n])).unwrap();
        let neg_disj = compile_distance(&flat(FlatForm::Conjunction, &vec![true; n])).unwrap();
        let neg_conj = compile_distance(&flat(FlatForm::Disjunction, &vec![true; n])).unwrap();
        prop_assert_eq!(neg_disj.form, DistanceForm::NegDisj);
        prop_assert_eq!(neg_conj.form, DistanceForm::NegConj);
        prop_assert!((neg_disj.eval(&z).unwrap() - (1.0 - disj.eval(&z).unwrap())).abs() < 1e-12);
        prop_assert!((neg_conj.eval(&z).unwrap() - (1.0 - conj.eval(&z).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences_off_the_kinks((form, negs) in antecedent(), z in unit_vec(8)) {
        let n = negs.len();
        let d = compile_distance(&flat(form, &negs)).unwrap();
        let z = &z[..n];
        // Sum of effective inputs decides which piece is active; skip points near a kink.
        let s: f64 = d.negations().iter().zip(z).map(|(&neg, &v)| if neg { 1.0 - v } else { v }).sum();
        let kink = match d.form {
            DistanceForm::Conj => n as f64 - 1.0,
            DistanceForm::Disj => 1.0,
            DistanceForm::NegDisj => 1.0,
            DistanceForm::NegConj => n as f64 - 1.0,
        };
        prop_assume!((s - kink).abs() > 1e-3);
        let g = d.gradient(z).unwrap();
        let h = 1e-6;
        for i in 0..n {
            // Stay inside the unit interval.
            let (lo, hi) = ((z[i] - h).max(0.0), (z[i] + h).min(1.0));
            let (mut a, mut b) = (z.to_vec(), z.to_vec());
            a[i] = lo;
            b[i] = hi;
            let fd = (d.eval(&b).unwrap() - d.eval(&a).unwrap()) / (hi - lo);
            prop_assert!((fd - g[i]).abs() < 1e-6, "input {}: fd {} vs {}", i, fd, g[i]);
        }
    }
}
