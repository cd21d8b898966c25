mod common;

use common::*;
use logaug::graph::Op;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(seed: u64, detach: bool, graphs: usize) -> Coverage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = Coverage::default();
    let mut done = 0;
    while done < graphs {
        let net = layered_net(&mut rng);
        let (src, cov) = random_layered_rules(&mut rng, detach);
        let g = augment_layered(&net, &src);
        let Some(outcome) = fd_check_random_point(&mut rng, &g, 1e-3) else {
            continue;
        };
        if let Err(m) = outcome {
            panic!("gradient mismatch {m:?} on\n{src}");
        }
        total.negated_consequent |= cov.negated_consequent;
        total.auxiliary |= cov.auxiliary;
        total.chained |= cov.chained;
        done += 1;
    }
    total
}

#[test]
fn backprop_through_distances_matches_finite_differences() {
    let cov = run(11, false, 40);
    assert!(cov.negated_consequent && cov.auxiliary && cov.chained, "{cov:?}");
}

#[test]
fn stop_gradient_mode_matches_frozen_finite_differences() {
    let cov = run(12, true, 40);
    assert!(cov.negated_consequent && cov.auxiliary, "{cov:?}");
}

#[test]
fn detached_rules_insert_stop_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = layered_net(&mut rng);
    let src = "pred A(1) neuron \"a[0,{0}]\"\npred Bp(1) neuron \"b'[0,{0}]\"\n";
    let attached = augment_layered(&net, &format!("{src}forall i in I: A(i) -> Bp(i)\n"));
    let detached = augment_layered(&net, &format!("{src}forall i in I: A(i) -> Bp(i) @detach\n"));
    let stops = |g: &logaug::graph::ComputationGraph| g.nodes().iter().filter(|r| r.op == Op::StopGradient).count();
    assert_eq!(stops(&attached), 0);
    assert!(stops(&detached) > 0);
}

#[test]
fn frozen_reference_differs_from_backprop_when_attached() {
    // Sanity check on the oracle: freezing matters only when stop-gradients exist.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = layered_net(&mut rng);
    let src = "pred A(1) neuron \"a[0,{0}]\"\npred Bp(1) neuron \"b'[0,{0}]\"\nforall i in I: A(i) -> Bp(i) @rho=2 @detach\n";
    let g = augment_layered(&net, src);
    let feed = logaug::runtime::Feed::new();
    let params = random_params(&mut rng, &g);
    // Against the unfrozen graph the detached gradient must disagree somewhere.
    assert!(check_gradients(&g, &g, &params, &feed).is_err());
    let frozen = freeze_stop_gradients(&g, &params, &feed);
    assert!(check_gradients(&g, &frozen, &params, &feed).is_ok());
}
