mod common;

use docadapt_core::neural::gradcheck::check_gradients;
use docadapt_core::probes::{probe_loss, Probe};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn check(probe: Probe) {
    for seed in 0..5 {
        let (model, sample) = common::probe_setup(seed);
        let checks = check_gradients(&model.store, probe.groups(), 3, H, seed, |s| {
            probe_loss(&model, probe, &sample, s).unwrap()
        });
        assert!(!checks.is_empty(), "{} has no parameters", probe.name());
        assert!(
            checks.iter().any(|c| c.max_abs_grad > 0.0),
            "{} seed {seed}: all sampled gradients are zero",
            probe.name()
        );
        for c in &checks {
            assert!(
                c.max_rel_err < TOL,
                "{} seed {seed}: {} relative error {:.3e}",
                probe.name(),
                c.name,
                c.max_rel_err
            );
        }
    }
}

#[test]
fn l2v_projection() {
    check(Probe::L2vProjection);
}

#[test]
fn token_encoder() {
    check(Probe::TokenEncoder);
}

#[test]
fn fusion() {
    check(Probe::Fusion);
}

#[test]
fn joint_encoder() {
    check(Probe::JointEncoder);
}

#[test]
fn alignment_head() {
    check(Probe::AlignmentHead);
}

#[test]
fn token_decoder() {
    check(Probe::TokenDecoder);
}

#[test]
fn entity_decoder() {
    check(Probe::EntityDecoder);
}

#[test]
fn tag_head() {
    check(Probe::TagHead);
}

#[test]
fn retrieval_head() {
    check(Probe::RetrievalHead);
}

#[test]
fn pointer_net() {
    check(Probe::PointerNet);
}
