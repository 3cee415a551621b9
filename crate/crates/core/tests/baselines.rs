mod common;

use common::*;
use fssl_core::baselines::{fedavg_local, fedprox_local, Baseline, BaselineConfig, BaselineKind};
use fssl_core::data::{apply_annotation, AnnotationPattern, ClientAnnotation, Dataset};
use fssl_core::federation::{ClientContext, Experiment, Strategy};
use fssl_core::config::StrategyName;
use fssl_core::seed;

#[test]
fn fedprox_with_zero_mu_is_fedavg() {
    let exp = Experiment::prepare(&tiny_config("fedavg")).unwrap();
    let global = exp.initial_state().unwrap().supervised;
    let schedule = exp.config.schedule();
    for client in exp.clients.iter().filter(|c| c.n_labeled() > 0) {
        let (x, y) = (client.labeled_features(), client.labels());
        let a = fedavg_local(x, y, &global, &schedule, &mut seed::rng(4, &[])).unwrap();
        let b = fedprox_local(x, y, &global, 0.0, &schedule, &mut seed::rng(4, &[])).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    let mut cfg = tiny_config("fedavg");
    let avg = Experiment::prepare(&cfg).unwrap().run().unwrap();
    cfg.strategy = StrategyName::FedProx;
    cfg.fedprox_mu = 0.0;
    let prox = Experiment::prepare(&cfg).unwrap().run().unwrap();
    assert_eq!(avg.metrics, prox.metrics);
    assert_eq!(avg.final_state, prox.final_state);
}

#[test]
fn fedpseudo_ignores_withheld_labels() {
    let original = fssl_core::data::synth_gaussian_task(3, 4, 30, 0.4, 8).unwrap();
    let parts = vec![(0..original.len()).collect::<Vec<_>>()];
    let pattern = AnnotationPattern::new(vec![ClientAnnotation::Partial(0.3)]).unwrap();
    let client = &apply_annotation(&parts, &original, &pattern, 1).unwrap()[0];

    // Same features, scrambled labels on every sample the client cannot see.
    let mut labels = original.labels().to_vec();
    for &i in client.unlabeled_source() {
        labels[i] = (labels[i] + 1) % 3;
    }
    let scrambled = Dataset::new(original.features().clone(), labels, 3).unwrap();
    let twin = &apply_annotation(&parts, &scrambled, &pattern, 1).unwrap()[0];
    assert_eq!(client.labels(), twin.labels());
    assert_eq!(client.unlabeled_features(), twin.unlabeled_features());

    let mut cfg = tiny_config("fedpseudo");
    cfg.pseudo_threshold = 0.01;
    let exp = Experiment::prepare(&cfg).unwrap();
    let mut state = exp.initial_state().unwrap();
    state.supervised = fssl_core::nn::ModelParams::init_glorot(
        fssl_core::nn::ModelArch::new(vec![4, 6, 3], exp.dual_arch.activation()).unwrap(),
        &mut seed::rng(3, &[]),
    );
    let strategy = Baseline::new(
        BaselineConfig {
            kind: BaselineKind::FedPseudo,
            ..cfg.baseline_config().unwrap()
        },
        cfg.schedule(),
    )
    .unwrap();
    let ctx = ClientContext {
        round: 0,
        client_id: 0,
        run_seed: 1,
    };
    let a = strategy.local_update(&ctx, client, &state).unwrap();
    let b = strategy.local_update(&ctx, twin, &state).unwrap();
    assert!(a.pseudo_labels.as_ref().is_some_and(|r| !r.labels.is_empty()));
    assert_eq!(a, b);
}

#[test]
fn supervised_baselines_skip_unlabeled_clients() {
    for strategy in ["fedavg", "fedprox", "fedpseudo"] {
        let exp = Experiment::prepare(&tiny_config(strategy)).unwrap();
        let state = exp.initial_state().unwrap();
        for client in exp.clients.iter().filter(|c| c.n_labeled() == 0) {
            let ctx = ClientContext {
                round: 0,
                client_id: client.client_id(),
                run_seed: 0,
            };
            let u = exp.strategy.local_update(&ctx, client, &state).unwrap();
            assert!(u.supervised.is_none() && u.unsupervised.is_none(), "{strategy}");
        }
    }
}
