//! The remote client against the bundled stub service.

mod common;

use common::planted_table_task;
use scentprompt::benchmark::{evaluate_task, layer_sweep};
use scentprompt::embedding::stub::{StubBehavior, StubServer};
use scentprompt::embedding::{embed_descriptors, EmbedderConfig, Pooling, Prompt};

fn descriptors() -> Vec<String> {
    common::strings(&["musky", "butter popcorn", "wet dog", "amber"])
}

#[test]
fn client_pooling_matches_server_pooling() {
    let server = StubServer::start(StubBehavior::default()).unwrap();
    let client = StubServer::start(StubBehavior {
        client_pooling: true,
        ..StubBehavior::default()
    })
    .unwrap();
    let prompt = Prompt::parse("smells [blank] and sweet").unwrap();
    for pooling in [Pooling::AllTokens, Pooling::DescriptorOnly] {
        let embed = |url: &str| {
            let mut cfg = EmbedderConfig::remote(url, 2);
            cfg.pooling = pooling;
            embed_descriptors(&cfg, &prompt, &descriptors()).unwrap()
        };
        let (a, b) = (embed(server.url()), embed(client.url()));
        assert_eq!(a.labels(), b.labels());
        for (x, y) in a.rows().iter().flatten().zip(b.rows().iter().flatten()) {
            assert!((x - y).abs() < 1e-12, "{pooling:?}: {x} vs {y}");
        }
    }
}

#[test]
fn descriptor_only_ignores_context() {
    let server = StubServer::start(StubBehavior::default()).unwrap();
    let mut cfg = EmbedderConfig::remote(server.url(), 0);
    cfg.pooling = Pooling::DescriptorOnly;
    let a = embed_descriptors(&cfg, &Prompt::parse("[blank]").unwrap(), &descriptors()).unwrap();
    let b = embed_descriptors(
        &cfg,
        &Prompt::parse("a [blank] note").unwrap(),
        &descriptors(),
    )
    .unwrap();
    assert_eq!(a.rows(), b.rows());
}

#[test]
fn layer_sweep_matches_single_layer_runs() {
    let server = StubServer::start(StubBehavior::default()).unwrap();
    let (_, task) = planted_table_task(4);
    let cfg = EmbedderConfig::remote(server.url(), 0);
    let prompt = Prompt::parse("[blank]").unwrap();
    let layers = [3, 0, 7];
    let sweep = layer_sweep(&cfg, &prompt, &task, &layers).unwrap();
    assert_eq!(sweep.iter().map(|(l, _)| *l).collect::<Vec<_>>(), layers);
    for (layer, score) in &sweep {
        let one = evaluate_task(
            &EmbedderConfig::remote(server.url(), *layer),
            &prompt,
            &task,
        )
        .unwrap();
        assert_eq!(one.score, score.score);
    }
    // Layers see different vectors, so the curve is not flat.
    assert_ne!(sweep[0].1.score, sweep[1].1.score);
}

#[test]
fn layer_sweep_needs_remote_backend() {
    let (_, task) = planted_table_task(4);
    let err =
        layer_sweep(&EmbedderConfig::random(0, 8), &Prompt::empty(), &task, &[1]).unwrap_err();
    assert_eq!(err.class(), scentprompt::ErrorClass::Usage);
}
