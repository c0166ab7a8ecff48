use pagegnn::corpus::{separable_corpus, to_dataset};
use pagegnn::harness::train::{predict_pages, prepare_labelled};
use pagegnn::{
    evaluate, predict_html, train, Dataset, Error, ModelConfig, PageRecord, PipelineMode,
    XPathLimits,
};

fn small(mode: PipelineMode, epochs: usize) -> ModelConfig {
    ModelConfig {
        text_width: 16,
        token_width: 16,
        graph_width: 16,
        unit_width: 8,
        gnn_layers: 2,
        lr: 5e-3,
        epochs,
        mode,
        ..ModelConfig::default()
    }
}

fn corpus(per_class: usize, seed: u64) -> (Vec<pagegnn::corpus::SyntheticPage>, Dataset) {
    let pages = separable_corpus(per_class, seed);
    let data = to_dataset(&pages, XPathLimits::default()).unwrap();
    (pages, data)
}

#[test]
fn zero_epochs_returns_initial_model() {
    let (_, data) = corpus(3, 0);
    let cfg = small(PipelineMode::Fused, 0);
    let (a, history) = train(&data, &Dataset::default(), &cfg, None).unwrap();
    assert!(history.epochs.is_empty());
    assert_eq!(history.best_epoch, None);
    let (b, _) = train(&data, &Dataset::default(), &cfg, None).unwrap();
    for (p, q) in a.store.params().iter().zip(b.store.params()) {
        assert_eq!(p.value, q.value);
    }
}

#[test]
fn trained_model_recovers_training_labels() {
    let (pages, data) = corpus(6, 1);
    let (model, history) = train(
        &data,
        &Dataset::default(),
        &small(PipelineMode::Fused, 40),
        None,
    )
    .unwrap();
    assert!(history.epochs.iter().any(|e| e.train.accuracy == 1.0));
    for p in &pages {
        let (label, pred) = predict_html(&model, &p.id, &p.html, None).unwrap();
        assert_eq!(label, p.label, "{}", p.id);
        let again = predict_html(&model, &p.id, &p.html, None).unwrap().1;
        assert_eq!(pred, again);
        assert!((pred.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(matches!(
        predict_html(&model, "blank", " \n\t ", None),
        Err(Error::EmptyDocument)
    ));
}

#[test]
fn selection_keeps_best_validation_epoch() {
    let (_, train_set) = corpus(5, 2);
    let (_, val_set) = corpus(3, 3);
    let (model, history) =
        train(&train_set, &val_set, &small(PipelineMode::Fused, 12), None).unwrap();
    let best = history.best_epoch.unwrap();
    let best_f1 = history.epochs[best].val.as_ref().unwrap().macro_f1;
    for e in &history.epochs[..best] {
        assert!(e.val.as_ref().unwrap().macro_f1 < best_f1);
    }
    for e in &history.epochs[best..] {
        assert!(e.val.as_ref().unwrap().macro_f1 <= best_f1);
    }
    let m = evaluate(&model, &val_set, None, 4).unwrap();
    assert_eq!(m.macro_f1, best_f1);
}

#[test]
fn unknown_evaluation_label_is_rejected() {
    let (_, data) = corpus(3, 4);
    let (model, _) = train(
        &data,
        &Dataset::default(),
        &small(PipelineMode::Fused, 1),
        None,
    )
    .unwrap();
    let mut other = data.records[0].clone();
    other.label = "elsewhere".into();
    let err = evaluate(&model, &Dataset::new(vec![other]), None, 4).unwrap_err();
    assert!(matches!(err, Error::Dataset(_)), "{err}");
}

fn with_text(r: &PageRecord, tokens: &[&str]) -> PageRecord {
    PageRecord {
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        ..r.clone()
    }
}

#[test]
fn ablation_modes_ignore_the_other_input() {
    let (_, data) = corpus(4, 5);
    let (graph_model, _) = train(
        &data,
        &Dataset::default(),
        &small(PipelineMode::GraphOnly, 3),
        None,
    )
    .unwrap();
    let (text_model, _) = train(
        &data,
        &Dataset::default(),
        &small(PipelineMode::TextOnly, 3),
        None,
    )
    .unwrap();

    let base = &data.records[0];
    let retexted = with_text(base, &["ledger", "budget", "budget", "zzz"]);
    let restructured = PageRecord {
        nodes: data.records[1].nodes.clone(),
        edges: data.records[1].edges.clone(),
        ..base.clone()
    };
    let probs =
        |m: &pagegnn::Model, r: &PageRecord| m.predict(&m.prepare(r, None).unwrap()).unwrap().probs;
    assert_eq!(probs(&graph_model, base), probs(&graph_model, &retexted));
    assert_eq!(probs(&text_model, base), probs(&text_model, &restructured));
    assert_ne!(
        probs(&graph_model, base),
        probs(&graph_model, &restructured)
    );
}

#[test]
fn predictions_do_not_depend_on_batch_composition() {
    let (_, data) = corpus(5, 6);
    let (model, _) = train(
        &data,
        &Dataset::default(),
        &small(PipelineMode::Fused, 4),
        None,
    )
    .unwrap();
    let pages = prepare_labelled(&model, &data, None).unwrap();
    let all = predict_pages(&model, &pages, 64).unwrap();
    let mut reversed: Vec<_> = pages.clone();
    reversed.reverse();
    let mut back = predict_pages(&model, &reversed, 3).unwrap();
    back.reverse();
    for (a, b) in all.iter().zip(&back) {
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn graph_training_needs_two_row_batches() {
    let (_, data) = corpus(3, 7);
    let cfg = ModelConfig {
        batch_size: 1,
        ..small(PipelineMode::Fused, 1)
    };
    assert!(matches!(
        train(&data, &Dataset::default(), &cfg, None),
        Err(Error::Config(_))
    ));
    let cfg = ModelConfig {
        batch_size: 1,
        ..small(PipelineMode::TextOnly, 1)
    };
    assert!(train(&data, &Dataset::default(), &cfg, None).is_ok());
}
