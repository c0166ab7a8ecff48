//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use pagegnn::corpus::{
    fuzz_html, separable_corpus, structure_only_corpus, text_only_corpus, to_dataset,
};
use pagegnn::harness::train::{evaluate_pages, predict_pages, prepare_labelled};
use pagegnn::nn::{grad_check_report, Mode};
use pagegnn::{
    clean_html, compute_metrics, evaluate, load_model, page_to_record, parse_dom, readout,
    save_model, split_dataset, train, xpath_units, Aggregation, Dataset, EdgeList, GraphBatch,
    GraphTopology, MetricsReport, Model, ModelConfig, PageRecord, PipelineMode, Readout,
    SplitRatios, TagVocabulary, Vocabulary, XPathLimits, XPathUnits,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    run: fn() -> Outcome,
    budget: Duration,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fmt_metrics(m: &MetricsReport) -> String {
    format!(
        "acc {:.4} P {:.4} R {:.4} F1 {:.4}",
        m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
    )
}

fn within_unit(m: &MetricsReport) -> bool {
    [m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1]
        .iter()
        .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
}

/// 40 train / 20 test pages from the separable two-class corpus.
fn separable_split() -> (Dataset, Dataset) {
    let data = to_dataset(&separable_corpus(30, 0), XPathLimits::default()).unwrap();
    let s = split_dataset(
        &data,
        SplitRatios::new(2.0 / 3.0, 0.0, 1.0 / 3.0).unwrap(),
        0,
        true,
    )
    .unwrap();
    assert_eq!((s.train.len(), s.test.len()), (40, 20));
    (s.train, s.test)
}

fn a1_gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cfg = ModelConfig {
            seq_len: 24,
            text_width: 4,
            token_width: 3,
            unit_width: 2,
            max_depth: 4,
            graph_width: 4,
            gnn_layers: 2,
            aggregation: if seed % 2 == 0 {
                Aggregation::Mean
            } else {
                Aggregation::Sum
            },
            readout: Readout::Sum,
            dropout: 0.0,
            seed,
            ..ModelConfig::default()
        };
        let pages = to_dataset(
            &separable_corpus(2, seed),
            XPathLimits {
                max_depth: 4,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let vocab = Vocabulary::build(pages.records.iter().map(|r| r.tokens.as_slice()), 1);
        let tags = TagVocabulary::build(&pages.records);
        let mut model = Model::new(cfg, pages.labels.clone(), vocab, tags, &mut rng)
            .map_err(|e| e.to_string())?;
        // Move parameters off their initial values so no group sits at zero.
        for p in model.store.params_mut() {
            if p.kind.trainable() {
                for v in &mut p.value.data {
                    *v += rng.gen_range(-0.3..0.3);
                }
            }
        }
        let prepared = prepare_labelled(&model, &pages, None).map_err(|e| e.to_string())?;
        let refs: Vec<_> = prepared.iter().collect();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        model
            .compute_gradients(&refs, Mode::Train, &mut r)
            .map_err(|e| e.to_string())?;
        let template = model.clone();
        let loss = |s: &pagegnn::nn::ParameterStore| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let pass = template
                .forward_with_store(s, &refs, Mode::Train, &mut r)
                .unwrap();
            Model::loss(&pass, &refs).unwrap().0
        };
        let groups = ["text.", "xpath.", "gnn.", "pooler.", "mlp."];
        for g in groups {
            ensure(
                model.store.params().iter().any(|p| p.name.starts_with(g)),
                || format!("no {g} parameters"),
            )?;
        }
        let report = grad_check_report(&mut model.store, None, 1e-5, loss);
        checked += report.checked;
        if report.max_rel_err > worst {
            worst = report.max_rel_err;
        }
        ensure(report.max_rel_err < 1e-4, || {
            format!(
                "seed {seed}: max rel err {:.3e} at {:?}",
                report.max_rel_err, report.worst
            )
        })?;
    }
    Ok(format!(
        "10 instances, {checked} coordinates, max rel err {worst:.2e}"
    ))
}

fn a2_overfit() -> Outcome {
    let (train_set, test_set) = separable_split();
    let cfg = ModelConfig::default();
    let (model, history) =
        train(&train_set, &Dataset::default(), &cfg, None).map_err(|e| e.to_string())?;
    let first_perfect = history
        .epochs
        .iter()
        .find(|e| e.train.accuracy == 1.0)
        .map(|e| e.epoch);
    ensure(first_perfect.is_some(), || {
        "train accuracy never reached 1.0".into()
    })?;
    let test = evaluate(&model, &test_set, None, 32).map_err(|e| e.to_string())?;
    ensure(test.macro_f1 >= 0.95, || {
        format!("test {}", fmt_metrics(&test))
    })?;
    Ok(format!(
        "train acc 1.0 at epoch {}, test {}",
        first_perfect.unwrap() + 1,
        fmt_metrics(&test)
    ))
}

fn ablation_accuracy(
    train_set: &Dataset,
    test_set: &Dataset,
    mode: PipelineMode,
) -> Result<f64, String> {
    let cfg = ModelConfig {
        mode,
        ..ModelConfig::default()
    };
    let (model, _) =
        train(train_set, &Dataset::default(), &cfg, None).map_err(|e| e.to_string())?;
    Ok(evaluate(&model, test_set, None, 32)
        .map_err(|e| e.to_string())?
        .accuracy)
}

fn a3_ablation() -> Outcome {
    let limits = XPathLimits::default();
    let s_train = to_dataset(&structure_only_corpus(20, 1), limits).unwrap();
    let s_test = to_dataset(&structure_only_corpus(10, 2), limits).unwrap();
    let t_train = to_dataset(&text_only_corpus(20, 3), limits).unwrap();
    let t_test = to_dataset(&text_only_corpus(10, 4), limits).unwrap();

    let s_graph = ablation_accuracy(&s_train, &s_test, PipelineMode::GraphOnly)?;
    let s_text = ablation_accuracy(&s_train, &s_test, PipelineMode::TextOnly)?;
    let t_text = ablation_accuracy(&t_train, &t_test, PipelineMode::TextOnly)?;
    let t_graph = ablation_accuracy(&t_train, &t_test, PipelineMode::GraphOnly)?;
    let summary = format!(
        "structure corpus: graph-only {s_graph:.4}, text-only {s_text:.4}; \
         text corpus: text-only {t_text:.4}, graph-only {t_graph:.4}"
    );
    ensure(
        s_graph >= 0.9 && s_text <= 0.6 && t_text >= 0.9 && t_graph <= 0.6,
        || summary.clone(),
    )?;
    Ok(summary)
}

fn a4_max_readout() -> Outcome {
    let (train_set, test_set) = separable_split();
    let cfg = ModelConfig {
        readout: Readout::Max,
        ..ModelConfig::default()
    };
    let (model, history) =
        train(&train_set, &Dataset::default(), &cfg, None).map_err(|e| e.to_string())?;
    ensure(
        history.epochs.iter().all(|e| e.train_loss.is_finite()),
        || "non-finite loss".into(),
    )?;
    let test = evaluate(&model, &test_set, None, 32).map_err(|e| e.to_string())?;
    ensure(within_unit(&test), || {
        format!("out of range: {}", fmt_metrics(&test))
    })?;
    Ok(format!("max readout test {}", fmt_metrics(&test)))
}

/// Relabel the nodes of a page by `perm` (old index to new index).
fn permute_page(r: &PageRecord, perm: &[usize]) -> PageRecord {
    let mut nodes = vec![XPathUnits::default(); r.nodes.len()];
    for (old, n) in r.nodes.iter().enumerate() {
        nodes[perm[old]] = n.clone();
    }
    let edges = r
        .edges
        .edges
        .iter()
        .map(|&(s, d)| (perm[s], perm[d]))
        .collect();
    PageRecord {
        nodes,
        edges: EdgeList { edges },
        ..r.clone()
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn a5_invariants() -> Outcome {
    let (train_set, test_set) = separable_split();
    let cfg = ModelConfig {
        epochs: 3,
        ..ModelConfig::default()
    };
    let (model, _) =
        train(&train_set, &Dataset::default(), &cfg, None).map_err(|e| e.to_string())?;

    // Readout permutation invariance on the graph encoder.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut perm_err = 0.0f64;
    for readout_kind in [Readout::Sum, Readout::Max] {
        for record in test_set.records.iter().take(6) {
            let mut perm: Vec<usize> = (0..record.nodes.len()).collect();
            rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
            let permuted = permute_page(record, &perm);
            let embed = |r: &PageRecord| -> Vec<f64> {
                let page = model.prepare(r, None).unwrap();
                let xpath = model.xpath.as_ref().unwrap();
                let encoder = model.graph.as_ref().unwrap();
                let mut r0 = ChaCha8Rng::seed_from_u64(0);
                let (features, _) = xpath
                    .forward(&model.store, &page.nodes, Mode::Eval, &mut r0)
                    .unwrap();
                let topology = GraphTopology::single(page.nodes.len(), &page.edges).unwrap();
                let batch = GraphBatch { features, topology };
                let (h, _) = encoder.forward(&model.store, &batch).unwrap();
                readout(&h, &batch.topology, readout_kind).unwrap().0.data
            };
            perm_err = perm_err.max(max_abs_diff(&embed(record), &embed(&permuted)));
        }
    }
    ensure(perm_err <= 1e-9, || {
        format!("permutation deviation {perm_err:.3e}")
    })?;

    // Disjoint-union batching against one page at a time.
    let pages = prepare_labelled(&model, &test_set, None).map_err(|e| e.to_string())?;
    let batched = predict_pages(&model, &pages, pages.len()).map_err(|e| e.to_string())?;
    let single = predict_pages(&model, &pages, 1).map_err(|e| e.to_string())?;
    let batch_err = batched
        .iter()
        .zip(&single)
        .map(|(a, b)| max_abs_diff(&a.probs, &b.probs))
        .fold(0.0, f64::max);
    ensure(batch_err <= 1e-9, || {
        format!("batch deviation {batch_err:.3e}")
    })?;

    // Evaluation metrics independent of batch size.
    let m1 = evaluate_pages(&model, &pages, 1).map_err(|e| e.to_string())?;
    let m32 = evaluate_pages(&model, &pages, 32).map_err(|e| e.to_string())?;
    let metric_err = [
        (m1.accuracy - m32.accuracy).abs(),
        (m1.macro_precision - m32.macro_precision).abs(),
        (m1.macro_recall - m32.macro_recall).abs(),
        (m1.macro_f1 - m32.macro_f1).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    ensure(metric_err <= 1e-9, || {
        format!("metric deviation {metric_err:.3e}")
    })?;
    Ok(format!(
        "permutation {perm_err:.1e}, batching {batch_err:.1e}, eval batch size {metric_err:.1e}"
    ))
}

fn a6_metrics() -> Outcome {
    let m = compute_metrics(&[vec![2, 1], vec![0, 3]]).map_err(|e| e.to_string())?;
    let expected = [0.8333, 0.8750, 0.8333, 0.8286];
    let got = [m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1];
    ensure(
        got.iter().zip(expected).all(|(g, e)| (g - e).abs() <= 5e-5),
        || format!("got {}", fmt_metrics(&m)),
    )?;
    Ok(fmt_metrics(&m))
}

fn a7_fuzz() -> Outcome {
    let limits = XPathLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parsed = 0;
    let mut empty = 0;
    let mut records = Vec::new();
    for i in 0..1000 {
        let html = fuzz_html(&mut rng);
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let tree = match parse_dom(&clean_html(&html)) {
                Ok(t) => t,
                Err(pagegnn::Error::EmptyDocument) => return Ok(None),
                Err(e) => return Err(format!("input {i}: {e}")),
            };
            let edges = pagegnn::build_edge_list(&tree);
            if edges.edges.len() != 2 * (tree.len() - 1) {
                return Err(format!(
                    "input {i}: {} edges for {} nodes",
                    edges.edges.len(),
                    tree.len()
                ));
            }
            for n in 0..tree.len() {
                let u = xpath_units(&tree, n, limits).map_err(|e| e.to_string())?;
                if u.len() > 15 {
                    return Err(format!("input {i}: xpath of {} units", u.len()));
                }
            }
            let label = if i % 2 == 0 { "even" } else { "odd" };
            Ok(Some(
                page_to_record(format!("fuzz-{i}"), &html, label, limits)
                    .map_err(|e| e.to_string())?,
            ))
        }));
        match outcome {
            Err(_) => return Err(format!("parser panicked on input {i}: {html:?}")),
            Ok(Err(e)) => return Err(e),
            Ok(Ok(None)) => empty += 1,
            Ok(Ok(Some(r))) => {
                parsed += 1;
                if records.len() < 40 {
                    records.push(r);
                }
            }
        }
    }

    // Degenerate pages: no text at all, and a lone root node.
    let textless = page_to_record("textless", "<div><img><br></div>", "even", limits)
        .map_err(|e| e.to_string())?;
    ensure(textless.tokens.is_empty(), || {
        "textless page produced tokens".into()
    })?;
    records.push(textless);
    let lone =
        page_to_record("lone-root", "<html></html>", "odd", limits).map_err(|e| e.to_string())?;
    ensure(lone.nodes.len() == 1 && lone.edges.edges.is_empty(), || {
        format!(
            "expected a single-node page, got {} nodes",
            lone.nodes.len()
        )
    })?;
    records.push(lone);
    let data = Dataset::new(records);
    let cfg = ModelConfig {
        epochs: 2,
        text_width: 16,
        token_width: 16,
        graph_width: 16,
        ..ModelConfig::default()
    };
    let (model, _) = train(&data, &Dataset::default(), &cfg, None).map_err(|e| e.to_string())?;
    let m = evaluate(&model, &data, None, 8).map_err(|e| e.to_string())?;
    ensure(within_unit(&m), || {
        format!("metrics out of range: {}", fmt_metrics(&m))
    })?;
    Ok(format!(
        "1000 inputs: {parsed} parsed, {empty} empty, 0 panics; degenerate-page pipeline {}",
        fmt_metrics(&m)
    ))
}

fn a8_determinism() -> Outcome {
    let (train_set, test_set) = separable_split();
    let cfg = ModelConfig {
        epochs: 5,
        ..ModelConfig::default()
    };
    let (m1, h1) = train(&train_set, &test_set, &cfg, None).map_err(|e| e.to_string())?;
    let (m2, h2) = train(&train_set, &test_set, &cfg, None).map_err(|e| e.to_string())?;
    let bits = |h: &pagegnn::History| -> Vec<u64> {
        h.epochs
            .iter()
            .flat_map(|e| {
                let v = e.val.as_ref().unwrap();
                [
                    e.train_loss,
                    e.train.accuracy,
                    e.train.macro_f1,
                    v.accuracy,
                    v.macro_f1,
                ]
            })
            .map(f64::to_bits)
            .collect()
    };
    ensure(bits(&h1) == bits(&h2) && h1 == h2, || {
        "histories differ".into()
    })?;
    let same_params = m1
        .store
        .params()
        .iter()
        .zip(m2.store.params())
        .all(|(a, b)| {
            a.value
                .data
                .iter()
                .map(|v| v.to_bits())
                .eq(b.value.data.iter().map(|v| v.to_bits()))
        });
    ensure(same_params, || "parameters differ".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.ckpt");
    save_model(&m1, &path).map_err(|e| e.to_string())?;
    let loaded = load_model(&path).map_err(|e| e.to_string())?;
    let before = evaluate(&m1, &test_set, None, 8).map_err(|e| e.to_string())?;
    let after = evaluate(&loaded, &test_set, None, 8).map_err(|e| e.to_string())?;
    ensure(before == after, || {
        "evaluate changed after save/load".into()
    })?;
    let pages = prepare_labelled(&m1, &test_set, None).map_err(|e| e.to_string())?;
    let p_before = predict_pages(&m1, &pages, 8).map_err(|e| e.to_string())?;
    let p_after = predict_pages(&loaded, &pages, 8).map_err(|e| e.to_string())?;
    let identical = p_before.iter().zip(&p_after).all(|(a, b)| {
        a.probs
            .iter()
            .map(|v| v.to_bits())
            .eq(b.probs.iter().map(|v| v.to_bits()))
    });
    ensure(identical, || "probabilities changed after save/load".into())?;
    Ok(format!(
        "{} epochs bitwise identical; reload reproduces {}",
        h1.epochs.len(),
        fmt_metrics(&after)
    ))
}

fn main() {
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with('A'))
        .collect();
    let c = |id, name, run, secs| Criterion {
        id,
        name,
        run,
        budget: Duration::from_secs(secs),
    };
    // A3 covers two corpora with five minutes each.
    let criteria = [
        c("A1", "gradient suite", a1_gradients as fn() -> Outcome, 120),
        c("A2", "separable-corpus overfit", a2_overfit, 300),
        c("A3", "ablation direction", a3_ablation, 600),
        c("A4", "max readout", a4_max_readout, 300),
        c(
            "A5",
            "permutation and batching invariants",
            a5_invariants,
            300,
        ),
        c("A6", "metrics oracle", a6_metrics, 1),
        c("A7", "fuzzed structural invariants", a7_fuzz, 300),
        c("A8", "determinism and persistence", a8_determinism, 300),
    ];
    let mut failures = 0;
    for Criterion {
        id,
        name,
        run,
        budget,
    } in criteria
    {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|msg| {
            if elapsed > budget {
                Err(format!("{msg}; took {elapsed:.1?}, budget {budget:?}"))
            } else {
                Ok(msg)
            }
        });
        match result {
            Ok(msg) => println!("{id} PASS {name} ({elapsed:.1?}): {msg}"),
            Err(msg) => {
                failures += 1;
                println!("{id} FAIL {name} ({elapsed:.1?}): {msg}");
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
