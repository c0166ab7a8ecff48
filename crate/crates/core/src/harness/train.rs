use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::dataset::Dataset;
use super::metrics::{compute_metrics, confusion_matrix, MetricsReport};
use crate::dom::{page_to_record, XPathLimits};
use crate::error::{Error, Result};
use crate::fusion::Prediction;
use crate::model::{Model, PreparedPage};
use crate::nn::{AdamState, Mode};
use crate::text::{ExternalEmbeddings, Vocabulary};
use crate::xpath::TagVocabulary;

/// Metrics recorded after one pass over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-page cross-entropy over the epoch's train-mode batches.
    pub train_loss: f64,
    /// Eval-mode metrics on the training set at the end of the epoch.
    pub train: MetricsReport,
    pub val: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
}

/// Prepare every record of `data` against `model`, failing on unknown labels.
pub fn prepare_labelled(
    model: &Model,
    data: &Dataset,
    external: Option<&ExternalEmbeddings>,
) -> Result<Vec<PreparedPage>> {
    data.records
        .iter()
        .map(|r| {
            let p = model.prepare(r, external)?;
            if p.label.is_none() {
                return Err(Error::Dataset(format!(
                    "page {} has label {:?}, unknown to the model",
                    r.id, r.label
                )));
            }
            Ok(p)
        })
        .collect()
}

/// Split shuffled indices into batches of `size`; a trailing batch of one
/// joins its predecessor because batch normalization needs two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("at least one batch") = &order[start..];
    }
    out
}

/// Train a fresh model from `config`.
///
/// Vocabularies come from the training set. One seeded stream drives
/// initialization, shuffling and dropout. The returned model is the one with
/// the best validation macro-F1 (training macro-F1 when `val` is empty),
/// earliest epoch on ties. With `epochs = 0` the initialized model comes back
/// with an empty history.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    config: &ModelConfig,
    external: Option<&ExternalEmbeddings>,
) -> Result<(Model, History)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if config.mode.uses_graph() && config.batch_size < 2 {
        return Err(Error::Config(
            "batch_size must be at least 2 when the graph path is on".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocabulary::build(
        train_set.records.iter().map(|r| r.tokens.as_slice()),
        config.min_count,
    );
    let tags = TagVocabulary::build(&train_set.records);
    let mut model = Model::new(
        config.clone(),
        train_set.labels.clone(),
        vocab,
        tags,
        &mut rng,
    )?;

    let train_pages = prepare_labelled(&model, train_set, external)?;
    let val_pages = prepare_labelled(&model, val_set, external)?;
    let mut history = History::default();
    if config.epochs == 0 {
        return Ok((model, history));
    }

    let optimizer = config.optimizer();
    let mut state = AdamState::new(&model.store);
    let mut best: Option<(f64, Model)> = None;
    let mut order: Vec<usize> = (0..train_pages.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, idx) in batches(&order, config.batch_size).into_iter().enumerate() {
            let wrap = |e: Error| Error::Training {
                epoch,
                batch: b,
                source: Box::new(e),
            };
            let pages: Vec<&PreparedPage> = idx.iter().map(|&i| &train_pages[i]).collect();
            let (loss, pass) = model
                .compute_gradients(&pages, Mode::Train, &mut rng)
                .map_err(wrap)?;
            if !loss.is_finite() {
                return Err(wrap(Error::NonFiniteGradient {
                    param: "loss".into(),
                }));
            }
            optimizer.step(&mut model.store, &mut state).map_err(wrap)?;
            model.update_running_stats(&pass);
            loss_sum += loss * pages.len() as f64;
        }

        let train_metrics = evaluate_pages(&model, &train_pages, config.batch_size)?;
        let val_metrics = if val_pages.is_empty() {
            None
        } else {
            Some(evaluate_pages(&model, &val_pages, config.batch_size)?)
        };
        let score = val_metrics.as_ref().unwrap_or(&train_metrics).macro_f1;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, model.clone()));
            history.best_epoch = Some(epoch);
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_pages.len() as f64,
            train: train_metrics,
            val: val_metrics,
        });
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}

/// Eval-mode predictions over prepared pages, `batch_size` pages at a time.
pub fn predict_pages(
    model: &Model,
    pages: &[PreparedPage],
    batch_size: usize,
) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(pages.len());
    for chunk in pages.chunks(batch_size.max(1)) {
        let refs: Vec<&PreparedPage> = chunk.iter().collect();
        out.extend(model.predict_batch(&refs)?);
    }
    Ok(out)
}

pub fn evaluate_pages(
    model: &Model,
    pages: &[PreparedPage],
    batch_size: usize,
) -> Result<MetricsReport> {
    let preds = predict_pages(model, pages, batch_size)?;
    let pairs = pages
        .iter()
        .zip(&preds)
        .map(|(p, pred)| (p.label.expect("evaluation pages carry labels"), pred.label));
    compute_metrics(&confusion_matrix(model.num_classes(), pairs))
}

/// Eval-mode metrics of `model` on a labelled dataset.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    external: Option<&ExternalEmbeddings>,
    batch_size: usize,
) -> Result<MetricsReport> {
    let pages = prepare_labelled(model, data, external)?;
    evaluate_pages(model, &pages, batch_size)
}

/// Label name and prediction for one raw HTML document.
pub fn predict_html(
    model: &Model,
    page_id: &str,
    html: &str,
    external: Option<&ExternalEmbeddings>,
) -> Result<(String, Prediction)> {
    let limits = XPathLimits {
        max_depth: model.config.max_depth,
        subscript_table: model.config.subscript_table,
    };
    let record = page_to_record(page_id, html, "", limits)?;
    let page = model.prepare(&record, external)?;
    let pred = model.predict(&page)?;
    Ok((model.labels[pred.label].clone(), pred))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_singleton_merges() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b, vec![&order[0..4], &order[4..9]]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
        let one = [0usize];
        assert_eq!(batches(&one, 4), vec![&one[..]]);
    }
}
