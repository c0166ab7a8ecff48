//! Plain-text model files.
//!
//! ```text
//! pagegnn-checkpoint 1
//! [config]
//! key=value ...
//! [labels] <n>
//! <label>\t<id> ...
//! [vocab] <n>
//! <token>\t<id> ...            (reserved ids 0 and 1 are implied)
//! [tags] <n>
//! <tag>\t<id> ...
//! [params] <n>
//! <name> <rows> <cols> <kind>
//! <rows*cols space-separated values>
//! [end]
//! ```
//!
//! Values are written in Rust's shortest round-trip float notation, so a
//! save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::ParamKind;
use crate::text::Vocabulary;
use crate::xpath::TagVocabulary;

pub const MAGIC: &str = "pagegnn-checkpoint";
pub const VERSION: u32 = 1;

/// Reserved leading entries of both vocabularies (pad, unk).
const RESERVED: usize = 2;

pub fn to_text(model: &Model) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    s.push_str("[config]\n");
    s.push_str(&model.config.to_text());
    let mut table = |name: &str, items: &[String], first_id: usize| {
        let _ = writeln!(s, "[{name}] {}", items.len());
        for (i, item) in items.iter().enumerate() {
            let _ = writeln!(s, "{item}\t{}", i + first_id);
        }
    };
    table("labels", &model.labels, 0);
    table("vocab", &model.vocab.tokens()[RESERVED..], RESERVED);
    table("tags", &model.tags.tags()[RESERVED..], RESERVED);
    let params = model.store.params();
    let _ = writeln!(s, "[params] {}", params.len());
    for p in params {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            p.name,
            p.value.rows,
            p.value.cols,
            p.kind.as_str()
        );
        let mut first = true;
        for v in &p.value.data {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v:?}");
        }
        s.push('\n');
    }
    s.push_str("[end]\n");
    s
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_text(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    from_text(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn at_section(&mut self) -> bool {
        self.inner.peek().is_some_and(|(_, l)| l.starts_with('['))
    }

    fn next(&mut self, field: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::corrupt(field, "unexpected end of file"))
    }

    /// Read a `[name] <count>` section header.
    fn section(&mut self, name: &str) -> Result<usize> {
        let (n, line) = self.next(name)?;
        let rest = line
            .strip_prefix(&format!("[{name}]"))
            .ok_or_else(|| Error::corrupt(name, format!("line {n}: expected [{name}] header")))?;
        rest.trim()
            .parse()
            .map_err(|_| Error::corrupt(name, format!("line {n}: bad count {rest:?}")))
    }

    fn table(&mut self, name: &str, first_id: usize) -> Result<Vec<String>> {
        let count = self.section(name)?;
        let mut items = Vec::with_capacity(count);
        for k in 0..count {
            let (n, line) = self.next(name)?;
            let (item, id) = line.rsplit_once('\t').ok_or_else(|| {
                Error::corrupt(name, format!("line {n}: expected <entry>\\t<id>"))
            })?;
            if id.parse::<usize>().ok() != Some(k + first_id) {
                return Err(Error::corrupt(
                    name,
                    format!("line {n}: expected id {}", k + first_id),
                ));
            }
            items.push(item.to_string());
        }
        Ok(items)
    }
}

pub fn from_text(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
    };
    let (_, header) = lines.next("header")?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::corrupt("header", format!("not a {MAGIC} file")))?;
    if version != VERSION.to_string() {
        return Err(Error::corrupt(
            "version",
            format!("file has version {version}, this build reads version {VERSION}"),
        ));
    }

    let (n, line) = lines.next("config")?;
    if line != "[config]" {
        return Err(Error::corrupt(
            "config",
            format!("line {n}: expected [config]"),
        ));
    }
    let mut config = ModelConfig::default();
    while !lines.at_section() {
        let (n, line) = lines.next("config")?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::corrupt("config", format!("line {n}: expected key=value")))?;
        config
            .set(k, v)
            .map_err(|e| Error::corrupt("config", format!("line {n}: {e}")))?;
    }
    config
        .validate()
        .map_err(|e| Error::corrupt("config", e.to_string()))?;

    let labels = lines.table("labels", 0)?;
    let vocab = Vocabulary::from_tokens(lines.table("vocab", RESERVED)?);
    let tags = TagVocabulary::from_tags(lines.table("tags", RESERVED)?);

    // Build the skeleton, then overwrite every parameter from the file.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model::new(config, labels, vocab, tags, &mut rng)
        .map_err(|e| Error::corrupt("labels", e.to_string()))?;
    let count = lines.section("params")?;
    if count != model.store.len() {
        return Err(Error::corrupt(
            "params",
            format!(
                "file has {count} parameters, model expects {}",
                model.store.len()
            ),
        ));
    }
    for _ in 0..count {
        let (n, line) = lines.next("params")?;
        let parts: Vec<&str> = line.split(' ').collect();
        let [name, rows, cols, kind] = parts[..] else {
            return Err(Error::corrupt(
                "params",
                format!("line {n}: expected <name> <rows> <cols> <kind>"),
            ));
        };
        let field = format!("param {name}");
        let id = model
            .store
            .id(name)
            .ok_or_else(|| Error::corrupt(&field, "unknown parameter"))?;
        let p = model.store.param(id);
        let shape = (rows.parse::<usize>().ok(), cols.parse::<usize>().ok());
        if shape != (Some(p.value.rows), Some(p.value.cols)) {
            return Err(Error::corrupt(
                &field,
                format!(
                    "shape {rows}x{cols}, expected {}x{}",
                    p.value.rows, p.value.cols
                ),
            ));
        }
        if ParamKind::parse(kind) != Some(p.kind) {
            return Err(Error::corrupt(
                &field,
                format!("kind {kind}, expected {}", p.kind.as_str()),
            ));
        }
        let (n, values) = lines.next(&field)?;
        let values: Vec<f64> = if values.is_empty() {
            Vec::new()
        } else {
            values
                .split(' ')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::corrupt(&field, format!("line {n}: unparsable value")))?
        };
        let target = model.store.value_mut(id);
        if values.len() != target.data.len() {
            return Err(Error::corrupt(
                &field,
                format!(
                    "line {n}: {} values, expected {}",
                    values.len(),
                    target.data.len()
                ),
            ));
        }
        target.data = values;
    }
    let (n, end) = lines.next("end")?;
    if end != "[end]" {
        return Err(Error::corrupt("end", format!("line {n}: expected [end]")));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PipelineMode;

    fn tiny(mode: PipelineMode) -> Model {
        let cfg = ModelConfig {
            text_width: 3,
            token_width: 2,
            unit_width: 2,
            max_depth: 3,
            graph_width: 3,
            gnn_layers: 1,
            mode,
            ..ModelConfig::default()
        };
        let vocab = Vocabulary::from_tokens(vec!["alpha".into(), "beta".into()]);
        let tags = TagVocabulary::from_tags(vec!["div".into()]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Model::new(cfg, vec!["x".into(), "y z".into()], vocab, tags, &mut rng).unwrap()
    }

    fn assert_same(a: &Model, b: &Model) {
        assert_eq!(a.config, b.config);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.vocab.tokens(), b.vocab.tokens());
        assert_eq!(a.tags, b.tags);
        for (p, q) in a.store.params().iter().zip(b.store.params()) {
            assert_eq!(p.name, q.name);
            let bits =
                |m: &crate::nn::Matrix| m.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&p.value), bits(&q.value), "{}", p.name);
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for mode in [
            PipelineMode::Fused,
            PipelineMode::TextOnly,
            PipelineMode::GraphOnly,
        ] {
            let mut m = tiny(mode);
            m.store.params_mut()[0].value.data[0] = 0.1 + 0.2;
            m.store.params_mut()[0].value.data[1] = -1.0e-300;
            let back = from_text(&to_text(&m)).unwrap();
            assert_same(&m, &back);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let text = to_text(&tiny(PipelineMode::Fused));
        let lines: Vec<&str> = text.lines().collect();
        for keep in [0, 1, 5, lines.len() / 2, lines.len() - 1] {
            let cut = lines[..keep].join("\n");
            let err = from_text(&cut).unwrap_err();
            assert!(
                matches!(err, Error::CorruptCheckpoint { .. }),
                "{keep}: {err}"
            );
        }
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let text = to_text(&tiny(PipelineMode::Fused)).replacen(
            &format!("{MAGIC} {VERSION}"),
            &format!("{MAGIC} 7"),
            1,
        );
        let err = from_text(&text).unwrap_err().to_string();
        assert!(
            err.contains("version") && err.contains('7') && err.contains(&VERSION.to_string()),
            "{err}"
        );
    }

    #[test]
    fn bad_value_names_parameter() {
        let text = to_text(&tiny(PipelineMode::Fused));
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let header = lines
            .iter()
            .position(|l| l.starts_with("mlp.out.bias "))
            .unwrap();
        lines[header + 1] = "0.5 zebra".into();
        let err = from_text(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("param mlp.out.bias"), "{err}");
    }
}
