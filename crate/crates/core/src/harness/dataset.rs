use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dom::{EdgeList, PageRecord, XPathUnit, XPathUnits};
use crate::error::{Error, Result};

/// Records plus the label inventory; label ids index into `labels`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<PageRecord>,
    pub labels: Vec<String>,
}

impl Dataset {
    /// Label inventory is the sorted set of labels in `records`.
    pub fn new(records: Vec<PageRecord>) -> Self {
        let labels: BTreeSet<&str> = records.iter().map(|r| r.label.as_str()).collect();
        let labels = labels.into_iter().map(str::to_string).collect();
        Self { records, labels }
    }

    pub fn with_labels(records: Vec<PageRecord>, labels: Vec<String>) -> Self {
        Self { records, labels }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine = serde_json::from_str(&line)
                .map_err(|e| Error::Dataset(format!("line {}: {e}", n + 1)))?;
            records.push(rec.into_record());
        }
        Ok(Self::new(records))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for r in &self.records {
            write_record(&mut writer, r)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// One line of the dataset file.
#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    id: String,
    label: String,
    tokens: Vec<String>,
    nodes: Vec<Vec<(String, usize)>>,
    edges: Vec<(usize, usize)>,
}

impl RecordLine {
    fn from_record(r: &PageRecord) -> Self {
        Self {
            id: r.id.clone(),
            label: r.label.clone(),
            tokens: r.tokens.clone(),
            nodes: r
                .nodes
                .iter()
                .map(|n| {
                    n.units
                        .iter()
                        .map(|u| (u.tag.clone(), u.subscript))
                        .collect()
                })
                .collect(),
            edges: r.edges.edges.clone(),
        }
    }

    fn into_record(self) -> PageRecord {
        PageRecord {
            id: self.id,
            label: self.label,
            tokens: self.tokens,
            nodes: self
                .nodes
                .into_iter()
                .map(|units| XPathUnits {
                    units: units
                        .into_iter()
                        .map(|(t, s)| XPathUnit::new(t, s))
                        .collect(),
                })
                .collect(),
            edges: EdgeList { edges: self.edges },
        }
    }
}

pub fn write_record(mut writer: impl Write, record: &PageRecord) -> Result<()> {
    let line = serde_json::to_string(&RecordLine::from_record(record))
        .map_err(|e| Error::Dataset(e.to_string()))?;
    writeln!(writer, "{line}")?;
    Ok(())
}
