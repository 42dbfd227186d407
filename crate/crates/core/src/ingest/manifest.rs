use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Transaction class. The declaration order is the tie-break order used by the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Normal,
    AttackSrc,
    AttackTgt,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Normal, Label::AttackSrc, Label::AttackTgt];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn is_attack(self) -> bool {
        self != Label::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "Normal",
            Label::AttackSrc => "AttackSrc",
            Label::AttackTgt => "AttackTgt",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| format!("unknown label {s:?}"))
    }
}

/// One manifest line. `source` is a trace file path (relative to the manifest) or a `0x` tx hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: String,
    pub label: Label,
    pub chain_id: u64,
}

impl ManifestEntry {
    pub fn is_tx_hash(&self) -> bool {
        self.source.len() == 66 && self.source.starts_with("0x") && self.source[2..].bytes().all(|b| b.is_ascii_hexdigit())
    }
}

/// JSON-lines dataset listing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, IngestError> {
        let manifest = Self { entries };
        manifest.check_unique()?;
        Ok(manifest)
    }

    fn check_unique(&self) -> Result<(), IngestError> {
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !seen.insert((e.chain_id, e.source.to_ascii_lowercase())) {
                return Err(IngestError::Manifest { line: i + 1, reason: format!("duplicate source {}", e.source) });
            }
        }
        Ok(())
    }

    pub fn read(reader: impl BufRead) -> Result<Self, IngestError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| IngestError::Manifest { line: i + 1, reason: e.to_string() })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn write(&self, mut writer: impl Write) -> Result<(), IngestError> {
        for entry in &self.entries {
            let line = serde_json::to_string(entry).expect("manifest entry serializes");
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }
}
