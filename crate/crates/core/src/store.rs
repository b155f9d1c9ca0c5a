//! Collection of decompositions, persisted as one JSON document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomposition::{build_decomposition, validate_decomposition, KanjiDecomposition};
use crate::error::{Error, Result};
use crate::kanjivg::parse_kanjivg;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Store {
    pub kanji: BTreeMap<char, KanjiDecomposition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub file: PathBuf,
    pub error: String,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    version: u32,
    max_level: usize,
    kanji: Vec<KanjiDecomposition>,
}

impl Store {
    pub fn len(&self) -> usize {
        self.kanji.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kanji.is_empty()
    }

    pub fn get(&self, cp: char) -> Result<&KanjiDecomposition> {
        self.kanji.get(&cp).ok_or_else(|| Error::UnknownKanji(cp.to_string()))
    }

    pub fn codepoints(&self) -> Vec<char> {
        self.kanji.keys().copied().collect()
    }

    /// Keeps only the listed kanji.
    pub fn retain(&mut self, keep: &[char]) {
        self.kanji.retain(|cp, _| keep.contains(cp));
    }

    /// Parses every `*.svg` in `dir`. Files that fail are reported and skipped.
    pub fn ingest_dir(dir: &Path, max_level: usize) -> Result<(Store, Vec<IngestFailure>)> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "svg"))
            .collect();
        files.sort();
        let mut store = Store::default();
        let mut failures = Vec::new();
        for file in files {
            let result = std::fs::read_to_string(&file)
                .map_err(Error::from)
                .and_then(|text| parse_kanjivg(&text))
                .and_then(|tree| build_decomposition(&tree, max_level));
            match result {
                Ok(d) => {
                    store.kanji.insert(d.codepoint, d);
                }
                Err(e) => failures.push(IngestFailure { file, error: e.to_string() }),
            }
        }
        Ok((store, failures))
    }

    pub fn to_json(&self) -> Result<String> {
        let max_level = self.kanji.values().map(|d| d.max_level()).max().unwrap_or(0);
        Ok(serde_json::to_string(&StoreFile {
            version: FORMAT_VERSION,
            max_level,
            kanji: self.kanji.values().cloned().collect(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Store> {
        let file: StoreFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Config(format!("store format version {} not supported", file.version)));
        }
        let mut store = Store::default();
        for d in file.kanji {
            validate_decomposition(&d)?;
            store.kanji.insert(d.codepoint, d);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Store> {
        Store::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Reads a list of kanji, one per line or all run together; `#` starts a comment.
pub fn read_kanji_list(text: &str) -> Vec<char> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for c in line.chars().filter(|c| !c.is_whitespace() && *c != ',') {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}
