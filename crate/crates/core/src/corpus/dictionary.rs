use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use super::{Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::tsv;

/// Source word id → set of gold target ids. Iteration is ordered by source
/// id and then target id, independent of input line order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranslationDictionary {
    entries: BTreeMap<WordId, BTreeSet<WordId>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DictionaryReport {
    pub pairs: usize,
    pub oov_src: usize,
    pub oov_tgt: usize,
}

impl TranslationDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: WordId, tgt: WordId) -> bool {
        self.entries.entry(src).or_default().insert(tgt)
    }

    pub fn gold(&self, src: WordId) -> Option<&BTreeSet<WordId>> {
        self.entries.get(&src)
    }

    pub fn contains_source(&self, src: WordId) -> bool {
        self.entries.contains_key(&src)
    }

    pub fn is_gold(&self, src: WordId, tgt: WordId) -> bool {
        self.entries.get(&src).is_some_and(|g| g.contains(&tgt))
    }

    pub fn sources(&self) -> impl Iterator<Item = WordId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &BTreeSet<WordId>)> + '_ {
        self.entries.iter().map(|(&s, t)| (s, t))
    }

    /// All `(source, target)` pairs in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = (WordId, WordId)> + '_ {
        self.entries
            .iter()
            .flat_map(|(&s, ts)| ts.iter().map(move |&t| (s, t)))
    }

    /// Number of distinct source words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    /// Restriction to the given source words.
    pub fn restrict<I: IntoIterator<Item = WordId>>(&self, sources: I) -> Self {
        let entries = sources
            .into_iter()
            .filter_map(|s| self.entries.get(&s).map(|t| (s, t.clone())))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        tsv::write_with(path, |w| {
            for (s, t) in self.pairs() {
                writeln!(w, "{}\t{}", src.word(s), tgt.word(t))?;
            }
            Ok(())
        })
    }
}

impl FromIterator<(WordId, WordId)> for TranslationDictionary {
    fn from_iter<I: IntoIterator<Item = (WordId, WordId)>>(iter: I) -> Self {
        let mut dict = TranslationDictionary::new();
        for (s, t) in iter {
            dict.insert(s, t);
        }
        dict
    }
}

/// Loads `source<TAB>target` pairs, skipping pairs with an out-of-vocabulary
/// side.
pub fn load_dictionary(
    path: &Path,
    src: &Vocabulary,
    tgt: &Vocabulary,
) -> Result<(TranslationDictionary, DictionaryReport)> {
    let mut dict = TranslationDictionary::new();
    let mut report = DictionaryReport::default();
    for (line, fields) in tsv::read_records(path)? {
        let [s, t] = fields.as_slice() else {
            return Err(Error::parse(
                path,
                line,
                format!("expected `source<TAB>target`, found {} fields", fields.len()),
            ));
        };
        let s = src.lookup(&tsv::nfc(s));
        let t = tgt.lookup(&tsv::nfc(t));
        match (s, t) {
            (None, _) => report.oov_src += 1,
            (Some(_), None) => report.oov_tgt += 1,
            (Some(s), Some(t)) => {
                dict.insert(s, t);
            }
        }
    }
    report.pairs = dict.num_pairs();
    if report.oov_src + report.oov_tgt > 0 {
        log::warn!(
            "{}: skipped {} pairs with OOV source, {} with OOV target",
            path.display(),
            report.oov_src,
            report.oov_tgt
        );
    }
    Ok((dict, report))
}
