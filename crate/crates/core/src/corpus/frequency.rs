use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use super::{Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::tsv;

/// Per-word Zipf scores and frequency ranks for one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    zipf: Vec<f64>,
    rank: Vec<usize>,
    present: Vec<bool>,
    total_tokens: u64,
}

impl FrequencyTable {
    /// `counts[i]` is the raw count of word `i`, `None` if unlisted.
    /// `total_tokens` may exceed the sum over the vocabulary.
    pub fn from_counts(counts: &[Option<u64>], total_tokens: u64) -> Result<Self> {
        let n = counts.len();
        if counts.iter().flatten().any(|&c| c == 0) {
            return Err(Error::invalid("frequency counts must be positive"));
        }
        let listed: u64 = counts.iter().flatten().sum();
        if total_tokens < listed {
            return Err(Error::invalid(format!(
                "total_tokens {total_tokens} is smaller than the listed counts {listed}"
            )));
        }
        let log_total = (total_tokens.max(1) as f64).log10();
        let zipf = counts
            .iter()
            .map(|c| match c {
                Some(c) => ((*c as f64).log10() - log_total + 9.0).max(0.0),
                None => 0.0,
            })
            .collect();

        let mut order: Vec<WordId> = (0..n).filter(|&i| counts[i].is_some()).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let mut rank = vec![n; n];
        for (r, &id) in order.iter().enumerate() {
            rank[id] = r + 1;
        }
        Ok(Self {
            zipf,
            rank,
            present: counts.iter().map(Option::is_some).collect(),
            total_tokens,
        })
    }

    /// log10 of the frequency per 10^9 tokens, floored at 0.
    pub fn zipf(&self, id: WordId) -> f64 {
        self.zipf[id]
    }

    /// 1 = most frequent; unlisted words share the worst rank (vocab size).
    pub fn rank(&self, id: WordId) -> usize {
        self.rank[id]
    }

    pub fn is_listed(&self, id: WordId) -> bool {
        self.present[id]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn len(&self) -> usize {
        self.zipf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zipf.is_empty()
    }
}

/// Loads `word<TAB>count` lines. The token total is the sum over every line
/// of the file, including words outside `vocab`.
pub fn load_frequency_table(path: &Path, vocab: &Vocabulary) -> Result<FrequencyTable> {
    let mut counts = vec![None; vocab.len()];
    let mut seen = HashSet::new();
    let mut total: u64 = 0;
    for (line, fields) in tsv::read_records(path)? {
        let [word, count] = fields.as_slice() else {
            return Err(Error::parse(path, line, "expected `word<TAB>count`"));
        };
        let count: u64 = match count.trim().parse() {
            Ok(c) if c > 0 => c,
            _ => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("count must be a positive integer, found {count:?}"),
                ))
            }
        };
        let word = tsv::nfc(word);
        if !seen.insert(word.clone()) {
            log::warn!("{}:{line}: duplicate word {word:?} ignored", path.display());
            continue;
        }
        total = total
            .checked_add(count)
            .ok_or_else(|| Error::parse(path, line, "token total overflows"))?;
        if let Some(id) = vocab.lookup(&word) {
            counts[id] = Some(count);
        }
    }
    FrequencyTable::from_counts(&counts, total)
}

pub fn write_counts(path: &Path, vocab: &Vocabulary, counts: &[u64]) -> Result<()> {
    tsv::write_with(path, |w| {
        for (word, c) in vocab.words().iter().zip(counts) {
            writeln!(w, "{word}\t{c}")?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn zipf_of_one_per_thousand() {
        let t = FrequencyTable::from_counts(&[Some(1000)], 1_000_000).unwrap();
        assert_eq!(t.zipf(0), 6.0);
    }

    #[test]
    fn ranks_by_descending_count() {
        let vocab = Vocabulary::from_words(["c", "a", "b", "d"]).unwrap();
        let f = fixture("a\t100\nb\t10\nc\t1\n");
        let t = load_frequency_table(f.path(), &vocab).unwrap();
        assert_eq!((t.rank(1), t.rank(2), t.rank(0)), (1, 2, 3));
        // unlisted word: zipf 0 and the worst rank
        assert_eq!(t.zipf(3), 0.0);
        assert_eq!(t.rank(3), 4);
        assert_eq!(t.total_tokens(), 111);
    }

    #[test]
    fn ties_broken_by_vocabulary_order() {
        let t = FrequencyTable::from_counts(&[Some(5), Some(7), Some(5)], 17).unwrap();
        assert_eq!((t.rank(1), t.rank(0), t.rank(2)), (1, 2, 3));
    }

    #[test]
    fn zipf_is_floored_at_zero() {
        let t = FrequencyTable::from_counts(&[Some(1)], 100_000_000_000).unwrap();
        assert_eq!(t.zipf(0), 0.0);
    }

    #[test]
    fn rejects_bad_counts() {
        let vocab = Vocabulary::from_words(["a"]).unwrap();
        for bad in ["a\t0\n", "a\t-3\n", "a\tmany\n"] {
            let f = fixture(bad);
            assert!(matches!(
                load_frequency_table(f.path(), &vocab),
                Err(Error::Parse { line: 1, .. })
            ));
        }
    }
}
