use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::tsv;

/// Vocabulary plus one embedding row per word.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub vocab: Vocabulary,
    pub matrix: Array2<f64>,
    pub normalized: bool,
}

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            vocab,
            matrix,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, id: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(id)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub declared_rows: usize,
    pub rows_read: usize,
    /// `(line, token)` of every duplicate row that was dropped.
    pub duplicates: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeReport {
    pub zero_rows: usize,
}

/// Reads the word2vec/fastText text format: a `<count> <dim>` header, then
/// one `<token> <v1> ... <vd>` line per word.
pub fn load_embeddings(path: &Path, max_vocab: Option<usize>) -> Result<(EmbeddingSpace, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "empty file, expected `<count> <dim>` header")),
    };
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let (declared, dim) = match fields.as_slice() {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) if d > 0 => (n, d),
            _ => return Err(Error::parse(path, 1, format!("malformed header {header:?}"))),
        },
        _ => return Err(Error::parse(path, 1, format!("malformed header {header:?}"))),
    };

    let limit = max_vocab.map_or(declared, |m| m.min(declared));
    let mut vocab = Vocabulary::new();
    let mut data = Vec::with_capacity(limit.saturating_mul(dim));
    let mut report = LoadReport {
        declared_rows: declared,
        ..Default::default()
    };

    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if vocab.len() >= limit {
            break;
        }
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.rows_read += 1;
        let mut parts = line.split_ascii_whitespace();
        let token = tsv::nfc(parts.next().unwrap_or_default());
        let start = data.len();
        let mut count = 0;
        for value in parts {
            let v: f64 = value.parse().map_err(|_| {
                Error::parse(path, lineno, format!("non-numeric value {value:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value {value:?}")));
            }
            data.push(v);
            count += 1;
        }
        if count != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("row dimension mismatch: expected {dim} values, found {count}"),
            ));
        }
        if vocab.insert(token.clone()).is_none() {
            log::warn!("{}:{lineno}: duplicate token {token:?} ignored", path.display());
            data.truncate(start);
            report.duplicates.push((lineno, token));
        }
    }

    if vocab.len() < limit && report.rows_read < declared {
        return Err(Error::parse(
            path,
            report.rows_read + 1,
            format!("header declares {declared} rows, found {}", report.rows_read),
        ));
    }

    let n = vocab.len();
    let matrix = Array2::from_shape_vec((n, dim), data).expect("row count checked per line");
    Ok((EmbeddingSpace::new(vocab, matrix)?, report))
}

/// Writes the text format read by [`load_embeddings`], using shortest
/// round-trip float rendering.
pub fn write_embeddings(space: &EmbeddingSpace, path: &Path) -> Result<()> {
    tsv::write_with(path, |w| {
        writeln!(w, "{} {}", space.len(), space.dim())?;
        for (word, row) in space.vocab.words().iter().zip(space.matrix.rows()) {
            w.write_all(word.as_bytes())?;
            for v in row {
                write!(w, " {v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Scales every nonzero row to unit L2 norm. Zero rows are left as is and
/// counted. A space already flagged as normalized is returned unchanged.
pub fn normalize_rows(mut space: EmbeddingSpace) -> (EmbeddingSpace, NormalizeReport) {
    let mut report = NormalizeReport::default();
    if space.normalized {
        return (space, report);
    }
    for mut row in space.matrix.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            report.zero_rows += 1;
        } else if norm != 1.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    if report.zero_rows > 0 {
        log::warn!("{} zero rows left unnormalized", report.zero_rows);
    }
    space.normalized = true;
    (space, report)
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
    fn parses_header_and_rows() {
        let f = fixture("3 4\na 1 2 3 4\nb 0 0 0 1\nc -1 0.5 2e-3 7\n");
        let (space, report) = load_embeddings(f.path(), None).unwrap();
        assert_eq!(space.len(), 3);
        assert_eq!(space.dim(), 4);
        assert_eq!(space.vocab.lookup("c"), Some(2));
        assert_eq!(space.matrix[[2, 2]], 2e-3);
        assert!(report.duplicates.is_empty());
    }

    #[test]
    fn short_file_names_expected_and_found_rows() {
        let f = fixture("5 4\na 1 2 3 4\nb 0 0 0 1\nc -1 0.5 2e-3 7\n");
        let err = load_embeddings(f.path(), None).unwrap_err().to_string();
        assert!(err.contains("declares 5 rows, found 3"), "{err}");
    }

    #[test]
    fn truncation_to_max_vocab() {
        let f = fixture("3 2\na 1 0\nb 0 1\nc 1 1\n");
        let (space, _) = load_embeddings(f.path(), Some(2)).unwrap();
        assert_eq!(space.vocab.words(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn duplicate_token_keeps_first() {
        let f = fixture("2 2\na 1 0\na 0 1\n");
        let (space, report) = load_embeddings(f.path(), None).unwrap();
        assert_eq!(space.len(), 1);
        assert_eq!(space.matrix.row(0).to_vec(), vec![1.0, 0.0]);
        assert_eq!(report.duplicates, vec![(3, "a".to_string())]);
    }

    #[test]
    fn malformed_inputs_report_line_numbers() {
        let bad_header = fixture("three 4\n");
        assert!(matches!(
            load_embeddings(bad_header.path(), None),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_dim = fixture("2 3\na 1 2 3\nb 1 2\n");
        assert!(matches!(
            load_embeddings(bad_dim.path(), None),
            Err(Error::Parse { line: 3, .. })
        ));
        let bad_value = fixture("1 2\na 1 x\n");
        let err = load_embeddings(bad_value.path(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(err.to_string().contains("non-numeric"));
    }

    #[test]
    fn normalizes_rows_and_counts_zero_rows() {
        let vocab = Vocabulary::from_words(["a", "b"]).unwrap();
        let space = EmbeddingSpace::new(vocab, ndarray::array![[3.0, 4.0], [0.0, 0.0]]).unwrap();
        let (space, report) = normalize_rows(space);
        assert_eq!(space.matrix.row(0).to_vec(), vec![0.6, 0.8]);
        assert_eq!(space.matrix.row(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(report.zero_rows, 1);
        assert!(space.normalized);
    }

    #[test]
    fn tokens_are_nfc_normalized() {
        // "e" + combining acute accent
        let f = fixture("1 1\ncafe\u{301} 1\n");
        let (space, _) = load_embeddings(f.path(), None).unwrap();
        assert_eq!(space.vocab.lookup("caf\u{e9}"), Some(0));
    }
}
