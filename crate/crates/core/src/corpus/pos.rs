use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::tsv;

/// The 17 Universal POS tags plus `Unk` for words without a tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
    Unk,
}

impl Upos {
    pub const COUNT: usize = 18;

    pub const ALL: [Upos; Self::COUNT] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
        Upos::Unk,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
            Upos::Unk => "UNK",
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Upos::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown POS tag {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosTable {
    tags: Vec<Upos>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PosReport {
    pub tagged: usize,
    pub unknown_tags: usize,
}

impl PosTable {
    pub fn new(tags: Vec<Upos>) -> Self {
        Self { tags }
    }

    pub fn tag(&self, id: WordId) -> Upos {
        self.tags[id]
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Loads `word<TAB>UPOS` lines. Unrecognized tags fall back to `X`; words
/// missing from the file are `UNK`.
pub fn load_pos_table(path: &Path, vocab: &Vocabulary) -> Result<(PosTable, PosReport)> {
    let mut tags = vec![Upos::Unk; vocab.len()];
    let mut report = PosReport::default();
    let mut seen = HashSet::new();
    for (line, fields) in tsv::read_records(path)? {
        let [word, tag] = fields.as_slice() else {
            log::warn!("{}:{line}: expected `word<TAB>UPOS`, line ignored", path.display());
            continue;
        };
        let tag = match tag.trim().parse::<Upos>() {
            Ok(Upos::Unk) | Err(_) => {
                log::warn!("{}:{line}: unknown tag {tag:?} mapped to X", path.display());
                report.unknown_tags += 1;
                Upos::X
            }
            Ok(t) => t,
        };
        let word = tsv::nfc(word);
        if let Some(id) = vocab.lookup(&word) {
            if seen.insert(id) {
                tags[id] = tag;
                report.tagged += 1;
            }
        }
    }
    Ok((PosTable { tags }, report))
}

pub fn write_pos_table(path: &Path, vocab: &Vocabulary, table: &PosTable) -> Result<()> {
    tsv::write_with(path, |w| {
        for (id, word) in vocab.words().iter().enumerate() {
            if table.tag(id) != Upos::Unk {
                writeln!(w, "{word}\t{}", table.tag(id))?;
            }
        }
        Ok(())
    })
}
