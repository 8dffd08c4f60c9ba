//! Evaluation and error analysis: P@1 (overall and per source POS),
//! frequency-difference statistics, per-POS Spearman correlation of
//! frequency ranks, PCA coordinates, and per-example explanations.

mod pca;
mod stats;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use pca::pca_project;
pub use stats::{midranks, pearson, spearman};

use crate::corpus::{FrequencyTable, PosTable, TranslationDictionary, Upos, Vocabulary, WordId};
use crate::error::Result;
use crate::features::RankingGroup;
use crate::ltr::rank_order;
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAt1 {
    pub p_at_1: f64,
    pub n: usize,
    pub correct: usize,
    pub gold_missed: usize,
}

fn top_index(scores: &[f64]) -> Option<usize> {
    rank_order(scores).first().copied()
}

fn is_correct(group: &RankingGroup, scores: &[f64]) -> bool {
    top_index(scores).is_some_and(|i| group.labels[i] == 1)
}

/// Fraction of groups whose top-scored candidate (ties by position) is
/// gold. Groups whose gold was never retrieved count as failures.
pub fn precision_at_1(groups: &[RankingGroup], scores: &[Vec<f64>]) -> PrecisionAt1 {
    let correct = groups
        .iter()
        .zip(scores)
        .filter(|(g, s)| is_correct(g, s))
        .count();
    let n = groups.len();
    PrecisionAt1 {
        p_at_1: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        n,
        correct,
        gold_missed: groups.iter().filter(|g| g.gold_missed).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosAccuracy {
    pub n: usize,
    pub accuracy: f64,
}

/// P@1 bucketed by source-word POS; empty buckets are omitted.
pub fn per_pos_accuracy(
    groups: &[RankingGroup],
    scores: &[Vec<f64>],
    pos_src: &PosTable,
) -> BTreeMap<Upos, PosAccuracy> {
    let mut buckets: BTreeMap<Upos, (usize, usize)> = BTreeMap::new();
    for (g, s) in groups.iter().zip(scores) {
        let e = buckets.entry(pos_src.tag(g.src)).or_default();
        e.0 += 1;
        e.1 += usize::from(is_correct(g, s));
    }
    buckets
        .into_iter()
        .map(|(tag, (n, c))| {
            (
                tag,
                PosAccuracy {
                    n,
                    accuracy: c as f64 / n as f64,
                },
            )
        })
        .collect()
}

/// Mean absolute source/target frequency differences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FreqDiff {
    /// Mean |zipf_src − zipf_gold| over all (source, gold) pairs.
    pub gold_zipf: f64,
    /// Mean |zipf_src − zipf_top1| over the evaluated groups.
    pub predicted_zipf: f64,
    /// Same statistics on log2(1 + frequency rank).
    pub gold_log_rank: f64,
    pub predicted_log_rank: f64,
    pub n_gold_pairs: usize,
    pub n_predicted: usize,
}

fn log_rank(rank: usize) -> f64 {
    (1.0 + rank as f64).log2()
}

/// Frequency deviation of gold pairs versus top-1 predictions. With
/// `errors_only`, the predicted statistic covers incorrect groups only.
pub fn freq_diff_report(
    groups: &[RankingGroup],
    scores: &[Vec<f64>],
    dict: &TranslationDictionary,
    freq_src: &FrequencyTable,
    freq_tgt: &FrequencyTable,
    errors_only: bool,
) -> FreqDiff {
    let mut out = FreqDiff::default();
    let (mut gz, mut gr, mut pz, mut pr) = (0.0, 0.0, 0.0, 0.0);
    for (g, s) in groups.iter().zip(scores) {
        let src = g.src;
        for &t in dict.gold(src).into_iter().flatten() {
            gz += (freq_src.zipf(src) - freq_tgt.zipf(t)).abs();
            gr += (log_rank(freq_src.rank(src)) - log_rank(freq_tgt.rank(t))).abs();
            out.n_gold_pairs += 1;
        }
        if errors_only && is_correct(g, s) {
            continue;
        }
        if let Some(top) = top_index(s) {
            let t = g.candidates[top];
            pz += (freq_src.zipf(src) - freq_tgt.zipf(t)).abs();
            pr += (log_rank(freq_src.rank(src)) - log_rank(freq_tgt.rank(t))).abs();
            out.n_predicted += 1;
        }
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    out.gold_zipf = mean(gz, out.n_gold_pairs);
    out.gold_log_rank = mean(gr, out.n_gold_pairs);
    out.predicted_zipf = mean(pz, out.n_predicted);
    out.predicted_log_rank = mean(pr, out.n_predicted);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosCorrelation {
    pub n: usize,
    /// `None` when the bucket has fewer than `min_n` pairs or a constant side.
    pub rho: Option<f64>,
}

/// Spearman correlation of source and gold frequency ranks per source POS,
/// one pair per source using its first gold target (lowest target id).
/// Every tag gets a cell.
pub fn pos_freq_correlation(
    dict: &TranslationDictionary,
    freq_src: &FrequencyTable,
    freq_tgt: &FrequencyTable,
    pos_src: &PosTable,
    min_n: usize,
) -> BTreeMap<Upos, PosCorrelation> {
    let mut buckets: BTreeMap<Upos, (Vec<f64>, Vec<f64>)> =
        Upos::ALL.iter().map(|&t| (t, Default::default())).collect();
    for (src, gold) in dict.iter() {
        let Some(&first) = gold.iter().next() else {
            continue;
        };
        let b = buckets.get_mut(&pos_src.tag(src)).expect("all tags present");
        b.0.push(freq_src.rank(src) as f64);
        b.1.push(freq_tgt.rank(first) as f64);
    }
    buckets
        .into_iter()
        .map(|(tag, (x, y))| {
            let n = x.len();
            let rho = if n < min_n { None } else { spearman(&x, &y) };
            (tag, PosCorrelation { n, rho })
        })
        .collect()
}

/// One row of the correlation grid: `(row label, cells)`.
pub type GridRow = (String, BTreeMap<Upos, PosCorrelation>);

/// TSV grid: a header of POS tags, then one row per language pair; cells
/// without a value are written as `NA`.
pub fn write_correlation_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    tsv::write_with(path, |w| {
        write!(w, "pair")?;
        for t in Upos::ALL {
            write!(w, "\t{t}")?;
        }
        writeln!(w)?;
        for (label, cells) in rows {
            write!(w, "{label}")?;
            for t in Upos::ALL {
                match cells.get(&t).and_then(|c| c.rho) {
                    Some(r) => write!(w, "\t{r:.6}")?,
                    None => write!(w, "\tNA")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// Role of a point in a PCA export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointRole {
    Source,
    Gold,
    Candidate,
}

impl PointRole {
    pub fn as_str(self) -> &'static str {
        match self {
            PointRole::Source => "source",
            PointRole::Gold => "gold",
            PointRole::Candidate => "candidate",
        }
    }
}

/// `word<TAB>role<TAB>x<TAB>y` rows.
pub fn write_pca_points(path: &Path, labels: &[(String, PointRole)], coords: &Array2<f64>) -> Result<()> {
    tsv::write_with(path, |w| {
        for ((word, role), xy) in labels.iter().zip(coords.rows()) {
            writeln!(w, "{word}\t{}\t{:.6}\t{:.6}", role.as_str(), xy[0], xy[1])?;
        }
        Ok(())
    })
}

/// Per-example record mirroring the qualitative prediction tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub src: String,
    pub prediction: String,
    pub rank_src: usize,
    pub rank_pred: usize,
    pub pos_src: Upos,
    pub pos_pred: Upos,
    pub score: f64,
    pub correct: bool,
}

pub struct ExplainContext<'a> {
    pub src_vocab: &'a Vocabulary,
    pub tgt_vocab: &'a Vocabulary,
    pub freq_src: &'a FrequencyTable,
    pub freq_tgt: &'a FrequencyTable,
    pub pos_src: &'a PosTable,
    pub pos_tgt: &'a PosTable,
}

pub fn explain_predictions(
    groups: &[RankingGroup],
    scores: &[Vec<f64>],
    ctx: &ExplainContext<'_>,
) -> Vec<Explanation> {
    groups
        .iter()
        .zip(scores)
        .filter_map(|(g, s)| {
            let top = top_index(s)?;
            let pred: WordId = g.candidates[top];
            Some(Explanation {
                src: ctx.src_vocab.word(g.src).to_string(),
                prediction: ctx.tgt_vocab.word(pred).to_string(),
                rank_src: ctx.freq_src.rank(g.src),
                rank_pred: ctx.freq_tgt.rank(pred),
                pos_src: ctx.pos_src.tag(g.src),
                pos_pred: ctx.pos_tgt.tag(pred),
                score: s[top],
                correct: g.labels[top] == 1,
            })
        })
        .collect()
}

pub fn write_explanations(path: &Path, rows: &[Explanation]) -> Result<()> {
    tsv::write_with(path, |w| {
        writeln!(w, "src\tprediction\trank_src\trank_pred\tpos_src\tpos_pred\tscore\tcorrect")?;
        for r in rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
                r.src,
                r.prediction,
                r.rank_src,
                r.rank_pred,
                r.pos_src,
                r.pos_pred,
                r.score,
                u8::from(r.correct)
            )?;
        }
        Ok(())
    })
}

pub fn write_per_pos(path: &Path, per_pos: &BTreeMap<Upos, PosAccuracy>) -> Result<()> {
    tsv::write_with(path, |w| {
        writeln!(w, "pos\tn\tp_at_1")?;
        for (tag, acc) in per_pos {
            writeln!(w, "{tag}\t{}\t{:.6}", acc.n, acc.accuracy)?;
        }
        Ok(())
    })
}

/// Summary of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub p_at_1: f64,
    /// P@1 × 100 with two decimals.
    pub p_at_1_x100: String,
    pub n_eval: usize,
    pub correct: usize,
    pub gold_missed: usize,
    pub per_pos: BTreeMap<Upos, PosAccuracy>,
    pub freq_absdiff: FreqDiff,
    pub freq_absdiff_errors: FreqDiff,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mix: Option<f64>,
}

pub struct EvalInputs<'a> {
    pub dict: &'a TranslationDictionary,
    pub freq_src: &'a FrequencyTable,
    pub freq_tgt: &'a FrequencyTable,
    pub pos_src: &'a PosTable,
}

pub fn evaluate(groups: &[RankingGroup], scores: &[Vec<f64>], inputs: &EvalInputs<'_>, mix: Option<f64>) -> EvalReport {
    let p1 = precision_at_1(groups, scores);
    EvalReport {
        p_at_1: p1.p_at_1,
        p_at_1_x100: format!("{:.2}", p1.p_at_1 * 100.0),
        n_eval: p1.n,
        correct: p1.correct,
        gold_missed: p1.gold_missed,
        per_pos: per_pos_accuracy(groups, scores, inputs.pos_src),
        freq_absdiff: freq_diff_report(groups, scores, inputs.dict, inputs.freq_src, inputs.freq_tgt, false),
        freq_absdiff_errors: freq_diff_report(groups, scores, inputs.dict, inputs.freq_src, inputs.freq_tgt, true),
        mix,
    }
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| crate::Error::invalid(e.to_string()))?;
    tsv::write_with(path, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}
