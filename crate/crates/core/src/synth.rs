//! Deterministic synthetic bilingual worlds.
//!
//! Source vectors are Gaussian around a shared offset direction (real
//! embedding spaces are anisotropic, which is what makes centroid-like
//! vectors hubs). Targets are a random rotation of their source plus
//! Gaussian noise. Hub targets are replaced by the renormalized mean of a
//! random subset of target vectors. Frequencies are Zipfian with the gold
//! target's log-rank a bounded perturbation of the source's, and gold pairs
//! share POS with a configurable probability.
//!
//! Each component draws from its own ChaCha stream of the seed, so adding a
//! component never shifts another's randomness.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    normalize_rows, write_counts, write_embeddings, write_pos_table, EmbeddingSpace, FrequencyTable,
    PosTable, TranslationDictionary, Upos, Vocabulary,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub vocab_n: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of the target noise.
    pub noise_sigma: f64,
    pub hub_count: usize,
    /// Number of target vectors averaged into each hub.
    pub hub_subset: usize,
    /// Norm of the shared offset added to every raw source vector.
    pub anisotropy: f64,
    pub zipf_exponent: f64,
    /// Half-width of the uniform perturbation of ln(rank) for gold targets.
    pub freq_noise: f64,
    pub pos_distribution: Vec<(Upos, f64)>,
    /// Probability that a gold target copies its source's POS.
    pub pos_match_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            vocab_n: 2000,
            dim: 64,
            noise_sigma: 0.1,
            hub_count: 0,
            hub_subset: 50,
            anisotropy: 0.3,
            zipf_exponent: 1.0,
            freq_noise: 1.0,
            pos_distribution: vec![
                (Upos::Noun, 0.40),
                (Upos::Verb, 0.20),
                (Upos::Adj, 0.15),
                (Upos::Propn, 0.10),
                (Upos::Adv, 0.08),
                (Upos::Num, 0.04),
                (Upos::X, 0.03),
            ],
            pos_match_prob: 0.9,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.vocab_n < 2 {
            problems.push("vocab_n must be at least 2".to_string());
        }
        if self.dim < 2 {
            problems.push("dim must be at least 2".to_string());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            problems.push("noise_sigma must be a non-negative number".to_string());
        }
        if self.hub_count > self.vocab_n {
            problems.push("hub_count exceeds vocab_n".to_string());
        }
        if self.hub_count > 0 && (self.hub_subset == 0 || self.hub_subset > self.vocab_n) {
            problems.push("hub_subset must be in 1..=vocab_n".to_string());
        }
        if !(self.anisotropy >= 0.0) || !(self.freq_noise >= 0.0) || !(self.zipf_exponent > 0.0) {
            problems.push("anisotropy and freq_noise must be >= 0, zipf_exponent > 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.pos_match_prob) {
            problems.push("pos_match_prob must be in [0, 1]".to_string());
        }
        let total: f64 = self.pos_distribution.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 || self.pos_distribution.iter().any(|(_, p)| *p < 0.0) {
            problems.push(format!("pos_distribution must sum to 1 (got {total})"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }
}

pub struct SynthWorld {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    pub gold: TranslationDictionary,
    pub src_counts: Vec<u64>,
    pub tgt_counts: Vec<u64>,
    pub freq_src: FrequencyTable,
    pub freq_tgt: FrequencyTable,
    pub pos_src: PosTable,
    pub pos_tgt: PosTable,
    /// The rotation applied to source vectors.
    pub rotation: Array2<f64>,
    pub hubs: Vec<usize>,
    pub config: SynthConfig,
}

mod stream {
    pub const SOURCE: u64 = 1;
    pub const ROTATION: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const HUBS: u64 = 4;
    pub const FREQUENCY: u64 = 5;
    pub const POS: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const OFFSET: u64 = 8;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Haar-random orthogonal matrix from the QR decomposition of a Gaussian.
pub fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    Array2::from_shape_fn((dim, dim), |(i, j)| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    })
}

fn sample_tag(dist: &[(Upos, f64)], rng: &mut ChaCha8Rng) -> Upos {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(tag, p) in dist {
        acc += p;
        if u < acc {
            return tag;
        }
    }
    dist.last().map_or(Upos::X, |(t, _)| *t)
}

fn zipf_counts(ranks: &[usize], exponent: f64) -> Vec<u64> {
    ranks
        .iter()
        .map(|&r| ((1e7 / (r as f64).powf(exponent)).round() as u64).max(1))
        .collect()
}

pub fn src_word(i: usize) -> String {
    format!("s{i:05}")
}

pub fn tgt_word(i: usize) -> String {
    format!("t{i:05}")
}

pub fn gen_bilingual_world(cfg: &SynthConfig) -> Result<SynthWorld> {
    cfg.validate()?;
    let (n, d) = (cfg.vocab_n, cfg.dim);

    let mut rng = rng_for(cfg.seed, stream::OFFSET);
    let offset = Array1::from_shape_fn(d, |_| gaussian(&mut rng));
    let offset = &offset * (cfg.anisotropy / offset.dot(&offset).sqrt().max(f64::MIN_POSITIVE));

    let mut rng = rng_for(cfg.seed, stream::SOURCE);
    let scale = 1.0 / (d as f64).sqrt();
    let raw = Array2::from_shape_fn((n, d), |(_, j)| offset[j] + scale * gaussian(&mut rng));
    let src_vocab = Vocabulary::from_words((0..n).map(src_word))?;
    let src = normalize_rows(EmbeddingSpace::new(src_vocab, raw)?).0;

    let rotation = random_orthogonal(d, &mut rng_for(cfg.seed, stream::ROTATION));
    let mut rng = rng_for(cfg.seed, stream::NOISE);
    let mut tgt_m = src.matrix.dot(&rotation);
    tgt_m.mapv_inplace(|v| v + cfg.noise_sigma * gaussian(&mut rng));
    let tgt_vocab = Vocabulary::from_words((0..n).map(tgt_word))?;
    let mut tgt = normalize_rows(EmbeddingSpace::new(tgt_vocab, tgt_m)?).0;

    let mut rng = rng_for(cfg.seed, stream::HUBS);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut hubs: Vec<usize> = ids[..cfg.hub_count].to_vec();
    hubs.sort_unstable();
    let snapshot = tgt.matrix.clone();
    for &h in &hubs {
        let members = rand::seq::index::sample(&mut rng, n, cfg.hub_subset);
        let mut mean = Array1::<f64>::zeros(d);
        for m in members.iter() {
            mean += &snapshot.row(m);
        }
        let norm = mean.dot(&mean).sqrt();
        if norm > 0.0 {
            mean /= norm;
        }
        tgt.matrix.row_mut(h).assign(&mean);
    }

    let mut rng = rng_for(cfg.seed, stream::FREQUENCY);
    let mut src_rank: Vec<usize> = (1..=n).collect();
    src_rank.shuffle(&mut rng);
    let perturbed: Vec<f64> = src_rank
        .iter()
        .map(|&r| (r as f64).ln() + cfg.freq_noise * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| perturbed[a].total_cmp(&perturbed[b]).then(a.cmp(&b)));
    let mut tgt_rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        tgt_rank[i] = r + 1;
    }
    let src_counts = zipf_counts(&src_rank, cfg.zipf_exponent);
    let tgt_counts = zipf_counts(&tgt_rank, cfg.zipf_exponent);
    let table = |counts: &[u64]| {
        let listed: Vec<Option<u64>> = counts.iter().map(|&c| Some(c)).collect();
        FrequencyTable::from_counts(&listed, counts.iter().sum())
    };

    let mut rng = rng_for(cfg.seed, stream::POS);
    let mut src_tags = Vec::with_capacity(n);
    let mut tgt_tags = Vec::with_capacity(n);
    for _ in 0..n {
        let s = sample_tag(&cfg.pos_distribution, &mut rng);
        let copy = rng.random::<f64>() < cfg.pos_match_prob;
        let t = sample_tag(&cfg.pos_distribution, &mut rng);
        src_tags.push(s);
        tgt_tags.push(if copy { s } else { t });
    }

    Ok(SynthWorld {
        gold: (0..n).map(|i| (i, i)).collect(),
        freq_src: table(&src_counts)?,
        freq_tgt: table(&tgt_counts)?,
        src_counts,
        tgt_counts,
        pos_src: PosTable::new(src_tags),
        pos_tgt: PosTable::new(tgt_tags),
        src,
        tgt,
        rotation,
        hubs,
        config: cfg.clone(),
    })
}

/// File names written by [`SynthWorld::write`].
pub struct WorldFiles {
    pub src_emb: PathBuf,
    pub tgt_emb: PathBuf,
    pub dict: PathBuf,
    pub dict_train: PathBuf,
    pub dict_test: PathBuf,
    pub freq_src: PathBuf,
    pub freq_tgt: PathBuf,
    pub pos_src: PathBuf,
    pub pos_tgt: PathBuf,
}

impl WorldFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            src_emb: dir.join("src.vec"),
            tgt_emb: dir.join("tgt.vec"),
            dict: dir.join("dict.all.tsv"),
            dict_train: dir.join("dict.train.tsv"),
            dict_test: dir.join("dict.test.tsv"),
            freq_src: dir.join("freq.src.tsv"),
            freq_tgt: dir.join("freq.tgt.tsv"),
            pos_src: dir.join("pos.src.tsv"),
            pos_tgt: dir.join("pos.tgt.tsv"),
        }
    }
}

impl SynthWorld {
    /// Random split of the gold dictionary into `n_train` training sources
    /// and the rest for testing.
    pub fn split(&self, n_train: usize) -> (TranslationDictionary, TranslationDictionary) {
        let mut sources: Vec<usize> = self.gold.sources().collect();
        sources.shuffle(&mut rng_for(self.config.seed, stream::SPLIT));
        let n_train = n_train.min(sources.len());
        let mut train: Vec<usize> = sources[..n_train].to_vec();
        let mut test: Vec<usize> = sources[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        (self.gold.restrict(train), self.gold.restrict(test))
    }

    /// Writes every artifact in the corpus file formats.
    pub fn write(&self, dir: &Path, n_train: usize) -> Result<WorldFiles> {
        let files = WorldFiles::in_dir(dir);
        write_embeddings(&self.src, &files.src_emb)?;
        write_embeddings(&self.tgt, &files.tgt_emb)?;
        let (train, test) = self.split(n_train);
        self.gold.write(&files.dict, &self.src.vocab, &self.tgt.vocab)?;
        train.write(&files.dict_train, &self.src.vocab, &self.tgt.vocab)?;
        test.write(&files.dict_test, &self.src.vocab, &self.tgt.vocab)?;
        write_counts(&files.freq_src, &self.src.vocab, &self.src_counts)?;
        write_counts(&files.freq_tgt, &self.tgt.vocab, &self.tgt_counts)?;
        write_pos_table(&files.pos_src, &self.src.vocab, &self.pos_src)?;
        write_pos_table(&files.pos_tgt, &self.tgt.vocab, &self.pos_tgt)?;
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::spearman;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            vocab_n: 300,
            dim: 16,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = gen_bilingual_world(&small(3)).unwrap();
        let b = gen_bilingual_world(&small(3)).unwrap();
        assert_eq!(a.src, b.src);
        assert_eq!(a.tgt, b.tgt);
        assert_eq!(a.src_counts, b.src_counts);
        assert_eq!(a.pos_tgt, b.pos_tgt);
        let c = gen_bilingual_world(&small(4)).unwrap();
        assert_ne!(a.src, c.src);
    }

    #[test]
    fn hub_count_does_not_shift_other_streams() {
        let a = gen_bilingual_world(&small(5)).unwrap();
        let b = gen_bilingual_world(&SynthConfig {
            hub_count: 10,
            ..small(5)
        })
        .unwrap();
        assert_eq!(a.src, b.src);
        assert_eq!(a.src_counts, b.src_counts);
        assert_eq!(b.hubs.len(), 10);
    }

    #[test]
    fn gold_is_a_bijection_with_correlated_ranks() {
        let w = gen_bilingual_world(&small(6)).unwrap();
        assert_eq!(w.gold.len(), 300);
        assert_eq!(w.gold.num_pairs(), 300);
        let xs: Vec<f64> = (0..300).map(|i| w.freq_src.rank(i) as f64).collect();
        let ys: Vec<f64> = (0..300).map(|i| w.freq_tgt.rank(i) as f64).collect();
        assert!(spearman(&xs, &ys).unwrap() > 0.5);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = random_orthogonal(12, &mut rng_for(1, 2));
        let qtq = q.t().dot(&q);
        for ((i, j), v) in qtq.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = SynthConfig {
            pos_distribution: vec![(Upos::Noun, 0.5)],
            ..small(0)
        };
        assert!(gen_bilingual_world(&bad).is_err());
        let bad = SynthConfig {
            noise_sigma: -1.0,
            ..small(0)
        };
        assert!(gen_bilingual_world(&bad).is_err());
    }

    #[test]
    fn split_partitions_the_dictionary() {
        let w = gen_bilingual_world(&small(2)).unwrap();
        let (train, test) = w.split(100);
        assert_eq!(train.len(), 100);
        assert_eq!(test.len(), 200);
        assert!(train.sources().all(|s| !test.contains_source(s)));
    }
}
