//! Flat `key = value` run configuration.
//!
//! Values come from built-in defaults, then an optional config file, then
//! command-line flags (flags win). Every problem is collected before
//! anything is reported, so one run lists all of them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lfbb_core::synth::SynthConfig;
use lfbb_core::{FeatureMask, GbdtParams, Metric, SimilarityParams, Upos};

macro_rules! run_keys {
    (values { $($v:ident => $vdoc:literal $([$($extra:tt)*])?,)* } switches { $($s:ident => $sdoc:literal,)* }) => {
        /// Every recognized key with a one-line description.
        pub const KEYS: &[(&str, &str)] = &[$((stringify!($v), $vdoc),)* $((stringify!($s), $sdoc),)*];

        /// Command-line spellings of the keys: `--top-k 20`, `--no-pos`.
        #[derive(Debug, Default, Clone, clap::Args)]
        pub struct Overrides {
            /// Flat `key = value` config file; flags override its values
            #[arg(long, value_name = "FILE")]
            pub config: Option<PathBuf>,
            $(
                #[doc = $vdoc]
                #[arg(long, value_name = "VALUE" $(, $($extra)*)?)]
                pub $v: Option<String>,
            )*
            $(
                #[doc = $sdoc]
                #[arg(long)]
                pub $s: bool,
            )*
        }

        impl Overrides {
            /// Flag values as raw pairs, in key order.
            pub fn pairs(&self) -> Vec<(String, String)> {
                let mut out = Vec::new();
                $(
                    if let Some(x) = &self.$v {
                        out.push((stringify!($v).to_string(), x.clone()));
                    }
                )*
                $(
                    if self.$s {
                        out.push((stringify!($s).to_string(), "true".to_string()));
                    }
                )*
                out
            }
        }
    };
}

run_keys! {
    values {
        src_emb => "source embeddings (word2vec text format)",
        tgt_emb => "target embeddings",
        train_dict => "training (seed) dictionary TSV",
        test_dict => "test dictionary TSV",
        valid_dict => "held-out dictionary for --tune-mix (default: 10% of train_dict)",
        freq_src => "source word counts TSV",
        freq_tgt => "target word counts TSV",
        pos_src => "source POS tags TSV",
        pos_tgt => "target POS tags TSV",
        ext_scores => "optional external reranker logits TSV",
        candidates => "candidates TSV written by `retrieve`",
        model => "model JSON written by `train`",
        words => "source words to export PCA coordinates for, one per line",
        out_dir => "output directory",
        metric => "retrieval metric: csls | cosine",
        k_csls => "CSLS neighborhood size",
        top_k => "candidates per source word",
        max_vocab => "read at most this many embedding rows",
        align => "map source embeddings with Procrustes on train_dict first",
        hub_k => "k of the k-occurrence hubness statistic",
        mode => "supervised | semi",
        n_aug => "pairs added by mutual-NN augmentation in semi mode",
        n_neg => "hard negatives per positive",
        n_trees => "boosting rounds",
        max_depth => "tree depth",
        learning_rate => "shrinkage",
        min_child_weight => "minimum hessian sum per child",
        l2_leaf_reg => "L2 regularization of leaf values",
        sigma => "steepness of the pairwise logistic",
        seed => "random seed",
        mix => "weight of the ranker when mixing with CSLS, in [0, 1]; a bare --mix means 0.5" [num_args = 0..=1, default_missing_value = "0.5"],
        min_n => "minimum bucket size of a correlation grid cell",
        pair_name => "row label of the correlation grid",
        pca_top => "candidates exported per PCA word",
        vocab_n => "synth: words per language",
        dim => "synth: embedding dimension",
        noise_sigma => "synth: per-coordinate target noise",
        hub_count => "synth: injected hub vectors",
        hub_subset => "synth: vectors averaged per hub",
        anisotropy => "synth: norm of the shared offset direction",
        zipf_exponent => "synth: Zipf exponent of word counts",
        freq_noise => "synth: half-width of the log-rank perturbation",
        pos_match_prob => "synth: probability a gold pair shares POS",
        pos_distribution => "synth: comma list of TAG:prob",
        n_train => "synth: sources in the training split",
    }
    switches {
        no_pos => "zero the POS feature columns",
        no_freq => "zero the frequency feature columns",
        tune_mix => "choose mix on a held-out dictionary and store it in the model",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Retrieve,
    Mine,
    Train,
    Eval,
    Analyze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Supervised,
    Semi,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "supervised" => Ok(Mode::Supervised),
            "semi" => Ok(Mode::Semi),
            _ => Err("expected supervised | semi".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub src_emb: Option<PathBuf>,
    pub tgt_emb: Option<PathBuf>,
    pub train_dict: Option<PathBuf>,
    pub test_dict: Option<PathBuf>,
    pub valid_dict: Option<PathBuf>,
    pub freq_src: Option<PathBuf>,
    pub freq_tgt: Option<PathBuf>,
    pub pos_src: Option<PathBuf>,
    pub pos_tgt: Option<PathBuf>,
    pub ext_scores: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub metric: Metric,
    pub similarity: SimilarityParams,
    pub max_vocab: Option<usize>,
    pub align: bool,
    pub hub_k: usize,
    pub mode: Mode,
    pub n_aug: usize,
    pub n_neg: usize,
    pub gbdt: GbdtParams,
    pub mask: FeatureMask,
    pub mix: Option<f64>,
    pub tune_mix: bool,
    pub min_n: usize,
    pub pair_name: String,
    pub pca_top: usize,
    pub synth: SynthConfig,
    pub n_train: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            src_emb: None,
            tgt_emb: None,
            train_dict: None,
            test_dict: None,
            valid_dict: None,
            freq_src: None,
            freq_tgt: None,
            pos_src: None,
            pos_tgt: None,
            ext_scores: None,
            candidates: None,
            model: None,
            words: None,
            out_dir: PathBuf::from("out"),
            metric: Metric::Csls,
            similarity: SimilarityParams::default(),
            max_vocab: None,
            align: true,
            hub_k: 10,
            mode: Mode::Supervised,
            n_aug: 4000,
            n_neg: 20,
            gbdt: GbdtParams::default(),
            mask: FeatureMask::default(),
            mix: None,
            tune_mix: false,
            min_n: 30,
            pair_name: "src-tgt".into(),
            pca_top: 10,
            synth: SynthConfig::default(),
            n_train: 1000,
        }
    }
}

/// Reads a config file into raw key/value pairs. Blank lines and `#`
/// comments are skipped; keys may use `-` or `_`.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("config: cannot read {}: {e}", path.display())])?;
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().replace('-', "_"), v.trim().to_string())),
            None => errors.push(format!("{}:{}: expected `key = value`", path.display(), i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(errors)
    }
}

fn parse_into<T: FromStr>(key: &str, value: &str, slot: &mut T, errors: &mut Vec<String>)
where
    T::Err: std::fmt::Display,
{
    match value.parse() {
        Ok(v) => *slot = v,
        Err(e) => errors.push(format!("{key}: cannot parse {value:?}: {e}")),
    }
}

fn parse_bool(key: &str, value: &str, slot: &mut bool, errors: &mut Vec<String>) {
    match value {
        "true" | "1" | "yes" => *slot = true,
        "false" | "0" | "no" => *slot = false,
        _ => errors.push(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn parse_pos_distribution(value: &str) -> Result<Vec<(Upos, f64)>, String> {
    value
        .split(',')
        .map(|item| {
            let (tag, p) = item
                .split_once(':')
                .ok_or_else(|| format!("expected TAG:prob, got {item:?}"))?;
            let tag: Upos = tag.trim().parse().map_err(|e| format!("{e}"))?;
            let p: f64 = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
            Ok((tag, p))
        })
        .collect()
}

impl RunConfig {
    /// Applies `pairs` in order over the defaults and validates the result
    /// for `command`.
    pub fn build(pairs: &[(String, String)], command: Command) -> Result<Self, Vec<String>> {
        let mut c = RunConfig::default();
        let mut e = Vec::new();
        let merged: BTreeMap<&str, &str> = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        for (&key, &value) in &merged {
            let path = || Some(PathBuf::from(value));
            match key {
                "src_emb" => c.src_emb = path(),
                "tgt_emb" => c.tgt_emb = path(),
                "train_dict" => c.train_dict = path(),
                "test_dict" => c.test_dict = path(),
                "valid_dict" => c.valid_dict = path(),
                "freq_src" => c.freq_src = path(),
                "freq_tgt" => c.freq_tgt = path(),
                "pos_src" => c.pos_src = path(),
                "pos_tgt" => c.pos_tgt = path(),
                "ext_scores" => c.ext_scores = path(),
                "candidates" => c.candidates = path(),
                "model" => c.model = path(),
                "words" => c.words = path(),
                "out_dir" => c.out_dir = PathBuf::from(value),
                "metric" => parse_into(key, value, &mut c.metric, &mut e),
                "k_csls" => parse_into(key, value, &mut c.similarity.k_csls, &mut e),
                "top_k" => parse_into(key, value, &mut c.similarity.top_k, &mut e),
                "max_vocab" => {
                    let mut v = 0usize;
                    parse_into(key, value, &mut v, &mut e);
                    c.max_vocab = Some(v);
                }
                "align" => parse_bool(key, value, &mut c.align, &mut e),
                "hub_k" => parse_into(key, value, &mut c.hub_k, &mut e),
                "mode" => parse_into(key, value, &mut c.mode, &mut e),
                "n_aug" => parse_into(key, value, &mut c.n_aug, &mut e),
                "n_neg" => parse_into(key, value, &mut c.n_neg, &mut e),
                "n_trees" => parse_into(key, value, &mut c.gbdt.n_trees, &mut e),
                "max_depth" => parse_into(key, value, &mut c.gbdt.max_depth, &mut e),
                "learning_rate" => parse_into(key, value, &mut c.gbdt.learning_rate, &mut e),
                "min_child_weight" => parse_into(key, value, &mut c.gbdt.min_child_weight, &mut e),
                "l2_leaf_reg" => parse_into(key, value, &mut c.gbdt.l2_leaf_reg, &mut e),
                "sigma" => parse_into(key, value, &mut c.gbdt.sigma, &mut e),
                "seed" => {
                    parse_into(key, value, &mut c.gbdt.seed, &mut e);
                    c.synth.seed = c.gbdt.seed;
                }
                "no_pos" => parse_bool(key, value, &mut c.mask.no_pos, &mut e),
                "no_freq" => parse_bool(key, value, &mut c.mask.no_freq, &mut e),
                "mix" => {
                    let mut v = 0.0f64;
                    parse_into(key, value, &mut v, &mut e);
                    c.mix = Some(v);
                }
                "tune_mix" => parse_bool(key, value, &mut c.tune_mix, &mut e),
                "min_n" => parse_into(key, value, &mut c.min_n, &mut e),
                "pair_name" => c.pair_name = value.to_string(),
                "pca_top" => parse_into(key, value, &mut c.pca_top, &mut e),
                "vocab_n" => parse_into(key, value, &mut c.synth.vocab_n, &mut e),
                "dim" => parse_into(key, value, &mut c.synth.dim, &mut e),
                "noise_sigma" => parse_into(key, value, &mut c.synth.noise_sigma, &mut e),
                "hub_count" => parse_into(key, value, &mut c.synth.hub_count, &mut e),
                "hub_subset" => parse_into(key, value, &mut c.synth.hub_subset, &mut e),
                "anisotropy" => parse_into(key, value, &mut c.synth.anisotropy, &mut e),
                "zipf_exponent" => parse_into(key, value, &mut c.synth.zipf_exponent, &mut e),
                "freq_noise" => parse_into(key, value, &mut c.synth.freq_noise, &mut e),
                "pos_match_prob" => parse_into(key, value, &mut c.synth.pos_match_prob, &mut e),
                "pos_distribution" => match parse_pos_distribution(value) {
                    Ok(d) => c.synth.pos_distribution = d,
                    Err(msg) => e.push(format!("pos_distribution: {msg}")),
                },
                "n_train" => parse_into(key, value, &mut c.n_train, &mut e),
                _ => e.push(format!("{key}: unknown configuration key")),
            }
        }
        c.validate(command, &mut e);
        if e.is_empty() {
            Ok(c)
        } else {
            Err(e)
        }
    }

    fn validate(&self, command: Command, e: &mut Vec<String>) {
        let required: &[(&str, &Option<PathBuf>)] = match command {
            Command::Synth => &[],
            Command::Retrieve => &[("src_emb", &self.src_emb), ("tgt_emb", &self.tgt_emb)],
            Command::Mine => &[
                ("src_emb", &self.src_emb),
                ("tgt_emb", &self.tgt_emb),
                ("train_dict", &self.train_dict),
                ("candidates", &self.candidates),
            ],
            Command::Train | Command::Eval => &[
                ("src_emb", &self.src_emb),
                ("tgt_emb", &self.tgt_emb),
                ("candidates", &self.candidates),
                ("freq_src", &self.freq_src),
                ("freq_tgt", &self.freq_tgt),
                ("pos_src", &self.pos_src),
                ("pos_tgt", &self.pos_tgt),
            ],
            Command::Analyze => &[
                ("src_emb", &self.src_emb),
                ("tgt_emb", &self.tgt_emb),
                ("freq_src", &self.freq_src),
                ("freq_tgt", &self.freq_tgt),
                ("pos_src", &self.pos_src),
            ],
        };
        for (key, value) in required {
            if value.is_none() {
                e.push(format!("{key}: required by this command"));
            }
        }
        match command {
            Command::Train => {
                if self.train_dict.is_none() {
                    e.push("train_dict: required by this command".into());
                }
            }
            Command::Eval => {
                if self.test_dict.is_none() {
                    e.push("test_dict: required by this command".into());
                }
                if self.model.is_none() {
                    e.push("model: required by this command".into());
                }
            }
            Command::Analyze => {
                if self.train_dict.is_none() && self.test_dict.is_none() {
                    e.push("train_dict or test_dict: one is required by this command".into());
                }
                if self.words.is_some() && self.candidates.is_none() {
                    e.push("candidates: required when words is set".into());
                }
            }
            _ => {}
        }

        // inputs that are set must exist
        let inputs = [
            ("src_emb", &self.src_emb),
            ("tgt_emb", &self.tgt_emb),
            ("train_dict", &self.train_dict),
            ("test_dict", &self.test_dict),
            ("valid_dict", &self.valid_dict),
            ("freq_src", &self.freq_src),
            ("freq_tgt", &self.freq_tgt),
            ("pos_src", &self.pos_src),
            ("pos_tgt", &self.pos_tgt),
            ("ext_scores", &self.ext_scores),
            ("candidates", &self.candidates),
            ("model", &self.model),
            ("words", &self.words),
        ];
        if command != Command::Synth {
            for (key, value) in inputs {
                if let Some(p) = value {
                    if !p.is_file() {
                        e.push(format!("{key}: file not found: {}", p.display()));
                    }
                }
            }
        }

        if self.similarity.k_csls == 0 || self.similarity.top_k == 0 {
            e.push("k_csls and top_k must be at least 1".into());
        }
        if self.hub_k == 0 || self.hub_k > self.similarity.top_k {
            e.push(format!("hub_k must be in 1..=top_k ({})", self.similarity.top_k));
        }
        if self.max_vocab == Some(0) {
            e.push("max_vocab must be at least 1".into());
        }
        if let Some(m) = self.mix {
            if !(0.0..=1.0).contains(&m) {
                e.push(format!("mix: {m} is outside [0, 1]"));
            }
        }
        if self.pca_top == 0 {
            e.push("pca_top must be at least 1".into());
        }
        if let Err(err) = self.gbdt.validate() {
            e.push(err.to_string());
        }
        if command == Command::Synth {
            if let Err(err) = self.synth.validate() {
                e.push(err.to_string());
            }
            if self.n_train > self.synth.vocab_n {
                e.push("n_train exceeds vocab_n".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn all_problems_are_reported_together() {
        let errors = RunConfig::build(&pairs(&[("top_k", "x"), ("bogus", "1")]), Command::Retrieve).unwrap_err();
        let text = errors.join("\n");
        assert!(text.contains("top_k"));
        assert!(text.contains("bogus"));
        assert!(text.contains("src_emb"));
        assert!(text.contains("tgt_emb"));
    }

    #[test]
    fn later_pairs_override_earlier_ones() {
        let c = RunConfig::build(&pairs(&[("n_neg", "3"), ("n_neg", "5")]), Command::Synth).unwrap();
        assert_eq!(c.n_neg, 5);
    }

    #[test]
    fn synth_values_are_parsed() {
        let c = RunConfig::build(
            &pairs(&[("pos_distribution", "NOUN:0.5,VERB:0.5"), ("seed", "7"), ("hub_count", "3")]),
            Command::Synth,
        )
        .unwrap();
        assert_eq!(c.synth.pos_distribution, vec![(Upos::Noun, 0.5), (Upos::Verb, 0.5)]);
        assert_eq!(c.synth.seed, 7);
        assert_eq!(c.synth.hub_count, 3);
    }

    #[test]
    fn documented_keys_are_all_accepted() {
        for (key, _) in KEYS {
            let value = match *key {
                "metric" => "csls",
                "mode" => "semi",
                "align" | "no_pos" | "no_freq" | "tune_mix" => "false",
                "pos_distribution" => "NOUN:1",
                "pair_name" => "x",
                "mix" | "noise_sigma" | "anisotropy" | "freq_noise" | "pos_match_prob" => "0.5",
                "learning_rate" | "min_child_weight" | "l2_leaf_reg" | "sigma" | "zipf_exponent" => "1",
                k if k.ends_with("dict") || k.contains("emb") || k.contains("_src") || k.contains("_tgt") => "p",
                "ext_scores" | "candidates" | "model" | "words" | "out_dir" => "p",
                _ => "10",
            };
            let errors = RunConfig::build(&pairs(&[(key, value)]), Command::Synth).err().unwrap_or_default();
            assert!(errors.iter().all(|m| !m.contains("unknown")), "{key}: {errors:?}");
        }
    }
}
