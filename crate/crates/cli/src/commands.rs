//! One function per subcommand. Each loads what it needs, computes, and
//! only then creates the output directory and writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lfbb_core::corpus::{
    load_dictionary, load_embeddings, load_frequency_table, load_pos_table, normalize_rows,
};
use lfbb_core::eval::{
    evaluate, explain_predictions, pca_project, pos_freq_correlation, write_correlation_grid,
    write_explanations, write_pca_points, write_per_pos, write_report, ExplainContext, EvalInputs,
    PointRole,
};
use lfbb_core::features::{build_groups, ExternalScores, FeatureContext};
use lfbb_core::ltr::{
    combine_with_retriever, load_model, predict_groups, save_model, select_mix, train, write_trace,
};
use lfbb_core::retrieval::{
    align_procrustes, apply_map, augment_dictionary, k_occurrence, mine_hard_negatives,
    mutual_nn_pairs, retrieve, skewness, write_hard_negatives, AugmentReport,
};
use lfbb_core::synth::{gen_bilingual_world, WorldFiles};
use lfbb_core::{
    CandidateSet, EmbeddingSpace, FrequencyTable, PosTable, RankingGroup, TranslationDictionary,
    WordId,
};

use crate::config::{Mode, RunConfig};

pub type Outcome = anyhow::Result<()>;

fn input(path: &Option<PathBuf>) -> &Path {
    path.as_deref().expect("presence checked during validation")
}

fn load_space(path: &Path, max_vocab: Option<usize>) -> anyhow::Result<EmbeddingSpace> {
    let (space, report) = load_embeddings(path, max_vocab)?;
    if !report.duplicates.is_empty() {
        warn!("{}: {} duplicate words skipped", path.display(), report.duplicates.len());
    }
    let (space, norm) = normalize_rows(space);
    if norm.zero_rows > 0 {
        warn!("{}: {} zero vectors", path.display(), norm.zero_rows);
    }
    info!("{}: {} x {}", path.display(), space.len(), space.dim());
    Ok(space)
}

struct Spaces {
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
}

fn load_spaces(c: &RunConfig) -> anyhow::Result<Spaces> {
    Ok(Spaces {
        src: load_space(input(&c.src_emb), c.max_vocab)?,
        tgt: load_space(input(&c.tgt_emb), c.max_vocab)?,
    })
}

fn load_dict(path: &Path, s: &Spaces) -> anyhow::Result<TranslationDictionary> {
    let (dict, report) = load_dictionary(path, &s.src.vocab, &s.tgt.vocab)?;
    if report.oov_src + report.oov_tgt > 0 {
        warn!(
            "{}: skipped {} pairs with unknown source and {} with unknown target words",
            path.display(),
            report.oov_src,
            report.oov_tgt
        );
    }
    info!("{}: {} sources, {} pairs", path.display(), dict.len(), dict.num_pairs());
    Ok(dict)
}

fn optional_dict(path: &Option<PathBuf>, s: &Spaces) -> anyhow::Result<Option<TranslationDictionary>> {
    path.as_deref().map(|p| load_dict(p, s)).transpose()
}

/// Source space mapped by Procrustes on `seed` when alignment is on.
fn mapped_source(c: &RunConfig, s: &Spaces, seed: Option<&TranslationDictionary>) -> anyhow::Result<EmbeddingSpace> {
    match seed {
        Some(d) if c.align => {
            let w = align_procrustes(&s.src, &s.tgt, d)?;
            Ok(apply_map(&s.src, &w)?)
        }
        _ => Ok(s.src.clone()),
    }
}

fn create_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

struct Resources {
    freq_src: FrequencyTable,
    freq_tgt: FrequencyTable,
    pos_src: PosTable,
    pos_tgt: PosTable,
    ext: Option<ExternalScores>,
}

fn load_resources(c: &RunConfig, s: &Spaces) -> anyhow::Result<Resources> {
    let pos = |path: &Path, vocab| -> anyhow::Result<PosTable> {
        let (table, report) = load_pos_table(path, vocab)?;
        if report.unknown_tags > 0 {
            warn!("{}: {} unknown tags read as X", path.display(), report.unknown_tags);
        }
        Ok(table)
    };
    Ok(Resources {
        freq_src: load_frequency_table(input(&c.freq_src), &s.src.vocab)?,
        freq_tgt: load_frequency_table(input(&c.freq_tgt), &s.tgt.vocab)?,
        pos_src: pos(input(&c.pos_src), &s.src.vocab)?,
        pos_tgt: pos(input(&c.pos_tgt), &s.tgt.vocab)?,
        ext: c
            .ext_scores
            .as_deref()
            .map(|p| ExternalScores::load(p, &s.src.vocab, &s.tgt.vocab))
            .transpose()?,
    })
}

fn groups_for(
    dict: &TranslationDictionary,
    cands: &CandidateSet,
    r: &Resources,
    mask: lfbb_core::FeatureMask,
) -> anyhow::Result<Vec<RankingGroup>> {
    let ctx = FeatureContext {
        freq_src: &r.freq_src,
        freq_tgt: &r.freq_tgt,
        pos_src: &r.pos_src,
        pos_tgt: &r.pos_tgt,
        ext: r.ext.as_ref(),
        mask,
    };
    let sources: Vec<WordId> = dict.sources().collect();
    Ok(build_groups(&sources, Some(dict), cands, &ctx)?)
}

pub fn synth(c: &RunConfig) -> Outcome {
    let world = gen_bilingual_world(&c.synth)?;
    create_out_dir(&c.out_dir)?;
    let files: WorldFiles = world.write(&c.out_dir, c.n_train)?;
    let conf = c.out_dir.join("world.conf");
    let mut f = fs::File::create(&conf).with_context(|| format!("cannot write {}", conf.display()))?;
    for (key, path) in [
        ("src_emb", &files.src_emb),
        ("tgt_emb", &files.tgt_emb),
        ("train_dict", &files.dict_train),
        ("test_dict", &files.dict_test),
        ("freq_src", &files.freq_src),
        ("freq_tgt", &files.freq_tgt),
        ("pos_src", &files.pos_src),
        ("pos_tgt", &files.pos_tgt),
    ] {
        writeln!(f, "{key} = {}", path.display())?;
    }
    #[derive(Serialize)]
    struct WorldReport<'a> {
        config: &'a lfbb_core::synth::SynthConfig,
        n_train: usize,
        hubs: Vec<&'a str>,
    }
    write_json(
        &c.out_dir.join("world.json"),
        &WorldReport {
            config: &c.synth,
            n_train: c.n_train,
            hubs: world.hubs.iter().map(|&h| world.tgt.vocab.word(h)).collect(),
        },
    )?;
    println!("wrote synthetic world to {}", c.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct Coverage {
    sources: usize,
    gold_missed: usize,
    gold_missed_rate: f64,
}

fn coverage(dict: &TranslationDictionary, cands: &CandidateSet) -> Coverage {
    let missed = dict
        .iter()
        .filter(|(s, gold)| {
            cands
                .get(*s)
                .is_none_or(|list| !list.iter().any(|c| gold.contains(&c.target)))
        })
        .count();
    Coverage {
        sources: dict.len(),
        gold_missed: missed,
        gold_missed_rate: if dict.is_empty() { 0.0 } else { missed as f64 / dict.len() as f64 },
    }
}

pub fn cmd_retrieve(c: &RunConfig) -> Outcome {
    let s = load_spaces(c)?;
    let train_dict = optional_dict(&c.train_dict, &s)?;
    let test_dict = optional_dict(&c.test_dict, &s)?;
    let mapped = mapped_source(c, &s, train_dict.as_ref())?;
    let (cands, _) = retrieve(&mapped, &s.tgt, &c.similarity, c.metric)?;
    let counts: Vec<f64> = k_occurrence(&cands, s.tgt.len(), c.hub_k)
        .into_iter()
        .map(|v| v as f64)
        .collect();

    #[derive(Serialize)]
    struct RetrievalReport {
        metric: String,
        k_csls: usize,
        top_k: usize,
        n_src: usize,
        n_tgt: usize,
        aligned: bool,
        hub_k: usize,
        hubness_skew: f64,
        coverage: BTreeMap<&'static str, Coverage>,
    }
    let mut cov = BTreeMap::new();
    if let Some(d) = &train_dict {
        cov.insert("train", coverage(d, &cands));
    }
    if let Some(d) = &test_dict {
        cov.insert("test", coverage(d, &cands));
    }
    let report = RetrievalReport {
        metric: c.metric.to_string(),
        k_csls: c.similarity.k_csls,
        top_k: c.similarity.top_k,
        n_src: s.src.len(),
        n_tgt: s.tgt.len(),
        aligned: c.align && train_dict.is_some(),
        hub_k: c.hub_k,
        hubness_skew: skewness(&counts),
        coverage: cov,
    };

    create_out_dir(&c.out_dir)?;
    cands.write(&c.out_dir.join("candidates.tsv"), &s.src.vocab, &s.tgt.vocab)?;
    write_json(&c.out_dir.join("retrieval_report.json"), &report)?;
    println!("hubness skew (N_{}): {:.4}", c.hub_k, report.hubness_skew);
    for (name, cv) in &report.coverage {
        println!("{name} gold missed: {:.4}", cv.gold_missed_rate);
    }
    Ok(())
}

pub fn cmd_mine(c: &RunConfig) -> Outcome {
    let s = load_spaces(c)?;
    let dict = load_dict(input(&c.train_dict), &s)?;
    let cands = CandidateSet::load(input(&c.candidates), &s.src.vocab, &s.tgt.vocab)?;
    let rows = mine_hard_negatives(&dict, &cands, c.n_neg)?;
    create_out_dir(&c.out_dir)?;
    write_hard_negatives(&c.out_dir.join("hard_negatives.tsv"), &rows, &s.src.vocab, &s.tgt.vocab)?;
    println!("{} labeled pairs", rows.len());
    Ok(())
}

/// Candidate mix weights tried by `--tune-mix`.
const MIX_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Share of training sources held out for `--tune-mix` without `valid_dict`.
const HOLDOUT_SHARE: f64 = 0.1;

/// Splits off a seeded random share of the dictionary's sources.
fn holdout_split(dict: &TranslationDictionary, seed: u64) -> (TranslationDictionary, TranslationDictionary) {
    let mut sources: Vec<_> = dict.sources().collect();
    sources.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = ((sources.len() as f64 * HOLDOUT_SHARE).ceil() as usize).min(sources.len().saturating_sub(1));
    let (hold, keep) = sources.split_at(n_hold);
    (dict.restrict(keep.iter().copied()), dict.restrict(hold.iter().copied()))
}

pub fn cmd_train(c: &RunConfig) -> Outcome {
    let s = load_spaces(c)?;
    let seed = load_dict(input(&c.train_dict), &s)?;
    let res = load_resources(c, &s)?;
    let cands = CandidateSet::load(input(&c.candidates), &s.src.vocab, &s.tgt.vocab)?;

    let (dict, augment) = match c.mode {
        Mode::Supervised => (seed.clone(), None),
        Mode::Semi => {
            let mapped = mapped_source(c, &s, Some(&seed))?;
            let mined = mutual_nn_pairs(&mapped, &s.tgt, &c.similarity)?;
            let (dict, report) = augment_dictionary(&seed, &mined, c.n_aug);
            info!("augmentation: {} mutual pairs, {} added", mined.len(), report.added);
            (dict, Some(report))
        }
    };

    let (dict, valid) = match (c.tune_mix, &c.valid_dict) {
        (true, None) => {
            let (keep, hold) = holdout_split(&dict, c.gbdt.seed);
            (keep, Some(hold))
        }
        (true, Some(p)) => (dict, Some(load_dict(p, &s)?)),
        (false, _) => (dict, None),
    };

    let groups = groups_for(&dict, &cands, &res, c.mask)?;
    let out = train(&groups, &c.gbdt).map_err(|e| {
        let missed = groups.iter().filter(|g| g.gold_missed).count();
        anyhow!("{e} ({} groups, {missed} with no gold among their candidates)", groups.len())
    })?;
    let mut model = out.model;
    model.feature_mask = c.mask;

    if let Some(valid) = &valid {
        let vgroups = groups_for(valid, &cands, &res, c.mask)?;
        let ranker = predict_groups(&model, &vgroups)?;
        let (mix, p1) = select_mix(&vgroups, &ranker, &MIX_GRID)?;
        info!("tuned mix {mix} (validation P@1 {p1:.4})");
        model.tuned_mix = Some(mix);
    }

    #[derive(Serialize)]
    struct TrainReport {
        mode: &'static str,
        dictionary_sources: usize,
        augmentation: Option<AugmentSummary>,
        n_groups: usize,
        n_skipped: usize,
        final_train_map: f64,
        tuned_mix: Option<f64>,
    }
    #[derive(Serialize)]
    struct AugmentSummary {
        requested: usize,
        added: usize,
        shortfall: usize,
    }
    let final_map = out.trace.last().copied().unwrap_or(0.0);
    let report = TrainReport {
        mode: match c.mode {
            Mode::Supervised => "supervised",
            Mode::Semi => "semi",
        },
        dictionary_sources: dict.len(),
        augmentation: augment.map(|a: AugmentReport| AugmentSummary {
            requested: a.requested,
            added: a.added,
            shortfall: a.shortfall,
        }),
        n_groups: out.n_groups,
        n_skipped: out.n_skipped,
        final_train_map: final_map,
        tuned_mix: model.tuned_mix,
    };

    create_out_dir(&c.out_dir)?;
    save_model(&model, &c.out_dir.join("model.json"))?;
    write_trace(&c.out_dir.join("train_trace.tsv"), &out.trace)?;
    write_json(&c.out_dir.join("train_report.json"), &report)?;
    println!("train MAP: {final_map:.4} ({} groups, {} skipped)", out.n_groups, out.n_skipped);
    Ok(())
}

pub fn cmd_eval(c: &RunConfig) -> Outcome {
    let s = load_spaces(c)?;
    let dict = load_dict(input(&c.test_dict), &s)?;
    let res = load_resources(c, &s)?;
    let cands = CandidateSet::load(input(&c.candidates), &s.src.vocab, &s.tgt.vocab)?;
    let model = load_model(input(&c.model))?;
    model.check_schema()?;

    let groups = groups_for(&dict, &cands, &res, model.feature_mask)?;
    let ranker = predict_groups(&model, &groups)?;
    let mix = c.mix.or(model.tuned_mix);
    let scores = match mix {
        Some(m) => {
            let csls: Vec<Vec<f64>> = groups.iter().map(|g| g.csls.clone()).collect();
            combine_with_retriever(&ranker, &csls, m)?
        }
        None => ranker,
    };
    let inputs = EvalInputs {
        dict: &dict,
        freq_src: &res.freq_src,
        freq_tgt: &res.freq_tgt,
        pos_src: &res.pos_src,
    };
    let report = evaluate(&groups, &scores, &inputs, mix);
    let explanations = explain_predictions(
        &groups,
        &scores,
        &ExplainContext {
            src_vocab: &s.src.vocab,
            tgt_vocab: &s.tgt.vocab,
            freq_src: &res.freq_src,
            freq_tgt: &res.freq_tgt,
            pos_src: &res.pos_src,
            pos_tgt: &res.pos_tgt,
        },
    );

    create_out_dir(&c.out_dir)?;
    write_report(&c.out_dir.join("report.json"), &report)?;
    write_per_pos(&c.out_dir.join("per_pos.tsv"), &report.per_pos)?;
    write_explanations(&c.out_dir.join("explanations.tsv"), &explanations)?;
    println!("P@1x100: {}", report.p_at_1_x100);
    Ok(())
}

/// File-name-safe form of a word.
fn file_stem(word: &str) -> String {
    word.chars()
        .map(|ch| if ch.is_alphanumeric() || ch == '-' || ch == '_' { ch } else { '_' })
        .collect()
}

pub fn cmd_analyze(c: &RunConfig) -> Outcome {
    let s = load_spaces(c)?;
    let train_dict = optional_dict(&c.train_dict, &s)?;
    let test_dict = optional_dict(&c.test_dict, &s)?;
    let freq_src = load_frequency_table(input(&c.freq_src), &s.src.vocab)?;
    let freq_tgt = load_frequency_table(input(&c.freq_tgt), &s.tgt.vocab)?;
    let (pos_src, _) = load_pos_table(input(&c.pos_src), &s.src.vocab)?;

    let mut all = TranslationDictionary::new();
    for d in train_dict.iter().chain(&test_dict) {
        for (src, tgt) in d.pairs() {
            all.insert(src, tgt);
        }
    }
    let grid = pos_freq_correlation(&all, &freq_src, &freq_tgt, &pos_src, c.min_n);

    let mut exports = Vec::new();
    if let Some(words_path) = &c.words {
        let cands = CandidateSet::load(input(&c.candidates), &s.src.vocab, &s.tgt.vocab)?;
        let mapped = mapped_source(c, &s, train_dict.as_ref())?;
        let text = fs::read_to_string(words_path)
            .with_context(|| format!("cannot read {}", words_path.display()))?;
        for word in text.lines().map(str::trim).filter(|w| !w.is_empty() && !w.starts_with('#')) {
            let Some(src) = s.src.vocab.lookup(word) else {
                warn!("PCA word {word:?} is not in the source vocabulary");
                continue;
            };
            let mut labels = vec![(word.to_string(), PointRole::Source)];
            let mut rows = vec![mapped.row(src).to_owned()];
            if let Some(&gold) = all.gold(src).and_then(|g| g.iter().next()) {
                labels.push((s.tgt.vocab.word(gold).to_string(), PointRole::Gold));
                rows.push(s.tgt.row(gold).to_owned());
            }
            for cand in cands.get(src).unwrap_or(&[]).iter().take(c.pca_top) {
                labels.push((s.tgt.vocab.word(cand.target).to_string(), PointRole::Candidate));
                rows.push(s.tgt.row(cand.target).to_owned());
            }
            let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
            let points = ndarray::stack(ndarray::Axis(0), &views)?;
            exports.push((file_stem(word), labels, pca_project(points.view())?));
        }
    }

    create_out_dir(&c.out_dir)?;
    write_correlation_grid(&c.out_dir.join("correlation_grid.tsv"), &[(c.pair_name.clone(), grid)])?;
    if !exports.is_empty() {
        let dir = c.out_dir.join("pca");
        create_out_dir(&dir)?;
        for (stem, labels, coords) in &exports {
            write_pca_points(&dir.join(format!("{stem}.tsv")), labels, coords)?;
        }
    }
    println!("wrote correlation grid and {} PCA exports", exports.len());
    Ok(())
}
