//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;

use expath_core::attack::{
    self, baseline_random, baseline_sparse, export_explanations, import_external_explanations,
    mean_std, report_from_json, report_json, run_attack, select_targets, AttackReport, Target,
    TargetSet,
};
use expath_core::kg::{Fact, KnowledgeGraph};
use expath_core::kge::{train, EmbeddingModel, ModelConfig};
use expath_core::rules::{self, MinerConfig, RuleBody};
use expath_core::scorer::{
    choose_policy, dot_export, explanation_json, select_explanation, AblationFlags, PositionPolicy,
};
use expath_core::synth::{self, PlantedRule, SyntheticSpec};

pub fn write_json(value: &serde_json::Value, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_kg(data: &Path) -> anyhow::Result<KnowledgeGraph> {
    let kg = KnowledgeGraph::load_dir(data)?;
    let dups = kg.duplicate_counts();
    if dups.iter().any(|&d| d > 0) {
        eprintln!(
            "warning: dropped duplicate facts (train {}, valid {}, test {})",
            dups[0], dups[1], dups[2]
        );
    }
    Ok(kg)
}

fn thread_pool(jobs: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?)
}

/// Parses "rH <- rI, rJ'" into a planted-rule spec over `r{n}` labels.
fn parse_planted(text: &str) -> anyhow::Result<(usize, Vec<(usize, bool)>)> {
    let index = |name: &str| -> anyhow::Result<(usize, bool)> {
        let (name, inverse) = match name.strip_suffix('\'') {
            Some(s) => (s, true),
            None => (name, false),
        };
        let idx: usize = name
            .strip_prefix('r')
            .and_then(|d| d.parse().ok())
            .with_context(|| format!("relation {name:?} is not of the form r<index>"))?;
        Ok((idx, inverse))
    };
    let (head, body) = text.split_once("<-").with_context(|| format!("rule {text:?} lacks '<-'"))?;
    let (head_idx, head_inv) = index(head.trim())?;
    if head_inv {
        bail!("planted head relation cannot be inverted");
    }
    let body: Vec<(usize, bool)> = body
        .split(',')
        .map(|s| index(s.trim()))
        .collect::<anyhow::Result<_>>()?;
    Ok((head_idx, body))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_synth(
    entities: usize,
    relations: usize,
    rule_strings: &[String],
    prob: f64,
    density: f64,
    sources: usize,
    dests: usize,
    seed: Option<u64>,
    out: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let out = out.context("synth requires --out <dir>")?;
    let mut rules = Vec::new();
    for s in rule_strings {
        let (head, body) = parse_planted(s)?;
        rules.push(PlantedRule { head, body, probability: prob });
    }
    if rules.is_empty() {
        rules = SyntheticSpec::default().rules;
        for r in &mut rules {
            r.probability = prob;
        }
    }
    let spec = SyntheticSpec {
        n_entities: entities,
        n_relations: relations,
        rules,
        background_density: density,
        sources_per_group: sources,
        dests_per_group: dests,
        seed: seed.unwrap_or(7),
        ..Default::default()
    };
    let result = synth::write_dir(&spec, out)?;
    let summary = serde_json::json!({
        "out": out.display().to_string(),
        "train": result.train.len(),
        "valid": result.valid.len(),
        "test": result.test.len(),
        "planted": result.summaries,
    });
    write_json(&summary, None)
}

pub fn cmd_train(data: &Path, config: &ModelConfig, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let out = out.context("train requires --out <dir>")?;
    let kg = load_kg(data)?;
    let started = Instant::now();
    let model = train(&kg, config)?;
    eprintln!("trained in {:.1}s", started.elapsed().as_secs_f64());
    std::fs::create_dir_all(out)?;
    model.save(&out.join("model"))?;
    let (split_name, facts) = if kg.test_facts().is_empty() {
        ("train", kg.train_facts())
    } else {
        ("test", kg.test_facts())
    };
    let started = Instant::now();
    let (mrr, h1, _) = model.mrr_h1(&kg, facts, true);
    eprintln!("evaluated {} {split_name} facts in {:.1}s", facts.len(), started.elapsed().as_secs_f64());
    let metrics = serde_json::json!({
        "mrr": mrr,
        "h1": h1,
        "eval_split": split_name,
        "counts": {
            "entities": kg.n_entities(),
            "relations": kg.n_relations(),
            "train": kg.train_facts().len(),
            "valid": kg.valid_facts().len(),
            "test": kg.test_facts().len(),
        },
    });
    write_json(&metrics, Some(&out.join("metrics.json")))?;
    write_json(&metrics, None)
}

pub fn cmd_rules(data: &Path, rule_strings: &[String], config: &MinerConfig, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let kg = load_kg(data)?;
    let mut entries = Vec::new();
    for s in rule_strings {
        let rule = rules::parse_rule(&kg, s)?;
        let metrics = match rule.body {
            RuleBody::Cp(_) => rules::eval_cp(&kg, &rule, &config.thresholds)?,
            RuleBody::Pt { .. } => rules::eval_pt(&kg, &rule, &config.thresholds)?,
        };
        entries.push(serde_json::json!({
            "rule": rule.to_string_with(&kg),
            "supp": metrics.supp,
            "sc": metrics.sc,
            "hc": metrics.hc,
            "conf": metrics.conf,
        }));
    }
    write_json(&serde_json::json!({ "rules": entries }), out.map(|p| p.join("rules.json")).as_deref())
}

fn parse_prediction(kg: &KnowledgeGraph, text: &str) -> anyhow::Result<Fact> {
    let fields: Vec<&str> = if text.contains('\t') {
        text.split('\t').collect()
    } else {
        text.split(',').map(str::trim).collect()
    };
    if fields.len() != 3 {
        bail!("prediction {text:?} must be head,relation,tail");
    }
    Ok(kg.resolve(fields[0], fields[1], fields[2])?)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_explain(
    data: &Path,
    checkpoint: &Path,
    predictions: &[String],
    k: usize,
    policy: Option<PositionPolicy>,
    flags: AblationFlags,
    greedy: bool,
    miner: &MinerConfig,
    emit_dot: bool,
    jobs: Option<usize>,
    out: Option<&PathBuf>,
) -> anyhow::Result<()> {
    flags.validate()?;
    let kg = load_kg(data)?;
    let model = EmbeddingModel::load(checkpoint)?;
    if model.n_entities() != kg.n_entities() || model.n_relations() != kg.n_relations() {
        bail!(
            "checkpoint shape ({} entities, {} relations) does not match the dataset ({}, {})",
            model.n_entities(),
            model.n_relations(),
            kg.n_entities(),
            kg.n_relations()
        );
    }
    let facts: Vec<Fact> = predictions
        .iter()
        .map(|p| parse_prediction(&kg, p))
        .collect::<anyhow::Result<_>>()?;
    if facts.is_empty() {
        bail!("no predictions given; pass --prediction \"head,relation,tail\"");
    }
    let policy = policy.unwrap_or_else(|| choose_policy(&kg));
    let pool = thread_pool(jobs)?;
    let results: Vec<anyhow::Result<(serde_json::Value, String)>> = pool.install(|| {
        facts
            .par_iter()
            .map(|f| {
                let ruleset = rules::mine(&kg, &model, f, miner)?;
                let explanation = select_explanation(&kg, &ruleset, k, policy, &flags, greedy)?;
                let dot = dot_export(&kg, &explanation);
                Ok((explanation_json(&kg, &explanation), dot))
            })
            .collect()
    });
    let mut values = Vec::new();
    for r in results {
        values.push(r?);
    }
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (i, (json, dot)) in values.iter().enumerate() {
                write_json(json, Some(&dir.join(format!("explanation_{i}.json"))))?;
                if emit_dot {
                    std::fs::write(dir.join(format!("explanation_{i}.dot")), dot)?;
                }
            }
        }
        None => {
            let all: Vec<&serde_json::Value> = values.iter().map(|(j, _)| j).collect();
            write_json(&serde_json::json!({ "explanations": all }), None)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum AttackMethod {
    Expath,
    Sparse,
    Random,
    Import(PathBuf),
}

impl AttackMethod {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        match text {
            "expath" => Ok(Self::Expath),
            "sparse" => Ok(Self::Sparse),
            "random" => Ok(Self::Random),
            other => match other.strip_prefix("import:") {
                Some(path) => Ok(Self::Import(PathBuf::from(path))),
                None => bail!("unknown method {other:?} (expected expath|sparse|random|import:<path>)"),
            },
        }
    }

    fn name(&self, import_label: Option<&str>) -> String {
        match self {
            Self::Expath => "expath".into(),
            Self::Sparse => "sparse".into(),
            Self::Random => "random".into(),
            Self::Import(path) => import_label
                .map(str::to_string)
                .unwrap_or_else(|| format!("import:{}", path.display())),
        }
    }
}

/// Options steering one attack evaluation.
pub struct AttackOptions {
    pub targets: usize,
    pub method: AttackMethod,
    pub k: usize,
    pub runs: usize,
    pub policy: Option<PositionPolicy>,
    pub flags: AblationFlags,
    pub greedy: bool,
    pub per_target: bool,
    pub export: Option<PathBuf>,
    pub jobs: Option<usize>,
}

fn expath_removals(
    kg: &KnowledgeGraph,
    model: &EmbeddingModel,
    targets: &TargetSet,
    miner: &MinerConfig,
    opts: &AttackOptions,
    pool: &rayon::ThreadPool,
) -> anyhow::Result<Vec<Vec<Fact>>> {
    let policy = opts.policy.unwrap_or_else(|| choose_policy(kg));
    let results: Vec<anyhow::Result<Vec<Fact>>> = pool.install(|| {
        targets
            .targets
            .par_iter()
            .map(|t| {
                let ruleset = rules::mine(kg, model, &t.fact, miner)?;
                let explanation = select_explanation(kg, &ruleset, opts.k, policy, &opts.flags, opts.greedy)?;
                Ok(explanation.removal_set())
            })
            .collect()
    });
    results.into_iter().collect()
}

fn removals_for(
    kg: &KnowledgeGraph,
    model: &EmbeddingModel,
    targets: &TargetSet,
    miner: &MinerConfig,
    opts: &AttackOptions,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> anyhow::Result<(Vec<Vec<Fact>>, Option<String>)> {
    match &opts.method {
        AttackMethod::Expath => Ok((expath_removals(kg, model, targets, miner, opts, pool)?, None)),
        AttackMethod::Sparse => Ok((
            targets
                .targets
                .iter()
                .enumerate()
                .map(|(i, t)| baseline_sparse(kg, &t.fact, opts.k, seed.wrapping_add(i as u64)))
                .collect(),
            None,
        )),
        AttackMethod::Random => Ok((
            targets
                .targets
                .iter()
                .enumerate()
                .map(|(i, t)| baseline_random(kg, &t.fact, opts.k, seed.wrapping_add(i as u64)))
                .collect(),
            None,
        )),
        AttackMethod::Import(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let sets = import_external_explanations(kg, &text)?;
            let label: Option<String> = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v.get("method").and_then(|m| m.as_str()).map(str::to_string));
            let removals = targets
                .targets
                .iter()
                .map(|t| {
                    sets.iter()
                        .find(|(p, _)| *p == t.fact)
                        .map(|(_, facts)| facts.clone())
                        .unwrap_or_default()
                })
                .collect();
            Ok((removals, label))
        }
    }
}

fn attack_once(
    kg: &KnowledgeGraph,
    config: &ModelConfig,
    miner: &MinerConfig,
    opts: &AttackOptions,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> anyhow::Result<(AttackReport, TargetSet, Vec<Vec<Fact>>)> {
    let mut config = config.clone();
    config.seed = seed;
    let started = Instant::now();
    let model = train(kg, &config)?;
    eprintln!("seed {seed}: trained in {:.1}s", started.elapsed().as_secs_f64());
    let targets = select_targets(&model, kg, opts.targets, seed)?;
    eprintln!("seed {seed}: {} eligible targets", targets.targets.len());
    let (removals, label) = removals_for(kg, &model, &targets, miner, opts, seed, pool)?;
    let method_name = opts.method.name(label.as_deref());
    let started = Instant::now();
    let report = if !opts.per_target {
        run_attack(kg, &config, &targets, &removals, &method_name)?
    } else {
        // one retrain per target; rows re-assembled, manifest is the union
        let mut rows = Vec::new();
        let mut removed = std::collections::BTreeSet::new();
        for (t, removal) in targets.targets.iter().zip(&removals) {
            let single = TargetSet { targets: vec![Target { fact: t.fact, original: t.original }], seed };
            let r = run_attack(kg, &config, &single, std::slice::from_ref(removal), &method_name)?;
            rows.extend(r.rows);
            removed.extend(r.removed);
        }
        let (delta_mrr, delta_h1) = attack::aggregates(&rows);
        AttackReport {
            method: method_name.clone(),
            rows,
            delta_mrr,
            delta_h1,
            removed: removed.into_iter().collect(),
            seed,
        }
    };
    eprintln!(
        "seed {seed}: attack retrain+eval in {:.1}s (removed {} facts)",
        started.elapsed().as_secs_f64(),
        report.removed.len()
    );
    Ok((report, targets, removals))
}

pub fn cmd_attack(
    data: &Path,
    config: &ModelConfig,
    miner: &MinerConfig,
    opts: &AttackOptions,
    out: Option<&PathBuf>,
) -> anyhow::Result<()> {
    opts.flags.validate()?;
    if !(1..=8).contains(&opts.k) {
        bail!("--k must be within 1..=8");
    }
    if opts.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let kg = load_kg(data)?;
    let pool = thread_pool(opts.jobs)?;
    let mut reports = Vec::new();
    for run in 0..opts.runs {
        let seed = config.seed.wrapping_add(run as u64);
        let (report, targets, removals) = attack_once(&kg, config, miner, opts, seed, &pool)?;
        if run == 0 {
            if let Some(path) = &opts.export {
                let sets: Vec<(Fact, Vec<Fact>)> = targets
                    .targets
                    .iter()
                    .zip(&removals)
                    .map(|(t, r)| (t.fact, r.clone()))
                    .collect();
                let mut value = export_explanations(&kg, &sets);
                value
                    .as_object_mut()
                    .unwrap()
                    .insert("method".into(), serde_json::json!(report.method));
                write_json(&value, Some(path))?;
            }
        }
        reports.push(report);
    }

    let value = if reports.len() == 1 {
        report_json(&kg, &reports[0])
    } else {
        let mrrs: Vec<f64> = reports.iter().map(|r| r.delta_mrr).collect();
        let h1s: Vec<f64> = reports.iter().map(|r| r.delta_h1).collect();
        let (mrr_mean, mrr_std) = mean_std(&mrrs);
        let (h1_mean, h1_std) = mean_std(&h1s);
        serde_json::json!({
            "method": reports[0].method,
            "runs": reports.iter().map(|r| report_json(&kg, r)).collect::<Vec<_>>(),
            "delta_mrr_mean": mrr_mean,
            "delta_mrr_std": mrr_std,
            "delta_h1_mean": h1_mean,
            "delta_h1_std": h1_std,
        })
    };
    write_json(&value, out.map(|p| p.join("report.json")).as_deref())?;
    if out.is_some() {
        write_json(&value, None)?;
    }
    Ok(())
}

pub fn cmd_fuse(data: &Path, x: &Path, y: &Path, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let kg = load_kg(data)?;
    let rx = report_from_json(&kg, &std::fs::read_to_string(x)?)?;
    let ry = report_from_json(&kg, &std::fs::read_to_string(y)?)?;
    let fused = attack::fuse(&rx, &ry)?;
    write_json(&report_json(&kg, &fused), out.map(|p| p.join("fused.json")).as_deref())
}

pub fn cmd_report(paths: &[PathBuf]) -> anyhow::Result<()> {
    println!("{:<24} {:>8} {:>10} {:>10}", "method", "targets", "dMRR", "dH@1");
    for path in paths {
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?;
        let method = value.get("method").and_then(|m| m.as_str()).unwrap_or("?");
        if let Some(runs) = value.get("runs").and_then(|r| r.as_array()) {
            let n = runs
                .first()
                .and_then(|r| r.get("targets"))
                .and_then(|t| t.as_array())
                .map_or(0, Vec::len);
            println!(
                "{:<24} {:>8} {:>6.3}±{:.3} {:>6.3}±{:.3}",
                method,
                n,
                value.get("delta_mrr_mean").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                value.get("delta_mrr_std").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                value.get("delta_h1_mean").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                value.get("delta_h1_std").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
            );
        } else {
            let n = value.get("targets").and_then(|t| t.as_array()).map_or(0, Vec::len);
            println!(
                "{:<24} {:>8} {:>10.3} {:>10.3}",
                method,
                n,
                value.get("delta_mrr").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                value.get("delta_h1").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
            );
        }
    }
    Ok(())
}
