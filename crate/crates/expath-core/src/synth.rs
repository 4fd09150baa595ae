//! Synthetic planted-rule dataset generator.
//!
//! Entities are arranged in disjoint groups: each group has a few source
//! entities wired through hub entities to a few destination entities along
//! the planted body relations, so every (source, destination) pair grounds
//! the rule body. Each such pair then draws one lot: with probability p the
//! head fact goes to the train split; small slices of the remaining mass
//! yield valid/test head facts instead. Body facts always live in train, so
//! every test head fact keeps a grounded body path, and the train-split
//! standard confidence of the planted rule concentrates around p.
//!
//! Background noise uses only relations untouched by any planted rule, so it
//! dilutes the embedding space without shifting the planted rule's metrics.

use std::collections::HashSet;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    /// Head relation index (labels are `r{i}`).
    pub head: usize,
    /// Body as (relation index, inverse flag) steps, length 1..=3.
    pub body: Vec<(usize, bool)>,
    /// Probability that a body-grounded pair materializes a train head fact.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_entities: usize,
    pub n_relations: usize,
    pub rules: Vec<PlantedRule>,
    /// Background train facts per entity, drawn on relations no rule uses.
    pub background_density: f64,
    pub sources_per_group: usize,
    pub dests_per_group: usize,
    /// Share of the pair-probability mass diverted to the test split.
    pub test_fraction: f64,
    /// Share diverted to the valid split.
    pub valid_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_entities: 1000,
            n_relations: 6,
            rules: vec![PlantedRule { head: 0, body: vec![(1, false), (2, false)], probability: 0.9 }],
            background_density: 1.0,
            sources_per_group: 8,
            dests_per_group: 3,
            test_fraction: 0.05,
            valid_fraction: 0.05,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities < 4 || self.n_relations == 0 {
            return Err(Error::Config("need at least 4 entities and 1 relation".into()));
        }
        if self.rules.is_empty() {
            return Err(Error::Config("at least one planted rule is required".into()));
        }
        for rule in &self.rules {
            if !(0.0..=1.0).contains(&rule.probability) || rule.probability == 0.0 {
                return Err(Error::Config("rule probability must be in (0, 1]".into()));
            }
            if rule.body.is_empty() || rule.body.len() > 3 {
                return Err(Error::Config("rule body length must be 1..=3".into()));
            }
            if rule.head >= self.n_relations || rule.body.iter().any(|(r, _)| *r >= self.n_relations) {
                return Err(Error::Config("rule references a relation beyond the dictionary".into()));
            }
        }
        if self.sources_per_group == 0 || self.dests_per_group == 0 {
            return Err(Error::Config("group sizes must be positive".into()));
        }
        if self.test_fraction < 0.0 || self.valid_fraction < 0.0 {
            return Err(Error::Config("split fractions must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSummary {
    pub rule: String,
    pub head_train: usize,
    pub head_valid: usize,
    pub head_test: usize,
    pub body_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub train: Vec<(String, String, String)>,
    pub valid: Vec<(String, String, String)>,
    pub test: Vec<(String, String, String)>,
    pub summaries: Vec<PlantedSummary>,
}

fn entity(i: usize) -> String {
    format!("e{i}")
}

fn relation(i: usize) -> String {
    format!("r{i}")
}

/// Generates the dataset. Identical specs produce identical output.
pub fn generate(spec: &SyntheticSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train: Vec<(String, String, String)> = Vec::new();
    let mut valid: Vec<(String, String, String)> = Vec::new();
    let mut test: Vec<(String, String, String)> = Vec::new();
    let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
    let mut summaries = Vec::new();

    // push a body step from x to y, honoring the inverse flag
    let push_fact = |splits: &mut Vec<(String, String, String)>,
                         seen: &mut HashSet<(usize, usize, usize)>,
                         h: usize,
                         r: usize,
                         t: usize| {
        if h != t && seen.insert((h, r, t)) {
            splits.push((entity(h), relation(r), entity(t)));
        }
    };

    let mut next_entity = 0usize;
    // entities reserved for the planted groups; the remainder only ever
    // carries background facts
    let group_budget = (spec.n_entities as f64 * 0.7) as usize;

    for rule in &spec.rules {
        // first intermediate layer holds one hub per source, so each (source,
        // dest) pair is backed by exactly one grounded body path; deeper
        // layers collapse to a single shared hub
        let hub_layers = rule.body.len() - 1;
        let layer_size =
            |layer: usize| if layer == 0 { spec.sources_per_group } else { 1 };
        let hubs: usize = (0..hub_layers).map(layer_size).sum();
        let per_group = spec.sources_per_group + hubs + spec.dests_per_group;
        let mut head_train = 0usize;
        let mut head_valid = 0usize;
        let mut head_test = 0usize;
        let mut body_pairs = 0usize;
        let per_rule_budget = group_budget / spec.rules.len();
        let n_groups = per_rule_budget / per_group;
        if n_groups == 0 {
            return Err(Error::Config("entity budget too small for one planted group".into()));
        }
        for _ in 0..n_groups {
            let sources: Vec<usize> = (0..spec.sources_per_group).map(|i| next_entity + i).collect();
            let mut cursor = next_entity + spec.sources_per_group;
            let mut layers: Vec<Vec<usize>> = Vec::new();
            for layer in 0..hub_layers {
                let size = layer_size(layer);
                layers.push((0..size).map(|i| cursor + i).collect());
                cursor += size;
            }
            let dests: Vec<usize> = (0..spec.dests_per_group).map(|i| cursor + i).collect();
            next_entity += per_group;

            // wire the body chain: source i → its own hub → (shared hubs) → dests
            for (step, &(r, inverse)) in rule.body.iter().enumerate() {
                let mut edges: Vec<(usize, usize)> = Vec::new();
                if hub_layers == 0 {
                    for &s in &sources {
                        for &d in &dests {
                            edges.push((s, d));
                        }
                    }
                } else if step == 0 {
                    for (i, &s) in sources.iter().enumerate() {
                        edges.push((s, layers[0][i]));
                    }
                } else {
                    let froms = &layers[step - 1];
                    let tos: &[usize] = if step == rule.body.len() - 1 { &dests } else { &layers[step] };
                    for &x in froms {
                        for &y in tos {
                            edges.push((x, y));
                        }
                    }
                }
                for (x, y) in edges {
                    if inverse {
                        push_fact(&mut train, &mut seen, y, r, x);
                    } else {
                        push_fact(&mut train, &mut seen, x, r, y);
                    }
                }
            }

            for &s in &sources {
                for &d in &dests {
                    body_pairs += 1;
                    let u: f64 = rng.gen();
                    let p = rule.probability;
                    let t_cut = p + spec.test_fraction.min((1.0 - p) / 2.0);
                    let v_cut = t_cut + spec.valid_fraction.min((1.0 - p) / 2.0);
                    if u < p {
                        push_fact(&mut train, &mut seen, s, rule.head, d);
                        head_train += 1;
                    } else if u < t_cut {
                        push_fact(&mut test, &mut seen, s, rule.head, d);
                        head_test += 1;
                    } else if u < v_cut {
                        push_fact(&mut valid, &mut seen, s, rule.head, d);
                        head_valid += 1;
                    }
                }
            }
        }
        if head_train == 0 {
            return Err(Error::Config(
                "spec infeasible: the planted rule materialized no train head facts".into(),
            ));
        }
        let body_str = rule
            .body
            .iter()
            .map(|&(r, inv)| format!("{}{}", relation(r), if inv { "'" } else { "" }))
            .collect::<Vec<_>>()
            .join(", ");
        summaries.push(PlantedSummary {
            rule: format!("{} <- {body_str}", relation(rule.head)),
            head_train,
            head_valid,
            head_test,
            body_pairs,
        });
    }

    // background noise on untouched relations only
    let used: HashSet<usize> = spec
        .rules
        .iter()
        .flat_map(|r| r.body.iter().map(|&(rel, _)| rel).chain(std::iter::once(r.head)))
        .collect();
    let free: Vec<usize> = (0..spec.n_relations).filter(|r| !used.contains(r)).collect();
    if !free.is_empty() {
        let n_bg = (spec.background_density * spec.n_entities as f64).round() as usize;
        let mut placed = 0usize;
        let mut attempts = 0usize;
        while placed < n_bg && attempts < n_bg * 20 {
            attempts += 1;
            let h = rng.gen_range(0..spec.n_entities);
            let t = rng.gen_range(0..spec.n_entities);
            let r = free[rng.gen_range(0..free.len())];
            if h != t && seen.insert((h, r, t)) {
                train.push((entity(h), relation(r), entity(t)));
                placed += 1;
            }
        }
    }

    Ok(SynthOutput { train, valid, test, summaries })
}

/// Writes train.txt / valid.txt / test.txt under `dir`.
pub fn write_dir(spec: &SyntheticSpec, dir: &Path) -> Result<SynthOutput> {
    let out = generate(spec)?;
    std::fs::create_dir_all(dir)?;
    for (name, triples) in [("train.txt", &out.train), ("valid.txt", &out.valid), ("test.txt", &out.test)] {
        let mut text = String::new();
        for (h, r, t) in triples {
            text.push_str(&format!("{h}\t{r}\t{t}\n"));
        }
        std::fs::write(dir.join(name), text)?;
    }
    Ok(out)
}
