//! Embedding models over a knowledge graph: scoring, deterministic training,
//! filtered ranking, and the mimic post-training used by rule pruning.
//!
//! Training is single-threaded and fully determined by `(graph, config)`;
//! identical inputs produce bit-identical embedding tables. The three model
//! families share one SGD loop: the translational family uses margin ranking
//! loss with per-epoch renormalization onto the unit ball, the bilinear
//! families use logistic loss on +/-1 labels with L2 regularization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, Fact, KnowledgeGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// TransE: score is the negative Euclidean distance -||h + r - t||.
    TransE,
    /// ComplEx: Re<h, r, conj(t)>; vectors store real halves then imaginary.
    Complex,
    /// DistMult: trilinear dot product.
    DistMult,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transe" => Ok(Self::TransE),
            "complex" => Ok(Self::Complex),
            "distmult" => Ok(Self::DistMult),
            other => Err(Error::Config(format!("unknown model family: {other}"))),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::TransE => "transe",
            Self::Complex => "complex",
            Self::DistMult => "distmult",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    pub dimension: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives: usize,
    pub batch_size: usize,
    pub regularization: f64,
    pub margin: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: ModelFamily::Complex,
            dimension: 32,
            epochs: 100,
            learning_rate: 0.05,
            negatives: 5,
            batch_size: 256,
            regularization: 1e-3,
            margin: 1.0,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if self.family == ModelFamily::Complex && self.dimension % 2 != 0 {
            return Err(Error::Config("complex family requires an even dimension".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return Err(Error::Config("negatives and batch size must be positive".into()));
        }
        if self.regularization < 0.0 {
            return Err(Error::Config("regularization must be non-negative".into()));
        }
        if self.margin <= 0.0 {
            return Err(Error::Config("margin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    config: ModelConfig,
    n_entities: usize,
    n_relations: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub fact: Fact,
    pub head_rank: usize,
    pub tail_rank: usize,
}

impl RankResult {
    pub fn reciprocal_rank(&self) -> f64 {
        0.5 * (1.0 / self.head_rank as f64 + 1.0 / self.tail_rank as f64)
    }

    pub fn hits_at_1(&self) -> f64 {
        0.5 * ((self.head_rank == 1) as u8 as f64 + (self.tail_rank == 1) as u8 as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSide {
    Head,
    Tail,
}

fn score_vectors(family: ModelFamily, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    match family {
        ModelFamily::TransE => {
            let mut sum = 0.0;
            for k in 0..h.len() {
                let d = h[k] + r[k] - t[k];
                sum += d * d;
            }
            -sum.sqrt()
        }
        ModelFamily::DistMult => (0..h.len()).map(|k| h[k] * r[k] * t[k]).sum(),
        ModelFamily::Complex => {
            let half = h.len() / 2;
            let mut sum = 0.0;
            for k in 0..half {
                let (hr, hi) = (h[k], h[half + k]);
                let (rr, ri) = (r[k], r[half + k]);
                let (tr, ti) = (t[k], t[half + k]);
                sum += (hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti;
            }
            sum
        }
    }
}

/// Logistic squashing of a raw score into (0, 1); strictly increasing, so
/// score ratios over it stay well-defined for negative translational scores.
pub fn plausibility_of_score(score: f64) -> f64 {
    1.0 / (1.0 + (-score).exp())
}

impl EmbeddingModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn entity_vec(&self, e: EntityId) -> &[f64] {
        let d = self.config.dimension;
        &self.entities[e.index() * d..(e.index() + 1) * d]
    }

    pub fn relation_vec(&self, r: u32) -> &[f64] {
        let d = self.config.dimension;
        &self.relations[r as usize * d..(r as usize + 1) * d]
    }

    pub fn entity_table(&self) -> &[f64] {
        &self.entities
    }

    pub fn relation_table(&self) -> &[f64] {
        &self.relations
    }

    pub fn score(&self, h: EntityId, r: u32, t: EntityId) -> f64 {
        score_vectors(self.config.family, self.entity_vec(h), self.relation_vec(r), self.entity_vec(t))
    }

    /// Score with explicit endpoint vectors (mimic entities live outside the
    /// tables, so relevance scoring substitutes them here).
    pub fn score_with(&self, h: &[f64], r: u32, t: &[f64]) -> f64 {
        score_vectors(self.config.family, h, self.relation_vec(r), t)
    }

    pub fn plausibility(&self, h: EntityId, r: u32, t: EntityId) -> f64 {
        plausibility_of_score(self.score(h, r, t))
    }

    /// Rank of the fact's own entity on `side`: 1 plus the number of
    /// candidates scoring strictly higher. The target wins ties. Filtered
    /// mode skips candidates that form a known true fact other than `f`.
    pub fn rank(&self, kg: &KnowledgeGraph, f: &Fact, side: RankSide, filtered: bool) -> usize {
        let target_score = self.score(f.head, f.relation, f.tail);
        let target = match side {
            RankSide::Head => f.head,
            RankSide::Tail => f.tail,
        };
        let mut better = 0;
        for c in 0..self.n_entities as u32 {
            let candidate = EntityId(c);
            if candidate == target {
                continue;
            }
            let (h, t) = match side {
                RankSide::Head => (candidate, f.tail),
                RankSide::Tail => (f.head, candidate),
            };
            if filtered && kg.is_known(h, f.relation, t) {
                continue;
            }
            if self.score(h, f.relation, t) > target_score {
                better += 1;
            }
        }
        1 + better
    }

    pub fn rank_result(&self, kg: &KnowledgeGraph, f: &Fact, filtered: bool) -> RankResult {
        RankResult {
            fact: *f,
            head_rank: self.rank(kg, f, RankSide::Head, filtered),
            tail_rank: self.rank(kg, f, RankSide::Tail, filtered),
        }
    }

    /// MRR and H@1 over a fact set, with the per-fact rank table.
    pub fn mrr_h1(&self, kg: &KnowledgeGraph, facts: &[Fact], filtered: bool) -> (f64, f64, Vec<RankResult>) {
        assert!(!facts.is_empty(), "mrr_h1 requires a non-empty fact set");
        let results: Vec<RankResult> = facts.iter().map(|f| self.rank_result(kg, f, filtered)).collect();
        let mrr = results.iter().map(RankResult::reciprocal_rank).sum::<f64>() / results.len() as f64;
        let h1 = results.iter().map(RankResult::hits_at_1).sum::<f64>() / results.len() as f64;
        (mrr, h1, results)
    }
}

/// Index into one of the two embedding tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Entity(u32),
    Relation(u32),
}

struct GradBatch {
    dimension: usize,
    grads: BTreeMap<Slot, (Vec<f64>, usize)>,
}

impl GradBatch {
    fn new(dimension: usize) -> Self {
        Self { dimension, grads: BTreeMap::new() }
    }

    fn acc(&mut self, slot: Slot) -> &mut [f64] {
        let entry = self.grads.entry(slot).or_insert_with(|| (vec![0.0; self.dimension], 0));
        entry.1 += 1;
        &mut entry.0
    }

    /// Steps each touched row by the mean of its accumulated gradients, so a
    /// relation hit by most of the batch moves as steadily as an entity hit
    /// once; plain summing makes high-degree rows diverge.
    fn apply(&mut self, entities: &mut [f64], relations: &mut [f64], lr: f64) {
        let d = self.dimension;
        for (slot, (grad, count)) in &self.grads {
            let row = match slot {
                Slot::Entity(i) => &mut entities[*i as usize * d..(*i as usize + 1) * d],
                Slot::Relation(i) => &mut relations[*i as usize * d..(*i as usize + 1) * d],
            };
            let scale = lr / *count as f64;
            for k in 0..d {
                row[k] -= scale * grad[k];
            }
        }
        self.grads.clear();
    }
}

/// Accumulates d(loss)/d(score) * d(score)/d(embedding) for one triple into
/// the batch gradient; bilinear families add the L2 term here as well.
fn accumulate_score_grad(
    family: ModelFamily,
    dl_ds: f64,
    h: (&[f64], Slot),
    r: (&[f64], Slot),
    t: (&[f64], Slot),
    reg: f64,
    batch: &mut GradBatch,
) {
    let dim = h.0.len();
    let (hv, hs) = h;
    let (rv, rs) = r;
    let (tv, ts) = t;
    let mut gh = vec![0.0; dim];
    let mut gr = vec![0.0; dim];
    let mut gt = vec![0.0; dim];
    match family {
        ModelFamily::TransE => {
            // score = -||h + r - t||; d(score)/dh = -(h + r - t)/||.||
            let mut norm = 0.0;
            for k in 0..dim {
                let d = hv[k] + rv[k] - tv[k];
                norm += d * d;
            }
            let norm = norm.sqrt();
            if norm > 1e-12 {
                for k in 0..dim {
                    let u = (hv[k] + rv[k] - tv[k]) / norm;
                    gh[k] = -u * dl_ds;
                    gr[k] = -u * dl_ds;
                    gt[k] = u * dl_ds;
                }
            }
        }
        ModelFamily::DistMult => {
            for k in 0..dim {
                gh[k] = rv[k] * tv[k] * dl_ds;
                gr[k] = hv[k] * tv[k] * dl_ds;
                gt[k] = hv[k] * rv[k] * dl_ds;
            }
        }
        ModelFamily::Complex => {
            let half = dim / 2;
            for k in 0..half {
                let (hr, hi) = (hv[k], hv[half + k]);
                let (rr, ri) = (rv[k], rv[half + k]);
                let (tr, ti) = (tv[k], tv[half + k]);
                gh[k] = (rr * tr + ri * ti) * dl_ds;
                gh[half + k] = (-ri * tr + rr * ti) * dl_ds;
                gr[k] = (hr * tr + hi * ti) * dl_ds;
                gr[half + k] = (-hi * tr + hr * ti) * dl_ds;
                gt[k] = (hr * rr - hi * ri) * dl_ds;
                gt[half + k] = (hr * ri + hi * rr) * dl_ds;
            }
        }
    }
    if reg > 0.0 && family != ModelFamily::TransE {
        for k in 0..dim {
            gh[k] += 2.0 * reg * hv[k];
            gr[k] += 2.0 * reg * rv[k];
            gt[k] += 2.0 * reg * tv[k];
        }
    }
    for (slot, g) in [(hs, gh), (rs, gr), (ts, gt)] {
        let acc = batch.acc(slot);
        for k in 0..dim {
            acc[k] += g[k];
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn renormalize_entities(entities: &mut [f64], dimension: usize) {
    for row in entities.chunks_mut(dimension) {
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }
}

fn seeded_init(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

/// Trains an embedding model. Identical `(kg, config)` inputs produce
/// bit-identical tables; with `epochs = 0` the model is its seeded init.
pub fn train(kg: &KnowledgeGraph, config: &ModelConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    if kg.train_facts().is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    let n_ent = kg.n_entities();
    let n_rel = kg.n_relations();
    let dim = config.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entities = seeded_init(&mut rng, n_ent * dim);
    let mut relations = seeded_init(&mut rng, n_rel * dim);
    if config.family == ModelFamily::TransE {
        renormalize_entities(&mut entities, dim);
    }

    let facts = kg.train_facts();
    let mut order: Vec<usize> = (0..facts.len()).collect();
    let mut batch = GradBatch::new(dim);
    let family = config.family;
    let reg = config.regularization;

    let vec_at = |table: &[f64], i: usize| -> Vec<f64> { table[i * dim..(i + 1) * dim].to_vec() };

    for epoch in 0..config.epochs {
        // linear decay to a tenth of the base rate settles the final ranks
        let lr_epoch = config.learning_rate
            * (1.0 - 0.9 * epoch as f64 / config.epochs.max(1) as f64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            for &fi in chunk {
                let f = facts[fi];
                let hv = vec_at(&entities, f.head.index());
                let rv = vec_at(&relations, f.relation as usize);
                let tv = vec_at(&entities, f.tail.index());
                let pos_score = score_vectors(family, &hv, &rv, &tv);
                let (hs, rs, ts) = (
                    Slot::Entity(f.head.0),
                    Slot::Relation(f.relation),
                    Slot::Entity(f.tail.0),
                );

                if family != ModelFamily::TransE {
                    // positive term of the logistic loss
                    let dl = -sigmoid(-pos_score);
                    accumulate_score_grad(family, dl, (&hv, hs), (&rv, rs), (&tv, ts), reg, &mut batch);
                }

                for _ in 0..config.negatives {
                    let corrupt_head = rng.gen_bool(0.5);
                    let candidate = EntityId(rng.gen_range(0..n_ent as u32));
                    let cv = vec_at(&entities, candidate.index());
                    let cs = Slot::Entity(candidate.0);
                    let (nh, nhs, nt, nts) = if corrupt_head {
                        (cv.as_slice(), cs, tv.as_slice(), ts)
                    } else {
                        (hv.as_slice(), hs, cv.as_slice(), cs)
                    };
                    let neg_score = score_vectors(family, nh, &rv, nt);
                    match family {
                        ModelFamily::TransE => {
                            // margin ranking on distances d = -score
                            let loss = config.margin + (-pos_score) - (-neg_score);
                            if loss > 0.0 {
                                // d(loss)/d(pos_score) = -1, d/d(neg_score) = +1
                                accumulate_score_grad(family, -1.0, (&hv, hs), (&rv, rs), (&tv, ts), reg, &mut batch);
                                accumulate_score_grad(family, 1.0, (nh, nhs), (&rv, rs), (nt, nts), reg, &mut batch);
                            }
                        }
                        _ => {
                            let dl = sigmoid(neg_score);
                            accumulate_score_grad(family, dl, (nh, nhs), (&rv, rs), (nt, nts), reg, &mut batch);
                        }
                    }
                }
            }
            batch.apply(&mut entities, &mut relations, lr_epoch);
        }
        if family == ModelFamily::TransE {
            renormalize_entities(&mut entities, dim);
        }
    }

    if entities.iter().chain(relations.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Config("training produced non-finite embeddings; lower the learning rate".into()));
    }

    Ok(EmbeddingModel {
        config: config.clone(),
        n_entities: n_ent,
        n_relations: n_rel,
        entities,
        relations,
    })
}

/// Re-trains a single entity's embedding on its own train facts minus
/// `excluded`, with every other embedding frozen. Returns the fresh vector;
/// the input model is never mutated. Deterministic per `(config.seed, e)`.
pub fn post_train_mimic(
    model: &EmbeddingModel,
    kg: &KnowledgeGraph,
    e: EntityId,
    excluded: &[Fact],
    epochs: usize,
) -> Result<Vec<f64>> {
    let mut incident: Vec<Fact> = kg.neighbors(e, None)?.into_iter().map(|(f, _)| f).collect();
    incident.sort_unstable();
    incident.dedup();
    let excluded_set: std::collections::HashSet<Fact> = excluded.iter().copied().collect();
    let kept: Vec<Fact> = incident.iter().copied().filter(|f| !excluded_set.contains(f)).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateEntity(kg.entity_label(e).to_string()));
    }

    let config = &model.config;
    let dim = config.dimension;
    let family = config.family;
    // Base rate, not amplified: larger steps walk the vector out of the basin
    // joint training left it in and wreck the plausibility baseline.
    let lr = config.learning_rate;
    let n_ent = model.n_entities as u32;
    let seed = config
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(e.0 as u64 + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut mimic = model.entity_vec(e).to_vec();
    let mut order: Vec<usize> = (0..kept.len()).collect();

    for _epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &fi in &order {
            let f = kept[fi];
            let rv = model.relation_vec(f.relation);
            // orientation of e within the fact; self-loops update both sides
            let as_head = f.head == e;
            let hv: Vec<f64> = if as_head { mimic.clone() } else { model.entity_vec(f.head).to_vec() };
            let tv: Vec<f64> = if f.tail == e { mimic.clone() } else { model.entity_vec(f.tail).to_vec() };
            let pos_score = score_vectors(family, &hv, rv, &tv);

            let mut grad = vec![0.0; dim];
            let add_grad = |g: &mut Vec<f64>, dl_ds: f64, h: &[f64], t: &[f64], update_head: bool| {
                match family {
                    ModelFamily::TransE => {
                        let mut norm = 0.0;
                        for k in 0..dim {
                            let d = h[k] + rv[k] - t[k];
                            norm += d * d;
                        }
                        let norm = norm.sqrt();
                        if norm > 1e-12 {
                            for k in 0..dim {
                                let u = (h[k] + rv[k] - t[k]) / norm;
                                g[k] += if update_head { -u } else { u } * dl_ds;
                            }
                        }
                    }
                    ModelFamily::DistMult => {
                        for k in 0..dim {
                            g[k] += if update_head { rv[k] * t[k] } else { h[k] * rv[k] } * dl_ds;
                        }
                    }
                    ModelFamily::Complex => {
                        let half = dim / 2;
                        for k in 0..half {
                            let (rr, ri) = (rv[k], rv[half + k]);
                            if update_head {
                                let (tr, ti) = (t[k], t[half + k]);
                                g[k] += (rr * tr + ri * ti) * dl_ds;
                                g[half + k] += (-ri * tr + rr * ti) * dl_ds;
                            } else {
                                let (hr, hi) = (h[k], h[half + k]);
                                g[k] += (hr * rr - hi * ri) * dl_ds;
                                g[half + k] += (hr * ri + hi * rr) * dl_ds;
                            }
                        }
                    }
                }
            };

            if family != ModelFamily::TransE {
                let dl = -sigmoid(-pos_score);
                if as_head {
                    add_grad(&mut grad, dl, &hv, &tv, true);
                }
                if f.tail == e {
                    add_grad(&mut grad, dl, &hv, &tv, false);
                }
                if config.regularization > 0.0 {
                    for k in 0..dim {
                        grad[k] += 2.0 * config.regularization * mimic[k];
                    }
                }
            }

            for _ in 0..config.negatives {
                // corrupt the far endpoint so the gradient flows to the mimic
                let candidate = EntityId(rng.gen_range(0..n_ent));
                let cv = model.entity_vec(candidate);
                let (nh, nt): (&[f64], &[f64]) = if as_head { (&hv, cv) } else { (cv, &tv) };
                let neg_score = score_vectors(family, nh, rv, nt);
                match family {
                    ModelFamily::TransE => {
                        let loss = config.margin + (-pos_score) - (-neg_score);
                        if loss > 0.0 {
                            add_grad(&mut grad, -1.0, &hv, &tv, as_head);
                            add_grad(&mut grad, 1.0, nh, nt, as_head);
                        }
                    }
                    _ => {
                        let dl = sigmoid(neg_score);
                        add_grad(&mut grad, dl, nh, nt, as_head);
                    }
                }
            }

            for k in 0..dim {
                mimic[k] -= lr * grad[k];
            }
        }
        if family == ModelFamily::TransE {
            let norm: f64 = mimic.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1.0 {
                for x in mimic.iter_mut() {
                    *x /= norm;
                }
            }
        }
    }
    Ok(mimic)
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    family: ModelFamily,
    dimension: usize,
    n_entities: usize,
    n_relations: usize,
    seed: u64,
    config: ModelConfig,
}

impl EmbeddingModel {
    /// Writes `<prefix>.meta.json` and `<prefix>.emb.bin` (row-major
    /// little-endian f32: entity table, then relation table).
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let meta = CheckpointMeta {
            family: self.config.family,
            dimension: self.config.dimension,
            n_entities: self.n_entities,
            n_relations: self.n_relations,
            seed: self.config.seed,
            config: self.config.clone(),
        };
        let meta_path = prefix.with_extension("meta.json");
        let mut json = serde_json::to_string_pretty(&meta)?;
        json.push('\n');
        std::fs::write(meta_path, json)?;

        let bin_path = prefix.with_extension("emb.bin");
        let mut file = std::io::BufWriter::new(std::fs::File::create(bin_path)?);
        for x in self.entities.iter().chain(self.relations.iter()) {
            file.write_all(&(*x as f32).to_le_bytes())?;
        }
        file.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let meta_path = prefix.with_extension("meta.json");
        let meta: CheckpointMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        let bin_path = prefix.with_extension("emb.bin");
        let mut bytes = Vec::new();
        std::fs::File::open(bin_path)?.read_to_end(&mut bytes)?;
        let expected = (meta.n_entities + meta.n_relations) * meta.dimension * 4;
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!(
                "embedding payload is {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let floats: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let split = meta.n_entities * meta.dimension;
        Ok(Self {
            config: meta.config,
            n_entities: meta.n_entities,
            n_relations: meta.n_relations,
            entities: floats[..split].to_vec(),
            relations: floats[split..].to_vec(),
        })
    }
}
