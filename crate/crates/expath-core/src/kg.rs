//! Dictionary-encoded knowledge-graph storage.
//!
//! Facts are stored once, in forward orientation; traversing a relation in
//! the inverse direction is a view through [`SignedRelation`], never a second
//! record. Ids are assigned in first-appearance order over train, valid and
//! test, so entities that only occur outside the train split still resolve
//! (they are ranking candidates even with an empty train neighborhood).
//!
//! A graph is immutable after construction; [`KnowledgeGraph::remove_facts`]
//! returns a fresh value so an attack harness can hold the original and the
//! attacked graph side by side.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sparse::SparseBoolMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A relation index plus a direction-of-traversal flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignedRelation {
    pub relation: u32,
    pub inverse: bool,
}

impl SignedRelation {
    pub fn forward(relation: u32) -> Self {
        Self { relation, inverse: false }
    }

    pub fn inverse_of(relation: u32) -> Self {
        Self { relation, inverse: true }
    }

    pub fn invert(self) -> Self {
        Self { relation: self.relation, inverse: !self.inverse }
    }
}

/// A stored triple; `head` and `tail` are always in forward orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub head: EntityId,
    pub relation: u32,
    pub tail: EntityId,
}

impl Fact {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self { head: EntityId(head), relation, tail: EntityId(tail) }
    }

    fn key(&self) -> (u32, u32, u32) {
        (self.head.0, self.relation, self.tail.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Parses tab-separated triple content: one `head\trelation\ttail` per line.
/// Both `\n` and `\r\n` line endings are accepted.
pub fn parse_triples(text: &str) -> Result<Vec<(String, String, String)>> {
    let mut triples = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse { line: i + 1, message: "empty field".into() });
        }
        triples.push((fields[0].to_string(), fields[1].to_string(), fields[2].to_string()));
    }
    Ok(triples)
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_labels: Vec<String>,
    entity_ids: HashMap<String, u32>,
    relation_labels: Vec<String>,
    relation_ids: HashMap<String, u32>,
    train: Vec<Fact>,
    valid: Vec<Fact>,
    test: Vec<Fact>,
    /// Duplicates dropped per split during construction (train, valid, test).
    duplicates: [usize; 3],
    /// Per entity: (signed relation as seen from the entity, other endpoint),
    /// sorted. Derived from the train split only.
    by_entity: Vec<Vec<(SignedRelation, EntityId)>>,
    /// Per relation: train facts, sorted.
    by_relation: Vec<Vec<Fact>>,
    train_set: HashSet<(u32, u32, u32)>,
    known_set: HashSet<(u32, u32, u32)>,
}

impl KnowledgeGraph {
    pub fn build(
        train: &[(String, String, String)],
        valid: &[(String, String, String)],
        test: &[(String, String, String)],
    ) -> Self {
        let mut entity_labels = Vec::new();
        let mut entity_ids = HashMap::new();
        let mut relation_labels = Vec::new();
        let mut relation_ids = HashMap::new();

        let intern_entity = |label: &str, labels: &mut Vec<String>, ids: &mut HashMap<String, u32>| -> u32 {
            if let Some(&id) = ids.get(label) {
                return id;
            }
            let id = labels.len() as u32;
            labels.push(label.to_string());
            ids.insert(label.to_string(), id);
            id
        };

        let mut splits: [Vec<Fact>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut duplicates = [0usize; 3];
        for (si, triples) in [train, valid, test].into_iter().enumerate() {
            let mut seen = HashSet::new();
            for (h, r, t) in triples {
                let head = intern_entity(h, &mut entity_labels, &mut entity_ids);
                let relation = if let Some(&id) = relation_ids.get(r.as_str()) {
                    id
                } else {
                    let id = relation_labels.len() as u32;
                    relation_labels.push(r.clone());
                    relation_ids.insert(r.clone(), id);
                    id
                };
                let tail = intern_entity(t, &mut entity_labels, &mut entity_ids);
                let fact = Fact::new(head, relation, tail);
                if seen.insert(fact.key()) {
                    splits[si].push(fact);
                } else {
                    duplicates[si] += 1;
                }
            }
        }
        let [train, valid, test] = splits;

        let mut kg = Self {
            entity_labels,
            entity_ids,
            relation_labels,
            relation_ids,
            train,
            valid,
            test,
            duplicates,
            by_entity: Vec::new(),
            by_relation: Vec::new(),
            train_set: HashSet::new(),
            known_set: HashSet::new(),
        };
        kg.rebuild_indices();
        kg
    }

    /// Loads `train.txt` / `valid.txt` / `test.txt` from a dataset directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Vec<(String, String, String)>> {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })?;
            parse_triples(&text)
        };
        Ok(Self::build(&read("train.txt")?, &read("valid.txt")?, &read("test.txt")?))
    }

    fn rebuild_indices(&mut self) {
        self.train.sort_unstable();
        self.valid.sort_unstable();
        self.test.sort_unstable();

        let n_ent = self.entity_labels.len();
        let n_rel = self.relation_labels.len();
        let mut by_entity = vec![Vec::new(); n_ent];
        let mut by_relation = vec![Vec::new(); n_rel];
        let mut train_set = HashSet::with_capacity(self.train.len());
        for &fact in &self.train {
            by_entity[fact.head.index()].push((SignedRelation::forward(fact.relation), fact.tail));
            by_entity[fact.tail.index()].push((SignedRelation::inverse_of(fact.relation), fact.head));
            by_relation[fact.relation as usize].push(fact);
            train_set.insert(fact.key());
        }
        for list in &mut by_entity {
            list.sort_unstable();
        }
        for list in &mut by_relation {
            list.sort_unstable();
        }

        let mut known_set = train_set.clone();
        known_set.extend(self.valid.iter().map(Fact::key));
        known_set.extend(self.test.iter().map(Fact::key));

        self.by_entity = by_entity;
        self.by_relation = by_relation;
        self.train_set = train_set;
        self.known_set = known_set;
    }

    pub fn n_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn split(&self, split: Split) -> &[Fact] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train_facts(&self) -> &[Fact] {
        &self.train
    }

    pub fn valid_facts(&self) -> &[Fact] {
        &self.valid
    }

    pub fn test_facts(&self) -> &[Fact] {
        &self.test
    }

    /// Duplicates dropped per split during construction.
    pub fn duplicate_counts(&self) -> [usize; 3] {
        self.duplicates
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        &self.entity_labels[e.index()]
    }

    pub fn relation_label(&self, r: u32) -> &str {
        &self.relation_labels[r as usize]
    }

    pub fn entity_id(&self, label: &str) -> Result<EntityId> {
        self.entity_ids
            .get(label)
            .map(|&id| EntityId(id))
            .ok_or_else(|| Error::UnknownEntity(label.to_string()))
    }

    pub fn relation_id(&self, label: &str) -> Result<u32> {
        self.relation_ids
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(label.to_string()))
    }

    pub fn contains_train(&self, fact: &Fact) -> bool {
        self.train_set.contains(&fact.key())
    }

    /// True if the triple is known in any split (used by filtered ranking).
    pub fn is_known(&self, head: EntityId, relation: u32, tail: EntityId) -> bool {
        self.known_set.contains(&(head.0, relation, tail.0))
    }

    /// Train facts of one relation, sorted.
    pub fn facts_of_relation(&self, relation: u32) -> &[Fact] {
        &self.by_relation[relation as usize]
    }

    /// Train facts incident to `e`, each with its endpoint on the far side.
    ///
    /// A forward signed relation returns facts with `head == e`; an inverse
    /// one returns facts with `tail == e`. `None` is the wildcard: both
    /// directions over all relations, in sorted `(relation, inverse, other)`
    /// order.
    pub fn neighbors(&self, e: EntityId, sr: Option<SignedRelation>) -> Result<Vec<(Fact, EntityId)>> {
        let list = self
            .by_entity
            .get(e.index())
            .ok_or_else(|| Error::UnknownEntity(format!("id {}", e.0)))?;
        let to_fact = |(sr, other): &(SignedRelation, EntityId)| -> (Fact, EntityId) {
            let fact = if sr.inverse {
                Fact { head: *other, relation: sr.relation, tail: e }
            } else {
                Fact { head: e, relation: sr.relation, tail: *other }
            };
            (fact, *other)
        };
        match sr {
            None => Ok(list.iter().map(to_fact).collect()),
            Some(sr) => {
                let lo = list.partition_point(|(s, _)| *s < sr);
                let hi = list.partition_point(|(s, _)| *s <= sr);
                Ok(list[lo..hi].iter().map(to_fact).collect())
            }
        }
    }

    pub fn degree(&self, e: EntityId) -> usize {
        self.by_entity.get(e.index()).map_or(0, Vec::len)
    }

    /// New graph with `victims` removed from the train split. Valid and test
    /// are untouched; dictionaries are preserved so ids keep their meaning.
    pub fn remove_facts(&self, victims: &[Fact]) -> Result<Self> {
        let missing: Vec<&Fact> = victims.iter().filter(|f| !self.contains_train(f)).collect();
        if !missing.is_empty() {
            let listed = missing
                .iter()
                .map(|f| self.fact_to_string(f))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::MissingFacts(listed));
        }
        let victim_set: HashSet<(u32, u32, u32)> = victims.iter().map(Fact::key).collect();
        let mut out = self.clone();
        out.train.retain(|f| !victim_set.contains(&f.key()));
        out.rebuild_indices();
        Ok(out)
    }

    /// Adjacency of a signed relation over the train split:
    /// entry (i, j) is set iff the signed relation connects entity i to j.
    pub fn adjacency(&self, sr: SignedRelation) -> SparseBoolMatrix {
        let n = self.n_entities();
        let facts = self.facts_of_relation(sr.relation);
        let entries = facts.iter().map(|f| {
            if sr.inverse {
                (f.tail.0, f.head.0)
            } else {
                (f.head.0, f.tail.0)
            }
        });
        SparseBoolMatrix::from_entries(n, n, entries)
    }

    pub fn fact_to_string(&self, f: &Fact) -> String {
        format!(
            "<{}, {}, {}>",
            self.entity_label(f.head),
            self.relation_label(f.relation),
            self.entity_label(f.tail)
        )
    }

    /// Resolves a `(head, relation, tail)` label triple against the dictionaries.
    pub fn resolve(&self, head: &str, relation: &str, tail: &str) -> Result<Fact> {
        Ok(Fact {
            head: self.entity_id(head)?,
            relation: self.relation_id(relation)?,
            tail: self.entity_id(tail)?,
        })
    }
}

impl fmt::Display for SignedRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "{}'", self.relation)
        } else {
            write!(f, "{}", self.relation)
        }
    }
}
