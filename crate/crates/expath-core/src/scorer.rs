//! Fact scoring and explanation assembly.
//!
//! Every train fact that grounds a retained rule gets a confidence degree
//! CD(f) = 1 − Π(1 − conf(φ)·w(f,φ)) over its supporting rules (Noisy-OR).
//! For CP rules the weight splits between the fact's first-edge and last-edge
//! proportions according to the rule's head/tail relevance share; PT rules
//! contribute with weight 1. The explanation is the top-k facts by CD.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kg::{Fact, KnowledgeGraph};
use crate::paths::{position_proportions, GroundedPath};
use crate::rules::{MinedRule, MinedRuleSet, RuleBody};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionPolicy {
    All,
    Head,
    Tail,
}

/// Dense graphs allow facts on either endpoint; sparse ones restrict the
/// explanation to head-incident facts (boundary ratio 10 counts as dense).
pub fn choose_policy(kg: &KnowledgeGraph) -> PositionPolicy {
    let ratio = kg.train_facts().len() as f64 / kg.n_entities() as f64;
    if ratio < 10.0 {
        PositionPolicy::Head
    } else {
        PositionPolicy::All
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub use_cp: bool,
    pub use_pt: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self { use_cp: true, use_pt: true }
    }
}

impl AblationFlags {
    pub fn validate(&self) -> Result<()> {
        if !self.use_cp && !self.use_pt {
            return Err(Error::Config("at least one rule kind must stay enabled".into()));
        }
        Ok(())
    }

    fn admits(&self, rule: &MinedRule) -> bool {
        match rule.rule.body {
            RuleBody::Cp(_) => self.use_cp,
            RuleBody::Pt { .. } => self.use_pt,
        }
    }
}

/// One factor of a fact's Noisy-OR product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub rule: String,
    pub conf: f64,
    pub w: f64,
    /// One grounding of the rule through the fact (CP only).
    pub example_path: Option<GroundedPath>,
    /// The relevance share fell back to an even split (rel_h + rel_t = 0).
    pub even_split_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    pub fact: Fact,
    pub cd: f64,
    pub contributions: Vec<Contribution>,
}

/// Weight of `f` under one mined rule: the relevance-weighted mix of the
/// fact's first-edge and last-edge proportions for CP, a constant 1 for PT.
/// Returns the weight and whether the even-split fallback fired.
pub fn weight(f: &Fact, rule: &MinedRule) -> (f64, bool) {
    match &rule.rule.body {
        RuleBody::Pt { .. } => (1.0, false),
        RuleBody::Cp(_) => {
            let group = rule.group.as_ref().expect("CP rule without groundings");
            let pair = rule.relevance.as_ref().expect("CP rule without relevance");
            let (p_h, p_t) = position_proportions(f, group);
            let sum = pair.rel_h + pair.rel_t;
            let (r_h, fallback) = if sum == 0.0 { (0.5, true) } else { (pair.rel_h / sum, false) };
            (r_h * p_h + (1.0 - r_h) * p_t, fallback)
        }
    }
}

pub fn noisy_or(contributions: &[Contribution]) -> f64 {
    1.0 - contributions.iter().map(|c| 1.0 - c.conf * c.w).product::<f64>()
}

/// CD of one fact against the whole rule set.
pub fn cd(f: &Fact, ruleset: &MinedRuleSet, flags: &AblationFlags) -> ScoredFact {
    let mut contributions = Vec::new();
    for rule in &ruleset.rules {
        if !flags.admits(rule) {
            continue;
        }
        match &rule.rule.body {
            RuleBody::Cp(_) => {
                let group = rule.group.as_ref().expect("CP rule without groundings");
                let supports =
                    group.grounded.iter().any(|p| p.first_fact() == *f || p.last_fact() == *f);
                if !supports {
                    continue;
                }
                let (w, fallback) = weight(f, rule);
                let example = group
                    .grounded
                    .iter()
                    .find(|p| p.first_fact() == *f || p.last_fact() == *f)
                    .cloned();
                contributions.push(Contribution {
                    rule: rule.serialized.clone(),
                    conf: rule.metrics.conf,
                    w,
                    example_path: example,
                    even_split_fallback: fallback,
                });
            }
            RuleBody::Pt { .. } => {
                if rule.body_fact.as_ref() != Some(f) {
                    continue;
                }
                contributions.push(Contribution {
                    rule: rule.serialized.clone(),
                    conf: rule.metrics.conf,
                    w: 1.0,
                    example_path: None,
                    even_split_fallback: false,
                });
            }
        }
    }
    ScoredFact { fact: *f, cd: noisy_or(&contributions), contributions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub prediction: Fact,
    pub policy: PositionPolicy,
    pub k: usize,
    pub facts: Vec<ScoredFact>,
}

impl Explanation {
    pub fn removal_set(&self) -> Vec<Fact> {
        self.facts.iter().map(|sf| sf.fact).collect()
    }
}

/// Train facts that can carry any weight: first/last edges of CP groundings
/// plus PT body facts. Middle edges of 3-hop groundings weigh zero and are
/// excluded outright.
fn candidate_facts(ruleset: &MinedRuleSet, flags: &AblationFlags) -> Vec<Fact> {
    let mut set: BTreeMap<Fact, ()> = BTreeMap::new();
    for rule in &ruleset.rules {
        if !flags.admits(rule) {
            continue;
        }
        match &rule.rule.body {
            RuleBody::Cp(_) => {
                for p in &rule.group.as_ref().expect("CP rule without groundings").grounded {
                    set.insert(p.first_fact(), ());
                    set.insert(p.last_fact(), ());
                }
            }
            RuleBody::Pt { .. } => {
                set.insert(rule.body_fact.expect("PT rule without body fact"), ());
            }
        }
    }
    set.into_keys().collect()
}

fn admitted_by_policy(f: &Fact, prediction: &Fact, policy: PositionPolicy) -> bool {
    let touches_h = f.head == prediction.head || f.tail == prediction.head;
    let touches_t = f.head == prediction.tail || f.tail == prediction.tail;
    match policy {
        PositionPolicy::All => touches_h || touches_t,
        PositionPolicy::Head => touches_h,
        PositionPolicy::Tail => touches_t,
    }
}

fn sort_scored(scored: &mut [ScoredFact], kg: &KnowledgeGraph) {
    scored.sort_by(|a, b| {
        b.cd
            .total_cmp(&a.cd)
            .then_with(|| b.contributions.len().cmp(&a.contributions.len()))
            .then_with(|| kg.fact_to_string(&a.fact).cmp(&kg.fact_to_string(&b.fact)))
    });
}

/// Top-k facts by CD under the position policy. `greedy` recomputes CD after
/// each pick with the picked fact's supporting rules retired (study mode;
/// static top-k is the default).
pub fn select_explanation(
    kg: &KnowledgeGraph,
    ruleset: &MinedRuleSet,
    k: usize,
    policy: PositionPolicy,
    flags: &AblationFlags,
    greedy: bool,
) -> Result<Explanation> {
    assert!(k >= 1, "explanation size must be at least 1");
    flags.validate()?;
    let candidates: Vec<Fact> = candidate_facts(ruleset, flags)
        .into_iter()
        .filter(|f| admitted_by_policy(f, &ruleset.prediction, policy))
        .collect();

    let facts = if !greedy {
        let mut scored: Vec<ScoredFact> = candidates.iter().map(|f| cd(f, ruleset, flags)).collect();
        sort_scored(&mut scored, kg);
        scored.truncate(k);
        scored
    } else {
        let mut remaining = candidates;
        let mut retired: Vec<String> = Vec::new();
        let mut picked = Vec::new();
        while picked.len() < k && !remaining.is_empty() {
            let mut scored: Vec<ScoredFact> = remaining
                .iter()
                .map(|f| {
                    let mut sf = cd(f, ruleset, flags);
                    sf.contributions.retain(|c| !retired.contains(&c.rule));
                    sf.cd = noisy_or(&sf.contributions);
                    sf
                })
                .collect();
            sort_scored(&mut scored, kg);
            let best = scored.remove(0);
            if best.contributions.is_empty() {
                break;
            }
            remaining.retain(|f| *f != best.fact);
            retired.extend(best.contributions.iter().map(|c| c.rule.clone()));
            picked.push(best);
        }
        picked
    };

    Ok(Explanation { prediction: ruleset.prediction, policy, k, facts })
}

fn fact_json(kg: &KnowledgeGraph, f: &Fact) -> serde_json::Value {
    serde_json::json!({
        "h": kg.entity_label(f.head),
        "r": kg.relation_label(f.relation),
        "t": kg.entity_label(f.tail),
    })
}

fn path_json(kg: &KnowledgeGraph, p: &GroundedPath) -> serde_json::Value {
    let steps: Vec<serde_json::Value> = p
        .steps
        .iter()
        .map(|s| {
            serde_json::json!({
                "h": kg.entity_label(s.fact.head),
                "r": kg.relation_label(s.fact.relation),
                "t": kg.entity_label(s.fact.tail),
                "inverse": s.sr.inverse,
            })
        })
        .collect();
    serde_json::Value::Array(steps)
}

/// Label-based JSON form of an explanation (keys come out sorted since the
/// underlying map is ordered).
pub fn explanation_json(kg: &KnowledgeGraph, e: &Explanation) -> serde_json::Value {
    let facts: Vec<serde_json::Value> = e
        .facts
        .iter()
        .map(|sf| {
            let rules: Vec<serde_json::Value> = sf
                .contributions
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "rule": c.rule,
                        "conf": c.conf,
                        "w": c.w,
                        "example_path": c.example_path.as_ref().map(|p| path_json(kg, p)),
                        "even_split_fallback": c.even_split_fallback,
                    })
                })
                .collect();
            let mut v = fact_json(kg, &sf.fact);
            let obj = v.as_object_mut().unwrap();
            obj.insert("cd".into(), serde_json::json!(sf.cd));
            obj.insert("rules".into(), serde_json::Value::Array(rules));
            v
        })
        .collect();
    serde_json::json!({
        "prediction": fact_json(kg, &e.prediction),
        "policy": e.policy,
        "k": e.k,
        "facts": facts,
    })
}

const DOT_NODE_CAP: usize = 60;

/// Renders the prediction's neighborhood as a DOT graph: explanation facts in
/// bold red, grounded example paths dashed blue, everything else gray. The
/// node set is capped at 60 with a truncation badge.
pub fn dot_export(kg: &KnowledgeGraph, e: &Explanation) -> String {
    let mut node_ids: Vec<u32> = vec![e.prediction.head.0, e.prediction.tail.0];
    for sf in &e.facts {
        node_ids.push(sf.fact.head.0);
        node_ids.push(sf.fact.tail.0);
        for c in &sf.contributions {
            if let Some(p) = &c.example_path {
                for ent in p.entities() {
                    node_ids.push(ent.0);
                }
            }
        }
    }
    for endpoint in [e.prediction.head, e.prediction.tail] {
        if let Ok(nbrs) = kg.neighbors(endpoint, None) {
            for (_, other) in nbrs {
                node_ids.push(other.0);
            }
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut kept: Vec<u32> = Vec::new();
    for id in node_ids {
        if seen.insert(id) {
            kept.push(id);
        }
    }
    let truncated = kept.len() > DOT_NODE_CAP;
    kept.truncate(DOT_NODE_CAP);
    let in_graph: std::collections::BTreeSet<u32> = kept.iter().copied().collect();

    let explanation_facts: std::collections::BTreeSet<Fact> = e.facts.iter().map(|sf| sf.fact).collect();
    let path_facts: std::collections::BTreeSet<Fact> = e
        .facts
        .iter()
        .flat_map(|sf| &sf.contributions)
        .filter_map(|c| c.example_path.as_ref())
        .flat_map(|p| p.steps.iter().map(|s| s.fact))
        .collect();

    let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
    let mut out = String::from("digraph explanation {\n  rankdir=LR;\n  node [shape=ellipse, fontsize=10];\n");
    if truncated {
        out.push_str("  truncation_badge [shape=note, label=\"neighborhood truncated\", color=orange];\n");
    }
    for &id in &kept {
        let label = esc(kg.entity_label(crate::kg::EntityId(id)));
        let style = if id == e.prediction.head.0 || id == e.prediction.tail.0 {
            ", style=bold, color=black"
        } else {
            ", color=gray"
        };
        out.push_str(&format!("  n{id} [label=\"{label}\"{style}];\n"));
    }
    // the prediction itself, drawn dotted
    out.push_str(&format!(
        "  n{} -> n{} [label=\"{}\", style=dotted, color=black];\n",
        e.prediction.head.0,
        e.prediction.tail.0,
        esc(kg.relation_label(e.prediction.relation))
    ));
    let mut edges: std::collections::BTreeSet<Fact> = explanation_facts.iter().copied().collect();
    edges.extend(path_facts.iter().copied());
    for endpoint in [e.prediction.head, e.prediction.tail] {
        if let Ok(nbrs) = kg.neighbors(endpoint, None) {
            edges.extend(nbrs.into_iter().map(|(f, _)| f));
        }
    }
    for f in edges {
        if !in_graph.contains(&f.head.0) || !in_graph.contains(&f.tail.0) {
            continue;
        }
        let style = if explanation_facts.contains(&f) {
            "style=bold, color=red"
        } else if path_facts.contains(&f) {
            "style=dashed, color=blue"
        } else {
            "color=gray"
        };
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\", {}];\n",
            f.head.0,
            f.tail.0,
            esc(kg.relation_label(f.relation)),
            style
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KnowledgeGraph, SignedRelation};
    use crate::rules::{MinedRule, PtSide, RelevancePair, Rule, RuleBody, RuleMetrics};
    use crate::paths::{PathGroup, Step};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn t(h: &str, r: &str, t_: &str) -> (String, String, String) {
        (h.into(), r.into(), t_.into())
    }

    fn fixture_kg() -> KnowledgeGraph {
        KnowledgeGraph::build(
            &[t("h", "r1", "a"), t("a", "r2", "t"), t("h", "r1", "b"), t("b", "r2", "t"), t("h", "r0", "c")],
            &[],
            &[t("h", "r", "t")],
        )
    }

    fn cp_entry(kg: &KnowledgeGraph, rel_h: f64, rel_t: f64, conf: f64) -> MinedRule {
        let r1 = kg.relation_id("r1").unwrap();
        let r2 = kg.relation_id("r2").unwrap();
        let body = vec![SignedRelation::forward(r1), SignedRelation::forward(r2)];
        let mk_path = |mid: &str| {
            let f1 = kg.resolve("h", "r1", mid).unwrap();
            let f2 = kg.resolve(mid, "r2", "t").unwrap();
            GroundedPath {
                steps: vec![
                    Step { fact: f1, sr: SignedRelation::forward(r1) },
                    Step { fact: f2, sr: SignedRelation::forward(r2) },
                ],
            }
        };
        let rule = Rule::cp(kg.relation_id("r").unwrap(), body.clone());
        let serialized = rule.to_string_with(kg);
        MinedRule {
            rule,
            metrics: RuleMetrics { supp: 2, sc: 1.0, hc: 1.0, conf },
            relevance: Some(RelevancePair { rel_h, rel_t, degenerate_h: false, degenerate_t: false }),
            group: Some(PathGroup { relation_path: body, grounded: vec![mk_path("a"), mk_path("b")] }),
            body_fact: None,
            serialized,
        }
    }

    fn pt_entry(kg: &KnowledgeGraph, conf: f64) -> MinedRule {
        let body_fact = kg.resolve("h", "r0", "c").unwrap();
        let rule = Rule {
            head_relation: kg.relation_id("r").unwrap(),
            body: RuleBody::Pt {
                side: PtSide::Head,
                body_sr: SignedRelation::forward(kg.relation_id("r0").unwrap()),
                body_constant: kg.entity_id("c").unwrap(),
                head_constant: kg.entity_id("t").unwrap(),
            },
        };
        let serialized = rule.to_string_with(kg);
        MinedRule {
            rule,
            metrics: RuleMetrics { supp: 5, sc: 0.9, hc: 0.5, conf },
            relevance: None,
            group: None,
            body_fact: Some(body_fact),
            serialized,
        }
    }

    fn ruleset(kg: &KnowledgeGraph, rules: Vec<MinedRule>) -> MinedRuleSet {
        MinedRuleSet {
            prediction: kg.resolve("h", "r", "t").unwrap(),
            rules,
            paths_truncated: false,
        }
    }

    #[test]
    fn weight_fixtures() {
        let kg = fixture_kg();
        let f_first = kg.resolve("h", "r1", "a").unwrap();
        // equal relevance, fact is first edge of half the groundings
        let entry = cp_entry(&kg, 0.3, 0.3, 0.5);
        let (w, fb) = weight(&f_first, &entry);
        assert!((w - 0.25).abs() < 1e-12); // r_h=0.5, p_h=0.5, p_t=0
        assert!(!fb);
        // skewed relevance
        let entry = cp_entry(&kg, 0.6, 0.2, 0.5);
        let full_first = {
            // single-grounding group where f is the only first edge
            let mut e = entry.clone();
            e.group.as_mut().unwrap().grounded.truncate(1);
            e
        };
        let (w, _) = weight(&f_first, &full_first);
        assert!((w - 0.75).abs() < 1e-12); // r_h = 0.6/0.8 = 0.75, p_h = 1
        // fallback
        let entry = cp_entry(&kg, 0.0, 0.0, 0.5);
        let (w, fb) = weight(&f_first, &entry);
        assert!(fb);
        assert!((w - 0.25).abs() < 1e-12);
        // PT weight is always 1
        let (w, fb) = weight(&kg.resolve("h", "r0", "c").unwrap(), &pt_entry(&kg, 0.4));
        assert_eq!((w, fb), (1.0, false));
    }

    #[test]
    fn cd_fixtures() {
        let kg = fixture_kg();
        let flags = AblationFlags::default();
        // one PT rule, conf 0.7, w 1 → cd 0.7
        let rs = ruleset(&kg, vec![pt_entry(&kg, 0.7)]);
        let sf = cd(&kg.resolve("h", "r0", "c").unwrap(), &rs, &flags);
        assert!((sf.cd - 0.7).abs() < 1e-12);
        // unsupported fact → cd 0
        let sf = cd(&kg.resolve("h", "r1", "a").unwrap(), &rs, &flags);
        assert_eq!(sf.cd, 0.0);
        // twenty weak contributions beat one strong one
        let weak = 1.0 - (1.0 - 0.11f64).powi(20);
        assert!(weak > 0.846);
        assert!((weak - 0.9025884) < 1e-3);
    }

    #[test]
    fn cd_is_order_invariant_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(1..=10usize);
            let mut contributions: Vec<Contribution> = (0..n)
                .map(|i| Contribution {
                    rule: format!("rule{i}"),
                    conf: rng.gen_range(0.0..1.0),
                    w: rng.gen_range(0.0..=1.0),
                    example_path: None,
                    even_split_fallback: false,
                })
                .collect();
            let cd1 = noisy_or(&contributions);
            assert!((0.0..1.0).contains(&cd1));
            contributions.shuffle(&mut rng);
            assert!((noisy_or(&contributions) - cd1).abs() < 1e-12);
            contributions.push(Contribution {
                rule: "extra".into(),
                conf: 0.3,
                w: 0.5,
                example_path: None,
                even_split_fallback: false,
            });
            assert!(noisy_or(&contributions) > cd1 - 1e-15);
        }
    }

    #[test]
    fn policy_boundary() {
        // 2 entities, 1 fact → ratio 0.5 → head
        let kg = KnowledgeGraph::build(&[t("a", "r", "b")], &[], &[]);
        assert_eq!(choose_policy(&kg), PositionPolicy::Head);
        // exactly ratio 10 → all
        let mut triples = Vec::new();
        for i in 0..20 {
            triples.push(t("a", &format!("r{i}"), "b"));
        }
        let kg = KnowledgeGraph::build(&triples, &[], &[]);
        assert_eq!(kg.train_facts().len(), 20);
        assert_eq!(kg.n_entities(), 2);
        assert_eq!(choose_policy(&kg), PositionPolicy::All);
    }

    #[test]
    fn selection_and_policy_filters() {
        let kg = fixture_kg();
        let rs = ruleset(&kg, vec![cp_entry(&kg, 0.3, 0.3, 0.8), pt_entry(&kg, 0.4)]);
        let flags = AblationFlags::default();
        let full = select_explanation(&kg, &rs, 10, PositionPolicy::All, &flags, false).unwrap();
        // candidates: 2 first edges, 2 last edges, 1 PT body fact
        assert_eq!(full.facts.len(), 5);
        for w in full.facts.windows(2) {
            assert!(w[0].cd >= w[1].cd);
        }
        let k1 = select_explanation(&kg, &rs, 1, PositionPolicy::All, &flags, false).unwrap();
        assert_eq!(k1.facts.len(), 1);
        assert_eq!(k1.facts[0].fact, full.facts[0].fact);
        // head policy drops tail-incident facts
        let head_only = select_explanation(&kg, &rs, 10, PositionPolicy::Head, &flags, false).unwrap();
        assert!(head_only.facts.iter().all(|sf| {
            sf.fact.head == rs.prediction.head || sf.fact.tail == rs.prediction.head
        }));
        assert_eq!(head_only.facts.len(), 3);
        // tail policy on a head-incident-only candidate set can be empty
        let pt_only = ruleset(&kg, vec![pt_entry(&kg, 0.4)]);
        let none = select_explanation(&kg, &pt_only, 10, PositionPolicy::Tail, &flags, false).unwrap();
        assert!(none.facts.is_empty());
    }

    #[test]
    fn ablation_flags_gate_rule_kinds() {
        let kg = fixture_kg();
        let rs = ruleset(&kg, vec![cp_entry(&kg, 0.3, 0.3, 0.8), pt_entry(&kg, 0.4)]);
        let no_cp = AblationFlags { use_cp: false, use_pt: true };
        let sf = cd(&kg.resolve("h", "r1", "a").unwrap(), &rs, &no_cp);
        assert_eq!(sf.cd, 0.0);
        let no_pt = AblationFlags { use_cp: true, use_pt: false };
        let with = cd(&kg.resolve("h", "r1", "a").unwrap(), &rs, &AblationFlags::default());
        let without = cd(&kg.resolve("h", "r1", "a").unwrap(), &rs, &no_pt);
        assert_eq!(with.cd, without.cd); // PT didn't support this fact anyway
        assert!(AblationFlags { use_cp: false, use_pt: false }.validate().is_err());
    }

    #[test]
    fn greedy_mode_retires_rules() {
        let kg = fixture_kg();
        let rs = ruleset(&kg, vec![cp_entry(&kg, 0.3, 0.3, 0.8), pt_entry(&kg, 0.4)]);
        let flags = AblationFlags::default();
        let greedy = select_explanation(&kg, &rs, 4, PositionPolicy::All, &flags, true).unwrap();
        // first pick: the PT body fact (cd 0.4 beats the CP edges at 0.2)
        assert_eq!(greedy.facts[0].fact, kg.resolve("h", "r0", "c").unwrap());
        // second pick retires the CP rule; everything left scores 0, so the
        // greedy loop stops short of k
        assert_eq!(greedy.facts.len(), 2);
        assert!((greedy.facts[1].cd - 0.2).abs() < 1e-12);
    }

    #[test]
    fn json_and_dot_are_deterministic() {
        let kg = fixture_kg();
        let rs = ruleset(&kg, vec![cp_entry(&kg, 0.3, 0.3, 0.8), pt_entry(&kg, 0.4)]);
        let e = select_explanation(&kg, &rs, 4, PositionPolicy::All, &AblationFlags::default(), false).unwrap();
        let j1 = serde_json::to_string_pretty(&explanation_json(&kg, &e)).unwrap();
        let j2 = serde_json::to_string_pretty(&explanation_json(&kg, &e)).unwrap();
        assert_eq!(j1, j2);
        assert!(j1.contains("\"prediction\""));
        let d1 = dot_export(&kg, &e);
        assert_eq!(d1, dot_export(&kg, &e));
        assert!(d1.starts_with("digraph"));
        assert!(d1.contains("color=red"));
    }
}
