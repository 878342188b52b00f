//! Phase 1: demand-driven worklist saturation of the fact database.
//!
//! For each demanded constructor pair `(t, u, ξ)` the engine seeds the
//! judgment `⟨A ≤ B⟩ξ` from the definitions' bodies and decomposes
//! judgments to a fixpoint. Parameter-against-parameter judgments become
//! atoms of the pair's most general rule; instantiation-against-
//! instantiation judgments register a consumer edge on the inner pair so
//! that its atoms (current and future) compose back into the outer pair,
//! and so that ⊥ propagates transitively.
//!
//! ⊥ never stops inference: a pair that is refuted keeps decomposing, which
//! makes the set of entries and atoms a pure fixpoint, identical under any
//! worklist ordering. Only the refutation traces depend on the order in
//! which rules fire.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::syntax::{
    label_subset, Atom, BottomRule, ConId, NamedType, Signature, StructuralType, Variance,
};

/// One entry key: a pair of defined constructors and a variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub left: ConId,
    pub right: ConId,
    pub variance: Variance,
}

impl PairKey {
    pub fn new(left: ConId, right: ConId, variance: Variance) -> Self {
        PairKey {
            left,
            right,
            variance,
        }
    }

    pub fn by_name(
        sig: &Signature,
        left: &str,
        right: &str,
        variance: Variance,
    ) -> Result<Self, SaturateError> {
        let resolve = |name: &str| {
            sig.lookup(name)
                .ok_or_else(|| SaturateError::UnknownConstructor(name.to_string()))
        };
        Ok(PairKey {
            left: resolve(left)?,
            right: resolve(right)?,
            variance,
        })
    }

    pub fn render(&self, sig: &Signature) -> String {
        format!(
            "({}, {}){}",
            sig.def(self.left).name,
            sig.def(self.right).name,
            self.variance
        )
    }
}

/// A canonical judgment within a pair's universe. Quantifier bodies keep
/// their variable as index 0 and both sides of a pair are always opened
/// together, so structural equality coincides with α-equivalence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Judgment {
    Structural(StructuralType, StructuralType, Variance),
    Named(NamedType, NamedType, Variance),
}

impl Judgment {
    pub fn variance(&self) -> Variance {
        match self {
            Judgment::Structural(_, _, v) | Judgment::Named(_, _, v) => *v,
        }
    }

    pub fn render(&self, sig: &Signature, key: PairKey) -> String {
        let (lp, rp) = crate::pretty::pair_param_names(sig, key.left, key.right);
        match self {
            Judgment::Structural(a, b, v) => format!(
                "<{} <={v} {}>",
                crate::pretty::structural(sig, a, &lp),
                crate::pretty::structural(sig, b, &rp),
            ),
            Judgment::Named(a, b, v) => format!(
                "<{} <={v} {}>",
                crate::pretty::named_in(sig, a, &lp, "x"),
                crate::pretty::named_in(sig, b, &rp, "x"),
            ),
        }
    }
}

/// How a judgment was inferred; the chain of parents yields the trace.
#[derive(Debug, Clone)]
pub enum Provenance {
    Init,
    Decomposed {
        parent: Judgment,
        rule: &'static str,
    },
    Composed {
        parent: Judgment,
        inner: PairKey,
        atom: Atom,
    },
}

#[derive(Debug, Clone)]
struct JudgmentMeta {
    provenance: Provenance,
}

/// One rendered step of a refutation trace.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub pair: PairKey,
    pub judgment: Judgment,
    pub rule: StepRule,
}

#[derive(Debug, Clone)]
pub enum StepRule {
    Init,
    Decomposed(&'static str),
    Composed { inner: PairKey, atom: Atom },
}

/// A finite list of forward-inference steps ending in the rule that
/// produced ⊥. Compose-⊥ links concatenate the inner pair's trace.
#[derive(Debug, Clone)]
pub struct RefutationTrace {
    pub steps: Vec<TraceStep>,
    pub terminal: BottomRule,
}

/// Why an entry is ⊥, with the unfold depth at which an eager replay of the
/// trace exhibits the violation.
#[derive(Debug, Clone)]
pub struct BottomInfo {
    pub rule: BottomRule,
    pub trace: RefutationTrace,
    pub depth: u32,
}

/// A consumer edge: `pair` inferred the instantiation judgment `via`,
/// whose substitutions compose this entry's atoms back into `pair`.
#[derive(Debug, Clone)]
struct Consumer {
    pair: PairKey,
    via: Judgment,
    weight: u32,
}

/// Saturation state for one constructor pair.
#[derive(Debug, Default)]
pub struct Entry {
    /// Atoms of the most general rule, with their witness depths. Kept even
    /// after ⊥ so that saturation is order-independent; `rule_of` hides
    /// them.
    atoms: BTreeMap<Atom, u32>,
    bottom: Option<BottomInfo>,
    processed: HashMap<Judgment, JudgmentMeta>,
    consumers: Vec<Consumer>,
    /// Termination bound: twice the product of the two bodies' subformula
    /// counts.
    bound: u64,
}

impl Entry {
    pub fn is_bottom(&self) -> bool {
        self.bottom.is_some()
    }

    pub fn bottom(&self) -> Option<&BottomInfo> {
        self.bottom.as_ref()
    }

    /// Atom → witness depth, for non-⊥ entries.
    pub fn atoms(&self) -> &BTreeMap<Atom, u32> {
        &self.atoms
    }

    pub fn processed_judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.processed.keys()
    }

    pub fn processed_count(&self) -> usize {
        self.processed.len()
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }
}

/// The most general parametric rule for a pair, or its refutation.
#[derive(Debug, Clone)]
pub enum Rule {
    Valid(BTreeSet<Atom>),
    Invalid(Box<BottomInfo>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SaturateError {
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(String),
    #[error("pair {0} was never demanded")]
    UnknownPair(String),
    #[error("saturation fuel exhausted after {limit} judgments; this indicates a bug")]
    FuelExhausted { limit: u64 },
    #[error("termination bound exceeded on pair {pair}; this indicates a bug")]
    TerminationBound { pair: String },
}

/// Worklist discipline. All orders produce identical entries and atoms;
/// seeded shuffling exists to test exactly that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorklistOrder {
    Fifo,
    Lifo,
    Seeded(u64),
}

struct Task {
    key: PairKey,
    judgment: Judgment,
    weight: u32,
    provenance: Provenance,
}

/// The saturated fact database. Saturation is single-writer; once saturated
/// the database is read-only for rule lookups.
pub struct FactDatabase<'a> {
    sig: &'a Signature,
    entries: BTreeMap<PairKey, Entry>,
    worklist: VecDeque<Task>,
    rng: Option<ChaCha8Rng>,
    order: WorklistOrder,
    processed_total: u64,
    /// Sum of per-pair bounds over demanded pairs; the default fuel is four
    /// times this, growing as pairs are demanded.
    bound_total: u64,
    fuel_override: Option<u64>,
}

impl<'a> FactDatabase<'a> {
    pub fn new(sig: &'a Signature) -> Self {
        Self::with_order(sig, WorklistOrder::Fifo)
    }

    pub fn with_order(sig: &'a Signature, order: WorklistOrder) -> Self {
        let rng = match order {
            WorklistOrder::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        FactDatabase {
            sig,
            entries: BTreeMap::new(),
            worklist: VecDeque::new(),
            rng,
            order,
            processed_total: 0,
            bound_total: 0,
            fuel_override: None,
        }
    }

    /// Overrides the safety fuel (the default is 4 × the summed
    /// per-pair termination bounds).
    pub fn set_max_facts(&mut self, limit: u64) {
        self.fuel_override = Some(limit);
    }

    pub fn signature(&self) -> &Signature {
        self.sig
    }

    /// Seeds a pair's initial judgment if unseen. Idempotent.
    pub fn demand(&mut self, key: PairKey) {
        if self.entries.contains_key(&key) {
            return;
        }
        let body_left = self.sig.def(key.left).body.clone();
        let body_right = self.sig.def(key.right).body.clone();
        let bound = 2
            * self.sig.subformula_count(&body_left) as u64
            * self.sig.subformula_count(&body_right) as u64;
        self.bound_total += bound;
        self.entries.insert(
            key,
            Entry {
                bound,
                ..Entry::default()
            },
        );
        self.worklist.push_back(Task {
            key,
            judgment: Judgment::Structural(body_left, body_right, key.variance),
            weight: 0,
            provenance: Provenance::Init,
        });
    }

    /// Demands `roots` and drains the worklist to fixpoint.
    pub fn saturate(&mut self, roots: impl IntoIterator<Item = PairKey>) -> Result<(), SaturateError> {
        for key in roots {
            self.demand(key);
        }
        self.drain()
    }

    fn fuel(&self) -> u64 {
        self.fuel_override.unwrap_or(4 * self.bound_total.max(1))
    }

    fn pop(&mut self) -> Option<Task> {
        match self.order {
            WorklistOrder::Fifo => self.worklist.pop_front(),
            WorklistOrder::Lifo => self.worklist.pop_back(),
            WorklistOrder::Seeded(_) => {
                if self.worklist.is_empty() {
                    return None;
                }
                let rng = self.rng.as_mut().expect("seeded order keeps an rng");
                let idx = rng.gen_range(0..self.worklist.len());
                self.worklist.swap_remove_back(idx)
            }
        }
    }

    /// Runs forward inference until no rule can add a judgment or atom.
    pub fn drain(&mut self) -> Result<(), SaturateError> {
        while let Some(task) = self.pop() {
            self.process(task)?;
        }
        Ok(())
    }

    fn process(&mut self, task: Task) -> Result<(), SaturateError> {
        let entry = self
            .entries
            .get_mut(&task.key)
            .expect("tasks target demanded pairs");
        if entry.processed.contains_key(&task.judgment) {
            return Ok(());
        }
        if entry.processed.len() as u64 + 1 > entry.bound {
            return Err(SaturateError::TerminationBound {
                pair: task.key.render(self.sig),
            });
        }
        entry.processed.insert(
            task.judgment.clone(),
            JudgmentMeta {
                provenance: task.provenance,
            },
        );
        self.processed_total += 1;
        if self.processed_total > self.fuel() {
            return Err(SaturateError::FuelExhausted { limit: self.fuel() });
        }

        let key = task.key;
        let weight = task.weight;
        let judgment = task.judgment;
        match &judgment {
            Judgment::Structural(a, b, v) => {
                self.decompose_structural(key, &judgment, a.clone(), b.clone(), *v, weight)
            }
            Judgment::Named(a, b, v) => {
                self.decompose_named(key, &judgment, a.clone(), b.clone(), *v, weight)
            }
        }
    }

    fn child(&mut self, key: PairKey, parent: &Judgment, rule: &'static str, child: Judgment, weight: u32) {
        self.worklist.push_back(Task {
            key,
            judgment: child,
            weight,
            provenance: Provenance::Decomposed {
                parent: parent.clone(),
                rule,
            },
        });
    }

    fn decompose_structural(
        &mut self,
        key: PairKey,
        parent: &Judgment,
        left: StructuralType,
        right: StructuralType,
        variance: Variance,
        weight: u32,
    ) -> Result<(), SaturateError> {
        use StructuralType as S;
        match (&left, &right) {
            (S::Product(a1, a2), S::Product(b1, b2)) => {
                self.child(key, parent, "*", Judgment::Named(a1.clone(), b1.clone(), variance), weight);
                self.child(key, parent, "*", Judgment::Named(a2.clone(), b2.clone(), variance), weight);
            }
            (S::Unit, S::Unit) => {}
            (S::Variant(fl), S::Variant(fr)) => {
                if !label_subset(&S::labels(fl), &S::labels(fr), variance) {
                    self.mark_bottom_direct(key, BottomRule::VariantWidth, parent, weight);
                    return Ok(());
                }
                for (l, tl) in fl {
                    if let Some((_, tr)) = fr.iter().find(|(k, _)| k == l) {
                        self.child(
                            key,
                            parent,
                            "+",
                            Judgment::Named(tl.clone(), tr.clone(), variance),
                            weight,
                        );
                    }
                }
            }
            (S::Record(fl), S::Record(fr)) => {
                if !label_subset(&S::labels(fr), &S::labels(fl), variance) {
                    self.mark_bottom_direct(key, BottomRule::RecordWidth, parent, weight);
                    return Ok(());
                }
                for (l, tl) in fl {
                    if let Some((_, tr)) = fr.iter().find(|(k, _)| k == l) {
                        self.child(
                            key,
                            parent,
                            "&",
                            Judgment::Named(tl.clone(), tr.clone(), variance),
                            weight,
                        );
                    }
                }
            }
            (S::Arrow(a1, a2), S::Arrow(b1, b2)) => {
                self.child(
                    key,
                    parent,
                    "->1",
                    Judgment::Named(a1.clone(), b1.clone(), variance.negate()),
                    weight,
                );
                self.child(
                    key,
                    parent,
                    "->2",
                    Judgment::Named(a2.clone(), b2.clone(), variance),
                    weight,
                );
            }
            (S::Forall(_, tl), S::Forall(_, tr)) => {
                // Both binders open with the same canonical variable.
                self.child(key, parent, "forall", Judgment::Named(tl.clone(), tr.clone(), variance), weight);
            }
            (S::Exists(_, tl), S::Exists(_, tr)) => {
                self.child(key, parent, "exists", Judgment::Named(tl.clone(), tr.clone(), variance), weight);
            }
            _ => {
                self.mark_bottom_direct(key, BottomRule::Mismatch, parent, weight);
            }
        }
        Ok(())
    }

    fn decompose_named(
        &mut self,
        key: PairKey,
        parent: &Judgment,
        left: NamedType,
        right: NamedType,
        variance: Variance,
        weight: u32,
    ) -> Result<(), SaturateError> {
        match (&left, &right) {
            (NamedType::Inst(t, _), NamedType::Inst(u, _)) => {
                let inner = PairKey::new(*t, *u, variance);
                self.demand(inner);
                let consumer = Consumer {
                    pair: key,
                    via: parent.clone(),
                    weight,
                };
                let (atoms, bottom): (Vec<(Atom, u32)>, bool) = {
                    let e = self.entries.get_mut(&inner).expect("just demanded");
                    e.consumers.push(consumer);
                    (
                        e.atoms.iter().map(|(a, d)| (*a, *d)).collect(),
                        e.bottom.is_some(),
                    )
                };
                for (atom, depth) in atoms {
                    self.compose(key, parent, inner, atom, depth, weight);
                }
                if bottom {
                    self.mark_bottom_link(key, parent, weight, inner);
                }
            }
            (NamedType::Param(i), NamedType::Param(j)) => {
                let atom = Atom::new(*i, variance, *j);
                let depth = 1 + weight;
                let fresh = {
                    let e = self.entries.get_mut(&key).expect("demanded");
                    if e.atoms.contains_key(&atom) {
                        false
                    } else {
                        e.atoms.insert(atom, depth);
                        true
                    }
                };
                if fresh {
                    let consumers: Vec<Consumer> =
                        self.entries.get(&key).expect("demanded").consumers.clone();
                    for c in consumers {
                        self.compose(c.pair, &c.via, key, atom, depth, c.weight);
                    }
                }
            }
            (NamedType::Param(_), _) => {
                self.mark_bottom_direct(key, BottomRule::ParamLeft, parent, weight);
            }
            (_, NamedType::Param(_)) => {
                self.mark_bottom_direct(key, BottomRule::ParamRight, parent, weight);
            }
            (NamedType::Var(x), NamedType::Var(y)) => {
                if x != y {
                    self.mark_bottom_direct(key, BottomRule::VarLeft, parent, weight);
                }
                // No rule for ⟨x ≤ x⟩: nothing to infer.
            }
            (NamedType::Var(_), _) => {
                self.mark_bottom_direct(key, BottomRule::VarLeft, parent, weight);
            }
            (_, NamedType::Var(_)) => {
                self.mark_bottom_direct(key, BottomRule::VarRight, parent, weight);
            }
        }
        Ok(())
    }

    /// Enqueues the composed judgment `⟨θ′(α′) ≤ζ φ′(β′)⟩` on `outer` for an
    /// atom of `inner`.
    fn compose(
        &mut self,
        outer: PairKey,
        via: &Judgment,
        inner: PairKey,
        atom: Atom,
        atom_depth: u32,
        via_weight: u32,
    ) {
        let (theta, phi) = match via {
            Judgment::Named(NamedType::Inst(_, theta), NamedType::Inst(_, phi), _) => (theta, phi),
            _ => unreachable!("consumer edges only arise from instantiation judgments"),
        };
        let composed = Judgment::Named(
            theta.get(atom.left).clone(),
            phi.get(atom.right).clone(),
            atom.variance,
        );
        self.worklist.push_back(Task {
            key: outer,
            judgment: composed,
            weight: via_weight + atom_depth,
            provenance: Provenance::Composed {
                parent: via.clone(),
                inner,
                atom,
            },
        });
    }

    /// Reconstructs the in-pair chain of inferences leading to `judgment`.
    fn chain(&self, key: PairKey, judgment: &Judgment) -> Vec<TraceStep> {
        let entry = &self.entries[&key];
        let mut steps = Vec::new();
        let mut current = judgment.clone();
        loop {
            let meta = entry
                .processed
                .get(&current)
                .expect("trace chains only reference processed judgments");
            let (rule, parent) = match &meta.provenance {
                Provenance::Init => (StepRule::Init, None),
                Provenance::Decomposed { parent, rule } => {
                    (StepRule::Decomposed(rule), Some(parent.clone()))
                }
                Provenance::Composed { parent, inner, atom } => (
                    StepRule::Composed {
                        inner: *inner,
                        atom: *atom,
                    },
                    Some(parent.clone()),
                ),
            };
            steps.push(TraceStep {
                pair: key,
                judgment: current.clone(),
                rule,
            });
            match parent {
                Some(p) => current = p,
                None => break,
            }
        }
        steps.reverse();
        steps
    }

    fn mark_bottom_direct(
        &mut self,
        key: PairKey,
        rule: BottomRule,
        at: &Judgment,
        weight: u32,
    ) {
        if self.entries[&key].bottom.is_some() {
            return;
        }
        let steps = self.chain(key, at);
        let info = BottomInfo {
            rule,
            trace: RefutationTrace {
                steps,
                terminal: rule,
            },
            depth: 1 + weight,
        };
        self.set_bottom(key, info);
    }

    fn mark_bottom_link(&mut self, key: PairKey, via: &Judgment, weight: u32, inner: PairKey) {
        if self.entries[&key].bottom.is_some() {
            return;
        }
        let inner_info = self.entries[&inner]
            .bottom
            .clone()
            .expect("link targets a refuted pair");
        let mut steps = self.chain(key, via);
        steps.extend(inner_info.trace.steps);
        let info = BottomInfo {
            rule: inner_info.rule,
            trace: RefutationTrace {
                steps,
                terminal: inner_info.trace.terminal,
            },
            depth: 1 + weight + inner_info.depth,
        };
        self.set_bottom(key, info);
    }

    fn set_bottom(&mut self, key: PairKey, info: BottomInfo) {
        let entry = self.entries.get_mut(&key).expect("demanded");
        entry.bottom = Some(info);
        let consumers = entry.consumers.clone();
        for c in consumers {
            self.mark_bottom_link(c.pair, &c.via, c.weight, key);
        }
    }

    /// The most general parametric rule for `key`, or its refutation. The
    /// database must be saturated and the pair demanded.
    pub fn rule_of(&self, key: PairKey) -> Result<Rule, SaturateError> {
        let entry = self
            .entries
            .get(&key)
            .ok_or_else(|| SaturateError::UnknownPair(key.render(self.sig)))?;
        Ok(match &entry.bottom {
            Some(info) => Rule::Invalid(Box::new(info.clone())),
            None => Rule::Valid(entry.atoms.keys().copied().collect()),
        })
    }

    pub fn entry(&self, key: PairKey) -> Option<&Entry> {
        self.entries.get(&key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (PairKey, &Entry)> {
        self.entries.iter().map(|(k, e)| (*k, e))
    }

    pub fn is_saturated(&self) -> bool {
        self.worklist.is_empty()
    }

    pub fn order(&self) -> WorklistOrder {
        self.order
    }

    pub fn processed_total(&self) -> u64 {
        self.processed_total
    }

    pub fn fuel_limit(&self) -> u64 {
        self.fuel()
    }

    /// `(pair, processed judgments, termination bound)` for every entry.
    pub fn stats(&self) -> Vec<(PairKey, u64, u64)> {
        self.entries
            .iter()
            .map(|(k, e)| (*k, e.processed.len() as u64, e.bound))
            .collect()
    }

    /// Serializes all entries, sorted by key, as the `--emit-facts` JSON.
    pub fn facts_json(&self) -> serde_json::Value {
        let pairs: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|(key, entry)| {
                let mut obj = serde_json::json!({
                    "left": self.sig.def(key.left).name,
                    "right": self.sig.def(key.right).name,
                    "variance": key.variance,
                });
                match &entry.bottom {
                    Some(info) => {
                        obj["bottom_trace"] = serde_json::json!({
                            "rule": info.rule,
                            "depth": info.depth,
                            "steps": info
                                .trace
                                .steps
                                .iter()
                                .map(|s| self.trace_step_json(s))
                                .collect::<Vec<_>>(),
                        });
                    }
                    None => {
                        obj["constraints"] =
                            serde_json::json!(entry.atoms.keys().collect::<Vec<_>>());
                    }
                }
                obj
            })
            .collect();
        serde_json::json!({ "pairs": pairs })
    }

    fn trace_step_json(&self, step: &TraceStep) -> serde_json::Value {
        let rule = match &step.rule {
            StepRule::Init => "init".to_string(),
            StepRule::Decomposed(r) => (*r).to_string(),
            StepRule::Composed { inner, .. } => format!("compose {}", inner.render(self.sig)),
        };
        serde_json::json!({
            "pair": step.pair.render(self.sig),
            "judgment": step.judgment.render(self.sig, step.pair),
            "rule": rule,
        })
    }
}

/// Convenience entry point: saturates `roots` over `sig` with FIFO order.
pub fn saturate<'a>(
    sig: &'a Signature,
    roots: impl IntoIterator<Item = PairKey>,
) -> Result<FactDatabase<'a>, SaturateError> {
    let mut db = FactDatabase::new(sig);
    db.saturate(roots)?;
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::parser::parse_signature;
    use crate::syntax::Signature;

    fn load(text: &str) -> Signature {
        elaborate(&parse_signature(text).unwrap()).unwrap().signature
    }

    fn key(sig: &Signature, l: &str, r: &str, v: Variance) -> PairKey {
        PairKey::by_name(sig, l, r, v).unwrap()
    }

    fn atoms_of(db: &FactDatabase, k: PairKey) -> Vec<Atom> {
        match db.rule_of(k).unwrap() {
            Rule::Valid(atoms) => atoms.into_iter().collect(),
            Rule::Invalid(info) => panic!("unexpected bottom: {:?}", info.rule),
        }
    }

    fn bottom_of(db: &FactDatabase, k: PairKey) -> BottomInfo {
        match db.rule_of(k).unwrap() {
            Rule::Invalid(info) => *info,
            Rule::Valid(atoms) => panic!("expected bottom, got atoms {atoms:?}"),
        }
    }

    /// The even/odd/nat saturation reproduces the six facts of the
    /// monomorphic walkthrough: three initial judgments and three
    /// decomposition consequences, with no refutation anywhere.
    #[test]
    fn even_odd_nat_saturates_to_the_six_facts() {
        let sig = load("type nat = +{z: 1, s: nat}\ntype even = +{z: 1, s: odd}\ntype odd = +{s: even}");
        let even_nat = key(&sig, "even", "nat", Variance::Plus);
        let odd_nat = key(&sig, "odd", "nat", Variance::Plus);
        let db = saturate(&sig, [even_nat, odd_nat]).unwrap();

        let one = sig.lookup("%g0").unwrap();
        let one_one = PairKey::new(one, one, Variance::Plus);
        let keys: Vec<PairKey> = db.entries().map(|(k, _)| k).collect();
        let mut expected = vec![even_nat, odd_nat, one_one];
        expected.sort();
        assert_eq!(keys, expected);

        // Fact counts per pair: init plus each variant alternative.
        assert_eq!(db.entry(even_nat).unwrap().processed_count(), 3);
        assert_eq!(db.entry(odd_nat).unwrap().processed_count(), 2);
        assert_eq!(db.entry(one_one).unwrap().processed_count(), 1);
        assert_eq!(db.processed_total(), 6);

        for (k, entry) in db.entries() {
            assert!(!entry.is_bottom(), "{} unexpectedly refuted", k.render(&sig));
            assert!(entry.atoms().is_empty());
        }

        // The named consequences are exactly the ones listed.
        let nat = sig.lookup("nat").unwrap();
        let odd = sig.lookup("odd").unwrap();
        let even = sig.lookup("even").unwrap();
        let has = |k: PairKey, j: &Judgment| {
            db.entry(k).unwrap().processed_judgments().any(|p| p == j)
        };
        assert!(has(
            even_nat,
            &Judgment::Named(
                NamedType::nullary(one),
                NamedType::nullary(one),
                Variance::Plus
            )
        ));
        assert!(has(
            even_nat,
            &Judgment::Named(
                NamedType::nullary(odd),
                NamedType::nullary(nat),
                Variance::Plus
            )
        ));
        assert!(has(
            odd_nat,
            &Judgment::Named(
                NamedType::nullary(even),
                NamedType::nullary(nat),
                Variance::Plus
            )
        ));
    }

    /// The context-free-language example saturates to the thirteen facts
    /// spread over exactly five entries, with the single atom k <= k' on
    /// (e, d) and (r, d).
    #[test]
    fn cfl_saturation_matches_the_thirteen_facts() {
        let sig = load(
            "type one = 1\n\
             type e0 = +{L: e[end], end$: one}\n\
             type e[k] = +{L: e[r[k]], R: k}\n\
             type end = +{end$: one}\n\
             type r[k] = +{R: k}\n\
             type d0 = +{L: d[d0], end$: one}\n\
             type d[k'] = +{L: d[d[k']], R: k'}",
        );
        let e0_d0 = key(&sig, "e0", "d0", Variance::Plus);
        let db = saturate(&sig, [e0_d0]).unwrap();

        let e_d = key(&sig, "e", "d", Variance::Plus);
        let r_d = key(&sig, "r", "d", Variance::Plus);
        let end_d0 = key(&sig, "end", "d0", Variance::Plus);
        let one_one = key(&sig, "one", "one", Variance::Plus);

        let keys: Vec<PairKey> = db.entries().map(|(k, _)| k).collect();
        let mut expected = vec![e0_d0, e_d, r_d, end_d0, one_one];
        expected.sort();
        assert_eq!(keys, expected);

        // Facts (1)-(13): 4 on (e,d), 2 on (r,d), 4 on (e0,d0), 2 on
        // (end,d0), 1 on (one,one).
        assert_eq!(db.entry(e_d).unwrap().processed_count(), 4);
        assert_eq!(db.entry(r_d).unwrap().processed_count(), 2);
        assert_eq!(db.entry(e0_d0).unwrap().processed_count(), 4);
        assert_eq!(db.entry(end_d0).unwrap().processed_count(), 2);
        assert_eq!(db.entry(one_one).unwrap().processed_count(), 1);
        assert_eq!(db.processed_total(), 13);

        let atom = Atom::new(0, Variance::Plus, 0);
        assert_eq!(atoms_of(&db, e_d), vec![atom]);
        assert_eq!(atoms_of(&db, r_d), vec![atom]);
        assert_eq!(atoms_of(&db, e0_d0), vec![]);
        assert_eq!(atoms_of(&db, end_d0), vec![]);
        assert_eq!(atoms_of(&db, one_one), vec![]);

        // Fact (12), the composed consequence <r[k] <= d[k']> on (e, d).
        let r = sig.lookup("r").unwrap();
        let d = sig.lookup("d").unwrap();
        let composed = Judgment::Named(
            NamedType::Inst(r, Subst(vec![NamedType::Param(0)])),
            NamedType::Inst(d, Subst(vec![NamedType::Param(0)])),
            Variance::Plus,
        );
        assert!(db.entry(e_d).unwrap().processed_judgments().any(|j| *j == composed));
    }

    use crate::syntax::Subst;

    /// The queue-stack protocol rules: stack is a subtype of itself and
    /// qstack1 with both covariant and contravariant premises, and of
    /// qstack2 with the covariant premise alone.
    #[test]
    fn stack_qstack_rules_match() {
        let sig = load(
            "type option[b] = +{none: 1, some: b}\n\
             type stack[a] = &{push: a -> stack[a], pop: option[a * stack[a]]}\n\
             type qstack1[b] = &{push: b -> qstack1[b], pop: option[b * qstack2[b]]}\n\
             type qstack2[b] = &{pop: option[b * qstack2[b]]}",
        );
        let both = vec![Atom::new(0, Variance::Plus, 0), Atom::new(0, Variance::Minus, 0)];
        let co = vec![Atom::new(0, Variance::Plus, 0)];

        let mut db = FactDatabase::new(&sig);
        let ss = key(&sig, "stack", "stack", Variance::Plus);
        let sq1 = key(&sig, "stack", "qstack1", Variance::Plus);
        let sq2 = key(&sig, "stack", "qstack2", Variance::Plus);
        db.saturate([ss, sq1, sq2]).unwrap();

        assert_eq!(atoms_of(&db, ss), both);
        assert_eq!(atoms_of(&db, sq1), both);
        assert_eq!(atoms_of(&db, sq2), co);
    }

    /// nat against snat is refuted by a parameter rule: the admissible
    /// rule would need the non-parametric premise 1 <= k.
    #[test]
    fn nat_snat_is_a_parametricity_violation() {
        let sig = load("type one = 1\ntype nat = +{z: one, s: nat}\ntype snat[k] = +{z: k, s: snat[k]}");
        let k = key(&sig, "nat", "snat", Variance::Plus);
        let db = saturate(&sig, [k]).unwrap();
        let info = bottom_of(&db, k);
        assert_eq!(info.rule, BottomRule::ParamRight);
        assert!(info.rule.is_parametricity());
    }

    /// d0 <= e0 fails structurally: d offers L where e's r-continuation
    /// does not, a variant-width failure reached through two compose
    /// links.
    #[test]
    fn d0_e0_is_a_variant_width_violation() {
        let sig = load(
            "type one = 1\n\
             type e0 = +{L: e[end], end$: one}\n\
             type e[k] = +{L: e[r[k]], R: k}\n\
             type end = +{end$: one}\n\
             type r[k] = +{R: k}\n\
             type d0 = +{L: d[d0], end$: one}\n\
             type d[k'] = +{L: d[d[k']], R: k'}",
        );
        let k = key(&sig, "d0", "e0", Variance::Plus);
        let db = saturate(&sig, [k]).unwrap();
        let info = bottom_of(&db, k);
        assert_eq!(info.rule, BottomRule::VariantWidth);
        assert!(!info.rule.is_parametricity());
        // The shortest eager replay (through d0 <= end) needs three
        // unfolds; the recorded depth witnesses one such path.
        assert_eq!(info.depth, 3);
        assert_eq!(bottom_of(&db, key(&sig, "d", "r", Variance::Plus)).depth, 1);
        assert_eq!(bottom_of(&db, key(&sig, "d0", "end", Variance::Plus)).depth, 1);
    }

    #[test]
    fn demand_is_idempotent_and_self_pairs_work() {
        let sig = load("type t = 1");
        let mut db = FactDatabase::new(&sig);
        let k = key(&sig, "t", "t", Variance::Plus);
        db.demand(k);
        db.demand(k);
        db.drain().unwrap();
        assert_eq!(db.processed_total(), 1); // just <1 <= 1>, no children
        assert_eq!(atoms_of(&db, k), vec![]);

        // Unknown constructors are rejected at key construction.
        assert!(matches!(
            PairKey::by_name(&sig, "t", "u", Variance::Plus),
            Err(SaturateError::UnknownConstructor(_))
        ));
        // Never-demanded pairs are reported as such.
        let other = PairKey::new(ConId(0), ConId(0), Variance::Minus);
        assert!(matches!(
            db.rule_of(other),
            Err(SaturateError::UnknownPair(_))
        ));
    }

    #[test]
    fn empty_roots_give_an_empty_database() {
        let sig = load("type t = 1");
        let db = saturate(&sig, []).unwrap();
        assert_eq!(db.entries().count(), 0);
        assert_eq!(db.processed_total(), 0);
    }

    /// Even with coordinated labels, list <= tree bottoms out on a
    /// sum-against-product mismatch in the node payload, and wrapper pairs
    /// that instantiate the refuted pair become bottom too.
    #[test]
    fn bottom_propagates_to_consumers() {
        let sig = load(
            "type list[a] = +{leaf: 1, node: a * list[a]}\n\
             type tree[b] = +{leaf: 1, node: b * (tree[b] * tree[b])}\n\
             type w1[a] = list[a] * 1\n\
             type w2[b] = tree[b] * 1",
        );
        let list_tree = key(&sig, "list", "tree", Variance::Plus);
        let w = key(&sig, "w1", "w2", Variance::Plus);
        let db = saturate(&sig, [w]).unwrap();
        assert_eq!(bottom_of(&db, list_tree).rule, BottomRule::Mismatch);
        let info = bottom_of(&db, w);
        assert_eq!(info.rule, BottomRule::Mismatch);
        // The trace walks through the consumer link.
        assert!(info.trace.steps.len() >= 2);
    }

    /// Identical entries under all worklist disciplines; only traces may
    /// differ.
    #[test]
    fn saturation_is_order_independent() {
        let text = "type option[b] = +{none: 1, some: b}\n\
             type stack[a] = &{push: a -> stack[a], pop: option[a * stack[a]]}\n\
             type qstack1[b] = &{push: b -> qstack1[b], pop: option[b * qstack2[b]]}\n\
             type qstack2[b] = &{pop: option[b * qstack2[b]]}\n\
             type list[a] = +{nil: 1, cons: a * list[a]}\n\
             type tree[b] = +{leaf: 1, node: b * (tree[b] * tree[b])}";
        let sig = load(text);
        let roots: Vec<PairKey> = sig
            .user_constructors()
            .flat_map(|l| {
                sig.user_constructors()
                    .flat_map(move |r| {
                        [
                            PairKey::new(l, r, Variance::Plus),
                            PairKey::new(l, r, Variance::Minus),
                        ]
                    })
                    .collect::<Vec<_>>()
            })
            .collect();

        let reference = {
            let mut db = FactDatabase::new(&sig);
            db.saturate(roots.clone()).unwrap();
            snapshot(&db)
        };
        for order in [
            WorklistOrder::Lifo,
            WorklistOrder::Seeded(1),
            WorklistOrder::Seeded(42),
        ] {
            let mut db = FactDatabase::with_order(&sig, order);
            db.saturate(roots.clone()).unwrap();
            assert_eq!(snapshot(&db), reference, "order {order:?} diverged");
        }
    }

    fn snapshot(db: &FactDatabase) -> Vec<(PairKey, bool, Vec<Atom>)> {
        db.entries()
            .map(|(k, e)| {
                (
                    k,
                    e.is_bottom(),
                    e.atoms().keys().copied().collect::<Vec<_>>(),
                )
            })
            .collect()
    }

    /// Per-pair processed judgments stay within twice the product of the
    /// bodies' subformula counts, and the global fuel never triggers.
    #[test]
    fn corpus_respects_the_termination_bound() {
        for (name, text) in crate::corpus_for_tests::ALL {
            let sig = load(text);
            let roots: Vec<PairKey> = sig
                .user_constructors()
                .flat_map(|l| {
                    sig.user_constructors()
                        .flat_map(move |r| {
                            [
                                PairKey::new(l, r, Variance::Plus),
                                PairKey::new(l, r, Variance::Minus),
                            ]
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            let db = saturate(&sig, roots).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(db.is_saturated());
            for (k, processed, bound) in db.stats() {
                assert!(
                    processed <= bound,
                    "{name}: {} exceeded bound ({processed} > {bound})",
                    k.render(&sig)
                );
            }
            assert!(db.processed_total() <= db.fuel_limit(), "{name}: fuel");
        }
    }

    #[test]
    fn fuel_override_aborts_runaway_saturation() {
        let sig = load("type nat = +{z: 1, s: nat}\ntype even = +{z: 1, s: odd}\ntype odd = +{s: even}");
        let mut db = FactDatabase::new(&sig);
        db.set_max_facts(2);
        let err = db
            .saturate([key(&sig, "even", "nat", Variance::Plus)])
            .unwrap_err();
        assert!(matches!(err, SaturateError::FuelExhausted { limit: 2 }));
    }
}
