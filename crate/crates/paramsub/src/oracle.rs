//! Independent reference semantics: bounded refuters for the coinductive
//! declarative subtyping systems, and an exact decider for the monomorphic
//! fragment.
//!
//! These deliberately share nothing with the saturation engine. The refuters
//! explore the declarative rules bottom-up with a budget on unfold steps
//! (the only rules that can recur unboundedly) and either exhibit a finite
//! rule-inapplicability path or report that none exists within the budget.

use std::collections::HashMap;

use thiserror::Error;

use crate::syntax::{
    label_subset, ConId, NamedType, Signature, StructuralType, SubstStack, Variance,
};

/// Result of a bounded refutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refutation {
    NoCounterexampleWithin(u32),
    Violation(Vec<String>),
}

impl Refutation {
    pub fn is_violation(&self) -> bool {
        matches!(self, Refutation::Violation(_))
    }
}

// ---------------------------------------------------------------------------
// Structural refuter (eager substitution on unfolding)
// ---------------------------------------------------------------------------

struct StructuralSearch<'a> {
    sig: &'a Signature,
    /// Goal → largest budget at which no violation was found. Budget-aware:
    /// clearing a goal at budget 2 says nothing about budget 5.
    cleared: HashMap<(NamedType, NamedType), u32>,
    fresh_var: u32,
}

impl StructuralSearch<'_> {
    fn named(&mut self, left: &NamedType, right: &NamedType, budget: u32) -> Option<Vec<String>> {
        match (left, right) {
            (NamedType::Var(x), NamedType::Var(y)) => {
                if x == y {
                    None
                } else {
                    Some(vec!["distinct variables".into()])
                }
            }
            (NamedType::Var(_), _) | (_, NamedType::Var(_)) => {
                Some(vec!["variable against non-variable".into()])
            }
            (NamedType::Param(_), _) | (_, NamedType::Param(_)) => {
                unreachable!("structural refuter goals are closed")
            }
            (NamedType::Inst(t, theta), NamedType::Inst(u, phi)) => {
                if budget == 0 {
                    return None;
                }
                let key = (left.clone(), right.clone());
                if let Some(&b) = self.cleared.get(&key) {
                    if budget <= b {
                        return None;
                    }
                }
                let body_l = self.sig.def(*t).body.apply(theta);
                let body_r = self.sig.def(*u).body.apply(phi);
                let result = self.structural(&body_l, &body_r, budget - 1).map(|mut path| {
                    path.insert(
                        0,
                        format!(
                            "unfold {} <= {}",
                            crate::pretty::named(self.sig, left),
                            crate::pretty::named(self.sig, right)
                        ),
                    );
                    path
                });
                if result.is_none() {
                    let entry = self.cleared.entry(key).or_insert(0);
                    *entry = (*entry).max(budget);
                }
                result
            }
        }
    }

    fn structural(
        &mut self,
        left: &StructuralType,
        right: &StructuralType,
        budget: u32,
    ) -> Option<Vec<String>> {
        use StructuralType as S;
        match (left, right) {
            (S::Product(a1, a2), S::Product(b1, b2)) => self
                .named(a1, b1, budget)
                .or_else(|| self.named(a2, b2, budget)),
            (S::Unit, S::Unit) => None,
            (S::Variant(fl), S::Variant(fr)) => {
                let (ll, lr) = (S::labels(fl), S::labels(fr));
                if !label_subset(&ll, &lr, Variance::Plus) {
                    return Some(vec![format!(
                        "variant labels {{{}}} are not a subset of {{{}}}",
                        join(&ll),
                        join(&lr)
                    )]);
                }
                for (l, tl) in fl {
                    let tr = fr.iter().find(|(k, _)| k == l).map(|(_, t)| t)?;
                    if let Some(path) = self.named(tl, tr, budget) {
                        return Some(path);
                    }
                }
                None
            }
            (S::Record(fl), S::Record(fr)) => {
                let (ll, lr) = (S::labels(fl), S::labels(fr));
                if !label_subset(&lr, &ll, Variance::Plus) {
                    return Some(vec![format!(
                        "record labels {{{}}} are not a superset of {{{}}}",
                        join(&ll),
                        join(&lr)
                    )]);
                }
                for (l, tr) in fr {
                    let tl = fl.iter().find(|(k, _)| k == l).map(|(_, t)| t)?;
                    if let Some(path) = self.named(tl, tr, budget) {
                        return Some(path);
                    }
                }
                None
            }
            (S::Arrow(a1, a2), S::Arrow(b1, b2)) => self
                .named(b1, a1, budget)
                .or_else(|| self.named(a2, b2, budget)),
            (S::Forall(_, tl), S::Forall(_, tr)) | (S::Exists(_, tl), S::Exists(_, tr)) => {
                // Open both binders with the same fresh variable.
                self.fresh_var += 1;
                let z = NamedType::Var(self.fresh_var);
                let tl = tl.substitute_var(0, &z);
                let tr = tr.substitute_var(0, &z);
                self.named(&tl, &tr, budget)
            }
            (a, b) => Some(vec![format!(
                "structural mismatch: {} against {}",
                a.head_name(),
                b.head_name()
            )]),
        }
    }
}

fn join(labels: &[crate::syntax::Label]) -> String {
    labels
        .iter()
        .map(|l| l.as_str().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Bounded refuter for structural subtyping: explores the declarative rules
/// bottom-up, applying substitutions eagerly when unfolding, with at most
/// `depth` nested unfolds. `variance` orients the query.
/// Deepens iteratively so the reported violation is the one at the smallest
/// refuting depth; the same path is therefore found for every larger budget.
pub fn bounded_structural_refute(
    sig: &Signature,
    left: &NamedType,
    right: &NamedType,
    variance: Variance,
    depth: u32,
) -> Refutation {
    let (l, r) = match variance {
        Variance::Plus => (left, right),
        Variance::Minus => (right, left),
    };
    let mut search = StructuralSearch {
        sig,
        cleared: HashMap::new(),
        fresh_var: 0,
    };
    for d in 0..=depth {
        search.fresh_var = 0;
        if let Some(path) = search.named(l, r, d) {
            return Refutation::Violation(path);
        }
    }
    Refutation::NoCounterexampleWithin(depth)
}

// ---------------------------------------------------------------------------
// Parametric refuter (postponed substitutions on stacks)
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Hash)]
struct ParametricGoal {
    left: NamedType,
    left_stack: SubstStack,
    right: NamedType,
    right_stack: SubstStack,
}

struct ParametricSearch<'a> {
    sig: &'a Signature,
    cleared: HashMap<ParametricGoal, u32>,
    fresh_var: u32,
}

impl ParametricSearch<'_> {
    fn named(
        &mut self,
        left: &NamedType,
        pi_l: &SubstStack,
        right: &NamedType,
        pi_r: &SubstStack,
        budget: u32,
    ) -> Option<Vec<String>> {
        match (left, right) {
            (NamedType::Var(x), NamedType::Var(y)) => {
                if x == y {
                    None
                } else {
                    Some(vec!["distinct variables".into()])
                }
            }
            (NamedType::Var(_), _) | (_, NamedType::Var(_)) => {
                Some(vec!["variable against non-variable".into()])
            }
            (NamedType::Param(a), NamedType::Param(b)) => {
                // Pop the most recent substitutions and finally apply them.
                let (theta, rest_l) = pi_l.pop().expect("parameter with empty stack");
                let (phi, rest_r) = pi_r.pop().expect("parameter with empty stack");
                let l = theta.get(*a).clone();
                let r = phi.get(*b).clone();
                self.named(&l, &rest_l, &r, &rest_r, budget)
            }
            (NamedType::Param(_), _) => {
                Some(vec!["parameter against non-parameter".into()])
            }
            (_, NamedType::Param(_)) => {
                Some(vec!["non-parameter against parameter".into()])
            }
            (NamedType::Inst(t, theta), NamedType::Inst(u, phi)) => {
                if budget == 0 {
                    return None;
                }
                let goal = ParametricGoal {
                    left: left.clone(),
                    left_stack: pi_l.clone(),
                    right: right.clone(),
                    right_stack: pi_r.clone(),
                };
                if let Some(&b) = self.cleared.get(&goal) {
                    if budget <= b {
                        return None;
                    }
                }
                // Push the substitutions instead of applying them.
                let stack_l = pi_l.push(theta.clone());
                let stack_r = pi_r.push(phi.clone());
                let body_l = self.sig.def(*t).body.clone();
                let body_r = self.sig.def(*u).body.clone();
                let result = self
                    .structural(&body_l, &stack_l, &body_r, &stack_r, budget - 1)
                    .map(|mut path| {
                        path.insert(
                            0,
                            format!(
                                "instantiate {} <= {}",
                                self.sig.def(*t).name,
                                self.sig.def(*u).name
                            ),
                        );
                        path
                    });
                if result.is_none() {
                    let entry = self.cleared.entry(goal).or_insert(0);
                    *entry = (*entry).max(budget);
                }
                result
            }
        }
    }

    fn structural(
        &mut self,
        left: &StructuralType,
        pi_l: &SubstStack,
        right: &StructuralType,
        pi_r: &SubstStack,
        budget: u32,
    ) -> Option<Vec<String>> {
        use StructuralType as S;
        match (left, right) {
            (S::Product(a1, a2), S::Product(b1, b2)) => self
                .named(a1, pi_l, b1, pi_r, budget)
                .or_else(|| self.named(a2, pi_l, b2, pi_r, budget)),
            (S::Unit, S::Unit) => None,
            (S::Variant(fl), S::Variant(fr)) => {
                let (ll, lr) = (S::labels(fl), S::labels(fr));
                if !label_subset(&ll, &lr, Variance::Plus) {
                    return Some(vec![format!(
                        "variant labels {{{}}} are not a subset of {{{}}}",
                        join(&ll),
                        join(&lr)
                    )]);
                }
                for (l, tl) in fl {
                    let tr = fr.iter().find(|(k, _)| k == l).map(|(_, t)| t)?;
                    if let Some(path) = self.named(tl, pi_l, tr, pi_r, budget) {
                        return Some(path);
                    }
                }
                None
            }
            (S::Record(fl), S::Record(fr)) => {
                let (ll, lr) = (S::labels(fl), S::labels(fr));
                if !label_subset(&lr, &ll, Variance::Plus) {
                    return Some(vec![format!(
                        "record labels {{{}}} are not a superset of {{{}}}",
                        join(&ll),
                        join(&lr)
                    )]);
                }
                for (l, tr) in fr {
                    let tl = fl.iter().find(|(k, _)| k == l).map(|(_, t)| t)?;
                    if let Some(path) = self.named(tl, pi_l, tr, pi_r, budget) {
                        return Some(path);
                    }
                }
                None
            }
            (S::Arrow(a1, a2), S::Arrow(b1, b2)) => self
                .named(b1, pi_r, a1, pi_l, budget)
                .or_else(|| self.named(a2, pi_l, b2, pi_r, budget)),
            (S::Forall(_, tl), S::Forall(_, tr)) | (S::Exists(_, tl), S::Exists(_, tr)) => {
                self.fresh_var += 1;
                let z = NamedType::Var(self.fresh_var);
                let tl = tl.substitute_var(0, &z);
                let tr = tr.substitute_var(0, &z);
                self.named(&tl, pi_l, &tr, pi_r, budget)
            }
            (a, b) => Some(vec![format!(
                "structural mismatch: {} against {}",
                a.head_name(),
                b.head_name()
            )]),
        }
    }
}

/// Bounded refuter for the declarative parametric-subtyping system with
/// explicit substitution stacks: instantiations push, parameter pairs pop.
/// Free parameters of `left`/`right` must be bound by their stacks.
pub fn bounded_parametric_refute(
    sig: &Signature,
    left: &NamedType,
    left_stack: &SubstStack,
    right: &NamedType,
    right_stack: &SubstStack,
    variance: Variance,
    depth: u32,
) -> Refutation {
    let (l, sl, r, sr) = match variance {
        Variance::Plus => (left, left_stack, right, right_stack),
        Variance::Minus => (right, right_stack, left, left_stack),
    };
    let mut search = ParametricSearch {
        sig,
        cleared: HashMap::new(),
        fresh_var: 0,
    };
    for d in 0..=depth {
        search.fresh_var = 0;
        if let Some(path) = search.named(l, sl, r, sr, d) {
            return Refutation::Violation(path);
        }
    }
    Refutation::NoCounterexampleWithin(depth)
}

// ---------------------------------------------------------------------------
// Exact monomorphic decider
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("signature is not monomorphic: `{0}`")]
    NotMonomorphic(String),
}

/// Decides structural subtyping `t ≤ u` exactly on monomorphic signatures
/// (every constructor nullary, no quantifiers) by assume-and-verify search:
/// a goal already on the assumption stack closes coinductively.
pub fn mono_decide(sig: &Signature, t: ConId, u: ConId) -> Result<bool, OracleError> {
    for (_, def) in sig.iter() {
        let poly = !def.params.is_empty()
            || matches!(
                def.body,
                StructuralType::Forall(..) | StructuralType::Exists(..)
            );
        if poly {
            return Err(OracleError::NotMonomorphic(def.name.clone()));
        }
    }
    let mut search = MonoSearch {
        sig,
        assumptions: Vec::new(),
        refuted: std::collections::HashSet::new(),
    };
    Ok(search.pair(t, u))
}

struct MonoSearch<'a> {
    sig: &'a Signature,
    assumptions: Vec<(ConId, ConId)>,
    /// Failures are absolute (a finite violation path does not depend on
    /// the assumption stack), so they can be cached.
    refuted: std::collections::HashSet<(ConId, ConId)>,
}

impl MonoSearch<'_> {
    fn pair(&mut self, t: ConId, u: ConId) -> bool {
        if self.refuted.contains(&(t, u)) {
            return false;
        }
        if self.assumptions.contains(&(t, u)) {
            return true;
        }
        self.assumptions.push((t, u));
        let body_t = self.sig.def(t).body.clone();
        let body_u = self.sig.def(u).body.clone();
        let ok = self.structural(&body_t, &body_u);
        self.assumptions.pop();
        if !ok {
            self.refuted.insert((t, u));
        }
        ok
    }

    fn named(&mut self, l: &NamedType, r: &NamedType) -> bool {
        match (l, r) {
            (NamedType::Inst(t, _), NamedType::Inst(u, _)) => self.pair(*t, *u),
            _ => unreachable!("monomorphic bodies contain only nullary instantiations"),
        }
    }

    fn structural(&mut self, l: &StructuralType, r: &StructuralType) -> bool {
        use StructuralType as S;
        match (l, r) {
            (S::Product(a1, a2), S::Product(b1, b2)) => {
                self.named(a1, b1) && self.named(a2, b2)
            }
            (S::Unit, S::Unit) => true,
            (S::Variant(fl), S::Variant(fr)) => {
                label_subset(&S::labels(fl), &S::labels(fr), Variance::Plus)
                    && fl.iter().all(|(lbl, tl)| {
                        fr.iter()
                            .find(|(k, _)| k == lbl)
                            .is_some_and(|(_, tr)| self.named(tl, tr))
                    })
            }
            (S::Record(fl), S::Record(fr)) => {
                label_subset(&S::labels(fr), &S::labels(fl), Variance::Plus)
                    && fr.iter().all(|(lbl, tr)| {
                        fl.iter()
                            .find(|(k, _)| k == lbl)
                            .is_some_and(|(_, tl)| self.named(tl, tr))
                    })
            }
            (S::Arrow(a1, a2), S::Arrow(b1, b2)) => {
                self.named(b1, a1) && self.named(a2, b2)
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::parser::parse_signature;
    use crate::syntax::Subst;

    fn load(text: &str) -> Signature {
        elaborate(&parse_signature(text).unwrap()).unwrap().signature
    }

    fn con(sig: &Signature, name: &str) -> NamedType {
        NamedType::nullary(sig.lookup(name).unwrap())
    }

    const NAT_EVEN_ODD: &str =
        "type nat = +{z: 1, s: nat}
type even = +{z: 1, s: odd}
type odd = +{s: even}";
    const SNAT: &str =
        "type one = 1
type nat = +{z: one, s: nat}
type snat[k] = +{z: k, s: snat[k]}";

    #[test]
    fn structural_refuter_finds_nat_even_violation_at_depth_two() {
        let sig = load(NAT_EVEN_ODD);
        let nat = con(&sig, "nat");
        let even = con(&sig, "even");
        // Depth 1 is not enough to see the failing label set.
        assert_eq!(
            bounded_structural_refute(&sig, &nat, &even, Variance::Plus, 1),
            Refutation::NoCounterexampleWithin(1)
        );
        match bounded_structural_refute(&sig, &nat, &even, Variance::Plus, 2) {
            Refutation::Violation(path) => {
                assert_eq!(path.len(), 3, "{path:?}");
                assert!(path[2].contains("not a subset"), "{path:?}");
            }
            other => panic!("expected a violation, got {other:?}"),
        }
        // Minus flips the orientation: even <=- nat is nat <= even.
        assert!(
            bounded_structural_refute(&sig, &even, &nat, Variance::Minus, 2).is_violation()
        );
    }

    #[test]
    fn structural_refuter_accepts_nat_below_snat_one() {
        let sig = load(SNAT);
        let nat = con(&sig, "nat");
        let snat_one = NamedType::Inst(
            sig.lookup("snat").unwrap(),
            Subst(vec![con(&sig, "one")]),
        );
        assert_eq!(
            bounded_structural_refute(&sig, &nat, &snat_one, Variance::Plus, 20),
            Refutation::NoCounterexampleWithin(20)
        );
    }

    #[test]
    fn structural_refuter_is_reflexive() {
        let sig = load(NAT_EVEN_ODD);
        for name in ["nat", "even", "odd"] {
            let t = con(&sig, name);
            assert_eq!(
                bounded_structural_refute(&sig, &t, &t, Variance::Plus, 8),
                Refutation::NoCounterexampleWithin(8)
            );
        }
    }

    #[test]
    fn parametric_refuter_restores_the_snat_violation() {
        let sig = load(SNAT);
        let nat = con(&sig, "nat");
        let snat_one = NamedType::Inst(
            sig.lookup("snat").unwrap(),
            Subst(vec![con(&sig, "one")]),
        );
        let empty = SubstStack::empty();
        match bounded_parametric_refute(&sig, &nat, &empty, &snat_one, &empty, Variance::Plus, 3)
        {
            Refutation::Violation(path) => {
                assert!(
                    path.last().unwrap().contains("parameter"),
                    "expected a parameter no-rule case, got {path:?}"
                );
            }
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn parametric_refuter_accepts_e0_below_d0() {
        let sig = load(
            "type one = 1
             type e0 = +{L: e[end], end$: one}
             type e[k] = +{L: e[r[k]], R: k}
             type end = +{end$: one}
             type r[k] = +{R: k}
             type d0 = +{L: d[d0], end$: one}
             type d[k'] = +{L: d[d[k']], R: k'}",
        );
        let empty = SubstStack::empty();
        let e0 = con(&sig, "e0");
        let d0 = con(&sig, "d0");
        assert_eq!(
            bounded_parametric_refute(&sig, &e0, &empty, &d0, &empty, Variance::Plus, 6),
            Refutation::NoCounterexampleWithin(6)
        );
    }

    #[test]
    fn parametric_refuter_pops_stacks_at_parameters() {
        // <a @ [one] <= b @ [one]> pops to one <= one.
        let sig = load("type one = 1");
        let one = con(&sig, "one");
        let stack = SubstStack::empty().push(Subst(vec![one]));
        for k in [0, 1, 5] {
            assert_eq!(
                bounded_parametric_refute(
                    &sig,
                    &NamedType::Param(0),
                    &stack,
                    &NamedType::Param(0),
                    &stack,
                    Variance::Plus,
                    k
                ),
                Refutation::NoCounterexampleWithin(k)
            );
        }
    }

    #[test]
    fn mono_decide_matches_the_even_odd_walkthrough() {
        let sig = load(NAT_EVEN_ODD);
        let id = |n: &str| sig.lookup(n).unwrap();
        assert_eq!(mono_decide(&sig, id("even"), id("nat")), Ok(true));
        assert_eq!(mono_decide(&sig, id("odd"), id("nat")), Ok(true));
        assert_eq!(mono_decide(&sig, id("nat"), id("even")), Ok(false));
        assert_eq!(mono_decide(&sig, id("nat"), id("odd")), Ok(false));
        for (t, _) in sig.iter() {
            assert_eq!(mono_decide(&sig, t, t), Ok(true));
        }
    }

    #[test]
    fn mono_decide_rejects_polymorphic_signatures() {
        let sig = load("type list[a] = +{nil: 1, cons: a * list[a]}");
        let list = sig.lookup("list").unwrap();
        assert_eq!(
            mono_decide(&sig, list, list),
            Err(OracleError::NotMonomorphic("list".into()))
        );
        let sig = load("type t = forall x. x -> x");
        let t = sig.lookup("t").unwrap();
        assert!(mono_decide(&sig, t, t).is_err());
    }

    #[test]
    fn refuters_handle_quantifiers() {
        let sig = load("type t = forall x. x -> x
type u = exists x. x -> x");
        let t = con(&sig, "t");
        let u = con(&sig, "u");
        assert_eq!(
            bounded_structural_refute(&sig, &t, &t, Variance::Plus, 6),
            Refutation::NoCounterexampleWithin(6)
        );
        // forall against exists is a structural mismatch.
        assert!(bounded_structural_refute(&sig, &t, &u, Variance::Plus, 6).is_violation());
        let empty = SubstStack::empty();
        assert_eq!(
            bounded_parametric_refute(&sig, &t, &empty, &t, &empty, Variance::Plus, 6),
            Refutation::NoCounterexampleWithin(6)
        );
    }
}
