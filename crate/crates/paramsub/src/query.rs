//! Phase 2: backward proof construction over the saturated database.
//!
//! A query `⟨τ ≤ σ⟩ξ` on closed named types either assembles a finite
//! derivation from the most general parametric rules (recursing on the
//! substitutions' strict subterms, one subquery per atom), or reports a
//! refutation: the pair's forward trace, classified as a parametricity
//! violation or a genuine structural violation by its terminal rule.

use thiserror::Error;

use crate::pretty;
use crate::saturate::{BottomInfo, FactDatabase, PairKey, Rule, SaturateError, StepRule};
use crate::syntax::{Atom, NamedType, Signature, Variance};

/// A finite derivation tree: one node per parametric rule application, with
/// one child per atom of the rule.
#[derive(Debug, Clone)]
pub enum Derivation {
    Compose {
        key: PairKey,
        left: NamedType,
        right: NamedType,
        children: Vec<(Atom, Derivation)>,
    },
    Var(u32),
}

/// Why a query failed.
#[derive(Debug, Clone)]
pub enum Reason {
    /// The refuting trace ends in a parameter or variable rule: the pair
    /// violates parametricity, though it may still hold structurally.
    ParametricityViolation { info: BottomInfo, depth: u32 },
    /// The refuting trace ends in a mismatch or width rule: replaying it
    /// eagerly yields a concrete structural violation at `depth` unfolds.
    StructuralViolation { info: BottomInfo, depth: u32 },
    /// The query's sides cannot be compared at all (for example a variable
    /// against an instantiation).
    ShapeMismatch { detail: String },
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Yes(Derivation),
    No(Reason),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Yes(_))
    }
}

#[derive(Debug, Clone, Error)]
pub enum QueryError {
    #[error("query contains a free parameter")]
    OpenTypeInQuery,
    #[error(transparent)]
    Saturate(#[from] SaturateError),
}

/// Decides `⟨left ≤ right⟩variance`, lazily demanding saturation of every
/// pair reachable from the two heads.
pub fn check(
    db: &mut FactDatabase,
    left: &NamedType,
    right: &NamedType,
    variance: Variance,
) -> Result<Verdict, QueryError> {
    match (left, right) {
        (NamedType::Var(x), NamedType::Var(y)) if x == y => Ok(Verdict::Yes(Derivation::Var(*x))),
        (NamedType::Var(_), _) | (_, NamedType::Var(_)) => Ok(Verdict::No(Reason::ShapeMismatch {
            detail: "a type variable is a subtype of only itself".to_string(),
        })),
        (NamedType::Param(_), _) | (_, NamedType::Param(_)) => Err(QueryError::OpenTypeInQuery),
        (NamedType::Inst(t, theta), NamedType::Inst(u, phi)) => {
            let key = PairKey::new(*t, *u, variance);
            db.saturate([key])?;
            match db.rule_of(key)? {
                Rule::Invalid(info) => {
                    let depth = info.depth;
                    let reason = if info.rule.is_parametricity() {
                        Reason::ParametricityViolation { info: *info, depth }
                    } else {
                        Reason::StructuralViolation { info: *info, depth }
                    };
                    Ok(Verdict::No(reason))
                }
                Rule::Valid(atoms) => {
                    let mut children = Vec::new();
                    for atom in atoms {
                        let sub_left = theta.get(atom.left);
                        let sub_right = phi.get(atom.right);
                        match check(db, sub_left, sub_right, atom.variance)? {
                            Verdict::Yes(derivation) => children.push((atom, derivation)),
                            Verdict::No(reason) => {
                                // The failing subquery sits one composed
                                // rule away: its witness depth grows by the
                                // atom's recorded depth.
                                let atom_depth = db
                                    .entry(key)
                                    .and_then(|e| e.atoms().get(&atom).copied())
                                    .unwrap_or(1);
                                return Ok(Verdict::No(add_depth(reason, atom_depth)));
                            }
                        }
                    }
                    Ok(Verdict::Yes(Derivation::Compose {
                        key,
                        left: left.clone(),
                        right: right.clone(),
                        children,
                    }))
                }
            }
        }
    }
}

fn add_depth(reason: Reason, extra: u32) -> Reason {
    match reason {
        Reason::ParametricityViolation { info, depth } => Reason::ParametricityViolation {
            info,
            depth: depth + extra,
        },
        Reason::StructuralViolation { info, depth } => Reason::StructuralViolation {
            info,
            depth: depth + extra,
        },
        shape @ Reason::ShapeMismatch { .. } => shape,
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Renders the parametric rule a derivation node appeals to, e.g.
/// `e[k] <= d[k'] if k <= k'`.
pub fn rule_line(sig: &Signature, key: PairKey, atoms: &[Atom]) -> String {
    let (lp, rp) = pretty::pair_param_names(sig, key.left, key.right);
    let lhs = pretty::con_with_params(&sig.def(key.left).name, &lp);
    let rhs = pretty::con_with_params(&sig.def(key.right).name, &rp);
    let (lhs, rhs) = match key.variance {
        Variance::Plus => (lhs, rhs),
        Variance::Minus => (rhs, lhs),
    };
    if atoms.is_empty() {
        format!("{lhs} <= {rhs}")
    } else {
        let premises: Vec<String> = atoms.iter().map(|a| pretty::atom(a, &lp, &rp)).collect();
        format!("{lhs} <= {rhs} if {}", premises.join(", "))
    }
}

fn render_derivation(sig: &Signature, d: &Derivation, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match d {
        Derivation::Var(_) => {
            out.push_str(&pad);
            out.push_str("x <= x\n");
        }
        Derivation::Compose {
            key,
            left,
            right,
            children,
        } => {
            let atoms: Vec<Atom> = children.iter().map(|(a, _)| *a).collect();
            let (l, r) = match key.variance {
                Variance::Plus => (left, right),
                Variance::Minus => (right, left),
            };
            out.push_str(&format!(
                "{pad}{} <= {}   by {}\n",
                pretty::named(sig, l),
                pretty::named(sig, r),
                rule_line(sig, *key, &atoms),
            ));
            for (_, child) in children {
                render_derivation(sig, child, indent + 1, out);
            }
        }
    }
}

fn render_trace(sig: &Signature, info: &BottomInfo, out: &mut String) {
    for step in &info.trace.steps {
        let rule = match &step.rule {
            StepRule::Init => "unfold".to_string(),
            StepRule::Decomposed(r) => format!("decompose {r}"),
            StepRule::Composed { inner, atom } => {
                let (lp, rp) = pretty::pair_param_names(sig, inner.left, inner.right);
                format!(
                    "compose {} with {}",
                    inner.render(sig),
                    pretty::atom(atom, &lp, &rp)
                )
            }
        };
        out.push_str(&format!(
            "  {} : {}   [{}]\n",
            step.pair.render(sig),
            step.judgment.render(sig, step.pair),
            rule
        ));
    }
    out.push_str(&format!("  fails by {}\n", info.trace.terminal));
}

/// Renders a verdict: a proof tree naming the parametric rule used at each
/// node, or the forward trace replayed step by step.
pub fn explain(sig: &Signature, verdict: &Verdict) -> String {
    let mut out = String::new();
    match verdict {
        Verdict::Yes(derivation) => {
            out.push_str("Yes\n");
            render_derivation(sig, derivation, 1, &mut out);
        }
        Verdict::No(Reason::ShapeMismatch { detail }) => {
            out.push_str(&format!("No (shape mismatch: {detail})\n"));
        }
        Verdict::No(Reason::ParametricityViolation { info, .. }) => {
            out.push_str("No (parametricity violation)\n");
            render_trace(sig, info, &mut out);
        }
        Verdict::No(Reason::StructuralViolation { info, .. }) => {
            out.push_str("No (structural violation)\n");
            render_trace(sig, info, &mut out);
        }
    }
    out
}

fn derivation_json(sig: &Signature, d: &Derivation) -> serde_json::Value {
    match d {
        Derivation::Var(_) => serde_json::json!({ "var": "x" }),
        Derivation::Compose {
            key,
            left,
            right,
            children,
        } => serde_json::json!({
            "pair": key.render(sig),
            "left": pretty::named(sig, left),
            "right": pretty::named(sig, right),
            "children": children
                .iter()
                .map(|(atom, child)| serde_json::json!({
                    "atom": atom,
                    "derivation": derivation_json(sig, child),
                }))
                .collect::<Vec<_>>(),
        }),
    }
}

/// The `--json` shape documented in docs/json.md.
pub fn verdict_json(sig: &Signature, verdict: &Verdict) -> serde_json::Value {
    match verdict {
        Verdict::Yes(derivation) => serde_json::json!({
            "verdict": "yes",
            "derivation": derivation_json(sig, derivation),
        }),
        Verdict::No(reason) => {
            let (kind, trace) = match reason {
                Reason::ShapeMismatch { detail } => {
                    ("shape-mismatch", serde_json::json!(detail))
                }
                Reason::ParametricityViolation { info, .. } => (
                    "parametricity-violation",
                    serde_json::json!(format!("{}", info.rule)),
                ),
                Reason::StructuralViolation { info, .. } => (
                    "structural-violation",
                    serde_json::json!(format!("{}", info.rule)),
                ),
            };
            serde_json::json!({
                "verdict": "no",
                "reason_kind": kind,
                "trace": trace,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborate::elaborate;
    use crate::oracle::{bounded_structural_refute, Refutation};
    use crate::parser::parse_signature;
    use crate::syntax::Subst;

    fn load(text: &str) -> crate::syntax::Signature {
        elaborate(&parse_signature(text).unwrap()).unwrap().signature
    }

    fn con(sig: &crate::syntax::Signature, name: &str) -> NamedType {
        NamedType::nullary(sig.lookup(name).unwrap())
    }

    fn app(sig: &crate::syntax::Signature, name: &str, args: Vec<NamedType>) -> NamedType {
        NamedType::Inst(sig.lookup(name).unwrap(), Subst(args))
    }

    const CFL: &str = "type one = 1\n\
        type e0 = +{L: e[end], end$: one}\n\
        type e[k] = +{L: e[r[k]], R: k}\n\
        type end = +{end$: one}\n\
        type r[k] = +{R: k}\n\
        type d0 = +{L: d[d0], end$: one}\n\
        type d[k'] = +{L: d[d[k']], R: k'}";

    #[test]
    fn nested_cfl_query_builds_three_compose_nodes() {
        let sig = load(CFL);
        let mut db = FactDatabase::new(&sig);
        let left = app(&sig, "e", vec![app(&sig, "e", vec![con(&sig, "e0")])]);
        let right = app(&sig, "d", vec![app(&sig, "d", vec![con(&sig, "d0")])]);
        let verdict = check(&mut db, &left, &right, Variance::Plus).unwrap();
        match &verdict {
            Verdict::Yes(d) => {
                let mut depth = 0;
                let mut node = d;
                loop {
                    match node {
                        Derivation::Compose { children, .. } => {
                            depth += 1;
                            match children.as_slice() {
                                [] => break,
                                [(_, child)] => node = child,
                                more => panic!("expected at most one premise, got {}", more.len()),
                            }
                        }
                        Derivation::Var(_) => panic!("unexpected variable leaf"),
                    }
                }
                assert_eq!(depth, 3);
            }
            other => panic!("expected yes, got {other:?}"),
        }
        let text = explain(&sig, &verdict);
        assert!(text.contains("e[e[e0]] <= d[d[d0]]"), "{text}");
        assert!(text.contains("e0 <= d0"), "{text}");
        assert!(text.contains("if k <= k'"), "{text}");
    }

    #[test]
    fn nat_even_fails_structurally_through_nat_odd() {
        let sig = load("type nat = +{z: 1, s: nat}\ntype even = +{z: 1, s: odd}\ntype odd = +{s: even}");
        let mut db = FactDatabase::new(&sig);
        let verdict = check(
            &mut db,
            &con(&sig, "nat"),
            &con(&sig, "even"),
            Variance::Plus,
        )
        .unwrap();
        let (info, depth) = match &verdict {
            Verdict::No(Reason::StructuralViolation { info, depth }) => (info, *depth),
            other => panic!("expected a structural violation, got {other:?}"),
        };
        assert_eq!(info.rule, crate::syntax::BottomRule::VariantWidth);
        // The trace passes through the (nat, odd) pair.
        let nat_odd = PairKey::by_name(&sig, "nat", "odd", Variance::Plus).unwrap();
        assert!(info.trace.steps.iter().any(|s| s.pair == nat_odd));
        // Replaying eagerly exhibits a concrete violation at the trace's
        // depth.
        assert_eq!(depth, 2);
        assert!(bounded_structural_refute(
            &sig,
            &con(&sig, "nat"),
            &con(&sig, "even"),
            Variance::Plus,
            depth
        )
        .is_violation());
    }

    #[test]
    fn nat_snat_one_is_rejected_for_parametricity_only() {
        let sig = load("type one = 1\ntype nat = +{z: one, s: nat}\ntype snat[k] = +{z: k, s: snat[k]}");
        let mut db = FactDatabase::new(&sig);
        let snat_one = app(&sig, "snat", vec![con(&sig, "one")]);
        let verdict = check(&mut db, &con(&sig, "nat"), &snat_one, Variance::Plus).unwrap();
        assert!(matches!(
            verdict,
            Verdict::No(Reason::ParametricityViolation { .. })
        ));
        // ...even though the subtyping holds structurally.
        assert_eq!(
            bounded_structural_refute(&sig, &con(&sig, "nat"), &snat_one, Variance::Plus, 20),
            Refutation::NoCounterexampleWithin(20)
        );
    }

    #[test]
    fn lists_of_nonempty_lists_of_even() {
        let sig = load(
            "type nat = +{z: 1, s: nat}\ntype even = +{z: 1, s: odd}\ntype odd = +{s: even}\n\
             type list[a] = +{nil: 1, cons: a * list[a]}\n\
             type nelist[a] = +{cons: a * list[a]}",
        );
        let mut db = FactDatabase::new(&sig);
        let left = app(
            &sig,
            "list",
            vec![app(&sig, "nelist", vec![con(&sig, "even")])],
        );
        let right = app(
            &sig,
            "list",
            vec![app(&sig, "list", vec![con(&sig, "nat")])],
        );
        let verdict = check(&mut db, &left, &right, Variance::Plus).unwrap();
        assert!(verdict.holds());
        // Every compose node carries one child per atom of its rule.
        fn well_formed(db: &FactDatabase, d: &Derivation) {
            if let Derivation::Compose { key, children, .. } = d {
                match db.rule_of(*key).unwrap() {
                    Rule::Valid(atoms) => assert_eq!(atoms.len(), children.len()),
                    Rule::Invalid(_) => panic!("yes-derivation through a refuted pair"),
                }
                for (_, child) in children {
                    well_formed(db, child);
                }
            }
        }
        if let Verdict::Yes(d) = &verdict {
            well_formed(&db, d);
        }
    }

    #[test]
    fn variable_queries() {
        let sig = load("type t = 1");
        let mut db = FactDatabase::new(&sig);
        let x = NamedType::Var(0);
        let verdict = check(&mut db, &x, &x, Variance::Plus).unwrap();
        match &verdict {
            Verdict::Yes(Derivation::Var(_)) => {}
            other => panic!("expected a variable leaf, got {other:?}"),
        }
        assert!(explain(&sig, &verdict).contains("x <= x"));

        let t = con(&sig, "t");
        let verdict = check(&mut db, &t, &x, Variance::Plus).unwrap();
        assert!(matches!(
            verdict,
            Verdict::No(Reason::ShapeMismatch { .. })
        ));
        assert!(matches!(
            check(&mut db, &NamedType::Var(0), &NamedType::Var(1), Variance::Plus).unwrap(),
            Verdict::No(Reason::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn open_queries_are_errors() {
        let sig = load("type t = 1");
        let mut db = FactDatabase::new(&sig);
        assert!(matches!(
            check(
                &mut db,
                &NamedType::Param(0),
                &con(&sig, "t"),
                Variance::Plus
            ),
            Err(QueryError::OpenTypeInQuery)
        ));
    }

    #[test]
    fn explain_renders_the_d0_e0_trace() {
        let sig = load(CFL);
        let mut db = FactDatabase::new(&sig);
        let verdict = check(&mut db, &con(&sig, "d0"), &con(&sig, "e0"), Variance::Plus).unwrap();
        match &verdict {
            Verdict::No(Reason::StructuralViolation { info, .. }) => {
                assert_eq!(info.rule, crate::syntax::BottomRule::VariantWidth);
            }
            other => panic!("expected a structural violation, got {other:?}"),
        }
        let text = explain(&sig, &verdict);
        assert!(text.starts_with("No (structural violation)"), "{text}");
        assert!(text.contains("fails by variant-width"), "{text}");

        // The verdict JSON carries the classification.
        let json = verdict_json(&sig, &verdict);
        assert_eq!(json["verdict"], "no");
        assert_eq!(json["reason_kind"], "structural-violation");
    }

    #[test]
    fn reflexive_queries_hold() {
        let sig = load(CFL);
        let mut db = FactDatabase::new(&sig);
        for name in ["one", "e0", "end", "d0"] {
            let t = con(&sig, name);
            assert!(check(&mut db, &t, &t, Variance::Plus).unwrap().holds());
        }
    }
}
