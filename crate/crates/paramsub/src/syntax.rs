//! Core data model: normal-form types, signatures, variances, and constraints.
//!
//! Normal form keeps a strict alternation between *named* types (constructor
//! instantiations, parameters, quantified variables) and *structural* types
//! (products, variants, records, arrows, quantifiers, unit), with structural
//! types appearing only as the top level of definition bodies. Everything in
//! this module is immutable after construction and safe to share across
//! threads.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

/// Index of a defined type constructor within a [`Signature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConId(pub u32);

/// An interned field/alternative label.
///
/// Labels compare and hash by their text, so label sets can live in sorted
/// vectors with deterministic iteration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(s: impl AsRef<str>) -> Self {
        Label(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Orientation of a subtyping judgment: `Plus` for left ≤ right, `Minus` for
/// the reverse. Function-type left arguments flip variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Variance {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Variance {
    pub fn negate(self) -> Variance {
        match self {
            Variance::Plus => Variance::Minus,
            Variance::Minus => Variance::Plus,
        }
    }
}

impl fmt::Display for Variance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variance::Plus => f.write_str("+"),
            Variance::Minus => f.write_str("-"),
        }
    }
}

/// `L ⊆ξ K`: plain inclusion under `Plus`, reverse inclusion under `Minus`.
///
/// Both label sets must be sorted (as they are inside [`StructuralType`]).
pub fn label_subset(left: &[Label], right: &[Label], variance: Variance) -> bool {
    let (sub, sup) = match variance {
        Variance::Plus => (left, right),
        Variance::Minus => (right, left),
    };
    // Sorted-merge subset test.
    let mut it = sup.iter();
    'outer: for l in sub {
        for k in it.by_ref() {
            match k.cmp(l) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Equal => continue 'outer,
                std::cmp::Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

/// A positional substitution: the i-th entry instantiates the i-th declared
/// parameter of the constructor being applied. Ranges are named types only,
/// so instantiating a structural type again yields a structural type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subst(pub Vec<NamedType>);

impl Subst {
    pub fn empty() -> Self {
        Subst(Vec::new())
    }

    pub fn get(&self, param: u32) -> &NamedType {
        &self.0[param as usize]
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// The identity substitution `[α₀, …, αₙ₋₁]` on `n` parameters.
    pub fn identity(arity: usize) -> Self {
        Subst((0..arity as u32).map(NamedType::Param).collect())
    }
}

/// A named type: the only forms allowed as immediate subformulas of
/// structural types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NamedType {
    /// Constructor instantiation `t[θ]`.
    Inst(ConId, Subst),
    /// Reference to the enclosing definition's parameter, by position.
    Param(u32),
    /// Quantified variable, as a binder-depth index. In normal form a
    /// definition body has at most one binder, so 0 is the only index that
    /// survives elaboration; this makes α-equivalence plain equality.
    Var(u32),
}

impl NamedType {
    pub fn nullary(con: ConId) -> Self {
        NamedType::Inst(con, Subst::empty())
    }

    /// Applies `subst` to the parameters of this type. Variables are left
    /// alone; substitution ranges never contain binders, so capture is
    /// impossible.
    pub fn apply(&self, subst: &Subst) -> NamedType {
        match self {
            NamedType::Inst(con, inner) => NamedType::Inst(
                *con,
                Subst(inner.0.iter().map(|t| t.apply(subst)).collect()),
            ),
            NamedType::Param(i) => subst.get(*i).clone(),
            NamedType::Var(v) => NamedType::Var(*v),
        }
    }

    /// Replaces occurrences of `Var(var)` by `replacement`.
    pub fn substitute_var(&self, var: u32, replacement: &NamedType) -> NamedType {
        match self {
            NamedType::Inst(con, subst) => NamedType::Inst(
                *con,
                Subst(
                    subst
                        .0
                        .iter()
                        .map(|t| t.substitute_var(var, replacement))
                        .collect(),
                ),
            ),
            NamedType::Param(i) => NamedType::Param(*i),
            NamedType::Var(v) if *v == var => replacement.clone(),
            NamedType::Var(v) => NamedType::Var(*v),
        }
    }

    /// True when the type mentions no parameters and no variables.
    pub fn is_closed(&self) -> bool {
        match self {
            NamedType::Inst(_, subst) => subst.0.iter().all(NamedType::is_closed),
            NamedType::Param(_) => false,
            NamedType::Var(_) => false,
        }
    }
}

/// A structural type in normal form: every immediate subformula is named.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StructuralType {
    Product(NamedType, NamedType),
    Unit,
    /// Variant record `⊕{ℓ: τℓ}`; fields sorted by label, duplicate-free.
    Variant(Vec<(Label, NamedType)>),
    /// `∃x.τ`; the string is a display hint for the binder.
    Exists(String, NamedType),
    Arrow(NamedType, NamedType),
    /// Record `&{ℓ: τℓ}`; fields sorted by label, duplicate-free.
    Record(Vec<(Label, NamedType)>),
    /// `∀x.τ`; the string is a display hint for the binder.
    Forall(String, NamedType),
}

impl StructuralType {
    /// Sorts fields by label; the caller must have rejected duplicates.
    pub fn variant(mut fields: Vec<(Label, NamedType)>) -> Self {
        fields.sort_by(|a, b| a.0.cmp(&b.0));
        StructuralType::Variant(fields)
    }

    pub fn record(mut fields: Vec<(Label, NamedType)>) -> Self {
        fields.sort_by(|a, b| a.0.cmp(&b.0));
        StructuralType::Record(fields)
    }

    pub fn labels(fields: &[(Label, NamedType)]) -> Vec<Label> {
        fields.iter().map(|(l, _)| l.clone()).collect()
    }

    /// Instantiates parameters; the result is again structural.
    pub fn apply(&self, subst: &Subst) -> StructuralType {
        let app = |t: &NamedType| t.apply(subst);
        match self {
            StructuralType::Product(a, b) => StructuralType::Product(app(a), app(b)),
            StructuralType::Unit => StructuralType::Unit,
            StructuralType::Variant(fs) => {
                StructuralType::Variant(fs.iter().map(|(l, t)| (l.clone(), app(t))).collect())
            }
            StructuralType::Exists(x, t) => StructuralType::Exists(x.clone(), app(t)),
            StructuralType::Arrow(a, b) => StructuralType::Arrow(app(a), app(b)),
            StructuralType::Record(fs) => {
                StructuralType::Record(fs.iter().map(|(l, t)| (l.clone(), app(t))).collect())
            }
            StructuralType::Forall(x, t) => StructuralType::Forall(x.clone(), app(t)),
        }
    }

    /// Name of the top-level structural constructor, for mismatch reporting.
    pub fn head_name(&self) -> &'static str {
        match self {
            StructuralType::Product(..) => "*",
            StructuralType::Unit => "1",
            StructuralType::Variant(..) => "+{}",
            StructuralType::Exists(..) => "exists",
            StructuralType::Arrow(..) => "->",
            StructuralType::Record(..) => "&{}",
            StructuralType::Forall(..) => "forall",
        }
    }
}

/// Whether a definition was written by the user or minted during elaboration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    User,
    Internal,
}

/// One definition `t[ᾱ] ≜ A` of a normalized signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    /// Declared parameter names, in declaration order. Positions, not names,
    /// are the identity used everywhere else.
    pub params: Vec<String>,
    pub body: StructuralType,
    pub origin: Origin,
}

impl Definition {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// The finite set Σ of normalized definitions, exactly one per constructor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    defs: Vec<Definition>,
    by_name: HashMap<String, ConId>,
}

impl Signature {
    pub fn new() -> Self {
        Signature::default()
    }

    /// Adds a definition, returning its id. Panics on duplicate names; the
    /// parser and elaborator reject those with proper diagnostics first.
    pub fn push(&mut self, def: Definition) -> ConId {
        assert!(
            !self.by_name.contains_key(&def.name),
            "duplicate definition of {}",
            def.name
        );
        let id = ConId(self.defs.len() as u32);
        self.by_name.insert(def.name.clone(), id);
        self.defs.push(def);
        id
    }

    pub fn def(&self, id: ConId) -> &Definition {
        &self.defs[id.0 as usize]
    }

    /// Patches a body in place; user definitions are registered before
    /// their (mutually recursive) bodies are translated.
    pub(crate) fn set_body(&mut self, id: ConId, body: StructuralType) {
        self.defs[id.0 as usize].body = body;
    }

    pub fn lookup(&self, name: &str) -> Option<ConId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConId, &Definition)> {
        self.defs
            .iter()
            .enumerate()
            .map(|(i, d)| (ConId(i as u32), d))
    }

    pub fn user_constructors(&self) -> impl Iterator<Item = ConId> + '_ {
        self.iter()
            .filter(|(_, d)| d.origin == Origin::User)
            .map(|(id, _)| id)
    }

    pub fn internal_count(&self) -> usize {
        self.defs
            .iter()
            .filter(|d| d.origin == Origin::Internal)
            .count()
    }

    /// Number of distinct subformulas of `body`, without unfolding
    /// definitions: the body itself plus all named types nested in it. This
    /// feeds the saturation termination bound.
    pub fn subformula_count(&self, body: &StructuralType) -> usize {
        let mut seen: HashSet<&NamedType> = HashSet::new();
        fn walk<'a>(t: &'a NamedType, seen: &mut HashSet<&'a NamedType>) {
            if seen.insert(t) {
                if let NamedType::Inst(_, subst) = t {
                    for range in &subst.0 {
                        walk(range, seen);
                    }
                }
            }
        }
        for t in body_children(body) {
            walk(t, &mut seen);
        }
        1 + seen.len()
    }
}

/// The immediate named subformulas of a structural type.
pub fn body_children(body: &StructuralType) -> Vec<&NamedType> {
    match body {
        StructuralType::Product(a, b) | StructuralType::Arrow(a, b) => vec![a, b],
        StructuralType::Unit => vec![],
        StructuralType::Variant(fs) | StructuralType::Record(fs) => {
            fs.iter().map(|(_, t)| t).collect()
        }
        StructuralType::Exists(_, t) | StructuralType::Forall(_, t) => vec![t],
    }
}

/// A single parameter-to-parameter constraint `⟨αᵢ ≤ζ βⱼ⟩` in a pair's most
/// general rule. Indices are positions into the pair's declared parameter
/// lists, so α-renaming a signature cannot change a database.
///
/// The `Ord` instance (variance first, covariant atoms before contravariant
/// ones) fixes the display and serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct Atom {
    pub variance: Variance,
    pub left: u32,
    pub right: u32,
}

impl Atom {
    pub fn new(left: u32, variance: Variance, right: u32) -> Self {
        Atom {
            variance,
            left,
            right,
        }
    }
}

/// The rule name that produced ⊥ in a refutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BottomRule {
    /// Distinct top-level structural constructors.
    Mismatch,
    /// Variant label sets fail the subset side condition.
    VariantWidth,
    /// Record label sets fail the subset side condition.
    RecordWidth,
    /// Left side is a parameter, right side is not.
    ParamLeft,
    /// Right side is a parameter, left side is not.
    ParamRight,
    /// Left side is a variable, right side is something else.
    VarLeft,
    /// Right side is a variable, left side is something else.
    VarRight,
}

impl BottomRule {
    /// Parametricity violations versus genuine structural violations; the
    /// compose links in a trace inherit the classification of its terminal.
    pub fn is_parametricity(self) -> bool {
        matches!(
            self,
            BottomRule::ParamLeft
                | BottomRule::ParamRight
                | BottomRule::VarLeft
                | BottomRule::VarRight
        )
    }
}

impl fmt::Display for BottomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BottomRule::Mismatch => "mismatch",
            BottomRule::VariantWidth => "variant-width",
            BottomRule::RecordWidth => "record-width",
            BottomRule::ParamLeft => "param-left",
            BottomRule::ParamRight => "param-right",
            BottomRule::VarLeft => "var-left",
            BottomRule::VarRight => "var-right",
        };
        f.write_str(s)
    }
}

/// Normal-form constraints: ⊥ with an explanation, or a duplicate-free atom
/// set (⊤ is the empty set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintSet<T> {
    Bottom(T),
    Atoms(std::collections::BTreeSet<Atom>),
}

impl<T> ConstraintSet<T> {
    pub fn top() -> Self {
        ConstraintSet::Atoms(Default::default())
    }

    /// Inserts an atom, reporting whether anything changed. Bottom absorbs;
    /// duplicates are kept out, so permutations of the same atom multiset
    /// build equal sets.
    pub fn add_atom(&mut self, atom: Atom) -> bool {
        match self {
            ConstraintSet::Bottom(_) => false,
            ConstraintSet::Atoms(set) => set.insert(atom),
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, ConstraintSet::Bottom(_))
    }
}

/// A stack of postponed substitutions, used only by the declarative
/// parametric-subtyping oracle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SubstStack(pub Vec<Subst>);

impl SubstStack {
    pub fn empty() -> Self {
        SubstStack(Vec::new())
    }

    pub fn push(&self, subst: Subst) -> SubstStack {
        let mut next = self.clone();
        next.0.push(subst);
        next
    }

    /// Splits into the most recently pushed substitution and the rest.
    pub fn pop(&self) -> Option<(&Subst, SubstStack)> {
        let (last, rest) = self.0.split_last()?;
        Some((last, SubstStack(rest.to_vec())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lbl(s: &str) -> Label {
        Label::new(s)
    }

    #[test]
    fn negate_swaps_and_is_involutive() {
        assert_eq!(Variance::Plus.negate(), Variance::Minus);
        assert_eq!(Variance::Minus.negate(), Variance::Plus);
        assert_eq!(Variance::Plus.negate().negate(), Variance::Plus);
        assert_eq!(Variance::Minus.negate().negate(), Variance::Minus);
    }

    #[test]
    fn label_subset_by_variance() {
        let s = vec![lbl("s")];
        let zs = vec![lbl("s"), lbl("z")];
        // {s} ⊆+ {z,s} holds, the reverse query does not.
        assert!(label_subset(&s, &zs, Variance::Plus));
        assert!(!label_subset(&zs, &s, Variance::Plus));
        // Reflexivity at Minus.
        assert!(label_subset(&zs, &zs, Variance::Minus));
        // Minus reverses the inclusion.
        assert!(label_subset(&zs, &s, Variance::Minus));
        assert!(!label_subset(&s, &zs, Variance::Minus));
    }

    #[test]
    fn add_atom_inserts_dedups_and_bottom_absorbs() {
        let a = Atom::new(0, Variance::Plus, 0);

        let mut c: ConstraintSet<&str> = ConstraintSet::top();
        assert!(c.add_atom(a));
        match &c {
            ConstraintSet::Atoms(set) => assert_eq!(set.len(), 1),
            _ => panic!("expected atoms"),
        }

        // "no entries are repeated"
        assert!(!c.add_atom(a));
        match &c {
            ConstraintSet::Atoms(set) => assert_eq!(set.len(), 1),
            _ => panic!("expected atoms"),
        }

        // any conjunction with ⊥ is ⊥ alone
        let mut b: ConstraintSet<&str> = ConstraintSet::Bottom("reason");
        assert!(!b.add_atom(a));
        assert_eq!(b, ConstraintSet::Bottom("reason"));
    }

    #[test]
    fn substitution_of_structural_stays_structural() {
        // t[a] with body a * a, instantiated with a closed named type.
        let body = StructuralType::Product(NamedType::Param(0), NamedType::Param(0));
        let one = NamedType::nullary(ConId(7));
        let inst = body.apply(&Subst(vec![one.clone()]));
        assert_eq!(inst, StructuralType::Product(one.clone(), one));
    }

    #[test]
    fn subformula_count_dedups_shared_subterms() {
        // +{a: t[u, u], b: u} has subformulas: the body, t[u,u], and u.
        let mut sig = Signature::new();
        let u = sig.push(Definition {
            name: "u".into(),
            params: vec![],
            body: StructuralType::Unit,
            origin: Origin::User,
        });
        let uref = NamedType::nullary(u);
        let t_inst = NamedType::Inst(ConId(9), Subst(vec![uref.clone(), uref.clone()]));
        let body = StructuralType::variant(vec![
            (Label::new("a"), t_inst),
            (Label::new("b"), uref),
        ]);
        assert_eq!(sig.subformula_count(&body), 3);
    }

    #[test]
    fn atom_order_lists_covariant_first() {
        let contra = Atom::new(0, Variance::Minus, 0);
        let co = Atom::new(1, Variance::Plus, 1);
        assert!(co < contra);
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_atom() -> impl Strategy<Value = Atom> {
        (0u32..4, prop::bool::ANY, 0u32..4).prop_map(|(l, pos, r)| {
            Atom::new(l, if pos { Variance::Plus } else { Variance::Minus }, r)
        })
    }

    proptest! {
        /// Any permutation of the same atom multiset yields equal sets.
        #[test]
        fn add_atom_order_insensitive(mut atoms in prop::collection::vec(arb_atom(), 0..12)) {
            let mut forward: ConstraintSet<()> = ConstraintSet::top();
            for a in &atoms {
                forward.add_atom(*a);
            }
            atoms.reverse();
            let mut backward: ConstraintSet<()> = ConstraintSet::top();
            for a in &atoms {
                backward.add_atom(*a);
            }
            prop_assert_eq!(forward, backward);
        }
    }
}
