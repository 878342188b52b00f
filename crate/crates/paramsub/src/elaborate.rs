//! Elaboration from surface definitions to the named/structural normal form.
//!
//! Abbreviations are expanded away first (they must be nonrecursive). Each
//! remaining definition body is then normalized: structural subterms sitting
//! in named positions are replaced by references to freshly minted internal
//! definitions, whose parameters are exactly the free parameters of the
//! subterm in first-occurrence order. Quantifiers temporarily turn their
//! bound variable into a fresh parameter so that minted definitions can
//! capture it; the variable is substituted back afterwards. Before minting,
//! an existing internal definition with the same body (up to parameter
//! renaming) is reused.

use std::collections::HashMap;

use thiserror::Error;

use crate::parser::{DefKind, SurfaceDef, SurfaceSignature, SurfaceType};
use crate::syntax::{
    body_children, ConId, Definition, Label, NamedType, Origin, Signature, StructuralType, Subst,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ElabError {
    #[error("recursive abbreviation: {}", cycle.join(" -> "))]
    RecursiveAbbreviation { cycle: Vec<String> },
    #[error("definition of `{name}` is not contractive: the body must start with a structural type constructor")]
    NonContractiveDefinition { name: String },
    #[error("query type is not closed")]
    OpenQueryType,
}

// ---------------------------------------------------------------------------
// Abbreviation expansion
// ---------------------------------------------------------------------------

/// Shifts free de Bruijn variables of `t` by `by`, treating indices below
/// `cutoff` as bound.
fn shift(t: &SurfaceType, by: u32, cutoff: u32) -> SurfaceType {
    match t {
        SurfaceType::Con(name, args) => SurfaceType::Con(
            name.clone(),
            args.iter().map(|a| shift(a, by, cutoff)).collect(),
        ),
        SurfaceType::Param(i) => SurfaceType::Param(*i),
        SurfaceType::Var(v) => {
            if *v >= cutoff {
                SurfaceType::Var(v + by)
            } else {
                SurfaceType::Var(*v)
            }
        }
        SurfaceType::Product(a, b) => SurfaceType::Product(
            Box::new(shift(a, by, cutoff)),
            Box::new(shift(b, by, cutoff)),
        ),
        SurfaceType::Unit => SurfaceType::Unit,
        SurfaceType::Variant(fs) => SurfaceType::Variant(
            fs.iter()
                .map(|(l, t)| (l.clone(), shift(t, by, cutoff)))
                .collect(),
        ),
        SurfaceType::Record(fs) => SurfaceType::Record(
            fs.iter()
                .map(|(l, t)| (l.clone(), shift(t, by, cutoff)))
                .collect(),
        ),
        SurfaceType::Arrow(a, b) => SurfaceType::Arrow(
            Box::new(shift(a, by, cutoff)),
            Box::new(shift(b, by, cutoff)),
        ),
        SurfaceType::Forall(x, b) => {
            SurfaceType::Forall(x.clone(), Box::new(shift(b, by, cutoff + 1)))
        }
        SurfaceType::Exists(x, b) => {
            SurfaceType::Exists(x.clone(), Box::new(shift(b, by, cutoff + 1)))
        }
    }
}

/// Replaces `Param(i)` by `args[i]`, lifting argument variables across the
/// binders they are substituted under.
fn subst_params(t: &SurfaceType, args: &[SurfaceType], depth: u32) -> SurfaceType {
    match t {
        SurfaceType::Con(name, inner) => SurfaceType::Con(
            name.clone(),
            inner.iter().map(|a| subst_params(a, args, depth)).collect(),
        ),
        SurfaceType::Param(i) => shift(&args[*i as usize], depth, 0),
        SurfaceType::Var(v) => SurfaceType::Var(*v),
        SurfaceType::Product(a, b) => SurfaceType::Product(
            Box::new(subst_params(a, args, depth)),
            Box::new(subst_params(b, args, depth)),
        ),
        SurfaceType::Unit => SurfaceType::Unit,
        SurfaceType::Variant(fs) => SurfaceType::Variant(
            fs.iter()
                .map(|(l, t)| (l.clone(), subst_params(t, args, depth)))
                .collect(),
        ),
        SurfaceType::Record(fs) => SurfaceType::Record(
            fs.iter()
                .map(|(l, t)| (l.clone(), subst_params(t, args, depth)))
                .collect(),
        ),
        SurfaceType::Arrow(a, b) => SurfaceType::Arrow(
            Box::new(subst_params(a, args, depth)),
            Box::new(subst_params(b, args, depth)),
        ),
        SurfaceType::Forall(x, b) => {
            SurfaceType::Forall(x.clone(), Box::new(subst_params(b, args, depth + 1)))
        }
        SurfaceType::Exists(x, b) => {
            SurfaceType::Exists(x.clone(), Box::new(subst_params(b, args, depth + 1)))
        }
    }
}

/// Inlines references to the (already fully expanded) abbreviations.
fn expand_in(t: &SurfaceType, abbrevs: &HashMap<String, SurfaceDef>) -> SurfaceType {
    match t {
        SurfaceType::Con(name, args) => {
            let args: Vec<SurfaceType> = args.iter().map(|a| expand_in(a, abbrevs)).collect();
            match abbrevs.get(name) {
                Some(def) => subst_params(&def.body, &args, 0),
                None => SurfaceType::Con(name.clone(), args),
            }
        }
        SurfaceType::Param(i) => SurfaceType::Param(*i),
        SurfaceType::Var(v) => SurfaceType::Var(*v),
        SurfaceType::Product(a, b) => SurfaceType::Product(
            Box::new(expand_in(a, abbrevs)),
            Box::new(expand_in(b, abbrevs)),
        ),
        SurfaceType::Unit => SurfaceType::Unit,
        SurfaceType::Variant(fs) => SurfaceType::Variant(
            fs.iter()
                .map(|(l, t)| (l.clone(), expand_in(t, abbrevs)))
                .collect(),
        ),
        SurfaceType::Record(fs) => SurfaceType::Record(
            fs.iter()
                .map(|(l, t)| (l.clone(), expand_in(t, abbrevs)))
                .collect(),
        ),
        SurfaceType::Arrow(a, b) => SurfaceType::Arrow(
            Box::new(expand_in(a, abbrevs)),
            Box::new(expand_in(b, abbrevs)),
        ),
        SurfaceType::Forall(x, b) => {
            SurfaceType::Forall(x.clone(), Box::new(expand_in(b, abbrevs)))
        }
        SurfaceType::Exists(x, b) => {
            SurfaceType::Exists(x.clone(), Box::new(expand_in(b, abbrevs)))
        }
    }
}

fn abbrev_refs(t: &SurfaceType, names: &HashMap<String, usize>, out: &mut Vec<usize>) {
    match t {
        SurfaceType::Con(name, args) => {
            if let Some(&i) = names.get(name) {
                out.push(i);
            }
            for a in args {
                abbrev_refs(a, names, out);
            }
        }
        SurfaceType::Product(a, b) | SurfaceType::Arrow(a, b) => {
            abbrev_refs(a, names, out);
            abbrev_refs(b, names, out);
        }
        SurfaceType::Variant(fs) | SurfaceType::Record(fs) => {
            for (_, t) in fs {
                abbrev_refs(t, names, out);
            }
        }
        SurfaceType::Forall(_, b) | SurfaceType::Exists(_, b) => abbrev_refs(b, names, out),
        SurfaceType::Param(_) | SurfaceType::Var(_) | SurfaceType::Unit => {}
    }
}

/// Inlines every abbreviation transitively into every use site and drops
/// the abbreviations from the signature. Fails on (mutually) recursive
/// abbreviations, reporting the cycle.
pub fn expand_abbreviations(
    sig: &SurfaceSignature,
) -> Result<(SurfaceSignature, HashMap<String, SurfaceDef>), ElabError> {
    let abbrev_defs: Vec<&SurfaceDef> = sig
        .defs
        .iter()
        .filter(|d| d.kind == DefKind::Abbrev)
        .collect();
    let index: HashMap<String, usize> = abbrev_defs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.name.clone(), i))
        .collect();

    // Cycle detection over the abbreviation dependency graph.
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unseen,
        Active,
        Done,
    }
    let mut state = vec![State::Unseen; abbrev_defs.len()];
    let mut order = Vec::new();
    fn visit(
        i: usize,
        defs: &[&SurfaceDef],
        index: &HashMap<String, usize>,
        state: &mut [State],
        order: &mut Vec<usize>,
        stack: &mut Vec<usize>,
    ) -> Result<(), ElabError> {
        match state[i] {
            State::Done => return Ok(()),
            State::Active => {
                let at = stack.iter().position(|&j| j == i).unwrap_or(0);
                let mut cycle: Vec<String> =
                    stack[at..].iter().map(|&j| defs[j].name.clone()).collect();
                cycle.push(defs[i].name.clone());
                return Err(ElabError::RecursiveAbbreviation { cycle });
            }
            State::Unseen => {}
        }
        state[i] = State::Active;
        stack.push(i);
        let mut refs = Vec::new();
        abbrev_refs(&defs[i].body, index, &mut refs);
        for j in refs {
            visit(j, defs, index, state, order, stack)?;
        }
        stack.pop();
        state[i] = State::Done;
        order.push(i);
        Ok(())
    }
    let mut stack = Vec::new();
    for i in 0..abbrev_defs.len() {
        visit(i, &abbrev_defs, &index, &mut state, &mut order, &mut stack)?;
    }

    // Expand abbreviation bodies in dependency order, then all definitions.
    let mut expanded: HashMap<String, SurfaceDef> = HashMap::new();
    for i in order {
        let def = abbrev_defs[i];
        let body = expand_in(&def.body, &expanded);
        expanded.insert(
            def.name.clone(),
            SurfaceDef {
                body,
                ..def.clone()
            },
        );
    }
    let defs = sig
        .defs
        .iter()
        .filter(|d| d.kind == DefKind::Defined)
        .map(|d| SurfaceDef {
            body: expand_in(&d.body, &expanded),
            ..d.clone()
        })
        .collect();
    Ok((SurfaceSignature { defs }, expanded))
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct NormalizeOptions {
    /// Reuse internal definitions whose bodies agree up to parameter
    /// renaming. Disabling this is only useful for testing that sharing
    /// preserves meaning.
    pub share: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { share: true }
    }
}

/// Translation context for one definition body: the real parameters, plus
/// synthetic parameters standing in for enclosing quantifier variables.
struct Ctx {
    /// Display names for every slot of the extended parameter space; real
    /// parameters first, synthetic binder slots appended past them.
    slot_names: Vec<String>,
    /// Extended indices of enclosing binders, innermost last.
    binder_slots: Vec<u32>,
}

impl Ctx {
    fn new(params: &[String]) -> Self {
        Ctx {
            slot_names: params.to_vec(),
            binder_slots: Vec::new(),
        }
    }

    fn push_binder(&mut self, hint: &str) -> u32 {
        let slot = self.slot_names.len() as u32;
        self.slot_names.push(hint.to_string());
        self.binder_slots.push(slot);
        slot
    }

    fn pop_binder(&mut self) {
        let slot = self.binder_slots.pop().expect("binder underflow");
        debug_assert_eq!(slot as usize + 1, self.slot_names.len());
        self.slot_names.pop();
    }

    /// The extended slot a free de Bruijn index refers to.
    fn slot_of_var(&self, index: u32) -> u32 {
        let i = self.binder_slots.len() - 1 - index as usize;
        self.binder_slots[i]
    }
}

/// The outcome of elaboration: a normalized signature plus the state needed
/// to elaborate further (query) types against it.
pub struct Elaboration {
    pub signature: Signature,
    abbrevs: HashMap<String, SurfaceDef>,
    share: HashMap<StructuralType, ConId>,
    fresh: u32,
    options: NormalizeOptions,
}

impl Elaboration {
    /// Elaborates a type written against the user signature into a closed
    /// named type, possibly minting internal definitions for structural
    /// subterms. Used for queries.
    pub fn query_type(&mut self, t: &SurfaceType) -> Result<NamedType, ElabError> {
        let expanded = expand_in(t, &self.abbrevs);
        let mut ctx = Ctx::new(&[]);
        let named = self.dagger(&expanded, &mut ctx)?;
        if !named.is_closed() {
            return Err(ElabError::OpenQueryType);
        }
        Ok(named)
    }

    fn con_id(&self, name: &str) -> ConId {
        self.signature
            .lookup(name)
            .expect("resolution guarantees constructors exist")
    }

    /// `(A)*`: translate a structural body, keeping its top-level
    /// constructor and normalizing every immediate subformula to a named
    /// type.
    fn star(&mut self, t: &SurfaceType, ctx: &mut Ctx) -> Result<StructuralType, ElabError> {
        Ok(match t {
            SurfaceType::Product(a, b) => {
                StructuralType::Product(self.dagger(a, ctx)?, self.dagger(b, ctx)?)
            }
            SurfaceType::Unit => StructuralType::Unit,
            SurfaceType::Variant(fields) => {
                let fields = fields
                    .iter()
                    .map(|(l, t)| Ok((Label::new(l), self.dagger(t, ctx)?)))
                    .collect::<Result<Vec<_>, ElabError>>()?;
                StructuralType::variant(fields)
            }
            SurfaceType::Record(fields) => {
                let fields = fields
                    .iter()
                    .map(|(l, t)| Ok((Label::new(l), self.dagger(t, ctx)?)))
                    .collect::<Result<Vec<_>, ElabError>>()?;
                StructuralType::record(fields)
            }
            SurfaceType::Arrow(a, b) => {
                StructuralType::Arrow(self.dagger(a, ctx)?, self.dagger(b, ctx)?)
            }
            SurfaceType::Forall(x, body) => {
                let slot = ctx.push_binder(x);
                let named = self.dagger(body, ctx);
                ctx.pop_binder();
                // The bound variable acted as a fresh parameter during the
                // translation; substitute it back now.
                let named = named?.substitute_param_with_var(slot);
                StructuralType::Forall(x.clone(), named)
            }
            SurfaceType::Exists(x, body) => {
                let slot = ctx.push_binder(x);
                let named = self.dagger(body, ctx);
                ctx.pop_binder();
                let named = named?.substitute_param_with_var(slot);
                StructuralType::Exists(x.clone(), named)
            }
            SurfaceType::Con(..) | SurfaceType::Param(_) | SurfaceType::Var(_) => {
                unreachable!("star is only applied to structural types")
            }
        })
    }

    /// `(A)†`: translate an arbitrary subterm to a named type, minting an
    /// internal definition when the subterm is structural.
    fn dagger(&mut self, t: &SurfaceType, ctx: &mut Ctx) -> Result<NamedType, ElabError> {
        match t {
            SurfaceType::Con(name, args) => {
                let id = self.con_id(name);
                let ranges = args
                    .iter()
                    .map(|a| self.dagger(a, ctx))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(NamedType::Inst(id, Subst(ranges)))
            }
            SurfaceType::Param(i) => Ok(NamedType::Param(*i)),
            SurfaceType::Var(k) => Ok(NamedType::Param(ctx.slot_of_var(*k))),
            structural => {
                // Free parameters of the subterm, in first-occurrence order;
                // enclosing binder variables count via their synthetic slot.
                let mut free: Vec<u32> = Vec::new();
                collect_free_slots(structural, ctx, 0, &mut free);
                let local: HashMap<u32, u32> = free
                    .iter()
                    .enumerate()
                    .map(|(pos, &slot)| (slot, pos as u32))
                    .collect();
                let localized = relocalize(structural, ctx, 0, &local);
                let param_names: Vec<String> = {
                    let mut names = Vec::new();
                    for &slot in &free {
                        let mut name = ctx.slot_names[slot as usize].clone();
                        while names.contains(&name) {
                            name.push('\'');
                        }
                        names.push(name);
                    }
                    names
                };
                let mut inner = Ctx::new(&param_names);
                let body = self.star(&localized, &mut inner)?;
                let id = self.intern_internal(body, param_names);
                let subst = Subst(free.into_iter().map(NamedType::Param).collect());
                Ok(NamedType::Inst(id, subst))
            }
        }
    }

    /// Reuses an internal definition with the same body if one exists,
    /// otherwise mints `%g<n>`.
    fn intern_internal(&mut self, body: StructuralType, params: Vec<String>) -> ConId {
        if self.options.share {
            if let Some(&id) = self.share.get(&body) {
                return id;
            }
        }
        let name = format!("%g{}", self.fresh);
        self.fresh += 1;
        let id = self.signature.push(Definition {
            name,
            params,
            body: body.clone(),
            origin: Origin::Internal,
        });
        if self.options.share {
            self.share.insert(body, id);
        }
        id
    }
}

impl NamedType {
    /// Replaces `Param(slot)` by `Var(0)`: the re-substitution step of the
    /// quantifier translation.
    fn substitute_param_with_var(&self, slot: u32) -> NamedType {
        match self {
            NamedType::Inst(con, subst) => NamedType::Inst(
                *con,
                Subst(
                    subst
                        .0
                        .iter()
                        .map(|t| t.substitute_param_with_var(slot))
                        .collect(),
                ),
            ),
            NamedType::Param(i) if *i == slot => NamedType::Var(0),
            NamedType::Param(i) => NamedType::Param(*i),
            NamedType::Var(v) => NamedType::Var(*v),
        }
    }
}

/// Records the extended slots referenced by `t`, in first-occurrence order.
/// `depth` counts binders crossed inside the subterm itself.
fn collect_free_slots(t: &SurfaceType, ctx: &Ctx, depth: u32, out: &mut Vec<u32>) {
    let mut push = |slot: u32| {
        if !out.contains(&slot) {
            out.push(slot);
        }
    };
    match t {
        SurfaceType::Con(_, args) => {
            for a in args {
                collect_free_slots(a, ctx, depth, out);
            }
        }
        SurfaceType::Param(i) => push(*i),
        SurfaceType::Var(k) => {
            if *k >= depth {
                push(ctx.slot_of_var(*k - depth));
            }
        }
        SurfaceType::Product(a, b) | SurfaceType::Arrow(a, b) => {
            collect_free_slots(a, ctx, depth, out);
            collect_free_slots(b, ctx, depth, out);
        }
        SurfaceType::Unit => {}
        SurfaceType::Variant(fs) | SurfaceType::Record(fs) => {
            for (_, t) in fs {
                collect_free_slots(t, ctx, depth, out);
            }
        }
        SurfaceType::Forall(_, b) | SurfaceType::Exists(_, b) => {
            collect_free_slots(b, ctx, depth + 1, out);
        }
    }
}

/// Rewrites a subterm into the minted definition's own parameter space:
/// enclosing parameters and binder variables become local parameters.
fn relocalize(t: &SurfaceType, ctx: &Ctx, depth: u32, local: &HashMap<u32, u32>) -> SurfaceType {
    match t {
        SurfaceType::Con(name, args) => SurfaceType::Con(
            name.clone(),
            args.iter()
                .map(|a| relocalize(a, ctx, depth, local))
                .collect(),
        ),
        SurfaceType::Param(i) => SurfaceType::Param(local[i]),
        SurfaceType::Var(k) => {
            if *k >= depth {
                SurfaceType::Param(local[&ctx.slot_of_var(*k - depth)])
            } else {
                SurfaceType::Var(*k)
            }
        }
        SurfaceType::Product(a, b) => SurfaceType::Product(
            Box::new(relocalize(a, ctx, depth, local)),
            Box::new(relocalize(b, ctx, depth, local)),
        ),
        SurfaceType::Unit => SurfaceType::Unit,
        SurfaceType::Variant(fs) => SurfaceType::Variant(
            fs.iter()
                .map(|(l, t)| (l.clone(), relocalize(t, ctx, depth, local)))
                .collect(),
        ),
        SurfaceType::Record(fs) => SurfaceType::Record(
            fs.iter()
                .map(|(l, t)| (l.clone(), relocalize(t, ctx, depth, local)))
                .collect(),
        ),
        SurfaceType::Arrow(a, b) => SurfaceType::Arrow(
            Box::new(relocalize(a, ctx, depth, local)),
            Box::new(relocalize(b, ctx, depth, local)),
        ),
        SurfaceType::Forall(x, b) => {
            SurfaceType::Forall(x.clone(), Box::new(relocalize(b, ctx, depth + 1, local)))
        }
        SurfaceType::Exists(x, b) => {
            SurfaceType::Exists(x.clone(), Box::new(relocalize(b, ctx, depth + 1, local)))
        }
    }
}

/// Expands abbreviations, normalizes every definition, and validates the
/// result.
pub fn elaborate(sig: &SurfaceSignature) -> Result<Elaboration, ElabError> {
    elaborate_with(sig, NormalizeOptions::default())
}

pub fn elaborate_with(
    sig: &SurfaceSignature,
    options: NormalizeOptions,
) -> Result<Elaboration, ElabError> {
    let (expanded, abbrevs) = expand_abbreviations(sig)?;

    // Assign ids to user definitions first so mutually recursive bodies can
    // reference each other; bodies are patched in below.
    let mut signature = Signature::new();
    for def in &expanded.defs {
        if !matches!(
            def.body,
            SurfaceType::Product(..)
                | SurfaceType::Unit
                | SurfaceType::Variant(_)
                | SurfaceType::Record(_)
                | SurfaceType::Arrow(..)
                | SurfaceType::Forall(..)
                | SurfaceType::Exists(..)
        ) {
            return Err(ElabError::NonContractiveDefinition {
                name: def.name.clone(),
            });
        }
        signature.push(Definition {
            name: def.name.clone(),
            params: def.params.clone(),
            body: StructuralType::Unit,
            origin: Origin::User,
        });
    }

    let mut elab = Elaboration {
        signature,
        abbrevs,
        share: HashMap::new(),
        fresh: 0,
        options,
    };
    for (i, def) in expanded.defs.iter().enumerate() {
        let mut ctx = Ctx::new(&def.params);
        let body = elab.star(&def.body, &mut ctx)?;
        elab.signature.set_body(ConId(i as u32), body);
    }
    debug_assert!(validate(&elab.signature).is_empty());
    Ok(elab)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks the well-formedness invariants of a normalized signature and
/// returns one diagnostic per violation.
pub fn validate(sig: &Signature) -> Vec<String> {
    let mut diags = Vec::new();
    for (id, def) in sig.iter() {
        let arity = def.arity() as u32;
        let under_binder = matches!(
            def.body,
            StructuralType::Forall(..) | StructuralType::Exists(..)
        );
        for child in body_children(&def.body) {
            validate_named(sig, &def.name, child, arity, under_binder, &mut diags);
        }
        if let StructuralType::Variant(fs) | StructuralType::Record(fs) = &def.body {
            let mut labels = StructuralType::labels(fs);
            let sorted = labels.windows(2).all(|w| w[0] < w[1]);
            if !sorted {
                labels.dedup();
                diags.push(format!(
                    "{}: field labels must be sorted and duplicate-free",
                    def.name
                ));
            }
        }
        let _ = id;
    }
    diags
}

fn validate_named(
    sig: &Signature,
    owner: &str,
    t: &NamedType,
    arity: u32,
    under_binder: bool,
    diags: &mut Vec<String>,
) {
    match t {
        NamedType::Inst(con, subst) => {
            if (con.0 as usize) >= sig.len() {
                diags.push(format!("{owner}: reference to unknown constructor"));
                return;
            }
            let target = sig.def(*con);
            if subst.arity() != target.arity() {
                diags.push(format!(
                    "{owner}: `{}` expects {} argument(s), found {}",
                    target.name,
                    target.arity(),
                    subst.arity()
                ));
            }
            for range in &subst.0 {
                validate_named(sig, owner, range, arity, under_binder, diags);
            }
        }
        NamedType::Param(i) => {
            if *i >= arity {
                diags.push(format!("{owner}: parameter index {i} out of range"));
            }
        }
        NamedType::Var(v) => {
            if !under_binder || *v != 0 {
                diags.push(format!("{owner}: stray quantified variable"));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Embedding normal signatures back into surface syntax (used to test
// idempotence and by `--emit-normal` round-trips)
// ---------------------------------------------------------------------------

pub fn named_to_surface(sig: &Signature, t: &NamedType) -> SurfaceType {
    match t {
        NamedType::Inst(con, subst) => SurfaceType::Con(
            sig.def(*con).name.clone(),
            subst.0.iter().map(|r| named_to_surface(sig, r)).collect(),
        ),
        NamedType::Param(i) => SurfaceType::Param(*i),
        NamedType::Var(v) => SurfaceType::Var(*v),
    }
}

pub fn structural_to_surface(sig: &Signature, t: &StructuralType) -> SurfaceType {
    match t {
        StructuralType::Product(a, b) => SurfaceType::Product(
            Box::new(named_to_surface(sig, a)),
            Box::new(named_to_surface(sig, b)),
        ),
        StructuralType::Unit => SurfaceType::Unit,
        StructuralType::Variant(fs) => SurfaceType::Variant(
            fs.iter()
                .map(|(l, t)| (l.as_str().to_string(), named_to_surface(sig, t)))
                .collect(),
        ),
        StructuralType::Exists(x, t) => {
            SurfaceType::Exists(x.clone(), Box::new(named_to_surface(sig, t)))
        }
        StructuralType::Arrow(a, b) => SurfaceType::Arrow(
            Box::new(named_to_surface(sig, a)),
            Box::new(named_to_surface(sig, b)),
        ),
        StructuralType::Record(fs) => SurfaceType::Record(
            fs.iter()
                .map(|(l, t)| (l.as_str().to_string(), named_to_surface(sig, t)))
                .collect(),
        ),
        StructuralType::Forall(x, t) => {
            SurfaceType::Forall(x.clone(), Box::new(named_to_surface(sig, t)))
        }
    }
}

/// Re-embeds a normalized signature as surface definitions.
pub fn signature_to_surface(sig: &Signature) -> SurfaceSignature {
    SurfaceSignature {
        defs: sig
            .iter()
            .map(|(_, def)| SurfaceDef {
                kind: DefKind::Defined,
                name: def.name.clone(),
                params: def.params.clone(),
                body: structural_to_surface(sig, &def.body),
            })
            .collect(),
    }
}
