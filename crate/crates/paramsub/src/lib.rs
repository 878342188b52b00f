//! Decision procedure for parametric subtyping of recursively defined,
//! possibly non-regular polymorphic type constructors.
//!
//! The pipeline: parse a `.poly` signature ([`parser`]), elaborate it to the
//! named/structural normal form ([`elaborate`]), saturate a database of
//! most-general parametric subtyping rules per constructor pair
//! ([`saturate`]), and answer subtyping queries with derivations or
//! refutation traces ([`query`]). The [`oracle`] module holds independent
//! bounded reference semantics used for testing, and [`bpa`] encodes guarded
//! process equations into signatures as a stress-test generator.

pub mod bpa;
pub mod elaborate;
pub mod oracle;
pub mod parser;
pub mod pretty;
pub mod query;
pub mod saturate;
pub mod syntax;

pub use elaborate::{elaborate, validate, ElabError, Elaboration};

/// The shipped corpus, embedded so unit tests can reach it without paths.
#[cfg(test)]
pub(crate) mod corpus_for_tests {
    pub const ALL: &[(&str, &str)] = &[
        ("nat.poly", include_str!("../../../corpus/nat.poly")),
        ("cfl.poly", include_str!("../../../corpus/cfl.poly")),
        ("stack.poly", include_str!("../../../corpus/stack.poly")),
        ("snat.poly", include_str!("../../../corpus/snat.poly")),
        ("lists.poly", include_str!("../../../corpus/lists.poly")),
        ("trees.poly", include_str!("../../../corpus/trees.poly")),
        ("stree.poly", include_str!("../../../corpus/stree.poly")),
        ("treefn.poly", include_str!("../../../corpus/treefn.poly")),
        ("rstack.poly", include_str!("../../../corpus/rstack.poly")),
        ("alist.poly", include_str!("../../../corpus/alist.poly")),
    ];
}
pub use parser::{parse_query, parse_signature, ParseError, SurfaceSignature};
pub use query::{check, Derivation, Reason, Verdict};
pub use saturate::{FactDatabase, PairKey, Rule, WorklistOrder};
pub use syntax::{
    Atom, BottomRule, ConId, ConstraintSet, Definition, Label, NamedType, Signature,
    StructuralType, Subst, SubstStack, Variance,
};
