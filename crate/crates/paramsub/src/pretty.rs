//! Human-readable rendering of types, signatures, and rules.

use std::fmt;

use crate::syntax::{NamedType, Signature, StructuralType, Variance};

/// Renders a named type against its signature, e.g. `e[r[k]]`.
pub fn named(sig: &Signature, t: &NamedType) -> String {
    named_in(sig, t, &[], "x")
}

/// Like [`named`], but resolving parameter indices against `params` and
/// naming the judgment's opened variable `var_name`.
pub fn named_in(sig: &Signature, t: &NamedType, params: &[String], var_name: &str) -> String {
    match t {
        NamedType::Inst(con, subst) => {
            let def = sig.def(*con);
            if subst.0.is_empty() {
                def.name.clone()
            } else {
                let args: Vec<String> = subst
                    .0
                    .iter()
                    .map(|r| named_in(sig, r, params, var_name))
                    .collect();
                format!("{}[{}]", def.name, args.join(", "))
            }
        }
        NamedType::Param(i) => params
            .get(*i as usize)
            .cloned()
            .unwrap_or_else(|| format!("#{i}")),
        NamedType::Var(_) => var_name.to_string(),
    }
}

/// Renders a structural type against its signature.
pub fn structural(sig: &Signature, t: &StructuralType, params: &[String]) -> String {
    let nm = |t: &NamedType| named_in(sig, t, params, "x");
    match t {
        StructuralType::Product(a, b) => format!("{} * {}", nm(a), nm(b)),
        StructuralType::Unit => "1".to_string(),
        StructuralType::Variant(fs) => format!("+{{{}}}", fields(sig, fs, params)),
        StructuralType::Exists(x, t) => {
            format!("exists {x}. {}", named_in(sig, t, params, x))
        }
        StructuralType::Arrow(a, b) => format!("{} -> {}", nm(a), nm(b)),
        StructuralType::Record(fs) => format!("&{{{}}}", fields(sig, fs, params)),
        StructuralType::Forall(x, t) => {
            format!("forall {x}. {}", named_in(sig, t, params, x))
        }
    }
}

fn fields(
    sig: &Signature,
    fs: &[(crate::syntax::Label, NamedType)],
    params: &[String],
) -> String {
    fs.iter()
        .map(|(l, t)| format!("{l}: {}", named_in(sig, t, params, "x")))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders one definition as `type t[a, b] = body`.
pub fn definition(sig: &Signature, id: crate::syntax::ConId) -> String {
    let def = sig.def(id);
    let params = if def.params.is_empty() {
        String::new()
    } else {
        format!("[{}]", def.params.join(", "))
    };
    format!(
        "type {}{} = {}",
        def.name,
        params,
        structural(sig, &def.body, &def.params)
    )
}

/// Renders a whole normalized signature, one definition per line.
pub fn signature(sig: &Signature) -> String {
    let mut out = String::new();
    for (id, _) in sig.iter() {
        out.push_str(&definition(sig, id));
        out.push('\n');
    }
    out
}

/// Picks display names for the two sides of a constructor pair: the left
/// side's declared names, and the right side's names primed until they are
/// distinct from the left's.
pub fn pair_param_names(sig: &Signature, left: crate::syntax::ConId, right: crate::syntax::ConId) -> (Vec<String>, Vec<String>) {
    let lparams = sig.def(left).params.clone();
    let mut rparams = Vec::new();
    for p in &sig.def(right).params {
        let mut name = p.clone();
        while lparams.contains(&name) || rparams.contains(&name) {
            name.push('\'');
        }
        rparams.push(name);
    }
    (lparams, rparams)
}

/// Renders one atom as an oriented premise, e.g. `k <= k'` or `b' <= b`.
pub fn atom(atom: &crate::syntax::Atom, lparams: &[String], rparams: &[String]) -> String {
    let l = &lparams[atom.left as usize];
    let r = &rparams[atom.right as usize];
    match atom.variance {
        Variance::Plus => format!("{l} <= {r}"),
        Variance::Minus => format!("{r} <= {l}"),
    }
}

/// Writes `name[a, b]` (or bare `name` for nullary constructors).
pub fn con_with_params(name: &str, params: &[String]) -> String {
    if params.is_empty() {
        name.to_string()
    } else {
        format!("{name}[{}]", params.join(", "))
    }
}

/// A small helper for displaying things whose rendering needs a signature.
pub struct WithSig<'a, T>(pub &'a Signature, pub T);

impl fmt::Display for WithSig<'_, &NamedType> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&named(self.0, self.1))
    }
}
