//! Guarded BPA processes in Greibach normal form, encoded into type
//! signatures. This is the reduction used to show structural subtyping
//! undecidable; here it serves as a stress-test generator, together with a
//! bounded refuter for the simulation preorder.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// A process word: a (possibly empty) sequence of process variables.
pub type Word = Vec<usize>;

/// One guarded equation `X ≜ Σ_{ℓ∈L} ℓ·p′ℓ` with `L` nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub name: String,
    /// Distinct action labels with their continuation words.
    pub branches: Vec<(String, Word)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpaSystem {
    pub equations: Vec<Equation>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BpaError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("syntax error in equations: {0}")]
    Syntax(String),
}

impl BpaSystem {
    pub fn variable(&self, name: &str) -> Option<usize> {
        self.equations.iter().position(|e| e.name == name)
    }

    pub fn validate(&self) -> Result<(), BpaError> {
        let mut seen = std::collections::HashSet::new();
        for eq in &self.equations {
            if !seen.insert(&eq.name) {
                return Err(BpaError::InvalidSystem(format!(
                    "duplicate equation for {}",
                    eq.name
                )));
            }
            if eq.branches.is_empty() {
                return Err(BpaError::InvalidSystem(format!(
                    "{} has an empty label set",
                    eq.name
                )));
            }
            let mut labels = std::collections::HashSet::new();
            for (label, word) in &eq.branches {
                if !labels.insert(label) {
                    return Err(BpaError::InvalidSystem(format!(
                        "{} has duplicate label {label}",
                        eq.name
                    )));
                }
                for &v in word {
                    if v >= self.equations.len() {
                        return Err(BpaError::InvalidSystem(format!(
                            "{} references an undefined variable",
                            eq.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The single transition rule on Greibach-normal-form words:
    /// `X·q →a p′a ⊙ q` when `X`'s equation has an `a` branch. The empty
    /// word has no transitions.
    pub fn transitions(&self, word: &Word) -> Vec<(String, Word)> {
        match word.split_first() {
            None => Vec::new(),
            Some((&x, rest)) => self.equations[x]
                .branches
                .iter()
                .map(|(label, cont)| {
                    let mut next = cont.clone();
                    next.extend_from_slice(rest);
                    (label.clone(), next)
                })
                .collect(),
        }
    }
}

/// Parses the tiny equation syntax, one equation per line:
/// `X = a.eps + b.X.Y`. Lines starting with `--` are comments.
pub fn parse_system(text: &str) -> Result<BpaSystem, BpaError> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("--"))
        .collect();
    let mut names = Vec::new();
    for line in &lines {
        let (name, _) = line
            .split_once('=')
            .ok_or_else(|| BpaError::Syntax(format!("expected `NAME = ...` in {line:?}")))?;
        names.push(name.trim().to_string());
    }
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut equations = Vec::new();
    for (line, name) in lines.iter().zip(names.iter()) {
        let (_, rhs) = line.split_once('=').expect("checked above");
        let mut branches = Vec::new();
        for branch in rhs.split('+') {
            let mut parts = branch.trim().split('.').map(str::trim);
            let label = parts
                .next()
                .filter(|l| !l.is_empty())
                .ok_or_else(|| BpaError::Syntax(format!("empty branch in {line:?}")))?;
            let mut word = Vec::new();
            let rest: Vec<&str> = parts.collect();
            if rest.is_empty() {
                return Err(BpaError::Syntax(format!(
                    "branch `{label}` needs a continuation (use `{label}.eps`)"
                )));
            }
            if rest != ["eps"] {
                for var in rest {
                    let &i = index.get(var).ok_or_else(|| {
                        BpaError::Syntax(format!("undefined process variable `{var}`"))
                    })?;
                    word.push(i);
                }
            }
            branches.push((label.to_string(), word));
        }
        equations.push(Equation {
            name: name.clone(),
            branches,
        });
    }
    let sys = BpaSystem { equations };
    sys.validate()?;
    Ok(sys)
}

// ---------------------------------------------------------------------------
// Encoding into type signatures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// `t_X[a] = &{ℓ: ⟦p′ℓ⟧a}`, with the empty record as the tail type.
    Record,
    /// Adds an `end$` alternative to every record, with `t0 = &{end$: t0}`.
    RecordWithEnd,
    /// `⊕` substituted for `&`; the subtyping direction flips.
    Variant,
}

/// The generated `.poly` source plus the word translation `⟦p⟧`.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub source: String,
    pub flavor: Flavor,
    names: Vec<String>,
}

impl Encoding {
    /// `⟦p⟧stop` as surface syntax: `⟦ε⟧τ = τ` and `⟦X·p⟧τ = t_X[⟦p⟧τ]`.
    pub fn word_type(&self, word: &Word) -> String {
        let mut out = String::from("stop");
        for &x in word.iter().rev() {
            out = format!("t{}[{out}]", self.names[x]);
        }
        out
    }

    /// The query text that mirrors simulation: `p ⊑ q` corresponds to
    /// `⟦q⟧ <= ⟦p⟧` for records and `⟦p⟧ <= ⟦q⟧` for variants.
    pub fn simulation_query(&self, p: &Word, q: &Word) -> String {
        match self.flavor {
            Flavor::Record | Flavor::RecordWithEnd => {
                format!("{} <= {}", self.word_type(q), self.word_type(p))
            }
            Flavor::Variant => format!("{} <= {}", self.word_type(p), self.word_type(q)),
        }
    }
}

/// Encodes a system as type definitions, one constructor `t_X[a]` per
/// process variable, plus a closed `stop` tail type.
pub fn encode(sys: &BpaSystem, flavor: Flavor) -> Result<Encoding, BpaError> {
    sys.validate()?;
    let names: Vec<String> = sys.equations.iter().map(|e| e.name.clone()).collect();
    let word = |w: &Word| {
        let mut out = String::from("a");
        for &x in w.iter().rev() {
            out = format!("t{}[{out}]", names[x]);
        }
        out
    };
    let sigil = match flavor {
        Flavor::Variant => "+",
        _ => "&",
    };
    let mut src = String::new();
    match flavor {
        Flavor::Record => src.push_str("type stop = &{}\n"),
        Flavor::RecordWithEnd => {
            src.push_str("type t0 = &{end$: t0}\n");
            src.push_str("type stop = &{end$: t0}\n");
        }
        Flavor::Variant => src.push_str("type stop = +{}\n"),
    }
    for eq in &sys.equations {
        let mut fields: Vec<String> = eq
            .branches
            .iter()
            .map(|(label, w)| format!("{label}: {}", word(w)))
            .collect();
        if flavor == Flavor::RecordWithEnd {
            fields.push("end$: t0".to_string());
        }
        let _ = writeln!(src, "type t{}[a] = {sigil}{{{}}}", eq.name, fields.join(", "));
    }
    Ok(Encoding {
        source: src,
        flavor,
        names,
    })
}

// ---------------------------------------------------------------------------
// Bounded simulation refuter
// ---------------------------------------------------------------------------

/// Either no counterexample to `p ⊑ q` within `depth` transitions, or the
/// action path of a violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimOutcome {
    NoCounterexampleWithin(u32),
    Violation(Vec<String>),
}

impl SimOutcome {
    pub fn is_violation(&self) -> bool {
        matches!(self, SimOutcome::Violation(_))
    }
}

/// One-sided refuter for the simulation preorder: explores transitions to
/// depth `k`, checking that every move of `p` can be matched by `q`.
/// Deepens iteratively, so the reported path is minimal.
pub fn bounded_simulation_refute(sys: &BpaSystem, p: &Word, q: &Word, depth: u32) -> SimOutcome {
    let mut cleared: HashMap<(Word, Word), u32> = HashMap::new();
    for d in 0..=depth {
        if let Some(path) = refute(sys, p, q, d, &mut cleared) {
            return SimOutcome::Violation(path);
        }
    }
    SimOutcome::NoCounterexampleWithin(depth)
}

fn refute(
    sys: &BpaSystem,
    p: &Word,
    q: &Word,
    budget: u32,
    cleared: &mut HashMap<(Word, Word), u32>,
) -> Option<Vec<String>> {
    if budget == 0 {
        return None;
    }
    let key = (p.clone(), q.clone());
    if let Some(&b) = cleared.get(&key) {
        if budget <= b {
            return None;
        }
    }
    for (action, p_next) in sys.transitions(p) {
        // In Greibach normal form, q has at most one matching transition.
        let q_next = match q.split_first() {
            None => None,
            Some((&y, rest)) => sys.equations[y]
                .branches
                .iter()
                .find(|(l, _)| *l == action)
                .map(|(_, cont)| {
                    let mut next = cont.clone();
                    next.extend_from_slice(rest);
                    next
                }),
        };
        match q_next {
            None => return Some(vec![action]),
            Some(q_next) => {
                if let Some(mut path) = refute(sys, &p_next, &q_next, budget - 1, cleared) {
                    path.insert(0, action);
                    return Some(path);
                }
            }
        }
    }
    let entry = cleared.entry(key).or_insert(0);
    *entry = (*entry).max(budget);
    None
}
