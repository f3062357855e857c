//! PDDL-subset front end: typed domain model, parser and canonical
//! formatter.
//!
//! The subset covers STRIPS-style actions over a fixed set of object
//! constants, plus a `(:neural ...)` extension block that marks which
//! predicates are refreshed from perception grounders rather than set by
//! action effects. Both the standard keyword spellings (`:parameters`,
//! `:precondition`, `:effect`, `:init`, `:goal`) and the shorthand ones
//! (`:param`, `:pre`, `:eff`, `:Init`, `:Goal`) are accepted. A lenient
//! parse mode additionally repairs unbalanced parentheses at block
//! boundaries; strict mode rejects them.

mod parser;

use std::fmt::Write as _;

pub use parser::{parse_domain, parse_problem};

/// A predicate applied to object constants (or `?`-prefixed variables).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        Atom {
            predicate: predicate.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// True if no argument is a `?`-variable.
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|a| !a.starts_with('?'))
    }
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

/// An atom or its negation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, negated: true }
    }
}

impl std::fmt::Display for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.negated {
            write!(f, "not {}", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

/// One action definition: name, parameter list, precondition and effect
/// literal sets. Literal order is the source order; duplicates are removed
/// on parse.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub pre: Vec<Literal>,
    pub eff: Vec<Literal>,
}

/// Whether a predicate's truth value comes from symbolic effects or from a
/// perception grounder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateKind {
    Symbolic,
    Neural,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateInfo {
    pub name: String,
    pub arity: usize,
    pub kind: PredicateKind,
}

/// A parsed domain. The predicate table is built by first use, in source
/// order, with case-insensitive name uniqueness and a fixed arity per
/// predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub name: String,
    pub actions: Vec<ActionSchema>,
    pub predicates: Vec<PredicateInfo>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateInfo> {
        self.predicates
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions
            .iter()
            .find(|a| a.name.eq_ignore_ascii_case(name))
    }

    pub fn is_neural(&self, predicate: &str) -> bool {
        matches!(
            self.predicate(predicate).map(|p| p.kind),
            Some(PredicateKind::Neural)
        )
    }
}

/// Initial and goal literal sets for one planning task.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub init: Vec<Literal>,
    pub goal: Vec<Literal>,
}

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PddlError {
    #[error("syntax error at {pos}: expected {expected}")]
    Syntax { pos: Pos, expected: String },
    #[error("predicate `{name}` used with arity {found} but previously with arity {expected}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate action `{0}`")]
    DuplicateAction(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("goal must not be empty")]
    EmptyGoal,
    #[error("`{atom}` appears both positively and negated in {place} of action `{action}`")]
    ContradictoryLiterals {
        action: String,
        place: &'static str,
        atom: String,
    },
    #[error("init contains contradictory literals for `{0}`")]
    InconsistentInit(String),
    #[error("variable `{var}` in action `{action}` is not bound by its parameters")]
    UnboundVariable { action: String, var: String },
    #[error("predicate kind for `{0}` declared more than once")]
    DuplicateKindDeclaration(String),
}

/// Emits the canonical standard-keyword form of a domain. Parsing the
/// output yields a domain structurally equal to the input.
pub fn format_domain(domain: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", domain.name);
    let neural: Vec<&str> = domain
        .predicates
        .iter()
        .filter(|p| p.kind == PredicateKind::Neural)
        .map(|p| p.name.as_str())
        .collect();
    if !neural.is_empty() {
        let _ = writeln!(out, "  (:neural {})", neural.join(" "));
    }
    for action in &domain.actions {
        let _ = writeln!(out, "  (:action {}", action.name);
        let _ = writeln!(out, "    :parameters ({})", action.params.join(" "));
        let _ = writeln!(out, "    :precondition {}", format_literals(&action.pre));
        let _ = writeln!(out, "    :effect {})", format_literals(&action.eff));
    }
    out.push_str(")\n");
    out
}

fn format_literals(literals: &[Literal]) -> String {
    let parts: Vec<String> = literals.iter().map(format_literal).collect();
    format!("(and {})", parts.join(" "))
}

fn format_literal(literal: &Literal) -> String {
    let mut atom = format!("({}", literal.atom.predicate);
    for arg in &literal.atom.args {
        atom.push(' ');
        atom.push_str(arg);
    }
    atom.push(')');
    if literal.negated {
        format!("(not {})", atom)
    } else {
        atom
    }
}
