//! The symbolic planning domain: predicate declarations, action schemas with
//! preconditions and effects, and the method table used for task
//! decomposition. Domains and problems are written in an s-expression surface
//! syntax stored in `.htn` files; see [`parse`] for the grammar.

mod display;
mod parse;

pub use parse::{parse_domain, parse_plan, parse_problem, ParseError};

use serde::{Deserialize, Serialize};

use crate::symbolic::SymbolicState;

/// A typed name, used for action parameters, constants, and problem objects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

/// A term in a schema literal: either a parameter variable or a constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

/// An unground predicate application such as `(approached ?t)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaAtom {
    pub predicate: String,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaLiteral {
    pub atom: SchemaAtom,
    pub positive: bool,
}

/// One effect of an action schema. `Forall` expands over every object of the
/// given type at grounding time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaEffect {
    Literal(SchemaLiteral),
    Forall { var: String, ty: String, literal: SchemaLiteral },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub preconditions: Vec<SchemaLiteral>,
    pub effects: Vec<SchemaEffect>,
}

/// A decomposition method: when the task pattern matches the goal and the
/// precondition holds, the task is replaced by the subtask sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub task: SchemaAtom,
    pub preconditions: Vec<SchemaLiteral>,
    pub subtasks: Vec<SchemaAtom>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub types: Vec<String>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
    pub methods: Vec<Method>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }
}

/// A ground planning problem over a domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: SymbolicState,
    pub goal: SymbolicState,
}

impl Problem {
    /// Objects available for grounding: domain constants first (declaration
    /// order), then problem objects, duplicates removed.
    pub fn grounding_objects<'a>(&'a self, domain: &'a Domain) -> Vec<TypedName> {
        let mut out: Vec<TypedName> = Vec::new();
        for c in domain.constants.iter().chain(self.objects.iter()) {
            if !out.iter().any(|o| o.name == c.name) {
                out.push(c.clone());
            }
        }
        out
    }
}

/// The marine autonomy domain shipped with the crate.
pub const MARINE_DOMAIN_TEXT: &str = include_str!("../../assets/marine.htn");

/// Parses the bundled marine domain. Panics only if the bundled file is
/// corrupt, which the test suite rules out.
pub fn marine_domain() -> Domain {
    parse_domain(MARINE_DOMAIN_TEXT).expect("bundled marine domain parses")
}
