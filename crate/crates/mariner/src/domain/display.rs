//! Canonical text form for domains and problems. `parse(to_string(x))`
//! reproduces `x` structurally, which the round-trip tests rely on.

use std::fmt;

use super::{
    ActionSchema, Domain, Method, Problem, SchemaAtom, SchemaEffect, SchemaLiteral, Term, TypedName,
};

fn typed_list(items: &[TypedName]) -> String {
    items.iter().map(|t| format!("{} - {}", t.name, t.ty)).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

impl fmt::Display for SchemaAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for t in &self.terms {
            write!(f, " {t}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for SchemaLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

impl fmt::Display for SchemaEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaEffect::Literal(l) => write!(f, "{l}"),
            SchemaEffect::Forall { var, ty, literal } => {
                write!(f, "(forall (?{var} - {ty}) {literal})")
            }
        }
    }
}

fn conjunction(lits: &[SchemaLiteral]) -> String {
    let inner: Vec<String> = lits.iter().map(|l| l.to_string()).collect();
    format!("(and {})", inner.join(" "))
}

impl fmt::Display for ActionSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> =
            self.params.iter().map(|p| format!("?{} - {}", p.name, p.ty)).collect();
        let effs: Vec<String> = self.effects.iter().map(|e| e.to_string()).collect();
        write!(
            f,
            "  (:action {}\n    :parameters ({})\n    :precondition {}\n    :effect (and {}))",
            self.name,
            params.join(" "),
            conjunction(&self.preconditions),
            effs.join(" ")
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subs: Vec<String> = self.subtasks.iter().map(|s| s.to_string()).collect();
        write!(
            f,
            "  (:method {}\n    :task {}\n    :precondition {}\n    :subtasks ({}))",
            self.name,
            self.task,
            conjunction(&self.preconditions),
            subs.join(" ")
        )
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.types.is_empty() {
            writeln!(f, "  (:types {})", self.types.join(" "))?;
        }
        if !self.constants.is_empty() {
            writeln!(f, "  (:constants {})", typed_list(&self.constants))?;
        }
        writeln!(f, "  (:predicates")?;
        for p in &self.predicates {
            let params: Vec<String> =
                p.params.iter().map(|t| format!("?{} - {}", t.name, t.ty)).collect();
            writeln!(
                f,
                "    ({}{}{})",
                p.name,
                if params.is_empty() { "" } else { " " },
                params.join(" ")
            )?;
        }
        writeln!(f, "  )")?;
        for a in &self.actions {
            writeln!(f, "{a}")?;
        }
        for m in &self.methods {
            writeln!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain_name)?;
        writeln!(f, "  (:objects {})", typed_list(&self.objects))?;
        let init: Vec<String> = self.init.literals().map(|l| l.to_string()).collect();
        writeln!(f, "  (:init {})", init.join(" "))?;
        let goal: Vec<String> = self.goal.literals().map(|l| l.to_string()).collect();
        if goal.len() == 1 {
            writeln!(f, "  (:goal {})", goal[0])?;
        } else {
            writeln!(f, "  (:goal (and {}))", goal.join(" "))?;
        }
        write!(f, ")")
    }
}
