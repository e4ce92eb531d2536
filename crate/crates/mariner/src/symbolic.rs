//! Ground symbolic state: sets of Boolean predicate instances.
//!
//! A [`SymbolicState`] tracks which ground atoms are known true and which are
//! explicitly false. Queries follow the closed-world assumption: a positive
//! literal holds only if its atom is present in the true set, and a negative
//! literal holds whenever its atom is absent from the true set.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A ground predicate instance such as `detected(warship)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
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
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "({})", self.predicate)
        } else {
            write!(f, "({} {})", self.predicate, self.args.join(" "))
        }
    }
}

/// An atom with polarity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(predicate: impl Into<String>, args: &[&str]) -> Self {
        Literal { atom: Atom::new(predicate, args), positive: true }
    }

    pub fn neg(predicate: impl Into<String>, args: &[&str]) -> Self {
        Literal { atom: Atom::new(predicate, args), positive: false }
    }

    pub fn negated(&self) -> Self {
        Literal { atom: self.atom.clone(), positive: !self.positive }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

/// A set of ground literals. No atom is ever recorded with both polarities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicState {
    true_atoms: BTreeSet<Atom>,
    false_atoms: BTreeSet<Atom>,
}

impl SymbolicState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_literals<I: IntoIterator<Item = Literal>>(literals: I) -> Self {
        let mut s = Self::new();
        for lit in literals {
            s.insert(lit);
        }
        s
    }

    /// Records a literal, displacing the opposite polarity if present.
    pub fn insert(&mut self, lit: Literal) {
        if lit.positive {
            self.false_atoms.remove(&lit.atom);
            self.true_atoms.insert(lit.atom);
        } else {
            self.true_atoms.remove(&lit.atom);
            self.false_atoms.insert(lit.atom);
        }
    }

    /// Closed-world check: negatives hold whenever the atom is not known true.
    pub fn holds(&self, lit: &Literal) -> bool {
        if lit.positive {
            self.true_atoms.contains(&lit.atom)
        } else {
            !self.true_atoms.contains(&lit.atom)
        }
    }

    /// True iff every literal of `goal` holds here.
    pub fn entails(&self, goal: &SymbolicState) -> bool {
        goal.literals().all(|lit| self.holds(&lit))
    }

    pub fn true_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.true_atoms.iter()
    }

    pub fn false_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.false_atoms.iter()
    }

    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.true_atoms
            .iter()
            .map(|a| Literal { atom: a.clone(), positive: true })
            .chain(self.false_atoms.iter().map(|a| Literal { atom: a.clone(), positive: false }))
    }

    pub fn is_empty(&self) -> bool {
        self.true_atoms.is_empty() && self.false_atoms.is_empty()
    }

    /// Internal consistency: no atom in both polarity sets.
    pub fn is_consistent(&self) -> bool {
        self.true_atoms.is_disjoint(&self.false_atoms)
    }
}

impl fmt::Display for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.literals().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_world_negatives() {
        let s = SymbolicState::from_literals([Literal::pos("detected", &["warship"])]);
        assert!(s.holds(&Literal::pos("detected", &["warship"])));
        assert!(s.holds(&Literal::neg("approached", &["warship"])));
        assert!(!s.holds(&Literal::neg("detected", &["warship"])));
    }

    #[test]
    fn insert_displaces_opposite_polarity() {
        let mut s = SymbolicState::new();
        s.insert(Literal::neg("env_sensed", &[]));
        s.insert(Literal::pos("env_sensed", &[]));
        assert!(s.is_consistent());
        assert!(s.holds(&Literal::pos("env_sensed", &[])));
        s.insert(Literal::neg("env_sensed", &[]));
        assert!(s.is_consistent());
        assert!(!s.holds(&Literal::pos("env_sensed", &[])));
    }

    #[test]
    fn entailment_ignores_redundant_negatives() {
        let init = SymbolicState::from_literals([
            Literal::pos("detected", &["warship"]),
            Literal::neg("approached", &["warship"]),
        ]);
        let goal = SymbolicState::from_literals([Literal::neg("reported", &["warship"])]);
        assert!(init.entails(&goal));
    }
}
