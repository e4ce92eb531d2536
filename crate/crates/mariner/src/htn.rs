//! Task planning over the symbolic domain: method decomposition backed by
//! breadth-first forward search, plus a step-by-step plan validator.
//!
//! Planning is deterministic end to end. Actions ground in declaration order
//! with parameter bindings enumerated in object declaration order, the search
//! queue is FIFO, and the first shortest plan found is the one returned.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::domain::{ActionSchema, Domain, SchemaAtom, SchemaEffect, SchemaLiteral, Term, TypedName};
use crate::symbolic::{Atom, Literal, SymbolicState};

/// Depth bound for the forward search fallback.
pub const MAX_SEARCH_DEPTH: usize = 8;

/// An action schema with all parameters bound, carrying ground preconditions
/// and effects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub preconditions: Vec<Literal>,
    pub effects: Vec<Literal>,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}({})", self.name, self.args.join(", "))
        }
    }
}

/// An ordered sequence of ground actions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HtnError {
    #[error("no plan within depth {0}")]
    Unsolvable(usize),
    #[error("action `{action}` is not applicable: {violated} does not hold")]
    NotApplicable { action: String, violated: Literal },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{action}` expects {expected} arguments, got {got}")]
    WrongArity { action: String, expected: usize, got: usize },
}

/// Validator verdict. `Invalid.step` is the zero-based index of the first
/// inapplicable action, or `plan.len()` when every step applies but the final
/// state misses the goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid { step: usize, violated: Literal },
}

fn subst_atom(atom: &SchemaAtom, binding: &BTreeMap<&str, &str>) -> Atom {
    let args = atom
        .terms
        .iter()
        .map(|t| match t {
            Term::Var(v) => binding
                .get(v.as_str())
                .unwrap_or_else(|| panic!("unbound variable ?{v} (parser guarantees scope)"))
                .to_string(),
            Term::Const(c) => c.clone(),
        })
        .collect();
    Atom { predicate: atom.predicate.clone(), args }
}

fn subst_literal(lit: &SchemaLiteral, binding: &BTreeMap<&str, &str>) -> Literal {
    Literal { atom: subst_atom(&lit.atom, binding), positive: lit.positive }
}

/// Binds an action schema to concrete arguments, expanding `forall` effects
/// over the object universe.
pub fn instantiate(
    schema: &ActionSchema,
    args: &[String],
    objects: &[TypedName],
) -> Result<GroundAction, HtnError> {
    if schema.params.len() != args.len() {
        return Err(HtnError::WrongArity {
            action: schema.name.clone(),
            expected: schema.params.len(),
            got: args.len(),
        });
    }
    let binding: BTreeMap<&str, &str> = schema
        .params
        .iter()
        .zip(args.iter())
        .map(|(p, a)| (p.name.as_str(), a.as_str()))
        .collect();
    let preconditions = schema.preconditions.iter().map(|l| subst_literal(l, &binding)).collect();
    let mut effects = Vec::new();
    for eff in &schema.effects {
        match eff {
            SchemaEffect::Literal(lit) => effects.push(subst_literal(lit, &binding)),
            SchemaEffect::Forall { var, ty, literal } => {
                for obj in objects.iter().filter(|o| &o.ty == ty) {
                    let mut inner = binding.clone();
                    inner.insert(var.as_str(), obj.name.as_str());
                    effects.push(subst_literal(literal, &inner));
                }
            }
        }
    }
    Ok(GroundAction { name: schema.name.clone(), args: args.to_vec(), preconditions, effects })
}

/// Grounds a named step (as read from a plan file) against the domain.
pub fn ground_step(
    domain: &Domain,
    objects: &[TypedName],
    name: &str,
    args: &[String],
) -> Result<GroundAction, HtnError> {
    let schema = domain.action(name).ok_or_else(|| HtnError::UnknownAction(name.to_string()))?;
    instantiate(schema, args, objects)
}

/// Every ground instance of every schema, in declaration order with argument
/// tuples enumerated rightmost-fastest over the object list.
pub fn ground_actions(domain: &Domain, objects: &[TypedName]) -> Vec<GroundAction> {
    let mut out = Vec::new();
    for schema in &domain.actions {
        let candidates: Vec<Vec<&TypedName>> = schema
            .params
            .iter()
            .map(|p| objects.iter().filter(|o| o.ty == p.ty).collect())
            .collect();
        let mut tuple = vec![0usize; schema.params.len()];
        'enumerate: loop {
            if candidates.iter().any(|c| c.is_empty()) {
                break;
            }
            let args: Vec<String> =
                tuple.iter().zip(&candidates).map(|(&i, c)| c[i].name.clone()).collect();
            out.push(instantiate(schema, &args, objects).expect("arity matches by construction"));
            if tuple.is_empty() {
                break;
            }
            let mut k = tuple.len() - 1;
            loop {
                tuple[k] += 1;
                if tuple[k] < candidates[k].len() {
                    continue 'enumerate;
                }
                tuple[k] = 0;
                if k == 0 {
                    break 'enumerate;
                }
                k -= 1;
            }
        }
    }
    out
}

/// True iff every precondition literal holds in `state` under the
/// closed-world assumption.
pub fn applicable(action: &GroundAction, state: &SymbolicState) -> bool {
    action.preconditions.iter().all(|lit| state.holds(lit))
}

fn first_violated(action: &GroundAction, state: &SymbolicState) -> Option<Literal> {
    action.preconditions.iter().find(|lit| !state.holds(lit)).cloned()
}

/// Delete-then-add effect application.
pub fn apply(action: &GroundAction, state: &SymbolicState) -> Result<SymbolicState, HtnError> {
    if let Some(violated) = first_violated(action, state) {
        return Err(HtnError::NotApplicable { action: action.to_string(), violated });
    }
    let mut next = state.clone();
    for eff in action.effects.iter().filter(|e| !e.positive) {
        next.insert(eff.clone());
    }
    for eff in action.effects.iter().filter(|e| e.positive) {
        next.insert(eff.clone());
    }
    Ok(next)
}

// Internal search state: just the set of true atoms (closed world).
type TrueSet = BTreeSet<Atom>;

fn true_set(state: &SymbolicState) -> TrueSet {
    state.true_atoms().cloned().collect()
}

fn holds_in(set: &TrueSet, lit: &Literal) -> bool {
    set.contains(&lit.atom) == lit.positive
}

fn set_applicable(set: &TrueSet, action: &GroundAction) -> bool {
    action.preconditions.iter().all(|l| holds_in(set, l))
}

fn set_apply(set: &TrueSet, action: &GroundAction) -> TrueSet {
    let mut next = set.clone();
    for eff in &action.effects {
        if eff.positive {
            next.insert(eff.atom.clone());
        } else {
            next.remove(&eff.atom);
        }
    }
    next
}

fn set_entails(set: &TrueSet, goal: &SymbolicState) -> bool {
    goal.literals().all(|l| holds_in(set, &l))
}

/// Breadth-first forward search; returns the first shortest plan within the
/// depth bound.
fn forward_search(
    actions: &[GroundAction],
    init: &SymbolicState,
    goal: &SymbolicState,
    max_depth: usize,
) -> Option<Plan> {
    let start = true_set(init);
    if set_entails(&start, goal) {
        return Some(Plan::default());
    }
    let mut visited: BTreeSet<TrueSet> = BTreeSet::new();
    visited.insert(start.clone());
    let mut queue: VecDeque<(TrueSet, Vec<usize>)> = VecDeque::new();
    queue.push_back((start, Vec::new()));
    while let Some((set, path)) = queue.pop_front() {
        if path.len() >= max_depth {
            continue;
        }
        for (idx, action) in actions.iter().enumerate() {
            if !set_applicable(&set, action) {
                continue;
            }
            let next = set_apply(&set, action);
            if visited.contains(&next) {
                continue;
            }
            let mut next_path = path.clone();
            next_path.push(idx);
            if set_entails(&next, goal) {
                return Some(Plan {
                    steps: next_path.into_iter().map(|i| actions[i].clone()).collect(),
                });
            }
            visited.insert(next.clone());
            queue.push_back((next, next_path));
        }
    }
    None
}

/// Tries to unify a method's task pattern against a positive goal literal.
fn unify_task<'a>(task: &'a SchemaAtom, goal_atom: &'a Atom) -> Option<BTreeMap<&'a str, &'a str>> {
    if task.predicate != goal_atom.predicate || task.terms.len() != goal_atom.args.len() {
        return None;
    }
    let mut binding = BTreeMap::new();
    for (term, arg) in task.terms.iter().zip(goal_atom.args.iter()) {
        match term {
            Term::Const(c) => {
                if c != arg {
                    return None;
                }
            }
            Term::Var(v) => match binding.get(v.as_str()) {
                Some(&bound) if bound != arg.as_str() => return None,
                _ => {
                    binding.insert(v.as_str(), arg.as_str());
                }
            },
        }
    }
    Some(binding)
}

/// Computes a plan transitioning `init` toward `goal`.
///
/// Methods are consulted in declaration order; a method whose instantiated
/// subtask sequence is applicable and reaches the goal is returned directly.
/// Otherwise breadth-first search over ground actions (depth bound
/// [`MAX_SEARCH_DEPTH`]) supplies a shortest plan. When the goal is not
/// symbolically reachable, an applicable method plan that merely makes
/// progress (the exploration round) is returned so the caller can execute it
/// and replan.
pub fn plan(
    domain: &Domain,
    objects: &[TypedName],
    init: &SymbolicState,
    goal: &SymbolicState,
) -> Result<Plan, HtnError> {
    plan_with_depth(domain, objects, init, goal, MAX_SEARCH_DEPTH)
}

pub fn plan_with_depth(
    domain: &Domain,
    objects: &[TypedName],
    init: &SymbolicState,
    goal: &SymbolicState,
    max_depth: usize,
) -> Result<Plan, HtnError> {
    if init.entails(goal) {
        return Ok(Plan::default());
    }

    let goal_atoms: Vec<Atom> =
        goal.literals().filter(|l| l.positive).map(|l| l.atom).collect();

    let mut progressive: Option<Plan> = None;
    for method in &domain.methods {
        for goal_atom in &goal_atoms {
            let Some(binding) = unify_task(&method.task, goal_atom) else {
                continue;
            };
            if !method.preconditions.iter().all(|l| init.holds(&subst_literal(l, &binding))) {
                continue;
            }
            // Instantiate subtasks against action schemas and simulate.
            let mut steps = Vec::new();
            let mut ok = true;
            let mut state = true_set(init);
            for sub in &method.subtasks {
                let args: Vec<String> = subst_atom(sub, &binding).args;
                let Some(schema) = domain.action(&sub.predicate) else {
                    ok = false;
                    break;
                };
                let Ok(action) = instantiate(schema, &args, objects) else {
                    ok = false;
                    break;
                };
                if !set_applicable(&state, &action) {
                    ok = false;
                    break;
                }
                state = set_apply(&state, &action);
                steps.push(action);
            }
            if !ok {
                continue;
            }
            let candidate = Plan { steps };
            if set_entails(&state, goal) {
                return Ok(candidate);
            }
            if progressive.is_none() {
                progressive = Some(candidate);
            }
        }
    }

    let actions = ground_actions(domain, objects);
    if let Some(found) = forward_search(&actions, init, goal, max_depth) {
        return Ok(found);
    }
    if let Some(p) = progressive {
        return Ok(p);
    }
    Err(HtnError::Unsolvable(max_depth))
}

/// Simulates the plan step by step. Reports the first inapplicable action, or
/// checks goal entailment after the last step.
pub fn validate_plan(init: &SymbolicState, plan: &Plan, goal: &SymbolicState) -> Validity {
    let mut state = init.clone();
    for (idx, action) in plan.steps.iter().enumerate() {
        if let Some(violated) = first_violated(action, &state) {
            return Validity::Invalid { step: idx, violated };
        }
        state = apply(action, &state).expect("preconditions just checked");
    }
    match goal.literals().find(|l| !state.holds(l)) {
        None => Validity::Valid,
        Some(violated) => Validity::Invalid { step: plan.steps.len(), violated },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::marine_domain;

    fn objects() -> Vec<TypedName> {
        vec![
            TypedName { name: "warship".into(), ty: "object".into() },
            TypedName { name: "glider".into(), ty: "object".into() },
            TypedName { name: "coral_reef".into(), ty: "object".into() },
        ]
    }

    fn all_objects(domain: &Domain) -> Vec<TypedName> {
        let mut out = domain.constants.clone();
        out.extend(objects());
        out
    }

    #[test]
    fn capture_applicability_follows_the_action_table() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let capture = ground_step(&domain, &objs, "capture", &["warship".into()]).unwrap();
        let approached = SymbolicState::from_literals([Literal::pos("approached", &["warship"])]);
        let detected_only =
            SymbolicState::from_literals([Literal::pos("detected", &["warship"])]);
        assert!(applicable(&capture, &approached));
        assert!(!applicable(&capture, &detected_only));
    }

    #[test]
    fn empty_precondition_always_applicable() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let navigate = ground_step(&domain, &objs, "navigate", &["auv".into()]).unwrap();
        assert!(applicable(&navigate, &SymbolicState::new()));
    }

    #[test]
    fn navigate_clears_proximity_and_sensing() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let navigate = ground_step(&domain, &objs, "navigate", &["auv".into()]).unwrap();
        let state = SymbolicState::from_literals([
            Literal::pos("approached", &["warship"]),
            Literal::pos("env_sensed", &[]),
        ]);
        let next = apply(&navigate, &state).unwrap();
        assert!(next.holds(&Literal::pos("navigated", &["auv"])));
        assert!(next.holds(&Literal::neg("approached", &["warship"])));
        assert!(next.holds(&Literal::neg("env_sensed", &[])));
        assert!(next.is_consistent());
    }

    #[test]
    fn report_adds_reported() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let report = ground_step(&domain, &objs, "report", &["warship".into()]).unwrap();
        let state = SymbolicState::from_literals([
            Literal::pos("captured", &["warship"]),
            Literal::pos("approached", &["warship"]),
        ]);
        let next = apply(&report, &state).unwrap();
        assert!(next.holds(&Literal::pos("reported", &["warship"])));
    }

    #[test]
    fn detected_round_plans_survey() {
        let domain = marine_domain();
        let init = SymbolicState::from_literals([
            Literal::pos("detected", &["warship"]),
            Literal::neg("approached", &["warship"]),
            Literal::neg("reported", &["warship"]),
        ]);
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        let p = plan(&domain, &all_objects(&domain), &init, &goal).unwrap();
        let names: Vec<String> = p.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["approach(warship)", "capture(warship)", "report(warship)"]);
    }

    #[test]
    fn satisfied_goal_plans_empty() {
        let domain = marine_domain();
        let init = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        let goal = init.clone();
        let p = plan(&domain, &all_objects(&domain), &init, &goal).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn undetected_round_plans_exploration() {
        let domain = marine_domain();
        let init = SymbolicState::from_literals([
            Literal::neg("detected", &["warship"]),
            Literal::neg("navigated", &["auv"]),
            Literal::neg("env_sensed", &[]),
        ]);
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        let p = plan(&domain, &all_objects(&domain), &init, &goal).unwrap();
        let names: Vec<String> = p.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["navigate(auv)", "sense"]);
    }

    #[test]
    fn replanned_round_plans_rescue() {
        let domain = marine_domain();
        let init = SymbolicState::from_literals([Literal::pos("replanned", &[])]);
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["rescue"])]);
        let p = plan(&domain, &all_objects(&domain), &init, &goal).unwrap();
        let names: Vec<String> = p.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["rescue"]);
    }

    #[test]
    fn validator_accepts_the_survey_plan() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let init = SymbolicState::from_literals([Literal::pos("detected", &["warship"])]);
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        let steps = ["approach", "capture", "report"]
            .iter()
            .map(|n| ground_step(&domain, &objs, n, &["warship".into()]).unwrap())
            .collect();
        assert_eq!(validate_plan(&init, &Plan { steps }, &goal), Validity::Valid);
    }

    #[test]
    fn validator_accepts_empty_plan_on_satisfied_goal() {
        let init = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        assert_eq!(validate_plan(&init, &Plan::default(), &init.clone()), Validity::Valid);
    }

    #[test]
    fn interleaved_navigate_invalidates_capture() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let init = SymbolicState::from_literals([Literal::pos("detected", &["warship"])]);
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        let mk = |name: &str, args: &[&str]| {
            let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            ground_step(&domain, &objs, name, &args).unwrap()
        };
        let wrong = Plan {
            steps: vec![
                mk("navigate", &["auv"]),
                mk("sense", &[]),
                mk("approach", &["warship"]),
                mk("navigate", &["auv"]),
                mk("sense", &[]),
                mk("capture", &["warship"]),
                mk("navigate", &["auv"]),
                mk("sense", &[]),
                mk("report", &["warship"]),
            ],
        };
        match validate_plan(&init, &wrong, &goal) {
            Validity::Invalid { step, violated } => {
                assert_eq!(step, 5);
                assert_eq!(violated, Literal::pos("approached", &["warship"]));
            }
            Validity::Valid => panic!("the interleaved plan must not validate"),
        }
    }

    #[test]
    fn invalid_plan_prefix_validates_toward_its_reached_state() {
        // Monotone failure: if validation fails at step k, the k-step prefix
        // is a valid plan toward the state it reaches.
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let init = SymbolicState::from_literals([Literal::pos("detected", &["warship"])]);
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["warship"])]);
        let mk = |name: &str, args: &[&str]| {
            let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            ground_step(&domain, &objs, name, &args).unwrap()
        };
        let wrong = Plan {
            steps: vec![
                mk("navigate", &["auv"]),
                mk("sense", &[]),
                mk("approach", &["warship"]),
                mk("navigate", &["auv"]),
                mk("sense", &[]),
                mk("capture", &["warship"]),
            ],
        };
        let Validity::Invalid { step, .. } = validate_plan(&init, &wrong, &goal) else {
            panic!("expected invalid");
        };
        let prefix = Plan { steps: wrong.steps[..step].to_vec() };
        let mut reached = init.clone();
        for action in &prefix.steps {
            reached = apply(action, &reached).unwrap();
        }
        let reached_goal =
            SymbolicState::from_literals(reached.true_atoms().cloned().map(|atom| Literal {
                atom,
                positive: true,
            }));
        assert_eq!(validate_plan(&init, &prefix, &reached_goal), Validity::Valid);
    }

    #[test]
    fn apply_rejects_inapplicable_action() {
        let domain = marine_domain();
        let objs = all_objects(&domain);
        let capture = ground_step(&domain, &objs, "capture", &["warship".into()]).unwrap();
        let err = apply(&capture, &SymbolicState::new()).unwrap_err();
        assert!(matches!(err, HtnError::NotApplicable { .. }));
    }
}
