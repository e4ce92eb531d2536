//! Parser for the `.htn` domain/problem language.
//!
//! The surface syntax is s-expressions:
//!
//! ```text
//! (define (domain marine)
//!   (:types vehicle object)
//!   (:constants auv - vehicle rescue - object)
//!   (:predicates (detected ?t - object) ...)
//!   (:action approach
//!     :parameters (?t - object)
//!     :precondition (and (detected ?t) (not (approached ?t)))
//!     :effect (and (approached ?t)))
//!   (:method survey
//!     :task (reported ?t)
//!     :precondition (and (detected ?t))
//!     :subtasks ((approach ?t) (capture ?t) (report ?t))))
//!
//! (define (problem phase5)
//!   (:domain marine)
//!   (:objects warship - object)
//!   (:init (detected warship) (not (approached warship)))
//!   (:goal (reported warship)))
//! ```
//!
//! Effects additionally accept `(forall (?v - ty) (not (pred ... ?v ...)))`.
//! `;` starts a comment that runs to the end of the line.

use thiserror::Error;

use super::{
    ActionSchema, Domain, Method, PredicateDecl, Problem, SchemaAtom, SchemaEffect, SchemaLiteral,
    Term, TypedName,
};
use crate::symbolic::{Atom, Literal, SymbolicState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: undeclared predicate `{name}`")]
    UndeclaredPredicate { line: usize, col: usize, name: String },
    #[error("{line}:{col}: predicate `{name}` expects {expected} arguments, got {got}")]
    ArityMismatch { line: usize, col: usize, name: String, expected: usize, got: usize },
    #[error("{line}:{col}: unknown object `{name}`")]
    UnknownObject { line: usize, col: usize, name: String },
    #[error("{line}:{col}: action `{action}` both adds and deletes `{literal}`")]
    InconsistentEffect { line: usize, col: usize, action: String, literal: String },
    #[error("{line}:{col}: unknown action `{name}`")]
    UnknownAction { line: usize, col: usize, name: String },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Sym(String),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, line, col });
                chars.next();
                col += 1;
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, line, col });
                chars.next();
                col += 1;
            }
            _ => {
                let start_col = col;
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.push(c);
                    chars.next();
                    col += 1;
                }
                out.push(Spanned { tok: Tok::Sym(sym), line, col: start_col });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: tokenize(text)?, pos: 0 })
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .or_else(|| self.toks.last().map(|t| (t.line, t.col)))
            .unwrap_or((1, 1))
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax { line, col, message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Result<Spanned, ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_lparen(&mut self) -> Result<(), ParseError> {
        match self.next()?.tok {
            Tok::LParen => Ok(()),
            other => Err(self.before_err(format!("expected `(`, found {}", show(&other)))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next()?.tok {
            Tok::RParen => Ok(()),
            other => Err(self.before_err(format!("expected `)`, found {}", show(&other)))),
        }
    }

    /// Error located at the token just consumed.
    fn before_err(&self, message: String) -> ParseError {
        let idx = self.pos.saturating_sub(1);
        let (line, col) =
            self.toks.get(idx).map(|t| (t.line, t.col)).unwrap_or((1, 1));
        ParseError::Syntax { line, col, message }
    }

    fn symbol(&mut self) -> Result<(String, usize, usize), ParseError> {
        let t = self.next()?;
        match t.tok {
            Tok::Sym(s) => Ok((s, t.line, t.col)),
            other => Err(ParseError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("expected a symbol, found {}", show(&other)),
            }),
        }
    }

    fn expect_symbol(&mut self, want: &str) -> Result<(), ParseError> {
        let (s, line, col) = self.symbol()?;
        if s.eq_ignore_ascii_case(want) {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected `{want}`, found `{s}`"),
            })
        }
    }

    fn at_rparen(&self) -> bool {
        matches!(self.peek(), Some(Tok::RParen))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Parses `name - type ...` lists; names without a type default to `object`.
    fn typed_names(&mut self) -> Result<Vec<TypedName>, ParseError> {
        let mut pending: Vec<String> = Vec::new();
        let mut out = Vec::new();
        while !self.at_rparen() {
            let (s, _, _) = self.symbol()?;
            if s == "-" {
                let (ty, line, col) = self.symbol()?;
                if pending.is_empty() {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        message: "type marker `-` with no preceding names".into(),
                    });
                }
                for name in pending.drain(..) {
                    out.push(TypedName { name, ty: ty.clone() });
                }
            } else {
                pending.push(s);
            }
        }
        for name in pending {
            out.push(TypedName { name, ty: "object".into() });
        }
        Ok(out)
    }

    /// `(pred t1 t2 ...)` — terms starting with `?` are variables.
    fn schema_atom(&mut self) -> Result<(SchemaAtom, usize, usize), ParseError> {
        self.expect_lparen()?;
        let (name, line, col) = self.symbol()?;
        let mut terms = Vec::new();
        while !self.at_rparen() {
            let (t, _, _) = self.symbol()?;
            terms.push(if let Some(v) = t.strip_prefix('?') {
                Term::Var(v.to_string())
            } else {
                Term::Const(t)
            });
        }
        self.expect_rparen()?;
        Ok((SchemaAtom { predicate: name, terms }, line, col))
    }

    /// A literal: `(pred ...)` or `(not (pred ...))`.
    fn schema_literal(&mut self) -> Result<(SchemaLiteral, usize, usize), ParseError> {
        let save = self.pos;
        self.expect_lparen()?;
        if let Some(Tok::Sym(s)) = self.peek() {
            if s == "not" {
                self.next()?;
                let (atom, line, col) = self.schema_atom()?;
                self.expect_rparen()?;
                return Ok((SchemaLiteral { atom, positive: false }, line, col));
            }
        }
        self.pos = save;
        let (atom, line, col) = self.schema_atom()?;
        Ok((SchemaLiteral { atom, positive: true }, line, col))
    }

    /// `(and lit*)` or a single literal.
    fn condition(&mut self) -> Result<Vec<(SchemaLiteral, usize, usize)>, ParseError> {
        let save = self.pos;
        self.expect_lparen()?;
        if let Some(Tok::Sym(s)) = self.peek() {
            if s == "and" {
                self.next()?;
                let mut lits = Vec::new();
                while !self.at_rparen() {
                    lits.push(self.schema_literal()?);
                }
                self.expect_rparen()?;
                return Ok(lits);
            }
        }
        self.pos = save;
        Ok(vec![self.schema_literal()?])
    }

    /// Effect item: a literal or `(forall (?v - ty) lit)`.
    fn effect_item(&mut self) -> Result<(SchemaEffect, usize, usize), ParseError> {
        let save = self.pos;
        self.expect_lparen()?;
        if let Some(Tok::Sym(s)) = self.peek() {
            if s == "forall" {
                self.next()?;
                self.expect_lparen()?;
                let (var, vline, vcol) = self.symbol()?;
                let var = var.strip_prefix('?').ok_or(ParseError::Syntax {
                    line: vline,
                    col: vcol,
                    message: "forall binder must be a `?variable`".into(),
                })?;
                self.expect_symbol("-")?;
                let (ty, _, _) = self.symbol()?;
                self.expect_rparen()?;
                let (literal, line, col) = self.schema_literal()?;
                self.expect_rparen()?;
                return Ok((SchemaEffect::Forall { var: var.to_string(), ty, literal }, line, col));
            }
        }
        self.pos = save;
        let (lit, line, col) = self.schema_literal()?;
        Ok((SchemaEffect::Literal(lit), line, col))
    }

    fn effects(&mut self) -> Result<Vec<(SchemaEffect, usize, usize)>, ParseError> {
        let save = self.pos;
        self.expect_lparen()?;
        if let Some(Tok::Sym(s)) = self.peek() {
            if s == "and" {
                self.next()?;
                let mut effs = Vec::new();
                while !self.at_rparen() {
                    effs.push(self.effect_item()?);
                }
                self.expect_rparen()?;
                return Ok(effs);
            }
        }
        self.pos = save;
        Ok(vec![self.effect_item()?])
    }
}

fn show(tok: &Tok) -> String {
    match tok {
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Sym(s) => format!("`{s}`"),
    }
}

/// Checks a schema literal against the declared predicates and visible
/// variable scope.
fn check_literal(
    domain_preds: &[PredicateDecl],
    scope: &[&str],
    constants: &[TypedName],
    lit: &SchemaLiteral,
    line: usize,
    col: usize,
) -> Result<(), ParseError> {
    let decl = domain_preds
        .iter()
        .find(|p| p.name == lit.atom.predicate)
        .ok_or_else(|| ParseError::UndeclaredPredicate {
            line,
            col,
            name: lit.atom.predicate.clone(),
        })?;
    if decl.params.len() != lit.atom.terms.len() {
        return Err(ParseError::ArityMismatch {
            line,
            col,
            name: lit.atom.predicate.clone(),
            expected: decl.params.len(),
            got: lit.atom.terms.len(),
        });
    }
    for term in &lit.atom.terms {
        match term {
            Term::Var(v) => {
                if !scope.contains(&v.as_str()) {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        message: format!("variable `?{v}` is not bound by the parameter list"),
                    });
                }
            }
            Term::Const(c) => {
                if !constants.iter().any(|k| &k.name == c) {
                    return Err(ParseError::UnknownObject { line, col, name: c.clone() });
                }
            }
        }
    }
    Ok(())
}

pub fn parse_domain(text: &str) -> Result<Domain, ParseError> {
    let mut p = Parser::new(text)?;
    p.expect_lparen()?;
    p.expect_symbol("define")?;
    p.expect_lparen()?;
    p.expect_symbol("domain")?;
    let (name, _, _) = p.symbol()?;
    p.expect_rparen()?;

    let mut domain = Domain {
        name,
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
        methods: Vec::new(),
    };

    while !p.at_rparen() {
        p.expect_lparen()?;
        let (section, sline, scol) = p.symbol()?;
        match section.as_str() {
            ":types" => {
                while !p.at_rparen() {
                    let (ty, _, _) = p.symbol()?;
                    domain.types.push(ty);
                }
                p.expect_rparen()?;
            }
            ":constants" => {
                domain.constants = p.typed_names()?;
                p.expect_rparen()?;
            }
            ":predicates" => {
                while !p.at_rparen() {
                    p.expect_lparen()?;
                    let (pname, _, _) = p.symbol()?;
                    let mut params = Vec::new();
                    for tn in p.typed_names()? {
                        let name = tn.name.strip_prefix('?').unwrap_or(&tn.name).to_string();
                        params.push(TypedName { name, ty: tn.ty });
                    }
                    p.expect_rparen()?;
                    domain.predicates.push(PredicateDecl { name: pname, params });
                }
                p.expect_rparen()?;
            }
            ":action" => {
                let (aname, _, _) = p.symbol()?;
                p.expect_symbol(":parameters")?;
                p.expect_lparen()?;
                let mut params = Vec::new();
                for tn in p.typed_names()? {
                    let name = tn.name.strip_prefix('?').unwrap_or(&tn.name).to_string();
                    params.push(TypedName { name, ty: tn.ty });
                }
                p.expect_rparen()?;
                p.expect_symbol(":precondition")?;
                let pres = p.condition()?;
                p.expect_symbol(":effect")?;
                let effs = p.effects()?;
                p.expect_rparen()?;

                let scope: Vec<&str> = params.iter().map(|t| t.name.as_str()).collect();
                for (lit, line, col) in &pres {
                    check_literal(&domain.predicates, &scope, &domain.constants, lit, *line, *col)?;
                }
                let mut adds: Vec<&SchemaAtom> = Vec::new();
                let mut dels: Vec<&SchemaAtom> = Vec::new();
                for (eff, line, col) in &effs {
                    match eff {
                        SchemaEffect::Literal(lit) => {
                            check_literal(
                                &domain.predicates,
                                &scope,
                                &domain.constants,
                                lit,
                                *line,
                                *col,
                            )?;
                            if lit.positive {
                                adds.push(&lit.atom);
                            } else {
                                dels.push(&lit.atom);
                            }
                        }
                        SchemaEffect::Forall { var, literal, .. } => {
                            let mut inner = scope.clone();
                            inner.push(var.as_str());
                            check_literal(
                                &domain.predicates,
                                &inner,
                                &domain.constants,
                                literal,
                                *line,
                                *col,
                            )?;
                        }
                    }
                }
                for (atom, line, col) in effs.iter().filter_map(|(e, l, c)| match e {
                    SchemaEffect::Literal(lit) if lit.positive => Some((&lit.atom, *l, *c)),
                    _ => None,
                }) {
                    if dels.contains(&atom) {
                        return Err(ParseError::InconsistentEffect {
                            line,
                            col,
                            action: aname.clone(),
                            literal: atom.predicate.clone(),
                        });
                    }
                }
                let _ = adds;

                domain.actions.push(ActionSchema {
                    name: aname,
                    params,
                    preconditions: pres.into_iter().map(|(l, _, _)| l).collect(),
                    effects: effs.into_iter().map(|(e, _, _)| e).collect(),
                });
            }
            ":method" => {
                let (mname, _, _) = p.symbol()?;
                p.expect_symbol(":task")?;
                let (task, tline, tcol) = p.schema_atom()?;
                p.expect_symbol(":precondition")?;
                let pres = p.condition()?;
                p.expect_symbol(":subtasks")?;
                p.expect_lparen()?;
                let mut subtasks = Vec::new();
                while !p.at_rparen() {
                    let (atom, _, _) = p.schema_atom()?;
                    subtasks.push(atom);
                }
                p.expect_rparen()?;
                p.expect_rparen()?;

                let scope: Vec<&str> = task
                    .terms
                    .iter()
                    .filter_map(|t| match t {
                        Term::Var(v) => Some(v.as_str()),
                        Term::Const(_) => None,
                    })
                    .collect();
                check_literal(
                    &domain.predicates,
                    &scope,
                    &domain.constants,
                    &SchemaLiteral { atom: task.clone(), positive: true },
                    tline,
                    tcol,
                )?;
                for (lit, line, col) in &pres {
                    check_literal(&domain.predicates, &scope, &domain.constants, lit, *line, *col)?;
                }
                domain.methods.push(Method {
                    name: mname,
                    task,
                    preconditions: pres.into_iter().map(|(l, _, _)| l).collect(),
                    subtasks,
                });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: sline,
                    col: scol,
                    message: format!("unknown domain section `{other}`"),
                })
            }
        }
    }
    p.expect_rparen()?;
    if !p.at_end() {
        return Err(p.err("trailing input after domain definition"));
    }
    Ok(domain)
}

pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, ParseError> {
    let mut p = Parser::new(text)?;
    p.expect_lparen()?;
    p.expect_symbol("define")?;
    p.expect_lparen()?;
    p.expect_symbol("problem")?;
    let (name, _, _) = p.symbol()?;
    p.expect_rparen()?;

    p.expect_lparen()?;
    p.expect_symbol(":domain")?;
    let (domain_name, _, _) = p.symbol()?;
    p.expect_rparen()?;

    let mut objects: Vec<TypedName> = Vec::new();
    if matches!(p.peek(), Some(Tok::LParen)) {
        let save = p.pos;
        p.expect_lparen()?;
        if let Some(Tok::Sym(s)) = p.peek() {
            if s == ":objects" {
                p.next()?;
                objects = p.typed_names()?;
                p.expect_rparen()?;
            } else {
                p.pos = save;
            }
        }
    }

    let known = |n: &str| {
        objects.iter().any(|o| o.name == n) || domain.constants.iter().any(|c| c.name == n)
    };

    let ground_literal = |p: &mut Parser| -> Result<Literal, ParseError> {
        let (lit, line, col) = p.schema_literal()?;
        let decl = domain.predicate(&lit.atom.predicate).ok_or_else(|| {
            ParseError::UndeclaredPredicate { line, col, name: lit.atom.predicate.clone() }
        })?;
        if decl.params.len() != lit.atom.terms.len() {
            return Err(ParseError::ArityMismatch {
                line,
                col,
                name: lit.atom.predicate.clone(),
                expected: decl.params.len(),
                got: lit.atom.terms.len(),
            });
        }
        let mut args = Vec::new();
        for t in &lit.atom.terms {
            match t {
                Term::Const(c) => {
                    if !known(c) {
                        return Err(ParseError::UnknownObject { line, col, name: c.clone() });
                    }
                    args.push(c.clone());
                }
                Term::Var(v) => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        message: format!("problem literals must be ground, found `?{v}`"),
                    })
                }
            }
        }
        Ok(Literal { atom: Atom { predicate: lit.atom.predicate, args }, positive: lit.positive })
    };

    p.expect_lparen()?;
    p.expect_symbol(":init")?;
    let mut init = SymbolicState::new();
    while !p.at_rparen() {
        init.insert(ground_literal(&mut p)?);
    }
    p.expect_rparen()?;

    p.expect_lparen()?;
    p.expect_symbol(":goal")?;
    let mut goal = SymbolicState::new();
    if !p.at_rparen() {
        let save = p.pos;
        p.expect_lparen()?;
        let is_and = matches!(p.peek(), Some(Tok::Sym(s)) if s == "and");
        p.pos = save;
        if is_and {
            p.expect_lparen()?;
            p.next()?; // and
            while !p.at_rparen() {
                goal.insert(ground_literal(&mut p)?);
            }
            p.expect_rparen()?;
        } else {
            goal.insert(ground_literal(&mut p)?);
        }
    }
    p.expect_rparen()?;
    p.expect_rparen()?;
    if !p.at_end() {
        return Err(p.err("trailing input after problem definition"));
    }

    Ok(Problem { name, domain_name, objects, init, goal })
}

/// Parses a plan file: one ground action per line, `name(arg, ...)` or bare
/// `name`. Blank lines and `#` comments are skipped.
pub fn parse_plan(text: &str, domain: &Domain) -> Result<Vec<(String, Vec<String>)>, ParseError> {
    let mut steps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, args) = match line.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or(ParseError::Syntax {
                    line: line_no,
                    col: raw.len(),
                    message: "missing closing `)`".into(),
                })?;
                let args: Vec<String> = inner
                    .split(',')
                    .map(|a| a.trim().to_string())
                    .filter(|a| !a.is_empty())
                    .collect();
                (name.trim().to_string(), args)
            }
            None => (line.to_string(), Vec::new()),
        };
        let schema = domain.action(&name).ok_or_else(|| ParseError::UnknownAction {
            line: line_no,
            col: 1,
            name: name.clone(),
        })?;
        if schema.params.len() != args.len() {
            return Err(ParseError::ArityMismatch {
                line: line_no,
                col: 1,
                name,
                expected: schema.params.len(),
                got: args.len(),
            });
        }
        steps.push((name, args));
    }
    Ok(steps)
}
