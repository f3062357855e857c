//! Lexer, lenient paren repair and s-expression interpretation for the
//! PDDL subset.
//!
//! Atoms are accepted in both list style `(have coarse_pose)` and
//! juxtaposition style `have(coarse_pose)`. Lenient mode repairs missing
//! close parens at block boundaries (`(:action`, `(:init`, `(:goal`,
//! `(:neural`) and before the section keys of an action body; strict mode
//! rejects unbalanced input.

use super::{
    ActionSchema, Atom, Domain, Literal, PddlError, Pos, PredicateInfo, PredicateKind, Problem,
};
use std::collections::HashMap;

/// Object constant used to pad short atoms when lenient arity
/// reconciliation promotes a predicate to a larger arity.
const DEFAULT_OBJECT: &str = "sensor";

#[derive(Debug, Clone)]
enum Tok {
    LParen(Pos),
    RParen(Pos),
    Sym(String, Pos),
}

impl Tok {
    fn pos(&self) -> Pos {
        match self {
            Tok::LParen(p) | Tok::RParen(p) => *p,
            Tok::Sym(_, p) => *p,
        }
    }
}

fn lex(text: &str) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
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
            '(' => {
                chars.next();
                col += 1;
                toks.push(Tok::LParen(pos));
            }
            ')' => {
                chars.next();
                col += 1;
                toks.push(Tok::RParen(pos));
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            _ => {
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '(' || c == ')' || c == ';' || c.is_whitespace() {
                        break;
                    }
                    sym.push(c);
                    chars.next();
                    col += 1;
                }
                toks.push(Tok::Sym(sym, pos));
            }
        }
    }
    toks
}

fn is_block_head(s: &str) -> bool {
    matches!(s, ":action" | ":init" | ":goal" | ":neural")
}

fn is_section_key(s: &str) -> bool {
    matches!(
        s,
        ":param" | ":parameters" | ":pre" | ":precondition" | ":eff" | ":effect"
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Define,
    Block,
    Action,
    Plain,
}

/// Inserts close parens so that every block is well nested. Extra close
/// parens (none expected in practice) are dropped.
fn repair(tokens: Vec<Tok>) -> Vec<Tok> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut stack: Vec<Ctx> = Vec::new();
    let end = tokens.last().map(Tok::pos).unwrap_or(Pos { line: 1, col: 1 });
    let mut iter = tokens.iter().enumerate().peekable();
    while let Some((i, tok)) = iter.next() {
        match tok {
            Tok::LParen(p) => {
                let head = match tokens.get(i + 1) {
                    Some(Tok::Sym(s, _)) => Some(s.to_ascii_lowercase()),
                    _ => None,
                };
                let ctx = match head.as_deref() {
                    Some(":action") => Ctx::Action,
                    Some(h) if is_block_head(h) => Ctx::Block,
                    Some("define") => Ctx::Define,
                    _ => Ctx::Plain,
                };
                if ctx == Ctx::Action || ctx == Ctx::Block {
                    while matches!(stack.last(), Some(Ctx::Plain | Ctx::Action | Ctx::Block)) {
                        out.push(Tok::RParen(*p));
                        stack.pop();
                    }
                }
                stack.push(ctx);
                out.push(tok.clone());
            }
            Tok::RParen(_) => {
                if stack.pop().is_some() {
                    out.push(tok.clone());
                }
            }
            Tok::Sym(s, p) => {
                if is_section_key(&s.to_ascii_lowercase()) && stack.contains(&Ctx::Action) {
                    while matches!(stack.last(), Some(Ctx::Plain)) {
                        out.push(Tok::RParen(*p));
                        stack.pop();
                    }
                }
                out.push(tok.clone());
            }
        }
    }
    while stack.pop().is_some() {
        out.push(Tok::RParen(end));
    }
    out
}

#[derive(Debug, Clone)]
enum Sexp {
    Sym(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Sym(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn read_sexps(tokens: &[Tok]) -> Result<Vec<Sexp>, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for tok in tokens {
        match tok {
            Tok::LParen(p) => stack.push((Vec::new(), *p)),
            Tok::RParen(p) => match stack.pop() {
                Some((items, open)) => {
                    let list = Sexp::List(items, open);
                    match stack.last_mut() {
                        Some((parent, _)) => parent.push(list),
                        None => top.push(list),
                    }
                }
                None => {
                    return Err(PddlError::Syntax {
                        pos: *p,
                        expected: "`(` before `)`".into(),
                    })
                }
            },
            Tok::Sym(s, p) => {
                let sym = Sexp::Sym(s.clone(), *p);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(sym),
                    None => top.push(sym),
                }
            }
        }
    }
    if let Some((_, open)) = stack.last() {
        return Err(PddlError::Syntax {
            pos: *open,
            expected: "matching `)`".into(),
        });
    }
    Ok(top)
}

fn head_sym(items: &[Sexp]) -> Option<&str> {
    match items.first() {
        Some(Sexp::Sym(s, _)) => Some(s.as_str()),
        _ => None,
    }
}

fn syms_only(items: &[Sexp]) -> Option<Vec<String>> {
    items
        .iter()
        .map(|e| match e {
            Sexp::Sym(s, _) => Some(s.clone()),
            _ => None,
        })
        .collect()
}

/// Parses one literal unit. List atoms flatten nested juxtaposition style:
/// `(target_aim (sensor))` and `(target_aim sensor)` are the same atom.
fn literal_from_unit(expr: &Sexp) -> Result<Literal, PddlError> {
    match expr {
        Sexp::Sym(s, _) => Ok(Literal::pos(Atom {
            predicate: s.clone(),
            args: Vec::new(),
        })),
        Sexp::List(items, pos) => {
            let head = head_sym(items).ok_or_else(|| PddlError::Syntax {
                pos: *pos,
                expected: "predicate name".into(),
            })?;
            if head.eq_ignore_ascii_case("not") {
                let inner = literals_from_seq(&items[1..])?;
                if inner.len() != 1 {
                    return Err(PddlError::Syntax {
                        pos: *pos,
                        expected: "exactly one literal inside (not ...)".into(),
                    });
                }
                let lit = inner.into_iter().next().unwrap();
                return Ok(Literal {
                    negated: !lit.negated,
                    atom: lit.atom,
                });
            }
            if head.eq_ignore_ascii_case("and") {
                return Err(PddlError::Syntax {
                    pos: *pos,
                    expected: "literal, not nested (and ...)".into(),
                });
            }
            let mut args = Vec::new();
            for item in &items[1..] {
                match item {
                    Sexp::Sym(s, _) => args.push(s.clone()),
                    Sexp::List(sub, p) => match syms_only(sub) {
                        Some(mut syms) => args.append(&mut syms),
                        None => {
                            return Err(PddlError::Syntax {
                                pos: *p,
                                expected: "argument list of plain identifiers".into(),
                            })
                        }
                    },
                }
            }
            Ok(Literal::pos(Atom {
                predicate: head.to_string(),
                args,
            }))
        }
    }
}

/// Parses a sequence of literal units, merging juxtaposed pairs such as
/// `have (coarse_pose)` into one atom.
fn literals_from_seq(items: &[Sexp]) -> Result<Vec<Literal>, PddlError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        if let Sexp::Sym(s, _) = &items[i] {
            if let Some(Sexp::List(sub, _)) = items.get(i + 1) {
                if let Some(args) = syms_only(sub) {
                    out.push(Literal::pos(Atom {
                        predicate: s.clone(),
                        args,
                    }));
                    i += 2;
                    continue;
                }
            }
        }
        out.push(literal_from_unit(&items[i])?);
        i += 1;
    }
    Ok(out)
}

/// Parses the value of a precondition/effect/init/goal, unwrapping a
/// single top-level `(and ...)`.
fn literal_set(items: &[Sexp]) -> Result<Vec<Literal>, PddlError> {
    if items.len() == 1 {
        if let Sexp::List(inner, _) = &items[0] {
            if head_sym(inner).is_some_and(|h| h.eq_ignore_ascii_case("and")) {
                return Ok(dedup(literals_from_seq(&inner[1..])?));
            }
        }
    }
    Ok(dedup(literals_from_seq(items)?))
}

fn dedup(literals: Vec<Literal>) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::with_capacity(literals.len());
    for lit in literals {
        if !out.contains(&lit) {
            out.push(lit);
        }
    }
    out
}

fn parse_action(items: &[Sexp], pos: Pos) -> Result<ActionSchema, PddlError> {
    let name = match items.get(1) {
        Some(Sexp::Sym(s, _)) => s.clone(),
        _ => {
            return Err(PddlError::Syntax {
                pos,
                expected: "action name after :action".into(),
            })
        }
    };
    let mut params = None;
    let mut pre = None;
    let mut eff = None;
    let mut i = 2;
    while i < items.len() {
        let key = match &items[i] {
            Sexp::Sym(s, _) => s.to_ascii_lowercase(),
            other => {
                return Err(PddlError::Syntax {
                    pos: other.pos(),
                    expected: ":parameters, :precondition or :effect".into(),
                })
            }
        };
        let value = items.get(i + 1).ok_or_else(|| PddlError::Syntax {
            pos: items[i].pos(),
            expected: format!("value after {}", key),
        })?;
        match key.as_str() {
            ":param" | ":parameters" => {
                let list = match value {
                    Sexp::List(sub, p) => syms_only(sub).ok_or_else(|| PddlError::Syntax {
                        pos: *p,
                        expected: "parameter identifiers".into(),
                    })?,
                    Sexp::Sym(_, p) => {
                        return Err(PddlError::Syntax {
                            pos: *p,
                            expected: "parenthesized parameter list".into(),
                        })
                    }
                };
                set_once(&mut params, list, items[i].pos(), "one :parameters")?;
            }
            ":pre" | ":precondition" => {
                let lits = literal_set(std::slice::from_ref(value))?;
                set_once(&mut pre, lits, items[i].pos(), "one :precondition")?;
            }
            ":eff" | ":effect" => {
                let lits = literal_set(std::slice::from_ref(value))?;
                set_once(&mut eff, lits, items[i].pos(), "one :effect")?;
            }
            _ => {
                return Err(PddlError::Syntax {
                    pos: items[i].pos(),
                    expected: ":parameters, :precondition or :effect".into(),
                })
            }
        }
        i += 2;
    }
    Ok(ActionSchema {
        name,
        params: params.unwrap_or_default(),
        pre: pre.unwrap_or_default(),
        eff: eff.unwrap_or_default(),
    })
}

fn set_once<T>(slot: &mut Option<T>, value: T, pos: Pos, what: &str) -> Result<(), PddlError> {
    if slot.is_some() {
        return Err(PddlError::Syntax {
            pos,
            expected: format!("at most {}", what),
        });
    }
    *slot = Some(value);
    Ok(())
}

/// Top-level blocks of a source file. A `(define ...)` wrapper is
/// unwrapped; bare block lists (the shorthand listing style) are accepted
/// as-is.
fn blocks_of(sexps: &[Sexp]) -> Result<(Option<String>, Vec<&Sexp>), PddlError> {
    if sexps.len() == 1 {
        if let Sexp::List(items, _) = &sexps[0] {
            if head_sym(items).is_some_and(|h| h.eq_ignore_ascii_case("define")) {
                let mut name = None;
                let mut blocks = Vec::new();
                for item in &items[1..] {
                    if let Sexp::List(sub, _) = item {
                        if let Some(h) = head_sym(sub) {
                            if h.eq_ignore_ascii_case("domain") || h.eq_ignore_ascii_case("problem")
                            {
                                if let Some(Sexp::Sym(n, _)) = sub.get(1) {
                                    name = Some(n.clone());
                                }
                                continue;
                            }
                        }
                    }
                    blocks.push(item);
                }
                return Ok((name, blocks));
            }
        }
    }
    Ok((None, sexps.iter().collect()))
}

/// Parses a domain from PDDL-subset source. `lenient` enables paren
/// repair and arity reconciliation (short atoms padded with the default
/// object); strict mode rejects both.
pub fn parse_domain(text: &str, lenient: bool) -> Result<Domain, PddlError> {
    let mut tokens = lex(text);
    if lenient {
        tokens = repair(tokens);
    }
    let sexps = read_sexps(&tokens)?;
    let (name, blocks) = blocks_of(&sexps)?;

    let mut actions: Vec<ActionSchema> = Vec::new();
    let mut neural: Vec<String> = Vec::new();
    for block in blocks {
        let (items, pos) = match block {
            Sexp::List(items, pos) => (items, *pos),
            Sexp::Sym(_, pos) => {
                return Err(PddlError::Syntax {
                    pos: *pos,
                    expected: "a parenthesized block".into(),
                })
            }
        };
        let head = head_sym(items)
            .map(|h| h.to_ascii_lowercase())
            .ok_or(PddlError::Syntax {
                pos,
                expected: ":action, :neural, :init or :goal".into(),
            })?;
        match head.as_str() {
            ":action" => actions.push(parse_action(items, pos)?),
            ":neural" => {
                let names = syms_only(&items[1..]).ok_or(PddlError::Syntax {
                    pos,
                    expected: "predicate names after :neural".into(),
                })?;
                neural.extend(names);
            }
            ":init" | ":goal" => {} // task blocks; handled by parse_problem
            _ => {
                return Err(PddlError::Syntax {
                    pos,
                    expected: ":action, :neural, :init or :goal".into(),
                })
            }
        }
    }

    for (i, a) in actions.iter().enumerate() {
        if actions[..i].iter().any(|b| b.name.eq_ignore_ascii_case(&a.name)) {
            return Err(PddlError::DuplicateAction(a.name.clone()));
        }
    }

    reconcile_arities(&mut actions, lenient)?;
    let predicates = predicate_table(&actions, &neural)?;
    let domain = Domain {
        name: name.unwrap_or_else(|| "disassembly".to_string()),
        actions,
        predicates,
    };
    validate_actions(&domain)?;
    Ok(domain)
}

fn action_atoms_mut(actions: &mut [ActionSchema]) -> impl Iterator<Item = &mut Atom> {
    actions
        .iter_mut()
        .flat_map(|a| a.pre.iter_mut().chain(a.eff.iter_mut()))
        .map(|l| &mut l.atom)
}

/// Fixed arity per predicate, declaration-by-first-use. Lenient mode
/// promotes to the largest observed arity and pads short atoms with the
/// default object; strict mode rejects the first conflicting use.
fn reconcile_arities(actions: &mut [ActionSchema], lenient: bool) -> Result<(), PddlError> {
    let mut first: HashMap<String, usize> = HashMap::new();
    let mut max: HashMap<String, usize> = HashMap::new();
    for action in actions.iter() {
        for lit in action.pre.iter().chain(action.eff.iter()) {
            let key = lit.atom.predicate.to_ascii_lowercase();
            let arity = lit.atom.arity();
            match first.get(&key) {
                None => {
                    first.insert(key.clone(), arity);
                    max.insert(key, arity);
                }
                Some(&expected) if expected != arity => {
                    if !lenient {
                        return Err(PddlError::ArityMismatch {
                            name: lit.atom.predicate.clone(),
                            expected,
                            found: arity,
                        });
                    }
                    let m = max.entry(key).or_insert(arity);
                    *m = (*m).max(arity);
                }
                Some(_) => {}
            }
        }
    }
    if lenient {
        for atom in action_atoms_mut(actions) {
            let target = max[&atom.predicate.to_ascii_lowercase()];
            while atom.arity() < target {
                atom.args.push(DEFAULT_OBJECT.to_string());
            }
        }
        // padding can create duplicates inside a literal set
        for action in actions.iter_mut() {
            action.pre = dedup(std::mem::take(&mut action.pre));
            action.eff = dedup(std::mem::take(&mut action.eff));
        }
    }
    Ok(())
}

fn predicate_table(
    actions: &[ActionSchema],
    neural: &[String],
) -> Result<Vec<PredicateInfo>, PddlError> {
    let mut table: Vec<PredicateInfo> = Vec::new();
    for action in actions {
        for lit in action.pre.iter().chain(action.eff.iter()) {
            if !table
                .iter()
                .any(|p| p.name.eq_ignore_ascii_case(&lit.atom.predicate))
            {
                table.push(PredicateInfo {
                    name: lit.atom.predicate.clone(),
                    arity: lit.atom.arity(),
                    kind: PredicateKind::Symbolic,
                });
            }
        }
    }
    let mut seen: Vec<String> = Vec::new();
    for name in neural {
        if seen.iter().any(|s| s.eq_ignore_ascii_case(name)) {
            return Err(PddlError::DuplicateKindDeclaration(name.clone()));
        }
        seen.push(name.clone());
        match table.iter_mut().find(|p| p.name.eq_ignore_ascii_case(name)) {
            Some(info) => info.kind = PredicateKind::Neural,
            None => return Err(PddlError::UnknownPredicate(name.clone())),
        }
    }
    Ok(table)
}

fn validate_actions(domain: &Domain) -> Result<(), PddlError> {
    for action in &domain.actions {
        for (place, lits) in [("precondition", &action.pre), ("effect", &action.eff)] {
            for lit in lits {
                if lits.iter().any(|other| {
                    other.atom == lit.atom && other.negated != lit.negated
                }) {
                    return Err(PddlError::ContradictoryLiterals {
                        action: action.name.clone(),
                        place,
                        atom: lit.atom.to_string(),
                    });
                }
                for arg in &lit.atom.args {
                    if arg.starts_with('?') && !action.params.contains(arg) {
                        return Err(PddlError::UnboundVariable {
                            action: action.name.clone(),
                            var: arg.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Parses init/goal blocks and resolves every atom against the domain's
/// predicate table.
pub fn parse_problem(text: &str, domain: &Domain, lenient: bool) -> Result<Problem, PddlError> {
    let mut tokens = lex(text);
    if lenient {
        tokens = repair(tokens);
    }
    let sexps = read_sexps(&tokens)?;
    let (_, blocks) = blocks_of(&sexps)?;

    let mut init: Vec<Literal> = Vec::new();
    let mut goal: Vec<Literal> = Vec::new();
    for block in blocks {
        let items = match block {
            Sexp::List(items, _) => items,
            Sexp::Sym(_, _) => continue,
        };
        match head_sym(items).map(|h| h.to_ascii_lowercase()).as_deref() {
            Some(":init") => init.extend(literal_set(&items[1..])?),
            Some(":goal") => goal.extend(literal_set(&items[1..])?),
            _ => {} // action and other blocks are the domain's business
        }
    }
    let init = dedup(init);
    let goal = dedup(goal);

    for lit in init.iter().chain(goal.iter()) {
        let info = domain
            .predicate(&lit.atom.predicate)
            .ok_or_else(|| PddlError::UnknownPredicate(lit.atom.predicate.clone()))?;
        if info.arity != lit.atom.arity() {
            return Err(PddlError::ArityMismatch {
                name: lit.atom.predicate.clone(),
                expected: info.arity,
                found: lit.atom.arity(),
            });
        }
    }
    for lit in &init {
        if init
            .iter()
            .any(|other| other.atom == lit.atom && other.negated != lit.negated)
        {
            return Err(PddlError::InconsistentInit(lit.atom.to_string()));
        }
    }
    if goal.is_empty() {
        return Err(PddlError::EmptyGoal);
    }
    Ok(Problem { init, goal })
}
