//! Formulas over models: propositions, community atoms, boolean connectives
//! and coalition-scoped temporal operators, with a text syntax, parser and
//! renderer.
//!
//! The core AST is deliberately small. `||`, `->` and the `F` (eventually)
//! form are accepted by the parser and desugared; `F f` becomes
//! `(true U f)` under the same coalition, and the renderer prints that shape
//! back as `F`. Coalitions are kept as agent-name sets and only resolved
//! against a concrete model when a formula is checked.
//!
//! Text grammar (precedence `!` > `&&` > `||` > `->`, `->` right-associative):
//!
//! ```text
//! formula  := or ("->" formula)?
//! or       := and ("||" and)*
//! and      := unary ("&&" unary)*
//! unary    := "!" unary | "<" names ">" temporal | atom
//! temporal := "X" unary | "G" unary | "F" unary | "(" formula "U" formula ")"
//! atom     := "true" | IDENT | IDENT "(" IDENT ("," IDENT)* ")"
//!           | "com" "(" "{" names "}" "," "{" names "}" ")" | "(" formula ")"
//! names    := (IDENT ("," IDENT)*)?
//! ```
//!
//! The call-shaped atom covers parameterized propositions such as
//! `reg(u1,m1)`; it is canonicalized without spaces.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A state formula. Temporal operators carry the coalition whose rules are
/// followed on the quantified computations; the empty coalition quantifies
/// over all computations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    Prop(String),
    /// Community atom over user names and middle-agent names; evaluated by
    /// a model-specific hook.
    Com(BTreeSet<String>, BTreeSet<String>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    /// `<A> X f`: on every computation where `A` follows its rules, `f`
    /// holds at the next state.
    Next(BTreeSet<String>, Box<Formula>),
    /// `<A> G f`: holds at every state of every such computation.
    Globally(BTreeSet<String>, Box<Formula>),
    /// `<A> (f U g)`: on every such computation, `g` eventually holds and
    /// `f` holds until then.
    Until(BTreeSet<String>, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn prop(name: &str) -> Formula {
        Formula::Prop(name.to_string())
    }

    // Constructor, not a `std::ops::Not` impl; `!f` on owned formulas
    // would hide the boxing.
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    /// `l || r`, desugared to `!(!l && !r)`.
    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::not(Formula::and(Formula::not(l), Formula::not(r)))
    }

    /// `l -> r`, desugared to `!(l && !r)`.
    pub fn implies(l: Formula, r: Formula) -> Formula {
        Formula::not(Formula::and(l, Formula::not(r)))
    }

    pub fn next(coalition: &[&str], f: Formula) -> Formula {
        Formula::Next(names(coalition), Box::new(f))
    }

    pub fn globally(coalition: &[&str], f: Formula) -> Formula {
        Formula::Globally(names(coalition), Box::new(f))
    }

    pub fn until(coalition: &[&str], f: Formula, g: Formula) -> Formula {
        Formula::Until(names(coalition), Box::new(f), Box::new(g))
    }

    /// `<A> F f`, desugared to `<A> (true U f)`.
    pub fn eventually(coalition: &[&str], f: Formula) -> Formula {
        Formula::until(coalition, Formula::True, f)
    }

    /// Every agent name referenced by some coalition or community atom.
    pub fn referenced_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::Prop(_) => {}
            Formula::Com(users, middles) => {
                out.extend(users.iter().cloned());
                out.extend(middles.iter().cloned());
            }
            Formula::Not(f) => f.collect_names(out),
            Formula::And(l, r) => {
                l.collect_names(out);
                r.collect_names(out);
            }
            Formula::Next(a, f) | Formula::Globally(a, f) => {
                out.extend(a.iter().cloned());
                f.collect_names(out);
            }
            Formula::Until(a, f, g) => {
                out.extend(a.iter().cloned());
                f.collect_names(out);
                g.collect_names(out);
            }
        }
    }
}

fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// A coalition-less temporal formula, the goal shape of full-contribution
/// queries: the coalition under test is supplied separately.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalGoal {
    Next(Formula),
    Globally(Formula),
    Until(Formula, Formula),
}

impl TemporalGoal {
    /// `F f` as a goal: `true U f`.
    pub fn eventually(f: Formula) -> TemporalGoal {
        TemporalGoal::Until(Formula::True, f)
    }

    /// Attaches a coalition, yielding the checkable formula.
    pub fn with_coalition(&self, coalition: &BTreeSet<String>) -> Formula {
        let a = coalition.clone();
        match self {
            TemporalGoal::Next(f) => Formula::Next(a, Box::new(f.clone())),
            TemporalGoal::Globally(f) => Formula::Globally(a, Box::new(f.clone())),
            TemporalGoal::Until(f, g) => {
                Formula::Until(a, Box::new(f.clone()), Box::new(g.clone()))
            }
        }
    }
}

/// Formula text syntax error with a byte position into the source.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("formula syntax error at byte {pos}: {message}")]
pub struct FormulaParseError {
    pub pos: usize,
    pub message: String,
}

/// Parses the formula grammar documented at the module level.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

/// Parses a coalition-less goal: `X f`, `G f`, `F f` or `f U g`.
pub fn parse_goal(text: &str) -> Result<TemporalGoal, FormulaParseError> {
    let mut p = Parser::new(text)?;
    let goal = match p.peek() {
        Some(Tok::Ident(head)) if head == "X" || head == "G" || head == "F" => {
            let head = head.clone();
            p.bump();
            let f = p.unary()?;
            match head.as_str() {
                "X" => TemporalGoal::Next(f),
                "G" => TemporalGoal::Globally(f),
                _ => TemporalGoal::eventually(f),
            }
        }
        _ => {
            let f = p.formula()?;
            p.expect_ident("U")?;
            let g = p.formula()?;
            TemporalGoal::Until(f, g)
        }
    };
    p.finish()?;
    Ok(goal)
}

/// Renders a formula; the output parses back to a structurally equal value.
pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    render_at(f, Prec::Or, &mut out);
    out
}

/// Renders a goal in the `parse_goal` syntax.
pub fn render_goal(goal: &TemporalGoal) -> String {
    match goal {
        TemporalGoal::Next(f) => format!("X {}", render_prec(f, Prec::Unary)),
        TemporalGoal::Globally(f) => format!("G {}", render_prec(f, Prec::Unary)),
        TemporalGoal::Until(f, g) if *f == Formula::True => {
            format!("F {}", render_prec(g, Prec::Unary))
        }
        TemporalGoal::Until(f, g) => format!(
            "{} U {}",
            render_prec(f, Prec::Or),
            render_prec(g, Prec::Or)
        ),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_formula(self))
    }
}

impl fmt::Display for TemporalGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_goal(self))
    }
}

/// All distinct subformulas in post-order: children strictly before parents,
/// the formula itself last. The checker evaluates in exactly this order.
pub fn subformulas(f: &Formula) -> Vec<Formula> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    collect_post_order(f, &mut out, &mut seen);
    out
}

fn collect_post_order(f: &Formula, out: &mut Vec<Formula>, seen: &mut BTreeSet<Formula>) {
    match f {
        Formula::True | Formula::Prop(_) | Formula::Com(_, _) => {}
        Formula::Not(x) => collect_post_order(x, out, seen),
        Formula::And(l, r) => {
            collect_post_order(l, out, seen);
            collect_post_order(r, out, seen);
        }
        Formula::Next(_, x) | Formula::Globally(_, x) => collect_post_order(x, out, seen),
        Formula::Until(_, l, r) => {
            collect_post_order(l, out, seen);
            collect_post_order(r, out, seen);
        }
    }
    if seen.insert(f.clone()) {
        out.push(f.clone());
    }
}

// ---------------------------------------------------------------------------
// Rendering

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,    // loosest; only relevant as a context, never produced
    And,
    Unary, // !, coalition forms
    Atom,
}

fn prec_of(f: &Formula) -> Prec {
    match f {
        Formula::True | Formula::Prop(_) | Formula::Com(_, _) => Prec::Atom,
        Formula::Not(_) | Formula::Next(_, _) | Formula::Globally(_, _) | Formula::Until(_, _, _) => {
            Prec::Unary
        }
        Formula::And(_, _) => Prec::And,
    }
}

fn render_prec(f: &Formula, min: Prec) -> String {
    let mut out = String::new();
    render_at(f, min, &mut out);
    out
}

fn render_at(f: &Formula, min: Prec, out: &mut String) {
    let wrap = prec_of(f) < min;
    if wrap {
        out.push('(');
    }
    match f {
        Formula::True => out.push_str("true"),
        Formula::Prop(name) => out.push_str(name),
        Formula::Com(users, middles) => {
            out.push_str("com({");
            out.push_str(&join(users));
            out.push_str("},{");
            out.push_str(&join(middles));
            out.push_str("})");
        }
        Formula::Not(x) => {
            out.push('!');
            render_at(x, Prec::Unary, out);
        }
        Formula::And(l, r) => {
            // Left association renders flat; right nesting keeps parens.
            render_at(l, Prec::And, out);
            out.push_str(" && ");
            render_at(r, Prec::Unary, out);
        }
        Formula::Next(a, x) => {
            render_coalition(a, out);
            out.push_str(" X ");
            render_at(x, Prec::Unary, out);
        }
        Formula::Globally(a, x) => {
            render_coalition(a, out);
            out.push_str(" G ");
            render_at(x, Prec::Unary, out);
        }
        Formula::Until(a, l, r) if **l == Formula::True => {
            render_coalition(a, out);
            out.push_str(" F ");
            render_at(r, Prec::Unary, out);
        }
        Formula::Until(a, l, r) => {
            render_coalition(a, out);
            out.push_str(" (");
            render_at(l, Prec::Or, out);
            out.push_str(" U ");
            render_at(r, Prec::Or, out);
            out.push(')');
        }
    }
    if wrap {
        out.push(')');
    }
}

fn render_coalition(a: &BTreeSet<String>, out: &mut String) {
    out.push('<');
    out.push_str(&join(a));
    out.push('>');
}

fn join(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Lt,
    Gt,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

fn err(pos: usize, message: impl Into<String>) -> FormulaParseError {
    FormulaParseError {
        pos,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, FormulaParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let single = |t: Tok| Some(t);
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '<' => single(Tok::Lt),
            '>' => single(Tok::Gt),
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            '{' => single(Tok::LBrace),
            '}' => single(Tok::RBrace),
            ',' => single(Tok::Comma),
            '!' => single(Tok::Bang),
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    toks.push((i, Tok::AndAnd));
                    i += 2;
                    continue;
                }
                return Err(err(i, "expected `&&`"));
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    toks.push((i, Tok::OrOr));
                    i += 2;
                    continue;
                }
                return Err(err(i, "expected `||`"));
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((i, Tok::Arrow));
                    i += 2;
                    continue;
                }
                return Err(err(i, "expected `->`"));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => return Err(err(i, format!("unexpected character `{c}`"))),
        };
        if let Some(t) = tok {
            toks.push((i, t));
            i += 1;
        }
    }
    Ok(toks)
}

impl Parser {
    fn new(src: &str) -> Result<Parser, FormulaParseError> {
        let toks = lex(src)?;
        if toks.is_empty() {
            return Err(err(0, "empty input"));
        }
        Ok(Parser {
            toks,
            at: 0,
            end: src.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), FormulaParseError> {
        if self.eat(want) {
            Ok(())
        } else {
            Err(err(self.pos(), format!("expected {what}")))
        }
    }

    fn expect_ident(&mut self, want: &str) -> Result<(), FormulaParseError> {
        match self.peek() {
            Some(Tok::Ident(name)) if name == want => {
                self.at += 1;
                Ok(())
            }
            _ => Err(err(self.pos(), format!("expected `{want}`"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FormulaParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Ident(name)) => Ok(name),
            _ => Err(err(pos, format!("expected {what}"))),
        }
    }

    fn finish(&self) -> Result<(), FormulaParseError> {
        if self.at == self.toks.len() {
            Ok(())
        } else {
            Err(err(self.pos(), "trailing input after formula"))
        }
    }

    fn formula(&mut self) -> Result<Formula, FormulaParseError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, FormulaParseError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, FormulaParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, FormulaParseError> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.peek() == Some(&Tok::Lt) {
            return self.coalition_form();
        }
        self.atom()
    }

    fn coalition_form(&mut self) -> Result<Formula, FormulaParseError> {
        self.expect(&Tok::Lt, "`<`")?;
        let coalition = self.name_list(&Tok::Gt)?;
        self.expect(&Tok::Gt, "`>`")?;
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Ident(head)) if head == "X" => {
                Ok(Formula::Next(coalition, Box::new(self.unary()?)))
            }
            Some(Tok::Ident(head)) if head == "G" => {
                Ok(Formula::Globally(coalition, Box::new(self.unary()?)))
            }
            Some(Tok::Ident(head)) if head == "F" => Ok(Formula::Until(
                coalition,
                Box::new(Formula::True),
                Box::new(self.unary()?),
            )),
            Some(Tok::LParen) => {
                let f = self.formula()?;
                self.expect_ident("U")?;
                let g = self.formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Formula::Until(coalition, Box::new(f), Box::new(g)))
            }
            _ => Err(err(pos, "expected `X`, `G`, `F` or `(f U g)` after coalition")),
        }
    }

    /// Comma-separated identifiers, possibly empty, up to (not consuming)
    /// the closing token.
    fn name_list(&mut self, close: &Tok) -> Result<BTreeSet<String>, FormulaParseError> {
        let mut out = BTreeSet::new();
        if self.peek() == Some(close) {
            return Ok(out);
        }
        loop {
            out.insert(self.ident("a name")?);
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    fn atom(&mut self) -> Result<Formula, FormulaParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::LParen) => {
                let f = self.formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(name)) if name == "true" => Ok(Formula::True),
            Some(Tok::Ident(name)) if name == "com" => {
                self.expect(&Tok::LParen, "`(`")?;
                self.expect(&Tok::LBrace, "`{`")?;
                let users = self.name_list(&Tok::RBrace)?;
                self.expect(&Tok::RBrace, "`}`")?;
                self.expect(&Tok::Comma, "`,`")?;
                self.expect(&Tok::LBrace, "`{`")?;
                let middles = self.name_list(&Tok::RBrace)?;
                self.expect(&Tok::RBrace, "`}`")?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Formula::Com(users, middles))
            }
            Some(Tok::Ident(name)) => {
                // Call-shaped proposition: canonicalize `p(x, y)` to `p(x,y)`.
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Formula::Prop(name));
                }
                self.bump();
                let mut args = vec![self.ident("an argument name")?];
                while self.eat(&Tok::Comma) {
                    args.push(self.ident("an argument name")?);
                }
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Formula::Prop(format!("{name}({})", args.join(","))))
            }
            _ => Err(err(pos, "expected a formula")),
        }
    }
}
