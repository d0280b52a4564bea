//! Concurrent game structures equipped with communication-based local rules.
//!
//! A [`Cgs`] is a finite multi-agent transition system: every agent picks one
//! of its available actions simultaneously and the joint action vector
//! determines the unique successor state. A [`Somas`] pairs a structure with
//! per-agent internal messages ([`Message`]) and local rules ([`LocalRule`]):
//! in every state an agent queries the partners named by `tau`, evaluates the
//! guarded action table `gamma` against the received messages, and the first
//! true guard prescribes its action.
//!
//! All types are plain immutable data; every operation here is a pure read,
//! so a loaded model can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Index of an agent within a model, dense in `[0, agent_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

/// Index of a state within a model, dense in `[0, state_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// Index of an action name in the model's action pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

/// What an agent can communicate at a state: a number (an urgency, a
/// done-flag, a counter) or a set of propositions it vouches for.
///
/// A proposition-set payload must be a subset of the labeling of the state
/// where it is emitted; `validate` enforces this.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Int(i64),
    Props(BTreeSet<String>),
}

impl Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::Int(_) => "int",
            Message::Props(_) => "props",
        }
    }
}

/// Comparison operator usable between integer message payloads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn holds(self, l: i64, r: i64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Eq => l == r,
            CmpOp::Ge => l >= r,
            CmpOp::Gt => l > r,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        })
    }
}

/// Boolean condition over the messages an agent received.
///
/// Concrete serializable form of a rule's decision logic: comparisons between
/// integer payloads, membership tests on proposition payloads, and the usual
/// boolean connectives. Every sender referenced must belong to the rule's
/// `tau` at that state and payload kinds must match; `validate` checks both
/// statically, so evaluation on a valid model cannot fail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GuardExpr {
    True,
    /// `msg(a) OP msg(b)` over integer payloads.
    CmpMsg(AgentId, CmpOp, AgentId),
    /// `msg(a) OP n` over an integer payload and a constant.
    CmpConst(AgentId, CmpOp, i64),
    /// `has(msg(a), p)`: proposition `p` occurs in `a`'s proposition payload.
    Has(AgentId, String),
    Not(Box<GuardExpr>),
    And(Box<GuardExpr>, Box<GuardExpr>),
    Or(Box<GuardExpr>, Box<GuardExpr>),
}

impl GuardExpr {
    /// Evaluates against the received messages, keyed by sender.
    ///
    /// Errors describe the ill-typed atom; they can only occur on models that
    /// would not pass validation.
    pub fn eval(&self, messages: &BTreeMap<AgentId, Message>) -> Result<bool, String> {
        let int_of = |a: AgentId| -> Result<i64, String> {
            match messages.get(&a) {
                Some(Message::Int(n)) => Ok(*n),
                Some(m) => Err(format!(
                    "msg({}) has kind {}, expected int",
                    a.0,
                    m.kind()
                )),
                None => Err(format!("msg({}) not received (sender not in tau)", a.0)),
            }
        };
        match self {
            GuardExpr::True => Ok(true),
            GuardExpr::CmpMsg(a, op, b) => Ok(op.holds(int_of(*a)?, int_of(*b)?)),
            GuardExpr::CmpConst(a, op, n) => Ok(op.holds(int_of(*a)?, *n)),
            GuardExpr::Has(a, p) => match messages.get(a) {
                Some(Message::Props(ps)) => Ok(ps.contains(p)),
                Some(m) => Err(format!(
                    "msg({}) has kind {}, expected props",
                    a.0,
                    m.kind()
                )),
                None => Err(format!("msg({}) not received (sender not in tau)", a.0)),
            },
            GuardExpr::Not(g) => Ok(!g.eval(messages)?),
            GuardExpr::And(l, r) => Ok(l.eval(messages)? && r.eval(messages)?),
            GuardExpr::Or(l, r) => Ok(l.eval(messages)? || r.eval(messages)?),
        }
    }

    /// All senders referenced by atoms of this expression.
    pub fn senders(&self) -> BTreeSet<AgentId> {
        let mut out = BTreeSet::new();
        self.collect_senders(&mut out);
        out
    }

    fn collect_senders(&self, out: &mut BTreeSet<AgentId>) {
        match self {
            GuardExpr::True => {}
            GuardExpr::CmpMsg(a, _, b) => {
                out.insert(*a);
                out.insert(*b);
            }
            GuardExpr::CmpConst(a, _, _) | GuardExpr::Has(a, _) => {
                out.insert(*a);
            }
            GuardExpr::Not(g) => g.collect_senders(out),
            GuardExpr::And(l, r) | GuardExpr::Or(l, r) => {
                l.collect_senders(out);
                r.collect_senders(out);
            }
        }
    }
}

/// Guard expression syntax error with a byte position into the source text.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("guard syntax error at byte {pos}: {message}")]
pub struct GuardParseError {
    pub pos: usize,
    pub message: String,
}

mod guard_text {
    //! Recursive-descent parser for the guard expression language:
    //! `true | msg(N) OP msg(N) | msg(N) OP INT | has(msg(N), P) | !E |
    //! E && E | E || E | (E)` with `OP ∈ {<, <=, ==, >=, >}`.

    use super::{AgentId, CmpOp, GuardExpr, GuardParseError};

    #[derive(Clone, Debug, PartialEq)]
    enum Tok {
        Ident(String),
        Int(i64),
        LParen,
        RParen,
        Comma,
        Bang,
        AndAnd,
        OrOr,
        Op(CmpOp),
    }

    fn lex(src: &str) -> Result<Vec<(usize, Tok)>, GuardParseError> {
        let bytes = src.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            match c {
                ' ' | '\t' | '\n' | '\r' => i += 1,
                '(' => {
                    toks.push((i, Tok::LParen));
                    i += 1;
                }
                ')' => {
                    toks.push((i, Tok::RParen));
                    i += 1;
                }
                ',' => {
                    toks.push((i, Tok::Comma));
                    i += 1;
                }
                '!' => {
                    toks.push((i, Tok::Bang));
                    i += 1;
                }
                '&' => {
                    if bytes.get(i + 1) == Some(&b'&') {
                        toks.push((i, Tok::AndAnd));
                        i += 2;
                    } else {
                        return Err(err(i, "expected `&&`"));
                    }
                }
                '|' => {
                    if bytes.get(i + 1) == Some(&b'|') {
                        toks.push((i, Tok::OrOr));
                        i += 2;
                    } else {
                        return Err(err(i, "expected `||`"));
                    }
                }
                '<' | '>' | '=' => {
                    let two = bytes.get(i + 1) == Some(&b'=');
                    let op = match (c, two) {
                        ('<', true) => CmpOp::Le,
                        ('<', false) => CmpOp::Lt,
                        ('>', true) => CmpOp::Ge,
                        ('>', false) => CmpOp::Gt,
                        ('=', true) => CmpOp::Eq,
                        ('=', false) => return Err(err(i, "expected `==`")),
                        _ => unreachable!(),
                    };
                    toks.push((i, Tok::Op(op)));
                    i += if two { 2 } else { 1 };
                }
                '-' | '0'..='9' => {
                    let start = i;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let text = &src[start..i];
                    let n = text
                        .parse::<i64>()
                        .map_err(|_| err(start, "malformed integer"))?;
                    toks.push((start, Tok::Int(n)));
                }
                _ if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < bytes.len()
                        && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    toks.push((start, Tok::Ident(src[start..i].to_string())));
                }
                _ => return Err(err(i, &format!("unexpected character `{c}`"))),
            }
        }
        Ok(toks)
    }

    fn err(pos: usize, message: &str) -> GuardParseError {
        GuardParseError {
            pos,
            message: message.to_string(),
        }
    }

    struct Parser<'a, R: Fn(&str) -> Option<AgentId>> {
        toks: Vec<(usize, Tok)>,
        at: usize,
        end: usize,
        resolve: &'a R,
    }

    impl<R: Fn(&str) -> Option<AgentId>> Parser<'_, R> {
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

        fn expect(&mut self, want: &Tok, what: &str) -> Result<(), GuardParseError> {
            if self.peek() == Some(want) {
                self.at += 1;
                Ok(())
            } else {
                Err(err(self.pos(), &format!("expected {what}")))
            }
        }

        fn or(&mut self) -> Result<GuardExpr, GuardParseError> {
            let mut lhs = self.and()?;
            while self.peek() == Some(&Tok::OrOr) {
                self.at += 1;
                let rhs = self.and()?;
                lhs = GuardExpr::Or(Box::new(lhs), Box::new(rhs));
            }
            Ok(lhs)
        }

        fn and(&mut self) -> Result<GuardExpr, GuardParseError> {
            let mut lhs = self.unary()?;
            while self.peek() == Some(&Tok::AndAnd) {
                self.at += 1;
                let rhs = self.unary()?;
                lhs = GuardExpr::And(Box::new(lhs), Box::new(rhs));
            }
            Ok(lhs)
        }

        fn unary(&mut self) -> Result<GuardExpr, GuardParseError> {
            if self.peek() == Some(&Tok::Bang) {
                self.at += 1;
                return Ok(GuardExpr::Not(Box::new(self.unary()?)));
            }
            self.atom()
        }

        fn msg_agent(&mut self) -> Result<AgentId, GuardParseError> {
            // Caller consumed the `msg` identifier.
            self.expect(&Tok::LParen, "`(` after msg")?;
            let pos = self.pos();
            let name = match self.bump() {
                Some(Tok::Ident(n)) => n,
                _ => return Err(err(pos, "expected agent name")),
            };
            let agent = (self.resolve)(&name)
                .ok_or_else(|| err(pos, &format!("unknown agent `{name}`")))?;
            self.expect(&Tok::RParen, "`)`")?;
            Ok(agent)
        }

        fn atom(&mut self) -> Result<GuardExpr, GuardParseError> {
            let pos = self.pos();
            match self.bump() {
                Some(Tok::LParen) => {
                    let inner = self.or()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(inner)
                }
                Some(Tok::Ident(name)) if name == "true" => Ok(GuardExpr::True),
                Some(Tok::Ident(name)) if name == "msg" => {
                    let left = self.msg_agent()?;
                    let op = match self.bump() {
                        Some(Tok::Op(op)) => op,
                        _ => return Err(err(self.pos(), "expected comparison operator")),
                    };
                    match self.bump() {
                        Some(Tok::Int(n)) => Ok(GuardExpr::CmpConst(left, op, n)),
                        Some(Tok::Ident(name)) if name == "msg" => {
                            let right = self.msg_agent()?;
                            Ok(GuardExpr::CmpMsg(left, op, right))
                        }
                        _ => Err(err(self.pos(), "expected `msg(...)` or integer")),
                    }
                }
                Some(Tok::Ident(name)) if name == "has" => {
                    self.expect(&Tok::LParen, "`(` after has")?;
                    let kw = self.pos();
                    match self.bump() {
                        Some(Tok::Ident(n)) if n == "msg" => {}
                        _ => return Err(err(kw, "expected `msg(...)`")),
                    }
                    let agent = self.msg_agent()?;
                    self.expect(&Tok::Comma, "`,`")?;
                    let ppos = self.pos();
                    let prop = match self.bump() {
                        Some(Tok::Ident(p)) => p,
                        _ => return Err(err(ppos, "expected proposition name")),
                    };
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(GuardExpr::Has(agent, prop))
                }
                Some(Tok::Ident(name)) => Err(err(pos, &format!("unexpected identifier `{name}`"))),
                _ => Err(err(pos, "expected guard atom")),
            }
        }
    }

    pub(super) fn parse<R: Fn(&str) -> Option<AgentId>>(
        src: &str,
        resolve: &R,
    ) -> Result<GuardExpr, GuardParseError> {
        let toks = lex(src)?;
        let mut p = Parser {
            toks,
            at: 0,
            end: src.len(),
            resolve,
        };
        let expr = p.or()?;
        if p.at != p.toks.len() {
            return Err(err(p.pos(), "trailing input after expression"));
        }
        Ok(expr)
    }
}

impl GuardExpr {
    /// Parses the textual guard language, resolving agent names through
    /// `resolve`. See the model file documentation for the grammar.
    pub fn parse<R: Fn(&str) -> Option<AgentId>>(
        src: &str,
        resolve: &R,
    ) -> Result<GuardExpr, GuardParseError> {
        guard_text::parse(src, resolve)
    }

    /// Renders the guard back to source form; parsing the result yields a
    /// structurally equal guard.
    pub fn render<F: Fn(AgentId) -> String>(&self, name: &F) -> String {
        // Precedence levels: atoms and ! bind tighter than &&, which binds
        // tighter than ||. A child at a looser level gets parentheses.
        fn go<F: Fn(AgentId) -> String>(g: &GuardExpr, level: u8, name: &F) -> String {
            let (text, mine) = match g {
                GuardExpr::True => ("true".to_string(), 2),
                GuardExpr::CmpMsg(a, op, b) => {
                    (format!("msg({}) {op} msg({})", name(*a), name(*b)), 2)
                }
                GuardExpr::CmpConst(a, op, k) => (format!("msg({}) {op} {k}", name(*a)), 2),
                GuardExpr::Has(a, prop) => (format!("has(msg({}), {prop})", name(*a)), 2),
                GuardExpr::Not(x) => (format!("!{}", go(x, 2, name)), 2),
                // Parsing is left-associative, so right-nested chains keep
                // their parentheses to round-trip structurally.
                GuardExpr::And(l, r) => {
                    (format!("{} && {}", go(l, 1, name), go(r, 2, name)), 1)
                }
                GuardExpr::Or(l, r) => {
                    (format!("{} || {}", go(l, 0, name), go(r, 1, name)), 0)
                }
            };
            if mine < level {
                format!("({text})")
            } else {
                text
            }
        }
        go(self, 0, name)
    }
}

/// Finite concurrent game structure.
///
/// Joint transitions are deterministic: for every state `q` and every joint
/// action vector drawn from the agents' available sets, `transitions[q]`
/// holds exactly one successor (checked by [`Somas::validate`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cgs {
    pub agents: Vec<String>,
    pub states: Vec<String>,
    pub props: Vec<String>,
    /// Per state, the set of propositions that hold there.
    pub labeling: Vec<BTreeSet<String>>,
    /// Global pool of action names.
    pub actions: Vec<String>,
    /// `available[a][q]`: actions agent `a` may pick in state `q`; sorted,
    /// deduplicated, nonempty on valid models.
    pub available: Vec<Vec<Vec<ActionId>>>,
    /// `transitions[q]`: joint action vector (one action per agent, in agent
    /// order) to successor state.
    pub transitions: Vec<BTreeMap<Vec<ActionId>, StateId>>,
}

impl Cgs {
    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn agent_id(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|a| a == name).map(AgentId)
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name).map(ActionId)
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        self.agents.get(a.0).map_or("?", |s| s.as_str())
    }

    pub fn state_name(&self, q: StateId) -> &str {
        self.states.get(q.0).map_or("?", |s| s.as_str())
    }

    pub fn action_name(&self, act: ActionId) -> &str {
        self.actions.get(act.0).map_or("?", |s| s.as_str())
    }

    /// The set of agents `{0, .., k-1}`.
    pub fn all_agents(&self) -> BTreeSet<AgentId> {
        (0..self.agents.len()).map(AgentId).collect()
    }

    fn check_agent(&self, a: AgentId) -> Result<(), ModelError> {
        if a.0 < self.agents.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownAgent(format!("#{}", a.0)))
        }
    }

    fn check_state(&self, q: StateId) -> Result<(), ModelError> {
        if q.0 < self.states.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownState(format!("#{}", q.0)))
        }
    }

    /// All joint action vectors available at `q`, with the actions of the
    /// agents in `pinned` fixed. With an empty pin this is the full move set
    /// of the state.
    pub fn joint_moves(
        &self,
        q: StateId,
        pinned: &BTreeMap<AgentId, ActionId>,
    ) -> Vec<Vec<ActionId>> {
        let options: Vec<&[ActionId]> = (0..self.agents.len())
            .map(|a| match pinned.get(&AgentId(a)) {
                Some(act) => std::slice::from_ref(act),
                None => self.available[a][q.0].as_slice(),
            })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; options.len()];
        if options.iter().any(|o| o.is_empty()) {
            return out;
        }
        loop {
            out.push(
                idx.iter()
                    .zip(&options)
                    .map(|(&i, opts)| opts[i])
                    .collect::<Vec<_>>(),
            );
            // Odometer increment over the option lists.
            let mut k = options.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < options[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// One agent's local rule: per state, whom to query (`tau`) and an ordered
/// guarded action table (`gamma`) evaluated against the received messages.
/// The first true guard prescribes the action; validation requires at least
/// one guard to be true in every state (totality) and every named action to
/// be available there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalRule {
    /// `tau[q]`: communication partners in state `q`; nonempty on valid models.
    pub tau: Vec<BTreeSet<AgentId>>,
    /// `gamma[q]`: ordered `(guard, action)` table for state `q`.
    pub gamma: Vec<Vec<(GuardExpr, ActionId)>>,
}

/// A concurrent game structure plus internal messages and local rules for
/// every agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Somas {
    pub cgs: Cgs,
    /// `internals[a][q]`: the message agent `a` communicates in state `q`.
    pub internals: Vec<Vec<Message>>,
    /// `rules[a]`: agent `a`'s local rule.
    pub rules: Vec<LocalRule>,
}

/// The unique everyone-follows-the-rules computation from some state,
/// represented finitely: the infinite path is `prefix` followed by `cycle`
/// repeated forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lasso {
    pub prefix: Vec<StateId>,
    pub cycle: Vec<StateId>,
}

impl Lasso {
    /// Every state the computation visits.
    pub fn states(&self) -> BTreeSet<StateId> {
        self.prefix.iter().chain(&self.cycle).copied().collect()
    }

    /// The computation as a finite path that ends right after the first
    /// repeated state (prefix, cycle, then the cycle head again).
    pub fn unrolled_once(&self) -> Vec<StateId> {
        let mut path: Vec<StateId> = self.prefix.clone();
        path.extend(&self.cycle);
        path.push(self.cycle[0]);
        path
    }
}

/// Error raised by model operations on malformed inputs or incomplete rules.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("no guard evaluates true for agent `{agent}` in state `{state}`")]
    GuardIncomplete { agent: String, state: String },
    #[error("guard for agent `{agent}` in state `{state}` is ill-typed: {detail}")]
    GuardEval {
        agent: String,
        state: String,
        detail: String,
    },
    #[error("no transition from state `{state}` for joint move [{moves}]")]
    MissingTransition { state: String, moves: String },
}

/// One violated model invariant, with the coordinates it was found at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub agent: Option<String>,
    pub state: Option<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.agent, &self.state) {
            (Some(a), Some(q)) => write!(f, "agent `{a}`, state `{q}`: {}", self.detail),
            (Some(a), None) => write!(f, "agent `{a}`: {}", self.detail),
            (None, Some(q)) => write!(f, "state `{q}`: {}", self.detail),
            (None, None) => f.write_str(&self.detail),
        }
    }
}

/// Outcome of [`Somas::validate`]: empty means the model is well-formed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, agent: Option<&str>, state: Option<&str>, detail: impl Into<String>) {
        self.violations.push(Violation {
            agent: agent.map(str::to_string),
            state: state.map(str::to_string),
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

impl Somas {
    /// Checks every structural invariant and returns the violations found.
    ///
    /// An empty report guarantees that `messages_at`, `prescribed_action`,
    /// `restricted_successors`, `out_reachable` and `star_computation`
    /// succeed on any in-range input.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let cgs = &self.cgs;
        let k = cgs.agents.len();
        let n = cgs.states.len();

        if k == 0 {
            report.push(None, None, "model declares no agents");
        }
        if n == 0 {
            report.push(None, None, "model declares no states");
        }

        let declared: BTreeSet<&str> = cgs.props.iter().map(String::as_str).collect();
        if cgs.labeling.len() != n {
            report.push(
                None,
                None,
                format!("labeling covers {} states, expected {n}", cgs.labeling.len()),
            );
        }
        for (q, label) in cgs.labeling.iter().enumerate().take(n) {
            for p in label {
                if !declared.contains(p.as_str()) {
                    report.push(
                        None,
                        Some(&cgs.states[q]),
                        format!("labeled with undeclared proposition `{p}`"),
                    );
                }
            }
        }

        // Available action sets: present, in range, nonempty.
        let mut shape_ok = cgs.available.len() == k;
        if !shape_ok {
            report.push(
                None,
                None,
                format!("available-action table covers {} agents, expected {k}", cgs.available.len()),
            );
        }
        for (a, per_state) in cgs.available.iter().enumerate() {
            if per_state.len() != n {
                shape_ok = false;
                report.push(
                    Some(&cgs.agents[a]),
                    None,
                    format!("available-action table covers {} states, expected {n}", per_state.len()),
                );
                continue;
            }
            for (q, acts) in per_state.iter().enumerate() {
                if acts.is_empty() {
                    report.push(
                        Some(&cgs.agents[a]),
                        Some(&cgs.states[q]),
                        "empty action set",
                    );
                }
                for act in acts {
                    if act.0 >= cgs.actions.len() {
                        report.push(
                            Some(&cgs.agents[a]),
                            Some(&cgs.states[q]),
                            format!("available action #{} not in the action pool", act.0),
                        );
                    }
                }
            }
        }

        // Transitions: total over the joint move sets and deterministic by
        // construction (map keys are unique); reject moves outside them.
        if cgs.transitions.len() != n {
            report.push(
                None,
                None,
                format!("transition table covers {} states, expected {n}", cgs.transitions.len()),
            );
        } else if shape_ok {
            for q in 0..n {
                let moves = cgs.joint_moves(StateId(q), &BTreeMap::new());
                let legal: BTreeSet<&Vec<ActionId>> = moves.iter().collect();
                for v in &moves {
                    match cgs.transitions[q].get(v) {
                        None => report.push(
                            None,
                            Some(&cgs.states[q]),
                            format!("no transition for joint move [{}]", self.fmt_moves(v)),
                        ),
                        Some(target) if target.0 >= n => report.push(
                            None,
                            Some(&cgs.states[q]),
                            format!("transition target state #{} out of range", target.0),
                        ),
                        Some(_) => {}
                    }
                }
                for v in cgs.transitions[q].keys() {
                    if !legal.contains(v) {
                        report.push(
                            None,
                            Some(&cgs.states[q]),
                            format!(
                                "transition uses unavailable joint move [{}]",
                                self.fmt_moves(v)
                            ),
                        );
                    }
                }
            }
        }

        // Internal messages: total, and proposition payloads must be backed
        // by the labeling of the state where they are emitted.
        if self.internals.len() != k {
            report.push(
                None,
                None,
                format!("internal-message table covers {} agents, expected {k}", self.internals.len()),
            );
        }
        for (a, per_state) in self.internals.iter().enumerate().take(k) {
            if per_state.len() != n {
                report.push(
                    Some(&cgs.agents[a]),
                    None,
                    format!("internal-message table covers {} states, expected {n}", per_state.len()),
                );
                continue;
            }
            for (q, msg) in per_state.iter().enumerate() {
                if let Message::Props(ps) = msg {
                    if let Some(label) = cgs.labeling.get(q) {
                        for p in ps {
                            if !label.contains(p) {
                                report.push(
                                    Some(&cgs.agents[a]),
                                    Some(&cgs.states[q]),
                                    format!("message vouches for `{p}` which does not hold there"),
                                );
                            }
                        }
                    }
                }
            }
        }

        // Local rules.
        if self.rules.len() != k {
            report.push(
                None,
                None,
                format!("rule table covers {} agents, expected {k}", self.rules.len()),
            );
        }
        for (a, rule) in self.rules.iter().enumerate().take(k) {
            let agent = &cgs.agents[a];
            if rule.tau.len() != n || rule.gamma.len() != n {
                report.push(
                    Some(agent),
                    None,
                    format!(
                        "rule covers {} tau / {} gamma states, expected {n}",
                        rule.tau.len(),
                        rule.gamma.len()
                    ),
                );
                continue;
            }
            for q in 0..n {
                let state = &cgs.states[q];
                let tau = &rule.tau[q];
                if tau.is_empty() {
                    report.push(Some(agent), Some(state), "empty communication set");
                }
                for partner in tau {
                    if partner.0 >= k {
                        report.push(
                            Some(agent),
                            Some(state),
                            format!("communication partner #{} unknown", partner.0),
                        );
                    }
                }
                if rule.gamma[q].is_empty() {
                    report.push(Some(agent), Some(state), "empty guarded action table");
                }
                let mut statically_ok = true;
                for (guard, action) in &rule.gamma[q] {
                    if shape_ok
                        && !cgs
                            .available
                            .get(a)
                            .and_then(|t| t.get(q))
                            .is_some_and(|acts| acts.contains(action))
                    {
                        report.push(
                            Some(agent),
                            Some(state),
                            format!("action `{}` unavailable", cgs.action_name(*action)),
                        );
                    }
                    for sender in guard.senders() {
                        if !tau.contains(&sender) {
                            statically_ok = false;
                            report.push(
                                Some(agent),
                                Some(state),
                                format!(
                                    "guard reads msg({}) outside the communication set",
                                    cgs.agent_name(sender)
                                ),
                            );
                        }
                    }
                    if let Some(detail) = self.guard_kind_error(guard, q) {
                        statically_ok = false;
                        report.push(Some(agent), Some(state), detail);
                    }
                }
                // Totality of the table is decidable because messages are
                // state-indexed data: just evaluate.
                if statically_ok && self.internals.len() == k {
                    match self.messages_at(AgentId(a), StateId(q)) {
                        Ok(messages) => {
                            let any_true = rule.gamma[q]
                                .iter()
                                .any(|(g, _)| g.eval(&messages).unwrap_or(false));
                            if !any_true {
                                report.push(
                                    Some(agent),
                                    Some(state),
                                    "no guard evaluates true (incomplete table)",
                                );
                            }
                        }
                        Err(_) => {
                            // Table shape errors were already reported above.
                        }
                    }
                }
            }
        }

        report
    }

    fn fmt_moves(&self, v: &[ActionId]) -> String {
        v.iter()
            .map(|act| self.cgs.action_name(*act))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Statically checks one guard's payload kinds at state `q`.
    fn guard_kind_error(&self, guard: &GuardExpr, q: usize) -> Option<String> {
        let kind_of = |a: AgentId| -> Option<&Message> { self.internals.get(a.0)?.get(q) };
        match guard {
            GuardExpr::True => None,
            GuardExpr::CmpMsg(a, _, b) => {
                for agent in [a, b] {
                    match kind_of(*agent) {
                        Some(Message::Int(_)) | None => {}
                        Some(m) => {
                            return Some(format!(
                                "guard compares msg({}) of kind {}",
                                self.cgs.agent_name(*agent),
                                m.kind()
                            ))
                        }
                    }
                }
                None
            }
            GuardExpr::CmpConst(a, _, _) => match kind_of(*a) {
                Some(Message::Int(_)) | None => None,
                Some(m) => Some(format!(
                    "guard compares msg({}) of kind {}",
                    self.cgs.agent_name(*a),
                    m.kind()
                )),
            },
            GuardExpr::Has(a, p) => {
                if !self.cgs.props.contains(p) {
                    return Some(format!("guard tests undeclared proposition `{p}`"));
                }
                match kind_of(*a) {
                    Some(Message::Props(_)) | None => None,
                    Some(m) => Some(format!(
                        "guard tests propositions of msg({}) of kind {}",
                        self.cgs.agent_name(*a),
                        m.kind()
                    )),
                }
            }
            GuardExpr::Not(g) => self.guard_kind_error(g, q),
            GuardExpr::And(l, r) | GuardExpr::Or(l, r) => self
                .guard_kind_error(l, q)
                .or_else(|| self.guard_kind_error(r, q)),
        }
    }

    /// The messages agent `a` receives in state `q`: one per communication
    /// partner, keyed by sender.
    pub fn messages_at(
        &self,
        a: AgentId,
        q: StateId,
    ) -> Result<BTreeMap<AgentId, Message>, ModelError> {
        self.cgs.check_agent(a)?;
        self.cgs.check_state(q)?;
        let mut out = BTreeMap::new();
        for sender in &self.rules[a.0].tau[q.0] {
            self.cgs.check_agent(*sender)?;
            out.insert(*sender, self.internals[sender.0][q.0].clone());
        }
        Ok(out)
    }

    /// The action agent `a`'s rule prescribes in state `q`: the action of the
    /// first guard that evaluates true against the received messages.
    pub fn prescribed_action(&self, a: AgentId, q: StateId) -> Result<ActionId, ModelError> {
        let messages = self.messages_at(a, q)?;
        let to_err = |detail: String| ModelError::GuardEval {
            agent: self.cgs.agent_name(a).to_string(),
            state: self.cgs.state_name(q).to_string(),
            detail,
        };
        for (guard, action) in &self.rules[a.0].gamma[q.0] {
            if guard.eval(&messages).map_err(to_err)? {
                return Ok(*action);
            }
        }
        Err(ModelError::GuardIncomplete {
            agent: self.cgs.agent_name(a).to_string(),
            state: self.cgs.state_name(q).to_string(),
        })
    }

    /// Joint moves at `q` in which every member of `coalition` takes its
    /// prescribed action; other agents range over their available sets.
    fn pinned_moves(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
    ) -> Result<Vec<Vec<ActionId>>, ModelError> {
        let mut pinned = BTreeMap::new();
        for a in coalition {
            pinned.insert(*a, self.prescribed_action(*a, q)?);
        }
        Ok(self.cgs.joint_moves(q, &pinned))
    }

    fn step(&self, q: StateId, v: &[ActionId]) -> Result<StateId, ModelError> {
        self.cgs.transitions[q.0]
            .get(v)
            .copied()
            .ok_or_else(|| ModelError::MissingTransition {
                state: self.cgs.state_name(q).to_string(),
                moves: self.fmt_moves(v),
            })
    }

    /// Successor states reachable in one step while `coalition` follows its
    /// rules. Empty coalition: all successors; all agents: a singleton.
    pub fn restricted_successors(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
    ) -> Result<BTreeSet<StateId>, ModelError> {
        self.cgs.check_state(q)?;
        let mut out = BTreeSet::new();
        for v in self.pinned_moves(coalition, q)? {
            out.insert(self.step(q, &v)?);
        }
        Ok(out)
    }

    /// Every state some rule-following-for-`coalition` computation from `q`
    /// visits: the least fixpoint of `restricted_successors` including `q`.
    pub fn out_reachable(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
    ) -> Result<BTreeSet<StateId>, ModelError> {
        self.cgs.check_state(q)?;
        let mut seen = BTreeSet::from([q]);
        let mut frontier = vec![q];
        while let Some(s) = frontier.pop() {
            for next in self.restricted_successors(coalition, s)? {
                if seen.insert(next) {
                    frontier.push(next);
                }
            }
        }
        Ok(seen)
    }

    /// The unique computation from `q` when every agent follows its rule,
    /// split at the first repeated state into prefix and cycle.
    pub fn star_computation(&self, q: StateId) -> Result<Lasso, ModelError> {
        self.cgs.check_state(q)?;
        let all = self.cgs.all_agents();
        let mut seq = vec![q];
        let mut seen = BTreeMap::from([(q, 0usize)]);
        loop {
            let here = *seq.last().expect("nonempty");
            let moves = self.pinned_moves(&all, here)?;
            // All agents pinned: exactly one joint move.
            let v = moves.first().ok_or_else(|| ModelError::MissingTransition {
                state: self.cgs.state_name(here).to_string(),
                moves: String::from("<none available>"),
            })?;
            let next = self.step(here, v)?;
            if let Some(&at) = seen.get(&next) {
                let cycle = seq.split_off(at);
                return Ok(Lasso { prefix: seq, cycle });
            }
            seen.insert(next, seq.len());
            seq.push(next);
        }
    }
}
