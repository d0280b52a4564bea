//! Ready-made models: two trains sharing a tunnel, a five-agent task
//! delegation pipeline, and a user/middle-agent community protocol.
//!
//! The first two are fixed shapes (urgencies parameterize the trains); the
//! community model is compiled from a [`CommunityConfig`] describing users,
//! middle agents, interests, initial registrations and a query schedule.
//! [`eval_com`] evaluates community-formation atoms over a compiled model's
//! labeling and is the intended `com` hook for the checker.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::checker::ComHookFn;
use crate::model::{ActionId, AgentId, Cgs, GuardExpr, LocalRule, Message, Somas, StateId};

/// Describes a community instance: who the users and middle agents are,
/// which users each user cares about, where everyone is registered at the
/// start, and the ordered queries that drive the protocol.
///
/// Interests do not influence the transition structure, only the meaning of
/// community atoms; queries fire per the schedule whether or not the
/// requester is interested in the target.
#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CommunityConfig {
    pub users: Vec<String>,
    pub middles: Vec<String>,
    /// Which other users each user wants co-registered with itself.
    pub interests: BTreeMap<String, BTreeSet<String>>,
    /// Every user starts registered with exactly one middle agent.
    #[serde(rename = "initial")]
    pub initial_registration: BTreeMap<String, String>,
    /// `(requester, target)` queries, fired in order.
    #[serde(rename = "schedule")]
    pub query_schedule: Vec<(String, String)>,
}

/// A community-formation atom: all users in `user_set` want each user they
/// are interested in co-registered with them at some middle in `middle_set`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComAtom {
    pub user_set: BTreeSet<String>,
    pub middle_set: BTreeSet<String>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("invalid community config: {0}")]
    InvalidConfig(String),
    #[error("name `{0}` is not declared in the community config")]
    UnboundName(String),
    #[error("state #{0} out of range")]
    UnknownState(usize),
}

impl CommunityConfig {
    /// Four users with pairwise interests spread over three middle agents;
    /// the worked instance used throughout the tests and CLI examples.
    pub fn sample() -> CommunityConfig {
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        CommunityConfig {
            users: vec!["u1".into(), "u2".into(), "u3".into(), "u4".into()],
            middles: vec!["m1".into(), "m2".into(), "m3".into()],
            interests: BTreeMap::from([
                ("u1".to_string(), set(&["u2"])),
                ("u2".to_string(), set(&["u1"])),
                ("u3".to_string(), set(&["u4"])),
                ("u4".to_string(), set(&["u3"])),
            ]),
            initial_registration: BTreeMap::from([
                ("u1".to_string(), "m1".to_string()),
                ("u2".to_string(), "m2".to_string()),
                ("u3".to_string(), "m3".to_string()),
                ("u4".to_string(), "m1".to_string()),
            ]),
            query_schedule: vec![
                ("u1".to_string(), "u2".to_string()),
                ("u2".to_string(), "u1".to_string()),
                ("u3".to_string(), "u4".to_string()),
                ("u4".to_string(), "u3".to_string()),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |detail: String| Err(ScenarioError::InvalidConfig(detail));
        if self.users.is_empty() {
            return bad("no users declared".into());
        }
        if self.middles.is_empty() {
            return bad("no middle agents declared".into());
        }
        let mut seen = BTreeSet::new();
        for name in self.users.iter().chain(&self.middles) {
            if !seen.insert(name.as_str()) {
                return bad(format!("duplicate agent name `{name}`"));
            }
        }
        let users: BTreeSet<&str> = self.users.iter().map(String::as_str).collect();
        let middles: BTreeSet<&str> = self.middles.iter().map(String::as_str).collect();
        for (u, wants) in &self.interests {
            if !users.contains(u.as_str()) {
                return bad(format!("interests declared for unknown user `{u}`"));
            }
            for w in wants {
                if !users.contains(w.as_str()) {
                    return bad(format!("`{u}` interested in unknown user `{w}`"));
                }
                if w == u {
                    return bad(format!("`{u}` declared interested in itself"));
                }
            }
        }
        for u in &self.users {
            match self.initial_registration.get(u) {
                None => return bad(format!("user `{u}` has no initial registration")),
                Some(m) if !middles.contains(m.as_str()) => {
                    return bad(format!("user `{u}` registered with unknown middle `{m}`"))
                }
                Some(_) => {}
            }
        }
        for u in self.initial_registration.keys() {
            if !users.contains(u.as_str()) {
                return bad(format!("initial registration for unknown user `{u}`"));
            }
        }
        for (r, t) in &self.query_schedule {
            for name in [r, t] {
                if !users.contains(name.as_str()) {
                    return bad(format!("schedule references unknown user `{name}`"));
                }
            }
            if r == t {
                return bad(format!("`{r}` scheduled to query about itself"));
            }
        }
        Ok(())
    }
}

/// The name of the proposition recording that `user` is registered with
/// `middle`. These propositions carry the entire community state.
pub fn reg_prop(user: &str, middle: &str) -> String {
    format!("reg({user},{middle})")
}

/// Two trains approaching a shared tunnel from opposite sides.
///
/// Each train can `go` (enter) or `wait`. Entering together crashes; one
/// entering first lets both pass. At the initial state the trains exchange
/// their urgencies `u1`, `u2` and the rules let the more urgent one enter,
/// ties going to the first train.
///
/// States: `q0` both outside, `q1`/`q2` second/first train entered, `q3`
/// both passed, `q4` crashed. `q3` and `q4` are absorbing.
pub fn two_trains(u1: i64, u2: i64) -> Somas {
    trains(u1, u2, false)
}

/// [`two_trains`] with strict precedence: the first train enters only when
/// strictly more urgent, so equal urgencies leave both waiting forever. The
/// initial state carries a `deadlock` proposition to make that observable.
pub fn two_trains_strict(u1: i64, u2: i64) -> Somas {
    trains(u1, u2, true)
}

fn trains(u1: i64, u2: i64, strict: bool) -> Somas {
    let mut b = Builder::new(
        &["a1", "a2"],
        &["q0", "q1", "q2", "q3", "q4"],
        &["go", "wait"],
    );
    b.prop("passed");
    b.prop("crash");
    b.label("q3", "passed");
    b.label("q4", "crash");
    if strict {
        b.prop("deadlock");
        b.label("q0", "deadlock");
    }

    b.avail("a1", "q0", &["go", "wait"]);
    b.avail("a2", "q0", &["go", "wait"]);
    b.avail("a1", "q1", &["go", "wait"]);
    b.avail("a2", "q1", &["wait"]);
    b.avail("a1", "q2", &["wait"]);
    b.avail("a2", "q2", &["go", "wait"]);
    for q in ["q3", "q4"] {
        b.avail("a1", q, &["wait"]);
        b.avail("a2", q, &["wait"]);
    }

    b.transition("q0", &["go", "go"], "q4");
    b.transition("q0", &["go", "wait"], "q2");
    b.transition("q0", &["wait", "go"], "q1");
    b.transition("q0", &["wait", "wait"], "q0");
    b.transition("q1", &["go", "wait"], "q3");
    b.transition("q1", &["wait", "wait"], "q1");
    b.transition("q2", &["wait", "go"], "q3");
    b.transition("q2", &["wait", "wait"], "q2");
    b.transition("q3", &["wait", "wait"], "q3");
    b.transition("q4", &["wait", "wait"], "q4");

    for q in ["q0", "q1", "q2", "q3", "q4"] {
        b.internal("a1", q, Message::Int(u1));
        b.internal("a2", q, Message::Int(u2));
    }

    // Urgencies are exchanged only at the junction state; elsewhere each
    // train hears itself alone.
    b.tau("a1", "q0", &["a1", "a2"]);
    b.tau("a2", "q0", &["a1", "a2"]);
    for q in ["q1", "q2", "q3", "q4"] {
        b.tau("a1", q, &["a1"]);
        b.tau("a2", q, &["a2"]);
    }
    let first = if strict {
        "msg(a1) > msg(a2)"
    } else {
        "msg(a1) >= msg(a2)"
    };
    b.rule("a1", "q0", &[(first, "go"), ("true", "wait")]);
    b.rule("a2", "q0", &[("msg(a1) < msg(a2)", "go"), ("true", "wait")]);
    b.rule("a1", "q1", &[("true", "go")]);
    b.rule("a2", "q1", &[("true", "wait")]);
    b.rule("a1", "q2", &[("true", "wait")]);
    b.rule("a2", "q2", &[("true", "go")]);
    for q in ["q3", "q4"] {
        b.rule("a1", q, &[("true", "wait")]);
        b.rule("a2", q, &[("true", "wait")]);
    }

    b.build()
}

/// Five workers completing a task with internal dependencies: `b` needs `a`
/// and `e` done, `d` needs `e`, and `c` needs `b` and `d`. Each worker
/// reports a done-flag to the agents that depend on it and starts working as
/// soon as its inputs report done.
///
/// States track which workers have finished (only dependency-consistent
/// combinations are reachable, nine in total). Propositions mark completed
/// milestones: `task_a` (a done), `task_de` (d and e done), `task_abe`
/// (a, b and e done), `task_done` (everything, since `c` is final).
pub fn task_delegation() -> Somas {
    const AGENTS: [&str; 5] = ["a", "b", "c", "d", "e"];
    const PREREQS: [&[usize]; 5] = [&[], &[0, 4], &[1, 3], &[4], &[]];

    let closed = |mask: u32| -> bool {
        (0..5).all(|i| mask & (1 << i) == 0 || PREREQS[i].iter().all(|p| mask & (1 << p) != 0))
    };
    let name_of = |mask: u32| -> String {
        if mask == 0 {
            return "init".to_string();
        }
        (0..5)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| AGENTS[i])
            .collect()
    };

    let mut masks: Vec<u32> = (0u32..32).filter(|&m| closed(m)).collect();
    masks.sort_by_key(|&m| (m.count_ones(), name_of(m)));
    let names: Vec<String> = masks.iter().map(|&m| name_of(m)).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();

    let mut b = Builder::new(&AGENTS, &name_refs, &["work", "idle"]);
    for p in ["task_a", "task_de", "task_abe", "task_done"] {
        b.prop(p);
    }
    for (&mask, state) in masks.iter().zip(&names) {
        if mask & 1 != 0 {
            b.label(state, "task_a");
        }
        if mask & (1 << 3) != 0 {
            b.label(state, "task_de");
        }
        if mask & (1 << 1) != 0 {
            b.label(state, "task_abe");
        }
        if mask & (1 << 2) != 0 {
            b.label(state, "task_done");
        }

        for (i, agent) in AGENTS.iter().enumerate() {
            let done = mask & (1 << i) != 0;
            b.avail(agent, state, if done { &["idle"] } else { &["work", "idle"] });
            b.internal(agent, state, Message::Int(i64::from(done)));
        }

        // Working early is a no-op: a work move only lands once the
        // prerequisites are already complete, so states stay consistent.
        b.transitions_with(state, |moves| {
            let mut next = mask;
            for (i, mv) in moves.iter().enumerate() {
                if *mv == "work" && PREREQS[i].iter().all(|p| mask & (1 << p) != 0) {
                    next |= 1 << i;
                }
            }
            name_of(next)
        });

        for (i, agent) in AGENTS.iter().enumerate() {
            if mask & (1 << i) != 0 {
                b.rule(agent, state, &[("true", "idle")]);
                continue;
            }
            let table: &[(&str, &str)] = match i {
                0 | 4 => &[("true", "work")],
                1 => &[
                    ("msg(a) == 1 && msg(e) == 1", "work"),
                    ("true", "idle"),
                ],
                3 => &[("msg(e) == 1", "work"), ("true", "idle")],
                2 => &[
                    ("msg(b) == 1 && msg(d) == 1", "work"),
                    ("true", "idle"),
                ],
                _ => unreachable!(),
            };
            b.rule(agent, state, table);
        }
    }

    // Everyone listens to its inputs (and itself), in every state.
    let tau: [&[&str]; 5] = [&["a"], &["a", "b", "e"], &["b", "c", "d"], &["d", "e"], &["e"]];
    for (agent, partners) in AGENTS.iter().zip(tau) {
        for state in &names {
            b.tau(agent, state, partners);
        }
    }

    b.build()
}

/// One stage of the community protocol: a pending query whose target user
/// must move between middle agents.
struct Transfer {
    requester: String,
    target: String,
    from: String,
    to: String,
}

enum Stage {
    /// The requester asks and the target's current middle deregisters it.
    Announce(Transfer),
    /// The requester's middle registers the target, which accepts.
    Settle(Transfer),
    /// Schedule exhausted; everyone loops.
    Done,
}

/// Compiles a community protocol instance into a model.
///
/// Users query about each other per the schedule. When the two are
/// registered with different middle agents, the target's middle deregisters
/// it and hands it over, and the requester's middle registers it; queries
/// between co-registered users change nothing and are skipped. Each
/// transfer takes two steps (announce, settle) and each step waits for both
/// of its participants, so any participant can stall the protocol.
///
/// Registration facts are the propositions (see [`reg_prop`]) and every
/// agent's internal message vouches for the registration facts it is party
/// to. A middle agent hears the users involved in a handover only when it
/// is about to lose its last registrant; otherwise its own records suffice.
pub fn community_model(cfg: &CommunityConfig) -> Result<Somas, ScenarioError> {
    cfg.validate()?;

    // Walk the schedule, materializing two states per effective query plus
    // one terminal state. Registration snapshots label each state.
    let mut stages: Vec<(Stage, BTreeMap<String, String>)> = Vec::new();
    let mut reg = cfg.initial_registration.clone();
    for (requester, target) in &cfg.query_schedule {
        let from = reg[target].clone();
        let to = reg[requester].clone();
        if from == to {
            continue;
        }
        let transfer = || Transfer {
            requester: requester.clone(),
            target: target.clone(),
            from: from.clone(),
            to: to.clone(),
        };
        stages.push((Stage::Announce(transfer()), reg.clone()));
        let mut in_flight = reg.clone();
        in_flight.remove(target);
        stages.push((Stage::Settle(transfer()), in_flight));
        reg.insert(target.clone(), to);
    }
    stages.push((Stage::Done, reg));

    let agents: Vec<&str> = cfg
        .users
        .iter()
        .chain(&cfg.middles)
        .map(String::as_str)
        .collect();
    let state_names: Vec<String> = (0..stages.len()).map(|i| format!("q{i}")).collect();
    let state_refs: Vec<&str> = state_names.iter().map(String::as_str).collect();

    let mut action_names: Vec<String> = vec!["noop".to_string(), "accept".to_string()];
    for u in &cfg.users {
        action_names.push(format!("query({u})"));
        action_names.push(format!("register({u})"));
        action_names.push(format!("deregister({u})"));
    }
    let action_refs: Vec<&str> = action_names.iter().map(String::as_str).collect();

    let mut b = Builder::new(&agents, &state_refs, &action_refs);
    for u in &cfg.users {
        for m in &cfg.middles {
            b.prop(&reg_prop(u, m));
        }
    }

    for (i, (stage, reg)) in stages.iter().enumerate() {
        let state = &state_names[i];
        for (u, m) in reg {
            b.label(state, &reg_prop(u, m));
        }

        // Every agent vouches for the registration facts it is party to.
        for u in &cfg.users {
            let facts = reg.get(u).map(|m| reg_prop(u, m)).into_iter().collect();
            b.internal(u, state, Message::Props(facts));
        }
        for m in &cfg.middles {
            let facts = reg
                .iter()
                .filter(|(_, at)| *at == m)
                .map(|(u, _)| reg_prop(u, m))
                .collect();
            b.internal(m, state, Message::Props(facts));
        }

        for agent in &agents {
            b.tau(agent, state, &[agent]);
        }

        // Defaults: everyone idles; participants get overridden below.
        for agent in &agents {
            b.avail(agent, state, &["noop"]);
            b.rule(agent, state, &[("true", "noop")]);
        }

        match stage {
            Stage::Announce(t) => {
                let query = format!("query({})", t.target);
                let dereg = format!("deregister({})", t.target);
                b.avail(&t.requester, state, &[&query, "noop"]);
                b.rule(&t.requester, state, &[("true", &query)]);
                b.avail(&t.from, state, &[&dereg, "noop"]);
                b.rule(&t.from, state, &[("true", &dereg)]);
                // Losing its only registrant, the middle hears the users
                // involved; with others on its books its records suffice.
                let holds_only_target = reg.iter().all(|(u, at)| at != &t.from || u == &t.target);
                if holds_only_target {
                    b.tau(&t.from, state, &[&t.requester, &t.target, &t.from]);
                }
                let next = state_names[i + 1].clone();
                let here = state.clone();
                let (r_at, f_at) = (b.agent_pos(&t.requester), b.agent_pos(&t.from));
                b.transitions_with(state, |moves| {
                    if moves[r_at] == query && moves[f_at] == dereg {
                        next.clone()
                    } else {
                        here.clone()
                    }
                });
            }
            Stage::Settle(t) => {
                let register = format!("register({})", t.target);
                b.avail(&t.to, state, &[&register, "noop"]);
                b.rule(&t.to, state, &[("true", &register)]);
                b.avail(&t.target, state, &["accept", "noop"]);
                b.rule(&t.target, state, &[("true", "accept")]);
                b.tau(&t.to, state, &[&t.from, &t.to]);
                let next = state_names[i + 1].clone();
                let here = state.clone();
                let (m_at, t_at) = (b.agent_pos(&t.to), b.agent_pos(&t.target));
                b.transitions_with(state, |moves| {
                    if moves[m_at] == register && moves[t_at] == "accept" {
                        next.clone()
                    } else {
                        here.clone()
                    }
                });
            }
            Stage::Done => {
                let here = state.clone();
                b.transitions_with(state, |_| here.clone());
            }
        }
    }

    Ok(b.build())
}

/// Evaluates a community atom at a state: every user in the atom's user set
/// must have each user it is interested in co-registered with it at some
/// middle agent in the atom's middle set. Reads the state's registration
/// propositions; an empty user set holds vacuously.
pub fn eval_com(
    somas: &Somas,
    cfg: &CommunityConfig,
    q: StateId,
    atom: &ComAtom,
) -> Result<bool, ScenarioError> {
    for u in &atom.user_set {
        if !cfg.users.contains(u) {
            return Err(ScenarioError::UnboundName(u.clone()));
        }
    }
    for m in &atom.middle_set {
        if !cfg.middles.contains(m) {
            return Err(ScenarioError::UnboundName(m.clone()));
        }
    }
    let label = somas
        .cgs
        .labeling
        .get(q.0)
        .ok_or(ScenarioError::UnknownState(q.0))?;

    let none = BTreeSet::new();
    for u in &atom.user_set {
        for want in cfg.interests.get(u).unwrap_or(&none) {
            let together = atom
                .middle_set
                .iter()
                .any(|m| label.contains(&reg_prop(u, m)) && label.contains(&reg_prop(want, m)));
            if !together {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Packages [`eval_com`] with a config as the checker's `com` atom hook.
pub fn community_hook(cfg: CommunityConfig) -> Box<ComHookFn> {
    Box::new(move |somas, q, users, middles| {
        let atom = ComAtom {
            user_set: users.clone(),
            middle_set: middles.clone(),
        };
        eval_com(somas, &cfg, q, &atom).map_err(|e| e.to_string())
    })
}

/// Name-based model assembler for the builders above. Panics on unknown
/// names: scenario construction bugs should fail loudly, not produce a
/// model that silently diverges from the intended shape.
struct Builder {
    agents: Vec<String>,
    states: Vec<String>,
    actions: Vec<String>,
    props: Vec<String>,
    labeling: Vec<BTreeSet<String>>,
    available: Vec<Vec<Vec<ActionId>>>,
    transitions: Vec<BTreeMap<Vec<ActionId>, StateId>>,
    internals: Vec<Vec<Message>>,
    tau: Vec<Vec<BTreeSet<AgentId>>>,
    gamma: Vec<Vec<Vec<(GuardExpr, ActionId)>>>,
}

impl Builder {
    fn new(agents: &[&str], states: &[&str], actions: &[&str]) -> Builder {
        let (k, n) = (agents.len(), states.len());
        Builder {
            agents: agents.iter().map(|s| s.to_string()).collect(),
            states: states.iter().map(|s| s.to_string()).collect(),
            actions: actions.iter().map(|s| s.to_string()).collect(),
            props: Vec::new(),
            labeling: vec![BTreeSet::new(); n],
            available: vec![vec![Vec::new(); n]; k],
            transitions: vec![BTreeMap::new(); n],
            internals: vec![vec![Message::Int(0); n]; k],
            tau: vec![vec![BTreeSet::new(); n]; k],
            gamma: vec![vec![Vec::new(); n]; k],
        }
    }

    fn agent_pos(&self, name: &str) -> usize {
        self.agents
            .iter()
            .position(|a| a == name)
            .unwrap_or_else(|| panic!("unknown agent `{name}`"))
    }

    fn state_pos(&self, name: &str) -> usize {
        self.states
            .iter()
            .position(|s| s == name)
            .unwrap_or_else(|| panic!("unknown state `{name}`"))
    }

    fn action_pos(&self, name: &str) -> ActionId {
        ActionId(
            self.actions
                .iter()
                .position(|a| a == name)
                .unwrap_or_else(|| panic!("unknown action `{name}`")),
        )
    }

    fn prop(&mut self, name: &str) {
        self.props.push(name.to_string());
    }

    fn label(&mut self, state: &str, prop: &str) {
        assert!(
            self.props.iter().any(|p| p == prop),
            "undeclared proposition `{prop}`"
        );
        let q = self.state_pos(state);
        self.labeling[q].insert(prop.to_string());
    }

    fn avail(&mut self, agent: &str, state: &str, actions: &[&str]) {
        let a = self.agent_pos(agent);
        let q = self.state_pos(state);
        let mut acts: Vec<ActionId> = actions.iter().map(|n| self.action_pos(n)).collect();
        acts.sort();
        acts.dedup();
        self.available[a][q] = acts;
    }

    fn transition(&mut self, from: &str, moves: &[&str], to: &str) {
        assert_eq!(moves.len(), self.agents.len(), "one move per agent");
        let q = self.state_pos(from);
        let target = StateId(self.state_pos(to));
        let v: Vec<ActionId> = moves.iter().map(|n| self.action_pos(n)).collect();
        self.transitions[q].insert(v, target);
    }

    /// Fills the whole transition row of `state` by asking `f` for the
    /// successor of every joint move over the declared available sets.
    fn transitions_with(&mut self, state: &str, f: impl Fn(&[&str]) -> String) {
        let q = self.state_pos(state);
        let options: Vec<&[ActionId]> = (0..self.agents.len())
            .map(|a| {
                let acts = self.available[a][q].as_slice();
                assert!(!acts.is_empty(), "agent #{a} has no actions at `{state}`");
                acts
            })
            .collect();
        let mut row = BTreeMap::new();
        let mut idx = vec![0usize; options.len()];
        loop {
            let v: Vec<ActionId> = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
            let names: Vec<&str> = v.iter().map(|act| self.actions[act.0].as_str()).collect();
            let target = f(&names);
            row.insert(v, StateId(self.state_pos(&target)));
            let mut k = options.len();
            loop {
                if k == 0 {
                    self.transitions[q] = row;
                    return;
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

    fn internal(&mut self, agent: &str, state: &str, msg: Message) {
        let a = self.agent_pos(agent);
        let q = self.state_pos(state);
        self.internals[a][q] = msg;
    }

    fn tau(&mut self, agent: &str, state: &str, partners: &[&str]) {
        let a = self.agent_pos(agent);
        let q = self.state_pos(state);
        self.tau[a][q] = partners.iter().map(|n| AgentId(self.agent_pos(n))).collect();
    }

    fn rule(&mut self, agent: &str, state: &str, table: &[(&str, &str)]) {
        let a = self.agent_pos(agent);
        let q = self.state_pos(state);
        let mut parsed = Vec::with_capacity(table.len());
        for (guard_src, action) in table {
            let act = self.action_pos(action);
            let agents = &self.agents;
            let guard = GuardExpr::parse(guard_src, &|name: &str| {
                agents.iter().position(|x| x == name).map(AgentId)
            })
            .unwrap_or_else(|e| panic!("guard `{guard_src}`: {e}"));
            parsed.push((guard, act));
        }
        self.gamma[a][q] = parsed;
    }

    fn build(self) -> Somas {
        let rules = self
            .tau
            .into_iter()
            .zip(self.gamma)
            .map(|(tau, gamma)| LocalRule { tau, gamma })
            .collect();
        Somas {
            cgs: Cgs {
                agents: self.agents,
                states: self.states,
                props: self.props,
                labeling: self.labeling,
                actions: self.actions,
                available: self.available,
                transitions: self.transitions,
            },
            internals: self.internals,
            rules,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(somas: &Somas, name: &str) -> StateId {
        somas.cgs.state_id(name).unwrap()
    }

    fn lasso_names(somas: &Somas, q: StateId) -> (Vec<String>, Vec<String>) {
        let lasso = somas.star_computation(q).unwrap();
        let names = |v: &Vec<StateId>| {
            v.iter()
                .map(|s| somas.cgs.state_name(*s).to_string())
                .collect::<Vec<String>>()
        };
        (names(&lasso.prefix), names(&lasso.cycle))
    }

    #[test]
    fn every_scenario_validates_cleanly() {
        let models = [
            two_trains(3, 2),
            two_trains(2, 3),
            two_trains(2, 2),
            two_trains_strict(2, 2),
            two_trains_strict(5, 1),
            task_delegation(),
            community_model(&CommunityConfig::sample()).unwrap(),
        ];
        for somas in &models {
            let report = somas.validate();
            assert!(report.is_valid(), "violations:\n{report}");
        }
    }

    #[test]
    fn task_delegation_has_the_nine_consistent_states() {
        let somas = task_delegation();
        assert_eq!(
            somas.cgs.states,
            vec!["init", "a", "e", "ae", "de", "abe", "ade", "abde", "abcde"]
        );
    }

    #[test]
    fn task_delegation_milestones_sit_on_completion() {
        let somas = task_delegation();
        let holds = |q: &str, p: &str| somas.cgs.labeling[state(&somas, q).0].contains(p);
        assert!(holds("a", "task_a"));
        assert!(!holds("e", "task_a"));
        assert!(holds("de", "task_de"));
        assert!(holds("abe", "task_abe"));
        assert!(!holds("abde", "task_done"));
        assert!(holds("abcde", "task_done"));
        assert!(holds("abcde", "task_a"));
    }

    #[test]
    fn task_delegation_converges_through_the_pipeline() {
        let somas = task_delegation();
        let (prefix, cycle) = lasso_names(&somas, state(&somas, "init"));
        assert_eq!(prefix, vec!["init", "ae", "abde"]);
        assert_eq!(cycle, vec!["abcde"]);
    }

    #[test]
    fn premature_work_changes_nothing() {
        let somas = task_delegation();
        let init = state(&somas, "init");
        // Nobody's prerequisites are met except a's and e's; a lone move
        // by c or b must loop.
        let work = somas.cgs.action_id("work").unwrap();
        let idle = somas.cgs.action_id("idle").unwrap();
        let all_idle_but = |i: usize| {
            let mut v = vec![idle; 5];
            v[i] = work;
            v
        };
        assert_eq!(somas.cgs.transitions[init.0][&all_idle_but(2)], init);
        assert_eq!(somas.cgs.transitions[init.0][&all_idle_but(1)], init);
        assert_eq!(
            somas.cgs.transitions[init.0][&all_idle_but(0)],
            state(&somas, "a")
        );
    }

    #[test]
    fn community_sample_walks_to_the_final_state() {
        let somas = community_model(&CommunityConfig::sample()).unwrap();
        assert_eq!(somas.cgs.states.len(), 5);
        let (prefix, cycle) = lasso_names(&somas, StateId(0));
        assert_eq!(prefix, vec!["q0", "q1", "q2", "q3"]);
        assert_eq!(cycle, vec!["q4"]);
    }

    #[test]
    fn community_registrations_follow_the_narrative() {
        let somas = community_model(&CommunityConfig::sample()).unwrap();
        let holds = |q: &str, u: &str, m: &str| {
            somas.cgs.labeling[state(&somas, q).0].contains(&reg_prop(u, m))
        };
        // Initially u2 sits at m2; it lands at m1 two steps later.
        assert!(holds("q0", "u2", "m2"));
        assert!(!holds("q1", "u2", "m2") && !holds("q1", "u2", "m1"));
        assert!(holds("q2", "u1", "m1") && holds("q2", "u2", "m1"));
        // u4 moves from m1 to m3 over the last two steps.
        assert!(holds("q2", "u4", "m1"));
        assert!(!holds("q3", "u4", "m1") && !holds("q3", "u4", "m3"));
        assert!(holds("q4", "u3", "m3") && holds("q4", "u4", "m3"));
        // Bystanders never move.
        for q in ["q0", "q1", "q2", "q3", "q4"] {
            assert!(holds(q, "u1", "m1"));
            assert!(holds(q, "u3", "m3"));
        }
    }

    #[test]
    fn community_empty_schedule_idles_forever() {
        let mut cfg = CommunityConfig::sample();
        cfg.query_schedule.clear();
        let somas = community_model(&cfg).unwrap();
        assert_eq!(somas.cgs.states.len(), 1);
        let (prefix, cycle) = lasso_names(&somas, StateId(0));
        assert!(prefix.is_empty());
        assert_eq!(cycle, vec!["q0"]);
    }

    #[test]
    fn community_skips_queries_between_coregistered_users() {
        let mut cfg = CommunityConfig::sample();
        // After (u1,u2) resolves, (u2,u1) is co-registered and must not
        // produce states.
        cfg.query_schedule = vec![
            ("u1".to_string(), "u2".to_string()),
            ("u2".to_string(), "u1".to_string()),
        ];
        let somas = community_model(&cfg).unwrap();
        assert_eq!(somas.cgs.states.len(), 3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let breakages: [fn(&mut CommunityConfig); 10] = [
            |c| c.users.clear(),
            |c| c.middles.clear(),
            |c| c.users.push("m1".into()),
            |c| c.users.push("u1".into()),
            |c| {
                c.interests.get_mut("u1").unwrap().insert("u1".into());
            },
            |c| {
                c.interests.get_mut("u1").unwrap().insert("nobody".into());
            },
            |c| {
                c.initial_registration.remove("u3");
            },
            |c| {
                c.initial_registration.insert("u3".into(), "mX".into());
            },
            |c| c.query_schedule.push(("u1".into(), "u1".into())),
            |c| c.query_schedule.push(("u9".into(), "u1".into())),
        ];
        for (i, breakage) in breakages.iter().enumerate() {
            let mut cfg = CommunityConfig::sample();
            breakage(&mut cfg);
            assert!(
                community_model(&cfg).is_err(),
                "breakage #{i} passed validation"
            );
        }
    }

    #[test]
    fn com_atom_reads_the_registration_propositions() {
        let cfg = CommunityConfig::sample();
        let somas = community_model(&cfg).unwrap();
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        let atom = |users: &[&str], middles: &[&str]| ComAtom {
            user_set: set(users),
            middle_set: set(middles),
        };
        let at = |name: &str, a: &ComAtom| eval_com(&somas, &cfg, state(&somas, name), a).unwrap();

        let first = atom(&["u1", "u2"], &["m1"]);
        assert!(!at("q0", &first));
        assert!(at("q2", &first));
        assert!(at("q4", &first));

        let second = atom(&["u3", "u4"], &["m3"]);
        assert!(!at("q2", &second));
        assert!(at("q4", &second));

        // Widening the middle set can only help.
        assert!(at("q4", &atom(&["u1", "u2"], &["m1", "m2", "m3"])));
        // The empty user set is vacuous everywhere.
        assert!(at("q0", &atom(&[], &[])));

        assert_eq!(
            eval_com(&somas, &cfg, StateId(0), &atom(&["ghost"], &["m1"])),
            Err(ScenarioError::UnboundName("ghost".to_string()))
        );
        assert_eq!(
            eval_com(&somas, &cfg, StateId(99), &first),
            Err(ScenarioError::UnknownState(99))
        );
    }

    #[test]
    fn interests_do_not_shape_transitions() {
        let mut altered = CommunityConfig::sample();
        altered.interests.insert(
            "u3".to_string(),
            ["u1", "u2"].iter().map(|s| s.to_string()).collect(),
        );
        altered
            .interests
            .insert("u4".to_string(), BTreeSet::new());
        let base = community_model(&CommunityConfig::sample()).unwrap();
        let changed = community_model(&altered).unwrap();
        assert_eq!(base.cgs.states, changed.cgs.states);
        assert_eq!(base.cgs.transitions, changed.cgs.transitions);
        assert_eq!(base.cgs.labeling, changed.cgs.labeling);
    }

    #[test]
    fn community_hook_mirrors_eval_com() {
        let cfg = CommunityConfig::sample();
        let somas = community_model(&cfg).unwrap();
        let hook = community_hook(cfg);
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        let q4 = state(&somas, "q4");
        assert_eq!(
            hook(&somas, q4, &set(&["u1", "u2"]), &set(&["m1"])),
            Ok(true)
        );
        assert_eq!(
            hook(&somas, StateId(0), &set(&["u1", "u2"]), &set(&["m1"])),
            Ok(false)
        );
        assert!(hook(&somas, q4, &set(&["ghost"]), &set(&["m1"])).is_err());
    }
}
