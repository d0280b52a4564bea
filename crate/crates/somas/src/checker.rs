//! Formula checking and coalition-contribution analysis.
//!
//! The engine labels states bottom-up over the subformulas, CTL-style, but
//! against the coalition-restricted transition relation: a temporal operator
//! carrying coalition `A` quantifies over exactly the computations where
//! every member of `A` takes its prescribed action at every step, so its
//! one-step relation pins members to [`Somas::prescribed_action`] and lets
//! everyone else range over their available actions. `X` is a universal
//! one-step check, `G` a greatest fixpoint computed by violation
//! propagation, and `U` a least fixpoint computed with per-state successor
//! counters; both fixpoints run in time linear in the restricted relation.
//!
//! [`Checker::brute_force_check`] is an intentionally independent
//! implementation that enumerates every restricted computation as a lasso
//! and evaluates path-by-path. It exists to cross-validate the fixpoint
//! engine and is size-guarded; keep the two implementations separate.
//!
//! The extended structures ([`ExtendedStructureF`], [`ExtendedStructureE`])
//! re-express rule compliance and communication containment as state
//! labelings. They are secondary views used to cross-check the direct
//! definitions of [`Checker::path_follows`] and
//! [`Checker::structurally_independent`].

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::logic::{subformulas, Formula, TemporalGoal};
use crate::model::{ActionId, AgentId, ModelError, Somas, StateId};

/// Largest state count [`Checker::brute_force_check`] accepts; path
/// enumeration is exponential and exists only to validate small models.
pub const BRUTE_FORCE_STATE_LIMIT: usize = 12;

/// Largest coalition [`Checker::full_contribution`] scans; minimality
/// enumerates subsets, so the cost doubles per extra agent.
pub const FULL_CONTRIBUTION_AGENT_LIMIT: usize = 20;

/// Evaluator for community atoms: given the model, a state, and the atom's
/// user and middle-agent name sets, decide the atom. Errors are reported
/// verbatim as [`CheckError::ComAtom`].
pub type ComHookFn =
    dyn Fn(&Somas, StateId, &BTreeSet<String>, &BTreeSet<String>) -> Result<bool, String>;

/// Lasso-enumeration callback: gets the path and the index its final
/// state loops back to; returning false stops the enumeration.
type LassoVisit<'v> = dyn FnMut(&[StateId], usize) -> Result<bool, CheckError> + 'v;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown agent `{0}` in coalition")]
    UnboundAgent(String),
    #[error("formula contains a community atom but no community evaluator is registered")]
    NoComHook,
    #[error("community atom evaluation failed: {0}")]
    ComAtom(String),
    #[error("model has {states} states, over the {op} limit of {limit}")]
    TooLarge {
        op: &'static str,
        states: usize,
        limit: usize,
    },
    #[error("coalition has {size} agents, over the subset-scan limit of {limit}")]
    CoalitionTooLarge { size: usize, limit: usize },
    #[error("not a computation of the model: no joint move takes `{from}` to `{to}`")]
    InvalidPath { from: String, to: String },
}

/// A state of the follow-tracking structure: the current base state plus
/// the base state the computation just came from (`None` at computation
/// starts).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExtendedStateF {
    pub prev: Option<StateId>,
    pub curr: StateId,
}

/// The follow-tracking view of a model: one state per computation start and
/// one per transition edge, labeled with the base propositions of the
/// current state plus `followed_<agent>` markers recording whether the edge
/// taken is compatible with that agent's prescribed action at the source.
///
/// Availability is inherited from the base model at `curr`; transitions go
/// from `⟨x, q⟩` under joint move `v` to `⟨q, δ(q, v)⟩`.
#[derive(Clone, Debug)]
pub struct ExtendedStructureF {
    pub states: Vec<ExtendedStateF>,
    /// Parallel to `states`.
    pub labeling: Vec<BTreeSet<String>>,
    /// Parallel to `states`; values index into `states`.
    pub transitions: Vec<BTreeMap<Vec<ActionId>, usize>>,
}

impl ExtendedStructureF {
    pub fn index_of(&self, prev: Option<StateId>, curr: StateId) -> Option<usize> {
        self.states
            .binary_search(&ExtendedStateF { prev, curr })
            .ok()
    }
}

/// The name of the marker recording that `agent` followed its rule on the
/// edge into an [`ExtendedStructureF`] state.
pub fn followed_prop(agent: &str) -> String {
    format!("followed_{agent}")
}

/// A containment view of a model for a fixed coalition `A`: base states and
/// transitions, with the labeling extended by one `InA_<agent>` proposition
/// per member, present exactly where that member's communication set stays
/// inside `A`.
#[derive(Clone, Debug)]
pub struct ExtendedStructureE {
    pub coalition: BTreeSet<AgentId>,
    /// Parallel to the base states: base propositions plus containment
    /// markers.
    pub labeling: Vec<BTreeSet<String>>,
}

/// The name of the containment marker for `agent`.
pub fn in_a_prop(agent: &str) -> String {
    format!("InA_{agent}")
}

/// Outcome of a full-contribution query: the three conditions separately,
/// plus a counterexample subset when minimality fails. The coalition fully
/// contributes to the goal exactly when all three hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContributionVerdict {
    pub coalition: BTreeSet<AgentId>,
    pub goal: TemporalGoal,
    /// The coalition's rules alone force the goal.
    pub semantic: bool,
    /// No member ever hears an agent outside the coalition while the
    /// coalition follows its rules.
    pub structural: bool,
    /// No proper subset passes both tests above.
    pub minimal: bool,
    /// A proper subset passing both tests, when one exists.
    pub witness: Option<BTreeSet<AgentId>>,
}

impl ContributionVerdict {
    pub fn full(&self) -> bool {
        self.semantic && self.structural && self.minimal
    }
}

/// Checking façade over a model, carrying the optional community-atom
/// evaluator. All methods are pure; a `Checker` is cheap to construct.
pub struct Checker<'a> {
    somas: &'a Somas,
    com_hook: Option<&'a ComHookFn>,
}

impl<'a> Checker<'a> {
    pub fn new(somas: &'a Somas) -> Checker<'a> {
        Checker {
            somas,
            com_hook: None,
        }
    }

    /// A checker that evaluates community atoms through `hook`; without one,
    /// formulas containing community atoms are rejected.
    pub fn with_com_hook(somas: &'a Somas, hook: &'a ComHookFn) -> Checker<'a> {
        Checker {
            somas,
            com_hook: Some(hook),
        }
    }

    pub fn somas(&self) -> &Somas {
        self.somas
    }

    /// Does `f` hold at `q`?
    pub fn check(&self, q: StateId, f: &Formula) -> Result<bool, CheckError> {
        let n = self.somas.cgs.state_count();
        if q.0 >= n {
            return Err(ModelError::UnknownState(format!("#{}", q.0)).into());
        }
        Ok(self.label_all(f)?[f][q.0])
    }

    /// All states where `f` holds.
    pub fn label_states(&self, f: &Formula) -> Result<BTreeSet<StateId>, CheckError> {
        let sat = self.label_all(f)?;
        Ok(sat[f]
            .iter()
            .enumerate()
            .filter_map(|(i, &holds)| holds.then_some(StateId(i)))
            .collect())
    }

    /// Evaluates every subformula bottom-up; the result maps each one to its
    /// per-state truth vector.
    fn label_all(&self, f: &Formula) -> Result<HashMap<Formula, Vec<bool>>, CheckError> {
        let n = self.somas.cgs.state_count();
        let mut sat: HashMap<Formula, Vec<bool>> = HashMap::new();
        let mut relations: HashMap<BTreeSet<AgentId>, Restricted> = HashMap::new();

        for sub in subformulas(f) {
            let truth = match &sub {
                Formula::True => vec![true; n],
                Formula::Prop(p) => (0..n)
                    .map(|q| self.somas.cgs.labeling[q].contains(p))
                    .collect(),
                Formula::Com(users, middles) => {
                    let hook = self.com_hook.ok_or(CheckError::NoComHook)?;
                    let mut truth = Vec::with_capacity(n);
                    for q in 0..n {
                        truth.push(
                            hook(self.somas, StateId(q), users, middles)
                                .map_err(CheckError::ComAtom)?,
                        );
                    }
                    truth
                }
                Formula::Not(x) => sat[x.as_ref()].iter().map(|b| !b).collect(),
                Formula::And(l, r) => sat[l.as_ref()]
                    .iter()
                    .zip(&sat[r.as_ref()])
                    .map(|(&a, &b)| a && b)
                    .collect(),
                Formula::Next(a, x) => {
                    let rel = self.relation(&mut relations, a)?;
                    let xs = &sat[x.as_ref()];
                    (0..n)
                        .map(|q| rel.succ[q].iter().all(|s| xs[s.0]))
                        .collect()
                }
                Formula::Globally(a, x) => {
                    let rel = self.relation(&mut relations, a)?;
                    always(rel, &sat[x.as_ref()])
                }
                Formula::Until(a, l, r) => {
                    let rel = self.relation(&mut relations, a)?;
                    until(rel, &sat[l.as_ref()], &sat[r.as_ref()])
                }
            };
            sat.insert(sub, truth);
        }
        Ok(sat)
    }

    /// The one-step relation with `coalition` pinned to its prescribed
    /// actions, built once per distinct coalition within a query.
    fn relation<'m>(
        &self,
        cache: &'m mut HashMap<BTreeSet<AgentId>, Restricted>,
        coalition: &BTreeSet<String>,
    ) -> Result<&'m Restricted, CheckError> {
        let ids = self.bind(coalition)?;
        if !cache.contains_key(&ids) {
            let rel = Restricted::build(self.somas, &ids)?;
            cache.insert(ids.clone(), rel);
        }
        Ok(&cache[&ids])
    }

    /// Resolves coalition names against the model's agents.
    pub fn bind(&self, coalition: &BTreeSet<String>) -> Result<BTreeSet<AgentId>, CheckError> {
        coalition
            .iter()
            .map(|name| {
                self.somas
                    .cgs
                    .agent_id(name)
                    .ok_or_else(|| CheckError::UnboundAgent(name.clone()))
            })
            .collect()
    }

    fn coalition_names(&self, ids: &BTreeSet<AgentId>) -> Result<BTreeSet<String>, CheckError> {
        ids.iter()
            .map(|a| {
                if a.0 < self.somas.cgs.agent_count() {
                    Ok(self.somas.cgs.agent_name(*a).to_string())
                } else {
                    Err(ModelError::UnknownAgent(format!("#{}", a.0)).into())
                }
            })
            .collect()
    }

    /// Independent reference implementation of [`Checker::check`]: descends
    /// the formula and decides temporal operators by enumerating every
    /// restricted computation from the state as a stem-plus-cycle path.
    /// Exponential; refuses models over [`BRUTE_FORCE_STATE_LIMIT`] states.
    pub fn brute_force_check(&self, q: StateId, f: &Formula) -> Result<bool, CheckError> {
        let n = self.somas.cgs.state_count();
        if n > BRUTE_FORCE_STATE_LIMIT {
            return Err(CheckError::TooLarge {
                op: "brute-force checking",
                states: n,
                limit: BRUTE_FORCE_STATE_LIMIT,
            });
        }
        if q.0 >= n {
            return Err(ModelError::UnknownState(format!("#{}", q.0)).into());
        }
        let mut memo = HashMap::new();
        self.bf(q, f, &mut memo)
    }

    fn bf(
        &self,
        q: StateId,
        f: &Formula,
        memo: &mut HashMap<(Formula, StateId), bool>,
    ) -> Result<bool, CheckError> {
        if let Some(&hit) = memo.get(&(f.clone(), q)) {
            return Ok(hit);
        }
        let value = match f {
            Formula::True => true,
            Formula::Prop(p) => self.somas.cgs.labeling[q.0].contains(p),
            Formula::Com(users, middles) => {
                let hook = self.com_hook.ok_or(CheckError::NoComHook)?;
                hook(self.somas, q, users, middles).map_err(CheckError::ComAtom)?
            }
            Formula::Not(x) => !self.bf(q, x, memo)?,
            Formula::And(l, r) => self.bf(q, l, memo)? && self.bf(q, r, memo)?,
            Formula::Next(a, x) => {
                let ids = self.bind(a)?;
                let mut all = true;
                for s in self.somas.restricted_successors(&ids, q)? {
                    if !self.bf(s, x, memo)? {
                        all = false;
                        break;
                    }
                }
                all
            }
            Formula::Globally(a, x) => {
                let ids = self.bind(a)?;
                let mut all = true;
                self.for_each_lasso(&ids, q, &mut |path, _| {
                    for s in path {
                        if !self.bf(*s, x, memo)? {
                            all = false;
                            return Ok(false);
                        }
                    }
                    Ok(true)
                })?;
                all
            }
            Formula::Until(a, l, r) => {
                let ids = self.bind(a)?;
                let mut all = true;
                self.for_each_lasso(&ids, q, &mut |path, _| {
                    // The path repeats its tail forever, so a satisfying
                    // position must show up before the first repeat.
                    let mut satisfied = false;
                    for s in path {
                        if self.bf(*s, r, memo)? {
                            satisfied = true;
                            break;
                        }
                        if !self.bf(*s, l, memo)? {
                            break;
                        }
                    }
                    if !satisfied {
                        all = false;
                    }
                    Ok(all)
                })?;
                all
            }
        };
        memo.insert((f.clone(), q), value);
        Ok(value)
    }

    /// Enumerates every restricted computation from `q` up to (and
    /// including) its first repeated state, calling `visit` with the path
    /// and the index the repeat points back to. `visit` returning false
    /// stops the enumeration early.
    fn for_each_lasso(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
        visit: &mut LassoVisit<'_>,
    ) -> Result<(), CheckError> {
        let mut succ: Vec<Option<Vec<StateId>>> = vec![None; self.somas.cgs.state_count()];
        let mut path = vec![q];
        let mut position: HashMap<StateId, usize> = HashMap::from([(q, 0)]);
        self.lasso_step(coalition, &mut succ, &mut path, &mut position, visit)?;
        Ok(())
    }

    fn lasso_step(
        &self,
        coalition: &BTreeSet<AgentId>,
        succ: &mut Vec<Option<Vec<StateId>>>,
        path: &mut Vec<StateId>,
        position: &mut HashMap<StateId, usize>,
        visit: &mut LassoVisit<'_>,
    ) -> Result<bool, CheckError> {
        let here = *path.last().expect("path never empty");
        if succ[here.0].is_none() {
            let set = self.somas.restricted_successors(coalition, here)?;
            succ[here.0] = Some(set.into_iter().collect());
        }
        for next in succ[here.0].clone().expect("just filled") {
            if let Some(&back) = position.get(&next) {
                path.push(next);
                let keep_going = visit(path, back)?;
                path.pop();
                if !keep_going {
                    return Ok(false);
                }
                continue;
            }
            position.insert(next, path.len());
            path.push(next);
            let keep_going = self.lasso_step(coalition, succ, path, position, visit)?;
            path.pop();
            position.remove(&next);
            if !keep_going {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Builds the follow-tracking structure: a start state per base state,
    /// an edge state per transition, labels carried over from the current
    /// base state plus `followed_<agent>` markers (see [`followed_prop`]).
    pub fn build_sf(&self) -> Result<ExtendedStructureF, CheckError> {
        let cgs = &self.somas.cgs;
        let n = cgs.state_count();
        let k = cgs.agent_count();

        let mut states: Vec<ExtendedStateF> = (0..n)
            .map(|q| ExtendedStateF {
                prev: None,
                curr: StateId(q),
            })
            .collect();
        let mut edges: BTreeSet<(StateId, StateId)> = BTreeSet::new();
        for q in 0..n {
            for target in cgs.transitions[q].values() {
                edges.insert((StateId(q), *target));
            }
        }
        states.extend(edges.iter().map(|(prev, curr)| ExtendedStateF {
            prev: Some(*prev),
            curr: *curr,
        }));
        states.sort();

        let index: BTreeMap<ExtendedStateF, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i))
            .collect();

        let mut prescribed = Vec::with_capacity(n);
        for q in 0..n {
            let mut per_agent = Vec::with_capacity(k);
            for a in 0..k {
                per_agent.push(self.somas.prescribed_action(AgentId(a), StateId(q))?);
            }
            prescribed.push(per_agent);
        }

        let mut labeling = Vec::with_capacity(states.len());
        let mut transitions = Vec::with_capacity(states.len());
        for state in &states {
            let mut label = cgs.labeling[state.curr.0].clone();
            if let Some(prev) = state.prev {
                // An agent followed its rule on this edge if some joint
                // move realizing the edge uses its prescribed action at the
                // source state.
                for a in 0..k {
                    let compatible = cgs.transitions[prev.0].iter().any(|(v, target)| {
                        *target == state.curr && v[a] == prescribed[prev.0][a]
                    });
                    if compatible {
                        label.insert(followed_prop(cgs.agent_name(AgentId(a))));
                    }
                }
            }
            labeling.push(label);

            let row = cgs.transitions[state.curr.0]
                .iter()
                .map(|(v, target)| {
                    let next = ExtendedStateF {
                        prev: Some(state.curr),
                        curr: *target,
                    };
                    (v.clone(), index[&next])
                })
                .collect();
            transitions.push(row);
        }

        Ok(ExtendedStructureF {
            states,
            labeling,
            transitions,
        })
    }

    /// Does the finite path stay compatible with every coalition member's
    /// prescribed actions? Each step must be realizable by a joint move
    /// that uses the prescribed action of every member at the step's source
    /// state. Errors if some step is not a transition of the model at all.
    pub fn path_follows(
        &self,
        coalition: &BTreeSet<AgentId>,
        path: &[StateId],
    ) -> Result<bool, CheckError> {
        let cgs = &self.somas.cgs;
        for s in path {
            if s.0 >= cgs.state_count() {
                return Err(ModelError::UnknownState(format!("#{}", s.0)).into());
            }
        }
        let mut follows = true;
        for window in path.windows(2) {
            let (from, to) = (window[0], window[1]);
            let mut edge_exists = false;
            let mut compatible = false;
            let mut prescribed: BTreeMap<AgentId, ActionId> = BTreeMap::new();
            for a in coalition {
                prescribed.insert(*a, self.somas.prescribed_action(*a, from)?);
            }
            for (v, target) in &cgs.transitions[from.0] {
                if *target != to {
                    continue;
                }
                edge_exists = true;
                if prescribed.iter().all(|(a, act)| v[a.0] == *act) {
                    compatible = true;
                    break;
                }
            }
            if !edge_exists {
                return Err(CheckError::InvalidPath {
                    from: cgs.state_name(from).to_string(),
                    to: cgs.state_name(to).to_string(),
                });
            }
            follows &= compatible;
        }
        Ok(follows)
    }

    /// Builds the containment view for `coalition`: base labeling plus an
    /// `InA_<agent>` marker (see [`in_a_prop`]) wherever that member's
    /// communication set is inside the coalition.
    pub fn build_se(&self, coalition: &BTreeSet<AgentId>) -> Result<ExtendedStructureE, CheckError> {
        let cgs = &self.somas.cgs;
        for a in coalition {
            if a.0 >= cgs.agent_count() {
                return Err(ModelError::UnknownAgent(format!("#{}", a.0)).into());
            }
        }
        let labeling = (0..cgs.state_count())
            .map(|q| {
                let mut label = cgs.labeling[q].clone();
                for a in coalition {
                    if self.somas.rules[a.0].tau[q].is_subset(coalition) {
                        label.insert(in_a_prop(cgs.agent_name(*a)));
                    }
                }
                label
            })
            .collect();
        Ok(ExtendedStructureE {
            coalition: coalition.clone(),
            labeling,
        })
    }

    /// Is `coalition` closed under communication from `q`? True when no
    /// member's communication set leaves the coalition at any state
    /// reachable while the coalition follows its rules.
    pub fn structurally_independent(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
    ) -> Result<bool, CheckError> {
        for a in coalition {
            if a.0 >= self.somas.cgs.agent_count() {
                return Err(ModelError::UnknownAgent(format!("#{}", a.0)).into());
            }
        }
        for s in self.somas.out_reachable(coalition, q)? {
            for a in coalition {
                if !self.somas.rules[a.0].tau[s.0].is_subset(coalition) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Do the coalition's rules alone force the goal from `q`, whatever the
    /// other agents do?
    pub fn semantically_independent(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
        goal: &TemporalGoal,
    ) -> Result<bool, CheckError> {
        let names = self.coalition_names(coalition)?;
        self.check(q, &goal.with_coalition(&names))
    }

    /// Decides full contribution of `coalition` to `goal` at `q`: the
    /// semantic and structural conditions for the coalition itself, and
    /// minimality against every proper subset. Subsets failing the (cheap)
    /// structural test are pruned before the semantic check; subsets are
    /// visited smallest-first, so a reported witness has minimal size.
    pub fn full_contribution(
        &self,
        coalition: &BTreeSet<AgentId>,
        q: StateId,
        goal: &TemporalGoal,
    ) -> Result<ContributionVerdict, CheckError> {
        if coalition.len() > FULL_CONTRIBUTION_AGENT_LIMIT {
            return Err(CheckError::CoalitionTooLarge {
                size: coalition.len(),
                limit: FULL_CONTRIBUTION_AGENT_LIMIT,
            });
        }
        let structural = self.structurally_independent(coalition, q)?;
        let semantic = self.semantically_independent(coalition, q, goal)?;

        let members: Vec<AgentId> = coalition.iter().copied().collect();
        let mut subsets: Vec<u32> = (0..(1u32 << members.len()) - 1).collect();
        subsets.sort_by_key(|m| (m.count_ones(), *m));

        let mut witness = None;
        for mask in subsets {
            let subset: BTreeSet<AgentId> = members
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| *a)
                .collect();
            if !self.structurally_independent(&subset, q)? {
                continue;
            }
            if self.semantically_independent(&subset, q, goal)? {
                witness = Some(subset);
                break;
            }
        }

        Ok(ContributionVerdict {
            coalition: coalition.clone(),
            goal: goal.clone(),
            semantic,
            structural,
            minimal: witness.is_none(),
            witness,
        })
    }
}

/// A coalition-restricted one-step relation in adjacency form, with
/// predecessor lists for the linear-time fixpoints.
struct Restricted {
    succ: Vec<Vec<StateId>>,
    pred: Vec<Vec<StateId>>,
}

impl Restricted {
    fn build(somas: &Somas, coalition: &BTreeSet<AgentId>) -> Result<Restricted, CheckError> {
        let n = somas.cgs.state_count();
        let mut succ = Vec::with_capacity(n);
        let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for q in 0..n {
            let targets: Vec<StateId> = somas
                .restricted_successors(coalition, StateId(q))?
                .into_iter()
                .collect();
            for t in &targets {
                pred[t.0].push(StateId(q));
            }
            succ.push(targets);
        }
        Ok(Restricted { succ, pred })
    }
}

/// `⟨A⟩G φ` as a greatest fixpoint: start from the φ-states and delete any
/// state with a successor outside the set until stable.
fn always(rel: &Restricted, phi: &[bool]) -> Vec<bool> {
    let n = phi.len();
    let mut holds: Vec<bool> = phi.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&q| !holds[q]).collect();
    while let Some(q) = queue.pop_front() {
        for p in &rel.pred[q] {
            if holds[p.0] {
                holds[p.0] = false;
                queue.push_back(p.0);
            }
        }
    }
    holds
}

/// `⟨A⟩(φ U ψ)` as a least fixpoint: seed with the ψ-states; a φ-state
/// joins once all of its successors have joined.
fn until(rel: &Restricted, phi: &[bool], psi: &[bool]) -> Vec<bool> {
    let n = phi.len();
    let mut pending: Vec<usize> = rel.succ.iter().map(Vec::len).collect();
    let mut holds: Vec<bool> = psi.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&q| holds[q]).collect();
    while let Some(q) = queue.pop_front() {
        for p in &rel.pred[q] {
            pending[p.0] -= 1;
            if pending[p.0] == 0 && phi[p.0] && !holds[p.0] {
                holds[p.0] = true;
                queue.push_back(p.0);
            }
        }
    }
    holds
}
