//! Dependence graphs, layered decomposition and the coalition-search
//! procedure.
//!
//! The dependence graph records who listens to whom across the states a
//! computation set can reach: an edge `(a, b)` means `b` gets input from
//! `a` somewhere along the way. Cycles are condensed into single nodes,
//! the resulting DAG is layered by longest distance from the sources, and
//! the coalitions that never hear anyone outside themselves are exactly
//! the predecessor-closed node sets. [`fcon_somas`] walks those candidate
//! coalitions smallest-first and keeps the ones that fully contribute to a
//! goal: structurally closed, sufficient on their own, and minimal.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::checker::{CheckError, Checker, ComHookFn};
use crate::logic::{subformulas, Formula, TemporalGoal};
use crate::model::{AgentId, ModelError, Somas, StateId};

/// Default bound on how many candidate coalitions [`independent_coalitions`]
/// may produce before refusing; dense graphs have exponentially many
/// predecessor-closed sets.
pub const DEFAULT_CANDIDATE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DecompError {
    #[error(transparent)]
    Check(CheckError),
    #[error("more than {cap} candidate coalitions; raise the cap to proceed")]
    TooManyCoalitions { cap: usize },
}

impl From<CheckError> for DecompError {
    fn from(e: CheckError) -> DecompError {
        DecompError::Check(e)
    }
}

impl From<ModelError> for DecompError {
    fn from(e: ModelError) -> DecompError {
        DecompError::Check(CheckError::Model(e))
    }
}

/// A directed who-hears-whom graph. Node ids index `names`; an edge
/// `(a, b)` means `b` gets input from `a`. Self-edges are kept (an agent
/// normally hears itself) but never influence layers or closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependenceGraph {
    pub names: Vec<String>,
    pub edges: BTreeSet<(AgentId, AgentId)>,
}

impl DependenceGraph {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }
}

/// Assignment of every agent to a layer: sources (after condensation) sit
/// in layer 0, every other node one past its furthest parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    /// Disjoint, jointly exhaustive, indexed by layer.
    pub layers: Vec<BTreeSet<AgentId>>,
    /// Layer index per node id.
    pub rho: Vec<usize>,
}

impl Decomposition {
    pub fn height(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }
}

/// Why a candidate coalition was turned down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    /// Some member hears an agent outside the coalition on its own runs.
    NotStructural,
    /// The coalition's rules do not force the goal.
    NotSemantic,
    /// A proper subset already suffices.
    NotMinimal,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NotStructural => "not-structural",
            RejectReason::NotSemantic => "not-semantic",
            RejectReason::NotMinimal => "not-minimal",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of the coalition search: confirmed (coalition, goal) pairs in
/// discovery order, plus the turned-down coalitions with the first
/// condition each one failed (deduplicated per coalition and reason).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContributionSet {
    pub entries: Vec<(BTreeSet<AgentId>, TemporalGoal)>,
    pub rejections: Vec<(BTreeSet<AgentId>, RejectReason)>,
}

/// Tuning knobs for [`fcon_somas_opts`].
pub struct FconOptions<'a> {
    /// Evaluator for community atoms appearing in the goals.
    pub com_hook: Option<&'a ComHookFn>,
    /// Bound on the candidate enumeration.
    pub candidate_cap: usize,
}

impl Default for FconOptions<'_> {
    fn default() -> FconOptions<'static> {
        FconOptions {
            com_hook: None,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
        }
    }
}

/// The who-hears-whom graph over every state reachable while `coalition`
/// follows its rules from `q`. Nodes are all agents; edges collect every
/// agent's communication sets at the reached states.
pub fn dependence_graph(
    somas: &Somas,
    coalition: &BTreeSet<AgentId>,
    q: StateId,
) -> Result<DependenceGraph, ModelError> {
    let cgs = &somas.cgs;
    let mut edges = BTreeSet::new();
    for s in somas.out_reachable(coalition, q)? {
        for b in 0..cgs.agent_count() {
            for a in &somas.rules[b].tau[s.0] {
                edges.insert((*a, AgentId(b)));
            }
        }
    }
    Ok(DependenceGraph {
        names: cgs.agents.clone(),
        edges,
    })
}

/// The dependence graph along the run where everyone follows their rules.
pub fn star_dependence_graph(somas: &Somas, q: StateId) -> Result<DependenceGraph, ModelError> {
    dependence_graph(somas, &somas.cgs.all_agents(), q)
}

/// Collapses strongly connected components into single nodes. Returns the
/// component DAG (self-edges gone, component named after its members) and
/// the node-to-component assignment. Components are numbered by their
/// smallest member.
pub fn condense(g: &DependenceGraph) -> (DependenceGraph, Vec<usize>) {
    let n = g.node_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in &g.edges {
        adj[a.0].push(b.0);
    }

    // Tarjan's algorithm; the recursion depth is bounded by the agent
    // count, which stays small.
    struct Scc<'g> {
        adj: &'g [Vec<usize>],
        index: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next_index: usize,
        components: Vec<Vec<usize>>,
    }
    impl Scc<'_> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.next_index);
            self.lowlink[v] = self.next_index;
            self.next_index += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for &w in &self.adj[v].to_vec() {
                if self.index[w].is_none() {
                    self.visit(w);
                    self.lowlink[v] = self.lowlink[v].min(self.lowlink[w]);
                } else if self.on_stack[w] {
                    self.lowlink[v] = self.lowlink[v].min(self.index[w].unwrap());
                }
            }
            if self.lowlink[v] == self.index[v].unwrap() {
                let mut component = Vec::new();
                loop {
                    let w = self.stack.pop().unwrap();
                    self.on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort();
                self.components.push(component);
            }
        }
    }

    let mut scc = Scc {
        adj: &adj,
        index: vec![None; n],
        lowlink: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next_index: 0,
        components: Vec::new(),
    };
    for v in 0..n {
        if scc.index[v].is_none() {
            scc.visit(v);
        }
    }

    let mut components = scc.components;
    components.sort_by_key(|c| c[0]);

    let mut membership = vec![0; n];
    for (ci, members) in components.iter().enumerate() {
        for &v in members {
            membership[v] = ci;
        }
    }
    let names = components
        .iter()
        .map(|members| {
            if members.len() == 1 {
                g.names[members[0]].clone()
            } else {
                let joined: Vec<&str> = members.iter().map(|&v| g.names[v].as_str()).collect();
                format!("{{{}}}", joined.join(","))
            }
        })
        .collect();
    let edges = g
        .edges
        .iter()
        .filter(|(a, b)| membership[a.0] != membership[b.0])
        .map(|(a, b)| (AgentId(membership[a.0]), AgentId(membership[b.0])))
        .collect();

    (DependenceGraph { names, edges }, membership)
}

/// Layers the graph: each condensed component sits one past its furthest
/// parent, sources at layer 0; an agent inherits its component's layer.
pub fn layers(g: &DependenceGraph) -> Decomposition {
    let (dag, membership) = condense(g);
    let rho_comp = component_layers(&dag);
    let rho: Vec<usize> = membership.iter().map(|&c| rho_comp[c]).collect();
    let height = rho.iter().copied().max().unwrap_or(0);
    let mut layers = vec![BTreeSet::new(); height + 1];
    for (v, &r) in rho.iter().enumerate() {
        layers[r].insert(AgentId(v));
    }
    Decomposition { layers, rho }
}

/// Longest-distance-from-a-source layer per node of an acyclic graph.
fn component_layers(dag: &DependenceGraph) -> Vec<usize> {
    let k = dag.node_count();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (a, b) in &dag.edges {
        parents[b.0].push(a.0);
    }
    fn depth(v: usize, parents: &[Vec<usize>], memo: &mut [Option<usize>]) -> usize {
        if let Some(d) = memo[v] {
            return d;
        }
        let d = parents[v]
            .iter()
            .map(|&p| depth(p, parents, memo) + 1)
            .max()
            .unwrap_or(0);
        memo[v] = Some(d);
        d
    }
    let mut memo = vec![None; k];
    (0..k).map(|v| depth(v, &parents, &mut memo)).collect()
}

/// All nonempty predecessor-closed node sets of `g`: the coalitions that
/// never get input from outside themselves. Ordered by treating the
/// condensed components, sorted by (layer, smallest member), as bit
/// positions and counting upward, so layer-0 singletons come first and
/// every set precedes its proper supersets. Capped by
/// [`DEFAULT_CANDIDATE_CAP`].
pub fn independent_coalitions(g: &DependenceGraph) -> Result<Vec<BTreeSet<AgentId>>, DecompError> {
    independent_coalitions_capped(g, DEFAULT_CANDIDATE_CAP)
}

/// [`independent_coalitions`] with an explicit output bound.
pub fn independent_coalitions_capped(
    g: &DependenceGraph,
    cap: usize,
) -> Result<Vec<BTreeSet<AgentId>>, DecompError> {
    let (dag, membership) = condense(g);
    let rho = component_layers(&dag);
    let k = dag.node_count();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &c) in membership.iter().enumerate() {
        members[c].push(v);
    }

    // Bit position per component: by layer, then smallest member.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (rho[c], members[c][0]));
    let mut position = vec![0; k];
    for (pos, &c) in order.iter().enumerate() {
        position[c] = pos;
    }
    // Parents always sit on lower positions: their layer is smaller.
    let mut parents_at: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (a, b) in &dag.edges {
        parents_at[position[b.0]].push(position[a.0]);
    }

    // Every closed set, found by deciding each position in turn; a
    // position may be included only once all its parents are in.
    let mut closed: Vec<Vec<usize>> = Vec::new();
    let mut chosen: Vec<bool> = vec![false; k];
    fn walk(
        pos: usize,
        k: usize,
        parents_at: &[Vec<usize>],
        chosen: &mut Vec<bool>,
        closed: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<(), DecompError> {
        if pos == k {
            let set: Vec<usize> = (0..k).filter(|&p| chosen[p]).collect();
            if !set.is_empty() {
                if closed.len() >= cap {
                    return Err(DecompError::TooManyCoalitions { cap });
                }
                closed.push(set);
            }
            return Ok(());
        }
        chosen[pos] = false;
        walk(pos + 1, k, parents_at, chosen, closed, cap)?;
        if parents_at[pos].iter().all(|&p| chosen[p]) {
            chosen[pos] = true;
            walk(pos + 1, k, parents_at, chosen, closed, cap)?;
            chosen[pos] = false;
        }
        Ok(())
    }
    walk(0, k, &parents_at, &mut chosen, &mut closed, cap)?;

    // Increasing-bitmask order, expressed on index vectors so it survives
    // more than 64 components: compare highest bits first.
    closed.sort_by(|x, y| {
        let xs = x.iter().rev();
        let ys = y.iter().rev();
        xs.cmp(ys)
    });

    Ok(closed
        .into_iter()
        .map(|positions| {
            positions
                .into_iter()
                .flat_map(|p| members[order[p]].iter().copied().map(AgentId))
                .collect()
        })
        .collect())
}

/// Runs the coalition search from `q` with default options; see
/// [`fcon_somas_opts`].
pub fn fcon_somas(
    somas: &Somas,
    q: StateId,
    goals: &[TemporalGoal],
) -> Result<ContributionSet, DecompError> {
    fcon_somas_opts(somas, q, goals, &FconOptions::default())
}

/// Finds every coalition that fully contributes to one of `goals` at `q`.
///
/// Candidates are the predecessor-closed sets of the everyone-compliant
/// dependence graph; closure there is necessary for structural
/// independence, so nothing is missed by the pruning. Each candidate is
/// re-checked structurally against its own reachable states, then checked
/// semantically per goal, then for minimality against the already
/// confirmed smaller candidates (the empty coalition participates, so
/// goals that hold no matter what are nobody's contribution). Coalitions
/// named by a goal's community atoms are audited even when pruned away,
/// so the report says why they fail.
pub fn fcon_somas_opts(
    somas: &Somas,
    q: StateId,
    goals: &[TemporalGoal],
    opts: &FconOptions,
) -> Result<ContributionSet, DecompError> {
    let graph = star_dependence_graph(somas, q)?;
    let candidates = independent_coalitions_capped(&graph, opts.candidate_cap)?;
    let checker = match opts.com_hook {
        Some(hook) => Checker::with_com_hook(somas, hook),
        None => Checker::new(somas),
    };

    let mut search = Search {
        checker: &checker,
        q,
        goals,
        result: ContributionSet::default(),
        seen_rejections: BTreeSet::new(),
        confirmed: Vec::new(),
    };
    let empty_verdicts = search.semantic_verdicts(&BTreeSet::new())?;
    search.confirmed.push((BTreeSet::new(), empty_verdicts));

    for candidate in &candidates {
        if !checker.structurally_independent(candidate, q)? {
            search.reject(candidate, RejectReason::NotStructural);
            continue;
        }
        search.process(candidate)?;
    }

    let candidate_set: BTreeSet<&BTreeSet<AgentId>> = candidates.iter().collect();
    for audit in com_atom_coalitions(goals) {
        // Atom names are interpreted by the hook and need not be agents;
        // only fully bindable sets denote a coalition worth auditing.
        let Ok(ids) = checker.bind(&audit) else {
            continue;
        };
        if ids.is_empty() || candidate_set.contains(&ids) {
            continue;
        }
        if checker.structurally_independent(&ids, q)? {
            // Unreachable while closure pruning is sound; processed anyway
            // rather than silently dropped.
            search.process(&ids)?;
        } else {
            search.reject(&ids, RejectReason::NotStructural);
        }
    }

    Ok(search.result)
}

/// Working state of one [`fcon_somas_opts`] run.
struct Search<'a> {
    checker: &'a Checker<'a>,
    q: StateId,
    goals: &'a [TemporalGoal],
    result: ContributionSet,
    seen_rejections: BTreeSet<(BTreeSet<AgentId>, RejectReason)>,
    /// Structurally independent sets already seen, with per-goal semantic
    /// verdicts; minimality of a later candidate is a scan of this list.
    confirmed: Vec<(BTreeSet<AgentId>, Vec<bool>)>,
}

impl Search<'_> {
    fn reject(&mut self, set: &BTreeSet<AgentId>, why: RejectReason) {
        if self.seen_rejections.insert((set.clone(), why)) {
            self.result.rejections.push((set.clone(), why));
        }
    }

    fn semantic_verdicts(&self, coalition: &BTreeSet<AgentId>) -> Result<Vec<bool>, CheckError> {
        self.goals
            .iter()
            .map(|g| self.checker.semantically_independent(coalition, self.q, g))
            .collect()
    }

    /// Judges a structurally independent coalition against every goal and
    /// records it for the minimality checks of its supersets.
    fn process(&mut self, coalition: &BTreeSet<AgentId>) -> Result<(), DecompError> {
        let verdicts = self.semantic_verdicts(coalition)?;
        for (gi, goal) in self.goals.iter().enumerate() {
            if !verdicts[gi] {
                self.reject(coalition, RejectReason::NotSemantic);
                continue;
            }
            let shadowed = self
                .confirmed
                .iter()
                .any(|(b, v)| v[gi] && b.len() < coalition.len() && b.is_subset(coalition));
            if shadowed {
                self.reject(coalition, RejectReason::NotMinimal);
            } else {
                self.result.entries.push((coalition.clone(), goal.clone()));
            }
        }
        self.confirmed.push((coalition.clone(), verdicts));
        Ok(())
    }
}

/// The agent-name sets mentioned by community atoms across `goals`, in
/// first-appearance order.
fn com_atom_coalitions(goals: &[TemporalGoal]) -> Vec<BTreeSet<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut scan = |f: &Formula| {
        for sub in subformulas(f) {
            if let Formula::Com(users, middles) = sub {
                let set: BTreeSet<String> = users.union(&middles).cloned().collect();
                if seen.insert(set.clone()) {
                    out.push(set);
                }
            }
        }
    };
    for goal in goals {
        match goal {
            TemporalGoal::Next(f) | TemporalGoal::Globally(f) => scan(f),
            TemporalGoal::Until(f, g) => {
                scan(f);
                scan(g);
            }
        }
    }
    out
}

/// Renders the graph as DOT text: nodes first, lexicographic, then edges
/// sorted by endpoint names.
pub fn export_dot(g: &DependenceGraph) -> String {
    let mut out = String::from("digraph dependence {\n");
    let mut nodes: Vec<&str> = g.names.iter().map(String::as_str).collect();
    nodes.sort();
    for name in nodes {
        out.push_str(&format!("  \"{name}\";\n"));
    }
    let mut edges: Vec<(&str, &str)> = g
        .edges
        .iter()
        .map(|(a, b)| (g.names[a.0].as_str(), g.names[b.0].as_str()))
        .collect();
    edges.sort();
    for (a, b) in edges {
        out.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
    }
    out.push_str("}\n");
    out
}

/// Renders the graph with its layers as ranked clusters, layer 0 first.
pub fn export_dot_layered(g: &DependenceGraph, d: &Decomposition) -> String {
    let mut out = String::from("digraph decomposition {\n");
    for (i, layer) in d.layers.iter().enumerate() {
        out.push_str(&format!(
            "  subgraph cluster_layer{i} {{\n    label=\"L{i}\";\n    rank=same;\n"
        ));
        let mut names: Vec<&str> = layer.iter().map(|a| g.names[a.0].as_str()).collect();
        names.sort();
        for name in names {
            out.push_str(&format!("    \"{name}\";\n"));
        }
        out.push_str("  }\n");
    }
    let mut edges: Vec<(&str, &str)> = g
        .edges
        .iter()
        .map(|(a, b)| (g.names[a.0].as_str(), g.names[b.0].as_str()))
        .collect();
    edges.sort();
    for (a, b) in edges {
        out.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
    }
    out.push_str("}\n");
    out
}
