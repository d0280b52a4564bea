//! Shared corpus drivers for the property and acceptance suites. Each
//! checker returns how many concrete comparisons it made and panics with
//! the offending seed on the first violation, so failures replay exactly.

// Each test binary compiles this module separately and calls a subset.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use somas::checker::Checker;
use somas::decomp::{
    condense, fcon_somas, independent_coalitions, layers, star_dependence_graph, DependenceGraph,
};
use somas::gen::{random_coalition, random_formula, random_model, GenLimits};
use somas::logic::{Formula, TemporalGoal};
use somas::model::{AgentId, Somas, StateId};

pub fn small_limits() -> GenLimits {
    GenLimits::default()
}

/// A fresh model plus the generator stream continuing after it, so formula
/// and coalition draws stay reproducible per seed.
pub fn draw_model(seed: u64, limits: &GenLimits) -> (Somas, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let somas = random_model(&mut rng, limits);
    (somas, rng)
}

pub fn random_goal<R: Rng>(rng: &mut R, somas: &Somas, depth: usize) -> TemporalGoal {
    match rng.gen_range(0..4) {
        0 => TemporalGoal::Next(random_formula(rng, somas, depth)),
        1 => TemporalGoal::Globally(random_formula(rng, somas, depth)),
        2 => TemporalGoal::Until(
            random_formula(rng, somas, depth),
            random_formula(rng, somas, depth),
        ),
        _ => TemporalGoal::eventually(random_formula(rng, somas, depth)),
    }
}

fn id_set(somas: &Somas, names: &BTreeSet<String>) -> BTreeSet<AgentId> {
    names
        .iter()
        .map(|n| somas.cgs.agent_id(n).expect("generated name"))
        .collect()
}

fn all_subsets(k: usize) -> impl Iterator<Item = BTreeSet<AgentId>> {
    (0..(1u32 << k)).map(move |mask| {
        (0..k)
            .filter(|a| mask & (1 << a) != 0)
            .map(AgentId)
            .collect()
    })
}

/// The fast checker against the path-enumerating one, every formula at
/// every state.
pub fn oracle_equivalence(models: u64, formulas_per_model: usize) -> usize {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed, &limits);
        let checker = Checker::new(&somas);
        for _ in 0..formulas_per_model {
            let f = random_formula(&mut rng, &somas, 2);
            for q in 0..somas.cgs.state_count() {
                let fast = checker.check(StateId(q), &f).unwrap();
                let slow = checker.brute_force_check(StateId(q), &f).unwrap();
                assert_eq!(fast, slow, "seed {seed}, state #{q}, formula {f}");
                compared += 1;
            }
        }
    }
    compared
}

/// Growing the coalition never loses a goal: if A forces it, so does any
/// superset.
pub fn monotonicity(models: u64, trials_per_model: usize) -> usize {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x10_000), &limits);
        let checker = Checker::new(&somas);
        for _ in 0..trials_per_model {
            let small = random_coalition(&mut rng, &somas);
            let mut large = small.clone();
            for name in &somas.cgs.agents {
                if rng.gen_bool(0.5) {
                    large.insert(name.clone());
                }
            }
            let goal = random_goal(&mut rng, &somas, 1);
            let f_small = goal.with_coalition(&small);
            let f_large = goal.with_coalition(&large);
            for q in 0..somas.cgs.state_count() {
                let holds_small = checker.check(StateId(q), &f_small).unwrap();
                let holds_large = checker.check(StateId(q), &f_large).unwrap();
                assert!(
                    !holds_small || holds_large,
                    "seed {seed}, state #{q}: <{small:?}> forces {goal} but <{large:?}> does not"
                );
                compared += 1;
            }
        }
    }
    compared
}

/// When two coalitions are each structurally independent and their
/// rule-following runs reach the same states, shared members never hear
/// outside the intersection on those states.
pub fn intersection_property(models: u64, trials_per_model: usize) -> usize {
    let limits = small_limits();
    let mut premise_hits = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x20_000), &limits);
        let checker = Checker::new(&somas);
        for _ in 0..trials_per_model {
            let a = id_set(&somas, &random_coalition(&mut rng, &somas));
            // Half the draws take a subset of `a` to hit the premise more.
            let b = if rng.gen_bool(0.5) {
                a.iter().filter(|_| rng.gen_bool(0.6)).copied().collect()
            } else {
                id_set(&somas, &random_coalition(&mut rng, &somas))
            };
            for q in 0..somas.cgs.state_count() {
                let q = StateId(q);
                let reach_a = somas.out_reachable(&a, q).unwrap();
                let reach_b = somas.out_reachable(&b, q).unwrap();
                if reach_a != reach_b
                    || !checker.structurally_independent(&a, q).unwrap()
                    || !checker.structurally_independent(&b, q).unwrap()
                {
                    continue;
                }
                premise_hits += 1;
                let both: BTreeSet<AgentId> = a.intersection(&b).copied().collect();
                for s in &reach_a {
                    for m in &both {
                        assert!(
                            somas.rules[m.0].tau[s.0].is_subset(&both),
                            "seed {seed}: agent #{} hears outside {both:?} at state #{}",
                            m.0,
                            s.0
                        );
                    }
                }
            }
        }
    }
    premise_hits
}

/// Exhaustive full-contribution scan: two distinct fully contributing
/// coalitions for the same state and goal never share an agent.
pub fn disjointness(models: u64) -> usize {
    let limits = GenLimits {
        max_agents: 4,
        max_states: 5,
        max_actions: 2,
    };
    let mut scans = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x30_000), &limits);
        let checker = Checker::new(&somas);
        let k = somas.cgs.agent_count();
        for _ in 0..2 {
            let goal = random_goal(&mut rng, &somas, 1);
            for q in 0..somas.cgs.state_count() {
                let fulls: Vec<BTreeSet<AgentId>> = all_subsets(k)
                    .filter(|a| {
                        checker
                            .full_contribution(a, StateId(q), &goal)
                            .unwrap()
                            .full()
                    })
                    .collect();
                for (i, x) in fulls.iter().enumerate() {
                    for y in &fulls[i + 1..] {
                        assert!(
                            x.is_disjoint(y),
                            "seed {seed}, state #{q}, goal {goal}: {x:?} and {y:?} both full"
                        );
                    }
                }
                scans += 1;
            }
        }
    }
    scans
}

fn random_walk<R: Rng>(rng: &mut R, somas: &Somas) -> Vec<StateId> {
    let mut path = vec![StateId(rng.gen_range(0..somas.cgs.state_count()))];
    for _ in 0..rng.gen_range(0..5) {
        let here = *path.last().unwrap();
        let targets: Vec<StateId> = somas.cgs.transitions[here.0].values().copied().collect();
        path.push(targets[rng.gen_range(0..targets.len())]);
    }
    path
}

fn markers_hold(somas: &Somas, sf: &somas::checker::ExtendedStructureF, coalition: &BTreeSet<AgentId>, path: &[StateId]) -> bool {
    path.windows(2).all(|w| {
        let idx = sf.index_of(Some(w[0]), w[1]).expect("walked edge exists");
        coalition.iter().all(|a| {
            sf.labeling[idx]
                .contains(&somas::checker::followed_prop(somas.cgs.agent_name(*a)))
        })
    })
}

/// What the followed markers really certify along arbitrary finite walks:
/// a jointly rule-compliant path carries every member's marker, the
/// converse holds for coalitions of at most one agent, and joint
/// compliance coincides with stepping through the pinned transition
/// relation. The converse for larger coalitions is checked separately
/// (`sf_marker_gap`) because it genuinely fails: each marker quantifies
/// over realizing moves on its own, so an edge realized only by moves
/// that split the coalition's prescribed actions carries all markers
/// without any single compliant move.
pub fn sf_soundness(models: u64, paths_per_model: usize) -> usize {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x40_000), &limits);
        let checker = Checker::new(&somas);
        let sf = checker.build_sf().unwrap();
        for _ in 0..paths_per_model {
            let path = random_walk(&mut rng, &somas);
            let coalition = id_set(&somas, &random_coalition(&mut rng, &somas));
            let direct = checker.path_follows(&coalition, &path).unwrap();
            let via_markers = markers_hold(&somas, &sf, &coalition, &path);
            assert!(
                !direct || via_markers,
                "seed {seed}: compliant path {path:?} missing a marker for {coalition:?}"
            );
            if coalition.len() <= 1 {
                assert_eq!(
                    direct, via_markers,
                    "seed {seed}: singleton marker disagrees on {path:?}, {coalition:?}"
                );
            }
            let stepwise = path.windows(2).all(|w| {
                somas
                    .restricted_successors(&coalition, w[0])
                    .unwrap()
                    .contains(&w[1])
            });
            assert_eq!(
                direct, stepwise,
                "seed {seed}: path_follows disagrees with pinned steps on {path:?}"
            );
            compared += 1;
        }
    }
    compared
}

/// Probe for the exact two-way reading: `path_follows` iff every member's
/// marker at every non-initial lifted state. Returns the first divergence
/// found, or Ok with the comparison count if the corpus never produces one.
pub fn sf_stated_iff(models: u64, paths_per_model: usize) -> Result<usize, String> {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x40_000), &limits);
        let checker = Checker::new(&somas);
        let sf = checker.build_sf().unwrap();
        for _ in 0..paths_per_model {
            let path = random_walk(&mut rng, &somas);
            let coalition = id_set(&somas, &random_coalition(&mut rng, &somas));
            let direct = checker.path_follows(&coalition, &path).unwrap();
            let via_markers = markers_hold(&somas, &sf, &coalition, &path);
            if direct != via_markers {
                return Err(format!(
                    "seed {seed}, path {path:?}, coalition {coalition:?}: \
                     path_follows={direct} but markers={via_markers}"
                ));
            }
            compared += 1;
        }
    }
    Ok(compared)
}

/// The fixpoint containments that make `G` and `U` labelings sane.
pub fn fixpoint_sanity(models: u64, trials_per_model: usize) -> usize {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x50_000), &limits);
        let checker = Checker::new(&somas);
        for _ in 0..trials_per_model {
            let coalition = random_coalition(&mut rng, &somas);
            let phi = random_formula(&mut rng, &somas, 1);
            let psi = random_formula(&mut rng, &somas, 1);

            let globally = Formula::Globally(coalition.clone(), Box::new(phi.clone()));
            let g_states = checker.label_states(&globally).unwrap();
            let phi_states = checker.label_states(&phi).unwrap();
            assert!(
                g_states.is_subset(&phi_states),
                "seed {seed}: G-labeling escapes its body"
            );

            let until = Formula::Until(
                coalition.clone(),
                Box::new(phi.clone()),
                Box::new(psi.clone()),
            );
            let u_states = checker.label_states(&until).unwrap();
            let psi_states = checker.label_states(&psi).unwrap();
            assert!(
                psi_states.is_subset(&u_states),
                "seed {seed}: U-labeling misses its target states"
            );
            compared += 1;
        }
    }
    compared
}

/// Cross-component edges always climb layers.
pub fn layer_ordering(models: u64) -> usize {
    let limits = small_limits();
    let mut checked = 0;
    for seed in 0..models {
        let (somas, _) = draw_model(seed.wrapping_add(0x60_000), &limits);
        for q in 0..somas.cgs.state_count() {
            let g = star_dependence_graph(&somas, StateId(q)).unwrap();
            let d = layers(&g);
            let (_, membership) = condense(&g);
            for (a, b) in &g.edges {
                if membership[a.0] != membership[b.0] {
                    assert!(
                        d.rho[a.0] < d.rho[b.0],
                        "seed {seed}, state #{q}: edge {a:?}->{b:?} does not climb"
                    );
                }
            }
            checked += 1;
        }
    }
    checked
}

/// Every structurally independent coalition is predecessor-closed in the
/// everyone-compliant graph, so candidate pruning never loses one.
pub fn pruning_soundness(models: u64) -> usize {
    let limits = small_limits();
    let mut checked = 0;
    for seed in 0..models {
        let (somas, _) = draw_model(seed.wrapping_add(0x70_000), &limits);
        let checker = Checker::new(&somas);
        let k = somas.cgs.agent_count();
        for q in 0..somas.cgs.state_count() {
            let g = star_dependence_graph(&somas, StateId(q)).unwrap();
            let closed: BTreeSet<BTreeSet<AgentId>> =
                independent_coalitions(&g).unwrap().into_iter().collect();
            for a in all_subsets(k) {
                if a.is_empty() {
                    continue;
                }
                if checker.structurally_independent(&a, StateId(q)).unwrap() {
                    assert!(
                        closed.contains(&a),
                        "seed {seed}, state #{q}: {a:?} structural but not a candidate"
                    );
                }
                checked += 1;
            }
        }
    }
    checked
}

/// `independent_coalitions` against a direct scan of all subsets for
/// closure, on synthetic graphs.
pub fn closed_sets_exhaustive(graphs: u64) -> usize {
    let mut checked = 0;
    for seed in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x80_000));
        let n = rng.gen_range(1..=8);
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                if rng.gen_bool(0.2) {
                    edges.insert((AgentId(a), AgentId(b)));
                }
            }
        }
        let g = DependenceGraph {
            names: (0..n).map(|v| format!("n{v}")).collect(),
            edges,
        };
        let got: BTreeSet<BTreeSet<AgentId>> =
            independent_coalitions(&g).unwrap().into_iter().collect();
        let expect: BTreeSet<BTreeSet<AgentId>> = all_subsets(n)
            .filter(|set| {
                !set.is_empty()
                    && g.edges
                        .iter()
                        .all(|(a, b)| !set.contains(b) || set.contains(a) || a == b)
            })
            .collect();
        assert_eq!(got, expect, "seed {seed}");

        // Emission order puts every set before its proper supersets.
        let ordered = independent_coalitions(&g).unwrap();
        for (i, small) in ordered.iter().enumerate() {
            for large in &ordered[..i] {
                assert!(
                    !small.is_subset(large) || small == large,
                    "seed {seed}: {small:?} after a superset"
                );
            }
        }
        checked += 1;
    }
    checked
}

/// The pruned coalition search returns exactly the coalitions an
/// exhaustive full-contribution scan finds.
pub fn fcon_matches_exhaustive_scan(models: u64) -> usize {
    let limits = GenLimits {
        max_agents: 3,
        max_states: 4,
        max_actions: 2,
    };
    let mut checked = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0x90_000), &limits);
        let checker = Checker::new(&somas);
        let k = somas.cgs.agent_count();
        let goals: Vec<TemporalGoal> = (0..2).map(|_| random_goal(&mut rng, &somas, 1)).collect();
        for q in 0..somas.cgs.state_count() {
            let report = fcon_somas(&somas, StateId(q), &goals).unwrap();
            for goal in &goals {
                let from_fcon: BTreeSet<BTreeSet<AgentId>> = report
                    .entries
                    .iter()
                    .filter(|(_, g)| g == goal)
                    .map(|(a, _)| a.clone())
                    .collect();
                let from_scan: BTreeSet<BTreeSet<AgentId>> = all_subsets(k)
                    .filter(|a| {
                        !a.is_empty()
                            && checker
                                .full_contribution(a, StateId(q), goal)
                                .unwrap()
                                .full()
                    })
                    .collect();
                assert_eq!(
                    from_fcon, from_scan,
                    "seed {seed}, state #{q}, goal {goal}"
                );
                checked += 1;
            }
        }
    }
    checked
}

/// Pinning more agents only shrinks where runs can go.
pub fn reach_nesting(models: u64, trials_per_model: usize) -> usize {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, mut rng) = draw_model(seed.wrapping_add(0xA0_000), &limits);
        for _ in 0..trials_per_model {
            let small = id_set(&somas, &random_coalition(&mut rng, &somas));
            let mut large = small.clone();
            for a in 0..somas.cgs.agent_count() {
                if rng.gen_bool(0.5) {
                    large.insert(AgentId(a));
                }
            }
            for q in 0..somas.cgs.state_count() {
                let q = StateId(q);
                let succ_small = somas.restricted_successors(&small, q).unwrap();
                let succ_large = somas.restricted_successors(&large, q).unwrap();
                assert!(succ_large.is_subset(&succ_small), "seed {seed}");
                let reach_small = somas.out_reachable(&small, q).unwrap();
                let reach_large = somas.out_reachable(&large, q).unwrap();
                assert!(reach_large.is_subset(&reach_small), "seed {seed}");
                compared += 1;
            }
        }
    }
    compared
}

/// The everyone-compliant run visits exactly the full-coalition reach set.
pub fn star_reach_agreement(models: u64) -> usize {
    let limits = small_limits();
    let mut compared = 0;
    for seed in 0..models {
        let (somas, _) = draw_model(seed.wrapping_add(0xB0_000), &limits);
        let everyone = somas.cgs.all_agents();
        for q in 0..somas.cgs.state_count() {
            let q = StateId(q);
            let lasso = somas.star_computation(q).unwrap();
            let reach = somas.out_reachable(&everyone, q).unwrap();
            assert_eq!(lasso.states(), reach, "seed {seed}, state #{}", q.0);
            compared += 1;
        }
    }
    compared
}
