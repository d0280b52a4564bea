//! Seeded random models and formulas for cross-validation runs.
//!
//! Models come out valid by construction: transitions are generated total
//! over the available joint moves, every guard table ends in a catch-all,
//! and guards only compare messages of the kind the sender actually emits
//! at that state. Everything is driven by a caller-supplied [`Rng`], so a
//! fixed seed reproduces the exact model and formula sequence.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::logic::Formula;
use crate::model::{ActionId, AgentId, Cgs, CmpOp, GuardExpr, LocalRule, Message, Somas, StateId};

/// Size bounds for [`random_model`].
#[derive(Clone, Copy, Debug)]
pub struct GenLimits {
    pub max_agents: usize,
    pub max_states: usize,
    /// Actions available per agent per state (the global pool has this
    /// many actions).
    pub max_actions: usize,
}

impl Default for GenLimits {
    fn default() -> GenLimits {
        GenLimits {
            max_agents: 3,
            max_states: 6,
            max_actions: 2,
        }
    }
}

/// Draws a random valid model within `limits`.
pub fn random_model<R: Rng>(rng: &mut R, limits: &GenLimits) -> Somas {
    let k = rng.gen_range(1..=limits.max_agents.max(1));
    let n = rng.gen_range(1..=limits.max_states.max(1));
    let action_pool = limits.max_actions.max(1);

    let agents: Vec<String> = (0..k).map(|a| format!("a{a}")).collect();
    let states: Vec<String> = (0..n).map(|q| format!("s{q}")).collect();
    let actions: Vec<String> = (0..action_pool).map(|x| format!("act{x}")).collect();
    let prop_count = rng.gen_range(1..=3);
    let props: Vec<String> = (0..prop_count).map(|p| format!("p{p}")).collect();

    let labeling: Vec<BTreeSet<String>> = (0..n)
        .map(|_| {
            props
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .cloned()
                .collect()
        })
        .collect();

    let mut available = vec![vec![Vec::new(); n]; k];
    for per_state in available.iter_mut() {
        for slot in per_state.iter_mut() {
            let count = rng.gen_range(1..=action_pool);
            let mut pool: Vec<ActionId> = (0..action_pool).map(ActionId).collect();
            pool.shuffle(rng);
            pool.truncate(count);
            pool.sort();
            *slot = pool;
        }
    }

    // Total deterministic transitions: one random target per joint move.
    let transitions: Vec<_> = (0..n)
        .map(|q| {
            let mut rows = std::collections::BTreeMap::new();
            let mut move_indices = vec![0usize; k];
            loop {
                let moves: Vec<ActionId> =
                    (0..k).map(|a| available[a][q][move_indices[a]]).collect();
                rows.insert(moves, StateId(rng.gen_range(0..n)));
                let mut carry = 0;
                while carry < k {
                    move_indices[carry] += 1;
                    if move_indices[carry] < available[carry][q].len() {
                        break;
                    }
                    move_indices[carry] = 0;
                    carry += 1;
                }
                if carry == k {
                    break;
                }
            }
            rows
        })
        .collect();

    let mut internals = Vec::with_capacity(k);
    for _ in 0..k {
        let mut per_state = Vec::with_capacity(n);
        for labels in &labeling {
            // Message payloads stay consistent with the state: prop
            // messages only carry propositions that hold there.
            let msg = if rng.gen_bool(0.5) {
                Message::Int(rng.gen_range(0..=3))
            } else {
                Message::Props(labels.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect())
            };
            per_state.push(msg);
        }
        internals.push(per_state);
    }

    let mut rules = Vec::with_capacity(k);
    for own_actions in &available {
        let mut tau = Vec::with_capacity(n);
        let mut gamma = Vec::with_capacity(n);
        for (q, slots) in own_actions.iter().enumerate() {
            let mut partners: Vec<AgentId> = (0..k).map(AgentId).collect();
            partners.shuffle(rng);
            partners.truncate(rng.gen_range(1..=k));
            let partner_set: BTreeSet<AgentId> = partners.iter().copied().collect();

            let mut table = Vec::new();
            for _ in 0..rng.gen_range(0..=2) {
                if let Some(guard) = random_guard(rng, &partner_set, &internals, &props, q) {
                    table.push((guard, *slots.choose(rng).expect("nonempty")));
                }
            }
            // Catch-all keeps the table total whatever the messages say.
            table.push((GuardExpr::True, *slots.choose(rng).expect("nonempty")));

            tau.push(partner_set);
            gamma.push(table);
        }
        rules.push(LocalRule { tau, gamma });
    }

    Somas {
        cgs: Cgs {
            agents,
            states,
            props,
            labeling,
            actions,
            available,
            transitions,
        },
        internals,
        rules,
    }
}

/// A guard over the messages `partners` send at state `q`, built to match
/// the senders' message kinds; `None` when the kinds offer nothing usable.
fn random_guard<R: Rng>(
    rng: &mut R,
    partners: &BTreeSet<AgentId>,
    internals: &[Vec<Message>],
    props: &[String],
    q: usize,
) -> Option<GuardExpr> {
    let int_senders: Vec<AgentId> = partners
        .iter()
        .filter(|p| matches!(internals[p.0][q], Message::Int(_)))
        .copied()
        .collect();
    let prop_senders: Vec<AgentId> = partners
        .iter()
        .filter(|p| matches!(internals[p.0][q], Message::Props(_)))
        .copied()
        .collect();

    let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt];
    let pick_int = !int_senders.is_empty() && (prop_senders.is_empty() || rng.gen_bool(0.5));
    let atom = if pick_int {
        let sender = *int_senders.choose(rng)?;
        let op = *ops.choose(rng)?;
        if int_senders.len() > 1 && rng.gen_bool(0.5) {
            GuardExpr::CmpMsg(sender, op, *int_senders.choose(rng)?)
        } else {
            GuardExpr::CmpConst(sender, op, rng.gen_range(0..=3))
        }
    } else {
        let sender = *prop_senders.choose(rng)?;
        GuardExpr::Has(sender, props.choose(rng)?.clone())
    };
    Some(if rng.gen_bool(0.3) {
        GuardExpr::Not(Box::new(atom))
    } else {
        atom
    })
}

/// A random coalition over the model's agents; may be empty.
pub fn random_coalition<R: Rng>(rng: &mut R, somas: &Somas) -> BTreeSet<String> {
    somas
        .cgs
        .agents
        .iter()
        .filter(|_| rng.gen_bool(0.5))
        .cloned()
        .collect()
}

/// A random formula over the model's propositions and agents, with
/// temporal/boolean nesting at most `depth` deep. No community atoms: the
/// generated corpus must be checkable without a hook.
pub fn random_formula<R: Rng>(rng: &mut R, somas: &Somas, depth: usize) -> Formula {
    let atom = |rng: &mut R| {
        if somas.cgs.props.is_empty() || rng.gen_bool(0.2) {
            Formula::True
        } else {
            Formula::Prop(somas.cgs.props.choose(rng).unwrap().clone())
        }
    };
    if depth == 0 {
        return atom(rng);
    }
    match rng.gen_range(0..8) {
        0 => atom(rng),
        1 => Formula::Not(Box::new(random_formula(rng, somas, depth - 1))),
        // No Or arm: it desugars through Not/And and would overshoot the
        // requested nesting; the And/Not combinations cover its shapes.
        2 | 3 => Formula::And(
            Box::new(random_formula(rng, somas, depth - 1)),
            Box::new(random_formula(rng, somas, depth - 1)),
        ),
        4 => Formula::Next(
            random_coalition(rng, somas),
            Box::new(random_formula(rng, somas, depth - 1)),
        ),
        5 => Formula::Globally(
            random_coalition(rng, somas),
            Box::new(random_formula(rng, somas, depth - 1)),
        ),
        6 => Formula::Until(
            random_coalition(rng, somas),
            Box::new(random_formula(rng, somas, depth - 1)),
            Box::new(random_formula(rng, somas, depth - 1)),
        ),
        _ => Formula::Until(
            random_coalition(rng, somas),
            Box::new(Formula::True),
            Box::new(random_formula(rng, somas, depth - 1)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Checker;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_valid() {
        let limits = GenLimits::default();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let somas = random_model(&mut rng, &limits);
            let report = somas.validate();
            assert!(report.is_valid(), "seed {seed}:\n{report}");
            assert!(somas.cgs.state_count() <= 6);
            assert!(somas.cgs.agent_count() <= 3);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let limits = GenLimits::default();
        let draw = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let somas = random_model(&mut rng, &limits);
            let formula = random_formula(&mut rng, &somas, 2);
            (somas, formula)
        };
        assert_eq!(draw(42), draw(42));
        let differs = (0..10).any(|s| draw(s) != draw(s + 1));
        assert!(differs);
    }

    #[test]
    fn generated_formulas_stay_in_bounds_and_check_cleanly() {
        fn nesting(f: &Formula) -> usize {
            match f {
                Formula::True | Formula::Prop(_) | Formula::Com(..) => 0,
                Formula::Not(x) | Formula::Next(_, x) | Formula::Globally(_, x) => {
                    1 + nesting(x)
                }
                Formula::And(l, r) | Formula::Until(_, l, r) => 1 + nesting(l).max(nesting(r)),
            }
        }
        let limits = GenLimits::default();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let somas = random_model(&mut rng, &limits);
            let checker = Checker::new(&somas);
            for _ in 0..5 {
                let f = random_formula(&mut rng, &somas, 2);
                assert!(nesting(&f) <= 2, "{f}");
                for q in 0..somas.cgs.state_count() {
                    checker.check(StateId(q), &f).expect("generated formula must check");
                }
            }
        }
    }
}
