//! Reading and writing model files.
//!
//! A model file is a UTF-8 JSON object with the keys `agents`, `states`,
//! `props`, `labeling` (state name to proposition list), `actions`,
//! `available` (agent to state to action list), `transitions` (list of
//! `{from, moves, to}` with `moves` mapping every agent to an action),
//! `internals` (agent to state to `{"int": n}` or `{"props": [...]}`), and
//! `rules` (agent to state to `{tau: [agents], gamma: [{guard, action}]}`).
//! Guards use the textual language of [`GuardExpr::parse`]. Unknown keys
//! are rejected.
//!
//! Error reporting distinguishes two layers deliberately, because the
//! command-line exit codes do: a file that is not well-formed JSON for the
//! schema raises [`LoadError::Json`]; a well-formed file whose content
//! cannot describe a model (unresolvable names, malformed guards, missing
//! messages) raises [`LoadError::Content`]. Semantic defects that a
//! loaded model can still represent (non-total transitions, empty
//! communication sets, unavailable prescribed actions) are left for
//! [`Somas::validate`] to report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionId, AgentId, Cgs, GuardExpr, LocalRule, Message, Somas, StateId};

#[derive(Debug, Error)]
pub enum LoadError {
    /// Not well-formed JSON for the schema; the wrapped error carries line
    /// and column.
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    /// Well-formed JSON whose content does not describe a model.
    #[error("{0}")]
    Content(String),
}

fn content(msg: String) -> LoadError {
    LoadError::Content(msg)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    agents: Vec<String>,
    states: Vec<String>,
    props: Vec<String>,
    labeling: BTreeMap<String, Vec<String>>,
    actions: Vec<String>,
    available: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    transitions: Vec<TransitionFile>,
    internals: BTreeMap<String, BTreeMap<String, MessageFile>>,
    rules: BTreeMap<String, BTreeMap<String, RuleFile>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionFile {
    from: String,
    moves: BTreeMap<String, String>,
    to: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    int: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    props: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    tau: Vec<String>,
    gamma: Vec<GammaFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaFile {
    guard: String,
    action: String,
}

/// Name-to-index tables for the three declaration lists.
struct Names {
    agents: BTreeMap<String, usize>,
    states: BTreeMap<String, usize>,
    actions: BTreeMap<String, usize>,
}

fn index_names(list: &[String], kind: &str) -> Result<BTreeMap<String, usize>, LoadError> {
    let mut map = BTreeMap::new();
    for (i, name) in list.iter().enumerate() {
        if map.insert(name.clone(), i).is_some() {
            return Err(content(format!("duplicate {kind} name `{name}`")));
        }
    }
    Ok(map)
}

fn resolve(map: &BTreeMap<String, usize>, name: &str, kind: &str) -> Result<usize, LoadError> {
    map.get(name)
        .copied()
        .ok_or_else(|| content(format!("unknown {kind} `{name}`")))
}

/// Parses a model file. See the module documentation for the format and
/// the split between [`LoadError`] layers.
pub fn somas_from_json(text: &str) -> Result<Somas, LoadError> {
    let file: ModelFile = serde_json::from_str(text)?;
    build(file)
}

fn build(file: ModelFile) -> Result<Somas, LoadError> {
    let names = Names {
        agents: index_names(&file.agents, "agent")?,
        states: index_names(&file.states, "state")?,
        actions: index_names(&file.actions, "action")?,
    };
    let k = file.agents.len();
    let n = file.states.len();

    let mut labeling = vec![BTreeSet::new(); n];
    for (state, props) in &file.labeling {
        let q = resolve(&names.states, state, "state")?;
        labeling[q] = props.iter().cloned().collect();
    }

    let mut available = vec![vec![Vec::new(); n]; k];
    for (agent, rows) in &file.available {
        let a = resolve(&names.agents, agent, "agent")?;
        for (state, actions) in rows {
            let q = resolve(&names.states, state, "state")?;
            available[a][q] = actions
                .iter()
                .map(|act| resolve(&names.actions, act, "action").map(ActionId))
                .collect::<Result<_, _>>()?;
        }
    }

    let mut transitions: Vec<BTreeMap<Vec<ActionId>, StateId>> = vec![BTreeMap::new(); n];
    for row in &file.transitions {
        let from = resolve(&names.states, &row.from, "state")?;
        let to = resolve(&names.states, &row.to, "state")?;
        for agent in row.moves.keys() {
            resolve(&names.agents, agent, "agent")
                .map_err(|_| content(format!("transition from `{}`: unknown agent `{agent}` in moves", row.from)))?;
        }
        let mut moves = Vec::with_capacity(k);
        for agent in &file.agents {
            let action = row.moves.get(agent).ok_or_else(|| {
                content(format!(
                    "transition from `{}`: missing move for agent `{agent}`",
                    row.from
                ))
            })?;
            moves.push(ActionId(resolve(&names.actions, action, "action")?));
        }
        if transitions[from].insert(moves, StateId(to)).is_some() {
            return Err(content(format!(
                "duplicate transition from `{}` under the same joint move",
                row.from
            )));
        }
    }

    // Messages must be total: nothing downstream can represent "no
    // message", and validation could not see a silently invented default.
    for agent in file.internals.keys() {
        resolve(&names.agents, agent, "agent")?;
    }
    let mut internals = Vec::with_capacity(k);
    for agent in &file.agents {
        let rows = file.internals.get(agent);
        if let Some(rows) = rows {
            for state in rows.keys() {
                resolve(&names.states, state, "state")?;
            }
        }
        let mut per_state = Vec::with_capacity(n);
        for state in &file.states {
            let msg = rows.and_then(|r| r.get(state)).ok_or_else(|| {
                content(format!(
                    "agent `{agent}`: missing internal message at state `{state}`"
                ))
            })?;
            per_state.push(decode_message(msg, agent, state)?);
        }
        internals.push(per_state);
    }

    for agent in file.rules.keys() {
        resolve(&names.agents, agent, "agent")?;
    }
    let mut rules = Vec::with_capacity(k);
    for agent in &file.agents {
        let mut tau = vec![BTreeSet::new(); n];
        let mut gamma = vec![Vec::new(); n];
        if let Some(rows) = file.rules.get(agent) {
            for (state, rule) in rows {
                let q = resolve(&names.states, state, "state")?;
                tau[q] = rule
                    .tau
                    .iter()
                    .map(|nm| resolve(&names.agents, nm, "agent").map(AgentId))
                    .collect::<Result<_, _>>()?;
                gamma[q] = rule
                    .gamma
                    .iter()
                    .map(|g| {
                        let guard = GuardExpr::parse(&g.guard, &|nm| {
                            names.agents.get(nm).copied().map(AgentId)
                        })
                        .map_err(|e| {
                            content(format!(
                                "agent `{agent}`, state `{state}`: guard `{}`: {} at byte {}",
                                g.guard, e.message, e.pos
                            ))
                        })?;
                        let action = ActionId(resolve(&names.actions, &g.action, "action")?);
                        Ok((guard, action))
                    })
                    .collect::<Result<_, LoadError>>()?;
            }
        }
        rules.push(LocalRule { tau, gamma });
    }

    Ok(Somas {
        cgs: Cgs {
            agents: file.agents,
            states: file.states,
            props: file.props,
            labeling,
            actions: file.actions,
            available,
            transitions,
        },
        internals,
        rules,
    })
}

fn decode_message(msg: &MessageFile, agent: &str, state: &str) -> Result<Message, LoadError> {
    match (&msg.int, &msg.props) {
        (Some(n), None) => Ok(Message::Int(*n)),
        (None, Some(props)) => Ok(Message::Props(props.iter().cloned().collect())),
        _ => Err(content(format!(
            "agent `{agent}`, state `{state}`: message must set exactly one of `int` or `props`"
        ))),
    }
}

/// Writes the model in the file format; [`somas_from_json`] reads the
/// result back to an equal model.
pub fn somas_to_json(somas: &Somas) -> String {
    let cgs = &somas.cgs;
    let agent_name = |a: AgentId| cgs.agents[a.0].clone();

    let mut labeling = BTreeMap::new();
    for (q, props) in cgs.labeling.iter().enumerate() {
        if !props.is_empty() {
            labeling.insert(
                cgs.states[q].clone(),
                props.iter().cloned().collect::<Vec<_>>(),
            );
        }
    }

    let mut available = BTreeMap::new();
    for (a, per_state) in cgs.available.iter().enumerate() {
        let mut rows = BTreeMap::new();
        for (q, actions) in per_state.iter().enumerate() {
            rows.insert(
                cgs.states[q].clone(),
                actions.iter().map(|act| cgs.actions[act.0].clone()).collect::<Vec<_>>(),
            );
        }
        available.insert(cgs.agents[a].clone(), rows);
    }

    let mut transitions = Vec::new();
    for (q, rows) in cgs.transitions.iter().enumerate() {
        for (moves, target) in rows {
            transitions.push(TransitionFile {
                from: cgs.states[q].clone(),
                moves: moves
                    .iter()
                    .enumerate()
                    .map(|(a, act)| (cgs.agents[a].clone(), cgs.actions[act.0].clone()))
                    .collect(),
                to: cgs.states[target.0].clone(),
            });
        }
    }

    let mut internals = BTreeMap::new();
    for (a, per_state) in somas.internals.iter().enumerate() {
        let mut rows = BTreeMap::new();
        for (q, msg) in per_state.iter().enumerate() {
            let encoded = match msg {
                Message::Int(v) => MessageFile {
                    int: Some(*v),
                    props: None,
                },
                Message::Props(props) => MessageFile {
                    int: None,
                    props: Some(props.iter().cloned().collect()),
                },
            };
            rows.insert(cgs.states[q].clone(), encoded);
        }
        internals.insert(cgs.agents[a].clone(), rows);
    }

    let mut rules = BTreeMap::new();
    for (a, rule) in somas.rules.iter().enumerate() {
        let mut rows = BTreeMap::new();
        for q in 0..cgs.state_count() {
            rows.insert(
                cgs.states[q].clone(),
                RuleFile {
                    tau: rule.tau[q].iter().map(|p| cgs.agents[p.0].clone()).collect(),
                    gamma: rule.gamma[q]
                        .iter()
                        .map(|(guard, action)| GammaFile {
                            guard: guard.render(&agent_name),
                            action: cgs.actions[action.0].clone(),
                        })
                        .collect(),
                },
            );
        }
        rules.insert(cgs.agents[a].clone(), rows);
    }

    let file = ModelFile {
        agents: cgs.agents.clone(),
        states: cgs.states.clone(),
        props: cgs.props.clone(),
        labeling,
        actions: cgs.actions.clone(),
        available,
        transitions,
        internals,
        rules,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serialization cannot fail");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{community_model, task_delegation, two_trains, two_trains_strict,
        CommunityConfig};

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "agents": ["x"],
            "states": ["s"],
            "props": ["p"],
            "labeling": {"s": ["p"]},
            "actions": ["w"],
            "available": {"x": {"s": ["w"]}},
            "transitions": [{"from": "s", "moves": {"x": "w"}, "to": "s"}],
            "internals": {"x": {"s": {"int": 0}}},
            "rules": {"x": {"s": {"tau": ["x"], "gamma": [{"guard": "true", "action": "w"}]}}}
        })
    }

    #[test]
    fn minimal_file_loads_and_validates() {
        let somas = somas_from_json(&minimal().to_string()).unwrap();
        assert!(somas.validate().is_valid());
        assert_eq!(somas.cgs.agents, vec!["x"]);
        assert!(somas.cgs.labeling[0].contains("p"));
        assert_eq!(somas.internals[0][0], Message::Int(0));
    }

    #[test]
    fn scenarios_round_trip() {
        let models = [
            two_trains(3, 2),
            two_trains(2, 3),
            two_trains_strict(2, 2),
            task_delegation(),
            community_model(&CommunityConfig::sample()).unwrap(),
        ];
        for somas in models {
            let text = somas_to_json(&somas);
            let back = somas_from_json(&text).unwrap();
            assert_eq!(back, somas);
        }
    }

    #[test]
    fn malformed_json_is_a_schema_error() {
        assert!(matches!(somas_from_json("{"), Err(LoadError::Json(_))));
        assert!(matches!(
            somas_from_json("{\"agents\": 3}"),
            Err(LoadError::Json(_))
        ));
        // Unknown and missing top-level keys are schema errors too.
        let mut extra = minimal();
        extra["bogus"] = serde_json::json!(1);
        assert!(matches!(
            somas_from_json(&extra.to_string()),
            Err(LoadError::Json(_))
        ));
        let mut missing = minimal();
        missing.as_object_mut().unwrap().remove("rules");
        assert!(matches!(
            somas_from_json(&missing.to_string()),
            Err(LoadError::Json(_))
        ));
    }

    #[test]
    fn unresolvable_names_are_content_errors() {
        let cases: Vec<(&str, serde_json::Value)> = vec![
            ("labeling state", {
                let mut v = minimal();
                v["labeling"] = serde_json::json!({"ghost": []});
                v
            }),
            ("available action", {
                let mut v = minimal();
                v["available"]["x"]["s"] = serde_json::json!(["ghost"]);
                v
            }),
            ("transition target", {
                let mut v = minimal();
                v["transitions"][0]["to"] = serde_json::json!("ghost");
                v
            }),
            ("tau agent", {
                let mut v = minimal();
                v["rules"]["x"]["s"]["tau"] = serde_json::json!(["ghost"]);
                v
            }),
            ("internals agent", {
                let mut v = minimal();
                v["internals"]["ghost"] = serde_json::json!({});
                v
            }),
        ];
        for (what, value) in cases {
            let err = somas_from_json(&value.to_string()).unwrap_err();
            assert!(
                matches!(&err, LoadError::Content(m) if m.contains("ghost")),
                "{what}: {err}"
            );
        }
    }

    #[test]
    fn missing_message_is_a_content_error() {
        let mut v = minimal();
        v["internals"]["x"] = serde_json::json!({});
        let err = somas_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, LoadError::Content(m) if m.contains("missing internal message")));
    }

    #[test]
    fn message_must_pick_one_payload() {
        let mut both = minimal();
        both["internals"]["x"]["s"] = serde_json::json!({"int": 1, "props": []});
        assert!(matches!(
            somas_from_json(&both.to_string()),
            Err(LoadError::Content(_))
        ));
        let mut neither = minimal();
        neither["internals"]["x"]["s"] = serde_json::json!({});
        assert!(matches!(
            somas_from_json(&neither.to_string()),
            Err(LoadError::Content(_))
        ));
    }

    #[test]
    fn bad_guard_reports_its_position() {
        let mut v = minimal();
        v["rules"]["x"]["s"]["gamma"][0]["guard"] = serde_json::json!("msg(x) >=");
        let err = somas_from_json(&v.to_string()).unwrap_err();
        assert!(
            matches!(&err, LoadError::Content(m) if m.contains("byte") && m.contains("guard")),
            "{err}"
        );
    }

    #[test]
    fn incomplete_moves_are_content_errors() {
        let mut v = serde_json::json!({
            "agents": ["x", "y"],
            "states": ["s"],
            "props": [],
            "labeling": {},
            "actions": ["w"],
            "available": {"x": {"s": ["w"]}, "y": {"s": ["w"]}},
            "transitions": [{"from": "s", "moves": {"x": "w"}, "to": "s"}],
            "internals": {
                "x": {"s": {"int": 0}},
                "y": {"s": {"int": 0}}
            },
            "rules": {
                "x": {"s": {"tau": ["x"], "gamma": [{"guard": "true", "action": "w"}]}},
                "y": {"s": {"tau": ["y"], "gamma": [{"guard": "true", "action": "w"}]}}
            }
        });
        let err = somas_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, LoadError::Content(m) if m.contains("missing move for agent `y`")));

        v["transitions"][0]["moves"]["ghost"] = serde_json::json!("w");
        v["transitions"][0]["moves"]["y"] = serde_json::json!("w");
        let err = somas_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, LoadError::Content(m) if m.contains("unknown agent `ghost`")));
    }

    #[test]
    fn duplicate_transitions_are_content_errors() {
        let mut v = minimal();
        let row = v["transitions"][0].clone();
        v["transitions"].as_array_mut().unwrap().push(row);
        let err = somas_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(&err, LoadError::Content(m) if m.contains("duplicate transition")));
    }

    #[test]
    fn semantic_defects_load_but_fail_validation() {
        // Unavailable prescribed action: representable, so validation
        // reports it rather than the loader.
        let mut v = minimal();
        v["actions"] = serde_json::json!(["w", "z"]);
        v["rules"]["x"]["s"]["gamma"][0]["action"] = serde_json::json!("z");
        let somas = somas_from_json(&v.to_string()).unwrap();
        let report = somas.validate();
        assert!(!report.is_valid());
        assert!(report.to_string().contains("x"));
    }

    #[test]
    fn guard_rendering_round_trips() {
        use crate::model::CmpOp;
        let a = AgentId(0);
        let to_name = |_: AgentId| "x".to_string();
        let resolve = |nm: &str| (nm == "x").then_some(a);
        let samples = vec![
            GuardExpr::True,
            GuardExpr::CmpConst(a, CmpOp::Ge, 3),
            GuardExpr::Has(a, "p".to_string()),
            GuardExpr::Or(
                Box::new(GuardExpr::And(
                    Box::new(GuardExpr::True),
                    Box::new(GuardExpr::Not(Box::new(GuardExpr::True))),
                )),
                Box::new(GuardExpr::CmpMsg(a, CmpOp::Lt, a)),
            ),
            // Right-nested chains need their parentheses kept.
            GuardExpr::And(
                Box::new(GuardExpr::True),
                Box::new(GuardExpr::And(
                    Box::new(GuardExpr::True),
                    Box::new(GuardExpr::True),
                )),
            ),
        ];
        for guard in samples {
            let text = guard.render(&to_name);
            let back = GuardExpr::parse(&text, &resolve).unwrap();
            assert_eq!(back, guard, "{text}");
        }
    }
}
