//! Modeling, model checking and coalition analysis for self-organizing
//! multi-agent systems: concurrent game structures whose agents follow
//! communication-based local rules.
//!
//! - [`model`]: the structures themselves, their validation and the
//!   rule-restricted transition operations everything else builds on.
//! - [`logic`]: the formula language with its parser and renderer.
//! - [`checker`]: formula evaluation, rule-compliance views and
//!   coalition-contribution verdicts.
//! - [`decomp`]: dependence graphs, layering and the coalition search.
//! - [`scenarios`]: ready-made example systems (trains, task delegation,
//!   user communities) and the community atom evaluator.
//! - [`json`]: the model file format.
//! - [`gen`]: seeded random models and formulas for cross-validation.

pub mod checker;
pub mod decomp;
pub mod gen;
pub mod json;
pub mod logic;
pub mod model;
pub mod scenarios;

pub use checker::{CheckError, Checker, ComHookFn, ContributionVerdict, ExtendedStateF,
    ExtendedStructureE, ExtendedStructureF};
pub use decomp::{condense, dependence_graph, export_dot, export_dot_layered, fcon_somas,
    fcon_somas_opts, independent_coalitions, layers, star_dependence_graph, ContributionSet,
    DecompError, Decomposition, DependenceGraph, FconOptions, RejectReason};
pub use json::{somas_from_json, somas_to_json, LoadError};
pub use logic::{parse_formula, parse_goal, render_formula, render_goal, subformulas, Formula,
    FormulaParseError, TemporalGoal};
pub use model::{ActionId, AgentId, Cgs, GuardExpr, Lasso, LocalRule, Message, ModelError, Somas,
    StateId, ValidationReport, Violation};
