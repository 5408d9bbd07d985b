//! Object-state based fault localization for statement-level program models.
//!
//! A failing test is compared with the passing test whose control flow is
//! closest to it; aligning the per-node object states of the two runs exposes
//! the divergent statements, which are reported as source lines.

pub mod cidg;
pub mod executor;
pub mod expr;
pub mod localizer;
pub mod model;
pub mod pipeline;
pub mod statechart;

pub use cidg::{build_cidg, Cidg, CidgError};
pub use executor::{run_suite, run_test, ExecutionTrace, TestCase, TestSuite, Verdict};
pub use expr::Expr;
pub use localizer::{BugReport, ComparisonMatrix, DecisionTable, LocalizeError, SelectionResult};
pub use model::{parse_model, validate_model, NodeId, ProgramModel, StateLabel};
pub use pipeline::{analyze, localize, Analysis, Localization, PipelineError};
pub use statechart::{StateChart, TransitionRow};
