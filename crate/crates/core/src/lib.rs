//! Agent orchestration engine.
//!
//! A run generates agent meta (profile and overall plan), then steps through
//! a bounded action loop over a categorized tool catalog: hybrid tool search,
//! sandboxed code execution and a summary/reflexion pass that can revise the
//! plan. The `eval` module turns trajectory logs into metrics and
//! fine-tuning datasets.

pub mod catalog;
pub mod eval;
pub mod fixture;
pub mod llm;
pub mod model;
pub mod orchestrator;
pub mod sandbox;
pub mod search;
