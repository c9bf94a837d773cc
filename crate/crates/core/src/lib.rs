//! Evaluation harness for rubric-based LLM-as-a-judge robustness testing.
//!
//! The pipeline: load a science Q&A corpus ([`corpus`]), derive adversarial
//! variants of each synthesized answer ([`perturb`]), collect 1–5 Likert
//! judgments from LLM evaluators over nine rubrics ([`rubric`], [`judge`],
//! [`runner`]), aggregate the scores into robustness reports ([`analysis`]),
//! export preference pairs for alignment training ([`prefpair`]), and compare
//! generator models with reference-free n-gram metrics ([`metrics`]).

pub mod analysis;
pub mod corpus;
pub mod judge;
pub mod jsonl;
pub mod metrics;
pub mod perturb;
pub mod prefpair;
pub mod rubric;
pub mod runner;

pub(crate) mod hash;
