//! Institutional risk monitoring.
//!
//! Risk sentences are decomposed into trigger / exposure vessel / outcome
//! ([`extraction`]), merged into a typed knowledge graph ([`riskgraph`]),
//! matched against news ingested from GDELT GKG files and RSS/Atom feeds
//! ([`newsfeed`]) by embedding cosine similarity ([`embedding`],
//! [`matcher`]). [`pipeline`] wires the stages together over a plain-file
//! record store.

pub mod embedding;
pub mod extraction;
pub mod matcher;
pub mod newsfeed;
pub mod pipeline;
pub mod riskgraph;
