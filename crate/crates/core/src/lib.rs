//! Median-normalized research productivity, within-field percentile ranking,
//! surname-based kinship detection and cohort comparison for academic
//! rosters.

pub mod baseline;
pub mod cohort;
pub mod ingest;
pub mod kinship;
pub mod model;
pub mod pipeline;
pub mod ranking;
pub mod scoring;
pub mod synthgen;
