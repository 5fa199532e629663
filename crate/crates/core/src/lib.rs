//! Multiple-comparison significance testing for IR evaluation.
//!
//! The crate covers the full pipeline: TREC run/qrels ingestion
//! ([`trec_io`]), per-topic effectiveness ([`metrics`]), paired and
//! multiple-comparison tests ([`sigtests`]), p-value adjustment
//! ([`adjust`]), logistic ranking simulation ([`simkit`]), and the
//! FWER / power experiment drivers ([`harness`]).

pub mod adjust;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sigtests;
pub mod simkit;
pub mod trec_io;

pub use error::{Error, Result};
pub use trec_io::{BinaryRanking, Qrels, RunSet, ScoreMatrix};
