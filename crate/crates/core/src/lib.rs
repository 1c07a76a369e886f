//! Birth-death chain analysis and agent simulation for opinion dynamics
//! with a few stubborn sources on the complete graph.
//!
//! The analysis side builds the one-dimensional chain on the number of
//! correct agents ([`chain`]), computes expected hitting times three
//! independent ways ([`hitting`]) and certifies quadratic lower bounds for
//! memoryless rules ([`lowerbound`]). The simulation side runs agents
//! directly ([`sim`]) under the rules in [`dynamics`], and [`experiment`]
//! and [`plot`] turn batches of trials into CSV tables and SVG figures.

pub mod chain;
pub mod commands;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod hitting;
pub mod lowerbound;
pub mod plot;
pub mod seeding;
pub mod sim;

pub use chain::{BirthDeathChain, Boundary, FullKnowledgeRule, MemorylessRule, StateWindow};
pub use dynamics::{DynamicsKind, Opinion, TrendMemory};
pub use error::{Error, Result};
pub use hitting::{HittingReport, Method};
pub use lowerbound::LowerBoundCertificate;
pub use sim::{InitKind, Population, TrialConfig, TrialResult};
