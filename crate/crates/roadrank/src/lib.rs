//! Road-network segment ranking: coherent-system importance measures fed by
//! segment reliabilities from a cellular-automaton traffic simulation and a
//! Weibull driver-satisfaction model.
//!
//! Modules:
//! - [`structure`]: binary coherent systems from minimal path sets; exact and
//!   path-product reliability evaluation.
//! - [`importance`]: Birnbaum and Barlow–Proschan importance measures and
//!   component ranking.
//! - [`satisfaction`]: delay-to-reliability mapping through Weibull patience.
//! - [`sim`]: single-lane safe-distance cellular automaton with open
//!   boundaries.
//! - [`intersection`]: right-of-way rules, traffic lights, and
//!   junction-coupled roads.
//! - [`scenario`]: network description files and the bundled city network.
//! - [`pipeline`]: intensity sweeps, delay aggregation, and result tables.

pub mod importance;
pub mod intersection;
pub mod numerics;
pub mod satisfaction;
pub mod scenario;
pub mod sim;
pub mod structure;

pub mod pipeline;
