//! Numerical strong chain recurrence for flows on compact spaces.
//!
//! The crate discretizes a flow on a circle, a flat 2-torus or a box into a
//! weighted transition graph whose shortest-path distances approximate the
//! chain-cost function `L_T`. On top of that it estimates the recurrence sets
//! (`A_T`, the strong chain recurrent set and the chain recurrent set), the
//! strong chain transitive components, and builds the explicit Lipschitz
//! Lyapunov function `u` whose neutral set is the strong chain recurrent set,
//! together with verifiers for each of its properties.

pub mod chaincost;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod flow;
pub mod lyapunov;
pub mod oracle;
pub mod pipeline;
pub mod space;
pub mod systems;

pub use chaincost::{ChainCostTable, RecurrenceReport, TimeGrid, TransitionGraph};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use flow::{FlowImageTable, FlowMap, LipschitzEnvelope, VectorFieldSpec};
pub use lyapunov::{FieldKind, ScalarField, VerificationReport};
pub use space::{Point, SampleGrid, SpaceDescriptor, SpaceKind};
pub use systems::{BuiltinSystem, SystemId};
