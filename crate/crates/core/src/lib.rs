//! Coordination engine for layered supplier networks.
//!
//! A network of plants is arranged in tiers that mirror the product's
//! breakdown: finished product at the top, subassemblies below, raw
//! material suppliers at the edge. Each plant runs two agents, a
//! negotiation agent facing the outside and a planning agent owning the
//! local schedule. Orders flow down as component demand; confirmations,
//! counter-proposals and refusals flow back up. Above the plants sit tier
//! coordinators that redistribute load when a plant gives up, and a
//! network mediator that may buy extra capacity when the tiers cannot.
//!
//! The `simulator` module runs a whole network deterministically and is
//! the main entry point:
//!
//! ```
//! use vennet_core::{config, simulator};
//! # let text = std::fs::read_to_string(
//! #     concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/case1.json")).unwrap();
//! let spec = config::load_spec(&text).unwrap();
//! let report = simulator::run(&spec, simulator::Mode::Strict).unwrap();
//! assert!(report.violations.is_empty());
//! ```

pub mod config;
pub mod domain;
pub mod mediator;
pub mod money;
pub mod negotiator;
pub mod planner;
pub mod protocol;
pub mod simulator;
pub mod tier_negotiator;

pub use domain::{
    BomEdge, CapacityCalendar, ClientStub, CostModel, Day, DemandLine, NetworkConfig, ProductId,
    Scenario, SupplierStub, TierId, Units, VenConfig, VenId, Violation,
};
pub use money::Money;
pub use protocol::{Envelope, Message, MsgKind, OrderId, Party};
pub use simulator::{Mode, OrderSpec, OrderStatus, RunOutcome, RunReport, RunSpec};
