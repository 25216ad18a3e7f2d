//! Cycle-accurate simulator of a tiled manycore mesh network.
//!
//! Every tile has two 5-port routers: one carries requests (the forward
//! network), the other carries replies (the reverse network). Cores attach
//! through endpoints that buffer requests, count credits and decode a small
//! configuration space. A [`sim::Fabric`] ties routers, endpoints and
//! [`nodes::Node`] models together and advances them one clock at a time.
//!
//! ```
//! use meshnoc::nodes::{MemorySlave, SequenceMaster};
//! use meshnoc::packet::Coordinate;
//! use meshnoc::sim::{Fabric, FabricConfig};
//!
//! let mut fabric = Fabric::builder(FabricConfig::mesh(2, 1))
//!     .node(Coordinate::new(0, 0), SequenceMaster::new(Coordinate::new(1, 1), 0, 3, 32))
//!     .io(Coordinate::new(1, 1), 1, MemorySlave::new(32))
//!     .build()?;
//! fabric.run_until_quiescent(1_000)?;
//! let master = fabric.node::<SequenceMaster>(Coordinate::new(0, 0)).unwrap();
//! assert!(master.passed());
//! assert_eq!(master.checks()[0].counter, 7);
//! # Ok::<(), meshnoc::error::SimError>(())
//! ```

pub mod demo;
pub mod endpoint;
pub mod error;
pub mod link;
pub mod nodes;
pub mod packet;
pub mod router;
pub mod sim;

pub use error::{ConfigError, ProtocolViolation, SimError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/packets.md")]
    mod packets {}
    #[doc = include_str!("../../../book/src/links.md")]
    mod links {}
    #[doc = include_str!("../../../book/src/routing.md")]
    mod routing {}
    #[doc = include_str!("../../../book/src/endpoints.md")]
    mod endpoints {}
    #[doc = include_str!("../../../book/src/fabric.md")]
    mod fabric {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
