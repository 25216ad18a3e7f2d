//! Error types shared across the simulator.

use thiserror::Error;

use crate::packet::Coordinate;
use crate::router::Direction;

/// A static configuration problem: bad widths, malformed topology, bad
/// experiment parameters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("field `{field}` value {value:#x} does not fit in {width} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        width: u32,
    },
    #[error("packet bit-vector is {got} bits wide, expected {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ConfigError::Invalid(msg.into())
    }
}

/// A violation of the link or endpoint protocol. In hardware these are
/// simulation assertions; here they abort the tick that observed them.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolViolation {
    #[error("yumi asserted while valid was low")]
    YumiWithoutValid,
    #[error("in_response returned in cycle {at} for a request consumed in cycle {consumed_at}")]
    ResponseTooEarly { consumed_at: u64, at: u64 },
    #[error("in_response returned with no outstanding load or swap")]
    UnexpectedResponse,
    #[error("return packet would raise credits above max_out_credits ({max})")]
    CreditOverflow { max: u32 },
    #[error("illegal turn {from:?} -> {to:?} at router {at}")]
    IllegalTurn {
        at: Coordinate,
        from: Direction,
        to: Direction,
    },
    #[error("packet for {dest} routed to stubbed port {dir:?} at router {at}")]
    StubbedPort {
        at: Coordinate,
        dir: Direction,
        dest: Coordinate,
    },
    #[error("packet for {dest} routed to tied-off port {dir:?} at router {at}")]
    TiedPort {
        at: Coordinate,
        dir: Direction,
        dest: Coordinate,
    },
    #[error("packet for {dest} delivered to endpoint at {at}")]
    Misrouted { at: Coordinate, dest: Coordinate },
    #[error("malformed packet: {0}")]
    MalformedPacket(String),
    #[error("credits {credits} + outstanding {outstanding} != max_out_credits {max}")]
    CreditConservation {
        credits: u32,
        outstanding: u32,
        max: u32,
    },
}

/// Failure of a simulation step, stamped with the cycle it happened in.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("cycle {cycle}: {violation} [{location}]")]
    Protocol {
        cycle: u64,
        location: String,
        violation: ProtocolViolation,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl SimError {
    pub fn is_protocol(&self) -> bool {
        matches!(self, SimError::Protocol { .. })
    }
}
