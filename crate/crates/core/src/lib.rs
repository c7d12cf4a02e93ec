pub mod attack;
pub mod baseline;
pub mod bench;
pub mod codec;
pub mod dcf;
pub mod dealer;
pub mod error;
pub mod gates;
pub mod hygiene;
pub mod mpc;
pub mod prf;
pub mod protocol;
pub mod ring;
pub mod share;
pub mod transport;

pub use error::{Error, Result};
pub use ring::{RingConfig, RingElement};
pub use share::{ArithShare, BoolShare, PartyId};
