//! Secret-shared transformer inference for two servers and a dealer, with
//! forward-only prompt tuning driven by the data owner.

pub mod attention;
pub mod bench;
pub mod error;
pub mod model;
pub mod protocols;
pub mod ring;
pub mod runtime;
pub mod share;
pub mod tensor;
pub mod tuner;

pub use error::{Error, Result};
pub use ring::{FixedPointConfig, RingElement};
pub use share::{reconstruct, share, PartyId, SecretShare, Shared};
pub use tensor::RingTensor;
