//! Core primitives for RSSI-based localization in ultra-narrow-band LPWAN
//! networks.
//!
//! The library splits along the two localization regimes such networks
//! exhibit:
//!
//! - **Long range (node to base station).** Path loss flattens and shadowing
//!   dominates, so per-message distance estimation is hopeless (see the CRLB
//!   operations in [`channel`]); what still works is *fingerprint
//!   classification* of nodes into the classes of GPS-equipped anchor nodes
//!   ([`model`] + [`classify`]).
//! - **Short range (peer to peer).** RSSI keeps enough distance resolution
//!   for regression-based ranging and multilateration from three or more
//!   anchors ([`ranging`]).
//!
//! [`channel`] also provides a synthetic log-distance / log-normal shadowing
//! channel so both regimes can be exercised deterministically at desk scale.
//!
//! # Quick start
//!
//! ```
//! use rssiloc_core::channel::{ChannelParams, crlb_rssi_std, expected_rssi};
//!
//! let params = ChannelParams {
//!     ref_rssi_dbm: -61.5,
//!     ref_distance_m: 10.0,
//!     path_loss_exponent: 3.0,
//!     shadowing_std_db: 6.0,
//!     quantize_to_integer_dbm: false,
//! };
//! // Mean RSSI decays with log-distance...
//! let rssi = expected_rssi(100.0, &params).unwrap();
//! assert!((rssi - -91.5).abs() < 1e-12);
//! // ...and the ranging error floor grows linearly with distance.
//! let bound = crlb_rssi_std(1000.0, &params).unwrap();
//! assert!((bound - 460.517).abs() < 1e-3);
//! ```

pub mod channel;
pub mod classify;
pub mod model;
pub mod ranging;

pub(crate) mod linalg;

pub use model::{AnchorClass, ClassificationOutcome, FingerprintDatabase, Position, RssiMessage};
