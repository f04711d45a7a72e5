//! Synthetic RSSI channel and ranging error bounds.
//!
//! The channel is log-distance path loss plus log-normal shadowing: mean
//! RSSI decays with 10·n_p·log10(d/d_ref) and each message adds a Gaussian
//! dB perturbation of std σ_sh. The two Cramér-Rao operations quantify why
//! RSSI ranging collapses at long range (the bound grows linearly with
//! distance) and why ultra-narrow-band time-of-arrival is hopeless (the
//! bound scales with 1/bandwidth).
//!
//! Scenario generation is deterministic: every transmitter draws from its
//! own ChaCha8 stream seeded by [`sub_seed`], so datasets are reproducible
//! message-for-message regardless of iteration or thread order.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{Position, RssiMessage};

/// Propagation speed used by the time-of-arrival bound, m/s.
pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    /// A zero path-loss exponent makes the RSSI ranging bound undefined.
    UndefinedBound,
    /// Distances must be non-negative.
    NegativeDistance(f64),
    /// The log-distance model is only defined at or beyond the reference
    /// distance.
    InsideReferenceDistance { distance_m: f64, ref_distance_m: f64 },
    /// Parameter outside its documented domain.
    InvalidParams(&'static str),
    /// Scenario generation requires at least one receiver.
    NoReceivers,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::UndefinedBound => {
                write!(f, "undefined bound: path-loss exponent is zero")
            }
            ChannelError::NegativeDistance(d) => write!(f, "negative distance {d} m"),
            ChannelError::InsideReferenceDistance {
                distance_m,
                ref_distance_m,
            } => write!(
                f,
                "distance {distance_m} m is inside the reference distance {ref_distance_m} m"
            ),
            ChannelError::InvalidParams(what) => write!(f, "invalid channel parameters: {what}"),
            ChannelError::NoReceivers => write!(f, "scenario has no receivers"),
        }
    }
}

impl std::error::Error for ChannelError {}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Log-distance path loss with log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Mean RSSI at the reference distance, dBm.
    pub ref_rssi_dbm: f64,
    /// Reference distance d_ref > 0, meters.
    pub ref_distance_m: f64,
    /// Path-loss exponent n_p > 0.
    pub path_loss_exponent: f64,
    /// Shadowing std σ_sh >= 0, dB.
    pub shadowing_std_db: f64,
    /// Round sampled RSSI to integer dBm (half away from zero), as
    /// base-station metadata reports do.
    pub quantize_to_integer_dbm: bool,
}

impl ChannelParams {
    /// Node-to-base-station defaults: n_p = 3, σ_sh = 4 dB, integer-dBm
    /// quantization on. The reference point (-31.5 dBm at 1 m) puts the
    /// mean at -61.5 dBm by 10 m.
    pub fn long_range_default() -> Self {
        ChannelParams {
            ref_rssi_dbm: -31.5,
            ref_distance_m: 1.0,
            path_loss_exponent: 3.0,
            shadowing_std_db: 4.0,
            quantize_to_integer_dbm: true,
        }
    }

    /// Peer-to-peer defaults: n_p = 2.7 and reference point calibrated to
    /// the short-range measurement fixture (-58.7 dBm at 10 m), σ_sh = 2 dB,
    /// no quantization (peer radios report fractional averages).
    pub fn peer_to_peer_default() -> Self {
        ChannelParams {
            ref_rssi_dbm: -31.7,
            ref_distance_m: 1.0,
            path_loss_exponent: 2.7,
            shadowing_std_db: 2.0,
            quantize_to_integer_dbm: false,
        }
    }

    fn validate(&self) -> Result<(), ChannelError> {
        if !(self.ref_distance_m > 0.0) || !self.ref_distance_m.is_finite() {
            return Err(ChannelError::InvalidParams("ref_distance_m must be > 0"));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(ChannelError::InvalidParams("path_loss_exponent must be > 0"));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(ChannelError::InvalidParams("shadowing_std_db must be >= 0"));
        }
        if !self.ref_rssi_dbm.is_finite() {
            return Err(ChannelError::InvalidParams("ref_rssi_dbm must be finite"));
        }
        Ok(())
    }
}

/// Inputs of the time-of-arrival ranging bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaParams {
    /// Signal-to-noise ratio, linear (> 0).
    pub snr_linear: f64,
    /// Signal bandwidth β, Hz (> 0).
    pub bandwidth_hz: f64,
}

impl ToaParams {
    /// The bound's propagation constant c; fixed, not configurable.
    pub const SPEED_OF_LIGHT_MPS: f64 = SPEED_OF_LIGHT_MPS;
}

// ---------------------------------------------------------------------------
// Bounds and the channel law
// ---------------------------------------------------------------------------

/// Lower bound on the std of any unbiased RSSI range estimate at true
/// distance d: (ln 10 / 10) · (σ_sh / n_p) · d.
///
/// Linear growth in d is the long-range killer: at 1 km with σ_sh/n_p = 2
/// the floor is already ~460 m.
pub fn crlb_rssi_std(d: f64, params: &ChannelParams) -> Result<f64, ChannelError> {
    if d < 0.0 {
        return Err(ChannelError::NegativeDistance(d));
    }
    if params.path_loss_exponent == 0.0 {
        return Err(ChannelError::UndefinedBound);
    }
    Ok(10f64.ln() / 10.0 * (params.shadowing_std_db / params.path_loss_exponent) * d)
}

/// Lower bound on the std of any unbiased time-of-arrival range estimate:
/// c / (2√2 · π · √SNR · β). Independent of distance; inversely
/// proportional to bandwidth, which is what rules out ~100 Hz
/// ultra-narrow-band uplinks.
pub fn crlb_toa_std(params: &ToaParams) -> Result<f64, ChannelError> {
    if !(params.snr_linear > 0.0) {
        return Err(ChannelError::InvalidParams("snr_linear must be > 0"));
    }
    if !(params.bandwidth_hz > 0.0) {
        return Err(ChannelError::InvalidParams("bandwidth_hz must be > 0"));
    }
    Ok(SPEED_OF_LIGHT_MPS
        / (2.0 * 2f64.sqrt() * std::f64::consts::PI * params.snr_linear.sqrt() * params.bandwidth_hz))
}

/// Mean RSSI of the log-distance model at distance d >= d_ref.
pub fn expected_rssi(d: f64, params: &ChannelParams) -> Result<f64, ChannelError> {
    params.validate()?;
    if d < params.ref_distance_m {
        return Err(ChannelError::InsideReferenceDistance {
            distance_m: d,
            ref_distance_m: params.ref_distance_m,
        });
    }
    Ok(params.ref_rssi_dbm
        - 10.0 * params.path_loss_exponent * (d / params.ref_distance_m).log10())
}

/// One shadowed RSSI draw: expected_rssi(d) plus a Gaussian(0, σ_sh²)
/// perturbation, optionally quantized to integer dBm (half away from zero).
///
/// Deterministic given the rng state. A degenerate σ_sh = 0 consumes no
/// randomness.
pub fn sample_rssi<R: Rng + ?Sized>(
    d: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    let mut rssi = expected_rssi(d, params)?;
    if params.shadowing_std_db > 0.0 {
        let shadowing = Normal::new(0.0, params.shadowing_std_db)
            .map_err(|_| ChannelError::InvalidParams("shadowing_std_db must be finite"))?;
        rssi += shadowing.sample(rng);
    }
    if params.quantize_to_integer_dbm {
        rssi = rssi.round(); // f64::round is half-away-from-zero
    }
    Ok(rssi)
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

/// Which channel-parameter set a receiver's links use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkClass {
    /// Node to base station (tens of km hearing radius, quantized dBm).
    LongRange,
    /// Node to peer GPS node (short range, fractional dBm).
    PeerToPeer,
}

/// A transmitter: anchor (GPS) node or plain node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterDef {
    pub id: String,
    pub position: Position,
    /// Number of messages to emit (time indices 0..messages).
    pub messages: u32,
}

/// A receiver: base station or peer GPS node in listen mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverDef {
    pub id: String,
    pub position: Position,
    pub link: LinkClass,
    /// Messages from transmitters beyond this radius are never heard
    /// (masked), meters.
    pub hearing_radius_m: f64,
}

/// Default hearing radius for a link class: 40 km for base stations,
/// 500 m for peers.
pub fn default_hearing_radius_m(link: LinkClass) -> f64 {
    match link {
        LinkClass::LongRange => 40_000.0,
        LinkClass::PeerToPeer => 500.0,
    }
}

/// Geometry plus per-link-class channel parameters for one synthetic
/// deployment. Anchors double as class labels downstream; nodes are the
/// transmitters to localize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub anchors: Vec<TransmitterDef>,
    pub nodes: Vec<TransmitterDef>,
    pub receivers: Vec<ReceiverDef>,
    pub long_range: ChannelParams,
    pub peer_to_peer: ChannelParams,
}

impl Deployment {
    fn params_for(&self, link: LinkClass) -> &ChannelParams {
        match link {
            LinkClass::LongRange => &self.long_range,
            LinkClass::PeerToPeer => &self.peer_to_peer,
        }
    }
}

/// Synthetic measurement campaign: every emitted message paired with the
/// ground-truth transmitter positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub messages: Vec<RssiMessage>,
    pub positions: BTreeMap<String, Position>,
}

/// Stream seed for one transmitter: FNV-1a 64 over the master seed's
/// little-endian bytes followed by the transmitter id's UTF-8 bytes.
///
/// FNV is stable across platforms and toolchain versions, so per-node
/// streams are independent of each other and of iteration order, and a
/// dataset is reproducible from (deployment, master seed) alone.
pub fn sub_seed(master_seed: u64, transmitter_id: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET;
    for byte in master_seed
        .to_le_bytes()
        .into_iter()
        .chain(transmitter_id.bytes())
    {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Simulates the deployment: every transmitter sends its messages and each
/// receiver within hearing range logs one RSSI sample per message.
/// Receivers out of range simply produce no entry (the mask).
pub fn generate_scenario(
    deployment: &Deployment,
    master_seed: u64,
) -> Result<SyntheticDataset, ChannelError> {
    if deployment.receivers.is_empty() {
        return Err(ChannelError::NoReceivers);
    }
    deployment.long_range.validate()?;
    deployment.peer_to_peer.validate()?;

    let mut messages = Vec::new();
    let mut positions = BTreeMap::new();
    for transmitter in deployment.anchors.iter().chain(&deployment.nodes) {
        positions.insert(transmitter.id.clone(), transmitter.position);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(master_seed, &transmitter.id));
        for t in 0..transmitter.messages {
            for receiver in &deployment.receivers {
                let d = transmitter.position.distance_to(&receiver.position);
                if d > receiver.hearing_radius_m {
                    continue;
                }
                let params = deployment.params_for(receiver.link);
                let rssi_dbm = sample_rssi(d, params, &mut rng)?;
                messages.push(RssiMessage {
                    node_id: transmitter.id.clone(),
                    receiver_id: receiver.id.clone(),
                    time_index: t,
                    rssi_dbm,
                });
            }
        }
    }
    Ok(SyntheticDataset {
        messages,
        positions,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_params(sigma: f64) -> ChannelParams {
        ChannelParams {
            ref_rssi_dbm: -61.5,
            ref_distance_m: 10.0,
            path_loss_exponent: 3.0,
            shadowing_std_db: sigma,
            quantize_to_integer_dbm: false,
        }
    }

    #[test]
    fn rssi_bound_matches_hand_evaluation() {
        let params = flat_params(6.0);
        assert_eq!(crlb_rssi_std(0.0, &params).unwrap(), 0.0);
        // ln(10)/10 * (6/3) * 1000, evaluated independently at high precision.
        let bound = crlb_rssi_std(1000.0, &params).unwrap();
        assert!(
            (bound - 460.517018598809137).abs() / 460.517018598809137 < 1e-12,
            "got {bound}"
        );
    }

    #[test]
    fn rssi_bound_is_linear_in_distance() {
        let params = flat_params(6.0);
        let at = |d| crlb_rssi_std(d, &params).unwrap();
        assert!((at(2000.0) - 2.0 * at(1000.0)).abs() < 1e-9);
        assert!((at(500.0) - 0.5 * at(1000.0)).abs() < 1e-9);
    }

    #[test]
    fn rssi_bound_rejects_bad_input() {
        let mut params = flat_params(6.0);
        assert_eq!(
            crlb_rssi_std(-1.0, &params),
            Err(ChannelError::NegativeDistance(-1.0))
        );
        params.path_loss_exponent = 0.0;
        assert_eq!(crlb_rssi_std(1.0, &params), Err(ChannelError::UndefinedBound));
    }

    #[test]
    fn toa_bound_matches_hand_evaluation() {
        // c / (2*sqrt(2)*pi*sqrt(10)*beta), evaluated independently.
        let narrow = crlb_toa_std(&ToaParams {
            snr_linear: 10.0,
            bandwidth_hz: 100.0,
        })
        .unwrap();
        assert!((narrow - 106690.521201683615).abs() < 1e-6, "got {narrow}");

        let wide = crlb_toa_std(&ToaParams {
            snr_linear: 10.0,
            bandwidth_hz: 500e6,
        })
        .unwrap();
        assert!((wide - 0.021338104240337).abs() < 1e-9, "got {wide}");
    }

    #[test]
    fn toa_bound_is_inverse_in_bandwidth() {
        let base = ToaParams {
            snr_linear: 10.0,
            bandwidth_hz: 100.0,
        };
        let ten_x = ToaParams {
            snr_linear: 10.0,
            bandwidth_hz: 1000.0,
        };
        let a = crlb_toa_std(&base).unwrap();
        let b = crlb_toa_std(&ten_x).unwrap();
        assert!((a / b - 10.0).abs() < 1e-12);
    }

    #[test]
    fn expected_rssi_follows_log_distance() {
        let params = flat_params(0.0);
        assert_eq!(expected_rssi(10.0, &params).unwrap(), -61.5);
        let at_100 = expected_rssi(100.0, &params).unwrap();
        assert!((at_100 - -91.5).abs() < 1e-12, "got {at_100}");
        assert!(matches!(
            expected_rssi(5.0, &params),
            Err(ChannelError::InsideReferenceDistance { .. })
        ));
    }

    #[test]
    fn expected_rssi_is_strictly_decreasing() {
        let params = flat_params(0.0);
        let mut prev = expected_rssi(10.0, &params).unwrap();
        for d in [11.0, 20.0, 50.0, 300.0, 5000.0] {
            let next = expected_rssi(d, &params).unwrap();
            assert!(next < prev, "not decreasing at {d} m");
            prev = next;
        }
    }

    #[test]
    fn short_range_fixture_endpoints_imply_np_near_2_7() {
        // Endpoints -58.7 dBm at 10 m and -86.8 dBm at 110 m give
        // n_p = 28.1 / (10 log10(11)) ~= 2.698; the model with that
        // exponent must reproduce the far endpoint.
        let np = 28.1 / (10.0 * 11f64.log10());
        assert!((np - 2.698).abs() < 1e-3, "got {np}");
        let params = ChannelParams {
            ref_rssi_dbm: -58.7,
            ref_distance_m: 10.0,
            path_loss_exponent: np,
            shadowing_std_db: 0.0,
            quantize_to_integer_dbm: false,
        };
        let far = expected_rssi(110.0, &params).unwrap();
        assert!((far - -86.8).abs() < 1e-9, "got {far}");
    }

    #[test]
    fn sampling_degenerates_to_mean_without_noise() {
        let params = flat_params(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = sample_rssi(100.0, &params, &mut rng).unwrap();
        assert_eq!(v, -91.5);
    }

    #[test]
    fn sampling_quantizes_half_away_from_zero() {
        let mut params = flat_params(0.0);
        params.quantize_to_integer_dbm = true;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Expected RSSI at 100 m is exactly -91.5; the tie rounds to -92.
        let v = sample_rssi(100.0, &params, &mut rng).unwrap();
        assert_eq!(v, -92.0);
    }

    #[test]
    fn sampling_is_reproducible_per_seed() {
        let params = flat_params(2.0);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| sample_rssi(100.0, &params, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn sampling_matches_gaussian_law() {
        let params = flat_params(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_rssi(100.0, &params, &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - -91.5).abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 2.0).abs() < 0.05, "std {}", var.sqrt());
    }

    fn tiny_deployment() -> Deployment {
        Deployment {
            anchors: vec![],
            nodes: vec![TransmitterDef {
                id: "n1".into(),
                position: Position::new(0.0, 0.0),
                messages: 100,
            }],
            receivers: vec![ReceiverDef {
                id: "bs1".into(),
                position: Position::new(100.0, 0.0),
                link: LinkClass::LongRange,
                hearing_radius_m: default_hearing_radius_m(LinkClass::LongRange),
            }],
            long_range: flat_params(2.0),
            peer_to_peer: ChannelParams::peer_to_peer_default(),
        }
    }

    #[test]
    fn scenario_emits_one_message_per_audible_link() {
        let dataset = generate_scenario(&tiny_deployment(), 1).unwrap();
        assert_eq!(dataset.messages.len(), 100);
        assert_eq!(dataset.positions.len(), 1);

        // A second receiver out of hearing range adds nothing.
        let mut far = tiny_deployment();
        far.receivers.push(ReceiverDef {
            id: "bs2".into(),
            position: Position::new(100_000.0, 0.0),
            link: LinkClass::LongRange,
            hearing_radius_m: 40_000.0,
        });
        let dataset = generate_scenario(&far, 1).unwrap();
        assert_eq!(dataset.messages.len(), 100);
        assert!(dataset.messages.iter().all(|m| m.receiver_id == "bs1"));
    }

    #[test]
    fn scenario_rejects_empty_receivers() {
        let mut deployment = tiny_deployment();
        deployment.receivers.clear();
        assert_eq!(
            generate_scenario(&deployment, 1),
            Err(ChannelError::NoReceivers)
        );
    }

    #[test]
    fn clusters_100m_apart_separate_at_near_receiver() {
        // Two clusters of 3 nodes each, 100 m apart, receiver 30 m from
        // cluster A on the line through both: mean RSSIs must differ by
        // well over 10 dB.
        let cluster = |prefix: &str, cx: f64| {
            ["a", "b", "c"]
                .iter()
                .enumerate()
                .map(|(i, tag)| TransmitterDef {
                    id: format!("{prefix}{tag}"),
                    position: Position::new(cx, (i as f64 - 1.0) * 5.0),
                    messages: 50,
                })
                .collect::<Vec<_>>()
        };
        let deployment = Deployment {
            anchors: vec![],
            nodes: [cluster("a-", 0.0), cluster("b-", 100.0)].concat(),
            receivers: vec![ReceiverDef {
                id: "near".into(),
                position: Position::new(-30.0, 0.0),
                link: LinkClass::LongRange,
                hearing_radius_m: 40_000.0,
            }],
            long_range: flat_params(2.0),
            peer_to_peer: ChannelParams::peer_to_peer_default(),
        };
        let dataset = generate_scenario(&deployment, 9).unwrap();
        let mean_of = |prefix: &str| {
            let values: Vec<f64> = dataset
                .messages
                .iter()
                .filter(|m| m.node_id.starts_with(prefix))
                .map(|m| m.rssi_dbm)
                .collect();
            values.iter().sum::<f64>() / values.len() as f64
        };
        let gap = mean_of("a-") - mean_of("b-");
        assert!(gap > 10.0, "cluster separation only {gap:.1} dB");
    }

    #[test]
    fn per_node_streams_are_independent() {
        // Adding a transmitter must not disturb another transmitter's draws.
        let base = generate_scenario(&tiny_deployment(), 5).unwrap();
        let mut extended = tiny_deployment();
        extended.nodes.insert(
            0,
            TransmitterDef {
                id: "n0".into(),
                position: Position::new(10.0, 0.0),
                messages: 17,
            },
        );
        let bigger = generate_scenario(&extended, 5).unwrap();
        let n1_only: Vec<_> = bigger
            .messages
            .iter()
            .filter(|m| m.node_id == "n1")
            .cloned()
            .collect();
        assert_eq!(n1_only, base.messages);
    }
}
