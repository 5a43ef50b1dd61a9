//! Domain logic for the optical-network digital twin: topology and alarm
//! handling, root-cause localization, indoor navigation, card identification
//! and shared-link QoS simulation.

pub mod cardid;
pub mod faultloc;
pub mod histogram;
pub mod navmap;
pub mod netqos;
pub mod scenario;
pub mod topology;
