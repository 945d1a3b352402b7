//! Robust FP-AO beamforming for a STAR-RIS aided rate-splitting downlink
//! with transceiver and RIS hardware impairments.

pub mod ao;
pub mod channel;
pub mod experiments;
pub mod fp;
pub mod hwi_stats;
pub mod rates;
pub mod scenario;
pub mod subproblems;

pub use star_rsma_conic as conic;
pub use star_rsma_conic::hermitian::{CMatrix, CVector};
