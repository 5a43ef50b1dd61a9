//! Round-trip decomposition. Client and server clocks are never compared:
//! the total comes from the client clock, inference time from the server's.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use twinops_core::histogram::Histogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub msg_id: u64,
    pub inference_ms: f64,
    pub network_rtt_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyError {
    #[error("non-monotone timestamps: {0}")]
    NonMonotoneTimestamps(String),
}

pub fn account_latency(
    msg_id: u64,
    client_send_ms: f64,
    client_recv_ms: f64,
    server_recv_ms: f64,
    server_send_ms: f64,
) -> Result<LatencyRecord, LatencyError> {
    let bad = |m: String| Err(LatencyError::NonMonotoneTimestamps(m));
    let all = [
        client_send_ms,
        client_recv_ms,
        server_recv_ms,
        server_send_ms,
    ];
    if all.iter().any(|t| !t.is_finite()) {
        return bad("timestamps must be finite".into());
    }
    if client_recv_ms < client_send_ms {
        return bad(format!(
            "client received at {client_recv_ms} before sending at {client_send_ms}"
        ));
    }
    if server_send_ms < server_recv_ms {
        return bad(format!(
            "server sent at {server_send_ms} before receiving at {server_recv_ms}"
        ));
    }
    let total_ms = client_recv_ms - client_send_ms;
    let inference_ms = server_send_ms - server_recv_ms;
    if inference_ms > total_ms {
        return bad(format!(
            "server time {inference_ms} ms exceeds round trip {total_ms} ms"
        ));
    }
    Ok(LatencyRecord {
        msg_id,
        inference_ms,
        network_rtt_ms: total_ms - inference_ms,
        total_ms,
    })
}

/// Histograms of total, inference and network time over a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyHistograms {
    pub total: Histogram,
    pub inference: Histogram,
    pub network: Histogram,
}

impl LatencyHistograms {
    pub fn from_records(records: &[LatencyRecord], bin_width_ms: f64) -> Self {
        LatencyHistograms {
            total: Histogram::from_samples(bin_width_ms, records.iter().map(|r| r.total_ms)),
            inference: Histogram::from_samples(
                bin_width_ms,
                records.iter().map(|r| r.inference_ms),
            ),
            network: Histogram::from_samples(
                bin_width_ms,
                records.iter().map(|r| r.network_rtt_ms),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposes_round_trip() {
        let r = account_latency(1, 100.0, 135.0, 5000.0, 5020.0).unwrap();
        assert_eq!(
            (r.total_ms, r.inference_ms, r.network_rtt_ms),
            (35.0, 20.0, 15.0)
        );
    }

    #[test]
    fn ping_is_all_network() {
        let r = account_latency(2, 0.0, 3.5, 7.0, 7.0).unwrap();
        assert_eq!(r.inference_ms, 0.0);
        assert_eq!(r.network_rtt_ms, r.total_ms);
    }

    #[test]
    fn rejects_backwards_clocks() {
        assert!(account_latency(1, 10.0, 9.0, 0.0, 0.0).is_err());
        assert!(account_latency(1, 0.0, 9.0, 5.0, 4.0).is_err());
        assert!(account_latency(1, 0.0, 1.0, 0.0, 2.0).is_err());
        assert!(account_latency(1, f64::NAN, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn histograms_keep_every_record() {
        let records: Vec<_> = (0..1000)
            .map(|i| {
                account_latency(
                    i,
                    0.0,
                    1.0 + (i % 17) as f64 * 0.3,
                    0.0,
                    (i % 5) as f64 * 0.1,
                )
                .unwrap()
            })
            .collect();
        let h = LatencyHistograms::from_records(&records, 0.5);
        for hist in [&h.total, &h.inference, &h.network] {
            assert_eq!(hist.total(), 1000);
            assert_eq!(hist.bins().iter().map(|b| b.count).sum::<u64>(), 1000);
        }
    }
}
