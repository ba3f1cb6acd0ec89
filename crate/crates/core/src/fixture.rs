//! Deterministic synthetic flow records shaped like the public keylogger
//! dataset: identifier columns, CICFlowMeter-style feature names, a textual
//! `Class` column, `Infinity` rate cells for zero-duration flows, a constant
//! column, and a 70/30 benign/keylogger imbalance.
//!
//! Only uniform draws and basic arithmetic are used, so the output is
//! byte-identical on every platform.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::{self, Purpose};

pub const FIXTURE_ROWS: usize = 2000;
pub const FIXTURE_SEED: u64 = 20_240_917;
pub const FIXTURE_FILE: &str = "synthetic_flows.csv";

/// Feature columns in file order (identifiers and label excluded).
pub const FEATURE_COLUMNS: [&str; 24] = [
    "Source Port",
    "Destination Port",
    "Protocol",
    "Flow Duration",
    "Total Fwd Packets",
    "Total Backward Packets",
    "Total Length of Fwd Packets",
    "Total Length of Bwd Packets",
    "Fwd Packet Length Max",
    "Fwd Packet Length Min",
    "Fwd Packet Length Mean",
    "Fwd Packet Length Std",
    "Bwd Packet Length Max",
    "Bwd Packet Length Min",
    "Flow Bytes/s",
    "Flow Packets/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Fwd PSH Flags",
    "Bwd PSH Flags",
    "Packet Length Std",
    "Average Packet Size",
    "Init_Win_bytes_forward",
    "Idle Mean",
];

/// Path of the checked-in fixture.
pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(FIXTURE_FILE)
}

/// Approximately normal draw (mean 0, sd 1) from four uniforms.
fn approx_normal(rng: &mut ChaCha8Rng) -> f64 {
    let s: f64 = (0..4).map(|_| rng.random::<f64>()).sum();
    (s - 2.0) * 3f64.sqrt()
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn ip(rng: &mut ChaCha8Rng, private: bool) -> String {
    if private {
        format!("192.168.{}.{}", rng.random_range(0..4), rng.random_range(2..254))
    } else {
        format!(
            "{}.{}.{}.{}",
            rng.random_range(11..223),
            rng.random_range(0..256),
            rng.random_range(0..256),
            rng.random_range(1..255)
        )
    }
}

/// `n_rows` records as CSV text, one stream per row.
pub fn synthetic_flows_csv(n_rows: usize, seed: u64) -> String {
    let mut out = String::new();
    out.push_str("Unnamed: 0,Flow ID,Source IP,Destination IP,Timestamp");
    for name in FEATURE_COLUMNS {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",Class\n");
    for i in 0..n_rows {
        let mut rng = rng::stream(seed, Purpose::Fixture, i as u64);
        let keylogger = rng.random::<f64>() < 0.3;
        // a slice of each class imitates the other, so the problem is not trivially separable
        let looks_keylogger = keylogger ^ (rng.random::<f64>() < 0.08);
        let src_ip = ip(&mut rng, true);
        let dst_ip = ip(&mut rng, false);
        let src_port: u32 = rng.random_range(1024..65536);
        let dst_port: u32 = if looks_keylogger {
            pick(&mut rng, &[21, 25, 465, 587, 587, 4444, 443])
        } else {
            pick(&mut rng, &[80, 443, 443, 443, 53, 8080, 8443, 993])
        };
        let protocol = if looks_keylogger || rng.random::<f64>() < 0.8 { 6 } else { 17 };

        let zero_duration = rng.random::<f64>() < 0.03;
        let duration: f64 = if zero_duration {
            0.0
        } else if looks_keylogger {
            (2.0e6 + 4.0e5 * approx_normal(&mut rng)).max(1.0).round()
        } else {
            (rng.random::<f64>().powi(3) * 1.2e7).max(1.0).round()
        };
        let (fwd_pkts, bwd_pkts): (u32, u32) = if looks_keylogger {
            (rng.random_range(3..12), rng.random_range(1..6))
        } else {
            (rng.random_range(1..60), rng.random_range(0..80))
        };
        let fwd_mean = if looks_keylogger {
            (90.0 + 25.0 * approx_normal(&mut rng)).max(20.0)
        } else {
            (40.0 + 500.0 * rng.random::<f64>()).max(0.0)
        };
        let fwd_std = (fwd_mean * 0.3 * rng.random::<f64>()).max(0.0);
        let fwd_max = fwd_mean + 2.0 * fwd_std;
        let fwd_min = (fwd_mean - 2.0 * fwd_std).max(0.0);
        let bwd_max = if bwd_pkts == 0 {
            0.0
        } else if looks_keylogger {
            (60.0 + 20.0 * approx_normal(&mut rng)).max(0.0)
        } else {
            (200.0 + 1200.0 * rng.random::<f64>()).max(0.0)
        };
        let bwd_min = if bwd_pkts == 0 { 0.0 } else { bwd_max * 0.2 * rng.random::<f64>() };
        let fwd_bytes = (fwd_mean * fwd_pkts as f64).round();
        let bwd_bytes = ((bwd_min + bwd_max) * 0.5 * bwd_pkts as f64).round();
        let secs = duration / 1e6;
        let (bytes_rate, pkts_rate) = if zero_duration {
            ("Infinity".to_string(), "Infinity".to_string())
        } else {
            (
                format!("{:.3}", (fwd_bytes + bwd_bytes) / secs),
                format!("{:.3}", (fwd_pkts + bwd_pkts) as f64 / secs),
            )
        };
        let n_pkts = (fwd_pkts + bwd_pkts).max(1) as f64;
        let iat_mean = duration / n_pkts;
        let iat_std = iat_mean * if looks_keylogger { 0.1 } else { 1.5 } * rng.random::<f64>();
        let psh = (rng.random::<f64>() < if looks_keylogger { 0.7 } else { 0.3 }) as u8;
        let pkt_std = (fwd_std + bwd_max * 0.25) * (0.5 + rng.random::<f64>());
        let avg_size = (fwd_bytes + bwd_bytes) / n_pkts;
        let init_win: u32 = if looks_keylogger {
            pick(&mut rng, &[8192, 65535, 29200])
        } else {
            pick(&mut rng, &[64240, 65535, 29200, 1024, 251])
        };
        let idle = if looks_keylogger {
            (5.0e6 + 1.0e6 * approx_normal(&mut rng)).max(0.0)
        } else if rng.random::<f64>() < 0.6 {
            0.0
        } else {
            1.0e7 * rng.random::<f64>()
        };
        let hour = rng.random_range(0..24);
        let minute = rng.random_range(0..60);

        let _ = write!(
            out,
            "{i},{src_ip}-{dst_ip}-{src_port}-{dst_port}-{protocol},{src_ip},{dst_ip},\
             12/07/2017 {hour:02}:{minute:02},{src_port},{dst_port},{protocol},{duration},\
             {fwd_pkts},{bwd_pkts},{fwd_bytes},{bwd_bytes},{fwd_max:.3},{fwd_min:.3},{fwd_mean:.3},\
             {fwd_std:.3},{bwd_max:.3},{bwd_min:.3},{bytes_rate},{pkts_rate},{iat_mean:.3},{iat_std:.3},\
             {psh},0,{pkt_std:.3},{avg_size:.3},{init_win},{idle:.1},{}\n",
            if keylogger { "Keylogger" } else { "Benign" }
        );
    }
    out
}
