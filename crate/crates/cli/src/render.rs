//! Plain-text reports. Fixed precision everywhere so output is stable.

use std::fmt::Write;

use twinops_core::faultloc::LocalizationResult;
use twinops_core::histogram::Histogram;
use twinops_core::navmap::NavPath;
use twinops_core::netqos::{QosReport, SimConfig};
use twinops_core::scenario::CardIdOutcome;

pub fn localization(scenario: &str, algo: &str, r: &LocalizationResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {scenario}");
    let _ = writeln!(s, "algorithm: {algo}");
    let _ = writeln!(s, "root cause: {}", r.root_cause_id);
    let _ = writeln!(s, "ranking:");
    for (i, e) in r.ranking.iter().enumerate() {
        let _ = writeln!(s, "  {:>2}. {:<24} {:.4}", i + 1, e.element_id, e.score);
    }
    if !r.explained.is_empty() {
        let _ = writeln!(s, "explained by:");
        for (alarmed, by) in &r.explained {
            let _ = writeln!(s, "  {alarmed:<24} <- {by}");
        }
    }
    s
}

pub fn navigation(
    from: &str,
    to: &str,
    shelf: Option<&str>,
    level: u8,
    p: &NavPath,
    ascii: Option<&str>,
) -> String {
    let mut s = String::new();
    match shelf {
        Some(shelf) => {
            let _ = writeln!(s, "route: {from} -> {to} (shelf {shelf}, level {level})");
        }
        None => {
            let _ = writeln!(s, "route: {from} -> {to} (level {level})");
        }
    }
    let _ = writeln!(s, "cells: {}", p.cells.len());
    let _ = writeln!(s, "cost: {:.4} cells, {:.3} m", p.cost, p.cost_m);
    let _ = writeln!(s, "arrows: {}", p.arrows.len());
    for a in &p.arrows {
        let _ = writeln!(
            s,
            "  ({:>7.3}, {:>7.3}) heading {:>7.2} deg",
            a.position_m[0],
            a.position_m[1],
            a.heading_rad.to_degrees()
        );
    }
    let _ = writeln!(
        s,
        "flag: ({:.3}, {:.3}) height {:.2} m",
        p.flag.position_m[0], p.flag.position_m[1], p.flag.height_m
    );
    if let Some(grid) = ascii {
        s.push_str(grid);
        if !grid.ends_with('\n') {
            s.push('\n');
        }
    }
    s
}

pub fn card_id(layout: &str, o: &CardIdOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "layout: {layout}");
    let _ = writeln!(s, "detections: {}", o.detections.len());
    let _ = writeln!(
        s,
        "{:>4}  {:<20} {:<10} {:>6}  color",
        "slot", "element", "model", "conf"
    );
    for ov in &o.report.overlays {
        let color = serde_json::to_value(ov.color).ok();
        let color = color.as_ref().and_then(|c| c.as_str()).unwrap_or("?");
        let _ = writeln!(
            s,
            "{:>4}  {:<20} {:<10} {:>6.3}  {color}",
            ov.slot, ov.element_id, ov.label, ov.confidence
        );
    }
    let a = &o.assignment;
    if !a.unmatched_slots.is_empty() {
        let _ = writeln!(s, "unmatched slots: {:?}", a.unmatched_slots);
    }
    if !a.unmatched_detections.is_empty() {
        let _ = writeln!(s, "unmatched detections: {:?}", a.unmatched_detections);
    }
    if !a.below_threshold.is_empty() {
        let _ = writeln!(s, "below threshold: {:?}", a.below_threshold);
    }
    let _ = writeln!(s, "root cause visible: {}", o.report.root_cause_visible);
    s
}

pub fn qos(c: &SimConfig, r: &QosReport, histogram: Option<&Histogram>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "link: {:.1} Gb/s, {:.1} km, propagation RTT {:.4} ms",
        c.link.capacity_gbps,
        c.link.length_km,
        2.0 * r.propagation_ms
    );
    let _ = writeln!(
        s,
        "meter: {} (CBR cap {:.1} Gb/s, burst {} B)",
        if r.meter_enabled { "on" } else { "off" },
        c.meter.cbr_cap_gbps,
        c.meter.burst_bytes
    );
    let _ = writeln!(s, "duration: {:.3} s, seed {}", r.duration_s, c.seed);
    let _ = writeln!(s, "link busy: {:.4}", r.link_busy_fraction);
    let _ = writeln!(
        s,
        "{:<6} {:<4} {:>10} {:>10} {:>10} {:>12} {:>12} {:>10}",
        "flow", "cls", "offered", "generated", "achieved", "delivered", "meter_drop", "queue_drop"
    );
    for f in &r.flows {
        let class = serde_json::to_value(f.class).ok();
        let class = class.as_ref().and_then(|c| c.as_str()).unwrap_or("?");
        let _ = writeln!(
            s,
            "{:<6} {:<4} {:>10.4} {:>10.4} {:>10.4} {:>12} {:>12} {:>10}",
            f.flow_id,
            class,
            f.offered_gbps,
            f.generated_gbps,
            f.achieved_gbps,
            f.delivered_packets,
            f.meter_drops,
            f.queue_drops
        );
    }
    let t = &r.ar_rtt;
    let _ = writeln!(
        s,
        "AR RTT ms: n={} mean {:.5} min {:.5} p50 {:.5} p99 {:.5} max {:.5}",
        t.count, t.mean_ms, t.min_ms, t.p50_ms, t.p99_ms, t.max_ms
    );
    if let Some(h) = histogram {
        let _ = writeln!(
            s,
            "AR RTT histogram (bin {} ms, {} samples):",
            h.bin_width(),
            h.total()
        );
        s.push_str(&h.render_table("ms"));
    }
    s
}
