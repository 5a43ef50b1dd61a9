use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;
use twinops_core::cardid::{CardIdError, MatchConfig};
use twinops_core::faultloc::{localize as coverage, localize_mp, LocalizationResult};
use twinops_core::histogram::Histogram;
use twinops_core::navmap::{render_ascii, NavError};
use twinops_core::netqos::{simulate, SimConfig};
use twinops_core::scenario::{CardIdRunError, RouteError, Scenario, ScenarioError};
use twinops_edged::{serve as serve_edge, ServeConfig, Service};

use crate::render;
use crate::Algo;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NoSolution(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(format!("scenario: {e}"))
        }
    }
}

impl From<RouteError> for CliError {
    fn from(e: RouteError) -> Self {
        match e {
            RouteError::Nav(NavError::NoPath(..) | NavError::BlockedEndpoint(_)) => {
                CliError::NoSolution(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CardIdRunError> for CliError {
    fn from(e: CardIdRunError) -> Self {
        match e {
            CardIdRunError::CardId(CardIdError::NoDetections | CardIdError::EmptyArrangement) => {
                CliError::NoSolution(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

pub struct Context {
    pub scenario_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

impl Context {
    fn scenario(&self) -> Result<Scenario, CliError> {
        let path = self.scenario_path.as_ref().ok_or_else(|| {
            CliError::Config("no scenario: pass --scenario or set TWINOPS_SCENARIO".into())
        })?;
        Ok(Scenario::load(path)?)
    }

    /// Attach the run time unless output must be reproducible.
    fn finish(&self, mut json: Value, mut text: String, started: Instant) -> Output {
        if !self.deterministic {
            let ms = started.elapsed().as_secs_f64() * 1e3;
            json["elapsed_ms"] = json!(ms);
            text.push_str(&format!("elapsed: {ms:.1} ms\n"));
        }
        Output { json, text }
    }
}

pub struct Output {
    pub json: Value,
    pub text: String,
}

pub fn localize(ctx: &Context, algo: Algo, iters: usize) -> Result<Output, CliError> {
    let scenario = ctx.scenario()?;
    let started = Instant::now();
    let result: LocalizationResult = match algo {
        Algo::Coverage => coverage(&scenario.graph, &scenario.alarms),
        Algo::Mp => localize_mp(&scenario.graph, &scenario.alarms, iters),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let algo_name = match algo {
        Algo::Coverage => "coverage",
        Algo::Mp => "mp",
    };
    let mut json = json!({
        "scenario": scenario.file.name,
        "algo": algo_name,
        "result": result,
    });
    if algo == Algo::Mp {
        json["iterations"] = json!(iters);
    }
    let text = render::localization(&scenario.file.name, algo_name, &result);
    Ok(ctx.finish(json, text, started))
}

pub struct NavTarget {
    pub from: String,
    pub to: Option<String>,
    pub shelf: Option<String>,
    pub element: Option<String>,
    pub shelf_level: Option<u8>,
    pub render: bool,
}

pub fn navigate(ctx: &Context, t: NavTarget) -> Result<Output, CliError> {
    let scenario = ctx.scenario()?;
    let started = Instant::now();
    let shelf_id = match (&t.shelf, &t.element) {
        (Some(s), _) => Some(s.clone()),
        (_, Some(e)) => Some(
            scenario
                .shelf_of(e)
                .ok_or_else(|| {
                    CliError::Config(format!("element `{e}` is unknown or has no shelf"))
                })?
                .id
                .clone(),
        ),
        _ => None,
    };
    let (goal, level) = match (&shelf_id, &t.to) {
        (Some(shelf), _) => {
            let spec = scenario
                .shelf(shelf)
                .ok_or(RouteError::UnknownShelf(shelf.clone()))?;
            let point = spec
                .point
                .clone()
                .ok_or(RouteError::ShelfWithoutPoint(shelf.clone()))?;
            (point, t.shelf_level.unwrap_or(spec.level))
        }
        (None, Some(to)) => (to.clone(), t.shelf_level.unwrap_or(0)),
        (None, None) => {
            return Err(CliError::Config(
                "give one of --to, --shelf or --element".into(),
            ))
        }
    };
    let path = scenario.navigate(&t.from, &goal, level)?;
    let ascii = if t.render {
        let grid = scenario.grid().ok_or(RouteError::NoEnvMap)?;
        Some(render_ascii(grid, &path.cells))
    } else {
        None
    };
    let json = json!({
        "scenario": scenario.file.name,
        "from": t.from,
        "to": goal,
        "shelf": shelf_id,
        "shelf_level": level,
        "path": path,
        "ascii": ascii,
    });
    let text = render::navigation(
        &t.from,
        &goal,
        shelf_id.as_deref(),
        level,
        &path,
        ascii.as_deref(),
    );
    Ok(ctx.finish(json, text, started))
}

pub fn card_id(ctx: &Context, layout: &str, threshold: Option<f64>) -> Result<Output, CliError> {
    let scenario = ctx.scenario()?;
    let started = Instant::now();
    let mut config = MatchConfig::default();
    if let Some(t) = threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Config(format!(
                "--threshold {t} is outside [0, 1]"
            )));
        }
        config.confidence_threshold = t;
    }
    // Without a root cause the overlay still marks alarmed cards.
    let localization = coverage(&scenario.graph, &scenario.alarms).ok();
    let outcome = scenario.card_id(layout, localization.as_ref(), ctx.seed, &config)?;
    let json = json!({
        "scenario": scenario.file.name,
        "layout": layout,
        "root_cause_id": localization.as_ref().map(|l| &l.root_cause_id),
        "detections": outcome.detections,
        "assignment": outcome.assignment,
        "overlays": outcome.report.overlays,
        "root_cause_visible": outcome.report.root_cause_visible,
    });
    let text = render::card_id(layout, &outcome);
    Ok(ctx.finish(json, text, started))
}

pub struct QosOverrides {
    pub meter: Option<bool>,
    pub duration_s: Option<f64>,
    pub ar_gbps: Option<f64>,
    pub cbr_gbps: Option<f64>,
    pub capacity_gbps: Option<f64>,
    pub length_km: Option<f64>,
    pub cbr_cap_gbps: Option<f64>,
    pub burst_bytes: Option<u64>,
    pub wifi: Option<bool>,
    pub bin_width_ms: Option<f64>,
}

pub fn simulate_qos(ctx: &Context, o: QosOverrides) -> Result<Output, CliError> {
    let mut config = match ctx.scenario_path {
        Some(_) => ctx.scenario()?.qos_config(),
        None => SimConfig::ar_vs_cbr(0.33, 100.0, true, 10.0),
    };
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    if let Some(v) = o.meter {
        config.meter.enabled = v;
    }
    if let Some(v) = o.duration_s {
        config.duration_s = v;
    }
    if let Some(v) = o.capacity_gbps {
        config.link.capacity_gbps = v;
    }
    if let Some(v) = o.length_km {
        config.link.length_km = v;
    }
    if let Some(v) = o.cbr_cap_gbps {
        config.meter.cbr_cap_gbps = v;
    }
    if let Some(v) = o.burst_bytes {
        config.meter.burst_bytes = v;
    }
    if let Some(v) = o.wifi {
        config.wifi.enabled = v;
    }
    for f in &mut config.flows {
        match f.flow_id.as_str() {
            "ar" => f.offered_gbps = o.ar_gbps.unwrap_or(f.offered_gbps),
            "cbr" => f.offered_gbps = o.cbr_gbps.unwrap_or(f.offered_gbps),
            _ => {}
        }
    }
    if let Some(w) = o.bin_width_ms {
        if !(w.is_finite() && w > 0.0) {
            return Err(CliError::Config(format!(
                "--bin-width must be positive, got {w}"
            )));
        }
    }
    let started = Instant::now();
    let mut report = simulate(&config).map_err(|e| CliError::Config(e.to_string()))?;
    let histogram = o
        .bin_width_ms
        .map(|w| Histogram::from_samples(w, report.ar_rtt_samples_ms.iter().copied()));
    // Per-packet samples are summarized, not printed.
    report.ar_rtt_samples_ms = Vec::new();
    let mut json = json!({
        "config": config,
        "report": report,
    });
    if let Some(h) = &histogram {
        json["ar_rtt_histogram"] =
            json!({"bin_width_ms": h.bin_width(), "total": h.total(), "bins": h.bins()});
    }
    let text = render::qos(&config, &report, histogram.as_ref());
    Ok(ctx.finish(json, text, started))
}

pub fn serve(
    ctx: &Context,
    listen: String,
    ws_listen: Option<String>,
    max_frame_bytes: usize,
) -> Result<(), CliError> {
    let scenario = Arc::new(ctx.scenario()?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let service = Arc::new(Service::new(scenario));
        let config = ServeConfig {
            listen,
            ws_listen,
            max_frame_bytes,
        };
        let handle = serve_edge(service, config)
            .await
            .map_err(|e| CliError::Io(e.to_string()))?;
        {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "tcp listening on {}", handle.tcp_addr);
            if let Some(ws) = handle.ws_addr {
                let _ = writeln!(out, "ws listening on ws://{ws}/ws");
            }
            let _ = out.flush();
        }
        tokio::signal::ctrl_c()
            .await
            .map_err(|e| CliError::Io(format!("signal handler: {e}")))?;
        handle.shutdown().await;
        Ok(())
    })
}
