#![allow(dead_code)]

use std::sync::Arc;

use twinops_core::scenario::Scenario;
use twinops_edged::{serve, ServeConfig, ServerHandle, Service};

pub fn reference() -> Arc<Scenario> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/reference.json"
    );
    Arc::new(Scenario::load(path).expect("reference scenario loads"))
}

pub async fn start(max_frame_bytes: usize) -> (Arc<Service>, ServerHandle) {
    let service = Arc::new(Service::new(reference()));
    let config = ServeConfig {
        listen: "127.0.0.1:0".into(),
        ws_listen: Some("127.0.0.1:0".into()),
        max_frame_bytes,
    };
    let handle = serve(service.clone(), config).await.expect("binds");
    (service, handle)
}
