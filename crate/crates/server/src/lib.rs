//! HTTP triage service over a loaded corpus snapshot, with a durable log of
//! moderation actions.

pub mod actions;
pub mod config;
pub mod query;
pub mod routes;
pub mod service;
pub mod telemetry;

use std::future::Future;
use std::sync::Arc;

use tokio::net::TcpListener;

pub use actions::{effective_states, ActionKind, ActionLog, LogError, ModerationAction};
pub use config::{ConfigError, ServerConfig};
pub use query::{QueryError, QueryParams};
pub use routes::router;
pub use service::{Service, ServiceError, Snapshot};
pub use telemetry::Telemetry;

/// Opens the log, loads the corpus and builds the shared service.
pub fn build_service(config: &ServerConfig, clock: service::Clock) -> Result<Arc<Service>, ServiceError> {
    let log = ActionLog::open(&config.action_log)?;
    let svc = Arc::new(Service::new(log, clock, Telemetry::new(config.telemetry)));
    svc.load_corpus(&config.corpus)?;
    Ok(svc)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Arc<Service>,
    config: &ServerConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(service, config.static_dir.as_deref());
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
