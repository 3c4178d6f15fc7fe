//! Process wiring: bind the listeners, spawn both fronts, and optionally
//! a self-ticker that drives the node on wall-clock time.

use std::net::SocketAddr;
use std::time::Duration;

use tokio::net::TcpListener;

use crate::state::{now_ms, ServiceState};
use crate::ServiceConfig;

/// Handles to a started service. Tasks keep running when this is dropped;
/// the owning runtime decides their lifetime.
pub struct Running {
    pub http_addr: SocketAddr,
    pub line_addr: Option<SocketAddr>,
    pub state: ServiceState,
}

/// Build the node, install `rules`, and serve until the runtime shuts down.
pub async fn start(config: ServiceConfig, rules: &[(String, String)]) -> Result<Running, String> {
    let state = ServiceState::build(config.nbi.clone(), rules)?;

    let http_listener = TcpListener::bind(&config.http_bind)
        .await
        .map_err(|e| format!("bind {}: {e}", config.http_bind))?;
    let http_addr = http_listener.local_addr().map_err(|e| e.to_string())?;
    let app = crate::http::router(state.clone());
    tokio::spawn(async move {
        let _ = axum::serve(http_listener, app).await;
    });

    let line_addr = match &config.line_bind {
        Some(bind) => {
            let listener =
                TcpListener::bind(bind).await.map_err(|e| format!("bind {bind}: {e}"))?;
            let addr = listener.local_addr().map_err(|e| e.to_string())?;
            let line_state = state.clone();
            tokio::spawn(crate::line::serve(listener, line_state));
            Some(addr)
        }
        None => None,
    };

    if let Some(interval_ms) = config.tick_interval_ms {
        let tick_state = state.clone();
        tokio::spawn(async move {
            let mut timer = tokio::time::interval(Duration::from_millis(interval_ms.max(1)));
            loop {
                timer.tick().await;
                let state = tick_state.clone();
                let _ = tokio::task::spawn_blocking(move || state.tick(now_ms())).await;
            }
        });
    }

    Ok(Running { http_addr, line_addr, state })
}
