//! Session-oriented HTTP API over the synthesis pipeline.
//!
//! | method | path | body / query | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{"seed": u64}` | `201` session info |
//! | GET | `/sessions/{id}` | | session info with world builds |
//! | GET | `/sessions/{id}/tiles` | `rect=X,Y,W,H&layer=category\|height\|normal\|walkable` | PNG |
//! | POST | `/sessions/{id}/resample` | `{"rect": {x,y,w,h}, "seed": u64}`, optional `Idempotency-Key` header | invalidated patch rects |
//! | POST | `/sessions/{id}/worlds` | `{"rect": {..}, "completion": "pillar"\|"watertight"}` | `202` build progress |
//! | GET | `/sessions/{id}/worlds/{world}` | | build progress |
//! | POST | `/sessions/{id}/worlds/{world}/cameras` | `{"n", "seed", "eye_height_m"?, "min_component_px"?}` | `{"poses": [..]}` |
//! | POST | `/sessions/{id}/worlds/{world}/render` | `{"pose", "width", "height", "fov_deg"}` | base64 images |
//!
//! Errors are `{"error": "..."}` with 400, 404, 409, 413 or 422.

mod api;
mod error;
mod png;
mod session;

pub use api::{
    router, BuildRequest, CameraReply, CreateSession, RenderReply, RenderRequest, SessionInfo,
    GENERATION_HEADER, IDEMPOTENCY_HEADER,
};
pub use error::ServiceError;
pub use png::{layer_png, Layer};
pub use session::{
    BuildProgress, BuildStatus, BuiltWorld, CameraRequest, ResampleReply, ResampleRequest, ServiceConfig,
    Session, SessionStore, TileFetch, WorldBuild,
};

use std::net::SocketAddr;
use std::sync::Arc;

use infinicity_core::latentgrid::PatchGenerator;

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(
    addr: SocketAddr,
    config: ServiceConfig,
    generator: Arc<dyn PatchGenerator>,
) -> std::io::Result<()> {
    let store = Arc::new(SessionStore::new(config, generator));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store)).await
}
