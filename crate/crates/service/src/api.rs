use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use image::ExtendedColorType;
use serde::{Deserialize, Serialize};

use infinicity_core::camsample::CameraPose;
use infinicity_core::latentgrid::PixelRect;
use infinicity_core::render::{depth_to_bytes, Intrinsics};
use infinicity_core::voxelworld::Completion;
use infinicity_core::Palette;

use crate::png::{encode_png, layer_png, Layer};
use crate::session::{BuildProgress, CameraRequest, ResampleReply, ResampleRequest, SessionStore};
use crate::ServiceError;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const GENERATION_HEADER: &str = "x-field-generation";

type Store = Arc<SessionStore>;

pub fn router(store: Store) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/tiles", get(get_tile))
        .route("/sessions/{id}/resample", post(resample))
        .route("/sessions/{id}/worlds", post(build_world))
        .route("/sessions/{id}/worlds/{world}", get(world_progress))
        .route("/sessions/{id}/worlds/{world}/cameras", post(cameras))
        .route("/sessions/{id}/worlds/{world}/render", post(render))
        .with_state(store)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub seed: u64,
    pub generation: u64,
    pub patch_size: u32,
    pub cached_patches: usize,
    pub worlds: Vec<BuildProgress>,
}

async fn create_session(State(store): State<Store>, Json(req): Json<CreateSession>) -> Response {
    let s = store.create(req.seed);
    let body = SessionInfo {
        id: s.id.clone(),
        seed: s.seed,
        generation: 0,
        patch_size: s.patch_size(),
        cached_patches: 0,
        worlds: vec![],
    };
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn session_info(State(store): State<Store>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ServiceError> {
    let s = store.get(&id)?;
    Ok(Json(SessionInfo {
        id: s.id.clone(),
        seed: s.seed,
        generation: s.generation(),
        patch_size: s.patch_size(),
        cached_patches: s.cached_patches(),
        worlds: s.worlds(),
    }))
}

#[derive(Debug, Deserialize)]
struct TileQuery {
    rect: String,
    layer: Option<String>,
}

fn parse_rect(s: &str) -> Result<PixelRect, ServiceError> {
    s.parse::<PixelRect>()
        .map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Stage {
            stage: "worker",
            cause: e.to_string(),
        })?
}

async fn get_tile(
    State(store): State<Store>,
    Path(id): Path<String>,
    Query(q): Query<TileQuery>,
) -> Result<Response, ServiceError> {
    let s = store.get(&id)?;
    let rect = parse_rect(&q.rect)?;
    let layer: Layer = q.layer.as_deref().unwrap_or("category").parse()?;
    let (png, generation) = blocking(move || {
        let fetch = s.tile(rect)?;
        Ok((layer_png(&fetch.tile, layer, &Palette::default_city())?, fetch.generation))
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png".to_string()),
            (header::HeaderName::from_static(GENERATION_HEADER), generation.to_string()),
        ],
        png,
    )
        .into_response())
}

async fn resample(
    State(store): State<Store>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<ResampleRequest>,
) -> Result<Json<ResampleReply>, ServiceError> {
    let s = store.get(&id)?;
    let key = headers
        .get(IDEMPOTENCY_HEADER)
        .map(|v| v.to_str().map(str::to_owned))
        .transpose()
        .map_err(|_| ServiceError::BadRequest("idempotency key must be ASCII".into()))?;
    Ok(Json(s.resample(req, key.as_deref())?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BuildRequest {
    pub rect: PixelRect,
    pub completion: Completion,
}

async fn build_world(
    State(store): State<Store>,
    Path(id): Path<String>,
    Json(req): Json<BuildRequest>,
) -> Result<Response, ServiceError> {
    let s = store.get(&id)?;
    let build = s.start_build(req.rect, req.completion)?;
    let progress = build.progress();
    tokio::task::spawn_blocking(move || s.run_build(&build));
    Ok((StatusCode::ACCEPTED, Json(progress)).into_response())
}

async fn world_progress(
    State(store): State<Store>,
    Path((id, world)): Path<(String, String)>,
) -> Result<Json<BuildProgress>, ServiceError> {
    Ok(Json(store.get(&id)?.world(&world)?.progress()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CameraReply {
    pub poses: Vec<CameraPose>,
}

async fn cameras(
    State(store): State<Store>,
    Path((id, world)): Path<(String, String)>,
    Json(req): Json<CameraRequest>,
) -> Result<Json<CameraReply>, ServiceError> {
    let s = store.get(&id)?;
    let poses = blocking(move || s.sample_cameras(&world, &req)).await?;
    Ok(Json(CameraReply { poses }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RenderRequest {
    pub pose: CameraPose,
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
}

/// Images as base64: shaded RGB8 PNG, semantic class-id gray PNG and the
/// raw depth file.
#[derive(Debug, Serialize, Deserialize)]
pub struct RenderReply {
    pub width: u32,
    pub height: u32,
    pub shaded_png: String,
    pub semantic_png: String,
    pub depth: String,
}

async fn render(
    State(store): State<Store>,
    Path((id, world)): Path<(String, String)>,
    Json(req): Json<RenderRequest>,
) -> Result<Json<RenderReply>, ServiceError> {
    let s = store.get(&id)?;
    let intr = Intrinsics {
        width: req.width,
        height: req.height,
        fov_deg: req.fov_deg,
    };
    let out = blocking(move || s.render(&world, &req.pose, intr)).await?;
    let b64 = base64::engine::general_purpose::STANDARD;
    Ok(Json(RenderReply {
        width: out.width,
        height: out.height,
        shaded_png: b64.encode(encode_png(&out.shaded_rgb8(), out.width, out.height, ExtendedColorType::Rgb8)),
        semantic_png: b64.encode(encode_png(&out.semantic, out.width, out.height, ExtendedColorType::L8)),
        depth: b64.encode(depth_to_bytes(&out)),
    }))
}
