use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine;
use serde_json::{json, Value};
use tower::ServiceExt;

use infinicity_core::latentgrid::{patches_overlapping, GeneratorConfig, PixelRect, ProceduralGenerator};
use infinicity_service::{router, ResampleRequest, ServiceConfig, SessionStore};

fn store(config: ServiceConfig) -> Arc<SessionStore> {
    Arc::new(SessionStore::new(
        config,
        Arc::new(ProceduralGenerator::new(GeneratorConfig::default())),
    ))
}

async fn call(store: &Arc<SessionStore>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(store.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, body.to_vec())
}

async fn post(store: &Arc<SessionStore>, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(store, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn get(store: &Arc<SessionStore>, uri: &str) -> (StatusCode, Vec<u8>) {
    call(store, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn session(store: &Arc<SessionStore>, seed: u64) -> String {
    let (s, v) = post(store, "/sessions", json!({ "seed": seed })).await;
    assert_eq!(s, StatusCode::CREATED);
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn same_seed_sessions_serve_identical_tiles() {
    let st = store(ServiceConfig::default());
    let (a, b) = (session(&st, 42).await, session(&st, 42).await);
    assert_ne!(a, b);
    for layer in ["category", "height", "normal", "walkable"] {
        let ta = get(&st, &format!("/sessions/{a}/tiles?rect=-10,20,100,70&layer={layer}")).await;
        let tb = get(&st, &format!("/sessions/{b}/tiles?rect=-10,20,100,70&layer={layer}")).await;
        assert_eq!(ta.0, StatusCode::OK);
        assert_eq!(ta, tb, "{layer}");
        assert_eq!(&ta.1[1..4], b"PNG");
    }
}

#[tokio::test]
async fn resample_leaves_tiles_outside_footprint_untouched() {
    let st = store(ServiceConfig::default());
    let id = session(&st, 7).await;
    let outside = "/tiles?rect=384,0,128,128&layer=height";
    let near = "/tiles?rect=64,64,128,128&layer=category";
    let before_out = get(&st, &format!("/sessions/{id}{outside}")).await;
    let before_near = get(&st, &format!("/sessions/{id}{near}")).await;

    let rect = PixelRect::new(96, 96, 64, 64);
    let (s, reply) = post(&st, &format!("/sessions/{id}/resample"), json!({ "rect": rect, "seed": 5 })).await;
    assert_eq!(s, StatusCode::OK);
    let footprint: PixelRect = serde_json::from_value(reply["footprint"].clone()).unwrap();
    assert_eq!(footprint, PixelRect::new(32, 32, 192, 192));
    let invalidated: Vec<PixelRect> = serde_json::from_value(reply["invalidated"].clone()).unwrap();
    assert_eq!(invalidated, patches_overlapping(footprint, 64));
    assert_eq!(reply["generation"], 1);

    let after_out = get(&st, &format!("/sessions/{id}{outside}")).await;
    let after_near = get(&st, &format!("/sessions/{id}{near}")).await;
    assert_eq!(before_out, after_out);
    assert_ne!(before_near, after_near);
}

#[tokio::test]
async fn idempotency_key_replays_without_resampling_twice() {
    let st = store(ServiceConfig::default());
    let id = session(&st, 1).await;
    let send = |seed: u64| {
        Request::post(format!("/sessions/{id}/resample"))
            .header("content-type", "application/json")
            .header("idempotency-key", "k-1")
            .body(Body::from(json!({ "rect": PixelRect::new(0, 0, 32, 32), "seed": seed }).to_string()))
            .unwrap()
    };
    let first = call(&st, send(3)).await;
    let again = call(&st, send(3)).await;
    assert_eq!(first, again);
    assert_eq!(st.get(&id).unwrap().generation(), 1);
    assert_eq!(call(&st, send(4)).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn request_errors_map_to_status_codes() {
    let st = store(ServiceConfig { max_sessions: 2, max_tile_px: 1 << 16, ..Default::default() });
    let id = session(&st, 1).await;
    let cases = [
        (format!("/sessions/nope/tiles?rect=0,0,8,8"), StatusCode::NOT_FOUND),
        (format!("/sessions/{id}/tiles?rect=0,0,0,8"), StatusCode::UNPROCESSABLE_ENTITY),
        (format!("/sessions/{id}/tiles?rect=0,0,8"), StatusCode::BAD_REQUEST),
        (format!("/sessions/{id}/tiles?rect=0,0,8,8&layer=lava"), StatusCode::BAD_REQUEST),
        (format!("/sessions/{id}/tiles?rect=0,0,512,512"), StatusCode::PAYLOAD_TOO_LARGE),
        (format!("/sessions/{id}/worlds/w9"), StatusCode::NOT_FOUND),
    ];
    for (uri, want) in cases {
        let (s, body) = get(&st, &uri).await;
        assert_eq!(s, want, "{uri}");
        let v: Value = serde_json::from_slice(&body).unwrap();
        assert!(v["error"].is_string());
    }
    let (s, _) = post(&st, &format!("/sessions/{id}/resample"), json!({ "rect": PixelRect::new(5, 5, 0, 3), "seed": 1 })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    // the store keeps two sessions; the oldest goes first
    session(&st, 2).await;
    session(&st, 3).await;
    assert_eq!(get(&st, &format!("/sessions/{id}")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn world_build_cameras_and_render() {
    let st = store(ServiceConfig { max_world_px: 128 * 128, ..Default::default() });
    let id = session(&st, 11).await;
    let worlds = format!("/sessions/{id}/worlds");
    let (s, _) = post(&st, &worlds, json!({ "rect": PixelRect::new(0, 0, 256, 128), "completion": "pillar" })).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    let (s, _) = post(&st, &worlds, json!({ "rect": PixelRect::new(10, 0, 64, 64), "completion": "pillar" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, started) = post(&st, &worlds, json!({ "rect": PixelRect::new(-64, 0, 128, 128), "completion": "watertight" })).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(started["total"], 5);
    let wid = started["id"].as_str().unwrap().to_string();
    let progress = loop {
        let (s, body) = get(&st, &format!("{worlds}/{wid}")).await;
        assert_eq!(s, StatusCode::OK);
        let v: Value = serde_json::from_slice(&body).unwrap();
        if v["status"] != "running" {
            break v;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(progress["status"], "done", "{progress}");
    assert_eq!(progress["done"], 5);
    assert!(progress["occupied"].as_u64().unwrap() >= 128 * 128);

    let (s, cams) = post(&st, &format!("{worlds}/{wid}/cameras"), json!({ "n": 5, "seed": 3, "min_component_px": 50 })).await;
    assert_eq!(s, StatusCode::OK, "{cams}");
    let poses = cams["poses"].as_array().unwrap();
    assert_eq!(poses.len(), 5);
    let (s, again) = post(&st, &format!("{worlds}/{wid}/cameras"), json!({ "n": 5, "seed": 3, "min_component_px": 50 })).await;
    assert_eq!((s, &again), (StatusCode::OK, &cams));

    let req = json!({ "pose": poses[0], "width": 32, "height": 24, "fov_deg": 60.0 });
    let (s, img) = post(&st, &format!("{worlds}/{wid}/render"), req.clone()).await;
    assert_eq!(s, StatusCode::OK);
    let b64 = base64::engine::general_purpose::STANDARD;
    let shaded = b64.decode(img["shaded_png"].as_str().unwrap()).unwrap();
    assert_eq!(&shaded[1..4], b"PNG");
    let depth = b64.decode(img["depth"].as_str().unwrap()).unwrap();
    assert_eq!(depth.len(), 12 + 32 * 24 * 4);
    assert_eq!(post(&st, &format!("{worlds}/{wid}/render"), req).await.1, img);

    let (s, _) = post(&st, &format!("{worlds}/{wid}/render"), json!({ "pose": poses[0], "width": 32, "height": 24, "fov_deg": 200.0 })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[test]
fn one_build_at_a_time() {
    let st = store(ServiceConfig::default());
    let s = st.create(1);
    let b = s.start_build(PixelRect::new(0, 0, 64, 64), "pillar".parse().unwrap()).unwrap();
    assert!(matches!(
        s.start_build(PixelRect::new(0, 0, 64, 64), "pillar".parse().unwrap()),
        Err(infinicity_service::ServiceError::Busy)
    ));
    assert!(matches!(s.sample_cameras(&b.id, &serde_json::from_value(json!({"n": 1, "seed": 0})).unwrap()),
        Err(infinicity_service::ServiceError::NotReady(_))));
    s.run_build(&b);
    assert!(s.start_build(PixelRect::new(0, 0, 64, 64), "pillar".parse().unwrap()).is_ok());
}

#[test]
fn cached_tiles_cost_no_jobs() {
    let st = store(ServiceConfig::default());
    let s = st.create(9);
    let rect = PixelRect::new(-20, -20, 100, 100);
    assert_eq!(s.tile(rect).unwrap().jobs, 9);
    assert_eq!(s.tile(rect).unwrap().jobs, 0);
    let reply = s.resample(ResampleRequest { rect: PixelRect::new(200, 200, 8, 8), seed: 1 }, None).unwrap();
    assert!(reply.invalidated.iter().all(|r| !r.intersects(&rect)));
    assert_eq!(s.tile(rect).unwrap().jobs, 0);
}

#[test]
fn concurrent_reads_see_whole_generations() {
    let st = store(ServiceConfig::default());
    let s = st.create(21);
    let rect = PixelRect::new(0, 0, 192, 64);
    let old = s.tile(rect).unwrap().tile;
    let shadow = st.create(21);
    shadow.resample(ResampleRequest { rect: PixelRect::new(64, 0, 64, 64), seed: 2 }, None).unwrap();
    let new = shadow.tile(rect).unwrap().tile;
    assert_ne!(old, new);

    std::thread::scope(|scope| {
        let readers: Vec<_> = (0..4)
            .map(|_| {
                scope.spawn(|| {
                    (0..6)
                        .map(|_| {
                            let f = s.tile(rect).unwrap();
                            (f.generation, f.tile)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        s.resample(ResampleRequest { rect: PixelRect::new(64, 0, 64, 64), seed: 2 }, None).unwrap();
        for r in readers {
            for (generation, tile) in r.join().unwrap() {
                let want = if generation == 0 { &old } else { &new };
                assert!(tile == *want, "torn tile at generation {generation}");
            }
        }
    });
}
