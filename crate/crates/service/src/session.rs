use std::collections::{BTreeMap, HashMap};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};

use infinicity_core::camsample::{label_walkable, refine_mask, CameraPose, CameraSampler};
use infinicity_core::latentgrid::{
    patches_overlapping, resample_region_in_place, sample_field, JobQueue, LatentField,
    PatchGenerator, PixelRect, DEFAULT_CELL_STRIDE, DEFAULT_GLOBAL_DIM, DEFAULT_LOCAL_DIM,
};
use infinicity_core::render::{render_view, Intrinsics, RenderOutput, Style};
use infinicity_core::satmap::{default_clean, CdnTile};
use infinicity_core::voxelworld::{build_world, clamp_heights, Completion, VoxelWorld, BLOCK_EDGE};
use infinicity_core::Palette;

use crate::ServiceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    /// Cached native patches per session.
    pub patch_cache: usize,
    pub batch_size: usize,
    pub max_tile_px: u64,
    pub max_world_px: u64,
    pub max_render_px: u64,
    pub max_cameras: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_sessions: 64,
            patch_cache: 1024,
            batch_size: 8,
            max_tile_px: 2048 * 2048,
            max_world_px: 512 * 512,
            max_render_px: 1024 * 1024,
            max_cameras: 10_000,
        }
    }
}

/// Sessions keyed by id, least recently used dropped first.
pub struct SessionStore {
    config: Arc<ServiceConfig>,
    generator: Arc<dyn PatchGenerator>,
    sessions: Mutex<LruCache<String, Arc<Session>>>,
    counter: AtomicU64,
}

impl SessionStore {
    pub fn new(config: ServiceConfig, generator: Arc<dyn PatchGenerator>) -> Self {
        let cap = NonZeroUsize::new(config.max_sessions.max(1)).unwrap();
        Self {
            config: Arc::new(config),
            generator,
            sessions: Mutex::new(LruCache::new(cap)),
            counter: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn create(&self, seed: u64) -> Arc<Session> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{n:06x}");
        let field = sample_field(seed, DEFAULT_GLOBAL_DIM, DEFAULT_LOCAL_DIM, DEFAULT_CELL_STRIDE)
            .expect("default dimensions are positive");
        let cap = NonZeroUsize::new(self.config.patch_cache.max(1)).unwrap();
        let session = Arc::new(Session {
            id: id.clone(),
            seed,
            generator: self.generator.clone(),
            config: self.config.clone(),
            state: Mutex::new(State {
                field: Arc::new(field),
                generation: 0,
                patches: LruCache::new(cap),
                resamples: HashMap::new(),
                worlds: BTreeMap::new(),
                next_world: 0,
                building: false,
            }),
        });
        if let Some((old, _)) = self.sessions.lock().unwrap().push(id, session.clone()) {
            tracing::info!(session = %old, "evicted least recently used session");
        }
        session
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct State {
    field: Arc<LatentField>,
    /// Bumped by every resample.
    generation: u64,
    patches: LruCache<(i64, i64), Arc<CdnTile>>,
    resamples: HashMap<String, (ResampleRequest, ResampleReply)>,
    worlds: BTreeMap<String, Arc<WorldBuild>>,
    next_world: u64,
    building: bool,
}

pub struct Session {
    pub id: String,
    pub seed: u64,
    generator: Arc<dyn PatchGenerator>,
    config: Arc<ServiceConfig>,
    state: Mutex<State>,
}

/// A stitched tile and how it was produced.
#[derive(Clone, Debug)]
pub struct TileFetch {
    pub tile: CdnTile,
    /// Field generation the tile reflects.
    pub generation: u64,
    /// Patches generated for this request; zero when fully cached.
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleRequest {
    pub rect: PixelRect,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleReply {
    /// Native patch rects whose content may have changed.
    pub invalidated: Vec<PixelRect>,
    /// Pixels that may have changed.
    pub footprint: PixelRect,
    pub cells: usize,
    pub generation: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildStatus {
    Running,
    Done,
    Failed,
}

pub struct WorldBuild {
    pub id: String,
    pub rect: PixelRect,
    pub completion: Completion,
    pub total: usize,
    done: AtomicUsize,
    outcome: Mutex<Option<Result<BuiltWorld, String>>>,
}

#[derive(Clone)]
pub struct BuiltWorld {
    pub world: Arc<VoxelWorld>,
    pub tile: Arc<CdnTile>,
    pub clamped_px: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildProgress {
    pub id: String,
    pub status: BuildStatus,
    pub done: usize,
    pub total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupied: Option<usize>,
}

impl WorldBuild {
    pub fn progress(&self) -> BuildProgress {
        let outcome = self.outcome.lock().unwrap();
        let (status, error, occupied) = match &*outcome {
            None => (BuildStatus::Running, None, None),
            Some(Ok(b)) => (BuildStatus::Done, None, Some(b.world.occupied_count())),
            Some(Err(e)) => (BuildStatus::Failed, Some(e.clone()), None),
        };
        BuildProgress {
            id: self.id.clone(),
            status,
            done: self.done.load(Ordering::Relaxed),
            total: self.total,
            error,
            occupied,
        }
    }

    pub fn result(&self) -> Result<BuiltWorld, ServiceError> {
        match &*self.outcome.lock().unwrap() {
            Some(Ok(b)) => Ok(b.clone()),
            Some(Err(e)) => Err(ServiceError::Stage {
                stage: "world build",
                cause: e.clone(),
            }),
            None => Err(ServiceError::NotReady(self.id.clone())),
        }
    }
}

fn nonempty(rect: PixelRect) -> Result<PixelRect, ServiceError> {
    if rect.is_empty() {
        return Err(ServiceError::Degenerate(format!("rect {rect} has no area")));
    }
    Ok(rect)
}

impl Session {
    pub fn patch_size(&self) -> u32 {
        self.generator.patch_size()
    }

    pub fn generation(&self) -> u64 {
        self.state.lock().unwrap().generation
    }

    pub fn cached_patches(&self) -> usize {
        self.state.lock().unwrap().patches.len()
    }

    pub fn field_snapshot(&self) -> Arc<LatentField> {
        self.state.lock().unwrap().field.clone()
    }

    /// Stitches `rect` from cached patches, generating the missing ones
    /// against one field snapshot so a concurrent resample never yields a
    /// mix of old and new content.
    pub fn tile(&self, rect: PixelRect) -> Result<TileFetch, ServiceError> {
        let rect = nonempty(rect)?;
        if rect.area() > self.config.max_tile_px {
            return Err(ServiceError::TooLarge {
                what: "tile",
                got: rect.area(),
                limit: self.config.max_tile_px,
            });
        }
        let p = self.patch_size();
        let wanted = patches_overlapping(rect, p);
        let (field, generation, mut have) = {
            let mut st = self.state.lock().unwrap();
            let have: HashMap<(i64, i64), Arc<CdnTile>> = wanted
                .iter()
                .filter_map(|r| st.patches.get(&(r.x, r.y)).map(|t| ((r.x, r.y), t.clone())))
                .collect();
            (st.field.clone(), st.generation, have)
        };
        let missing: Vec<PixelRect> = wanted
            .iter()
            .filter(|r| !have.contains_key(&(r.x, r.y)))
            .copied()
            .collect();
        if !missing.is_empty() {
            let queue = JobQueue::new(p);
            for r in &missing {
                queue.enqueue(*r).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            }
            let report = queue
                .flush(self.generator.as_ref(), &field, self.config.batch_size)
                .map_err(|e| ServiceError::Stage {
                    stage: "synthesis",
                    cause: e.to_string(),
                })?;
            let fresh: Vec<_> = report
                .completed
                .into_iter()
                .map(|j| ((j.patch_rect.x, j.patch_rect.y), Arc::new(j.tile)))
                .collect();
            let mut st = self.state.lock().unwrap();
            if st.generation == generation {
                for (k, t) in &fresh {
                    st.patches.put(*k, t.clone());
                }
            }
            drop(st);
            have.extend(fresh);
        }
        let mut out = CdnTile::void(rect.w as usize, rect.h as usize);
        for r in &wanted {
            let t = &have[&(r.x, r.y)];
            let (x0, y0) = (r.x.max(rect.x), r.y.max(rect.y));
            let (x1, y1) = (r.x_end().min(rect.x_end()), r.y_end().min(rect.y_end()));
            let piece = t.crop(
                (x0 - r.x) as usize,
                (y0 - r.y) as usize,
                (x1 - x0) as usize,
                (y1 - y0) as usize,
            );
            out.blit(&piece, (x0 - rect.x) as usize, (y0 - rect.y) as usize);
        }
        Ok(TileFetch {
            tile: out,
            generation,
            jobs: missing.len(),
        })
    }

    /// Redraws the latents anchored in `req.rect` and drops every cached
    /// patch the change can reach. Replaying an idempotency key returns the
    /// original reply without resampling again.
    pub fn resample(
        &self,
        req: ResampleRequest,
        key: Option<&str>,
    ) -> Result<ResampleReply, ServiceError> {
        nonempty(req.rect)?;
        let mut st = self.state.lock().unwrap();
        if let Some(k) = key {
            if let Some((prev, reply)) = st.resamples.get(k) {
                return if *prev == req {
                    Ok(reply.clone())
                } else {
                    Err(ServiceError::KeyReuse(k.to_string()))
                };
            }
        }
        let mut field = (*st.field).clone();
        let outcome = resample_region_in_place(
            &mut field,
            req.rect,
            self.generator.receptive_field(),
            req.seed,
        )
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        st.field = Arc::new(field);
        st.generation += 1;
        let invalidated = patches_overlapping(outcome.footprint, self.patch_size());
        for r in &invalidated {
            st.patches.pop(&(r.x, r.y));
        }
        let reply = ResampleReply {
            invalidated,
            footprint: outcome.footprint,
            cells: outcome.cells.len(),
            generation: st.generation,
        };
        if let Some(k) = key {
            st.resamples.insert(k.to_string(), (req, reply.clone()));
        }
        tracing::info!(
            session = %self.id,
            rect = %reply.footprint,
            patches = reply.invalidated.len(),
            "resampled"
        );
        Ok(reply)
    }

    /// Registers a world build; run it with [`Session::run_build`].
    pub fn start_build(&self, rect: PixelRect, completion: Completion) -> Result<Arc<WorldBuild>, ServiceError> {
        let rect = nonempty(rect)?;
        let e = BLOCK_EDGE as i64;
        if rect.x % e != 0 || rect.y % e != 0 || rect.w as i64 % e != 0 || rect.h as i64 % e != 0 {
            return Err(ServiceError::BadRequest(format!(
                "world rect {rect} must be aligned to {BLOCK_EDGE}-pixel blocks"
            )));
        }
        if rect.area() > self.config.max_world_px {
            return Err(ServiceError::TooLarge {
                what: "world",
                got: rect.area(),
                limit: self.config.max_world_px,
            });
        }
        let mut st = self.state.lock().unwrap();
        if st.building {
            return Err(ServiceError::Busy);
        }
        st.building = true;
        let id = format!("w{}", st.next_world);
        st.next_world += 1;
        let blocks = (rect.w as usize / BLOCK_EDGE) * (rect.h as usize / BLOCK_EDGE);
        let build = Arc::new(WorldBuild {
            id: id.clone(),
            rect,
            completion,
            total: blocks + 1,
            done: AtomicUsize::new(0),
            outcome: Mutex::new(None),
        });
        st.worlds.insert(id, build.clone());
        Ok(build)
    }

    /// Synthesizes, cleans, lifts, completes and assembles. Blocking.
    pub fn run_build(&self, build: &WorldBuild) {
        let result = (|| {
            let mut tile = self.tile(build.rect).map_err(|e| e.to_string())?.tile;
            build.done.fetch_add(1, Ordering::Relaxed);
            tile.height_m = default_clean(&tile.height_m);
            let clamped_px = clamp_heights(&mut tile);
            if clamped_px > 0 {
                tracing::warn!(world = %build.id, clamped_px, "heights clamped to one block");
            }
            let e = BLOCK_EDGE as i64;
            let origin = ((build.rect.x / e) as i32, (build.rect.y / e) as i32);
            let world = build_world(&tile, origin, build.completion, &|| {
                build.done.fetch_add(1, Ordering::Relaxed);
            })
            .map_err(|e| e.to_string())?;
            Ok(BuiltWorld {
                world: Arc::new(world),
                tile: Arc::new(tile),
                clamped_px,
            })
        })();
        *build.outcome.lock().unwrap() = Some(result);
        self.state.lock().unwrap().building = false;
    }

    pub fn world(&self, id: &str) -> Result<Arc<WorldBuild>, ServiceError> {
        self.state
            .lock()
            .unwrap()
            .worlds
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownWorld(id.to_string()))
    }

    pub fn worlds(&self) -> Vec<BuildProgress> {
        let worlds: Vec<_> = self.state.lock().unwrap().worlds.values().cloned().collect();
        worlds.iter().map(|w| w.progress()).collect()
    }

    pub fn sample_cameras(
        &self,
        world_id: &str,
        req: &CameraRequest,
    ) -> Result<Vec<CameraPose>, ServiceError> {
        if req.n > self.config.max_cameras {
            return Err(ServiceError::TooLarge {
                what: "camera batch",
                got: req.n as u64,
                limit: self.config.max_cameras as u64,
            });
        }
        let built = self.world(world_id)?.result()?;
        let build = self.world(world_id)?;
        let mask = label_walkable(&built.tile, &Palette::default_city(), (build.rect.x, build.rect.y));
        let mask = refine_mask(&mask, req.min_component_px);
        let mut sampler = CameraSampler::new(req.seed, req.eye_height_m);
        (0..req.n)
            .map(|_| {
                sampler.sample(&mask, &built.world).map_err(|e| ServiceError::Stage {
                    stage: "camera sampling",
                    cause: e.to_string(),
                })
            })
            .collect()
    }

    pub fn render(
        &self,
        world_id: &str,
        pose: &CameraPose,
        intr: Intrinsics,
    ) -> Result<RenderOutput, ServiceError> {
        let px = intr.width as u64 * intr.height as u64;
        if px > self.config.max_render_px {
            return Err(ServiceError::TooLarge {
                what: "render",
                got: px,
                limit: self.config.max_render_px,
            });
        }
        let built = self.world(world_id)?.result()?;
        render_view(&built.world, pose, intr, &Style::default())
            .map_err(|e| ServiceError::BadRequest(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRequest {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_eye")]
    pub eye_height_m: f64,
    #[serde(default = "default_min_component")]
    pub min_component_px: usize,
}

fn default_eye() -> f64 {
    infinicity_core::camsample::DEFAULT_EYE_HEIGHT_M
}

fn default_min_component() -> usize {
    infinicity_core::camsample::DEFAULT_MIN_COMPONENT_PX
}
