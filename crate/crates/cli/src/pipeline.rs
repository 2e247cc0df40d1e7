use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::ExtendedColorType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use infinicity_core::camsample::{label_walkable, refine_mask, CameraPose, CameraSampler, WalkableMask};
use infinicity_core::latentgrid::{
    sample_field, synthesize_region, GeneratorConfig, PatchGenerator, PixelRect, ProceduralGenerator,
    DEFAULT_CELL_STRIDE, DEFAULT_GLOBAL_DIM, DEFAULT_LOCAL_DIM,
};
use infinicity_core::metrics::world_stats;
use infinicity_core::render::{depth_to_bytes, render_view, Intrinsics, RenderOutput, Style};
use infinicity_core::satmap::{default_clean, encode_tile};
use infinicity_core::voxelworld::{
    assemble_world, clamp_heights, complete, lift_tile, serialize_world, Completion, VoxelWorld, BLOCK_EDGE,
};
use infinicity_core::Palette;

use crate::io::{png, sha256_hex, write};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Map pixels, multiples of 64.
    pub extent: (u32, u32),
    pub origin: (i64, i64),
    pub completion: Completion,
    pub cameras: usize,
    pub camera_seed: u64,
    pub eye_height_m: f64,
    pub min_component_px: usize,
    pub frame_size: (u32, u32),
    pub fov_deg: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl PipelineConfig {
    pub fn new(seed: u64, extent: (u32, u32), out: impl Into<PathBuf>) -> Self {
        Self {
            seed,
            extent,
            origin: (0, 0),
            completion: Completion::Pillar,
            cameras: 4,
            camera_seed: seed,
            eye_height_m: infinicity_core::camsample::DEFAULT_EYE_HEIGHT_M,
            min_component_px: infinicity_core::camsample::DEFAULT_MIN_COMPONENT_PX,
            frame_size: (256, 192),
            fov_deg: 60.0,
            out: out.into(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = BLOCK_EDGE as u32;
        let bad = |m: String| Err(CliError::Config(m));
        if self.extent.0 == 0 || self.extent.1 == 0 || !self.extent.0.is_multiple_of(e) || !self.extent.1.is_multiple_of(e) {
            return bad(format!(
                "extent {}x{} must be a positive multiple of {e} on both axes",
                self.extent.0, self.extent.1
            ));
        }
        if self.origin.0 % e as i64 != 0 || self.origin.1 % e as i64 != 0 {
            return bad(format!("origin {:?} must be a multiple of {e}", self.origin));
        }
        if self.cameras == 0 {
            return bad("at least one camera is required".into());
        }
        if self.frame_size.0 == 0 || self.frame_size.1 == 0 {
            return bad("frame size must be positive".into());
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad(format!("fov {} outside (0, 180)", self.fov_deg));
        }
        if !(self.eye_height_m.is_finite() && self.eye_height_m >= 0.0) {
            return bad(format!("eye height {} must be finite and non-negative", self.eye_height_m));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/` separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    /// Stage name to the parameters it ran with.
    pub stages: BTreeMap<String, serde_json::Value>,
    /// Sorted by path.
    pub artifacts: Vec<Artifact>,
}

impl PipelineManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// Hash of the manifest as written.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

struct Run<'a> {
    out: &'a Path,
    artifacts: BTreeMap<String, Artifact>,
    stages: BTreeMap<String, serde_json::Value>,
}

impl Run<'_> {
    fn emit(&mut self, rel: &str, bytes: &[u8], stage: &'static str) -> Result<(), CliError> {
        write(&self.out.join(rel), bytes, stage)?;
        self.artifacts.insert(
            rel.to_string(),
            Artifact {
                path: rel.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    fn stage<T>(
        &mut self,
        name: &'static str,
        params: serde_json::Value,
        f: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        let r = f(self)?;
        tracing::info!(stage = name, elapsed_ms = start.elapsed().as_millis() as u64, "stage done");
        self.stages.insert(name.to_string(), params);
        Ok(r)
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineManifest, CliError> {
    run_pipeline_with(config, &ProceduralGenerator::new(GeneratorConfig::default()))
}

/// Runs every stage in order with `generator` as the map source and writes
/// the artifacts plus `manifest.json` under `config.out`.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    generator: &dyn PatchGenerator,
) -> Result<PipelineManifest, CliError> {
    config.validate()?;
    let palette = Palette::default_city();
    let mut run = Run {
        out: &config.out,
        artifacts: BTreeMap::new(),
        stages: BTreeMap::new(),
    };
    let rect = PixelRect::new(config.origin.0, config.origin.1, config.extent.0, config.extent.1);

    let mut tile = run.stage(
        "map",
        serde_json::json!({ "rect": rect.to_string(), "patch_size": generator.patch_size(),
            "radius_px": generator.receptive_field().radius_px }),
        |run| {
            let field = sample_field(config.seed, DEFAULT_GLOBAL_DIM, DEFAULT_LOCAL_DIM, DEFAULT_CELL_STRIDE)
                .map_err(|e| CliError::stage("map", e))?;
            let tile = synthesize_region(generator, &field, rect).map_err(|e| CliError::stage("map", e))?;
            run.emit("map.icdn", &encode_tile(&tile, palette.content_hash()), "map")?;
            Ok(tile)
        },
    )?;

    let clamped = run.stage("clean", serde_json::json!({ "schedule": "default" }), |run| {
        tile.height_m = default_clean(&tile.height_m);
        let clamped = clamp_heights(&mut tile);
        if clamped > 0 {
            tracing::warn!(stage = "clean", clamped_px = clamped, "heights clamped to one block");
        }
        run.emit("map_clean.icdn", &encode_tile(&tile, palette.content_hash()), "clean")?;
        Ok(clamped)
    })?;
    run.stages.get_mut("clean").unwrap()["clamped_px"] = clamped.into();

    let e = BLOCK_EDGE;
    let (nbx, nby) = (config.extent.0 as usize / e, config.extent.1 as usize / e);
    let (bx0, by0) = ((config.origin.0 / e as i64) as i32, (config.origin.1 / e as i64) as i32);
    let coords: Vec<(usize, usize)> = (0..nby).flat_map(|j| (0..nbx).map(move |i| (i, j))).collect();

    let surfaces = run.stage("lift", serde_json::json!({ "blocks": coords.len() }), |_| {
        coords
            .par_iter()
            .map(|&(i, j)| lift_tile(&tile.crop(i * e, j * e, e, e), bx0 + i as i32, by0 + j as i32))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::stage("lift", e))
    })?;

    let completed = run.stage("complete", serde_json::json!({ "mode": config.completion }), |_| {
        surfaces
            .par_iter()
            .map(|b| complete(b, config.completion))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::stage("complete", e))
    })?;

    let world = run.stage("assemble", serde_json::json!({}), |run| {
        let world = assemble_world(completed).map_err(|e| CliError::stage("assemble", e))?;
        run.emit("world.iwrl", &serialize_world(&world), "assemble")?;
        Ok(world)
    })?;

    let mask = run.stage(
        "mask",
        serde_json::json!({ "min_component_px": config.min_component_px }),
        |run| {
            let mask = refine_mask(&label_walkable(&tile, &palette, config.origin), config.min_component_px);
            run.emit("mask.png", &mask_png(&mask), "mask")?;
            Ok(mask)
        },
    )?;
    tracing::info!(stage = "mask", walkable_px = mask.count(), "mask refined");

    let poses = run.stage(
        "cameras",
        serde_json::json!({ "n": config.cameras, "seed": config.camera_seed, "eye_height_m": config.eye_height_m }),
        |run| {
            let poses = sample_poses(&mask, &world, config.cameras, config.camera_seed, config.eye_height_m)?;
            run.emit("poses.jsonl", poses_jsonl(&poses).as_bytes(), "cameras")?;
            Ok(poses)
        },
    )?;

    let intr = Intrinsics {
        width: config.frame_size.0,
        height: config.frame_size.1,
        fov_deg: config.fov_deg,
    };
    run.stage("render", serde_json::to_value(intr).unwrap(), |run| {
        for (k, pose) in poses.iter().enumerate() {
            let frame = render_view(&world, pose, intr, &Style::default()).map_err(|e| CliError::stage("render", e))?;
            for (name, bytes) in frame_files(&frame) {
                run.emit(&format!("frames/frame_{k:04}_{name}"), &bytes, "render")?;
            }
        }
        Ok(())
    })?;

    run.stage("stats", serde_json::json!({}), |run| {
        let stats = serde_json::to_string_pretty(&world_stats(&world)).unwrap() + "\n";
        run.emit("stats.json", stats.as_bytes(), "stats")
    })?;

    let manifest = PipelineManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        stages: run.stages,
        artifacts: run.artifacts.into_values().collect(),
    };
    write(&config.out.join("manifest.json"), manifest.to_json().as_bytes(), "manifest")?;
    tracing::info!(manifest = %manifest.digest(), artifacts = manifest.artifacts.len(), "pipeline done");
    Ok(manifest)
}

/// Fails with a no-valid-pose error when the mask is empty or exhausted.
pub fn sample_poses(
    mask: &WalkableMask,
    world: &VoxelWorld,
    n: usize,
    seed: u64,
    eye_height_m: f64,
) -> Result<Vec<CameraPose>, CliError> {
    let mut sampler = CameraSampler::new(seed, eye_height_m);
    (0..n)
        .map(|_| {
            sampler
                .sample(mask, world)
                .map_err(|e| CliError::stage("cameras", format!("no valid pose: {e}")))
        })
        .collect()
}

pub fn poses_jsonl(poses: &[CameraPose]) -> String {
    poses
        .iter()
        .map(|p| serde_json::to_string(p).unwrap() + "\n")
        .collect()
}

pub fn mask_png(mask: &WalkableMask) -> Vec<u8> {
    let px: Vec<u8> = mask.mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
    png(&px, mask.mask.width() as u32, mask.mask.height() as u32, ExtendedColorType::L8)
}

/// `semantic.png` (class ids, 8-bit gray), `depth.idep`, `shaded.png` (RGB8).
pub fn frame_files(frame: &RenderOutput) -> [(&'static str, Vec<u8>); 3] {
    [
        ("semantic.png", png(&frame.semantic, frame.width, frame.height, ExtendedColorType::L8)),
        ("depth.idep", depth_to_bytes(frame)),
        ("shaded.png", png(&frame.shaded_rgb8(), frame.width, frame.height, ExtendedColorType::Rgb8)),
    ]
}
