use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use infinicity_core::camsample::{label_walkable, refine_mask, CameraPose, WalkableMask};
use infinicity_core::ingest::{sample_surface, topdown_scan, voxelize_all, LabeledMesh};
use infinicity_core::latentgrid::{
    patches_overlapping, resample_region_in_place, sample_field, synthesize_region, GeneratorConfig,
    LatentField, PatchGenerator, ProceduralGenerator, DEFAULT_CELL_STRIDE, DEFAULT_GLOBAL_DIM,
    DEFAULT_LOCAL_DIM,
};
use infinicity_core::metrics::world_stats;
use infinicity_core::render::{render_view, Intrinsics, Style};
use infinicity_core::satmap::{decode_tile, default_clean, encode_tile, Raster};
use infinicity_core::voxelworld::{
    assemble_world, build_world, clamp_heights, deserialize_world, serialize_block, serialize_world,
    to_point_cloud, VoxelWorld, BLOCK_EDGE,
};
use infinicity_core::{CdnTile, Palette};
use infinicity_service::ServiceConfig;

use crate::cli::*;
use crate::io::{read, write};
use crate::pipeline::{frame_files, mask_png, poses_jsonl, run_pipeline, sample_poses, PipelineConfig};
use crate::CliError;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Map(MapCommand::Synth(a)) => map_synth(a),
        Command::Map(MapCommand::Resample(a)) => map_resample(a),
        Command::Ingest(a) => ingest(a),
        Command::World(WorldCommand::Build(a)) => world_build(a),
        Command::World(WorldCommand::ExportPoints(a)) => export_points(a),
        Command::Camera(CameraCommand::Mask(a)) => camera_mask(a),
        Command::Camera(CameraCommand::Sample(a)) => camera_sample(a),
        Command::Render(a) => render(a),
        Command::Stats(a) => stats(a),
        Command::Pipeline(PipelineCommand::Run(a)) => pipeline(a),
        Command::Serve(a) => serve(a),
    }
}

fn generator() -> ProceduralGenerator {
    ProceduralGenerator::new(GeneratorConfig::default())
}

fn load_field(path: &Path) -> Result<LatentField, CliError> {
    LatentField::from_bytes(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_world(path: &Path) -> Result<VoxelWorld, CliError> {
    deserialize_world(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn map_synth(a: SynthArgs) -> Result<(), CliError> {
    let field = match &a.field {
        Some(p) => load_field(p)?,
        None => sample_field(a.seed, DEFAULT_GLOBAL_DIM, DEFAULT_LOCAL_DIM, DEFAULT_CELL_STRIDE)
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    let mut tile = synthesize_region(&generator(), &field, a.rect).map_err(|e| CliError::stage("map", e))?;
    if a.clean {
        tile.height_m = default_clean(&tile.height_m);
    }
    write(&a.out, &encode_tile(&tile, Palette::default_city().content_hash()), "map")?;
    if let Some(p) = &a.save_field {
        write(p, &field.to_bytes(), "map")?;
    }
    tracing::info!(rect = %a.rect, seed = field.seed(), out = %a.out.display(), "map synthesized");
    Ok(())
}

/// Prints the redrawn cells, footprint and invalidated native patches as JSON.
fn map_resample(a: ResampleArgs) -> Result<(), CliError> {
    let mut field = load_field(&a.field)?;
    let g = generator();
    let outcome = resample_region_in_place(&mut field, a.rect, g.receptive_field(), a.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let out = a.out.as_ref().unwrap_or(&a.field);
    write(out, &field.to_bytes(), "resample")?;
    let reply = serde_json::json!({
        "cells": outcome.cells,
        "footprint": outcome.footprint,
        "invalidated": patches_overlapping(outcome.footprint, g.patch_size()),
    });
    println!("{reply}");
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let text = String::from_utf8(read(&a.mesh)?)
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", a.mesh.display())))?;
    let mesh = LabeledMesh::from_tmesh(&text).map_err(|e| CliError::stage("ingest", e))?;
    let points = sample_surface(&mesh, a.voxel_size).map_err(|e| CliError::stage("ingest", e))?;
    let blocks = voxelize_all(&points);
    let hash = Palette::default_city().content_hash();
    for b in &blocks {
        let name = format!("{}_{}", b.bx, b.by);
        write(&a.out.join(format!("block_{name}.ioct")), &serialize_block(b), "ingest")?;
        write(&a.out.join(format!("tile_{name}.icdn")), &encode_tile(&topdown_scan(b), hash), "ingest")?;
    }
    tracing::info!(points = points.len(), blocks = blocks.len(), out = %a.out.display(), "mesh ingested");
    Ok(())
}

/// Block origin from a `<name>_<bx>_<by>` stem.
fn tile_origin(path: &Path) -> (i32, i32) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut parts = stem.rsplitn(3, '_');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(by), Some(bx), Some(_)) => match (bx.parse(), by.parse()) {
            (Ok(bx), Ok(by)) => (bx, by),
            _ => (0, 0),
        },
        _ => (0, 0),
    }
}

fn world_build(a: BuildArgs) -> Result<(), CliError> {
    let entries = std::fs::read_dir(&a.tiles)
        .map_err(|e| CliError::Config(format!("cannot list {}: {e}", a.tiles.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "icdn"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("no .icdn tiles in {}", a.tiles.display())));
    }
    let mut blocks = Vec::new();
    for p in &paths {
        let (mut tile, _) = decode_tile(&read(p)?).map_err(|e| CliError::stage("lift", format!("{}: {e}", p.display())))?;
        let clamped = clamp_heights(&mut tile);
        if clamped > 0 {
            tracing::warn!(tile = %p.display(), clamped_px = clamped, "heights clamped to one block");
        }
        let world = build_world(&tile, tile_origin(p), a.completion, &|| {})
            .map_err(|e| CliError::stage("complete", format!("{}: {e}", p.display())))?;
        blocks.extend(world.blocks().cloned());
    }
    let world = assemble_world(blocks).map_err(|e| CliError::stage("assemble", e))?;
    write(&a.out, &serialize_world(&world), "assemble")?;
    tracing::info!(tiles = paths.len(), blocks = world.block_count(), voxels = world.occupied_count(), "world built");
    Ok(())
}

fn export_points(a: ExportArgs) -> Result<(), CliError> {
    let world = load_world(&a.world)?;
    let text: String = to_point_cloud(&world)
        .iter()
        .map(|[x, y, z]| format!("{x} {y} {z}\n"))
        .collect();
    write(&a.out, text.as_bytes(), "export")
}

/// Stitches the top-down scan of every block into one tile.
fn world_tile(world: &VoxelWorld) -> Result<(CdnTile, (i64, i64)), CliError> {
    let (bx0, by0, bx1, by1) = world
        .block_extent()
        .ok_or_else(|| CliError::stage("mask", "world has no blocks"))?;
    let e = BLOCK_EDGE;
    let (w, h) = ((bx1 - bx0 + 1) as usize * e, (by1 - by0 + 1) as usize * e);
    let mut tile = CdnTile::void(w, h);
    for b in world.blocks() {
        tile.blit(&topdown_scan(b), (b.bx - bx0) as usize * e, (b.by - by0) as usize * e);
    }
    Ok((tile, (bx0 as i64 * e as i64, by0 as i64 * e as i64)))
}

fn camera_mask(a: MaskArgs) -> Result<(), CliError> {
    let world = load_world(&a.world)?;
    let (tile, origin) = world_tile(&world)?;
    let mask = refine_mask(&label_walkable(&tile, &Palette::default_city(), origin), a.min_component_px);
    tracing::info!(walkable_px = mask.count(), origin = ?origin, "mask refined");
    write(&a.out, &mask_png(&mask), "mask")
}

fn camera_sample(a: SampleArgs) -> Result<(), CliError> {
    let world = load_world(&a.world)?;
    let img = image::load_from_memory_with_format(&read(&a.mask)?, image::ImageFormat::Png)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.mask.display())))?
        .to_luma8();
    let origin = match a.mask_origin {
        Some(o) => o,
        None => world_tile(&world)?.1,
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mask = WalkableMask {
        origin,
        mask: Raster::from_fn(w, h, |x, y| img.get_pixel(x as u32, y as u32).0[0] != 0),
        steps: Vec::new(),
    };
    let poses = sample_poses(&mask, &world, a.n, a.seed, a.eye_height_m)?;
    write(&a.out, poses_jsonl(&poses).as_bytes(), "cameras")
}

fn read_poses(path: &Path) -> Result<Vec<CameraPose>, CliError> {
    let text = String::from_utf8(read(path)?)
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let world = load_world(&a.world)?;
    let poses = read_poses(&a.poses)?;
    let intr = Intrinsics {
        width: a.size.0,
        height: a.size.1,
        fov_deg: a.fov,
    };
    for (k, pose) in poses.iter().enumerate() {
        let frame = render_view(&world, pose, intr, &Style::default()).map_err(|e| CliError::stage("render", e))?;
        for (name, bytes) in frame_files(&frame) {
            write(&a.out.join(format!("frame_{k:04}_{name}")), &bytes, "render")?;
        }
    }
    tracing::info!(frames = poses.len(), out = %a.out.display(), "frames rendered");
    Ok(())
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let world = load_world(&a.world)?;
    let text = serde_json::to_string_pretty(&world_stats(&world)).unwrap() + "\n";
    write(&a.out, text.as_bytes(), "stats")
}

fn pipeline(a: PipelineArgs) -> Result<(), CliError> {
    let config = PipelineConfig {
        seed: a.seed,
        extent: a.extent,
        origin: a.origin,
        completion: a.completion,
        cameras: a.cameras,
        camera_seed: a.camera_seed.unwrap_or(a.seed),
        eye_height_m: a.eye_height_m,
        min_component_px: a.min_component_px,
        frame_size: a.size,
        fov_deg: a.fov,
        out: a.out,
    };
    let manifest = run_pipeline(&config)?;
    let summary: BTreeMap<&str, String> = [
        ("manifest", config.out.join("manifest.json").display().to_string()),
        ("digest", manifest.digest()),
    ]
    .into();
    println!("{}", serde_json::to_string(&summary).unwrap());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let config = ServiceConfig {
        max_sessions: a.max_sessions,
        patch_cache: a.patch_cache,
        max_world_px: a.max_world_px,
        max_tile_px: a.max_tile_px,
        max_render_px: a.max_render_px,
        ..ServiceConfig::default()
    };
    let generator: Arc<dyn PatchGenerator> = Arc::new(generator());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::stage("serve", e))?;
    rt.block_on(infinicity_service::serve(a.addr, config, generator))
        .map_err(|e| CliError::stage("serve", e))
}
