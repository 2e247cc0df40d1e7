use std::collections::BTreeSet;

use super::field::{gaussian_vector, TAG_RESAMPLE};
use super::{
    CellCoord, JobQueue, LatentField, LatentGridError, PatchGenerator, PixelRect, ReceptiveField,
};
use crate::hash::hash_words;
use crate::satmap::CdnTile;

/// Pixel-space center of cell `(i, j)`.
pub fn cell_center((i, j): CellCoord, stride: u32) -> (f64, f64) {
    let s = stride as f64;
    (i as f64 * s + s / 2.0, j as f64 * s + s / 2.0)
}

/// Every cell whose influence disc (center dilated by `radius_px`, closed)
/// touches `rect`. This is the smallest cell set that can contribute to any
/// pixel of `rect`.
pub fn calibrate_region(rect: PixelRect, rf: ReceptiveField, stride: u32) -> BTreeSet<CellCoord> {
    let mut out = BTreeSet::new();
    if rect.is_empty() || stride == 0 {
        return out;
    }
    let s = stride as f64;
    let r = rf.radius_px as f64;
    let (x0, x1) = (rect.x as f64, (rect.x_end() - 1) as f64);
    let (y0, y1) = (rect.y as f64, (rect.y_end() - 1) as f64);
    let i_lo = ((x0 - r - s / 2.0) / s).floor() as i64;
    let i_hi = ((x1 + r - s / 2.0) / s).ceil() as i64;
    let j_lo = ((y0 - r - s / 2.0) / s).floor() as i64;
    let j_hi = ((y1 + r - s / 2.0) / s).ceil() as i64;
    for j in j_lo..=j_hi {
        for i in i_lo..=i_hi {
            let (cx, cy) = cell_center((i, j), stride);
            let dx = (x0 - cx).max(0.0).max(cx - x1);
            let dy = (y0 - cy).max(0.0).max(cy - y1);
            if dx * dx + dy * dy <= r * r {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Native patches (aligned to multiples of `patch`) that overlap `rect`.
pub fn patches_overlapping(rect: PixelRect, patch: u32) -> Vec<PixelRect> {
    if rect.is_empty() {
        return Vec::new();
    }
    let p = patch as i64;
    let (px0, px1) = (rect.x.div_euclid(p), (rect.x_end() - 1).div_euclid(p));
    let (py0, py1) = (rect.y.div_euclid(p), (rect.y_end() - 1).div_euclid(p));
    (py0..=py1)
        .flat_map(|py| (px0..=px1).map(move |px| PixelRect::new(px * p, py * p, patch, patch)))
        .collect()
}

pub fn synthesize_region(
    generator: &dyn PatchGenerator,
    field: &LatentField,
    rect: PixelRect,
) -> Result<CdnTile, LatentGridError> {
    synthesize_region_batched(generator, field, rect, 8).map(|(tile, _)| tile)
}

/// Tiles `rect` into native patches, pushes them through a [`JobQueue`],
/// flushes in batches of `batch_size` and stitches the crop. Returns the tile
/// and the number of jobs executed.
pub fn synthesize_region_batched(
    generator: &dyn PatchGenerator,
    field: &LatentField,
    rect: PixelRect,
    batch_size: usize,
) -> Result<(CdnTile, usize), LatentGridError> {
    if rect.is_empty() {
        return Err(LatentGridError::EmptyRect);
    }
    let patch = generator.patch_size();
    if !patch.is_multiple_of(field.cell_stride()) {
        return Err(LatentGridError::StrideMismatch {
            stride: field.cell_stride(),
            patch,
        });
    }
    let patches = patches_overlapping(rect, patch);
    let queue = JobQueue::new(patch);
    for p in &patches {
        queue.enqueue(*p)?;
    }
    let report = queue.flush(generator, field, batch_size)?;

    let mut out = CdnTile::void(rect.w as usize, rect.h as usize);
    for job in &report.completed {
        let p = job.patch_rect;
        // overlap of the patch with the requested rect
        let ox0 = p.x.max(rect.x);
        let oy0 = p.y.max(rect.y);
        let ox1 = p.x_end().min(rect.x_end());
        let oy1 = p.y_end().min(rect.y_end());
        let piece = job.tile.crop(
            (ox0 - p.x) as usize,
            (oy0 - p.y) as usize,
            (ox1 - ox0) as usize,
            (oy1 - oy0) as usize,
        );
        out.blit(&piece, (ox0 - rect.x) as usize, (oy0 - rect.y) as usize);
    }
    Ok((out, report.completed.len()))
}

/// What a resample changed.
#[derive(Clone, Debug, PartialEq)]
pub struct ResampleOutcome {
    /// Cells that received fresh latents, sorted.
    pub cells: Vec<CellCoord>,
    /// Pixels that may differ afterwards: `rect` dilated by the radius.
    pub footprint: PixelRect,
}

/// Redraws the latents anchored inside `rect`.
///
/// Of the calibrated cells, those whose centers fall inside the closed rect
/// are replaced with vectors keyed by `(seed, i, j)`. Because a cell reaches
/// at most `radius_px`, no pixel farther than that from `rect` changes;
/// cells sitting on the edge of the selection still bleed into its border.
pub fn resample_region_in_place(
    field: &mut LatentField,
    rect: PixelRect,
    rf: ReceptiveField,
    seed: u64,
) -> Result<ResampleOutcome, LatentGridError> {
    if rect.is_empty() {
        return Err(LatentGridError::EmptyRect);
    }
    let stride = field.cell_stride();
    let (x0, x1) = (rect.x as f64, (rect.x_end() - 1) as f64);
    let (y0, y1) = (rect.y as f64, (rect.y_end() - 1) as f64);
    let cells: Vec<CellCoord> = calibrate_region(rect, rf, stride)
        .into_iter()
        .filter(|&c| {
            let (cx, cy) = cell_center(c, stride);
            (x0..=x1).contains(&cx) && (y0..=y1).contains(&cy)
        })
        .collect();
    for &(i, j) in &cells {
        let v = gaussian_vector(
            hash_words(&[seed, TAG_RESAMPLE, i as u64, j as u64]),
            field.local_dim(),
        );
        field.set_cell((i, j), v);
    }
    Ok(ResampleOutcome {
        cells,
        footprint: rect.dilate(rf.radius_px),
    })
}

pub fn resample_region(
    field: &LatentField,
    rect: PixelRect,
    rf: ReceptiveField,
    seed: u64,
) -> Result<LatentField, LatentGridError> {
    let mut out = field.clone();
    resample_region_in_place(&mut out, rect, rf, seed)?;
    Ok(out)
}
