use rayon::prelude::*;

use super::{calibrate_region, cell_center, LatentField, PixelRect, ReceptiveField};
use crate::hash::{hash_words, unit_f64};
use crate::satmap::{classes, canonical_normal, CdnTile, ClassId, Palette, Raster, UP};

/// Contract for anything that turns a latent field into CDN patches.
///
/// Implementations must be spatially independent: the output at a pixel may
/// depend only on the global latent and on cells whose centers lie strictly
/// within `receptive_field().radius_px` of it. Generation must be a pure
/// function so patches can be produced in any order or batch grouping.
pub trait PatchGenerator: Send + Sync {
    fn patch_size(&self) -> u32;

    fn receptive_field(&self) -> ReceptiveField;

    /// Generates the tile for an arbitrary rectangle.
    fn generate(&self, field: &LatentField, rect: PixelRect) -> CdnTile;

    /// Generates a stack of patches; the default runs them in parallel.
    fn generate_batch(&self, field: &LatentField, rects: &[PixelRect]) -> Vec<CdnTile> {
        rects.par_iter().map(|r| self.generate(field, *r)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub patch_size: u32,
    pub receptive_field: ReceptiveField,
    /// Street grid period and width in pixels.
    pub street_period: i64,
    pub street_width: i64,
    /// Softmax temperature of the continuous category color.
    pub color_temperature: f64,
    /// Per-pixel probability of a depth artifact on ground classes.
    pub artifact_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            patch_size: super::DEFAULT_PATCH_SIZE,
            receptive_field: ReceptiveField::new(super::DEFAULT_RADIUS_PX),
            street_period: 96,
            street_width: 12,
            color_temperature: 0.2,
            artifact_rate: 0.002,
        }
    }
}

/// Number of scalar features projected from the mixed local latent.
const FEATURES: usize = 12;
const STYLES: usize = 3;
/// Fixed key for the generator's own "weights" (projections, noise).
const WEIGHT_KEY: u64 = 0x1C17_C0DE;

/// Procedural stand-in for a trained infinite-pixel generator.
///
/// Local latents are blended with a compactly supported kernel
/// `(1 - r²/R²)²`, projected to a handful of features and decoded into a
/// street grid, land-use classes, heights and normals. The category channel
/// is produced as a continuous color and decoded to the nearest palette
/// entry.
#[derive(Clone, Debug)]
pub struct ProceduralGenerator {
    config: GeneratorConfig,
    palette: Palette,
    decode_palette: Palette,
}

/// Candidate land-use classes scored per pixel (streets are handled apart).
const LAND_USE: [ClassId; 6] = [
    classes::WATER,
    classes::GREENSPACE,
    classes::TERRAIN,
    classes::BUILDING,
    classes::PLAZA,
    classes::TREE,
];

struct PatchContext<'a> {
    field: &'a LatentField,
    i0: i64,
    j0: i64,
    ni: usize,
    nj: usize,
    latents: Vec<f32>,
    projection: Vec<f64>,
    style: [f64; STYLES],
}

impl ProceduralGenerator {
    pub fn new(config: GeneratorConfig) -> Self {
        Self::with_palette(config, Palette::default_city())
    }

    pub fn with_palette(config: GeneratorConfig, palette: Palette) -> Self {
        let decode_palette = palette.subset(&classes::SYNTHESIZABLE);
        Self {
            config,
            palette,
            decode_palette,
        }
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    fn context<'a>(&self, field: &'a LatentField, rect: PixelRect) -> PatchContext<'a> {
        let d = field.local_dim();
        let cells = calibrate_region(rect, self.config.receptive_field, field.cell_stride());
        let (mut i0, mut j0, mut i1, mut j1) = (0, 0, -1, -1);
        if let Some(&(fi, fj)) = cells.iter().next() {
            (i0, j0, i1, j1) = (fi, fj, fi, fj);
            for &(i, j) in &cells {
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
        }
        let ni = (i1 - i0 + 1).max(0) as usize;
        let nj = (j1 - j0 + 1).max(0) as usize;
        let mut latents = vec![0f32; ni * nj * d];
        for &(i, j) in &cells {
            let k = ((j - j0) as usize * ni + (i - i0) as usize) * d;
            latents[k..k + d].copy_from_slice(&field.cell((i, j)));
        }
        let projection = (0..FEATURES)
            .flat_map(|f| {
                let row: Vec<f64> = (0..d)
                    .map(|l| gaussian_weight(&[WEIGHT_KEY, 1, f as u64, l as u64]))
                    .collect();
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                row.into_iter().map(move |v| v / n)
            })
            .collect();
        let g = field.global();
        let style = std::array::from_fn(|s| {
            let dot: f64 = g
                .iter()
                .enumerate()
                .map(|(k, &v)| v as f64 * gaussian_weight(&[WEIGHT_KEY, 2, s as u64, k as u64]))
                .sum();
            (dot / (g.len() as f64).sqrt()).tanh()
        });
        PatchContext {
            field,
            i0,
            j0,
            ni,
            nj,
            latents,
            projection,
            style,
        }
    }

    /// Kernel-weighted latent blend at pixel `(x, y)`, scaled to unit variance.
    fn mixed_latent(&self, ctx: &PatchContext<'_>, x: i64, y: i64, out: &mut [f64]) {
        out.fill(0.0);
        let r = self.config.receptive_field.radius_px as f64;
        let r2 = r * r;
        let s = ctx.field.cell_stride() as f64;
        let d = ctx.field.local_dim();
        let i_lo = ((x as f64 - r - s / 2.0) / s).floor() as i64;
        let i_hi = ((x as f64 + r - s / 2.0) / s).ceil() as i64;
        let j_lo = ((y as f64 - r - s / 2.0) / s).floor() as i64;
        let j_hi = ((y as f64 + r - s / 2.0) / s).ceil() as i64;
        let mut sum_w2 = 0.0;
        for j in j_lo..=j_hi {
            for i in i_lo..=i_hi {
                let (cx, cy) = cell_center((i, j), ctx.field.cell_stride());
                let dist2 = (cx - x as f64).powi(2) + (cy - y as f64).powi(2);
                if dist2 >= r2 {
                    continue;
                }
                let w = (1.0 - dist2 / r2).powi(2);
                // every in-range cell lies in the calibrated box
                let k = ((j - ctx.j0) as usize * ctx.ni + (i - ctx.i0) as usize) * d;
                debug_assert!(i >= ctx.i0 && j >= ctx.j0 && ((i - ctx.i0) as usize) < ctx.ni && ((j - ctx.j0) as usize) < ctx.nj);
                for (o, &z) in out.iter_mut().zip(&ctx.latents[k..k + d]) {
                    *o += w * z as f64;
                }
                sum_w2 += w * w;
            }
        }
        if sum_w2 > 0.0 {
            let scale = 1.0 / sum_w2.sqrt();
            out.iter_mut().for_each(|o| *o *= scale);
        }
    }

    fn pixel(&self, ctx: &PatchContext<'_>, x: i64, y: i64, m: &mut [f64]) -> (ClassId, u16, [f32; 3]) {
        self.mixed_latent(ctx, x, y, m);
        let d = m.len();
        let f: [f64; FEATURES] = std::array::from_fn(|k| {
            ctx.projection[k * d..(k + 1) * d]
                .iter()
                .zip(m.iter())
                .map(|(p, v)| p * v)
                .sum()
        });
        let st = ctx.style;

        let scores = [
            2.0 * f[0] - 2.4 + 0.6 * st[0],
            1.2 * f[1] - 0.8,
            0.8 * f[2] - 1.0,
            1.1 * f[3] + 0.7 + 0.5 * st[1],
            1.0 * f[4] - 1.5,
            1.2 * f[1] + 1.0 * f[5] - 1.5,
        ];
        let best = argmax(&scores);

        let cfg = &self.config;
        let gx = x.rem_euclid(cfg.street_period);
        let gy = y.rem_euclid(cfg.street_period);
        let on_street = (gx < cfg.street_width || gy < cfg.street_width) && f[6] > -1.3;
        let near = |g: i64| {
            (cfg.street_width..cfg.street_width + 2).contains(&g) || g >= cfg.street_period - 2
        };

        let color = if on_street {
            let id = if LAND_USE[best] == classes::WATER {
                classes::BRIDGE
            } else {
                classes::ROAD
            };
            self.palette.color(id).expect("street classes in palette")
        } else if (near(gx) || near(gy)) && LAND_USE[best] == classes::BUILDING {
            self.palette.color(classes::SIDEWALK).expect("sidewalk in palette")
        } else {
            let t = cfg.color_temperature;
            let top = scores[best];
            let weights: Vec<f64> = scores.iter().map(|s| ((s - top) / t).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut c = [0.0; 3];
            for (w, &id) in weights.iter().zip(&LAND_USE) {
                let pc = self.palette.color(id).expect("land-use classes in palette");
                for k in 0..3 {
                    c[k] += w / total * pc[k];
                }
            }
            c
        };
        let class = self.decode_palette.nearest(&color).unwrap_or(classes::TERRAIN);

        let mut height = match class {
            classes::BUILDING => {
                let base = 9.0 + 12.0 * (1.0 + (0.8 * f[7] + 0.5 * st[2]).tanh());
                ((base / 3.0).round() * 3.0).min(60.0) as u16
            }
            classes::TREE => 4 + (1.5 * f[8] + 3.0).clamp(0.0, 6.0).round() as u16,
            classes::BRIDGE => 4,
            _ => 0,
        };
        if height == 0 && class != classes::WATER && f[9] > 0.0 {
            let h = hash_words(&[WEIGHT_KEY, 3, x as u64, y as u64]);
            if unit_f64(h) < cfg.artifact_rate {
                height = 2 + (crate::hash::mix64(h) % 7) as u16;
            }
        }

        let normal = match class {
            classes::TREE => canonical_normal([0.5 * f[10] as f32, 0.5 * f[11] as f32, 1.0]),
            classes::TERRAIN | classes::GREENSPACE => {
                canonical_normal([0.08 * f[10] as f32, 0.08 * f[11] as f32, 1.0])
            }
            _ => UP,
        };
        (class, height, normal)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

/// Approximately standard-normal constant keyed by `words` (sum of uniforms).
fn gaussian_weight(words: &[u64]) -> f64 {
    let h = hash_words(words);
    let mut acc = 0.0;
    let mut s = h;
    for _ in 0..4 {
        s = crate::hash::mix64(s);
        acc += unit_f64(s);
    }
    (acc - 2.0) * 3f64.sqrt()
}

impl PatchGenerator for ProceduralGenerator {
    fn patch_size(&self) -> u32 {
        self.config.patch_size
    }

    fn receptive_field(&self) -> ReceptiveField {
        self.config.receptive_field
    }

    fn generate(&self, field: &LatentField, rect: PixelRect) -> CdnTile {
        let ctx = self.context(field, rect);
        let (w, h) = (rect.w as usize, rect.h as usize);
        let mut category = Vec::with_capacity(w * h);
        let mut height = Vec::with_capacity(w * h);
        let mut normal = Vec::with_capacity(w * h);
        let mut m = vec![0.0; field.local_dim()];
        for (x, y) in rect.pixels() {
            let (c, hgt, n) = self.pixel(&ctx, x, y, &mut m);
            category.push(c);
            height.push(hgt);
            normal.push(n);
        }
        CdnTile {
            category: Raster::from_vec(w, h, category).unwrap(),
            height_m: Raster::from_vec(w, h, height).unwrap(),
            normal: Raster::from_vec(w, h, normal).unwrap(),
        }
    }
}
