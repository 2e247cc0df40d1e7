use rayon::prelude::*;

use super::{Raster, SatmapError};

/// One bilateral pass: square window of `radius` pixels, Gaussian spatial
/// and range weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilateralPass {
    pub radius: usize,
    pub space_sigma: f64,
    pub value_sigma: f64,
}

impl BilateralPass {
    pub const fn new(radius: usize, space_sigma: f64, value_sigma: f64) -> Self {
        Self {
            radius,
            space_sigma,
            value_sigma,
        }
    }
}

/// Large window with a tight range sigma sharpens building edges, then a
/// small window with a wider range sigma removes isolated spikes.
pub fn default_schedule() -> [BilateralPass; 2] {
    [
        BilateralPass::new(7, 3.0, 4.0),
        BilateralPass::new(2, 2.0, 8.0),
    ]
}

pub fn default_clean(height: &Raster<u16>) -> Raster<u16> {
    bilateral_filter(height, &default_schedule()).expect("default schedule is valid")
}

/// Applies each pass in order. Borders clamp; every pass rounds half-up to
/// whole meters.
pub fn bilateral_filter(
    height: &Raster<u16>,
    passes: &[BilateralPass],
) -> Result<Raster<u16>, SatmapError> {
    if passes.is_empty() {
        return Err(SatmapError::NoPasses);
    }
    for p in passes {
        for s in [p.space_sigma, p.value_sigma] {
            if !(s.is_finite() && s > 0.0) {
                return Err(SatmapError::InvalidSigma(s));
            }
        }
    }
    let mut cur = height.clone();
    for p in passes {
        cur = apply_pass(&cur, p);
    }
    Ok(cur)
}

fn apply_pass(src: &Raster<u16>, pass: &BilateralPass) -> Raster<u16> {
    let (w, h) = (src.width(), src.height());
    if w == 0 || h == 0 {
        return src.clone();
    }
    let r = pass.radius as isize;
    let side = 2 * pass.radius + 1;
    let space: Vec<f64> = (0..side * side)
        .map(|k| {
            let dx = (k % side) as f64 - pass.radius as f64;
            let dy = (k / side) as f64 - pass.radius as f64;
            (-(dx * dx + dy * dy) / (2.0 * pass.space_sigma * pass.space_sigma)).exp()
        })
        .collect();
    let range_denom = 2.0 * pass.value_sigma * pass.value_sigma;

    let rows: Vec<Vec<u16>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let center = *src.get(x, y) as f64;
                    let (mut num, mut den) = (0.0, 0.0);
                    for dy in -r..=r {
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        for dx in -r..=r {
                            let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                            let v = *src.get(xx, yy) as f64;
                            let k = ((dy + r) as usize) * side + (dx + r) as usize;
                            let wgt = space[k] * (-(v - center) * (v - center) / range_denom).exp();
                            num += wgt * v;
                            den += wgt;
                        }
                    }
                    (num / den + 0.5).floor() as u16
                })
                .collect()
        })
        .collect();
    Raster::from_vec(w, h, rows.concat()).expect("shape preserved")
}
