use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LatentGridError;
use crate::hash::hash_words;

/// Integer index `(i, j)` of a local latent cell.
pub type CellCoord = (i64, i64);

pub const ICLF_MAGIC: &[u8; 4] = b"ICLF";
pub const ICLF_VERSION: u32 = 1;

const TAG_GLOBAL: u64 = 0x474C_4F42;
const TAG_CELL: u64 = 0x4345_4C4C;
pub(crate) const TAG_RESAMPLE: u64 = 0x5245_5341;

/// Global latent plus an unbounded grid of local latents.
///
/// Cells that were never written derive their vector from `(seed, i, j)`, so
/// memory grows only with the cells that were explicitly materialized or
/// resampled.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentField {
    seed: u64,
    global: Vec<f32>,
    local_dim: usize,
    cell_stride: u32,
    cells: BTreeMap<CellCoord, Vec<f32>>,
}

pub fn sample_field(
    seed: u64,
    global_dim: usize,
    local_dim: usize,
    cell_stride: u32,
) -> Result<LatentField, LatentGridError> {
    if global_dim == 0 {
        return Err(LatentGridError::ZeroDimension("global latent dimension"));
    }
    if local_dim == 0 {
        return Err(LatentGridError::ZeroDimension("local latent dimension"));
    }
    if cell_stride == 0 {
        return Err(LatentGridError::ZeroDimension("cell stride"));
    }
    Ok(LatentField {
        seed,
        global: gaussian_vector(hash_words(&[seed, TAG_GLOBAL]), global_dim),
        local_dim,
        cell_stride,
        cells: BTreeMap::new(),
    })
}

pub(crate) fn gaussian_vector(key: u64, len: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v as f32
        })
        .collect()
}

impl LatentField {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn global(&self) -> &[f32] {
        &self.global
    }

    pub fn global_dim(&self) -> usize {
        self.global.len()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn cell_stride(&self) -> u32 {
        self.cell_stride
    }

    /// Latent vector of cell `c`, materialized or derived.
    pub fn cell(&self, c: CellCoord) -> Cow<'_, [f32]> {
        match self.cells.get(&c) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(self.derived_cell(c)),
        }
    }

    fn derived_cell(&self, (i, j): CellCoord) -> Vec<f32> {
        gaussian_vector(
            hash_words(&[self.seed, TAG_CELL, i as u64, j as u64]),
            self.local_dim,
        )
    }

    /// Stores cell `c` explicitly and returns it.
    pub fn materialize(&mut self, c: CellCoord) -> &[f32] {
        if !self.cells.contains_key(&c) {
            let v = self.derived_cell(c);
            self.cells.insert(c, v);
        }
        &self.cells[&c]
    }

    /// Overrides the latent of cell `c`.
    pub fn set_cell(&mut self, c: CellCoord, v: Vec<f32>) {
        assert_eq!(v.len(), self.local_dim, "latent length");
        self.cells.insert(c, v);
    }

    pub fn is_materialized(&self, c: CellCoord) -> bool {
        self.cells.contains_key(&c)
    }

    pub fn materialized_count(&self) -> usize {
        self.cells.len()
    }

    /// Materialized cells in `(i, j)` order.
    pub fn materialized(&self) -> impl Iterator<Item = (&CellCoord, &Vec<f32>)> {
        self.cells.iter()
    }

    /// Snapshot: header then the sorted materialized cells.
    ///
    /// Header (little-endian): magic `ICLF`, u32 version, u32 global dim,
    /// u32 local dim, u32 cell stride, u64 seed, u64 cell count. Each cell is
    /// i64 i, i64 j and `local_dim` f32 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(36 + self.cells.len() * (16 + 4 * self.local_dim));
        out.extend_from_slice(ICLF_MAGIC);
        out.extend_from_slice(&ICLF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.global.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.local_dim as u32).to_le_bytes());
        out.extend_from_slice(&self.cell_stride.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.cells.len() as u64).to_le_bytes());
        for (&(i, j), v) in &self.cells {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&j.to_le_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LatentGridError> {
        let err = |offset: usize, message: &str| LatentGridError::Snapshot {
            offset,
            message: message.to_owned(),
        };
        let word = |at: usize, n: usize| -> Result<&[u8], LatentGridError> {
            bytes.get(at..at + n).ok_or_else(|| err(bytes.len(), "truncated"))
        };
        if word(0, 4)? != ICLF_MAGIC {
            return Err(err(0, "bad magic"));
        }
        let u32_at = |at| -> Result<u32, LatentGridError> {
            Ok(u32::from_le_bytes(word(at, 4)?.try_into().unwrap()))
        };
        let u64_at = |at| -> Result<u64, LatentGridError> {
            Ok(u64::from_le_bytes(word(at, 8)?.try_into().unwrap()))
        };
        if u32_at(4)? != ICLF_VERSION {
            return Err(err(4, "unsupported version"));
        }
        let global_dim = u32_at(8)? as usize;
        let local_dim = u32_at(12)? as usize;
        let stride = u32_at(16)?;
        let seed = u64_at(20)?;
        let count = u64_at(28)?;
        let mut field = sample_field(seed, global_dim, local_dim, stride)
            .map_err(|e| err(8, &e.to_string()))?;
        let entry = 16 + 4 * local_dim;
        let body = bytes.len() - 36;
        if count.checked_mul(entry as u64) != Some(body as u64) {
            return Err(err(28, "cell count does not match payload length"));
        }
        let mut at = 36;
        let mut prev: Option<CellCoord> = None;
        for _ in 0..count {
            let i = u64_at(at)? as i64;
            let j = u64_at(at + 8)? as i64;
            if prev.is_some_and(|p| p >= (i, j)) {
                return Err(err(at, "cells not strictly sorted"));
            }
            prev = Some((i, j));
            let v = (0..local_dim)
                .map(|k| {
                    let b = word(at + 16 + 4 * k, 4)?;
                    Ok(f32::from_le_bytes(b.try_into().unwrap()))
                })
                .collect::<Result<Vec<f32>, LatentGridError>>()?;
            field.cells.insert((i, j), v);
            at += entry;
        }
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_dimensions_are_rejected() {
        assert!(sample_field(1, 0, 16, 32).is_err());
        assert!(sample_field(1, 64, 0, 32).is_err());
        assert!(sample_field(1, 64, 16, 0).is_err());
    }

    #[test]
    fn cells_are_deterministic() {
        let f = sample_field(9, 64, 16, 32).unwrap();
        assert_eq!(f.cell((3, -4)), f.cell((3, -4)));
        let g = sample_field(9, 64, 16, 32).unwrap();
        assert_eq!(f.cell((3, -4)), g.cell((3, -4)));
        assert_ne!(f.cell((3, -4)), f.cell((-4, 3)));
        assert_eq!(f.global().len(), 64);
    }

    #[test]
    fn distinct_seeds_give_distinct_globals() {
        for s in 0..100u64 {
            let a = sample_field(2 * s, 64, 16, 32).unwrap();
            let b = sample_field(2 * s + 1, 64, 16, 32).unwrap();
            assert_ne!(a.global(), b.global());
        }
    }

    #[test]
    fn far_cell_materializes_alone() {
        let mut f = sample_field(1, 64, 16, 32).unwrap();
        let derived = f.cell((1_000_000, -1_000_000)).into_owned();
        assert_eq!(f.materialized_count(), 0);
        assert_eq!(f.materialize((1_000_000, -1_000_000)), &derived[..]);
        assert_eq!(f.materialized_count(), 1);
        assert!(!f.is_materialized((999_999, -1_000_000)));
    }

    #[test]
    fn snapshot_rejects_garbage() {
        let mut f = sample_field(5, 8, 4, 16).unwrap();
        f.materialize((0, 0));
        let bytes = f.to_bytes();
        assert!(LatentField::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(LatentField::from_bytes(b"XXXX").is_err());
        let mut bad = bytes.clone();
        bad[12] = 0; // local dim 0
        assert!(LatentField::from_bytes(&bad).is_err());
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(seed in any::<u64>(), coords in proptest::collection::vec((-1000i64..1000, -1000i64..1000), 0..20)) {
            let mut f = sample_field(seed, 8, 4, 16).unwrap();
            for c in coords { f.materialize(c); }
            let bytes = f.to_bytes();
            let back = LatentField::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
