use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Raster, SatmapError};

pub type ClassId = u8;

/// Class ids of the default palette.
pub mod classes {
    use super::ClassId;

    /// Column with no occupied voxel.
    pub const VOID: ClassId = 0;
    pub const ROAD: ClassId = 1;
    pub const SIDEWALK: ClassId = 2;
    pub const TERRAIN: ClassId = 3;
    pub const BRIDGE: ClassId = 4;
    pub const GREENSPACE: ClassId = 5;
    pub const PLAZA: ClassId = 6;
    pub const WATER: ClassId = 7;
    pub const BUILDING: ClassId = 8;
    pub const TREE: ClassId = 9;
    /// Created by completion below tree canopies; never synthesized.
    pub const TRUNK: ClassId = 10;
    /// Assigned to rays that leave the world.
    pub const SKY: ClassId = 11;

    pub const COUNT: usize = 12;

    /// Classes the map generator may emit.
    pub const SYNTHESIZABLE: [ClassId; 9] = [
        ROAD, SIDEWALK, TERRAIN, BRIDGE, GREENSPACE, PLAZA, WATER, BUILDING, TREE,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaletteClass {
    pub id: ClassId,
    pub name: String,
    pub color: [f64; 3],
    pub walkable: bool,
}

/// Ordered class list with display colors and walkable flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Palette {
    classes: Vec<PaletteClass>,
}

#[derive(Serialize, Deserialize)]
struct PaletteFile {
    class: Vec<PaletteClass>,
}

impl Palette {
    /// Validates and sorts `classes` by id.
    pub fn new(mut classes: Vec<PaletteClass>) -> Result<Self, SatmapError> {
        classes.sort_by_key(|c| c.id);
        for w in classes.windows(2) {
            if w[0].id == w[1].id {
                return Err(SatmapError::DuplicateClass(w[0].id));
            }
        }
        for c in &classes {
            if c.color.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(SatmapError::ColorRange(c.id));
            }
        }
        for (i, a) in classes.iter().enumerate() {
            for b in &classes[i + 1..] {
                if a.color == b.color {
                    return Err(SatmapError::DuplicateColor(a.id, b.id));
                }
            }
        }
        Ok(Self { classes })
    }

    /// Twelve classes with colors spaced 30 degrees apart on a hue ring.
    pub fn default_city() -> Self {
        use classes::*;
        let table: [(ClassId, &str, bool); classes::COUNT] = [
            (VOID, "void", false),
            (ROAD, "road", true),
            (SIDEWALK, "sidewalk", true),
            (TERRAIN, "terrain", true),
            (BRIDGE, "bridge", true),
            (GREENSPACE, "greenspace", true),
            (PLAZA, "plaza", true),
            (WATER, "water", false),
            (BUILDING, "building", false),
            (TREE, "tree", false),
            (TRUNK, "trunk", false),
            (SKY, "sky", false),
        ];
        let classes = table
            .iter()
            .map(|&(id, name, walkable)| PaletteClass {
                id,
                name: name.to_owned(),
                color: hue_ring_color(id as f64 * 30.0),
                walkable,
            })
            .collect();
        Self::new(classes).expect("default palette is valid")
    }

    pub fn classes(&self) -> &[PaletteClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, id: ClassId) -> Option<&PaletteClass> {
        self.classes
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.classes[i])
    }

    pub fn color(&self, id: ClassId) -> Option<[f64; 3]> {
        self.get(id).map(|c| c.color)
    }

    pub fn is_walkable(&self, id: ClassId) -> bool {
        self.get(id).is_some_and(|c| c.walkable)
    }

    /// Palette restricted to `ids` (unknown ids are ignored).
    pub fn subset(&self, ids: &[ClassId]) -> Self {
        Self {
            classes: self
                .classes
                .iter()
                .filter(|c| ids.contains(&c.id))
                .cloned()
                .collect(),
        }
    }

    /// Minimum pairwise Euclidean color distance; infinite for fewer than two classes.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.classes.iter().enumerate() {
            for b in &self.classes[i + 1..] {
                best = best.min(dist2(&a.color, &b.color).sqrt());
            }
        }
        best
    }

    /// Class whose color is nearest to `color`; ties go to the lowest id.
    pub fn nearest(&self, color: &[f64; 3]) -> Option<ClassId> {
        let mut best: Option<(f64, ClassId)> = None;
        // classes are sorted by id, so strict `<` keeps the lowest id on ties
        for c in &self.classes {
            let d = dist2(&c.color, color);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c.id));
            }
        }
        best.map(|(_, id)| id)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&PaletteFile {
            class: self.classes.clone(),
        })
        .expect("palette serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, SatmapError> {
        let file: PaletteFile =
            toml::from_str(text).map_err(|e| SatmapError::PaletteFile(e.to_string()))?;
        Self::new(file.class)
    }

    /// Stable 64-bit identifier stored in tile headers.
    pub fn content_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

fn hue_ring_color(hue_deg: f64) -> [f64; 3] {
    // HSV with fixed saturation/value, snapped to 1/256 so colors are exact in the file format
    let (s, v) = (0.75, 0.875);
    let h = (hue_deg.rem_euclid(360.0)) / 60.0;
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m].map(|u| (u * 256.0).round().min(255.0) / 256.0)
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

/// Nearest-palette-color decoding of a continuous color image.
pub fn decode_category(
    colors: &Raster<[f64; 3]>,
    palette: &Palette,
) -> Result<Raster<ClassId>, SatmapError> {
    if palette.is_empty() {
        return Err(SatmapError::EmptyPalette);
    }
    Ok(colors.map(|c| palette.nearest(c).expect("palette is nonempty")))
}

/// Renders class ids with their palette colors.
pub fn encode_category(
    ids: &Raster<ClassId>,
    palette: &Palette,
) -> Result<Raster<[f64; 3]>, SatmapError> {
    let mut out = Raster::filled(ids.width(), ids.height(), [0.0; 3]);
    for y in 0..ids.height() {
        for x in 0..ids.width() {
            let id = *ids.get(x, y);
            let c = palette.color(id).ok_or(SatmapError::UnknownClass(id))?;
            out.set(x, y, c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn class(id: ClassId, color: [f64; 3]) -> PaletteClass {
        PaletteClass {
            id,
            name: format!("c{id}"),
            color,
            walkable: false,
        }
    }

    #[test]
    fn default_palette_is_well_separated() {
        let p = Palette::default_city();
        assert_eq!(p.len(), classes::COUNT);
        let delta = p.min_separation();
        assert!(delta > 0.2, "delta = {delta}");
        assert!(p.is_walkable(classes::ROAD));
        assert!(p.is_walkable(classes::BRIDGE));
        assert!(!p.is_walkable(classes::BUILDING));
    }

    #[test]
    fn exact_color_decodes_to_its_class() {
        let p = Palette::default_city();
        for c in p.classes() {
            assert_eq!(p.nearest(&c.color), Some(c.id));
        }
    }

    #[test]
    fn perturbation_below_half_separation_round_trips() {
        let p = Palette::default_city();
        let step = p.min_separation() / 4.0;
        for c in p.classes() {
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut col = c.color;
                    col[axis] += sign * step;
                    assert_eq!(p.nearest(&col), Some(c.id), "class {} axis {axis}", c.id);
                }
            }
        }
    }

    #[test]
    fn equidistant_color_goes_to_lower_id() {
        let p = Palette::new(vec![
            class(2, [0.25, 0.5, 0.5]),
            class(5, [0.75, 0.5, 0.5]),
            class(7, [0.5, 0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(p.nearest(&[0.5, 0.5, 0.5]), Some(2));
    }

    #[test]
    fn empty_palette_is_rejected_by_decode() {
        let p = Palette::new(vec![]).unwrap();
        let img = Raster::filled(2, 2, [0.0; 3]);
        assert_eq!(decode_category(&img, &p), Err(SatmapError::EmptyPalette));
    }

    #[test]
    fn invalid_palettes() {
        assert_eq!(
            Palette::new(vec![class(1, [0.0; 3]), class(1, [1.0; 3])]),
            Err(SatmapError::DuplicateClass(1))
        );
        assert_eq!(
            Palette::new(vec![class(1, [0.5; 3]), class(2, [0.5; 3])]),
            Err(SatmapError::DuplicateColor(1, 2))
        );
        assert_eq!(
            Palette::new(vec![class(3, [1.5, 0.0, 0.0])]),
            Err(SatmapError::ColorRange(3))
        );
    }

    #[test]
    fn palette_file_round_trip() {
        let p = Palette::default_city();
        let text = p.to_toml();
        assert!(text.contains("walkable"));
        let back = Palette::from_toml(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.content_hash(), p.content_hash());
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(ids in proptest::collection::vec(0u8..classes::COUNT as u8, 1..200)) {
            let p = Palette::default_city();
            let n = ids.len();
            let grid = Raster::from_vec(n, 1, ids).unwrap();
            let colors = encode_category(&grid, &p).unwrap();
            prop_assert_eq!(decode_category(&colors, &p).unwrap(), grid);
        }
    }
}
