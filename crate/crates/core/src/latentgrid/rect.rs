use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LatentGridError;

/// Axis-aligned pixel rectangle in global map coordinates. Pixel `(x, y)` sits
/// at the integer point `(x, y)`; the rectangle covers `x..x + w`, `y..y + h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub const fn new(x: i64, y: i64, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    /// Exclusive end.
    pub fn x_end(&self) -> i64 {
        self.x + self.w as i64
    }

    pub fn y_end(&self) -> i64 {
        self.y + self.h as i64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x && x < self.x_end() && y >= self.y && y < self.y_end()
    }

    pub fn intersects(&self, other: &PixelRect) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self.x < other.x_end()
            && other.x < self.x_end()
            && self.y < other.y_end()
            && other.y < self.y_end()
    }

    /// Grows the rectangle by `r` pixels on every side.
    pub fn dilate(&self, r: u32) -> PixelRect {
        PixelRect::new(
            self.x - r as i64,
            self.y - r as i64,
            self.w + 2 * r,
            self.h + 2 * r,
        )
    }

    /// Euclidean distance from pixel `(x, y)` to the nearest pixel of the rect.
    pub fn distance_to(&self, x: i64, y: i64) -> f64 {
        let dx = (self.x - x).max(0).max(x - (self.x_end() - 1));
        let dy = (self.y - y).max(0).max(y - (self.y_end() - 1));
        ((dx * dx + dy * dy) as f64).sqrt()
    }

    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.y..self.y_end()).flat_map(move |y| (self.x..self.x_end()).map(move |x| (x, y)))
    }
}

impl fmt::Display for PixelRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for PixelRect {
    type Err = LatentGridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LatentGridError::RectSyntax(s.to_owned());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(err());
        }
        Ok(PixelRect::new(
            parts[0].parse().map_err(|_| err())?,
            parts[1].parse().map_err(|_| err())?,
            parts[2].parse().map_err(|_| err())?,
            parts[3].parse().map_err(|_| err())?,
        ))
    }
}

/// Largest distance at which a latent cell center can influence a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptiveField {
    pub radius_px: u32,
}

impl ReceptiveField {
    pub const fn new(radius_px: u32) -> Self {
        Self { radius_px }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let r: PixelRect = "-5, 10,64,32".parse().unwrap();
        assert_eq!(r, PixelRect::new(-5, 10, 64, 32));
        assert_eq!(r.to_string(), "-5,10,64,32");
        assert!("1,2,3".parse::<PixelRect>().is_err());
        assert!("1,2,-3,4".parse::<PixelRect>().is_err());
    }

    #[test]
    fn geometry() {
        let r = PixelRect::new(0, 0, 10, 10);
        assert!(r.intersects(&PixelRect::new(9, 9, 5, 5)));
        assert!(!r.intersects(&PixelRect::new(10, 0, 5, 5)));
        assert!(!r.intersects(&PixelRect::new(0, 0, 0, 5)));
        assert_eq!(r.distance_to(5, 5), 0.0);
        assert_eq!(r.distance_to(12, 9), 3.0);
        assert_eq!(r.distance_to(-3, -4), 5.0);
        assert_eq!(r.dilate(2), PixelRect::new(-2, -2, 14, 14));
        assert_eq!(r.pixels().count(), 100);
    }
}
