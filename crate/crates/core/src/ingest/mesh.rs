use std::fmt::Write;

use super::IngestError;
use crate::satmap::{classes, ClassId, Palette};

#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    pub indices: [u32; 3],
    pub class: ClassId,
    /// Outward unit normal.
    pub normal: [f64; 3],
}

/// Indexed triangle mesh with a class per face. Coordinates in meters,
/// z up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<Triangle>,
}

impl LabeledMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<Triangle>) -> Result<Self, IngestError> {
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.indices.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(IngestError::IndexOutOfRange {
                    triangle: t,
                    index,
                    count: vertices.len(),
                });
            }
            if tri.class as usize >= classes::COUNT {
                return Err(IngestError::BadClass {
                    triangle: t,
                    class: tri.class,
                });
            }
            let len = norm(tri.normal);
            if !len.is_finite() || (len - 1.0).abs() > 1e-6 {
                return Err(IngestError::BadNormal(t));
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: &Triangle) -> [[f64; 3]; 3] {
        t.indices.map(|i| self.vertices[i as usize])
    }

    /// Parses the `.tmesh` text format:
    ///
    /// ```text
    /// # unit quad of road
    /// v 0 0 0
    /// v 1 0 0
    /// v 1 1 0
    /// v 0 1 0
    /// f 0 1 2 road
    /// f 0 2 3 1 0 0 1
    /// ```
    ///
    /// Vertex indices are zero-based. The class is a palette name or id.
    /// An optional trailing normal overrides the one implied by the
    /// counter-clockwise winding.
    pub fn from_tmesh(text: &str) -> Result<Self, IngestError> {
        let palette = Palette::default_city();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: String| IngestError::Parse { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            let mut parts = body.split_whitespace();
            let Some(kind) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad number {s:?}")))
            };
            match kind {
                "v" => {
                    if rest.len() != 3 {
                        return Err(err(format!("vertex needs 3 coordinates, got {}", rest.len())));
                    }
                    vertices.push([num(rest[0])?, num(rest[1])?, num(rest[2])?]);
                }
                "f" => {
                    if rest.len() != 4 && rest.len() != 7 {
                        return Err(err("face is `f a b c class [nx ny nz]`".into()));
                    }
                    let mut indices = [0u32; 3];
                    for (slot, s) in indices.iter_mut().zip(&rest[..3]) {
                        *slot = s
                            .parse()
                            .map_err(|_| err(format!("bad vertex index {s:?}")))?;
                    }
                    let class = match rest[3].parse::<ClassId>() {
                        Ok(id) => id,
                        Err(_) => palette
                            .classes()
                            .iter()
                            .find(|c| c.name == rest[3])
                            .map(|c| c.id)
                            .ok_or_else(|| err(format!("unknown class {:?}", rest[3])))?,
                    };
                    let normal = if rest.len() == 7 {
                        let n = [num(rest[4])?, num(rest[5])?, num(rest[6])?];
                        let len = norm(n);
                        if len == 0.0 {
                            return Err(err("zero normal".into()));
                        }
                        n.map(|c| c / len)
                    } else {
                        let corners = indices.map(|i| vertices.get(i as usize).copied());
                        match corners {
                            [Some(a), Some(b), Some(c)] => winding_normal(a, b, c),
                            _ => return Err(err("face references a later or missing vertex".into())),
                        }
                    };
                    triangles.push(Triangle {
                        indices,
                        class,
                        normal,
                    });
                }
                other => return Err(err(format!("unknown record {other:?}"))),
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn to_tmesh(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let [a, b, c] = t.indices;
            let [x, y, z] = t.normal;
            let _ = writeln!(out, "f {a} {b} {c} {} {x} {y} {z}", t.class);
        }
        out
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Counter-clockwise normal; degenerate faces get +z.
fn winding_normal(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let n = cross(sub(b, a), sub(c, a));
    let len = norm(n);
    if len > 0.0 {
        n.map(|v| v / len)
    } else {
        [0.0, 0.0, 1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = "# unit quad of road
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 0 1 2 road
f 0 2 3 1 0 0 1
";

    #[test]
    fn parses_documented_example() {
        let m = LabeledMesh::from_tmesh(QUAD).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.triangles().len(), 2);
        assert!(m.triangles().iter().all(|t| t.class == classes::ROAD));
        assert_eq!(m.triangles()[0].normal, [0.0, 0.0, 1.0]);
        assert_eq!(LabeledMesh::from_tmesh(&m.to_tmesh()).unwrap(), m);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2 lava\n";
        assert!(matches!(
            LabeledMesh::from_tmesh(bad),
            Err(IngestError::Parse { line: 4, .. })
        ));
        assert!(matches!(
            LabeledMesh::from_tmesh("v 0 0\n"),
            Err(IngestError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            LabeledMesh::from_tmesh("q\n"),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn validates_indices_and_normals() {
        let tri = |indices, normal| Triangle { indices, class: 1, normal };
        assert!(matches!(
            LabeledMesh::new(vec![[0.0; 3]; 3], vec![tri([0, 1, 3], [0.0, 0.0, 1.0])]),
            Err(IngestError::IndexOutOfRange { triangle: 0, index: 3, count: 3 })
        ));
        assert_eq!(
            LabeledMesh::new(vec![[0.0; 3]; 3], vec![tri([0, 1, 2], [0.0, 0.0, 2.0])]),
            Err(IngestError::BadNormal(0))
        );
    }
}
