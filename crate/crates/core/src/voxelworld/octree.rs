use crate::satmap::ClassId;

/// Levels below the root; leaves sit at this depth.
pub const BLOCK_DEPTH: u32 = 6;
/// Voxels per block edge (2^depth).
pub const BLOCK_EDGE: usize = 1 << BLOCK_DEPTH;

/// Payload of an occupied voxel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Voxel {
    pub class: ClassId,
    pub normal: [f32; 3],
}

/// Octree node. Branches never hold eight empty children.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Empty,
    Leaf(Voxel),
    Branch(Box<[Node; 8]>),
}

impl Node {
    fn empty_children() -> Box<[Node; 8]> {
        Box::new(std::array::from_fn(|_| Node::Empty))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Node::Empty)
    }
}

/// Child slot of voxel `(x, y, z)` below a node at `level` (root = 0).
#[inline]
pub(crate) fn child_index(x: usize, y: usize, z: usize, level: u32) -> usize {
    let s = BLOCK_DEPTH - 1 - level;
    ((x >> s) & 1) | (((y >> s) & 1) << 1) | (((z >> s) & 1) << 2)
}

/// One 64³ block at block coordinate `(bx, by)`; world voxel
/// `(64·bx + x, 64·by + y, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OctreeBlock {
    pub bx: i32,
    pub by: i32,
    root: Node,
    count: usize,
}

impl OctreeBlock {
    pub fn new(bx: i32, by: i32) -> Self {
        Self {
            bx,
            by,
            root: Node::Empty,
            count: 0,
        }
    }

    pub(crate) fn from_root(bx: i32, by: i32, root: Node) -> Self {
        let mut count = 0;
        count_leaves(&root, &mut count);
        Self {
            bx,
            by,
            root,
            count,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn occupied_count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Option<&Voxel> {
        debug_assert!(x < BLOCK_EDGE && y < BLOCK_EDGE && z < BLOCK_EDGE);
        let mut node = &self.root;
        let mut level = 0;
        loop {
            match node {
                Node::Empty => return None,
                Node::Leaf(v) => return Some(v),
                Node::Branch(ch) => {
                    node = &ch[child_index(x, y, z, level)];
                    level += 1;
                }
            }
        }
    }

    /// Edge length of the largest empty node containing `(x, y, z)`, or
    /// `None` when the voxel is occupied.
    pub fn empty_extent(&self, x: usize, y: usize, z: usize) -> Option<usize> {
        let mut node = &self.root;
        let mut level = 0;
        loop {
            match node {
                Node::Empty => return Some(BLOCK_EDGE >> level),
                Node::Leaf(_) => return None,
                Node::Branch(ch) => {
                    node = &ch[child_index(x, y, z, level)];
                    level += 1;
                }
            }
        }
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, voxel: Voxel) {
        assert!(x < BLOCK_EDGE && y < BLOCK_EDGE && z < BLOCK_EDGE, "voxel outside block");
        let mut node = &mut self.root;
        for level in 0..BLOCK_DEPTH {
            if node.is_empty() {
                *node = Node::Branch(Node::empty_children());
            }
            match node {
                Node::Branch(ch) => node = &mut ch[child_index(x, y, z, level)],
                _ => unreachable!("leaves only exist at full depth"),
            }
        }
        if node.is_empty() {
            self.count += 1;
        }
        *node = Node::Leaf(voxel);
    }

    /// Clears a voxel and prunes branches left without children.
    pub fn remove(&mut self, x: usize, y: usize, z: usize) -> Option<Voxel> {
        fn go(node: &mut Node, x: usize, y: usize, z: usize, level: u32) -> Option<Voxel> {
            match node {
                Node::Empty => None,
                Node::Leaf(v) => {
                    let v = *v;
                    *node = Node::Empty;
                    Some(v)
                }
                Node::Branch(ch) => {
                    let out = go(&mut ch[child_index(x, y, z, level)], x, y, z, level + 1);
                    if ch.iter().all(Node::is_empty) {
                        *node = Node::Empty;
                    }
                    out
                }
            }
        }
        let out = go(&mut self.root, x, y, z, 0);
        if out.is_some() {
            self.count -= 1;
        }
        out
    }

    /// Occupied voxels in depth-first child order.
    pub fn voxels(&self) -> Vec<([usize; 3], Voxel)> {
        fn go(node: &Node, origin: [usize; 3], size: usize, out: &mut Vec<([usize; 3], Voxel)>) {
            match node {
                Node::Empty => {}
                Node::Leaf(v) => out.push((origin, *v)),
                Node::Branch(ch) => {
                    let half = size / 2;
                    for (k, c) in ch.iter().enumerate() {
                        let o = [
                            origin[0] + (k & 1) * half,
                            origin[1] + ((k >> 1) & 1) * half,
                            origin[2] + ((k >> 2) & 1) * half,
                        ];
                        go(c, o, half, out);
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(self.count);
        go(&self.root, [0; 3], BLOCK_EDGE, &mut out);
        out
    }

    /// Highest occupied z of a column.
    pub fn column_top(&self, x: usize, y: usize) -> Option<usize> {
        (0..BLOCK_EDGE).rev().find(|&z| self.get(x, y, z).is_some())
    }

    /// True when no branch has eight empty children and leaves sit at full depth.
    pub fn is_canonical(&self) -> bool {
        fn go(node: &Node, level: u32) -> bool {
            match node {
                Node::Empty => true,
                Node::Leaf(_) => level == BLOCK_DEPTH,
                Node::Branch(ch) => {
                    level < BLOCK_DEPTH
                        && !ch.iter().all(Node::is_empty)
                        && ch.iter().all(|c| go(c, level + 1))
                }
            }
        }
        go(&self.root, 0)
    }
}

fn count_leaves(node: &Node, count: &mut usize) {
    match node {
        Node::Empty => {}
        Node::Leaf(_) => *count += 1,
        Node::Branch(ch) => ch.iter().for_each(|c| count_leaves(c, count)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::satmap::UP;

    fn v(class: ClassId) -> Voxel {
        Voxel { class, normal: UP }
    }

    #[test]
    fn depth_six_spans_sixty_four() {
        assert_eq!(BLOCK_EDGE, 64);
        let mut b = OctreeBlock::new(0, 0);
        b.set(63, 63, 63, v(1));
        b.set(0, 0, 0, v(2));
        assert_eq!(b.get(63, 63, 63), Some(&v(1)));
        assert_eq!(b.get(0, 0, 0), Some(&v(2)));
        assert_eq!(b.get(1, 0, 0), None);
        assert_eq!(b.occupied_count(), 2);
        assert!(b.is_canonical());
    }

    #[test]
    fn remove_prunes_to_empty_root() {
        let mut b = OctreeBlock::new(0, 0);
        b.set(5, 6, 7, v(3));
        assert_eq!(b.remove(5, 6, 7), Some(v(3)));
        assert_eq!(b.remove(5, 6, 7), None);
        assert!(b.root().is_empty());
        assert!(b.is_empty());
    }

    #[test]
    fn empty_extent_reports_skippable_cubes() {
        let mut b = OctreeBlock::new(0, 0);
        assert_eq!(b.empty_extent(10, 10, 10), Some(64));
        b.set(0, 0, 0, v(1));
        assert_eq!(b.empty_extent(0, 0, 0), None);
        assert_eq!(b.empty_extent(1, 0, 0), Some(1));
        assert_eq!(b.empty_extent(40, 0, 0), Some(32));
        assert_eq!(b.empty_extent(2, 2, 2), Some(2));
    }

    #[test]
    fn overwrite_keeps_count() {
        let mut b = OctreeBlock::new(0, 0);
        b.set(1, 1, 1, v(1));
        b.set(1, 1, 1, v(2));
        assert_eq!(b.occupied_count(), 1);
        assert_eq!(b.voxels(), vec![([1, 1, 1], v(2))]);
        assert_eq!(b.column_top(1, 1), Some(1));
        assert_eq!(b.column_top(0, 1), None);
    }
}
