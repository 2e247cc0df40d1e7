use super::{assemble_world, Node, OctreeBlock, Voxel, VoxelError, VoxelWorld, BLOCK_DEPTH};
use crate::satmap::classes;

pub const IOCT_MAGIC: &[u8; 4] = b"IOCT";
pub const IWRL_MAGIC: &[u8; 4] = b"IWRL";
pub const IOCT_HEADER_LEN: usize = 16;
const IOCT_VERSION: u16 = 1;
const IWRL_VERSION: u32 = 1;
const FLAG_BODY: u8 = 1;
const TAG_BRANCH: u8 = 0x01;
const TAG_LEAF: u8 = 0x02;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected end of input")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("depth {0}, expected {BLOCK_DEPTH}")]
    WrongDepth(u8),
    #[error("unknown flags {0:#04x}")]
    Flags(u8),
    #[error("unknown node tag {0:#04x}")]
    Tag(u8),
    #[error("branch with no children")]
    EmptyBranch,
    #[error("node below leaf depth")]
    ChildOfLeaf,
    #[error("leaf above full depth")]
    ShallowLeaf,
    #[error("class {0} out of range")]
    Class(u8),
    #[error("non-finite normal")]
    Normal,
    #[error("trailing bytes")]
    Trailing,
    #[error("entry for block ({0}, {1}) holds block ({2}, {3})")]
    BlockMismatch(i32, i32, i32, i32),
}

/// Header then the depth-first node stream. Branch: tag, child mask, the
/// non-empty children in slot order. Leaf: tag, class, normal as 3 f32.
pub fn serialize_block(block: &OctreeBlock) -> Vec<u8> {
    let mut out = Vec::with_capacity(IOCT_HEADER_LEN + block.occupied_count() * 14);
    out.extend_from_slice(IOCT_MAGIC);
    out.extend_from_slice(&IOCT_VERSION.to_le_bytes());
    out.push(BLOCK_DEPTH as u8);
    out.push(if block.is_empty() { 0 } else { FLAG_BODY });
    out.extend_from_slice(&block.bx.to_le_bytes());
    out.extend_from_slice(&block.by.to_le_bytes());
    if !block.is_empty() {
        write_node(block.root(), &mut out);
    }
    out
}

fn write_node(node: &Node, out: &mut Vec<u8>) {
    match node {
        Node::Empty => {}
        Node::Leaf(v) => {
            out.push(TAG_LEAF);
            out.push(v.class);
            for c in v.normal {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        Node::Branch(ch) => {
            out.push(TAG_BRANCH);
            let mask = ch
                .iter()
                .enumerate()
                .fold(0u8, |m, (k, c)| if c.is_empty() { m } else { m | 1 << k });
            out.push(mask);
            ch.iter().for_each(|c| write_node(c, out));
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, kind: ParseErrorKind) -> VoxelError {
        VoxelError::Parse {
            offset: self.pos,
            kind,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], VoxelError> {
        if self.bytes.len() - self.pos < n {
            return Err(VoxelError::Parse {
                offset: self.bytes.len(),
                kind: ParseErrorKind::Truncated,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, VoxelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, VoxelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, VoxelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, VoxelError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, VoxelError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn node(&mut self, level: u32) -> Result<Node, VoxelError> {
        let at = self.pos;
        let fail = |kind| VoxelError::Parse { offset: at, kind };
        match self.u8()? {
            TAG_LEAF => {
                if level < BLOCK_DEPTH {
                    return Err(fail(ParseErrorKind::ShallowLeaf));
                }
                let class = self.u8()?;
                if class as usize >= classes::COUNT {
                    return Err(fail(ParseErrorKind::Class(class)));
                }
                let normal = [self.f32()?, self.f32()?, self.f32()?];
                if normal.iter().any(|c| !c.is_finite()) {
                    return Err(fail(ParseErrorKind::Normal));
                }
                Ok(Node::Leaf(Voxel { class, normal }))
            }
            TAG_BRANCH => {
                if level >= BLOCK_DEPTH {
                    return Err(fail(ParseErrorKind::ChildOfLeaf));
                }
                let mask = self.u8()?;
                if mask == 0 {
                    return Err(fail(ParseErrorKind::EmptyBranch));
                }
                let mut ch: [Node; 8] = std::array::from_fn(|_| Node::Empty);
                for (k, slot) in ch.iter_mut().enumerate() {
                    if mask & (1 << k) != 0 {
                        *slot = self.node(level + 1)?;
                    }
                }
                Ok(Node::Branch(Box::new(ch)))
            }
            t => Err(fail(ParseErrorKind::Tag(t))),
        }
    }

    fn block(&mut self) -> Result<OctreeBlock, VoxelError> {
        let start = self.pos;
        if self.take(4)? != IOCT_MAGIC {
            self.pos = start;
            return Err(self.err(ParseErrorKind::BadMagic));
        }
        let version = self.u16()?;
        if version != IOCT_VERSION {
            self.pos -= 2;
            return Err(self.err(ParseErrorKind::Version(version as u32)));
        }
        let depth = self.u8()?;
        if depth as u32 != BLOCK_DEPTH {
            self.pos -= 1;
            return Err(self.err(ParseErrorKind::WrongDepth(depth)));
        }
        let flags = self.u8()?;
        if flags & !FLAG_BODY != 0 {
            self.pos -= 1;
            return Err(self.err(ParseErrorKind::Flags(flags)));
        }
        let bx = self.i32()?;
        let by = self.i32()?;
        let root = if flags & FLAG_BODY != 0 {
            self.node(0)?
        } else {
            Node::Empty
        };
        Ok(OctreeBlock::from_root(bx, by, root))
    }
}

pub fn deserialize_block(bytes: &[u8]) -> Result<OctreeBlock, VoxelError> {
    let mut r = Reader { bytes, pos: 0 };
    let block = r.block()?;
    if r.pos != bytes.len() {
        return Err(r.err(ParseErrorKind::Trailing));
    }
    Ok(block)
}

/// Manifest of `(bx, by, length)` entries followed by the block blobs.
pub fn serialize_world(world: &VoxelWorld) -> Vec<u8> {
    let blobs: Vec<_> = world.blocks().map(|b| (b.bx, b.by, serialize_block(b))).collect();
    let mut out = Vec::new();
    out.extend_from_slice(IWRL_MAGIC);
    out.extend_from_slice(&IWRL_VERSION.to_le_bytes());
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (bx, by, blob) in &blobs {
        out.extend_from_slice(&bx.to_le_bytes());
        out.extend_from_slice(&by.to_le_bytes());
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
    }
    for (_, _, blob) in &blobs {
        out.extend_from_slice(blob);
    }
    out
}

pub fn deserialize_world(bytes: &[u8]) -> Result<VoxelWorld, VoxelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != IWRL_MAGIC {
        r.pos = 0;
        return Err(r.err(ParseErrorKind::BadMagic));
    }
    let version = r.u32()?;
    if version != IWRL_VERSION {
        r.pos -= 4;
        return Err(r.err(ParseErrorKind::Version(version)));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        entries.push((r.i32()?, r.i32()?, r.u32()? as usize));
    }
    let mut blocks = Vec::with_capacity(entries.len());
    for (bx, by, len) in entries {
        let start = r.pos;
        let blob = r.take(len)?;
        let block = deserialize_block(blob).map_err(|e| match e {
            VoxelError::Parse { offset, kind } => VoxelError::Parse {
                offset: start + offset,
                kind,
            },
            other => other,
        })?;
        if (block.bx, block.by) != (bx, by) {
            return Err(VoxelError::Parse {
                offset: start,
                kind: ParseErrorKind::BlockMismatch(bx, by, block.bx, block.by),
            });
        }
        blocks.push(block);
    }
    if r.pos != bytes.len() {
        return Err(r.err(ParseErrorKind::Trailing));
    }
    assemble_world(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::satmap::UP;
    use proptest::prelude::*;

    fn sample() -> OctreeBlock {
        let mut b = OctreeBlock::new(3, -2);
        b.set(0, 0, 0, Voxel { class: 1, normal: UP });
        b.set(63, 1, 20, Voxel { class: 8, normal: [0.6, 0.0, 0.8] });
        b
    }

    #[test]
    fn empty_block_is_header_only() {
        let bytes = serialize_block(&OctreeBlock::new(7, 8));
        assert_eq!(bytes.len(), IOCT_HEADER_LEN);
        assert_eq!(&bytes[..4], IOCT_MAGIC);
        assert_eq!(deserialize_block(&bytes).unwrap(), OctreeBlock::new(7, 8));
    }

    #[test]
    fn round_trip_sample() {
        let b = sample();
        let bytes = serialize_block(&b);
        let back = deserialize_block(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.occupied_count(), 2);
        assert_eq!(serialize_block(&back), bytes);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = serialize_block(&sample());
        for n in 0..bytes.len() {
            match deserialize_block(&bytes[..n]) {
                Err(VoxelError::Parse { offset, .. }) => assert!(offset <= n),
                other => panic!("prefix {n}: {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_malformed_trees() {
        let good = serialize_block(&sample());
        let mut wrong_depth = good.clone();
        wrong_depth[6] = 5;
        assert!(matches!(
            deserialize_block(&wrong_depth),
            Err(VoxelError::Parse { offset: 6, kind: ParseErrorKind::WrongDepth(5) })
        ));

        // a leaf directly under the root
        let mut shallow = good[..IOCT_HEADER_LEN].to_vec();
        shallow.extend_from_slice(&[TAG_BRANCH, 1, TAG_LEAF, 1]);
        shallow.extend_from_slice(&[0; 12]);
        assert!(matches!(
            deserialize_block(&shallow),
            Err(VoxelError::Parse { offset: 18, kind: ParseErrorKind::ShallowLeaf })
        ));

        // seven branches then another branch where a leaf must be
        let mut deep = good[..IOCT_HEADER_LEN].to_vec();
        for _ in 0..7 {
            deep.extend_from_slice(&[TAG_BRANCH, 1]);
        }
        assert!(matches!(
            deserialize_block(&deep),
            Err(VoxelError::Parse { offset: 28, kind: ParseErrorKind::ChildOfLeaf })
        ));

        let mut empty_branch = good[..IOCT_HEADER_LEN].to_vec();
        empty_branch.extend_from_slice(&[TAG_BRANCH, 0]);
        assert!(matches!(
            deserialize_block(&empty_branch),
            Err(VoxelError::Parse { kind: ParseErrorKind::EmptyBranch, .. })
        ));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            deserialize_block(&trailing),
            Err(VoxelError::Parse { kind: ParseErrorKind::Trailing, .. })
        ));

        let mut magic = good;
        magic[0] = b'X';
        assert!(matches!(
            deserialize_block(&magic),
            Err(VoxelError::Parse { offset: 0, kind: ParseErrorKind::BadMagic })
        ));
    }

    #[test]
    fn world_round_trip() {
        let blocks = vec![sample(), OctreeBlock::new(4, -2)];
        let w = assemble_world(blocks).unwrap();
        let bytes = serialize_world(&w);
        assert_eq!(deserialize_world(&bytes).unwrap(), w);
        assert!(deserialize_world(&bytes[..bytes.len() - 1]).is_err());
    }

    pub(crate) fn arb_block() -> impl Strategy<Value = OctreeBlock> {
        (
            -4i32..4,
            -4i32..4,
            proptest::collection::vec(
                (0usize..64, 0usize..64, 0usize..64, 0u8..12, any::<[f32; 3]>()),
                0..60,
            ),
        )
            .prop_map(|(bx, by, cells)| {
                let mut b = OctreeBlock::new(bx, by);
                for (x, y, z, class, normal) in cells {
                    let normal = normal.map(|c| if c.is_finite() { c } else { 0.0 });
                    b.set(x, y, z, Voxel { class, normal });
                }
                b
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn block_bytes_round_trip(b in arb_block()) {
            let bytes = serialize_block(&b);
            let back = deserialize_block(&bytes).unwrap();
            prop_assert!(back.is_canonical());
            prop_assert_eq!(serialize_block(&back), bytes);
            prop_assert_eq!(back, b);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let mut input = serialize_block(&OctreeBlock::new(0, 0));
            input[7] = FLAG_BODY;
            input.extend_from_slice(&bytes);
            let _ = deserialize_block(&input);
        }
    }
}
