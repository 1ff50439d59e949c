//! Macroblock-level dependency rules for H.264 baseline decoding.
//!
//! A macroblock is a 16x16 pixel unit decoded in scanline order. Intra
//! prediction may read from the top-left, top, top-right and left neighbors
//! of the same frame. Motion compensation reads a rectangle from a previously
//! decoded frame, displaced by a quarter-pel motion vector and widened by the
//! interpolation filter support whenever the vector has a fractional part.

mod stream;

use std::fmt;

use thiserror::Error;

pub use stream::{build_epgs, EpgStream, ImpactReport, MbLabel, StreamError};

/// Macroblock edge length in pixels.
pub const MB_SIZE: u32 = 16;

/// Maximum number of partitions in one macroblock.
pub const MAX_PARTITIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("frame grid must be at least 1x1 macroblocks, got {0}x{1}")]
    InvalidGrid(u32, u32),
    #[error("macroblock {pos} lies outside the {grid} grid")]
    OutOfGrid { pos: MbPos, grid: FrameGrid },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// Frame dimensions in macroblocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameGrid {
    width_mb: u32,
    height_mb: u32,
}

impl FrameGrid {
    pub fn new(width_mb: u32, height_mb: u32) -> Result<Self, ModelError> {
        if width_mb == 0 || height_mb == 0 {
            return Err(ModelError::InvalidGrid(width_mb, height_mb));
        }
        Ok(FrameGrid {
            width_mb,
            height_mb,
        })
    }

    pub fn width_mb(&self) -> u32 {
        self.width_mb
    }

    pub fn height_mb(&self) -> u32 {
        self.height_mb
    }

    pub fn mb_count(&self) -> usize {
        self.width_mb as usize * self.height_mb as usize
    }

    pub fn contains(&self, pos: MbPos) -> bool {
        pos.x < self.width_mb && pos.y < self.height_mb
    }

    /// Position of `pos` in scanline order.
    pub fn scan_index(&self, pos: MbPos) -> usize {
        pos.y as usize * self.width_mb as usize + pos.x as usize
    }

    pub fn pos_at(&self, scan_index: usize) -> MbPos {
        let w = self.width_mb as usize;
        MbPos::new((scan_index % w) as u32, (scan_index / w) as u32)
    }

    /// All positions in scanline order.
    pub fn positions(&self) -> impl Iterator<Item = MbPos> + '_ {
        (0..self.mb_count()).map(|i| self.pos_at(i))
    }

    fn check(&self, pos: MbPos) -> Result<(), ModelError> {
        if self.contains(pos) {
            Ok(())
        } else {
            Err(ModelError::OutOfGrid { pos, grid: *self })
        }
    }
}

impl fmt::Display for FrameGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width_mb, self.height_mb)
    }
}

/// Macroblock coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MbPos {
    pub x: u32,
    pub y: u32,
}

impl MbPos {
    pub fn new(x: u32, y: u32) -> Self {
        MbPos { x, y }
    }
}

impl fmt::Display for MbPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntraNeighbor {
    TopLeft,
    Top,
    TopRight,
    Left,
}

impl IntraNeighbor {
    /// Canonical order, also used by the trace format.
    pub const ALL: [IntraNeighbor; 4] = [
        IntraNeighbor::TopLeft,
        IntraNeighbor::Top,
        IntraNeighbor::TopRight,
        IntraNeighbor::Left,
    ];

    fn bit(self) -> u8 {
        match self {
            IntraNeighbor::TopLeft => 1,
            IntraNeighbor::Top => 2,
            IntraNeighbor::TopRight => 4,
            IntraNeighbor::Left => 8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IntraNeighbor::TopLeft => "TL",
            IntraNeighbor::Top => "T",
            IntraNeighbor::TopRight => "TR",
            IntraNeighbor::Left => "L",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.label() == label)
    }

    fn offset(self) -> (i64, i64) {
        match self {
            IntraNeighbor::TopLeft => (-1, -1),
            IntraNeighbor::Top => (0, -1),
            IntraNeighbor::TopRight => (1, -1),
            IntraNeighbor::Left => (-1, 0),
        }
    }

    /// The neighbor's position, or `None` when it falls outside the grid.
    pub fn resolve(self, grid: FrameGrid, pos: MbPos) -> Option<MbPos> {
        let (dx, dy) = self.offset();
        let x = i64::from(pos.x) + dx;
        let y = i64::from(pos.y) + dy;
        if x < 0 || y < 0 || x >= i64::from(grid.width_mb) || y >= i64::from(grid.height_mb) {
            return None;
        }
        Some(MbPos::new(x as u32, y as u32))
    }
}

/// Subset of intra neighbors referenced by a macroblock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IntraRefs(u8);

impl IntraRefs {
    pub const NONE: IntraRefs = IntraRefs(0);
    pub const ALL: IntraRefs = IntraRefs(0b1111);

    /// Builds a subset from its 4-bit mask (bit order TL, T, TR, L).
    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits <= 0b1111).then_some(IntraRefs(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, n: IntraNeighbor) -> bool {
        self.0 & n.bit() != 0
    }

    pub fn insert(&mut self, n: IntraNeighbor) {
        self.0 |= n.bit();
    }

    pub fn with(mut self, n: IntraNeighbor) -> Self {
        self.insert(n);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in canonical order.
    pub fn iter(self) -> impl Iterator<Item = IntraNeighbor> {
        IntraNeighbor::ALL.into_iter().filter(move |n| self.contains(*n))
    }
}

impl FromIterator<IntraNeighbor> for IntraRefs {
    fn from_iter<I: IntoIterator<Item = IntraNeighbor>>(iter: I) -> Self {
        iter.into_iter().fold(IntraRefs::NONE, IntraRefs::with)
    }
}

/// Legal motion-compensation block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionShape {
    S16x16,
    S16x8,
    S8x16,
    S8x8,
    S8x4,
    S4x8,
    S4x4,
}

impl PartitionShape {
    pub const ALL: [PartitionShape; 7] = [
        PartitionShape::S16x16,
        PartitionShape::S16x8,
        PartitionShape::S8x16,
        PartitionShape::S8x8,
        PartitionShape::S8x4,
        PartitionShape::S4x8,
        PartitionShape::S4x4,
    ];

    pub fn width(self) -> u32 {
        self.dims().0
    }

    pub fn height(self) -> u32 {
        self.dims().1
    }

    pub fn dims(self) -> (u32, u32) {
        match self {
            PartitionShape::S16x16 => (16, 16),
            PartitionShape::S16x8 => (16, 8),
            PartitionShape::S8x16 => (8, 16),
            PartitionShape::S8x8 => (8, 8),
            PartitionShape::S8x4 => (8, 4),
            PartitionShape::S4x8 => (4, 8),
            PartitionShape::S4x4 => (4, 4),
        }
    }

    pub fn from_dims(w: u32, h: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.dims() == (w, h))
    }

    /// Offsets at which this shape may be placed inside a macroblock.
    pub fn placements(self) -> impl Iterator<Item = (u32, u32)> {
        let (w, h) = self.dims();
        (0..MB_SIZE / h).flat_map(move |j| (0..MB_SIZE / w).map(move |i| (i * w, j * h)))
    }
}

/// One motion-compensated area of a macroblock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InterPartition {
    /// Pixel offset inside the macroblock.
    pub x_off: u32,
    pub y_off: u32,
    pub shape: PartitionShape,
    /// 1 = the previously decoded frame, k = k frames back.
    pub ref_offset: u32,
    /// Motion vector in quarter-pel units.
    pub mv_qx: i32,
    pub mv_qy: i32,
}

impl InterPartition {
    pub fn new(
        x_off: u32,
        y_off: u32,
        shape: PartitionShape,
        ref_offset: u32,
        mv_qx: i32,
        mv_qy: i32,
    ) -> Self {
        InterPartition {
            x_off,
            y_off,
            shape,
            ref_offset,
            mv_qx,
            mv_qy,
        }
    }

    /// Checks placement and reference index of a single partition.
    ///
    /// Partitions must lie inside the macroblock and sit at an offset that is
    /// a multiple of their own size, as in the standard's partition layouts.
    pub fn validate(&self) -> Result<(), ModelError> {
        let (w, h) = self.shape.dims();
        if self.x_off + w > MB_SIZE || self.y_off + h > MB_SIZE {
            return Err(ModelError::InvalidPartition(format!(
                "{w}x{h} at ({}, {}) exceeds the macroblock",
                self.x_off, self.y_off
            )));
        }
        if !self.x_off.is_multiple_of(w) || !self.y_off.is_multiple_of(h) {
            return Err(ModelError::InvalidPartition(format!(
                "{w}x{h} at ({}, {}) is not aligned to its size",
                self.x_off, self.y_off
            )));
        }
        if self.ref_offset == 0 {
            return Err(ModelError::InvalidPartition(
                "reference offset must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Mask over the 16 4x4 cells of a macroblock, row-major.
    fn cell_mask(&self) -> u16 {
        let (w, h) = self.shape.dims();
        let mut mask = 0u16;
        for cy in self.y_off / 4..(self.y_off + h) / 4 {
            for cx in self.x_off / 4..(self.x_off + w) / 4 {
                mask |= 1 << (cy * 4 + cx);
            }
        }
        mask
    }
}

/// Checks that `parts` is a legal partitioning of one macroblock: at most
/// 16 valid partitions that are pairwise disjoint and cover all 256 pixels.
pub fn validate_partitions(parts: &[InterPartition]) -> Result<(), ModelError> {
    if parts.is_empty() || parts.len() > MAX_PARTITIONS {
        return Err(ModelError::InvalidPartition(format!(
            "a macroblock needs 1 to {MAX_PARTITIONS} partitions, got {}",
            parts.len()
        )));
    }
    let mut covered = 0u16;
    for p in parts {
        p.validate()?;
        let mask = p.cell_mask();
        if covered & mask != 0 {
            return Err(ModelError::InvalidPartition(format!(
                "partition at ({}, {}) overlaps another partition",
                p.x_off, p.y_off
            )));
        }
        covered |= mask;
    }
    if covered != u16::MAX {
        return Err(ModelError::InvalidPartition(
            "partitions do not cover the whole macroblock".into(),
        ));
    }
    Ok(())
}

/// Extra full-pel samples read around a block whose motion vector has a
/// fractional component, per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpolationMargin {
    pub before: u32,
    pub after: u32,
}

impl Default for InterpolationMargin {
    /// Support of the 6-tap luma half-sample filter.
    fn default() -> Self {
        InterpolationMargin {
            before: 2,
            after: 3,
        }
    }
}

/// Dependency rules with a configurable interpolation margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DependencyModel {
    pub margin: InterpolationMargin,
}

impl DependencyModel {
    pub fn new(margin: InterpolationMargin) -> Self {
        DependencyModel { margin }
    }

    /// Neighbors of `pos` referenced through `refs`, clipped to the grid.
    /// Returned in canonical neighbor order; all precede `pos` in scanline order.
    pub fn intra_edges(
        &self,
        grid: FrameGrid,
        pos: MbPos,
        refs: IntraRefs,
    ) -> Result<Vec<MbPos>, ModelError> {
        grid.check(pos)?;
        Ok(refs.iter().filter_map(|n| n.resolve(grid, pos)).collect())
    }

    /// Macroblocks of the reference frame that contain at least one sample
    /// read by partition `p` of the macroblock at `mb`, in scanline order.
    ///
    /// Samples outside the frame are clamped to the border, so the result is
    /// never empty and always inside the grid.
    pub fn inter_coverage(
        &self,
        grid: FrameGrid,
        mb: MbPos,
        p: &InterPartition,
    ) -> Result<Vec<MbPos>, ModelError> {
        grid.check(mb)?;
        p.validate()?;
        let (w, h) = p.shape.dims();
        let (x0, x1) = self.mb_span(
            mb.x * MB_SIZE + p.x_off,
            w,
            p.mv_qx,
            grid.width_mb * MB_SIZE,
        );
        let (y0, y1) = self.mb_span(
            mb.y * MB_SIZE + p.y_off,
            h,
            p.mv_qy,
            grid.height_mb * MB_SIZE,
        );
        let mut out = Vec::with_capacity(((x1 - x0 + 1) * (y1 - y0 + 1)) as usize);
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.push(MbPos::new(x, y));
            }
        }
        Ok(out)
    }

    /// Inclusive macroblock range touched along one axis.
    fn mb_span(&self, origin: u32, size: u32, mv_q: i32, extent: u32) -> (u32, u32) {
        let base = i64::from(origin) + i64::from(mv_q.div_euclid(4));
        let (mut lo, mut hi) = (base, base + i64::from(size) - 1);
        if mv_q.rem_euclid(4) != 0 {
            lo -= i64::from(self.margin.before);
            hi += i64::from(self.margin.after);
        }
        let last = i64::from(extent) - 1;
        let lo = lo.clamp(0, last) as u32;
        let hi = hi.clamp(0, last) as u32;
        (lo / MB_SIZE, hi / MB_SIZE)
    }
}

/// [`DependencyModel::intra_edges`] with the default model.
pub fn intra_edges(grid: FrameGrid, pos: MbPos, refs: IntraRefs) -> Result<Vec<MbPos>, ModelError> {
    DependencyModel::default().intra_edges(grid, pos, refs)
}

/// [`DependencyModel::inter_coverage`] with the default margin.
pub fn inter_coverage(
    grid: FrameGrid,
    mb: MbPos,
    p: &InterPartition,
) -> Result<Vec<MbPos>, ModelError> {
    DependencyModel::default().inter_coverage(grid, mb, p)
}

/// Prediction metadata of one macroblock.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Prediction {
    Intra(IntraRefs),
    Inter(Vec<InterPartition>),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: u32, h: u32) -> FrameGrid {
        FrameGrid::new(w, h).unwrap()
    }

    fn set(v: &[(u32, u32)]) -> Vec<MbPos> {
        v.iter().map(|&(x, y)| MbPos::new(x, y)).collect()
    }

    /// Brute-force reference: enumerate every clamped sample and collect the
    /// macroblocks they fall in.
    fn coverage_by_enumeration(
        g: FrameGrid,
        mb: MbPos,
        p: &InterPartition,
        margin: InterpolationMargin,
    ) -> Vec<MbPos> {
        let (w, h) = p.shape.dims();
        let axis = |origin: u32, size: u32, mv: i32, extent: u32| -> Vec<u32> {
            let int = mv.div_euclid(4) as i64;
            let frac = mv.rem_euclid(4) != 0;
            let (b, a) = if frac {
                (margin.before as i64, margin.after as i64)
            } else {
                (0, 0)
            };
            let mut mbs: Vec<u32> = (-b..size as i64 + a)
                .map(|k| (origin as i64 + int + k).clamp(0, extent as i64 - 1) as u32 / 16)
                .collect();
            mbs.sort_unstable();
            mbs.dedup();
            mbs
        };
        let xs = axis(mb.x * 16 + p.x_off, w, p.mv_qx, g.width_mb() * 16);
        let ys = axis(mb.y * 16 + p.y_off, h, p.mv_qy, g.height_mb() * 16);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| MbPos::new(x, y)))
            .collect()
    }

    #[test]
    fn grid_rejects_zero() {
        assert_eq!(FrameGrid::new(0, 3), Err(ModelError::InvalidGrid(0, 3)));
        assert_eq!(grid(4, 3).mb_count(), 12);
        assert_eq!(grid(4, 3).pos_at(5), MbPos::new(1, 1));
    }

    #[test]
    fn intra_corner_has_no_neighbors() {
        assert!(intra_edges(grid(5, 5), MbPos::new(0, 0), IntraRefs::ALL)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn intra_interior_has_four() {
        let e = intra_edges(grid(6, 6), MbPos::new(3, 2), IntraRefs::ALL).unwrap();
        assert_eq!(e, set(&[(2, 1), (3, 1), (4, 1), (2, 2)]));
    }

    #[test]
    fn intra_top_right_clipped_at_border() {
        let g = grid(5, 4);
        let refs = IntraRefs::NONE.with(IntraNeighbor::TopRight);
        assert!(intra_edges(g, MbPos::new(4, 1), refs).unwrap().is_empty());
        assert_eq!(
            intra_edges(g, MbPos::new(5, 1), refs),
            Err(ModelError::OutOfGrid {
                pos: MbPos::new(5, 1),
                grid: g
            })
        );
    }

    #[test]
    fn aligned_zero_motion_stays_in_place() {
        let p = InterPartition::new(0, 0, PartitionShape::S16x16, 1, 0, 0);
        assert_eq!(
            inter_coverage(grid(4, 4), MbPos::new(1, 1), &p).unwrap(),
            set(&[(1, 1)])
        );
    }

    #[test]
    fn integer_pel_shift_covers_four() {
        // +4 qpel = +1 px: samples [1,16] in both axes
        let p = InterPartition::new(0, 0, PartitionShape::S16x16, 1, 4, 4);
        let g = grid(4, 4);
        let got = inter_coverage(g, MbPos::new(0, 0), &p).unwrap();
        assert_eq!(got, set(&[(0, 0), (1, 0), (0, 1), (1, 1)]));
        assert_eq!(
            got,
            coverage_by_enumeration(g, MbPos::new(0, 0), &p, Default::default())
        );
    }

    #[test]
    fn half_pel_window_covers_four() {
        // origin (32,32), mv -2 qpel: integer part -1, window [29, 37]
        let p = InterPartition::new(0, 0, PartitionShape::S4x4, 1, -2, -2);
        let g = grid(6, 6);
        let got = inter_coverage(g, MbPos::new(2, 2), &p).unwrap();
        assert_eq!(got, set(&[(1, 1), (2, 1), (1, 2), (2, 2)]));
        assert_eq!(
            got,
            coverage_by_enumeration(g, MbPos::new(2, 2), &p, Default::default())
        );
    }

    #[test]
    fn out_of_frame_vectors_clamp() {
        let g = grid(3, 2);
        let p = InterPartition::new(0, 0, PartitionShape::S8x8, 1, -4000, 9001);
        let got = inter_coverage(g, MbPos::new(1, 0), &p).unwrap();
        assert_eq!(got, set(&[(0, 1)]));
        let p = InterPartition::new(8, 8, PartitionShape::S8x8, 1, 4001, -4003);
        assert_eq!(inter_coverage(g, MbPos::new(0, 1), &p).unwrap(), set(&[(2, 0)]));
    }

    #[test]
    fn coverage_matches_enumeration_on_sweep() {
        let g = grid(5, 4);
        let margins = [
            InterpolationMargin::default(),
            InterpolationMargin {
                before: 0,
                after: 0,
            },
            InterpolationMargin {
                before: 5,
                after: 9,
            },
        ];
        for margin in margins {
            let model = DependencyModel::new(margin);
            for shape in PartitionShape::ALL {
                for (xo, yo) in shape.placements() {
                    for mv in (-90..=90).step_by(7) {
                        for mb in [MbPos::new(0, 0), MbPos::new(2, 1), MbPos::new(4, 3)] {
                            let p = InterPartition::new(xo, yo, shape, 1, mv, -mv / 3);
                            assert_eq!(
                                model.inter_coverage(g, mb, &p).unwrap(),
                                coverage_by_enumeration(g, mb, &p, margin)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn partition_validation() {
        let whole = [InterPartition::new(0, 0, PartitionShape::S16x16, 1, 0, 0)];
        validate_partitions(&whole).unwrap();

        let halves = [
            InterPartition::new(0, 0, PartitionShape::S16x8, 1, 0, 0),
            InterPartition::new(0, 8, PartitionShape::S16x8, 2, 0, 0),
        ];
        validate_partitions(&halves).unwrap();

        let overlap = [
            InterPartition::new(0, 0, PartitionShape::S16x8, 1, 0, 0),
            InterPartition::new(0, 0, PartitionShape::S16x8, 1, 0, 0),
        ];
        assert!(validate_partitions(&overlap).is_err());
        assert!(validate_partitions(&halves[..1]).is_err());
        assert!(validate_partitions(&[]).is_err());

        let misaligned = InterPartition::new(4, 0, PartitionShape::S8x8, 1, 0, 0);
        assert!(misaligned.validate().is_err());
        let outside = InterPartition::new(12, 0, PartitionShape::S8x4, 1, 0, 0);
        assert!(outside.validate().is_err());
        let no_ref = InterPartition::new(0, 0, PartitionShape::S16x16, 0, 0, 0);
        assert!(no_ref.validate().is_err());

        let quarters: Vec<_> = PartitionShape::S4x4
            .placements()
            .map(|(x, y)| InterPartition::new(x, y, PartitionShape::S4x4, 1, 0, 0))
            .collect();
        assert_eq!(quarters.len(), 16);
        validate_partitions(&quarters).unwrap();
    }

    #[test]
    fn shape_lookup() {
        assert_eq!(PartitionShape::from_dims(8, 4), Some(PartitionShape::S8x4));
        assert_eq!(PartitionShape::from_dims(7, 4), None);
        assert_eq!(PartitionShape::S8x16.placements().count(), 2);
    }

    #[test]
    fn intra_refs_set_ops() {
        let r: IntraRefs = [IntraNeighbor::Left, IntraNeighbor::TopLeft]
            .into_iter()
            .collect();
        assert_eq!(r.len(), 2);
        assert_eq!(
            r.iter().collect::<Vec<_>>(),
            vec![IntraNeighbor::TopLeft, IntraNeighbor::Left]
        );
        assert_eq!(IntraRefs::from_bits(16), None);
        assert_eq!(IntraNeighbor::from_label("TR"), Some(IntraNeighbor::TopRight));
    }
}
