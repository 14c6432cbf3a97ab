//! Arithmetic between media time, thumbnail indices, container tiles and
//! segment indices, plus summary planning from detected thumbnails.
//!
//! Every function here is pure; nothing touches the filesystem or network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layout of thumbnails inside thumbnail containers (sprite sheets).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThumbGeometry {
    pub tile_width: u32,
    pub tile_height: u32,
    pub grid_cols: u32,
    pub grid_rows: u32,
    pub tiles_per_container: u32,
    pub seconds_per_thumb: f64,
}

impl Default for ThumbGeometry {
    fn default() -> Self {
        Self {
            tile_width: 160,
            tile_height: 90,
            grid_cols: 5,
            grid_rows: 5,
            tiles_per_container: 25,
            seconds_per_thumb: 1.0,
        }
    }
}

impl ThumbGeometry {
    pub fn new(
        tile_width: u32,
        tile_height: u32,
        grid_cols: u32,
        grid_rows: u32,
        seconds_per_thumb: f64,
    ) -> Result<Self> {
        let geom = Self {
            tile_width,
            tile_height,
            grid_cols,
            grid_rows,
            tiles_per_container: grid_cols * grid_rows,
            seconds_per_thumb,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_width == 0 || self.tile_height == 0 || self.grid_cols == 0 || self.grid_rows == 0
        {
            return Err(Error::Validation("thumbnail geometry has a zero dimension".into()));
        }
        if self.tiles_per_container != self.grid_cols * self.grid_rows {
            return Err(Error::Validation(format!(
                "tiles_per_container {} != grid_cols {} * grid_rows {}",
                self.tiles_per_container, self.grid_cols, self.grid_rows
            )));
        }
        if !(self.seconds_per_thumb.is_finite() && self.seconds_per_thumb > 0.0) {
            return Err(Error::Validation(format!(
                "seconds_per_thumb must be positive, got {}",
                self.seconds_per_thumb
            )));
        }
        Ok(())
    }

    pub fn container_width(&self) -> u32 {
        self.tile_width * self.grid_cols
    }

    pub fn container_height(&self) -> u32 {
        self.tile_height * self.grid_rows
    }

    /// Number of thumbnails for a title of `duration` seconds.
    pub fn thumbs_for_duration(&self, duration: f64) -> u64 {
        if duration <= 0.0 {
            return 0;
        }
        (duration / self.seconds_per_thumb).ceil() as u64
    }

    /// Number of real (non-padding) tiles in container `container_index`.
    pub fn valid_tiles_in_container(&self, container_index: u64, total_thumbs: u64) -> u32 {
        let per = self.tiles_per_container as u64;
        let first = container_index * per;
        total_thumbs.saturating_sub(first).min(per) as u32
    }
}

/// Address of one thumbnail inside the container sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileLocation {
    pub container_index: u64,
    pub tile_index: u32,
    pub row: u32,
    pub col: u32,
}

impl TileLocation {
    /// Pixel offset of the tile's top-left corner inside its container.
    pub fn pixel_origin(&self, geom: &ThumbGeometry) -> (u32, u32) {
        (self.col * geom.tile_width, self.row * geom.tile_height)
    }

    pub fn thumb_index(&self, geom: &ThumbGeometry) -> u64 {
        self.container_index * geom.tiles_per_container as u64 + self.tile_index as u64
    }
}

pub fn thumb_index_for_time(t: f64, geom: &ThumbGeometry) -> Result<u64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    Ok((t / geom.seconds_per_thumb).floor() as u64)
}

/// Row-major placement: left to right, then top to bottom.
pub fn locate_tile(thumb_index: u64, geom: &ThumbGeometry) -> TileLocation {
    let per = geom.tiles_per_container as u64;
    let tile_index = (thumb_index % per) as u32;
    TileLocation {
        container_index: thumb_index / per,
        tile_index,
        row: tile_index / geom.grid_cols,
        col: tile_index % geom.grid_cols,
    }
}

pub fn container_count(total_thumbs: u64, geom: &ThumbGeometry) -> u64 {
    total_thumbs.div_ceil(geom.tiles_per_container as u64)
}

/// Per-segment durations with their prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTimeline {
    durations: Vec<f64>,
    cumulative_end: Vec<f64>,
}

impl SegmentTimeline {
    pub fn new(durations: Vec<f64>) -> Result<Self> {
        let mut cumulative_end = Vec::with_capacity(durations.len());
        let mut acc = 0.0;
        for (i, &d) in durations.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Validation(format!(
                    "segment {i} has non-positive duration {d}"
                )));
            }
            acc += d;
            cumulative_end.push(acc);
        }
        Ok(Self {
            durations,
            cumulative_end,
        })
    }

    pub fn uniform(count: usize, duration: f64) -> Result<Self> {
        Self::new(vec![duration; count])
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn cumulative_end(&self) -> &[f64] {
        &self.cumulative_end
    }

    pub fn total(&self) -> f64 {
        self.cumulative_end.last().copied().unwrap_or(0.0)
    }

    pub fn start(&self, index: usize) -> f64 {
        if index == 0 {
            0.0
        } else {
            self.cumulative_end[index - 1]
        }
    }

    pub fn end(&self, index: usize) -> f64 {
        self.cumulative_end[index]
    }

    /// Index of the segment containing `t`. Segments are half-open, so a time
    /// equal to a segment's end belongs to the next segment.
    pub fn segment_for_time(&self, t: f64) -> Result<usize> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        let total = self.total();
        if t >= total {
            return Err(Error::Range {
                value: t,
                bound: total,
            });
        }
        Ok(self.cumulative_end.partition_point(|&end| end <= t))
    }

    pub fn duration_of(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.durations[i]).sum()
    }
}

/// A maximal run of consecutive selected segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

impl Run {
    pub fn end_exclusive(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPlan {
    pub segment_indices: Vec<usize>,
    pub runs: Vec<Run>,
    pub estimated_duration: f64,
}

impl SummaryPlan {
    pub fn empty() -> Self {
        Self {
            segment_indices: Vec::new(),
            runs: Vec::new(),
            estimated_duration: 0.0,
        }
    }

    /// Build a plan from any collection of segment indices; duplicates and
    /// ordering are normalised.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>, timeline: &SegmentTimeline) -> Self {
        let mut segment_indices: Vec<usize> = indices.into_iter().collect();
        segment_indices.sort_unstable();
        segment_indices.dedup();
        let runs = runs_of(&segment_indices);
        let estimated_duration = timeline.duration_of(&segment_indices);
        Self {
            segment_indices,
            runs,
            estimated_duration,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segment_indices.is_empty()
    }
}

/// Split a sorted, deduplicated index list into maximal contiguous runs.
pub fn runs_of(sorted: &[usize]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &i in sorted {
        match runs.last_mut() {
            Some(run) if run.end_exclusive() == i => run.len += 1,
            _ => runs.push(Run { start: i, len: 1 }),
        }
    }
    runs
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Extra segments added on each side of every run.
    pub pad_segments: usize,
}

/// Segments touched by the thumbnail starting at `thumb_index`: the segment
/// holding its start time through the segment holding its end time.
pub fn segments_for_thumb(
    thumb_index: u64,
    timeline: &SegmentTimeline,
    geom: &ThumbGeometry,
) -> Result<std::ops::RangeInclusive<usize>> {
    let t = thumb_index as f64 * geom.seconds_per_thumb;
    let total = timeline.total();
    if t >= total {
        return Err(Error::Domain(format!(
            "thumbnail {thumb_index} starts at {t}s, beyond the timeline end {total}s"
        )));
    }
    let first = timeline.segment_for_time(t)?;
    let end = t + geom.seconds_per_thumb;
    let last = if end < total {
        timeline.segment_for_time(end)?
    } else {
        timeline.len() - 1
    };
    Ok(first..=last)
}

pub fn plan_summary(
    thumb_indices: impl IntoIterator<Item = u64>,
    timeline: &SegmentTimeline,
    geom: &ThumbGeometry,
    options: PlanOptions,
) -> Result<SummaryPlan> {
    let n = timeline.len();
    let mut selected = vec![false; n];
    let mut any = false;
    for thumb in thumb_indices {
        for i in segments_for_thumb(thumb, timeline, geom)? {
            selected[i] = true;
            any = true;
        }
    }
    if !any {
        return Ok(SummaryPlan::empty());
    }

    let k = options.pad_segments;
    let indices: Vec<usize> = if k == 0 {
        (0..n).filter(|&i| selected[i]).collect()
    } else {
        let mut padded = vec![false; n];
        for i in (0..n).filter(|&i| selected[i]) {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(n - 1);
            padded[lo..=hi].iter_mut().for_each(|p| *p = true);
        }
        (0..n).filter(|&i| padded[i]).collect()
    };
    Ok(SummaryPlan::from_indices(indices, timeline))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ThumbGeometry {
        ThumbGeometry::default()
    }

    #[test]
    fn default_geometry_is_five_by_five() {
        let g = geom();
        g.validate().unwrap();
        assert_eq!(g.tiles_per_container, 25);
        assert_eq!((g.container_width(), g.container_height()), (800, 450));
    }

    #[test]
    fn geometry_rejects_inconsistent_tile_count() {
        let g = ThumbGeometry {
            tiles_per_container: 24,
            ..geom()
        };
        assert!(matches!(g.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn thumb_index_floor() {
        let g = geom();
        assert_eq!(thumb_index_for_time(0.0, &g).unwrap(), 0);
        assert_eq!(thumb_index_for_time(24.99, &g).unwrap(), 24);
        assert_eq!(thumb_index_for_time(25.0, &g).unwrap(), 25);
        assert_eq!(thumb_index_for_time(137.4, &g).unwrap(), 137);
        assert!(matches!(thumb_index_for_time(-0.1, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn locate_tile_examples() {
        let g = geom();
        let at = |i| {
            let l = locate_tile(i, &g);
            (l.container_index, l.tile_index, l.row, l.col)
        };
        assert_eq!(at(0), (0, 0, 0, 0));
        assert_eq!(at(137), (5, 12, 2, 2));
        assert_eq!(at(5411), (216, 11, 2, 1));
    }

    #[test]
    fn container_count_boundaries() {
        let g = geom();
        assert_eq!(container_count(0, &g), 0);
        assert_eq!(container_count(25, &g), 1);
        assert_eq!(container_count(26, &g), 2);
        assert_eq!(container_count(5412, &g), 217);
        assert_eq!(container_count(11080, &g), 444);
    }

    #[test]
    fn valid_tiles_in_last_container() {
        let g = geom();
        assert_eq!(g.valid_tiles_in_container(0, 5412), 25);
        assert_eq!(g.valid_tiles_in_container(216, 5412), 12);
        assert_eq!(g.valid_tiles_in_container(217, 5412), 0);
    }

    #[test]
    fn segment_lookup_uniform_boundaries() {
        let tl = SegmentTimeline::uniform(30, 10.0).unwrap();
        assert_eq!(tl.segment_for_time(0.0).unwrap(), 0);
        assert_eq!(tl.segment_for_time(9.99).unwrap(), 0);
        assert_eq!(tl.segment_for_time(10.0).unwrap(), 1);
        match tl.segment_for_time(300.0) {
            Err(Error::Range { bound, .. }) => assert_eq!(bound, 300.0),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn segment_lookup_non_uniform() {
        let tl = SegmentTimeline::new(vec![9.6, 10.0, 10.4]).unwrap();
        assert_eq!(tl.segment_for_time(19.7).unwrap(), 2);
        assert_eq!(tl.segment_for_time(19.5).unwrap(), 1);
    }

    #[test]
    fn timeline_rejects_zero_duration() {
        assert!(SegmentTimeline::new(vec![10.0, 0.0]).is_err());
    }

    #[test]
    fn plan_from_scattered_detections() {
        let tl = SegmentTimeline::uniform(30, 10.0).unwrap();
        let plan = plan_summary([12, 13, 47], &tl, &geom(), PlanOptions::default()).unwrap();
        assert_eq!(plan.segment_indices, vec![1, 4]);
        assert_eq!(plan.runs, vec![Run { start: 1, len: 1 }, Run { start: 4, len: 1 }]);
        assert_eq!(plan.estimated_duration, 20.0);
    }

    #[test]
    fn boundary_thumb_pulls_two_segments() {
        let tl = SegmentTimeline::uniform(30, 10.0).unwrap();
        let plan = plan_summary([9], &tl, &geom(), PlanOptions::default()).unwrap();
        assert_eq!(plan.segment_indices, vec![0, 1]);
        assert_eq!(plan.runs, vec![Run { start: 0, len: 2 }]);
    }

    #[test]
    fn last_thumb_clamps_to_last_segment() {
        let tl = SegmentTimeline::uniform(3, 10.0).unwrap();
        let plan = plan_summary([29], &tl, &geom(), PlanOptions::default()).unwrap();
        assert_eq!(plan.segment_indices, vec![2]);
    }

    #[test]
    fn empty_detections_give_empty_plan() {
        let tl = SegmentTimeline::uniform(3, 10.0).unwrap();
        let plan = plan_summary([], &tl, &geom(), PlanOptions::default()).unwrap();
        assert!(plan.is_empty());
        assert!(plan.runs.is_empty());
    }

    #[test]
    fn out_of_range_thumb_is_domain_error() {
        let tl = SegmentTimeline::uniform(3, 10.0).unwrap();
        let err = plan_summary([30], &tl, &geom(), PlanOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn padding_extends_and_merges_runs() {
        let tl = SegmentTimeline::uniform(30, 10.0).unwrap();
        let opts = PlanOptions { pad_segments: 1 };
        let plan = plan_summary([12, 47], &tl, &geom(), opts).unwrap();
        assert_eq!(plan.segment_indices, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(plan.runs, vec![Run { start: 0, len: 6 }]);

        let plan = plan_summary([5, 295], &tl, &geom(), PlanOptions { pad_segments: 2 }).unwrap();
        assert_eq!(plan.segment_indices, vec![0, 1, 2, 27, 28, 29]);
    }

    #[test]
    fn runs_partition_indices() {
        assert_eq!(
            runs_of(&[0, 1, 2, 5, 7, 8]),
            vec![
                Run { start: 0, len: 3 },
                Run { start: 5, len: 1 },
                Run { start: 7, len: 2 }
            ]
        );
        assert!(runs_of(&[]).is_empty());
    }
}
