//! Whole-grid partitioning into adaptels.
//!
//! The first adaptel grows from the grid center (or a configured seed);
//! every later one grows from the oldest still-unassigned pixel on the border
//! of earlier adaptels. Ownership competition can split an earlier adaptel,
//! so a postprocess relabels every connected component separately and can
//! fold tiny fragments into their closest neighbor.

use std::borrow::Cow;
use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use crate::error::{AdaptelError, Result};
use crate::features::{FeatureGrid, GridShape, PixelIndex};
use crate::grower::{GrowOutcome, Grower, InfoMap};
use crate::infomodel::{AdaptelState, DoubleExponential, InfoModel, DEFAULT_SIGMA};

/// Marker for pixels without an adaptel.
pub const UNASSIGNED: u32 = u32::MAX;

/// Default information threshold in bits.
pub const DEFAULT_THRESHOLD: f64 = 90.0;

/// Dense per-pixel adaptel ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    shape: GridShape,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn unassigned(shape: GridShape) -> Self {
        LabelMap {
            shape,
            labels: vec![UNASSIGNED; shape.len()],
        }
    }

    pub fn from_vec(shape: GridShape, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != shape.len() {
            return Err(AdaptelError::ShapeMismatch(format!(
                "{} labels for a grid of {} pixels",
                labels.len(),
                shape.len()
            )));
        }
        Ok(LabelMap { shape, labels })
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: PixelIndex) -> Option<u32> {
        match self.labels[idx] {
            UNASSIGNED => None,
            l => Some(l),
        }
    }

    #[inline]
    pub(crate) fn get_raw(&self, idx: PixelIndex) -> u32 {
        self.labels[idx]
    }

    #[inline]
    pub fn is_assigned(&self, idx: PixelIndex) -> bool {
        self.labels[idx] != UNASSIGNED
    }

    #[inline]
    pub fn set(&mut self, idx: PixelIndex, label: u32) {
        self.labels[idx] = label;
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.labels
    }

    pub fn is_complete(&self) -> bool {
        self.labels.iter().all(|&l| l != UNASSIGNED)
    }

    /// Number of distinct assigned labels.
    pub fn count_labels(&self) -> usize {
        let mut seen: Vec<u32> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != UNASSIGNED)
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// One past the largest assigned label, 0 when none are assigned.
    pub fn label_bound(&self) -> u32 {
        self.labels
            .iter()
            .copied()
            .filter(|&l| l != UNASSIGNED)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Labels renumbered to `0..K` in order of first appearance.
    pub fn renumbered(&self) -> LabelMap {
        let mut map = std::collections::HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == UNASSIGNED {
                    return l;
                }
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
            .collect();
        LabelMap {
            shape: self.shape,
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    /// Information bound per adaptel, in bits.
    pub threshold: f64,
    pub sigma: f64,
    /// Connected fragments smaller than this are merged into a neighbor.
    /// Zero keeps every fragment.
    pub min_fragment: usize,
    pub spatial_weight: f64,
    /// First seed; the grid center when unset.
    pub seed: Option<PixelIndex>,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            threshold: DEFAULT_THRESHOLD,
            sigma: DEFAULT_SIGMA,
            min_fragment: 0,
            spatial_weight: 0.0,
            seed: None,
        }
    }
}

impl SegmentationConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        SegmentationConfig {
            threshold,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(AdaptelError::InvalidConfig(format!(
                "threshold must be positive and finite, got {}",
                self.threshold
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(AdaptelError::InvalidConfig(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if !(self.spatial_weight.is_finite() && self.spatial_weight >= 0.0) {
            return Err(AdaptelError::InvalidConfig(format!(
                "spatial weight must be >= 0, got {}",
                self.spatial_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    /// Final labels, contiguous `0..k` in first-appearance order.
    pub labels: LabelMap,
    /// Statistics of each final segment recomputed from `labels`: pixel
    /// count, mean feature and self-information at that mean.
    pub adaptels: Vec<AdaptelState>,
    /// State of every adaptel as recorded when its growth ended, indexed by
    /// growth order. Donor states are not corrected after theft.
    pub growth: Vec<AdaptelState>,
    pub k: usize,
    /// Wall time of growth plus postprocess, in seconds.
    pub elapsed: f64,
}

/// Pops the oldest seed that is still unassigned, discarding assigned ones.
pub fn seed_queue_step(seeds: &mut VecDeque<PixelIndex>, labels: &LabelMap) -> Option<PixelIndex> {
    while let Some(s) = seeds.pop_front() {
        if !labels.is_assigned(s) {
            return Some(s);
        }
    }
    None
}

/// Raw partition: grows adaptels until every pixel is owned. Labels are growth
/// ids and may be split into several components by ownership competition.
pub fn partition<M: InfoModel + ?Sized>(
    grid: &FeatureGrid,
    model: &M,
    threshold: f64,
    first_seed: PixelIndex,
) -> Result<(LabelMap, Vec<AdaptelState>)> {
    let shape = grid.shape();
    if first_seed >= shape.len() {
        return Err(AdaptelError::InvalidConfig(format!(
            "seed {first_seed} outside grid of {} pixels",
            shape.len()
        )));
    }
    let mut grower = Grower::new(grid, model, threshold)?;
    let mut labels = LabelMap::unassigned(shape);
    let mut info = InfoMap::new(shape.len());
    let mut seeds = VecDeque::from([first_seed]);
    let mut states = Vec::new();
    let mut scan = 0;

    loop {
        let seed = match seed_queue_step(&mut seeds, &labels) {
            Some(s) => s,
            None => {
                // Border seeds ran out; promote the first unowned pixel.
                while scan < shape.len() && labels.is_assigned(scan) {
                    scan += 1;
                }
                if scan == shape.len() {
                    break;
                }
                scan
            }
        };
        let id = states.len() as u32;
        if let GrowOutcome::Grown(grown) = grower.grow(seed, id, &mut info, &mut labels) {
            states.push(grown.state);
            seeds.extend(grown.frontier);
        }
    }
    Ok((labels, states))
}

/// Segments a 2D image or a volume.
pub fn segment(grid: &FeatureGrid, config: &SegmentationConfig) -> Result<SegmentationResult> {
    config.validate()?;
    if grid.is_empty() {
        return Err(AdaptelError::Empty("feature grid has no pixels".into()));
    }
    let grid: Cow<FeatureGrid> = if config.spatial_weight > 0.0 {
        Cow::Owned(grid.clone().with_spatial(config.spatial_weight)?)
    } else {
        Cow::Borrowed(grid)
    };
    let model = DoubleExponential::new(config.sigma)?;
    let seed = config.seed.unwrap_or_else(|| grid.shape().center());

    let start = Instant::now();
    let (raw, growth) = partition(&grid, &model, config.threshold, seed)?;
    let (labels, adaptels) = enforce_connectivity(&raw, &grid, &model, config.min_fragment)?;
    let elapsed = start.elapsed().as_secs_f64();

    Ok(SegmentationResult {
        k: adaptels.len(),
        labels,
        adaptels,
        growth,
        elapsed,
    })
}

/// Segments a volume (`depth >= 2`) into supervoxels under 6-connectivity.
pub fn segment_volume(
    grid: &FeatureGrid,
    config: &SegmentationConfig,
) -> Result<SegmentationResult> {
    if !grid.shape().is_volume() {
        return Err(AdaptelError::InvalidConfig(format!(
            "volume segmentation needs depth >= 2, got {}",
            grid.shape().depth
        )));
    }
    segment(grid, config)
}

/// Connected components of equal label under grid connectivity. Returns the
/// per-pixel component id (numbered in row-major order of first pixel) and
/// the component count.
pub fn connected_components(labels: &LabelMap) -> (Vec<u32>, usize) {
    let shape = labels.shape();
    let mut comp = vec![UNASSIGNED; shape.len()];
    let mut stack = Vec::new();
    let mut next = 0u32;
    for start in 0..shape.len() {
        if comp[start] != UNASSIGNED {
            continue;
        }
        let label = labels.get_raw(start);
        comp[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for n in shape.neighbors(p) {
                if comp[n] == UNASSIGNED && labels.get_raw(n) == label {
                    comp[n] = next;
                    stack.push(n);
                }
            }
        }
        next += 1;
    }
    (comp, next as usize)
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Makes every label a single connected component.
///
/// Each component gets its own label. With `min_fragment > 0`, components
/// smaller than that are merged into the adjacent segment whose mean feature
/// is nearest (ties to the lower component id), repeatedly until the merged
/// segment is large enough or has no neighbors. Labels are renumbered by
/// first appearance and segment statistics are recomputed from the grid.
pub fn enforce_connectivity<M: InfoModel + ?Sized>(
    labels: &LabelMap,
    grid: &FeatureGrid,
    model: &M,
    min_fragment: usize,
) -> Result<(LabelMap, Vec<AdaptelState>)> {
    let shape = labels.shape();
    if shape != grid.shape() {
        return Err(AdaptelError::ShapeMismatch(
            "label map and feature grid differ in shape".into(),
        ));
    }
    if !labels.is_complete() {
        return Err(AdaptelError::InvalidConfig(
            "connectivity postprocess needs a full partition".into(),
        ));
    }
    let channels = grid.channels();
    let (comp, ncomp) = connected_components(labels);

    let mut parent: Vec<u32> = (0..ncomp as u32).collect();
    if min_fragment > 0 && ncomp > 1 {
        let mut size = vec![0usize; ncomp];
        let mut sum = vec![0.0; ncomp * channels];
        let mut adj: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); ncomp];
        for p in 0..shape.len() {
            let c = comp[p] as usize;
            size[c] += 1;
            for (s, v) in sum[c * channels..(c + 1) * channels]
                .iter_mut()
                .zip(grid.pixel(p))
            {
                *s += v;
            }
            for n in shape.neighbors(p).filter(|&n| n > p) {
                let d = comp[n];
                if d as usize != c {
                    adj[c].insert(d);
                    adj[d as usize].insert(c as u32);
                }
            }
        }
        let mean = |sum: &[f64], size: &[usize], c: usize| -> Vec<f64> {
            sum[c * channels..(c + 1) * channels]
                .iter()
                .map(|s| s / size[c] as f64)
                .collect()
        };

        for c in 0..ncomp as u32 {
            let mut r = find(&mut parent, c);
            while size[r as usize] < min_fragment {
                let own = mean(&sum, &size, r as usize);
                let mut roots: Vec<u32> = adj[r as usize]
                    .iter()
                    .map(|&n| find(&mut parent, n))
                    .filter(|&n| n != r)
                    .collect();
                roots.sort_unstable();
                roots.dedup();
                let Some(best) = roots
                    .iter()
                    .copied()
                    .map(|n| (squared_distance(&own, &mean(&sum, &size, n as usize)), n))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(_, n)| n)
                else {
                    break;
                };
                parent[r as usize] = best;
                size[best as usize] += size[r as usize];
                for k in 0..channels {
                    sum[best as usize * channels + k] += sum[r as usize * channels + k];
                }
                let moved = std::mem::take(&mut adj[r as usize]);
                adj[best as usize].extend(moved);
                r = best;
            }
        }
    }

    // Renumber roots by first appearance.
    let mut final_id = vec![UNASSIGNED; ncomp];
    let mut out = Vec::with_capacity(shape.len());
    let mut k = 0u32;
    for &c in &comp {
        let r = find(&mut parent, c) as usize;
        if final_id[r] == UNASSIGNED {
            final_id[r] = k;
            k += 1;
        }
        out.push(final_id[r]);
    }
    let out = LabelMap::from_vec(shape, out)?;
    let states = segment_stats(&out, grid, model);
    Ok((out, states))
}

/// Count, mean and self-information (at the mean) of every label in a
/// complete, contiguous label map.
pub fn segment_stats<M: InfoModel + ?Sized>(
    labels: &LabelMap,
    grid: &FeatureGrid,
    model: &M,
) -> Vec<AdaptelState> {
    let k = labels.label_bound() as usize;
    let channels = grid.channels();
    let mut states: Vec<AdaptelState> = (0..k)
        .map(|id| AdaptelState::empty(id as u32, channels))
        .collect();
    let mut sums = vec![0.0; k * channels];
    for (p, &l) in labels.as_slice().iter().enumerate() {
        let l = l as usize;
        states[l].count += 1;
        for (s, v) in sums[l * channels..(l + 1) * channels]
            .iter_mut()
            .zip(grid.pixel(p))
        {
            *s += v;
        }
    }
    for (l, st) in states.iter_mut().enumerate() {
        if st.count > 0 {
            for (m, s) in st
                .mean
                .iter_mut()
                .zip(&sums[l * channels..(l + 1) * channels])
            {
                *m = s / st.count as f64;
            }
        }
    }
    for (p, &l) in labels.as_slice().iter().enumerate() {
        let st = &mut states[l as usize];
        st.info_bits += model.pixel_info_bits(grid.pixel(p), &st.mean);
    }
    states
}
