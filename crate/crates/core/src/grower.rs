//! Best-first growth of a single adaptel.
//!
//! Starting from a seed, the pixel that adds the least information is
//! absorbed next until no candidate stays under the threshold. Pixels that
//! already belong to an earlier adaptel can be taken over when the current
//! adaptel would hold them at a lower accumulated information than the value
//! recorded for them in the [`InfoMap`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{AdaptelError, Result};
use crate::features::{FeatureGrid, PixelIndex};
use crate::infomodel::{AdaptelState, InfoModel};
use crate::segmenter::LabelMap;

/// Per-pixel accumulated information at the moment the pixel joined its
/// current adaptel; `+inf` for pixels nobody owns yet.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMap {
    values: Vec<f64>,
}

impl InfoMap {
    pub fn new(len: usize) -> Self {
        InfoMap {
            values: vec![f64::INFINITY; len],
        }
    }

    #[inline]
    pub fn get(&self, idx: PixelIndex) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: PixelIndex, bits: f64) {
        self.values[idx] = bits;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Heap entry. `BinaryHeap` is a max-heap, so the ordering is reversed:
/// lower information first, then lower pixel index.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    info: f64,
    idx: PixelIndex,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .info
            .total_cmp(&self.info)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Min-priority candidate set with decrease-key by lazy deletion.
///
/// Each pixel has at most one live value; superseded heap entries are
/// discarded when popped. Values are only ever lowered.
#[derive(Debug, Default)]
pub struct CandidateQueue {
    heap: BinaryHeap<Candidate>,
    best: Vec<f64>,
    stamp: Vec<u32>,
    generation: u32,
}

impl CandidateQueue {
    pub fn new(len: usize) -> Self {
        CandidateQueue {
            heap: BinaryHeap::new(),
            best: vec![f64::INFINITY; len],
            stamp: vec![0; len],
            generation: 1,
        }
    }

    /// Forgets all candidates in O(1) amortized.
    pub fn clear(&mut self) {
        self.heap.clear();
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }

    /// Current value for `idx`, `+inf` when not a candidate.
    #[inline]
    pub fn current(&self, idx: PixelIndex) -> f64 {
        if self.stamp[idx] == self.generation {
            self.best[idx]
        } else {
            f64::INFINITY
        }
    }

    /// Whether `idx` has been touched since the last clear.
    #[inline]
    fn touched(&self, idx: PixelIndex) -> bool {
        self.stamp[idx] == self.generation
    }

    #[inline]
    fn touch(&mut self, idx: PixelIndex) {
        if self.stamp[idx] != self.generation {
            self.stamp[idx] = self.generation;
            self.best[idx] = f64::INFINITY;
        }
    }

    /// Sets the value of `idx` to `info` if that lowers it. Returns whether
    /// the candidate changed.
    #[inline]
    pub fn offer(&mut self, idx: PixelIndex, info: f64) -> bool {
        self.touch(idx);
        if info < self.best[idx] {
            self.best[idx] = info;
            self.heap.push(Candidate { info, idx });
            true
        } else {
            false
        }
    }

    /// Removes and returns the live candidate with the smallest value (ties
    /// to the smaller index).
    #[inline]
    pub fn pop(&mut self) -> Option<(PixelIndex, f64)> {
        while let Some(Candidate { info, idx }) = self.heap.pop() {
            if self.touched(idx) && self.best[idx].to_bits() == info.to_bits() {
                self.best[idx] = f64::NEG_INFINITY;
                return Some((idx, info));
            }
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Outcome of one growth call.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowOutcome {
    Grown(GrownAdaptel),
    /// The seed already belongs to an adaptel; the caller drops it.
    SeedTaken,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrownAdaptel {
    pub state: AdaptelState,
    /// Unassigned pixels adjacent to the adaptel, in first-discovery order.
    pub frontier: Vec<PixelIndex>,
}

/// Reusable growth context for one grid. Scratch buffers are sized once and
/// reset cheaply between adaptels.
pub struct Grower<'a, M: InfoModel + ?Sized> {
    grid: &'a FeatureGrid,
    model: &'a M,
    threshold: f64,
    queue: CandidateQueue,
    examined: Vec<PixelIndex>,
    trace: Option<Vec<(PixelIndex, f64)>>,
}

impl<'a, M: InfoModel + ?Sized> Grower<'a, M> {
    pub fn new(grid: &'a FeatureGrid, model: &'a M, threshold: f64) -> Result<Self> {
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(AdaptelError::InvalidConfig(format!(
                "threshold must be > 0 bits, got {threshold}"
            )));
        }
        Ok(Grower {
            grid,
            model,
            threshold,
            queue: CandidateQueue::new(grid.len()),
            examined: Vec::new(),
            trace: None,
        })
    }

    /// Records `(pixel, accepted information)` for every absorption of the
    /// next growth calls. Used by tests.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<(PixelIndex, f64)> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Grows adaptel `id` from `seed`, updating `info` and `labels` in place.
    pub fn grow(
        &mut self,
        seed: PixelIndex,
        id: u32,
        info: &mut InfoMap,
        labels: &mut LabelMap,
    ) -> GrowOutcome {
        if labels.is_assigned(seed) {
            return GrowOutcome::SeedTaken;
        }
        let grid = self.grid;
        let shape = grid.shape();
        let mut state = AdaptelState::empty(id, grid.channels());

        self.queue.clear();
        self.examined.clear();
        self.queue
            .offer(seed, state.candidate_info(grid.pixel(seed), self.model));
        self.examined.push(seed);

        while let Some((c, e)) = self.queue.pop() {
            labels.set(c, id);
            info.set(c, e);
            state.absorb(grid.pixel(c), e);
            if let Some(trace) = self.trace.as_mut() {
                trace.push((c, e));
            }

            for n in shape.neighbors(c) {
                if labels.get_raw(n) == id {
                    continue;
                }
                if !self.queue.touched(n) {
                    self.examined.push(n);
                }
                let e = state.candidate_info(grid.pixel(n), self.model);
                if e < self.threshold && e < info.get(n) {
                    self.queue.offer(n, e);
                } else {
                    self.queue.touch(n);
                }
            }
        }

        let frontier = self
            .examined
            .iter()
            .copied()
            .filter(|&p| !labels.is_assigned(p))
            .collect();
        GrowOutcome::Grown(GrownAdaptel { state, frontier })
    }
}

/// One-shot growth of adaptel `next_id` from `seed`.
pub fn grow_adaptel<M: InfoModel + ?Sized>(
    threshold: f64,
    seed: PixelIndex,
    info: &mut InfoMap,
    labels: &mut LabelMap,
    grid: &FeatureGrid,
    model: &M,
    next_id: u32,
) -> Result<GrowOutcome> {
    if seed >= grid.len() {
        return Err(AdaptelError::InvalidConfig(format!(
            "seed {seed} outside grid of {} pixels",
            grid.len()
        )));
    }
    if labels.shape() != grid.shape() || info.len() != grid.len() {
        return Err(AdaptelError::ShapeMismatch(
            "label map, information map and grid must have the same shape".into(),
        ));
    }
    let mut grower = Grower::new(grid, model, threshold)?;
    Ok(grower.grow(seed, next_id, info, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::GridShape;
    use crate::infomodel::DoubleExponential;
    use std::f64::consts::LN_2;

    fn lightness_grid(w: usize, h: usize, values: &[f64]) -> FeatureGrid {
        let shape = GridShape::planar(w, h).unwrap();
        let data = values.iter().flat_map(|&l| [l, 0.0, 0.0]).collect();
        FeatureGrid::from_vec(shape, 3, data).unwrap()
    }

    fn fresh(grid: &FeatureGrid) -> (InfoMap, LabelMap) {
        (InfoMap::new(grid.len()), LabelMap::unassigned(grid.shape()))
    }

    fn grown(o: GrowOutcome) -> GrownAdaptel {
        match o {
            GrowOutcome::Grown(g) => g,
            GrowOutcome::SeedTaken => panic!("seed taken"),
        }
    }

    #[test]
    fn queue_orders_by_info_then_index() {
        let mut q = CandidateQueue::new(10);
        q.offer(5, 2.0);
        q.offer(3, 1.0);
        q.offer(7, 1.0);
        q.offer(1, 3.0);
        assert!(!q.offer(1, 4.0));
        assert!(q.offer(1, 0.5));
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, vec![(1, 0.5), (3, 1.0), (7, 1.0), (5, 2.0)]);
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn queue_clear_forgets_values() {
        let mut q = CandidateQueue::new(4);
        q.offer(2, 1.0);
        q.clear();
        assert_eq!(q.current(2), f64::INFINITY);
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn uniform_grid_absorbs_everything() {
        let grid = lightness_grid(3, 3, &[42.0; 9]);
        let (mut d, mut labels) = fresh(&grid);
        let m = DoubleExponential::new(10.0).unwrap();
        let g = grown(grow_adaptel(10.0, 4, &mut d, &mut labels, &grid, &m, 0).unwrap());
        assert_eq!(g.state.count, 9);
        assert_eq!(g.state.info_bits, 0.0);
        assert!(g.frontier.is_empty());
        assert!(labels.as_slice().iter().all(|&l| l == 0));
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_edge_stops_growth() {
        let grid = lightness_grid(4, 1, &[0.0, 0.0, 100.0, 100.0]);
        let (mut d, mut labels) = fresh(&grid);
        let m = DoubleExponential::new(10.0).unwrap();
        let g = grown(grow_adaptel(5.0, 0, &mut d, &mut labels, &grid, &m, 0).unwrap());
        assert_eq!(g.state.count, 2);
        assert_eq!(g.state.info_bits, 0.0);
        assert_eq!(g.frontier, vec![2]);
        assert_eq!(labels.get(0), Some(0));
        assert_eq!(labels.get(1), Some(0));
        assert_eq!(labels.get(2), None);
        // the rejected crossing would have cost 100 / (10 ln 2) bits
        assert!((m.pixel_info_bits(&[100.0, 0.0, 0.0], &[0.0; 3]) - 14.4270).abs() < 1e-3);
    }

    #[test]
    fn taken_seed_is_skipped() {
        let grid = lightness_grid(2, 1, &[0.0, 0.0]);
        let (mut d, mut labels) = fresh(&grid);
        labels.set(0, 3);
        let m = DoubleExponential::default();
        assert_eq!(
            grow_adaptel(5.0, 0, &mut d, &mut labels, &grid, &m, 4).unwrap(),
            GrowOutcome::SeedTaken
        );
    }

    #[test]
    fn nonpositive_threshold_rejected() {
        let grid = lightness_grid(2, 1, &[0.0, 0.0]);
        let (mut d, mut labels) = fresh(&grid);
        let m = DoubleExponential::default();
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                grow_adaptel(t, 0, &mut d, &mut labels, &grid, &m, 0),
                Err(AdaptelError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn lower_information_steals_pixel() {
        // Pixel 2 is owned by adaptel 0 at 9 bits. The new adaptel seeded at
        // 3 would hold it at 3 bits, which is below both D and T.
        let sigma = 10.0;
        let step = 3.0 * sigma * LN_2;
        let grid = lightness_grid(5, 1, &[0.0, 0.0, 50.0 + step, 50.0, 50.0]);
        let (mut d, mut labels) = fresh(&grid);
        for p in 0..3 {
            labels.set(p, 0);
        }
        d.set(0, 0.0);
        d.set(1, 0.0);
        d.set(2, 9.0);
        let m = DoubleExponential::new(sigma).unwrap();
        let g = grown(grow_adaptel(5.0, 3, &mut d, &mut labels, &grid, &m, 1).unwrap());
        assert_eq!(labels.get(2), Some(1));
        assert!((d.get(2) - 3.0).abs() < 1e-9);
        assert_eq!(labels.get(1), Some(0));
        assert_eq!(g.state.count, 3);
        assert!(g.frontier.is_empty());
    }

    #[test]
    fn two_step_competition_on_strip() {
        // Dark run 0..2, bright run 3..4. Adaptel 0 from pixel 0 crosses into
        // the bright run at high cost; adaptel 1 from the frontier reclaims
        // it at zero cost.
        let grid = lightness_grid(5, 1, &[0.0, 0.0, 0.0, 60.0, 60.0]);
        let (mut d, mut labels) = fresh(&grid);
        let m = DoubleExponential::new(10.0).unwrap();
        let mut grower = Grower::new(&grid, &m, 12.0).unwrap();
        let a = grown(grower.grow(0, 0, &mut d, &mut labels));
        assert_eq!(labels.get(3), Some(0));
        let cost = 60.0 / (10.0 * LN_2);
        assert!((d.get(3) - cost).abs() < 1e-9);
        assert_eq!(a.frontier, vec![4]);

        let b = grown(grower.grow(4, 1, &mut d, &mut labels));
        assert_eq!(labels.get(3), Some(1));
        assert_eq!(d.get(3), 0.0);
        assert_eq!(labels.get(2), Some(0));
        assert_eq!(b.state.count, 2);
    }

    #[test]
    fn accepted_values_below_threshold_and_monotone() {
        // Smooth ramp: no key decreases below the popped minimum, so the
        // extraction sequence is non-decreasing.
        let values: Vec<f64> = (0..64)
            .map(|i| (i % 8) as f64 * 3.0 + (i / 8) as f64)
            .collect();
        let grid = lightness_grid(8, 8, &values);
        let (mut d, mut labels) = fresh(&grid);
        let m = DoubleExponential::new(10.0).unwrap();
        let mut grower = Grower::new(&grid, &m, 12.0).unwrap();
        grower.enable_trace();
        grower.grow(0, 0, &mut d, &mut labels);
        let trace = grower.take_trace();
        assert!(trace.len() > 1);
        assert!(trace.iter().all(|&(_, e)| e < 12.0));
        assert!(trace.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
