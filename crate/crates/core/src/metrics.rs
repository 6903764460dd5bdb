//! Segmentation quality against ground truth: corrected under-segmentation
//! error (CUSE), achievable segmentation accuracy (ASA), boundary recall,
//! boundary precision and their F-measure.
//!
//! Boundary matching uses a Chebyshev window of radius `epsilon` (side
//! `2 * epsilon + 1`, also along `t` for volumes). Recall matches ground
//! truth boundary pixels against the segmentation, precision the other way.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{AdaptelError, Result};
use crate::features::GridShape;
use crate::segmenter::LabelMap;

/// Default boundary matching tolerance in pixels.
pub const DEFAULT_EPSILON: usize = 2;

/// Ground truth segmentations are plain label maps.
pub type GroundTruth = LabelMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMap {
    shape: GridShape,
    flags: Vec<bool>,
}

impl BoundaryMap {
    pub fn from_flags(shape: GridShape, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != shape.len() {
            return Err(AdaptelError::ShapeMismatch(format!(
                "{} boundary flags for {} pixels",
                flags.len(),
                shape.len()
            )));
        }
        Ok(BoundaryMap { shape, flags })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.flags[idx]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }
}

/// Flags a pixel when its label differs from its +x, +y or +t neighbor.
pub fn boundary_map(labels: &LabelMap) -> BoundaryMap {
    let shape = labels.shape();
    let l = labels.as_slice();
    let plane = shape.width * shape.height;
    let flags = (0..shape.len())
        .map(|p| {
            let (x, y, t) = shape.coords(p);
            (x + 1 < shape.width && l[p] != l[p + 1])
                || (y + 1 < shape.height && l[p] != l[p + shape.width])
                || (t + 1 < shape.depth && l[p] != l[p + plane])
        })
        .collect();
    BoundaryMap { shape, flags }
}

fn check_shapes(a: GridShape, b: GridShape) -> Result<()> {
    if a != b {
        return Err(AdaptelError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.depth, b.width, b.height, b.depth
        )));
    }
    Ok(())
}

/// `sum_k |S_k ∩ G*(S_k)|`, where `G*(S_k)` is the ground-truth segment with
/// the largest overlap (ties to the smaller ground-truth label).
pub fn best_overlap_total(seg: &LabelMap, gt: &LabelMap) -> Result<usize> {
    Ok(dominant_ground_truth(seg, gt)?
        .values()
        .map(|&(_, n)| n)
        .sum())
}

/// For every segment label, the dominant ground-truth label and the size of
/// the overlap.
pub fn dominant_ground_truth(seg: &LabelMap, gt: &LabelMap) -> Result<HashMap<u32, (u32, usize)>> {
    check_shapes(seg.shape(), gt.shape())?;
    let mut table: HashMap<(u32, u32), usize> = HashMap::new();
    for (&s, &g) in seg.as_slice().iter().zip(gt.as_slice()) {
        *table.entry((s, g)).or_insert(0) += 1;
    }
    let mut best: HashMap<u32, (u32, usize)> = HashMap::new();
    for ((s, g), n) in table {
        best.entry(s)
            .and_modify(|b| {
                if n > b.1 || (n == b.1 && g < b.0) {
                    *b = (g, n);
                }
            })
            .or_insert((g, n));
    }
    Ok(best)
}

/// Corrected under-segmentation error: the fraction of pixels lying outside
/// their segment's dominant ground-truth region.
pub fn cuse(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let total = best_overlap_total(seg, gt)?;
    let n = seg.len();
    Ok((n - total) as f64 / n as f64)
}

/// Achievable segmentation accuracy, the complement of [`cuse`].
pub fn asa(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let total = best_overlap_total(seg, gt)?;
    Ok(total as f64 / seg.len() as f64)
}

/// Per-axis sliding-window OR, giving the Chebyshev dilation of `flags`.
fn dilate(map: &BoundaryMap, radius: usize) -> Vec<bool> {
    let shape = map.shape;
    let mut cur: Vec<bool> = map.flags.clone();
    if radius == 0 {
        return cur;
    }
    let axes = [
        (shape.width, 1usize),
        (shape.height, shape.width),
        (shape.depth, shape.width * shape.height),
    ];
    let mut next = vec![false; cur.len()];
    for (len, stride) in axes {
        if len == 1 {
            continue;
        }
        // Line starts: every index whose coordinate along this axis is 0.
        for start in 0..cur.len() {
            if (start / stride) % len != 0 {
                continue;
            }
            // Count of set flags in the window [i - r, i + r].
            let mut count = 0usize;
            for j in 0..radius.min(len - 1) + 1 {
                count += cur[start + j * stride] as usize;
            }
            for i in 0..len {
                next[start + i * stride] = count > 0;
                if i + radius + 1 < len {
                    count += cur[start + (i + radius + 1) * stride] as usize;
                }
                if i >= radius {
                    count -= cur[start + (i - radius) * stride] as usize;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Number of set pixels in `source` that have a set pixel of `target` within
/// Chebyshev distance `epsilon`.
pub fn matched_count(source: &BoundaryMap, target: &BoundaryMap, epsilon: usize) -> Result<usize> {
    check_shapes(source.shape, target.shape)?;
    let near = dilate(target, epsilon);
    Ok(source
        .flags
        .iter()
        .zip(&near)
        .filter(|(&s, &n)| s && n)
        .count())
}

/// Fraction of ground-truth boundary pixels with a segmentation boundary
/// within `epsilon`. 1 when the ground truth has no boundary.
pub fn boundary_recall(seg_b: &BoundaryMap, gt_b: &BoundaryMap, epsilon: usize) -> Result<f64> {
    let tp = matched_count(gt_b, seg_b, epsilon)?;
    let total = gt_b.count();
    Ok(if total == 0 {
        1.0
    } else {
        tp as f64 / total as f64
    })
}

/// Fraction of segmentation boundary pixels with a ground-truth boundary
/// within `epsilon`. 0 when the segmentation has no boundary.
pub fn boundary_precision(seg_b: &BoundaryMap, gt_b: &BoundaryMap, epsilon: usize) -> Result<f64> {
    let tp = matched_count(seg_b, gt_b, epsilon)?;
    let total = seg_b.count();
    Ok(if total == 0 {
        0.0
    } else {
        tp as f64 / total as f64
    })
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub cuse: f64,
    pub asa: f64,
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub k_segments: usize,
    pub epsilon: usize,
}

/// Evaluates a segmentation against one ground truth.
pub fn evaluate(seg: &LabelMap, gt: &GroundTruth, epsilon: usize) -> Result<MetricsReport> {
    evaluate_many(seg, std::slice::from_ref(gt), epsilon)
}

/// Evaluates against several ground truths of the same image. CUSE, ASA,
/// recall and precision are averaged over ground truths; the F-measure is
/// taken from the averaged precision and recall.
pub fn evaluate_many(seg: &LabelMap, gts: &[GroundTruth], epsilon: usize) -> Result<MetricsReport> {
    if gts.is_empty() {
        return Err(AdaptelError::Empty("no ground truth given".into()));
    }
    let seg_b = boundary_map(seg);
    let n = seg.len();
    let (mut cuse_sum, mut asa_sum, mut r_sum, mut p_sum) = (0.0, 0.0, 0.0, 0.0);
    for gt in gts {
        let total = best_overlap_total(seg, gt)?;
        cuse_sum += (n - total) as f64 / n as f64;
        asa_sum += total as f64 / n as f64;
        let gt_b = boundary_map(gt);
        r_sum += boundary_recall(&seg_b, &gt_b, epsilon)?;
        p_sum += boundary_precision(&seg_b, &gt_b, epsilon)?;
    }
    let m = gts.len() as f64;
    let (recall, precision) = (r_sum / m, p_sum / m);
    Ok(MetricsReport {
        cuse: cuse_sum / m,
        asa: asa_sum / m,
        recall,
        precision,
        f_measure: f_measure(precision, recall),
        k_segments: seg.count_labels(),
        epsilon,
    })
}
