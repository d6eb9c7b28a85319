//! Sliding-window scoring of long strips and peak picking on the score track.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::log_likelihood;
use crate::model::{Model, Series};

/// Per-window forward log-likelihoods; window k covers samples
/// `k·stride .. k·stride + width` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    pub scores: Vec<f64>,
    pub width: usize,
    pub stride: usize,
}

impl ScoreTrack {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// 0-based first sample of window `k`.
    pub fn start(&self, k: usize) -> usize {
        k * self.stride
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub window: usize,
    pub score: f64,
    /// Strictly above both neighbours (false on plateaus and track ends).
    pub peak: bool,
}

/// Number of windows of `width` samples at the given stride.
pub fn window_count(len: usize, width: usize, stride: usize) -> usize {
    if len < width || width == 0 {
        0
    } else {
        (len - width) / stride + 1
    }
}

/// Scores every window independently; infeasible windows score `-inf`.
pub fn score_windows(
    model: &Model,
    strip: &Series,
    width: usize,
    stride: usize,
) -> Result<ScoreTrack> {
    if stride == 0 {
        return Err(Error::domain("stride must be at least 1"));
    }
    if width == 0 {
        return Err(Error::domain("window width must be at least 1"));
    }
    model.check()?;
    let count = window_count(strip.len(), width, stride);
    let scores = (0..count)
        .into_par_iter()
        .map(|k| log_likelihood(model, &strip.window(k * stride, width)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScoreTrack {
        scores,
        width,
        stride,
    })
}

/// Local maxima at or above `threshold`, greedily thinned so that kept
/// windows are at least `min_separation` apart (highest score first, ties to
/// the earliest window). Sorted by window index.
pub fn find_detections(
    track: &ScoreTrack,
    threshold: f64,
    min_separation: usize,
) -> Result<Vec<Detection>> {
    if min_separation == 0 {
        return Err(Error::domain("min_separation must be at least 1"));
    }
    let s = &track.scores;
    let n = s.len();
    let mut candidates: Vec<Detection> = (0..n)
        .filter(|&k| s[k].is_finite() && s[k] >= threshold)
        .filter(|&k| (k == 0 || s[k] >= s[k - 1]) && (k + 1 == n || s[k] >= s[k + 1]))
        .map(|k| Detection {
            window: k,
            score: s[k],
            peak: k > 0 && k + 1 < n && s[k] > s[k - 1] && s[k] > s[k + 1],
        })
        .collect();
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.window.cmp(&b.window)));
    let mut kept: Vec<Detection> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|k| k.window.abs_diff(c.window) >= min_separation)
        {
            kept.push(c);
        }
    }
    kept.sort_by_key(|d| d.window);
    Ok(kept)
}
