//! Log-log trend fits for residual sequences.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Trend {
    /// Least-squares slope of `ln |y|` against `ln k`; `None` with fewer than two usable points.
    pub slope: Option<f64>,
    /// Points that cleared the noise floor.
    pub used: usize,
    pub max_abs: f64,
}

/// Fits `ln |y| = a + s·ln k` over points with `|y| > floor`.
pub fn loglog_trend(points: &[(usize, f64)], floor: f64) -> Trend {
    let max_abs = points.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(k, y)| *k > 0 && y.abs() > floor)
        .map(|(k, y)| ((*k as f64).ln(), y.abs().ln()))
        .collect();
    let used = usable.len();
    if used < 2 {
        return Trend { slope: None, used, max_abs };
    }
    let n = used as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Trend { slope: Some(sxy / sxx), used, max_abs }
}

impl Trend {
    /// True when the slope is at most `bound`, or when too few points rise above the noise floor to fit one.
    pub fn within(&self, bound: f64) -> bool {
        self.slope.is_none_or(|s| s <= bound)
    }

    pub fn describe(&self) -> String {
        match self.slope {
            Some(s) => format!("slope {s:.3} over {} points, max |y| {:.3e}", self.used, self.max_abs),
            None => format!("below noise floor (max |y| {:.3e}); no slope fitted", self.max_abs),
        }
    }
}

/// Slopes of `ln |y|` between successive k.
pub fn local_slopes(points: &[(usize, f64)]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| (w[1].1.abs().ln() - w[0].1.abs().ln()) / ((w[1].0 as f64).ln() - (w[0].0 as f64).ln()))
        .collect()
}

/// A power law keeps a constant local slope; a sequence levelling off towards a
/// limit has local slopes falling to zero. Accepts the latter: local slopes
/// non-increasing and the last one at most `bound`.
pub fn levels_off(points: &[(usize, f64)], bound: f64) -> bool {
    let s = local_slopes(points);
    s.windows(2).all(|w| w[1] <= w[0] + 1e-12) && s.last().is_none_or(|&last| last <= bound)
}
