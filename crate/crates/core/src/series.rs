//! Convergence evidence for series of positive terms observed on a finite prefix.
//!
//! Decision rule, applied to the last quartile of the observed terms:
//! 1. term ratios all `<= 0.95` → converges (geometric tail bound attached);
//! 2. term ratios all `>= 1` → diverges (terms do not decay);
//! 3. otherwise the log–log slope `s` of term against index decides:
//!    `s < -1.1` converges, `s > -0.9` diverges, anything between is inconclusive.

use serde::{Deserialize, Serialize};

pub const RATIO_CONVERGENT: f64 = 0.95;
pub const SLOPE_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FiniteSupport,
    Ratio,
    LogLogSlope,
    TooFewTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvidence {
    pub partial_sum: f64,
    pub terms: usize,
    pub trend: Trend,
    pub method: Method,
    /// Max ratio (ratio method) or fitted slope (log–log method).
    pub statistic: Option<f64>,
    /// Estimated remainder beyond the observed terms, when convergent.
    pub tail_estimate: Option<f64>,
}

impl SeriesEvidence {
    pub fn converges(&self) -> bool {
        self.trend == Trend::Converges
    }

    pub fn diverges(&self) -> bool {
        self.trend == Trend::Diverges
    }

    /// Partial sum plus the tail estimate, when convergent.
    pub fn estimate(&self) -> Option<f64> {
        self.tail_estimate.map(|t| self.partial_sum + t)
    }
}

/// Index range of the last quartile (at least four entries when available).
pub fn last_quartile(n: usize) -> std::ops::Range<usize> {
    let len = (n / 4).max(4).min(n);
    n - len..n
}

/// Sum accumulated from the last term backwards.
pub fn reverse_sum(terms: &[f64]) -> f64 {
    terms.iter().rev().sum()
}

pub fn assess(terms: &[f64]) -> SeriesEvidence {
    let n = terms.len();
    let partial_sum = reverse_sum(terms);
    let mut ev = SeriesEvidence {
        partial_sum,
        terms: n,
        trend: Trend::Inconclusive,
        method: Method::TooFewTerms,
        statistic: None,
        tail_estimate: None,
    };
    if n < 4 {
        return ev;
    }
    let q = &terms[last_quartile(n)];
    if q.iter().all(|&a| a == 0.0) {
        ev.trend = Trend::Converges;
        ev.method = Method::FiniteSupport;
        ev.tail_estimate = Some(0.0);
        return ev;
    }
    if q.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return ev;
    }
    let ratios: Vec<f64> = q.windows(2).map(|p| p[1] / p[0]).collect();
    let q_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let last = *q.last().unwrap();
    if q_max <= RATIO_CONVERGENT {
        ev.trend = Trend::Converges;
        ev.method = Method::Ratio;
        ev.statistic = Some(q_max);
        ev.tail_estimate = Some(last * q_max / (1.0 - q_max));
        return ev;
    }
    if q_min >= 1.0 {
        ev.trend = Trend::Diverges;
        ev.method = Method::Ratio;
        ev.statistic = Some(q_min);
        return ev;
    }
    let start = last_quartile(n).start;
    let xs: Vec<f64> = (start..n).map(|k| ((k + 1) as f64).ln()).collect();
    let ys: Vec<f64> = q.iter().map(|a| a.ln()).collect();
    let (slope, _) = fit_line(&xs, &ys);
    ev.method = Method::LogLogSlope;
    ev.statistic = Some(slope);
    if slope < -1.0 - SLOPE_BAND {
        ev.trend = Trend::Converges;
        ev.tail_estimate = Some(last * n as f64 / (-slope - 1.0));
    } else if slope > -1.0 + SLOPE_BAND {
        ev.trend = Trend::Diverges;
    }
    ev
}

/// Relative growth of a nondecreasing sequence over its last quartile,
/// `(s_last - s_start) / |s_last|`.
pub fn last_quartile_growth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let r = last_quartile(n);
    let first = values[r.start.min(n - 2)];
    let last = values[n - 1];
    if last == 0.0 {
        return if first == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (last - first).abs() / last.abs()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Least-squares line through `(xs, ys)`; returns `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
