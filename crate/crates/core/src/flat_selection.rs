//! Request selection for flat-CPM campaigns.
//!
//! A histogram of predicted response rates tells how many requests sit above
//! any candidate threshold. Each slot the threshold that leaves the required
//! number of requests in the upper tail is solved for, folded into running
//! statistics, and turned into a confidence band: requests above the band are
//! bought, requests below it dropped, and requests inside it sampled at the
//! pacing rate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::Money;
use crate::error::{Error, Result};
use crate::pacing::PacingRate;

pub const DEFAULT_BINS: usize = 1000;
/// Log-spaced bins cover `[LOG_FLOOR, LINEAR_START)`, linear bins the rest.
pub const LOG_FLOOR: f64 = 1e-6;
pub const LINEAR_START: f64 = 0.01;
const LOG_BINS: usize = 600;

pub const DEFAULT_CRITICAL_VALUE: f64 = 1.96;

/// Request counts over predicted-rate bins spanning `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityHistogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl QualityHistogram {
    /// 1000 bins: one bin for `[0, 1e-6)`, log-spaced up to 0.01, linear above.
    pub fn new() -> Self {
        let mut edges = Vec::with_capacity(DEFAULT_BINS + 1);
        edges.push(0.0);
        let (lo, hi) = (LOG_FLOOR.ln(), LINEAR_START.ln());
        for i in 0..=LOG_BINS {
            edges.push((lo + (hi - lo) * i as f64 / LOG_BINS as f64).exp());
        }
        let linear = DEFAULT_BINS - LOG_BINS - 1;
        for i in 1..=linear {
            edges.push(LINEAR_START + (1.0 - LINEAR_START) * i as f64 / linear as f64);
        }
        *edges.last_mut().expect("edges") = 1.0;
        // exp/ln round trip may not land exactly on the boundary values
        edges[1] = LOG_FLOOR;
        edges[LOG_BINS + 1] = LINEAR_START;
        Self::with_edges(edges).expect("default edges are valid")
    }

    /// Custom bins; edges must increase strictly from 0 to 1.
    pub fn with_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("histogram needs at least two edges"));
        }
        if edges[0] != 0.0 || *edges.last().expect("edges") != 1.0 {
            return Err(Error::invalid("histogram edges must span [0, 1]"));
        }
        if edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::invalid("histogram edges must increase strictly"));
        }
        let bins = edges.len() - 1;
        Ok(Self {
            edges,
            counts: vec![0; bins],
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the bin holding `rate` (rates are clamped into `[0, 1]`).
    pub fn bin_of(&self, rate: f64) -> usize {
        let r = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
        let idx = self.edges.partition_point(|&e| e <= r);
        idx.saturating_sub(1).min(self.num_bins() - 1)
    }

    pub fn add(&mut self, rate: f64) {
        let b = self.bin_of(rate);
        self.counts[b] += 1;
    }

    pub fn add_count(&mut self, bin: usize, n: u64) {
        self.counts[bin] += n;
    }

    /// Adds another histogram with identical edges.
    pub fn merge(&mut self, other: &QualityHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::invalid("cannot merge histograms with different edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Writes `bin_low,bin_high,count` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([
                self.edges[i].to_string(),
                self.edges[i + 1].to_string(),
                c.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

impl Default for QualityHistogram {
    fn default() -> Self {
        Self::new()
    }
}

/// How many impressions, bids and requests a slot needs to spend its plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandSizing {
    pub impressions: u64,
    pub bids: u64,
    pub requests: u64,
}

fn ceil_count(x: f64) -> u64 {
    let nudged = x - x.abs() * 8.0 * f64::EPSILON;
    nudged.ceil().max(0.0) as u64
}

/// `imps* = b / c*`, `bids* = imps* / win_rate`, `reqs* = bids* / pacing`,
/// each rounded up.
pub fn required_requests(
    target_spend: Money,
    cost_per_impression: Money,
    win_rate: f64,
    pacing: PacingRate,
) -> Result<DemandSizing> {
    if cost_per_impression.is_zero() {
        return Err(Error::CannotSizeDemand("cost per impression is zero"));
    }
    if win_rate.is_nan() || win_rate <= 0.0 {
        return Err(Error::CannotSizeDemand("win rate is zero"));
    }
    if pacing.value().is_nan() || pacing.value() <= 0.0 {
        return Err(Error::CannotSizeDemand("pacing rate is zero"));
    }
    let impressions =
        ceil_count(target_spend.micros() as f64 / cost_per_impression.micros() as f64);
    let bids = ceil_count(impressions as f64 / win_rate.min(1.0));
    let requests = ceil_count(bids as f64 / pacing.value());
    Ok(DemandSizing {
        impressions,
        bids,
        requests,
    })
}

/// Edge `x` minimising `|count(rate >= x) - target|`; ties go to the larger
/// edge. A target of zero yields 1.0, a target at or above the total yields
/// the lowest edge.
pub fn solve_threshold(hist: &QualityHistogram, target: u64) -> Result<f64> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    if target == 0 {
        return Ok(1.0);
    }
    if target >= total {
        return Ok(hist.edges[0]);
    }
    let mut tail = 0u64;
    let mut best = (u64::MAX, hist.num_bins());
    for k in (0..=hist.num_bins()).rev() {
        if k < hist.num_bins() {
            tail += hist.counts[k];
        }
        let gap = tail.abs_diff(target);
        if gap < best.0 {
            best = (gap, k);
        }
    }
    Ok(hist.edges[best.1])
}

/// Running mean and variance of the solved threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    mean: f64,
    variance: f64,
    count: u64,
    /// Days of history behind the statistics, `d`.
    pub lookback_days: u32,
    /// `γ`; 1.96 gives a 95% band.
    pub critical_value: f64,
}

impl ThresholdStats {
    pub fn new(lookback_days: u32, critical_value: f64) -> Self {
        Self {
            mean: 0.0,
            variance: 0.0,
            count: 0,
            lookback_days: lookback_days.max(1),
            critical_value,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance of the observed thresholds.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, tau: f64) {
        self.count += 1;
        let t = self.count as f64;
        let prev_mean = self.mean;
        self.mean = prev_mean + (tau - prev_mean) / t;
        let v = (t - 1.0) / t * self.variance + (tau - prev_mean) * (tau - self.mean) / t;
        self.variance = v.max(0.0);
    }

    /// `μ ± γσ/√d`, clamped to `[0, 1]`. `None` before the first observation.
    pub fn confidence_bounds(&self) -> Option<ConfidenceBand> {
        if self.count == 0 {
            return None;
        }
        let half = self.critical_value * self.std_dev() / f64::from(self.lookback_days).sqrt();
        Some(ConfidenceBand {
            lower: (self.mean - half).clamp(0.0, 1.0),
            upper: (self.mean + half).clamp(0.0, 1.0),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FlatDecision {
    Bid(Money),
    Drop,
    /// Bid `price` with the given probability.
    Probabilistic { price: Money, probability: f64 },
}

impl FlatDecision {
    /// Resolves against a uniform draw in `[0, 1)`.
    pub fn resolve(self, coin: f64) -> Option<Money> {
        match self {
            FlatDecision::Bid(p) => Some(p),
            FlatDecision::Drop => None,
            FlatDecision::Probabilistic { price, probability } => (coin < probability).then_some(price),
        }
    }
}

pub fn decide_flat(
    predicted_rate: f64,
    band: ConfidenceBand,
    pacing: PacingRate,
    fixed_bid: Money,
) -> FlatDecision {
    if predicted_rate > band.upper {
        FlatDecision::Bid(fixed_bid)
    } else if predicted_rate < band.lower {
        FlatDecision::Drop
    } else {
        FlatDecision::Probabilistic {
            price: fixed_bid,
            probability: pacing.value(),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn three_bin() -> QualityHistogram {
        let mut h = QualityHistogram::with_edges(vec![0.0, 0.001, 0.002, 0.005, 1.0]).unwrap();
        h.add_count(1, 8000);
        h.add_count(2, 1500);
        h.add_count(3, 500);
        h
    }

    /// Independent oracle: recount the tail from scratch at every edge.
    fn brute_force_threshold(h: &QualityHistogram, target: u64) -> f64 {
        let total: u64 = h.counts().iter().sum();
        if target == 0 {
            return 1.0;
        }
        if target >= total {
            return h.edges()[0];
        }
        let mut best_edge = 1.0;
        let mut best_gap = i128::MAX;
        for (k, &edge) in h.edges().iter().enumerate() {
            let tail: u64 = h.counts()[k..].iter().sum();
            let gap = (tail as i128 - target as i128).abs();
            if gap < best_gap || (gap == best_gap && edge > best_edge) {
                best_gap = gap;
                best_edge = edge;
            }
        }
        best_edge
    }

    #[test]
    fn default_histogram_shape() {
        let h = QualityHistogram::new();
        assert_eq!(h.num_bins(), DEFAULT_BINS);
        assert_eq!(h.edges()[0], 0.0);
        assert_eq!(*h.edges().last().unwrap(), 1.0);
        assert!(h.edges().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(h.bin_of(0.0), 0);
        assert_eq!(h.bin_of(1.0), DEFAULT_BINS - 1);
        assert_eq!(h.edges()[h.bin_of(0.01)], 0.01);
    }

    #[test]
    fn sizing_chain() {
        let d = required_requests(
            Money::from_micros(10_000_000),
            Money::from_micros(5_000),
            0.5,
            PacingRate::new(0.25, 1e-4),
        )
        .unwrap();
        assert_eq!(d, DemandSizing { impressions: 2000, bids: 4000, requests: 16000 });
        let d = required_requests(Money::from_micros(10_000_000), Money::from_micros(5_000), 1.0, PacingRate::FULL).unwrap();
        assert_eq!(d.requests, d.impressions);
        let d = required_requests(Money::ZERO, Money::from_micros(5_000), 0.5, PacingRate::FULL).unwrap();
        assert_eq!(d.requests, 0);
        assert!(required_requests(Money::from_micros(1), Money::from_micros(1), 0.0, PacingRate::FULL).is_err());
    }

    #[test]
    fn threshold_examples() {
        let h = three_bin();
        assert_eq!(brute_force_threshold(&h, 2000), 0.002);
        assert_eq!(solve_threshold(&h, 2000).unwrap(), 0.002);
        assert_eq!(solve_threshold(&h, 10_000).unwrap(), 0.0);
        assert_eq!(solve_threshold(&h, 12_000).unwrap(), 0.0);
        assert_eq!(solve_threshold(&h, 0).unwrap(), 1.0);
        let empty = QualityHistogram::new();
        assert!(matches!(solve_threshold(&empty, 5), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn stats_examples() {
        let mut s = ThresholdStats::new(1, DEFAULT_CRITICAL_VALUE);
        s.update(0.002);
        assert_eq!(s.mean(), 0.002);
        assert_eq!(s.variance(), 0.0);
        let mut s = ThresholdStats::new(1, DEFAULT_CRITICAL_VALUE);
        for x in [1.0, 2.0, 3.0] {
            s.update(x);
        }
        assert!((s.mean() - 2.0).abs() < 1e-15);
        assert!((s.variance() - 2.0 / 3.0).abs() < 1e-15);
        let mut s = ThresholdStats::new(1, DEFAULT_CRITICAL_VALUE);
        for _ in 0..10 {
            s.update(0.3);
            assert_eq!(s.variance(), 0.0);
        }
    }

    #[test]
    fn bounds_examples() {
        let mut s = ThresholdStats::new(4, 1.96);
        s.mean = 0.002;
        s.variance = 0.0005f64.powi(2);
        s.count = 3;
        let b = s.confidence_bounds().unwrap();
        assert!((b.lower - 0.00151).abs() < 1e-12);
        assert!((b.upper - 0.00249).abs() < 1e-12);
        s.variance = 0.0;
        let b = s.confidence_bounds().unwrap();
        assert_eq!((b.lower, b.upper), (0.002, 0.002));
        assert!(ThresholdStats::new(1, 1.96).confidence_bounds().is_none());
    }

    #[test]
    fn decision_rule() {
        let band = ConfidenceBand { lower: 0.00151, upper: 0.00249 };
        let c = Money::from_micros(2_000);
        let p = PacingRate::new(0.3, 1e-4);
        assert_eq!(decide_flat(0.003, band, p, c), FlatDecision::Bid(c));
        assert_eq!(decide_flat(0.001, band, p, c), FlatDecision::Drop);
        assert_eq!(
            decide_flat(0.002, band, p, c),
            FlatDecision::Probabilistic { price: c, probability: 0.3 }
        );
        assert_eq!(decide_flat(0.002, band, p, c).resolve(0.29), Some(c));
        assert_eq!(decide_flat(0.002, band, p, c).resolve(0.31), None);
    }

    #[test]
    fn csv_dump_has_one_row_per_bin() {
        let mut buf = Vec::new();
        three_bin().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("bin_low,bin_high,count"));
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("0.001,0.002,8000"));
    }

    fn rank(d: FlatDecision) -> u8 {
        match d {
            FlatDecision::Drop => 0,
            FlatDecision::Probabilistic { .. } => 1,
            FlatDecision::Bid(_) => 2,
        }
    }

    proptest! {
        #[test]
        fn solver_matches_oracle(counts in prop::collection::vec(0u64..500, 1..60), target in 0u64..20_000) {
            let n = counts.len();
            let edges: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let mut h = QualityHistogram::with_edges(edges).unwrap();
            for (i, c) in counts.iter().enumerate() {
                h.add_count(i, *c);
            }
            prop_assume!(h.total() > 0);
            let tau = solve_threshold(&h, target).unwrap();
            prop_assert_eq!(tau, brute_force_threshold(&h, target));
            let k = h.edges().iter().position(|&e| e == tau).unwrap();
            let tail: u64 = h.counts()[k..].iter().sum();
            let max_bin = *h.counts().iter().max().unwrap();
            if target < h.total() {
                prop_assert!(tail.abs_diff(target) <= max_bin);
            }
        }

        #[test]
        fn stats_match_batch(xs in prop::collection::vec(0.0f64..1.0, 1..400)) {
            let mut s = ThresholdStats::new(1, 1.96);
            for &x in &xs {
                s.update(x);
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((s.mean() - mean).abs() <= 1e-12);
            prop_assert!((s.variance() - var).abs() <= 1e-12 + 1e-9 * var);
        }

        #[test]
        fn band_contains_mean_and_shrinks_with_days(xs in prop::collection::vec(0.0f64..1.0, 1..50), d in 1u32..30) {
            let mut a = ThresholdStats::new(d, 1.96);
            let mut b = ThresholdStats::new(d + 1, 1.96);
            for &x in &xs {
                a.update(x);
                b.update(x);
            }
            let ba = a.confidence_bounds().unwrap();
            let bb = b.confidence_bounds().unwrap();
            prop_assert!(ba.lower <= a.mean() && a.mean() <= ba.upper);
            prop_assert!(bb.upper - bb.lower <= ba.upper - ba.lower + 1e-15);
        }

        #[test]
        fn decision_is_monotone(lo in 0.0f64..1.0, width in 0.0f64..1.0, x in 0.0f64..1.0, dx in 0.0f64..1.0) {
            let band = ConfidenceBand { lower: lo, upper: (lo + width).min(1.0) };
            let p = PacingRate::new(0.5, 1e-4);
            let c = Money::from_micros(1);
            let y = (x + dx).min(1.0);
            prop_assert!(rank(decide_flat(y, band, p, c)) >= rank(decide_flat(x, band, p, c)));
        }
    }
}
