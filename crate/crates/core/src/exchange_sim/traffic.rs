use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::auction::CompetitorModel;
use crate::domain::{AdRequest, FeaturePath, Money};
use crate::error::{Error, Result};
use crate::rng::{SeedStreams, Stream};

/// Request volume and response-rate shape of the simulated traffic.
///
/// Publishers form a two-level tree (group, site) and users a two-level tree
/// (segment, bucket). Each node carries a hidden quality factor with mean 1,
/// so the hierarchy explains part of the variation in true response rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub base_volume: u64,
    /// Per-slot volume multipliers.
    pub multipliers: Vec<f64>,
    /// Per-slot mean response probability.
    pub rate_means: Vec<f64>,
    /// Log-normal sigma of per-request noise around the hierarchical rate.
    pub dispersion: f64,
    pub publisher_groups: u32,
    pub sites_per_group: u32,
    pub publisher_sigma: f64,
    pub user_segments: u32,
    pub user_buckets: u32,
    pub user_sigma: f64,
}

impl TrafficProfile {
    /// Constant volume and rate, mild dispersion.
    pub fn flat(num_slots: usize, base_volume: u64, rate: f64) -> Self {
        Self {
            base_volume,
            multipliers: vec![1.0; num_slots],
            rate_means: vec![rate; num_slots],
            dispersion: 0.5,
            publisher_groups: 20,
            sites_per_group: 50,
            publisher_sigma: 0.5,
            user_segments: 10,
            user_buckets: 20,
            user_sigma: 0.3,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.multipliers.len()
    }

    pub fn volume(&self, slot: usize) -> u64 {
        (self.base_volume as f64 * self.multipliers[slot]).round() as u64
    }

    pub fn validate(&self, num_slots: usize) -> Result<()> {
        if self.multipliers.len() != num_slots {
            return Err(Error::LengthMismatch {
                left: self.multipliers.len(),
                right: num_slots,
            });
        }
        if self.rate_means.len() != num_slots {
            return Err(Error::LengthMismatch {
                left: self.rate_means.len(),
                right: num_slots,
            });
        }
        if self.multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid("volume multipliers must be finite and >= 0"));
        }
        if self.rate_means.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid("mean response rates must lie in [0, 1]"));
        }
        for (name, s) in [
            ("dispersion", self.dispersion),
            ("publisher_sigma", self.publisher_sigma),
            ("user_sigma", self.user_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        if self.publisher_groups == 0
            || self.sites_per_group == 0
            || self.user_segments == 0
            || self.user_buckets == 0
        {
            return Err(Error::invalid("hierarchy fan-outs must be >= 1"));
        }
        Ok(())
    }
}

/// Mean-one log-normal factor.
fn lognormal_factor(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

/// Hidden per-node quality factors, fixed for the lifetime of a world.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityFactors {
    publishers: Vec<f64>,
    users: Vec<f64>,
}

impl QualityFactors {
    pub fn draw(profile: &TrafficProfile, streams: &SeedStreams) -> Self {
        let two_level = |key: u64, outer: u32, inner: u32, sigma: f64| {
            let mut rng = streams.keyed(Stream::World, key);
            let mut out = Vec::with_capacity((outer * inner) as usize);
            for _ in 0..outer {
                let g = lognormal_factor(&mut rng, sigma);
                for _ in 0..inner {
                    out.push(g * lognormal_factor(&mut rng, sigma));
                }
            }
            out
        };
        Self {
            publishers: two_level(
                1,
                profile.publisher_groups,
                profile.sites_per_group,
                profile.publisher_sigma,
            ),
            users: two_level(2, profile.user_segments, profile.user_buckets, profile.user_sigma),
        }
    }
}

/// A request plus everything the simulator draws for it up front.
///
/// Pre-drawing the latent values makes paired runs see identical traffic,
/// competitor bids and estimator noise whatever the campaigns decide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimRequest {
    pub request: AdRequest,
    truth: f64,
    /// Standard normal draw for the noisy oracle estimator.
    pub estimator_z: f64,
    /// Uniform `[0, 1)` draw for probabilistic bid and exploration choices.
    pub coin: f64,
    /// Highest competing bid in this request's auction.
    pub competing_bid: Money,
}

impl SimRequest {
    /// Hidden true response probability. Only the simulator and the noisy
    /// oracle estimator may read it.
    pub fn truth(&self) -> f64 {
        self.truth
    }
}

/// `(day, slot, index)` packed into a unique id.
pub fn request_id(day: u32, slot: usize, index: u64) -> u64 {
    (u64::from(day) << 40) | ((slot as u64) << 24) | index
}

/// Requests of one slot. The count is `base_volume * multiplier`, rounded.
pub fn generate_requests(
    profile: &TrafficProfile,
    factors: &QualityFactors,
    competitor: &CompetitorModel,
    advertiser: FeaturePath,
    streams: &SeedStreams,
    day: u32,
    slot: usize,
) -> Vec<SimRequest> {
    let n = profile.volume(slot);
    let mut traffic = streams.slot(Stream::Traffic, day, slot);
    let mut est = streams.slot(Stream::Estimator, day, slot);
    let mut explore = streams.slot(Stream::Exploration, day, slot);
    let mut auction = streams.slot(Stream::Auction, day, slot);
    let mean = profile.rate_means[slot];
    let spg = profile.sites_per_group;
    let upb = profile.user_buckets;
    (0..n)
        .map(|i| {
            let pub_idx = traffic.random_range(0..profile.publisher_groups * spg);
            let user_idx = traffic.random_range(0..profile.user_segments * upb);
            let noise = lognormal_factor(&mut traffic, profile.dispersion);
            let truth = (mean
                * factors.publishers[pub_idx as usize]
                * factors.users[user_idx as usize]
                * noise)
                .clamp(0.0, 1.0);
            let request = AdRequest {
                id: request_id(day, slot, i),
                slot,
                advertiser,
                publisher: FeaturePath::new(&[pub_idx / spg, pub_idx % spg])
                    .expect("two-level path"),
                user: FeaturePath::new(&[user_idx / upb, user_idx % upb]).expect("two-level path"),
            };
            SimRequest {
                request,
                truth,
                estimator_z: est.sample(StandardNormal),
                coin: explore.random(),
                competing_bid: competitor.sample_highest(slot, &mut auction),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(mult: f64) -> (TrafficProfile, QualityFactors, CompetitorModel, SeedStreams) {
        let mut p = TrafficProfile::flat(4, 1000, 0.01);
        p.multipliers[1] = mult;
        let s = SeedStreams::new(5);
        let f = QualityFactors::draw(&p, &s);
        let c = CompetitorModel::constant(4, Money::from_micros(1000), 0.5);
        (p, f, c, s)
    }

    #[test]
    fn volume_examples() {
        let (p, f, c, s) = setup(0.0);
        assert!(generate_requests(&p, &f, &c, FeaturePath::ROOT, &s, 0, 1).is_empty());
        let (p, f, c, s) = setup(2.0);
        assert_eq!(generate_requests(&p, &f, &c, FeaturePath::ROOT, &s, 0, 1).len(), 2000);
    }

    #[test]
    fn same_seed_same_stream() {
        let (p, f, c, s) = setup(1.0);
        let a = generate_requests(&p, &f, &c, FeaturePath::ROOT, &s, 3, 2);
        let b = generate_requests(&p, &f, &c, FeaturePath::ROOT, &s, 3, 2);
        assert_eq!(a, b);
        let other = generate_requests(&p, &f, &c, FeaturePath::ROOT, &s, 4, 2);
        assert_ne!(a, other);
    }

    #[test]
    fn truths_are_probabilities_with_the_slot_mean() {
        let mut p = TrafficProfile::flat(1, 200_000, 0.01);
        p.dispersion = 0.3;
        let s = SeedStreams::new(9);
        let f = QualityFactors::draw(&p, &s);
        let c = CompetitorModel::constant(1, Money::from_micros(1000), 0.5);
        let reqs = generate_requests(&p, &f, &c, FeaturePath::ROOT, &s, 0, 0);
        assert!(reqs.iter().all(|r| (0.0..=1.0).contains(&r.truth())));
        let mean = reqs.iter().map(|r| r.truth()).sum::<f64>() / reqs.len() as f64;
        // factors have mean one, but the finite hierarchy leaves sampling slack
        assert!((mean / 0.01 - 1.0).abs() < 0.25, "mean {mean}");
    }

    #[test]
    fn ids_are_unique_across_slots_and_days() {
        assert_ne!(request_id(0, 1, 0), request_id(1, 0, 0));
        assert_ne!(request_id(0, 1, 0), request_id(0, 0, 1));
    }

    #[test]
    fn validation() {
        let mut p = TrafficProfile::flat(3, 10, 0.5);
        p.validate(3).unwrap();
        assert!(p.validate(4).is_err());
        p.rate_means[0] = 1.5;
        assert!(p.validate(3).is_err());
    }
}
