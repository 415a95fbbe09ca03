use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use mt_core::agents::{sample_population, ValuationDistribution};

fn fingerprint(seed: u64) -> u64 {
    let pop = sample_population(&ValuationDistribution::Normal { mean: 125.0, stddev: 25.0 }, 200, seed).unwrap();
    let mut h = DefaultHasher::new();
    for p in &pop {
        p.valuation.cents().hash(&mut h);
    }
    h.finish()
}

#[test]
fn large_sample_matches_moments() {
    let pop = sample_population(&ValuationDistribution::Normal { mean: 125.0, stddev: 25.0 }, 100_000, 7).unwrap();
    let xs: Vec<f64> = pop.iter().map(|p| p.valuation.as_units_f64()).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 125.0).abs() < 0.25, "mean {mean}");
    assert!((sd - 25.0).abs() < 0.25, "sd {sd}");
}

#[test]
fn uniform_sample_stays_in_bounds() {
    let pop = sample_population(&ValuationDistribution::Uniform { lo: 10.0, hi: 20.0 }, 10_000, 3).unwrap();
    assert!(pop.iter().all(|p| p.valuation.cents() >= 1000 && p.valuation.cents() <= 2000));
    let mean = pop.iter().map(|p| p.valuation.as_units_f64()).sum::<f64>() / 10_000.0;
    assert!((mean - 15.0).abs() < 0.15, "mean {mean}");
}

#[test]
fn seeds_reproduce_and_differ() {
    for seed in 0..100u64 {
        assert_eq!(fingerprint(seed), fingerprint(seed));
        assert_ne!(fingerprint(seed), fingerprint(seed + 1_000));
    }
}
