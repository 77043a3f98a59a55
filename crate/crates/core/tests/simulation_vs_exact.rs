//! Empty-urn frequencies from the sampler against the exact distribution.

use occupancy_core::simulation::{exact_empty_urn_pmf, simulate, SimConfig};

fn check(n: usize, throws: usize, trials: usize, seed: u64) {
    let beta = throws as f64 / n as f64;
    let cfg = SimConfig::empty(n, beta, 0, seed, trials).unwrap();
    assert_eq!(cfg.throws(), throws);
    let mut hist = vec![0u64; n + 1];
    for t in 0..trials {
        hist[simulate(&cfg, t)[0] as usize] += 1;
    }
    let nt = trials as f64;
    let mut total = 0.0;
    for (m, &h) in hist.iter().enumerate() {
        let p = exact_empty_urn_pmf(n, throws, m).unwrap();
        total += p;
        let se = (p * (1.0 - p) / nt).sqrt().max(1.0 / nt);
        let f = h as f64 / nt;
        assert!((f - p).abs() <= 4.0 * se, "n={n} r={throws} m={m}: freq {f} vs exact {p}");
    }
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn ten_urns_ten_balls() {
    check(10, 10, 1_000_000, 11);
}

#[test]
fn twenty_urns_thirty_balls() {
    check(20, 30, 1_000_000, 12);
}
