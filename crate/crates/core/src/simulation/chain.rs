use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{LemmaCondition, PathViolation};
use crate::scalar::{count, to_f64, Real};
use crate::simplex::SimplexVector;

/// Parameters of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    /// Number of urns.
    pub n: usize,
    /// Balls per urn; `⌊βn⌋` balls are thrown.
    pub beta: T,
    /// Initial occupancy, rounded to integer counts.
    pub alpha: SimplexVector<T>,
    pub seed: u64,
    pub trials: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(n: usize, beta: T, alpha: SimplexVector<T>, seed: u64, trials: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("need at least one urn".into()));
        }
        if !(beta >= T::zero()) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite and nonnegative, got {beta}")));
        }
        Ok(Self { n, beta, alpha, seed, trials })
    }

    /// All urns initially empty.
    pub fn empty(n: usize, beta: T, capacity: usize, seed: u64, trials: usize) -> Result<Self> {
        Self::new(n, beta, SimplexVector::empty_start(capacity), seed, trials)
    }

    pub fn capacity(&self) -> usize {
        self.alpha.capacity()
    }

    /// `⌊βn⌋`.
    pub fn throws(&self) -> usize {
        // A small relative slack keeps e.g. 0.3 · 10 from rounding down to 2.
        let r = to_f64(self.beta) * self.n as f64;
        (r * (1.0 + 4.0 * f64::EPSILON)).floor() as usize
    }

    /// Initial urn counts per level (largest-remainder rounding).
    pub fn initial_counts(&self) -> Vec<u64> {
        let a: Vec<f64> = self.alpha.entries().iter().map(|&v| to_f64(v)).collect();
        largest_remainder(&a, self.n)
    }

    /// Same run with a different number of urns.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Rounds `n·w` to integers summing to `n`: floors first, then one extra
/// unit to the largest fractional parts (ties to the lower index).
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<u64> {
    let total: f64 = weights.iter().sum();
    let scaled: Vec<f64> = weights.iter().map(|&w| w / total * n as f64).collect();
    let mut out: Vec<u64> = scaled.iter().map(|&s| s.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = scaled[i] - scaled[i].floor();
        let fj = scaled[j] - scaled[j].floor();
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().take((n as u64).saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Occupancy vector of integer counts.
pub fn occupancy_from_counts<T: Real>(counts: &[u64]) -> SimplexVector<T> {
    let n: u64 = counts.iter().sum();
    SimplexVector::from_computed(counts.iter().map(|&c| count::<T>(c as usize) / count::<T>(n as usize)).collect())
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One throw: picks an urn uniformly and moves it up one level (the
/// overflow slot absorbs).
#[inline]
fn throw(counts: &mut [u64], n: u64, rng: &mut ChaCha8Rng) {
    let mut u = rng.gen_range(0..n);
    let last = counts.len() - 1;
    for j in 0..last {
        if u < counts[j] {
            counts[j] -= 1;
            counts[j + 1] += 1;
            return;
        }
        u -= counts[j];
    }
}

/// Terminal counts of one trial.
pub fn simulate<T: Real>(cfg: &SimConfig<T>, trial: usize) -> Vec<u64> {
    let mut counts = cfg.initial_counts();
    let mut rng = trial_rng(cfg.seed, trial);
    let n = cfg.n as u64;
    for _ in 0..cfg.throws() {
        throw(&mut counts, n, &mut rng);
    }
    counts
}

/// Counts of one trial recorded along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Number of balls thrown at each record.
    pub throws: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

impl Trajectory {
    /// Times `throws/n`.
    pub fn times<T: Real>(&self, n: usize) -> Vec<T> {
        self.throws.iter().map(|&k| count::<T>(k) / count::<T>(n)).collect()
    }
}

/// Runs one trial and records the counts after `⌊xn⌋` throws for every `x`
/// in `grid` (nondecreasing, capped at the final throw).
pub fn simulate_trajectory<T: Real>(cfg: &SimConfig<T>, trial: usize, grid: &[T]) -> Result<Trajectory> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("trajectory grid must be nondecreasing".into()));
    }
    let total = cfg.throws();
    let stops: Vec<usize> = grid
        .iter()
        .map(|&x| ((to_f64(x) * cfg.n as f64 * (1.0 + 4.0 * f64::EPSILON)).floor().max(0.0) as usize).min(total))
        .collect();
    let mut counts = cfg.initial_counts();
    let mut rng = trial_rng(cfg.seed, trial);
    let n = cfg.n as u64;
    let mut out = Trajectory { throws: Vec::with_capacity(stops.len()), counts: Vec::with_capacity(stops.len()) };
    let mut done = 0;
    for &s in &stops {
        while done < s {
            throw(&mut counts, n, &mut rng);
            done += 1;
        }
        out.throws.push(s);
        out.counts.push(counts.clone());
    }
    Ok(out)
}

/// Terminal counts of every trial, in trial order.
pub fn simulate_all<T: Real>(cfg: &SimConfig<T>) -> Vec<Vec<u64>> {
    (0..cfg.trials).into_par_iter().map(|t| simulate(cfg, t)).collect()
}

/// Number of trials whose terminal counts satisfy `event`.
pub fn count_hits<T: Real, F>(cfg: &SimConfig<T>, event: F) -> u64
where
    F: Fn(&[u64]) -> bool + Sync,
{
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| u64::from(event(&simulate(cfg, t))))
        .sum()
}

/// Average terminal occupancy over all trials.
pub fn mean_terminal<T: Real>(cfg: &SimConfig<T>) -> SimplexVector<T> {
    let len = cfg.capacity() + 2;
    let sums = (0..cfg.trials)
        .into_par_iter()
        .map(|t| simulate(cfg, t))
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let denom = cfg.n as f64 * cfg.trials.max(1) as f64;
    SimplexVector::from_computed(sums.iter().map(|&s| T::from_f64(s as f64 / denom).unwrap()).collect())
}

/// Replays one trial and checks after every throw, in integer arithmetic,
/// that the urn count is conserved, every cumulative count is nonincreasing
/// and the cumulative counts drop by at most one in total.
///
/// Returns the number of throws checked.
pub fn audit_trial<T: Real>(cfg: &SimConfig<T>, trial: usize) -> Result<usize> {
    let mut counts = cfg.initial_counts();
    let mut rng = trial_rng(cfg.seed, trial);
    let n = cfg.n as u64;
    let cap = cfg.capacity();
    let cumulative = |c: &[u64]| -> Vec<u64> {
        c[..=cap]
            .iter()
            .scan(0u64, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    };
    let fail = |condition, index, level, excess: u64| {
        Err(Error::InvalidPath(PathViolation { condition, index, level, excess: excess as f64 / n as f64 }))
    };
    if counts.iter().sum::<u64>() != n {
        return fail(LemmaCondition::Ordering, 0, None, 1);
    }
    let mut psi = cumulative(&counts);
    for k in 0..cfg.throws() {
        throw(&mut counts, n, &mut rng);
        if counts.iter().sum::<u64>() != n {
            return fail(LemmaCondition::Ordering, k + 1, None, 1);
        }
        let next = cumulative(&counts);
        let mut drop = 0u64;
        for i in 0..=cap {
            if next[i] > psi[i] {
                return fail(LemmaCondition::Monotone, k, Some(i), next[i] - psi[i]);
            }
            drop += psi[i] - next[i];
        }
        if drop > 1 {
            return fail(LemmaCondition::Speed, k, None, drop - 1);
        }
        psi = next;
    }
    Ok(cfg.throws())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::poisson_pmf;

    #[test]
    fn rounding_sums_to_n() {
        assert_eq!(largest_remainder(&[0.5, 0.3, 0.2], 10), vec![5, 3, 2]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.25, 0.25, 0.5], 3), vec![1, 1, 1]);
        let w = [0.123, 0.456, 0.001, 0.42];
        for n in [1, 7, 99, 1000] {
            assert_eq!(largest_remainder(&w, n).iter().sum::<u64>(), n as u64);
        }
    }

    #[test]
    fn throw_count_is_floor() {
        let c = SimConfig::empty(10, 0.3f64, 1, 0, 1).unwrap();
        assert_eq!(c.throws(), 3);
        let c = SimConfig::empty(7, 1.0 / 7.0f64, 1, 0, 1).unwrap();
        assert_eq!(c.throws(), 1);
    }

    #[test]
    fn one_ball_two_urns() {
        let c = SimConfig::empty(2, 0.5f64, 0, 11, 200).unwrap();
        for t in 0..200 {
            assert_eq!(simulate(&c, t), vec![1, 1]);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let c = SimConfig::empty(500, 2.0f64, 3, 42, 1).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let a = simulate_trajectory(&c, 3, &grid).unwrap();
        let b = simulate_trajectory(&c, 3, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.last().unwrap(), &simulate(&c, 3));
        assert_ne!(simulate(&c, 3), simulate(&c, 4));
    }

    #[test]
    fn large_n_matches_poisson() {
        let cap = 4;
        let c = SimConfig::empty(100_000, 3.0f64, cap, 7, 1).unwrap();
        let counts = simulate(&c, 0);
        let g: SimplexVector<f64> = occupancy_from_counts(&counts);
        let mut tail = 1.0;
        for i in 0..=cap {
            let p = poisson_pmf(i, 3.0f64);
            tail -= p;
            assert!((g.level(i) - p).abs() < 0.005, "level {i}: {} vs {p}", g.level(i));
        }
        assert!((g.overflow() - tail).abs() < 0.005);
    }

    #[test]
    fn mean_terminal_is_deterministic() {
        let alpha = SimplexVector::new(vec![0.5f64, 0.3, 0.2, 0.0, 0.0]).unwrap();
        let c = SimConfig::new(60, 2.0, alpha, 9, 64).unwrap();
        assert_eq!(mean_terminal(&c), mean_terminal(&c));
        assert_eq!(c.initial_counts(), vec![30, 18, 12, 0, 0]);
    }

    #[test]
    fn audit_passes() {
        let alpha = SimplexVector::new(vec![0.2f64, 0.3, 0.1, 0.4]).unwrap();
        let c = SimConfig::new(37, 2.7, alpha, 5, 20).unwrap();
        for t in 0..20 {
            assert_eq!(audit_trial(&c, t).unwrap(), 99);
        }
    }

    #[test]
    fn hits_are_deterministic() {
        let c = SimConfig::empty(20, 1.0f64, 0, 3, 1000).unwrap();
        let ev = |v: &[u64]| v[0] >= 8;
        assert_eq!(count_hits(&c, ev), count_hits(&c, ev));
    }
}
