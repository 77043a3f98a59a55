use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::feasibility::{feasibility_check, is_irreducible, tight_levels, Feasibility};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::poisson_pmf;

/// Shape of a generated constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    /// Empty start, strict conservation inequality.
    EmptyExponential,
    /// Mixed start, strict conservation inequality.
    GeneralExponential,
    /// Empty start, conservation with equality.
    EmptyPolynomial,
    /// Mixed start, conservation with equality.
    GeneralPolynomial,
    /// Mixed start with a tight monotonicity level below `I`.
    Reducible,
}

impl InstanceKind {
    pub fn is_polynomial(self) -> bool {
        matches!(self, Self::EmptyPolynomial | Self::GeneralPolynomial)
    }

    pub fn is_empty_start(self) -> bool {
        matches!(self, Self::EmptyExponential | Self::EmptyPolynomial)
    }
}

/// A generated constraint together with its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstance {
    pub kind: InstanceKind,
    pub constraint: EndpointConstraint<f64>,
}

/// Bounds for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceBounds {
    pub max_capacity: usize,
    pub max_beta: f64,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        Self { max_capacity: 5, max_beta: 4.0 }
    }
}

fn random_weights<R: Rng>(rng: &mut R, len: usize, min: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| min + rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Distribution of balls received by one class, as explicit head entries
/// plus an optional Poisson component `(weight, rate)` over all counts.
struct Received {
    head: Vec<f64>,
    poisson: Option<(f64, f64)>,
}

impl Received {
    fn finite<R: Rng>(rng: &mut R, top: usize) -> Self {
        Self { head: random_weights(rng, top + 1, 0.1), poisson: None }
    }

    fn mixed<R: Rng>(rng: &mut R) -> Self {
        let w = rng.gen_range(0.0..0.5);
        let h = rng.gen_range(0..4usize);
        let head = random_weights(rng, h + 1, 0.1).into_iter().map(|v| v * w).collect();
        Self { head, poisson: Some((1.0 - w, rng.gen_range(0.2..2.5))) }
    }

    fn entry(&self, i: usize) -> f64 {
        let h = self.head.get(i).copied().unwrap_or(0.0);
        h + self.poisson.map_or(0.0, |(w, l)| w * poisson_pmf(i, l))
    }

    fn mean(&self) -> f64 {
        let h: f64 = self.head.iter().enumerate().map(|(i, &p)| i as f64 * p).sum();
        h + self.poisson.map_or(0.0, |(w, l)| w * l)
    }
}

fn assemble(alpha: &[f64], received: &[Option<Received>]) -> Option<(SimplexVector<f64>, SimplexVector<f64>, f64)> {
    let cap = alpha.len() - 2;
    let mut omega = vec![0.0; cap + 2];
    let mut beta = 0.0;
    for (k, r) in received.iter().enumerate() {
        let Some(r) = r else { continue };
        for j in k..=cap {
            omega[j] += alpha[k] * r.entry(j - k);
        }
        beta += alpha[k] * r.mean();
    }
    let below: f64 = omega[..=cap].iter().sum();
    omega[cap + 1] = 1.0 - below;
    if omega[cap + 1] < -1e-15 {
        return None;
    }
    omega[cap + 1] = omega[cap + 1].max(0.0);
    Some((SimplexVector::new(alpha.to_vec()).ok()?, SimplexVector::new(omega).ok()?, beta))
}

/// Draws one feasible constraint of the requested kind with a finite rate.
///
/// Every class of urns is given an explicit distribution of received balls
/// and the terminal occupancy and ball budget are read off from it, so the
/// constraint is feasible by construction. Exponential kinds mix a Poisson
/// component in (unbounded support), polynomial kinds use finite support
/// ending at level `I + 1`, and reducible instances confine the classes
/// at or below a cut level.
pub fn random_instance<R: Rng>(rng: &mut R, kind: InstanceKind, bounds: InstanceBounds) -> RandomInstance {
    let min_cap = if kind.is_polynomial() || kind == InstanceKind::Reducible { 1 } else { 0 };
    loop {
        let cap = rng.gen_range(min_cap..=bounds.max_capacity.max(min_cap));
        let mut alpha = vec![0.0; cap + 2];
        if kind.is_empty_start() {
            alpha[0] = 1.0;
        } else {
            let top = if kind.is_polynomial() { cap } else { (cap + usize::from(rng.gen_bool(0.3))).max(1) };
            let w = random_weights(rng, top + 1, 0.05);
            alpha[..=top].copy_from_slice(&w);
            // Occasionally leave a level unoccupied.
            if top >= 2 && rng.gen_bool(0.3) {
                let k = rng.gen_range(1..top);
                let m = alpha[k];
                alpha[k] = 0.0;
                alpha[0] += m;
            }
        }
        let cut = (kind == InstanceKind::Reducible).then(|| rng.gen_range(0..cap));
        let received: Vec<Option<Received>> = (0..cap + 2)
            .map(|k| {
                if alpha[k] == 0.0 {
                    return None;
                }
                Some(match (kind.is_polynomial(), cut) {
                    (true, _) => Received::finite(rng, cap + 1 - k),
                    (false, Some(c)) if k <= c => Received::finite(rng, c - k),
                    _ => Received::mixed(rng),
                })
            })
            .collect();
        let Some((a, w, beta)) = assemble(&alpha, &received) else { continue };
        if !(0.2..=bounds.max_beta).contains(&beta) {
            continue;
        }
        let Ok(c) = EndpointConstraint::new(a, w, beta) else { continue };
        let class = feasibility_check(&c);
        let ok = match kind {
            InstanceKind::EmptyPolynomial | InstanceKind::GeneralPolynomial => {
                class == Feasibility::Polynomial && is_irreducible(&c)
            }
            InstanceKind::Reducible => class == Feasibility::Exponential && !tight_levels(&c).is_empty(),
            _ => class == Feasibility::Exponential && is_irreducible(&c),
        };
        if ok {
            return RandomInstance { kind, constraint: c };
        }
    }
}

/// `count` instances cycling through the irreducible kinds, with exactly
/// `polynomial` of the polynomial kinds, in shuffled order.
pub fn instance_suite<R: Rng>(rng: &mut R, count: usize, polynomial: usize, bounds: InstanceBounds) -> Vec<RandomInstance> {
    let poly = polynomial.min(count);
    let mut kinds: Vec<InstanceKind> = (0..poly)
        .map(|i| if i % 2 == 0 { InstanceKind::EmptyPolynomial } else { InstanceKind::GeneralPolynomial })
        .collect();
    kinds.extend((0..count - poly).map(|i| {
        if i % 2 == 0 {
            InstanceKind::EmptyExponential
        } else {
            InstanceKind::GeneralExponential
        }
    }));
    kinds.shuffle(rng);
    kinds.into_iter().map(|k| random_instance(rng, k, bounds)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kinds_have_their_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kinds = [
            InstanceKind::EmptyExponential,
            InstanceKind::GeneralExponential,
            InstanceKind::EmptyPolynomial,
            InstanceKind::GeneralPolynomial,
            InstanceKind::Reducible,
        ];
        for _ in 0..20 {
            for kind in kinds {
                let inst = random_instance(&mut rng, kind, InstanceBounds::default());
                let c = &inst.constraint;
                assert!(c.capacity() <= 5 && c.beta <= 4.0);
                assert_eq!(c.is_empty_start(), kind.is_empty_start());
                let f = feasibility_check(c);
                assert_eq!(f == Feasibility::Polynomial, kind.is_polynomial());
                assert_eq!(is_irreducible(c), kind != InstanceKind::Reducible);
            }
        }
    }

    #[test]
    fn suite_mix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = instance_suite(&mut rng, 20, 5, InstanceBounds::default());
        assert_eq!(s.len(), 20);
        assert_eq!(s.iter().filter(|i| i.kind.is_polynomial()).count(), 5);
        assert!(s.iter().any(|i| i.kind == InstanceKind::GeneralExponential));
        assert!(s.iter().any(|i| i.kind == InstanceKind::EmptyExponential));
    }
}
