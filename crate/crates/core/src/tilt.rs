//! Relative-entropy projection of weighted Poisson classes onto linear constraints.
//!
//! Each class `k` (weight `α_k`) carries a distribution `π_k` on the number
//! of extra balls `j`. Head entries `j < J_k` may carry indicator-like
//! features; entries `j ≥ J_k` form a tail whose only feature is `j` itself.
//! Minimizing `Σ α_k D(π_k ‖ 𝒫(β))` subject to feature targets has the dual
//!
//! `h(y, λ) = Σ_k α_k log Z_k(y, λ) − y·m − λ·b`,
//!
//! with `Z_k = Σ_j 𝒫_j(β) exp(y j + λ·f_k(j))`. `h` is convex, its gradient
//! is the constraint residual and its Hessian is the feature covariance, so
//! damped Newton converges to the unique optimum and the rate is `−h`.
//! The tail sum is closed form: `Σ_{j≥J} 𝒫_j(β)e^{yj} = e^{(ρ−1)β} P(Po(ρβ) ≥ J)`
//! with `ρ = e^y`.

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::scalar::{count, lit, to_f64, Real};
use crate::special::{ln_poisson_sf, log_sum_exp, poisson_log_pmf_total};

/// One class of the projection problem.
#[derive(Debug, Clone)]
pub(crate) struct TiltClass<T> {
    pub weight: T,
    /// Head entries: `None` excludes `j` from the support, otherwise the
    /// sparse feature vector of `j`.
    pub head: Vec<Option<Vec<(usize, T)>>>,
    /// Whether `j ≥ head.len()` is in the support.
    pub tail: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct TiltProblem<T> {
    pub beta: T,
    pub classes: Vec<TiltClass<T>>,
    /// Targets for the head features.
    pub targets: Vec<T>,
    /// Target for `Σ α_k E_k[j]`; `None` drops the mean multiplier.
    pub mean_target: Option<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct TiltSolution<T> {
    /// `log ρ` (zero without a mean multiplier).
    pub y: T,
    pub lambdas: Vec<T>,
    pub log_z: Vec<T>,
    /// Dual value at the optimum; the minimal relative entropy is `−h`.
    pub dual: T,
    pub residual: T,
    pub iterations: usize,
}

struct Eval<T> {
    h: T,
    grad: Vec<T>,
    hess: Vec<Vec<T>>,
    log_z: Vec<T>,
}

impl<T: Real> TiltProblem<T> {
    fn dim(&self) -> usize {
        self.targets.len() + usize::from(self.mean_target.is_some())
    }

    fn offset(&self) -> usize {
        usize::from(self.mean_target.is_some())
    }

    fn split(&self, x: &[T]) -> (T, Vec<T>) {
        if self.mean_target.is_some() {
            (x[0], x[1..].to_vec())
        } else {
            (T::zero(), x.to_vec())
        }
    }

    /// Log-weights of the head entries and the log tail mass for class `k`.
    fn log_weights(&self, k: usize, y: T, lam: &[T]) -> (Vec<Option<T>>, Option<T>) {
        let cls = &self.classes[k];
        let head: Vec<Option<T>> = cls
            .head
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.as_ref().map(|feats| {
                    let mut v = poisson_log_pmf_total(j, self.beta) + y * count::<T>(j);
                    for &(a, c) in feats {
                        v += lam[a] * c;
                    }
                    v
                })
            })
            .collect();
        let tail = if cls.tail {
            let rho = y.exp();
            let n = cls.head.len() as i64;
            Some((rho - T::one()) * self.beta + ln_poisson_sf(n - 1, rho * self.beta))
        } else {
            None
        };
        (head, tail)
    }

    fn log_partition(&self, k: usize, y: T, lam: &[T]) -> T {
        let (head, tail) = self.log_weights(k, y, lam);
        let mut all: Vec<T> = head.into_iter().flatten().collect();
        all.extend(tail);
        log_sum_exp(&all)
    }

    fn dual_value(&self, x: &[T]) -> T {
        let (y, lam) = self.split(x);
        let mut h = T::zero();
        for k in 0..self.classes.len() {
            h += self.classes[k].weight * self.log_partition(k, y, &lam);
        }
        if let Some(m) = self.mean_target {
            h -= y * m;
        }
        for (l, b) in lam.iter().zip(&self.targets) {
            h -= *l * *b;
        }
        h
    }

    fn evaluate(&self, x: &[T]) -> Eval<T> {
        let n = self.dim();
        let off = self.offset();
        let (y, lam) = self.split(x);
        let rate = y.exp() * self.beta;
        let mut grad = vec![T::zero(); n];
        let mut hess = vec![vec![T::zero(); n]; n];
        let mut log_z = Vec::with_capacity(self.classes.len());
        let mut h = T::zero();
        for (k, cls) in self.classes.iter().enumerate() {
            let w = cls.weight;
            let (head, tail) = self.log_weights(k, y, &lam);
            let mut all: Vec<T> = head.iter().flatten().copied().collect();
            all.extend(tail);
            let lz = log_sum_exp(&all);
            log_z.push(lz);
            h += w * lz;

            // Head entries as (probability, dense feature vector).
            let entries: Vec<(T, Vec<T>)> = head
                .iter()
                .enumerate()
                .filter_map(|(j, v)| {
                    v.map(|l| {
                        let mut phi = vec![T::zero(); n];
                        if off == 1 {
                            phi[0] = count::<T>(j);
                        }
                        for &(a, c) in cls.head[j].as_ref().unwrap() {
                            phi[off + a] += c;
                        }
                        ((l - lz).exp(), phi)
                    })
                })
                .collect();
            // Tail raw moments: mass, Σ j π_j, Σ j² π_j.
            let tail_moments = tail.map(|lt| {
                let pt = (lt - lz).exp();
                let jn = cls.head.len() as i64;
                let s1 = ln_poisson_sf(jn - 1, rate);
                if !s1.is_finite() {
                    // Rate underflow: the tail sits on its first entry.
                    let n0 = count::<T>(cls.head.len());
                    return (pt, pt * n0, pt * n0 * n0);
                }
                let r1 = (ln_poisson_sf(jn - 2, rate) - s1).exp();
                let r2 = (ln_poisson_sf(jn - 3, rate) - s1).exp();
                (pt, pt * rate * r1, pt * (rate * rate * r2 + rate * r1))
            });

            let mut mu = vec![T::zero(); n];
            for (p, phi) in &entries {
                for r in 0..n {
                    mu[r] += *p * phi[r];
                }
            }
            if let (Some((_, m1, _)), 1) = (tail_moments, off) {
                mu[0] += m1;
            }
            for (p, phi) in &entries {
                for r in 0..n {
                    let dr = phi[r] - mu[r];
                    if dr == T::zero() {
                        continue;
                    }
                    for s in 0..n {
                        hess[r][s] += w * *p * dr * (phi[s] - mu[s]);
                    }
                }
            }
            if let Some((pt, m1, m2)) = tail_moments {
                // Tail entries have feature vector (j, 0, …, 0).
                let m = if off == 1 { mu[0] } else { T::zero() };
                let jc1 = m1 - m * pt; // Σ (j − μ_0) π_j over the tail
                if off == 1 {
                    hess[0][0] += w * (m2 - lit::<T>(2.0) * m * m1 + m * m * pt);
                    for r in 1..n {
                        let cross = -mu[r] * jc1;
                        hess[0][r] += w * cross;
                        hess[r][0] += w * cross;
                    }
                }
                for r in off..n {
                    for s in off..n {
                        hess[r][s] += w * pt * mu[r] * mu[s];
                    }
                }
            }
            for r in 0..n {
                grad[r] += w * mu[r];
            }
        }
        if let Some(m) = self.mean_target {
            grad[0] -= m;
            h -= y * m;
        }
        for (a, b) in self.targets.iter().enumerate() {
            grad[off + a] -= *b;
            h -= lam[a] * *b;
        }
        Eval { h, grad, hess, log_z }
    }
}

/// Options for [`solve_tilt`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions<T> {
    pub max_iterations: usize,
    pub tolerance: T,
    /// Levenberg shift added to the Hessian diagonal, relative to its trace.
    pub ridge: T,
}

impl<T: Real> NewtonOptions<T> {
    pub fn for_scale(scale: T) -> Self {
        Self {
            max_iterations: 200,
            tolerance: lit::<T>(T::SOLVER_TOL) * scale.max(T::one()),
            ridge: T::zero(),
        }
    }
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Damped Newton on the dual from the starting point `x0`.
pub(crate) fn solve_tilt<T: Real>(
    problem: &TiltProblem<T>,
    x0: &[T],
    opts: NewtonOptions<T>,
) -> Result<TiltSolution<T>> {
    let n = problem.dim();
    assert_eq!(x0.len(), n, "starting point has wrong dimension");
    let mut x = x0.to_vec();
    let mut ev = problem.evaluate(&x);
    let mut best = inf_norm(&ev.grad);
    let mut iterations = 0;
    let finish = |x: Vec<T>, ev: Eval<T>, iterations| {
        let (y, lambdas) = problem.split(&x);
        TiltSolution {
            y,
            lambdas,
            dual: ev.h,
            residual: inf_norm(&ev.grad),
            log_z: ev.log_z,
            iterations,
        }
    };
    if !ev.h.is_finite() {
        return Err(Error::NewtonDivergence { iterations: 0, residual: f64::INFINITY });
    }
    while iterations < opts.max_iterations {
        let gnorm = inf_norm(&ev.grad);
        best = best.min(gnorm);
        if gnorm <= opts.tolerance {
            return Ok(finish(x, ev, iterations));
        }
        iterations += 1;
        let mut hess = ev.hess.clone();
        if opts.ridge > T::zero() {
            let tr: T = (0..n).map(|i| hess[i][i]).sum::<T>() / count::<T>(n.max(1));
            for (i, row) in hess.iter_mut().enumerate() {
                row[i] += opts.ridge * tr.max(T::one());
            }
        }
        let rhs: Vec<T> = ev.grad.iter().map(|&g| -g).collect();
        let mut dir = solve_dense(hess.clone(), rhs.clone()).or_else(|| {
            let tr: T = (0..n).map(|i| hess[i][i]).sum::<T>().max(T::epsilon());
            let mut reg = hess;
            for (i, row) in reg.iter_mut().enumerate() {
                row[i] += tr * lit(1e-10);
            }
            solve_dense(reg, rhs)
        });
        let slope = |d: &[T]| d.iter().zip(&ev.grad).map(|(&a, &b)| a * b).sum::<T>();
        if dir.as_ref().is_none_or(|d| !(slope(d) < T::zero())) {
            dir = Some(ev.grad.iter().map(|&g| -g).collect());
        }
        let dir = dir.unwrap();
        let gd = slope(&dir);
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<T> = x.iter().zip(&dir).map(|(&a, &d)| a + t * d).collect();
            let h_new = problem.dual_value(&cand);
            if h_new.is_finite() {
                if h_new <= ev.h + lit::<T>(1e-4) * t * gd {
                    accepted = Some(cand);
                    break;
                }
                // At rounding level the dual cannot discriminate; fall back on the gradient.
                if (h_new - ev.h).abs() <= T::epsilon() * lit::<T>(64.0) * (T::one() + ev.h.abs()) {
                    let e = problem.evaluate(&cand);
                    if inf_norm(&e.grad) < gnorm {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            t *= lit(0.5);
        }
        match accepted {
            Some(c) => {
                x = c;
                ev = problem.evaluate(&x);
            }
            None => break,
        }
    }
    let gnorm = inf_norm(&ev.grad);
    if gnorm <= opts.tolerance {
        return Ok(finish(x, ev, iterations));
    }
    Err(Error::NewtonDivergence { iterations, residual: to_f64(best.min(gnorm)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::poisson_pmf;

    #[test]
    fn unconstrained_mean_gives_poisson() {
        let p = TiltProblem {
            beta: 2.0f64,
            classes: vec![TiltClass { weight: 1.0, head: vec![], tail: true }],
            targets: vec![],
            mean_target: Some(2.0),
        };
        let s = solve_tilt(&p, &[0.3], NewtonOptions::for_scale(2.0)).unwrap();
        assert!(s.y.abs() < 1e-12);
        assert!(s.dual.abs() < 1e-12);
    }

    #[test]
    fn tilted_mean_matches_poisson_kl() {
        // Mean 3 under reference Po(2): optimum is Po(3), D = 3 ln 1.5 − 1.
        let p = TiltProblem {
            beta: 2.0f64,
            classes: vec![TiltClass { weight: 1.0, head: vec![], tail: true }],
            targets: vec![],
            mean_target: Some(3.0),
        };
        let s = solve_tilt(&p, &[0.0], NewtonOptions::for_scale(3.0)).unwrap();
        assert!((s.y - 1.5f64.ln()).abs() < 1e-12);
        assert!((-s.dual - (3.0 * 1.5f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let feats = |a: usize| Some(vec![(a, 1.0f64)]);
        let p = TiltProblem {
            beta: 1.5f64,
            classes: vec![
                TiltClass { weight: 0.6, head: vec![feats(0), feats(1), None], tail: true },
                TiltClass { weight: 0.4, head: vec![feats(1), Some(vec![(2, 0.5), (0, 1.0)])], tail: true },
            ],
            targets: vec![0.2, 0.3, 0.1],
            mean_target: Some(1.5),
        };
        let x = [0.2f64, -0.3, 0.4, 0.1];
        let e = p.evaluate(&x);
        let h = 1e-6;
        for r in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[r] += h;
            xm[r] -= h;
            let fd = (p.dual_value(&xp) - p.dual_value(&xm)) / (2.0 * h);
            assert!((fd - e.grad[r]).abs() < 1e-8, "grad {r}: {fd} vs {}", e.grad[r]);
            let (gp, gm) = (p.evaluate(&xp).grad, p.evaluate(&xm).grad);
            for s in 0..4 {
                let fd = (gp[s] - gm[s]) / (2.0 * h);
                assert!((fd - e.hess[s][r]).abs() < 1e-7, "hess {s},{r}: {fd} vs {}", e.hess[s][r]);
            }
        }
    }

    #[test]
    fn log_partition_tail_is_exact() {
        let p = TiltProblem {
            beta: 1.3f64,
            classes: vec![TiltClass { weight: 1.0, head: vec![Some(vec![]), Some(vec![])], tail: true }],
            targets: vec![],
            mean_target: Some(1.0),
        };
        let y = 0.7f64;
        let direct: f64 = (0..200).map(|j| poisson_pmf(j, 1.3) * (y * j as f64).exp()).sum();
        assert!((p.log_partition(0, y, &[]) - direct.ln()).abs() < 1e-13);
    }
}
