//! Composite Simpson and tanh–sinh quadrature.

use crate::scalar::{count, lit, Real};

/// Composite Simpson rule over uniformly spaced samples with spacing `h`.
/// An even number of samples finishes the last interval with the trapezoid rule.
pub fn simpson<T: Real>(values: &[T], h: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    if n == 2 {
        return h * (values[0] + values[1]) * lit(0.5);
    }
    let odd_end = if n % 2 == 1 { n - 1 } else { n - 2 };
    let mut s = values[0] + values[odd_end];
    for (i, &v) in values.iter().enumerate().take(odd_end).skip(1) {
        s += if i % 2 == 1 { lit::<T>(4.0) * v } else { lit::<T>(2.0) * v };
    }
    let mut total = s * h / lit(3.0);
    if odd_end != n - 1 {
        total += h * (values[n - 2] + values[n - 1]) * lit(0.5);
    }
    total
}

/// Tanh–sinh (double exponential) quadrature of `f` over the open interval
/// `(a, b)`. The integrand is never evaluated at the endpoints, which makes
/// the rule suitable for integrable endpoint singularities. Returns `+∞` if
/// the integrand is infinite at any node.
pub fn tanh_sinh<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T) -> T {
    if b <= a {
        return T::zero();
    }
    let half = (b - a) * lit(0.5);
    let pi_2 = T::FRAC_PI_2();
    let t_max = lit::<T>(6.5);
    let min_gap = T::epsilon() * lit(4.0);
    let mut eval = |t: T| -> T {
        let u = pi_2 * t.sinh();
        let cu = u.cosh();
        let w = pi_2 * t.cosh() / (cu * cu);
        // Distance from the nearer endpoint, in units of `half`, without cancellation.
        let gap = (-u.abs()).exp() / cu;
        if gap < min_gap {
            return T::zero();
        }
        let x = if t >= T::zero() { b - half * gap } else { a + half * gap };
        if x <= a || x >= b {
            return T::zero();
        }
        let v = f(x);
        if v.is_infinite() {
            return T::infinity();
        }
        w * v
    };
    let mut h = T::one();
    let mut sum = eval(T::zero());
    let mut k = 1usize;
    loop {
        let t = count::<T>(k) * h;
        if t > t_max {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    if sum.is_infinite() {
        return sum;
    }
    let mut estimate = sum * h;
    for _level in 0..10 {
        h *= lit(0.5);
        let mut add = T::zero();
        let mut k = 1usize;
        loop {
            let t = count::<T>(k) * h;
            if t > t_max {
                break;
            }
            add += eval(t) + eval(-t);
            k += 2;
        }
        if add.is_infinite() {
            return add;
        }
        sum += add;
        let next = sum * h;
        let done = (next - estimate).abs() <= tol * (T::one() + next.abs());
        estimate = next;
        if done {
            break;
        }
    }
    estimate * half
}
