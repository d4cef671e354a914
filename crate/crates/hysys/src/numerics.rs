//! Small numeric utilities shared across modules: a fixed-step RK4 stage,
//! Halton low-discrepancy sampling, and box-clipped sample generation.

use crate::phase_space::BoxSpace;

/// One classical Runge-Kutta step of size `h` for `x' = f(x)`.
pub fn rk4_step<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let k1 = f(x);
    let mut tmp = vec![0.0; n];
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = f(&tmp);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = f(&tmp);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = f(&tmp);
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `i`-th element of the van der Corput sequence in the given base.
pub fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Effective finite sampling window for a (possibly unbounded) interval.
/// Unbounded ends are clipped to a window of width 8 around the finite data.
fn sample_window(lo: f64, hi: f64) -> (f64, f64) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => (lo, lo + 8.0),
        (false, true) => (hi - 8.0, hi),
        (false, false) => (-4.0, 4.0),
    }
}

/// Deterministic low-discrepancy samples inside a box, clipped to a finite
/// window on unbounded coordinates. Open endpoints are nudged inward.
pub fn box_samples(space: &BoxSpace, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = space.dim();
    if dim == 0 {
        return vec![vec![]];
    }
    let offset = seed % 8191 + 1;
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let idx = offset + s as u64;
        let mut coords = Vec::with_capacity(dim);
        for (d, iv) in space.intervals().iter().enumerate() {
            let (lo, hi) = sample_window(iv.lo, iv.hi);
            let width = (hi - lo).max(1e-12);
            let u = halton(idx, PRIMES[d % PRIMES.len()]);
            let mut x = lo + u * width;
            let nudge = 1e-9 * width;
            if !iv.lo_closed && x <= iv.lo {
                x = iv.lo + nudge;
            }
            if !iv.hi_closed && x >= iv.hi {
                x = iv.hi - nudge;
            }
            // Put the first couple of samples on finite closed lower faces so
            // boundary behaviour (guards, ground contact) gets exercised.
            if s < 2 && iv.lo_closed && iv.lo.is_finite() {
                x = iv.lo;
            }
            coords.push(x);
        }
        out.push(coords);
    }
    out
}

/// Infinity norm of a vector.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Infinity norm of the difference of two equal-length vectors.
pub fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Euclidean distance.
pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
