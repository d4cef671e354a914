//! Empirical Lyapunov stability: trajectories under fixed-step RK4, the
//! sup metric, relatedness of vector fields along a smooth map, a δ–ε
//! bisection search, and the stability-transport demonstration.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::morphisms::SmoothMap;
use crate::numerics;

pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A sampled solution curve starting at time 0.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, Vec<f64>)>, horizon: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Invalid("empty trajectory".into()));
        }
        if samples[0].0 != 0.0 {
            return Err(Error::Invalid("trajectory must start at t = 0".into()));
        }
        if samples.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::Invalid("trajectory times must strictly increase".into()));
        }
        Ok(Trajectory { samples, horizon })
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        if t <= self.samples[0].0 {
            return self.samples[0].1.clone();
        }
        // Index of the first sample with time >= t.
        let hi = self.samples.partition_point(|(st, _)| *st < t);
        if hi >= self.samples.len() {
            return self.samples.last().unwrap().1.clone();
        }
        let (t0, x0) = (&self.samples[hi - 1].0, &self.samples[hi - 1].1);
        let (t1, x1) = (&self.samples[hi].0, &self.samples[hi].1);
        let a = (t - t0) / (t1 - t0);
        x0.iter().zip(x1).map(|(u, v)| u + a * (v - u)).collect()
    }

    /// Map every sample through `f`.
    pub fn map_through(&self, f: &SmoothMap) -> Trajectory {
        Trajectory {
            samples: self.samples.iter().map(|(t, x)| (*t, f.eval(x))).collect(),
            horizon: self.horizon,
        }
    }
}

/// Bound beyond which a flow counts as escaping.
pub const ESCAPE_BOUND: f64 = 1e9;

/// Integrate `ẋ = field(x)` from `x0` over `[0, horizon]` with fixed-step
/// RK4. Errors when the solution leaves the escape bound.
pub fn flow(field: &VectorField, x0: &[f64], step: f64, horizon: f64) -> Result<Trajectory> {
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut samples = vec![(t, x.clone())];
    while t < horizon - 1e-12 {
        let h = step.min(horizon - t);
        x = numerics::rk4_step(|y| field(y), &x, h);
        t += h;
        if numerics::inf_norm(&x) > ESCAPE_BOUND || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Verification(format!(
                "flow from {x0:?} escapes at t = {t:.3}"
            )));
        }
        samples.push((t, x.clone()));
    }
    Trajectory::new(samples, horizon)
}

/// Sup metric over the common horizon: resample both curves on the union of
/// their sample times and take the max Euclidean distance.
pub fn sup_metric(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.samples.is_empty() || b.samples.is_empty() {
        return Err(Error::Invalid("empty trajectory".into()));
    }
    let horizon = a.horizon.min(b.horizon);
    let mut times: Vec<f64> = a
        .samples
        .iter()
        .chain(&b.samples)
        .map(|(t, _)| *t)
        .filter(|&t| t <= horizon + 1e-12)
        .collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    times.dedup();
    let mut sup = 0.0f64;
    for t in times {
        sup = sup.max(numerics::euclid_dist(&a.value_at(t), &b.value_at(t)));
    }
    Ok(sup)
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemMapReport {
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

/// Check `Tf ∘ X = Y ∘ f` on a grid of points: the decidable shadow of "f is
/// a map of systems".
pub fn check_system_map(
    f: &SmoothMap,
    x_field: &VectorField,
    y_field: &VectorField,
    grid: &[Vec<f64>],
    tol: f64,
) -> SystemMapReport {
    let mut max_residual = 0.0f64;
    let mut worst_point = grid.first().cloned().unwrap_or_default();
    for p in grid {
        let jac = f.jacobian(p, None);
        let v = nalgebra::DVector::from_column_slice(&x_field(p));
        let lhs: Vec<f64> = (jac * v).iter().copied().collect();
        let rhs = y_field(&f.eval(p));
        let r = numerics::inf_dist(&lhs, &rhs);
        if r > max_residual {
            max_residual = r;
            worst_point = p.clone();
        }
    }
    SystemMapReport { max_residual, worst_point: worst_point.to_vec(), pass: max_residual <= tol }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilitySearchOpts {
    pub step: f64,
    /// Bisection iterations per ε.
    pub iterations: usize,
    /// Smallest δ considered a success.
    pub min_delta: f64,
}

impl Default for StabilitySearchOpts {
    fn default() -> Self {
        StabilitySearchOpts { step: 1e-2, iterations: 40, min_delta: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityVerdict {
    pub eps_grid: Vec<f64>,
    pub delta_found: Vec<Option<f64>>,
    pub stable: bool,
    pub horizon: f64,
    /// True when some accepted δ's worst deviation was still growing at the
    /// horizon — stability is then only horizon-truncated, not robust.
    pub growing_at_horizon: bool,
}

impl StabilityVerdict {
    /// δ–ε table as CSV.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("epsilon,delta\n");
        for (e, d) in self.eps_grid.iter().zip(&self.delta_found) {
            match d {
                Some(d) => out.push_str(&format!("{e:.12e},{d:.12e}\n")),
                None => out.push_str(&format!("{e:.12e},\n")),
            }
        }
        out
    }
}

fn perturbations(x0: &[f64], delta: f64) -> Vec<Vec<f64>> {
    let n = x0.len();
    let mut out = Vec::with_capacity(2 * n + 2);
    for d in 0..n {
        for s in [-1.0, 1.0] {
            let mut p = x0.to_vec();
            p[d] += s * delta;
            out.push(p);
        }
    }
    if n >= 2 {
        let diag = delta / (n as f64).sqrt();
        let mut p = x0.to_vec();
        let mut q = x0.to_vec();
        for d in 0..n {
            p[d] += diag;
            q[d] -= diag;
        }
        out.push(p);
        out.push(q);
    }
    out
}

/// Empirical δ–ε stability of `x0`: for each ε on the grid, bisect for the
/// largest δ whose perturbation ring stays within ε of the nominal curve in
/// the sup metric over `[0, horizon]`.
pub fn empirical_stability(
    field: &VectorField,
    x0: &[f64],
    eps_grid: &[f64],
    horizon: f64,
    opts: &StabilitySearchOpts,
) -> Result<StabilityVerdict> {
    let nominal = flow(field, x0, opts.step, horizon)?;
    let mut delta_found = Vec::with_capacity(eps_grid.len());
    let mut growing_at_horizon = false;

    // Sup deviation of the ring at a given δ, or None if a probe escapes.
    let probe = |delta: f64| -> Result<(f64, bool)> {
        let mut worst = 0.0f64;
        let mut growing = false;
        for p in perturbations(x0, delta) {
            let tr = flow(field, &p, opts.step, horizon)?;
            let d = sup_metric(&nominal, &tr)?;
            if d > worst {
                worst = d;
                let end =
                    numerics::euclid_dist(&nominal.value_at(horizon), &tr.value_at(horizon));
                let late = numerics::euclid_dist(
                    &nominal.value_at(0.9 * horizon),
                    &tr.value_at(0.9 * horizon),
                );
                growing = end >= 0.99 * d && end > late * 1.01;
            }
        }
        Ok((worst, growing))
    };

    for &eps in eps_grid {
        let mut hi = eps;
        let (worst, growing) = probe(hi)?;
        if worst < eps {
            delta_found.push(Some(hi));
            growing_at_horizon |= growing;
            continue;
        }
        // δ = ε overshoots; bisect between a passing lo and failing hi.
        let mut lo = 0.0f64;
        let mut lo_growing = false;
        for _ in 0..opts.iterations {
            let mid = 0.5 * (lo + hi);
            let (worst, growing) = probe(mid)?;
            if worst < eps {
                lo = mid;
                lo_growing = growing;
            } else {
                hi = mid;
            }
        }
        if lo > opts.min_delta {
            delta_found.push(Some(lo));
            growing_at_horizon |= lo_growing;
        } else {
            delta_found.push(None);
        }
    }
    let stable = delta_found.iter().all(|d| d.is_some());
    Ok(StabilityVerdict {
        eps_grid: eps_grid.to_vec(),
        delta_found,
        stable,
        horizon,
        growing_at_horizon,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportReport {
    pub relatedness: SystemMapReport,
    /// Smallest |Jacobian determinant| of `f` on the grid (openness shadow).
    pub min_jacobian: f64,
    pub source: StabilityVerdict,
    pub image: StabilityVerdict,
    pub pass: bool,
}

/// Demonstrate stability transport: verify `f` relates the fields on the
/// grid, spot-check openness, then run the δ–ε search at `x0` and at `f(x0)`.
pub fn stability_transport_demo(
    f: &SmoothMap,
    x_field: &VectorField,
    y_field: &VectorField,
    x0: &[f64],
    grid: &[Vec<f64>],
    eps_grid: &[f64],
    horizon: f64,
    tol: f64,
    opts: &StabilitySearchOpts,
) -> Result<TransportReport> {
    let relatedness = check_system_map(f, x_field, y_field, grid, tol);
    if !relatedness.pass {
        return Err(Error::Verification(format!(
            "fields are not f-related: residual {:.3e} at {:?}",
            relatedness.max_residual, relatedness.worst_point
        )));
    }
    let mut min_jacobian = f64::INFINITY;
    for p in grid {
        let jac = f.jacobian(p, None);
        min_jacobian = min_jacobian.min(jac.determinant().abs());
    }
    let source = empirical_stability(x_field, x0, eps_grid, horizon, opts)?;
    let image = empirical_stability(y_field, &f.eval(x0), eps_grid, horizon, opts)?;
    let pass = source.stable && image.stable && min_jacobian > 0.0;
    Ok(TransportReport { relatedness, min_jacobian, source, image, pass })
}

/// The conjugacy `f(x) = (1 − 2 ln x)^{−1/2}` carrying `ẋ = −x` on `ℝ^{>0}`
/// to `ẏ = −y³`, with its exact derivative `f′ = f³/x`.
pub fn decay_to_cubic_map() -> SmoothMap {
    let val = |x: f64| (1.0 - 2.0 * x.ln()).powf(-0.5);
    SmoothMap::new(1, 1, Arc::new(move |x: &[f64]| vec![val(x[0])])).with_jacobian(Arc::new(
        move |x: &[f64]| {
            let fx = val(x[0]);
            nalgebra::DMatrix::from_row_slice(1, 1, &[fx * fx * fx / x[0]])
        },
    ))
}

/// The map `f(x) = −ln x` carrying `ẋ = −x` on `ℝ^{>0}` to `ẏ = 1`, with
/// exact derivative `−1/x`.
pub fn neg_log_map() -> SmoothMap {
    SmoothMap::new(1, 1, Arc::new(|x: &[f64]| vec![-x[0].ln()]))
        .with_jacobian(Arc::new(|x: &[f64]| nalgebra::DMatrix::from_row_slice(1, 1, &[-1.0 / x[0]])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> VectorField {
        Arc::new(f)
    }

    #[test]
    fn sup_metric_identical_is_zero() {
        let f = field(|x: &[f64]| vec![-x[0]]);
        let a = flow(&f, &[1.0], 1e-2, 5.0).unwrap();
        assert_eq!(sup_metric(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn sup_metric_of_decaying_gap_is_initial_gap() {
        let f = field(|x: &[f64]| vec![-x[0]]);
        let a = flow(&f, &[1.0], 1e-3, 10.0).unwrap();
        let b = flow(&f, &[2.0], 1e-3, 10.0).unwrap();
        let d = sup_metric(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "sup {d}");
    }

    #[test]
    fn sup_metric_of_growing_gap_is_final_gap() {
        let f = field(|x: &[f64]| vec![x[0]]);
        let a = flow(&f, &[0.0], 1e-3, 5.0).unwrap();
        let b = flow(&f, &[0.1], 1e-3, 5.0).unwrap();
        let d = sup_metric(&a, &b).unwrap();
        let want = 0.1 * 5.0f64.exp();
        assert!((d - want).abs() / want < 0.01, "sup {d}, want {want}");
    }

    #[test]
    fn sup_metric_is_a_metric_on_samples() {
        let fields: [VectorField; 3] = [
            field(|x: &[f64]| vec![-x[0]]),
            field(|x: &[f64]| vec![(x[0] * 0.7).sin()]),
            field(|x: &[f64]| vec![0.3 - 0.2 * x[0]]),
        ];
        let trajs: Vec<Trajectory> =
            fields.iter().map(|f| flow(f, &[0.8], 1e-2, 4.0).unwrap()).collect();
        for a in &trajs {
            for b in &trajs {
                let dab = sup_metric(a, b).unwrap();
                let dba = sup_metric(b, a).unwrap();
                assert!((dab - dba).abs() < 1e-12);
                for c in &trajs {
                    let dac = sup_metric(a, c).unwrap();
                    let dcb = sup_metric(c, b).unwrap();
                    assert!(dab <= dac + dcb + 1e-12);
                }
            }
        }
    }

    #[test]
    fn conjugacy_to_cubic_decay_is_related() {
        let f = decay_to_cubic_map();
        let x = field(|x: &[f64]| vec![-x[0]]);
        let y = field(|y: &[f64]| vec![-y[0] * y[0] * y[0]]);
        let grid: Vec<Vec<f64>> = (0..40).map(|i| vec![0.2 + 1.4 * i as f64 / 39.0]).collect();
        let r = check_system_map(&f, &x, &y, &grid, 1e-7);
        assert!(r.pass, "residual {:.3e}", r.max_residual);
        assert!((f.eval(&[1.0])[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neg_log_carries_decay_to_unit_drift() {
        let f = neg_log_map();
        let x = field(|x: &[f64]| vec![-x[0]]);
        let y = field(|_: &[f64]| vec![1.0]);
        let grid: Vec<Vec<f64>> = (0..40).map(|i| vec![0.2 + 1.4 * i as f64 / 39.0]).collect();
        let r = check_system_map(&f, &x, &y, &grid, 1e-9);
        assert!(r.pass, "residual {:.3e}", r.max_residual);
    }

    #[test]
    fn identity_relates_field_to_itself_exactly() {
        let f = SmoothMap::identity(1);
        let x = field(|x: &[f64]| vec![x[0].cos()]);
        let grid: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.3]).collect();
        let r = check_system_map(&f, &x, &x, &grid, 0.0);
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn linear_decay_is_stable_with_delta_eq_eps() {
        let f = field(|x: &[f64]| vec![-x[0]]);
        let v =
            empirical_stability(&f, &[1.0], &[0.1, 0.01], 10.0, &StabilitySearchOpts::default())
                .unwrap();
        assert!(v.stable);
        for (e, d) in v.eps_grid.iter().zip(&v.delta_found) {
            assert!(d.unwrap() >= e * 0.99);
        }
        assert!(!v.growing_at_horizon);
    }

    #[test]
    fn unit_drift_is_stable_though_unbounded() {
        let f = field(|_: &[f64]| vec![1.0]);
        let v = empirical_stability(&f, &[3.0], &[0.1], 10.0, &StabilitySearchOpts::default())
            .unwrap();
        assert!(v.stable);
    }

    #[test]
    fn exponential_growth_needs_tiny_delta_and_is_flagged() {
        let f = field(|x: &[f64]| vec![x[0]]);
        let v = empirical_stability(&f, &[0.0], &[0.1], 10.0, &StabilitySearchOpts::default())
            .unwrap();
        let d = v.delta_found[0].expect("a horizon-truncated delta");
        assert!(d <= 0.1 * (-10.0f64).exp() * 1.05, "delta {d}");
        assert!(v.growing_at_horizon);
    }

    #[test]
    fn transport_along_conjugacy() {
        let f = decay_to_cubic_map();
        let x = field(|x: &[f64]| vec![-x[0]]);
        let y = field(|y: &[f64]| vec![-y[0] * y[0] * y[0]]);
        let grid: Vec<Vec<f64>> = (0..20).map(|i| vec![0.5 + i as f64 * 0.05]).collect();
        let r = stability_transport_demo(
            &f,
            &x,
            &y,
            &[1.0],
            &grid,
            &[0.1],
            8.0,
            1e-7,
            &StabilitySearchOpts::default(),
        )
        .unwrap();
        assert!(r.pass);
        assert!(r.min_jacobian > 0.0);
    }

    #[test]
    fn transport_along_neg_log() {
        let f = neg_log_map();
        let x = field(|x: &[f64]| vec![-x[0]]);
        let y = field(|_: &[f64]| vec![1.0]);
        let grid: Vec<Vec<f64>> = (0..20).map(|i| vec![0.5 + i as f64 * 0.05]).collect();
        let r = stability_transport_demo(
            &f,
            &x,
            &y,
            &[1.0],
            &grid,
            &[0.2],
            8.0,
            1e-9,
            &StabilitySearchOpts::default(),
        )
        .unwrap();
        assert!(r.pass);
    }

    #[test]
    fn escape_is_reported() {
        let f = field(|x: &[f64]| vec![x[0] * x[0] + 1.0]);
        let err = flow(&f, &[1.0], 1e-3, 10.0);
        assert!(err.is_err());
    }

    #[test]
    fn pushforward_is_lipschitz_on_compact_windows() {
        // Curves confined to [0.5, 2]; L bounds |f′| there.
        let f = neg_log_map();
        let decay = field(|x: &[f64]| vec![-0.1 * x[0]]);
        let a = flow(&decay, &[2.0], 1e-2, 5.0).unwrap();
        let b = flow(&decay, &[1.5], 1e-2, 5.0).unwrap();
        let l = 1.0 / 0.5;
        let lhs = sup_metric(&a.map_through(&f), &b.map_through(&f)).unwrap();
        let rhs = l * sup_metric(&a, &b).unwrap();
        assert!(lhs <= rhs + 1e-12, "{lhs} vs {rhs}");
    }
}
