//! Executions of closed deterministic hybrid systems: fixed-step RK4 flow,
//! bisection event localization, jump application, Zeno detection with a
//! geometric accumulation estimate, and execution verification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::morphisms::{HybridSSub, PhaseSpaceMorphism};
use crate::numerics;
use crate::phase_space::{BoxSpace, HybridPhaseSpace, Interval, JumpRelation, TaggedPoint};
use crate::systems::{DeterministicControl, EventFn, FieldFn, JumpFn};
use std::sync::Arc;

/// A strictly increasing finite list of transition times; the last entry may
/// be `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimePartition {
    pub times: Vec<f64>,
}

impl TimePartition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || !times[0].is_finite() {
            return Err(Error::Invalid("partition needs a finite first time".into()));
        }
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Invalid("partition times must strictly increase".into()));
            }
        }
        Ok(TimePartition { times })
    }
}

/// One continuous arc of an execution: constant node, sampled flow.
#[derive(Clone, Debug, Serialize)]
pub struct ExecArc {
    pub node: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: Vec<(f64, Vec<f64>)>,
}

/// One discrete transition.
#[derive(Clone, Debug, Serialize)]
pub struct JumpRecord {
    pub t: f64,
    pub from_node: usize,
    pub from_coords: Vec<f64>,
    pub to_node: usize,
    pub to_coords: Vec<f64>,
    pub edge: usize,
}

/// An alternating sequence of flow arcs and jumps.
#[derive(Clone, Debug, Serialize)]
pub struct Execution {
    pub arcs: Vec<ExecArc>,
    pub jumps: Vec<JumpRecord>,
    /// Accumulation-time estimate when the run was cut short as Zeno.
    pub zeno: Option<f64>,
}

impl Execution {
    /// Transition times (arc boundaries) as a partition.
    pub fn partition(&self) -> TimePartition {
        let mut times = vec![self.arcs.first().map(|a| a.t_start).unwrap_or(0.0)];
        for a in &self.arcs {
            times.push(a.t_end);
        }
        TimePartition { times }
    }

    pub fn final_state(&self) -> Option<TaggedPoint> {
        self.arcs.last().and_then(|a| {
            a.samples.last().map(|(_, c)| TaggedPoint::new(a.node, c.clone()))
        })
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.t).collect()
    }

    /// Linear interpolation inside the arc containing `t`.
    pub fn sample_at(&self, t: f64) -> Option<TaggedPoint> {
        let arc = self
            .arcs
            .iter()
            .find(|a| t >= a.t_start - 1e-12 && t <= a.t_end + 1e-12)?;
        let samples = &arc.samples;
        if samples.is_empty() {
            return None;
        }
        if t <= samples[0].0 {
            return Some(TaggedPoint::new(arc.node, samples[0].1.clone()));
        }
        for w in samples.windows(2) {
            let (t0, x0) = (&w[0].0, &w[0].1);
            let (t1, x1) = (&w[1].0, &w[1].1);
            if t <= *t1 {
                let a = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
                let coords = x0
                    .iter()
                    .zip(x1)
                    .map(|(u, v)| u + a * (v - u))
                    .collect();
                return Some(TaggedPoint::new(arc.node, coords));
            }
        }
        samples
            .last()
            .map(|(_, c)| Some(TaggedPoint::new(arc.node, c.clone())))
            .unwrap_or(None)
    }

    /// Trajectory CSV: `arc_index,node,t,coord_0,…` (padded to the widest node).
    pub fn trajectory_csv(&self, space: &HybridPhaseSpace) -> String {
        let width = space.nodes.iter().map(|n| n.space.dim()).max().unwrap_or(0);
        let mut out = String::from("arc_index,node,t");
        for i in 0..width {
            out.push_str(&format!(",coord_{i}"));
        }
        out.push('\n');
        for (k, arc) in self.arcs.iter().enumerate() {
            for (t, coords) in &arc.samples {
                out.push_str(&format!("{k},{},{t:.12e}", arc.node));
                for i in 0..width {
                    match coords.get(i) {
                        Some(c) => out.push_str(&format!(",{c:.12e}")),
                        None => out.push(','),
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Jump CSV: `t,from_node,from_coords…,to_node,to_coords…,edge`.
    pub fn jumps_csv(&self, space: &HybridPhaseSpace) -> String {
        let width = space.nodes.iter().map(|n| n.space.dim()).max().unwrap_or(0);
        let mut out = String::from("t,from_node");
        for i in 0..width {
            out.push_str(&format!(",from_coord_{i}"));
        }
        out.push_str(",to_node");
        for i in 0..width {
            out.push_str(&format!(",to_coord_{i}"));
        }
        out.push_str(",edge\n");
        for j in &self.jumps {
            out.push_str(&format!("{:.12e},{}", j.t, j.from_node));
            for i in 0..width {
                match j.from_coords.get(i) {
                    Some(c) => out.push_str(&format!(",{c:.12e}")),
                    None => out.push(','),
                }
            }
            out.push_str(&format!(",{}", j.to_node));
            for i in 0..width {
                match j.to_coords.get(i) {
                    Some(c) => out.push_str(&format!(",{c:.12e}")),
                    None => out.push(','),
                }
            }
            out.push_str(&format!(",{}\n", j.edge));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegratorOptions {
    pub step: f64,
    pub event_refine_tol: f64,
    pub max_jumps: usize,
    pub min_dwell: f64,
    pub horizon: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            step: 1e-3,
            event_refine_tol: 1e-9,
            max_jumps: 200,
            min_dwell: 1e-3,
            horizon: 10.0,
        }
    }
}

/// Consecutive sub-minimum dwells after which the run is declared Zeno.
const ZENO_RUN: usize = 3;

/// Compute the unique execution of a closed deterministic hybrid system.
///
/// Flow is classical fixed-step RK4 clamped into the closed box; an arc ends
/// at the first time an event function is ≤ 0 *and* the jump map moves the
/// point, localized by bisection. If `ρ(x0) ≠ x0` the jump is applied once
/// before flowing. Terminates at the horizon, at `max_jumps`, or on a Zeno
/// verdict with a geometric extrapolation of the accumulation time.
pub fn execute(
    c: &DeterministicControl,
    x0: &TaggedPoint,
    opts: &IntegratorOptions,
) -> Result<Execution> {
    if !c.ssub.closed {
        return Err(Error::Invalid("execute needs a closed system".into()));
    }
    if !c.ssub.total.contains(x0)? {
        let (index, value) = c.ssub.total.space(x0.node).violation(&x0.coords).unwrap_or((0, f64::NAN));
        return Err(Error::Containment { index, value });
    }
    let state = &c.ssub.state;
    let mut arcs = Vec::new();
    let mut jumps: Vec<JumpRecord> = Vec::new();
    let mut zeno = None;
    let mut t = 0.0f64;
    let mut x = x0.clone();

    // Jump-first convention.
    if c.jump_changes(&x)? {
        let target = c.jump_at(&x);
        let edge = state
            .lambda_lookup(&x, &target, opts.event_refine_tol)
            .ok_or_else(|| Error::Verification("initial jump admitted by no relation".into()))?;
        jumps.push(JumpRecord {
            t,
            from_node: x.node,
            from_coords: x.coords.clone(),
            to_node: target.node,
            to_coords: target.coords.clone(),
            edge,
        });
        x = target;
    }

    let mut dwell_run = 0usize;
    let mut last_dwells: Vec<f64> = Vec::new();

    'outer: while t < opts.horizon - 1e-15 {
        let node = x.node;
        let space = c.ssub.total.space(node).clone();
        let field = |coords: &[f64]| c.field_at(&TaggedPoint::new(node, coords.to_vec()));
        let cond = |coords: &[f64]| -> Result<bool> {
            let p = TaggedPoint::new(node, coords.to_vec());
            Ok(c.min_event(&p) <= 0.0 && c.jump_changes(&p)?)
        };
        let arc_start = t;
        let mut samples = vec![(t, x.coords.clone())];
        let mut event: Option<(f64, Vec<f64>)> = None;
        loop {
            let h = opts.step.min(opts.horizon - t);
            if h <= 1e-15 {
                break;
            }
            let mut next = numerics::rk4_step(field, &x.coords, h);
            space.clamp(&mut next);
            if cond(&next)? {
                // Bisect the step for the first crossing time.
                let (mut lo, mut hi) = (0.0f64, h);
                while hi - lo > opts.event_refine_tol {
                    let mid = 0.5 * (lo + hi);
                    let mut xm = numerics::rk4_step(field, &x.coords, mid);
                    space.clamp(&mut xm);
                    if cond(&xm)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let mut xe = numerics::rk4_step(field, &x.coords, hi);
                space.clamp(&mut xe);
                event = Some((t + hi, xe));
                break;
            }
            t += h;
            x = TaggedPoint::new(node, next);
            samples.push((t, x.coords.clone()));
            if t >= opts.horizon - 1e-15 {
                break;
            }
        }
        match event {
            None => {
                arcs.push(ExecArc { node, t_start: arc_start, t_end: t, samples });
                break 'outer;
            }
            Some((te, xe)) => {
                samples.push((te, xe.clone()));
                arcs.push(ExecArc { node, t_start: arc_start, t_end: te, samples });
                let from = TaggedPoint::new(node, xe);
                let target = c.jump_at(&from);
                let edge = state
                    .lambda_lookup(&from, &target, 1e-7)
                    .ok_or_else(|| {
                        Error::Verification(format!(
                            "jump {from:?} -> {target:?} admitted by no relation"
                        ))
                    })?;
                jumps.push(JumpRecord {
                    t: te,
                    from_node: from.node,
                    from_coords: from.coords.clone(),
                    to_node: target.node,
                    to_coords: target.coords.clone(),
                    edge,
                });
                let dwell = te - arc_start;
                if dwell < opts.min_dwell {
                    dwell_run += 1;
                } else {
                    dwell_run = 0;
                }
                last_dwells.push(dwell);
                t = te;
                x = target;
                if dwell_run >= ZENO_RUN {
                    let n = last_dwells.len();
                    let g = last_dwells[n - 1];
                    let prev = last_dwells[n - 2];
                    let q = if prev > 0.0 { (g / prev).min(0.999) } else { 0.0 };
                    let acc = if q > 0.0 && q < 1.0 { t + g * q / (1.0 - q) } else { t };
                    zeno = Some(acc);
                    break 'outer;
                }
                if jumps.len() >= opts.max_jumps {
                    break 'outer;
                }
            }
        }
    }
    if arcs.is_empty() {
        arcs.push(ExecArc { node: x.node, t_start: t, t_end: t, samples: vec![(t, x.coords.clone())] });
    }
    Ok(Execution { arcs, jumps, zeno })
}

/// The universal system of a time partition: one node per sub-interval, unit
/// speed clock, and a singleton jump relation at each right endpoint.
pub fn universal_system(partition: &TimePartition) -> Result<DeterministicControl> {
    let times = &partition.times;
    if times.len() < 2 {
        return Err(Error::Invalid("partition needs at least two times".into()));
    }
    let mut hps = HybridPhaseSpace::new("universal");
    for j in 0..times.len() - 1 {
        let (lo, hi) = (times[j], times[j + 1]);
        let iv = if hi.is_finite() {
            Interval::closed(lo, hi)
        } else {
            Interval::half_line(lo)
        };
        hps.add_node(format!("w{j}"), BoxSpace::new(vec![iv]));
    }
    for j in 0..times.len().saturating_sub(2) {
        let tj = times[j + 1];
        hps.add_edge(
            format!("advance{j}"),
            j,
            j + 1,
            JumpRelation::finite(vec![(vec![tj], vec![tj])]),
        );
    }
    let space = Arc::new(hps);
    let ssub = HybridSSub::closed(space);
    let field: FieldFn = Arc::new(|_p: &TaggedPoint| vec![1.0]);
    let times2 = times.clone();
    let n_nodes = times.len() - 1;
    let jump: JumpFn = Arc::new(move |p: &TaggedPoint| {
        let j = p.node;
        if j + 1 < n_nodes && p.coords[0] >= times2[j + 1] - 1e-12 {
            TaggedPoint::new(j + 1, vec![times2[j + 1]])
        } else {
            p.clone()
        }
    });
    let mut events: Vec<Vec<EventFn>> = Vec::new();
    for j in 0..n_nodes {
        if j + 1 < n_nodes {
            let tj = times[j + 1];
            let e: EventFn = Arc::new(move |x: &[f64]| tj - x[0]);
            events.push(vec![e]);
        } else {
            events.push(vec![]);
        }
    }
    Ok(DeterministicControl { ssub, field, jump, events })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExecutionReport {
    pub violations: Vec<String>,
    pub max_ode_residual: f64,
    pub max_jump_residual: f64,
    pub pass: bool,
}

/// Check an execution against its system: each arc is an approximate integral
/// curve (midpoint re-evaluation), and each jump applies `ρ` onto the start
/// of the next arc along an admissible relation.
pub fn verify_execution(e: &Execution, c: &DeterministicControl, tol: f64) -> ExecutionReport {
    let mut violations = Vec::new();
    let mut max_ode = 0.0f64;
    let mut max_jump = 0.0f64;
    for (k, arc) in e.arcs.iter().enumerate() {
        for w in arc.samples.windows(2) {
            let (t0, x0) = (&w[0].0, &w[0].1);
            let (t1, x1) = (&w[1].0, &w[1].1);
            let dt = t1 - t0;
            // Windows produced by event refinement can be ~1e-9 long; there
            // the finite difference is dominated by bisection noise, so only
            // windows of meaningful length are checked.
            if dt <= 1e-7 {
                continue;
            }
            let mid: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| 0.5 * (a + b)).collect();
            let v = c.field_at(&TaggedPoint::new(arc.node, mid));
            let scale = 1.0 + numerics::inf_norm(&v);
            let mut r = 0.0f64;
            for i in 0..x0.len() {
                r = r.max(((x1[i] - x0[i]) / dt - v[i]).abs());
            }
            max_ode = max_ode.max(r / scale);
            if r / scale > tol && violations.len() < 5 {
                violations.push(format!("arc {k}: ODE residual {:.3e} at t={t0}", r / scale));
            }
        }
    }
    for (k, j) in e.jumps.iter().enumerate() {
        let from = TaggedPoint::new(j.from_node, j.from_coords.clone());
        let to = TaggedPoint::new(j.to_node, j.to_coords.clone());
        let applied = c.jump_at(&from);
        let r = if applied.node != to.node {
            f64::INFINITY
        } else {
            numerics::inf_dist(&applied.coords, &to.coords)
        };
        max_jump = max_jump.max(r);
        if r > tol && violations.len() < 10 {
            violations.push(format!("jump {k}: ρ mismatch {r:.3e} at t={}", j.t));
        }
        if c
            .ssub
            .state
            .lambda_lookup(&c.project(&from).unwrap_or(from.clone()), &to, 1e-7)
            .is_none()
        {
            violations.push(format!("jump {k}: no admitting relation"));
        }
    }
    let pass = violations.is_empty();
    ExecutionReport { violations, max_ode_residual: max_ode, max_jump_residual: max_jump, pass }
}

/// Push an execution forward along a morphism of (closed) systems: apply the
/// map to every sample and jump record.
pub fn pushforward_execution(f: &PhaseSpaceMorphism, e: &Execution) -> Result<Execution> {
    let mut arcs = Vec::with_capacity(e.arcs.len());
    for arc in &e.arcs {
        let node = f.node_map[arc.node];
        let mut samples = Vec::with_capacity(arc.samples.len());
        for (t, coords) in &arc.samples {
            let q = f.apply(&TaggedPoint::new(arc.node, coords.clone()))?;
            samples.push((*t, q.coords));
        }
        arcs.push(ExecArc { node, t_start: arc.t_start, t_end: arc.t_end, samples });
    }
    let mut jumps = Vec::with_capacity(e.jumps.len());
    for j in &e.jumps {
        let from = f.apply(&TaggedPoint::new(j.from_node, j.from_coords.clone()))?;
        let to = f.apply(&TaggedPoint::new(j.to_node, j.to_coords.clone()))?;
        let edge = f
            .codomain
            .lambda_lookup(&from, &to, 1e-7)
            .unwrap_or(f.edge_map[j.edge]);
        jumps.push(JumpRecord {
            t: j.t,
            from_node: from.node,
            from_coords: from.coords,
            to_node: to.node,
            to_coords: to.coords,
            edge,
        });
    }
    Ok(Execution { arcs, jumps, zeno: e.zeno })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn bouncing_ball_bounce_times() {
        let c = catalog::bouncing_ball_control(0.5);
        let opts = IntegratorOptions {
            step: 1e-3,
            event_refine_tol: 1e-9,
            max_jumps: 100,
            min_dwell: 1e-3,
            horizon: 3.0,
        };
        let e = execute(&c, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts).unwrap();
        let times = e.jump_times();
        let expected = [1.0, 1.5, 1.75, 1.875];
        for (t, want) in times.iter().zip(&expected) {
            assert!((t - want).abs() < 1e-5, "bounce at {t}, wanted {want}");
        }
        let acc = e.zeno.expect("Zeno verdict");
        assert!((acc - 2.0).abs() < 1e-2, "accumulation {acc}");
    }

    #[test]
    fn thermostat_switch_times() {
        let c = catalog::thermostat_control();
        let opts = IntegratorOptions { horizon: 12.0, max_jumps: 20, ..Default::default() };
        let e = execute(&c, &TaggedPoint::new(1, vec![0.0]), &opts).unwrap();
        let times = e.jump_times();
        // Heating from 0 hits +1 at t=1; each later switch is 2 apart.
        assert!((times[0] - 1.0).abs() < 1e-5, "{times:?}");
        for (k, t) in times.iter().enumerate().skip(1) {
            let want = 1.0 + 2.0 * k as f64;
            assert!((t - want).abs() < 1e-5, "{times:?}");
        }
        assert!(times.len() >= 5);
    }

    #[test]
    fn equilibrium_is_single_constant_arc() {
        let c = catalog::equilibrium_control();
        let e = execute(&c, &TaggedPoint::new(0, vec![0.7]), &IntegratorOptions::default()).unwrap();
        assert_eq!(e.arcs.len(), 1);
        assert!(e.jumps.is_empty());
        for (_, coords) in &e.arcs[0].samples {
            assert_eq!(coords[0], 0.7);
        }
        assert!(verify_execution(&e, &c, 1e-10).pass);
    }

    #[test]
    fn universal_system_three_times() {
        let p = TimePartition::new(vec![0.0, 1.0, 2.0]).unwrap();
        let u = universal_system(&p).unwrap();
        assert_eq!(u.ssub.total.nodes.len(), 2);
        let b0 = u.ssub.total.space(0);
        assert_eq!((b0.intervals()[0].lo, b0.intervals()[0].hi), (0.0, 1.0));
        assert!(crate::systems::check_control(&u, 20, 1, 1e-9).pass);
        let e = execute(&u, &TaggedPoint::new(0, vec![0.0]), &IntegratorOptions {
            horizon: 2.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(e.arcs.len(), 2);
        assert_eq!(e.jumps.len(), 1);
        assert!((e.jumps[0].t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn verify_flags_bad_jump() {
        let c = catalog::bouncing_ball_control(0.5);
        let opts = IntegratorOptions { horizon: 1.4, ..Default::default() };
        let mut e = execute(&c, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts).unwrap();
        assert!(verify_execution(&e, &c, 1e-4).pass);
        // Corrupt the post-jump velocity: +v instead of −rv.
        e.jumps[0].to_coords[1] = -e.jumps[0].to_coords[1];
        assert!(!verify_execution(&e, &c, 1e-4).pass);
    }

    #[test]
    fn executions_are_bit_identical() {
        let c = catalog::bouncing_ball_control(0.5);
        let opts = IntegratorOptions { horizon: 3.0, ..Default::default() };
        let a = execute(&c, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts).unwrap();
        let b = execute(&c, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts).unwrap();
        assert_eq!(
            a.trajectory_csv(&c.ssub.total),
            b.trajectory_csv(&c.ssub.total)
        );
        assert_eq!(a.jumps_csv(&c.ssub.total), b.jumps_csv(&c.ssub.total));
    }

    #[test]
    fn no_two_jumps_at_same_instant() {
        let c = catalog::bouncing_ball_control(0.5);
        let opts = IntegratorOptions { horizon: 3.0, ..Default::default() };
        let e = execute(&c, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts).unwrap();
        for w in e.jump_times().windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
