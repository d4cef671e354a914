//! Deterministic hybrid open systems: a control pair `(X, ρ)` on a hybrid
//! surjective submersion, validity checks, relatedness of controls along
//! submersion morphisms, interconnection pullback, and products of controls.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::morphisms::{HybridSSub, Interconnection, SSubMorphism, product_ssub};
use crate::numerics;
use crate::phase_space::{HybridPhaseSpace, TaggedPoint};

pub type FieldFn = Arc<dyn Fn(&TaggedPoint) -> Vec<f64> + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(&TaggedPoint) -> TaggedPoint + Send + Sync>;
pub type EventFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Coordinate tolerance under which two tagged points count as equal when
/// deciding whether a jump is trivial.
pub const JUMP_EQ_TOL: f64 = 1e-12;

/// A deterministic hybrid open system on a submersion `p : total → state`.
///
/// `field` assigns every total point a state-space velocity based at its
/// projection; `jump` assigns every total point its (possibly trivial
/// self-) jump in the state space; `events` give, per total node, crossing
/// functions that localize where the jump becomes non-trivial.
#[derive(Clone)]
pub struct DeterministicControl {
    pub ssub: HybridSSub,
    pub field: FieldFn,
    pub jump: JumpFn,
    /// Indexed by total node id.
    pub events: Vec<Vec<EventFn>>,
}

impl std::fmt::Debug for DeterministicControl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeterministicControl")
            .field("total", &self.ssub.total.name)
            .field("state", &self.ssub.state.name)
            .finish()
    }
}

impl DeterministicControl {
    pub fn field_at(&self, p: &TaggedPoint) -> Vec<f64> {
        (self.field)(p)
    }

    pub fn jump_at(&self, p: &TaggedPoint) -> TaggedPoint {
        (self.jump)(p)
    }

    pub fn project(&self, p: &TaggedPoint) -> Result<TaggedPoint> {
        self.ssub.proj.apply(p)
    }

    /// Smallest event value at a total point; +∞ when the node has no events.
    pub fn min_event(&self, p: &TaggedPoint) -> f64 {
        self.events
            .get(p.node)
            .map(|evs| evs.iter().fold(f64::INFINITY, |m, e| m.min(e(&p.coords))))
            .unwrap_or(f64::INFINITY)
    }

    /// True when the jump at `p` moves the projected point.
    pub fn jump_changes(&self, p: &TaggedPoint) -> Result<bool> {
        let base = self.project(p)?;
        let target = self.jump_at(p);
        Ok(base.node != target.node
            || numerics::inf_dist(&base.coords, &target.coords) > JUMP_EQ_TOL)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Verify membership of `(X, ρ)` in the class of deterministic controls:
/// velocity dimension/basepoint compatibility, jump compatibility with the
/// state relations, and event consistency, all on sampled total points.
pub fn check_control(c: &DeterministicControl, samples: usize, seed: u64, tol: f64) -> ControlReport {
    let mut violations = Vec::new();
    for p in c.ssub.total.sample_points(samples, seed) {
        let base = match c.project(&p) {
            Ok(b) => b,
            Err(e) => {
                violations.push(format!("projection fails at {p:?}: {e}"));
                continue;
            }
        };
        let v = c.field_at(&p);
        let want = c.ssub.state.space(base.node).dim();
        if v.len() != want {
            violations.push(format!(
                "vector field at {p:?} has dimension {}, state expects {want}",
                v.len()
            ));
        }
        let target = c.jump_at(&p);
        if c.ssub.state.lambda_lookup(&base, &target, tol).is_none() {
            violations.push(format!(
                "jump {base:?} -> {target:?} admitted by no state relation"
            ));
        }
        let trivial = base.node == target.node
            && numerics::inf_dist(&base.coords, &target.coords) <= JUMP_EQ_TOL;
        if !trivial && c.min_event(&p) > tol {
            violations.push(format!(
                "non-trivial jump at {p:?} but every event function is positive"
            ));
        }
        if violations.len() >= 10 {
            break;
        }
    }
    let pass = violations.is_empty();
    ControlReport { violations, pass }
}

#[derive(Clone, Debug, Serialize)]
pub struct RelatednessReport {
    pub max_vf_residual: f64,
    pub max_jump_mismatch: f64,
    pub witnesses: Vec<String>,
    pub pass: bool,
}

/// Check that `(X, ρ)` on the domain and `(Y, σ)` on the codomain are
/// f-related: the state differential carries X to Y, and the state map
/// intertwines the jump maps, over sampled total points of the domain.
pub fn check_relatedness(
    f: &SSubMorphism,
    c: &DeterministicControl,
    d: &DeterministicControl,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<RelatednessReport> {
    let mut max_vf = 0.0f64;
    let mut max_jump = 0.0f64;
    let mut witnesses = Vec::new();
    for p in f.domain.total.sample_points(samples, seed) {
        let base = c.project(&p)?;
        let jac = f.f_st.differential(&base);
        let x = c.field_at(&p);
        let lhs = {
            let v = nalgebra::DVector::from_column_slice(&x);
            (jac * v).iter().copied().collect::<Vec<f64>>()
        };
        let q = f.f_tot.apply(&p)?;
        let rhs = d.field_at(&q);
        if lhs.len() != rhs.len() {
            return Err(Error::Mismatch(format!(
                "field dimensions differ at {p:?}: {} vs {}",
                lhs.len(),
                rhs.len()
            )));
        }
        let r = numerics::inf_dist(&lhs, &rhs);
        if r > max_vf {
            max_vf = r;
            if r > tol && witnesses.len() < 5 {
                witnesses.push(format!("field residual {r:.3e} at {p:?}"));
            }
        }
        let left = f.f_st.apply(&c.jump_at(&p))?;
        let right = d.jump_at(&q);
        let jm = if left.node != right.node {
            f64::INFINITY
        } else {
            numerics::inf_dist(&left.coords, &right.coords)
        };
        if jm > max_jump {
            max_jump = jm;
            if jm > tol && witnesses.len() < 5 {
                witnesses.push(format!("jump mismatch {jm:.3e} at {p:?}"));
            }
        }
    }
    let pass = max_vf <= tol && max_jump <= tol;
    Ok(RelatednessReport { max_vf_residual: max_vf, max_jump_mismatch: max_jump, witnesses, pass })
}

/// Pull a control on the codomain of a verified interconnection back to its
/// domain: `X = T(i_st)⁻¹ ∘ Y ∘ i_tot` and `ρ = (i_st)⁻¹ ∘ σ ∘ i_tot`.
/// Event functions pull back through the total map.
pub fn interconnect_control(
    i: &Interconnection,
    d: &DeterministicControl,
) -> Result<DeterministicControl> {
    let dom = i.morphism.domain.clone();
    let i_tot = i.morphism.f_tot.clone();
    let inv = i.state_inverse.clone();
    let d_field = d.clone();
    let field: FieldFn = Arc::new(move |p: &TaggedPoint| {
        let q = i_tot.apply(p).expect("interconnection total map");
        let y = d_field.field_at(&q);
        let base = d_field.project(&q).expect("codomain projection");
        let jac = inv.differential(&base);
        let v = nalgebra::DVector::from_column_slice(&y);
        (jac * v).iter().copied().collect()
    });
    let i_tot2 = i.morphism.f_tot.clone();
    let inv2 = i.state_inverse.clone();
    let d_jump = d.clone();
    let jump: JumpFn = Arc::new(move |p: &TaggedPoint| {
        let q = i_tot2.apply(p).expect("interconnection total map");
        inv2.apply(&d_jump.jump_at(&q)).expect("state inverse")
    });
    let mut events: Vec<Vec<EventFn>> = Vec::with_capacity(dom.total.nodes.len());
    for s in 0..dom.total.nodes.len() {
        let target = i.morphism.f_tot.node_map[s];
        let map = i.morphism.f_tot.maps[s].clone();
        let evs: Vec<EventFn> = d
            .events
            .get(target)
            .map(|list| {
                list.iter()
                    .map(|e| {
                        let e = e.clone();
                        let map = map.clone();
                        let out: EventFn = Arc::new(move |x: &[f64]| e(&map.eval(x)));
                        out
                    })
                    .collect()
            })
            .unwrap_or_default();
        events.push(evs);
    }
    Ok(DeterministicControl { ssub: dom, field, jump, events })
}

/// Decode a left-nested product node index into per-factor node indices.
pub fn decode_nested(mut node: usize, counts: &[usize]) -> Vec<usize> {
    let mut out = vec![0; counts.len()];
    for (i, &n) in counts.iter().enumerate().rev() {
        out[i] = node % n;
        node /= n;
    }
    out
}

/// Product of controls on the product submersion: velocities concatenate,
/// jumps join componentwise, events are the union of pulled-back components.
pub fn product_control(controls: &[DeterministicControl]) -> Result<DeterministicControl> {
    if controls.is_empty() {
        return Err(Error::Invalid("product of an empty control list".into()));
    }
    if controls.len() == 1 {
        return Ok(controls[0].clone());
    }
    let mut ssub = controls[0].ssub.clone();
    for c in &controls[1..] {
        ssub = product_ssub(&ssub, &c.ssub);
    }
    let totals: Vec<Arc<HybridPhaseSpace>> =
        controls.iter().map(|c| c.ssub.total.clone()).collect();
    let states: Vec<Arc<HybridPhaseSpace>> =
        controls.iter().map(|c| c.ssub.state.clone()).collect();

    let parts_of = {
        let totals = totals.clone();
        move |p: &TaggedPoint| crate::phase_space::split_many(&totals, p).expect("product split")
    };

    let cs: Vec<DeterministicControl> = controls.to_vec();
    let parts1 = parts_of.clone();
    let field: FieldFn = Arc::new(move |p: &TaggedPoint| {
        let parts = parts1(p);
        let mut out = Vec::new();
        for (c, q) in cs.iter().zip(&parts) {
            out.extend(c.field_at(q));
        }
        out
    });
    let cs2: Vec<DeterministicControl> = controls.to_vec();
    let states2 = states.clone();
    let parts2 = parts_of.clone();
    let jump: JumpFn = Arc::new(move |p: &TaggedPoint| {
        let parts = parts2(p);
        let jumps: Vec<TaggedPoint> =
            cs2.iter().zip(&parts).map(|(c, q)| c.jump_at(q)).collect();
        crate::phase_space::join_many(&states2, &jumps).expect("product join")
    });

    // Events per product total node: each component's events read their own
    // coordinate slice.
    let node_counts: Vec<usize> = totals.iter().map(|t| t.nodes.len()).collect();
    let mut events: Vec<Vec<EventFn>> = Vec::with_capacity(ssub.total.nodes.len());
    for node in 0..ssub.total.nodes.len() {
        let comp_nodes = decode_nested(node, &node_counts);
        let mut evs: Vec<EventFn> = Vec::new();
        let mut offset = 0usize;
        for (k, c) in controls.iter().enumerate() {
            let cn = comp_nodes[k];
            let dim = c.ssub.total.space(cn).dim();
            if let Some(list) = c.events.get(cn) {
                for e in list {
                    let e = e.clone();
                    let (lo, hi) = (offset, offset + dim);
                    evs.push(Arc::new(move |x: &[f64]| e(&x[lo..hi])));
                }
            }
            offset += dim;
        }
        events.push(evs);
    }
    Ok(DeterministicControl { ssub, field, jump, events })
}

/// Idempotency `ρ∘ρ = ρ` on sampled points of a closed system.
pub fn check_idempotent(
    c: &DeterministicControl,
    samples: usize,
    seed: u64,
) -> Result<(bool, Vec<String>)> {
    if !c.ssub.closed {
        return Err(Error::Invalid("idempotency is defined for closed systems".into()));
    }
    let mut witnesses = Vec::new();
    for p in c.ssub.total.sample_points(samples, seed) {
        let once = c.jump_at(&p);
        let twice = c.jump_at(&once);
        if twice.node != once.node
            || numerics::inf_dist(&twice.coords, &once.coords) > JUMP_EQ_TOL
        {
            witnesses.push(format!("ρ(ρ({p:?})) = {twice:?} ≠ ρ({p:?}) = {once:?}"));
            if witnesses.len() >= 5 {
                break;
            }
        }
    }
    Ok((witnesses.is_empty(), witnesses))
}

/// Per-factor coordinate offset of component `k` at a product total node.
pub fn component_offsets(
    totals: &[Arc<HybridPhaseSpace>],
    node: usize,
) -> Vec<(usize, usize)> {
    let counts: Vec<usize> = totals.iter().map(|t| t.nodes.len()).collect();
    let comp = decode_nested(node, &counts);
    let mut out = Vec::new();
    let mut offset = 0;
    for (k, t) in totals.iter().enumerate() {
        let d = t.space(comp[k]).dim();
        out.push((offset, d));
        offset += d;
    }
    out
}

pub use crate::phase_space::split_many;
