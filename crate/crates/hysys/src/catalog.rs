//! Worked example systems: thermostats, bouncing balls, switched systems,
//! and the coupled-thermostat network used throughout the tests and the CLI
//! demos.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::morphisms::{
    projection_first, HybridSSub, Interconnection, PhaseSpaceMorphism, SSubMorphism, SmoothMap,
};
use crate::networks::{ListMorphism, Network, NetworkMorphism, SystemList};
use crate::numerics;
use crate::phase_space::{
    product_edge, product_node, BoxSpace, HybridPhaseSpace, JumpRelation, PairSampler, TaggedPoint,
};
use crate::systems::{DeterministicControl, EventFn, FieldFn, JumpFn};

/// Equality relation `{x = x′}` with a deterministic sampler.
fn eq_relation(dim: usize) -> JumpRelation {
    let space = BoxSpace::real_line(dim);
    let sampler: PairSampler = Arc::new(move |seed, count| {
        numerics::box_samples(&space, count, seed)
            .into_iter()
            .map(|p| (p.clone(), p))
            .collect()
    });
    JumpRelation::predicate(Arc::new(|x: &[f64], y: &[f64], tol| {
        x.len() == y.len() && numerics::inf_dist(x, y) <= tol
    }))
    .with_sampler(sampler)
}

/// Two-node thermostat space: `off`/`on`, one temperature coordinate, and
/// mode-change edges relating equal temperatures.
pub fn thermostat_space() -> HybridPhaseSpace {
    let mut hps = HybridPhaseSpace::new("thermostat");
    let off = hps.add_node("off", BoxSpace::real_line(1));
    let on = hps.add_node("on", BoxSpace::real_line(1));
    hps.add_edge("turn_on", off, on, eq_relation(1));
    hps.add_edge("turn_off", on, off, eq_relation(1));
    hps
}

/// Thermostat space variant whose mode-change relations carry the switching
/// thresholds themselves: leaving `off` needs `x ≥ 1`, leaving `on` needs
/// `x ≤ −1`.
pub fn thermostat_space_thresholded() -> HybridPhaseSpace {
    let mut hps = HybridPhaseSpace::new("thermostat-thresholded");
    let off = hps.add_node("off", BoxSpace::real_line(1));
    let on = hps.add_node("on", BoxSpace::real_line(1));
    let hot: PairSampler = Arc::new(|seed, count| {
        (0..count)
            .map(|i| {
                let x = 1.0 + 3.0 * numerics::halton(seed.wrapping_add(i as u64 + 1), 2);
                (vec![x], vec![x])
            })
            .collect()
    });
    let cold: PairSampler = Arc::new(|seed, count| {
        (0..count)
            .map(|i| {
                let x = -1.0 - 3.0 * numerics::halton(seed.wrapping_add(i as u64 + 1), 2);
                (vec![x], vec![x])
            })
            .collect()
    });
    hps.add_edge(
        "turn_on",
        off,
        on,
        JumpRelation::predicate(Arc::new(|x: &[f64], y: &[f64], tol| {
            (x[0] - y[0]).abs() <= tol && x[0] >= 1.0 - tol
        }))
        .with_sampler(hot),
    );
    hps.add_edge(
        "turn_off",
        on,
        off,
        JumpRelation::predicate(Arc::new(|x: &[f64], y: &[f64], tol| {
            (x[0] - y[0]).abs() <= tol && x[0] <= -1.0 + tol
        }))
        .with_sampler(cold),
    );
    hps
}

/// Switching sign `(−1)^{1−j}`: heating in mode 1, cooling in mode 0.
fn mode_sign(j: usize) -> f64 {
    if j == 1 {
        1.0
    } else {
        -1.0
    }
}

/// The closed thermostat: cools in `off`, heats in `on`, switches when the
/// temperature leaves `[−1, 1]` in the active direction.
pub fn thermostat_control() -> DeterministicControl {
    let space = Arc::new(thermostat_space());
    let ssub = HybridSSub::closed(space);
    let field: FieldFn = Arc::new(|p: &TaggedPoint| vec![mode_sign(p.node)]);
    let jump: JumpFn = Arc::new(|p: &TaggedPoint| {
        let x = p.coords[0];
        if mode_sign(p.node) * x >= 1.0 {
            TaggedPoint::new(1 - p.node, vec![x])
        } else {
            p.clone()
        }
    });
    let events: Vec<Vec<EventFn>> = (0..2)
        .map(|j| {
            let e: EventFn = Arc::new(move |x: &[f64]| 1.0 - mode_sign(j) * x[0]);
            vec![e]
        })
        .collect();
    DeterministicControl { ssub, field, jump, events }
}

/// One-node ball space `[0, ∞) × ℝ` with a bounce self-edge relating ground
/// states of opposite velocity sign.
pub fn bouncing_ball_space() -> HybridPhaseSpace {
    let mut hps = HybridPhaseSpace::new("bouncing-ball");
    let n = hps.add_node(
        "ball",
        BoxSpace::new(vec![
            crate::phase_space::Interval::half_line(0.0),
            crate::phase_space::Interval::line(),
        ]),
    );
    let sampler: PairSampler = Arc::new(|seed, count| {
        (0..count)
            .map(|i| {
                let v = 4.0 * numerics::halton(seed.wrapping_add(i as u64 + 1), 2);
                (vec![0.0, -v], vec![0.0, 0.5 * v])
            })
            .collect()
    });
    hps.add_edge(
        "bounce",
        n,
        n,
        JumpRelation::predicate(Arc::new(|x: &[f64], y: &[f64], tol| {
            x.len() == 2 && y.len() == 2 && x[0].abs() <= tol && y[0].abs() <= tol && x[1] * y[1] <= tol
        }))
        .with_sampler(sampler),
    );
    hps
}

/// Ball under unit gravity with restitution `r`: reflect the velocity at the
/// ground.
pub fn bouncing_ball_control(r: f64) -> DeterministicControl {
    ball_with_field(r, Arc::new(|p: &TaggedPoint| vec![p.coords[1], -1.0]))
}

/// Ball with linear air drag, used where a smooth non-polynomial flow is
/// needed (the drag-free flow is quadratic in time, which RK4 integrates
/// exactly).
pub fn bouncing_ball_drag_control(r: f64, drag: f64) -> DeterministicControl {
    ball_with_field(
        r,
        Arc::new(move |p: &TaggedPoint| {
            let v = p.coords[1];
            vec![v, -1.0 - drag * v]
        }),
    )
}

fn ball_with_field(r: f64, field: FieldFn) -> DeterministicControl {
    let space = Arc::new(bouncing_ball_space());
    let ssub = HybridSSub::closed(space);
    let jump: JumpFn = Arc::new(move |p: &TaggedPoint| {
        let (h, v) = (p.coords[0], p.coords[1]);
        if h <= 0.0 && v < 0.0 {
            TaggedPoint::new(0, vec![0.0, -r * v])
        } else {
            p.clone()
        }
    });
    let ground: EventFn = Arc::new(|x: &[f64]| x[0]);
    DeterministicControl { ssub, field, jump, events: vec![vec![ground]] }
}

/// A single rest point: one node, zero field, no jumps.
pub fn equilibrium_control() -> DeterministicControl {
    let mut hps = HybridPhaseSpace::new("equilibrium");
    hps.add_node("x", BoxSpace::real_line(1));
    let ssub = HybridSSub::closed(Arc::new(hps));
    DeterministicControl {
        ssub,
        field: Arc::new(|_: &TaggedPoint| vec![0.0]),
        jump: Arc::new(|p: &TaggedPoint| p.clone()),
        events: vec![vec![]],
    }
}

/// The thermostat split into its two open components plus the interconnection
/// that reassembles the closed system: a temperature integrator over the mode
/// graph and a dimensionless mode switcher, both projected out of the full
/// thermostat space.
pub struct ThermostatComponents {
    /// Open system `c → temp`: drives the temperature at `(−1)^{1−j}`.
    pub temp_system: DeterministicControl,
    /// Open system `c → mode`: flips the mode at the thresholds.
    pub mode_system: DeterministicControl,
    /// Interconnection from the closed thermostat into the product.
    pub iota: Interconnection,
}

pub fn thermostat_components() -> ThermostatComponents {
    let c = Arc::new(thermostat_space());

    let mut temp = HybridPhaseSpace::new("temperature");
    temp.add_node("temp", BoxSpace::real_line(1));
    let temp = Arc::new(temp);

    let mut mode = HybridPhaseSpace::new("mode");
    let m_off = mode.add_node("m_off", BoxSpace::point());
    let m_on = mode.add_node("m_on", BoxSpace::point());
    mode.add_edge("switch_on", m_off, m_on, JumpRelation::diagonal());
    mode.add_edge("switch_off", m_on, m_off, JumpRelation::diagonal());
    let mode = Arc::new(mode);

    let proj_temp = PhaseSpaceMorphism::new(
        c.clone(),
        temp.clone(),
        vec![0, 0],
        vec![SmoothMap::identity(1), SmoothMap::identity(1)],
    )
    .expect("temperature projection");
    let drop_x = || SmoothMap::new(1, 0, Arc::new(|_: &[f64]| vec![]));
    let proj_mode = PhaseSpaceMorphism::new(
        c.clone(),
        mode.clone(),
        vec![0, 1],
        vec![drop_x(), drop_x()],
    )
    .expect("mode projection");

    let temp_system = DeterministicControl {
        ssub: HybridSSub::new(proj_temp),
        field: Arc::new(|p: &TaggedPoint| vec![mode_sign(p.node)]),
        jump: Arc::new(|p: &TaggedPoint| TaggedPoint::new(0, p.coords.clone())),
        events: vec![vec![], vec![]],
    };
    let mode_system = DeterministicControl {
        ssub: HybridSSub::new(proj_mode),
        field: Arc::new(|_: &TaggedPoint| vec![]),
        jump: Arc::new(|p: &TaggedPoint| {
            if mode_sign(p.node) * p.coords[0] >= 1.0 {
                TaggedPoint::new(1 - p.node, vec![])
            } else {
                TaggedPoint::new(p.node, vec![])
            }
        }),
        events: (0..2)
            .map(|j| {
                let e: EventFn = Arc::new(move |x: &[f64]| 1.0 - mode_sign(j) * x[0]);
                vec![e]
            })
            .collect(),
    };

    let product = crate::morphisms::product_ssub(&temp_system.ssub, &mode_system.ssub);
    let i_tot = PhaseSpaceMorphism::new(
        c.clone(),
        product.total.clone(),
        vec![product_node(0, 0, 2), product_node(1, 1, 2)],
        vec![
            SmoothMap::linear(DMatrix::from_row_slice(2, 1, &[1.0, 1.0])),
            SmoothMap::linear(DMatrix::from_row_slice(2, 1, &[1.0, 1.0])),
        ],
    )
    .expect("diagonal total map");
    let i_st = PhaseSpaceMorphism::new(
        c.clone(),
        product.state.clone(),
        vec![product_node(0, 0, 2), product_node(0, 1, 2)],
        vec![SmoothMap::identity(1), SmoothMap::identity(1)],
    )
    .expect("state isomorphism");
    let state_inverse = PhaseSpaceMorphism::new(
        product.state.clone(),
        c.clone(),
        vec![0, 1],
        vec![SmoothMap::identity(1), SmoothMap::identity(1)],
    )
    .expect("state inverse");
    let iota = Interconnection::new(
        SSubMorphism {
            domain: HybridSSub::closed(c),
            codomain: product,
            f_tot: i_tot,
            f_st: i_st,
        },
        state_inverse,
    );

    ThermostatComponents { temp_system, mode_system, iota }
}

/// The thermostat involution `(x, j) ↦ (−x, 1−j)` and its inverse (itself).
pub fn thermostat_flip() -> (PhaseSpaceMorphism, PhaseSpaceMorphism) {
    let c = Arc::new(thermostat_space());
    (flip_on(&c, &c), flip_on(&c, &c))
}

fn flip_on(dom: &Arc<HybridPhaseSpace>, cod: &Arc<HybridPhaseSpace>) -> PhaseSpaceMorphism {
    let neg = || SmoothMap::linear(DMatrix::from_row_slice(1, 1, &[-1.0]));
    PhaseSpaceMorphism::with_edge_map(
        dom.clone(),
        cod.clone(),
        vec![1, 0],
        vec![1, 0, 3, 2],
        vec![neg(), neg()],
    )
    .expect("thermostat flip")
}

fn antidiag_on(c: &Arc<HybridPhaseSpace>, cc: &Arc<HybridPhaseSpace>, sign: f64) -> PhaseSpaceMorphism {
    // (x, j) ↦ ((x, j), (sign·x, 1−j)); the genuine antidiagonal has sign −1.
    let node_map = vec![product_node(0, 1, 2), product_node(1, 0, 2)];
    let edge_map = vec![
        product_edge(0, 1, 4),
        product_edge(1, 0, 4),
        product_edge(2, 3, 4),
        product_edge(3, 2, 4),
    ];
    let pair = || SmoothMap::linear(DMatrix::from_row_slice(2, 1, &[1.0, sign]));
    PhaseSpaceMorphism::with_edge_map(c.clone(), cc.clone(), node_map, edge_map, vec![pair(), pair()])
        .expect("antidiagonal")
}

/// The antidiagonal embedding of the thermostat into the coupled pair,
/// together with the pair space.
pub fn antidiagonal_z() -> (PhaseSpaceMorphism, Arc<HybridPhaseSpace>) {
    let c = Arc::new(thermostat_space());
    let cc = Arc::new(crate::phase_space::product(&c, &c));
    (antidiag_on(&c, &cc, -1.0), cc)
}

/// A sign mistake in the antidiagonal: embeds along the plain diagonal of the
/// temperatures while still swapping modes. Used as a negative test.
pub fn broken_antidiagonal_z() -> SSubMorphism {
    let c = Arc::new(thermostat_space());
    let cc = Arc::new(crate::phase_space::product(&c, &c));
    let m = antidiag_on(&c, &cc, 1.0);
    SSubMorphism {
        domain: HybridSSub::closed(c),
        codomain: HybridSSub::closed(cc),
        f_tot: m.clone(),
        f_st: m,
    }
}

fn identity_like(from: &Arc<HybridPhaseSpace>, to: &Arc<HybridPhaseSpace>) -> PhaseSpaceMorphism {
    let maps = from.nodes.iter().map(|n| SmoothMap::identity(n.space.dim())).collect();
    PhaseSpaceMorphism {
        domain: from.clone(),
        codomain: to.clone(),
        node_map: (0..from.nodes.len()).collect(),
        edge_map: (0..from.edges.len()).collect(),
        maps,
    }
}

/// The coupled-thermostat network morphism instance: one self-coupled
/// thermostat presented as a network over a single open component, mapped
/// into the genuine two-thermostat network along the antidiagonal.
pub struct NetworkedThermostats {
    pub nm: NetworkMorphism,
    /// Controls for the codomain (single-component) network.
    pub w: Vec<DeterministicControl>,
    /// Controls for the domain (two-component) network.
    pub v: Vec<DeterministicControl>,
}

/// Build the coupled-thermostat instance with coupling `f(x, x′) = fc·(x′−x)`.
pub fn networked_thermostats(fc: f64) -> NetworkedThermostats {
    let c = Arc::new(thermostat_space());
    let entry = HybridSSub::new(projection_first(&c, &c));
    let cc = entry.total.clone();

    // Component maps: Φ₁ fixes the first factor and reflects the second;
    // Φ₂ reflects the first factor.
    let diag = |a: f64, b: f64| {
        SmoothMap::linear(DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]))
    };
    let phi1_tot = PhaseSpaceMorphism::new(
        cc.clone(),
        cc.clone(),
        vec![1, 0, 3, 2],
        vec![diag(1.0, -1.0), diag(1.0, -1.0), diag(1.0, -1.0), diag(1.0, -1.0)],
    )
    .expect("phi1 total");
    let phi1 = SSubMorphism {
        domain: entry.clone(),
        codomain: entry.clone(),
        f_tot: phi1_tot,
        f_st: PhaseSpaceMorphism::identity(c.clone()),
    };
    let phi2_tot = PhaseSpaceMorphism::new(
        cc.clone(),
        cc.clone(),
        vec![2, 3, 0, 1],
        vec![diag(-1.0, 1.0), diag(-1.0, 1.0), diag(-1.0, 1.0), diag(-1.0, 1.0)],
    )
    .expect("phi2 total");
    let phi2 = SSubMorphism {
        domain: entry.clone(),
        codomain: entry.clone(),
        f_tot: phi2_tot,
        f_st: flip_on(&c, &c),
    };

    let list_y = SystemList { labels: vec!["*".into()], entries: vec![entry.clone()] };
    let list_x = SystemList {
        labels: vec!["1".into(), "2".into()],
        entries: vec![entry.clone(), entry.clone()],
    };
    let lm = ListMorphism {
        domain: list_x.clone(),
        codomain: list_y.clone(),
        label_map: vec![0, 0],
        components: vec![phi1, phi2],
    };

    // ι_Y: diagonal feedback of the single component onto itself.
    let bound_y = HybridSSub::closed(c.clone());
    let pair = || SmoothMap::linear(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]));
    let iota_y_tot = PhaseSpaceMorphism::with_edge_map(
        c.clone(),
        cc.clone(),
        vec![product_node(0, 0, 2), product_node(1, 1, 2)],
        vec![
            product_edge(0, 0, 4),
            product_edge(1, 1, 4),
            product_edge(2, 2, 4),
            product_edge(3, 3, 4),
        ],
        vec![pair(), pair()],
    )
    .expect("iota_Y total");
    let iota_y = Interconnection::new(
        SSubMorphism {
            domain: bound_y.clone(),
            codomain: entry.clone(),
            f_tot: iota_y_tot,
            f_st: identity_like(&c, &c),
        },
        identity_like(&c, &c),
    );
    let net_y = Network { list: list_y, bound: bound_y.clone(), iota: iota_y };

    // ι_X: each thermostat sees the other as its input,
    // (x, j, x′, j′) ↦ ((x, j, x′, j′), (x′, j′, x, j)).
    let bound_x = HybridSSub::closed(cc.clone());
    let prod_x = crate::networks::pi_product(&list_x);
    let swap4 = || {
        SmoothMap::linear(DMatrix::from_row_slice(
            4,
            2,
            &[
                1.0, 0.0, //
                0.0, 1.0, //
                0.0, 1.0, //
                1.0, 0.0,
            ],
        ))
    };
    let swap_node = |n: usize| {
        let (j, jp) = crate::phase_space::split_node(n, 2);
        product_node(jp, j, 2)
    };
    let iota_x_tot = PhaseSpaceMorphism::new(
        cc.clone(),
        prod_x.total.clone(),
        (0..4).map(|n| product_node(n, swap_node(n), 4)).collect(),
        vec![swap4(), swap4(), swap4(), swap4()],
    )
    .expect("iota_X total");
    let iota_x = Interconnection::new(
        SSubMorphism {
            domain: bound_x.clone(),
            codomain: prod_x.clone(),
            f_tot: iota_x_tot,
            f_st: identity_like(&cc, &prod_x.state),
        },
        identity_like(&prod_x.state, &cc),
    );
    let net_x = Network { list: list_x, bound: bound_x.clone(), iota: iota_x };

    // z: the antidiagonal.
    let z_map = antidiag_on(&c, &cc, -1.0);
    let z = SSubMorphism {
        domain: bound_y,
        codomain: bound_x,
        f_tot: z_map.clone(),
        f_st: z_map,
    };
    let nm = NetworkMorphism { domain: net_x, codomain: net_y, lm, z };

    // Controls: the driven thermostat reads its own mode and the input
    // temperature.
    let w = vec![driven_thermostat(&entry, Arc::new(move |x, xp| fc * (xp - x)))];
    let v = vec![
        driven_thermostat(&entry, Arc::new(move |x, xp| fc * (-xp - x))),
        driven_thermostat(&entry, Arc::new(move |x, xp| -fc * (xp + x))),
    ];
    NetworkedThermostats { nm, w, v }
}

/// A thermostat whose heating rate is offset by a coupling term in its own
/// and its input temperature. The jump thresholds read only its own state.
fn driven_thermostat(
    entry: &HybridSSub,
    coupling: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
) -> DeterministicControl {
    let field: FieldFn = Arc::new(move |p: &TaggedPoint| {
        let (j, _) = crate::phase_space::split_node(p.node, 2);
        vec![mode_sign(j) + coupling(p.coords[0], p.coords[1])]
    });
    let jump: JumpFn = Arc::new(|p: &TaggedPoint| {
        let (j, _) = crate::phase_space::split_node(p.node, 2);
        let x = p.coords[0];
        if mode_sign(j) * x >= 1.0 {
            TaggedPoint::new(1 - j, vec![x])
        } else {
            TaggedPoint::new(j, vec![x])
        }
    });
    let events: Vec<Vec<EventFn>> = (0..4)
        .map(|n| {
            let (j, _) = crate::phase_space::split_node(n, 2);
            let e: EventFn = Arc::new(move |x: &[f64]| 1.0 - mode_sign(j) * x[0]);
            vec![e]
        })
        .collect();
    DeterministicControl { ssub: entry.clone(), field, jump, events }
}

/// State-dependent switching between two rotations on the plane: the active
/// mode is a function of the sign of the first coordinate.
pub fn switched_state_control() -> DeterministicControl {
    let mut hps = HybridPhaseSpace::new("switched-state");
    let m0 = hps.add_node("m0", BoxSpace::real_line(2));
    let m1 = hps.add_node("m1", BoxSpace::real_line(2));
    hps.add_edge("to1", m0, m1, eq_relation(2));
    hps.add_edge("to0", m1, m0, eq_relation(2));
    let ssub = HybridSSub::closed(Arc::new(hps));
    let field: FieldFn = Arc::new(|p: &TaggedPoint| {
        let speed = if p.node == 0 { 1.0 } else { 2.0 };
        vec![speed * p.coords[1], -speed * p.coords[0]]
    });
    let active = |x: &[f64]| usize::from(x[0] < 0.0);
    let jump: JumpFn = Arc::new(move |p: &TaggedPoint| TaggedPoint::new(active(&p.coords), p.coords.clone()));
    let e0: EventFn = Arc::new(|x: &[f64]| x[0]);
    let e1: EventFn = Arc::new(|x: &[f64]| -x[0]);
    DeterministicControl { ssub, field, jump, events: vec![vec![e0], vec![e1]] }
}

/// Time-dependent switching via an internal unit clock: decay while
/// `sin(πt) ≥ 0`, mild growth otherwise.
pub fn switched_time_control() -> DeterministicControl {
    let mut hps = HybridPhaseSpace::new("switched-time");
    let m0 = hps.add_node("decay", BoxSpace::real_line(2));
    let m1 = hps.add_node("grow", BoxSpace::real_line(2));
    hps.add_edge("to_grow", m0, m1, eq_relation(2));
    hps.add_edge("to_decay", m1, m0, eq_relation(2));
    let ssub = HybridSSub::closed(Arc::new(hps));
    let field: FieldFn = Arc::new(|p: &TaggedPoint| {
        let x = p.coords[0];
        let dx = if p.node == 0 { -x } else { 0.5 * x };
        vec![dx, 1.0]
    });
    let phase = |t: f64| (std::f64::consts::PI * t).sin();
    let jump: JumpFn = Arc::new(move |p: &TaggedPoint| {
        let mode = usize::from(phase(p.coords[1]) < 0.0);
        TaggedPoint::new(mode, p.coords.clone())
    });
    let e0: EventFn = Arc::new(move |x: &[f64]| phase(x[1]));
    let e1: EventFn = Arc::new(move |x: &[f64]| -phase(x[1]));
    DeterministicControl { ssub, field, jump, events: vec![vec![e0], vec![e1]] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interconnection_recovers_thermostat_exactly() {
        let parts = thermostat_components();
        assert!(crate::systems::check_control(&parts.temp_system, 30, 2, 1e-9).pass);
        assert!(crate::systems::check_control(&parts.mode_system, 30, 2, 1e-9).pass);
        assert!(parts.iota.verify(30, 2, 1e-9).pass);
        let product =
            crate::systems::product_control(&[parts.temp_system, parts.mode_system]).unwrap();
        let rebuilt = crate::systems::interconnect_control(&parts.iota, &product).unwrap();
        let reference = thermostat_control();
        for j in 0..2usize {
            for k in 0..=200 {
                let x = -2.0 + 4.0 * k as f64 / 200.0;
                let p = TaggedPoint::new(j, vec![x]);
                assert_eq!(rebuilt.field_at(&p), reference.field_at(&p));
                assert_eq!(rebuilt.jump_at(&p), reference.jump_at(&p));
            }
        }
        assert!(crate::systems::check_control(&rebuilt, 40, 2, 1e-9).pass);
    }
    use crate::execution::{execute, IntegratorOptions};
    use crate::systems::check_control;

    #[test]
    fn thresholded_lookup_requires_hot_exit() {
        let c = thermostat_space_thresholded();
        let hot = TaggedPoint::new(0, vec![1.5]);
        let hot_on = TaggedPoint::new(1, vec![1.5]);
        let e = c.lambda_lookup(&hot, &hot_on, 1e-9).expect("turn_on");
        assert_eq!(c.edges[e].label, "turn_on");
        let mild = TaggedPoint::new(0, vec![0.5]);
        let mild_on = TaggedPoint::new(1, vec![0.5]);
        assert_eq!(c.lambda_lookup(&mild, &mild_on, 1e-9), None);
    }

    #[test]
    fn thresholded_space_is_valid() {
        assert!(thermostat_space_thresholded().validate().is_empty());
    }

    #[test]
    fn switched_state_orbits_and_switches() {
        let c = switched_state_control();
        assert!(check_control(&c, 30, 1, 1e-9).pass);
        let opts = IntegratorOptions { horizon: 5.0, ..Default::default() };
        let e = execute(&c, &TaggedPoint::new(0, vec![1.0, 0.0]), &opts).unwrap();
        assert!(e.jumps.len() >= 2, "{:?}", e.jump_times());
        // Both fields preserve the circle through (1, 0).
        let p = e.final_state().unwrap();
        let r2 = p.coords[0] * p.coords[0] + p.coords[1] * p.coords[1];
        assert!((r2 - 1.0).abs() < 1e-6, "radius² drifted to {r2}");
    }

    #[test]
    fn switched_time_alternates_on_the_clock() {
        let c = switched_time_control();
        let opts = IntegratorOptions { horizon: 4.5, ..Default::default() };
        let e = execute(&c, &TaggedPoint::new(0, vec![1.0, 0.0]), &opts).unwrap();
        let times = e.jump_times();
        assert!(times.len() >= 4, "{times:?}");
        for (k, t) in times.iter().enumerate() {
            assert!((t - (k as f64 + 1.0)).abs() < 1e-6, "{times:?}");
        }
    }

    #[test]
    fn drag_ball_still_bounces() {
        let c = bouncing_ball_drag_control(0.5, 0.4);
        assert!(check_control(&c, 30, 2, 1e-9).pass);
        let opts = IntegratorOptions { horizon: 2.0, ..Default::default() };
        let e = execute(&c, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts).unwrap();
        assert!(!e.jumps.is_empty());
        // Drag shortens the flight relative to the drag-free impact at t = 1.
        assert!(e.jumps[0].t > 0.9 && e.jumps[0].t < 1.0, "impact at {}", e.jumps[0].t);
    }
}
