//! Networks of deterministic hybrid open systems: indexed lists of
//! submersions, the contravariant Π product, network morphisms, the
//! induced-morphism theorem verifier, and a dynamic invariance demo.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::execution::{execute, pushforward_execution, Execution, IntegratorOptions};
use crate::morphisms::{
    HybridSSub, Interconnection, PhaseSpaceMorphism, SSubMorphism, SmoothMap, product_ssub,
};
use crate::numerics;
use crate::phase_space::{join_many, split_many, BoxSpace, HybridPhaseSpace, TaggedPoint};
use crate::systems::{
    check_control, check_relatedness, interconnect_control, product_control, DeterministicControl,
    FieldFn, JumpFn, RelatednessReport,
};

/// An ordered list of open systems indexed by labels.
#[derive(Clone, Debug)]
pub struct SystemList {
    pub labels: Vec<String>,
    pub entries: Vec<HybridSSub>,
}

impl SystemList {
    pub fn totals(&self) -> Vec<Arc<HybridPhaseSpace>> {
        self.entries.iter().map(|e| e.total.clone()).collect()
    }

    pub fn states(&self) -> Vec<Arc<HybridPhaseSpace>> {
        self.entries.iter().map(|e| e.state.clone()).collect()
    }
}

/// Iterated binary product of the list's entries in label order.
pub fn pi_product(list: &SystemList) -> HybridSSub {
    match list.entries.len() {
        0 => HybridSSub::closed(Arc::new(crate::phase_space::terminal())),
        1 => list.entries[0].clone(),
        _ => {
            let mut acc = list.entries[0].clone();
            for e in &list.entries[1..] {
                acc = product_ssub(&acc, e);
            }
            acc
        }
    }
}

/// A morphism of lists `(φ, Φ)`: a label map `φ : X → Y` together with, for
/// each x, a component morphism `Φ_x : entry_Y(φ(x)) → entry_X(x)`.
#[derive(Clone, Debug)]
pub struct ListMorphism {
    pub domain: SystemList,
    pub codomain: SystemList,
    /// `φ`: domain label index → codomain label index.
    pub label_map: Vec<usize>,
    /// Per domain label x: morphism from `entry_Y(φ(x))` to `entry_X(x)`.
    pub components: Vec<SSubMorphism>,
}

fn encode_nested(parts: &[usize], counts: &[usize]) -> usize {
    let mut idx = 0;
    for (p, n) in parts.iter().zip(counts) {
        idx = idx * n + p;
    }
    idx
}

fn nested_node_map<F>(
    dom_counts: &[usize],
    cod_counts: &[usize],
    dom_nodes: usize,
    per_part: F,
) -> Vec<usize>
where
    F: Fn(&[usize]) -> Vec<usize>,
{
    (0..dom_nodes)
        .map(|n| {
            let parts = crate::systems::decode_nested(n, dom_counts);
            encode_nested(&per_part(&parts), cod_counts)
        })
        .collect()
}

/// The unique map `Π(φ,Φ) : Π(𝒜_Y) → Π(𝒜_X)` whose x-th projection is
/// `Φ_x ∘ p_{φ(x)}`.
pub fn pi_morphism(lm: &ListMorphism) -> Result<SSubMorphism> {
    let prod_x = pi_product(&lm.domain);
    let prod_y = pi_product(&lm.codomain);
    let totals_y = lm.codomain.totals();
    let states_y = lm.codomain.states();
    let totals_x = lm.domain.totals();
    let states_x = lm.domain.states();
    let phi = lm.label_map.clone();

    let tot_counts_y: Vec<usize> = totals_y.iter().map(|t| t.nodes.len()).collect();
    let tot_counts_x: Vec<usize> = totals_x.iter().map(|t| t.nodes.len()).collect();
    let st_counts_y: Vec<usize> = states_y.iter().map(|t| t.nodes.len()).collect();
    let st_counts_x: Vec<usize> = states_x.iter().map(|t| t.nodes.len()).collect();

    let comp_tot_nodes: Vec<Vec<usize>> =
        lm.components.iter().map(|c| c.f_tot.node_map.clone()).collect();
    let comp_st_nodes: Vec<Vec<usize>> =
        lm.components.iter().map(|c| c.f_st.node_map.clone()).collect();

    let tot_node_map = {
        let phi = phi.clone();
        let comp = comp_tot_nodes.clone();
        nested_node_map(&tot_counts_y, &tot_counts_x, prod_y.total.nodes.len(), move |parts| {
            (0..phi.len()).map(|x| comp[x][parts[phi[x]]]).collect()
        })
    };
    let st_node_map = {
        let phi = phi.clone();
        let comp = comp_st_nodes.clone();
        nested_node_map(&st_counts_y, &st_counts_x, prod_y.state.nodes.len(), move |parts| {
            (0..phi.len()).map(|x| comp[x][parts[phi[x]]]).collect()
        })
    };

    let comps_tot: Vec<PhaseSpaceMorphism> =
        lm.components.iter().map(|c| c.f_tot.clone()).collect();
    let comps_st: Vec<PhaseSpaceMorphism> = lm.components.iter().map(|c| c.f_st.clone()).collect();

    let ty = totals_y.clone();
    let tx = totals_x.clone();
    let phi_t = phi.clone();
    let f_tot = PhaseSpaceMorphism::from_pointwise(
        prod_y.total.clone(),
        prod_x.total.clone(),
        tot_node_map,
        move |p: &TaggedPoint| {
            let qs = split_many(&ty, p).expect("split product point");
            let us: Vec<TaggedPoint> = (0..phi_t.len())
                .map(|x| comps_tot[x].apply(&qs[phi_t[x]]).expect("component total map"))
                .collect();
            join_many(&tx, &us).expect("join product point").coords
        },
    )?;
    let sy = states_y.clone();
    let sx = states_x.clone();
    let phi_s = phi.clone();
    let f_st = PhaseSpaceMorphism::from_pointwise(
        prod_y.state.clone(),
        prod_x.state.clone(),
        st_node_map,
        move |p: &TaggedPoint| {
            let qs = split_many(&sy, p).expect("split product state point");
            let us: Vec<TaggedPoint> = (0..phi_s.len())
                .map(|x| comps_st[x].apply(&qs[phi_s[x]]).expect("component state map"))
                .collect();
            join_many(&sx, &us).expect("join product state point").coords
        },
    )?;
    Ok(SSubMorphism { domain: prod_y, codomain: prod_x, f_tot, f_st })
}

/// A network: an indexed list plus an interconnection of a bound system into
/// the list's product.
#[derive(Clone, Debug)]
pub struct Network {
    pub list: SystemList,
    pub bound: HybridSSub,
    /// Interconnection `bound → Π(list)`.
    pub iota: Interconnection,
}

/// A morphism of networks `((φ,Φ), z)` from the X-network to the Y-network,
/// subject to `ι_X ∘ z = Π(φ,Φ) ∘ ι_Y`.
#[derive(Clone, Debug)]
pub struct NetworkMorphism {
    /// The X side (domain of the network morphism).
    pub domain: Network,
    /// The Y side.
    pub codomain: Network,
    pub lm: ListMorphism,
    /// `z : bound_Y → bound_X`.
    pub z: SSubMorphism,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkMorphismReport {
    pub component_squares: Vec<f64>,
    pub z_square: f64,
    pub iota_x: crate::morphisms::InterconnectionReport,
    pub iota_y: crate::morphisms::InterconnectionReport,
    pub compat_total: f64,
    pub compat_state: f64,
    pub witnesses: Vec<String>,
    pub pass: bool,
}

/// Verify the component squares, the interconnections, and the compatibility
/// square `ι_X ∘ z = Π(φ,Φ) ∘ ι_Y` on sampled points.
pub fn check_network_morphism(
    nm: &NetworkMorphism,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<NetworkMorphismReport> {
    let mut witnesses = Vec::new();
    let mut component_squares = Vec::new();
    for (x, comp) in nm.lm.components.iter().enumerate() {
        let r = comp.square_residual(samples, seed.wrapping_add(x as u64))?;
        if r > tol {
            witnesses.push(format!("component {x} square residual {r:.3e}"));
        }
        component_squares.push(r);
    }
    let z_square = nm.z.square_residual(samples, seed.wrapping_add(101))?;
    if z_square > tol {
        witnesses.push(format!("z square residual {z_square:.3e}"));
    }
    let iota_x = nm.domain.iota.verify(samples, seed.wrapping_add(202), tol);
    let iota_y = nm.codomain.iota.verify(samples, seed.wrapping_add(303), tol);
    if !iota_x.pass {
        witnesses.push("iota_X failed interconnection verification".into());
    }
    if !iota_y.pass {
        witnesses.push("iota_Y failed interconnection verification".into());
    }
    let pi = pi_morphism(&nm.lm)?;
    let mut compat_total = 0.0f64;
    let mut compat_state = 0.0f64;
    for p in nm.codomain.bound.total.sample_points(samples, seed.wrapping_add(404)) {
        let lhs = nm.domain.iota.morphism.f_tot.apply(&nm.z.f_tot.apply(&p)?)?;
        let rhs = pi.f_tot.apply(&nm.codomain.iota.morphism.f_tot.apply(&p)?)?;
        let d = if lhs.node == rhs.node {
            numerics::inf_dist(&lhs.coords, &rhs.coords)
        } else {
            f64::INFINITY
        };
        compat_total = compat_total.max(d);
        if d > tol && witnesses.len() < 8 {
            witnesses.push(format!("total compatibility residual {d:.3e} at {p:?}"));
        }
    }
    for p in nm.codomain.bound.state.sample_points(samples, seed.wrapping_add(505)) {
        let lhs = nm.domain.iota.morphism.f_st.apply(&nm.z.f_st.apply(&p)?)?;
        let rhs = pi.f_st.apply(&nm.codomain.iota.morphism.f_st.apply(&p)?)?;
        let d = if lhs.node == rhs.node {
            numerics::inf_dist(&lhs.coords, &rhs.coords)
        } else {
            f64::INFINITY
        };
        compat_state = compat_state.max(d);
        if d > tol && witnesses.len() < 8 {
            witnesses.push(format!("state compatibility residual {d:.3e} at {p:?}"));
        }
    }
    let pass = witnesses.is_empty();
    Ok(NetworkMorphismReport {
        component_squares,
        z_square,
        iota_x,
        iota_y,
        compat_total,
        compat_state,
        witnesses,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    /// Per domain label: relatedness of `(w_{φ(x)}, v_x)` under `Φ_x`.
    pub hypothesis: Vec<(String, RelatednessReport)>,
    pub hypothesis_pass: bool,
    /// Relatedness of the interconnected pair `(W, V)` under `z`; absent when
    /// the hypothesis failed.
    pub conclusion: Option<RelatednessReport>,
    pub pass: bool,
}

/// Build the interconnected systems `W` (on bound_Y) and `V` (on bound_X).
pub fn interconnected_pair(
    nm: &NetworkMorphism,
    w: &[DeterministicControl],
    v: &[DeterministicControl],
) -> Result<(DeterministicControl, DeterministicControl)> {
    let pw = product_control(w)?;
    let pv = product_control(v)?;
    let big_w = interconnect_control(&nm.codomain.iota, &pw)?;
    let big_v = interconnect_control(&nm.domain.iota, &pv)?;
    Ok((big_w, big_v))
}

/// The induced-morphism theorem, checked on an instance: if every component
/// pair `(w_{φ(x)}, v_x)` is `Φ_x`-related, then the interconnected pair
/// `(W, V)` is `z`-related.
pub fn verify_main_theorem(
    nm: &NetworkMorphism,
    w: &[DeterministicControl],
    v: &[DeterministicControl],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<TheoremReport> {
    for (k, c) in w.iter().enumerate() {
        let r = check_control(c, samples, seed.wrapping_add(k as u64), tol.max(1e-9));
        if !r.pass {
            return Err(Error::Invalid(format!("codomain control {k} invalid: {:?}", r.violations)));
        }
    }
    for (k, c) in v.iter().enumerate() {
        let r = check_control(c, samples, seed.wrapping_add(50 + k as u64), tol.max(1e-9));
        if !r.pass {
            return Err(Error::Invalid(format!("domain control {k} invalid: {:?}", r.violations)));
        }
    }
    let mut hypothesis = Vec::new();
    let mut hypothesis_pass = true;
    for (x, comp) in nm.lm.components.iter().enumerate() {
        let y = nm.lm.label_map[x];
        let r = check_relatedness(comp, &w[y], &v[x], samples, seed.wrapping_add(700 + x as u64), tol)?;
        hypothesis_pass &= r.pass;
        hypothesis.push((nm.lm.domain.labels[x].clone(), r));
    }
    let conclusion = if hypothesis_pass {
        let (big_w, big_v) = interconnected_pair(nm, w, v)?;
        Some(check_relatedness(&nm.z, &big_w, &big_v, samples, seed.wrapping_add(900), tol)?)
    } else {
        None
    };
    let pass = hypothesis_pass && conclusion.as_ref().map(|c| c.pass).unwrap_or(false);
    Ok(TheoremReport { hypothesis, hypothesis_pass, conclusion, pass })
}

#[derive(Debug, Serialize)]
pub struct InvarianceDemo {
    #[serde(skip)]
    pub exec_y: Execution,
    #[serde(skip)]
    pub exec_x: Execution,
    pub sup_deviation: f64,
    pub switches: usize,
}

/// Dynamic witness of relatedness: execute `W` from `x0` and `V` from
/// `z(x0)`, push the former through `z`, and report the sup deviation on a
/// uniform time grid (coordinates interpolate within arcs).
pub fn invariance_demo(
    nm: &NetworkMorphism,
    w: &[DeterministicControl],
    v: &[DeterministicControl],
    x0: &TaggedPoint,
    opts: &IntegratorOptions,
) -> Result<InvarianceDemo> {
    let (big_w, big_v) = interconnected_pair(nm, w, v)?;
    let exec_y = execute(&big_w, x0, opts)?;
    let z0 = nm.z.f_tot.apply(x0)?;
    let exec_x = execute(&big_v, &z0, opts)?;
    let pushed = pushforward_execution(&nm.z.f_tot, &exec_y)?;
    let mut sup = 0.0f64;
    let dt = (opts.step * 10.0).max(opts.horizon / 2000.0);
    let mut t = 0.0;
    while t <= opts.horizon {
        if let (Some(a), Some(b)) = (pushed.sample_at(t), exec_x.sample_at(t)) {
            if a.coords.len() == b.coords.len() {
                sup = sup.max(numerics::inf_dist(&a.coords, &b.coords));
            }
        }
        t += dt;
    }
    let switches = exec_x.jumps.len();
    Ok(InvarianceDemo { exec_y, exec_x, sup_deviation: sup, switches })
}

/// One random affine network instance where component relatedness holds by
/// construction: Y has a single ℝ²→ℝ entry, X two entries pulled back along
/// invertible affine component maps, and the interconnections are solved to
/// make the compatibility square exact.
pub struct AffineInstance {
    pub nm: NetworkMorphism,
    pub w: Vec<DeterministicControl>,
    pub v: Vec<DeterministicControl>,
}

fn line_space(name: &str, dim: usize) -> Arc<HybridPhaseSpace> {
    let mut h = HybridPhaseSpace::new(name);
    h.add_node("n", BoxSpace::real_line(dim));
    Arc::new(h)
}

fn affine_entry(total: Arc<HybridPhaseSpace>, state: Arc<HybridPhaseSpace>) -> HybridSSub {
    let m = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let proj = PhaseSpaceMorphism::with_edge_map(
        total,
        state,
        vec![0],
        vec![0],
        vec![SmoothMap::linear(m)],
    )
    .expect("entry projection");
    HybridSSub::new(proj)
}

fn identity_like(from: Arc<HybridPhaseSpace>, to: Arc<HybridPhaseSpace>) -> PhaseSpaceMorphism {
    let maps = from.nodes.iter().map(|n| SmoothMap::identity(n.space.dim())).collect();
    PhaseSpaceMorphism {
        domain: from.clone(),
        codomain: to,
        node_map: (0..from.nodes.len()).collect(),
        edge_map: (0..from.edges.len()).collect(),
        maps,
    }
}

fn affine_morphism_1(
    dom: Arc<HybridPhaseSpace>,
    cod: Arc<HybridPhaseSpace>,
    rows: usize,
    cols: usize,
    a: &[f64],
    b: &[f64],
) -> PhaseSpaceMorphism {
    PhaseSpaceMorphism {
        domain: dom,
        codomain: cod,
        node_map: vec![0],
        edge_map: vec![0],
        maps: vec![SmoothMap::affine(DMatrix::from_row_slice(rows, cols, a), b.to_vec())],
    }
}

fn trivial_jump(ssub: &HybridSSub) -> JumpFn {
    let proj = ssub.proj.clone();
    Arc::new(move |p: &TaggedPoint| proj.apply(p).expect("projection"))
}

pub fn random_affine_instance(seed: u64) -> Result<AffineInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nz = |rng: &mut ChaCha8Rng| {
        let s: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        s * rng.gen_range(0.6..1.6)
    };
    let u = |rng: &mut ChaCha8Rng| rng.gen_range(-1.0..1.0);

    // Shared spaces.
    let t2 = line_space("t2", 2);
    let s1 = line_space("s1", 1);
    let entry = || affine_entry(t2.clone(), s1.clone());

    // Y control: w(u, v) = a·u + b·v + c; trivial jump.
    let (a, b, c) = (u(&mut rng), u(&mut rng), u(&mut rng));
    let e_y = entry();
    let w_field: FieldFn = Arc::new(move |p: &TaggedPoint| {
        vec![a * p.coords[0] + b * p.coords[1] + c]
    });
    let w_ctrl = DeterministicControl {
        ssub: e_y.clone(),
        field: w_field,
        jump: trivial_jump(&e_y),
        events: vec![vec![]],
    };

    // Component maps Φ_i with invertible totals whose first row respects the
    // projection, and pulled-back controls v_i.
    let mut alphas = [0.0; 2];
    let mut betas = [0.0; 2];
    let mut g1s = [0.0; 2];
    let mut g0s = [0.0; 2];
    let (m1, m0) = (u(&mut rng), u(&mut rng));
    let mut components = Vec::new();
    let mut v_ctrls = Vec::new();
    let mut entries_x = Vec::new();
    for i in 0..2 {
        let alpha = nz(&mut rng);
        let beta = u(&mut rng);
        let gamma = u(&mut rng);
        let delta = nz(&mut rng);
        let eps = u(&mut rng);
        alphas[i] = alpha;
        betas[i] = beta;
        g1s[i] = gamma + delta * m1;
        g0s[i] = delta * m0 + eps;
        let e_x = entry();
        let f_tot = affine_morphism_1(
            t2.clone(),
            t2.clone(),
            2,
            2,
            &[alpha, 0.0, gamma, delta],
            &[beta, eps],
        );
        let f_st = affine_morphism_1(s1.clone(), s1.clone(), 1, 1, &[alpha], &[beta]);
        components.push(SSubMorphism {
            domain: e_y.clone(),
            codomain: e_x.clone(),
            f_tot,
            f_st,
        });
        // v_i(q) = α·w(Φ_tot⁻¹ q).
        let inv_a = DMatrix::from_row_slice(2, 2, &[alpha, 0.0, gamma, delta])
            .try_inverse()
            .ok_or_else(|| Error::Invalid("singular component map".into()))?;
        let shift = [beta, eps];
        let v_field: FieldFn = Arc::new(move |p: &TaggedPoint| {
            let q0 = p.coords[0] - shift[0];
            let q1 = p.coords[1] - shift[1];
            let x = inv_a[(0, 0)] * q0 + inv_a[(0, 1)] * q1;
            let y = inv_a[(1, 0)] * q0 + inv_a[(1, 1)] * q1;
            vec![alpha * (a * x + b * y + c)]
        });
        v_ctrls.push(DeterministicControl {
            ssub: e_x.clone(),
            field: v_field,
            jump: trivial_jump(&e_x),
            events: vec![vec![]],
        });
        entries_x.push(e_x);
    }

    let list_y = SystemList { labels: vec!["*".into()], entries: vec![e_y.clone()] };
    let list_x = SystemList {
        labels: vec!["1".into(), "2".into()],
        entries: entries_x.clone(),
    };
    let lm = ListMorphism {
        domain: list_x.clone(),
        codomain: list_y.clone(),
        label_map: vec![0, 0],
        components,
    };

    // ι_Y : closed(ℝ) → entry_Y, x ↦ (x, m1·x + m0).
    let bound_y = HybridSSub::closed(s1.clone());
    let iota_y_tot = affine_morphism_1(s1.clone(), t2.clone(), 2, 1, &[1.0, m1], &[0.0, m0]);
    let iota_y = Interconnection::new(
        SSubMorphism {
            domain: bound_y.clone(),
            codomain: e_y.clone(),
            f_tot: iota_y_tot,
            f_st: identity_like(s1.clone(), s1.clone()),
        },
        identity_like(s1.clone(), s1.clone()),
    );
    let net_y = Network { list: list_y, bound: bound_y.clone(), iota: iota_y };

    // ι_X : closed(ℝ²) → Π(X), (z1,z2) ↦ (z1, l1(z), z2, l2(z)) with l_i
    // solved so the compatibility square is exact.
    let s2 = line_space("s2", 2);
    let bound_x = HybridSSub::closed(s2.clone());
    let prod_x = pi_product(&list_x);
    let mut ls = [[0.0f64; 3]; 2];
    for i in 0..2 {
        let d = u(&mut rng);
        let ci = (g1s[i] - d * alphas[1]) / alphas[0];
        let ei = g0s[i] - ci * betas[0] - d * betas[1];
        ls[i] = [ci, d, ei];
    }
    let iota_x_tot = affine_morphism_1(
        s2.clone(),
        prod_x.total.clone(),
        4,
        2,
        &[
            1.0, 0.0, //
            ls[0][0], ls[0][1], //
            0.0, 1.0, //
            ls[1][0], ls[1][1],
        ],
        &[0.0, ls[0][2], 0.0, ls[1][2]],
    );
    let iota_x = Interconnection::new(
        SSubMorphism {
            domain: bound_x.clone(),
            codomain: prod_x.clone(),
            f_tot: iota_x_tot,
            f_st: identity_like(s2.clone(), prod_x.state.clone()),
        },
        identity_like(prod_x.state.clone(), s2.clone()),
    );
    let net_x = Network { list: list_x, bound: bound_x.clone(), iota: iota_x };

    // z : bound_Y → bound_X, x ↦ (α₀x+β₀, α₁x+β₁), on state and total alike.
    let z_map = affine_morphism_1(
        s1.clone(),
        s2.clone(),
        2,
        1,
        &[alphas[0], alphas[1]],
        &[betas[0], betas[1]],
    );
    let z = SSubMorphism {
        domain: bound_y,
        codomain: bound_x,
        f_tot: z_map.clone(),
        f_st: z_map,
    };
    let nm = NetworkMorphism { domain: net_x, codomain: net_y, lm, z };
    Ok(AffineInstance { nm, w: vec![w_ctrl], v: v_ctrls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn pi_product_of_thermostat_pair() {
        let nt = catalog::networked_thermostats(0.3);
        let p = pi_product(&nt.nm.domain.list);
        assert_eq!(p.total.nodes.len(), 16);
        assert_eq!(p.state.nodes.len(), 4);
    }

    #[test]
    fn pi_product_single_entry_is_entry() {
        let nt = catalog::networked_thermostats(0.3);
        let p = pi_product(&nt.nm.codomain.list);
        assert_eq!(p.total.nodes.len(), 4);
        assert_eq!(p.state.nodes.len(), 2);
    }

    #[test]
    fn pi_morphism_matches_hand_computed_table() {
        let nt = catalog::networked_thermostats(0.3);
        let pi = pi_morphism(&nt.nm.lm).unwrap();
        // (x, j=0, x', j'=1) ↦ (x, 0, −x', 0, −x, 1, x', 1).
        let p = TaggedPoint::new(1, vec![0.5, -0.2]);
        let q = pi.f_tot.apply(&p).unwrap();
        assert_eq!(q.coords, vec![0.5, 0.2, -0.5, -0.2]);
        // Nodes: (0,1) ↦ ((0,0),(1,1)) with flat indices over [2,2,2,2].
        assert_eq!(q.node, 0b0011);
    }

    #[test]
    fn pi_morphism_projection_identity() {
        let nt = catalog::networked_thermostats(0.3);
        let pi = pi_morphism(&nt.nm.lm).unwrap();
        let prod_y = pi_product(&nt.nm.codomain.list);
        let totals_x = nt.nm.domain.list.totals();
        for p in prod_y.total.sample_points(10, 3) {
            let q = pi.f_tot.apply(&p).unwrap();
            let parts = split_many(&totals_x, &q).unwrap();
            for (x, part) in parts.iter().enumerate() {
                let y = nt.nm.lm.label_map[x];
                // For a single Y entry, p_{φ(x)} is the identity.
                assert_eq!(y, 0);
                let direct = nt.nm.lm.components[x].f_tot.apply(&p).unwrap();
                assert_eq!(part, &direct);
            }
        }
    }

    #[test]
    fn pi_morphism_identity_law() {
        let nt = catalog::networked_thermostats(0.3);
        let list = nt.nm.codomain.list.clone();
        let id_lm = ListMorphism {
            domain: list.clone(),
            codomain: list.clone(),
            label_map: vec![0],
            components: vec![SSubMorphism::identity(&list.entries[0])],
        };
        let pi = pi_morphism(&id_lm).unwrap();
        for p in pi.domain.total.sample_points(10, 5) {
            assert_eq!(pi.f_tot.apply(&p).unwrap(), p);
        }
    }

    #[test]
    fn network_morphism_checks_out() {
        let nt = catalog::networked_thermostats(0.3);
        let report = check_network_morphism(&nt.nm, 25, 7, 1e-9).unwrap();
        assert!(report.pass, "{:?}", report.witnesses);
    }

    #[test]
    fn sign_error_in_z_is_flagged() {
        let mut nt = catalog::networked_thermostats(0.3);
        nt.nm.z = catalog::broken_antidiagonal_z();
        let report = check_network_morphism(&nt.nm, 25, 7, 1e-9).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn networked_thermostats_theorem() {
        let nt = catalog::networked_thermostats(0.3);
        let report = verify_main_theorem(&nt.nm, &nt.w, &nt.v, 30, 11, 1e-8).unwrap();
        assert!(report.hypothesis_pass);
        for (_, h) in &report.hypothesis {
            assert!(h.max_vf_residual <= 1e-9, "{h:?}");
            assert!(h.max_jump_mismatch <= 1e-9, "{h:?}");
        }
        let c = report.conclusion.as_ref().unwrap();
        assert!(c.max_vf_residual <= 1e-8 && c.max_jump_mismatch <= 1e-8, "{c:?}");
    }

    #[test]
    fn random_affine_instances_conclude() {
        for seed in 0..5 {
            let inst = random_affine_instance(seed).unwrap();
            let report = verify_main_theorem(&inst.nm, &inst.w, &inst.v, 25, seed, 1e-8).unwrap();
            assert!(report.pass, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn defective_instance_is_flagged() {
        let mut inst = random_affine_instance(42).unwrap();
        let old = inst.v[0].field.clone();
        inst.v[0].field = Arc::new(move |p: &TaggedPoint| {
            let mut v = old(p);
            v[0] += 0.01;
            v
        });
        let report = verify_main_theorem(&inst.nm, &inst.w, &inst.v, 25, 1, 1e-8).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn invariance_of_antidiagonal() {
        let nt = catalog::networked_thermostats(0.3);
        let opts = IntegratorOptions { horizon: 10.0, max_jumps: 30, ..Default::default() };
        let demo =
            invariance_demo(&nt.nm, &nt.w, &nt.v, &TaggedPoint::new(0, vec![0.3]), &opts).unwrap();
        assert!(demo.switches >= 2, "switches {}", demo.switches);
        assert!(demo.sup_deviation <= 1e-4, "deviation {}", demo.sup_deviation);
    }
}
