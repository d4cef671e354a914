//! Morphisms of hybrid phase spaces: node functors plus per-node smooth maps,
//! Jacobians (analytic or finite-difference), hybrid surjective submersions,
//! morphisms of submersions, and verified interconnections.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics;
use crate::phase_space::{
    product, product_edge, product_node, BoxSpace, HybridPhaseSpace, RelationKind, TaggedPoint,
};

pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Default central finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// A differentiable map between coordinate boxes.
#[derive(Clone)]
pub struct SmoothMap {
    pub in_dim: usize,
    pub out_dim: usize,
    eval: VecFn,
    jac: Option<JacFn>,
    pub fd_step: f64,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothMap")
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new(in_dim: usize, out_dim: usize, eval: VecFn) -> Self {
        SmoothMap { in_dim, out_dim, eval, jac: None, fd_step: FD_STEP }
    }

    pub fn with_jacobian(mut self, jac: JacFn) -> Self {
        self.jac = Some(jac);
        self
    }

    pub fn identity(dim: usize) -> Self {
        SmoothMap::new(dim, dim, Arc::new(|x: &[f64]| x.to_vec()))
            .with_jacobian(Arc::new(move |_| DMatrix::identity(dim, dim)))
    }

    /// Linear map `x ↦ Ax` with exact Jacobian.
    pub fn linear(a: DMatrix<f64>) -> Self {
        let (rows, cols) = (a.nrows(), a.ncols());
        let a2 = a.clone();
        SmoothMap::new(
            cols,
            rows,
            Arc::new(move |x: &[f64]| {
                let v = nalgebra::DVector::from_column_slice(x);
                (&a * v).iter().copied().collect()
            }),
        )
        .with_jacobian(Arc::new(move |_| a2.clone()))
    }

    /// Affine map `x ↦ Ax + b` with exact Jacobian.
    pub fn affine(a: DMatrix<f64>, b: Vec<f64>) -> Self {
        let (rows, cols) = (a.nrows(), a.ncols());
        let a2 = a.clone();
        SmoothMap::new(
            cols,
            rows,
            Arc::new(move |x: &[f64]| {
                let v = nalgebra::DVector::from_column_slice(x);
                let y = &a * v;
                y.iter().zip(&b).map(|(u, c)| u + c).collect()
            }),
        )
        .with_jacobian(Arc::new(move |_| a2.clone()))
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// Jacobian at `x`. Analytic when available; otherwise central finite
    /// differences, falling back to one-sided differences at box boundaries.
    /// The boolean is true when any column used a one-sided difference.
    pub fn jacobian_with_flag(&self, x: &[f64], domain: Option<&BoxSpace>) -> (DMatrix<f64>, bool) {
        if let Some(jac) = &self.jac {
            return (jac(x), false);
        }
        let h = self.fd_step;
        let mut m = DMatrix::zeros(self.out_dim, self.in_dim);
        let mut one_sided = false;
        for j in 0..self.in_dim {
            let (lo_ok, hi_ok) = match domain.map(|b| b.intervals()[j]) {
                Some(iv) => (x[j] - h >= iv.lo, x[j] + h <= iv.hi),
                None => (true, true),
            };
            let col: Vec<f64> = if lo_ok && hi_ok {
                let mut xp = x.to_vec();
                xp[j] += h;
                let mut xm = x.to_vec();
                xm[j] -= h;
                let fp = self.eval(&xp);
                let fm = self.eval(&xm);
                fp.iter().zip(&fm).map(|(p, m)| (p - m) / (2.0 * h)).collect()
            } else if hi_ok {
                one_sided = true;
                let mut xp = x.to_vec();
                xp[j] += h;
                let fp = self.eval(&xp);
                let f0 = self.eval(x);
                fp.iter().zip(&f0).map(|(p, z)| (p - z) / h).collect()
            } else {
                one_sided = true;
                let mut xm = x.to_vec();
                xm[j] -= h;
                let fm = self.eval(&xm);
                let f0 = self.eval(x);
                f0.iter().zip(&fm).map(|(z, m)| (z - m) / h).collect()
            };
            for i in 0..self.out_dim {
                m[(i, j)] = col[i];
            }
        }
        (m, one_sided)
    }

    pub fn jacobian(&self, x: &[f64], domain: Option<&BoxSpace>) -> DMatrix<f64> {
        self.jacobian_with_flag(x, domain).0
    }

    /// Composite `self ∘ inner`; Jacobians chain when both are analytic.
    pub fn compose(&self, inner: &SmoothMap) -> SmoothMap {
        let outer_eval = self.eval.clone();
        let inner_eval = inner.eval.clone();
        let mut out = SmoothMap::new(
            inner.in_dim,
            self.out_dim,
            Arc::new(move |x: &[f64]| outer_eval(&inner_eval(x))),
        );
        if let (Some(jg), Some(jf)) = (&self.jac, &inner.jac) {
            let jg = jg.clone();
            let jf = jf.clone();
            let inner_eval = inner.eval.clone();
            out = out.with_jacobian(Arc::new(move |x: &[f64]| {
                let y = inner_eval(x);
                jg(&y) * jf(x)
            }));
        }
        out
    }

    /// Block product `(x, y) ↦ (f(x), g(y))` at the given dimension split.
    pub fn product(&self, other: &SmoothMap) -> SmoothMap {
        let fa = self.eval.clone();
        let fb = other.eval.clone();
        let da = self.in_dim;
        let mut out = SmoothMap::new(
            self.in_dim + other.in_dim,
            self.out_dim + other.out_dim,
            Arc::new(move |x: &[f64]| {
                let mut v = fa(&x[..da]);
                v.extend(fb(&x[da..]));
                v
            }),
        );
        if let (Some(ja), Some(jb)) = (&self.jac, &other.jac) {
            let ja = ja.clone();
            let jb = jb.clone();
            let (oa, ob, ia, ib) = (self.out_dim, other.out_dim, self.in_dim, other.in_dim);
            out = out.with_jacobian(Arc::new(move |x: &[f64]| {
                let ma = ja(&x[..ia]);
                let mb = jb(&x[ia..]);
                let mut m = DMatrix::zeros(oa + ob, ia + ib);
                m.view_mut((0, 0), (oa, ia)).copy_from(&ma);
                m.view_mut((oa, ia), (ob, ib)).copy_from(&mb);
                m
            }));
        }
        out
    }
}

/// A morphism of hybrid phase spaces: a functor on source graphs plus a
/// smooth map per node, subject to relation inclusion.
#[derive(Clone, Debug)]
pub struct PhaseSpaceMorphism {
    pub domain: Arc<HybridPhaseSpace>,
    pub codomain: Arc<HybridPhaseSpace>,
    /// Per-domain-node image node.
    pub node_map: Vec<usize>,
    /// Per-domain-edge image edge.
    pub edge_map: Vec<usize>,
    /// Per-domain-node smooth map into the image node's box.
    pub maps: Vec<SmoothMap>,
}

impl PhaseSpaceMorphism {
    /// Build with an explicit edge assignment.
    pub fn with_edge_map(
        domain: Arc<HybridPhaseSpace>,
        codomain: Arc<HybridPhaseSpace>,
        node_map: Vec<usize>,
        edge_map: Vec<usize>,
        maps: Vec<SmoothMap>,
    ) -> Result<Self> {
        let m = PhaseSpaceMorphism { domain, codomain, node_map, edge_map, maps };
        m.check_functorial()?;
        Ok(m)
    }

    /// Build by inferring the edge assignment. Unit edges map to unit edges;
    /// other edges map to the first codomain edge with matching endpoints
    /// whose relation admits sampled image pairs.
    pub fn new(
        domain: Arc<HybridPhaseSpace>,
        codomain: Arc<HybridPhaseSpace>,
        node_map: Vec<usize>,
        maps: Vec<SmoothMap>,
    ) -> Result<Self> {
        let mut edge_map = Vec::with_capacity(domain.edges.len());
        for (i, edge) in domain.edges.iter().enumerate() {
            let fs = node_map[edge.src];
            let ft = node_map[edge.tgt];
            if domain.unit_edges[edge.src] == i && edge.src == edge.tgt {
                edge_map.push(codomain.unit_edges[fs]);
                continue;
            }
            let candidates: Vec<usize> = codomain
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.src == fs && e.tgt == ft)
                .map(|(j, _)| j)
                .collect();
            if candidates.is_empty() {
                return Err(Error::Mismatch(format!(
                    "no codomain edge from node {fs} to node {ft} for domain edge {}",
                    edge.label
                )));
            }
            let chosen = if candidates.len() == 1 {
                candidates[0]
            } else {
                // Relation-guided tie-break on sampled member pairs.
                let sampled = domain.sample_relation_pairs(i, 17, 8);
                let mut pick = candidates[0];
                if let Some(pairs) = sampled {
                    'cands: for &c in &candidates {
                        for (x, y) in &pairs {
                            let fx = maps[x.node].eval(&x.coords);
                            let fy = maps[y.node].eval(&y.coords);
                            if !codomain.edges[c].relation.member(&fx, &fy, 1e-7) {
                                continue 'cands;
                            }
                        }
                        pick = c;
                        break;
                    }
                }
                pick
            };
            edge_map.push(chosen);
        }
        Self::with_edge_map(domain, codomain, node_map, edge_map, maps)
    }

    /// Build each node's smooth map from one tagged-point function.
    pub fn from_pointwise<F>(
        domain: Arc<HybridPhaseSpace>,
        codomain: Arc<HybridPhaseSpace>,
        node_map: Vec<usize>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&TaggedPoint) -> Vec<f64> + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let maps = (0..domain.nodes.len())
            .map(|s| {
                let f = f.clone();
                let in_dim = domain.space(s).dim();
                let out_dim = codomain.space(node_map[s]).dim();
                SmoothMap::new(
                    in_dim,
                    out_dim,
                    Arc::new(move |x: &[f64]| f(&TaggedPoint::new(s, x.to_vec()))),
                )
            })
            .collect();
        Self::new(domain, codomain, node_map, maps)
    }

    pub fn identity(space: Arc<HybridPhaseSpace>) -> Self {
        let node_map = (0..space.nodes.len()).collect();
        let edge_map = (0..space.edges.len()).collect();
        let maps = space.nodes.iter().map(|n| SmoothMap::identity(n.space.dim())).collect();
        PhaseSpaceMorphism { domain: space.clone(), codomain: space, node_map, edge_map, maps }
    }

    fn check_functorial(&self) -> Result<()> {
        if self.node_map.len() != self.domain.nodes.len()
            || self.edge_map.len() != self.domain.edges.len()
            || self.maps.len() != self.domain.nodes.len()
        {
            return Err(Error::Mismatch("node/edge/map table lengths".into()));
        }
        for (i, edge) in self.domain.edges.iter().enumerate() {
            let img = &self.codomain.edges[self.edge_map[i]];
            if img.src != self.node_map[edge.src] || img.tgt != self.node_map[edge.tgt] {
                return Err(Error::Mismatch(format!(
                    "edge {} maps to an edge with wrong endpoints",
                    edge.label
                )));
            }
        }
        for (n, &e) in self.domain.unit_edges.iter().enumerate() {
            if self.edge_map[e] != self.codomain.unit_edges[self.node_map[n]] {
                return Err(Error::Mismatch(format!("unit edge of node {n} not preserved")));
            }
        }
        Ok(())
    }

    /// The underlying map on tagged points.
    pub fn apply(&self, p: &TaggedPoint) -> Result<TaggedPoint> {
        if p.node >= self.domain.nodes.len() {
            return Err(Error::UnknownNode(p.node));
        }
        if let Some((index, value)) = self.domain.space(p.node).violation(&p.coords) {
            return Err(Error::Containment { index, value });
        }
        Ok(TaggedPoint::new(self.node_map[p.node], self.maps[p.node].eval(&p.coords)))
    }

    /// Jacobian of the per-node map at `p`.
    pub fn differential(&self, p: &TaggedPoint) -> DMatrix<f64> {
        self.maps[p.node].jacobian(&p.coords, Some(self.domain.space(p.node)))
    }

    /// Composite `g ∘ f` (self is `g`).
    pub fn compose(&self, f: &PhaseSpaceMorphism) -> Result<PhaseSpaceMorphism> {
        if !std::ptr::eq(
            Arc::as_ptr(&self.domain),
            Arc::as_ptr(&f.codomain),
        ) && self.domain.nodes.len() != f.codomain.nodes.len()
        {
            return Err(Error::Mismatch("compose: codomain/domain node counts differ".into()));
        }
        let node_map = f.node_map.iter().map(|&s| self.node_map[s]).collect();
        let edge_map = f.edge_map.iter().map(|&e| self.edge_map[e]).collect();
        let maps = f
            .node_map
            .iter()
            .zip(&f.maps)
            .map(|(&s, inner)| self.maps[s].compose(inner))
            .collect();
        Ok(PhaseSpaceMorphism {
            domain: f.domain.clone(),
            codomain: self.codomain.clone(),
            node_map,
            edge_map,
            maps,
        })
    }

    /// Componentwise product morphism `f×g : a×c → b×d`.
    pub fn product(&self, g: &PhaseSpaceMorphism) -> PhaseSpaceMorphism {
        let dom = Arc::new(product(&self.domain, &g.domain));
        let cod = Arc::new(product(&self.codomain, &g.codomain));
        let nb_dom = g.domain.nodes.len();
        let nb_cod = g.codomain.nodes.len();
        let mb_dom = g.domain.edges.len();
        let mb_cod = g.codomain.edges.len();
        let mut node_map = Vec::with_capacity(dom.nodes.len());
        let mut maps = Vec::with_capacity(dom.nodes.len());
        for sa in 0..self.domain.nodes.len() {
            for sb in 0..nb_dom {
                node_map.push(product_node(self.node_map[sa], g.node_map[sb], nb_cod));
                maps.push(self.maps[sa].product(&g.maps[sb]));
            }
        }
        let mut edge_map = Vec::with_capacity(dom.edges.len());
        for ea in 0..self.domain.edges.len() {
            for eb in 0..mb_dom {
                edge_map.push(product_edge(self.edge_map[ea], g.edge_map[eb], mb_cod));
            }
        }
        PhaseSpaceMorphism { domain: dom, codomain: cod, node_map, edge_map, maps }
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum EdgeVerdict {
    Pass,
    Unsampleable,
    Fail { witnesses: Vec<String> },
}

#[derive(Clone, Debug, Serialize)]
pub struct MorphismReport {
    pub edges: Vec<(String, EdgeVerdict)>,
    pub containment_failures: Vec<String>,
    pub pass: bool,
}

/// Sampled verification of the relation-inclusion condition: images of member
/// pairs of `a(γ)` must lie in `b(φγ)` within `tol`.
pub fn check_morphism(
    f: &PhaseSpaceMorphism,
    samples_per_relation: usize,
    seed: u64,
    tol: f64,
) -> MorphismReport {
    let mut edges = Vec::new();
    let mut containment_failures = Vec::new();
    for p in f.domain.sample_points(samples_per_relation.max(4), seed) {
        if let Ok(q) = f.apply(&p) {
            if !f.codomain.space(q.node).contains(&q.coords) {
                // Allow boundary rounding on closed endpoints.
                let mut clamped = q.coords.clone();
                f.codomain.space(q.node).clamp(&mut clamped);
                if numerics::inf_dist(&clamped, &q.coords) > tol {
                    containment_failures
                        .push(format!("image of node {} point {:?} leaves its box", p.node, p.coords));
                }
            }
        }
    }
    for (i, edge) in f.domain.edges.iter().enumerate() {
        let target = &f.codomain.edges[f.edge_map[i]].relation;
        let verdict = match f.domain.sample_relation_pairs(i, seed.wrapping_add(i as u64), samples_per_relation) {
            None => EdgeVerdict::Unsampleable,
            Some(pairs) => {
                let mut witnesses = Vec::new();
                for (x, y) in pairs {
                    let fx = f.maps[x.node].eval(&x.coords);
                    let fy = f.maps[y.node].eval(&y.coords);
                    if !target.member(&fx, &fy, tol) {
                        witnesses.push(format!(
                            "edge {}: pair ({:?} -> {:?}) maps to ({:?} -> {:?}) outside the image relation",
                            edge.label, x.coords, y.coords, fx, fy
                        ));
                        if witnesses.len() >= 5 {
                            break;
                        }
                    }
                }
                if witnesses.is_empty() {
                    EdgeVerdict::Pass
                } else {
                    EdgeVerdict::Fail { witnesses }
                }
            }
        };
        edges.push((edge.label.clone(), verdict));
    }
    let pass = containment_failures.is_empty()
        && edges.iter().all(|(_, v)| !matches!(v, EdgeVerdict::Fail { .. }));
    MorphismReport { edges, containment_failures, pass }
}

/// An open-system substrate: a morphism total → state that is node-surjective
/// with full-row-rank differentials.
#[derive(Clone, Debug)]
pub struct HybridSSub {
    pub total: Arc<HybridPhaseSpace>,
    pub state: Arc<HybridPhaseSpace>,
    pub proj: PhaseSpaceMorphism,
    pub asserted_surjective: bool,
    /// True when the projection is an identity (closed system).
    pub closed: bool,
}

impl HybridSSub {
    pub fn new(proj: PhaseSpaceMorphism) -> Self {
        HybridSSub {
            total: proj.domain.clone(),
            state: proj.codomain.clone(),
            proj,
            asserted_surjective: true,
            closed: false,
        }
    }

    /// Closed system: total = state, identity projection.
    pub fn closed(space: Arc<HybridPhaseSpace>) -> Self {
        HybridSSub {
            total: space.clone(),
            state: space.clone(),
            proj: PhaseSpaceMorphism::identity(space),
            asserted_surjective: true,
            closed: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmersionReport {
    pub node_surjective: bool,
    pub asserted_surjective: bool,
    pub min_singular_value: f64,
    pub rank_failures: Vec<String>,
    pub pass: bool,
}

/// Node-surjectivity (exact) plus a sampled full-row-rank check on the
/// Jacobians via singular values.
pub fn check_submersion(
    s: &HybridSSub,
    samples_per_node: usize,
    seed: u64,
    rank_tol: f64,
) -> SubmersionReport {
    let mut hit = vec![false; s.state.nodes.len()];
    for &t in &s.proj.node_map {
        hit[t] = true;
    }
    let node_surjective = hit.iter().all(|&b| b);
    let mut min_sv = f64::INFINITY;
    let mut rank_failures = Vec::new();
    for p in s.total.sample_points(samples_per_node, seed) {
        let state_dim = s.state.space(s.proj.node_map[p.node]).dim();
        if state_dim == 0 {
            continue;
        }
        let j = s.proj.differential(&p);
        if j.nrows() > j.ncols() {
            rank_failures.push(format!(
                "node {}: state dimension {} exceeds total dimension {}",
                p.node,
                j.nrows(),
                j.ncols()
            ));
            continue;
        }
        let svd = j.svd(false, false);
        let sv = svd.singular_values.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        min_sv = min_sv.min(sv);
        if sv < rank_tol {
            rank_failures.push(format!(
                "node {}: smallest singular value {sv:.3e} below {rank_tol:.3e} at {:?}",
                p.node, p.coords
            ));
        }
    }
    if min_sv == f64::INFINITY {
        min_sv = 0.0;
    }
    SubmersionReport {
        node_surjective,
        asserted_surjective: s.asserted_surjective,
        min_singular_value: min_sv,
        rank_failures: rank_failures.clone(),
        pass: node_surjective && rank_failures.is_empty(),
    }
}

/// A morphism of hybrid surjective submersions: a commuting square
/// `p_cod ∘ f_tot = f_st ∘ p_dom`.
#[derive(Clone, Debug)]
pub struct SSubMorphism {
    pub domain: HybridSSub,
    pub codomain: HybridSSub,
    pub f_tot: PhaseSpaceMorphism,
    pub f_st: PhaseSpaceMorphism,
}

impl SSubMorphism {
    pub fn identity(s: &HybridSSub) -> Self {
        SSubMorphism {
            domain: s.clone(),
            codomain: s.clone(),
            f_tot: PhaseSpaceMorphism::identity(s.total.clone()),
            f_st: PhaseSpaceMorphism::identity(s.state.clone()),
        }
    }

    /// Max residual of the commuting square over sampled total points.
    pub fn square_residual(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut max = 0.0f64;
        for p in self.domain.total.sample_points(samples, seed) {
            let upper = self.codomain.proj.apply(&self.f_tot.apply(&p)?)?;
            let lower = self.f_st.apply(&self.domain.proj.apply(&p)?)?;
            if upper.node != lower.node {
                return Err(Error::Verification(format!(
                    "square node mismatch at {:?}: {} vs {}",
                    p, upper.node, lower.node
                )));
            }
            max = max.max(numerics::inf_dist(&upper.coords, &lower.coords));
        }
        Ok(max)
    }

    /// Componentwise product of submersion morphisms.
    pub fn product(&self, g: &SSubMorphism) -> SSubMorphism {
        SSubMorphism {
            domain: product_ssub(&self.domain, &g.domain),
            codomain: product_ssub(&self.codomain, &g.codomain),
            f_tot: self.f_tot.product(&g.f_tot),
            f_st: self.f_st.product(&g.f_st),
        }
    }

    /// Composite `self ∘ f`.
    pub fn compose(&self, f: &SSubMorphism) -> Result<SSubMorphism> {
        Ok(SSubMorphism {
            domain: f.domain.clone(),
            codomain: self.codomain.clone(),
            f_tot: self.f_tot.compose(&f.f_tot)?,
            f_st: self.f_st.compose(&f.f_st)?,
        })
    }
}

/// Product of submersions with the block projection.
pub fn product_ssub(a: &HybridSSub, b: &HybridSSub) -> HybridSSub {
    let proj = a.proj.product(&b.proj);
    HybridSSub {
        total: proj.domain.clone(),
        state: proj.codomain.clone(),
        proj,
        asserted_surjective: a.asserted_surjective && b.asserted_surjective,
        closed: a.closed && b.closed,
    }
}

/// Projection `a×b → a` as a phase-space morphism.
pub fn projection_first(a: &Arc<HybridPhaseSpace>, b: &Arc<HybridPhaseSpace>) -> PhaseSpaceMorphism {
    let dom = Arc::new(product(a, b));
    let nb = b.nodes.len();
    let mb = b.edges.len();
    let mut node_map = Vec::new();
    let mut maps = Vec::new();
    for sa in 0..a.nodes.len() {
        let da = a.space(sa).dim();
        for sb in 0..nb {
            let db = b.space(sb).dim();
            node_map.push(sa);
            let mut m = DMatrix::zeros(da, da + db);
            for i in 0..da {
                m[(i, i)] = 1.0;
            }
            maps.push(SmoothMap::linear(m));
        }
    }
    let mut edge_map = Vec::new();
    for ea in 0..a.edges.len() {
        for _eb in 0..mb {
            edge_map.push(ea);
        }
    }
    PhaseSpaceMorphism { domain: dom, codomain: a.clone(), node_map, edge_map, maps }
}

/// Projection `a×b → b` as a phase-space morphism.
pub fn projection_second(a: &Arc<HybridPhaseSpace>, b: &Arc<HybridPhaseSpace>) -> PhaseSpaceMorphism {
    let dom = Arc::new(product(a, b));
    let nb = b.nodes.len();
    let mb = b.edges.len();
    let mut node_map = Vec::new();
    let mut maps = Vec::new();
    for sa in 0..a.nodes.len() {
        let da = a.space(sa).dim();
        for sb in 0..nb {
            let db = b.space(sb).dim();
            node_map.push(sb);
            let mut m = DMatrix::zeros(db, da + db);
            for i in 0..db {
                m[(i, da + i)] = 1.0;
            }
            maps.push(SmoothMap::linear(m));
        }
    }
    let mut edge_map = Vec::new();
    for _ea in 0..a.edges.len() {
        for eb in 0..mb {
            edge_map.push(eb);
        }
    }
    PhaseSpaceMorphism { domain: dom, codomain: b.clone(), node_map, edge_map, maps }
}

/// A submersion morphism whose state component is an isomorphism, together
/// with the user-supplied inverse of the state map.
#[derive(Clone, Debug)]
pub struct Interconnection {
    pub morphism: SSubMorphism,
    pub state_inverse: PhaseSpaceMorphism,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterconnectionReport {
    pub node_bijection: bool,
    pub max_round_trip: f64,
    pub square_residual: f64,
    pub witness: Option<String>,
    pub pass: bool,
}

impl Interconnection {
    pub fn new(morphism: SSubMorphism, state_inverse: PhaseSpaceMorphism) -> Self {
        Interconnection { morphism, state_inverse }
    }

    /// Verify the state component is an isomorphism: exact node bijection and
    /// two-sided sampled round trips through the supplied inverse.
    pub fn verify(&self, samples: usize, seed: u64, tol: f64) -> InterconnectionReport {
        let f_st = &self.morphism.f_st;
        let inv = &self.state_inverse;
        let n_dom = f_st.domain.nodes.len();
        let n_cod = f_st.codomain.nodes.len();
        let mut node_bijection = n_dom == n_cod;
        if node_bijection {
            let mut seen = vec![false; n_cod];
            for &t in &f_st.node_map {
                if seen[t] {
                    node_bijection = false;
                    break;
                }
                seen[t] = true;
            }
            if node_bijection {
                for s in 0..n_dom {
                    if inv.node_map[f_st.node_map[s]] != s {
                        node_bijection = false;
                        break;
                    }
                }
            }
        }
        let mut max_rt = 0.0f64;
        let mut witness = None;
        for p in f_st.domain.sample_points(samples, seed) {
            match f_st.apply(&p).and_then(|q| inv.apply(&q)) {
                Ok(back) => {
                    let d = if back.node == p.node {
                        numerics::inf_dist(&back.coords, &p.coords)
                    } else {
                        f64::INFINITY
                    };
                    max_rt = max_rt.max(d);
                    if d > tol && witness.is_none() {
                        witness = Some(format!("inverse∘f_st fails at {p:?} (returns {back:?})"));
                    }
                }
                Err(e) => {
                    max_rt = f64::INFINITY;
                    if witness.is_none() {
                        witness = Some(format!("round trip error at {p:?}: {e}"));
                    }
                }
            }
        }
        for q in f_st.codomain.sample_points(samples, seed.wrapping_add(1)) {
            match inv.apply(&q).and_then(|p| f_st.apply(&p)) {
                Ok(back) => {
                    let d = if back.node == q.node {
                        numerics::inf_dist(&back.coords, &q.coords)
                    } else {
                        f64::INFINITY
                    };
                    max_rt = max_rt.max(d);
                    if d > tol && witness.is_none() {
                        witness = Some(format!("f_st∘inverse fails at {q:?} (returns {back:?})"));
                    }
                }
                Err(e) => {
                    max_rt = f64::INFINITY;
                    if witness.is_none() {
                        witness = Some(format!("round trip error at {q:?}: {e}"));
                    }
                }
            }
        }
        let square_residual = self.morphism.square_residual(samples, seed).unwrap_or(f64::INFINITY);
        let pass = node_bijection && max_rt <= tol && square_residual <= tol;
        InterconnectionReport { node_bijection, max_round_trip: max_rt, square_residual, witness, pass }
    }
}

/// Verify and return the inverse of an isomorphism of phase spaces.
///
/// The candidate inverse is user-supplied; both directions are checked as
/// morphisms (relation inclusion both ways gives sampled relation equality)
/// and round trips are checked on sampled points.
pub fn invert_iso(
    f: &PhaseSpaceMorphism,
    inverse: PhaseSpaceMorphism,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<PhaseSpaceMorphism> {
    for p in f.domain.sample_points(samples, seed) {
        let back = inverse.apply(&f.apply(&p)?)?;
        if back.node != p.node || numerics::inf_dist(&back.coords, &p.coords) > tol {
            return Err(Error::Verification(format!("round trip fails at {p:?}")));
        }
    }
    let fwd = check_morphism(f, samples, seed, tol);
    let bwd = check_morphism(&inverse, samples, seed.wrapping_add(1), tol);
    if !fwd.pass || !bwd.pass {
        return Err(Error::Verification("relation equality check failed".into()));
    }
    Ok(inverse)
}

/// Convenience: does an edge's relation have exact (diagonal/finite) kind?
pub fn relation_exact(hps: &HybridPhaseSpace, edge: usize) -> bool {
    !matches!(hps.edges[edge].relation.kind(), RelationKind::Predicate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn identity_apply_is_identity() {
        let c = Arc::new(catalog::thermostat_space());
        let id = PhaseSpaceMorphism::identity(c.clone());
        let p = TaggedPoint::new(1, vec![0.7]);
        assert_eq!(id.apply(&p).unwrap(), p);
        assert!(check_morphism(&id, 20, 1, 1e-9).pass);
    }

    #[test]
    fn linear_map_differential_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = SmoothMap::linear(a.clone());
        let j = m.jacobian(&[0.5, -0.5], None);
        assert_eq!(j, a);
    }

    #[test]
    fn finite_difference_log_derivative() {
        let m = SmoothMap::new(1, 1, Arc::new(|x: &[f64]| vec![-x[0].ln()]));
        let j = m.jacobian(&[2.0], None);
        assert!((j[(0, 0)] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn chain_rule_on_random_affine_pairs() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, -0.7, 1.1]);
        let f = SmoothMap::affine(a.clone(), vec![0.1, 0.2]);
        let g = SmoothMap::affine(b.clone(), vec![-0.3, 0.4]);
        let gf = g.compose(&f);
        let x = [0.9, -1.7];
        let j = gf.jacobian(&x, None);
        let expected = &b * &a;
        assert!((j - expected).abs().max() < 1e-6);
    }

    #[test]
    fn antidiagonal_z_matches_table() {
        let (z, _) = catalog::antidiagonal_z();
        let p = TaggedPoint::new(0, vec![0.4]);
        let q = z.apply(&p).unwrap();
        // (x, j=0) ↦ ((x, j=0), (−x, j=1)); product node (0,1) of a 2-node square.
        assert_eq!(q.node, 1);
        assert_eq!(q.coords, vec![0.4, -0.4]);
    }

    #[test]
    fn projection_is_submersion() {
        let c = Arc::new(catalog::thermostat_space());
        let proj = projection_first(&c, &c);
        let s = HybridSSub::new(proj);
        let report = check_submersion(&s, 20, 5, 1e-9);
        assert!(report.pass, "{report:?}");
        assert!(report.min_singular_value >= 1.0 - 1e-12);
    }

    #[test]
    fn constant_map_fails_submersion() {
        let r = Arc::new({
            let mut h = HybridPhaseSpace::new("line");
            h.add_node("n", BoxSpace::real_line(1));
            h
        });
        let m = PhaseSpaceMorphism {
            domain: r.clone(),
            codomain: r.clone(),
            node_map: vec![0],
            edge_map: vec![0],
            maps: vec![SmoothMap::new(1, 1, Arc::new(|_: &[f64]| vec![0.0]))],
        };
        let s = HybridSSub::new(m);
        assert!(!check_submersion(&s, 10, 1, 1e-9).pass);
    }

    #[test]
    fn involution_is_its_own_inverse() {
        let (flip, flip_inv) = catalog::thermostat_flip();
        let inv = invert_iso(&flip, flip_inv, 30, 2, 1e-10).unwrap();
        let p = TaggedPoint::new(0, vec![0.25]);
        let rt = inv.apply(&flip.apply(&p).unwrap()).unwrap();
        assert_eq!(rt, p);
    }

    #[test]
    fn square_map_is_not_an_iso() {
        let r = Arc::new({
            let mut h = HybridPhaseSpace::new("line");
            h.add_node("n", BoxSpace::real_line(1));
            h
        });
        let sq = PhaseSpaceMorphism {
            domain: r.clone(),
            codomain: r.clone(),
            node_map: vec![0],
            edge_map: vec![0],
            maps: vec![SmoothMap::new(1, 1, Arc::new(|x: &[f64]| vec![x[0] * x[0]]))],
        };
        let s = HybridSSub::closed(r.clone());
        let m = SSubMorphism {
            domain: s.clone(),
            codomain: s,
            f_tot: sq.clone(),
            f_st: sq.clone(),
        };
        let i = Interconnection::new(m, sq);
        assert!(!i.verify(30, 3, 1e-8).pass);
    }

    #[test]
    fn product_morphism_functoriality_on_affines() {
        let r = Arc::new({
            let mut h = HybridPhaseSpace::new("line");
            h.add_node("n", BoxSpace::real_line(1));
            h
        });
        let mk = |a: f64, b: f64| PhaseSpaceMorphism {
            domain: r.clone(),
            codomain: r.clone(),
            node_map: vec![0],
            edge_map: vec![0],
            maps: vec![SmoothMap::affine(DMatrix::from_row_slice(1, 1, &[a]), vec![b])],
        };
        let (f, g, f2, g2) = (mk(2.0, 1.0), mk(-0.5, 0.3), mk(1.5, -1.0), mk(3.0, 0.0));
        let lhs = f2.product(&g2).compose(&f.product(&g)).unwrap();
        let rhs = f2.compose(&f).unwrap().product(&g2.compose(&g).unwrap());
        let p = TaggedPoint::new(0, vec![0.7, -0.2]);
        assert_eq!(lhs.apply(&p).unwrap(), rhs.apply(&p).unwrap());
    }
}
