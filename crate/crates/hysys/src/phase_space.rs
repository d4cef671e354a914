//! Hybrid phase spaces: a directed reflexive multigraph whose nodes carry
//! axis-aligned box state spaces and whose edges carry jump relations.
//! Includes the categorical product, the terminal space, and the underlying
//! point space realized as node-tagged coordinate vectors.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics;

/// One coordinate interval, possibly unbounded, with per-endpoint openness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// The whole real line.
    pub fn line() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY, lo_closed: false, hi_closed: false }
    }

    /// `[lo, ∞)`.
    pub fn half_line(lo: f64) -> Self {
        Interval { lo, hi: f64::INFINITY, lo_closed: true, hi_closed: false }
    }

    /// `(lo, ∞)`.
    pub fn open_half_line(lo: f64) -> Self {
        Interval { lo, hi: f64::INFINITY, lo_closed: false, hi_closed: false }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// Clamp into the closure of the interval.
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// Axis-aligned box state space; dimension 0 is a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSpace {
    intervals: Vec<Interval>,
}

impl BoxSpace {
    pub fn new(intervals: Vec<Interval>) -> Self {
        BoxSpace { intervals }
    }

    /// Single point (dimension 0).
    pub fn point() -> Self {
        BoxSpace { intervals: vec![] }
    }

    /// `ℝ^n`.
    pub fn real_line(n: usize) -> Self {
        BoxSpace { intervals: vec![Interval::line(); n] }
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && self.intervals.iter().zip(coords).all(|(iv, &x)| iv.contains(x))
    }

    /// First violated coordinate, if any.
    pub fn violation(&self, coords: &[f64]) -> Option<(usize, f64)> {
        if coords.len() != self.dim() {
            return Some((coords.len().min(self.dim()), f64::NAN));
        }
        self.intervals
            .iter()
            .zip(coords)
            .enumerate()
            .find(|(_, (iv, &x))| !iv.contains(x))
            .map(|(i, (_, &x))| (i, x))
    }

    /// Clamp coordinates into the closure of the box.
    pub fn clamp(&self, coords: &mut [f64]) {
        for (iv, x) in self.intervals.iter().zip(coords.iter_mut()) {
            *x = iv.clamp(*x);
        }
    }

    /// Concatenation of two boxes (the box of a product node).
    pub fn concat(&self, other: &BoxSpace) -> BoxSpace {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        BoxSpace { intervals }
    }
}

/// Tolerance-aware membership predicate over (source, target) coordinate pairs.
pub type PairPredicate = Arc<dyn Fn(&[f64], &[f64], f64) -> bool + Send + Sync>;
/// Seeded generator of member pairs.
pub type PairSampler = Arc<dyn Fn(u64, usize) -> Vec<(Vec<f64>, Vec<f64>)> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationKind {
    Diagonal,
    FiniteList,
    Predicate,
}

/// The set of admissible (before, after) state pairs along an edge.
///
/// Diagonal and finite-list relations are exact; predicate relations carry a
/// tolerance-aware membership test and, optionally, a sampler of member pairs.
#[derive(Clone)]
pub struct JumpRelation {
    kind: RelationKind,
    membership: PairPredicate,
    pairs: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    sampler: Option<PairSampler>,
}

impl std::fmt::Debug for JumpRelation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpRelation").field("kind", &self.kind).finish()
    }
}

impl JumpRelation {
    pub fn diagonal() -> Self {
        JumpRelation {
            kind: RelationKind::Diagonal,
            membership: Arc::new(|x, y, tol| {
                x.len() == y.len() && numerics::inf_dist(x, y) <= tol
            }),
            pairs: None,
            sampler: None,
        }
    }

    pub fn finite(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        let stored = pairs.clone();
        JumpRelation {
            kind: RelationKind::FiniteList,
            membership: Arc::new(move |x, y, tol| {
                stored.iter().any(|(a, b)| {
                    a.len() == x.len()
                        && b.len() == y.len()
                        && numerics::inf_dist(a, x) <= tol
                        && numerics::inf_dist(b, y) <= tol
                })
            }),
            pairs: Some(pairs),
            sampler: None,
        }
    }

    pub fn predicate(membership: PairPredicate) -> Self {
        JumpRelation { kind: RelationKind::Predicate, membership, pairs: None, sampler: None }
    }

    pub fn with_sampler(mut self, sampler: PairSampler) -> Self {
        self.sampler = Some(sampler);
        self
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    pub fn member(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        (self.membership)(x, y, tol)
    }

    pub fn finite_pairs(&self) -> Option<&[(Vec<f64>, Vec<f64>)]> {
        self.pairs.as_deref()
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some()
    }

    fn sample_raw(&self, seed: u64, count: usize) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        match self.kind {
            RelationKind::FiniteList => self.pairs.clone(),
            _ => self.sampler.as_ref().map(|s| s(seed, count)),
        }
    }

    /// Product relation: membership of concatenated pairs is the conjunction
    /// of the component memberships at the recorded dimension split.
    pub fn product(&self, other: &JumpRelation, dim_a_src: usize, dim_a_tgt: usize) -> JumpRelation {
        match (self.kind, other.kind) {
            (RelationKind::Diagonal, RelationKind::Diagonal) => JumpRelation::diagonal(),
            (RelationKind::FiniteList, RelationKind::FiniteList) => {
                let pa = self.pairs.as_ref().unwrap();
                let pb = other.pairs.as_ref().unwrap();
                let mut pairs = Vec::with_capacity(pa.len() * pb.len());
                for (ax, ay) in pa {
                    for (bx, by) in pb {
                        let mut x = ax.clone();
                        x.extend_from_slice(bx);
                        let mut y = ay.clone();
                        y.extend_from_slice(by);
                        pairs.push((x, y));
                    }
                }
                JumpRelation::finite(pairs)
            }
            _ => {
                let ma = self.membership.clone();
                let mb = other.membership.clone();
                let sampler = match (self.sample_hook(), other.sample_hook()) {
                    (Some(sa), Some(sb)) => {
                        let sampler: PairSampler = Arc::new(move |seed, count| {
                            let xs = sa(seed, count);
                            let ys = sb(seed.wrapping_add(1), count);
                            xs.iter()
                                .zip(ys.iter())
                                .map(|((ax, ay), (bx, by))| {
                                    let mut x = ax.clone();
                                    x.extend_from_slice(bx);
                                    let mut y = ay.clone();
                                    y.extend_from_slice(by);
                                    (x, y)
                                })
                                .collect()
                        });
                        Some(sampler)
                    }
                    _ => None,
                };
                let mut rel = JumpRelation {
                    kind: RelationKind::Predicate,
                    membership: Arc::new(move |x, y, tol| {
                        ma(&x[..dim_a_src], &y[..dim_a_tgt], tol)
                            && mb(&x[dim_a_src..], &y[dim_a_tgt..], tol)
                    }),
                    pairs: None,
                    sampler: None,
                };
                rel.sampler = sampler;
                rel
            }
        }
    }

    /// Sampler usable in products: finite lists cycle through their pairs.
    fn sample_hook(&self) -> Option<PairSampler> {
        match self.kind {
            RelationKind::FiniteList => {
                let pairs = self.pairs.clone().unwrap();
                Some(Arc::new(move |seed, count| {
                    (0..count)
                        .map(|i| pairs[(seed as usize + i) % pairs.len()].clone())
                        .collect()
                }))
            }
            _ => self.sampler.clone(),
        }
    }
}

/// A node: label plus its continuous state space.
#[derive(Clone, Debug)]
pub struct Node {
    pub label: String,
    pub space: BoxSpace,
}

/// A directed edge carrying a jump relation between its endpoint spaces.
#[derive(Clone, Debug)]
pub struct Edge {
    pub label: String,
    pub src: usize,
    pub tgt: usize,
    pub relation: JumpRelation,
}

/// Directed reflexive multigraph + per-node boxes + per-edge relations.
///
/// Every node carries a distinguished unit self-edge whose relation is the
/// diagonal. Node and edge identities are indices in declaration order.
#[derive(Clone, Debug)]
pub struct HybridPhaseSpace {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Unit edge index per node.
    pub unit_edges: Vec<usize>,
}

/// A point of the underlying space: node tag plus coordinates in its box.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedPoint {
    pub node: usize,
    pub coords: Vec<f64>,
}

impl TaggedPoint {
    pub fn new(node: usize, coords: Vec<f64>) -> Self {
        TaggedPoint { node, coords }
    }
}

impl HybridPhaseSpace {
    pub fn new(name: impl Into<String>) -> Self {
        HybridPhaseSpace { name: name.into(), nodes: Vec::new(), edges: Vec::new(), unit_edges: Vec::new() }
    }

    /// Add a node together with its unit edge; returns the node id.
    pub fn add_node(&mut self, label: impl Into<String>, space: BoxSpace) -> usize {
        let id = self.nodes.len();
        let label = label.into();
        self.nodes.push(Node { label: label.clone(), space });
        let eid = self.edges.len();
        self.edges.push(Edge {
            label: format!("unit_{label}"),
            src: id,
            tgt: id,
            relation: JumpRelation::diagonal(),
        });
        self.unit_edges.push(eid);
        id
    }

    /// Add a non-unit edge; returns the edge id.
    pub fn add_edge(
        &mut self,
        label: impl Into<String>,
        src: usize,
        tgt: usize,
        relation: JumpRelation,
    ) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { label: label.into(), src, tgt, relation });
        id
    }

    pub fn node_id(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.label == label)
    }

    pub fn space(&self, node: usize) -> &BoxSpace {
        &self.nodes[node].space
    }

    pub fn unit_edge(&self, node: usize) -> usize {
        self.unit_edges[node]
    }

    /// Every invariant violation, or an empty list for a valid space.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.unit_edges.len() != self.nodes.len() {
            problems.push(format!(
                "expected one unit edge per node, found {} for {} nodes",
                self.unit_edges.len(),
                self.nodes.len()
            ));
        }
        for (n, &e) in self.unit_edges.iter().enumerate() {
            match self.edges.get(e) {
                None => problems.push(format!("node {n}: unit edge {e} does not exist")),
                Some(edge) => {
                    if edge.src != n || edge.tgt != n {
                        problems.push(format!("node {n}: unit edge {e} is not a self-edge"));
                    }
                    if edge.relation.kind() != RelationKind::Diagonal {
                        problems.push(format!("node {n}: unit relation is not the diagonal"));
                    }
                }
            }
        }
        for (i, edge) in self.edges.iter().enumerate() {
            if edge.src >= self.nodes.len() || edge.tgt >= self.nodes.len() {
                problems.push(format!("edge {i} ({}) has undeclared endpoints", edge.label));
                continue;
            }
            if let Some(pairs) = edge.relation.finite_pairs() {
                let ds = self.nodes[edge.src].space.dim();
                let dt = self.nodes[edge.tgt].space.dim();
                for (x, y) in pairs {
                    if x.len() != ds || y.len() != dt {
                        problems.push(format!(
                            "edge {i} ({}): stored pair dimensions ({}, {}) do not match spaces ({ds}, {dt})",
                            edge.label,
                            x.len(),
                            y.len()
                        ));
                        break;
                    }
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for n in &self.nodes {
            if !seen.insert(&n.label) {
                problems.push(format!("duplicate node label {}", n.label));
            }
        }
        problems
    }

    pub fn contains(&self, p: &TaggedPoint) -> Result<bool> {
        let node = self.nodes.get(p.node).ok_or(Error::UnknownNode(p.node))?;
        Ok(node.space.contains(&p.coords))
    }

    /// First edge admitting the ordered pair `(x, y)`; the unit edge of
    /// `x.node` is checked first, then edges in declaration order.
    pub fn lambda_lookup(&self, x: &TaggedPoint, y: &TaggedPoint, tol: f64) -> Option<usize> {
        if x.node == y.node {
            let e = self.unit_edges[x.node];
            if self.edges[e].relation.member(&x.coords, &y.coords, tol) {
                return Some(e);
            }
        }
        self.edges.iter().position(|edge| {
            edge.src == x.node
                && edge.tgt == y.node
                && edge.relation.member(&x.coords, &y.coords, tol)
        })
    }

    /// Deterministic samples of the underlying space: `per_node` points in
    /// each node's box.
    pub fn sample_points(&self, per_node: usize, seed: u64) -> Vec<TaggedPoint> {
        let mut out = Vec::new();
        for (n, node) in self.nodes.iter().enumerate() {
            let count = if node.space.dim() == 0 { 1 } else { per_node };
            for coords in numerics::box_samples(&node.space, count, seed.wrapping_add(n as u64)) {
                out.push(TaggedPoint::new(n, coords));
            }
        }
        out
    }

    /// Member pairs of an edge's relation, or `None` when the relation is a
    /// predicate without a sampler. Diagonal relations sample the source box.
    pub fn sample_relation_pairs(
        &self,
        edge: usize,
        seed: u64,
        count: usize,
    ) -> Option<Vec<(TaggedPoint, TaggedPoint)>> {
        let e = &self.edges[edge];
        match e.relation.kind() {
            RelationKind::Diagonal => {
                let pts = numerics::box_samples(&self.nodes[e.src].space, count, seed);
                Some(
                    pts.into_iter()
                        .map(|c| {
                            (TaggedPoint::new(e.src, c.clone()), TaggedPoint::new(e.tgt, c))
                        })
                        .collect(),
                )
            }
            _ => e.relation.sample_raw(seed, count).map(|pairs| {
                pairs
                    .into_iter()
                    .map(|(x, y)| (TaggedPoint::new(e.src, x), TaggedPoint::new(e.tgt, y)))
                    .collect()
            }),
        }
    }
}

/// The terminal space: one node with a dimension-0 box, its unit edge only.
pub fn terminal() -> HybridPhaseSpace {
    let mut hps = HybridPhaseSpace::new("terminal");
    hps.add_node("pt", BoxSpace::point());
    hps
}

/// Node id of `(sa, sb)` in the product of spaces with `nb` nodes on the right.
pub fn product_node(sa: usize, sb: usize, nb: usize) -> usize {
    sa * nb + sb
}

/// Inverse of [`product_node`].
pub fn split_node(s: usize, nb: usize) -> (usize, usize) {
    (s / nb, s % nb)
}

/// Edge id of `(ea, eb)` in the product; `mb` = edge count on the right.
pub fn product_edge(ea: usize, eb: usize, mb: usize) -> usize {
    ea * mb + eb
}

/// Inverse of [`product_edge`].
pub fn split_edge(e: usize, mb: usize) -> (usize, usize) {
    (e / mb, e % mb)
}

/// Binary product: nodes are pairs (row-major in declaration order), boxes
/// concatenate, and each edge pair carries the conjunction relation.
pub fn product(a: &HybridPhaseSpace, b: &HybridPhaseSpace) -> HybridPhaseSpace {
    let nb = b.nodes.len();
    let mb = b.edges.len();
    let mut out = HybridPhaseSpace::new(format!("({}x{})", a.name, b.name));
    for na in &a.nodes {
        for nb_ in &b.nodes {
            out.nodes.push(Node {
                label: format!("({},{})", na.label, nb_.label),
                space: na.space.concat(&nb_.space),
            });
        }
    }
    for (ia, ea) in a.edges.iter().enumerate() {
        for (ib, eb) in b.edges.iter().enumerate() {
            let dim_a_src = a.nodes[ea.src].space.dim();
            let dim_a_tgt = a.nodes[ea.tgt].space.dim();
            out.edges.push(Edge {
                label: format!("({},{})", ea.label, eb.label),
                src: product_node(ea.src, eb.src, nb),
                tgt: product_node(ea.tgt, eb.tgt, nb),
                relation: ea.relation.product(&eb.relation, dim_a_src, dim_a_tgt),
            });
            let _ = (ia, ib);
        }
    }
    out.unit_edges = (0..a.nodes.len())
        .flat_map(|sa| {
            (0..nb).map(move |sb| (sa, sb))
        })
        .map(|(sa, sb)| product_edge(a.unit_edges[sa], b.unit_edges[sb], mb))
        .collect();
    out
}

/// Underlying-space splitting `𝕌(a×b) ≅ 𝕌a × 𝕌b`: a pure re-tagging.
pub fn split_underlying(
    a: &HybridPhaseSpace,
    b: &HybridPhaseSpace,
    p: &TaggedPoint,
) -> Result<(TaggedPoint, TaggedPoint)> {
    let (sa, sb) = split_node(p.node, b.nodes.len());
    if sa >= a.nodes.len() {
        return Err(Error::UnknownNode(p.node));
    }
    let da = a.nodes[sa].space.dim();
    let db = b.nodes[sb].space.dim();
    if p.coords.len() != da + db {
        return Err(Error::DimensionMismatch { expected: da + db, got: p.coords.len() });
    }
    Ok((
        TaggedPoint::new(sa, p.coords[..da].to_vec()),
        TaggedPoint::new(sb, p.coords[da..].to_vec()),
    ))
}

/// Inverse of [`split_underlying`].
pub fn join_underlying(
    a: &HybridPhaseSpace,
    b: &HybridPhaseSpace,
    pa: &TaggedPoint,
    pb: &TaggedPoint,
) -> Result<TaggedPoint> {
    if pa.node >= a.nodes.len() {
        return Err(Error::UnknownNode(pa.node));
    }
    if pb.node >= b.nodes.len() {
        return Err(Error::UnknownNode(pb.node));
    }
    let mut coords = pa.coords.clone();
    coords.extend_from_slice(&pb.coords);
    Ok(TaggedPoint::new(product_node(pa.node, pb.node, b.nodes.len()), coords))
}

/// Split a point of an iterated (left-nested) product into its factors.
pub fn split_many(spaces: &[Arc<HybridPhaseSpace>], p: &TaggedPoint) -> Result<Vec<TaggedPoint>> {
    match spaces.len() {
        0 => Ok(vec![]),
        1 => Ok(vec![p.clone()]),
        n => {
            let head = iterated_product(&spaces[..n - 1]);
            let (pa, pb) = split_underlying(&head, &spaces[n - 1], p)?;
            let mut out = split_many(&spaces[..n - 1], &pa)?;
            out.push(pb);
            Ok(out)
        }
    }
}

/// Inverse of [`split_many`].
pub fn join_many(spaces: &[Arc<HybridPhaseSpace>], parts: &[TaggedPoint]) -> Result<TaggedPoint> {
    match spaces.len() {
        0 => Ok(TaggedPoint::new(0, vec![])),
        1 => Ok(parts[0].clone()),
        n => {
            let head = iterated_product(&spaces[..n - 1]);
            let pa = join_many(&spaces[..n - 1], &parts[..n - 1])?;
            join_underlying(&head, &spaces[n - 1], &pa, &parts[n - 1])
        }
    }
}

/// Left-nested iterated product `((a₁×a₂)×a₃)…`; empty input is terminal.
pub fn iterated_product(spaces: &[Arc<HybridPhaseSpace>]) -> HybridPhaseSpace {
    match spaces.len() {
        0 => terminal(),
        1 => (*spaces[0]).clone(),
        _ => {
            let mut acc = (*spaces[0]).clone();
            for s in &spaces[1..] {
                acc = product(&acc, s);
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thermostat_space() -> HybridPhaseSpace {
        crate::catalog::thermostat_space()
    }

    fn ball_space() -> HybridPhaseSpace {
        crate::catalog::bouncing_ball_space()
    }

    #[test]
    fn thermostat_space_is_valid() {
        assert!(thermostat_space().validate().is_empty());
    }

    #[test]
    fn non_diagonal_unit_relation_is_invalid() {
        let mut hps = HybridPhaseSpace::new("bad");
        hps.add_node("n", BoxSpace::real_line(1));
        hps.edges[0].relation = JumpRelation::predicate(Arc::new(|_, _, _| true));
        let problems = hps.validate();
        assert!(problems.iter().any(|p| p.contains("diagonal")));
    }

    #[test]
    fn ball_space_is_valid() {
        assert!(ball_space().validate().is_empty());
    }

    #[test]
    fn containment_respects_boundaries() {
        let ball = ball_space();
        assert!(ball.contains(&TaggedPoint::new(0, vec![0.0, -1.0])).unwrap());
        assert!(!ball.contains(&TaggedPoint::new(0, vec![-0.1, 0.0])).unwrap());
        assert!(matches!(
            ball.contains(&TaggedPoint::new(5, vec![0.0, 0.0])),
            Err(Error::UnknownNode(5))
        ));
    }

    #[test]
    fn lambda_lookup_thermostat_threshold() {
        let c = thermostat_space();
        // Node 0 requires x ≤ −1 to leave; node 1 requires x ≥ 1.
        let x = TaggedPoint::new(1, vec![1.5]);
        let y = TaggedPoint::new(0, vec![1.5]);
        let e = c.lambda_lookup(&x, &y, 1e-12).expect("edge");
        assert_eq!(c.edges[e].tgt, 0);
        assert_ne!(e, c.unit_edge(1));
    }

    #[test]
    fn lambda_lookup_prefers_unit_edge_on_diagonal() {
        let c = thermostat_space();
        let x = TaggedPoint::new(0, vec![0.3]);
        assert_eq!(c.lambda_lookup(&x, &x, 1e-12), Some(c.unit_edge(0)));
    }

    #[test]
    fn lambda_lookup_ball_bounce_pairs() {
        let ball = ball_space();
        let hit = TaggedPoint::new(0, vec![0.0, -1.0]);
        let up = TaggedPoint::new(0, vec![0.0, 0.5]);
        let e = ball.lambda_lookup(&hit, &up, 1e-12).expect("bounce edge");
        assert_ne!(e, ball.unit_edge(0));
        let off_ground = TaggedPoint::new(0, vec![1.0, -1.0]);
        let off_up = TaggedPoint::new(0, vec![1.0, 0.5]);
        assert_eq!(ball.lambda_lookup(&off_ground, &off_up, 1e-12), None);
    }

    #[test]
    fn product_counts_nodes_and_edges() {
        let c = thermostat_space();
        let cc = product(&c, &c);
        assert_eq!(cc.nodes.len(), 4);
        assert_eq!(cc.edges.len(), 16);
        assert!(cc.validate().is_empty());
    }

    #[test]
    fn product_with_terminal_is_isomorphic() {
        let c = thermostat_space();
        let ct = product(&c, &terminal());
        assert_eq!(ct.nodes.len(), c.nodes.len());
        assert_eq!(ct.edges.len(), c.edges.len());
        for (n, m) in c.nodes.iter().zip(&ct.nodes) {
            assert_eq!(n.space, m.space);
        }
    }

    #[test]
    fn ball_square_has_corner_box() {
        let ball = ball_space();
        let sq = product(&ball, &ball);
        let b = &sq.nodes[0].space;
        assert_eq!(b.dim(), 4);
        assert_eq!(b.intervals()[0].lo, 0.0);
        assert_eq!(b.intervals()[2].lo, 0.0);
    }

    #[test]
    fn terminal_is_a_point() {
        let t = terminal();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.edges.len(), 1);
        assert!(t.contains(&TaggedPoint::new(0, vec![])).unwrap());
        let tt = product(&t, &t);
        assert_eq!(tt.nodes.len(), 1);
        assert_eq!(tt.edges.len(), 1);
    }

    #[test]
    fn split_join_round_trip() {
        let c = thermostat_space();
        let cc = product(&c, &c);
        for p in cc.sample_points(250, 11) {
            let (pa, pb) = split_underlying(&c, &c, &p).unwrap();
            let back = join_underlying(&c, &c, &pa, &pb).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn split_example_structural() {
        let c = thermostat_space();
        let b = ball_space();
        let p = TaggedPoint::new(product_node(0, 0, 1), vec![2.0, 3.0, 4.0]);
        let (pa, pb) = split_underlying(&c, &b, &p).unwrap();
        assert_eq!(pa, TaggedPoint::new(0, vec![2.0]));
        assert_eq!(pb, TaggedPoint::new(0, vec![3.0, 4.0]));
    }

    #[test]
    fn unit_lookup_on_product_samples() {
        let c = thermostat_space();
        let cc = product(&c, &c);
        for p in cc.sample_points(20, 3) {
            assert_eq!(cc.lambda_lookup(&p, &p, 1e-12), Some(cc.unit_edge(p.node)));
        }
    }

    #[test]
    fn product_associative_on_memberships() {
        let c = thermostat_space();
        let left = product(&product(&c, &c), &c);
        let right = product(&c, &product(&c, &c));
        assert_eq!(left.nodes.len(), right.nodes.len());
        // Corresponding relations agree on sampled pairs after re-tagging;
        // coordinates concatenate identically, nodes re-index.
        for (el, er) in [(0usize, 0usize), (5, 5), (20, 20)] {
            let l = &left.edges[el];
            let r = &right.edges[er];
            if let Some(pairs) = left.sample_relation_pairs(el, 9, 30) {
                for (x, y) in pairs {
                    assert!(r.relation.member(&x.coords, &y.coords, 1e-12));
                }
            }
            let _ = (l, r);
        }
    }
}
