//! Exact finite-set backend: the coproduct-of-products bijection, relation
//! composition, discrete-time open systems, the discrete network theorem,
//! and the lax-functoriality strictness witness — all table-driven with zero
//! numerical tolerance.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// A finite set of opaque ordered atoms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiniteSet {
    pub elements: Vec<String>,
}

impl FiniteSet {
    pub fn new(elements: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !seen.insert(e.clone()) {
                return Err(Error::Invalid(format!("duplicate atom {e}")));
            }
        }
        Ok(FiniteSet { elements })
    }

    pub fn of_size(n: usize, prefix: &str) -> Self {
        FiniteSet { elements: (0..n).map(|i| format!("{prefix}{i}")).collect() }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// A map between finite sets as a full lookup table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiniteMap {
    pub domain: usize,
    pub codomain: usize,
    pub table: Vec<usize>,
}

impl FiniteMap {
    pub fn new(domain: usize, codomain: usize, table: Vec<usize>) -> Result<Self> {
        if table.len() != domain {
            return Err(Error::DimensionMismatch { expected: domain, got: table.len() });
        }
        if let Some(&bad) = table.iter().find(|&&v| v >= codomain) {
            return Err(Error::Invalid(format!("table value {bad} outside codomain")));
        }
        Ok(FiniteMap { domain, codomain, table })
    }

    pub fn identity(n: usize) -> Self {
        FiniteMap { domain: n, codomain: n, table: (0..n).collect() }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }

    /// Composite `self ∘ inner`.
    pub fn compose(&self, inner: &FiniteMap) -> Result<FiniteMap> {
        if inner.codomain != self.domain {
            return Err(Error::Mismatch("map composition domains".into()));
        }
        Ok(FiniteMap {
            domain: inner.domain,
            codomain: self.codomain,
            table: inner.table.iter().map(|&x| self.table[x]).collect(),
        })
    }

    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.codomain];
        for &v in &self.table {
            hit[v] = true;
        }
        hit.into_iter().all(|b| b)
    }

    pub fn is_injective(&self) -> bool {
        let mut hit = vec![false; self.codomain];
        for &v in &self.table {
            if hit[v] {
                return false;
            }
            hit[v] = true;
        }
        true
    }

    pub fn inverse(&self) -> Result<FiniteMap> {
        if self.domain != self.codomain || !self.is_injective() {
            return Err(Error::Invalid("not a bijection".into()));
        }
        let mut table = vec![0; self.codomain];
        for (x, &y) in self.table.iter().enumerate() {
            table[y] = x;
        }
        Ok(FiniteMap { domain: self.codomain, codomain: self.domain, table })
    }
}

/// Enumerate all maps `dom → cod` as tables, in lexicographic order.
pub fn all_maps(dom: usize, cod: usize) -> Vec<Vec<usize>> {
    if dom == 0 {
        return vec![vec![]];
    }
    if cod == 0 {
        return vec![];
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; dom];
    loop {
        out.push(cur.clone());
        let mut i = dom;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < cod {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// A relation between two finite sets as an exact pair set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiniteRelation {
    pub src: usize,
    pub tgt: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl FiniteRelation {
    pub fn new(src: usize, tgt: usize, pairs: BTreeSet<(usize, usize)>) -> Result<Self> {
        if pairs.iter().any(|&(x, y)| x >= src || y >= tgt) {
            return Err(Error::Invalid("relation pair outside its sets".into()));
        }
        Ok(FiniteRelation { src, tgt, pairs })
    }

    pub fn diagonal(n: usize) -> Self {
        FiniteRelation { src: n, tgt: n, pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pairs.contains(&(x, y))
    }

    pub fn is_subrelation_of(&self, other: &FiniteRelation) -> bool {
        self.src == other.src && self.tgt == other.tgt && self.pairs.is_subset(&other.pairs)
    }
}

/// Exact relation composite: `(x, z) ∈ S∘R` iff some middle `y` has
/// `(x, y) ∈ R` and `(y, z) ∈ S`.
pub fn relation_compose(s: &FiniteRelation, r: &FiniteRelation) -> Result<FiniteRelation> {
    if r.tgt != s.src {
        return Err(Error::Mismatch("relation composition middles".into()));
    }
    let mut pairs = BTreeSet::new();
    for &(x, y) in &r.pairs {
        for &(y2, z) in &s.pairs {
            if y == y2 {
                pairs.insert((x, z));
            }
        }
    }
    Ok(FiniteRelation { src: r.src, tgt: s.tgt, pairs })
}

/// Tag extraction for a disjoint union with the given part sizes: flat index
/// → (part, inner index).
pub fn source_map(part_sizes: &[usize], flat: usize) -> Result<(usize, usize)> {
    let mut rest = flat;
    for (k, &n) in part_sizes.iter().enumerate() {
        if rest < n {
            return Ok((k, rest));
        }
        rest -= n;
    }
    Err(Error::Invalid(format!("index {flat} outside the coproduct")))
}

/// Injection of the `part`-th summand; inverse of [`source_map`] on its image.
pub fn inject(part_sizes: &[usize], part: usize, inner: usize) -> usize {
    part_sizes[..part].iter().sum::<usize>() + inner
}

/// The coproduct-of-products instance: `c_sizes[j][k] = |C(j, k)|` over a
/// finite index set `J` with per-`j` index sets `K_j = {0, …}`.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaBijection {
    pub c_sizes: Vec<Vec<usize>>,
    /// Size of `⨆_{(k_j)} ∏_j C(j, k_j)`.
    pub coproduct_size: usize,
    /// Size of `∏_j ⨆_k C(j, k)`.
    pub product_size: usize,
    /// Ω: coproduct side → product side.
    pub forward: Vec<usize>,
    /// ℵ: product side → coproduct side (empty when Ω is not bijective).
    pub backward: Vec<usize>,
}

fn mixed_radix_tuples(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &r in radices {
        let mut next = Vec::with_capacity(out.len() * r);
        for t in &out {
            for v in 0..r {
                let mut t2 = t.clone();
                t2.push(v);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

/// Build Ω and its inverse ℵ explicitly and exhaustively.
///
/// An element of the coproduct side is a choice `(k_j)_j` together with a
/// tuple `(c_j ∈ C(j, k_j))_j`; Ω sends it to the tuple whose j-th entry is
/// the summand injection of `c_j` into `⨆_k C(j, k)`.
pub fn omega(c_sizes: &[Vec<usize>]) -> Result<OmegaBijection> {
    let nj = c_sizes.len();
    let k_counts: Vec<usize> = c_sizes.iter().map(|k| k.len()).collect();
    if k_counts.iter().any(|&n| n == 0) {
        return Err(Error::Invalid("every j needs at least one k".into()));
    }
    // Disjoint-union sizes per j and the product side's mixed radix.
    let union_sizes: Vec<usize> = c_sizes.iter().map(|k| k.iter().sum()).collect();
    let product_size = union_sizes.iter().product();

    // Enumerate the coproduct side: for each choice (k_j), each fiber tuple.
    let mut forward = Vec::new();
    for ks in mixed_radix_tuples(&k_counts) {
        let fiber_sizes: Vec<usize> = (0..nj).map(|j| c_sizes[j][ks[j]]).collect();
        for cs in mixed_radix_tuples(&fiber_sizes) {
            // Product-side flat index of the tuple (inject_j(k_j, c_j))_j.
            let mut flat = 0usize;
            for j in 0..nj {
                let entry = inject(&c_sizes[j], ks[j], cs[j]);
                flat = flat * union_sizes[j] + entry;
            }
            forward.push(flat);
        }
    }
    let coproduct_size = forward.len();

    let mut backward = vec![usize::MAX; product_size];
    let mut bijective = coproduct_size == product_size;
    for (a, &b) in forward.iter().enumerate() {
        if backward[b] != usize::MAX {
            bijective = false;
        }
        backward[b] = a;
    }
    if !bijective || backward.iter().any(|&a| a == usize::MAX) {
        return Err(Error::Verification("omega failed to be a bijection".into()));
    }
    Ok(OmegaBijection {
        c_sizes: c_sizes.to_vec(),
        coproduct_size,
        product_size,
        forward,
        backward,
    })
}

impl OmegaBijection {
    /// Exhaustive `ℵ∘Ω = id` and `Ω∘ℵ = id`.
    pub fn round_trips(&self) -> bool {
        self.forward.iter().enumerate().all(|(a, &b)| self.backward[b] == a)
            && self.backward.iter().enumerate().all(|(b, &a)| self.forward[a] == b)
    }
}

/// A discrete-time open system: a surjective projection plus a dynamics map
/// from the total set into the state set.
#[derive(Clone, Debug, Serialize)]
pub struct FiniteOpenSystem {
    pub total: usize,
    pub state: usize,
    pub proj: FiniteMap,
    pub dynamics: FiniteMap,
}

impl FiniteOpenSystem {
    pub fn new(proj: FiniteMap, dynamics: FiniteMap) -> Result<Self> {
        if dynamics.domain != proj.domain || dynamics.codomain != proj.codomain {
            return Err(Error::Mismatch("dynamics must share the projection's sets".into()));
        }
        if !proj.is_surjective() {
            return Err(Error::Invalid("projection must be surjective".into()));
        }
        Ok(FiniteOpenSystem { total: proj.domain, state: proj.codomain, proj, dynamics })
    }
}

/// A morphism of discrete open systems: a commuting square of maps.
#[derive(Clone, Debug, Serialize)]
pub struct FiniteSystemMorphism {
    pub f_tot: FiniteMap,
    pub f_st: FiniteMap,
}

impl FiniteSystemMorphism {
    /// Exact square check `p_cod ∘ f_tot = f_st ∘ p_dom`.
    pub fn square_commutes(&self, dom: &FiniteOpenSystem, cod: &FiniteOpenSystem) -> Result<bool> {
        let upper = cod.proj.compose(&self.f_tot)?;
        let lower = self.f_st.compose(&dom.proj)?;
        Ok(upper == lower)
    }

    /// Exact relatedness of dynamics: `f_st ∘ X = Y ∘ f_tot`.
    pub fn relates(&self, dom: &FiniteOpenSystem, cod: &FiniteOpenSystem) -> Result<bool> {
        let lhs = self.f_st.compose(&dom.dynamics)?;
        let rhs = cod.dynamics.compose(&self.f_tot)?;
        Ok(lhs == rhs)
    }
}

/// The section relation of a map between closed discrete systems: dynamics
/// `X` on the domain set is related to `Y` on the codomain iff
/// `f ∘ X = Y ∘ f`. Dynamics are flat-indexed in [`all_maps`] order.
pub fn gamma_relation(f: &FiniteMap) -> FiniteRelation {
    let dyn_dom = all_maps(f.domain, f.domain);
    let dyn_cod = all_maps(f.codomain, f.codomain);
    let mut pairs = BTreeSet::new();
    for (ix, x) in dyn_dom.iter().enumerate() {
        for (iy, y) in dyn_cod.iter().enumerate() {
            let related =
                (0..f.domain).all(|a| f.table[x[a]] == y[f.table[a]]);
            if related {
                pairs.insert((ix, iy));
            }
        }
    }
    FiniteRelation { src: dyn_dom.len(), tgt: dyn_cod.len(), pairs }
}

/// A certified failure of strictness for the section relation: dynamics
/// related across the composite with no interpolating middle dynamics.
#[derive(Clone, Debug, Serialize)]
pub struct StrictnessWitness {
    pub sizes: (usize, usize, usize),
    pub f: Vec<usize>,
    pub g: Vec<usize>,
    /// Flat dynamics indices on the outer sets.
    pub related_pair: (usize, usize),
}

/// Search small instances for a pair related under `Γ(g∘f)` but absent from
/// `Γ(g)∘Γ(f)`, certifying that the inclusion is strict in general.
pub fn check_lax_strictness() -> Option<StrictnessWitness> {
    for a in 1..=2usize {
        for b in a..=3usize {
            for c in b..=3usize {
                for f_t in all_maps(a, b) {
                    let f = FiniteMap { domain: a, codomain: b, table: f_t };
                    for g_t in all_maps(b, c) {
                        let g = FiniteMap { domain: b, codomain: c, table: g_t };
                        let gf = g.compose(&f).expect("composable");
                        let gamma_f = gamma_relation(&f);
                        let gamma_g = gamma_relation(&g);
                        let gamma_gf = gamma_relation(&gf);
                        let composite =
                            relation_compose(&gamma_g, &gamma_f).expect("composable");
                        if let Some(&(x, z)) =
                            gamma_gf.pairs.difference(&composite.pairs).next()
                        {
                            return Some(StrictnessWitness {
                                sizes: (a, b, c),
                                f: f.table.clone(),
                                g: g.table.clone(),
                                related_pair: (x, z),
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// One random discrete network-theorem instance: a single codomain component,
/// two domain components pulled back along state-preserving bijections of the
/// total set, and interconnections solved for exact compatibility.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteInstance {
    pub state: usize,
    pub fiber: usize,
    pub w: FiniteOpenSystem,
    pub v: [FiniteOpenSystem; 2],
    /// Component total maps `Φ_i : T → T` (state permutation × fiberwise
    /// permutation) and their state parts.
    pub phi_tot: [FiniteMap; 2],
    pub phi_st: [FiniteMap; 2],
    /// Feedback section `m : S → F` of the codomain interconnection.
    pub m: Vec<usize>,
    /// Domain interconnection fiber choices `l_i : S×S → F`.
    pub l: [Vec<usize>; 2],
}

fn pair_index(s1: usize, s2: usize, s: usize) -> usize {
    s1 * s + s2
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        p.swap(i, j);
    }
    p
}

pub fn discrete_instance(seed: u64) -> DiscreteInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = rng.gen_range(2..=3usize);
    let fiber = rng.gen_range(1..=3usize);
    let total = state * fiber;
    let proj = FiniteMap {
        domain: total,
        codomain: state,
        table: (0..total).map(|t| t / fiber).collect(),
    };
    // Codomain dynamics: arbitrary map total → state.
    let w_dyn = FiniteMap {
        domain: total,
        codomain: state,
        table: (0..total).map(|_| rng.gen_range(0..state)).collect(),
    };
    let w = FiniteOpenSystem::new(proj.clone(), w_dyn).expect("codomain system");

    let mut phi_tot = Vec::new();
    let mut phi_st = Vec::new();
    let mut v = Vec::new();
    for _ in 0..2 {
        let sigma = random_permutation(&mut rng, state);
        let psi: Vec<Vec<usize>> =
            (0..state).map(|_| random_permutation(&mut rng, fiber)).collect();
        let tot = FiniteMap {
            domain: total,
            codomain: total,
            table: (0..total)
                .map(|t| {
                    let (s, f) = (t / fiber, t % fiber);
                    sigma[s] * fiber + psi[s][f]
                })
                .collect(),
        };
        let st = FiniteMap { domain: state, codomain: state, table: sigma.clone() };
        // Pulled-back dynamics v := Φ_st ∘ w ∘ Φ_tot⁻¹: exactly Φ-related.
        let tot_inv = tot.inverse().expect("bijection");
        let v_dyn = st
            .compose(&w.dynamics)
            .and_then(|m| m.compose(&tot_inv))
            .expect("pullback dynamics");
        v.push(FiniteOpenSystem::new(proj.clone(), v_dyn).expect("domain system"));
        phi_tot.push(tot);
        phi_st.push(st);
    }

    // Codomain interconnection: s ↦ (s, m(s)).
    let m: Vec<usize> = (0..state).map(|_| rng.gen_range(0..fiber)).collect();

    // Domain interconnection fibers: pinned on the image of z = (σ₁, σ₂),
    // arbitrary elsewhere.
    let mut l: [Vec<usize>; 2] = [
        (0..state * state).map(|_| rng.gen_range(0..fiber)).collect(),
        (0..state * state).map(|_| rng.gen_range(0..fiber)).collect(),
    ];
    for s in 0..state {
        let z1 = phi_st[0].table[s];
        let z2 = phi_st[1].table[s];
        for i in 0..2 {
            // Φ_i(s, m(s)) = (σ_i(s), ψ_{i,s}(m(s))); its fiber part.
            let img = phi_tot[i].table[s * fiber + m[s]] % fiber;
            l[i][pair_index(z1, z2, state)] = img;
        }
    }

    DiscreteInstance {
        state,
        fiber,
        w,
        v: [v.remove(0), v.remove(0)],
        phi_tot: [phi_tot.remove(0), phi_tot.remove(0)],
        phi_st: [phi_st.remove(0), phi_st.remove(0)],
        m,
        l,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteTheoremReport {
    pub hypothesis_ok: bool,
    /// Absent when the hypothesis failed.
    pub conclusion_ok: Option<bool>,
    pub details: Vec<String>,
}

/// Exact verdict on an instance of the discrete network theorem.
pub fn discrete_network_theorem(inst: &DiscreteInstance) -> Result<DiscreteTheoremReport> {
    let mut details = Vec::new();
    let mut hypothesis_ok = true;
    for i in 0..2 {
        let fm = FiniteSystemMorphism {
            f_tot: inst.phi_tot[i].clone(),
            f_st: inst.phi_st[i].clone(),
        };
        if !fm.square_commutes(&inst.w, &inst.v[i])? {
            hypothesis_ok = false;
            details.push(format!("component {i}: square does not commute"));
        }
        if !fm.relates(&inst.w, &inst.v[i])? {
            hypothesis_ok = false;
            details.push(format!("component {i}: dynamics not related"));
        }
    }
    if !hypothesis_ok {
        return Ok(DiscreteTheoremReport { hypothesis_ok, conclusion_ok: None, details });
    }
    let s = inst.state;
    let f = inst.fiber;
    // Interconnected dynamics: W(s) = w(s, m(s)).
    let big_w: Vec<usize> = (0..s).map(|x| inst.w.dynamics.table[x * f + inst.m[x]]).collect();
    // V(s1, s2) = (v₁(s1, l₁(s1,s2)), v₂(s2, l₂(s1,s2))).
    let big_v: Vec<(usize, usize)> = (0..s * s)
        .map(|p| {
            let (s1, s2) = (p / s, p % s);
            (
                inst.v[0].dynamics.table[s1 * f + inst.l[0][p]],
                inst.v[1].dynamics.table[s2 * f + inst.l[1][p]],
            )
        })
        .collect();
    // z(s) = (σ₁(s), σ₂(s)); conclusion: z∘W = V∘z, exhaustively.
    let mut conclusion_ok = true;
    for x in 0..s {
        let zx = pair_index(inst.phi_st[0].table[x], inst.phi_st[1].table[x], s);
        let wx = big_w[x];
        let lhs = (inst.phi_st[0].table[wx], inst.phi_st[1].table[wx]);
        let rhs = big_v[zx];
        if lhs != rhs {
            conclusion_ok = false;
            details.push(format!("state {x}: z∘W = {lhs:?} but V∘z = {rhs:?}"));
        }
    }
    Ok(DiscreteTheoremReport { hypothesis_ok, conclusion_ok: Some(conclusion_ok), details })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_two_by_three_singletons() {
        // J = {a, b}, |K_a| = 3, |K_b| = 2, every C a singleton.
        let om = omega(&[vec![1, 1, 1], vec![1, 1]]).unwrap();
        assert_eq!(om.coproduct_size, 6);
        assert_eq!(om.product_size, 6);
        assert!(om.round_trips());
    }

    #[test]
    fn omega_single_index_is_identity_like() {
        let om = omega(&[vec![2, 3]]).unwrap();
        assert_eq!(om.coproduct_size, 5);
        assert_eq!(om.forward, (0..5).collect::<Vec<_>>());
        assert!(om.round_trips());
    }

    #[test]
    fn omega_round_trips_on_random_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let nj = rng.gen_range(1..=3);
            let sizes: Vec<Vec<usize>> = (0..nj)
                .map(|_| {
                    let nk = rng.gen_range(1..=3);
                    (0..nk).map(|_| rng.gen_range(1..=3)).collect()
                })
                .collect();
            let om = omega(&sizes).unwrap();
            assert!(om.round_trips(), "{sizes:?}");
            assert!(om.product_size <= 729);
        }
    }

    #[test]
    fn source_map_inverts_injections() {
        let sizes = [2usize, 3, 1];
        assert_eq!(source_map(&sizes, inject(&sizes, 2, 0)).unwrap(), (2, 0));
        for part in 0..3 {
            for inner in 0..sizes[part] {
                let flat = inject(&sizes, part, inner);
                assert_eq!(source_map(&sizes, flat).unwrap(), (part, inner));
            }
        }
        assert!(source_map(&sizes, 6).is_err());
    }

    #[test]
    fn relation_identity_laws() {
        let r = FiniteRelation::new(3, 2, [(0, 0), (0, 1), (2, 1)].into_iter().collect()).unwrap();
        assert_eq!(relation_compose(&r, &FiniteRelation::diagonal(3)).unwrap(), r);
        assert_eq!(relation_compose(&FiniteRelation::diagonal(2), &r).unwrap(), r);
    }

    #[test]
    fn relation_composition_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let sizes: Vec<usize> = (0..4).map(|_| rng.gen_range(1..=4)).collect();
            let rel = |rng: &mut ChaCha8Rng, a: usize, b: usize| {
                let pairs = (0..a)
                    .flat_map(|x| (0..b).map(move |y| (x, y)))
                    .filter(|_| rng.gen_bool(0.4))
                    .collect();
                FiniteRelation { src: a, tgt: b, pairs }
            };
            let r = rel(&mut rng, sizes[0], sizes[1]);
            let s = rel(&mut rng, sizes[1], sizes[2]);
            let t = rel(&mut rng, sizes[2], sizes[3]);
            let left = relation_compose(&t, &relation_compose(&s, &r).unwrap()).unwrap();
            let right = relation_compose(&relation_compose(&t, &s).unwrap(), &r).unwrap();
            assert_eq!(left, right);
        }
    }

    #[test]
    fn gamma_of_identity_is_diagonal() {
        for n in 1..=3 {
            let g = gamma_relation(&FiniteMap::identity(n));
            assert_eq!(g, FiniteRelation::diagonal(g.src));
        }
    }

    #[test]
    fn gamma_composite_contains_pointwise_composite() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let (a, b, c) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3));
            let f = FiniteMap {
                domain: a,
                codomain: b,
                table: (0..a).map(|_| rng.gen_range(0..b)).collect(),
            };
            let g = FiniteMap {
                domain: b,
                codomain: c,
                table: (0..b).map(|_| rng.gen_range(0..c)).collect(),
            };
            let gf = g.compose(&f).unwrap();
            let composite = relation_compose(&gamma_relation(&g), &gamma_relation(&f)).unwrap();
            assert!(composite.is_subrelation_of(&gamma_relation(&gf)));
        }
    }

    #[test]
    fn strictness_witness_is_found_and_certified() {
        let w = check_lax_strictness().expect("witness");
        let (a, b, c) = w.sizes;
        let f = FiniteMap { domain: a, codomain: b, table: w.f.clone() };
        let g = FiniteMap { domain: b, codomain: c, table: w.g.clone() };
        let gf = g.compose(&f).unwrap();
        let (x, z) = w.related_pair;
        assert!(gamma_relation(&gf).contains(x, z));
        let composite = relation_compose(&gamma_relation(&g), &gamma_relation(&f)).unwrap();
        assert!(!composite.contains(x, z));
    }

    #[test]
    fn discrete_theorem_hundred_instances() {
        for seed in 0..100 {
            let inst = discrete_instance(seed);
            let rep = discrete_network_theorem(&inst).unwrap();
            assert!(rep.hypothesis_ok, "seed {seed}: {:?}", rep.details);
            assert_eq!(rep.conclusion_ok, Some(true), "seed {seed}: {:?}", rep.details);
        }
    }

    #[test]
    fn broken_hypothesis_skips_conclusion() {
        let mut inst = discrete_instance(3);
        // Retarget one dynamics value; the permutation conjugacy breaks.
        let t = &mut inst.v[0].dynamics.table[0];
        *t = (*t + 1) % inst.state;
        let rep = discrete_network_theorem(&inst).unwrap();
        assert!(!rep.hypothesis_ok);
        assert_eq!(rep.conclusion_ok, None);
    }

    #[test]
    fn singleton_instance_is_trivially_related() {
        let proj = FiniteMap::identity(1);
        let sys = FiniteOpenSystem::new(proj.clone(), FiniteMap::identity(1)).unwrap();
        let m = FiniteSystemMorphism { f_tot: FiniteMap::identity(1), f_st: FiniteMap::identity(1) };
        assert!(m.square_commutes(&sys, &sys).unwrap());
        assert!(m.relates(&sys, &sys).unwrap());
    }

    #[test]
    fn finite_set_rejects_duplicates() {
        assert!(FiniteSet::new(vec!["a".into(), "a".into()]).is_err());
        assert_eq!(FiniteSet::of_size(3, "e").len(), 3);
    }
}
