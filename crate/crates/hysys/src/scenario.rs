//! Text scenario format: an indentation-structured description of phase
//! spaces, hybrid systems, maps, and simulation runs, using the expression
//! language from [`crate::expr`].
//!
//! # Format
//!
//! A file is a sequence of top-level sections, each introduced by a keyword
//! and a name at column zero. Members are indented by two spaces, and
//! comments start with `#`.
//!
//! ```text
//! space thermostat
//!   node off
//!     coord -inf inf
//!   node on
//!     coord -inf inf
//!   edge turn_on off -> on
//!     relation x0 = x1
//!   edge turn_off on -> off
//!     relation x0 = x1
//!
//! control thermostat
//!   space thermostat
//!   node off
//!     field -1
//!     event 1 + x0
//!     jump x0 <= -1 -> on : x0
//!   node on
//!     field 1
//!     event 1 - x0
//!     jump x0 >= 1 -> off : x0
//!
//! simulation run
//!   system thermostat
//!   start on 0
//!   horizon 12
//! ```
//!
//! * `coord LO HI` declares one interval; `LO`/`HI` are numbers or
//!   `-inf`/`inf`, each optionally prefixed with `open` for an open endpoint
//!   (`coord open 0 inf` is `(0, ∞)`).
//! * `relation` expressions see the source coordinates as `x0…` followed by
//!   the target coordinates; membership is checked with the tolerance-margin
//!   semantics of [`Expr::eval_bool`].
//! * an optional `generator SRC_EXPRS -> TGT_EXPRS` line under an edge makes
//!   the relation sampleable: the expressions are evaluated on
//!   low-discrepancy draws `x0…` from `[0, 1)`.
//! * `morphism` / `submersion` sections list `node SRC -> TGT : EXPRS`
//!   lines; edge maps are inferred from the relations.
//! * `theorem` sections name a built-in interconnection instance
//!   (`builtin networked-thermostats` with `coupling`, or
//!   `builtin random-affine` with `seed`).

use std::fmt::Write as _;
use std::sync::Arc;

use crate::catalog;
use crate::error::{Error, Result};
use crate::expr::{parse_expr_at, Diagnostic, Expr};
use crate::morphisms::{HybridSSub, PhaseSpaceMorphism, SmoothMap};
use crate::networks::{self, Network, NetworkMorphism};
use crate::numerics;
use crate::phase_space::{
    BoxSpace, HybridPhaseSpace, Interval, JumpRelation, TaggedPoint,
};
use crate::systems::DeterministicControl;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndpointDecl {
    pub value: f64,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordDecl {
    pub lo: EndpointDecl,
    pub hi: EndpointDecl,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeDecl {
    pub name: String,
    pub coords: Vec<CoordDecl>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDecl {
    pub name: String,
    pub src: String,
    pub tgt: String,
    pub relation: Expr,
    /// `(source exprs, target exprs)` over uniform draws `x0…`.
    pub generator: Option<(Vec<Expr>, Vec<Expr>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceDecl {
    pub name: String,
    pub nodes: Vec<NodeDecl>,
    pub edges: Vec<EdgeDecl>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpDecl {
    pub cond: Expr,
    pub target: String,
    pub coords: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlNodeDecl {
    pub node: String,
    pub field: Vec<Expr>,
    pub events: Vec<Expr>,
    pub jumps: Vec<JumpDecl>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlDecl {
    pub name: String,
    pub space: String,
    pub nodes: Vec<ControlNodeDecl>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapNodeDecl {
    pub src: String,
    pub tgt: String,
    pub exprs: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapDecl {
    pub name: String,
    pub from: String,
    pub to: String,
    pub nodes: Vec<MapNodeDecl>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TheoremBuiltin {
    NetworkedThermostats { coupling: f64 },
    RandomAffine { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremDecl {
    pub name: String,
    pub builtin: TheoremBuiltin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationDecl {
    pub name: String,
    pub system: String,
    pub start_node: String,
    pub start: Vec<f64>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub max_jumps: Option<usize>,
    pub min_dwell: Option<f64>,
}

/// A parsed scenario file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scenario {
    pub spaces: Vec<SpaceDecl>,
    pub controls: Vec<ControlDecl>,
    pub morphisms: Vec<MapDecl>,
    pub submersions: Vec<MapDecl>,
    pub theorems: Vec<TheoremDecl>,
    pub simulations: Vec<SimulationDecl>,
}

// ---------------------------------------------------------------------------
// Parsing

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let content = match l.find('#') {
                    Some(h) => &l[..h],
                    None => l,
                };
                (i + 1, content.trim_end())
            })
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        Lines { lines, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<(usize, &'a str)> {
        let l = self.peek();
        self.pos += 1;
        l
    }
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

fn diag(line: usize, col: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic { line, col, message: message.into() }
}

type SResult<T> = std::result::Result<T, Diagnostic>;

fn parse_endpoint(tok: &str, open: bool, line: usize) -> SResult<EndpointDecl> {
    let value = match tok {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => tok
            .parse::<f64>()
            .map_err(|_| diag(line, 1, format!("malformed endpoint `{tok}`")))?,
    };
    // Infinite endpoints are always open.
    Ok(EndpointDecl { value, closed: !open && value.is_finite() })
}

fn parse_coord(rest: &str, line: usize) -> SResult<CoordDecl> {
    let toks: Vec<&str> = rest.split_whitespace().collect();
    let mut i = 0;
    let mut next = |line: usize| -> SResult<(bool, String)> {
        let mut open = false;
        if toks.get(i) == Some(&"open") {
            open = true;
            i += 1;
        }
        let t = toks
            .get(i)
            .ok_or_else(|| diag(line, 1, "coord needs `LO HI` endpoints"))?;
        i += 1;
        Ok((open, t.to_string()))
    };
    let (lo_open, lo_tok) = next(line)?;
    let (hi_open, hi_tok) = next(line)?;
    Ok(CoordDecl {
        lo: parse_endpoint(&lo_tok, lo_open, line)?,
        hi: parse_endpoint(&hi_tok, hi_open, line)?,
    })
}

fn parse_expr_list(text: &str, line: usize) -> SResult<Vec<Expr>> {
    split_top_level(text)
        .into_iter()
        .map(|part| parse_expr_at(part.trim(), line))
        .collect()
}

/// Split on commas that are not nested inside parentheses.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn split_arrow(text: &str, line: usize) -> SResult<(&str, &str)> {
    match text.find("->") {
        Some(i) => Ok((text[..i].trim(), text[i + 2..].trim())),
        None => Err(diag(line, 1, "expected `->`")),
    }
}

fn parse_space(head: &str, lno: usize, lines: &mut Lines) -> SResult<SpaceDecl> {
    let name = head.trim();
    if name.is_empty() {
        return Err(diag(lno, 1, "space needs a name"));
    }
    let mut decl = SpaceDecl { name: name.to_string(), nodes: Vec::new(), edges: Vec::new() };
    while let Some((ln, line)) = lines.peek() {
        if indent_of(line) < 2 {
            break;
        }
        lines.bump();
        let body = line.trim_start();
        if let Some(rest) = body.strip_prefix("node ") {
            let mut node = NodeDecl { name: rest.trim().to_string(), coords: Vec::new() };
            while let Some((cn, cl)) = lines.peek() {
                if indent_of(cl) < 4 {
                    break;
                }
                lines.bump();
                let cb = cl.trim_start();
                match cb.strip_prefix("coord") {
                    Some(rest) => node.coords.push(parse_coord(rest, cn)?),
                    None => return Err(diag(cn, 1, format!("unexpected line `{cb}` in node"))),
                }
            }
            decl.nodes.push(node);
        } else if let Some(rest) = body.strip_prefix("edge ") {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 4 || toks[2] != "->" {
                return Err(diag(ln, 1, "edge syntax is `edge NAME SRC -> TGT`"));
            }
            let mut relation = None;
            let mut generator = None;
            while let Some((cn, cl)) = lines.peek() {
                if indent_of(cl) < 4 {
                    break;
                }
                lines.bump();
                let cb = cl.trim_start();
                if let Some(rest) = cb.strip_prefix("relation ") {
                    relation = Some(parse_expr_at(rest.trim(), cn)?);
                } else if let Some(rest) = cb.strip_prefix("generator ") {
                    let (src, tgt) = split_arrow(rest, cn)?;
                    generator = Some((parse_expr_list(src, cn)?, parse_expr_list(tgt, cn)?));
                } else {
                    return Err(diag(cn, 1, format!("unexpected line `{cb}` in edge")));
                }
            }
            let relation =
                relation.ok_or_else(|| diag(ln, 1, "edge needs a `relation` line"))?;
            decl.edges.push(EdgeDecl {
                name: toks[0].to_string(),
                src: toks[1].to_string(),
                tgt: toks[3].to_string(),
                relation,
                generator,
            });
        } else {
            return Err(diag(ln, 1, format!("unexpected line `{body}` in space")));
        }
    }
    Ok(decl)
}

fn parse_control(head: &str, lno: usize, lines: &mut Lines) -> SResult<ControlDecl> {
    let name = head.trim();
    if name.is_empty() {
        return Err(diag(lno, 1, "control needs a name"));
    }
    let mut space = None;
    let mut nodes = Vec::new();
    while let Some((ln, line)) = lines.peek() {
        if indent_of(line) < 2 {
            break;
        }
        lines.bump();
        let body = line.trim_start();
        if let Some(rest) = body.strip_prefix("space ") {
            space = Some(rest.trim().to_string());
        } else if let Some(rest) = body.strip_prefix("node ") {
            let mut node = ControlNodeDecl {
                node: rest.trim().to_string(),
                field: Vec::new(),
                events: Vec::new(),
                jumps: Vec::new(),
            };
            while let Some((cn, cl)) = lines.peek() {
                if indent_of(cl) < 4 {
                    break;
                }
                lines.bump();
                let cb = cl.trim_start();
                if let Some(rest) = cb.strip_prefix("field ") {
                    node.field = parse_expr_list(rest, cn)?;
                } else if let Some(rest) = cb.strip_prefix("event ") {
                    node.events.push(parse_expr_at(rest.trim(), cn)?);
                } else if let Some(rest) = cb.strip_prefix("jump ") {
                    let (cond, rest) = split_arrow(rest, cn)?;
                    let (target, exprs) = rest
                        .split_once(':')
                        .ok_or_else(|| diag(cn, 1, "jump syntax is `jump COND -> NODE : EXPRS`"))?;
                    node.jumps.push(JumpDecl {
                        cond: parse_expr_at(cond, cn)?,
                        target: target.trim().to_string(),
                        coords: parse_expr_list(exprs, cn)?,
                    });
                } else {
                    return Err(diag(cn, 1, format!("unexpected line `{cb}` in control node")));
                }
            }
            nodes.push(node);
        } else {
            return Err(diag(ln, 1, format!("unexpected line `{body}` in control")));
        }
    }
    let space = space.ok_or_else(|| diag(lno, 1, "control needs a `space` line"))?;
    Ok(ControlDecl { name: name.to_string(), space, nodes })
}

fn parse_map(head: &str, lno: usize, lines: &mut Lines, kind: &str) -> SResult<MapDecl> {
    let name = head.trim();
    if name.is_empty() {
        return Err(diag(lno, 1, format!("{kind} needs a name")));
    }
    let mut from_to = None;
    let mut nodes = Vec::new();
    while let Some((ln, line)) = lines.peek() {
        if indent_of(line) < 2 {
            break;
        }
        lines.bump();
        let body = line.trim_start();
        if let Some(rest) = body.strip_prefix("from ") {
            let (a, b) = rest
                .split_once(" to ")
                .ok_or_else(|| diag(ln, 1, "syntax is `from SPACE to SPACE`"))?;
            from_to = Some((a.trim().to_string(), b.trim().to_string()));
        } else if let Some(rest) = body.strip_prefix("node ") {
            let (pair, exprs) = rest
                .split_once(':')
                .ok_or_else(|| diag(ln, 1, "node map syntax is `node SRC -> TGT : EXPRS`"))?;
            let (src, tgt) = split_arrow(pair, ln)?;
            nodes.push(MapNodeDecl {
                src: src.to_string(),
                tgt: tgt.to_string(),
                exprs: parse_expr_list(exprs, ln)?,
            });
        } else {
            return Err(diag(ln, 1, format!("unexpected line `{body}` in {kind}")));
        }
    }
    let (from, to) =
        from_to.ok_or_else(|| diag(lno, 1, format!("{kind} needs a `from … to …` line")))?;
    Ok(MapDecl { name: name.to_string(), from, to, nodes })
}

fn parse_theorem(head: &str, lno: usize, lines: &mut Lines) -> SResult<TheoremDecl> {
    let name = head.trim();
    let mut builtin = None;
    let mut coupling = 0.3;
    let mut seed = 1u64;
    while let Some((ln, line)) = lines.peek() {
        if indent_of(line) < 2 {
            break;
        }
        lines.bump();
        let body = line.trim_start();
        if let Some(rest) = body.strip_prefix("builtin ") {
            builtin = Some(rest.trim().to_string());
        } else if let Some(rest) = body.strip_prefix("coupling ") {
            coupling = rest
                .trim()
                .parse()
                .map_err(|_| diag(ln, 1, "malformed coupling value"))?;
        } else if let Some(rest) = body.strip_prefix("seed ") {
            seed = rest.trim().parse().map_err(|_| diag(ln, 1, "malformed seed"))?;
        } else {
            return Err(diag(ln, 1, format!("unexpected line `{body}` in theorem")));
        }
    }
    let builtin = match builtin.as_deref() {
        Some("networked-thermostats") => TheoremBuiltin::NetworkedThermostats { coupling },
        Some("random-affine") => TheoremBuiltin::RandomAffine { seed },
        Some(other) => return Err(diag(lno, 1, format!("unknown builtin `{other}`"))),
        None => return Err(diag(lno, 1, "theorem needs a `builtin` line")),
    };
    Ok(TheoremDecl { name: name.to_string(), builtin })
}

fn parse_simulation(head: &str, lno: usize, lines: &mut Lines) -> SResult<SimulationDecl> {
    let name = head.trim();
    let mut system = None;
    let mut start = None;
    let mut decl = SimulationDecl {
        name: name.to_string(),
        system: String::new(),
        start_node: String::new(),
        start: Vec::new(),
        horizon: None,
        step: None,
        max_jumps: None,
        min_dwell: None,
    };
    while let Some((ln, line)) = lines.peek() {
        if indent_of(line) < 2 {
            break;
        }
        lines.bump();
        let body = line.trim_start();
        let num = |rest: &str| -> SResult<f64> {
            rest.trim().parse().map_err(|_| diag(ln, 1, "malformed number"))
        };
        if let Some(rest) = body.strip_prefix("system ") {
            system = Some(rest.trim().to_string());
        } else if let Some(rest) = body.strip_prefix("start ") {
            let mut toks = rest.split_whitespace();
            let node = toks
                .next()
                .ok_or_else(|| diag(ln, 1, "start syntax is `start NODE COORDS…`"))?;
            let coords: SResult<Vec<f64>> = toks
                .map(|t| t.parse().map_err(|_| diag(ln, 1, format!("malformed coordinate `{t}`"))))
                .collect();
            start = Some((node.to_string(), coords?));
        } else if let Some(rest) = body.strip_prefix("horizon ") {
            decl.horizon = Some(num(rest)?);
        } else if let Some(rest) = body.strip_prefix("step ") {
            decl.step = Some(num(rest)?);
        } else if let Some(rest) = body.strip_prefix("max-jumps ") {
            decl.max_jumps =
                Some(rest.trim().parse().map_err(|_| diag(ln, 1, "malformed max-jumps"))?);
        } else if let Some(rest) = body.strip_prefix("min-dwell ") {
            decl.min_dwell = Some(num(rest)?);
        } else {
            return Err(diag(ln, 1, format!("unexpected line `{body}` in simulation")));
        }
    }
    decl.system = system.ok_or_else(|| diag(lno, 1, "simulation needs a `system` line"))?;
    let (node, coords) =
        start.ok_or_else(|| diag(lno, 1, "simulation needs a `start` line"))?;
    decl.start_node = node;
    decl.start = coords;
    Ok(decl)
}

/// Parse a scenario file, reporting all positioned diagnostics found.
pub fn parse_scenario(text: &str) -> std::result::Result<Scenario, Vec<Diagnostic>> {
    let mut lines = Lines::new(text);
    let mut sc = Scenario::default();
    let mut errs = Vec::new();
    while let Some((ln, line)) = lines.bump() {
        if indent_of(line) != 0 {
            errs.push(diag(ln, 1, "expected a top-level section at column 1"));
            continue;
        }
        let (kw, rest) = match line.split_once(' ') {
            Some(p) => p,
            None => (line, ""),
        };
        let res: SResult<()> = match kw {
            "space" => parse_space(rest, ln, &mut lines).map(|d| sc.spaces.push(d)),
            "control" => parse_control(rest, ln, &mut lines).map(|d| sc.controls.push(d)),
            "morphism" => {
                parse_map(rest, ln, &mut lines, "morphism").map(|d| sc.morphisms.push(d))
            }
            "submersion" => {
                parse_map(rest, ln, &mut lines, "submersion").map(|d| sc.submersions.push(d))
            }
            "theorem" => parse_theorem(rest, ln, &mut lines).map(|d| sc.theorems.push(d)),
            "simulation" => {
                parse_simulation(rest, ln, &mut lines).map(|d| sc.simulations.push(d))
            }
            _ => Err(diag(ln, 1, format!("unknown section keyword `{kw}`"))),
        };
        if let Err(e) = res {
            errs.push(e);
            // Skip the rest of the malformed section.
            while let Some((_, l)) = lines.peek() {
                if indent_of(l) == 0 {
                    break;
                }
                lines.bump();
            }
        }
    }
    if errs.is_empty() {
        Ok(sc)
    } else {
        Err(errs)
    }
}

// ---------------------------------------------------------------------------
// Serialization

fn endpoint_text(e: &EndpointDecl, lo: bool) -> String {
    let v = if e.value == f64::INFINITY {
        "inf".to_string()
    } else if e.value == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{}", e.value)
    };
    let _ = lo;
    if e.closed || !e.value.is_finite() {
        v
    } else {
        format!("open {v}")
    }
}

fn expr_list_text(exprs: &[Expr]) -> String {
    exprs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

/// Serialize to canonical scenario text; re-parsing yields an equal value.
pub fn to_text(sc: &Scenario) -> String {
    let mut s = String::new();
    for sp in &sc.spaces {
        let _ = writeln!(s, "space {}", sp.name);
        for n in &sp.nodes {
            let _ = writeln!(s, "  node {}", n.name);
            for c in &n.coords {
                let _ = writeln!(
                    s,
                    "    coord {} {}",
                    endpoint_text(&c.lo, true),
                    endpoint_text(&c.hi, false)
                );
            }
        }
        for e in &sp.edges {
            let _ = writeln!(s, "  edge {} {} -> {}", e.name, e.src, e.tgt);
            let _ = writeln!(s, "    relation {}", e.relation);
            if let Some((src, tgt)) = &e.generator {
                let _ = writeln!(
                    s,
                    "    generator {} -> {}",
                    expr_list_text(src),
                    expr_list_text(tgt)
                );
            }
        }
        s.push('\n');
    }
    for c in &sc.controls {
        let _ = writeln!(s, "control {}", c.name);
        let _ = writeln!(s, "  space {}", c.space);
        for n in &c.nodes {
            let _ = writeln!(s, "  node {}", n.node);
            let _ = writeln!(s, "    field {}", expr_list_text(&n.field));
            for e in &n.events {
                let _ = writeln!(s, "    event {e}");
            }
            for j in &n.jumps {
                let _ = writeln!(
                    s,
                    "    jump {} -> {} : {}",
                    j.cond,
                    j.target,
                    expr_list_text(&j.coords)
                );
            }
        }
        s.push('\n');
    }
    for (kind, maps) in [("morphism", &sc.morphisms), ("submersion", &sc.submersions)] {
        for m in maps {
            let _ = writeln!(s, "{kind} {}", m.name);
            let _ = writeln!(s, "  from {} to {}", m.from, m.to);
            for n in &m.nodes {
                let _ = writeln!(s, "  node {} -> {} : {}", n.src, n.tgt, expr_list_text(&n.exprs));
            }
            s.push('\n');
        }
    }
    for t in &sc.theorems {
        let _ = writeln!(s, "theorem {}", t.name);
        match &t.builtin {
            TheoremBuiltin::NetworkedThermostats { coupling } => {
                let _ = writeln!(s, "  builtin networked-thermostats");
                let _ = writeln!(s, "  coupling {coupling}");
            }
            TheoremBuiltin::RandomAffine { seed } => {
                let _ = writeln!(s, "  builtin random-affine");
                let _ = writeln!(s, "  seed {seed}");
            }
        }
        s.push('\n');
    }
    for sim in &sc.simulations {
        let _ = writeln!(s, "simulation {}", sim.name);
        let _ = writeln!(s, "  system {}", sim.system);
        let coords: Vec<String> = sim.start.iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(s, "  start {} {}", sim.start_node, coords.join(" ")).map(|_| ());
        if let Some(h) = sim.horizon {
            let _ = writeln!(s, "  horizon {h}");
        }
        if let Some(h) = sim.step {
            let _ = writeln!(s, "  step {h}");
        }
        if let Some(h) = sim.max_jumps {
            let _ = writeln!(s, "  max-jumps {h}");
        }
        if let Some(h) = sim.min_dwell {
            let _ = writeln!(s, "  min-dwell {h}");
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Building runtime objects

const GEN_PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn max_var(e: &Expr) -> usize {
    match e {
        Expr::Var(i) => i + 1,
        Expr::Num(_) => 0,
        Expr::Neg(a) | Expr::Not(a) => max_var(a),
        Expr::Add(a, b)
        | Expr::Sub(a, b)
        | Expr::Mul(a, b)
        | Expr::Div(a, b)
        | Expr::Cmp(_, a, b)
        | Expr::And(a, b)
        | Expr::Or(a, b) => max_var(a).max(max_var(b)),
        Expr::Call(_, args) => args.iter().map(max_var).max().unwrap_or(0),
        Expr::Piecewise(c, t, e) => max_var(c).max(max_var(t)).max(max_var(e)),
    }
}

impl Scenario {
    fn find<'a, T>(items: &'a [T], name: &str, get: impl Fn(&T) -> &str, kind: &str) -> Result<&'a T> {
        items
            .iter()
            .find(|i| get(i) == name)
            .ok_or_else(|| Error::Invalid(format!("no {kind} named `{name}`")))
    }

    pub fn build_space(&self, name: &str) -> Result<Arc<HybridPhaseSpace>> {
        let decl = Self::find(&self.spaces, name, |s| &s.name, "space")?;
        let mut space = HybridPhaseSpace::new(decl.name.clone());
        for n in &decl.nodes {
            let intervals = n
                .coords
                .iter()
                .map(|c| Interval {
                    lo: c.lo.value,
                    hi: c.hi.value,
                    lo_closed: c.lo.closed,
                    hi_closed: c.hi.closed,
                })
                .collect();
            space.add_node(n.name.clone(), BoxSpace::new(intervals));
        }
        for e in &decl.edges {
            let src = space
                .node_id(&e.src)
                .ok_or_else(|| Error::Invalid(format!("edge `{}` uses unknown node `{}`", e.name, e.src)))?;
            let tgt = space
                .node_id(&e.tgt)
                .ok_or_else(|| Error::Invalid(format!("edge `{}` uses unknown node `{}`", e.name, e.tgt)))?;
            let ds = space.space(src).dim();
            let dt = space.space(tgt).dim();
            e.relation.ty(ds + dt)?;
            let rel_expr = e.relation.clone();
            let mut rel = JumpRelation::predicate(Arc::new(move |x: &[f64], y: &[f64], tol| {
                let mut vars = Vec::with_capacity(x.len() + y.len());
                vars.extend_from_slice(x);
                vars.extend_from_slice(y);
                rel_expr.eval_bool(&vars, tol)
            }));
            if let Some((src_exprs, tgt_exprs)) = &e.generator {
                if src_exprs.len() != ds || tgt_exprs.len() != dt {
                    return Err(Error::Invalid(format!(
                        "generator on edge `{}` has the wrong arity",
                        e.name
                    )));
                }
                let nvars = src_exprs
                    .iter()
                    .chain(tgt_exprs)
                    .map(max_var)
                    .max()
                    .unwrap_or(0)
                    .max(1);
                let (se, te) = (src_exprs.clone(), tgt_exprs.clone());
                rel = rel.with_sampler(Arc::new(move |seed: u64, count: usize| {
                    let mut out = Vec::with_capacity(count);
                    for i in 0..count {
                        let idx = seed % 8191 + 1 + i as u64;
                        let draws: Vec<f64> = (0..nvars)
                            .map(|j| numerics::halton(idx, GEN_PRIMES[j % GEN_PRIMES.len()]))
                            .collect();
                        let sp: Vec<f64> = se.iter().map(|ex| ex.eval(&draws)).collect();
                        let tp: Vec<f64> = te.iter().map(|ex| ex.eval(&draws)).collect();
                        out.push((sp, tp));
                    }
                    out
                }));
            }
            space.add_edge(e.name.clone(), src, tgt, rel);
        }
        let problems = space.validate();
        if !problems.is_empty() {
            return Err(Error::Invalid(format!(
                "space `{}` is malformed: {}",
                decl.name,
                problems.join("; ")
            )));
        }
        Ok(Arc::new(space))
    }

    /// Build a closed deterministic system from a `control` section.
    pub fn build_control(&self, name: &str) -> Result<DeterministicControl> {
        let decl = Self::find(&self.controls, name, |c| &c.name, "control")?;
        let space = self.build_space(&decl.space)?;
        let nnodes = space.nodes.len();
        let mut fields: Vec<Vec<Expr>> = vec![Vec::new(); nnodes];
        let mut events: Vec<Vec<Expr>> = vec![Vec::new(); nnodes];
        let mut jumps: Vec<Vec<(Expr, usize, Vec<Expr>)>> = vec![Vec::new(); nnodes];
        for n in &decl.nodes {
            let id = space
                .node_id(&n.node)
                .ok_or_else(|| Error::Invalid(format!("control names unknown node `{}`", n.node)))?;
            let dim = space.space(id).dim();
            if n.field.len() != dim {
                return Err(Error::Invalid(format!(
                    "field on node `{}` needs {dim} component(s)",
                    n.node
                )));
            }
            for e in n.field.iter().chain(&n.events) {
                e.ty(dim)?;
            }
            fields[id] = n.field.clone();
            events[id] = n.events.clone();
            for j in &n.jumps {
                let tid = space
                    .node_id(&j.target)
                    .ok_or_else(|| Error::Invalid(format!("jump targets unknown node `{}`", j.target)))?;
                j.cond.ty(dim)?;
                if j.coords.len() != space.space(tid).dim() {
                    return Err(Error::Invalid(format!(
                        "jump to `{}` has the wrong coordinate count",
                        j.target
                    )));
                }
                for c in &j.coords {
                    c.ty(dim)?;
                }
                jumps[id].push((j.cond.clone(), tid, j.coords.clone()));
            }
        }
        for (id, f) in fields.iter().enumerate() {
            if space.space(id).dim() > 0 && f.is_empty() {
                return Err(Error::Invalid(format!(
                    "control gives no field for node `{}`",
                    space.nodes[id].label
                )));
            }
        }
        let f = fields.clone();
        let field = Arc::new(move |p: &TaggedPoint| -> Vec<f64> {
            f[p.node].iter().map(|e| e.eval(&p.coords)).collect()
        });
        let j = jumps;
        let jump = Arc::new(move |p: &TaggedPoint| -> TaggedPoint {
            for (cond, tid, coords) in &j[p.node] {
                if cond.eval_bool(&p.coords, 0.0) {
                    return TaggedPoint::new(*tid, coords.iter().map(|e| e.eval(&p.coords)).collect());
                }
            }
            p.clone()
        });
        let event_fns = events
            .into_iter()
            .map(|per_node| {
                per_node
                    .into_iter()
                    .map(|e| {
                        let e = e.clone();
                        Arc::new(move |x: &[f64]| e.eval(x)) as crate::systems::EventFn
                    })
                    .collect()
            })
            .collect();
        Ok(DeterministicControl {
            ssub: HybridSSub::closed(space),
            field,
            jump: jump as crate::systems::JumpFn,
            events: event_fns,
        })
    }

    fn build_map(&self, decl: &MapDecl) -> Result<PhaseSpaceMorphism> {
        let dom = self.build_space(&decl.from)?;
        let cod = self.build_space(&decl.to)?;
        let mut node_map = vec![usize::MAX; dom.nodes.len()];
        let mut maps: Vec<Option<SmoothMap>> = vec![None; dom.nodes.len()];
        for n in &decl.nodes {
            let s = dom
                .node_id(&n.src)
                .ok_or_else(|| Error::Invalid(format!("unknown domain node `{}`", n.src)))?;
            let t = cod
                .node_id(&n.tgt)
                .ok_or_else(|| Error::Invalid(format!("unknown codomain node `{}`", n.tgt)))?;
            let in_dim = dom.space(s).dim();
            let out_dim = cod.space(t).dim();
            if n.exprs.len() != out_dim {
                return Err(Error::Invalid(format!(
                    "map on node `{}` needs {out_dim} component(s)",
                    n.src
                )));
            }
            for e in &n.exprs {
                e.ty(in_dim)?;
            }
            let exprs = n.exprs.clone();
            node_map[s] = t;
            maps[s] = Some(SmoothMap::new(
                in_dim,
                out_dim,
                Arc::new(move |x: &[f64]| exprs.iter().map(|e| e.eval(x)).collect()),
            ));
        }
        if node_map.contains(&usize::MAX) {
            return Err(Error::Invalid(format!(
                "map `{}` misses some domain nodes",
                decl.name
            )));
        }
        PhaseSpaceMorphism::new(dom, cod, node_map, maps.into_iter().map(|m| m.unwrap()).collect())
    }

    pub fn build_morphism(&self, name: &str) -> Result<PhaseSpaceMorphism> {
        let decl = Self::find(&self.morphisms, name, |m| &m.name, "morphism")?;
        self.build_map(decl)
    }

    pub fn build_submersion(&self, name: &str) -> Result<HybridSSub> {
        let decl = Self::find(&self.submersions, name, |m| &m.name, "submersion")?;
        Ok(HybridSSub::new(self.build_map(decl)?))
    }

    /// Resolve a `theorem` section into a network morphism together with the
    /// outer and component controls.
    pub fn build_theorem(
        &self,
        name: &str,
    ) -> Result<(
        Network,
        NetworkMorphism,
        Vec<DeterministicControl>,
        Vec<DeterministicControl>,
    )> {
        let decl = Self::find(&self.theorems, name, |t| &t.name, "theorem")?;
        match &decl.builtin {
            TheoremBuiltin::NetworkedThermostats { coupling } => {
                let nt = catalog::networked_thermostats(*coupling);
                Ok((nt.nm.codomain.clone(), nt.nm, nt.w, nt.v))
            }
            TheoremBuiltin::RandomAffine { seed } => {
                let inst = networks::random_affine_instance(*seed)?;
                Ok((inst.nm.codomain.clone(), inst.nm, inst.w, inst.v))
            }
        }
    }

    pub fn build_simulation(
        &self,
        name: &str,
    ) -> Result<(DeterministicControl, TaggedPoint, crate::execution::IntegratorOptions)> {
        let decl = Self::find(&self.simulations, name, |s| &s.name, "simulation")?;
        let control = self.build_control(&decl.system)?;
        let node = control
            .ssub
            .total
            .node_id(&decl.start_node)
            .ok_or_else(|| Error::Invalid(format!("unknown start node `{}`", decl.start_node)))?;
        let x0 = TaggedPoint::new(node, decl.start.clone());
        if !control.ssub.total.contains(&x0)? {
            return Err(Error::Invalid(format!(
                "start point lies outside node `{}`",
                decl.start_node
            )));
        }
        let mut opts = crate::execution::IntegratorOptions::default();
        if let Some(h) = decl.horizon {
            opts.horizon = h;
        }
        if let Some(h) = decl.step {
            opts.step = h;
        }
        if let Some(h) = decl.max_jumps {
            opts.max_jumps = h;
        }
        if let Some(h) = decl.min_dwell {
            opts.min_dwell = h;
        }
        Ok((control, x0, opts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::{execute, verify_execution};
    use crate::systems::check_control;

    const THERMOSTAT: &str = "\
# A two-mode heater with threshold switching.
space thermostat
  node off
    coord -inf inf
  node on
    coord -inf inf
  edge turn_on off -> on
    relation x0 <= -1 and x0 = x1
    generator -1 - x0 -> -1 - x0
  edge turn_off on -> off
    relation x0 >= 1 and x0 = x1
    generator 1 + x0 -> 1 + x0

control thermostat
  space thermostat
  node off
    field -1
    event 1 + x0
    jump x0 <= -1 -> on : x0
  node on
    field 1
    event 1 - x0
    jump x0 >= 1 -> off : x0

simulation run
  system thermostat
  start on 0
  horizon 12
";

    #[test]
    fn parses_and_simulates_thermostat() {
        let sc = parse_scenario(THERMOSTAT).unwrap();
        let (control, x0, opts) = sc.build_simulation("run").unwrap();
        assert!(check_control(&control, 40, 3, 1e-9).pass);
        let exec = execute(&control, &x0, &opts).unwrap();
        assert!(exec.jump_times().len() >= 5);
        assert!(verify_execution(&exec, &control, 1e-6).pass);
    }

    #[test]
    fn round_trip_is_stable() {
        let sc = parse_scenario(THERMOSTAT).unwrap();
        let printed = to_text(&sc);
        let again = parse_scenario(&printed).unwrap();
        assert_eq!(sc, again);
        // And serialization is a fixed point from there on.
        assert_eq!(printed, to_text(&again));
    }

    #[test]
    fn diagnostics_carry_positions() {
        let bad = "space s\n  node a\n    coord -inf inf\n  edge e a -> a\n    relation frobnicate(x0)\n";
        let errs = parse_scenario(bad).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 5);
        assert!(errs[0].message.contains("frobnicate"));
    }

    #[test]
    fn multiple_errors_are_collected() {
        let bad = "widget w\n  x 1\n\nspace ok\n  node a\n    coord 0 1\n\nfrob z\n";
        let errs = parse_scenario(bad).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].line, 1);
        assert_eq!(errs[1].line, 8);
    }

    #[test]
    fn morphism_section_builds_and_checks() {
        let text = format!(
            "{THERMOSTAT}\nmorphism flip\n  from thermostat to thermostat\n  node off -> on : -x0\n  node on -> off : -x0\n"
        );
        let sc = parse_scenario(&text).unwrap();
        let m = sc.build_morphism("flip").unwrap();
        let report = crate::morphisms::check_morphism(&m, 25, 11, 1e-9);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn open_and_unbounded_coords_round_trip() {
        let text = "space s\n  node a\n    coord open 0 inf\n    coord -2.5 open 2.5\n";
        let sc = parse_scenario(text).unwrap();
        let c = &sc.spaces[0].nodes[0].coords;
        assert!(!c[0].lo.closed && c[0].lo.value == 0.0);
        assert!(c[0].hi.value.is_infinite());
        assert!(c[1].lo.closed && !c[1].hi.closed);
        assert_eq!(parse_scenario(&to_text(&sc)).unwrap(), sc);
    }

    #[test]
    fn theorem_builtin_resolves() {
        let text = "theorem net\n  builtin networked-thermostats\n  coupling 0.3\n";
        let sc = parse_scenario(text).unwrap();
        let (_, nm, w, v) = sc.build_theorem("net").unwrap();
        assert_eq!(v.len(), 2);
        let report = networks::verify_main_theorem(&nm, &w, &v, 60, 5, 1e-8).unwrap();
        assert!(report.pass);
    }
}
