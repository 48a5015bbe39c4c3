//! Weighted graphs, metric balls, Vitali covers and geodesic rays.
//!
//! Infinite graphs are represented by finite truncations together with the
//! set of frontier vertices whose neighbourhood differs from the infinite
//! graph. Anything that walks the graph must stay off that frontier.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{log_log_fit, LinearFit};

pub type VertexId = u32;

/// Distance reported between vertices in different components.
pub const UNREACHABLE: u32 = u32::MAX;

/// Largest gasket level built by [`build_sierpinski_gasket`]; level 13 has
/// about 2.4 million vertices.
pub const GASKET_LEVEL_CAP: u32 = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    Gasket,
    Line,
    Custom,
}

impl GraphFamily {
    pub fn tag(self) -> &'static str {
        match self {
            GraphFamily::Gasket => "gasket",
            GraphFamily::Line => "line",
            GraphFamily::Custom => "custom",
        }
    }

    /// Known volume-growth and walk dimensions of the infinite graph.
    pub fn nominal_dimensions(self) -> Option<Dimensions> {
        match self {
            GraphFamily::Gasket => Some(Dimensions {
                d_f: 3f64.ln() / 2f64.ln(),
                d_w: 5f64.ln() / 2f64.ln(),
            }),
            GraphFamily::Line => Some(Dimensions { d_f: 1.0, d_w: 2.0 }),
            GraphFamily::Custom => None,
        }
    }
}

impl std::str::FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gasket" => Ok(GraphFamily::Gasket),
            "line" => Ok(GraphFamily::Line),
            "custom" => Ok(GraphFamily::Custom),
            other => Err(Error::Domain(format!("unknown graph family `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub d_f: f64,
    pub d_w: f64,
}

impl Dimensions {
    pub fn d_s(&self) -> f64 {
        2.0 * self.d_f / self.d_w
    }

    /// Exponent `4 / (2 - d_s)` of the free-energy gap.
    pub fn gap_exponent(&self) -> f64 {
        4.0 / (2.0 - self.d_s())
    }

    /// Block radius `floor(n^{1/d_w})`, at least 1.
    pub fn block_radius(&self, n: usize) -> u32 {
        // the epsilon keeps exact powers such as 125^{log2/log5} = 8 from rounding down
        let r = (n as f64).powf(1.0 / self.d_w) + 1e-9;
        (r.floor() as u32).max(1)
    }
}

/// Finite truncation of a weighted graph, stored in compressed rows.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    family: GraphFamily,
    level: u32,
    origin: VertexId,
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    weights: Vec<f64>,
    // p(x -> targets[e]) for e in the row of x
    trans: Vec<f64>,
    // p(targets[e] -> x) and its log, for e in the row of x
    rev: Vec<f64>,
    log_rev: Vec<f64>,
    vertex_weight: Vec<f64>,
    coords: Option<Vec<[i64; 2]>>,
    coord_index: HashMap<[i64; 2], VertexId>,
    boundary: Vec<VertexId>,
    is_boundary: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphReport {
    pub vertices: usize,
    pub edges: usize,
    /// Smallest `C` with `1/C <= mu_xy <= C` on every edge.
    pub c_mu: f64,
    pub max_degree: usize,
    pub symmetric: bool,
    pub connected: bool,
    pub simple: bool,
}

impl WeightedGraph {
    /// Builds a graph from an undirected edge list; each edge is stored in
    /// both directions.
    pub fn from_edges(
        family: GraphFamily,
        level: u32,
        origin: VertexId,
        vertex_count: usize,
        edges: &[(VertexId, VertexId, f64)],
        coords: Option<Vec<[i64; 2]>>,
        boundary: Vec<VertexId>,
    ) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidGraph("no vertices".into()));
        }
        if origin as usize >= vertex_count {
            return Err(Error::InvalidGraph(format!("origin {origin} out of range")));
        }
        if let Some(c) = &coords {
            if c.len() != vertex_count {
                return Err(Error::InvalidGraph("coordinate count mismatch".into()));
            }
        }
        let mut rows: Vec<Vec<(VertexId, f64)>> = vec![Vec::new(); vertex_count];
        for &(a, b, w) in edges {
            if a as usize >= vertex_count || b as usize >= vertex_count {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) has weight {w}")));
            }
            rows[a as usize].push((b, w));
            rows[b as usize].push((a, w));
        }
        let mut offsets = Vec::with_capacity(vertex_count + 1);
        let mut targets = Vec::with_capacity(edges.len() * 2);
        let mut weights = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        for (x, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(y, _)| y);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidGraph(format!("multiple edge at vertex {x}")));
            }
            for &(y, w) in row.iter() {
                targets.push(y);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        let vertex_weight: Vec<f64> = (0..vertex_count)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();
        let mut trans = vec![0.0; targets.len()];
        let mut rev = vec![0.0; targets.len()];
        let mut log_rev = vec![0.0; targets.len()];
        for x in 0..vertex_count {
            for e in offsets[x]..offsets[x + 1] {
                let y = targets[e] as usize;
                trans[e] = weights[e] / vertex_weight[x];
                rev[e] = weights[e] / vertex_weight[y];
                log_rev[e] = rev[e].ln();
            }
        }
        let coord_index = coords
            .as_ref()
            .map(|c| c.iter().enumerate().map(|(i, &p)| (p, i as VertexId)).collect())
            .unwrap_or_default();
        let mut is_boundary = vec![false; vertex_count];
        let mut boundary = boundary;
        boundary.sort_unstable();
        boundary.dedup();
        for &b in &boundary {
            if b as usize >= vertex_count {
                return Err(Error::InvalidGraph(format!("boundary vertex {b} out of range")));
            }
            is_boundary[b as usize] = true;
        }
        let g = WeightedGraph {
            family,
            level,
            origin,
            offsets,
            targets,
            weights,
            trans,
            rev,
            log_rev,
            vertex_weight,
            coords,
            coord_index,
            boundary,
            is_boundary,
        };
        if !g.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn family(&self) -> GraphFamily {
        self.family
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn origin(&self) -> VertexId {
        self.origin
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_weight.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, x: VertexId) -> usize {
        let x = x as usize;
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count() as VertexId)
            .map(|x| self.degree(x))
            .max()
            .unwrap_or(0)
    }

    /// Neighbours of `x` with edge weights, in ascending id order.
    pub fn neighbors(&self, x: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        let r = self.row(x);
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// Neighbours of `x` with one-step transition probabilities `p(x, y)`.
    #[inline]
    pub fn transitions(&self, x: VertexId) -> (&[VertexId], &[f64]) {
        let r = self.row(x);
        (&self.targets[r.clone()], &self.trans[r])
    }

    /// Neighbours `y` of `x` with `p(y, x)`, the probability of stepping
    /// into `x`.
    #[inline]
    pub fn incoming(&self, x: VertexId) -> (&[VertexId], &[f64]) {
        let r = self.row(x);
        (&self.targets[r.clone()], &self.rev[r])
    }

    /// Neighbours `y` of `x` with `ln p(y, x)`, the log probability of
    /// stepping into `x`.
    #[inline]
    pub fn incoming_log(&self, x: VertexId) -> (&[VertexId], &[f64]) {
        let r = self.row(x);
        (&self.targets[r.clone()], &self.log_rev[r])
    }

    #[inline]
    fn row(&self, x: VertexId) -> std::ops::Range<usize> {
        let x = x as usize;
        self.offsets[x]..self.offsets[x + 1]
    }

    /// `p(x, y)`, zero when `y` is not a neighbour.
    pub fn transition_prob(&self, x: VertexId, y: VertexId) -> f64 {
        let (t, p) = self.transitions(x);
        match t.binary_search(&y) {
            Ok(i) => p[i],
            Err(_) => 0.0,
        }
    }

    pub fn vertex_weight(&self, x: VertexId) -> f64 {
        self.vertex_weight[x as usize]
    }

    pub fn coords(&self, x: VertexId) -> Option<[i64; 2]> {
        self.coords.as_ref().map(|c| c[x as usize])
    }

    pub fn vertex_at(&self, p: i64, q: i64) -> Option<VertexId> {
        self.coord_index.get(&[p, q]).copied()
    }

    pub fn boundary(&self) -> &[VertexId] {
        &self.boundary
    }

    #[inline]
    pub fn is_boundary(&self, x: VertexId) -> bool {
        self.is_boundary[x as usize]
    }

    pub fn nominal_dimensions(&self) -> Option<Dimensions> {
        self.family.nominal_dimensions()
    }

    fn is_connected(&self) -> bool {
        let d = distances_from(self, self.origin);
        d.iter().all(|&v| v != UNREACHABLE)
    }

    /// Checks symmetry, connectivity, simplicity and reports the weight and
    /// degree bounds.
    pub fn check_invariants(&self) -> GraphReport {
        let mut symmetric = true;
        let mut simple = true;
        let mut c_mu: f64 = 1.0;
        for x in 0..self.vertex_count() as VertexId {
            let mut prev = None;
            for (y, w) in self.neighbors(x) {
                if y == x || prev == Some(y) {
                    simple = false;
                }
                prev = Some(y);
                let back = self.neighbors(y).find(|&(z, _)| z == x).map(|(_, w)| w);
                if back != Some(w) {
                    symmetric = false;
                }
                c_mu = c_mu.max(w).max(1.0 / w);
            }
        }
        GraphReport {
            vertices: self.vertex_count(),
            edges: self.edge_count(),
            c_mu,
            max_degree: self.max_degree(),
            symmetric,
            connected: self.is_connected(),
            simple,
        }
    }

    /// Serializes to the `#polyfract-graph v1` text edge list.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#polyfract-graph v1 family={} level={} origin={}",
            self.family.tag(),
            self.level,
            self.origin
        );
        for x in 0..self.vertex_count() as VertexId {
            match self.coords(x) {
                Some([p, q]) => {
                    let _ = writeln!(out, "vertex {x} {p} {q}");
                }
                None => {
                    let _ = writeln!(out, "vertex {x}");
                }
            }
        }
        for x in 0..self.vertex_count() as VertexId {
            for (y, w) in self.neighbors(x) {
                if x < y {
                    let _ = writeln!(out, "edge {x} {y} {w}");
                }
            }
        }
        out
    }

    /// Parses the text edge list. Gasket and line truncations get their
    /// frontier back from the coordinates; custom graphs have none. Lines
    /// after the header starting with `#` are comments.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("#polyfract-graph") || fields.next() != Some("v1") {
            return Err(Error::Parse {
                line: 1,
                msg: "missing `#polyfract-graph v1` header".into(),
            });
        }
        let mut family = None;
        let mut level = None;
        let mut origin = None;
        for kv in fields {
            let (k, v) = kv.split_once('=').ok_or(Error::Parse {
                line: 1,
                msg: format!("malformed header field `{kv}`"),
            })?;
            let bad = |_| Error::Parse {
                line: 1,
                msg: format!("bad value for `{k}`"),
            };
            match k {
                "family" => family = Some(v.parse::<GraphFamily>().map_err(bad)?),
                "level" => level = Some(v.parse::<u32>().map_err(|_| bad(Error::Domain(String::new())))?),
                "origin" => origin = Some(v.parse::<VertexId>().map_err(|_| bad(Error::Domain(String::new())))?),
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("unknown header field `{k}`"),
                    })
                }
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 1,
            msg: format!("header lacks `{what}`"),
        };
        let family = family.ok_or_else(|| missing("family"))?;
        let level = level.ok_or_else(|| missing("level"))?;
        let origin = origin.ok_or_else(|| missing("origin"))?;

        let mut coords: Vec<[i64; 2]> = Vec::new();
        let mut has_coords = None;
        let mut vertex_count = 0usize;
        let mut edges = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let perr = |msg: String| Error::Parse { line: lineno, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [] => continue,
                [first, ..] if first.starts_with('#') => continue,
                ["vertex", id, rest @ ..] => {
                    let id: usize = id.parse().map_err(|_| perr(format!("bad id `{id}`")))?;
                    if id != vertex_count {
                        return Err(perr(format!("vertex ids must be consecutive, got {id}")));
                    }
                    vertex_count += 1;
                    let this_has = !rest.is_empty();
                    if *has_coords.get_or_insert(this_has) != this_has {
                        return Err(perr("mixed vertex lines with and without coordinates".into()));
                    }
                    if let [p, q] = rest {
                        let p = p.parse().map_err(|_| perr(format!("bad coordinate `{p}`")))?;
                        let q = q.parse().map_err(|_| perr(format!("bad coordinate `{q}`")))?;
                        coords.push([p, q]);
                    } else if !rest.is_empty() {
                        return Err(perr("vertex line takes zero or two coordinates".into()));
                    }
                }
                ["edge", a, b, w] => {
                    let a = a.parse().map_err(|_| perr(format!("bad id `{a}`")))?;
                    let b = b.parse().map_err(|_| perr(format!("bad id `{b}`")))?;
                    let w = w.parse().map_err(|_| perr(format!("bad weight `{w}`")))?;
                    edges.push((a, b, w));
                }
                _ => return Err(perr(format!("unrecognized line `{line}`"))),
            }
        }
        let coords = if has_coords == Some(true) { Some(coords) } else { None };
        let boundary = match (&coords, family) {
            (Some(c), GraphFamily::Gasket) => {
                let side = 1i64 << level;
                c.iter()
                    .enumerate()
                    .filter(|(_, p)| **p == [side, 0] || **p == [0, side])
                    .map(|(i, _)| i as VertexId)
                    .collect()
            }
            (Some(c), GraphFamily::Line) => {
                let r = level as i64;
                c.iter()
                    .enumerate()
                    .filter(|(_, p)| p[0].abs() == r)
                    .map(|(i, _)| i as VertexId)
                    .collect()
            }
            _ => Vec::new(),
        };
        WeightedGraph::from_edges(family, level, origin, vertex_count, &edges, coords, boundary)
    }
}

/// Vertex subset with constant-time membership.
#[derive(Clone, Debug)]
pub struct VertexSet {
    member: Vec<bool>,
    members: Vec<VertexId>,
}

impl VertexSet {
    pub fn new(vertex_count: usize, members: impl IntoIterator<Item = VertexId>) -> Self {
        let mut member = vec![false; vertex_count];
        let mut list = Vec::new();
        for v in members {
            if !member[v as usize] {
                member[v as usize] = true;
                list.push(v);
            }
        }
        list.sort_unstable();
        VertexSet { member, members: list }
    }

    pub fn full(vertex_count: usize) -> Self {
        VertexSet::new(vertex_count, 0..vertex_count as VertexId)
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.member[v as usize]
    }

    /// Members in ascending order.
    pub fn members(&self) -> &[VertexId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.members.iter().all(|&v| other.contains(v))
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.members.iter().all(|&v| !other.contains(v))
    }
}

/// Reusable breadth-first search scratch.
pub(crate) struct Bfs {
    dist: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    order: Vec<VertexId>,
}

impl Bfs {
    pub(crate) fn new(vertex_count: usize) -> Self {
        Bfs {
            dist: vec![0; vertex_count],
            stamp: vec![0; vertex_count],
            epoch: 0,
            order: Vec::new(),
        }
    }

    /// Visits every vertex within `radius` of the sources; returns them in
    /// BFS order (sources first, in the given order).
    pub(crate) fn run(&mut self, g: &WeightedGraph, sources: &[VertexId], radius: u32) -> &[VertexId] {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.order.clear();
        for &s in sources {
            if self.stamp[s as usize] != self.epoch {
                self.stamp[s as usize] = self.epoch;
                self.dist[s as usize] = 0;
                self.order.push(s);
            }
        }
        let mut head = 0;
        while head < self.order.len() {
            let x = self.order[head];
            head += 1;
            let d = self.dist[x as usize];
            if d >= radius {
                continue;
            }
            let (ts, _) = g.transitions(x);
            for &y in ts {
                if self.stamp[y as usize] != self.epoch {
                    self.stamp[y as usize] = self.epoch;
                    self.dist[y as usize] = d + 1;
                    self.order.push(y);
                }
            }
        }
        &self.order
    }

    /// Distance from the last run's sources, if visited.
    #[inline]
    pub(crate) fn dist(&self, v: VertexId) -> Option<u32> {
        (self.stamp[v as usize] == self.epoch).then(|| self.dist[v as usize])
    }
}

/// Level-`level` truncation of the Sierpinski gasket graph with unit weights.
///
/// Vertices carry integer coordinates `(p, q)` meaning `p*a0 + q*b0`. The
/// frontier is the pair of far corners `(2^L, 0)` and `(0, 2^L)`, the only
/// vertices whose degree differs from the infinite graph.
pub fn build_sierpinski_gasket(level: u32) -> Result<WeightedGraph> {
    build_sierpinski_gasket_capped(level, GASKET_LEVEL_CAP)
}

pub fn build_sierpinski_gasket_capped(level: u32, cap: u32) -> Result<WeightedGraph> {
    if level > cap {
        return Err(Error::Size {
            what: "gasket level",
            requested: level as u64,
            cap: cap as u64,
        });
    }
    let mut index: HashMap<[i64; 2], u32> = HashMap::new();
    let mut pts: Vec<[i64; 2]> = Vec::new();
    let mut intern = |p: [i64; 2], pts: &mut Vec<[i64; 2]>| -> u32 {
        *index.entry(p).or_insert_with(|| {
            pts.push(p);
            (pts.len() - 1) as u32
        })
    };
    let o = intern([0, 0], &mut pts);
    let a = intern([1, 0], &mut pts);
    let b = intern([0, 1], &mut pts);
    let mut edges: Vec<(u32, u32)> = vec![(o, a), (o, b), (a, b)];
    for k in 0..level {
        let shift = 1i64 << k;
        let base = edges.clone();
        for offset in [[shift, 0], [0, shift]] {
            for &(u, v) in &base {
                let pu = pts[u as usize];
                let pv = pts[v as usize];
                let su = intern([pu[0] + offset[0], pu[1] + offset[1]], &mut pts);
                let sv = intern([pv[0] + offset[0], pv[1] + offset[1]], &mut pts);
                edges.push((su, sv));
            }
        }
    }
    // order ids by (p + q, q, p) so that ids grow roughly with distance from O
    let mut order: Vec<u32> = (0..pts.len() as u32).collect();
    order.sort_by_key(|&i| {
        let [p, q] = pts[i as usize];
        (p + q, q, p)
    });
    let mut relabel = vec![0u32; pts.len()];
    for (new, &old) in order.iter().enumerate() {
        relabel[old as usize] = new as u32;
    }
    let coords: Vec<[i64; 2]> = order.iter().map(|&i| pts[i as usize]).collect();
    let edge_list: Vec<(VertexId, VertexId, f64)> = edges
        .iter()
        .map(|&(u, v)| (relabel[u as usize], relabel[v as usize], 1.0))
        .collect();
    let side = 1i64 << level;
    let boundary: Vec<VertexId> = coords
        .iter()
        .enumerate()
        .filter(|(_, p)| **p == [side, 0] || **p == [0, side])
        .map(|(i, _)| i as VertexId)
        .collect();
    let origin = relabel[o as usize];
    WeightedGraph::from_edges(
        GraphFamily::Gasket,
        level,
        origin,
        coords.len(),
        &edge_list,
        Some(coords),
        boundary,
    )
}

/// Path graph on `{-radius, ..., radius}` with unit weights, origin at 0.
/// Vertex `v` has id `v + radius` and coordinates `(v, 0)`.
pub fn build_line(radius: u32) -> Result<WeightedGraph> {
    if radius == 0 {
        return Err(Error::Domain("line radius must be at least 1".into()));
    }
    let r = radius as i64;
    let n = (2 * radius + 1) as usize;
    let coords: Vec<[i64; 2]> = (-r..=r).map(|v| [v, 0]).collect();
    let edges: Vec<(VertexId, VertexId, f64)> = (0..n as u32 - 1).map(|i| (i, i + 1, 1.0)).collect();
    WeightedGraph::from_edges(
        GraphFamily::Line,
        radius,
        radius,
        n,
        &edges,
        Some(coords),
        vec![0, (n - 1) as VertexId],
    )
}

/// Full BFS distance map from `x`; [`UNREACHABLE`] marks other components.
pub fn distances_from(g: &WeightedGraph, x: VertexId) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; g.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[x as usize] = 0;
    queue.push_back(x);
    while let Some(u) = queue.pop_front() {
        let d = dist[u as usize];
        for &v in g.transitions(u).0 {
            if dist[v as usize] == UNREACHABLE {
                dist[v as usize] = d + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Graph distance by BFS from `x`, stopping once `y` is found.
pub fn distance(g: &WeightedGraph, x: VertexId, y: VertexId) -> u32 {
    if x == y {
        return 0;
    }
    let mut dist = HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    dist.insert(x, 0u32);
    queue.push_back(x);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for &v in g.transitions(u).0 {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                if v == y {
                    return d + 1;
                }
                e.insert(d + 1);
                queue.push_back(v);
            }
        }
    }
    debug_assert!(false, "distance queried across components");
    UNREACHABLE
}

/// The metric ball `B(x, r)`, ascending ids.
pub fn ball(g: &WeightedGraph, x: VertexId, r: u32) -> Vec<VertexId> {
    let mut bfs = Bfs::new(g.vertex_count());
    let mut v = bfs.run(g, &[x], r).to_vec();
    v.sort_unstable();
    v
}

pub fn ball_set(g: &WeightedGraph, x: VertexId, r: u32) -> VertexSet {
    VertexSet::new(g.vertex_count(), ball(g, x, r))
}

/// Errors if any frontier vertex lies within distance `r` of `x`.
pub fn ensure_clear_of_boundary(g: &WeightedGraph, x: VertexId, r: u32) -> Result<()> {
    if g.boundary().is_empty() {
        return Ok(());
    }
    let mut bfs = Bfs::new(g.vertex_count());
    bfs.run(g, &[x], r);
    for &b in g.boundary() {
        if let Some(d) = bfs.dist(b) {
            return Err(Error::Boundary {
                vertex: b,
                step: d as usize,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VolumePoint {
    pub radius: u32,
    /// `V(x, n)`, the mu-volume of the ball.
    pub mu_volume: f64,
    /// `V~(x, n)`, the number of vertices in the ball.
    pub count: u64,
}

/// Ball volumes `V(x, n)` and cardinalities for `n = 0..=n_max`.
pub fn volume_growth(g: &WeightedGraph, x: VertexId, n_max: u32) -> Result<Vec<VolumePoint>> {
    ensure_clear_of_boundary(g, x, n_max)?;
    let mut bfs = Bfs::new(g.vertex_count());
    let order = bfs.run(g, &[x], n_max).to_vec();
    let mut count = vec![0u64; n_max as usize + 1];
    let mut mass = vec![0f64; n_max as usize + 1];
    for &v in &order {
        let d = bfs.dist(v).expect("visited") as usize;
        count[d] += 1;
        mass[d] += g.vertex_weight(v);
    }
    let mut out = Vec::with_capacity(count.len());
    let (mut c, mut m) = (0u64, 0f64);
    for n in 0..=n_max as usize {
        c += count[n];
        m += mass[n];
        out.push(VolumePoint {
            radius: n as u32,
            mu_volume: m,
            count: c,
        });
    }
    Ok(out)
}

/// Log-log regression of the ball cardinality against the radius over
/// `[lo, hi]`; the slope estimates `d_f`.
pub fn fit_volume_dimension(points: &[VolumePoint], lo: f64, hi: f64) -> Result<LinearFit> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.radius as f64, p.count as f64)).collect();
    log_log_fit(&pts, lo, hi)
}

/// Disjoint balls of radius `n_w` whose 5-fold dilates cover a region.
#[derive(Clone, Debug, Serialize)]
pub struct BallCover {
    pub block_radius: u32,
    pub cover_radius: u32,
    pub centers: Vec<VertexId>,
    /// Per vertex, the index of the covering center (None outside the region).
    pub assignment: Vec<Option<u32>>,
}

impl BallCover {
    /// Number of centers inside `B(centers[i], radius)`.
    pub fn local_count(&self, g: &WeightedGraph, i: usize, radius: u32) -> usize {
        let mut bfs = Bfs::new(g.vertex_count());
        let is_center = self.center_mask(g.vertex_count());
        bfs.run(g, &[self.centers[i]], radius)
            .iter()
            .filter(|&&v| is_center[v as usize])
            .count()
    }

    fn center_mask(&self, vertex_count: usize) -> Vec<bool> {
        let mut m = vec![false; vertex_count];
        for &c in &self.centers {
            m[c as usize] = true;
        }
        m
    }

    /// Smallest `C_C` with `#{centers in B(y_i, R n_w)} <= C_C R^{d_f}` for
    /// every center and every `R` in `multipliers`.
    pub fn local_count_constant(&self, g: &WeightedGraph, multipliers: &[u32], d_f: f64) -> f64 {
        let is_center = self.center_mask(g.vertex_count());
        let mut bfs = Bfs::new(g.vertex_count());
        let mut c: f64 = 0.0;
        for &y in &self.centers {
            for &r in multipliers {
                let k = bfs
                    .run(g, &[y], r * self.block_radius)
                    .iter()
                    .filter(|&&v| is_center[v as usize])
                    .count();
                c = c.max(k as f64 / (r as f64).powf(d_f));
            }
        }
        c
    }

    /// True if the radius-`n_w` balls are pairwise disjoint.
    pub fn balls_disjoint(&self, g: &WeightedGraph) -> bool {
        let mut owner = vec![u32::MAX; g.vertex_count()];
        let mut bfs = Bfs::new(g.vertex_count());
        for (i, &y) in self.centers.iter().enumerate() {
            for &v in bfs.run(g, &[y], self.block_radius) {
                if owner[v as usize] != u32::MAX {
                    return false;
                }
                owner[v as usize] = i as u32;
            }
        }
        true
    }

    /// True if every vertex of `region` lies within `cover_radius` of a center.
    pub fn covers(&self, g: &WeightedGraph, region: &[VertexId]) -> bool {
        let mut bfs = Bfs::new(g.vertex_count());
        bfs.run(g, &self.centers, self.cover_radius);
        region.iter().all(|&v| bfs.dist(v).is_some())
    }
}

/// Greedy maximal `(2 n_w + 1)`-separated center set, scanned in BFS order
/// from the origin (ties by id).
pub fn vitali_cover(g: &WeightedGraph, region: &[VertexId], n_w: u32) -> Result<BallCover> {
    if region.is_empty() {
        return Err(Error::Domain("vitali cover of an empty region".into()));
    }
    if n_w == 0 {
        return Err(Error::Domain("block radius must be at least 1".into()));
    }
    let from_origin = distances_from(g, g.origin());
    let mut scan: Vec<VertexId> = region.to_vec();
    scan.sort_unstable();
    scan.dedup();
    scan.sort_by_key(|&v| (from_origin[v as usize], v));
    let mut blocked = vec![false; g.vertex_count()];
    let mut bfs = Bfs::new(g.vertex_count());
    let mut centers = Vec::new();
    for &v in &scan {
        if blocked[v as usize] {
            continue;
        }
        centers.push(v);
        for &u in bfs.run(g, &[v], 2 * n_w) {
            blocked[u as usize] = true;
        }
    }
    // nearest center by a multi-source BFS seeded in center order
    let cover_radius = 5 * n_w;
    let mut owner = vec![u32::MAX; g.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    let mut dist = vec![u32::MAX; g.vertex_count()];
    for (i, &c) in centers.iter().enumerate() {
        owner[c as usize] = i as u32;
        dist[c as usize] = 0;
        queue.push_back(c);
    }
    while let Some(u) = queue.pop_front() {
        if dist[u as usize] >= cover_radius {
            continue;
        }
        for &w in g.transitions(u).0 {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = dist[u as usize] + 1;
                owner[w as usize] = owner[u as usize];
                queue.push_back(w);
            }
        }
    }
    let mut assignment = vec![None; g.vertex_count()];
    for &v in &scan {
        if owner[v as usize] != u32::MAX {
            assignment[v as usize] = Some(owner[v as usize]);
        }
    }
    Ok(BallCover {
        block_radius: n_w,
        cover_radius,
        centers,
        assignment,
    })
}

/// A geodesic ray `x_0 = origin, x_1, ...` with `d(origin, x_k) = k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeodesicRay {
    pub vertices: Vec<VertexId>,
}

impl GeodesicRay {
    pub fn at(&self, k: usize) -> VertexId {
        self.vertices[k]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// The ray along the first coordinate axis, `x_k = (k, 0)`: the bottom edge
/// of the gasket, or `0, 1, 2, ...` on the line.
pub fn geodesic_ray(g: &WeightedGraph, length: usize) -> Result<GeodesicRay> {
    if g.coords.is_none() {
        return Err(Error::Domain("geodesic ray needs vertex coordinates".into()));
    }
    let mut vertices = Vec::with_capacity(length + 1);
    for k in 0..=length {
        match g.vertex_at(k as i64, 0) {
            Some(v) if !g.is_boundary(v) => vertices.push(v),
            _ => return Err(Error::Domain(format!("ray length {length} exceeds the truncation"))),
        }
    }
    if vertices[0] != g.origin() {
        return Err(Error::Domain("ray does not start at the origin".into()));
    }
    let mut bfs = Bfs::new(g.vertex_count());
    bfs.run(g, &[g.origin()], length as u32);
    for (k, &v) in vertices.iter().enumerate() {
        if bfs.dist(v) != Some(k as u32) {
            return Err(Error::Domain(format!("ray vertex {k} is not at distance {k}")));
        }
    }
    Ok(GeodesicRay { vertices })
}
