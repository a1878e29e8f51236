//! Exact combinatorics of the carpet: cell words, lattice points, the
//! vertex graphs `V_n`, the cell graphs `W_n`, the Cantor-cross variant and
//! balls in the infinite graphical carpet.
//!
//! All coordinates are integers. A point of `V_n` is stored at scale
//! `2 * 3^n`, so cell corners have even coordinates and edge midpoints have
//! exactly one odd coordinate. Points of the infinite graph are stored at
//! scale 2 (level 0) with unbounded range.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest level for which full graphs are materialized by default.
pub const DEFAULT_MAX_LEVEL: u32 = 7;

/// Offsets `2 p_i` of the eight contraction maps, in units of the child side.
pub const OFFSETS: [(u64, u64); 8] = [
    (0, 0),
    (1, 0),
    (2, 0),
    (2, 1),
    (2, 2),
    (1, 2),
    (0, 2),
    (0, 1),
];

const CROSS_ALPHABET: [u8; 6] = [0, 1, 2, 4, 5, 6];
const CARPET_ALPHABET: [u8; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

/// Which self-similar set a word or graph lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The Sierpinski carpet, eight maps.
    Carpet,
    /// The Cantor cross `[0,1] x C`, maps 0,1,2,4,5,6.
    Cross,
}

impl Mode {
    pub fn alphabet(self) -> &'static [u8] {
        match self {
            Mode::Carpet => &CARPET_ALPHABET,
            Mode::Cross => &CROSS_ALPHABET,
        }
    }

    pub fn base(self) -> usize {
        self.alphabet().len()
    }

    fn digit_position(self, digit: u8) -> Option<usize> {
        self.alphabet().iter().position(|&d| d == digit)
    }

    /// Indices into `OFFSETS` of the points of the level-0 vertex set.
    pub fn perimeter(self) -> &'static [usize] {
        match self {
            Mode::Carpet => &CARPET_ALPHABET_USIZE,
            Mode::Cross => &CROSS_PERIMETER,
        }
    }

    /// Pairs of perimeter positions at distance one half inside one cell.
    pub fn perimeter_pairs(self) -> &'static [(usize, usize)] {
        match self {
            Mode::Carpet => &CARPET_PAIRS,
            Mode::Cross => &CROSS_PAIRS,
        }
    }

    pub fn word_count(self, level: u32) -> usize {
        self.base().pow(level)
    }
}

const CARPET_ALPHABET_USIZE: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];
const CROSS_PERIMETER: [usize; 6] = [0, 1, 2, 4, 5, 6];
const CARPET_PAIRS: [(usize, usize); 8] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 0),
];
const CROSS_PAIRS: [(usize, usize); 4] = [(0, 1), (1, 2), (4, 5), (5, 6)];

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Carpet => f.write_str("carpet"),
            Mode::Cross => f.write_str("cross"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carpet" | "sc" => Ok(Mode::Carpet),
            "cross" | "cantor" => Ok(Mode::Cross),
            other => invalid(format!("unknown mode `{other}`")),
        }
    }
}

/// A cell address `w_1 ... w_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    mode: Mode,
    digits: Vec<u8>,
}

impl Word {
    pub fn new(mode: Mode, digits: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = digits.iter().find(|&&d| mode.digit_position(d).is_none()) {
            return invalid(format!("digit {bad} is not in the {mode} alphabet"));
        }
        Ok(Self { mode, digits })
    }

    pub fn empty(mode: Mode) -> Self {
        Self {
            mode,
            digits: Vec::new(),
        }
    }

    /// The word `i^n`.
    pub fn repeated(mode: Mode, digit: u8, level: u32) -> Result<Self> {
        Self::new(mode, vec![digit; level as usize])
    }

    /// Decodes the position of a word in lexicographic order.
    pub fn from_index(mode: Mode, level: u32, index: usize) -> Result<Self> {
        if index >= mode.word_count(level) {
            return invalid(format!("word index {index} out of range at level {level}"));
        }
        let base = mode.base();
        let mut digits = vec![0u8; level as usize];
        let mut rest = index;
        for slot in digits.iter_mut().rev() {
            *slot = mode.alphabet()[rest % base];
            rest /= base;
        }
        Ok(Self { mode, digits })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn level(&self) -> u32 {
        self.digits.len() as u32
    }

    /// Position in lexicographic order among words of the same level.
    pub fn index(&self) -> usize {
        let base = self.mode.base();
        self.digits.iter().fold(0, |acc, &d| {
            acc * base + self.mode.digit_position(d).expect("validated digit")
        })
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.mode != other.mode {
            return invalid("cannot concatenate words of different modes");
        }
        let mut digits = self.digits.clone();
        digits.extend_from_slice(&other.digits);
        Ok(Word {
            mode: self.mode,
            digits,
        })
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.digits.is_empty() {
            return f.write_str("∅");
        }
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// A point of `V_n` at scale `2 * 3^level`, or a point of the infinite
/// graph at level 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: u64,
    pub y: u64,
    pub level: u32,
}

impl LatticePoint {
    pub fn new(x: u64, y: u64, level: u32) -> Self {
        Self { x, y, level }
    }

    /// Denominator of the coordinates, `2 * 3^level`.
    pub fn scale(&self) -> u64 {
        2 * 3u64.pow(self.level)
    }

    /// Geometric coordinates.
    pub fn coords(&self) -> (f64, f64) {
        let s = self.scale() as f64;
        (self.x as f64 / s, self.y as f64 / s)
    }

    /// Same geometric point expressed at a finer level.
    pub fn refine(&self, level: u32) -> LatticePoint {
        assert!(level >= self.level, "cannot refine to a coarser level");
        let k = 3u64.pow(level - self.level);
        LatticePoint::new(self.x * k, self.y * k, level)
    }

    /// The same geometric point at a coarser level, if it lies on that grid.
    pub fn coarsen(&self, level: u32) -> Option<LatticePoint> {
        if level > self.level {
            return None;
        }
        let k = 3u64.pow(self.level - level);
        (self.x % k == 0 && self.y % k == 0).then(|| LatticePoint::new(self.x / k, self.y / k, level))
    }

    /// Parity and range invariant of finite-level vertex coordinates.
    pub fn is_well_formed(&self) -> bool {
        let s = self.scale();
        !(self.x % 2 == 1 && self.y % 2 == 1) && self.x <= s && self.y <= s
    }
}

/// Lower-left corner of a level-n cell in units of `3^-n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellOrigin {
    pub column: u64,
    pub row: u64,
    pub level: u32,
}

impl CellOrigin {
    /// True when no base-3 digit pair of `(column, row)` equals `(1, 1)`.
    pub fn is_valid(&self) -> bool {
        let side = 3u64.pow(self.level);
        self.column < side && self.row < side && carpet_cell(self.column, self.row)
    }

    /// The cell's perimeter points at scale `2 * 3^level`, ordered as
    /// `p_0 .. p_7` restricted to the mode's alphabet.
    pub fn vertices(&self, mode: Mode) -> Vec<LatticePoint> {
        mode.perimeter()
            .iter()
            .map(|&i| {
                let (ox, oy) = OFFSETS[i];
                LatticePoint::new(2 * self.column + ox, 2 * self.row + oy, self.level)
            })
            .collect()
    }
}

/// Carpet membership of an integer cell origin, with unbounded range.
pub fn carpet_cell(mut column: u64, mut row: u64) -> bool {
    while column > 0 || row > 0 {
        if column % 3 == 1 && row % 3 == 1 {
            return false;
        }
        column /= 3;
        row /= 3;
    }
    true
}

/// Lower-left corner of `K_w`.
pub fn cell_origin(w: &Word) -> CellOrigin {
    let (column, row) = w.digits.iter().fold((0u64, 0u64), |(c, r), &d| {
        let (ox, oy) = OFFSETS[d as usize];
        (3 * c + ox, 3 * r + oy)
    });
    CellOrigin {
        column,
        row,
        level: w.level(),
    }
}

/// Corners and edge midpoints of `K_w` (six points in cross mode).
pub fn cell_vertices(w: &Word) -> Vec<LatticePoint> {
    cell_origin(w).vertices(w.mode)
}

/// All level-n cell origins in lexicographic word order.
pub fn cell_origins(level: u32, mode: Mode) -> Vec<CellOrigin> {
    let mut current = vec![(0u64, 0u64)];
    for _ in 0..level {
        let mut next = Vec::with_capacity(current.len() * mode.base());
        for &(c, r) in &current {
            for &d in mode.alphabet() {
                let (ox, oy) = OFFSETS[d as usize];
                next.push((3 * c + ox, 3 * r + oy));
            }
        }
        current = next;
    }
    current
        .into_iter()
        .map(|(column, row)| CellOrigin { column, row, level })
        .collect()
}

/// Which graph a skeleton represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Vertex,
    Cell,
    VInftyBall,
    /// A graph derived by surgery, without geometric labels.
    Network,
}

/// Node labels of a skeleton.
#[derive(Debug, Clone)]
pub enum NodeSet {
    /// Lattice points in sorted `(x, y)` order.
    Points(Vec<LatticePoint>),
    /// The words of one level, indexed in lexicographic order.
    Words { mode: Mode, level: u32 },
    /// Unlabelled nodes, e.g. after shorting.
    Abstract(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub multiplicity: u32,
}

/// Immutable node/edge structure. Edge multiplicities act as conductances.
#[derive(Debug, Clone)]
pub struct GraphSkeleton {
    pub kind: GraphKind,
    pub mode: Mode,
    pub level: u32,
    pub nodes: NodeSet,
    pub edges: Vec<Edge>,
    /// Boundary flags; only set for balls (nodes at maximal distance).
    pub boundary: Vec<bool>,
    /// Graph distance from the ball center; empty for finite-level graphs.
    pub distance: Vec<u32>,
}

impl GraphSkeleton {
    pub fn node_count(&self) -> usize {
        match &self.nodes {
            NodeSet::Points(p) => p.len(),
            NodeSet::Words { mode, level } => mode.word_count(*level),
            NodeSet::Abstract(n) => *n,
        }
    }

    pub fn points(&self) -> Option<&[LatticePoint]> {
        match &self.nodes {
            NodeSet::Points(p) => Some(p),
            _ => None,
        }
    }

    /// Index of a lattice point, by binary search over the sorted node list.
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        match &self.nodes {
            NodeSet::Points(points) => points.binary_search(p).ok(),
            _ => None,
        }
    }

    /// Index of a word in a cell graph.
    pub fn index_of_word(&self, w: &Word) -> Option<usize> {
        match &self.nodes {
            NodeSet::Words { mode, level } if *mode == w.mode && *level == w.level() => {
                Some(w.index())
            }
            _ => None,
        }
    }

    /// Sum of multiplicities over all edges.
    pub fn edge_incidences(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity as u64).sum()
    }

    /// Adjacency lists `(neighbor, multiplicity)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, u32)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.a as usize].push((e.b as usize, e.multiplicity));
            adj[e.b as usize].push((e.a as usize, e.multiplicity));
        }
        adj
    }

    /// The subgraph on the flagged nodes, with the map from its node
    /// indices back to ours. Point labels stay sorted.
    pub fn induced(&self, keep: &[bool]) -> Result<(GraphSkeleton, Vec<usize>)> {
        if keep.len() != self.node_count() {
            return Err(Error::Dimension {
                expected: self.node_count(),
                actual: keep.len(),
            });
        }
        let old: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        let mut new = vec![u32::MAX; keep.len()];
        for (k, &i) in old.iter().enumerate() {
            new[i] = k as u32;
        }
        let nodes = match &self.nodes {
            NodeSet::Points(points) => NodeSet::Points(old.iter().map(|&i| points[i]).collect()),
            _ => NodeSet::Abstract(old.len()),
        };
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.a as usize] && keep[e.b as usize])
            .map(|e| Edge {
                a: new[e.a as usize],
                b: new[e.b as usize],
                multiplicity: e.multiplicity,
            })
            .collect();
        let pick = |v: &Vec<bool>| if v.is_empty() { Vec::new() } else { old.iter().map(|&i| v[i]).collect() };
        let kind = if matches!(nodes, NodeSet::Points(_)) { self.kind } else { GraphKind::Network };
        Ok((
            GraphSkeleton {
                kind,
                mode: self.mode,
                level: self.level,
                nodes,
                edges,
                boundary: pick(&self.boundary),
                distance: if self.distance.is_empty() {
                    Vec::new()
                } else {
                    old.iter().map(|&i| self.distance[i]).collect()
                },
            },
            old,
        ))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }

    /// Writes the line-oriented export: a JSON header line, the node count,
    /// then one `i j weight` line per edge.
    pub fn write_export<W: Write>(&self, mut out: W) -> Result<()> {
        let header = ExportHeader {
            kind: self.kind,
            level: self.level,
            mode: self.mode,
            scale: match self.kind {
                GraphKind::Vertex => 2 * 3u64.pow(self.level),
                GraphKind::Cell => 3u64.pow(self.level),
                GraphKind::VInftyBall => 2,
                GraphKind::Network => 1,
            },
            nodes: self.node_count(),
            edges: self.edges.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        writeln!(out)?;
        writeln!(out, "{}", self.node_count())?;
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.a, e.b, e.multiplicity)?;
        }
        Ok(())
    }

    /// Writes node labels as CSV: `index,x,y` for point graphs and
    /// `index,word,column,row` for cell graphs.
    pub fn write_nodes_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match &self.nodes {
            NodeSet::Points(points) => {
                writeln!(out, "index,x,y")?;
                for (i, p) in points.iter().enumerate() {
                    writeln!(out, "{i},{},{}", p.x, p.y)?;
                }
            }
            NodeSet::Words { mode, level } => {
                writeln!(out, "index,word,column,row")?;
                for (i, o) in cell_origins(*level, *mode).iter().enumerate() {
                    let w = Word::from_index(*mode, *level, i)?;
                    writeln!(out, "{i},{w},{},{}", o.column, o.row)?;
                }
            }
            NodeSet::Abstract(n) => {
                writeln!(out, "index")?;
                for i in 0..*n {
                    writeln!(out, "{i}")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExportHeader {
    pub kind: GraphKind,
    pub level: u32,
    pub mode: Mode,
    pub scale: u64,
    pub nodes: usize,
    pub edges: usize,
}

/// Parses an export produced by [`GraphSkeleton::write_export`].
pub fn read_export(text: &str) -> Result<(ExportHeader, usize, Vec<Edge>)> {
    let mut lines = text.lines();
    let header: ExportHeader =
        serde_json::from_str(lines.next().ok_or_else(|| Error::InvalidInput("empty export".into()))?)?;
    let count: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::InvalidInput("missing node count".into()))?;
    let mut edges = Vec::new();
    for line in lines {
        let parts: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::InvalidInput(format!("bad edge line `{line}`"))))
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            return invalid(format!("bad edge line `{line}`"));
        }
        edges.push(Edge {
            a: parts[0],
            b: parts[1],
            multiplicity: parts[2],
        });
    }
    Ok((header, count, edges))
}

fn check_level(level: u32, cap: u32) -> Result<()> {
    if level == 0 {
        return invalid("level must be at least 1");
    }
    if level > cap {
        return Err(Error::Capacity(format!("level {level} exceeds the cap {cap}")));
    }
    Ok(())
}

/// The graph `V_n` with per-cell edge multiplicities (the `D_n` weights).
pub fn vertex_graph(level: u32, mode: Mode) -> Result<GraphSkeleton> {
    vertex_graph_capped(level, mode, DEFAULT_MAX_LEVEL)
}

pub fn vertex_graph_capped(level: u32, mode: Mode, cap: u32) -> Result<GraphSkeleton> {
    check_level(level, cap)?;
    let origins = cell_origins(level, mode);
    let mut points: Vec<LatticePoint> = origins.iter().flat_map(|o| o.vertices(mode)).collect();
    points.sort_unstable();
    points.dedup();

    let perimeter = mode.perimeter();
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(origins.len() * mode.perimeter_pairs().len());
    for o in &origins {
        let verts = o.vertices(mode);
        let lookup = |pos: usize| {
            let slot = perimeter.iter().position(|&p| p == pos).expect("perimeter position");
            points.binary_search(&verts[slot]).expect("vertex present") as u32
        };
        for &(i, j) in mode.perimeter_pairs() {
            let (a, b) = (lookup(i), lookup(j));
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs.sort_unstable();
    let mut edges: Vec<Edge> = Vec::new();
    for (a, b) in pairs {
        match edges.last_mut() {
            Some(e) if e.a == a && e.b == b => e.multiplicity += 1,
            _ => edges.push(Edge {
                a,
                b,
                multiplicity: 1,
            }),
        }
    }
    let n = points.len();
    Ok(GraphSkeleton {
        kind: GraphKind::Vertex,
        mode,
        level,
        nodes: NodeSet::Points(points),
        edges,
        boundary: vec![false; n],
        distance: Vec::new(),
    })
}

/// The graph `W_n`: words adjacent when their cells share a full side.
pub fn cell_graph(level: u32, mode: Mode) -> Result<GraphSkeleton> {
    cell_graph_capped(level, mode, DEFAULT_MAX_LEVEL)
}

pub fn cell_graph_capped(level: u32, mode: Mode, cap: u32) -> Result<GraphSkeleton> {
    check_level(level, cap)?;
    let origins = cell_origins(level, mode);
    let index: HashMap<(u64, u64), u32> = origins
        .iter()
        .enumerate()
        .map(|(i, o)| ((o.column, o.row), i as u32))
        .collect();
    let mut edges = Vec::new();
    for (i, o) in origins.iter().enumerate() {
        for key in [(o.column + 1, o.row), (o.column, o.row + 1)] {
            if let Some(&j) = index.get(&key) {
                let (a, b) = (i as u32, j);
                edges.push(Edge {
                    a: a.min(b),
                    b: a.max(b),
                    multiplicity: 1,
                });
            }
        }
    }
    edges.sort_unstable();
    let n = origins.len();
    Ok(GraphSkeleton {
        kind: GraphKind::Cell,
        mode,
        level,
        nodes: NodeSet::Words { mode, level },
        edges,
        boundary: vec![false; n],
        distance: Vec::new(),
    })
}

/// Membership in `V_infinity` for a point at scale 2.
pub fn vinfty_member(q: &LatticePoint) -> bool {
    !vinfty_cells(q.x, q.y).is_empty()
}

/// Valid unit cells having `(x, y)` (scale 2) on their perimeter.
fn vinfty_cells(x: u64, y: u64) -> Vec<(u64, u64)> {
    if x % 2 == 1 && y % 2 == 1 {
        return Vec::new();
    }
    let candidates = |v: u64| -> Vec<u64> {
        if v % 2 == 1 {
            vec![v / 2]
        } else if v == 0 {
            vec![0]
        } else {
            vec![v / 2 - 1, v / 2]
        }
    };
    let mut cells = Vec::new();
    for c in candidates(x) {
        for r in candidates(y) {
            if carpet_cell(c, r) {
                cells.push((c, r));
            }
        }
    }
    cells
}

/// Neighbors of a `V_infinity` point: points at distance 1/2 sharing a cell.
pub fn vinfty_neighbors(q: &LatticePoint) -> Vec<LatticePoint> {
    let own = vinfty_cells(q.x, q.y);
    let mut out = Vec::with_capacity(4);
    let steps: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    for (dx, dy) in steps {
        let nx = q.x as i64 + dx;
        let ny = q.y as i64 + dy;
        if nx < 0 || ny < 0 {
            continue;
        }
        let (nx, ny) = (nx as u64, ny as u64);
        let theirs = vinfty_cells(nx, ny);
        if theirs.iter().any(|c| own.contains(c)) {
            out.push(LatticePoint::new(nx, ny, 0));
        }
    }
    out
}

/// Closed graph-distance ball of radius `r` about `z` in `V_infinity`.
/// Nodes at distance exactly `r` are flagged as boundary.
pub fn vinfty_ball(z: &LatticePoint, radius: u32) -> Result<GraphSkeleton> {
    if z.level != 0 || !vinfty_member(z) {
        return invalid(format!("({}, {}) is not a point of V_infinity", z.x, z.y));
    }
    let mut dist: HashMap<LatticePoint, u32> = HashMap::from([(*z, 0)]);
    let mut queue = VecDeque::from([*z]);
    while let Some(p) = queue.pop_front() {
        let d = dist[&p];
        if d == radius {
            continue;
        }
        for q in vinfty_neighbors(&p) {
            if !dist.contains_key(&q) {
                dist.insert(q, d + 1);
                queue.push_back(q);
            }
        }
    }
    let mut points: Vec<LatticePoint> = dist.keys().copied().collect();
    points.sort_unstable();
    let mut edges = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for q in vinfty_neighbors(p) {
            if q > *p {
                if let Ok(j) = points.binary_search(&q) {
                    edges.push(Edge {
                        a: i as u32,
                        b: j as u32,
                        multiplicity: 1,
                    });
                }
            }
        }
    }
    edges.sort_unstable();
    let distance: Vec<u32> = points.iter().map(|p| dist[p]).collect();
    let boundary = distance.iter().map(|&d| d == radius && radius > 0).collect();
    Ok(GraphSkeleton {
        kind: GraphKind::VInftyBall,
        mode: Mode::Carpet,
        level: 0,
        nodes: NodeSet::Points(points),
        edges,
        boundary,
        distance,
    })
}

/// Dihedral symmetries of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    ReflectX,
    ReflectY,
    Transpose,
}

impl Symmetry {
    pub const ALL: [Symmetry; 3] = [Symmetry::ReflectX, Symmetry::ReflectY, Symmetry::Transpose];

    pub fn apply_point(self, p: &LatticePoint) -> LatticePoint {
        let s = p.scale();
        match self {
            Symmetry::ReflectX => LatticePoint::new(s - p.x, p.y, p.level),
            Symmetry::ReflectY => LatticePoint::new(p.x, s - p.y, p.level),
            Symmetry::Transpose => LatticePoint::new(p.y, p.x, p.level),
        }
    }

    pub fn apply_cell(self, o: &CellOrigin) -> CellOrigin {
        let last = 3u64.pow(o.level) - 1;
        let (column, row) = match self {
            Symmetry::ReflectX => (last - o.column, o.row),
            Symmetry::ReflectY => (o.column, last - o.row),
            Symmetry::Transpose => (o.row, o.column),
        };
        CellOrigin {
            column,
            row,
            level: o.level,
        }
    }

    /// Node permutation induced on a vertex or cell graph.
    pub fn permutation(self, g: &GraphSkeleton) -> Option<Vec<usize>> {
        match &g.nodes {
            NodeSet::Points(points) => points
                .iter()
                .map(|p| g.index_of(&self.apply_point(p)))
                .collect(),
            NodeSet::Words { mode, level } => {
                let origins = cell_origins(*level, *mode);
                let index: HashMap<CellOrigin, usize> =
                    origins.iter().enumerate().map(|(i, o)| (*o, i)).collect();
                origins
                    .iter()
                    .map(|o| index.get(&self.apply_cell(o)).copied())
                    .collect()
            }
            NodeSet::Abstract(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn carpet(d: &[u8]) -> Word {
        Word::new(Mode::Carpet, d.to_vec()).unwrap()
    }

    /// Geometric image of the unit square's lower-left corner under
    /// `f_{w_1} o ... o f_{w_n}`, evaluated map by map in rationals.
    fn origin_by_maps(w: &Word) -> (u64, u64) {
        // Apply innermost map first, tracking (num_x, num_y, den).
        let (mut x, mut y, mut den) = (0u64, 0u64, 1u64);
        for &d in w.digits().iter().rev() {
            let (ox, oy) = OFFSETS[d as usize];
            // f_i(p) = (p + 2 p_i) / 3
            x += ox * den;
            y += oy * den;
            den *= 3;
        }
        let side = 3u64.pow(w.level());
        assert_eq!(den, side);
        (x, y)
    }

    #[test]
    fn cell_origin_examples() {
        let o = cell_origin(&carpet(&[0, 0]));
        assert_eq!((o.column, o.row, o.level), (0, 0, 2));
        let o = cell_origin(&carpet(&[4]));
        assert_eq!((o.column, o.row), (2, 2));
        let w = carpet(&[1, 5]);
        let o = cell_origin(&w);
        assert_eq!((o.column, o.row), (4, 2));
        assert_eq!(origin_by_maps(&w), (4, 2));
    }

    #[test]
    fn origins_match_map_composition() {
        for level in 1..=4 {
            for i in 0..Mode::Carpet.word_count(level) {
                let w = Word::from_index(Mode::Carpet, level, i).unwrap();
                let o = cell_origin(&w);
                assert_eq!((o.column, o.row), origin_by_maps(&w));
            }
        }
    }

    #[test]
    fn cell_origin_is_a_bijection_onto_valid_cells() {
        for level in 1..=4u32 {
            let origins = cell_origins(level, Mode::Carpet);
            assert_eq!(origins.len(), 8usize.pow(level));
            let set: HashSet<_> = origins.iter().copied().collect();
            assert_eq!(set.len(), origins.len());
            let side = 3u64.pow(level);
            let mut valid = 0;
            for c in 0..side {
                for r in 0..side {
                    let o = CellOrigin { column: c, row: r, level };
                    if o.is_valid() {
                        valid += 1;
                        assert!(set.contains(&o));
                    }
                }
            }
            assert_eq!(valid, origins.len());
        }
    }

    #[test]
    fn invalid_digits_rejected() {
        assert!(Word::new(Mode::Cross, vec![3]).is_err());
        assert!(Word::new(Mode::Carpet, vec![8]).is_err());
        assert!(Word::new(Mode::Cross, vec![7, 0]).is_err());
    }

    #[test]
    fn word_index_round_trip() {
        for mode in [Mode::Carpet, Mode::Cross] {
            for i in 0..mode.word_count(3) {
                let w = Word::from_index(mode, 3, i).unwrap();
                assert_eq!(w.index(), i);
            }
        }
    }

    #[test]
    fn cell_vertices_examples() {
        let v = cell_vertices(&Word::empty(Mode::Carpet));
        let expected: Vec<_> = OFFSETS.iter().map(|&(x, y)| LatticePoint::new(x, y, 0)).collect();
        assert_eq!(v, expected);

        let v: HashSet<_> = cell_vertices(&carpet(&[0])).iter().map(|p| (p.x, p.y)).collect();
        let expected: HashSet<_> =
            [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)].into_iter().collect();
        assert_eq!(v, expected);

        let cross = cell_vertices(&Word::new(Mode::Cross, vec![0]).unwrap());
        assert_eq!(cross.len(), 6);
        assert!(!cross.contains(&LatticePoint::new(2, 1, 1)));
        assert!(!cross.contains(&LatticePoint::new(0, 1, 1)));
    }

    /// Independent enumeration of the level-1 carpet vertex graph: every
    /// pair of points at distance 1/2 inside a common cell, counted per cell.
    fn brute_vertex_graph(level: u32, mode: Mode) -> (HashSet<(u64, u64)>, HashMap<((u64, u64), (u64, u64)), u32>) {
        let mut points = HashSet::new();
        let mut mult = HashMap::new();
        for i in 0..mode.word_count(level) {
            let w = Word::from_index(mode, level, i).unwrap();
            let verts: Vec<_> = cell_vertices(&w).iter().map(|p| (p.x, p.y)).collect();
            points.extend(verts.iter().copied());
            for a in 0..verts.len() {
                for b in a + 1..verts.len() {
                    let (p, q) = (verts[a], verts[b]);
                    let d2 = (p.0 as i64 - q.0 as i64).pow(2) + (p.1 as i64 - q.1 as i64).pow(2);
                    if d2 == 1 {
                        let key = if p < q { (p, q) } else { (q, p) };
                        *mult.entry(key).or_insert(0) += 1;
                    }
                }
            }
        }
        (points, mult)
    }

    #[test]
    fn vertex_graph_level_one_carpet() {
        let g = vertex_graph(1, Mode::Carpet).unwrap();
        assert_eq!(g.node_count(), 40);
        assert_eq!(g.edge_incidences(), 64);
        let (points, mult) = brute_vertex_graph(1, Mode::Carpet);
        assert_eq!(points.len(), 40);
        assert_eq!(g.edges.len(), mult.len());
        let pts = g.points().unwrap();
        for e in &g.edges {
            let (p, q) = (pts[e.a as usize], pts[e.b as usize]);
            assert_eq!(mult[&((p.x, p.y), (q.x, q.y))], e.multiplicity);
        }
        assert!(g.edges.iter().any(|e| e.multiplicity == 2));
        assert!(g.edges.iter().all(|e| e.multiplicity <= 2));
    }

    #[test]
    fn vertex_graph_matches_brute_force() {
        for (level, mode) in [(2, Mode::Carpet), (3, Mode::Carpet), (1, Mode::Cross), (2, Mode::Cross)] {
            let g = vertex_graph(level, mode).unwrap();
            let (points, mult) = brute_vertex_graph(level, mode);
            assert_eq!(g.node_count(), points.len());
            assert_eq!(g.edges.len(), mult.len());
            assert_eq!(g.edge_incidences(), mult.values().map(|&m| m as u64).sum::<u64>());
        }
    }

    #[test]
    fn cross_level_one() {
        let g = vertex_graph(1, Mode::Cross).unwrap();
        assert_eq!(g.edge_incidences(), 6 * 4);
        let c = cell_graph(2, Mode::Cross).unwrap();
        assert_eq!(c.node_count(), 36);
    }

    #[test]
    fn level_zero_rejected() {
        assert!(matches!(vertex_graph(0, Mode::Carpet), Err(Error::InvalidInput(_))));
        assert!(matches!(cell_graph(0, Mode::Carpet), Err(Error::InvalidInput(_))));
        assert!(matches!(vertex_graph(9, Mode::Carpet), Err(Error::Capacity(_))));
    }

    #[test]
    fn edge_incidences_and_lengths() {
        for level in 1..=4 {
            let g = vertex_graph(level, Mode::Carpet).unwrap();
            assert_eq!(g.edge_incidences(), 8u64.pow(level + 1));
            let pts = g.points().unwrap();
            for e in &g.edges {
                let (p, q) = (pts[e.a as usize], pts[e.b as usize]);
                assert_eq!(p.x.abs_diff(q.x) + p.y.abs_diff(q.y), 1);
                assert!(p.is_well_formed() && q.is_well_formed());
            }
        }
    }

    #[test]
    fn cell_graph_ring() {
        let g = cell_graph(1, Mode::Carpet).unwrap();
        assert_eq!(g.node_count(), 8);
        assert_eq!(g.edges.len(), 8);
        let adj = g.adjacency();
        for (i, nbrs) in adj.iter().enumerate() {
            let mut n: Vec<_> = nbrs.iter().map(|&(j, _)| j).collect();
            n.sort_unstable();
            let mut expected = vec![(i + 1) % 8, (i + 7) % 8];
            expected.sort_unstable();
            assert_eq!(n, expected, "ring neighbours of {i}");
        }
    }

    #[test]
    fn cell_graph_level_two_brute_force() {
        let g = cell_graph(2, Mode::Carpet).unwrap();
        assert_eq!(g.node_count(), 64);
        let origins = cell_origins(2, Mode::Carpet);
        let mut count = 0;
        for i in 0..64 {
            for j in i + 1..64 {
                let (a, b) = (origins[i], origins[j]);
                if a.column.abs_diff(b.column) + a.row.abs_diff(b.row) == 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(g.edges.len(), count);
        assert!(g.edges.iter().all(|e| e.a != e.b));
    }

    #[test]
    fn graphs_are_connected() {
        for level in 1..=5 {
            assert!(vertex_graph(level, Mode::Carpet).unwrap().is_connected());
            assert!(cell_graph(level, Mode::Carpet).unwrap().is_connected());
        }
        assert!(cell_graph(6, Mode::Carpet).unwrap().is_connected());
    }

    #[test]
    fn symmetries_are_automorphisms() {
        for level in 1..=3 {
            for g in [vertex_graph(level, Mode::Carpet).unwrap(), cell_graph(level, Mode::Carpet).unwrap()] {
                let edges: HashSet<(u32, u32, u32)> =
                    g.edges.iter().map(|e| (e.a, e.b, e.multiplicity)).collect();
                for s in Symmetry::ALL {
                    let perm = s.permutation(&g).expect("symmetry maps nodes to nodes");
                    for e in &g.edges {
                        let (a, b) = (perm[e.a as usize] as u32, perm[e.b as usize] as u32);
                        assert!(edges.contains(&(a.min(b), a.max(b), e.multiplicity)));
                    }
                }
            }
        }
    }

    #[test]
    fn membership() {
        assert!(vinfty_member(&LatticePoint::new(0, 0, 0)));
        // center of the removed unit cell (1,1) is (3,3) at scale 2
        assert!(!vinfty_member(&LatticePoint::new(3, 3, 0)));
        assert!(!vinfty_member(&LatticePoint::new(1, 3, 0)));
        // corners of the hole are still corners of neighbouring cells
        assert!(vinfty_member(&LatticePoint::new(2, 2, 0)));
        // hole of side 3 in the level-2 block: cells (3..6, 3..6) removed
        assert!(!vinfty_member(&LatticePoint::new(9, 8, 0)));
        assert!(vinfty_member(&LatticePoint::new(6, 7, 0)));
    }

    #[test]
    fn membership_agrees_with_finite_levels() {
        let level = 3;
        let g = vertex_graph(level, Mode::Carpet).unwrap();
        let pts: HashSet<_> = g.points().unwrap().iter().map(|p| (p.x, p.y)).collect();
        let side = 2 * 3u64.pow(level);
        for x in 0..side {
            for y in 0..side {
                assert_eq!(vinfty_member(&LatticePoint::new(x, y, 0)), pts.contains(&(x, y)), "({x},{y})");
            }
        }
    }

    #[test]
    fn vinfty_ball_small() {
        let z = LatticePoint::new(0, 0, 0);
        let b = vinfty_ball(&z, 1).unwrap();
        let pts = b.points().unwrap();
        assert_eq!(pts, &[LatticePoint::new(0, 0, 0), LatticePoint::new(0, 1, 0), LatticePoint::new(1, 0, 0)]);
        assert_eq!(b.boundary, vec![false, true, true]);

        let single = vinfty_ball(&z, 0).unwrap();
        assert_eq!(single.node_count(), 1);
        assert!(vinfty_ball(&LatticePoint::new(3, 3, 0), 2).is_err());
    }

    #[test]
    fn vinfty_ball_matches_finite_graph_locally() {
        // The graph inside [0,2*3^3] of V_infinity agrees with 3^3 V_3 with
        // unit conductances.
        let g = vertex_graph(3, Mode::Carpet).unwrap();
        let pts = g.points().unwrap();
        for e in &g.edges {
            let (p, q) = (pts[e.a as usize], pts[e.b as usize]);
            let nbrs = vinfty_neighbors(&LatticePoint::new(p.x, p.y, 0));
            assert!(nbrs.contains(&LatticePoint::new(q.x, q.y, 0)));
        }
    }

    #[test]
    fn export_round_trip() {
        let g = vertex_graph(1, Mode::Carpet).unwrap();
        let mut buf = Vec::new();
        g.write_export(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let (header, count, edges) = read_export(&text).unwrap();
        assert_eq!(header.scale, 6);
        assert_eq!(count, 40);
        assert_eq!(edges, g.edges);
        assert!(text.starts_with("{\"kind\":\"vertex\",\"level\":1,\"mode\":\"carpet\",\"scale\":6"));
    }
}
