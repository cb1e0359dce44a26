//! TSPLIB reading and writing.
//!
//! Vertices are 1-indexed in documents and 0-indexed everywhere else; the
//! conversion happens only in [`parse_instance`] and the writers.

use std::fmt::Write as _;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::sparsifier::SparsifiedInstance;

pub type Weight = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExplicitLayout {
    FullMatrix,
    UpperRow,
    LowerDiagRow,
    UpperDiagRow,
}

impl ExplicitLayout {
    fn keyword(self) -> &'static str {
        match self {
            ExplicitLayout::FullMatrix => "FULL_MATRIX",
            ExplicitLayout::UpperRow => "UPPER_ROW",
            ExplicitLayout::LowerDiagRow => "LOWER_DIAG_ROW",
            ExplicitLayout::UpperDiagRow => "UPPER_DIAG_ROW",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "FULL_MATRIX" => Some(ExplicitLayout::FullMatrix),
            "UPPER_ROW" => Some(ExplicitLayout::UpperRow),
            "LOWER_DIAG_ROW" => Some(ExplicitLayout::LowerDiagRow),
            "UPPER_DIAG_ROW" => Some(ExplicitLayout::UpperDiagRow),
            _ => None,
        }
    }

    /// Matrix cells `(row, col)` in the order they appear in a section.
    fn cells(self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..n {
            match self {
                ExplicitLayout::FullMatrix => out.extend((0..n).map(|j| (i, j))),
                ExplicitLayout::UpperRow => out.extend((i + 1..n).map(|j| (i, j))),
                ExplicitLayout::UpperDiagRow => out.extend((i..n).map(|j| (i, j))),
                ExplicitLayout::LowerDiagRow => out.extend((0..=i).map(|j| (i, j))),
            }
        }
        out
    }
}

/// How edge weights are derived for an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeWeightKind {
    Euc2d,
    Ceil2d,
    Att,
    Geo,
    Explicit(ExplicitLayout),
}

impl EdgeWeightKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EdgeWeightKind::Euc2d => "EUC_2D",
            EdgeWeightKind::Ceil2d => "CEIL_2D",
            EdgeWeightKind::Att => "ATT",
            EdgeWeightKind::Geo => "GEO",
            EdgeWeightKind::Explicit(_) => "EXPLICIT",
        }
    }

    pub fn explicit_layout(self) -> Option<ExplicitLayout> {
        match self {
            EdgeWeightKind::Explicit(l) => Some(l),
            _ => None,
        }
    }
}

/// TSPLIB `nint`: round half up, as `(int)(x + 0.5)` in the reference code.
fn nint(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn geo_radians(x: f64) -> f64 {
    const PI: f64 = 3.141592;
    let deg = x.trunc();
    let min = x - deg;
    PI * (deg + 5.0 * min / 3.0) / 180.0
}

fn coord_weight(kind: EdgeWeightKind, a: [f64; 2], b: [f64; 2]) -> Weight {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let w = match kind {
        EdgeWeightKind::Euc2d => nint((dx * dx + dy * dy).sqrt()),
        EdgeWeightKind::Ceil2d => (dx * dx + dy * dy).sqrt().ceil() as i64,
        EdgeWeightKind::Att => {
            let r = ((dx * dx + dy * dy) / 10.0).sqrt();
            let t = nint(r);
            if (t as f64) < r {
                t + 1
            } else {
                t
            }
        }
        EdgeWeightKind::Geo => {
            const RRR: f64 = 6378.388;
            let (lat_a, lon_a) = (geo_radians(a[0]), geo_radians(a[1]));
            let (lat_b, lon_b) = (geo_radians(b[0]), geo_radians(b[1]));
            let q1 = (lon_a - lon_b).cos();
            let q2 = (lat_a - lat_b).cos();
            let q3 = (lat_a + lat_b).cos();
            (RRR * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0) as i64
        }
        EdgeWeightKind::Explicit(_) => unreachable!("explicit weights are not derived from coordinates"),
    };
    w.max(0) as Weight
}

/// A symmetric TSP instance with its fully expanded weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    name: String,
    n: usize,
    kind: EdgeWeightKind,
    coords: Option<Vec<[f64; 2]>>,
    weights: Vec<Weight>,
    edge_list: Option<Vec<Edge>>,
}

impl Instance {
    pub fn from_coords(name: impl Into<String>, kind: EdgeWeightKind, coords: Vec<[f64; 2]>) -> Result<Self> {
        if matches!(kind, EdgeWeightKind::Explicit(_)) {
            return Err(Error::Validation("explicit weight kind needs a matrix, not coordinates".into()));
        }
        let n = coords.len();
        if n == 0 {
            return Err(Error::Validation("instance has no vertices".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::Validation(format!("non-finite coordinate for vertex {}", i + 1)));
        }
        let mut weights = vec![0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w = coord_weight(kind, coords[i], coords[j]);
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        Ok(Instance { name: name.into(), n, kind, coords: Some(coords), weights, edge_list: None })
    }

    /// Builds an explicit instance from a row-major `n x n` matrix. The diagonal is ignored.
    pub fn from_matrix(name: impl Into<String>, layout: ExplicitLayout, n: usize, mut matrix: Vec<Weight>) -> Result<Self> {
        if n == 0 || matrix.len() != n * n {
            return Err(Error::Validation(format!("matrix has {} entries, expected {}", matrix.len(), n * n)));
        }
        for i in 0..n {
            matrix[i * n + i] = 0;
            for j in i + 1..n {
                if matrix[i * n + j] != matrix[j * n + i] {
                    return Err(Error::Validation(format!(
                        "asymmetric weights: w({},{}) = {} but w({},{}) = {}",
                        i + 1,
                        j + 1,
                        matrix[i * n + j],
                        j + 1,
                        i + 1,
                        matrix[j * n + i]
                    )));
                }
            }
        }
        Ok(Instance {
            name: name.into(),
            n,
            kind: EdgeWeightKind::Explicit(layout),
            coords: None,
            weights: matrix,
            edge_list: None,
        })
    }

    /// Attaches a retained-edge subset (0-indexed, each edge once).
    pub fn with_edge_list(mut self, mut edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.u >= e.v || e.v >= self.n {
                return Err(Error::Validation(format!("invalid edge ({}, {})", e.u + 1, e.v + 1)));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate edge in edge list".into()));
        }
        self.edge_list = Some(edges);
        Ok(self)
    }

    pub fn without_edge_list(mut self) -> Self {
        self.edge_list = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges of the complete graph.
    pub fn m(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn kind(&self) -> EdgeWeightKind {
        self.kind
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn explicit_weights(&self) -> Option<&[Weight]> {
        match self.kind {
            EdgeWeightKind::Explicit(_) => Some(&self.weights),
            _ => None,
        }
    }

    pub fn edge_list(&self) -> Option<&[Edge]> {
        self.edge_list.as_deref()
    }

    /// Unchecked lookup for hot loops. `w(u, u)` is 0.
    #[inline]
    pub fn w(&self, u: usize, v: usize) -> Weight {
        self.weights[u * self.n + v]
    }

    /// Checked weight lookup; self-loops do not exist.
    pub fn edge_weight(&self, u: usize, v: usize) -> Result<Weight> {
        if u == v {
            return Err(Error::Domain(format!("no self-loop at vertex {}", u + 1)));
        }
        if u >= self.n || v >= self.n {
            return Err(Error::Domain(format!("vertex out of range 1..{}", self.n)));
        }
        Ok(self.w(u, v))
    }

    pub fn max_weight(&self) -> Weight {
        let mut best = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.max(self.w(i, j));
            }
        }
        best
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| err(line, format!("invalid number {tok:?}")))
}

enum Section {
    None,
    Coords,
    Weights,
    Edges,
}

/// Parses a TSPLIB document.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut name = String::from("unnamed");
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut weight_format: Option<String> = None;
    let mut coords: Vec<Option<[f64; 2]>> = Vec::new();
    let mut saw_coords = false;
    let mut weight_tokens: Vec<(i64, usize)> = Vec::new();
    let mut saw_weights = false;
    let mut edges: Option<Vec<Edge>> = None;
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or("");
        let numeric = first.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
        if numeric {
            match section {
                Section::Coords => {
                    let dim = dimension.ok_or(Error::MissingKeyword("DIMENSION"))?;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    if toks.len() < 3 {
                        return Err(err(line_no, "coordinate line needs id, x and y"));
                    }
                    let id: usize = parse_num(toks[0], line_no)?;
                    if id == 0 || id > dim {
                        return Err(err(line_no, format!("node id {id} outside 1..{dim}")));
                    }
                    coords[id - 1] = Some([parse_num(toks[1], line_no)?, parse_num(toks[2], line_no)?]);
                }
                Section::Weights => {
                    for tok in line.split_whitespace() {
                        let v: f64 = parse_num(tok, line_no)?;
                        if v.fract() != 0.0 {
                            return Err(Error::Validation(format!("line {line_no}: non-integer weight {tok}")));
                        }
                        weight_tokens.push((v as i64, line_no));
                    }
                }
                Section::Edges => {
                    let list = edges.get_or_insert_with(Vec::new);
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    if toks[0] == "-1" {
                        section = Section::None;
                        continue;
                    }
                    if toks.len() < 2 {
                        return Err(err(line_no, "edge line needs two endpoints"));
                    }
                    let a: usize = parse_num(toks[0], line_no)?;
                    let b: usize = parse_num(toks[1], line_no)?;
                    if a == 0 || b == 0 || a == b {
                        return Err(Error::Validation(format!("line {line_no}: invalid edge ({a}, {b})")));
                    }
                    list.push(Edge::new(a - 1, b - 1));
                }
                Section::None => return Err(err(line_no, "numeric data outside a section")),
            }
            continue;
        }

        section = Section::None;
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (first, line[first.len()..].trim()),
        };
        match key {
            "NAME" => name = value.to_string(),
            "TYPE" => {
                if value != "TSP" {
                    return Err(Error::UnsupportedType(value.to_string()));
                }
            }
            "DIMENSION" => {
                let d: usize = parse_num(value, line_no)?;
                dimension = Some(d);
                coords = vec![None; d];
            }
            "EDGE_WEIGHT_TYPE" => weight_type = Some(value.to_string()),
            "EDGE_WEIGHT_FORMAT" => weight_format = Some(value.to_string()),
            "EDGE_DATA_FORMAT" => {
                if value != "EDGE_LIST" {
                    return Err(err(line_no, format!("unsupported edge data format {value}")));
                }
            }
            "NODE_COORD_SECTION" => {
                if dimension.is_none() {
                    return Err(Error::MissingKeyword("DIMENSION"));
                }
                saw_coords = true;
                section = Section::Coords;
            }
            "EDGE_WEIGHT_SECTION" => {
                saw_weights = true;
                section = Section::Weights;
            }
            "EDGE_DATA_SECTION" => {
                edges.get_or_insert_with(Vec::new);
                section = Section::Edges;
            }
            "EOF" => break,
            "COMMENT" | "NODE_COORD_TYPE" | "DISPLAY_DATA_TYPE" => {}
            other => warn!("ignoring unknown TSPLIB keyword {other:?} at line {line_no}"),
        }
    }

    let n = dimension.ok_or(Error::MissingKeyword("DIMENSION"))?;
    let wt = weight_type.ok_or(Error::MissingKeyword("EDGE_WEIGHT_TYPE"))?;
    let kind = match wt.as_str() {
        "EUC_2D" => EdgeWeightKind::Euc2d,
        "CEIL_2D" => EdgeWeightKind::Ceil2d,
        "ATT" => EdgeWeightKind::Att,
        "GEO" => EdgeWeightKind::Geo,
        "EXPLICIT" => {
            let f = weight_format.ok_or(Error::MissingKeyword("EDGE_WEIGHT_FORMAT"))?;
            let layout = ExplicitLayout::from_keyword(&f)
                .ok_or_else(|| Error::UnsupportedType(format!("EDGE_WEIGHT_FORMAT {f}")))?;
            EdgeWeightKind::Explicit(layout)
        }
        other => return Err(Error::UnsupportedType(format!("EDGE_WEIGHT_TYPE {other}"))),
    };

    let inst = match kind {
        EdgeWeightKind::Explicit(layout) => {
            if !saw_weights {
                return Err(Error::MissingKeyword("EDGE_WEIGHT_SECTION"));
            }
            let cells = layout.cells(n);
            if weight_tokens.len() != cells.len() {
                return Err(Error::Validation(format!(
                    "EDGE_WEIGHT_SECTION has {} values, {} expects {}",
                    weight_tokens.len(),
                    layout.keyword(),
                    cells.len()
                )));
            }
            let mut matrix = vec![0; n * n];
            for (&(i, j), &(v, line)) in cells.iter().zip(&weight_tokens) {
                if v < 0 {
                    return Err(Error::Validation(format!("line {line}: negative weight {v}")));
                }
                matrix[i * n + j] = v as Weight;
                if layout != ExplicitLayout::FullMatrix {
                    matrix[j * n + i] = v as Weight;
                }
            }
            Instance::from_matrix(name, layout, n, matrix)?
        }
        _ => {
            if !saw_coords {
                return Err(Error::MissingKeyword("NODE_COORD_SECTION"));
            }
            let pts = coords
                .into_iter()
                .enumerate()
                .map(|(i, c)| c.ok_or_else(|| Error::Validation(format!("missing coordinates for node {}", i + 1))))
                .collect::<Result<Vec<_>>>()?;
            Instance::from_coords(name, kind, pts)?
        }
    };
    match edges {
        Some(list) => inst.with_edge_list(list),
        None => Ok(inst),
    }
}

fn write_header(out: &mut String, inst: &Instance, comment: Option<&str>) {
    let _ = writeln!(out, "NAME: {}", inst.name());
    if let Some(c) = comment {
        let _ = writeln!(out, "COMMENT: {c}");
    }
    let _ = writeln!(out, "TYPE: TSP");
    let _ = writeln!(out, "DIMENSION: {}", inst.n());
    let _ = writeln!(out, "EDGE_WEIGHT_TYPE: {}", inst.kind().keyword());
    if let Some(layout) = inst.kind().explicit_layout() {
        let _ = writeln!(out, "EDGE_WEIGHT_FORMAT: {}", layout.keyword());
    }
}

fn write_body(out: &mut String, inst: &Instance) {
    match inst.kind() {
        EdgeWeightKind::Explicit(layout) => {
            let n = inst.n();
            let _ = writeln!(out, "EDGE_WEIGHT_SECTION");
            let mut row = usize::MAX;
            let mut line = String::new();
            for (i, j) in layout.cells(n) {
                if i != row && !line.is_empty() {
                    let _ = writeln!(out, "{}", line.trim_end());
                    line.clear();
                }
                row = i;
                let _ = write!(line, "{} ", inst.w(i, j));
            }
            if !line.is_empty() {
                let _ = writeln!(out, "{}", line.trim_end());
            }
        }
        _ => {
            let _ = writeln!(out, "NODE_COORD_SECTION");
            for (i, c) in inst.coords().unwrap_or_default().iter().enumerate() {
                let _ = writeln!(out, "{} {} {}", i + 1, c[0], c[1]);
            }
        }
    }
}

/// Serializes an instance (and its edge list, if any) as a TSPLIB document.
pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::new();
    write_header(&mut out, inst, None);
    if inst.edge_list().is_some() {
        let _ = writeln!(out, "EDGE_DATA_FORMAT: EDGE_LIST");
    }
    write_body(&mut out, inst);
    if let Some(edges) = inst.edge_list() {
        write_edge_section(&mut out, edges);
    }
    let _ = writeln!(out, "EOF");
    out
}

fn write_edge_section(out: &mut String, edges: &[Edge]) {
    let _ = writeln!(out, "EDGE_DATA_SECTION");
    for e in edges {
        let _ = writeln!(out, "{} {}", e.u + 1, e.v + 1);
    }
    let _ = writeln!(out, "-1");
}

/// Serializes a pruned instance: the base weights plus its retained edges as an edge list.
pub fn write_sparsified(s: &SparsifiedInstance) -> Result<String> {
    if s.retained().is_empty() {
        return Err(Error::Validation("refusing to write a sparsified instance with no retained edges".into()));
    }
    let base = s.base();
    let mut out = String::new();
    let comment = format!("sparsified: {} of {} edges retained, {} inserted", s.m_hat(), base.m(), s.inserted().len());
    write_header(&mut out, base, Some(&comment));
    let _ = writeln!(out, "EDGE_DATA_FORMAT: EDGE_LIST");
    write_body(&mut out, base);
    write_edge_section(&mut out, s.retained());
    let _ = writeln!(out, "EOF");
    Ok(out)
}

/// Uniform random EUC_2D instance on `[0, box_size]^2`; identical arguments give identical instances.
pub fn generate_random_instance(n: usize, seed: u64, box_size: f64) -> Result<Instance> {
    if n < 4 {
        return Err(Error::Domain(format!("random instances need n >= 4, got {n}")));
    }
    if !(box_size > 0.0 && box_size.is_finite()) {
        return Err(Error::Domain(format!("coordinate bound must be positive, got {box_size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n).map(|_| [rng.gen_range(0.0..=box_size), rng.gen_range(0.0..=box_size)]).collect();
    Instance::from_coords(format!("rand{n}_s{seed}"), EdgeWeightKind::Euc2d, coords)
}
