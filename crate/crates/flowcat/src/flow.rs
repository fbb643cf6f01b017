//! Flow categories and flow simplices as formal stratified data.
//!
//! A flow category stores, per ordered object pair and energy, a list of
//! formal components: dimension, obstruction rank, a count, and an
//! optional codimension-one facet decomposition. A flow simplex extends
//! this to a payload per nonempty vertex subset of a simplex, with
//! strong-equivalence records tying a face's payload to the matching
//! stratum layer of a larger face.
//!
//! Validation checks properness, the framing dimension equation, facet
//! parity, exact coverage of broken products, and the coherence of the
//! equivalence records. Builders for faces, degeneracies, the diagonal,
//! suspension, object restriction, and the mapping cone keep these
//! invariants by construction.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::arcs::{Arc, ArcEdge, ArcVertex, GammaSpec, Ratio};
use crate::report::CheckReport;

/// A pair of bundle ranks; the virtual value is `plus - minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VirtualDim {
    pub plus: u32,
    pub minus: u32,
}

impl VirtualDim {
    pub fn value(&self) -> i64 {
        self.plus as i64 - self.minus as i64
    }
}

/// Side of the normal direction a facet decomposes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalSign {
    Plus,
    Minus,
}

/// Label of a codimension-one facet of a component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum FacetKind {
    /// Breaking at the object `elem` of set `set`, with the given energy
    /// on the left piece.
    Break { set: usize, elem: usize, left_energy: Ratio },
    /// The stratum forgetting interior index `index`.
    ForgetVertex { index: usize },
}

impl FacetKind {
    /// Breaks decompose on the minus side, forgotten vertices on the plus
    /// side.
    pub fn normal_sign(&self) -> NormalSign {
        match self {
            FacetKind::Break { .. } => NormalSign::Minus,
            FacetKind::ForgetVertex { .. } => NormalSign::Plus,
        }
    }
}

/// One product cell of a facet: the component ids of its factors (two for
/// a break, one for a forgotten vertex) and an orientation sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetPiece {
    pub factors: Vec<String>,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    pub label: FacetKind,
    pub pieces: Vec<FacetPiece>,
}

/// A formal component of a morphism space: the shadow of a derived chart.
///
/// `count` is meaningful only at virtual dimension zero. `facets` is
/// required at virtual dimension one and optional elsewhere; `None` means
/// the decomposition is unavailable, not empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalComponent {
    pub id: String,
    pub stratum: Arc,
    pub total_dim: u32,
    pub obstruction_rank: u32,
    pub count: BigInt,
    pub facets: Option<Vec<Facet>>,
}

impl FormalComponent {
    pub fn virtual_dim(&self) -> i64 {
        self.total_dim as i64 - self.obstruction_rank as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowObject {
    pub id: String,
    pub v: VirtualDim,
    pub dim: i64,
}

/// Cells of a morphism payload: components keyed by (source element,
/// target element, energy).
pub type Cells = BTreeMap<(usize, usize, Ratio), Vec<FormalComponent>>;

/// A flow category: objects with virtual dimensions plus formal component
/// data per (p, q, energy).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowCategory {
    pub gamma: GammaSpec,
    pub objects: Vec<FlowObject>,
    pub components: Cells,
    /// Whether counts and facet signs carry orientations over the
    /// integers; otherwise only parities are meaningful.
    pub integer_signs: bool,
    /// Virtual dimension of the twisting summand per object pair; empty
    /// for the framed case.
    pub defect: BTreeMap<(usize, usize), i64>,
}

impl FlowCategory {
    pub fn empty(gamma: GammaSpec) -> Self {
        FlowCategory {
            gamma,
            objects: Vec::new(),
            components: Cells::new(),
            integer_signs: true,
            defect: BTreeMap::new(),
        }
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }
}

/// A record tying the payload of a face to the matching stratum layer of
/// a larger face: a component bijection plus the rank both dimensions
/// grow by.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivRecord {
    pub added_rank: u32,
    pub map: BTreeMap<String, String>,
}

/// A flow simplex: per nonempty vertex subset (as a bitmask) a morphism
/// payload from the least to the greatest vertex's object set, plus
/// equivalence records for dropping an interior vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSimplex {
    pub gamma: GammaSpec,
    pub vertices: Vec<Vec<FlowObject>>,
    pub payloads: BTreeMap<u32, Cells>,
    pub equivalences: BTreeMap<(u32, usize), EquivRecord>,
    pub integer_signs: bool,
}

impl FlowSimplex {
    pub fn n(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn full_mask(&self) -> u32 {
        (1u32 << self.vertices.len()) - 1
    }

    pub fn payload(&self, mask: u32) -> Option<&Cells> {
        self.payloads.get(&mask)
    }
}

/// A flow bimodule is a flow 1-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowBimodule(pub FlowSimplex);

impl FlowBimodule {
    pub fn new(s: FlowSimplex) -> Result<Self, String> {
        if s.n() != 1 {
            return Err(format!("a bimodule is a 1-simplex, got n = {}", s.n()));
        }
        Ok(FlowBimodule(s))
    }

    pub fn simplex(&self) -> &FlowSimplex {
        &self.0
    }

    pub fn source_category(&self) -> FlowCategory {
        vertex_category(&self.0, 0)
    }

    pub fn target_category(&self) -> FlowCategory {
        vertex_category(&self.0, 1)
    }

    pub fn edge_cells(&self) -> &Cells {
        static EMPTY: std::sync::OnceLock<Cells> = std::sync::OnceLock::new();
        self.0.payloads.get(&0b11).unwrap_or_else(|| EMPTY.get_or_init(Cells::new))
    }
}

fn mask_members(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

fn mask_of(members: &[usize]) -> u32 {
    members.iter().fold(0u32, |m, &i| m | (1 << i))
}

/// The single-vertex arc from `p` in set `min_set` to `r` in set
/// `max_set` with active indices `sets` and the given energy.
pub fn single_vertex_arc(
    min_set: usize,
    p: usize,
    max_set: usize,
    r: usize,
    sets: BTreeSet<usize>,
    energy: Ratio,
) -> Arc {
    Arc {
        edges: vec![ArcEdge { set: min_set, elem: p }, ArcEdge { set: max_set, elem: r }],
        verts: vec![ArcVertex { sets, energy }],
    }
}

/// Wraps a flow category as a 0-simplex.
pub fn category_to_simplex(f: &FlowCategory) -> FlowSimplex {
    let mut payloads = BTreeMap::new();
    payloads.insert(0b1, f.components.clone());
    FlowSimplex {
        gamma: f.gamma,
        vertices: vec![f.objects.clone()],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: f.integer_signs,
    }
}

/// Extracts the flow category at vertex `i` of a simplex.
pub fn vertex_category(s: &FlowSimplex, i: usize) -> FlowCategory {
    let mask = 1u32 << i;
    let mut components = s.payloads.get(&mask).cloned().unwrap_or_default();
    // Vertex payload arcs use set label i; renumber to the singleton 0.
    for comps in components.values_mut() {
        for c in comps.iter_mut() {
            for e in &mut c.stratum.edges {
                e.set = 0;
            }
            if let Some(facets) = &mut c.facets {
                for f in facets {
                    if let FacetKind::Break { set, .. } = &mut f.label {
                        *set = 0;
                    }
                }
            }
            c.id = map_tag_indices(&c.id, &|_| 0);
            if let Some(facets) = &mut c.facets {
                for f in facets {
                    for piece in &mut f.pieces {
                        for factor in &mut piece.factors {
                            *factor = map_tag_indices(factor, &|_| 0);
                        }
                    }
                }
            }
        }
    }
    FlowCategory {
        gamma: s.gamma,
        objects: s.vertices[i].clone(),
        components,
        integer_signs: s.integer_signs,
        defect: BTreeMap::new(),
    }
}

// ---- component id tags -------------------------------------------------
//
// Degeneracies decorate component ids with layer tags "D{k}:" (the
// duplicated index k is active) and "m{k}:" (it is missing), kept sorted
// by index so the two orders of nested degeneracies produce identical
// ids. Faces and degeneracies renumber tag indices alongside set labels.

fn parse_tags(id: &str) -> (Vec<(usize, char)>, String) {
    let mut tags = Vec::new();
    let mut rest = id;
    loop {
        let bytes = rest.as_bytes();
        if bytes.is_empty() || (bytes[0] != b'D' && bytes[0] != b'm') {
            break;
        }
        let mut i = 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == 1 || i >= bytes.len() || bytes[i] != b':' {
            break;
        }
        let idx: usize = rest[1..i].parse().expect("digits");
        tags.push((idx, bytes[0] as char));
        rest = &rest[i + 1..];
    }
    (tags, rest.to_string())
}

fn render_tags(tags: &[(usize, char)], base: &str) -> String {
    let mut out = String::new();
    for (idx, kind) in tags {
        out.push(*kind);
        out.push_str(&idx.to_string());
        out.push(':');
    }
    out.push_str(base);
    out
}

fn add_tag(id: &str, kind: char, index: usize) -> String {
    let (mut tags, base) = parse_tags(id);
    let pos = tags.partition_point(|(i, _)| *i < index);
    tags.insert(pos, (index, kind));
    render_tags(&tags, &base)
}

fn map_tag_indices(id: &str, f: &dyn Fn(usize) -> usize) -> String {
    let (tags, base) = parse_tags(id);
    let mapped: Vec<(usize, char)> = tags.into_iter().map(|(i, k)| (f(i), k)).collect();
    render_tags(&mapped, &base)
}

/// Renumbers every set index in a component (stratum arc, facet labels,
/// id tags, factor id tags) through `f`, which must be strictly monotone
/// on the indices present.
fn map_component(c: &FormalComponent, f: &dyn Fn(usize) -> usize) -> FormalComponent {
    let mut out = c.clone();
    for e in &mut out.stratum.edges {
        e.set = f(e.set);
    }
    for v in &mut out.stratum.verts {
        v.sets = v.sets.iter().map(|&m| f(m)).collect();
    }
    out.id = map_tag_indices(&out.id, f);
    if let Some(facets) = &mut out.facets {
        for facet in facets {
            match &mut facet.label {
                FacetKind::Break { set, .. } => *set = f(*set),
                FacetKind::ForgetVertex { index } => *index = f(*index),
            }
            for piece in &mut facet.pieces {
                for factor in &mut piece.factors {
                    *factor = map_tag_indices(factor, f);
                }
            }
        }
    }
    out
}

pub(crate) fn map_cells(cells: &Cells, f: &dyn Fn(usize) -> usize) -> Cells {
    cells
        .iter()
        .map(|(k, comps)| (k.clone(), comps.iter().map(|c| map_component(c, f)).collect()))
        .collect()
}

// ---- validation --------------------------------------------------------

struct PayloadIndex<'a> {
    /// id -> (cell key, component position)
    by_id: BTreeMap<&'a str, (&'a (usize, usize, Ratio), usize)>,
}

fn index_payload(cells: &Cells) -> Result<PayloadIndex<'_>, String> {
    let mut by_id = BTreeMap::new();
    for (key, comps) in cells {
        for (i, c) in comps.iter().enumerate() {
            if by_id.insert(c.id.as_str(), (key, i)).is_some() {
                return Err(format!("duplicate component id {:?}", c.id));
            }
        }
    }
    Ok(PayloadIndex { by_id })
}

fn comp_at<'a>(cells: &'a Cells, idx: &PayloadIndex<'a>, id: &str) -> Option<&'a FormalComponent> {
    let (key, i) = idx.by_id.get(id)?;
    Some(&cells[*key][*i])
}

/// Validates a flow simplex: structure, framing, properness of vertex
/// categories, facet decompositions with parity, exact break coverage,
/// and equivalence-record coherence. `defect` applies to singleton-mask
/// cells only (the flow-category case).
pub fn validate_flow_simplex_with(
    s: &FlowSimplex,
    defect: Option<&BTreeMap<(usize, usize), i64>>,
) -> CheckReport {
    let mut report = CheckReport::passing();
    let n = s.n();
    let full = s.full_mask();

    for (&mask, cells) in &s.payloads {
        if mask == 0 || mask & !full != 0 {
            report.push(format!("payload mask {mask:#b} out of range"));
            continue;
        }
        let members = mask_members(mask);
        let (min_v, max_v) = (members[0], *members.last().unwrap());
        let interior: BTreeSet<usize> =
            members.iter().copied().filter(|&v| v != min_v && v != max_v).collect();
        let span = members.len();

        let index = match index_payload(cells) {
            Ok(i) => i,
            Err(e) => {
                report.push(format!("payload {mask:#b}: {e}"));
                continue;
            }
        };

        for ((p, r, lam), comps) in cells {
            if *p >= s.vertices[min_v].len() || *r >= s.vertices[max_v].len() {
                report.push(format!("payload {mask:#b}: cell ({p},{r}) object out of range"));
                continue;
            }
            if s.gamma == GammaSpec::Trivial && !lam.is_zero() {
                report.push(format!("payload {mask:#b}: nonzero energy under the trivial monoid"));
            }
            if span == 1 && !s.gamma.admits(lam) {
                report.push(format!("payload {mask:#b}: energy {lam} not a genuine monoid element"));
            }
            let dim_p = s.vertices[min_v][*p].dim;
            let dim_r = s.vertices[max_v][*r].dim;
            for c in comps {
                // Stratum arc: the single-vertex arc of this cell.
                let arc_ok = c.stratum.edges.len() == 2
                    && c.stratum.verts.len() == 1
                    && c.stratum.edges[0] == ArcEdge { set: min_v, elem: *p }
                    && c.stratum.edges[1] == ArcEdge { set: max_v, elem: *r }
                    && c.stratum.verts[0].energy == *lam
                    && c.stratum.verts[0].sets.iter().all(|m| interior.contains(m));
                if !arc_ok {
                    report.push(format!("component {}: stratum arc does not match its cell", c.id));
                    continue;
                }
                // Framing dimension equation. Omitting an interior vertex
                // element moves the component one stratum deeper.
                let d = defect
                    .filter(|_| span == 1)
                    .and_then(|m| m.get(&(*p, *r)))
                    .copied()
                    .unwrap_or(0);
                let depth = (interior.len() - c.stratum.verts[0].sets.len()) as i64;
                let expected = dim_p - dim_r + span as i64 - 2 - depth + d;
                if c.virtual_dim() != expected {
                    report.push(format!(
                        "component {}: virtual dimension {} but the framing equation gives {}",
                        c.id,
                        c.virtual_dim(),
                        expected
                    ));
                }
                if c.virtual_dim() == 1 && c.facets.is_none() {
                    report.push(format!(
                        "component {}: virtual dimension one requires a facet decomposition",
                        c.id
                    ));
                }
                if let Some(facets) = &c.facets {
                    validate_facets(s, mask, &members, cells, &index, (*p, *r, lam), c, facets, &mut report);
                }
            }
        }

        // Exact coverage: every ordered product of virtual-dimension-zero
        // components across a break position appears exactly once.
        coverage_check(s, mask, &members, cells, &mut report);

        // Properness of vertex categories.
        if span == 1 {
            properness_check(s, mask, min_v, cells, &mut report);
        }
    }

    equivalence_check(s, &mut report);

    let _ = n;
    report
}

pub fn validate_flow_simplex(s: &FlowSimplex) -> CheckReport {
    validate_flow_simplex_with(s, None)
}

/// Validates a flow category by wrapping it as a 0-simplex, plus the
/// object-table consistency checks.
pub fn validate_flow_category(f: &FlowCategory) -> CheckReport {
    let mut report = CheckReport::passing();
    let mut seen = BTreeSet::new();
    for o in &f.objects {
        if !seen.insert(o.id.clone()) {
            report.push(format!("duplicate object id {:?}", o.id));
        }
        if o.dim != o.v.value() {
            report.push(format!(
                "object {:?}: dim {} differs from virtual value {}",
                o.id,
                o.dim,
                o.v.value()
            ));
        }
    }
    let s = category_to_simplex(f);
    report.absorb(validate_flow_simplex_with(&s, Some(&f.defect)));
    report
}

#[allow(clippy::too_many_arguments)]
fn validate_facets(
    s: &FlowSimplex,
    _mask: u32,
    members: &[usize],
    cells: &Cells,
    index: &PayloadIndex<'_>,
    cell: (usize, usize, &Ratio),
    c: &FormalComponent,
    facets: &[Facet],
    report: &mut CheckReport,
) {
    let (p, r, lam) = cell;
    let (min_v, max_v) = (members[0], *members.last().unwrap());
    let own_v = c.virtual_dim();
    let mut parity = BigInt::zero();
    let mut unsigned_parity = BigInt::zero();
    for facet in facets {
        match &facet.label {
            FacetKind::Break { set, elem, left_energy } => {
                if !members.contains(set) {
                    report.push(format!("component {}: break at set {set} outside its face", c.id));
                    continue;
                }
                if *elem >= s.vertices[*set].len() {
                    report.push(format!("component {}: break object out of range", c.id));
                    continue;
                }
                let right_energy = lam - left_energy;
                let left_mask = mask_of(&members.iter().copied().filter(|&v| v <= *set).collect::<Vec<_>>());
                let right_mask = mask_of(&members.iter().copied().filter(|&v| v >= *set).collect::<Vec<_>>());
                let left_cells = s.payloads.get(&left_mask);
                let right_cells = s.payloads.get(&right_mask);
                for piece in &facet.pieces {
                    if piece.sign != 1 && piece.sign != -1 {
                        report.push(format!("component {}: facet sign must be ±1", c.id));
                    }
                    if piece.factors.len() != 2 {
                        report.push(format!("component {}: break pieces have two factors", c.id));
                        continue;
                    }
                    let left = left_cells.and_then(|lc| {
                        index_payload(lc).ok().and_then(|ix| comp_at(lc, &ix, &piece.factors[0]).cloned())
                    });
                    let right = right_cells.and_then(|rc| {
                        index_payload(rc).ok().and_then(|ix| comp_at(rc, &ix, &piece.factors[1]).cloned())
                    });
                    let (Some(left), Some(right)) = (left, right) else {
                        report.push(format!(
                            "component {}: break piece ({}, {}) does not resolve",
                            c.id, piece.factors[0], piece.factors[1]
                        ));
                        continue;
                    };
                    let lkey = (p, *elem, left_energy.clone());
                    let rkey = (*elem, r, right_energy.clone());
                    let lcell = (left.stratum.edges[0].elem, left.stratum.edges[1].elem, left.stratum.verts[0].energy.clone());
                    let rcell = (right.stratum.edges[0].elem, right.stratum.edges[1].elem, right.stratum.verts[0].energy.clone());
                    if lcell != lkey || rcell != rkey {
                        report.push(format!(
                            "component {}: break factors sit in the wrong cells",
                            c.id
                        ));
                        continue;
                    }
                    if left.virtual_dim() + right.virtual_dim() != own_v - 1 {
                        report.push(format!(
                            "component {}: facet piece virtual dimensions sum to {} instead of {}",
                            c.id,
                            left.virtual_dim() + right.virtual_dim(),
                            own_v - 1
                        ));
                    }
                    if own_v == 1 {
                        let prod = &left.count * &right.count;
                        parity += BigInt::from(piece.sign) * &prod;
                        unsigned_parity += prod.abs();
                    }
                }
            }
            FacetKind::ForgetVertex { index: k } => {
                if !members.contains(k) || *k == min_v || *k == max_v {
                    report.push(format!(
                        "component {}: forgotten index {k} is not interior to its face",
                        c.id
                    ));
                    continue;
                }
                for piece in &facet.pieces {
                    if piece.sign != 1 && piece.sign != -1 {
                        report.push(format!("component {}: facet sign must be ±1", c.id));
                    }
                    if piece.factors.len() != 1 {
                        report.push(format!(
                            "component {}: forgotten-vertex pieces have one factor",
                            c.id
                        ));
                        continue;
                    }
                    let Some(other) = comp_at(cells, index, &piece.factors[0]) else {
                        report.push(format!(
                            "component {}: forgotten-vertex piece {} does not resolve",
                            c.id, piece.factors[0]
                        ));
                        continue;
                    };
                    let same_cell = other.stratum.edges == c.stratum.edges
                        && other.stratum.verts[0].energy == c.stratum.verts[0].energy;
                    let mut expected_sets = c.stratum.verts[0].sets.clone();
                    let removed = expected_sets.remove(k);
                    if !same_cell || !removed || other.stratum.verts[0].sets != expected_sets {
                        report.push(format!(
                            "component {}: forgotten-vertex piece {} is not its index-{k} face",
                            c.id, piece.factors[0]
                        ));
                        continue;
                    }
                    if other.virtual_dim() != own_v - 1 {
                        report.push(format!(
                            "component {}: forgotten-vertex piece has virtual dimension {} instead of {}",
                            c.id,
                            other.virtual_dim(),
                            own_v - 1
                        ));
                    }
                    if own_v == 1 {
                        parity += BigInt::from(piece.sign) * &other.count;
                        unsigned_parity += other.count.abs();
                    }
                }
            }
        }
    }
    if own_v == 1 {
        if s.integer_signs {
            if !parity.is_zero() {
                report.push(format!(
                    "component {}: signed boundary count {} is nonzero",
                    c.id, parity
                ));
            }
        } else if (&unsigned_parity % BigInt::from(2)) != BigInt::zero() {
            report.push(format!(
                "component {}: boundary point count {} is odd (signs unavailable)",
                c.id, unsigned_parity
            ));
        }
    }
}

fn coverage_check(s: &FlowSimplex, mask: u32, members: &[usize], cells: &Cells, report: &mut CheckReport) {
    let (min_v, max_v) = (members[0], *members.last().unwrap());
    for &j in members {
        let left_mask = mask_of(&members.iter().copied().filter(|&v| v <= j).collect::<Vec<_>>());
        let right_mask = mask_of(&members.iter().copied().filter(|&v| v >= j).collect::<Vec<_>>());
        let (Some(left_cells), Some(right_cells)) = (s.payloads.get(&left_mask), s.payloads.get(&right_mask)) else {
            continue;
        };
        for ((lp, lq, le), lcomps) in left_cells {
            for ((rq, rr, re), rcomps) in right_cells {
                if lq != rq {
                    continue;
                }
                let total = le + re;
                for lc in lcomps.iter().filter(|c| c.virtual_dim() == 0) {
                    for rc in rcomps.iter().filter(|c| c.virtual_dim() == 0) {
                        let hits = count_break_pieces(cells, (*lp, *rr, &total), j, *lq, le, &lc.id, &rc.id);
                        if hits != 1 {
                            report.push(format!(
                                "payload {mask:#b}: product ({}, {}) across set {j} covered {hits} times",
                                lc.id, rc.id
                            ));
                        }
                    }
                }
            }
        }
    }
    let _ = (min_v, max_v);
}

fn count_break_pieces(
    cells: &Cells,
    cell: (usize, usize, &Ratio),
    set: usize,
    elem: usize,
    left_energy: &Ratio,
    left_id: &str,
    right_id: &str,
) -> usize {
    let key = (cell.0, cell.1, cell.2.clone());
    let Some(comps) = cells.get(&key) else { return 0 };
    let mut hits = 0;
    for c in comps {
        let Some(facets) = &c.facets else { continue };
        for f in facets {
            let FacetKind::Break { set: fs, elem: fe, left_energy: fl } = &f.label else { continue };
            if *fs != set || *fe != elem || fl != left_energy {
                continue;
            }
            for piece in &f.pieces {
                if piece.factors.len() == 2 && piece.factors[0] == left_id && piece.factors[1] == right_id {
                    hits += 1;
                }
            }
        }
    }
    hits
}

fn properness_check(s: &FlowSimplex, mask: u32, vertex: usize, cells: &Cells, report: &mut CheckReport) {
    let count = s.vertices[vertex].len();
    let mut adj = vec![Vec::new(); count];
    for ((p, r, lam), comps) in cells {
        if comps.is_empty() {
            continue;
        }
        if !lam.is_zero() {
            continue;
        }
        if p == r {
            report.push(format!(
                "payload {mask:#b}: zero-energy endomorphisms at object {p} violate properness"
            ));
            continue;
        }
        adj[*p].push(*r);
    }
    // Cycle detection on the zero-energy digraph.
    let mut state = vec![0u8; count];
    fn dfs(v: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
        state[v] = 1;
        for &w in &adj[v] {
            if state[w] == 1 || (state[w] == 0 && dfs(w, adj, state)) {
                return true;
            }
        }
        state[v] = 2;
        false
    }
    for v in 0..count {
        if state[v] == 0 && dfs(v, &adj, &mut state) {
            report.push(format!(
                "payload {mask:#b}: zero-energy morphisms contain a cycle, the induced order is not strict"
            ));
            return;
        }
    }
}

fn equivalence_check(s: &FlowSimplex, report: &mut CheckReport) {
    let masks: Vec<u32> = s.payloads.keys().copied().collect();
    for &mask in &masks {
        let members = mask_members(mask);
        if members.len() < 3 {
            continue;
        }
        let (min_v, max_v) = (members[0], *members.last().unwrap());
        for &k in &members {
            if k == min_v || k == max_v {
                continue;
            }
            let sub = mask & !(1 << k);
            if !s.payloads.contains_key(&sub) {
                continue;
            }
            let Some(rec) = s.equivalences.get(&(mask, k)) else {
                report.push(format!(
                    "missing equivalence record for dropping index {k} from face {mask:#b}"
                ));
                continue;
            };
            check_one_record(s, mask, sub, k, rec, report);
        }
        // Squares: dropping two interior indices in either order agrees.
        for &k in &members {
            for &k2 in &members {
                if k >= k2 || k == min_v || k2 == max_v || k2 == min_v || k == max_v {
                    continue;
                }
                let m_k = mask & !(1 << k);
                let m_k2 = mask & !(1 << k2);
                let m_both = mask & !(1 << k) & !(1 << k2);
                let (Some(r_k), Some(r_k2)) = (s.equivalences.get(&(mask, k)), s.equivalences.get(&(mask, k2))) else {
                    continue;
                };
                let (Some(r_bk), Some(r_bk2)) =
                    (s.equivalences.get(&(m_k2, k)), s.equivalences.get(&(m_k, k2)))
                else {
                    continue;
                };
                if !s.payloads.contains_key(&m_both) {
                    continue;
                }
                if r_k.added_rank + r_bk2.added_rank != r_k2.added_rank + r_bk.added_rank {
                    report.push(format!(
                        "face {mask:#b}: added ranks along the two orders of dropping {k} and {k2} differ"
                    ));
                }
                for (src, mid) in &r_bk.map {
                    let via1 = r_k2.map.get(mid);
                    let via2 = r_bk2.map.get(src).and_then(|m| r_k.map.get(m));
                    if via1 != via2 {
                        report.push(format!(
                            "face {mask:#b}: equivalence square for {src} does not commute dropping {k}, {k2}"
                        ));
                        break;
                    }
                }
            }
        }
    }
    for ((mask, k), _) in &s.equivalences {
        if !s.payloads.contains_key(mask) || !s.payloads.contains_key(&(mask & !(1 << k))) {
            report.push(format!(
                "equivalence record ({mask:#b}, {k}) references a payload that is not stored"
            ));
        }
    }
}

fn check_one_record(
    s: &FlowSimplex,
    mask: u32,
    sub: u32,
    k: usize,
    rec: &EquivRecord,
    report: &mut CheckReport,
) {
    let sub_cells = &s.payloads[&sub];
    let cells = &s.payloads[&mask];
    let Ok(sub_index) = index_payload(sub_cells) else { return };
    let Ok(index) = index_payload(cells) else { return };
    // Domain: every component of the sub-face payload, exactly.
    let domain: BTreeSet<&str> = sub_index.by_id.keys().copied().collect();
    let mapped: BTreeSet<&str> = rec.map.keys().map(|s| s.as_str()).collect();
    if domain != mapped {
        report.push(format!(
            "equivalence record ({mask:#b}, {k}): domain does not match the sub-face payload"
        ));
        return;
    }
    // Image: exactly the components of the big payload missing k.
    let missing: BTreeSet<&str> = cells
        .values()
        .flatten()
        .filter(|c| !c.stratum.verts[0].sets.contains(&k))
        .map(|c| c.id.as_str())
        .collect();
    let image: BTreeSet<&str> = rec.map.values().map(|s| s.as_str()).collect();
    if image.len() != rec.map.len() {
        report.push(format!("equivalence record ({mask:#b}, {k}): map is not injective"));
        return;
    }
    if image != missing {
        report.push(format!(
            "equivalence record ({mask:#b}, {k}): image does not match the index-{k}-missing layer"
        ));
        return;
    }
    for (src_id, tgt_id) in &rec.map {
        let src = comp_at(sub_cells, &sub_index, src_id).unwrap();
        let tgt = comp_at(cells, &index, tgt_id).unwrap();
        if src.stratum.edges[0].elem != tgt.stratum.edges[0].elem
            || src.stratum.edges[1].elem != tgt.stratum.edges[1].elem
            || src.stratum.verts[0].energy != tgt.stratum.verts[0].energy
            || src.stratum.verts[0].sets != tgt.stratum.verts[0].sets
        {
            report.push(format!(
                "equivalence record ({mask:#b}, {k}): {src_id} and {tgt_id} sit over different strata"
            ));
            continue;
        }
        if tgt.total_dim != src.total_dim + rec.added_rank
            || tgt.obstruction_rank != src.obstruction_rank + rec.added_rank
        {
            report.push(format!(
                "equivalence record ({mask:#b}, {k}): {src_id} -> {tgt_id} does not add rank {}",
                rec.added_rank
            ));
        }
        if src.count != tgt.count {
            report.push(format!(
                "equivalence record ({mask:#b}, {k}): counts of {src_id} and {tgt_id} differ"
            ));
        }
    }
}

// ---- faces -------------------------------------------------------------

/// The i-th face of a flow simplex: payloads avoiding vertex `i`, with
/// vertex indices renumbered downward.
pub fn face(s: &FlowSimplex, i: usize) -> Result<FlowSimplex, String> {
    let n = s.n();
    if i > n {
        return Err(format!("face index {i} exceeds {n}"));
    }
    if n == 0 {
        return Err("a 0-simplex has no faces".into());
    }
    let shift = move |j: usize| if j > i { j - 1 } else { j };
    let mut vertices = s.vertices.clone();
    vertices.remove(i);
    let mut payloads = BTreeMap::new();
    for (&mask, cells) in &s.payloads {
        if mask & (1 << i) != 0 {
            continue;
        }
        let new_mask = (mask & ((1 << i) - 1)) | ((mask >> (i + 1)) << i);
        payloads.insert(new_mask, map_cells(cells, &shift));
    }
    let mut equivalences = BTreeMap::new();
    for (&(mask, k), rec) in &s.equivalences {
        if mask & (1 << i) != 0 || k == i {
            continue;
        }
        let new_mask = (mask & ((1 << i) - 1)) | ((mask >> (i + 1)) << i);
        let new_rec = EquivRecord {
            added_rank: rec.added_rank,
            map: rec
                .map
                .iter()
                .map(|(a, b)| (map_tag_indices(a, &shift), map_tag_indices(b, &shift)))
                .collect(),
        };
        equivalences.insert((new_mask, shift(k)), new_rec);
    }
    Ok(FlowSimplex {
        gamma: s.gamma,
        vertices,
        payloads,
        equivalences,
        integer_signs: s.integer_signs,
    })
}

// ---- degeneracies ------------------------------------------------------

struct DegeneracySpec {
    /// Position being duplicated.
    dup: usize,
    /// Index carried by the degenerate layer in the new simplex.
    carried: usize,
}

fn degenerate(s: &FlowSimplex, spec: DegeneracySpec) -> FlowSimplex {
    let dup = spec.dup;
    let carried = spec.carried;
    // Old index -> new index for the copy that keeps the old data.
    let up = move |j: usize| -> usize {
        if j < dup {
            j
        } else if j > dup {
            j + 1
        } else if dup == 0 {
            0
        } else {
            j + 1
        }
    };

    let mut vertices = s.vertices.clone();
    vertices.insert(dup, s.vertices[dup].clone());

    let mut payloads: BTreeMap<u32, Cells> = BTreeMap::new();
    let mut equivalences: BTreeMap<(u32, usize), EquivRecord> = BTreeMap::new();
    let window = (1u32 << dup) | (1u32 << (dup + 1));

    // Copies: every old mask transfers along `up`; masks containing the
    // duplicated position also appear with the other copy substituted.
    for (&mask, cells) in &s.payloads {
        let members = mask_members(mask);
        let base: u32 = mask_of(&members.iter().map(|&v| up(v)).collect::<Vec<_>>());
        payloads.insert(base, map_cells(cells, &up));
        if mask & (1 << dup) != 0 {
            let other = base ^ window;
            let alt = move |j: usize| if j == dup { window_other(dup, up(dup)) } else { up(j) };
            payloads.insert(other, map_cells(cells, &alt));
        }
    }
    for (&(mask, k), rec) in &s.equivalences {
        let members = mask_members(mask);
        let base: u32 = mask_of(&members.iter().map(|&v| up(v)).collect::<Vec<_>>());
        equivalences.insert((base, up(k)), map_record(rec, &up));
        if mask & (1 << dup) != 0 {
            let other = base ^ window;
            let alt = move |j: usize| if j == dup { window_other(dup, up(dup)) } else { up(j) };
            equivalences.insert((other, alt(k)), map_record(rec, &alt));
        }
    }

    // The duplicated edge payload: the diagonal of the vertex category.
    let edge_cells = diagonal_cells(s, dup, dup, dup + 1);
    payloads.insert(window, edge_cells);

    // Degenerate payloads for faces containing both copies and more.
    let old_masks: Vec<u32> = s.payloads.keys().copied().collect();
    for &tau in &old_masks {
        if tau & (1 << dup) == 0 || tau.count_ones() < 2 {
            continue;
        }
        let members = mask_members(tau);
        let new_mask: u32 =
            mask_of(&members.iter().map(|&v| up(v)).collect::<Vec<_>>()) | window;
        let cells = degenerate_payload(s, tau, &up, dup, carried, window);
        payloads.insert(new_mask, cells);
        // Record for dropping the carried index: identity onto the
        // missing layer.
        let copy_mask = new_mask & !(1 << carried);
        let copy_cells = &payloads[&copy_mask];
        let mut map = BTreeMap::new();
        for comps in copy_cells.values() {
            for c in comps {
                map.insert(c.id.clone(), add_tag(&c.id, 'm', carried));
            }
        }
        equivalences.insert((new_mask, carried), EquivRecord { added_rank: 0, map });
        // Records for the other interior indices of the degenerate face.
        for (&(m_old, k_old), rec) in &s.equivalences {
            if m_old != tau {
                continue;
            }
            let k_new = up(k_old);
            let mut map = BTreeMap::new();
            for (a, b) in &rec.map {
                let a_up = map_tag_indices(a, &up);
                let b_up = map_tag_indices(b, &up);
                map.insert(add_tag(&a_up, 'm', carried), add_tag(&b_up, 'm', carried));
                map.insert(add_tag(&a_up, 'D', carried), add_tag(&b_up, 'D', carried));
            }
            equivalences.insert((new_mask, k_new), EquivRecord { added_rank: rec.added_rank, map });
        }
    }

    FlowSimplex {
        gamma: s.gamma,
        vertices,
        payloads,
        equivalences,
        integer_signs: s.integer_signs,
    }
}

fn window_other(dup: usize, kept: usize) -> usize {
    // The two copies of position `dup` are dup and dup+1; `kept` is the
    // one the plain copy uses.
    if kept == dup {
        dup + 1
    } else {
        dup
    }
}

fn map_record(rec: &EquivRecord, f: &dyn Fn(usize) -> usize) -> EquivRecord {
    EquivRecord {
        added_rank: rec.added_rank,
        map: rec
            .map
            .iter()
            .map(|(a, b)| (map_tag_indices(a, f), map_tag_indices(b, f)))
            .collect(),
    }
}

/// Unit id for the diagonal over element `p`.
pub(crate) fn unit_id(p: usize) -> String {
    format!("u:{p}")
}

/// Cells of the diagonal bimodule of the vertex category at `vertex`,
/// rendered with set labels `left`/`right`.
fn diagonal_cells(s: &FlowSimplex, vertex: usize, left: usize, right: usize) -> Cells {
    let vmask = 1u32 << vertex;
    let empty = Cells::new();
    let cat_cells = s.payloads.get(&vmask).unwrap_or(&empty);
    let mut out = Cells::new();
    for p in 0..s.vertices[vertex].len() {
        out.insert(
            (p, p, Ratio::zero()),
            vec![FormalComponent {
                id: unit_id(p),
                stratum: single_vertex_arc(left, p, right, p, BTreeSet::new(), Ratio::zero()),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(Vec::new()),
            }],
        );
    }
    for ((p, q, lam), comps) in cat_cells {
        for c in comps {
            let d_id = format!("D{}:{}", right, map_tag_indices(&c.id, &|_| left));
            let facets = if c.virtual_dim() == 0 {
                Some(vec![
                    Facet {
                        label: FacetKind::Break { set: left, elem: *q, left_energy: lam.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![map_tag_indices(&c.id, &|_| left), unit_id(*q)],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break { set: right, elem: *p, left_energy: Ratio::zero() },
                        pieces: vec![FacetPiece {
                            factors: vec![unit_id(*p), map_tag_indices(&c.id, &|_| right)],
                            sign: -1,
                        }],
                    },
                ])
            } else {
                None
            };
            out.entry((*p, *q, lam.clone())).or_default().push(FormalComponent {
                id: d_id,
                stratum: single_vertex_arc(left, *p, right, *q, BTreeSet::new(), lam.clone()),
                total_dim: c.total_dim + 1,
                obstruction_rank: c.obstruction_rank,
                count: c.count.clone(),
                facets,
            });
        }
    }
    out
}

/// The degenerate payload over `up(tau) | window`: a missing layer copying
/// the old payload and an active layer of conic components one dimension
/// up.
fn degenerate_payload(
    s: &FlowSimplex,
    tau: u32,
    up: &dyn Fn(usize) -> usize,
    dup: usize,
    carried: usize,
    window: u32,
) -> Cells {
    let old_cells = &s.payloads[&tau];
    let members = mask_members(tau);
    let other_copy = window_other(dup, up(dup));
    // Renumbering for references into the copy that uses the other
    // window position; it differs from `up` only at the duplicated index.
    let alt = move |j: usize| if j == dup { other_copy } else { up(j) };
    let new_members: Vec<usize> = {
        let mut v: Vec<usize> = members.iter().map(|&x| up(x)).collect();
        v.push(other_copy);
        v.sort();
        v
    };
    let (new_min, new_max) = (new_members[0], *new_members.last().unwrap());
    let mut out = Cells::new();
    for ((p, r, lam), comps) in old_cells {
        for c in comps {
            // Missing layer: the old component with its facets translated.
            let mapped = map_component(c, up);
            let mut missing = mapped.clone();
            missing.id = add_tag(&mapped.id, 'm', carried);
            if let Some(facets) = &mut missing.facets {
                for facet in facets.iter_mut() {
                    match &facet.label {
                        FacetKind::Break { set, .. } => {
                            let set = *set;
                            // A factor needs the missing tag iff it lives in a
                            // split part containing both window positions.
                            let left_both = new_members
                                .iter()
                                .filter(|&&w| w <= set && (window & (1 << w)) != 0)
                                .count()
                                == 2;
                            let right_both = new_members
                                .iter()
                                .filter(|&&w| w >= set && (window & (1 << w)) != 0)
                                .count()
                                == 2;
                            for piece in &mut facet.pieces {
                                if left_both {
                                    piece.factors[0] = add_tag(&piece.factors[0], 'm', carried);
                                }
                                if right_both {
                                    piece.factors[1] = add_tag(&piece.factors[1], 'm', carried);
                                }
                            }
                        }
                        FacetKind::ForgetVertex { .. } => {
                            for piece in &mut facet.pieces {
                                piece.factors[0] = add_tag(&piece.factors[0], 'm', carried);
                            }
                        }
                    }
                }
            }
            out.entry((*p, *r, lam.clone())).or_default().push(missing);

            // Active layer: the conic component one dimension up.
            let mut active_sets: BTreeSet<usize> =
                mapped.stratum.verts[0].sets.clone();
            active_sets.insert(carried);
            let active_id = add_tag(&mapped.id, 'D', carried);
            // The break piece references the copy held by the other
            // window position, so its id renumbers through `alt`.
            let alt_id = map_tag_indices(&c.id, &alt);
            // The sign convention must not depend on which window created
            // the component: break +1, forgotten vertex -1.
            let facets = if c.virtual_dim() == 0 {
                let (brk_set, pieces) = if dup == 0 {
                    // Break at the second copy: unit on the left.
                    (
                        carried,
                        vec![FacetPiece {
                            factors: vec![unit_id(*p), alt_id.clone()],
                            sign: 1,
                        }],
                    )
                } else {
                    // Break at the first copy: unit on the right.
                    (
                        dup,
                        vec![FacetPiece {
                            factors: vec![alt_id.clone(), unit_id(*r)],
                            sign: 1,
                        }],
                    )
                };
                let break_energy = if dup == 0 { Ratio::zero() } else { lam.clone() };
                let break_elem = if dup == 0 { *p } else { *r };
                Some(vec![
                    Facet {
                        label: FacetKind::Break {
                            set: brk_set,
                            elem: break_elem,
                            left_energy: break_energy,
                        },
                        pieces,
                    },
                    Facet {
                        label: FacetKind::ForgetVertex { index: carried },
                        pieces: vec![FacetPiece {
                            factors: vec![add_tag(&mapped.id, 'm', carried)],
                            sign: -1,
                        }],
                    },
                ])
            } else {
                None
            };
            out.entry((*p, *r, lam.clone())).or_default().push(FormalComponent {
                id: active_id,
                stratum: single_vertex_arc(new_min, *p, new_max, *r, active_sets, lam.clone()),
                total_dim: mapped.total_dim + 1,
                obstruction_rank: mapped.obstruction_rank,
                count: mapped.count.clone(),
                facets,
            });
        }
    }
    out
}

/// The initial degeneracy: duplicates the first vertex; the new edge
/// carries the diagonal of the first vertex category and larger faces
/// containing both copies carry the conic degeneration.
pub fn s0(s: &FlowSimplex) -> FlowSimplex {
    degenerate(s, DegeneracySpec { dup: 0, carried: 1 })
}

/// The terminal degeneracy: duplicates the last vertex.
pub fn sn(s: &FlowSimplex) -> FlowSimplex {
    let n = s.n();
    degenerate(s, DegeneracySpec { dup: n, carried: n })
}

/// The diagonal bimodule of a flow category: unit components on the
/// identity pairs plus one component of dimension one higher per
/// category component.
pub fn diagonal(f: &FlowCategory) -> FlowBimodule {
    let s = category_to_simplex(f);
    FlowBimodule::new(s0(&s)).expect("the initial degeneracy of a 0-simplex is a 1-simplex")
}

// ---- restriction and suspension ---------------------------------------

/// The full subcategory on the objects satisfying `keep`. Components
/// whose facet pieces reference discarded components lose their facet
/// list (it becomes unavailable, which validation will flag at virtual
/// dimension one).
pub fn restrict_objects(f: &FlowCategory, keep: impl Fn(&FlowObject) -> bool) -> FlowCategory {
    let kept: Vec<usize> = (0..f.objects.len()).filter(|&i| keep(&f.objects[i])).collect();
    let renumber: BTreeMap<usize, usize> = kept.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let kept_ids: BTreeSet<&str> = {
        let mut ids = BTreeSet::new();
        for ((p, q, _), comps) in &f.components {
            if renumber.contains_key(p) && renumber.contains_key(q) {
                for c in comps {
                    ids.insert(c.id.as_str());
                }
            }
        }
        ids
    };
    let mut components = Cells::new();
    for ((p, q, lam), comps) in &f.components {
        let (Some(&np), Some(&nq)) = (renumber.get(p), renumber.get(q)) else { continue };
        let list: Vec<FormalComponent> = comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.stratum.edges[0].elem = np;
                c.stratum.edges[1].elem = nq;
                if let Some(facets) = &c.facets {
                    let dangling = facets.iter().any(|facet| {
                        let object_gone = match &facet.label {
                            FacetKind::Break { elem, .. } => !renumber.contains_key(elem),
                            FacetKind::ForgetVertex { .. } => false,
                        };
                        object_gone
                            || facet
                                .pieces
                                .iter()
                                .any(|piece| piece.factors.iter().any(|id| !kept_ids.contains(id.as_str())))
                    });
                    if dangling {
                        c.facets = None;
                    } else if let Some(facets) = &mut c.facets {
                        for facet in facets {
                            if let FacetKind::Break { elem, .. } = &mut facet.label {
                                *elem = renumber[elem];
                            }
                        }
                    }
                }
                c
            })
            .collect();
        components.insert((np, nq, lam.clone()), list);
    }
    let defect = f
        .defect
        .iter()
        .filter_map(|(&(p, q), &d)| Some(((*renumber.get(&p)?, *renumber.get(&q)?), d)))
        .collect();
    FlowCategory {
        gamma: f.gamma,
        objects: kept.iter().map(|&i| f.objects[i].clone()).collect(),
        components,
        integer_signs: f.integer_signs,
        defect,
    }
}

/// Suspension (`sign = +1`, adds to the positive rank) or desuspension
/// (`sign = -1`, adds to the negative rank); morphism data is unchanged.
pub fn suspend(f: &FlowCategory, sign: i8) -> FlowCategory {
    let mut out = f.clone();
    for o in &mut out.objects {
        if sign >= 0 {
            o.v.plus += 1;
            o.dim += 1;
        } else {
            o.v.minus += 1;
            o.dim -= 1;
        }
    }
    out
}

/// Suspends both vertex categories of a bimodule, leaving the edge data
/// unchanged.
pub fn suspend_bimodule(b: &FlowBimodule, sign: i8) -> FlowBimodule {
    let mut s = b.0.clone();
    for table in &mut s.vertices {
        for o in table.iter_mut() {
            if sign >= 0 {
                o.v.plus += 1;
                o.dim += 1;
            } else {
                o.v.minus += 1;
                o.dim -= 1;
            }
        }
    }
    FlowBimodule(s)
}

// ---- cone --------------------------------------------------------------

/// Output of the mapping cone construction.
#[derive(Debug, Clone)]
pub struct ConeResult {
    pub category: FlowCategory,
    /// Bimodule from the source's target category into the cone.
    pub inclusion: FlowBimodule,
    /// Bimodule from the cone onto the suspended source category.
    pub projection: FlowBimodule,
    /// The energy shift applied to the bridging components.
    pub shift: Ratio,
}

pub(crate) fn epsilon(dim: i64) -> i8 {
    if dim.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// The mapping cone of a bimodule B from X to Y: a flow category on the
/// union of the suspended X-objects and the Y-objects, with B's
/// components bridging them at energies shifted to keep the lower bound
/// positive. Returns the cone with the inclusion of Y and the projection
/// onto the suspension of X.
pub fn cone(b: &FlowBimodule) -> Result<ConeResult, String> {
    let s = b.simplex();
    let precheck = validate_flow_simplex(s);
    if !precheck.pass {
        return Err(format!(
            "the bimodule does not validate: {}",
            precheck.first().unwrap_or("unknown violation")
        ));
    }
    let x = b.source_category();
    let y = b.target_category();
    let edge = b.edge_cells();

    let shift = match s.gamma {
        GammaSpec::Trivial => Ratio::zero(),
        GammaSpec::NonnegRational => {
            let min = edge.keys().map(|(_, _, l)| l.clone()).min();
            match min {
                Some(m) if m < Ratio::zero() => {
                    let abs = -m;
                    abs + Ratio::one()
                }
                _ => Ratio::zero(),
            }
        }
    };

    let nx = x.objects.len();
    let x_dim = |p: usize| x.objects[p].dim;

    // Objects: suspended X then Y.
    let mut objects = Vec::with_capacity(nx + y.objects.len());
    for o in &x.objects {
        objects.push(FlowObject {
            id: format!("x:{}", o.id),
            v: VirtualDim { plus: o.v.plus + 1, minus: o.v.minus },
            dim: o.dim + 1,
        });
    }
    for o in &y.objects {
        objects.push(FlowObject { id: format!("y:{}", o.id), v: o.v, dim: o.dim });
    }

    let xid = |id: &str| format!("x:{id}");
    let yid = |id: &str| format!("y:{id}");
    let bid = |id: &str| format!("b:{id}");

    let mut components = Cells::new();
    // X-X components, object indices unchanged.
    for ((p, q, lam), comps) in &x.components {
        let list: Vec<FormalComponent> = comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.id = xid(&c.id);
                if let Some(facets) = &mut c.facets {
                    for facet in facets {
                        for piece in &mut facet.pieces {
                            for factor in &mut piece.factors {
                                *factor = xid(factor);
                            }
                        }
                    }
                }
                c
            })
            .collect();
        components.insert((*p, *q, lam.clone()), list);
    }
    // Y-Y components, object indices moved past the X block.
    for ((p, q, lam), comps) in &y.components {
        let list: Vec<FormalComponent> = comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.id = yid(&c.id);
                c.stratum.edges[0].elem += nx;
                c.stratum.edges[1].elem += nx;
                if let Some(facets) = &mut c.facets {
                    for facet in facets {
                        if let FacetKind::Break { elem, .. } = &mut facet.label {
                            *elem += nx;
                        }
                        for piece in &mut facet.pieces {
                            for factor in &mut piece.factors {
                                *factor = yid(factor);
                            }
                        }
                    }
                }
                c
            })
            .collect();
        components.insert((*p + nx, *q + nx, lam.clone()), list);
    }
    // Bridging components from B, energies shifted, counts twisted so the
    // differential squares to zero over the integers.
    for ((p, q, lam), comps) in edge {
        let list: Vec<FormalComponent> = comps
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.id = bid(&c.id);
                c.count = BigInt::from(epsilon(x_dim(*p))) * &c.count;
                c.stratum = single_vertex_arc(
                    0,
                    *p,
                    0,
                    *q + nx,
                    BTreeSet::new(),
                    lam + &shift,
                );
                if let Some(facets) = &mut c.facets {
                    for facet in facets {
                        let FacetKind::Break { set, elem, left_energy } = &mut facet.label else {
                            continue;
                        };
                        if *set == 0 {
                            // Left factor in X: the twist of the right
                            // factor's source enters the sign.
                            let z = *elem;
                            for piece in &mut facet.pieces {
                                piece.sign *= epsilon(x_dim(z));
                                piece.factors[0] = xid(&piece.factors[0]);
                                piece.factors[1] = bid(&piece.factors[1]);
                            }
                        } else {
                            // Right factor in Y; the component's own
                            // source carries the twist.
                            for piece in &mut facet.pieces {
                                piece.sign *= epsilon(x_dim(*p));
                                piece.factors[0] = bid(&piece.factors[0]);
                                piece.factors[1] = yid(&piece.factors[1]);
                            }
                            *elem += nx;
                            *left_energy = left_energy.clone() + &shift;
                        }
                        *set = 0;
                    }
                }
                c
            })
            .collect();
        components.insert((*p, *q + nx, lam + &shift), list);
    }

    let category = FlowCategory {
        gamma: s.gamma,
        objects,
        components,
        integer_signs: s.integer_signs,
        defect: BTreeMap::new(),
    };

    let inclusion = cone_inclusion(&y, &category, nx, &shift)?;
    let sx = suspend(&x, 1);
    let projection = cone_projection(&x, &sx, &category)?;

    Ok(ConeResult { category, inclusion, projection, shift })
}

/// The bimodule from Y into the cone: the diagonal of Y shifted by the
/// cone's energy offset, landing in the Y-part.
fn cone_inclusion(
    y: &FlowCategory,
    c: &FlowCategory,
    nx: usize,
    shift: &Ratio,
) -> Result<FlowBimodule, String> {
    let mut payloads = BTreeMap::new();
    payloads.insert(0b01, y.components.clone());
    payloads.insert(0b10, {
        let mut cells = c.components.clone();
        for comps in cells.values_mut() {
            for comp in comps.iter_mut() {
                for e in &mut comp.stratum.edges {
                    e.set = 1;
                }
                if let Some(facets) = &mut comp.facets {
                    for f in facets {
                        if let FacetKind::Break { set, .. } = &mut f.label {
                            *set = 1;
                        }
                    }
                }
            }
        }
        cells
    });
    let mut edge = Cells::new();
    for p in 0..y.objects.len() {
        edge.insert(
            (p, p + nx, shift.clone()),
            vec![FormalComponent {
                id: unit_id(p),
                stratum: single_vertex_arc(0, p, 1, p + nx, BTreeSet::new(), shift.clone()),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(Vec::new()),
            }],
        );
    }
    for ((p, q, lam), comps) in &y.components {
        for comp in comps {
            let facets = if comp.virtual_dim() == 0 {
                Some(vec![
                    Facet {
                        label: FacetKind::Break { set: 0, elem: *q, left_energy: lam.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![comp.id.clone(), unit_id(*q)],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break { set: 1, elem: *p + nx, left_energy: shift.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![unit_id(*p), format!("y:{}", comp.id)],
                            sign: -1,
                        }],
                    },
                ])
            } else {
                None
            };
            edge.entry((*p, *q + nx, lam + shift)).or_default().push(FormalComponent {
                id: format!("D1:{}", comp.id),
                stratum: single_vertex_arc(0, *p, 1, *q + nx, BTreeSet::new(), lam + shift),
                total_dim: comp.total_dim + 1,
                obstruction_rank: comp.obstruction_rank,
                count: comp.count.clone(),
                facets,
            });
        }
    }
    payloads.insert(0b11, edge);
    FlowBimodule::new(FlowSimplex {
        gamma: c.gamma,
        vertices: vec![y.objects.clone(), c.objects.clone()],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: c.integer_signs,
    })
}

/// The bimodule from the cone onto the suspension of X: the diagonal of
/// X, unshifted, leaving the X-part.
fn cone_projection(
    x: &FlowCategory,
    sx: &FlowCategory,
    c: &FlowCategory,
) -> Result<FlowBimodule, String> {
    let mut payloads = BTreeMap::new();
    payloads.insert(0b01, {
        let mut cells = c.components.clone();
        for comps in cells.values_mut() {
            for comp in comps.iter_mut() {
                for e in &mut comp.stratum.edges {
                    e.set = 0;
                }
                if let Some(facets) = &mut comp.facets {
                    for f in facets {
                        if let FacetKind::Break { set, .. } = &mut f.label {
                            *set = 0;
                        }
                    }
                }
            }
        }
        cells
    });
    payloads.insert(0b10, {
        let mut cells = sx.components.clone();
        for comps in cells.values_mut() {
            for comp in comps.iter_mut() {
                for e in &mut comp.stratum.edges {
                    e.set = 1;
                }
                if let Some(facets) = &mut comp.facets {
                    for f in facets {
                        if let FacetKind::Break { set, .. } = &mut f.label {
                            *set = 1;
                        }
                    }
                }
            }
        }
        cells
    });
    let mut edge = Cells::new();
    for p in 0..x.objects.len() {
        edge.insert(
            (p, p, Ratio::zero()),
            vec![FormalComponent {
                id: unit_id(p),
                stratum: single_vertex_arc(0, p, 1, p, BTreeSet::new(), Ratio::zero()),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(Vec::new()),
            }],
        );
    }
    for ((p, q, lam), comps) in &x.components {
        for comp in comps {
            let facets = if comp.virtual_dim() == 0 {
                Some(vec![
                    Facet {
                        label: FacetKind::Break { set: 0, elem: *q, left_energy: lam.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![format!("x:{}", comp.id), unit_id(*q)],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break { set: 1, elem: *p, left_energy: Ratio::zero() },
                        pieces: vec![FacetPiece {
                            factors: vec![unit_id(*p), comp.id.clone()],
                            sign: -1,
                        }],
                    },
                ])
            } else {
                None
            };
            edge.entry((*p, *q, lam.clone())).or_default().push(FormalComponent {
                id: format!("D1:{}", comp.id),
                stratum: single_vertex_arc(0, *p, 1, *q, BTreeSet::new(), lam.clone()),
                total_dim: comp.total_dim + 1,
                obstruction_rank: comp.obstruction_rank,
                count: comp.count.clone(),
                facets,
            });
        }
    }
    payloads.insert(0b11, edge);
    FlowBimodule::new(FlowSimplex {
        gamma: c.gamma,
        vertices: vec![c.objects.clone(), sx.objects.clone()],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: c.integer_signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: &str, dim: i64) -> FlowObject {
        let v = if dim >= 0 {
            VirtualDim { plus: dim as u32, minus: 0 }
        } else {
            VirtualDim { plus: 0, minus: (-dim) as u32 }
        };
        FlowObject { id: id.into(), v, dim }
    }

    /// Interval flow category: objects a (dim 1) and b (dim 0), one
    /// component a -> b with count 1.
    fn interval() -> FlowCategory {
        let mut components = Cells::new();
        components.insert(
            (0, 1, Ratio::zero()),
            vec![FormalComponent {
                id: "c:ab".into(),
                stratum: single_vertex_arc(0, 0, 0, 1, BTreeSet::new(), Ratio::zero()),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(Vec::new()),
            }],
        );
        FlowCategory {
            gamma: GammaSpec::Trivial,
            objects: vec![obj("a", 1), obj("b", 0)],
            components,
            integer_signs: true,
            defect: BTreeMap::new(),
        }
    }

    #[test]
    fn empty_and_discrete_categories_validate() {
        let empty = FlowCategory::empty(GammaSpec::Trivial);
        assert!(validate_flow_category(&empty).pass);
        let discrete = FlowCategory {
            gamma: GammaSpec::Trivial,
            objects: vec![obj("a", 0), obj("b", 3)],
            components: Cells::new(),
            integer_signs: true,
            defect: BTreeMap::new(),
        };
        assert!(validate_flow_category(&discrete).pass);
    }

    #[test]
    fn interval_category_validates() {
        let report = validate_flow_category(&interval());
        assert!(report.pass, "{report}");
    }

    #[test]
    fn zero_energy_endomorphism_fails_properness() {
        let mut f = interval();
        f.components.insert(
            (0, 0, Ratio::zero()),
            vec![FormalComponent {
                id: "c:aa".into(),
                stratum: single_vertex_arc(0, 0, 0, 0, BTreeSet::new(), Ratio::zero()),
                total_dim: 0,
                obstruction_rank: 1,
                count: BigInt::one(),
                facets: None,
            }],
        );
        let report = validate_flow_category(&f);
        assert!(!report.pass);
        assert!(report.first().unwrap().contains("properness"));
    }

    #[test]
    fn framing_violation_is_reported() {
        let mut f = interval();
        f.components.get_mut(&(0, 1, Ratio::zero())).unwrap()[0].total_dim = 3;
        let report = validate_flow_category(&f);
        assert!(!report.pass);
        assert!(report.first().unwrap().contains("framing"));
    }

    #[test]
    fn diagonal_validates_and_has_unit_edge() {
        let f = interval();
        let d = diagonal(&f);
        let report = validate_flow_simplex(d.simplex());
        assert!(report.pass, "{report}");
        // Virtual-dimension-zero edge components are exactly the units.
        let vd0: Vec<&FormalComponent> = d
            .edge_cells()
            .values()
            .flatten()
            .filter(|c| c.virtual_dim() == 0)
            .collect();
        assert_eq!(vd0.len(), 2);
        assert!(vd0.iter().all(|c| c.id.starts_with("u:")));
    }

    #[test]
    fn diagonal_faces_recover_the_category() {
        let f = interval();
        let d = diagonal(&f);
        let d0 = face(d.simplex(), 0).unwrap();
        let d1 = face(d.simplex(), 1).unwrap();
        let back0 = vertex_category(&d0, 0);
        let back1 = vertex_category(&d1, 0);
        assert_eq!(back0.components, f.components);
        assert_eq!(back1.components, f.components);
        assert_eq!(back0.objects, f.objects);
    }

    #[test]
    fn degeneracy_identities_on_a_bimodule() {
        let f = interval();
        let d = diagonal(&f).0;
        // Face identities for the degenerate 2-simplex.
        let s = s0(&d);
        assert_eq!(face(&s, 0).unwrap(), d);
        assert_eq!(face(&s, 1).unwrap(), d);
        let t = sn(&d);
        assert_eq!(face(&t, 2).unwrap(), d);
        assert_eq!(face(&t, 1).unwrap(), d);
        // The two ways of doubly degenerating a 0-simplex agree.
        let c = category_to_simplex(&f);
        assert_eq!(s0(&s0(&c)), sn(&s0(&c)));
        let report = validate_flow_simplex(&s);
        assert!(report.pass, "{report}");
        let report = validate_flow_simplex(&t);
        assert!(report.pass, "{report}");
    }

    #[test]
    fn mixed_face_degeneracy_identity() {
        let f = interval();
        let d = diagonal(&f).0;
        let s = s0(&d);
        // Dropping a vertex above the duplicated pair commutes with the
        // degeneracy.
        assert_eq!(face(&s, 2).unwrap(), s0(&face(&d, 1).unwrap()));
    }

    #[test]
    fn suspension_shifts_dims_and_preserves_data() {
        let f = interval();
        let up = suspend(&f, 1);
        assert!(validate_flow_category(&up).pass);
        assert_eq!(up.objects[0].dim, 2);
        assert_eq!(up.objects[0].v.plus, 2);
        let down = suspend(&up, -1);
        assert_eq!(down.objects[0].v, VirtualDim { plus: 2, minus: 1 });
        assert_eq!(down.objects[0].dim, 1);
        assert_eq!(down.components, f.components);
    }

    #[test]
    fn restrict_objects_full_and_empty() {
        let f = interval();
        let same = restrict_objects(&f, |_| true);
        assert_eq!(same, f);
        let none = restrict_objects(&f, |_| false);
        assert!(none.objects.is_empty());
        assert!(none.components.is_empty());
        assert!(validate_flow_category(&none).pass);
    }

    #[test]
    fn restriction_drops_dangling_facets() {
        // Chain a -> b -> c with a two-step component carrying facets.
        let mut components = Cells::new();
        let mk = |id: &str, p: usize, q: usize, vdim1: bool| FormalComponent {
            id: id.into(),
            stratum: single_vertex_arc(0, p, 0, q, BTreeSet::new(), Ratio::zero()),
            total_dim: if vdim1 { 1 } else { 0 },
            obstruction_rank: 0,
            count: BigInt::one(),
            facets: if vdim1 { None } else { Some(Vec::new()) },
        };
        components.insert((0, 1, Ratio::zero()), vec![mk("ab", 0, 1, false)]);
        components.insert((1, 2, Ratio::zero()), vec![mk("bc", 1, 2, false)]);
        let mut ac = mk("ac", 0, 2, true);
        ac.facets = Some(vec![Facet {
            label: FacetKind::Break { set: 0, elem: 1, left_energy: Ratio::zero() },
            pieces: vec![
                FacetPiece { factors: vec!["ab".into(), "bc".into()], sign: 1 },
                FacetPiece { factors: vec!["ab".into(), "bc".into()], sign: -1 },
            ],
        }]);
        components.insert((0, 2, Ratio::zero()), vec![ac]);
        let f = FlowCategory {
            gamma: GammaSpec::Trivial,
            objects: vec![obj("a", 2), obj("b", 1), obj("c", 0)],
            components,
            integer_signs: true,
            defect: BTreeMap::new(),
        };
        let cut = restrict_objects(&f, |o| o.id != "b");
        let comp = &cut.components[&(0, 1, Ratio::zero())][0];
        assert!(comp.facets.is_none());
        let report = validate_flow_category(&cut);
        assert!(!report.pass); // vdim-1 component now lacks its facets
    }

    #[test]
    fn cone_of_empty_bimodule_is_disjoint_union() {
        let x = interval();
        let y = FlowCategory {
            gamma: GammaSpec::Trivial,
            objects: vec![obj("z", 0)],
            components: Cells::new(),
            integer_signs: true,
            defect: BTreeMap::new(),
        };
        let mut payloads = BTreeMap::new();
        payloads.insert(0b01, x.components.clone());
        payloads.insert(0b10, Cells::new());
        let b = FlowBimodule::new(FlowSimplex {
            gamma: GammaSpec::Trivial,
            vertices: vec![x.objects.clone(), y.objects.clone()],
            payloads,
            equivalences: BTreeMap::new(),
            integer_signs: true,
        })
        .unwrap();
        let out = cone(&b).unwrap();
        assert!(validate_flow_category(&out.category).pass);
        assert_eq!(out.category.objects.len(), 3);
        assert_eq!(out.category.objects[0].dim, 2); // suspended
        assert!(out
            .category
            .components
            .keys()
            .all(|(p, q, _)| (*p < 2 && *q < 2) || (*p >= 2 && *q >= 2)));
        assert!(validate_flow_simplex(out.inclusion.simplex()).pass);
        assert!(validate_flow_simplex(out.projection.simplex()).pass);
    }

    #[test]
    fn cone_bimodules_validate_for_a_nonempty_bimodule() {
        // B = diagonal of the interval category.
        let f = interval();
        let b = diagonal(&f);
        let out = cone(&b).unwrap();
        let report = validate_flow_category(&out.category);
        assert!(report.pass, "{report}");
        let report = validate_flow_simplex(out.inclusion.simplex());
        assert!(report.pass, "{report}");
        let report = validate_flow_simplex(out.projection.simplex());
        assert!(report.pass, "{report}");
    }

    #[test]
    fn coverage_gap_is_detected() {
        let f = interval();
        let mut d = diagonal(&f).0;
        // Remove the facet list of the single conic component.
        let cells = d.payloads.get_mut(&0b11).unwrap();
        for comps in cells.values_mut() {
            for c in comps.iter_mut() {
                if c.id.starts_with("D1:") {
                    c.facets = Some(Vec::new());
                }
            }
        }
        let report = validate_flow_simplex(&d);
        assert!(!report.pass);
        assert!(report.violations.iter().any(|v| v.contains("covered 0 times")));
    }
}
