//! Arc categories: the stratifying categories of labelled arcs.
//!
//! An arc over a sequence of object sets is a path of edges, each labelled
//! by an element of one of the sets, with set indices nondecreasing along
//! the path; between consecutive edges sits a vertex carrying a subset of
//! the interior set indices it spans plus an energy value. Morphisms
//! collapse internal edges and may enlarge vertex labels. Bounded
//! enumerations of these arcs are finite, and every arc's overcategory is
//! a Boolean lattice, which [`corner_report`] checks arc by arc.
//!
//! Set indices in arcs are the global names carried by the ambient
//! [`ArcCategory`], so the arcs of a face category are literally arcs of
//! the original category that avoid the dropped set.

use std::collections::BTreeSet;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::corner::{boolean_check, CornerCategory, SlicePoset};
use crate::par::maybe_par_all;
use crate::report::CheckReport;

pub type Ratio = BigRational;

#[derive(Debug, Error)]
pub enum ArcError {
    #[error("malformed arc: {0}")]
    Malformed(String),
    #[error("malformed category: {0}")]
    MalformedCategory(String),
    #[error("endpoint mismatch: {0}")]
    EndpointMismatch(String),
    #[error("collapse constraint violated: {0}")]
    BadCollapse(String),
    #[error("index out of range: {0}")]
    IndexRange(String),
    #[error("unbounded enumeration request")]
    Unbounded,
    #[error("not a horn object")]
    NotHornObject,
}

/// The grading monoid: either trivial (all energies zero) or the
/// nonnegative rationals with the identity as energy homomorphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSpec {
    Trivial,
    NonnegRational,
}

impl GammaSpec {
    /// Energy of a monoid element. The identity for nonnegative rationals,
    /// constant zero for the trivial monoid.
    pub fn energy(&self, x: &Ratio) -> Ratio {
        match self {
            GammaSpec::Trivial => Ratio::zero(),
            GammaSpec::NonnegRational => x.clone(),
        }
    }

    /// Checks that `x` is a legal genuine monoid element.
    pub fn admits(&self, x: &Ratio) -> bool {
        match self {
            GammaSpec::Trivial => x.is_zero(),
            GammaSpec::NonnegRational => *x >= Ratio::zero(),
        }
    }
}

/// One edge of an arc: a global set index and an element of that set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArcEdge {
    pub set: usize,
    pub elem: usize,
}

/// One vertex of an arc: the set of still-active interior indices it
/// spans, and an energy value. The energy is a genuine monoid element when
/// the adjacent edges lie in the same set and a localized (possibly
/// negative) value otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArcVertex {
    pub sets: BTreeSet<usize>,
    pub energy: Ratio,
}

/// A labelled arc: `edges.len() == verts.len() + 1`, with `verts[i]`
/// between `edges[i]` and `edges[i + 1]`. Edges `1..edges.len()-1` are the
/// internal edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Arc {
    pub edges: Vec<ArcEdge>,
    pub verts: Vec<ArcVertex>,
}

impl Arc {
    pub fn internal_edge_count(&self) -> usize {
        self.edges.len().saturating_sub(2)
    }

    /// Positions of the internal edges, usable with [`collapse`].
    pub fn internal_edge_positions(&self) -> Vec<usize> {
        (1..self.edges.len().saturating_sub(1)).collect()
    }

    pub fn source(&self) -> ArcEdge {
        self.edges[0]
    }

    pub fn target(&self) -> ArcEdge {
        *self.edges.last().expect("arcs have edges")
    }

    /// Total energy over all vertices.
    pub fn grade(&self) -> Ratio {
        self.verts.iter().fold(Ratio::zero(), |acc, v| acc + &v.energy)
    }

    /// Stable textual key, used for component ids and DOT node names.
    pub fn key(&self) -> String {
        let edges = self
            .edges
            .iter()
            .map(|e| format!("{}:{}", e.set, e.elem))
            .join("-");
        let verts = self
            .verts
            .iter()
            .map(|v| {
                let sets = v.sets.iter().map(|s| s.to_string()).join(",");
                format!("{{{sets}}}@{}", v.energy)
            })
            .join("|");
        format!("{edges};{verts}")
    }
}

/// A category of arcs over a sequence of object sets.
///
/// `labels` are the global names of the sets, strictly increasing;
/// `sizes[t]` is the number of elements of the set named `labels[t]`.
/// Faces drop a position but keep the surviving global names, so arcs of a
/// face category are arcs of the original avoiding the dropped name.
///
/// For the nonnegative-rational monoid the category is infinite;
/// enumeration restricts vertex energies to the finite `energy_menu` and
/// arcs to a codimension bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcCategory {
    pub gamma: GammaSpec,
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Required source (element of the first set) and target (element of
    /// the last set), if the category fixes them.
    pub endpoints: Option<(usize, usize)>,
    pub grade: Ratio,
    /// Allowed vertex energies for enumeration.
    pub energy_menu: Vec<Ratio>,
    /// Default codimension bound for enumeration.
    pub max_codim: Option<u32>,
}

impl ArcCategory {
    /// Category over consecutive set names `0..sizes.len()` with the
    /// trivial monoid and grade zero.
    pub fn trivial(sizes: Vec<usize>, endpoints: Option<(usize, usize)>) -> Self {
        ArcCategory {
            gamma: GammaSpec::Trivial,
            labels: (0..sizes.len()).collect(),
            sizes,
            endpoints,
            grade: Ratio::zero(),
            energy_menu: vec![Ratio::zero()],
            max_codim: None,
        }
    }

    pub fn positions(&self) -> usize {
        self.labels.len()
    }

    /// Global names of the interior sets (strictly between the ends).
    pub fn interior_labels(&self) -> Vec<usize> {
        let n = self.labels.len() - 1;
        self.labels[1..n.max(1)].to_vec()
    }

    pub fn position_of(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn validate(&self) -> Result<(), ArcError> {
        if self.labels.is_empty() {
            return Err(ArcError::MalformedCategory("empty sequence".into()));
        }
        if self.labels.len() != self.sizes.len() {
            return Err(ArcError::MalformedCategory(
                "labels and sizes differ in length".into(),
            ));
        }
        if !self.labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(ArcError::MalformedCategory(
                "set names must strictly increase".into(),
            ));
        }
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(ArcError::MalformedCategory("empty object set".into()));
        }
        if let Some((p, r)) = self.endpoints {
            if p >= self.sizes[0] || r >= *self.sizes.last().unwrap() {
                return Err(ArcError::MalformedCategory("endpoint out of range".into()));
            }
        }
        if self.gamma == GammaSpec::Trivial && !self.grade.is_zero() {
            return Err(ArcError::MalformedCategory(
                "trivial monoid admits only grade zero".into(),
            ));
        }
        Ok(())
    }
}

/// Checks all structural invariants of `a` as an object of `c`; the grade
/// of the arc must equal the category's grade.
pub fn validate_arc(c: &ArcCategory, a: &Arc) -> Result<(), ArcError> {
    c.validate()?;
    if a.edges.len() < 2 {
        return Err(ArcError::Malformed("an arc has at least two edges".into()));
    }
    if a.verts.len() + 1 != a.edges.len() {
        return Err(ArcError::Malformed(
            "vertex count must be edge count minus one".into(),
        ));
    }
    for e in &a.edges {
        let Some(t) = c.position_of(e.set) else {
            return Err(ArcError::Malformed(format!("edge in unknown set {}", e.set)));
        };
        if e.elem >= c.sizes[t] {
            return Err(ArcError::Malformed(format!(
                "element {} out of range for set {}",
                e.elem, e.set
            )));
        }
    }
    if !a.edges.windows(2).all(|w| w[0].set <= w[1].set) {
        return Err(ArcError::Malformed("edge set indices must not decrease".into()));
    }
    if a.edges[0].set != c.labels[0] || a.target().set != *c.labels.last().unwrap() {
        return Err(ArcError::Malformed(
            "arcs span from the first set to the last".into(),
        ));
    }
    if let Some((p, r)) = c.endpoints {
        if a.edges[0].elem != p || a.target().elem != r {
            return Err(ArcError::EndpointMismatch(format!(
                "expected endpoints ({p}, {r})"
            )));
        }
    }
    for (i, v) in a.verts.iter().enumerate() {
        let (j, j2) = (a.edges[i].set, a.edges[i + 1].set);
        for &m in &v.sets {
            if !(j < m && m < j2) || c.position_of(m).is_none() {
                return Err(ArcError::Malformed(format!(
                    "vertex {i} label {m} outside its window ({j}, {j2})"
                )));
            }
        }
        if j == j2 && !c.gamma.admits(&v.energy) {
            return Err(ArcError::Malformed(format!(
                "vertex {i} between same-set edges needs a genuine energy"
            )));
        }
        if c.gamma == GammaSpec::Trivial && !v.energy.is_zero() {
            return Err(ArcError::Malformed(format!("vertex {i} energy must be zero")));
        }
    }
    if a.grade() != c.grade {
        return Err(ArcError::Malformed(format!(
            "arc grade {} differs from category grade {}",
            a.grade(),
            c.grade
        )));
    }
    Ok(())
}

/// Interior set names with no edge in the arc and membership in no vertex
/// label; each contributes one codimension.
pub fn missing_indices(c: &ArcCategory, a: &Arc) -> BTreeSet<usize> {
    let mut present: BTreeSet<usize> = a.edges.iter().map(|e| e.set).collect();
    for v in &a.verts {
        present.extend(v.sets.iter().copied());
    }
    c.interior_labels().into_iter().filter(|m| !present.contains(m)).collect()
}

/// Codimension of the stratum labelled by `a`: internal edges plus missing
/// interior indices.
pub fn codim(c: &ArcCategory, a: &Arc) -> u32 {
    (a.internal_edge_count() + missing_indices(c, a).len()) as u32
}

/// The minimal (codimension zero) arc from `p` to `r`: one vertex carrying
/// every interior index and the whole grade.
pub fn minimal_arc(c: &ArcCategory, p: usize, r: usize) -> Arc {
    Arc {
        edges: vec![
            ArcEdge { set: c.labels[0], elem: p },
            ArcEdge { set: *c.labels.last().unwrap(), elem: r },
        ],
        verts: vec![ArcVertex {
            sets: c.interior_labels().into_iter().collect(),
            energy: c.grade.clone(),
        }],
    }
}

/// Concatenates composable arcs: the last edge of `a` must equal the first
/// edge of `b` and the shared edge is fused. Grades add. Returns the
/// concatenated category alongside the arc.
pub fn compose_arcs(
    ca: &ArcCategory,
    cb: &ArcCategory,
    a: &Arc,
    b: &Arc,
) -> Result<(ArcCategory, Arc), ArcError> {
    validate_arc(ca, a)?;
    validate_arc(cb, b)?;
    if ca.labels.last() != cb.labels.first() || ca.sizes.last() != cb.sizes.first() {
        return Err(ArcError::EndpointMismatch(
            "categories do not share their boundary set".into(),
        ));
    }
    if a.target() != b.source() {
        return Err(ArcError::EndpointMismatch(
            "target of the first arc differs from source of the second".into(),
        ));
    }
    if ca.gamma != cb.gamma {
        return Err(ArcError::MalformedCategory("mixed grading monoids".into()));
    }
    let mut labels = ca.labels.clone();
    labels.extend_from_slice(&cb.labels[1..]);
    let mut sizes = ca.sizes.clone();
    sizes.extend_from_slice(&cb.sizes[1..]);
    let endpoints = match (ca.endpoints, cb.endpoints) {
        (Some((p, _)), Some((_, r))) => Some((p, r)),
        _ => None,
    };
    let mut menu = ca.energy_menu.clone();
    for e in &cb.energy_menu {
        if !menu.contains(e) {
            menu.push(e.clone());
        }
    }
    menu.sort();
    let cat = ArcCategory {
        gamma: ca.gamma,
        labels,
        sizes,
        endpoints,
        grade: &ca.grade + &cb.grade,
        energy_menu: menu,
        max_codim: None,
    };
    let mut edges = a.edges.clone();
    edges.extend_from_slice(&b.edges[1..]);
    let mut verts = a.verts.clone();
    verts.extend_from_slice(&b.verts);
    let arc = Arc { edges, verts };
    validate_arc(&cat, &arc)?;
    Ok((cat, arc))
}

/// Applies a morphism datum to `a`: collapses the internal edges at
/// `collapsed` (positions into `a.edges`) and activates the missing
/// indices in `added` at their unique spanning vertices. Returns the
/// source arc of the morphism. Collapsed vertices merge with energies
/// adding; fully collapsed set indices join the merged vertex label.
pub fn collapse(
    c: &ArcCategory,
    a: &Arc,
    collapsed: &BTreeSet<usize>,
    added: &BTreeSet<usize>,
) -> Result<Arc, ArcError> {
    validate_arc(c, a)?;
    let d = a.edges.len() - 1;
    for &e in collapsed {
        if e == 0 || e >= d {
            return Err(ArcError::BadCollapse(format!(
                "edge {e} is not internal and cannot be collapsed"
            )));
        }
    }
    let missing = missing_indices(c, a);
    for &m in added {
        if !missing.contains(&m) {
            return Err(ArcError::BadCollapse(format!(
                "index {m} is not missing in the target arc"
            )));
        }
    }

    // Group edges into runs separated by surviving edges.
    let mut edges = Vec::new();
    let mut verts: Vec<ArcVertex> = Vec::new();
    let mut pending: Option<ArcVertex> = None;
    for (i, e) in a.edges.iter().enumerate() {
        if i > 0 && collapsed.contains(&i) {
            // Edge collapses: merge the vertex before it into the pending
            // group and record the fully collapsed set if this was its
            // last edge.
            let prev = pending.get_or_insert_with(|| ArcVertex {
                sets: BTreeSet::new(),
                energy: Ratio::zero(),
            });
            let v = &a.verts[i - 1];
            prev.sets.extend(v.sets.iter().copied());
            prev.energy = &prev.energy + &v.energy;
            let set = e.set;
            let survives = a
                .edges
                .iter()
                .enumerate()
                .any(|(k, f)| f.set == set && (k == 0 || !collapsed.contains(&k)));
            if !survives {
                prev.sets.insert(set);
            }
        } else {
            if i > 0 {
                let mut merged = pending.take().unwrap_or(ArcVertex {
                    sets: BTreeSet::new(),
                    energy: Ratio::zero(),
                });
                let v = &a.verts[i - 1];
                merged.sets.extend(v.sets.iter().copied());
                merged.energy = &merged.energy + &v.energy;
                verts.push(merged);
            }
            edges.push(*e);
        }
    }

    let mut result = Arc { edges, verts };
    // Each added index activates at the unique vertex spanning it.
    for &m in added {
        let mut placed = false;
        for (i, v) in result.verts.iter_mut().enumerate() {
            let (j, j2) = (result.edges[i].set, result.edges[i + 1].set);
            if j < m && m < j2 {
                v.sets.insert(m);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ArcError::BadCollapse(format!(
                "no vertex of the collapsed arc spans index {m}"
            )));
        }
    }
    validate_arc(c, &result)
        .map_err(|e| ArcError::BadCollapse(format!("collapsed arc invalid: {e}")))?;
    Ok(result)
}

fn resolve_bound(c: &ArcCategory, max_codim: Option<u32>) -> Result<u32, ArcError> {
    max_codim.or(c.max_codim).ok_or(ArcError::Unbounded)
}

fn energy_assignments(c: &ArcCategory, arc_shape: &Arc) -> Vec<Vec<Ratio>> {
    let d = arc_shape.verts.len();
    if c.gamma == GammaSpec::Trivial {
        return if c.grade.is_zero() { vec![vec![Ratio::zero(); d]] } else { Vec::new() };
    }
    let genuine: Vec<bool> = (0..d)
        .map(|i| arc_shape.edges[i].set == arc_shape.edges[i + 1].set)
        .collect();
    let mut out = Vec::new();
    let mut current: Vec<Ratio> = Vec::with_capacity(d);
    fn rec(
        menu: &[Ratio],
        genuine: &[bool],
        grade: &Ratio,
        current: &mut Vec<Ratio>,
        out: &mut Vec<Vec<Ratio>>,
    ) {
        if current.len() == genuine.len() {
            let total: Ratio = current.iter().fold(Ratio::zero(), |s, x| s + x);
            if total == *grade {
                out.push(current.clone());
            }
            return;
        }
        let slot = current.len();
        for e in menu {
            if genuine[slot] && *e < Ratio::zero() {
                continue;
            }
            current.push(e.clone());
            rec(menu, genuine, grade, current, out);
            current.pop();
        }
    }
    rec(&c.energy_menu, &genuine, &c.grade, &mut current, &mut out);
    out
}

/// Enumerates all arcs of codimension at most the bound (argument, else
/// the category default), deduplicated and in canonical order (by
/// codimension, then lexicographically).
pub fn enumerate_objects(c: &ArcCategory, max_codim: Option<u32>) -> Result<Vec<Arc>, ArcError> {
    c.validate()?;
    let bound = resolve_bound(c, max_codim)? as usize;
    let n = c.labels.len() - 1;
    let mut out = Vec::new();

    // Edge counts per set position: ends nonzero, total internal bounded.
    let max_edges = bound + 2;
    let mut runs = vec![0usize; n + 1];
    enumerate_runs(c, &mut runs, 0, max_edges, bound, n, &mut out);

    out.sort_by(|x, y| {
        codim(c, x)
            .cmp(&codim(c, y))
            .then_with(|| x.cmp(y))
    });
    out.dedup();
    Ok(out)
}

fn enumerate_runs(
    c: &ArcCategory,
    runs: &mut Vec<usize>,
    pos: usize,
    max_edges: usize,
    bound: usize,
    n: usize,
    out: &mut Vec<Arc>,
) {
    let used: usize = runs[..pos].iter().sum();
    if used > max_edges {
        return;
    }
    if pos == n + 1 {
        if used < 2 || used > max_edges {
            return;
        }
        fill_runs(c, runs, bound, out);
        return;
    }
    let lower = if pos == 0 || pos == n { 1 } else { 0 };
    let lower = if n == 0 { 2 } else { lower };
    for r in lower..=(max_edges - used) {
        runs[pos] = r;
        enumerate_runs(c, runs, pos + 1, max_edges, bound, n, out);
    }
    runs[pos] = 0;
}

fn fill_runs(c: &ArcCategory, runs: &[usize], bound: usize, out: &mut Vec<Arc>) {
    let n = c.labels.len() - 1;
    let total: usize = runs.iter().sum();
    let internal = total - 2;
    if internal > bound {
        return;
    }
    // Empty interior positions choose between active (vertex label) and
    // missing (codimension contribution).
    let empty: Vec<usize> = (1..n).filter(|&t| runs[t] == 0).collect();

    // Element choices per edge; endpoints pinned when the category has them.
    let mut slots: Vec<Vec<usize>> = Vec::with_capacity(total);
    for (t, &r) in runs.iter().enumerate() {
        for k in 0..r {
            let first = t == 0 && k == 0;
            let last = t == n && k == r - 1;
            let choices = match (c.endpoints, first, last) {
                (Some((p, _)), true, false) => vec![p],
                (Some((_, q)), false, true) => vec![q],
                (Some((p, _)), true, true) => {
                    // Single-set, single-edge arcs never occur (total >= 2).
                    vec![p]
                }
                _ => (0..c.sizes[t]).collect(),
            };
            slots.push(choices);
        }
    }

    let set_of_slot: Vec<usize> = runs
        .iter()
        .enumerate()
        .flat_map(|(t, &r)| std::iter::repeat(c.labels[t]).take(r))
        .collect();

    for elems in slots.iter().map(|s| s.iter().copied()).multi_cartesian_product() {
        let edges: Vec<ArcEdge> = set_of_slot
            .iter()
            .zip(&elems)
            .map(|(&set, &elem)| ArcEdge { set, elem })
            .collect();
        // Subsets of empty interior positions to leave missing.
        for miss_mask in 0u32..(1 << empty.len()) {
            let missing: BTreeSet<usize> = empty
                .iter()
                .enumerate()
                .filter(|(i, _)| miss_mask & (1 << i) != 0)
                .map(|(_, &t)| c.labels[t])
                .collect();
            if internal + missing.len() > bound {
                continue;
            }
            let active: BTreeSet<usize> = empty
                .iter()
                .filter(|&&t| !missing.contains(&c.labels[t]))
                .map(|&t| c.labels[t])
                .collect();
            let mut verts = Vec::with_capacity(edges.len() - 1);
            for i in 0..edges.len() - 1 {
                let (j, j2) = (edges[i].set, edges[i + 1].set);
                let sets: BTreeSet<usize> =
                    active.iter().copied().filter(|&m| j < m && m < j2).collect();
                verts.push(ArcVertex { sets, energy: Ratio::zero() });
            }
            let shape = Arc { edges: edges.clone(), verts };
            for energies in energy_assignments(c, &shape) {
                let mut arc = shape.clone();
                for (v, e) in arc.verts.iter_mut().zip(energies) {
                    v.energy = e;
                }
                if validate_arc(c, &arc).is_ok() {
                    out.push(arc);
                }
            }
        }
    }
}

/// Kind tag for a codimension-one arc: either an interior index is
/// forgotten, or the arc breaks at an object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Codim1Kind {
    /// The interior index `index` is neither an edge set nor active in a
    /// vertex label. Normal direction on the forgetting side only.
    ForgetVertex { index: usize },
    /// The arc is the two-edge break through the object `(set, elem)` with
    /// the given energy on the left piece. Normal direction on the
    /// breaking side only.
    Break { set: usize, elem: usize, left_energy: Ratio },
}

/// All codimension-one arcs from `p` to `r` at the given grade, tagged by
/// kind. Uses the category's energy menu for break splits.
pub fn enumerate_codim1(
    c: &ArcCategory,
    p: usize,
    r: usize,
    grade: &Ratio,
) -> Result<Vec<(Arc, Codim1Kind)>, ArcError> {
    let mut scoped = c.clone();
    scoped.endpoints = Some((p, r));
    scoped.grade = grade.clone();
    scoped.validate()?;
    let n = scoped.labels.len() - 1;
    let interior = scoped.interior_labels();
    let mut out = Vec::new();

    // Forgotten interior index: the one-vertex arc missing exactly it.
    for &k in &interior {
        let mut arc = minimal_arc(&scoped, p, r);
        arc.verts[0].sets.remove(&k);
        if validate_arc(&scoped, &arc).is_ok() {
            out.push((arc, Codim1Kind::ForgetVertex { index: k }));
        }
    }
    // Breaks: two-edge arcs through any object of any set, with full
    // vertex labels and an energy split from the menu.
    for t in 0..=n {
        for elem in 0..scoped.sizes[t] {
            let set = scoped.labels[t];
            let left_same = t == 0;
            let right_same = t == n;
            let mut splits: Vec<(Ratio, Ratio)> = Vec::new();
            match scoped.gamma {
                GammaSpec::Trivial => {
                    if grade.is_zero() {
                        splits.push((Ratio::zero(), Ratio::zero()));
                    }
                }
                GammaSpec::NonnegRational => {
                    for l in &scoped.energy_menu {
                        let rght = grade - l;
                        if scoped.energy_menu.contains(&rght) {
                            if left_same && !scoped.gamma.admits(l) {
                                continue;
                            }
                            if right_same && !scoped.gamma.admits(&rght) {
                                continue;
                            }
                            splits.push((l.clone(), rght));
                        }
                    }
                    splits.sort();
                    splits.dedup();
                }
            }
            for (left, right) in splits {
                let edges = vec![
                    ArcEdge { set: scoped.labels[0], elem: p },
                    ArcEdge { set, elem },
                    ArcEdge { set: *scoped.labels.last().unwrap(), elem: r },
                ];
                let sets_left: BTreeSet<usize> = interior
                    .iter()
                    .copied()
                    .filter(|&m| scoped.labels[0] < m && m < set)
                    .collect();
                let sets_right: BTreeSet<usize> = interior
                    .iter()
                    .copied()
                    .filter(|&m| set < m && m < *scoped.labels.last().unwrap())
                    .collect();
                let arc = Arc {
                    edges,
                    verts: vec![
                        ArcVertex { sets: sets_left, energy: left.clone() },
                        ArcVertex { sets: sets_right, energy: right },
                    ],
                };
                if validate_arc(&scoped, &arc).is_ok() {
                    out.push((arc, Codim1Kind::Break { set, elem, left_energy: left }));
                }
            }
        }
    }
    out.sort_by(|(a, ka), (b, kb)| a.cmp(b).then_with(|| ka.cmp(kb)));
    out.dedup();
    Ok(out)
}

/// The face category dropping set position `i`. For interior `i` the
/// result is the full subcategory on arcs avoiding that set, with the same
/// endpoints; for `i` at either end the endpoints become free. The
/// inclusion of interior-face arcs is the identity on representations,
/// see [`face_inclusion`].
pub fn face(c: &ArcCategory, i: usize) -> Result<ArcCategory, ArcError> {
    c.validate()?;
    let n = c.labels.len() - 1;
    if i > n {
        return Err(ArcError::IndexRange(format!("face index {i} exceeds {n}")));
    }
    if n == 0 {
        return Err(ArcError::IndexRange("cannot take a face of a single set".into()));
    }
    let mut labels = c.labels.clone();
    let mut sizes = c.sizes.clone();
    labels.remove(i);
    sizes.remove(i);
    let endpoints = if i == 0 || i == n { None } else { c.endpoints };
    Ok(ArcCategory {
        gamma: c.gamma,
        labels,
        sizes,
        endpoints,
        grade: c.grade.clone(),
        energy_menu: c.energy_menu.clone(),
        max_codim: c.max_codim,
    })
}

/// The inclusion functor of an interior face: validates that `a` is an arc
/// of the face at position `i` and returns it as an arc of `c`. Errors for
/// the two end faces, whose arcs have different endpoints.
pub fn face_inclusion(c: &ArcCategory, i: usize, a: &Arc) -> Result<Arc, ArcError> {
    let n = c.labels.len() - 1;
    if i == 0 || i == n {
        return Err(ArcError::IndexRange(
            "end faces do not include into the fixed-endpoint category".into(),
        ));
    }
    let f = face(c, i)?;
    let mut bounded = f.clone();
    bounded.endpoints = c.endpoints;
    validate_arc(&bounded, a)?;
    validate_arc(c, a)?;
    Ok(a.clone())
}

/// Membership in the k-horn: the arc must not contain a vertex spanning
/// from the first to the last set whose label is the whole interior or the
/// whole interior minus `k`.
pub fn horn_membership(c: &ArcCategory, a: &Arc, k: usize) -> Result<bool, ArcError> {
    validate_arc(c, a)?;
    let n = c.labels.len() - 1;
    let interior: BTreeSet<usize> = c.interior_labels().into_iter().collect();
    if !interior.contains(&k) {
        return Err(ArcError::IndexRange(format!("{k} is not an interior index")));
    }
    let mut complement = interior.clone();
    complement.remove(&k);
    for (i, v) in a.verts.iter().enumerate() {
        let (j, j2) = (a.edges[i].set, a.edges[i + 1].set);
        if j == c.labels[0] && j2 == c.labels[n] && (v.sets == interior || v.sets == complement) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Block data of a boundary arc: `d` counts internal edges plus interior
/// indices other than `k` that are entirely absent; `eps` is 1 exactly
/// when `k` itself is entirely absent. Morphisms of arcs descend to the
/// componentwise order on `(d, eps)`.
///
/// Defined on every arc whose stratum stays in the boundary: horn members
/// and the strata of the facet the horn is missing. Arcs with a vertex
/// spanning the full window with the whole interior active meet the open
/// interior and have no block; those error.
pub fn block_functor(c: &ArcCategory, a: &Arc, k: usize) -> Result<(u32, u8), ArcError> {
    validate_arc(c, a)?;
    let n = c.labels.len() - 1;
    let interior: BTreeSet<usize> = c.interior_labels().into_iter().collect();
    if !interior.contains(&k) {
        return Err(ArcError::IndexRange(format!("{k} is not an interior index")));
    }
    for (i, v) in a.verts.iter().enumerate() {
        let (j, j2) = (a.edges[i].set, a.edges[i + 1].set);
        if j == c.labels[0] && j2 == c.labels[n] && v.sets == interior {
            return Err(ArcError::NotHornObject);
        }
    }
    let missing = missing_indices(c, a);
    let eps = u8::from(missing.contains(&k));
    let d = a.internal_edge_count() + missing.iter().filter(|&&m| m != k).count();
    Ok((d as u32, eps))
}

/// All morphism data into `a`: pairs of a collapse set `E` (internal edge
/// positions) and an activation set `M` (missing indices), together with
/// the source arc each datum produces.
pub fn arrows_into(c: &ArcCategory, a: &Arc) -> Result<Vec<(Arc, BTreeSet<usize>, BTreeSet<usize>)>, ArcError> {
    validate_arc(c, a)?;
    let internal = a.internal_edge_positions();
    let missing: Vec<usize> = missing_indices(c, a).into_iter().collect();
    let mut out = Vec::new();
    for emask in 0u32..(1 << internal.len()) {
        let e: BTreeSet<usize> = internal
            .iter()
            .enumerate()
            .filter(|(i, _)| emask & (1 << i) != 0)
            .map(|(_, &p)| p)
            .collect();
        for mmask in 0u32..(1 << missing.len()) {
            let m: BTreeSet<usize> = missing
                .iter()
                .enumerate()
                .filter(|(i, _)| mmask & (1 << i) != 0)
                .map(|(_, &x)| x)
                .collect();
            let src = collapse(c, a, &e, &m)?;
            out.push((src, e.clone(), m));
        }
    }
    Ok(out)
}

/// Composes two collapse data: `(e2, m2)` on `a` yields `b`; `(e1, m1)` on
/// `b` yields the composite source. Returns the datum on `a` describing
/// the composite morphism.
pub fn compose_collapse(
    a: &Arc,
    e2: &BTreeSet<usize>,
    m2: &BTreeSet<usize>,
    e1: &BTreeSet<usize>,
    m1: &BTreeSet<usize>,
) -> (BTreeSet<usize>, BTreeSet<usize>) {
    // Positions of b's edges inside a.
    let surviving: Vec<usize> = (0..a.edges.len())
        .filter(|&i| i == 0 || !e2.contains(&i))
        .collect();
    let mut e: BTreeSet<usize> = e2.clone();
    e.extend(e1.iter().map(|&i| surviving[i]));
    let mut m = m2.clone();
    m.extend(m1.iter().copied());
    (e, m)
}

fn slice_of_arc(c: &ArcCategory, a: &Arc) -> Result<SlicePoset, String> {
    let arrows = arrows_into(c, a).map_err(|e| e.to_string())?;
    let n = arrows.len();
    let key = |e: &BTreeSet<usize>, m: &BTreeSet<usize>| -> String {
        format!("E{:?}M{:?}", e.iter().collect::<Vec<_>>(), m.iter().collect::<Vec<_>>())
    };
    let index: std::collections::BTreeMap<String, usize> = arrows
        .iter()
        .enumerate()
        .map(|(i, (_, e, m))| (key(e, m), i))
        .collect();
    if index.len() != n {
        return Err("duplicate morphism data".into());
    }
    let mut witness = vec![vec![0u32; n]; n];
    for (j, (src_b, e2, m2)) in arrows.iter().enumerate() {
        // All further collapses of the source of arrow j.
        let further = arrows_into(c, src_b).map_err(|e| e.to_string())?;
        for (_, e1, m1) in &further {
            let (e, m) = compose_collapse(a, e2, m2, e1, m1);
            let composite = collapse(c, a, &e, &m).map_err(|e| e.to_string())?;
            let i = *index
                .get(&key(&e, &m))
                .ok_or_else(|| "composite datum not an arrow".to_string())?;
            // The composite datum must reproduce the composite source.
            let (src_i, _, _) = &arrows[i];
            if src_i != &composite {
                return Err("composite collapse disagrees with its datum".into());
            }
            witness[i][j] += 1;
        }
    }
    let mut leq = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if witness[i][j] > 1 {
                return Err(format!(
                    "overcategory not thin: {} witnesses",
                    witness[i][j]
                ));
            }
            leq[i][j] = witness[i][j] == 1;
        }
    }
    Ok(SlicePoset {
        ids: arrows.iter().map(|(_, e, m)| key(e, m)).collect(),
        src_codim: arrows.iter().map(|(s, _, _)| codim(c, s)).collect(),
        leq,
    })
}

/// Checks the Boolean overcategory property for every arc of codimension
/// at most the bound, streaming arc by arc. The report's first violation
/// names the arc.
pub fn corner_report(c: &ArcCategory, max_codim: Option<u32>) -> Result<CheckReport, ArcError> {
    let arcs = enumerate_objects(c, max_codim)?;
    let ok = maybe_par_all(&arcs, |a| match slice_of_arc(c, a) {
        Ok(sp) => boolean_check(&sp, codim(c, a)).is_ok(),
        Err(_) => false,
    });
    if ok {
        return Ok(CheckReport::passing());
    }
    for a in &arcs {
        match slice_of_arc(c, a) {
            Ok(sp) => {
                if let Err(e) = boolean_check(&sp, codim(c, a)) {
                    return Ok(CheckReport::failing(format!("arc {}: {e}", a.key())));
                }
            }
            Err(e) => return Ok(CheckReport::failing(format!("arc {}: {e}", a.key()))),
        }
    }
    Ok(CheckReport::passing())
}

/// Materializes the bounded stratification category as an explicit
/// [`CornerCategory`]: one object per arc, one arrow per morphism datum.
pub fn to_corner_category(c: &ArcCategory, max_codim: Option<u32>) -> Result<CornerCategory, ArcError> {
    let arcs = enumerate_objects(c, max_codim)?;
    let bound = resolve_bound(c, max_codim)?;
    let objects: Vec<(String, u32)> =
        arcs.iter().map(|a| (a.key(), codim(c, a))).collect();
    let known: BTreeSet<String> = objects.iter().map(|(k, _)| k.clone()).collect();
    let arrow_name = |tgt: &Arc, e: &BTreeSet<usize>, m: &BTreeSet<usize>| {
        format!(
            "{}<E{}M{}",
            tgt.key(),
            e.iter().map(|x| x.to_string()).join(","),
            m.iter().map(|x| x.to_string()).join(",")
        )
    };
    let mut arrows = Vec::new();
    let mut compose_entries = Vec::new();
    for a in &arcs {
        let ins = arrows_into(c, a).map_err(|e| e)?;
        for (src, e, m) in &ins {
            if e.is_empty() && m.is_empty() {
                continue; // identity
            }
            if !known.contains(&src.key()) {
                return Err(ArcError::Malformed(format!(
                    "source of an arrow into {} exceeds the codim bound {bound}",
                    a.key()
                )));
            }
            arrows.push((arrow_name(a, e, m), src.key(), a.key()));
        }
        // Composition entries: inner datum on the source of each arrow.
        for (src, e2, m2) in &ins {
            if e2.is_empty() && m2.is_empty() {
                continue;
            }
            let inner = arrows_into(c, src)?;
            for (_, e1, m1) in &inner {
                if e1.is_empty() && m1.is_empty() {
                    continue;
                }
                let (e, m) = compose_collapse(a, e2, m2, e1, m1);
                compose_entries.push((
                    arrow_name(a, e2, m2),
                    arrow_name(src, e1, m1),
                    arrow_name(a, &e, &m),
                ));
            }
        }
    }
    CornerCategory::new(objects, arrows, compose_entries)
        .map_err(|e| ArcError::Malformed(e.to_string()))
}

/// Relabels `a` as an arc of the degenerate sequence that repeats set
/// position `i`. The image arc activates the duplicated index at the
/// unique vertex spanning it, so the face dropping that index recovers
/// `a`. Requires consecutive set names `0..=n`. Returns the degenerate
/// category and the image arc.
pub fn degeneracy_relabel(c: &ArcCategory, a: &Arc, i: usize) -> Result<(ArcCategory, Arc), ArcError> {
    validate_arc(c, a)?;
    let n = c.labels.len() - 1;
    if c.labels != (0..=n).collect::<Vec<_>>() {
        return Err(ArcError::MalformedCategory(
            "degeneracy relabeling needs consecutive set names".into(),
        ));
    }
    if i > n {
        return Err(ArcError::IndexRange(format!("degeneracy index {i} exceeds {n}")));
    }
    let carried = if i == 0 { 1 } else { i };
    let shift_set = |j: usize| -> usize {
        if j < i {
            j
        } else if j > i {
            j + 1
        } else if i == 0 {
            0
        } else {
            i + 1
        }
    };
    let shift_label = |m: usize| -> usize {
        if m < i {
            m
        } else {
            m + 1
        }
    };
    let mut sizes = c.sizes.clone();
    sizes.insert(i, c.sizes[i]);
    let target = ArcCategory {
        gamma: c.gamma,
        labels: (0..=n + 1).collect(),
        sizes,
        endpoints: c.endpoints,
        grade: c.grade.clone(),
        energy_menu: c.energy_menu.clone(),
        max_codim: c.max_codim,
    };
    let edges: Vec<ArcEdge> = a
        .edges
        .iter()
        .map(|e| ArcEdge { set: shift_set(e.set), elem: e.elem })
        .collect();
    let mut verts = Vec::with_capacity(a.verts.len());
    for (v_idx, v) in a.verts.iter().enumerate() {
        let (j, j2) = (a.edges[v_idx].set, a.edges[v_idx + 1].set);
        let mut sets: BTreeSet<usize> = v.sets.iter().map(|&m| shift_label(m)).collect();
        let crossing = if i == 0 { j == 0 && j2 >= 1 } else { j < i && i <= j2 };
        if crossing {
            sets.insert(carried);
        }
        verts.push(ArcVertex { sets, energy: v.energy.clone() });
    }
    let image = Arc { edges, verts };
    validate_arc(&target, &image)?;
    Ok((target, image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn ratio(n: i64, d: i64) -> Ratio {
        Ratio::new(n.into(), d.into())
    }

    #[test]
    fn minimal_arc_has_codim_zero() {
        let c = ArcCategory::trivial(vec![1, 1, 1], Some((0, 0)));
        let a = minimal_arc(&c, 0, 0);
        assert!(validate_arc(&c, &a).is_ok());
        assert_eq!(codim(&c, &a), 0);
        assert_eq!(a.verts[0].sets, BTreeSet::from([1]));
    }

    #[test]
    fn three_set_examples_have_codim_one() {
        let c = ArcCategory::trivial(vec![1, 1, 1], Some((0, 0)));
        // a—b—c with empty labels
        let abc = Arc {
            edges: vec![
                ArcEdge { set: 0, elem: 0 },
                ArcEdge { set: 1, elem: 0 },
                ArcEdge { set: 2, elem: 0 },
            ],
            verts: vec![
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
            ],
        };
        assert_eq!(codim(&c, &abc), 1);
        // a—c with empty label
        let ac = Arc {
            edges: vec![ArcEdge { set: 0, elem: 0 }, ArcEdge { set: 2, elem: 0 }],
            verts: vec![ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() }],
        };
        assert_eq!(codim(&c, &ac), 1);
    }

    #[test]
    fn two_set_enumeration_to_codim_one() {
        let c = ArcCategory::trivial(vec![1, 1], Some((0, 0)));
        let arcs = enumerate_objects(&c, Some(1)).unwrap();
        assert_eq!(arcs.len(), 3);
        assert_eq!(codim(&c, &arcs[0]), 0);
        assert_eq!(codim(&c, &arcs[1]), 1);
        assert_eq!(codim(&c, &arcs[2]), 1);
    }

    #[test]
    fn three_set_enumeration_to_codim_one() {
        let c = ArcCategory::trivial(vec![1, 1, 1], Some((0, 0)));
        let arcs = enumerate_objects(&c, Some(1)).unwrap();
        assert_eq!(arcs.len(), 5);
        assert_eq!(arcs.iter().filter(|a| codim(&c, a) == 0).count(), 1);
        assert_eq!(arcs.iter().filter(|a| codim(&c, a) == 1).count(), 4);
    }

    #[test]
    fn max_codim_zero_yields_minimal_objects_only() {
        let c = ArcCategory::trivial(vec![2, 2], None);
        let arcs = enumerate_objects(&c, Some(0)).unwrap();
        assert_eq!(arcs.len(), 4); // all (p, r) pairs
        assert!(arcs.iter().all(|a| codim(&c, a) == 0));
    }

    #[test]
    fn codim1_classification_three_sets() {
        let c = ArcCategory::trivial(vec![1, 1, 1], None);
        let tagged = enumerate_codim1(&c, 0, 0, &Ratio::zero()).unwrap();
        let forget = tagged
            .iter()
            .filter(|(_, k)| matches!(k, Codim1Kind::ForgetVertex { .. }))
            .count();
        let breaks = tagged
            .iter()
            .filter(|(_, k)| matches!(k, Codim1Kind::Break { .. }))
            .count();
        assert_eq!((forget, breaks), (1, 3));
    }

    #[test]
    fn codim1_classification_matches_enumeration() {
        let c = ArcCategory::trivial(vec![2, 1, 2], Some((1, 0)));
        let tagged = enumerate_codim1(&c, 1, 0, &Ratio::zero()).unwrap();
        let mut scoped = c.clone();
        scoped.endpoints = Some((1, 0));
        let all = enumerate_objects(&scoped, Some(1)).unwrap();
        let mut from_enum: Vec<Arc> =
            all.into_iter().filter(|a| codim(&scoped, a) == 1).collect();
        let mut from_tags: Vec<Arc> = tagged.into_iter().map(|(a, _)| a).collect();
        from_enum.sort();
        from_tags.sort();
        assert_eq!(from_enum, from_tags);
    }

    #[test]
    fn single_set_codim1_is_all_breaks() {
        let mut c = ArcCategory::trivial(vec![2], None);
        c.gamma = GammaSpec::NonnegRational;
        c.energy_menu = vec![Ratio::zero(), Ratio::one()];
        c.grade = Ratio::one();
        let tagged = enumerate_codim1(&c, 0, 1, &Ratio::one()).unwrap();
        assert!(!tagged.is_empty());
        assert!(tagged.iter().all(|(_, k)| matches!(k, Codim1Kind::Break { .. })));
    }

    #[test]
    fn two_set_codim1_has_two_breaks_no_forgets() {
        let c = ArcCategory::trivial(vec![1, 1], None);
        let tagged = enumerate_codim1(&c, 0, 0, &Ratio::zero()).unwrap();
        assert_eq!(tagged.len(), 2);
        assert!(tagged.iter().all(|(_, k)| matches!(k, Codim1Kind::Break { .. })));
    }

    #[test]
    fn composition_of_minimal_arcs_breaks_once() {
        let left = ArcCategory::trivial(vec![2], None);
        let right = ArcCategory::trivial(vec![2], None);
        let a = minimal_arc(&left, 0, 1);
        let b = minimal_arc(&right, 1, 0);
        let (cat, ab) = compose_arcs(&left, &right, &a, &b).unwrap();
        assert_eq!(ab.edges.len(), 3);
        assert_eq!(codim(&cat, &ab), 1);
    }

    #[test]
    fn composition_is_associative() {
        let c = ArcCategory::trivial(vec![2], None);
        let a = minimal_arc(&c, 0, 1);
        let b = minimal_arc(&c, 1, 1);
        let d = minimal_arc(&c, 1, 0);
        let (cab, ab) = compose_arcs(&c, &c, &a, &b).unwrap();
        let (cbd, bd) = compose_arcs(&c, &c, &b, &d).unwrap();
        let (c1, left) = compose_arcs(&cab, &c, &ab, &d).unwrap();
        let (c2, right) = compose_arcs(&c, &cbd, &a, &bd).unwrap();
        assert_eq!(left, right);
        assert_eq!(c1.labels, c2.labels);
    }

    #[test]
    fn collapse_nothing_is_identity() {
        let c = ArcCategory::trivial(vec![1, 1, 1], Some((0, 0)));
        let a = {
            let arcs = enumerate_objects(&c, Some(2)).unwrap();
            arcs.last().unwrap().clone()
        };
        let r = collapse(&c, &a, &BTreeSet::new(), &BTreeSet::new()).unwrap();
        assert_eq!(r, a);
    }

    #[test]
    fn collapse_everything_reaches_the_minimal_arc() {
        let c = ArcCategory::trivial(vec![1, 1, 1], Some((0, 0)));
        for a in enumerate_objects(&c, Some(3)).unwrap() {
            let e: BTreeSet<usize> = a.internal_edge_positions().into_iter().collect();
            let m = missing_indices(&c, &a);
            let r = collapse(&c, &a, &e, &m).unwrap();
            assert_eq!(r, minimal_arc(&c, 0, 0), "from {}", a.key());
            assert_eq!(r.verts[0].sets, BTreeSet::from([1]));
        }
    }

    #[test]
    fn collapse_rejects_bad_data() {
        let c = ArcCategory::trivial(vec![1, 1], Some((0, 0)));
        let a = minimal_arc(&c, 0, 0);
        assert!(collapse(&c, &a, &BTreeSet::from([0]), &BTreeSet::new()).is_err());
        assert!(collapse(&c, &a, &BTreeSet::new(), &BTreeSet::from([1])).is_err());
    }

    #[test]
    fn arrows_into_counts_are_powers_of_two() {
        let c = ArcCategory::trivial(vec![2, 1, 2], None);
        let mut scoped = c.clone();
        scoped.endpoints = Some((0, 0));
        for a in enumerate_objects(&scoped, Some(3)).unwrap() {
            let n = arrows_into(&scoped, &a).unwrap().len();
            assert_eq!(n, 1 << codim(&scoped, &a), "arc {}", a.key());
        }
    }

    #[test]
    fn faces_recover_single_sets() {
        let c = ArcCategory::trivial(vec![3, 2], None);
        let d0 = face(&c, 0).unwrap();
        let d1 = face(&c, 1).unwrap();
        assert_eq!(d0.labels, vec![1]);
        assert_eq!(d0.sizes, vec![2]);
        assert_eq!(d1.labels, vec![0]);
        assert_eq!(d1.sizes, vec![3]);
    }

    #[test]
    fn face_identities_hold_on_categories_and_objects() {
        let c = ArcCategory::trivial(vec![2, 1, 2, 1], None);
        for i in 0..3 {
            for j in (i + 1)..4 {
                let lhs = face(&face(&c, j).unwrap(), i).unwrap();
                let rhs = face(&face(&c, i).unwrap(), j - 1).unwrap();
                assert_eq!(lhs, rhs);
                let la = enumerate_objects(&lhs, Some(2)).unwrap();
                let ra = enumerate_objects(&rhs, Some(2)).unwrap();
                assert_eq!(la, ra);
            }
        }
    }

    #[test]
    fn interior_face_inclusion_validates() {
        let c = ArcCategory::trivial(vec![1, 2, 1], Some((0, 0)));
        let f = face(&c, 1).unwrap();
        let mut bounded = f.clone();
        bounded.endpoints = Some((0, 0));
        for a in enumerate_objects(&bounded, Some(2)).unwrap() {
            let included = face_inclusion(&c, 1, &a).unwrap();
            assert_eq!(included, a);
        }
        assert!(face_inclusion(&c, 0, &minimal_arc(&bounded, 0, 0)).is_err());
    }

    #[test]
    fn horn_membership_examples() {
        let c = ArcCategory::trivial(vec![1, 1, 1], Some((0, 0)));
        let minimal = minimal_arc(&c, 0, 0);
        assert!(!horn_membership(&c, &minimal, 1).unwrap());
        let ac = Arc {
            edges: vec![ArcEdge { set: 0, elem: 0 }, ArcEdge { set: 2, elem: 0 }],
            verts: vec![ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() }],
        };
        assert!(!horn_membership(&c, &ac, 1).unwrap());
        let abc = Arc {
            edges: vec![
                ArcEdge { set: 0, elem: 0 },
                ArcEdge { set: 1, elem: 0 },
                ArcEdge { set: 2, elem: 0 },
            ],
            verts: vec![
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
            ],
        };
        assert!(horn_membership(&c, &abc, 1).unwrap());
    }

    #[test]
    fn block_functor_examples() {
        let c = ArcCategory::trivial(vec![2, 1, 1], Some((0, 0)));
        let abc = Arc {
            edges: vec![
                ArcEdge { set: 0, elem: 0 },
                ArcEdge { set: 1, elem: 0 },
                ArcEdge { set: 2, elem: 0 },
            ],
            verts: vec![
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
            ],
        };
        assert_eq!(block_functor(&c, &abc, 1).unwrap(), (1, 0));
        // a—q—b—c with q in the first set
        let aqbc = Arc {
            edges: vec![
                ArcEdge { set: 0, elem: 0 },
                ArcEdge { set: 0, elem: 1 },
                ArcEdge { set: 1, elem: 0 },
                ArcEdge { set: 2, elem: 0 },
            ],
            verts: vec![
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
                ArcVertex { sets: BTreeSet::new(), energy: Ratio::zero() },
            ],
        };
        assert_eq!(block_functor(&c, &aqbc, 1).unwrap(), (2, 0));
        // four sets: a—c arc with label {2} has (0, 1) for k = 1
        let c4 = ArcCategory::trivial(vec![1, 1, 1, 1], Some((0, 0)));
        let ac = Arc {
            edges: vec![ArcEdge { set: 0, elem: 0 }, ArcEdge { set: 3, elem: 0 }],
            verts: vec![ArcVertex { sets: BTreeSet::from([2]), energy: Ratio::zero() }],
        };
        assert_eq!(block_functor(&c4, &ac, 1).unwrap(), (0, 1));
        assert!(block_functor(&c4, &minimal_arc(&c4, 0, 0), 1).is_err());
    }

    #[test]
    fn corner_report_passes_small_categories() {
        for sizes in [vec![2], vec![1, 1], vec![2, 2], vec![1, 1, 1], vec![2, 1, 2]] {
            let c = ArcCategory::trivial(sizes.clone(), None);
            let report = corner_report(&c, Some(3)).unwrap();
            assert!(report.pass, "{sizes:?}: {report}");
        }
    }

    #[test]
    fn explicit_corner_category_matches_streaming_verdict() {
        let c = ArcCategory::trivial(vec![1, 1], Some((0, 0)));
        let cat = to_corner_category(&c, Some(3)).unwrap();
        let report = crate::corner::is_corner_model(&cat);
        assert!(report.pass, "{report}");
        assert!(corner_report(&c, Some(3)).unwrap().pass);
    }

    #[test]
    fn rational_grades_enumerate_with_menu() {
        let mut c = ArcCategory::trivial(vec![2], Some((0, 1)));
        c.gamma = GammaSpec::NonnegRational;
        c.grade = ratio(3, 2);
        c.energy_menu = vec![Ratio::zero(), ratio(1, 2), Ratio::one(), ratio(3, 2)];
        let arcs = enumerate_objects(&c, Some(1)).unwrap();
        assert!(arcs.iter().all(|a| a.grade() == ratio(3, 2)));
        let minimal: Vec<_> = arcs.iter().filter(|a| codim(&c, a) == 0).collect();
        assert_eq!(minimal.len(), 1);
        // Breaks through either element with each compatible split.
        let broken = arcs.iter().filter(|a| codim(&c, a) == 1).count();
        assert_eq!(broken, 8);
    }

    #[test]
    fn degeneracy_relabel_round_trips_through_the_face() {
        let c = ArcCategory::trivial(vec![2, 3], Some((0, 1)));
        for a in enumerate_objects(&c, Some(2)).unwrap() {
            for i in 0..=1 {
                let (target, image) = degeneracy_relabel(&c, &a, i).unwrap();
                let carried = if i == 0 { 1 } else { i };
                // The carried index is active in the image.
                assert!(!missing_indices(&target, &image).contains(&carried));
                assert!(image.verts.iter().any(|v| v.sets.contains(&carried)));
                // Dropping it recovers the original arc.
                let mut back = image.clone();
                for v in &mut back.verts {
                    v.sets.remove(&carried);
                    v.sets = v
                        .sets
                        .iter()
                        .map(|&m| if m > carried { m - 1 } else { m })
                        .collect();
                }
                for e in &mut back.edges {
                    if e.set > carried {
                        e.set -= 1;
                    }
                }
                assert_eq!(back, a);
            }
        }
    }
}
