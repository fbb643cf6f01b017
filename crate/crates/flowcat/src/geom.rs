//! Exact semialgebraic models for the corner geometry of flow moduli.
//!
//! Three layers live here. L-shaped truncation blocks with their facet
//! combinatorics and semicosimplicial structure; the conic degeneration
//! bundle over the nonnegative orthant whose fibers are chains of
//! projective lines; and the weighted-colimit combinatorics that glue the
//! charts of an inner horn of flow data into a filling of its missing
//! facet. All computations are exact over the rationals.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arcs::{self, Arc, ArcCategory, ArcEdge, ArcVertex, GammaSpec, Ratio};
use crate::corner::{self, CornerCategory};
use crate::flow::{
    map_cells, single_vertex_arc, validate_flow_simplex, Cells, EquivRecord, Facet, FacetKind,
    FacetPiece, FlowBimodule, FlowSimplex, FormalComponent,
};
use crate::par::maybe_par_flat_map;
use crate::report::CheckReport;

// ---------------------------------------------------------------------------
// L-blocks
// ---------------------------------------------------------------------------

/// Default truncation parameter, one half.
pub fn default_epsilon() -> Ratio {
    Ratio::new(BigInt::one(), BigInt::from(2))
}

/// An L-shaped truncation block.
///
/// Flag 0 is the region of the `d`-cube where the coordinate product stays
/// at most `epsilon`. Flag 1 thickens it by a collar coordinate `y`, cut
/// out of the `(d+1)`-cube by `(1-y)^2 + (prod x)^2 / epsilon^2 <= 1`.
/// Both blocks are empty for `d = 0`: the empty product is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LBlock {
    pub d: usize,
    pub flag: u8,
    pub epsilon: Ratio,
}

impl LBlock {
    pub fn new(d: usize, flag: u8) -> Self {
        assert!(flag <= 1, "the flag is 0 or 1");
        LBlock { d, flag, epsilon: default_epsilon() }
    }

    /// Same block with a custom `epsilon`, which must lie strictly
    /// between 0 and 1.
    pub fn with_epsilon(d: usize, flag: u8, epsilon: Ratio) -> Result<Self, String> {
        if flag > 1 {
            return Err("the flag is 0 or 1".into());
        }
        if epsilon <= Ratio::zero() || epsilon >= Ratio::one() {
            return Err("epsilon must lie strictly between 0 and 1".into());
        }
        Ok(LBlock { d, flag, epsilon })
    }

    /// Number of ambient coordinates: `d` plus one collar coordinate when
    /// the flag is set.
    pub fn ambient_dim(&self) -> usize {
        self.d + self.flag as usize
    }

    /// Exact membership of a rational point, coordinates in ambient order
    /// with the collar coordinate last.
    pub fn contains(&self, pt: &[Ratio]) -> Result<bool, String> {
        if pt.len() != self.ambient_dim() {
            return Err(format!(
                "expected {} coordinates, got {}",
                self.ambient_dim(),
                pt.len()
            ));
        }
        let zero = Ratio::zero();
        let one = Ratio::one();
        if pt.iter().any(|x| *x < zero || *x > one) {
            return Ok(false);
        }
        if self.d == 0 {
            // The empty product is 1, which never satisfies either cut.
            return Ok(false);
        }
        let mut prod = Ratio::one();
        for x in &pt[..self.d] {
            prod = &prod * x;
        }
        if self.flag == 0 {
            return Ok(prod <= self.epsilon);
        }
        let y = &pt[self.d];
        let a = &one - y;
        let lhs = &(&a * &a) + &(&(&prod * &prod) / &(&self.epsilon * &self.epsilon));
        Ok(lhs <= one)
    }
}

/// Exact membership in the block, freestanding form.
pub fn lblock_contains(block: &LBlock, pt: &[Ratio]) -> Result<bool, String> {
    block.contains(pt)
}

/// Kind of a boundary facet of an L-block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LFacetKind {
    /// Wall `x_j = 0` (1-based).
    CoordZero { j: usize },
    /// Wall `x_j = 1`, glued to the next smaller block.
    CoordOne { j: usize },
    /// Wall `y = 1` of a flag-1 block, glued to the flag-0 block of the
    /// same dimension.
    CollarOne,
    /// The truncation hypersurface itself.
    InteriorHypersurface,
}

/// One facet of an L-block. `glues_to` names the `(d, flag)` of the block
/// a coordinate-one or collar facet is identified with, when that block
/// is nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LFacet {
    pub kind: LFacetKind,
    pub label: String,
    pub glues_to: Option<(usize, u8)>,
}

/// Boundary facets of the block `(d, flag)`.
///
/// Counts: `2d + 1` for flag 0 (the single hypersurface facet at `d = 0`),
/// `2d + 2` for flag 1 and `d >= 2`, three for `(1, 1)` since the wall
/// `x_1 = 1` would glue to the empty block `(0, 1)`, and none for `(0, 1)`.
/// Flag-1 blocks never have a `y = 0` facet: at `y = 0` the cut equation
/// pinches onto the coordinate walls.
pub fn lblock_facets(d: usize, flag: u8) -> Vec<LFacet> {
    assert!(flag <= 1, "the flag is 0 or 1");
    let mut out = Vec::new();
    if flag == 0 {
        for j in 1..=d {
            out.push(LFacet {
                kind: LFacetKind::CoordZero { j },
                label: format!("x{j}=0"),
                glues_to: None,
            });
        }
        for j in 1..=d {
            out.push(LFacet {
                kind: LFacetKind::CoordOne { j },
                label: format!("x{j}=1"),
                glues_to: if d >= 2 { Some((d - 1, 0)) } else { None },
            });
        }
        out.push(LFacet {
            kind: LFacetKind::InteriorHypersurface,
            label: "prod=eps".into(),
            glues_to: None,
        });
        return out;
    }
    if d == 0 {
        return out;
    }
    for j in 1..=d {
        out.push(LFacet {
            kind: LFacetKind::CoordZero { j },
            label: format!("x{j}=0"),
            glues_to: None,
        });
    }
    if d >= 2 {
        for j in 1..=d {
            out.push(LFacet {
                kind: LFacetKind::CoordOne { j },
                label: format!("x{j}=1"),
                glues_to: Some((d - 1, 1)),
            });
        }
    }
    out.push(LFacet { kind: LFacetKind::CollarOne, label: "y=1".into(), glues_to: Some((d, 0)) });
    out.push(LFacet {
        kind: LFacetKind::InteriorHypersurface,
        label: "prod=eps".into(),
        glues_to: None,
    });
    out
}

fn grid_points(ambient: usize) -> Vec<Vec<Ratio>> {
    if ambient == 0 {
        return vec![vec![]];
    }
    let vals: Vec<Ratio> = if ambient <= 3 {
        vec![
            Ratio::zero(),
            Ratio::new(BigInt::one(), BigInt::from(4)),
            Ratio::new(BigInt::one(), BigInt::from(2)),
            Ratio::one(),
        ]
    } else {
        vec![Ratio::zero(), Ratio::new(BigInt::one(), BigInt::from(2)), Ratio::one()]
    };
    (0..ambient)
        .map(|_| vals.clone())
        .multi_cartesian_product()
        .collect()
}

/// Image of a point of `L_{d, flag}` under the coface inserting a
/// coordinate 1 at x-slot `j` (1-based). The collar coordinate stays last.
fn coface_image(pt: &[Ratio], d: usize, j: usize) -> Vec<Ratio> {
    let mut out = pt[..d].to_vec();
    out.insert(j - 1, Ratio::one());
    out.extend_from_slice(&pt[d..]);
    out
}

/// Verifies the semicosimplicial structure of the L-blocks up to
/// dimension `max_d` (at most 6) by exact pointwise computation on
/// rational sample grids.
///
/// Checked: every coface `x_j = 1` preserves membership in both
/// directions; the cosimplicial identities commute pointwise; and the
/// collar inclusion identifies `L_{d,0}` with the slice `y = 1` of
/// `L_{d,1}`.
pub fn cosimplicial_check(max_d: usize) -> Result<CheckReport, String> {
    if max_d > 6 {
        return Err("the exact grid check is bounded at dimension 6".into());
    }
    let mut report = CheckReport::passing();
    for flag in 0..=1u8 {
        // Cofaces preserve membership exactly.
        for d in 0..max_d {
            let src = LBlock::new(d, flag);
            let dst = LBlock::new(d + 1, flag);
            let grid = grid_points(src.ambient_dim());
            for j in 1..=d + 1 {
                let bad = maybe_par_flat_map(&grid, |pt| {
                    let img = coface_image(pt, d, j);
                    match (src.contains(pt), dst.contains(&img)) {
                        (Ok(a), Ok(b)) if a == b => vec![],
                        _ => vec![format!(
                            "coface x_{j}=1 out of L_({d},{flag}) changes membership at {pt:?}"
                        )],
                    }
                });
                for v in bad {
                    report.push(v);
                }
            }
        }
        // Cosimplicial identities: inserting at i then at jj equals
        // inserting at jj-1 then at i, for i < jj.
        for d in 0..max_d.saturating_sub(1) {
            let grid = grid_points(LBlock::new(d, flag).ambient_dim());
            for i in 1..=d + 1 {
                for jj in i + 1..=d + 2 {
                    let bad = maybe_par_flat_map(&grid, |pt| {
                        let left = coface_image(&coface_image(pt, d, i), d + 1, jj);
                        let right = coface_image(&coface_image(pt, d, jj - 1), d + 1, i);
                        if left == right {
                            vec![]
                        } else {
                            vec![format!(
                                "cosimplicial identity ({i},{jj}) fails on L_({d},{flag}) at {pt:?}"
                            )]
                        }
                    });
                    for v in bad {
                        report.push(v);
                    }
                }
            }
        }
    }
    // Collar: a point lies in the flag-0 block exactly when it lies on
    // the y = 1 slice of the flag-1 block.
    for d in 0..=max_d {
        let flat = LBlock::new(d, 0);
        let thick = LBlock::new(d, 1);
        let grid = grid_points(flat.ambient_dim());
        let bad = maybe_par_flat_map(&grid, |pt| {
            let mut lifted = pt.clone();
            lifted.push(Ratio::one());
            match (flat.contains(pt), thick.contains(&lifted)) {
                (Ok(a), Ok(b)) if a == b => vec![],
                _ => vec![format!("collar slice y=1 of L_({d},1) disagrees with L_({d},0) at {pt:?}")],
            }
        });
        for v in bad {
            report.push(v);
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Conic degeneration bundles
// ---------------------------------------------------------------------------

/// The conic degeneration bundle over the nonnegative orthant: `n` base
/// coordinates `t_1..t_n` and `n + 1` projective-line factors linked by
/// the bihomogeneous relations `x_{i-1} y_i = t_i x_i y_{i-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConicBundle {
    pub n: usize,
}

impl ConicBundle {
    pub fn new(n: usize) -> Self {
        ConicBundle { n }
    }

    /// Exact membership: `t` has length `n`, `pairs` holds the `n + 1`
    /// projective factors as nonnegative coordinate pairs. A pair (0, 0)
    /// is no projective point and is rejected.
    pub fn contains(&self, t: &[Ratio], pairs: &[(Ratio, Ratio)]) -> Result<bool, String> {
        if t.len() != self.n {
            return Err(format!("expected {} base coordinates, got {}", self.n, t.len()));
        }
        if pairs.len() != self.n + 1 {
            return Err(format!("expected {} factors, got {}", self.n + 1, pairs.len()));
        }
        let zero = Ratio::zero();
        for p in pairs {
            if p.0.is_zero() && p.1.is_zero() {
                return Err("a projective factor needs a nonzero coordinate".into());
            }
        }
        if t.iter().any(|v| *v < zero) {
            return Ok(false);
        }
        if pairs.iter().any(|p| p.0 < zero || p.1 < zero) {
            return Ok(false);
        }
        for i in 1..=self.n {
            let lhs = &pairs[i - 1].0 * &pairs[i].1;
            let rhs = &(&t[i - 1] * &pairs[i].0) * &pairs[i - 1].1;
            if lhs != rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Scales a projective factor so its maximum coordinate is 1.
pub fn normalize_pair(p: &(Ratio, Ratio)) -> (Ratio, Ratio) {
    let m = if p.0 >= p.1 { p.0.clone() } else { p.1.clone() };
    (&p.0 / &m, &p.1 / &m)
}

/// One irreducible component of a fiber of the conic bundle: the window
/// of factor indices that vary along it, the pinned values of the other
/// factors, and a sample configuration on the component (all factors,
/// normalized so the maximum coordinate of each is 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FiberComponent {
    pub window: (usize, usize),
    pub constant: Vec<(usize, (Ratio, Ratio))>,
    pub sample: Vec<(Ratio, Ratio)>,
}

/// Decomposes the fiber of the bundle over `t` into components: each zero
/// of `t` cuts the chain of projective lines, so `k` zeros give `k + 1`
/// components. Factors before a component's window sit at (0, 1), factors
/// after it at (1, 0).
pub fn conic_fiber(n: usize, t: &[Ratio]) -> Result<Vec<FiberComponent>, String> {
    if t.len() != n {
        return Err(format!("expected {n} base coordinates, got {}", t.len()));
    }
    if t.iter().any(|v| *v < Ratio::zero()) {
        return Err("base coordinates must be nonnegative".into());
    }
    let zeros: Vec<usize> = (1..=n).filter(|i| t[i - 1].is_zero()).collect();
    let starts: Vec<usize> = std::iter::once(0).chain(zeros.iter().copied()).collect();
    let ends: Vec<usize> =
        zeros.iter().map(|z| z - 1).chain(std::iter::once(n)).collect();
    let bundle = ConicBundle::new(n);
    let mut out = Vec::new();
    for (&start, &end) in starts.iter().zip(ends.iter()) {
        let mut sample: Vec<(Ratio, Ratio)> = Vec::with_capacity(n + 1);
        let mut constant = Vec::new();
        let mut y = Ratio::one();
        for idx in 0..=n {
            if idx < start {
                sample.push((Ratio::zero(), Ratio::one()));
                constant.push((idx, (Ratio::zero(), Ratio::one())));
            } else if idx > end {
                sample.push((Ratio::one(), Ratio::zero()));
                constant.push((idx, (Ratio::one(), Ratio::zero())));
            } else {
                if idx > start {
                    y = &t[idx - 1] * &y;
                }
                sample.push(normalize_pair(&(Ratio::one(), y.clone())));
            }
        }
        if bundle.contains(t, &sample)? != true {
            return Err("internal: a fiber sample escapes the bundle".into());
        }
        out.push(FiberComponent { window: (start, end), constant, sample });
    }
    Ok(out)
}

/// A labelled boundary stratum of a conic bundle over a vanishing base
/// coordinate: the window of free factors if any, and the pinned factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicStratum {
    pub label: String,
    pub free: Option<(usize, usize)>,
    pub pinned: Vec<(usize, (Ratio, Ratio))>,
}

/// The four labelled codimension-one strata of the bundle with `n + m + 1`
/// base coordinates over the locus where coordinate `n + 1` vanishes: the
/// two product embeddings of the smaller bundles, and the two interval-end
/// strata where the whole chain sits at an end of its parameter interval.
pub fn conic_boundary_strata(n: usize, m: usize) -> Result<Vec<ConicStratum>, String> {
    let total = n + m + 1;
    let mut t = vec![Ratio::one(); total];
    t[n] = Ratio::zero();
    let comps = conic_fiber(total, &t)?;
    if comps.len() != 2 {
        return Err("internal: one vanishing coordinate must split the fiber in two".into());
    }
    let all = |pair: (Ratio, Ratio)| -> Vec<(usize, (Ratio, Ratio))> {
        (0..=total).map(|i| (i, pair.clone())).collect()
    };
    Ok(vec![
        ConicStratum {
            label: format!("D{}x[0,inf)^{}", n + 1, m),
            free: Some(comps[0].window),
            pinned: comps[0].constant.clone(),
        },
        ConicStratum {
            label: format!("[0,inf)^{}xD{}", n, m + 1),
            free: Some(comps[1].window),
            pinned: comps[1].constant.clone(),
        },
        ConicStratum {
            label: "y0=0".into(),
            free: None,
            pinned: all((Ratio::one(), Ratio::zero())),
        },
        ConicStratum {
            label: format!("x{total}=0"),
            free: None,
            pinned: all((Ratio::zero(), Ratio::one())),
        },
    ])
}

fn split_windows(windows: Vec<(usize, usize)>, z: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (s, e) in windows {
        if s < z && z <= e {
            out.push((s, z - 1));
            out.push((z, e));
        } else {
            out.push((s, e));
        }
    }
    out
}

/// Splitting the chain at two vanishing coordinates commutes: both split
/// orders produce the same windows, and they match the components of the
/// actual fiber. The two zeros sit at relations `n + 1` and `n + m + 2`
/// of the bundle with `n + m + l + 2` base coordinates.
pub fn conic_double_split(n: usize, m: usize, l: usize) -> CheckReport {
    let total = n + m + l + 2;
    let a = n + 1;
    let b = n + m + 2;
    let mut report = CheckReport::passing();
    let whole = vec![(0usize, total)];
    let ab = split_windows(split_windows(whole.clone(), a), b);
    let ba = split_windows(split_windows(whole, b), a);
    if ab != ba {
        report.push(format!("split orders disagree: {ab:?} vs {ba:?}"));
    }
    let mut t = vec![Ratio::one(); total];
    t[a - 1] = Ratio::zero();
    t[b - 1] = Ratio::zero();
    match conic_fiber(total, &t) {
        Err(e) => report.push(format!("fiber computation failed: {e}")),
        Ok(comps) => {
            let windows: Vec<(usize, usize)> = comps.iter().map(|c| c.window).collect();
            if windows != ab {
                report.push(format!("fiber windows {windows:?} differ from the split {ab:?}"));
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Horn filling
// ---------------------------------------------------------------------------

/// How one facet of a top cell sits in the glued complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFacetClass {
    /// A facet lying over a boundary stratum of the glued stratification.
    LabelledBoundary,
    /// A facet glued to a facet of another top cell (or of a deeper chart
    /// beyond the enumeration depth, in which case `partner` is absent).
    InteriorGluing,
    /// The truncation hypersurface contributing to the missing facet.
    MissingFacetHypersurface,
}

/// One classified facet of a top cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFacet {
    pub class: CellFacetClass,
    pub label: String,
    pub partner: Option<String>,
}

/// A codimension-zero cell of the horn filling: a chart chain together
/// with one payload component per vertex, sitting over the L-block of its
/// smoothing data.
#[derive(Debug, Clone, PartialEq)]
pub struct HornCell {
    pub id: String,
    pub arc: Arc,
    pub comps: Vec<(u32, String)>,
    pub block: (u32, u8),
    pub dim: i64,
    pub count: BigInt,
    pub facets: Vec<CellFacet>,
}

/// The filling data over one morphism cell `(p, r, energy)`: the top
/// cells, the assembled components of the missing facet, the strata of
/// the glued stratification with their codimensions, and the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct HornFillCell {
    pub cell: (usize, usize, Ratio),
    pub top_cells: Vec<HornCell>,
    pub missing: Vec<FormalComponent>,
    pub strata: Vec<(String, u32)>,
    pub report: CheckReport,
}

/// A filled 2-horn: the assembled missing edge bimodule together with the
/// per-cell filling data and the combined report.
#[derive(Debug, Clone, PartialEq)]
pub struct Horn2Fill {
    pub missing: FlowBimodule,
    pub per_cell: Vec<HornFillCell>,
    pub report: CheckReport,
}

/// Chart depth (internal edges per chain) used by [`fill_horn2`].
pub const FILL_DEPTH: u32 = 8;

type CellKey = (usize, usize, Ratio);

#[derive(Debug, Clone)]
struct CellData {
    id: String,
    cell: CellKey,
    arc: Arc,
    comps: Vec<(u32, String)>,
}

#[derive(Debug, Clone, Copy)]
enum SeamTag {
    Edge(usize),
    Missing(usize),
}

fn cell_ident(arc: &Arc, comps: &[(u32, String)]) -> String {
    format!("{}#{}", arc.key(), comps.iter().map(|(_, id)| id.as_str()).join(","))
}

fn seam_key(arc: &Arc, comps: &[(u32, String)], tag: SeamTag) -> String {
    let t = match tag {
        SeamTag::Edge(j) => format!("e{j}"),
        SeamTag::Missing(m) => format!("m{m}"),
    };
    format!("{}#{}", cell_ident(arc, comps), t)
}

fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut Vec<usize>, a: usize, b: usize) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

fn bits(sets: &BTreeSet<usize>) -> u32 {
    sets.iter().fold(0u32, |m, &x| m | (1u32 << x))
}

fn base_cat(
    gamma: GammaSpec,
    sizes: &[usize],
    key: &CellKey,
    menu: Vec<Ratio>,
    bound: u32,
) -> ArcCategory {
    ArcCategory {
        gamma,
        labels: (0..sizes.len()).collect(),
        sizes: sizes.to_vec(),
        endpoints: Some((key.0, key.1)),
        grade: key.2.clone(),
        energy_menu: menu,
        max_codim: Some(bound),
    }
}

struct ChainCtx<'a> {
    sim: &'a FlowSimplex,
    n: usize,
    max_codim: u32,
    int_full: BTreeSet<usize>,
    int_mk: BTreeSet<usize>,
}

fn walk_chains(
    ctx: &ChainCtx,
    edges: &mut Vec<ArcEdge>,
    verts: &mut Vec<ArcVertex>,
    comps: &mut Vec<(u32, String)>,
    out: &mut Vec<(Arc, Vec<(u32, String)>)>,
) {
    let last = *edges.last().expect("chains start with an edge");
    if last.set == ctx.n && edges.len() >= 2 {
        out.push((Arc { edges: edges.clone(), verts: verts.clone() }, comps.clone()));
    }
    if edges.len() >= ctx.max_codim as usize + 2 {
        return;
    }
    let sizes: Vec<usize> = ctx.sim.vertices.iter().map(|v| v.len()).collect();
    for s2 in last.set..=ctx.n {
        let window: Vec<usize> = (last.set + 1..s2).collect();
        for smask in 0usize..(1usize << window.len()) {
            let sets: BTreeSet<usize> = window
                .iter()
                .enumerate()
                .filter(|(i, _)| smask >> i & 1 == 1)
                .map(|(_, &m)| m)
                .collect();
            if last.set == 0 && s2 == ctx.n && (sets == ctx.int_full || sets == ctx.int_mk) {
                continue;
            }
            let sigma = (1u32 << last.set) | (1u32 << s2) | bits(&sets);
            let Some(cells_here) = ctx.sim.payloads.get(&sigma) else { continue };
            for (key, comps_here) in cells_here {
                let (p, q, lam) = key;
                if *p != last.elem || *q >= sizes[s2] {
                    continue;
                }
                let stratum =
                    single_vertex_arc(last.set, *p, s2, *q, sets.clone(), lam.clone());
                for c in comps_here {
                    if c.stratum != stratum {
                        continue;
                    }
                    edges.push(ArcEdge { set: s2, elem: *q });
                    verts.push(ArcVertex { sets: sets.clone(), energy: lam.clone() });
                    comps.push((sigma, c.id.clone()));
                    walk_chains(ctx, edges, verts, comps, out);
                    edges.pop();
                    verts.pop();
                    comps.pop();
                }
            }
        }
    }
}

/// Splits vertex `vi` of the cell at `(set, elem)` with `left_energy` on
/// the left piece, producing the refined chain, its component tuple, and
/// the position of the inserted edge.
fn refine_break(
    cd: &CellData,
    vi: usize,
    set: usize,
    elem: usize,
    left_energy: &Ratio,
    piece: &FacetPiece,
) -> Result<(Arc, Vec<(u32, String)>, usize), String> {
    let l = cd.arc.edges[vi];
    let r = cd.arc.edges[vi + 1];
    if set < l.set || set > r.set {
        return Err(format!(
            "cell {}: break at set {set} falls outside the vertex window",
            cd.id
        ));
    }
    let v = &cd.arc.verts[vi];
    let s_l: BTreeSet<usize> = v.sets.iter().copied().filter(|&m| m < set).collect();
    let s_r: BTreeSet<usize> = v.sets.iter().copied().filter(|&m| m > set).collect();
    let e_r = &v.energy - left_energy;
    let mut arc2 = cd.arc.clone();
    arc2.edges.insert(vi + 1, ArcEdge { set, elem });
    arc2.verts[vi] = ArcVertex { sets: s_l.clone(), energy: left_energy.clone() };
    arc2.verts.insert(vi + 1, ArcVertex { sets: s_r.clone(), energy: e_r });
    let sig_l = (1u32 << l.set) | (1u32 << set) | bits(&s_l);
    let sig_r = (1u32 << set) | (1u32 << r.set) | bits(&s_r);
    let mut comps2 = cd.comps.clone();
    comps2[vi] = (sig_l, piece.factors[0].clone());
    comps2.insert(vi + 1, (sig_r, piece.factors[1].clone()));
    Ok((arc2, comps2, vi + 1))
}

/// Removes index `m` from vertex `vi` of the cell, renaming the factor
/// through the inverse of the equivalence record when one is stored.
fn refine_forget(
    equivalences: &BTreeMap<(u32, usize), EquivRecord>,
    cd: &CellData,
    vi: usize,
    m: usize,
    factor: &str,
) -> Result<(Arc, Vec<(u32, String)>), String> {
    if !cd.arc.verts[vi].sets.contains(&m) {
        return Err(format!(
            "cell {}: a forget facet names index {m}, which the vertex label lacks",
            cd.id
        ));
    }
    let vmask = cd.comps[vi].0;
    let sub = vmask & !(1u32 << m);
    let fid = match equivalences.get(&(vmask, m)) {
        Some(rec) => match rec.map.iter().find(|(_, big)| big.as_str() == factor) {
            Some((small, _)) => small.clone(),
            None => {
                return Err(format!(
                    "equivalence record ({vmask:#b}, {m}) has no preimage of component {factor}"
                ))
            }
        },
        None => factor.to_string(),
    };
    let mut arc2 = cd.arc.clone();
    arc2.verts[vi].sets.remove(&m);
    let mut comps2 = cd.comps.clone();
    comps2[vi] = (sub, fid);
    Ok((arc2, comps2))
}

struct FillCore {
    k: usize,
    n: usize,
    gamma: GammaSpec,
    sizes: Vec<usize>,
    int_mk: BTreeSet<usize>,
    payloads: BTreeMap<u32, Cells>,
    equivalences: BTreeMap<(u32, usize), EquivRecord>,
    cells: Vec<CellData>,
    blocks: Vec<(u32, u8)>,
    dims: Vec<i64>,
    counts: Vec<BigInt>,
    by_cell: BTreeMap<CellKey, Vec<usize>>,
    groups: BTreeMap<String, Vec<usize>>,
    class_comp: BTreeMap<usize, FormalComponent>,
    class_key: BTreeMap<usize, CellKey>,
    class_keys: BTreeSet<CellKey>,
    labels: BTreeMap<CellKey, BTreeMap<String, (Arc, u32)>>,
    menu: Vec<Ratio>,
    bound: u32,
    global: CheckReport,
    key_reports: BTreeMap<CellKey, CheckReport>,
}

impl FillCore {
    fn comp(&self, mask: u32, id: &str) -> Option<&FormalComponent> {
        self.payloads
            .get(&mask)
            .and_then(|cells| cells.values().flatten().find(|c| c.id == id))
    }

    fn cat_for(&self, key: &CellKey) -> ArcCategory {
        base_cat(self.gamma, &self.sizes, key, self.menu.clone(), self.bound)
    }

    /// True when every vertex of the arc is realized by the horn data: by
    /// a payload component, by the unbroken top stratum over the cell, or
    /// by an assembled missing-facet class.
    fn supported(&self, a: &Arc) -> bool {
        let int_full: BTreeSet<usize> = (1..self.n).collect();
        for vi in 0..a.verts.len() {
            let l = a.edges[vi];
            let r = a.edges[vi + 1];
            let v = &a.verts[vi];
            let vkey = (l.elem, r.elem, v.energy.clone());
            if l.set == 0 && r.set == self.n && v.sets == int_full {
                if !self.by_cell.contains_key(&vkey) {
                    return false;
                }
                continue;
            }
            if l.set == 0 && r.set == self.n && v.sets == self.int_mk {
                if !self.class_keys.contains(&vkey) {
                    return false;
                }
                continue;
            }
            let sigma = (1u32 << l.set) | (1u32 << r.set) | bits(&v.sets);
            let stratum =
                single_vertex_arc(l.set, l.elem, r.set, r.elem, v.sets.clone(), v.energy.clone());
            let hit = self
                .payloads
                .get(&sigma)
                .and_then(|cells| cells.get(&vkey))
                .map(|comps| comps.iter().any(|c| c.stratum == stratum))
                .unwrap_or(false);
            if !hit {
                return false;
            }
        }
        true
    }

    fn gluing_facet(&self, ci: usize, key: &str) -> Option<CellFacet> {
        let members = self.groups.get(key)?;
        let partner = members.iter().find(|&&m| m != ci).map(|&m| self.cells[m].id.clone());
        Some(CellFacet {
            class: CellFacetClass::InteriorGluing,
            label: key.to_string(),
            partner,
        })
    }

    /// Pushes the facet for a smoothing wall `x = 1` (or `y = 1`): a
    /// registered seam wins; otherwise the smoothed arc decides, and the
    /// face is absent when it points at the open interior or at an empty
    /// block.
    fn push_smoothing_wall(
        &self,
        out: &mut Vec<CellFacet>,
        cat: &ArcCategory,
        ci: usize,
        tag: SeamTag,
        alpha: Result<Arc, arcs::ArcError>,
    ) -> Result<(), String> {
        let cd = &self.cells[ci];
        let key = seam_key(&cd.arc, &cd.comps, tag);
        if let Some(f) = self.gluing_facet(ci, &key) {
            out.push(f);
            return Ok(());
        }
        let alpha = alpha.map_err(|e| format!("cell {}: {e}", cd.id))?;
        match arcs::block_functor(cat, &alpha, self.k) {
            // The smoothed arc leaves the horn: the wall faces the filled
            // interior and is no boundary facet of the glued complex.
            Err(arcs::ArcError::NotHornObject) => Ok(()),
            Err(e) => Err(format!("cell {}: {e}", cd.id)),
            // The neighbouring block is empty, so the wall is empty too.
            Ok((0, _)) => Ok(()),
            Ok(_) => {
                out.push(CellFacet {
                    class: CellFacetClass::InteriorGluing,
                    label: alpha.key(),
                    partner: None,
                });
                Ok(())
            }
        }
    }

    fn classify(&self, ci: usize) -> Result<Vec<CellFacet>, String> {
        let cd = &self.cells[ci];
        let cat = self.cat_for(&cd.cell);
        let internal: Vec<usize> = cd.arc.internal_edge_positions();
        let internal_set: BTreeSet<usize> = internal.iter().copied().collect();
        let missing = arcs::missing_indices(&cat, &cd.arc);
        let mut out = Vec::new();
        for &j in &internal {
            let mut freed = internal_set.clone();
            freed.remove(&j);
            let lab = arcs::collapse(&cat, &cd.arc, &freed, &missing)
                .map_err(|e| format!("cell {}: {e}", cd.id))?;
            out.push(CellFacet {
                class: CellFacetClass::LabelledBoundary,
                label: lab.key(),
                partner: None,
            });
            let single: BTreeSet<usize> = [j].into_iter().collect();
            let alpha = arcs::collapse(&cat, &cd.arc, &single, &BTreeSet::new());
            self.push_smoothing_wall(&mut out, &cat, ci, SeamTag::Edge(j), alpha)?;
        }
        for &m in &missing {
            if m != self.k {
                let mut act = missing.clone();
                act.remove(&m);
                let lab = arcs::collapse(&cat, &cd.arc, &internal_set, &act)
                    .map_err(|e| format!("cell {}: {e}", cd.id))?;
                out.push(CellFacet {
                    class: CellFacetClass::LabelledBoundary,
                    label: lab.key(),
                    partner: None,
                });
            }
            let added: BTreeSet<usize> = [m].into_iter().collect();
            let alpha = arcs::collapse(&cat, &cd.arc, &BTreeSet::new(), &added);
            self.push_smoothing_wall(&mut out, &cat, ci, SeamTag::Missing(m), alpha)?;
        }
        // The truncation hypersurface. A collared chart meets the missing
        // facet along its class stratum; an uncollared one faces the
        // interior stratum of the full moduli.
        let hyp_label = if missing.contains(&self.k) {
            single_vertex_arc(0, cd.cell.0, self.n, cd.cell.1, self.int_mk.clone(), cd.cell.2.clone())
                .key()
        } else {
            arcs::minimal_arc(&cat, cd.cell.0, cd.cell.1).key()
        };
        out.push(CellFacet {
            class: CellFacetClass::MissingFacetHypersurface,
            label: hyp_label,
            partner: None,
        });
        // Walls inherited from the payload components' own facets.
        for vi in 0..cd.comps.len() {
            let (vmask, vid) = cd.comps[vi].clone();
            let Some(comp) = self.comp(vmask, &vid) else { continue };
            let Some(facets) = &comp.facets else { continue };
            for f in facets {
                match &f.label {
                    FacetKind::Break { set, elem, left_energy } => {
                        for piece in &f.pieces {
                            if piece.factors.len() != 2 {
                                continue;
                            }
                            let Ok((arc2, comps2, _)) =
                                refine_break(cd, vi, *set, *elem, left_energy, piece)
                            else {
                                continue;
                            };
                            let key = seam_key(&arc2, &comps2, SeamTag::Edge(vi + 1));
                            out.push(self.gluing_facet(ci, &key).unwrap_or(CellFacet {
                                class: CellFacetClass::InteriorGluing,
                                label: key,
                                partner: None,
                            }));
                        }
                    }
                    FacetKind::ForgetVertex { index } => {
                        for piece in &f.pieces {
                            if piece.factors.len() != 1 {
                                continue;
                            }
                            let Ok((arc2, comps2)) = refine_forget(
                                &self.equivalences,
                                cd,
                                vi,
                                *index,
                                &piece.factors[0],
                            ) else {
                                continue;
                            };
                            let key = seam_key(&arc2, &comps2, SeamTag::Missing(*index));
                            out.push(self.gluing_facet(ci, &key).unwrap_or(CellFacet {
                                class: CellFacetClass::InteriorGluing,
                                label: key,
                                partner: None,
                            }));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Assembles the filling data over one morphism cell.
    fn cell_view(&self, key: &CellKey) -> HornFillCell {
        let mut report =
            self.key_reports.get(key).cloned().unwrap_or_else(CheckReport::passing);
        let mut top_cells = Vec::new();
        let indices: &[usize] = self.by_cell.get(key).map(|v| v.as_slice()).unwrap_or(&[]);
        for &ci in indices {
            let facets = match self.classify(ci) {
                Ok(f) => f,
                Err(e) => {
                    report.push(e);
                    Vec::new()
                }
            };
            let cd = &self.cells[ci];
            top_cells.push(HornCell {
                id: cd.id.clone(),
                arc: cd.arc.clone(),
                comps: cd.comps.clone(),
                block: self.blocks[ci],
                dim: self.dims[ci],
                count: self.counts[ci].clone(),
                facets,
            });
        }
        let mut missing: Vec<FormalComponent> = self
            .class_key
            .iter()
            .filter(|(_, k2)| *k2 == key)
            .filter_map(|(root, _)| self.class_comp.get(root).cloned())
            .collect();
        missing.sort_by(|a, b| a.id.cmp(&b.id));
        let strata: Vec<(String, u32)> = self
            .labels
            .get(key)
            .map(|m| {
                let mut v: Vec<(String, u32)> =
                    m.iter().map(|(s, (_, c))| (s.clone(), *c)).collect();
                v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
                v
            })
            .unwrap_or_default();
        HornFillCell { cell: key.clone(), top_cells, missing, strata, report }
    }
}

fn fill_core(sim: &FlowSimplex, k: usize, max_codim: u32) -> Result<FillCore, String> {
    let n = sim.n();
    if n < 2 {
        return Err("horn filling needs a simplex of dimension at least 2".into());
    }
    if k == 0 || k >= n {
        return Err(format!("only inner horns can be filled; vertex {k} is not inner"));
    }
    let full = sim.full_mask();
    let miss_k = full & !(1u32 << k);
    for &mask in sim.payloads.keys() {
        if mask == 0 || mask & !full != 0 {
            return Err(format!("payload mask {mask:#b} does not name vertices of the simplex"));
        }
    }
    if sim.payloads.contains_key(&full) || sim.payloads.contains_key(&miss_k) {
        return Err(
            "the horn data must omit the full payload and the face dropping the horn vertex"
                .into(),
        );
    }
    let ranks: BTreeSet<u32> = sim
        .payloads
        .values()
        .flat_map(|cells| cells.values().flatten().map(|c| c.obstruction_rank))
        .collect();
    if ranks.len() > 1 {
        return Err(
            "the payload components carry unequal obstruction ranks; fill only after the \
             stabilization step, which is out of scope here"
                .into(),
        );
    }
    if sim.equivalences.values().any(|r| r.added_rank != 0) {
        return Err(
            "an equivalence record adds rank; fill only after the stabilization step, which \
             is out of scope here"
                .into(),
        );
    }
    // Component ids must be unique within their mask.
    let mut seen: BTreeSet<(u32, String)> = BTreeSet::new();
    for (&mask, cells) in &sim.payloads {
        for c in cells.values().flatten() {
            if !seen.insert((mask, c.id.clone())) {
                return Err(format!("component id {} repeats in payload {mask:#b}", c.id));
            }
        }
    }

    let sizes: Vec<usize> = sim.vertices.iter().map(|v| v.len()).collect();
    let int_full: BTreeSet<usize> = (1..n).collect();
    let mut int_mk = int_full.clone();
    int_mk.remove(&k);
    let ctx = ChainCtx {
        sim,
        n,
        max_codim,
        int_full: int_full.clone(),
        int_mk: int_mk.clone(),
    };
    let mut raw = Vec::new();
    for a in 0..sizes[0] {
        let mut edges = vec![ArcEdge { set: 0, elem: a }];
        let mut verts = Vec::new();
        let mut comps = Vec::new();
        walk_chains(&ctx, &mut edges, &mut verts, &mut comps, &mut raw);
    }
    let mut cells: Vec<CellData> = raw
        .into_iter()
        .map(|(arc, comps)| CellData {
            id: cell_ident(&arc, &comps),
            cell: (arc.source().elem, arc.target().elem, arc.grade()),
            arc,
            comps,
        })
        .collect();
    cells.sort_by(|x, y| x.cell.cmp(&y.cell).then_with(|| x.id.cmp(&y.id)));

    let comp_of = |mask: u32, id: &str| -> Option<&FormalComponent> {
        sim.payloads.get(&mask).and_then(|c| c.values().flatten().find(|x| x.id == id))
    };

    let mut blocks = Vec::with_capacity(cells.len());
    let mut dims = Vec::with_capacity(cells.len());
    let mut counts = Vec::with_capacity(cells.len());
    let mut obstr = Vec::with_capacity(cells.len());
    let zero_menu = vec![Ratio::zero()];
    for cd in &cells {
        let cat = base_cat(sim.gamma, &sizes, &cd.cell, zero_menu.clone(), max_codim);
        arcs::validate_arc(&cat, &cd.arc).map_err(|e| format!("cell {}: {e}", cd.id))?;
        match arcs::horn_membership(&cat, &cd.arc, k) {
            Ok(true) => {}
            Ok(false) => return Err(format!("cell {} lies outside the horn", cd.id)),
            Err(e) => return Err(format!("cell {}: {e}", cd.id)),
        }
        let block =
            arcs::block_functor(&cat, &cd.arc, k).map_err(|e| format!("cell {}: {e}", cd.id))?;
        let mut dim = (block.0 + block.1 as u32) as i64;
        let mut count = BigInt::one();
        let mut ob = 0u32;
        for (mask, id) in &cd.comps {
            let comp = comp_of(*mask, id)
                .ok_or_else(|| format!("cell {}: component {id} vanished from {mask:#b}", cd.id))?;
            dim += comp.virtual_dim();
            count *= &comp.count;
            ob += comp.obstruction_rank;
        }
        blocks.push(block);
        dims.push(dim);
        counts.push(count);
        obstr.push(ob);
    }

    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_cell: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for (i, cd) in cells.iter().enumerate() {
        if by_id.insert(cd.id.clone(), i).is_some() {
            return Err(format!("cell id {} is ambiguous", cd.id));
        }
        by_cell.entry(cd.cell.clone()).or_default().push(i);
    }

    // Seam pass: every payload facet of a cell refines it into a deeper
    // chain; the seam glues the wall of the shallow cell to the smoothing
    // face of the deep one.
    let mut global = CheckReport::passing();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut seam_sign: BTreeMap<(usize, usize), i8> = BTreeMap::new();
    let mut parent: Vec<usize> = (0..cells.len()).collect();
    for ci in 0..cells.len() {
        let cd = &cells[ci];
        for vi in 0..cd.comps.len() {
            let (vmask, vid) = cd.comps[vi].clone();
            let Some(comp) = comp_of(vmask, &vid) else { continue };
            let Some(facets) = &comp.facets else { continue };
            for f in facets {
                match &f.label {
                    FacetKind::Break { set, elem, left_energy } => {
                        for piece in &f.pieces {
                            if piece.factors.len() != 2 {
                                global.push(format!(
                                    "component {vid}: a break piece needs two factors"
                                ));
                                continue;
                            }
                            match refine_break(cd, vi, *set, *elem, left_energy, piece) {
                                Err(msg) => global.push(msg),
                                Ok((arc2, comps2, pos)) => {
                                    if arc2.edges.len() as u32 > max_codim + 2 {
                                        continue;
                                    }
                                    let rid = cell_ident(&arc2, &comps2);
                                    let Some(&di) = by_id.get(&rid) else {
                                        global.push(format!(
                                            "cell {}: a break wall refines to {rid}, which is \
                                             not an enumerated cell",
                                            cd.id
                                        ));
                                        continue;
                                    };
                                    groups
                                        .entry(seam_key(&arc2, &comps2, SeamTag::Edge(pos)))
                                        .or_default()
                                        .extend([ci, di]);
                                    union(&mut parent, ci, di);
                                    seam_sign.insert((di, pos), piece.sign);
                                }
                            }
                        }
                    }
                    FacetKind::ForgetVertex { index } => {
                        for piece in &f.pieces {
                            if piece.factors.len() != 1 {
                                global.push(format!(
                                    "component {vid}: a forget piece needs one factor"
                                ));
                                continue;
                            }
                            match refine_forget(&sim.equivalences, cd, vi, *index, &piece.factors[0])
                            {
                                Err(msg) => global.push(msg),
                                Ok((arc2, comps2)) => {
                                    let rid = cell_ident(&arc2, &comps2);
                                    let Some(&di) = by_id.get(&rid) else {
                                        global.push(format!(
                                            "cell {}: a forget wall refines to {rid}, which is \
                                             not an enumerated cell",
                                            cd.id
                                        ));
                                        continue;
                                    };
                                    groups
                                        .entry(seam_key(&arc2, &comps2, SeamTag::Missing(*index)))
                                        .or_default()
                                        .extend([ci, di]);
                                    union(&mut parent, ci, di);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (key, members) in groups.iter_mut() {
        members.sort_unstable();
        members.dedup();
        if members.len() > 2 {
            global.push(format!(
                "gluing face {key} is shared by {} cells; the weighted colimit pairs exactly two",
                members.len()
            ));
        }
    }

    // Seam classes become the components of the missing facet.
    let root_of: Vec<usize> = {
        let mut r = Vec::with_capacity(cells.len());
        for i in 0..cells.len() {
            let root = find(&mut parent, i);
            r.push(root);
        }
        r
    };
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &r) in root_of.iter().enumerate() {
        classes.entry(r).or_default().push(i);
    }
    let mut class_id: BTreeMap<usize, String> = BTreeMap::new();
    let mut class_comp: BTreeMap<usize, FormalComponent> = BTreeMap::new();
    let mut class_key: BTreeMap<usize, CellKey> = BTreeMap::new();
    let mut class_keys: BTreeSet<CellKey> = BTreeSet::new();
    let mut class_rep: BTreeMap<usize, usize> = BTreeMap::new();
    for (&root, members) in &classes {
        let rep = *members
            .iter()
            .min_by_key(|&&m| &cells[m].id)
            .expect("classes are nonempty");
        let key0 = cells[rep].cell.clone();
        let dim0 = dims[rep];
        for &m in members {
            if cells[m].cell != key0 {
                global.push(format!(
                    "glued cells {} and {} lie over different morphism cells",
                    cells[rep].id, cells[m].id
                ));
            }
            if dims[m] != dim0 {
                global.push(format!(
                    "glued cells {} and {} have unequal dimensions",
                    cells[rep].id, cells[m].id
                ));
            }
        }
        let cid = format!("f:{}", cells[rep].id);
        let vdim = dim0 - 1;
        let total = vdim + obstr[rep] as i64;
        if total < 0 {
            global.push(format!("missing component {cid} has negative total dimension"));
            continue;
        }
        class_id.insert(root, cid.clone());
        class_key.insert(root, key0.clone());
        class_keys.insert(key0.clone());
        class_rep.insert(root, rep);
        class_comp.insert(
            root,
            FormalComponent {
                id: cid,
                stratum: single_vertex_arc(0, key0.0, n, key0.1, int_mk.clone(), key0.2.clone()),
                total_dim: total as u32,
                obstruction_rank: obstr[rep],
                count: counts[rep].clone(),
                facets: None,
            },
        );
    }
    // Facet decompositions of the missing components. At virtual
    // dimension zero the decomposition is empty; for an edge (n = 2) at
    // virtual dimension one the break walls of the members assemble it.
    for (&root, members) in &classes {
        let Some(vdim) = class_comp.get(&root).map(|c| c.virtual_dim()) else { continue };
        let facets = if vdim == 0 {
            Some(Vec::new())
        } else if n == 2 && vdim == 1 {
            let mut acc: BTreeMap<(usize, usize, Ratio), Vec<FacetPiece>> = BTreeMap::new();
            for &m in members {
                let cd = &cells[m];
                let len = cd.arc.edges.len();
                for j in 1..len.saturating_sub(1) {
                    let set = cd.arc.edges[j].set;
                    if set != 0 && set != n {
                        continue;
                    }
                    let elem = cd.arc.edges[j].elem;
                    let le = cd.arc.verts[..j]
                        .iter()
                        .fold(Ratio::zero(), |acc, v| acc + &v.energy);
                    let sub_cls = |edges: &[ArcEdge],
                                   verts: &[ArcVertex],
                                   comps: &[(u32, String)]|
                     -> Option<String> {
                        let sub = Arc { edges: edges.to_vec(), verts: verts.to_vec() };
                        let rid = cell_ident(&sub, comps);
                        let di = *by_id.get(&rid)?;
                        class_id.get(&root_of[di]).cloned()
                    };
                    let factors = if set == 0 {
                        if j != 1 {
                            global.push(format!(
                                "cell {}: a left break edge must come first",
                                cd.id
                            ));
                            continue;
                        }
                        let Some(cls) =
                            sub_cls(&cd.arc.edges[j..], &cd.arc.verts[j..], &cd.comps[j..])
                        else {
                            global.push(format!(
                                "cell {}: the right part of a break wall has no class",
                                cd.id
                            ));
                            continue;
                        };
                        vec![cd.comps[0].1.clone(), cls]
                    } else {
                        if j != len - 2 {
                            global.push(format!(
                                "cell {}: a right break edge must come last",
                                cd.id
                            ));
                            continue;
                        }
                        let Some(cls) =
                            sub_cls(&cd.arc.edges[..=j], &cd.arc.verts[..j], &cd.comps[..j])
                        else {
                            global.push(format!(
                                "cell {}: the left part of a break wall has no class",
                                cd.id
                            ));
                            continue;
                        };
                        vec![cls, cd.comps[j].1.clone()]
                    };
                    let sign = seam_sign.get(&(m, j)).copied().unwrap_or(1);
                    acc.entry((set, elem, le)).or_default().push(FacetPiece { factors, sign });
                }
            }
            Some(
                acc.into_iter()
                    .map(|((set, elem, left_energy), mut pieces)| {
                        pieces.sort_by(|a, b| {
                            a.factors.cmp(&b.factors).then(a.sign.cmp(&b.sign))
                        });
                        pieces.dedup();
                        Facet { label: FacetKind::Break { set, elem, left_energy }, pieces }
                    })
                    .collect(),
            )
        } else {
            None
        };
        if let Some(c) = class_comp.get_mut(&root) {
            c.facets = facets;
        }
    }

    // The glued stratification per morphism cell: every collapse of every
    // chart contributes its stratum.
    let mut labels: BTreeMap<CellKey, BTreeMap<String, (Arc, u32)>> = BTreeMap::new();
    let mut menu_set: BTreeSet<Ratio> = BTreeSet::new();
    menu_set.insert(Ratio::zero());
    for cells_here in sim.payloads.values() {
        for (_, _, lam) in cells_here.keys() {
            menu_set.insert(lam.clone());
        }
    }
    for key in by_cell.keys() {
        menu_set.insert(key.2.clone());
    }
    for cd in &cells {
        let cat = base_cat(sim.gamma, &sizes, &cd.cell, zero_menu.clone(), max_codim);
        match arcs::arrows_into(&cat, &cd.arc) {
            Err(e) => global.push(format!("cell {}: {e}", cd.id)),
            Ok(ins) => {
                for (src, _, _) in ins {
                    let codim = arcs::codim(&cat, &src);
                    for v in &src.verts {
                        menu_set.insert(v.energy.clone());
                    }
                    labels
                        .entry(cd.cell.clone())
                        .or_default()
                        .entry(src.key())
                        .or_insert((src, codim));
                }
            }
        }
    }
    let menu: Vec<Ratio> = menu_set.into_iter().collect();
    let bound = labels
        .values()
        .flat_map(|m| m.values().map(|(_, c)| *c))
        .max()
        .unwrap_or(0);

    // Compare against the arcs the data can support and check that the
    // result is a corner model.
    let keys: Vec<CellKey> = labels.keys().cloned().collect();
    let mut core = FillCore {
        k,
        n,
        gamma: sim.gamma,
        sizes,
        int_mk,
        payloads: sim.payloads.clone(),
        equivalences: sim.equivalences.clone(),
        cells,
        blocks,
        dims,
        counts,
        by_cell,
        groups,
        class_comp,
        class_key,
        class_keys,
        labels,
        menu,
        bound,
        global,
        key_reports: BTreeMap::new(),
    };
    for key in keys {
        let mut rep = CheckReport::passing();
        let cat = core.cat_for(&key);
        match arcs::enumerate_objects(&cat, Some(core.bound)) {
            Err(e) => rep.push(format!("arc enumeration failed: {e}")),
            Ok(all) => {
                let mut b_keys: BTreeSet<String> = BTreeSet::new();
                for a in &all {
                    if !core.supported(a) {
                        continue;
                    }
                    b_keys.insert(a.key());
                    let k_absent = !a.edges.iter().any(|e| e.set == core.k)
                        && !a.verts.iter().any(|v| v.sets.contains(&core.k));
                    if k_absent {
                        let codim = arcs::codim(&cat, a);
                        core.labels
                            .entry(key.clone())
                            .or_default()
                            .entry(a.key())
                            .or_insert((a.clone(), codim));
                    }
                }
                let lab = &core.labels[&key];
                for s in lab.keys() {
                    if !b_keys.contains(s) {
                        rep.push(format!(
                            "stratum {s} of the glued charts is not supported by the horn data"
                        ));
                    }
                }
                for s in &b_keys {
                    if !lab.contains_key(s) {
                        rep.push(format!(
                            "supported arc {s} is missing from the glued stratification"
                        ));
                    }
                }
            }
        }
        // The stratification category must be a corner model.
        let lab = core.labels[&key].clone();
        let objects: Vec<(String, u32)> =
            lab.iter().map(|(s, (_, c))| (s.clone(), *c)).collect();
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
        let mut closed = true;
        for (tname, (tarc, _)) in &lab {
            let ins = match arcs::arrows_into(&cat, tarc) {
                Ok(v) => v,
                Err(e) => {
                    rep.push(format!("stratum {tname}: {e}"));
                    closed = false;
                    continue;
                }
            };
            for (src, e, m) in &ins {
                if e.is_empty() && m.is_empty() {
                    continue;
                }
                let skey = src.key();
                if !lab.contains_key(&skey) {
                    rep.push(format!(
                        "the stratification is not closed under collapse: {tname} -> {skey}"
                    ));
                    closed = false;
                    continue;
                }
                arrows.push((arrow_name(tarc, e, m), skey, tname.clone()));
            }
            for (src, e2, m2) in &ins {
                if e2.is_empty() && m2.is_empty() {
                    continue;
                }
                let Ok(inner) = arcs::arrows_into(&cat, src) else { continue };
                for (_, e1, m1) in &inner {
                    if e1.is_empty() && m1.is_empty() {
                        continue;
                    }
                    let (e, m) = arcs::compose_collapse(tarc, e2, m2, e1, m1);
                    compose_entries.push((
                        arrow_name(tarc, e2, m2),
                        arrow_name(src, e1, m1),
                        arrow_name(tarc, &e, &m),
                    ));
                }
            }
        }
        if closed {
            match CornerCategory::new(objects, arrows, compose_entries) {
                Err(e) => rep.push(format!("glued stratification category: {e}")),
                Ok(cc) => rep.absorb(corner::is_corner_model(&cc)),
            }
        }
        core.key_reports.insert(key, rep);
    }
    Ok(core)
}

/// Fills the inner horn dropping vertex `k` of `sim` over the morphism
/// cell `(p, r, energy)`: enumerates the codimension-zero chart cells of
/// the weighted colimit, classifies each facet as labelled boundary,
/// interior gluing, or missing-facet hypersurface, assembles the missing
/// facet's formal components from the seam classes, and verifies that the
/// glued charts are stratified by exactly the arcs the horn data supports,
/// in the shape of a corner model.
///
/// `max_codim` bounds the chart depth (internal edges per chain); choose
/// it at least the depth of the deepest break chain of the data so the
/// stratification closes.
pub fn horn_fill_strata(
    sim: &FlowSimplex,
    k: usize,
    p: usize,
    r: usize,
    energy: &Ratio,
    max_codim: u32,
) -> Result<HornFillCell, String> {
    let core = fill_core(sim, k, max_codim)?;
    let mut view = core.cell_view(&(p, r, energy.clone()));
    let mut report = core.global.clone();
    report.absorb(std::mem::replace(&mut view.report, CheckReport::passing()));
    view.report = report;
    Ok(view)
}

/// Fills the inner 2-horn spanned by two composable bimodules: glues their
/// charts, assembles the missing edge as a bimodule, and validates it.
/// The missing edge's components are the seam classes; its chain map is
/// the matrix product of the two edge maps.
pub fn fill_horn2(b1: &FlowBimodule, b2: &FlowBimodule) -> Result<Horn2Fill, String> {
    let s1 = b1.simplex();
    let s2 = b2.simplex();
    if s1.gamma != s2.gamma {
        return Err("the two bimodules use different energy monoids".into());
    }
    if b1.target_category() != b2.source_category() {
        return Err("the middle categories of the horn do not agree".into());
    }
    let r1 = validate_flow_simplex(s1);
    if !r1.pass {
        return Err(format!("left bimodule invalid: {}", r1.first().unwrap_or("")));
    }
    let r2 = validate_flow_simplex(s2);
    if !r2.pass {
        return Err(format!("right bimodule invalid: {}", r2.first().unwrap_or("")));
    }
    let mut payloads: BTreeMap<u32, Cells> = BTreeMap::new();
    if let Some(c) = s1.payload(0b01) {
        payloads.insert(0b001, c.clone());
    }
    if let Some(c) = s1.payload(0b10) {
        payloads.insert(0b010, c.clone());
    }
    if let Some(c) = s2.payload(0b10) {
        payloads.insert(0b100, map_cells(c, &|i| i + 1));
    }
    if let Some(c) = s1.payload(0b11) {
        payloads.insert(0b011, c.clone());
    }
    if let Some(c) = s2.payload(0b11) {
        payloads.insert(0b110, map_cells(c, &|i| i + 1));
    }
    let sim = FlowSimplex {
        gamma: s1.gamma,
        vertices: vec![
            s1.vertices[0].clone(),
            s1.vertices[1].clone(),
            s2.vertices[1].clone(),
        ],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: s1.integer_signs && s2.integer_signs,
    };
    let core = fill_core(&sim, 1, FILL_DEPTH)?;
    let mut report = core.global.clone();
    let keys: Vec<CellKey> = core.labels.keys().cloned().collect();
    let mut per_cell = Vec::with_capacity(keys.len());
    for key in &keys {
        let view = core.cell_view(key);
        report.absorb(view.report.clone());
        per_cell.push(view);
    }
    // The missing edge: one component per seam class, set labels moved
    // down to the 1-simplex spanned by the outer vertices.
    let mut edge: Cells = BTreeMap::new();
    for (root, comp) in &core.class_comp {
        let key = core.class_key[root].clone();
        edge.entry(key).or_default().push(comp.clone());
    }
    for comps in edge.values_mut() {
        comps.sort_by(|a, b| a.id.cmp(&b.id));
    }
    let edge = map_cells(&edge, &|i| if i == 2 { 1 } else { i });
    let mut mpayloads: BTreeMap<u32, Cells> = BTreeMap::new();
    if let Some(c) = s1.payload(0b01) {
        mpayloads.insert(0b01, c.clone());
    }
    if let Some(c) = s2.payload(0b10) {
        mpayloads.insert(0b10, c.clone());
    }
    if !edge.is_empty() {
        mpayloads.insert(0b11, edge);
    }
    let msim = FlowSimplex {
        gamma: s1.gamma,
        vertices: vec![s1.vertices[0].clone(), s2.vertices[1].clone()],
        payloads: mpayloads,
        equivalences: BTreeMap::new(),
        integer_signs: sim.integer_signs,
    };
    report.absorb(validate_flow_simplex(&msim));
    let missing = FlowBimodule::new(msim)?;
    Ok(Horn2Fill { missing, per_cell, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimodule::compose_bimodules;
    use crate::flow::{FlowObject, VirtualDim};
    use crate::homology::{bimodule_chain_map, chain_complex, GradedMap, Matrix, Ring};

    fn ratio(n: i64, d: i64) -> Ratio {
        Ratio::new(BigInt::from(n), BigInt::from(d))
    }

    fn rint(n: i64) -> Ratio {
        Ratio::from_integer(BigInt::from(n))
    }

    fn pt(coords: &[(i64, i64)]) -> Vec<Ratio> {
        coords.iter().map(|&(n, d)| ratio(n, d)).collect()
    }

    #[test]
    fn lblock_membership_matches_the_defining_inequalities() {
        let b10 = LBlock::new(1, 0);
        assert_eq!(b10.contains(&pt(&[(1, 4)])), Ok(true));
        assert_eq!(b10.contains(&pt(&[(1, 2)])), Ok(true));
        assert_eq!(b10.contains(&pt(&[(3, 4)])), Ok(false));
        assert!(b10.contains(&pt(&[(1, 4), (1, 4)])).is_err());

        let b00 = LBlock::new(0, 0);
        assert_eq!(b00.contains(&[]), Ok(false));
        let b01 = LBlock::new(0, 1);
        assert_eq!(b01.contains(&pt(&[(1, 1)])), Ok(false));
        assert_eq!(b01.contains(&pt(&[(0, 1)])), Ok(false));

        let b21 = LBlock::new(2, 1);
        assert_eq!(b21.contains(&pt(&[(0, 1), (0, 1), (0, 1)])), Ok(true));
        assert_eq!(b21.contains(&pt(&[(1, 1), (1, 1), (1, 1)])), Ok(false));
        // Outside the unit cube is outside the block.
        assert_eq!(b21.contains(&pt(&[(-1, 2), (0, 1), (0, 1)])), Ok(false));

        assert!(LBlock::with_epsilon(2, 0, rint(1)).is_err());
        assert!(LBlock::with_epsilon(2, 0, ratio(1, 3)).is_ok());
    }

    #[test]
    fn lblock_facet_counts_and_gluing_targets() {
        let count = |d: usize, flag: u8| lblock_facets(d, flag).len();
        assert_eq!(count(0, 0), 1);
        assert_eq!(count(1, 0), 3);
        assert_eq!(count(2, 0), 5);
        assert_eq!(count(3, 0), 7);
        assert_eq!(count(0, 1), 0);
        assert_eq!(count(1, 1), 3);
        assert_eq!(count(2, 1), 6);
        assert_eq!(count(3, 1), 8);

        let f20 = lblock_facets(2, 0);
        let one = f20
            .iter()
            .find(|f| f.kind == LFacetKind::CoordOne { j: 1 })
            .expect("x1=1 facet");
        assert_eq!(one.glues_to, Some((1, 0)));
        let f21 = lblock_facets(2, 1);
        let one = f21
            .iter()
            .find(|f| f.kind == LFacetKind::CoordOne { j: 2 })
            .expect("x2=1 facet");
        assert_eq!(one.glues_to, Some((1, 1)));
        let collar = f21.iter().find(|f| f.kind == LFacetKind::CollarOne).expect("y=1 facet");
        assert_eq!(collar.glues_to, Some((2, 0)));
        // (1,1) drops the coordinate-one wall: its target (0,1) is empty.
        assert!(lblock_facets(1, 1).iter().all(|f| !matches!(f.kind, LFacetKind::CoordOne { .. })));
        // (1,0) keeps the formal wall but it glues to nothing.
        let f10 = lblock_facets(1, 0);
        let one = f10
            .iter()
            .find(|f| f.kind == LFacetKind::CoordOne { j: 1 })
            .expect("x1=1 facet");
        assert_eq!(one.glues_to, None);
    }

    #[test]
    fn lblock_boundary_points_lie_on_their_facets() {
        // Points satisfying a facet's defining equalities are members.
        let b20 = LBlock::new(2, 0);
        assert_eq!(b20.contains(&pt(&[(1, 2), (1, 1)])), Ok(true)); // prod = eps
        assert_eq!(b20.contains(&pt(&[(0, 1), (1, 3)])), Ok(true)); // x1 = 0
        assert_eq!(b20.contains(&pt(&[(1, 1), (1, 1)])), Ok(false)); // beyond the cut

        let b21 = LBlock::new(2, 1);
        // On the collar y = 1 the cut reduces to the flag-0 inequality.
        assert_eq!(b21.contains(&pt(&[(1, 2), (1, 1), (1, 1)])), Ok(true));
        assert_eq!(b21.contains(&pt(&[(1, 1), (1, 1), (1, 1)])), Ok(false));
        // On a coordinate wall the product vanishes and y is free.
        assert_eq!(b21.contains(&pt(&[(0, 1), (1, 1), (1, 3)])), Ok(true));
    }

    #[test]
    fn cosimplicial_identities_hold_to_dimension_five() {
        let report = cosimplicial_check(5).expect("within the bound");
        assert!(report.pass, "{report}");
        assert!(cosimplicial_check(7).is_err());
    }

    #[test]
    fn conic_fiber_counts_follow_the_zero_pattern() {
        let one = conic_fiber(1, &[rint(1)]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].window, (0, 1));

        let two = conic_fiber(2, &[rint(0), rint(3)]).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].window, (0, 0));
        assert_eq!(two[1].window, (1, 2));
        assert_eq!(two[0].constant, vec![
            (1, (Ratio::one(), Ratio::zero())),
            (2, (Ratio::one(), Ratio::zero())),
        ]);
        assert_eq!(two[1].constant, vec![(0, (Ratio::zero(), Ratio::one()))]);

        let three = conic_fiber(2, &[rint(0), rint(0)]).unwrap();
        assert_eq!(three.len(), 3);

        let point = conic_fiber(0, &[]).unwrap();
        assert_eq!(point.len(), 1);
        assert_eq!(point[0].window, (0, 0));

        assert!(conic_fiber(1, &[rint(-1)]).is_err());

        // Components always number one more than the zeros of the base.
        for n in 0..=3usize {
            let vals = [rint(0), rint(1), rint(2)];
            let choices: Vec<Vec<Ratio>> = (0..n)
                .map(|_| vals.to_vec())
                .multi_cartesian_product()
                .collect();
            let all_t = if n == 0 { vec![vec![]] } else { choices };
            for t in all_t {
                let zeros = t.iter().filter(|v| v.is_zero()).count();
                let comps = conic_fiber(n, &t).unwrap();
                assert_eq!(comps.len(), zeros + 1, "t = {t:?}");
            }
        }
    }

    #[test]
    fn conic_membership_rejects_degenerate_pairs() {
        let bundle = ConicBundle::new(1);
        let t = [rint(2)];
        assert!(bundle
            .contains(&t, &[(Ratio::zero(), Ratio::zero()), (Ratio::one(), Ratio::one())])
            .is_err());
        // x0 y1 = t1 x1 y0 with (1, 1), (1, 2) and t = 2.
        assert_eq!(
            bundle.contains(&t, &[(rint(1), rint(1)), (rint(1), rint(2))]),
            Ok(true)
        );
        assert_eq!(
            bundle.contains(&t, &[(rint(1), rint(1)), (rint(1), rint(3))]),
            Ok(false)
        );
    }

    #[test]
    fn conic_boundary_strata_over_a_vanishing_base_coordinate() {
        let strata = conic_boundary_strata(0, 0).unwrap();
        let labels: Vec<&str> = strata.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["D1x[0,inf)^0", "[0,inf)^0xD1", "y0=0", "x1=0"]);
        assert_eq!(strata[0].free, Some((0, 0)));
        assert_eq!(strata[1].free, Some((1, 1)));

        let strata = conic_boundary_strata(1, 1).unwrap();
        assert_eq!(strata.len(), 4);
        let labels: Vec<&str> = strata.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["D2x[0,inf)^1", "[0,inf)^1xD2", "y0=0", "x3=0"]);
        assert_eq!(strata[0].free, Some((0, 1)));
        assert_eq!(strata[1].free, Some((2, 3)));
    }

    #[test]
    fn conic_double_split_windows_agree() {
        assert!(conic_double_split(0, 0, 0).pass);
        assert!(conic_double_split(1, 0, 2).pass);
        assert!(conic_double_split(2, 1, 1).pass);
    }

    fn fobj(id: &str, dim: i64) -> FlowObject {
        let v = if dim >= 0 {
            VirtualDim { plus: dim as u32, minus: 0 }
        } else {
            VirtualDim { plus: 0, minus: (-dim) as u32 }
        };
        FlowObject { id: id.into(), v, dim }
    }

    fn comp0(id: &str, stratum: Arc, count: i64) -> FormalComponent {
        FormalComponent {
            id: id.into(),
            stratum,
            total_dim: 0,
            obstruction_rank: 0,
            count: BigInt::from(count),
            facets: Some(Vec::new()),
        }
    }

    fn comp1(id: &str, stratum: Arc, facets: Vec<Facet>) -> FormalComponent {
        FormalComponent {
            id: id.into(),
            stratum,
            total_dim: 1,
            obstruction_rank: 0,
            count: BigInt::one(),
            facets: Some(facets),
        }
    }

    fn brk(set: usize, elem: usize, left: Ratio, factors: [&str; 2], sign: i8) -> Facet {
        Facet {
            label: FacetKind::Break { set, elem, left_energy: left },
            pieces: vec![FacetPiece {
                factors: vec![factors[0].into(), factors[1].into()],
                sign,
            }],
        }
    }

    fn forget(index: usize, factor: &str, sign: i8) -> Facet {
        Facet {
            label: FacetKind::ForgetVertex { index },
            pieces: vec![FacetPiece { factors: vec![factor.into()], sign }],
        }
    }

    fn sets(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    fn singleton_two_horn() -> FlowSimplex {
        let mut payloads: BTreeMap<u32, Cells> = BTreeMap::new();
        let mut m3 = Cells::new();
        m3.insert(
            (0, 0, Ratio::zero()),
            vec![comp0("c1", single_vertex_arc(0, 0, 1, 0, sets(&[]), Ratio::zero()), 1)],
        );
        payloads.insert(0b011, m3);
        let mut m6 = Cells::new();
        m6.insert(
            (0, 0, Ratio::zero()),
            vec![comp0("c2", single_vertex_arc(1, 0, 2, 0, sets(&[]), Ratio::zero()), 1)],
        );
        payloads.insert(0b110, m6);
        FlowSimplex {
            gamma: GammaSpec::Trivial,
            vertices: vec![
                vec![fobj("x", 0)],
                vec![fobj("y", 0)],
                vec![fobj("z", 0)],
            ],
            payloads,
            equivalences: BTreeMap::new(),
            integer_signs: true,
        }
    }

    #[test]
    fn horn_fill_of_a_singleton_two_horn() {
        let sim = singleton_two_horn();
        let view = horn_fill_strata(&sim, 1, 0, 0, &Ratio::zero(), 4).unwrap();
        assert!(view.report.pass, "{}", view.report);
        assert_eq!(view.top_cells.len(), 1);
        let cell = &view.top_cells[0];
        assert_eq!(cell.block, (1, 0));
        assert_eq!(cell.dim, 1);
        assert_eq!(cell.facets.len(), 2);
        assert_eq!(cell.facets[0].class, CellFacetClass::LabelledBoundary);
        assert_eq!(cell.facets[0].label, cell.arc.key());
        assert_eq!(cell.facets[1].class, CellFacetClass::MissingFacetHypersurface);
        let minimal = single_vertex_arc(0, 0, 2, 0, sets(&[1]), Ratio::zero());
        assert_eq!(cell.facets[1].label, minimal.key());

        assert_eq!(view.missing.len(), 1);
        let miss = &view.missing[0];
        assert_eq!(miss.virtual_dim(), 0);
        assert_eq!(miss.count, BigInt::one());
        assert_eq!(miss.facets, Some(Vec::new()));
        assert_eq!(miss.stratum, single_vertex_arc(0, 0, 2, 0, sets(&[]), Ratio::zero()));

        let chain = Arc {
            edges: vec![
                ArcEdge { set: 0, elem: 0 },
                ArcEdge { set: 1, elem: 0 },
                ArcEdge { set: 2, elem: 0 },
            ],
            verts: vec![
                ArcVertex { sets: sets(&[]), energy: Ratio::zero() },
                ArcVertex { sets: sets(&[]), energy: Ratio::zero() },
            ],
        };
        let expected: BTreeMap<String, u32> = [
            (minimal.key(), 0),
            (chain.key(), 1),
            (miss.stratum.key(), 1),
        ]
        .into_iter()
        .collect();
        let got: BTreeMap<String, u32> = view.strata.iter().cloned().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn horn_fill_of_an_empty_horn() {
        let sim = FlowSimplex {
            gamma: GammaSpec::Trivial,
            vertices: vec![
                vec![fobj("x", 0)],
                vec![fobj("y", 0)],
                vec![fobj("z", 0)],
            ],
            payloads: BTreeMap::new(),
            equivalences: BTreeMap::new(),
            integer_signs: true,
        };
        let view = horn_fill_strata(&sim, 1, 0, 0, &Ratio::zero(), 3).unwrap();
        assert!(view.report.pass);
        assert!(view.top_cells.is_empty());
        assert!(view.missing.is_empty());
        assert!(view.strata.is_empty());
    }

    #[test]
    fn horn_fill_rejects_bad_input() {
        let sim = singleton_two_horn();
        assert!(horn_fill_strata(&sim, 0, 0, 0, &Ratio::zero(), 3).is_err());
        assert!(horn_fill_strata(&sim, 2, 0, 0, &Ratio::zero(), 3).is_err());

        let mut with_face = sim.clone();
        let mut cells = Cells::new();
        cells.insert(
            (0, 0, Ratio::zero()),
            vec![comp0("bad", single_vertex_arc(0, 0, 2, 0, sets(&[]), Ratio::zero()), 1)],
        );
        with_face.payloads.insert(0b101, cells);
        assert!(horn_fill_strata(&with_face, 1, 0, 0, &Ratio::zero(), 3).is_err());

        let mut unequal = sim.clone();
        let comp = &mut unequal.payloads.get_mut(&0b011).unwrap().values_mut().next().unwrap()[0];
        comp.total_dim = 1;
        comp.obstruction_rank = 1;
        let err = horn_fill_strata(&unequal, 1, 0, 0, &Ratio::zero(), 3).unwrap_err();
        assert!(err.contains("stabilization"), "{err}");
    }

    fn singleton_bimodule(left: &str, right: &str, id: &str) -> FlowBimodule {
        let mut payloads: BTreeMap<u32, Cells> = BTreeMap::new();
        let mut edge = Cells::new();
        edge.insert(
            (0, 0, Ratio::zero()),
            vec![comp0(id, single_vertex_arc(0, 0, 1, 0, sets(&[]), Ratio::zero()), 1)],
        );
        payloads.insert(0b11, edge);
        FlowBimodule::new(FlowSimplex {
            gamma: GammaSpec::Trivial,
            vertices: vec![vec![fobj(left, 0)], vec![fobj(right, 0)]],
            payloads,
            equivalences: BTreeMap::new(),
            integer_signs: true,
        })
        .unwrap()
    }

    #[test]
    fn fill_horn2_singleton_assembles_a_valid_missing_edge() {
        let b1 = singleton_bimodule("x", "y", "c1");
        let b2 = singleton_bimodule("y", "z", "c2");
        let fill = fill_horn2(&b1, &b2).unwrap();
        assert!(fill.report.pass, "{}", fill.report);
        let edge = fill.missing.edge_cells();
        assert_eq!(edge.len(), 1);
        let comps = &edge[&(0, 0, Ratio::zero())];
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].virtual_dim(), 0);
        assert_eq!(comps[0].count, BigInt::one());

        let cx = chain_complex(&b1.source_category(), Ring::Z);
        let cz = chain_complex(&b2.target_category(), Ring::Z);
        let m = bimodule_chain_map(&fill.missing, &cx, &cz);
        assert_eq!(m[&0], Matrix::identity(1));
        let composed = compose_bimodules(&b1, &b2).unwrap();
        assert_eq!(bimodule_chain_map(&composed, &cx, &cz), m);
    }

    /// Two composable Morse continuation bimodules over three two-object
    /// categories, with balanced counts so every boundary count vanishes.
    fn continuation_pair() -> (FlowBimodule, FlowBimodule) {
        let xs = vec![fobj("a", 1), fobj("b", 0)];
        let ys = vec![fobj("c", 1), fobj("d", 0)];
        let zs = vec![fobj("e", 1), fobj("f", 0)];
        let one = Ratio::one;
        let zero = Ratio::zero;

        let mut p1: BTreeMap<u32, Cells> = BTreeMap::new();
        let mut xcells = Cells::new();
        xcells.insert(
            (0, 1, one()),
            vec![comp0("xc", single_vertex_arc(0, 0, 0, 1, sets(&[]), one()), 2)],
        );
        p1.insert(0b01, xcells);
        let mut ycells = Cells::new();
        ycells.insert(
            (0, 1, one()),
            vec![comp0("yc", single_vertex_arc(1, 0, 1, 1, sets(&[]), one()), 2)],
        );
        p1.insert(0b10, ycells);
        let mut e1cells = Cells::new();
        e1cells.insert(
            (0, 0, zero()),
            vec![comp0("e1", single_vertex_arc(0, 0, 1, 0, sets(&[]), zero()), 1)],
        );
        e1cells.insert(
            (1, 1, zero()),
            vec![comp0("e2", single_vertex_arc(0, 1, 1, 1, sets(&[]), zero()), 1)],
        );
        e1cells.insert(
            (0, 1, one()),
            vec![comp1(
                "w",
                single_vertex_arc(0, 0, 1, 1, sets(&[]), one()),
                vec![
                    brk(0, 1, one(), ["xc", "e2"], 1),
                    brk(1, 0, zero(), ["e1", "yc"], -1),
                ],
            )],
        );
        p1.insert(0b11, e1cells);
        let b1 = FlowBimodule::new(FlowSimplex {
            gamma: GammaSpec::NonnegRational,
            vertices: vec![xs, ys.clone()],
            payloads: p1,
            equivalences: BTreeMap::new(),
            integer_signs: true,
        })
        .unwrap();

        let mut p2: BTreeMap<u32, Cells> = BTreeMap::new();
        let mut ycells = Cells::new();
        ycells.insert(
            (0, 1, one()),
            vec![comp0("yc", single_vertex_arc(0, 0, 0, 1, sets(&[]), one()), 2)],
        );
        p2.insert(0b01, ycells);
        let mut zcells = Cells::new();
        zcells.insert(
            (0, 1, one()),
            vec![comp0("zc", single_vertex_arc(1, 0, 1, 1, sets(&[]), one()), 2)],
        );
        p2.insert(0b10, zcells);
        let mut e2cells = Cells::new();
        e2cells.insert(
            (0, 0, zero()),
            vec![comp0("g1", single_vertex_arc(0, 0, 1, 0, sets(&[]), zero()), 1)],
        );
        e2cells.insert(
            (1, 1, zero()),
            vec![comp0("g2", single_vertex_arc(0, 1, 1, 1, sets(&[]), zero()), 1)],
        );
        e2cells.insert(
            (0, 1, one()),
            vec![comp1(
                "v",
                single_vertex_arc(0, 0, 1, 1, sets(&[]), one()),
                vec![
                    brk(0, 1, one(), ["yc", "g2"], 1),
                    brk(1, 0, zero(), ["g1", "zc"], -1),
                ],
            )],
        );
        p2.insert(0b11, e2cells);
        let b2 = FlowBimodule::new(FlowSimplex {
            gamma: GammaSpec::NonnegRational,
            vertices: vec![ys, zs],
            payloads: p2,
            equivalences: BTreeMap::new(),
            integer_signs: true,
        })
        .unwrap();
        (b1, b2)
    }

    fn graded_entry(m: &GradedMap, k: i64, rows: usize, cols: usize) -> Matrix {
        m.get(&k).cloned().unwrap_or_else(|| Matrix::zero(rows, cols))
    }

    #[test]
    fn fill_horn2_composite_matches_the_matrix_product() {
        let (b1, b2) = continuation_pair();
        assert!(validate_flow_simplex(b1.simplex()).pass);
        assert!(validate_flow_simplex(b2.simplex()).pass);
        let fill = fill_horn2(&b1, &b2).unwrap();
        assert!(fill.report.pass, "{}", fill.report);

        // One filling cell per morphism cell of the composite.
        let keys: Vec<CellKey> = fill.per_cell.iter().map(|v| v.cell.clone()).collect();
        assert_eq!(keys, vec![
            (0, 0, Ratio::zero()),
            (0, 1, Ratio::one()),
            (1, 1, Ratio::zero()),
        ]);
        let low = &fill.per_cell[0];
        assert_eq!(low.top_cells.len(), 1);
        assert_eq!(low.strata.len(), 3);
        let big = &fill.per_cell[1];
        assert_eq!(big.top_cells.len(), 5);
        assert_eq!(big.strata.len(), 11);
        assert!(big.top_cells.iter().all(|c| c.dim == 2));
        let high = &fill.per_cell[2];
        assert_eq!(high.top_cells.len(), 1);
        assert_eq!(high.strata.len(), 3);

        // The big missing component breaks through b and through e, with
        // the assembled sub-classes as partners and balanced signs.
        assert_eq!(big.missing.len(), 1);
        let miss = &big.missing[0];
        assert_eq!(miss.virtual_dim(), 1);
        let facets = miss.facets.as_ref().expect("an edge class assembles its facets");
        assert_eq!(facets.len(), 2);
        let ace_id = low.missing[0].id.clone();
        let bdf_id = high.missing[0].id.clone();
        assert_eq!(
            facets[0].label,
            FacetKind::Break { set: 0, elem: 1, left_energy: Ratio::one() }
        );
        assert_eq!(facets[0].pieces.len(), 1);
        assert_eq!(facets[0].pieces[0].factors, vec!["xc".to_string(), bdf_id]);
        assert_eq!(facets[0].pieces[0].sign, 1);
        assert_eq!(
            facets[1].label,
            FacetKind::Break { set: 2, elem: 0, left_energy: Ratio::zero() }
        );
        assert_eq!(facets[1].pieces.len(), 1);
        assert_eq!(facets[1].pieces[0].factors, vec![ace_id, "zc".to_string()]);
        assert_eq!(facets[1].pieces[0].sign, -1);

        // The missing edge's chain map is the matrix product of the two
        // edge maps, and matches the composed bimodule.
        let cx = chain_complex(&b1.source_category(), Ring::Z);
        let cz = chain_complex(&b2.target_category(), Ring::Z);
        let fm = bimodule_chain_map(&fill.missing, &cx, &cz);
        let composed = compose_bimodules(&b1, &b2).unwrap();
        let cm = bimodule_chain_map(&composed, &cx, &cz);
        for k in [0i64, 1] {
            assert_eq!(graded_entry(&fm, k, 1, 1), graded_entry(&cm, k, 1, 1), "degree {k}");
            assert_eq!(graded_entry(&fm, k, 1, 1), Matrix::identity(1), "degree {k}");
        }
    }

    /// The inner horn of a 3-simplex on discrete singleton categories:
    /// every stratum is a point, so the filler stratification must be the
    /// whole arc category.
    fn discrete_three_horn() -> FlowSimplex {
        let zero = Ratio::zero;
        let key = (0usize, 0usize, Ratio::zero());
        let pair_masks = [0b0011u32, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100];
        let mut payloads: BTreeMap<u32, Cells> = BTreeMap::new();
        for mask in pair_masks {
            let lo = mask.trailing_zeros() as usize;
            let hi = 31 - mask.leading_zeros() as usize;
            let mut cells = Cells::new();
            cells.insert(
                key.clone(),
                vec![comp0(
                    &format!("e{mask}"),
                    single_vertex_arc(lo, 0, hi, 0, sets(&[]), zero()),
                    1,
                )],
            );
            payloads.insert(mask, cells);
        }
        let triple = |mask: u32, mid: usize, lo: usize, hi: usize, sub: &str, parts: [&str; 2]| {
            let mut cells = Cells::new();
            cells.insert(
                key.clone(),
                vec![
                    comp0(sub, single_vertex_arc(lo, 0, hi, 0, sets(&[]), zero()), 1),
                    comp1(
                        &format!("t{mask}b"),
                        single_vertex_arc(lo, 0, hi, 0, sets(&[mid]), zero()),
                        vec![
                            brk(mid, 0, zero(), [parts[0], parts[1]], 1),
                            forget(mid, sub, -1),
                        ],
                    ),
                ],
            );
            cells
        };
        payloads.insert(0b0111, triple(0b0111, 1, 0, 2, "e5", ["e3", "e6"]));
        payloads.insert(0b1011, triple(0b1011, 1, 0, 3, "e9", ["e3", "e10"]));
        payloads.insert(0b1110, triple(0b1110, 2, 1, 3, "e10", ["e6", "e12"]));
        let mut equivalences: BTreeMap<(u32, usize), EquivRecord> = BTreeMap::new();
        for (mask, idx, id) in [(0b0111u32, 1usize, "e5"), (0b1011, 1, "e9"), (0b1110, 2, "e10")] {
            let mut map = BTreeMap::new();
            map.insert(id.to_string(), id.to_string());
            equivalences.insert((mask, idx), EquivRecord { added_rank: 0, map });
        }
        FlowSimplex {
            gamma: GammaSpec::Trivial,
            vertices: (0..4).map(|i| vec![fobj(&format!("p{i}"), 0)]).collect(),
            payloads,
            equivalences,
            integer_signs: true,
        }
    }

    #[test]
    fn horn_fill_of_a_discrete_three_horn() {
        let sim = discrete_three_horn();
        let view = horn_fill_strata(&sim, 1, 0, 0, &Ratio::zero(), 4).unwrap();
        assert!(view.report.pass, "{}", view.report);
        assert_eq!(view.top_cells.len(), 7);
        assert!(view.top_cells.iter().all(|c| c.dim == 2));

        // One seam class spanning all seven cells.
        assert_eq!(view.missing.len(), 1);
        let miss = &view.missing[0];
        assert_eq!(miss.virtual_dim(), 1);
        assert_eq!(miss.count, BigInt::one());
        assert_eq!(miss.facets, None);
        assert_eq!(miss.stratum, single_vertex_arc(0, 0, 3, 0, sets(&[2]), Ratio::zero()));

        // Every gluing wall has a unique partner; there are six seams,
        // each seen from both sides.
        let glued: Vec<&CellFacet> = view
            .top_cells
            .iter()
            .flat_map(|c| c.facets.iter())
            .filter(|f| f.class == CellFacetClass::InteriorGluing)
            .collect();
        assert_eq!(glued.len(), 12);
        assert!(glued.iter().all(|f| f.partner.is_some()));

        // The filler stratification is the full arc category over the
        // cell: nine strata, matching the brute-force enumeration.
        let e = |set: usize, elem: usize| ArcEdge { set, elem };
        let v = |xs: &[usize]| ArcVertex { sets: sets(xs), energy: Ratio::zero() };
        let sv = |xs: &[usize]| single_vertex_arc(0, 0, 3, 0, sets(xs), Ratio::zero());
        let expected: BTreeMap<String, u32> = [
            (sv(&[1, 2]).key(), 0),
            (sv(&[1]).key(), 1),
            (sv(&[2]).key(), 1),
            (Arc { edges: vec![e(0, 0), e(1, 0), e(3, 0)], verts: vec![v(&[]), v(&[2])] }.key(), 1),
            (Arc { edges: vec![e(0, 0), e(2, 0), e(3, 0)], verts: vec![v(&[1]), v(&[])] }.key(), 1),
            (sv(&[]).key(), 2),
            (Arc { edges: vec![e(0, 0), e(1, 0), e(3, 0)], verts: vec![v(&[]), v(&[])] }.key(), 2),
            (Arc { edges: vec![e(0, 0), e(2, 0), e(3, 0)], verts: vec![v(&[]), v(&[])] }.key(), 2),
            (
                Arc {
                    edges: vec![e(0, 0), e(1, 0), e(2, 0), e(3, 0)],
                    verts: vec![v(&[]), v(&[]), v(&[])],
                }
                .key(),
                2,
            ),
        ]
        .into_iter()
        .collect();
        let got: BTreeMap<String, u32> = view.strata.iter().cloned().collect();
        assert_eq!(got, expected);
    }
}
