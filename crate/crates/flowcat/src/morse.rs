//! Discrete Morse theory on finite simplicial complexes: acyclic
//! matchings, the flow categories they induce, continuation bimodules
//! between two matchings on the same complex, and an independent
//! reference computation of simplicial homology.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::arcs::{GammaSpec, Ratio};
use crate::flow::{
    single_vertex_arc, Cells, Facet, FacetKind, FacetPiece, FlowBimodule, FlowCategory,
    FlowObject, FlowSimplex, FormalComponent, VirtualDim,
};
use crate::homology::{ChainComplex, HomologyGroup, HomologyResult, Matrix, Ring};
use crate::report::CheckReport;

/// A finite simplicial complex with every face stored explicitly.
/// Cells are sorted vertex lists, ordered by dimension then
/// lexicographically; the order is the canonical cell numbering used
/// everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex {
    cells: Vec<Vec<usize>>,
    index: BTreeMap<Vec<usize>, usize>,
}

impl SimplicialComplex {
    /// Builds the downward closure of the given cells.
    pub fn from_maximal(maximal: &[Vec<usize>]) -> SimplicialComplex {
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for m in maximal {
            let verts: BTreeSet<usize> = m.iter().copied().collect();
            assert!(!verts.is_empty(), "cells need at least one vertex");
            assert_eq!(verts.len(), m.len(), "repeated vertex in a cell");
            let vs: Vec<usize> = verts.into_iter().collect();
            for mask in 1u32..(1 << vs.len()) {
                let sub: Vec<usize> = vs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &v)| v)
                    .collect();
                seen.insert(sub);
            }
        }
        let mut cells: Vec<Vec<usize>> = seen.into_iter().collect();
        cells.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let index = cells.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        SimplicialComplex { cells, index }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, i: usize) -> &[usize] {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn dim_of(&self, i: usize) -> usize {
        self.cells[i].len() - 1
    }

    pub fn index_of(&self, cell: &[usize]) -> Option<usize> {
        self.index.get(cell).copied()
    }

    pub fn label(&self, i: usize) -> String {
        let parts: Vec<String> = self.cells[i].iter().map(|v| v.to_string()).collect();
        parts.join(".")
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.cells.last().map(|c| c.len() - 1)
    }

    /// Codimension-one faces with alternating incidence signs: omitting
    /// the j-th smallest vertex contributes the sign (-1)^j.
    pub fn boundary(&self, i: usize) -> Vec<(usize, i64)> {
        let cell = &self.cells[i];
        if cell.len() == 1 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(cell.len());
        for j in 0..cell.len() {
            let mut face = cell.clone();
            face.remove(j);
            let idx = self.index[&face];
            let sign = if j % 2 == 0 { 1 } else { -1 };
            out.push((idx, sign));
        }
        out
    }

    pub fn incidence(&self, coface: usize, face: usize) -> i64 {
        self.boundary(coface)
            .into_iter()
            .find(|(f, _)| *f == face)
            .map(|(_, s)| s)
            .unwrap_or(0)
    }

    /// Cells that are not a proper face of any other cell.
    pub fn maximal_cells(&self) -> Vec<Vec<usize>> {
        let mut covered = vec![false; self.len()];
        for i in 0..self.len() {
            for (f, _) in self.boundary(i) {
                covered[f] = true;
            }
        }
        self.cells
            .iter()
            .enumerate()
            .filter(|(i, _)| !covered[*i])
            .map(|(_, c)| c.clone())
            .collect()
    }

    /// The simplicial chain complex with alternating-sign boundary.
    pub fn chain_complex(&self, ring: Ring) -> ChainComplex {
        let mut basis: BTreeMap<i64, Vec<String>> = BTreeMap::new();
        let mut position = vec![(0i64, 0usize); self.len()];
        for (i, c) in self.cells.iter().enumerate() {
            let k = (c.len() - 1) as i64;
            let entry = basis.entry(k).or_default();
            position[i] = (k, entry.len());
            entry.push(self.label(i));
        }
        let mut d: BTreeMap<i64, Matrix> = BTreeMap::new();
        for &k in basis.keys() {
            let rows = basis.get(&(k - 1)).map_or(0, |v| v.len());
            let cols = basis[&k].len();
            d.insert(k, Matrix::zero(rows, cols));
        }
        for i in 0..self.len() {
            let (k, col) = position[i];
            for (f, s) in self.boundary(i) {
                let (_, row) = position[f];
                let m = d.get_mut(&k).unwrap();
                let v = m.get(row, col) + BigInt::from(s);
                m.set(row, col, v);
            }
        }
        ChainComplex { ring, basis, d }
    }
}

// ---- reference homology ------------------------------------------------
//
// A self-contained computation of simplicial homology used as the
// comparison target for the Morse pipeline. It reduces with the first
// nonzero pivot and reads Betti numbers from ranks, sharing no code with
// the presentation-based machinery; keep it that way.

fn oracle_boundary_matrix(sc: &SimplicialComplex, k: usize) -> Vec<Vec<BigInt>> {
    let rows: Vec<usize> =
        (0..sc.len()).filter(|&i| sc.dim_of(i) + 1 == k).collect();
    let cols: Vec<usize> = (0..sc.len()).filter(|&i| sc.dim_of(i) == k).collect();
    let row_pos: BTreeMap<usize, usize> =
        rows.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let mut m = vec![vec![BigInt::zero(); cols.len()]; rows.len()];
    for (j, &c) in cols.iter().enumerate() {
        for (f, s) in sc.boundary(c) {
            m[row_pos[&f]][j] += BigInt::from(s);
        }
    }
    m
}

fn oracle_invariant_factors(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut t = 0;
    while t < rows.min(cols) {
        let mut pivot = None;
        'scan: for j in t..cols {
            for i in t..rows {
                if !a[i][j].is_zero() {
                    pivot = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                while !a[i][t].is_zero() {
                    let q = &a[i][t] / &a[t][t];
                    for j in t..cols {
                        let v = &a[i][j] - &q * &a[t][j];
                        a[i][j] = v;
                    }
                    if !a[i][t].is_zero() {
                        a.swap(i, t);
                        dirty = true;
                    }
                }
            }
            for j in t + 1..cols {
                while !a[t][j].is_zero() {
                    let q = &a[t][j] / &a[t][t];
                    for i in t..rows {
                        let v = &a[i][j] - &q * &a[i][t];
                        a[i][j] = v;
                    }
                    if !a[t][j].is_zero() {
                        for row in a.iter_mut() {
                            row.swap(t, j);
                        }
                        dirty = true;
                    }
                }
            }
            if dirty {
                continue;
            }
            // Absorb any entry the pivot does not divide, then rerun.
            let mut bad = None;
            'find: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !(&a[i][j] % &a[t][t]).is_zero() {
                        bad = Some(i);
                        break 'find;
                    }
                }
            }
            match bad {
                Some(i) => {
                    for j in t..cols {
                        let v = &a[t][j] + &a[i][j];
                        a[t][j] = v;
                    }
                }
                None => break,
            }
        }
        t += 1;
    }
    (0..t).map(|i| a[i][i].abs()).filter(|v| !v.is_zero()).collect()
}

fn oracle_rank_mod2(a: &[Vec<BigInt>]) -> usize {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let two = BigInt::from(2);
    let mut m: Vec<Vec<u8>> = a
        .iter()
        .map(|row| row.iter().map(|v| v.mod_floor_u8(&two)).collect())
        .collect();
    let mut rank = 0;
    for j in 0..cols {
        let Some(p) = (rank..rows).find(|&i| m[i][j] == 1) else { continue };
        m.swap(rank, p);
        for i in 0..rows {
            if i != rank && m[i][j] == 1 {
                for c in 0..cols {
                    m[i][c] ^= m[rank][c];
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

trait ModFloorU8 {
    fn mod_floor_u8(&self, m: &BigInt) -> u8;
}

impl ModFloorU8 for BigInt {
    fn mod_floor_u8(&self, m: &BigInt) -> u8 {
        use num_integer::Integer;
        if self.mod_floor(m).is_zero() {
            0
        } else {
            1
        }
    }
}

/// Simplicial homology computed directly from boundary ranks and
/// invariant factors.
pub fn simplicial_homology(sc: &SimplicialComplex, ring: Ring) -> HomologyResult {
    let mut groups = BTreeMap::new();
    let Some(maxdim) = sc.max_dim() else {
        return HomologyResult { ring, groups };
    };
    let counts: Vec<usize> =
        (0..=maxdim).map(|k| (0..sc.len()).filter(|&i| sc.dim_of(i) == k).count()).collect();
    match ring {
        Ring::Z => {
            let factors: Vec<Vec<BigInt>> = (0..=maxdim + 1)
                .map(|k| oracle_invariant_factors(oracle_boundary_matrix(sc, k)))
                .collect();
            for k in 0..=maxdim {
                let r_here = factors[k].len();
                let r_above = factors[k + 1].len();
                let torsion: Vec<BigInt> = factors[k + 1]
                    .iter()
                    .filter(|v| **v > BigInt::one())
                    .cloned()
                    .collect();
                groups.insert(
                    k as i64,
                    HomologyGroup { free_rank: counts[k] - r_here - r_above, torsion },
                );
            }
        }
        Ring::Z2 => {
            let ranks: Vec<usize> = (0..=maxdim + 1)
                .map(|k| oracle_rank_mod2(&oracle_boundary_matrix(sc, k)))
                .collect();
            for k in 0..=maxdim {
                groups.insert(
                    k as i64,
                    HomologyGroup {
                        free_rank: counts[k] - ranks[k] - ranks[k + 1],
                        torsion: Vec::new(),
                    },
                );
            }
        }
    }
    HomologyResult { ring, groups }
}

// ---- matchings ---------------------------------------------------------

/// A partial matching of cells with their codimension-one cofaces,
/// stored as (face, coface) index pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn empty() -> Matching {
        Matching { pairs: Vec::new() }
    }

    fn up_map(&self) -> BTreeMap<usize, usize> {
        self.pairs.iter().copied().collect()
    }
}

/// Structural checks plus acyclicity: orienting matched incidences
/// upward and all others downward must leave the cell digraph acyclic.
pub fn validate_matching(sc: &SimplicialComplex, m: &Matching) -> CheckReport {
    let mut report = CheckReport::passing();
    let n = sc.len();
    let mut used = vec![false; n];
    for &(face, coface) in &m.pairs {
        if face >= n || coface >= n {
            report.push(format!("pair ({face}, {coface}) out of range"));
            continue;
        }
        if sc.dim_of(coface) != sc.dim_of(face) + 1 || sc.incidence(coface, face) == 0 {
            report.push(format!(
                "pair ({}, {}) is not a codimension-one incidence",
                sc.label(face),
                sc.label(coface)
            ));
        }
        for c in [face, coface] {
            if used[c] {
                report.push(format!("cell {} is matched twice", sc.label(c)));
            }
            used[c] = true;
        }
    }
    if !report.pass {
        return report;
    }
    let up = m.up_map();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for tau in 0..n {
        for (sigma, _) in sc.boundary(tau) {
            if up.get(&sigma) == Some(&tau) {
                adj[sigma].push(tau);
            } else {
                adj[tau].push(sigma);
            }
        }
    }
    // Iterative three-color cycle detection.
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => {
                        report.push(
                            "matching has a closed gradient path".to_string(),
                        );
                        return report;
                    }
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    report
}

pub fn critical_cells(sc: &SimplicialComplex, m: &Matching) -> Vec<usize> {
    let mut matched = vec![false; sc.len()];
    for &(a, b) in &m.pairs {
        matched[a] = true;
        matched[b] = true;
    }
    (0..sc.len()).filter(|&i| !matched[i]).collect()
}

/// Deterministic coreduction: repeatedly match the first cell whose
/// boundary has exactly one remaining face, otherwise declare the first
/// remaining cell critical.
pub fn greedy_matching(sc: &SimplicialComplex) -> Matching {
    let n = sc.len();
    let boundaries: Vec<Vec<usize>> =
        (0..n).map(|i| sc.boundary(i).into_iter().map(|(f, _)| f).collect()).collect();
    let mut available = vec![true; n];
    let mut remaining = n;
    let mut pairs = Vec::new();
    while remaining > 0 {
        let mut reduced = false;
        for tau in 0..n {
            if !available[tau] {
                continue;
            }
            let mut free = None;
            let mut count = 0;
            for &f in &boundaries[tau] {
                if available[f] {
                    count += 1;
                    free = Some(f);
                }
            }
            if count == 1 {
                let sigma = free.unwrap();
                pairs.push((sigma, tau));
                available[sigma] = false;
                available[tau] = false;
                remaining -= 2;
                reduced = true;
                break;
            }
        }
        if reduced {
            continue;
        }
        let first = (0..n).find(|&i| available[i]).unwrap();
        available[first] = false;
        remaining -= 1;
    }
    Matching { pairs }
}

// ---- the induced flow category -----------------------------------------

/// The flow category of a matching together with the critical cells it
/// is built on.
#[derive(Debug, Clone)]
pub struct MorseFlowOutput {
    pub critical: Vec<usize>,
    pub trajectories: usize,
    pub category: FlowCategory,
}

fn ratio(n: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(n))
}

/// Gradient paths from the boundary of `p` to critical cells one
/// dimension down, each with its product of incidence signs.
fn gradient_paths(
    sc: &SimplicialComplex,
    up: &BTreeMap<usize, usize>,
    critical: &[bool],
    p: usize,
) -> Vec<(usize, i64)> {
    let mut out = Vec::new();
    fn go(
        sc: &SimplicialComplex,
        up: &BTreeMap<usize, usize>,
        critical: &[bool],
        sigma: usize,
        w: i64,
        out: &mut Vec<(usize, i64)>,
    ) {
        if critical[sigma] {
            out.push((sigma, w));
            return;
        }
        let Some(&tau) = up.get(&sigma) else { return };
        let s_in = sc.incidence(tau, sigma);
        for (next, s_out) in sc.boundary(tau) {
            if next == sigma {
                continue;
            }
            go(sc, up, critical, next, -w * s_in * s_out, out);
        }
    }
    for (sigma, s) in sc.boundary(p) {
        go(sc, up, critical, sigma, s, &mut out);
    }
    out
}

/// Builds the flow category of an acyclic matching: objects are the
/// critical cells, the virtual-dimension-zero components are individual
/// gradient paths counted with signs, and each pair of critical cells
/// two dimensions apart carries one interval component whose facets list
/// every broken pair through an intermediate critical cell.
pub fn morse_flow_category(
    sc: &SimplicialComplex,
    m: &Matching,
) -> Result<MorseFlowOutput, String> {
    let check = validate_matching(sc, m);
    if !check.pass {
        return Err(check.first().unwrap_or("invalid matching").to_string());
    }
    let critical = critical_cells(sc, m);
    let mut is_critical = vec![false; sc.len()];
    for &c in &critical {
        is_critical[c] = true;
    }
    let object_of: BTreeMap<usize, usize> =
        critical.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let objects: Vec<FlowObject> = critical
        .iter()
        .map(|&c| FlowObject {
            id: sc.label(c),
            v: VirtualDim { plus: sc.dim_of(c) as u32, minus: 0 },
            dim: sc.dim_of(c) as i64,
        })
        .collect();
    let up = m.up_map();

    let mut components = Cells::new();
    let mut trajectories = 0;
    for (pi, &p) in critical.iter().enumerate() {
        let paths = gradient_paths(sc, &up, &is_critical, p);
        let mut counters: BTreeMap<usize, usize> = BTreeMap::new();
        for (end, w) in paths {
            let qi = object_of[&end];
            let k = counters.entry(end).or_insert(0);
            let id = format!("t:{}>{}:{}", objects[pi].id, objects[qi].id, *k);
            *k += 1;
            trajectories += 1;
            components.entry((pi, qi, ratio(1))).or_default().push(FormalComponent {
                id,
                stratum: single_vertex_arc(0, pi, 0, qi, BTreeSet::new(), ratio(1)),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::from(w),
                facets: Some(Vec::new()),
            });
        }
    }

    // Interval components between critical cells two dimensions apart.
    let mut intervals: Vec<((usize, usize, Ratio), FormalComponent)> = Vec::new();
    for (pi, &p) in critical.iter().enumerate() {
        for (ri, &r) in critical.iter().enumerate() {
            if sc.dim_of(p) != sc.dim_of(r) + 2 {
                continue;
            }
            let mut facets = Vec::new();
            for (zi, &z) in critical.iter().enumerate() {
                if sc.dim_of(z) != sc.dim_of(r) + 1 {
                    continue;
                }
                let left = components.get(&(pi, zi, ratio(1)));
                let right = components.get(&(zi, ri, ratio(1)));
                let (Some(left), Some(right)) = (left, right) else { continue };
                let mut pieces = Vec::new();
                for lc in left {
                    for rc in right {
                        pieces.push(FacetPiece {
                            factors: vec![lc.id.clone(), rc.id.clone()],
                            sign: 1,
                        });
                    }
                }
                facets.push(Facet {
                    label: FacetKind::Break { set: 0, elem: zi, left_energy: ratio(1) },
                    pieces,
                });
            }
            if facets.is_empty() {
                continue;
            }
            intervals.push((
                (pi, ri, ratio(2)),
                FormalComponent {
                    id: format!("w:{}>{}", objects[pi].id, objects[ri].id),
                    stratum: single_vertex_arc(0, pi, 0, ri, BTreeSet::new(), ratio(2)),
                    total_dim: 1,
                    obstruction_rank: 0,
                    count: BigInt::one(),
                    facets: Some(facets),
                },
            ));
        }
    }
    for (key, comp) in intervals {
        components.entry(key).or_default().push(comp);
    }

    let category = FlowCategory {
        gamma: GammaSpec::NonnegRational,
        objects,
        components,
        integer_signs: true,
        defect: BTreeMap::new(),
    };
    Ok(MorseFlowOutput { critical, trajectories, category })
}

// ---- continuation ------------------------------------------------------

/// Per-degree stabilized flow data of one matching.
struct FlowOperators {
    /// For each dimension: the matrix of the stabilized flow on chains.
    theta_inf: Vec<Matrix>,
    /// For each dimension: positions of critical cells among the cells
    /// of that dimension, in canonical order.
    critical_pos: Vec<Vec<usize>>,
}

fn flow_operators(sc: &SimplicialComplex, m: &Matching) -> FlowOperators {
    let maxdim = sc.max_dim().map_or(0, |d| d);
    let by_dim: Vec<Vec<usize>> = (0..=maxdim)
        .map(|k| (0..sc.len()).filter(|&i| sc.dim_of(i) == k).collect())
        .collect();
    let pos_in_dim: BTreeMap<usize, usize> = by_dim
        .iter()
        .flat_map(|cells| cells.iter().enumerate().map(|(p, &c)| (c, p)))
        .collect();
    let dmat: Vec<Matrix> = (0..=maxdim + 1)
        .map(|k| {
            let rows = if k == 0 { 0 } else { by_dim[k - 1].len() };
            let cols = if k > maxdim { 0 } else { by_dim[k].len() };
            let mut mat = Matrix::zero(rows, cols);
            if k > 0 && k <= maxdim {
                for (j, &c) in by_dim[k].iter().enumerate() {
                    for (f, s) in sc.boundary(c) {
                        let v = mat.get(pos_in_dim[&f], j) + BigInt::from(s);
                        mat.set(pos_in_dim[&f], j, v);
                    }
                }
            }
            mat
        })
        .collect();
    // The matching homotopy: a matched face maps to minus its coface,
    // scaled by their incidence.
    let up = m.up_map();
    let vmat: Vec<Matrix> = (0..=maxdim)
        .map(|k| {
            let rows = if k + 1 > maxdim { 0 } else { by_dim[k + 1].len() };
            let mut mat = Matrix::zero(rows, by_dim[k].len());
            for (j, &c) in by_dim[k].iter().enumerate() {
                if let Some(&tau) = up.get(&c) {
                    let s = sc.incidence(tau, c);
                    mat.set(pos_in_dim[&tau], j, BigInt::from(-s));
                }
            }
            mat
        })
        .collect();
    let mut is_critical = vec![true; sc.len()];
    for &(a, b) in &m.pairs {
        is_critical[a] = false;
        is_critical[b] = false;
    }
    let critical_pos: Vec<Vec<usize>> = by_dim
        .iter()
        .map(|cells| {
            cells
                .iter()
                .enumerate()
                .filter(|(_, &c)| is_critical[c])
                .map(|(p, _)| p)
                .collect()
        })
        .collect();
    let theta_inf: Vec<Matrix> = (0..=maxdim)
        .map(|k| {
            let n = by_dim[k].len();
            let mut theta = Matrix::identity(n);
            theta = theta.add(&dmat[k + 1].mul(&vmat[k]));
            if k > 0 {
                theta = theta.add(&vmat[k - 1].mul(&dmat[k]));
            }
            // Stabilize by repeated squaring; an acyclic matching makes
            // the flow eventually idempotent.
            let mut cur = theta;
            for _ in 0..64 {
                let next = cur.mul(&cur);
                if next == cur {
                    break;
                }
                cur = next;
            }
            cur
        })
        .collect();
    FlowOperators { theta_inf, critical_pos }
}

fn cells_at_vertex_one(cells: &Cells) -> Cells {
    let mut out = cells.clone();
    for comps in out.values_mut() {
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
    out
}

/// The continuation bimodule between two matchings on one complex: its
/// edge counts are the composite of the inclusion of the first Morse
/// complex into chains with the projection onto the second.
pub fn continuation_bimodule(
    sc: &SimplicialComplex,
    m0: &Matching,
    m1: &Matching,
) -> Result<FlowBimodule, String> {
    let f0 = morse_flow_category(sc, m0)?;
    let f1 = morse_flow_category(sc, m1)?;
    let ops0 = flow_operators(sc, m0);
    let ops1 = flow_operators(sc, m1);
    let maxdim = sc.max_dim().map_or(0, |d| d);

    // Per dimension: include the first matching's critical cells, flow,
    // and project onto the second matching's critical cells.
    let h: Vec<Matrix> = (0..=maxdim)
        .map(|k| {
            let iota = ops0.theta_inf[k].select_cols(&ops0.critical_pos[k]);
            let pi = ops1.theta_inf[k].select_rows(&ops1.critical_pos[k]);
            pi.mul(&iota)
        })
        .collect();

    // Positions of objects within their dimension, on both sides.
    let obj_pos = |out: &MorseFlowOutput| -> Vec<(usize, usize)> {
        let mut per_dim: BTreeMap<usize, usize> = BTreeMap::new();
        out.critical
            .iter()
            .map(|&c| {
                let k = sc.dim_of(c);
                let p = per_dim.entry(k).or_insert(0);
                let res = (k, *p);
                *p += 1;
                res
            })
            .collect()
    };
    let pos0 = obj_pos(&f0);
    let pos1 = obj_pos(&f1);

    let mut edge = Cells::new();
    for (pi, &(pk, pp)) in pos0.iter().enumerate() {
        for (qi, &(qk, qp)) in pos1.iter().enumerate() {
            if pk != qk {
                continue;
            }
            let count = h[pk].get(qp, pp).clone();
            if count.is_zero() {
                continue;
            }
            let id = format!("h:{}>{}", f0.category.objects[pi].id, f1.category.objects[qi].id);
            edge.entry((pi, qi, ratio(0))).or_default().push(FormalComponent {
                id,
                stratum: single_vertex_arc(0, pi, 1, qi, BTreeSet::new(), ratio(0)),
                total_dim: 0,
                obstruction_rank: 0,
                count,
                facets: Some(Vec::new()),
            });
        }
    }

    // Interval components one dimension apart, with the broken
    // configurations through either side as facets.
    let mut intervals: Vec<((usize, usize, Ratio), FormalComponent)> = Vec::new();
    for (pi, &(pk, _)) in pos0.iter().enumerate() {
        for (qi, &(qk, _)) in pos1.iter().enumerate() {
            if pk != qk + 1 {
                continue;
            }
            let mut facets = Vec::new();
            for (zi, &(zk, _)) in pos0.iter().enumerate() {
                if zk != qk {
                    continue;
                }
                let left = f0.category.components.get(&(pi, zi, ratio(1)));
                let right = edge.get(&(zi, qi, ratio(0)));
                let (Some(left), Some(right)) = (left, right) else { continue };
                let mut pieces = Vec::new();
                for lc in left {
                    for rc in right {
                        pieces.push(FacetPiece {
                            factors: vec![lc.id.clone(), rc.id.clone()],
                            sign: 1,
                        });
                    }
                }
                facets.push(Facet {
                    label: FacetKind::Break { set: 0, elem: zi, left_energy: ratio(1) },
                    pieces,
                });
            }
            for (wi, &(wk, _)) in pos1.iter().enumerate() {
                if wk != pk {
                    continue;
                }
                let left = edge.get(&(pi, wi, ratio(0)));
                let right = f1.category.components.get(&(wi, qi, ratio(1)));
                let (Some(left), Some(right)) = (left, right) else { continue };
                let mut pieces = Vec::new();
                for lc in left {
                    for rc in right {
                        pieces.push(FacetPiece {
                            factors: vec![lc.id.clone(), rc.id.clone()],
                            sign: -1,
                        });
                    }
                }
                facets.push(Facet {
                    label: FacetKind::Break { set: 1, elem: wi, left_energy: ratio(0) },
                    pieces,
                });
            }
            if facets.is_empty() {
                continue;
            }
            intervals.push((
                (pi, qi, ratio(1)),
                FormalComponent {
                    id: format!(
                        "w:{}>{}",
                        f0.category.objects[pi].id, f1.category.objects[qi].id
                    ),
                    stratum: single_vertex_arc(0, pi, 1, qi, BTreeSet::new(), ratio(1)),
                    total_dim: 1,
                    obstruction_rank: 0,
                    count: BigInt::one(),
                    facets: Some(facets),
                },
            ));
        }
    }
    for (key, comp) in intervals {
        edge.entry(key).or_default().push(comp);
    }

    let mut payloads = BTreeMap::new();
    payloads.insert(0b01, f0.category.components.clone());
    payloads.insert(0b10, cells_at_vertex_one(&f1.category.components));
    payloads.insert(0b11, edge);
    FlowBimodule::new(FlowSimplex {
        gamma: GammaSpec::NonnegRational,
        vertices: vec![f0.category.objects.clone(), f1.category.objects.clone()],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{validate_flow_category, validate_flow_simplex};
    use crate::homology::{
        bimodule_chain_map, chain_complex, homology, homology_data, induced_on_homology,
        presented_iso, validate_chain_map,
    };

    fn sphere2() -> SimplicialComplex {
        SimplicialComplex::from_maximal(&[
            vec![0, 1, 2],
            vec![0, 1, 3],
            vec![0, 2, 3],
            vec![1, 2, 3],
        ])
    }

    fn torus7() -> SimplicialComplex {
        let mut tris = Vec::new();
        for i in 0..7usize {
            tris.push(vec![i, (i + 1) % 7, (i + 3) % 7]);
            tris.push(vec![i, (i + 2) % 7, (i + 3) % 7]);
        }
        SimplicialComplex::from_maximal(&tris)
    }

    fn projective_plane6() -> SimplicialComplex {
        SimplicialComplex::from_maximal(&[
            vec![0, 1, 2],
            vec![0, 1, 3],
            vec![0, 2, 4],
            vec![0, 3, 5],
            vec![0, 4, 5],
            vec![1, 2, 5],
            vec![1, 3, 4],
            vec![1, 4, 5],
            vec![2, 3, 4],
            vec![2, 3, 5],
        ])
    }

    #[test]
    fn closure_and_canonical_order() {
        let sc = SimplicialComplex::from_maximal(&[vec![2, 0, 1]]);
        let labels: Vec<String> = (0..sc.len()).map(|i| sc.label(i)).collect();
        assert_eq!(labels, ["0", "1", "2", "0.1", "0.2", "1.2", "0.1.2"]);
        assert_eq!(sc.maximal_cells(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn boundary_signs_alternate() {
        let sc = SimplicialComplex::from_maximal(&[vec![0, 1, 2]]);
        let top = sc.index_of(&[0, 1, 2]).unwrap();
        let faces: Vec<(String, i64)> =
            sc.boundary(top).into_iter().map(|(f, s)| (sc.label(f), s)).collect();
        assert_eq!(
            faces,
            vec![("1.2".to_string(), 1), ("0.2".to_string(), -1), ("0.1".to_string(), 1)]
        );
    }

    #[test]
    fn reference_homology_of_surfaces() {
        let h = simplicial_homology(&sphere2(), Ring::Z);
        assert_eq!(h.group(0).free_rank, 1);
        assert!(h.group(1).is_trivial());
        assert_eq!(h.group(2).free_rank, 1);

        let h = simplicial_homology(&torus7(), Ring::Z);
        assert_eq!(h.group(0).free_rank, 1);
        assert_eq!(h.group(1).free_rank, 2);
        assert_eq!(h.group(2).free_rank, 1);
        assert!(h.group(1).torsion.is_empty());

        let h = simplicial_homology(&projective_plane6(), Ring::Z);
        assert_eq!(h.group(0).free_rank, 1);
        assert_eq!(h.group(1).free_rank, 0);
        assert_eq!(h.group(1).torsion, vec![BigInt::from(2)]);
        assert!(h.group(2).is_trivial());

        let h2 = simplicial_homology(&projective_plane6(), Ring::Z2);
        assert_eq!(h2.group(0).free_rank, 1);
        assert_eq!(h2.group(1).free_rank, 1);
        assert_eq!(h2.group(2).free_rank, 1);
    }

    #[test]
    fn chain_complex_agrees_with_reference() {
        for sc in [sphere2(), torus7(), projective_plane6()] {
            for ring in [Ring::Z, Ring::Z2] {
                let cx = sc.chain_complex(ring);
                assert!(cx.validate().pass);
                let h = homology(&cx).unwrap().reduced();
                assert_eq!(h, simplicial_homology(&sc, ring).reduced());
            }
        }
    }

    #[test]
    fn coreduction_on_the_sphere_leaves_two_critical_cells() {
        let sc = sphere2();
        let m = greedy_matching(&sc);
        assert!(validate_matching(&sc, &m).pass);
        assert_eq!(critical_cells(&sc, &m).len(), 2);
    }

    #[test]
    fn cyclic_matching_is_rejected() {
        let sc = SimplicialComplex::from_maximal(&[vec![0, 1], vec![1, 2], vec![0, 2]]);
        let e01 = sc.index_of(&[0, 1]).unwrap();
        let e02 = sc.index_of(&[0, 2]).unwrap();
        let e12 = sc.index_of(&[1, 2]).unwrap();
        let v0 = sc.index_of(&[0]).unwrap();
        let v1 = sc.index_of(&[1]).unwrap();
        let v2 = sc.index_of(&[2]).unwrap();
        let m = Matching { pairs: vec![(v1, e01), (v2, e12), (v0, e02)] };
        let report = validate_matching(&sc, &m);
        assert!(!report.pass);
        assert!(report.first().unwrap().contains("closed gradient path"));
    }

    #[test]
    fn morse_homology_matches_the_reference() {
        for sc in [sphere2(), torus7(), projective_plane6()] {
            for matching in [Matching::empty(), greedy_matching(&sc)] {
                let out = morse_flow_category(&sc, &matching).unwrap();
                let report = validate_flow_category(&out.category);
                assert!(report.pass, "{report}");
                for ring in [Ring::Z, Ring::Z2] {
                    let cx = chain_complex(&out.category, ring);
                    assert!(cx.validate().pass, "boundary squared nonzero");
                    let h = homology(&cx).unwrap().reduced();
                    assert_eq!(h, simplicial_homology(&sc, ring).reduced());
                }
            }
        }
    }

    #[test]
    fn continuation_between_equal_matchings_is_the_identity() {
        let sc = sphere2();
        let m = greedy_matching(&sc);
        let b = continuation_bimodule(&sc, &m, &m).unwrap();
        let report = validate_flow_simplex(b.simplex());
        assert!(report.pass, "{report}");
        let src = chain_complex(&b.source_category(), Ring::Z);
        let dst = chain_complex(&b.target_category(), Ring::Z);
        let f = bimodule_chain_map(&b, &src, &dst);
        for (k, m) in &f {
            assert_eq!(*m, Matrix::identity(src.dim(*k)), "degree {k} is not the identity");
        }
    }

    #[test]
    fn continuation_between_different_matchings_induces_an_isomorphism() {
        let sc = sphere2();
        let m0 = greedy_matching(&sc);
        let m1 = Matching::empty();
        let b = continuation_bimodule(&sc, &m0, &m1).unwrap();
        let report = validate_flow_simplex(b.simplex());
        assert!(report.pass, "{report}");
        let src = chain_complex(&b.source_category(), Ring::Z);
        let dst = chain_complex(&b.target_category(), Ring::Z);
        let f = bimodule_chain_map(&b, &src, &dst);
        assert!(validate_chain_map(&src, &dst, &f).pass);
        let hsrc = homology_data(&src).unwrap();
        let hdst = homology_data(&dst).unwrap();
        for k in 0i64..=2 {
            let fk = f[&k].clone();
            let ps = hsrc.presentation(k);
            let pd = hdst.presentation(k);
            let induced = induced_on_homology(&fk, &ps, &pd, Ring::Z).unwrap();
            assert!(
                presented_iso(&induced, &ps.relations, &pd.relations, Ring::Z),
                "degree {k} not an isomorphism"
            );
        }
    }
}
