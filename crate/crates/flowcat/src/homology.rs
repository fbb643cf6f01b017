//! Chain complexes over the integers and over the field with two
//! elements, with exact linear algebra throughout.
//!
//! The toolkit computes kernels, integral solutions, Smith normal form,
//! and homology presented as kernel generators modulo boundary relations.
//! Presentations keep enough data to push chain maps to induced maps on
//! homology and to compare subgroups by mutual membership, which is what
//! the exactness checks for a cone sequence need.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::flow::{
    cone, suspend, suspend_bimodule, Cells, FlowBimodule, FlowCategory,
};
use crate::report::CheckReport;

/// Coefficient ring for chain-level computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ring {
    Z,
    Z2,
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Z => write!(f, "Z"),
            Ring::Z2 => write!(f, "Z2"),
        }
    }
}

impl FromStr for Ring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z" | "int" | "integer" => Ok(Ring::Z),
            "z2" | "z/2" | "f2" | "gf2" | "mod2" => Ok(Ring::Z2),
            other => Err(format!("unknown coefficient ring {other:?}")),
        }
    }
}

/// Dense integer matrix in row-major order. Zero-sized shapes are legal.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<BigInt>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Matrix::zero(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, BigInt::from(*v));
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn from_columns(rows: usize, cols: &[Vec<BigInt>]) -> Self {
        let mut m = Matrix::zero(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in product");
        let mut out = Matrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, c: &BigInt) -> Matrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = &*a * c;
        }
        out
    }

    /// Horizontal concatenation [self | other].
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row mismatch in hstack");
        let mut out = Matrix::zero(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zero(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..self.cols {
                out.set(i, j, self.get(r, j).clone());
            }
        }
        out
    }

    /// Keeps the listed columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zero(self.rows, cols.len());
        for i in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.set(i, j, self.get(i, c).clone());
            }
        }
        out
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    fn reduce_mod2(&self) -> Matrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = v.mod_floor(&BigInt::from(2));
        }
        out
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}x{}]", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Column reduction over the integers by unimodular column operations:
/// `e = a * v` with `v` invertible over the integers and the columns of
/// `e` past the pivots identically zero.
struct ColReduced {
    e: Matrix,
    v: Matrix,
    /// (row, column) per pivot, in processing order; columns are 0, 1, ...
    pivots: Vec<(usize, usize)>,
}

fn column_reduce(a: &Matrix, ring: Ring) -> ColReduced {
    let two = BigInt::from(2);
    let mut e = a.clone();
    let mut v = Matrix::identity(a.cols);
    let mut next = 0usize;
    let mut pivots = Vec::new();
    for row in 0..a.rows {
        if next == e.cols {
            break;
        }
        loop {
            let mut best: Option<usize> = None;
            for c in next..e.cols {
                if e.get(row, c).is_zero() {
                    continue;
                }
                match best {
                    None => best = Some(c),
                    Some(b) => {
                        if e.get(row, c).abs() < e.get(row, b).abs() {
                            best = Some(c);
                        }
                    }
                }
            }
            let Some(p) = best else { break };
            let mut clean = true;
            for c in next..e.cols {
                if c == p || e.get(row, c).is_zero() {
                    continue;
                }
                let q = e.get(row, c).div_floor(e.get(row, p));
                if !q.is_zero() {
                    for i in 0..e.rows {
                        let mut val = e.get(i, c) - &q * e.get(i, p);
                        if ring == Ring::Z2 {
                            val = val.mod_floor(&two);
                        }
                        e.set(i, c, val);
                    }
                    for i in 0..v.rows {
                        let mut val = v.get(i, c) - &q * v.get(i, p);
                        if ring == Ring::Z2 {
                            val = val.mod_floor(&two);
                        }
                        v.set(i, c, val);
                    }
                }
                if !e.get(row, c).is_zero() {
                    clean = false;
                }
            }
            if clean {
                e.swap_cols(next, p);
                v.swap_cols(next, p);
                pivots.push((row, next));
                next += 1;
                break;
            }
        }
    }
    ColReduced { e, v, pivots }
}

/// Reusable solver for `a x = b` over a fixed ring.
pub struct LinearSystem {
    ring: Ring,
    rows: usize,
    reduced: ColReduced,
}

impl LinearSystem {
    pub fn new(a: &Matrix, ring: Ring) -> Self {
        let m = match ring {
            Ring::Z => a.clone(),
            Ring::Z2 => a.reduce_mod2(),
        };
        LinearSystem { ring, rows: a.rows, reduced: column_reduce(&m, ring) }
    }

    pub fn rank(&self) -> usize {
        self.reduced.pivots.len()
    }

    /// Basis of the solution lattice of `a x = 0`, one column per basis
    /// vector. Over the two-element field entries are zeros and ones.
    pub fn kernel_basis(&self) -> Matrix {
        let n = self.reduced.v.cols;
        let keep: Vec<usize> = (self.rank()..n).collect();
        let k = self.reduced.v.select_cols(&keep);
        match self.ring {
            Ring::Z => k,
            Ring::Z2 => k.reduce_mod2(),
        }
    }

    /// One solution of `a x = b`, if any.
    pub fn solve(&self, b: &[BigInt]) -> Option<Vec<BigInt>> {
        assert_eq!(b.len(), self.rows, "right-hand side length mismatch");
        let two = BigInt::from(2);
        let mut t: Vec<BigInt> = match self.ring {
            Ring::Z => b.to_vec(),
            Ring::Z2 => b.iter().map(|v| v.mod_floor(&two)).collect(),
        };
        let mut y = vec![BigInt::zero(); self.reduced.e.cols];
        for &(row, col) in &self.reduced.pivots {
            let piv = self.reduced.e.get(row, col);
            let coeff = match self.ring {
                Ring::Z => {
                    let (q, r) = t[row].div_mod_floor(piv);
                    if !r.is_zero() {
                        return None;
                    }
                    q
                }
                Ring::Z2 => t[row].mod_floor(&two),
            };
            if !coeff.is_zero() {
                for i in 0..self.rows {
                    let val = &t[i] - &coeff * self.reduced.e.get(i, col);
                    t[i] = match self.ring {
                        Ring::Z => val,
                        Ring::Z2 => val.mod_floor(&two),
                    };
                }
                y[col] = coeff;
            }
        }
        if t.iter().any(|v| !v.is_zero()) {
            return None;
        }
        let mut x = vec![BigInt::zero(); self.reduced.v.cols];
        for (col, coeff) in y.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            for i in 0..x.len() {
                x[i] += coeff * self.reduced.v.get(i, col);
            }
        }
        if self.ring == Ring::Z2 {
            for v in x.iter_mut() {
                *v = v.mod_floor(&two);
            }
        }
        Some(x)
    }

    /// Columnwise solve of `a x = b`; fails if any column has none.
    pub fn solve_columns(&self, b: &Matrix) -> Option<Matrix> {
        let mut cols = Vec::with_capacity(b.cols);
        for j in 0..b.cols {
            cols.push(self.solve(&b.column(j))?);
        }
        Some(Matrix::from_columns(self.reduced.v.cols, &cols))
    }
}

pub fn kernel_basis(a: &Matrix, ring: Ring) -> Matrix {
    LinearSystem::new(a, ring).kernel_basis()
}

pub fn rank(a: &Matrix, ring: Ring) -> usize {
    LinearSystem::new(a, ring).rank()
}

/// Nonzero invariant factors of an integer matrix, as a divisibility
/// chain of positive integers. Pivoting always picks a smallest nonzero
/// entry of the remaining block.
pub fn smith_invariant_factors(a: &Matrix) -> Vec<BigInt> {
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut t = 0usize;
    while t < rows.min(cols) {
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if m.get(i, j).is_zero() {
                    continue;
                }
                match best {
                    None => best = Some((i, j)),
                    Some((bi, bj)) => {
                        if m.get(i, j).abs() < m.get(bi, bj).abs() {
                            best = Some((i, j));
                        }
                    }
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        for k in 0..cols {
            let (x, y) = (m.get(t, k).clone(), m.get(bi, k).clone());
            m.set(t, k, y);
            m.set(bi, k, x);
        }
        m.swap_cols(t, bj);
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if m.get(i, t).is_zero() {
                    continue;
                }
                let q = m.get(i, t).div_floor(m.get(t, t));
                for k in 0..cols {
                    let val = m.get(i, k) - &q * m.get(t, k);
                    m.set(i, k, val);
                }
                if !m.get(i, t).is_zero() {
                    // Remainder is smaller than the pivot: promote it.
                    for k in 0..cols {
                        let (x, y) = (m.get(t, k).clone(), m.get(i, k).clone());
                        m.set(t, k, y);
                        m.set(i, k, x);
                    }
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                if m.get(t, j).is_zero() {
                    continue;
                }
                let q = m.get(t, j).div_floor(m.get(t, t));
                for k in 0..rows {
                    let val = m.get(k, j) - &q * m.get(k, t);
                    m.set(k, j, val);
                }
                if !m.get(t, j).is_zero() {
                    m.swap_cols(t, j);
                    dirty = true;
                }
            }
            if !dirty {
                break;
            }
        }
        t += 1;
    }
    let mut diag: Vec<BigInt> =
        (0..t).map(|i| m.get(i, i).abs()).filter(|v| !v.is_zero()).collect();
    // Normalize into a divisibility chain by the two-by-two lemma:
    // diag(a, b) is equivalent to diag(gcd(a, b), lcm(a, b)).
    loop {
        let mut changed = false;
        for i in 0..diag.len() {
            for j in i + 1..diag.len() {
                if (&diag[j] % &diag[i]).is_zero() {
                    continue;
                }
                let g = diag[i].gcd(&diag[j]);
                let l = &diag[i] / &g * &diag[j];
                diag[i] = g;
                diag[j] = l;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    diag
}

/// A chain complex with named basis elements per degree. The map stored
/// at degree `k` lowers degree by one; missing degrees are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainComplex {
    pub ring: Ring,
    pub basis: BTreeMap<i64, Vec<String>>,
    pub d: BTreeMap<i64, Matrix>,
}

impl ChainComplex {
    pub fn empty(ring: Ring) -> Self {
        ChainComplex { ring, basis: BTreeMap::new(), d: BTreeMap::new() }
    }

    pub fn dim(&self, k: i64) -> usize {
        self.basis.get(&k).map_or(0, |b| b.len())
    }

    pub fn differential(&self, k: i64) -> Matrix {
        self.d
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Matrix::zero(self.dim(k - 1), self.dim(k)))
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.basis.keys().copied().collect()
    }

    /// Shape consistency and the boundary-of-boundary vanishing.
    pub fn validate(&self) -> CheckReport {
        let mut report = CheckReport::passing();
        for (&k, m) in &self.d {
            if m.rows != self.dim(k - 1) || m.cols != self.dim(k) {
                report.push(format!(
                    "differential at degree {k}: shape {}x{} does not match ranks {}x{}",
                    m.rows,
                    m.cols,
                    self.dim(k - 1),
                    self.dim(k)
                ));
            }
        }
        if report.pass {
            for &k in self.basis.keys() {
                let sq = self.differential(k).mul(&self.differential(k + 1));
                let ok = match self.ring {
                    Ring::Z => sq.is_zero(),
                    Ring::Z2 => sq.reduce_mod2().is_zero(),
                };
                if !ok {
                    report.push(format!("boundary squared is nonzero out of degree {}", k + 1));
                }
            }
        }
        report
    }
}

/// One homology group, as a free rank plus torsion divisors in a
/// divisibility chain. Over the two-element field the rank is the vector
/// space dimension and the torsion list is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyGroup {
    pub free_rank: usize,
    pub torsion: Vec<BigInt>,
}

impl HomologyGroup {
    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for HomologyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for t in &self.torsion {
            parts.push(format!("Z/{t}"));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Homology in every degree of a complex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyResult {
    pub ring: Ring,
    pub groups: BTreeMap<i64, HomologyGroup>,
}

impl HomologyResult {
    pub fn group(&self, k: i64) -> HomologyGroup {
        self.groups
            .get(&k)
            .cloned()
            .unwrap_or(HomologyGroup { free_rank: 0, torsion: Vec::new() })
    }

    /// Drops trivial groups, for compact comparisons and printing.
    pub fn reduced(&self) -> HomologyResult {
        HomologyResult {
            ring: self.ring,
            groups: self
                .groups
                .iter()
                .filter(|(_, g)| !g.is_trivial())
                .map(|(k, g)| (*k, g.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for HomologyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.groups.is_empty() {
            return write!(f, "trivial");
        }
        let lines: Vec<String> =
            self.groups.iter().map(|(k, g)| format!("H_{k} = {g}")).collect();
        write!(f, "{}", lines.join("; "))
    }
}

/// Presentation of one homology group: cycle generators as columns in
/// chain coordinates, and boundary relations in cycle coordinates.
#[derive(Debug, Clone)]
pub struct DegreePresentation {
    pub cycles: Matrix,
    pub relations: Matrix,
}

impl DegreePresentation {
    pub fn generators(&self) -> usize {
        self.cycles.cols
    }

    pub fn group(&self, ring: Ring) -> HomologyGroup {
        let z = self.generators();
        match ring {
            Ring::Z => {
                let factors = smith_invariant_factors(&self.relations);
                let torsion: Vec<BigInt> =
                    factors.iter().filter(|v| **v > BigInt::one()).cloned().collect();
                HomologyGroup { free_rank: z - factors.len(), torsion }
            }
            Ring::Z2 => {
                let r = rank(&self.relations, Ring::Z2);
                HomologyGroup { free_rank: z - r, torsion: Vec::new() }
            }
        }
    }
}

/// Homology presentations for every degree of a complex.
#[derive(Debug, Clone)]
pub struct HomologyData {
    pub ring: Ring,
    pub degrees: BTreeMap<i64, DegreePresentation>,
}

impl HomologyData {
    pub fn presentation(&self, k: i64) -> DegreePresentation {
        self.degrees.get(&k).cloned().unwrap_or(DegreePresentation {
            cycles: Matrix::zero(0, 0),
            relations: Matrix::zero(0, 0),
        })
    }

    pub fn result(&self) -> HomologyResult {
        HomologyResult {
            ring: self.ring,
            groups: self
                .degrees
                .iter()
                .map(|(k, p)| (*k, p.group(self.ring)))
                .collect(),
        }
    }
}

/// Presents homology in every populated degree. Fails if some boundary
/// is not a cycle, so validate the complex first for a better message.
pub fn homology_data(cx: &ChainComplex) -> Result<HomologyData, String> {
    let mut degrees = BTreeMap::new();
    for &k in cx.basis.keys() {
        let cycles = kernel_basis(&cx.differential(k), cx.ring);
        let sys = LinearSystem::new(&cycles, cx.ring);
        let relations = sys
            .solve_columns(&cx.differential(k + 1))
            .ok_or_else(|| format!("a boundary in degree {k} is not a cycle"))?;
        degrees.insert(k, DegreePresentation { cycles, relations });
    }
    Ok(HomologyData { ring: cx.ring, degrees })
}

pub fn homology(cx: &ChainComplex) -> Result<HomologyResult, String> {
    Ok(homology_data(cx)?.result())
}

/// Chain complex of a flow category: basis elements are the objects
/// graded by dimension, and the boundary entry at (target, source) sums
/// the counts of virtual-dimension-zero components over all energies.
pub fn chain_complex(f: &FlowCategory, ring: Ring) -> ChainComplex {
    let (basis, position) = graded_positions(f);
    let mut d: BTreeMap<i64, Matrix> = BTreeMap::new();
    for (&k, b) in &basis {
        let below = basis.get(&(k - 1)).map_or(0, |v| v.len());
        d.insert(k, Matrix::zero(below, b.len()));
    }
    for ((p, q, _lam), comps) in &f.components {
        let (deg_p, col) = position[*p];
        let (deg_q, row) = position[*q];
        if deg_p != deg_q + 1 {
            continue;
        }
        let total: BigInt = comps
            .iter()
            .filter(|c| c.virtual_dim() == 0)
            .map(|c| c.count.clone())
            .sum();
        if total.is_zero() {
            continue;
        }
        let m = d.get_mut(&deg_p).unwrap();
        let v = m.get(row, col) + total;
        m.set(row, col, v);
    }
    let labels = basis
        .into_iter()
        .map(|(k, idxs)| (k, idxs.into_iter().map(|i| f.objects[i].id.clone()).collect()))
        .collect();
    ChainComplex { ring, basis: labels, d }
}

/// Object indices grouped by dimension, plus each object's (degree,
/// position) in that grouping.
pub(crate) fn graded_positions(f: &FlowCategory) -> (BTreeMap<i64, Vec<usize>>, Vec<(i64, usize)>) {
    let mut basis: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, o) in f.objects.iter().enumerate() {
        basis.entry(o.dim).or_default().push(i);
    }
    let mut position = vec![(0i64, 0usize); f.objects.len()];
    for (&k, idxs) in &basis {
        for (pos, &i) in idxs.iter().enumerate() {
            position[i] = (k, pos);
        }
    }
    (basis, position)
}

/// A degreewise map of chain complexes.
pub type GradedMap = BTreeMap<i64, Matrix>;

/// Chain map read off a block of cells between two categories: the entry at
/// (target object, source object) sums counts of virtual-dimension-zero
/// components whose endpoint dimensions agree.
pub fn cells_chain_map(
    cells: &Cells,
    source: &FlowCategory,
    target: &FlowCategory,
    src: &ChainComplex,
    dst: &ChainComplex,
) -> GradedMap {
    let (_, src_pos) = graded_positions(source);
    let (_, dst_pos) = graded_positions(target);
    let mut maps: GradedMap = BTreeMap::new();
    for &k in src.basis.keys().chain(dst.basis.keys()) {
        maps.entry(k).or_insert_with(|| Matrix::zero(dst.dim(k), src.dim(k)));
    }
    for ((p, q, _lam), comps) in cells {
        let (deg_p, col) = src_pos[*p];
        let (deg_q, row) = dst_pos[*q];
        if deg_p != deg_q {
            continue;
        }
        let total: BigInt = comps
            .iter()
            .filter(|c| c.virtual_dim() == 0)
            .map(|c| c.count.clone())
            .sum();
        if total.is_zero() {
            continue;
        }
        let m = maps.get_mut(&deg_p).unwrap();
        let v = m.get(row, col) + total;
        m.set(row, col, v);
    }
    maps
}

/// Chain map induced by a bimodule, read from its edge cells.
pub fn bimodule_chain_map(
    b: &FlowBimodule,
    src: &ChainComplex,
    dst: &ChainComplex,
) -> GradedMap {
    let source = b.source_category();
    let target = b.target_category();
    cells_chain_map(b.edge_cells(), &source, &target, src, dst)
}

/// Degreewise composition `g . f`.
pub fn compose_graded(f: &GradedMap, g: &GradedMap, src: &ChainComplex) -> GradedMap {
    let mut out = GradedMap::new();
    for &k in src.basis.keys() {
        let fk = f.get(&k);
        let gk = g.get(&k);
        match (fk, gk) {
            (Some(fm), Some(gm)) => {
                out.insert(k, gm.mul(fm));
            }
            _ => {
                let rows = gk.map_or(0, |m| m.rows);
                out.insert(k, Matrix::zero(rows, src.dim(k)));
            }
        }
    }
    out
}

/// Checks shapes and commutation with the boundary maps.
pub fn validate_chain_map(
    src: &ChainComplex,
    dst: &ChainComplex,
    f: &GradedMap,
) -> CheckReport {
    let mut report = CheckReport::passing();
    let mut degrees: Vec<i64> = src.degrees();
    degrees.extend(dst.degrees());
    degrees.sort_unstable();
    degrees.dedup();
    for &k in &degrees {
        let fk = f
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Matrix::zero(dst.dim(k), src.dim(k)));
        if fk.rows != dst.dim(k) || fk.cols != src.dim(k) {
            report.push(format!(
                "map at degree {k}: shape {}x{} does not match ranks {}x{}",
                fk.rows,
                fk.cols,
                dst.dim(k),
                src.dim(k)
            ));
            continue;
        }
        let f_low = f
            .get(&(k - 1))
            .cloned()
            .unwrap_or_else(|| Matrix::zero(dst.dim(k - 1), src.dim(k - 1)));
        let lhs = dst.differential(k).mul(&fk);
        let rhs = f_low.mul(&src.differential(k));
        let ok = match src.ring {
            Ring::Z => lhs == rhs,
            Ring::Z2 => lhs.sub(&rhs).reduce_mod2().is_zero(),
        };
        if !ok {
            report.push(format!("map does not commute with the boundary at degree {k}"));
        }
    }
    report
}

/// The induced matrix on homology generators: solves target cycles
/// against the image of the source cycles. `None` when the map does not
/// carry cycles to cycles.
pub fn induced_on_homology(
    f_k: &Matrix,
    src: &DegreePresentation,
    dst: &DegreePresentation,
    ring: Ring,
) -> Option<Matrix> {
    let sys = LinearSystem::new(&dst.cycles, ring);
    sys.solve_columns(&f_k.mul(&src.cycles))
}

/// Membership of a vector in the span of the columns of `gens`.
pub fn in_span(v: &[BigInt], gens: &Matrix, ring: Ring) -> bool {
    LinearSystem::new(gens, ring).solve(v).is_some()
}

/// Mutual membership of two generating sets modulo shared relations:
/// equality of the subgroups they generate in the presented group.
pub fn same_subgroup(a: &Matrix, b: &Matrix, relations: &Matrix, ring: Ring) -> bool {
    let with_b = b.hstack(relations);
    let sys_b = LinearSystem::new(&with_b, ring);
    for j in 0..a.cols {
        if sys_b.solve(&a.column(j)).is_none() {
            return false;
        }
    }
    let with_a = a.hstack(relations);
    let sys_a = LinearSystem::new(&with_a, ring);
    for j in 0..b.cols {
        if sys_a.solve(&b.column(j)).is_none() {
            return false;
        }
    }
    true
}

/// Generators of the kernel of a map between presented groups: vectors
/// `x` with `map x` in the span of the target relations.
pub fn presented_kernel_generators(map: &Matrix, target_relations: &Matrix, ring: Ring) -> Matrix {
    let stacked = map.hstack(target_relations);
    let kernel = kernel_basis(&stacked, ring);
    let top: Vec<usize> = (0..map.cols).collect();
    kernel.select_rows(&top)
}

/// Whether a matrix in generator coordinates defines an isomorphism
/// between presented groups: every target generator is reachable modulo
/// relations, and the kernel lies in the source relations.
pub fn presented_iso(
    map: &Matrix,
    src_relations: &Matrix,
    dst_relations: &Matrix,
    ring: Ring,
) -> bool {
    let span = map.hstack(dst_relations);
    let sys = LinearSystem::new(&span, ring);
    for j in 0..map.rows {
        let mut e = vec![BigInt::zero(); map.rows];
        e[j] = BigInt::one();
        if sys.solve(&e).is_none() {
            return false;
        }
    }
    let kernel = presented_kernel_generators(map, dst_relations, ring);
    let rel_sys = LinearSystem::new(src_relations, ring);
    for j in 0..kernel.cols {
        if rel_sys.solve(&kernel.column(j)).is_none() {
            return false;
        }
    }
    true
}

/// Exactness of `im(f) = ker(g)` inside the presented group with the
/// given relations, where `f` lands in it and `g` leaves it.
fn exact_at(
    f_star: &Matrix,
    g_star: &Matrix,
    relations_here: &Matrix,
    relations_next: &Matrix,
    ring: Ring,
    label: &str,
    report: &mut CheckReport,
) {
    let image = f_star.clone();
    let kernel = presented_kernel_generators(g_star, relations_next, ring);
    // Composite vanishes: every image generator maps into the relations.
    let next_sys = LinearSystem::new(relations_next, ring);
    for j in 0..image.cols {
        let pushed = g_star.mul(&image.select_cols(&[j]));
        if next_sys.solve(&pushed.column(0)).is_none() {
            report.push(format!("{label}: image generator {j} is not in the kernel"));
            return;
        }
    }
    if !same_subgroup(&image, &kernel, relations_here, ring) {
        report.push(format!("{label}: image and kernel generate different subgroups"));
    }
}

/// Everything the cone sequence check produces: the complexes, chain
/// maps, homology, and the exactness report.
pub struct ConeSequence {
    pub cone_complex: ChainComplex,
    pub homology_source: HomologyResult,
    pub homology_target: HomologyResult,
    pub homology_cone: HomologyResult,
    pub report: CheckReport,
}

/// Builds the cone of a bimodule and checks the induced sequence on
/// homology: exact at the target, at the cone, and at the suspended
/// source, in every degree.
pub fn les_check(b: &FlowBimodule, ring: Ring) -> Result<ConeSequence, String> {
    let parts = cone(b)?;
    let x = b.source_category();
    let y = b.target_category();
    let sx = suspend(&x, 1);
    let sy = suspend(&y, 1);
    let sb = suspend_bimodule(b, 1);

    let cx = chain_complex(&x, ring);
    let cy = chain_complex(&y, ring);
    let cc = chain_complex(&parts.category, ring);
    let csx = chain_complex(&sx, ring);
    let csy = chain_complex(&sy, ring);

    let mut report = CheckReport::passing();
    for (name, c) in
        [("source", &cx), ("target", &cy), ("cone", &cc), ("suspended source", &csx)]
    {
        let r = c.validate();
        if !r.pass {
            report.push(format!("{name} complex: {}", r.first().unwrap_or("invalid")));
        }
    }
    if !report.pass {
        return Ok(ConeSequence {
            cone_complex: cc.clone(),
            homology_source: HomologyResult { ring, groups: BTreeMap::new() },
            homology_target: HomologyResult { ring, groups: BTreeMap::new() },
            homology_cone: HomologyResult { ring, groups: BTreeMap::new() },
            report,
        });
    }

    let f = bimodule_chain_map(b, &cx, &cy);
    let i = bimodule_chain_map(&parts.inclusion, &cy, &cc);
    let p = bimodule_chain_map(&parts.projection, &cc, &csx);
    let sf = bimodule_chain_map(&sb, &csx, &csy);
    for (name, src, dst, m) in [
        ("bimodule", &cx, &cy, &f),
        ("inclusion", &cy, &cc, &i),
        ("projection", &cc, &csx, &p),
        ("suspended bimodule", &csx, &csy, &sf),
    ] {
        let r = validate_chain_map(src, dst, m);
        if !r.pass {
            report.push(format!("{name} chain map: {}", r.first().unwrap_or("invalid")));
        }
    }

    let hx = homology_data(&cx)?;
    let hy = homology_data(&cy)?;
    let hc = homology_data(&cc)?;
    let hsx = homology_data(&csx)?;
    let hsy = homology_data(&csy)?;

    if report.pass {
        let mut degrees: Vec<i64> = Vec::new();
        for c in [&cx, &cy, &cc, &csx, &csy] {
            degrees.extend(c.degrees());
        }
        degrees.sort_unstable();
        degrees.dedup();
        for &k in &degrees {
            let zero = |rows: usize, cols: usize| Matrix::zero(rows, cols);
            let px = hx.presentation(k);
            let py = hy.presentation(k);
            let pc = hc.presentation(k);
            let psx = hsx.presentation(k);
            let psy = hsy.presentation(k);
            let fk = f.get(&k).cloned().unwrap_or_else(|| zero(cy.dim(k), cx.dim(k)));
            let ik = i.get(&k).cloned().unwrap_or_else(|| zero(cc.dim(k), cy.dim(k)));
            let pk = p.get(&k).cloned().unwrap_or_else(|| zero(csx.dim(k), cc.dim(k)));
            let sfk = sf.get(&k).cloned().unwrap_or_else(|| zero(csy.dim(k), csx.dim(k)));
            let (Some(fs), Some(is_), Some(ps), Some(sfs)) = (
                induced_on_homology(&fk, &px, &py, ring),
                induced_on_homology(&ik, &py, &pc, ring),
                induced_on_homology(&pk, &pc, &psx, ring),
                induced_on_homology(&sfk, &psx, &psy, ring),
            ) else {
                report.push(format!("degree {k}: a chain map does not preserve cycles"));
                continue;
            };
            exact_at(
                &fs,
                &is_,
                &py.relations,
                &pc.relations,
                ring,
                &format!("degree {k}, target"),
                &mut report,
            );
            exact_at(
                &is_,
                &ps,
                &pc.relations,
                &psx.relations,
                ring,
                &format!("degree {k}, cone"),
                &mut report,
            );
            exact_at(
                &ps,
                &sfs,
                &psx.relations,
                &psy.relations,
                ring,
                &format!("degree {k}, suspended source"),
                &mut report,
            );
        }
    }

    Ok(ConeSequence {
        cone_complex: cc,
        homology_source: hx.result().reduced(),
        homology_target: hy.result().reduced(),
        homology_cone: hc.result().reduced(),
        report,
    })
}

/// The mapping cone of a degreewise map as a complex: degree `k` is the
/// source at `k - 1` beside the target at `k`, with boundary blocks
/// negated source boundary, zero, the map, and the target boundary.
pub fn algebraic_mapping_cone(
    src: &ChainComplex,
    dst: &ChainComplex,
    f: &GradedMap,
) -> ChainComplex {
    let mut degrees: Vec<i64> = src.degrees().iter().map(|k| k + 1).collect();
    degrees.extend(dst.degrees());
    degrees.sort_unstable();
    degrees.dedup();
    let mut basis: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for &k in &degrees {
        let mut labels: Vec<String> = src
            .basis
            .get(&(k - 1))
            .map(|v| v.iter().map(|s| format!("x:{s}")).collect())
            .unwrap_or_default();
        labels.extend(
            dst.basis
                .get(&k)
                .map(|v| v.iter().map(|s| format!("y:{s}")).collect::<Vec<_>>())
                .unwrap_or_default(),
        );
        basis.insert(k, labels);
    }
    let mut d: BTreeMap<i64, Matrix> = BTreeMap::new();
    for &k in &degrees {
        let (sx, sy) = (src.dim(k - 1), dst.dim(k));
        let (tx, ty) = (src.dim(k - 2), dst.dim(k - 1));
        let mut m = Matrix::zero(tx + ty, sx + sy);
        let dx = src.differential(k - 1);
        for i in 0..tx {
            for j in 0..sx {
                m.set(i, j, -dx.get(i, j));
            }
        }
        let fk = f
            .get(&(k - 1))
            .cloned()
            .unwrap_or_else(|| Matrix::zero(ty, sx));
        for i in 0..ty {
            for j in 0..sx {
                m.set(tx + i, j, fk.get(i, j).clone());
            }
        }
        let dy = dst.differential(k);
        for i in 0..ty {
            for j in 0..sy {
                m.set(tx + i, sx + j, dy.get(i, j).clone());
            }
        }
        d.insert(k, m);
    }
    ChainComplex { ring: src.ring, basis, d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arcs::GammaSpec;
    use crate::flow::{diagonal, FlowObject, VirtualDim};

    fn bigvec(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn smith_form_of_small_matrices() {
        let a = Matrix::from_rows(&[vec![2, 4], vec![6, 8]]);
        assert_eq!(smith_invariant_factors(&a), bigvec(&[2, 4]));
        let b = Matrix::from_rows(&[vec![1, 0], vec![0, 0]]);
        assert_eq!(smith_invariant_factors(&b), bigvec(&[1]));
        let c = Matrix::zero(3, 2);
        assert!(smith_invariant_factors(&c).is_empty());
        let d = Matrix::from_rows(&[vec![2, 0], vec![0, 3]]);
        assert_eq!(smith_invariant_factors(&d), bigvec(&[1, 6]));
    }

    #[test]
    fn kernel_and_solve_over_the_integers() {
        let a = Matrix::from_rows(&[vec![1, 2, 3]]);
        let k = kernel_basis(&a, Ring::Z);
        assert_eq!(k.cols, 2);
        assert!(a.mul(&k).is_zero());
        // The kernel lattice is saturated: (2, -1, 0) and (3, 0, -1) lie
        // in the span.
        for v in [[2i64, -1, 0], [3, 0, -1]] {
            let target = bigvec(&v);
            assert!(in_span(&target, &k, Ring::Z));
        }
        let sys = LinearSystem::new(&Matrix::from_rows(&[vec![2]]), Ring::Z);
        assert_eq!(sys.solve(&bigvec(&[3])), None);
        assert_eq!(sys.solve(&bigvec(&[4])), Some(bigvec(&[2])));
    }

    #[test]
    fn solve_respects_the_ring() {
        let a = Matrix::from_rows(&[vec![2]]);
        assert!(LinearSystem::new(&a, Ring::Z2).solve(&bigvec(&[1])).is_none());
        let b = Matrix::from_rows(&[vec![3]]);
        let sol = LinearSystem::new(&b, Ring::Z2).solve(&bigvec(&[1])).unwrap();
        assert_eq!(sol, bigvec(&[1]));
        assert_eq!(rank(&Matrix::from_rows(&[vec![2, 4], vec![6, 8]]), Ring::Z2), 0);
        assert_eq!(rank(&Matrix::from_rows(&[vec![2, 4], vec![6, 8]]), Ring::Z), 2);
    }

    fn doubling_complex(ring: Ring) -> ChainComplex {
        let mut basis = BTreeMap::new();
        basis.insert(0, vec!["v".to_string()]);
        basis.insert(1, vec!["e".to_string()]);
        let mut d = BTreeMap::new();
        d.insert(1, Matrix::from_rows(&[vec![2]]));
        ChainComplex { ring, basis, d }
    }

    #[test]
    fn torsion_appears_over_the_integers_only() {
        let cx = doubling_complex(Ring::Z);
        assert!(cx.validate().pass);
        let h = homology(&cx).unwrap();
        assert_eq!(h.group(0), HomologyGroup { free_rank: 0, torsion: bigvec(&[2]) });
        assert!(h.group(1).is_trivial());
        let cx2 = doubling_complex(Ring::Z2);
        let h2 = homology(&cx2).unwrap();
        assert_eq!(h2.group(0).free_rank, 1);
        assert_eq!(h2.group(1).free_rank, 1);
    }

    #[test]
    fn boundary_squared_failure_is_reported() {
        let mut basis = BTreeMap::new();
        basis.insert(0, vec!["a".to_string()]);
        basis.insert(1, vec!["b".to_string()]);
        basis.insert(2, vec!["c".to_string()]);
        let mut d = BTreeMap::new();
        d.insert(1, Matrix::from_rows(&[vec![1]]));
        d.insert(2, Matrix::from_rows(&[vec![1]]));
        let cx = ChainComplex { ring: Ring::Z, basis, d };
        assert!(!cx.validate().pass);
    }

    #[test]
    fn circle_like_complex_from_a_category() {
        // One object in each of two neighboring dimensions, no components:
        // two independent homology classes.
        let mut f = FlowCategory::empty(GammaSpec::NonnegRational);
        f.objects.push(FlowObject {
            id: "e".into(),
            v: VirtualDim { plus: 1, minus: 0 },
            dim: 1,
        });
        f.objects.push(FlowObject {
            id: "v".into(),
            v: VirtualDim { plus: 0, minus: 0 },
            dim: 0,
        });
        let cx = chain_complex(&f, Ring::Z);
        assert!(cx.validate().pass);
        let h = homology(&cx).unwrap();
        assert_eq!(h.group(0).free_rank, 1);
        assert_eq!(h.group(1).free_rank, 1);
    }

    #[test]
    fn subgroup_comparison_handles_relations() {
        // In Z/4 x Z, the subgroups generated by (2, 0) and (2, 0) + 4 Z e1
        // agree; (1, 0) generates a strictly larger one.
        let relations = Matrix::from_rows(&[vec![4], vec![0]]);
        let a = Matrix::from_rows(&[vec![2], vec![0]]);
        let b = Matrix::from_rows(&[vec![6], vec![0]]);
        assert!(same_subgroup(&a, &b, &relations, Ring::Z));
        let c = Matrix::from_rows(&[vec![1], vec![0]]);
        assert!(!same_subgroup(&a, &c, &relations, Ring::Z));
    }

    #[test]
    fn cone_sequence_of_a_diagonal_is_exact_with_trivial_cone() {
        let mut f = FlowCategory::empty(GammaSpec::NonnegRational);
        f.objects.push(FlowObject {
            id: "p".into(),
            v: VirtualDim { plus: 0, minus: 0 },
            dim: 0,
        });
        let b = diagonal(&f);
        for ring in [Ring::Z, Ring::Z2] {
            let seq = les_check(&b, ring).unwrap();
            assert!(seq.report.pass, "{}", seq.report);
            assert!(seq.homology_cone.groups.is_empty(), "{}", seq.homology_cone);
        }
    }

    #[test]
    fn algebraic_cone_of_the_zero_map_splits() {
        let src = doubling_complex(Ring::Z);
        let dst = doubling_complex(Ring::Z);
        let mut f = GradedMap::new();
        f.insert(0, Matrix::zero(1, 1));
        f.insert(1, Matrix::zero(1, 1));
        let cone = algebraic_mapping_cone(&src, &dst, &f);
        assert!(cone.validate().pass);
        let h = homology(&cone).unwrap();
        // Shifted source torsion plus target torsion.
        assert_eq!(h.group(0).torsion, bigvec(&[2]));
        assert_eq!(h.group(1).torsion, bigvec(&[2]));
    }
}
