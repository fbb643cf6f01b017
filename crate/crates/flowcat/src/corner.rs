//! Finite categories with corner structure.
//!
//! A corner category is a finite category with a codimension grading that
//! every non-identity arrow strictly increases. The central recognition
//! problem is whether each overcategory (slice over an object) is order
//! isomorphic to the power set of `{1, ..., codim}`; categories passing
//! this test behave like face structures of manifolds with corners. The
//! module also computes normal sets (one element per next-to-minimal
//! stratum over an object) and the way an arrow decomposes the normal set
//! of its target.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::CheckReport;

#[derive(Debug, Error)]
pub enum CornerError {
    #[error("unknown object id {0:?}")]
    UnknownObject(String),
    #[error("unknown arrow id {0:?}")]
    UnknownArrow(String),
    #[error("malformed category: {0}")]
    Malformed(String),
    #[error("not a corner model: {0}")]
    NotCornerModel(String),
}

/// Object of a [`CornerCategory`]: an opaque id plus its codimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerObject {
    pub id: String,
    pub codim: u32,
}

/// Arrow of a [`CornerCategory`]. Identities are stored explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerArrow {
    pub id: String,
    pub src: usize,
    pub tgt: usize,
}

/// Finite category with explicit arrow set and composition table, graded
/// by a codimension that non-identity arrows strictly increase.
///
/// Arrows run from shallow strata to deep ones: the source of an arrow has
/// codimension strictly smaller than its target unless the arrow is an
/// identity. Between two objects there may be several parallel arrows;
/// posets are the special case of at most one.
#[derive(Debug, Clone)]
pub struct CornerCategory {
    objs: Vec<CornerObject>,
    arrows: Vec<CornerArrow>,
    obj_index: BTreeMap<String, usize>,
    arrow_index: BTreeMap<String, usize>,
    /// Identity arrow index per object.
    identity: Vec<usize>,
    /// Arrow indices grouped by target object.
    into: Vec<Vec<usize>>,
    /// `(g, f) -> g∘f` for composable pairs, `src(g) = tgt(f)`.
    compose: BTreeMap<(usize, usize), usize>,
}

impl CornerCategory {
    /// Builds a category from objects `(id, codim)`, non-identity arrows
    /// `(id, src, tgt)`, and a composition table `(g, f, g∘f)` covering
    /// every composable pair of non-identity arrows. Identity arrows are
    /// added with ids `1@<object>` and identity laws are filled in.
    pub fn new(
        objects: Vec<(String, u32)>,
        arrows: Vec<(String, String, String)>,
        compose: Vec<(String, String, String)>,
    ) -> Result<Self, CornerError> {
        let mut objs = Vec::with_capacity(objects.len());
        let mut obj_index = BTreeMap::new();
        for (id, codim) in objects {
            if obj_index.insert(id.clone(), objs.len()).is_some() {
                return Err(CornerError::Malformed(format!("duplicate object id {id:?}")));
            }
            objs.push(CornerObject { id, codim });
        }

        let mut arr = Vec::new();
        let mut arrow_index = BTreeMap::new();
        let mut identity = Vec::with_capacity(objs.len());
        for (i, o) in objs.iter().enumerate() {
            let id = format!("1@{}", o.id);
            arrow_index.insert(id.clone(), arr.len());
            identity.push(arr.len());
            arr.push(CornerArrow { id, src: i, tgt: i });
        }
        for (id, src, tgt) in arrows {
            let s = *obj_index
                .get(&src)
                .ok_or_else(|| CornerError::UnknownObject(src.clone()))?;
            let t = *obj_index
                .get(&tgt)
                .ok_or_else(|| CornerError::UnknownObject(tgt.clone()))?;
            if s == t {
                return Err(CornerError::Malformed(format!(
                    "arrow {id:?} is an endomorphism; only identities may fix an object"
                )));
            }
            if objs[s].codim >= objs[t].codim {
                return Err(CornerError::Malformed(format!(
                    "arrow {id:?} does not strictly increase codim ({} -> {})",
                    objs[s].codim, objs[t].codim
                )));
            }
            if arrow_index.insert(id.clone(), arr.len()).is_some() {
                return Err(CornerError::Malformed(format!("duplicate arrow id {id:?}")));
            }
            arr.push(CornerArrow { id, src: s, tgt: t });
        }

        let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (g, f, gf) in compose {
            let gi = *arrow_index
                .get(&g)
                .ok_or_else(|| CornerError::UnknownArrow(g.clone()))?;
            let fi = *arrow_index
                .get(&f)
                .ok_or_else(|| CornerError::UnknownArrow(f.clone()))?;
            let ri = *arrow_index
                .get(&gf)
                .ok_or_else(|| CornerError::UnknownArrow(gf.clone()))?;
            if let Some(prev) = table.insert((gi, fi), ri) {
                if prev != ri {
                    return Err(CornerError::Malformed(format!(
                        "conflicting composites for ({g:?}, {f:?})"
                    )));
                }
            }
        }
        // Identity laws.
        for (i, a) in arr.iter().enumerate() {
            table.insert((i, identity[a.src]), i);
            table.insert((identity[a.tgt], i), i);
        }

        let mut into = vec![Vec::new(); objs.len()];
        for (i, a) in arr.iter().enumerate() {
            into[a.tgt].push(i);
        }

        let cat = CornerCategory {
            objs,
            arrows: arr,
            obj_index,
            arrow_index,
            identity,
            into,
            compose: table,
        };
        cat.check_structure()?;
        Ok(cat)
    }

    /// Builds the thin category generated by a strict containment-style
    /// relation: one arrow `src -> tgt` per pair in the reflexive-transitive
    /// closure of `covers`, with the evident composition.
    pub fn from_covers(
        objects: Vec<(String, u32)>,
        covers: Vec<(String, String)>,
    ) -> Result<Self, CornerError> {
        let n = objects.len();
        let index: BTreeMap<&str, usize> =
            objects.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
        let mut reach = vec![vec![false; n]; n];
        for (a, b) in &covers {
            let i = *index
                .get(a.as_str())
                .ok_or_else(|| CornerError::UnknownObject(a.clone()))?;
            let j = *index
                .get(b.as_str())
                .ok_or_else(|| CornerError::UnknownObject(b.clone()))?;
            reach[i][j] = true;
        }
        // Transitive closure.
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let name = |i: usize, j: usize| format!("{}>{}", objects[i].0, objects[j].0);
        let mut arrows = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if reach[i][j] {
                    if i == j {
                        return Err(CornerError::Malformed(format!(
                            "cover relation has a cycle through {:?}",
                            objects[i].0
                        )));
                    }
                    arrows.push((name(i, j), objects[i].0.clone(), objects[j].0.clone()));
                }
            }
        }
        let mut compose = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if reach[i][j] {
                    for k in 0..n {
                        if reach[j][k] {
                            compose.push((name(j, k), name(i, j), name(i, k)));
                        }
                    }
                }
            }
        }
        CornerCategory::new(objects, arrows, compose)
    }

    pub fn objects(&self) -> &[CornerObject] {
        &self.objs
    }

    pub fn arrows(&self) -> &[CornerArrow] {
        &self.arrows
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.obj_index.get(id).copied()
    }

    pub fn arrow_index(&self, id: &str) -> Option<usize> {
        self.arrow_index.get(id).copied()
    }

    pub fn codim(&self, obj: usize) -> u32 {
        self.objs[obj].codim
    }

    pub fn identity_arrow(&self, obj: usize) -> usize {
        self.identity[obj]
    }

    pub fn arrows_into(&self, obj: usize) -> &[usize] {
        &self.into[obj]
    }

    /// Composite `g∘f`, defined when `src(g) = tgt(f)`.
    pub fn composite(&self, g: usize, f: usize) -> Option<usize> {
        self.compose.get(&(g, f)).copied()
    }

    fn check_structure(&self) -> Result<(), CornerError> {
        let mut outof = vec![Vec::new(); self.objs.len()];
        for (i, a) in self.arrows.iter().enumerate() {
            outof[a.src].push(i);
        }
        // Table entries only on composable pairs.
        for (&(gi, fi), &ri) in &self.compose {
            if self.arrows[gi].src != self.arrows[fi].tgt {
                return Err(CornerError::Malformed(format!(
                    "composition entry ({:?}, {:?}) is not composable",
                    self.arrows[gi].id, self.arrows[fi].id
                )));
            }
            let r = &self.arrows[ri];
            if r.src != self.arrows[fi].src || r.tgt != self.arrows[gi].tgt {
                return Err(CornerError::Malformed(format!(
                    "composite of ({:?}, {:?}) has wrong endpoints",
                    self.arrows[gi].id, self.arrows[fi].id
                )));
            }
        }
        // Totality of composition.
        for (fi, f) in self.arrows.iter().enumerate() {
            for &gi in &outof[f.tgt] {
                if self.composite(gi, fi).is_none() {
                    return Err(CornerError::Malformed(format!(
                        "missing composite for ({:?}, {:?})",
                        self.arrows[gi].id, f.id
                    )));
                }
            }
        }
        // Associativity on all composable triples.
        for (fi, f) in self.arrows.iter().enumerate() {
            for &gi in &outof[f.tgt] {
                let gf = self.composite(gi, fi).unwrap();
                for &hi in &outof[self.arrows[gi].tgt] {
                    let hg = self.composite(hi, gi).unwrap();
                    if self.composite(hi, gf) != self.composite(hg, fi) {
                        return Err(CornerError::Malformed(format!(
                            "associativity fails on ({:?}, {:?}, {:?})",
                            self.arrows[hi].id, self.arrows[gi].id, f.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds the slice poset over `p` together with thinness checking.
    /// Elements are the arrows with target `p`; `a ≤ b` when `a` factors
    /// through `b`. Errors if some factorization witness is non-unique.
    fn slice_poset(&self, p: usize) -> Result<SlicePoset, String> {
        let elems = &self.into[p];
        let pos: BTreeMap<usize, usize> =
            elems.iter().enumerate().map(|(k, &a)| (a, k)).collect();
        let n = elems.len();
        let mut witness = vec![vec![0u32; n]; n];
        for (j, &bi) in elems.iter().enumerate() {
            let b = &self.arrows[bi];
            for &gi in &self.into[b.src] {
                let ai = self.composite(bi, gi).expect("checked total");
                let i = pos[&ai];
                witness[i][j] += 1;
            }
        }
        let mut leq = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if witness[i][j] > 1 {
                    return Err(format!(
                        "overcategory of {:?} is not thin: {} factorizations of {:?} through {:?}",
                        self.objs[p].id,
                        witness[i][j],
                        self.arrows[elems[i]].id,
                        self.arrows[elems[j]].id
                    ));
                }
                leq[i][j] = witness[i][j] == 1;
            }
        }
        Ok(SlicePoset {
            ids: elems.iter().map(|&a| self.arrows[a].id.clone()).collect(),
            src_codim: elems.iter().map(|&a| self.codim(self.arrows[a].src)).collect(),
            leq,
        })
    }
}

/// Poset of arrows into a fixed object, as used by the power set check.
/// `leq[i][j]` holds when element `i` factors through element `j`.
#[derive(Debug, Clone)]
pub struct SlicePoset {
    pub ids: Vec<String>,
    pub src_codim: Vec<u32>,
    pub leq: Vec<Vec<bool>>,
}

/// Witness that a slice poset is the Boolean lattice on its atoms.
#[derive(Debug, Clone)]
pub struct BooleanStructure {
    pub bottom: usize,
    pub top: usize,
    pub atoms: Vec<usize>,
    /// For each element, the bitmask over `atoms` of atoms below it.
    pub masks: Vec<u64>,
}

/// Checks that `sp` is order isomorphic to the power set of a set of size
/// `expected_codim`, via the atom map. The map sends each element to the
/// set of atoms below it; the check verifies this is a bijection onto the
/// full power set that preserves and reflects order, and that the rank of
/// each element equals the codimension of its source.
pub fn boolean_check(sp: &SlicePoset, expected_codim: u32) -> Result<BooleanStructure, String> {
    let n = sp.ids.len();
    if expected_codim >= 63 {
        return Err("codimension too large for the bitmask check".into());
    }
    let expected = 1usize << expected_codim;
    if n != expected {
        return Err(format!("expected {expected} elements, found {n}"));
    }
    let below = |i: usize, j: usize| sp.leq[i][j];

    let mut bottom = None;
    let mut top = None;
    for i in 0..n {
        if (0..n).all(|j| below(i, j)) {
            if bottom.replace(i).is_some() {
                return Err("two minimum elements".into());
            }
        }
        if (0..n).all(|j| below(j, i)) {
            if top.replace(i).is_some() {
                return Err("two maximum elements".into());
            }
        }
    }
    let bottom = bottom.ok_or("no minimum element")?;
    let top = top.ok_or("no maximum element")?;

    let mut atoms = Vec::new();
    for i in 0..n {
        if i == bottom {
            continue;
        }
        let covers_bottom = (0..n).all(|j| !below(j, i) || j == i || j == bottom);
        if covers_bottom {
            atoms.push(i);
        }
    }
    if atoms.len() as u32 != expected_codim {
        return Err(format!(
            "found {} atoms, expected {}",
            atoms.len(),
            expected_codim
        ));
    }

    let mut masks = vec![0u64; n];
    for i in 0..n {
        for (b, &a) in atoms.iter().enumerate() {
            if below(a, i) {
                masks[i] |= 1 << b;
            }
        }
    }
    let mut seen = vec![false; expected];
    for i in 0..n {
        let m = masks[i] as usize;
        if seen[m] {
            return Err(format!("atom map not injective at {:?}", sp.ids[i]));
        }
        seen[m] = true;
        let rank = masks[i].count_ones();
        if rank != sp.src_codim[i] {
            return Err(format!(
                "rank {} of {:?} disagrees with source codim {}",
                rank, sp.ids[i], sp.src_codim[i]
            ));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mask_le = masks[i] & !masks[j] == 0;
            if below(i, j) != mask_le {
                return Err(format!(
                    "order disagrees with atom sets at ({:?}, {:?})",
                    sp.ids[i], sp.ids[j]
                ));
            }
        }
    }
    Ok(BooleanStructure { bottom, top, atoms, masks })
}

/// Set of normal directions over an object: one element per next-to-minimal
/// stratum of its overcategory. Elements are arrow ids, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalSet {
    pub elements: Vec<String>,
}

/// How an arrow `α: p → q` splits the normal set of `q`: the part coming
/// from `p` (via composition with atoms over `p`) and the part normal to
/// the image stratum. `identification` sends every element of both parts
/// to the element of the normal set of `q` it is identified with; its
/// image is exactly that normal set, disjointly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrowDecomposition {
    pub source_normals: NormalSet,
    pub relative_normals: NormalSet,
    pub identification: BTreeMap<String, String>,
}

/// The overcategory (slice) of `p`: objects are arrows with target `p`,
/// arrows are factorizations, codimension is inherited from arrow sources.
pub fn overcategory(c: &CornerCategory, p: &str) -> Result<CornerCategory, CornerError> {
    let pi = c.object_index(p).ok_or_else(|| CornerError::UnknownObject(p.to_string()))?;
    let elems = c.arrows_into(pi).to_vec();
    let objects: Vec<(String, u32)> = elems
        .iter()
        .map(|&a| (c.arrows[a].id.clone(), c.codim(c.arrows[a].src)))
        .collect();
    // Slice arrow (γ: α → β) exists when β∘γ = α; it is named by the pair.
    let mut arrows = Vec::new();
    let mut names: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for &bi in &elems {
        let b = &c.arrows[bi];
        for (gi, g) in c.arrows.iter().enumerate() {
            if g.tgt != b.src || gi == c.identity[b.src] {
                continue;
            }
            let ai = c.composite(bi, gi).expect("total composition");
            let name = format!("{}|{}", g.id, b.id);
            names.insert((bi, gi), name.clone());
            arrows.push((name, c.arrows[ai].id.clone(), b.id.clone()));
        }
    }
    let mut compose = Vec::new();
    for (&(bi, gi), name_inner) in &names {
        // (γ: α→β); compose with (δ: β→ε) where names has (ei, di) and
        // composite(ei, di) = bi requires matching through the category.
        for (&(ei, di), name_outer) in &names {
            if c.composite(ei, di) != Some(bi) {
                continue;
            }
            let dg = c
                .composite(di, gi)
                .ok_or_else(|| CornerError::Malformed("slice composition gap".into()))?;
            let name_res = names
                .get(&(ei, dg))
                .ok_or_else(|| CornerError::Malformed("slice composite arrow missing".into()))?;
            compose.push((name_outer.clone(), name_inner.clone(), name_res.clone()));
        }
    }
    CornerCategory::new(objects, arrows, compose)
}

/// Checks the power set criterion at every object. The report's first
/// violation names the offending object and the reason.
pub fn is_corner_model(c: &CornerCategory) -> CheckReport {
    for (pi, o) in c.objs.iter().enumerate() {
        match c.slice_poset(pi) {
            Err(e) => return CheckReport::failing(format!("object {:?}: {e}", o.id)),
            Ok(sp) => {
                if let Err(e) = boolean_check(&sp, o.codim) {
                    return CheckReport::failing(format!("object {:?}: {e}", o.id));
                }
            }
        }
    }
    CheckReport::passing()
}

/// Normal set of `p`: the minimal non-initial objects of its overcategory.
pub fn q_set(c: &CornerCategory, p: &str) -> Result<NormalSet, CornerError> {
    let pi = c.object_index(p).ok_or_else(|| CornerError::UnknownObject(p.to_string()))?;
    let sp = c.slice_poset(pi).map_err(CornerError::NotCornerModel)?;
    let bs = boolean_check(&sp, c.codim(pi)).map_err(CornerError::NotCornerModel)?;
    let mut elements: Vec<String> = bs.atoms.iter().map(|&i| sp.ids[i].clone()).collect();
    elements.sort();
    Ok(NormalSet { elements })
}

/// Splits the normal set of the target of `arrow_id` into the image of the
/// source's normal set and the directions normal to the arrow.
pub fn decompose_arrow(c: &CornerCategory, arrow_id: &str) -> Result<ArrowDecomposition, CornerError> {
    let ai = c
        .arrow_index(arrow_id)
        .ok_or_else(|| CornerError::UnknownArrow(arrow_id.to_string()))?;
    let arrow = c.arrows[ai].clone();
    let (p, q) = (arrow.src, arrow.tgt);

    let sp_p = c.slice_poset(p).map_err(CornerError::NotCornerModel)?;
    let bs_p = boolean_check(&sp_p, c.codim(p)).map_err(CornerError::NotCornerModel)?;
    let sp_q = c.slice_poset(q).map_err(CornerError::NotCornerModel)?;
    let bs_q = boolean_check(&sp_q, c.codim(q)).map_err(CornerError::NotCornerModel)?;

    let q_elems = c.arrows_into(q);
    let pos_q: BTreeMap<usize, usize> =
        q_elems.iter().enumerate().map(|(k, &a)| (a, k)).collect();
    let self_pos = pos_q[&ai];

    let mut identification = BTreeMap::new();
    let mut source_elements = Vec::new();
    // Atoms over p compose with the arrow to atoms over q below it.
    for &x in &bs_p.atoms {
        let gamma = c.arrow_index(&sp_p.ids[x]).expect("slice ids are arrow ids");
        let comp = c
            .composite(ai, gamma)
            .ok_or_else(|| CornerError::Malformed("composition gap in decomposition".into()))?;
        let k = pos_q[&comp];
        if !bs_q.atoms.contains(&k) || !sp_q.leq[k][self_pos] {
            return Err(CornerError::NotCornerModel(format!(
                "composite of atom {:?} with {:?} is not an atom below the arrow",
                sp_p.ids[x], arrow.id
            )));
        }
        source_elements.push(sp_p.ids[x].clone());
        identification.insert(sp_p.ids[x].clone(), sp_q.ids[k].clone());
    }
    let mut relative_elements = Vec::new();
    for &a in &bs_q.atoms {
        if !sp_q.leq[a][self_pos] {
            relative_elements.push(sp_q.ids[a].clone());
            identification.insert(sp_q.ids[a].clone(), sp_q.ids[a].clone());
        }
    }
    // The two parts must cover the normal set of q disjointly.
    let mut image: Vec<&String> = identification.values().collect();
    image.sort();
    image.dedup();
    if image.len() != bs_q.atoms.len() || identification.len() != bs_q.atoms.len() {
        return Err(CornerError::NotCornerModel(format!(
            "decomposition of {:?} does not partition the target normal set",
            arrow.id
        )));
    }

    source_elements.sort();
    relative_elements.sort();
    Ok(ArrowDecomposition {
        source_normals: NormalSet { elements: source_elements },
        relative_normals: NormalSet { elements: relative_elements },
        identification,
    })
}

/// Face poset of the standard n-simplex as a corner category: objects are
/// nonempty vertex subsets named by their sorted vertex digits, a k-face
/// has codimension `n - k`, and there is one arrow per strict containment.
pub fn simplex_face_poset(n: usize) -> CornerCategory {
    assert!(n <= 9, "single-digit vertex names only");
    let mut objects = Vec::new();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1 << (n + 1)) {
        let verts: Vec<usize> = (0..=n).filter(|i| mask & (1 << i) != 0).collect();
        let id: String = verts.iter().map(|v| v.to_string()).collect();
        objects.push((id, (n + 1 - verts.len()) as u32));
        subsets.push(verts);
    }
    let mut covers = Vec::new();
    for (i, big) in subsets.iter().enumerate() {
        for (j, small) in subsets.iter().enumerate() {
            if small.len() + 1 == big.len() && small.iter().all(|v| big.contains(v)) {
                covers.push((objects[i].0.clone(), objects[j].0.clone()));
            }
        }
    }
    CornerCategory::from_covers(objects, covers).expect("face poset is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_overcategories_are_boolean() {
        for n in 1..=3 {
            let c = simplex_face_poset(n);
            let report = is_corner_model(&c);
            assert!(report.pass, "n = {n}: {report}");
        }
    }

    #[test]
    fn vertex_overcategory_of_triangle_has_four_objects() {
        let c = simplex_face_poset(2);
        let over = overcategory(&c, "0").unwrap();
        assert_eq!(over.objects().len(), 4);
        assert!(is_corner_model(&over).pass);
    }

    #[test]
    fn minimal_object_overcategory_is_trivial() {
        let c = simplex_face_poset(2);
        let over = overcategory(&c, "012").unwrap();
        assert_eq!(over.objects().len(), 1);
    }

    #[test]
    fn edge_of_tetrahedron_has_boolean_rank_two_overcategory() {
        let c = simplex_face_poset(3);
        let over = overcategory(&c, "01").unwrap();
        assert_eq!(over.objects().len(), 4);
        let q = q_set(&c, "01").unwrap();
        assert_eq!(q.elements.len(), 2);
    }

    #[test]
    fn three_covers_of_a_codim_two_object_fail() {
        let objects = vec![
            ("i".to_string(), 0),
            ("a".to_string(), 1),
            ("b".to_string(), 1),
            ("c".to_string(), 1),
            ("v".to_string(), 2),
        ];
        let covers = vec![
            ("i".to_string(), "a".to_string()),
            ("i".to_string(), "b".to_string()),
            ("i".to_string(), "c".to_string()),
            ("a".to_string(), "v".to_string()),
            ("b".to_string(), "v".to_string()),
            ("c".to_string(), "v".to_string()),
        ];
        let c = CornerCategory::from_covers(objects, covers).unwrap();
        let report = is_corner_model(&c);
        assert!(!report.pass);
        assert!(report.first().unwrap().contains('v'));
    }

    #[test]
    fn q_set_sizes_follow_codim() {
        let c = simplex_face_poset(3);
        assert_eq!(q_set(&c, "0123").unwrap().elements.len(), 0);
        assert_eq!(q_set(&c, "012").unwrap().elements.len(), 1);
        assert_eq!(q_set(&c, "0").unwrap().elements.len(), 3);
    }

    #[test]
    fn identity_decomposition_is_trivial_on_one_side() {
        let c = simplex_face_poset(2);
        let d = decompose_arrow(&c, "1@0").unwrap();
        assert_eq!(d.source_normals.elements.len(), 2);
        assert!(d.relative_normals.elements.is_empty());
    }

    #[test]
    fn edge_to_vertex_decomposition_splits_one_and_one() {
        let c = simplex_face_poset(2);
        let d = decompose_arrow(&c, "01>0").unwrap();
        assert_eq!(d.source_normals.elements.len(), 1);
        assert_eq!(d.relative_normals.elements.len(), 1);
        let q = q_set(&c, "0").unwrap();
        let mut image: Vec<String> = d.identification.values().cloned().collect();
        image.sort();
        assert_eq!(image, q.elements);
    }

    #[test]
    fn composite_decomposition_is_coherent() {
        let c = simplex_face_poset(3);
        // interior -> face -> edge
        let alpha = "0123>012";
        let beta = "012>01";
        let beta_alpha = "0123>01";
        let d_a = decompose_arrow(&c, alpha).unwrap();
        let d_b = decompose_arrow(&c, beta).unwrap();
        let d_ba = decompose_arrow(&c, beta_alpha).unwrap();
        // Source normals of the composite map through both identifications.
        for e in &d_ba.source_normals.elements {
            let via_a = &d_a.identification[e];
            let via_b = &d_b.identification[via_a];
            assert_eq!(via_b, &d_ba.identification[e]);
        }
        // Relative normals of the composite split as the two relative parts.
        let mut expected: Vec<String> = d_b.relative_normals.elements.clone();
        for e in &d_a.relative_normals.elements {
            expected.push(d_b.identification[e].clone());
        }
        expected.sort();
        let mut got: Vec<String> = d_ba
            .relative_normals
            .elements
            .iter()
            .map(|e| d_ba.identification[e].clone())
            .collect();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn verdict_survives_relabeling() {
        let relabel = |s: &str| format!("obj_{s}");
        let c = simplex_face_poset(2);
        let objects: Vec<(String, u32)> =
            c.objects().iter().map(|o| (relabel(&o.id), o.codim)).collect();
        let mut covers = Vec::new();
        for o in c.objects() {
            for p in c.objects() {
                if o.codim + 1 == p.codim && c.arrow_index(&format!("{}>{}", o.id, p.id)).is_some()
                {
                    covers.push((relabel(&o.id), relabel(&p.id)));
                }
            }
        }
        let r = CornerCategory::from_covers(objects, covers).unwrap();
        assert!(is_corner_model(&r).pass);
    }
}
