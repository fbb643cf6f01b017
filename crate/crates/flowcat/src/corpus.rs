//! Shared fixtures: simplicial complexes with known homology, the flow
//! categories and bimodules built from them, and the enumerated
//! arc-category corpus the checks run over.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arcs::{ArcCategory, GammaSpec, Ratio};
use crate::flow::{
    category_to_simplex, diagonal, map_cells, single_vertex_arc, Cells, FlowBimodule,
    FlowCategory, FlowObject, FlowSimplex, FormalComponent, VirtualDim,
};
use crate::morse::{
    continuation_bimodule, greedy_matching, morse_flow_category, Matching, MorseFlowOutput,
    SimplicialComplex,
};

// ---------------------------------------------------------------------------
// Simplicial complexes
// ---------------------------------------------------------------------------

/// A single vertex.
pub fn point_complex() -> SimplicialComplex {
    SimplicialComplex::from_maximal(&[vec![0]])
}

/// The boundary of the tetrahedron, a 2-sphere.
pub fn sphere2() -> SimplicialComplex {
    SimplicialComplex::from_maximal(&[
        vec![0, 1, 2],
        vec![0, 1, 3],
        vec![0, 2, 3],
        vec![1, 2, 3],
    ])
}

/// The solid tetrahedron, contractible.
pub fn solid_tetrahedron() -> SimplicialComplex {
    SimplicialComplex::from_maximal(&[vec![0, 1, 2, 3]])
}

/// The 7-vertex torus: triangles {i, i+1, i+3} and {i, i+2, i+3} mod 7,
/// a 2-neighborly triangulation with 7/21/14 cells.
pub fn torus7() -> SimplicialComplex {
    let mut tris = Vec::new();
    for i in 0..7usize {
        tris.push(vec![i, (i + 1) % 7, (i + 3) % 7]);
        tris.push(vec![i, (i + 2) % 7, (i + 3) % 7]);
    }
    SimplicialComplex::from_maximal(&tris)
}

/// The 6-vertex projective plane, 6/15/10 cells.
pub fn projective_plane6() -> SimplicialComplex {
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

/// An 8-vertex Klein bottle, 8/24/16 cells: obtained from a 4x3 grid
/// model of the bottle by link-preserving edge contractions. Every edge
/// lies in two triangles, every vertex link is a single cycle, the Euler
/// characteristic is 0, and the surface is nonorientable.
pub fn klein_bottle8() -> SimplicialComplex {
    SimplicialComplex::from_maximal(&[
        vec![0, 1, 4],
        vec![0, 1, 7],
        vec![0, 2, 3],
        vec![0, 2, 5],
        vec![0, 3, 4],
        vec![0, 5, 7],
        vec![1, 2, 3],
        vec![1, 2, 6],
        vec![1, 3, 5],
        vec![1, 4, 5],
        vec![1, 6, 7],
        vec![2, 5, 6],
        vec![3, 4, 7],
        vec![3, 5, 6],
        vec![3, 6, 7],
        vec![4, 5, 7],
    ])
}

/// A hexagonal circle: six vertices, six edges.
pub fn hexagon_circle() -> SimplicialComplex {
    SimplicialComplex::from_maximal(&[
        vec![0, 1],
        vec![1, 2],
        vec![2, 3],
        vec![3, 4],
        vec![4, 5],
        vec![0, 5],
    ])
}

/// The six complexes whose Morse homology is checked against the
/// simplicial oracle.
pub fn homology_corpus() -> Vec<(String, SimplicialComplex)> {
    vec![
        ("point".into(), point_complex()),
        ("sphere".into(), sphere2()),
        ("torus".into(), torus7()),
        ("projective-plane".into(), projective_plane6()),
        ("klein-bottle".into(), klein_bottle8()),
        ("solid-tetrahedron".into(), solid_tetrahedron()),
    ]
}

// ---------------------------------------------------------------------------
// Flow categories
// ---------------------------------------------------------------------------

/// Greedy-matching Morse flow categories of the homology corpus plus the
/// hexagonal circle.
pub fn morse_corpus() -> Vec<(String, MorseFlowOutput)> {
    let mut out = Vec::new();
    for (name, sc) in homology_corpus() {
        let m = greedy_matching(&sc);
        out.push((name, morse_flow_category(&sc, &m).expect("greedy matchings are acyclic")));
    }
    let hex = hexagon_circle();
    let m = greedy_matching(&hex);
    out.push((
        "circle".into(),
        morse_flow_category(&hex, &m).expect("greedy matchings are acyclic"),
    ));
    out
}

/// The flow categories of the corpus, by name.
pub fn flow_corpus() -> Vec<(String, FlowCategory)> {
    let mut out: Vec<(String, FlowCategory)> = morse_corpus()
        .into_iter()
        .map(|(name, o)| (name, o.category))
        .collect();
    out.push(("bare-circle".into(), circle_category()));
    out
}

fn object(id: &str, dim: i64) -> FlowObject {
    FlowObject {
        id: id.into(),
        v: VirtualDim { plus: dim.max(0) as u32, minus: 0 },
        dim,
    }
}

/// The circle as a minimal flow category: one object per cell of the
/// perfect Morse function, no morphism components (the differential is
/// zero), homology (Z, Z).
pub fn circle_category() -> FlowCategory {
    FlowCategory {
        gamma: GammaSpec::NonnegRational,
        objects: vec![object("min", 0), object("max", 1)],
        components: Cells::new(),
        integer_signs: true,
        defect: BTreeMap::new(),
    }
}

/// The one-object flow category of a point.
pub fn point_category() -> FlowCategory {
    FlowCategory {
        gamma: GammaSpec::NonnegRational,
        objects: vec![object("pt", 0)],
        components: Cells::new(),
        integer_signs: true,
        defect: BTreeMap::new(),
    }
}

/// A category failing validation: the composite of its two morphism
/// components is not cancelled by any interval component, so the
/// boundary does not square to zero.
pub fn broken_category() -> FlowCategory {
    let mut components = Cells::new();
    components.insert(
        (0, 1, Ratio::one()),
        vec![FormalComponent {
            id: "ab".into(),
            stratum: single_vertex_arc(0, 0, 0, 1, BTreeSet::new(), Ratio::one()),
            total_dim: 0,
            obstruction_rank: 0,
            count: BigInt::one(),
            facets: Some(Vec::new()),
        }],
    );
    components.insert(
        (1, 2, Ratio::one()),
        vec![FormalComponent {
            id: "bc".into(),
            stratum: single_vertex_arc(0, 1, 0, 2, BTreeSet::new(), Ratio::one()),
            total_dim: 0,
            obstruction_rank: 0,
            count: BigInt::one(),
            facets: Some(Vec::new()),
        }],
    );
    FlowCategory {
        gamma: GammaSpec::NonnegRational,
        objects: vec![object("a", 2), object("b", 1), object("c", 0)],
        components,
        integer_signs: true,
        defect: BTreeMap::new(),
    }
}

// ---------------------------------------------------------------------------
// Bimodules
// ---------------------------------------------------------------------------

fn edge_component(id: &str, p: usize, r: usize, count: i64) -> FormalComponent {
    FormalComponent {
        id: id.into(),
        stratum: single_vertex_arc(0, p, 1, r, BTreeSet::new(), Ratio::zero()),
        total_dim: 0,
        obstruction_rank: 0,
        count: BigInt::from(count),
        facets: Some(Vec::new()),
    }
}

/// A bimodule between two categories given by its virtual-dimension-zero
/// edge components `(source index, target index, count)`.
pub fn bimodule_from_counts(
    x: &FlowCategory,
    y: &FlowCategory,
    counts: &[(usize, usize, i64)],
) -> FlowBimodule {
    let sx = category_to_simplex(x);
    let sy = category_to_simplex(y);
    let mut payloads: BTreeMap<u32, Cells> = BTreeMap::new();
    if let Some(c) = sx.payload(0b1) {
        payloads.insert(0b01, c.clone());
    }
    if let Some(c) = sy.payload(0b1) {
        payloads.insert(0b10, map_cells(c, &|i| i + 1));
    }
    let mut edge = Cells::new();
    for (j, &(p, r, count)) in counts.iter().enumerate() {
        edge.entry((p, r, Ratio::zero()))
            .or_default()
            .push(edge_component(&format!("e{j}"), p, r, count));
    }
    if !edge.is_empty() {
        payloads.insert(0b11, edge);
    }
    FlowBimodule::new(FlowSimplex {
        gamma: x.gamma,
        vertices: vec![x.objects.clone(), y.objects.clone()],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: x.integer_signs && y.integer_signs,
    })
    .expect("two vertex sets")
}

/// The degree-two self-map of the circle: identity on the minimum,
/// multiplication by two on the maximum. Its cone has homology
/// (0, Z/2, 0).
pub fn times2_s1() -> FlowBimodule {
    let c = circle_category();
    bimodule_from_counts(&c, &c, &[(0, 0, 1), (1, 1, 2)])
}

/// The inclusion of a point as the minimum of the sphere's Morse
/// category.
pub fn point_into_sphere() -> FlowBimodule {
    let p = point_category();
    let m = greedy_matching(&sphere2());
    let s = morse_flow_category(&sphere2(), &m).expect("acyclic").category;
    let target = s
        .objects
        .iter()
        .position(|o| o.dim == 0)
        .expect("the sphere category has a minimum");
    bimodule_from_counts(&p, &s, &[(0, target, 1)])
}

/// The bimodule with no edge components at all.
pub fn zero_bimodule(x: &FlowCategory, y: &FlowCategory) -> FlowBimodule {
    bimodule_from_counts(x, y, &[])
}

/// Fixtures for the cone and long-exact-sequence checks.
pub fn cone_corpus() -> Vec<(String, FlowBimodule)> {
    let sphere_cat = {
        let m = greedy_matching(&sphere2());
        morse_flow_category(&sphere2(), &m).expect("acyclic").category
    };
    vec![
        ("times2-s1".into(), times2_s1()),
        ("point-into-sphere".into(), point_into_sphere()),
        ("diagonal-sphere".into(), diagonal(&sphere_cat)),
        ("diagonal-circle".into(), diagonal(&circle_category())),
        ("zero-point-to-circle".into(), zero_bimodule(&point_category(), &circle_category())),
        ("sphere-continuation".into(), {
            let sc = sphere2();
            continuation_bimodule(&sc, &greedy_matching(&sc), &Matching::empty())
                .expect("valid matchings")
        }),
    ]
}

/// A matching on the hexagon pairing each vertex after `start` with the
/// next edge around, leaving vertex `start` and the edge entering it
/// critical.
pub fn hexagon_matching(start: usize) -> Matching {
    let sc = hexagon_circle();
    let mut pairs = Vec::new();
    for step in 1..6usize {
        let v = (start + step) % 6;
        let w = (v + 1) % 6;
        let face = sc.index_of(&[v]).expect("vertex cell");
        let mut e = [v, w];
        e.sort_unstable();
        let coface = sc.index_of(&e).expect("edge cell");
        pairs.push((face, coface));
    }
    Matching { pairs }
}

/// Two composable continuation bimodules on the circle, between three
/// rotated perfect matchings.
pub fn circle_continuation_pair() -> (FlowBimodule, FlowBimodule) {
    let sc = hexagon_circle();
    let m0 = hexagon_matching(0);
    let m1 = hexagon_matching(2);
    let m2 = hexagon_matching(4);
    let b1 = continuation_bimodule(&sc, &m0, &m1).expect("valid matchings");
    let b2 = continuation_bimodule(&sc, &m1, &m2).expect("valid matchings");
    (b1, b2)
}

// ---------------------------------------------------------------------------
// Arc categories
// ---------------------------------------------------------------------------

/// Every arc category on one to four sets with set sizes from {1, 2, 3},
/// trivial grading, free endpoints.
pub fn arc_category_corpus() -> Vec<ArcCategory> {
    let mut out = Vec::new();
    for k in 1..=4usize {
        for sizes in (0..k).map(|_| [1usize, 2, 3]).multi_cartesian_product() {
            out.push(ArcCategory::trivial(sizes, None));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{validate_flow_category, validate_flow_simplex};
    use crate::homology::Ring;
    use crate::morse::{simplicial_homology, validate_matching};

    #[test]
    fn complex_cell_counts() {
        assert_eq!(point_complex().len(), 1);
        assert_eq!(sphere2().len(), 14);
        assert_eq!(solid_tetrahedron().len(), 15);
        assert_eq!(torus7().len(), 42);
        assert_eq!(projective_plane6().len(), 31);
        assert_eq!(klein_bottle8().len(), 48);
        assert_eq!(hexagon_circle().len(), 12);
    }

    #[test]
    fn klein_bottle_is_a_closed_surface() {
        let sc = klein_bottle8();
        let tris: Vec<&Vec<usize>> = sc.cells().iter().filter(|c| c.len() == 3).collect();
        assert_eq!(tris.len(), 16);
        for e in sc.cells().iter().filter(|c| c.len() == 2) {
            let hits = tris
                .iter()
                .filter(|t| e.iter().all(|v| t.contains(v)))
                .count();
            assert_eq!(hits, 2, "edge {e:?}");
        }
        let h = simplicial_homology(&sc, Ring::Z);
        assert_eq!(h.group(0).free_rank, 1);
        assert_eq!(h.group(1).free_rank, 1);
        assert_eq!(h.group(1).torsion, vec![BigInt::from(2)]);
        assert!(h.group(2).is_trivial());
    }

    #[test]
    fn corpus_flow_categories_validate() {
        for (name, f) in flow_corpus() {
            let r = validate_flow_category(&f);
            assert!(r.pass, "{name}: {r}");
        }
        assert!(!validate_flow_category(&broken_category()).pass);
    }

    #[test]
    fn cone_fixtures_validate() {
        for (name, b) in cone_corpus() {
            let r = validate_flow_simplex(b.simplex());
            assert!(r.pass, "{name}: {r}");
        }
    }

    #[test]
    fn hexagon_matchings_are_valid_and_distinct() {
        let sc = hexagon_circle();
        for start in [0usize, 2, 4] {
            let m = hexagon_matching(start);
            let r = validate_matching(&sc, &m);
            assert!(r.pass, "start {start}: {r}");
            assert_eq!(m.pairs.len(), 5);
        }
        assert_ne!(hexagon_matching(0), hexagon_matching(2));
        let (b1, b2) = circle_continuation_pair();
        assert_eq!(b1.target_category(), b2.source_category());
        assert!(validate_flow_simplex(b1.simplex()).pass);
        assert!(validate_flow_simplex(b2.simplex()).pass);
    }

    #[test]
    fn arc_corpus_size() {
        assert_eq!(arc_category_corpus().len(), 3 + 9 + 27 + 81);
        for c in arc_category_corpus() {
            assert!(c.validate().is_ok());
        }
    }
}
