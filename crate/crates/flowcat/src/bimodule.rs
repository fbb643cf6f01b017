//! Composition of flow bimodules and two-simplex homotopies.
//!
//! Composing two bimodules takes formal products of components over the
//! shared middle category and glues product cells along their middle
//! breakings: a break of the left factor at the middle category matches a
//! break of the right factor at the same configuration, and the matched
//! pairs are interior walls of one larger component. The outer walls
//! survive as the composite's facets, so the composite validates whenever
//! the inputs do, and its edge counts are the matrix product of the input
//! chain maps by construction.
//!
//! A 2-simplex stores a homotopy between the long edge and the composite
//! of the two short edges in its top payload: the full-stratum components
//! of virtual dimension zero are the homotopy's matrix entries. The cone
//! of a bimodule comes with three such witnesses, one per composable pair
//! in its sequence, built here from unit components over the cone's
//! objects.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arcs::Ratio;
use crate::flow::{
    epsilon, map_cells, single_vertex_arc, unit_id, validate_flow_simplex, vertex_category,
    Cells, ConeResult, EquivRecord, Facet, FacetKind, FacetPiece, FlowBimodule, FlowSimplex,
    FormalComponent,
};
use crate::homology::{cells_chain_map, chain_complex, graded_positions, GradedMap, Matrix, Ring};
use crate::report::CheckReport;

fn product_id(a: &str, b: &str) -> String {
    format!("{a}|{b}")
}

/// A product cell of one virtual-dimension-one factor and one
/// virtual-dimension-zero factor, waiting to be glued along its middle
/// breakings.
struct Wall {
    cell: (usize, usize, Ratio),
    id: String,
    total_dim: u32,
    obstruction_rank: u32,
    count: BigInt,
    /// Facets away from the middle category, already in composite form.
    outer: Vec<Facet>,
    /// Middle-breaking configurations (left edge, middle, right edge).
    seams: Vec<(String, String, String)>,
}

fn find(parent: &mut Vec<usize>, i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut i = i;
    while parent[i] != r {
        let next = parent[i];
        parent[i] = r;
        i = next;
    }
    r
}

fn union(parent: &mut Vec<usize>, a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Composes two bimodules over their shared middle category.
///
/// Virtual-dimension-zero components multiply cell by cell, so the
/// composite's chain map is the matrix product of the two edge chain
/// maps. Virtual-dimension-one products are glued along matching middle
/// breakings into single components carrying the surviving outer facets.
/// Both inputs must validate and present the same category at the middle
/// vertex.
pub fn compose_bimodules(
    b1: &FlowBimodule,
    b2: &FlowBimodule,
) -> Result<FlowBimodule, String> {
    let s1 = b1.simplex();
    let s2 = b2.simplex();
    if s1.gamma != s2.gamma {
        return Err("the energy monoids of the two bimodules differ".into());
    }
    if b1.target_category() != b2.source_category() {
        return Err("the middle categories of the two bimodules do not agree".into());
    }
    for (s, side) in [(s1, "left"), (s2, "right")] {
        let check = validate_flow_simplex(s);
        if !check.pass {
            return Err(format!(
                "the {side} bimodule does not validate: {}",
                check.first().unwrap_or("unknown violation")
            ));
        }
    }

    let e1 = b1.edge_cells();
    let e2 = b2.edge_cells();

    let mut edge = Cells::new();
    let mut walls: Vec<Wall> = Vec::new();

    for ((p, q, l1), cs1) in e1 {
        for ((q2, r, l2), cs2) in e2 {
            if q2 != q {
                continue;
            }
            let lam = l1 + l2;
            for c1 in cs1 {
                for c2 in cs2 {
                    let vpair = (c1.virtual_dim(), c2.virtual_dim());
                    let id = product_id(&c1.id, &c2.id);
                    if vpair == (1, 0) && c1.facets.is_some() {
                        // The break moves in the left factor; its middle
                        // breakings become seams shared with right walls.
                        let mut outer = Vec::new();
                        let mut seams = Vec::new();
                        for facet in c1.facets.as_ref().unwrap() {
                            let FacetKind::Break { set, elem, left_energy } = &facet.label else {
                                continue;
                            };
                            if *set == 0 {
                                outer.push(Facet {
                                    label: FacetKind::Break {
                                        set: 0,
                                        elem: *elem,
                                        left_energy: left_energy.clone(),
                                    },
                                    pieces: facet
                                        .pieces
                                        .iter()
                                        .map(|pc| FacetPiece {
                                            factors: vec![
                                                pc.factors[0].clone(),
                                                product_id(&pc.factors[1], &c2.id),
                                            ],
                                            sign: pc.sign,
                                        })
                                        .collect(),
                                });
                            } else {
                                for pc in &facet.pieces {
                                    seams.push((
                                        pc.factors[0].clone(),
                                        pc.factors[1].clone(),
                                        c2.id.clone(),
                                    ));
                                }
                            }
                        }
                        walls.push(Wall {
                            cell: (*p, *r, lam.clone()),
                            id,
                            total_dim: c1.total_dim + c2.total_dim,
                            obstruction_rank: c1.obstruction_rank + c2.obstruction_rank,
                            count: &c1.count * &c2.count,
                            outer,
                            seams,
                        });
                    } else if vpair == (0, 1) && c2.facets.is_some() {
                        let mut outer = Vec::new();
                        let mut seams = Vec::new();
                        for facet in c2.facets.as_ref().unwrap() {
                            let FacetKind::Break { set, elem, left_energy } = &facet.label else {
                                continue;
                            };
                            if *set == 1 {
                                outer.push(Facet {
                                    label: FacetKind::Break {
                                        set: 1,
                                        elem: *elem,
                                        left_energy: l1 + left_energy,
                                    },
                                    pieces: facet
                                        .pieces
                                        .iter()
                                        .map(|pc| FacetPiece {
                                            factors: vec![
                                                product_id(&c1.id, &pc.factors[0]),
                                                pc.factors[1].clone(),
                                            ],
                                            sign: pc.sign,
                                        })
                                        .collect(),
                                });
                            } else {
                                for pc in &facet.pieces {
                                    seams.push((
                                        c1.id.clone(),
                                        pc.factors[0].clone(),
                                        pc.factors[1].clone(),
                                    ));
                                }
                            }
                        }
                        walls.push(Wall {
                            cell: (*p, *r, lam.clone()),
                            id,
                            total_dim: c1.total_dim + c2.total_dim,
                            obstruction_rank: c1.obstruction_rank + c2.obstruction_rank,
                            count: &c1.count * &c2.count,
                            outer,
                            seams,
                        });
                    } else {
                        let v = c1.virtual_dim() + c2.virtual_dim();
                        edge.entry((*p, *r, lam.clone())).or_default().push(FormalComponent {
                            id,
                            stratum: single_vertex_arc(
                                0,
                                *p,
                                1,
                                *r,
                                BTreeSet::new(),
                                lam.clone(),
                            ),
                            total_dim: c1.total_dim + c2.total_dim,
                            obstruction_rank: c1.obstruction_rank + c2.obstruction_rank,
                            count: &c1.count * &c2.count,
                            facets: if v == 0 { Some(Vec::new()) } else { None },
                        });
                    }
                }
            }
        }
    }

    // Glue walls sharing a seam. Every seam of a left wall is matched by
    // exactly one right wall and vice versa when the inputs validate, so
    // the classes are closed strips whose boundary is outer only.
    let mut parent: Vec<usize> = (0..walls.len()).collect();
    let mut by_seam: BTreeMap<&(String, String, String), Vec<usize>> = BTreeMap::new();
    for (i, w) in walls.iter().enumerate() {
        for seam in &w.seams {
            by_seam.entry(seam).or_default().push(i);
        }
    }
    for group in by_seam.values() {
        for pair in group.windows(2) {
            union(&mut parent, pair[0], pair[1]);
        }
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..walls.len() {
        let root = find(&mut parent, i);
        classes.entry(root).or_default().push(i);
    }
    for members in classes.values() {
        let rep = *members
            .iter()
            .min_by(|&&a, &&b| walls[a].id.cmp(&walls[b].id))
            .expect("classes are nonempty");
        let facets: Vec<Facet> =
            members.iter().flat_map(|&i| walls[i].outer.iter().cloned()).collect();
        let w = &walls[rep];
        edge.entry(w.cell.clone()).or_default().push(FormalComponent {
            id: w.id.clone(),
            stratum: single_vertex_arc(0, w.cell.0, 1, w.cell.1, BTreeSet::new(), w.cell.2.clone()),
            total_dim: w.total_dim,
            obstruction_rank: w.obstruction_rank,
            count: w.count.clone(),
            facets: Some(facets),
        });
    }

    let mut payloads = BTreeMap::new();
    payloads.insert(0b01, s1.payloads.get(&0b01).cloned().unwrap_or_default());
    payloads.insert(0b10, s2.payloads.get(&0b10).cloned().unwrap_or_default());
    payloads.insert(0b11, edge);
    FlowBimodule::new(FlowSimplex {
        gamma: s1.gamma,
        vertices: vec![s1.vertices[0].clone(), s2.vertices[1].clone()],
        payloads,
        equivalences: BTreeMap::new(),
        integer_signs: s1.integer_signs && s2.integer_signs,
    })
}

/// The homotopy data read off a 2-simplex: the degree-raising map from
/// the full-stratum layer of the top payload, the three edge chain maps,
/// and the verdict of the homotopy identity
/// `d h + h d = (long edge) - (composite of short edges)`.
#[derive(Debug, Clone)]
pub struct TwoSimplexHomotopy {
    pub h: GradedMap,
    pub map01: GradedMap,
    pub map12: GradedMap,
    pub map02: GradedMap,
    pub report: CheckReport,
}

fn graded_at(m: &GradedMap, k: i64, rows: usize, cols: usize) -> Matrix {
    m.get(&k).cloned().unwrap_or_else(|| Matrix::zero(rows, cols))
}

fn vanishes(m: &Matrix, ring: Ring) -> bool {
    let two = BigInt::from(2);
    for i in 0..m.rows {
        for j in 0..m.cols {
            let ok = match ring {
                Ring::Z => m.get(i, j).is_zero(),
                Ring::Z2 => (m.get(i, j) % &two).is_zero(),
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Extracts the chain homotopy carried by a 2-simplex and checks the
/// homotopy identity degreewise over the given ring.
pub fn homotopy_from_2simplex(
    s: &FlowSimplex,
    ring: Ring,
) -> Result<TwoSimplexHomotopy, String> {
    if s.n() != 2 {
        return Err(format!("a homotopy lives on a 2-simplex, got n = {}", s.n()));
    }
    let x0 = vertex_category(s, 0);
    let x1 = vertex_category(s, 1);
    let x2 = vertex_category(s, 2);
    let c0 = chain_complex(&x0, ring);
    let c1 = chain_complex(&x1, ring);
    let c2 = chain_complex(&x2, ring);
    let empty = Cells::new();
    let pay = |m: u32| s.payloads.get(&m).unwrap_or(&empty);
    let map01 = cells_chain_map(pay(0b011), &x0, &x1, &c0, &c1);
    let map12 = cells_chain_map(pay(0b110), &x1, &x2, &c1, &c2);
    let map02 = cells_chain_map(pay(0b101), &x0, &x2, &c0, &c2);

    let (_, pos0) = graded_positions(&x0);
    let (_, pos2) = graded_positions(&x2);
    let full_sets: BTreeSet<usize> = [1].into_iter().collect();
    let mut h = GradedMap::new();
    for &k in c0.basis.keys() {
        h.insert(k, Matrix::zero(c2.dim(k + 1), c0.dim(k)));
    }
    for ((p, r, _), comps) in pay(0b111) {
        for c in comps {
            if c.virtual_dim() != 0 || c.stratum.verts[0].sets != full_sets {
                continue;
            }
            let (deg_p, col) = pos0[*p];
            let (deg_r, row) = pos2[*r];
            if deg_r != deg_p + 1 {
                continue;
            }
            let m = h
                .entry(deg_p)
                .or_insert_with(|| Matrix::zero(c2.dim(deg_p + 1), c0.dim(deg_p)));
            let v = m.get(row, col) + &c.count;
            m.set(row, col, v);
        }
    }

    let mut report = CheckReport::passing();
    let mut degrees: BTreeSet<i64> = BTreeSet::new();
    for &k in c0.basis.keys().chain(c2.basis.keys()).chain(h.keys()) {
        degrees.insert(k - 1);
        degrees.insert(k);
        degrees.insert(k + 1);
    }
    for &k in &degrees {
        let hk = graded_at(&h, k, c2.dim(k + 1), c0.dim(k));
        let hk1 = graded_at(&h, k - 1, c2.dim(k), c0.dim(k - 1));
        let f02 = graded_at(&map02, k, c2.dim(k), c0.dim(k));
        let f01 = graded_at(&map01, k, c1.dim(k), c0.dim(k));
        let f12 = graded_at(&map12, k, c2.dim(k), c1.dim(k));
        let lhs = c2
            .differential(k + 1)
            .mul(&hk)
            .add(&hk1.mul(&c0.differential(k)))
            .sub(&f02)
            .add(&f12.mul(&f01));
        if !vanishes(&lhs, ring) {
            report.push(format!("degree {k}: the homotopy identity fails over {ring}"));
        }
    }

    Ok(TwoSimplexHomotopy { h, map01, map12, map02, report })
}

fn empty_top_record() -> BTreeMap<(u32, usize), EquivRecord> {
    let mut records = BTreeMap::new();
    records.insert((0b111, 1), EquivRecord { added_rank: 1, map: BTreeMap::new() });
    records
}

fn unit_count(dim: i64) -> BigInt {
    BigInt::from(-(epsilon(dim) as i64))
}

/// The 2-simplex witnessing that following a bimodule with the inclusion
/// into its cone is null-homotopic. The top payload carries one unit per
/// source object, pairing it with its shifted copy inside the cone, plus
/// one wall per virtual-dimension-zero component of the source category
/// and of the edge, closing the units' boundaries.
pub fn null_homotopy_ib(
    b: &FlowBimodule,
    parts: &ConeResult,
) -> Result<FlowSimplex, String> {
    let s = b.simplex();
    let x_objects = &s.vertices[0];
    let x_cells = s.payloads.get(&0b01).cloned().unwrap_or_default();
    let y_cells = s.payloads.get(&0b10).cloned().unwrap_or_default();
    let edge = s.payloads.get(&0b11).cloned().unwrap_or_default();
    let incl = parts.inclusion.simplex();
    let nx = x_objects.len();

    let mut top = Cells::new();
    for (p, o) in x_objects.iter().enumerate() {
        top.entry((p, p, Ratio::zero())).or_default().push(FormalComponent {
            id: format!("h:{}", o.id),
            stratum: single_vertex_arc(0, p, 2, p, [1].into_iter().collect(), Ratio::zero()),
            total_dim: 0,
            obstruction_rank: 0,
            count: unit_count(o.dim),
            facets: Some(Vec::new()),
        });
    }
    for ((p, q, lam), comps) in &x_cells {
        for t in comps.iter().filter(|c| c.virtual_dim() == 0) {
            top.entry((*p, *q, lam.clone())).or_default().push(FormalComponent {
                id: format!("hd:{}", t.id),
                stratum: single_vertex_arc(0, *p, 2, *q, [1].into_iter().collect(), lam.clone()),
                total_dim: 1,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(vec![
                    Facet {
                        label: FacetKind::Break { set: 0, elem: *q, left_energy: lam.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![t.id.clone(), format!("h:{}", x_objects[*q].id)],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break { set: 2, elem: *p, left_energy: Ratio::zero() },
                        pieces: vec![FacetPiece {
                            factors: vec![format!("h:{}", x_objects[*p].id), format!("x:{}", t.id)],
                            sign: 1,
                        }],
                    },
                ]),
            });
        }
    }
    for ((p, yi, lam), comps) in &edge {
        for c in comps.iter().filter(|c| c.virtual_dim() == 0) {
            let total = lam + &parts.shift;
            top.entry((*p, nx + yi, total.clone())).or_default().push(FormalComponent {
                id: format!("hg:{}", c.id),
                stratum: single_vertex_arc(
                    0,
                    *p,
                    2,
                    nx + yi,
                    [1].into_iter().collect(),
                    total.clone(),
                ),
                total_dim: 1,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(vec![
                    Facet {
                        label: FacetKind::Break { set: 1, elem: *yi, left_energy: lam.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![c.id.clone(), unit_id(*yi)],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break { set: 2, elem: *p, left_energy: Ratio::zero() },
                        pieces: vec![FacetPiece {
                            factors: vec![
                                format!("h:{}", x_objects[*p].id),
                                format!("b:{}", c.id),
                            ],
                            sign: 1,
                        }],
                    },
                ]),
            });
        }
    }

    let mut payloads = BTreeMap::new();
    payloads.insert(0b001, x_cells);
    payloads.insert(0b010, y_cells);
    payloads.insert(0b100, map_cells(&parts.category.components, &|_| 2));
    payloads.insert(0b011, edge);
    payloads.insert(
        0b110,
        map_cells(&incl.payloads.get(&0b11).cloned().unwrap_or_default(), &|j| j + 1),
    );
    payloads.insert(0b101, Cells::new());
    payloads.insert(0b111, top);
    Ok(FlowSimplex {
        gamma: s.gamma,
        vertices: vec![
            s.vertices[0].clone(),
            s.vertices[1].clone(),
            parts.category.objects.clone(),
        ],
        payloads,
        equivalences: empty_top_record(),
        integer_signs: s.integer_signs,
    })
}

/// The 2-simplex witnessing that the projection out of a cone composed
/// after the inclusion into it vanishes: the composite is zero on the
/// nose, so the top payload and the long edge are both empty.
pub fn null_homotopy_pi(parts: &ConeResult) -> Result<FlowSimplex, String> {
    let incl = parts.inclusion.simplex();
    let proj = parts.projection.simplex();
    let mut payloads = BTreeMap::new();
    payloads.insert(0b001, incl.payloads.get(&0b01).cloned().unwrap_or_default());
    payloads.insert(0b010, incl.payloads.get(&0b10).cloned().unwrap_or_default());
    payloads.insert(
        0b100,
        map_cells(&proj.payloads.get(&0b10).cloned().unwrap_or_default(), &|j| j + 1),
    );
    payloads.insert(0b011, incl.payloads.get(&0b11).cloned().unwrap_or_default());
    payloads.insert(
        0b110,
        map_cells(&proj.payloads.get(&0b11).cloned().unwrap_or_default(), &|j| j + 1),
    );
    payloads.insert(0b101, Cells::new());
    payloads.insert(0b111, Cells::new());
    Ok(FlowSimplex {
        gamma: incl.gamma,
        vertices: vec![
            incl.vertices[0].clone(),
            incl.vertices[1].clone(),
            proj.vertices[1].clone(),
        ],
        payloads,
        equivalences: empty_top_record(),
        integer_signs: incl.integer_signs,
    })
}

/// The 2-simplex witnessing that the suspended bimodule composed after
/// the projection out of the cone is null-homotopic. The homotopy's
/// units pair the cone's target-part objects with their suspended
/// originals, at energy minus the cone's shift so that both walls of
/// each glued strip lie over one cell.
pub fn null_homotopy_bp(
    b: &FlowBimodule,
    parts: &ConeResult,
) -> Result<FlowSimplex, String> {
    let s = b.simplex();
    let proj = parts.projection.simplex();
    let y_objects = &s.vertices[1];
    let y_cells = s.payloads.get(&0b10).cloned().unwrap_or_default();
    let edge = s.payloads.get(&0b11).cloned().unwrap_or_default();
    let nx = proj.vertices[1].len();
    let neg_shift = -parts.shift.clone();

    let mut sy_objects = y_objects.clone();
    for o in &mut sy_objects {
        o.v.plus += 1;
        o.dim += 1;
    }

    let mut top = Cells::new();
    for (yi, o) in y_objects.iter().enumerate() {
        top.entry((nx + yi, yi, neg_shift.clone())).or_default().push(FormalComponent {
            id: format!("h:{}", o.id),
            stratum: single_vertex_arc(
                0,
                nx + yi,
                2,
                yi,
                [1].into_iter().collect(),
                neg_shift.clone(),
            ),
            total_dim: 0,
            obstruction_rank: 0,
            count: unit_count(o.dim),
            facets: Some(Vec::new()),
        });
    }
    for ((y1, y2, lam), comps) in &y_cells {
        for g in comps.iter().filter(|c| c.virtual_dim() == 0) {
            let total = lam - &parts.shift;
            top.entry((nx + y1, *y2, total.clone())).or_default().push(FormalComponent {
                id: format!("hd:{}", g.id),
                stratum: single_vertex_arc(
                    0,
                    nx + y1,
                    2,
                    *y2,
                    [1].into_iter().collect(),
                    total.clone(),
                ),
                total_dim: 1,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(vec![
                    Facet {
                        label: FacetKind::Break { set: 0, elem: nx + y2, left_energy: lam.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![
                                format!("y:{}", g.id),
                                format!("h:{}", y_objects[*y2].id),
                            ],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break { set: 2, elem: *y1, left_energy: neg_shift.clone() },
                        pieces: vec![FacetPiece {
                            factors: vec![format!("h:{}", y_objects[*y1].id), g.id.clone()],
                            sign: 1,
                        }],
                    },
                ]),
            });
        }
    }
    for ((p, yi, lam), comps) in &edge {
        for c in comps.iter().filter(|c| c.virtual_dim() == 0) {
            top.entry((*p, *yi, lam.clone())).or_default().push(FormalComponent {
                id: format!("hg:{}", c.id),
                stratum: single_vertex_arc(0, *p, 2, *yi, [1].into_iter().collect(), lam.clone()),
                total_dim: 1,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(vec![
                    Facet {
                        label: FacetKind::Break { set: 1, elem: *p, left_energy: Ratio::zero() },
                        pieces: vec![FacetPiece {
                            factors: vec![unit_id(*p), c.id.clone()],
                            sign: 1,
                        }],
                    },
                    Facet {
                        label: FacetKind::Break {
                            set: 0,
                            elem: nx + yi,
                            left_energy: lam + &parts.shift,
                        },
                        pieces: vec![FacetPiece {
                            factors: vec![
                                format!("b:{}", c.id),
                                format!("h:{}", y_objects[*yi].id),
                            ],
                            sign: 1,
                        }],
                    },
                ]),
            });
        }
    }

    let mut payloads = BTreeMap::new();
    payloads.insert(0b001, proj.payloads.get(&0b01).cloned().unwrap_or_default());
    payloads.insert(0b010, proj.payloads.get(&0b10).cloned().unwrap_or_default());
    payloads.insert(0b100, map_cells(&y_cells, &|j| j + 1));
    payloads.insert(0b011, proj.payloads.get(&0b11).cloned().unwrap_or_default());
    payloads.insert(0b110, map_cells(&edge, &|j| j + 1));
    payloads.insert(0b101, Cells::new());
    payloads.insert(0b111, top);
    Ok(FlowSimplex {
        gamma: s.gamma,
        vertices: vec![parts.category.objects.clone(), proj.vertices[1].clone(), sy_objects],
        payloads,
        equivalences: empty_top_record(),
        integer_signs: s.integer_signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arcs::GammaSpec;
    use crate::flow::{cone, diagonal, validate_flow_category, FlowCategory, FlowObject, VirtualDim};
    use crate::homology::bimodule_chain_map;

    fn obj(id: &str, dim: i64) -> FlowObject {
        let v = if dim >= 0 {
            VirtualDim { plus: dim as u32, minus: 0 }
        } else {
            VirtualDim { plus: 0, minus: (-dim) as u32 }
        };
        FlowObject { id: id.into(), v, dim }
    }

    fn ratio(n: i64) -> Ratio {
        Ratio::from_integer(n.into())
    }

    fn discrete(ids: &[&str]) -> FlowCategory {
        FlowCategory {
            gamma: GammaSpec::NonnegRational,
            objects: ids.iter().map(|id| obj(id, 0)).collect(),
            components: Cells::new(),
            integer_signs: true,
            defect: BTreeMap::new(),
        }
    }

    fn interval() -> FlowCategory {
        let mut components = Cells::new();
        components.insert(
            (0, 1, ratio(0)),
            vec![FormalComponent {
                id: "c:ab".into(),
                stratum: single_vertex_arc(0, 0, 0, 1, BTreeSet::new(), ratio(0)),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::one(),
                facets: Some(Vec::new()),
            }],
        );
        FlowCategory {
            gamma: GammaSpec::NonnegRational,
            objects: vec![obj("a", 1), obj("b", 0)],
            components,
            integer_signs: true,
            defect: BTreeMap::new(),
        }
    }

    fn edge_bimodule(
        src: &FlowCategory,
        dst: &FlowCategory,
        comps: &[(usize, usize, i64, i64)],
    ) -> FlowBimodule {
        let mut edge = Cells::new();
        for (i, (p, q, lam, count)) in comps.iter().enumerate() {
            edge.entry((*p, *q, ratio(*lam))).or_default().push(FormalComponent {
                id: format!("e{i}"),
                stratum: single_vertex_arc(0, *p, 1, *q, BTreeSet::new(), ratio(*lam)),
                total_dim: 0,
                obstruction_rank: 0,
                count: BigInt::from(*count),
                facets: Some(Vec::new()),
            });
        }
        let mut payloads = BTreeMap::new();
        payloads.insert(0b01, src.components.clone());
        payloads.insert(0b10, map_cells(&dst.components, &|_| 1));
        payloads.insert(0b11, edge);
        FlowBimodule::new(FlowSimplex {
            gamma: GammaSpec::NonnegRational,
            vertices: vec![src.objects.clone(), dst.objects.clone()],
            payloads,
            equivalences: BTreeMap::new(),
            integer_signs: true,
        })
        .unwrap()
    }

    #[test]
    fn composing_with_a_diagonal_keeps_the_chain_map() {
        let x = discrete(&["u", "v"]);
        let y = discrete(&["w"]);
        let b = edge_bimodule(&x, &y, &[(0, 0, 0, 2), (1, 0, 0, 3)]);
        let cx = chain_complex(&x, Ring::Z);
        let cy = chain_complex(&y, Ring::Z);
        let base = bimodule_chain_map(&b, &cx, &cy);

        let left = compose_bimodules(&diagonal(&x), &b).unwrap();
        let right = compose_bimodules(&b, &diagonal(&y)).unwrap();
        assert!(validate_flow_simplex(left.simplex()).pass);
        assert!(validate_flow_simplex(right.simplex()).pass);
        assert_eq!(bimodule_chain_map(&left, &cx, &cy), base);
        assert_eq!(bimodule_chain_map(&right, &cx, &cy), base);
    }

    #[test]
    fn composition_multiplies_chain_maps() {
        let x = discrete(&["u", "v"]);
        let y = discrete(&["w"]);
        let z = discrete(&["t"]);
        let b1 = edge_bimodule(&x, &y, &[(0, 0, 0, 2), (1, 0, 0, 3)]);
        let b2 = edge_bimodule(&y, &z, &[(0, 0, 0, 5)]);
        let c = compose_bimodules(&b1, &b2).unwrap();
        assert!(validate_flow_simplex(c.simplex()).pass);

        let cx = chain_complex(&x, Ring::Z);
        let cz = chain_complex(&z, Ring::Z);
        let m = bimodule_chain_map(&c, &cx, &cz);
        let expected = Matrix::from_rows(&[vec![10, 15]]);
        assert_eq!(m[&0], expected);
    }

    #[test]
    fn middle_mismatch_is_rejected() {
        let x = discrete(&["u", "v"]);
        let y = discrete(&["w"]);
        let b = edge_bimodule(&x, &y, &[(0, 0, 0, 2)]);
        let err = compose_bimodules(&b, &b).unwrap_err();
        assert!(err.contains("middle"));
    }

    #[test]
    fn walls_glue_across_the_middle_category() {
        let f = interval();
        let d = diagonal(&f);
        let c = compose_bimodules(&d, &d).unwrap();
        let check = validate_flow_simplex(c.simplex());
        assert!(check.pass, "{:?}", check.first());

        // The two product walls over (a, b) share their seam and fuse.
        let cell = c.edge_cells().get(&(0, 1, ratio(0))).unwrap();
        assert_eq!(cell.len(), 1);
        assert_eq!(cell[0].virtual_dim(), 1);
        assert_eq!(cell[0].facets.as_ref().unwrap().len(), 2);

        let cf = chain_complex(&f, Ring::Z);
        let m = bimodule_chain_map(&c, &cf, &cf);
        assert_eq!(m[&0], Matrix::identity(1));
        assert_eq!(m[&1], Matrix::identity(1));
    }

    #[test]
    fn composite_with_a_cone_inclusion_validates() {
        let f = interval();
        let d = diagonal(&f);
        let parts = cone(&d).unwrap();
        let c = compose_bimodules(&d, &parts.inclusion).unwrap();
        let check = validate_flow_simplex(c.simplex());
        assert!(check.pass, "{:?}", check.first());

        let cf = chain_complex(&f, Ring::Z);
        let cc = chain_complex(&parts.category, Ring::Z);
        assert_eq!(
            bimodule_chain_map(&c, &cf, &cc),
            bimodule_chain_map(&parts.inclusion, &cf, &cc)
        );
    }

    fn check_null_homotopies(b: &FlowBimodule) {
        let parts = cone(b).unwrap();
        assert!(validate_flow_category(&parts.category).pass);
        let witnesses = [
            null_homotopy_ib(b, &parts).unwrap(),
            null_homotopy_pi(&parts).unwrap(),
            null_homotopy_bp(b, &parts).unwrap(),
        ];
        for (i, w) in witnesses.iter().enumerate() {
            let check = validate_flow_simplex(w);
            assert!(check.pass, "witness {i}: {:?}", check.first());
            for ring in [Ring::Z, Ring::Z2] {
                let th = homotopy_from_2simplex(w, ring).unwrap();
                assert!(th.report.pass, "witness {i} over {ring}: {:?}", th.report.first());
            }
        }
    }

    #[test]
    fn cone_null_homotopies_for_a_negative_energy_bimodule() {
        let x = discrete(&["p"]);
        let y = discrete(&["q"]);
        let b = edge_bimodule(&x, &y, &[(0, 0, -1, 1)]);
        let parts = cone(&b).unwrap();
        assert_eq!(parts.shift, ratio(2));

        let ib = null_homotopy_ib(&b, &parts).unwrap();
        let th = homotopy_from_2simplex(&ib, Ring::Z).unwrap();
        assert!(th.report.pass, "{:?}", th.report.first());
        assert_eq!(*th.h[&0].get(0, 0), BigInt::from(-1));

        check_null_homotopies(&b);
    }

    #[test]
    fn cone_null_homotopies_for_a_diagonal() {
        check_null_homotopies(&diagonal(&interval()));
    }

    #[test]
    fn the_homotopy_reader_wants_a_2simplex() {
        let f = interval();
        let d = diagonal(&f);
        assert!(homotopy_from_2simplex(d.simplex(), Ring::Z).is_err());
    }
}
