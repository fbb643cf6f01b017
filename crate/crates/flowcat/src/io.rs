//! Canonical serialization: JSON for categories, simplices, complexes,
//! and matchings; DOT graphs of corner categories and stratifications;
//! CSV homology tables.
//!
//! All rationals and counts travel as exact decimal or `a/b` fraction
//! strings. Serialization is canonical: maps are emitted in sorted key
//! order and round-trips reproduce values exactly.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::One;
use serde_json::{json, Map, Value};

use crate::arcs::{self, Arc, ArcCategory, ArcEdge, ArcVertex, GammaSpec, Ratio};
use crate::corner::CornerCategory;
use crate::flow::{
    Cells, EquivRecord, Facet, FacetKind, FacetPiece, FlowCategory, FlowObject, FlowSimplex,
    FormalComponent, VirtualDim,
};
use crate::geom::HornFillCell;
use crate::homology::HomologyResult;
use crate::morse::{Matching, SimplicialComplex};

pub const CATEGORY_SCHEMA: &str = "flowcat-category-v1";
pub const SIMPLEX_SCHEMA: &str = "flowcat-simplex-v1";
pub const COMPLEX_SCHEMA: &str = "flowcat-complex-v1";
pub const MATCHING_SCHEMA: &str = "flowcat-matching-v1";

// ---------------------------------------------------------------------------
// Exact numbers
// ---------------------------------------------------------------------------

/// `"n"` for integers, `"n/d"` otherwise.
pub fn ratio_string(r: &Ratio) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses decimal or `a/b` fraction notation into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Ratio, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
    let d: BigInt = den.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
    if d == BigInt::from(0) {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Ratio::new(n, d))
}

fn parse_bigint(s: &str) -> Result<BigInt, String> {
    s.trim().parse().map_err(|_| format!("bad integer {s:?}"))
}

// ---------------------------------------------------------------------------
// Value plumbing
// ---------------------------------------------------------------------------

fn get<'v>(v: &'v Value, field: &str) -> Result<&'v Value, String> {
    v.get(field).ok_or_else(|| format!("missing field {field:?}"))
}

fn as_str<'v>(v: &'v Value, what: &str) -> Result<&'v str, String> {
    v.as_str().ok_or_else(|| format!("{what}: expected a string"))
}

fn as_u64(v: &Value, what: &str) -> Result<u64, String> {
    v.as_u64().ok_or_else(|| format!("{what}: expected a nonnegative integer"))
}

fn as_i64(v: &Value, what: &str) -> Result<i64, String> {
    v.as_i64().ok_or_else(|| format!("{what}: expected an integer"))
}

fn as_bool(v: &Value, what: &str) -> Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("{what}: expected a boolean"))
}

fn as_array<'v>(v: &'v Value, what: &str) -> Result<&'v Vec<Value>, String> {
    v.as_array().ok_or_else(|| format!("{what}: expected an array"))
}

fn check_schema(v: &Value, schema: &str) -> Result<(), String> {
    let got = as_str(get(v, "schema")?, "schema")?;
    if got != schema {
        return Err(format!("expected schema {schema:?}, found {got:?}"));
    }
    Ok(())
}

fn render(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("serializable value");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Gamma, objects, arcs
// ---------------------------------------------------------------------------

fn gamma_str(g: GammaSpec) -> &'static str {
    match g {
        GammaSpec::Trivial => "trivial",
        GammaSpec::NonnegRational => "nonneg-rational",
    }
}

fn parse_gamma(v: &Value) -> Result<GammaSpec, String> {
    match as_str(v, "gamma")? {
        "trivial" => Ok(GammaSpec::Trivial),
        "nonneg-rational" => Ok(GammaSpec::NonnegRational),
        other => Err(format!("unknown grading monoid {other:?}")),
    }
}

fn object_value(o: &FlowObject) -> Value {
    json!({
        "id": o.id,
        "dim": o.dim,
        "plus": o.v.plus,
        "minus": o.v.minus,
    })
}

fn parse_object(v: &Value) -> Result<FlowObject, String> {
    Ok(FlowObject {
        id: as_str(get(v, "id")?, "object id")?.to_string(),
        dim: as_i64(get(v, "dim")?, "object dim")?,
        v: VirtualDim {
            plus: as_u64(get(v, "plus")?, "object plus")? as u32,
            minus: as_u64(get(v, "minus")?, "object minus")? as u32,
        },
    })
}

fn arc_value(a: &Arc) -> Value {
    json!({
        "edges": a.edges.iter().map(|e| json!([e.set, e.elem])).collect::<Vec<_>>(),
        "verts": a
            .verts
            .iter()
            .map(|v| {
                json!({
                    "sets": v.sets.iter().collect::<Vec<_>>(),
                    "energy": ratio_string(&v.energy),
                })
            })
            .collect::<Vec<_>>(),
    })
}

fn parse_arc(v: &Value) -> Result<Arc, String> {
    let mut edges = Vec::new();
    for e in as_array(get(v, "edges")?, "edges")? {
        let pair = as_array(e, "edge")?;
        if pair.len() != 2 {
            return Err("edge: expected [set, elem]".into());
        }
        edges.push(ArcEdge {
            set: as_u64(&pair[0], "edge set")? as usize,
            elem: as_u64(&pair[1], "edge elem")? as usize,
        });
    }
    let mut verts = Vec::new();
    for w in as_array(get(v, "verts")?, "verts")? {
        let mut sets = BTreeSet::new();
        for s in as_array(get(w, "sets")?, "vertex sets")? {
            sets.insert(as_u64(s, "vertex set entry")? as usize);
        }
        verts.push(ArcVertex {
            sets,
            energy: parse_ratio(as_str(get(w, "energy")?, "vertex energy")?)?,
        });
    }
    Ok(Arc { edges, verts })
}

// ---------------------------------------------------------------------------
// Components and cells
// ---------------------------------------------------------------------------

fn facet_value(f: &Facet) -> Value {
    let mut m = Map::new();
    match &f.label {
        FacetKind::Break { set, elem, left_energy } => {
            m.insert("kind".into(), json!("break"));
            m.insert("set".into(), json!(set));
            m.insert("elem".into(), json!(elem));
            m.insert("left_energy".into(), json!(ratio_string(left_energy)));
        }
        FacetKind::ForgetVertex { index } => {
            m.insert("kind".into(), json!("forget"));
            m.insert("index".into(), json!(index));
        }
    }
    m.insert(
        "pieces".into(),
        json!(f
            .pieces
            .iter()
            .map(|p| json!({ "factors": p.factors, "sign": p.sign }))
            .collect::<Vec<_>>()),
    );
    Value::Object(m)
}

fn parse_facet(v: &Value) -> Result<Facet, String> {
    let label = match as_str(get(v, "kind")?, "facet kind")? {
        "break" => FacetKind::Break {
            set: as_u64(get(v, "set")?, "facet set")? as usize,
            elem: as_u64(get(v, "elem")?, "facet elem")? as usize,
            left_energy: parse_ratio(as_str(get(v, "left_energy")?, "left energy")?)?,
        },
        "forget" => FacetKind::ForgetVertex {
            index: as_u64(get(v, "index")?, "facet index")? as usize,
        },
        other => return Err(format!("unknown facet kind {other:?}")),
    };
    let mut pieces = Vec::new();
    for p in as_array(get(v, "pieces")?, "pieces")? {
        let mut factors = Vec::new();
        for f in as_array(get(p, "factors")?, "factors")? {
            factors.push(as_str(f, "factor")?.to_string());
        }
        let sign = as_i64(get(p, "sign")?, "sign")?;
        if sign != 1 && sign != -1 {
            return Err(format!("piece sign must be 1 or -1, found {sign}"));
        }
        pieces.push(FacetPiece { factors, sign: sign as i8 });
    }
    Ok(Facet { label, pieces })
}

fn component_value(c: &FormalComponent) -> Value {
    json!({
        "id": c.id,
        "stratum": arc_value(&c.stratum),
        "total_dim": c.total_dim,
        "obstruction_rank": c.obstruction_rank,
        "count": c.count.to_string(),
        "facets": match &c.facets {
            None => Value::Null,
            Some(fs) => Value::Array(fs.iter().map(facet_value).collect()),
        },
    })
}

fn parse_component(v: &Value) -> Result<FormalComponent, String> {
    let facets = match get(v, "facets")? {
        Value::Null => None,
        Value::Array(fs) => {
            let mut out = Vec::new();
            for f in fs {
                out.push(parse_facet(f)?);
            }
            Some(out)
        }
        _ => return Err("facets: expected null or an array".into()),
    };
    Ok(FormalComponent {
        id: as_str(get(v, "id")?, "component id")?.to_string(),
        stratum: parse_arc(get(v, "stratum")?)?,
        total_dim: as_u64(get(v, "total_dim")?, "total_dim")? as u32,
        obstruction_rank: as_u64(get(v, "obstruction_rank")?, "obstruction_rank")? as u32,
        count: parse_bigint(as_str(get(v, "count")?, "count")?)?,
        facets,
    })
}

fn cells_value(cells: &Cells) -> Value {
    Value::Array(
        cells
            .iter()
            .map(|((p, r, lam), comps)| {
                json!({
                    "source": p,
                    "target": r,
                    "energy": ratio_string(lam),
                    "components": comps.iter().map(component_value).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn parse_cells(v: &Value) -> Result<Cells, String> {
    let mut cells = Cells::new();
    for entry in as_array(v, "cells")? {
        let p = as_u64(get(entry, "source")?, "cell source")? as usize;
        let r = as_u64(get(entry, "target")?, "cell target")? as usize;
        let lam = parse_ratio(as_str(get(entry, "energy")?, "cell energy")?)?;
        let mut comps = Vec::new();
        for c in as_array(get(entry, "components")?, "cell components")? {
            comps.push(parse_component(c)?);
        }
        if cells.insert((p, r, lam.clone()), comps).is_some() {
            return Err(format!("duplicate cell ({p}, {r}, {})", ratio_string(&lam)));
        }
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Categories
// ---------------------------------------------------------------------------

/// Serializes a flow category in the `flowcat-category-v1` format.
pub fn category_to_json(f: &FlowCategory) -> String {
    render(json!({
        "schema": CATEGORY_SCHEMA,
        "gamma": gamma_str(f.gamma),
        "integer_signs": f.integer_signs,
        "objects": f.objects.iter().map(object_value).collect::<Vec<_>>(),
        "cells": cells_value(&f.components),
        "defect": f
            .defect
            .iter()
            .map(|((p, r), v)| json!({ "source": p, "target": r, "value": v }))
            .collect::<Vec<_>>(),
    }))
}

/// Parses the `flowcat-category-v1` format.
pub fn category_from_json(s: &str) -> Result<FlowCategory, String> {
    let v: Value = serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))?;
    check_schema(&v, CATEGORY_SCHEMA)?;
    let mut objects = Vec::new();
    for o in as_array(get(&v, "objects")?, "objects")? {
        objects.push(parse_object(o)?);
    }
    let mut defect = BTreeMap::new();
    for d in as_array(get(&v, "defect")?, "defect")? {
        let p = as_u64(get(d, "defect source")?.max(get(d, "source")?), "defect source")? as usize;
        let r = as_u64(get(d, "target")?, "defect target")? as usize;
        let val = as_i64(get(d, "value")?, "defect value")?;
        defect.insert((p, r), val);
    }
    Ok(FlowCategory {
        gamma: parse_gamma(get(&v, "gamma")?)?,
        objects,
        components: parse_cells(get(&v, "cells")?)?,
        integer_signs: as_bool(get(&v, "integer_signs")?, "integer_signs")?,
        defect,
    })
}

// ---------------------------------------------------------------------------
// Simplices
// ---------------------------------------------------------------------------

/// Serializes a flow simplex in the `flowcat-simplex-v1` format.
pub fn simplex_to_json(s: &FlowSimplex) -> String {
    render(json!({
        "schema": SIMPLEX_SCHEMA,
        "gamma": gamma_str(s.gamma),
        "integer_signs": s.integer_signs,
        "vertices": s
            .vertices
            .iter()
            .map(|vs| Value::Array(vs.iter().map(object_value).collect()))
            .collect::<Vec<_>>(),
        "payloads": s
            .payloads
            .iter()
            .map(|(mask, cells)| json!({ "mask": mask, "cells": cells_value(cells) }))
            .collect::<Vec<_>>(),
        "equivalences": s
            .equivalences
            .iter()
            .map(|((mask, index), rec)| {
                json!({
                    "mask": mask,
                    "index": index,
                    "added_rank": rec.added_rank,
                    "map": rec.map.iter().collect::<BTreeMap<_, _>>(),
                })
            })
            .collect::<Vec<_>>(),
    }))
}

/// Parses the `flowcat-simplex-v1` format.
pub fn simplex_from_json(s: &str) -> Result<FlowSimplex, String> {
    let v: Value = serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))?;
    check_schema(&v, SIMPLEX_SCHEMA)?;
    let mut vertices = Vec::new();
    for vs in as_array(get(&v, "vertices")?, "vertices")? {
        let mut objs = Vec::new();
        for o in as_array(vs, "vertex objects")? {
            objs.push(parse_object(o)?);
        }
        vertices.push(objs);
    }
    let mut payloads = BTreeMap::new();
    for p in as_array(get(&v, "payloads")?, "payloads")? {
        let mask = as_u64(get(p, "mask")?, "payload mask")? as u32;
        if payloads.insert(mask, parse_cells(get(p, "cells")?)?).is_some() {
            return Err(format!("duplicate payload mask {mask}"));
        }
    }
    let mut equivalences = BTreeMap::new();
    for e in as_array(get(&v, "equivalences")?, "equivalences")? {
        let mask = as_u64(get(e, "mask")?, "equivalence mask")? as u32;
        let index = as_u64(get(e, "index")?, "equivalence index")? as usize;
        let added_rank = as_u64(get(e, "added_rank")?, "added rank")? as u32;
        let map_v = get(e, "map")?;
        let obj = map_v
            .as_object()
            .ok_or_else(|| "equivalence map: expected an object".to_string())?;
        let mut map = BTreeMap::new();
        for (k, val) in obj {
            map.insert(k.clone(), as_str(val, "equivalence image")?.to_string());
        }
        if equivalences.insert((mask, index), EquivRecord { added_rank, map }).is_some() {
            return Err(format!("duplicate equivalence record ({mask}, {index})"));
        }
    }
    Ok(FlowSimplex {
        gamma: parse_gamma(get(&v, "gamma")?)?,
        vertices,
        payloads,
        equivalences,
        integer_signs: as_bool(get(&v, "integer_signs")?, "integer_signs")?,
    })
}

// ---------------------------------------------------------------------------
// Complexes and matchings
// ---------------------------------------------------------------------------

/// Serializes a simplicial complex with its vertex labels: the maximal
/// cells as arrays of labels, sorted.
pub fn complex_to_json(sc: &SimplicialComplex, labels: &[String]) -> String {
    let maximal: Vec<Value> = sc
        .maximal_cells()
        .into_iter()
        .map(|c| Value::Array(c.into_iter().map(|i| json!(labels[i])).collect()))
        .collect();
    render(json!({ "schema": COMPLEX_SCHEMA, "maximal": maximal }))
}

/// Numbers vertices 0, 1, ... in their canonical order.
pub fn default_labels(sc: &SimplicialComplex) -> Vec<String> {
    let n = sc.cells().iter().filter(|c| c.len() == 1).count();
    (0..n).map(|i| i.to_string()).collect()
}

fn cell_labels(v: &Value) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for x in as_array(v, "cell")? {
        match x {
            Value::String(s) => out.push(s.clone()),
            Value::Number(n) => out.push(n.to_string()),
            _ => return Err("cell: vertex labels must be strings or integers".into()),
        }
    }
    Ok(out)
}

/// Parses a complex: either the `flowcat-complex-v1` wrapper or a bare
/// JSON list of maximal simplices with string (or integer) vertex
/// labels. Vertices are numbered by sorted label; the label table is
/// returned alongside the complex.
pub fn complex_from_json(s: &str) -> Result<(SimplicialComplex, Vec<String>), String> {
    let v: Value = serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))?;
    let list = match &v {
        Value::Array(_) => &v,
        Value::Object(_) => {
            check_schema(&v, COMPLEX_SCHEMA)?;
            get(&v, "maximal")?
        }
        _ => return Err("expected an array of maximal simplices or a schema object".into()),
    };
    let raw = as_array(list, "maximal simplices")?;
    if raw.is_empty() {
        return Err("a complex needs at least one maximal simplex".into());
    }
    let mut cells_by_label = Vec::new();
    let mut labels: BTreeSet<String> = BTreeSet::new();
    for c in raw {
        let cl = cell_labels(c)?;
        let distinct: BTreeSet<&String> = cl.iter().collect();
        if distinct.len() != cl.len() {
            return Err(format!("repeated vertex in simplex {cl:?}"));
        }
        labels.extend(cl.iter().cloned());
        cells_by_label.push(cl);
    }
    let labels: Vec<String> = labels.into_iter().collect();
    let index: BTreeMap<&String, usize> =
        labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let maximal: Vec<Vec<usize>> = cells_by_label
        .iter()
        .map(|cl| cl.iter().map(|l| index[l]).collect())
        .collect();
    Ok((SimplicialComplex::from_maximal(&maximal), labels))
}

/// Serializes a matching as label pairs (face, coface).
pub fn matching_to_json(m: &Matching, sc: &SimplicialComplex, labels: &[String]) -> String {
    let pairs: Vec<Value> = m
        .pairs
        .iter()
        .map(|&(face, coface)| {
            let lab = |i: usize| {
                Value::Array(sc.cell(i).iter().map(|&v| json!(labels[v])).collect())
            };
            Value::Array(vec![lab(face), lab(coface)])
        })
        .collect();
    render(json!({ "schema": MATCHING_SCHEMA, "pairs": pairs }))
}

/// Parses a matching: the `flowcat-matching-v1` wrapper or a bare list of
/// (face, coface) cell pairs, cells given by vertex labels.
pub fn matching_from_json(
    s: &str,
    sc: &SimplicialComplex,
    labels: &[String],
) -> Result<Matching, String> {
    let v: Value = serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))?;
    let list = match &v {
        Value::Array(_) => &v,
        Value::Object(_) => {
            check_schema(&v, MATCHING_SCHEMA)?;
            get(&v, "pairs")?
        }
        _ => return Err("expected an array of cell pairs or a schema object".into()),
    };
    let index: BTreeMap<&String, usize> =
        labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let resolve = |cell: &Value| -> Result<usize, String> {
        let cl = cell_labels(cell)?;
        let mut verts = Vec::new();
        for l in &cl {
            verts.push(*index.get(l).ok_or_else(|| format!("unknown vertex label {l:?}"))?);
        }
        verts.sort_unstable();
        sc.index_of(&verts)
            .ok_or_else(|| format!("cell {cl:?} does not belong to the complex"))
    };
    let mut pairs = Vec::new();
    for entry in as_array(list, "pairs")? {
        let pair = as_array(entry, "pair")?;
        if pair.len() != 2 {
            return Err("pair: expected [face, coface]".into());
        }
        pairs.push((resolve(&pair[0])?, resolve(&pair[1])?));
    }
    Ok(Matching { pairs })
}

// ---------------------------------------------------------------------------
// DOT
// ---------------------------------------------------------------------------

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT graph of a corner category: objects ranked by codimension, with
/// the arrows between consecutive codimensions drawn.
pub fn dot_corner(name: &str, cc: &CornerCategory) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", dot_quote(name)));
    out.push_str("  rankdir=BT;\n  node [shape=box];\n");
    let mut by_codim: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for o in cc.objects() {
        by_codim.entry(o.codim).or_default().push(&o.id);
    }
    for (codim, ids) in &by_codim {
        out.push_str(&format!("  {{ rank=same; // codim {codim}\n"));
        for id in ids {
            out.push_str(&format!("    {};\n", dot_quote(id)));
        }
        out.push_str("  }\n");
    }
    let objs = cc.objects();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for a in cc.arrows() {
        if a.src == a.tgt {
            continue;
        }
        if objs[a.src].codim + 1 != objs[a.tgt].codim {
            continue;
        }
        edges.insert((objs[a.src].id.clone(), objs[a.tgt].id.clone()));
    }
    for (src, tgt) in edges {
        out.push_str(&format!("  {} -> {};\n", dot_quote(&src), dot_quote(&tgt)));
    }
    out.push_str("}\n");
    out
}

/// DOT graph of an arc category: strata ranked by codimension.
pub fn dot_arc_category(
    name: &str,
    c: &ArcCategory,
    max_codim: Option<u32>,
) -> Result<String, String> {
    let cc = arcs::to_corner_category(c, max_codim).map_err(|e| e.to_string())?;
    Ok(dot_corner(name, &cc))
}

/// DOT graph of a flow category: objects ranked by dimension, the
/// virtual-dimension-zero components as labelled edges.
pub fn dot_flow_category(name: &str, f: &FlowCategory) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", dot_quote(name)));
    out.push_str("  rankdir=BT;\n  node [shape=ellipse];\n");
    let mut by_dim: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
    for o in &f.objects {
        by_dim.entry(o.dim).or_default().push(&o.id);
    }
    for (dim, ids) in &by_dim {
        out.push_str(&format!("  {{ rank=same; // dim {dim}\n"));
        for id in ids {
            out.push_str(&format!("    {};\n", dot_quote(id)));
        }
        out.push_str("  }\n");
    }
    for ((p, r, lam), comps) in &f.components {
        for c in comps {
            if c.virtual_dim() != 0 {
                continue;
            }
            out.push_str(&format!(
                "  {} -> {} [label={}];\n",
                dot_quote(&f.objects[*p].id),
                dot_quote(&f.objects[*r].id),
                dot_quote(&format!("{} @{}", c.count, ratio_string(lam))),
            ));
        }
    }
    out.push_str("}\n");
    out
}

/// DOT graph of a glued horn stratification: strata ranked by
/// codimension, cover arrows (one edge collapse or one index added)
/// drawn between consecutive ranks.
pub fn dot_strata(
    name: &str,
    view: &HornFillCell,
    gamma: GammaSpec,
    sizes: &[usize],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", dot_quote(name)));
    out.push_str("  rankdir=BT;\n  node [shape=box];\n");
    let mut by_codim: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (label, codim) in &view.strata {
        by_codim.entry(*codim).or_default().push(label);
    }
    for (codim, ids) in &by_codim {
        out.push_str(&format!("  {{ rank=same; // codim {codim}\n"));
        for id in ids {
            out.push_str(&format!("    {};\n", dot_quote(id)));
        }
        out.push_str("  }\n");
    }
    // Cover arrows, recovered from the stratum arcs.
    let menu: BTreeSet<Ratio> = view
        .stratum_arcs
        .values()
        .flat_map(|a| a.verts.iter().map(|v| v.energy.clone()))
        .collect();
    let bound = view.strata.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let cat = ArcCategory {
        gamma,
        labels: (0..sizes.len()).collect(),
        sizes: sizes.to_vec(),
        endpoints: Some((view.cell.0, view.cell.1)),
        grade: view.cell.2.clone(),
        energy_menu: menu.into_iter().collect(),
        max_codim: Some(bound),
    };
    let present: BTreeSet<&String> = view.stratum_arcs.keys().collect();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for (label, arc) in &view.stratum_arcs {
        for j in arc.internal_edge_positions() {
            let single: BTreeSet<usize> = [j].into_iter().collect();
            if let Ok(src) = arcs::collapse(&cat, arc, &single, &BTreeSet::new()) {
                if present.contains(&src.key()) {
                    edges.insert((src.key(), label.clone()));
                }
            }
        }
        for m in arcs::missing_indices(&cat, arc) {
            let single: BTreeSet<usize> = [m].into_iter().collect();
            if let Ok(src) = arcs::collapse(&cat, arc, &BTreeSet::new(), &single) {
                if present.contains(&src.key()) {
                    edges.insert((src.key(), label.clone()));
                }
            }
        }
    }
    for (src, tgt) in edges {
        out.push_str(&format!("  {} -> {};\n", dot_quote(&src), dot_quote(&tgt)));
    }
    out.push_str("}\n");
    out
}

// ---------------------------------------------------------------------------
// CSV and reports
// ---------------------------------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV table of homology groups: one row per named space and degree.
pub fn csv_homology(rows: &[(String, HomologyResult)]) -> String {
    let mut out = String::from("space,ring,degree,free_rank,torsion\n");
    for (name, h) in rows {
        for (k, g) in &h.groups {
            if g.is_trivial() {
                continue;
            }
            let torsion = g.torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("+");
            out.push_str(&format!(
                "{},{:?},{},{},{}\n",
                csv_field(name),
                h.ring,
                k,
                g.free_rank,
                csv_field(&torsion),
            ));
        }
    }
    out
}

/// CSV table of a glued stratification: label and codimension per
/// stratum.
pub fn csv_strata(view: &HornFillCell) -> String {
    let mut out = String::from("stratum,codim\n");
    for (label, codim) in &view.strata {
        out.push_str(&format!("{},{}\n", csv_field(label), codim));
    }
    out
}

/// JSON report of a horn filling over one morphism cell: the top cells
/// with their facet classification, the assembled missing components,
/// the stratification, and the check verdict.
pub fn hornfill_report(view: &HornFillCell) -> String {
    let facet_value = |f: &crate::geom::CellFacet| {
        json!({
            "class": match f.class {
                crate::geom::CellFacetClass::LabelledBoundary => "labelled-boundary",
                crate::geom::CellFacetClass::InteriorGluing => "interior-gluing",
                crate::geom::CellFacetClass::MissingFacetHypersurface => "missing-facet",
            },
            "label": f.label,
            "partner": f.partner,
        })
    };
    render(json!({
        "cell": {
            "source": view.cell.0,
            "target": view.cell.1,
            "energy": ratio_string(&view.cell.2),
        },
        "top_cells": view
            .top_cells
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "block": { "d": c.block.0, "flag": c.block.1 },
                    "dim": c.dim,
                    "count": c.count.to_string(),
                    "facets": c.facets.iter().map(facet_value).collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>(),
        "missing": view.missing.iter().map(component_value).collect::<Vec<_>>(),
        "strata": view
            .strata
            .iter()
            .map(|(label, codim)| json!({ "stratum": label, "codim": codim }))
            .collect::<Vec<_>>(),
        "pass": view.report.pass,
        "violations": view.report.violations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::flow::{category_to_simplex, validate_flow_category};
    use crate::homology::Ring;
    use crate::morse::{greedy_matching, simplicial_homology, validate_matching};

    #[test]
    fn ratio_strings_round_trip() {
        for s in ["0", "3", "-7", "1/2", "-22/7"] {
            let r = parse_ratio(s).unwrap();
            assert_eq!(ratio_string(&r), s);
        }
        assert_eq!(parse_ratio("4/8").unwrap(), parse_ratio("1/2").unwrap());
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }

    #[test]
    fn category_round_trip() {
        for (name, f) in corpus::flow_corpus() {
            let s = category_to_json(&f);
            let g = category_from_json(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(f, g, "{name}");
            assert_eq!(s, category_to_json(&g), "{name}: canonical form");
        }
    }

    #[test]
    fn simplex_round_trip() {
        let (b1, b2) = corpus::circle_continuation_pair();
        for b in [b1, b2] {
            let s = simplex_to_json(b.simplex());
            let t = simplex_from_json(&s).unwrap();
            assert_eq!(*b.simplex(), t);
        }
        let f = corpus::flow_corpus().remove(0).1;
        let s = category_to_simplex(&f);
        let t = simplex_from_json(&simplex_to_json(&s)).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn complex_and_matching_round_trip() {
        let sc = corpus::sphere2();
        let labels = default_labels(&sc);
        let s = complex_to_json(&sc, &labels);
        let (sc2, labels2) = complex_from_json(&s).unwrap();
        assert_eq!(sc, sc2);
        assert_eq!(labels, labels2);

        let m = greedy_matching(&sc);
        let ms = matching_to_json(&m, &sc, &labels);
        let m2 = matching_from_json(&ms, &sc, &labels).unwrap();
        assert_eq!(m, m2);
        assert!(validate_matching(&sc, &m2).pass);

        let (named, labels3) =
            complex_from_json(r#"[["a","b","c"],["a","b","d"],["a","c","d"],["b","c","d"]]"#)
                .unwrap();
        assert_eq!(labels3, vec!["a", "b", "c", "d"]);
        assert_eq!(named, sc);
        assert!(complex_from_json(r#"[["a","a","b"]]"#).is_err());
    }

    #[test]
    fn broken_category_round_trips_and_still_fails() {
        let f = corpus::broken_category();
        let g = category_from_json(&category_to_json(&f)).unwrap();
        assert_eq!(f, g);
        assert!(!validate_flow_category(&g).pass);
    }

    #[test]
    fn dot_and_csv_outputs_are_well_formed() {
        let c = ArcCategory::trivial(vec![1, 1], None);
        let dot = dot_arc_category("arcs", &c, Some(2)).unwrap();
        assert!(dot.starts_with("digraph"));
        assert!(dot.ends_with("}\n"));
        assert!(dot.contains("rank=same"));

        let f = corpus::flow_corpus().remove(1).1;
        let dot = dot_flow_category("sphere", &f);
        assert!(dot.contains("->"));

        let rows = vec![("sphere".to_string(), simplicial_homology(&corpus::sphere2(), Ring::Z))];
        let csv = csv_homology(&rows);
        assert!(csv.lines().count() >= 3);
        assert!(csv.starts_with("space,ring,degree,free_rank,torsion"));
    }
}
