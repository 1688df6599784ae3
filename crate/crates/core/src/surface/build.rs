//! Boundary surfaces of a triangulation at each gluing stage, as fine
//! polygon complexes adapted to the canonical branched double cover.
//!
//! Cell structure: every unglued big face is a hexagon coned from a central
//! branch point, with long sides (along tetrahedron edges) and corner sides
//! (the small edges) split at midpoints. Small triangles are coned from
//! their centers with side midpoints, so that normal paths embed as chains.
//! Branch cuts sit on the hexagon spokes to long-side midpoints and on the
//! girth circle of every defect annulus.

use super::complex::{CoverComplex, PolygonComplex, Side};
use crate::tri::{GlueState, Stage, TetEdge, Triangulation};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum SurfaceError {
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("defect edge class {0} has identified ends, which is not supported")]
    InvertedDefect(usize),
}

/// ccw order of the vertices of face `f` seen from outside: the unique order
/// making (f, a, b, c) an even permutation of (0,1,2,3).
pub fn face_order(f: u8) -> [u8; 3] {
    match f {
        0 => [1, 2, 3],
        1 => [0, 3, 2],
        2 => [0, 1, 3],
        3 => [0, 2, 1],
        _ => panic!("bad face"),
    }
}

/// ccw order of the three sides (labelled by faces) of the small triangle at
/// vertex `v`, seen from outside.
pub fn small_side_order(v: u8) -> [u8; 3] {
    // corners ccw at v are the edges {v, w} for w in the odd order W(v);
    // sides are opposite corners, shifted by one.
    let w = match v {
        0 => [1, 3, 2],
        1 => [0, 2, 3],
        2 => [0, 3, 1],
        3 => [0, 1, 2],
        _ => panic!("bad vertex"),
    };
    // corners ccw (A, B, C) -> sides ccw (C, A, B)
    [w[2], w[0], w[1]]
}

/// Keys for the 1-cells of the fine complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    /// Half of small side (t, v, f) adjacent to corner (t, v, w), oriented
    /// midpoint -> corner. Canonicalized across a glued side pair.
    SideHalf(usize, u8, u8, u8),
    /// Spoke of the small triangle (t, v) to a word vertex.
    TriSpoke(usize, u8, TriTarget),
    /// Spoke of hexagon (t, f) to a word vertex.
    HexSpoke(usize, u8, HexTarget),
    /// Half of the long side pair with canonical slot (t, f, edge) adjacent
    /// to the end at vertex `end` of the edge, oriented midpoint -> end.
    LongHalf(usize, u8, u8, u8, u8),
    /// Girth circle of defect class j.
    Girth(usize),
    /// Seam of defect class j at end 0 or 1, oriented girth -> hole.
    Seam(usize, u8),
    /// Truncated corner arc of small triangle (t, v) at corner w.
    Arc(usize, u8, u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum TriTarget {
    Mid(u8),
    Corner(u8),
    ArcEnd(u8, u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum HexTarget {
    /// midpoint of the long side along edge {a, b} (sorted)
    LongMid(u8, u8),
    /// midpoint of the corner side at vertex v
    CornerMid(u8),
    /// corner point of the truncated vertex v on edge {v, w}
    CornerPt(u8, u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmallPieceKind {
    Disc,
    Annulus,
    Torus,
    Sphere,
    Other,
}

use serde::Serialize;

#[derive(Debug, Clone)]
pub struct SmallPiece {
    pub kind: SmallPieceKind,
    pub triangles: Vec<(usize, u8)>,
    pub euler: i64,
    /// boundary circles on the big-boundary interface
    pub big_circles: usize,
    /// boundary circles on defect holes
    pub defect_circles: usize,
}

/// Decomposition summary of the boundary at a stage.
#[derive(Debug, Clone)]
pub struct BoundarySurface {
    pub stage: Stage,
    pub big_faces: Vec<(usize, u8)>,
    pub small_pieces: Vec<SmallPiece>,
    pub defect_annuli: usize,
    pub euler: i64,
    pub num_components: usize,
    /// genus per connected component of the full boundary
    pub component_genus: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct DefectInfo {
    /// index into `edge_classes_at(stage)`
    pub edge_class: usize,
    /// corner fans at the two ends: (tet, vertex at this end, other vertex)
    pub fans: [Vec<(usize, u8, u8)>; 2],
    pub girth_edge: usize,
}

/// A hole of the big boundary: the circle where a small piece attaches,
/// walked side by side.
#[derive(Debug, Clone)]
pub struct HoleInfo {
    /// small sides (t, v, f) around the hole, in walk order
    pub sides: Vec<(usize, u8, u8)>,
    /// the corner (vertex label w) through which the walk leaves each side
    pub corners: Vec<u8>,
    /// big edges of t2d crossed between consecutive sides (long pair ids)
    pub big_edges: Vec<usize>,
    /// small component attached to this hole
    pub small_component: usize,
}

/// The boundary surface at a stage together with its fine complex, the cut
/// system, and the canonical cover.
pub struct BoundaryData {
    pub stage: Stage,
    pub tri: Triangulation,
    pub complex: PolygonComplex,
    pub cuts: Vec<bool>,
    pub cover: CoverComplex,
    pub summary: BoundarySurface,
    pub defects: Vec<DefectInfo>,
    /// (t, v, f) -> spoke from triangle center to the side midpoint
    pub tri_spokes: BTreeMap<(usize, u8, u8), usize>,
    /// (t, f, v) -> spoke from hexagon center to the corner-side midpoint
    pub hex_corner_spokes: BTreeMap<(usize, u8, u8), usize>,
    /// unglued small sides (t, v, f) (the set E of small edges of t2d)
    pub free_sides: Vec<(usize, u8, u8)>,
    /// holes of the big boundary
    pub holes: Vec<HoleInfo>,
    /// long side pairs: ((t,f,edge), (t,f,edge)) hexagon slots; one per big
    /// edge of t2d
    pub long_pairs: Vec<((usize, u8, TetEdge), (usize, u8, TetEdge))>,
    /// dual-path 1-cells of each big edge of t2d: the two cut spokes whose
    /// union crosses it
    pub big_edge_spokes: Vec<[usize; 2]>,
    /// small-triangle component id per (t, v)
    pub small_component_of: BTreeMap<(usize, u8), usize>,
}

struct Interner {
    map: BTreeMap<EdgeKey, usize>,
}

impl Interner {
    fn new() -> Self {
        Interner { map: BTreeMap::new() }
    }
    fn get(&mut self, k: EdgeKey) -> usize {
        let n = self.map.len();
        *self.map.entry(k).or_insert(n)
    }
    fn len(&self) -> usize {
        self.map.len()
    }
}

pub fn build_boundary(t: &Triangulation, stage: Stage) -> Result<BoundaryData, SurfaceError> {
    let mut intern = Interner::new();
    let mut polygons: Vec<Vec<Side>> = Vec::new();

    // --- classify edge classes and find defects -------------------------
    let edge_classes = t.edge_classes_at(stage);
    let mut defect_of_end: BTreeMap<(usize, u8, u8), (usize, u8)> = BTreeMap::new();
    let mut defects: Vec<DefectInfo> = Vec::new();
    for (ci, ec) in edge_classes.iter().enumerate() {
        if !ec.is_closed {
            continue;
        }
        let mut has_interior = false;
        for w in &ec.incidences {
            for f in w.faces() {
                if t.glue_state(w.tet, f, stage).0 == GlueState::InteriorOnly {
                    has_interior = true;
                }
            }
        }
        if !has_interior {
            continue;
        }
        // walk the fan with end tracking
        let start = ec.incidences[0];
        let fans = fan_walk(t, start, stage).map_err(|()| SurfaceError::InvertedDefect(ci))?;
        let gid = defects.len();
        for (end, fan) in fans.iter().enumerate() {
            for &(tt, v, w) in fan {
                defect_of_end.insert((tt, v, w), (gid, end as u8));
            }
        }
        let girth_edge = intern.get(EdgeKey::Girth(gid));
        defects.push(DefectInfo { edge_class: ci, fans, girth_edge });
    }

    // canonicalization of glued small sides
    let canon_side = |t_: usize, v: u8, f: u8, w: u8| -> (usize, u8, u8, u8) {
        match t.glue_state(t_, f, stage) {
            (GlueState::Unglued, _) => (t_, v, f, w),
            (_, Some(g)) => {
                let other = (g.to_tet, g.perm[v as usize], g.to_face, g.perm[w as usize]);
                if (other.0, other.1, other.2) < (t_, v, f) {
                    other
                } else {
                    (t_, v, f, w)
                }
            }
            _ => unreachable!(),
        }
    };

    // --- small triangles --------------------------------------------------
    // build the (possibly truncated) boundary word of each small triangle,
    // then cone it from the center.
    for tet in 0..t.num_tetrahedra {
        for v in 0..4u8 {
            let order = small_side_order(v);
            // word: sides with head-vertex labels
            let mut word: Vec<(Side, TriTarget)> = Vec::new();
            for i in 0..3 {
                let f = order[i];
                let f_next = order[(i + 1) % 3];
                let f_prev = order[(i + 2) % 3];
                let w_prev = other_label(v, f_prev, f);
                let w_next = other_label(v, f, f_next);
                let (ct, cv, cf, cw_prev) = canon_side(tet, v, f, w_prev);
                let (_, _, _, cw_next) = canon_side(tet, v, f, w_next);
                let h_prev = intern.get(EdgeKey::SideHalf(ct, cv, cf, cw_prev));
                let h_next = intern.get(EdgeKey::SideHalf(ct, cv, cf, cw_next));
                // from corner w_prev: -half(prev), +half(next)
                word.push((Side::new(h_prev, false), TriTarget::Mid(f)));
                let head = if defect_of_end.contains_key(&(tet, v, w_next)) {
                    TriTarget::ArcEnd(w_next, 0)
                } else {
                    TriTarget::Corner(w_next)
                };
                word.push((Side::new(h_next, true), head));
                // corner or truncation arc at w_next
                if defect_of_end.contains_key(&(tet, v, w_next)) {
                    let arc = intern.get(EdgeKey::Arc(tet, v, w_next));
                    word.push((Side::new(arc, true), TriTarget::ArcEnd(w_next, 1)));
                }
            }
            cone_polygon(&mut polygons, &mut intern, &word, |target| {
                EdgeKey::TriSpoke(tet, v, target)
            });
        }
    }

    // --- hexagons -----------------------------------------------------------
    let mut long_pairs: Vec<((usize, u8, TetEdge), (usize, u8, TetEdge))> = Vec::new();
    let mut long_seen: BTreeMap<(usize, u8, TetEdge), (usize, u8, TetEdge, [u8; 2])> =
        BTreeMap::new();
    let mut big_edge_spokes: Vec<[usize; 2]> = Vec::new();
    for tet in 0..t.num_tetrahedra {
        for f in 0..4u8 {
            if t.glue_state(tet, f, stage).0 != GlueState::Unglued {
                continue;
            }
            // record long-side pairs once
            let [a, b, c] = face_order(f);
            for (x, y) in [(a, b), (b, c), (c, a)] {
                let e = TetEdge::new(tet, x, y);
                let key = (tet, f, e);
                if long_seen.contains_key(&key) {
                    continue;
                }
                let (pt, pf, pe, end_map) = long_partner(t, tet, f, e, stage);
                long_seen.insert(key, (pt, pf, pe, end_map));
                let back = reverse_end_map(e, end_map, pe);
                long_seen.insert((pt, pf, pe), (tet, f, e, back));
                long_pairs.push((key, (pt, pf, pe)));
            }
        }
    }
    // canonical long-half lookup
    let long_half = |intern: &mut Interner,
                     long_seen: &BTreeMap<(usize, u8, TetEdge), (usize, u8, TetEdge, [u8; 2])>,
                     tet: usize,
                     f: u8,
                     e: TetEdge,
                     end: u8|
     -> usize {
        let key = (tet, f, e);
        let (pt, pf, pe, end_map) = long_seen[&key];
        if (pt, pf, pe) < key {
            // canonical slot is the partner: map the end through the chain
            let mapped = if end == e.a { end_map[0] } else { end_map[1] };
            intern.get(EdgeKey::LongHalf(pt, pf, pe.a, pe.b, mapped))
        } else {
            intern.get(EdgeKey::LongHalf(tet, f, e.a, e.b, end))
        }
    };

    let mut hexes: Vec<(usize, u8)> = Vec::new();
    for tet in 0..t.num_tetrahedra {
        for f in 0..4u8 {
            if t.glue_state(tet, f, stage).0 != GlueState::Unglued {
                continue;
            }
            hexes.push((tet, f));
            let [a, b, c] = face_order(f);
            let mut word: Vec<(Side, HexTarget)> = Vec::new();
            for (x, y) in [(a, b), (b, c), (c, a)] {
                // long side along edge {x, y}, traversed P(x,y) -> P(y,x)
                let e = TetEdge::new(tet, x, y);
                let hx = long_half(&mut intern, &long_seen, tet, f, e, x);
                let hy = long_half(&mut intern, &long_seen, tet, f, e, y);
                word.push((Side::new(hx, false), HexTarget::LongMid(e.a, e.b)));
                word.push((Side::new(hy, true), HexTarget::CornerPt(y, x)));
                // corner side at y: from P(y, x) to P(y, next) where next is
                // the third vertex
                let z = other_label(f, x, y);
                let (ct, cv, cf, cw_x) = canon_side(tet, y, f, x);
                debug_assert_eq!((ct, cv, cf), (tet, y, f), "unglued side is its own canon");
                let (_, _, _, cw_z) = canon_side(tet, y, f, z);
                let hx2 = intern.get(EdgeKey::SideHalf(ct, cv, cf, cw_x));
                let hz2 = intern.get(EdgeKey::SideHalf(ct, cv, cf, cw_z));
                word.push((Side::new(hx2, false), HexTarget::CornerMid(y)));
                word.push((Side::new(hz2, true), HexTarget::CornerPt(y, z)));
            }
            cone_polygon(&mut polygons, &mut intern, &word, |target| {
                EdgeKey::HexSpoke(tet, f, target)
            });
        }
    }

    // --- defect collars -----------------------------------------------------
    // The arcs around a defect hole inherit a coherent orientation from the
    // small triangles; chain them head-to-tail by crossing the glued side at
    // each arc's head, then let the collar run the circle backwards.
    for (gid, d) in defects.iter().enumerate() {
        for end in 0..2usize {
            let fan = &d.fans[end];
            let mut cycle: Vec<(usize, u8, u8)> = Vec::new();
            let mut cur = fan[0];
            loop {
                cycle.push(cur);
                let (tt, v, w) = cur;
                let order = small_side_order(v);
                let i = (0..3)
                    .find(|&i| other_label(v, order[i], order[(i + 1) % 3]) == w)
                    .expect("corner between two sides");
                let head_side = order[(i + 1) % 3];
                let g = t
                    .glue_state(tt, head_side, stage)
                    .1
                    .expect("defect corners only have glued sides");
                let next = (g.to_tet, g.perm[v as usize], g.perm[w as usize]);
                if next == fan[0] {
                    break;
                }
                cur = next;
                if cycle.len() > fan.len() {
                    return Err(SurfaceError::Internal(
                        "defect hole cycle does not close over its fan".into(),
                    ));
                }
            }
            if cycle.len() != fan.len() {
                return Err(SurfaceError::Internal("defect hole cycle misses corners".into()));
            }
            let seam = intern.get(EdgeKey::Seam(gid, end as u8));
            let girth = d.girth_edge;
            let mut word: Vec<Side> = Vec::new();
            word.push(Side::new(girth, end == 0));
            word.push(Side::new(seam, true));
            for &(tt, v, w) in cycle.iter().rev() {
                word.push(Side::new(intern.get(EdgeKey::Arc(tt, v, w)), false));
            }
            word.push(Side::new(seam, false));
            polygons.push(word);
        }
    }

    // --- assemble ------------------------------------------------------------
    let num_edges = intern.len();
    let mut cuts = vec![false; num_edges];
    let mut tri_spokes = BTreeMap::new();
    let mut hex_corner_spokes = BTreeMap::new();
    let mut free_sides = Vec::new();
    for (k, &id) in &intern.map {
        match *k {
            EdgeKey::HexSpoke(_, _, HexTarget::LongMid(_, _)) | EdgeKey::Girth(_) => {
                cuts[id] = true;
            }
            EdgeKey::TriSpoke(tt, v, TriTarget::Mid(f)) => {
                tri_spokes.insert((tt, v, f), id);
            }
            EdgeKey::HexSpoke(tt, f, HexTarget::CornerMid(v)) => {
                hex_corner_spokes.insert((tt, f, v), id);
            }
            _ => {}
        }
    }
    for tet in 0..t.num_tetrahedra {
        for v in 0..4u8 {
            for f in 0..4u8 {
                if f != v && t.glue_state(tet, f, stage).0 == GlueState::Unglued {
                    free_sides.push((tet, v, f));
                }
            }
        }
    }
    for &((t1, f1, e1), _) in &long_pairs {
        let s1 = intern.map[&EdgeKey::HexSpoke(t1, f1, HexTarget::LongMid(e1.a, e1.b))];
        let (pt, pf, pe, _) = long_seen[&(t1, f1, e1)];
        let s2 = intern.map[&EdgeKey::HexSpoke(pt, pf, HexTarget::LongMid(pe.a, pe.b))];
        big_edge_spokes.push([s1, s2]);
    }

    // the words above follow the inward-seen cyclic conventions; mirror them
    // so the complex is oriented as seen from outside the manifold, making
    // the cyclic slot triple pair positively
    let polygons: Vec<Vec<Side>> = polygons.into_iter().map(|w| mirror_word(&w)).collect();
    let complex = PolygonComplex::new(polygons, num_edges)
        .map_err(SurfaceError::Internal)?;
    let cover = CoverComplex::build(complex.clone(), cuts.clone())
        .map_err(SurfaceError::Internal)?;

    // --- summary -------------------------------------------------------------
    let (small_component_of, small_pieces) =
        small_decomposition(t, stage, &defect_of_end)?;

    // holes: chain free sides around each hole, crossing long-side chains at
    // the corner points; record the big edges passed
    let long_pair_id = |slot: (usize, u8, TetEdge)| -> usize {
        long_pairs
            .iter()
            .position(|&(a, b)| a == slot || b == slot)
            .expect("hexagon slot belongs to a long pair")
    };
    let mut holes: Vec<HoleInfo> = Vec::new();
    {
        let mut used: std::collections::BTreeSet<((usize, u8, u8), u8)> = Default::default();
        for &(t0, v0, f0) in &free_sides {
            for w_start in 0..4u8 {
                if w_start == v0 || w_start == f0 {
                    continue;
                }
                if used.contains(&((t0, v0, f0), w_start)) {
                    continue;
                }
                // walk the hole starting by leaving side (t0,v0,f0) through
                // its corner at w_start
                let mut sides = Vec::new();
                let mut corners = Vec::new();
                let mut big_edges = Vec::new();
                let (mut tt, mut v, mut f, mut w) = (t0, v0, f0, w_start);
                loop {
                    if !used.insert(((tt, v, f), w)) {
                        return Err(SurfaceError::Internal("hole walk revisits a side end".into()));
                    }
                    sides.push((tt, v, f));
                    corners.push(w);
                    // cross the long chain at edge {v, w} from hexagon (tt, f)
                    let e = TetEdge::new(tt, v, w);
                    big_edges.push(long_pair_id((tt, f, e)));
                    let (pt, pf, pe, ends) = long_partner(t, tt, f, e, stage);
                    let v2 = if e.a == v { ends[0] } else { ends[1] };
                    let w2 = if e.a == v { ends[1] } else { ends[0] };
                    debug_assert_eq!(TetEdge::new(pt, v2, w2), pe);
                    // continue along the corner side of hexagon (pt, pf) at v2,
                    // leaving through its other corner
                    let f2 = pf;
                    let w3 = other_label(v2, f2, w2);
                    // next side is (pt, v2, f2); it must be free
                    debug_assert!(
                        t.glue_state(pt, f2, stage).0 == GlueState::Unglued,
                        "hole walk crossed into a glued face"
                    );
                    (tt, v, f, w) = (pt, v2, f2, w3);
                    if (tt, v, f, w) == (t0, v0, f0, w_start) {
                        break;
                    }
                    if sides.len() > 12 * t.num_tetrahedra + 2 {
                        return Err(SurfaceError::Internal("hole walk failed to close".into()));
                    }
                }
                // walking from each side end traverses each hole twice (once
                // per direction); keep one direction only by marking both
                for &(st, sv, sf) in &sides {
                    for sw in 0..4u8 {
                        if sw != sv && sw != sf {
                            used.insert(((st, sv, sf), sw));
                        }
                    }
                }
                let comp = small_component_of[&(t0, v0)];
                holes.push(HoleInfo { sides, corners, big_edges, small_component: comp });
            }
        }
    }
    let stats = complex.component_stats();
    let summary = BoundarySurface {
        stage,
        big_faces: hexes,
        small_pieces,
        defect_annuli: defects.len(),
        euler: complex.euler_characteristic(),
        num_components: stats.len(),
        component_genus: stats.iter().map(|s| s.genus).collect(),
    };

    Ok(BoundaryData {
        stage,
        tri: t.clone(),
        complex,
        cuts,
        cover,
        summary,
        defects,
        tri_spokes,
        hex_corner_spokes,
        free_sides,
        holes,
        long_pairs,
        big_edge_spokes,
        small_component_of,
    })
}

fn mirror_word(word: &[Side]) -> Vec<Side> {
    word.iter().rev().map(|s| Side::new(s.edge, !s.forward)).collect()
}

/// The third label: the element of {0,1,2,3} different from the three given.
fn other_label(a: u8, b: u8, c: u8) -> u8 {
    for x in 0..4u8 {
        if x != a && x != b && x != c {
            return x;
        }
    }
    unreachable!()
}

fn cone_polygon<K: Fn(T) -> EdgeKey, T: Copy>(
    polygons: &mut Vec<Vec<Side>>,
    intern: &mut Interner,
    word: &[(Side, T)],
    spoke_key: K,
) {
    let k = word.len();
    for j in 0..k {
        let tail_label = word[(j + k - 1) % k].1;
        let head_label = word[j].1;
        let sp_tail = intern.get(spoke_key(tail_label));
        let sp_head = intern.get(spoke_key(head_label));
        polygons.push(vec![Side::new(sp_tail, true), word[j].0, Side::new(sp_head, false)]);
    }
}

/// Walk the corner fans at the two ends of a closed defect edge class.
/// Errors if the walk identifies the two ends.
fn fan_walk(
    t: &Triangulation,
    start: TetEdge,
    stage: Stage,
) -> Result<[Vec<(usize, u8, u8)>; 2], ()> {
    let faces = start.faces();
    // state: (edge wedge, end-vertex at "end 0", exit face)
    let mut fan0 = Vec::new();
    let mut fan1 = Vec::new();
    let mut cur = (start, start.a, faces[0]);
    loop {
        let (e, v0, exit) = cur;
        let v1 = if e.a == v0 { e.b } else { e.a };
        fan0.push((e.tet, v0, v1));
        fan1.push((e.tet, v1, v0));
        let g = t.glue_state(e.tet, exit, stage).1.expect("closed class");
        let e2 = TetEdge::new(g.to_tet, g.perm[e.a as usize], g.perm[e.b as usize]);
        let w0 = g.perm[v0 as usize];
        let entered = g.to_face;
        let next_exit = (0..4u8).find(|&f| f != e2.a && f != e2.b && f != entered).unwrap();
        if e2 == start && next_exit == faces[0] {
            if w0 != start.a {
                return Err(()); // ends identified by the monodromy
            }
            return Ok([fan0, fan1]);
        }
        cur = (e2, w0, next_exit);
    }
}

/// Find the partner hexagon slot of the long side of hexagon (tet, f) along
/// edge `e`, walking around the edge through glued faces. Also returns the
/// end map [image of e.a, image of e.b].
fn long_partner(
    t: &Triangulation,
    tet: usize,
    f: u8,
    e: TetEdge,
    stage: Stage,
) -> (usize, u8, TetEdge, [u8; 2]) {
    debug_assert_eq!(e.tet, tet);
    // the walk exits through the other face of the wedge
    let mut exit = other_face_of_edge(e, f);
    let mut cur = e;
    let mut ends = [e.a, e.b];
    loop {
        match t.glue_state(cur.tet, exit, stage) {
            (GlueState::Unglued, _) => {
                return (cur.tet, exit, cur, ends);
            }
            (_, Some(g)) => {
                let e2 = TetEdge::new(g.to_tet, g.perm[cur.a as usize], g.perm[cur.b as usize]);
                ends = [g.perm[ends[0] as usize], g.perm[ends[1] as usize]];
                let entered = g.to_face;
                exit = (0..4u8).find(|&x| x != e2.a && x != e2.b && x != entered).unwrap();
                cur = e2;
            }
            _ => unreachable!(),
        }
    }
}

fn other_face_of_edge(e: TetEdge, f: u8) -> u8 {
    let fs = e.faces();
    if fs[0] == f {
        fs[1]
    } else {
        fs[0]
    }
}

/// Given end map of the walk slot1 -> slot2, produce the map slot2 -> slot1.
fn reverse_end_map(e1: TetEdge, end_map: [u8; 2], e2: TetEdge) -> [u8; 2] {
    // end_map maps [e1.a, e1.b] to vertices of e2; invert it
    let mut out = [0u8; 2];
    let to = [e2.a, e2.b];
    for (i, &target) in to.iter().enumerate() {
        if end_map[0] == target {
            out[i] = e1.a;
        } else {
            debug_assert_eq!(end_map[1], target);
            out[i] = e1.b;
        }
    }
    out
}

/// Small-boundary components, classified.
fn small_decomposition(
    t: &Triangulation,
    stage: Stage,
    defect_of_end: &BTreeMap<(usize, u8, u8), (usize, u8)>,
) -> Result<(BTreeMap<(usize, u8), usize>, Vec<SmallPiece>), SurfaceError> {
    let n = t.num_tetrahedra * 4;
    let mut parent: Vec<usize> = (0..n).collect();
    let id = |tt: usize, v: u8| tt * 4 + v as usize;
    for tt in 0..t.num_tetrahedra {
        for f in 0..4u8 {
            let (st, g) = t.glue_state(tt, f, stage);
            if st == GlueState::Unglued {
                continue;
            }
            let g = g.unwrap();
            for v in 0..4u8 {
                if v == f {
                    continue;
                }
                let a = crate::tri::uf_find(&mut parent, id(tt, v));
                let b = crate::tri::uf_find(&mut parent, id(g.to_tet, g.perm[v as usize]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(usize, u8)>> = BTreeMap::new();
    for tt in 0..t.num_tetrahedra {
        for v in 0..4u8 {
            groups.entry(crate::tri::uf_find(&mut parent, id(tt, v))).or_default().push((tt, v));
        }
    }
    let mut comp_of = BTreeMap::new();
    let mut pieces = Vec::new();
    for (_, tris) in groups {
        let cid = pieces.len();
        for &tv in &tris {
            comp_of.insert(tv, cid);
        }
        // euler characteristic of the piece, with truncated corners:
        // faces = #triangles; edges = glued sides + free sides + arcs;
        // vertices = interior corner orbits + free-side endpoints + arc ends
        let mut free = 0i64;
        let mut glued = 0i64;
        for &(tt, v) in &tris {
            for f in 0..4u8 {
                if f == v {
                    continue;
                }
                if t.glue_state(tt, f, stage).0 == GlueState::Unglued {
                    free += 1;
                } else {
                    glued += 1;
                }
            }
        }
        // corners and their orbits (only non-truncated corners fuse)
        let mut corner_ids: BTreeMap<(usize, u8, u8), usize> = BTreeMap::new();
        for &(tt, v) in &tris {
            for w in 0..4u8 {
                if w != v && !defect_of_end.contains_key(&(tt, v, w)) {
                    let k = corner_ids.len();
                    corner_ids.insert((tt, v, w), k);
                }
            }
        }
        let mut par2: Vec<usize> = (0..corner_ids.len()).collect();
        for (&(tt, v, w), &i) in &corner_ids {
            for f in 0..4u8 {
                if f == v || f == w {
                    continue;
                }
                let (st, g) = t.glue_state(tt, f, stage);
                if st == GlueState::Unglued {
                    continue;
                }
                let g = g.unwrap();
                let key = (g.to_tet, g.perm[v as usize], g.perm[w as usize]);
                if let Some(&j) = corner_ids.get(&key) {
                    let (a, b) = (crate::tri::uf_find(&mut par2, i), crate::tri::uf_find(&mut par2, j));
                    if a != b {
                        par2[a] = b;
                    }
                } else {
                    return Err(SurfaceError::Internal(
                        "corner orbit mixes truncated and plain corners".into(),
                    ));
                }
            }
        }
        let mut vs = std::collections::BTreeSet::new();
        for i in 0..corner_ids.len() {
            vs.insert(crate::tri::uf_find(&mut par2, i));
        }
        // count truncated corners (each contributes an arc edge and two arc
        // endpoints merged along side-halves with neighbors)
        let mut arcs = 0i64;
        for &(tt, v) in &tris {
            for w in 0..4u8 {
                if w != v && defect_of_end.contains_key(&(tt, v, w)) {
                    arcs += 1;
                }
            }
        }
        // Each side counts as one edge (glued pairs once), each arc as one.
        // Vertices: plain corner orbits plus arc endpoints; an arc endpoint
        // is the truncated end of a side orbit, so count those ends once per
        // side orbit.
        let edges = glued / 2 + free + arcs;
        let mut trunc_side_ends = 0i64;
        let mut counted: std::collections::BTreeSet<(usize, u8, u8, u8)> = Default::default();
        for &(tt, v) in &tris {
            for f in 0..4u8 {
                if f == v {
                    continue;
                }
                for w in 0..4u8 {
                    if w == v || w == f {
                        continue;
                    }
                    if !defect_of_end.contains_key(&(tt, v, w)) {
                        continue;
                    }
                    // canonical side end under gluing
                    let key = match t.glue_state(tt, f, stage) {
                        (GlueState::Unglued, _) => (tt, v, f, w),
                        (_, Some(g)) => {
                            let o = (g.to_tet, g.perm[v as usize], g.to_face, g.perm[w as usize]);
                            if (o.0, o.1, o.2) < (tt, v, f) {
                                o
                            } else {
                                (tt, v, f, w)
                            }
                        }
                        _ => unreachable!(),
                    };
                    if counted.insert(key) {
                        trunc_side_ends += 1;
                    }
                }
            }
        }
        let verts = vs.len() as i64 + trunc_side_ends;
        let euler = verts - edges + f2_of(&tris);
        // boundary circles
        let mut defect_circles = std::collections::BTreeSet::new();
        for &(tt, v) in &tris {
            for w in 0..4u8 {
                if w != v {
                    if let Some(&(gid, end)) = defect_of_end.get(&(tt, v, w)) {
                        defect_circles.insert((gid, end));
                    }
                }
            }
        }
        let defect_circles = defect_circles.len();
        let big_circles = if free == 0 { 0 } else { count_free_circles(t, stage, &tris) };
        let closed = free == 0 && defect_circles == 0;
        let kind = if closed {
            match euler {
                2 => SmallPieceKind::Sphere,
                0 => SmallPieceKind::Torus,
                _ => SmallPieceKind::Other,
            }
        } else if euler == 1 && big_circles + defect_circles == 1 {
            SmallPieceKind::Disc
        } else if euler == 0 && big_circles + defect_circles == 2 {
            SmallPieceKind::Annulus
        } else {
            SmallPieceKind::Other
        };
        pieces.push(SmallPiece {
            kind,
            triangles: tris,
            euler,
            big_circles,
            defect_circles,
        });
    }
    Ok((comp_of, pieces))
}

fn f2_of(tris: &[(usize, u8)]) -> i64 {
    tris.len() as i64
}

fn count_free_circles(t: &Triangulation, stage: Stage, tris: &[(usize, u8)]) -> usize {
    // chain free sides through shared (non-truncated) corner orbits; at a
    // truncated corner the boundary continues through the hole, but free
    // sides and defect holes never meet in a framed boundary: free sides end
    // at corners adjacent to at least one unglued face, which keeps the edge
    // class open, so the corner is not a defect end.
    let mut free: Vec<(usize, u8, u8)> = Vec::new();
    for &(tt, v) in tris {
        for f in 0..4u8 {
            if f != v && t.glue_state(tt, f, stage).0 == GlueState::Unglued {
                free.push((tt, v, f));
            }
        }
    }
    if free.is_empty() {
        return 0;
    }
    // corner orbits restricted to this piece
    let mut corner_ids: BTreeMap<(usize, u8, u8), usize> = BTreeMap::new();
    for &(tt, v) in tris {
        for w in 0..4u8 {
            if w != v {
                let k = corner_ids.len();
                corner_ids.insert((tt, v, w), k);
            }
        }
    }
    let mut parent: Vec<usize> = (0..corner_ids.len()).collect();
    for (&(tt, v, w), &i) in &corner_ids {
        for f in 0..4u8 {
            if f == v || f == w {
                continue;
            }
            let (st, g) = t.glue_state(tt, f, stage);
            if st == GlueState::Unglued {
                continue;
            }
            let g = g.unwrap();
            if let Some(&j) = corner_ids.get(&(g.to_tet, g.perm[v as usize], g.perm[w as usize])) {
                let (a, b) = (crate::tri::uf_find(&mut parent, i), crate::tri::uf_find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut par2: Vec<usize> = (0..free.len()).collect();
    let mut at_corner: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &(tt, v, f)) in free.iter().enumerate() {
        for w in 0..4u8 {
            if w == v || w == f {
                continue;
            }
            let c = crate::tri::uf_find(&mut parent, corner_ids[&(tt, v, w)]);
            at_corner.entry(c).or_default().push(i);
        }
    }
    for ss in at_corner.values() {
        for &s in &ss[1..] {
            let (a, b) = (crate::tri::uf_find(&mut par2, ss[0]), crate::tri::uf_find(&mut par2, s));
            if a != b {
                par2[a] = b;
            }
        }
    }
    let mut cs = std::collections::BTreeSet::new();
    for i in 0..free.len() {
        cs.insert(crate::tri::uf_find(&mut par2, i));
    }
    cs.len()
}
