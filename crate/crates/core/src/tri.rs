//! Triangulations of framed 3-manifolds by truncated tetrahedra.
//!
//! Face `f` of a tetrahedron is the face opposite vertex `f`; edges are
//! unordered vertex pairs. Shape-parameter slots: edges {0,1},{2,3} carry z,
//! {0,2},{1,3} carry z', {0,3},{1,2} carry z''. Opposite edges share a slot.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum TriError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("orientation error: {0}")]
    Orientation(String),
    #[error("small boundary is not abelian: {0}")]
    NonAbelianSmallBoundary(String),
}

/// Permutation of {0,1,2,3} as an array `perm[i] = image of i`.
pub type Perm4 = [u8; 4];

pub fn perm_parity(p: &Perm4) -> u8 {
    let mut par = 0u8;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                par ^= 1;
            }
        }
    }
    par
}

pub fn perm_inverse(p: &Perm4) -> Perm4 {
    let mut q = [0u8; 4];
    for i in 0..4 {
        q[p[i] as usize] = i as u8;
    }
    q
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FacePairing {
    pub tet: usize,
    pub face: u8,
    pub to_tet: usize,
    pub to_face: u8,
    pub perm: Perm4,
}

/// One step of a normal path on the small boundary: cross the small triangle
/// at `(tet, vertex)` entering through the side on face `enter` and leaving
/// through the side on face `exit`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct NormalStep {
    pub tet: usize,
    pub vertex: u8,
    pub enter: u8,
    pub exit: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Triangulation {
    pub name: String,
    pub num_tetrahedra: usize,
    pub gluings: Vec<FacePairing>,
    /// Indices into `gluings` whose interiors are glued in the M ~> M0 step.
    /// `None` means all of them.
    pub partial_glue_set: Option<Vec<usize>>,
    /// Optional per-cusp peripheral curves (two closed normal paths each).
    pub peripheral_curves: Option<Vec<[Vec<NormalStep>; 2]>>,
}

/// Document shape for the tri-v1 interchange format.
#[derive(Serialize, Deserialize)]
struct TriV1 {
    format: String,
    name: String,
    num_tetrahedra: usize,
    gluings: Vec<GluingV1>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partial_glue_set: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peripheral_curves: Option<Vec<[Vec<NormalStep>; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct GluingV1 {
    tet: usize,
    face: u8,
    to_tet: usize,
    to_face: u8,
    perm: [u8; 4],
}

pub const TRI_V1_FORMAT: &str = "gluesym/tri-v1";

pub fn parse_triangulation(document: &str) -> Result<Triangulation, TriError> {
    let doc: TriV1 =
        serde_json::from_str(document).map_err(|e| TriError::Schema(e.to_string()))?;
    if doc.format != TRI_V1_FORMAT {
        return Err(TriError::Schema(format!(
            "unknown format {:?}, expected {:?}",
            doc.format, TRI_V1_FORMAT
        )));
    }
    let t = Triangulation {
        name: doc.name,
        num_tetrahedra: doc.num_tetrahedra,
        gluings: doc
            .gluings
            .into_iter()
            .map(|g| FacePairing {
                tet: g.tet,
                face: g.face,
                to_tet: g.to_tet,
                to_face: g.to_face,
                perm: g.perm,
            })
            .collect(),
        partial_glue_set: doc.partial_glue_set,
        peripheral_curves: doc.peripheral_curves,
    };
    t.validate()?;
    Ok(t)
}

pub fn to_tri_v1_json(t: &Triangulation) -> String {
    let doc = TriV1 {
        format: TRI_V1_FORMAT.to_string(),
        name: t.name.clone(),
        num_tetrahedra: t.num_tetrahedra,
        gluings: t
            .gluings
            .iter()
            .map(|g| GluingV1 {
                tet: g.tet,
                face: g.face,
                to_tet: g.to_tet,
                to_face: g.to_face,
                perm: g.perm,
            })
            .collect(),
        partial_glue_set: t.partial_glue_set.clone(),
        peripheral_curves: t.peripheral_curves.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("serialize tri-v1")
}

/// Shape slot of an edge: 0 for z, 1 for z', 2 for z''.
pub fn edge_slot(a: u8, b: u8) -> u8 {
    match (a.min(b), a.max(b)) {
        (0, 1) | (2, 3) => 0,
        (0, 2) | (1, 3) => 1,
        (0, 3) | (1, 2) => 2,
        _ => panic!("bad edge ({a},{b})"),
    }
}

/// An unordered tetrahedron edge, stored sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TetEdge {
    pub tet: usize,
    pub a: u8,
    pub b: u8,
}

impl TetEdge {
    pub fn new(tet: usize, a: u8, b: u8) -> Self {
        assert!(a != b && a < 4 && b < 4);
        TetEdge { tet, a: a.min(b), b: a.max(b) }
    }

    pub fn slot(&self) -> u8 {
        edge_slot(self.a, self.b)
    }

    /// The two faces of the tetrahedron containing this edge.
    pub fn faces(&self) -> [u8; 2] {
        let mut out = [0u8; 2];
        let mut k = 0;
        for f in 0..4u8 {
            if f != self.a && f != self.b {
                out[k] = f;
                k += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EdgeClass {
    pub id: usize,
    /// Wedges around the edge, in walk order.
    pub incidences: Vec<TetEdge>,
    pub valence: usize,
    /// Whether the walk closes up around the edge (all surrounding faces in
    /// the active gluing set); open chains end on unglued faces.
    pub is_closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CuspTopology {
    Sphere,
    Torus,
    /// Cross-section with boundary (disc, annulus, ...); `euler` and
    /// `boundary_circles` disambiguate.
    Other,
}

/// A vertex class of the triangulation together with its cross-section.
#[derive(Debug, Clone)]
pub struct CuspClass {
    pub id: usize,
    /// Small triangles (tet, vertex) tiling the cross-section.
    pub small_triangles: Vec<(usize, u8)>,
    pub euler: i64,
    pub boundary_circles: usize,
    pub topology_type: CuspTopology,
}

/// Which pairings are active, and how, for a given stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    /// Only pairings outside the partial glue set, fully glued.
    M,
    /// Those plus the partial glue set with interiors only (defects along the
    /// new internal edges).
    M0,
    /// Everything fully glued.
    Mprime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlueState {
    Unglued,
    InteriorOnly,
    Full,
}

impl Triangulation {
    pub fn new(
        name: &str,
        num_tetrahedra: usize,
        gluings: Vec<FacePairing>,
    ) -> Result<Self, TriError> {
        let t = Triangulation {
            name: name.to_string(),
            num_tetrahedra,
            gluings,
            partial_glue_set: None,
            peripheral_curves: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TriError> {
        let mut seen: BTreeMap<(usize, u8), usize> = BTreeMap::new();
        for (i, g) in self.gluings.iter().enumerate() {
            if g.tet >= self.num_tetrahedra || g.to_tet >= self.num_tetrahedra {
                return Err(TriError::Schema(format!(
                    "gluing {i}: tetrahedron index out of range"
                )));
            }
            if g.face > 3 || g.to_face > 3 {
                return Err(TriError::Schema(format!("gluing {i}: face index out of range")));
            }
            let mut hit = [false; 4];
            for &x in &g.perm {
                if x > 3 {
                    return Err(TriError::Schema(format!("gluing {i}: bad permutation")));
                }
                hit[x as usize] = true;
            }
            if hit.iter().any(|h| !h) {
                return Err(TriError::Pairing(format!("gluing {i}: perm is not a bijection")));
            }
            if g.perm[g.face as usize] != g.to_face {
                return Err(TriError::Pairing(format!(
                    "gluing {i}: perm[face] = {} but to_face = {}",
                    g.perm[g.face as usize], g.to_face
                )));
            }
            if seen.insert((g.tet, g.face), i).is_some() {
                return Err(TriError::Pairing(format!(
                    "face ({}, {}) appears in more than one pairing",
                    g.tet, g.face
                )));
            }
            if perm_parity(&g.perm) != 1 {
                return Err(TriError::Orientation(format!(
                    "gluing {i}: permutation is even, so the face map preserves orientation"
                )));
            }
        }
        // involutivity: the partner entry exists with the inverse permutation
        for (i, g) in self.gluings.iter().enumerate() {
            match seen.get(&(g.to_tet, g.to_face)) {
                None => {
                    return Err(TriError::Pairing(format!(
                        "gluing {i}: missing inverse pairing for ({}, {})",
                        g.to_tet, g.to_face
                    )))
                }
                Some(&j) => {
                    let h = &self.gluings[j];
                    if h.to_tet != g.tet || h.to_face != g.face || h.perm != perm_inverse(&g.perm)
                    {
                        return Err(TriError::Pairing(format!(
                            "gluings {i} and {j} are not inverse to each other"
                        )));
                    }
                }
            }
        }
        if let Some(ps) = &self.partial_glue_set {
            for &i in ps {
                if i >= self.gluings.len() {
                    return Err(TriError::Schema(format!(
                        "partial_glue_set index {i} out of range"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Glue state of face `(tet, face)` at `stage`, with the pairing.
    pub fn glue_state(
        &self,
        tet: usize,
        face: u8,
        stage: Stage,
    ) -> (GlueState, Option<&FacePairing>) {
        let idx = self.gluings.iter().position(|g| g.tet == tet && g.face == face);
        let Some(i) = idx else { return (GlueState::Unglued, None) };
        let in_partial = match &self.partial_glue_set {
            None => true,
            Some(ps) => {
                // a pairing is in the set if either direction is listed
                let g = &self.gluings[i];
                ps.iter().any(|&k| {
                    let h = &self.gluings[k];
                    (h.tet, h.face) == (g.tet, g.face)
                        || (h.tet, h.face) == (g.to_tet, g.to_face)
                })
            }
        };
        let st = match (stage, in_partial) {
            (Stage::M, true) => GlueState::Unglued,
            (Stage::M, false) => GlueState::Full,
            (Stage::M0, true) => GlueState::InteriorOnly,
            (Stage::M0, false) => GlueState::Full,
            (Stage::Mprime, _) => GlueState::Full,
        };
        if st == GlueState::Unglued {
            (st, None)
        } else {
            (st, Some(&self.gluings[i]))
        }
    }

    pub fn pairing_of(&self, tet: usize, face: u8) -> Option<&FacePairing> {
        self.gluings.iter().find(|g| g.tet == tet && g.face == face)
    }

    pub fn is_fully_glued(&self) -> bool {
        (0..self.num_tetrahedra).all(|t| (0..4u8).all(|f| self.pairing_of(t, f).is_some()))
    }

    /// Orbit decomposition of the 6N tetrahedron edges under the face
    /// identifications active at `stage`.
    pub fn edge_classes_at(&self, stage: Stage) -> Vec<EdgeClass> {
        let mut seen: std::collections::BTreeSet<TetEdge> = Default::default();
        let mut out = Vec::new();
        for tet in 0..self.num_tetrahedra {
            for a in 0..4u8 {
                for b in a + 1..4u8 {
                    let e0 = TetEdge::new(tet, a, b);
                    if seen.contains(&e0) {
                        continue;
                    }
                    let (cyc, closed) = self.walk_edge(e0, stage);
                    for e in &cyc {
                        seen.insert(*e);
                    }
                    out.push(EdgeClass {
                        id: out.len(),
                        valence: cyc.len(),
                        incidences: cyc,
                        is_closed: closed,
                    });
                }
            }
        }
        out
    }

    pub fn edge_classes(&self) -> Vec<EdgeClass> {
        self.edge_classes_at(Stage::Mprime)
    }

    /// Walk around an edge crossing faces glued at the given stage. Returns
    /// the wedge cycle and whether it closed up.
    pub(crate) fn walk_edge(&self, start: TetEdge, stage: Stage) -> (Vec<TetEdge>, bool) {
        let cross = |e: TetEdge, exit: u8| -> Option<(TetEdge, u8)> {
            let (st, g) = self.glue_state(e.tet, exit, stage);
            if st == GlueState::Unglued {
                return None;
            }
            let g = g.unwrap();
            let a2 = g.perm[e.a as usize];
            let b2 = g.perm[e.b as usize];
            let e2 = TetEdge::new(g.to_tet, a2, b2);
            let entered = g.to_face;
            let next_exit = (0..4u8)
                .find(|&f| f != e2.a && f != e2.b && f != entered)
                .expect("wedge has two faces");
            Some((e2, next_exit))
        };
        let faces = start.faces();
        let mut cyc = vec![start];
        let mut cur = (start, faces[0]);
        loop {
            match cross(cur.0, cur.1) {
                None => break,
                Some((e2, x2)) => {
                    if e2 == start && x2 == faces[0] {
                        return (cyc, true);
                    }
                    if cyc.len() > 12 * self.num_tetrahedra {
                        panic!("edge walk failed to terminate");
                    }
                    cyc.push(e2);
                    cur = (e2, x2);
                }
            }
        }
        // open chain: extend backwards through the other face of `start`
        let mut back = Vec::new();
        let mut cur = (start, faces[1]);
        loop {
            match cross(cur.0, cur.1) {
                None => break,
                Some((e2, x2)) => {
                    back.push(e2);
                    cur = (e2, x2);
                }
            }
        }
        back.reverse();
        back.extend(cyc);
        (back, false)
    }

    /// Vertex classes with assembled cross-sections, at the fully glued stage.
    pub fn cusp_classes(&self) -> Result<Vec<CuspClass>, TriError> {
        self.cusp_classes_at(Stage::Mprime)
    }

    pub fn cusp_classes_at(&self, stage: Stage) -> Result<Vec<CuspClass>, TriError> {
        let n = self.num_tetrahedra * 4;
        let mut parent: Vec<usize> = (0..n).collect();
        let id = |t: usize, v: u8| t * 4 + v as usize;
        for t in 0..self.num_tetrahedra {
            for f in 0..4u8 {
                let (st, g) = self.glue_state(t, f, stage);
                if st == GlueState::Unglued {
                    continue;
                }
                let g = g.unwrap();
                for v in 0..4u8 {
                    if v == f {
                        continue;
                    }
                    let a = uf_find(&mut parent, id(t, v));
                    let b = uf_find(&mut parent, id(g.to_tet, g.perm[v as usize]));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<(usize, u8)>> = BTreeMap::new();
        for t in 0..self.num_tetrahedra {
            for v in 0..4u8 {
                let r = uf_find(&mut parent, id(t, v));
                groups.entry(r).or_default().push((t, v));
            }
        }
        let mut out = Vec::new();
        for (_, verts) in groups {
            let mut cc = self.cross_section(&verts, stage)?;
            cc.id = out.len();
            out.push(cc);
        }
        Ok(out)
    }

    fn cross_section(&self, verts: &[(usize, u8)], stage: Stage) -> Result<CuspClass, TriError> {
        let f2 = verts.len() as i64;
        let mut e_glued = 0i64;
        let mut free_sides: Vec<(usize, u8, u8)> = Vec::new();
        for &(t, v) in verts {
            for f in 0..4u8 {
                if f == v {
                    continue;
                }
                let (st, _) = self.glue_state(t, f, stage);
                if st == GlueState::Unglued {
                    free_sides.push((t, v, f));
                } else {
                    e_glued += 1;
                }
            }
        }
        let e = e_glued / 2 + free_sides.len() as i64;
        // corners (t, v, w): orbits under glued faces not containing v or w
        let mut corner_ids: BTreeMap<(usize, u8, u8), usize> = BTreeMap::new();
        for &(t, v) in verts {
            for w in 0..4u8 {
                if w != v {
                    let k = corner_ids.len();
                    corner_ids.insert((t, v, w), k);
                }
            }
        }
        let mut parent: Vec<usize> = (0..corner_ids.len()).collect();
        for (&(t, v, w), &i) in &corner_ids {
            for f in 0..4u8 {
                if f == v || f == w {
                    continue;
                }
                let (st, g) = self.glue_state(t, f, stage);
                if st == GlueState::Unglued {
                    continue;
                }
                let g = g.unwrap();
                let j = corner_ids[&(g.to_tet, g.perm[v as usize], g.perm[w as usize])];
                let (a, b) = (uf_find(&mut parent, i), uf_find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut vset = std::collections::BTreeSet::new();
        for i in 0..corner_ids.len() {
            vset.insert(uf_find(&mut parent, i));
        }
        let v_count = vset.len() as i64;
        let chi = v_count - e + f2;

        // boundary circles: chain free sides through shared boundary corners
        let circles = if free_sides.is_empty() {
            0
        } else {
            let mut par2: Vec<usize> = (0..free_sides.len()).collect();
            let mut at_corner: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &(t, v, f)) in free_sides.iter().enumerate() {
                for w in 0..4u8 {
                    if w == v || w == f {
                        continue;
                    }
                    let c = uf_find(&mut parent, corner_ids[&(t, v, w)]);
                    at_corner.entry(c).or_default().push(i);
                }
            }
            for ss in at_corner.values() {
                for &s in &ss[1..] {
                    let (a, b) = (uf_find(&mut par2, ss[0]), uf_find(&mut par2, s));
                    if a != b {
                        par2[a] = b;
                    }
                }
            }
            let mut cs = std::collections::BTreeSet::new();
            for i in 0..free_sides.len() {
                cs.insert(uf_find(&mut par2, i));
            }
            cs.len()
        };

        let topology_type = if circles == 0 {
            match chi {
                2 => CuspTopology::Sphere,
                0 => CuspTopology::Torus,
                c if c < 0 => {
                    return Err(TriError::NonAbelianSmallBoundary(format!(
                        "closed cross-section with euler characteristic {c}"
                    )))
                }
                _ => CuspTopology::Other,
            }
        } else {
            CuspTopology::Other
        };
        Ok(CuspClass {
            id: 0,
            small_triangles: verts.to_vec(),
            euler: chi,
            boundary_circles: circles,
            topology_type,
        })
    }
}

pub(crate) fn uf_find(parent: &mut Vec<usize>, mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn figure_eight_parses_and_validates() {
        let t = fixtures::figure_eight();
        assert_eq!(t.num_tetrahedra, 2);
        assert_eq!(t.gluings.len(), 8);
        assert!(t.is_fully_glued());
        let json = to_tri_v1_json(&t);
        let t2 = parse_triangulation(&json).unwrap();
        assert_eq!(t2.gluings, t.gluings);
    }

    #[test]
    fn figure_eight_edge_classes_match_orbit_oracle() {
        let t = fixtures::figure_eight();
        let ecs = t.edge_classes();
        assert_eq!(ecs.len(), 2, "N tetrahedra give N edges for a cusped manifold");
        for ec in &ecs {
            assert_eq!(ec.valence, 6);
            assert!(ec.is_closed);
        }
        // brute-force oracle over the 12 edges: orbit decomposition by
        // repeatedly applying all face identifications to (tet, {a,b})
        let mut orbits: Vec<std::collections::BTreeSet<TetEdge>> = Vec::new();
        let mut left: std::collections::BTreeSet<TetEdge> = (0..2)
            .flat_map(|t| {
                [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
                    .into_iter()
                    .map(move |(a, b)| TetEdge::new(t, a, b))
            })
            .collect();
        while let Some(&e0) = left.iter().next() {
            let mut orbit = std::collections::BTreeSet::new();
            let mut stack = vec![e0];
            while let Some(e) = stack.pop() {
                if !orbit.insert(e) {
                    continue;
                }
                for g in &t.gluings {
                    if g.tet == e.tet && g.face != e.a && g.face != e.b {
                        let e2 =
                            TetEdge::new(g.to_tet, g.perm[e.a as usize], g.perm[e.b as usize]);
                        stack.push(e2);
                    }
                }
            }
            for e in &orbit {
                left.remove(e);
            }
            orbits.push(orbit);
        }
        assert_eq!(orbits.len(), 2);
        let mut sizes: Vec<usize> = orbits.iter().map(|o| o.len()).collect();
        sizes.sort();
        let mut got: Vec<usize> = ecs
            .iter()
            .map(|ec| {
                let set: std::collections::BTreeSet<TetEdge> =
                    ec.incidences.iter().cloned().collect();
                set.len()
            })
            .collect();
        got.sort();
        assert_eq!(got, sizes);
    }

    #[test]
    fn valence_sum_is_six_n() {
        for t in [fixtures::single_tetrahedron(), fixtures::figure_eight(), fixtures::five_two()]
        {
            let total: usize = t.edge_classes().iter().map(|e| e.valence).sum();
            assert_eq!(total, 6 * t.num_tetrahedra);
        }
    }

    #[test]
    fn single_tetrahedron_edges_and_cusps() {
        let t = fixtures::single_tetrahedron();
        let ecs = t.edge_classes();
        assert_eq!(ecs.len(), 6);
        assert!(ecs.iter().all(|e| e.valence == 1 && !e.is_closed));
        let cusps = t.cusp_classes().unwrap();
        assert_eq!(cusps.len(), 4);
        for c in &cusps {
            assert_eq!(c.small_triangles.len(), 1);
            assert_eq!(c.euler, 1, "single free triangle is a disc");
            assert_eq!(c.boundary_circles, 1);
            assert_eq!(c.topology_type, CuspTopology::Other);
        }
    }

    #[test]
    fn figure_eight_cusp_is_a_torus_of_eight_triangles() {
        let t = fixtures::figure_eight();
        let cusps = t.cusp_classes().unwrap();
        assert_eq!(cusps.len(), 1);
        assert_eq!(cusps[0].small_triangles.len(), 8);
        assert_eq!(cusps[0].euler, 0);
        assert_eq!(cusps[0].topology_type, CuspTopology::Torus);
    }

    #[test]
    fn pillow_has_a_sphere_cusp() {
        let t = fixtures::pillow_sphere_cusp();
        let cusps = t.cusp_classes().unwrap();
        let types: Vec<CuspTopology> = cusps.iter().map(|c| c.topology_type).collect();
        assert!(types.contains(&CuspTopology::Sphere));
    }

    #[test]
    fn involution_violation_is_rejected() {
        let mut t = fixtures::figure_eight();
        t.gluings.pop();
        let json = to_tri_v1_json(&t);
        let err = parse_triangulation(&json).unwrap_err();
        assert!(matches!(err, TriError::Pairing(_)), "{err}");
    }

    #[test]
    fn even_permutation_is_rejected() {
        let json = r#"{
            "format": "gluesym/tri-v1", "name": "bad", "num_tetrahedra": 2,
            "gluings": [
                {"tet":0,"face":0,"to_tet":1,"to_face":0,"perm":[0,1,2,3]},
                {"tet":1,"face":0,"to_tet":0,"to_face":0,"perm":[0,1,2,3]}
            ]
        }"#;
        let err = parse_triangulation(json).unwrap_err();
        assert!(matches!(err, TriError::Orientation(_)), "{err}");
    }

    #[test]
    fn malformed_document_is_a_schema_error() {
        assert!(matches!(parse_triangulation("{"), Err(TriError::Schema(_))));
        assert!(matches!(
            parse_triangulation(r#"{"format":"nope","name":"x","num_tetrahedra":0,"gluings":[]}"#),
            Err(TriError::Schema(_))
        ));
    }

    #[test]
    fn partial_glue_set_full_still_conserves_corners() {
        let mut t = fixtures::figure_eight();
        t.partial_glue_set = Some((0..t.gluings.len()).collect());
        let total: usize = t.edge_classes_at(Stage::M0).iter().map(|e| e.valence).sum();
        assert_eq!(total, 12);
        // at stage M nothing is glued
        let m = t.edge_classes_at(Stage::M);
        assert_eq!(m.len(), 12);
    }
}
