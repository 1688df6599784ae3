//! Abstract 2d ideal triangulations of big boundaries whose holes are all
//! filled by small discs, with diagonal flips. Used to check that the
//! canonical cover does not depend on the triangulation.

use super::complex::{CoverComplex, PolygonComplex, Side};
use crate::tri::{GlueState, Stage, TetEdge, Triangulation};

#[derive(Debug, thiserror::Error)]
pub enum FlipError {
    #[error("the two sides of edge {0} lie in the same triangle")]
    NotAdjacent(usize),
    #[error("edge {0} out of range")]
    BadEdge(usize),
    #[error("internal: {0}")]
    Internal(String),
}

/// A 2d ideal triangulation: triangles with ccw side words over big edges.
/// Every hole of the underlying big boundary is filled by a small disc.
#[derive(Debug, Clone)]
pub struct AbstractT2d {
    pub triangles: Vec<[Side; 3]>,
    pub num_edges: usize,
}

impl AbstractT2d {
    /// The big part of a stage-M boundary, when all small pieces are discs.
    pub fn from_triangulation(t: &Triangulation, stage: Stage) -> Result<Self, FlipError> {
        let mut edges: Vec<(usize, u8, TetEdge)> = Vec::new();
        let mut triangles = Vec::new();
        for tet in 0..t.num_tetrahedra {
            for f in 0..4u8 {
                if t.glue_state(tet, f, stage).0 != GlueState::Unglued {
                    return Err(FlipError::Internal(
                        "abstract t2d expects a fully unglued stage".into(),
                    ));
                }
                let [a, b, c] = super::build::face_order(f);
                let mut word = [Side::new(0, true); 3];
                for (i, (x, y)) in [(a, b), (b, c), (c, a)].into_iter().enumerate() {
                    let e = TetEdge::new(tet, x, y);
                    // the long side pair of edge e joins the two faces of e;
                    // orient the shared big edge by its lower face slot
                    let faces = e.faces();
                    let canonical = (tet, faces[0].min(faces[1]), e);
                    let idx = match edges.iter().position(|k| *k == canonical) {
                        Some(i) => i,
                        None => {
                            edges.push(canonical);
                            edges.len() - 1
                        }
                    };
                    let forward = f == faces[0].min(faces[1]);
                    word[i] = Side::new(idx, forward);
                }
                triangles.push(word);
            }
        }
        Ok(AbstractT2d { triangles, num_edges: edges.len() })
    }

    fn as_complex(&self) -> Result<PolygonComplex, FlipError> {
        let polys: Vec<Vec<Side>> = self.triangles.iter().map(|w| w.to_vec()).collect();
        PolygonComplex::new(polys, self.num_edges).map_err(FlipError::Internal)
    }

    /// Flip the diagonal of the quadrilateral formed by the two triangles
    /// adjacent to `edge`.
    pub fn flip(&self, edge: usize) -> Result<AbstractT2d, FlipError> {
        if edge >= self.num_edges {
            return Err(FlipError::BadEdge(edge));
        }
        let mut fwd = None;
        let mut bwd = None;
        for (p, w) in self.triangles.iter().enumerate() {
            for (j, s) in w.iter().enumerate() {
                if s.edge == edge {
                    if s.forward {
                        fwd = Some((p, j));
                    } else {
                        bwd = Some((p, j));
                    }
                }
            }
        }
        let (p1, j1) = fwd.ok_or(FlipError::BadEdge(edge))?;
        let (p2, j2) = bwd.ok_or(FlipError::BadEdge(edge))?;
        if p1 == p2 {
            return Err(FlipError::NotAdjacent(edge));
        }
        // rotate words so the shared edge comes first: T1 = [e+, a, b],
        // T2 = [e-, c, d]; the flipped pair is [b, c, e-] and [d, a, e+]
        let w1 = self.triangles[p1];
        let w2 = self.triangles[p2];
        let a = w1[(j1 + 1) % 3];
        let b = w1[(j1 + 2) % 3];
        let c = w2[(j2 + 1) % 3];
        let d = w2[(j2 + 2) % 3];
        let mut out = self.triangles.clone();
        out[p1] = [b, c, Side::new(edge, false)];
        out[p2] = [d, a, Side::new(edge, true)];
        Ok(AbstractT2d { triangles: out, num_edges: self.num_edges })
    }

    /// Number of holes (ideal vertices) of the triangulation.
    pub fn num_holes(&self) -> Result<usize, FlipError> {
        Ok(self.as_complex()?.num_vertices)
    }

    /// Build the disc-filled boundary surface and its canonical cover:
    /// hexagons coned from branch points with cuts on the spokes dual to big
    /// edges, and one disc polygon per hole.
    pub fn cover(&self) -> Result<CoverComplex, FlipError> {
        let tri_complex = self.as_complex()?;
        // fine 1-cells:
        //   long halves: 2 per big edge, keyed (edge, at_head)
        //   corner sides: 1 per triangle corner (p, j)
        //   hex spokes: per triangle, one per hexagon word vertex (9 sides)
        let ne = self.num_edges;
        let nt = self.triangles.len();
        let long_half = |e: usize, at_head: bool| -> usize { 2 * e + usize::from(at_head) };
        let corner = |p: usize, j: usize| -> usize { 2 * ne + 3 * p + j };
        let spoke_base = 2 * ne + 3 * nt;
        let spoke = |p: usize, pos: usize| -> usize { spoke_base + 9 * p + pos };
        let num_fine = spoke_base + 9 * nt;

        let mut polys: Vec<Vec<Side>> = Vec::new();
        let mut cuts = vec![false; num_fine];
        for (p, w) in self.triangles.iter().enumerate() {
            // hexagon word: for each side j: [-half(tail), +half(head)] then
            // the corner side (p, j)
            let mut word: Vec<(Side, bool)> = Vec::new(); // (side, head is long mid)
            for s in w.iter() {
                let (tail_end, head_end) = if s.forward { (false, true) } else { (true, false) };
                word.push((Side::new(long_half(s.edge, tail_end), false), true));
                word.push((Side::new(long_half(s.edge, head_end), true), false));
                word.push((Side::new(corner(p, word.len() / 3), true), false));
            }
            let k = word.len();
            for jj in 0..k {
                let sp_tail = spoke(p, jj);
                let sp_head = spoke(p, (jj + 1) % k);
                if word[jj].1 {
                    cuts[sp_head] = true;
                }
                polys.push(vec![
                    Side::new(sp_tail, true),
                    word[jj].0,
                    Side::new(sp_head, false),
                ]);
            }
        }
        // discs: one per hole; the corner sides around the hole, reversed
        for corners in &tri_complex.vertex_corners {
            let mut word: Vec<Side> = Vec::new();
            for &(p, j) in corners.iter() {
                word.push(Side::new(corner(p, j), false));
            }
            polys.push(word);
        }
        let complex = PolygonComplex::new(polys, num_fine).map_err(FlipError::Internal)?;
        CoverComplex::build(complex, cuts).map_err(FlipError::Internal)
    }
}
