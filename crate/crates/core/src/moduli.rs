//! Framed flat PGL(2, C) connections on boundaries: cross-ratio coordinates,
//! reconstruction by parallel-transport rules, holonomy, gluing, the
//! non-abelianization map from twisted abelian connections on the cover, and
//! the Poisson/K2 structure.
//!
//! Gauge convention: every hexagon carries its canonical frame, in which the
//! three corner framing lines are (1,0), (0,1), (1,1) in the face's ccw
//! corner order. All connection data then lives in the transports across big
//! edges, annuli, and glued face pairs.

use crate::gluesys::GluingSystem;
use crate::oddhom::{self, OddCellular};
use crate::pathalg::{self, SmallPath, TwistedCycle};
use crate::surface::build::BoundaryData;
use crate::surface::build_boundary;
use crate::surface::SmallPieceKind;
use crate::tri::{Stage, TetEdge, Triangulation};
use crate::zlat::{self, IntMatrix};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum ModuliError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("annulus {0} has unipotent girth holonomy (x_lambda = 1)")]
    UnipotentAnnulus(usize),
    #[error("torus {0} is simultaneously unipotent ((x_alpha, x_beta) = (1, 1))")]
    UnipotentTorus(usize),
    #[error("moment map violated on edges {0:?}")]
    MomentMapViolation(Vec<usize>),
    #[error("intersection form is singular over Q")]
    SingularForm,
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Path(#[from] pathalg::PathError),
    #[error(transparent)]
    Oddhom(#[from] oddhom::OddhomError),
}

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// 2x2 complex matrix treated projectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mat2 {
    pub fn new(a: C, b: C, cc: C, d: C) -> Self {
        Mat2 { a, b, c: cc, d }
    }

    pub fn identity() -> Self {
        Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
    }

    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inv(&self) -> Result<Mat2, ModuliError> {
        let det = self.det();
        if det.norm() < 1e-300 {
            return Err(ModuliError::DegenerateConfiguration("singular transport".into()));
        }
        Ok(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    pub fn apply(&self, v: V2) -> V2 {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Normalize to det 1 (either sign representative).
    pub fn sl2(&self) -> Result<Mat2, ModuliError> {
        let det = self.det();
        if det.norm() < 1e-300 {
            return Err(ModuliError::DegenerateConfiguration("singular transport".into()));
        }
        let s = det.sqrt();
        Ok(Mat2::new(self.a / s, self.b / s, self.c / s, self.d / s))
    }

    /// Projective distance: min over the sign ambiguity of the max entry
    /// difference between det-normalized representatives.
    pub fn projective_distance(&self, o: &Mat2) -> f64 {
        let (x, y) = match (self.sl2(), o.sl2()) {
            (Ok(x), Ok(y)) => (x, y),
            _ => return f64::INFINITY,
        };
        let d1 = [x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d];
        let d2 = [x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d];
        let m1 = d1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let m2 = d2.iter().map(|z| z.norm()).fold(0.0, f64::max);
        m1.min(m2)
    }

    pub fn trace(&self) -> C {
        self.a + self.d
    }

    /// Whether the projective class is unipotent: tr^2 = 4 det.
    pub fn is_unipotent(&self, tol: f64) -> bool {
        let t = self.trace();
        (t * t - 4.0 * self.det()).norm() < tol * (1.0 + self.det().norm())
    }
}

pub type V2 = [C; 2];

pub fn wedge(x: V2, y: V2) -> C {
    x[0] * y[1] - x[1] * y[0]
}

/// S, T, H(x): the projective transports of the reconstruction rules.
pub fn mat_s() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn mat_t() -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0))
}

pub fn mat_h(x: C) -> Mat2 {
    Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), x)
}

/// The Fock-Goncharov cross-ratio of four lines,
/// `-(a^b)(c^d) / ((a^c)(b^d))`, scale invariant in each argument.
pub fn cross_ratio_edge(a: V2, b: V2, cc: V2, d: V2) -> Result<C, ModuliError> {
    let ab = wedge(a, b);
    let cd = wedge(cc, d);
    let ac = wedge(a, cc);
    let bd = wedge(b, d);
    let scale = |x: V2, y: V2| (x[0].norm() + x[1].norm()) * (y[0].norm() + y[1].norm());
    if ac.norm() < 1e-14 * scale(a, cc) || bd.norm() < 1e-14 * scale(b, d) {
        return Err(ModuliError::DegenerateConfiguration(
            "compared lines are proportional".into(),
        ));
    }
    if ab.norm() < 1e-14 * scale(a, b) || cd.norm() < 1e-14 * scale(cc, d) {
        return Err(ModuliError::DegenerateConfiguration(
            "compared lines are proportional".into(),
        ));
    }
    Ok(-(ab * cd) / (ac * bd))
}

/// The canonical frame line at corner `v` of hexagon (t, f): the corners in
/// face ccw order carry (1,0), (0,1), (1,1).
pub fn canonical_line(f: u8, v: u8) -> V2 {
    let order = crate::surface::build::face_order(f);
    let i = order.iter().position(|&x| x == v).expect("corner of the face");
    match i {
        0 => [c(1.0, 0.0), c(0.0, 0.0)],
        1 => [c(0.0, 0.0), c(1.0, 0.0)],
        _ => [c(1.0, 0.0), c(1.0, 0.0)],
    }
}

/// Values of the coordinate functions on a patch: x_e per big edge of t2d,
/// (x_lambda, x_tau) per annulus piece, (x_alpha, x_beta) per torus piece.
#[derive(Debug, Clone)]
pub struct CoordinatePoint {
    pub edge: BTreeMap<usize, C>,
    pub annulus: BTreeMap<usize, (C, C)>,
    pub torus: BTreeMap<usize, (C, C)>,
}

impl CoordinatePoint {
    /// Restriction flags of the patch: no annulus girth at 1, no torus
    /// simultaneously unipotent; disc hole products equal one.
    pub fn validate(&self, b: &BoundaryData) -> Result<(), ModuliError> {
        for (&piece, &(l, _)) in &self.annulus {
            if (l - c(1.0, 0.0)).norm() < 1e-12 {
                return Err(ModuliError::UnipotentAnnulus(piece));
            }
        }
        for (&piece, &(a, bb)) in &self.torus {
            if (a - c(1.0, 0.0)).norm() < 1e-12 && (bb - c(1.0, 0.0)).norm() < 1e-12 {
                return Err(ModuliError::UnipotentTorus(piece));
            }
        }
        for h in &b.holes {
            let piece = &b.summary.small_pieces[h.small_component];
            if piece.kind == SmallPieceKind::Disc {
                let mut prod = c(1.0, 0.0);
                for &e in &h.big_edges {
                    prod *= self.edge[&e];
                }
                if (prod - c(1.0, 0.0)).norm() > 1e-9 {
                    return Err(ModuliError::Internal(format!(
                        "disc hole product is {prod}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A framed flat connection in the canonical hexagon gauge: transports
/// across big edges and annuli, and per-torus holonomy data.
#[derive(Debug, Clone)]
pub struct FramedConnection {
    /// transport from the second hexagon slot's frame to the first's, per
    /// long pair
    pub edge_transport: BTreeMap<usize, Mat2>,
    /// per annulus: (start side, end side, transport end-frame -> start-frame)
    pub annulus_transport: BTreeMap<usize, AnnulusData>,
    /// per torus: commuting holonomies and the framing line
    pub torus_holonomy: BTreeMap<usize, TorusData>,
}

#[derive(Debug, Clone)]
pub struct AnnulusData {
    /// the traversing path used as a basepoint route
    pub path: SmallPath,
    pub transport: Mat2,
}

#[derive(Debug, Clone)]
pub struct TorusData {
    pub alpha: SmallPath,
    pub beta: SmallPath,
    pub hol_alpha: Mat2,
    pub hol_beta: Mat2,
    pub framing: V2,
}

/// The unique transport across a big edge matching the shared corner lines
/// with the prescribed cross-ratio.
fn edge_transport_from_coordinate(
    b: &BoundaryData,
    long_pair: usize,
    x_e: C,
) -> Result<Mat2, ModuliError> {
    let ((t1, f1, e1), (t2, f2, e2)) = b.long_pairs[long_pair];
    // ends of the chain: e1.a matches which end of e2? recompute the walk map
    let (pt, pf, pe, ends) = long_partner_ends(b, t1, f1, e1);
    debug_assert_eq!((pt, pf, pe), (t2, f2, e2));
    let (va, vb) = ordered_ends(f1, e1);
    let map_end = |v: u8| if v == e1.a { ends[0] } else { ends[1] };
    let (wa, wb) = (map_end(va), map_end(vb));
    // third corners
    let z1 = third_corner(f1, va, vb);
    let z2 = third_corner(f2, wa, wb);
    let la = canonical_line(f1, va);
    let lb = canonical_line(f1, vb);
    let l1 = canonical_line(f1, z1);
    let ma = canonical_line(f2, wa);
    let mb = canonical_line(f2, wb);
    let m2 = canonical_line(f2, z2);
    // T = A1 diag(1, s) A2^{-1} fixes the two shared lines; solve s from the
    // cross-ratio x_e = -(la ^ lb)(m ^ l1) / ((la ^ m)(lb ^ l1)) with
    // m = T(m2) the transported opposite corner
    let a1 = Mat2::new(la[0], lb[0], la[1], lb[1]);
    let a2 = Mat2::new(ma[0], mb[0], ma[1], mb[1]);
    let a2i = a2.inv()?;
    // write m(s) = A1 diag(1, s) A2^{-1} m2 = p + s q
    let y = a2i.apply(m2);
    let p = a1.apply([y[0], c(0.0, 0.0)]);
    let q = a1.apply([c(0.0, 0.0), y[1]]);
    // x_e = -(la^lb) (m ^ l1) / ((la ^ m)(lb ^ l1)): solve for s
    let lab = wedge(la, lb);
    let lbl1 = wedge(lb, l1);
    // x_e * (la ^ (p + s q)) * lbl1 = -lab * ((p + s q) ^ l1)
    // s * [x_e (la^q) lbl1 + lab (q ^ l1)] = -lab (p ^ l1) - x_e (la^p) lbl1
    let coeff = x_e * wedge(la, q) * lbl1 + lab * wedge(q, l1);
    let rhs = -(lab * wedge(p, l1)) - x_e * wedge(la, p) * lbl1;
    if coeff.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("edge transport solve".into()));
    }
    let s = rhs / coeff;
    if s.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("edge transport collapses".into()));
    }
    let diag = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), s);
    Ok(a1.mul(&diag).mul(&a2i))
}

fn third_corner(f: u8, v: u8, w: u8) -> u8 {
    crate::surface::build::face_order(f)
        .into_iter()
        .find(|&x| x != v && x != w)
        .expect("three corners")
}

/// The ends of an edge of face `f`, ordered so that the face's ccw corner
/// order reads (first end, second end, third corner) cyclically. The
/// cross-ratio formulas depend on this ordering.
fn ordered_ends(f: u8, e: TetEdge) -> (u8, u8) {
    let ord = crate::surface::build::face_order(f);
    let t = third_corner(f, e.a, e.b);
    let i = ord.iter().position(|&x| x == t).unwrap();
    (ord[(i + 1) % 3], ord[(i + 2) % 3])
}

fn long_partner_ends(
    b: &BoundaryData,
    t1: usize,
    f1: u8,
    e1: TetEdge,
) -> (usize, u8, TetEdge, [u8; 2]) {
    // rebuild the chain walk with end tracking (mirrors the builder)
    let t = &b.tri;
    let mut exit = {
        let fs = e1.faces();
        if fs[0] == f1 {
            fs[1]
        } else {
            fs[0]
        }
    };
    let mut cur = e1;
    let mut ends = [e1.a, e1.b];
    loop {
        match t.glue_state(cur.tet, exit, b.stage) {
            (crate::tri::GlueState::Unglued, _) => return (cur.tet, exit, cur, ends),
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

/// Extract the edge coordinate from a connection: cross-ratio of the two
/// shared corner lines, the near third corner, and the transported far one.
pub fn extract_edge_coordinate(
    b: &BoundaryData,
    conn: &FramedConnection,
    long_pair: usize,
) -> Result<C, ModuliError> {
    let ((t1, f1, e1), (_t2, f2, _e2)) = b.long_pairs[long_pair];
    let (_, _, _, ends) = long_partner_ends(b, t1, f1, e1);
    let (va, vb) = ordered_ends(f1, e1);
    let la = canonical_line(f1, va);
    let lb = canonical_line(f1, vb);
    let l1 = canonical_line(f1, third_corner(f1, e1.a, e1.b));
    let m2 = canonical_line(f2, third_corner(f2, ends[0], ends[1]));
    let tr = conn.edge_transport[&long_pair];
    let m = tr.apply(m2);
    // x_e = -(la ^ lb)(m ^ l1) / ((la ^ m)(lb ^ l1))
    let num = wedge(la, lb) * wedge(m, l1);
    let den = wedge(la, m) * wedge(lb, l1);
    if den.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("edge extraction".into()));
    }
    Ok(-num / den)
}

/// Basis matrix of a projective triple: columns spanning the first two lines
/// scaled so their sum lies on the third.
pub fn tri_basis(p: V2, q: V2, r: V2) -> Result<Mat2, ModuliError> {
    // alpha p + beta q = r
    let det = wedge(p, q);
    if det.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("triple with equal lines".into()));
    }
    let alpha = wedge(r, q) / det;
    let beta = wedge(p, r) / det;
    if alpha.norm() < 1e-300 || beta.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("triple with equal lines".into()));
    }
    Ok(Mat2::new(alpha * p[0], beta * q[0], alpha * p[1], beta * q[1]))
}

/// Transport across a glued face pair, mapping the target hexagon's frame to
/// the source's by matching the three corner lines.
pub fn face_gluing_transport(g: &crate::tri::FacePairing) -> Result<Mat2, ModuliError> {
    let order = crate::surface::build::face_order(g.face);
    let [x, y, z] = order;
    let b1 = tri_basis(
        canonical_line(g.face, x),
        canonical_line(g.face, y),
        canonical_line(g.face, z),
    )?;
    let b2 = tri_basis(
        canonical_line(g.to_face, g.perm[x as usize]),
        canonical_line(g.to_face, g.perm[y as usize]),
        canonical_line(g.to_face, g.perm[z as usize]),
    )?;
    Ok(b1.mul(&b2.inv()?))
}

/// Reconstruct a framed flat connection from coordinates.
pub fn reconstruct(
    b: &BoundaryData,
    x: &CoordinatePoint,
) -> Result<FramedConnection, ModuliError> {
    x.validate(b)?;
    let mut edge_transport = BTreeMap::new();
    for lp in 0..b.long_pairs.len() {
        let xe = *x
            .edge
            .get(&lp)
            .ok_or_else(|| ModuliError::Internal(format!("missing edge coordinate {lp}")))?;
        if xe.norm() < 1e-300 {
            return Err(ModuliError::DegenerateConfiguration("zero edge coordinate".into()));
        }
        edge_transport.insert(lp, edge_transport_from_coordinate(b, lp, xe)?);
    }
    let mut conn = FramedConnection {
        edge_transport,
        annulus_transport: BTreeMap::new(),
        torus_holonomy: BTreeMap::new(),
    };
    // annuli: solve the traversing transport from the hole holonomies
    for (piece, sp) in b.summary.small_pieces.iter().enumerate() {
        match sp.kind {
            SmallPieceKind::Annulus => {
                let &(_, xt) = x
                    .annulus
                    .get(&piece)
                    .ok_or_else(|| ModuliError::Internal("missing annulus coordinates".into()))?;
                let data = solve_annulus_transport(b, &conn, piece, xt)?;
                conn.annulus_transport.insert(piece, data);
            }
            SmallPieceKind::Torus => {
                let &(xa, xb) = x
                    .torus
                    .get(&piece)
                    .ok_or_else(|| ModuliError::Internal("missing torus coordinates".into()))?;
                let (alpha, beta) = torus_basis_paths(b, piece)?;
                conn.torus_holonomy.insert(
                    piece,
                    TorusData {
                        alpha,
                        beta,
                        hol_alpha: mat_h(1.0 / xa),
                        hol_beta: mat_h(1.0 / xb),
                        framing: [c(1.0, 0.0), c(0.0, 0.0)],
                    },
                );
            }
            _ => {}
        }
    }
    Ok(conn)
}

fn torus_basis_paths(b: &BoundaryData, piece: usize) -> Result<(SmallPath, SmallPath), ModuliError> {
    let odd = oddhom::odd_homology_cellular(b)?;
    let cusp = crate::gluesys::compute_peripheral_basis(b, &odd, piece, None)
        .map_err(|e| ModuliError::Internal(format!("peripheral basis: {e}")))?;
    Ok((cusp.alpha, cusp.beta))
}

/// Holonomy around a big-boundary hole, based at the hexagon of the first
/// side, following the hole walk.
pub fn holonomy_around_hole(
    b: &BoundaryData,
    conn: &FramedConnection,
    hole: usize,
) -> Result<Mat2, ModuliError> {
    let h = &b.holes[hole];
    let mut acc = Mat2::identity();
    for (k, &(tt, _v, f)) in h.sides.iter().enumerate() {
        let lp = h.big_edges[k];
        let ((t1, f1, _), _) = b.long_pairs[lp];
        let tr = conn.edge_transport[&lp];
        // moving from hexagon (tt, f) across the long pair: apply T if we
        // stand in the first slot, T^{-1} if in the second
        let factor = if (t1, f1) == (tt, f) { tr } else { tr.inv()? };
        acc = acc.mul(&factor);
    }
    Ok(acc)
}

/// The two holes of an annulus piece, in hole-index order.
fn annulus_holes(b: &BoundaryData, piece: usize) -> Vec<usize> {
    b.holes
        .iter()
        .enumerate()
        .filter(|(_, h)| h.small_component == piece)
        .map(|(i, _)| i)
        .collect()
}

/// Rotate the hole walk so it starts at the given side, and return the
/// holonomy from that basepoint.
fn hole_holonomy_from(
    b: &BoundaryData,
    conn: &FramedConnection,
    hole: usize,
    start_side: (usize, u8, u8),
) -> Result<Mat2, ModuliError> {
    let h = &b.holes[hole];
    let n = h.sides.len();
    let off = h
        .sides
        .iter()
        .position(|&s| s == start_side)
        .ok_or_else(|| ModuliError::Internal("basepoint side not on hole".into()))?;
    let mut acc = Mat2::identity();
    for k in 0..n {
        let i = (off + k) % n;
        let (tt, _v, f) = h.sides[i];
        let lp = h.big_edges[i];
        let ((t1, f1, _), _) = b.long_pairs[lp];
        let tr = conn.edge_transport[&lp];
        let factor = if (t1, f1) == (tt, f) { tr } else { tr.inv()? };
        acc = acc.mul(&factor);
    }
    Ok(acc)
}

/// Solve the annulus traversing transport: in framing-adapted bases both
/// hole holonomies are triangular, the conjugation equation determines the
/// off-diagonal entry, and the twist coordinate fixes the remaining scale.
fn solve_annulus_transport(
    b: &BoundaryData,
    conn: &FramedConnection,
    piece: usize,
    x_tau: C,
) -> Result<AnnulusData, ModuliError> {
    let path = pathalg::annulus_traverse_path(b, piece)?;
    let first = path.steps[0];
    let last = path.steps[path.steps.len() - 1];
    let start_side = (first.tet, first.vertex, first.enter);
    let end_side = (last.tet, last.vertex, last.exit);
    let holes = annulus_holes(b, piece);
    let (h0, h1) = (holes[0], holes[1]);
    let (h_start, h_end) = if b.holes[h0].sides.contains(&start_side) {
        (h0, h1)
    } else {
        (h1, h0)
    };
    let p_start = hole_holonomy_from(b, conn, h_start, start_side)?;
    let p_end = hole_holonomy_from(b, conn, h_end, end_side)?;
    // frames: start hexagon (t, enter) with framing at corner v
    let (f0, v0) = (first.enter, first.vertex);
    let (f1, v1) = (last.exit, last.vertex);
    let k0 = canonical_line(f0, v0);
    let k1 = canonical_line(f1, v1);
    let others = |f: u8, v: u8| -> (V2, V2) {
        let order = crate::surface::build::face_order(f);
        let ws: Vec<u8> = order.into_iter().filter(|&x| x != v).collect();
        (canonical_line(f, ws[0]), canonical_line(f, ws[1]))
    };
    let (a0, b0v) = others(f0, v0);
    let (a1, b1v) = others(f1, v1);
    let base0 = Mat2::new(k0[0], a0[0], k0[1], a0[1]);
    let base1 = Mat2::new(k1[0], a1[0], k1[1], a1[1]);
    let tri0 = base0.inv()?.mul(&p_start).mul(&base0);
    // triangular normalization: p = [[1, r],[0, lam]]
    if tri0.c.norm() > 1e-9 * (tri0.a.norm() + tri0.d.norm()) {
        return Err(ModuliError::Internal("hole holonomy does not fix the framing".into()));
    }
    let lam = tri0.d / tri0.a;
    if (lam - c(1.0, 0.0)).norm() < 1e-12 {
        return Err(ModuliError::UnipotentAnnulus(piece));
    }
    let r0 = tri0.b / tri0.a;
    // end-hole holonomy, possibly inverted to match the eigenvalue
    let mut tri1 = base1.inv()?.mul(&p_end).mul(&base1);
    if tri1.c.norm() > 1e-9 * (tri1.a.norm() + tri1.d.norm()) {
        return Err(ModuliError::Internal("hole holonomy does not fix the framing".into()));
    }
    let mut mu = tri1.d / tri1.a;
    if (mu - lam).norm() > (1.0 / mu - lam).norm() {
        tri1 = tri1.inv()?;
        mu = tri1.d / tri1.a;
    }
    if (mu - lam).norm() > 1e-8 * (1.0 + lam.norm()) {
        return Err(ModuliError::Internal(format!(
            "annulus eigenvalues disagree: {lam} vs {mu}"
        )));
    }
    let q = tri1.b / tri1.a;
    // M~ = [[1, u],[0, w]] with u (lam - 1) = p w - q... here r0 w - q
    // and w fixed by the twist coordinate
    let m_of = |w: C| -> Result<Mat2, ModuliError> {
        let u = (r0 * w - q) / (lam - c(1.0, 0.0));
        let mt = Mat2::new(c(1.0, 0.0), u, c(0.0, 0.0), w);
        Ok(base0.mul(&mt).mul(&base1.inv()?))
    };
    // x_tau(w) = <a ^ k><b ^ k><a' ^ b'> / (<a ^ b><a' ^ k><b' ^ k>) with
    // (a, b) at the start face and primes transported from the end face;
    // the k-wedges are linear in w and the numerator's <a'^b'> once, so
    // x_tau = kappa / w for a computable kappa: evaluate at w = 1.
    let probe = m_of(c(1.0, 0.0))?;
    let ap = probe.apply(a1);
    let bp = probe.apply(b1v);
    let num = wedge(a0, k0) * wedge(b0v, k0) * wedge(ap, bp);
    let den = wedge(a0, b0v) * wedge(ap, k0) * wedge(bp, k0);
    if den.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("twist extraction".into()));
    }
    let x_at_one = num / den;
    let w = x_at_one / x_tau;
    let transport = m_of(w)?;
    Ok(AnnulusData { path, transport })
}

/// Extract all coordinates of a connection.
pub fn extract_coordinates(
    b: &BoundaryData,
    conn: &FramedConnection,
) -> Result<CoordinatePoint, ModuliError> {
    let mut edge = BTreeMap::new();
    for lp in 0..b.long_pairs.len() {
        edge.insert(lp, extract_edge_coordinate(b, conn, lp)?);
    }
    let mut annulus = BTreeMap::new();
    for (piece, data) in &conn.annulus_transport {
        let first = data.path.steps[0];
        let last = data.path.steps[data.path.steps.len() - 1];
        let start_side = (first.tet, first.vertex, first.enter);
        let (f0, v0) = (first.enter, first.vertex);
        let (f1, v1) = (last.exit, last.vertex);
        let holes = annulus_holes(b, *piece);
        let h_start = if b.holes[holes[0]].sides.contains(&start_side) {
            holes[0]
        } else {
            holes[1]
        };
        let p_start = hole_holonomy_from(b, conn, h_start, start_side)?;
        let k0 = canonical_line(f0, v0);
        let k1 = canonical_line(f1, v1);
        // lambda: eigenvalue ratio of the hole holonomy on the framing
        let pk = p_start.apply(k0);
        let lam_f = if k0[0].norm() > k0[1].norm() {
            pk[0] / k0[0]
        } else {
            pk[1] / k0[1]
        };
        let x_l = p_start.det() / (lam_f * lam_f);
        // tau by the five-line cross-ratio
        let others = |f: u8, v: u8| -> (V2, V2) {
            let order = crate::surface::build::face_order(f);
            let ws: Vec<u8> = order.into_iter().filter(|&x| x != v).collect();
            (canonical_line(f, ws[0]), canonical_line(f, ws[1]))
        };
        let (a0, b0v) = others(f0, v0);
        let (a1, b1v) = others(f1, v1);
        let ap = data.transport.apply(a1);
        let bp = data.transport.apply(b1v);
        let num = wedge(a0, k0) * wedge(b0v, k0) * wedge(ap, bp);
        let den = wedge(a0, b0v) * wedge(ap, k0) * wedge(bp, k0);
        if den.norm() < 1e-300 {
            return Err(ModuliError::DegenerateConfiguration("twist extraction".into()));
        }
        annulus.insert(*piece, (x_l, num / den));
    }
    let mut torus = BTreeMap::new();
    for (piece, data) in &conn.torus_holonomy {
        let x_of = |m: &Mat2| -> Result<C, ModuliError> {
            let mk = m.apply(data.framing);
            let lam_f = if data.framing[0].norm() > data.framing[1].norm() {
                mk[0] / data.framing[0]
            } else {
                mk[1] / data.framing[1]
            };
            let det = m.det();
            if det.norm() < 1e-300 {
                return Err(ModuliError::DegenerateConfiguration("torus holonomy".into()));
            }
            Ok(lam_f * lam_f / det)
        };
        torus.insert(*piece, (x_of(&data.hol_alpha)?, x_of(&data.hol_beta)?));
    }
    Ok(CoordinatePoint { edge, annulus, torus })
}

/// A twisted abelian connection on the cover of the stage-M boundary, given
/// by values on the tetrahedron cycle basis (gamma_1..N, gamma'_1..N); the
/// fiber class has holonomy -1.
#[derive(Debug, Clone)]
pub struct AbelianConnection {
    pub values: Vec<C>,
}

impl AbelianConnection {
    pub fn num_tetrahedra(&self) -> usize {
        self.values.len() / 2
    }

    /// Holonomy of an integer combination of the basis cycles with a fiber
    /// bit.
    pub fn holonomy_row(&self, row: &[i64], fiber: u8) -> C {
        let mut v = if fiber == 1 { c(-1.0, 0.0) } else { c(1.0, 0.0) };
        for (x, &k) in self.values.iter().zip(row) {
            v *= x.powi(k as i32);
        }
        v
    }

    /// Holonomy of the edge cycle of a tetrahedron edge.
    pub fn edge_cycle_value(&self, e: TetEdge) -> C {
        let n = self.num_tetrahedra();
        match e.slot() {
            0 => self.values[e.tet],
            1 => self.values[n + e.tet],
            _ => 1.0 / (self.values[e.tet] * self.values[n + e.tet]),
        }
    }

    /// From tetrahedron shapes: x_gamma = -z, x_gamma' = -z'.
    pub fn from_shapes(shapes: &[C]) -> Self {
        let n = shapes.len();
        let mut values = vec![c(0.0, 0.0); 2 * n];
        for (i, z) in shapes.iter().enumerate() {
            values[i] = -z;
            values[n + i] = -(1.0 / (1.0 - z));
        }
        AbelianConnection { values }
    }
}

/// The non-abelianization of a twisted abelian connection on the cover of a
/// stage-M boundary: the framed PGL(2) connection whose path coordinates
/// equal the abelian holonomies. The coordinates are transported through the
/// twisted cycle classes of the canonical paths; the annulus parameters are
/// solved uniquely inside the reconstruction.
pub fn nonabelianize(
    b: &BoundaryData,
    a: &AbelianConnection,
) -> Result<FramedConnection, ModuliError> {
    if b.stage != Stage::M {
        return Err(ModuliError::Internal(
            "non-abelianization is implemented over the unglued stage".into(),
        ));
    }
    let mut edge = BTreeMap::new();
    for (lp, &((t1, f1, e1), _)) in b.long_pairs.iter().enumerate() {
        let _ = (t1, f1);
        edge.insert(lp, a.edge_cycle_value(e1));
    }
    let mut annulus = BTreeMap::new();
    let mut torus = BTreeMap::new();
    for (piece, sp) in b.summary.small_pieces.iter().enumerate() {
        match sp.kind {
            SmallPieceKind::Annulus => {
                // lambda: product of edge values around the first hole;
                // tau: abelian holonomy of the traversing class
                let holes = annulus_holes(b, piece);
                let mut xl = c(1.0, 0.0);
                for &elp in &b.holes[holes[0]].big_edges {
                    let ((_, _, e1), _) = b.long_pairs[elp];
                    xl *= a.edge_cycle_value(e1);
                }
                let p = pathalg::annulus_traverse_path(b, piece)?;
                let row = pathalg::stage_m_row(b.tri.num_tetrahedra, &p.steps);
                let two = row3_to_tet_basis(&row);
                let xt = a.holonomy_row(&two, 0);
                if (xl - c(1.0, 0.0)).norm() < 1e-12 {
                    return Err(ModuliError::UnipotentAnnulus(piece));
                }
                annulus.insert(piece, (xl, xt));
            }
            SmallPieceKind::Torus => {
                return Err(ModuliError::Internal(
                    "stage-M boundaries of tetrahedra have no torus pieces".into(),
                ));
            }
            _ => {}
        }
    }
    let point = CoordinatePoint { edge, annulus, torus: std::mem::take(&mut torus) };
    reconstruct(b, &point)
}

pub fn row3_to_tet_basis(row3: &[[i64; 3]]) -> Vec<i64> {
    let n = row3.len();
    let mut out = vec![0i64; 2 * n];
    for (i, r) in row3.iter().enumerate() {
        out[i] = r[0] - r[2];
        out[n + i] = r[1] - r[2];
    }
    out
}

/// Glue an abelian connection: values on the glued cusp tori, after checking
/// the moment-map conditions on the edge rows.
pub fn glue_abelian(
    a: &AbelianConnection,
    s: &GluingSystem,
    tol: f64,
) -> Result<Vec<(C, C)>, ModuliError> {
    let rows = s.nz.to_i64().expect("NZ entries fit i64");
    let nc = s.num_cusps;
    let mut bad = Vec::new();
    for j in 0..s.mu_classes.rows() {
        let v = a.holonomy_row(&rows[2 * nc + j], s.sign_bits[2 * nc + j]);
        if (v - c(1.0, 0.0)).norm() > tol {
            bad.push(j);
        }
    }
    if !bad.is_empty() {
        return Err(ModuliError::MomentMapViolation(bad));
    }
    Ok((0..nc)
        .map(|cusp| {
            (
                a.holonomy_row(&rows[cusp], s.sign_bits[cusp]),
                a.holonomy_row(&rows[nc + cusp], s.sign_bits[nc + cusp]),
            )
        })
        .collect())
}

/// Glue a framed PGL(2) connection on the stage-M boundary along all face
/// pairings and extract the cusp torus coordinates from the holonomies of
/// the peripheral paths.
pub fn glue_pgl2(
    t: &Triangulation,
    bm: &BoundaryData,
    conn: &FramedConnection,
    s: &GluingSystem,
    tol: f64,
) -> Result<Vec<(C, C)>, ModuliError> {
    // moment maps: the edge-row products of the extracted edge coordinates
    let point = extract_coordinates(bm, conn)?;
    let ab = tet_point_from_edges(bm, &point)?;
    glue_abelian(&ab, s, tol)?;
    // peripheral holonomies by transport composition
    let mut out = Vec::new();
    for cusp in &s.cusps {
        let hol = |p: &SmallPath| -> Result<(Mat2, V2), ModuliError> {
            holonomy_glued_path(t, bm, conn, p)
        };
        let (ha, ka) = hol(&cusp.alpha)?;
        let (hb, kb) = hol(&cusp.beta)?;
        let x_of = |m: &Mat2, k: V2| -> Result<C, ModuliError> {
            let mk = m.apply(k);
            let lam = if k[0].norm() > k[1].norm() { mk[0] / k[0] } else { mk[1] / k[1] };
            let det = m.det();
            if det.norm() < 1e-300 {
                return Err(ModuliError::DegenerateConfiguration("glued holonomy".into()));
            }
            Ok(lam * lam / det)
        };
        out.push((x_of(&ha, ka)?, x_of(&hb, kb)?));
    }
    Ok(out)
}

/// Tetrahedron-basis abelian values read off the edge coordinates of a
/// stage-M connection.
fn tet_point_from_edges(
    bm: &BoundaryData,
    point: &CoordinatePoint,
) -> Result<AbelianConnection, ModuliError> {
    let n = bm.tri.num_tetrahedra;
    let mut values = vec![c(0.0, 0.0); 2 * n];
    for (lp, &((_, _, e1), _)) in bm.long_pairs.iter().enumerate() {
        let v = point.edge[&lp];
        match e1.slot() {
            0 => values[e1.tet] = v,
            1 => values[n + e1.tet] = v,
            _ => {}
        }
    }
    if values.iter().any(|v| v.norm() < 1e-300) {
        return Err(ModuliError::Internal("missing slot coordinates".into()));
    }
    Ok(AbelianConnection { values })
}

/// Holonomy of a closed normal path on the glued-up manifold's small
/// boundary, computed from the stage-M connection and the face-pair
/// transports. Returns the holonomy in the starting hexagon frame and the
/// framing line there.
pub fn holonomy_glued_path(
    t: &Triangulation,
    bm: &BoundaryData,
    conn: &FramedConnection,
    p: &SmallPath,
) -> Result<(Mat2, V2), ModuliError> {
    assert!(p.closed, "peripheral paths are closed");
    let mut acc = Mat2::identity();
    let n = p.steps.len();
    for (k, s) in p.steps.iter().enumerate() {
        // inside the tetrahedron: from hexagon (tet, enter) to (tet, exit)
        // across the long pair of the crossed corner's edge
        if s.enter != s.exit {
            let w = (0..4u8).find(|&x| x != s.vertex && x != s.enter && x != s.exit).unwrap();
            let e = TetEdge::new(s.tet, s.vertex, w);
            let lp = bm
                .long_pairs
                .iter()
                .position(|&((t1, f1, e1), (t2, f2, e2))| {
                    (t1, e1) == (s.tet, e) && f1 == s.enter
                        || (t2, e2) == (s.tet, e) && f2 == s.enter
                })
                .ok_or_else(|| ModuliError::Internal("step edge is not a long pair".into()))?;
            let ((t1, f1, _), _) = bm.long_pairs[lp];
            let tr = conn.edge_transport[&lp];
            // the transport maps slot2-frame to slot1-frame; standing in the
            // enter-hexagon we need the factor mapping exit-frame vectors
            // into enter-frame coordinates
            let factor = if (t1, f1) == (s.tet, s.enter) { tr } else { tr.inv()? };
            acc = acc.mul(&factor);
        }
        // crossing the glued face into the next triangle
        let next = (k + 1) % n;
        let _ = next;
        let g = t
            .pairing_of(s.tet, s.exit)
            .ok_or_else(|| ModuliError::Internal("peripheral path crossed a free face".into()))?;
        let v = face_gluing_transport(g)?;
        acc = acc.mul(&v);
    }
    let k0 = canonical_line(p.steps[0].enter, p.steps[0].vertex);
    Ok((acc, k0))
}

/// The coordinate of an open path: the five-line cross-ratio of the framing
/// line along the path and the other corner lines of the two end faces,
/// transported to the start frame along the path.
pub fn extract_path_coordinate(
    b: &BoundaryData,
    conn: &FramedConnection,
    p: &SmallPath,
) -> Result<C, ModuliError> {
    assert!(!p.closed, "open paths only");
    p.validate(b)?;
    // transport from the final frame back to the start frame
    let mut acc = Mat2::identity();
    let n = p.steps.len();
    for (k, s) in p.steps.iter().enumerate() {
        if s.enter != s.exit {
            let w = (0..4u8).find(|&x| x != s.vertex && x != s.enter && x != s.exit).unwrap();
            let e = TetEdge::new(s.tet, s.vertex, w);
            let lp = b
                .long_pairs
                .iter()
                .position(|&((t1, f1, e1), (t2, f2, e2))| {
                    (t1, e1) == (s.tet, e) && f1 == s.enter
                        || (t2, e2) == (s.tet, e) && f2 == s.enter
                })
                .ok_or_else(|| ModuliError::Internal("step edge is not a long pair".into()))?;
            let ((t1, f1, _), _) = b.long_pairs[lp];
            let tr = conn.edge_transport[&lp];
            let factor = if (t1, f1) == (s.tet, s.enter) { tr } else { tr.inv()? };
            acc = acc.mul(&factor);
        }
        if k + 1 < n {
            let g = b
                .tri
                .glue_state(s.tet, s.exit, b.stage)
                .1
                .ok_or_else(|| ModuliError::Internal("open path crossed a free side".into()))?;
            acc = acc.mul(&face_gluing_transport(g)?);
        }
    }
    let first = p.steps[0];
    let last = p.steps[n - 1];
    let (f0, v0) = (first.enter, first.vertex);
    let (f1, v1) = (last.exit, last.vertex);
    let k0 = canonical_line(f0, v0);
    let others = |f: u8, v: u8| -> (V2, V2) {
        let order = crate::surface::build::face_order(f);
        let ws: Vec<u8> = order.into_iter().filter(|&x| x != v).collect();
        (canonical_line(f, ws[0]), canonical_line(f, ws[1]))
    };
    let (a0, b0v) = others(f0, v0);
    let (a1, b1v) = others(f1, v1);
    // the framing must be flat along the path
    let k1t = acc.apply(canonical_line(f1, v1));
    if wedge(k1t, k0).norm() > 1e-8 * (k1t[0].norm() + k1t[1].norm()) {
        return Err(ModuliError::Internal("framing line is not flat along the path".into()));
    }
    let ap = acc.apply(a1);
    let bp = acc.apply(b1v);
    let num = wedge(a0, k0) * wedge(b0v, k0) * wedge(ap, bp);
    let den = wedge(a0, b0v) * wedge(ap, k0) * wedge(bp, k0);
    if den.norm() < 1e-300 {
        return Err(ModuliError::DegenerateConfiguration("five-line extraction".into()));
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Poisson brackets and K2 forms
// ---------------------------------------------------------------------------

/// The Poisson bracket of the log coordinates of two twisted cycles: their
/// intersection number.
pub fn poisson_bracket(
    eps: &IntMatrix,
    x: &TwistedCycle,
    y: &TwistedCycle,
) -> Result<BigInt, oddhom::OddhomError> {
    pathalg::intersection(eps, x, y)
}

/// A formal rational combination of wedges of coordinate symbols over a
/// symbol basis: the element `sum over ordered pairs (i, j) of
/// coeffs[i][j] x_i ^ x_j` with an antisymmetric coefficient matrix.
#[derive(Debug, Clone)]
pub struct FormalWedge {
    pub symbols: Vec<String>,
    pub coeffs: Vec<Vec<BigRational>>,
}

impl FormalWedge {
    pub fn is_antisymmetric(&self) -> bool {
        let n = self.symbols.len();
        (0..n).all(|i| (0..n).all(|j| self.coeffs[i][j] == -self.coeffs[j][i].clone()))
    }
}

fn rational_inverse(m: &IntMatrix) -> Result<Vec<Vec<BigRational>>, ModuliError> {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..2 * n)
                .map(|j| {
                    if j < n {
                        BigRational::from(m[(i, j)].clone())
                    } else if j - n == i {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or(ModuliError::SingularForm)?;
        a.swap(col, piv);
        let d = a[col][col].clone();
        for j in 0..2 * n {
            a[col][j] = &a[col][j] / &d;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..2 * n {
                    let t = &f * &a[col][j];
                    a[r][j] = &a[r][j] - &t;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// The K2 avatar of the symplectic form on a coordinate patch:
/// `1/2 sum_ij (eps^{-1})^{ij} x_i ^ x_j` over the basis symbols.
pub fn k2_form(eps: &IntMatrix, symbols: &[String]) -> Result<FormalWedge, ModuliError> {
    let inv = rational_inverse(eps)?;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let coeffs = inv
        .into_iter()
        .map(|row| row.into_iter().map(|x| &half * &x).collect())
        .collect();
    Ok(FormalWedge { symbols: symbols.to_vec(), coeffs })
}

/// Evaluate eta of a formal wedge at a point along a tangent direction:
/// eta(a ^ b) = log|a| d arg b - log|b| d arg a.
pub fn eta(
    w: &FormalWedge,
    point: &[C],
    tangent: &[C],
) -> Result<f64, ModuliError> {
    let n = w.symbols.len();
    if point.len() != n || tangent.len() != n {
        return Err(ModuliError::Internal("eta dimension mismatch".into()));
    }
    // d log x_i [v] = v_i / x_i; d arg = Im of that, d log|.| = Re
    let dlog: Vec<C> = point.iter().zip(tangent).map(|(x, v)| v / x).collect();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let q = &w.coeffs[i][j];
            if q.is_zero() {
                continue;
            }
            let qf = rat_to_f64(q);
            acc += qf * (point[i].norm().ln() * dlog[j].im - point[j].norm().ln() * dlog[i].im);
        }
    }
    Ok(acc)
}

fn rat_to_f64(q: &BigRational) -> f64 {
    let n = q.numer();
    let d = q.denom();
    let nf = n.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = d.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

/// Exact rational check that setting the moment-map coordinates to one
/// reduces the K2 form of the tetrahedron lattice to the K2 form of the
/// glued boundary, through the q identification.
pub fn k2_reduction_check(s: &GluingSystem) -> Result<(), ModuliError> {
    let n = s.num_tetrahedra;
    let nc = s.num_cusps;
    let nmu = s.mu_classes.rows();
    // ambient form: J on the tetrahedron basis
    let j = crate::gluesys::j_matrix(n);
    let w = k2_form(&j, &(0..2 * n).map(|i| format!("x{i}")).collect::<Vec<_>>())?;
    // adapted basis rows: g(alpha), g(beta), g(mu) (drop the dependent ones),
    // then eta_k duals: solve <g mu_j, eta_k> = delta over Q and correct eta
    // to pair trivially with the g(K) rows and among themselves
    let rows = s.nz.to_i64().expect("NZ fits i64");
    let mut base: Vec<Vec<BigRational>> = Vec::new();
    for r in rows.iter().take(2 * nc) {
        base.push(r.iter().map(|&x| BigRational::from(BigInt::from(x))).collect());
    }
    let mut mu_rows: Vec<Vec<BigRational>> = Vec::new();
    for (jx, r) in rows.iter().enumerate().skip(2 * nc) {
        if s.dropped_edge_rows.contains(&(jx - 2 * nc)) {
            continue;
        }
        mu_rows.push(r.iter().map(|&x| BigRational::from(BigInt::from(x))).collect());
    }
    let jq: Vec<Vec<BigRational>> = (0..2 * n)
        .map(|i| (0..2 * n).map(|k| BigRational::from(j[(i, k)].clone())).collect())
        .collect();
    let pair = |x: &[BigRational], y: &[BigRational]| -> BigRational {
        let mut acc = BigRational::zero();
        for i in 0..x.len() {
            if x[i].is_zero() {
                continue;
            }
            for k in 0..y.len() {
                if jq[i][k].is_zero() || y[k].is_zero() {
                    continue;
                }
                acc = &acc + &(&(&x[i] * &jq[i][k]) * &y[k]);
            }
        }
        acc
    };
    // duals eta_j: solve the full rational system E = J^{-1}-style: find
    // vectors with <g mu_j, eta_k> = delta_jk, <g gamma_i, eta_k> = 0,
    // <eta, eta> = 0 via symplectic Gram-Schmidt over Q
    let m = mu_rows.len();
    // start from any solutions of the linear conditions
    // build matrix of constraints: rows: (mu_j J), (base_i J)
    let mut constraints: Vec<Vec<BigRational>> = Vec::new();
    for r in mu_rows.iter().chain(base.iter()) {
        let mut row = vec![BigRational::zero(); 2 * n];
        for col in 0..2 * n {
            let mut acc = BigRational::zero();
            for i in 0..2 * n {
                if !r[i].is_zero() && !jq[i][col].is_zero() {
                    acc = &acc + &(&r[i] * &jq[i][col]);
                }
            }
            row[col] = acc;
        }
        constraints.push(row);
    }
    let mut etas: Vec<Vec<BigRational>> = Vec::new();
    for jx in 0..m {
        // solve constraints * eta^T = e_jx (first m entries), 0 after
        let mut rhs = vec![BigRational::zero(); constraints.len()];
        rhs[jx] = BigRational::one();
        let eta_v = solve_rational(&constraints, &rhs).ok_or(ModuliError::SingularForm)?;
        etas.push(eta_v);
    }
    // make <eta_j, eta_k> = 0 by subtracting mu-corrections:
    // eta_j' = eta_j - sum_k c_{jk} mu_k with c chosen from the pairings
    for jx in 0..m {
        for kx in 0..m {
            if kx == jx {
                continue;
            }
            let p = pair(&etas[jx], &etas[kx]);
            if !p.is_zero() && kx > jx {
                // <eta_j - p mu_k, eta_k> = p - p <mu_k... <mu_k, eta_k> = 1
                let correction: Vec<BigRational> =
                    mu_rows[kx].iter().map(|x| x * &p).collect();
                for (a, b) in etas[jx].iter_mut().zip(correction) {
                    *a = &*a - &b;
                }
            }
        }
    }
    for jx in 0..m {
        for kx in 0..m {
            let want = if jx == kx { BigRational::one() } else { BigRational::zero() };
            if pair(&mu_rows[jx], &etas[kx]) != want {
                return Err(ModuliError::Internal("eta duals failed".into()));
            }
            if !pair(&etas[jx], &etas[kx]).is_zero() {
                return Err(ModuliError::Internal("eta self pairings persist".into()));
            }
        }
        for bse in &base {
            if !pair(bse, &etas[jx]).is_zero() {
                return Err(ModuliError::Internal("eta pairs with cusp rows".into()));
            }
        }
    }
    // full basis P: rows = base (2nc), mu (m), etas (m)
    let mut p_rows: Vec<Vec<BigRational>> = Vec::new();
    p_rows.extend(base.iter().cloned());
    p_rows.extend(mu_rows.iter().cloned());
    p_rows.extend(etas.iter().cloned());
    if p_rows.len() != 2 * n {
        return Err(ModuliError::Internal(format!(
            "adapted basis has {} rows, expected {}",
            p_rows.len(),
            2 * n
        )));
    }
    // transform the wedge: new symbols u = P x (as cycle classes), so the
    // coefficient matrix W becomes (P^{-T}) W (P^{-1}); express W in u-space
    let p_int_scaled = rational_matrix_inverse(&p_rows).ok_or(ModuliError::SingularForm)?;
    // W_u = P^{-T} W P^{-1}
    let wq = &w.coeffs;
    let nn = 2 * n;
    let mut wu = vec![vec![BigRational::zero(); nn]; nn];
    for i in 0..nn {
        for jj in 0..nn {
            let mut acc = BigRational::zero();
            for aa in 0..nn {
                if p_int_scaled[aa][i].is_zero() {
                    continue;
                }
                for bb in 0..nn {
                    if wq[aa][bb].is_zero() || p_int_scaled[bb][jj].is_zero() {
                        continue;
                    }
                    acc = &acc + &(&(&p_int_scaled[aa][i] * &wq[aa][bb]) * &p_int_scaled[bb][jj]);
                }
            }
            wu[i][jj] = acc;
        }
    }
    // setting u_mu = 1 kills all wedges involving mu symbols (indices
    // 2nc..2nc+m); the surviving block on the cusp symbols must equal the K2
    // form of the glued boundary, and the eta-eta block must vanish
    let m0 = 2 * nc;
    for i in m0 + m..nn {
        for jj in m0 + m..nn {
            if !wu[i][jj].is_zero() {
                return Err(ModuliError::Internal(
                    "eta wedge terms survive the reduction".into(),
                ));
            }
        }
        for jj in 0..m0 {
            if !wu[i][jj].is_zero() || !wu[jj][i].is_zero() {
                return Err(ModuliError::Internal(
                    "cusp-eta cross terms survive the reduction".into(),
                ));
            }
        }
    }
    // expected: K2 form of the cusp lattice with <alpha, beta> = 2
    let mut eps_p = IntMatrix::zeros(m0, m0);
    for cusp in 0..nc {
        eps_p[(cusp, nc + cusp)] = BigInt::from(2);
        eps_p[(nc + cusp, cusp)] = BigInt::from(-2);
    }
    let wprime = k2_form(&eps_p, &(0..m0).map(|i| format!("y{i}")).collect::<Vec<_>>())?;
    for i in 0..m0 {
        for jj in 0..m0 {
            if wu[i][jj] != wprime.coeffs[i][jj] {
                return Err(ModuliError::Internal(format!(
                    "reduced K2 form mismatch at ({i}, {jj}): {} vs {}",
                    wu[i][jj], wprime.coeffs[i][jj]
                )));
            }
        }
    }
    Ok(())
}

fn solve_rational(a: &[Vec<BigRational>], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    // solve a x = rhs for one solution (least constrained), a is m x n
    let m = a.len();
    let n = if m == 0 { return None } else { a[0].len() };
    let mut aug: Vec<Vec<BigRational>> = a
        .iter()
        .zip(rhs)
        .map(|(row, r)| {
            let mut v = row.clone();
            v.push(r.clone());
            v
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..n {
        if r >= m {
            break;
        }
        let piv = (r..m).find(|&i| !aug[i][col].is_zero());
        let Some(piv) = piv else { continue };
        aug.swap(r, piv);
        let d = aug[r][col].clone();
        for j in 0..=n {
            aug[r][j] = &aug[r][j] / &d;
        }
        for i in 0..m {
            if i != r && !aug[i][col].is_zero() {
                let f = aug[i][col].clone();
                for j in 0..=n {
                    let t = &f * &aug[r][j];
                    aug[i][j] = &aug[i][j] - &t;
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    // consistency
    for i in r..m {
        if !aug[i][n].is_zero() {
            return None;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for (row, &col) in pivot_cols.iter().enumerate() {
        x[col] = aug[row][n].clone();
    }
    Some(x)
}

fn rational_matrix_inverse(rows: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = rows.len();
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|row| {
            let mut v = row.clone();
            v.extend(vec![BigRational::zero(); n]);
            v
        })
        .collect();
    for i in 0..n {
        a[i][n + i] = BigRational::one();
    }
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let d = a[col][col].clone();
        for j in 0..2 * n {
            a[col][j] = &a[col][j] / &d;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..2 * n {
                    let t = &f * &a[col][j];
                    a[r][j] = &a[r][j] - &t;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}
