//! Odd and twisted homology of canonical covers: quasi-projections, cellular
//! and presentation-based computations of H1^-, and the intersection form.

use crate::surface::complex::{CoverComplex, PolygonComplex};
use crate::surface::{BoundaryData, SmallPieceKind};
use crate::zlat::{self, IntMatrix, LatticeQuotient};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

#[derive(Debug, thiserror::Error)]
pub enum OddhomError {
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("cycles use different bases: {0} vs {1}")]
    BasisMismatch(String, String),
    #[error("small boundary is not abelian: {0}")]
    NonAbelianSmallBoundary(String),
}

/// First homology of a polygon complex, with a chosen basis of cycle
/// representatives and exact reduction of arbitrary cycles to basis
/// coordinates.
pub struct H1 {
    pub rank: usize,
    /// rows: basis cycles in edge coordinates
    pub basis: Vec<Vec<i64>>,
    kernel: IntMatrix,
    quotient: LatticeQuotient,
}

pub fn h1(c: &PolygonComplex) -> Result<H1, OddhomError> {
    let d1 = c.boundary_1();
    let d2 = c.boundary_2();
    let kernel = zlat::kernel(&d1);
    let x = zlat::solve_left(&kernel, &d2)
        .ok_or_else(|| OddhomError::Internal("boundaries are not cycles".into()))?;
    let q = zlat::quotient_ambient(&x);
    if !q.torsion.is_empty() {
        return Err(OddhomError::Internal(
            "H1 of an oriented surface complex has torsion".into(),
        ));
    }
    let lifts = q.lift_basis.mul(&kernel);
    let basis = lifts
        .to_i64()
        .ok_or_else(|| OddhomError::Internal("basis cycle exceeds i64".into()))?;
    Ok(H1 { rank: q.free_rank, basis, kernel, quotient: q })
}

impl H1 {
    /// Coordinates of a 1-cycle in the chosen basis.
    pub fn reduce(&self, cycle: &[i64]) -> Result<Vec<BigInt>, OddhomError> {
        let v = IntMatrix::from_rows_i64(&[cycle.to_vec()]);
        let y = zlat::solve_left(&self.kernel, &v)
            .ok_or_else(|| OddhomError::Internal("chain is not a cycle".into()))?;
        let (free, tors) = self.quotient.reduce(&y);
        if !tors.iter().all(|t| t.is_zero()) {
            return Err(OddhomError::Internal("torsion coordinates in a free group".into()));
        }
        Ok(free.row(0))
    }
}

/// The quasi-projections P+- = 1 +- sigma_* on H1 of the cover, as exact
/// integer matrices in a chosen basis, with their defining identities
/// verified.
pub struct QuasiProjections {
    pub rank: usize,
    pub p_plus: IntMatrix,
    pub p_minus: IntMatrix,
    pub sigma: IntMatrix,
}

pub fn quasi_projections(cov: &CoverComplex) -> Result<QuasiProjections, OddhomError> {
    let h = h1(&cov.cover)?;
    let n = h.rank;
    let mut sigma_rows = Vec::with_capacity(n);
    for b in &h.basis {
        let img = cov.deck_chain(b);
        let coords = h.reduce(&img)?;
        sigma_rows.push(coords);
    }
    let mut sigma = IntMatrix::zeros(n, n);
    for (i, row) in sigma_rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            sigma[(i, j)] = v.clone();
        }
    }
    let id = IntMatrix::identity(n);
    let p_plus = {
        let mut m = sigma.clone();
        for i in 0..n {
            m[(i, i)] += 1;
        }
        m
    };
    let p_minus = {
        let mut m = sigma.neg();
        for i in 0..n {
            m[(i, i)] += 1;
        }
        m
    };
    // identities P^2 = 2P, P+ P- = 0, P+ + P- = 2
    let two_p = |p: &IntMatrix| {
        let mut m = p.clone();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = &p[(i, j)] * 2;
            }
        }
        m
    };
    if p_plus.mul(&p_plus) != two_p(&p_plus) || p_minus.mul(&p_minus) != two_p(&p_minus) {
        return Err(OddhomError::Internal("P^2 = 2P fails".into()));
    }
    if !p_plus.mul(&p_minus).is_zero() {
        return Err(OddhomError::Internal("P+ P- = 0 fails".into()));
    }
    if sigma.mul(&sigma) != id {
        return Err(OddhomError::Internal("deck involution squared is not 1".into()));
    }
    Ok(QuasiProjections { rank: n, p_plus, p_minus, sigma })
}

/// Odd homology of the cover computed from the cellular chain complex
/// restricted to odd lifts of base cells, with the fundamental-chain
/// correction making the relation lattice exactly `im d2 /\ C1^-`.
pub struct OddCellular {
    pub free_rank: usize,
    /// torsion of the naive quotient; reported, never silently dropped.
    pub torsion: Vec<BigInt>,
    /// rows: base-edge chains whose odd lifts form the basis of H1^-
    pub basis_chains: Vec<Vec<i64>>,
    pub eps: IntMatrix,
    kernel: IntMatrix,
    quotient: LatticeQuotient,
}

pub fn odd_homology_cellular(b: &BoundaryData) -> Result<OddCellular, OddhomError> {
    let cov = &b.cover;
    let base = &cov.base;
    let cover = &cov.cover;
    let ne = base.num_edges;

    // boundary of the odd lift of each base edge, as a matrix over cover
    // vertices
    let d1_cov = cover.boundary_1();
    let mut d1m = IntMatrix::zeros(ne, cover.num_vertices);
    for e in 0..ne {
        let e0 = crate::surface::complex::edge_lift(e, 0, ne);
        let e1 = crate::surface::complex::edge_lift(e, 1, ne);
        for v in 0..cover.num_vertices {
            d1m[(e, v)] = &d1_cov[(e0, v)] - &d1_cov[(e1, v)];
        }
    }
    let kernel = zlat::kernel(&d1m);

    // relations: odd lifts of 2-cells, plus one half-fundamental-chain
    // boundary per base component
    let d2_cov = cover.boundary_2();
    let np = base.num_polygons();
    let odd_coords = |row: &[BigInt]| -> Result<Vec<BigInt>, OddhomError> {
        let mut out = Vec::with_capacity(ne);
        for e in 0..ne {
            let c0 = &row[crate::surface::complex::edge_lift(e, 0, ne)];
            let c1 = &row[crate::surface::complex::edge_lift(e, 1, ne)];
            if *c0 != -c1.clone() {
                return Err(OddhomError::Internal("chain is not odd".into()));
            }
            out.push(c0.clone());
        }
        Ok(out)
    };
    let mut rel_rows: Vec<Vec<BigInt>> = Vec::new();
    for p in 0..np {
        let r0 = d2_cov.row(crate::surface::complex::polygon_lift(p, 0, np));
        let r1 = d2_cov.row(crate::surface::complex::polygon_lift(p, 1, np));
        let diff: Vec<BigInt> = r0.iter().zip(&r1).map(|(a, b)| a - b).collect();
        rel_rows.push(odd_coords(&diff)?);
    }
    let (pid, ncomp) = base.components();
    for c in 0..ncomp {
        let mut half = vec![BigInt::zero(); 2 * ne];
        for p in 0..np {
            if pid[p] == c {
                let r = d2_cov.row(crate::surface::complex::polygon_lift(p, 1, np));
                for (k, v) in half.iter_mut().zip(r) {
                    *k += v;
                }
            }
        }
        rel_rows.push(odd_coords(&half)?);
    }
    let mut relations = IntMatrix::zeros(rel_rows.len(), ne);
    for (i, row) in rel_rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            relations[(i, j)] = v.clone();
        }
    }

    let q = zlat::quotient(&kernel, &relations)
        .map_err(|e| OddhomError::Internal(format!("odd quotient: {e}")))?;
    let basis_chains = q
        .lift_basis
        .to_i64()
        .ok_or_else(|| OddhomError::Internal("odd basis exceeds i64".into()))?;

    // intersection form via the cover pairing of odd lifts
    let cycles: Vec<Vec<i64>> = basis_chains.iter().map(|c| cov.odd_lift(c)).collect();
    let eps = cover.intersection_matrix(&cycles);
    if !eps.is_skew_symmetric() {
        return Err(OddhomError::Internal("odd intersection form is not skew".into()));
    }
    Ok(OddCellular {
        free_rank: q.free_rank,
        torsion: q.torsion.clone(),
        basis_chains,
        eps,
        kernel,
        quotient: q,
    })
}

impl OddCellular {
    /// Class of a base-edge chain whose odd lift is closed.
    pub fn reduce_chain(&self, chain: &[i64]) -> Result<Vec<BigInt>, OddhomError> {
        let v = IntMatrix::from_rows_i64(&[chain.to_vec()]);
        if zlat::solve_left(&self.kernel, &v).is_none() {
            return Err(OddhomError::Internal("odd lift is not closed".into()));
        }
        let (free, tors) = self.quotient.reduce(&v);
        if !tors.iter().all(|t| t.is_zero()) {
            return Err(OddhomError::Internal("class hits reported torsion".into()));
        }
        Ok(free.row(0))
    }
}

/// Tag of a named generator in the presentation of H1^-.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum GenTag {
    /// edge cycle of a big edge of t2d (long pair id)
    EdgeCycle(usize),
    /// girth class of a small annulus component
    AnnulusLambda(usize),
    /// traversing class of a small annulus component
    AnnulusTau(usize),
    TorusA(usize),
    TorusB(usize),
    /// defect cycle (stage-aware generating set)
    DefectMu(usize),
}

/// Presentation of H1^-(Sigma) by tagged generators and relations, with the
/// intersection form on generators from the combinatorial sign table, and a
/// free basis extracted by Smith normal form.
pub struct OddBasis {
    pub generators: Vec<GenTag>,
    pub relations: IntMatrix,
    pub eps_generators: IntMatrix,
    pub free_rank: usize,
    pub torsion: Vec<BigInt>,
    /// rows over generators
    pub lift_basis: IntMatrix,
    pub eps_basis: IntMatrix,
    quotient: LatticeQuotient,
}

impl OddBasis {
    pub fn reduce_generator_combo(&self, combo: &[i64]) -> Vec<BigInt> {
        let v = IntMatrix::from_rows_i64(&[combo.to_vec()]);
        let (free, _tors) = self.quotient.reduce(&v);
        free.row(0)
    }
}

/// The presentation route: generators and relations read off the boundary
/// decomposition, per the standard small-boundary presentation. Small tori
/// contribute abstract A/B generator pairs with pairing 2, annuli contribute
/// lambda and tau, and every hole bounded by a disc or annulus imposes its
/// edge-sum relation. The tau rows of the sign table are realized by the
/// canonical traversing paths.
pub fn odd_homology_presentation(b: &BoundaryData) -> Result<OddBasis, OddhomError> {
    if !b.defects.is_empty() {
        return Err(OddhomError::NonAbelianSmallBoundary(
            "presentation route requires a defect-free stage".into(),
        ));
    }
    let mut generators: Vec<GenTag> = Vec::new();
    for i in 0..b.long_pairs.len() {
        generators.push(GenTag::EdgeCycle(i));
    }
    for (ci, piece) in b.summary.small_pieces.iter().enumerate() {
        match piece.kind {
            SmallPieceKind::Disc | SmallPieceKind::Sphere => {}
            SmallPieceKind::Annulus => {
                generators.push(GenTag::AnnulusLambda(ci));
                generators.push(GenTag::AnnulusTau(ci));
            }
            SmallPieceKind::Torus => {
                generators.push(GenTag::TorusA(ci));
                generators.push(GenTag::TorusB(ci));
            }
            SmallPieceKind::Other => {
                return Err(OddhomError::NonAbelianSmallBoundary(format!(
                    "small piece {ci} has euler characteristic {} with {} boundary circles",
                    piece.euler,
                    piece.big_circles + piece.defect_circles
                )));
            }
        }
    }
    let ng = generators.len();
    let pos = |tag: &GenTag| generators.iter().position(|g| g == tag).unwrap();

    // relations from holes: the edge sum around a disc vanishes; the sums
    // around the two ends of an annulus are lambda and -lambda
    let mut rel_rows: Vec<Vec<i64>> = Vec::new();
    let mut holes_of: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (hi, h) in b.holes.iter().enumerate() {
        holes_of.entry(h.small_component).or_default().push(hi);
    }
    for (ci, piece) in b.summary.small_pieces.iter().enumerate() {
        let empty = Vec::new();
        let holes = holes_of.get(&ci).unwrap_or(&empty);
        match piece.kind {
            SmallPieceKind::Disc => {
                if holes.len() != 1 {
                    return Err(OddhomError::Internal("disc with wrong hole count".into()));
                }
                let mut row = vec![0i64; ng];
                for &e in &b.holes[holes[0]].big_edges {
                    row[e] += 1;
                }
                rel_rows.push(row);
            }
            SmallPieceKind::Annulus => {
                if holes.len() != 2 {
                    return Err(OddhomError::Internal("annulus with wrong hole count".into()));
                }
                let lam = pos(&GenTag::AnnulusLambda(ci));
                for (k, &hi) in holes.iter().enumerate() {
                    let mut row = vec![0i64; ng];
                    for &e in &b.holes[hi].big_edges {
                        row[e] += 1;
                    }
                    row[lam] += if k == 0 { -1 } else { 1 };
                    rel_rows.push(row);
                }
            }
            _ => {}
        }
    }
    let relations = if rel_rows.is_empty() {
        IntMatrix::zeros(0, ng)
    } else {
        IntMatrix::from_rows_i64(&rel_rows)
    };

    // pairing table on generators
    let mut eps = vec![vec![0i64; ng]; ng];
    // gamma-gamma: +1 per shared face where the second edge occurs
    // counter-clockwise after the first
    for (tt, f) in &b.summary.big_faces {
        let [a, c, d] = crate::surface::build::face_order(*f);
        let eids: Vec<usize> = [(a, c), (c, d), (d, a)]
            .into_iter()
            .map(|(x, y)| {
                let e = crate::tri::TetEdge::new(*tt, x, y);
                b.long_pairs
                    .iter()
                    .position(|&(s1, s2)| s1 == (*tt, *f, e) || s2 == (*tt, *f, e))
                    .expect("face edge is a long pair")
            })
            .collect();
        for i in 0..3 {
            let (e1, e2) = (eids[i], eids[(i + 1) % 3]);
            eps[e1][e2] += 1;
            eps[e2][e1] -= 1;
        }
    }
    // torus blocks
    for (ci, piece) in b.summary.small_pieces.iter().enumerate() {
        if piece.kind == SmallPieceKind::Torus {
            let (ai, bi) = (pos(&GenTag::TorusA(ci)), pos(&GenTag::TorusB(ci)));
            eps[ai][bi] = 2;
            eps[bi][ai] = -2;
        }
    }
    // tau rows from the canonical traversing paths, paired cellularly
    let tau_pieces: Vec<usize> = b
        .summary
        .small_pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.kind == SmallPieceKind::Annulus)
        .map(|(i, _)| i)
        .collect();
    if !tau_pieces.is_empty() {
        let mut chains: std::collections::BTreeMap<usize, Vec<i64>> = Default::default();
        for &ci in &tau_pieces {
            let p = crate::pathalg::annulus_traverse_path(b, ci)
                .map_err(|e| OddhomError::Internal(format!("tau path: {e}")))?;
            let c = crate::pathalg::path_chain(b, &p)
                .map_err(|e| OddhomError::Internal(format!("tau chain: {e}")))?;
            chains.insert(ci, c);
        }
        let pair = |x: &[i64], y: &[i64]| -> i64 {
            let lx = b.cover.odd_lift(x);
            let ly = b.cover.odd_lift(y);
            b.cover.cover.intersection(&lx, &ly)
        };
        for &ci in &tau_pieces {
            let ti = pos(&GenTag::AnnulusTau(ci));
            let tau = &chains[&ci];
            for (gj, tag) in generators.iter().enumerate() {
                let v = match tag {
                    GenTag::EdgeCycle(e) => pair(tau, &big_edge_chain(b, *e)),
                    GenTag::AnnulusTau(cj) if *cj != ci => pair(tau, &chains[cj]),
                    _ => continue,
                };
                eps[ti][gj] = v;
                eps[gj][ti] = -v;
            }
        }
        // lambda rows follow from the relation: lambda = edge sum around the
        // first hole of the annulus
        for &ci in &tau_pieces {
            let li = pos(&GenTag::AnnulusLambda(ci));
            let his = &holes_of[&ci];
            let mut row = vec![0i64; ng];
            for &e in &b.holes[his[0]].big_edges {
                for (j, val) in eps[e].iter().enumerate() {
                    row[j] += val;
                }
            }
            // lambda's pairing against itself stays zero by skewness
            for (j, v) in row.iter().enumerate() {
                if j != li {
                    eps[li][j] = *v;
                    eps[j][li] = -*v;
                }
            }
        }
    }
    let eps_generators = IntMatrix::from_rows_i64(&eps);
    if !eps_generators.is_skew_symmetric() {
        return Err(OddhomError::Internal("generator pairing is not skew".into()));
    }

    let q = zlat::quotient(&IntMatrix::identity(ng), &relations)
        .map_err(|e| OddhomError::Internal(format!("presentation quotient: {e}")))?;
    let lift = q.lift_basis.clone();
    let eps_basis = lift.mul(&eps_generators).mul(&lift.transpose());
    // the pairing must vanish on relations for the form to descend
    let chk = relations.mul(&eps_generators).mul(&lift.transpose());
    if !chk.is_zero() {
        return Err(OddhomError::Internal(
            "generator pairing does not descend to the quotient".into(),
        ));
    }
    Ok(OddBasis {
        generators,
        relations,
        eps_generators,
        free_rank: q.free_rank,
        torsion: q.torsion.clone(),
        lift_basis: lift,
        eps_basis,
        quotient: q,
    })
}

/// The dual chain of a big edge of t2d: the two cut spokes joined at the
/// long-side midpoint, from the first hexagon's branch point to the second's.
/// The relative sign of the second spoke depends on how the sheets of the
/// cover meet at the midpoint; it is chosen so the odd lift closes up.
pub fn big_edge_chain(b: &BoundaryData, long_pair: usize) -> Vec<i64> {
    let [s1, s2] = b.big_edge_spokes[long_pair];
    let mut chain = vec![0i64; b.complex.num_edges];
    chain[s1] += 1;
    chain[s2] -= 1;
    if !odd_lift_closes(b, &chain) {
        chain[s2] += 2;
        debug_assert!(odd_lift_closes(b, &chain));
    }
    chain
}

/// Whether the odd lift of a base chain is a 1-cycle of the cover.
pub fn odd_lift_closes(b: &BoundaryData, chain: &[i64]) -> bool {
    let lift = b.cover.odd_lift(chain);
    let d1 = b.cover.cover.boundary_1();
    let mut bd = vec![BigInt::zero(); b.cover.cover.num_vertices];
    for (e, &k) in lift.iter().enumerate() {
        if k != 0 {
            for (v, acc) in bd.iter_mut().enumerate() {
                *acc += &d1[(e, v)] * k;
            }
        }
    }
    bd.iter().all(|x| x.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::surface::build_boundary;
    use crate::tri::Stage;
    use num_bigint::BigInt;

    #[test]
    fn tetrahedron_cellular_rank_and_form() {
        let t = fixtures::single_tetrahedron();
        let b = build_boundary(&t, Stage::M).unwrap();
        let odd = odd_homology_cellular(&b).unwrap();
        assert_eq!(odd.free_rank, 2);
        assert!(odd.torsion.is_empty());
        // the form is unimodular skew of rank 2
        assert_eq!(zlat::det_abs(&odd.eps), BigInt::from(1));
    }

    #[test]
    fn quasi_projection_identities() {
        for (t, stage) in [
            (fixtures::single_tetrahedron(), Stage::M),
            (fixtures::figure_eight(), Stage::M0),
            (fixtures::figure_eight(), Stage::Mprime),
            (fixtures::annulus_fixture(), Stage::Mprime),
        ] {
            let b = build_boundary(&t, stage).unwrap();
            // quasi_projections verifies P^2 = 2P, P+P- = 0, sigma^2 = 1
            let qp = quasi_projections(&b.cover).unwrap();
            // P+ + P- = 2
            let sum = {
                let mut m = qp.p_plus.clone();
                for i in 0..qp.rank {
                    for j in 0..qp.rank {
                        m[(i, j)] = &qp.p_plus[(i, j)] + &qp.p_minus[(i, j)];
                    }
                }
                m
            };
            let mut two = IntMatrix::zeros(qp.rank, qp.rank);
            for i in 0..qp.rank {
                two[(i, i)] = BigInt::from(2);
            }
            assert_eq!(sum, two, "{} {:?}", t.name, stage);
        }
    }

    #[test]
    fn tetrahedron_p_plus_vanishes() {
        // all of H1 of the tetrahedron cover is odd
        let t = fixtures::single_tetrahedron();
        let b = build_boundary(&t, Stage::M).unwrap();
        let qp = quasi_projections(&b.cover).unwrap();
        assert_eq!(qp.rank, 2);
        assert!(qp.p_plus.is_zero());
    }

    #[test]
    fn disconnected_cover_p_plus_swaps_and_sums() {
        // on the trivial double cover of the cusp torus, sigma swaps the two
        // sheet copies, so P+ has rank 2 and P- has rank 2
        let t = fixtures::figure_eight();
        let b = build_boundary(&t, Stage::Mprime).unwrap();
        let qp = quasi_projections(&b.cover).unwrap();
        assert_eq!(qp.rank, 4);
        assert_eq!(zlat::rank(&qp.p_plus), 2);
        assert_eq!(zlat::rank(&qp.p_minus), 2);
    }

    #[test]
    fn m0_stage_has_rank_two_n() {
        let t = fixtures::figure_eight();
        let b = build_boundary(&t, Stage::M0).unwrap();
        let odd = odd_homology_cellular(&b).unwrap();
        assert_eq!(odd.free_rank, 4);
        assert!(odd.torsion.is_empty());
        // nondegenerate over Q
        assert!(zlat::det_abs(&odd.eps) != BigInt::from(0));
    }

    #[test]
    fn small_torus_doubles_the_intersection_form() {
        let t = fixtures::figure_eight();
        let b = build_boundary(&t, Stage::Mprime).unwrap();
        let odd = odd_homology_cellular(&b).unwrap();
        assert_eq!(odd.free_rank, 2);
        // the form is 2 times a unimodular skew form
        assert_eq!(zlat::det_abs(&odd.eps), BigInt::from(4));
        let e = odd.eps.to_i64().unwrap();
        assert_eq!(e[0][1].abs(), 2);
    }

    #[test]
    fn presentation_tetrahedron_matches_cellular() {
        let t = fixtures::single_tetrahedron();
        let b = build_boundary(&t, Stage::M).unwrap();
        let pres = odd_homology_presentation(&b).unwrap();
        assert_eq!(pres.free_rank, 2);
        assert_eq!(pres.torsion, vec![BigInt::from(2)], "opposite-edge identification is 2-torsion in the bare presentation");
        // gamma, gamma', gamma'' pair cyclically with +1: find three edges
        // of one face and check the cyclic triple
        let e = pres.eps_generators.to_i64().unwrap();
        let mut plus = 0;
        let mut minus = 0;
        for i in 0..6 {
            for j in 0..6 {
                match e[i][j] {
                    1 => plus += 1,
                    -1 => minus += 1,
                    0 => {}
                    v => panic!("unexpected pairing {v}"),
                }
            }
        }
        assert_eq!((plus, minus), (12, 12), "each of 4 faces gives a cyclic triple");

        // cellular comparison through the canonical end paths
        let odd = odd_homology_cellular(&b).unwrap();
        let mut gen_classes: Vec<Vec<i64>> = Vec::new();
        for lp in 0..b.long_pairs.len() {
            let [p1, _] = crate::pathalg::edge_end_paths(&b, lp).unwrap();
            let tc = crate::pathalg::h_tilde(&b, &odd, &p1).unwrap();
            gen_classes.push(tc.coeffs.iter().map(|c| i64::try_from(c).unwrap()).collect());
        }
        // change of basis: presentation basis expressed in cellular coords
        let lift = pres.lift_basis.to_i64().unwrap();
        let mut bmat = Vec::new();
        for row in &lift {
            let mut acc = vec![0i64; odd.free_rank];
            for (g, c) in row.iter().enumerate() {
                for k in 0..odd.free_rank {
                    acc[k] += c * gen_classes[g][k];
                }
            }
            bmat.push(acc);
        }
        let bm = IntMatrix::from_rows_i64(&bmat);
        assert_eq!(zlat::det_abs(&bm), BigInt::from(1), "unimodular change of basis");
        let transported = bm.mul(&odd.eps).mul(&bm.transpose());
        assert_eq!(transported, pres.eps_basis, "form preserving");
    }

    #[test]
    fn presentation_annulus_fixture() {
        let t = fixtures::annulus_fixture();
        let b = build_boundary(&t, Stage::Mprime).unwrap();
        let pres = odd_homology_presentation(&b).unwrap();
        assert_eq!(pres.free_rank, 4);
        let odd = odd_homology_cellular(&b).unwrap();
        assert_eq!(odd.free_rank, 4);
        // same invariant factors of the skew forms
        let s1 = zlat::smith_normal_form(&pres.eps_basis);
        let s2 = zlat::smith_normal_form(&odd.eps);
        assert_eq!(s1.invariant_factors(), s2.invariant_factors());

        // full change-of-basis comparison through concrete paths
        let mut gen_classes: Vec<Vec<i64>> = Vec::new();
        for tag in &pres.generators {
            let chain: Vec<i64> = match tag {
                GenTag::EdgeCycle(lp) => {
                    let [p1, _] = crate::pathalg::edge_end_paths(&b, *lp).unwrap();
                    crate::pathalg::path_chain(&b, &p1).unwrap()
                }
                GenTag::AnnulusTau(ci) => {
                    let p = crate::pathalg::annulus_traverse_path(&b, *ci).unwrap();
                    crate::pathalg::path_chain(&b, &p).unwrap()
                }
                GenTag::AnnulusLambda(ci) => {
                    // lambda = sum of edge cycles around the first hole
                    let hi = b
                        .holes
                        .iter()
                        .position(|h| h.small_component == *ci)
                        .unwrap();
                    let mut acc = vec![0i64; b.complex.num_edges];
                    for &e in &b.holes[hi].big_edges {
                        let [p1, _] = crate::pathalg::edge_end_paths(&b, e).unwrap();
                        let c = crate::pathalg::path_chain(&b, &p1).unwrap();
                        for (a, v) in acc.iter_mut().zip(c) {
                            *a += v;
                        }
                    }
                    acc
                }
                _ => panic!("unexpected generator on this fixture"),
            };
            let coeffs = odd.reduce_chain(&chain).unwrap();
            gen_classes.push(coeffs.iter().map(|c| i64::try_from(c).unwrap()).collect());
        }
        let lift = pres.lift_basis.to_i64().unwrap();
        let mut bmat = Vec::new();
        for row in &lift {
            let mut acc = vec![0i64; odd.free_rank];
            for (g, c) in row.iter().enumerate() {
                for k in 0..odd.free_rank {
                    acc[k] += c * gen_classes[g][k];
                }
            }
            bmat.push(acc);
        }
        let bm = IntMatrix::from_rows_i64(&bmat);
        assert_eq!(zlat::det_abs(&bm), BigInt::from(1), "unimodular change of basis");
        let transported = bm.mul(&odd.eps).mul(&bm.transpose());
        assert_eq!(transported, pres.eps_basis, "form preserving");
    }

    #[test]
    fn evenness_on_even_part() {
        // the intersection form restricted to im P+ is even
        for (t, stage) in [
            (fixtures::figure_eight(), Stage::M0),
            (fixtures::annulus_fixture(), Stage::Mprime),
        ] {
            let b = build_boundary(&t, stage).unwrap();
            let qp = quasi_projections(&b.cover).unwrap();
            let h = h1(&b.cover.cover).unwrap();
            // rows of P+ in basis coordinates are classes of even cycles
            let pp = qp.p_plus.to_i64().unwrap();
            for row in &pp {
                // build the cycle as a combination of basis cycles
                let mut cyc = vec![0i64; b.cover.cover.num_edges];
                for (i, c) in row.iter().enumerate() {
                    for (e, v) in h.basis[i].iter().enumerate() {
                        cyc[e] += c * v;
                    }
                }
                let self_pair = b.cover.cover.intersection(&cyc, &cyc);
                assert_eq!(self_pair, 0);
                for row2 in &pp {
                    let mut cyc2 = vec![0i64; b.cover.cover.num_edges];
                    for (i, c) in row2.iter().enumerate() {
                        for (e, v) in h.basis[i].iter().enumerate() {
                            cyc2[e] += c * v;
                        }
                    }
                    let v = b.cover.cover.intersection(&cyc, &cyc2);
                    assert_eq!(v % 2, 0, "even part pairs evenly");
                }
            }
        }
    }

    #[test]
    fn nondegenerate_on_fixtures() {
        for (t, stage) in [
            (fixtures::single_tetrahedron(), Stage::M),
            (fixtures::figure_eight(), Stage::M0),
            (fixtures::figure_eight(), Stage::Mprime),
            (fixtures::five_two(), Stage::M0),
            (fixtures::annulus_fixture(), Stage::Mprime),
        ] {
            let b = build_boundary(&t, stage).unwrap();
            let odd = odd_homology_cellular(&b).unwrap();
            if odd.free_rank > 0 {
                assert!(
                    zlat::det_abs(&odd.eps) != BigInt::from(0),
                    "{} {:?}",
                    t.name,
                    stage
                );
            }
        }
    }
}
