//! The boundary surface of a framed 3-manifold with its big/small/defect
//! decomposition, and the canonical branched double cover.

pub mod complex;
pub mod build;
pub mod flip;

pub use build::{
    build_boundary, BoundaryData, BoundarySurface, DefectInfo, SmallPiece, SmallPieceKind,
    SurfaceError,
};
pub use complex::{CoverComplex, PolygonComplex, Side};

use crate::zlat;

/// The cover invariants of a boundary stage: Euler characteristics, branch
/// count, genera, and the rank of odd homology predicted two ways.
#[derive(Debug, Clone)]
pub struct CoverInvariants {
    pub chi_base: i64,
    pub chi_cover: i64,
    pub num_branch_points: usize,
    pub base_components: usize,
    pub cover_components: usize,
    pub genus_base: Vec<i64>,
    pub genus_cover: Vec<i64>,
    /// rank H1(cover) - rank H1(base)
    pub rank_odd_from_h1: i64,
    /// per-component sum of -chi + #branch for connected covers, and
    /// rank H1(base component) for disconnected (trivial) covers
    pub rank_odd_from_chi: i64,
}

/// Compute the invariants and cross-check the two rank formulas; an
/// inconsistency signals a construction bug.
pub fn cover_invariants(b: &BoundaryData) -> Result<CoverInvariants, SurfaceError> {
    let base = &b.cover.base;
    let cov = &b.cover.cover;
    let chi_base = base.euler_characteristic();
    let chi_cover = cov.euler_characteristic();
    let nb = b.cover.num_branch_points();
    if chi_cover != 2 * chi_base - nb as i64 {
        return Err(SurfaceError::Internal(format!(
            "Riemann-Hurwitz violated: chi(cover) = {chi_cover}, 2 chi(base) - #b = {}",
            2 * chi_base - nb as i64
        )));
    }
    let base_stats = base.component_stats();
    let cover_stats = cov.component_stats();
    // rank H1 of a closed oriented surface component is 2 - chi per component
    let rank_h1 = |stats: &[complex::ComponentStats]| -> i64 {
        stats.iter().map(|s| 2 - s.euler).sum()
    };
    let rank_from_h1 = rank_h1(&cover_stats) - rank_h1(&base_stats);

    // per base component: -chi + #branch when the cover is connected over
    // it, else rank H1 of the base component
    let (base_pid, _) = base.components();
    let (cover_pid, _) = cov.components();
    let ncomp = base_stats.len();
    let mut branch_per = vec![0i64; ncomp];
    for &bv in &b.cover.branch_base_vertices {
        // find a polygon at this vertex
        let rot = &base.rotation[bv];
        let e = rot[0].edge;
        let p = base.edge_slots[e][0].0;
        branch_per[base_pid[p]] += 1;
    }
    let mut cover_comps_over = vec![std::collections::BTreeSet::new(); ncomp];
    for (p, &c) in cover_pid.iter().enumerate() {
        let bp = p % base.num_polygons();
        cover_comps_over[base_pid[bp]].insert(c);
    }
    let mut rank_from_chi = 0i64;
    for c in 0..ncomp {
        let over = cover_comps_over[c].len();
        match over {
            1 => rank_from_chi += -base_stats[c].euler + branch_per[c],
            2 => rank_from_chi += 2 - base_stats[c].euler,
            n => {
                return Err(SurfaceError::Internal(format!(
                    "component {c} covered by {n} pieces"
                )))
            }
        }
    }
    if rank_from_chi != rank_from_h1 {
        return Err(SurfaceError::Internal(format!(
            "rank formulas disagree: {rank_from_h1} from homology ranks, {rank_from_chi} from chi"
        )));
    }
    Ok(CoverInvariants {
        chi_base,
        chi_cover,
        num_branch_points: nb,
        base_components: base_stats.len(),
        cover_components: cover_stats.len(),
        genus_base: base_stats.iter().map(|s| s.genus).collect(),
        genus_cover: cover_stats.iter().map(|s| s.genus).collect(),
        rank_odd_from_h1: rank_from_h1,
        rank_odd_from_chi: rank_from_chi,
    })
}

/// Rank of H1 of a polygon complex by Smith normal form, for cross-checks of
/// the counting formulas on small fixtures.
pub fn h1_rank_by_snf(c: &PolygonComplex) -> usize {
    let d1 = c.boundary_1();
    let d2 = c.boundary_2();
    let cycles = zlat::kernel(&d1);
    let boundaries = zlat::rank(&d2);
    cycles.rows() - boundaries
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::tri::Stage;

    #[test]
    fn tetrahedron_boundary_stage_m() {
        let t = fixtures::single_tetrahedron();
        let b = build_boundary(&t, Stage::M).unwrap();
        assert_eq!(b.summary.big_faces.len(), 4);
        assert_eq!(b.summary.small_pieces.len(), 4);
        assert!(b
            .summary
            .small_pieces
            .iter()
            .all(|p| p.kind == SmallPieceKind::Disc));
        assert_eq!(b.summary.defect_annuli, 0);
        assert_eq!(b.summary.euler, 2, "boundary of a tetrahedron is a sphere");
        let inv = cover_invariants(&b).unwrap();
        assert_eq!(inv.num_branch_points, 4);
        assert_eq!(inv.genus_cover, vec![1], "cover of the tetrahedron boundary is a torus");
        assert_eq!(inv.rank_odd_from_h1, 2);
        // Lemma-style count: 6g - 6 + 2n = -6 + 8 = 2
        assert_eq!(inv.rank_odd_from_chi, 2);
    }

    #[test]
    fn figure_eight_stage_mprime_is_small_torus() {
        let t = fixtures::figure_eight();
        let b = build_boundary(&t, Stage::Mprime).unwrap();
        assert!(b.summary.big_faces.is_empty());
        assert_eq!(b.summary.small_pieces.len(), 1);
        assert_eq!(b.summary.small_pieces[0].kind, SmallPieceKind::Torus);
        let inv = cover_invariants(&b).unwrap();
        assert_eq!(inv.num_branch_points, 0);
        assert_eq!(inv.cover_components, 2, "trivial double cover: two tori");
        assert_eq!(inv.rank_odd_from_h1, 2);
    }

    #[test]
    fn figure_eight_stage_m0_genus_three_cover_genus_five() {
        let t = fixtures::figure_eight();
        let b = build_boundary(&t, Stage::M0).unwrap();
        assert_eq!(b.summary.defect_annuli, 2);
        assert_eq!(b.summary.num_components, 1);
        assert_eq!(b.summary.component_genus, vec![3], "genus N+1");
        let inv = cover_invariants(&b).unwrap();
        assert_eq!(inv.genus_cover, vec![5], "genus 2N+1");
        assert_eq!(inv.rank_odd_from_h1, 4, "rank 2N");
    }

    #[test]
    fn figure_eight_stage_m_is_two_tetrahedron_boundaries() {
        let t = fixtures::figure_eight();
        let b = build_boundary(&t, Stage::M).unwrap();
        assert_eq!(b.summary.num_components, 2);
        let inv = cover_invariants(&b).unwrap();
        assert_eq!(inv.num_branch_points, 8);
        assert_eq!(inv.rank_odd_from_h1, 4);
        assert_eq!(inv.genus_cover, vec![1, 1]);
    }

    #[test]
    fn annulus_fixture_pieces() {
        let t = fixtures::annulus_fixture();
        let b = build_boundary(&t, Stage::Mprime).unwrap();
        let mut kinds: Vec<SmallPieceKind> =
            b.summary.small_pieces.iter().map(|p| p.kind).collect();
        kinds.sort_by_key(|k| format!("{k:?}"));
        assert_eq!(
            kinds,
            vec![SmallPieceKind::Annulus, SmallPieceKind::Disc, SmallPieceKind::Disc]
        );
        assert_eq!(b.summary.big_faces.len(), 4);
        let inv = cover_invariants(&b).unwrap();
        // chi = -(1/2) #branch + #discs = -2 + 2 = 0, and rank 6g-6+2n = 4
        assert_eq!(inv.chi_base, 0);
        assert_eq!(inv.rank_odd_from_h1, 4);
    }

    #[test]
    fn snf_h1_rank_agrees_with_counts_on_fixtures() {
        for t in fixtures::all() {
            for stage in [Stage::M, Stage::Mprime] {
                let b = build_boundary(&t, stage).unwrap();
                let by_counts: i64 = b
                    .complex
                    .component_stats()
                    .iter()
                    .map(|s| 2 - s.euler)
                    .sum();
                assert_eq!(h1_rank_by_snf(&b.complex) as i64, by_counts, "{} {:?}", t.name, stage);
                let by_counts_cov: i64 = b
                    .cover
                    .cover
                    .component_stats()
                    .iter()
                    .map(|s| 2 - s.euler)
                    .sum();
                assert_eq!(
                    h1_rank_by_snf(&b.cover.cover) as i64,
                    by_counts_cov,
                    "{} {:?} cover",
                    t.name,
                    stage
                );
            }
        }
    }

    #[test]
    fn riemann_hurwitz_on_random_partial_gluings() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let base = fixtures::figure_eight();
        let pair_starts: Vec<(usize, u8)> = base
            .gluings
            .iter()
            .filter(|g| (g.tet, g.face) < (g.to_tet, g.to_face))
            .map(|g| (g.tet, g.face))
            .collect();
        for _ in 0..200 {
            let k = (rng.next_u32() as usize) % (pair_starts.len() + 1);
            let mut picks = pair_starts.clone();
            picks.shuffle(&mut rng);
            picks.truncate(k);
            let gl: Vec<_> = base
                .gluings
                .iter()
                .filter(|g| {
                    picks.contains(&(g.tet, g.face)) || picks.contains(&(g.to_tet, g.to_face))
                })
                .cloned()
                .collect();
            let t = crate::tri::Triangulation::new("random-partial", 2, gl).unwrap();
            for stage in [Stage::M0, Stage::Mprime] {
                let b = build_boundary(&t, stage).unwrap();
                // cover_invariants checks Riemann-Hurwitz and the two rank
                // formulas internally
                cover_invariants(&b).unwrap();
            }
        }
    }

    #[test]
    fn defects_only_exist_at_stage_m0() {
        let t = fixtures::figure_eight();
        for (stage, want) in [(Stage::M, 0), (Stage::M0, 2), (Stage::Mprime, 0)] {
            let b = build_boundary(&t, stage).unwrap();
            assert_eq!(b.summary.defect_annuli, want, "{stage:?}");
        }
    }

    use rand::RngCore;
}
