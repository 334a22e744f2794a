mod common;

use common::*;
use gpe_mlc::assembly::{FeFunction, LevelOperators, ProblemSpec};
use gpe_mlc::eigen::{direct_solve, scf_solve, smallest_pair_dense, InnerConfig, ScfConfig, ScfSpace};
use gpe_mlc::mesh::{build_lshape, build_unit_square, Domain, Hierarchy};
use gpe_mlc::mlc::{aux_rhs, multigrid_scheme, CorrectionSpace, MlcConfig, MultilevelSolver};
use gpe_mlc::Error;
use proptest::prelude::*;

fn harmonic() -> ProblemSpec {
    ProblemSpec::harmonic(Domain::UnitSquare)
}

fn direct_lambda(h: &Hierarchy, level: usize, spec: &ProblemSpec) -> f64 {
    let d = direct_solve(h, level, spec, &ScfConfig::default(), &InnerConfig::default(), None).unwrap();
    assert!(d.pair.converged);
    d.pair.lambda
}

fn check_aux_rhs_oracle(mesh: &gpe_mlc::mesh::Mesh, gamma: [f64; 2], zeta: f64, seed: u64) {
    let spec = ProblemSpec::new(mesh.domain().unwrap(), gamma, zeta).unwrap();
    let ops = LevelOperators::new(mesh, &spec).unwrap();
    let u = random_vec(&mut rng(seed), mesh.num_dofs());
    let lambda = 7.5;
    let got = aux_rhs(lambda, &FeFunction::new(0, u.clone()), &ops).unwrap();
    let want = aux_rhs_oracle(mesh, gamma, zeta, lambda, &u);
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        assert!((g - w).abs() <= 1e-12 * scale, "entry {i}: {g} vs {w}");
    }
}

#[test]
fn aux_rhs_matches_quadrature_oracle() {
    check_aux_rhs_oracle(&build_unit_square(2).unwrap(), [1.0, 1.0], 1.0, 1);
    check_aux_rhs_oracle(&build_unit_square(5).unwrap(), [2.0, 0.5], 3.0, 2);
    check_aux_rhs_oracle(&build_lshape(3).unwrap(), [1.0, 1.0], 10.0, 3);
}

#[test]
fn aux_rhs_vanishes_at_a_discrete_pair() {
    let mesh = build_unit_square(6).unwrap();
    let ops = LevelOperators::new(&mesh, &harmonic()).unwrap();
    let mut space = gpe_mlc::eigen::FineSpace::dense(&ops);
    let cfg = ScfConfig {
        lambda_tol: 1e-13,
        u_tol: 1e-12,
        ..ScfConfig::default()
    };
    let out = scf_solve(&mut space, &cfg, None).unwrap();
    assert!(out.converged);
    let r = aux_rhs(out.lambda, &FeFunction::new(0, out.u), &ops).unwrap();
    let norm = dot(&r, &r).sqrt();
    assert!(norm < 1e-9, "{norm}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn aux_rhs_is_orthogonal_at_the_rayleigh_quotient(seed in any::<u64>(), g0 in 0.0f64..5.0) {
        // With ζ = 0 and λ = R(u): uᵀ rhs = λ uᵀMu − uᵀAu = 0.
        let mesh = build_unit_square(4).unwrap();
        let spec = ProblemSpec::new(Domain::UnitSquare, [g0, 1.0], 0.0).unwrap();
        let ops = LevelOperators::new(&mesh, &spec).unwrap();
        let u = FeFunction::new(0, random_vec(&mut rng(seed), mesh.num_dofs()));
        let lambda = ops.rayleigh(&u).unwrap();
        let r = aux_rhs(lambda, &u, &ops).unwrap();
        let scale = lambda * ops.mass.quad_form(&u.values);
        prop_assert!(dot(&u.values, &r).abs() <= 1e-12 * scale);
    }

    #[test]
    fn correction_space_contains_its_inputs(seed in any::<u64>()) {
        let h = Hierarchy::uniform(build_unit_square(2).unwrap(), 3).unwrap();
        let fine = h.finest();
        let ops = LevelOperators::new(fine, &harmonic()).unwrap();
        let p = h.composite_prolongation(0, 2).unwrap().dofs;
        let t = random_vec(&mut rng(seed), fine.num_dofs());
        let space = CorrectionSpace::build(&ops, p.clone(), &t).unwrap();
        prop_assert_eq!(space.dim(), p.ncols() + 1);
        // The initial coordinates reproduce ũ.
        let back = space.expand(space.initial_coordinates());
        for (a, b) in back.iter().zip(&t) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // Mass block equals the Galerkin projection of M.
        let mhh = csr_to_dense(&ops.mass.congruence(&p));
        let b = space.mass_matrix();
        for i in 0..p.ncols() {
            for j in 0..p.ncols() {
                prop_assert!((b[(i, j)] - mhh[i][j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn guard_drops_an_enrichment_inside_the_coarse_space() {
    let h = Hierarchy::uniform(build_unit_square(4).unwrap(), 2).unwrap();
    let ops = LevelOperators::new(h.finest(), &harmonic()).unwrap();
    let p = h.composite_prolongation(0, 1).unwrap().dofs;
    let nh = p.ncols();
    let mut e = vec![0.0; nh];
    e[nh / 2] = 1.0;
    let hat = p.mul_vec(&e);
    let space = CorrectionSpace::build(&ops, p.clone(), &hat).unwrap();
    assert!(space.orthogonalized());
    assert!(!space.enriched());
    assert_eq!(space.dim(), nh);
    assert!(space.schur_complement().abs() < 1e-12);
    let back = space.expand(space.initial_coordinates());
    for (a, b) in back.iter().zip(&hat) {
        assert!((a - b).abs() < 1e-12);
    }

    // A generic enrichment keeps dimension N_H + 1 and a positive Schur complement.
    let t = random_vec(&mut rng(5), ops.dim());
    let space = CorrectionSpace::build(&ops, p, &t).unwrap();
    assert_eq!(space.dim(), nh + 1);
    assert!(space.enriched() && !space.orthogonalized());
    assert!(space.schur_complement() > 0.0);
}

#[test]
fn correction_space_rejects_zero_and_mismatch() {
    let h = Hierarchy::uniform(build_unit_square(2).unwrap(), 2).unwrap();
    let ops = LevelOperators::new(h.finest(), &harmonic()).unwrap();
    let p = h.composite_prolongation(0, 1).unwrap().dofs;
    assert!(matches!(
        CorrectionSpace::build(&ops, p.clone(), &vec![0.0; ops.dim()]),
        Err(Error::RankDeficient(_))
    ));
    assert!(matches!(
        CorrectionSpace::build(&ops, p, &[1.0]),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn fixed_point_of_a_correction_step() {
    let h = Hierarchy::uniform(build_unit_square(4).unwrap(), 3).unwrap();
    let spec = harmonic();
    let scf = ScfConfig {
        lambda_tol: 1e-12,
        u_tol: 1e-11,
        ..ScfConfig::default()
    };
    let d = direct_solve(&h, 2, &spec, &scf, &InnerConfig::default(), None).unwrap();
    let cfg = MlcConfig {
        scf,
        ..MlcConfig::default()
    };
    let solver = MultilevelSolver::new(&h, spec, cfg).unwrap();
    let c = solver.correction_step_with_tol(d.pair.lambda, &d.pair.u, 2, 1e-12).unwrap();
    let rel = (c.pair.lambda - d.pair.lambda).abs() / d.pair.lambda;
    assert!(rel <= 1e-8, "{rel:e}");
    assert!(c.pair.u.values.iter().all(|&v| v > 0.0));
}

#[test]
fn linear_two_grid_step_tracks_the_fine_eigenvalue() {
    let h = Hierarchy::uniform(build_unit_square(4).unwrap(), 2).unwrap();
    let spec = ProblemSpec::laplacian(Domain::UnitSquare);
    let run = multigrid_scheme(&h, &spec, &MlcConfig::default()).unwrap();
    let ops = LevelOperators::new(h.finest(), &spec).unwrap();
    let (fine, _) = smallest_pair_dense(&ops.linear, &ops.mass).unwrap();
    let coarse = run.pairs[0].lambda;
    let got = run.pairs[1].lambda;
    assert!(got >= fine - 1e-10);
    assert!(got - fine <= 0.1 * (coarse - fine), "fine {fine} coarse {coarse} mlc {got}");
}

#[test]
fn error_quarters_per_level() {
    let h = Hierarchy::uniform(build_unit_square(6).unwrap(), 5).unwrap();
    let spec = harmonic();
    // Extrapolated reference from direct solves on the two finest levels.
    let (l3, l4) = (direct_lambda(&h, 3, &spec), direct_lambda(&h, 4, &spec));
    let reference = l4 - (l3 - l4) / 3.0;
    let run = multigrid_scheme(&h.prefix(3).unwrap(), &spec, &MlcConfig::default()).unwrap();
    assert_eq!(run.pairs.len(), 3);
    let errors: Vec<f64> = run.pairs.iter().map(|p| (p.lambda - reference).abs()).collect();
    for w in errors.windows(2) {
        let factor = w[0] / w[1];
        assert!((3.0..=5.0).contains(&factor), "{errors:?}");
    }
}

#[test]
fn single_level_equals_direct() {
    let h = Hierarchy::uniform(build_unit_square(6).unwrap(), 1).unwrap();
    let spec = harmonic();
    let run = multigrid_scheme(&h, &spec, &MlcConfig::default()).unwrap();
    let d = direct_solve(&h, 0, &spec, &ScfConfig::default(), &InnerConfig::default(), None).unwrap();
    assert_eq!(run.pairs.len(), 1);
    assert_eq!(run.pairs[0].lambda, d.pair.lambda);
    assert_eq!(run.pairs[0].u, d.pair.u);
    assert!(run.report.levels.is_empty());
}

#[test]
fn mlc_and_direct_agree_to_discretization_accuracy() {
    let h = Hierarchy::uniform(build_unit_square(6).unwrap(), 4).unwrap();
    let spec = harmonic();
    let run = multigrid_scheme(&h, &spec, &MlcConfig::default()).unwrap();
    assert!(run.report.failure.is_none());
    let direct: Vec<f64> = (0..4).map(|l| direct_lambda(&h, l, &spec)).collect();
    for k in 1..4 {
        let gap = (run.pairs[k].lambda - direct[k]).abs();
        let discretization = direct[k - 1] - direct[k];
        assert!(gap <= discretization, "level {k}: gap {gap} vs {discretization}");
    }
}

#[test]
fn report_and_pair_invariants() {
    let h = Hierarchy::uniform(build_unit_square(6).unwrap(), 4).unwrap();
    let spec = harmonic();
    let run = multigrid_scheme(&h, &spec, &MlcConfig::default()).unwrap();
    let r = &run.report;
    assert_eq!(r.first_level, 0);
    assert_eq!(r.coarse_dim, 25);
    assert_eq!(r.levels.len(), 3);
    for (k, w) in r.levels.iter().enumerate() {
        assert_eq!(w.level, k + 1);
        assert_eq!(w.dofs, h.mesh(k + 1).unwrap().num_dofs());
        assert!(w.scf_converged);
        assert!(w.scf_iters <= 5, "level {}: ϖ = {}", w.level, w.scf_iters);
        assert_eq!(w.composite_dim, 26);
        assert!(w.vcycles >= 1 && !w.mixed_sign);
    }
    let elapsed: Vec<f64> = r.timing.levels.iter().map(|t| t.elapsed).collect();
    assert!(elapsed.windows(2).all(|w| w[0] <= w[1]));
    assert!(r.timing.total_seconds >= *elapsed.last().unwrap());
    for (k, p) in run.pairs.iter().enumerate() {
        let ops = LevelOperators::new(h.mesh(k).unwrap(), &spec).unwrap();
        assert_eq!(p.u.level, k);
        assert!((ops.mass.quad_form(&p.u.values) - 1.0).abs() < 1e-12);
        assert!(p.u.values.iter().all(|&v| v > 0.0));
        assert!((ops.rayleigh(&p.u).unwrap() - p.lambda).abs() <= 1e-9 * p.lambda);
    }
}

#[test]
fn start_level_is_validated() {
    let h = Hierarchy::uniform(build_unit_square(2).unwrap(), 3).unwrap();
    let spec = harmonic();
    let bad = MlcConfig {
        start_level: 3,
        ..MlcConfig::default()
    };
    match MultilevelSolver::new(&h, spec.clone(), bad) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "start_level"),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("accepted start_level 3"),
    }
    let h2 = h.clone().with_coarse_level(1).unwrap();
    let below = MlcConfig {
        start_level: 0,
        ..MlcConfig::default()
    };
    assert!(MultilevelSolver::new(&h2, spec.clone(), below).is_err());
    let later = MlcConfig {
        start_level: 1,
        ..MlcConfig::default()
    };
    let run = MultilevelSolver::new(&h, spec, later).unwrap().run().unwrap();
    assert_eq!(run.pairs.len(), 2);
    assert_eq!(run.pairs[0].u.level, 1);
}

#[test]
fn correction_rejects_finer_input() {
    let h = Hierarchy::uniform(build_unit_square(2).unwrap(), 3).unwrap();
    let solver = MultilevelSolver::new(&h, harmonic(), MlcConfig::default()).unwrap();
    let u = FeFunction::new(2, vec![1.0; h.mesh(2).unwrap().num_dofs()]);
    assert!(matches!(
        solver.correction_step(20.0, &u, 1),
        Err(Error::LevelMismatch { .. })
    ));
}
