//! Cross-module invariants: analytic thresholds against finite-difference
//! bisection, branch tangency near onset, cluster reduction consistency,
//! and trajectory-level forward invariance / boundedness.

use nalgebra::{DMatrix, DVector};
use opinionlab_core::analysis::critical_attention;
use rand::Rng;
use opinionlab_core::dynamics::{
    distance_to_cluster_manifold, integrate, GeneralSystem, InputSchedule, System,
    TwoOptionSystem,
};
use opinionlab_core::graph::{AdjacencySpec, GraphKind};
use opinionlab_core::linalg::{eigenvalues_restricted, fd_jacobian, max_real_part, zero_sum_basis};
use opinionlab_core::model::{
    boundedness_radius, vector_field, HomogeneousRegime, ModelParams, OpinionState,
    TwoOptionParams,
};
use opinionlab_core::saturation::SaturationSpec;
use proptest::prelude::*;

/// Flattens an opinion matrix into the row-major layout used by the
/// integrator.
fn flatten(z: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(z.len(), z.transpose().iter().copied())
}

/// Orthonormal basis of the product of zero-sum subspaces, as columns.
fn state_space_basis(n: usize, no: usize) -> DMatrix<f64> {
    let q = zero_sum_basis(no);
    let mut b = DMatrix::zeros(n * no, n * (no - 1));
    for i in 0..n {
        for j in 0..no {
            for c in 0..no - 1 {
                b[(i * no + j, i * (no - 1) + c)] = q[(j, c)];
            }
        }
    }
    b
}

/// Largest real part of the neutral-point Jacobian restricted to the state
/// space, from central differences of the actual field.
fn numeric_growth_rate(p: &ModelParams) -> f64 {
    let n = p.n_agents();
    let no = p.n_options();
    let f = |y: &DVector<f64>| {
        let z = DMatrix::from_row_slice(n, no, y.as_slice());
        let state = OpinionState::project(z).unwrap();
        flatten(&vector_field(&state, p).unwrap())
    };
    let jac = fd_jacobian(f, &DVector::zeros(n * no), 1e-6);
    let basis = state_space_basis(n, no);
    max_real_part(&eigenvalues_restricted(&jac, &basis).unwrap())
}

/// Bisection on the attention at which the numeric growth rate crosses zero.
fn bisect_threshold(p: &ModelParams, hi_start: f64) -> f64 {
    let with_u = |u: f64| {
        let mut q = p.clone();
        q.u = DVector::from_element(p.n_agents(), u);
        q
    };
    let mut lo = 0.0;
    let mut hi = hi_start;
    assert!(numeric_growth_rate(&with_u(lo)) < 0.0);
    while numeric_growth_rate(&with_u(hi)) < 0.0 {
        hi *= 2.0;
        assert!(hi < 1e6, "no instability found");
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if numeric_growth_rate(&with_u(mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn analytic_threshold_matches_numeric_bisection() {
    let cases = [
        (GraphKind::Path, 3, 1.0, 0.0, -1.0, 0.0, 2),
        (GraphKind::AllToAll, 5, 0.2, 0.1, 0.2, -0.1, 3),
        (GraphKind::Cycle, 6, 0.5, -0.2, 0.9, 0.1, 2),
    ];
    for (kind, n, alpha, beta, gamma, delta, no) in cases {
        let graph = AdjacencySpec::build(kind, n, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph, 1.0, 0.0, alpha, beta, gamma, delta).unwrap();
        let pred = critical_attention(&regime).unwrap();
        assert!(pred.hypotheses_ok, "{:?}", pred.diagnostics);
        let p = ModelParams::homogeneous(
            &regime,
            no,
            SaturationSpec::default_general(),
            SaturationSpec::default_general(),
        )
        .unwrap();
        let numeric = bisect_threshold(&p, pred.u_star * 1.5);
        assert!(
            (numeric - pred.u_star).abs() < 1e-6,
            "{}: analytic {} vs numeric {}",
            kind.as_str(),
            pred.u_star,
            numeric
        );
    }
}

#[test]
fn branch_is_tangent_to_the_pattern_vector_above_onset() {
    // two-option scenarios slightly above threshold: the converged state
    // aligns with the predicted pattern vector
    let cases = [
        (GraphKind::Path, 3, 1.0, -1.0),
        (GraphKind::Cycle, 6, 1.2, 1.3),
    ];
    for (kind, n, alpha, gamma) in cases {
        let graph = AdjacencySpec::build(kind, n, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph, 1.0, 0.0, alpha, 0.0, gamma, 0.0).unwrap();
        let pred = critical_attention(&regime).unwrap();
        let run = HomogeneousRegime {
            u: pred.u_star * 1.05,
            ..regime
        };
        let params = TwoOptionParams::homogeneous(&run).unwrap();
        let sys = System::TwoOption(TwoOptionSystem::plain(params));

        let mut rng = opinionlab_core::sampling::rng_from_seed(31 + n as u64);
        let x0 = opinionlab_core::sampling::uniform_vector(&mut rng, n, -0.01, 0.01).unwrap();
        let traj = integrate(&sys, x0, &InputSchedule::empty(), 600.0, 0.01).unwrap();
        let x = DVector::from_column_slice(traj.opinions_at(traj.last_index()));
        assert!(x.norm() > 1e-4, "{}: opinions failed to form", kind.as_str());
        let cosine = x.normalize().dot(&pred.pattern_vector.normalize()).abs();
        assert!(
            cosine > 0.95,
            "{}: branch misaligned, |cos| = {cosine}",
            kind.as_str()
        );
    }
}

#[test]
fn cluster_reduction_preserves_the_threshold() {
    // two clusters of two agents on a symmetric block structure; the
    // reduced two-agent model must place the bifurcation exactly where the
    // numeric Jacobian of the reduced field crosses zero
    let mut m = DMatrix::zeros(4, 4);
    for (i, k, w) in [
        (0usize, 1usize, -1.0),
        (2, 3, -1.0),
        (0, 2, -2.0),
        (0, 3, -2.0),
        (1, 2, -2.0),
        (1, 3, -2.0),
    ] {
        m[(i, k)] = w;
        m[(k, i)] = w;
    }
    let graph = AdjacencySpec::custom(m).unwrap();
    let regime = HomogeneousRegime::new(graph, 1.0, 0.4, 0.0, 0.0, 1.0, 0.0).unwrap();
    let p = ModelParams::homogeneous(
        &regime,
        2,
        SaturationSpec::odd_tanh(),
        SaturationSpec::odd_tanh(),
    )
    .unwrap();
    let partition = vec![vec![0, 1], vec![2, 3]];
    let reduced = opinionlab_core::analysis::reduce_clusters(&p, &partition).unwrap();
    assert!(reduced.is_homogeneous());

    // analytic threshold of the reduced system: the reduced gain structure
    // is alpha_hat = -1 on the diagonal role, gamma_hat = -4 across, so
    // lambda(Gamma_hat - Delta_hat) in {-4, +4} shifted by alpha_hat
    let a_hat = reduced.alpha[0];
    let gamma_hat = reduced.gamma[(0, 1)];
    let lambda_max = gamma_hat.abs();
    let analytic = 1.0 / (a_hat + lambda_max);
    let numeric = bisect_threshold(&reduced, analytic * 1.5);
    assert!(
        (numeric - analytic).abs() < 1e-9,
        "analytic {analytic}, numeric {numeric}"
    );
}

#[test]
fn cluster_distance_decays_monotonically_under_the_condition() {
    // the signed two-cluster benchmark satisfies the synchronization
    // condition with margin -0.5; after a short transient the Lyapunov
    // distance must decrease step over step
    let mut m = DMatrix::zeros(5, 5);
    let clusters: [&[usize]; 2] = [&[0, 1], &[2, 3, 4]];
    for (p_idx, cp) in clusters.iter().enumerate() {
        for &i in cp.iter() {
            for &k in cp.iter() {
                if i != k {
                    m[(i, k)] = -1.0;
                }
            }
            for &k in clusters[1 - p_idx].iter() {
                m[(i, k)] = -2.0;
            }
        }
    }
    let graph = AdjacencySpec::custom(m).unwrap();
    let regime = HomogeneousRegime::new(graph, 1.0, 0.5, 0.0, 0.0, 1.0, 0.0).unwrap();
    let params = TwoOptionParams::homogeneous(&regime).unwrap();
    let sys = System::TwoOption(TwoOptionSystem::plain(params));
    let x0 = DVector::from_row_slice(&[0.9, -0.4, 0.4, 0.1, -0.8]);
    let traj = integrate(&sys, x0, &InputSchedule::empty(), 40.0, 0.01).unwrap();

    let partition = vec![vec![0, 1], vec![2, 3, 4]];
    let start = traj.index_at_time(1.0);
    let mut prev = f64::INFINITY;
    for idx in start..traj.len() {
        let d = distance_to_cluster_manifold(&traj.opinion_state(idx), &partition).unwrap();
        assert!(
            d <= prev + 1e-9,
            "cluster distance increased at t = {}",
            traj.times[idx]
        );
        prev = d;
    }
    assert!(prev < 1e-8, "distance should have collapsed, got {prev}");
}

#[test]
fn step_halving_self_convergence() {
    // clustered-dissensus scenario: halving the step changes the final
    // state by far less than the acceptance tolerances
    let mut m = DMatrix::zeros(5, 5);
    let clusters: [&[usize]; 2] = [&[0, 1], &[2, 3, 4]];
    for (p_idx, cp) in clusters.iter().enumerate() {
        for &i in cp.iter() {
            for &k in cp.iter() {
                if i != k {
                    m[(i, k)] = -1.0;
                }
            }
            for &k in clusters[1 - p_idx].iter() {
                m[(i, k)] = -2.0;
            }
        }
    }
    let graph = AdjacencySpec::custom(m).unwrap();
    let regime = HomogeneousRegime::new(graph, 1.0, 0.5, 0.0, 0.0, 1.0, 0.0).unwrap();
    let params = TwoOptionParams::homogeneous(&regime).unwrap();
    let sys = System::TwoOption(TwoOptionSystem::plain(params));
    let x0 = DVector::from_row_slice(&[0.9, -0.4, 0.4, 0.1, -0.8]);
    let run = |dt: f64| {
        let traj = integrate(&sys, x0.clone(), &InputSchedule::empty(), 40.0, dt).unwrap();
        DVector::from_column_slice(traj.opinions_at(traj.last_index()))
    };
    let coarse = run(0.01);
    let fine = run(0.005);
    assert!(
        (coarse - fine).amax() < 1e-6,
        "step halving moved the final state too much"
    );
}

#[test]
fn trajectories_respect_forward_invariance_and_boundedness() {
    let graph = AdjacencySpec::build(GraphKind::AllToAll, 4, 1.0).unwrap();
    let regime = HomogeneousRegime::new(graph, 0.7, 2.5, 0.3, 0.1, 0.5, -0.2).unwrap();
    let params = ModelParams::homogeneous(
        &regime,
        3,
        SaturationSpec::default_general(),
        SaturationSpec::default_general(),
    )
    .unwrap();
    let radius = boundedness_radius(&params);
    let sys = System::General(GeneralSystem::plain(params));

    let mut rng = opinionlab_core::sampling::rng_from_seed(77);
    let z0 = {
        let raw = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.5..1.5));
        OpinionState::project(raw).unwrap()
    };
    let bound = z0.norm().max(radius) + 1e-6;
    let y0 = flatten(z0.matrix());
    let traj = integrate(&sys, y0, &InputSchedule::empty(), 100.0, 0.01).unwrap();
    for idx in 0..traj.len() {
        let state = traj.opinion_state(idx);
        assert!(state.max_row_sum() < 1e-8, "row-sum drift");
        assert!(
            state.norm() <= bound,
            "t = {}: norm {} exceeds bound {bound}",
            traj.times[idx],
            state.norm()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tangent_projection_is_idempotent_and_zero_sum(
        v in proptest::collection::vec(-50.0..50.0f64, 2..6)
    ) {
        let p = opinionlab_core::project_tangent(&v);
        let sum: f64 = p.iter().sum();
        prop_assert!(sum.abs() < 1e-9 * 50.0 * v.len() as f64);
        let pp = opinionlab_core::project_tangent(&p);
        for (a, b) in p.iter().zip(pp.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn saturations_stay_in_range_with_positive_slope(
        y in -80.0..80.0f64,
        k1 in 0.2..3.0f64,
        k2 in 0.2..3.0f64
    ) {
        let s = SaturationSpec::new(
            opinionlab_core::SaturationFamily::AsymmetricLogistic, k1, k2
        ).unwrap();
        let v = s.eval(y);
        prop_assert!(v >= -k1 - 1e-12 && v <= k2 + 1e-12);
        prop_assert!(s.deriv(y) >= 0.0);
        prop_assert!(s.deriv(y) <= s.derivative_sup() + 1e-12);
    }

    #[test]
    fn field_rows_always_sum_to_zero(
        seed in 0u64..5000
    ) {
        let graph = AdjacencySpec::build(GraphKind::Cycle, 4, 1.0).unwrap();
        let regime = HomogeneousRegime::new(graph, 1.0, 0.9, 0.4, -0.1, 0.6, 0.2).unwrap();
        let p = ModelParams::homogeneous(
            &regime,
            3,
            SaturationSpec::default_general(),
            SaturationSpec::odd_tanh(),
        ).unwrap();
        let mut rng = opinionlab_core::sampling::rng_from_seed(seed);
        let state = OpinionState::project(
            DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-2.0..2.0))
        ).unwrap();
        let f = vector_field(&state, &p).unwrap();
        for i in 0..4 {
            prop_assert!(f.row(i).sum().abs() < 1e-13);
        }
    }
}
