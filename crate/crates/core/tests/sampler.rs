//! Chain-level behavior of the Gibbs sampler: the per-step conditional
//! formulas, slice allocation on separated data, reproducibility, and label
//! handling.

use dpmst::dist::special::ln_gamma;
use dpmst::linalg::SpdMatrix;
use dpmst::model::{
    default_hyperparams, BaseMeasure, ClusterParams, ConcentrationPrior, DataMatrix, NuPrior,
    SNiWParams,
};
use dpmst::rng::RngStream;
use dpmst::Real;
use dpmst::sampler::{
    alpha_mixture_given_x, run_chain, scale_latent_conditional, skew_latent_conditional,
    sniw_posterior, update_alpha, update_nu_and_scale, update_sticks_and_alloc, ChainConfig,
    ChainState, Mode,
};
use nalgebra::{DMatrix, DVector};

fn dv(xs: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(xs)
}

fn spd1(x: f64) -> SpdMatrix<f64> {
    SpdMatrix::new(DMatrix::from_row_slice(1, 1, &[x])).unwrap()
}

fn data_1d(xs: &[f64]) -> DataMatrix<f64> {
    DataMatrix::new(DMatrix::from_column_slice(xs.len(), 1, xs), vec!["m1".into()]).unwrap()
}

fn two_blob_state(data: &DataMatrix<f64>) -> ChainState<f64> {
    let n = data.n_obs();
    let half = n / 2;
    ChainState {
        alloc: (0..n).map(|c| usize::from(c >= half)).collect(),
        skew_latent: vec![0.5; n],
        scale_latent: vec![1.0; n],
        weights: vec![0.5, 0.5 - 1e-3],
        w_rest: 1e-3,
        alpha: 1.0,
        clusters: vec![
            ClusterParams::new(dv(&[-100.0]), dv(&[0.0]), spd1(1.0), 10.0).unwrap(),
            ClusterParams::new(dv(&[100.0]), dv(&[0.0]), spd1(1.0), 10.0).unwrap(),
        ],
        base_component_of: vec![0, 0],
    }
}

#[test]
fn alpha_mixture_matches_hand_computation() {
    // a=2, b=1, K=3, C=100, x=0.8
    let prior = ConcentrationPrior::new(2.0, 1.0).unwrap();
    let (pi_x, shape1, shape2, rate) = alpha_mixture_given_x(&prior, 3, 100, 0.8f64);
    let expected_rate = 1.0 - 0.8f64.ln();
    assert!((rate - expected_rate).abs() < 1e-12);
    assert!((rate - 1.22314).abs() < 1e-5);
    let odds = 4.0 / (100.0 * expected_rate);
    assert!((odds - 0.032700).abs() < 5e-6, "odds {odds}");
    assert!((pi_x - odds / (1.0 + odds)).abs() < 1e-12);
    assert_eq!(shape1, 5.0);
    assert_eq!(shape2, 4.0);
}

#[test]
fn alpha_chain_matches_quadrature_posterior_mean() {
    // On a fixed partition the chain's stationary law is
    // p(alpha | K, C) ∝ alpha^(a+K-1) e^(-b alpha) Γ(alpha)/Γ(alpha+C);
    // compare the long-run mean with numerical integration.
    let (a, b, k, c) = (2.0f64, 1.0f64, 3usize, 100usize);
    let prior = ConcentrationPrior::new(a, b).unwrap();
    let log_post = |alpha: f64| {
        (a + k as f64 - 1.0) * alpha.ln() - b * alpha + ln_gamma(alpha)
            - ln_gamma(alpha + c as f64)
    };
    // midpoint quadrature on (0, 40]
    let n = 400_000;
    let h = 40.0 / n as f64;
    let (mut z, mut m) = (0.0, 0.0);
    for i in 0..n {
        let x = (i as f64 + 0.5) * h;
        let w = log_post(x).exp();
        z += w;
        m += w * x;
    }
    let target = m / z;

    let mut rng = RngStream::new(4);
    let mut alpha = 1.0f64;
    let burn = 2000;
    let steps = 200_000;
    let mut acc = 0.0;
    for t in 0..steps {
        alpha = update_alpha(alpha, k, c, &prior, &mut rng);
        if t >= burn {
            acc += alpha;
        }
    }
    let mean = acc / (steps - burn) as f64;
    // the draws are dependent only through the auxiliary variable; treat as
    // nearly independent for the error bound and inflate it
    let tol = 0.05 * target;
    assert!((mean - target).abs() < tol, "chain mean {mean} vs quadrature {target}");
}

#[test]
fn alpha_shrinks_with_huge_rate() {
    let prior = ConcentrationPrior::new(2.0, 1e8).unwrap();
    let mut rng = RngStream::new(5);
    let mut alpha = 1.0f64;
    for _ in 0..50 {
        alpha = update_alpha(alpha, 2, 50, &prior, &mut rng);
    }
    assert!(alpha < 1e-4, "alpha {alpha} did not shrink");
}

#[test]
fn skew_latent_conditional_scalar_oracle() {
    // d=1, psi=1, Sigma=1, gamma=1, y-xi=2: A=1/2, a=1
    let cp = ClusterParams::new(dv(&[0.0]), dv(&[1.0]), spd1(1.0), 5.0).unwrap();
    let (a, var) = skew_latent_conditional(&cp, &dv(&[2.0]), 1.0);
    assert!((a - 1.0).abs() < 1e-12);
    assert!((var - 0.5).abs() < 1e-12);
    // zero skew: a = 0, A = 1/gamma
    let cp0 = ClusterParams::new(dv(&[0.0]), dv(&[0.0]), spd1(1.0), 5.0).unwrap();
    let (a0, var0) = skew_latent_conditional(&cp0, &dv(&[2.0]), 4.0);
    assert_eq!(a0, 0.0);
    assert!((var0 - 0.25).abs() < 1e-12);
}

#[test]
fn scale_latent_conditional_scalar_oracle() {
    // d=1, nu=3, s=1, eps' Sigma^-1 eps = 4: Gamma(5/2, 4)
    let cp = ClusterParams::new(dv(&[0.0]), dv(&[1.0]), spd1(1.0), 3.0).unwrap();
    // y - xi - s psi = 2 so eps^2/sigma = 4
    let (shape, rate) = scale_latent_conditional(&cp, &dv(&[3.0]), 1.0);
    assert!((shape - 2.5).abs() < 1e-12);
    assert!((rate - 4.0).abs() < 1e-12);
}

#[test]
fn sniw_posterior_hand_example() {
    // d=1, z=2, s=1, gamma=1, b0=(0,0), D0=1, lambda0=4, Lambda0=1:
    // B_k = (2/3, -1/3; -1/3, 2/3), b_k = (2/3, 2/3), lambda_k = 5
    let prior = SNiWParams::new(
        dv(&[0.0]),
        dv(&[0.0]),
        SpdMatrix::identity(2),
        spd1(1.0),
        4.0,
    )
    .unwrap();
    let post = sniw_posterior(&prior, &[(dv(&[2.0]), 1.0, 1.0)], 0.0).unwrap();
    let b = post.b_cov.matrix();
    assert!((b[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
    assert!((b[(0, 1)] + 1.0 / 3.0).abs() < 1e-12);
    assert!((b[(1, 1)] - 2.0 / 3.0).abs() < 1e-12);
    assert!((post.b_xi[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((post.b_psi[0] - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(post.lambda_dof, 5.0);
}

#[test]
fn sniw_posterior_empty_equals_prior() {
    let prior = SNiWParams::new(
        dv(&[1.0, -1.0]),
        dv(&[0.5, 0.0]),
        SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap(),
        SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0])).unwrap(),
        6.0,
    )
    .unwrap();
    let post = sniw_posterior(&prior, &[], 0.0).unwrap();
    assert_eq!(post.lambda_dof, prior.lambda_dof);
    for i in 0..2 {
        assert!((post.b_xi[i] - prior.b_xi[i]).abs() < 1e-12);
        assert!((post.b_psi[i] - prior.b_psi[i]).abs() < 1e-12);
        for j in 0..2 {
            assert!(
                (post.b_cov.matrix()[(i, j)] - prior.b_cov.matrix()[(i, j)]).abs() < 1e-12
            );
            assert!(
                (post.lambda_scale.matrix()[(i, j)] - prior.lambda_scale.matrix()[(i, j)]).abs()
                    < 1e-12
            );
        }
    }
}

#[test]
fn sniw_posterior_dof_counts_members() {
    let prior = SNiWParams::new(
        dv(&[0.0]),
        dv(&[0.0]),
        SpdMatrix::identity(2),
        spd1(1.0),
        4.0,
    )
    .unwrap();
    for n in [1usize, 3, 7] {
        let obs: Vec<_> = (0..n).map(|i| (dv(&[i as f64]), 0.3, 1.2)).collect();
        let post = sniw_posterior(&prior, &obs, 0.0).unwrap();
        assert_eq!(post.lambda_dof, 4.0 + n as f64);
    }
}

#[test]
fn separated_clusters_never_exchange_members() {
    // two 1-D clusters at ±100, unit scale, 50 points each: the density
    // ratio against the wrong cluster underflows, so no observation moves
    let mut xs = Vec::new();
    let mut rng = RngStream::new(10);
    use rand::Rng;
    for i in 0..100 {
        let center = if i < 50 { -100.0 } else { 100.0 };
        xs.push(center + rng.gen::<f64>() - 0.5);
    }
    let data = data_1d(&xs);
    let (base, _) = default_hyperparams(&data).unwrap();
    let mut state = two_blob_state(&data);
    let mut chain_rng = RngStream::new(11);
    for iter in 0..100 {
        update_sticks_and_alloc(
            &mut state,
            &data,
            &base,
            Mode::SkewNormal,
            iter,
            false,
            &mut chain_rng,
        )
        .unwrap();
        for c in 0..100 {
            assert_eq!(state.alloc[c], usize::from(c >= 50), "switch at iter {iter}, obs {c}");
        }
        // weights + remainder stay normalized after every sweep
        let total: f64 = state.weights.iter().sum::<f64>() + state.w_rest;
        assert!((total - 1.0).abs() < 1e-10, "weight sum {total}");
    }
}

#[test]
fn tiny_alpha_keeps_single_cluster() {
    let xs: Vec<f64> = (0..40).map(|i| (i as f64) * 0.01).collect();
    let data = data_1d(&xs);
    let (base, _) = default_hyperparams(&data).unwrap();
    let mut state = ChainState {
        alloc: vec![0; 40],
        skew_latent: vec![0.5; 40],
        scale_latent: vec![1.0; 40],
        weights: vec![1.0 - 1e-12],
        w_rest: 1e-12,
        alpha: 1e-12,
        clusters: vec![ClusterParams::new(dv(&[0.2]), dv(&[0.0]), spd1(0.1), 10.0).unwrap()],
        base_component_of: vec![0],
    };
    let mut rng = RngStream::new(12);
    for iter in 0..50 {
        update_sticks_and_alloc(&mut state, &data, &base, Mode::SkewNormal, iter, false, &mut rng)
            .unwrap();
        assert_eq!(state.n_clusters(), 1, "split at iteration {iter}");
    }
}

#[test]
fn nu_metropolis_degenerate_proposal_always_accepts() {
    let xs: Vec<f64> = (0..30).map(|i| (i as f64) * 0.1 - 1.5).collect();
    let data = data_1d(&xs);
    let (base, _) = default_hyperparams(&data).unwrap();
    let mut state = ChainState {
        alloc: vec![0; 30],
        skew_latent: vec![0.5; 30],
        scale_latent: vec![1.0; 30],
        weights: vec![1.0 - 1e-6],
        w_rest: 1e-6,
        alpha: 1.0,
        clusters: vec![ClusterParams::new(dv(&[0.0]), dv(&[0.5]), spd1(1.0), 7.0).unwrap()],
        base_component_of: vec![0],
    };
    let rng = RngStream::new(13);
    let mut accepted = 0;
    let mut proposed = 0;
    for iter in 0..200 {
        let (a, p) =
            update_nu_and_scale(&mut state, &data, &base, 1e-12, iter, false, &rng).unwrap();
        accepted += a;
        proposed += p;
    }
    assert_eq!(accepted, proposed, "degenerate proposals must always be accepted");
    assert!((state.clusters[0].nu - 7.0).abs() < 1e-9);
}

#[test]
fn nu_metropolis_mixes_on_skew_t_data() {
    // acceptance strictly inside (0, 1) with a real step size
    let mut rng = RngStream::new(14);
    let truth = dpmst::dist::SkewTParams::new(
        dpmst::dist::SkewNormalParams::new(dv(&[0.0]), dv(&[2.0]), spd1(1.0)).unwrap(),
        5.0,
    )
    .unwrap();
    let xs: Vec<f64> = (0..200).map(|_| dpmst::dist::sample_skew_t(&truth, &mut rng)[0]).collect();
    let data = data_1d(&xs);
    let (base, _) = default_hyperparams(&data).unwrap();
    let mut state = ChainState {
        alloc: vec![0; 200],
        skew_latent: vec![0.5; 200],
        scale_latent: vec![1.0; 200],
        weights: vec![1.0 - 1e-6],
        w_rest: 1e-6,
        alpha: 1.0,
        clusters: vec![ClusterParams::new(dv(&[0.0]), dv(&[2.0]), spd1(1.0), 5.0).unwrap()],
        base_component_of: vec![0],
    };
    let chain_rng = RngStream::new(15);
    let mut accepted = 0;
    let mut proposed = 0;
    for iter in 0..300 {
        let (a, p) =
            update_nu_and_scale(&mut state, &data, &base, 1.0, iter, false, &chain_rng).unwrap();
        accepted += a;
        proposed += p;
    }
    assert!(accepted > 0 && accepted < proposed, "acceptance {accepted}/{proposed}");
    // every scale latent stays positive
    assert!(state.scale_latent.iter().all(|&g| g > 0.0));
}

#[test]
fn single_gaussian_cluster_recovers_k1() {
    // C=40 from one symmetric component: modal K over draws is 1
    let mut rng = RngStream::new(16);
    let xs: Vec<f64> = (0..40).map(|_| 3.0 + f64::draw_std_normal(&mut rng)).collect();
    let data = data_1d(&xs);
    let (base, conc) = default_hyperparams(&data).unwrap();
    let cfg = ChainConfig::new(500, 250, 5, Mode::SkewNormal, 17);
    let draws = run_chain(&data, &base, &conc, &cfg).unwrap();
    assert_eq!(draws.modal_k(), 1, "k trace {:?}", &draws.k_trace[..20]);
}

#[test]
fn parallel_and_serial_runs_are_bit_identical() {
    let mut rng = RngStream::new(18);
    let xs: Vec<f64> = (0..60)
        .map(|i| if i < 30 { -2.0 } else { 2.0 } + f64::draw_std_normal(&mut rng))
        .collect();
    let data = data_1d(&xs);
    let (base, conc) = default_hyperparams(&data).unwrap();
    for mode in [Mode::SkewNormal, Mode::SkewT] {
        let mut cfg = ChainConfig::new(60, 20, 2, mode, 19);
        cfg.parallel = false;
        let serial = run_chain(&data, &base, &conc, &cfg).unwrap();
        cfg.parallel = true;
        let parallel = run_chain(&data, &base, &conc, &cfg).unwrap();
        assert_eq!(serial, parallel);
    }
}

#[test]
fn same_seed_same_draws() {
    let xs: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
    let data = data_1d(&xs);
    let (base, conc) = default_hyperparams(&data).unwrap();
    let cfg = ChainConfig::new(50, 10, 1, Mode::SkewT, 20);
    let a = run_chain(&data, &base, &conc, &cfg).unwrap();
    let b = run_chain(&data, &base, &conc, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stored_partitions_are_compact() {
    let mut rng = RngStream::new(21);
    let xs: Vec<f64> = (0..80)
        .map(|i| if i % 2 == 0 { -4.0 } else { 4.0 } + f64::draw_std_normal(&mut rng))
        .collect();
    let data = data_1d(&xs);
    let (base, conc) = default_hyperparams(&data).unwrap();
    let cfg = ChainConfig::new(120, 40, 2, Mode::SkewNormal, 22);
    let draws = run_chain(&data, &base, &conc, &cfg).unwrap();
    for (labels, params) in draws.partitions.iter().zip(&draws.cluster_params) {
        let k = *labels.iter().max().unwrap() as usize;
        assert_eq!(k, params.len());
        for l in 1..=k as u32 {
            assert!(labels.contains(&l), "label {l} missing");
        }
        // canonical order: first appearance of label k precedes that of k+1
        let mut seen = 0u32;
        for &l in labels {
            if l > seen {
                assert_eq!(l, seen + 1, "labels not in first-appearance order");
                seen = l;
            }
        }
    }
}

#[test]
fn label_permutation_of_initial_state_is_immaterial() {
    // the canonical compaction keys every cluster-level draw to the member
    // set, so permuting labels of a hand-built state and sweeping yields the
    // identical partition trajectory
    let mut rng = RngStream::new(23);
    let xs: Vec<f64> = (0..40)
        .map(|i| if i % 2 == 0 { -3.0 } else { 3.0 } + 0.3 * f64::draw_std_normal(&mut rng))
        .collect();
    let data = data_1d(&xs);
    let (base, _) = default_hyperparams(&data).unwrap();

    let c0 = ClusterParams::new(dv(&[-3.0]), dv(&[0.0]), spd1(0.5), 10.0).unwrap();
    let c1 = ClusterParams::new(dv(&[3.0]), dv(&[0.0]), spd1(0.5), 10.0).unwrap();
    let mut state_a = ChainState {
        alloc: (0..40).map(|i| i % 2).collect(),
        skew_latent: vec![0.5; 40],
        scale_latent: vec![1.0; 40],
        weights: vec![0.5, 0.5 - 1e-9],
        w_rest: 1e-9,
        alpha: 1.0,
        clusters: vec![c0.clone(), c1.clone()],
        base_component_of: vec![0, 0],
    };
    let mut state_b = ChainState {
        alloc: (0..40).map(|i| 1 - i % 2).collect(),
        skew_latent: vec![0.5; 40],
        scale_latent: vec![1.0; 40],
        weights: vec![0.5 - 1e-9, 0.5],
        w_rest: 1e-9,
        alpha: 1.0,
        clusters: vec![c1, c0],
        base_component_of: vec![0, 0],
    };
    state_a.compact_canonical();
    state_b.compact_canonical();
    assert_eq!(state_a.alloc, state_b.alloc);

    let mut rng_a = RngStream::new(24);
    let mut rng_b = RngStream::new(24);
    for iter in 0..30 {
        update_sticks_and_alloc(
            &mut state_a,
            &data,
            &base,
            Mode::SkewNormal,
            iter,
            false,
            &mut rng_a,
        )
        .unwrap();
        update_sticks_and_alloc(
            &mut state_b,
            &data,
            &base,
            Mode::SkewNormal,
            iter,
            false,
            &mut rng_b,
        )
        .unwrap();
        assert_eq!(state_a.alloc, state_b.alloc, "diverged at iteration {iter}");
    }
}

#[test]
fn multi_component_base_measure_runs() {
    let mut rng = RngStream::new(25);
    let xs: Vec<f64> = (0..60)
        .map(|i| if i < 30 { -5.0 } else { 5.0 } + f64::draw_std_normal(&mut rng))
        .collect();
    let data = data_1d(&xs);
    let comp = |center: f64| {
        SNiWParams::new(
            dv(&[center]),
            dv(&[0.0]),
            SpdMatrix::new(DMatrix::identity(2, 2) * 10.0).unwrap(),
            spd1(1.0),
            4.0,
        )
        .unwrap()
    };
    let base = BaseMeasure::new(
        vec![(0.5, comp(-5.0)), (0.5, comp(5.0))],
        NuPrior::ShiftedExponential { rate: 0.1 },
    )
    .unwrap();
    // informative atoms make splitting cheap, so keep the prior cluster
    // count low and judge the fit by partition accuracy instead of K
    let conc = ConcentrationPrior::new(0.5, 2.0).unwrap();
    let cfg = ChainConfig::new(300, 100, 2, Mode::SkewT, 26);
    let draws = run_chain(&data, &base, &conc, &cfg).unwrap();
    let parts = draws.partitions_as_partition().unwrap();
    let zeta: dpmst::SimilarityMatrix64 = dpmst::partition::similarity_matrix(&parts).unwrap();
    let (point, _) = dpmst::partition::binder_point_estimate(&parts, &zeta).unwrap();
    let truth = dpmst::partition::Partition::from_raw_labels(
        &(0..60).map(|i| usize::from(i >= 30)).collect::<Vec<_>>(),
    )
    .unwrap();
    let f: f64 = dpmst::partition::f_measure_total(&point, &truth).unwrap();
    assert!(f > 0.9, "F-measure {f}, k trace {:?}", &draws.k_trace[..20]);
}

#[test]
fn invalid_configs_are_rejected() {
    let cfg = ChainConfig::<f64> { burn_in: 10, n_iter: 10, ..ChainConfig::new(10, 5, 1, Mode::SkewT, 0) };
    assert!(cfg.validate().is_err());
    let cfg = ChainConfig::<f64> { thin: 0, ..ChainConfig::new(10, 5, 1, Mode::SkewT, 0) };
    assert!(cfg.validate().is_err());
    let cfg = ChainConfig::<f64> { mh_step: 0.0, ..ChainConfig::new(10, 5, 1, Mode::SkewT, 0) };
    assert!(cfg.validate().is_err());
}
