// check criterion 1 feasibility under init-from-prior, then criterion 2
use dpmst::linalg::SpdMatrix;
use dpmst::model::default_hyperparams;
use dpmst::partition::*;
use dpmst::rng::RngStream;
use dpmst::sampler::*;
use dpmst::seqpost::{build_informative_prior, default_prior_components, MapPriorConfig};
use dpmst::sim::{simulate_mixture, SimComponent};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

fn c1_mixture() -> Vec<SimComponent<f64>> {
    vec![
        SimComponent { weight: 0.5, xi: DVector::from_row_slice(&[-9.0, -9.0]), psi: DVector::from_row_slice(&[2.0, 2.0]), sigma: SpdMatrix::identity(2), nu: Some(8.0) },
        SimComponent { weight: 0.3, xi: DVector::from_row_slice(&[9.0, -8.0]), psi: DVector::from_row_slice(&[-2.5, 1.0]), sigma: SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0])).unwrap(), nu: Some(10.0) },
        SimComponent { weight: 0.15, xi: DVector::from_row_slice(&[-8.0, 9.0]), psi: DVector::from_row_slice(&[0.0, 2.5]), sigma: SpdMatrix::new(DMatrix::identity(2, 2) * 0.8).unwrap(), nu: Some(7.0) },
        SimComponent { weight: 0.05, xi: DVector::from_row_slice(&[9.0, 9.0]), psi: DVector::from_row_slice(&[1.0, -1.0]), sigma: SpdMatrix::new(DMatrix::identity(2, 2) * 0.5).unwrap(), nu: Some(12.0) },
    ]
}

fn c2_mixture() -> Vec<SimComponent<f64>> {
    let weights = [0.2, 0.16, 0.14, 0.13, 0.12, 0.1, 0.09, 0.06];
    (0..8)
        .map(|i| {
            let th = i as f64 * std::f64::consts::PI / 4.0;
            SimComponent {
                weight: weights[i],
                xi: DVector::from_row_slice(&[7.0 * th.cos(), 7.0 * th.sin()]),
                psi: DVector::from_row_slice(&[1.5 * th.sin(), -1.5 * th.cos()]),
                sigma: SpdMatrix::new(DMatrix::identity(2, 2) * (0.5 + 0.1 * i as f64)).unwrap(),
                nu: None,
            }
        })
        .collect()
}

fn main() {
    // --- criterion 1 sanity under init-from-prior (2 replicates)
    let t0 = Instant::now();
    for rep in 0..0u64 {
        let mut rng = RngStream::new(100 + rep);
        let (data, truth) = simulate_mixture(&c1_mixture(), 2000, &mut rng).unwrap();
        let truth_p = Partition::from_raw_labels(&truth).unwrap();
        let (base, conc) = default_hyperparams(&data).unwrap();
        let cfg = ChainConfig::new(3000, 2000, 5, Mode::SkewT, 200 + rep);
        let draws = run_chain(&data, &base, &conc, &cfg).unwrap();
        let parts = draws.partitions_as_partition().unwrap();
        let z: SimilarityMatrix<f64> = similarity_matrix(&parts).unwrap();
        let (pt, _) = binder_point_estimate(&parts, &z).unwrap();
        let f: f64 = f_measure_total(&pt, &truth_p).unwrap();
        println!("c1 rep {rep}: K_point={} F={f:.4} K_trace_tail={:?}", pt.n_clusters(), &draws.k_trace[195..]);
    }
    println!("c1 two reps took {:.0}s", t0.elapsed().as_secs_f64());

    // --- criterion 2 under init-from-prior
    for data_seed in [11u64, 12, 13] {
        let comps = c2_mixture();
        let mut rng = RngStream::new(data_seed);
        let (data_a, _) = simulate_mixture(&comps, 1000, &mut rng).unwrap();
        let (data_b, _) = simulate_mixture(&comps, 1000, &mut rng).unwrap();
        let (base0, conc0) = default_hyperparams(&data_a).unwrap();
        let cfg_a = ChainConfig::new(1500, 700, 4, Mode::SkewNormal, 999);
        let draws_a = run_chain(&data_a, &base0, &conc0, &cfg_a).unwrap();
        let kp = default_prior_components(&draws_a);
        let mut prior_rng = RngStream::keyed(998, 0, 0);
        let (base_inf, conc_inf) = build_informative_prior(
            &draws_a, kp, &MapPriorConfig::default(), base0.nu_prior.clone(), &mut prior_rng,
        ).unwrap();
        let (base_b, conc_b) = default_hyperparams(&data_b).unwrap();
        let mut wins = 0;
        let mut lines = Vec::new();
        for seed in 0..10u64 {
            let mut cfg_b = ChainConfig::new(2000, 0, 1, Mode::SkewNormal, 4000 + seed);
            cfg_b.thin = 1;
            let plain = run_chain(&data_b, &base_b, &conc_b, &cfg_b).unwrap();
            let primed = run_chain(&data_b, &base_inf, &conc_inf, &cfg_b).unwrap();
            let np = iterations_to_converge(&plain.logdensity_trace, 1.1, 60, 20).unwrap_or(99999);
            let ni = iterations_to_converge(&primed.logdensity_trace, 1.1, 60, 20).unwrap_or(99999);
            let win = (ni as f64) * 1.5 <= np as f64;
            wins += win as usize;
            lines.push(format!("{np}/{ni}{}", if win { "W" } else { "" }));
        }
        println!("c2 data {data_seed}: Kp={kp} wins {wins}/10  [{}]", lines.join(" "));
    }
}
