mod common;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use fairsheaf::dataset::{generate_simulation, load_csv, make_split, simulate_latent, Schema, SimulationConfig};
use fairsheaf::diffusion::{diffuse, diffusion_matrix, discrete_trajectory, kernel_projection, DiffusionConfig};
use fairsheaf::explain::{shap_diffused, shap_linear};
use fairsheaf::metrics::{
    consistency, generalized_entropy, independence, lipschitz, separation, sufficiency, FairnessReport,
    ReportOptions,
};
use fairsheaf::model::{vector_sheaf_diffuse, LogisticModel};
use fairsheaf::sheaf::{build_sheaf_laplacian, combine_laplacians, dirichlet_energy, normalize, SheafSpec};
use fairsheaf::topology::{
    build_knn_graph, build_subset_graph, build_unit_ball_graph, BallWeighting, FairGraph, Partition, Topology,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn bits<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2)).collect()
}

fn normalized_identity(g: &FairGraph, d: usize) -> fairsheaf::sheaf::SheafLaplacian {
    normalize(&build_sheaf_laplacian(g, &SheafSpec::Identity { stalk_dim: d }).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_marginals(seed in any::<u64>(), p in 0.1f64..0.9) {
        let n = 1000;
        let ds = generate_simulation(&SimulationConfig::new(n, p, seed).unwrap()).unwrap();
        let mean = ds.sensitive().iter().map(|&a| f64::from(a)).sum::<f64>() / n as f64;
        prop_assert!((mean - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
        let rows = simulate_latent(&SimulationConfig::new(n, p, seed).unwrap()).unwrap();
        let (mu, mw) = (
            rows.iter().map(|r| r.u).sum::<f64>() / n as f64,
            rows.iter().map(|r| r.w).sum::<f64>() / n as f64,
        );
        let cov: f64 = rows.iter().map(|r| (r.u - mu) * (r.w - mw)).sum();
        prop_assert!(cov > 0.0);
        prop_assert!(rows.iter().zip(ds.labels()).all(|(r, &y)| r.label() == y));
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 2usize..60) {
        let ds = generate_simulation(&SimulationConfig::new(n, 0.5, seed).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        ds.write_csv(&path).unwrap();
        let back = load_csv(&path, &Schema::passthrough()).unwrap();
        prop_assert!((back.features() - ds.features()).amax() <= 1e-12);
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.sensitive(), ds.sensitive());
    }

    #[test]
    fn split_partitions_rows(seed in any::<u64>(), n in 40usize..200, folds in 2usize..5) {
        let ds = generate_simulation(&SimulationConfig::new(n, 0.5, seed).unwrap()).unwrap();
        let Ok(plan) = make_split(&ds, 0.2, folds, seed) else { return Ok(()); };
        let mut seen = vec![0u8; n];
        for &i in &plan.test_indices { seen[i] += 1; }
        for f in &plan.folds {
            let mut in_fold = vec![0u8; n];
            for &i in f.train.iter().chain(&f.validation) { in_fold[i] += 1; }
            for i in 0..n {
                prop_assert!(in_fold[i] + seen[i] == 1, "row {} in fold and test", i);
            }
        }
        let validation: usize = plan.folds.iter().map(|f| f.validation.len()).sum();
        prop_assert_eq!(validation + plan.test_indices.len(), n);
    }

    #[test]
    fn knn_matches_brute_force(seed in any::<u64>(), n in 2usize..120, d in 1usize..4, k in 1usize..8) {
        let mut r = rng(seed);
        let k = k.min(n - 1);
        // coarse coordinates create distance ties
        let x = DMatrix::from_fn(n, d, |_, _| f64::from(r.random_range(0..5u8)));
        let g = build_knn_graph(&x, k).unwrap();
        let mut expected = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((x.row(i) - x.row(j)).norm_squared(), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in &others[..k] {
                expected.insert((i.min(j), i.max(j)));
            }
        }
        let got: std::collections::BTreeSet<(usize, usize)> = g.edge_pairs().into_iter().collect();
        prop_assert_eq!(got, expected);
        prop_assert!(g.degrees().iter().all(|&deg| deg >= 1));
    }

    #[test]
    fn unit_ball_monotone(seed in any::<u64>(), n in 2usize..60, d1 in 0.1f64..2.0, d2 in 0.1f64..2.0) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, 2);
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        let small = build_unit_ball_graph(&x, lo, BallWeighting::Uniform).unwrap().edge_pairs();
        let large: std::collections::BTreeSet<_> =
            build_unit_ball_graph(&x, hi, BallWeighting::Uniform).unwrap().edge_pairs().into_iter().collect();
        prop_assert!(small.iter().all(|e| large.contains(e)));
    }

    #[test]
    fn subset_graph_connected(seed in any::<u64>(), n in 2usize..80, groups in 1usize..5) {
        let mut r = rng(seed);
        let groups = groups.min(n);
        // every group non-empty: first `groups` rows seed them
        let mut members = vec![Vec::new(); groups];
        for i in 0..n {
            let g = if i < groups { i } else { r.random_range(0..groups) };
            members[g].push(i);
        }
        let g = build_subset_graph(n, &[Partition::new("p", members)]).unwrap();
        prop_assert!(g.is_connected());
    }

    #[test]
    fn normalized_spectrum_in_range(seed in any::<u64>(), n in 2usize..40, d in 1usize..3) {
        let mut r = rng(seed);
        let g = random_connected_graph(&mut r, n, n);
        let spec = if r.random_bool(0.5) {
            SheafSpec::Identity { stalk_dim: d }
        } else {
            SheafSpec::Vector { beta: (0..d + 1).map(|_| r.random_range(-2.0..2.0)).collect() }
        };
        let l = normalize(&build_sheaf_laplacian(&g, &spec).unwrap()).unwrap();
        let eig = SymmetricEigen::new(l.to_dense());
        prop_assert!(eig.eigenvalues.iter().all(|&v| (-1e-9..=2.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn identity_sheaf_is_graph_laplacian_kron(seed in any::<u64>(), n in 2usize..25, d in 1usize..4) {
        let mut r = rng(seed);
        let g = random_connected_graph(&mut r, n, n);
        let mut lg = DMatrix::zeros(n, n);
        for e in g.edges() {
            lg[(e.u, e.u)] += e.weight;
            lg[(e.v, e.v)] += e.weight;
            lg[(e.u, e.v)] -= e.weight;
            lg[(e.v, e.u)] -= e.weight;
        }
        let kron = lg.kronecker(&DMatrix::<f64>::identity(d, d));
        let l = build_sheaf_laplacian(&g, &SheafSpec::Identity { stalk_dim: d }).unwrap().to_dense();
        prop_assert!((l - kron).amax() <= 1e-12);
    }

    #[test]
    fn combination_kernel_is_intersection(seed in any::<u64>(), n in 3usize..20) {
        let mut r = rng(seed);
        let spec = SheafSpec::Identity { stalk_dim: 1 };
        // two graphs, each possibly disconnected, so kernels differ
        let half = n / 2;
        let g1 = random_connected_graph(&mut r, half.max(2), 1);
        let g2 = random_connected_graph(&mut r, n, 2);
        let l1 = build_sheaf_laplacian(&g1, &spec).unwrap();
        let l2 = build_sheaf_laplacian(&g2, &spec).unwrap();
        let sum = combine_laplacians(&[(&l1, r.random_range(0.1..3.0)), (&l2, r.random_range(0.1..3.0))]).unwrap();
        let dense = sum.to_dense();
        let eig = SymmetricEigen::new(dense.clone());
        let d1 = l1.padded(n).unwrap().to_dense();
        let d2 = l2.to_dense();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < 1e-8 {
                let v = eig.eigenvectors.column(k);
                prop_assert!((&d1 * v).norm() < 1e-6);
                prop_assert!((&d2 * v).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn diffusion_converges_monotonically(seed in any::<u64>(), n in 2usize..30, alpha in 0.05f64..1.0) {
        let mut r = rng(seed);
        let g = random_connected_graph(&mut r, n, n);
        let l = normalized_identity(&g, 1);
        let x0 = gaussian_vector(&mut r, n);
        let target = kernel_projection(&l, &x0).unwrap();
        let traj = discrete_trajectory(&l, &x0, alpha, 40).unwrap();
        let errs: Vec<f64> = traj.iter().map(|x| (x - &target).norm()).collect();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
        }
        let energy: Vec<f64> = traj.iter().map(|x| dirichlet_energy(&l, x).unwrap()).collect();
        for w in energy.windows(2) {
            // tolerance covers round-off once the energy has collapsed
            prop_assert!(w[1] <= w[0] + 1e-13 * energy[0]);
        }
    }

    #[test]
    fn large_steps_raise_energy(seed in any::<u64>(), n in 3usize..25) {
        let mut r = rng(seed);
        let g = random_connected_graph(&mut r, n, 2 * n);
        let l = normalized_identity(&g, 1);
        let lmax = SymmetricEigen::new(l.to_dense()).eigenvalues.max();
        let alpha = 2.2 / lmax;
        let x0 = gaussian_vector(&mut r, n);
        let e: Vec<f64> = discrete_trajectory(&l, &x0, alpha, 60)
            .unwrap()
            .iter()
            .map(|x| dirichlet_energy(&l, x).unwrap())
            .collect();
        prop_assert!(e.windows(2).any(|w| w[1] > w[0]));
    }

    #[test]
    fn vector_sheaf_with_unit_beta_moves_one_feature(seed in any::<u64>(), n in 2usize..25, d in 2usize..5) {
        let mut r = rng(seed);
        let k = r.random_range(0..d);
        let mut beta = vec![0.0; d];
        beta[k] = 1.0;
        let topology = Topology::single(random_connected_graph(&mut r, n, n));
        let x = gaussian_matrix(&mut r, n, d);
        let cfg = DiffusionConfig::discrete(0.3, 10).unwrap();
        let xd = vector_sheaf_diffuse(&topology, &beta, &x, cfg).unwrap();
        // feature k follows the scalar diffusion, the others stay put
        let scalar = diffuse(&normalized_identity(&topology.parts()[0].0, 1), &x.column(k).into_owned(), &cfg).unwrap();
        for j in 0..d {
            let expected = if j == k { scalar.clone() } else { x.column(j).into_owned() };
            prop_assert!((xd.column(j) - expected).amax() <= 1e-12);
        }
    }

    #[test]
    fn metrics_in_range_and_group_symmetric(seed in any::<u64>(), n in 8usize..80) {
        let mut r = rng(seed);
        let y = bits(&mut r, n);
        let a = bits(&mut r, n);
        let scores: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let x = gaussian_matrix(&mut r, n, 3);
        let Ok(rep) = FairnessReport::compute(&y, &scores, &a, &x, &ReportOptions { con_k: 3, ..ReportOptions::default() }) else {
            return Ok(());
        };
        let unit = 0.0..=1.0;
        prop_assert!(unit.contains(&rep.accuracy) && unit.contains(&rep.balanced_accuracy) && unit.contains(&rep.ind));
        for v in [rep.sep, rep.suf].into_iter().flatten() {
            prop_assert!(unit.contains(&v));
        }
        prop_assert!(rep.con >= 0.0);
        for v in [rep.lip, rep.ent, rep.ent_within, rep.ent_between].into_iter().flatten() {
            prop_assert!(v >= -1e-15);
        }
        let flipped: Vec<u8> = a.iter().map(|g| 1 - g).collect();
        let yhat = fairsheaf::model::classify(&scores, 0.5);
        prop_assert_eq!(independence(&yhat, &a).ok(), independence(&yhat, &flipped).ok());
        prop_assert_eq!(separation(&y, &yhat, &a).ok(), separation(&y, &yhat, &flipped).ok());
        prop_assert_eq!(sufficiency(&y, &yhat, &a).ok(), sufficiency(&y, &yhat, &flipped).ok());
    }

    #[test]
    fn consistency_leave_one_out(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, 2);
        let s: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let total: f64 = s.iter().sum();
        let oracle = (0..n)
            .map(|i| (s[i] - (total - s[i]) / (n - 1) as f64).abs())
            .sum::<f64>() / n as f64;
        prop_assert!((consistency(&s, &x, n - 1).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_scale_covariant(seed in any::<u64>(), n in 2usize..40, c in 0.1f64..10.0) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, 2);
        let s: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let base = lipschitz(&s, &x, 0.99).unwrap();
        let scaled = lipschitz(&s, &(&x * c), 0.99).unwrap();
        prop_assert!((scaled - base / c).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn entropy_identity(seed in any::<u64>(), n in 2usize..100) {
        let mut r = rng(seed);
        let (y, yhat, a) = (bits(&mut r, n), bits(&mut r, n), bits(&mut r, n));
        if let Ok(e) = generalized_entropy(&y, &yhat, &a) {
            prop_assert!((e.ent - e.within - e.between).abs() <= 1e-10);
        }
    }

    #[test]
    fn shap_centered_and_decomposes(seed in any::<u64>(), n in 2usize..25, d in 1usize..4) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, d);
        let model = LogisticModel::new(r.random_range(-1.0..1.0), (0..d).map(|_| r.random_range(-2.0..2.0)).collect());
        let plain = shap_linear(&model, &x).unwrap();
        let z = model.logits(&x).unwrap();
        for i in 0..n {
            prop_assert!((plain.shap.row(i).sum() - (z[i] - z.mean())).abs() <= 1e-10);
        }
        for k in 0..d {
            prop_assert!(plain.shap.column(k).mean().abs() <= 1e-10);
        }

        // symmetric diffusion of a connected graph is doubly stochastic
        let g = random_connected_graph(&mut r, n, n);
        let w = g.edges().iter().fold(DMatrix::<f64>::zeros(n, n), |mut m, e| {
            m[(e.u, e.v)] += e.weight;
            m[(e.v, e.u)] += e.weight;
            m
        });
        let deg_max = w.row_sum().max();
        let p = DMatrix::<f64>::identity(n, n) - (DMatrix::from_diagonal(&w.row_sum().transpose()) - &w) / (2.0 * deg_max);
        let attr = shap_diffused(&model, &p, &x).unwrap();
        for k in 0..d {
            prop_assert!(attr.shap.column(k).mean().abs() <= 1e-10);
        }

        // logit decomposition with D from the diffusion module
        let l = normalized_identity(&g, 1);
        let dmat = diffusion_matrix(&l, &DiffusionConfig::discrete(0.3, 7).unwrap()).unwrap();
        let zdif = &dmat * &z;
        let attr = shap_diffused(&model, &dmat, &x).unwrap();
        let beta = DVector::from_column_slice(&model.beta);
        let baseline = DVector::from_column_slice(&attr.baseline).dot(&beta);
        for i in 0..n {
            let mass = dmat.row(i).sum();
            let recon = attr.shap.row(i).sum() + model.beta0 * mass + baseline * mass;
            prop_assert!((recon - zdif[i]).abs() <= 1e-9);
        }
        // literal form on centred covariates
        let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
        let xc = DMatrix::from_fn(n, d, |i, k| x[(i, k)] - means[k]);
        let zc = &dmat * model.logits(&xc).unwrap();
        let attr = shap_diffused(&model, &dmat, &xc).unwrap();
        for i in 0..n {
            prop_assert!((attr.shap.row(i).sum() + model.beta0 * dmat.row(i).sum() - zc[i]).abs() <= 1e-9);
        }
    }
}
