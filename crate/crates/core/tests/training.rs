#[path = "support/oracles.rs"]
mod oracles;

use deepbow_core::aggregate::{gmm_train, harvest, kmeans_train, DescriptorSample, GmmConfig, KmeansConfig};
use deepbow_core::Tensor3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SLACK: f64 = 1e-9;

fn blobs(seed: u64, centers: &[[f64; 2]], per: usize, sd: f64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut out = Vec::new();
    for c in centers {
        for _ in 0..per {
            out.push((c[0] + noise.sample(&mut rng)) as f32);
            out.push((c[1] + noise.sample(&mut rng)) as f32);
        }
    }
    out
}

fn uniform_points(seed: u64, n: usize, dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn kmeans_objective_never_increases() {
    for seed in 0..10 {
        let sample = DescriptorSample::from_points(1, 3, uniform_points(seed, 400, 3)).unwrap();
        let cfg = KmeansConfig {
            clusters: 12,
            max_iters: 30,
            seed,
        };
        let (cb, report) = kmeans_train(&sample, &cfg).unwrap();
        assert!(report.objective_trace.len() >= 2);
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + SLACK, "seed {seed}: {} -> {}", w[0], w[1]);
        }
        let pts: Vec<Vec<f64>> = sample
            .points()
            .chunks(3)
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let cents: Vec<Vec<f64>> = cb
            .centroids()
            .chunks(3)
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let last = *report.objective_trace.last().unwrap();
        assert!((oracles::kmeans_objective(&pts, &cents) - last).abs() < 1e-5 * last.max(1.0));
    }
}

#[test]
fn kmeans_finds_separated_blobs() {
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let sample = DescriptorSample::from_points(2, 2, blobs(1, &centers, 50, 0.3)).unwrap();
    let (cb, report) = kmeans_train(
        &sample,
        &KmeansConfig {
            clusters: 3,
            max_iters: 50,
            seed: 4,
        },
    )
    .unwrap();
    assert!(report.converged);
    for c in centers {
        let best = (0..3)
            .map(|j| {
                let v = cb.centroid(j);
                ((v[0] as f64 - c[0]).powi(2) + (v[1] as f64 - c[1]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.3);
    }
}

#[test]
fn em_log_likelihood_never_decreases() {
    for seed in 0..10 {
        let sample = DescriptorSample::from_points(1, 2, uniform_points(100 + seed, 300, 2)).unwrap();
        let cfg = GmmConfig {
            components: 4,
            max_iters: 25,
            tol: 0.0,
            seed,
            kmeans_iters: 5,
        };
        let (gmm, report) = gmm_train(&sample, &cfg).unwrap();
        assert_eq!(report.log_likelihood_trace.len(), 26);
        for w in report.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - SLACK, "seed {seed}: {} -> {}", w[0], w[1]);
        }
        let pts: Vec<Vec<f64>> = sample
            .points()
            .chunks(2)
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let means: Vec<Vec<f64>> = (0..4).map(|j| gmm.mean(j).to_vec()).collect();
        let vars: Vec<Vec<f64>> = (0..4).map(|j| gmm.variance(j).to_vec()).collect();
        let direct = oracles::gmm_mean_loglik(&pts, gmm.priors(), &means, &vars);
        assert!((direct - gmm.mean_log_likelihood(sample.points())).abs() < 1e-9);
    }
}

#[test]
fn em_recovers_two_blobs() {
    let sample = DescriptorSample::from_points(1, 2, blobs(7, &[[-3.0, 0.0], [3.0, 1.0]], 400, 0.5)).unwrap();
    let cfg = GmmConfig {
        components: 2,
        max_iters: 100,
        tol: 1e-10,
        seed: 1,
        kmeans_iters: 10,
    };
    let (gmm, report) = gmm_train(&sample, &cfg).unwrap();
    assert!(report.converged);
    let (a, b) = if gmm.mean(0)[0] < gmm.mean(1)[0] {
        (0, 1)
    } else {
        (1, 0)
    };
    assert!((gmm.mean(a)[0] + 3.0).abs() < 0.1 && gmm.mean(a)[1].abs() < 0.1);
    assert!((gmm.mean(b)[0] - 3.0).abs() < 0.1 && (gmm.mean(b)[1] - 1.0).abs() < 0.1);
    for j in 0..2 {
        assert!((gmm.priors()[j] - 0.5).abs() < 0.02);
        for &v in gmm.variance(j) {
            assert!((v - 0.25).abs() < 0.05);
        }
    }
}

#[test]
fn reservoir_is_uniform_over_the_stream() {
    // 40 descriptors per image over 25 images; each index should be kept
    // with probability capacity / total
    let (images, per, capacity, trials) = (25usize, 40usize, 100usize, 400u64);
    let total = images * per;
    let mut counts = vec![0u64; total];
    for t in 0..trials {
        let mut sample = DescriptorSample::new(3, 1, capacity, t);
        for i in 0..images {
            let t = Tensor3::from_fn(1, per, 1, |_, c, _| (i * per + c) as f32).unwrap();
            sample.extend(&harvest(&t, 3)).unwrap();
        }
        assert_eq!(sample.len(), capacity);
        for &v in sample.points() {
            counts[v as usize] += 1;
        }
    }
    // bucket into 20 groups of 50 indices and run a chi-square test
    let expected = trials as f64 * capacity as f64 / total as f64 * 50.0;
    let chi2: f64 = counts
        .chunks(50)
        .map(|c| {
            let o = c.iter().sum::<u64>() as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    // 19 degrees of freedom, 0.999 quantile is about 43.8
    assert!(chi2 < 43.8, "chi2 = {chi2}");
}
