use gpreg::gp::{self, fit, optimize_hyperparameters, Dataset, Kernel};
use gpreg::numerics::{cholesky_factor, Matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

fn points(dim: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), n)
}

fn min_separation(xs: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..xs.len() {
        for j in 0..i {
            let d: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            best = best.min(d);
        }
    }
    best
}

proptest! {
    #[test]
    fn kernel_is_symmetric(x in prop::collection::vec(-5.0f64..5.0, 3), y in prop::collection::vec(-5.0f64..5.0, 3), l in 0.1f64..5.0, s in 0.1f64..4.0) {
        let k = Kernel::isotropic(s, l, 0.0).unwrap();
        prop_assert_eq!(k.eval(&x, &y).unwrap().to_bits(), k.eval(&y, &x).unwrap().to_bits());
        prop_assert!(k.eval(&x, &y).unwrap() <= s);
    }

    #[test]
    fn noise_free_fit_interpolates(xs in points(2, 6), ys in prop::collection::vec(-5.0f64..5.0, 6)) {
        prop_assume!(min_separation(&xs) > 0.3);
        let m = fit(&Dataset::new(xs.clone(), ys.clone()).unwrap(), &Kernel::isotropic(1.0, 1.0, 1e-10).unwrap()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((m.predict_mean(x).unwrap() - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn variance_within_prior(xs in points(3, 5), ys in prop::collection::vec(-5.0f64..5.0, 5), probe in prop::collection::vec(-6.0f64..6.0, 3), s in 0.2f64..3.0, l in 0.2f64..3.0) {
        let m = fit(&Dataset::new(xs, ys).unwrap(), &Kernel::isotropic(s, l, 1e-6).unwrap()).unwrap();
        let v = m.predict_variance(&probe).unwrap();
        prop_assert!((0.0..=s + 1e-9).contains(&v));
    }

    #[test]
    fn nested_data_never_raises_variance(xs in points(2, 8), ys in prop::collection::vec(-5.0f64..5.0, 8), probes in points(2, 10)) {
        let data = Dataset::new(xs, ys).unwrap();
        let k = Kernel::isotropic(1.0, 1.0, 1e-6).unwrap();
        let mut prev: Option<gp::GpModel> = None;
        for n in 1..=data.len() {
            let m = fit(&data.prefix(n), &k).unwrap();
            if let Some(p) = &prev {
                for x in &probes {
                    prop_assert!(m.predict_variance(x).unwrap() <= p.predict_variance(x).unwrap() + 1e-8);
                }
            }
            prev = Some(m);
        }
    }

    #[test]
    fn rank_one_update_matches_refit(xs in points(2, 5), ys in prop::collection::vec(-5.0f64..5.0, 5), probe in prop::collection::vec(-3.0f64..3.0, 2)) {
        let data = Dataset::new(xs.clone(), ys).unwrap();
        let k = Kernel::isotropic(1.0, 1.0, 1e-6).unwrap();
        let small = fit(&data.prefix(4), &k).unwrap();
        let full = fit(&data, &k).unwrap();
        let predicted = small.predict_variance(&probe).unwrap() - small.variance_reduction(&xs[4], &probe).unwrap();
        prop_assert!((predicted - full.predict_variance(&probe).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn optimizer_never_scores_below_init(xs in points(1, 6), ys in prop::collection::vec(-2.0f64..2.0, 6), l in 0.2f64..3.0) {
        let data = Dataset::new(xs, ys).unwrap();
        let init = Kernel::isotropic(1.0, l, 1e-4).unwrap();
        let base = fit(&data, &init).unwrap().log_marginal_likelihood();
        let opt = optimize_hyperparameters(&data, &init, 60).unwrap();
        prop_assert!(opt.log_marginal_likelihood >= base);
    }
}

/// Joint draw of a zero-mean GP with kernel `k` at `xs`.
fn draw(k: &Kernel, xs: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = xs.len();
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = k.eval(&xs[i], &xs[j]).unwrap();
        }
    }
    let l = cholesky_factor(&c, 1e-10).unwrap().factor;
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    l.mul_vec(&z).unwrap()
}

#[test]
fn variance_is_expected_generalization_error() {
    let k = Kernel::isotropic(1.0, 1.0, 1e-10).unwrap();
    let train: Vec<Vec<f64>> = [-2.0, -0.7, 0.4, 1.5, 2.6].iter().map(|x| vec![*x]).collect();
    let tests: Vec<Vec<f64>> = [-1.4, -0.1, 0.9, 2.0, 3.5].iter().map(|x| vec![*x]).collect();
    let all: Vec<Vec<f64>> = train.iter().chain(&tests).cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 200;
    let mut sq = vec![0.0; tests.len()];
    let mut variance = vec![0.0; tests.len()];
    for _ in 0..draws {
        let f = draw(&k, &all, &mut rng);
        let m = fit(&Dataset::new(train.clone(), f[..train.len()].to_vec()).unwrap(), &k).unwrap();
        for (i, x) in tests.iter().enumerate() {
            let p = m.predict(x).unwrap();
            sq[i] += (p.mean - f[train.len() + i]).powi(2) / draws as f64;
            variance[i] = p.variance;
        }
    }
    // Pool the normalized errors over the probe points.
    let ratio: f64 = sq.iter().zip(&variance).map(|(e, v)| e / v).sum::<f64>() / tests.len() as f64;
    assert!((ratio - 1.0).abs() <= 0.15, "mean squared error / variance = {ratio}");
}

#[test]
fn recovers_short_lengthscale() {
    let truth = Kernel::isotropic(1.0, 0.5, 1e-6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = Uniform::new(0.0, 5.0).unwrap();
    let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![u.sample(&mut rng)]).collect();
    let ys = draw(&truth, &xs, &mut rng);
    let init = Kernel::isotropic(1.0, 1.0, 1e-6).unwrap();
    let opt = optimize_hyperparameters(&Dataset::new(xs, ys).unwrap(), &init, 200).unwrap();
    let l = opt.kernel.lengthscales[0];
    assert!((0.25..=1.0).contains(&l), "recovered lengthscale {l}");
}

#[test]
fn identical_inputs_need_jitter() {
    let d = Dataset::new(vec![vec![0.3], vec![0.3]], vec![1.0, 1.0]).unwrap();
    let m = fit(&d, &Kernel::isotropic(1.0, 1.0, 0.0).unwrap()).unwrap();
    assert!(m.diagnostics().degenerate_gram);
}
