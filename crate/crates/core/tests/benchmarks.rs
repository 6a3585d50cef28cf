use ipalloc::benchmarks::{
    hypervolume_2d, normalization_constants, zdt3_front_inputs, zdt3_max_form, zdt3_reference, zdt3_true_hypervolume,
    functions, Problem, ProblemKind, PROBLEM_NAMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn native_minimum(p: &Problem) -> f64 {
    let (m, s) = p.normalization[0];
    m - s * p.optimum.unwrap()
}

#[test]
fn normalised_outputs_have_unit_variance_on_fresh_samples() {
    for name in PROBLEM_NAMES.iter().filter(|n| **n != "classify2d") {
        let p = Problem::by_name(name).unwrap().with_noise(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        let vals: Vec<Vec<f64>> = (0..n).map(|_| p.value(&p.bounds.sample(&mut rng)).unwrap()).collect();
        for j in 0..p.n_outputs() {
            let mean = vals.iter().map(|v| v[j]).sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!((0.9..=1.1).contains(&var), "{name}[{j}]: variance {var}");
        }
    }
}

#[test]
fn normalisation_is_deterministic() {
    let a = Problem::by_name("rosenbrock4").unwrap();
    let b = Problem::by_name("rosenbrock4").unwrap();
    assert_eq!(a.normalization, b.normalization);
    let other = normalization_constants(ProblemKind::Rosenbrock4, &a.bounds, 1000, 1);
    assert_ne!(a.normalization, other);
}

#[test]
fn stored_optima_match_literature_values() {
    let cases = [
        ("shekel4", -10.5364),
        ("hartmann6", -3.32237),
        ("michalewicz5", -4.687658),
        ("ackley5", 0.0),
        ("rosenbrock4", 0.0),
    ];
    for (name, lit) in cases {
        let p = Problem::by_name(name).unwrap();
        let f = native_minimum(&p);
        assert!((f - lit).abs() < 1e-3, "{name}: {f} vs {lit}");
        let x = p.optimiser.clone().unwrap();
        assert!((p.value(&x).unwrap()[0] - p.optimum.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn multistart_does_not_beat_stored_optima() {
    for name in ["shekel4", "hartmann6", "michalewicz5", "ackley5", "rosenbrock4"] {
        let p = Problem::by_name(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let best = p.multistart_maximum(100_000, 30, &mut rng);
        assert!(best <= p.optimum.unwrap() + 1e-3, "{name}: multistart {best} > stored {}", p.optimum.unwrap());
    }
}

#[test]
fn noise_levels_and_determinism() {
    let p = Problem::by_name("shekel4").unwrap();
    assert_eq!(p.noise_var, 0.01);
    assert_eq!(Problem::by_name("hartmann6").unwrap().noise_var, 0.1);
    let x = [3.0, 4.0, 5.0, 6.0];
    let clean = p.value(&x).unwrap()[0];
    let quiet = p.clone().with_noise(0.0);
    assert_eq!(quiet.evaluate(&x, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()[0], clean);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 20_000;
    let resid: Vec<f64> = (0..n).map(|_| p.evaluate(&x, &mut rng).unwrap()[0] - clean).collect();
    let var = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
    assert!((var - 0.01).abs() < 0.001, "{var}");

    let a = p.evaluate(&x, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = p.evaluate(&x, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zdt3_front_and_hypervolume() {
    let x = [0.3, 0.0, 0.0, 0.0];
    let [f1, f2] = functions::zdt3_4d(&x);
    assert_eq!(f1, 0.3);
    let direct = 1.0 - 0.3f64.sqrt() - 0.3 * (3.0 * std::f64::consts::PI).sin();
    assert!((f2 - direct).abs() < 1e-15);

    let hv = zdt3_true_hypervolume();
    // The front's hypervolume against (1.1, 1.1) is known to be about 1.328.
    assert!(hv > 1.30 && hv < 1.35, "{hv}");

    let front = zdt3_front_inputs(20_000);
    let pts: Vec<[f64; 2]> = (0..front.nrows())
        .map(|i| zdt3_max_form(functions::zdt3_4d(&[front[(i, 0)], 0.0, 0.0, 0.0])))
        .collect();
    assert!(hv - hypervolume_2d(&pts, zdt3_reference()) < 1e-3);
}

#[test]
fn hypervolume_matches_grid_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let pts: Vec<[f64; 2]> = (0..20).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let exact = hypervolume_2d(&pts, [0.0, 0.0]);
        let g = 2000;
        let mut hits = 0usize;
        for i in 0..g {
            let a = (i as f64 + 0.5) / g as f64;
            for j in 0..g {
                let b = (j as f64 + 0.5) / g as f64;
                if pts.iter().any(|p| p[0] >= a && p[1] >= b) {
                    hits += 1;
                }
            }
        }
        let grid = hits as f64 / (g * g) as f64;
        assert!((exact - grid).abs() / exact < 1e-3, "{exact} vs {grid}");
    }
}

#[test]
fn classification_bayes_labels() {
    let p = Problem::by_name("classify2d").unwrap();
    assert!(p.optimum.is_none());
    let grid = ipalloc::benchmarks::classification_grid(64);
    let mut correct = 0;
    for i in 0..grid.nrows() {
        let x = [grid[(i, 0)], grid[(i, 1)]];
        let bayes = if functions::classification_probability(&x) > 0.5 { 1.0 } else { 0.0 };
        if bayes == p.true_label(&x).unwrap() {
            correct += 1;
        }
    }
    assert_eq!(correct, 4096);
    let label = p.evaluate(&[0.25, 0.3], &mut ChaCha8Rng::seed_from_u64(0)).unwrap()[0];
    assert!(label == 0.0 || label == 1.0);
}
