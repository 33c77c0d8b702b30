//! Cross-module integration checks on the benchmark fixture: golden CDF
//! field, warm-start behavior, oracle-backed nesting, and bandwidth
//! selection behavior under dependence.

mod support;

use std::sync::OnceLock;

use pathbounds::assembly::{FunctionalKind, FunctionalSpec, FunctionalVector, IndicatorMatrix};
use pathbounds::cdf::{cdf_field, cv_bandwidth, CdfField};
use pathbounds::grid::{Dataset, Grid};
use pathbounds::paths::{BasisSpec, CoefficientLaw, Direction, PathSampler, ShapeFilter};
use pathbounds::qp::{solve, AdmmParams, QpProblem, Sense, WarmStart};
use pathbounds::sim::SimSpec;

fn benchmark_field() -> &'static CdfField {
    static FIELD: OnceLock<CdfField> = OnceLock::new();
    FIELD.get_or_init(|| {
        let data = SimSpec::benchmark().generate(17).expect("simulate");
        let grid = Grid::dyadic(3).expect("grid");
        cdf_field(&data, &grid, 0.1).expect("field")
    })
}

/// The benchmark dataset's tabulated field is pinned: any drift in the
/// generator, the composition, or the estimator shows up here.
#[test]
fn benchmark_cdf_matches_golden_file() {
    let field = benchmark_field();
    let golden_path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/benchmark_cdf.json");
    let golden: Vec<f64> =
        serde_json::from_str(&std::fs::read_to_string(&golden_path).expect("golden file"))
            .expect("golden json");
    assert_eq!(field.values().len(), golden.len());
    for (i, (got, want)) in field.values().iter().zip(&golden).enumerate() {
        assert!(
            (got - want).abs() < 1e-12,
            "cell {i}: {got} vs golden {want}"
        );
    }
}

/// Warm-started solve on the benchmark fixture: same value, no extra
/// iterations.
#[test]
fn warm_start_on_benchmark_fixture() {
    let field = benchmark_field();
    let grid = field.grid().clone();
    let basis = BasisSpec::new(1..=5, CoefficientLaw::uniform(0.35)).unwrap();
    let functional = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
    let mut sampler = PathSampler::new(basis, grid.clone(), 4242);
    let pairs = sampler.sample_pairs(60, None).unwrap();
    let matrix = IndicatorMatrix::build(&pairs, &grid).unwrap();
    let values = FunctionalVector::build(&pairs, &functional, &grid).unwrap();
    for sense in [Sense::Lower, Sense::Upper] {
        let problem = QpProblem {
            matrix: &matrix,
            target: field.values(),
            objective: values.values(),
            penalty: 5.0,
            sense,
        };
        let cold = solve(&problem, &AdmmParams::default(), None).unwrap();
        let start = WarmStart::from_solution(&cold);
        let warm = solve(&problem, &AdmmParams::default(), Some(&start)).unwrap();
        assert!(
            (warm.functional_value - cold.functional_value).abs() < 1e-6,
            "{sense:?}: {} vs {}",
            warm.functional_value,
            cold.functional_value
        );
        assert!(warm.iterations <= cold.iterations);
    }
}

/// Restricting a pool to its monotone subset cannot improve either
/// minimized program; verified entirely through the projected-gradient
/// oracle, independent of the production solver.
#[test]
fn nesting_holds_under_oracle_solves() {
    let field = benchmark_field();
    let grid = field.grid().clone();
    let functional = FunctionalSpec::new(FunctionalKind::Level { x0: 0.5 }).unwrap();
    let basis = BasisSpec::new(1..=3, CoefficientLaw::uniform(0.35)).unwrap();
    let filter = ShapeFilter::both(Direction::NonIncreasing, Direction::NonDecreasing);
    for seed in 0..5u64 {
        let mut sampler = PathSampler::new(basis.clone(), grid.clone(), 3100 + seed);
        let mut pairs = sampler.sample_pairs(18, None).unwrap();
        pairs.extend(sampler.sample_shaped_pairs(8, &filter));
        let subset: Vec<_> = pairs.iter().filter(|p| filter.accepts(p)).cloned().collect();
        assert!(!subset.is_empty());

        let program_value = |set: &[pathbounds::paths::PathPair], sense: Sense| -> f64 {
            let matrix = IndicatorMatrix::build(set, &grid).unwrap();
            let values = FunctionalVector::build(set, &functional, &grid).unwrap();
            let problem = QpProblem {
                matrix: &matrix,
                target: field.values(),
                objective: values.values(),
                penalty: 5.0,
                sense,
            };
            let w = support::projected_gradient(&problem, 1e-10, 2_000_000);
            let mut fit = vec![0.0; matrix.nrows()];
            matrix.mul_vec(&w, &mut fit);
            let misfit: f64 = fit
                .iter()
                .zip(field.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let sign = match sense {
                Sense::Lower => 1.0,
                Sense::Upper => -1.0,
            };
            0.5 * 5.0 * misfit + sign * support::dot(&w, values.values())
        };

        for sense in [Sense::Lower, Sense::Upper] {
            let full = program_value(&pairs, sense);
            let sub = program_value(&subset, sense);
            assert!(
                sub >= full - 1e-6,
                "seed {seed} {sense:?}: subset {sub} beats full {full}"
            );
        }
    }
}

/// A strongly instrument-dependent dataset wants a smaller bandwidth than
/// an independent one of the same size, in the majority of paired draws.
#[test]
fn cv_prefers_smaller_bandwidth_under_dependence() {
    use rand::{Rng, SeedableRng};
    let grid = Grid::dyadic(2).unwrap();
    let candidates = [0.05, 0.2, 0.8];
    let mut wins = 0;
    let trials = 20;
    for seed in 0..trials {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7000 + seed);
        let n = 200;
        let mut dependent = Vec::with_capacity(n);
        let mut independent = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = rng.gen();
            let noise: f64 = rng.gen_range(-0.05..0.05);
            let x_dep = (z + noise).clamp(0.0, 1.0);
            let y_dep = (x_dep + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0);
            dependent.push([y_dep, x_dep, z]);
            let x_ind: f64 = rng.gen();
            let y_ind = (x_ind + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0);
            independent.push([y_ind, x_ind, z]);
        }
        let h_dep = cv_bandwidth(
            &Dataset::from_unit_records(dependent).unwrap(),
            &grid,
            &candidates,
        )
        .unwrap();
        let h_ind = cv_bandwidth(
            &Dataset::from_unit_records(independent).unwrap(),
            &grid,
            &candidates,
        )
        .unwrap();
        if h_dep < h_ind {
            wins += 1;
        }
    }
    assert!(
        wins * 2 > trials,
        "dependence chose the smaller bandwidth in only {wins} of {trials} trials"
    );
}

/// Cross-validated choice on a fixed dataset is pinned; re-running must
/// not move it.
#[test]
fn cv_choice_is_pinned_on_fixed_dataset() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7777);
    let records: Vec<[f64; 3]> = (0..120)
        .map(|_| {
            let z: f64 = rng.gen();
            let x = (z + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0);
            let y = (x + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0);
            [y, x, z]
        })
        .collect();
    let data = Dataset::from_unit_records(records).unwrap();
    let grid = Grid::dyadic(2).unwrap();
    let h = cv_bandwidth(&data, &grid, &[0.05, 0.1, 0.2]).unwrap();
    // frozen after the first computation
    assert_eq!(h, 0.05);
    assert_eq!(cv_bandwidth(&data, &grid, &[0.05, 0.1, 0.2]).unwrap(), h);
}
