// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use statetrace::evaluation::{cov_two_sample_test, CovTestOptions};
use statetrace::numerics::Matrix;
use statetrace::synth::{
    generate_subject, make_benchmark, rest_template, task_template, Block, Paradigm,
    StateGenerator, StateSpec,
};

fn empirical_covariance(m: &Matrix) -> Matrix {
    let (n, k) = m.shape();
    let means: Vec<f64> = (0..k)
        .map(|c| m.column(c).iter().sum::<f64>() / n as f64)
        .collect();
    let mut v = vec![0.0; k * k];
    for r in m.row_iter() {
        for i in 0..k {
            for j in 0..k {
                v[i * k + j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    Matrix::new(k, k, v.iter().map(|x| x / n as f64).collect()).unwrap()
}

#[test]
fn gaussian_state_covariance_converges() {
    let template = task_template(4, 2000, 9).unwrap();
    let state = template.states[1].clone();
    let StateGenerator::Gaussian { covariance } = &state.generator else {
        panic!("task states are Gaussian");
    };
    let paradigm = Paradigm::new(vec![Block {
        label: state.label.clone(),
        duration: 2000,
    }])
    .unwrap();
    for seed in 0..5 {
        let (u, cps) = generate_subject("lln", &paradigm, std::slice::from_ref(&state), seed, None).unwrap();
        assert!(cps.is_empty());
        let diff = empirical_covariance(u.data())
            .add(&covariance.scale(-1.0))
            .unwrap();
        assert!(
            diff.frobenius_norm() <= 0.1 * covariance.frobenius_norm(),
            "seed {seed}: {} vs {}",
            diff.frobenius_norm(),
            covariance.frobenius_norm()
        );
    }
}

#[test]
fn distinct_states_are_detectably_different() {
    let template = task_template(5, 100, 4).unwrap();
    let states: Vec<StateSpec> = template.states[..2].to_vec();
    let paradigm = Paradigm::new(
        states
            .iter()
            .map(|s| Block {
                label: s.label.clone(),
                duration: 100,
            })
            .collect(),
    )
    .unwrap();
    let mut rejected = 0;
    for seed in 0..100 {
        let (u, cps) = generate_subject("d", &paradigm, &states, seed, None).unwrap();
        let split = cps[0] - 1;
        let a = u.data().slice_rows(0, split);
        let b = u.data().slice_rows(split, u.len());
        let opts = CovTestOptions {
            seed,
            ..CovTestOptions::default()
        };
        if cov_two_sample_test(&a, &b, &opts).unwrap().p_value < 0.05 {
            rejected += 1;
        }
    }
    assert!(rejected >= 80, "rejected {rejected}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn benchmarks_are_finite_with_interior_ground_truth(
        seed in 0u64..1000,
        k in 1usize..6,
        block_len in 8usize..30,
        jitter in 0usize..3,
        rest in any::<bool>(),
        smoothing in prop::option::of(0.5f64..3.0),
    ) {
        let mut template = if rest {
            rest_template(k, block_len, seed).unwrap()
        } else {
            task_template(k, block_len, seed).unwrap()
        };
        template.temporal_smoothing = smoothing;
        let b = make_benchmark(2, 1, 1, &template, jitter, seed).unwrap();
        for s in b.subjects() {
            let t = s.data.len();
            prop_assert!(s.data.data().values().iter().all(|v| v.is_finite()));
            prop_assert!(s.change_points.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.change_points.iter().all(|&c| c > 1 && c < t));
            prop_assert_eq!(s.change_points.len(), template.paradigm.blocks.len() - 1);
        }
    }
}
