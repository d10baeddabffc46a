//! Cross-module invariants and statistical behaviour of the estimators.

use proptest::prelude::*;
use qutrit_toffoli::certify::{
    choi_of_channel, enumerate_relevant_paulis, monte_carlo_fidelity_with, ChoiMatrix,
    EigenstateTable, McOptions,
};
use qutrit_toffoli::channel::{Channel, KrausMap};
use qutrit_toffoli::gates::{
    ideal_toffoli_unitary, toffoli_circuit, truth_table, truth_table_fidelity,
};
use qutrit_toffoli::noise::{NoiseModel, NoisyCircuit};
use qutrit_toffoli::register::{c64, RegisterLayout};
use qutrit_toffoli::tomography::{
    bootstrap_ci, ml_projection, process_fidelity, process_tomography, ChiMatrix, Sampling,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn device_channel() -> NoisyCircuit {
    NoisyCircuit::new(toffoli_circuit(), NoiseModel::device())
}

#[test]
fn truth_table_fidelity_falls_as_gates_slow_down() {
    let fidelities: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&f| {
            let circuit = toffoli_circuit().time_scaled(f).unwrap();
            truth_table_fidelity(
                &truth_table(&NoisyCircuit::new(circuit, NoiseModel::device())).unwrap(),
            )
        })
        .collect();
    assert!(
        fidelities.windows(2).all(|w| w[1] <= w[0]),
        "{fidelities:?}"
    );
    assert!(fidelities[2] < fidelities[0] - 0.05);
}

#[test]
fn chi_and_choi_overlaps_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q3 = RegisterLayout::qubits(3).unwrap();
    let mut weak = NoiseModel::device();
    weak.t1_us = [3.0, 4.0, 5.0];
    let channels: Vec<Box<dyn Channel>> = vec![
        Box::new(device_channel()),
        Box::new(NoisyCircuit::new(toffoli_circuit(), weak)),
        Box::new(KrausMap::random(q3.clone(), 2, &mut rng)),
        Box::new(KrausMap::random(q3, 4, &mut rng)),
    ];
    let chis: Vec<ChiMatrix> = channels
        .iter()
        .map(|c| {
            process_tomography(c.as_ref(), Sampling::Exact, 0)
                .unwrap()
                .chi
        })
        .collect();
    let chois: Vec<ChoiMatrix> = channels
        .iter()
        .map(|c| choi_of_channel(c.as_ref()).unwrap())
        .collect();
    for a in 0..channels.len() {
        for b in 0..channels.len() {
            let via_chi = process_fidelity(&chis[a], &chis[b]);
            let via_choi = chois[a].overlap(&chois[b]);
            assert!(
                (via_chi - via_choi).abs() < 1e-9,
                "{a} {b}: {via_chi} vs {via_choi}"
            );
        }
    }
    let target = ChoiMatrix::ideal_toffoli();
    assert!(
        (process_fidelity(&chis[0], &ChiMatrix::ideal_toffoli()) - chois[0].overlap(&target)).abs()
            < 1e-9
    );
}

#[test]
fn bootstrap_interval_covers_exact_fidelity() {
    let channel = device_channel();
    let ideal = ChiMatrix::ideal_toffoli();
    let exact = process_fidelity(
        &process_tomography(&channel, Sampling::Exact, 0)
            .unwrap()
            .chi,
        &ideal,
    );
    let reps = 200;
    let mut covered = 0;
    let mut widths = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let result = process_tomography(&channel, Sampling::Shots(1000), 1_000 + rep).unwrap();
        let ci = bootstrap_ci(&result.records, &ideal, 0.95, 100, rep).unwrap();
        covered += usize::from(ci.contains(exact));
        widths.push(ci.width());
    }
    let coverage = covered as f64 / reps as f64;
    let mean_width = widths.iter().sum::<f64>() / reps as f64;
    println!("coverage {coverage:.3}, mean width {mean_width:.4}");
    assert!(coverage >= 0.85, "coverage {coverage}");
    assert!(
        mean_width > 0.002 && mean_width < 0.06,
        "width {mean_width}"
    );
}

#[test]
fn reported_stderr_matches_seed_to_seed_spread() {
    let table = EigenstateTable::build(&device_channel()).unwrap();
    let relevant = enumerate_relevant_paulis(&ChoiMatrix::ideal_toffoli());
    let runs: Vec<_> = (0..40)
        .map(|seed| {
            monte_carlo_fidelity_with(&table, &relevant, McOptions::new(10_000, seed)).unwrap()
        })
        .collect();
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.estimate).sum::<f64>() / n;
    let spread = (runs
        .iter()
        .map(|r| (r.estimate - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();
    let reported = runs.iter().map(|r| r.std_error).sum::<f64>() / n;
    let ratio = spread / reported;
    assert!(
        (1.0 / 1.5..=1.5).contains(&ratio),
        "spread {spread} vs reported {reported}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn projection_of_shot_noise_chi_is_physical(seed in 0u64..10_000, rank in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = KrausMap::random(RegisterLayout::qubits(3).unwrap(), rank, &mut rng);
        let raw = process_tomography(&map, Sampling::Shots(1000), seed).unwrap().chi;
        let out = ml_projection(&raw).unwrap();
        prop_assert!(out.min_eigenvalue() > -1e-10);
        prop_assert!(out.trace_preservation_residual() < 1e-8);
        prop_assert!((out.trace() - raw.trace()).abs() < 1e-10);
    }

    #[test]
    fn fidelity_ignores_global_phase_of_reference(phase in 0.0f64..std::f64::consts::TAU) {
        let u = ideal_toffoli_unitary().matrix().clone();
        let rotated = ChiMatrix::from_unitary(&(&u * c64(phase.cos(), phase.sin()))).unwrap();
        let chi = process_tomography(&device_channel(), Sampling::Exact, 0).unwrap().chi;
        let a = process_fidelity(&chi, &ChiMatrix::ideal_toffoli());
        prop_assert!((a - process_fidelity(&chi, &rotated)).abs() < 1e-12);
    }
}
