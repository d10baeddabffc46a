//! Monte Carlo certification of the noisy Toffoli against the ideal gate.

use qutrit_toffoli::certify::{
    enumerate_relevant_paulis, exhaustive_fidelity_with, monte_carlo_fidelity_with, ChoiMatrix,
    EigenstateTable, McOptions,
};
use qutrit_toffoli::gates::toffoli_circuit;
use qutrit_toffoli::noise::{NoiseModel, NoisyCircuit};

fn main() -> qutrit_toffoli::Result<()> {
    let target = ChoiMatrix::ideal_toffoli();
    let relevant = enumerate_relevant_paulis(&target);
    println!(
        "{} of 4096 Pauli strings have non-zero ideal expectation",
        relevant.len()
    );

    let table =
        EigenstateTable::build(&NoisyCircuit::new(toffoli_circuit(), NoiseModel::device()))?;
    println!(
        "exhaustive: F = {:.4}",
        exhaustive_fidelity_with(&table, &relevant)
    );
    for samples in [100, 1_000, 10_000] {
        let est = monte_carlo_fidelity_with(&table, &relevant, McOptions::new(samples, 7))?;
        println!(
            "{samples:>6} samples: F = {:.4} ± {:.4}",
            est.estimate, est.std_error
        );
    }
    Ok(())
}
