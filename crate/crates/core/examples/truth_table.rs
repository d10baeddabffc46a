//! Truth table of the Toffoli sequence, ideal and under device decoherence.

use qutrit_toffoli::gates::{toffoli_circuit, truth_table, truth_table_fidelity};
use qutrit_toffoli::noise::{NoiseModel, NoisyCircuit};

fn main() -> qutrit_toffoli::Result<()> {
    for (name, model) in [
        ("ideal", NoiseModel::disabled()),
        ("device", NoiseModel::device()),
    ] {
        let tt = truth_table(&NoisyCircuit::new(toffoli_circuit(), model))?;
        println!("{name}: F = {:.4}", truth_table_fidelity(&tt));
        print!("{}", tt.to_csv());
        println!();
    }
    Ok(())
}
