//! Loads device parameters from flat key-value text and compares truth-table
//! fidelity for the measured device and an improved one.

use qutrit_toffoli::gates::{toffoli_circuit, truth_table, truth_table_fidelity};
use qutrit_toffoli::noise::{DeviceConfig, NoisyCircuit};

const IMPROVED: &str = "
t1_a_us = 5.0
t1_b_us = 5.0
t1_c_us = 5.0
t2star_a_us = 4.0
t2star_b_us = 4.0
t2star_c_us = 4.0
";

fn main() -> qutrit_toffoli::Result<()> {
    for (name, text) in [("measured", ""), ("improved", IMPROVED)] {
        let model = DeviceConfig::parse(text)?.noise_model()?;
        let tt = truth_table(&NoisyCircuit::new(toffoli_circuit(), model))?;
        println!("{name:<9} F = {:.4}", truth_table_fidelity(&tt));
    }
    Ok(())
}
