//! Process tomography of the noisy Toffoli with shot noise, physicality
//! projection and a bootstrap confidence interval.

use qutrit_toffoli::gates::toffoli_circuit;
use qutrit_toffoli::noise::{NoiseModel, NoisyCircuit};
use qutrit_toffoli::tomography::{
    bootstrap_ci, chi_basis_label, ml_projection, process_fidelity, process_tomography, ChiMatrix,
    Sampling,
};

fn main() -> qutrit_toffoli::Result<()> {
    let channel = NoisyCircuit::new(toffoli_circuit(), NoiseModel::device());
    let ideal = ChiMatrix::ideal_toffoli();

    let exact = process_tomography(&channel, Sampling::Exact, 0)?;
    println!(
        "exact: F = {:.4}, trace deficit {:.4}",
        process_fidelity(&exact.chi, &ideal),
        exact.trace_deficit()
    );

    let noisy = process_tomography(&channel, Sampling::Shots(1000), 42)?;
    let ml = ml_projection(&noisy.chi)?;
    let ci = bootstrap_ci(&noisy.records, &ideal, 0.95, 100, 42)?;
    println!(
        "1000 shots: raw F = {:.4} [{:.4}, {:.4}], min eigenvalue {:.2e}",
        process_fidelity(&noisy.chi, &ideal),
        ci.low,
        ci.high,
        noisy.chi.min_eigenvalue()
    );
    println!(
        "projected: F = {:.4}, min eigenvalue {:.2e}",
        process_fidelity(&ml, &ideal),
        ml.min_eigenvalue()
    );

    let mut bars: Vec<(usize, f64)> = (0..64).map(|m| (m, ml.matrix()[(m, m)].re)).collect();
    bars.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("largest diagonal elements:");
    for (m, v) in bars.iter().take(5) {
        println!("  {:<4}{v:.4}", chi_basis_label(*m));
    }
    Ok(())
}
