//! Single-qutrit decoherence over the 67 ns gate window on qubit A.

use qutrit_toffoli::noise::{amplitude_damping_qutrit, dephasing_qutrit, DeviceParams, NoiseModel};
use qutrit_toffoli::register::{c64, max_abs_diff, CMatrix};

fn main() -> qutrit_toffoli::Result<()> {
    let model = NoiseModel::from_device(&DeviceParams::default())?;
    let t = 67.0;
    let damping = amplitude_damping_qutrit(t, model.t1_us[0], model.relaxation_scale2)?;
    let dephasing = dephasing_qutrit(
        t,
        model.tphi_us[0],
        model.dephasing_scale2,
        model.dephasing_02,
    )?;
    println!(
        "T1 = {} us, Tphi = {:.3} us",
        model.t1_us[0], model.tphi_us[0]
    );
    for (name, ch) in [("amplitude damping", &damping), ("dephasing", &dephasing)] {
        let dev = max_abs_diff(&ch.completeness(), &CMatrix::identity(3, 3));
        println!(
            "{name}: {} Kraus operators, completeness error {dev:.1e}",
            ch.ops.len()
        );
    }
    let plus = CMatrix::from_fn(3, 3, |r, c| {
        if r < 2 && c < 2 {
            c64(0.5, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let out = dephasing.apply(&damping.apply(&plus));
    println!(
        "|+> after {t} ns: P(1) = {:.4}, |rho01| = {:.4}",
        out[(1, 1)].re,
        out[(0, 1)].norm()
    );
    let two = CMatrix::from_fn(3, 3, |r, c| {
        if r == 2 && c == 2 {
            c64(1.0, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let out = damping.apply(&two);
    println!(
        "|2> after {t} ns: populations {:.4} {:.4} {:.4}",
        out[(0, 0)].re,
        out[(1, 1)].re,
        out[(2, 2)].re
    );
    Ok(())
}
