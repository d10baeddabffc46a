//! Prints how each computational basis state moves through the
//! controlled-phase sequence, including the hidden `|20x>` excursions.

use qutrit_toffoli::gates::ccphase_trace;

fn fmt_state(state: &[qutrit_toffoli::gates::Amplitude]) -> String {
    state
        .iter()
        .map(|a| match (a.re.abs() > 1e-9, a.im.abs() > 1e-9) {
            (true, false) if a.re < 0.0 => format!("-|{}>", a.basis),
            (true, false) => format!("|{}>", a.basis),
            (false, true) if a.im < 0.0 => format!("-i|{}>", a.basis),
            (false, true) => format!("i|{}>", a.basis),
            _ => format!("({:.3}{:+.3}i)|{}>", a.re, a.im, a.basis),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn main() -> qutrit_toffoli::Result<()> {
    let trace = ccphase_trace()?;
    let gates: Vec<&str> = trace[0].steps.iter().map(|s| s.gate.as_str()).collect();
    println!(
        "{:<8}{}",
        "input",
        gates.iter().map(|g| format!("{g:<22}")).collect::<String>()
    );
    for row in &trace {
        let cells: String = row
            .steps
            .iter()
            .map(|s| format!("{:<22}", fmt_state(&s.state)))
            .collect();
        println!("|{}>   {cells}", row.input);
    }
    Ok(())
}
