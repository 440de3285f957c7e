//! Bit-exact restarts: run a scenario straight through, then split it into
//! two halves through a checkpoint, and compare the final coefficients
//! bitwise.
//!
//! ```bash
//! cargo run --release --example checkpoint_restart
//! ```

use npd::checkpoint::read_checkpoint;
use npd::commands::{cmd_run, ExecOpts};
use npd::config::reference_scenario;

fn main() -> npd::Result<()> {
    let mut config = reference_scenario(24.0, 32, 2.0);
    config.diagnostics.positivity_tolerance = 1e-3;
    config.stepper.dt = Some(0.125); // pin dt so both paths step identically

    let root = std::env::temp_dir().join("npd_restart_example");

    // Straight through.
    let full = cmd_run(&config, &ExecOpts::new(root.join("full")))?;
    println!("uninterrupted: {} steps", full.steps);

    // First half.
    let mut first = config.clone();
    first.stepper.t_end = 1.0;
    let a = cmd_run(&first, &ExecOpts::new(root.join("half_a")))?;
    println!("first half:    {} steps -> {}", a.steps, a.final_checkpoint.display());

    // Second half resumes the checkpoint.
    let mut opts = ExecOpts::new(root.join("half_b"));
    opts.resume = Some(a.final_checkpoint.clone());
    let b = cmd_run(&config, &opts)?;
    println!("resumed half:  ends at t = {}", config.stepper.t_end);

    let end_full = read_checkpoint(&full.final_checkpoint)?;
    let end_resumed = read_checkpoint(&b.final_checkpoint)?;
    let mut identical = end_full.time() == end_resumed.time();
    let mut max_bit_diff = 0u64;
    for (x, y) in end_full
        .concentrations()
        .iter()
        .zip(end_resumed.concentrations().iter())
    {
        for (p, q) in x.coeffs().iter().zip(y.coeffs().iter()) {
            identical &= p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits();
            max_bit_diff = max_bit_diff.max(p.re.to_bits() ^ q.re.to_bits());
        }
    }
    println!("final states bitwise identical: {identical}");
    assert!(identical, "restart drifted from the uninterrupted run");
    Ok(())
}
