//! Config-driven sweep: synthesize data, run the frost sweep config shipped
//! in `configs/frost_sweep.toml` against it, and print the aggregate table.
//!
//!     cargo run --example sweep_pipeline

use std::fs;
use std::path::Path;

use decical::report::{read_table, run_evaluate, synth_to_dir, AggregateRow, RunConfig, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let work = std::env::temp_dir().join("decical_sweep_pipeline");
    let _ = fs::remove_dir_all(&work);

    let synth = SynthConfig::from_path(&root.join("synth_temperature.toml"))?;
    let data = synth_to_dir(&synth, &work)?;
    println!("synthesized {} ensembles in {}", data.ensembles.len(), work.display());

    // The sweep config names its inputs relative to itself; point it at the
    // synthetic files instead.
    let text = fs::read_to_string(root.join("frost_sweep.toml"))?;
    let mut cfg = RunConfig::from_toml_str(&text, &work)?;
    cfg.ensemble = "ensemble_ideal.csv".into();
    cfg.observations = "observations.csv".into();
    cfg.out = "sweep_report".into();

    let report = run_evaluate(&cfg)?;
    println!("{} combos × {} leads", report.combos.len(), report.lead_hours.len());

    let rows: Vec<AggregateRow> = read_table(&cfg.out_dir(), "aggregates")?.unwrap_or_default();
    println!("combo                lead  obs.cost  cost gap");
    for r in rows {
        println!("{:20} {:4}h {:9.3} {:9.3}", r.combo, r.lead_hours, r.mean_observed_cost, r.mean_cost_gap);
    }
    Ok(())
}
