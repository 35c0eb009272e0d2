//! Comparing two forecasters by relative improvement, as report directories.
//!
//!     cargo run --example model_comparison

use std::fs;

use decical::report::{run_compare, run_evaluate, synth_to_dir, OutputFormat, RunConfig, SynthConfig};

const SYNTH: &str = r#"
variable = "temperature_2m"
lat_start = 52.0
lat_end = 48.0
lon_start = 0.0
lon_end = 4.0
resolution_deg = 1.0
n_days = 40
lead_hours = [24, 120]
members = 30
forecasters = ["ideal", "dispersed:0.6"]
seed = 17
"#;

fn eval_config(ensemble: &str, out: &str) -> String {
    format!(
        "ensemble = \"{ensemble}\"\nobservations = \"observations.csv\"\n\
         task = \"frost\"\ntheta = [0, 2]\ncost_ratio = 0.4\nout = \"{out}\"\n"
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = std::env::temp_dir().join("decical_model_comparison");
    let _ = fs::remove_dir_all(&work);
    synth_to_dir(&toml::from_str::<SynthConfig>(SYNTH)?, &work)?;

    let reference = RunConfig::from_toml_str(&eval_config("ensemble_ideal.csv", "ref"), &work)?;
    let candidate =
        RunConfig::from_toml_str(&eval_config("ensemble_dispersed_0_6.csv", "cand"), &work)?;
    run_evaluate(&reference)?;
    run_evaluate(&candidate)?;

    let cmp = run_compare(
        &reference.out_dir(),
        &candidate.out_dir(),
        &work.join("comparison"),
        OutputFormat::Csv,
    )?;
    println!("relative improvement of dispersed:0.6 over ideal (negative = worse)");
    for r in &cmp.aggregates {
        println!(
            "  {:20} {:4}h {:14} {:+.3}",
            r.combo,
            r.lead_hours,
            r.metric,
            r.relative_improvement.unwrap_or(f64::NAN)
        );
    }
    for r in &cmp.diagnostics {
        println!("  {:25} {:4}h {:14} {:+.3}", "", r.lead_hours, r.metric, r.relative_improvement.unwrap_or(f64::NAN));
    }
    println!("tables in {}", work.join("comparison").display());
    Ok(())
}
