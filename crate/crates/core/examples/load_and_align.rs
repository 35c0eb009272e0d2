//! Loading ensemble and observation CSV files and pairing them up.
//!
//!     cargo run --example load_and_align

use std::fs;

use decical::grid_store::{
    align, load_ensemble, load_mask, load_observations, GridError, Schema, Variable,
};

const ENSEMBLE: &str = "\
init_time,lead_hours,lat,lon,member,value
2021-01-01T00:00:00Z,24,50.0,0.0,0,271.3
2021-01-01T00:00:00Z,24,50.0,0.0,1,272.9
2021-01-01T00:00:00Z,24,50.0,0.0,2,274.0
2021-01-01T00:00:00Z,24,50.0,1.5,0,275.2
2021-01-01T00:00:00Z,24,50.0,1.5,1,276.4
2021-01-01T00:00:00Z,24,50.0,1.5,2,273.8
";

const OBSERVATIONS: &str = "\
valid_time,lat,lon,value
2021-01-02T00:00:00Z,50.0,0.0,272.1
2021-01-02T00:00:00Z,50.0,1.5,274.6
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("decical_load_and_align");
    fs::create_dir_all(&dir)?;
    let (ens_path, obs_path, mask_path) =
        (dir.join("ens.csv"), dir.join("obs.csv"), dir.join("mask.csv"));
    fs::write(&ens_path, ENSEMBLE)?;
    fs::write(&obs_path, OBSERVATIONS)?;
    fs::write(&mask_path, "lat,lon\n50.0,1.5\n")?;

    let ens = load_ensemble(&ens_path, &Schema::csv(Variable::Temperature2m))?;
    let obs = load_observations(
        &obs_path,
        &Schema::csv(Variable::Temperature2m).with_grid(ens.grid().clone()),
    )?;
    println!("ensemble shape (init, lead, lat, lon, member): {:?}", ens.shape());
    println!("observation shape (time, lat, lon): {:?}", obs.shape());

    let mask = load_mask(&mask_path, ens.grid())?;
    for case in align(&ens, &obs, &mask)?.iter() {
        println!(
            "{} +{}h ({}, {}): members {:?} observed {}",
            case.init_time, case.lead_hours, case.lat, case.lon, case.members, case.observed
        );
    }

    // A point off the grid is rejected.
    fs::write(&mask_path, "lat,lon\n50.0,0.7\n")?;
    match load_mask(&mask_path, ens.grid()) {
        Err(GridError::Alignment { lat, lon }) => println!("rejected mask point ({lat}, {lon})"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
