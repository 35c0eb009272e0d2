//! Writing synthetic datasets to disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_all, OutputFormat, ReportError, RunConfig};
use crate::grid_store::{
    parse_timestamp, write_ensemble_binary, write_ensemble_csv, write_observations_binary,
    write_observations_csv, DataFormat, GridSpec, Variable,
};
use crate::synthetic::{generate, ForecasterKind, ForecasterSpec, SyntheticDgp};
use crate::tasks::TaskKind;

fn default_members() -> usize {
    50
}

fn default_forecasters() -> Vec<String> {
    vec!["ideal".into()]
}

fn default_leads() -> Vec<u32> {
    vec![24]
}

fn default_data_format() -> DataFormat {
    DataFormat::Csv
}

/// Settings of a `synth` run. Optional keys override the variable's default
/// generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub variable: Variable,
    pub lat_start: f64,
    pub lat_end: f64,
    pub lon_start: f64,
    pub lon_end: f64,
    pub resolution_deg: f64,
    /// First initialization date.
    #[serde(default)]
    pub start: Option<String>,
    pub n_days: usize,
    #[serde(default = "default_leads")]
    pub lead_hours: Vec<u32>,
    #[serde(default = "default_members")]
    pub members: usize,
    /// Forecaster specs such as `ideal`, `biased:2`, `dispersed:0.5`.
    #[serde(default = "default_forecasters")]
    pub forecasters: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_data_format")]
    pub data_format: DataFormat,

    #[serde(default)]
    pub sigma0: Option<f64>,
    #[serde(default)]
    pub sigma_growth: Option<f64>,
    #[serde(default)]
    pub anomaly_sd: Option<f64>,
    #[serde(default)]
    pub baseline: Option<f64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub peak_day: Option<f64>,
    #[serde(default)]
    pub lat_gradient: Option<f64>,
}

impl SynthConfig {
    pub fn from_path(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ReportError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))
    }

    pub fn dgp(&self) -> Result<SyntheticDgp, ReportError> {
        let grid = GridSpec::regular(
            self.lat_start,
            self.lat_end,
            self.lon_start,
            self.lon_end,
            self.resolution_deg,
        )
        .map_err(|e| ReportError::Config(e.to_string()))?;
        let mut dgp = match self.variable {
            Variable::Temperature2m => SyntheticDgp::temperature(grid, self.seed),
            Variable::WindSpeed10m => SyntheticDgp::wind(grid, self.seed),
        };
        if let Some(s) = &self.start {
            dgp.start = parse_timestamp(s).map_err(ReportError::Config)?;
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut dgp.sigma0, self.sigma0);
        set(&mut dgp.sigma_growth, self.sigma_growth);
        set(&mut dgp.anomaly_sd, self.anomaly_sd);
        set(&mut dgp.seasonal.baseline, self.baseline);
        set(&mut dgp.seasonal.amplitude, self.amplitude);
        set(&mut dgp.seasonal.peak_day, self.peak_day);
        set(&mut dgp.seasonal.lat_gradient, self.lat_gradient);
        dgp.validate()?;
        Ok(dgp)
    }

    pub fn forecaster_specs(&self) -> Result<Vec<ForecasterSpec>, ReportError> {
        if self.forecasters.is_empty() {
            return Err(ReportError::Config("no forecasters listed".into()));
        }
        let specs = self
            .forecasters
            .iter()
            .map(|f| {
                let kind: ForecasterKind = f.parse().map_err(ReportError::Config)?;
                let spec = ForecasterSpec::new(kind, self.members);
                spec.validate()?;
                Ok(spec)
            })
            .collect::<Result<Vec<_>, ReportError>>()?;
        let mut slugs: Vec<_> = specs.iter().map(|s| s.kind.slug()).collect();
        slugs.sort();
        if slugs.windows(2).any(|w| w[0] == w[1]) {
            return Err(ReportError::Config("duplicate forecasters".into()));
        }
        Ok(specs)
    }
}

/// Paths written by [`synth_to_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub observations: PathBuf,
    pub ensembles: Vec<(ForecasterKind, PathBuf)>,
    pub latent: PathBuf,
    /// One ready-to-run evaluation config per forecaster.
    pub configs: Vec<PathBuf>,
}

fn starter_config(variable: Variable, ensemble: &str, observations: &str, slug: &str) -> String {
    let (task, params) = match variable {
        Variable::Temperature2m => (TaskKind::Frost, "theta = [0.0]\ncost_ratio = [0.3, 0.5, 0.7]\n"),
        Variable::WindSpeed10m => (TaskKind::Wind, "u_pen = [2.0, 4.0]\n"),
    };
    format!(
        "# Generated by `synth`; edit freely.\n\
         ensemble = \"{ensemble}\"\n\
         observations = \"{observations}\"\n\
         task = \"{task}\"\n\
         {params}\
         diagnostics = true\n\
         out = \"report_{slug}\"\n"
    )
}

/// Generates the configured truth and forecasters and writes them to `out`:
/// observations, one ensemble per forecaster, the latent-law sidecar
/// `latent.csv`, and an `evaluate_<forecaster>.toml` for each ensemble.
pub fn synth_to_dir(config: &SynthConfig, out: &Path) -> Result<SynthOutput, ReportError> {
    let dgp = config.dgp()?;
    let specs = config.forecaster_specs()?;
    let run = generate(&dgp, config.n_days, &config.lead_hours)?;
    let ensembles = specs
        .iter()
        .map(|s| run.latent.forecast(s))
        .collect::<Result<Vec<_>, _>>()?;

    let ext = match config.data_format {
        DataFormat::Csv => "csv",
        DataFormat::Binary => "dcl",
    };
    let internal = |e: crate::grid_store::GridError| ReportError::Internal(e.to_string());
    let mut output = SynthOutput {
        observations: out.join(format!("observations.{ext}")),
        ensembles: Vec::new(),
        latent: out.join("latent.csv"),
        configs: Vec::new(),
    };
    write_all(out, OutputFormat::Csv, |w| {
        let obs_name = format!("observations.{ext}");
        let p = w.file(&obs_name);
        match config.data_format {
            DataFormat::Csv => write_observations_csv(&run.observations, &p),
            DataFormat::Binary => write_observations_binary(&run.observations, &p),
        }
        .map_err(internal)?;
        for (spec, ens) in specs.iter().zip(&ensembles) {
            let slug = spec.kind.slug();
            let ens_name = format!("ensemble_{slug}.{ext}");
            let p = w.file(&ens_name);
            match config.data_format {
                DataFormat::Csv => write_ensemble_csv(ens, &p),
                DataFormat::Binary => write_ensemble_binary(ens, &p),
            }
            .map_err(internal)?;
            output.ensembles.push((spec.kind, p));

            let cfg_path = w.file(&format!("evaluate_{slug}.toml"));
            let text = starter_config(config.variable, &ens_name, &obs_name, &slug);
            debug_assert!(RunConfig::from_toml_str(&text, out).is_ok());
            fs::write(&cfg_path, text)
                .map_err(|e| ReportError::Internal(format!("{}: {e}", cfg_path.display())))?;
            output.configs.push(cfg_path);
        }
        let p = w.file("latent.csv");
        run.latent
            .write_csv(&p)
            .map_err(|e| ReportError::Internal(e.to_string()))?;
        Ok(())
    })?;
    Ok(output)
}
