use chrono::{DateTime, Duration, Utc};

use super::{
    EnsembleDataset, GridError, MissingObservation, ObservationDataset, RegionMask, Variable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CaseIndex {
    init: usize,
    lead: usize,
    lat: usize,
    lon: usize,
    obs_time: usize,
}

/// One forecast/observation pair.
#[derive(Debug, Clone, Copy)]
pub struct Case<'a> {
    pub init_time: DateTime<Utc>,
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub members: &'a [f64],
    pub observed: f64,
}

/// Forecast/observation pairs restricted to a mask, ordered by
/// (init, lead, lat, lon).
#[derive(Debug, Clone)]
pub struct AlignedView<'a> {
    ens: &'a EnsembleDataset,
    obs: &'a ObservationDataset,
    cases: Vec<CaseIndex>,
    leads: Vec<u32>,
}

/// Pairs every lead time of `ens` with its observation.
pub fn align<'a>(
    ens: &'a EnsembleDataset,
    obs: &'a ObservationDataset,
    mask: &RegionMask,
) -> Result<AlignedView<'a>, GridError> {
    align_leads(ens, obs, mask, ens.lead_hours())
}

/// Like [`align`] but restricted to the given lead times.
pub fn align_leads<'a>(
    ens: &'a EnsembleDataset,
    obs: &'a ObservationDataset,
    mask: &RegionMask,
    leads: &[u32],
) -> Result<AlignedView<'a>, GridError> {
    if ens.variable() != obs.variable() {
        return Err(GridError::Validation(format!(
            "ensemble holds {} but observations hold {}",
            ens.variable(),
            obs.variable()
        )));
    }
    if !ens.grid().same_as(obs.grid()) {
        return Err(GridError::Validation(
            "ensemble and observation grids differ".into(),
        ));
    }
    if !ens.grid().same_as(mask.grid()) {
        return Err(GridError::Validation(
            "mask grid differs from the data grid".into(),
        ));
    }
    if leads.is_empty() {
        return Err(GridError::Validation("empty lead selection".into()));
    }
    let mut lead_idx = Vec::with_capacity(leads.len());
    for &l in leads {
        let i = ens.lead_index(l).ok_or_else(|| {
            GridError::Validation(format!("lead time {l}h is not in the ensemble"))
        })?;
        lead_idx.push(i);
    }
    lead_idx.sort_unstable();
    lead_idx.dedup();

    let mut obs_time = Vec::with_capacity(ens.init_times().len() * lead_idx.len());
    let mut missing = Vec::new();
    for init in ens.init_times() {
        for &l in &lead_idx {
            let lead_hours = ens.lead_hours()[l];
            let valid = *init + Duration::hours(i64::from(lead_hours));
            match obs.time_index(&valid) {
                Some(t) => obs_time.push(t),
                None => {
                    missing.push(MissingObservation {
                        init_time: *init,
                        lead_hours,
                        valid_time: valid,
                    });
                    obs_time.push(usize::MAX);
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(GridError::Coverage { missing });
    }

    let points: Vec<(usize, usize)> = mask.points().collect();
    let mut cases = Vec::with_capacity(obs_time.len() * points.len());
    for init in 0..ens.init_times().len() {
        for (k, &lead) in lead_idx.iter().enumerate() {
            let t = obs_time[init * lead_idx.len() + k];
            for &(lat, lon) in &points {
                cases.push(CaseIndex {
                    init,
                    lead,
                    lat,
                    lon,
                    obs_time: t,
                });
            }
        }
    }
    Ok(AlignedView {
        ens,
        obs,
        cases,
        leads: lead_idx.iter().map(|&i| ens.lead_hours()[i]).collect(),
    })
}

impl<'a> AlignedView<'a> {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn variable(&self) -> Variable {
        self.ens.variable()
    }

    pub fn members(&self) -> usize {
        self.ens.members()
    }

    /// Lead times present in the view, ascending.
    pub fn leads(&self) -> &[u32] {
        &self.leads
    }

    pub fn get(&self, i: usize) -> Case<'a> {
        let c = self.cases[i];
        let grid = self.ens.grid();
        Case {
            init_time: self.ens.init_times()[c.init],
            lead_hours: self.ens.lead_hours()[c.lead],
            lat: grid.lats()[c.lat],
            lon: grid.lons()[c.lon],
            members: self.ens.members_at(c.init, c.lead, c.lat, c.lon),
            observed: self.obs.value(c.obs_time, c.lat, c.lon),
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Case<'a>> + '_ {
        (0..self.cases.len()).map(move |i| self.get(i))
    }
}
