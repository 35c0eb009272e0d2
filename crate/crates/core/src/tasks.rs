//! Frost protection, heat protection and wind power dispatch tasks.
//!
//! Binary tasks have two actions, `no_protect` (id 0) and `protect` (id 1),
//! with piecewise-linear costs over a 3 °C ramp. Missed protection costs up to
//! `10·c` and unnecessary protection up to `10·(1−c)`.
//!
//! The wind task promises a relative power `p ∈ {0.1, …, 1.0}` (ids 1–10) or
//! switches the turbine off (id 0). Revenue is normalized to 1 at full
//! delivery, so a kept promise costs `1 − p` in forgone revenue and each unit
//! of shortfall costs `u_pen`. Curtailment is free. The off action forgoes the
//! whole revenue and pays a small standby drain.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{
    ActionSpace, CostCurve, CostFunction, DecisionError, OutcomeDomain, OutcomeTransform,
    PiecewiseLinear,
};
use crate::grid_store::Variable;

pub const MAX_COST: f64 = 10.0;
/// Width of the temperature ramp between certain loss and safety, °C.
pub const SAFE_MARGIN: f64 = 3.0;
pub const KELVIN_OFFSET: f64 = 273.15;
/// Number of delivering actions in the wind task.
pub const POWER_BINS: usize = 10;

pub const NO_PROTECT: usize = 0;
pub const PROTECT: usize = 1;
pub const TURBINE_OFF: usize = 0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TaskError {
    #[error("invalid task parameter: {0}")]
    Param(String),
    #[error("{quantity} must be non-negative, got {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

fn check_cost_ratio(c: f64) -> Result<(), TaskError> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(TaskError::Param(format!("cost ratio must lie in (0, 1), got {c}")))
    }
}

fn check_theta(theta: f64) -> Result<(), TaskError> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(TaskError::Param(format!("theta must be finite, got {theta}")))
    }
}

fn binary_actions() -> ActionSpace {
    ActionSpace::from_labels([("no_protect", 0.0), ("protect", 1.0)]).expect("static labels")
}

/// Temperatures in °C; anything at or above absolute zero.
const TEMPERATURE_DOMAIN: OutcomeDomain = OutcomeDomain {
    lower: -KELVIN_OFFSET,
    upper: f64::INFINITY,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrostTaskParams {
    /// Plants die at or below this temperature, °C.
    pub theta: f64,
    pub cost_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatTaskParams {
    /// Temperature of maximum heat-related cost, °C.
    pub theta: f64,
    pub cost_ratio: f64,
}

/// Frost protection: without protection the loss is `10c` at `t ≤ θ`, zero at
/// `t ≥ θ + 3`; protection costs the mirror image scaled by `1 − c`.
pub fn frost_cost(params: &FrostTaskParams) -> Result<CostFunction, TaskError> {
    check_theta(params.theta)?;
    check_cost_ratio(params.cost_ratio)?;
    let (lo, hi) = (params.theta, params.theta + SAFE_MARGIN);
    let miss = MAX_COST * params.cost_ratio;
    let waste = MAX_COST * (1.0 - params.cost_ratio);
    let curves = vec![
        CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![(lo, miss), (hi, 0.0)])?),
        CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![(lo, 0.0), (hi, waste)])?),
    ];
    Ok(CostFunction::new(binary_actions(), curves, TEMPERATURE_DOMAIN)?)
}

/// Heat protection: the frost design mirrored, ramping over `[θ − 3, θ]`.
pub fn heat_cost(params: &HeatTaskParams) -> Result<CostFunction, TaskError> {
    check_theta(params.theta)?;
    check_cost_ratio(params.cost_ratio)?;
    let (lo, hi) = (params.theta - SAFE_MARGIN, params.theta);
    let miss = MAX_COST * params.cost_ratio;
    let waste = MAX_COST * (1.0 - params.cost_ratio);
    let curves = vec![
        CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![(lo, 0.0), (hi, miss)])?),
        CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![(lo, waste), (hi, 0.0)])?),
    ];
    Ok(CostFunction::new(binary_actions(), curves, TEMPERATURE_DOMAIN)?)
}

/// Temperature where both frost actions cost the same, `θ + 3c`.
pub fn frost_crossing(params: &FrostTaskParams) -> f64 {
    params.theta + SAFE_MARGIN * params.cost_ratio
}

/// Temperature where both heat actions cost the same, `θ − 3c`.
pub fn heat_crossing(params: &HeatTaskParams) -> f64 {
    params.theta - SAFE_MARGIN * params.cost_ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindTaskParams {
    /// Cost per unit of under-delivered relative power; must exceed 1.
    pub u_pen: f64,
    /// Standby drain of the off action.
    pub standby_cost: f64,
}

impl WindTaskParams {
    pub const DEFAULT_STANDBY_COST: f64 = 0.02;

    pub fn new(u_pen: f64) -> Self {
        WindTaskParams {
            u_pen,
            standby_cost: Self::DEFAULT_STANDBY_COST,
        }
    }

    /// Constant cost of switching the turbine off.
    pub fn off_cost(&self) -> f64 {
        1.0 + self.standby_cost
    }

    fn validate(&self) -> Result<(), TaskError> {
        if !(self.u_pen.is_finite() && self.u_pen > 1.0) {
            return Err(TaskError::Param(format!(
                "u_pen must exceed 1, got {}",
                self.u_pen
            )));
        }
        if !(self.standby_cost > 0.0 && self.standby_cost < 0.1) {
            return Err(TaskError::Param(format!(
                "standby_cost must lie in (0, 0.1), got {}",
                self.standby_cost
            )));
        }
        Ok(())
    }
}

/// Promised relative power of delivering action `id` (1..=10).
pub fn promised_power(id: usize) -> f64 {
    id as f64 / POWER_BINS as f64
}

/// Wind dispatch: off (id 0) then promises 0.1 … 1.0 (ids 1–10).
///
/// Delivering `p` costs `(1 − p) + u_pen · max(0, p − y)` at realized
/// relative power `y`.
pub fn wind_cost(params: &WindTaskParams) -> Result<CostFunction, TaskError> {
    params.validate()?;
    let mut labels = vec![("off".to_string(), 0.0)];
    let mut curves = vec![CostCurve::Constant(params.off_cost())];
    for id in 1..=POWER_BINS {
        let p = promised_power(id);
        labels.push((format!("deliver_{p:.1}"), p));
        curves.push(CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![
            (0.0, (1.0 - p) + params.u_pen * p),
            (p, 1.0 - p),
        ])?));
    }
    let actions = ActionSpace::from_labels(labels)?;
    Ok(CostFunction::new(
        actions,
        curves,
        OutcomeDomain {
            lower: 0.0,
            upper: 1.0,
        },
    )?)
}

/// Empirical CDF of `outcomes` averaged over the grid bin `(p − 0.1, p]`,
/// i.e. `mean(clamp(p − y, 0, 0.1)) / 0.1`.
pub fn bin_averaged_cdf(outcomes: &[f64], p: f64) -> f64 {
    let width = 1.0 / POWER_BINS as f64;
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().map(|y| (p - y).clamp(0.0, width)).sum();
    sum / (width * outcomes.len() as f64)
}

/// Delivering action prescribed by the grid-rounded newsvendor quantile: the
/// largest promise `p` with `bin_averaged_cdf(p) < 1 / u_pen`.
///
/// Moving from `p − 0.1` to `p` changes the expected cost by
/// `−0.1 + u_pen · E[clamp(p − y, 0, 0.1)]`, so this is the best delivering
/// action. `None` when even 0.1 is too much.
pub fn newsvendor_action(outcomes: &[f64], u_pen: f64) -> Option<usize> {
    (1..=POWER_BINS)
        .rev()
        .find(|&id| bin_averaged_cdf(outcomes, promised_power(id)) < 1.0 / u_pen)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindTransformParams {
    pub hub_height_m: f64,
    /// Power-law shear exponent.
    pub alpha: f64,
    pub v_in: f64,
    pub v_rated: f64,
    pub v_off: f64,
}

impl Default for WindTransformParams {
    fn default() -> Self {
        WindTransformParams {
            hub_height_m: 120.0,
            alpha: 0.1,
            v_in: 3.0,
            v_rated: 13.0,
            v_off: 23.0,
        }
    }
}

impl WindTransformParams {
    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.hub_height_m > 0.0 && self.hub_height_m.is_finite()) {
            return Err(TaskError::Param(format!(
                "hub height must be positive, got {}",
                self.hub_height_m
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(TaskError::Param(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if !(0.0 < self.v_in && self.v_in < self.v_rated && self.v_rated < self.v_off) {
            return Err(TaskError::Param(format!(
                "need 0 < v_in < v_rated < v_off, got {} / {} / {}",
                self.v_in, self.v_rated, self.v_off
            )));
        }
        Ok(())
    }
}

/// Extrapolates 10 m wind speed to hub height: `v₁₀ · (h / 10)^α`.
pub fn wind_speed_to_hub(v10: f64, params: &WindTransformParams) -> Result<f64, TaskError> {
    if !(v10 >= 0.0 && v10.is_finite()) {
        return Err(TaskError::Domain {
            quantity: "wind speed",
            value: v10,
        });
    }
    Ok(v10 * (params.hub_height_m / 10.0).powf(params.alpha))
}

/// Cubic power curve, relative power in `[0, 1]`.
///
/// Zero below cut-in, `(v³ − v_in³)/(v_rated³ − v_in³)` up to rated speed,
/// one up to cut-off and zero from cut-off on.
pub fn hub_speed_to_power(v_hub: f64, params: &WindTransformParams) -> Result<f64, TaskError> {
    if !(v_hub >= 0.0 && v_hub.is_finite()) {
        return Err(TaskError::Domain {
            quantity: "hub wind speed",
            value: v_hub,
        });
    }
    let p = if v_hub < params.v_in || v_hub >= params.v_off {
        0.0
    } else if v_hub < params.v_rated {
        let cube = |v: f64| v * v * v;
        (cube(v_hub) - cube(params.v_in)) / (cube(params.v_rated) - cube(params.v_in))
    } else {
        1.0
    };
    Ok(p)
}

pub fn wind_speed_to_power(v10: f64, params: &WindTransformParams) -> Result<f64, TaskError> {
    hub_speed_to_power(wind_speed_to_hub(v10, params)?, params)
}

impl From<TaskError> for DecisionError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Domain { value, .. } => DecisionError::Domain {
                value,
                lower: 0.0,
                upper: f64::INFINITY,
            },
            TaskError::Decision(d) => d,
            other => DecisionError::Transform(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KelvinToCelsius;

impl OutcomeTransform for KelvinToCelsius {
    fn apply(&self, value: f64) -> Result<f64, DecisionError> {
        Ok(value - KELVIN_OFFSET)
    }
}

/// 10 m wind speed to relative power.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindPowerTransform(pub WindTransformParams);

impl OutcomeTransform for WindPowerTransform {
    fn apply(&self, value: f64) -> Result<f64, DecisionError> {
        Ok(wind_speed_to_power(value, &self.0)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Frost,
    Heat,
    Wind,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Frost => "frost",
            TaskKind::Heat => "heat",
            TaskKind::Wind => "wind",
        }
    }

    /// Input variable the task reads.
    pub fn variable(self) -> Variable {
        match self {
            TaskKind::Frost | TaskKind::Heat => Variable::Temperature2m,
            TaskKind::Wind => Variable::WindSpeed10m,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully parameterized task: cost function plus its outcome transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Frost(FrostTaskParams),
    Heat(HeatTaskParams),
    Wind {
        task: WindTaskParams,
        transform: WindTransformParams,
    },
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Frost(_) => TaskKind::Frost,
            Task::Heat(_) => TaskKind::Heat,
            Task::Wind { .. } => TaskKind::Wind,
        }
    }

    pub fn cost_function(&self) -> Result<CostFunction, TaskError> {
        match self {
            Task::Frost(p) => frost_cost(p),
            Task::Heat(p) => heat_cost(p),
            Task::Wind { task, transform } => {
                transform.validate()?;
                wind_cost(task)
            }
        }
    }

    /// Temperatures arrive in Kelvin, wind as 10 m speed.
    pub fn transform(&self) -> Box<dyn OutcomeTransform> {
        match self {
            Task::Frost(_) | Task::Heat(_) => Box::new(KelvinToCelsius),
            Task::Wind { transform, .. } => Box::new(WindPowerTransform(*transform)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn frost(theta: f64, c: f64) -> CostFunction {
        frost_cost(&FrostTaskParams { theta, cost_ratio: c }).unwrap()
    }

    fn heat(theta: f64, c: f64) -> CostFunction {
        heat_cost(&HeatTaskParams { theta, cost_ratio: c }).unwrap()
    }

    #[test]
    fn frost_knots() {
        let f = frost(0.0, 0.7);
        assert!((f.cost(NO_PROTECT, 0.0).unwrap() - 7.0).abs() < EPS);
        assert!((f.cost(PROTECT, 3.0).unwrap() - 3.0).abs() < EPS);
        assert_eq!(f.cost(NO_PROTECT, -5.0).unwrap(), 7.0);
        assert_eq!(f.cost(NO_PROTECT, 5.0).unwrap(), 0.0);
        assert_eq!(f.cost(PROTECT, -5.0).unwrap(), 0.0);
    }

    #[test]
    fn frost_symmetric_crossing() {
        let f = frost(0.0, 0.5);
        assert!((f.cost(NO_PROTECT, 1.5).unwrap() - 2.5).abs() < EPS);
        assert!((f.cost(PROTECT, 1.5).unwrap() - 2.5).abs() < EPS);
    }

    #[test]
    fn frost_general_crossing() {
        for &(theta, c) in &[(-4.0, 0.2), (2.0, 0.9), (0.0, 0.35)] {
            let f = frost(theta, c);
            let t = frost_crossing(&FrostTaskParams { theta, cost_ratio: c });
            assert!((t - (theta + 3.0 * c)).abs() < EPS);
            let want = 10.0 * c * (1.0 - c);
            assert!((f.cost(NO_PROTECT, t).unwrap() - want).abs() < EPS);
            assert!((f.cost(PROTECT, t).unwrap() - want).abs() < EPS);
        }
    }

    #[test]
    fn heat_knots_and_crossing() {
        let h = heat(36.0, 0.7);
        assert!((h.cost(NO_PROTECT, 36.0).unwrap() - 7.0).abs() < EPS);
        assert!((h.cost(PROTECT, 33.0).unwrap() - 3.0).abs() < EPS);
        let t = heat_crossing(&HeatTaskParams { theta: 36.0, cost_ratio: 0.7 });
        assert!((t - 33.9).abs() < EPS);
        assert!((h.cost(NO_PROTECT, t).unwrap() - 2.1).abs() < EPS);
        assert!((h.cost(PROTECT, t).unwrap() - 2.1).abs() < EPS);
    }

    #[test]
    fn heat_mirrors_frost() {
        let (theta, c) = (30.0, 0.3);
        let h = heat(theta, c);
        let f = frost(-theta, c);
        for k in 0..=80 {
            let t = 24.0 + k as f64 * 0.1;
            for a in [NO_PROTECT, PROTECT] {
                let diff = h.cost(a, t).unwrap() - f.cost(a, -t).unwrap();
                assert!(diff.abs() < EPS, "t={t} a={a}");
            }
        }
    }

    #[test]
    fn cost_ratio_validated() {
        for c in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(frost_cost(&FrostTaskParams { theta: 0.0, cost_ratio: c }).is_err());
            assert!(heat_cost(&HeatTaskParams { theta: 0.0, cost_ratio: c }).is_err());
        }
    }

    #[test]
    fn wind_formula() {
        let w = wind_cost(&WindTaskParams::new(2.0)).unwrap();
        assert_eq!(w.n_actions(), 11);
        assert!(w.cost(10, 1.0).unwrap().abs() < EPS);
        assert!((w.cost(5, 0.2).unwrap() - 1.1).abs() < EPS);
        assert!((w.cost(5, 0.8).unwrap() - 0.5).abs() < EPS);
        for y in [0.0, 0.3, 1.0] {
            assert_eq!(w.cost(TURBINE_OFF, y).unwrap(), 1.02);
        }
        assert!(w.cost(3, 1.2).is_err());
        assert_eq!(w.action_space().get(3).unwrap().payload, 0.3);
    }

    #[test]
    fn wind_params_validated() {
        assert!(wind_cost(&WindTaskParams::new(1.0)).is_err());
        assert!(wind_cost(&WindTaskParams::new(0.5)).is_err());
        assert!(wind_cost(&WindTaskParams { u_pen: 2.0, standby_cost: 0.0 }).is_err());
        assert!(wind_cost(&WindTaskParams { u_pen: 2.0, standby_cost: 0.2 }).is_err());
    }

    #[test]
    fn newsvendor_matches_argmin_over_delivering() {
        use crate::decision::expected_cost;
        let w = wind_cost(&WindTaskParams::new(4.0)).unwrap();
        let ens = [0.05, 0.33, 0.41, 0.62, 0.77, 0.78, 0.9, 1.0];
        let best = (1..=POWER_BINS)
            .min_by(|&a, &b| {
                expected_cost(&ens, a, &w)
                    .unwrap()
                    .total_cmp(&expected_cost(&ens, b, &w).unwrap())
            })
            .unwrap();
        assert_eq!(newsvendor_action(&ens, 4.0), Some(best));
        assert_eq!(bin_averaged_cdf(&[0.0], 0.1), 1.0);
        assert_eq!(newsvendor_action(&[0.0; 4], 2.0), None);
        assert_eq!(newsvendor_action(&[1.0; 4], 2.0), Some(10));
    }

    #[test]
    fn hub_extrapolation() {
        let p = WindTransformParams::default();
        assert_eq!(wind_speed_to_hub(0.0, &p).unwrap(), 0.0);
        let v = wind_speed_to_hub(10.0, &p).unwrap();
        assert!((v - 12.8209).abs() < 1e-4, "{v}");
        assert!((v - 10.0 * 12f64.powf(0.1)).abs() < EPS);
        let flat = WindTransformParams { alpha: 0.0, ..p };
        assert_eq!(wind_speed_to_hub(7.3, &flat).unwrap(), 7.3);
        assert!(matches!(wind_speed_to_hub(-1.0, &p), Err(TaskError::Domain { .. })));
    }

    #[test]
    fn power_curve_values() {
        let p = WindTransformParams::default();
        assert_eq!(hub_speed_to_power(2.0, &p).unwrap(), 0.0);
        assert_eq!(hub_speed_to_power(3.0, &p).unwrap(), 0.0);
        assert!((hub_speed_to_power(8.0, &p).unwrap() - 485.0 / 2170.0).abs() < EPS);
        assert_eq!(hub_speed_to_power(13.0, &p).unwrap(), 1.0);
        assert_eq!(hub_speed_to_power(22.9, &p).unwrap(), 1.0);
        assert_eq!(hub_speed_to_power(23.0, &p).unwrap(), 0.0);
        assert!(hub_speed_to_power(-0.1, &p).is_err());
    }

    #[test]
    fn transform_params_validated() {
        let p = WindTransformParams { v_in: 14.0, ..Default::default() };
        assert!(p.validate().is_err());
        let t = Task::Wind { task: WindTaskParams::new(2.0), transform: p };
        assert!(t.cost_function().is_err());
    }

    #[test]
    fn task_transforms() {
        let frost = Task::Frost(FrostTaskParams { theta: 0.0, cost_ratio: 0.5 });
        assert!((frost.transform().apply(273.15).unwrap()).abs() < EPS);
        let wind = Task::Wind { task: WindTaskParams::new(2.0), transform: Default::default() };
        assert_eq!(wind.transform().apply(0.0).unwrap(), 0.0);
        assert!(wind.transform().apply(-1.0).is_err());
        assert_eq!(wind.kind().variable(), Variable::WindSpeed10m);
    }
}
