//! Decision tasks, the Bayes decision rule and cost-gap bookkeeping.
//!
//! For an ensemble `{ŷ₁, …, ŷ_M}` the expected cost of action `a` is the
//! Monte-Carlo mean `(1/M) Σ c(a, ŷᵢ)`. The Bayes action minimizes it. Once
//! the outcome `y` is observed, the record keeps the expected cost of the
//! chosen action, the incurred cost `c(a, y)` and their absolute difference,
//! the cost gap. Gaps are formed per observation and averaged afterwards.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid_store::{format_timestamp, AlignedView};

/// Relative tolerance under which two expected costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DecisionError {
    #[error("outcome {value} outside the cost function domain [{lower}, {upper}]")]
    Domain { value: f64, lower: f64, upper: f64 },
    #[error("action space: {0}")]
    ActionSpace(String),
    #[error("cost function: {0}")]
    CostFunction(String),
    #[error("unknown action id {0}")]
    UnknownAction(usize),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("no records to aggregate")]
    EmptyGroup,
    #[error("reference metric is zero")]
    ZeroReference,
    #[error("aggregates have different group keys")]
    KeyMismatch,
    #[error("outcome transform: {0}")]
    Transform(String),
    #[error("case init {init_time}, lead {lead_hours}h, ({lat}, {lon}): {source}")]
    AtCase {
        init_time: String,
        lead_hours: u32,
        lat: f64,
        lon: f64,
        source: Box<DecisionError>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub id: usize,
    pub label: String,
    /// Task-specific value, e.g. promised relative power.
    pub payload: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    actions: Vec<Action>,
}

impl ActionSpace {
    pub fn new(actions: Vec<Action>) -> Result<Self, DecisionError> {
        if actions.is_empty() {
            return Err(DecisionError::ActionSpace("no actions".into()));
        }
        for (i, a) in actions.iter().enumerate() {
            if a.id != i {
                return Err(DecisionError::ActionSpace(format!(
                    "action at position {i} has id {}",
                    a.id
                )));
            }
            if actions[..i].iter().any(|b| b.label == a.label) {
                return Err(DecisionError::ActionSpace(format!(
                    "duplicate label `{}`",
                    a.label
                )));
            }
        }
        Ok(ActionSpace { actions })
    }

    /// Ids follow the order of `items`.
    pub fn from_labels<S: Into<String>>(
        items: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, DecisionError> {
        ActionSpace::new(
            items
                .into_iter()
                .enumerate()
                .map(|(id, (label, payload))| Action {
                    id,
                    label: label.into(),
                    payload,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Action> {
        self.actions.get(id)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }
}

/// Piecewise-linear curve through `knots`, constant beyond the first and
/// last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, DecisionError> {
        if knots.is_empty() {
            return Err(DecisionError::CostFunction("curve without knots".into()));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(DecisionError::CostFunction("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(DecisionError::CostFunction(
                "knot abscissae must be strictly increasing".into(),
            ));
        }
        Ok(PiecewiseLinear { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, y: f64) -> f64 {
        let k = &self.knots;
        let first = k[0];
        let last = k[k.len() - 1];
        if y <= first.0 {
            return first.1;
        }
        if y >= last.0 {
            return last.1;
        }
        // first index with x > y; y is strictly inside so 1 <= i < len
        let i = k.partition_point(|&(x, _)| x <= y);
        let (x0, v0) = k[i - 1];
        let (x1, v1) = k[i];
        v0 + (v1 - v0) * (y - x0) / (x1 - x0)
    }

    fn scaled(&self, factor: f64) -> Self {
        PiecewiseLinear {
            knots: self.knots.iter().map(|&(x, v)| (x, v * factor)).collect(),
        }
    }
}

/// Cost of one action as a function of the outcome.
#[derive(Clone)]
pub enum CostCurve {
    Constant(f64),
    PiecewiseLinear(PiecewiseLinear),
    /// Arbitrary curve; not supported by closed-form oracles.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl CostCurve {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            CostCurve::Constant(c) => *c,
            CostCurve::PiecewiseLinear(p) => p.eval(y),
            CostCurve::Custom(f) => f(y),
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        match self {
            CostCurve::Constant(c) => CostCurve::Constant(c * factor),
            CostCurve::PiecewiseLinear(p) => CostCurve::PiecewiseLinear(p.scaled(factor)),
            CostCurve::Custom(f) => {
                let f = Arc::clone(f);
                CostCurve::Custom(Arc::new(move |y| factor * f(y)))
            }
        }
    }
}

impl fmt::Debug for CostCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostCurve::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            CostCurve::PiecewiseLinear(p) => f.debug_tuple("PiecewiseLinear").field(p).finish(),
            CostCurve::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Closed interval of admissible outcomes; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDomain {
    pub lower: f64,
    pub upper: f64,
}

impl OutcomeDomain {
    pub const REAL: OutcomeDomain = OutcomeDomain {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, y: f64) -> bool {
        y.is_finite() && y >= self.lower && y <= self.upper
    }

    fn check(&self, y: f64) -> Result<(), DecisionError> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(DecisionError::Domain {
                value: y,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

/// A decision task: actions plus a non-negative cost `c(a, y)`.
#[derive(Debug, Clone)]
pub struct CostFunction {
    actions: ActionSpace,
    curves: Vec<CostCurve>,
    domain: OutcomeDomain,
}

impl CostFunction {
    pub fn new(
        actions: ActionSpace,
        curves: Vec<CostCurve>,
        domain: OutcomeDomain,
    ) -> Result<Self, DecisionError> {
        if curves.len() != actions.len() {
            return Err(DecisionError::CostFunction(format!(
                "{} curves for {} actions",
                curves.len(),
                actions.len()
            )));
        }
        if !(domain.lower < domain.upper) {
            return Err(DecisionError::CostFunction("empty outcome domain".into()));
        }
        for (id, curve) in curves.iter().enumerate() {
            // constant extrapolation puts the extremes of a piecewise-linear
            // curve at its knots
            let bad = match curve {
                CostCurve::Constant(c) => !(c.is_finite() && *c >= 0.0),
                CostCurve::PiecewiseLinear(p) => p.knots().iter().any(|&(_, v)| v < 0.0),
                CostCurve::Custom(_) => false,
            };
            if bad {
                return Err(DecisionError::CostFunction(format!(
                    "action {id} has negative or non-finite cost"
                )));
            }
        }
        Ok(CostFunction {
            actions,
            curves,
            domain,
        })
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn domain(&self) -> OutcomeDomain {
        self.domain
    }

    pub fn curve(&self, action: usize) -> Result<&CostCurve, DecisionError> {
        self.curves
            .get(action)
            .ok_or(DecisionError::UnknownAction(action))
    }

    pub fn cost(&self, action: usize, y: f64) -> Result<f64, DecisionError> {
        let curve = self.curve(action)?;
        self.domain.check(y)?;
        let c = curve.eval(y);
        if !(c.is_finite() && c >= 0.0) {
            return Err(DecisionError::CostFunction(format!(
                "cost {c} for action {action} at outcome {y}"
            )));
        }
        Ok(c)
    }

    /// Every cost multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self, DecisionError> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(DecisionError::CostFunction(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(CostFunction {
            actions: self.actions.clone(),
            curves: self.curves.iter().map(|c| c.scaled(factor)).collect(),
            domain: self.domain,
        })
    }
}

/// Map applied to members and observation before costing, e.g. unit
/// conversion or wind speed to power.
pub trait OutcomeTransform: Send + Sync {
    fn apply(&self, value: f64) -> Result<f64, DecisionError>;
}

impl<F> OutcomeTransform for F
where
    F: Fn(f64) -> Result<f64, DecisionError> + Send + Sync,
{
    fn apply(&self, value: f64) -> Result<f64, DecisionError> {
        self(value)
    }
}

fn sorted_samples(members: &[f64], cost_fn: &CostFunction) -> Result<Vec<f64>, DecisionError> {
    if members.is_empty() {
        return Err(DecisionError::EmptyEnsemble);
    }
    let domain = cost_fn.domain();
    for &y in members {
        domain.check(y)?;
    }
    let mut s = members.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Mean cost over samples already sorted ascending. Summing in a fixed
/// order keeps results independent of member order.
fn mean_cost_sorted(sorted: &[f64], curve: &CostCurve) -> Result<f64, DecisionError> {
    if let CostCurve::Constant(c) = curve {
        return Ok(*c);
    }
    let mut sum = 0.0;
    for &y in sorted {
        let c = curve.eval(y);
        if !(c.is_finite() && c >= 0.0) {
            return Err(DecisionError::CostFunction(format!(
                "cost {c} at outcome {y}"
            )));
        }
        sum += c;
    }
    Ok(sum / sorted.len() as f64)
}

/// Monte-Carlo expected cost `(1/M) Σ c(action, memberᵢ)`.
pub fn expected_cost(
    members: &[f64],
    action: usize,
    cost_fn: &CostFunction,
) -> Result<f64, DecisionError> {
    let curve = cost_fn.curve(action)?;
    let sorted = sorted_samples(members, cost_fn)?;
    mean_cost_sorted(&sorted, curve)
}

/// `a` beats `b` unless they are within [`TIE_TOLERANCE`].
fn strictly_less(a: f64, b: f64) -> bool {
    a < b - TIE_TOLERANCE * b.abs().max(1.0)
}

/// Bayes action: lowest expected cost, lowest id among ties.
pub fn bayes_action(members: &[f64], cost_fn: &CostFunction) -> Result<(usize, f64), DecisionError> {
    let sorted = sorted_samples(members, cost_fn)?;
    bayes_action_sorted(&sorted, cost_fn)
}

fn bayes_action_sorted(
    sorted: &[f64],
    cost_fn: &CostFunction,
) -> Result<(usize, f64), DecisionError> {
    let mut best = (0, mean_cost_sorted(sorted, &cost_fn.curves[0])?);
    for (id, curve) in cost_fn.curves.iter().enumerate().skip(1) {
        let c = mean_cost_sorted(sorted, curve)?;
        if strictly_less(c, best.1) {
            best = (id, c);
        }
    }
    Ok(best)
}

/// Outcome of one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub init_time: DateTime<Utc>,
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub action: usize,
    pub expected_cost: f64,
    pub observed_cost: f64,
    pub cost_gap: f64,
}

/// Decides every case of `view` and scores it against its observation.
///
/// Runs on the current rayon pool; output order follows the view regardless
/// of the number of workers.
pub fn evaluate(
    view: &AlignedView<'_>,
    cost_fn: &CostFunction,
    transform: Option<&dyn OutcomeTransform>,
) -> Result<Vec<DecisionRecord>, DecisionError> {
    if view.is_empty() {
        return Err(DecisionError::EmptyEnsemble);
    }
    let results: Vec<Result<DecisionRecord, DecisionError>> = (0..view.len())
        .into_par_iter()
        .map(|i| {
            let case = view.get(i);
            decide_case(case.members, case.observed, cost_fn, transform)
                .map(|(action, expected_cost, observed_cost)| DecisionRecord {
                    init_time: case.init_time,
                    lead_hours: case.lead_hours,
                    lat: case.lat,
                    lon: case.lon,
                    action,
                    expected_cost,
                    observed_cost,
                    cost_gap: (expected_cost - observed_cost).abs(),
                })
                .map_err(|e| DecisionError::AtCase {
                    init_time: format_timestamp(&case.init_time),
                    lead_hours: case.lead_hours,
                    lat: case.lat,
                    lon: case.lon,
                    source: Box::new(e),
                })
        })
        .collect();
    results.into_iter().collect()
}

/// (action, expected cost, observed cost) for one ensemble and observation.
pub fn decide_case(
    members: &[f64],
    observed: f64,
    cost_fn: &CostFunction,
    transform: Option<&dyn OutcomeTransform>,
) -> Result<(usize, f64, f64), DecisionError> {
    let (members, observed) = match transform {
        Some(t) => (
            members
                .iter()
                .map(|&m| t.apply(m))
                .collect::<Result<Vec<_>, _>>()?,
            t.apply(observed)?,
        ),
        None => (members.to_vec(), observed),
    };
    let sorted = sorted_samples(&members, cost_fn)?;
    let (action, expected) = bayes_action_sorted(&sorted, cost_fn)?;
    let observed_cost = cost_fn.cost(action, observed)?;
    Ok((action, expected, observed_cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GroupBy {
    #[default]
    Lead,
    LeadAndPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight each record by the cosine of its latitude.
    CosineLatitude,
}

/// Means over one group of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub lead_hours: u32,
    /// (lat, lon) when grouped per grid point.
    pub point: Option<(f64, f64)>,
    pub count: usize,
    pub mean_expected_cost: f64,
    pub mean_observed_cost: f64,
    /// Mean of per-observation gaps.
    pub mean_cost_gap: f64,
}

impl AggregateResult {
    /// `|mean expected − mean observed|`, the gap of averaged costs.
    pub fn gap_of_means(&self) -> f64 {
        (self.mean_expected_cost - self.mean_observed_cost).abs()
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::CostGap => self.mean_cost_gap,
            Metric::ObservedCost => self.mean_observed_cost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GroupKey {
    lead: u32,
    point: Option<(f64, f64)>,
}

impl Eq for GroupKey {}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> Ordering {
        let pt = |p: &Option<(f64, f64)>| p.unwrap_or((0.0, 0.0));
        let (a, b) = (pt(&self.point), pt(&other.point));
        self.lead
            .cmp(&other.lead)
            .then(self.point.is_some().cmp(&other.point.is_some()))
            // grid order: north to south, then west to east
            .then(b.0.total_cmp(&a.0))
            .then(a.1.total_cmp(&b.1))
    }
}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn record_order(a: &DecisionRecord, b: &DecisionRecord) -> Ordering {
    a.init_time
        .cmp(&b.init_time)
        .then(a.lead_hours.cmp(&b.lead_hours))
        .then(b.lat.total_cmp(&a.lat))
        .then(a.lon.total_cmp(&b.lon))
}

/// Groups records and averages their costs.
///
/// Within a group records are summed in (init, lead, lat, lon) order, so the
/// result does not depend on the order of `records`.
pub fn aggregate(
    records: &[DecisionRecord],
    group_by: GroupBy,
    weighting: Weighting,
) -> Result<Vec<AggregateResult>, DecisionError> {
    if records.is_empty() {
        return Err(DecisionError::EmptyGroup);
    }
    let mut groups: BTreeMap<GroupKey, Vec<&DecisionRecord>> = BTreeMap::new();
    for r in records {
        let key = GroupKey {
            lead: r.lead_hours,
            point: match group_by {
                GroupBy::Lead => None,
                GroupBy::LeadAndPoint => Some((r.lat, r.lon)),
            },
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort_by(|a, b| record_order(a, b));
            let (mut w_sum, mut e, mut o, mut g) = (0.0, 0.0, 0.0, 0.0);
            for r in &members {
                let w = match weighting {
                    Weighting::Uniform => 1.0,
                    Weighting::CosineLatitude => r.lat.to_radians().cos(),
                };
                w_sum += w;
                e += w * r.expected_cost;
                o += w * r.observed_cost;
                g += w * r.cost_gap;
            }
            if !(w_sum > 0.0) {
                return Err(DecisionError::EmptyGroup);
            }
            Ok(AggregateResult {
                lead_hours: key.lead,
                point: key.point,
                count: members.len(),
                mean_expected_cost: e / w_sum,
                mean_observed_cost: o / w_sum,
                mean_cost_gap: g / w_sum,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CostGap,
    ObservedCost,
}

/// `(reference − candidate) / reference`; 0.1 means the candidate is 10 %
/// better.
pub fn relative_improvement(
    candidate: &AggregateResult,
    reference: &AggregateResult,
    metric: Metric,
) -> Result<f64, DecisionError> {
    if candidate.lead_hours != reference.lead_hours || candidate.point != reference.point {
        return Err(DecisionError::KeyMismatch);
    }
    relative_improvement_value(candidate.metric(metric), reference.metric(metric))
}

pub fn relative_improvement_value(candidate: f64, reference: f64) -> Result<f64, DecisionError> {
    if reference == 0.0 {
        return Err(DecisionError::ZeroReference);
    }
    Ok((reference - candidate) / reference)
}

/// Writes records as `init_time,lead_hours,lat,lon,action,expected_cost,observed_cost,cost_gap`.
pub fn write_records_csv<W: Write>(records: &[DecisionRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "init_time",
        "lead_hours",
        "lat",
        "lon",
        "action",
        "expected_cost",
        "observed_cost",
        "cost_gap",
    ])?;
    for r in records {
        w.write_record([
            format_timestamp(&r.init_time),
            r.lead_hours.to_string(),
            r.lat.to_string(),
            r.lon.to_string(),
            r.action.to_string(),
            r.expected_cost.to_string(),
            r.observed_cost.to_string(),
            r.cost_gap.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_store::parse_timestamp;

    fn two_step() -> CostFunction {
        // no-protect: 5 at t <= 0 falling to 0 at t >= 3; protect mirrors it
        let actions = ActionSpace::from_labels([("a", 0.0), ("b", 1.0)]).unwrap();
        CostFunction::new(
            actions,
            vec![
                CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![(0.0, 5.0), (3.0, 0.0)]).unwrap()),
                CostCurve::PiecewiseLinear(PiecewiseLinear::new(vec![(0.0, 0.0), (3.0, 5.0)]).unwrap()),
            ],
            OutcomeDomain::REAL,
        )
        .unwrap()
    }

    fn record(lead: u32, lat: f64, gap: f64) -> DecisionRecord {
        DecisionRecord {
            init_time: parse_timestamp("2021-01-01").unwrap(),
            lead_hours: lead,
            lat,
            lon: 0.0,
            action: 0,
            expected_cost: gap,
            observed_cost: 0.0,
            cost_gap: gap,
        }
    }

    #[test]
    fn action_space_invariants() {
        assert!(ActionSpace::from_labels(Vec::<(&str, f64)>::new()).is_err());
        assert!(ActionSpace::from_labels([("x", 0.0), ("x", 1.0)]).is_err());
        let bad_ids = vec![Action { id: 1, label: "a".into(), payload: 0.0 }];
        assert!(ActionSpace::new(bad_ids).is_err());
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let p = PiecewiseLinear::new(vec![(0.0, 5.0), (3.0, 0.0)]).unwrap();
        assert_eq!(p.eval(-1.0), 5.0);
        assert_eq!(p.eval(0.0), 5.0);
        assert_eq!(p.eval(1.5), 2.5);
        assert_eq!(p.eval(3.0), 0.0);
        assert_eq!(p.eval(10.0), 0.0);
        assert!(PiecewiseLinear::new(vec![(1.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn negative_cost_rejected() {
        let actions = ActionSpace::from_labels([("a", 0.0)]).unwrap();
        assert!(CostFunction::new(actions.clone(), vec![CostCurve::Constant(-1.0)], OutcomeDomain::REAL).is_err());
        let curve = PiecewiseLinear::new(vec![(0.0, 1.0), (1.0, -0.5)]).unwrap();
        assert!(CostFunction::new(actions, vec![CostCurve::PiecewiseLinear(curve)], OutcomeDomain::REAL).is_err());
    }

    #[test]
    fn degenerate_ensemble_gives_point_cost() {
        let f = two_step();
        assert_eq!(expected_cost(&[1.2; 7], 0, &f).unwrap(), f.cost(0, 1.2).unwrap());
    }

    #[test]
    fn two_member_mean() {
        assert_eq!(expected_cost(&[0.0, 3.0], 0, &two_step()).unwrap(), 2.5);
    }

    #[test]
    fn constant_action_is_constant() {
        let actions = ActionSpace::from_labels([("c", 0.0)]).unwrap();
        let f = CostFunction::new(actions, vec![CostCurve::Constant(1.02)], OutcomeDomain::REAL).unwrap();
        assert_eq!(expected_cost(&[-4.0, 0.3, 99.0], 0, &f).unwrap(), 1.02);
    }

    #[test]
    fn ties_pick_lowest_id() {
        assert_eq!(bayes_action(&[0.0, 3.0], &two_step()).unwrap(), (0, 2.5));
    }

    #[test]
    fn domain_violation() {
        let actions = ActionSpace::from_labels([("c", 0.0)]).unwrap();
        let f = CostFunction::new(
            actions,
            vec![CostCurve::Constant(1.0)],
            OutcomeDomain { lower: 0.0, upper: 1.0 },
        )
        .unwrap();
        assert!(matches!(expected_cost(&[0.5, 1.5], 0, &f), Err(DecisionError::Domain { .. })));
        assert!(matches!(bayes_action(&[], &f), Err(DecisionError::EmptyEnsemble)));
        assert!(matches!(expected_cost(&[0.5], 3, &f), Err(DecisionError::UnknownAction(3))));
    }

    #[test]
    fn decide_case_perfect_and_spread() {
        let f = two_step();
        let (a, e, o) = decide_case(&[2.0; 5], 2.0, &f, None).unwrap();
        assert_eq!((e - o).abs(), 0.0);
        assert_eq!(a, 0);
        let (a, e, o) = decide_case(&[0.0, 3.0], 3.0, &f, None).unwrap();
        assert_eq!((a, e, o), (0, 2.5, 0.0));
    }

    #[test]
    fn transform_applies_to_both_sides() {
        let f = two_step();
        let shift = |v: f64| -> Result<f64, DecisionError> { Ok(v - 10.0) };
        let (_, e, o) = decide_case(&[10.0, 13.0], 13.0, &f, Some(&shift)).unwrap();
        assert_eq!((e, o), (2.5, 0.0));
    }

    #[test]
    fn aggregate_means_and_groups() {
        let recs = vec![record(24, 50.0, 1.0), record(24, 50.0, 3.0)];
        let agg = aggregate(&recs, GroupBy::Lead, Weighting::Uniform).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].mean_cost_gap, 2.0);
        assert_eq!(agg[0].count, 2);

        let mut recs = Vec::new();
        for lead in [24, 48] {
            for lat in [50.0, 48.5, 47.0] {
                recs.push(record(lead, lat, 1.0));
            }
        }
        let agg = aggregate(&recs, GroupBy::LeadAndPoint, Weighting::Uniform).unwrap();
        assert_eq!(agg.len(), 6);
        assert_eq!(agg[0].point, Some((50.0, 0.0)));
        assert!(matches!(aggregate(&[], GroupBy::Lead, Weighting::Uniform), Err(DecisionError::EmptyGroup)));
    }

    #[test]
    fn cosine_weighting_on_one_latitude_is_uniform() {
        let recs = vec![record(24, 60.0, 1.0), record(24, 60.0, 4.0), record(24, 60.0, 2.5)];
        let u = aggregate(&recs, GroupBy::Lead, Weighting::Uniform).unwrap();
        let c = aggregate(&recs, GroupBy::Lead, Weighting::CosineLatitude).unwrap();
        assert!((u[0].mean_cost_gap - c[0].mean_cost_gap).abs() < 1e-15);
    }

    #[test]
    fn relative_improvement_convention() {
        let mut cand = record(24, 50.0, 0.9);
        cand.observed_cost = 0.0;
        let c = aggregate(&[cand], GroupBy::Lead, Weighting::Uniform).unwrap().remove(0);
        let r = aggregate(&[record(24, 50.0, 1.0)], GroupBy::Lead, Weighting::Uniform).unwrap().remove(0);
        assert!((relative_improvement(&c, &r, Metric::CostGap).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(relative_improvement(&r, &r, Metric::CostGap).unwrap(), 0.0);
        assert!(matches!(
            relative_improvement(&c, &r, Metric::ObservedCost),
            Err(DecisionError::ZeroReference)
        ));
        let other_lead = aggregate(&[record(48, 50.0, 1.0)], GroupBy::Lead, Weighting::Uniform).unwrap().remove(0);
        assert!(matches!(
            relative_improvement(&c, &other_lead, Metric::CostGap),
            Err(DecisionError::KeyMismatch)
        ));
    }

    #[test]
    fn records_csv_header() {
        let mut buf = Vec::new();
        write_records_csv(&[record(24, 50.0, 1.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "init_time,lead_hours,lat,lon,action,expected_cost,observed_cost,cost_gap"
        );
        assert_eq!(lines.next().unwrap(), "2021-01-01T00:00:00Z,24,50,0,0,1.5,0,1.5");
    }
}
