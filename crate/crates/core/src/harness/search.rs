use crate::error::{Error, Result};
use crate::harness::scenario::{is_discrete, Evaluation, Protocol, Scenario};
use crate::rate::RateBreakdown;
use crate::states::QkdProtocol;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MIN_GRID: usize = 40;
const GOLDEN_PASSES: usize = 3;
const GOLDEN_ITERATIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdTarget {
    InitialFidelity,
    GateQuality,
}

impl ThresholdTarget {
    pub fn parameter(self) -> &'static str {
        match self {
            ThresholdTarget::InitialFidelity => "F0",
            ThresholdTarget::GateQuality => "p_G",
        }
    }
}

/// Smallest value of one state-level parameter for which the secret fraction is positive. The
/// other parameters come from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdQuery {
    pub target: ThresholdTarget,
    pub base: Scenario,
}

impl ThresholdQuery {
    pub fn new(protocol: Protocol, target: ThresholdTarget, nesting: u32, rounds: u32, qkd: QkdProtocol) -> Self {
        let mut base = Scenario::new(protocol);
        base.nesting = nesting;
        base.rounds = rounds;
        base.qkd = qkd;
        base.f0 = 1.0;
        base.p_g = 1.0;
        Self { target, base }
    }

    fn domain(&self) -> Result<(f64, f64)> {
        match (self.base.protocol, self.target) {
            (Protocol::Original, ThresholdTarget::InitialFidelity) => Ok((0.25, 1.0)),
            (Protocol::Original, ThresholdTarget::GateQuality) => Ok((0.0, 1.0)),
            (Protocol::Hybrid, ThresholdTarget::InitialFidelity) => Ok((0.5, 1.0)),
            (Protocol::Hybrid, ThresholdTarget::GateQuality) => Ok((1e-9, 1.0)),
            (Protocol::Ensemble, _) => Err(Error::Config("thresholds are defined for the original and hybrid protocols".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Value(f64),
    /// Positive secret fraction over the whole domain.
    NoConstraint,
    /// Non-positive secret fraction over the whole domain.
    Infeasible,
}

pub fn bisect_threshold(q: &ThresholdQuery, tol: f64) -> Result<Threshold> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let name = q.target.parameter();
    let (mut lo, mut hi) = q.domain()?;
    let f = |x: f64| q.base.with(name, x)?.signed_secret_fraction();
    if f(lo)? > 0.0 {
        return Ok(Threshold::NoConstraint);
    }
    if f(hi)? <= 0.0 {
        return Ok(Threshold::Infeasible);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold::Value(0.5 * (lo + hi)))
}

/// Spacing of grid points along a continuous axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisScale {
    #[default]
    Linear,
    /// Log-spaced values; needs lo > 0.
    Log,
    /// Log-spaced distance below `hi`, down to a millionth of the range. Suits fidelities whose
    /// useful region hugs 1.
    LogUpper,
}

const LOG_UPPER_DECADES: f64 = 6.0;

impl std::str::FromStr for AxisScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(AxisScale::Linear),
            "log" => Ok(AxisScale::Log),
            "log-upper" => Ok(AxisScale::LogUpper),
            other => Err(Error::Config(format!("unknown axis scale '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: AxisScale,
}

impl ContinuousAxis {
    pub fn new(name: &str, lo: f64, hi: f64, scale: AxisScale) -> Result<Self> {
        if is_discrete(name) {
            return Err(Error::Config(format!("{name} is discrete; enumerate it instead")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) || (scale == AxisScale::Log && lo <= 0.0) {
            return Err(Error::Config(format!("invalid bounds [{lo}, {hi}] for {name}")));
        }
        Ok(Self {
            name: name.to_string(),
            lo,
            hi,
            scale,
        })
    }

    pub fn linear(name: &str, lo: f64, hi: f64) -> Result<Self> {
        Self::new(name, lo, hi, AxisScale::Linear)
    }

    fn to_unit(&self, x: f64) -> f64 {
        if self.hi == self.lo {
            return 0.0;
        }
        let u = match self.scale {
            AxisScale::Linear => (x - self.lo) / (self.hi - self.lo),
            AxisScale::Log => (x / self.lo).ln() / (self.hi / self.lo).ln(),
            AxisScale::LogUpper => -((self.hi - x) / (self.hi - self.lo)).log10() / LOG_UPPER_DECADES,
        };
        u.clamp(0.0, 1.0)
    }

    /// Maps [0, 1] onto the axis.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = match self.scale {
            AxisScale::Linear => self.lo + u * (self.hi - self.lo),
            AxisScale::Log => self.lo * (self.hi / self.lo).powf(u),
            AxisScale::LogUpper => self.hi - (self.hi - self.lo) * 10f64.powf(-LOG_UPPER_DECADES * u),
        };
        x.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteAxis {
    pub name: String,
    pub values: Vec<u32>,
}

impl DiscreteAxis {
    pub fn new(name: &str, values: Vec<u32>) -> Result<Self> {
        if !is_discrete(name) {
            return Err(Error::Config(format!("{name} is continuous")));
        }
        if values.is_empty() {
            return Err(Error::Config(format!("empty value set for {name}")));
        }
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }
}

/// Parameters to maximize the key rate over, starting from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSpec {
    pub base: Scenario,
    pub continuous: Vec<ContinuousAxis>,
    pub discrete: Vec<DiscreteAxis>,
    pub grid: usize,
}

impl OptimizeSpec {
    pub fn new(base: Scenario) -> Self {
        Self {
            base,
            continuous: Vec::new(),
            discrete: Vec::new(),
            grid: MIN_GRID,
        }
    }

    pub fn continuous(mut self, axis: ContinuousAxis) -> Self {
        self.continuous.push(axis);
        self
    }

    pub fn discrete(mut self, axis: DiscreteAxis) -> Self {
        self.discrete.push(axis);
        self
    }

    pub fn names(&self) -> Vec<&str> {
        self.discrete
            .iter()
            .map(|a| a.name.as_str())
            .chain(self.continuous.iter().map(|a| a.name.as_str()))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let names = self.names();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Config(format!("{n} is optimized twice")));
            }
            self.base.get(n)?;
        }
        if self.grid < MIN_GRID && !self.continuous.is_empty() {
            return Err(Error::Config(format!("grid needs at least {MIN_GRID} points per axis")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub params: BTreeMap<String, f64>,
    pub scenario: Scenario,
    pub evaluation: Evaluation,
    pub evaluations: usize,
    pub failed_evaluations: usize,
}

impl Optimum {
    pub fn rate(&self) -> &RateBreakdown {
        &self.evaluation.rate
    }
}

struct Candidate {
    scenario: Scenario,
    evaluation: Option<Evaluation>,
}

impl Candidate {
    fn objective(&self) -> f64 {
        self.evaluation.as_ref().map_or(f64::NEG_INFINITY, |e| e.rate.r_qkd)
    }
}

fn evaluate(s: Scenario) -> Candidate {
    let evaluation = s.evaluate().ok();
    Candidate { scenario: s, evaluation }
}

fn cartesian(axes: &[DiscreteAxis]) -> Vec<Vec<u32>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect()
    })
}

/// Coarse grid over the continuous axes for every discrete combination, then coordinate-wise
/// golden-section refinement around the best grid point. Ties keep the earliest point.
pub fn optimize(spec: &OptimizeSpec) -> Result<Optimum> {
    spec.validate()?;
    let mut starts = Vec::new();
    for combo in cartesian(&spec.discrete) {
        let mut s = spec.base.clone();
        for (axis, &v) in spec.discrete.iter().zip(&combo) {
            s.set(&axis.name, f64::from(v))?;
        }
        starts.push(s);
    }
    let dims = spec.continuous.len();
    let n = if dims == 0 { 1 } else { spec.grid };
    let total = n.checked_pow(dims as u32).ok_or_else(|| Error::Config("grid too large".into()))?;
    let points: Vec<Scenario> = starts
        .iter()
        .flat_map(|s| {
            (0..total).map(move |mut idx| {
                let mut p = s.clone();
                for axis in &spec.continuous {
                    let u = if n == 1 { 0.5 } else { (idx % n) as f64 / (n - 1) as f64 };
                    idx /= n;
                    p.set(&axis.name, axis.from_unit(u)).expect("validated name");
                }
                p
            })
        })
        .collect();
    let grid: Vec<Candidate> = points.into_par_iter().map(evaluate).collect();
    let mut evaluations = grid.len();
    let mut failed = grid.iter().filter(|c| c.evaluation.is_none()).count();
    let mut best = grid
        .into_iter()
        .reduce(|a, b| if b.objective() > a.objective() { b } else { a })
        .expect("at least one grid point");
    if failed == evaluations {
        // Nothing evaluated: surface the reason instead of reporting a zero rate.
        best.scenario.evaluate()?;
    }

    if best.objective() > 0.0 && dims > 0 {
        let mut width = 1.0 / (n - 1) as f64;
        for _ in 0..GOLDEN_PASSES {
            for axis in &spec.continuous {
                let centre = axis.to_unit(best.scenario.get(&axis.name)?);
                let (a, b) = ((centre - width).max(0.0), (centre + width).min(1.0));
                let (found, used, bad) = golden_section(&best.scenario, axis, a, b);
                evaluations += used;
                failed += bad;
                if found.objective() > best.objective() {
                    best = found;
                }
            }
            width *= 0.5;
        }
    }

    let mut params = BTreeMap::new();
    for name in spec.names() {
        params.insert(name.to_string(), best.scenario.get(name)?);
    }
    let evaluation = match best.evaluation {
        Some(e) => e,
        None => Evaluation {
            rate: RateBreakdown::zero(),
            diagnostic: Some(format!("all {evaluations} evaluations failed")),
        },
    };
    Ok(Optimum {
        params,
        scenario: best.scenario,
        evaluation,
        evaluations,
        failed_evaluations: failed,
    })
}

fn golden_section(base: &Scenario, axis: &ContinuousAxis, mut a: f64, mut b: f64) -> (Candidate, usize, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let at = |u: f64| evaluate(base.with(&axis.name, axis.from_unit(u)).expect("validated name"));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = at(c);
    let mut fd = at(d);
    let mut used = 2;
    let mut bad = usize::from(fc.evaluation.is_none()) + usize::from(fd.evaluation.is_none());
    for _ in 0..GOLDEN_ITERATIONS {
        if fc.objective() >= fd.objective() {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = at(c);
            bad += usize::from(fc.evaluation.is_none());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = at(d);
            bad += usize::from(fd.evaluation.is_none());
        }
        used += 1;
    }
    let best = if fc.objective() >= fd.objective() { fc } else { fd };
    (best, used, bad)
}

/// One swept parameter, each row optimized independently.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub optimize: OptimizeSpec,
    pub swept: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.optimize.names().contains(&self.swept.as_str()) {
            return Err(Error::Config(format!("{} is both swept and optimized", self.swept)));
        }
        self.optimize.base.get(&self.swept)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub optimum: Optimum,
}

/// Rows come back in the order of `values` however the work is scheduled.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.values
        .par_iter()
        .map(|&value| {
            let mut opt = spec.optimize.clone();
            opt.base.set(&spec.swept, value)?;
            Ok(SweepRow {
                value,
                optimum: optimize(&opt)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_threshold(t: Threshold, expected: f64, tol: f64) {
        match t {
            Threshold::Value(v) => assert!((v - expected).abs() <= tol, "{v} vs {expected}"),
            other => panic!("expected a value, got {other:?}"),
        }
    }

    #[test]
    fn threshold_examples() {
        let q = ThresholdQuery::new(Protocol::Original, ThresholdTarget::InitialFidelity, 0, 0, QkdProtocol::Bb84);
        assert_threshold(bisect_threshold(&q, 1e-4).unwrap(), 0.835, 1e-3);
        let q = ThresholdQuery::new(Protocol::Original, ThresholdTarget::GateQuality, 1, 0, QkdProtocol::Bb84);
        assert_threshold(bisect_threshold(&q, 1e-4).unwrap(), 0.780, 1e-3);
        let q = ThresholdQuery::new(Protocol::Original, ThresholdTarget::InitialFidelity, 0, 0, QkdProtocol::SixState);
        assert_threshold(bisect_threshold(&q, 1e-4).unwrap(), 0.810, 1e-3);
    }

    #[test]
    fn threshold_special_cases() {
        let q = ThresholdQuery::new(Protocol::Original, ThresholdTarget::GateQuality, 0, 0, QkdProtocol::Bb84);
        assert_eq!(bisect_threshold(&q, 1e-4).unwrap(), Threshold::NoConstraint);
        let mut q = ThresholdQuery::new(Protocol::Original, ThresholdTarget::InitialFidelity, 3, 0, QkdProtocol::Bb84);
        q.base.p_g = 0.9;
        assert_eq!(bisect_threshold(&q, 1e-4).unwrap(), Threshold::Infeasible);
        let q = ThresholdQuery::new(Protocol::Ensemble, ThresholdTarget::InitialFidelity, 1, 0, QkdProtocol::Bb84);
        assert!(bisect_threshold(&q, 1e-4).is_err());
    }

    #[test]
    fn threshold_is_a_sign_change() {
        let q = ThresholdQuery::new(Protocol::Hybrid, ThresholdTarget::GateQuality, 2, 0, QkdProtocol::Bb84);
        let Threshold::Value(v) = bisect_threshold(&q, 1e-9).unwrap() else { panic!() };
        let at = |x: f64| q.base.with("p_G", x).unwrap().signed_secret_fraction().unwrap();
        assert!(at(v - 1e-8) <= 0.0 && at(v + 1e-8) > 0.0);
    }

    #[test]
    fn optimizer_picks_best_distillation_rounds() {
        let mut base = Scenario::new(Protocol::Original);
        base.f0 = 0.9;
        base.length = 600.0;
        base.nesting = 2;
        let spec = OptimizeSpec::new(base).discrete(DiscreteAxis::new("k", (0..=4).collect()).unwrap());
        let opt = optimize(&spec).unwrap();
        assert_eq!(opt.params["k"], 2.0);
        assert_eq!(opt.evaluations, 5);
    }

    #[test]
    fn optimizer_never_loses_to_grid() {
        let mut base = Scenario::new(Protocol::Hybrid);
        base.nesting = 1;
        let axis = ContinuousAxis::linear("F0", 0.5, 1.0).unwrap();
        let spec = OptimizeSpec::new(base.clone()).continuous(axis.clone());
        let opt = optimize(&spec).unwrap();
        for i in 0..MIN_GRID {
            let f0 = axis.from_unit(i as f64 / (MIN_GRID - 1) as f64);
            let r = base.with("F0", f0).unwrap().evaluate().unwrap().rate.r_qkd;
            assert!(opt.rate().r_qkd >= r);
        }
        assert!((opt.params["F0"] - 0.898).abs() < 2e-3, "{}", opt.params["F0"]);
    }

    #[test]
    fn optimizer_rejects_bad_specs() {
        let base = Scenario::new(Protocol::Hybrid);
        let axis = ContinuousAxis::linear("F0", 0.5, 1.0).unwrap();
        let mut spec = OptimizeSpec::new(base.clone()).continuous(axis.clone()).continuous(axis);
        assert!(optimize(&spec).is_err());
        spec.continuous.pop();
        spec.grid = 10;
        assert!(optimize(&spec).is_err());
        assert!(ContinuousAxis::linear("N", 0.0, 1.0).is_err());
        assert!(ContinuousAxis::new("p", 0.0, 1.0, AxisScale::Log).is_err());
        assert!(DiscreteAxis::new("F0", vec![1]).is_err());
        let sweep_spec = SweepSpec {
            optimize: OptimizeSpec::new(base).continuous(ContinuousAxis::linear("F0", 0.5, 1.0).unwrap()),
            swept: "F0".into(),
            values: vec![0.9],
        };
        assert!(sweep(&sweep_spec).is_err());
    }

    #[test]
    fn axis_scales_round_trip() {
        for scale in [AxisScale::Linear, AxisScale::Log, AxisScale::LogUpper] {
            let axis = ContinuousAxis::new("F0", 0.5, 1.0, scale).unwrap();
            assert_eq!(axis.from_unit(0.0), 0.5);
            for u in [0.0, 0.2, 0.5, 0.9] {
                assert!((axis.to_unit(axis.from_unit(u)) - u).abs() < 1e-9);
            }
        }
        let upper = ContinuousAxis::new("F0", 0.5, 1.0, AxisScale::LogUpper).unwrap();
        assert!((upper.from_unit(1.0) - (1.0 - 5e-7)).abs() < 1e-15);
        assert!((upper.from_unit(0.5) - (1.0 - 5e-4)).abs() < 1e-12);
    }

    #[test]
    fn narrow_feasible_window_needs_log_upper_grid() {
        let mut base = Scenario::new(Protocol::Hybrid);
        base.p_g = 0.995;
        base.eta_d = 0.9;
        base.nesting = 4;
        let linear = optimize(&OptimizeSpec::new(base.clone()).continuous(ContinuousAxis::linear("F0", 0.5, 1.0).unwrap())).unwrap();
        let upper = optimize(
            &OptimizeSpec::new(base).continuous(ContinuousAxis::new("F0", 0.5, 1.0, AxisScale::LogUpper).unwrap()),
        )
        .unwrap();
        assert!(upper.rate().r_qkd > 0.0);
        assert!(upper.rate().r_qkd >= linear.rate().r_qkd);
    }

    #[test]
    fn all_zero_objective_reports_zero() {
        let mut base = Scenario::new(Protocol::Original);
        base.nesting = 5;
        base.f0 = 0.9;
        base.p_g = 0.995;
        let spec = OptimizeSpec::new(base).discrete(DiscreteAxis::new("k", (0..=3).collect()).unwrap());
        let opt = optimize(&spec).unwrap();
        assert_eq!(opt.rate().r_qkd, 0.0);
    }

    #[test]
    fn every_evaluation_failing_is_an_error() {
        let mut base = Scenario::new(Protocol::Original);
        base.f0 = 1.5;
        assert!(matches!(optimize(&OptimizeSpec::new(base)), Err(Error::Domain { .. })));
    }

    #[test]
    fn sweep_keeps_input_order_and_matches_optimize() {
        let mut base = Scenario::new(Protocol::Original);
        base.f0 = 0.95;
        let opt = OptimizeSpec::new(base).discrete(DiscreteAxis::new("k", vec![0, 1, 2]).unwrap());
        let values = vec![900.0, 100.0, 500.0, 300.0];
        let rows = sweep(&SweepSpec {
            optimize: opt.clone(),
            swept: "L".into(),
            values: values.clone(),
        })
        .unwrap();
        assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), values);
        let mut single = opt;
        single.base.length = 500.0;
        assert_eq!(rows[2].optimum, optimize(&single).unwrap());
        assert!(sweep(&SweepSpec {
            optimize: OptimizeSpec::new(Scenario::new(Protocol::Original)),
            swept: "L".into(),
            values: vec![],
        })
        .unwrap()
        .is_empty());
    }
}
