//! Time-varying response sequences `g^(k)`.
//!
//! A [`TimeVaryingScenario`] holds one response per slow step. Optimizers run
//! `iters_per_slow_step` fast iterations against each one in turn.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmError, Plant};
use crate::grid::{compute_sensitivity, GridError, NetworkCase, OperatingPoint, SensitivityModel};
use crate::response::{ResponseError, ResponseFamily, ResponseModel, ResponseParams, StepCurve};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("expected a step response schedule")]
    NotStep,
    #[error("bus {bus} has {devices} devices, at least 2 are required")]
    TooFewDevices { bus: usize, devices: usize },
    #[error("load table: {0}")]
    Table(String),
    #[error("invalid dynamics configuration: {0}")]
    InvalidConfig(String),
    #[error("demand inflation failed: {0}")]
    Inflation(String),
}

/// Whether events arrive on one process per bus or one feeder-wide process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventScope {
    #[default]
    PerBus,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirthDeathConfig {
    pub slow_steps: usize,
    pub iters_per_slow_step: usize,
    /// Events per minute.
    pub event_rate: f64,
    pub scope: EventScope,
}

impl Default for BirthDeathConfig {
    fn default() -> Self {
        Self { slow_steps: 100, iters_per_slow_step: 1000, event_rate: 1.0 / 2.5, scope: EventScope::PerBus }
    }
}

impl BirthDeathConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.slow_steps == 0 || self.iters_per_slow_step == 0 {
            return Err(DynamicsError::InvalidConfig("slow_steps and iters_per_slow_step must be at least 1".into()));
        }
        if !(self.event_rate >= 0.0 && self.event_rate.is_finite()) {
            return Err(DynamicsError::InvalidConfig("event_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Added,
    Removed,
    /// A removal that would have left fewer than two devices.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEvent {
    /// Arrival time in minutes.
    pub time: f64,
    /// First slow step that sees the event.
    pub slow_step: usize,
    pub bus: usize,
    pub kind: EventKind,
}

/// A sequence of responses, one per slow step. Load-series scenarios also
/// carry a fresh linearization and reactive demand per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeVaryingScenario<T> {
    pub slow_steps: usize,
    pub iters_per_slow_step: usize,
    pub event_rate: f64,
    pub schedule: Vec<ResponseModel<T>>,
    pub setpoints: Vec<Vec<T>>,
    #[serde(default)]
    pub linearizations: Option<Vec<SensitivityModel<T>>>,
    #[serde(default)]
    pub q_demands: Option<Vec<Vec<T>>>,
    #[serde(default)]
    pub events: Vec<DeviceEvent>,
}

impl<T: Scalar> TimeVaryingScenario<T> {
    /// The same model at every slow step.
    pub fn constant(model: ResponseModel<T>, slow_steps: usize, iters_per_slow_step: usize) -> Self {
        let setpoints = vec![model.params.u_star.clone(); slow_steps];
        Self {
            slow_steps,
            iters_per_slow_step,
            event_rate: 0.0,
            schedule: vec![model; slow_steps],
            setpoints,
            linearizations: None,
            q_demands: None,
            events: Vec::new(),
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.slow_steps * self.iters_per_slow_step
    }

    /// Slow step active at a zero-based fast iteration.
    pub fn slow_step_of(&self, iteration: usize) -> usize {
        (iteration / self.iters_per_slow_step).min(self.slow_steps.saturating_sub(1))
    }

    /// `base` with the slow-step-`k` response (and linearization, if any) swapped in.
    pub fn plant_at(&self, k: usize, base: &Plant<T>) -> Result<Plant<T>, AlgorithmError> {
        let model = self
            .schedule
            .get(k)
            .ok_or_else(|| AlgorithmError::InvalidConfig(format!("slow step {k} out of range")))?;
        let mut plant = base.with_response(model.clone())?;
        if let Some(lin) = &self.linearizations {
            plant.sensitivity = lin[k].clone();
        }
        if let Some(q) = &self.q_demands {
            plant.q_demand = q[k].clone();
        }
        Ok(plant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DynamicsError> {
        serde_json::from_str(text).map_err(|e| DynamicsError::InvalidConfig(e.to_string()))
    }
}

/// Event times on `[0, horizon)` of a Poisson process with the given rate.
fn poisson_times<R: Rng + ?Sized>(rng: &mut R, rate: f64, horizon: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let Ok(exp) = Exp::new(rate) else { return times };
    if rate <= 0.0 {
        return times;
    }
    let mut t = exp.sample(rng);
    while t < horizon {
        times.push(t);
        t += exp.sample(rng);
    }
    times
}

fn range_of(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn sample_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Device birth-death process on top of a step response. Each event adds a
/// device on the left or removes the leftmost one with equal probability; an
/// event arriving at minute `τ` first shows at slow step `⌊τ⌋ + 1`.
pub fn build_birth_death_schedule<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    initial: &ResponseModel<T>,
    cfg: &BirthDeathConfig,
) -> Result<TimeVaryingScenario<T>, DynamicsError> {
    cfg.validate()?;
    let ResponseFamily::Step { curves } = &initial.family else {
        return Err(DynamicsError::NotStep);
    };
    let n = initial.n();
    let params = &initial.params;
    let u_star = params.u_star.clone();
    let mut devices: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n);
    for (j, c) in curves.iter().enumerate() {
        let peak = params.u_star[j] + params.delta[j];
        let d: Vec<(f64, f64)> = c.devices_from_left(peak).into_iter().map(|(w, h)| (w.as_f64(), h.as_f64())).collect();
        if d.len() < 2 {
            return Err(DynamicsError::TooFewDevices { bus: j, devices: d.len() });
        }
        devices.push(d);
    }
    let width_range: Vec<(f64, f64)> = devices.iter().map(|d| range_of(d.iter().map(|x| x.0))).collect();
    let height_range: Vec<(f64, f64)> = devices.iter().map(|d| range_of(d.iter().map(|x| x.1))).collect();

    let horizon = (cfg.slow_steps - 1) as f64;
    let mut arrivals: Vec<(f64, usize)> = match cfg.scope {
        EventScope::PerBus => (0..n).flat_map(|j| poisson_times(rng, cfg.event_rate, horizon).into_iter().map(move |t| (t, j))).collect(),
        EventScope::Global => {
            let times = poisson_times(rng, cfg.event_rate, horizon);
            times.into_iter().map(|t| (t, rng.random_range(0..n))).collect()
        }
    };
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut events = Vec::with_capacity(arrivals.len());
    let mut schedule = Vec::with_capacity(cfg.slow_steps);
    schedule.push(initial.clone());
    let mut next = 0;
    for k in 1..cfg.slow_steps {
        while next < arrivals.len() && (arrivals[next].0.floor() as usize) < k {
            let (time, bus) = arrivals[next];
            next += 1;
            let add = rng.random_bool(0.5);
            let kind = if add {
                let w = sample_in(rng, width_range[bus]);
                let h = sample_in(rng, height_range[bus]);
                devices[bus].insert(0, (w, h));
                EventKind::Added
            } else if devices[bus].len() <= 2 {
                EventKind::Discarded
            } else {
                devices[bus].remove(0);
                EventKind::Removed
            };
            events.push(DeviceEvent { time, slow_step: k, bus, kind });
        }
        schedule.push(step_model_from_devices(&u_star, &devices)?);
    }
    Ok(TimeVaryingScenario {
        slow_steps: cfg.slow_steps,
        iters_per_slow_step: cfg.iters_per_slow_step,
        event_rate: cfg.event_rate,
        setpoints: vec![u_star; cfg.slow_steps],
        schedule,
        linearizations: None,
        q_demands: None,
        events,
    })
}

fn step_model_from_devices<T: Scalar>(u_star: &[T], devices: &[Vec<(f64, f64)>]) -> Result<ResponseModel<T>, DynamicsError> {
    let mut delta = Vec::with_capacity(devices.len());
    let mut t = Vec::with_capacity(devices.len());
    let mut curves = Vec::with_capacity(devices.len());
    for (j, d) in devices.iter().enumerate() {
        let dj: f64 = d.iter().map(|x| x.1).sum();
        let tj: f64 = d.iter().map(|x| x.0).sum();
        let peak = u_star[j] + T::lit(dj);
        let lits: Vec<(T, T)> = d.iter().map(|&(w, h)| (T::lit(w), T::lit(h))).collect();
        let mut curve = StepCurve::from_devices(peak, &lits);
        if let Some(last) = curve.breakpoints.last_mut() {
            *last = (T::lit(tj), u_star[j]);
        }
        delta.push(T::lit(dj));
        t.push(T::lit(tj));
        curves.push(curve);
    }
    let params = ResponseParams::new(u_star.to_vec(), delta, t)?;
    Ok(ResponseModel::new(params, ResponseFamily::Step { curves })?)
}

/// Replaces every step response with the quadratic-convex response sharing its
/// `(δ^(k), t^(k))`.
pub fn derive_quadratic_schedule<T: Scalar>(steps: &TimeVaryingScenario<T>) -> Result<TimeVaryingScenario<T>, DynamicsError> {
    if steps.schedule.iter().any(|m| !matches!(m.family, ResponseFamily::Step { .. })) {
        return Err(DynamicsError::NotStep);
    }
    let mut out = steps.clone();
    out.schedule = steps.schedule.iter().map(|m| ResponseModel::quadratic(m.params.clone())).collect();
    Ok(out)
}

/// Minute-level active loads, one row per minute and one column per PQ bus (p.u.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadTable {
    pub rows: Vec<Vec<f64>>,
}

impl LoadTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, DynamicsError> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 {
            return Err(DynamicsError::Table("table is empty".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != width) {
            return Err(DynamicsError::Table(format!("row {r} has {} columns, expected {width}", rows[r].len())));
        }
        if rows.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(DynamicsError::Table("loads must be finite and non-negative".into()));
        }
        Ok(Self { rows })
    }

    /// Reads CSV; a first row that does not parse as numbers is treated as a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, DynamicsError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| DynamicsError::Table(e.to_string()))?;
            let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if r == 0 => continue,
                Err(e) => return Err(DynamicsError::Table(format!("row {r}: {e}"))),
            }
        }
        Self::new(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self, DynamicsError> {
        let file = std::fs::File::open(path).map_err(|e| DynamicsError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv(file)
    }

    pub fn minutes(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }
}

/// Inputs that stay fixed across a load-series schedule.
#[derive(Debug, Clone)]
pub struct LoadSeriesSetup<'a, T> {
    pub case: &'a NetworkCase<T>,
    pub thresholds: Vec<T>,
    /// Reactive-to-active ratio per bus; reactive demand follows active demand.
    pub q_ratio: Vec<T>,
    pub alpha: f64,
    pub slow_steps: usize,
    pub iters_per_slow_step: usize,
}

/// Blended base loads `(1−α)·base^(k−1) + α·table^(k)`, starting from row 0.
pub fn blend_loads(table: &LoadTable, alpha: f64, slow_steps: usize) -> Result<Vec<Vec<f64>>, DynamicsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DynamicsError::InvalidConfig(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if table.minutes() < slow_steps {
        return Err(DynamicsError::Table(format!("{} rows, need {slow_steps}", table.minutes())));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(slow_steps);
    for k in 0..slow_steps {
        let row = &table.rows[k];
        let next = match out.last() {
            None => row.clone(),
            Some(prev) => prev.iter().zip(row).map(|(&a, &b)| (1.0 - alpha) * a + alpha * b).collect(),
        };
        out.push(next);
    }
    Ok(out)
}

/// Quadratic-convex schedule driven by a load table. Every slow step gets
/// blended base loads as its setpoint, a fresh linearization there, and a
/// fresh demand excess from `inflate(rng, sensitivity, p, q)`.
pub fn build_load_series_schedule<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    table: &LoadTable,
    setup: &LoadSeriesSetup<'_, T>,
    mut inflate: impl FnMut(&mut R, &SensitivityModel<T>, &[T], &[T]) -> Result<Vec<T>, DynamicsError>,
) -> Result<TimeVaryingScenario<T>, DynamicsError> {
    let n = setup.case.pq_count();
    if table.width() != n {
        return Err(DynamicsError::Table(format!("{} columns, feeder has {n} PQ buses", table.width())));
    }
    if setup.thresholds.len() != n || setup.q_ratio.len() != n {
        return Err(DynamicsError::InvalidConfig("thresholds and q_ratio need one entry per PQ bus".into()));
    }
    if setup.slow_steps == 0 || setup.iters_per_slow_step == 0 {
        return Err(DynamicsError::InvalidConfig("slow_steps and iters_per_slow_step must be at least 1".into()));
    }
    let bases = blend_loads(table, setup.alpha, setup.slow_steps)?;
    let mut scenario = TimeVaryingScenario {
        slow_steps: setup.slow_steps,
        iters_per_slow_step: setup.iters_per_slow_step,
        event_rate: 0.0,
        schedule: Vec::with_capacity(setup.slow_steps),
        setpoints: Vec::with_capacity(setup.slow_steps),
        linearizations: Some(Vec::with_capacity(setup.slow_steps)),
        q_demands: Some(Vec::with_capacity(setup.slow_steps)),
        events: Vec::new(),
    };
    for base in bases {
        let p: Vec<T> = base.iter().map(|&x| T::lit(x)).collect();
        let q: Vec<T> = p.iter().zip(&setup.q_ratio).map(|(&a, &r)| a * r).collect();
        let sens = compute_sensitivity(setup.case, &OperatingPoint::from_demand(&p, &q))?;
        let delta = inflate(rng, &sens, &p, &q)?;
        let params = ResponseParams::new(p.clone(), delta, setup.thresholds.clone())?;
        scenario.schedule.push(ResponseModel::quadratic(params));
        scenario.setpoints.push(p);
        if let Some(l) = scenario.linearizations.as_mut() {
            l.push(sens);
        }
        if let Some(qs) = scenario.q_demands.as_mut() {
            qs.push(q);
        }
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::generate_step_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn initial(seed: u64, n: usize, d: usize) -> ResponseModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|j| 0.01 + 0.001 * j as f64).collect();
        let delta = vec![0.05; n];
        let t: Vec<f64> = (0..n).map(|j| 0.2 + 0.1 * j as f64).collect();
        generate_step_model(&mut rng, ResponseParams::new(u, delta, t).unwrap(), d).unwrap()
    }

    #[test]
    fn zero_rate_gives_constant_schedule() {
        let m = initial(1, 4, 5);
        let cfg = BirthDeathConfig { event_rate: 0.0, slow_steps: 10, ..Default::default() };
        let s = build_birth_death_schedule(&mut ChaCha8Rng::seed_from_u64(2), &m, &cfg).unwrap();
        assert_eq!(s.schedule.len(), 10);
        assert!(s.events.is_empty());
        for k in 1..10 {
            assert_eq!(s.schedule[k].params, m.params);
        }
    }

    #[test]
    fn removal_uses_second_step_as_new_peak() {
        let m = initial(3, 6, 6);
        let cfg = BirthDeathConfig { event_rate: 2.0, slow_steps: 30, ..Default::default() };
        let s = build_birth_death_schedule(&mut ChaCha8Rng::seed_from_u64(4), &m, &cfg).unwrap();
        let mut checked = 0;
        for k in 1..s.slow_steps {
            let here: Vec<_> = s.events.iter().filter(|e| e.slow_step == k).collect();
            for e in &here {
                let single = here.iter().filter(|x| x.bus == e.bus).count() == 1;
                if e.kind == EventKind::Removed && single {
                    let prev = &s.schedule[k - 1];
                    let ResponseFamily::Step { curves } = &prev.family else { panic!() };
                    let second = curves[e.bus].breakpoints[0].1;
                    let now = &s.schedule[k].params;
                    let peak = now.u_star[e.bus] + now.delta[e.bus];
                    assert!((peak - second).abs() < 1e-12);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn never_fewer_than_two_devices() {
        let m = initial(5, 8, 2);
        let cfg = BirthDeathConfig { event_rate: 3.0, slow_steps: 40, ..Default::default() };
        let s = build_birth_death_schedule(&mut ChaCha8Rng::seed_from_u64(6), &m, &cfg).unwrap();
        assert!(s.events.iter().any(|e| e.kind == EventKind::Discarded));
        for model in &s.schedule {
            let ResponseFamily::Step { curves } = &model.family else { panic!() };
            assert!(curves.iter().all(|c| c.devices() >= 2));
        }
    }

    #[test]
    fn quadratic_schedule_keeps_parameters() {
        let m = initial(7, 4, 4);
        let s = build_birth_death_schedule(&mut ChaCha8Rng::seed_from_u64(8), &m, &BirthDeathConfig { slow_steps: 20, ..Default::default() }).unwrap();
        let q = derive_quadratic_schedule(&s).unwrap();
        for (a, b) in s.schedule.iter().zip(&q.schedule) {
            assert_eq!(a.params, b.params);
            assert_eq!(b.family, ResponseFamily::QuadraticConvex);
        }
        assert!(matches!(derive_quadratic_schedule(&q), Err(DynamicsError::NotStep)));
    }

    #[test]
    fn blending_limits() {
        let table = LoadTable::new(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0]]).unwrap();
        assert_eq!(blend_loads(&table, 1.0, 3).unwrap(), table.rows);
        let half = blend_loads(&table, 0.5, 3).unwrap();
        assert_eq!(half[1], vec![2.0, 3.0]);
        assert_eq!(half[2], vec![3.5, 1.5]);
        assert!(blend_loads(&table, 0.0, 3).is_err());
        assert!(blend_loads(&table, 0.5, 4).is_err());
    }

    #[test]
    fn csv_header_is_optional() {
        let with = LoadTable::from_csv("b1,b2\n0.1,0.2\n0.3,0.4\n".as_bytes()).unwrap();
        let without = LoadTable::from_csv("0.1,0.2\n0.3,0.4\n".as_bytes()).unwrap();
        assert_eq!(with, without);
        assert!(LoadTable::from_csv("0.1,0.2\nx,0.4\n".as_bytes()).is_err());
        assert!(LoadTable::from_csv("0.1,0.2\n0.3\n".as_bytes()).is_err());
    }
}
