use std::path::Path;

use num_complex::Complex;
use num_traits::One;

use serde::{Deserialize, Serialize};

use super::GridError;
use crate::scalar::Scalar;

/// IEEE 33-bus feeder (Baran–Wu), per-unit on 10 MVA / 12.66 kV.
pub const IEEE33_JSON: &str = include_str!("../../data/ieee33.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bus<T> {
    pub id: usize,
    /// Nominal active demand (p.u., consumption positive).
    #[serde(default)]
    pub p_load: T,
    /// Nominal reactive demand (p.u., consumption positive).
    #[serde(default)]
    pub q_load: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Line<T> {
    pub from: usize,
    pub to: usize,
    pub r: T,
    pub x: T,
}

impl<T: Scalar> Line<T> {
    pub fn impedance(&self) -> Complex<T> {
        Complex::new(self.r, self.x)
    }
}

/// The physical feeder. Bus ids are `0..bus_count`; the slack may be any of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkCase<T> {
    #[serde(default)]
    pub name: String,
    pub buses: Vec<Bus<T>>,
    pub slack: usize,
    pub lines: Vec<Line<T>>,
    #[serde(default = "unit_phasor")]
    pub slack_voltage: Complex<T>,
}

fn unit_phasor<T: Scalar>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

impl<T: Scalar> NetworkCase<T> {
    /// Builds a case with unloaded buses `0..bus_count`.
    pub fn new(bus_count: usize, slack: usize, lines: Vec<Line<T>>) -> Result<Self, GridError> {
        let buses = (0..bus_count).map(|id| Bus { id, p_load: T::zero(), q_load: T::zero() }).collect();
        let case = Self { name: String::new(), buses, slack, lines, slack_voltage: unit_phasor() };
        case.validate()?;
        Ok(case)
    }

    pub fn ieee33() -> Self {
        Self::from_json(IEEE33_JSON).expect("embedded IEEE 33-bus case is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let mut case: Self = serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        case.buses.sort_by_key(|b| b.id);
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path).map_err(|e| GridError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Number of PQ buses `n`.
    pub fn pq_count(&self) -> usize {
        self.bus_count() - 1
    }

    /// PQ bus ids in model order (ascending, slack removed).
    pub fn pq_buses(&self) -> Vec<usize> {
        (0..self.bus_count()).filter(|&b| b != self.slack).collect()
    }

    /// Model index of each bus id; `None` for the slack.
    pub fn pq_index(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        (0..self.bus_count())
            .map(|b| {
                if b == self.slack {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }

    /// Nominal (active, reactive) demand per PQ bus.
    pub fn nominal_demand(&self) -> (Vec<T>, Vec<T>) {
        let pq = self.pq_buses();
        (pq.iter().map(|&b| self.buses[b].p_load).collect(), pq.iter().map(|&b| self.buses[b].q_load).collect())
    }

    pub fn is_radial(&self) -> bool {
        self.lines.len() + 1 == self.bus_count()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let count = self.bus_count();
        for (k, b) in self.buses.iter().enumerate() {
            if b.id != k {
                return Err(GridError::InvalidBus { count, found: b.id });
            }
        }
        if self.slack >= count {
            return Err(GridError::InvalidSlack(self.slack));
        }
        for (k, line) in self.lines.iter().enumerate() {
            if line.from >= count {
                return Err(GridError::InvalidBus { count, found: line.from });
            }
            if line.to >= count {
                return Err(GridError::InvalidBus { count, found: line.to });
            }
            if line.from == line.to {
                return Err(GridError::SelfLoop(k));
            }
            if !(line.r >= T::zero() && line.x >= T::zero() && line.r.is_finite() && line.x.is_finite()) {
                return Err(GridError::InvalidImpedance(k));
            }
            if line.r.is_zero() && line.x.is_zero() {
                return Err(GridError::ZeroImpedance(k));
            }
        }
        let mut seen = vec![false; count];
        let mut stack = vec![self.slack];
        seen[self.slack] = true;
        let adjacency = self.adjacency();
        while let Some(b) = stack.pop() {
            for &(nb, _) in &adjacency[b] {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(GridError::Disconnected(lost));
        }
        Ok(())
    }

    /// Neighbour lists `(bus, line index)`.
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.bus_count()];
        for (k, l) in self.lines.iter().enumerate() {
            adj[l.from].push((l.to, k));
            adj[l.to].push((l.from, k));
        }
        adj
    }

    pub(crate) fn slack_is_unit(&self) -> bool {
        self.slack_voltage == Complex::one()
    }
}
