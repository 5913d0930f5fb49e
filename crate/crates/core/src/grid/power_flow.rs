use num_complex::Complex;
use num_traits::Zero;

use super::{check_len, GridError, NetworkCase, OperatingPoint};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Largest phasor update (p.u.) accepted as converged.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_sweeps: 100 }
    }
}

struct Tree<T> {
    /// Buses in breadth-first order from the slack.
    order: Vec<usize>,
    parent: Vec<Option<(usize, Complex<T>)>>,
}

fn spanning_tree<T: Scalar>(case: &NetworkCase<T>) -> Result<Tree<T>, GridError> {
    if !case.is_radial() {
        return Err(GridError::NotRadial { lines: case.lines.len(), buses: case.bus_count() });
    }
    let adj = case.adjacency();
    let mut parent = vec![None; case.bus_count()];
    let mut seen = vec![false; case.bus_count()];
    let mut order = vec![case.slack];
    seen[case.slack] = true;
    let mut head = 0;
    while head < order.len() {
        let b = order[head];
        head += 1;
        for &(nb, k) in &adj[b] {
            if !seen[nb] {
                seen[nb] = true;
                parent[nb] = Some((b, case.lines[k].impedance()));
                order.push(nb);
            }
        }
    }
    if order.len() != case.bus_count() {
        let lost = seen.iter().position(|s| !s).unwrap_or(0);
        return Err(GridError::Disconnected(lost));
    }
    Ok(Tree { order, parent })
}

/// Backward-forward sweep on a radial feeder. Returns complex phasors for
/// every bus id (slack included). Injections in `op` are in PQ-bus order.
pub fn ac_power_flow_phasors<T: Scalar>(
    case: &NetworkCase<T>,
    op: &OperatingPoint<T>,
    options: SweepOptions,
) -> Result<Vec<Complex<T>>, GridError> {
    case.validate()?;
    check_len(case.pq_count(), op.p.len())?;
    check_len(case.pq_count(), op.q.len())?;
    let tree = spanning_tree(case)?;
    let index = case.pq_index();
    let injection: Vec<Complex<T>> = index
        .iter()
        .map(|ix| ix.map_or(Complex::zero(), |k| Complex::new(op.p[k], op.q[k])))
        .collect();

    let mut v = vec![case.slack_voltage; case.bus_count()];
    let mut branch = vec![Complex::<T>::zero(); case.bus_count()];
    let mut residual = f64::INFINITY;
    for _ in 0..options.max_sweeps {
        // Backward: current flowing from parent into each subtree.
        for b in branch.iter_mut() {
            *b = Complex::zero();
        }
        for &bus in tree.order.iter().rev() {
            if bus == case.slack {
                continue;
            }
            let drawn = -(injection[bus] / v[bus]).conj();
            branch[bus] = branch[bus] + drawn;
            if let Some((p, _)) = tree.parent[bus] {
                if p != case.slack {
                    let j = branch[bus];
                    branch[p] = branch[p] + j;
                }
            }
        }
        // Forward: voltage drops along the tree.
        residual = 0.0;
        for &bus in &tree.order {
            if let Some((p, z)) = tree.parent[bus] {
                let next = v[p] - z * branch[bus];
                residual = residual.max((next - v[bus]).norm().as_f64());
                v[bus] = next;
            }
        }
        if !residual.is_finite() {
            break;
        }
        if residual < options.tolerance {
            return Ok(v);
        }
    }
    Err(GridError::NonConvergence { sweeps: options.max_sweeps, residual })
}

/// Voltage magnitudes (p.u.) at the PQ buses, in model order.
pub fn ac_power_flow<T: Scalar>(case: &NetworkCase<T>, op: &OperatingPoint<T>) -> Result<Vec<T>, GridError> {
    let v = ac_power_flow_phasors(case, op, SweepOptions::default())?;
    Ok(case.pq_buses().into_iter().map(|b| v[b].norm()).collect())
}
