//! Pair power flows, directional per-trade grid costs and assembly of the
//! combined matching objective.
//!
//! For every producer-consumer pair the tradeable volume is
//! `min(-d_p, d_c)` and the pair flow is the DC power flow of that volume
//! injected at the producer and drawn at the consumer. An assignment
//! `x in {0,1}^n` activates a subset of pairs; its logical flow is the
//! superposition of the active pair flows, and the objective
//!
//! `alpha * sum_l (w_l - v_l(x))^2 + sum_k M_k x_k`
//!
//! trades off flow mismatch against allocated line-usage fees.

mod qubo;

pub use qubo::{
    bits_from_str, bits_to_string, export_ising, export_qubo, import_qubo, ising_to_text,
    qubo_from_text, qubo_to_text, to_ising, IsingModel, Qubo,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{line_capacity, utilization, DcSolver, FlowVector};
use crate::instance::Instance;

/// Coefficients with magnitude below this are dropped from assembled QUBOs.
const COEFFICIENT_DROP_TOLERANCE: f64 = 1e-12;

/// A candidate P2P trade between one producer and one consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub producer: usize,
    pub consumer: usize,
    /// Traded volume `min(-d_p, d_c)` in kWh.
    pub volume_kwh: f64,
    /// Position of this trade's decision variable, contiguous in `(p, c)`
    /// lexicographic order.
    pub variable_index: usize,
}

/// All candidate trades of an instance with their per-line flow patterns.
/// Row `k` of `flows` is the DC power flow of trade `k` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFlowSet {
    trades: Vec<Trade>,
    flows: DMatrix<f64>,
}

impl PairFlowSet {
    pub fn trades(&self) -> &[Trade] {
        &self.trades
    }

    pub fn num_trades(&self) -> usize {
        self.trades.len()
    }

    pub fn num_lines(&self) -> usize {
        self.flows.ncols()
    }

    /// Per-line flows of trade `k` in kWh.
    pub fn flow_row(&self, k: usize) -> Vec<f64> {
        self.flows.row(k).iter().copied().collect()
    }

    pub fn flows(&self) -> &DMatrix<f64> {
        &self.flows
    }
}

/// Computes one trade per `(p, c)` pair in lexicographic order, with the pair
/// volume injected at the producer and drawn at the consumer.
pub fn pair_flows(instance: &Instance) -> Result<PairFlowSet> {
    let grid = &instance.grid;
    let solver = DcSolver::new(grid, 0)?;
    let demand = instance.loads.demand();
    let mut trades = Vec::new();
    let mut rows: Vec<FlowVector> = Vec::new();
    for &p in instance.loads.producers() {
        for &c in instance.loads.consumers() {
            let volume = (-demand[p]).min(demand[c]);
            debug_assert!(volume > 0.0);
            let mut injections = vec![0.0; grid.bus_count()];
            injections[p] = volume;
            injections[c] = -volume;
            rows.push(solver.solve(&injections)?);
            trades.push(Trade {
                producer: p,
                consumer: c,
                volume_kwh: volume,
                variable_index: trades.len(),
            });
        }
    }
    let flows = DMatrix::from_fn(trades.len(), grid.line_count(), |k, l| rows[k][l]);
    Ok(PairFlowSet { trades, flows })
}

/// Logical power flow of an assignment: the superposition of active pair
/// flows, `v_l(x) = sum_k v_l^k x_k`.
pub fn logical_flow(pf: &PairFlowSet, x: &[bool]) -> Result<FlowVector> {
    if x.len() != pf.num_trades() {
        return Err(Error::DimensionMismatch {
            expected: pf.num_trades(),
            got: x.len(),
        });
    }
    let mut out = vec![0.0f64; pf.num_lines()];
    for (k, &active) in x.iter().enumerate() {
        if active {
            for (l, slot) in out.iter_mut().enumerate() {
                *slot += pf.flows[(k, l)];
            }
        }
    }
    Ok(FlowVector(out))
}

/// Grid operation cost of a single trade: fees accrue only on lines where the
/// trade flows in the direction of the baseline flow, weighted by baseline
/// utilization. Unloaded lines (`w = 0`) charge nothing in either direction.
pub fn trade_cost(trade_flows: &[f64], baseline: &FlowVector, utilization: &[f64], rho: f64) -> f64 {
    let mut cost = 0.0;
    for (l, &v) in trade_flows.iter().enumerate() {
        let w = baseline[l];
        let directed = if w > 0.0 {
            v
        } else if w < 0.0 {
            -v
        } else {
            0.0
        };
        if directed > 0.0 {
            cost += utilization[l] * directed;
        }
    }
    rho * cost
}

/// Baseline flow, line capacities, utilizations and per-trade grid costs of
/// an instance; everything needed to price and assemble assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub baseline: FlowVector,
    pub capacities: Vec<f64>,
    pub utilization: Vec<f64>,
    /// Per-trade grid cost `M_k` in ct.
    pub trade_costs: Vec<f64>,
}

impl Allocation {
    pub fn compute(instance: &Instance, pf: &PairFlowSet) -> Result<Self> {
        let baseline = crate::grid::dc_power_flow(&instance.grid, &instance.injections(), 0)?;
        let capacities: Vec<f64> = instance
            .grid
            .lines()
            .iter()
            .map(|line| line_capacity(line, instance.period_h))
            .collect();
        let util = utilization(&baseline, &capacities)?;
        let trade_costs = (0..pf.num_trades())
            .map(|k| trade_cost(&pf.flow_row(k), &baseline, &util, instance.rho))
            .collect();
        Ok(Allocation {
            baseline,
            capacities,
            utilization: util,
            trade_costs,
        })
    }
}

/// Expands the matching objective into an upper-triangular QUBO:
/// `Q_kk = alpha * sum_l ((v_l^k)^2 - 2 w_l v_l^k) + M_k`,
/// `Q_kk' = 2 alpha * sum_l v_l^k v_l^k'` for `k < k'`, and
/// `offset = alpha * sum_l w_l^2`.
pub fn build_qubo(instance: &Instance, pf: &PairFlowSet) -> Result<Qubo> {
    let allocation = Allocation::compute(instance, pf)?;
    build_qubo_with(instance, pf, &allocation)
}

/// [`build_qubo`] with a precomputed allocation, for parameter sweeps that
/// reuse pair flows across many `(rho, alpha)` points.
pub fn build_qubo_with(
    instance: &Instance,
    pf: &PairFlowSet,
    allocation: &Allocation,
) -> Result<Qubo> {
    let n = pf.num_trades();
    if allocation.trade_costs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: allocation.trade_costs.len(),
        });
    }
    let alpha = instance.alpha;
    let w = DMatrix::from_fn(pf.num_lines(), 1, |l, _| allocation.baseline[l]);
    // gram[k, k'] = sum_l v_l^k v_l^k'; cross[k] = sum_l v_l^k w_l
    let gram = &pf.flows * pf.flows.transpose();
    let cross = &pf.flows * w;

    let offset = alpha * allocation.baseline.iter().map(|v| v * v).sum::<f64>();
    let mut q = Qubo::new(n, offset);
    for k in 0..n {
        let diagonal = alpha * (gram[(k, k)] - 2.0 * cross[(k, 0)]) + allocation.trade_costs[k];
        if diagonal.abs() >= COEFFICIENT_DROP_TOLERANCE {
            q.set(k, k, diagonal);
        }
        for k2 in (k + 1)..n {
            let coupling = 2.0 * alpha * gram[(k, k2)];
            if coupling.abs() >= COEFFICIENT_DROP_TOLERANCE {
                q.set(k, k2, coupling);
            }
        }
    }
    Ok(q)
}

/// Evaluates the matching objective directly from flows and trade costs,
/// without the quadratic expansion. Serves as the oracle for [`build_qubo`].
pub fn evaluate(instance: &Instance, pf: &PairFlowSet, x: &[bool]) -> Result<f64> {
    let allocation = Allocation::compute(instance, pf)?;
    evaluate_with(instance, pf, &allocation, x)
}

/// [`evaluate`] with a precomputed allocation.
pub fn evaluate_with(
    instance: &Instance,
    pf: &PairFlowSet,
    allocation: &Allocation,
    x: &[bool],
) -> Result<f64> {
    let logical = logical_flow(pf, x)?;
    let mismatch: f64 = allocation
        .baseline
        .iter()
        .zip(logical.iter())
        .map(|(w, v)| (w - v) * (w - v))
        .sum();
    let fees: f64 = x
        .iter()
        .zip(&allocation.trade_costs)
        .filter(|(&active, _)| active)
        .map(|(_, m)| m)
        .sum();
    Ok(instance.alpha * mismatch + fees)
}
