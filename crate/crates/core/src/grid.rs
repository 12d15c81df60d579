//! Grid topology and the lossless DC power-flow solver.
//!
//! A grid is an undirected graph of buses and lines. Flows are expressed in
//! energy units (kWh over a fixed period) rather than power, and carry the
//! sign of the line orientation: a positive flow on line `(i, j)` transports
//! energy from bus `i` to bus `j`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A network node. Ids must be unique and contiguous `0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub name: String,
}

/// A power line between two buses. The `(from, to)` orientation defines the
/// positive flow sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub length_m: f64,
    pub x_ohm_per_km: f64,
    pub r_ohm_per_km: f64,
    pub i_max_a: f64,
    pub v_v: f64,
}

impl Line {
    /// Series susceptance weight `1 / (x_per_km * length_km)` used in the
    /// B-theta model.
    pub fn susceptance(&self) -> f64 {
        1000.0 / (self.x_ohm_per_km * self.length_m)
    }
}

/// An undirected, connected multigraph of buses and lines. Parallel lines are
/// permitted and tracked by line index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    buses: Vec<Bus>,
    lines: Vec<Line>,
}

impl Grid {
    /// Builds a grid and validates all structural invariants: contiguous bus
    /// ids, no self-loops, positive electrical parameters and connectivity.
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::InvalidGrid("grid has no buses".into()));
        }
        for (i, bus) in buses.iter().enumerate() {
            if bus.id != i {
                return Err(Error::InvalidGrid(format!(
                    "bus entry {i} has id {}, ids must be contiguous 0..{}",
                    bus.id,
                    buses.len()
                )));
            }
        }
        for (idx, line) in lines.iter().enumerate() {
            if line.from == line.to {
                return Err(Error::InvalidGrid(format!(
                    "line entry {idx} is a self-loop at bus {}",
                    line.from
                )));
            }
            if line.from >= buses.len() || line.to >= buses.len() {
                return Err(Error::InvalidGrid(format!(
                    "line entry {idx} references a bus outside 0..{}",
                    buses.len()
                )));
            }
            if !(line.length_m > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "line entry {idx} has non-positive length"
                )));
            }
            if !(line.x_ohm_per_km > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "line entry {idx} has non-positive reactance"
                )));
            }
            if !(line.i_max_a > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "line entry {idx} has non-positive max current"
                )));
            }
            if !(line.v_v > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "line entry {idx} has non-positive voltage"
                )));
            }
        }
        let grid = Grid { buses, lines };
        if !grid.is_connected() {
            return Err(Error::InvalidGrid(
                "grid is not connected (more than one component)".into(),
            ));
        }
        Ok(grid)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let mut adjacency = vec![Vec::new(); n];
        for line in &self.lines {
            adjacency[line.from].push(line.to);
            adjacency[line.to].push(line.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Parses the grid JSON schema and validates invariants. JSON syntax and
    /// type errors are reported with their line number; semantic violations
    /// name the offending entry.
    pub fn from_json_str(text: &str, path: &str) -> Result<Self> {
        let raw: GridFile = serde_json::from_str(text).map_err(|e| Error::MalformedFile {
            path: path.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Grid::new(raw.buses, raw.lines).map_err(|e| Error::MalformedFile {
            path: path.to_string(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = GridFile {
            buses: self.buses.clone(),
            lines: self.lines.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    buses: Vec<Bus>,
    lines: Vec<Line>,
}

/// Per-line signed energy flows in kWh, indexed by line index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for FlowVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Prefactored B-theta solver for a fixed grid and reference bus. The reduced
/// weighted Laplacian of a connected grid is symmetric positive definite, so
/// one Cholesky factorization serves any number of injection vectors.
pub struct DcSolver<'g> {
    grid: &'g Grid,
    reference_bus: usize,
    factor: Cholesky<f64, nalgebra::Dyn>,
}

impl<'g> DcSolver<'g> {
    pub fn new(grid: &'g Grid, reference_bus: usize) -> Result<Self> {
        let n = grid.bus_count();
        if reference_bus >= n {
            return Err(Error::InvalidParameter(format!(
                "reference bus {reference_bus} out of range"
            )));
        }
        // Weighted Laplacian with the reference row/column deleted.
        let mut reduced = DMatrix::<f64>::zeros(n - 1, n - 1);
        let map = |bus: usize| -> Option<usize> {
            match bus.cmp(&reference_bus) {
                std::cmp::Ordering::Less => Some(bus),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(bus - 1),
            }
        };
        for line in grid.lines() {
            let b = line.susceptance();
            let i = map(line.from);
            let j = map(line.to);
            if let Some(i) = i {
                reduced[(i, i)] += b;
            }
            if let Some(j) = j {
                reduced[(j, j)] += b;
            }
            if let (Some(i), Some(j)) = (i, j) {
                reduced[(i, j)] -= b;
                reduced[(j, i)] -= b;
            }
        }
        let factor = Cholesky::new(reduced).ok_or(Error::SingularSystem)?;
        Ok(DcSolver {
            grid,
            reference_bus,
            factor,
        })
    }

    /// Solves for per-line flows given per-bus injections (kWh; positive
    /// injects into the grid). Injections must balance to zero within
    /// `1e-9 * max|injection|`.
    pub fn solve(&self, injections: &[f64]) -> Result<FlowVector> {
        let n = self.grid.bus_count();
        if injections.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: injections.len(),
            });
        }
        let max_abs = injections.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sum: f64 = injections.iter().sum();
        let tolerance = 1e-9 * max_abs;
        if sum.abs() > tolerance {
            return Err(Error::UnbalancedInjections { sum, tolerance });
        }

        let mut rhs = DVector::<f64>::zeros(n - 1);
        for (bus, &p) in injections.iter().enumerate() {
            if bus < self.reference_bus {
                rhs[bus] = p;
            } else if bus > self.reference_bus {
                rhs[bus - 1] = p;
            }
        }
        let theta_reduced = self.factor.solve(&rhs);
        let theta = |bus: usize| -> f64 {
            match bus.cmp(&self.reference_bus) {
                std::cmp::Ordering::Less => theta_reduced[bus],
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => theta_reduced[bus - 1],
            }
        };
        let flows = self
            .grid
            .lines()
            .iter()
            .map(|line| line.susceptance() * (theta(line.from) - theta(line.to)))
            .collect();
        Ok(FlowVector(flows))
    }
}

/// One-shot DC power flow: builds the weighted Laplacian, deletes the
/// reference row/column, solves for angles and maps them to per-line flows.
pub fn dc_power_flow(grid: &Grid, injections: &[f64], reference_bus: usize) -> Result<FlowVector> {
    DcSolver::new(grid, reference_bus)?.solve(injections)
}

/// Thermal energy capacity of a line over `period` hours:
/// `W = sqrt(3) * V * I_max * period / 1000` kWh.
pub fn line_capacity(line: &Line, period_h: f64) -> f64 {
    3.0f64.sqrt() * line.v_v * line.i_max_a * period_h / 1000.0
}

/// Per-line utilization `u = |w| / W`.
pub fn utilization(flows: &FlowVector, capacities: &[f64]) -> Result<Vec<f64>> {
    if flows.len() != capacities.len() {
        return Err(Error::DimensionMismatch {
            expected: capacities.len(),
            got: flows.len(),
        });
    }
    capacities
        .iter()
        .enumerate()
        .map(|(i, &cap)| {
            if cap > 0.0 {
                Ok(flows[i].abs() / cap)
            } else {
                Err(Error::ZeroCapacity { index: i })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn nayy_line(from: usize, to: usize, length_m: f64) -> Line {
        Line {
            from,
            to,
            length_m,
            x_ohm_per_km: 0.083,
            r_ohm_per_km: 0.642,
            i_max_a: 142.0,
            v_v: 400.0,
        }
    }

    fn simple_grid(n: usize, lines: Vec<Line>) -> Grid {
        let buses = (0..n)
            .map(|id| Bus {
                id,
                name: format!("b{id}"),
            })
            .collect();
        Grid::new(buses, lines).unwrap()
    }

    #[test]
    fn two_bus_flow_is_forced_by_conservation() {
        let grid = simple_grid(2, vec![nayy_line(0, 1, 50.0)]);
        let flows = dc_power_flow(&grid, &[1.0, -1.0], 0).unwrap();
        assert!((flows[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_splits_two_thirds_one_third() {
        // Lines 0->1, 0->2, 2->1 with identical parameters.
        let grid = simple_grid(
            3,
            vec![
                nayy_line(0, 1, 50.0),
                nayy_line(0, 2, 50.0),
                nayy_line(2, 1, 50.0),
            ],
        );
        let flows = dc_power_flow(&grid, &[1.0, -1.0, 0.0], 0).unwrap();
        assert!((flows[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((flows[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((flows[2] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_injections_are_rejected() {
        let grid = simple_grid(3, vec![nayy_line(0, 1, 50.0), nayy_line(1, 2, 50.0)]);
        let err = dc_power_flow(&grid, &[1.0, -0.5, 0.0], 0).unwrap_err();
        assert!(matches!(err, Error::UnbalancedInjections { .. }));
    }

    #[test]
    fn nodal_conservation_holds() {
        let grid = simple_grid(
            4,
            vec![
                nayy_line(0, 1, 50.0),
                nayy_line(1, 2, 80.0),
                nayy_line(2, 3, 120.0),
                nayy_line(3, 0, 60.0),
                nayy_line(0, 2, 90.0),
            ],
        );
        let injections = [2.0, -0.5, -1.0, -0.5];
        let flows = dc_power_flow(&grid, &injections, 0).unwrap();
        for bus in 0..4 {
            let mut net = 0.0;
            for (idx, line) in grid.lines().iter().enumerate() {
                if line.from == bus {
                    net += flows[idx];
                }
                if line.to == bus {
                    net -= flows[idx];
                }
            }
            assert!(
                (net - injections[bus]).abs() < 1e-6,
                "bus {bus}: net {net} vs injection {}",
                injections[bus]
            );
        }
    }

    #[test]
    fn reference_bus_choice_does_not_change_flows() {
        let grid = simple_grid(
            4,
            vec![
                nayy_line(0, 1, 50.0),
                nayy_line(1, 2, 75.0),
                nayy_line(2, 3, 50.0),
                nayy_line(3, 0, 100.0),
            ],
        );
        let injections = [1.5, -0.25, -1.0, -0.25];
        let base = dc_power_flow(&grid, &injections, 0).unwrap();
        for reference in 1..4 {
            let flows = dc_power_flow(&grid, &injections, reference).unwrap();
            for (a, b) in base.iter().zip(flows.iter()) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn linearity_of_the_flow_map() {
        let grid = simple_grid(
            5,
            vec![
                nayy_line(0, 1, 50.0),
                nayy_line(1, 2, 70.0),
                nayy_line(2, 3, 55.0),
                nayy_line(3, 4, 65.0),
                nayy_line(4, 0, 85.0),
                nayy_line(1, 3, 95.0),
            ],
        );
        let p = [1.0, -0.3, -0.2, -0.4, -0.1];
        let q = [-2.0, 0.5, 0.5, 0.5, 0.5];
        let (a, b) = (0.7, -1.3);
        let combined: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
        let fp = dc_power_flow(&grid, &p, 0).unwrap();
        let fq = dc_power_flow(&grid, &q, 0).unwrap();
        let fc = dc_power_flow(&grid, &combined, 0).unwrap();
        for i in 0..grid.line_count() {
            let expected = a * fp[i] + b * fq[i];
            assert!((fc[i] - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn capacity_matches_three_phase_formula() {
        let line = nayy_line(0, 1, 50.0);
        let cap = line_capacity(&line, 1.0);
        assert!((cap - 98.38048586991222).abs() < 1e-9);
        let half = line_capacity(&line, 0.5);
        assert!((half - cap / 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_invariants_rejected_at_construction() {
        let mut bad = nayy_line(0, 1, 50.0);
        bad.i_max_a = 0.0;
        let buses = vec![
            Bus {
                id: 0,
                name: "b0".into(),
            },
            Bus {
                id: 1,
                name: "b1".into(),
            },
        ];
        assert!(matches!(
            Grid::new(buses, vec![bad]),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn utilization_uses_absolute_flow() {
        let flows = FlowVector(vec![5.0, -5.0, 0.0]);
        let caps = [10.0, 10.0, 10.0];
        let u = utilization(&flows, &caps).unwrap();
        assert_eq!(u, vec![0.5, 0.5, 0.0]);
        let err = utilization(&flows, &[10.0, 0.0, 10.0]).unwrap_err();
        assert!(matches!(err, Error::ZeroCapacity { index: 1 }));
    }

    #[test]
    fn disconnected_grid_is_rejected() {
        let buses = (0..4)
            .map(|id| Bus {
                id,
                name: format!("b{id}"),
            })
            .collect();
        let lines = vec![nayy_line(0, 1, 50.0), nayy_line(2, 3, 50.0)];
        assert!(matches!(
            Grid::new(buses, lines),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn grid_json_round_trip_and_errors() {
        let grid = simple_grid(2, vec![nayy_line(0, 1, 50.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        grid.save(&path).unwrap();
        let loaded = Grid::load(&path).unwrap();
        assert_eq!(grid, loaded);

        let err = Grid::from_json_str("{\n  \"buses\": [,]\n}", "bad.json").unwrap_err();
        match err {
            Error::MalformedFile { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
