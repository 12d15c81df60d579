//! Built-in test-case topologies.
//!
//! Edge lists for the six standard transmission test systems between 9 and
//! 57 buses, reduced to topology only: every line starts with a relative
//! length of 1.0 and residential NAYY 4x50 SE parameters at 400 V, to be
//! normalized by [`crate::instance::rescale_topology`]. Bus numbering is
//! 0-based (original 1-based numbering shifted down by one). Duplicate
//! entries are genuine parallel circuits.

use crate::error::{Error, Result};
use crate::grid::{Bus, Grid, Line};

/// NAYY 4x50 SE low-voltage cable, datasheet values.
pub const NAYY_4X50_SE_R_OHM_PER_KM: f64 = 0.642;
pub const NAYY_4X50_SE_X_OHM_PER_KM: f64 = 0.083;
pub const NAYY_4X50_SE_I_MAX_A: f64 = 142.0;
pub const RESIDENTIAL_VOLTAGE_V: f64 = 400.0;

const CASE9: &[(usize, usize)] = &[
    (1, 4),
    (4, 5),
    (5, 6),
    (3, 6),
    (6, 7),
    (7, 8),
    (8, 2),
    (8, 9),
    (9, 4),
];

const CASE14: &[(usize, usize)] = &[
    (1, 2),
    (1, 5),
    (2, 3),
    (2, 4),
    (2, 5),
    (3, 4),
    (4, 5),
    (4, 7),
    (4, 9),
    (5, 6),
    (6, 11),
    (6, 12),
    (6, 13),
    (7, 8),
    (7, 9),
    (9, 10),
    (9, 14),
    (10, 11),
    (12, 13),
    (13, 14),
];

const CASE24: &[(usize, usize)] = &[
    (1, 2),
    (1, 3),
    (1, 5),
    (2, 4),
    (2, 6),
    (3, 9),
    (3, 24),
    (4, 9),
    (5, 10),
    (6, 10),
    (7, 8),
    (8, 9),
    (8, 10),
    (9, 11),
    (9, 12),
    (10, 11),
    (10, 12),
    (11, 13),
    (11, 14),
    (12, 13),
    (12, 23),
    (13, 23),
    (14, 16),
    (15, 16),
    (15, 21),
    (15, 21),
    (15, 24),
    (16, 17),
    (16, 19),
    (17, 18),
    (17, 22),
    (18, 21),
    (18, 21),
    (19, 20),
    (19, 20),
    (20, 23),
    (20, 23),
    (21, 22),
];

// The radial 33-bus distribution feeder; the five normally-open tie switches
// are excluded.
const CASE33: &[(usize, usize)] = &[
    (1, 2),
    (2, 3),
    (3, 4),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (12, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (16, 17),
    (17, 18),
    (2, 19),
    (19, 20),
    (20, 21),
    (21, 22),
    (3, 23),
    (23, 24),
    (24, 25),
    (6, 26),
    (26, 27),
    (27, 28),
    (28, 29),
    (29, 30),
    (30, 31),
    (31, 32),
    (32, 33),
];

const CASE39: &[(usize, usize)] = &[
    (1, 2),
    (1, 39),
    (2, 3),
    (2, 25),
    (2, 30),
    (3, 4),
    (3, 18),
    (4, 5),
    (4, 14),
    (5, 6),
    (5, 8),
    (6, 7),
    (6, 11),
    (6, 31),
    (7, 8),
    (8, 9),
    (9, 39),
    (10, 11),
    (10, 13),
    (10, 32),
    (12, 11),
    (12, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (16, 17),
    (16, 19),
    (16, 21),
    (16, 24),
    (17, 18),
    (17, 27),
    (19, 20),
    (19, 33),
    (20, 34),
    (21, 22),
    (22, 23),
    (22, 35),
    (23, 24),
    (23, 36),
    (25, 26),
    (25, 37),
    (26, 27),
    (26, 28),
    (26, 29),
    (28, 29),
    (29, 38),
];

const CASE57: &[(usize, usize)] = &[
    (1, 2),
    (2, 3),
    (3, 4),
    (4, 5),
    (4, 6),
    (6, 7),
    (6, 8),
    (8, 9),
    (9, 10),
    (9, 11),
    (9, 12),
    (9, 13),
    (13, 14),
    (13, 15),
    (1, 15),
    (1, 16),
    (1, 17),
    (3, 15),
    (4, 18),
    (4, 18),
    (5, 6),
    (7, 8),
    (10, 12),
    (11, 13),
    (12, 13),
    (12, 16),
    (12, 17),
    (14, 15),
    (18, 19),
    (19, 20),
    (21, 20),
    (21, 22),
    (22, 23),
    (23, 24),
    (24, 25),
    (24, 25),
    (24, 26),
    (26, 27),
    (27, 28),
    (28, 29),
    (7, 29),
    (25, 30),
    (30, 31),
    (31, 32),
    (32, 33),
    (34, 32),
    (34, 35),
    (35, 36),
    (36, 37),
    (37, 38),
    (37, 39),
    (36, 40),
    (22, 38),
    (11, 41),
    (41, 42),
    (41, 43),
    (38, 44),
    (15, 45),
    (14, 46),
    (46, 47),
    (47, 48),
    (48, 49),
    (49, 50),
    (50, 51),
    (10, 51),
    (13, 49),
    (29, 52),
    (52, 53),
    (53, 54),
    (54, 55),
    (11, 43),
    (44, 45),
    (40, 56),
    (56, 41),
    (56, 42),
    (39, 57),
    (57, 56),
    (38, 49),
    (38, 48),
    (9, 55),
];

/// Builds the raw (pre-rescale) topology for a built-in case name.
pub fn case_topology(name: &str) -> Result<Grid> {
    let (node_count, edges): (usize, &[(usize, usize)]) = match name {
        "case9" => (9, CASE9),
        "case14" => (14, CASE14),
        "case24" => (24, CASE24),
        "case33" => (33, CASE33),
        "case39" => (39, CASE39),
        "case57" => (57, CASE57),
        _ => {
            return Err(Error::MissingTopology {
                name: name.to_string(),
            })
        }
    };
    let buses = (0..node_count)
        .map(|id| Bus {
            id,
            name: format!("b{id}"),
        })
        .collect();
    let lines = edges
        .iter()
        .map(|&(from, to)| Line {
            from: from - 1,
            to: to - 1,
            length_m: 1.0,
            x_ohm_per_km: NAYY_4X50_SE_X_OHM_PER_KM,
            r_ohm_per_km: NAYY_4X50_SE_R_OHM_PER_KM,
            i_max_a: NAYY_4X50_SE_I_MAX_A,
            v_v: RESIDENTIAL_VOLTAGE_V,
        })
        .collect();
    Grid::new(buses, lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topologies_have_expected_sizes_and_are_connected() {
        // Grid::new validates connectivity, so constructing suffices.
        for (name, buses, lines) in [
            ("case9", 9, 9),
            ("case14", 14, 20),
            ("case24", 24, 38),
            ("case33", 33, 32),
            ("case39", 39, 46),
            ("case57", 57, 80),
        ] {
            let grid = case_topology(name).unwrap();
            assert_eq!(grid.bus_count(), buses, "{name}");
            assert_eq!(grid.line_count(), lines, "{name}");
        }
    }

    #[test]
    fn unknown_case_is_missing_topology() {
        assert!(matches!(
            case_topology("case118"),
            Err(Error::MissingTopology { .. })
        ));
    }
}
