//! Benchmark metrics: relative objective error and time-to-solution.

/// Relative objective error against the reference optimum:
/// `(cost - ref_cost) / ref_cost`. The objective is nonnegative by
/// construction; a zero reference maps to 0 for an exact hit and to
/// `+infinity` otherwise.
pub fn relative_error(cost: f64, ref_cost: f64) -> f64 {
    if ref_cost == 0.0 {
        if cost == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (cost - ref_cost) / ref_cost
    }
}

/// Expected repetitions to draw at least one acceptable sample with 99%
/// confidence: `ceil(log(0.01) / log(1 - p))`. `None` when `p = 0`.
pub fn repetitions_for_99(p_eps: f64) -> Option<u64> {
    assert!((0.0..=1.0).contains(&p_eps), "p_eps must be a probability");
    if p_eps == 0.0 {
        None
    } else if p_eps == 1.0 {
        Some(1)
    } else {
        Some((0.01f64.ln() / (1.0 - p_eps).ln()).ceil() as u64)
    }
}

/// Time to solution: single-sample time multiplied by the 99%-confidence
/// repetition count. Absent when the success probability is zero.
pub fn time_to_solution(t_s: f64, p_eps: f64) -> Option<f64> {
    assert!(t_s > 0.0, "sample time must be positive");
    repetitions_for_99(p_eps).map(|reps| t_s * reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(10.0, 10.0), 0.0);
        assert!((relative_error(12.0, 10.0) - 0.2).abs() < 1e-12);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn tts_matches_hand_computed_values() {
        assert_eq!(time_to_solution(1.0, 0.99), Some(1.0));
        assert_eq!(time_to_solution(2.0, 0.5), Some(14.0));
        assert_eq!(time_to_solution(2.0, 0.0), None);
        assert_eq!(time_to_solution(3.5, 1.0), Some(3.5));
        assert_eq!(repetitions_for_99(0.25), Some(17));
    }

    #[test]
    fn tts_is_nonincreasing_in_success_probability() {
        let mut last = f64::INFINITY;
        for p in [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0] {
            let tts = time_to_solution(2.0, p).unwrap();
            assert!(tts <= last, "p={p}: {tts} > {last}");
            last = tts;
        }
    }
}
