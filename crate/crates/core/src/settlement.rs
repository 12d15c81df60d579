//! Settlement: from an assignment to money. Computes per-peer grid costs,
//! prices residual volumes at the flat DSO tariffs, compensates matched
//! volumes at the equilibrium tariff and aggregates community-level fees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::matching::Trade;

/// Flat tariff scheme in ct/kWh. `lambda_eq` is pinned to the midpoint of
/// buy and sell; `grid_compound` is the operation share of the buy tariff
/// collected by the DSO on residual consumer purchases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TariffScheme {
    pub lambda_buy: f64,
    pub lambda_sell: f64,
    pub lambda_eq: f64,
    pub grid_compound: f64,
}

impl TariffScheme {
    pub fn new(lambda_buy: f64, lambda_sell: f64, grid_compound: f64) -> Result<Self> {
        let lambda_eq = (lambda_buy + lambda_sell) / 2.0;
        if !(0.0 <= lambda_sell && lambda_sell <= lambda_eq && lambda_eq <= lambda_buy) {
            return Err(Error::InvalidParameter(
                "tariffs must satisfy 0 <= sell <= eq <= buy".into(),
            ));
        }
        Ok(TariffScheme {
            lambda_buy,
            lambda_sell,
            lambda_eq,
            grid_compound,
        })
    }
}

impl Default for TariffScheme {
    /// 30 ct/kWh purchase, 8 ct/kWh feed-in, 19 ct/kWh equilibrium and a
    /// 15 ct/kWh grid operation compound (half the purchase price).
    fn default() -> Self {
        TariffScheme {
            lambda_buy: 30.0,
            lambda_sell: 8.0,
            lambda_eq: 19.0,
            grid_compound: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeerRole {
    Producer,
    Consumer,
}

/// Final settlement of a single peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerSettlement {
    pub peer: usize,
    pub role: PeerRole,
    /// Net demand d_i in kWh (negative for producers).
    pub demand_kwh: f64,
    /// P2P-matched volume in kWh (nonnegative).
    pub matched_kwh: f64,
    /// Allocated grid cost M_i in ct.
    pub grid_cost_ct: f64,
    /// Final bill (negative = revenue) in ct.
    pub final_bill_ct: f64,
    /// Effective tariff `final_bill / demand` in ct/kWh.
    pub effective_tariff_ct_per_kwh: f64,
}

/// Community-level fee aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    /// Grid fees collected on active P2P trades, in ct.
    pub p2p_fees_ct: f64,
    /// Grid compound collected on residual consumer purchases, in ct.
    pub residual_fees_ct: f64,
    pub total_dso_fees_ct: f64,
    /// Fees the DSO would collect with no P2P trading at all, in ct.
    pub baseline_fees_ct: f64,
    /// Matched consumer volume over total consumer demand, in [0, 1].
    pub p2p_ratio: f64,
}

/// Splits each active trade's grid cost equally between its producer and its
/// consumer: `M_i = 1/2 * sum over active trades involving i of M_pc`.
pub fn peer_grid_costs(
    x: &[bool],
    trades: &[Trade],
    trade_costs: &[f64],
    num_peers: usize,
) -> Result<Vec<f64>> {
    if x.len() != trades.len() {
        return Err(Error::DimensionMismatch {
            expected: trades.len(),
            got: x.len(),
        });
    }
    if trade_costs.len() != trades.len() {
        return Err(Error::DimensionMismatch {
            expected: trades.len(),
            got: trade_costs.len(),
        });
    }
    let mut costs = vec![0.0f64; num_peers];
    for (k, trade) in trades.iter().enumerate() {
        if x[k] {
            let half = trade_costs[k] / 2.0;
            costs[trade.producer] += half;
            costs[trade.consumer] += half;
        }
    }
    Ok(costs)
}

/// Matched volume per peer: the sum of active trade volumes the peer takes
/// part in.
pub fn matched_volumes(x: &[bool], trades: &[Trade], num_peers: usize) -> Vec<f64> {
    let mut matched = vec![0.0f64; num_peers];
    for (k, trade) in trades.iter().enumerate() {
        if x[k] {
            matched[trade.producer] += trade.volume_kwh;
            matched[trade.consumer] += trade.volume_kwh;
        }
    }
    matched
}

/// Settles every peer: residual volumes are bought from (sold to) the DSO at
/// the flat buy (sell) tariff, matched volumes are compensated at the
/// equilibrium tariff, and allocated grid costs are added on top.
/// Over-matching is permitted; the negative-part terms price the excess.
pub fn settle(
    x: &[bool],
    instance: &Instance,
    trades: &[Trade],
    trade_costs: &[f64],
    tariffs: &TariffScheme,
) -> Result<Vec<PeerSettlement>> {
    let num_peers = instance.grid.bus_count();
    let grid_costs = peer_grid_costs(x, trades, trade_costs, num_peers)?;
    let matched = matched_volumes(x, trades, num_peers);
    let demand = instance.loads.demand();

    let positive = |v: f64| v.max(0.0);
    let negative = |v: f64| v.min(0.0);

    let mut settlements = Vec::with_capacity(num_peers);
    for peer in 0..num_peers {
        let d = demand[peer];
        if d == 0.0 {
            return Err(Error::ZeroDemand { peer });
        }
        let matched_volume = matched[peer];
        let is_producer = instance.loads.is_producer(peer);
        let bill = if is_producer {
            // Unsold production (matched + d < 0) goes to the DSO at the sell
            // tariff; over-sold volume is bought back at the buy tariff.
            grid_costs[peer]
                + tariffs.lambda_buy * positive(matched_volume + d)
                + tariffs.lambda_sell * negative(matched_volume + d)
                - tariffs.lambda_eq * matched_volume
        } else {
            grid_costs[peer]
                + tariffs.lambda_buy * positive(d - matched_volume)
                + tariffs.lambda_sell * negative(d - matched_volume)
                + tariffs.lambda_eq * matched_volume
        };
        settlements.push(PeerSettlement {
            peer,
            role: if is_producer {
                PeerRole::Producer
            } else {
                PeerRole::Consumer
            },
            demand_kwh: d,
            matched_kwh: matched_volume,
            grid_cost_ct: grid_costs[peer],
            final_bill_ct: bill,
            effective_tariff_ct_per_kwh: bill / d,
        });
    }
    Ok(settlements)
}

/// Aggregates collected fees: P2P trade fees, the grid compound on residual
/// consumer purchases, the no-trade baseline and the matched-demand ratio.
pub fn community_report(
    settlements: &[PeerSettlement],
    x: &[bool],
    trade_costs: &[f64],
    tariffs: &TariffScheme,
) -> CommunityReport {
    let p2p_fees_ct: f64 = x
        .iter()
        .zip(trade_costs)
        .filter(|(&active, _)| active)
        .map(|(_, m)| m)
        .sum();
    let mut residual = 0.0;
    let mut total_consumption = 0.0;
    let mut matched_consumption = 0.0;
    for s in settlements {
        if s.role == PeerRole::Consumer {
            residual += s.demand_kwh - s.matched_kwh;
            total_consumption += s.demand_kwh;
            matched_consumption += s.matched_kwh;
        }
    }
    let residual_fees_ct = tariffs.grid_compound * residual;
    let baseline_fees_ct = tariffs.grid_compound * total_consumption;
    CommunityReport {
        p2p_fees_ct,
        residual_fees_ct,
        total_dso_fees_ct: p2p_fees_ct + residual_fees_ct,
        baseline_fees_ct,
        p2p_ratio: if total_consumption > 0.0 {
            matched_consumption / total_consumption
        } else {
            0.0
        },
    }
}

/// Full settlement output: per-peer records plus the community aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub peers: Vec<PeerSettlement>,
    pub community: CommunityReport,
}

impl Settlement {
    pub fn compute(
        x: &[bool],
        instance: &Instance,
        trades: &[Trade],
        trade_costs: &[f64],
        tariffs: &TariffScheme,
    ) -> Result<Self> {
        let peers = settle(x, instance, trades, trade_costs, tariffs)?;
        let community = community_report(&peers, x, trade_costs, tariffs);
        Ok(Settlement { peers, community })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// CSV mirror: one row per peer, values rounded to 0.01 ct at
    /// presentation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "peer,role,demand_kwh,matched_kwh,grid_cost_ct,final_bill_ct,effective_tariff_ct_per_kwh\n",
        );
        for p in &self.peers {
            let role = match p.role {
                PeerRole::Producer => "producer",
                PeerRole::Consumer => "consumer",
            };
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.2},{:.2},{:.4}\n",
                p.peer,
                role,
                p.demand_kwh,
                p.matched_kwh,
                p.grid_cost_ct,
                p.final_bill_ct,
                p.effective_tariff_ct_per_kwh
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{case_by_name, generate};
    use crate::matching::{pair_flows, Allocation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paired_instance(n_pairs: usize, rho: f64) -> Instance {
        // 2k buses on a path; producers at even, consumers at odd indices,
        // all demands exactly +-1 kWh.
        let n = 2 * n_pairs;
        let buses = (0..n)
            .map(|id| crate::grid::Bus {
                id,
                name: format!("b{id}"),
            })
            .collect();
        let lines = (0..n - 1)
            .map(|i| crate::grid::Line {
                from: i,
                to: i + 1,
                length_m: 50.0,
                x_ohm_per_km: 0.083,
                r_ohm_per_km: 0.642,
                i_max_a: 142.0,
                v_v: 400.0,
            })
            .collect();
        let grid = crate::grid::Grid::new(buses, lines).unwrap();
        let demand: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let producers: Vec<usize> = (0..n).step_by(2).collect();
        let consumers: Vec<usize> = (1..n).step_by(2).collect();
        let loads = crate::instance::PeerLoads::new(demand, producers, consumers).unwrap();
        Instance::new(grid, loads, rho, 100.0, 1.0, 0, "paired".into()).unwrap()
    }

    /// Assignment that matches producer 2i with consumer 2i+1.
    fn perfect_matching(instance: &Instance, trades: &[Trade]) -> Vec<bool> {
        let x: Vec<bool> = trades.iter().map(|t| t.consumer == t.producer + 1).collect();
        assert_eq!(
            x.iter().filter(|&&b| b).count(),
            instance.loads.producers().len()
        );
        x
    }

    #[test]
    fn empty_assignment_has_no_grid_costs() {
        let instance = paired_instance(3, 10.0);
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = vec![false; pf.num_trades()];
        let costs =
            peer_grid_costs(&x, pf.trades(), &allocation.trade_costs, 6).unwrap();
        assert!(costs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn single_trade_cost_splits_equally() {
        let instance = paired_instance(1, 10.0);
        let pf = pair_flows(&instance).unwrap();
        let x = vec![true];
        let costs = peer_grid_costs(&x, pf.trades(), &[10.0], 2).unwrap();
        assert_eq!(costs, vec![5.0, 5.0]);
    }

    #[test]
    fn split_conserves_total_fees() {
        let case = case_by_name("case9").unwrap();
        let instance = generate(&case, 2, 100.0).unwrap();
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x: Vec<bool> = (0..pf.num_trades()).map(|_| rng.gen_bool(0.4)).collect();
            let costs = peer_grid_costs(
                &x,
                pf.trades(),
                &allocation.trade_costs,
                instance.grid.bus_count(),
            )
            .unwrap();
            let split_total: f64 = costs.iter().sum();
            let direct: f64 = x
                .iter()
                .zip(&allocation.trade_costs)
                .filter(|(&b, _)| b)
                .map(|(_, m)| m)
                .sum();
            assert!((split_total - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn fully_matched_peers_settle_at_equilibrium_when_rho_is_zero() {
        let instance = paired_instance(4, 0.0);
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = perfect_matching(&instance, pf.trades());
        let tariffs = TariffScheme::default();
        let settlements =
            settle(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs).unwrap();
        for s in &settlements {
            assert_eq!(s.effective_tariff_ct_per_kwh, 19.0, "peer {}", s.peer);
            match s.role {
                PeerRole::Producer => assert_eq!(s.final_bill_ct, -19.0),
                PeerRole::Consumer => assert_eq!(s.final_bill_ct, 19.0),
            }
        }
    }

    #[test]
    fn unmatched_peers_settle_at_flat_tariffs() {
        let instance = paired_instance(2, 0.0);
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = vec![false; pf.num_trades()];
        let tariffs = TariffScheme::default();
        let settlements =
            settle(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs).unwrap();
        for s in &settlements {
            match s.role {
                PeerRole::Producer => {
                    // Sells 1 kWh to the DSO at 8 ct/kWh: bill = 8 * (-1).
                    assert_eq!(s.final_bill_ct, -8.0);
                    assert_eq!(s.effective_tariff_ct_per_kwh, 8.0);
                }
                PeerRole::Consumer => {
                    assert_eq!(s.final_bill_ct, 30.0);
                    assert_eq!(s.effective_tariff_ct_per_kwh, 30.0);
                }
            }
        }
    }

    #[test]
    fn no_trades_recovers_baseline_fees_exactly() {
        let case = case_by_name("case14").unwrap();
        let instance = generate(&case, 3, 100.0).unwrap();
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = vec![false; pf.num_trades()];
        let tariffs = TariffScheme::default();
        let settlement =
            Settlement::compute(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs)
                .unwrap();
        let report = &settlement.community;
        assert_eq!(report.p2p_fees_ct, 0.0);
        assert!((report.total_dso_fees_ct - report.baseline_fees_ct).abs() <= 1e-9);
        assert_eq!(report.p2p_ratio, 0.0);
    }

    #[test]
    fn full_matching_zeroes_residual_fees() {
        let instance = paired_instance(3, 5.0);
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = perfect_matching(&instance, pf.trades());
        let tariffs = TariffScheme::default();
        let settlement =
            Settlement::compute(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs)
                .unwrap();
        assert!(settlement.community.residual_fees_ct.abs() <= 1e-9);
        assert!((settlement.community.p2p_ratio - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn baseline_is_compound_times_consumption() {
        // grid_compound 15 ct/kWh and 10 kWh of consumer demand => 150 ct.
        let instance = paired_instance(10, 0.0);
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = vec![false; pf.num_trades()];
        let tariffs = TariffScheme::default();
        let settlement =
            Settlement::compute(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs)
                .unwrap();
        assert!((settlement.community.baseline_fees_ct - 150.0).abs() <= 1e-9);
    }

    #[test]
    fn equilibrium_payments_balance_between_sides() {
        let case = case_by_name("case9").unwrap();
        let instance = generate(&case, 5, 100.0).unwrap();
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let tariffs = TariffScheme::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let x: Vec<bool> = (0..pf.num_trades()).map(|_| rng.gen_bool(0.4)).collect();
            let settlements =
                settle(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs).unwrap();
            let producer_matched: f64 = settlements
                .iter()
                .filter(|s| s.role == PeerRole::Producer)
                .map(|s| s.matched_kwh)
                .sum();
            let consumer_matched: f64 = settlements
                .iter()
                .filter(|s| s.role == PeerRole::Consumer)
                .map(|s| s.matched_kwh)
                .sum();
            assert!((producer_matched - consumer_matched).abs() <= 1e-9);
        }
    }

    #[test]
    fn tariffs_stay_within_flat_bounds_without_overmatching() {
        // rho = 0 and no over-matched peer: every effective tariff lies in
        // [lambda_sell, lambda_buy].
        let case = case_by_name("case9").unwrap();
        let mut instance = generate(&case, 8, 100.0).unwrap();
        instance.rho = 0.0;
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let tariffs = TariffScheme::default();
        let demand = instance.loads.demand().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut tested = 0;
        while tested < 20 {
            let x: Vec<bool> = (0..pf.num_trades()).map(|_| rng.gen_bool(0.2)).collect();
            let matched = matched_volumes(&x, pf.trades(), instance.grid.bus_count());
            let overmatched = (0..instance.grid.bus_count())
                .any(|peer| matched[peer] > demand[peer].abs() + 1e-12);
            if overmatched {
                continue;
            }
            tested += 1;
            let settlements =
                settle(&x, &instance, pf.trades(), &allocation.trade_costs, &tariffs).unwrap();
            for s in &settlements {
                assert!(
                    s.effective_tariff_ct_per_kwh >= tariffs.lambda_sell - 1e-9
                        && s.effective_tariff_ct_per_kwh <= tariffs.lambda_buy + 1e-9,
                    "peer {} tariff {}",
                    s.peer,
                    s.effective_tariff_ct_per_kwh
                );
            }
        }
    }

    #[test]
    fn tariff_scheme_invariants_are_enforced() {
        assert!(TariffScheme::new(30.0, 8.0, 15.0).is_ok());
        assert!(TariffScheme::new(8.0, 30.0, 15.0).is_err());
        assert!(TariffScheme::new(30.0, -1.0, 15.0).is_err());
    }

    #[test]
    fn csv_mirror_has_one_row_per_peer() {
        let instance = paired_instance(2, 0.0);
        let pf = pair_flows(&instance).unwrap();
        let allocation = Allocation::compute(&instance, &pf).unwrap();
        let x = vec![false; pf.num_trades()];
        let settlement = Settlement::compute(
            &x,
            &instance,
            pf.trades(),
            &allocation.trade_costs,
            &TariffScheme::default(),
        )
        .unwrap();
        let csv = settlement.to_csv();
        assert_eq!(csv.lines().count(), 5); // header + 4 peers
        assert!(csv.starts_with("peer,role,"));
    }
}
