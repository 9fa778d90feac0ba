use chrono::NaiveDate;
use netshock::econometrics::{did_propagation, PropagationOptions};
use netshock::ingest::{assign_treatment_flags, build_trade_panel, RegionIndex, TradePanel, TransactionRecord, TreatmentConfig};
use netshock::synth::{emit_transactions, generate_economy, SyntheticEconomyConfig};
use netshock::time::StudyWindow;

/// Synthetic shipments plus one pair that first trades after the conflict
/// starts and one pair between two conflict-area firms.
fn panel() -> TradePanel {
    let cfg = SyntheticEconomyConfig { seed: 21, n_firms: 250, ..Default::default() };
    let economy = generate_economy(&cfg);
    let mut records = emit_transactions(&economy).transactions;
    let ship = |from: usize, to: usize, date: NaiveDate| TransactionRecord {
        date,
        sender_firm_id: economy.firms[from].firm_id.clone(),
        receiver_firm_id: economy.firms[to].firm_id.clone(),
        sender_rayon_id: economy.firms[from].rayon_id.clone(),
        receiver_rayon_id: economy.firms[to].rayon_id.clone(),
        weight_kg: 500,
    };
    let conflict: Vec<usize> = (0..economy.firms.len()).filter(|&i| economy.firms[i].conflict_flag).collect();
    let safe: Vec<usize> = (0..economy.firms.len()).filter(|&i| !economy.firms[i].conflict_flag).collect();
    let linked = |a: usize, b: usize| economy.links.contains(&(a, b));
    let (a, b) = safe
        .iter()
        .flat_map(|&a| safe.iter().map(move |&b| (a, b)))
        .find(|&(a, b)| a != b && !linked(a, b))
        .unwrap();
    let (c, d) = (conflict[0], conflict[1]);
    assert!(!linked(c, d));
    records.push(ship(a, b, NaiveDate::from_ymd_opt(2015, 2, 3).unwrap()));
    records.push(ship(c, d, NaiveDate::from_ymd_opt(2013, 2, 3).unwrap()));
    let regions = RegionIndex::new(economy.firms.clone()).unwrap();
    let window = StudyWindow::from_months(cfg.emission.first_month, cfg.emission.last_month);
    let panel = build_trade_panel(&records, &regions, &window).unwrap();
    assign_treatment_flags(panel, &TreatmentConfig::default())
}

#[test]
fn entrants_are_kept_unless_excluded() {
    let panel = panel();
    let with = did_propagation(&panel, &PropagationOptions::default()).unwrap();
    let without = did_propagation(&panel, &PropagationOptions { exclude_entrants: true, ..Default::default() }).unwrap();
    assert_eq!(with.n_obs - without.n_obs, 48);
    assert_ne!(with.coefficients, without.coefficients);
}

#[test]
fn conflict_internal_pairs_are_excluded_by_default() {
    let panel = panel();
    let default = did_propagation(&panel, &PropagationOptions::default()).unwrap();
    let all = did_propagation(&panel, &PropagationOptions { include_both_conflict: true, ..Default::default() }).unwrap();
    assert_eq!(all.n_obs - default.n_obs, 48);
}
