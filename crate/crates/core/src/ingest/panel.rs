use std::collections::{BTreeMap, BTreeSet};

use super::{IngestError, RegionIndex, TransactionRecord};
use crate::time::{StudyWindow, YearMonth};

/// A firm operating from a given rayon; the node identity of the trade panel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Establishment {
    pub firm_id: String,
    pub rayon_id: String,
}

/// Aggregates for one pair-direction in one month.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PanelCell {
    pub n_shipments: u32,
    pub total_weight_kg: u64,
}

impl PanelCell {
    pub fn any_shipment(&self) -> bool {
        self.n_shipments > 0
    }
}

/// Trade-intensity outcomes. Logs add one to the argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeOutcome {
    AnyShipment,
    LogShipments,
    LogWeight,
}

impl TradeOutcome {
    pub fn value(self, cell: &PanelCell) -> f64 {
        match self {
            TradeOutcome::AnyShipment => f64::from(u8::from(cell.any_shipment())),
            TradeOutcome::LogShipments => f64::from(cell.n_shipments).ln_1p(),
            TradeOutcome::LogWeight => (cell.total_weight_kg as f64).ln_1p(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TradeOutcome::AnyShipment => "any_shipment",
            TradeOutcome::LogShipments => "log_shipments",
            TradeOutcome::LogWeight => "log_weight",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "any_shipment" | "any" => Some(TradeOutcome::AnyShipment),
            "log_shipments" | "log_n" => Some(TradeOutcome::LogShipments),
            "log_weight" => Some(TradeOutcome::LogWeight),
            _ => None,
        }
    }
}

/// Conflict exposure of one pair-direction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TreatmentFlags {
    /// Either endpoint operates in a conflict rayon.
    pub conflict: bool,
    /// Neither endpoint is in conflict, but one of them traded with conflict
    /// rayons before the conflict from this location.
    pub partner_conflict: bool,
    /// Destination (buyer) is in a conflict rayon.
    pub buyer_conflict: bool,
    /// Origin (supplier) is in a conflict rayon.
    pub supplier_conflict: bool,
    /// Either endpoint had a preconflict buyer in conflict territory.
    pub partner_buyer_conflict: bool,
    /// Either endpoint had a preconflict supplier in conflict territory.
    pub partner_supplier_conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDirection {
    /// Index into [`TradePanel::establishments`].
    pub origin: usize,
    pub dest: usize,
    /// Indices into [`TradePanel::provinces`].
    pub origin_province: usize,
    pub dest_province: usize,
    /// Both endpoints inside conflict territory.
    pub both_conflict: bool,
    pub first_trade: YearMonth,
    /// Partner exposure measured at the establishment.
    pub flags: TreatmentFlags,
    /// Partner exposure measured over every establishment of the firm.
    pub firm_flags: TreatmentFlags,
    /// Distinct preconflict partners of each endpoint establishment.
    pub origin_partners_pre: u32,
    pub dest_partners_pre: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreatmentConfig {
    /// Last month counted as preconflict.
    pub preconflict_end: YearMonth,
}

impl Default for TreatmentConfig {
    fn default() -> Self {
        TreatmentConfig { preconflict_end: YearMonth::new(2014, 2) }
    }
}

/// Balanced establishment-pair-direction by month panel.
///
/// The universe is every pair-direction with at least one shipment in the
/// window; each appears in every month. Cells are stored pair-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TradePanel {
    establishments: Vec<Establishment>,
    establishment_conflict: Vec<bool>,
    provinces: Vec<String>,
    months: Vec<YearMonth>,
    pairs: Vec<PairDirection>,
    cells: Vec<PanelCell>,
    treatment: Option<TreatmentConfig>,
}

impl TradePanel {
    pub fn establishments(&self) -> &[Establishment] {
        &self.establishments
    }

    pub fn is_conflict_establishment(&self, idx: usize) -> bool {
        self.establishment_conflict[idx]
    }

    pub fn provinces(&self) -> &[String] {
        &self.provinces
    }

    pub fn months(&self) -> &[YearMonth] {
        &self.months
    }

    pub fn pairs(&self) -> &[PairDirection] {
        &self.pairs
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// The month series of pair `p`.
    pub fn cells_of(&self, p: usize) -> &[PanelCell] {
        let m = self.months.len();
        &self.cells[p * m..(p + 1) * m]
    }

    pub fn cell(&self, p: usize, month_idx: usize) -> &PanelCell {
        &self.cells[p * self.months.len() + month_idx]
    }

    /// Configuration used for the treatment flags, if assigned.
    pub fn treatment(&self) -> Option<&TreatmentConfig> {
        self.treatment.as_ref()
    }

    pub fn month_index(&self, ym: YearMonth) -> Option<usize> {
        self.months.binary_search(&ym).ok()
    }
}

/// Aggregates shipments into the balanced monthly panel.
///
/// Records outside `window` are ignored. Every firm id must resolve in
/// `regions`; otherwise the offending ids are listed in the error.
pub fn build_trade_panel(
    records: &[TransactionRecord],
    regions: &RegionIndex,
    window: &StudyWindow,
) -> Result<TradePanel, IngestError> {
    let unresolved =
        regions.unresolved(records.iter().flat_map(|r| [r.sender_firm_id.as_str(), r.receiver_firm_id.as_str()]));
    if !unresolved.is_empty() {
        return Err(IngestError::UnresolvedFirms(unresolved));
    }
    let months = window.months();
    let first_ordinal = months[0].ordinal();
    let n_months = months.len();

    let in_window: Vec<&TransactionRecord> = records.iter().filter(|r| window.contains(r.date)).collect();

    let mut est_set: BTreeSet<(&str, &str)> = BTreeSet::new();
    for r in &in_window {
        est_set.insert((&r.sender_firm_id, &r.sender_rayon_id));
        est_set.insert((&r.receiver_firm_id, &r.receiver_rayon_id));
    }
    let est_index: BTreeMap<(&str, &str), usize> = est_set.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let establishments: Vec<Establishment> = est_set
        .iter()
        .map(|(f, r)| Establishment { firm_id: f.to_string(), rayon_id: r.to_string() })
        .collect();

    let mut series: BTreeMap<(usize, usize), Vec<PanelCell>> = BTreeMap::new();
    for r in &in_window {
        let o = est_index[&(r.sender_firm_id.as_str(), r.sender_rayon_id.as_str())];
        let d = est_index[&(r.receiver_firm_id.as_str(), r.receiver_rayon_id.as_str())];
        let m = (crate::time::YearMonth::from_date(r.date).ordinal() - first_ordinal) as usize;
        let cells = series.entry((o, d)).or_insert_with(|| vec![PanelCell::default(); n_months]);
        cells[m].n_shipments += 1;
        cells[m].total_weight_kg += r.weight_kg;
    }

    let establishment_conflict: Vec<bool> =
        establishments.iter().map(|e| regions.is_conflict_rayon(&e.rayon_id)).collect();
    let province_names: BTreeSet<String> = establishments
        .iter()
        .map(|e| regions.province_of(&e.firm_id, &e.rayon_id).unwrap_or("").to_string())
        .collect();
    let provinces: Vec<String> = province_names.into_iter().collect();
    let est_province: Vec<usize> = establishments
        .iter()
        .map(|e| {
            let p = regions.province_of(&e.firm_id, &e.rayon_id).unwrap_or("");
            provinces.binary_search_by(|x| x.as_str().cmp(p)).expect("province indexed")
        })
        .collect();

    let mut pairs = Vec::with_capacity(series.len());
    let mut cells = Vec::with_capacity(series.len() * n_months);
    for ((o, d), s) in series {
        let first = s.iter().position(PanelCell::any_shipment).expect("pair has a shipment");
        pairs.push(PairDirection {
            origin: o,
            dest: d,
            origin_province: est_province[o],
            dest_province: est_province[d],
            both_conflict: establishment_conflict[o] && establishment_conflict[d],
            first_trade: months[first],
            flags: TreatmentFlags::default(),
            firm_flags: TreatmentFlags::default(),
            origin_partners_pre: 0,
            dest_partners_pre: 0,
        });
        cells.extend_from_slice(&s);
    }

    Ok(TradePanel { establishments, establishment_conflict, provinces, months, pairs, cells, treatment: None })
}

/// Sets first- and second-degree conflict exposure on every pair-direction.
///
/// Second-degree exposure is measured over shipments in months up to and
/// including `preconflict_end`, from the same establishment (`flags`) or from
/// any establishment of the same firm (`firm_flags`).
pub fn assign_treatment_flags(mut panel: TradePanel, config: &TreatmentConfig) -> TradePanel {
    let n_est = panel.establishments.len();
    let pre_months = panel.months.iter().take_while(|m| **m <= config.preconflict_end).count();

    let firm_ids: BTreeSet<&str> = panel.establishments.iter().map(|e| e.firm_id.as_str()).collect();
    let firm_index: BTreeMap<&str, usize> = firm_ids.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let est_firm: Vec<usize> = panel.establishments.iter().map(|e| firm_index[e.firm_id.as_str()]).collect();

    let mut est_buyer = vec![false; n_est];
    let mut est_supplier = vec![false; n_est];
    let mut firm_buyer = vec![false; firm_index.len()];
    let mut firm_supplier = vec![false; firm_index.len()];
    let mut partners: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_est];

    for (p, pair) in panel.pairs.iter().enumerate() {
        let m = panel.months.len();
        let traded_pre = panel.cells[p * m..p * m + pre_months].iter().any(PanelCell::any_shipment);
        if !traded_pre {
            continue;
        }
        let (o, d) = (pair.origin, pair.dest);
        if panel.establishment_conflict[d] {
            est_buyer[o] = true;
            firm_buyer[est_firm[o]] = true;
        }
        if panel.establishment_conflict[o] {
            est_supplier[d] = true;
            firm_supplier[est_firm[d]] = true;
        }
        if o != d {
            partners[o].insert(d);
            partners[d].insert(o);
        }
    }

    let conflict = &panel.establishment_conflict;
    for pair in &mut panel.pairs {
        let (o, d) = (pair.origin, pair.dest);
        let first = conflict[o] || conflict[d];
        let direct = TreatmentFlags {
            conflict: first,
            buyer_conflict: conflict[d],
            supplier_conflict: conflict[o],
            ..TreatmentFlags::default()
        };
        let second = |buyer: &dyn Fn(usize) -> bool, supplier: &dyn Fn(usize) -> bool| {
            let pb = !first && (buyer(o) || buyer(d));
            let ps = !first && (supplier(o) || supplier(d));
            TreatmentFlags { partner_conflict: pb || ps, partner_buyer_conflict: pb, partner_supplier_conflict: ps, ..direct }
        };
        pair.flags = second(&|e| est_buyer[e], &|e| est_supplier[e]);
        pair.firm_flags = second(&|e| firm_buyer[est_firm[e]], &|e| firm_supplier[est_firm[e]]);
        pair.origin_partners_pre = partners[o].len() as u32;
        pair.dest_partners_pre = partners[d].len() as u32;
    }
    panel.treatment = Some(*config);
    panel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FirmRecord;
    use chrono::NaiveDate;

    fn firm(id: &str, rayon: &str, prov: &str, conflict: bool) -> FirmRecord {
        FirmRecord { firm_id: id.into(), rayon_id: rayon.into(), province_id: prov.into(), conflict_flag: conflict }
    }

    fn regions() -> RegionIndex {
        RegionIndex::new(vec![
            firm("F1", "R1", "P1", false),
            firm("F2", "R2", "P2", false),
            firm("F3", "R3", "P2", false),
            firm("C1", "RC", "PC", true),
        ])
        .unwrap()
    }

    fn ship(date: (i32, u32, u32), from: (&str, &str), to: (&str, &str), w: u64) -> TransactionRecord {
        TransactionRecord {
            date: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(),
            sender_firm_id: from.0.into(),
            sender_rayon_id: from.1.into(),
            receiver_firm_id: to.0.into(),
            receiver_rayon_id: to.1.into(),
            weight_kg: w,
        }
    }

    #[test]
    fn single_shipment_balances_to_48_cells() {
        let recs = vec![ship((2013, 5, 2), ("F1", "R1"), ("F2", "R2"), 100)];
        let panel = build_trade_panel(&recs, &regions(), &StudyWindow::default()).unwrap();
        assert_eq!(panel.pairs().len(), 1);
        assert_eq!(panel.n_cells(), 48);
        let active: Vec<usize> = (0..48).filter(|&m| panel.cell(0, m).any_shipment()).collect();
        assert_eq!(active, vec![4]);
        assert_eq!(panel.pairs()[0].first_trade, YearMonth::new(2013, 5));
    }

    #[test]
    fn same_month_shipments_sum() {
        let recs: Vec<_> = [1000, 2000, 3000].iter().map(|&w| ship((2013, 5, 2), ("F1", "R1"), ("F2", "R2"), w)).collect();
        let panel = build_trade_panel(&recs, &regions(), &StudyWindow::default()).unwrap();
        let c = panel.cell(0, 4);
        assert_eq!((c.n_shipments, c.total_weight_kg), (3, 6000));
        assert_eq!(TradeOutcome::LogShipments.value(c), 4f64.ln());
        assert_eq!(TradeOutcome::AnyShipment.value(panel.cell(0, 0)), 0.0);
    }

    #[test]
    fn unresolved_firms_listed() {
        let recs = vec![ship((2013, 5, 2), ("F1", "R1"), ("ZZ", "R2"), 1), ship((2013, 5, 2), ("YY", "R1"), ("ZZ", "R2"), 1)];
        match build_trade_panel(&recs, &regions(), &StudyWindow::default()) {
            Err(IngestError::UnresolvedFirms(ids)) => assert_eq!(ids, vec!["YY".to_string(), "ZZ".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn flagged(recs: &[TransactionRecord]) -> TradePanel {
        let panel = build_trade_panel(recs, &regions(), &StudyWindow::default()).unwrap();
        assign_treatment_flags(panel, &TreatmentConfig::default())
    }

    fn pair_flags<'a>(panel: &'a TradePanel, from: &str, to: &str) -> &'a PairDirection {
        panel
            .pairs()
            .iter()
            .find(|p| panel.establishments()[p.origin].firm_id == from && panel.establishments()[p.dest].firm_id == to)
            .unwrap()
    }

    #[test]
    fn direct_conflict_link() {
        let panel = flagged(&[ship((2013, 5, 2), ("C1", "RC"), ("F2", "R2"), 10)]);
        let p = pair_flags(&panel, "C1", "F2");
        assert!(p.flags.conflict && !p.flags.partner_conflict);
        assert!(p.flags.supplier_conflict && !p.flags.buyer_conflict);
    }

    #[test]
    fn second_degree_buyer_link() {
        let panel = flagged(&[
            ship((2013, 6, 1), ("F1", "R1"), ("C1", "RC"), 10),
            ship((2013, 7, 1), ("F1", "R1"), ("F2", "R2"), 10),
        ]);
        let p = pair_flags(&panel, "F1", "F2");
        assert!(!p.flags.conflict);
        assert!(p.flags.partner_conflict && p.flags.partner_buyer_conflict && !p.flags.partner_supplier_conflict);
        assert_eq!(p.origin_partners_pre, 2);
        assert_eq!(p.dest_partners_pre, 1);
    }

    #[test]
    fn control_group_has_no_flags() {
        let panel = flagged(&[ship((2013, 7, 1), ("F1", "R1"), ("F2", "R2"), 10)]);
        assert_eq!(pair_flags(&panel, "F1", "F2").flags, TreatmentFlags::default());
    }

    #[test]
    fn postconflict_conflict_trade_does_not_count() {
        let panel = flagged(&[
            ship((2014, 6, 1), ("F1", "R1"), ("C1", "RC"), 10),
            ship((2013, 7, 1), ("F1", "R1"), ("F2", "R2"), 10),
        ]);
        assert!(!pair_flags(&panel, "F1", "F2").flags.partner_conflict);
    }

    #[test]
    fn establishment_versus_firm_level_exposure() {
        // F1 trades with the conflict area only from its second location R9.
        let panel = flagged(&[
            ship((2013, 6, 1), ("F1", "R9"), ("C1", "RC"), 10),
            ship((2013, 7, 1), ("F1", "R1"), ("F2", "R2"), 10),
        ]);
        let p = pair_flags(&panel, "F1", "F2");
        let p = panel.pairs().iter().find(|q| panel.establishments()[q.origin].rayon_id == "R1" && q == &p).unwrap();
        assert!(!p.flags.partner_conflict);
        assert!(p.firm_flags.partner_conflict && p.firm_flags.partner_buyer_conflict);
    }
}
