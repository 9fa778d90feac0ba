use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use netshock::config::{ConfigError, KeyValues};
use netshock::counterfactual::{
    aggregate_regions, run_all, run_dynamics, write_dynamics_report, write_region_report, write_scenario_report,
    CounterfactualError, DataBundle, RegionConfig, RegionLevel, SampleRule, Scenario, ScenarioConfig, ScenarioKind,
};
use netshock::econometrics::{
    baseline_characteristics, did_centrality, did_propagation, event_study_centrality, event_study_propagation,
    preset, residualize_centrality, write_event_study, write_results, EstimationError, EstimationSpec, FirmPanel,
    ModelKind, Timing,
};
use netshock::graph::{predicted_centrality_change, write_centrality_csv, CentralityKind, GraphError, TradeGraph, Transform};
use netshock::ingest::{
    assign_treatment_flags, build_trade_panel, build_yearly_flows, load_accounting, load_firms, load_transactions,
    write_accounting, write_edge_list, write_firms, write_transactions, AccountingRecord, FlowEdge, IngestConfig,
    IngestError, RegionIndex, TradePanel, TransactionLoad, TreatmentConfig,
};
use netshock::leontief::{build_io_matrix, write_io_triplets, write_vector, EconomyConfig, LeontiefError};
use netshock::synth::{emit_transactions, plant_centrality_effect, CentralityEffectConfig, generate_economy, SyntheticEconomy, SyntheticEconomyConfig};
use netshock::time::{parse_date, StudyWindow, YearMonth};

use crate::manifest::Recorder;
use crate::settings::{parse_years, required, resolve, synth_subset};
use crate::{Command, GlobalArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] netshock::Error),
    #[error("missing input `{name}` (searched: {searched})")]
    MissingInput { name: String, searched: String },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::MissingInput { .. } => "missing_file",
            CliError::Write { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
via_core!(ConfigError, IngestError, GraphError, LeontiefError, CounterfactualError, EstimationError);

type Result<T, E = CliError> = std::result::Result<T, E>;

struct Ctx<'a> {
    args: &'a GlobalArgs,
    kv: KeyValues,
    rec: Recorder,
}

impl Ctx<'_> {
    fn input(&mut self, name: &str) -> Result<PathBuf> {
        if self.args.input.is_empty() {
            return Err(CliError::Usage("--input is required".into()));
        }
        for dir in &self.args.input {
            let p = dir.join(name);
            if p.is_file() {
                self.rec.input(&p);
                return Ok(p);
            }
        }
        let searched = self.args.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
        Err(CliError::MissingInput { name: name.into(), searched })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.rec.output(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|source| CliError::Write { path: path.display().to_string(), source })
    }

    /// Writes `name` with `f`, attributing io failures to the output path.
    fn write_with<E>(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>) -> Result<()>
    where
        CliError: From<E>,
    {
        let mut w = self.create(name)?;
        let path = self.rec.output_dir.join(name).display().to_string();
        let relabel = |e: CliError| match e {
            CliError::Write { source, .. } => CliError::Write { path: path.clone(), source },
            other => other,
        };
        f(&mut w).map_err(|e| relabel(e.into()))?;
        w.flush().map_err(|e| relabel(e.into()))
    }

    fn strict(&self) -> Result<bool> {
        Ok(self.kv.get_bool("strict")?.unwrap_or(true))
    }

    fn window(&self) -> Result<StudyWindow> {
        let date = |key: &str| -> Result<chrono::NaiveDate> {
            let raw = self.kv.get_str(key).unwrap_or("");
            parse_date(raw).ok_or_else(|| {
                ConfigError::Invalid { key: key.into(), value: raw.into(), reason: "expected YYYY-MM-DD".into() }.into()
            })
        };
        let (start, end) = (date("window_start")?, date("window_end")?);
        if start > end {
            return Err(ConfigError::Invalid {
                key: "window_end".into(),
                value: end.to_string(),
                reason: "precedes window_start".into(),
            }
            .into());
        }
        Ok(StudyWindow::new(start, end))
    }

    fn ingest_config(&self) -> Result<IngestConfig> {
        Ok(IngestConfig {
            window: self.window()?,
            strict: self.strict()?,
            exclude_international: self.kv.get_bool("exclude_international")?.unwrap_or(false),
        })
    }

    fn economy(&self) -> Result<EconomyConfig> {
        Ok(EconomyConfig::from_key_values(&self.kv)?)
    }

    fn regions(&mut self) -> Result<RegionIndex> {
        let path = self.input("firms.csv")?;
        Ok(load_firms(&path, self.strict()?)?)
    }

    fn transactions(&mut self, regions: &RegionIndex) -> Result<TransactionLoad> {
        let path = self.input("transactions.csv")?;
        let load = load_transactions(&path, regions, &self.ingest_config()?)?;
        let unresolved = regions.unresolved(
            load.records.iter().flat_map(|r| [r.sender_firm_id.as_str(), r.receiver_firm_id.as_str()]),
        );
        if !unresolved.is_empty() {
            return Err(IngestError::UnresolvedFirms(unresolved).into());
        }
        Ok(load)
    }

    fn accounting(&mut self, regions: &RegionIndex) -> Result<Vec<AccountingRecord>> {
        let path = self.input("accounting.csv")?;
        let (rows, _) = load_accounting(&path, self.strict()?)?;
        let unresolved = regions.unresolved(rows.iter().map(|a| a.firm_id.as_str()));
        if !unresolved.is_empty() {
            return Err(IngestError::UnresolvedFirms(unresolved).into());
        }
        Ok(rows)
    }

    fn year(&self, key: &str) -> Result<i32> {
        Ok(required(&self.kv, key)?)
    }

    fn yearly_flows(&self, load: &TransactionLoad, regions: &RegionIndex, years: &[i32]) -> Result<BTreeMap<i32, Vec<FlowEdge>>> {
        let mut out = BTreeMap::new();
        for &y in years {
            out.insert(y, build_yearly_flows(&load.records, regions, y)?);
        }
        Ok(out)
    }

    fn bundle(&mut self, years: &[i32]) -> Result<DataBundle> {
        let regions = self.regions()?;
        let load = self.transactions(&regions)?;
        let accounting = self.accounting(&regions)?;
        let flows = self.yearly_flows(&load, &regions, years)?;
        let rule_raw = self.kv.get_str("sample_rule").unwrap_or("balanced").to_string();
        let rule = SampleRule::parse(&rule_raw).ok_or_else(|| ConfigError::Invalid {
            key: "sample_rule".into(),
            value: rule_raw.clone(),
            reason: "expected balanced or all_firms".into(),
        })?;
        self.rec.stage("load");
        Ok(DataBundle::from_records(&accounting, &regions, &flows, rule, self.year("pre_year")?)?)
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate { .. } => "simulate",
        Command::Ingest => "ingest",
        Command::Panel => "panel",
        Command::Network => "network",
        Command::Centrality { .. } => "centrality",
        Command::Demand => "demand",
        Command::Counterfactual { .. } => "counterfactual",
        Command::Dynamics => "dynamics",
        Command::Did { .. } => "did",
        Command::Aggregate { .. } => "aggregate",
    }
}

pub fn run(args: &GlobalArgs, cmd: &Command) -> Result<()> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(a) = args.alpha {
        overrides.push(("alpha", a.to_string()));
    }
    if let Some(s) = &args.window_start {
        overrides.push(("window_start", s.clone()));
    }
    if let Some(s) = &args.window_end {
        overrides.push(("window_end", s.clone()));
    }
    if let Some(s) = &args.post_start {
        overrides.push(("post_start", s.clone()));
    }
    if args.strict {
        overrides.push(("strict", "true".into()));
    }
    if args.lenient {
        overrides.push(("strict", "false".into()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed", seed.to_string()));
    }
    let kv = resolve(args.config.as_deref(), &overrides)?;
    let output = args.output.clone().ok_or_else(|| CliError::Usage("--output is required".into()))?;
    std::fs::create_dir_all(&output)
        .map_err(|source| CliError::Write { path: output.display().to_string(), source })?;

    let mut rec = Recorder::new(command_name(cmd), &output);
    rec.config = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    rec.seed = kv.get::<u64>("seed")?;
    if let Some(c) = &args.config {
        rec.input(c);
    }
    let mut ctx = Ctx { args, kv, rec };
    match cmd {
        Command::Simulate { centrality_effect } => simulate(&mut ctx, *centrality_effect)?,
        Command::Ingest => ingest(&mut ctx)?,
        Command::Panel => panel(&mut ctx)?,
        Command::Network => network(&mut ctx)?,
        Command::Centrality { kind, transform } => centrality(&mut ctx, kind.as_deref(), transform.as_deref())?,
        Command::Demand => demand(&mut ctx)?,
        Command::Counterfactual { preset } => counterfactual(&mut ctx, preset)?,
        Command::Dynamics => dynamics(&mut ctx)?,
        Command::Did { spec } => did(&mut ctx, spec)?,
        Command::Aggregate { level } => aggregate(&mut ctx, level.as_deref())?,
    }
    let path = output.join(crate::manifest::MANIFEST_FILE);
    ctx.rec
        .finish()
        .map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn simulate(ctx: &mut Ctx, centrality_effect: Option<f64>) -> Result<()> {
    let cfg = SyntheticEconomyConfig::from_key_values(&synth_subset(&ctx.kv))?;
    let economy = generate_economy(&cfg);
    let mut data = emit_transactions(&economy);
    if let Some(effect) = centrality_effect {
        let planted = CentralityEffectConfig { effect, ..CentralityEffectConfig::default() };
        let tol: f64 = required(&ctx.kv, "eigen_tol")?;
        let max_iter: usize = required(&ctx.kv, "eigen_max_iter")?;
        data.accounting = plant_centrality_effect(&economy, &planted, tol, max_iter)?.accounting;
    }
    ctx.rec.stage("generate");
    ctx.write_with("transactions.csv", |w| write_transactions(w, &data.transactions))?;
    ctx.write_with("firms.csv", |w| write_firms(w, &economy.firms))?;
    ctx.write_with("accounting.csv", |w| write_accounting(w, &data.accounting))?;
    ctx.write_with("links.csv", |w| -> std::io::Result<()> {
        writeln!(w, "supplier,buyer,base_prob,first_degree,second_degree")?;
        for l in &data.truth.links {
            writeln!(
                w,
                "{},{},{},{},{}",
                economy.firms[l.supplier].firm_id,
                economy.firms[l.buyer].firm_id,
                l.base_prob,
                l.first_degree as u8,
                l.second_degree as u8
            )?;
        }
        Ok(())
    })?;
    ctx.write_with("distance.csv", |w| write_distances(w, &economy))?;
    ctx.rec.stage("write");
    Ok(())
}

/// Rayon distance to the conflict area: provinces away times 100 km plus 10
/// km per rayon index.
fn write_distances<W: Write>(w: &mut W, economy: &SyntheticEconomy) -> std::io::Result<()> {
    writeln!(w, "rayon_id,distance")?;
    let c = economy.config.conflict_provinces;
    for p in 0..economy.config.n_provinces {
        for r in 0..economy.config.rayons_per_province {
            let away = if p < c { 0 } else { p + 1 - c };
            writeln!(w, "{},{}", netshock::synth::rayon_id(p, r), away * 100 + r * 10)?;
        }
    }
    Ok(())
}

impl From<std::io::Error> for CliError {
    fn from(source: std::io::Error) -> Self {
        CliError::Write { path: "output".into(), source }
    }
}

fn ingest(ctx: &mut Ctx) -> Result<()> {
    let regions = ctx.regions()?;
    let load = ctx.transactions(&regions)?;
    let accounting_path = ctx.input("accounting.csv")?;
    let (accounting, skipped_accounting) = load_accounting(&accounting_path, ctx.strict()?)?;
    let unresolved = regions.unresolved(accounting.iter().map(|a| a.firm_id.as_str()));
    if !unresolved.is_empty() {
        return Err(IngestError::UnresolvedFirms(unresolved).into());
    }
    ctx.rec.stage("load");
    let firms: Vec<_> = regions.firms().cloned().collect();
    ctx.write_with("transactions.csv", |w| write_transactions(w, &load.records))?;
    ctx.write_with("firms.csv", |w| write_firms(w, &firms))?;
    ctx.write_with("accounting.csv", |w| write_accounting(w, &accounting))?;
    ctx.write_with("ingest_summary.csv", |w| -> std::io::Result<()> {
        writeln!(w, "item,count")?;
        writeln!(w, "transactions_kept,{}", load.records.len())?;
        writeln!(w, "skipped_malformed,{}", load.skipped_malformed)?;
        writeln!(w, "excluded_conflict_internal,{}", load.excluded_conflict_internal)?;
        writeln!(w, "excluded_out_of_window,{}", load.excluded_out_of_window)?;
        writeln!(w, "excluded_international,{}", load.excluded_international)?;
        writeln!(w, "excluded_zero_weight,{}", load.excluded_zero_weight)?;
        writeln!(w, "firms,{}", firms.len())?;
        writeln!(w, "accounting_rows,{}", accounting.len())?;
        writeln!(w, "accounting_skipped_malformed,{}", skipped_accounting)?;
        Ok(())
    })?;
    ctx.rec.stage("write");
    Ok(())
}

fn trade_panel(ctx: &mut Ctx) -> Result<TradePanel> {
    let regions = ctx.regions()?;
    let load = ctx.transactions(&regions)?;
    let window = ctx.window()?;
    let preconflict_end: YearMonth = required(&ctx.kv, "preconflict_end")?;
    let panel = build_trade_panel(&load.records, &regions, &window)?;
    Ok(assign_treatment_flags(panel, &TreatmentConfig { preconflict_end }))
}

fn panel(ctx: &mut Ctx) -> Result<()> {
    let panel = trade_panel(ctx)?;
    ctx.rec.stage("build");
    let est = panel.establishments();
    ctx.write_with("panel.csv", |w| -> std::io::Result<()> {
        writeln!(w, "origin_firm,origin_rayon,dest_firm,dest_rayon,month,n_shipments,weight_kg")?;
        for (p, pair) in panel.pairs().iter().enumerate() {
            let (o, d) = (&est[pair.origin], &est[pair.dest]);
            for (m, cell) in panel.cells_of(p).iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    o.firm_id, o.rayon_id, d.firm_id, d.rayon_id, panel.months()[m], cell.n_shipments, cell.total_weight_kg
                )?;
            }
        }
        Ok(())
    })?;
    ctx.write_with("pairs.csv", |w| -> std::io::Result<()> {
        writeln!(
            w,
            "origin_firm,origin_rayon,dest_firm,dest_rayon,origin_province,dest_province,first_trade,both_conflict,\
             conflict,partner_conflict,buyer_conflict,supplier_conflict,partner_buyer_conflict,partner_supplier_conflict,\
             firm_partner_conflict,origin_partners_pre,dest_partners_pre"
        )?;
        let b = |v: bool| v as u8;
        for pair in panel.pairs() {
            let (o, d) = (&est[pair.origin], &est[pair.dest]);
            let f = &pair.flags;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                o.firm_id,
                o.rayon_id,
                d.firm_id,
                d.rayon_id,
                panel.provinces()[pair.origin_province],
                panel.provinces()[pair.dest_province],
                pair.first_trade,
                b(pair.both_conflict),
                b(f.conflict),
                b(f.partner_conflict),
                b(f.buyer_conflict),
                b(f.supplier_conflict),
                b(f.partner_buyer_conflict),
                b(f.partner_supplier_conflict),
                b(pair.firm_flags.partner_conflict),
                pair.origin_partners_pre,
                pair.dest_partners_pre
            )?;
        }
        Ok(())
    })?;
    ctx.rec.stage("write");
    Ok(())
}

fn network(ctx: &mut Ctx) -> Result<()> {
    let regions = ctx.regions()?;
    let load = ctx.transactions(&regions)?;
    let years = ctx.window()?.years();
    let flows = ctx.yearly_flows(&load, &regions, &years)?;
    let firms: std::sync::Arc<Vec<String>> = std::sync::Arc::new(regions.firms().map(|f| f.firm_id.clone()).collect());
    ctx.rec.stage("build");
    for (year, edges) in &flows {
        ctx.write_with(&format!("flows_{year}.csv"), |w| write_edge_list(w, edges))?;
        let io = build_io_matrix(edges, firms.clone(), *year);
        ctx.write_with(&format!("io_{year}.csv"), |w| write_io_triplets(w, &io))?;
    }
    ctx.rec.stage("write");
    Ok(())
}

fn parse_kind(raw: &str) -> Result<CentralityKind> {
    CentralityKind::parse(raw).ok_or_else(|| CliError::Usage(format!("unknown centrality kind `{raw}`")))
}

fn parse_transform(raw: Option<&str>, kind: CentralityKind) -> Result<Transform> {
    match raw {
        None if kind == CentralityKind::Betweenness => Ok(Transform::Log1p),
        None | Some("identity") => Ok(Transform::Identity),
        Some("log1p") => Ok(Transform::Log1p),
        Some(other) => Err(CliError::Usage(format!("unknown transform `{other}`"))),
    }
}

/// Base-year graph over every registered firm.
fn base_graph(ctx: &mut Ctx, regions: &RegionIndex) -> Result<(TradeGraph, Vec<FlowEdge>)> {
    let load = ctx.transactions(regions)?;
    let year = ctx.year("pre_year")?;
    let flows = build_yearly_flows(&load.records, regions, year)?;
    let graph = TradeGraph::from_flows(regions.firms().map(|f| f.firm_id.as_str()), &flows);
    Ok((graph, flows))
}

fn conflict_nodes(graph: &TradeGraph, regions: &RegionIndex) -> Vec<usize> {
    (0..graph.n_nodes()).filter(|&i| regions.is_conflict_firm(&graph.nodes()[i])).collect()
}

fn centrality(ctx: &mut Ctx, kind: Option<&str>, transform: Option<&str>) -> Result<()> {
    let kind = parse_kind(kind.unwrap_or(ctx.kv.get_str("centrality").unwrap_or("eigenvector")))?;
    let transform = parse_transform(transform, kind)?;
    let regions = ctx.regions()?;
    let (graph, _) = base_graph(ctx, &regions)?;
    let conflict = conflict_nodes(&graph, &regions);
    let tol: f64 = required(&ctx.kv, "eigen_tol")?;
    let max_iter: usize = required(&ctx.kv, "eigen_max_iter")?;
    ctx.rec.stage("load");
    let change = predicted_centrality_change(&graph, &conflict, kind, transform, None, tol, max_iter)?;
    ctx.rec.stage("compute");
    ctx.write_with("centrality.csv", |w| write_centrality_csv(w, &graph, &change))?;
    ctx.rec.stage("write");
    Ok(())
}

fn demand(ctx: &mut Ctx) -> Result<()> {
    let years = [ctx.year("pre_year")?, ctx.year("post_year")?];
    let bundle = ctx.bundle(&years)?;
    let economy = ctx.economy()?;
    for year in years {
        let xi = bundle.demand(year, &economy)?;
        ctx.write_with(&format!("demand_{year}.csv"), |w| write_vector(w, bundle.firms(), &xi.values))?;
        let revenues = bundle.revenues(year)?;
        ctx.write_with(&format!("revenues_{year}.csv"), |w| write_vector(w, bundle.firms(), revenues))?;
    }
    ctx.rec.stage("compute");
    Ok(())
}

fn counterfactual(ctx: &mut Ctx, preset_name: &str) -> Result<()> {
    let (pre, post) = (ctx.year("pre_year")?, ctx.year("post_year")?);
    let kinds: Vec<ScenarioKind> = if preset_name == "all" {
        ScenarioKind::ALL.to_vec()
    } else {
        let k = ScenarioKind::parse(preset_name)?;
        if k == ScenarioKind::Baseline {
            vec![k]
        } else {
            vec![ScenarioKind::Baseline, k]
        }
    };
    let bundle = ctx.bundle(&[pre, post])?;
    let config = ScenarioConfig {
        economy: ctx.economy()?,
        renormalize: ctx.kv.get_bool("renormalize")?.unwrap_or(false),
    };
    let scenarios: Vec<Scenario> = kinds.iter().map(|&k| Scenario::preset(k, pre, post)).collect();
    let report = run_all(&scenarios, &bundle, &config)?;
    ctx.rec.stage("solve");
    ctx.write_with("scenario_report.csv", |w| write_scenario_report(w, &report))?;
    for r in &report.results {
        let name = format!("revenues_{}.csv", r.scenario.kind.name());
        ctx.write_with(&name, |w| write_vector(w, bundle.firms(), &r.revenues.values))?;
    }
    ctx.rec.stage("write");
    Ok(())
}

fn dynamics(ctx: &mut Ctx) -> Result<()> {
    let years = parse_years(&ctx.kv, "years")?;
    let base = ctx.year("pre_year")?;
    let mut all = years.clone();
    if !all.contains(&base) {
        all.insert(0, base);
    }
    let bundle = ctx.bundle(&all)?;
    let path = run_dynamics(&bundle, base, &years, &ctx.economy()?)?;
    ctx.rec.stage("solve");
    ctx.write_with("dynamics.csv", |w| write_dynamics_report(w, &path))?;
    ctx.rec.stage("write");
    Ok(())
}

fn load_spec(ctx: &mut Ctx, spec: &str) -> Result<(KeyValues, Option<PathBuf>)> {
    if let Some(kv) = preset(spec) {
        return Ok((kv, None));
    }
    let path = PathBuf::from(spec);
    if !path.is_file() {
        let names: Vec<&str> = netshock::econometrics::PRESETS.iter().map(|(n, _)| *n).collect();
        return Err(CliError::Usage(format!("`{spec}` is neither a preset ({}) nor a spec file", names.join(", "))));
    }
    ctx.rec.input(&path);
    Ok((KeyValues::load(&path)?, path.parent().map(Path::to_path_buf)))
}

fn read_distances(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let header: Vec<String> = rdr.headers().map_err(IngestError::from)?.iter().map(str::to_string).collect();
    if header != ["rayon_id", "distance"] {
        return Err(IngestError::Header { expected: "rayon_id,distance".into(), found: header.join(",") }.into());
    }
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(IngestError::from)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let d: f64 = row[1].parse().map_err(|_| IngestError::Field {
            line,
            field: "distance",
            value: row[1].to_string(),
            reason: "expected a number".into(),
        })?;
        out.insert(row[0].to_string(), d);
    }
    Ok(out)
}

fn did(ctx: &mut Ctx, spec_arg: &str) -> Result<()> {
    let (mut kv, spec_dir) = load_spec(ctx, spec_arg)?;
    if !kv.contains("post_start") {
        kv.set("post_start", ctx.kv.get_str("post_start").unwrap_or("2014-03"));
    }
    let mut spec = EstimationSpec::from_key_values(&kv)?;
    match spec.model {
        ModelKind::Propagation => {
            if let Some(file) = &spec.distance_file {
                let from_spec = spec_dir.map(|d| d.join(file)).filter(|p| p.is_file());
                let path = match from_spec {
                    Some(p) => {
                        ctx.rec.input(&p);
                        p
                    }
                    None => ctx.input(file)?,
                };
                spec.propagation.distance = Some(read_distances(&path)?);
            }
            let panel = trade_panel(ctx)?;
            ctx.rec.stage("load");
            if spec.event_study {
                let study = event_study_propagation(&panel, &spec.propagation, spec.baseline_quarter)?;
                ctx.rec.stage("estimate");
                ctx.write_with("results.csv", |w| write_event_study(w, &study))?;
            } else {
                let fit = did_propagation(&panel, &spec.propagation)?;
                ctx.rec.stage("estimate");
                ctx.write_with("results.csv", |w| write_results(w, &fit))?;
            }
        }
        ModelKind::Centrality => {
            let c = &spec.centrality;
            let regions = ctx.regions()?;
            let accounting = ctx.accounting(&regions)?;
            let (graph, flows) = base_graph(ctx, &regions)?;
            let conflict = conflict_nodes(&graph, &regions);
            let tol: f64 = required(&ctx.kv, "eigen_tol")?;
            let max_iter: usize = required(&ctx.kv, "eigen_max_iter")?;
            let change = predicted_centrality_change(&graph, &conflict, c.kind, c.transform, None, tol, max_iter)?;
            let firm_panel = FirmPanel::from_records(&accounting, &regions, &flows)?;
            let mut delta: Vec<Option<f64>> =
                firm_panel.firms.iter().map(|f| graph.node_index(f).and_then(|i| change.delta[i])).collect();
            if c.residualize {
                let chars = baseline_characteristics(&firm_panel, &regions, &flows, c.options.base_year)?;
                delta = residualize_centrality(&firm_panel, &delta, &chars)?;
            }
            ctx.rec.stage("load");
            match c.timing {
                Timing::PrePost => {
                    let fit = did_centrality(&firm_panel, &delta, &c.options)?;
                    ctx.rec.stage("estimate");
                    ctx.write_with("results.csv", |w| write_results(w, &fit))?;
                }
                Timing::Yearly | Timing::Joint => {
                    let study = event_study_centrality(&firm_panel, &delta, c.timing == Timing::Joint, &c.options)?;
                    ctx.rec.stage("estimate");
                    ctx.write_with("results.csv", |w| write_event_study(w, &study))?;
                }
            }
        }
    }
    ctx.rec.stage("write");
    Ok(())
}

fn aggregate(ctx: &mut Ctx, level: Option<&str>) -> Result<()> {
    let raw = level.map(str::to_string).unwrap_or_else(|| ctx.kv.get_str("region_level").unwrap_or("province").to_string());
    let level = RegionLevel::parse(&raw).ok_or_else(|| CliError::Usage(format!("unknown region level `{raw}`")))?;
    let regions = ctx.regions()?;
    let load = ctx.transactions(&regions)?;
    let accounting = ctx.accounting(&regions)?;
    let config = RegionConfig {
        level,
        base_year: ctx.year("pre_year")?,
        years: parse_years(&ctx.kv, "years")?,
        economy: ctx.economy()?,
    };
    ctx.rec.stage("load");
    let agg = aggregate_regions(&accounting, &load.records, &regions, &config)?;
    ctx.rec.stage("solve");
    ctx.write_with("region_report.csv", |w| write_region_report(w, &agg))?;
    ctx.rec.stage("write");
    Ok(())
}
