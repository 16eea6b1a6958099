use crate::scenario::{Loaded, Scenario};
use crate::{Cli, Command, ModeArg, OrderArgs};
use adds_core::catalog::{build_instance, write_inventory, write_orders, BinId, Layout, Order, SequencingInstance, TrailingState};
use adds_core::geometry::RackConfig;
use adds_core::sequencing::lp::{build_model, write_lp, LpOptions};
use adds_core::sequencing::{solve, validate_plan, RetrievalPlan, Strategy};
use adds_core::simulator::{
    compare_layouts, compare_strategies, format_sig, is_single_peaked, run_stream, write_results_csv, ResultRow,
    TimingMode,
};
use adds_core::stochastics::SortingModel;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Everything needed to re-check a solved order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanBundle {
    pub scenario_sha256: String,
    pub strategy: Strategy,
    pub rack: RackConfig,
    pub sorting: SortingModel,
    pub instance: SequencingInstance,
    pub plan: RetrievalPlan,
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let mut scenario = match &g.scenario {
        Some(path) => Scenario::from_file(path)?,
        None => Scenario::default(),
    };
    if let Some(seed) = g.seed {
        match cli.command {
            Command::Generate => scenario.dataset_seed = Some(seed),
            _ => scenario.experiment.seed = seed,
        }
    }
    if let Some(mode) = g.mode {
        scenario.experiment.timing_mode = match mode {
            ModeArg::Analytic => TimingMode::Analytic,
            ModeArg::Mc => TimingMode::MonteCarlo,
        };
    }
    if let Some(layout) = g.layout {
        scenario.experiment.layouts = vec![layout.into()];
    }
    if let Some(strategy) = g.strategy {
        scenario.experiment.strategies = vec![strategy];
    }
    if let Some(preset) = &g.preset {
        scenario.rack.preset = Some(preset.clone());
    }
    if let Command::Validate { bundle } = &cli.command {
        return validate(bundle);
    }
    let loaded = scenario.load()?;
    let out = &g.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Generate => generate(&loaded, out),
        Command::Solve(args) => solve_one(&loaded, args, out),
        Command::Simulate => simulate(&loaded, out),
        Command::CompareLayouts => layouts(&loaded, out),
        Command::CompareStrategies => strategies(&loaded, out),
        Command::ExportLp { order, closed_tour } => export_lp(&loaded, order, *closed_tour, out),
        Command::Validate { .. } => unreachable!("handled above"),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_csv(loaded: &Loaded, path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut buf = loaded.header_line().into_bytes();
    write_results_csv(&mut buf, rows)?;
    write_file(path, &buf)
}

fn summary(loaded: &Loaded, title: &str, body: &str) -> Result<String> {
    let mut s = format!("<!-- scenario-sha256: {} -->\n# {title}\n\n", loaded.hash);
    let _ = writeln!(s, "Scenario hash: `{}`\n", loaded.hash);
    let _ = writeln!(
        s,
        "Dataset: {} orders, {} bins.\n",
        loaded.orders.len(),
        loaded.inventory.len()
    );
    s.push_str(body);
    s.push_str("\n## Dominance chain\n\n");
    let (mu, sigma) = loaded.scenario.experiment.grid()[0];
    let check = dominance_chain(loaded, mu, sigma, 50)?;
    let _ = writeln!(
        s,
        "Per-order check of optimal <= dp <= greedy and dp <= random (10 seeds) at mu = {mu}, sigma = {sigma}, \
         each order solved from free I/O points: {} instances, {} violations: **{}**.",
        check.instances,
        check.violations.len(),
        if check.violations.is_empty() { "PASS" } else { "FAIL" }
    );
    for v in &check.violations {
        let _ = writeln!(s, "- {v}");
    }
    let _ = writeln!(s, "\n## Configuration\n\n```toml\n{}```", loaded.canonical);
    Ok(s)
}

pub struct Dominance {
    pub instances: usize,
    pub violations: Vec<String>,
}

/// Solves the first `limit` orders from free I/O points with every strategy
/// and lists every break of the expected ordering.
pub fn dominance_chain(loaded: &Loaded, mu: f64, sigma: f64, limit: usize) -> Result<Dominance> {
    let sorting = SortingModel::new(mu, sigma)?;
    let seed = loaded.scenario.experiment.seed;
    let mut instances = 0;
    let mut violations = Vec::new();
    for layout in [Layout::A, Layout::B] {
        let rack = loaded.rack_for(layout);
        for order in loaded.orders.iter().take(limit) {
            let Ok(inst) = build_instance(order, &loaded.inventory, &TrailingState::empty(layout), layout) else {
                continue;
            };
            instances += 1;
            let value = |s: Strategy, seed: u64| solve(s, &inst, &rack, &sorting, seed).map(|p| p.objective);
            let opt = value(Strategy::Optimal, seed)?;
            let dp = value(Strategy::Dp, seed)?;
            let greedy = value(Strategy::Greedy, seed)?;
            let tol = 1e-9 * (1.0 + opt.abs());
            if opt > dp + tol || dp > greedy + tol {
                violations.push(format!(
                    "layout {layout}, order {}: optimal {opt}, dp {dp}, greedy {greedy}",
                    order.id
                ));
            }
            for r in 0..10 {
                let random = value(Strategy::Random, seed + r)?;
                if dp > random + tol {
                    violations.push(format!("layout {layout}, order {}: dp {dp} > random {random}", order.id));
                }
            }
        }
    }
    Ok(Dominance { instances, violations })
}

fn generate(loaded: &Loaded, out: &Path) -> Result<()> {
    let header = loaded.header_line();
    let mut inv = header.clone().into_bytes();
    write_inventory(&mut inv, &loaded.inventory)?;
    write_file(&out.join("inventory.csv"), &inv)?;
    let mut orders = header.into_bytes();
    write_orders(&mut orders, &loaded.orders)?;
    write_file(&out.join("orders.csv"), &orders)?;
    let lines: usize = loaded.orders.iter().map(|o| o.lines.len()).sum();
    let body = format!(
        "Generated {} orders with {lines} lines and {} bins holding {} units.\n",
        loaded.orders.len(),
        loaded.inventory.len(),
        loaded.inventory.total_stock()
    );
    write_file(&out.join("summary.md"), summary(loaded, "Generated dataset", &body)?.as_bytes())
}

fn pick_order(loaded: &Loaded, id: Option<u32>) -> Result<&Order> {
    match id {
        Some(id) => loaded
            .orders
            .iter()
            .find(|o| o.id.0 == id)
            .with_context(|| format!("no order with id {id}")),
        None => loaded.orders.first().context("the order stream is empty"),
    }
}

fn parse_trailing(spec: Option<&str>, layout: Layout) -> Result<TrailingState> {
    let Some(spec) = spec else {
        return Ok(TrailingState::empty(layout));
    };
    let bins = spec
        .split(',')
        .map(|s| match s.trim() {
            "-" | "" => Ok(None),
            id => id
                .parse::<u32>()
                .map(|id| Some(BinId(id)))
                .map_err(|_| anyhow::anyhow!("bad trailing bin `{id}`")),
        })
        .collect::<Result<Vec<_>>>()?;
    if bins.len() != layout.io_count() {
        bail!("layout {layout} needs {} trailing entries, got {}", layout.io_count(), bins.len());
    }
    Ok(TrailingState::from_bins(&bins))
}

struct OrderSetup {
    layout: Layout,
    rack: RackConfig,
    sorting: SortingModel,
    instance: SequencingInstance,
}

fn order_setup(loaded: &Loaded, args: &OrderArgs) -> Result<OrderSetup> {
    let exp = &loaded.scenario.experiment;
    let layout = exp.layouts[0];
    let sorting = SortingModel::new(args.mu.unwrap_or(exp.mu[0]), args.sigma.unwrap_or(exp.sigma[0]))?;
    let order = pick_order(loaded, args.order)?;
    let trailing = parse_trailing(args.trailing.as_deref(), layout)?;
    let instance = build_instance(order, &loaded.inventory, &trailing, layout)?;
    Ok(OrderSetup {
        layout,
        rack: loaded.rack_for(layout),
        sorting,
        instance,
    })
}

fn opt_bin(b: Option<BinId>) -> String {
    b.map_or("-".into(), |b| b.to_string())
}

fn solve_one(loaded: &Loaded, args: &OrderArgs, out: &Path) -> Result<()> {
    let setup = order_setup(loaded, args)?;
    let strategy = loaded.scenario.experiment.strategies[0];
    let plan = solve(strategy, &setup.instance, &setup.rack, &setup.sorting, loaded.scenario.experiment.seed)?;
    println!(
        "order {} layout {} strategy {} mu {} sigma {}",
        setup.instance.order.id, setup.layout, strategy, setup.sorting.mu, setup.sorting.sigma
    );
    println!("cycle,io_point,return_bin,retrieve_bin,drug,travel_time,expected_time");
    for (c, cycle) in plan.cycles.iter().enumerate() {
        println!(
            "{},{},{},{},{},{},{}",
            c + 1,
            cycle.io_point + 1,
            opt_bin(cycle.return_bin),
            opt_bin(cycle.retrieve_bin),
            cycle.drug.map_or("-".into(), |d| d.to_string()),
            format_sig(cycle.travel_time),
            format_sig(cycle.expected_time)
        );
    }
    if !plan.sorted_in_place.is_empty() {
        let drugs: Vec<_> = plan.sorted_in_place.iter().map(|d| d.to_string()).collect();
        println!("sorted in place: {}", drugs.join(" "));
    }
    println!("objective {}", plan.objective);
    let bundle = PlanBundle {
        scenario_sha256: loaded.hash.clone(),
        strategy,
        rack: setup.rack,
        sorting: setup.sorting,
        instance: setup.instance,
        plan,
    };
    let path = out.join(format!("plan-{}-{}.json", bundle.instance.order.id, setup.layout));
    write_file(&path, serde_json::to_string_pretty(&bundle)?.as_bytes())
}

fn validate(path: &PathBuf) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bundle: PlanBundle = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate_plan(&bundle.plan, &bundle.instance, &bundle.rack, &bundle.sorting);
    if !report.is_valid() {
        let all: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        bail!("validation: {} violation(s): {}", all.len(), all.join("; "));
    }
    println!(
        "valid: order {}, {} cycles, objective {}",
        bundle.instance.order.id,
        bundle.plan.cycles.len(),
        bundle.plan.objective
    );
    Ok(())
}

fn simulate(loaded: &Loaded, out: &Path) -> Result<()> {
    let exp = &loaded.scenario.experiment;
    let (layout, strategy) = (exp.layouts[0], exp.strategies[0]);
    let rack = loaded.rack_for(layout);
    let mut rows = Vec::new();
    let mut per_order = format!("{}mu,sigma,order_id,time,cycles,sorted_in_place\n", loaded.header_line());
    let mut table = String::from("| mu | sigma | mean time [s] | cycles/order | std. error | infeasible |\n|---|---|---|---|---|---|\n");
    for (mu, sigma) in exp.grid() {
        let report = run_stream(&loaded.orders, &loaded.inventory, &rack, &exp.stream_config(layout, strategy, mu, sigma)?)?;
        let (Some(mean), Some(cycles)) = (report.mean_time, report.mean_cycles_per_order) else {
            bail!("no order could be timed at mu = {mu}, sigma = {sigma}");
        };
        rows.push(ResultRow {
            mu,
            sigma,
            layout,
            strategy,
            mean_time: mean,
            mean_cycles: cycles,
            improvement: None,
        });
        for rec in &report.orders {
            let _ = writeln!(
                per_order,
                "{},{},{},{},{},{}",
                format_sig(mu),
                format_sig(sigma),
                rec.order,
                format_sig(rec.time),
                rec.cycles,
                rec.sorted_in_place
            );
        }
        let _ = writeln!(
            table,
            "| {mu} | {sigma} | {} | {} | {} | {} |",
            format_sig(mean),
            format_sig(cycles),
            report.standard_error().map_or("-".into(), format_sig),
            report.infeasible_orders.len()
        );
    }
    write_csv(loaded, &out.join("results.csv"), &rows)?;
    write_file(&out.join("per_order.csv"), per_order.as_bytes())?;
    let body = format!("Layout {layout}, strategy {strategy}.\n\n{table}");
    write_file(&out.join("summary.md"), summary(loaded, "Stream simulation", &body)?.as_bytes())
}

fn layouts(loaded: &Loaded, out: &Path) -> Result<()> {
    let exp = &loaded.scenario.experiment;
    let strategy = exp.strategies[0];
    let template = exp.stream_config(Layout::A, strategy, exp.mu[0], exp.sigma[0])?;
    let table = compare_layouts(&loaded.orders, &loaded.inventory, &loaded.rack, &exp.grid(), &template)?;
    write_csv(loaded, &out.join("results.csv"), &table.result_rows())?;

    let mut body = format!(
        "Strategy {strategy}. Improvement is (1/T_A - 1/T_B) / (1/T_B).\n\n| (mu, sigma) | T_A [s] | T_B [s] | improvement |\n|---|---|---|---|\n"
    );
    for r in &table.rows {
        let _ = writeln!(
            body,
            "| ({}, {}) | {:.2} | {:.2} | {:.2}% |",
            r.mu,
            r.sigma,
            r.t_a,
            r.t_b,
            100.0 * r.improvement
        );
    }
    let faster = table.rows.iter().filter(|r| r.t_a < r.t_b).count();
    let _ = writeln!(body, "\nT_A < T_B at {faster} of {} grid points.\n", table.rows.len());
    if exp.mu.len() >= 3 {
        for &sigma in &exp.sigma {
            let series: Vec<f64> = table.improvement_series(sigma).iter().map(|p| p.1).collect();
            let _ = writeln!(
                body,
                "- sigma = {sigma}: improvement over mu is {}single-peaked",
                if is_single_peaked(&series) { "" } else { "not " }
            );
        }
    }
    write_file(&out.join("summary.md"), summary(loaded, "Layout comparison", &body)?.as_bytes())
}

fn strategies(loaded: &Loaded, out: &Path) -> Result<()> {
    let exp = &loaded.scenario.experiment;
    let seeds: Vec<u64> = (0..exp.random_seeds).map(|i| exp.seed + i).collect();
    let mut rows = Vec::new();
    let mut body = format!(
        "Random strategy averaged over {} seeds; intervals are 95% normal intervals over seeds.\n\n\
         | layout | (mu, sigma) | optimal | dp | greedy | random | chain |\n|---|---|---|---|---|---|---|\n",
        seeds.len()
    );
    for &layout in &exp.layouts {
        let template = exp.stream_config(layout, Strategy::Optimal, exp.mu[0], exp.sigma[0])?;
        let table = compare_strategies(
            &loaded.orders,
            &loaded.inventory,
            &loaded.rack_for(layout),
            &exp.grid(),
            &template,
            &seeds,
        )?;
        for point in table.chunks(Strategy::ALL.len()) {
            let t: Vec<f64> = point.iter().map(|r| r.mean_time).collect();
            let ci = point[3].ci95.map_or(String::new(), |c| format!(" ± {}", format_sig(c)));
            let ok = t[0] <= t[1] + 1e-9 && t[1] <= t[2] + 1e-9 && t[1] <= t[3] + 1e-9 && t[2] <= t[3];
            let _ = writeln!(
                body,
                "| {layout} | ({}, {}) | {} | {} | {} | {}{ci} | {} |",
                point[0].mu,
                point[0].sigma,
                format_sig(t[0]),
                format_sig(t[1]),
                format_sig(t[2]),
                format_sig(t[3]),
                if ok { "ok" } else { "broken" }
            );
            for r in point.iter().filter(|r| exp.strategies.contains(&r.strategy)) {
                rows.push(ResultRow {
                    mu: r.mu,
                    sigma: r.sigma,
                    layout,
                    strategy: r.strategy,
                    mean_time: r.mean_time,
                    mean_cycles: r.mean_cycles,
                    improvement: None,
                });
            }
        }
    }
    write_csv(loaded, &out.join("results.csv"), &rows)?;
    write_file(&out.join("summary.md"), summary(loaded, "Strategy comparison", &body)?.as_bytes())
}

fn export_lp(loaded: &Loaded, args: &OrderArgs, closed_tour: bool, out: &Path) -> Result<()> {
    let setup = order_setup(loaded, args)?;
    let opts = LpOptions {
        closed_tour,
        ..LpOptions::default()
    };
    let mut model = build_model(&setup.instance, &setup.rack, &setup.sorting, &opts)?;
    model.comments.insert(0, format!("scenario-sha256: {}", loaded.hash));
    let path = out.join(format!("order-{}-{}.lp", setup.instance.order.id, setup.layout));
    write_file(&path, write_lp(&model).as_bytes())
}
