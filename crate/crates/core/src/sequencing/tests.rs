use super::lp::{build_model, parse_lp, write_lp, LpOptions};
use super::*;
use crate::catalog::{build_instance, Bin, Inventory, Order, OrderLine, TrailingState};
use crate::geometry::{dual_command_time, GridPosition};
use crate::stochastics::expected_max;
use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
use rand::seq::SliceRandom;

fn rack_for(layout: Layout) -> RackConfig {
    match layout {
        Layout::A => RackConfig::paper_preset(),
        Layout::B => RackConfig::paper_preset().single_io(),
    }
}

fn bin(id: u32, row: u32, col: u32, drug: u32, stock: u32) -> Bin {
    Bin {
        id: BinId(id),
        position: GridPosition::new(1, row, col),
        drug: DrugId(drug),
        stock,
    }
}

fn order(lines: &[(u32, u32)]) -> Order {
    Order::new(
        OrderId(7),
        0,
        lines
            .iter()
            .map(|&(d, q)| OrderLine {
                drug: DrugId(d),
                dosage: q,
            })
            .collect(),
    )
    .unwrap()
}

fn instance(bins: Vec<Bin>, lines: &[(u32, u32)], trailing: &[Option<u32>], layout: Layout) -> SequencingInstance {
    let inv = Inventory::new(bins).unwrap();
    let ids: Vec<_> = trailing.iter().map(|b| b.map(BinId)).collect();
    build_instance(&order(lines), &inv, &TrailingState::from_bins(&ids), layout).unwrap()
}

/// Random instance on the `paper-5` rack: `k` lines, up to `max_cands` bins per
/// drug, and (optionally) occupied trailing slots, some holding an ordered
/// drug.
fn random_instance(seed: u64, layout: Layout, k: usize, max_cands: usize, trailing: bool) -> SequencingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rack = rack_for(layout);
    let mut cells: Vec<(u32, u32)> = (1..=rack.rows)
        .flat_map(|r| (1..=rack.cols).map(move |c| (r, c)))
        .filter(|&(r, c)| !rack.io_points.iter().any(|p| p.row == r && p.col == c))
        .collect();
    cells.shuffle(&mut rng);
    let mut cells = cells.into_iter();
    let mut bins = Vec::new();
    let mut next_id = 1;
    let mut push = |drug: u32, stock: u32, bins: &mut Vec<Bin>| {
        let (r, c) = cells.next().unwrap();
        bins.push(bin(next_id, r, c, drug, stock));
        next_id += 1;
        next_id - 1
    };
    let mut lines = Vec::new();
    for d in 1..=k as u32 {
        let dosage = rng.random_range(1..=8);
        lines.push((d, dosage));
        push(d, 20, &mut bins);
        for _ in 1..rng.random_range(1..=max_cands) {
            let stock = rng.random_range(1..=20);
            push(d, stock, &mut bins);
        }
    }
    let w = layout.io_count();
    let mut slots = vec![None; w];
    if trailing {
        for slot in slots.iter_mut() {
            if rng.random_bool(0.7) {
                let drug = if rng.random_bool(0.3) {
                    rng.random_range(1..=k as u32)
                } else {
                    100 + bins.len() as u32
                };
                *slot = Some(push(drug, 20, &mut bins));
            }
        }
    }
    instance(bins, &lines, &slots, layout)
}

fn sorting(mu: f64, sigma: f64) -> SortingModel {
    SortingModel::new(mu, sigma).unwrap()
}

fn cycle_price(layout: Layout, s: &SortingModel, t: f64) -> f64 {
    match layout {
        Layout::A => expected_max(s, t).unwrap(),
        Layout::B => t + s.mu,
    }
}

#[test]
fn two_singleton_lines_by_hand() {
    // bins at (3,4) and (15,12); every leg is governed by its row distance.
    // Two points: one single-command trip each, 2 * (7 + 5) rows.
    // One point: fetch (15,12) first (2 * 5 rows), then return it and fetch
    // (3,4): 5 + 12 + 7 rows.
    let bins = vec![bin(1, 3, 4, 1, 10), bin(2, 15, 12, 2, 10)];
    for layout in [Layout::A, Layout::B] {
        let rows = match layout {
            Layout::A => 24.0,
            Layout::B => 34.0,
        };
        let travel = rows * 0.275 / 0.1486;
        let inst = instance(bins.clone(), &[(1, 2), (2, 2)], &vec![None; layout.io_count()], layout);
        let plan = solve_optimal(&inst, &rack_for(layout), &sorting(10.0, 0.0)).unwrap();
        let expected = match layout {
            Layout::A => travel,
            Layout::B => travel + 20.0,
        };
        assert!((plan.objective - expected).abs() < 1e-9, "{layout}: {}", plan.objective);
        assert!((plan.total_travel() - travel).abs() < 1e-9);
        assert_eq!(plan.cycles.len(), 2);
        assert_eq!(plan.cycles[0].return_bin, None);
    }
}

#[test]
fn two_io_alternation_and_new_trailing() {
    let inst = instance(
        vec![bin(1, 3, 4, 1, 10), bin(2, 15, 12, 2, 10), bin(3, 5, 5, 3, 10), bin(4, 8, 1, 9, 10)],
        &[(1, 1), (2, 1), (3, 1)],
        &[Some(4), None],
        Layout::A,
    );
    let rack = rack_for(Layout::A);
    let plan = solve_optimal(&inst, &rack, &sorting(20.0, 5.0)).unwrap();
    let ios: Vec<_> = plan.cycles.iter().map(|c| c.io_point).collect();
    assert_eq!(ios, vec![0, 1, 0]);
    assert_eq!(plan.cycles[0].return_bin, Some(BinId(4)));
    assert_eq!(plan.cycles[1].return_bin, None);
    assert_eq!(plan.cycles[2].return_bin, plan.cycles[0].retrieve_bin);
    // after three cycles the oldest waiting bin is the one at I/O point 1
    assert_eq!(plan.new_trailing.slots[0].io, 1);
    assert_eq!(plan.new_trailing.slots[0].bin, plan.cycles[1].retrieve_bin);
    assert_eq!(plan.new_trailing.slots[1].bin, plan.cycles[2].retrieve_bin);
    assert!(validate_plan(&plan, &inst, &rack, &sorting(20.0, 5.0)).is_valid());
}

#[test]
fn overlap_removes_a_cycle() {
    let inst = instance(
        vec![
            bin(1, 3, 4, 1, 10),
            bin(2, 15, 12, 2, 10),
            bin(3, 5, 5, 3, 10),
            bin(4, 8, 1, 1, 10),
        ],
        &[(1, 4), (2, 1), (3, 1)],
        &[Some(4), None],
        Layout::A,
    );
    let rack = rack_for(Layout::A);
    let s = sorting(15.0, 3.0);
    for strategy in Strategy::ALL {
        let plan = solve(strategy, &inst, &rack, &s, 1).unwrap();
        assert_eq!(plan.cycles.len(), 2, "{strategy}");
        assert_eq!(plan.sorted_in_place, vec![DrugId(1)]);
        // the trailing bin is still returned by the first cycle
        assert_eq!(plan.cycles[0].return_bin, Some(BinId(4)));
        assert!(validate_plan(&plan, &inst, &rack, &s).is_valid());
    }
}

#[test]
fn fully_overlapped_order_has_no_cycles() {
    let inst = instance(
        vec![bin(1, 3, 4, 1, 10), bin(2, 15, 12, 2, 10)],
        &[(1, 1), (2, 1)],
        &[Some(1), Some(2)],
        Layout::A,
    );
    let plan = solve_optimal(&inst, &rack_for(Layout::A), &sorting(15.0, 3.0)).unwrap();
    assert!(plan.cycles.is_empty());
    assert_eq!(plan.objective, 0.0);
    assert_eq!(plan.new_trailing, inst.trailing);
}

/// Prices a fixed pick sequence straight from the geometry.
fn price_sequence(inst: &SequencingInstance, rack: &RackConfig, s: &SortingModel, seq: &[&Bin]) -> f64 {
    let w = inst.layout.io_count();
    let mut waiting: Vec<GridPosition> = inst
        .trailing
        .slots
        .iter()
        .zip(&inst.trailing_bins)
        .map(|(slot, b)| b.as_ref().map_or(rack.io_point(slot.io), |b| b.position))
        .collect();
    let mut total = 0.0;
    for (c, b) in seq.iter().enumerate() {
        let slot = c % w;
        let o = rack.io_point(inst.trailing.slots[slot].io);
        let t = dual_command_time(&o, &waiting[slot], &b.position, rack).unwrap();
        total += cycle_price(inst.layout, s, t);
        waiting[slot] = b.position;
    }
    total
}

#[test]
fn dp_matches_enumeration_of_bin_choices() {
    let s = sorting(12.0, 4.0);
    for seed in 0..20 {
        for layout in [Layout::A, Layout::B] {
            let inst = random_instance(seed, layout, 3, 2, seed % 2 == 0);
            let rack = rack_for(layout);
            let routed: Vec<&[Bin]> = inst
                .lines
                .iter()
                .filter(|l| l.is_routed())
                .map(|l| l.candidates())
                .collect();
            let mut best = f64::INFINITY;
            let mut choice = vec![0usize; routed.len()];
            'outer: loop {
                let seq: Vec<&Bin> = routed.iter().zip(&choice).map(|(g, &i)| &g[i]).collect();
                best = best.min(price_sequence(&inst, &rack, &s, &seq));
                for (i, c) in choice.iter_mut().enumerate() {
                    *c += 1;
                    if *c < routed[i].len() {
                        continue 'outer;
                    }
                    *c = 0;
                }
                break;
            }
            let plan = solve_dp(&inst, &rack, &s).unwrap();
            assert!((plan.objective - best).abs() < 1e-9, "seed {seed} {layout}");
        }
    }
}

#[test]
fn greedy_takes_the_nearer_bin() {
    // drug 1 is stocked far away (bin 1) and next to the I/O point (bin 2)
    let inst = instance(
        vec![bin(1, 1, 17, 1, 10), bin(2, 10, 8, 1, 10), bin(3, 4, 4, 2, 10)],
        &[(1, 1), (2, 1)],
        &[None],
        Layout::B,
    );
    let plan = solve_greedy(&inst, &rack_for(Layout::B), &sorting(10.0, 2.0)).unwrap();
    assert_eq!(plan.cycles[0].retrieve_bin, Some(BinId(2)));
}

#[test]
fn greedy_breaks_expected_time_ties_by_travel() {
    // both trips are shorter than a deterministic 100 s sort
    let inst = instance(
        vec![bin(1, 1, 17, 1, 10), bin(2, 10, 8, 1, 10), bin(3, 4, 4, 2, 10)],
        &[(1, 1), (2, 1)],
        &[None, None],
        Layout::A,
    );
    let plan = solve_greedy(&inst, &rack_for(Layout::A), &sorting(100.0, 0.0)).unwrap();
    assert_eq!(plan.cycles[0].retrieve_bin, Some(BinId(2)));
}

#[test]
fn singleton_candidates_make_baselines_agree() {
    for seed in 0..10 {
        for layout in [Layout::A, Layout::B] {
            let inst = random_instance(seed, layout, 5, 1, true);
            let rack = rack_for(layout);
            let s = sorting(20.0, 6.0);
            let dp = solve_dp(&inst, &rack, &s).unwrap();
            let greedy = solve_greedy(&inst, &rack, &s).unwrap();
            let random = solve_random(&inst, &rack, &s, seed).unwrap();
            assert_eq!(dp.cycles, greedy.cycles);
            assert_eq!(dp.cycles, random.cycles);
            let opt = solve_optimal(&inst, &rack, &s).unwrap();
            assert!(opt.objective <= dp.objective + 1e-9);
        }
    }
}

#[test]
fn random_is_reproducible() {
    let inst = random_instance(3, Layout::A, 6, 3, true);
    let rack = rack_for(Layout::A);
    let s = sorting(20.0, 6.0);
    let a = solve_random(&inst, &rack, &s, 99).unwrap();
    let b = solve_random(&inst, &rack, &s, 99).unwrap();
    assert_eq!(a, b);
    let differs = (0..20).any(|seed| solve_random(&inst, &rack, &s, seed).unwrap().cycles != a.cycles);
    assert!(differs);
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.label().parse::<Strategy>().unwrap(), s);
    }
    assert!("fifo".parse::<Strategy>().is_err());
}

#[test]
fn layout_mismatch_is_reported() {
    let inst = random_instance(1, Layout::A, 3, 2, false);
    let err = solve_optimal(&inst, &rack_for(Layout::B), &sorting(10.0, 1.0)).unwrap_err();
    assert!(matches!(err, SequencingError::LayoutMismatch { io_points: 1, .. }));
}

#[test]
fn oracle_cap_is_enforced() {
    let inst = random_instance(1, Layout::A, 8, 3, false);
    let err = brute_force_oracle(&inst, &rack_for(Layout::A), &sorting(10.0, 1.0), 1000).unwrap_err();
    assert!(matches!(err, SequencingError::TooLarge(_)));
}

mod validator {
    use super::*;

    fn fixture() -> (SequencingInstance, RackConfig, SortingModel, RetrievalPlan) {
        let inst = random_instance(11, Layout::A, 4, 3, true);
        let rack = rack_for(Layout::A);
        let s = sorting(18.0, 4.0);
        let plan = solve_optimal(&inst, &rack, &s).unwrap();
        assert!(validate_plan(&plan, &inst, &rack, &s).is_valid());
        (inst, rack, s, plan)
    }

    #[test]
    fn broken_alternation() {
        let (inst, rack, s, mut plan) = fixture();
        plan.cycles[1].io_point = plan.cycles[0].io_point;
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::AlternationBroken { cycle: 1, .. })));
    }

    #[test]
    fn missing_line() {
        let (inst, rack, s, mut plan) = fixture();
        plan.cycles.pop();
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::LineNotCovered { .. })));
        assert!(report.has(|v| matches!(v, Violation::CycleCountMismatch { .. })));
        assert!(report.has(|v| matches!(v, Violation::ObjectiveMismatch { .. })));
    }

    #[test]
    fn drug_picked_twice() {
        let (inst, rack, s, mut plan) = fixture();
        let k = inst.routed_lines()[0];
        let cands = inst.lines[k].candidates();
        let first = plan
            .cycles
            .iter()
            .position(|c| c.drug == Some(inst.lines[k].drug))
            .unwrap();
        let other = (first + 2) % plan.cycles.len();
        plan.cycles[other].retrieve_bin = Some(cands[0].id);
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::DrugPickedTwice { .. } | Violation::DuplicateVisit { .. })));
    }

    #[test]
    fn foreign_bin_and_stock() {
        let (inst, rack, s, mut plan) = fixture();
        plan.cycles[0].retrieve_bin = Some(BinId(9999));
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::NotACandidate { cycle: 0, .. })));

        let mut inst = inst;
        let k = inst.routed_lines()[0];
        inst.lines[k].dosage = 1000;
        let plan = solve_optimal(&inst, &rack, &s).unwrap();
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::StockInsufficient { .. })));
    }

    #[test]
    fn wrong_return_and_times() {
        let (inst, rack, s, mut plan) = fixture();
        plan.cycles[0].return_bin = Some(BinId(4242));
        plan.cycles[1].travel_time += 1.0;
        plan.objective += 1.0;
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::ReturnMismatch { cycle: 0, .. })));
        assert!(report.has(|v| matches!(v, Violation::TravelMismatch { cycle: 1, .. })));
        assert!(report.has(|v| matches!(v, Violation::ObjectiveMismatch { .. })));
    }

    #[test]
    fn intra_set_arc() {
        let inst = instance(
            vec![bin(1, 3, 4, 1, 10), bin(2, 15, 12, 1, 10), bin(3, 5, 5, 2, 10)],
            &[(1, 1), (2, 1)],
            &[None],
            Layout::B,
        );
        let rack = rack_for(Layout::B);
        let s = sorting(10.0, 1.0);
        let mut plan = solve_optimal(&inst, &rack, &s).unwrap();
        plan.cycles[1].return_bin = Some(BinId(1));
        plan.cycles[0].retrieve_bin = Some(BinId(1));
        plan.cycles[1].retrieve_bin = Some(BinId(2));
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::IntraSetArc { cycle: 1, .. })));
    }

    #[test]
    fn trailing_tampered() {
        let (inst, rack, s, mut plan) = fixture();
        plan.new_trailing.slots.reverse();
        let report = validate_plan(&plan, &inst, &rack, &s);
        assert!(report.has(|v| matches!(v, Violation::TrailingMismatch)));
    }
}

#[test]
fn lp_binary_count_and_round_trip() {
    for (seed, layout, closed) in [(1, Layout::A, false), (2, Layout::B, false), (3, Layout::A, true)] {
        let inst = random_instance(seed, layout, 4, 3, true);
        let rack = rack_for(layout);
        let s = sorting(15.0, 5.0);
        let opts = LpOptions {
            closed_tour: closed,
            ..LpOptions::default()
        };
        let model = build_model(&inst, &rack, &s, &opts).unwrap();
        let w = layout.io_count();
        let l = w + inst.lines.iter().map(|l| l.candidates().len()).sum::<usize>();
        let k = inst.lines.len();
        assert_eq!(model.binaries.len(), l * (l - 1) * w + k * w);
        assert_eq!(model.bounds.len(), l - w);
        let text = write_lp(&model);
        assert!(text.lines().all(|line| line.len() < 256));
        assert_eq!(parse_lp(&text).unwrap(), model);
    }
}

#[test]
fn lp_costs_match_cycle_prices() {
    let inst = instance(
        vec![bin(1, 3, 4, 1, 10), bin(2, 15, 12, 2, 10)],
        &[(1, 2), (2, 2)],
        &[None, None],
        Layout::A,
    );
    let rack = rack_for(Layout::A);
    let s = sorting(15.0, 5.0);
    let model = build_model(&inst, &rack, &s, &LpOptions::default()).unwrap();
    // x_1_1_3: empty slot at I/O 1 to bin 1 (node 3)
    let o = rack.io_point(0);
    let t = dual_command_time(&o, &o, &GridPosition::new(1, 3, 4), &rack).unwrap();
    let coef = model.objective.iter().find(|(v, _)| v == "x_1_1_3").unwrap().1;
    assert_eq!(coef, expected_max(&s, t).unwrap());
    assert_eq!(model.coefficient("stock_3", "x_2_2_3"), 2.0);
    assert_eq!(model.coefficient("cycles", "x_2_4_3"), 1.0);
}

#[test]
fn lp_size_cap() {
    let inst = random_instance(5, Layout::A, 6, 3, false);
    let opts = LpOptions {
        closed_tour: false,
        max_variables: 10,
    };
    let err = build_model(&inst, &rack_for(Layout::A), &sorting(1.0, 1.0), &opts).unwrap_err();
    assert!(matches!(err, SequencingError::TooLarge(_)));
}

#[test]
fn lp_parser_rejects_garbage() {
    assert!(parse_lp("Minimize\n obj: 1 x\nSubject To\n c1: 1 x <=\n").is_err());
    assert!(parse_lp("Minimize\n obj: 1 x\nSubject To\nBounds\n 0 <= x\nBinary\nEnd\n").is_err());
    assert!(parse_lp("Minimize\n obj: 1 x\n").is_err());
    let ok = parse_lp("Minimize\n obj: x - 2 y\nSubject To\n c: x + y >= -1\nBounds\nBinary\n x y\nEnd\n").unwrap();
    assert_eq!(ok.objective, vec![("x".into(), 1.0), ("y".into(), -2.0)]);
    assert_eq!(ok.rows[0].rhs, -1.0);
}

#[test]
fn expected_time_grows_with_mean_sorting_time() {
    let inst = random_instance(8, Layout::A, 5, 3, true);
    let rack = rack_for(Layout::A);
    let mut last = 0.0;
    for mu in [0.0, 5.0, 10.0, 20.0, 40.0, 80.0] {
        let plan = solve_optimal(&inst, &rack, &sorting(mu, 4.0)).unwrap();
        assert!(plan.objective >= last - 1e-9);
        last = plan.objective;
    }
}

#[test]
fn sequential_layout_decomposes() {
    let inst = random_instance(4, Layout::B, 6, 3, true);
    let rack = rack_for(Layout::B);
    let base = solve_optimal(&inst, &rack, &sorting(0.0, 0.0)).unwrap();
    for (mu, sigma) in [(10.0, 0.0), (10.0, 9.0), (35.0, 2.0)] {
        for strategy in [Strategy::Optimal, Strategy::Dp, Strategy::Greedy] {
            let zero = solve(strategy, &inst, &rack, &sorting(0.0, 0.0), 0).unwrap();
            let plan = solve(strategy, &inst, &rack, &sorting(mu, sigma), 0).unwrap();
            assert_eq!(plan.cycles.len(), zero.cycles.len());
            assert_eq!(
                plan.cycles.iter().map(|c| c.retrieve_bin).collect::<Vec<_>>(),
                zero.cycles.iter().map(|c| c.retrieve_bin).collect::<Vec<_>>()
            );
            let n = plan.cycles.len() as f64;
            assert!((plan.objective - (plan.total_travel() + n * mu)).abs() < 1e-9);
        }
        let plan = solve_optimal(&inst, &rack, &sorting(mu, sigma)).unwrap();
        assert!((plan.total_travel() - base.total_travel()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dominance_and_oracle(
        seed in any::<u64>(),
        two in any::<bool>(),
        k in 2usize..=5,
        trailing in any::<bool>(),
        mu in 0.0f64..60.0,
        sigma in 0.0f64..15.0,
    ) {
        let layout = if two { Layout::A } else { Layout::B };
        let inst = random_instance(seed, layout, k, 3, trailing);
        let rack = rack_for(layout);
        let s = sorting(mu, sigma);
        let opt = solve_optimal(&inst, &rack, &s).unwrap();
        let dp = solve_dp(&inst, &rack, &s).unwrap();
        let greedy = solve_greedy(&inst, &rack, &s).unwrap();
        let random = solve_random(&inst, &rack, &s, seed).unwrap();
        let oracle = brute_force_oracle(&inst, &rack, &s, DEFAULT_ORACLE_CAP).unwrap();
        let tol = 1e-9 * (1.0 + oracle.abs());
        prop_assert!((opt.objective - oracle).abs() <= tol, "opt {} oracle {}", opt.objective, oracle);
        prop_assert!(opt.objective <= dp.objective + tol);
        prop_assert!(dp.objective <= greedy.objective + tol);
        prop_assert!(dp.objective <= random.objective + tol);
        for plan in [&opt, &dp, &greedy, &random] {
            let report = validate_plan(plan, &inst, &rack, &s);
            prop_assert!(report.is_valid(), "{:?}", report.violations);
            prop_assert_eq!(plan.executed_expected_time, plan.objective);
        }
    }
}
