//! Acceptance tests for the core library: each test exercises one
//! numbered acceptance criterion end to end at its stated tolerance and
//! prints a PASS line (visible with `--nocapture`). Criteria 1 and 7
//! exercise the command-line binary and live in the CLI crate.

mod common;

use rand::Rng;

use dtsched_core::decision::{
    benchmark_schedule, llp_run, llp_run_from, llp_step, open_loop_optimal, schedule_cost,
    LookaheadConfig, TieBreak,
};
use dtsched_core::pta::{Milestone, OrderSpec, PtaModel, ScheduleString};
use dtsched_core::planning::{Disturbance, DisturbanceKind, RuntimeContext};
use dtsched_core::runlog::StepRecord;
use dtsched_core::simulate::run_fixed;

const TOL: f64 = 1e-9;

/// With the lookahead window stretched to the full horizon, the receding
/// controller realizes exactly the open-loop optimum — same schedule, same
/// cost to 1e-9 — across a grid of machines, orders and random tariffs.
#[test]
fn criterion_2_full_horizon_lookahead_matches_open_loop() {
    let mut instances = 0;
    for capacity in [2usize, 3] {
        for demand in 3usize..=6 {
            for surplus in [0usize, 1] {
                for with_milestone in [false, true] {
                    for seed in 0..5u64 {
                        let mut rng = common::rng(
                            seed ^ (capacity as u64) << 8
                                ^ (demand as u64) << 16
                                ^ (surplus as u64) << 24
                                ^ (with_milestone as u64) << 32,
                        );
                        let machine = common::random_machine(&mut rng, capacity, surplus);
                        let milestones = if with_milestone {
                            let batches = demand.div_ceil(capacity);
                            vec![Milestone {
                                quantity: demand,
                                deadline_h: batches as f64 + 1.5,
                            }]
                        } else {
                            vec![]
                        };
                        let order = OrderSpec {
                            start_time_h: 8.0,
                            total_demand: demand,
                            milestones,
                        };
                        let model = PtaModel::new(machine, order).unwrap();
                        let horizon = 8.0 + 2.0 * (demand + surplus) as f64 + 2.0;
                        let prices = common::random_tariff(&mut rng, 8.0, horizon, 6);
                        let cfg = LookaheadConfig {
                            window: 2 * (demand + surplus) + 1,
                            record_candidates: false,
                            ..LookaheadConfig::default()
                        };

                        let log = llp_run(model.clone(), prices.clone(), &cfg, vec![]).unwrap();
                        assert!(
                            log.outcome.is_completed(),
                            "H={} d={} v={} m={} seed={}: controller did not complete",
                            capacity, demand, surplus, with_milestone, seed
                        );
                        let realized = log.schedule();
                        let realized_cost =
                            schedule_cost(&model, &prices, &realized, 8.0).unwrap();
                        let (optimal, optimal_cost) =
                            open_loop_optimal(&model, &prices, 8.0, cfg.tie_break).unwrap();
                        assert_eq!(
                            realized, optimal,
                            "H={} d={} v={} m={} seed={}: schedules diverge",
                            capacity, demand, surplus, with_milestone, seed
                        );
                        assert!(
                            (realized_cost - optimal_cost).abs() <= TOL,
                            "H={} d={} v={} m={} seed={}: cost {} vs {}",
                            capacity, demand, surplus, with_milestone, seed,
                            realized_cost, optimal_cost
                        );
                        instances += 1;
                    }
                }
            }
        }
    }
    println!(
        "PASS criterion 2: full-horizon lookahead == open-loop optimum on {} instances (cost within 1e-9, schedules identical)",
        instances
    );
}

/// Interval billing agrees with an independent midpoint Riemann sum on
/// frozen worked examples (1e-9) and on 100 randomized grid-aligned
/// fixtures (relative 1e-6).
#[test]
fn criterion_3_interval_billing_matches_riemann_oracle() {
    // Frozen worked values, each cross-checked against the oracle too.
    let flat50 = common::flat_tariff(50.0, 8.0, 13.0);
    let c = flat50.transition_energy_cost(1.0, 8.0, 9.0).unwrap();
    assert!((c - 50.0).abs() <= TOL);
    assert!((c - common::riemann_cost(&[(8.0, 13.0, 50.0)], 1.0, 8.0, 9.0, 1e-4)).abs() <= 1e-6);

    let two_tier = dtsched_core::tariff::PriceSchedule::<f64>::new(vec![
        dtsched_core::tariff::PriceSegment { start_h: 8.0, end_h: 9.0, price_per_mwh: 50.0 },
        dtsched_core::tariff::PriceSegment { start_h: 9.0, end_h: 10.0, price_per_mwh: 100.0 },
    ])
    .unwrap();
    let c = two_tier.transition_energy_cost(1.0, 8.5, 9.5).unwrap();
    assert!((c - 75.0).abs() <= TOL, "boundary-crossing hour: {}", c);
    let raw = [(8.0, 9.0, 50.0), (9.0, 10.0, 100.0)];
    assert!((c - common::riemann_cost(&raw, 1.0, 8.5, 9.5, 1e-4)).abs() <= 1e-6);

    let flat100 = common::flat_tariff(100.0, 8.0, 13.0);
    let c = flat100.transition_energy_cost(0.5, 9.0, 9.2).unwrap();
    assert!((c - 10.0).abs() <= TOL, "idle dwell: {}", c);

    // Randomized cross-check. Boundaries sit on a 0.25 h grid and interval
    // endpoints on a 0.05 h grid, so every discontinuity lands on a cell
    // edge of the 1e-4 h sampling grid and the oracle is exact up to float
    // rounding.
    for seed in 0..100u64 {
        let mut rng = common::rng(0x3000 + seed);
        let span_quarters = rng.gen_range(8..=40); // 2 h to 10 h of coverage
        let end = 8.0 + span_quarters as f64 * 0.25;
        let prices = common::random_tariff(&mut rng, 8.0, end, 6);
        let raw: Vec<(f64, f64, f64)> = prices
            .segments()
            .iter()
            .map(|s| (s.start_h, s.end_h, s.price_per_mwh))
            .collect();
        let ticks = (span_quarters * 5) as usize; // 0.05 h steps in coverage
        let a_tick = rng.gen_range(0..ticks);
        let b_tick = rng.gen_range(a_tick + 1..=ticks);
        let a = 8.0 + a_tick as f64 * 0.05;
        let b = 8.0 + b_tick as f64 * 0.05;
        let power = (rng.gen_range(0.1..5.0_f64) * 1000.0).round() / 1000.0;

        let closed_form = prices.transition_energy_cost(power, a, b).unwrap();
        let oracle = common::riemann_cost(&raw, power, a, b, 1e-4);
        let limit = 1e-6 * oracle.abs().max(1.0);
        assert!(
            (closed_form - oracle).abs() <= limit,
            "seed {}: closed form {} vs Riemann {} over [{}, {}]",
            seed, closed_form, oracle, a, b
        );
    }
    println!(
        "PASS criterion 3: closed-form billing within 1e-6 relative of a 1e-4 h Riemann sum on 100 random fixtures (worked values exact)"
    );
}

/// Milestone and idle semantics: with two parts due an hour in, only a
/// full double batch is a valid opener; consecutive idles can never be
/// expressed; and the reference schedule crosses its milestones at the
/// documented instants.
#[test]
fn criterion_4_constraint_semantics() {
    let model = common::case_model();
    let prices = common::shift_tariff();

    // Valid first events at the initial decision: exactly {2}.
    let cfg = LookaheadConfig::default();
    let decision = llp_step(&model, &prices, 0, None, 8.0, &cfg).unwrap();
    let mut valid_firsts: Vec<usize> = decision
        .candidates
        .iter()
        .filter(|c| c.validity.is_valid())
        .filter_map(|c| c.string.first())
        .collect();
    valid_firsts.sort_unstable();
    valid_firsts.dedup();
    assert_eq!(valid_firsts, vec![2], "only a full batch meets the 1 h milestone");
    assert_eq!(decision.chosen_event, 2);

    // Consecutive idles are rejected at construction and at deserialization,
    // so no schedule containing them can even be expressed.
    assert!(ScheduleString::new(vec![2, 0, 0, 2]).is_err());
    assert!(serde_json::from_str::<ScheduleString>("[2,0,0,2]").is_err());

    // The known-good schedule validates end to end and crosses its
    // milestones 1.0 h and 4.0 h after the start.
    let s = ScheduleString::new(vec![2, 2, 1, 2]).unwrap();
    assert!(model.check_constraints(0, 8.0, &s).unwrap().is_valid());
    let timings = model.transition_timings(0, 8.0, &s).unwrap();
    let mut state = 0;
    let mut crossings = Vec::new();
    for (event, t) in s.iter().zip(&timings) {
        for m in [2usize, 7] {
            if state < m && m <= state + event {
                crossings.push(t.end_h - 8.0);
            }
        }
        state += event;
    }
    assert_eq!(crossings, vec![1.0, 4.0]);

    println!(
        "PASS criterion 4: valid openers = {{2}}, consecutive idles inexpressible, milestones crossed at +1.0 h and +4.0 h"
    );
}

/// The maximum-utilization benchmark on the reference fixture is four
/// back-to-back batches, 3.8 MWh, 334.0 in energy cost, done at hour 12.
#[test]
fn criterion_5_benchmark_schedule_and_totals() {
    let model = common::case_model();
    let bench = benchmark_schedule(&model).unwrap();
    assert_eq!(bench.events(), &[2, 2, 2, 1]);

    let log = run_fixed(
        common::case_machine(),
        common::case_order(),
        common::shift_tariff(),
        &bench,
    )
    .unwrap();
    assert!(log.outcome.is_completed());
    assert!((log.totals.energy_mwh - 3.8).abs() <= TOL);
    assert!((log.totals.energy_cost - 334.0).abs() <= TOL);
    assert!((log.totals.end_h - 12.0).abs() <= TOL);
    assert_eq!(log.totals.parts_produced, 7);

    println!(
        "PASS criterion 5: benchmark [2,2,2,1] bills 3.8 MWh / 334.0 and finishes at hour 12"
    );
}

fn renumbered(step: &StepRecord<f64>, index: usize) -> String {
    let mut s = step.clone();
    s.step = index;
    serde_json::to_string(&s).unwrap()
}

/// Mid-run tariff updates leave history untouched and the future
/// memoryless: steps finished before the splice are byte-identical to an
/// undisturbed run, and every later decision equals that of a fresh
/// controller started cold at the next decision boundary with the spliced
/// schedule.
#[test]
fn criterion_6_disturbed_runs_are_memoryless() {
    let mut rewrites = 0;
    for seed in 0..20u64 {
        let mut rng = common::rng(0x6000 + seed);
        // Demand above capacity guarantees at least two decisions, so a
        // mid-run splice always has a post-splice decision to compare.
        let model = loop {
            let m = common::random_model(&mut rng);
            if m.demand() > m.max_event() {
                break m;
            }
        };
        let horizon = 8.0 + 2.0 * (model.max_state() as f64 + 1.0);
        let prices = common::random_tariff(&mut rng, 8.0, horizon, 6);
        let cfg = LookaheadConfig { window: rng.gen_range(2..=3), ..LookaheadConfig::default() };

        let baseline = llp_run(model.clone(), prices.clone(), &cfg, vec![]).unwrap();
        assert!(baseline.outcome.is_completed(), "seed {}: baseline failed", seed);
        let last_decision_h = baseline.steps.last().unwrap().start_h;
        let at = 8.0 + rng.gen_range(0.3..0.95) * (last_decision_h - 8.0);

        let update = common::random_tariff(&mut rng, 8.0, horizon + 4.0, 6);
        let disturbance = Disturbance {
            at_h: at,
            kind: DisturbanceKind::TariffUpdate(update.clone()),
        };
        let disturbed =
            llp_run(model.clone(), prices.clone(), &cfg, vec![disturbance]).unwrap();
        assert!(disturbed.outcome.is_completed(), "seed {}: disturbed run failed", seed);

        // History: steps fully billed before the splice are byte-identical.
        let done_before = |log: &dtsched_core::runlog::RunLog<f64>| {
            log.steps
                .iter()
                .filter(|s| s.end_h <= at + TOL)
                .map(|s| serde_json::to_string(s).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(done_before(&disturbed), done_before(&baseline), "seed {}: history rewritten", seed);

        // Future: decisions from the next boundary on match a cold start.
        let k = disturbed
            .steps
            .iter()
            .position(|s| s.start_h >= at - TOL)
            .unwrap_or_else(|| panic!("seed {}: splice landed after the last decision", seed));
        let resume_state = disturbed.steps[k].state_before;
        let resume_last = if k == 0 { None } else { Some(disturbed.steps[k - 1].event) };
        let resume_h = disturbed.steps[k].start_h;
        let spliced = prices.spliced(&update, at).unwrap();
        let ctx = RuntimeContext::at(
            model.clone(),
            spliced,
            resume_state,
            resume_last,
            resume_h,
            vec![],
        )
        .unwrap();
        let fresh = llp_run_from(ctx, &cfg).unwrap();
        assert!(fresh.outcome.is_completed(), "seed {}: fresh controller failed", seed);
        assert_eq!(
            fresh.steps.len(),
            disturbed.steps.len() - k,
            "seed {}: fresh controller took a different number of steps",
            seed
        );
        for (i, fresh_step) in fresh.steps.iter().enumerate() {
            assert_eq!(
                renumbered(fresh_step, k + i),
                serde_json::to_string(&disturbed.steps[k + i]).unwrap(),
                "seed {}: step {} differs from the cold start",
                seed,
                k + i
            );
        }

        if disturbed.schedule() != baseline.schedule()
            || (disturbed.totals.energy_cost - baseline.totals.energy_cost).abs() > TOL
        {
            rewrites += 1;
        }
    }
    assert!(rewrites > 0, "no fixture actually changed the run; test is vacuous");
    println!(
        "PASS criterion 6: 20 spliced runs keep pre-splice history byte-identical and post-splice decisions equal to a cold start ({} visibly rewired)",
        rewrites
    );
}

/// Tie-breaks are deterministic and documented: equal-cost candidates fall
/// to the larger first event under the default policy.
#[test]
fn tie_breaks_are_deterministic() {
    let machine = common::case_machine();
    let order = OrderSpec { start_time_h: 8.0, total_demand: 12, milestones: vec![] };
    let model = PtaModel::new(machine, order).unwrap();
    let prices = common::flat_tariff(0.0, 8.0, 40.0);
    // Zero prices make every candidate cost exactly zero.
    let cfg = LookaheadConfig::default();
    let d = llp_step(&model, &prices, 0, None, 8.0, &cfg).unwrap();
    assert_eq!(d.chosen_string.events(), &[2, 2]);
    let d = llp_step(
        &model,
        &prices,
        0,
        None,
        8.0,
        &LookaheadConfig { tie_break: TieBreak::LexicographicLargest, ..cfg },
    )
    .unwrap();
    assert_eq!(d.chosen_string.events(), &[2, 2]);
}
