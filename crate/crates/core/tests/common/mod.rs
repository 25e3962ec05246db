//! Shared fixtures and oracles for the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtsched_core::pta::{MachineSpec, Milestone, OrderSpec, PtaModel, ScheduleString};
use dtsched_core::tariff::{PriceSchedule, PriceSegment};

/// Two-batch machine: 1 h per batch, 0.2 h idles, 0.5/0.8/1.0 MW.
pub fn case_machine() -> MachineSpec<f64> {
    MachineSpec {
        capacity: 2,
        processing_time_h: 1.0,
        setup_time_h: 0.2,
        power_map_mw: vec![0.5, 0.8, 1.0],
        inventory_capacity: 3,
        allocated_inventory: 1,
    }
}

/// Seven parts from 8 am: two within the first hour, all within five.
pub fn case_order() -> OrderSpec<f64> {
    OrderSpec {
        start_time_h: 8.0,
        total_demand: 7,
        milestones: vec![
            Milestone { quantity: 2, deadline_h: 1.0 },
            Milestone { quantity: 7, deadline_h: 5.0 },
        ],
    }
}

pub fn case_model() -> PtaModel<f64> {
    PtaModel::new(case_machine(), case_order()).unwrap()
}

/// Expensive morning, ≥20% cheaper from hour 10 on, cheapest tail. Rewards
/// shifting work later while the milestones keep the run honest.
pub fn shift_tariff() -> PriceSchedule<f64> {
    PriceSchedule::new(vec![
        PriceSegment { start_h: 8.0, end_h: 10.0, price_per_mwh: 100.0 },
        PriceSegment { start_h: 10.0, end_h: 11.0, price_per_mwh: 78.0 },
        PriceSegment { start_h: 11.0, end_h: 13.0, price_per_mwh: 70.0 },
    ])
    .unwrap()
}

pub fn flat_tariff(price: f64, from: f64, to: f64) -> PriceSchedule<f64> {
    PriceSchedule::flat(price, from, to).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A machine with the given batch capacity and non-decreasing random powers.
pub fn random_machine(rng: &mut ChaCha8Rng, capacity: usize, surplus: usize) -> MachineSpec<f64> {
    let mut power: f64 = rng.gen_range(0.1..0.6);
    let mut power_map_mw = Vec::with_capacity(capacity + 1);
    for _ in 0..=capacity {
        power_map_mw.push((power * 1000.0).round() / 1000.0);
        power += rng.gen_range(0.0..0.5);
    }
    MachineSpec {
        capacity,
        processing_time_h: 1.0,
        setup_time_h: 0.2,
        power_map_mw,
        inventory_capacity: surplus,
        allocated_inventory: surplus,
    }
}

/// A small random production problem: capacity 2–3, demand 2–6, up to one
/// part of surplus slack, and usually a mid-run or final milestone loose
/// enough that back-to-back full batches meet it.
pub fn random_model(rng: &mut ChaCha8Rng) -> PtaModel<f64> {
    let capacity = rng.gen_range(2..=3);
    let demand = rng.gen_range(2..=6);
    let surplus = rng.gen_range(0..=1);
    let machine = random_machine(rng, capacity, surplus);
    let mut milestones = Vec::new();
    if rng.gen_bool(0.7) {
        let quantity: usize = rng.gen_range(1..=demand);
        let batches = quantity.div_ceil(capacity);
        let slack = rng.gen_range(0.0..2.0_f64);
        milestones.push(Milestone {
            quantity,
            deadline_h: ((batches as f64 + slack) * 10.0).round() / 10.0,
        });
    }
    let order = OrderSpec { start_time_h: 8.0, total_demand: demand, milestones };
    PtaModel::new(machine, order).unwrap()
}

/// A piecewise tariff covering `[start_h, end_h)` with boundaries on a
/// 0.25 h grid and prices on a 0.01 grid.
pub fn random_tariff(
    rng: &mut ChaCha8Rng,
    start_h: f64,
    end_h: f64,
    max_segments: usize,
) -> PriceSchedule<f64> {
    let quarters = ((end_h - start_h) * 4.0).round() as usize;
    let n = rng.gen_range(1..=max_segments.min(quarters).max(1));
    // n-1 distinct interior cut points on the quarter-hour grid.
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < n - 1 {
        let c = rng.gen_range(1..quarters);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut bounds = vec![start_h];
    bounds.extend(cuts.iter().map(|q| start_h + *q as f64 * 0.25));
    bounds.push(end_h);
    let segments = bounds
        .windows(2)
        .map(|w| PriceSegment {
            start_h: w[0],
            end_h: w[1],
            price_per_mwh: (rng.gen_range(10.0..200.0) * 100.0_f64).round() / 100.0,
        })
        .collect();
    PriceSchedule::new(segments).unwrap()
}

/// A random schedule string valid on the given model from zero parts:
/// batches within capacity, no consecutive idles.
pub fn random_schedule(rng: &mut ChaCha8Rng, model: &PtaModel<f64>) -> ScheduleString {
    let mut events = Vec::new();
    let mut state = 0;
    let mut last: Option<usize> = None;
    while !model.is_marked(state) {
        let feasible = model.feasible_events(state, last);
        let event = feasible[rng.gen_range(0..feasible.len())];
        events.push(event);
        state += event;
        last = Some(event);
    }
    ScheduleString::new(events).unwrap()
}

/// Midpoint Riemann sum over raw `(start, end, price)` segments, with its
/// own independent segment lookup. Exact (up to float rounding) whenever the
/// interval endpoints and all segment boundaries sit on the sampling grid.
pub fn riemann_cost(
    segments: &[(f64, f64, f64)],
    power_mw: f64,
    from_h: f64,
    to_h: f64,
    step_h: f64,
) -> f64 {
    let cells = ((to_h - from_h) / step_h).round() as usize;
    let mut sum = 0.0;
    for i in 0..cells {
        let t = from_h + (i as f64 + 0.5) * step_h;
        let price = segments
            .iter()
            .find(|(s, e, _)| *s <= t && t < *e)
            .map(|(_, _, p)| *p)
            .expect("oracle sample inside coverage");
        sum += power_mw * price * step_h;
    }
    sum
}
