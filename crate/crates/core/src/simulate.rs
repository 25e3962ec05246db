//! Closed-loop simulation drivers, benchmark comparison, and timelines.
//!
//! Simulation is event-stepped: grid time advances exactly by event
//! durations, never by wall clock, so every run is reproducible. A fixed
//! schedule that breaks constraints still executes to the end and is
//! flagged, which keeps infeasible what-if schedules comparable instead of
//! aborting them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{llp_run, DecisionError, LookaheadConfig};
use crate::planning::{init_model, Disturbance};
use crate::pta::{MachineSpec, OrderSpec, PtaError, ScheduleString, SpecError};
use crate::runlog::{
    ConstraintBreach, RunLog, RunMeta, RunMode, RunOutcome, RunTotals, StepRecord,
};
use crate::scalar::Scalar;
use crate::tariff::{PriceSchedule, TariffError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Pta(#[from] PtaError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    /// The two runs were not produced from the same world.
    #[error("runs were produced from different fixtures: {what} differs")]
    MismatchedFixtures { what: &'static str },
}

/// Runs the lookahead controller closed-loop over fresh specs.
pub fn run_llp<T: Scalar>(
    machine: MachineSpec<T>,
    order: OrderSpec<T>,
    prices: PriceSchedule<T>,
    cfg: &LookaheadConfig,
    disturbances: Vec<Disturbance<T>>,
) -> Result<RunLog<T>, SimError> {
    let model = init_model(machine, order)?;
    Ok(llp_run(model, prices, cfg, disturbances)?)
}

/// Executes a pre-computed schedule verbatim with full pricing and
/// constraint checking. Constraint breaches and demand shortfalls are
/// recorded in the outcome rather than aborting execution.
pub fn run_fixed<T: Scalar>(
    machine: MachineSpec<T>,
    order: OrderSpec<T>,
    prices: PriceSchedule<T>,
    schedule: &ScheduleString,
) -> Result<RunLog<T>, SimError> {
    let model = init_model(machine, order)?;
    let start_h = model.start_time_h();
    let timings = model.transition_timings(0, start_h, schedule)?;

    let meta = RunMeta {
        machine: model.machine().clone(),
        order: model.order().clone(),
        prices: prices.clone(),
        tariff_digest: prices.digest(),
        start_h,
        mode: RunMode::Fixed { schedule: schedule.clone() },
    };

    let mut steps = Vec::with_capacity(timings.len());
    let mut energy_mwh = T::zero();
    let mut energy_cost = T::zero();
    let mut state = 0usize;
    for (event, timing) in schedule.iter().zip(&timings) {
        let power = model.power_mw(event)?;
        let cost = prices.transition_energy_cost(power, timing.start_h, timing.end_h)?;
        // Metered against the nominal event duration, exactly as the
        // closed-loop executor does, so a replay reproduces its totals.
        let step_energy = power * model.event_duration(event)?;
        energy_mwh = energy_mwh + step_energy;
        energy_cost = energy_cost + cost;
        steps.push(StepRecord {
            step: timing.event_index,
            start_h: timing.start_h,
            end_h: timing.end_h,
            state_before: state,
            state_after: state + event,
            event,
            energy_mwh: step_energy,
            energy_cost: cost,
            decision: None,
        });
        state += event;
    }
    let end_h = timings.last().map_or(start_h, |t| t.end_h);

    // Flag every milestone the schedule crossed late (or never reached in
    // time), plus a shortfall if it stops below demand.
    let tol = T::tol();
    let mut breaches = Vec::new();
    for c in model.constraints() {
        let deadline = start_h + c.bound_h;
        let crossing = steps
            .iter()
            .find(|s| s.state_before < c.applies_at && c.applies_at <= s.state_after)
            .map(|s| s.end_h);
        match crossing {
            Some(at_h) if at_h > deadline + tol => {
                breaches.push(ConstraintBreach::Deadline {
                    quantity: c.applies_at,
                    deadline_h: deadline,
                    at_h,
                });
            }
            None if end_h > deadline + tol => {
                breaches.push(ConstraintBreach::Deadline {
                    quantity: c.applies_at,
                    deadline_h: deadline,
                    at_h: end_h,
                });
            }
            _ => {}
        }
    }
    if !model.is_marked(state) {
        breaches.push(ConstraintBreach::DemandShortfall {
            produced: state,
            demanded: model.demand(),
        });
    }

    Ok(RunLog {
        meta,
        steps,
        totals: RunTotals { energy_mwh, energy_cost, parts_produced: state, end_h },
        outcome: if breaches.is_empty() {
            RunOutcome::Completed
        } else {
            RunOutcome::ConstraintViolated { breaches }
        },
    })
}

/// Relative saving of run A over run B in percent:
/// `(cost_b − cost_a) / cost_b × 100`. Zero when B costs nothing.
pub fn savings_percent<T: Scalar>(cost_a: T, cost_b: T) -> T {
    if cost_b == T::zero() {
        return T::zero();
    }
    (cost_b - cost_a) / cost_b * T::from_config(100.0)
}

/// One row of an hourly run timeline: average electrical power drawn over
/// the hour, the tariff price at the hour's start, and the cost accrued
/// through the hour's end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TimelinePoint<T: Scalar> {
    pub hour: T,
    pub power_mw: T,
    pub price_per_mwh: T,
    pub cumulative_cost: T,
}

/// Hourly series over a run's span, built from its step records. Power is
/// the energy drawn within each hour; prices are sampled from the tariff the
/// run started under; costs are spread uniformly across each step's
/// interval, so the final row's cumulative cost equals the run total.
pub fn timeline<T: Scalar>(log: &RunLog<T>) -> Result<Vec<TimelinePoint<T>>, SimError> {
    let Some(last) = log.steps.last() else {
        return Ok(Vec::new());
    };
    let start = log.meta.start_h;
    let end = last.end_h;
    let mut points = Vec::new();
    let mut hour = start.floor();
    while hour < end {
        let next = hour + T::one();
        let mut power = T::zero();
        let mut cumulative = T::zero();
        for step in &log.steps {
            let duration = step.end_h - step.start_h;
            let lo = if step.start_h > hour { step.start_h } else { hour };
            let hi = if step.end_h < next { step.end_h } else { next };
            if hi > lo {
                power = power + step.energy_mwh * ((hi - lo) / duration);
            }
            let through = if step.end_h < next { step.end_h } else { next };
            if through > step.start_h {
                cumulative =
                    cumulative + step.energy_cost * ((through - step.start_h) / duration);
            }
        }
        let sample_at = if hour > start { hour } else { start };
        let price = log.meta.prices.price_at(sample_at)?;
        points.push(TimelinePoint {
            hour,
            power_mw: power,
            price_per_mwh: price,
            cumulative_cost: cumulative,
        });
        hour = next;
    }
    Ok(points)
}

/// Renders a timeline as CSV with a fixed header.
pub fn timeline_csv<T: Scalar>(points: &[TimelinePoint<T>]) -> String {
    let mut out = String::from("hour,power_mw,price_per_mwh,cumulative_cost\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.hour, p.power_mw, p.price_per_mwh, p.cumulative_cost
        ));
    }
    out
}

/// Side-by-side result of two runs over the same fixture. Savings are of A
/// relative to B, so B is the baseline (typically the maximum-utilization
/// benchmark).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ComparisonReport<T: Scalar> {
    pub run_a: RunLog<T>,
    pub run_b: RunLog<T>,
    pub savings_percent: T,
    pub timeline_a: Vec<TimelinePoint<T>>,
    pub timeline_b: Vec<TimelinePoint<T>>,
}

/// Compares two runs produced from the same machine, order, and tariff.
pub fn compare<T: Scalar>(
    run_a: RunLog<T>,
    run_b: RunLog<T>,
) -> Result<ComparisonReport<T>, SimError> {
    if run_a.meta.machine != run_b.meta.machine {
        return Err(SimError::MismatchedFixtures { what: "machine" });
    }
    if run_a.meta.order != run_b.meta.order {
        return Err(SimError::MismatchedFixtures { what: "order" });
    }
    if run_a.meta.tariff_digest != run_b.meta.tariff_digest {
        return Err(SimError::MismatchedFixtures { what: "tariff" });
    }
    let savings = savings_percent(run_a.totals.energy_cost, run_b.totals.energy_cost);
    let timeline_a = timeline(&run_a)?;
    let timeline_b = timeline(&run_b)?;
    Ok(ComparisonReport {
        run_a,
        run_b,
        savings_percent: savings,
        timeline_a,
        timeline_b,
    })
}
