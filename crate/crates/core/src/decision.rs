//! The decision maker: schedule cost functions, limited-lookahead search,
//! the closed-loop controller, the exhaustive open-loop optimum, and the
//! maximum-utilization benchmark.
//!
//! The controller never plans the whole run at once. At each decision point
//! it enumerates every schedule fragment up to `window` events ahead, prices
//! each fragment under the tariff, discards fragments that break a milestone
//! (or provably must break one later), picks the cheapest, and executes only
//! its first event. Repeating this until the order is filled yields the
//! closed-loop schedule.
//!
//! Two cost scales coexist. A fragment that finishes the order inside the
//! window is scored like a complete schedule: average energy cost per
//! ordered part plus a penalty for surplus parts. A fragment that does not
//! finish is scored by the average energy cost of the parts it produces
//! inside the window. Fragments that finish the order are preferred
//! outright: their score is the true figure of merit for the whole run,
//! while an unfinished fragment's rate says nothing about the cost to
//! complete the remainder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planning::{Disturbance, PlanError, RuntimeContext};
use crate::pta::{ConstraintCheck, PtaError, PtaModel, ScheduleString};
use crate::runlog::{RunLog, RunMeta, RunMode, RunOutcome, RunTotals, StepRecord};
use crate::scalar::Scalar;
use crate::tariff::{string_energy_cost, PriceSchedule, TariffError};

/// Errors raised by cost evaluation, search, and the controller loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    /// A complete-schedule cost was requested for a schedule that does not
    /// meet demand.
    #[error("terminal state q{state} does not meet demand")]
    NotMarked { state: usize },
    /// The window produced no parts, so its average cost is undefined.
    #[error("cost undefined: no parts produced")]
    ZeroDenominator,
    /// Lookahead configuration is unusable.
    #[error("invalid lookahead configuration: {message}")]
    InvalidConfig { message: String },
    /// No constraint-satisfying schedule reaches demand.
    #[error("no feasible schedule from state q{state} at {at_h}h")]
    Infeasible { state: usize, at_h: f64 },
    /// The controller's window contains no valid candidate.
    #[error("rescheduling failure at {at_h}h in state q{state}: no valid candidate")]
    ReschedulingFailure { state: usize, at_h: f64 },
    /// The maximum-utilization schedule cannot honour a milestone.
    #[error(
        "maximum-utilization schedule misses the {quantity}-part milestone: due {deadline_h}h, reached {at_h}h"
    )]
    InfeasibleDeadline { quantity: usize, deadline_h: f64, at_h: f64 },
    #[error(transparent)]
    Pta(#[from] PtaError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// How equal-cost candidates are separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Prefer the larger first event, then the lexicographically larger
    /// string. Favours utilization and keeps logs deterministic.
    LargestFirstEvent,
    /// Prefer the lexicographically larger string outright.
    LexicographicLargest,
}

/// Controller configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LookaheadConfig {
    /// Lookahead depth in events; must be at least 1.
    pub window: usize,
    /// Discard candidates from which some pending milestone can no longer
    /// be met even by running full batches back to back. Without this, a
    /// greedy window can paint the run into a dead end that only shows up
    /// as a rescheduling failure several steps later.
    pub prune_infeasible_futures: bool,
    pub tie_break: TieBreak,
    /// Keep every evaluated candidate in the decision records. Turning this
    /// off shrinks logs for large windows; the chosen path is always kept.
    pub record_candidates: bool,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        Self {
            window: 2,
            prune_infeasible_futures: true,
            tie_break: TieBreak::LargestFirstEvent,
            record_candidates: true,
        }
    }
}

/// Why a candidate was excluded from selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound = "")]
pub enum InvalidReason<T: Scalar> {
    /// A milestone is (or will unavoidably be) crossed late. `at_h` is the
    /// late crossing, or the earliest possible crossing for a pruned future.
    ConstraintViolation { quantity: usize, deadline_h: T, at_h: T },
    ConsecutiveIdle,
    ZeroDenominator,
    CapacityExceeded,
}

/// Whether a candidate may be selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case", bound = "")]
pub enum Validity<T: Scalar> {
    Valid,
    Invalid { reason: InvalidReason<T> },
}

impl<T: Scalar> Validity<T> {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// One evaluated schedule fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Candidate<T: Scalar> {
    pub string: ScheduleString,
    pub terminal_state: usize,
    /// True when the fragment finishes the order inside the window.
    pub reaches_marked: bool,
    /// Present exactly when the candidate is valid.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cost: Option<T>,
    pub validity: Validity<T>,
}

/// The controller's full view at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionRecord<T: Scalar> {
    pub at_state: usize,
    /// Grid time of the decision.
    pub at_h: T,
    pub window: usize,
    /// Every candidate in enumeration order; empty when candidate recording
    /// is off.
    pub candidates: Vec<Candidate<T>>,
    pub chosen_event: usize,
    pub chosen_string: ScheduleString,
    pub chosen_cost: T,
}

/// 1 when the state meets demand, 0 otherwise.
pub fn marked_indicator<T: Scalar>(
    model: &PtaModel<T>,
    state: usize,
) -> Result<usize, PtaError> {
    if state > model.max_state() {
        return Err(PtaError::InvalidState { state, max: model.max_state() });
    }
    Ok(usize::from(model.is_marked(state)))
}

/// Cost of a complete schedule started from zero parts: average energy cost
/// per ordered part, plus one unit per surplus part produced beyond demand.
pub fn schedule_cost<T: Scalar>(
    model: &PtaModel<T>,
    prices: &PriceSchedule<T>,
    s: &ScheduleString,
    start_h: T,
) -> Result<T, DecisionError> {
    let terminal = model.transition(0, s)?;
    if !model.is_marked(terminal) {
        return Err(DecisionError::NotMarked { state: terminal });
    }
    let d = model.demand();
    if d == 0 {
        return Err(DecisionError::ZeroDenominator);
    }
    let tp = string_energy_cost(model, prices, 0, start_h, s)?.total;
    Ok(tp / T::from_count(d) + T::from_count(terminal - d))
}

/// Cost of a window fragment started mid-run. Fragments that finish the
/// order are scored as complete schedules (see [`schedule_cost`]); fragments
/// that do not are scored by the window's energy cost averaged over the
/// parts produced within it. Idle-only fragments produce nothing and have no
/// defined cost.
pub fn window_cost<T: Scalar>(
    model: &PtaModel<T>,
    prices: &PriceSchedule<T>,
    from_state: usize,
    s: &ScheduleString,
    start_h: T,
) -> Result<T, DecisionError> {
    let terminal = model.transition(from_state, s)?;
    let tp = string_energy_cost(model, prices, from_state, start_h, s)?.total;
    if model.is_marked(terminal) {
        let d = model.demand();
        if d == 0 {
            return Err(DecisionError::ZeroDenominator);
        }
        Ok(tp / T::from_count(d) + T::from_count(terminal - d))
    } else {
        let produced = terminal - from_state;
        if produced == 0 {
            return Err(DecisionError::ZeroDenominator);
        }
        Ok(tp / T::from_count(produced))
    }
}

/// Every non-empty event string of length up to `window` playable from
/// `from_state`: capacity-respecting, no consecutive idles (also counting an
/// idle that immediately precedes the window), not extending past a state
/// that meets demand. Returned in depth-first order with events ascending,
/// which is the enumeration order decisions are recorded in.
pub fn lookahead_tree<T: Scalar>(
    model: &PtaModel<T>,
    from_state: usize,
    last_event: Option<usize>,
    window: usize,
) -> Vec<ScheduleString> {
    fn expand<T: Scalar>(
        model: &PtaModel<T>,
        state: usize,
        last_event: Option<usize>,
        depth_left: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<ScheduleString>,
    ) {
        if depth_left == 0 {
            return;
        }
        for event in model.feasible_events(state, last_event) {
            prefix.push(event);
            out.push(ScheduleString::new(prefix.clone()).expect("no consecutive idles by construction"));
            let next = state + event;
            expand(model, next, Some(event), depth_left - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    expand(model, from_state, last_event, window, &mut prefix, &mut out);
    out
}

/// Evaluates one fragment: constraint check, then (when enabled) a
/// feasibility projection for milestones beyond the window, then cost.
fn evaluate_candidate<T: Scalar>(
    model: &PtaModel<T>,
    prices: &PriceSchedule<T>,
    from_state: usize,
    now_h: T,
    s: ScheduleString,
    prune_infeasible_futures: bool,
) -> Result<Candidate<T>, DecisionError> {
    let tol = T::tol();
    let terminal = model.transition(from_state, &s)?;
    let reaches_marked = model.is_marked(terminal);

    if let ConstraintCheck::Violated { constraint, at_h } =
        model.check_constraints(from_state, now_h, &s)?
    {
        return Ok(Candidate {
            string: s,
            terminal_state: terminal,
            reaches_marked,
            cost: None,
            validity: Validity::Invalid {
                reason: InvalidReason::ConstraintViolation {
                    quantity: constraint.applies_at,
                    deadline_h: model.start_time_h() + constraint.bound_h,
                    at_h,
                },
            },
        });
    }

    if prune_infeasible_futures {
        let timings = model.transition_timings(from_state, now_h, &s)?;
        let end_h = timings.last().map_or(now_h, |t| t.end_h);
        for c in model.constraints() {
            if c.applies_at <= terminal {
                continue; // crossed (or settled before the window)
            }
            let deadline = model.start_time_h() + c.bound_h;
            let missing = c.applies_at - terminal;
            let batches = missing.div_ceil(model.max_event());
            let earliest =
                end_h + T::from_count(batches) * model.machine().processing_time_h;
            if earliest > deadline + tol {
                return Ok(Candidate {
                    string: s,
                    terminal_state: terminal,
                    reaches_marked,
                    cost: None,
                    validity: Validity::Invalid {
                        reason: InvalidReason::ConstraintViolation {
                            quantity: c.applies_at,
                            deadline_h: deadline,
                            at_h: earliest,
                        },
                    },
                });
            }
        }
    }

    match window_cost(model, prices, from_state, &s, now_h) {
        Ok(cost) => Ok(Candidate {
            string: s,
            terminal_state: terminal,
            reaches_marked,
            cost: Some(cost),
            validity: Validity::Valid,
        }),
        Err(DecisionError::ZeroDenominator) => Ok(Candidate {
            string: s,
            terminal_state: terminal,
            reaches_marked,
            cost: None,
            validity: Validity::Invalid { reason: InvalidReason::ZeroDenominator },
        }),
        Err(other) => Err(other),
    }
}

/// True when the challenger should replace the incumbent: strictly cheaper
/// beyond tolerance, or tied and ahead under the tie-break.
fn prefer<T: Scalar>(
    challenger_cost: T,
    challenger: &ScheduleString,
    incumbent_cost: T,
    incumbent: &ScheduleString,
    tie_break: TieBreak,
) -> bool {
    let tol = T::tol();
    if challenger_cost < incumbent_cost - tol {
        return true;
    }
    if challenger_cost > incumbent_cost + tol {
        return false;
    }
    match tie_break {
        TieBreak::LargestFirstEvent => match challenger.first().cmp(&incumbent.first()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => challenger.events() > incumbent.events(),
        },
        TieBreak::LexicographicLargest => challenger.events() > incumbent.events(),
    }
}

/// One controller decision: enumerate the window, evaluate every candidate,
/// and pick the winner. Candidates that finish the order outrank all others;
/// within a rank the cheapest wins, ties resolved by the configured
/// tie-break. Errors with a rescheduling failure when nothing is valid.
pub fn llp_step<T: Scalar>(
    model: &PtaModel<T>,
    prices: &PriceSchedule<T>,
    from_state: usize,
    last_event: Option<usize>,
    now_h: T,
    cfg: &LookaheadConfig,
) -> Result<DecisionRecord<T>, DecisionError> {
    if cfg.window == 0 {
        return Err(DecisionError::InvalidConfig {
            message: "window must be at least 1".into(),
        });
    }
    let mut candidates = Vec::new();
    for s in lookahead_tree(model, from_state, last_event, cfg.window) {
        candidates.push(evaluate_candidate(
            model,
            prices,
            from_state,
            now_h,
            s,
            cfg.prune_infeasible_futures,
        )?);
    }

    let mut best: Option<&Candidate<T>> = None;
    for c in &candidates {
        let Some(cost) = c.cost else { continue };
        let replace = match best {
            None => true,
            Some(b) => {
                let b_cost = b.cost.expect("selected candidates carry a cost");
                if c.reaches_marked != b.reaches_marked {
                    c.reaches_marked
                } else {
                    prefer(cost, &c.string, b_cost, &b.string, cfg.tie_break)
                }
            }
        };
        if replace {
            best = Some(c);
        }
    }

    let Some(best) = best else {
        return Err(DecisionError::ReschedulingFailure {
            state: from_state,
            at_h: now_h.as_f64(),
        });
    };
    let chosen_string = best.string.clone();
    let chosen_cost = best.cost.expect("selected candidates carry a cost");
    let chosen_event = chosen_string.first().expect("candidates are non-empty");
    Ok(DecisionRecord {
        at_state: from_state,
        at_h: now_h,
        window: cfg.window,
        candidates: if cfg.record_candidates { candidates } else { Vec::new() },
        chosen_event,
        chosen_string,
        chosen_cost,
    })
}

/// Runs the lookahead controller closed-loop from the order's start until
/// demand is met, applying disturbances as their effective instants pass.
pub fn llp_run<T: Scalar>(
    model: PtaModel<T>,
    prices: PriceSchedule<T>,
    cfg: &LookaheadConfig,
    disturbances: Vec<Disturbance<T>>,
) -> Result<RunLog<T>, DecisionError> {
    let ctx = RuntimeContext::new(model, prices, disturbances)?;
    llp_run_from(ctx, cfg)
}

/// Same loop from an arbitrary starting context (used to resume or replay a
/// controller mid-run).
///
/// Per iteration: disturbances due at the decision instant are applied
/// first, so the decision sees the world it will be billed in; then the
/// chosen event runs to completion. A disturbance dated inside the event's
/// interval is applied before billing — an in-flight batch's remaining
/// energy is billed at the new prices, because billing follows the grid —
/// but it cannot influence the decision that launched the batch.
pub fn llp_run_from<T: Scalar>(
    mut ctx: RuntimeContext<T>,
    cfg: &LookaheadConfig,
) -> Result<RunLog<T>, DecisionError> {
    let meta = RunMeta {
        machine: ctx.model.machine().clone(),
        order: ctx.model.order().clone(),
        prices: ctx.prices.clone(),
        tariff_digest: ctx.prices.digest(),
        start_h: ctx.grid_clock_h,
        mode: RunMode::Lookahead { config: *cfg },
    };
    let mut steps: Vec<StepRecord<T>> = Vec::new();
    let mut energy_mwh = T::zero();
    let mut energy_cost = T::zero();
    let outcome = loop {
        let now = ctx.grid_clock_h;
        for d in ctx.due_disturbances(now) {
            ctx.apply_disturbance(&d)?;
        }
        if ctx.model.is_marked(ctx.current_state) {
            break RunOutcome::Completed;
        }
        let decision = match llp_step(
            &ctx.model,
            &ctx.prices,
            ctx.current_state,
            ctx.last_event,
            now,
            cfg,
        ) {
            Ok(decision) => decision,
            Err(DecisionError::ReschedulingFailure { .. }) => {
                break RunOutcome::ReschedulingFailure {
                    at_h: now,
                    state: ctx.current_state,
                };
            }
            Err(other) => return Err(other),
        };
        let event = decision.chosen_event;
        let duration = ctx.model.event_duration(event)?;
        let end_h = now + duration;
        for d in ctx.due_disturbances(end_h) {
            ctx.apply_disturbance(&d)?;
        }
        let power = ctx.model.power_mw(event)?;
        let cost = ctx.prices.transition_energy_cost(power, now, end_h)?;
        let state_before = ctx.current_state;
        ctx.execute_event(event, end_h);
        let step_energy = power * duration;
        energy_mwh = energy_mwh + step_energy;
        energy_cost = energy_cost + cost;
        steps.push(StepRecord {
            step: steps.len(),
            start_h: now,
            end_h,
            state_before,
            state_after: ctx.current_state,
            event,
            energy_mwh: step_energy,
            energy_cost: cost,
            decision: Some(decision),
        });
    };
    let totals = RunTotals {
        energy_mwh,
        energy_cost,
        parts_produced: ctx.current_state,
        end_h: ctx.grid_clock_h,
    };
    Ok(RunLog { meta, steps, totals, outcome })
}

/// Exhaustively searches every constraint-satisfying schedule from zero
/// parts to demand and returns the cheapest with its cost. The search space
/// is finite: batches strictly increase the part count and idles cannot
/// repeat, so strings are bounded in length. Branches that cross a milestone
/// late — or whose deadline has already elapsed before the milestone is
/// reached — are cut.
pub fn open_loop_optimal<T: Scalar>(
    model: &PtaModel<T>,
    prices: &PriceSchedule<T>,
    start_h: T,
    tie_break: TieBreak,
) -> Result<(ScheduleString, T), DecisionError> {
    if model.demand() == 0 {
        return Ok((ScheduleString::empty(), T::zero()));
    }

    struct Search<'a, T: Scalar> {
        model: &'a PtaModel<T>,
        prices: &'a PriceSchedule<T>,
        tie_break: TieBreak,
        events: Vec<usize>,
        best: Option<(ScheduleString, T)>,
    }

    impl<T: Scalar> Search<'_, T> {
        fn dfs(
            &mut self,
            state: usize,
            last_event: Option<usize>,
            time_h: T,
            energy_cost: T,
        ) -> Result<(), DecisionError> {
            let tol = T::tol();
            if self.model.is_marked(state) {
                let d = self.model.demand();
                let cost = energy_cost / T::from_count(d)
                    + T::from_count(state - d);
                let replace = match &self.best {
                    None => true,
                    Some((s, best_cost)) => {
                        let challenger = ScheduleString::new(self.events.clone())
                            .expect("search never builds consecutive idles");
                        prefer(cost, &challenger, *best_cost, s, self.tie_break)
                    }
                };
                if replace {
                    let s = ScheduleString::new(self.events.clone())
                        .expect("search never builds consecutive idles");
                    self.best = Some((s, cost));
                }
                return Ok(());
            }
            for event in self.model.feasible_events(state, last_event) {
                let next = state + event;
                let end_h = time_h + self.model.event_duration(event)?;
                // A milestone crossed by this event must be crossed in time,
                // and a milestone still ahead must not have its deadline
                // already behind us.
                let mut dead = false;
                for c in self.model.constraints() {
                    if c.applies_at <= state {
                        continue;
                    }
                    let deadline = self.model.start_time_h() + c.bound_h;
                    if end_h > deadline + tol {
                        dead = true;
                        break;
                    }
                }
                if dead {
                    continue;
                }
                let power = self.model.power_mw(event)?;
                let cost = self
                    .prices
                    .transition_energy_cost(power, time_h, end_h)?;
                self.events.push(event);
                self.dfs(next, Some(event), end_h, energy_cost + cost)?;
                self.events.pop();
            }
            Ok(())
        }
    }

    let mut search = Search {
        model,
        prices,
        tie_break,
        events: Vec::new(),
        best: None,
    };
    search.dfs(0, None, start_h, T::zero())?;
    search.best.ok_or(DecisionError::Infeasible {
        state: 0,
        at_h: start_h.as_f64(),
    })
}

/// The maximum-utilization reference schedule: full batches back to back,
/// one remainder batch, no idles. Errors when even this earliest-possible
/// schedule misses a milestone.
pub fn benchmark_schedule<T: Scalar>(
    model: &PtaModel<T>,
) -> Result<ScheduleString, DecisionError> {
    let d = model.demand();
    let h = model.max_event();
    let mut events = vec![h; d / h];
    if !d.is_multiple_of(h) {
        events.push(d % h);
    }
    let s = ScheduleString::new(events).expect("full batches contain no idles");
    match model.check_constraints(0, model.start_time_h(), &s)? {
        ConstraintCheck::Valid => Ok(s),
        ConstraintCheck::Violated { constraint, at_h } => {
            Err(DecisionError::InfeasibleDeadline {
                quantity: constraint.applies_at,
                deadline_h: (model.start_time_h() + constraint.bound_h).as_f64(),
                at_h: at_h.as_f64(),
            })
        }
    }
}
