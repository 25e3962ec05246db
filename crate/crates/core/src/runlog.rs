//! Run records: everything observed while a schedule executed.
//!
//! A [`RunLog`] is fully deterministic — it carries no wall-clock
//! timestamps, only grid times — so two runs over identical inputs serialize
//! to identical bytes. The metadata embeds the specs and initial tariff,
//! which makes a stored log self-contained: reports and benchmark
//! comparisons can be rebuilt from the log alone.

use serde::{Deserialize, Serialize};

use crate::decision::{DecisionRecord, LookaheadConfig};
use crate::pta::{MachineSpec, OrderSpec, ScheduleString};
use crate::scalar::Scalar;
use crate::tariff::PriceSchedule;

/// How the run was driven: by the lookahead controller or by a fixed,
/// pre-computed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "controller", rename_all = "snake_case")]
pub enum RunMode {
    Lookahead { config: LookaheadConfig },
    Fixed { schedule: ScheduleString },
}

/// Inputs the run was produced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunMeta<T: Scalar> {
    pub machine: MachineSpec<T>,
    pub order: OrderSpec<T>,
    /// Tariff in force when the run started (before any disturbances).
    pub prices: PriceSchedule<T>,
    /// Content digest of `prices`; comparisons require matching digests.
    pub tariff_digest: String,
    /// Grid time of the first decision.
    pub start_h: T,
    pub mode: RunMode,
}

/// One executed event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepRecord<T: Scalar> {
    pub step: usize,
    /// Grid interval the event occupied.
    pub start_h: T,
    pub end_h: T,
    pub state_before: usize,
    pub state_after: usize,
    /// Batch size executed (0 is an idle slot).
    pub event: usize,
    /// Electrical energy drawn by the event.
    pub energy_mwh: T,
    /// What that energy cost under the tariff in force while it ran.
    pub energy_cost: T,
    /// The controller's view at the decision, when one was taken.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decision: Option<DecisionRecord<T>>,
}

/// Fold of the step records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunTotals<T: Scalar> {
    pub energy_mwh: T,
    pub energy_cost: T,
    pub parts_produced: usize,
    /// Grid time the machine went quiet.
    pub end_h: T,
}

/// A constraint the executed schedule failed to honour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound = "")]
pub enum ConstraintBreach<T: Scalar> {
    /// A milestone quantity arrived after its deadline (grid hours).
    Deadline { quantity: usize, deadline_h: T, at_h: T },
    /// The schedule ended without meeting demand.
    DemandShortfall { produced: usize, demanded: usize },
}

/// How the run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case", bound = "")]
pub enum RunOutcome<T: Scalar> {
    /// Demand met, all constraints honoured.
    Completed,
    /// The schedule executed to the end but broke constraints; kept for
    /// what-if analysis rather than discarded.
    ConstraintViolated { breaches: Vec<ConstraintBreach<T>> },
    /// The controller found no valid candidate and stopped early.
    ReschedulingFailure { at_h: T, state: usize },
}

impl<T: Scalar> RunOutcome<T> {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

/// Complete record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunLog<T: Scalar> {
    pub meta: RunMeta<T>,
    pub steps: Vec<StepRecord<T>>,
    pub totals: RunTotals<T>,
    pub outcome: RunOutcome<T>,
}

impl<T: Scalar> RunLog<T> {
    /// The schedule that actually ran, step by step.
    ///
    /// # Panics
    /// If the log was tampered with into containing consecutive idles;
    /// logs produced by this crate always satisfy the invariant.
    pub fn schedule(&self) -> ScheduleString {
        ScheduleString::new(self.steps.iter().map(|s| s.event).collect())
            .expect("executed schedules never contain consecutive idles")
    }
}
